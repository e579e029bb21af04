//! Transform-domain quantization that reproduces block-DCT and wavelet
//! compression artifacts without producing bitstreams.

use std::f64::consts::PI;

use super::filters::{crop, pad_to_multiple, Plane};

/// Annex K luminance quantization table (quality 50).
pub const JPEG_LUMA_TABLE: [f64; 64] = [
    16.0, 11.0, 10.0, 16.0, 24.0, 40.0, 51.0, 61.0, //
    12.0, 12.0, 14.0, 19.0, 26.0, 58.0, 60.0, 55.0, //
    14.0, 13.0, 16.0, 24.0, 40.0, 57.0, 69.0, 56.0, //
    14.0, 17.0, 22.0, 29.0, 51.0, 87.0, 80.0, 62.0, //
    18.0, 22.0, 37.0, 56.0, 68.0, 109.0, 103.0, 77.0, //
    24.0, 35.0, 55.0, 64.0, 81.0, 104.0, 113.0, 92.0, //
    49.0, 64.0, 78.0, 87.0, 103.0, 121.0, 120.0, 101.0, //
    72.0, 92.0, 95.0, 98.0, 112.0, 100.0, 103.0, 99.0,
];

fn dct_basis() -> [[f64; 8]; 8] {
    let mut m = [[0.0; 8]; 8];
    for (u, row) in m.iter_mut().enumerate() {
        let alpha = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        for (x, v) in row.iter_mut().enumerate() {
            *v = alpha * (((2 * x + 1) as f64 * u as f64 * PI) / 16.0).cos();
        }
    }
    m
}

/// Quantize a `[0, 1]` plane through an 8x8 orthonormal DCT with the
/// luminance table multiplied by `scale`, working on the 0..255 scale.
pub fn jpeg_plane(p: &Plane, scale: f64) -> Plane {
    let basis = dct_basis();
    let padded = pad_to_multiple(p, 8);
    let (h, w) = (padded.height, padded.width);
    let mut out = padded.data.clone();
    let mut block = [[0.0f64; 8]; 8];
    let mut tmp = [[0.0f64; 8]; 8];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            for y in 0..8 {
                for x in 0..8 {
                    block[y][x] = padded.data[(by + y) * w + bx + x] as f64 * 255.0 - 128.0;
                }
            }
            // coeff = B * block * B^T
            for u in 0..8 {
                for x in 0..8 {
                    tmp[u][x] = (0..8).map(|y| basis[u][y] * block[y][x]).sum();
                }
            }
            for u in 0..8 {
                for v in 0..8 {
                    let c: f64 = (0..8).map(|x| tmp[u][x] * basis[v][x]).sum();
                    let q = (JPEG_LUMA_TABLE[u * 8 + v] * scale).max(1.0);
                    block[u][v] = (c / q).round() * q;
                }
            }
            // block = B^T * coeff * B
            for y in 0..8 {
                for v in 0..8 {
                    tmp[y][v] = (0..8).map(|u| basis[u][y] * block[u][v]).sum();
                }
            }
            for y in 0..8 {
                for x in 0..8 {
                    let v: f64 = (0..8).map(|v| tmp[y][v] * basis[v][x]).sum();
                    out[(by + y) * w + bx + x] = ((v + 128.0) / 255.0) as f32;
                }
            }
        }
    }
    crop(&Plane::new(h, w, out), p.height, p.width)
}

/// One level of the LeGall 5/3 lifting transform on an even-length signal:
/// returns `(approx, detail)`.
fn lift53_forward(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() / 2;
    let even = |i: usize| x[(2 * i).min(x.len() - 2)];
    let d: Vec<f64> = (0..n).map(|i| x[2 * i + 1] - 0.5 * (even(i) + even(i + 1))).collect();
    let s: Vec<f64> = (0..n).map(|i| x[2 * i] + 0.25 * (d[i.saturating_sub(1)] + d[i])).collect();
    (s, d)
}

fn lift53_inverse(s: &[f64], d: &[f64]) -> Vec<f64> {
    let n = s.len();
    let even: Vec<f64> = (0..n).map(|i| s[i] - 0.25 * (d[i.saturating_sub(1)] + d[i])).collect();
    let mut x = vec![0.0; 2 * n];
    for i in 0..n {
        x[2 * i] = even[i];
        x[2 * i + 1] = d[i] + 0.5 * (even[i] + even[(i + 1).min(n - 1)]);
    }
    x
}

/// In-place 2-D lifting step on the top-left `h x w` region of a row-major
/// buffer with row stride `stride`. Output layout: LL | HL over LH | HH.
fn dwt2_level(buf: &mut [f64], stride: usize, h: usize, w: usize, forward: bool) {
    let row_pass = |buf: &mut [f64]| {
        for y in 0..h {
            let row = &mut buf[y * stride..y * stride + w];
            if forward {
                let (s, d) = lift53_forward(row);
                row[..w / 2].copy_from_slice(&s);
                row[w / 2..].copy_from_slice(&d);
            } else {
                let x = lift53_inverse(&row[..w / 2].to_vec(), &row[w / 2..].to_vec());
                row.copy_from_slice(&x);
            }
        }
    };
    let col_pass = |buf: &mut [f64]| {
        for x in 0..w {
            let col: Vec<f64> = (0..h).map(|y| buf[y * stride + x]).collect();
            let out = if forward {
                let (s, d) = lift53_forward(&col);
                [s, d].concat()
            } else {
                lift53_inverse(&col[..h / 2], &col[h / 2..])
            };
            for (y, v) in out.into_iter().enumerate() {
                buf[y * stride + x] = v;
            }
        }
    };
    if forward {
        row_pass(buf);
        col_pass(buf);
    } else {
        col_pass(buf);
        row_pass(buf);
    }
}

/// Two-level 5/3 wavelet decomposition with uniform mid-tread quantization
/// of every detail subband at `step` (in `[0, 1]` units).
pub fn wavelet_plane(p: &Plane, step: f64) -> Plane {
    let padded = pad_to_multiple(p, 4);
    let (h, w) = (padded.height, padded.width);
    let mut buf: Vec<f64> = padded.data.iter().map(|&v| v as f64).collect();
    dwt2_level(&mut buf, w, h, w, true);
    dwt2_level(&mut buf, w, h / 2, w / 2, true);
    for y in 0..h {
        for x in 0..w {
            let in_ll = y < h / 4 && x < w / 4;
            if !in_ll {
                let c = &mut buf[y * w + x];
                *c = (*c / step).round() * step;
            }
        }
    }
    dwt2_level(&mut buf, w, h / 2, w / 2, false);
    dwt2_level(&mut buf, w, h, w, false);
    let out = Plane::new(h, w, buf.into_iter().map(|v| v as f32).collect());
    crop(&out, p.height, p.width)
}
