//! Forward and backward kernels for the tape operations. All kernels work on
//! row-major `[N, C, H, W]` buffers.

use rayon::prelude::*;

use super::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.oh * self.ow
    }

    fn in_image(&self) -> usize {
        self.c * self.h * self.w
    }

    fn out_image(&self) -> usize {
        self.k * self.out_plane()
    }

    /// True for 1x1, stride-1, unpadded convolutions where the input image
    /// already is the column matrix.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.padding == 0
    }
}

fn im2col<T: Scalar>(g: &ConvGeom, img: &[T], cols: &mut [T]) {
    let plane = g.out_plane();
    let pad = g.padding as isize;
    for c in 0..g.c {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    let dst_row = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        dst_row.fill(T::zero());
                        continue;
                    }
                    let src = &img[(c * g.h + iy as usize) * g.w..(c * g.h + iy as usize + 1) * g.w];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - pad;
                        *d = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im_add<T: Scalar>(g: &ConvGeom, cols: &[T], img: &mut [T]) {
    let plane = g.out_plane();
    let pad = g.padding as isize;
    for c in 0..g.c {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let base = (c * g.h + iy as usize) * g.w;
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kx) as isize - pad;
                        if ix >= 0 && ix < g.w as isize {
                            img[base + ix as usize] = img[base + ix as usize] + src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward<T: Scalar>(g: &ConvGeom, input: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); g.n * g.out_image()];
    let plane = g.out_plane();
    let patch = g.patch();
    out.par_chunks_mut(g.out_image())
        .zip(input.par_chunks(g.in_image()))
        .for_each(|(out_n, in_n)| {
            for (k, chunk) in out_n.chunks_mut(plane).enumerate() {
                chunk.fill(bias[k]);
            }
            if g.is_pointwise() {
                T::gemm(g.k, patch, plane, weight, (patch, 1), in_n, (plane, 1), out_n, (plane, 1), true);
            } else {
                let mut cols = vec![T::zero(); patch * plane];
                im2col(g, in_n, &mut cols);
                T::gemm(g.k, patch, plane, weight, (patch, 1), &cols, (plane, 1), out_n, (plane, 1), true);
            }
        });
    out
}

/// Returns `(d_input, d_weight, d_bias)`.
pub(crate) fn conv2d_backward<T: Scalar>(
    g: &ConvGeom,
    input: &[T],
    weight: &[T],
    grad_out: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let plane = g.out_plane();
    let patch = g.patch();
    let mut d_input = vec![T::zero(); g.n * g.in_image()];
    let partials: Vec<(Vec<T>, Vec<T>)> = d_input
        .par_chunks_mut(g.in_image())
        .zip(input.par_chunks(g.in_image()))
        .zip(grad_out.par_chunks(g.out_image()))
        .map(|((din_n, in_n), gout_n)| {
            let mut dw = vec![T::zero(); g.k * patch];
            let db: Vec<T> = gout_n.chunks(plane).map(|c| c.iter().copied().sum()).collect();
            if g.is_pointwise() {
                // dW = gout [K x P] * in^T [P x C]
                T::gemm(g.k, plane, patch, gout_n, (plane, 1), in_n, (1, plane), &mut dw, (patch, 1), false);
                // dIn = W^T [C x K] * gout [K x P]
                T::gemm(patch, g.k, plane, weight, (1, patch), gout_n, (plane, 1), din_n, (plane, 1), false);
            } else {
                let mut cols = vec![T::zero(); patch * plane];
                im2col(g, in_n, &mut cols);
                T::gemm(g.k, plane, patch, gout_n, (plane, 1), &cols, (1, plane), &mut dw, (patch, 1), false);
                T::gemm(patch, g.k, plane, weight, (1, patch), gout_n, (plane, 1), &mut cols, (plane, 1), false);
                col2im_add(g, &cols, din_n);
            }
            (dw, db)
        })
        .collect();
    // Reduce in batch order so the result does not depend on scheduling.
    let mut d_weight = vec![T::zero(); g.k * patch];
    let mut d_bias = vec![T::zero(); g.k];
    for (dw, db) in partials {
        for (a, b) in d_weight.iter_mut().zip(dw) {
            *a = *a + b;
        }
        for (a, b) in d_bias.iter_mut().zip(db) {
            *a = *a + b;
        }
    }
    (d_input, d_weight, d_bias)
}

/// Windowed max/avg pooling without padding. Returns output and, for max
/// pooling, the flat input index of each selected element.
pub(crate) fn pool_forward<T: Scalar>(
    dims: [usize; 4],
    input: &[T],
    window: (usize, usize),
    stride: (usize, usize),
    is_max: bool,
) -> (Vec<T>, Vec<usize>, usize, usize) {
    let [n, c, h, w] = dims;
    let oh = (h - window.0) / stride.0 + 1;
    let ow = (w - window.1) / stride.1 + 1;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::new();
    let inv = T::one() / T::from_usize(window.0 * window.1).unwrap();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let (y0, x0) = (oy * stride.0, ox * stride.1);
                if is_max {
                    let mut best = base + y0 * w + x0;
                    for y in y0..y0 + window.0 {
                        for x in x0..x0 + window.1 {
                            let idx = base + y * w + x;
                            if input[idx] > input[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(input[best]);
                    arg.push(best);
                } else {
                    let mut acc = T::zero();
                    for y in y0..y0 + window.0 {
                        for x in x0..x0 + window.1 {
                            acc = acc + input[base + y * w + x];
                        }
                    }
                    out.push(acc * inv);
                }
            }
        }
    }
    (out, arg, oh, ow)
}

pub(crate) fn avg_pool_backward<T: Scalar>(
    dims: [usize; 4],
    grad_out: &[T],
    window: (usize, usize),
    stride: (usize, usize),
    oh: usize,
    ow: usize,
) -> Vec<T> {
    let [n, c, h, w] = dims;
    let mut grad = vec![T::zero(); n * c * h * w];
    let inv = T::one() / T::from_usize(window.0 * window.1).unwrap();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let g = grad_out[(plane * oh + oy) * ow + ox] * inv;
                for y in oy * stride.0..oy * stride.0 + window.0 {
                    for x in ox * stride.1..ox * stride.1 + window.1 {
                        grad[base + y * w + x] = grad[base + y * w + x] + g;
                    }
                }
            }
        }
    }
    grad
}

/// Reduce over the channel axis, producing `[N, 1, H, W]`.
pub(crate) fn reduce_channel_forward<T: Scalar>(dims: [usize; 4], input: &[T], is_max: bool) -> (Vec<T>, Vec<usize>) {
    let [n, c, h, w] = dims;
    let plane = h * w;
    let mut out = vec![T::zero(); n * plane];
    let mut arg = if is_max { vec![0usize; n * plane] } else { Vec::new() };
    let inv = T::one() / T::from_usize(c).unwrap();
    for b in 0..n {
        for p in 0..plane {
            let first = b * c * plane + p;
            if is_max {
                let mut best = first;
                for ch in 1..c {
                    let idx = first + ch * plane;
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                out[b * plane + p] = input[best];
                arg[b * plane + p] = best;
            } else {
                let mut acc = T::zero();
                for ch in 0..c {
                    acc = acc + input[first + ch * plane];
                }
                out[b * plane + p] = acc * inv;
            }
        }
    }
    (out, arg)
}

fn corner_aligned(out_idx: usize, out_len: usize, in_len: usize) -> (usize, usize, f64) {
    if out_len == 1 || in_len == 1 {
        return (0, 0, 0.0);
    }
    let src = out_idx as f64 * (in_len - 1) as f64 / (out_len - 1) as f64;
    let lo = (src.floor() as usize).min(in_len - 1);
    let hi = (lo + 1).min(in_len - 1);
    (lo, hi, src - lo as f64)
}

pub(crate) fn upsample_forward<T: Scalar>(dims: [usize; 4], input: &[T], oh: usize, ow: usize) -> Vec<T> {
    let [n, c, h, w] = dims;
    let ys: Vec<_> = (0..oh).map(|o| corner_aligned(o, oh, h)).collect();
    let xs: Vec<_> = (0..ow).map(|o| corner_aligned(o, ow, w)).collect();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let one = T::one();
    for plane in 0..n * c {
        let src = &input[plane * h * w..(plane + 1) * h * w];
        for &(y0, y1, fy) in &ys {
            let fy = T::from_f64_lossy(fy);
            for &(x0, x1, fx) in &xs {
                let fx = T::from_f64_lossy(fx);
                let top = src[y0 * w + x0] * (one - fx) + src[y0 * w + x1] * fx;
                let bot = src[y1 * w + x0] * (one - fx) + src[y1 * w + x1] * fx;
                out.push(top * (one - fy) + bot * fy);
            }
        }
    }
    out
}

pub(crate) fn upsample_backward<T: Scalar>(dims: [usize; 4], grad_out: &[T], oh: usize, ow: usize) -> Vec<T> {
    let [n, c, h, w] = dims;
    let ys: Vec<_> = (0..oh).map(|o| corner_aligned(o, oh, h)).collect();
    let xs: Vec<_> = (0..ow).map(|o| corner_aligned(o, ow, w)).collect();
    let mut grad = vec![T::zero(); n * c * h * w];
    let one = T::one();
    for plane in 0..n * c {
        let dst = &mut grad[plane * h * w..(plane + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            let fy = T::from_f64_lossy(fy);
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let fx = T::from_f64_lossy(fx);
                let g = grad_out[(plane * oh + oy) * ow + ox];
                dst[y0 * w + x0] = dst[y0 * w + x0] + g * (one - fy) * (one - fx);
                dst[y0 * w + x1] = dst[y0 * w + x1] + g * (one - fy) * fx;
                dst[y1 * w + x0] = dst[y1 * w + x0] + g * fy * (one - fx);
                dst[y1 * w + x1] = dst[y1 * w + x1] + g * fy * fx;
            }
        }
    }
    grad
}

/// Numpy-style broadcast of two shapes (right-aligned, size-1 axes expand).
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For every element of `out_shape`, the flat index into a tensor of shape
/// `src` broadcast to it.
pub(crate) fn broadcast_index(src: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1;
    for i in (0..src.len()).rev() {
        let axis = i + rank - src.len();
        strides[axis] = if src[i] == 1 { 0 } else { acc };
        acc *= src[i];
    }
    let total: usize = out_shape.iter().product();
    let mut idx = Vec::with_capacity(total);
    let mut counter = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..total {
        idx.push(offset);
        for axis in (0..rank).rev() {
            counter[axis] += 1;
            offset += strides[axis];
            if counter[axis] < out_shape[axis] {
                break;
            }
            offset -= strides[axis] * counter[axis];
            counter[axis] = 0;
        }
    }
    idx
}
