use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::distortion::{apply_distortion, DistortionKind, DistortionSpec};
use crate::rng::rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn textured(seed: u64, side: usize) -> ImageBuf {
    let mut r = rng(seed);
    let data = (0..side * side * 3)
        .map(|i| {
            let p = i / 3;
            let (y, x) = ((p / side) as f32, (p % side) as f32);
            0.5 + 0.3 * (x * 0.3).sin() * (y * 0.2).cos() + r.gen_range(-0.1..0.1f32)
        })
        .collect();
    ImageBuf::from_unclamped(side, side, data)
}

#[test]
fn psnr_examples() {
    let a = ImageBuf::filled(16, 16, [0.2; 3]);
    assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    let b = ImageBuf::filled(16, 16, [0.3; 3]);
    // f32 storage of 0.2/0.3 perturbs the difference at ~1e-8.
    assert!(close(psnr(&a, &b).unwrap(), 20.0, 1e-5));
    let c = ImageBuf::filled(16, 16, [0.7; 3]);
    assert!(close(psnr(&a, &c).unwrap(), 20.0 * 2f64.log10(), 1e-5));
    let d = ImageBuf::filled(16, 17, [0.7; 3]);
    assert!(matches!(psnr(&a, &d), Err(MetricError::ShapeMismatch(..))));
}

#[test]
fn psnr_falls_with_noise_table() {
    let img = textured(1, 64);
    let values: Vec<f64> = (1..=5)
        .map(|l| {
            let d = apply_distortion(&img, &DistortionSpec::new(DistortionKind::WhiteNoise, l, 9).unwrap()).unwrap();
            psnr(&img, &d).unwrap()
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn ssim_examples() {
    let img = textured(2, 32);
    assert!(close(ssim(&img, &img).unwrap(), 1.0, 1e-12));
    let a = ImageBuf::filled(16, 16, [0.5; 3]);
    let b = ImageBuf::filled(16, 16, [0.25; 3]);
    let expected = (2.0 * 0.125 + 1e-4) / (0.3125 + 1e-4);
    assert!(close(ssim(&a, &b).unwrap(), expected, 1e-9));
    assert!(close(expected, 0.80006, 1e-5));
    let small = ImageBuf::filled(10, 16, [0.5; 3]);
    assert!(matches!(ssim(&small, &small), Err(MetricError::TooSmall { .. })));

    let noisy = |l| apply_distortion(&img, &DistortionSpec::new(DistortionKind::WhiteNoise, l, 4).unwrap()).unwrap();
    assert!(ssim(&img, &noisy(5)).unwrap() < ssim(&img, &noisy(1)).unwrap());
}

/// Direct SSIM: explicit 2-D Gaussian weights per window.
#[test]
fn ssim_matches_direct_window_sum() {
    let a = textured(3, 14);
    let b = textured(4, 14);
    let (x, y) = (a.luma(), b.luma());
    let mut w2 = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for i in 0..11 {
        for j in 0..11 {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            w2[i][j] = (-(di * di + dj * dj) / 4.5).exp();
            total += w2[i][j];
        }
    }
    let mut acc = 0.0;
    for oy in 0..4 {
        for ox in 0..4 {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = (oy + i) * 14 + ox + j;
                    let wt = w2[i][j] / total;
                    mx += wt * x[k];
                    my += wt * y[k];
                    sxx += wt * x[k] * x[k];
                    syy += wt * y[k] * y[k];
                    sxy += wt * x[k] * y[k];
                }
            }
            let (vx, vy, c) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            acc += ((2.0 * mx * my + 1e-4) * (2.0 * c + 9e-4)) / ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
        }
    }
    assert!(close(ssim(&a, &b).unwrap(), acc / 16.0, 1e-12));
}

#[test]
fn correlation_examples() {
    assert!(close(srcc(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), -0.5, 1e-12));
    let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let cubed: Vec<f64> = x.iter().map(|v| v * v * v + 2.0).collect();
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    assert_eq!(srcc(&x, &cubed).unwrap(), 1.0);
    assert_eq!(srcc(&x, &rev).unwrap(), -1.0);

    assert!(close(krcc(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(), 1.0 / 3.0, 1e-12));
    assert_eq!(krcc(&x, &x).unwrap(), 1.0);
    assert_eq!(krcc(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), -1.0);

    let affine: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!(close(plcc(&x, &affine, Mapping::None).unwrap().value, 1.0, 1e-12));
    assert!(close(plcc(&x, &neg, Mapping::None).unwrap().value, -1.0, 1e-12));
    let p = plcc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0], Mapping::None).unwrap().value;
    assert!(close(p, 3.0 / (2.0f64 * (14.0 / 3.0)).sqrt(), 1e-12));
    assert!(close(p, 0.9820, 1e-4));
}

#[test]
fn correlation_errors() {
    assert_eq!(srcc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(MetricError::Constant("first")));
    assert_eq!(krcc(&[1.0, 2.0], &[4.0, 4.0]), Err(MetricError::Constant("second")));
    assert_eq!(pearson(&[1.0], &[1.0]), Err(MetricError::TooFewPoints { need: 2, got: 1 }));
    assert_eq!(srcc(&[1.0, 2.0], &[1.0]), Err(MetricError::LengthMismatch(2, 1)));
    assert_eq!(
        plcc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0], Mapping::Poly3),
        Err(MetricError::TooFewPoints { need: 4, got: 3 })
    );
    assert_eq!(srcc(&[1.0, f64::NAN], &[1.0, 2.0]), Err(MetricError::NonFinite(1)));
}

#[test]
fn fitted_mappings_improve_on_nonlinear_data() {
    let x: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
    let y: Vec<f64> = x.iter().map(|&v| 5.0 / (1.0 + (-(v - 5.0) / 1.2).exp()) + 0.01 * (v * 7.0).sin()).collect();
    let raw = plcc(&x, &y, Mapping::None).unwrap().value;
    let poly = plcc(&x, &y, Mapping::Poly3).unwrap();
    let logi = plcc(&x, &y, Mapping::Logistic4).unwrap();
    assert!(poly.warning.is_none() && logi.warning.is_none());
    assert!(poly.value > raw);
    assert!(logi.value > poly.value && logi.value > 0.999);

    let f = fit_logistic4(&x, &y).unwrap();
    assert!(close(f.b[0], 5.0, 0.05) && close(f.b[1], 0.0, 0.05) && close(f.b[2], 5.0, 0.05));

    // Exact cubic is recovered.
    let cubic: Vec<f64> = x.iter().map(|&v| 0.5 - v + 0.2 * v * v - 0.03 * v * v * v).collect();
    let p = fit_poly3(&x, &cubic).unwrap();
    assert!(x.iter().zip(&cubic).all(|(&a, &b)| close(p.eval(a), b, 1e-9)));
}

#[test]
fn logistic_handles_decreasing_data() {
    let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let y: Vec<f64> = x.iter().map(|&v| 1.0 / (1.0 + ((v - 15.0) / 3.0).exp())).collect();
    let r = plcc(&x, &y, Mapping::Logistic4).unwrap();
    assert!(r.warning.is_none());
    assert!(r.value > 0.999999);
}

// Brute-force definitional oracles.

fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = (0..x.len()).map(|i| (x[i] - mx) * (y[i] - my)).sum();
    let vx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Average rank = (#smaller) + (#equal + 1) / 2.
fn oracle_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let eq = v.iter().filter(|b| *b == a).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

fn oracle_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut c, mut d) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let p = (x[i] - x[j]) * (y[i] - y[j]);
            if p > 0.0 {
                c += 1.0;
            } else if p < 0.0 {
                d += 1.0;
            }
        }
    }
    let ties = |v: &[f64]| -> f64 {
        let mut seen: Vec<f64> = Vec::new();
        let mut t = 0.0;
        for a in v {
            if !seen.contains(a) {
                seen.push(*a);
                let k = v.iter().filter(|b| *b == a).count() as f64;
                t += k * (k - 1.0) / 2.0;
            }
        }
        t
    };
    let n0 = (n * (n - 1)) as f64 / 2.0;
    (c - d) / ((n0 - ties(x)) * (n0 - ties(y))).sqrt()
}

fn tied_vector(r: &mut crate::rng::Rng, n: usize) -> Vec<f64> {
    // Small integer support forces ties.
    let support = r.gen_range(2..=n.max(3));
    loop {
        let v: Vec<f64> = (0..n).map(|_| r.gen_range(0..support) as f64 * 0.5).collect();
        if v.iter().any(|&a| a != v[0]) {
            return v;
        }
    }
}

#[test]
fn correlations_match_brute_force_on_1000_vectors() {
    let mut r = rng(2024);
    for trial in 0..1000 {
        let n = r.gen_range(5..=50);
        let (x, y) = if trial % 2 == 0 {
            (tied_vector(&mut r, n), tied_vector(&mut r, n))
        } else {
            let x: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
            let y: Vec<f64> = x.iter().map(|v| v + r.gen_range(-0.5..0.5)).collect();
            (x, y)
        };
        let s = srcc(&x, &y).unwrap();
        let k = krcc(&x, &y).unwrap();
        let p = pearson(&x, &y).unwrap();
        assert!(close(s, oracle_pearson(&oracle_ranks(&x), &oracle_ranks(&y)), 1e-12), "srcc trial {trial}");
        assert!(close(k, oracle_tau_b(&x, &y), 1e-12), "krcc trial {trial}");
        assert!(close(p, oracle_pearson(&x, &y), 1e-12), "plcc trial {trial}");
    }
}

#[test]
fn normalize_examples() {
    assert_eq!(normalize_scores(&[10.0, 20.0, 30.0], 0.0, 5.0).unwrap(), vec![0.0, 2.5, 5.0]);
    let already = [0.0, 1.25, 5.0, 3.0];
    assert_eq!(normalize_scores(&already, 0.0, 5.0).unwrap(), already.to_vec());
    assert_eq!(normalize_scores(&[2.0, 2.0], 0.0, 5.0), Err(MetricError::Degenerate(2.0)));
}

#[test]
fn group_stats_examples() {
    let rec = |kind, level, score| GroupRecord { kind, level, score };
    let g = group_stats(&[
        rec(DistortionKind::Jitter, 1, 2.0),
        rec(DistortionKind::Jitter, 1, 2.0),
        rec(DistortionKind::Jitter, 1, 2.0),
        rec(DistortionKind::Darken, 2, 1.0),
        rec(DistortionKind::Darken, 2, 3.0),
    ]);
    let c = g.cells[&(DistortionKind::Jitter, 1)];
    assert_eq!((c.mean, c.std, c.n), (2.0, 0.0, 3));
    let c = g.cells[&(DistortionKind::Darken, 2)];
    assert_eq!((c.mean, c.std), (2.0, 1.0));
    assert_eq!(g.warnings.len(), 8);
}

/// Gaussian blur row of the paper's level-5 score table: the Average column
/// is the mean of level means and the mean of level stds.
#[test]
fn kind_average_convention_matches_paper_row() {
    let means = [2.8183, 2.7588, 2.6850, 2.5604, 2.2156];
    let stds = [0.5226, 0.8119, 0.8089, 0.7954, 0.8319];
    // Two-point groups mean +/- std reproduce each cell exactly.
    let mut records = Vec::new();
    for l in 0..5 {
        for s in [-1.0, 1.0] {
            records.push(GroupRecord {
                kind: DistortionKind::GaussianBlur,
                level: l as u8 + 1,
                score: means[l] + s * stds[l],
            });
        }
    }
    let g = group_stats(&records);
    let k = g.kinds[&DistortionKind::GaussianBlur];
    assert!(close(k.mean, 2.6076, 5e-5), "{}", k.mean);
    assert!(close(k.std, 0.7541, 5e-5), "{}", k.std);
}

#[test]
fn group_stats_matches_two_pass_oracle() {
    let mut r = rng(77);
    let mut records = Vec::new();
    for kind in DistortionKind::ALL {
        for level in 1..=5 {
            for _ in 0..r.gen_range(1..12) {
                records.push(GroupRecord {
                    kind,
                    level,
                    score: r.gen_range(0.0..5.0),
                });
            }
        }
    }
    let g = group_stats(&records);
    assert_eq!(g.cells.len(), 125);
    assert!(g.warnings.is_empty());
    for ((kind, level), c) in &g.cells {
        let v: Vec<f64> = records.iter().filter(|x| x.kind == *kind && x.level == *level).map(|x| x.score).collect();
        let mut sum = 0.0;
        for s in &v {
            sum += s;
        }
        let mean = sum / v.len() as f64;
        let mut ss = 0.0;
        for s in &v {
            ss += (s - mean) * (s - mean);
        }
        assert!(close(c.mean, mean, 1e-12));
        assert!(close(c.std, (ss / v.len() as f64).sqrt(), 1e-12));
    }
    let ext = g.extremes();
    assert_eq!(ext.len(), 6);
    let l1 = &ext[0];
    let best = g.cells.iter().filter(|((_, l), _)| *l == 1).max_by(|a, b| a.1.mean.total_cmp(&b.1.mean)).unwrap();
    assert_eq!(l1.best_mean, best.0 .0);
}

fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (5usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-100i32..100, n).prop_map(|v| v.into_iter().map(|a| a as f64 / 4.0).collect()),
            prop::collection::vec(-100i32..100, n).prop_map(|v| v.into_iter().map(|a| a as f64 / 4.0).collect()),
        )
    })
    .prop_filter("non-constant", |(x, y): &(Vec<f64>, Vec<f64>)| {
        x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0])
    })
}

proptest! {
    #[test]
    fn rank_statistics_invariant_under_monotone_maps((x, y) in vec_strategy()) {
        let fx: Vec<f64> = x.iter().map(|v| v.powi(3) + 3.0 * v).collect();
        let gy: Vec<f64> = y.iter().map(|v| (v / 10.0).exp()).collect();
        prop_assert!(close(srcc(&x, &y).unwrap(), srcc(&fx, &gy).unwrap(), 1e-12));
        prop_assert!(close(krcc(&x, &y).unwrap(), krcc(&fx, &gy).unwrap(), 1e-12));
    }

    #[test]
    fn coefficients_symmetric_and_pearson_affine((x, y) in vec_strategy(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        for f in [srcc, krcc, pearson] {
            let v = f(&x, &y).unwrap();
            prop_assert!(close(v, f(&y, &x).unwrap(), 1e-12));
            prop_assert!((-1.0..=1.0).contains(&v));
        }
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let nx: Vec<f64> = x.iter().map(|v| -v).collect();
        let p = pearson(&x, &y).unwrap();
        prop_assert!(close(pearson(&ax, &y).unwrap(), p, 1e-9));
        prop_assert!(close(pearson(&nx, &y).unwrap(), -p, 1e-12));
    }

    #[test]
    fn normalize_preserves_order_and_hits_bounds(raw in prop::collection::vec(-1e3f64..1e3, 2..40), lo in -3.0f64..1.0, span in 0.5f64..10.0) {
        prop_assume!(raw.iter().any(|&v| v != raw[0]));
        let hi = lo + span;
        let out = normalize_scores(&raw, lo, hi).unwrap();
        prop_assert_eq!(out.iter().copied().fold(f64::INFINITY, f64::min), lo);
        prop_assert_eq!(out.iter().copied().fold(f64::NEG_INFINITY, f64::max), hi);
        let order = |v: &[f64]| {
            let mut i: Vec<usize> = (0..v.len()).collect();
            i.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
            i
        };
        prop_assert_eq!(order(&raw), order(&out));
        prop_assert!(close(srcc(&raw, &out).unwrap(), 1.0, 1e-12));
    }
}
