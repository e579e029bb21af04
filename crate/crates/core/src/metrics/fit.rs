//! Monotone-ish regressions used before PLCC.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

/// Least-squares cubic in a centred and scaled variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Poly3 {
    pub coeffs: [f64; 4],
    pub center: f64,
    pub scale: f64,
}

impl Poly3 {
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.scale;
        let [a, b, c, d] = self.coeffs;
        a + t * (b + t * (c + t * d))
    }
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Cubic least squares of `y` on `x`. `None` for fewer than four points or a
/// constant `x`.
pub fn fit_poly3(x: &[f64], y: &[f64]) -> Option<Poly3> {
    if x.len() < 4 || x.len() != y.len() {
        return None;
    }
    let (center, scale) = mean_std(x);
    if scale == 0.0 {
        return None;
    }
    let a = DMatrix::from_fn(x.len(), 4, |i, j| ((x[i] - center) / scale).powi(j as i32));
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    Some(Poly3 {
        coeffs: [sol[0], sol[1], sol[2], sol[3]],
        center,
        scale,
    })
}

/// `(b1 - b2) / (1 + exp(-(x - b3) / b4)) + b2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Logistic4 {
    pub b: [f64; 4],
}

impl Logistic4 {
    pub fn eval(&self, x: f64) -> f64 {
        let [b1, b2, b3, b4] = self.b;
        (b1 - b2) / (1.0 + (-(x - b3) / b4).exp()) + b2
    }

    fn jacobian_row(&self, x: f64) -> Vector4<f64> {
        let [b1, b2, b3, b4] = self.b;
        let s = 1.0 / (1.0 + (-(x - b3) / b4).exp());
        let ds = s * (1.0 - s);
        Vector4::new(s, 1.0 - s, -(b1 - b2) * ds / b4, -(b1 - b2) * ds * (x - b3) / (b4 * b4))
    }
}

fn sse(f: &Logistic4, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| (f.eval(a) - b).powi(2)).sum()
}

/// Levenberg-Marquardt fit. `None` when it fails to converge within the
/// iteration budget or produces a non-finite model.
pub fn fit_logistic4(x: &[f64], y: &[f64]) -> Option<Logistic4> {
    if x.len() < 4 || x.len() != y.len() {
        return None;
    }
    let (mx, sx) = mean_std(x);
    let (ymin, ymax) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if sx == 0.0 || ymax == ymin {
        return None;
    }
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * b).sum();
    let b4 = if cov >= 0.0 { sx } else { -sx };
    let mut f = Logistic4 { b: [ymax, ymin, mx, b4] };
    let mut cost = sse(&f, x, y);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&a, &b) in x.iter().zip(y) {
            let j = f.jacobian_row(a);
            let r = b - f.eval(a);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let cand = Logistic4 {
                b: [f.b[0] + step[0], f.b[1] + step[1], f.b[2] + step[2], f.b[3] + step[3]],
            };
            let c = sse(&cand, x, y);
            if c.is_finite() && c <= cost && cand.b[3] != 0.0 {
                let rel = (cost - c) / cost.max(1e-300);
                f = cand;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 || step.norm() < 1e-12 * (1.0 + f.b.iter().map(|v| v.abs()).sum::<f64>()) {
                    return Some(f);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: a stationary point.
            return f.b.iter().all(|v| v.is_finite()).then_some(f);
        }
    }
    None
}
