//! Central finite-difference gradient checks in double precision.
//!
//! The checks only ever evaluate forward passes to form the numerical
//! gradient, so they stay independent of the backward kernels they verify.

use super::{Graph, Tensor, TensorError, Var};

/// Relative error with a floor on the denominator so near-zero gradients are
/// compared absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub worst_input: usize,
    pub worst_index: usize,
    pub checked: usize,
}

fn eval<F>(inputs: &[Tensor<f64>], f: &F) -> Result<f64, TensorError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, TensorError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    Ok(g.value(out).item())
}

/// Compare the tape gradient of the scalar `f(inputs)` with central
/// differences for every element of every input.
pub fn check_elementwise<F>(inputs: &[Tensor<f64>], f: F, step: f64) -> Result<GradCheck, TensorError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, TensorError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst_input: 0,
        worst_index: 0,
        checked: 0,
    };
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (which, &v) in vars.iter().enumerate() {
        let analytic = g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(inputs[which].shape()));
        for i in 0..inputs[which].len() {
            let orig = inputs[which].data()[i];
            probe[which].data_mut()[i] = orig + step;
            let plus = eval(&probe, &f)?;
            probe[which].data_mut()[i] = orig - step;
            let minus = eval(&probe, &f)?;
            probe[which].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic.data()[i], numeric);
            report.checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_input = which;
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}

/// Directional check: compares `grad . dir` with the central difference of
/// `f(x + t*dir)` for each supplied direction (one direction per input set).
pub fn check_directional<F>(
    inputs: &[Tensor<f64>],
    directions: &[Vec<Tensor<f64>>],
    f: F,
    step: f64,
) -> Result<Vec<f64>, TensorError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, TensorError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let grads: Vec<Tensor<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    let shifted = |sign: f64, dir: &[Tensor<f64>]| -> Vec<Tensor<f64>> {
        inputs
            .iter()
            .zip(dir)
            .map(|(x, d)| {
                let data = x.data().iter().zip(d.data()).map(|(&a, &b)| a + sign * step * b).collect();
                Tensor::new(x.shape(), data).expect("same shape")
            })
            .collect()
    };
    let mut errors = Vec::with_capacity(directions.len());
    for dir in directions {
        let analytic: f64 = grads
            .iter()
            .zip(dir)
            .map(|(gr, d)| gr.data().iter().zip(d.data()).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let numeric = (eval(&shifted(1.0, dir), &f)? - eval(&shifted(-1.0, dir), &f)?) / (2.0 * step);
        errors.push(relative_error(analytic, numeric));
    }
    Ok(errors)
}
