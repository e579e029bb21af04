use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::fit::{fit_logistic4, fit_poly3};
use super::MetricError;

/// Nonlinear mapping applied to predictions before PLCC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mapping {
    #[default]
    None,
    Poly3,
    Logistic4,
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mapping::None => "none",
            Mapping::Poly3 => "poly3",
            Mapping::Logistic4 => "logistic4",
        })
    }
}

impl FromStr for Mapping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Mapping::None),
            "poly3" => Ok(Mapping::Poly3),
            "logistic4" => Ok(Mapping::Logistic4),
            other => Err(format!("unknown mapping `{other}` (none|poly3|logistic4)")),
        }
    }
}

fn validate(x: &[f64], y: &[f64], need: usize) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < need {
        return Err(MetricError::TooFewPoints { need, got: x.len() });
    }
    for v in [x, y] {
        if let Some(i) = v.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite(i));
        }
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(MetricError::Constant("first"));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(MetricError::Constant("second"));
    }
    Ok(())
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Raw Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    validate(x, y, 2)?;
    Ok(pearson_unchecked(x, y))
}

/// 1-based ranks with ties sharing their average rank.
pub(crate) fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    validate(x, y, 2)?;
    Ok(pearson_unchecked(&average_ranks(x), &average_ranks(y)))
}

/// Kendall tau-b.
pub fn krcc(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    validate(x, y, 2)?;
    let n = x.len();
    let (mut s, mut tx, mut ty) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            s += dx * dy;
            tx += (dx == 0) as i64;
            ty += (dy == 0) as i64;
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt();
    Ok((s as f64 / denom).clamp(-1.0, 1.0))
}

/// PLCC together with whether the requested mapping was actually used.
#[derive(Clone, Debug, PartialEq)]
pub struct PlccResult {
    pub value: f64,
    pub warning: Option<String>,
}

/// Pearson correlation between `mapping(x)` and `y`. A fit that fails to
/// converge falls back to raw Pearson and sets `warning`.
pub fn plcc(x: &[f64], y: &[f64], mapping: Mapping) -> Result<PlccResult, MetricError> {
    let need = if mapping == Mapping::None { 2 } else { 4 };
    validate(x, y, need)?;
    let raw = || PlccResult {
        value: pearson_unchecked(x, y),
        warning: None,
    };
    let mapped = match mapping {
        Mapping::None => return Ok(raw()),
        Mapping::Poly3 => fit_poly3(x, y).map(|f| x.iter().map(|&v| f.eval(v)).collect::<Vec<_>>()),
        Mapping::Logistic4 => fit_logistic4(x, y).map(|f| x.iter().map(|&v| f.eval(v)).collect::<Vec<_>>()),
    };
    match mapped {
        Some(fx) if fx.iter().all(|v| v.is_finite()) && fx.iter().any(|&v| v != fx[0]) => Ok(PlccResult {
            value: pearson_unchecked(&fx, y),
            warning: None,
        }),
        _ => Ok(PlccResult {
            warning: Some(format!("{mapping} fit did not converge; reporting raw Pearson")),
            ..raw()
        }),
    }
}

/// SRCC, KRCC and PLCC of predictions `x` against targets `y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub srcc: f64,
    pub krcc: f64,
    pub plcc: f64,
    pub n: usize,
    pub mapping: Mapping,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn correlate(x: &[f64], y: &[f64], mapping: Mapping) -> Result<CorrelationReport, MetricError> {
    let p = plcc(x, y, mapping)?;
    Ok(CorrelationReport {
        srcc: srcc(x, y)?,
        krcc: krcc(x, y)?,
        plcc: p.value,
        n: x.len(),
        mapping,
        warning: p.warning,
    })
}
