use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::manifest::Manifest;
use super::PipelineError;
use crate::distortion::{Category, DistortionKind};
use crate::metrics::{fit_poly3, group_stats, plcc, srcc, GroupRecord, Mapping};
use crate::sim::Agent;

const HIST_BINS: usize = 10;
const MIN_OVERLAP: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Analysis {
    /// Per kind: mean/std of dmos for each level plus the kind average.
    pub table3_csv: String,
    /// Best/worst kinds per column of `table3_csv`.
    pub extremes_csv: String,
    /// `all` followed by the generated tasks.
    pub srcc_labels: Vec<String>,
    pub srcc_matrix: Vec<Vec<f64>>,
    /// Mean per-agent normalised score by category and task.
    pub table2_csv: String,
    /// dmos counts in ten equal bins over `[0, 5]` per kind and level.
    pub histogram_csv: String,
    pub warnings: Vec<String>,
}

impl Analysis {
    pub fn srcc_matrix_csv(&self) -> String {
        let mut s = format!("label,{}\n", self.srcc_labels.join(","));
        for (l, row) in self.srcc_labels.iter().zip(&self.srcc_matrix) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            s.push_str(&format!("{l},{}\n", cells.join(",")));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        for (name, body) in [
            ("table3.csv", &self.table3_csv),
            ("table3_extremes.csv", &self.extremes_csv),
            ("srcc_matrix.csv", &self.srcc_matrix_csv()),
            ("table2.csv", &self.table2_csv),
            ("histogram.csv", &self.histogram_csv),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| PipelineError::io(&p, e))?;
        }
        Ok(())
    }
}

fn table3(m: &Manifest) -> (String, String, Vec<String>) {
    let recs: Vec<GroupRecord> = m
        .records
        .iter()
        .map(|r| GroupRecord {
            kind: r.spec.kind,
            level: r.spec.level,
            score: r.dmos,
        })
        .collect();
    let g = group_stats(&recs);
    let mut s = String::from("kind");
    for l in 1..=5 {
        s.push_str(&format!(",l{l}_mean,l{l}_std"));
    }
    s.push_str(",avg_mean,avg_std\n");
    for kind in DistortionKind::ALL {
        let Some(avg) = g.kinds.get(&kind) else { continue };
        s.push_str(kind.name());
        for l in 1..=5 {
            match g.cells.get(&(kind, l)) {
                Some(c) => s.push_str(&format!(",{:.4},{:.4}", c.mean, c.std)),
                None => s.push_str(",nan,nan"),
            }
        }
        s.push_str(&format!(",{:.4},{:.4}\n", avg.mean, avg.std));
    }
    let mut e = String::from("column,best_mean,worst_mean,best_std,worst_std\n");
    for x in g.extremes() {
        e.push_str(&format!("{},{},{},{},{}\n", x.column, x.best_mean, x.worst_mean, x.best_std, x.worst_std));
    }
    (s, e, g.warnings)
}

fn srcc_matrix(m: &Manifest, warnings: &mut Vec<String>) -> Result<(Vec<String>, Vec<Vec<f64>>), PipelineError> {
    let tasks = &m.config.tasks;
    let mut cells: BTreeMap<(usize, DistortionKind, u8), (f64, BTreeMap<usize, f64>)> = BTreeMap::new();
    for r in &m.records {
        let t = tasks.iter().position(|&t| t == r.task).expect("record task is configured");
        let e = cells.entry((r.scene, r.spec.kind, r.spec.level)).or_insert((r.dmos_all, BTreeMap::new()));
        e.1.insert(t, r.dmos);
    }
    let complete: Vec<_> = cells.values().filter(|(_, per)| per.len() == tasks.len()).collect();
    if complete.len() < cells.len() {
        warnings.push(format!("{} cells lack a score for every task and are left out of the SRCC matrix", cells.len() - complete.len()));
    }
    let mut cols = vec![complete.iter().map(|(a, _)| *a).collect::<Vec<f64>>()];
    for t in 0..tasks.len() {
        cols.push(complete.iter().map(|(_, per)| per[&t]).collect());
    }
    let labels: Vec<String> = std::iter::once("all".to_string()).chain(tasks.iter().map(|t| t.to_string())).collect();
    let n = cols.len();
    let mut mat = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = srcc(&cols[i], &cols[j])?;
            mat[i][j] = v;
            mat[j][i] = v;
        }
    }
    Ok((labels, mat))
}

fn table2(m: &Manifest) -> String {
    let mut s = String::from("category,title");
    for t in &m.config.tasks {
        for a in Agent::ALL {
            s.push_str(&format!(",{t}_{a}"));
        }
    }
    s.push('\n');
    for cat in Category::ALL {
        s.push_str(&format!("{},{}", cat.code(), cat.title()));
        for &t in &m.config.tasks {
            for a in Agent::ALL {
                let v: Vec<f64> = m
                    .records
                    .iter()
                    .filter(|r| r.task == t && r.spec.kind.category() == cat)
                    .map(|r| r.agent_dmos.get(a))
                    .collect();
                if v.is_empty() {
                    s.push_str(",nan");
                } else {
                    s.push_str(&format!(",{:.4}", v.iter().sum::<f64>() / v.len() as f64));
                }
            }
        }
        s.push('\n');
    }
    s
}

fn histogram(m: &Manifest) -> String {
    let mut counts: BTreeMap<(usize, u8), [usize; HIST_BINS]> = BTreeMap::new();
    let kind_pos = |k: DistortionKind| DistortionKind::ALL.iter().position(|&x| x == k).expect("catalog kind");
    for r in &m.records {
        let bin = ((r.dmos / 5.0 * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        counts.entry((kind_pos(r.spec.kind), r.spec.level)).or_insert([0; HIST_BINS])[bin] += 1;
    }
    let mut s = String::from("kind,level");
    for b in 0..HIST_BINS {
        s.push_str(&format!(",bin{b}"));
    }
    s.push('\n');
    for ((k, l), c) in counts {
        s.push_str(&format!("{},{l}", DistortionKind::ALL[k].name()));
        for v in c {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

/// Distribution tables and the inter-task correlation matrix.
pub fn analyze(m: &Manifest) -> Result<Analysis, PipelineError> {
    if m.records.is_empty() {
        return Err(PipelineError::Invalid("manifest has no records".into()));
    }
    let (table3_csv, extremes_csv, mut warnings) = table3(m);
    let (srcc_labels, srcc_matrix) = srcc_matrix(m, &mut warnings)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Analysis {
        table3_csv,
        extremes_csv,
        srcc_labels,
        srcc_matrix,
        table2_csv: table2(m),
        histogram_csv: histogram(m),
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExternalReport {
    pub matched: usize,
    pub manifest_records: usize,
    pub overlap: f64,
    /// PLCC after a cubic polynomial mapping.
    pub plcc: f64,
    pub srcc: f64,
    /// `(external, dmos, fitted dmos)` per matched record.
    #[serde(skip)]
    pub scatter: Vec<[f64; 3]>,
}

impl ExternalReport {
    pub fn scatter_csv(&self) -> String {
        let mut s = String::from("external,dmos,fitted\n");
        for [x, y, f] in &self.scatter {
            s.push_str(&format!("{x:.6},{y:.6},{f:.6}\n"));
        }
        s
    }
}

/// Correlate an external `id,score` CSV with the manifest dmos.
pub fn correlate_external(m: &Manifest, csv_path: &Path) -> Result<ExternalReport, PipelineError> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| PipelineError::io(csv_path, e))?;
    let mut ext = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("id,")) {
            continue;
        }
        let (id, score) = line
            .split_once(',')
            .ok_or_else(|| PipelineError::Invalid(format!("{}:{}: expected `id,score`", csv_path.display(), n + 1)))?;
        let v: f64 = score
            .trim()
            .parse()
            .map_err(|_| PipelineError::Invalid(format!("{}:{}: bad score `{score}`", csv_path.display(), n + 1)))?;
        ext.insert(id.trim().to_string(), v);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = m.records.iter().filter_map(|r| ext.get(&r.id).map(|&v| (v, r.dmos))).unzip();
    let overlap = x.len() as f64 / m.records.len().max(1) as f64;
    if overlap < MIN_OVERLAP {
        return Err(PipelineError::Invalid(format!(
            "only {} of {} manifest ids appear in the external scores ({:.0}% < 80%)",
            x.len(),
            m.records.len(),
            overlap * 100.0
        )));
    }
    let p = plcc(&x, &y, Mapping::Poly3)?;
    let fit = fit_poly3(&x, &y);
    let scatter = x
        .iter()
        .zip(&y)
        .map(|(&a, &b)| [a, b, fit.as_ref().map_or(f64::NAN, |f| f.eval(a))])
        .collect();
    Ok(ExternalReport {
        matched: x.len(),
        manifest_records: m.records.len(),
        overlap,
        plcc: p.value,
        srcc: srcc(&x, &y)?,
        scatter,
    })
}
