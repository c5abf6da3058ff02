//! Result rows and success-rate reports.
//!
//! A success needs the similarity floor and every listed property
//! improvement. Rules are data; the presets below are the usual
//! single-property and two-property templates.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ResultsError {
    #[error("results line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("results file has no header")]
    MissingHeader,
}

/// One optimisation result as written to the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub input: String,
    pub output: Option<String>,
    pub similarity: f64,
    pub deltas: Vec<f64>,
    pub log_density: f64,
    /// Set when the input could not be processed; the other fields are
    /// then placeholders.
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(input: impl Into<String>, error: impl Into<String>) -> Self {
        ResultRow {
            input: input.into(),
            output: None,
            similarity: 0.0,
            deltas: Vec::new(),
            log_density: f64::NEG_INFINITY,
            error: Some(error.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Tab-separated results with a header naming the properties.
pub fn write_results(properties: &[String], rows: &[ResultRow]) -> String {
    let mut s = String::from("input\toutput\tsimilarity");
    for p in properties {
        let _ = write!(s, "\tdelta_{p}");
    }
    s.push_str("\tlog_density\tstatus\n");
    for r in rows {
        let _ = write!(s, "{}\t{}", clean(&r.input), r.output.as_deref().map(clean).unwrap_or_default());
        match &r.error {
            None => {
                let _ = write!(s, "\t{}", r.similarity);
                for d in &r.deltas {
                    let _ = write!(s, "\t{d}");
                }
                let _ = writeln!(s, "\t{}\tok", r.log_density);
            }
            Some(e) => {
                // empty similarity, deltas and log density
                for _ in 0..properties.len() + 3 {
                    s.push('\t');
                }
                let _ = writeln!(s, "error: {}", clean(e));
            }
        }
    }
    s
}

/// Parses `write_results` output; returns property names and rows.
pub fn read_results(text: &str) -> Result<(Vec<String>, Vec<ResultRow>), ResultsError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(ResultsError::MissingHeader)?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 5 || cols[..3] != ["input", "output", "similarity"] || cols[cols.len() - 2..] != ["log_density", "status"] {
        return Err(ResultsError::MissingHeader);
    }
    let properties: Vec<String> = cols[3..cols.len() - 2]
        .iter()
        .map(|c| c.strip_prefix("delta_").unwrap_or(c).to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != cols.len() {
            return Err(ResultsError::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", cols.len(), f.len()),
            });
        }
        let status = f[f.len() - 1];
        if let Some(e) = status.strip_prefix("error: ") {
            rows.push(ResultRow::failed(f[0], e));
            continue;
        }
        if status != "ok" {
            return Err(ResultsError::Parse {
                line: line_no,
                message: format!("unknown status `{status}`"),
            });
        }
        let num = |s: &str| -> Result<f64, ResultsError> {
            s.parse().map_err(|_| ResultsError::Parse {
                line: line_no,
                message: format!("not a number: `{s}`"),
            })
        };
        rows.push(ResultRow {
            input: f[0].to_string(),
            output: Some(f[1].to_string()),
            similarity: num(f[2])?,
            deltas: f[3..f.len() - 2].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
            log_density: num(f[f.len() - 2])?,
            error: None,
        });
    }
    Ok((properties, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRule {
    pub min_similarity: f64,
    /// Minimum improvement per property, in result column order.
    pub min_deltas: Vec<f64>,
}

impl SuccessRule {
    /// Single property: sim ≥ 0.4 and the property-specific improvement.
    pub fn single(min_delta: f64) -> Self {
        SuccessRule {
            min_similarity: 0.4,
            min_deltas: vec![min_delta],
        }
    }

    pub fn plogp() -> Self {
        Self::single(0.5)
    }

    pub fn qed() -> Self {
        Self::single(0.1)
    }

    pub fn drd() -> Self {
        Self::single(0.2)
    }

    /// Two properties: sim ≥ 0.3 and both improvements.
    pub fn pair(first: f64, second: f64) -> Self {
        SuccessRule {
            min_similarity: 0.3,
            min_deltas: vec![first, second],
        }
    }

    /// QED ≥ 0.1 and PLogP ≥ 0.3.
    pub fn qed_plogp() -> Self {
        Self::pair(0.1, 0.3)
    }

    /// DRD ≥ 0.2 and PLogP ≥ 0.3.
    pub fn drd_plogp() -> Self {
        Self::pair(0.2, 0.3)
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "plogp" => Self::plogp(),
            "qed" => Self::qed(),
            "drd" => Self::drd(),
            "qed_plogp" => Self::qed_plogp(),
            "drd_plogp" => Self::drd_plogp(),
            _ => return None,
        })
    }

    pub fn is_success(&self, row: &ResultRow) -> bool {
        row.is_ok()
            && row.deltas.len() == self.min_deltas.len()
            && row.similarity >= self.min_similarity
            && row.deltas.iter().zip(&self.min_deltas).all(|(d, m)| d >= m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeMetric {
    pub input: String,
    pub output: String,
    pub similarity: f64,
    pub deltas: Vec<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub properties: Vec<String>,
    pub rule: SuccessRule,
    pub rows: Vec<MoleculeMetric>,
    /// Inputs that failed before producing a result; they count as
    /// failures in the success rate but not in the means.
    pub errors: usize,
    pub similarity: MeanStd,
    pub improvement: Vec<MeanStd>,
    pub successes: usize,
    pub success_rate: f64,
}

/// Pure function of its inputs: same rows and rule, same report.
pub fn compute_metrics(properties: &[String], rows: &[ResultRow], rule: &SuccessRule) -> MetricReport {
    let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let metrics: Vec<MoleculeMetric> = ok
        .iter()
        .map(|r| MoleculeMetric {
            input: r.input.clone(),
            output: r.output.clone().unwrap_or_default(),
            similarity: r.similarity,
            deltas: r.deltas.clone(),
            success: rule.is_success(r),
        })
        .collect();
    let similarity = MeanStd::of(&ok.iter().map(|r| r.similarity).collect::<Vec<_>>());
    let improvement = (0..properties.len())
        .map(|i| MeanStd::of(&ok.iter().filter_map(|r| r.deltas.get(i).copied()).collect::<Vec<_>>()))
        .collect();
    let successes = metrics.iter().filter(|m| m.success).count();
    let success_rate = if rows.is_empty() {
        0.0
    } else {
        successes as f64 / rows.len() as f64
    };
    MetricReport {
        properties: properties.to_vec(),
        rule: rule.clone(),
        rows: metrics,
        errors: rows.len() - ok.len(),
        similarity,
        improvement,
        successes,
        success_rate,
    }
}

impl MetricReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "molecules      {}", self.rows.len() + self.errors);
        let _ = writeln!(s, "errors         {}", self.errors);
        let _ = writeln!(s, "similarity     {}", self.similarity);
        for (p, m) in self.properties.iter().zip(&self.improvement) {
            let _ = writeln!(s, "improvement    {p}: {m}");
        }
        let _ = writeln!(
            s,
            "success rate   {:.4} ({}/{})  rule: sim >= {} and deltas >= {:?}",
            self.success_rate,
            self.successes,
            self.rows.len() + self.errors,
            self.rule.min_similarity,
            self.rule.min_deltas
        );
        s
    }
}
