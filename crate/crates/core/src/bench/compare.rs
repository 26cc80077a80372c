use super::metrics::{MetricReport, MetricSummary};
use crate::{Error, Result};

/// Compared columns, in table order.
pub const COMPARED: [&str; 5] =
    ["action_completeness", "motion_smoothness", "object_interaction", "physical_fidelity", "success_rate"];

fn values(s: &MetricSummary) -> [Option<f64>; 5] {
    [Some(s.action_completeness), Some(s.motion_smoothness), s.object_interaction, Some(s.physical_fidelity), Some(s.success_rate)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub values: [Option<f64>; 5],
    /// Difference from the first row; `None` for the first row itself.
    pub deltas: Option<[Option<f64>; 5]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub suite_hash: String,
    pub rows: Vec<ComparisonRow>,
}

/// Lines up named reports in the given order, with deltas against the
/// first. All reports must come from the same suite.
pub fn compare(reports: &[(String, MetricReport)]) -> Result<ComparisonTable> {
    let (_, first) = reports.first().ok_or_else(|| Error::InvalidArgument("nothing to compare".into()))?;
    if let Some((name, r)) = reports.iter().find(|(_, r)| r.suite_hash != first.suite_hash) {
        return Err(Error::InvalidArgument(format!(
            "report '{name}' was produced on suite {} but the first is on {}",
            r.suite_hash, first.suite_hash
        )));
    }
    let base = values(&first.overall);
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, (name, r))| {
            let v = values(&r.overall);
            let deltas = (i > 0).then(|| std::array::from_fn(|j| Some(v[j]? - base[j]?)));
            ComparisonRow { name: name.clone(), values: v, deltas }
        })
        .collect();
    Ok(ComparisonTable { suite_hash: first.suite_hash.clone(), rows })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

impl ComparisonTable {
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
        let mut out = format!("suite {}\n{:width$}", &self.suite_hash[..self.suite_hash.len().min(16)], "config");
        for c in ["complete", "smooth", "interact", "fidelity", "success"] {
            out.push_str(&format!("  {c:>17}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:width$}", r.name));
            for j in 0..5 {
                let delta = match r.deltas.map(|d| d[j]) {
                    Some(Some(d)) => format!(" ({d:+.3})"),
                    Some(None) => " (n/a)".to_string(),
                    None => String::new(),
                };
                out.push_str(&format!("  {:>17}", cell(r.values[j]) + &delta));
            }
            out.push('\n');
        }
        out
    }

    /// Empty cells mark not-applicable values and the first row's deltas.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name");
        for c in COMPARED {
            out.push(',');
            out.push_str(c);
        }
        for c in COMPARED {
            out.push_str(",delta_");
            out.push_str(c);
        }
        out.push('\n');
        let num = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
        for r in &self.rows {
            out.push_str(&r.name);
            for v in r.values {
                out.push(',');
                out.push_str(&num(v));
            }
            for j in 0..5 {
                out.push(',');
                out.push_str(&num(r.deltas.and_then(|d| d[j])));
            }
            out.push('\n');
        }
        out
    }
}
