//! The evaluation report: JSON for machines, Markdown for people.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{CliffTable, CurvePoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub config_hash: String,
    pub checkpoint_hash: String,
    /// Model id of the error table used for normalization.
    pub baseline: String,
    pub acc: f64,
    pub mce: Option<f64>,
    pub ce: BTreeMap<String, f64>,
    pub s_bias: Option<f64>,
    pub silhouette_acc: f64,
    pub d_acc: f64,
    pub cliff: CliffTable,
    pub fim_curve: Vec<CurvePoint>,
    #[serde(default)]
    pub d_acc_curve: Vec<CurvePoint>,
    /// Artifact name to path relative to the report.
    pub files: BTreeMap<String, String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.1}", 100.0 * x))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn markdown_header() -> &'static str {
        "| model | Acc | mCE | S-Bias | Sil. Acc | dAcc | cliff |\n|---|---|---|---|---|---|---|\n"
    }

    pub fn markdown_row(&self) -> String {
        format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            self.model,
            pct(Some(self.acc)),
            self.mce.map_or("n/a".into(), |m| format!("{m:.1}")),
            pct(self.s_bias),
            pct(Some(self.silhouette_acc)),
            pct(Some(self.d_acc)),
            self.cliff.rows.iter().map(|r| if r.answer == crate::datasets::DepthAnswer::Yes { "yes" } else { "no" }).collect::<Vec<_>>().join("/")
        )
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("# Evaluation: {}\n\nconfig `{}`, checkpoint `{}`, mCE baseline `{}`\n\n", self.model, self.config_hash, self.checkpoint_hash, self.baseline);
        s.push_str(Self::markdown_header());
        s.push_str(&self.markdown_row());
        s.push_str("\n## Corruption error (CE) by type\n\n| type | CE |\n|---|---|\n");
        for (t, v) in &self.ce {
            let _ = writeln!(s, "| {t} | {v:.3} |");
        }
        s.push_str("\n## Visual cliff\n\n");
        s.push_str(&CliffTable::markdown_header(self.cliff.rows.len()));
        s.push_str(&self.cliff.markdown_row(&self.model));
        if !self.fim_curve.is_empty() {
            s.push_str("\n## FIM trace\n\n| epoch | trace |\n|---|---|\n");
            for p in &self.fim_curve {
                let _ = writeln!(s, "| {} | {:.4e} |", p.epoch, p.value);
            }
        }
        if !self.d_acc_curve.is_empty() {
            s.push_str("\n## Depth accuracy by checkpoint\n\n| epoch | dAcc |\n|---|---|\n");
            for p in &self.d_acc_curve {
                let _ = writeln!(s, "| {} | {:.3} |", p.epoch, p.value);
            }
        }
        if !self.files.is_empty() {
            s.push_str("\n## Files\n\n");
            for (k, v) in &self.files {
                let _ = writeln!(s, "- {k}: `{v}`");
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "\n> {n}");
        }
        s
    }
}
