//! `sweep`: Cartesian expansion of a template config, isolated per-run failures, and the
//! panel-grouped comparison table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::benchmark::Benchmark;
use super::config::RunConfig;
use super::evaluate::{run_eval_on, EvalOptions};
use super::pretrain::{fresh_dir, run_pretrain_on, PretrainOptions};
use crate::error::{Error, Result};
use crate::eval::plot::bar_chart;
use crate::eval::EvalReport;
use crate::fsio::write_atomic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Diet,
    Baseline,
    Learner,
    Backbone,
    Seed,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diet" => Ok(Self::Diet),
            "baseline" => Ok(Self::Baseline),
            "learner" => Ok(Self::Learner),
            "backbone" => Ok(Self::Backbone),
            "seed" => Ok(Self::Seed),
            _ => Err(Error::Config(vec![format!("unknown sweep axis `{s}`; valid axes: diet, baseline, learner, backbone, seed")])),
        }
    }
}

impl Axis {
    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            Self::Diet => &["cdiet", "adiet", "tdiet", "catdiet", "combdiet", "std"],
            Self::Baseline => &["none", "rev", "shf", "fo", "lo"],
            Self::Learner => &["contrastive", "distillation"],
            Self::Backbone => &["residual_conv", "patch_attention"],
            Self::Seed => &["0", "1", "2"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }

    fn apply(self, cfg: &mut RunConfig, value: &str) -> Result<()> {
        match self {
            Self::Diet => cfg.diet.name = value.into(),
            Self::Baseline => cfg.diet.baseline = value.into(),
            Self::Learner => cfg.model.learner = value.into(),
            Self::Backbone => cfg.model.backbone = value.into(),
            Self::Seed => cfg.seed = value.parse().map_err(|_| Error::Config(vec![format!("seed `{value}` is not an integer")]))?,
        }
        Ok(())
    }
}

/// `axis=v1,v2` or a bare axis name (all of its values).
pub fn parse_axis(text: &str) -> Result<(Axis, Vec<String>)> {
    match text.split_once('=') {
        Some((a, vals)) => Ok((a.trim().parse()?, vals.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect())),
        None => {
            let a: Axis = text.trim().parse()?;
            Ok((a, a.default_values()))
        }
    }
}

/// Every combination of axis values applied to `template`; all invalid combinations are
/// reported together.
pub fn expand(template: &RunConfig, axes: &[(Axis, Vec<String>)]) -> Result<Vec<RunConfig>> {
    let mut out = vec![template.clone()];
    for (axis, values) in axes {
        let mut next = Vec::new();
        for cfg in &out {
            for v in values {
                let mut c = cfg.clone();
                axis.apply(&mut c, v)?;
                c.name = format!("{}-{v}", c.name);
                next.push(c);
            }
        }
        out = next;
    }
    let errs: Vec<String> = out
        .iter()
        .filter_map(|c| c.validate().err().map(|e| format!("{}: {e}", c.name)))
        .collect();
    if errs.is_empty() { Ok(out) } else { Err(Error::Config(errs)) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub name: String,
    pub label: String,
    pub diet: String,
    pub seed: u64,
    pub run_dir: Option<String>,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub dir: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn failures(&self) -> Vec<&SweepEntry> {
        self.entries.iter().filter(|e| e.error.is_some()).collect()
    }
}

fn panel(diet: &str) -> &'static str {
    match diet {
        "cdiet" => "Color",
        "adiet" => "Acuity",
        "tdiet" => "Temporality",
        "catdiet" | "combdiet" => "Combination",
        "std" => "Reference",
        _ => "Custom",
    }
}

fn mean_sd(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64 } else { 0.0 };
    Some((m, var.sqrt()))
}

/// Per-label aggregate over seeds: `(label, panel, n ok, n failed, [Acc, mCE, S-Bias, dAcc] as mean/sd)`.
pub type Aggregate = (String, &'static str, usize, usize, [Option<(f64, f64)>; 4]);

pub fn aggregate(entries: &[SweepEntry]) -> Vec<Aggregate> {
    let mut by: BTreeMap<(usize, String), Vec<&SweepEntry>> = BTreeMap::new();
    let order = ["Color", "Acuity", "Temporality", "Combination", "Reference", "Custom"];
    for e in entries {
        let p = panel(&e.diet);
        by.entry((order.iter().position(|o| *o == p).unwrap_or(order.len()), e.label.clone())).or_default().push(e);
    }
    by.into_iter()
        .map(|((_, label), es)| {
            let reps: Vec<&EvalReport> = es.iter().filter_map(|e| e.report.as_ref()).collect();
            let col = |f: &dyn Fn(&EvalReport) -> Option<f64>| mean_sd(&reps.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let stats = [
                col(&|r| Some(100.0 * r.acc)),
                col(&|r| r.mce),
                col(&|r| r.s_bias.map(|s| 100.0 * s)),
                col(&|r| Some(100.0 * r.d_acc)),
            ];
            (label, panel(&es[0].diet), reps.len(), es.len() - reps.len(), stats)
        })
        .collect()
}

/// Markdown table grouped into Color, Acuity, Temporality and Combination panels.
pub fn comparison_table(entries: &[SweepEntry]) -> String {
    let mut s = String::new();
    let mut current = "";
    for (label, panel, ok, failed, stats) in aggregate(entries) {
        if panel != current {
            let _ = write!(s, "{}### {panel}\n\n| model | runs | Acc | mCE | S-Bias | dAcc |\n|---|---|---|---|---|---|\n", if current.is_empty() { "" } else { "\n" });
            current = panel;
        }
        let cells: Vec<String> = stats.iter().map(|c| c.map_or("n/a".into(), |(m, sd)| format!("{m:.1} ± {sd:.1}"))).collect();
        let runs = if failed > 0 { format!("{ok} ({failed} failed)") } else { ok.to_string() };
        let _ = writeln!(s, "| {label} | {runs} | {} |", cells.join(" | "));
    }
    let failed: Vec<&SweepEntry> = entries.iter().filter(|e| e.error.is_some()).collect();
    if !failed.is_empty() {
        s.push_str("\n### Failed runs\n\n");
        for e in failed {
            let _ = writeln!(s, "- {}: {}", e.name, e.error.as_deref().unwrap_or_default().replace('\n', "; "));
        }
    }
    s
}

fn run_one(cfg: &RunConfig, bench: &Benchmark, opts: &EvalOptions) -> Result<(PathBuf, EvalReport)> {
    let (dir, _) = run_pretrain_on(cfg, &bench.train, &PretrainOptions::default())?;
    let (_, report) = run_eval_on(&dir, bench, opts)?;
    Ok((dir, report))
}

/// Runs every expanded config with `workers` threads; a failing run is recorded and the
/// sweep continues.
pub fn run_sweep(template: &RunConfig, axes: &[(Axis, Vec<String>)], bench: &Benchmark, opts: &EvalOptions, workers: usize) -> Result<SweepResult> {
    let dir = fresh_dir(&template.output_root.join(format!("{}-sweep", template.name)))?;
    let configs: Vec<RunConfig> = expand(template, axes)?
        .into_iter()
        .map(|mut c| {
            c.output_root = dir.clone();
            c
        })
        .collect();
    let slots: Vec<Mutex<Option<SweepEntry>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, configs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = configs.get(i) else { break };
                log::info!("sweep run {}/{}: {}", i + 1, configs.len(), cfg.name);
                let outcome = run_one(cfg, bench, opts);
                if let Err(e) = &outcome {
                    log::error!("sweep run {} failed: {e}", cfg.name);
                }
                let entry = SweepEntry {
                    name: cfg.name.clone(),
                    label: cfg.label(),
                    diet: cfg.diet.name.to_ascii_lowercase(),
                    seed: cfg.seed,
                    run_dir: outcome.as_ref().ok().map(|(d, _)| d.display().to_string()),
                    error: outcome.as_ref().err().map(|e| e.to_string()),
                    report: outcome.ok().map(|(_, r)| r),
                };
                *slots[i].lock().expect("slot lock") = Some(entry);
            });
        }
    });
    let entries: Vec<SweepEntry> = slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every run recorded")).collect();
    let result = SweepResult { dir: dir.display().to_string(), entries };
    write_sweep(&dir, &result)?;
    Ok(result)
}

fn write_sweep(dir: &Path, result: &SweepResult) -> Result<()> {
    write_atomic(&dir.join("sweep.json"), (serde_json::to_string_pretty(result)? + "\n").as_bytes())?;
    write_atomic(&dir.join("comparison.md"), comparison_table(&result.entries).as_bytes())?;
    let bars: Vec<(String, f64)> =
        aggregate(&result.entries).into_iter().filter_map(|(label, _, _, _, stats)| stats[1].map(|(m, _)| (label, m))).collect();
    if !bars.is_empty() {
        write_atomic(&dir.join("mce.svg"), bar_chart("mCE by diet", "mCE (%)", &bars).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{CliffTable, EvalReport};

    #[test]
    fn expansion_counts() {
        let t = RunConfig::default();
        assert_eq!(expand(&t, &[parse_axis("baseline").unwrap()]).unwrap().len(), 5);
        let grid = expand(&t, &[parse_axis("learner").unwrap(), parse_axis("backbone").unwrap()]).unwrap();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[3].name, "run-distillation-patch_attention");
        let Err(Error::Config(errs)) = expand(&t, &[parse_axis("diet=keto,std,paleo").unwrap()]) else { panic!() };
        assert_eq!(errs.len(), 2);
        assert!(parse_axis("flavor").is_err());
    }

    fn entry(label: &str, diet: &str, seed: u64, mce: Option<f64>) -> SweepEntry {
        let report = mce.map(|m| EvalReport {
            model: label.into(),
            config_hash: String::new(),
            checkpoint_hash: String::new(),
            baseline: "b".into(),
            acc: 0.5,
            mce: Some(m),
            ce: BTreeMap::new(),
            s_bias: None,
            silhouette_acc: 0.2,
            d_acc: 0.6,
            cliff: CliffTable { rows: vec![], all_correct: true },
            fim_curve: vec![],
            d_acc_curve: vec![],
            files: BTreeMap::new(),
            notes: vec![],
        });
        SweepEntry {
            name: format!("{label}-{seed}"),
            label: label.into(),
            diet: diet.into(),
            seed,
            run_dir: None,
            error: if mce.is_none() { Some("diverged".into()) } else { None },
            report,
        }
    }

    #[test]
    fn table_groups_panels_and_marks_failures() {
        let entries = vec![
            entry("CATDiet", "catdiet", 0, Some(70.0)),
            entry("CATDiet", "catdiet", 1, Some(74.0)),
            entry("CAT-SHF", "catdiet", 0, None),
            entry("CDiet", "cdiet", 0, Some(80.0)),
        ];
        let t = comparison_table(&entries);
        assert!(t.find("### Color").unwrap() < t.find("### Combination").unwrap());
        assert!(t.contains("| CATDiet | 2 | 50.0 ± 0.0 | 72.0 ± 2.8 |"), "{t}");
        assert!(t.contains("0 (1 failed)") && t.contains("CAT-SHF-0: diverged"));
    }
}
