use std::collections::BTreeMap;
use std::path::PathBuf;

use persuade::io::{read_json, write_text};
use persuade::neural::ArchKind;
use persuade::{Error, Result};
use serde_json::json;

use super::learn::{Dims, LearnSummary, SUMMARY_FORMAT};
use super::{Context, Outcome};
use crate::ReportArgs;

/// Normal quantile for a two-sided 95% interval.
const Z95: f64 = 1.96;

/// Mean and `mean ± 1.96·stderr` with the sample standard deviation.
pub fn mean_ci(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, mean, mean);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = Z95 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

pub fn run(ctx: &Context, args: &ReportArgs) -> Result<Outcome> {
    let paths: Vec<PathBuf> = glob::glob(&args.results)
        .map_err(|e| Error::Argument(format!("bad glob '{}': {e}", args.results)))?
        .filter_map(|p| p.ok())
        .collect();
    if paths.is_empty() {
        return Err(Error::Precondition(format!(
            "no files match '{}'",
            args.results
        )));
    }
    let mut by_dims: BTreeMap<(ArchKey, Dims), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut by_arch: BTreeMap<ArchKey, Vec<f64>> = BTreeMap::new();
    for p in &paths {
        let s: LearnSummary = read_json(p)?;
        if s.format != SUMMARY_FORMAT {
            return Err(Error::Parse {
                path: p.display().to_string(),
                message: format!("format '{}', expected '{SUMMARY_FORMAT}'", s.format),
            });
        }
        for run in &s.runs {
            let err =
                run.validation_mse.iter().sum::<f64>() / run.validation_mse.len().max(1) as f64;
            let entry = by_dims.entry((ArchKey(run.arch), s.dims)).or_default();
            entry.0.push(err);
            entry.1.push(run.welfare);
            by_arch
                .entry(ArchKey(run.arch))
                .or_default()
                .push(run.welfare);
        }
    }

    let out = ctx.out_or("report-out");
    let mut agg = String::from(
        "arch,n,states,signals,actions,count,error_mean,error_ci_low,error_ci_high,welfare_mean,welfare_ci_low,welfare_ci_high\n",
    );
    for ((arch, d), (errs, welfare)) in &by_dims {
        let (em, el, eh) = mean_ci(errs);
        let (wm, wl, wh) = mean_ci(welfare);
        agg.push_str(&format!(
            "{},{},{},{},{},{},{em:.12},{el:.12},{eh:.12},{wm:.12},{wl:.12},{wh:.12}\n",
            arch.0,
            d.n,
            d.states,
            d.signals,
            d.actions,
            errs.len()
        ));
    }
    write_text(&out.join("aggregate.csv"), &agg)?;
    let mut bars = String::from("arch,count,welfare_mean,welfare_ci_low,welfare_ci_high\n");
    for (arch, w) in &by_arch {
        let (m, l, h) = mean_ci(w);
        bars.push_str(&format!("{},{},{m:.12},{l:.12},{h:.12}\n", arch.0, w.len()));
    }
    write_text(&out.join("welfare.csv"), &bars)?;
    let inputs: Vec<&std::path::Path> = paths.iter().map(|p| p.as_path()).collect();
    ctx.manifest(
        &out.join("manifest.json"),
        &inputs,
        json!({ "results": args.results }),
    )?;
    println!(
        "aggregated {} summaries into {}",
        paths.len(),
        out.display()
    );
    Ok(Outcome::Success)
}

/// Orders architectures by name for stable output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ArchKey(ArchKind);

impl PartialOrd for ArchKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ArchKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.to_string().cmp(&other.0.to_string())
    }
}
