use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ensure_dir, require_file, write_json, write_run_meta};
use crate::data::{load_manifest, load_traces, Split, VideoRecord};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate, write_eval_table, write_tta_long_to, EvalOptions, EvalReport, EvalRow,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub dataset: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub options: EvalOptions,
    pub reports: Vec<MethodReport>,
}

impl EvalOutput {
    pub fn rows(&self) -> Vec<EvalRow> {
        self.reports
            .iter()
            .map(|r| EvalRow::new(&r.method, &r.dataset, &r.report))
            .collect()
    }
}

/// Records of `split` (all when `None`) grouped by source dataset.
pub(crate) fn by_dataset(
    records: &[VideoRecord],
    split: Option<Split>,
) -> Result<Vec<(String, Vec<VideoRecord>)>> {
    let chosen: Vec<&VideoRecord> = records
        .iter()
        .filter(|r| split.is_none() || r.split == split)
        .collect();
    if chosen.is_empty() {
        return Err(Error::invalid(format!(
            "no manifest records in split {}",
            split.map(|s| s.to_string()).unwrap_or_else(|| "any".into())
        )));
    }
    let datasets: BTreeSet<String> = chosen
        .iter()
        .map(|r| r.source_dataset.to_string())
        .collect();
    Ok(datasets
        .into_iter()
        .map(|ds| {
            let rs = chosen
                .iter()
                .filter(|r| r.source_dataset.to_string() == ds)
                .map(|r| (*r).clone())
                .collect();
            (ds, rs)
        })
        .collect())
}

/// One report per (method, dataset); writes `eval_report.json`,
/// `eval_table.csv` and `tta_long.csv`.
pub fn cmd_eval(
    methods: &[(String, PathBuf)],
    manifest: &Path,
    out_dir: &Path,
    split: Option<Split>,
    options: &EvalOptions,
) -> Result<EvalOutput> {
    if methods.is_empty() {
        return Err(Error::invalid(
            "at least one method's score file is required",
        ));
    }
    require_file(manifest)?;
    for (_, p) in methods {
        require_file(p)?;
    }
    ensure_dir(out_dir)?;
    let records = load_manifest(manifest)?;
    let groups = by_dataset(&records, split)?;

    let mut reports = Vec::new();
    let mut tta_rows = Vec::new();
    for (method, path) in methods {
        let traces = load_traces(path)?;
        for (dataset, recs) in &groups {
            let report = evaluate(&traces, recs, options).map_err(|e| {
                Error::invalid(format!("method `{method}`, dataset {dataset}: {e}"))
            })?;
            if let Some(d) = &report.tta_distribution {
                tta_rows.extend(d.values.iter().map(|&v| (method.clone(), v)));
            }
            reports.push(MethodReport {
                method: method.clone(),
                dataset: dataset.clone(),
                report,
            });
        }
    }
    let output = EvalOutput {
        options: options.clone(),
        reports,
    };
    write_json(&out_dir.join("eval_report.json"), &output)?;
    write_eval_table(out_dir.join("eval_table.csv"), &output.rows())?;
    let tta_path = out_dir.join("tta_long.csv");
    let file = std::fs::File::create(&tta_path).map_err(|e| Error::io(&tta_path, e))?;
    write_tta_long_to(file, &tta_rows)?;

    let mut inputs: Vec<&Path> = vec![manifest];
    inputs.extend(methods.iter().map(|(_, p)| p.as_path()));
    write_run_meta(
        out_dir,
        "eval",
        &inputs,
        &["eval_report.json", "eval_table.csv", "tta_long.csv"],
        serde_json::json!({
            "options": options,
            "split": split.map(|s| s.to_string()),
            "methods": methods.iter().map(|(m, _)| m.clone()).collect::<Vec<_>>(),
        }),
    )?;
    Ok(output)
}
