use std::path::{Path, PathBuf};

use super::evaluate::EvalOutput;
use super::{ensure_dir, read_json, require_file, write_run_meta};
use crate::annotation::ReactionStats;
use crate::error::{Error, Result};
use crate::trainer::read_history;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-form plot data from earlier runs: `metrics_long.csv`,
/// `tta_long.csv`, `category_recall.csv`, `training_curves.csv` and
/// `reaction_cdf.csv`, each written when its inputs were given.
pub fn cmd_report(
    eval_reports: &[PathBuf],
    histories: &[(String, PathBuf)],
    reaction_stats: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<String>> {
    if eval_reports.is_empty() && histories.is_empty() && reaction_stats.is_none() {
        return Err(Error::invalid(
            "nothing to report: give --eval, --history or --reaction-stats",
        ));
    }
    for p in eval_reports.iter().chain(histories.iter().map(|(_, p)| p)) {
        require_file(p)?;
    }
    ensure_dir(out_dir)?;
    let mut written = Vec::new();

    if !eval_reports.is_empty() {
        let mut metrics = csv::Writer::from_path(out_dir.join("metrics_long.csv"))?;
        let mut tta = csv::Writer::from_path(out_dir.join("tta_long.csv"))?;
        let mut cats = csv::Writer::from_path(out_dir.join("category_recall.csv"))?;
        metrics.write_record(["method", "dataset", "metric", "value"])?;
        tta.write_record(["method", "dataset", "tta_s"])?;
        cats.write_record(["method", "dataset", "category", "recall", "relative"])?;
        for path in eval_reports {
            let output: EvalOutput = read_json(path)?;
            for mr in &output.reports {
                let r = &mr.report;
                let (m, d) = (mr.method.as_str(), mr.dataset.as_str());
                for (name, value) in [
                    ("ap", Some(r.ap)),
                    ("auc", Some(r.auc)),
                    ("mtta_s", r.mtta_s),
                    ("detection_rate", Some(r.detection_rate)),
                    ("precision", r.precision),
                    ("recall", Some(r.recall)),
                ] {
                    metrics.write_record([m, d, name, &opt(value)])?;
                }
                for v in r.tta_distribution.iter().flat_map(|t| t.values.iter()) {
                    tta.write_record([m, d, &v.to_string()])?;
                }
                for (c, rec) in &r.per_category_recall {
                    let rel = r
                        .relative_category_recall
                        .as_ref()
                        .and_then(|x| x.get(c).copied());
                    cats.write_record([m, d, c.as_str(), &rec.to_string(), &opt(rel)])?;
                }
            }
        }
        for w in [&mut metrics, &mut tta, &mut cats] {
            w.flush().map_err(|e| Error::io(out_dir, e))?;
        }
        written
            .extend(["metrics_long.csv", "tta_long.csv", "category_recall.csv"].map(String::from));
    }

    if !histories.is_empty() {
        let mut curves = csv::Writer::from_path(out_dir.join("training_curves.csv"))?;
        curves.write_record(["run", "epoch", "train_loss", "val_ap", "lr"])?;
        for (name, path) in histories {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for r in read_history(file)? {
                curves.write_record([
                    name.clone(),
                    r.epoch.to_string(),
                    r.train_loss.to_string(),
                    r.val_ap.to_string(),
                    r.lr.to_string(),
                ])?;
            }
        }
        curves.flush().map_err(|e| Error::io(out_dir, e))?;
        written.push("training_curves.csv".into());
    }

    if let Some(path) = reaction_stats {
        require_file(path)?;
        let stats: Option<ReactionStats> = read_json(path)?;
        let stats = stats
            .ok_or_else(|| Error::invalid(format!("{} holds no statistics", path.display())))?;
        let mut cdf = csv::Writer::from_path(out_dir.join("reaction_cdf.csv"))?;
        cdf.write_record(["reaction_s", "cdf"])?;
        for (v, f) in &stats.cdf {
            cdf.write_record([v.to_string(), f.to_string()])?;
        }
        cdf.flush().map_err(|e| Error::io(out_dir, e))?;
        written.push("reaction_cdf.csv".into());
    }

    let mut inputs: Vec<&Path> = eval_reports.iter().map(PathBuf::as_path).collect();
    inputs.extend(histories.iter().map(|(_, p)| p.as_path()));
    inputs.extend(reaction_stats);
    let outputs: Vec<&str> = written.iter().map(String::as_str).collect();
    write_run_meta(out_dir, "report", &inputs, &outputs, serde_json::json!({}))?;
    Ok(written)
}
