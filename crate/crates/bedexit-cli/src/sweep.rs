//! Grid sweep: evaluate every combination of the listed segmentation, alarm
//! and classifier values, rank by F-score.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use bedexit::{lopo_cv, ClassifierKind, PipelineSpec};

#[derive(Debug, Clone, Default, Deserialize)]
struct GridSpec {
    segment_len_s: Option<Vec<f64>>,
    step_s: Option<Vec<f64>>,
    smoothing_k: Option<Vec<usize>>,
    classifier: Option<Vec<ClassifierKind>>,
}

#[derive(Debug, Deserialize)]
struct SweepConfig {
    #[serde(flatten)]
    base: PipelineSpec,
    #[serde(default)]
    grid: GridSpec,
}

#[derive(Debug, Serialize)]
struct RankedEntry {
    rank: usize,
    f_score: f64,
    precision: f64,
    recall: f64,
    config_hash: String,
    spec: PipelineSpec,
}

fn dimension<T: Clone>(values: &Option<Vec<T>>, base: T, name: &str) -> Result<Vec<T>> {
    match values {
        Some(v) if v.is_empty() => bail!("grid dimension {name} is empty"),
        Some(v) => Ok(v.clone()),
        None => Ok(vec![base]),
    }
}

pub fn cmd_sweep(data: PathBuf, config: PathBuf, out: PathBuf) -> Result<()> {
    let text =
        fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let sweep: SweepConfig = toml::from_str(&text).context("parsing sweep config")?;
    let base = sweep.base;
    base.validate()?;

    let seg_lens = dimension(&sweep.grid.segment_len_s, base.seg.segment_len_s, "segment_len_s")?;
    let steps = dimension(&sweep.grid.step_s, base.seg.step_s, "step_s")?;
    let ks = dimension(&sweep.grid.smoothing_k, base.alarm.smoothing_k, "smoothing_k")?;
    let classifiers = dimension(&sweep.grid.classifier, base.classifier, "classifier")?;

    let (records, deployment) = super::load_data(&data)?;

    let mut entries: Vec<RankedEntry> = Vec::new();
    let total = seg_lens.len() * steps.len() * ks.len() * classifiers.len();
    let mut done = 0usize;
    for &classifier in &classifiers {
        for &segment_len_s in &seg_lens {
            for &step_s in &steps {
                for &smoothing_k in &ks {
                    let mut spec = base.clone();
                    spec.classifier = classifier;
                    spec.seg.segment_len_s = segment_len_s;
                    spec.seg.step_s = step_s;
                    spec.alarm.smoothing_k = smoothing_k;
                    spec.validate()?;
                    done += 1;
                    eprintln!(
                        "[{done}/{total}] {} seg {segment_len_s}s step {step_s}s k {smoothing_k}",
                        classifier
                    );
                    let (report, _) = lopo_cv(&records, &deployment, &spec)?;
                    entries.push(RankedEntry {
                        rank: 0,
                        f_score: report.f_score,
                        precision: report.precision,
                        recall: report.recall,
                        config_hash: spec.config_hash(),
                        spec,
                    });
                }
            }
        }
    }

    // Descending F; deterministic tie-break on the config hash.
    entries.sort_by(|a, b| {
        b.f_score
            .partial_cmp(&a.f_score)
            .unwrap()
            .then_with(|| a.config_hash.cmp(&b.config_hash))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }

    fs::create_dir_all(&out)?;
    let mut csv = String::from(
        "rank,f_score,precision,recall,classifier,mode,segment_len_s,step_s,smoothing_k,config_hash\n",
    );
    for e in &entries {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            e.rank,
            e.f_score,
            e.precision,
            e.recall,
            e.spec.classifier,
            e.spec.mode,
            e.spec.seg.segment_len_s,
            e.spec.seg.step_s,
            e.spec.alarm.smoothing_k,
            e.config_hash
        ));
    }
    fs::write(out.join("sweep_results.csv"), csv)?;
    fs::write(out.join("sweep_results.json"), serde_json::to_string_pretty(&entries)?)?;
    if let Some(best) = entries.first() {
        println!(
            "best: {} (f={:.4}) seg {}s step {}s k {}",
            best.spec.classifier,
            best.f_score,
            best.spec.seg.segment_len_s,
            best.spec.seg.step_s,
            best.spec.alarm.smoothing_k
        );
    }
    println!("sweep results written to {}", out.display());
    Ok(())
}
