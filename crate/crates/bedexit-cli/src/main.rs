//! Command-line front end for the bed-exit recognition pipeline.
//!
//! Subcommands: `simulate`, `featurize`, `train`, `evaluate`, `sweep`,
//! `report`. Every artifact embeds the tool version, the resolved config
//! hash and the seed; rerunning a command with the same triple reproduces
//! the artifact bit for bit. Output directories are complete only once
//! `run.toml` exists (it is written last).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bedexit::eval::FoldPredictions;
use bedexit::nn::EpochStats;
use bedexit::{
    delay_histogram, load_dataset, lopo_cv, save_model, score_fold_predictions, train_pipeline,
    write_cohort, ClassifierKind, DeploymentConfig, EvaluationReport, Mode, PatientRecord,
    PipelineSpec, ReportMeta, Scenario,
};

#[derive(Parser)]
#[command(name = "bedexit", version, about = "Bed-exit recognition from passive RFID streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the pipeline commands. Flags override values from
/// `--config`; the fully resolved configuration is persisted next to the
/// outputs.
#[derive(Args, Clone)]
struct SpecArgs {
    /// Run configuration file (TOML). Flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature mode: `tag` or `idsensor`.
    #[arg(long)]
    mode: Option<Mode>,
    /// Classifier: `lr`, `fcn` or `convlstm`.
    #[arg(long)]
    classifier: Option<ClassifierKind>,
    /// Master seed for training and fold derivation.
    #[arg(long)]
    seed: Option<u64>,
    /// Segment length in seconds.
    #[arg(long)]
    segment_len: Option<f64>,
    /// Segment step in seconds.
    #[arg(long)]
    step: Option<f64>,
    /// Alarm smoothing block length (odd).
    #[arg(long)]
    smoothing_k: Option<usize>,
    /// Grace period before an exit, seconds.
    #[arg(long)]
    delta_t: Option<f64>,
    /// Force single-threaded, bit-reproducible execution. Fold evaluation is
    /// sequential either way; the flag pins the contract.
    #[arg(long)]
    deterministic: bool,
}

impl SpecArgs {
    fn resolve(&self) -> Result<PipelineSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str::<PipelineSpec>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => {
                let mode = self.mode.ok_or_else(|| anyhow!("--mode is required without --config"))?;
                let classifier = self
                    .classifier
                    .ok_or_else(|| anyhow!("--classifier is required without --config"))?;
                PipelineSpec::new(mode, classifier)
            }
        };
        if let Some(mode) = self.mode {
            spec.mode = mode;
        }
        if let Some(classifier) = self.classifier {
            spec.classifier = classifier;
        }
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(v) = self.segment_len {
            spec.seg.segment_len_s = v;
        }
        if let Some(v) = self.step {
            spec.seg.step_s = v;
        }
        if let Some(v) = self.smoothing_k {
            spec.alarm.smoothing_k = v;
        }
        if let Some(v) = self.delta_t {
            spec.alarm.delta_t_s = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ward cohort in the canonical dataset format.
    Simulate {
        /// Scenario file (TOML); defaults are used when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's patient count.
        #[arg(long)]
        patients: Option<usize>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract the engineered feature matrix to CSV.
    Featurize {
        #[arg(long)]
        data: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Train one classifier on an entire dataset and persist the model.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Output model file.
        #[arg(long)]
        model: PathBuf,
        /// Optional loss-curve CSV path.
        #[arg(long)]
        loss_curve: Option<PathBuf>,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Leave-one-patient-out evaluation with event-based scoring.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Output report directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Grid sweep over segmentation and alarm parameters.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        /// Sweep configuration (base run config plus a [grid] table).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate a report from persisted fold predictions (no retraining).
    Report {
        /// Directory produced by `evaluate`.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output directory (defaults to `--from`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { scenario, out, patients, seed } => cmd_simulate(scenario, out, patients, seed),
        Command::Featurize { data, out, spec } => cmd_featurize(data, out, spec),
        Command::Train { data, model, loss_curve, spec } => cmd_train(data, model, loss_curve, spec),
        Command::Evaluate { data, out, spec } => cmd_evaluate(data, out, spec),
        Command::Sweep { data, config, out } => cmd_sweep(data, config, out),
        Command::Report { from, data, out } => cmd_report(from, data, out),
    }
}

/// Load a dataset directory together with its deployment description
/// (`scenario.toml` written by `simulate`, or a bare `deployment.toml`).
fn load_data(dir: &Path) -> Result<(Vec<PatientRecord>, DeploymentConfig)> {
    let deployment = if dir.join("scenario.toml").exists() {
        Scenario::from_toml(&fs::read_to_string(dir.join("scenario.toml"))?)?.deployment()
    } else if dir.join("deployment.toml").exists() {
        toml::from_str(&fs::read_to_string(dir.join("deployment.toml"))?)
            .context("parsing deployment.toml")?
    } else {
        bail!(
            "{} contains neither scenario.toml nor deployment.toml; cannot determine the antenna deployment",
            dir.display()
        );
    };
    let records = load_dataset(dir, &deployment)?;
    if records.is_empty() {
        bail!("{} holds no patient files", dir.display());
    }
    Ok((records, deployment))
}

fn cmd_simulate(
    scenario_path: Option<PathBuf>,
    out: PathBuf,
    patients: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let mut scenario = match scenario_path {
        Some(p) => Scenario::from_toml(
            &fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => Scenario::default(),
    };
    if let Some(n) = patients {
        scenario.n_patients = n;
    }
    if let Some(s) = seed {
        scenario.seed = s;
    }
    scenario.validate()?;
    let (sims, manifest) = bedexit::generate_cohort(&scenario)?;
    write_cohort(&out, &scenario, &sims, &manifest)?;
    println!(
        "wrote {} patients, {} readings, {} exits to {}",
        manifest.n_patients,
        manifest.total_readings,
        manifest.total_exits,
        out.display()
    );
    Ok(())
}

fn cmd_featurize(data: PathBuf, out: PathBuf, spec_args: SpecArgs) -> Result<()> {
    let spec = spec_args.resolve()?;
    let (records, deployment) = load_data(&data)?;
    let layout = bedexit::FeatureLayout::new(spec.mode, &deployment.antenna_ids());

    let mut text = String::from("patient_id,end_time_s,label");
    for name in &layout.names {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for rec in &records {
        for seg in bedexit::segment_stream(rec, &spec.seg) {
            let label = match seg.label {
                Some(bedexit::Label::InBed) => "in_bed",
                Some(bedexit::Label::OutOfBed) => "out_of_bed",
                None => "none",
            };
            let values = bedexit::extract_features(rec, &seg, &spec.seg, &layout);
            text.push_str(&format!("{},{},{}", rec.patient_id, seg.end_time, label));
            for v in values {
                text.push_str(&format!(",{v}"));
            }
            text.push('\n');
        }
    }
    fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote feature matrix ({} dims) to {}", layout.dim(), out.display());
    Ok(())
}

fn write_loss_curve(path: &Path, curve: &[EpochStats]) -> Result<()> {
    let mut text = String::from("epoch,train_loss,val_loss\n");
    for e in curve {
        text.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_train(
    data: PathBuf,
    model_path: PathBuf,
    loss_curve: Option<PathBuf>,
    spec_args: SpecArgs,
) -> Result<()> {
    let spec = spec_args.resolve()?;
    let (records, deployment) = load_data(&data)?;
    let refs: Vec<&PatientRecord> = records.iter().collect();
    let (model, curve) = train_pipeline(&refs, &deployment, &spec, spec.seed)?;
    save_model(&model_path, &model)?;
    if let Some(path) = loss_curve {
        write_loss_curve(&path, &curve)?;
    }
    let last = curve.last().map(|e| e.train_loss).unwrap_or(f64::NAN);
    println!(
        "trained {} ({} mode) on {} patients; final loss {last:.6}; model {}",
        spec.classifier,
        spec.mode,
        records.len(),
        model_path.display()
    );
    Ok(())
}

/// Everything `evaluate` leaves on disk. `run.toml` lands last and marks the
/// directory complete.
fn write_report_dir(
    out: &Path,
    spec: &PipelineSpec,
    report: &EvaluationReport,
    folds: &[FoldPredictions],
) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(report)?)?;
    fs::write(out.join("report.txt"), report.render_table())?;

    let hist = delay_histogram(&report.delays, &[3.0, 10.0]);
    let mut text = String::from("edge_s,cumulative_fraction\n");
    for b in &hist {
        text.push_str(&format!("{},{}\n", b.edge_s, b.cumulative_fraction));
    }
    fs::write(out.join("delay_histogram.csv"), text)?;

    let folds_dir = out.join("folds");
    fs::create_dir_all(&folds_dir)?;
    for fold in folds {
        fs::write(
            folds_dir.join(format!("patient_{}_predictions.json", fold.patient_id)),
            serde_json::to_string(fold)?,
        )?;
    }
    fs::write(
        out.join("run.toml"),
        toml::to_string_pretty(spec).context("serializing resolved config")?,
    )?;
    Ok(())
}

fn cmd_evaluate(data: PathBuf, out: PathBuf, spec_args: SpecArgs) -> Result<()> {
    let spec = spec_args.resolve()?;
    let (records, deployment) = load_data(&data)?;
    eprintln!(
        "evaluating {} ({} mode) over {} folds, config {}",
        spec.classifier,
        spec.mode,
        records.len(),
        spec.config_hash()
    );
    let (report, folds) = lopo_cv(&records, &deployment, &spec)?;
    write_report_dir(&out, &spec, &report, &folds)?;
    print!("{}", report.render_table());
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_report(from: PathBuf, data: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let spec: PipelineSpec = toml::from_str(
        &fs::read_to_string(from.join("run.toml"))
            .with_context(|| format!("{} is not a completed report directory", from.display()))?,
    )?;
    let (records, _) = load_data(&data)?;
    let folds_dir = from.join("folds");
    let mut folds = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(&folds_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    names.sort();
    for path in names {
        let fold: FoldPredictions = serde_json::from_str(&fs::read_to_string(&path)?)?;
        folds.push(fold);
    }
    folds.sort_by_key(|f| f.patient_id);
    let meta = ReportMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: spec.config_hash(),
        seed: spec.seed,
        mode: spec.mode.to_string(),
        classifier: spec.classifier.to_string(),
    };
    let report = score_fold_predictions(&records, &folds, &spec.alarm, meta)?;
    let out = out.unwrap_or(from);
    write_report_dir(&out, &spec, &report, &folds)?;
    print!("{}", report.render_table());
    Ok(())
}

mod sweep;
use sweep::cmd_sweep;
