//! The end-to-end pipeline: train a classifier on a set of records, predict
//! a held-out record, and leave-one-patient-out cross-validation with
//! event-based scoring.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alarm::{
    raise_alarms, score_alarms, AlarmConfig, EvaluationReport, PatientOutcome, Prediction,
    ReportMeta,
};
use crate::data::{DeploymentConfig, Label, PatientRecord};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, segment_stream, FeatureLayout, Mode, Normalizer, SegmentationConfig,
};
use crate::lr::{lr_predict, lr_train};
use crate::model::{TrainedClassifier, TrainedModel};
use crate::nn::{
    dense_windows, fit_channel_stats, seq_windows, train_convlstm, train_fcn, ConvLstmConfig,
    ConvLstmModel, EpochStats, FcnConfig, FcnModel, TrainConfig, CHANNELS,
};
use crate::util::{derive_seed, fnv1a64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Lr,
    Fcn,
    ConvLstm,
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClassifierKind::Lr => write!(f, "lr"),
            ClassifierKind::Fcn => write!(f, "fcn"),
            ClassifierKind::ConvLstm => write!(f, "convlstm"),
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(ClassifierKind::Lr),
            "fcn" => Ok(ClassifierKind::Fcn),
            "convlstm" => Ok(ClassifierKind::ConvLstm),
            other => Err(Error::Config(format!(
                "unknown classifier {other:?} (expected lr, fcn or convlstm)"
            ))),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tag" => Ok(Mode::Tag),
            "idsensor" => Ok(Mode::IdSensor),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected tag or idsensor)"
            ))),
        }
    }
}

/// Everything that determines a run's behavior; hashed into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub mode: Mode,
    pub classifier: ClassifierKind,
    #[serde(default)]
    pub seg: SegmentationConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub alarm: AlarmConfig,
    #[serde(default)]
    pub fcn: FcnConfig,
    #[serde(default)]
    pub convlstm: ConvLstmConfig,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineSpec {
    pub fn new(mode: Mode, classifier: ClassifierKind) -> Self {
        PipelineSpec {
            mode,
            classifier,
            seg: SegmentationConfig::default(),
            train: TrainConfig::default(),
            alarm: AlarmConfig::default(),
            fcn: FcnConfig::default(),
            convlstm: ConvLstmConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.seg.validate()?;
        self.train.validate()?;
        self.alarm.validate()?;
        if self.classifier == ClassifierKind::ConvLstm {
            self.convlstm.conv_out_len()?;
        }
        Ok(())
    }

    /// Stable hash of the resolved configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }
}

/// Train the configured classifier on `records`. `seed` overrides the seed
/// in the train config so cross-validation folds stay independent.
pub fn train_pipeline(
    records: &[&PatientRecord],
    deployment: &DeploymentConfig,
    spec: &PipelineSpec,
    seed: u64,
) -> Result<(TrainedModel, Vec<EpochStats>)> {
    spec.validate()?;
    if records.is_empty() {
        return Err(Error::Training("no training records".into()));
    }
    let antenna_ids = deployment.antenna_ids();
    let mut train_cfg = spec.train.clone();
    train_cfg.seed = seed;

    let (classifier, curve) = match spec.classifier {
        ClassifierKind::Lr => {
            let layout = FeatureLayout::new(spec.mode, &antenna_ids);
            let mut features = Vec::new();
            let mut targets = Vec::new();
            for rec in records {
                for seg in segment_stream(rec, &spec.seg) {
                    if let Some(label) = seg.label {
                        features.push(extract_features(rec, &seg, &spec.seg, &layout));
                        targets.push(label == Label::OutOfBed);
                    }
                }
            }
            let normalizer = Normalizer::fit(&features)?;
            normalizer.apply_all(&mut features);
            let (model, curve) = lr_train(&features, &targets, &train_cfg, layout.signature())?;
            (TrainedClassifier::Lr { model, normalizer, layout }, curve)
        }
        ClassifierKind::Fcn => {
            let stats = fit_channel_stats(records, spec.mode, &antenna_ids);
            let data = dense_windows(
                records,
                spec.mode,
                &antenna_ids,
                &stats,
                spec.fcn.window,
                train_cfg.fcn_stride.max(1),
            );
            let mut model = FcnModel::new(spec.fcn.clone(), derive_seed(seed, "fcn-init", 0));
            let curve = train_fcn(&mut model, &data, &train_cfg)?;
            (TrainedClassifier::Fcn { model, stats }, curve)
        }
        ClassifierKind::ConvLstm => {
            let stats = fit_channel_stats(records, spec.mode, &antenna_ids);
            let seqs: Vec<_> = records
                .iter()
                .map(|rec| {
                    seq_windows(
                        rec,
                        spec.mode,
                        &antenna_ids,
                        &stats,
                        spec.convlstm.window,
                        train_cfg.convlstm_stride.max(1),
                    )
                })
                .collect();
            let mut model =
                ConvLstmModel::new(spec.convlstm.clone(), derive_seed(seed, "convlstm-init", 0))?;
            let curve = train_convlstm(&mut model, &seqs, &train_cfg)?;
            (TrainedClassifier::ConvLstm { model, stats }, curve)
        }
    };

    Ok((
        TrainedModel {
            mode: spec.mode,
            seg: spec.seg.clone(),
            antenna_ids,
            seed,
            config_hash: spec.config_hash(),
            classifier,
        },
        curve,
    ))
}

/// Time-stamped class predictions for one record.
pub fn predict_record(model: &mut TrainedModel, record: &PatientRecord) -> Result<Vec<Prediction>> {
    match &mut model.classifier {
        TrainedClassifier::Lr { model: lr, normalizer, layout } => {
            if lr.layout_signature != layout.signature() {
                return Err(Error::Config(
                    "model layout signature does not match its embedded layout".into(),
                ));
            }
            let mut out = Vec::new();
            for seg in segment_stream(record, &model.seg) {
                if seg.is_empty() {
                    continue;
                }
                let mut f = extract_features(record, &seg, &model.seg, layout);
                normalizer.apply(&mut f);
                let p = lr_predict(lr, &f)?;
                out.push(Prediction {
                    t: seg.end_time,
                    label: if p > 0.5 { Label::OutOfBed } else { Label::InBed },
                });
            }
            Ok(out)
        }
        TrainedClassifier::Fcn { model: fcn, stats } => {
            fcn_predict_record(fcn, stats, model.mode, &model.antenna_ids, record)
        }
        TrainedClassifier::ConvLstm { model: net, stats } => {
            // Window stride 1: one prediction per input reading once the
            // first window fills; state is fresh per record by construction.
            let seq = seq_windows(record, model.mode, &model.antenna_ids, stats, net.cfg.window, 1);
            let classes = crate::nn::train::convlstm_predict(net, &seq)?;
            Ok(classes
                .into_iter()
                .zip(&seq.times)
                .map(|(c, &t)| Prediction {
                    t,
                    label: if c == 1 { Label::OutOfBed } else { Label::InBed },
                })
                .collect())
        }
    }
}

/// Dense labeling inference: consecutive non-overlapping windows (plus a
/// tail window flushed against the stream end) give exactly one prediction
/// per covered reading.
fn fcn_predict_record(
    fcn: &mut FcnModel,
    stats: &crate::nn::ChannelStats,
    mode: Mode,
    antenna_ids: &[u8],
    record: &PatientRecord,
) -> Result<Vec<Prediction>> {
    let w = fcn.cfg.window;
    let n = record.readings.len();
    if n < w {
        return Ok(Vec::new());
    }
    let mut starts: Vec<usize> = (0..=(n - w)).step_by(w).collect();
    if *starts.last().unwrap() != n - w {
        starts.push(n - w);
    }
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for chunk in starts.chunks(256) {
        let mut x = Vec::with_capacity(chunk.len() * CHANNELS * w);
        for &s in chunk {
            for c in 0..CHANNELS {
                for r in &record.readings[s..s + w] {
                    let ch = crate::nn::standardize(
                        crate::nn::reading_channels(r, mode, antenna_ids),
                        stats,
                    );
                    x.push(ch[c]);
                }
            }
        }
        let x = crate::nn::Tensor::from_vec(&[chunk.len(), CHANNELS, w], x);
        let logits = fcn.forward(&x, false, &mut rng)?;
        for (bi, &s) in chunk.iter().enumerate() {
            for j in 0..w {
                if assigned[s + j].is_none() {
                    let in_score = logits.data[(bi * 2) * w + j];
                    let out_score = logits.data[(bi * 2 + 1) * w + j];
                    assigned[s + j] = Some(usize::from(out_score > in_score));
                }
            }
        }
    }
    Ok(assigned
        .into_iter()
        .enumerate()
        .filter_map(|(i, c)| {
            c.map(|c| Prediction {
                t: record.readings[i].t,
                label: if c == 1 { Label::OutOfBed } else { Label::InBed },
            })
        })
        .collect())
}

/// Predictions of one cross-validation fold, persisted so reports can be
/// regenerated without retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPredictions {
    pub patient_id: u32,
    pub predictions: Vec<Prediction>,
}

fn meta_for(spec: &PipelineSpec) -> ReportMeta {
    ReportMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: spec.config_hash(),
        seed: spec.seed,
        mode: spec.mode.to_string(),
        classifier: spec.classifier.to_string(),
    }
}

/// Leave-one-patient-out cross-validation. Folds run in ascending patient
/// order with per-fold derived seeds; the test patient never contributes to
/// features, normalizers or model parameters of its own fold.
pub fn lopo_cv(
    records: &[PatientRecord],
    deployment: &DeploymentConfig,
    spec: &PipelineSpec,
) -> Result<(EvaluationReport, Vec<FoldPredictions>)> {
    if records.len() < 2 {
        return Err(Error::Config("cross-validation needs at least two patients".into()));
    }
    let mut folds = Vec::with_capacity(records.len());
    for test in records {
        let train_set: Vec<&PatientRecord> =
            records.iter().filter(|r| r.patient_id != test.patient_id).collect();
        let fold_seed = derive_seed(spec.seed, "fold", test.patient_id as u64);
        let (mut model, _) = train_pipeline(&train_set, deployment, spec, fold_seed)?;
        let predictions = predict_record(&mut model, test)?;
        folds.push(FoldPredictions { patient_id: test.patient_id, predictions });
    }
    let report = score_fold_predictions(records, &folds, &spec.alarm, meta_for(spec))?;
    Ok((report, folds))
}

/// Pure re-scoring of persisted fold predictions; regenerating a report from
/// the same folds is bit-identical.
pub fn score_fold_predictions(
    records: &[PatientRecord],
    folds: &[FoldPredictions],
    alarm: &AlarmConfig,
    meta: ReportMeta,
) -> Result<EvaluationReport> {
    alarm.validate()?;
    let mut outcomes = Vec::with_capacity(folds.len());
    for fold in folds {
        let record = records
            .iter()
            .find(|r| r.patient_id == fold.patient_id)
            .ok_or_else(|| Error::Config(format!("no record for patient {}", fold.patient_id)))?;
        let alarms = raise_alarms(&fold.predictions, alarm, fold.patient_id);
        let counts = score_alarms(&alarms, record, alarm);
        outcomes.push(PatientOutcome {
            patient_id: fold.patient_id,
            actual: record.ground_truth_exits().len() as u32,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            delays: counts.delays,
        });
    }
    Ok(EvaluationReport::from_outcomes(meta, outcomes))
}
