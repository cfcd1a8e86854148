//! Trained-model container with a versioned on-disk layout.
//!
//! File layout (little endian):
//!
//! ```text
//! bytes 0..8   magic "BXMODEL\0"
//! bytes 8..12  container version (u32)
//! bytes 12..20 header length in bytes (u64)
//! ...          header JSON (architecture, mode, normalization, param table)
//! ...          parameter blobs: f64 LE values in header order
//! ```
//!
//! Parameters travel as raw f64 bits, so save/load round-trips are exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureLayout, Mode, Normalizer, SegmentationConfig};
use crate::lr::LrModel;
use crate::nn::{ChannelStats, ConvLstmConfig, ConvLstmModel, FcnConfig, FcnModel};

pub const MODEL_MAGIC: &[u8; 8] = b"BXMODEL\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub enum TrainedClassifier {
    Lr { model: LrModel, normalizer: Normalizer, layout: FeatureLayout },
    Fcn { model: FcnModel, stats: ChannelStats },
    ConvLstm { model: ConvLstmModel, stats: ChannelStats },
}

impl TrainedClassifier {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedClassifier::Lr { .. } => "lr",
            TrainedClassifier::Fcn { .. } => "fcn",
            TrainedClassifier::ConvLstm { .. } => "convlstm",
        }
    }
}

/// A trained classifier plus everything needed to reproduce its inputs.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub mode: Mode,
    pub seg: SegmentationConfig,
    pub antenna_ids: Vec<u8>,
    pub seed: u64,
    pub config_hash: String,
    pub classifier: TrainedClassifier,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    tool_version: String,
    mode: Mode,
    seg: SegmentationConfig,
    antenna_ids: Vec<u8>,
    seed: u64,
    config_hash: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lr_layout: Option<FeatureLayout>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lr_normalizer: Option<Normalizer>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lr_layout_signature: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fcn: Option<FcnConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convlstm: Option<ConvLstmConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel_stats: Option<ChannelStats>,
    params: Vec<ParamInfo>,
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    let mut m = model.clone();
    let (header, blobs) = encode(&mut m);
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::ModelFile { path: path.into(), msg: e.to_string() })?;
    let mut out = Vec::with_capacity(20 + header_json.len() + blobs.len() * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    for v in &blobs {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn encode(model: &mut TrainedModel) -> (Header, Vec<f64>) {
    let mut header = Header {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        mode: model.mode,
        seg: model.seg.clone(),
        antenna_ids: model.antenna_ids.clone(),
        seed: model.seed,
        config_hash: model.config_hash.clone(),
        kind: model.classifier.kind().to_string(),
        lr_layout: None,
        lr_normalizer: None,
        lr_layout_signature: None,
        fcn: None,
        convlstm: None,
        channel_stats: None,
        params: Vec::new(),
    };
    let mut blobs = Vec::new();
    match &mut model.classifier {
        TrainedClassifier::Lr { model: lr, normalizer, layout } => {
            header.lr_layout = Some(layout.clone());
            header.lr_normalizer = Some(normalizer.clone());
            header.lr_layout_signature = Some(lr.layout_signature);
            header.params.push(ParamInfo { name: "w".into(), shape: vec![lr.w.len()] });
            blobs.extend_from_slice(&lr.w);
        }
        TrainedClassifier::Fcn { model: fcn, stats } => {
            header.fcn = Some(fcn.cfg.clone());
            header.channel_stats = Some(stats.clone());
            for (name, p) in fcn.param_names().into_iter().zip(fcn.params_mut()) {
                header.params.push(ParamInfo { name, shape: p.shape.clone() });
                blobs.extend_from_slice(&p.value);
            }
        }
        TrainedClassifier::ConvLstm { model: net, stats } => {
            header.convlstm = Some(net.cfg.clone());
            header.channel_stats = Some(stats.clone());
            for (name, p) in net.param_names().into_iter().zip(net.params_mut()) {
                header.params.push(ParamInfo { name, shape: p.shape.clone() });
                blobs.extend_from_slice(&p.value);
            }
        }
    }
    (header, blobs)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let fail = |msg: &str| Error::ModelFile { path: path.into(), msg: msg.into() };
    if bytes.len() < 20 || &bytes[..8] != MODEL_MAGIC {
        return Err(fail("not a model file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(fail(&format!("unsupported container version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() < 20 + header_len {
        return Err(fail("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[20..20 + header_len])
        .map_err(|e| fail(&format!("header: {e}")))?;
    let blob = &bytes[20 + header_len..];
    let total: usize = header.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
    if blob.len() != total * 8 {
        return Err(fail(&format!(
            "parameter blob holds {} bytes, expected {}",
            blob.len(),
            total * 8
        )));
    }
    let mut values = Vec::with_capacity(total);
    for chunk in blob.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }

    let classifier = match header.kind.as_str() {
        "lr" => TrainedClassifier::Lr {
            model: LrModel {
                w: values,
                layout_signature: header.lr_layout_signature.ok_or_else(|| fail("missing layout signature"))?,
            },
            normalizer: header.lr_normalizer.ok_or_else(|| fail("missing normalizer"))?,
            layout: header.lr_layout.ok_or_else(|| fail("missing layout"))?,
        },
        "fcn" => {
            let cfg = header.fcn.clone().ok_or_else(|| fail("missing fcn config"))?;
            let mut model = FcnModel::new(cfg, header.seed);
            restore_params(path, &header, &mut model.params_mut(), &values)?;
            TrainedClassifier::Fcn {
                model,
                stats: header.channel_stats.clone().ok_or_else(|| fail("missing channel stats"))?,
            }
        }
        "convlstm" => {
            let cfg = header.convlstm.clone().ok_or_else(|| fail("missing convlstm config"))?;
            let mut model = ConvLstmModel::new(cfg, header.seed)?;
            restore_params(path, &header, &mut model.params_mut(), &values)?;
            TrainedClassifier::ConvLstm {
                model,
                stats: header.channel_stats.clone().ok_or_else(|| fail("missing channel stats"))?,
            }
        }
        other => return Err(fail(&format!("unknown classifier kind {other:?}"))),
    };
    Ok(TrainedModel {
        mode: header.mode,
        seg: header.seg,
        antenna_ids: header.antenna_ids,
        seed: header.seed,
        config_hash: header.config_hash,
        classifier,
    })
}

fn restore_params(
    path: &Path,
    header: &Header,
    params: &mut [&mut crate::nn::Param],
    values: &[f64],
) -> Result<()> {
    if params.len() != header.params.len() {
        return Err(Error::ModelFile {
            path: path.into(),
            msg: format!(
                "architecture has {} parameters, file lists {}",
                params.len(),
                header.params.len()
            ),
        });
    }
    let mut off = 0;
    for (p, info) in params.iter_mut().zip(&header.params) {
        if p.shape != info.shape {
            return Err(Error::ModelFile {
                path: path.into(),
                msg: format!("parameter {} shape {:?} != file {:?}", info.name, p.shape, info.shape),
            });
        }
        let n = p.value.len();
        p.value.copy_from_slice(&values[off..off + n]);
        off += n;
    }
    Ok(())
}
