//! Lossy transmission of the collaborator payload.

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::Tensor3;
use crate::temporal::{DelayContext, MotionField, SCALE_NAMES};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecMode {
    #[default]
    Identity,
    Fp16,
    /// Symmetric per-tensor quantisation with scale `max|x| / 127`.
    Int8,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub mode: CodecMode,
}

/// What a collaborator sends: per-scale intermediate and latest features,
/// stage-1 motion fields, and the delay they were sent under. The
/// intermediate and field lists are empty when alignment is off.
#[derive(Clone, Debug, PartialEq)]
pub struct Payload {
    pub inter: Vec<Tensor3>,
    pub latest: Vec<Tensor3>,
    pub fields: Vec<MotionField>,
    pub delay: DelayContext,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorError {
    pub name: String,
    pub elements: usize,
    pub mse: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecReport {
    pub mode: CodecMode,
    pub tensors: Vec<TensorError>,
    /// Element-weighted mean over all tensors.
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transmission {
    pub payload: Payload,
    pub report: CodecReport,
}

pub fn int8_scale(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs())) / 127.0
}

/// Quantises and reconstructs one buffer.
pub fn roundtrip(values: &[f64], mode: CodecMode) -> Vec<f64> {
    match mode {
        CodecMode::Identity => values.to_vec(),
        CodecMode::Fp16 => values.iter().map(|&v| f16::from_f64(v).to_f64()).collect(),
        CodecMode::Int8 => {
            let scale = int8_scale(values);
            if scale == 0.0 || !scale.is_finite() {
                return values.to_vec();
            }
            values
                .iter()
                .map(|&v| (v / scale).round().clamp(-127.0, 127.0) * scale)
                .collect()
        }
    }
}

fn code(t: &Tensor3, mode: CodecMode, name: String, errors: &mut Vec<TensorError>) -> Result<Tensor3> {
    let data = roundtrip(t.data(), mode);
    let (mut se, mut max) = (0.0, 0.0f64);
    for (a, b) in t.data().iter().zip(&data) {
        let d = a - b;
        se += d * d;
        max = max.max(d.abs());
    }
    errors.push(TensorError {
        name,
        elements: t.len(),
        mse: if t.is_empty() { 0.0 } else { se / t.len() as f64 },
        max_abs_error: max,
    });
    let (c, h, w) = t.shape();
    Tensor3::from_vec(c, h, w, data)
}

fn scale_name(s: usize) -> String {
    SCALE_NAMES.get(s).map_or_else(|| format!("s{s}"), |n| n.to_string())
}

/// Encodes and decodes every tensor in the payload. Decoded sampling
/// weights are clamped back into `[0, 1]`.
pub fn transmit(payload: &Payload, codec: &CodecConfig) -> Result<Transmission> {
    let mode = codec.mode;
    let mut errors = Vec::new();
    let mut inter = Vec::with_capacity(payload.inter.len());
    for (s, t) in payload.inter.iter().enumerate() {
        inter.push(code(t, mode, format!("inter.{}", scale_name(s)), &mut errors)?);
    }
    let mut latest = Vec::with_capacity(payload.latest.len());
    for (s, t) in payload.latest.iter().enumerate() {
        latest.push(code(t, mode, format!("latest.{}", scale_name(s)), &mut errors)?);
    }
    let mut fields = Vec::with_capacity(payload.fields.len());
    for (s, f) in payload.fields.iter().enumerate() {
        let dp = code(&f.dp, mode, format!("dp.{}", scale_name(s)), &mut errors)?;
        let w = code(&f.w, mode, format!("w.{}", scale_name(s)), &mut errors)?.map(|v| v.clamp(0.0, 1.0));
        fields.push(MotionField::new(dp, w)?);
    }
    let n: usize = errors.iter().map(|e| e.elements).sum();
    let mse = if n == 0 {
        0.0
    } else {
        errors.iter().map(|e| e.mse * e.elements as f64).sum::<f64>() / n as f64
    };
    Ok(Transmission {
        payload: Payload {
            inter,
            latest,
            fields,
            delay: payload.delay,
        },
        report: CodecReport { mode, tensors: errors, mse },
    })
}
