//! Self-describing JSON model file; matrices are little-endian f64 arrays in
//! base64.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::kernel::{Hyperparameters, Inputs};
use super::linalg::Square;
use super::model::{GpModel, InputTransform, TrainingMeta};
use crate::error::{Error, Result};

pub const GP_FORMAT: &str = "mlgp-gp/1";

#[derive(Debug, Serialize, Deserialize)]
struct GpFile {
    format: String,
    layout_version: String,
    theta: Hyperparameters,
    n: usize,
    d: usize,
    jitter: f64,
    meta: TrainingMeta,
    x: String,
    alpha: String,
    /// Packed lower triangle, row by row.
    chol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transform: Option<InputTransform>,
}

fn encode(v: impl IntoIterator<Item = f64>) -> String {
    let bytes: Vec<u8> = v.into_iter().flat_map(f64::to_le_bytes).collect();
    STANDARD.encode(bytes)
}

fn decode(s: &str, len: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| Error::Serialization(format!("{what}: {e}")))?;
    if bytes.len() != len * 8 {
        return Err(Error::Serialization(format!(
            "{what}: expected {len} values, found {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn model_to_json(m: &GpModel, layout_version: &str) -> Result<String> {
    let n = m.n();
    let file = GpFile {
        format: GP_FORMAT.into(),
        layout_version: layout_version.into(),
        theta: m.theta,
        n,
        d: m.dim(),
        jitter: m.jitter,
        meta: m.meta.clone(),
        x: encode(m.x.data.iter().copied()),
        alpha: encode(m.alpha.iter().copied()),
        chol: encode((0..n).flat_map(|i| m.chol.row(i)[..=i].to_vec())),
        transform: m.transform.clone(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Serialization(e.to_string()))
}

/// Returns the model and the feature-layout version it was trained on.
pub fn model_from_json(s: &str) -> Result<(GpModel, String)> {
    let f: GpFile = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
    if f.format != GP_FORMAT {
        return Err(Error::Serialization(format!("unsupported model format {:?}", f.format)));
    }
    f.theta.validate()?;
    let (n, d) = (f.n, f.d);
    if n == 0 || d == 0 {
        return Err(Error::Serialization("empty model".into()));
    }
    let x = Inputs::new(decode(&f.x, n * d, "x")?, d)?;
    if let Some(t) = &f.transform {
        if t.shift.len() != d || t.scale.len() != d {
            return Err(Error::Serialization("input transform does not match model dimension".into()));
        }
    }
    let alpha = decode(&f.alpha, n, "alpha")?;
    let packed = decode(&f.chol, n * (n + 1) / 2, "chol")?;
    let mut chol = Square::zeros(n);
    let mut it = packed.into_iter();
    for i in 0..n {
        for j in 0..=i {
            chol.data[i * n + j] = it.next().expect("length checked");
        }
    }
    Ok((
        GpModel {
            theta: f.theta,
            x,
            alpha,
            chol,
            jitter: f.jitter,
            meta: f.meta,
            transform: f.transform,
        },
        f.layout_version,
    ))
}

pub fn save_model(m: &GpModel, layout_version: &str, path: &Path) -> Result<()> {
    let json = model_to_json(m, layout_version)?;
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    std::io::Write::write_all(&mut BufWriter::new(f), json.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(GpModel, String)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut s = String::new();
    std::io::Read::read_to_string(&mut BufReader::new(f), &mut s).map_err(|e| Error::io(path, e))?;
    model_from_json(&s)
}
