//! Model persistence: a self-describing JSON document with a format-version
//! gate. Numbers are serialized with full round-trip precision; loading
//! re-validates every structural invariant so corrupt or hand-edited
//! documents are rejected.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::ppca::PpcaModel;
use crate::synth::SyntheticSpec;

pub const FORMAT_VERSION: u32 = 1;

/// Where the training data came from, carried along with the model.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// Generator seed when the training data was synthesized; null for data
    /// of unknown origin.
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_spec: Option<SyntheticSpec>,
    pub created: String,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    d: usize,
    m: usize,
    n: usize,
    mu: Vec<f64>,
    /// m basis columns, each of length d.
    phi: Vec<Vec<f64>>,
    sigma2_w: Vec<f64>,
    sigma2_eps: f64,
    eigenvalues: Vec<f64>,
    #[serde(
        rename = "logL",
        serialize_with = "serialize_maybe_infinite",
        deserialize_with = "deserialize_maybe_infinite"
    )]
    log_l: f64,
    provenance: Provenance,
}

/// JSON has no infinity literal; a rank-deficient fit (zero residual
/// variance) stores its unbounded likelihood as null.
fn serialize_maybe_infinite<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

fn deserialize_maybe_infinite<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<f64, D::Error> {
    let v = Option::<f64>::deserialize(d)?;
    Ok(v.unwrap_or(f64::INFINITY))
}

pub fn save_model(path: &Path, model: &PpcaModel, provenance: Provenance) -> Result<()> {
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        d: model.d,
        m: model.m,
        n: model.n,
        mu: model.mu.to_vec(),
        phi: (0..model.m).map(|j| model.phi.column(j).to_vec()).collect(),
        sigma2_w: model.sigma2_w.to_vec(),
        sigma2_eps: model.sigma2_eps,
        eigenvalues: model.eigenvalues.to_vec(),
        log_l: model.log_likelihood,
        provenance,
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn load_model(path: &Path) -> Result<(PpcaModel, Provenance)> {
    let text = std::fs::read_to_string(path)?;
    // Peek at the version before committing to the full schema, so future
    // formats fail with a version message rather than a parse error.
    #[derive(Deserialize)]
    struct VersionProbe {
        format_version: u32,
    }
    let probe: VersionProbe = serde_json::from_str(&text)?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedFormatVersion {
            found: probe.format_version,
            supported: FORMAT_VERSION,
        });
    }

    let doc: ModelDocument = serde_json::from_str(&text)?;
    if doc.mu.len() != doc.d {
        return Err(Error::CorruptModel(format!(
            "mu has length {}, expected d = {}",
            doc.mu.len(),
            doc.d
        )));
    }
    if doc.phi.len() != doc.m {
        return Err(Error::CorruptModel(format!(
            "phi has {} columns, expected m = {}",
            doc.phi.len(),
            doc.m
        )));
    }
    let mut phi = Array2::<f64>::zeros((doc.d, doc.m));
    for (j, col) in doc.phi.iter().enumerate() {
        if col.len() != doc.d {
            return Err(Error::CorruptModel(format!(
                "basis column {} has length {}, expected d = {}",
                j,
                col.len(),
                doc.d
            )));
        }
        for (i, &x) in col.iter().enumerate() {
            phi[[i, j]] = x;
        }
    }
    if doc.sigma2_w.len() != doc.m {
        return Err(Error::CorruptModel(format!(
            "sigma2_w has length {}, expected m = {}",
            doc.sigma2_w.len(),
            doc.m
        )));
    }
    if doc.eigenvalues.len() != doc.d {
        return Err(Error::CorruptModel(format!(
            "eigenvalues has length {}, expected d = {}",
            doc.eigenvalues.len(),
            doc.d
        )));
    }

    let model = PpcaModel {
        d: doc.d,
        m: doc.m,
        n: doc.n,
        mu: Array1::from_vec(doc.mu),
        phi,
        sigma2_w: Array1::from_vec(doc.sigma2_w),
        sigma2_eps: doc.sigma2_eps,
        eigenvalues: Array1::from_vec(doc.eigenvalues),
        log_likelihood: doc.log_l,
    };
    model.validate()?;
    Ok((model, doc.provenance))
}
