//! Versioned JSON serialization of trained models.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::PreprocessStats;
use crate::error::{Error, Result};
use crate::fairness::{ConstraintSpec, CriterionKind, FairnessSpec};
use crate::model_core::{GroupRates, Theta};
use crate::training::{LambdaSet, Model, TrainConfig, TrainDiagnostics};

pub const FORMAT_NAME: &str = "fair-logloss-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEntry {
    pub constraint: String,
    pub label: Option<u8>,
    pub lambda: f64,
    pub p_gamma1: f64,
    pub p_gamma0: f64,
}

/// On-disk layout. Field order is the order written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub criterion: CriterionKind,
    pub feature_names: Vec<String>,
    /// One weight per feature name, then the bias.
    pub theta: Vec<f64>,
    pub lambdas: Vec<LambdaEntry>,
    pub config_fingerprint: String,
    pub config: TrainConfig,
    pub diagnostics: TrainDiagnostics,
    pub preprocessing: Option<PreprocessStats>,
}

impl From<&Model> for ModelFile {
    fn from(m: &Model) -> Self {
        ModelFile {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            criterion: m.spec.kind,
            feature_names: m.feature_names.clone(),
            theta: m.theta.0.clone(),
            lambdas: m
                .spec
                .constraints
                .iter()
                .zip(&m.lambdas.0)
                .map(|(c, &lambda)| LambdaEntry {
                    constraint: c.name.clone(),
                    label: c.label,
                    lambda,
                    p_gamma1: c.rates.p_gamma1,
                    p_gamma0: c.rates.p_gamma0,
                })
                .collect(),
            config_fingerprint: m.config.fingerprint(),
            config: m.config.clone(),
            diagnostics: m.diagnostics.clone(),
            preprocessing: m.preprocessing.clone(),
        }
    }
}

impl TryFrom<ModelFile> for Model {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Model> {
        let bad = |msg: String| Err(Error::IncompatibleModel(msg));
        if f.format != FORMAT_NAME {
            return bad(format!("unknown format `{}`", f.format));
        }
        if f.version != FORMAT_VERSION {
            return bad(format!("version {} is not supported (expected {FORMAT_VERSION})", f.version));
        }
        if f.feature_names.len() + 1 != f.theta.len() {
            return bad(format!(
                "{} feature names for {} weights",
                f.feature_names.len(),
                f.theta.len()
            ));
        }
        if f.lambdas.len() != f.criterion.constraint_count() {
            return bad(format!("{} multipliers for criterion {}", f.lambdas.len(), f.criterion));
        }
        if f.theta.iter().chain(f.lambdas.iter().map(|l| &l.lambda)).any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if let Some(p) = &f.preprocessing {
            if p.feature_names() != f.feature_names {
                return bad("preprocessing does not match feature names".into());
            }
        }
        let mut constraints = Vec::with_capacity(f.lambdas.len());
        for (id, l) in f.lambdas.iter().enumerate() {
            let name = f.criterion.constraint_name(id)?;
            if l.constraint != name || l.label != f.criterion.constraint_label(id)? {
                return bad(format!("constraint {id} is `{}`, expected `{name}`", l.constraint));
            }
            constraints.push(ConstraintSpec {
                name: l.constraint.clone(),
                label: l.label,
                rates: GroupRates::new(l.p_gamma1, l.p_gamma0).map_err(|e| Error::IncompatibleModel(e.to_string()))?,
            });
        }
        Ok(Model {
            theta: Theta(f.theta),
            lambdas: LambdaSet(f.lambdas.iter().map(|l| l.lambda).collect()),
            spec: FairnessSpec {
                kind: f.criterion,
                constraints,
            },
            feature_names: f.feature_names,
            config: f.config,
            diagnostics: f.diagnostics,
            preprocessing: f.preprocessing,
        })
    }
}

pub fn to_json(model: &Model) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from(model))?)
}

pub fn from_json(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::IncompatibleModel(e.to_string()))?;
    Model::try_from(file)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let mut json = to_json(model)?;
    json.push('\n');
    write_atomic(path.as_ref(), json.as_bytes())
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
