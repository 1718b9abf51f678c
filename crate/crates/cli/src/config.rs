//! Experiment configuration: a JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use ehrhard::io::DensitySpec;
use ehrhard::weights::WeightedDensity;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RES: usize = 256;
pub const DEFAULT_OUT: &str = "ehrhard-out";

/// A density given inline or as a path to a spec file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySource {
    Path(PathBuf),
    Inline(DensitySpec),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub density: Option<DensitySource>,
    #[serde(default)]
    pub set: Option<String>,
    #[serde(default)]
    pub dir: Option<Vec<f64>>,
    #[serde(default)]
    pub res: Option<usize>,
    #[serde(default)]
    pub subcell: Option<usize>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Load a config file; relative density paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(DensitySource::Path(p)) = &cfg.density {
            if p.is_relative() {
                let dir = path.parent().unwrap_or(Path::new("."));
                cfg.density = Some(DensitySource::Path(dir.join(p)));
            }
        }
        Ok(cfg)
    }

    /// Fields set in `other` win.
    pub fn overlay(self, other: ExperimentConfig) -> Self {
        ExperimentConfig {
            density: other.density.or(self.density),
            set: other.set.or(self.set),
            dir: other.dir.or(self.dir),
            res: other.res.or(self.res),
            subcell: other.subcell.or(self.subcell),
            steps: other.steps.or(self.steps),
            eps: other.eps.or(self.eps),
            seed: other.seed.or(self.seed),
            threads: other.threads.or(self.threads),
            out: other.out.or(self.out),
        }
    }

    pub fn resolve(self, command: &str) -> Result<(Resolved, WeightedDensity)> {
        let (spec, w) = match self.density {
            None => return Err(anyhow!("missing density")),
            Some(DensitySource::Inline(spec)) => {
                let w = spec.build(Path::new("."))?;
                (spec, w)
            }
            Some(DensitySource::Path(p)) => {
                DensitySpec::load(&p).with_context(|| format!("loading density {}", p.display()))?
            }
        };
        let resolved = Resolved {
            command: command.to_string(),
            density: spec,
            set: self.set,
            dir: self.dir,
            res: self.res.unwrap_or(DEFAULT_RES),
            subcell: self.subcell.unwrap_or(ehrhard::sets::DEFAULT_SUBCELL),
            steps: self.steps,
            eps: self.eps,
            seed: self.seed.unwrap_or(0),
            threads: self.threads,
        };
        Ok((resolved, w))
    }
}

/// The configuration a report was produced with.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub command: String,
    pub density: DensitySpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<Vec<f64>>,
    pub res: usize,
    pub subcell: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Parse `"vx,vy[,vz]"`.
pub fn parse_dir(s: &str) -> std::result::Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad component {x:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if v.is_empty() || v.len() > 3 {
        return Err("direction needs 1 to 3 components".into());
    }
    Ok(v)
}
