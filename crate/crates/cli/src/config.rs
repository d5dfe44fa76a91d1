//! Run configurations: one JSON document per invocation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symrad::bounds::MoserParams;
use symrad::grid::{Fixture, ScalarField, Shape};
use symrad::ops::{OperatorSpec, SourceSpec};

use crate::Failure;

/// A parsed configuration with the directory relative paths resolve against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub task: Task,
    /// Output directory; `--out` and `SYMRAD_OUT_DIR` take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Overrides::is_empty")]
    pub overrides: Overrides,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Tolerance overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    /// Relative residual at which the field solver stops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.solver_tol.is_none() && self.max_iter.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Task {
    Symmetrize {
        input: FieldSource,
        #[serde(default = "default_levels")]
        levels: usize,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Shoot {
        operator: OperatorSpec,
        source: SourceSpec,
        height: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sweep: Option<Sweep>,
    },
    Maximal {
        operator: OperatorSpec,
        source: SourceSpec,
        radius: f64,
    },
    Solve {
        domain: Domain,
        dx: f64,
        problem: Problem,
    },
    Bounds {
        request: BoundRequest,
    },
    Verify {
        domain: Domain,
        dx: f64,
        operator: OperatorSpec,
        source: SourceSpec,
    },
    Suite {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dx: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        /// Subset of criteria, all when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        criteria: Option<Vec<usize>>,
    },
}

fn default_levels() -> usize {
    256
}

fn default_samples() -> usize {
    513
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Symmetrize { .. } => "symmetrize",
            Task::Shoot { .. } => "shoot",
            Task::Maximal { .. } => "maximal",
            Task::Solve { .. } => "solve",
            Task::Bounds { .. } => "bounds",
            Task::Verify { .. } => "verify",
            Task::Suite { .. } => "suite",
        }
    }
}

/// Geometric lattice of heights for a `Ψ₁` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// A field read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    /// JSON `{dx, nx, ny, mask, values}`.
    Json(PathBuf),
    /// Plain PGM mask plus CSV values.
    PgmCsv { mask: PathBuf, values: PathBuf, dx: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Fixture(Fixture),
    Shape(Shape),
    /// Mask of a field JSON file.
    MaskFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    Dirichlet {
        operator: OperatorSpec,
        source: SourceSpec,
        #[serde(default)]
        boundary: f64,
    },
    Eigen {
        p: f64,
        q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
}

/// Inputs of the `bounds` subcommand. Measured quantities are optional where
/// the bound is also useful on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bound", rename_all = "snake_case")]
pub enum BoundRequest {
    /// `L^q` bound `M(Ω′)` against a measured `‖u‖_q`.
    Lq {
        operator: OperatorSpec,
        source: SourceSpec,
        measure: f64,
        #[serde(default)]
        norm_q: f64,
    },
    Moser {
        params: MoserParams,
        norm_q: f64,
        #[serde(default)]
        sup_u: f64,
    },
    /// Moser bound composed with the `L^q` bound.
    Sup3 {
        operator: OperatorSpec,
        source: SourceSpec,
        measure: f64,
        #[serde(default)]
        sup_u: f64,
    },
    EigenLinf {
        n: usize,
        p: f64,
        q: f64,
        r: f64,
        lambda: f64,
        norm_r: f64,
        max_w: f64,
    },
    LevelSet {
        n: usize,
        p: f64,
        q: f64,
        lambda: f64,
        max_w: f64,
        t: f64,
        /// Measured `|{w > t}|`.
        measure: f64,
    },
    EigenInterp {
        n: usize,
        p: f64,
        q: f64,
        r: f64,
        s: f64,
        lambda: f64,
        norm_r: f64,
        norm_s: f64,
    },
    Sublinear {
        n: usize,
        p: f64,
        q: f64,
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
        c: f64,
        d: f64,
        norm_r: f64,
        sup_w: f64,
    },
    EigenDecay {
        n: usize,
        p: f64,
        q: f64,
        c: f64,
        d: f64,
        lambda: f64,
        measure: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
        sup_w: f64,
    },
}

impl RunConfig {
    pub fn new(task: Task) -> Self {
        Self { task, out_dir: None, overrides: Overrides::default(), base_dir: PathBuf::new() }
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, Failure> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Failure::Config(format!("malformed config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Checks grid sizes, tolerances and that input paths exist.
    pub fn validate(&self) -> Result<(), Failure> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Failure::Config(format!("{name} must be positive, got {x}")))
            }
        };
        if let Some(t) = self.overrides.solver_tol {
            positive("solver_tol", t)?;
        }
        if self.overrides.max_iter == Some(0) {
            return Err(Failure::Config("max_iter must be positive".into()));
        }
        let exists = |p: &Path| {
            let full = self.resolve(p);
            if full.exists() {
                Ok(())
            } else {
                Err(Failure::Config(format!("missing input {}", full.display())))
            }
        };
        match &self.task {
            Task::Symmetrize { input, levels, samples } => {
                match input {
                    FieldSource::Json(p) => exists(p)?,
                    FieldSource::PgmCsv { mask, values, dx } => {
                        exists(mask)?;
                        exists(values)?;
                        positive("dx", *dx)?;
                    }
                }
                if *levels < 2 || *samples < 2 {
                    return Err(Failure::Config("levels and samples must be at least 2".into()));
                }
            }
            Task::Shoot { height, step, sweep, .. } => {
                positive("height", *height)?;
                if let Some(s) = step {
                    positive("step", *s)?;
                }
                if let Some(s) = sweep {
                    positive("sweep.min", s.min)?;
                    if !(s.max > s.min) || s.points < 2 {
                        return Err(Failure::Config("sweep needs max > min and at least 2 points".into()));
                    }
                }
            }
            Task::Maximal { radius, .. } => positive("radius", *radius)?,
            Task::Solve { domain, dx, .. } | Task::Verify { domain, dx, .. } => {
                positive("dx", *dx)?;
                if let Domain::MaskFile(p) = domain {
                    exists(p)?;
                    if matches!(self.task, Task::Verify { .. }) {
                        return Err(Failure::Config("verify needs a fixture or shape domain".into()));
                    }
                }
            }
            Task::Bounds { .. } => {}
            Task::Suite { dx, criteria, .. } => {
                if let Some(dx) = dx {
                    positive("dx", *dx)?;
                }
                if let Some(c) = criteria {
                    if c.iter().any(|&id| !(1..=9).contains(&id)) {
                        return Err(Failure::Config("criteria are numbered 1 to 9".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_field(&self, src: &FieldSource) -> Result<ScalarField, Failure> {
        let read = |p: &Path| {
            std::fs::read_to_string(self.resolve(p)).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        };
        match src {
            FieldSource::Json(p) => Ok(ScalarField::from_json(&read(p)?)?),
            FieldSource::PgmCsv { mask, values, dx } => Ok(ScalarField::from_pgm_csv(&read(mask)?, &read(values)?, *dx)?),
        }
    }

    /// Mask of `domain` at `dx`; a mask file keeps its own spacing.
    pub fn mask(&self, domain: &Domain, dx: f64) -> Result<ScalarField, Failure> {
        match domain {
            Domain::Fixture(f) => Ok(f.mask(dx)?),
            Domain::Shape(s) => Ok(s.rasterize(dx)?),
            Domain::MaskFile(p) => Ok(self.read_field(&FieldSource::Json(p.clone()))?.map(|_| 0.0)),
        }
    }
}
