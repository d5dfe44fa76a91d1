//! Shipped example configurations and data files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use symrad::grid::{Fixture, Shape};
use symrad::ops::{OperatorSpec, SourceFn, SourceSpec};

use crate::config::{BoundRequest, Domain, FieldSource, Problem, RunConfig, Sweep, Task};
use crate::Failure;

/// Spacing of the cone field.
pub const CONE_DX: f64 = 1.0 / 64.0;

/// `u(x) = 1 - |x|` on the unit disk, whose rearrangement is
/// `u*(s) = 1 - sqrt(s/π)`.
pub fn cone_field() -> Result<symrad::ScalarField, Failure> {
    Ok(Shape::unit_disk().rasterize(CONE_DX)?.from_fn(|x, y| 1.0 - x.hypot(y))?)
}

/// Named configurations of the fixture library.
pub fn library() -> Vec<(&'static str, RunConfig)> {
    let torsion = SourceSpec::constant(1.0);
    let p2 = OperatorSpec::p_laplacian(2, 2.0);
    vec![
        (
            "symmetrize_cone",
            RunConfig::new(Task::Symmetrize { input: FieldSource::Json(PathBuf::from("cone_field.json")), levels: 256, samples: 513 }),
        ),
        (
            "shoot_torsion",
            RunConfig::new(Task::Shoot {
                operator: p2.clone(),
                source: torsion.clone(),
                height: 0.25,
                step: Some(1e-4),
                sweep: Some(Sweep { min: 1e-3, max: 10.0, points: 64 }),
            }),
        ),
        (
            "maximal_affine",
            RunConfig::new(Task::Maximal {
                operator: p2.clone(),
                source: SourceSpec::new(SourceFn::affine(1.0, 0.5), 0.5, 1.0),
                radius: 1.0,
            }),
        ),
        (
            "solve_square_torsion",
            RunConfig::new(Task::Solve {
                domain: Domain::Fixture(Fixture::Square),
                dx: 1.0 / 64.0,
                problem: Problem::Dirichlet { operator: p2.clone(), source: torsion.clone(), boundary: 0.0 },
            }),
        ),
        (
            "solve_disk_eigen",
            RunConfig::new(Task::Solve {
                domain: Domain::Fixture(Fixture::Disk),
                dx: 1.0 / 64.0,
                problem: Problem::Eigen { p: 2.0, q: 2.0, lambda: None },
            }),
        ),
        (
            "bounds_level_set",
            RunConfig::new(Task::Bounds {
                request: BoundRequest::LevelSet { n: 2, p: 2.0, q: 2.0, lambda: 5.7832, max_w: 1.0, t: 0.0, measure: PI },
            }),
        ),
        (
            "verify_square_torsion",
            RunConfig::new(Task::Verify { domain: Domain::Fixture(Fixture::Square), dx: 1.0 / 64.0, operator: p2, source: torsion }),
        ),
        ("suite", RunConfig::new(Task::Suite { dx: None, seed: None, criteria: None })),
    ]
}

/// Writes every library configuration and the cone field into `dir`.
pub fn write_library(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let cone = dir.join("cone_field.json");
    std::fs::write(&cone, cone_field()?.to_json()?)?;
    written.push(cone);
    for (name, cfg) in library() {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, cfg.to_json())?;
        written.push(path);
    }
    Ok(written)
}
