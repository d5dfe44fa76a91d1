//! Dispatch of a [`RunConfig`] to the library and artifact emission.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use symrad::bounds::{self, BoundReport};
use symrad::compare;
use symrad::field::{self, DirichletProblem, EigenProblem, SolveReport, SolverOptions};
use symrad::radial;
use symrad::rearrange;
use symrad::suite::{Suite, SuiteConfig};
use symrad::ScalarField;

use crate::config::{BoundRequest, Domain, Problem, RunConfig, Task};
use crate::plot::{self, Curve};
use crate::Failure;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "SYMRAD_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "symrad-out";

/// Artifacts of a finished run. `violation` is set when the run completed
/// but an inequality failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub violation: Option<String>,
}

/// Output directory: the explicit flag, then the environment, then the
/// config, then [`DEFAULT_OUT_DIR`].
pub fn output_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    match &cfg.out_dir {
        Some(p) => cfg.resolve(p),
        None => PathBuf::from(DEFAULT_OUT_DIR),
    }
}

struct Sink {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Sink {
    fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
        body.push('\n');
        self.text(name, &body)
    }

    fn finish(self, summary: String, violation: Option<String>) -> Outcome {
        Outcome { out_dir: self.dir, files: self.files, summary, violation }
    }
}

fn columns(header: &str, cols: &[&[f64]]) -> String {
    let mut s = format!("{header}\n");
    let rows = cols.iter().map(|c| c.len()).min().unwrap_or(0);
    for k in 0..rows {
        let row: Vec<String> = cols.iter().map(|c| format!("{:.12e}", c[k])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn field_csv(u: &ScalarField) -> String {
    let mut s = String::from("x,y,value\n");
    for k in 0..u.nx() * u.ny() {
        if u.is_masked(k) {
            let [x, y] = u.center(k);
            s.push_str(&format!("{x:.12e},{y:.12e},{:.12e}\n", u.values()[k]));
        }
    }
    s
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    let mut o = SolverOptions::default();
    if let Some(t) = cfg.overrides.solver_tol {
        o.tol = t;
    }
    if let Some(m) = cfg.overrides.max_iter {
        o.max_iter = m;
    }
    o
}

fn check_converged(report: &SolveReport) -> Result<(), Failure> {
    if report.converged {
        Ok(())
    } else {
        Err(Failure::Solver(format!(
            "field solver stopped after {} iterations with gradient norm {:.3e}",
            report.iterations, report.final_grad_norm
        )))
    }
}

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Failure> {
    cfg.validate()?;
    let mut sink = Sink::new(out_dir)?;
    match &cfg.task {
        Task::Symmetrize { input, levels, samples } => {
            let u = cfg.read_field(input)?;
            let lattice = rearrange::level_lattice(u.max_value(), *levels);
            let mu = rearrange::distribution(&u, &lattice)?;
            let (s, us) = rearrange::decreasing_rearrangement(&u, *samples)?;
            let sharp = rearrange::schwarz(&u)?;
            sink.text("distribution.csv", &mu.to_csv())?;
            sink.text("rearrangement.csv", &columns("s,u_star", &[&s, &us]))?;
            sink.text("schwarz.csv", &sharp.to_csv())?;
            let ps = rearrange::polya_szego_check(&u, 2.0)?;
            sink.json(
                "summary.json",
                &json!({
                    "measure": u.measure(),
                    "max": u.max_value(),
                    "integral": u.integral(|x| x),
                    "polya_szego_p2": ps,
                }),
            )?;
            sink.text(
                "plot.gp",
                &plot::script("rearrangement", "s", "u*(s)", &[Curve { file: "rearrangement.csv", x: 1, y: 2, title: "u*" }]),
            )?;
            Ok(sink.finish(format!("measure {:.6}, max {:.6}", u.measure(), u.max_value()), None))
        }
        Task::Shoot { operator, source, height, step, sweep } => {
            let shot = radial::integrate(operator, source, *height, step.unwrap_or(1e-4))?;
            sink.text("shot.csv", &shot.to_csv())?;
            sink.json(
                "summary.json",
                &json!({
                    "height": shot.height,
                    "terminal": shot.terminal,
                    "flux_residual": shot.flux_residual,
                }),
            )?;
            let mut curves = vec![];
            if let Some(sw) = sweep {
                let theta = radial::theta_bound(operator, source, sw.max)?;
                let hs: Vec<f64> = (0..sw.points)
                    .map(|k| sw.min * (sw.max / sw.min).powf(k as f64 / (sw.points - 1) as f64))
                    .collect();
                let psi = hs.iter().map(|&h| radial::psi1(operator, source, h)).collect::<Result<Vec<_>, _>>()?;
                let cap = hs.iter().map(|&h| radial::r_upper_bound(operator, source, h)).collect::<Result<Vec<_>, _>>()?;
                let th: Vec<f64> = hs.iter().map(|&h| theta.eval(h)).collect();
                sink.text("sweep.csv", &columns("h,psi1,r_upper,theta", &[&hs, &psi, &cap, &th]))?;
                curves = vec![
                    Curve { file: "sweep.csv", x: 1, y: 2, title: "Psi1" },
                    Curve { file: "sweep.csv", x: 1, y: 3, title: "upper bound" },
                    Curve { file: "sweep.csv", x: 1, y: 4, title: "Theta" },
                ];
            }
            let mut gp = plot::script("shot", "r", "w", &[Curve { file: "shot.csv", x: 1, y: 2, title: "w" }]);
            if !curves.is_empty() {
                gp.push_str("set logscale xy\n");
                gp.push_str(&plot::script("sweep", "h", "R", &curves));
            }
            sink.text("plot.gp", &gp)?;
            let summary = match shot.terminal {
                Some(r) => format!("R_h = {r:.10}, flux residual {:.3e}", shot.flux_residual),
                None => "shot reached its radius cap with w > 0".to_string(),
            };
            Ok(sink.finish(summary, None))
        }
        Task::Maximal { operator, source, radius } => {
            let summary = if source.f0() > 0.0 {
                let (mh, shot) = radial::maximal_solution(operator, source, *radius)?;
                sink.json("maximal.json", &mh)?;
                sink.text("profile.csv", &shot.to_csv())?;
                format!("h0 = {:.10} ({} roots)", mh.h0, mh.roots.len())
            } else {
                let out = radial::f_zero_maximal(operator, source, *radius)?;
                sink.json("maximal.json", &out)?;
                sink.text("profile.csv", &out.profile.to_csv())?;
                format!("{:?}, max {:.6}", out.status, out.profile.max())
            };
            sink.text("plot.gp", &plot::script("maximal", "r", "U_B", &[Curve { file: "profile.csv", x: 1, y: 2, title: "U_B" }]))?;
            Ok(sink.finish(summary, None))
        }
        Task::Solve { domain, dx, problem } => {
            let mask = cfg.mask(domain, *dx)?;
            let opts = solver_options(cfg);
            let (u, report, lambda) = match problem {
                Problem::Dirichlet { operator, source, boundary } => {
                    let prob = DirichletProblem { mask, op: operator.clone(), src: source.clone(), boundary: *boundary };
                    let s = field::solve_dirichlet_with(&prob, &opts)?;
                    (s.field, s.report, None)
                }
                Problem::Eigen { p, q, lambda } => {
                    let s = field::solve_eigen_with(&EigenProblem { mask, p: *p, q: *q, lambda: *lambda }, &opts)?;
                    (s.field, s.report, Some(s.lambda))
                }
            };
            sink.text("field.json", &u.to_json()?)?;
            sink.text("field.csv", &field_csv(&u))?;
            sink.json(
                "report.json",
                &json!({ "report": report, "lambda": lambda, "max": u.max_value(), "measure": u.measure() }),
            )?;
            sink.text("plot.gp", &plot::heatmap("field", "field.csv"))?;
            check_converged(&report)?;
            let summary = match lambda {
                Some(l) => format!("λ = {l:.6}, max {:.6}", u.max_value()),
                None => format!("max {:.6}, {} iterations", u.max_value(), report.iterations),
            };
            Ok(sink.finish(summary, None))
        }
        Task::Bounds { request } => {
            let report = evaluate_bound(request)?;
            sink.json("report.json", &report)?;
            let summary = format!("{}: {:.6e} <= {:.6e} is {}", report.name, report.left, report.right, report.holds);
            let violation = (!report.holds).then(|| summary.clone());
            Ok(sink.finish(summary, violation))
        }
        Task::Verify { domain, dx, operator, source } => {
            let shape = match domain {
                Domain::Fixture(f) => f.shape(),
                Domain::Shape(s) => *s,
                Domain::MaskFile(_) => return Err(Failure::Config("verify needs a fixture or shape domain".into())),
            };
            let v = compare::verify(&shape, operator, source, *dx)?;
            let d = &v.verdict;
            sink.json(
                "verdict.json",
                &json!({
                    "verdict": d,
                    "maximal": v.maximal,
                    "principle": v.principle,
                    "solve": v.fine,
                    "coarse_max": v.coarse_max,
                }),
            )?;
            sink.text("distribution.csv", &columns("t,mu_u,mu_b,allowance", &[&d.levels, &d.mu_u, &d.mu_b, &d.allowance]))?;
            sink.text("u_sharp.csv", &v.u_sharp.to_csv())?;
            sink.text("ball.csv", &v.ball.to_csv())?;
            let mut gp = plot::script(
                "distribution",
                "t",
                "measure",
                &[Curve { file: "distribution.csv", x: 1, y: 2, title: "mu_u" }, Curve { file: "distribution.csv", x: 1, y: 3, title: "mu_B" }],
            );
            gp.push_str(&plot::script(
                "profiles",
                "r",
                "value",
                &[Curve { file: "u_sharp.csv", x: 1, y: 2, title: "u#" }, Curve { file: "ball.csv", x: 1, y: 2, title: "U_B" }],
            ));
            sink.text("plot.gp", &gp)?;
            let summary = format!(
                "holds = {}, max u = {:.6}, max U_B = {:.6}, strict = {:?}, equality = {:?}",
                d.holds, d.max_u, d.max_ub, d.strict, d.equality
            );
            let violation = (!d.holds).then(|| summary.clone());
            Ok(sink.finish(summary, violation))
        }
        Task::Suite { dx, seed, criteria } => {
            let mut sc = SuiteConfig::default();
            if let Some(dx) = dx {
                sc.dx = *dx;
            }
            if let Some(s) = seed {
                sc.seed = *s;
            }
            let ids = criteria.clone().unwrap_or_else(|| (1..=9).collect());
            let mut suite = Suite::new(sc);
            let mut rows = Vec::new();
            let mut failed = Vec::new();
            for id in ids {
                let r = suite.run(id);
                println!("{}", r.line());
                if !r.passed {
                    failed.push(id);
                }
                rows.push(json!({ "id": r.id, "name": r.name, "passed": r.passed, "summary": r.summary }));
            }
            sink.json("suite.json", &json!({ "config": sc, "criteria": rows }))?;
            let summary = format!("{} of {} criteria passed", rows.len() - failed.len(), rows.len());
            let violation = (!failed.is_empty()).then(|| format!("failed criteria {failed:?}"));
            Ok(sink.finish(summary, violation))
        }
    }
}

pub fn evaluate_bound(req: &BoundRequest) -> Result<BoundReport, Failure> {
    let report = match req {
        BoundRequest::Lq { operator, source, measure, norm_q } => {
            let m = bounds::lq_bound_for(operator, source, *measure)?;
            let lambda = bounds::eigen_ball(operator.dim, operator.constants()?.q, *measure)?;
            BoundReport::new("lq", *norm_q, m, [("lambda_ball".to_string(), lambda)].into_iter().collect())
        }
        BoundRequest::Moser { params, norm_q, sup_u } => bounds::moser_sup_bound(params, *norm_q, *sup_u)?,
        BoundRequest::Sup3 { operator, source, measure, sup_u } => {
            let m = bounds::lq_bound_for(operator, source, *measure)?;
            let params = bounds::MoserParams::from_specs(operator, source, *measure)?;
            let mut r = bounds::moser_sup_bound(&params, m, *sup_u)?;
            r.name = "sup3".into();
            r.constants.insert("M".into(), m);
            r
        }
        BoundRequest::EigenLinf { n, p, q, r, lambda, norm_r, max_w } => {
            bounds::eigen_linf_report(*n, *p, *q, *r, *lambda, *norm_r, *max_w)?
        }
        BoundRequest::LevelSet { n, p, q, lambda, max_w, t, measure } => {
            let b = bounds::level_set_lower_bound(*n, *p, *q, *lambda, *max_w, *t)?;
            // a lower bound: report it as b <= measure
            BoundReport::new("level_set", b, *measure, [("t".to_string(), *t)].into_iter().collect())
        }
        BoundRequest::EigenInterp { n, p, q, r, s, lambda, norm_r, norm_s } => {
            let b = bounds::eigen_interp_bound(*n, *p, *q, *r, *s, *lambda, *norm_r)?;
            BoundReport::new("eigen_interp", *norm_s, b, [("r".to_string(), *r), ("s".to_string(), *s)].into_iter().collect())
        }
        BoundRequest::Sublinear { n, p, q, r, rho, c, d, norm_r, sup_w } => {
            let rho = match rho {
                Some(x) => *x,
                None => bounds::optimal_rho(*n, *p, *r)?,
            };
            bounds::sublinear_sup_bound(*n, *p, *q, *r, rho, *c, *d, *norm_r, *sup_w)?
        }
        BoundRequest::EigenDecay { n, p, q, c, d, lambda, measure, rho, sup_w } => {
            let rho = match rho {
                Some(x) => *x,
                None => bounds::optimal_rho(*n, *p, *p)?,
            };
            bounds::eigen_decay_bounds(*n, *p, *q, *c, *d, *lambda, *measure, rho, *sup_w)?
        }
    };
    Ok(report)
}
