//! Comparison of solutions on `Ω` with the maximal radial solution on the ball
//! of equal measure: distribution functions, maxima, strictness and the
//! radial maximum principle.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{self, DirichletProblem, EigenProblem, SolveReport};
use crate::grid::{ScalarField, Shape};
use crate::ops::{OperatorSpec, SourceSpec};
use crate::profile::{ball_radius, RadialProfile};
use crate::radial::{self, LimitStatus, MaximalHeight};
use crate::rearrange::{distribution, level_lattice, schwarz};
use crate::bounds;

/// Size of the shared level lattice on `[0, max U_B]`.
pub const LEVELS: usize = 256;
/// Fraenkel asymmetry below which a mask counts as a disk.
pub const DISK_ASYMMETRY: f64 = 0.02;
/// Allowed relative mismatch between the ball and mask measures.
pub const MEASURE_MISMATCH: f64 = 0.01;
/// Fraction of the largest admissible paraboloid constant used in the
/// far-from-ball check.
pub const PARABOLOID_FRACTION: f64 = 0.99;

/// Error allowance for inequalities between a grid solution and a radial one.
///
/// A level passes when `μ_u(t) <= μ_B(t - level) + measure`, plus the
/// per-level allowance of [`compare_distribution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub level: f64,
    pub measure: f64,
}

impl Tolerance {
    pub fn new(level: f64, measure: f64) -> Result<Self> {
        if !(level >= 0.0 && measure >= 0.0) {
            return invalid("tolerances must be nonnegative");
        }
        Ok(Self { level, measure })
    }

    /// Two-grid level tolerance from solutions at `Δx` and `2Δx`: twice the
    /// change in the maximum. The measure part is one fine cell; per-level
    /// measure allowances come from [`two_grid_allowance`].
    pub fn two_grid(fine: &ScalarField, coarse: &ScalarField) -> Result<Self> {
        if !(coarse.dx() > fine.dx()) {
            return invalid("coarse grid must be coarser than the fine grid");
        }
        Ok(Self { level: 2.0 * (fine.max_value() - coarse.max_value()).abs(), measure: fine.cell_area() })
    }
}

/// Half a cell for every masked cell above `t` with a 4-neighbour at or below
/// `t` (unmasked neighbours count as 0): the cell-counting error of `μ(t)`.
pub fn quantization_band(u: &ScalarField, levels: &[f64]) -> Vec<f64> {
    let (nx, ny) = (u.nx() as isize, u.ny() as isize);
    let value = |i: isize, j: isize| {
        if i >= 0 && j >= 0 && i < nx && j < ny && u.is_masked(u.index(i as usize, j as usize)) {
            u.get(i, j)
        } else {
            0.0
        }
    };
    // a cell straddles level t for t in [lowest neighbour, own value)
    let mut spans = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !u.is_masked(u.index(i as usize, j as usize)) {
                continue;
            }
            let low = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .map(|(a, b)| value(i + a, j + b))
                .fold(f64::INFINITY, f64::min);
            let v = u.get(i, j);
            if low < v {
                spans.push((low, v));
            }
        }
    }
    let half = 0.5 * u.cell_area();
    levels
        .iter()
        .map(|&t| spans.iter().filter(|(a, b)| *a <= t && t < *b).count() as f64 * half)
        .collect()
}

/// `2 |μ_fine(t) - (|Ω_fine| / |Ω_coarse|) μ_coarse(t)|` per level.
pub fn two_grid_allowance(fine: &ScalarField, coarse: &ScalarField, levels: &[f64]) -> Result<Vec<f64>> {
    let a = distribution(fine, levels)?.measures;
    let b = distribution(coarse, levels)?.measures;
    let scale = fine.measure() / coarse.measure();
    Ok(a.iter().zip(&b).map(|(x, y)| 2.0 * (x - scale * y).abs()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyResidual {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub levels: Vec<f64>,
    pub mu_u: Vec<f64>,
    pub mu_b: Vec<f64>,
    /// `μ_B - μ_u` per level.
    pub margins: Vec<f64>,
    /// Measure allowance per level.
    pub allowance: Vec<f64>,
    pub max_u: f64,
    pub max_ub: f64,
    pub tol: Tolerance,
    pub max_holds: bool,
    pub distribution_holds: bool,
    pub holds: bool,
    /// Largest `μ_u(t) - μ_B(t - tol.level) - tol.measure - allowance(t)`;
    /// nonpositive when the distribution check passes.
    pub worst_excess: f64,
    pub asymmetry: f64,
    pub is_disk: bool,
    /// Levels at or below this height are inside the boundary layer and do not
    /// enter the strictness check.
    pub strict_floor: f64,
    /// `max u < max U_B`; `None` for disks.
    pub max_strict: Option<bool>,
    /// Minimum margin over interior levels; `None` for disks or max-only
    /// verdicts.
    pub min_interior_margin: Option<f64>,
    pub strict: Option<bool>,
    /// `|max u - max U_B| <= tol.level`; only set for disks.
    pub equality: Option<bool>,
    pub key_residuals: Vec<KeyResidual>,
}

fn check_measures(u: &ScalarField, ub: &RadialProfile) -> Result<()> {
    let (a, b) = (u.measure(), ub.ball_measure());
    if a <= 0.0 {
        return Err(Error::EmptyDomain);
    }
    if (a - b).abs() > MEASURE_MISMATCH * a {
        return Err(Error::Precondition(format!("ball measure {b} does not match mask measure {a}")));
    }
    Ok(())
}

/// Twice the largest value on masked cells with an unmasked 4-neighbour.
pub fn boundary_layer_height(u: &ScalarField) -> f64 {
    let (nx, ny) = (u.nx() as isize, u.ny() as isize);
    let inside = |i: isize, j: isize| i >= 0 && j >= 0 && i < nx && j < ny && u.is_masked(u.index(i as usize, j as usize));
    let mut top = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            if !inside(i, j) {
                continue;
            }
            if !(inside(i - 1, j) && inside(i + 1, j) && inside(i, j - 1) && inside(i, j + 1)) {
                top = top.max(u.get(i, j).abs());
            }
        }
    }
    2.0 * top
}

fn base_verdict(u: &ScalarField, ub: &RadialProfile, tol: Tolerance) -> Result<ComparisonVerdict> {
    check_measures(u, ub)?;
    let max_u = u.max_value();
    let max_ub = ub.max();
    let asymmetry = u.disk_asymmetry();
    let is_disk = asymmetry < DISK_ASYMMETRY;
    let max_holds = max_u <= max_ub + tol.level;
    Ok(ComparisonVerdict {
        levels: vec![],
        mu_u: vec![],
        mu_b: vec![],
        margins: vec![],
        allowance: vec![],
        max_u,
        max_ub,
        tol,
        max_holds,
        distribution_holds: true,
        holds: max_holds,
        worst_excess: f64::NEG_INFINITY,
        asymmetry,
        is_disk,
        strict_floor: boundary_layer_height(u),
        max_strict: (!is_disk).then_some(max_u < max_ub),
        min_interior_margin: None,
        strict: None,
        equality: is_disk.then_some((max_u - max_ub).abs() <= tol.level),
        key_residuals: vec![],
    })
}

/// Compares `max u` with `max U_B`.
pub fn compare_max(u: &ScalarField, ub: &RadialProfile, tol: Tolerance) -> Result<ComparisonVerdict> {
    base_verdict(u, ub, tol)
}

/// Compares `μ_u` with `μ_B` on [`LEVELS`] uniform levels in `[0, max U_B]`.
/// Each level gets the quantization band as allowance, plus the two-grid
/// allowance when `coarse` (the same problem at `2Δx`) is supplied.
pub fn compare_distribution(u: &ScalarField, ub: &RadialProfile, tol: Tolerance, coarse: Option<&ScalarField>) -> Result<ComparisonVerdict> {
    let mut v = base_verdict(u, ub, tol)?;
    let levels = level_lattice(v.max_ub, LEVELS);
    let mu_u = distribution(u, &levels)?.measures;
    let mu_b: Vec<f64> = levels.iter().map(|&t| ub.measure_above(t)).collect();
    let margins: Vec<f64> = mu_b.iter().zip(&mu_u).map(|(b, a)| b - a).collect();
    let mut allowance = quantization_band(u, &levels);
    if let Some(c) = coarse {
        for (a, d) in allowance.iter_mut().zip(two_grid_allowance(u, c, &levels)?) {
            *a += d;
        }
    }
    v.worst_excess = (0..levels.len())
        .map(|k| {
            let extra = allowance.get(k).copied().unwrap_or(0.0);
            mu_u[k] - ub.measure_above((levels[k] - tol.level).max(0.0)) - tol.measure - extra
        })
        .fold(f64::NEG_INFINITY, f64::max);
    v.distribution_holds = v.worst_excess <= 0.0;
    v.holds = v.max_holds && v.distribution_holds;
    if !v.is_disk {
        let interior: Vec<f64> = levels
            .iter()
            .zip(&margins)
            .filter(|(&t, _)| t > v.strict_floor && t < v.max_ub)
            .map(|(_, &m)| m)
            .collect();
        if !interior.is_empty() {
            let min = interior.iter().copied().fold(f64::INFINITY, f64::min);
            v.min_interior_margin = Some(min);
            v.strict = Some(min > 0.0);
        }
    }
    v.levels = levels;
    v.mu_u = mu_u;
    v.mu_b = mu_b;
    v.margins = margins;
    v.allowance = allowance;
    Ok(v)
}

/// `h_t(s) = (s - t) f(s) / p - F(s)`.
pub fn h_t(src: &SourceSpec, p: f64, t: f64, s: f64) -> f64 {
    (s - t) * src.f(s) / p - src.big_f(s)
}

/// `true` when `h_t` is strictly decreasing on 512 uniform samples of
/// `[t, s_max]`.
pub fn h_t_decreasing(src: &SourceSpec, p: f64, t: f64, s_max: f64) -> bool {
    let n = 512;
    let vals: Vec<f64> = (0..=n).map(|k| h_t(src, p, t, t + (s_max - t) * k as f64 / n as f64)).collect();
    vals.windows(2).all(|w| w[1] < w[0])
}

/// Both sides of `∫_{Ω_t} h_t(u) >= ∫_{B_t} h_t(U)`.
pub fn key_inequality(u: &ScalarField, ub: &RadialProfile, src: &SourceSpec, p: f64, t: f64, tol: Tolerance) -> Result<KeyResidual> {
    check_measures(u, ub)?;
    let top = u.max_value().max(ub.max()) + tol.level;
    if !src.flags(p, top.max(1e-12)).ratio_decreasing {
        return Err(Error::Precondition("f(t)/t^(p-1) must be decreasing".into()));
    }
    if t >= u.max_value() && t >= ub.max() {
        return Ok(KeyResidual { t, lhs: 0.0, rhs: 0.0, tol: 0.0, holds: true });
    }
    let g = |s: f64| if s > t { h_t(src, p, t, s) } else { 0.0 };
    let lhs = u.integral(g);
    let rhs = ub.integral(g);
    let n = 256;
    let ss: Vec<f64> = (0..=n).map(|k| t + (top - t) * k as f64 / n as f64).collect();
    let hs: Vec<f64> = ss.iter().map(|&s| h_t(src, p, t, s)).collect();
    let sup_h = hs.iter().fold(0.0f64, |a, h| a.max(h.abs()));
    let sup_dh = hs
        .windows(2)
        .zip(ss.windows(2))
        .map(|(h, s)| ((h[1] - h[0]) / (s[1] - s[0])).abs())
        .fold(0.0f64, f64::max);
    let tol = sup_h * tol.measure + sup_dh * tol.level * u.measure();
    Ok(KeyResidual { t, lhs, rhs, tol, holds: lhs - rhs >= -tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipleVerdict {
    /// Top of the initial run of levels where the two profiles agree.
    pub t1: f64,
    /// The profiles agree on every resolvable level.
    pub identical: bool,
    /// No resolvable level above `t1` agrees again.
    pub dichotomy_holds: bool,
    /// With strictly increasing `f`: `t1 <= tol.level`; otherwise `true`.
    pub t1_consistent: bool,
}

/// Locates `t₁` with `u♯ = U` in `{U <= t₁}` and `u♯ < U` in `{U > t₁}`.
///
/// The comparison runs in measure on [`LEVELS`] uniform levels of
/// `[0, max U]`: at level `t_k` the profiles agree when
/// `μ♯(t) >= μ_U(t + tol.level) - tol.measure - allowance[k]` (missing
/// allowances are 0). Levels where the right side is not positive are too
/// close to `max U` to be resolved and are skipped.
pub fn maximum_principle_check(
    u_sharp: &RadialProfile,
    u: &RadialProfile,
    tol: Tolerance,
    allowance: &[f64],
    strictly_increasing: bool,
) -> Result<PrincipleVerdict> {
    if u_sharp.dim() != u.dim() {
        return invalid("profiles must share the dimension");
    }
    if u_sharp.radius() > u.radius() * (1.0 + 1e-12) {
        return Err(Error::Precondition("u♯ must live on a ball inside the ball of U".into()));
    }
    let levels = level_lattice(u.max(), LEVELS);
    let mut agree = Vec::with_capacity(levels.len());
    for (k, &t) in levels.iter().enumerate() {
        let slack = tol.measure + allowance.get(k).copied().unwrap_or(0.0);
        let m1 = u_sharp.measure_above(t);
        let hi = u.measure_above((t - tol.level).max(0.0)) + slack;
        if m1 > hi {
            return Err(Error::Precondition(format!("u♯ exceeds U at level {t}")));
        }
        let lo = u.measure_above(t + tol.level) - slack;
        agree.push((lo > 0.0).then_some(m1 >= lo));
    }
    let run = agree.iter().take_while(|a| matches!(a, Some(true) | None)).count();
    let t1 = if run == 0 { 0.0 } else { levels[run - 1] };
    let later = agree[run..].iter().any(|a| *a == Some(true));
    let identical = agree.iter().all(|a| *a != Some(false));
    Ok(PrincipleVerdict {
        t1: if identical { u.max() } else { t1 },
        identical,
        dichotomy_holds: !later,
        t1_consistent: !strictly_increasing || identical || t1 <= tol.level,
    })
}

/// `-w'` at radius `r`, by the difference quotient of the enclosing samples.
fn slope_at(w: &RadialProfile, r: f64) -> f64 {
    let rs = w.radii();
    let k = rs.partition_point(|&x| x < r).clamp(1, rs.len() - 1);
    (w.values()[k - 1] - w.values()[k]) / (rs[k] - rs[k - 1])
}

/// Checks that `u₁ > u₂ - tol` on `(0, R₂]` for radial profiles satisfying the
/// hypotheses of the radial comparison principle.
///
/// The flux hypothesis `b(t, -w₁'(r₁)) r₁^{n-1} >= b(t, -w₂'(r₂)) r₂^{n-1}` is
/// checked on [`LEVELS`] levels of `[m, min(max u₁, max u₂))` with relative
/// slack `tol`; a failure is a precondition error.
pub fn radial_comparison_check(u1: &RadialProfile, u2: &RadialProfile, op: &OperatorSpec, tol: f64) -> Result<bool> {
    op.validate()?;
    if u1.dim() != u2.dim() || u1.dim() != op.dim {
        return invalid("profiles and operator must share the dimension");
    }
    let (r1, r2) = (u1.radius(), u2.radius());
    if !(r1 > r2) {
        return Err(Error::Precondition(format!("need R₁ > R₂, got {r1} and {r2}")));
    }
    let m = u1.min();
    if (m - u2.min()).abs() > tol {
        return Err(Error::Precondition(format!("boundary values differ: {} vs {}", m, u2.min())));
    }
    if u1.values().windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("w₁ must be strictly decreasing".into()));
    }
    let top = u1.max().min(u2.max());
    let n1 = (op.dim - 1) as i32;
    for k in 0..LEVELS {
        let t = m + (top - m) * k as f64 / LEVELS as f64;
        let (a, b) = (u1.level_radius(t), u2.level_radius(t));
        let lhs = op.flux(t, slope_at(u1, a)) * a.powi(n1);
        let rhs = op.flux(t, slope_at(u2, b)) * b.powi(n1);
        if lhs < rhs - tol * rhs.abs().max(1.0) {
            return Err(Error::Precondition(format!("flux hypothesis fails at t = {t}: {lhs} < {rhs}")));
        }
    }
    let ok = u2
        .radii()
        .iter()
        .zip(u2.values())
        .filter(|(&r, _)| r > 0.0)
        .all(|(&r, &w2)| u1.eval(r).is_some_and(|w1| w1 > w2 - tol));
    Ok(ok)
}

/// Maximal radial solution on the ball of the given measure: the largest root
/// of the height scan when `f(0) > 0`, the shifted-source limit otherwise.
pub fn ball_solution(op: &OperatorSpec, src: &SourceSpec, measure: f64) -> Result<(RadialProfile, Option<MaximalHeight>)> {
    let r0 = ball_radius(op.dim, measure);
    if src.f0() > 0.0 {
        let (mh, shot) = radial::maximal_solution(op, src, r0)?;
        let prof = &shot.profile;
        // trim the shot to [0, R₀]
        let k = prof.radii().partition_point(|&r| r < r0);
        let mut radii = prof.radii()[..k].to_vec();
        let mut values = prof.values()[..k].to_vec();
        radii.push(r0);
        values.push(prof.eval(r0).unwrap_or(0.0).max(0.0));
        return Ok((RadialProfile::new(op.dim, radii, values)?, Some(mh)));
    }
    let out = radial::f_zero_maximal(op, src, r0)?;
    Ok((out.profile, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub verdict: ComparisonVerdict,
    pub u_sharp: RadialProfile,
    pub ball: RadialProfile,
    /// Height scan of the ball problem; lists every root found.
    pub maximal: Option<MaximalHeight>,
    pub principle: Option<PrincipleVerdict>,
    pub fine: SolveReport,
    pub coarse_max: f64,
    /// Fine-grid solution.
    pub field: ScalarField,
}

/// Solves on `shape` at `dx` and `2 dx`, builds `U_B` on the ball of the fine
/// mask's measure and runs every comparison.
pub fn verify(shape: &Shape, op: &OperatorSpec, src: &SourceSpec, dx: f64) -> Result<Verification> {
    let solve = |h: f64| -> Result<(ScalarField, SolveReport)> {
        let prob = DirichletProblem { mask: shape.rasterize(h)?, op: op.clone(), src: src.clone(), boundary: 0.0 };
        let s = field::solve_dirichlet(&prob)?;
        Ok((s.field, s.report))
    };
    let (fine, coarse) = rayon::join(|| solve(dx), || solve(2.0 * dx));
    let ((u, report), (uc, _)) = (fine?, coarse?);
    let tol = Tolerance::two_grid(&u, &uc)?;
    let (ball, maximal) = ball_solution(op, src, u.measure())?;
    let mut verdict = compare_distribution(&u, &ball, tol, Some(&uc))?;
    let p = op.p();
    if src.flags(p, (verdict.max_ub + tol.level).max(1e-12)).ratio_decreasing {
        verdict.key_residuals = verdict
            .levels
            .iter()
            .map(|&t| key_inequality(&u, &ball, src, p, t, tol))
            .collect::<Result<_>>()?;
        verdict.holds &= verdict.key_residuals.iter().all(|k| k.holds);
    }
    let u_sharp = schwarz(&u)?;
    let strictly_increasing = src.flags(p, verdict.max_ub.max(1e-12)).nondecreasing
        && (1..=64).all(|k| {
            let t = verdict.max_ub * k as f64 / 64.0;
            src.f(t) > src.f(t - verdict.max_ub / 64.0)
        });
    // levels inside the boundary layer cannot separate the profiles
    let principle_tol = Tolerance { level: tol.level.max(verdict.strict_floor), ..tol };
    let principle = if verdict.distribution_holds {
        Some(maximum_principle_check(&u_sharp, &ball, principle_tol, &[], strictly_increasing)?)
    } else {
        None
    };
    Ok(Verification { verdict, u_sharp, ball, maximal, principle, fine: report, coarse_max: uc.max_value(), field: u })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainStatus {
    Holds,
    Inconclusive,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFromBallVerdict {
    pub lambda: f64,
    pub sup_u: f64,
    /// Sup bound in terms of `λ_p(Ω)`.
    pub sup_bound: f64,
    pub ball_max: f64,
    /// `C` of the paraboloid `P` with `-Δ_p P = C` and `P < U` in `B`.
    pub paraboloid_c: f64,
    /// First height where `f` reaches `C`; `None` if not reached below the
    /// scanned range.
    pub m_level: Option<f64>,
    /// `sup_bound < M`: the decay chain applies.
    pub chain_applies: bool,
    pub sup_within_bound: bool,
    /// `u♯ <= P` up to the boundary placement tolerance.
    pub sharp_below_paraboloid: bool,
    pub paraboloid_below_ball: bool,
    pub status: ChainStatus,
}

/// Radial profile of `P` for `C = 1`:
/// `((p-1)/p) n^{-1/(p-1)} (R^{p/(p-1)} - r^{p/(p-1)})`.
fn unit_paraboloid(n: usize, p: f64, radius: f64, r: f64) -> f64 {
    let e = p / (p - 1.0);
    (p - 1.0) / p * (1.0 / n as f64).powf(1.0 / (p - 1.0)) * (radius.powf(e) - r.powf(e))
}

/// End-to-end check of the large-eigenvalue decay estimate for `-Δ_p u = f(u)`
/// with `f(0) = 0` and `|f(t)| <= c t^{p-1} + d`.
pub fn eigen_far_from_ball_check(mask: &ScalarField, p: f64, c: f64, d: f64, f: &SourceSpec) -> Result<FarFromBallVerdict> {
    if f.f0().abs() > 0.0 {
        return Err(Error::Precondition("f(0) must vanish".into()));
    }
    let n = 2;
    let measure = mask.measure();
    let eig = field::solve_eigen(&EigenProblem { mask: mask.clone(), p, q: p, lambda: None })?;
    let lambda = eig.lambda;
    let op = OperatorSpec::p_laplacian(n, p);
    let sol = field::solve_dirichlet(&DirichletProblem { mask: mask.clone(), op: op.clone(), src: f.clone(), boundary: 0.0 })?;
    let sup_u = sol.field.max_value();
    let rho = bounds::optimal_rho(n, p, p)?;
    let sup_bound = bounds::eigen_decay_bounds(n, p, p, c, d, lambda, measure, rho, sup_u)?.right;

    let out = radial::f_zero_maximal(&op, f, ball_radius(n, measure))?;
    let ball = out.profile;
    let radius = ball.radius();
    let inconclusive = |paraboloid_c: f64, m_level: Option<f64>| FarFromBallVerdict {
        lambda,
        sup_u,
        sup_bound,
        ball_max: ball.max(),
        paraboloid_c,
        m_level,
        chain_applies: false,
        sup_within_bound: sup_u <= sup_bound,
        sharp_below_paraboloid: false,
        paraboloid_below_ball: false,
        status: ChainStatus::Inconclusive,
    };
    if out.status != LimitStatus::Nontrivial {
        return Ok(inconclusive(0.0, None));
    }
    let ratio = ball
        .radii()
        .iter()
        .zip(ball.values())
        .filter(|(&r, _)| r < radius)
        .map(|(&r, &w)| w / unit_paraboloid(n, p, radius, r))
        .fold(f64::INFINITY, f64::min);
    let paraboloid_c = PARABOLOID_FRACTION * ratio.powf(p - 1.0);
    let scale = paraboloid_c.powf(1.0 / (p - 1.0));
    let par = |r: f64| scale * unit_paraboloid(n, p, radius, r);

    let span = 2.0 * sup_bound.max(ball.max());
    let steps = 20000;
    let m_level = (1..=steps)
        .map(|k| span * k as f64 / steps as f64)
        .find(|&t| f.f(t) >= paraboloid_c);
    let chain_applies = m_level.is_none_or(|m| sup_bound < m);
    if !chain_applies {
        return Ok(inconclusive(paraboloid_c, m_level));
    }

    let paraboloid_below_ball = ball
        .radii()
        .iter()
        .zip(ball.values())
        .filter(|(&r, _)| r < radius)
        .all(|(&r, &w)| par(r) < w);
    let u_sharp = schwarz(&sol.field)?;
    let slope = scale * (n as f64).powf(-1.0 / (p - 1.0)) * radius.powf(1.0 / (p - 1.0));
    let placement = slope * mask.dx();
    let sharp_below_paraboloid = u_sharp
        .radii()
        .iter()
        .zip(u_sharp.values())
        .all(|(&r, &w)| w <= par(r.min(radius)) + placement);
    let sup_within_bound = sup_u <= sup_bound;
    let ok = sup_within_bound && sharp_below_paraboloid && paraboloid_below_ball;
    Ok(FarFromBallVerdict {
        lambda,
        sup_u,
        sup_bound,
        ball_max: ball.max(),
        paraboloid_c,
        m_level,
        chain_applies,
        sup_within_bound,
        sharp_below_paraboloid,
        paraboloid_below_ball,
        status: if ok { ChainStatus::Holds } else { ChainStatus::Violated },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Fixture;

    fn torsion(r: f64) -> RadialProfile {
        RadialProfile::from_fn(2, r, 2000, |s| 0.25 * (r * r - s * s)).unwrap()
    }

    #[test]
    fn exact_disk_pair_is_identical() {
        let ub = torsion(1.0);
        let tol = Tolerance::new(1e-9, 1e-9).unwrap();
        let v = maximum_principle_check(&ub, &ub, tol, &[], true).unwrap();
        assert!(v.identical && v.dichotomy_holds && v.t1_consistent);
        assert_eq!(v.t1, ub.max());
    }

    #[test]
    fn annulus_agreement_locates_t1() {
        let u = RadialProfile::from_fn(2, 1.0, 4000, |r| 1.0 - r * r).unwrap();
        let us = RadialProfile::from_fn(2, 1.0, 4000, |r| {
            if r >= 0.5 {
                1.0 - r * r
            } else {
                0.75 + 0.5 * (0.25 - r * r)
            }
        })
        .unwrap();
        let tol = Tolerance::new(1e-9, 1e-9).unwrap();
        let v = maximum_principle_check(&us, &u, tol, &[], false).unwrap();
        assert!(!v.identical && v.dichotomy_holds);
        assert!((v.t1 - 0.75).abs() <= 1.0 / 128.0, "{}", v.t1);
        let strict = maximum_principle_check(&us, &u, tol, &[], true).unwrap();
        assert!(!strict.t1_consistent);
        assert!(maximum_principle_check(&u, &us, tol, &[], false).is_err());
    }

    #[test]
    fn torsion_radii_compare() {
        let op = OperatorSpec::p_laplacian(2, 2.0);
        assert!(radial_comparison_check(&torsion(1.0), &torsion(0.8), &op, 1e-9).unwrap());
        assert!(matches!(
            radial_comparison_check(&torsion(1.0), &torsion(1.0), &op, 1e-9),
            Err(Error::Precondition(_))
        ));
        let lifted = RadialProfile::from_fn(2, 0.8, 2000, |s| 0.1 + 0.25 * (0.64 - s * s)).unwrap();
        assert!(radial_comparison_check(&torsion(1.0), &lifted, &op, 1e-9).is_err());
    }

    #[test]
    fn h_t_is_decreasing_for_sqrt() {
        let src = SourceSpec::new(crate::ops::SourceFn::power(1.0, 0.5), 1.0, 1.0);
        for t in [0.0, 0.1, 1.0] {
            assert!(h_t_decreasing(&src, 2.0, t, t + 5.0));
            // h_t'(s) = -(s + t) / (4 √s)
            let s = t + 0.7;
            let dh = (h_t(&src, 2.0, t, s + 1e-6) - h_t(&src, 2.0, t, s - 1e-6)) / 2e-6;
            assert!((dh + (s + t) / (4.0 * s.sqrt())).abs() < 1e-6);
        }
    }

    #[test]
    fn key_inequality_requires_ratio_flag() {
        let mask = Fixture::Disk.mask(1.0 / 16.0).unwrap();
        let u = mask.map(|_| 0.1);
        let ub = torsion((mask.measure() / std::f64::consts::PI).sqrt());
        let src = SourceSpec::new(crate::ops::SourceFn::power(1.0, 2.0), 1.0, 0.0);
        let tol = Tolerance::new(0.0, 0.0).unwrap();
        assert!(matches!(key_inequality(&u, &ub, &src, 2.0, 0.0, tol), Err(Error::Precondition(_))));
        let one = SourceSpec::constant(1.0);
        let k = key_inequality(&u, &ub, &one, 2.0, 1.0, tol).unwrap();
        assert_eq!((k.lhs, k.rhs), (0.0, 0.0));
    }

    #[test]
    fn measure_mismatch_is_rejected() {
        let mask = Fixture::Square.mask(1.0 / 16.0).unwrap();
        let u = mask.map(|_| 0.1);
        let tol = Tolerance::new(0.0, 0.0).unwrap();
        assert!(compare_max(&u, &torsion(0.5), tol).is_err());
    }

    #[test]
    fn square_torsion_coarse() {
        let op = OperatorSpec::p_laplacian(2, 2.0);
        let src = SourceSpec::constant(1.0);
        let v = verify(&Fixture::Square.shape(), &op, &src, 1.0 / 32.0).unwrap();
        let vd = &v.verdict;
        assert!(vd.holds, "{vd:?}");
        assert!(!vd.is_disk);
        assert_eq!(vd.max_strict, Some(true));
        assert_eq!(vd.levels.len(), LEVELS);
        assert!(vd.key_residuals[0].lhs >= vd.key_residuals[0].rhs);
        assert!(v.principle.unwrap().dichotomy_holds);
    }
}
