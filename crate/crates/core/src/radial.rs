//! Radial shooting for `-div a(w, ∇w) = f(w)` on balls.
//!
//! A shot integrates the flux system `Φ = r^{n-1} b(w, -w')`,
//! `Φ' = r^{n-1} f(w)` from `w(0) = h` with classic RK4 and stops at the first
//! zero of `w`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{invalid, Error, Result};
use crate::ops::{OperatorSpec, SourceSpec};
use crate::profile::{unit_ball_volume, RadialProfile, GL4};

/// Terminal-radius bisection tolerance, relative to the radius.
pub const TERMINAL_TOL: f64 = 1e-15;
/// Sup-norm Cauchy tolerance of the shifted-source limit.
pub const CAUCHY_TOL: f64 = 1e-8;
/// Height lattice density of the root scan.
pub const POINTS_PER_DECADE: usize = 64;
/// Default number of steps per shot radius.
pub const STEPS_PER_RADIUS: f64 = 4000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialShot {
    pub height: f64,
    pub profile: RadialProfile,
    /// `-w'(r)` at each sample.
    pub slopes: Vec<f64>,
    /// `Φ(r)` at each sample.
    pub fluxes: Vec<f64>,
    /// `R_h`, or `None` when the shot reached its radius cap with `w > 0`.
    pub terminal: Option<f64>,
    pub flux_residual: f64,
}

impl RadialShot {
    /// CSV `r,w,minus_dw,phi`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,w,minus_dw,phi\n");
        let p = &self.profile;
        for k in 0..p.radii().len() {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e}\n",
                p.radii()[k],
                p.values()[k],
                self.slopes[k],
                self.fluxes[k]
            ));
        }
        s
    }
}

struct Flow<'a> {
    op: &'a OperatorSpec,
    src: &'a SourceSpec,
    n: i32,
}

impl Flow<'_> {
    fn slope(&self, r: f64, w: f64, phi: f64) -> f64 {
        let y = phi / r.powi(self.n - 1);
        self.op.invert_flux(w, y)
    }

    fn deriv(&self, r: f64, w: f64, phi: f64) -> (f64, f64) {
        (-self.slope(r, w, phi), r.powi(self.n - 1) * self.src.f(w))
    }

    fn rk4(&self, r: f64, w: f64, phi: f64, dr: f64) -> (f64, f64) {
        let (a1, b1) = self.deriv(r, w, phi);
        let (a2, b2) = self.deriv(r + 0.5 * dr, w + 0.5 * dr * a1, phi + 0.5 * dr * b1);
        let (a3, b3) = self.deriv(r + 0.5 * dr, w + 0.5 * dr * a2, phi + 0.5 * dr * b2);
        let (a4, b4) = self.deriv(r + dr, w + dr * a3, phi + dr * b3);
        (
            w + dr / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            phi + dr / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        )
    }

    /// Small-radius start: `Φ ≈ f(h) r^n / n`, `w ≈ h - ∫_0^r b⁻¹(h, f(h) ρ / n) dρ`.
    fn start(&self, h: f64, r: f64) -> (f64, f64) {
        let n = self.n as f64;
        let fh = self.src.f(h);
        let phi = fh * r.powi(self.n) / n;
        // substitute ρ = r x² to smooth the root singularity at 0
        let panels = 4;
        let mut drop = 0.0;
        for k in 0..panels {
            for (x, wt) in GL4 {
                let xi = (k as f64 + 0.5 * (x + 1.0)) / panels as f64;
                let rho = r * xi * xi;
                drop += 0.5 * wt / panels as f64 * 2.0 * r * xi * self.op.invert_flux(h, fh * rho / n);
            }
        }
        (h - drop, phi)
    }
}

/// Shoots from height `h` with step `step` until `w` vanishes or `r` passes `r_stop`.
pub fn integrate_to(op: &OperatorSpec, src: &SourceSpec, h: f64, step: f64, r_stop: f64) -> Result<RadialShot> {
    if !(h > 0.0) {
        return invalid(format!("height must be positive, got {h}"));
    }
    if !(step > 0.0) || !(r_stop > 0.0) {
        return invalid("step and radius cap must be positive");
    }
    let flow = Flow { op, src, n: op.dim as i32 };
    let mut radii = vec![0.0];
    let mut values = vec![h];
    let mut slopes = vec![0.0];
    let mut fluxes = vec![0.0];

    let r0 = step.min(r_stop);
    let (w0, phi0) = flow.start(h, r0);
    let mut terminal = None;
    if w0 <= 0.0 {
        // the zero lies inside the start interval
        let (mut lo, mut hi) = (0.0, r0);
        while hi - lo > TERMINAL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if flow.start(h, mid).0 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let rt = 0.5 * (lo + hi);
        let (_, phi) = flow.start(h, rt);
        radii.push(rt);
        values.push(0.0);
        slopes.push(flow.slope(rt, 0.0, phi));
        fluxes.push(phi);
        terminal = Some(rt);
    } else {
        let (mut r, mut w, mut phi) = (r0, w0, phi0);
        radii.push(r);
        values.push(w);
        slopes.push(flow.slope(r, w, phi));
        fluxes.push(phi);
        while r < r_stop {
            let (wn, phin) = flow.rk4(r, w, phi, step);
            if wn <= 0.0 {
                let (mut lo, mut hi) = (0.0, step);
                while hi - lo > TERMINAL_TOL * (r + hi) {
                    let mid = 0.5 * (lo + hi);
                    if flow.rk4(r, w, phi, mid).0 > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let dr = 0.5 * (lo + hi);
                let (_, phit) = flow.rk4(r, w, phi, dr);
                let rt = r + dr;
                if dr < 0.5 * step && radii.len() > 2 {
                    // a near-duplicate last sample would dominate difference quotients
                    radii.pop();
                    values.pop();
                    slopes.pop();
                    fluxes.pop();
                }
                radii.push(rt);
                values.push(0.0);
                slopes.push(flow.slope(rt, 0.0, phit));
                fluxes.push(phit);
                terminal = Some(rt);
                break;
            }
            r += step;
            w = wn;
            phi = phin;
            radii.push(r);
            values.push(w);
            slopes.push(flow.slope(r, w, phi));
            fluxes.push(phi);
        }
    }
    let profile = RadialProfile::new(op.dim, radii, values)?;
    let mut shot = RadialShot { height: h, profile, slopes, fluxes, terminal, flux_residual: 0.0 };
    shot.flux_residual = flux_identity_residual(&shot, op, src);
    Ok(shot)
}

/// Shoots from `h`, capped by [`r_upper_bound`]; requires `f(0) > 0`.
pub fn integrate(op: &OperatorSpec, src: &SourceSpec, h: f64, step: f64) -> Result<RadialShot> {
    op.validate()?;
    src.validate()?;
    let cap = r_upper_bound(op, src, h)?;
    let shot = integrate_to(op, src, h, step, cap * (1.0 + 1e-9) + step)?;
    if shot.terminal.is_none() {
        return Err(Error::Hypothesis(format!(
            "shot from h = {h} does not vanish below the a-priori radius {cap}"
        )));
    }
    Ok(shot)
}

/// Flux identity `n ω_n b(w, -w') R^{n-1} = ∫_{B_R} f(w)` along a shot.
///
/// `-w'` is recovered from the profile samples by three-point differences and
/// the volume integral by cumulative trapezoid; the maximum mismatch over the
/// samples is divided by the full integral.
pub fn flux_identity_residual(shot: &RadialShot, op: &OperatorSpec, src: &SourceSpec) -> f64 {
    let r = shot.profile.radii();
    let w = shot.profile.values();
    let n = op.dim as i32;
    let k = r.len();
    let area = op.dim as f64 * unit_ball_volume(op.dim);
    let mut rhs = vec![0.0; k];
    for i in 1..k {
        let g0 = r[i - 1].powi(n - 1) * src.f(w[i - 1]);
        let g1 = r[i].powi(n - 1) * src.f(w[i]);
        rhs[i] = rhs[i - 1] + 0.5 * (g0 + g1) * (r[i] - r[i - 1]);
    }
    let total = area * rhs[k - 1];
    let mut worst: f64 = 0.0;
    for i in 1..k {
        let sigma = -derivative(r, w, i);
        let lhs = area * op.flux(w[i], sigma.max(0.0)) * r[i].powi(n - 1);
        worst = worst.max((lhs - area * rhs[i]).abs());
    }
    if total > 0.0 {
        worst / total
    } else {
        worst
    }
}

/// Three-point derivative on a possibly nonuniform lattice.
fn derivative(x: &[f64], y: &[f64], i: usize) -> f64 {
    let k = x.len();
    if k == 2 {
        return (y[1] - y[0]) / (x[1] - x[0]);
    }
    let (a, b, c) = if i == 0 {
        (0, 1, 2)
    } else if i == k - 1 {
        (k - 3, k - 2, k - 1)
    } else {
        (i - 1, i, i + 1)
    };
    let (x0, x1, x2) = (x[a], x[b], x[c]);
    let t = x[i];
    let l0 = (2.0 * t - x1 - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (2.0 * t - x0 - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (2.0 * t - x0 - x1) / ((x2 - x0) * (x2 - x1));
    l0 * y[a] + l1 * y[b] + l2 * y[c]
}

/// A-priori radius `C = (n C^*/f(0))[1 + (p/(p-1) · h f(0)/(n C^*))^{(p-1)/p}]`.
pub fn r_upper_bound(op: &OperatorSpec, src: &SourceSpec, h: f64) -> Result<f64> {
    let f0 = src.f0();
    if !(f0 > 0.0) {
        return Err(Error::Hypothesis(format!("f(0) must be positive, got {f0}")));
    }
    let c = op.constants()?;
    let n = op.dim as f64;
    let lead = n * c.c_upper / f0;
    Ok(lead * (1.0 + (c.p / (c.p - 1.0) * h / lead).powf((c.p - 1.0) / c.p)))
}

/// Shot with a step adapted to the terminal radius.
fn adaptive_shot(op: &OperatorSpec, src: &SourceSpec, h: f64) -> Result<RadialShot> {
    let cap = r_upper_bound(op, src, h)?;
    let coarse = integrate(op, src, h, cap / STEPS_PER_RADIUS)?;
    let rh = coarse.terminal.unwrap_or(cap);
    integrate(op, src, h, rh / STEPS_PER_RADIUS)
}

/// `Ψ₁(h)`: terminal radius of the shot from `h`.
pub fn psi1(op: &OperatorSpec, src: &SourceSpec, h: f64) -> Result<f64> {
    Ok(adaptive_shot(op, src, h)?.terminal.expect("integrate returns terminated shots"))
}

/// `Ψ₂(h)`: profile of the shot from `h`.
pub fn psi2(op: &OperatorSpec, src: &SourceSpec, h: f64) -> Result<RadialProfile> {
    Ok(adaptive_shot(op, src, h)?.profile)
}

/// Monotone map `Θ_M` with `Ψ₁(h) <= Θ_M(h)` for `h <= M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaBound {
    pub m: f64,
    /// `G(R) = ∫_0^R ρ⁻¹(f(0) r / n) dr` on a uniform `R` lattice.
    radii: Vec<f64>,
    heights: Vec<f64>,
}

impl ThetaBound {
    /// `Θ_M(h) = G⁻¹(h)`, log-log interpolation between lattice points.
    pub fn eval(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let k = self.heights.partition_point(|&g| g < h);
        if k >= self.heights.len() {
            return *self.radii.last().unwrap();
        }
        loglog(&self.heights, &self.radii, k.max(2), h)
    }

    /// `G(R)`.
    pub fn g(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let k = self.radii.partition_point(|&x| x < r);
        if k >= self.radii.len() {
            return *self.heights.last().unwrap();
        }
        loglog(&self.radii, &self.heights, k.max(2), r)
    }
}

/// `∫_{x0}^{x1} y` for the power law through `(x0, y0)` and `(x1, y1)`.
fn power_cell(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let ratio = x1 / x0;
    let a = (y1 / y0).ln() / ratio.ln();
    if (a + 1.0).abs() < 1e-9 {
        y0 * x0 * ratio.ln()
    } else {
        y0 * x0 * (ratio.powf(a + 1.0) - 1.0) / (a + 1.0)
    }
}

/// Power-law interpolation of `y(x)` through samples `k - 1` and `k`.
fn loglog(x: &[f64], y: &[f64], k: usize, at: f64) -> f64 {
    let (x0, x1) = (x[k - 1].ln(), x[k].ln());
    let (y0, y1) = (y[k - 1].ln(), y[k].ln());
    (y0 + (y1 - y0) * (at.ln() - x0) / (x1 - x0)).exp()
}

const RHO_LATTICE: usize = 512;
const G_LATTICE: usize = 4096;
/// Smallest lattice radius relative to the largest.
const G_SPAN: f64 = 1e-8;

/// Builds `Θ_M` from `ρ(s) = sup_{t ∈ [0, M]} |a(t, s·e)|`.
pub fn theta_bound(op: &OperatorSpec, src: &SourceSpec, m: f64) -> Result<ThetaBound> {
    let f0 = src.f0();
    if !(f0 > 0.0) {
        return Err(Error::Hypothesis(format!("f(0) must be positive, got {f0}")));
    }
    if !(m > 0.0) {
        return invalid("M must be positive");
    }
    let n = op.dim as f64;
    let ts: Vec<f64> = (0..=64).map(|k| m * k as f64 / 64.0).collect();
    let rho = |s: f64| ts.iter().map(|&t| op.flux(t, s)).fold(0.0, f64::max);

    let mut r_max = r_upper_bound(op, src, m)?;
    for _ in 0..60 {
        // s range covering ρ⁻¹ on (0, f(0) r_max / n]
        let y_max = f0 * r_max / n;
        let mut s_hi = 1.0;
        while rho(s_hi) < y_max {
            s_hi *= 2.0;
        }
        while rho(s_hi * 0.5) >= y_max && s_hi > 1e-300 {
            s_hi *= 0.5;
        }
        let s_lo = s_hi * 1e-12;
        let ls: Vec<f64> = (0..RHO_LATTICE)
            .map(|k| s_lo.ln() + (s_hi.ln() - s_lo.ln()) * k as f64 / (RHO_LATTICE - 1) as f64)
            .collect();
        let lr: Vec<f64> = ls.iter().map(|&l| rho(l.exp()).ln()).collect();
        if lr.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Hypothesis("ρ is not strictly increasing on the lattice".into()));
        }
        let inv = |y: f64| -> f64 {
            if y <= 0.0 {
                return 0.0;
            }
            let ly = y.ln();
            let k = lr.partition_point(|&v| v < ly).clamp(1, RHO_LATTICE - 1);
            let (a, b) = (lr[k - 1], lr[k]);
            (ls[k - 1] + (ls[k] - ls[k - 1]) * (ly - a) / (b - a)).exp()
        };
        // geometric in R so small heights stay resolved; radii[0] = 0
        let radii: Vec<f64> = std::iter::once(0.0)
            .chain((0..G_LATTICE - 1).map(|k| r_max * G_SPAN.powf(1.0 - k as f64 / (G_LATTICE - 2) as f64)))
            .collect();
        let g: Vec<f64> = radii.iter().map(|&r| inv(f0 * r / n)).collect();
        let mut heights = vec![0.0; G_LATTICE];
        let a = (g[2] / g[1]).ln() / (radii[2] / radii[1]).ln();
        heights[1] = g[1] * radii[1] / (a + 1.0);
        for k in 2..G_LATTICE {
            heights[k] = heights[k - 1] + power_cell(radii[k - 1], radii[k], g[k - 1], g[k]);
        }
        if *heights.last().unwrap() >= m {
            return Ok(ThetaBound { m, radii, heights });
        }
        r_max *= 2.0;
    }
    Err(Error::Hypothesis("Θ_M lattice did not reach M".into()))
}

/// Result of the maximal-height scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalHeight {
    pub h0: f64,
    /// All roots of `Ψ₁(h) = R₀` found, ascending.
    pub roots: Vec<f64>,
    /// Upper end of the scanned lattice.
    pub cap: f64,
    pub lattice_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Shot step as a fraction of `R₀` during the scan.
    pub scan_steps: f64,
    /// Relative height tolerance of the root bisection.
    pub root_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { scan_steps: STEPS_PER_RADIUS, root_tol: 1e-11 }
    }
}

/// `true` when the shot from `h` is still positive at `R₀`.
fn reaches(op: &OperatorSpec, src: &SourceSpec, h: f64, r0: f64, step: f64) -> Result<bool> {
    let shot = integrate_to(op, src, h, step, r0)?;
    Ok(match shot.terminal {
        None => true,
        Some(rt) => rt >= r0,
    })
}

fn bisect_root(op: &OperatorSpec, src: &SourceSpec, lo: f64, hi: f64, r0: f64, step: f64, tol: f64) -> Result<f64> {
    // invariant: reaches(lo) != reaches(hi)
    let lo_state = reaches(op, src, lo, r0, step)?;
    let (mut a, mut b) = (lo, hi);
    while b - a > tol * b {
        let mid = 0.5 * (a + b);
        if reaches(op, src, mid, r0, step)? == lo_state {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Upper end of the height scan: the sup estimate for solutions on the ball.
pub fn height_cap(op: &OperatorSpec, src: &SourceSpec, r0: f64) -> Result<f64> {
    let measure = unit_ball_volume(op.dim) * r0.powi(op.dim as i32);
    bounds::sup3(op, src, measure)
}

/// Largest `h` with `Ψ₁(h) = R₀`, scanning a geometric lattice up to the cap.
pub fn maximal_height(op: &OperatorSpec, src: &SourceSpec, r0: f64) -> Result<MaximalHeight> {
    maximal_height_with(op, src, r0, ScanOptions::default())
}

pub fn maximal_height_with(op: &OperatorSpec, src: &SourceSpec, r0: f64, opts: ScanOptions) -> Result<MaximalHeight> {
    op.validate()?;
    src.validate()?;
    if !(r0 > 0.0) {
        return invalid("radius must be positive");
    }
    if !(src.f0() > 0.0) {
        return Err(Error::Hypothesis("maximal_height needs f(0) > 0".into()));
    }
    let cap = height_cap(op, src, r0).map_err(|e| Error::NoSolution(e.to_string()))?;
    let theta = theta_bound(op, src, cap)?;
    // Θ_M(h) < R₀ below G(R₀), so no root lies there
    let mut lo = 0.5 * theta.g(r0).min(cap);
    let step = r0 / opts.scan_steps;
    let mut guard = 0;
    while lo > 0.0 && reaches(op, src, lo, r0, step)? {
        lo *= 0.1;
        guard += 1;
        if guard > 12 {
            return Err(Error::Solver("no height below the root could be found".into()));
        }
    }
    if lo <= 0.0 {
        lo = cap * 1e-12;
    }
    let decades = (cap / lo).log10().max(1.0 / POINTS_PER_DECADE as f64);
    let count = (decades * POINTS_PER_DECADE as f64).ceil() as usize + 1;
    let lattice: Vec<f64> = (0..count)
        .map(|k| lo * (cap / lo).powf(k as f64 / (count - 1) as f64))
        .collect();
    let signs: Vec<bool> = lattice
        .par_iter()
        .map(|&h| reaches(op, src, h, r0, step))
        .collect::<Result<_>>()?;
    let brackets: Vec<(f64, f64)> = (1..count)
        .filter(|&k| signs[k] != signs[k - 1])
        .map(|k| (lattice[k - 1], lattice[k]))
        .collect();
    if brackets.is_empty() {
        return Err(Error::NoSolution(format!(
            "Ψ₁(h) - R₀ has no sign change for h in [{lo:.3e}, {cap:.3e}]"
        )));
    }
    let mut roots: Vec<f64> = brackets
        .par_iter()
        .map(|&(a, b)| bisect_root(op, src, a, b, r0, step, opts.root_tol))
        .collect::<Result<_>>()?;
    roots.sort_by(f64::total_cmp);
    Ok(MaximalHeight { h0: *roots.last().unwrap(), roots, cap, lattice_points: count })
}

/// Maximal radial solution `U_B = Ψ₂(h₀)` on the ball of radius `R₀`.
pub fn maximal_solution(op: &OperatorSpec, src: &SourceSpec, r0: f64) -> Result<(MaximalHeight, RadialShot)> {
    let mh = maximal_height(op, src, r0)?;
    let shot = integrate_to(op, src, mh.h0, r0 / (4.0 * STEPS_PER_RADIUS), 2.0 * r0)?;
    Ok((mh, shot))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStatus {
    /// Heights tend to zero: only the trivial solution survives.
    Zero,
    Nontrivial,
    /// The shifted problems lose solvability, typically at an eigenvalue.
    Resonance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FZeroOutcome {
    pub status: LimitStatus,
    pub profile: RadialProfile,
    pub heights: Vec<f64>,
    pub note: Option<String>,
}

/// Maximal radial solution for `f(0) = 0` as the limit of shifted sources
/// `f(t + 2^{-k})`.
pub fn f_zero_maximal(op: &OperatorSpec, src: &SourceSpec, r0: f64) -> Result<FZeroOutcome> {
    op.validate()?;
    src.validate()?;
    if src.f0().abs() > 1e-14 {
        return Err(Error::Precondition(format!("f(0) must vanish, got {}", src.f0())));
    }
    let flags = src.flags(op.p(), 10.0);
    if !flags.nonnegative {
        return Err(Error::Precondition("f must be nonnegative".into()));
    }
    let zero = RadialProfile::zero(op.dim, r0)?;
    if (1..=400).all(|k| src.f(k as f64 * 0.05) == 0.0) {
        return Ok(FZeroOutcome { status: LimitStatus::Zero, profile: zero, heights: vec![], note: None });
    }
    let q = op.constants()?.q;
    let grid: Vec<f64> = (0..=512).map(|k| r0 * k as f64 / 512.0).collect();
    let sample = |p: &RadialProfile| -> Vec<f64> { grid.iter().map(|&r| p.eval(r).unwrap_or(0.0)).collect() };
    let mut heights = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut prev_h: Option<f64> = None;
    for k in 1..=40 {
        let tk = 0.5f64.powi(k);
        let opk = op.shifted(tk);
        let srck = shifted_with_growth(src, tk, q);
        let h = match top_down_root(&opk, &srck, r0, prev_h) {
            Ok(h) => h,
            Err(Error::NoSolution(msg)) => {
                return Ok(FZeroOutcome {
                    status: LimitStatus::Resonance,
                    profile: zero,
                    heights,
                    note: Some(format!("shifted problem k = {k} has no solution: {msg}")),
                })
            }
            Err(e) => return Err(e),
        };
        heights.push(h);
        let shot = integrate_to(&opk, &srck, h, r0 / STEPS_PER_RADIUS, 2.0 * r0)?;
        let cur = sample(&shot.profile);
        if let Some(p) = &prev {
            let diff = p.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if diff <= CAUCHY_TOL {
                let top = cur[0];
                if top <= 1e3 * CAUCHY_TOL {
                    return Ok(FZeroOutcome { status: LimitStatus::Zero, profile: zero, heights, note: None });
                }
                return Ok(FZeroOutcome { status: LimitStatus::Nontrivial, profile: shot.profile, heights, note: None });
            }
        }
        prev = Some(cur);
        prev_h = Some(h);
    }
    Err(Error::Solver("shifted-source limit did not converge within 40 shifts".into()))
}

/// `f(t + s)` with growth constants adjusted so that `f(t + s) <= α' t^{q-1} + β'`.
pub fn shifted_with_growth(src: &SourceSpec, s: f64, q: f64) -> SourceSpec {
    let mut out = src.shifted(s);
    if q <= 2.0 {
        // (t + s)^{q-1} <= t^{q-1} + s^{q-1}
        out.beta = src.beta + src.alpha * s.powf(q - 1.0);
    } else {
        // convexity with weight θ: (t+s)^{q-1} <= (1-θ)^{2-q} t^{q-1} + θ^{2-q} s^{q-1}
        let theta = 1.0 - (1.0 + 1e-3f64).powf(1.0 / (2.0 - q));
        out.alpha = src.alpha * (1.0 - theta).powf(2.0 - q);
        out.beta = src.beta + src.alpha * theta.powf(2.0 - q) * s.powf(q - 1.0);
    }
    out
}

/// Largest root found by descending from a height known to overshoot.
fn top_down_root(op: &OperatorSpec, src: &SourceSpec, r0: f64, hint: Option<f64>) -> Result<f64> {
    let step = r0 / STEPS_PER_RADIUS;
    let tol = ScanOptions::default().root_tol;
    if let Some(h) = hint {
        let top = 2.0 * h;
        if reaches(op, src, top, r0, step)? {
            let ratio = 10f64.powf(-1.0 / POINTS_PER_DECADE as f64);
            let mut hi = top;
            for _ in 0..(12 * POINTS_PER_DECADE) {
                let lo = hi * ratio;
                if !reaches(op, src, lo, r0, step)? {
                    return bisect_root(op, src, lo, hi, r0, step, tol);
                }
                hi = lo;
            }
        }
    }
    Ok(maximal_height(op, src, r0)?.h0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{Family, SourceFn, Weight};

    fn torsion() -> (OperatorSpec, SourceSpec) {
        (OperatorSpec::p_laplacian(2, 2.0), SourceSpec::constant(1.0))
    }

    #[test]
    fn torsion_shot_matches_closed_form() {
        let (op, src) = torsion();
        let shot = integrate(&op, &src, 0.25, 1e-4).unwrap();
        let rh = shot.terminal.unwrap();
        assert!((rh - 1.0).abs() < 1e-9, "{rh}");
        let p = &shot.profile;
        let err = p
            .radii()
            .iter()
            .zip(p.values())
            .map(|(r, w)| (w - (1.0 - r * r) / 4.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(shot.flux_residual < 1e-6);
    }

    #[test]
    fn p3_constant_source_closed_form() {
        // w(r) = h - (2/3)(1/2)^{1/2} r^{3/2}
        let op = OperatorSpec::p_laplacian(2, 3.0);
        let src = SourceSpec::constant(1.0);
        let h = 0.7;
        let shot = integrate(&op, &src, h, 1e-4).unwrap();
        let c = 2.0 / 3.0 * 0.5f64.sqrt();
        let rh = (h / c).powf(2.0 / 3.0);
        assert!((shot.terminal.unwrap() - rh).abs() < 1e-6 * rh);
        for (r, w) in shot.profile.radii().iter().zip(shot.profile.values()) {
            assert!((w - (h - c * r.powf(1.5))).abs() < 1e-7);
        }
    }

    #[test]
    fn psi1_torsion_and_limits() {
        let (op, src) = torsion();
        for &h in &[1e-4, 0.01, 0.3, 2.0] {
            let r = psi1(&op, &src, h).unwrap();
            assert!((r - 2.0 * h.sqrt()).abs() < 1e-8 * r.max(1.0), "{h} {r}");
        }
        assert_eq!(psi2(&op, &src, 0.3).unwrap().max(), 0.3);
        let small: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|&h| psi1(&op, &src, h).unwrap()).collect();
        assert!(small[0] > small[1] && small[1] > small[2]);
        assert!(integrate(&op, &src, 0.0, 0.1).is_err());
    }

    #[test]
    fn r_upper_bound_examples() {
        let (op, src) = torsion();
        assert!((r_upper_bound(&op, &src, 1.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((r_upper_bound(&op, &src, 1e-14).unwrap() - 2.0).abs() < 1e-6);
        let r1 = r_upper_bound(&op, &src, 0.0).unwrap();
        let r2 = r_upper_bound(&op, &SourceSpec::constant(2.0), 0.0).unwrap();
        assert!((r1 - 2.0 * r2).abs() < 1e-14);
        assert!(r_upper_bound(&op, &SourceSpec::constant(0.0), 1.0).is_err());
    }

    #[test]
    fn theta_torsion_is_exact() {
        let (op, src) = torsion();
        let th = theta_bound(&op, &src, 4.0).unwrap();
        assert_eq!(th.eval(0.0), 0.0);
        for &h in &[0.01, 0.25, 1.0, 3.9] {
            assert!((th.eval(h) - 2.0 * h.sqrt()).abs() < 1e-6, "{h}");
        }
    }

    #[test]
    fn flux_residual_trivial_case() {
        let op = OperatorSpec::p_laplacian(2, 2.0);
        let shot = integrate_to(&op, &SourceSpec::constant(0.0), 1.0, 0.01, 0.5).unwrap();
        assert!(shot.terminal.is_none());
        assert!(shot.flux_residual < 1e-12);
        assert!(shot.profile.values().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn maximal_height_torsion() {
        let (op, src) = torsion();
        for &r0 in &[0.5, 1.0] {
            let mh = maximal_height(&op, &src, r0).unwrap();
            assert_eq!(mh.roots.len(), 1);
            assert!((mh.h0 - r0 * r0 / 4.0).abs() < 1e-8, "{mh:?}");
        }
    }

    /// Series for J₀.
    fn bessel_j0(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -(x * x / 4.0) / (k as f64 * k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn maximal_height_affine_source_bessel() {
        // w'' + w'/r = -(1 + w): w = J₀(r)/J₀(1) - 1
        let op = OperatorSpec::p_laplacian(2, 2.0);
        let src = SourceSpec::new(SourceFn::affine(1.0, 1.0), 1.0, 1.0);
        let (mh, shot) = maximal_solution(&op, &src, 1.0).unwrap();
        let h0 = 1.0 / bessel_j0(1.0) - 1.0;
        assert!((mh.h0 - h0).abs() < 1e-8, "{} vs {h0}", mh.h0);
        for (r, w) in shot.profile.radii().iter().zip(shot.profile.values()) {
            assert!((w - (bessel_j0(*r) / bessel_j0(1.0) - 1.0)).abs() < 1e-4);
        }
    }

    #[test]
    fn f_zero_limits() {
        let op = OperatorSpec::p_laplacian(2, 2.0);
        let none = f_zero_maximal(&op, &SourceSpec::constant(0.0), 1.0).unwrap();
        assert_eq!(none.status, LimitStatus::Zero);
        // c t with c below the first eigenvalue of the unit disk
        let sub = SourceSpec::new(SourceFn::power(3.0, 1.0), 3.0, 0.0);
        let out = f_zero_maximal(&op, &sub, 1.0).unwrap();
        assert_eq!(out.status, LimitStatus::Zero, "{out:?}");
        // above it the shifted problems are unsolvable
        let res = SourceSpec::new(SourceFn::power(1.0, 1.0), 1.0, 0.0);
        let out = f_zero_maximal(&op, &res, 3.0).unwrap();
        assert_eq!(out.status, LimitStatus::Resonance);
        // sublinear growth gives a nontrivial limit
        let sq = SourceSpec::new(SourceFn::power(1.0, 0.5), 0.0, 1.0);
        let out = f_zero_maximal(&op, &sq, 1.0).unwrap();
        assert_eq!(out.status, LimitStatus::Nontrivial);
        assert!(out.profile.max() > 0.01);
    }

    #[test]
    fn weighted_family_shot_terminates_within_bounds() {
        let op = OperatorSpec::new(2, Family::WeightedPower { p: 2.0, weight: Weight::Saturating { c0: 1.0, c1: 1.0 } });
        let src = SourceSpec::constant(1.0);
        for &h in &[0.1, 1.0, 5.0] {
            let r = psi1(&op, &src, h).unwrap();
            assert!(r <= r_upper_bound(&op, &src, h).unwrap());
            assert!(r <= theta_bound(&op, &src, 5.0).unwrap().eval(h) * (1.0 + 1e-6));
        }
    }
}
