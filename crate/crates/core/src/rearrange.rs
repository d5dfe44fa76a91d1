//! Distribution functions, decreasing rearrangements and Schwarz
//! symmetrization of gridded fields.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::ScalarField;
use crate::profile::{ball_radius, DistributionCurve, RadialProfile};

/// Masked values sorted in descending order, ties kept in cell order.
pub fn sorted_desc(field: &ScalarField) -> Vec<f64> {
    let mut v = field.masked_values();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `μ(t) = Δx² · #{cells : value > t}` for each level.
pub fn distribution(field: &ScalarField, levels: &[f64]) -> Result<DistributionCurve> {
    if field.masked_count() == 0 {
        return Err(Error::EmptyDomain);
    }
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return invalid("levels must be sorted ascending");
    }
    if levels.iter().any(|&t| !(t >= 0.0)) {
        return invalid("levels must be nonnegative");
    }
    let desc = sorted_desc(field);
    let cell = field.cell_area();
    let measures = levels
        .iter()
        .map(|&t| desc.partition_point(|&v| v > t) as f64 * cell)
        .collect();
    Ok(DistributionCurve { levels: levels.to_vec(), measures })
}

/// Uniform lattice of `count` levels on `[0, top]`.
pub fn level_lattice(top: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| top * k as f64 / (count - 1).max(1) as f64).collect()
}

/// Decreasing rearrangement `u*` on `[0, |Ω|]` as a step function.
#[derive(Debug, Clone, PartialEq)]
pub struct DecreasingRearrangement {
    cell: f64,
    sorted: Vec<f64>,
}

impl DecreasingRearrangement {
    pub fn of(field: &ScalarField) -> Result<Self> {
        if field.masked_count() == 0 {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { cell: field.cell_area(), sorted: sorted_desc(field) })
    }

    pub fn measure(&self) -> f64 {
        self.cell * self.sorted.len() as f64
    }

    /// `u*(s) = sorted[floor(s / cell)]`, with `u*(|Ω|)` the minimum.
    pub fn eval(&self, s: f64) -> f64 {
        let k = (s.max(0.0) / self.cell).floor() as usize;
        self.sorted[k.min(self.sorted.len() - 1)]
    }

    /// Continuous version: linear between cell-centre positions `(j + 1/2)·cell`.
    pub fn eval_smooth(&self, s: f64) -> f64 {
        let x = s / self.cell - 0.5;
        if x <= 0.0 {
            return self.sorted[0];
        }
        let j = x.floor() as usize;
        if j + 1 >= self.sorted.len() {
            return *self.sorted.last().unwrap();
        }
        let a = x - j as f64;
        self.sorted[j] * (1.0 - a) + self.sorted[j + 1] * a
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

/// `u*` sampled at `samples` uniform points of `[0, |Ω|]`: returns `(s, u*(s))`.
pub fn decreasing_rearrangement(field: &ScalarField, samples: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if samples < 2 {
        return invalid("need at least two samples");
    }
    let r = DecreasingRearrangement::of(field)?;
    let m = r.measure();
    let s: Vec<f64> = (0..samples).map(|k| m * k as f64 / (samples - 1) as f64).collect();
    let u = s.iter().map(|&x| r.eval(x)).collect();
    Ok((s, u))
}

/// Schwarz symmetrization `u♯(x) = u*(π|x|²)` on the ball of equal measure.
///
/// The profile is sampled on about two radii per cell width using the
/// continuous form of `u*`.
pub fn schwarz(field: &ScalarField) -> Result<RadialProfile> {
    let r = DecreasingRearrangement::of(field)?;
    let radius = ball_radius(2, r.measure());
    let k = ((2.0 * radius / field.dx()).ceil() as usize).max(16);
    let omega = std::f64::consts::PI;
    RadialProfile::from_fn(2, radius, k, |rad| r.eval_smooth(omega * rad * rad))
}

/// `∫ g(|v|) dx` by cell sum.
pub fn rearranged_integral(field: &ScalarField, g: impl Fn(f64) -> f64) -> f64 {
    field.integral(g)
}

/// `∫ g(|w|) dx` over the ball for a radial profile.
pub fn profile_integral(profile: &RadialProfile, g: impl Fn(f64) -> f64) -> f64 {
    profile.integral(|v| g(v.abs()))
}

/// `∫ |∇_h v|^p dx` with forward differences and zero extension outside the
/// mask, summed over every cell touching the mask.
pub fn grid_gradient_energy(field: &ScalarField, p: f64) -> f64 {
    grid_gradient_energy_where(field, p, |_| true)
}

fn grid_gradient_energy_where(field: &ScalarField, p: f64, keep: impl Fn(f64) -> bool) -> f64 {
    let (nx, ny) = (field.nx() as isize, field.ny() as isize);
    let dx = field.dx();
    let mut s = 0.0;
    for j in -1..ny {
        for i in -1..nx {
            let c = field.get(i, j);
            let gx = (field.get(i + 1, j) - c) / dx;
            let gy = (field.get(i, j + 1) - c) / dx;
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            if !keep(c) {
                continue;
            }
            s += (gx * gx + gy * gy).powf(0.5 * p);
        }
    }
    s * dx * dx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyaSzego {
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub holds: bool,
}

/// Relative tolerance per unit grid spacing for the Pólya–Szegő checks.
pub const POLYA_SZEGO_TOL_PER_DX: f64 = 3.0;

/// Compares `∫|∇u|^p` on the grid with `∫|∇u♯|^p` from the profile.
pub fn polya_szego_check(field: &ScalarField, p: f64) -> Result<PolyaSzego> {
    if !(p > 1.0) {
        return invalid(format!("p must exceed 1, got {p}"));
    }
    let lhs = grid_gradient_energy(field, p);
    let rhs = schwarz(field)?.gradient_energy(p);
    let tol = POLYA_SZEGO_TOL_PER_DX * field.dx() * lhs;
    Ok(PolyaSzego { lhs, rhs, tol, holds: rhs <= lhs + tol })
}

/// Restricted form over `{ t1 < u < t2 }`; the grid side keeps cells whose
/// own value lies in the band.
pub fn polya_szego_restricted(field: &ScalarField, p: f64, t1: f64, t2: f64) -> Result<PolyaSzego> {
    if !(p > 1.0) {
        return invalid(format!("p must exceed 1, got {p}"));
    }
    if !(t1 < t2) {
        return invalid("need t1 < t2");
    }
    let lhs = grid_gradient_energy_where(field, p, |v| v > t1 && v < t2);
    let rhs = schwarz(field)?.gradient_energy_between(p, t1, t2);
    let tol = POLYA_SZEGO_TOL_PER_DX * field.dx() * grid_gradient_energy(field, p);
    Ok(PolyaSzego { lhs, rhs, tol, holds: rhs <= lhs + tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use std::f64::consts::PI;

    fn cone(dx: f64) -> ScalarField {
        let d = Shape::unit_disk().rasterize(dx).unwrap();
        d.from_fn(|x, y| (1.0 - x.hypot(y)).max(0.0)).unwrap()
    }

    #[test]
    fn cone_distribution() {
        let dx = 1.0 / 128.0;
        let u = cone(dx);
        let mu = distribution(&u, &[0.5, 2.0]).unwrap();
        assert!((mu.measures[0] - PI * 0.25).abs() < 4.0 * dx);
        assert_eq!(mu.measures[1], 0.0);
    }

    #[test]
    fn checkerboard_distribution() {
        let n = 64;
        let dx = 1.0 / n as f64;
        let mask = vec![true; n * n];
        let values = (0..n * n).map(|k| ((k % n + k / n) % 2) as f64).collect();
        let f = ScalarField::new(dx, n, n, [0.0; 2], mask, values).unwrap();
        let mu = distribution(&f, &[0.5]).unwrap();
        // direct count oracle
        let count = f.values().iter().filter(|&&v| v > 0.5).count() as f64 * dx * dx;
        assert_eq!(mu.measures[0], count);
        assert!((mu.measures[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cone_rearrangement() {
        let dx = 1.0 / 128.0;
        let u = cone(dx);
        let (s, us) = decreasing_rearrangement(&u, 101).unwrap();
        assert_eq!(us[0], u.max_value());
        assert_eq!(*us.last().unwrap(), u.min_value());
        for (si, ui) in s.iter().zip(&us) {
            let exact = (1.0 - (si / PI).sqrt()).max(0.0);
            assert!((ui - exact).abs() < 2.0 * dx, "s={si} {ui} {exact}");
        }
        assert!(us.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn two_valued_rearrangement() {
        // ten cells of area 0.1: three at 2, seven at 1
        let mask = vec![true; 10];
        let values = vec![1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1.0];
        let f = ScalarField::new(0.1f64.sqrt(), 10, 1, [0.0; 2], mask, values).unwrap();
        let r = DecreasingRearrangement::of(&f).unwrap();
        assert_eq!(r.eval(0.0), 2.0);
        assert_eq!(r.eval(0.29), 2.0);
        assert_eq!(r.eval(0.31), 1.0);
        assert_eq!(r.eval(1.0), 1.0);
    }

    #[test]
    fn schwarz_of_radial_is_itself() {
        let dx = 1.0 / 128.0;
        let u = cone(dx);
        let w = schwarz(&u).unwrap();
        assert!((w.ball_measure() - u.measure()).abs() < 1e-12);
        for k in 0..=10 {
            let r = 0.95 * k as f64 / 10.0;
            assert!((w.eval(r).unwrap() - (1.0 - r)).abs() < 3.0 * dx);
        }
    }

    #[test]
    fn schwarz_of_indicator_is_ball_indicator() {
        let sq = Shape::square_with_area(PI).rasterize(1.0 / 64.0).unwrap();
        let ind = sq.from_fn(|x, _| if x < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let m = ind.integral(|v| v);
        let w = schwarz(&ind).unwrap();
        let r = w.level_radius(0.5);
        assert!((PI * r * r - m).abs() < 0.02 * m);
    }

    #[test]
    fn integrals() {
        let dx = 1.0 / 128.0;
        let u = cone(dx);
        assert!((rearranged_integral(&u, |v| v) - PI / 3.0).abs() < 3.0 * dx);
        assert_eq!(rearranged_integral(&u, |_| 1.0), u.measure());
        let c = u.map(|_| 0.7);
        assert!((rearranged_integral(&c, |v| v * v) - 0.49 * c.measure()).abs() < 1e-10);
        let w = schwarz(&u).unwrap();
        assert!((profile_integral(&w, |v| v) - rearranged_integral(&u, |v| v)).abs() < 2.0 * dx);
    }

    #[test]
    fn polya_szego_cone_and_bump() {
        let dx = 1.0 / 128.0;
        let ps = polya_szego_check(&cone(dx), 2.0).unwrap();
        assert!((ps.lhs - PI).abs() < 0.03 * PI, "{ps:?}");
        assert!((ps.rhs - PI).abs() < 0.03 * PI, "{ps:?}");

        let disk = Shape::unit_disk().rasterize(dx).unwrap();
        let bump = |x: f64, y: f64| {
            let r2 = x * x + y * y;
            if r2 < 1.0 { (1.0 - r2).powi(2) } else { 0.0 }
        };
        let b = disk.from_fn(bump).unwrap();
        let ps = polya_szego_check(&b, 2.0).unwrap();
        assert!((ps.rhs / ps.lhs - 1.0).abs() < 0.05, "{ps:?}");

        let sq = Shape::square_with_area(4.0).rasterize(dx).unwrap();
        let off = sq.from_fn(|x, y| bump(2.0 * (x - 0.3), 2.0 * (y + 0.2))).unwrap();
        let ps = polya_szego_check(&off, 2.0).unwrap();
        assert!(ps.holds && ps.rhs <= ps.lhs * 1.05, "{ps:?}");
        assert!(polya_szego_check(&off, 1.0).is_err());
    }

    #[test]
    fn restricted_polya_szego() {
        let dx = 1.0 / 128.0;
        let sq = Shape::square_with_area(PI).rasterize(dx).unwrap();
        let u = sq
            .from_fn(|x, y| {
                let a = (PI.sqrt() / 2.0).powi(2);
                (a - x * x) * (a - y * y)
            })
            .unwrap();
        let top = u.max_value();
        let ps = polya_szego_restricted(&u, 2.0, 0.2 * top, 0.8 * top).unwrap();
        assert!(ps.holds, "{ps:?}");
    }

    #[test]
    fn order_preservation_and_monotonicity() {
        let u = cone(1.0 / 32.0);
        let v = u.map(|x| x * 0.5 + 0.01 * x.sin());
        let levels = level_lattice(1.0, 64);
        let mu = distribution(&u, &levels).unwrap();
        let mv = distribution(&v, &levels).unwrap();
        assert!(mu.is_nonincreasing() && mv.is_nonincreasing());
        for (a, b) in mv.measures.iter().zip(&mu.measures) {
            assert!(a <= b);
        }
    }

    #[test]
    fn errors() {
        let u = cone(0.1);
        assert!(distribution(&u, &[0.5, 0.1]).is_err());
        assert!(distribution(&u, &[-0.5]).is_err());
        assert!(decreasing_rearrangement(&u, 1).is_err());
    }
}
