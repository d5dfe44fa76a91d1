//! Sampled radial profiles and distribution curves.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::ScalarField;

/// Volume of the unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Radius of the ball of the given volume in dimension `n`.
pub fn ball_radius(n: usize, volume: f64) -> f64 {
    (volume / unit_ball_volume(n)).powf(1.0 / n as f64)
}

/// Nonincreasing function `w(r)` sampled on `0 = r_0 < ... < r_K = R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    dim: usize,
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialProfile {
    /// Builds a profile; values must be nonincreasing up to `1e-12` relative
    /// round-off, which is clamped away.
    pub fn new(dim: usize, radii: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be at least 1");
        }
        if radii.len() < 2 || radii.len() != values.len() {
            return invalid("profile needs at least two samples and matching lengths");
        }
        if radii[0] != 0.0 {
            return invalid("profile must start at r = 0");
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("radii must be strictly increasing");
        }
        let scale = values.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
        for k in 1..values.len() {
            if values[k] > values[k - 1] {
                if values[k] - values[k - 1] > 1e-12 * scale {
                    return invalid(format!(
                        "profile increases at r = {}: {} -> {}",
                        radii[k],
                        values[k - 1],
                        values[k]
                    ));
                }
                values[k] = values[k - 1];
            }
        }
        Ok(Self { dim, radii, values })
    }

    /// The zero profile on `[0, radius]`.
    pub fn zero(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, vec![0.0, radius], vec![0.0, 0.0])
    }

    /// Samples `w` on `k + 1` uniform radii.
    pub fn from_fn(dim: usize, radius: f64, k: usize, w: impl Fn(f64) -> f64) -> Result<Self> {
        let radii: Vec<f64> = (0..=k).map(|i| radius * i as f64 / k as f64).collect();
        let values = radii.iter().map(|&r| w(r)).collect();
        Self::new(dim, radii, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }
    pub fn max(&self) -> f64 {
        self.values[0]
    }
    pub fn min(&self) -> f64 {
        *self.values.last().unwrap()
    }
    pub fn ball_measure(&self) -> f64 {
        unit_ball_volume(self.dim) * self.radius().powi(self.dim as i32)
    }

    /// Linear interpolation; `None` beyond the outer radius.
    pub fn eval(&self, r: f64) -> Option<f64> {
        let r = r.abs();
        if r > self.radius() {
            return None;
        }
        let k = self.radii.partition_point(|&x| x <= r);
        if k >= self.radii.len() {
            return Some(self.min());
        }
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let (w0, w1) = (self.values[k - 1], self.values[k]);
        Some(w0 + (w1 - w0) * (r - r0) / (r1 - r0))
    }

    /// `sup { r : w(r) > t }` for the linear interpolant, 0 when `t >= max`.
    pub fn level_radius(&self, t: f64) -> f64 {
        if t >= self.values[0] {
            return 0.0;
        }
        // first sample with w <= t
        let k = self.values.partition_point(|&w| w > t);
        if k >= self.values.len() {
            return self.radius();
        }
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let (w0, w1) = (self.values[k - 1], self.values[k]);
        if w0 == w1 {
            return r1;
        }
        r0 + (r1 - r0) * (w0 - t) / (w0 - w1)
    }

    /// Measure of `{ w(|x|) > t }`.
    pub fn measure_above(&self, t: f64) -> f64 {
        unit_ball_volume(self.dim) * self.level_radius(t).powi(self.dim as i32)
    }

    /// `∫_{B_R} g(w(|x|)) dx` by Gauss–Legendre on each sample interval.
    pub fn integral(&self, g: impl Fn(f64) -> f64) -> f64 {
        let n = self.dim as i32;
        let area = self.dim as f64 * unit_ball_volume(self.dim);
        let mut s = 0.0;
        for k in 1..self.radii.len() {
            let (r0, r1) = (self.radii[k - 1], self.radii[k]);
            let (w0, w1) = (self.values[k - 1], self.values[k]);
            let h = r1 - r0;
            for (x, wt) in GL4 {
                let t = 0.5 * (x + 1.0);
                let r = r0 + h * t;
                let w = w0 + (w1 - w0) * t;
                s += 0.5 * wt * h * g(w) * r.powi(n - 1);
            }
        }
        area * s
    }

    /// `∫_{B_R} |∇ w(|x|)|^p dx` for the piecewise-linear interpolant.
    pub fn gradient_energy(&self, p: f64) -> f64 {
        let area = self.dim as f64 * unit_ball_volume(self.dim);
        let n = self.dim as f64;
        let mut s = 0.0;
        for k in 1..self.radii.len() {
            let (r0, r1) = (self.radii[k - 1], self.radii[k]);
            let slope = (self.values[k - 1] - self.values[k]) / (r1 - r0);
            s += slope.abs().powf(p) * (r1.powf(n) - r0.powf(n)) / n;
        }
        area * s
    }

    /// The profile restricted to `{ t1 < w < t2 }`, energy only.
    pub fn gradient_energy_between(&self, p: f64, t1: f64, t2: f64) -> f64 {
        let area = self.dim as f64 * unit_ball_volume(self.dim);
        let n = self.dim as f64;
        let mut s = 0.0;
        for k in 1..self.radii.len() {
            let (r0, r1) = (self.radii[k - 1], self.radii[k]);
            let (w0, w1) = (self.values[k - 1], self.values[k]);
            if w0 == w1 {
                continue;
            }
            // sub-interval where t1 < w < t2, w linear decreasing
            let ra = if w0 > t2 { r0 + (r1 - r0) * (w0 - t2) / (w0 - w1) } else { r0 };
            let rb = if w1 < t1 { r0 + (r1 - r0) * (w0 - t1) / (w0 - w1) } else { r1 };
            if rb <= ra {
                continue;
            }
            let slope = (w0 - w1) / (r1 - r0);
            s += slope.powf(p) * (rb.powf(n) - ra.powf(n)) / n;
        }
        area * s
    }

    /// Rasterizes `w(|x - c|)` on a grid: masked cells get the profile value,
    /// zero outside radius `R`.
    pub fn sample_on(&self, grid: &ScalarField, c: [f64; 2]) -> Result<ScalarField> {
        grid.from_fn(|x, y| self.eval((x - c[0]).hypot(y - c[1])).unwrap_or(0.0))
    }

    /// CSV `r,w`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,w\n");
        for (r, w) in self.radii.iter().zip(&self.values) {
            s.push_str(&format!("{r:.12e},{w:.12e}\n"));
        }
        s
    }
}

/// 4-point Gauss–Legendre nodes and weights on [-1, 1].
pub(crate) const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Nonincreasing step function `t ↦ μ(t)`: `μ(t) = m_i` on `[t_i, t_{i+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionCurve {
    pub levels: Vec<f64>,
    pub measures: Vec<f64>,
}

impl DistributionCurve {
    pub fn len(&self) -> usize {
        self.levels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
    pub fn is_nonincreasing(&self) -> bool {
        self.measures.windows(2).all(|w| w[1] <= w[0])
    }
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mu\n");
        for (t, m) in self.levels.iter().zip(&self.measures) {
            s.push_str(&format!("{t:.12e},{m:.12e}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((ball_radius(2, PI) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cone_quantities() {
        let w = RadialProfile::from_fn(2, 1.0, 200, |r| 1.0 - r).unwrap();
        assert!((w.level_radius(0.5) - 0.5).abs() < 1e-12);
        assert!((w.measure_above(0.5) - PI / 4.0).abs() < 1e-12);
        assert!((w.integral(|v| v) - PI / 3.0).abs() < 1e-10);
        assert!((w.gradient_energy(2.0) - PI).abs() < 1e-12);
        assert!((w.gradient_energy_between(2.0, 0.25, 0.75) - PI * (0.75f64.powi(2) - 0.25f64.powi(2))).abs() < 1e-12);
        assert_eq!(w.level_radius(1.0), 0.0);
        assert_eq!(w.eval(1.5), None);
    }

    #[test]
    fn rejects_increasing() {
        assert!(RadialProfile::new(2, vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(RadialProfile::new(2, vec![0.1, 1.0], vec![1.0, 0.0]).is_err());
    }
}
