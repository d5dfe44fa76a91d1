use proptest::prelude::*;
use symrad::compare::radial_comparison_check;
use symrad::radial;
use symrad::{OperatorSpec, SourceSpec};

/// `-Δ_p w = 1` on the ball of radius `R` in `ℝⁿ`:
/// `w(r) = (p-1)/p · n^{-1/(p-1)} (R^{p'} - r^{p'})`, `p' = p/(p-1)`.
fn p_torsion(n: usize, p: f64, big_r: f64, r: f64) -> f64 {
    let pp = p / (p - 1.0);
    (p - 1.0) / p * (n as f64).powf(-1.0 / (p - 1.0)) * (big_r.powf(pp) - r.powf(pp))
}

fn p_torsion_radius(n: usize, p: f64, h: f64) -> f64 {
    let pp = p / (p - 1.0);
    (h * p / (p - 1.0) * (n as f64).powf(1.0 / (p - 1.0))).powf(1.0 / pp)
}

#[test]
fn p_torsion_shots_match_closed_form() {
    for n in 1..=3 {
        for p in [1.5, 2.0, 2.5, 3.0, 4.0] {
            for h in [0.05, 0.3, 2.0] {
                let op = OperatorSpec::p_laplacian(n, p);
                let shot = radial::integrate(&op, &SourceSpec::constant(1.0), h, 1e-4).unwrap();
                let big_r = p_torsion_radius(n, p, h);
                let rh = shot.terminal.unwrap();
                assert!((rh - big_r).abs() <= 1e-6 * big_r, "n={n} p={p} h={h}: {rh} vs {big_r}");
                let prof = &shot.profile;
                let err = prof
                    .radii()
                    .iter()
                    .zip(prof.values())
                    .map(|(&r, &w)| (w - p_torsion(n, p, big_r, r.min(big_r))).abs())
                    .fold(0.0, f64::max);
                assert!(err <= 1e-6 * h, "n={n} p={p} h={h}: {err}");
            }
        }
    }
}

#[test]
fn psi1_is_increasing_for_torsion() {
    let op = OperatorSpec::p_laplacian(2, 2.5);
    let src = SourceSpec::constant(1.0);
    let hs: Vec<f64> = (0..24).map(|k| 1e-2 * 1.4f64.powi(k)).collect();
    let radii: Vec<f64> = hs.iter().map(|&h| radial::psi1(&op, &src, h).unwrap()).collect();
    assert!(radii.windows(2).all(|w| w[1] > w[0]));
    for (&h, &r) in hs.iter().zip(&radii) {
        assert!(r <= radial::r_upper_bound(&op, &src, h).unwrap() * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn taller_radial_solutions_dominate(p in prop::sample::select(vec![2.0, 2.5, 3.0]), h2 in 0.05f64..1.0, gap in 1.05f64..3.0, slope in 0.0f64..0.5) {
        let op = OperatorSpec::p_laplacian(2, p);
        let src = SourceSpec::new(symrad::SourceFn::affine(1.0, slope), slope, 1.0);
        let u1 = radial::integrate(&op, &src, h2 * gap, 1e-4).unwrap();
        let u2 = radial::integrate(&op, &src, h2, 1e-4).unwrap();
        prop_assume!(u1.terminal.is_some() && u2.terminal.is_some());
        prop_assume!(u1.profile.radius() > u2.profile.radius());
        prop_assert!(radial_comparison_check(&u1.profile, &u2.profile, &op, 1e-6).unwrap());
    }
}
