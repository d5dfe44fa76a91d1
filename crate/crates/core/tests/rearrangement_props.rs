use proptest::prelude::*;
use symrad::rearrange::{self, DecreasingRearrangement};
use symrad::{Fixture, ScalarField};

fn field(fixture: Fixture, seed: &[f64]) -> ScalarField {
    let mask = fixture.mask(1.0 / 16.0).unwrap();
    let mut k = 0;
    let values = (0..mask.nx() * mask.ny())
        .map(|i| {
            if mask.is_masked(i) {
                k += 1;
                seed[k % seed.len()]
            } else {
                0.0
            }
        })
        .collect();
    mask.with_values(values).unwrap()
}

fn fixtures() -> impl Strategy<Value = Fixture> {
    prop::sample::select(Fixture::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    #[test]
    fn sorting_is_equimeasurable(fx in fixtures(), seed in prop::collection::vec(0.0f64..5.0, 7..97)) {
        let u = field(fx, &seed);
        for g in [|s: f64| s, |s: f64| s * s, |s: f64| (s - 1.0).abs()] {
            let a = u.integral(g);
            let b = rearrange::rearranged_integral(&u, g);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let r = DecreasingRearrangement::of(&u).unwrap();
        prop_assert!(r.sorted().windows(2).all(|w| w[1] <= w[0]));
        prop_assert!((r.measure() - u.measure()).abs() < 1e-12);
    }

    #[test]
    fn distribution_is_monotone_and_order_preserving(fx in fixtures(), seed in prop::collection::vec(0.0f64..5.0, 7..97), bump in prop::collection::vec(0.0f64..1.0, 5..31)) {
        let u = field(fx, &seed);
        let w = field(fx, &bump);
        let sum = u.with_values(u.values().iter().zip(w.values()).map(|(a, b)| a + b).collect()).unwrap();
        let levels = rearrange::level_lattice(sum.max_value(), 129);
        let mu_u = rearrange::distribution(&u, &levels).unwrap();
        let mu_s = rearrange::distribution(&sum, &levels).unwrap();
        prop_assert!(mu_u.is_nonincreasing() && mu_s.is_nonincreasing());
        prop_assert!(mu_u.measures.iter().zip(&mu_s.measures).all(|(a, b)| a <= b));
    }

    #[test]
    fn schwarz_keeps_max_and_measure(fx in fixtures(), seed in prop::collection::vec(0.0f64..5.0, 7..97)) {
        let u = field(fx, &seed);
        let s = rearrange::schwarz(&u).unwrap();
        prop_assert!((s.max() - u.max_value()).abs() < 1e-12);
        prop_assert!((s.ball_measure() - u.measure()).abs() < 1e-9);
        prop_assert!(s.values().windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn randomized_fields_satisfy_polya_szego() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for fx in Fixture::ALL {
        let mask = fx.mask(1.0 / 64.0).unwrap();
        let u = symrad::suite::random_field(&mask, &mut rng).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let ps = rearrange::polya_szego_check(&u, p).unwrap();
            assert!(ps.holds, "{} p={p}: {} > {}", fx.name(), ps.rhs, ps.lhs);
        }
    }
}
