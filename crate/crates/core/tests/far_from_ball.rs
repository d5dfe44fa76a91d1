use symrad::compare::{eigen_far_from_ball_check, ChainStatus};
use symrad::{Fixture, SourceFn, SourceSpec};

/// `f(t) = min(√t, 1)`: `f(0) = 0`, `f(t) <= 4t + 1/16`.
fn source() -> SourceSpec {
    SourceSpec::new(SourceFn::clamped(SourceFn::power(1.0, 0.5), 1.0), 4.0, 1.0 / 16.0)
}

#[test]
fn thin_rectangles_decay_below_the_paraboloid() {
    let mut sups = Vec::new();
    for fx in [Fixture::Disk, Fixture::Rect4, Fixture::Rect8, Fixture::Rect16] {
        let v = eigen_far_from_ball_check(&fx.mask(1.0 / 64.0).unwrap(), 2.0, 4.0, 1.0 / 16.0, &source()).unwrap();
        assert_ne!(v.status, ChainStatus::Violated, "{}", fx.name());
        assert!(v.sup_within_bound, "{}: {} > {}", fx.name(), v.sup_u, v.sup_bound);
        if fx == Fixture::Rect16 {
            assert_eq!(v.status, ChainStatus::Holds);
        }
        sups.push((v.lambda, v.sup_u));
    }
    assert!(sups.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1), "{sups:?}");
}

#[test]
fn nonzero_source_at_origin_is_rejected() {
    let mask = Fixture::Square.mask(1.0 / 16.0).unwrap();
    assert!(eigen_far_from_ball_check(&mask, 2.0, 0.0, 1.0, &SourceSpec::constant(1.0)).is_err());
}
