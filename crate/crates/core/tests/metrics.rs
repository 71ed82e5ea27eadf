use hopcpt_core::data::PredictionInterval;
use hopcpt_core::metrics::{delta_cov, evaluate, local_coverage, winkler_score, WindowMode};
use proptest::prelude::*;

fn pi(l: f64, u: f64) -> PredictionInterval {
    PredictionInterval::new(l, u, 0.5).unwrap()
}

/// Six hand-scored steps at alpha = 0.5 (penalty factor 2/alpha = 4):
///
/// | step | interval | y   | covered | width | winkler       |
/// |------|----------|-----|---------|-------|---------------|
/// | 1    | [0, 2]   | 1   | yes     | 2     | 2             |
/// | 2    | [0, 2]   | 3   | no      | 2     | 2 + 4*1 = 6   |
/// | 3    | [1, 2]   | 0.5 | no      | 1     | 1 + 4*0.5 = 3 |
/// | 4    | [-1, 1]  | 1   | yes     | 2     | 2             |
/// | 5    | [0, 0]   | 0   | yes     | 0     | 0             |
/// | 6    | [0, 4]   | 5   | no      | 4     | 4 + 4*1 = 8   |
///
/// Miss rate 3/6 so delta_cov = 0. Mean width 11/6, mean Winkler 21/6,
/// mean |y| = 10.5/6. Disjoint windows of 3: gaps 0.5 - 2/3 and 0.5 - 1/3,
/// clamped to -1/6 and 0, giving 1/12. Windows of 2 each hold one miss: 0.
fn fixture() -> (Vec<PredictionInterval>, Vec<f64>) {
    (
        vec![pi(0.0, 2.0), pi(0.0, 2.0), pi(1.0, 2.0), pi(-1.0, 1.0), pi(0.0, 0.0), pi(0.0, 4.0)],
        vec![1.0, 3.0, 0.5, 1.0, 0.0, 5.0],
    )
}

#[test]
fn six_step_fixture() {
    let (ints, y) = fixture();
    let r = evaluate(&ints, &y, 0.5, &[2, 3, 10], WindowMode::Disjoint).unwrap();
    assert!((r.delta_cov - 0.0).abs() <= 1e-12);
    assert!((r.mean_pi_width - 11.0 / 6.0).abs() <= 1e-12);
    assert!((r.mean_winkler - 3.5).abs() <= 1e-12);
    assert!((r.normalized_winkler() - 2.0).abs() <= 1e-12);
    assert!((r.local_coverage[&3] - 1.0 / 12.0).abs() <= 1e-12);
    assert!((r.local_coverage[&2] - 0.0).abs() <= 1e-12);
    assert!(!r.local_coverage.contains_key(&10));
    assert_eq!(r.n_test, 6);
    // Rolling windows of 3: gaps -1/6, -1/6, +1/6, +1/6.
    let rolling = local_coverage(&ints, &y, 0.5, 3, WindowMode::Rolling).unwrap();
    assert!((rolling - 1.0 / 12.0).abs() <= 1e-12);
}

#[test]
fn local_coverage_depends_on_miss_placement() {
    let ints = vec![pi(0.0, 1.0); 20];
    let clustered: Vec<f64> = (0..20).map(|i| if i < 4 { 5.0 } else { 0.5 }).collect();
    let spread: Vec<f64> = (0..20).map(|i| if i % 5 == 0 { 5.0 } else { 0.5 }).collect();
    let a = local_coverage(&ints, &clustered, 0.1, 10, WindowMode::Disjoint).unwrap();
    let b = local_coverage(&ints, &spread, 0.1, 10, WindowMode::Disjoint).unwrap();
    assert!(a > b);
    // Same marginal coverage either way.
    assert_eq!(delta_cov(&ints, &clustered, 0.1).unwrap(), delta_cov(&ints, &spread, 0.1).unwrap());

    // Moving a whole failing window elsewhere changes nothing.
    let mut shifted = vec![0.5; 20];
    shifted[10..14].fill(5.0);
    assert_eq!(local_coverage(&ints, &shifted, 0.1, 10, WindowMode::Disjoint).unwrap(), a);
}

fn interval_and_target() -> impl Strategy<Value = (f64, f64, f64)> {
    (-10.0f64..10.0, 0.0f64..5.0, -20.0f64..20.0).prop_map(|(l, w, y)| (l, l + w, y))
}

proptest! {
    #[test]
    fn winkler_dominates_width(cases in prop::collection::vec(interval_and_target(), 1..50), alpha in 0.01f64..0.99) {
        for (l, u, y) in &cases {
            let p = PredictionInterval::new(*l, *u, alpha).unwrap();
            let s = winkler_score(&p, *y, alpha);
            prop_assert!(s >= p.width());
            prop_assert_eq!(s == p.width(), p.covers(*y));
        }
        let ints: Vec<_> = cases.iter().map(|(l, u, _)| PredictionInterval::new(*l, *u, alpha).unwrap()).collect();
        let ys: Vec<_> = cases.iter().map(|c| c.2).collect();
        let d = delta_cov(&ints, &ys, alpha).unwrap();
        prop_assert!(d >= alpha - 1.0 - 1e-15 && d <= alpha);
    }

    #[test]
    fn added_misses_never_improve_local_coverage(
        covered in prop::collection::vec(any::<bool>(), 10..80),
        flip in any::<prop::sample::Index>(),
        k in 1usize..10,
    ) {
        let ints = vec![PredictionInterval::new(0.0, 1.0, 0.1).unwrap(); covered.len()];
        let ys: Vec<f64> = covered.iter().map(|c| if *c { 0.5 } else { 2.0 }).collect();
        let mut worse = ys.clone();
        worse[flip.index(ys.len())] = 2.0;
        for mode in [WindowMode::Disjoint, WindowMode::Rolling] {
            let a = local_coverage(&ints, &ys, 0.1, k, mode).unwrap();
            let b = local_coverage(&ints, &worse, 0.1, k, mode).unwrap();
            prop_assert!(b >= a);
            prop_assert!(a >= 0.0);
        }
    }
}
