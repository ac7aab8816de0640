use bellkit_core::finite_sample::{datasets_behavior, population_chsh, preset_s1, preset_s2, row_chsh, Spreadsheet4N};
use bellkit_core::{
    lf_counterexample, max_s_disconnected, spreadsheet_experiment, urn_protocol, BigRational, Context, Omega, Outcome,
};
use num_rational::Rational64;
use proptest::prelude::*;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[test]
fn row_identity_over_all_patterns() {
    let mut seen = 0;
    for a1 in [1i64, -1] {
        for b1 in [1i64, -1] {
            for a2 in [1i64, -1] {
                for b2 in [1i64, -1] {
                    let o = Omega::from_signs([a1, b1, a2, b2]).unwrap();
                    let direct = a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2;
                    assert_eq!(row_chsh(o), direct);
                    assert_eq!(direct.abs(), 2);
                    seen += 1;
                }
            }
        }
    }
    assert_eq!(seen, 16);
}

#[test]
fn urn_reproduces_counterexample_correlation() {
    let schedule = vec![Context::from_position(0); 5000];
    let log = urn_protocol(&lf_counterexample(), &schedule, 3).unwrap();
    assert!(log.records().iter().all(|r| r.a == r.b));
}

#[test]
fn urn_is_seed_deterministic() {
    let schedule: Vec<Context> = (0..400).map(|k| Context::from_position(k % 4)).collect();
    let a = urn_protocol(&preset_s2(), &schedule, 17).unwrap();
    let b = urn_protocol(&preset_s2(), &schedule, 17).unwrap();
    let c = urn_protocol(&preset_s2(), &schedule, 18).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn spreadsheet_is_deterministic_and_shared_estimate_bounded() {
    let a = spreadsheet_experiment(&preset_s2(), 200, 64, 5).unwrap();
    let b = spreadsheet_experiment(&preset_s2(), 200, 64, 5).unwrap();
    assert_eq!(a, b);
    let two = Rational64::from_integer(2);
    assert!(a.per_run.iter().all(|r| r.s_shared <= two));
    assert_eq!(a.stats.shared_violations, 0);
}

#[test]
fn disjoint_estimate_is_unbiased() {
    let r = spreadsheet_experiment(&preset_s2(), 100_000, 1, 11).unwrap();
    assert!(
        (r.per_run[0].s_disjoint - 2.0).abs() < 0.02,
        "{}",
        r.per_run[0].s_disjoint
    );
    assert_eq!(population_chsh(&preset_s2()), q(2, 1));
}

#[test]
fn lf_preset_sits_on_the_bound() {
    let r = spreadsheet_experiment(&lf_counterexample(), 1000, 400, 21).unwrap();
    assert!((0.35..0.65).contains(&r.stats.frequency), "{}", r.stats.frequency);
}

#[test]
fn population_s1_rarely_violates() {
    let r = spreadsheet_experiment(&preset_s1(), 1000, 200, 9).unwrap();
    assert!(r.stats.frequency < 0.01);
}

#[test]
fn disconnected_reaches_four() {
    let d = max_s_disconnected(&q(0, 1)).unwrap();
    assert_eq!(d.s, q(4, 1));
    assert_eq!(
        d.behavior().unwrap().expectations(),
        [q(1, 1), q(1, 1), q(1, 1), q(-1, 1)]
    );
    assert_eq!(max_s_disconnected(&q(2, 5)).unwrap().s, q(18, 5));
}

#[test]
fn shared_spreadsheet_mean_of_rows() {
    let rows: Vec<Omega> = (0..16).map(Omega::from_index).collect();
    let s = Spreadsheet4N::new(rows.clone()).chsh_estimate();
    let total: i64 = rows.iter().map(|&o| row_chsh(o)).sum();
    assert_eq!(s, Rational64::new(total, 16));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn any_disconnected_datasets_obey_four(
        data in prop::array::uniform4(prop::collection::vec((any::<bool>(), any::<bool>()), 1..50))
    ) {
        let sign = |b: bool| if b { Outcome::Plus } else { Outcome::Minus };
        let datasets = data.map(|d| d.into_iter().map(|(a, b)| (sign(a), sign(b))).collect::<Vec<_>>());
        let report = datasets_behavior(&datasets).unwrap().chsh();
        prop_assert!(report.max_abs <= q(4, 1));
    }

    #[test]
    fn epsilon_gives_four_minus_epsilon(num in 0i64..=80, den in 1i64..=10) {
        prop_assume!(num <= 8 * den);
        let eps = q(num, den);
        let d = max_s_disconnected(&eps).unwrap();
        prop_assert_eq!(d.s, q(4, 1) - eps);
    }
}
