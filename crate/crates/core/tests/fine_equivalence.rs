use bellkit_core::fine::witness_error;
use bellkit_core::{fine_check, Behavior, BigRational, Context, InfeasibleReason, Omega, OutcomeDist};
use num_traits::{Signed, Zero};
use proptest::prelude::*;

type Table = [[[BigRational; 2]; 2]; 4];

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn zero_table() -> Table {
    std::array::from_fn(|_| std::array::from_fn(|_| std::array::from_fn(|_| BigRational::zero())))
}

/// Deterministic point: each context puts all mass on `(a_x, b_y)`.
fn vertex(k: usize) -> Table {
    let o = Omega::from_index(k);
    let mut t = zero_table();
    for ctx in Context::ALL {
        let a = o.alice(ctx.alice).bit() as usize;
        let b = o.bob(ctx.bob).bit() as usize;
        t[ctx.position()][a][b] = q(1, 1);
    }
    t
}

/// PR box with correlation `sign_c` in each context and unbiased marginals.
fn pr_box(k: usize) -> Table {
    let mut t = zero_table();
    for c in 0..4 {
        let mut e = if c == k % 4 { -1 } else { 1 };
        if k >= 4 {
            e = -e;
        }
        let (same, diff) = if e > 0 { (q(1, 2), q(0, 1)) } else { (q(0, 1), q(1, 2)) };
        t[c] = [[same.clone(), diff.clone()], [diff, same]];
    }
    t
}

fn to_behavior(t: &Table) -> Behavior<BigRational> {
    Behavior::new(std::array::from_fn(|c| OutcomeDist::new(t[c].clone()).unwrap()))
}

fn correlations(t: &Table) -> [BigRational; 4] {
    std::array::from_fn(|c| &t[c][0][0] - &t[c][0][1] - &t[c][1][0] + &t[c][1][1])
}

/// Oracle: every sign pattern with one minus, and its negation, bounded by 2.
fn chsh_ok(t: &Table) -> bool {
    let e = correlations(t);
    (0..4).all(|m| {
        let s: BigRational = (0..4).map(|c| if c == m { -e[c].clone() } else { e[c].clone() }).sum();
        s.abs() <= q(2, 1)
    })
}

/// Mixtures of the 16 local vertices and 8 PR boxes; always no-signaling.
fn mixture(max_boxes: usize) -> impl Strategy<Value = Table> {
    (
        prop::collection::vec((0usize..16, 1i64..20), 1..6),
        prop::collection::vec((0usize..8, 1i64..20), 0..=max_boxes),
    )
        .prop_map(|(verts, boxes)| {
            let total: i64 = verts.iter().chain(&boxes).map(|(_, w)| w).sum();
            let mut t = zero_table();
            let parts = verts
                .iter()
                .map(|&(k, w)| (vertex(k), w))
                .chain(boxes.iter().map(|&(k, w)| (pr_box(k), w)));
            for (part, w) in parts {
                for c in 0..4 {
                    for a in 0..2 {
                        for b in 0..2 {
                            t[c][a][b] += &part[c][a][b] * q(w, total);
                        }
                    }
                }
            }
            t
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lp_agrees_with_chsh(t in mixture(3)) {
        let behavior = to_behavior(&t);
        prop_assert!(behavior.no_signaling_delta().is_zero());
        let r = fine_check(&behavior).unwrap();
        prop_assert_eq!(r.feasible, chsh_ok(&t), "E = {:?}", correlations(&t));
        if let Some(w) = &r.witness {
            prop_assert!(witness_error(&behavior, w).is_zero());
        } else {
            prop_assert_eq!(r.reason, Some(InfeasibleReason::ChshViolation));
            let (v, s) = r.violated_variant.clone().unwrap();
            prop_assert!(s.abs() > q(2, 1));
            prop_assert_eq!(s, r.chsh.variants[v.0].clone());
        }
    }

    #[test]
    fn local_mixtures_are_feasible(t in mixture(0)) {
        let r = fine_check(&to_behavior(&t)).unwrap();
        prop_assert!(r.feasible);
    }

    #[test]
    fn float_path_agrees_away_from_boundary(t in mixture(3)) {
        let exact = to_behavior(&t);
        let max_abs = exact.chsh().max_abs;
        prop_assume!((max_abs - q(2, 1)).abs() > q(1, 1_000_000));
        let r = fine_check(&exact.to_f64()).unwrap();
        prop_assert_eq!(r.feasible, chsh_ok(&t));
    }
}

#[test]
fn pr_box_is_infeasible_with_value_four() {
    for k in 0..8 {
        let r = fine_check(&to_behavior(&pr_box(k))).unwrap();
        assert!(!r.feasible);
        let (v, s) = r.violated_variant.unwrap();
        assert_eq!(v.0, k % 4);
        assert_eq!(s.abs(), q(4, 1));
    }
}

#[test]
fn product_behavior_has_exact_witness() {
    // A1 = +1 w.p. 1/3, A2 = +1 w.p. 3/4, B1 = +1 w.p. 1/2, B2 = +1 w.p. 1/5, independent.
    let pa = [q(1, 3), q(3, 4)];
    let pb = [q(1, 2), q(1, 5)];
    let t: Table = std::array::from_fn(|c| {
        let ctx = Context::from_position(c);
        let a = &pa[ctx.alice.index() as usize - 1];
        let b = &pb[ctx.bob.index() as usize - 1];
        let one = q(1, 1);
        [[a * b, a * (&one - b)], [(&one - a) * b, (&one - a) * (&one - b)]]
    });
    let behavior = to_behavior(&t);
    let r = fine_check(&behavior).unwrap();
    assert!(r.feasible);
    let w = r.witness.unwrap();
    assert!(witness_error(&behavior, &w).is_zero());
    assert_eq!(w.behavior(), behavior);
}

#[test]
fn tsirelson_behavior_is_infeasible_in_floats() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let b = Behavior::from_correlations([h, h, h, -h]).unwrap();
    let r = fine_check(&b).unwrap();
    assert!(!r.feasible);
    assert!((r.violated_variant.unwrap().1 - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
}
