//! Joint-distribution existence for a behavior, decided by linear-programming
//! feasibility over the 16-point sample space.

use serde::Serialize;
use serde_json::{json, Value};

use crate::behavior::{Behavior, ChshReport, ChshVariant, Context, Outcome};
use crate::coupling::{Coupling, Omega};
use crate::error::Result;
use crate::lp::{find_nonnegative, Feasibility, FEASIBILITY_TOL};
use crate::scalar::Scalar;

/// Marginal-consistency threshold for floating-point behaviors.
pub const SIGNALING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// One party's marginals change with the distant setting; no coupling can exist.
    InconsistentMarginals,
    /// Consistent marginals, but some CHSH variant exceeds 2.
    ChshViolation,
}

impl InfeasibleReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InfeasibleReason::InconsistentMarginals => "inconsistent marginals",
            InfeasibleReason::ChshViolation => "chsh violation",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FineResult<T> {
    pub feasible: bool,
    pub witness: Option<Coupling<T>>,
    /// Largest CHSH variant, reported whenever the check fails and some `|S_k| > 2`.
    pub violated_variant: Option<(ChshVariant, T)>,
    pub reason: Option<InfeasibleReason>,
    pub no_signaling_delta: T,
    pub chsh: ChshReport<T>,
}

impl<T: Scalar> FineResult<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "feasible": self.feasible,
            "witness": self.witness.as_ref().map(Coupling::to_json),
            "violated_variant": self.violated_variant.as_ref().map(|(v, s)| json!({
                "index": v.0,
                "coefficients": v.coefficients(),
                "value": s.to_json(),
            })),
            "reason": self.reason.map(InfeasibleReason::as_str),
            "no_signaling_delta": self.no_signaling_delta.to_json(),
            "chsh": self.chsh.to_json(),
        })
    }
}

/// Equalities `Σ_{ω ∈ context cell} p(ω) = p_xy(a,b)` plus normalization.
fn marginal_constraints<T: Scalar>(behavior: &Behavior<T>) -> (Vec<Vec<T>>, Vec<T>) {
    let mut rows = vec![vec![T::one(); 16]];
    let mut rhs = vec![T::one()];
    for ctx in Context::ALL {
        for a in Outcome::ALL {
            for b in Outcome::ALL {
                let row = Omega::all()
                    .map(|o| {
                        if o.alice(ctx.alice) == a && o.bob(ctx.bob) == b {
                            T::one()
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                rows.push(row);
                rhs.push(behavior.dist(ctx).get(a, b).clone());
            }
        }
    }
    (rows, rhs)
}

fn violation<T: Scalar>(chsh: &ChshReport<T>) -> Option<(ChshVariant, T)> {
    let two = T::from_i64(2);
    (!chsh.max_abs.le_within(&two, FEASIBILITY_TOL)).then(|| (chsh.argmax, chsh.variants[chsh.argmax.0].clone()))
}

/// Decides whether a single joint distribution of `(a1, b1, a2, b2)`
/// reproduces all four context distributions.
pub fn fine_check<T: Scalar>(behavior: &Behavior<T>) -> Result<FineResult<T>> {
    let chsh = behavior.chsh();
    let delta = behavior.no_signaling_delta();
    if !delta.is_zero_within(SIGNALING_TOL) {
        return Ok(FineResult {
            feasible: false,
            witness: None,
            violated_variant: violation(&chsh),
            reason: Some(InfeasibleReason::InconsistentMarginals),
            no_signaling_delta: delta,
            chsh,
        });
    }

    let (rows, rhs) = marginal_constraints(behavior);
    let result = match find_nonnegative(&rows, &rhs)? {
        Feasibility::Feasible(x) => {
            let witness = normalized_witness(x)?;
            FineResult {
                feasible: true,
                witness: Some(witness),
                violated_variant: None,
                reason: None,
                no_signaling_delta: delta,
                chsh,
            }
        }
        Feasibility::InconsistentSystem | Feasibility::NoNonnegativeSolution => FineResult {
            feasible: false,
            witness: None,
            violated_variant: Some((chsh.argmax, chsh.variants[chsh.argmax.0].clone())),
            reason: Some(InfeasibleReason::ChshViolation),
            no_signaling_delta: delta,
            chsh,
        },
    };
    Ok(result)
}

fn normalized_witness<T: Scalar>(x: Vec<T>) -> Result<Coupling<T>> {
    let p: [T; 16] = x.try_into().expect("16 unknowns");
    if T::EXACT {
        return Coupling::new(p);
    }
    let total = p.iter().fold(T::zero(), |acc, v| acc + v.clone());
    Coupling::new(p.map(|v| v / total.clone()))
}

/// Largest entrywise gap between the witness's context marginals and the behavior.
pub fn witness_error<T: Scalar>(behavior: &Behavior<T>, witness: &Coupling<T>) -> T {
    let induced = witness.behavior();
    let mut worst = T::zero();
    for ctx in Context::ALL {
        for a in Outcome::ALL {
            for b in Outcome::ALL {
                let d = (induced.dist(ctx).get(a, b).clone() - behavior.dist(ctx).get(a, b).clone()).abs();
                worst = T::max_of(worst, d);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;
    use num_traits::Zero;

    use super::*;
    use crate::behavior::OutcomeDist;
    use crate::coupling::lf_counterexample;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    #[test]
    fn product_behavior_is_feasible() {
        let b = Behavior::new(std::array::from_fn(|_| OutcomeDist::<BigRational>::uniform()));
        let r = fine_check(&b).unwrap();
        assert!(r.feasible);
        let w = r.witness.unwrap();
        assert!(witness_error(&b, &w).is_zero());
        assert!(
            fine_check(&Coupling::<BigRational>::uniform().behavior())
                .unwrap()
                .feasible
        );
    }

    #[test]
    fn pr_box_is_infeasible_at_four() {
        let b = Behavior::from_correlations([q(1, 1), q(1, 1), q(1, 1), q(-1, 1)]).unwrap();
        let r = fine_check(&b).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.reason, Some(InfeasibleReason::ChshViolation));
        let (v, s) = r.violated_variant.unwrap();
        assert_eq!(v, ChshVariant::CANONICAL);
        assert_eq!(s, q(4, 1));
    }

    #[test]
    fn counterexample_is_feasible() {
        let b = lf_counterexample().coupling().behavior();
        let r = fine_check(&b).unwrap();
        assert!(r.feasible);
        assert!(witness_error(&b, r.witness.as_ref().unwrap()).is_zero());
    }

    #[test]
    fn signaling_behavior_reports_inconsistent_marginals() {
        let mut dists: [OutcomeDist<BigRational>; 4] = std::array::from_fn(|_| OutcomeDist::uniform());
        dists[0] = OutcomeDist::new([[q(3, 10), q(3, 10)], [q(2, 10), q(2, 10)]]).unwrap();
        let r = fine_check(&Behavior::new(dists)).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.reason, Some(InfeasibleReason::InconsistentMarginals));
        assert_eq!(r.no_signaling_delta, q(1, 10));
        assert!(r.violated_variant.is_none());
    }

    #[test]
    fn float_behaviour_at_local_boundary() {
        let b = Behavior::from_correlations([1.0, 0.0, 0.0, -1.0]).unwrap();
        let r = fine_check(&b).unwrap();
        assert!(r.feasible);
        assert!(witness_error(&b, r.witness.as_ref().unwrap()) <= 1e-9);
    }
}
