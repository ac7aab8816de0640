//! Dense phase-one simplex for `A x = b, x >= 0` feasibility.
//!
//! Generic over [`Scalar`]: with exact rationals every comparison is exact,
//! with `f64` the pivot and feasibility tolerances below apply. Redundant
//! equalities are removed by Gauss-Jordan rank filtering before the simplex
//! runs; entering and leaving variables follow Bland's rule.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pivot magnitudes at or below this are treated as zero (floating point only).
pub const PIVOT_TOL: f64 = 1e-12;
/// Residual infeasibility accepted as zero (floating point only).
pub const FEASIBILITY_TOL: f64 = 1e-9;

const MAX_PIVOTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility<T> {
    Feasible(Vec<T>),
    /// The equalities themselves are contradictory.
    InconsistentSystem,
    /// The equalities have solutions, none of them nonnegative.
    NoNonnegativeSolution,
}

/// Equalities after rank filtering: `rows · x = rhs` with linearly independent rows.
#[derive(Clone, Debug)]
pub struct ReducedSystem<T> {
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    pub dropped: usize,
}

/// Gauss-Jordan elimination; returns `None` when a dependent row carries a nonzero right-hand side.
pub fn rank_filter<T: Scalar>(rows: &[Vec<T>], rhs: &[T]) -> Option<ReducedSystem<T>> {
    let n = rows.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<T>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| r.iter().cloned().chain(std::iter::once(b.clone())).collect())
        .collect();
    let mut rank = 0;
    for col in 0..n {
        if rank == m.len() {
            break;
        }
        let pivot = (rank..m.len())
            .max_by(|&i, &j| {
                m[i][col]
                    .abs()
                    .partial_cmp(&m[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(j.cmp(&i))
            })
            .expect("non-empty range");
        if m[pivot][col].is_zero_within(PIVOT_TOL) {
            continue;
        }
        m.swap(rank, pivot);
        let p = m[rank][col].clone();
        for v in m[rank].iter_mut() {
            *v = v.clone() / p.clone();
        }
        for i in 0..m.len() {
            if i == rank || m[i][col].is_zero() {
                continue;
            }
            let f = m[i][col].clone();
            for k in 0..=n {
                let delta = f.clone() * m[rank][k].clone();
                m[i][k] = m[i][k].clone() - delta;
            }
        }
        rank += 1;
    }
    if m[rank..].iter().any(|row| !row[n].is_zero_within(FEASIBILITY_TOL)) {
        return None;
    }
    let dropped = m.len() - rank;
    m.truncate(rank);
    let rhs = m.iter_mut().map(|row| row.pop().expect("augmented column")).collect();
    Some(ReducedSystem { rows: m, rhs, dropped })
}

/// Finds some `x >= 0` with `rows · x = rhs`, or reports why none exists.
pub fn find_nonnegative<T: Scalar>(rows: &[Vec<T>], rhs: &[T]) -> Result<Feasibility<T>> {
    if rows.len() != rhs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} constraint rows but {} right-hand sides",
            rows.len(),
            rhs.len()
        )));
    }
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("ragged constraint matrix".into()));
    }
    let Some(reduced) = rank_filter(rows, rhs) else {
        return Ok(Feasibility::InconsistentSystem);
    };
    phase_one(&reduced.rows, &reduced.rhs, n)
}

fn phase_one<T: Scalar>(rows: &[Vec<T>], rhs: &[T], n: usize) -> Result<Feasibility<T>> {
    let m = rows.len();
    let width = n + m + 1;
    // Tableau rows: [A | I | b] with b >= 0; artificial columns n..n+m start basic.
    let mut tab: Vec<Vec<T>> = Vec::with_capacity(m);
    for (i, (row, b)) in rows.iter().zip(rhs).enumerate() {
        let flip = b.is_negative();
        let mut t = vec![T::zero(); width];
        for (j, v) in row.iter().enumerate() {
            t[j] = if flip { -v.clone() } else { v.clone() };
        }
        t[n + i] = T::one();
        t[width - 1] = if flip { -b.clone() } else { b.clone() };
        tab.push(t);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Reduced costs of `min Σ artificials`; last entry holds minus the objective.
    let mut cost = vec![T::zero(); width];
    for t in &tab {
        for j in 0..n {
            cost[j] = cost[j].clone() - t[j].clone();
        }
        cost[width - 1] = cost[width - 1].clone() - t[width - 1].clone();
    }

    let mut pivots = 0;
    loop {
        let entering = (0..n + m).find(|&j| cost[j] < T::zero() && !cost[j].is_zero_within(PIVOT_TOL));
        let Some(col) = entering else { break };

        let mut leaving: Option<(usize, T)> = None;
        for (i, t) in tab.iter().enumerate() {
            if t[col] <= T::zero() || t[col].is_zero_within(PIVOT_TOL) {
                continue;
            }
            let ratio = t[width - 1].clone() / t[col].clone();
            let better = match &leaving {
                None => true,
                Some((r, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*r]),
            };
            if better {
                leaving = Some((i, ratio));
            }
        }
        let Some((row, _)) = leaving else {
            // The phase-one objective is bounded below by zero.
            return Err(Error::LpNonConvergence { iterations: pivots });
        };

        pivot(&mut tab, &mut cost, row, col);
        basis[row] = col;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::LpNonConvergence { iterations: pivots });
        }
    }

    let objective = -cost[width - 1].clone();
    if !objective.is_zero_within(FEASIBILITY_TOL) {
        return Ok(Feasibility::NoNonnegativeSolution);
    }
    let mut x = vec![T::zero(); n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            let v = tab[i][width - 1].clone();
            x[j] = if v.is_negative() { T::zero() } else { v };
        }
    }
    Ok(Feasibility::Feasible(x))
}

fn pivot<T: Scalar>(tab: &mut [Vec<T>], cost: &mut [T], row: usize, col: usize) {
    let p = tab[row][col].clone();
    for v in tab[row].iter_mut() {
        *v = v.clone() / p.clone();
    }
    let pivot_row = tab[row].clone();
    let eliminate = |target: &mut [T]| {
        let f = target[col].clone();
        if f.is_zero() {
            return;
        }
        for (t, pv) in target.iter_mut().zip(&pivot_row) {
            *t = t.clone() - f.clone() * pv.clone();
        }
    };
    for (i, t) in tab.iter_mut().enumerate() {
        if i != row {
            eliminate(t);
        }
    }
    eliminate(cost);
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;

    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_i64(n)
    }

    #[test]
    fn simple_feasible_system() {
        // x + y = 1, x - y = 0
        let rows = vec![vec![q(1), q(1)], vec![q(1), q(-1)]];
        let rhs = vec![q(1), q(0)];
        let Feasibility::Feasible(x) = find_nonnegative(&rows, &rhs).unwrap() else {
            panic!("expected feasible");
        };
        assert_eq!(x, vec![BigRational::from_ratio(1, 2), BigRational::from_ratio(1, 2)]);
    }

    #[test]
    fn needs_negative_component() {
        // x - y = 1, x + y = 0 has x = 1/2, y = -1/2 only.
        let rows = vec![vec![q(1), q(-1)], vec![q(1), q(1)]];
        let rhs = vec![q(1), q(0)];
        assert_eq!(
            find_nonnegative(&rows, &rhs).unwrap(),
            Feasibility::NoNonnegativeSolution
        );
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let rows = vec![vec![q(1), q(1)], vec![q(2), q(2)], vec![q(1), q(0)]];
        let rhs = vec![q(1), q(2), q(0)];
        let reduced = rank_filter(&rows, &rhs).unwrap();
        assert_eq!(reduced.dropped, 1);
        assert!(matches!(
            find_nonnegative(&rows, &rhs).unwrap(),
            Feasibility::Feasible(_)
        ));
    }

    #[test]
    fn contradictory_rows() {
        let rows = vec![vec![q(1), q(1)], vec![q(2), q(2)]];
        let rhs = vec![q(1), q(3)];
        assert_eq!(find_nonnegative(&rows, &rhs).unwrap(), Feasibility::InconsistentSystem);
    }

    #[test]
    fn float_path_handles_redundancy() {
        let rows = vec![vec![1.0, 1.0, 1.0], vec![0.5, 0.5, 0.5], vec![1.0, 0.0, -1.0]];
        let rhs = vec![1.0, 0.5, 0.0];
        let Feasibility::Feasible(x) = find_nonnegative(&rows, &rhs).unwrap() else {
            panic!("expected feasible");
        };
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((x[0] - x[2]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_prone_problem_terminates() {
        // Beale-style degenerate equalities embedded as a feasibility problem.
        let rows = vec![
            vec![q(1), q(0), q(0), q(1), q(0), q(0), q(0)],
            vec![q(0), q(1), q(0), q(0), q(1), q(0), q(0)],
            vec![q(0), q(0), q(1), q(0), q(0), q(1), q(0)],
            vec![q(1), q(1), q(1), q(0), q(0), q(0), q(1)],
        ];
        let rhs = vec![q(0), q(0), q(1), q(1)];
        assert!(matches!(
            find_nonnegative(&rows, &rhs).unwrap(),
            Feasibility::Feasible(_)
        ));
    }
}
