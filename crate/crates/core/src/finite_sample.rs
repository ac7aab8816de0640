//! Finite-sample Bell protocols: urn sampling from a hidden-variable model,
//! the disjoint-sample vs shared-spreadsheet CHSH estimate, and explicit
//! disconnected datasets reaching `S = 4`.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, ToPrimitive};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::behavior::{Behavior, Context, ExactBehavior, Outcome, OutcomeDist};
use crate::coupling::{HiddenState, HvModel, Omega};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::{rational_string, Scalar};
use crate::trials::{LambdaSnapshot, TrialLog, TrialRecord};

/// Draws hidden-state indices with probability `p(λ)`.
struct LambdaSampler<'a> {
    states: &'a [HiddenState],
    index: WeightedIndex<f64>,
}

impl<'a> LambdaSampler<'a> {
    fn new(model: &'a HvModel) -> Result<Self> {
        let weights: Vec<f64> = model.states().iter().map(|s| s.weight.as_f64()).collect();
        let index = WeightedIndex::new(weights).map_err(|e| Error::InvalidModel(e.to_string()))?;
        Ok(LambdaSampler {
            states: model.states(),
            index,
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> (usize, &'a HiddenState) {
        let k = self.index.sample(rng);
        (k, &self.states[k])
    }
}

/// Urn protocol: for each scheduled context draw `λ ~ p(λ)` with replacement
/// and record `(A_i(λ), B_j(λ))`. Run id 0; trials numbered from 0.
pub fn urn_protocol(model: &HvModel, schedule: &[Context], seed: u64) -> Result<TrialLog> {
    urn_protocol_run(model, schedule, seed, 0)
}

pub fn urn_protocol_run(model: &HvModel, schedule: &[Context], seed: u64, run_id: u64) -> Result<TrialLog> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument(
            "schedule must contain at least one context".into(),
        ));
    }
    let sampler = LambdaSampler::new(model)?;
    let mut rng = rng::stream(seed, run_id, Purpose::Urn);
    let mut log = TrialLog::with_capacity(schedule.len());
    for (trial, &context) in schedule.iter().enumerate() {
        let (k, state) = sampler.draw(&mut rng);
        let (a, b) = state.response(context);
        log.push(TrialRecord {
            run_id,
            trial: trial as u64,
            context,
            a: a.sign(),
            b: b.sign(),
            lambda: Some(LambdaSnapshot::Index(k)),
        })?;
    }
    Ok(log)
}

/// `a1·b1 + a1·b2 + a2·b1 - a2·b2`, always `±2` for `±1` entries.
pub fn row_chsh(omega: Omega) -> i64 {
    let [a1, b1, a2, b2] = omega.signs().map(i64::from);
    a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2
}

/// `4N` rows of `(a1, b1, a2, b2)` drawn from one hidden-variable model.
#[derive(Clone, Debug, PartialEq)]
pub struct Spreadsheet4N {
    rows: Vec<Omega>,
}

impl Spreadsheet4N {
    pub fn new(rows: Vec<Omega>) -> Self {
        Spreadsheet4N { rows }
    }

    pub fn rows(&self) -> &[Omega] {
        &self.rows
    }

    /// CHSH estimated from all rows' columns; a mean of `±2` row values, so never above 2.
    pub fn chsh_estimate(&self) -> Rational64 {
        let total: i64 = self.rows.iter().map(|&o| row_chsh(o)).sum();
        Rational64::new(total, self.rows.len().max(1) as i64)
    }
}

/// One repetition of the spreadsheet experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunEstimate {
    pub run_id: u64,
    /// `N · Ŝ` for the disjoint-sample estimate (an integer).
    pub disjoint_sum: i64,
    /// `Ŝ` from four disjoint `N`-row samples.
    pub s_disjoint: f64,
    /// `Ŝ > 2`, decided in integer arithmetic.
    pub violated: bool,
    /// `Ŝ` computed from a single shared `4N`-row spreadsheet.
    #[serde(serialize_with = "ser_ratio")]
    pub s_shared: Rational64,
}

fn ser_ratio<S: serde::Serializer>(r: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViolationStats {
    pub runs: u64,
    pub violated: u64,
    pub frequency: f64,
    pub mean_s: f64,
    /// Standard error of `mean_s`.
    pub stderr_s: f64,
    /// Largest shared-spreadsheet estimate over all runs.
    pub shared_max_s: Rational64,
    pub shared_violations: u64,
}

impl ViolationStats {
    pub fn to_json(&self) -> Value {
        json!({
            "runs": self.runs,
            "violated": self.violated,
            "frequency": self.frequency,
            "mean_S": self.mean_s,
            "stderr_S": self.stderr_s,
            "shared_max_S": format!("{}/{}", self.shared_max_s.numer(), self.shared_max_s.denom()),
            "shared_violations": self.shared_violations,
        })
    }

    pub const CSV_HEADER: &'static str = "runs,violated,frequency,mean_S,stderr_S,shared_max_S,shared_violations";

    /// One CSV data line (no header, no trailing newline).
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}/{},{}",
            self.runs,
            self.violated,
            self.frequency,
            self.mean_s,
            self.stderr_s,
            self.shared_max_s.numer(),
            self.shared_max_s.denom(),
            self.shared_violations
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpreadsheetReport {
    pub n: u64,
    pub stats: ViolationStats,
    pub per_run: Vec<RunEstimate>,
}

fn run_once(sampler: &LambdaSampler<'_>, n: u64, seed: u64, run_id: u64) -> RunEstimate {
    let mut rng = rng::stream(seed, run_id, Purpose::Urn);
    // Four disjoint samples, one per context, each estimating its own correlation.
    let mut sums = [0i64; 4];
    for ctx in Context::ALL {
        for _ in 0..n {
            let (a, b) = sampler.draw(&mut rng).1.response(ctx);
            sums[ctx.position()] += i64::from(a.sign() * b.sign());
        }
    }
    let disjoint_sum = sums[0] + sums[1] + sums[2] - sums[3];
    // One shared 4N x 4 spreadsheet; every column pair is read from the same rows.
    let shared = Spreadsheet4N::new((0..4 * n).map(|_| sampler.draw(&mut rng).1.omega()).collect());
    RunEstimate {
        run_id,
        disjoint_sum,
        s_disjoint: disjoint_sum as f64 / n as f64,
        violated: disjoint_sum > 2 * n as i64,
        s_shared: shared.chsh_estimate(),
    }
}

/// Repeats the disjoint-sample CHSH estimate `runs` times with `N` trials per
/// context, counting `Ŝ > 2` for the fixed variant `E11 + E12 + E21 - E22`.
pub fn spreadsheet_experiment(model: &HvModel, n: u64, runs: u64, seed: u64) -> Result<SpreadsheetReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be >= 1".into()));
    }
    let sampler = LambdaSampler::new(model)?;
    let per_run: Vec<RunEstimate> = (0..runs)
        .into_par_iter()
        .map(|run_id| run_once(&sampler, n, seed, run_id))
        .collect();

    let violated = per_run.iter().filter(|r| r.violated).count() as u64;
    let mean_s = per_run.iter().map(|r| r.s_disjoint).sum::<f64>() / runs as f64;
    let var = if runs > 1 {
        per_run.iter().map(|r| (r.s_disjoint - mean_s).powi(2)).sum::<f64>() / (runs - 1) as f64
    } else {
        0.0
    };
    let shared_max_s = per_run.iter().map(|r| r.s_shared).max().expect("runs >= 1");
    let two = Rational64::from_integer(2);
    let stats = ViolationStats {
        runs,
        violated,
        frequency: violated as f64 / runs as f64,
        mean_s,
        stderr_s: (var / runs as f64).sqrt(),
        shared_max_s,
        shared_violations: per_run.iter().filter(|r| r.s_shared > two).count() as u64,
    };
    Ok(SpreadsheetReport { n, stats, per_run })
}

/// The 16 deterministic response vectors split by the sign of their canonical CHSH value.
fn vertices_with_row_chsh(value: i64) -> Vec<Omega> {
    Omega::all().filter(|&o| row_chsh(o) == value).collect()
}

/// Uniform mixture of the eight deterministic strategies with `S = +2`:
/// every correlation has magnitude 1/2 and the population CHSH is exactly 2.
pub fn preset_s2() -> HvModel {
    HvModel::uniform(&vertices_with_row_chsh(2)).expect("eight vertices")
}

/// All 16 deterministic strategies, weight 3/32 on `S = +2` and 1/32 on
/// `S = -2`, giving population CHSH exactly 1.
pub fn preset_s1() -> HvModel {
    let states = Omega::all()
        .map(|o| HiddenState {
            weight: if row_chsh(o) == 2 {
                BigRational::from_ratio(3, 32)
            } else {
                BigRational::from_ratio(1, 32)
            },
            alice: o.a,
            bob: o.b,
        })
        .collect();
    HvModel::new(states).expect("weights sum to one")
}

/// Population value of the canonical CHSH combination.
pub fn population_chsh(model: &HvModel) -> BigRational {
    let e = Context::ALL.map(|c| model.correlation(c));
    &e[0] + &e[1] + &e[2] - &e[3]
}

/// Four independently built datasets of `(a, b)` pairs, one per context.
#[derive(Clone, Debug, PartialEq)]
pub struct DisconnectedDatasets {
    pub datasets: [Vec<(Outcome, Outcome)>; 4],
    /// Canonical CHSH of the datasets' empirical correlations.
    pub s: BigRational,
}

impl DisconnectedDatasets {
    pub fn behavior(&self) -> Result<ExactBehavior> {
        datasets_behavior(&self.datasets)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "S": rational_string(&self.s),
            "rows_per_dataset": self.datasets[0].len(),
        })
    }
}

/// Empirical behavior of four datasets (one per context, canonical order).
pub fn datasets_behavior(datasets: &[Vec<(Outcome, Outcome)>; 4]) -> Result<ExactBehavior> {
    let entries = Context::ALL
        .iter()
        .map(|&c| {
            let mut counts = [[0u64; 2]; 2];
            for &(a, b) in &datasets[c.position()] {
                counts[a.bit() as usize][b.bit() as usize] += 1;
            }
            OutcomeDist::from_counts(counts)
                .map(|d| (c, d))
                .map_err(|_| Error::InvalidArgument(format!("dataset for context {c} is empty")))
        })
        .collect::<Result<Vec<_>>>()?;
    Behavior::from_contexts(entries)
}

/// Builds four datasets whose canonical CHSH is exactly `4 - ε`: every
/// dataset follows the PR-box pattern except for a fraction `ε/8` of
/// discordant rows.
pub fn max_s_disconnected(epsilon: &BigRational) -> Result<DisconnectedDatasets> {
    if epsilon.is_negative() {
        return Err(Error::InvalidArgument(format!(
            "requested S = 4 - ({epsilon}) exceeds the bound S <= 4"
        )));
    }
    let eight = BigRational::from_integer(BigInt::from(8));
    if *epsilon > eight {
        return Err(Error::InvalidArgument(format!(
            "requested S = 4 - ({epsilon}) is below -4"
        )));
    }
    let fraction = epsilon / &eight;
    let rows = fraction
        .denom()
        .to_usize()
        .ok_or_else(|| Error::InvalidArgument("epsilon denominator too large".into()))?;
    let flipped = fraction.numer().to_usize().unwrap_or(0);
    let datasets = Context::ALL.map(|c| {
        let anti = c.position() == 3;
        (0..rows)
            .map(|r| {
                let agree = (r >= flipped) != anti;
                (Outcome::Plus, if agree { Outcome::Plus } else { Outcome::Minus })
            })
            .collect::<Vec<_>>()
    });
    let s = datasets_behavior(&datasets)?.chsh().canonical().clone();
    Ok(DisconnectedDatasets { datasets, s })
}
