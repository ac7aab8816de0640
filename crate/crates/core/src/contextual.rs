//! Setting-dependent hidden-variable model with source and instrument variables.
//!
//! Each trial in context `(i, j)` draws source variables `(λ1, λ2)` and
//! instrument variables `(λi, λj)` from independent streams. Alice's outcome
//! reads only `(λ1, λi, θi)`, Bob's only `(λ2, λj, θj)`; either may be `0`
//! (no detection). Every hidden state is tagged with the context that produced
//! it, so the hidden-variable spaces of different contexts are disjoint.
//! Correlations above the local bound appear only after conditioning on
//! coincidences (both outcomes nonzero).

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::behavior::{Behavior, ChshReport, Context, OutcomeDist, Party, Setting, SettingLabel};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::trials::{LambdaSnapshot, TrialLog, TrialRecord};

/// Rejection-curve exponent of the default preset.
pub const DEFAULT_GAMMA: f64 = 2.4;
/// Relative efficiency of the `-1` output port in the default preset.
pub const DEFAULT_MINUS_EFFICIENCY: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceState {
    /// Polarization phase of Alice's beam, in `[0, 2π)`.
    pub lam1: f64,
    /// Polarization phase of Bob's beam.
    pub lam2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstrumentState {
    /// Alice's detection threshold in `[0, 1)`.
    pub lam_i: f64,
    /// Bob's detection threshold in `[0, 1)`.
    pub lam_j: f64,
}

/// Full hidden state `λ = (λ1, λ2, λi, λj)` with its context tag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HiddenVariables {
    pub tag: Option<Context>,
    pub source: SourceState,
    pub instrument: InstrumentState,
}

/// Polarizing beam splitter with two detectors.
///
/// The port is `sign(cos 2(λ - θ))`; the click registers when
/// `threshold^γ < η_port · |cos 2(λ - θ)|`, with `η_+ = 1` and `η_- = minus_efficiency`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detector {
    pub gamma: f64,
    pub minus_efficiency: f64,
}

impl Detector {
    pub fn new(gamma: f64, minus_efficiency: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if !(0.0..=1.0).contains(&minus_efficiency) {
            return Err(Error::InvalidArgument(format!(
                "minus-port efficiency must lie in [0, 1], got {minus_efficiency}"
            )));
        }
        Ok(Detector {
            gamma,
            minus_efficiency,
        })
    }

    pub fn respond(&self, source: f64, threshold: f64, angle: f64) -> i8 {
        let c = (2.0 * (source - angle)).cos();
        let (port, efficiency) = if c >= 0.0 {
            (1, 1.0)
        } else {
            (-1, self.minus_efficiency)
        };
        if threshold.powf(self.gamma) < efficiency * c.abs() {
            port
        } else {
            0
        }
    }
}

/// How instrument thresholds are drawn for a context.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InstrumentSampler {
    /// `p_ij(λi, λj) = p(λi) p(λj)`, both uniform.
    Independent,
    /// Uniform marginals with Pearson correlation `coefficient · cos(θi - θj)`,
    /// realized as a mixture: with probability `|r|` the second threshold
    /// copies the first (`r > 0`) or its complement (`r < 0`).
    Malus { coefficient: f64 },
}

impl InstrumentSampler {
    pub fn correlation(&self, theta_i: f64, theta_j: f64) -> f64 {
        match *self {
            InstrumentSampler::Independent => 0.0,
            InstrumentSampler::Malus { coefficient } => coefficient * (theta_i - theta_j).cos(),
        }
    }

    fn draw(&self, streams: &mut TrialStreams, theta_i: f64, theta_j: f64) -> InstrumentState {
        let lam_i: f64 = streams.instrument.gen();
        let mut lam_j: f64 = streams.instrument.gen();
        if let InstrumentSampler::Malus { .. } = self {
            let r = self.correlation(theta_i, theta_j);
            let u: f64 = streams.coupling.gen();
            if u < r.abs() {
                lam_j = if r > 0.0 { lam_i } else { 1.0 - lam_i };
            }
        }
        InstrumentState { lam_i, lam_j }
    }
}

/// Independent random streams for one block of trials.
pub struct TrialStreams {
    source: ChaCha8Rng,
    instrument: ChaCha8Rng,
    coupling: ChaCha8Rng,
}

impl TrialStreams {
    pub fn new(seed: u64, block: u64) -> Self {
        TrialStreams {
            source: rng::stream(seed, block, Purpose::Source),
            instrument: rng::stream(seed, block, Purpose::Instrument),
            coupling: rng::stream(seed, block, Purpose::InstrumentCoupling),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContextualTrial {
    pub hidden: HiddenVariables,
    pub a: i8,
    pub b: i8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextualModel {
    /// Alice's polarizer angles `[θ1, θ2]`, radians.
    pub alice_angles: [f64; 2],
    /// Bob's polarizer angles `[θ1, θ2]`, radians.
    pub bob_angles: [f64; 2],
    /// `λ2 = λ1 + source_offset`.
    pub source_offset: f64,
    pub detector: Detector,
    pub instruments: InstrumentSampler,
}

impl ContextualModel {
    /// Polarizers at 0°, 45° (Alice) and 22.5°, 67.5° (Bob); orthogonally
    /// polarized pair; `γ = 2.4`, minus-port efficiency 0.8; independent thresholds.
    pub fn default_preset() -> Self {
        ContextualModel {
            alice_angles: [0.0, 45f64.to_radians()],
            bob_angles: [22.5f64.to_radians(), 67.5f64.to_radians()],
            source_offset: FRAC_PI_2,
            detector: Detector {
                gamma: DEFAULT_GAMMA,
                minus_efficiency: DEFAULT_MINUS_EFFICIENCY,
            },
            instruments: InstrumentSampler::Independent,
        }
    }

    pub fn with_angles(mut self, alice: [f64; 2], bob: [f64; 2]) -> Result<Self> {
        if alice.iter().chain(&bob).any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("angles must be finite".into()));
        }
        self.alice_angles = alice;
        self.bob_angles = bob;
        Ok(self)
    }

    /// All four polarizers rotated by `delta` radians.
    pub fn rotated(&self, delta: f64) -> Self {
        let mut m = self.clone();
        m.alice_angles = self.alice_angles.map(|a| a + delta);
        m.bob_angles = self.bob_angles.map(|b| b + delta);
        m
    }

    /// `(θi, θj)` for a context.
    pub fn angles(&self, context: Context) -> (f64, f64) {
        let pick = |angles: &[f64; 2], s: Setting| angles[s.index() as usize - 1];
        (
            pick(&self.alice_angles, context.alice),
            pick(&self.bob_angles, context.bob),
        )
    }

    /// One trial: source and instrument variables from separate streams, then
    /// each wing's tri-valued response from its own variables only.
    pub fn sample_trial(&self, context: Context, streams: &mut TrialStreams) -> ContextualTrial {
        let (theta_i, theta_j) = self.angles(context);
        let lam1 = streams.source.gen::<f64>() * TAU;
        let source = SourceState {
            lam1,
            lam2: (lam1 + self.source_offset).rem_euclid(TAU),
        };
        let instrument = self.instruments.draw(streams, theta_i, theta_j);
        ContextualTrial {
            hidden: HiddenVariables {
                tag: Some(context),
                source,
                instrument,
            },
            a: self.detector.respond(source.lam1, instrument.lam_i, theta_i),
            b: self.detector.respond(source.lam2, instrument.lam_j, theta_j),
        }
    }

    /// `n` trials per context. Context blocks use independent streams and are
    /// logged in canonical order as run 0 with consecutive trial numbers.
    pub fn simulate(&self, n_per_context: u64, seed: u64) -> Result<TrialLog> {
        if n_per_context == 0 {
            return Err(Error::InvalidArgument("N must be >= 1".into()));
        }
        let blocks: Vec<Vec<ContextualTrial>> = Context::ALL
            .par_iter()
            .map(|&ctx| {
                let mut streams = TrialStreams::new(seed, ctx.position() as u64);
                (0..n_per_context)
                    .map(|_| self.sample_trial(ctx, &mut streams))
                    .collect()
            })
            .collect();
        let mut log = TrialLog::with_capacity(4 * n_per_context as usize);
        for (trial, t) in blocks.into_iter().flatten().enumerate() {
            log.push(TrialRecord {
                run_id: 0,
                trial: trial as u64,
                context: t.hidden.tag.expect("sampled trials are tagged"),
                a: t.a,
                b: t.b,
                lambda: Some(LambdaSnapshot::Contextual(t.hidden)),
            })?;
        }
        Ok(log)
    }

    /// Trials whose context is chosen uniformly at random per trial.
    pub fn simulate_random_settings(&self, trials: u64, seed: u64) -> Result<TrialLog> {
        let mut setting_rng = rng::stream(seed, 0, Purpose::Setting);
        let mut streams = TrialStreams::new(seed, u64::MAX);
        let mut log = TrialLog::with_capacity(trials as usize);
        for trial in 0..trials {
            let ctx = Context::from_position(setting_rng.gen_range(0..4));
            let t = self.sample_trial(ctx, &mut streams);
            log.push(TrialRecord {
                run_id: 0,
                trial,
                context: ctx,
                a: t.a,
                b: t.b,
                lambda: Some(LambdaSnapshot::Contextual(t.hidden)),
            })?;
        }
        Ok(log)
    }

    /// `p(i, j | λ)`: a point mass on the context the hidden state was drawn in.
    pub fn posterior_setting(&self, hidden: &HiddenVariables) -> Result<[f64; 4]> {
        let tag = hidden
            .tag
            .ok_or_else(|| Error::InvalidArgument("hidden state carries no context tag".into()))?;
        let mut p = [0.0; 4];
        p[tag.position()] = 1.0;
        Ok(p)
    }
}

/// The Malus variant of `base`: instrument thresholds correlated by
/// `coefficient · cos(θi - θj)`.
pub fn malus_instrument_model(base: &ContextualModel, coefficient: f64) -> Result<ContextualModel> {
    if !(-1.0..=1.0).contains(&coefficient) {
        return Err(Error::InvalidArgument(format!(
            "instrument correlation coefficient must lie in [-1, 1], got {coefficient}"
        )));
    }
    let mut m = base.clone();
    m.instruments = InstrumentSampler::Malus { coefficient };
    Ok(m)
}

/// CHSH report together with the standard error of each variant.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedChsh {
    pub report: ChshReport<f64>,
    pub stderr: [f64; 8],
}

impl EstimatedChsh {
    fn new(expectations: [f64; 4], stderr_e: [f64; 4]) -> Self {
        let se = stderr_e.iter().map(|s| s * s).sum::<f64>().sqrt();
        EstimatedChsh {
            report: ChshReport::from_expectations(expectations),
            stderr: [se; 8],
        }
    }

    pub fn max_abs_stderr(&self) -> f64 {
        self.stderr[self.report.argmax.0]
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.report.to_json();
        v["stderr"] = json!(self.stderr);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalingEstimate {
    pub delta: f64,
    pub stderr: f64,
    /// Setting whose marginal moves the most.
    pub setting: SettingLabel,
}

/// Behavior estimated after discarding every trial with a zero outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionedBehavior {
    pub dists: [Option<OutcomeDist<f64>>; 4],
    pub kept: [u64; 4],
    pub total: [u64; 4],
    pub warnings: Vec<String>,
}

pub fn condition_on_coincidences(log: &TrialLog) -> ConditionedBehavior {
    let (counts, zeros) = log.counts();
    let mut warnings = Vec::new();
    let mut dists: [Option<OutcomeDist<f64>>; 4] = Default::default();
    let mut kept = [0u64; 4];
    let mut total = [0u64; 4];
    for ctx in Context::ALL {
        let k = ctx.position();
        kept[k] = counts[k].iter().flatten().sum();
        total[k] = kept[k] + zeros[k];
        match OutcomeDist::from_counts(counts[k]) {
            Ok(d) => dists[k] = Some(d),
            Err(_) => warnings.push(format!(
                "context {ctx}: no coincidences among {} trials; excluded from CHSH",
                total[k]
            )),
        }
    }
    ConditionedBehavior {
        dists,
        kept,
        total,
        warnings,
    }
}

impl ConditionedBehavior {
    pub fn retained(&self, context: Context) -> f64 {
        let k = context.position();
        if self.total[k] == 0 {
            0.0
        } else {
            self.kept[k] as f64 / self.total[k] as f64
        }
    }

    /// `None` when some context has no coincidences.
    pub fn behavior(&self) -> Option<Behavior<f64>> {
        let dists: Vec<_> = self.dists.iter().cloned().collect::<Option<_>>()?;
        Some(Behavior::new(dists.try_into().ok()?))
    }

    pub fn chsh(&self) -> Option<EstimatedChsh> {
        let b = self.behavior()?;
        let e = b.expectations();
        let se = std::array::from_fn(|k| ((1.0 - e[k] * e[k]).max(0.0) / self.kept[k] as f64).sqrt());
        Some(EstimatedChsh::new(e, se))
    }

    /// Marginal discrepancy with the binomial standard error of the largest gap.
    pub fn no_signaling(&self) -> Option<SignalingEstimate> {
        let b = self.behavior()?;
        let gaps = b.marginal_gaps();
        let (idx, _) = gaps
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, (_, d))| if *d > best.1 { (i, *d) } else { best });
        let (label, delta) = gaps[idx];
        let (c1, c2) = match label.party {
            Party::Alice => (
                Context::new(label.setting, Setting::First),
                Context::new(label.setting, Setting::Second),
            ),
            Party::Bob => (
                Context::new(Setting::First, label.setting),
                Context::new(Setting::Second, label.setting),
            ),
        };
        let var = |c: Context| {
            let p = b.marginal(label.party, c);
            p * (1.0 - p) / self.kept[c.position()] as f64
        };
        Some(SignalingEstimate {
            delta,
            stderr: (var(c1) + var(c2)).sqrt(),
            setting: label,
        })
    }

    /// Behavior schema plus a `retained` fraction per context; empty contexts have `"p": null`.
    pub fn to_json(&self) -> Value {
        let contexts: Vec<Value> = Context::ALL
            .iter()
            .map(|&c| {
                json!({
                    "a": c.alice.index(),
                    "b": c.bob.index(),
                    "p": self.dists[c.position()].as_ref().map(OutcomeDist::to_json),
                    "retained": self.retained(c),
                    "kept": self.kept[c.position()],
                    "total": self.total[c.position()],
                })
            })
            .collect();
        json!({ "contexts": contexts })
    }
}

/// Unconditioned correlations `mean(a·b)`, zeros included.
#[derive(Clone, Debug, PartialEq)]
pub struct RawCorrelations {
    pub mean: [f64; 4],
    pub stderr: [f64; 4],
    pub n: [u64; 4],
}

pub fn raw_correlations(log: &TrialLog) -> Result<RawCorrelations> {
    let mut sum = [0f64; 4];
    let mut sum_sq = [0f64; 4];
    let mut n = [0u64; 4];
    for r in log.records() {
        let k = r.context.position();
        let v = f64::from(r.a * r.b);
        sum[k] += v;
        sum_sq[k] += v * v;
        n[k] += 1;
    }
    if let Some(k) = n.iter().position(|&c| c < 2) {
        return Err(Error::InvalidArgument(format!(
            "context {} needs at least 2 trials",
            Context::from_position(k)
        )));
    }
    let mean: [f64; 4] = std::array::from_fn(|k| sum[k] / n[k] as f64);
    let stderr = std::array::from_fn(|k| {
        let nk = n[k] as f64;
        let var = (sum_sq[k] - nk * mean[k] * mean[k]) / (nk - 1.0);
        (var.max(0.0) / nk).sqrt()
    });
    Ok(RawCorrelations { mean, stderr, n })
}

impl RawCorrelations {
    pub fn chsh(&self) -> EstimatedChsh {
        EstimatedChsh::new(self.mean, self.stderr)
    }
}

/// Everything reported for a contextual-model run.
#[derive(Clone, Debug)]
pub struct ContextualSummary {
    pub conditioned: ConditionedBehavior,
    pub post_selected: Option<EstimatedChsh>,
    pub raw: EstimatedChsh,
    pub signaling: Option<SignalingEstimate>,
}

impl ContextualSummary {
    pub fn from_log(log: &TrialLog) -> Result<Self> {
        let conditioned = condition_on_coincidences(log);
        Ok(ContextualSummary {
            post_selected: conditioned.chsh(),
            signaling: conditioned.no_signaling(),
            raw: raw_correlations(log)?.chsh(),
            conditioned,
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "conditioned_behavior": self.conditioned.to_json(),
            "post_selected_chsh": self.post_selected.as_ref().map(EstimatedChsh::to_json),
            "raw_chsh": self.raw.to_json(),
            "no_signaling": self.signaling.as_ref().map(|s| json!({
                "delta": s.delta,
                "stderr": s.stderr,
                "setting": s.setting.to_string(),
            })),
            "warnings": self.conditioned.warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_trials(log: &TrialLog) -> impl Iterator<Item = &HiddenVariables> {
        log.records().iter().map(|r| match &r.lambda {
            Some(LambdaSnapshot::Contextual(h)) => h,
            other => panic!("missing hidden state: {other:?}"),
        })
    }

    #[test]
    fn forced_thresholds() {
        let d = ContextualModel::default_preset().detector;
        for k in 0..1000 {
            let lam = k as f64 * 0.00731 * TAU;
            if (2.0 * lam).cos().abs() > 1e-9 {
                assert_ne!(d.respond(lam, 0.0, 0.3), 0);
            }
            assert_eq!(d.respond(lam, 1.0, 0.3), 0);
        }
    }

    #[test]
    fn detection_rate_is_partial() {
        let log = ContextualModel::default_preset().simulate(5000, 7).unwrap();
        let ctx = Context::from_position(0);
        let rs: Vec<_> = log.records().iter().filter(|r| r.context == ctx).collect();
        let detected = rs.iter().filter(|r| r.a != 0 && r.b != 0).count();
        assert!(detected > 0 && detected < rs.len());
    }

    #[test]
    fn detector_validation() {
        assert!(Detector::new(0.0, 1.0).is_err());
        assert!(Detector::new(2.0, 1.5).is_err());
        assert!(Detector::new(2.0, 0.5).is_ok());
    }

    #[test]
    fn posterior_is_point_mass() {
        let m = ContextualModel::default_preset();
        let log = m.simulate(50, 1).unwrap();
        for (r, h) in log.records().iter().zip(all_trials(&log)) {
            let p = m.posterior_setting(h).unwrap();
            assert_eq!(p[r.context.position()], 1.0);
            assert_eq!(p.iter().sum::<f64>(), 1.0);
        }
        let mut h = *all_trials(&log).next().unwrap();
        h.tag = None;
        assert!(m.posterior_setting(&h).is_err());
    }

    #[test]
    fn malus_zero_reduces_to_base() {
        let base = ContextualModel::default_preset();
        let m = malus_instrument_model(&base, 0.0).unwrap();
        assert_eq!(base.simulate(200, 11).unwrap(), m.simulate(200, 11).unwrap());
        assert!(malus_instrument_model(&base, 1.01).is_err());
        assert!(malus_instrument_model(&base, -1.01).is_err());
        let full = malus_instrument_model(&base, 1.0).unwrap();
        assert_eq!(full.instruments.correlation(0.4, 0.4), 1.0);
    }

    #[test]
    fn malus_full_correlation_copies_threshold() {
        let m = malus_instrument_model(&ContextualModel::default_preset(), 1.0)
            .unwrap()
            .with_angles([0.0, 0.0], [0.0, 0.0])
            .unwrap();
        let log = m.simulate(100, 3).unwrap();
        assert!(all_trials(&log).all(|h| h.instrument.lam_i == h.instrument.lam_j));
    }

    #[test]
    fn conditioning_without_zeros_matches_estimation() {
        let mut log = TrialLog::new();
        let outcomes = [(1, 1), (1, -1), (-1, -1), (-1, 1), (1, 1)];
        let mut t = 0;
        for ctx in Context::ALL {
            for &(a, b) in &outcomes[..2 + ctx.position()] {
                log.push(TrialRecord {
                    run_id: 0,
                    trial: t,
                    context: ctx,
                    a,
                    b,
                    lambda: None,
                })
                .unwrap();
                t += 1;
            }
        }
        let cond = condition_on_coincidences(&log);
        assert!(cond.warnings.is_empty());
        assert_eq!(cond.behavior().unwrap(), log.estimate_behavior().unwrap());
        assert_eq!(cond.retained(Context::ALL[3]), 1.0);
    }

    #[test]
    fn empty_context_is_flagged() {
        let mut log = ContextualModel::default_preset().simulate(200, 5).unwrap();
        let mut edited = TrialLog::new();
        for mut r in log.records().to_vec() {
            if r.context.position() == 2 {
                r.b = 0;
            }
            edited.push(r).unwrap();
        }
        log = edited;
        let cond = condition_on_coincidences(&log);
        assert!(cond.dists[2].is_none());
        assert_eq!(cond.warnings.len(), 1);
        assert!(cond.warnings[0].contains("(2,1)"));
        assert!(cond.chsh().is_none());
        assert_eq!(cond.to_json()["contexts"][2]["p"], Value::Null);
    }

    #[test]
    fn source_and_instrument_uncorrelated() {
        let log = ContextualModel::default_preset().simulate(25_000, 99).unwrap();
        let xs: Vec<(f64, f64)> = all_trials(&log).map(|h| (h.source.lam1, h.instrument.lam_i)).collect();
        let n = xs.len() as f64;
        let (mx, my) = xs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in &xs {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r.abs() < 3.0 / n.sqrt(), "r = {r}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let m = ContextualModel::default_preset();
        assert_eq!(m.simulate(300, 42).unwrap(), m.simulate(300, 42).unwrap());
        assert_ne!(m.simulate(300, 42).unwrap(), m.simulate(300, 43).unwrap());
        assert!(m.simulate(0, 1).is_err());
    }

    #[test]
    fn raw_correlations_need_trials() {
        assert!(raw_correlations(&TrialLog::new()).is_err());
    }
}
