//! Dispatch from a validated configuration to the core library.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use bellkit_core::contextual::ContextualSummary;
use bellkit_core::finite_sample::{population_chsh, preset_s1, preset_s2};
use bellkit_core::scalar::rational_string;
use bellkit_core::{
    build_coupling, fine_check, lf_counterexample, malus_instrument_model, singlet_behavior, spreadsheet_experiment,
    Behavior, Context, ContextualModel, Error, HvModel, LoadedBehavior, MeasurementAngle, Omega, Outcome, Scalar,
    VERSION,
};
use num_traits::Zero;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ModelParams, SpreadsheetPreset};

/// Result of one experiment: the JSON payload and named CSV tables.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub payload: Value,
    pub tables: Vec<(String, String)>,
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput, Error> {
    match &config.params {
        ModelParams::Behavior { path } => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read behavior file {path:?}: {e}")))?;
            let loaded = LoadedBehavior::parse(&text)?;
            if config.experiment == crate::config::Experiment::Fine {
                fine_payload(&loaded)
            } else {
                Ok(chsh_payload(&loaded))
            }
        }
        ModelParams::Singlet { angles_deg } => singlet(angles_deg),
        ModelParams::Counterexample => counterexample(),
        ModelParams::Spreadsheet { preset, n, runs } => spreadsheet(*preset, *n, *runs, config.seed),
        ModelParams::Contextual { n, angles_deg, malus } => contextual(*n, *angles_deg, *malus, config.seed),
    }
}

/// `{config, version, wall_clock_seconds, payload}`.
pub fn envelope(config: &ExperimentConfig, output: &RunOutput, started: Instant) -> Value {
    json!({
        "config": config.to_json(),
        "version": VERSION,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
        "payload": output.payload,
    })
}

/// Writes `<prefix>.json` and `<prefix>.<table>.csv`.
pub fn write_outputs(prefix: &str, envelope: &Value, output: &RunOutput) -> Result<(), Error> {
    if let Some(dir) = Path::new(prefix).parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(format!("{prefix}.json"), pretty(envelope) + "\n")?;
    for (name, csv) in &output.tables {
        fs::write(format!("{prefix}.{name}.csv"), csv)?;
    }
    Ok(())
}

pub fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

fn behavior_summary<T: Scalar>(b: &Behavior<T>) -> Value {
    json!({
        "behavior": b.to_json(),
        "chsh": b.chsh().to_json(),
        "no_signaling_delta": b.no_signaling_delta().to_json(),
    })
}

fn chsh_payload(loaded: &LoadedBehavior) -> RunOutput {
    let (exact, mut payload) = match loaded {
        LoadedBehavior::Exact(b) => (true, behavior_summary(b)),
        LoadedBehavior::Float(b) => (false, behavior_summary(b)),
    };
    payload["exact"] = json!(exact);
    RunOutput {
        payload,
        tables: Vec::new(),
    }
}

fn fine_payload(loaded: &LoadedBehavior) -> Result<RunOutput, Error> {
    let (exact, mut payload) = match loaded {
        LoadedBehavior::Exact(b) => (true, fine_check(b)?.to_json()),
        LoadedBehavior::Float(b) => (false, fine_check(b)?.to_json()),
    };
    payload["exact"] = json!(exact);
    Ok(RunOutput {
        payload,
        tables: Vec::new(),
    })
}

fn singlet(angles_deg: &[f64; 4]) -> Result<RunOutput, Error> {
    let [a1, a2, b1, b2] = angles_deg.map(MeasurementAngle::from_degrees);
    let b = singlet_behavior(a1?, a2?, b1?, b2?);
    let mut payload = behavior_summary(&b);
    payload["angles_deg"] = json!(angles_deg);
    payload["max_abs"] = json!(b.chsh().max_abs);
    Ok(RunOutput {
        payload,
        tables: Vec::new(),
    })
}

fn counterexample() -> Result<RunOutput, Error> {
    let model = lf_counterexample();
    let coupling = build_coupling(&model);
    let behavior = coupling.behavior();
    let support: serde_json::Map<String, Value> = Omega::all()
        .filter(|o| !coupling.prob(*o).is_zero())
        .map(|o| (o.to_string(), coupling.prob(o).to_json()))
        .collect();
    let payload = json!({
        "hidden_states": model.states().iter().enumerate().map(|(k, s)| json!({
            "lambda": k + 1,
            "weight": rational_string(&s.weight),
            "omega": s.omega().to_string(),
        })).collect::<Vec<_>>(),
        "expectations": behavior.expectations().iter().map(Scalar::to_json).collect::<Vec<_>>(),
        "joint_probability": coupling.to_json()["p"],
        "support": support,
        "four_product_expectation": coupling.four_product_expectation().to_json(),
        "chsh": behavior.chsh().to_json(),
        "fine": fine_check(&behavior)?.to_json(),
    });
    Ok(RunOutput {
        payload,
        tables: Vec::new(),
    })
}

fn spreadsheet_model(preset: SpreadsheetPreset) -> HvModel {
    match preset {
        SpreadsheetPreset::S2 => preset_s2(),
        SpreadsheetPreset::S1 => preset_s1(),
        SpreadsheetPreset::Lf => lf_counterexample(),
    }
}

fn spreadsheet(preset: SpreadsheetPreset, n: u64, runs: u64, seed: u64) -> Result<RunOutput, Error> {
    let model = spreadsheet_model(preset);
    let report = spreadsheet_experiment(&model, n, runs, seed)?;
    let payload = json!({
        "preset": preset.name(),
        "population_S": rational_string(&population_chsh(&model)),
        "N": n,
        "variant": "E11 + E12 + E21 - E22",
        "stats": report.stats.to_json(),
    });
    let mut runs_csv = String::from("run_id,disjoint_sum,s_disjoint,violated,s_shared\n");
    for r in &report.per_run {
        let _ = writeln!(
            runs_csv,
            "{},{},{},{},{}/{}",
            r.run_id,
            r.disjoint_sum,
            r.s_disjoint,
            r.violated,
            r.s_shared.numer(),
            r.s_shared.denom()
        );
    }
    let stats_csv = format!(
        "{}\n{}\n",
        bellkit_core::ViolationStats::CSV_HEADER,
        report.stats.csv_line()
    );
    Ok(RunOutput {
        payload,
        tables: vec![("runs".into(), runs_csv), ("stats".into(), stats_csv)],
    })
}

fn contextual(n: u64, angles_deg: Option<[f64; 4]>, malus: Option<f64>, seed: u64) -> Result<RunOutput, Error> {
    let mut model = ContextualModel::default_preset();
    if let Some([a1, a2, b1, b2]) = angles_deg {
        model = model.with_angles([a1.to_radians(), a2.to_radians()], [b1.to_radians(), b2.to_radians()])?;
    }
    if let Some(c) = malus {
        model = malus_instrument_model(&model, c)?;
    }
    let log = model.simulate(n, seed)?;
    let summary = ContextualSummary::from_log(&log)?;

    let mut payload = summary.to_json();
    payload["model"] = json!({
        "alice_angles_deg": model.alice_angles.map(f64::to_degrees),
        "bob_angles_deg": model.bob_angles.map(f64::to_degrees),
        "source_offset": model.source_offset,
        "gamma": model.detector.gamma,
        "minus_efficiency": model.detector.minus_efficiency,
        "instrument_correlation": malus,
    });
    payload["N"] = json!(n);

    let mut trials = Vec::new();
    log.write_csv(&mut trials)?;
    let mut behavior_csv = String::from("ax,by,p_pp,p_pm,p_mp,p_mm,kept,total,retained\n");
    for ctx in Context::ALL {
        let k = ctx.position();
        let cell = |a, b| {
            summary.conditioned.dists[k]
                .as_ref()
                .map(|d| d.get(a, b).to_string())
                .unwrap_or_default()
        };
        let _ = writeln!(
            behavior_csv,
            "{},{},{},{},{},{},{},{},{}",
            ctx.alice.index(),
            ctx.bob.index(),
            cell(Outcome::Plus, Outcome::Plus),
            cell(Outcome::Plus, Outcome::Minus),
            cell(Outcome::Minus, Outcome::Plus),
            cell(Outcome::Minus, Outcome::Minus),
            summary.conditioned.kept[k],
            summary.conditioned.total[k],
            summary.conditioned.retained(ctx)
        );
    }
    Ok(RunOutput {
        payload,
        tables: vec![
            ("trials".into(), String::from_utf8(trials).expect("CSV is ASCII")),
            ("behavior".into(), behavior_csv),
        ],
    })
}
