//! Experiment configuration: a flat `key = value` file merged with command-line
//! overrides, validated in one pass so every problem is reported together.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};

pub const KEYS: [&str; 9] = [
    "experiment",
    "seed",
    "N",
    "runs",
    "angles",
    "output",
    "model.preset",
    "model.behavior",
    "model.malus",
];

pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Chsh,
    Fine,
    Singlet,
    Counterexample,
    Spreadsheet,
    Contextual,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Chsh,
        Experiment::Fine,
        Experiment::Singlet,
        Experiment::Counterexample,
        Experiment::Spreadsheet,
        Experiment::Contextual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Chsh => "chsh",
            Experiment::Fine => "fine",
            Experiment::Singlet => "singlet",
            Experiment::Counterexample => "counterexample",
            Experiment::Spreadsheet => "spreadsheet",
            Experiment::Contextual => "contextual",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Keys besides `experiment`, `seed` and `output` that this experiment reads.
    fn accepts(self, key: &str) -> bool {
        matches!(
            (self, key),
            (_, "experiment" | "seed" | "output")
                | (Experiment::Chsh | Experiment::Fine, "model.behavior")
                | (Experiment::Singlet, "angles")
                | (Experiment::Spreadsheet, "N" | "runs" | "model.preset")
                | (Experiment::Contextual, "N" | "angles" | "model.preset" | "model.malus")
        )
    }
}

/// Where a value came from, for diagnostics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag(name) => write!(f, "--{name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub origin: Option<Origin>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(o) = &self.origin {
            write!(f, "{o}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
pub struct ConfigErrors(pub Vec<Diagnostic>);

/// Unvalidated key/value pairs with their origins.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    /// Parses the file format: one `key = value` per line, `#` comments, blank lines ignored.
    pub fn parse(text: &str) -> (RawConfig, Vec<Diagnostic>) {
        let mut raw = RawConfig::default();
        let mut errors = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |key: Option<&str>, message: String| Diagnostic {
                origin: Some(Origin::Line(lineno)),
                key: key.map(str::to_owned),
                message,
            };
            let Some((key, value)) = body.split_once('=') else {
                errors.push(err(None, format!("expected `key = value`, found {body:?}")));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                errors.push(err(None, format!("unknown key {key:?}")));
                continue;
            }
            if value.is_empty() {
                errors.push(err(Some(key), "missing value".into()));
                continue;
            }
            if let Some((_, Origin::Line(first))) = raw.entries.get(key) {
                errors.push(err(Some(key), format!("duplicate key (first set on line {first})")));
                continue;
            }
            raw.entries.insert(key.into(), (value.into(), Origin::Line(lineno)));
        }
        (raw, errors)
    }

    /// Sets `key` from a command-line flag, replacing any file value.
    pub fn set_flag(&mut self, key: &str, value: impl Into<String>, flag: &'static str) {
        debug_assert!(KEYS.contains(&key));
        self.entries.insert(key.into(), (value.into(), Origin::Flag(flag)));
    }

    fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.entries.get(key)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    Behavior {
        path: String,
    },
    Singlet {
        angles_deg: [f64; 4],
    },
    Counterexample,
    Spreadsheet {
        preset: SpreadsheetPreset,
        n: u64,
        runs: u64,
    },
    Contextual {
        n: u64,
        angles_deg: Option<[f64; 4]>,
        malus: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpreadsheetPreset {
    S2,
    S1,
    Lf,
}

impl SpreadsheetPreset {
    pub fn name(self) -> &'static str {
        match self {
            SpreadsheetPreset::S2 => "s2",
            SpreadsheetPreset::S1 => "s1",
            SpreadsheetPreset::Lf => "lf",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: Option<String>,
    pub params: ModelParams,
}

pub const DEFAULT_SINGLET_ANGLES: [f64; 4] = [0.0, 90.0, 45.0, 135.0];
pub const DEFAULT_SPREADSHEET_N: u64 = 1000;
pub const DEFAULT_RUNS: u64 = 2000;
pub const DEFAULT_CONTEXTUAL_N: u64 = 100_000;

struct Validator<'a> {
    raw: &'a RawConfig,
    errors: Vec<Diagnostic>,
}

impl<'a> Validator<'a> {
    fn fail(&mut self, key: &str, message: impl Into<String>) {
        let origin = self.raw.get(key).map(|(_, o)| o.clone());
        self.errors.push(Diagnostic {
            origin,
            key: Some(key.into()),
            message: message.into(),
        });
    }

    fn value(&self, key: &str) -> Option<&'a str> {
        self.raw.get(key).map(|(v, _)| v.as_str())
    }

    fn count(&mut self, key: &str, default: u64) -> u64 {
        let Some(v) = self.value(key) else { return default };
        match v.parse::<i128>() {
            Ok(n) if n < 1 => {
                self.fail(key, format!("{key} must be ≥ 1"));
                default
            }
            Ok(n) if n > i128::from(u64::MAX) => {
                self.fail(key, format!("{key} is too large"));
                default
            }
            Ok(n) => n as u64,
            Err(_) => {
                self.fail(key, format!("expected a positive integer, found {v:?}"));
                default
            }
        }
    }

    fn angles(&mut self) -> Option<[f64; 4]> {
        let v = self.value("angles")?.to_owned();
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            self.fail("angles", format!("exactly 4 angles required, found {}", parts.len()));
            return None;
        }
        let mut out = [0.0; 4];
        for (slot, p) in out.iter_mut().zip(&parts) {
            match p.parse::<f64>() {
                Ok(x) if x.is_finite() => *slot = x,
                _ => {
                    self.fail("angles", format!("angle {p:?} is not a finite number of degrees"));
                    return None;
                }
            }
        }
        Some(out)
    }
}

/// Validates a merged configuration, reporting every error at once.
pub fn validate(raw: &RawConfig) -> Result<ExperimentConfig, ConfigErrors> {
    let mut v = Validator {
        raw,
        errors: Vec::new(),
    };

    let experiment = match v.value("experiment") {
        None => {
            v.errors.push(Diagnostic {
                origin: None,
                key: Some("experiment".into()),
                message: "no experiment given (use a subcommand or `experiment = ...`)".into(),
            });
            None
        }
        Some(name) => {
            let parsed = Experiment::parse(name);
            if parsed.is_none() {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                let msg = format!("unknown experiment {name:?}; expected one of {}", names.join(", "));
                v.fail("experiment", msg);
            }
            parsed
        }
    };

    let seed = match v.value("seed") {
        None => DEFAULT_SEED,
        Some(s) => s.parse::<u64>().unwrap_or_else(|_| {
            v.fail("seed", format!("expected an unsigned 64-bit integer, found {s:?}"));
            DEFAULT_SEED
        }),
    };
    let output = v.value("output").map(str::to_owned);

    // Value checks run for every key present, so one pass finds all problems.
    let n_default = match experiment {
        Some(Experiment::Contextual) => DEFAULT_CONTEXTUAL_N,
        _ => DEFAULT_SPREADSHEET_N,
    };
    let n = v.count("N", n_default);
    let runs = v.count("runs", DEFAULT_RUNS);
    let angles = v.angles();
    let malus = v
        .value("model.malus")
        .map(str::to_owned)
        .and_then(|s| match s.parse::<f64>() {
            Ok(c) if (-1.0..=1.0).contains(&c) => Some(c),
            _ => {
                v.fail("model.malus", format!("must be a number in [-1, 1], found {s:?}"));
                None
            }
        });

    let Some(experiment) = experiment else {
        return Err(ConfigErrors(v.errors));
    };
    for key in KEYS {
        if raw.get(key).is_some() && !experiment.accepts(key) {
            v.fail(key, format!("not used by experiment {}", experiment.name()));
        }
    }

    let preset = v.value("model.preset").map(str::to_owned);
    let params = match experiment {
        Experiment::Chsh | Experiment::Fine => match v.value("model.behavior") {
            Some(p) => ModelParams::Behavior { path: p.to_owned() },
            None => {
                v.errors.push(Diagnostic {
                    origin: None,
                    key: Some("model.behavior".into()),
                    message: "a behavior JSON file is required".into(),
                });
                ModelParams::Behavior { path: String::new() }
            }
        },
        Experiment::Singlet => ModelParams::Singlet {
            angles_deg: angles.unwrap_or(DEFAULT_SINGLET_ANGLES),
        },
        Experiment::Counterexample => ModelParams::Counterexample,
        Experiment::Spreadsheet => {
            let preset = match preset.as_deref() {
                None | Some("s2") => SpreadsheetPreset::S2,
                Some("s1") => SpreadsheetPreset::S1,
                Some("lf") => SpreadsheetPreset::Lf,
                Some(other) => {
                    v.fail(
                        "model.preset",
                        format!("unknown spreadsheet preset {other:?}; expected s2, s1 or lf"),
                    );
                    SpreadsheetPreset::S2
                }
            };
            ModelParams::Spreadsheet { preset, n, runs }
        }
        Experiment::Contextual => {
            if let Some(p) = preset.as_deref().filter(|p| *p != "default") {
                v.fail(
                    "model.preset",
                    format!("unknown contextual preset {p:?}; expected default"),
                );
            }
            ModelParams::Contextual {
                n,
                angles_deg: angles,
                malus,
            }
        }
    };

    if v.errors.is_empty() {
        Ok(ExperimentConfig {
            experiment,
            seed,
            output,
            params,
        })
    } else {
        Err(ConfigErrors(v.errors))
    }
}

impl ExperimentConfig {
    /// Echo of the resolved configuration, defaults included.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "experiment": self.experiment.name(),
            "seed": self.seed,
            "output": self.output,
        });
        let extra = match &self.params {
            ModelParams::Behavior { path } => json!({ "model": { "behavior": path } }),
            ModelParams::Singlet { angles_deg } => json!({ "angles": angles_deg, "angle_convention": "spin" }),
            ModelParams::Counterexample => json!({}),
            ModelParams::Spreadsheet { preset, n, runs } => {
                json!({ "N": n, "runs": runs, "model": { "preset": preset.name() } })
            }
            ModelParams::Contextual { n, angles_deg, malus } => json!({
                "N": n,
                "angles": angles_deg,
                "angle_convention": "polarizer",
                "model": { "preset": "default", "malus": malus },
            }),
        };
        if let (Value::Object(base), Value::Object(more)) = (&mut v, extra) {
            base.extend(more);
        }
        v
    }
}
