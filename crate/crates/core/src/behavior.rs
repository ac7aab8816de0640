//! Behaviors: four context-indexed joint outcome distributions, and the
//! functionals computed on them (correlations, marginals, CHSH variants,
//! and the no-signaling discrepancy).

use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, FLOAT_SIMPLEX_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// Canonical setting index `1` or `2`.
///
/// Some derivations label the two settings `x, y ∈ {1, -1}`; the alias map is
/// `1 -> 1`, `2 -> -1`. Labels are never multiplied with outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    First,
    Second,
}

impl Setting {
    pub const ALL: [Setting; 2] = [Setting::First, Setting::Second];

    pub fn index(self) -> u8 {
        match self {
            Setting::First => 1,
            Setting::Second => 2,
        }
    }

    pub fn from_index(index: i64) -> Result<Self> {
        match index {
            1 => Ok(Setting::First),
            2 => Ok(Setting::Second),
            other => Err(Error::Parse(format!("setting index must be 1 or 2, got {other}"))),
        }
    }

    pub fn alias(self) -> i8 {
        match self {
            Setting::First => 1,
            Setting::Second => -1,
        }
    }

    pub fn from_alias(alias: i8) -> Result<Self> {
        match alias {
            1 => Ok(Setting::First),
            -1 => Ok(Setting::Second),
            other => Err(Error::Parse(format!("setting alias must be 1 or -1, got {other}"))),
        }
    }

    fn slot(self) -> usize {
        self.index() as usize - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SettingLabel {
    pub party: Party,
    pub setting: Setting,
}

impl fmt::Display for SettingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.party {
            Party::Alice => 'A',
            Party::Bob => 'B',
        };
        write!(f, "{p}{}", self.setting.index())
    }
}

/// A pair of jointly used settings, one per party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Context {
    pub alice: Setting,
    pub bob: Setting,
}

impl Context {
    /// Canonical order: (1,1), (1,2), (2,1), (2,2).
    pub const ALL: [Context; 4] = [
        Context::new(Setting::First, Setting::First),
        Context::new(Setting::First, Setting::Second),
        Context::new(Setting::Second, Setting::First),
        Context::new(Setting::Second, Setting::Second),
    ];

    pub const fn new(alice: Setting, bob: Setting) -> Self {
        Context { alice, bob }
    }

    pub fn from_indices(alice: i64, bob: i64) -> Result<Self> {
        Ok(Context::new(Setting::from_index(alice)?, Setting::from_index(bob)?))
    }

    /// Position in [`Context::ALL`].
    pub fn position(self) -> usize {
        self.alice.slot() * 2 + self.bob.slot()
    }

    pub fn from_position(position: usize) -> Context {
        Context::ALL[position]
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.alice.index(), self.bob.index())
    }
}

/// A measurement outcome, encoded as `+1` / `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Result<Self> {
        match sign {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(Error::Parse(format!("outcome must be +1 or -1, got {other}"))),
        }
    }

    /// `0/1` display encoding (`+1 -> 0`, `-1 -> 1`).
    pub fn bit(self) -> u8 {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    fn slot(self) -> usize {
        self.bit() as usize
    }
}

/// Joint distribution of `(a, b)` for one context. Row index is `a`, column
/// index is `b`, `+1` first: `[[p(+,+), p(+,-)], [p(-,+), p(-,-)]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDist<T> {
    p: [[T; 2]; 2],
}

impl<T: Scalar> OutcomeDist<T> {
    pub fn new(p: [[T; 2]; 2]) -> Result<Self> {
        Self::validated(p, None)
    }

    fn validated(p: [[T; 2]; 2], context: Option<Context>) -> Result<Self> {
        let mut sum = T::zero();
        for row in &p {
            for v in row {
                if !T::zero().le_within(v, FLOAT_SIMPLEX_TOL) {
                    return Err(Error::dist(context, format!("negative or non-finite entry {v}")));
                }
                sum = sum + v.clone();
            }
        }
        if !(sum.clone() - T::one()).is_zero_within(FLOAT_SIMPLEX_TOL) {
            return Err(Error::dist(context, format!("entries sum to {sum}, not 1")));
        }
        Ok(OutcomeDist { p })
    }

    pub fn uniform() -> Self {
        let q = T::from_ratio(1, 4);
        OutcomeDist {
            p: [[q.clone(), q.clone()], [q.clone(), q]],
        }
    }

    pub fn point(a: Outcome, b: Outcome) -> Self {
        let mut p = [[T::zero(), T::zero()], [T::zero(), T::zero()]];
        p[a.slot()][b.slot()] = T::one();
        OutcomeDist { p }
    }

    /// Empirical distribution from counts indexed like the probability table.
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Result<Self> {
        let total: u64 = counts.iter().flatten().sum();
        if total == 0 {
            return Err(Error::dist(None, "no samples"));
        }
        let n = T::from_i64(total as i64);
        let f = |c: u64| T::from_i64(c as i64) / n.clone();
        Ok(OutcomeDist {
            p: [[f(counts[0][0]), f(counts[0][1])], [f(counts[1][0]), f(counts[1][1])]],
        })
    }

    pub fn get(&self, a: Outcome, b: Outcome) -> &T {
        &self.p[a.slot()][b.slot()]
    }

    pub fn table(&self) -> &[[T; 2]; 2] {
        &self.p
    }

    /// `Σ a·b·p(a,b) = p(+,+) + p(-,-) - p(+,-) - p(-,+)`.
    pub fn expectation(&self) -> T {
        let [[pp, pm], [mp, mm]] = &self.p;
        pp.clone() + mm.clone() - pm.clone() - mp.clone()
    }

    /// `(P(a=+1), P(b=+1))`.
    pub fn marginals(&self) -> (T, T) {
        let [[pp, pm], [mp, _]] = &self.p;
        (pp.clone() + pm.clone(), pp.clone() + mp.clone())
    }

    /// Relabels Alice's outcome `a -> -a`.
    pub fn flip_alice(&self) -> Self {
        let [r0, r1] = self.p.clone();
        OutcomeDist { p: [r1, r0] }
    }

    /// Relabels Bob's outcome `b -> -b`.
    pub fn flip_bob(&self) -> Self {
        let [[a, b], [c, d]] = self.p.clone();
        OutcomeDist { p: [[b, a], [d, c]] }
    }

    pub fn to_f64(&self) -> OutcomeDist<f64> {
        OutcomeDist {
            p: [
                [self.p[0][0].as_f64(), self.p[0][1].as_f64()],
                [self.p[1][0].as_f64(), self.p[1][1].as_f64()],
            ],
        }
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.p
                .iter()
                .map(|row| Value::Array(row.iter().map(Scalar::to_json).collect()))
                .collect(),
        )
    }
}

/// One CHSH sign pattern: exactly one correlation enters with a minus sign,
/// and the whole sum may be negated. Eight variants in total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshVariant(pub usize);

impl ChshVariant {
    /// `E11 + E12 + E21 - E22`.
    pub const CANONICAL: ChshVariant = ChshVariant(3);

    pub fn all() -> impl Iterator<Item = ChshVariant> {
        (0..8).map(ChshVariant)
    }

    /// Context (by canonical position) carrying the minus sign.
    pub fn minus_at(self) -> usize {
        self.0 % 4
    }

    pub fn negated(self) -> bool {
        self.0 >= 4
    }

    pub fn coefficients(self) -> [i8; 4] {
        let mut c = [1i8; 4];
        c[self.minus_at()] = -1;
        if self.negated() {
            c.iter_mut().for_each(|v| *v = -*v);
        }
        c
    }

    pub fn evaluate<T: Scalar>(self, expectations: &[T; 4]) -> T {
        self.coefficients()
            .iter()
            .zip(expectations)
            .fold(
                T::zero(),
                |acc, (&c, e)| {
                    if c > 0 {
                        acc + e.clone()
                    } else {
                        acc - e.clone()
                    }
                },
            )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChshReport<T> {
    /// Correlations in canonical context order.
    pub expectations: [T; 4],
    pub variants: [T; 8],
    pub max_abs: T,
    /// Variant attaining `max_abs` (lowest index on ties).
    pub argmax: ChshVariant,
}

impl<T: Scalar> ChshReport<T> {
    pub fn from_expectations(expectations: [T; 4]) -> Self {
        let variants: [T; 8] = std::array::from_fn(|k| ChshVariant(k).evaluate(&expectations));
        let mut argmax = 0;
        for k in 1..8 {
            if variants[k].abs() > variants[argmax].abs() {
                argmax = k;
            }
        }
        ChshReport {
            max_abs: variants[argmax].abs(),
            expectations,
            variants,
            argmax: ChshVariant(argmax),
        }
    }

    pub fn canonical(&self) -> &T {
        &self.variants[ChshVariant::CANONICAL.0]
    }

    pub fn to_json(&self) -> Value {
        json!({
            "expectations": self.expectations.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "variants": self.variants.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "max_abs": self.max_abs.to_json(),
            "argmax_variant": self.argmax.0,
        })
    }
}

/// Four outcome distributions, one per context, stored in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior<T> {
    dists: [OutcomeDist<T>; 4],
}

pub type ExactBehavior = Behavior<BigRational>;

impl<T: Scalar> Behavior<T> {
    /// Distributions in canonical context order.
    pub fn new(dists: [OutcomeDist<T>; 4]) -> Self {
        Behavior { dists }
    }

    /// Builds from `(context, dist)` pairs; every context must appear exactly once.
    pub fn from_contexts(entries: impl IntoIterator<Item = (Context, OutcomeDist<T>)>) -> Result<Self> {
        let mut slots: [Option<OutcomeDist<T>>; 4] = Default::default();
        for (ctx, dist) in entries {
            let slot = &mut slots[ctx.position()];
            if slot.is_some() {
                return Err(Error::IncompleteBehavior(format!("context {ctx} given twice")));
            }
            *slot = Some(dist);
        }
        let missing: Vec<String> = Context::ALL
            .iter()
            .filter(|c| slots[c.position()].is_none())
            .map(|c| c.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteBehavior(format!("missing {}", missing.join(", "))));
        }
        Ok(Behavior {
            dists: slots.map(|s| s.expect("checked above")),
        })
    }

    /// Behavior with the given correlations and unbiased marginals.
    pub fn from_correlations(expectations: [T; 4]) -> Result<Self> {
        let dists = expectations
            .into_iter()
            .zip(Context::ALL)
            .map(|(e, ctx)| {
                let same = (T::one() + e.clone()) / T::from_i64(4);
                let diff = (T::one() - e) / T::from_i64(4);
                OutcomeDist::validated([[same.clone(), diff.clone()], [diff, same]], Some(ctx))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Behavior {
            dists: dists.try_into().expect("four contexts"),
        })
    }

    pub fn dist(&self, context: Context) -> &OutcomeDist<T> {
        &self.dists[context.position()]
    }

    pub fn dists(&self) -> &[OutcomeDist<T>; 4] {
        &self.dists
    }

    pub fn expectations(&self) -> [T; 4] {
        std::array::from_fn(|k| self.dists[k].expectation())
    }

    pub fn chsh(&self) -> ChshReport<T> {
        ChshReport::from_expectations(self.expectations())
    }

    /// `P(outcome = +1)` for one party's setting, read from the given context.
    pub fn marginal(&self, party: Party, context: Context) -> T {
        let (a, b) = self.dist(context).marginals();
        match party {
            Party::Alice => a,
            Party::Bob => b,
        }
    }

    /// Marginal discrepancy of each party's setting across the distant
    /// party's two settings, in the order A1, A2, B1, B2.
    pub fn marginal_gaps(&self) -> [(SettingLabel, T); 4] {
        let gap = |party: Party, setting: Setting| {
            let (c1, c2) = match party {
                Party::Alice => (
                    Context::new(setting, Setting::First),
                    Context::new(setting, Setting::Second),
                ),
                Party::Bob => (
                    Context::new(Setting::First, setting),
                    Context::new(Setting::Second, setting),
                ),
            };
            let d = (self.marginal(party, c1) - self.marginal(party, c2)).abs();
            (SettingLabel { party, setting }, d)
        };
        [
            gap(Party::Alice, Setting::First),
            gap(Party::Alice, Setting::Second),
            gap(Party::Bob, Setting::First),
            gap(Party::Bob, Setting::Second),
        ]
    }

    /// Largest marginal discrepancy; zero iff the behavior is consistently connected.
    pub fn no_signaling_delta(&self) -> T {
        self.marginal_gaps()
            .into_iter()
            .fold(T::zero(), |acc, (_, d)| T::max_of(acc, d))
    }

    pub fn to_f64(&self) -> Behavior<f64> {
        Behavior {
            dists: std::array::from_fn(|k| self.dists[k].to_f64()),
        }
    }

    pub fn to_json(&self) -> Value {
        let contexts = Context::ALL
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("a".into(), json!(c.alice.index()));
                m.insert("b".into(), json!(c.bob.index()));
                m.insert("p".into(), self.dist(*c).to_json());
                Value::Object(m)
            })
            .collect();
        json!({ "contexts": Value::Array(contexts) })
    }

    /// Parses the behavior schema; unknown per-context keys (such as `retained`) are ignored.
    pub fn from_json(value: &Value) -> Result<Self> {
        let contexts = value
            .get("contexts")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("expected an object with a \"contexts\" array".into()))?;
        let mut entries = Vec::with_capacity(4);
        for (k, entry) in contexts.iter().enumerate() {
            let field = |name: &str| {
                entry
                    .get(name)
                    .and_then(Value::as_i64)
                    .ok_or_else(|| Error::Parse(format!("contexts[{k}].{name} must be 1 or 2")))
            };
            let ctx = Context::from_indices(field("a")?, field("b")?)?;
            let rows = entry
                .get("p")
                .and_then(Value::as_array)
                .filter(|rows| rows.len() == 2)
                .ok_or_else(|| Error::Parse(format!("contexts[{k}].p must be a 2x2 array")))?;
            let mut p: [[T; 2]; 2] = [[T::zero(), T::zero()], [T::zero(), T::zero()]];
            for (i, row) in rows.iter().enumerate() {
                let row = row
                    .as_array()
                    .filter(|r| r.len() == 2)
                    .ok_or_else(|| Error::Parse(format!("contexts[{k}].p[{i}] must have 2 entries")))?;
                for (j, v) in row.iter().enumerate() {
                    p[i][j] = T::from_json(v)?;
                }
            }
            entries.push((ctx, OutcomeDist::validated(p, Some(ctx))?));
        }
        Behavior::from_contexts(entries)
    }
}

/// A behavior parsed from JSON: exact when every probability is a string.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum LoadedBehavior {
    Exact(ExactBehavior),
    Float(Behavior<f64>),
}

impl LoadedBehavior {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let all_strings = value
            .get("contexts")
            .and_then(Value::as_array)
            .map(|cs| {
                cs.iter().all(|c| {
                    c.get("p")
                        .and_then(Value::as_array)
                        .map(|rows| {
                            rows.iter()
                                .flat_map(|r| r.as_array().into_iter().flatten())
                                .all(Value::is_string)
                        })
                        .unwrap_or(false)
                })
            })
            .unwrap_or(false);
        if all_strings {
            Behavior::from_json(&value).map(LoadedBehavior::Exact)
        } else {
            Behavior::from_json(&value).map(LoadedBehavior::Float)
        }
    }
}
