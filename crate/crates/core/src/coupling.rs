//! Non-contextual couplings built from finite hidden-variable models.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{Map, Value};

use crate::behavior::{Behavior, Context, Outcome, OutcomeDist, Setting};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point `(a1, b1, a2, b2)` of the 16-element sample space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Omega {
    pub a: [Outcome; 2],
    pub b: [Outcome; 2],
}

impl Omega {
    /// All 16 points; index `i` has bits `a1 b1 a2 b2` (MSB first), `1` meaning `-1`.
    pub fn all() -> impl Iterator<Item = Omega> {
        (0..16).map(Omega::from_index)
    }

    pub fn from_index(index: usize) -> Omega {
        let bit = |k: usize| {
            if index >> k & 1 == 1 {
                Outcome::Minus
            } else {
                Outcome::Plus
            }
        };
        Omega {
            a: [bit(3), bit(1)],
            b: [bit(2), bit(0)],
        }
    }

    pub fn index(self) -> usize {
        let b = |o: Outcome| o.bit() as usize;
        b(self.a[0]) << 3 | b(self.b[0]) << 2 | b(self.a[1]) << 1 | b(self.b[1])
    }

    /// `[a1, b1, a2, b2]` as signs.
    pub fn signs(self) -> [i8; 4] {
        [self.a[0].sign(), self.b[0].sign(), self.a[1].sign(), self.b[1].sign()]
    }

    pub fn from_signs(signs: [i64; 4]) -> Result<Omega> {
        Ok(Omega {
            a: [Outcome::from_sign(signs[0])?, Outcome::from_sign(signs[2])?],
            b: [Outcome::from_sign(signs[1])?, Outcome::from_sign(signs[3])?],
        })
    }

    pub fn alice(self, s: Setting) -> Outcome {
        self.a[s.index() as usize - 1]
    }

    pub fn bob(self, s: Setting) -> Outcome {
        self.b[s.index() as usize - 1]
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a1, b1, a2, b2] = self.signs();
        write!(f, "({a1},{b1},{a2},{b2})")
    }
}

/// A joint distribution over `(a1, b1, a2, b2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling<T> {
    p: [T; 16],
}

pub type CouplingJp = Coupling<BigRational>;

impl<T: Scalar> Coupling<T> {
    pub fn new(p: [T; 16]) -> Result<Self> {
        let mut sum = T::zero();
        for (k, v) in p.iter().enumerate() {
            if !T::zero().le_within(v, 1e-12) {
                return Err(Error::dist(
                    None,
                    format!("coupling entry {} is {v}", Omega::from_index(k)),
                ));
            }
            sum = sum + v.clone();
        }
        if !(sum.clone() - T::one()).is_zero_within(1e-12) {
            return Err(Error::dist(None, format!("coupling sums to {sum}")));
        }
        Ok(Coupling { p })
    }

    pub fn point_mass(omega: Omega) -> Self {
        let mut p: [T; 16] = std::array::from_fn(|_| T::zero());
        p[omega.index()] = T::one();
        Coupling { p }
    }

    pub fn uniform() -> Self {
        Coupling {
            p: std::array::from_fn(|_| T::from_ratio(1, 16)),
        }
    }

    pub fn prob(&self, omega: Omega) -> &T {
        &self.p[omega.index()]
    }

    pub fn probs(&self) -> &[T; 16] {
        &self.p
    }

    /// Marginal distribution of `(a_i, b_j)` for one context.
    pub fn context_dist(&self, context: Context) -> OutcomeDist<T> {
        let mut t = [[T::zero(), T::zero()], [T::zero(), T::zero()]];
        for omega in Omega::all() {
            let a = omega.alice(context.alice).bit() as usize;
            let b = omega.bob(context.bob).bit() as usize;
            t[a][b] = t[a][b].clone() + self.p[omega.index()].clone();
        }
        OutcomeDist::new(t).expect("marginal of a valid coupling")
    }

    /// The four context marginals.
    pub fn behavior(&self) -> Behavior<T> {
        Behavior::new(Context::ALL.map(|c| self.context_dist(c)))
    }

    /// `Σ a1·b1·a2·b2·p(ω)`.
    pub fn four_product_expectation(&self) -> T {
        Omega::all().fold(T::zero(), |acc, omega| {
            let prod: i8 = omega.signs().iter().product();
            let v = self.p[omega.index()].clone();
            if prod > 0 {
                acc + v
            } else {
                acc - v
            }
        })
    }

    /// `{"p": {"(a1,b1,a2,b2)": value, ...}}`, all 16 points in index order.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for omega in Omega::all() {
            m.insert(omega.to_string(), self.p[omega.index()].to_json());
        }
        let mut root = Map::new();
        root.insert("p".into(), Value::Object(m));
        Value::Object(root)
    }

    /// Missing points read as zero.
    pub fn from_json(value: &Value) -> Result<Self> {
        let entries = value
            .get("p")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Parse("expected {\"p\": {...}}".into()))?;
        let mut p: [T; 16] = std::array::from_fn(|_| T::zero());
        for (key, v) in entries {
            let omega = parse_omega_key(key)?;
            p[omega.index()] = T::from_json(v)?;
        }
        Coupling::new(p)
    }
}

fn parse_omega_key(key: &str) -> Result<Omega> {
    let bad = || Error::Parse(format!("bad sample-space key {key:?}"));
    let inner = key
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(bad)?;
    let signs: Vec<i64> = inner
        .split(',')
        .map(|s| s.trim().parse::<i64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let signs: [i64; 4] = signs.try_into().map_err(|_| bad())?;
    Omega::from_signs(signs)
}

/// One hidden state: its weight and predetermined responses for both settings.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState {
    pub weight: BigRational,
    pub alice: [Outcome; 2],
    pub bob: [Outcome; 2],
}

impl HiddenState {
    /// The point `M(λ) = (A1(λ), B1(λ), A2(λ), B2(λ))`.
    pub fn omega(&self) -> Omega {
        Omega {
            a: self.alice,
            b: self.bob,
        }
    }

    pub fn response(&self, context: Context) -> (Outcome, Outcome) {
        let o = self.omega();
        (o.alice(context.alice), o.bob(context.bob))
    }
}

/// Finite hidden-variable model with setting-independent weights and
/// deterministic local responses.
#[derive(Clone, Debug, PartialEq)]
pub struct HvModel {
    states: Vec<HiddenState>,
}

impl HvModel {
    pub fn new(states: Vec<HiddenState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidModel("no hidden states".into()));
        }
        if let Some(s) = states.iter().find(|s| s.weight.is_negative()) {
            return Err(Error::InvalidModel(format!("negative weight {}", s.weight)));
        }
        let total: BigRational = states.iter().map(|s| s.weight.clone()).sum();
        if !total.is_one() {
            return Err(Error::InvalidModel(format!("weights sum to {total}")));
        }
        Ok(HvModel { states })
    }

    /// Single hidden state with the given response vector.
    pub fn deterministic(omega: Omega) -> Self {
        HvModel {
            states: vec![HiddenState {
                weight: BigRational::one(),
                alice: omega.a,
                bob: omega.b,
            }],
        }
    }

    /// Equal-weight model over the given response vectors.
    pub fn uniform(points: &[Omega]) -> Result<Self> {
        let n = points.len() as i64;
        Self::new(
            points
                .iter()
                .map(|o| HiddenState {
                    weight: BigRational::from_ratio(1, n.max(1)),
                    alice: o.a,
                    bob: o.b,
                })
                .collect(),
        )
    }

    pub fn states(&self) -> &[HiddenState] {
        &self.states
    }

    /// `p(ω) = Σ_{λ: M(λ)=ω} p(λ)`.
    pub fn coupling(&self) -> CouplingJp {
        let mut p: [BigRational; 16] = std::array::from_fn(|_| BigRational::zero());
        for s in &self.states {
            let k = s.omega().index();
            p[k] = &p[k] + &s.weight;
        }
        Coupling { p }
    }

    /// `Σ_λ A_x(λ)·B_y(λ)·p(λ)` for one context, straight from the hidden states.
    pub fn correlation(&self, context: Context) -> BigRational {
        self.states.iter().fold(BigRational::zero(), |acc, s| {
            let (a, b) = s.response(context);
            if a == b {
                acc + &s.weight
            } else {
                acc - &s.weight
            }
        })
    }

    /// `P(A_setting = +1)` summed directly over hidden states.
    pub fn alice_plus(&self, setting: Setting) -> BigRational {
        self.states
            .iter()
            .filter(|s| s.omega().alice(setting) == Outcome::Plus)
            .map(|s| s.weight.clone())
            .sum()
    }

    pub fn bob_plus(&self, setting: Setting) -> BigRational {
        self.states
            .iter()
            .filter(|s| s.omega().bob(setting) == Outcome::Plus)
            .map(|s| s.weight.clone())
            .sum()
    }
}

pub fn build_coupling(model: &HvModel) -> CouplingJp {
    model.coupling()
}

pub fn behavior_of<T: Scalar>(coupling: &Coupling<T>) -> Behavior<T> {
    coupling.behavior()
}

pub fn four_product_expectation<T: Scalar>(coupling: &Coupling<T>) -> T {
    coupling.four_product_expectation()
}

/// Six equally likely hidden states (a die roll) with `A_x(λ) = x^λ` and
/// `B_y(λ) = y^(λ+1)`, where `x, y ∈ {1, -1}` map to settings 1 and 2.
pub fn lf_counterexample() -> HvModel {
    let power = |base: i8, exp: u32| Outcome::from_sign(i64::from(base.pow(exp))).expect("±1 power");
    let states = (1u32..=6)
        .map(|lambda| {
            let resp = |f: &dyn Fn(i8) -> Outcome| Setting::ALL.map(|s| f(s.alias()));
            HiddenState {
                weight: BigRational::from_ratio(1, 6),
                alice: resp(&|x| power(x, lambda)),
                bob: resp(&|y| power(y, lambda + 1)),
            }
        })
        .collect();
    HvModel::new(states).expect("uniform die")
}
