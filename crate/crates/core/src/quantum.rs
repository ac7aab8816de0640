//! Quantum predictions for two qubits measured along directions in one Bloch
//! plane. Serves as the reference for every quantum-valued behavior.
//!
//! Angles use the spin convention: the observable for angle `θ` is
//! `cos θ·σz + sin θ·σx`. Polarizer angles are converted with
//! [`MeasurementAngle::polarizer`], which doubles them.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::behavior::{Behavior, Context, Outcome, OutcomeDist, Setting};
use crate::error::{Error, Result};

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementAngle(f64);

impl MeasurementAngle {
    /// Spin-convention angle, reduced to `[0, 2π)`.
    pub fn from_radians(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("angle must be finite, got {theta}")));
        }
        Ok(MeasurementAngle(theta.rem_euclid(TAU)))
    }

    pub fn from_degrees(degrees: f64) -> Result<Self> {
        Self::from_radians(degrees.to_radians())
    }

    /// Polarizer orientation `θ` (radians); the equivalent spin angle is `2θ`.
    pub fn polarizer(theta: f64) -> Result<Self> {
        Self::from_radians(2.0 * theta)
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// `cos θ·σz + sin θ·σx`.
pub fn observable(angle: MeasurementAngle) -> Mat2 {
    let (s, c) = angle.radians().sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(-c, 0.0)],
    ]
}

/// Eigenvalues of a 2x2 Hermitian matrix, ascending.
pub fn eigenvalues2(m: &Mat2) -> [f64; 2] {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let off = m[0][1].norm();
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + off * off).sqrt();
    [mean - r, mean + r]
}

fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn trace_of_product(a: &Mat4, b: &Mat4) -> Complex64 {
    let mut t = ZERO;
    for i in 0..4 {
        for k in 0..4 {
            t += a[i][k] * b[k][i];
        }
    }
    t
}

/// Projector onto the `outcome` eigenspace of `observable(angle)`: `(I ± Â)/2`.
fn projector(angle: MeasurementAngle, outcome: Outcome) -> Mat2 {
    let obs = observable(angle);
    let s = f64::from(outcome.sign());
    let mut p = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            p[i][j] = (Complex64::new(id, 0.0) + obs[i][j] * s) * 0.5;
        }
    }
    p
}

/// A validated two-qubit density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix4 {
    entries: Mat4,
}

impl DensityMatrix4 {
    pub fn new(entries: Mat4) -> Result<Self> {
        for i in 0..4 {
            for j in 0..4 {
                if !(entries[i][j].re.is_finite() && entries[i][j].im.is_finite()) {
                    return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
                }
                if (entries[i][j] - entries[j][i].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidDensityMatrix(format!("not Hermitian at ({i},{j})")));
                }
            }
        }
        let trace: f64 = (0..4).map(|i| entries[i][i].re).sum();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {trace}, not 1")));
        }
        let lowest = hermitian_eigenvalues(&entries)[0];
        if lowest < -EIGEN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {lowest}")));
        }
        Ok(DensityMatrix4 { entries })
    }

    /// Pure state `|ψ⟩⟨ψ|` from amplitudes in the `|00⟩, |01⟩, |10⟩, |11⟩` basis.
    pub fn pure(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensityMatrix("zero state vector".into()));
        }
        let mut m = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = amplitudes[i] * amplitudes[j].conj() / norm;
            }
        }
        Self::new(m)
    }

    /// `(|01⟩ - |10⟩)/√2`.
    pub fn singlet() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::pure([ZERO, Complex64::new(h, 0.0), Complex64::new(-h, 0.0), ZERO]).expect("singlet is a valid state")
    }

    pub fn entries(&self) -> &Mat4 {
        &self.entries
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.entries)
    }
}

/// `Tr(ρ · (Â ⊗ B̂))`.
pub fn trace_expectation(rho: &DensityMatrix4, alice: MeasurementAngle, bob: MeasurementAngle) -> f64 {
    let t = trace_of_product(rho.entries(), &kron(&observable(alice), &observable(bob)));
    debug_assert!(t.im.abs() <= 1e-12, "imaginary residue {}", t.im);
    t.re
}

/// `p(a, b) = Tr(ρ · (P_a ⊗ P_b))` for one pair of directions.
pub fn joint_distribution(
    rho: &DensityMatrix4,
    alice: MeasurementAngle,
    bob: MeasurementAngle,
) -> Result<OutcomeDist<f64>> {
    let mut p = [[0.0; 2]; 2];
    for a in Outcome::ALL {
        for b in Outcome::ALL {
            let op = kron(&projector(alice, a), &projector(bob, b));
            // Rounding can leave a -1e-17 on zero-probability outcomes.
            p[a.bit() as usize][b.bit() as usize] = trace_of_product(rho.entries(), &op).re.max(0.0);
        }
    }
    OutcomeDist::new(p)
}

/// Behavior of an arbitrary two-qubit state for Alice's directions
/// `[a1, a2]` and Bob's `[b1, b2]`.
pub fn state_behavior(
    rho: &DensityMatrix4,
    alice: [MeasurementAngle; 2],
    bob: [MeasurementAngle; 2],
) -> Result<Behavior<f64>> {
    let entries = Context::ALL
        .iter()
        .map(|&c| Ok((c, joint_distribution(rho, pick(&alice, c.alice), pick(&bob, c.bob))?)))
        .collect::<Result<Vec<_>>>()?;
    Behavior::from_contexts(entries)
}

fn pick(angles: &[MeasurementAngle; 2], setting: Setting) -> MeasurementAngle {
    match setting {
        Setting::First => angles[0],
        Setting::Second => angles[1],
    }
}

/// Singlet behavior in closed form: `p_xy(a,b) = (1 - a·b·cos(θx - θy))/4`.
pub fn singlet_behavior(
    a1: MeasurementAngle,
    a2: MeasurementAngle,
    b1: MeasurementAngle,
    b2: MeasurementAngle,
) -> Behavior<f64> {
    let alice = [a1, a2];
    let bob = [b1, b2];
    let dists = Context::ALL.map(|c| {
        let cos = (pick(&alice, c.alice).radians() - pick(&bob, c.bob).radians()).cos();
        let same = (1.0 - cos) / 4.0;
        let diff = (1.0 + cos) / 4.0;
        OutcomeDist::new([[same, diff], [diff, same]]).expect("entries lie in [0, 1/2] and sum to 1")
    });
    Behavior::new(dists)
}

/// Eigenvalues (ascending) of a 4x4 Hermitian matrix via cyclic Jacobi on its
/// real 8x8 embedding `[[Re, -Im], [Im, Re]]`, which doubles every eigenvalue.
pub fn hermitian_eigenvalues(m: &Mat4) -> [f64; 4] {
    let mut a = [[0.0f64; 8]; 8];
    for i in 0..4 {
        for j in 0..4 {
            let z = m[i][j];
            a[i][j] = z.re;
            a[i + 4][j + 4] = z.re;
            a[i][j + 4] = -z.im;
            a[i + 4][j] = z.im;
        }
    }
    // Symmetrize away rounding from the Hermitian check tolerance.
    for i in 0..8 {
        for j in 0..i {
            let v = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    jacobi_eigenvalues(&mut a);
    let mut ev: Vec<f64> = (0..8).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[2], ev[4], ev[6]]
}

fn jacobi_eigenvalues<const N: usize>(a: &mut [[f64; N]; N]) {
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            return;
        }
        for p in 0..N {
            for q in p + 1..N {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
}
