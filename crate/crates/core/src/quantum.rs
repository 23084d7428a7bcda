//! Measurement statistics of BB84 qubits and of the `|Φ+>` Bell pair.
//!
//! States are never represented by amplitudes. A qubit `|γ>_σ` is a Bloch
//! vector in the x–z plane at angle `θ_σ + γπ`, where basis 0 sits on the z
//! axis and basis 1 on the x axis; measuring the observable at angle `φ`
//! yields outcome bit 0 with probability `(1 + cos(φ - θ))/2`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{QpcError, Result};
use crate::rng::Rng;

/// Measurement basis `σ`: 0 is the z basis, 1 the x basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Basis(u8);

impl Basis {
    pub const Z: Basis = Basis(0);
    pub const X: Basis = Basis(1);

    pub fn from_bit(bit: u8) -> Self {
        Basis(bit & 1)
    }

    pub fn bit(self) -> u8 {
        self.0
    }

    pub fn angle(self) -> f64 {
        if self.0 == 0 {
            0.0
        } else {
            FRAC_PI_2
        }
    }
}

/// One of the four states `|γ>_σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitState {
    pub gamma: u8,
    pub basis: Basis,
}

impl QubitState {
    pub fn new(gamma: u8, basis: Basis) -> Self {
        Self {
            gamma: gamma & 1,
            basis,
        }
    }

    pub fn bloch_angle(self) -> f64 {
        self.basis.angle() + if self.gamma == 1 { PI } else { 0.0 }
    }
}

/// Observable direction for box input `k`: `σ_z`, `σ_x`, `(σ_z + σ_x)/√2`,
/// `(σ_z − σ_x)/√2`.
pub fn input_angle(k: u8) -> f64 {
    match k {
        0 => 0.0,
        1 => FRAC_PI_2,
        2 => FRAC_PI_4,
        3 => -FRAC_PI_4,
        _ => panic!("box input {k} out of range"),
    }
}

/// Angle halfway between the two bases; measuring here guesses an unknown
/// BB84 bit with the optimal probability `cos²(π/8)`.
pub const INTERMEDIATE_ANGLE: f64 = FRAC_PI_4;

/// Measure `state` in `basis`. Matching bases reproduce `γ` exactly.
pub fn measure_qubit(state: QubitState, basis: Basis, rng: &mut Rng) -> u8 {
    if basis == state.basis {
        return state.gamma;
    }
    measure_qubit_at(state, basis.angle(), rng)
}

/// Measure `state` along the observable at `angle` in the x–z plane.
pub fn measure_qubit_at(state: QubitState, angle: f64, rng: &mut Rng) -> u8 {
    let p_zero = ((1.0 + (angle - state.bloch_angle()).cos()) / 2.0).clamp(0.0, 1.0);
    if rng.bernoulli(p_zero) {
        0
    } else {
        1
    }
}

/// `<Φ+| A(θ_A) ⊗ B(θ_B) |Φ+>` for x–z plane observables.
pub fn bell_correlator(theta_a: f64, theta_b: f64) -> f64 {
    (theta_a - theta_b).cos()
}

/// Probability that two outcomes with correlator `corr` agree.
pub fn agreement_probability(corr: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&corr) {
        return Err(QpcError::CorrelatorOutOfRange(corr));
    }
    Ok((1.0 + corr) / 2.0)
}

/// Draw the second outcome of a pair given the first one.
pub fn sample_conditioned(first: i8, corr: f64, rng: &mut Rng) -> Result<i8> {
    let p_equal = agreement_probability(corr)?;
    Ok(if rng.bernoulli(p_equal) { first } else { -first })
}

/// Draw `(a, b)` in `{+1, −1}²` with uniform marginals and correlator `corr`.
/// `a` is drawn first and never depends on anything but `rng`.
pub fn sample_correlated_pair(corr: f64, rng: &mut Rng) -> Result<(i8, i8)> {
    agreement_probability(corr)?;
    let a = if rng.bit() == 0 { 1 } else { -1 };
    let b = sample_conditioned(a, corr, rng)?;
    Ok((a, b))
}
