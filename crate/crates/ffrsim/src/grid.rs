//! Uniform-frequency grid model.
//!
//! A ten-machine fleet is reduced to a single center-of-inertia (COI)
//! frequency state driven by the per-unit swing equation. Each generator
//! keeps its own first-order droop governor with deadband and headroom
//! limits. A generation-trip disturbance removes one machine (its inertia
//! and governor) and injects the lost power as a step imbalance.
//!
//! All powers are per-unit on `system_base`; energies are pu·s; frequency
//! deviation is kept in Hz.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("inertia sum must be positive")]
    ZeroInertia,
    #[error("frequency and inertia lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no frequency stiffness: D + sum(1/R) is zero")]
    ZeroStiffness,
    #[error("unknown or offline generator '{0}'")]
    UnknownGenerator(String),
}

// ============================================================================
// Model types
// ============================================================================

/// Static parameters of one synchronous generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub id: String,
    /// Machine rating, MVA.
    pub rating_mva: f64,
    /// Inertia constant on the machine's own rating, seconds.
    pub inertia_h_s: f64,
    /// Speed droop expressed on the system base (per-unit frequency change
    /// per per-unit power change).
    pub droop_r: f64,
    /// Governor lag time constant, seconds.
    pub gov_time_const_s: f64,
    /// Governor deadband on |Δf|, Hz. Hard zero zone, no offset ramp.
    pub gov_deadband_hz: f64,
    /// Maximum incremental governor output, pu on system base.
    pub headroom_pu: f64,
    /// Scheduled output before the disturbance, pu on system base.
    pub pre_fault_output_pu: f64,
    pub online: bool,
}

/// Fleet plus system-level constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridModel {
    pub generators: Vec<GeneratorParams>,
    /// System power base, MVA.
    pub system_base_mva: f64,
    /// Nominal frequency, Hz.
    pub f0_hz: f64,
    /// Load damping, pu power per pu frequency.
    pub load_damping_d: f64,
    /// Uniform inertia reduction factor in (0, 1].
    pub inertia_scale: f64,
}

impl GridModel {
    /// Effective system inertia constant, pu·s on the system base.
    /// Offline machines contribute nothing.
    pub fn h_sys(&self) -> f64 {
        let raw: f64 = self
            .generators
            .iter()
            .filter(|g| g.online)
            .map(|g| g.inertia_h_s * g.rating_mva / self.system_base_mva)
            .sum();
        self.inertia_scale * raw
    }

    pub fn generator(&self, id: &str) -> Option<&GeneratorParams> {
        self.generators.iter().find(|g| g.id == id)
    }

    /// Id of the online generator with the largest scheduled output.
    pub fn largest_online_generator(&self) -> Option<&GeneratorParams> {
        self.generators
            .iter()
            .filter(|g| g.online)
            .max_by(|a, b| {
                a.pre_fault_output_pu
                    .partial_cmp(&b.pre_fault_output_pu)
                    .unwrap()
            })
    }
}

/// Dynamic grid state advanced by the integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    /// COI frequency deviation Δf = f − f0, Hz.
    pub delta_f_hz: f64,
    /// Incremental governor output per generator, pu on system base.
    /// Zero and frozen for offline machines.
    pub gov_outputs: Vec<f64>,
    pub time_s: f64,
}

impl GridState {
    pub fn at_equilibrium(model: &GridModel) -> Self {
        GridState {
            delta_f_hz: 0.0,
            gov_outputs: vec![0.0; model.generators.len()],
            time_s: 0.0,
        }
    }

    pub fn gov_total(&self) -> f64 {
        self.gov_outputs.iter().sum()
    }
}

/// Time derivatives of `GridState`.
#[derive(Debug, Clone)]
pub struct GridDerivative {
    pub d_delta_f_hz: f64,
    pub d_gov_outputs: Vec<f64>,
}

/// A scheduled generation-loss event: before `t_trip_s` the pre-trip model
/// applies with no imbalance, from `t_trip_s` on the tripped machine is
/// offline and `p_disturbance_pu` is the lost injection.
#[derive(Debug, Clone)]
pub struct TripEvent {
    pub t_trip_s: f64,
    pub post_model: GridModel,
    pub p_disturbance_pu: f64,
}

// ============================================================================
// Operations
// ============================================================================

/// Inertia-weighted average frequency Σ Hᵢfᵢ / Σ Hᵢ.
pub fn coi_frequency(freqs_hz: &[f64], inertias: &[f64]) -> Result<f64, GridError> {
    if freqs_hz.len() != inertias.len() {
        return Err(GridError::LengthMismatch(freqs_hz.len(), inertias.len()));
    }
    let h_sum: f64 = inertias.iter().sum();
    if h_sum <= 0.0 {
        return Err(GridError::ZeroInertia);
    }
    let weighted: f64 = freqs_hz
        .iter()
        .zip(inertias)
        .map(|(f, h)| f * h)
        .sum();
    Ok(weighted / h_sum)
}

/// Governor power target for one machine at the given COI deviation.
/// The deadband zeroes the input; outside it the full droop signal applies.
fn governor_target(gen: &GeneratorParams, delta_f_hz: f64, f0_hz: f64) -> f64 {
    if !gen.online || delta_f_hz.abs() <= gen.gov_deadband_hz {
        return 0.0;
    }
    let delta_f_pu = delta_f_hz / f0_hz;
    (-delta_f_pu / gen.droop_r).clamp(0.0, gen.headroom_pu)
}

/// Right-hand side of the swing + governor ODEs.
///
/// d(Δf_pu)/dt = (Σ gov + p_ffr − p_dist − D·Δf_pu) / (2·H_sys),
/// dP_g/dt = (target_g − P_g)/T_g.
pub fn system_derivative(
    state: &GridState,
    p_ffr_total_pu: f64,
    p_disturbance_pu: f64,
    model: &GridModel,
) -> GridDerivative {
    let h_sys = model.h_sys();
    let delta_f_pu = state.delta_f_hz / model.f0_hz;
    let gov_total = state.gov_total();
    let d_delta_f_pu = (gov_total + p_ffr_total_pu
        - p_disturbance_pu
        - model.load_damping_d * delta_f_pu)
        / (2.0 * h_sys);
    let d_gov = model
        .generators
        .iter()
        .zip(&state.gov_outputs)
        .map(|(gen, &p)| {
            if gen.online {
                (governor_target(gen, state.delta_f_hz, model.f0_hz) - p) / gen.gov_time_const_s
            } else {
                0.0
            }
        })
        .collect();
    GridDerivative {
        d_delta_f_hz: d_delta_f_pu * model.f0_hz,
        d_gov_outputs: d_gov,
    }
}

/// Closed-form post-disturbance frequency offset assuming every online
/// governor stays inside its limits and deadbands are not binding:
/// Δf_ss = −f0·p_dist / (D + Σ 1/R).
pub fn steady_state_frequency(model: &GridModel, p_disturbance_pu: f64) -> Result<f64, GridError> {
    let stiffness: f64 = model
        .generators
        .iter()
        .filter(|g| g.online)
        .map(|g| 1.0 / g.droop_r)
        .sum::<f64>()
        + model.load_damping_d;
    if stiffness == 0.0 {
        return Err(GridError::ZeroStiffness);
    }
    Ok(-model.f0_hz * p_disturbance_pu / stiffness)
}

/// Trip one online generator at `t_trip_s`. The returned event carries the
/// post-trip model (machine offline) and the lost injection.
pub fn apply_disturbance(
    model: &GridModel,
    gen_id: &str,
    t_trip_s: f64,
) -> Result<TripEvent, GridError> {
    let gen = model
        .generator(gen_id)
        .filter(|g| g.online)
        .ok_or_else(|| GridError::UnknownGenerator(gen_id.to_string()))?;
    let p_disturbance_pu = gen.pre_fault_output_pu;
    let mut post_model = model.clone();
    for g in &mut post_model.generators {
        if g.id == gen_id {
            g.online = false;
        }
    }
    Ok(TripEvent {
        t_trip_s,
        post_model,
        p_disturbance_pu,
    })
}

// ============================================================================
// Tests
// ============================================================================
