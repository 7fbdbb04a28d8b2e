//! Frequency-stability and utilization metrics over recorded trajectories.
//!
//! - nadir: lowest recorded frequency and its first attainment time
//! - RoCoF: steepest windowed slope (robust to sampling, signed)
//! - recovery time: first dwell-confirmed return into a band around nominal
//! - secondary dip: deepest prominent local minimum after the nadir
//! - utilization: peak power, energy used, saturated time per resource
//!
//! Reported times are relative to the event instant when one exists,
//! otherwise to the start of the trajectory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Trajectory;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("rocof window {0} s is smaller than the recording interval {1} s")]
    WindowTooSmall(f64, f64),
}

/// Threshold knobs, all overridable from the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSettings {
    /// Averaging window for the RoCoF metric, seconds.
    pub rocof_window_s: f64,
    /// Half-width of the recovery band around nominal, Hz. Doubles as the
    /// level threshold for secondary-dip detection.
    pub recovery_deadband_hz: f64,
    /// Time the frequency must stay inside the band to count as recovered.
    pub dwell_s: f64,
    /// Minimum prominence of a post-nadir local minimum, Hz.
    pub dip_prominence_hz: f64,
}

impl Default for MetricsSettings {
    fn default() -> Self {
        MetricsSettings {
            rocof_window_s: 0.5,
            recovery_deadband_hz: 0.05,
            dwell_s: 5.0,
            dip_prominence_hz: 0.02,
        }
    }
}

/// Per-resource utilization figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceUtilization {
    pub id: String,
    pub peak_power_pu: f64,
    pub energy_used_pus: f64,
    pub time_saturated_s: f64,
}

/// Everything the comparison harness reports per case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub case_id: u8,
    pub nadir_hz: f64,
    /// Relative to the event (or trajectory start without one), seconds.
    pub nadir_time_s: f64,
    pub max_rocof_hz_per_s: f64,
    pub recovery_time_s: Option<f64>,
    pub secondary_dip: Option<SecondaryDip>,
    pub resources: Vec<ResourceUtilization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondaryDip {
    /// Relative to the event (or trajectory start), seconds.
    pub time_s: f64,
    /// Depth below nominal, Hz (positive).
    pub depth_hz: f64,
}

// ============================================================================
// Individual metrics
// ============================================================================

/// Minimum recorded frequency and its first attainment time (absolute).
pub fn frequency_nadir(traj: &Trajectory) -> Result<(f64, f64), MetricsError> {
    if traj.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    let mut best = (traj.f_hz[0], traj.times_s[0]);
    for (&f, &t) in traj.f_hz.iter().zip(&traj.times_s) {
        if f < best.0 {
            best = (f, t);
        }
    }
    Ok(best)
}

/// Steepest slope over a sliding window of recorded samples, signed by the
/// direction of the steepest excursion.
pub fn max_rocof(traj: &Trajectory, window_s: f64) -> Result<f64, MetricsError> {
    if traj.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    let dt = traj.sample_dt();
    if dt <= 0.0 || window_s < dt {
        return Err(MetricsError::WindowTooSmall(window_s, dt));
    }
    let k = (window_s / dt).round() as usize;
    let mut best = 0.0f64;
    for i in k..traj.len() {
        let slope = (traj.f_hz[i] - traj.f_hz[i - k]) / (traj.times_s[i] - traj.times_s[i - k]);
        if slope.abs() > best.abs() {
            best = slope;
        }
    }
    Ok(best)
}

fn time_origin(traj: &Trajectory) -> f64 {
    traj.event_time_s.unwrap_or_else(|| traj.times_s[0])
}

/// First instant at or after the nadir from which the frequency stays
/// inside `f0 ± deadband` for `dwell` seconds, reported relative to the
/// event. `None` when the trajectory never qualifies (including when it
/// ends before the dwell can be confirmed).
pub fn recovery_time(
    traj: &Trajectory,
    deadband_hz: f64,
    dwell_s: f64,
) -> Result<Option<f64>, MetricsError> {
    let (_, nadir_t) = frequency_nadir(traj)?;
    let f0 = traj.f0_hz;
    let in_band = |f: f64| (f - f0).abs() <= deadband_hz;
    let n = traj.len();
    let mut i = traj.times_s.iter().position(|&t| t >= nadir_t).unwrap_or(0);
    while i < n {
        if in_band(traj.f_hz[i]) {
            let t_start = traj.times_s[i];
            let mut j = i;
            let mut confirmed = false;
            while j < n {
                if !in_band(traj.f_hz[j]) {
                    break;
                }
                if traj.times_s[j] - t_start >= dwell_s {
                    confirmed = true;
                    break;
                }
                j += 1;
            }
            if confirmed {
                return Ok(Some(t_start - time_origin(traj)));
            }
            i = j.max(i + 1);
        } else {
            i += 1;
        }
    }
    Ok(None)
}

/// Deepest local minimum strictly after the nadir with prominence at least
/// `prominence_hz` and value below `f0 - level_hz`.
///
/// Prominence of a candidate is the smaller of the rebounds to the highest
/// samples between the candidate and the nearest lower sample (or the
/// trajectory edge) on each side; terminal monotone declines never qualify.
pub fn secondary_dip(
    traj: &Trajectory,
    prominence_hz: f64,
    level_hz: f64,
) -> Result<Option<SecondaryDip>, MetricsError> {
    let (_, nadir_t) = frequency_nadir(traj)?;
    let f0 = traj.f0_hz;
    let n = traj.len();
    let start = traj
        .times_s
        .iter()
        .position(|&t| t > nadir_t)
        .unwrap_or(n);

    let mut best: Option<(f64, f64)> = None; // (f_value, time)
    for i in start.max(1)..n.saturating_sub(1) {
        let f = traj.f_hz[i];
        if !(traj.f_hz[i - 1] > f && f < traj.f_hz[i + 1]) {
            continue; // not a strict local minimum
        }
        if f >= f0 - level_hz {
            continue;
        }
        // climb left until a sample lower than f (or the edge); the highest
        // point seen bounds the left rebound
        let mut left_peak = f;
        let mut j = i;
        while j > 0 {
            j -= 1;
            if traj.f_hz[j] < f {
                break;
            }
            left_peak = left_peak.max(traj.f_hz[j]);
        }
        let mut right_peak = f;
        let mut j = i;
        while j + 1 < n {
            j += 1;
            if traj.f_hz[j] < f {
                break;
            }
            right_peak = right_peak.max(traj.f_hz[j]);
        }
        let prominence = (left_peak - f).min(right_peak - f);
        if prominence >= prominence_hz && best.map_or(true, |(bf, _)| f < bf) {
            best = Some((f, traj.times_s[i]));
        }
    }
    Ok(best.map(|(f, t)| SecondaryDip {
        time_s: t - time_origin(traj),
        depth_hz: f0 - f,
    }))
}

/// Peak power, trapezoidal energy delivered, and time spent energy-saturated
/// per resource, from the recorded samples.
pub fn utilization_summary(traj: &Trajectory) -> Vec<ResourceUtilization> {
    let dt = traj.sample_dt();
    traj.resources
        .iter()
        .map(|trace| {
            let peak = trace.p_out_pu.iter().copied().fold(0.0, f64::max);
            let mut energy = 0.0;
            for w in trace.p_out_pu.windows(2) {
                energy += 0.5 * (w[0] + w[1]) * dt;
            }
            let saturated_samples = trace
                .energy_remaining_pus
                .iter()
                .filter(|&&e| e == 0.0)
                .count();
            ResourceUtilization {
                id: trace.id.clone(),
                peak_power_pu: peak,
                energy_used_pus: energy,
                time_saturated_s: saturated_samples as f64 * dt,
            }
        })
        .collect()
}

/// Assemble the full report for one case run.
pub fn metrics_report(
    traj: &Trajectory,
    settings: &MetricsSettings,
    case_id: u8,
) -> Result<MetricsReport, MetricsError> {
    let (nadir_hz, nadir_t_abs) = frequency_nadir(traj)?;
    Ok(MetricsReport {
        case_id,
        nadir_hz,
        nadir_time_s: nadir_t_abs - time_origin(traj),
        max_rocof_hz_per_s: max_rocof(traj, settings.rocof_window_s)?,
        recovery_time_s: recovery_time(traj, settings.recovery_deadband_hz, settings.dwell_s)?,
        secondary_dip: secondary_dip(
            traj,
            settings.dip_prominence_hz,
            settings.recovery_deadband_hz,
        )?,
        resources: utilization_summary(traj),
    })
}

// ============================================================================
// Tests
// ============================================================================
