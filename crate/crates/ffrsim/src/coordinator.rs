//! Service-layer coordination of heterogeneous fast-response resources.
//!
//! Frequency support is split into three time-windowed service layers:
//!
//! - **Arrest**: the first seconds after the event, reserved for
//!   low-latency devices that can blunt the initial fall.
//! - **Sustained**: the multi-second stabilization window.
//! - **EnergyFollowing**: open-ended support through recovery, carried by
//!   energy-rich resources.
//!
//! A resource is eligible for every layer whose latency ceiling it meets.
//! The coordinator turns layer activity windows and per-resource energy
//! headroom into participation weights in [0, 1] that multiply the local
//! droop response. Four coordination modes reproduce the comparison cases:
//! no response at all, undifferentiated full-weight droop, fixed
//! rectangular layer windows, and the full dynamic scheme with smooth
//! handoffs and anti-saturation tapering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resource::{FfrResource, ResourceState};

#[derive(Debug, Error, PartialEq)]
pub enum CoordError {
    #[error("resource latency {0} s exceeds every layer ceiling")]
    TooSlow(f64),
    #[error("no event detected yet")]
    NotTriggered,
}

// ============================================================================
// Service layers
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerId {
    Arrest,
    Sustained,
    EnergyFollowing,
}

/// One service layer: an eligibility latency ceiling plus raised-cosine
/// fade-in/fade-out windows relative to the event instant. A missing
/// fade-out means the layer stays active forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceLayer {
    pub id: LayerId,
    /// Slowest admissible resource latency, seconds.
    pub tau_max_s: f64,
    /// (start, end) of the activation ramp, seconds after the event.
    pub fade_in: (f64, f64),
    /// (start, end) of the release ramp, or None for open-ended.
    pub fade_out: Option<(f64, f64)>,
}

/// The three layers in fixed order: Arrest, Sustained, EnergyFollowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSet {
    pub arrest: ServiceLayer,
    pub sustained: ServiceLayer,
    pub energy_following: ServiceLayer,
}

impl LayerSet {
    pub fn as_array(&self) -> [&ServiceLayer; 3] {
        [&self.arrest, &self.sustained, &self.energy_following]
    }

    /// Largest latency any layer admits.
    pub fn slowest_ceiling(&self) -> f64 {
        self.as_array()
            .iter()
            .map(|l| l.tau_max_s)
            .fold(f64::MIN, f64::max)
    }
}

impl Default for LayerSet {
    fn default() -> Self {
        LayerSet {
            arrest: ServiceLayer {
                id: LayerId::Arrest,
                tau_max_s: 0.2,
                fade_in: (0.0, 0.1),
                fade_out: Some((1.0, 3.0)),
            },
            sustained: ServiceLayer {
                id: LayerId::Sustained,
                tau_max_s: 2.0,
                fade_in: (0.0, 2.0),
                fade_out: Some((8.0, 15.0)),
            },
            energy_following: ServiceLayer {
                id: LayerId::EnergyFollowing,
                tau_max_s: 30.0,
                fade_in: (3.0, 8.0),
                fade_out: None,
            },
        }
    }
}

// ============================================================================
// Allocation state
// ============================================================================

/// Coordination mode, one per comparison case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinationMode {
    /// Case 1: flexible resources do not respond at all.
    NoFfr,
    /// Case 2: every resource at full weight for the whole event.
    Unstructured,
    /// Case 3: fastest eligible layer only, rectangular windows, no taper.
    StaticLayers,
    /// Case 4: blended layer activities with anti-saturation tapering.
    Dynamic,
}

/// Coordinator state advanced once per integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    pub mode: CoordinationMode,
    /// Instant the trigger threshold was first crossed, if it has been.
    pub event_time_s: Option<f64>,
    /// Participation weight per resource, aligned with the roster.
    pub weights: Vec<f64>,
    /// Anti-saturation taper per resource (informational outside Dynamic).
    pub taper: Vec<f64>,
}

impl AllocationState {
    pub fn new(mode: CoordinationMode, n_resources: usize) -> Self {
        AllocationState {
            mode,
            event_time_s: None,
            weights: vec![0.0; n_resources],
            taper: vec![1.0; n_resources],
        }
    }
}

// ============================================================================
// Operations
// ============================================================================

/// Layers whose latency ceiling the resource meets, fastest first.
/// A resource slower than every ceiling cannot participate at all.
pub fn layer_eligibility(
    res: &FfrResource,
    layers: &LayerSet,
) -> Result<Vec<LayerId>, CoordError> {
    let eligible: Vec<LayerId> = layers
        .as_array()
        .iter()
        .filter(|l| res.latency_tau_s <= l.tau_max_s)
        .map(|l| l.id)
        .collect();
    if eligible.is_empty() {
        return Err(CoordError::TooSlow(res.latency_tau_s));
    }
    Ok(eligible)
}

/// C0 activity profile of a layer at `t_rel` seconds after the event:
/// 0 before the fade-in, a raised-cosine ramp to 1, a plateau, and a
/// raised-cosine ramp back to 0 (or 1 forever when open-ended).
pub fn layer_activity(layer: &ServiceLayer, t_rel_s: f64) -> f64 {
    debug_assert!(t_rel_s >= 0.0);
    let (in_start, in_end) = layer.fade_in;
    if t_rel_s < in_start {
        return 0.0;
    }
    if t_rel_s < in_end {
        let u = (t_rel_s - in_start) / (in_end - in_start);
        return 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
    }
    match layer.fade_out {
        None => 1.0,
        Some((out_start, out_end)) => {
            if t_rel_s < out_start {
                1.0
            } else if t_rel_s < out_end {
                let u = (t_rel_s - out_start) / (out_end - out_start);
                0.5 * (1.0 + (std::f64::consts::PI * u).cos())
            } else {
                0.0
            }
        }
    }
}

/// Rectangular window membership used by the static-layers mode: the layer
/// counts as on from the start of its fade-in (inclusive) to the end of its
/// fade-out (exclusive), with no blending.
fn layer_window_contains(layer: &ServiceLayer, t_rel_s: f64) -> bool {
    if t_rel_s < layer.fade_in.0 {
        return false;
    }
    match layer.fade_out {
        None => true,
        Some((_, out_end)) => t_rel_s < out_end,
    }
}

/// Anti-saturation weight factor from the remaining energy fraction e:
/// full participation above 20%, then a linear taper to zero.
pub fn saturation_taper(state: &ResourceState, res: &FfrResource) -> f64 {
    let e = state.energy_remaining_pus / res.energy_budget_pus;
    if e >= 0.2 {
        1.0
    } else if e > 0.0 {
        e / 0.2
    } else {
        0.0
    }
}

/// First crossing of the trigger threshold latches the event time;
/// later calls leave it untouched.
pub fn detect_event(
    delta_f_hz: f64,
    t_s: f64,
    alloc: &AllocationState,
    trigger_threshold_hz: f64,
) -> AllocationState {
    let mut next = alloc.clone();
    if next.event_time_s.is_none() && delta_f_hz.abs() > trigger_threshold_hz {
        next.event_time_s = Some(t_s);
    }
    next
}

/// Recompute participation weights for the current instant.
///
/// Mode semantics:
/// - `NoFfr`: all weights zero.
/// - `Unstructured`: weight 1 for every resource from the event on.
/// - `StaticLayers`: each resource rides only its fastest eligible layer;
///   weight 1 inside that layer's rectangular window, else 0. No taper.
/// - `Dynamic`: weight = taper × max of the eligible layers' activities.
///
/// Returns `NotTriggered` before the event; the caller keeps weights zero.
pub fn allocate_weights(
    t_now_s: f64,
    alloc: &AllocationState,
    resources: &[FfrResource],
    states: &[ResourceState],
    layers: &LayerSet,
) -> Result<AllocationState, CoordError> {
    let mut next = alloc.clone();
    for (i, (res, st)) in resources.iter().zip(states).enumerate() {
        next.taper[i] = saturation_taper(st, res);
    }
    let event_time = next.event_time_s.ok_or(CoordError::NotTriggered)?;
    let t_rel = t_now_s - event_time;

    for (i, res) in resources.iter().enumerate() {
        let weight = match next.mode {
            CoordinationMode::NoFfr => 0.0,
            CoordinationMode::Unstructured => 1.0,
            CoordinationMode::StaticLayers => {
                let fastest = layer_eligibility(res, layers)?
                    .into_iter()
                    .next()
                    .expect("eligibility is never empty");
                let layer = layers
                    .as_array()
                    .into_iter()
                    .find(|l| l.id == fastest)
                    .unwrap();
                if layer_window_contains(layer, t_rel) {
                    1.0
                } else {
                    0.0
                }
            }
            CoordinationMode::Dynamic => {
                let act = layers
                    .as_array()
                    .into_iter()
                    .filter(|l| res.latency_tau_s <= l.tau_max_s)
                    .map(|l| layer_activity(l, t_rel))
                    .fold(0.0, f64::max);
                next.taper[i] * act
            }
        };
        next.weights[i] = weight;
    }
    Ok(next)
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::{make_preset, ResourceClass};

    fn fresh_states(resources: &[FfrResource]) -> Vec<ResourceState> {
        resources
            .iter()
            .map(|r| ResourceState::new(r, 1e-3))
            .collect()
    }

    #[test]
    fn eligibility_thresholds_on_presets() {
        let layers = LayerSet::default();
        let bess = make_preset(ResourceClass::Bess);
        assert_eq!(
            layer_eligibility(&bess, &layers).unwrap(),
            vec![LayerId::Arrest, LayerId::Sustained, LayerId::EnergyFollowing]
        );
        let dc = make_preset(ResourceClass::DataCenter);
        assert_eq!(
            layer_eligibility(&dc, &layers).unwrap(),
            vec![LayerId::Sustained, LayerId::EnergyFollowing]
        );
        let ev = make_preset(ResourceClass::EvFleet);
        assert_eq!(
            layer_eligibility(&ev, &layers).unwrap(),
            vec![LayerId::EnergyFollowing]
        );
    }

    #[test]
    fn eligibility_rejects_resources_slower_than_every_layer() {
        let layers = LayerSet::default();
        let mut slow = make_preset(ResourceClass::EvFleet);
        slow.latency_tau_s = 50.0;
        assert_eq!(
            layer_eligibility(&slow, &layers),
            Err(CoordError::TooSlow(50.0))
        );
    }

    #[test]
    fn eligibility_monotone_in_latency() {
        let layers = LayerSet::default();
        let mut taus: Vec<f64> = vec![0.01, 0.2, 0.3, 1.9, 2.0, 2.5, 29.0, 30.0];
        taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev: Option<Vec<LayerId>> = None;
        for tau in taus {
            let mut r = make_preset(ResourceClass::Bess);
            r.latency_tau_s = tau;
            let elig = layer_eligibility(&r, &layers).unwrap();
            if let Some(p) = &prev {
                // faster resources are eligible for a superset of layers
                assert!(elig.iter().all(|l| p.contains(l)));
            }
            prev = Some(elig);
        }
    }

    #[test]
    fn activity_profile_values() {
        let layers = LayerSet::default();
        let arrest = &layers.arrest;
        assert_eq!(layer_activity(arrest, 0.0), 0.0);
        // raised-cosine midpoint of the fade-in
        assert!((layer_activity(arrest, 0.05) - 0.5).abs() < 1e-12);
        assert_eq!(layer_activity(arrest, 0.5), 1.0);
        // fade-out (1, 3): midpoint 0.5 at t=2, zero at t=3
        assert!((layer_activity(arrest, 2.0) - 0.5).abs() < 1e-12);
        assert_eq!(layer_activity(arrest, 3.0), 0.0);
        assert_eq!(layer_activity(arrest, 10.0), 0.0);
        // open-ended layer never releases
        assert_eq!(layer_activity(&layers.energy_following, 1e6), 1.0);
    }

    #[test]
    fn taper_values() {
        let res = make_preset(ResourceClass::Bess);
        let mut st = ResourceState::new(&res, 1e-3);
        assert_eq!(saturation_taper(&st, &res), 1.0);
        st.energy_remaining_pus = 0.1 * res.energy_budget_pus;
        assert!((saturation_taper(&st, &res) - 0.5).abs() < 1e-12);
        st.energy_remaining_pus = 0.0;
        assert_eq!(saturation_taper(&st, &res), 0.0);
    }

    #[test]
    fn detect_event_latches_first_crossing() {
        let alloc = AllocationState::new(CoordinationMode::Dynamic, 1);
        let a1 = detect_event(-0.02, 1.0, &alloc, 0.03);
        assert_eq!(a1.event_time_s, None);
        let a2 = detect_event(-0.031, 2.5, &a1, 0.03);
        assert_eq!(a2.event_time_s, Some(2.5));
        // idempotent on later, larger crossings
        let a3 = detect_event(-0.5, 7.0, &a2, 0.03);
        assert_eq!(a3.event_time_s, Some(2.5));
    }

    #[test]
    fn allocate_requires_event() {
        let resources = vec![make_preset(ResourceClass::Bess)];
        let states = fresh_states(&resources);
        let alloc = AllocationState::new(CoordinationMode::Dynamic, 1);
        let r = allocate_weights(0.0, &alloc, &resources, &states, &LayerSet::default());
        assert_eq!(r.unwrap_err(), CoordError::NotTriggered);
    }

    #[test]
    fn unstructured_mode_is_all_ones() {
        let resources: Vec<_> = ResourceClass::ALL.iter().map(|&c| make_preset(c)).collect();
        let states = fresh_states(&resources);
        let mut alloc = AllocationState::new(CoordinationMode::Unstructured, 3);
        alloc.event_time_s = Some(0.0);
        for t in [0.0, 0.5, 10.0, 80.0] {
            let a = allocate_weights(t, &alloc, &resources, &states, &LayerSet::default()).unwrap();
            assert!(a.weights.iter().all(|&w| w == 1.0));
        }
    }

    #[test]
    fn no_ffr_mode_is_all_zeros() {
        let resources: Vec<_> = ResourceClass::ALL.iter().map(|&c| make_preset(c)).collect();
        let states = fresh_states(&resources);
        let mut alloc = AllocationState::new(CoordinationMode::NoFfr, 3);
        alloc.event_time_s = Some(0.0);
        let a = allocate_weights(5.0, &alloc, &resources, &states, &LayerSet::default()).unwrap();
        assert!(a.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn static_mode_uses_fastest_layer_rectangles() {
        let layers = LayerSet::default();
        let resources: Vec<_> = ResourceClass::ALL.iter().map(|&c| make_preset(c)).collect();
        let states = fresh_states(&resources);
        let mut alloc = AllocationState::new(CoordinationMode::StaticLayers, 3);
        alloc.event_time_s = Some(0.0);
        // storage rides Arrest [0, 3); the data center rides Sustained [0, 15);
        // the EV fleet rides EnergyFollowing [3, inf)
        let expect = [
            (0.0, [1.0, 1.0, 0.0]),
            (2.9, [1.0, 1.0, 0.0]),
            (3.0, [0.0, 1.0, 1.0]),
            (14.9, [0.0, 1.0, 1.0]),
            (15.0, [0.0, 0.0, 1.0]),
            (80.0, [0.0, 0.0, 1.0]),
        ];
        for (t, want) in expect {
            let a = allocate_weights(t, &alloc, &resources, &states, &layers).unwrap();
            assert_eq!(a.weights.as_slice(), want, "at t_rel={t}");
        }
    }

    #[test]
    fn dynamic_mode_blends_and_tapers() {
        let layers = LayerSet::default();
        let resources: Vec<_> = ResourceClass::ALL.iter().map(|&c| make_preset(c)).collect();
        let mut states = fresh_states(&resources);
        let mut alloc = AllocationState::new(CoordinationMode::Dynamic, 3);
        alloc.event_time_s = Some(0.0);

        // shortly after the event only the fast layers have ramped: the EV
        // fleet (energy-following only) still has zero weight, storage is at
        // full weight
        let a = allocate_weights(0.1, &alloc, &resources, &states, &layers).unwrap();
        assert_eq!(a.weights[2], 0.0);
        assert!((a.weights[0] - 1.0).abs() < 1e-12);

        // storage at 10% energy during the arrest plateau: weight = 0.5 * 1
        states[0].energy_remaining_pus = 0.1 * resources[0].energy_budget_pus;
        let a = allocate_weights(0.5, &alloc, &resources, &states, &layers).unwrap();
        assert!((a.weights[0] - 0.5).abs() < 1e-12);

        // weights never exceed taper in dynamic mode
        for t in [0.0, 0.5, 2.0, 5.0, 12.0, 40.0] {
            let a = allocate_weights(t, &alloc, &resources, &states, &layers).unwrap();
            for i in 0..3 {
                assert!(a.weights[i] <= a.taper[i] + 1e-15);
            }
        }
    }

    #[test]
    fn dynamic_weights_are_lipschitz_in_time() {
        // activity ramps bound the per-step weight change; sample densely
        // across every fade boundary
        let layers = LayerSet::default();
        let resources: Vec<_> = ResourceClass::ALL.iter().map(|&c| make_preset(c)).collect();
        let states = fresh_states(&resources);
        let mut alloc = AllocationState::new(CoordinationMode::Dynamic, 3);
        alloc.event_time_s = Some(0.0);
        let dt = 1e-3;
        // slope bound: pi / (2 * narrowest fade width) with full energy
        let c_bound = std::f64::consts::PI / (2.0 * 0.1);
        let mut prev = allocate_weights(0.0, &alloc, &resources, &states, &layers)
            .unwrap()
            .weights;
        let mut t = dt;
        while t < 20.0 {
            let w = allocate_weights(t, &alloc, &resources, &states, &layers)
                .unwrap()
                .weights;
            for i in 0..3 {
                assert!(
                    (w[i] - prev[i]).abs() <= c_bound * dt * 1.0001,
                    "jump at t={t} for resource {i}"
                );
            }
            prev = w;
            t += dt;
        }
    }

    #[test]
    fn availability_of_one_resource_never_moves_other_weights() {
        // weights are per-resource functions of time and own energy; zeroing
        // one availability must leave the other weight traces untouched
        let layers = LayerSet::default();
        let mut resources: Vec<_> =
            ResourceClass::ALL.iter().map(|&c| make_preset(c)).collect();
        // huge budgets so tapers stay at 1 in both variants
        for r in &mut resources {
            r.energy_budget_pus = 1e9;
        }
        let states = fresh_states(&resources);
        let mut alloc = AllocationState::new(CoordinationMode::Dynamic, 3);
        alloc.event_time_s = Some(0.0);

        let mut derated = resources.clone();
        derated[0].availability = 0.0;

        let mut t = 0.0;
        while t < 25.0 {
            let a = allocate_weights(t, &alloc, &resources, &states, &layers).unwrap();
            let b = allocate_weights(t, &alloc, &derated, &states, &layers).unwrap();
            assert_eq!(a.weights[1], b.weights[1]);
            assert_eq!(a.weights[2], b.weights[2]);
            t += 0.05;
        }
    }
}
