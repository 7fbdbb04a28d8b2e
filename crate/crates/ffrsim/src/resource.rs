//! Fast-frequency-response resource models.
//!
//! Three resource classes (battery storage, data centers, EV fleets) share
//! one dynamic structure: a droop law on local frequency deviation, a pure
//! transport delay, a first-order lag with a ramp limit, and a finite energy
//! budget. Support is one-sided (under-frequency only, p_out >= 0) and a
//! depleted resource contributes nothing for the rest of the event.
//!
//! The transport delay is realized as a ring buffer of `round(tau/dt)`
//! slots, so the effective latency is tau rounded to the nearest multiple
//! of the integration step.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Resource class, ordered fast-and-shallow to slow-and-deep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    Bess,
    DataCenter,
    EvFleet,
}

impl ResourceClass {
    pub const ALL: [ResourceClass; 3] = [
        ResourceClass::Bess,
        ResourceClass::DataCenter,
        ResourceClass::EvFleet,
    ];
}

/// Capability envelope and response dynamics of one aggregated resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FfrResource {
    pub id: String,
    pub class: ResourceClass,
    /// Transport delay between command and power response, seconds.
    pub latency_tau_s: f64,
    /// Maximum deliverable power, pu.
    pub p_max_pu: f64,
    /// Deliverable energy before saturation, pu·s.
    pub energy_budget_pus: f64,
    /// Fraction of the nameplate actually available, in [0, 1].
    pub availability: f64,
    /// Droop gain, pu per Hz of deviation beyond the deadband.
    pub droop_gain_pu_per_hz: f64,
    /// First-order response lag, seconds.
    pub lag_time_const_s: f64,
    /// Maximum output slew, pu per second.
    pub ramp_limit_pu_per_s: f64,
    /// Response deadband on |Δf|, Hz.
    pub response_deadband_hz: f64,
}

impl FfrResource {
    /// Power ceiling after availability derating.
    pub fn power_cap(&self) -> f64 {
        self.p_max_pu * self.availability
    }
}

/// Calibrated default parameters per class. The class orderings hold by
/// construction: latency tau_bess < tau_dc < tau_ev, and sustainability
/// E/P_bess < E/P_dc < E/P_ev.
pub fn make_preset(class: ResourceClass) -> FfrResource {
    match class {
        ResourceClass::Bess => FfrResource {
            id: "bess".into(),
            class,
            latency_tau_s: 0.05,
            p_max_pu: 0.04,
            energy_budget_pus: 0.08,
            availability: 1.0,
            droop_gain_pu_per_hz: 2.0,
            lag_time_const_s: 0.02,
            ramp_limit_pu_per_s: 2.0,
            response_deadband_hz: 0.01,
        },
        ResourceClass::DataCenter => FfrResource {
            id: "datacenter".into(),
            class,
            latency_tau_s: 0.5,
            p_max_pu: 0.012,
            energy_budget_pus: 0.19,
            availability: 1.0,
            droop_gain_pu_per_hz: 2.0,
            lag_time_const_s: 0.3,
            ramp_limit_pu_per_s: 0.5,
            response_deadband_hz: 0.01,
        },
        ResourceClass::EvFleet => FfrResource {
            id: "evfleet".into(),
            class,
            latency_tau_s: 8.0,
            p_max_pu: 0.05,
            energy_budget_pus: 30.0,
            availability: 1.0,
            droop_gain_pu_per_hz: 2.0,
            lag_time_const_s: 1.5,
            ramp_limit_pu_per_s: 0.05,
            response_deadband_hz: 0.01,
        },
    }
}

// ============================================================================
// Dynamic state
// ============================================================================

/// Mutable response state of one resource.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceState {
    /// Delivered support power, pu (>= 0).
    pub p_out_pu: f64,
    /// Remaining deliverable energy, pu·s.
    pub energy_remaining_pus: f64,
    /// Pending commands; the front is the command issued `latency` ago.
    delay_buffer: VecDeque<f64>,
    /// True once the energy budget hit zero; latched for the whole run.
    pub saturated: bool,
}

impl ResourceState {
    /// Fresh idle state. `dt_s` fixes the delay discretization for the run.
    pub fn new(res: &FfrResource, dt_s: f64) -> Self {
        let slots = (res.latency_tau_s / dt_s).round() as usize;
        ResourceState {
            p_out_pu: 0.0,
            energy_remaining_pus: res.energy_budget_pus,
            delay_buffer: VecDeque::from(vec![0.0; slots]),
            saturated: false,
        }
    }
}

// ============================================================================
// Operations
// ============================================================================

/// Droop command from local frequency deviation, scaled by the coordinator
/// weight and availability, clamped to the derated power ceiling. Only
/// under-frequency deviations beyond the deadband produce a command.
pub fn commanded_power(delta_f_hz: f64, weight: f64, res: &FfrResource) -> f64 {
    debug_assert!((0.0..=1.0).contains(&weight));
    let drive = (-delta_f_hz - res.response_deadband_hz).max(0.0);
    (weight * res.availability * res.droop_gain_pu_per_hz * drive).clamp(0.0, res.power_cap())
}

/// Advance the response dynamics one step: the new command enters the delay
/// buffer, the command issued `latency` ago is dequeued, and the output
/// relaxes toward it through the first-order lag, slew-limited. A saturated
/// resource is pinned at zero output.
pub fn resource_step(state: &ResourceState, cmd_pu: f64, dt_s: f64, res: &FfrResource) -> ResourceState {
    debug_assert!(dt_s > 0.0);
    let mut next = state.clone();
    next.delay_buffer.push_back(cmd_pu);
    // with zero latency the buffer is empty and commands pass straight through
    let delayed = next.delay_buffer.pop_front().unwrap_or(cmd_pu);
    if next.saturated {
        next.p_out_pu = 0.0;
        return next;
    }
    // exact first-order-hold discretization of the lag, then ramp clamp
    let alpha = 1.0 - (-dt_s / res.lag_time_const_s).exp();
    let unclamped = state.p_out_pu + alpha * (delayed - state.p_out_pu);
    let max_step = res.ramp_limit_pu_per_s * dt_s;
    next.p_out_pu = state.p_out_pu + (unclamped - state.p_out_pu).clamp(-max_step, max_step);
    next
}

/// Trapezoidal energy bookkeeping across one step, using the output before
/// and after `resource_step`. Depletion clamps the budget at zero, latches
/// the saturated flag and forces the output to zero from then on.
pub fn update_energy(
    state: &ResourceState,
    p_out_before_pu: f64,
    dt_s: f64,
) -> ResourceState {
    debug_assert!(dt_s > 0.0);
    let mut next = state.clone();
    if next.saturated {
        return next;
    }
    let used = 0.5 * (p_out_before_pu + state.p_out_pu) * dt_s;
    let remaining = next.energy_remaining_pus - used;
    if remaining <= 0.0 {
        next.energy_remaining_pus = 0.0;
        next.saturated = true;
        next.p_out_pu = 0.0;
    } else {
        next.energy_remaining_pus = remaining;
    }
    next
}

/// Power still callable by the coordinator: the derated ceiling, or zero
/// once the energy budget is gone.
pub fn effective_headroom(state: &ResourceState, res: &FfrResource) -> f64 {
    if state.saturated {
        0.0
    } else {
        res.power_cap()
    }
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;

    fn lag_only(lag: f64) -> FfrResource {
        FfrResource {
            id: "lag".into(),
            class: ResourceClass::Bess,
            latency_tau_s: 0.0,
            p_max_pu: 1.0,
            energy_budget_pus: 1e9,
            availability: 1.0,
            droop_gain_pu_per_hz: 1.0,
            lag_time_const_s: lag,
            ramp_limit_pu_per_s: f64::INFINITY,
            response_deadband_hz: 0.0,
        }
    }

    #[test]
    fn presets_satisfy_class_orderings() {
        let b = make_preset(ResourceClass::Bess);
        let d = make_preset(ResourceClass::DataCenter);
        let e = make_preset(ResourceClass::EvFleet);
        assert!(b.latency_tau_s < d.latency_tau_s && d.latency_tau_s < e.latency_tau_s);
        let sustain = |r: &FfrResource| r.energy_budget_pus / r.p_max_pu;
        assert!(sustain(&b) < sustain(&d) && sustain(&d) < sustain(&e));
        assert_eq!(b.p_max_pu, 0.04);
    }

    #[test]
    fn command_is_one_sided() {
        let res = make_preset(ResourceClass::Bess);
        assert_eq!(commanded_power(0.2, 1.0, &res), 0.0);
        assert_eq!(commanded_power(0.0, 1.0, &res), 0.0);
    }

    #[test]
    fn command_hand_evaluation() {
        let mut res = lag_only(0.2);
        res.droop_gain_pu_per_hz = 1.0;
        // Δf=-0.3, K=1, w=0.5, A=1, p_max=1 -> 0.15
        assert!((commanded_power(-0.3, 0.5, &res) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn command_clamps_to_derated_cap() {
        let mut res = lag_only(0.2);
        res.p_max_pu = 0.04;
        res.availability = 0.5;
        assert_eq!(commanded_power(-5.0, 1.0, &res), 0.02);
    }

    #[test]
    fn zero_command_keeps_resource_idle() {
        let res = make_preset(ResourceClass::Bess);
        let dt = 1e-3;
        let mut st = ResourceState::new(&res, dt);
        for _ in 0..1000 {
            let before = st.p_out_pu;
            st = resource_step(&st, 0.0, dt, &res);
            st = update_energy(&st, before, dt);
        }
        assert_eq!(st.p_out_pu, 0.0);
        assert_eq!(st.energy_remaining_pus, res.energy_budget_pus);
    }

    #[test]
    fn transport_delay_is_exact() {
        let mut res = lag_only(0.01);
        res.latency_tau_s = 0.5;
        let dt = 1e-3;
        let mut st = ResourceState::new(&res, dt);
        let mut t = 0.0;
        // constant command from t=0; output must be exactly zero for t < 0.5
        while t < 0.8 {
            let before = st.p_out_pu;
            st = resource_step(&st, 0.1, dt, &res);
            st = update_energy(&st, before, dt);
            t += dt;
            if t < 0.5 - 1e-12 {
                assert_eq!(st.p_out_pu, 0.0, "nonzero output at t={t}");
            }
        }
        assert!(st.p_out_pu > 0.09);
    }

    #[test]
    fn lag_step_response_matches_first_order_exponential() {
        // cmd = 0.1 step, tau = 0, lag = 0.2 -> p(t) = 0.1 (1 - e^{-t/0.2})
        let res = lag_only(0.2);
        let dt = 1e-3;
        let mut st = ResourceState::new(&res, dt);
        let mut t = 0.0;
        let mut checked = 0;
        while t < 0.55 {
            let before = st.p_out_pu;
            st = resource_step(&st, 0.1, dt, &res);
            st = update_energy(&st, before, dt);
            t += dt;
            for probe in [0.1, 0.2, 0.5] {
                if (t - probe).abs() < dt / 2.0 {
                    let expect = 0.1 * (1.0 - (-t / 0.2f64).exp());
                    assert!(
                        (st.p_out_pu - expect).abs() < 1e-12,
                        "at t={t}: {} vs {}",
                        st.p_out_pu,
                        expect
                    );
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 3);
        // frozen spot value: 0.1*(1 - e^{-1}) at t = 0.2
        let p02 = 0.1 * (1.0 - (-1.0f64).exp());
        assert!((p02 - 0.06321206).abs() < 1e-8);
    }

    #[test]
    fn ramp_limit_bounds_slew() {
        let mut res = lag_only(0.001); // near-instant lag
        res.ramp_limit_pu_per_s = 0.5;
        let dt = 1e-3;
        let mut st = ResourceState::new(&res, dt);
        let mut prev = 0.0;
        for _ in 0..100 {
            st = resource_step(&st, 1.0, dt, &res);
            assert!((st.p_out_pu - prev) <= 0.5 * dt + 1e-15);
            prev = st.p_out_pu;
        }
    }

    #[test]
    fn energy_drain_exact_integral() {
        // p_out = 1 pu held for 10 s from E = 100 -> E = 90
        let res = lag_only(0.001);
        let dt = 1e-2;
        let mut st = ResourceState::new(&res, dt);
        st.energy_remaining_pus = 100.0;
        st.p_out_pu = 1.0;
        for _ in 0..1000 {
            st = update_energy(&st, 1.0, dt);
        }
        assert!((st.energy_remaining_pus - 90.0).abs() < 1e-9);
    }

    #[test]
    fn energy_bookkeeping_matches_trapezoid_of_outputs() {
        let res = make_preset(ResourceClass::DataCenter);
        let dt = 1e-3;
        let mut st = ResourceState::new(&res, dt);
        let e0 = st.energy_remaining_pus;
        let mut integral = 0.0;
        let mut t: f64 = 0.0;
        // stop well before depletion; the property excludes the final clamp
        while t < 30.0 && st.energy_remaining_pus > 0.3 * e0 {
            let before = st.p_out_pu;
            let cmd = commanded_power(-0.2 * (1.0 + (t / 3.0).sin()), 1.0, &res);
            st = resource_step(&st, cmd, dt, &res);
            st = update_energy(&st, before, dt);
            integral += 0.5 * (before + st.p_out_pu) * dt;
            t += dt;
        }
        assert!(!st.saturated);
        assert!(
            ((e0 - st.energy_remaining_pus) - integral).abs() < 1e-9,
            "drain {} vs integral {}",
            e0 - st.energy_remaining_pus,
            integral
        );
    }

    #[test]
    fn depletion_latches_and_zeroes_output() {
        let res = lag_only(0.001);
        let dt = 1e-2;
        let mut st = ResourceState::new(&res, dt);
        st.energy_remaining_pus = 0.001;
        st.p_out_pu = 1.0;
        st = update_energy(&st, 1.0, dt);
        assert_eq!(st.energy_remaining_pus, 0.0);
        assert!(st.saturated);
        assert_eq!(st.p_out_pu, 0.0);
        // and it stays down even under fresh commands
        for _ in 0..50 {
            let before = st.p_out_pu;
            st = resource_step(&st, 1.0, dt, &res);
            st = update_energy(&st, before, dt);
            assert_eq!(st.p_out_pu, 0.0);
        }
    }

    #[test]
    fn output_monotone_in_weight() {
        // same Δf history, two constant weights, no depletion in sight:
        // pointwise output ordering must follow the weights
        let res = make_preset(ResourceClass::Bess);
        let dt = 1e-3;
        let mut lo = ResourceState::new(&res, dt);
        let mut hi = ResourceState::new(&res, dt);
        let mut t: f64 = 0.0;
        while t < 2.0 {
            let df = -0.4 * (t * 2.0).sin().abs();
            let (lb, hb) = (lo.p_out_pu, hi.p_out_pu);
            lo = resource_step(&lo, commanded_power(df, 0.3, &res), dt, &res);
            hi = resource_step(&hi, commanded_power(df, 0.9, &res), dt, &res);
            lo = update_energy(&lo, lb, dt);
            hi = update_energy(&hi, hb, dt);
            assert!(lo.p_out_pu <= hi.p_out_pu + 1e-15);
            t += dt;
        }
    }

    #[test]
    fn headroom_reflects_availability_and_saturation() {
        let res = make_preset(ResourceClass::Bess);
        let dt = 1e-3;
        let mut st = ResourceState::new(&res, dt);
        assert_eq!(effective_headroom(&st, &res), 0.04);
        st.saturated = true;
        assert_eq!(effective_headroom(&st, &res), 0.0);
        let mut derated = res.clone();
        derated.availability = 0.0;
        let st2 = ResourceState::new(&derated, dt);
        assert_eq!(effective_headroom(&st2, &derated), 0.0);
    }
}
