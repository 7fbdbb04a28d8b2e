//! Scenario configuration: schema, validation, and case construction.
//!
//! A scenario file is a single JSON document holding the grid section, the
//! resource roster, the service-layer parameters, the trigger threshold,
//! integration settings and metric thresholds. Validation checks every
//! structural invariant up front and reports all violations at once, each
//! with its field path.
//!
//! Cases 1-4 are built from one base scenario by switching the coordination
//! mode only; the roster and every physical parameter stay untouched.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinator::LayerSet;
pub use crate::coordinator::CoordinationMode;
use crate::grid::GridModel;
use crate::metrics::MetricsSettings;
use crate::resource::{FfrResource, ResourceClass};

/// Bundled default scenario, calibrated so the four coordination modes
/// separate cleanly on every reported metric.
const DEFAULT_SCENARIO_JSON: &str = include_str!("../data/default_scenario.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Validation(ValidationReport),
    #[error("unknown case id {0} (expected 1-4)")]
    UnknownCase(u8),
}

/// All violations found in one validation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// JSON-ish path of the offending field, e.g. `resources[1].p_max_pu`.
    pub field: String,
    pub rule: String,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid scenario ({} violations):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.field, v.rule)?;
        }
        Ok(())
    }
}

// ============================================================================
// Schema
// ============================================================================

/// Integration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    /// Integration step, seconds. Must resolve sub-second dynamics.
    pub dt_s: f64,
    pub horizon_s: f64,
    /// Steps per recorded sample.
    pub record_stride: usize,
    /// Trip instant, seconds from the start of the run.
    pub t_trip_s: f64,
}

/// One fully specified simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Comparison case, 1-4.
    pub case_id: u8,
    pub grid: GridModel,
    pub resources: Vec<FfrResource>,
    #[serde(default)]
    pub layers: LayerSet,
    pub trigger_threshold_hz: f64,
    pub sim: SimSettings,
    #[serde(default)]
    pub metrics: MetricsSettings,
    /// Generator to trip; defaults to the largest online unit.
    #[serde(default)]
    pub trip_gen_id: Option<String>,
}

/// Availability sweep description: scale one class's availability through
/// the given factors and rerun the base case at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub target_class: ResourceClass,
    pub scale_factors: Vec<f64>,
    pub base_case: u8,
}

/// Result of loading a file: the validated config plus non-fatal notes
/// (e.g. sections that fell back to defaults).
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    pub warnings: Vec<String>,
}

// raw mirror with optional sections so defaults can be applied with a warning
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    case_id: u8,
    grid: GridModel,
    resources: Vec<FfrResource>,
    layers: Option<LayerSet>,
    trigger_threshold_hz: f64,
    sim: SimSettings,
    metrics: Option<MetricsSettings>,
    #[serde(default)]
    trip_gen_id: Option<String>,
}

// ============================================================================
// Loading and validation
// ============================================================================

/// Load and fully validate a scenario file. Violations are aggregated, not
/// reported one at a time.
pub fn load_config(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: RawScenario = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.display().to_string(),
        source,
    })?;

    let mut warnings = Vec::new();
    if raw.layers.is_none() {
        warnings.push("layers section missing; defaults applied".to_string());
    }
    if raw.metrics.is_none() {
        warnings.push("metrics section missing; defaults applied".to_string());
    }
    let config = ScenarioConfig {
        case_id: raw.case_id,
        grid: raw.grid,
        resources: raw.resources,
        layers: raw.layers.unwrap_or_default(),
        trigger_threshold_hz: raw.trigger_threshold_hz,
        sim: raw.sim,
        metrics: raw.metrics.unwrap_or_default(),
        trip_gen_id: raw.trip_gen_id,
    };
    config.validate().map_err(ConfigError::Validation)?;
    Ok(LoadedScenario { config, warnings })
}

impl ScenarioConfig {
    /// The calibrated scenario shipped with the crate.
    pub fn bundled_default() -> ScenarioConfig {
        serde_json::from_str::<RawScenario>(DEFAULT_SCENARIO_JSON)
            .map(|raw| ScenarioConfig {
                case_id: raw.case_id,
                grid: raw.grid,
                resources: raw.resources,
                layers: raw.layers.unwrap_or_default(),
                trigger_threshold_hz: raw.trigger_threshold_hz,
                sim: raw.sim,
                metrics: raw.metrics.unwrap_or_default(),
                trip_gen_id: raw.trip_gen_id,
            })
            .expect("bundled scenario parses")
    }

    pub fn mode(&self) -> CoordinationMode {
        match self.case_id {
            1 => CoordinationMode::NoFfr,
            2 => CoordinationMode::Unstructured,
            3 => CoordinationMode::StaticLayers,
            _ => CoordinationMode::Dynamic,
        }
    }

    /// Total derated flexible capacity, pu. Constant across cases 2-4 by
    /// construction.
    pub fn installed_capacity_pu(&self) -> f64 {
        self.resources.iter().map(|r| r.power_cap()).sum()
    }

    /// Check every structural invariant; collect all violations.
    pub fn validate(&self) -> Result<(), ValidationReport> {
        let mut v: Vec<Violation> = Vec::new();
        let mut push = |field: &str, rule: &str| {
            v.push(Violation {
                field: field.to_string(),
                rule: rule.to_string(),
            })
        };

        if !(1..=4).contains(&self.case_id) {
            push("case_id", "must be in 1..=4");
        }

        // grid section
        if self.grid.system_base_mva <= 0.0 {
            push("grid.system_base_mva", "must be > 0");
        }
        if self.grid.f0_hz <= 0.0 {
            push("grid.f0_hz", "must be > 0");
        }
        if self.grid.load_damping_d < 0.0 {
            push("grid.load_damping_d", "must be >= 0");
        }
        if !(self.grid.inertia_scale > 0.0 && self.grid.inertia_scale <= 1.0) {
            push("grid.inertia_scale", "must be in (0, 1]");
        }
        if self.grid.generators.is_empty() {
            push("grid.generators", "must not be empty");
        }
        for (i, g) in self.grid.generators.iter().enumerate() {
            let f = |name: &str| format!("grid.generators[{i}].{name}");
            if g.rating_mva <= 0.0 {
                push(&f("rating_mva"), "must be > 0");
            }
            if g.inertia_h_s <= 0.0 {
                push(&f("inertia_h_s"), "must be > 0");
            }
            if g.droop_r <= 0.0 {
                push(&f("droop_r"), "must be > 0");
            }
            if g.gov_time_const_s <= 0.0 {
                push(&f("gov_time_const_s"), "must be > 0");
            }
            if !(0.0..0.5).contains(&g.gov_deadband_hz) {
                push(&f("gov_deadband_hz"), "must be in [0, 0.5)");
            }
            if g.headroom_pu < 0.0 {
                push(&f("headroom_pu"), "must be >= 0");
            }
            if g.pre_fault_output_pu < 0.0 {
                push(&f("pre_fault_output_pu"), "must be >= 0");
            }
        }
        if self.grid.h_sys() <= 0.0 && !self.grid.generators.is_empty() {
            push("grid", "effective inertia must be positive");
        }
        if let Some(id) = &self.trip_gen_id {
            match self.grid.generator(id) {
                None => push("trip_gen_id", "references an unknown generator"),
                Some(g) if !g.online => push("trip_gen_id", "references an offline generator"),
                _ => {}
            }
        }

        // resources
        for (i, r) in self.resources.iter().enumerate() {
            let f = |name: &str| format!("resources[{i}].{name}");
            if r.latency_tau_s < 0.0 {
                push(&f("latency_tau_s"), "must be >= 0");
            }
            if r.p_max_pu <= 0.0 {
                push(&f("p_max_pu"), "must be > 0");
            }
            if r.energy_budget_pus <= 0.0 {
                push(&f("energy_budget_pus"), "must be > 0");
            }
            if !(0.0..=1.0).contains(&r.availability) {
                push(&f("availability"), "must be in [0, 1]");
            }
            if r.droop_gain_pu_per_hz <= 0.0 {
                push(&f("droop_gain_pu_per_hz"), "must be > 0");
            }
            if r.lag_time_const_s <= 0.0 {
                push(&f("lag_time_const_s"), "must be > 0");
            }
            if r.ramp_limit_pu_per_s <= 0.0 {
                push(&f("ramp_limit_pu_per_s"), "must be > 0");
            }
            if r.response_deadband_hz < 0.0 {
                push(&f("response_deadband_hz"), "must be >= 0");
            }
            if r.latency_tau_s > self.layers.slowest_ceiling() {
                push(
                    &f("latency_tau_s"),
                    "exceeds every service layer's latency ceiling",
                );
            }
        }

        // layers: latency ceilings strictly ordered, fades non-degenerate
        // and completing in order
        let ls = &self.layers;
        if !(ls.arrest.tau_max_s < ls.sustained.tau_max_s
            && ls.sustained.tau_max_s < ls.energy_following.tau_max_s)
        {
            push("layers", "tau_max must increase from arrest to energy_following");
        }
        for layer in ls.as_array() {
            let name = format!("layers.{:?}", layer.id).to_lowercase();
            if layer.fade_in.1 <= layer.fade_in.0 || layer.fade_in.0 < 0.0 {
                push(&name, "fade_in must be a non-degenerate window at t >= 0");
            }
            if let Some((s, e)) = layer.fade_out {
                if e <= s || s < layer.fade_in.1 {
                    push(&name, "fade_out must be non-degenerate and after the fade_in");
                }
            }
        }
        let in_ends = [
            ls.arrest.fade_in.1,
            ls.sustained.fade_in.1,
            ls.energy_following.fade_in.1,
        ];
        if !(in_ends[0] < in_ends[1] && in_ends[1] < in_ends[2]) {
            push("layers", "fade_in completion times must increase across layers");
        }
        let out_end = |l: &crate::coordinator::ServiceLayer| {
            l.fade_out.map(|(_, e)| e).unwrap_or(f64::INFINITY)
        };
        if !(out_end(&ls.arrest) < out_end(&ls.sustained)
            && out_end(&ls.sustained) < out_end(&ls.energy_following))
        {
            push("layers", "release times must increase across layers");
        }

        if self.trigger_threshold_hz <= 0.0 {
            push("trigger_threshold_hz", "must be > 0");
        }

        // sim settings
        if self.sim.dt_s <= 0.0 {
            push("sim.dt_s", "must be > 0");
        } else if self.sim.dt_s > 0.002 {
            push("sim.dt_s", "must be <= 2 ms to resolve sub-second dynamics");
        }
        if self.sim.horizon_s <= self.sim.t_trip_s {
            push("sim.horizon_s", "must exceed t_trip_s");
        }
        if self.sim.record_stride < 1 {
            push("sim.record_stride", "must be >= 1");
        }
        if self.sim.t_trip_s < 0.0 {
            push("sim.t_trip_s", "must be >= 0");
        }

        // metrics
        if self.metrics.rocof_window_s < self.sim.dt_s * self.sim.record_stride as f64 {
            push("metrics.rocof_window_s", "must cover at least one recorded interval");
        }
        if self.metrics.recovery_deadband_hz <= 0.0 {
            push("metrics.recovery_deadband_hz", "must be > 0");
        }
        if self.metrics.dwell_s < 0.0 {
            push("metrics.dwell_s", "must be >= 0");
        }
        if self.metrics.dip_prominence_hz <= 0.0 {
            push("metrics.dip_prominence_hz", "must be > 0");
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(ValidationReport { violations: v })
        }
    }
}

/// Same scenario, different coordination mode. Everything else, including
/// the resource roster, is byte-identical to the base.
pub fn build_case(base: &ScenarioConfig, case_id: u8) -> Result<ScenarioConfig, ConfigError> {
    if !(1..=4).contains(&case_id) {
        return Err(ConfigError::UnknownCase(case_id));
    }
    let mut cfg = base.clone();
    cfg.case_id = case_id;
    Ok(cfg)
}

/// Scale the availability of every resource of one class.
pub fn scale_class_availability(
    base: &ScenarioConfig,
    class: ResourceClass,
    factor: f64,
) -> ScenarioConfig {
    let mut cfg = base.clone();
    for r in &mut cfg.resources {
        if r.class == class {
            r.availability *= factor;
        }
    }
    cfg
}

// ============================================================================
// Tests
// ============================================================================
