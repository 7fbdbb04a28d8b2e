//! Case harness and file output.
//!
//! `run_compare` executes all four coordination cases from one base
//! scenario and writes, per case, a trajectory CSV and a metrics JSON,
//! plus a comparison table and a plot-ready aligned frequency CSV.
//! `sweep_availability` scales one resource class's availability through a
//! factor list and tabulates the resulting metrics.
//!
//! Numbers are serialized with 9 significant digits so files are stable,
//! diffable, and round-trip losslessly. On failure every file written by
//! the current invocation is removed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{run_simulation, SimError, Trajectory};
use crate::metrics::{metrics_report, MetricsError, MetricsReport};
use crate::resource::ResourceClass;
use crate::scenario::{build_case, scale_class_availability, ConfigError, ScenarioConfig, SweepSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Format with 9 significant digits, the file-format contract.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.8e}")
}

/// Round to the 9-significant-digit grid used by the writers.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        format!("{x:.8e}").parse().unwrap()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ============================================================================
// Writers
// ============================================================================

/// Trajectory CSV: time, frequency, windowed RoCoF, total governor power,
/// then output/energy/weight columns per resource.
pub fn write_trajectory_csv(
    traj: &Trajectory,
    rocof_window_s: f64,
    path: &Path,
) -> Result<(), HarnessError> {
    if traj.is_empty() {
        return Err(MetricsError::EmptyTrajectory.into());
    }
    let mut out = String::new();
    out.push_str("time_s,f_hz,rocof_hz_s,p_gov_pu");
    for r in &traj.resources {
        out.push_str(&format!(",p_{id}_pu,e_{id}_pus,w_{id}", id = r.id));
    }
    out.push('\n');

    let dt = traj.sample_dt();
    let k = if dt > 0.0 {
        ((rocof_window_s / dt).round() as usize).max(1)
    } else {
        1
    };
    for i in 0..traj.len() {
        let rocof = if i >= k {
            (traj.f_hz[i] - traj.f_hz[i - k]) / (traj.times_s[i] - traj.times_s[i - k])
        } else {
            0.0
        };
        out.push_str(&fmt_sig9(traj.times_s[i]));
        out.push(',');
        out.push_str(&fmt_sig9(traj.f_hz[i]));
        out.push(',');
        out.push_str(&fmt_sig9(rocof));
        out.push(',');
        out.push_str(&fmt_sig9(traj.gov_total_pu[i]));
        for r in &traj.resources {
            out.push(',');
            out.push_str(&fmt_sig9(r.p_out_pu[i]));
            out.push(',');
            out.push_str(&fmt_sig9(r.energy_remaining_pus[i]));
            out.push(',');
            out.push_str(&fmt_sig9(r.weight[i]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Metrics JSON mirroring `MetricsReport`, numbers rounded to the
/// 9-significant-digit grid before serialization.
pub fn write_metrics_json(report: &MetricsReport, path: &Path) -> Result<(), HarnessError> {
    let mut rounded = report.clone();
    rounded.nadir_hz = round_sig9(rounded.nadir_hz);
    rounded.nadir_time_s = round_sig9(rounded.nadir_time_s);
    rounded.max_rocof_hz_per_s = round_sig9(rounded.max_rocof_hz_per_s);
    rounded.recovery_time_s = rounded.recovery_time_s.map(round_sig9);
    rounded.secondary_dip = rounded.secondary_dip.map(|d| crate::metrics::SecondaryDip {
        time_s: round_sig9(d.time_s),
        depth_hz: round_sig9(d.depth_hz),
    });
    for r in &mut rounded.resources {
        r.peak_power_pu = round_sig9(r.peak_power_pu);
        r.energy_used_pus = round_sig9(r.energy_used_pus);
        r.time_saturated_s = round_sig9(r.time_saturated_s);
    }
    let text = serde_json::to_string_pretty(&rounded).expect("report serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_comparison_csv(reports: &[MetricsReport], path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from(
        "case,nadir_hz,nadir_time_s,max_rocof_hz_s,recovery_time_s,secondary_dip_time_s,secondary_dip_depth_hz\n",
    );
    for r in reports {
        let rec = r
            .recovery_time_s
            .map(|t| fmt_sig9(t))
            .unwrap_or_default();
        let (dip_t, dip_d) = r
            .secondary_dip
            .as_ref()
            .map(|d| (fmt_sig9(d.time_s), fmt_sig9(d.depth_hz)))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.case_id,
            fmt_sig9(r.nadir_hz),
            fmt_sig9(r.nadir_time_s),
            fmt_sig9(r.max_rocof_hz_per_s),
            rec,
            dip_t,
            dip_d
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

fn write_aligned_frequency_csv(trajs: &[Trajectory], path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from("time_s");
    for (i, _) in trajs.iter().enumerate() {
        out.push_str(&format!(",f_case{}_hz", i + 1));
    }
    out.push('\n');
    let n = trajs[0].len();
    for row in 0..n {
        out.push_str(&fmt_sig9(trajs[0].times_s[row]));
        for t in trajs {
            out.push(',');
            out.push_str(&fmt_sig9(t.f_hz[row]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Write one run's trajectory CSV and metrics JSON into `out_dir`.
pub fn write_outputs(
    traj: &Trajectory,
    report: &MetricsReport,
    rocof_window_s: f64,
    out_dir: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf), HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let traj_path = out_dir.join(format!("{stem}_trajectory.csv"));
    let metrics_path = out_dir.join(format!("{stem}_metrics.json"));
    write_trajectory_csv(traj, rocof_window_s, &traj_path)?;
    write_metrics_json(report, &metrics_path)?;
    Ok((traj_path, metrics_path))
}

// ============================================================================
// Harness entry points
// ============================================================================

/// Trajectories and metric reports for cases 1-4 of one base scenario.
pub struct CompareResults {
    pub trajectories: Vec<Trajectory>,
    pub reports: Vec<MetricsReport>,
}

/// Run the four cases in memory.
pub fn compare_cases(base: &ScenarioConfig) -> Result<CompareResults, HarnessError> {
    let mut trajectories = Vec::with_capacity(4);
    let mut reports = Vec::with_capacity(4);
    for case in 1..=4u8 {
        let cfg = build_case(base, case)?;
        let traj = run_simulation(&cfg)?;
        let report = metrics_report(&traj, &cfg.metrics, case)?;
        trajectories.push(traj);
        reports.push(report);
    }
    Ok(CompareResults {
        trajectories,
        reports,
    })
}

/// Run all four cases and write the full output tree. Partial outputs are
/// removed when any step fails.
pub fn run_compare(base: &ScenarioConfig, out_dir: &Path) -> Result<CompareResults, HarnessError> {
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        let results = compare_cases(base)?;
        for (i, (traj, report)) in results
            .trajectories
            .iter()
            .zip(&results.reports)
            .enumerate()
        {
            let stem = format!("case{}", i + 1);
            let (a, b) = write_outputs(traj, report, base.metrics.rocof_window_s, out_dir, &stem)?;
            written.push(a);
            written.push(b);
        }
        let cmp_path = out_dir.join("comparison.csv");
        write_comparison_csv(&results.reports, &cmp_path)?;
        written.push(cmp_path);
        let freq_path = out_dir.join("frequency_traces.csv");
        write_aligned_frequency_csv(&results.trajectories, &freq_path)?;
        written.push(freq_path);
        Ok(results)
    })();
    if result.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
    }
    result
}

/// One sweep row.
pub struct SweepRow {
    pub scale: f64,
    pub report: MetricsReport,
}

/// Rerun the base case with the target class's availability scaled through
/// the spec's factors, in order.
pub fn sweep_availability(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepRow>, HarnessError> {
    let case = build_case(base, spec.base_case)?;
    let mut rows = Vec::with_capacity(spec.scale_factors.len());
    for &scale in &spec.scale_factors {
        let cfg = scale_class_availability(&case, spec.target_class, scale);
        let traj = run_simulation(&cfg)?;
        let report = metrics_report(&traj, &cfg.metrics, spec.base_case)?;
        rows.push(SweepRow { scale, report });
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let name = match spec.target_class {
            ResourceClass::Bess => "bess",
            ResourceClass::DataCenter => "datacenter",
            ResourceClass::EvFleet => "ev",
        };
        let path = dir.join(format!("sweep_{name}.csv"));
        let mut file = fs::File::create(&path).map_err(io_err(&path))?;
        writeln!(
            file,
            "scale,nadir_hz,max_rocof_hz_s,recovery_time_s,secondary_dip_depth_hz"
        )
        .map_err(io_err(&path))?;
        for row in &rows {
            let rec = row
                .report
                .recovery_time_s
                .map(|t| fmt_sig9(t))
                .unwrap_or_default();
            let dip = row
                .report
                .secondary_dip
                .as_ref()
                .map(|d| fmt_sig9(d.depth_hz))
                .unwrap_or_default();
            writeln!(
                file,
                "{},{},{},{},{}",
                fmt_sig9(row.scale),
                fmt_sig9(row.report.nadir_hz),
                fmt_sig9(row.report.max_rocof_hz_per_s),
                rec,
                dip
            )
            .map_err(io_err(&path))?;
        }
    }
    Ok(rows)
}

// ============================================================================
// Tests
// ============================================================================
