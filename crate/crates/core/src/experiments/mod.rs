//! Scenario runner: code-defined presets, TOML overrides, trajectories,
//! phase sweeps, Wilson loop and caging reports, CSV and SVG output.

mod config;
mod presets;
mod scenario;
pub mod svg;

pub use config::{load_scenario, parse_scenario, resolve_target, ScenarioFile};
pub use presets::{
    preset, preset_scenario, registry, scenario_names, PresetInfo, COUPLING_PHASE_TIME,
    INITIAL_PHASE_TIME, SWEEP_POINTS,
};
pub use scenario::{
    caging_report, default_workers, run_scenario, simulate, simulate_at, sweep, sweep_map,
    trajectory_table, wilson_report, wilson_table, CagingReport, InitialState, ResultTable,
    Scenario, SweepParameter, SweepPlan, TimeGrid, WilsonReport, CAGING_REPORT_MAX_ORDER,
    PROBABILITY_SLACK, UNITARY_DRIFT_TOL,
};

use crate::dynamics::Trajectory;
use crate::lattice::Manifold;

/// Site populations (spin summed) as a `[time][site]` grid with labels
/// `A0, B0, C0, A1, ...`.
pub fn site_grid(tr: &Trajectory) -> (Vec<String>, Vec<Vec<f64>>) {
    let cutoff = tr.basis().cutoff();
    let mut labels = Vec::new();
    for n in 0..=cutoff {
        for m in Manifold::ALL {
            labels.push(format!("{m}{n}"));
        }
    }
    let grid = (0..tr.len())
        .map(|k| {
            (0..=cutoff)
                .flat_map(|n| Manifold::ALL.map(|m| tr.site_population(k, m, n).expect("in range")))
                .collect()
        })
        .collect();
    (labels, grid)
}

/// Heatmap of a trajectory's site populations.
pub fn trajectory_svg(s: &Scenario, tr: &Trajectory) -> String {
    let (labels, grid) = site_grid(tr);
    let range = (s.times.start, s.times.stop);
    svg::heatmap(&format!("{}: site populations", s.name), &labels, "t (ms)", range, &grid)
}

/// `P0` against the swept angle.
pub fn sweep_svg(s: &Scenario, table: &ResultTable) -> String {
    let x = table.column("phi_over_pi").unwrap_or_default();
    let y = table.column("P0").unwrap_or_default();
    let t = s.sweep.as_ref().map(|w| w.observable_time).unwrap_or_default();
    let series = svg::Series { name: "P0".into(), points: x.into_iter().zip(y).collect() };
    svg::line_plot(&format!("{}: P0 at t = {t} ms", s.name), "phi / pi", "P0", &[series])
}
