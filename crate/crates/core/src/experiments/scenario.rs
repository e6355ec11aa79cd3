use std::io::Write;

use rayon::prelude::*;

use crate::dynamics::{
    evolve_lindblad, evolve_unitary, format_value, prepare_state, prepare_thermal_state,
    time_grid, wilson_loop_protocol_with, NoiseModel, Trajectory,
};
use crate::error::{Error, Result};
use crate::gauge::{
    caging_order, classify_plaquette, interference_matrix, wilson_loop, Classification, Direction,
    Mat2, Plaquette, Spinor, WilsonOrdering, CAGING_TOL,
};
use crate::lattice::{build_hamiltonian, LatticeConfig, Manifold};

/// Population drift tolerated on noise-free runs before the run is aborted.
pub const UNITARY_DRIFT_TOL: f64 = 1e-10;

/// Slack allowed on probability columns of a [`ResultTable`].
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub manifold: Manifold,
    pub phonon: usize,
    pub spinor: Spinor,
}

/// Uniform output grid in ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { start: 0.0, stop: 0.5, points: 101 }
    }
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        time_grid(self.start, self.stop, self.points)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.stop
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.start >= 0.0) {
            return Err(Error::InvalidParameter("time grid bounds must be finite and >= 0".into()));
        }
        if self.stop < self.start {
            return Err(Error::InvalidParameter(format!(
                "time grid stop {} is before start {}",
                self.stop, self.start
            )));
        }
        if self.points == 0 {
            return Err(Error::InvalidParameter("time grid needs at least one point".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// Initial spinor `(e^{i phi}, 1) / sqrt(2)`.
    InitialPhase,
    /// Phase `e^{i phi}` multiplied onto selected link rows.
    CouplingPhase,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::InitialPhase => "initial_phase",
            SweepParameter::CouplingPhase => "coupling_phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub parameter: SweepParameter,
    /// Angles in radians.
    pub values: Vec<f64>,
    /// Time at which `P0` is read out, ms.
    pub observable_time: f64,
    /// `(link, row)` pairs, links labelled 1..=4, rows 0 (down) or 1 (up).
    pub phased_rows: Vec<(usize, usize)>,
}

impl SweepPlan {
    /// `points` angles evenly spaced over `[0, 2 pi]`, endpoints included.
    pub fn full_turn(parameter: SweepParameter, points: usize, observable_time: f64) -> Self {
        let values = time_grid(0.0, 2.0 * std::f64::consts::PI, points);
        SweepPlan { parameter, values, observable_time, phased_rows: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub lattice: LatticeConfig,
    pub initial: InitialState,
    pub times: TimeGrid,
    pub noise: Option<NoiseModel>,
    pub sweep: Option<SweepPlan>,
}

impl Scenario {
    pub fn new(name: &str, plaquette: Plaquette, initial: InitialState) -> Self {
        Scenario {
            name: name.to_string(),
            description: String::new(),
            lattice: LatticeConfig::new(plaquette),
            initial,
            times: TimeGrid::default(),
            noise: None,
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.initial.spinor.require_normalized()?;
        if self.initial.phonon > self.lattice.cutoff {
            return Err(Error::PhononOutOfRange {
                phonon: self.initial.phonon,
                cutoff: self.lattice.cutoff,
            });
        }
        self.times.validate()?;
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() || sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("sweep values must be finite and non-empty".into()));
            }
            if !self.times.contains(sweep.observable_time) {
                return Err(Error::InvalidParameter(format!(
                    "sweep observable time {} ms lies outside [{}, {}] ms",
                    sweep.observable_time, self.times.start, self.times.stop
                )));
            }
            if sweep.parameter == SweepParameter::CouplingPhase && sweep.phased_rows.is_empty() {
                return Err(Error::InvalidParameter("coupling_phase sweep needs phased rows".into()));
            }
            for &(link, row) in &sweep.phased_rows {
                if !(1..=4).contains(&link) || row > 1 {
                    return Err(Error::InvalidParameter(format!(
                        "phased row ({link}, {row}) is not a valid (link 1..=4, row 0..=1) pair"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same scenario with the sweep parameter fixed at `value`.
    pub fn at_sweep_value(&self, value: f64) -> Result<Scenario> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config(format!("scenario '{}' has no sweep block", self.name)))?;
        let mut s = self.clone();
        s.sweep = None;
        match sweep.parameter {
            SweepParameter::InitialPhase => s.initial.spinor = Spinor::phase_family(value),
            SweepParameter::CouplingPhase => {
                for &(link, row) in &sweep.phased_rows {
                    let l = s.lattice.plaquette.link_mut(link).ok_or_else(|| {
                        Error::InvalidParameter(format!("no link U{link}"))
                    })?;
                    *l = l.with_row_phase(row, value);
                }
            }
        }
        Ok(s)
    }
}

/// Numeric table with named columns and an optional leading label column.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// `(header, one label per row)`.
    pub labels: Option<(String, Vec<String>)>,
    probability: Vec<bool>,
}

impl ResultTable {
    /// Builds a table, rejecting any probability column entry outside `[0, 1]`.
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>, probability: Vec<bool>) -> Result<Self> {
        if probability.len() != columns.len() {
            return Err(Error::Dimension { expected: columns.len(), found: probability.len() });
        }
        for row in &rows {
            if row.len() != columns.len() {
                return Err(Error::Dimension { expected: columns.len(), found: row.len() });
            }
            for ((v, &is_prob), name) in row.iter().zip(&probability).zip(&columns) {
                if !v.is_finite() {
                    return Err(Error::Conservation(format!("non-finite value in column {name}")));
                }
                if is_prob && !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(v) {
                    return Err(Error::Conservation(format!("{name} = {v} is not a probability")));
                }
            }
        }
        Ok(ResultTable { columns, rows, labels: None, probability })
    }

    pub fn with_labels(mut self, header: &str, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.rows.len() {
            return Err(Error::Dimension { expected: self.rows.len(), found: labels.len() });
        }
        self.labels = Some((header.to_string(), labels));
        Ok(self)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn is_probability(&self, name: &str) -> bool {
        self.columns.iter().position(|c| c == name).is_some_and(|k| self.probability[k])
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let mut header: Vec<&str> = Vec::new();
        if let Some((h, _)) = &self.labels {
            header.push(h);
        }
        header.extend(self.columns.iter().map(String::as_str));
        writeln!(out, "{}", header.join(","))?;
        for (k, row) in self.rows.iter().enumerate() {
            let mut cells = Vec::with_capacity(row.len() + 1);
            if let Some((_, labels)) = &self.labels {
                cells.push(labels[k].clone());
            }
            cells.extend(row.iter().map(|v| format_value(*v)));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Propagates the scenario over `times`, unitary when noise is off and
/// Lindblad otherwise, with the conservation checks applied.
pub fn simulate_at(s: &Scenario, times: &[f64]) -> Result<Trajectory> {
    s.validate()?;
    let basis = s.lattice.basis();
    let h = build_hamiltonian(&s.lattice)?;
    let init = &s.initial;
    match &s.noise {
        None => {
            let psi = prepare_state(init.manifold, init.phonon, &init.spinor, basis)?;
            let tr = evolve_unitary(&h, &psi, times)?;
            let drift = tr.max_population_drift();
            if drift > UNITARY_DRIFT_TOL {
                return Err(Error::Conservation(format!(
                    "scenario '{}': population drift {drift:.3e} on a noise-free run",
                    s.name
                )));
            }
            Ok(tr)
        }
        Some(noise) => {
            let rho = prepare_thermal_state(
                init.manifold,
                init.phonon,
                &init.spinor,
                noise.initial_nbar,
                basis,
            )?;
            let tr = evolve_lindblad(&h, &rho, noise, times)?;
            if let Some(d) = &tr.diagnostics {
                d.check().map_err(|e| {
                    Error::Conservation(format!("scenario '{}': {e}", s.name))
                })?;
            }
            Ok(tr)
        }
    }
}

pub fn simulate(s: &Scenario) -> Result<Trajectory> {
    simulate_at(s, &s.times.times())
}

/// Trajectory as a table: `time_ms`, every basis-state population, `P0`.
pub fn trajectory_table(tr: &Trajectory) -> Result<ResultTable> {
    let basis = tr.basis();
    let mut columns = vec!["time_ms".to_string()];
    columns.extend(basis.sites().map(|s| s.label()));
    columns.push("P0".into());
    let mut probability = vec![true; columns.len()];
    probability[0] = false;
    let rows = tr
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut row = Vec::with_capacity(columns.len());
            row.push(t);
            row.extend(&tr.populations[k]);
            row.push(tr.p0(k));
            row
        })
        .collect();
    ResultTable::new(columns, rows, probability)
}

/// Trajectory table for plain scenarios, sweep table when a sweep is present.
pub fn run_scenario(s: &Scenario, workers: usize) -> Result<ResultTable> {
    match s.sweep {
        Some(_) => sweep(s, workers),
        None => trajectory_table(&simulate(s)?),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Default worker cap: the available hardware parallelism.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// One row per sweep value: `phi_over_pi`, `P0` at the observable time and
/// the link algebra of the swept cell. Points run concurrently on at most
/// `workers` threads; row order follows the sweep values.
pub fn sweep(s: &Scenario, workers: usize) -> Result<ResultTable> {
    s.validate()?;
    let plan = s
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario '{}' has no sweep block", s.name)))?;
    let t = plan.observable_time;
    let rows: Vec<Vec<f64>> = pool(workers)?.install(|| {
        plan.values
            .par_iter()
            .map(|&v| {
                let point = s.at_sweep_value(v)?;
                let tr = simulate_at(&point, &[t])?;
                let p = &point.lattice.plaquette;
                Ok(vec![
                    v / std::f64::consts::PI,
                    tr.p0(0),
                    wilson_loop(p, WilsonOrdering::MainText),
                    wilson_loop(p, WilsonOrdering::Holonomy),
                    interference_matrix(p).singular_values().max(),
                ])
            })
            .collect::<Result<_>>()
    })?;
    let columns = ["phi_over_pi", "P0", "wilson_main_text", "wilson_holonomy", "interference_norm"]
        .map(String::from)
        .to_vec();
    ResultTable::new(columns, rows, vec![false, true, false, false, false])
}

/// `P0(t)` for every sweep value over the scenario's time grid, indexed
/// `[value][time]`.
pub fn sweep_map(s: &Scenario, workers: usize) -> Result<Vec<Vec<f64>>> {
    s.validate()?;
    let plan = s
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario '{}' has no sweep block", s.name)))?;
    let times = s.times.times();
    pool(workers)?.install(|| {
        plan.values
            .par_iter()
            .map(|&v| Ok(simulate_at(&s.at_sweep_value(v)?, &times)?.p0_series()))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonReport {
    pub main_text: f64,
    pub holonomy: f64,
    /// Sequential-pulse measurement, with the scenario's noise model if any.
    pub protocol: f64,
}

pub fn wilson_report(s: &Scenario) -> Result<WilsonReport> {
    s.validate()?;
    let p = &s.lattice.plaquette;
    let tomo = wilson_loop_protocol_with(&s.lattice, s.noise.as_ref())?;
    Ok(WilsonReport {
        main_text: wilson_loop(p, WilsonOrdering::MainText),
        holonomy: wilson_loop(p, WilsonOrdering::Holonomy),
        protocol: tomo.wilson,
    })
}

/// Wilson loops of several scenarios, one labelled row each.
pub fn wilson_table(scenarios: &[Scenario], workers: usize) -> Result<ResultTable> {
    let reports: Vec<WilsonReport> =
        pool(workers)?.install(|| scenarios.par_iter().map(wilson_report).collect::<Result<_>>())?;
    let rows = reports.iter().map(|r| vec![r.main_text, r.holonomy, r.protocol]).collect();
    let columns = ["wilson_main_text", "wilson_holonomy", "wilson_protocol"].map(String::from).to_vec();
    ResultTable::new(columns, rows, vec![false; 3])?
        .with_labels("scenario", scenarios.iter().map(|s| s.name.clone()).collect())
}

/// Largest order searched by [`caging_report`].
pub const CAGING_REPORT_MAX_ORDER: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CagingReport {
    pub name: String,
    pub interference: Mat2,
    pub wilson_main_text: f64,
    pub wilson_holonomy: f64,
    pub classification: Classification,
    pub spinor: Spinor,
    pub rightward_order: Option<usize>,
    pub leftward_order: Option<usize>,
}

pub fn caging_report(s: &Scenario) -> Result<CagingReport> {
    s.validate()?;
    let p = &s.lattice.plaquette;
    let t = interference_matrix(p);
    let psi = s.initial.spinor;
    let order = |dir| caging_order(&t, &psi, dir, CAGING_REPORT_MAX_ORDER, CAGING_TOL);
    Ok(CagingReport {
        name: s.name.clone(),
        interference: t,
        wilson_main_text: wilson_loop(p, WilsonOrdering::MainText),
        wilson_holonomy: wilson_loop(p, WilsonOrdering::Holonomy),
        classification: classify_plaquette(p, CAGING_TOL),
        spinor: psi,
        rightward_order: order(Direction::Rightward),
        leftward_order: order(Direction::Leftward),
    })
}

impl std::fmt::Display for CagingReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = |z: num_complex::Complex64| format!("{:+.6}{:+.6}i", z.re, z.im);
        let t = &self.interference;
        writeln!(f, "scenario: {}", self.name)?;
        writeln!(f, "interference matrix T:")?;
        writeln!(f, "  [{}, {}]", c(t[(0, 0)]), c(t[(0, 1)]))?;
        writeln!(f, "  [{}, {}]", c(t[(1, 0)]), c(t[(1, 1)]))?;
        writeln!(f, "wilson loop (main text ordering): {:.6}", self.wilson_main_text)?;
        writeln!(f, "wilson loop (holonomy ordering):  {:.6}", self.wilson_holonomy)?;
        let cl = &self.classification;
        match cl.theta {
            Some(theta) => writeln!(f, "abelian: yes, theta/pi = {:.6}", theta / std::f64::consts::PI)?,
            None => writeln!(f, "abelian: no")?,
        }
        writeln!(f, "state-independent caging: {}", if cl.state_independent_caging { "yes" } else { "no" })?;
        writeln!(f, "spinor: ({}, {})", c(self.spinor.down()), c(self.spinor.up()))?;
        let order = |o: Option<usize>| match o {
            Some(m) => m.to_string(),
            None => format!("none up to {CAGING_REPORT_MAX_ORDER}"),
        };
        writeln!(f, "caging order rightward: {}", order(self.rightward_order))?;
        write!(f, "caging order leftward:  {}", order(self.leftward_order))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::configs;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn caged() -> Scenario {
        Scenario::new(
            "t",
            configs::non_abelian_caging(),
            InitialState { manifold: Manifold::A, phonon: 0, spinor: Spinor::real(-FRAC_1_SQRT_2, FRAC_1_SQRT_2) },
        )
    }

    #[test]
    fn observable_time_must_lie_in_grid() {
        let mut s = caged();
        s.sweep = Some(SweepPlan::full_turn(SweepParameter::InitialPhase, 5, 0.6));
        assert!(matches!(s.validate(), Err(Error::InvalidParameter(_))));
        s.sweep.as_mut().unwrap().observable_time = 0.15;
        s.validate().unwrap();
    }

    #[test]
    fn coupling_sweep_needs_valid_rows() {
        let mut s = caged();
        let mut plan = SweepPlan::full_turn(SweepParameter::CouplingPhase, 5, 0.2);
        s.sweep = Some(plan.clone());
        assert!(s.validate().is_err());
        plan.phased_rows = vec![(5, 0)];
        s.sweep = Some(plan.clone());
        assert!(s.validate().is_err());
        plan.phased_rows = vec![(1, 0), (3, 1)];
        s.sweep = Some(plan);
        s.validate().unwrap();
    }

    #[test]
    fn coupling_sweep_point_matches_family() {
        let mut s = caged();
        s.lattice.plaquette = configs::non_abelian_coupling_phase(0.0);
        let mut plan = SweepPlan::full_turn(SweepParameter::CouplingPhase, 3, 0.2);
        plan.phased_rows = vec![(1, 0), (3, 1)];
        s.sweep = Some(plan);
        let point = s.at_sweep_value(0.7).unwrap();
        let expected = configs::non_abelian_coupling_phase(0.7);
        for (a, b) in point.lattice.plaquette.links().iter().zip(expected.links()) {
            assert!((a.matrix() - b.matrix()).norm() < 1e-15);
        }
    }

    #[test]
    fn result_table_rejects_bad_probability() {
        let cols = vec!["x".to_string(), "p".to_string()];
        assert!(ResultTable::new(cols.clone(), vec![vec![2.0, 0.5]], vec![false, true]).is_ok());
        assert!(matches!(
            ResultTable::new(cols, vec![vec![0.0, 1.1]], vec![false, true]),
            Err(Error::Conservation(_))
        ));
    }

    #[test]
    fn sweep_rows_follow_values_for_any_worker_count() {
        let mut s = caged();
        s.sweep = Some(SweepPlan::full_turn(SweepParameter::InitialPhase, 9, 0.15));
        let one = sweep(&s, 1).unwrap();
        let four = sweep(&s, 4).unwrap();
        assert_eq!(one.to_csv_string(), four.to_csv_string());
        let phis = one.column("phi_over_pi").unwrap();
        assert!((phis[4] - 1.0).abs() < 1e-15);
        assert!((one.column("P0").unwrap()[4] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn caging_report_text() {
        let r = caging_report(&caged()).unwrap();
        assert_eq!(r.rightward_order, Some(1));
        assert!(!r.classification.abelian);
        let text = r.to_string();
        assert!(text.contains("abelian: no"));
        assert!(text.contains("caging order rightward: 1"));
        let mut s = caged();
        s.initial.spinor = Spinor::phase_family(PI / 2.0);
        assert_eq!(caging_report(&s).unwrap().rightward_order, None);
    }
}
