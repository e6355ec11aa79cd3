//! State propagation on the lattice and the observables read out from it.

mod lindblad;
mod wilson;

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::gauge::Spinor;
use crate::lattice::{hermiticity_deviation, Basis, DetuningPlacement, Manifold, SiteIndex, Spin};

pub use lindblad::{evolve_lindblad, evolve_lindblad_with, LindbladDiagnostics, LindbladOptions};
pub use wilson::{reconstruct_loop_map, wilson_loop_protocol, wilson_loop_protocol_with, LoopTomography};

/// Pure state on the `6(N+1)`-dimensional lattice space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: DVector<C64>,
}

impl QuantumState {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        Basis::from_dim(amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state norm {norm} is not 1")));
        }
        Ok(QuantumState { amplitudes })
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn basis(&self) -> Basis {
        Basis::from_dim(self.amplitudes.len()).expect("validated on construction")
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let a = &self.amplitudes;
        DensityMatrix { entries: a * a.adjoint() }
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension { expected: entries.nrows(), found: entries.ncols() });
        }
        Basis::from_dim(entries.nrows())?;
        let herm = hermiticity_deviation(&entries);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-8 {
            return Err(Error::InvalidState(format!("density matrix trace {trace} is not 1")));
        }
        let min_eig = min_eigenvalue(&entries);
        if min_eig < -1e-8 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(DensityMatrix { entries })
    }

    pub(crate) fn from_raw(entries: DMatrix<C64>) -> Self {
        DensityMatrix { entries }
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn basis(&self) -> Basis {
        Basis::from_dim(self.entries.nrows()).expect("validated on construction")
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Anything with a diagonal in the lattice basis.
pub trait SiteResolved {
    fn basis(&self) -> Basis;
    /// Populations in basis order.
    fn populations(&self) -> Vec<f64>;
}

impl SiteResolved for QuantumState {
    fn basis(&self) -> Basis {
        QuantumState::basis(self)
    }

    fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

impl SiteResolved for DensityMatrix {
    fn basis(&self) -> Basis {
        DensityMatrix::basis(self)
    }

    fn populations(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|d| d.re).collect()
    }
}

pub fn site_populations<S: SiteResolved>(state: &S) -> BTreeMap<SiteIndex, f64> {
    let basis = state.basis();
    basis.sites().zip(state.populations()).collect()
}

/// Total population on the six `n = 0` basis states.
pub fn p0<S: SiteResolved>(state: &S) -> f64 {
    state.populations()[..Basis::SITES_PER_RUNG].iter().sum()
}

/// Open-system parameters. Rates in 1/ms, detuning in rad/ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Phonon heating/cooling rate, collapse operators `sqrt(g1) a^dag`, `sqrt(g1) a`.
    pub gamma1: f64,
    /// Spin dephasing rate, collapse operator `sqrt(g2) sigma_z`.
    pub gamma2: f64,
    /// Static detuning folded into the Hamiltonian.
    pub detuning: f64,
    pub detuning_placement: DetuningPlacement,
    /// Mean phonon number of the imperfectly cooled initial state.
    pub initial_nbar: f64,
}

impl Default for NoiseModel {
    /// 100 Hz heating, 200 Hz dephasing, 220 Hz detuning, `nbar = 0.05`.
    fn default() -> Self {
        NoiseModel {
            gamma1: 0.1,
            gamma2: 0.2,
            detuning: 2.0 * std::f64::consts::PI * 0.22,
            detuning_placement: DetuningPlacement::DManifold,
            initial_nbar: 0.05,
        }
    }
}

impl NoiseModel {
    /// All imperfections off.
    pub fn none() -> Self {
        NoiseModel {
            gamma1: 0.0,
            gamma2: 0.0,
            detuning: 0.0,
            detuning_placement: DetuningPlacement::DManifold,
            initial_nbar: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("initial_nbar", self.initial_nbar),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        Ok(())
    }
}

/// Places `spinor` on `(manifold, down, phonon)` and `(manifold, up, phonon)`.
pub fn prepare_state(
    manifold: Manifold,
    phonon: usize,
    spinor: &Spinor,
    basis: Basis,
) -> Result<QuantumState> {
    spinor.require_normalized()?;
    let down = basis.index(SiteIndex::new(manifold, Spin::Down, phonon))?;
    let up = basis.index(SiteIndex::new(manifold, Spin::Up, phonon))?;
    let mut amps = DVector::zeros(basis.dim());
    amps[down] = spinor.down();
    amps[up] = spinor.up();
    QuantumState::new(amps)
}

/// Thermal phonon weights `p(k) ~ x^k`, `x = nbar / (1 + nbar)`, for
/// `k = 0..=k_max`, renormalised.
pub fn thermal_weights(nbar: f64, k_max: usize) -> Vec<f64> {
    if nbar == 0.0 {
        let mut w = vec![0.0; k_max + 1];
        w[0] = 1.0;
        return w;
    }
    let x = nbar / (1.0 + nbar);
    let raw: Vec<f64> = (0..=k_max).map(|k| x.powi(k as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Imperfectly cooled preparation: the spinor is placed at phonon
/// `phonon + k` with thermal weight `p(k)`, truncated at the cutoff.
pub fn prepare_thermal_state(
    manifold: Manifold,
    phonon: usize,
    spinor: &Spinor,
    nbar: f64,
    basis: Basis,
) -> Result<DensityMatrix> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("initial_nbar must be >= 0, got {nbar}")));
    }
    let pure = prepare_state(manifold, phonon, spinor, basis)?;
    let weights = thermal_weights(nbar, basis.cutoff() - phonon);
    let dim = basis.dim();
    let mut rho = DMatrix::zeros(dim, dim);
    let base = pure.to_density_matrix();
    let shift = Basis::SITES_PER_RUNG;
    for (k, w) in weights.iter().enumerate() {
        for r in 0..dim - k * shift {
            for c in 0..dim - k * shift {
                let v = base.entries[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    rho[(r + k * shift, c + k * shift)] += v * *w;
                }
            }
        }
    }
    DensityMatrix::new(rho)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryStates {
    Pure(Vec<QuantumState>),
    Mixed(Vec<DensityMatrix>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: TrajectoryStates,
    /// `populations[k][i]`: population of basis index `i` at `times[k]`.
    pub populations: Vec<Vec<f64>>,
    basis: Basis,
    pub diagnostics: Option<LindbladDiagnostics>,
}

impl Trajectory {
    fn from_pure(times: Vec<f64>, states: Vec<QuantumState>, basis: Basis) -> Self {
        let populations = states.iter().map(SiteResolved::populations).collect();
        Trajectory { times, states: TrajectoryStates::Pure(states), populations, basis, diagnostics: None }
    }

    fn from_mixed(
        times: Vec<f64>,
        states: Vec<DensityMatrix>,
        basis: Basis,
        diagnostics: LindbladDiagnostics,
    ) -> Self {
        let populations = states.iter().map(SiteResolved::populations).collect();
        Trajectory {
            times,
            states: TrajectoryStates::Mixed(states),
            populations,
            basis,
            diagnostics: Some(diagnostics),
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn population(&self, k: usize, site: SiteIndex) -> Result<f64> {
        Ok(self.populations[k][self.basis.index(site)?])
    }

    /// Both spin components of site `manifold_phonon` at time index `k`.
    pub fn site_population(&self, k: usize, manifold: Manifold, phonon: usize) -> Result<f64> {
        Ok(self.population(k, SiteIndex::new(manifold, Spin::Down, phonon))?
            + self.population(k, SiteIndex::new(manifold, Spin::Up, phonon))?)
    }

    /// Population summed over basis states selected by `keep`.
    pub fn population_where(&self, k: usize, keep: impl Fn(SiteIndex) -> bool) -> f64 {
        self.basis
            .sites()
            .zip(&self.populations[k])
            .filter(|(s, _)| keep(*s))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn p0(&self, k: usize) -> f64 {
        self.populations[k][..Basis::SITES_PER_RUNG].iter().sum()
    }

    pub fn p0_series(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.p0(k)).collect()
    }

    /// Largest `|sum_i p_i - 1|` over the output times.
    pub fn max_population_drift(&self) -> f64 {
        self.populations
            .iter()
            .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with `time_ms`, one column per basis state, then `P0`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let mut header = vec!["time_ms".to_string()];
        header.extend(self.basis.sites().map(|s| s.label()));
        header.push("P0".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format_value(*t)];
            row.extend(self.populations[k].iter().map(|p| format_value(*p)));
            row.push(format_value(self.p0(k)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Fixed-precision formatting shared by every CSV writer.
pub fn format_value(v: f64) -> String {
    // Values that round to zero print as "0.000000000000", never "-0.000000000000".
    let v = if v.abs() < 5e-13 { 0.0 } else { v };
    format!("{v:.12}")
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidParameter("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("times must be sorted".into()));
    }
    Ok(())
}

fn check_hamiltonian(h: &DMatrix<C64>) -> Result<()> {
    let dev = hermiticity_deviation(h);
    let scale = h.norm().max(1.0);
    if !(dev <= 1e-12 * scale) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// Spectral propagator of a time-independent Hermitian Hamiltonian.
pub struct Propagator {
    vectors: DMatrix<C64>,
    energies: Vec<f64>,
}

impl Propagator {
    pub fn new(h: &DMatrix<C64>) -> Result<Self> {
        check_hamiltonian(h)?;
        let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        Ok(Propagator {
            vectors: eig.eigenvectors,
            energies: eig.eigenvalues.iter().cloned().collect(),
        })
    }

    /// `exp(-i H t)`.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let phases = DVector::from_iterator(
            self.energies.len(),
            self.energies.iter().map(|e| C64::cis(-e * t)),
        );
        let mut scaled = self.vectors.clone();
        for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *ph;
        }
        scaled * self.vectors.adjoint()
    }

    pub fn apply(&self, psi: &DVector<C64>, t: f64) -> DVector<C64> {
        let mut coeffs = self.vectors.adjoint() * psi;
        for (c, e) in coeffs.iter_mut().zip(&self.energies) {
            *c *= C64::cis(-e * t);
        }
        &self.vectors * coeffs
    }
}

/// Exact closed-system propagation through the eigenbasis of `h`.
pub fn evolve_unitary(h: &DMatrix<C64>, psi0: &QuantumState, times: &[f64]) -> Result<Trajectory> {
    if h.nrows() != psi0.amplitudes.len() {
        return Err(Error::Dimension { expected: h.nrows(), found: psi0.amplitudes.len() });
    }
    check_times(times)?;
    let prop = Propagator::new(h)?;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let amps = if t == 0.0 { psi0.amplitudes.clone() } else { prop.apply(&psi0.amplitudes, t) };
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Conservation(format!("norm {norm} at t = {t} ms")));
        }
        states.push(QuantumState { amplitudes: amps });
    }
    Ok(Trajectory::from_pure(times.to_vec(), states, psi0.basis()))
}

/// Closed-system propagation of a density matrix, `U rho U^dag`.
pub fn evolve_unitary_mixed(
    h: &DMatrix<C64>,
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Trajectory> {
    check_times(times)?;
    let prop = Propagator::new(h)?;
    let states: Vec<DensityMatrix> = times
        .iter()
        .map(|&t| {
            let u = prop.unitary(t);
            DensityMatrix::from_raw(&u * &rho0.entries * u.adjoint())
        })
        .collect();
    let diagnostics = LindbladDiagnostics::measure(rho0, &states);
    Ok(Trajectory::from_mixed(times.to_vec(), states, rho0.basis(), diagnostics))
}

/// Uniform grid of `points` times on `[start, stop]`.
pub fn time_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|k| start + (stop - start) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::configs;
    use crate::lattice::{build_hamiltonian, LatticeConfig};
    use std::f64::consts::FRAC_1_SQRT_2 as S;

    /// Independent propagator: Taylor series of `exp(-i H dt)` applied over
    /// many small steps.
    fn series_oracle(h: &DMatrix<C64>, psi: &DVector<C64>, t: f64, steps: usize) -> DVector<C64> {
        let dt = t / steps as f64;
        let mut v = psi.clone();
        for _ in 0..steps {
            let mut term = v.clone();
            let mut acc = v.clone();
            for k in 1..30 {
                term = (h * &term) * C64::new(0.0, -dt / k as f64);
                acc += &term;
                if term.norm() < 1e-18 {
                    break;
                }
            }
            v = acc;
        }
        v
    }

    #[test]
    fn prepare_state_examples() {
        let basis = Basis::new(8);
        let psi = prepare_state(Manifold::A, 0, &Spinor::real(-S, S), basis).unwrap();
        let a = psi.amplitudes();
        assert!((a[0] - C64::new(-S, 0.0)).norm() < 1e-15);
        assert!((a[1] - C64::new(S, 0.0)).norm() < 1e-15);
        assert_eq!(a.iter().filter(|x| x.norm() > 0.0).count(), 2);

        let psi = prepare_state(Manifold::A, 2, &Spinor::real(S, -S), basis).unwrap();
        assert!((psi.amplitudes()[12] - C64::new(S, 0.0)).norm() < 1e-15);
        assert!((psi.amplitudes()[13] - C64::new(-S, 0.0)).norm() < 1e-15);

        let psi = prepare_state(Manifold::A, 0, &Spinor::real(1.0, 0.0), basis).unwrap();
        assert_eq!(psi.amplitudes().iter().filter(|x| x.norm() > 0.0).count(), 1);

        assert!(matches!(
            prepare_state(Manifold::B, 9, &Spinor::real(1.0, 0.0), basis),
            Err(Error::PhononOutOfRange { .. })
        ));
        assert!(prepare_state(Manifold::A, 0, &Spinor::real(1.0, 1.0), basis).is_err());
    }

    #[test]
    fn p0_examples() {
        let basis = Basis::new(8);
        let psi = prepare_state(Manifold::A, 0, &Spinor::real(-S, S), basis).unwrap();
        assert!((p0(&psi) - 1.0).abs() < 1e-15);

        let d = basis.dim();
        let flat = DVector::from_element(d, C64::new(1.0 / (d as f64).sqrt(), 0.0));
        let flat = QuantumState::new(flat).unwrap();
        assert!((p0(&flat) - 1.0 / 9.0).abs() < 1e-12);
        let pops = site_populations(&flat);
        assert_eq!(pops.len(), d);
        assert!((pops.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p0(&flat.to_density_matrix()) - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        let basis = Basis::new(1);
        let mut m = DMatrix::zeros(12, 12);
        m[(0, 0)] = C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 1)] = C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 0)] = C64::new(0.0, -0.1);
        assert!(DensityMatrix::new(m).is_ok());
        let mut neg = DMatrix::zeros(12, 12);
        neg[(0, 0)] = C64::new(1.5, 0.0);
        neg[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(neg).is_err());
        assert_eq!(basis.dim(), 12);
    }

    #[test]
    fn thermal_preparation() {
        let basis = Basis::new(8);
        let rho = prepare_thermal_state(Manifold::A, 0, &Spinor::real(1.0, 0.0), 0.05, basis).unwrap();
        let x = 0.05 / 1.05;
        let pops = rho.populations();
        assert!((pops[6] / pops[0] - x).abs() < 1e-12);
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        let cold = prepare_thermal_state(Manifold::A, 2, &Spinor::real(S, -S), 0.0, basis).unwrap();
        let pure = prepare_state(Manifold::A, 2, &Spinor::real(S, -S), basis).unwrap();
        assert!((cold.entries() - pure.to_density_matrix().entries()).norm() < 1e-15);
    }

    #[test]
    fn unitary_identity_at_zero_and_rejects_non_hermitian() {
        let cfg = LatticeConfig::new(configs::non_abelian_caging());
        let h = build_hamiltonian(&cfg).unwrap();
        let psi = prepare_state(Manifold::A, 0, &Spinor::real(S, S), cfg.basis()).unwrap();
        let tr = evolve_unitary(&h, &psi, &[0.0]).unwrap();
        match &tr.states {
            TrajectoryStates::Pure(s) => assert_eq!(s[0], psi),
            _ => unreachable!(),
        }
        let mut bad = h.clone();
        bad[(0, 2)] += C64::new(1.0, 0.0);
        assert!(matches!(evolve_unitary(&bad, &psi, &[0.1]), Err(Error::NotHermitian { .. })));
        assert!(evolve_unitary(&h, &psi, &[0.2, 0.1]).is_err());
        assert!(evolve_unitary(&h, &psi, &[-0.1]).is_err());
    }

    #[test]
    fn abelian_confinement_matches_series_oracle() {
        // N = 2 truncation, cross-checked against the Taylor-series propagator.
        let cfg = LatticeConfig::new(configs::abelian_caging()).with_cutoff(2);
        let h = build_hamiltonian(&cfg).unwrap();
        let psi = prepare_state(Manifold::A, 0, &Spinor::real(-S, S), cfg.basis()).unwrap();
        let times = time_grid(0.0, 0.5, 11);
        let tr = evolve_unitary(&h, &psi, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let oracle = series_oracle(&h, psi.amplitudes(), t, 200);
            let cage: f64 = oracle.iter().take(6).map(|a| a.norm_sqr()).sum();
            assert!((cage - 1.0).abs() < 1e-8, "oracle leak at {t}");
            assert!((tr.p0(k) - 1.0).abs() < 1e-8);
            match &tr.states {
                TrajectoryStates::Pure(s) => assert!((s[k].amplitudes() - &oracle).norm() < 1e-9),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn non_abelian_in_phase_spreads() {
        let cfg = LatticeConfig::new(configs::non_abelian_caging());
        let h = build_hamiltonian(&cfg).unwrap();
        let psi = prepare_state(Manifold::A, 0, &Spinor::real(S, S), cfg.basis()).unwrap();
        let tr = evolve_unitary(&h, &psi, &[0.1]).unwrap();
        let a1 = tr.site_population(0, Manifold::A, 1).unwrap();

        let small = LatticeConfig::new(configs::non_abelian_caging()).with_cutoff(2);
        let hs = build_hamiltonian(&small).unwrap();
        let ps = prepare_state(Manifold::A, 0, &Spinor::real(S, S), small.basis()).unwrap();
        let oracle = series_oracle(&hs, ps.amplitudes(), 0.1, 200);
        let a1_oracle = oracle[6].norm_sqr() + oracle[7].norm_sqr();
        assert!(a1_oracle > 0.05, "oracle A1 = {a1_oracle}");
        assert!(a1 > 0.05, "A1 = {a1}");
    }

    #[test]
    fn csv_layout() {
        let cfg = LatticeConfig::new(configs::abelian_caging()).with_cutoff(1);
        let h = build_hamiltonian(&cfg).unwrap();
        let psi = prepare_state(Manifold::A, 0, &Spinor::real(-S, S), cfg.basis()).unwrap();
        let tr = evolve_unitary(&h, &psi, &[0.0, 0.1]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("time_ms,A_dn_0,A_up_0,B_dn_0"));
        assert!(header.ends_with("C_up_1,P0"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(header.split(',').count(), 14);
    }

    #[test]
    fn time_grid_endpoints() {
        let g = time_grid(0.0, 0.5, 101);
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 0.5);
        assert!((g[30] - 0.15).abs() < 1e-15);
    }
}
