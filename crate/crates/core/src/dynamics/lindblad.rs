//! Lindblad propagation by adaptive Dormand-Prince 5(4) on the density matrix.
//!
//! The master equation is
//!
//! ```text
//! d rho/dt = -i [H, rho] + sum_k ( C_k rho C_k^dag - {C_k^dag C_k, rho} / 2 )
//! ```
//!
//! with `C = sqrt(g1) a^dag`, `sqrt(g1) a` acting on the phonon ladder and
//! `C = sqrt(g2) sigma_z`, `sigma_z = P_D - P_S`. Writing
//! `G = (-i H - K/2) rho` with `K = sum_k C_k^dag C_k`, the right-hand side is
//! `G + G^dag + sum_k C_k rho C_k^dag`, which is Hermitian and traceless by
//! construction.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{check_hamiltonian, check_times, min_eigenvalue, DensityMatrix, NoiseModel, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::{add_detuning, Basis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step in ms.
    pub initial_step: f64,
    /// Steps smaller than this (ms) abort the integration.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        LindbladOptions {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: 1e-4,
            min_step: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

/// Conservation bookkeeping collected during an open-system run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LindbladDiagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest `|Tr rho - Tr rho0|` over every accepted step.
    pub max_trace_drift: f64,
    /// Largest `|rho - rho^dag|_F` at the output times.
    pub max_hermiticity_drift: f64,
    /// Smallest eigenvalue seen at the output times.
    pub min_eigenvalue: f64,
}

impl LindbladDiagnostics {
    pub(crate) fn measure(rho0: &DensityMatrix, states: &[DensityMatrix]) -> Self {
        let tr0 = rho0.trace();
        let mut d = LindbladDiagnostics { min_eigenvalue: f64::INFINITY, ..Default::default() };
        for s in states {
            d.observe(s.entries(), tr0);
        }
        d
    }

    fn observe(&mut self, rho: &DMatrix<C64>, tr0: C64) {
        self.max_trace_drift = self.max_trace_drift.max((rho.trace() - tr0).norm());
        self.max_hermiticity_drift = self.max_hermiticity_drift.max((rho - rho.adjoint()).norm());
        self.min_eigenvalue = self.min_eigenvalue.min(min_eigenvalue(rho));
    }

    /// Checks the open-system postconditions: trace within `1e-7`,
    /// Hermiticity within `1e-8`, eigenvalues above `-1e-6`.
    pub fn check(&self) -> Result<()> {
        if self.max_trace_drift >= 1e-7 {
            return Err(Error::Conservation(format!("trace drift {:.3e}", self.max_trace_drift)));
        }
        if self.max_hermiticity_drift >= 1e-8 {
            return Err(Error::Conservation(format!(
                "Hermiticity drift {:.3e}",
                self.max_hermiticity_drift
            )));
        }
        if self.min_eigenvalue < -1e-6 {
            return Err(Error::Conservation(format!("negative eigenvalue {:.3e}", self.min_eigenvalue)));
        }
        Ok(())
    }
}

/// Row-sorted sparse complex matrix.
#[derive(Debug, Clone)]
struct Sparse {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.norm() > 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Sparse { dim: m.nrows(), entries }
    }

    /// `self * b`.
    fn mul(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        let n = b.ncols();
        let mut out = DMatrix::zeros(self.dim, n);
        for col in 0..n {
            let bc = b.column(col);
            let mut oc = out.column_mut(col);
            for &(r, c, v) in &self.entries {
                oc[r] += v * bc[c];
            }
        }
        out
    }

    /// `self * b * self^dag` using `(self (self b)^dag)^dag`.
    fn sandwich(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        self.mul(&self.mul(b).adjoint()).adjoint()
    }
}

struct Generator {
    /// `-i H - K/2`.
    drift: Sparse,
    jumps: Vec<Sparse>,
}

impl Generator {
    fn new(h: &DMatrix<C64>, collapse: &[DMatrix<C64>]) -> Self {
        let dim = h.nrows();
        let mut k = DMatrix::<C64>::zeros(dim, dim);
        for c in collapse {
            k += c.adjoint() * c;
        }
        let drift = h * C64::new(0.0, -1.0) - k * C64::new(0.5, 0.0);
        Generator {
            drift: Sparse::from_dense(&drift),
            jumps: collapse.iter().map(Sparse::from_dense).collect(),
        }
    }

    fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let g = self.drift.mul(rho);
        let mut out = &g + g.adjoint();
        for c in &self.jumps {
            out += c.sandwich(rho);
        }
        out
    }
}

/// Collapse operators `sqrt(g1) a^dag`, `sqrt(g1) a`, `sqrt(g2) sigma_z`,
/// skipping those with zero rate.
pub(crate) fn collapse_operators(basis: Basis, noise: &NoiseModel) -> Vec<DMatrix<C64>> {
    let dim = basis.dim();
    let mut ops = Vec::new();
    if noise.gamma1 > 0.0 {
        let mut lower = DMatrix::<C64>::zeros(dim, dim);
        let shift = Basis::SITES_PER_RUNG;
        for i in shift..dim {
            let n = basis.phonon_of(i) as f64;
            lower[(i - shift, i)] = C64::new(n.sqrt(), 0.0);
        }
        let g = C64::new(noise.gamma1.sqrt(), 0.0);
        ops.push(lower.adjoint() * g);
        ops.push(lower * g);
    }
    if noise.gamma2 > 0.0 {
        let mut sz = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            let s = if basis.manifold_of(i).is_d_manifold() { 1.0 } else { -1.0 };
            sz[(i, i)] = C64::new(s * noise.gamma2.sqrt(), 0.0);
        }
        ops.push(sz);
    }
    ops
}

/// Open-system evolution. The noise model's detuning is added to `h` here.
pub fn evolve_lindblad(
    h: &DMatrix<C64>,
    rho0: &DensityMatrix,
    noise: &NoiseModel,
    times: &[f64],
) -> Result<Trajectory> {
    evolve_lindblad_with(h, rho0, noise, times, &LindbladOptions::default())
}

pub fn evolve_lindblad_with(
    h: &DMatrix<C64>,
    rho0: &DensityMatrix,
    noise: &NoiseModel,
    times: &[f64],
    options: &LindbladOptions,
) -> Result<Trajectory> {
    noise.validate()?;
    check_times(times)?;
    check_hamiltonian(h)?;
    let basis = rho0.basis();
    if h.nrows() != basis.dim() {
        return Err(Error::Dimension { expected: basis.dim(), found: h.nrows() });
    }
    let h = add_detuning(h.clone(), noise.detuning, noise.detuning_placement);
    let generator = Generator::new(&h, &collapse_operators(basis, noise));

    let tr0 = rho0.trace();
    let mut diag = LindbladDiagnostics { min_eigenvalue: f64::INFINITY, ..Default::default() };
    let mut rho = rho0.entries().clone();
    let mut t = 0.0;
    let mut step = options.initial_step;
    let mut states = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let remaining = target - t;
            let hit = step >= remaining;
            let h_try = if hit { remaining } else { step };
            let (next, err) = dopri_step(&generator, &rho, h_try, options);
            if !err.is_finite() {
                return Err(Error::Integrator { time: t, reason: "non-finite error estimate".into() });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                rho = next;
                t = if hit { target } else { t + h_try };
                diag.accepted_steps += 1;
                diag.max_trace_drift = diag.max_trace_drift.max((rho.trace() - tr0).norm());
                // A step clipped to land on an output time says nothing about the
                // natural step size, so keep the previous one.
                if !hit {
                    step = h_try * factor;
                }
            } else {
                diag.rejected_steps += 1;
                step = h_try * factor;
            }
            if step < options.min_step {
                return Err(Error::Integrator { time: t, reason: format!("step underflow ({step:.3e} ms)") });
            }
            if diag.accepted_steps + diag.rejected_steps > options.max_steps {
                return Err(Error::Integrator { time: t, reason: "step budget exhausted".into() });
            }
        }
        diag.observe(&rho, tr0);
        states.push(DensityMatrix::from_raw(rho.clone()));
    }
    if states.is_empty() {
        diag.min_eigenvalue = rho0.min_eigenvalue();
    }
    Ok(Trajectory::from_mixed(times.to_vec(), states, basis, diag))
}

// Dormand-Prince 5(4) tableau. The generator is autonomous, so the node
// times are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(base: &DMatrix<C64>, h: f64, terms: &[(f64, &DMatrix<C64>)]) -> DMatrix<C64> {
    let mut out = base.clone();
    for &(w, k) in terms {
        if w != 0.0 {
            out.zip_apply(k, |o, v| *o += v * (h * w));
        }
    }
    out
}

/// One Dormand-Prince step; returns the fifth-order update and the scaled
/// error norm (accept when `<= 1`).
fn dopri_step(
    g: &Generator,
    y: &DMatrix<C64>,
    h: f64,
    opts: &LindbladOptions,
) -> (DMatrix<C64>, f64) {
    let k1 = g.apply(y);
    let k2 = g.apply(&combine(y, h, &[(A21, &k1)]));
    let k3 = g.apply(&combine(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = g.apply(&combine(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = g.apply(&combine(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = g.apply(&combine(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let next = combine(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = g.apply(&next);
    let zero = DMatrix::zeros(y.nrows(), y.ncols());
    let err = combine(&zero, h, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
    let mut worst = 0.0f64;
    for ((e, a), b) in err.iter().zip(y.iter()).zip(next.iter()) {
        let scale = opts.atol + opts.rtol * a.norm().max(b.norm());
        worst = worst.max(e.norm() / scale);
    }
    (next, worst)
}
