//! Phonon-number tomography from blue-sideband Rabi flopping.
//!
//! For a state `sum_n sqrt(p(n)) |dn, n>` the bright-state population is
//! modelled as
//!
//! ```text
//! P(dn, t) = 1/2 sum_n p(n) [1 + cos(w_n t)],
//! w_n = Omega * exp(-eta^2/2) / sqrt(n+1) * eta * L_n^1(eta^2)
//! ```
//!
//! Once `Omega eta` is calibrated the frequencies are fixed and the model is
//! linear in `p`, so fitting is a non-negative least-squares problem with the
//! extra constraint `sum p <= 1`. Probability mass above `n_max` is left
//! unassigned.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::dynamics::format_value;
use crate::error::{Error, Result};

pub const DEFAULT_ETA: f64 = 0.092;
pub const DEFAULT_N_MAX: usize = 7;

/// Generalized Laguerre polynomial `L_n^alpha(x)` by the three-term recurrence
/// `(k+1) L_{k+1} = (2k + 1 + alpha - x) L_k - (k + alpha) L_{k-1}`.
pub fn laguerre_gen(n: usize, alpha: i32, x: f64) -> f64 {
    let a = alpha as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandModelParams {
    /// Carrier Rabi frequency `Omega` in rad/ms.
    pub omega: f64,
    /// Lamb-Dicke parameter.
    pub eta: f64,
    /// Highest phonon number in the fit.
    pub n_max: usize,
    /// Optional global decay rate (1/ms) of the cosine terms. Zero by default.
    pub envelope_rate: f64,
}

impl SidebandModelParams {
    pub fn new(omega: f64, eta: f64, n_max: usize) -> Result<Self> {
        let p = SidebandModelParams { omega, eta, n_max, envelope_rate: 0.0 };
        p.validate()?;
        Ok(p)
    }

    /// From the calibrated sideband Rabi frequency `Omega eta`.
    pub fn from_sideband_rabi(omega_eta: f64, eta: f64, n_max: usize) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be in (0, 1), got {eta}")));
        }
        Self::new(omega_eta / eta, eta, n_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter(format!("eta must be in (0, 1), got {}", self.eta)));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        if !(self.envelope_rate >= 0.0 && self.envelope_rate.is_finite()) {
            return Err(Error::InvalidParameter("envelope_rate must be >= 0".into()));
        }
        Ok(())
    }

    pub fn sideband_rabi(&self) -> f64 {
        self.omega * self.eta
    }

    /// Flopping frequency of the `n`-th phonon component.
    pub fn frequency(&self, n: usize) -> f64 {
        let eta2 = self.eta * self.eta;
        self.omega * (-eta2 / 2.0).exp() / ((n + 1) as f64).sqrt() * self.eta * laguerre_gen(n, 1, eta2)
    }

    /// Contribution of a unit population in bin `n` at time `t`.
    fn basis_function(&self, n: usize, t: f64) -> f64 {
        let envelope = if self.envelope_rate > 0.0 { (-self.envelope_rate * t).exp() } else { 1.0 };
        0.5 * (1.0 + envelope * (self.frequency(n) * t).cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhononDistribution {
    p: Vec<f64>,
}

impl PhononDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParameter("empty phonon distribution".into()));
        }
        if let Some(bad) = p.iter().find(|v| !(**v >= -1e-12 && **v <= 1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("probability {bad} outside [0, 1]")));
        }
        let total: f64 = p.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total} > 1")));
        }
        Ok(PhononDistribution { p })
    }

    /// Thermal occupation `nbar^n / (1 + nbar)^(n+1)` for `n = 0..=n_max`.
    pub fn thermal(nbar: f64, n_max: usize) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("nbar must be >= 0, got {nbar}")));
        }
        let p = (0..=n_max)
            .map(|n| nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1))
            .collect();
        Self::new(p)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    /// `sum |p - q|`, padding the shorter one with zeros.
    pub fn l1_distance(&self, other: &PhononDistribution) -> f64 {
        let len = self.p.len().max(other.p.len());
        (0..len)
            .map(|n| (self.p.get(n).unwrap_or(&0.0) - other.p.get(n).unwrap_or(&0.0)).abs())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidebandDataset {
    pub times: Vec<f64>,
    pub bright_probability: Vec<f64>,
    pub shots: Vec<u64>,
}

impl SidebandDataset {
    pub fn new(times: Vec<f64>, bright_probability: Vec<f64>, shots: Vec<u64>) -> Result<Self> {
        if times.len() != bright_probability.len() || times.len() != shots.len() {
            return Err(Error::InvalidParameter("dataset columns have unequal lengths".into()));
        }
        if shots.contains(&0) {
            return Err(Error::InvalidParameter("shots must be >= 1".into()));
        }
        if bright_probability.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("bright probability outside [0, 1]".into()));
        }
        Ok(SidebandDataset { times, bright_probability, shots })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `time_ms,bright_probability,shots`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "time_ms,bright_probability,shots")?;
        for ((t, p), s) in self.times.iter().zip(&self.bright_probability).zip(&self.shots) {
            writeln!(out, "{},{},{}", format_value(*t), format_value(*p), s)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut probs = Vec::new();
        let mut shots = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with("time_ms")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| Error::Config(format!("line {}: {what}", lineno + 1));
            if fields.len() != 3 {
                return Err(bad("expected 3 columns"));
            }
            times.push(fields[0].parse::<f64>().map_err(|_| bad("bad time"))?);
            probs.push(fields[1].parse::<f64>().map_err(|_| bad("bad probability"))?);
            shots.push(fields[2].parse::<u64>().map_err(|_| bad("bad shot count"))?);
        }
        Self::new(times, probs, shots)
    }
}

pub fn sideband_signal(
    dist: &PhononDistribution,
    params: &SidebandModelParams,
    times: &[f64],
) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            dist.p
                .iter()
                .enumerate()
                .map(|(n, p)| p * params.basis_function(n, t))
                .sum()
        })
        .collect()
}

/// Binomial shot-noise draws of the sideband signal, reproducible from `seed`.
pub fn synthesize_sideband_data(
    dist: &PhononDistribution,
    params: &SidebandModelParams,
    times: &[f64],
    shots: u64,
    seed: u64,
) -> Result<SidebandDataset> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = sideband_signal(dist, params, times);
    let mut probs = Vec::with_capacity(times.len());
    for p in signal {
        let p = p.clamp(0.0, 1.0);
        let draw = Binomial::new(shots, p)
            .map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?
            .sample(&mut rng);
        probs.push(draw as f64 / shots as f64);
    }
    SidebandDataset::new(times.to_vec(), probs, vec![shots; times.len()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinUncertainty {
    /// Standard deviation from the linear-model covariance.
    pub sigma: f64,
    /// Set when the bin sits on the `p = 0` constraint; only the upward
    /// direction is meaningful.
    pub one_sided: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub distribution: PhononDistribution,
    pub uncertainty: Vec<BinUncertainty>,
    pub residual_norm: f64,
    pub condition_number: f64,
    pub sum_constraint_active: bool,
    pub warnings: Vec<String>,
}

impl FitReport {
    /// CSV-like text report.
    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# residual_norm,{}", format_value(self.residual_norm))?;
        writeln!(out, "# condition_number,{:e}", self.condition_number)?;
        writeln!(out, "# sum_constraint_active,{}", self.sum_constraint_active)?;
        for w in &self.warnings {
            writeln!(out, "# warning,{w}")?;
        }
        writeln!(out, "n,p,uncertainty,one_sided")?;
        for (n, (p, u)) in self.distribution.p.iter().zip(&self.uncertainty).enumerate() {
            writeln!(out, "{n},{},{},{}", format_value(*p), format_value(u.sigma), u.one_sided)?;
        }
        Ok(())
    }
}

/// Designs with a larger 2-norm condition number get a warning.
pub const CONDITION_WARNING: f64 = 1e6;

pub fn design_matrix(params: &SidebandModelParams, times: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(times.len(), params.n_max + 1, |i, n| params.basis_function(n, times[i]))
}

/// Least-squares phonon populations on `{p >= 0, sum p <= 1}` with the
/// sideband Rabi frequency held fixed.
pub fn fit_phonon_populations(
    data: &SidebandDataset,
    params: &SidebandModelParams,
) -> Result<FitReport> {
    params.validate()?;
    let k = params.n_max + 1;
    if data.len() < k {
        return Err(Error::Fit(format!(
            "{} data points cannot determine {k} populations",
            data.len()
        )));
    }
    let a = design_matrix(params, &data.times);
    let y = DVector::from_column_slice(&data.bright_probability);
    let sv = a.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let mut warnings = Vec::new();
    if !(condition_number < CONDITION_WARNING) {
        warnings.push(format!(
            "ill-conditioned design (condition number {condition_number:.3e}); \
             extend the time window to resolve all n <= {} frequencies",
            params.n_max
        ));
    }

    // Gradient threshold taken from the unweighted problem so the heavy row
    // below cannot mask the data terms.
    let tol = 1e-12 * smax.max(1.0) * y.norm().max(1.0);
    let mut p = nnls_with_tol(&a, &y, tol)?;
    let mut sum_constraint_active = false;
    if p.sum() > 1.0 + 1e-12 {
        // The convex optimum then lies on sum p = 1; enforce it with a heavy row.
        let w = 1e4 * smax.max(1.0);
        let mut a_aug = a.clone().insert_row(a.nrows(), w);
        a_aug.row_mut(a.nrows()).fill(w);
        let y_aug = y.clone().push(w);
        p = nnls_with_tol(&a_aug, &y_aug, tol)?;
        let s = p.sum();
        if s > 0.0 {
            p /= s.max(1.0);
        }
        sum_constraint_active = true;
    }
    let residual = &a * &p - &y;
    let residual_norm = residual.norm();

    let free: Vec<usize> = (0..k).filter(|&n| p[n] > 0.0).collect();
    let dof = data.len().saturating_sub(free.len()).max(1);
    let sigma2 = residual.norm_squared() / dof as f64;
    let mut uncertainty = vec![BinUncertainty { sigma: 0.0, one_sided: false }; k];
    if let Some(cov_free) = gram_inverse(&a, &free) {
        for (j, &n) in free.iter().enumerate() {
            uncertainty[n].sigma = (sigma2 * cov_free[(j, j)]).max(0.0).sqrt();
        }
    }
    let all: Vec<usize> = (0..k).collect();
    let cov_all = gram_inverse(&a, &all);
    for n in (0..k).filter(|n| !free.contains(n)) {
        uncertainty[n].one_sided = true;
        if let Some(c) = &cov_all {
            uncertainty[n].sigma = (sigma2 * c[(n, n)]).max(0.0).sqrt();
        }
    }

    let probs = p.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(FitReport {
        distribution: PhononDistribution::new(probs)?,
        uncertainty,
        residual_norm,
        condition_number,
        sum_constraint_active,
        warnings,
    })
}

fn gram_inverse(a: &DMatrix<f64>, cols: &[usize]) -> Option<DMatrix<f64>> {
    if cols.is_empty() {
        return None;
    }
    let sub = a.select_columns(cols);
    (sub.transpose() * &sub).try_inverse()
}

/// Lawson-Hanson active-set solver for `min |A x - b|` subject to `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    nnls_with_tol(a, b, 1e-12 * a.norm().max(1.0) * b.norm().max(1.0))
}

/// [`nnls`] with an explicit threshold on the gradient `A^T (b - A x)`.
pub fn nnls_with_tol(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 30 * n.max(1);
    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else {
            return Ok(x);
        };
        passive[j] = true;
        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z_p = solve_ls(&a.select_columns(&cols), b)?;
            if z_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (v, &c) in z_p.iter().zip(&cols) {
                    x[c] = *v;
                }
                break;
            }
            // Step back towards the feasible region.
            let mut alpha = f64::INFINITY;
            for (v, &c) in z_p.iter().zip(&cols) {
                if *v <= 0.0 {
                    alpha = alpha.min(x[c] / (x[c] - v));
                }
            }
            for (v, &c) in z_p.iter().zip(&cols) {
                x[c] += alpha * (v - x[c]);
            }
            for &c in &cols {
                if x[c] <= tol {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            if passive.iter().all(|p| !p) {
                break;
            }
        }
    }
    Err(Error::Fit("active-set iteration did not converge".into()))
}

fn solve_ls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .svd(true, true)
        .solve(b, 1e-14)
        .map_err(|e| Error::Fit(format!("least-squares solve failed: {e}")))
}
