//! Spin-phonon rhombic lattice on the truncated `6(N+1)`-dimensional space.
//!
//! Basis ordering is phonon-major, then manifold `(A, B, C)`, then spin
//! `(down, up)`:
//!
//! ```text
//! index = 6 n + 2 manifold + spin
//! ```
//!
//! `A` sites live in the S1/2 manifold of the ion, `B` and `C` sites in D5/2.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::gauge::{Mat2, Plaquette};

/// `2 pi x 2.5 kHz` in rad/ms.
pub const DEFAULT_COUPLING: f64 = 2.0 * PI * 2.5;
pub const DEFAULT_CUTOFF: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manifold {
    A,
    B,
    C,
}

impl Manifold {
    pub const ALL: [Manifold; 3] = [Manifold::A, Manifold::B, Manifold::C];

    fn offset(self) -> usize {
        match self {
            Manifold::A => 0,
            Manifold::B => 1,
            Manifold::C => 2,
        }
    }

    /// B and C are encoded in the D5/2 manifold.
    pub fn is_d_manifold(self) -> bool {
        !matches!(self, Manifold::A)
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Manifold::A => "A",
            Manifold::B => "B",
            Manifold::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Down,
    Up,
}

impl Spin {
    pub const ALL: [Spin; 2] = [Spin::Down, Spin::Up];

    fn offset(self) -> usize {
        match self {
            Spin::Down => 0,
            Spin::Up => 1,
        }
    }
}

/// One basis state `(manifold, spin, phonon)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteIndex {
    pub manifold: Manifold,
    pub spin: Spin,
    pub phonon: usize,
}

impl SiteIndex {
    pub fn new(manifold: Manifold, spin: Spin, phonon: usize) -> Self {
        SiteIndex { manifold, spin, phonon }
    }

    /// Column label such as `A_dn_0`.
    pub fn label(&self) -> String {
        let spin = match self.spin {
            Spin::Down => "dn",
            Spin::Up => "up",
        };
        format!("{}_{}_{}", self.manifold, spin, self.phonon)
    }
}

/// Index bookkeeping for a lattice truncated at phonon number `cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    cutoff: usize,
}

impl Basis {
    pub const SITES_PER_RUNG: usize = 6;

    pub fn new(cutoff: usize) -> Self {
        Basis { cutoff }
    }

    /// Recovers the basis from a matrix/vector dimension.
    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim < 2 * Self::SITES_PER_RUNG || !dim.is_multiple_of(Self::SITES_PER_RUNG) {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} is not 6(N+1) with N >= 1"
            )));
        }
        Ok(Basis::new(dim / Self::SITES_PER_RUNG - 1))
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        Self::SITES_PER_RUNG * (self.cutoff + 1)
    }

    pub fn index(&self, site: SiteIndex) -> Result<usize> {
        if site.phonon > self.cutoff {
            return Err(Error::PhononOutOfRange { phonon: site.phonon, cutoff: self.cutoff });
        }
        Ok(self.index_unchecked(site.manifold, site.spin, site.phonon))
    }

    pub(crate) fn index_unchecked(&self, manifold: Manifold, spin: Spin, phonon: usize) -> usize {
        Self::SITES_PER_RUNG * phonon + 2 * manifold.offset() + spin.offset()
    }

    pub fn site(&self, index: usize) -> Result<SiteIndex> {
        if index >= self.dim() {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for dimension {}",
                self.dim()
            )));
        }
        let phonon = index / Self::SITES_PER_RUNG;
        let r = index % Self::SITES_PER_RUNG;
        let manifold = Manifold::ALL[r / 2];
        let spin = Spin::ALL[r % 2];
        Ok(SiteIndex { manifold, spin, phonon })
    }

    /// All sites in basis order.
    pub fn sites(&self) -> impl Iterator<Item = SiteIndex> + '_ {
        (0..self.dim()).map(|i| self.site(i).expect("index in range"))
    }

    pub fn phonon_of(&self, index: usize) -> usize {
        index / Self::SITES_PER_RUNG
    }

    pub fn manifold_of(&self, index: usize) -> Manifold {
        Manifold::ALL[(index % Self::SITES_PER_RUNG) / 2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetuningPlacement {
    /// `+delta` on every B and C basis state.
    #[default]
    DManifold,
    /// `+delta/2` on D-manifold states, `-delta/2` on S-manifold states.
    SigmaZHalf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    /// Coupling strength `J` in rad/ms.
    pub coupling: f64,
    pub cutoff: usize,
    pub plaquette: Plaquette,
    /// Drop the `sqrt(n+1)` red-sideband factor.
    pub translational_invariant: bool,
    /// Static detuning in rad/ms, applied by [`build_hamiltonian`].
    pub detuning: f64,
    pub detuning_placement: DetuningPlacement,
}

impl LatticeConfig {
    pub fn new(plaquette: Plaquette) -> Self {
        LatticeConfig {
            coupling: DEFAULT_COUPLING,
            cutoff: DEFAULT_CUTOFF,
            plaquette,
            translational_invariant: false,
            detuning: 0.0,
            detuning_placement: DetuningPlacement::default(),
        }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_translational_invariance(mut self, on: bool) -> Self {
        self.translational_invariant = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling must be positive, got {}",
                self.coupling
            )));
        }
        if self.cutoff < 1 {
            return Err(Error::InvalidParameter("phonon cutoff must be at least 1".into()));
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        Ok(())
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.cutoff)
    }

    pub fn site_index(&self, site: SiteIndex) -> Result<usize> {
        self.basis().index(site)
    }

    pub fn index_to_site(&self, index: usize) -> Result<SiteIndex> {
        self.basis().site(index)
    }

    fn sideband_factor(&self, n: usize) -> f64 {
        if self.translational_invariant {
            1.0
        } else {
            ((n + 1) as f64).sqrt()
        }
    }
}

/// The four laser-driven couplings, labelled like the links they carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// Carrier `b_n^dag U1 a_n`.
    U1,
    /// Red sideband `a_{n+1}^dag U2 b_n`.
    U2,
    /// Carrier `c_n^dag U3 a_n`.
    U3,
    /// Red sideband `a_{n+1}^dag U4 c_n`.
    U4,
}

impl Link {
    pub const ALL: [Link; 4] = [Link::U1, Link::U2, Link::U3, Link::U4];
}

/// Adds `(J/2) s * (to^dag U from) + h.c.` for one block.
fn add_block(
    h: &mut DMatrix<C64>,
    basis: &Basis,
    to: (Manifold, usize),
    from: (Manifold, usize),
    u: &Mat2,
    amplitude: f64,
) {
    for (i, &si) in Spin::ALL.iter().enumerate() {
        for (j, &sj) in Spin::ALL.iter().enumerate() {
            let v = u[(i, j)] * amplitude;
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let r = basis.index_unchecked(to.0, si, to.1);
            let c = basis.index_unchecked(from.0, sj, from.1);
            h[(r, c)] += v;
            h[(c, r)] += v.conj();
        }
    }
}

fn add_link_terms(h: &mut DMatrix<C64>, config: &LatticeConfig, link: Link) {
    let basis = config.basis();
    let half = config.coupling / 2.0;
    let p = &config.plaquette;
    let n_max = config.cutoff;
    match link {
        Link::U1 => {
            for n in 0..=n_max {
                add_block(h, &basis, (Manifold::B, n), (Manifold::A, n), p.u1.matrix(), half);
            }
        }
        Link::U3 => {
            for n in 0..=n_max {
                add_block(h, &basis, (Manifold::C, n), (Manifold::A, n), p.u3.matrix(), half);
            }
        }
        // Red-sideband terms that would create phonon N+1 are dropped.
        Link::U2 => {
            for n in 0..n_max {
                let amp = half * config.sideband_factor(n);
                add_block(h, &basis, (Manifold::A, n + 1), (Manifold::B, n), p.u2.matrix(), amp);
            }
        }
        Link::U4 => {
            for n in 0..n_max {
                let amp = half * config.sideband_factor(n);
                add_block(h, &basis, (Manifold::A, n + 1), (Manifold::C, n), p.u4.matrix(), amp);
            }
        }
    }
}

/// Full lattice Hamiltonian, including `config.detuning` if nonzero.
pub fn build_hamiltonian(config: &LatticeConfig) -> Result<DMatrix<C64>> {
    config.validate()?;
    let dim = config.basis().dim();
    let mut h = DMatrix::zeros(dim, dim);
    for link in Link::ALL {
        add_link_terms(&mut h, config, link);
    }
    if config.detuning != 0.0 {
        h = add_detuning(h, config.detuning, config.detuning_placement);
    }
    Ok(h)
}

/// Hamiltonian with only one laser coupling switched on (all phonon rungs).
pub fn link_hamiltonian(config: &LatticeConfig, link: Link) -> Result<DMatrix<C64>> {
    config.validate()?;
    let dim = config.basis().dim();
    let mut h = DMatrix::zeros(dim, dim);
    add_link_terms(&mut h, config, link);
    Ok(h)
}

/// Adds a static detuning on the diagonal.
pub fn add_detuning(mut h: DMatrix<C64>, delta: f64, placement: DetuningPlacement) -> DMatrix<C64> {
    if delta == 0.0 {
        return h;
    }
    let basis = Basis::new(h.nrows() / Basis::SITES_PER_RUNG - 1);
    for i in 0..h.nrows() {
        let d_state = basis.manifold_of(i).is_d_manifold();
        let shift = match (placement, d_state) {
            (DetuningPlacement::DManifold, true) => delta,
            (DetuningPlacement::DManifold, false) => 0.0,
            (DetuningPlacement::SigmaZHalf, true) => delta / 2.0,
            (DetuningPlacement::SigmaZHalf, false) => -delta / 2.0,
        };
        h[(i, i)] += shift;
    }
    h
}

/// `|H - H^dag|_F`.
pub fn hermiticity_deviation(h: &DMatrix<C64>) -> f64 {
    (h - h.adjoint()).norm()
}

/// Writes a dense complex matrix as text: a `# rows cols` header, then one
/// row per line of space-separated `re,im` pairs (shortest round-trip
/// decimal form).
pub fn write_matrix<W: Write>(out: &mut W, m: &DMatrix<C64>) -> std::io::Result<()> {
    writeln!(out, "# {} {}", m.nrows(), m.ncols())?;
    for r in 0..m.nrows() {
        let row: Vec<String> =
            (0..m.ncols()).map(|c| format!("{:e},{:e}", m[(r, c)].re, m[(r, c)].im)).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Parses the format produced by [`write_matrix`].
pub fn read_matrix(text: &str) -> Result<DMatrix<C64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Config("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .trim_start_matches('#')
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Config(format!("bad header '{header}'"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match dims.as_slice() {
        [r, c] => (*r, *c),
        _ => return Err(Error::Config(format!("bad header '{header}'"))),
    };
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Config(format!("missing row {r}")))?;
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != cols {
            return Err(Error::Config(format!("row {r}: expected {cols} entries")));
        }
        for (c, e) in entries.iter().enumerate() {
            let (re, im) = e
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("row {r}: bad entry '{e}'")))?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Config(format!("row {r}: bad number '{s}'")))
            };
            m[(r, c)] = C64::new(parse(re)?, parse(im)?);
        }
    }
    Ok(m)
}
