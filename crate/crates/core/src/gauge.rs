//! Exact 2x2 algebra of the link fields decorating one rhombic plaquette.
//!
//! A plaquette joins `A_n` to `A_{n+1}` along two paths: the upper path
//! `A -> B -> A'` through links `U1`, `U2` and the lower path `A -> C -> A'`
//! through `U3`, `U4`. Links are general 2x2 unitaries; the spin-flip link
//! used by the experiment has determinant -1.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat2 = Matrix2<C64>;

/// Default null tolerance on the vector 2-norm for caging tests.
pub const CAGING_TOL: f64 = 1e-10;

/// Unitarity tolerance on `|U^dag U - 1|_F`.
pub const UNITARY_TOL: f64 = 1e-12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// A 2x2 unitary decorating one lattice bond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryLink(Mat2);

impl UnitaryLink {
    pub fn new(matrix: Mat2) -> Result<Self> {
        let deviation = (matrix.adjoint() * matrix - Mat2::identity()).norm();
        if !deviation.is_finite() || deviation > UNITARY_TOL {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(UnitaryLink(matrix))
    }

    /// Row-major entries `[[u00, u01], [u10, u11]]`.
    pub fn from_rows(rows: [[C64; 2]; 2]) -> Result<Self> {
        Self::new(Mat2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]))
    }

    pub fn identity() -> Self {
        UnitaryLink(Mat2::identity())
    }

    /// The spin-flip link `[[0, 1], [1, 0]]`.
    pub fn spin_flip() -> Self {
        UnitaryLink(Mat2::new(ZERO, ONE, ONE, ZERO))
    }

    /// `diag(e^{i a}, e^{i b})`.
    pub fn diag_phases(a: f64, b: f64) -> Self {
        UnitaryLink(Mat2::new(C64::cis(a), ZERO, ZERO, C64::cis(b)))
    }

    /// Multiplies row `row` by `e^{i phase}`; the result stays unitary.
    pub fn with_row_phase(&self, row: usize, phase: f64) -> Self {
        let mut m = self.0;
        let f = C64::cis(phase);
        for col in 0..2 {
            m[(row, col)] *= f;
        }
        UnitaryLink(m)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn adjoint(&self) -> Mat2 {
        self.0.adjoint()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.0 - self.0.adjoint()).norm() <= tol
    }
}

/// The ordered four-link cell: `u1: A->B`, `u2: B->A'`, `u3: A->C`, `u4: C->A'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plaquette {
    pub u1: UnitaryLink,
    pub u2: UnitaryLink,
    pub u3: UnitaryLink,
    pub u4: UnitaryLink,
}

impl Plaquette {
    pub fn new(u1: UnitaryLink, u2: UnitaryLink, u3: UnitaryLink, u4: UnitaryLink) -> Self {
        Plaquette { u1, u2, u3, u4 }
    }

    pub fn identity() -> Self {
        let id = UnitaryLink::identity();
        Plaquette::new(id, id, id, id)
    }

    /// Link by its 1-based label.
    pub fn link(&self, label: usize) -> Option<&UnitaryLink> {
        match label {
            1 => Some(&self.u1),
            2 => Some(&self.u2),
            3 => Some(&self.u3),
            4 => Some(&self.u4),
            _ => None,
        }
    }

    pub fn link_mut(&mut self, label: usize) -> Option<&mut UnitaryLink> {
        match label {
            1 => Some(&mut self.u1),
            2 => Some(&mut self.u2),
            3 => Some(&mut self.u3),
            4 => Some(&mut self.u4),
            _ => None,
        }
    }

    pub fn links(&self) -> [&UnitaryLink; 4] {
        [&self.u1, &self.u2, &self.u3, &self.u4]
    }

    /// Upper-path transfer `U2 U1`.
    pub fn upper_path(&self) -> Mat2 {
        self.u2.matrix() * self.u1.matrix()
    }

    /// Lower-path transfer `U4 U3`.
    pub fn lower_path(&self) -> Mat2 {
        self.u4.matrix() * self.u3.matrix()
    }

    /// `U3^dag U4^dag U2 U1`: the map picked up going round the cell and back to `A`.
    pub fn holonomy(&self) -> Mat2 {
        self.lower_path().adjoint() * self.upper_path()
    }
}

/// Link assignments used by the experiment.
pub mod configs {
    use super::{Plaquette, UnitaryLink};
    use std::f64::consts::PI;

    /// `U1 = U4 = flip`, `U2 = U3 = diag(-1, 1)`: interference matrix zero.
    pub fn abelian_caging() -> Plaquette {
        let flip = UnitaryLink::spin_flip();
        let z = UnitaryLink::diag_phases(PI, 0.0);
        Plaquette::new(flip, z, z, flip)
    }

    /// `U1 = U2 = U3 = 1`, `U4 = flip`: zero Wilson loop.
    pub fn non_abelian_caging() -> Plaquette {
        let id = UnitaryLink::identity();
        Plaquette::new(id, id, id, UnitaryLink::spin_flip())
    }

    /// `U1 = diag(-1, 1)`, `U2 = 1`, `U3 = diag(1, -1)`, `U4 = flip`: `T^2 = 0`.
    pub fn second_order() -> Plaquette {
        Plaquette::new(
            UnitaryLink::diag_phases(PI, 0.0),
            UnitaryLink::identity(),
            UnitaryLink::diag_phases(0.0, PI),
            UnitaryLink::spin_flip(),
        )
    }

    /// Abelian coupling-phase family: `U1 = U4 = flip`, `U2 = U3 = diag(e^{i phi}, 1)`.
    pub fn abelian_coupling_phase(phi: f64) -> Plaquette {
        let flip = UnitaryLink::spin_flip();
        let d = UnitaryLink::diag_phases(phi, 0.0);
        Plaquette::new(flip, d, d, flip)
    }

    /// Non-Abelian coupling-phase family:
    /// `U1 = diag(e^{i phi}, 1)`, `U2 = 1`, `U3 = diag(1, e^{i phi})`, `U4 = flip`.
    pub fn non_abelian_coupling_phase(phi: f64) -> Plaquette {
        Plaquette::new(
            UnitaryLink::diag_phases(phi, 0.0),
            UnitaryLink::identity(),
            UnitaryLink::diag_phases(0.0, phi),
            UnitaryLink::spin_flip(),
        )
    }
}

/// Two-component spin amplitude, ordered `(down, up)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor(pub Vector2<C64>);

impl Spinor {
    pub fn new(down: C64, up: C64) -> Self {
        Spinor(Vector2::new(down, up))
    }

    pub fn real(down: f64, up: f64) -> Self {
        Spinor::new(C64::new(down, 0.0), C64::new(up, 0.0))
    }

    /// `(e^{i phi}, 1) / sqrt 2`.
    pub fn phase_family(phi: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Spinor::new(C64::cis(phi) * s, C64::new(s, 0.0))
    }

    pub fn down(&self) -> C64 {
        self.0[0]
    }

    pub fn up(&self) -> C64 {
        self.0[1]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero spinor".into()));
        }
        Ok(Spinor(self.0 / C64::new(n, 0.0)))
    }

    /// Checks the unit-norm requirement for initial states.
    pub fn require_normalized(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("spinor norm {n} is not 1")));
        }
        Ok(())
    }
}

/// Which product defines the Wilson loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WilsonOrdering {
    /// `|Tr(U3 U4 U2 U1)|`.
    #[default]
    MainText,
    /// `|Tr(U3^dag U4^dag U2 U1)|`.
    Holonomy,
}

pub fn wilson_loop(p: &Plaquette, ordering: WilsonOrdering) -> f64 {
    let product = match ordering {
        WilsonOrdering::MainText => {
            p.u3.matrix() * p.u4.matrix() * p.u2.matrix() * p.u1.matrix()
        }
        WilsonOrdering::Holonomy => p.holonomy(),
    };
    product.trace().norm().min(2.0)
}

/// `T = (U2 U1 + U4 U3) / 2`, the effective `A_n -> A_{n+1}` hopping.
pub fn interference_matrix(p: &Plaquette) -> Mat2 {
    (p.upper_path() + p.lower_path()) * C64::new(0.5, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Towards higher phonon number, governed by `T`.
    Rightward,
    /// Towards lower phonon number, governed by `T^dag`.
    Leftward,
}

/// Smallest `m <= max_order` with `|T^m psi| < tol` (or `(T^dag)^m` leftward).
pub fn caging_order(
    t: &Mat2,
    psi: &Spinor,
    direction: Direction,
    max_order: usize,
    tol: f64,
) -> Option<usize> {
    let step = match direction {
        Direction::Rightward => *t,
        Direction::Leftward => t.adjoint(),
    };
    let mut v = psi.0;
    for m in 1..=max_order {
        v = step * v;
        if v.norm() < tol {
            return Some(m);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub abelian: bool,
    /// Relative phase with `U2 U1 = e^{i theta} U4 U3`, in `(-pi, pi]`.
    pub theta: Option<f64>,
    pub state_independent_caging: bool,
}

/// Abelian/non-Abelian dichotomy: an Abelian cell either has `T = 0`
/// (`theta = pi`, caging for every spinor) or never cages.
pub fn classify_plaquette(p: &Plaquette, tol: f64) -> Classification {
    let trace = p.holonomy().trace();
    let abelian = (trace.norm() - 2.0).abs() < tol;
    if !abelian {
        return Classification { abelian, theta: None, state_independent_caging: false };
    }
    let theta = wrap_phase(trace.arg());
    let distance_to_pi = (theta - PI).abs().min((theta + PI).abs());
    Classification {
        abelian,
        theta: Some(theta),
        state_independent_caging: distance_to_pi < tol,
    }
}

/// Maps an angle into `(-pi, pi]`.
fn wrap_phase(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Haar-random 2x2 unitary.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> UnitaryLink {
    let mut g = [0.0f64; 4];
    for x in g.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let a = C64::new(g[0] / n, g[1] / n);
    let b = C64::new(g[2] / n, g[3] / n);
    let phase = C64::cis(rng.random_range(-PI..PI));
    let m = Mat2::new(a, -b.conj(), b, a.conj()) * phase;
    UnitaryLink(m)
}

/// Random plaquette satisfying `U2 U1 = e^{i theta} U4 U3`.
pub fn random_abelian_plaquette<R: Rng + ?Sized>(rng: &mut R, theta: f64) -> Plaquette {
    let u1 = random_unitary(rng);
    let u2 = random_unitary(rng);
    let u3 = random_unitary(rng);
    let u4 = (u2.0 * u1.0 * u3.0.adjoint()) * C64::cis(-theta);
    Plaquette::new(u1, u2, u3, UnitaryLink(u4))
}

/// Random spinor uniform on the unit sphere.
pub fn random_spinor<R: Rng + ?Sized>(rng: &mut R) -> Spinor {
    let mut g = [0.0f64; 4];
    for x in g.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    let s = Spinor::new(C64::new(g[0], g[1]), C64::new(g[2], g[3]));
    s.normalized().expect("gaussian sample is nonzero")
}
