//! Wilson loop read out by driving the four links of the `n = 0` plaquette
//! one after the other.
//!
//! Each link is switched on alone for its pi time `pi / J`. With the
//! coupling `(J/2)(x^dag U y + h.c.)` a pi pulse maps `y -> -i U y`, so the
//! sequence `U1, U2, U4, U3` carries `A_0` round the cell
//! (`A_0 -> B_0 -> A_1 -> C_0 -> A_0`) and applies
//! `(-i)^4 U3^dag U4^dag U2 U1` to the spin. The effective 2x2 map is
//! reconstructed from four preparations on `A_0` by process tomography of
//! the `A_0` spin block.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;

use super::{
    evolve_lindblad, prepare_state, prepare_thermal_state, DensityMatrix, NoiseModel, Propagator,
    TrajectoryStates,
};
use crate::error::Result;
use crate::gauge::{Mat2, Plaquette, Spinor};
use crate::lattice::{link_hamiltonian, LatticeConfig, Link, Manifold};

/// Pulse order that traverses the loop starting from `A_0`.
pub const PULSE_SEQUENCE: [Link; 4] = [Link::U1, Link::U2, Link::U4, Link::U3];

#[derive(Debug, Clone, PartialEq)]
pub struct LoopTomography {
    /// Output `A_0` spin blocks for inputs `|dn>`, `|up>`, `|+>`, `|+i>`.
    pub outputs: [Mat2; 4],
    /// Best coherent (rank-one Choi) estimate of the loop map.
    pub map: Mat2,
    /// `|Tr map|`.
    pub wilson: f64,
}

/// Measured Wilson loop of `p` with coupling `j` on the default cutoff.
pub fn wilson_loop_protocol(p: &Plaquette, j: f64, noise: Option<&NoiseModel>) -> Result<f64> {
    let mut config = LatticeConfig::new(*p);
    config.coupling = j;
    Ok(wilson_loop_protocol_with(&config, noise)?.wilson)
}

pub fn wilson_loop_protocol_with(
    config: &LatticeConfig,
    noise: Option<&NoiseModel>,
) -> Result<LoopTomography> {
    config.validate()?;
    let basis = config.basis();
    let t_pi = PI / config.coupling;
    let pulses: Vec<DMatrix<C64>> = PULSE_SEQUENCE
        .iter()
        .map(|&l| link_hamiltonian(config, l))
        .collect::<Result<_>>()?;
    let s = FRAC_1_SQRT_2;
    let inputs = [
        Spinor::real(1.0, 0.0),
        Spinor::real(0.0, 1.0),
        Spinor::real(s, s),
        Spinor::new(C64::new(s, 0.0), C64::new(0.0, s)),
    ];

    let mut outputs = [Mat2::zeros(); 4];
    match noise {
        None => {
            let props: Vec<Propagator> = pulses.iter().map(Propagator::new).collect::<Result<_>>()?;
            for (out, spinor) in outputs.iter_mut().zip(&inputs) {
                let mut psi = prepare_state(Manifold::A, 0, spinor, basis)?.amplitudes().clone();
                for p in &props {
                    psi = p.apply(&psi, t_pi);
                }
                let rho = &psi * psi.adjoint();
                *out = a0_block(&rho);
            }
        }
        Some(noise) => {
            for (out, spinor) in outputs.iter_mut().zip(&inputs) {
                let mut rho = prepare_thermal_state(Manifold::A, 0, spinor, noise.initial_nbar, basis)?;
                for h in &pulses {
                    let tr = evolve_lindblad(h, &rho, noise, &[t_pi])?;
                    tr.diagnostics.expect("mixed trajectory").check()?;
                    rho = match tr.states {
                        TrajectoryStates::Mixed(mut s) => s.pop().expect("one output time"),
                        TrajectoryStates::Pure(_) => unreachable!("lindblad returns mixed states"),
                    };
                }
                *out = a0_block(rho_entries(&rho));
            }
        }
    }
    let map = reconstruct_loop_map(&outputs);
    let wilson = map.trace().norm();
    Ok(LoopTomography { outputs, map, wilson })
}

fn rho_entries(rho: &DensityMatrix) -> &DMatrix<C64> {
    rho.entries()
}

fn a0_block(rho: &DMatrix<C64>) -> Mat2 {
    Mat2::new(rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)])
}

/// Rebuilds `E(|i><j|)` from the four output blocks, forms the Choi matrix
/// `C[(i,a),(j,b)] = E(|i><j|)[a,b]` and returns `sqrt(lambda) * unvec(v)`
/// for its leading eigenpair. For a unitary-times-scalar channel this is the
/// map itself up to a global phase.
pub fn reconstruct_loop_map(outputs: &[Mat2; 4]) -> Mat2 {
    let [e00, e11, plus, plus_i] = outputs;
    let half = C64::new(0.5, 0.5);
    let e01 = plus + plus_i * C64::new(0.0, 1.0) - (e00 + e11) * half;
    let e10 = e01.adjoint();
    let blocks = [[e00, &e01], [&e10, e11]];
    let mut choi = Matrix4::<C64>::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    choi[(2 * i + a, 2 * j + b)] = blocks[i][j][(a, b)];
                }
            }
        }
    }
    let choi = (choi + choi.adjoint()) * C64::new(0.5, 0.0);
    let eig = choi.symmetric_eigen();
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &l)| if l > best.1 { (k, l) } else { best });
    let v = eig.eigenvectors.column(k);
    let scale = C64::new(lambda.max(0.0).sqrt(), 0.0);
    // v[(i, a)] = M[a][i]
    Mat2::new(v[0], v[2], v[1], v[3]) * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{configs, random_unitary, wilson_loop, WilsonOrdering};
    use crate::lattice::DEFAULT_COUPLING;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn channel_outputs(m: &Mat2) -> [Mat2; 4] {
        let s = FRAC_1_SQRT_2;
        let ins = [
            Spinor::real(1.0, 0.0),
            Spinor::real(0.0, 1.0),
            Spinor::real(s, s),
            Spinor::new(C64::new(s, 0.0), C64::new(0.0, s)),
        ];
        ins.map(|x| {
            let y = m * x.0;
            y * y.adjoint()
        })
    }

    #[test]
    fn reconstruction_recovers_unitary_up_to_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = *random_unitary(&mut rng).matrix();
            let m = reconstruct_loop_map(&channel_outputs(&u));
            // m = e^{i a} u
            let overlap = (u.adjoint() * m).trace() / C64::new(2.0, 0.0);
            assert!((overlap.norm() - 1.0).abs() < 1e-12);
            assert!((m - u * (overlap / overlap.norm())).norm() < 1e-10);
        }
    }

    #[test]
    fn ideal_protocol_matches_holonomy_loop() {
        for p in [configs::abelian_caging(), configs::non_abelian_caging(), Plaquette::identity()] {
            let measured = wilson_loop_protocol(&p, DEFAULT_COUPLING, None).unwrap();
            let algebraic = wilson_loop(&p, WilsonOrdering::Holonomy);
            assert!((measured - algebraic).abs() < 1e-6, "{measured} vs {algebraic}");
        }
    }

    #[test]
    fn ideal_protocol_on_random_plaquettes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let p = Plaquette::new(
                random_unitary(&mut rng),
                random_unitary(&mut rng),
                random_unitary(&mut rng),
                random_unitary(&mut rng),
            );
            let mut cfg = LatticeConfig::new(p).with_cutoff(2);
            cfg.coupling = 3.0;
            let tomo = wilson_loop_protocol_with(&cfg, None).unwrap();
            let hol = p.holonomy();
            let overlap = (hol.adjoint() * tomo.map).trace() / C64::new(2.0, 0.0);
            assert!((overlap.norm() - 1.0).abs() < 1e-9);
            assert!((tomo.wilson - wilson_loop(&p, WilsonOrdering::Holonomy)).abs() < 1e-9);
        }
    }
}
