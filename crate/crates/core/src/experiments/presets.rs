//! Built-in scenarios. Every preset carries the default [`NoiseModel`];
//! callers strip it for ideal runs.

use std::f64::consts::FRAC_1_SQRT_2;

use super::scenario::{InitialState, Scenario, SweepParameter, SweepPlan};
use crate::dynamics::NoiseModel;
use crate::error::{Error, Result};
use crate::gauge::{configs, Plaquette, Spinor};
use crate::lattice::Manifold;

/// Points on the `[0, 2 pi]` sweep grids.
pub const SWEEP_POINTS: usize = 17;
/// Readout time of the initial-phase sweeps, ms.
pub const INITIAL_PHASE_TIME: f64 = 0.15;
/// Readout time of the coupling-phase sweeps, ms.
pub const COUPLING_PHASE_TIME: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// Names this entry expands to; a single-scenario preset lists itself.
    pub members: &'static [&'static str],
}

const REGISTRY: &[PresetInfo] = &[
    PresetInfo {
        name: "fig2-abelian-out",
        summary: "Abelian caging cell, (-1, 1)/sqrt2 at A0",
        members: &["fig2-abelian-out"],
    },
    PresetInfo {
        name: "fig2-abelian-in",
        summary: "Abelian caging cell, (1, 1)/sqrt2 at A0",
        members: &["fig2-abelian-in"],
    },
    PresetInfo {
        name: "fig2-nonabelian-out",
        summary: "non-Abelian cell, caged spinor (-1, 1)/sqrt2 at A0",
        members: &["fig2-nonabelian-out"],
    },
    PresetInfo {
        name: "fig2-nonabelian-in",
        summary: "non-Abelian cell, spreading spinor (1, 1)/sqrt2 at A0",
        members: &["fig2-nonabelian-in"],
    },
    PresetInfo {
        name: "fig2",
        summary: "the four caging/spreading trajectories",
        members: &["fig2-abelian-out", "fig2-abelian-in", "fig2-nonabelian-out", "fig2-nonabelian-in"],
    },
    PresetInfo {
        name: "fig2f-abelian",
        summary: "initial-phase sweep, Abelian cell, P0 at 0.15 ms",
        members: &["fig2f-abelian"],
    },
    PresetInfo {
        name: "fig2f-nonabelian",
        summary: "initial-phase sweep, non-Abelian cell, P0 at 0.15 ms",
        members: &["fig2f-nonabelian"],
    },
    PresetInfo {
        name: "fig2f",
        summary: "both initial-phase sweeps",
        members: &["fig2f-abelian", "fig2f-nonabelian"],
    },
    PresetInfo {
        name: "fig3b",
        summary: "second-order cell, (1, 0) at A0, caged within n <= 1",
        members: &["fig3b"],
    },
    PresetInfo {
        name: "fig3d",
        summary: "second-order cell, (1, -1)/sqrt2 at A2, one-sided caging",
        members: &["fig3d"],
    },
    PresetInfo {
        name: "fig4-abelian",
        summary: "coupling-phase sweep on U2, U3 down rows, P0 at 0.2 ms",
        members: &["fig4-abelian"],
    },
    PresetInfo {
        name: "fig4-nonabelian",
        summary: "coupling-phase sweep on U1 down row and U3 up row, P0 at 0.2 ms",
        members: &["fig4-nonabelian"],
    },
    PresetInfo {
        name: "fig4",
        summary: "both coupling-phase sweeps",
        members: &["fig4-abelian", "fig4-nonabelian"],
    },
    PresetInfo {
        name: "figS2-abelian",
        summary: "Wilson loop measurement, Abelian cell",
        members: &["figS2-abelian"],
    },
    PresetInfo {
        name: "figS2-nonabelian",
        summary: "Wilson loop measurement, non-Abelian cell",
        members: &["figS2-nonabelian"],
    },
    PresetInfo {
        name: "figS2",
        summary: "both Wilson loop measurements",
        members: &["figS2-abelian", "figS2-nonabelian"],
    },
];

pub fn registry() -> &'static [PresetInfo] {
    REGISTRY
}

/// Names of every single-scenario preset.
pub fn scenario_names() -> Vec<&'static str> {
    REGISTRY.iter().filter(|p| p.members == [p.name]).map(|p| p.name).collect()
}

fn psi_out() -> Spinor {
    Spinor::real(-FRAC_1_SQRT_2, FRAC_1_SQRT_2)
}

fn psi_in() -> Spinor {
    Spinor::real(FRAC_1_SQRT_2, FRAC_1_SQRT_2)
}

fn at(manifold: Manifold, phonon: usize, spinor: Spinor) -> InitialState {
    InitialState { manifold, phonon, spinor }
}

fn base(name: &str, description: &str, plaquette: Plaquette, initial: InitialState) -> Scenario {
    let mut s = Scenario::new(name, plaquette, initial);
    s.description = description.to_string();
    s.noise = Some(NoiseModel::default());
    s
}

fn build(name: &str) -> Option<Scenario> {
    let info = REGISTRY.iter().find(|p| p.name == name)?;
    let d = info.summary;
    let a0 = |spinor| at(Manifold::A, 0, spinor);
    let s = match name {
        "fig2-abelian-out" => base(name, d, configs::abelian_caging(), a0(psi_out())),
        "fig2-abelian-in" => base(name, d, configs::abelian_caging(), a0(psi_in())),
        "fig2-nonabelian-out" => base(name, d, configs::non_abelian_caging(), a0(psi_out())),
        "fig2-nonabelian-in" => base(name, d, configs::non_abelian_caging(), a0(psi_in())),
        "fig2f-abelian" | "fig2f-nonabelian" => {
            let p = if name == "fig2f-abelian" {
                configs::abelian_caging()
            } else {
                configs::non_abelian_caging()
            };
            let mut s = base(name, d, p, a0(psi_out()));
            s.sweep = Some(SweepPlan::full_turn(
                SweepParameter::InitialPhase,
                SWEEP_POINTS,
                INITIAL_PHASE_TIME,
            ));
            s
        }
        "fig3b" => base(name, d, configs::second_order(), a0(Spinor::real(1.0, 0.0))),
        "fig3d" => base(
            name,
            d,
            configs::second_order(),
            at(Manifold::A, 2, Spinor::real(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)),
        ),
        "fig4-abelian" | "fig4-nonabelian" => {
            let (p, rows) = if name == "fig4-abelian" {
                (configs::abelian_coupling_phase(0.0), vec![(2, 0), (3, 0)])
            } else {
                (configs::non_abelian_coupling_phase(0.0), vec![(1, 0), (3, 1)])
            };
            let mut s = base(name, d, p, a0(Spinor::real(1.0, 0.0)));
            let mut plan = SweepPlan::full_turn(
                SweepParameter::CouplingPhase,
                SWEEP_POINTS,
                COUPLING_PHASE_TIME,
            );
            plan.phased_rows = rows;
            s.sweep = Some(plan);
            s
        }
        "figS2-abelian" => base(name, d, configs::abelian_caging(), a0(psi_out())),
        "figS2-nonabelian" => base(name, d, configs::non_abelian_caging(), a0(psi_out())),
        _ => return None,
    };
    Some(s)
}

/// Expands a preset or preset group into its scenarios.
pub fn preset(name: &str) -> Result<Vec<Scenario>> {
    let info = REGISTRY.iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = REGISTRY.iter().map(|p| p.name).collect();
        Error::Config(format!("unknown preset '{name}' (known: {})", known.join(", ")))
    })?;
    Ok(info
        .members
        .iter()
        .map(|m| build(m).expect("registry members are buildable"))
        .collect())
}

/// Single-scenario preset; groups are rejected.
pub fn preset_scenario(name: &str) -> Result<Scenario> {
    let mut all = preset(name)?;
    if all.len() != 1 {
        return Err(Error::Config(format!("'{name}' is a preset group, not a single scenario")));
    }
    Ok(all.remove(0))
}
