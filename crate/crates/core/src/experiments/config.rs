//! TOML scenario files.
//!
//! A file either starts from a preset (`preset = "fig4-abelian"`) and
//! overrides some fields, or spells out the whole scenario. Frequencies are
//! ordinary frequencies (`coupling_khz = 2.5` means `J = 2 pi x 2.5 kHz`),
//! rates are in Hz, times in ms and angles in units of pi. Matrices are 2x2
//! arrays of `[re, im]` pairs.
//!
//! ```toml
//! preset = "fig2f-nonabelian"
//! name = "phase-scan"
//!
//! [lattice]
//! cutoff = 6
//!
//! [noise]
//! gamma2_hz = 100.0
//!
//! [sweep]
//! points = 33
//! ```

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::presets::preset_scenario;
use super::scenario::{InitialState, Scenario, SweepParameter, SweepPlan, TimeGrid};
use crate::dynamics::{time_grid, NoiseModel};
use crate::error::{Error, Result};
use crate::gauge::{Plaquette, Spinor, UnitaryLink};
use crate::lattice::{DetuningPlacement, LatticeConfig, Manifold};

type MatrixValue = [[[f64; 2]; 2]; 2];
type SpinorValue = [[f64; 2]; 2];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<TimesSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKey {
    DManifold,
    SigmaZHalf,
}

impl From<PlacementKey> for DetuningPlacement {
    fn from(p: PlacementKey) -> Self {
        match p {
            PlacementKey::DManifold => DetuningPlacement::DManifold,
            PlacementKey::SigmaZHalf => DetuningPlacement::SigmaZHalf,
        }
    }
}

impl From<DetuningPlacement> for PlacementKey {
    fn from(p: DetuningPlacement) -> Self {
        match p {
            DetuningPlacement::DManifold => PlacementKey::DManifold,
            DetuningPlacement::SigmaZHalf => PlacementKey::SigmaZHalf,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_khz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub translational_invariant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_placement: Option<PlacementKey>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plaquette: Option<PlaquetteSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaquetteSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u1: Option<MatrixValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u2: Option<MatrixValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u3: Option<MatrixValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u4: Option<MatrixValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManifoldKey {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldKey>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phonon: Option<usize>,
    /// `[[re, im], [re, im]]` for `(down, up)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spinor: Option<SpinorValue>,
    /// Shorthand for `(e^{i pi x}, 1) / sqrt(2)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_pi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_placement: Option<PlacementKey>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_nbar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameterKey {
    InitialPhase,
    CouplingPhase,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<SweepParameterKey>,
    /// Explicit angles in units of pi.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values_pi: Option<Vec<f64>>,
    /// Evenly spaced angles over `[0, 2 pi]`; ignored when `values_pi` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable_time_ms: Option<f64>,
    /// `[link, row]` pairs, link 1..=4, row 0 (down) or 1 (up).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phased_rows: Option<Vec<[usize; 2]>>,
}

fn khz_to_angular(khz: f64) -> f64 {
    2.0 * PI * khz
}

fn hz_to_angular(hz: f64) -> f64 {
    2.0 * PI * hz * 1e-3
}

fn angular_to_hz(w: f64) -> f64 {
    w / (2.0 * PI) * 1e3
}

fn matrix_from_value(m: &MatrixValue) -> crate::gauge::Mat2 {
    let c = |[re, im]: [f64; 2]| C64::new(re, im);
    crate::gauge::Mat2::new(c(m[0][0]), c(m[0][1]), c(m[1][0]), c(m[1][1]))
}

fn matrix_to_value(link: &UnitaryLink) -> MatrixValue {
    let m = link.matrix();
    let c = |z: C64| [z.re, z.im];
    [[c(m[(0, 0)]), c(m[(0, 1)])], [c(m[(1, 0)]), c(m[(1, 1)])]]
}

/// 1-based line of `key` inside `[section]` (or at top level for `""`).
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if !key.is_empty() && current == format!("{section}.{key}") {
                return Some(i + 1);
            }
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Error text without the variant prefix of nested config errors.
fn plain(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

struct Ctx<'a> {
    source: &'a str,
    origin: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
        let path = match (section, key) {
            ("", k) => k.to_string(),
            (s, "") => s.to_string(),
            (s, k) => format!("{s}.{k}"),
        };
        let line = locate(self.source, section, key)
            .or_else(|| locate(self.source, section, ""))
            .map(|l| format!(", line {l}"))
            .unwrap_or_default();
        Error::Config(format!("{}{line}: {path}: {msg}", self.origin))
    }
}

impl ScenarioFile {
    pub fn parse(source: &str) -> Result<Self> {
        toml::from_str(source).map_err(|e| Error::Config(e.to_string()))
    }

    /// Full description of `s`, without a preset reference.
    pub fn from_scenario(s: &Scenario) -> Self {
        let l = &s.lattice;
        let p = &l.plaquette;
        let sp = |z: C64| [z.re, z.im];
        ScenarioFile {
            preset: None,
            name: Some(s.name.clone()),
            description: (!s.description.is_empty()).then(|| s.description.clone()),
            lattice: Some(LatticeSection {
                coupling_khz: Some(l.coupling / (2.0 * PI)),
                cutoff: Some(l.cutoff),
                translational_invariant: Some(l.translational_invariant),
                detuning_hz: Some(angular_to_hz(l.detuning)),
                detuning_placement: Some(l.detuning_placement.into()),
                plaquette: Some(PlaquetteSection {
                    u1: Some(matrix_to_value(&p.u1)),
                    u2: Some(matrix_to_value(&p.u2)),
                    u3: Some(matrix_to_value(&p.u3)),
                    u4: Some(matrix_to_value(&p.u4)),
                }),
            }),
            initial: Some(InitialSection {
                manifold: Some(match s.initial.manifold {
                    Manifold::A => ManifoldKey::A,
                    Manifold::B => ManifoldKey::B,
                    Manifold::C => ManifoldKey::C,
                }),
                phonon: Some(s.initial.phonon),
                spinor: Some([sp(s.initial.spinor.down()), sp(s.initial.spinor.up())]),
                phase_pi: None,
            }),
            times: Some(TimesSection {
                start_ms: Some(s.times.start),
                stop_ms: Some(s.times.stop),
                points: Some(s.times.points),
            }),
            noise: Some(match &s.noise {
                None => NoiseSection { enabled: Some(false), ..Default::default() },
                Some(n) => NoiseSection {
                    enabled: Some(true),
                    gamma1_hz: Some(n.gamma1 * 1e3),
                    gamma2_hz: Some(n.gamma2 * 1e3),
                    detuning_hz: Some(angular_to_hz(n.detuning)),
                    detuning_placement: Some(n.detuning_placement.into()),
                    initial_nbar: Some(n.initial_nbar),
                },
            }),
            sweep: s.sweep.as_ref().map(|w| SweepSection {
                parameter: Some(match w.parameter {
                    SweepParameter::InitialPhase => SweepParameterKey::InitialPhase,
                    SweepParameter::CouplingPhase => SweepParameterKey::CouplingPhase,
                }),
                values_pi: Some(w.values.iter().map(|v| v / PI).collect()),
                points: None,
                observable_time_ms: Some(w.observable_time),
                phased_rows: (!w.phased_rows.is_empty())
                    .then(|| w.phased_rows.iter().map(|&(l, r)| [l, r]).collect()),
            }),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialise")
    }

    /// Resolves the file into a validated scenario. `source` and `origin`
    /// are used only to point error messages at a line.
    pub fn resolve(&self, source: &str, origin: &str) -> Result<Scenario> {
        let cx = Ctx { source, origin };
        let mut s = match &self.preset {
            Some(name) => preset_scenario(name).map_err(|e| cx.err("", "preset", plain(e)))?,
            None => self.scratch_scenario(&cx)?,
        };
        if let Some(name) = &self.name {
            s.name = name.clone();
        }
        if let Some(d) = &self.description {
            s.description = d.clone();
        }
        if let Some(l) = &self.lattice {
            apply_lattice(&cx, l, &mut s.lattice)?;
        }
        if let Some(i) = &self.initial {
            apply_initial(&cx, i, &mut s.initial)?;
        }
        if let Some(t) = &self.times {
            s.times = TimeGrid {
                start: t.start_ms.unwrap_or(s.times.start),
                stop: t.stop_ms.unwrap_or(s.times.stop),
                points: t.points.unwrap_or(s.times.points),
            };
            s.times.validate().map_err(|e| cx.err("times", "", e))?;
        }
        if let Some(n) = &self.noise {
            s.noise = apply_noise(&cx, n, s.noise)?;
        }
        if let Some(w) = &self.sweep {
            s.sweep = Some(apply_sweep(&cx, w, s.sweep.take())?);
        }
        s.validate().map_err(|e| Error::Config(format!("{origin}: {}", plain(e))))?;
        Ok(s)
    }

    fn scratch_scenario(&self, cx: &Ctx) -> Result<Scenario> {
        let plaq = self
            .lattice
            .as_ref()
            .and_then(|l| l.plaquette.as_ref())
            .ok_or_else(|| cx.err("lattice", "plaquette", "required when no preset is given"))?;
        let mut links = Vec::with_capacity(4);
        for (key, m) in [("u1", &plaq.u1), ("u2", &plaq.u2), ("u3", &plaq.u3), ("u4", &plaq.u4)] {
            let m = m.as_ref().ok_or_else(|| cx.err("lattice.plaquette", key, "missing link"))?;
            links.push(
                UnitaryLink::new(matrix_from_value(m)).map_err(|e| cx.err("lattice.plaquette", key, e))?,
            );
        }
        let init = self
            .initial
            .as_ref()
            .ok_or_else(|| cx.err("initial", "", "required when no preset is given"))?;
        if init.manifold.is_none() {
            return Err(cx.err("initial", "manifold", "required when no preset is given"));
        }
        if init.spinor.is_none() && init.phase_pi.is_none() {
            return Err(cx.err("initial", "spinor", "give spinor or phase_pi"));
        }
        let plaquette = Plaquette::new(links[0], links[1], links[2], links[3]);
        let placeholder = InitialState { manifold: Manifold::A, phonon: 0, spinor: Spinor::real(1.0, 0.0) };
        Ok(Scenario::new("custom", plaquette, placeholder))
    }
}

fn apply_lattice(cx: &Ctx, l: &LatticeSection, cfg: &mut LatticeConfig) -> Result<()> {
    if let Some(khz) = l.coupling_khz {
        if !(khz > 0.0 && khz.is_finite()) {
            return Err(cx.err("lattice", "coupling_khz", format!("must be positive, got {khz}")));
        }
        cfg.coupling = khz_to_angular(khz);
    }
    if let Some(n) = l.cutoff {
        if n < 1 {
            return Err(cx.err("lattice", "cutoff", "must be at least 1"));
        }
        cfg.cutoff = n;
    }
    if let Some(ti) = l.translational_invariant {
        cfg.translational_invariant = ti;
    }
    if let Some(hz) = l.detuning_hz {
        if !hz.is_finite() {
            return Err(cx.err("lattice", "detuning_hz", "must be finite"));
        }
        cfg.detuning = hz_to_angular(hz);
    }
    if let Some(p) = l.detuning_placement {
        cfg.detuning_placement = p.into();
    }
    if let Some(p) = &l.plaquette {
        for (label, key, m) in [(1, "u1", &p.u1), (2, "u2", &p.u2), (3, "u3", &p.u3), (4, "u4", &p.u4)] {
            if let Some(m) = m {
                let link = UnitaryLink::new(matrix_from_value(m))
                    .map_err(|e| cx.err("lattice.plaquette", key, e))?;
                *cfg.plaquette.link_mut(label).expect("labels 1..=4") = link;
            }
        }
    }
    Ok(())
}

fn apply_initial(cx: &Ctx, i: &InitialSection, init: &mut InitialState) -> Result<()> {
    if let Some(m) = i.manifold {
        init.manifold = match m {
            ManifoldKey::A => Manifold::A,
            ManifoldKey::B => Manifold::B,
            ManifoldKey::C => Manifold::C,
        };
    }
    if let Some(n) = i.phonon {
        init.phonon = n;
    }
    match (i.spinor, i.phase_pi) {
        (Some(_), Some(_)) => return Err(cx.err("initial", "phase_pi", "give spinor or phase_pi, not both")),
        (Some([d, u]), None) => {
            let s = Spinor::new(C64::new(d[0], d[1]), C64::new(u[0], u[1]));
            s.require_normalized().map_err(|e| cx.err("initial", "spinor", e))?;
            init.spinor = s;
        }
        (None, Some(x)) => {
            if !x.is_finite() {
                return Err(cx.err("initial", "phase_pi", "must be finite"));
            }
            init.spinor = Spinor::phase_family(x * PI);
        }
        (None, None) => {}
    }
    Ok(())
}

fn apply_noise(cx: &Ctx, n: &NoiseSection, current: Option<NoiseModel>) -> Result<Option<NoiseModel>> {
    if n.enabled == Some(false) {
        return Ok(None);
    }
    let mut model = current.unwrap_or_default();
    if let Some(v) = n.gamma1_hz {
        model.gamma1 = v * 1e-3;
    }
    if let Some(v) = n.gamma2_hz {
        model.gamma2 = v * 1e-3;
    }
    if let Some(v) = n.detuning_hz {
        model.detuning = hz_to_angular(v);
    }
    if let Some(p) = n.detuning_placement {
        model.detuning_placement = p.into();
    }
    if let Some(v) = n.initial_nbar {
        model.initial_nbar = v;
    }
    model.validate().map_err(|e| cx.err("noise", "", e))?;
    Ok(Some(model))
}

fn apply_sweep(cx: &Ctx, w: &SweepSection, current: Option<SweepPlan>) -> Result<SweepPlan> {
    let parameter = match (w.parameter, &current) {
        (Some(SweepParameterKey::InitialPhase), _) => SweepParameter::InitialPhase,
        (Some(SweepParameterKey::CouplingPhase), _) => SweepParameter::CouplingPhase,
        (None, Some(c)) => c.parameter,
        (None, None) => return Err(cx.err("sweep", "parameter", "required")),
    };
    let observable_time = match (w.observable_time_ms, &current) {
        (Some(t), _) => t,
        (None, Some(c)) => c.observable_time,
        (None, None) => return Err(cx.err("sweep", "observable_time_ms", "required")),
    };
    let values = match (&w.values_pi, w.points, &current) {
        (Some(v), _, _) => {
            if v.is_empty() {
                return Err(cx.err("sweep", "values_pi", "must not be empty"));
            }
            v.iter().map(|x| x * PI).collect()
        }
        (None, Some(0), _) => return Err(cx.err("sweep", "points", "must be at least 1")),
        (None, Some(n), _) => time_grid(0.0, 2.0 * PI, n),
        (None, None, Some(c)) => c.values.clone(),
        (None, None, None) => return Err(cx.err("sweep", "values_pi", "give values_pi or points")),
    };
    let phased_rows = match (&w.phased_rows, &current) {
        (Some(rows), _) => rows.iter().map(|&[l, r]| (l, r)).collect(),
        (None, Some(c)) => c.phased_rows.clone(),
        (None, None) => Vec::new(),
    };
    Ok(SweepPlan { parameter, values, observable_time, phased_rows })
}

pub fn parse_scenario(source: &str, origin: &str) -> Result<Scenario> {
    let file =
        ScenarioFile::parse(source).map_err(|e| Error::Config(format!("{origin}: {}", plain(e))))?;
    file.resolve(source, origin)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&source, &path.display().to_string())
}

/// A path to a TOML file, or the name of a preset or preset group.
pub fn resolve_target(target: &str) -> Result<Vec<Scenario>> {
    let path = Path::new(target);
    if path.is_file() {
        return Ok(vec![load_scenario(path)?]);
    }
    if target.ends_with(".toml") {
        return Err(Error::Config(format!("config file {target} not found")));
    }
    super::presets::preset(target)
}
