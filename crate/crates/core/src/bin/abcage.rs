use std::f64::consts::PI;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use abcage::experiments::{
    caging_report, default_workers, registry, resolve_target, run_scenario, simulate, sweep_svg,
    trajectory_svg, wilson_table, Scenario, ScenarioFile,
};
use abcage::tomography::{
    fit_phonon_populations, sideband_signal, synthesize_sideband_data, PhononDistribution,
    SidebandDataset, SidebandModelParams, DEFAULT_ETA, DEFAULT_N_MAX,
};
use abcage::experiments::svg::{line_plot, Series};
use abcage::{Error, Result};

#[derive(Parser)]
#[command(name = "abcage", version, about = "Aharonov-Bohm caging simulator for a spin-phonon rhombic lattice")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// CSV output path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// SVG plot path.
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    /// Seed for synthetic data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Drop the noise model from every scenario.
    #[arg(long, global = true)]
    ideal: bool,
    /// Worker threads for sweeps (defaults to the available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SidebandArgs {
    /// Calibrated sideband Rabi frequency Omega*eta / 2pi, kHz.
    #[arg(long, default_value_t = 10.0)]
    omega_eta_khz: f64,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    n_max: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory of a scenario file or preset.
    Sim { target: String },
    /// Phase sweep of a scenario file or preset.
    Sweep { target: String },
    /// Algebraic and pulse-sequence Wilson loops.
    Wilson { target: String },
    /// Interference matrix, Wilson loops, classification and caging orders.
    Caging { target: String },
    /// Synthetic blue-sideband flopping data.
    TomoSynth {
        #[command(flatten)]
        model: SidebandArgs,
        /// Thermal mean phonon number of the true distribution.
        #[arg(long, default_value_t = 0.2, conflicts_with = "populations")]
        nbar: f64,
        /// Explicit populations p(0),p(1),... instead of a thermal state.
        #[arg(long, value_delimiter = ',')]
        populations: Option<Vec<f64>>,
        /// Duration in periods of the n = 0 component.
        #[arg(long, default_value_t = 3.0)]
        periods: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 400)]
        shots: u64,
    },
    /// Phonon populations from a sideband dataset CSV.
    TomoFit {
        data: PathBuf,
        #[command(flatten)]
        model: SidebandArgs,
    },
    /// List built-in presets, or print one as TOML.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(Error::from),
        None => io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

/// `base` for a single scenario, `stem-name.ext` when several share one flag.
fn per_scenario(base: &Path, name: &str, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let file = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-{name}.{ext}"),
        None => format!("{stem}-{name}"),
    };
    base.with_file_name(file)
}

fn scenarios(target: &str, common: &Common) -> Result<Vec<Scenario>> {
    let mut all = resolve_target(target)?;
    if common.ideal {
        for s in &mut all {
            s.noise = None;
        }
    }
    Ok(all)
}

fn workers(common: &Common) -> Result<usize> {
    match common.workers {
        Some(0) => Err(Error::Config("--workers must be at least 1".into())),
        Some(k) => Ok(k),
        None => Ok(default_workers()),
    }
}

fn sim(target: &str, common: &Common) -> Result<()> {
    let all = scenarios(target, common)?;
    let several = all.len() > 1;
    for s in &all {
        if s.sweep.is_some() {
            eprintln!("note: {} has a sweep block; sim ignores it", s.name);
        }
        let mut plain = s.clone();
        plain.sweep = None;
        let tr = simulate(&plain)?;
        let table = run_scenario(&plain, 1)?;
        let csv = table.to_csv_string();
        match &common.out {
            Some(base) => write_output(Some(&per_scenario(base, &s.name, several)), &csv)?,
            None if several => write_output(None, &format!("# {}\n{csv}", s.name))?,
            None => write_output(None, &csv)?,
        }
        if let Some(base) = &common.plot {
            fs::write(per_scenario(base, &s.name, several), trajectory_svg(s, &tr))?;
        }
    }
    Ok(())
}

fn sweep(target: &str, common: &Common) -> Result<()> {
    let all = scenarios(target, common)?;
    let several = all.len() > 1;
    let workers = workers(common)?;
    for s in &all {
        if s.sweep.is_none() {
            return Err(Error::Config(format!("scenario '{}' has no sweep block", s.name)));
        }
        let table = run_scenario(s, workers)?;
        let csv = table.to_csv_string();
        match &common.out {
            Some(base) => write_output(Some(&per_scenario(base, &s.name, several)), &csv)?,
            None if several => write_output(None, &format!("# {}\n{csv}", s.name))?,
            None => write_output(None, &csv)?,
        }
        if let Some(base) = &common.plot {
            fs::write(per_scenario(base, &s.name, several), sweep_svg(s, &table))?;
        }
    }
    Ok(())
}

fn wilson(target: &str, common: &Common) -> Result<()> {
    let all = scenarios(target, common)?;
    let table = wilson_table(&all, workers(common)?)?;
    write_output(common.out.as_deref(), &table.to_csv_string())
}

fn caging(target: &str, common: &Common) -> Result<()> {
    let all = scenarios(target, common)?;
    let text: Vec<String> = all
        .iter()
        .map(|s| caging_report(s).map(|r| r.to_string()))
        .collect::<Result<_>>()?;
    write_output(common.out.as_deref(), &format!("{}\n", text.join("\n\n")))
}

fn sideband_params(m: &SidebandArgs) -> Result<SidebandModelParams> {
    SidebandModelParams::from_sideband_rabi(2.0 * PI * m.omega_eta_khz, m.eta, m.n_max)
}

fn tomo_plot(path: &Path, title: &str, data: &SidebandDataset, model: Vec<f64>) -> Result<()> {
    let series = [
        Series {
            name: "data".into(),
            points: data.times.iter().cloned().zip(data.bright_probability.iter().cloned()).collect(),
        },
        Series { name: "model".into(), points: data.times.iter().cloned().zip(model).collect() },
    ];
    fs::write(path, line_plot(title, "t (ms)", "P(dn)", &series))?;
    Ok(())
}

fn tomo_synth(
    model: &SidebandArgs,
    nbar: f64,
    populations: Option<&[f64]>,
    periods: f64,
    points: usize,
    shots: u64,
    common: &Common,
) -> Result<()> {
    let params = sideband_params(model)?;
    let truth = match populations {
        Some(p) => PhononDistribution::new(p.to_vec())?,
        None => PhononDistribution::thermal(nbar, params.n_max)?,
    };
    if !(periods > 0.0 && periods.is_finite()) || points < 2 {
        return Err(Error::Config("need --periods > 0 and --points >= 2".into()));
    }
    let span = periods * 2.0 * PI / params.frequency(0);
    let times: Vec<f64> = (0..points).map(|k| span * k as f64 / (points - 1) as f64).collect();
    let data = synthesize_sideband_data(&truth, &params, &times, shots, common.seed)?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    write_output(common.out.as_deref(), &String::from_utf8_lossy(&buf))?;
    if let Some(path) = &common.plot {
        let model = sideband_signal(&truth, &params, &data.times);
        tomo_plot(path, "blue sideband flopping (synthetic)", &data, model)?;
    }
    Ok(())
}

fn tomo_fit(path: &Path, model: &SidebandArgs, common: &Common) -> Result<()> {
    let params = sideband_params(model)?;
    let file = fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let data = SidebandDataset::read_csv(BufReader::new(file))?;
    let report = fit_phonon_populations(&data, &params)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut buf = Vec::new();
    report.write(&mut buf)?;
    write_output(common.out.as_deref(), &String::from_utf8_lossy(&buf))?;
    if let Some(plot) = &common.plot {
        let fitted = sideband_signal(&report.distribution, &params, &data.times);
        tomo_plot(plot, "blue sideband flopping (fit)", &data, fitted)?;
    }
    Ok(())
}

fn presets(show: Option<&str>, common: &Common) -> Result<()> {
    match show {
        Some(name) => {
            let text: Vec<String> = scenarios(name, common)?
                .iter()
                .map(|s| ScenarioFile::from_scenario(s).to_toml())
                .collect();
            write_output(common.out.as_deref(), &text.join("\n"))
        }
        None => {
            let mut text = String::new();
            for p in registry() {
                text.push_str(&format!("{:<20} {}\n", p.name, p.summary));
            }
            write_output(common.out.as_deref(), &text)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Sim { target } => sim(target, common),
        Command::Sweep { target } => sweep(target, common),
        Command::Wilson { target } => wilson(target, common),
        Command::Caging { target } => caging(target, common),
        Command::TomoSynth { model, nbar, populations, periods, points, shots } => {
            tomo_synth(model, *nbar, populations.as_deref(), *periods, *points, *shots, common)
        }
        Command::TomoFit { data, model } => tomo_fit(data, model, common),
        Command::Presets { show } => presets(show.as_deref(), common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
