//! Command-line front end.
//!
//! Every command reads a JSON config (the shipped device by default), prints
//! or writes a JSON report and optionally a CSV series. Exit codes: 0 on
//! success, 2 for usage errors, 3 for domain and validation errors, 4 when a
//! fit fails to converge, 5 for I/O failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use crate::em_circuit::{
    electrical_s11, electromechanical_efficiency, loaded_quality_factor, match_design,
    matching_resonance_hz,
};
use crate::error::{Error, Result};
use crate::extraction::{
    bcs_resonance_fit, g0_from_damping, half_max_width, lorentzian_fit, optical_s11_fit,
    sqrt_lorentzian_fit, BcsPoint, DampingPoint, FitResult, RealSeries,
};
use crate::io::config::{load_config_with_overrides, parse_override, resolve_config_path, Config, REFERENCE_DEVICE_JSON};
use crate::io::report::{provenance, to_value, Report};
use crate::io::spectrum::{load_spectrum, load_table, render_columns, write_atomic, Table};
use crate::optomech::{
    cooperativity, optomechanical_damping, stokes_leakage, swap_probability, three_tone_s11, DriveTone,
};
use crate::piezo::{out_of_plane_coupling, rotated_piezo_tensor, PiezoConstant, PiezoUnit};
use crate::pulsed::{
    click_rate, conversion_spectrum, efficiency_budget, fit_decay_rate, loading_efficiency_penalty,
    mode_population_trace, per_pump_photon_efficiency, rise_time, thermal_vs_pulse_energy, MonteCarlo,
    PulseSchedule,
};

/// Name recorded in provenance when no `--config` is given.
pub const BUILTIN_CONFIG: &str = "builtin:reference_device";

#[derive(Debug, Parser)]
#[command(name = "transduce", version, about = "Model and characterize piezo-optomechanical transducers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stagewise microwave-to-optics efficiency at the operating point.
    Budget(BudgetArgs),
    /// Continuous-wave transduction spectrum for one or more photon numbers.
    S21(S21Args),
    /// Linewidth, cooperativity and efficiency against intracavity photon number.
    SweepPower(SweepPowerArgs),
    /// Ensemble phonon population against time for the pulsed protocol.
    PulseTrace(PulseTraceArgs),
    /// Readout population against microwave drive frequency.
    Spectrum(SpectrumArgs),
    /// Fit measured data.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Rotated piezoelectric tensor of a zinc-blende film.
    PiezoTensor(PiezoArgs),
    /// Grid search for the matching-network values.
    MatchDesign(MatchDesignArgs),
    /// Synthetic three-tone optical reflection sweep.
    OpticalS11(OpticalS11Args),
}

#[derive(Debug, Subcommand)]
enum FitCommand {
    /// Lorentzian with offset on a power-like spectrum.
    Lorentzian(PeakFitArgs),
    /// Square-root Lorentzian on an amplitude spectrum.
    SqrtLorentzian(PeakFitArgs),
    /// Optical rates from a three-tone reflection sweep.
    S11Optical(S11FitArgs),
    /// g0 and intrinsic linewidth from optomechanical damping.
    Damping(DampingFitArgs),
    /// Kinetic-inductance parameters from resonance against temperature.
    Bcs(BcsFitArgs),
}

#[derive(Debug, Clone, Args)]
struct ConfigArgs {
    /// JSON config; relative paths also resolve under $TRANSDUCE_CONFIG_DIR.
    /// Defaults to the shipped device description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set device.modes[0].g0_hz=7.1e5`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    set: Vec<(String, String)>,
}

#[derive(Debug, Clone, Args)]
struct OutArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct McArgs {
    /// Monte Carlo seed (defaults to the config value).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count (defaults to the config value).
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    #[command(flatten)]
    mc: McArgs,
    /// Mechanical mode (defaults to the operating point).
    #[arg(long)]
    mode: Option<String>,
    /// Model the electrical stage from the circuit and jitter penalty instead
    /// of using the measured efficiency.
    #[arg(long)]
    model_electrical: bool,
}

#[derive(Debug, Args)]
struct S21Args {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Intracavity photon numbers, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "148,1665")]
    nc: Vec<f64>,
    /// Microwave frequency grid `start:stop:n` in Hz.
    #[arg(long, value_parser = parse_span)]
    span: Option<Span>,
    /// Laser detuning from the cavity in Hz (defaults to the red sideband of
    /// the operating mode).
    #[arg(long, allow_hyphen_values = true)]
    detuning_hz: Option<f64>,
    /// Directory for one `s21_nc<N>.csv` per photon number.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepPowerArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Photon-number grid `start:stop:n`.
    #[arg(long, value_parser = parse_span, default_value = "1:10000:41")]
    nc_span: Span,
    /// Space the grid linearly instead of logarithmically.
    #[arg(long)]
    linear: bool,
    #[arg(long, allow_hyphen_values = true)]
    detuning_hz: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PulseTraceArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    mode: Option<String>,
    /// Time grid `start:stop:n` in seconds from the pulse start.
    #[arg(long, value_parser = parse_span)]
    t_span: Option<Span>,
    /// Override the microwave pulse length.
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    mode: Option<String>,
    /// Drive frequency grid `start:stop:n` in Hz.
    #[arg(long, value_parser = parse_span)]
    span: Option<Span>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PeakFitArgs {
    /// Spectrum CSV (`freq_hz,mag[,phase_deg][,sigma]` or `freq_hz,re,im[,sigma]`).
    input: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct S11FitArgs {
    input: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Starting guess for the carrier detuning in Hz.
    #[arg(long, allow_hyphen_values = true)]
    carrier_detuning_hz: Option<f64>,
}

#[derive(Debug, Args)]
struct DampingFitArgs {
    /// CSV with `n_c,linewidth_hz[,sigma_hz]`.
    input: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    detuning_hz: Option<f64>,
}

#[derive(Debug, Args)]
struct BcsFitArgs {
    /// CSV with `t_k,freq_hz`.
    input: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Node capacitance (defaults to matching plus resonator capacitance).
    #[arg(long)]
    capacitance_f: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitArg {
    #[value(name = "C/cm^2")]
    PerCm2,
    #[value(name = "C/m^2")]
    PerM2,
}

#[derive(Debug, Args)]
struct PiezoArgs {
    #[command(flatten)]
    out: OutArgs,
    /// In-plane rotation about [001] in degrees.
    #[arg(long, allow_hyphen_values = true)]
    phi_deg: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.1)]
    e14: f64,
    #[arg(long, value_enum, default_value = "C/cm^2")]
    unit: UnitArg,
}

#[derive(Debug, Args)]
struct MatchDesignArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    mode: Option<String>,
    /// Inductance grid `start:stop:n` in H.
    #[arg(long, value_parser = parse_span, default_value = "1e-7:2.5e-7:151")]
    l_span: Span,
    /// Capacitance grid `start:stop:n` in F.
    #[arg(long, value_parser = parse_span, default_value = "5e-15:4e-14:141")]
    c_span: Span,
    /// Temperature for the kinetic inductance of the configured network.
    #[arg(long)]
    temperature_k: Option<f64>,
}

#[derive(Debug, Args)]
struct OpticalS11Args {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, allow_hyphen_values = true, default_value_t = 8e9)]
    carrier_detuning_hz: f64,
    /// Modulation frequency grid `start:stop:n` in Hz.
    #[arg(long, value_parser = parse_span, default_value = "5e8:1.5e10:581")]
    span: Span,
    /// Standard deviation of complex Gaussian noise per quadrature.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Grid `start:stop:n`, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Span {
    pub fn linear(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.start + step * i as f64).collect()
    }

    pub fn log(&self) -> Result<Vec<f64>> {
        if !(self.start > 0.0 && self.stop > 0.0) {
            return Err(Error::domain("logarithmic grid needs positive bounds"));
        }
        let (a, b) = (self.start.ln(), self.stop.ln());
        Ok(Span { start: a, stop: b, n: self.n }.linear().into_iter().map(f64::exp).collect())
    }
}

pub fn parse_span(s: &str) -> std::result::Result<Span, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(format!("`{s}` must look like start:stop:n"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    let (start, stop) = (num(a)?, num(b)?);
    let n: usize = n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?;
    if n == 0 || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(format!("`{s}` needs finite start <= stop and n >= 1"));
    }
    Ok(Span { start, stop, n })
}

struct Loaded {
    cfg: Config,
    provenance: Value,
}

impl ConfigArgs {
    fn load(&self) -> Result<Loaded> {
        let (text, name) = match &self.config {
            Some(p) => {
                let p = resolve_config_path(p);
                let text = std::fs::read_to_string(&p).map_err(|source| Error::Io { path: p.clone(), source })?;
                (text, p.display().to_string())
            }
            None => (REFERENCE_DEVICE_JSON.to_string(), BUILTIN_CONFIG.to_string()),
        };
        let cfg = load_config_with_overrides(&text, &name, &self.set)?;
        Ok(Loaded { cfg, provenance: provenance(&name, &self.set) })
    }
}

impl McArgs {
    fn resolve(&self, base: MonteCarlo) -> MonteCarlo {
        MonteCarlo {
            samples: self.samples.unwrap_or(base.samples),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

fn emit(report: &Report, out: &OutArgs) -> Result<()> {
    match &out.out {
        Some(p) => report.write(p),
        None => {
            print!("{}", report.to_json());
            Ok(())
        }
    }
}

fn write_csv(path: &Path, headers: &[&str], cols: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, &render_columns(headers, cols))
}

fn op_mode(cfg: &Config, explicit: &Option<String>) -> Result<String> {
    if let Some(m) = explicit {
        return Ok(m.clone());
    }
    match &cfg.operating_point {
        Some(op) => Ok(op.mode.clone()),
        None => cfg
            .device
            .modes
            .first()
            .map(|m| m.name.clone())
            .ok_or_else(|| Error::domain("device has no mechanical modes")),
    }
}

fn path_str(p: &Option<PathBuf>) -> Value {
    p.as_ref().map_or(Value::Null, |p| Value::String(p.display().to_string()))
}

/// Parse and run a command line, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("transduce: error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Budget(a) => budget(a),
        Command::S21(a) => s21(a),
        Command::SweepPower(a) => sweep_power(a),
        Command::PulseTrace(a) => pulse_trace(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Fit(f) => fit(f),
        Command::PiezoTensor(a) => piezo(a),
        Command::MatchDesign(a) => match_design_cmd(a),
        Command::OpticalS11(a) => optical_s11(a),
    }
}

fn budget(a: BudgetArgs) -> Result<()> {
    let Loaded { cfg, provenance } = a.cfg.load()?;
    let mut op = cfg.operating_point()?.clone();
    if let Some(m) = &a.mode {
        op.mode = m.clone();
    }
    let mut seed = None;
    let mut penalty = Value::Null;
    if a.model_electrical {
        op.measured_em_efficiency = None;
        if op.jitter_penalty.is_none() {
            let p = cfg.protocol()?;
            let mc = a.mc.resolve(p.monte_carlo);
            let j = p.jitter_model(&cfg.device, &op.mode)?;
            let pen = loading_efficiency_penalty(&p.schedule, &j, &mc, p.penalty_definition)?;
            op.jitter_penalty = Some(pen.value);
            seed = Some(mc.seed);
            penalty = to_value(&pen)?;
        }
    }
    let b = efficiency_budget(&cfg.device, &op)?;
    let mode = cfg.device.mode(&op.mode)?;
    let tone = DriveTone::red_sideband_pulse(&cfg.device.optical, mode, op.pulse_energy_j, op.pulse_length_s, 1.0);
    let p_sw = swap_probability(&cfg.device.optical, mode, &tone)?;
    let stokes = stokes_leakage(p_sw, mode.f_m_hz, cfg.device.optical.kappa_hz)?;
    let n_th = if cfg.thermal_table.is_empty() {
        Value::Null
    } else {
        match thermal_vs_pulse_energy(&cfg.thermal_pairs(), op.pulse_energy_j) {
            Ok(v) => json!(v),
            Err(Error::OutOfRange { .. }) => Value::Null,
            Err(e) => return Err(e),
        }
    };
    let results = json!({
        "budget": to_value(&b)?,
        "p_sw": p_sw,
        "eta_o": cfg.device.optical.eta_o(),
        "stokes_leakage": to_value(&stokes)?,
        "thermal_occupation": n_th,
        "jitter_penalty": penalty,
    });
    let inputs = json!({ "operating_point": to_value(&op)?, "device": to_value(&cfg.device)? });
    emit(&Report::new("budget", seed, inputs, provenance, results), &a.out)
}

fn s21(a: S21Args) -> Result<()> {
    let Loaded { cfg, provenance } = a.cfg.load()?;
    let dev = &cfg.device;
    let mode_name = op_mode(&cfg, &None)?;
    let anchor = dev.mode(&mode_name)?;
    let detuning = a.detuning_hz.unwrap_or(-anchor.f_m_hz);
    let grid = match a.span {
        Some(s) => s.linear(),
        None => {
            let lo = dev.modes.iter().map(|m| m.f_m_hz).fold(f64::INFINITY, f64::min);
            let hi = dev.modes.iter().map(|m| m.f_m_hz).fold(f64::NEG_INFINITY, f64::max);
            Span { start: lo - 5e6, stop: hi + 5e6, n: 2001 }.linear()
        }
    };
    let temperature = cfg.operating_point.as_ref().and_then(|o| o.temperature_k);
    let matching = dev.matching_at(temperature)?;
    let eta_o = dev.optical.eta_o();
    let line = dev.losses.mw_line_transmission();
    if a.nc.is_empty() {
        return Err(Error::domain("--nc needs at least one photon number"));
    }

    let mut per_nc = Vec::new();
    for &n_c in &a.nc {
        let mut modes = Vec::new();
        let mut lines = Vec::new();
        for m in &dev.modes {
            let eta_em = electromechanical_efficiency(&matching, &dev.bvd(m), m.f_m_hz)? * line;
            let c_om = cooperativity(&dev.optical, m, n_c)?.c_om;
            let lw = optomechanical_damping(&dev.optical, m, n_c, detuning)?;
            if !(lw > 0.0) {
                return Err(Error::domain(format!("mode {} is unstable at n_c = {n_c} (linewidth {lw:.3e} Hz)", m.name)));
            }
            let peak = per_pump_photon_efficiency(c_om, eta_em.min(1.0), eta_o)?;
            lines.push((m.f_m_hz, lw, peak.sqrt()));
            modes.push(json!({
                "name": m.name,
                "c_om": c_om,
                "linewidth_hz": lw,
                "eta_em": eta_em,
                "peak_efficiency": peak,
            }));
        }
        // Coherent sum of per-mode Lorentzian amplitudes.
        let s: Vec<Complex64> = grid
            .iter()
            .map(|&f| {
                lines
                    .iter()
                    .map(|&(f0, lw, a0)| a0 * (lw / 2.0) / Complex64::new(lw / 2.0, -(f - f0)))
                    .sum()
            })
            .collect();
        let csv = match &a.csv_dir {
            Some(dir) => {
                let p = dir.join(format!("s21_nc{n_c}.csv"));
                let mag: Vec<f64> = s.iter().map(|z| z.norm()).collect();
                let ph: Vec<f64> = s.iter().map(|z| z.arg().to_degrees()).collect();
                write_csv(&p, &["freq_hz", "mag", "phase_deg"], &[grid.clone(), mag, ph])?;
                Value::String(p.display().to_string())
            }
            None => Value::Null,
        };
        let max = s.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        per_nc.push(json!({ "n_c": n_c, "modes": modes, "max_efficiency": max, "csv": csv }));
    }
    let inputs = json!({
        "n_c": a.nc,
        "detuning_hz": detuning,
        "freq_grid": { "start": grid[0], "stop": grid[grid.len() - 1], "n": grid.len() },
        "device": to_value(dev)?,
    });
    emit(&Report::new("s21", None, inputs, provenance, json!({ "spectra": per_nc })), &a.out)
}

fn sweep_power(a: SweepPowerArgs) -> Result<()> {
    let Loaded { cfg, provenance } = a.cfg.load()?;
    let dev = &cfg.device;
    let anchor = dev.mode(&op_mode(&cfg, &None)?)?;
    let detuning = a.detuning_hz.unwrap_or(-anchor.f_m_hz);
    let grid = if a.linear { a.nc_span.linear() } else { a.nc_span.log()? };
    let matching = dev.matching_at(cfg.operating_point.as_ref().and_then(|o| o.temperature_k))?;
    let eta_o = dev.optical.eta_o();

    let mut headers = vec!["n_c".to_string()];
    let mut cols = vec![grid.clone()];
    let mut results = serde_json::Map::new();
    for m in &dev.modes {
        let eta_em = (electromechanical_efficiency(&matching, &dev.bvd(m), m.f_m_hz)?
            * dev.losses.mw_line_transmission())
        .min(1.0);
        let mut lw = Vec::with_capacity(grid.len());
        let mut coop = Vec::with_capacity(grid.len());
        let mut eff = Vec::with_capacity(grid.len());
        for &n in &grid {
            lw.push(optomechanical_damping(&dev.optical, m, n, detuning)?);
            let c = cooperativity(&dev.optical, m, n)?.c_om;
            coop.push(c);
            eff.push(per_pump_photon_efficiency(c, eta_em, eta_o)?);
        }
        results.insert(
            m.name.clone(),
            json!({ "eta_em": eta_em, "linewidth_hz": lw, "c_om": coop, "efficiency": eff }),
        );
        headers.extend([
            format!("{}_linewidth_hz", m.name),
            format!("{}_c_om", m.name),
            format!("{}_efficiency", m.name),
        ]);
        cols.extend([lw, coop, eff]);
    }
    if let Some(p) = &a.csv {
        let h: Vec<&str> = headers.iter().map(String::as_str).collect();
        write_csv(p, &h, &cols)?;
    }
    let inputs = json!({ "n_c": grid, "detuning_hz": detuning, "device": to_value(dev)?, "csv": path_str(&a.csv) });
    let results = json!({ "modes": results });
    emit(&Report::new("sweep-power", None, inputs, provenance, results), &a.out)
}

struct PulseSetup {
    cfg: Config,
    provenance: Value,
    schedule: PulseSchedule,
    mc: MonteCarlo,
    mode: String,
}

fn pulse_setup(cfg_args: &ConfigArgs, mc_args: &McArgs, mode: &Option<String>) -> Result<PulseSetup> {
    let Loaded { cfg, provenance } = cfg_args.load()?;
    let p = cfg.protocol()?;
    let mc = mc_args.resolve(p.monte_carlo);
    let schedule = p.schedule;
    let mode = op_mode(&cfg, mode)?;
    Ok(PulseSetup { cfg, provenance, schedule, mc, mode })
}

fn pulse_trace(a: PulseTraceArgs) -> Result<()> {
    let PulseSetup { cfg, provenance, mut schedule, mc, mode } = pulse_setup(&a.cfg, &a.mc, &a.mode)?;
    let p = cfg.protocol()?;
    let j = p.jitter_model(&cfg.device, &mode)?;
    if let Some(d) = a.duration_s {
        schedule.mw_duration_s = d;
    }
    let tau = 1.0 / j.intrinsic_gamma;
    let grid = match a.t_span {
        Some(s) => s.linear(),
        None => Span { start: 0.0, stop: schedule.mw_duration_s + 4.0 * tau, n: 401 }.linear(),
    };
    let trace = mode_population_trace(&schedule, &j, &grid, &mc)?;
    let rise = rise_time(&schedule, &j, &mc)?;
    let tail: Vec<(f64, f64)> = trace
        .iter()
        .filter(|p| p.t_s > schedule.mw_duration_s)
        .map(|p| (p.t_s, p.phonons))
        .collect();
    let decay = if tail.len() >= 2 {
        json!(fit_decay_rate(&tail, schedule.background_phonons)?)
    } else {
        Value::Null
    };
    let peak = trace.iter().map(|p| p.phonons).fold(0.0, f64::max);
    let device_mode = cfg.device.mode(&mode)?;
    let p_sw = swap_probability(&cfg.device.optical, device_mode, &schedule.optical_pulse)?;
    let at_readout = mode_population_trace(&schedule, &j, &[schedule.readout_delay_s], &mc)?[0];
    let clicks = match &p.counts {
        Some(c) => json!(click_rate(at_readout.phonons, p_sw, c)?),
        None => Value::Null,
    };
    if let Some(path) = &a.csv {
        write_csv(
            path,
            &["t_s", "phonons", "std_err"],
            &[
                trace.iter().map(|p| p.t_s).collect(),
                trace.iter().map(|p| p.phonons).collect(),
                trace.iter().map(|p| p.std_err).collect(),
            ],
        )?;
    }
    let results = json!({
        "sigma_hz": j.sigma()?,
        "rise_time_s": rise,
        "decay_rate_per_s": decay,
        "intrinsic_lifetime_s": tau,
        "peak_phonons": peak,
        "readout": { "t_s": at_readout.t_s, "phonons": at_readout.phonons, "std_err": at_readout.std_err },
        "p_sw": p_sw,
        "click_rate_hz": clicks,
        "trace": to_value(&trace)?,
    });
    let inputs = json!({
        "mode": mode,
        "schedule": to_value(&schedule)?,
        "jitter": to_value(&j)?,
        "monte_carlo": to_value(&mc)?,
        "csv": path_str(&a.csv),
    });
    emit(&Report::new("pulse-trace", Some(mc.seed), inputs, provenance, results), &a.out)
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let PulseSetup { cfg, provenance, schedule, mc, mode } = pulse_setup(&a.cfg, &a.mc, &a.mode)?;
    let p = cfg.protocol()?;
    let j = p.jitter_model(&cfg.device, &mode)?;
    let grid = match a.span {
        Some(s) => s.linear(),
        None => Span { start: j.center_hz - 300e3, stop: j.center_hz + 300e3, n: 301 }.linear(),
    };
    let spec = conversion_spectrum(&schedule, &j, &grid, &mc)?;
    let y: Vec<f64> = spec.iter().map(|s| s.phonons).collect();
    let half_max = half_max_width(&grid, &y, schedule.background_phonons);
    let fit = lorentzian_fit(&RealSeries::new(grid.clone(), y.clone())).map(|f| to_value(&f)).and_then(|v| v);
    let fit = match fit {
        Ok(v) => v,
        Err(e) => json!({ "error": e.to_string() }),
    };
    let device_mode = cfg.device.mode(&mode)?;
    let p_sw = swap_probability(&cfg.device.optical, device_mode, &schedule.optical_pulse)?;
    let clicks: Option<Vec<f64>> = match &p.counts {
        Some(c) => Some(y.iter().map(|&n| click_rate(n, p_sw, c)).collect::<Result<_>>()?),
        None => None,
    };
    if let Some(path) = &a.csv {
        let mut headers = vec!["freq_hz", "phonons", "std_err"];
        let mut cols = vec![grid.clone(), y.clone(), spec.iter().map(|s| s.std_err).collect()];
        if let Some(c) = &clicks {
            headers.push("click_rate_hz");
            cols.push(c.clone());
        }
        write_csv(path, &headers, &cols)?;
    }
    let results = json!({
        "sigma_hz": j.sigma()?,
        "half_max_fwhm_hz": half_max,
        "lorentzian_fit": fit,
        "p_sw": p_sw,
        "spectrum": to_value(&spec)?,
        "click_rate_hz": clicks,
    });
    let inputs = json!({
        "mode": mode,
        "schedule": to_value(&schedule)?,
        "jitter": to_value(&j)?,
        "monte_carlo": to_value(&mc)?,
        "csv": path_str(&a.csv),
    });
    emit(&Report::new("spectrum", Some(mc.seed), inputs, provenance, results), &a.out)
}

fn fit_report(kind: &str, input: &Path, extra: Value, provenance: Value, fit: &FitResult, out: &OutArgs) -> Result<()> {
    let mut inputs = json!({ "input": input.display().to_string() });
    if let (Value::Object(m), Value::Object(e)) = (&mut inputs, extra) {
        m.extend(e);
    }
    emit(&Report::new(&format!("fit {kind}"), None, inputs, provenance, to_value(fit)?), out)
}

fn require_column<'a>(t: &'a Table, name: &str, path: &Path) -> Result<&'a [f64]> {
    t.column(name).ok_or_else(|| Error::Row {
        path: path.display().to_string(),
        row: 0,
        message: format!("missing column `{name}`"),
    })
}

fn fit(cmd: FitCommand) -> Result<()> {
    match cmd {
        FitCommand::Lorentzian(a) => {
            let data = load_spectrum(&a.input)?.to_real_series();
            let r = lorentzian_fit(&data)?;
            fit_report("lorentzian", &a.input, json!({}), json!({}), &r, &a.out)
        }
        FitCommand::SqrtLorentzian(a) => {
            let data = load_spectrum(&a.input)?.to_real_series();
            let r = sqrt_lorentzian_fit(&data)?;
            fit_report("sqrt-lorentzian", &a.input, json!({}), json!({}), &r, &a.out)
        }
        FitCommand::S11Optical(a) => {
            let Loaded { cfg, provenance } = a.cfg.load()?;
            let data = load_spectrum(&a.input)?.to_s11_data();
            let f_c = cfg.device.optical.f_c_hz;
            let r = optical_s11_fit(&data, a.carrier_detuning_hz, f_c)?;
            let extra = json!({ "carrier_detuning_guess_hz": a.carrier_detuning_hz, "f_c_hz": f_c });
            fit_report("s11-optical", &a.input, extra, provenance, &r, &a.out)
        }
        FitCommand::Damping(a) => {
            let Loaded { cfg, provenance } = a.cfg.load()?;
            let t = load_table(&a.input)?;
            let n_c = require_column(&t, "n_c", &a.input)?;
            let lw = require_column(&t, "linewidth_hz", &a.input)?;
            let sig = t.column("sigma_hz");
            let pts: Vec<DampingPoint> = (0..t.rows())
                .map(|i| DampingPoint { n_c: n_c[i], linewidth_hz: lw[i], sigma_hz: sig.map(|s| s[i]) })
                .collect();
            let m = cfg.device.mode(&op_mode(&cfg, &a.mode)?)?;
            let detuning = a.detuning_hz.unwrap_or(-m.f_m_hz);
            let r = g0_from_damping(&pts, &cfg.device.optical, m.f_m_hz, detuning)?;
            let extra = json!({ "mode": m.name, "f_m_hz": m.f_m_hz, "detuning_hz": detuning });
            fit_report("damping", &a.input, extra, provenance, &r, &a.out)
        }
        FitCommand::Bcs(a) => {
            let Loaded { cfg, provenance } = a.cfg.load()?;
            let t = load_table(&a.input)?;
            let tk = require_column(&t, "t_k", &a.input)?;
            let f = require_column(&t, "freq_hz", &a.input)?;
            let pts: Vec<BcsPoint> = (0..t.rows()).map(|i| BcsPoint { t_k: tk[i], freq_hz: f[i] }).collect();
            let e = &cfg.device.electrical;
            let cap = a.capacitance_f.unwrap_or(e.matching.c_match_f + e.c_res_f);
            let r = bcs_resonance_fit(&pts, cap)?;
            fit_report("bcs", &a.input, json!({ "capacitance_f": cap }), provenance, &r, &a.out)
        }
    }
}

fn piezo(a: PiezoArgs) -> Result<()> {
    let unit = match a.unit {
        UnitArg::PerCm2 => PiezoUnit::CoulombPerCm2,
        UnitArg::PerM2 => PiezoUnit::CoulombPerM2,
    };
    let e14 = PiezoConstant { value: a.e14, unit }.to_si();
    let phi = a.phi_deg.to_radians();
    let t = rotated_piezo_tensor(phi, e14)?;
    let oop = out_of_plane_coupling(phi, e14)?;
    let results = json!({
        "unit": "C/m^2",
        "tensor": t.to_rows(),
        "frobenius_norm": t.frobenius_norm(),
        "out_of_plane": to_value(&oop)?,
    });
    let inputs = json!({ "phi_deg": a.phi_deg, "e14": to_value(&PiezoConstant { value: a.e14, unit })? });
    emit(&Report::new("piezo-tensor", None, inputs, json!({}), results), &a.out)
}

fn match_design_cmd(a: MatchDesignArgs) -> Result<()> {
    let Loaded { cfg, provenance } = a.cfg.load()?;
    let dev = &cfg.device;
    let m = dev.mode(&op_mode(&cfg, &a.mode)?)?;
    let bvd = dev.bvd(m);
    let current = dev.matching_at(a.temperature_k)?;
    let design = match_design(&current, &bvd, m.f_m_hz, &a.l_span.linear(), &a.c_span.linear())?;
    let results = json!({
        "design": to_value(&design)?,
        "current": {
            "l_match_h": current.l_match_h,
            "c_match_f": current.c_match_f,
            "s11_magnitude": electrical_s11(&current, &bvd, m.f_m_hz)?.norm(),
            "efficiency": electromechanical_efficiency(&current, &bvd, m.f_m_hz)?,
            "resonance_hz": matching_resonance_hz(&current, &bvd),
            "loaded_q": loaded_quality_factor(&current, &bvd),
        },
    });
    let inputs = json!({
        "mode": m.name,
        "f_m_hz": m.f_m_hz,
        "temperature_k": a.temperature_k,
        "l_grid": { "start": a.l_span.start, "stop": a.l_span.stop, "n": a.l_span.n },
        "c_grid": { "start": a.c_span.start, "stop": a.c_span.stop, "n": a.c_span.n },
    });
    emit(&Report::new("match-design", None, inputs, provenance, results), &a.out)
}

fn optical_s11(a: OpticalS11Args) -> Result<()> {
    let Loaded { cfg, provenance } = a.cfg.load()?;
    let c = &cfg.device.optical;
    if !(a.noise.is_finite() && a.noise >= 0.0) {
        return Err(Error::domain(format!("--noise must be >= 0, got {}", a.noise)));
    }
    let grid = a.span.linear();
    let mut z: Vec<Complex64> = grid.iter().map(|&f| three_tone_s11(c, a.carrier_detuning_hz, f)).collect();
    if a.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let n = Normal::new(0.0, a.noise).map_err(|e| Error::domain(e.to_string()))?;
        for v in &mut z {
            *v += Complex64::new(n.sample(&mut rng), n.sample(&mut rng));
        }
    }
    if let Some(p) = &a.csv {
        let mut headers = vec!["freq_hz", "re", "im"];
        let mut cols = vec![grid.clone(), z.iter().map(|v| v.re).collect(), z.iter().map(|v| v.im).collect()];
        if a.noise > 0.0 {
            headers.push("sigma");
            cols.push(vec![a.noise; grid.len()]);
        }
        write_csv(p, &headers, &cols)?;
    }
    let (imin, min) = z
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.norm()))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("span has at least one point");
    let results = json!({
        "eta_o": c.eta_o(),
        "kappa_i_hz": c.kappa_i_hz(),
        "min_magnitude": min,
        "min_at_hz": grid[imin],
        "half_kappa_hz": c.kappa_hz / 2.0,
        "csv": path_str(&a.csv),
    });
    let inputs = json!({
        "optical": to_value(c)?,
        "carrier_detuning_hz": a.carrier_detuning_hz,
        "mod_grid": { "start": a.span.start, "stop": a.span.stop, "n": a.span.n },
        "noise": a.noise,
    });
    let seed = (a.noise > 0.0).then_some(a.seed);
    emit(&Report::new("optical-s11", seed, inputs, provenance, results), &a.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_parsing() {
        let s = parse_span("1:3:3").unwrap();
        assert_eq!(s.linear(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_span("-1e6:1e6:1").unwrap().linear(), vec![-1e6]);
        assert!(parse_span("3:1:4").is_err());
        assert!(parse_span("1:2").is_err());
        let l = parse_span("1:100:3").unwrap().log().unwrap();
        assert!((l[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn usage_error_is_two() {
        assert_eq!(run(["transduce", "no-such-command"]), 2);
        assert_eq!(run(["transduce", "budget", "--set", "novalue"]), 2);
    }
}
