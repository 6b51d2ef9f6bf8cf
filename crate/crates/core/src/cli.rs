//! Command-line front end. Every command writes its outputs plus a
//! `manifest.json` into one output directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dynamics::{cdw_orbitals, evolve_trajectory, occupation_dump_csv, RenormPolicy};
use crate::entanglement::{entropy_profile, entropy_series, steady_state_entropy, EvolutionConfig};
use crate::error::{Error, Result};
use crate::fit::{fit_profile, fit_scaling, trim_profile_edges, FitMode};
use crate::io::{read_to_string, write_file, write_json};
use crate::lattice::{build_hamiltonian, fibonacci_approximant, Alpha, ModelSpec, Variant};
use crate::reproduce::{run_figure, Figure, Scale};
use crate::spectral::analyze;
use crate::sweep::{run_sweep, uniform_axis, write_records, RecordFormat, SweepConfig, SweepOptions};

#[derive(Debug, Parser)]
#[command(name = "nhqc", version, about = "Entanglement dynamics in non-Hermitian quasicrystals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues, IPRs and phase diagnostics of one Hamiltonian.
    Spectrum(SpectrumArgs),
    /// Entropy time series of one block starting from the CDW state.
    Evolve(EvolveArgs),
    /// Steady-state entropy for every cut position, with profile fits.
    Profile(ProfileArgs),
    /// Phase-diagram records over a (J, V) grid.
    Sweep(SweepArgs),
    /// Least-squares fit of a two-column CSV.
    Fit(FitArgs),
    /// Regenerate the data of one figure.
    Reproduce(ReproduceArgs),
    /// Repeat the run described by a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model variant: 1 (complex potential) or 2 (one-way hopping).
    #[arg(long)]
    pub model: Option<u8>,
    #[arg(long = "J", allow_hyphen_values = true)]
    pub j: Option<f64>,
    #[arg(long = "V", allow_hyphen_values = true)]
    pub v: Option<f64>,
    /// Lattice size; must be a Fibonacci number unless alpha is given.
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long = "alpha-p", requires = "alpha_q")]
    pub alpha_p: Option<u64>,
    #[arg(long = "alpha-q", requires = "alpha_p")]
    pub alpha_q: Option<u64>,
    /// JSON model spec; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<ModelSpec> {
        let from_file: Option<ModelSpec> = match &self.config {
            Some(path) => Some(parse_json(path)?),
            None => None,
        };
        let missing = |flag: &str| {
            Error::InvalidArgument(format!("missing --{flag} (or give it in --config)"))
        };
        let variant = match (self.model, &from_file) {
            (Some(m), _) => Variant::from_index(m)?,
            (None, Some(s)) => s.variant,
            (None, None) => return Err(missing("model")),
        };
        let j = self.j.or(from_file.map(|s| s.j)).ok_or_else(|| missing("J"))?;
        let v = self.v.or(from_file.map(|s| s.v)).ok_or_else(|| missing("V"))?;
        let l = self.l.or(from_file.map(|s| s.l)).ok_or_else(|| missing("L"))?;
        let alpha = match (self.alpha_p, self.alpha_q, &from_file) {
            (Some(p), Some(q), _) => Alpha::Rational { p, q },
            (_, _, Some(s)) if self.l.is_none() || self.l == Some(s.l) => s.alpha,
            _ => fibonacci_approximant(l)?,
        };
        ModelSpec::with_alpha(variant, j, v, alpha, l)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TimeArgs {
    /// Total evolution time.
    #[arg(long = "T", default_value_t = 1000.0, allow_hyphen_values = true)]
    pub total_time: f64,
    /// Averaging starts at this fraction of T.
    #[arg(long, default_value_t = 0.5)]
    pub window_fraction: f64,
    /// Longest propagator step.
    #[arg(long, default_value_t = 1.0)]
    pub max_step: f64,
}

impl TimeArgs {
    fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            total_time: self.total_time,
            window_fraction: self.window_fraction,
            max_step: self.max_step,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out/spectrum")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Block size; defaults to ⌊L/2⌋.
    #[arg(long = "l")]
    pub block: Option<usize>,
    /// Also write site occupations at every sample time.
    #[arg(long)]
    pub occupations: bool,
    #[arg(long, default_value = "out/evolve")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Use every n-th sample of the averaging window.
    #[arg(long, default_value_t = 25)]
    pub stride: usize,
    #[arg(long, default_value = "out/profile")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: Option<u8>,
    /// `lo:hi:step` or a comma-separated list.
    #[arg(long = "J-grid")]
    pub j_grid: Option<String>,
    #[arg(long = "V-grid")]
    pub v_grid: Option<String>,
    /// Comma-separated Fibonacci sizes.
    #[arg(long = "L-list")]
    pub l_list: Option<String>,
    #[arg(long = "T", allow_hyphen_values = true)]
    pub total_time: Option<f64>,
    /// Comma-separated subset of ImE, IPR, EE, g.
    #[arg(long)]
    pub observables: Option<String>,
    /// JSON sweep config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Checkpoint log; defaults to `<out>/checkpoint.jsonl`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "out/sweep")]
    pub out: PathBuf,
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<SweepConfig> {
        let mut config = match (&self.config, self.model) {
            (Some(path), _) => parse_json::<SweepConfig>(path)?,
            (None, Some(m)) => SweepConfig::default_grid(Variant::from_index(m)?),
            (None, None) => {
                return Err(Error::InvalidArgument("missing --model (or --config)".into()))
            }
        };
        if let (Some(_), Some(m)) = (&self.config, self.model) {
            config.variant = Variant::from_index(m)?;
        }
        if let Some(g) = &self.j_grid {
            config.j_grid = parse_grid(g, "--J-grid")?;
        }
        if let Some(g) = &self.v_grid {
            config.v_grid = parse_grid(g, "--V-grid")?;
        }
        if let Some(list) = &self.l_list {
            config.l_list = parse_list(list, "--L-list")?;
        }
        if let Some(t) = self.total_time {
            config.total_time = t;
        }
        if let Some(obs) = &self.observables {
            config.observables = obs
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_>>()?;
        }
        config.output = Some(self.out.join("records.csv"));
        config.checkpoint = Some(
            self.checkpoint
                .clone()
                .unwrap_or_else(|| self.out.join("checkpoint.jsonl")),
        );
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// linear, log, combined, profile_ABC or profile_central_charge.
    #[arg(long)]
    pub mode: String,
    /// CSV with a header; uses columns L/l/x and S/ee_steady/y, else the
    /// first two.
    #[arg(long)]
    pub input: PathBuf,
    /// Lattice size, required by the profile modes.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Also write the fit as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    /// fig1 .. fig8
    pub figure: String,
    #[arg(long, default_value = "small")]
    pub scale: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Defaults to `out/<figure>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, enough to repeat the run.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub timestamp: String,
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{flag}: '{s}' is not a number")))
        })
        .collect()
}

fn parse_grid(text: &str, flag: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("{flag}: '{s}' is not a number")))
            };
            uniform_axis(num(lo)?, num(hi)?, num(step)?)
        }
        [_] => parse_list(text, flag),
        _ => Err(Error::InvalidArgument(format!(
            "{flag}: expected lo:hi:step or a comma-separated list, got '{text}'"
        ))),
    }
}

fn write_manifest(out: &Path, command: &str, argv: &[String], config: serde_json::Value, outputs: Vec<PathBuf>) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        argv: argv.to_vec(),
        config,
        outputs,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

/// Reads `(x, S)` pairs from a headed CSV.
pub fn read_fit_input(path: &Path) -> Result<Vec<(f64, f64)>> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(io) => Error::io(path, std::io::Error::new(io.kind(), io.to_string())),
        _ => bad(e.to_string()),
    })?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let find = |names: &[&str], fallback: usize| {
        names
            .iter()
            .find_map(|n| header.iter().position(|h| h.trim() == *n))
            .unwrap_or(fallback)
    };
    let (xc, yc) = (find(&["L", "l", "x"], 0), find(&["S", "ee_steady", "y"], 1));
    let mut points = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let (x, y) = (row.get(xc).unwrap_or(""), row.get(yc).unwrap_or(""));
        if y.trim().is_empty() {
            continue;
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("'{s}' is not a number")));
        points.push((num(x)?, num(y)?));
    }
    Ok(points)
}

/// Parses and runs one command line (without the program name). Text for
/// the user goes to stdout.
pub fn run(argv: &[String]) -> Result<()> {
    let mut full = vec![OsString::from("nhqc")];
    full.extend(argv.iter().map(OsString::from));
    let cli = Cli::try_parse_from(full).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    execute(cli.command, argv)
}

fn execute(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Spectrum(a) => {
            let spec = a.model.resolve()?;
            let report = analyze(&spec)?;
            let csv = a.out.join("spectrum.csv");
            report.write_csv(&csv)?;
            let summary = report.summary_json();
            let json = a.out.join("spectrum.json");
            write_json(&json, &serde_json::json!({ "spec": spec, "summary": summary }))?;
            write_manifest(&a.out, "spectrum", argv, to_value(&spec), vec![csv, json])?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Evolve(a) => {
            let spec = a.model.resolve()?;
            let evolution = a.time.evolution();
            let block = a.block.unwrap_or(spec.l / 2);
            let series = entropy_series(&spec, &evolution, block)?;
            let steady = steady_state_entropy(&series, evolution.window_fraction)?;
            let csv = a.out.join("ee_series.csv");
            write_file(&csv, series.to_csv().as_bytes())?;
            let json = a.out.join("steady_state.json");
            write_json(&json, &serde_json::json!({ "spec": spec, "l": block, "steady_state": steady }))?;
            let mut outputs = vec![csv, json];
            if a.occupations {
                let h = build_hamiltonian(&spec)?;
                let states = evolve_trajectory(
                    cdw_orbitals(spec.l)?,
                    &h,
                    &evolution.sample_times(),
                    RenormPolicy {
                        max_step: evolution.max_step,
                        reorthonormalize: true,
                    },
                )?;
                let path = a.out.join("occupations.csv");
                write_file(&path, occupation_dump_csv(&states)?.as_bytes())?;
                outputs.push(path);
            }
            let config = serde_json::json!({ "spec": spec, "evolution": evolution, "l": block });
            write_manifest(&a.out, "evolve", argv, config, outputs)?;
            println!("S_steady = {} over t in [{}, {}] ({} samples)", steady.value, steady.window[0], steady.window[1], steady.sample_count);
        }
        Command::Profile(a) => {
            let spec = a.model.resolve()?;
            let evolution = EvolutionConfig {
                profile_stride: a.stride,
                ..a.time.evolution()
            };
            let profile = entropy_profile(&spec, &evolution)?;
            let csv = a.out.join("profile.csv");
            write_file(&csv, profile.to_csv().as_bytes())?;
            let trimmed = trim_profile_edges(&profile.points, spec.l, 5);
            let mut fits = Vec::new();
            for mode in [FitMode::ProfileCentralCharge, FitMode::ProfileAbc] {
                match fit_profile(&trimmed, spec.l, mode) {
                    Ok(f) => {
                        for (name, value) in mode.coefficient_names().iter().zip(&f.coefficients) {
                            println!("{mode}: {name} = {value}");
                        }
                        fits.push(f.to_json());
                    }
                    Err(e) => eprintln!("warning: {mode} fit skipped: {e}"),
                }
            }
            let json = a.out.join("profile_fit.json");
            write_json(&json, &fits)?;
            let config = serde_json::json!({ "spec": spec, "evolution": evolution });
            write_manifest(&a.out, "profile", argv, config, vec![csv, json])?;
        }
        Command::Sweep(a) => {
            let config = a.resolve()?;
            let records = run_sweep(&config, &SweepOptions { jobs: a.jobs })?;
            let csv = a.out.join("records.csv");
            let json = a.out.join("records.json");
            write_records(&records, RecordFormat::Csv, &csv)?;
            write_records(&records, RecordFormat::Json, &json)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            write_manifest(&a.out, "sweep", argv, to_value(&config), vec![csv.clone(), json])?;
            println!("{} records written to {} ({failed} failed points)", records.len(), csv.display());
        }
        Command::Fit(a) => {
            let mode: FitMode = a.mode.parse()?;
            let points = read_fit_input(&a.input)?;
            let fit = if mode.is_profile() {
                let l = a.l.ok_or_else(|| {
                    Error::InvalidArgument(format!("--L is required for {mode} fits"))
                })?;
                fit_profile(&points, l, mode)?
            } else {
                fit_scaling(&points, mode)?
            };
            for (name, value) in mode.coefficient_names().iter().zip(&fit.coefficients) {
                println!("{name} = {value}");
            }
            println!("residual_rms = {}", fit.residual_rms);
            if let Some(out) = &a.out {
                write_json(out, &fit.to_json())?;
                let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
                let config = serde_json::json!({ "mode": mode, "input": a.input, "L": a.l });
                write_manifest(dir, "fit", argv, config, vec![out.clone()])?;
            }
        }
        Command::Reproduce(a) => {
            let figure: Figure = a.figure.parse()?;
            let scale: Scale = a.scale.parse()?;
            let out = a.out.clone().unwrap_or_else(|| PathBuf::from("out").join(figure.to_string()));
            let outputs = run_figure(figure, scale, &SweepOptions { jobs: a.jobs }, &out)?;
            for p in &outputs {
                println!("{}", p.display());
            }
            let config = serde_json::json!({
                "figure": figure.to_string(),
                "scale": scale,
                "jobs": crate::reproduce::figure_jobs(figure, scale)?,
            });
            write_manifest(&out, "reproduce", argv, config, outputs)?;
        }
        Command::Rerun(a) => {
            let manifest: RunManifest = parse_json(&a.manifest)?;
            if manifest.command == "rerun" {
                return Err(Error::InvalidArgument("a manifest cannot point at another rerun".into()));
            }
            let mut args = manifest.argv.clone();
            if let Some(out) = &a.out {
                replace_out(&mut args, out);
            }
            return run(&args);
        }
    }
    Ok(())
}

/// Sets `--out` in a recorded argument list.
fn replace_out(args: &mut Vec<String>, out: &Path) {
    let value = out.display().to_string();
    if let Some(k) = args.iter().position(|a| a == "--out") {
        if k + 1 < args.len() {
            args[k + 1] = value;
            return;
        }
    }
    if let Some(k) = args.iter().position(|a| a.starts_with("--out=")) {
        args[k] = format!("--out={value}");
        return;
    }
    args.push("--out".into());
    args.push(value);
}

/// Runs the binary: parses `std::env::args`, prints a one-line diagnostic on
/// failure and returns the process exit code.
pub fn main_exit_code() -> i32 {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut full = vec![OsString::from("nhqc")];
    full.extend(argv.iter().map(OsString::from));
    let cli = match Cli::try_parse_from(full) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
