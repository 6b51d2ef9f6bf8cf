//! Parameter sweeps over `(J, V)` grids: spectral diagnostics and steady
//! state entropies per lattice size, scaling fits per grid point, a JSONL
//! checkpoint log for resuming, and deterministic CSV/JSON output.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{steady_state_bipartite, EvolutionConfig};
use crate::error::{Error, Result};
use crate::fit::{fit_scaling, FitMode};
use crate::io::{opt_field, write_file};
use crate::lattice::{
    build_hamiltonian, fibonacci_approximant, momentum_dual_hamiltonian, ModelSpec, Variant,
};
use crate::spectral::{analyze, eig_right, spectrum_mismatch};

pub const CSV_HEADER: &str = "variant,J,V,L,mean_abs_im,mean_ipr,ee_steady,g,g_prime,fit_mode,residual";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "ImE")]
    MeanAbsIm,
    #[serde(rename = "IPR")]
    MeanIpr,
    #[serde(rename = "EE")]
    SteadyEntropy,
    /// Scaling fit of the steady-state entropy across sizes; implies `EE`.
    #[serde(rename = "g")]
    ScalingCoefficient,
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ImE" => Ok(Observable::MeanAbsIm),
            "IPR" => Ok(Observable::MeanIpr),
            "EE" => Ok(Observable::SteadyEntropy),
            "g" => Ok(Observable::ScalingCoefficient),
            other => Err(Error::InvalidArgument(format!(
                "unknown observable '{other}' (expected ImE, IPR, EE or g)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub variant: Variant,
    #[serde(rename = "J_grid")]
    pub j_grid: Vec<f64>,
    #[serde(rename = "V_grid")]
    pub v_grid: Vec<f64>,
    #[serde(rename = "L_list")]
    pub l_list: Vec<usize>,
    #[serde(rename = "T")]
    pub total_time: f64,
    #[serde(default = "default_window_fraction")]
    pub window_fraction: f64,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    pub observables: BTreeSet<Observable>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Flush the checkpoint log after this many new points.
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval: usize,
}

fn default_window_fraction() -> f64 {
    0.5
}

fn default_max_step() -> f64 {
    1.0
}

fn default_checkpoint_interval() -> usize {
    1
}

/// `lo, lo + step, ..., hi` with the endpoints included.
pub fn uniform_axis(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "axis {lo}..{hi} with step {step} is empty"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    // multiply instead of accumulating so grids compare exactly across runs
    Ok((0..=count).map(|k| round_grid(lo + k as f64 * step)).collect())
}

fn round_grid(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl SweepConfig {
    /// Default scan over `[0, 2]` with spacing 0.05. The `J` axis is shifted
    /// by half a step so no point lands on `|J| = |V|`.
    pub fn default_grid(variant: Variant) -> Self {
        let v_grid = uniform_axis(0.0, 2.0, 0.05).expect("static axis");
        let j_grid = uniform_axis(0.025, 1.975, 0.05).expect("static axis");
        SweepConfig {
            variant,
            j_grid,
            v_grid,
            l_list: vec![89, 144, 233, 377, 610],
            total_time: 1000.0,
            window_fraction: default_window_fraction(),
            max_step: default_max_step(),
            observables: [
                Observable::MeanAbsIm,
                Observable::MeanIpr,
                Observable::SteadyEntropy,
                Observable::ScalingCoefficient,
            ]
            .into_iter()
            .collect(),
            output: None,
            checkpoint: None,
            checkpoint_interval: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j_grid.is_empty() || self.v_grid.is_empty() || self.l_list.is_empty() {
            return Err(Error::InvalidArgument("sweep grids must be nonempty".into()));
        }
        if self.j_grid.iter().chain(&self.v_grid).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("sweep grids contain non-finite values".into()));
        }
        if self.l_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "L_list must be strictly ascending".into(),
            ));
        }
        for &l in &self.l_list {
            fibonacci_approximant(l)?;
        }
        if self.observables.is_empty() {
            return Err(Error::InvalidArgument("no observables requested".into()));
        }
        if self.checkpoint_interval == 0 {
            return Err(Error::InvalidArgument("checkpoint interval must be at least 1".into()));
        }
        if self.needs_entropy() {
            self.evolution().validate()?;
        }
        Ok(())
    }

    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            total_time: self.total_time,
            window_fraction: self.window_fraction,
            max_step: self.max_step,
            ..Default::default()
        }
    }

    fn wants(&self, o: Observable) -> bool {
        self.observables.contains(&o)
    }

    fn needs_entropy(&self) -> bool {
        self.wants(Observable::SteadyEntropy) || self.wants(Observable::ScalingCoefficient)
    }

    fn needs_spectrum(&self) -> bool {
        self.wants(Observable::MeanAbsIm) || self.wants(Observable::MeanIpr)
    }

    /// Every `(J, V, L)` work unit in sorted order.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut js = self.j_grid.clone();
        let mut vs = self.v_grid.clone();
        js.sort_by(f64::total_cmp);
        js.dedup();
        vs.sort_by(f64::total_cmp);
        vs.dedup();
        let mut out = Vec::with_capacity(js.len() * vs.len() * self.l_list.len());
        for &j in &js {
            for &v in &vs {
                for &l in &self.l_list {
                    out.push(GridPoint { j, v, l });
                }
            }
        }
        out
    }

    /// Identity of the computation, excluding where results are written.
    fn fingerprint(&self) -> String {
        let mut key = self.clone();
        key.output = None;
        key.checkpoint = None;
        key.checkpoint_interval = 1;
        serde_json::to_string(&key).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "L")]
    pub l: usize,
}

impl GridPoint {
    fn key(&self) -> (u64, u64, usize) {
        (self.j.to_bits(), self.v.to_bits(), self.l)
    }
}

/// Per-size result before the cross-size fit; this is what the checkpoint
/// log stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PointResult {
    #[serde(flatten)]
    point: GridPoint,
    mean_abs_im: Option<f64>,
    mean_ipr: Option<f64>,
    ee_steady: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub variant: Variant,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub mean_abs_im: Option<f64>,
    pub mean_ipr: Option<f64>,
    pub ee_steady: Option<f64>,
    pub g: Option<f64>,
    pub g_prime: Option<f64>,
    /// Fit mode name, `none` without a fit, `error` when this point failed.
    pub fit_mode: String,
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Worker threads; 1 runs on the calling thread.
    pub jobs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { jobs: 1 }
    }
}

/// Fit used for `g` at one grid point: linear for the first model, for
/// the second logarithmic inside `|V| < |J|` and linear elsewhere.
pub fn primary_fit_mode(variant: Variant, j: f64, v: f64) -> FitMode {
    match variant {
        Variant::Nhaah1 => FitMode::Linear,
        Variant::Nhaah2 if v.abs() < j.abs() => FitMode::Log,
        Variant::Nhaah2 => FitMode::Linear,
    }
}

fn compute_point(config: &SweepConfig, point: GridPoint) -> PointResult {
    let mut out = PointResult {
        point,
        mean_abs_im: None,
        mean_ipr: None,
        ee_steady: None,
        error: None,
    };
    if let Err(e) = fill_point(config, &mut out) {
        out.mean_abs_im = None;
        out.mean_ipr = None;
        out.ee_steady = None;
        out.error = Some(e.to_string());
    }
    out
}

fn fill_point(config: &SweepConfig, out: &mut PointResult) -> Result<()> {
    let p = out.point;
    let spec = ModelSpec::fibonacci(config.variant, p.j, p.v, p.l)?;
    if config.needs_spectrum() {
        let summary = analyze(&spec)?.summary();
        if config.wants(Observable::MeanAbsIm) {
            out.mean_abs_im = Some(summary.mean_abs_im);
        }
        if config.wants(Observable::MeanIpr) {
            out.mean_ipr = Some(summary.mean_ipr);
        }
    }
    if config.needs_entropy() {
        out.ee_steady = Some(steady_state_bipartite(&spec, &config.evolution())?.value);
    }
    Ok(())
}

struct FitSummary {
    mode: FitMode,
    g: f64,
    g_prime: Option<f64>,
    residual: f64,
}

fn fit_point(config: &SweepConfig, j: f64, v: f64, rows: &[&PointResult]) -> Option<FitSummary> {
    let data: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.ee_steady.map(|s| (r.point.l as f64, s)))
        .collect();
    let mode = primary_fit_mode(config.variant, j, v);
    let primary = fit_scaling(&data, mode).ok()?;
    let g_prime = fit_scaling(&data, FitMode::Combined)
        .ok()
        .and_then(|f| f.get("g_prime"));
    Some(FitSummary {
        mode,
        g: primary.get("g")?,
        g_prime,
        residual: primary.residual_rms,
    })
}

fn assemble(config: &SweepConfig, mut results: Vec<PointResult>) -> Vec<SweepRecord> {
    results.sort_by(|a, b| {
        a.point
            .j
            .total_cmp(&b.point.j)
            .then(a.point.v.total_cmp(&b.point.v))
            .then(a.point.l.cmp(&b.point.l))
    });
    let mut records = Vec::with_capacity(results.len());
    for group in results.chunk_by(|a, b| a.point.j == b.point.j && a.point.v == b.point.v) {
        let (j, v) = (group[0].point.j, group[0].point.v);
        let fit = if config.wants(Observable::ScalingCoefficient) {
            let ok: Vec<&PointResult> = group.iter().filter(|r| r.error.is_none()).collect();
            fit_point(config, j, v, &ok)
        } else {
            None
        };
        for r in group {
            let failed = r.error.is_some();
            records.push(SweepRecord {
                variant: config.variant,
                j,
                v,
                l: r.point.l,
                mean_abs_im: r.mean_abs_im,
                mean_ipr: r.mean_ipr,
                ee_steady: if config.wants(Observable::SteadyEntropy) {
                    r.ee_steady
                } else {
                    None
                },
                g: fit.as_ref().map(|f| f.g),
                g_prime: fit.as_ref().and_then(|f| f.g_prime),
                fit_mode: match (&fit, failed) {
                    (_, true) => "error".to_string(),
                    (Some(f), false) => f.mode.name().to_string(),
                    (None, false) => "none".to_string(),
                },
                residual: fit.as_ref().map(|f| f.residual),
                error: r.error.clone(),
            });
        }
    }
    records
}

/// Append-only JSONL log: a header line identifying the sweep, then one
/// line per finished point.
struct CheckpointLog {
    path: PathBuf,
    writer: BufWriter<File>,
    pending: usize,
    interval: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    sweep: String,
}

impl CheckpointLog {
    fn open(path: &Path, config: &SweepConfig) -> Result<(Self, Vec<PointResult>)> {
        let fingerprint = config.fingerprint();
        let mut done = Vec::new();
        let exists = path.exists();
        if exists {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let mut lines = BufReader::new(file).lines();
            let header = lines
                .next()
                .transpose()
                .map_err(|e| Error::io(path, e))?
                .and_then(|l| serde_json::from_str::<CheckpointHeader>(&l).ok());
            match header {
                Some(h) if h.sweep == fingerprint => {}
                Some(_) => {
                    return Err(Error::InvalidArgument(format!(
                        "checkpoint {} belongs to a different sweep; delete it or choose another path",
                        path.display()
                    )))
                }
                None => {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        message: "missing checkpoint header".into(),
                    })
                }
            }
            for line in lines {
                let line = line.map_err(|e| Error::io(path, e))?;
                // a torn final line from an interrupted write is recomputed
                if let Ok(r) = serde_json::from_str::<PointResult>(&line) {
                    done.push(r);
                }
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut log = CheckpointLog {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
            pending: 0,
            interval: config.checkpoint_interval,
        };
        if !exists {
            log.write_line(&CheckpointHeader { sweep: fingerprint })?;
            log.flush()?;
        } else {
            // terminate a torn line so the next record starts fresh
            log.writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok((log, done))
    }

    fn write_line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let line = serde_json::to_string(value).map_err(|e| Error::Format {
            path: self.path.clone(),
            message: e.to_string(),
        })?;
        writeln!(self.writer, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    fn append(&mut self, result: &PointResult) -> Result<()> {
        self.write_line(result)?;
        self.pending += 1;
        if self.pending >= self.interval {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.pending = 0;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Computes points that are not yet in the checkpoint, at most `budget`
/// of them. Returns everything finished so far and how many points remain.
fn execute(
    config: &SweepConfig,
    options: &SweepOptions,
    budget: Option<usize>,
) -> Result<(Vec<PointResult>, usize)> {
    config.validate()?;
    if options.jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
    }
    let (log, mut done) = match &config.checkpoint {
        Some(path) => {
            let (log, done) = CheckpointLog::open(path, config)?;
            (Some(Mutex::new(log)), done)
        }
        None => (None, Vec::new()),
    };
    let wanted = config.points();
    let valid: HashMap<_, _> = wanted.iter().map(|p| (p.key(), ())).collect();
    done.retain(|r| valid.contains_key(&r.point.key()));
    let mut seen = HashMap::new();
    done.retain(|r| seen.insert(r.point.key(), ()).is_none());
    let mut todo: Vec<GridPoint> = wanted
        .into_iter()
        .filter(|p| !seen.contains_key(&p.key()))
        .collect();
    let remaining_after = budget.map_or(0, |b| todo.len().saturating_sub(b));
    if let Some(b) = budget {
        todo.truncate(b);
    }

    let run = |p: &GridPoint| -> Result<PointResult> {
        let r = compute_point(config, *p);
        if let Some(log) = &log {
            log.lock().expect("checkpoint lock").append(&r)?;
        }
        Ok(r)
    };
    let fresh: Vec<PointResult> = if options.jobs == 1 {
        todo.iter().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        pool.install(|| todo.par_iter().map(run).collect::<Result<_>>())?
    };
    if let Some(log) = log {
        log.into_inner().expect("checkpoint lock").flush()?;
    }
    done.extend(fresh);
    Ok((done, remaining_after))
}

/// Runs (or resumes) a sweep and returns records sorted by `(J, V, L)`.
pub fn run_sweep(config: &SweepConfig, options: &SweepOptions) -> Result<Vec<SweepRecord>> {
    let (results, _) = execute(config, options, None)?;
    Ok(assemble(config, results))
}

/// Computes at most `budget` new points into the checkpoint log and stops.
/// Returns the number of points still missing.
pub fn run_sweep_partial(config: &SweepConfig, options: &SweepOptions, budget: usize) -> Result<usize> {
    if config.checkpoint.is_none() {
        return Err(Error::InvalidArgument(
            "a partial sweep needs a checkpoint path".into(),
        ));
    }
    Ok(execute(config, options, Some(budget))?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordFormat {
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "json")]
    Json,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RecordFormat::Csv),
            "json" => Ok(RecordFormat::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown record format '{other}' (expected csv or json)"
            ))),
        }
    }
}

pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.variant.name(),
            r.j,
            r.v,
            r.l,
            opt_field(r.mean_abs_im),
            opt_field(r.mean_ipr),
            opt_field(r.ee_steady),
            opt_field(r.g),
            opt_field(r.g_prime),
            r.fit_mode,
            opt_field(r.residual),
        );
    }
    out
}

pub fn write_records(records: &[SweepRecord], format: RecordFormat, path: &Path) -> Result<()> {
    match format {
        RecordFormat::Csv => write_file(path, records_to_csv(records).as_bytes()),
        RecordFormat::Json => crate::io::write_json(path, records),
    }
}

/// Reads records back from a CSV written by [`write_records`].
pub fn read_records_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(bad(format!("expected header '{CSV_HEADER}'")));
    }
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(format!("'{s}' is not a number")))
        }
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            row[k].parse().map_err(|_| bad(format!("'{}' is not a number", &row[k])))
        };
        out.push(SweepRecord {
            variant: match &row[0] {
                "NHAAH1" => Variant::Nhaah1,
                "NHAAH2" => Variant::Nhaah2,
                other => return Err(bad(format!("unknown variant '{other}'"))),
            },
            j: num(1)?,
            v: num(2)?,
            l: row[3].parse().map_err(|_| bad(format!("'{}' is not a size", &row[3])))?,
            mean_abs_im: opt(&row[4])?,
            mean_ipr: opt(&row[5])?,
            ee_steady: opt(&row[6])?,
            g: opt(&row[7])?,
            g_prime: opt(&row[8])?,
            fit_mode: row[9].to_string(),
            residual: opt(&row[10])?,
            error: None,
        });
    }
    Ok(out)
}

/// Entanglement scaling read off a fitted coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingLaw {
    #[serde(rename = "volume")]
    Volume,
    #[serde(rename = "log")]
    Logarithmic,
    #[serde(rename = "area")]
    Area,
    #[serde(rename = "indeterminate")]
    Indeterminate,
}

/// Law expected from the `|J|` versus `|V|` case split.
pub fn expected_scaling_law(variant: Variant, j: f64, v: f64) -> ScalingLaw {
    match variant {
        Variant::Nhaah1 if j.abs() > v.abs() => ScalingLaw::Volume,
        Variant::Nhaah2 if v.abs() < j.abs() => ScalingLaw::Logarithmic,
        _ => ScalingLaw::Area,
    }
}

/// Classifies `g` from the fit mode chosen by [`primary_fit_mode`]:
/// volume when a linear slope exceeds 0.05, logarithmic when a log
/// coefficient lies in `[0.2, 0.5]`, area when `|g|` is below 0.01 (first
/// model) or 0.05 (second model).
pub fn classify_scaling(variant: Variant, mode: FitMode, g: f64) -> ScalingLaw {
    let area_band = match variant {
        Variant::Nhaah1 => 0.01,
        Variant::Nhaah2 => 0.05,
    };
    match mode {
        _ if g.abs() < area_band => ScalingLaw::Area,
        FitMode::Linear if g > 0.05 => ScalingLaw::Volume,
        FitMode::Log if (0.2..=0.5).contains(&g) => ScalingLaw::Logarithmic,
        _ => ScalingLaw::Indeterminate,
    }
}

/// Spectrum comparison between the second model and its momentum-space
/// counterpart of the first form (hopping `V`, potential `J`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "L")]
    pub l: usize,
    /// Largest distance between matched eigenvalues.
    pub eigenvalue_mismatch: f64,
    pub mean_abs_im_difference: f64,
    pub max_abs_im_difference: f64,
}

pub fn duality_row(j: f64, v: f64, l: usize) -> Result<DualityRow> {
    let spec = ModelSpec::fibonacci(Variant::Nhaah2, j, v, l)?;
    let direct = eig_right(&build_hamiltonian(&spec)?)?;
    let dual_spec = ModelSpec::with_alpha(Variant::Nhaah1, v, j, spec.alpha, l)?;
    let dual = eig_right(&build_hamiltonian(&dual_spec)?)?;
    let via_transform = eig_right(&momentum_dual_hamiltonian(&spec)?)?;
    let mismatch = spectrum_mismatch(&direct.eigenvalues, &dual.eigenvalues)
        .max(spectrum_mismatch(&direct.eigenvalues, &via_transform.eigenvalues));
    Ok(DualityRow {
        j,
        v,
        l,
        eigenvalue_mismatch: mismatch,
        mean_abs_im_difference: (direct.mean_abs_im - dual.mean_abs_im).abs(),
        max_abs_im_difference: (direct.max_abs_im - dual.max_abs_im).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(variant: Variant) -> SweepConfig {
        SweepConfig {
            j_grid: vec![1.0],
            v_grid: vec![0.5, 2.0],
            l_list: vec![13, 21, 34],
            total_time: 20.0,
            ..SweepConfig::default_grid(variant)
        }
    }

    #[test]
    fn default_grid_straddles_the_boundary() {
        let c = SweepConfig::default_grid(Variant::Nhaah1);
        assert_eq!(c.v_grid.len(), 41);
        assert_eq!(c.j_grid.len(), 40);
        for j in &c.j_grid {
            for v in &c.v_grid {
                assert!((j - v).abs() > 0.01);
            }
        }
        assert_eq!(c.points().len(), 40 * 41 * 5);
    }

    #[test]
    fn axis_endpoints() {
        let a = uniform_axis(0.0, 2.0, 0.25).unwrap();
        assert_eq!(a.len(), 9);
        assert_eq!(a[8], 2.0);
        assert_eq!(a[3], 0.75);
        assert!(uniform_axis(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn records_are_sorted_and_fitted() {
        let config = small(Variant::Nhaah1);
        let records = run_sweep(&config, &SweepOptions::default()).unwrap();
        assert_eq!(records.len(), 6);
        let keys: Vec<_> = records.iter().map(|r| (r.v, r.l)).collect();
        assert_eq!(keys[0], (0.5, 13));
        assert_eq!(keys[5], (2.0, 34));
        for r in &records {
            assert_eq!(r.fit_mode, "linear");
            assert!(r.g.unwrap().is_finite());
            assert!(r.g_prime.is_none(), "combined fit needs four sizes");
            assert!(r.ee_steady.unwrap() >= 0.0);
            assert!(r.mean_ipr.unwrap() > 0.0);
        }
    }

    #[test]
    fn failed_points_become_error_rows() {
        let mut config = small(Variant::Nhaah2);
        config.l_list = vec![13, 20];
        assert!(config.validate().is_err());
        let bad = compute_point(&config, GridPoint { j: 1.0, v: 0.5, l: 20 });
        assert!(bad.error.unwrap().contains("not Fibonacci"));
        let records = assemble(&config, vec![compute_point(&config, GridPoint { j: 1.0, v: 0.5, l: 20 })]);
        assert_eq!(records[0].fit_mode, "error");
        assert!(records[0].error.is_some());
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(records_to_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_round_trip() {
        let config = SweepConfig {
            observables: [Observable::MeanAbsIm, Observable::MeanIpr].into_iter().collect(),
            ..small(Variant::Nhaah2)
        };
        let records = run_sweep(&config, &SweepOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_records(&records, RecordFormat::Csv, &path).unwrap();
        let back = read_records_csv(&path).unwrap();
        assert_eq!(back, records);
        assert!(back.iter().all(|r| r.ee_steady.is_none() && r.fit_mode == "none"));
    }

    #[test]
    fn classification_bands() {
        assert_eq!(classify_scaling(Variant::Nhaah1, FitMode::Linear, 0.15), ScalingLaw::Volume);
        assert_eq!(classify_scaling(Variant::Nhaah1, FitMode::Linear, 0.003), ScalingLaw::Area);
        assert_eq!(classify_scaling(Variant::Nhaah1, FitMode::Linear, 0.03), ScalingLaw::Indeterminate);
        assert_eq!(classify_scaling(Variant::Nhaah2, FitMode::Log, 0.34), ScalingLaw::Logarithmic);
        assert_eq!(classify_scaling(Variant::Nhaah2, FitMode::Linear, 0.02), ScalingLaw::Area);
        assert_eq!(expected_scaling_law(Variant::Nhaah2, 1.0, 0.5), ScalingLaw::Logarithmic);
        assert_eq!(expected_scaling_law(Variant::Nhaah1, 1.0, 2.0), ScalingLaw::Area);
        assert_eq!(primary_fit_mode(Variant::Nhaah2, 1.0, 1.0), FitMode::Linear);
    }

    #[test]
    fn duality_holds_on_small_lattice() {
        for (j, v) in [(1.0, 0.5), (1.0, 2.0), (0.3, 1.7)] {
            let row = duality_row(j, v, 34).unwrap();
            assert!(row.eigenvalue_mismatch < 1e-8, "{row:?}");
            assert!(row.mean_abs_im_difference < 1e-8);
        }
    }
}
