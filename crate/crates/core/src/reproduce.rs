//! Preset recipes that regenerate the data behind each published figure as
//! plot-ready CSV.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entanglement::{entropy_profile, EvolutionConfig};
use crate::error::{Error, Result};
use crate::fit::{fit_profile, trim_profile_edges, FitMode};
use crate::io::{write_file, write_json};
use crate::lattice::{ModelSpec, Variant};
use crate::sweep::{
    run_sweep, uniform_axis, write_records, Observable, RecordFormat, SweepConfig, SweepOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    #[serde(rename = "small")]
    Small,
    #[serde(rename = "full")]
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Scale::Small),
            "full" => Ok(Scale::Full),
            other => Err(Error::InvalidArgument(format!(
                "unknown scale '{other}' (expected small or full)"
            ))),
        }
    }
}

/// Figure number, 1 through 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Figure(u8);

impl Figure {
    pub fn new(n: u8) -> Result<Self> {
        if (1..=8).contains(&n) {
            Ok(Figure(n))
        } else {
            Err(Error::InvalidArgument(format!("there is no figure {n}; choose fig1..fig8")))
        }
    }

    pub fn number(self) -> u8 {
        self.0
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.strip_prefix("fig").unwrap_or(s);
        let n = digits
            .parse::<u8>()
            .map_err(|_| Error::InvalidArgument(format!("'{s}' is not a figure; use fig1..fig8")))?;
        Figure::new(n)
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fig{}", self.0)
    }
}

/// One output file of a figure recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FigureJob {
    Sweep { name: String, config: SweepConfig },
    Profile { name: String, spec: ModelSpec, evolution: EvolutionConfig },
}

impl FigureJob {
    pub fn name(&self) -> &str {
        match self {
            FigureJob::Sweep { name, .. } | FigureJob::Profile { name, .. } => name,
        }
    }
}

struct Sizes {
    scan: Vec<usize>,
    profile: usize,
    step: f64,
}

fn sizes(scale: Scale) -> Sizes {
    match scale {
        Scale::Full => Sizes {
            scan: vec![89, 144, 233, 377, 610],
            profile: 610,
            step: 0.05,
        },
        Scale::Small => Sizes {
            scan: vec![55, 89, 144, 233],
            profile: 233,
            step: 0.25,
        },
    }
}

fn observables(list: &[Observable]) -> std::collections::BTreeSet<Observable> {
    list.iter().copied().collect()
}

fn base(variant: Variant) -> SweepConfig {
    SweepConfig::default_grid(variant)
}

/// Grid over `[0, 2]²` with the `J` axis shifted off the `|J| = |V|` line.
fn plane(variant: Variant, step: f64, l_list: Vec<usize>, obs: &[Observable]) -> Result<SweepConfig> {
    Ok(SweepConfig {
        j_grid: uniform_axis(step / 2.0, 2.0 - step / 2.0, step)?,
        v_grid: uniform_axis(0.0, 2.0, step)?,
        l_list,
        observables: observables(obs),
        ..base(variant)
    })
}

/// Cuts at `J = 1` (varying `V`) and `V = 1` (varying `J`), both crossing
/// the critical point.
fn cuts(variant: Variant, axis: Vec<f64>, l_list: Vec<usize>, obs: &[Observable]) -> [SweepConfig; 2] {
    let vary_v = SweepConfig {
        j_grid: vec![1.0],
        v_grid: axis.clone(),
        l_list: l_list.clone(),
        observables: observables(obs),
        ..base(variant)
    };
    let vary_j = SweepConfig {
        j_grid: axis,
        v_grid: vec![1.0],
        ..vary_v.clone()
    };
    [vary_v, vary_j]
}

fn profile_jobs(variant: Variant, l: usize, tag: &str) -> Result<Vec<FigureJob>> {
    [(1.0, 0.5), (1.0, 2.0), (0.5, 1.0), (2.0, 1.0)]
        .into_iter()
        .map(|(j, v)| {
            Ok(FigureJob::Profile {
                name: format!("{tag}_profile_J{j}_V{v}"),
                spec: ModelSpec::fibonacci(variant, j, v, l)?,
                evolution: EvolutionConfig::default(),
            })
        })
        .collect()
}

pub fn figure_jobs(figure: Figure, scale: Scale) -> Result<Vec<FigureJob>> {
    use Observable::*;
    let s = sizes(scale);
    let tag = figure.to_string();
    let sweep = |name: &str, config: SweepConfig| FigureJob::Sweep {
        name: format!("{tag}_{name}"),
        config,
    };
    let scaling_params = uniform_axis(0.25, 2.0, 0.25)?;
    let fine_axis = uniform_axis(0.0, 2.0, s.step)?;
    let jobs = match figure.number() {
        1 => {
            let l = match scale {
                Scale::Full => 610,
                Scale::Small => 89,
            };
            vec![
                sweep("NHAAH1", plane(Variant::Nhaah1, s.step, vec![l], &[MeanAbsIm, MeanIpr])?),
                sweep("NHAAH2", plane(Variant::Nhaah2, s.step, vec![l], &[MeanAbsIm, MeanIpr])?),
            ]
        }
        n @ (2 | 5) => {
            let variant = if n == 2 { Variant::Nhaah1 } else { Variant::Nhaah2 };
            let [a, c] = cuts(variant, scaling_params, s.scan.clone(), &[SteadyEntropy]);
            let mut jobs = vec![sweep("J1_vs_L", a), sweep("V1_vs_L", c)];
            if n == 2 {
                jobs.extend(profile_jobs(variant, s.profile, &tag)?);
            }
            jobs
        }
        6 => profile_jobs(Variant::Nhaah2, s.profile, &tag)?,
        n @ (3 | 7) => {
            let variant = if n == 3 { Variant::Nhaah1 } else { Variant::Nhaah2 };
            let [a, c] = cuts(variant, fine_axis, s.scan.clone(), &[SteadyEntropy, ScalingCoefficient]);
            vec![sweep("J1_vary_V", a), sweep("V1_vary_J", c)]
        }
        n @ (4 | 8) => {
            let variant = if n == 4 { Variant::Nhaah1 } else { Variant::Nhaah2 };
            vec![sweep(
                "phase_diagram",
                plane(variant, s.step, s.scan.clone(), &[SteadyEntropy, ScalingCoefficient])?,
            )]
        }
        _ => unreachable!("figure numbers are validated"),
    };
    Ok(jobs)
}

/// Runs every job of a figure into `out`, returning the files written.
/// Sweeps checkpoint next to their output so long runs can resume.
pub fn run_figure(figure: Figure, scale: Scale, options: &SweepOptions, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for job in figure_jobs(figure, scale)? {
        match job {
            FigureJob::Sweep { name, mut config } => {
                let csv = out.join(format!("{name}.csv"));
                config.checkpoint = Some(out.join(format!("{name}.checkpoint.jsonl")));
                config.output = Some(csv.clone());
                let records = run_sweep(&config, options)?;
                write_records(&records, RecordFormat::Csv, &csv)?;
                written.push(csv);
            }
            FigureJob::Profile { name, spec, evolution } => {
                let profile = entropy_profile(&spec, &evolution)?;
                let csv = out.join(format!("{name}.csv"));
                write_file(&csv, profile.to_csv().as_bytes())?;
                written.push(csv);
                let trimmed = trim_profile_edges(&profile.points, spec.l, 5);
                let fits: Vec<serde_json::Value> = [FitMode::ProfileCentralCharge, FitMode::ProfileAbc]
                    .into_iter()
                    .filter_map(|m| fit_profile(&trimmed, spec.l, m).ok())
                    .map(|f| f.to_json())
                    .collect();
                let json = out.join(format!("{name}_fit.json"));
                write_json(&json, &fits)?;
                written.push(json);
            }
        }
    }
    Ok(written)
}
