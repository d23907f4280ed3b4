//! The four commands behind the binary. Each writes its files plus a
//! `manifest.json` into the output directory.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::IncidentWave;
use crate::inversion::{ablation_no_weight, run_inversion, Counters, InversionConfig, InversionResult};
use crate::io::{self, FileHash, RowChoice, RunManifest};
use crate::scenario::Scenario;
use crate::validation::{run_suite, Check, Thresholds};

pub const DATA_FILE: &str = "data.txt";
pub const CLEAN_DATA_FILE: &str = "data_clean.txt";
pub const TRUTH_FILE: &str = "truth.txt";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const COEFFICIENT_FILE: &str = "coefficient.txt";
pub const HISTORY_FILE: &str = "history.txt";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

fn hashes(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths.iter().map(|p| FileHash::of(p)).collect()
}

/// Writes noisy and clean data, the truth and the effective scenario.
pub fn simulate(scenario: &str, out: &Path, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let mut sc = Scenario::resolve(scenario)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let config = sc.to_toml();
    let mut manifest = RunManifest::new("simulate", config.clone(), Some(sc.seed));
    if Path::new(scenario).exists() {
        manifest.inputs.push(FileHash::of(Path::new(scenario))?);
    }
    let sim = sc.simulate()?;
    let files = [DATA_FILE, CLEAN_DATA_FILE, TRUTH_FILE, SCENARIO_FILE].map(|f| out.join(f));
    io::write_cauchy(&files[0], &sim.noisy)?;
    io::write_cauchy(&files[1], &sim.clean)?;
    io::write_coefficient(&files[2], &sim.truth)?;
    io::write_text(&files[3], &config)?;
    manifest.outputs = hashes(&files)?;
    manifest.write(&out.join(MANIFEST_FILE))?;
    info!("simulated '{}' (delta = {}, seed = {}) into {}", sc.name, sc.delta, sc.seed, out.display());
    Ok(files.to_vec())
}

/// Inversion settings from either a scenario file (its `[inversion]`
/// table and wave direction) or a bare inversion table.
pub fn load_config(path: &Path) -> Result<(InversionConfig, IncidentWave)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match toml::from_str::<Scenario>(&text) {
        Ok(sc) => {
            sc.inversion.validate()?;
            Ok((sc.inversion.clone(), sc.wave()?))
        }
        Err(scenario_err) => match toml::from_str::<InversionConfig>(&text) {
            Ok(cfg) => {
                cfg.validate()?;
                Ok((cfg, IncidentWave::downward()))
            }
            Err(cfg_err) => Err(Error::Config(format!(
                "{}: not a scenario ({}) nor an inversion table ({})",
                path.display(),
                scenario_err.message(),
                cfg_err.message()
            ))),
        },
    }
}

/// Outcome written to `summary.json`; contains no timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub carleman_weight: bool,
    pub converged: bool,
    pub iterations: usize,
    pub selected_iterate: usize,
    pub max_value: f64,
    pub max_x1: f64,
    pub max_x2: f64,
    pub non_decrease_warning: bool,
    pub counters: Counters,
    pub branch_jumps: usize,
    pub max_imaginary: f64,
}

impl Summary {
    pub fn of(res: &InversionResult, carleman_weight: bool) -> Self {
        let (max_value, node) = res.coefficient.max_with_location();
        let (x1, x2) = res.coefficient.grid.point(node);
        Self {
            carleman_weight,
            converged: res.converged,
            iterations: res.records.len(),
            selected_iterate: res.selected_iterate,
            max_value,
            max_x1: x1,
            max_x2: x2,
            non_decrease_warning: res.non_decrease_warning,
            counters: res.counters,
            branch_jumps: res.branch_jumps,
            max_imaginary: res.max_imaginary,
        }
    }
}

pub struct Inverted {
    pub result: InversionResult,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

pub fn invert(data: &Path, config: Option<&Path>, out: &Path, no_carleman: bool) -> Result<Inverted> {
    let (mut cfg, wave) = match config {
        Some(p) => load_config(p)?,
        None => (InversionConfig::default(), IncidentWave::downward()),
    };
    if no_carleman {
        cfg.lambda = 0.0;
    }
    let command = if no_carleman { "invert --no-carleman" } else { "invert" };
    let mut manifest = RunManifest::new(command, toml::to_string_pretty(&cfg).expect("config serializes"), None);
    manifest.inputs.push(FileHash::of(data)?);
    if let Some(p) = config {
        manifest.inputs.push(FileHash::of(p)?);
    }
    let cd = io::read_cauchy(data)?;
    manifest.seed = Some(cd.seed);
    let result = if no_carleman { ablation_no_weight(&cd, &wave, &cfg)? } else { run_inversion(&cd, &wave, &cfg)? };
    let summary = Summary::of(&result, !no_carleman);
    let files = [COEFFICIENT_FILE, HISTORY_FILE, SUMMARY_FILE].map(|f| out.join(f));
    io::write_coefficient(&files[0], &result.coefficient)?;
    io::write_text(&files[1], &io::history_to_string(&result.records))?;
    io::write_text(&files[2], &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    manifest.outputs = hashes(&files)?;
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(Inverted { result, summary, files: files.to_vec() })
}

pub fn validate() -> Result<Vec<Check>> {
    run_suite(&Thresholds::default())
}

pub struct Exported {
    pub row: RowChoice,
    pub section: PathBuf,
    pub heatmap: PathBuf,
}

/// Cross-section at the grid row nearest `x2` plus the full heatmap, next
/// to the result file unless `out` is given.
pub fn export(result: &Path, x2: f64, out: Option<&Path>) -> Result<Exported> {
    let a = io::read_coefficient(result)?;
    let row = io::nearest_row(&a.grid, x2);
    if !row.exact {
        warn!("x2 = {x2} is not a grid row; using the nearest row {} at x2 = {}", row.row, row.x2);
    }
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| result.parent().map(Path::to_path_buf).unwrap_or_default());
    let stem = result.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
    let section = dir.join(format!("{stem}_section.txt"));
    let heatmap = dir.join(format!("{stem}_heatmap.txt"));
    io::write_text(&section, &io::cross_section_to_string(&a, &row))?;
    io::write_text(&heatmap, &io::heatmap_to_string(&a))?;
    Ok(Exported { row, section, heatmap })
}
