//! Plain-text data, coefficient and history files, plus run manifests.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write-then-read cycle is bit exact and independent of the locale.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forward::{CauchyData, Coefficient};
use crate::grid::Grid2D;
use crate::inversion::IterationRecord;

const DATA_KEYS: [&str; 7] = ["R", "Nx", "kmin", "kmax", "Nk", "delta", "seed"];
const DATA_COLUMNS: [&str; 6] = ["j", "k_index", "Re(g0)", "Im(g0)", "Re(g1)", "Im(g1)"];

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), line, message: message.into() }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `# key=value ...` header; keys must appear in the given order.
fn parse_header(path: &Path, line: &str, keys: &[&str]) -> Result<Vec<String>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| format_err(path, 1, format!("expected header '# {}'", keys.join(" "))))?;
    let fields: Vec<&str> = body.split_whitespace().collect();
    if fields.len() != keys.len() {
        return Err(format_err(path, 1, format!("header needs {} fields ({}), found {}", keys.len(), keys.join(" "), fields.len())));
    }
    fields
        .iter()
        .zip(keys)
        .map(|(f, k)| match f.split_once('=') {
            Some((name, value)) if name == *k => Ok(value.to_string()),
            _ => Err(format_err(path, 1, format!("expected '{k}=<value>', found '{f}'"))),
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| format_err(path, line, format!("cannot parse {what} from '{s}'")))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn cauchy_to_string(cd: &CauchyData) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# R={} Nx={} kmin={} kmax={} Nk={} delta={} seed={}",
        cd.half_width, cd.n_cells, cd.k_min, cd.k_max, cd.n_k, cd.delta, cd.seed
    );
    let _ = writeln!(s, "# {}", DATA_COLUMNS.join(" "));
    for (r, (g0, g1)) in cd.g0.iter().zip(&cd.g1).enumerate() {
        for (j, (a, b)) in g0.iter().zip(g1).enumerate() {
            let _ = writeln!(s, "{j} {r} {} {} {} {}", a.re, a.im, b.re, b.im);
        }
    }
    s
}

pub fn parse_cauchy(path: &Path, text: &str) -> Result<CauchyData> {
    let first = text.lines().next().unwrap_or("");
    let h = parse_header(path, first, &DATA_KEYS)?;
    let half_width: f64 = parse_num(path, 1, "R", &h[0])?;
    let n_cells: usize = parse_num(path, 1, "Nx", &h[1])?;
    let k_min: f64 = parse_num(path, 1, "kmin", &h[2])?;
    let k_max: f64 = parse_num(path, 1, "kmax", &h[3])?;
    let n_k: usize = parse_num(path, 1, "Nk", &h[4])?;
    let delta: f64 = parse_num(path, 1, "delta", &h[5])?;
    let seed: u64 = parse_num(path, 1, "seed", &h[6])?;
    let grid = Grid2D::new(half_width, n_cells).map_err(|e| format_err(path, 1, e.to_string()))?;
    let side = grid.n_side();
    let zero = Complex64::new(0.0, 0.0);
    let mut g0 = vec![vec![zero; side]; n_k];
    let mut g1 = vec![vec![zero; side]; n_k];
    let mut seen = vec![false; side * n_k];
    for (ln, line) in data_lines(text) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < DATA_COLUMNS.len() {
            return Err(Error::MissingColumn { path: path.to_path_buf(), line: ln, column: DATA_COLUMNS[cols.len()] });
        }
        if cols.len() > DATA_COLUMNS.len() {
            return Err(format_err(path, ln, format!("expected {} columns, found {}", DATA_COLUMNS.len(), cols.len())));
        }
        let j: usize = parse_num(path, ln, "j", cols[0])?;
        let r: usize = parse_num(path, ln, "k_index", cols[1])?;
        if j >= side || r >= n_k {
            return Err(format_err(path, ln, format!("index (j={j}, k_index={r}) outside {side} x {n_k}")));
        }
        if std::mem::replace(&mut seen[r * side + j], true) {
            return Err(format_err(path, ln, format!("duplicate row for j={j}, k_index={r}")));
        }
        let v: Vec<f64> =
            (2..6).map(|c| parse_num(path, ln, DATA_COLUMNS[c], cols[c])).collect::<Result<_>>()?;
        g0[r][j] = Complex64::new(v[0], v[1]);
        g1[r][j] = Complex64::new(v[2], v[3]);
    }
    if let Some(miss) = seen.iter().position(|s| !s) {
        return Err(format_err(
            path,
            text.lines().count(),
            format!("missing row for j={}, k_index={}", miss % side, miss / side),
        ));
    }
    Ok(CauchyData { half_width, n_cells, k_min, k_max, n_k, g0, g1, delta, seed })
}

pub fn write_cauchy(path: &Path, cd: &CauchyData) -> Result<()> {
    write_text(path, &cauchy_to_string(cd))
}

pub fn read_cauchy(path: &Path) -> Result<CauchyData> {
    parse_cauchy(path, &read_text(path)?)
}

pub fn coefficient_to_string(a: &Coefficient) -> String {
    let g = a.grid;
    let mut s = format!("# R={} Nx={}\n# i j a\n", g.half_width, g.n_cells);
    for i in 0..g.n_side() {
        for j in 0..g.n_side() {
            let _ = writeln!(s, "{i} {j} {}", a.at(i, j));
        }
    }
    s
}

pub fn parse_coefficient(path: &Path, text: &str) -> Result<Coefficient> {
    let h = parse_header(path, text.lines().next().unwrap_or(""), &["R", "Nx"])?;
    let grid = Grid2D::new(parse_num(path, 1, "R", &h[0])?, parse_num(path, 1, "Nx", &h[1])?)
        .map_err(|e| format_err(path, 1, e.to_string()))?;
    let mut values = vec![f64::NAN; grid.n_nodes()];
    let mut seen = vec![false; grid.n_nodes()];
    for (ln, line) in data_lines(text) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(format_err(path, ln, format!("expected 'i j a', found {} columns", cols.len())));
        }
        let i: usize = parse_num(path, ln, "i", cols[0])?;
        let j: usize = parse_num(path, ln, "j", cols[1])?;
        if i >= grid.n_side() || j >= grid.n_side() {
            return Err(format_err(path, ln, format!("node (i={i}, j={j}) outside the grid")));
        }
        let node = grid.node(i, j);
        if std::mem::replace(&mut seen[node], true) {
            return Err(format_err(path, ln, format!("duplicate node (i={i}, j={j})")));
        }
        values[node] = parse_num(path, ln, "a", cols[2])?;
    }
    if let Some(miss) = seen.iter().position(|s| !s) {
        let (i, j) = grid.node_coords(miss);
        return Err(format_err(path, text.lines().count(), format!("missing node (i={i}, j={j})")));
    }
    Ok(Coefficient::from_values(grid, values))
}

pub fn write_coefficient(path: &Path, a: &Coefficient) -> Result<()> {
    write_text(path, &coefficient_to_string(a))
}

pub fn read_coefficient(path: &Path) -> Result<Coefficient> {
    parse_coefficient(path, &read_text(path)?)
}

/// History rows `n J grad_norm a_max`; wall time stays out so that
/// repeated runs produce identical files.
pub fn history_to_string(records: &[IterationRecord]) -> String {
    let mut s = String::from("# n J grad_norm a_max\n");
    for r in records {
        let _ = writeln!(s, "{} {} {} {}", r.n, r.j_value, r.gradient_norm, r.a_max);
    }
    s
}

pub fn parse_history(path: &Path, text: &str) -> Result<Vec<IterationRecord>> {
    data_lines(text)
        .map(|(ln, line)| {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(format_err(path, ln, format!("expected 'n J grad_norm a_max', found {} columns", cols.len())));
            }
            Ok(IterationRecord {
                n: parse_num(path, ln, "n", cols[0])?,
                j_value: parse_num(path, ln, "J", cols[1])?,
                gradient_norm: parse_num(path, ln, "grad_norm", cols[2])?,
                a_max: parse_num(path, ln, "a_max", cols[3])?,
                wall_time_s: 0.0,
            })
        })
        .collect()
}

/// Grid row nearest to a requested `x₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowChoice {
    pub row: usize,
    pub x2: f64,
    /// The requested value lies on the grid (to `1e-9 h`).
    pub exact: bool,
}

pub fn nearest_row(grid: &Grid2D, x2: f64) -> RowChoice {
    let t = ((x2 + grid.half_width) / grid.h()).round().clamp(0.0, grid.n_cells as f64) as usize;
    let exact = (grid.x2(t) - x2).abs() <= 1e-9 * grid.h();
    RowChoice { row: t, x2: grid.x2(t), exact }
}

/// `x₁ a` rows along one grid row.
pub fn cross_section_to_string(a: &Coefficient, choice: &RowChoice) -> String {
    let g = a.grid;
    let mut s = format!("# x2={}\n# x1 a\n", choice.x2);
    for j in 0..g.n_side() {
        let _ = writeln!(s, "{} {}", g.x1(j), a.at(choice.row, j));
    }
    s
}

/// `x₁ x₂ a` rows for every node, row by row.
pub fn heatmap_to_string(a: &Coefficient) -> String {
    let g = a.grid;
    let mut s = String::from("# x1 x2 a\n");
    for i in 0..g.n_side() {
        for j in 0..g.n_side() {
            let _ = writeln!(s, "{} {} {}", g.x1(j), g.x2(i), a.at(i, j));
        }
    }
    s
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<FileHash>,
    /// Everything needed to repeat the run, as TOML.
    pub config: String,
    pub seed: Option<u64>,
    pub outputs: Vec<FileHash>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, config: String, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            config,
            seed,
            outputs: Vec::new(),
            started_unix_s: unix_now(),
            finished_unix_s: 0.0,
        }
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix_s = unix_now();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_text(path, &(text + "\n"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| format_err(path, e.line(), e.to_string()))
    }
}
