//! Change of variables `u → p = u/u_in → v = Log(p)/k²`, projection onto the
//! wavenumber basis, transformation of the boundary data, and recovery of
//! the coefficient from `v`.

use std::f64::consts::PI;
use std::ops::{Add, Index, IndexMut, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::forward::{CauchyData, Coefficient, IncidentWave};
use crate::grid::{Grid2D, KGrid};

/// Smallest admissible `|u/u_in|`.
pub const P_FLOOR: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `N` complex scalar fields on the grid, stored in lined-up order
/// `m = i + j (N_x+1) + r (N_x+1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVectorField {
    grid: Grid2D,
    n_modes: usize,
    data: Vec<Complex64>,
}

impl CoeffVectorField {
    pub fn zeros(grid: Grid2D, n_modes: usize) -> Self {
        Self { grid, n_modes, data: vec![ZERO; grid.n_nodes() * n_modes] }
    }

    pub fn from_lined(grid: Grid2D, n_modes: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), grid.n_nodes() * n_modes);
        Self { grid, n_modes, data }
    }

    pub fn from_fn(grid: Grid2D, n_modes: usize, f: impl Fn(usize, usize, usize) -> Complex64) -> Self {
        let data = (0..grid.n_nodes() * n_modes)
            .map(|m| {
                let (i, j, r) = grid.from_lined_index(m);
                f(i, j, r)
            })
            .collect();
        Self { grid, n_modes, data }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Component `r` at node `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize, r: usize) -> Complex64 {
        self.data[self.grid.lined_index(i, j, r)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, r: usize, value: Complex64) {
        let m = self.grid.lined_index(i, j, r);
        self.data[m] = value;
    }

    pub fn as_lined(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_lined_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// All components at one node.
    pub fn node_vector(&self, node: usize) -> Vec<Complex64> {
        (0..self.n_modes).map(|r| self.data[node + r * self.grid.n_nodes()]).collect()
    }

    /// Euclidean norm over all lined-up entries.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Re⟨self, other⟩`, the real inner product on `ℝ²ⁿ`.
    pub fn inner_re(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(x, y)| (x.conj() * y).re).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `self + scale · other`.
    pub fn axpy(&self, scale: f64, other: &Self) -> Self {
        assert_eq!(self.data.len(), other.data.len());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + scale * b).collect();
        Self { grid: self.grid, n_modes: self.n_modes, data }
    }
}

impl Index<usize> for CoeffVectorField {
    type Output = Complex64;
    fn index(&self, m: usize) -> &Complex64 {
        &self.data[m]
    }
}

impl IndexMut<usize> for CoeffVectorField {
    fn index_mut(&mut self, m: usize) -> &mut Complex64 {
        &mut self.data[m]
    }
}

impl Add for &CoeffVectorField {
    type Output = CoeffVectorField;
    fn add(self, rhs: Self) -> CoeffVectorField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &CoeffVectorField {
    type Output = CoeffVectorField;
    fn sub(self, rhs: Self) -> CoeffVectorField {
        self.axpy(-1.0, rhs)
    }
}

/// `v(x, k)` on the grid for every measurement wavenumber, `v[r][node]`.
#[derive(Debug, Clone)]
pub struct LogField {
    pub v: Vec<Vec<Complex64>>,
    /// Node/wavenumber-neighbour pairs where `arg p` jumps by more than π,
    /// i.e. where the principal branch probably wraps. Flagged, not fixed.
    pub branch_jumps: usize,
}

/// `p = u/u_in`, `v = Log(p)/k²` with the principal logarithm.
pub fn total_to_log(u: &[Vec<Complex64>], wave: &IncidentWave, grid: &Grid2D, kg: &KGrid) -> Result<LogField> {
    assert_eq!(u.len(), kg.n_sub);
    let mut v = Vec::with_capacity(kg.n_sub);
    let mut prev_arg: Option<Vec<f64>> = None;
    let mut branch_jumps = 0;
    for (r, (&k, field)) in kg.midpoints.iter().zip(u).enumerate() {
        let mut args = Vec::with_capacity(grid.n_nodes());
        let row = field
            .iter()
            .enumerate()
            .map(|(node, &z)| {
                let (x1, x2) = grid.point(node);
                let p = z / wave.value(x1, x2, k);
                let magnitude = p.norm();
                if !(magnitude > P_FLOOR) {
                    return Err(Error::NearZeroTotalField { node, k_index: r, magnitude });
                }
                args.push(p.arg());
                Ok(p.ln() / (k * k))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(prev) = &prev_arg {
            branch_jumps += prev.iter().zip(&args).filter(|(a, b)| (*a - *b).abs() > PI).count();
        }
        prev_arg = Some(args);
        v.push(row);
    }
    Ok(LogField { v, branch_jumps })
}

/// `vₙ(x) = ∫ v(x, k) Φₙ(k) dk` per node by the midpoint rule.
pub fn log_to_coeffs(lf: &LogField, bs: &BasisSet, grid: &Grid2D) -> CoeffVectorField {
    let mut out = CoeffVectorField::zeros(*grid, bs.n_modes);
    let mut samples = vec![ZERO; bs.kgrid.n_sub];
    for node in 0..grid.n_nodes() {
        for (s, row) in samples.iter_mut().zip(&lf.v) {
            *s = row[node];
        }
        for (r, c) in bs.project(&samples).into_iter().enumerate() {
            out.data[node + r * grid.n_nodes()] = c;
        }
    }
    out
}

/// Cauchy data of `v` on Γ: scalar traces over `(k, x₁)` and their Fourier
/// coefficients.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    /// `g̃₀[r][j] = Log(g₀/u_in)/k²`.
    pub g0: Vec<Vec<Complex64>>,
    /// `g̃₁[r][j] = (g₁/g₀ - ik d₂)/k²`.
    pub g1: Vec<Vec<Complex64>>,
    /// `G₀[n][j]`.
    pub coeffs0: Vec<Vec<Complex64>>,
    /// `G₁[n][j]`.
    pub coeffs1: Vec<Vec<Complex64>>,
}

/// Transforms measured `(g₀, g₁)` into Cauchy data for `v` and projects it.
pub fn cauchy_to_v_data(cd: &CauchyData, wave: &IncidentWave, bs: &BasisSet) -> Result<BoundaryData> {
    let grid = cd.grid()?;
    let kg = &bs.kgrid;
    if cd.n_k != kg.n_sub || cd.k_min != kg.k_min || cd.k_max != kg.k_max {
        return Err(Error::GridMismatch(format!(
            "data has {} wavenumbers on [{}, {}], basis expects {} on [{}, {}]",
            cd.n_k, cd.k_min, cd.k_max, kg.n_sub, kg.k_min, kg.k_max
        )));
    }
    let (_, d2) = wave.direction();
    let x2 = grid.half_width;
    let side = grid.n_side();
    let mut g0t = Vec::with_capacity(kg.n_sub);
    let mut g1t = Vec::with_capacity(kg.n_sub);
    for (r, &k) in kg.midpoints.iter().enumerate() {
        let mut row0 = Vec::with_capacity(side);
        let mut row1 = Vec::with_capacity(side);
        for j in 0..side {
            let u_in = wave.value(grid.x1(j), x2, k);
            let p = cd.g0[r][j] / u_in;
            if !(p.norm() > P_FLOOR) {
                return Err(Error::NearZeroTotalField { node: grid.node(grid.top_row(), j), k_index: r, magnitude: p.norm() });
            }
            row0.push(p.ln() / (k * k));
            row1.push((cd.g1[r][j] / cd.g0[r][j] - Complex64::new(0.0, k * d2)) / (k * k));
        }
        g0t.push(row0);
        g1t.push(row1);
    }
    let project_columns = |g: &Vec<Vec<Complex64>>| -> Vec<Vec<Complex64>> {
        let per_column: Vec<Vec<Complex64>> =
            (0..side).map(|j| bs.project(&g.iter().map(|row| row[j]).collect::<Vec<_>>())).collect();
        (0..bs.n_modes).map(|n| per_column.iter().map(|c| c[n]).collect()).collect()
    };
    let coeffs0 = project_columns(&g0t);
    let coeffs1 = project_columns(&g1t);
    Ok(BoundaryData { g0: g0t, g1: g1t, coeffs0, coeffs1 })
}

/// Gaussian smoothing along `x₁` with standard deviation `sigma_cells`
/// grid steps; the row is mirrored about its end nodes. `0` returns a copy.
pub fn smooth_along_x1(row: &[Complex64], sigma_cells: f64) -> Vec<Complex64> {
    if !(sigma_cells > 0.0) || row.len() < 2 {
        return row.to_vec();
    }
    let n = row.len() as isize;
    let radius = (4.0 * sigma_cells).ceil() as isize;
    let weights: Vec<f64> = (-radius..=radius).map(|t| (-(t * t) as f64 / (2.0 * sigma_cells * sigma_cells)).exp()).collect();
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|j| {
            let mut acc = ZERO;
            for (t, w) in (-radius..=radius).zip(&weights) {
                let mut q = j + t;
                // reflect until inside; wide kernels on short rows need several passes
                while q < 0 || q >= n {
                    q = if q < 0 { -q } else { 2 * (n - 1) - q };
                }
                acc += row[q as usize] * *w;
            }
            acc / total
        })
        .collect()
}

impl BoundaryData {
    /// Smooths traces and coefficients along `x₁` (see [`smooth_along_x1`]).
    pub fn smoothed(&self, sigma_cells: f64) -> Self {
        let apply = |rows: &Vec<Vec<Complex64>>| rows.iter().map(|r| smooth_along_x1(r, sigma_cells)).collect();
        Self { g0: apply(&self.g0), g1: apply(&self.g1), coeffs0: apply(&self.coeffs0), coeffs1: apply(&self.coeffs1) }
    }
}

/// Recovered coefficient plus the discarded imaginary part of the residual.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub coefficient: Coefficient,
    /// Largest `|Im[Δv + k²∇v·∇v - 2ik ∂x₂v]|` over the grid.
    pub max_imaginary: f64,
}

/// Accuracy of the centered stencils used by the elimination formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilOrder {
    Second,
    #[default]
    /// Five-point stencils where they fit; nodes next to `∂Ω` fall back to
    /// the three-point ones.
    Fourth,
}

/// First and second derivatives along one grid line: centered in the
/// interior, second-order one-sided at the ends.
fn line_derivatives(f: &[Complex64], h: f64, order: StencilOrder) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = f.len();
    let mut d1 = vec![ZERO; n];
    let mut d2 = vec![ZERO; n];
    for t in 1..n - 1 {
        d1[t] = (f[t + 1] - f[t - 1]) / (2.0 * h);
        d2[t] = (f[t + 1] - 2.0 * f[t] + f[t - 1]) / (h * h);
    }
    if order == StencilOrder::Fourth {
        for t in 2..n.saturating_sub(2) {
            d1[t] = (f[t - 2] - 8.0 * f[t - 1] + 8.0 * f[t + 1] - f[t + 2]) / (12.0 * h);
            d2[t] = (-f[t - 2] + 16.0 * f[t - 1] - 30.0 * f[t] + 16.0 * f[t + 1] - f[t + 2]) / (12.0 * h * h);
        }
    }
    let last = n - 1;
    d1[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d1[last] = (3.0 * f[last] - 4.0 * f[last - 1] + f[last - 2]) / (2.0 * h);
    if n >= 4 {
        d2[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);
        d2[last] = (2.0 * f[last] - 5.0 * f[last - 1] + 4.0 * f[last - 2] - f[last - 3]) / (h * h);
    } else {
        d2[0] = d2[1];
        d2[last] = d2[last - 1];
    }
    (d1, d2)
}

/// `a(x) = -Re[Δv + k²∇v·∇v - 2ik ∂x₂v]` at `k = k_min`, where
/// `v(x, k_min) = Σ vₙ(x) Φₙ(k_min)`. No clamping.
pub fn recover_coefficient(coeffs: &CoeffVectorField, bs: &BasisSet, order: StencilOrder) -> Recovery {
    let grid = coeffs.grid();
    let k = bs.kgrid.k_min;
    let phi_at: Vec<f64> = (0..bs.n_modes).map(|n| bs.value(n, k)).collect();
    let v: Vec<Complex64> = (0..grid.n_nodes())
        .map(|node| (0..bs.n_modes).map(|r| coeffs.data[node + r * grid.n_nodes()] * phi_at[r]).sum())
        .collect();
    recover_from_scalar(&v, &grid, k, order)
}

/// The elimination formula applied to a scalar field `v(x)` at wavenumber `k`.
pub fn recover_from_scalar(v: &[Complex64], grid: &Grid2D, k: f64, order: StencilOrder) -> Recovery {
    let side = grid.n_side();
    let h = grid.h();
    let mut dx1 = vec![ZERO; grid.n_nodes()];
    let mut dx1x1 = vec![ZERO; grid.n_nodes()];
    let mut dx2 = vec![ZERO; grid.n_nodes()];
    let mut dx2x2 = vec![ZERO; grid.n_nodes()];
    for i in 0..side {
        let line: Vec<Complex64> = (0..side).map(|j| v[grid.node(i, j)]).collect();
        let (d1, d2) = line_derivatives(&line, h, order);
        for j in 0..side {
            dx1[grid.node(i, j)] = d1[j];
            dx1x1[grid.node(i, j)] = d2[j];
        }
    }
    for j in 0..side {
        let line: Vec<Complex64> = (0..side).map(|i| v[grid.node(i, j)]).collect();
        let (d1, d2) = line_derivatives(&line, h, order);
        for i in 0..side {
            dx2[grid.node(i, j)] = d1[i];
            dx2x2[grid.node(i, j)] = d2[i];
        }
    }
    let mut max_imaginary: f64 = 0.0;
    let values = (0..grid.n_nodes())
        .map(|n| {
            let residual = dx1x1[n] + dx2x2[n] + k * k * (dx1[n] * dx1[n] + dx2[n] * dx2[n])
                - Complex64::new(0.0, 2.0 * k) * dx2[n];
            max_imaginary = max_imaginary.max(residual.im.abs());
            -residual.re
        })
        .collect();
    Recovery { coefficient: Coefficient::from_values(*grid, values), max_imaginary }
}

/// `Σ vₙ Φₙ(k)` per node for every midpoint, `[r][node]`.
pub fn coeffs_to_log(coeffs: &CoeffVectorField, bs: &BasisSet) -> Vec<Vec<Complex64>> {
    let grid = coeffs.grid();
    (0..bs.kgrid.n_sub)
        .map(|r| {
            (0..grid.n_nodes())
                .map(|node| (0..bs.n_modes).map(|n| coeffs.data[node + n * grid.n_nodes()] * bs.phi_mid[(n, r)]).sum())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;

    fn setup() -> (Grid2D, KGrid, BasisSet) {
        let grid = Grid2D::new(0.8, 12).unwrap();
        let kg = KGrid::new(0.5, 2.0, 50).unwrap();
        let bs = build_basis(&kg, 4).unwrap();
        (grid, kg, bs)
    }

    fn incident_fields(grid: &Grid2D, kg: &KGrid, wave: &IncidentWave) -> Vec<Vec<Complex64>> {
        kg.midpoints
            .iter()
            .map(|&k| {
                (0..grid.n_nodes())
                    .map(|n| {
                        let (x1, x2) = grid.point(n);
                        wave.value(x1, x2, k)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn incident_field_maps_to_zero() {
        let (grid, kg, bs) = setup();
        let wave = IncidentWave::downward();
        let lf = total_to_log(&incident_fields(&grid, &kg, &wave), &wave, &grid, &kg).unwrap();
        assert!(lf.v.iter().flatten().all(|z| *z == ZERO));
        assert_eq!(lf.branch_jumps, 0);
        let coeffs = log_to_coeffs(&lf, &bs, &grid);
        assert_eq!(coeffs.norm(), 0.0);
    }

    #[test]
    fn manufactured_log_field_roundtrips() {
        let (grid, kg, _) = setup();
        let bs = build_basis(&kg, 4).unwrap();
        let wave = IncidentWave::downward();
        let v0 = |x1: f64, x2: f64, k: f64| Complex64::new(0.01 * (x1 * x1 + x2) * bs.value(0, k), 0.0);
        let u: Vec<Vec<Complex64>> = kg
            .midpoints
            .iter()
            .map(|&k| {
                (0..grid.n_nodes())
                    .map(|n| {
                        let (x1, x2) = grid.point(n);
                        wave.value(x1, x2, k) * (k * k * v0(x1, x2, k)).exp()
                    })
                    .collect()
            })
            .collect();
        let lf = total_to_log(&u, &wave, &grid, &kg).unwrap();
        for (r, &k) in kg.midpoints.iter().enumerate() {
            for n in 0..grid.n_nodes() {
                let (x1, x2) = grid.point(n);
                assert!((lf.v[r][n] - v0(x1, x2, k)).norm() < 1e-10);
                // exp(k² v) u_in reproduces u
                let back = (k * k * lf.v[r][n]).exp() * wave.value(x1, x2, k);
                assert!((back - u[r][n]).norm() < 1e-9 * u[r][n].norm());
            }
        }
    }

    #[test]
    fn near_zero_field_is_rejected() {
        let (grid, kg, _) = setup();
        let wave = IncidentWave::downward();
        let mut u = incident_fields(&grid, &kg, &wave);
        u[3][17] = Complex64::new(1e-10, 0.0);
        match total_to_log(&u, &wave, &grid, &kg) {
            Err(Error::NearZeroTotalField { node, k_index, .. }) => assert_eq!((node, k_index), (17, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_mode_log_field_projects_to_that_mode() {
        let (grid, _kg, bs) = setup();
        let c = |node: usize| {
            let (x1, x2) = grid.point(node);
            Complex64::new(x1 + 0.3, x2 * x2)
        };
        let v: Vec<Vec<Complex64>> =
            (0..50).map(|r| (0..grid.n_nodes()).map(|n| c(n) * bs.phi_mid[(1, r)]).collect()).collect();
        let coeffs = log_to_coeffs(&LogField { v, branch_jumps: 0 }, &bs, &grid);
        for n in 0..grid.n_nodes() {
            let vec = coeffs.node_vector(n);
            // within the midpoint-rule projection error of Φ₂ (< 3e-3 relative)
            assert!((vec[1] - c(n)).norm() < 3e-3 * c(n).norm().max(1.0));
            for r in [0, 2, 3] {
                assert!(vec[r].norm() < 3e-3 * c(n).norm().max(1.0));
            }
        }
    }

    #[test]
    fn zero_coefficients_recover_zero() {
        let (grid, _, bs) = setup();
        let rec = recover_coefficient(&CoeffVectorField::zeros(grid, 4), &bs, StencilOrder::Second);
        assert!(rec.coefficient.values.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn quadratic_field_recovers_hand_formula() {
        // v = α|x|² independent of k: a = -(4α + 4k²α²|x|²) exactly for the
        // centered stencils (quadratics are differentiated exactly).
        let alpha = 0.05;
        let grid = Grid2D::new(0.8, 16).unwrap();
        let k = 0.5;
        let v: Vec<Complex64> = (0..grid.n_nodes())
            .map(|n| {
                let (x1, x2) = grid.point(n);
                Complex64::new(alpha * (x1 * x1 + x2 * x2), 0.0)
            })
            .collect();
        let rec = recover_from_scalar(&v, &grid, k, StencilOrder::Second);
        for n in 0..grid.n_nodes() {
            let (x1, x2) = grid.point(n);
            let expected = -(4.0 * alpha + 4.0 * k * k * alpha * alpha * (x1 * x1 + x2 * x2));
            assert!((rec.coefficient.values[n] - expected).abs() < 1e-10, "node {n}");
        }
    }

    #[test]
    fn recovery_converges_at_second_order() {
        // v = sin(x₁) e^{x₂}/10 (complex), compare against the closed form.
        let k = 0.5;
        let exact = |x1: f64, x2: f64| {
            let v = Complex64::new(0.1 * x1.sin() * x2.exp(), 0.05 * x1 * x2);
            let vx = Complex64::new(0.1 * x1.cos() * x2.exp(), 0.05 * x2);
            let vy = Complex64::new(0.1 * x1.sin() * x2.exp(), 0.05 * x1);
            let lap = Complex64::new(0.0, 0.0); // sin·exp and x₁x₂ are harmonic
            let res = lap + k * k * (vx * vx + vy * vy) - Complex64::new(0.0, 2.0 * k) * vy;
            (v, -res.re)
        };
        let err = |n_cells: usize| {
            let grid = Grid2D::new(0.8, n_cells).unwrap();
            let v: Vec<Complex64> = (0..grid.n_nodes())
                .map(|n| {
                    let (x1, x2) = grid.point(n);
                    exact(x1, x2).0
                })
                .collect();
            let rec = recover_from_scalar(&v, &grid, k, StencilOrder::Second);
            (0..grid.n_nodes())
                .map(|n| {
                    let (x1, x2) = grid.point(n);
                    (rec.coefficient.values[n] - exact(x1, x2).1).abs()
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (err(16), err(32));
        assert!(coarse / fine > 3.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn free_space_boundary_data_vanishes() {
        let (grid, kg, bs) = setup();
        let wave = IncidentWave::downward();
        let top = grid.top_row();
        let g0: Vec<Vec<Complex64>> = kg
            .midpoints
            .iter()
            .map(|&k| (0..grid.n_side()).map(|j| wave.value(grid.x1(j), grid.x2(top), k)).collect())
            .collect();
        let g1: Vec<Vec<Complex64>> = kg
            .midpoints
            .iter()
            .map(|&k| (0..grid.n_side()).map(|j| wave.dx2(grid.x1(j), grid.x2(top), k)).collect())
            .collect();
        let cd = CauchyData { half_width: 0.8, n_cells: 12, k_min: 0.5, k_max: 2.0, n_k: 50, g0, g1, delta: 0.0, seed: 0 };
        let bd = cauchy_to_v_data(&cd, &wave, &bs).unwrap();
        assert!(bd.g0.iter().chain(&bd.g1).flatten().all(|z| z.norm() < 1e-15));
        assert!(bd.coeffs0.iter().chain(&bd.coeffs1).flatten().all(|z| z.norm() < 1e-15));
    }
}
