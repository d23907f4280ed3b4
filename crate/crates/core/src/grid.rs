//! Spatial and wavenumber grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform `(n_cells + 1)²` node grid over the square `(-R, R)²`.
///
/// Node `(i, j)` sits at `(x₁, x₂) = (x_j, y_i)`: `i` walks the vertical
/// coordinate, `j` the horizontal one. All indices are zero-based, so the
/// measurement boundary Γ (`x₂ = R`) is row `i = n_cells`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub half_width: f64,
    pub n_cells: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, n_cells: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!("half width must be positive, got {half_width}")));
        }
        if n_cells < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 cells per side, got {n_cells}")));
        }
        Ok(Self { half_width, n_cells })
    }

    /// Mesh size `2R / N_x`.
    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n_cells as f64
    }

    /// Number of nodes along one side, `N_x + 1`.
    pub fn n_side(&self) -> usize {
        self.n_cells + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.n_side() * self.n_side()
    }

    /// Horizontal coordinate of column `j`.
    pub fn x1(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.h()
    }

    /// Vertical coordinate of row `i`.
    pub fn x2(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    /// Flat node index; `i` varies fastest, matching the lined-up ordering.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i + j * self.n_side()
    }

    #[inline]
    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        (node % self.n_side(), node / self.n_side())
    }

    pub fn point(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.node_coords(node);
        (self.x1(j), self.x2(i))
    }

    /// Row index of Γ.
    pub fn top_row(&self) -> usize {
        self.n_cells
    }

    /// Lined-up index of component `r` at node `(i, j)`:
    /// `i + j (N_x+1) + r (N_x+1)²`, zero-based.
    #[inline]
    pub fn lined_index(&self, i: usize, j: usize, r: usize) -> usize {
        self.node(i, j) + r * self.n_nodes()
    }

    pub fn from_lined_index(&self, m: usize) -> (usize, usize, usize) {
        let r = m / self.n_nodes();
        let (i, j) = self.node_coords(m % self.n_nodes());
        (i, j, r)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n_cells || j == self.n_cells
    }

    /// Grid with `factor` times as many cells over the same square.
    pub fn refined(&self, factor: usize) -> Self {
        Self { half_width: self.half_width, n_cells: self.n_cells * factor.max(1) }
    }

    /// Row closest to the height `x2`, plus whether it matches exactly.
    pub fn nearest_row(&self, x2: f64) -> (usize, bool) {
        let pos = (x2 + self.half_width) / self.h();
        let i = pos.round().clamp(0.0, self.n_cells as f64) as usize;
        let exact = (self.x2(i) - x2).abs() <= 1e-12 * self.half_width.max(1.0);
        (i, exact)
    }
}

/// Nodes of the 16-point Gauss–Legendre rule used per panel.
const GAUSS_POINTS: usize = 16;
/// Number of panels in the composite rule.
const GAUSS_PANELS: usize = 8;

/// Wavenumber interval `[k_min, k_max]` with `n_sub` uniform subintervals.
///
/// Measurements live on the subinterval midpoints. A separate composite
/// Gauss–Legendre rule handles the smooth basis integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    pub k_min: f64,
    pub k_max: f64,
    pub n_sub: usize,
    pub midpoints: Vec<f64>,
    pub h_k: f64,
    pub quad_nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
}

impl KGrid {
    pub fn new(k_min: f64, k_max: f64, n_sub: usize) -> Result<Self> {
        if !(k_min > 0.0 && k_min < k_max && k_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "wavenumber interval must satisfy 0 < k_min < k_max, got [{k_min}, {k_max}]"
            )));
        }
        if n_sub == 0 {
            return Err(Error::InvalidParameter("need at least one wavenumber".into()));
        }
        let h_k = (k_max - k_min) / n_sub as f64;
        let midpoints = (0..n_sub).map(|r| k_min + (r as f64 + 0.5) * h_k).collect();
        let (quad_nodes, quad_weights) = composite_gauss_legendre(k_min, k_max, GAUSS_PANELS, GAUSS_POINTS);
        Ok(Self { k_min, k_max, n_sub, midpoints, h_k, quad_nodes, quad_weights })
    }

    /// Center of the interval, `k₀ = (k_min + k_max) / 2`.
    pub fn k0(&self) -> f64 {
        0.5 * (self.k_min + self.k_max)
    }

    /// Integrates `f` over `[k_min, k_max]` with the high-order rule.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.quad_nodes.iter().zip(&self.quad_weights).map(|(&k, &w)| w * f(k)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn composite_gauss_legendre(a: f64, b: f64, panels: usize, points: usize) -> (Vec<f64>, Vec<f64>) {
    let (ref_nodes, ref_weights) = gauss_legendre(points);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * points);
    let mut weights = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let left = a + p as f64 * width;
        for (&t, &w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(left + 0.5 * width * (t + 1.0));
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lined_index_is_a_bijection() {
        let g = Grid2D::new(0.8, 6).unwrap();
        let n_modes = 3;
        let mut seen = vec![false; g.n_nodes() * n_modes];
        for r in 0..n_modes {
            for j in 0..g.n_side() {
                for i in 0..g.n_side() {
                    let m = g.lined_index(i, j, r);
                    assert!(!seen[m]);
                    seen[m] = true;
                    assert_eq!(g.from_lined_index(m), (i, j, r));
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn default_grid_geometry() {
        let g = Grid2D::new(0.8, 28).unwrap();
        assert_eq!(g.n_nodes(), 29 * 29);
        assert!((g.x2(g.top_row()) - 0.8).abs() < 1e-15);
        assert!((g.x1(0) + 0.8).abs() < 1e-15);
        let (row, exact) = g.nearest_row(0.45);
        assert_eq!(row, 22);
        assert!(!exact);
    }

    #[test]
    fn midpoints_are_cell_centers() {
        let kg = KGrid::new(0.5, 2.0, 50).unwrap();
        assert!((kg.h_k - 0.03).abs() < 1e-15);
        assert!((kg.midpoints[0] - 0.515).abs() < 1e-15);
        assert!((kg.midpoints[49] - 1.985).abs() < 1e-14);
        assert!((kg.k0() - 1.25).abs() < 1e-15);
        assert!(kg.quad_nodes.len() >= 64);
    }

    /// ∫_a^b t^n e^{2t} dt from the exponential's Taylor series, integrated
    /// term by term in closed form.
    fn exact_moment(n: u32, a: f64, b: f64) -> f64 {
        let mut sum = 0.0;
        let mut coef = 1.0; // 2^m / m!
        for m in 0..80u32 {
            if m > 0 {
                coef *= 2.0 / m as f64;
            }
            let p = (n + m + 1) as i32;
            sum += coef * (b.powi(p) - a.powi(p)) / p as f64;
        }
        sum
    }

    #[test]
    fn quadrature_integrates_polynomial_times_exponential() {
        let kg = KGrid::new(0.5, 2.0, 50).unwrap();
        let k0 = kg.k0();
        for n in 0..=30u32 {
            let exact = exact_moment(n, kg.k_min - k0, kg.k_max - k0);
            let approx = kg.integrate(|k| (k - k0).powi(n as i32) * (2.0 * (k - k0)).exp());
            assert!(
                (approx - exact).abs() <= 1e-12 * exact.abs().max(1e-300),
                "degree {n}: {approx} vs {exact}"
            );
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in 1..20 {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        }
    }
}
