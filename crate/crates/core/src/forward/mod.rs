//! Direct scattering: coefficient rasterization, the Lippmann–Schwinger
//! solver, Cauchy traces on Γ, measurement noise and the analytic
//! penetrable-cylinder reference solution.

mod cylinder;
mod lippmann;
mod noise;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

pub use cylinder::{analytic_disk_field, disk_mode_coefficients, DiskModes, MAX_SERIES_TERMS};
pub use lippmann::{
    assemble_system, kernel_entry, simulate_cauchy_data, solve_forward, solve_forward_all, solve_forward_detailed,
    trace_cauchy, ForwardStats,
};
pub use noise::{add_noise, trapezoid_norm};

/// Plane wave `e^{ik(d₁x₁ + d₂x₂)}` travelling downward (`d₂ < 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    d1: f64,
    d2: f64,
}

impl IncidentWave {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if ((d1 * d1 + d2 * d2) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("direction ({d1}, {d2}) is not a unit vector")));
        }
        if !(d2 < 0.0) {
            return Err(Error::InvalidParameter(format!("direction ({d1}, {d2}) must point downward")));
        }
        Ok(Self { d1, d2 })
    }

    /// `u_in = e^{-ikx₂}`.
    pub fn downward() -> Self {
        Self { d1: 0.0, d2: -1.0 }
    }

    pub fn direction(&self) -> (f64, f64) {
        (self.d1, self.d2)
    }

    pub fn value(&self, x1: f64, x2: f64, k: f64) -> Complex64 {
        Complex64::from_polar(1.0, k * (self.d1 * x1 + self.d2 * x2))
    }

    /// `∂u_in/∂x₂ = ik d₂ u_in`.
    pub fn dx2(&self, x1: f64, x2: f64, k: f64) -> Complex64 {
        Complex64::new(0.0, k * self.d2) * self.value(x1, x2, k)
    }
}

/// Primitive inclusion shapes carrying a constant coefficient value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64, value: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2], value: f64 },
}

impl Shape {
    pub fn value(&self) -> f64 {
        match *self {
            Shape::Disk { value, .. } | Shape::Rectangle { value, .. } => value,
        }
    }

    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        match *self {
            Shape::Disk { center, radius, .. } => {
                let (dx, dy) = (x1 - center[0], x2 - center[1]);
                dx * dx + dy * dy <= radius * radius * (1.0 + 1e-12)
            }
            Shape::Rectangle { min, max, .. } => x1 >= min[0] && x1 <= max[0] && x2 >= min[1] && x2 <= max[1],
        }
    }

    /// Axis-aligned bounding box `[x1_min, x2_min, x1_max, x2_max]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        match *self {
            Shape::Disk { center, radius, .. } => {
                [center[0] - radius, center[1] - radius, center[0] + radius, center[1] + radius]
            }
            Shape::Rectangle { min, max, .. } => [min[0], min[1], max[0], max[1]],
        }
    }
}

/// Sub-samples per cell side used when shapes are averaged for data generation.
pub const RASTER_SAMPLES: usize = 8;

/// Real coefficient `a(x)` sampled on the grid nodes; `ε_r = 1 + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub shapes: Vec<Shape>,
}

impl Coefficient {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { values: vec![0.0; grid.n_nodes()], grid, shapes: Vec::new() }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_nodes());
        Self { grid, values, shapes: Vec::new() }
    }

    /// Rasterizes shapes by node-center membership. Later shapes overwrite
    /// earlier ones where they overlap.
    ///
    /// Rejects negative values, shapes reaching `∂Ω`, and any rasterization
    /// that puts a nonzero value on a boundary node (reported by node).
    pub fn from_shapes(grid: Grid2D, shapes: Vec<Shape>) -> Result<Self> {
        Self::from_shapes_averaged(grid, shapes, 1)
    }

    /// Like [`Coefficient::from_shapes`], but each node takes the mean over
    /// `samples²` points spread evenly over its cell, so cells cut by an
    /// interface carry the area-weighted value.
    pub fn from_shapes_averaged(grid: Grid2D, shapes: Vec<Shape>, samples: usize) -> Result<Self> {
        let r = grid.half_width;
        for (idx, shape) in shapes.iter().enumerate() {
            if !(shape.value() >= 0.0) || !shape.value().is_finite() {
                return Err(Error::InvalidGeometry(format!("shape {idx} has invalid value {}", shape.value())));
            }
            let [a, b, c, d] = shape.bounding_box();
            if !(a > -r && b > -r && c < r && d < r) {
                return Err(Error::InvalidGeometry(format!(
                    "shape {idx} with bounding box [{a}, {b}] x [{c}, {d}] is not strictly inside (-{r}, {r})^2"
                )));
            }
            if let Shape::Disk { radius, .. } = shape {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidGeometry(format!("shape {idx} has non-positive radius")));
                }
            }
        }
        let samples = samples.max(1);
        let h = grid.h();
        let offsets: Vec<f64> = (0..samples).map(|q| ((q as f64 + 0.5) / samples as f64 - 0.5) * h).collect();
        let offsets = if samples == 1 { vec![0.0] } else { offsets };
        let value_at = |x1: f64, x2: f64| shapes.iter().rev().find(|s| s.contains(x1, x2)).map_or(0.0, Shape::value);
        let mut values = vec![0.0; grid.n_nodes()];
        for (node, v) in values.iter_mut().enumerate() {
            let (x1, x2) = grid.point(node);
            let sum: f64 = offsets.iter().flat_map(|&o1| offsets.iter().map(move |&o2| (o1, o2))).map(|(o1, o2)| value_at(x1 + o1, x2 + o2)).sum();
            *v = sum / (offsets.len() * offsets.len()) as f64;
        }
        for j in 0..grid.n_side() {
            for i in 0..grid.n_side() {
                if grid.is_boundary(i, j) && values[grid.node(i, j)] != 0.0 {
                    return Err(Error::InvalidGeometry(format!(
                        "boundary node (i={i}, j={j}) at ({}, {}) carries a = {}",
                        grid.x1(j),
                        grid.x2(i),
                        values[grid.node(i, j)]
                    )));
                }
            }
        }
        Ok(Self { grid, values, shapes })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node(i, j)]
    }

    /// Nodes with a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(n, _)| n).collect()
    }

    /// Largest value and the node where it occurs (first occurrence on ties).
    pub fn max_with_location(&self) -> (f64, usize) {
        self.values
            .iter()
            .enumerate()
            .fold((f64::NEG_INFINITY, 0), |(best, at), (n, &v)| if v > best { (v, n) } else { (best, at) })
    }

    /// Sets negative values to zero.
    pub fn clamp_negative(&mut self) {
        self.values.iter_mut().for_each(|v| *v = v.max(0.0));
    }
}

/// Dirichlet and Neumann traces of the total field on Γ for every
/// measurement wavenumber.
///
/// `g0[r][j]` is the trace at column `j` for midpoint `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub half_width: f64,
    pub n_cells: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
    pub g0: Vec<Vec<Complex64>>,
    pub g1: Vec<Vec<Complex64>>,
    pub delta: f64,
    pub seed: u64,
}

impl CauchyData {
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.half_width, self.n_cells)
    }

    pub fn is_finite(&self) -> bool {
        self.g0.iter().chain(&self.g1).flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}
