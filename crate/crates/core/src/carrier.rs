//! Data carrier `F`: a field that matches the Cauchy data on Γ and vanishes
//! in the lower part of the domain.

use num_complex::Complex64;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::fieldtransform::{BoundaryData, CoeffVectorField};
use crate::grid::Grid2D;

/// Smooth cutoff `χ` sampled on the grid rows.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    pub half_width: f64,
    pub xi: f64,
    /// `χ(x₂)` per row `i`.
    pub values: Vec<f64>,
}

fn chi0(t: f64, r: f64, xi: f64) -> f64 {
    if t > -xi {
        (-r / (t + xi)).exp()
    } else {
        0.0
    }
}

/// `χ(t) = χ₀(t) / (χ₀(t) + χ₀(R - t - 2ξ))`, zero below `-ξ`, one above `R - ξ`.
pub fn cutoff(t: f64, r: f64, xi: f64) -> f64 {
    let a = chi0(t, r, xi);
    let b = chi0(r - t - 2.0 * xi, r, xi);
    if a == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

pub fn build_cutoff(half_width: f64, xi: f64, grid: &Grid2D) -> Result<CutoffProfile> {
    if !(xi > 0.0 && xi < half_width) {
        return Err(Error::InvalidParameter(format!("cutoff needs 0 < xi < R, got xi={xi}, R={half_width}")));
    }
    let values = (0..grid.n_side()).map(|i| cutoff(grid.x2(i), half_width, xi)).collect();
    Ok(CutoffProfile { half_width, xi, values })
}

/// `Fₙ(x) = [G₀ₙ(x₁) + (x₂ - R) G₁ₙ(x₁)] χ(x₂)`.
///
/// Projecting `f = [g̃₀ + (x₂ - R) g̃₁] χ` onto the basis node by node gives
/// the same thing because the projection is linear and `χ`, `x₂ - R` do
/// not depend on `k`.
pub fn build_carrier(bd: &BoundaryData, cutoff: &CutoffProfile, grid: &Grid2D, bs: &BasisSet) -> CoeffVectorField {
    let side = grid.n_side();
    assert_eq!(cutoff.values.len(), side);
    assert_eq!(bd.coeffs0.len(), bs.n_modes);
    let r_top = grid.x2(grid.top_row());
    CoeffVectorField::from_fn(*grid, bs.n_modes, |i, j, r| {
        let chi = cutoff.values[i];
        if chi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        (bd.coeffs0[r][j] + (grid.x2(i) - r_top) * bd.coeffs1[r][j]) * chi
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::grid::KGrid;
    use proptest::prelude::*;

    const R: f64 = 0.8;
    const XI: f64 = 0.08;

    #[test]
    fn branch_values() {
        assert_eq!(cutoff(-R, R, XI), 0.0);
        assert_eq!(cutoff(-XI, R, XI), 0.0);
        assert_eq!(cutoff(R - XI, R, XI), 1.0);
        assert_eq!(cutoff(R, R, XI), 1.0);
        // both χ₀ arguments are equal where t + ξ = R - t - ξ
        let t_star = R / 2.0 - XI;
        assert!((cutoff(t_star, R, XI) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn sampled_profile_is_monotone_and_smooth() {
        let grid = Grid2D::new(R, 28).unwrap();
        let prof = build_cutoff(R, XI, &grid).unwrap();
        assert!(prof.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(prof.values.iter().all(|&c| (0.0..=1.0).contains(&c)));
        for w in prof.values.windows(3) {
            assert!((w[0] - 2.0 * w[1] + w[2]).abs() < 0.5);
        }
        assert!(build_cutoff(R, 0.0, &grid).is_err());
        assert!(build_cutoff(R, R, &grid).is_err());
    }

    proptest! {
        #[test]
        fn cutoff_in_unit_interval_and_nondecreasing(t in -0.8f64..0.8, dt in 0.0f64..0.1) {
            let a = cutoff(t, R, XI);
            let b = cutoff((t + dt).min(R), R, XI);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b + 1e-15);
        }

        #[test]
        fn carrier_is_linear(s in -3.0f64..3.0, seed in 0u64..1000) {
            let grid = Grid2D::new(R, 6).unwrap();
            let kg = KGrid::new(0.5, 2.0, 10).unwrap();
            let bs = build_basis(&kg, 2).unwrap();
            let prof = build_cutoff(R, XI, &grid).unwrap();
            let make = |off: f64| {
                let c = |n: usize, j: usize| Complex64::new(((seed as f64 + off) * 0.37 + n as f64 + 0.3 * j as f64).sin(), (off + j as f64).cos());
                BoundaryData {
                    g0: vec![],
                    g1: vec![],
                    coeffs0: (0..2).map(|n| (0..7).map(|j| c(n, j)).collect()).collect(),
                    coeffs1: (0..2).map(|n| (0..7).map(|j| c(n + 5, j)).collect()).collect(),
                }
            };
            let (a, b) = (make(0.0), make(1.0));
            let combo = BoundaryData {
                g0: vec![],
                g1: vec![],
                coeffs0: a.coeffs0.iter().zip(&b.coeffs0).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + s * q).collect()).collect(),
                coeffs1: a.coeffs1.iter().zip(&b.coeffs1).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + s * q).collect()).collect(),
            };
            let fa = build_carrier(&a, &prof, &grid, &bs);
            let fb = build_carrier(&b, &prof, &grid, &bs);
            let fc = build_carrier(&combo, &prof, &grid, &bs);
            let diff = &fc - &fa.axpy(s, &fb);
            prop_assert!(diff.norm() < 1e-12 * (1.0 + fc.norm()));
        }
    }

    #[test]
    fn zero_data_zero_carrier_and_boundary_values() {
        let grid = Grid2D::new(R, 28).unwrap();
        let kg = KGrid::new(0.5, 2.0, 50).unwrap();
        let bs = build_basis(&kg, 4).unwrap();
        let prof = build_cutoff(R, XI, &grid).unwrap();
        let zero = BoundaryData {
            g0: vec![],
            g1: vec![],
            coeffs0: vec![vec![Complex64::new(0.0, 0.0); 29]; 4],
            coeffs1: vec![vec![Complex64::new(0.0, 0.0); 29]; 4],
        };
        assert_eq!(build_carrier(&zero, &prof, &grid, &bs).norm(), 0.0);

        let c0 = |n: usize, j: usize| Complex64::new(0.1 * n as f64 + 0.01 * j as f64, -0.02 * j as f64);
        let c1 = |n: usize, j: usize| Complex64::new(-0.3 + 0.05 * n as f64, 0.01 * (j as f64).sqrt());
        let bd = BoundaryData {
            g0: vec![],
            g1: vec![],
            coeffs0: (0..4).map(|n| (0..29).map(|j| c0(n, j)).collect()).collect(),
            coeffs1: (0..4).map(|n| (0..29).map(|j| c1(n, j)).collect()).collect(),
        };
        let f = build_carrier(&bd, &prof, &grid, &bs);
        let top = grid.top_row();
        let h = grid.h();
        for r in 0..4 {
            for j in 0..29 {
                assert_eq!(f.get(top, j, r), c0(r, j));
                let neumann = (f.get(top, j, r) - f.get(top - 1, j, r)) / h;
                assert!((neumann - c1(r, j)).norm() < 1e-12);
            }
            for i in (0..grid.n_side()).filter(|&i| grid.x2(i) <= -XI) {
                for j in 0..29 {
                    assert_eq!(f.get(i, j, r), Complex64::new(0.0, 0.0));
                }
            }
        }
    }
}
