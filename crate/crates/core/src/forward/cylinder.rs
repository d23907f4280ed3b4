//! Analytic transmission series for a penetrable circular cylinder.
//!
//! In polar coordinates about the disk center, with `α = θ - θ_d` and the
//! interior wavenumber `k₁ = k √(1 + a)`:
//!
//! ```text
//! outside: u = u_in + Σₙ iⁿ cₙ Hₙ⁽¹⁾(kr) e^{inα}
//! inside:  u = e^{ik d·c} Σₙ iⁿ bₙ Jₙ(k₁r) e^{inα}
//! ```
//!
//! `cₙ, bₙ` follow from continuity of `u` and `∂u/∂r` at the interface.
//! Negative orders mirror positive ones, so only `n ≥ 0` is computed.

use num_complex::Complex64;

use super::IncidentWave;
use crate::error::{Error, Result};
use crate::special::{hankel1_n, hankel1_n_prime, jn, jn_prime};

pub const MAX_SERIES_TERMS: usize = 40;
const SERIES_TOLERANCE: f64 = 1e-12;

/// Mode coefficients of the transmission problem, `n = 0..len`.
#[derive(Debug, Clone)]
pub struct DiskModes {
    pub scattered: Vec<Complex64>,
    pub interior: Vec<Complex64>,
    pub k: f64,
    pub k_inside: f64,
    pub radius: f64,
}

impl DiskModes {
    /// Residuals of the two interface conditions for mode `n`.
    pub fn interface_residual(&self, n: usize) -> (f64, f64) {
        let (k, k1, rho) = (self.k, self.k_inside, self.radius);
        let nu = n as u32;
        let (c, b) = (self.scattered[n], self.interior[n]);
        let value = jn(nu, k * rho) + c * hankel1_n(nu, k * rho) - b * jn(nu, k1 * rho);
        let flux = k * jn_prime(nu, k * rho) + c * k * hankel1_n_prime(nu, k * rho) - b * k1 * jn_prime(nu, k1 * rho);
        (value.norm(), flux.norm())
    }
}

/// Solves the per-mode interface conditions until the scattered and
/// interior contributions at the interface drop below `1e-12` relative.
pub fn disk_mode_coefficients(radius: f64, value: f64, k: f64) -> Result<DiskModes> {
    if !(k > 0.0) || !(radius > 0.0) || !(value > -1.0) {
        return Err(Error::InvalidParameter(format!("invalid disk problem: k={k}, radius={radius}, a={value}")));
    }
    let k1 = k * (1.0 + value).sqrt();
    let (x, x1) = (k * radius, k1 * radius);
    let mut scattered = Vec::new();
    let mut interior = Vec::new();
    let mut scale: f64 = 0.0;
    for n in 0..=MAX_SERIES_TERMS {
        let nu = n as u32;
        let (j, jp) = (jn(nu, x), jn_prime(nu, x));
        let (h, hp) = (hankel1_n(nu, x), hankel1_n_prime(nu, x));
        let (ji, jip) = (jn(nu, x1), jn_prime(nu, x1));
        // [ -H    J_in    ] [c]   [ J    ]
        // [ -kH'  k₁J_in' ] [b] = [ k J' ]
        let det = -h * k1 * jip + k * hp * ji;
        let c = (j * k1 * jip - k * jp * ji) / det;
        let b = (-h * k * jp + k * hp * j) / det;
        let size = (c * h).norm().max((b * ji).norm());
        scale = scale.max(size);
        scattered.push(c);
        interior.push(b);
        if n > 0 && size < SERIES_TOLERANCE * scale.max(1.0) {
            return Ok(DiskModes { scattered, interior, k, k_inside: k1, radius });
        }
    }
    Err(Error::SeriesNotConverged { terms: MAX_SERIES_TERMS })
}

/// Total field of a plane wave scattered by a homogeneous disk, evaluated
/// at `points`.
pub fn analytic_disk_field(
    center: [f64; 2],
    radius: f64,
    value: f64,
    wave: &IncidentWave,
    k: f64,
    points: &[(f64, f64)],
) -> Result<Vec<Complex64>> {
    let modes = disk_mode_coefficients(radius, value, k)?;
    let (d1, d2) = wave.direction();
    let theta_d = d2.atan2(d1);
    let phase_center = wave.value(center[0], center[1], k);
    let i_pow = |n: usize| Complex64::new(0.0, 1.0).powu(n as u32);
    Ok(points
        .iter()
        .map(|&(x1, x2)| {
            let (dx, dy) = (x1 - center[0], x2 - center[1]);
            let r = dx.hypot(dy);
            let alpha = dy.atan2(dx) - theta_d;
            let angular = |n: usize| if n == 0 { 1.0 } else { 2.0 * (n as f64 * alpha).cos() };
            if r < radius {
                let sum: Complex64 = (0..modes.interior.len())
                    .map(|n| i_pow(n) * modes.interior[n] * jn(n as u32, modes.k_inside * r) * angular(n))
                    .sum();
                phase_center * sum
            } else {
                let sum: Complex64 = (0..modes.scattered.len())
                    .map(|n| i_pow(n) * modes.scattered[n] * hankel1_n(n as u32, k * r) * angular(n))
                    .sum();
                wave.value(x1, x2, k) + phase_center * sum
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_contrast_is_the_incident_wave() {
        let wave = IncidentWave::downward();
        let pts: Vec<(f64, f64)> = (0..40).map(|i| (-0.7 + 0.035 * i as f64, 0.45 + 0.3 * ((i as f64) * 0.7).sin())).collect();
        let u = analytic_disk_field([0.0, 0.45], 0.2, 0.0, &wave, 2.0, &pts).unwrap();
        for (&(x1, x2), z) in pts.iter().zip(&u) {
            assert!((z - wave.value(x1, x2, 2.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn modes_satisfy_interface_conditions() {
        for &(a, k) in &[(3.0, 1.0), (3.0, 2.0), (1.5, 0.5), (2.0, 6.0)] {
            let modes = disk_mode_coefficients(0.2, a, k).unwrap();
            for n in 0..modes.scattered.len() {
                let (v, f) = modes.interface_residual(n);
                assert!(v < 1e-12 && f < 1e-12, "a={a} k={k} n={n}: {v} {f}");
            }
        }
    }

    #[test]
    fn field_is_continuous_across_interface() {
        let wave = IncidentWave::new(0.6, -0.8).unwrap();
        let c = [0.1, 0.3];
        let eps = 1e-9;
        for t in 0..12 {
            let th = t as f64 * 0.52;
            let inside = (c[0] + (0.2 - eps) * th.cos(), c[1] + (0.2 - eps) * th.sin());
            let outside = (c[0] + (0.2 + eps) * th.cos(), c[1] + (0.2 + eps) * th.sin());
            let u = analytic_disk_field(c, 0.2, 3.0, &wave, 2.0, &[inside, outside]).unwrap();
            assert!((u[0] - u[1]).norm() < 1e-7);
        }
    }

    #[test]
    fn huge_size_parameter_does_not_converge() {
        assert!(matches!(disk_mode_coefficients(5.0, 3.0, 20.0), Err(Error::SeriesNotConverged { .. })));
    }
}
