use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CauchyData;

/// Trapezoid weight of index `idx` in a row of `len` equally spaced samples.
fn trapezoid(idx: usize, len: usize, step: f64) -> f64 {
    if len > 1 && (idx == 0 || idx + 1 == len) {
        0.5 * step
    } else {
        step
    }
}

/// Discrete `L²(Γ × [k_min, k_max])` norm of `g[r][j]` with trapezoid
/// weights in both directions.
pub fn trapezoid_norm(g: &[Vec<Complex64>], h_x: f64, h_k: f64) -> f64 {
    let n_k = g.len();
    g.iter()
        .enumerate()
        .map(|(r, row)| {
            let wk = trapezoid(r, n_k, h_k);
            row.iter().enumerate().map(|(j, z)| wk * trapezoid(j, row.len(), h_x) * z.norm_sqr()).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `g_j ← g_j + δ ‖g_j‖ 𝒩_j` with `𝒩_j` uniform complex noise (real and
/// imaginary parts in `[-1, 1]`) rescaled to unit discrete norm.
///
/// The realization depends only on `seed`; `δ = 0` returns the input.
pub fn add_noise(cd: &CauchyData, delta: f64, seed: u64) -> CauchyData {
    assert!(delta >= 0.0, "noise level must be non-negative");
    let mut out = cd.clone();
    out.delta = delta;
    out.seed = seed;
    if delta == 0.0 {
        return out;
    }
    let h_x = 2.0 * cd.half_width / cd.n_cells as f64;
    let h_k = (cd.k_max - cd.k_min) / cd.n_k as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in [&mut out.g0, &mut out.g1] {
        let norm = trapezoid_norm(g, h_x, h_k);
        let raw: Vec<Vec<Complex64>> = g
            .iter()
            .map(|row| {
                row.iter()
                    .map(|_| Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
                    .collect()
            })
            .collect();
        let raw_norm = trapezoid_norm(&raw, h_x, h_k);
        let scale = delta * norm / raw_norm;
        for (row, noise) in g.iter_mut().zip(&raw) {
            for (z, n) in row.iter_mut().zip(noise) {
                *z += scale * n;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_data() -> CauchyData {
        let n_k = 7;
        let side = 9;
        let make = |phase: f64| {
            (0..n_k)
                .map(|r| (0..side).map(|j| Complex64::from_polar(1.0 + 0.1 * j as f64, phase + 0.3 * r as f64)).collect())
                .collect()
        };
        CauchyData {
            half_width: 0.8,
            n_cells: side - 1,
            k_min: 0.5,
            k_max: 2.0,
            n_k,
            g0: make(0.0),
            g1: make(1.0),
            delta: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let cd = sample_data();
        let out = add_noise(&cd, 0.0, 11);
        assert_eq!(out.g0, cd.g0);
        assert_eq!(out.g1, cd.g1);
    }

    #[test]
    fn relative_noise_level_is_exact() {
        let cd = sample_data();
        let out = add_noise(&cd, 0.05, 3);
        let (hx, hk) = (0.2, 1.5 / 7.0);
        for (clean, noisy) in [(&cd.g0, &out.g0), (&cd.g1, &out.g1)] {
            let diff: Vec<Vec<Complex64>> = clean
                .iter()
                .zip(noisy)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| y - x).collect())
                .collect();
            let ratio = trapezoid_norm(&diff, hx, hk) / trapezoid_norm(clean, hx, hk);
            assert!((ratio - 0.05).abs() < 1e-12, "{ratio}");
        }
    }

    #[test]
    fn same_seed_same_noise() {
        let cd = sample_data();
        assert_eq!(add_noise(&cd, 0.05, 9), add_noise(&cd, 0.05, 9));
        assert_ne!(add_noise(&cd, 0.05, 9).g0, add_noise(&cd, 0.05, 10).g0);
    }
}
