//! Orthonormal exponential-polynomial basis on the wavenumber interval and
//! the coupling matrices of the truncated elliptic system.
//!
//! The raw functions are `ψₙ(k) = (k - k₀)^{n-1} e^{k - k₀}`. Modified
//! Gram–Schmidt (with one reorthogonalization sweep) in the `L²(k_min, k_max)`
//! inner product turns them into `Φₙ = Σⱼ cₙⱼ ψⱼ` with a lower-triangular
//! coefficient matrix `c`. Derivatives reuse the same coefficients on the
//! exact `ψⱼ'`, so `Φₙ' = Φₙ + (terms in Φ₁..Φₙ₋₁)` and the matrix
//! `dₘₙ = ∫ Φₘ Φₙ'` is unit upper triangular.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::KGrid;

/// Relative residual below which a Gram–Schmidt candidate counts as dependent.
const DEPENDENCE_THRESHOLD: f64 = 1e-12;

fn psi(n: usize, t: f64) -> f64 {
    t.powi(n as i32) * t.exp()
}

fn psi_prime(n: usize, t: f64) -> f64 {
    let lower = if n == 0 { 0.0 } else { n as f64 * t.powi(n as i32 - 1) };
    (lower + t.powi(n as i32)) * t.exp()
}

/// Basis functions, their derivatives and the system matrices.
///
/// Mode indices are zero-based throughout: mode `n` here is `Φ_{n+1}`.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub n_modes: usize,
    pub kgrid: KGrid,
    /// Gram–Schmidt coefficients, `coeffs[(n, j)]` multiplies `ψⱼ` in `Φₙ`.
    pub coeffs: Mat<f64>,
    /// `Φₙ` at the quadrature nodes, shape `n_modes × n_quad`.
    pub phi: Mat<f64>,
    /// `Φₙ'` at the quadrature nodes.
    pub dphi: Mat<f64>,
    /// `Φₙ` at the measurement midpoints, shape `n_modes × n_sub`.
    pub phi_mid: Mat<f64>,
    pub dphi_mid: Mat<f64>,
    pub mat_d: Mat<f64>,
    pub mat_s: Mat<Complex64>,
    tensor_b: Vec<f64>,
}

/// Builds `Φ₁..Φ_N` on `kg` and the associated matrices.
pub fn build_basis(kg: &KGrid, n_modes: usize) -> Result<BasisSet> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("the basis needs at least one mode".into()));
    }
    let k0 = kg.k0();
    let nq = kg.quad_nodes.len();
    let psi_samples = Mat::from_fn(n_modes, nq, |n, q| psi(n, kg.quad_nodes[q] - k0));
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(&kg.quad_weights).map(|((x, y), w)| x * y * w).sum()
    };

    let mut coeffs = Mat::<f64>::zeros(n_modes, n_modes);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(n_modes);
    for n in 0..n_modes {
        let mut c = vec![0.0; n_modes];
        c[n] = 1.0;
        let mut v: Vec<f64> = (0..nq).map(|q| psi_samples[(n, q)]).collect();
        let input_norm = inner(&v, &v).sqrt();
        for _sweep in 0..2 {
            for (prev, prev_samples) in samples.iter().enumerate() {
                let proj = inner(prev_samples, &v);
                for (vq, pq) in v.iter_mut().zip(prev_samples) {
                    *vq -= proj * pq;
                }
                for j in 0..=prev {
                    c[j] -= proj * coeffs[(prev, j)];
                }
            }
        }
        let norm = inner(&v, &v).sqrt();
        if !(norm > DEPENDENCE_THRESHOLD * input_norm) {
            return Err(Error::DependentBasis { index: n + 1, residual: norm / input_norm });
        }
        for (j, cj) in c.iter().enumerate() {
            coeffs[(n, j)] = cj / norm;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        samples.push(v);
    }

    let eval = |points: &[f64], deriv: bool| {
        Mat::from_fn(n_modes, points.len(), |n, q| {
            let t = points[q] - k0;
            (0..=n)
                .map(|j| coeffs[(n, j)] * if deriv { psi_prime(j, t) } else { psi(j, t) })
                .sum()
        })
    };
    let phi = eval(&kg.quad_nodes, false);
    let dphi = eval(&kg.quad_nodes, true);
    let phi_mid = eval(&kg.midpoints, false);
    let dphi_mid = eval(&kg.midpoints, true);

    let mut basis = BasisSet {
        n_modes,
        kgrid: kg.clone(),
        coeffs,
        phi,
        dphi,
        phi_mid,
        dphi_mid,
        mat_d: Mat::zeros(n_modes, n_modes),
        mat_s: Mat::zeros(n_modes, n_modes),
        tensor_b: vec![0.0; n_modes * n_modes * n_modes],
    };
    let (d, s, b) = matrices_dsb(&basis);
    basis.mat_d = d;
    basis.mat_s = s;
    basis.tensor_b = b;
    Ok(basis)
}

/// `D`, `S` and `B` by the high-order quadrature:
///
/// - `dₘₙ = ∫ Φₘ Φₙ'`
/// - `sₘₙ = -2i ∫ Φₘ (Φₙ + k Φₙ')`
/// - `bₘₙ⁽ˡ⁾ = ∫ 2k Φₘ Φₙ (Φₗ + k Φₗ')`
///
/// The tensor is returned flat, indexed by [`BasisSet::b_index`].
pub fn matrices_dsb(bs: &BasisSet) -> (Mat<f64>, Mat<Complex64>, Vec<f64>) {
    let n = bs.n_modes;
    let kg = &bs.kgrid;
    let nq = kg.quad_nodes.len();
    // Φₗ + k Φₗ'
    let combo = Mat::from_fn(n, nq, |l, q| bs.phi[(l, q)] + kg.quad_nodes[q] * bs.dphi[(l, q)]);
    let quad = |f: &dyn Fn(usize) -> f64| -> f64 { (0..nq).map(|q| kg.quad_weights[q] * f(q)).sum() };

    let d = Mat::from_fn(n, n, |m, c| quad(&|q| bs.phi[(m, q)] * bs.dphi[(c, q)]));
    let s = Mat::from_fn(n, n, |m, c| Complex64::new(0.0, -2.0 * quad(&|q| bs.phi[(m, q)] * combo[(c, q)])));
    let mut b = vec![0.0; n * n * n];
    for m in 0..n {
        for c in 0..n {
            for l in 0..n {
                b[(m * n + c) * n + l] =
                    quad(&|q| 2.0 * kg.quad_nodes[q] * bs.phi[(m, q)] * bs.phi[(c, q)] * combo[(l, q)]);
            }
        }
    }
    (d, s, b)
}

impl BasisSet {
    #[inline]
    pub fn b_index(&self, m: usize, n: usize, l: usize) -> usize {
        (m * self.n_modes + n) * self.n_modes + l
    }

    /// `bₘₙ⁽ˡ⁾`.
    #[inline]
    pub fn b(&self, m: usize, n: usize, l: usize) -> f64 {
        self.tensor_b[self.b_index(m, n, l)]
    }

    pub fn tensor_b(&self) -> &[f64] {
        &self.tensor_b
    }

    /// `Φₙ(k)` at an arbitrary wavenumber.
    pub fn value(&self, n: usize, k: f64) -> f64 {
        let t = k - self.kgrid.k0();
        (0..=n).map(|j| self.coeffs[(n, j)] * psi(j, t)).sum()
    }

    /// `Φₙ'(k)` at an arbitrary wavenumber.
    pub fn derivative(&self, n: usize, k: f64) -> f64 {
        let t = k - self.kgrid.k0();
        (0..=n).map(|j| self.coeffs[(n, j)] * psi_prime(j, t)).sum()
    }

    /// Fourier coefficients `∫ f Φₙ dk` by the midpoint rule, from samples of
    /// `f` on the measurement midpoints.
    pub fn project(&self, samples: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.kgrid.n_sub, "samples must live on the wavenumber midpoints");
        let h = self.kgrid.h_k;
        (0..self.n_modes)
            .map(|n| samples.iter().enumerate().map(|(r, &f)| f * self.phi_mid[(n, r)]).sum::<Complex64>() * h)
            .collect()
    }

    /// `Σ cₙ Φₙ` (or `Σ cₙ Φₙ'`) on the measurement midpoints.
    pub fn synthesize(&self, coeffs: &[Complex64], use_derivative: bool) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.n_modes);
        let table = if use_derivative { &self.dphi_mid } else { &self.phi_mid };
        (0..self.kgrid.n_sub)
            .map(|r| coeffs.iter().enumerate().map(|(n, &c)| c * table[(n, r)]).sum())
            .collect()
    }

    /// `Σ cₙ Φₙ(k)` at one wavenumber.
    pub fn synthesize_at(&self, coeffs: &[Complex64], k: f64) -> Complex64 {
        coeffs.iter().enumerate().map(|(n, &c)| c * self.value(n, k)).sum()
    }

    /// Largest `|⟨Φₘ, Φₙ⟩ - δₘₙ|` under the high-order quadrature.
    pub fn orthonormality_residual(&self) -> f64 {
        let kg = &self.kgrid;
        let mut worst: f64 = 0.0;
        for m in 0..self.n_modes {
            for n in 0..self.n_modes {
                let ip: f64 = (0..kg.quad_nodes.len()).map(|q| kg.quad_weights[q] * self.phi[(m, q)] * self.phi[(n, q)]).sum();
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    /// Largest deviation of `D` from unit upper-triangular form.
    pub fn d_structure_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..self.n_modes {
            worst = worst.max((self.mat_d[(m, m)] - 1.0).abs());
            for n in 0..m {
                worst = worst.max(self.mat_d[(m, n)].abs());
            }
        }
        worst
    }

    /// Writes `Φₙ` samples and the `D`, `S`, `B` entries as whitespace tables.
    pub fn write_tables(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# basis samples: n k phi dphi")?;
        for n in 0..self.n_modes {
            for (q, &k) in self.kgrid.quad_nodes.iter().enumerate() {
                writeln!(out, "{} {:e} {:e} {:e}", n + 1, k, self.phi[(n, q)], self.dphi[(n, q)])?;
            }
        }
        writeln!(out, "# D: m n d_mn")?;
        for m in 0..self.n_modes {
            for n in 0..self.n_modes {
                writeln!(out, "{} {} {:e}", m + 1, n + 1, self.mat_d[(m, n)])?;
            }
        }
        writeln!(out, "# S: m n re im")?;
        for m in 0..self.n_modes {
            for n in 0..self.n_modes {
                let s = self.mat_s[(m, n)];
                writeln!(out, "{} {} {:e} {:e}", m + 1, n + 1, s.re, s.im)?;
            }
        }
        writeln!(out, "# B: m n l b_mn^l")?;
        for m in 0..self.n_modes {
            for n in 0..self.n_modes {
                for l in 0..self.n_modes {
                    writeln!(out, "{} {} {} {:e}", m + 1, n + 1, l + 1, self.b(m, n, l))?;
                }
            }
        }
        Ok(())
    }
}
