//! Discrete Carleman-weighted functional `J(W)` and its gradient.
//!
//! Gradient convention: for real `J` of complex `W`, `gradient_j` returns
//! `2 ∂J/∂W̄`, so that `Re Σ conj(∇J)·δ` is the directional derivative of
//! `J` along `δ` and `W - ε∇J` is steepest descent in `ℝ²ⁿ`.

use num_complex::Complex64;

use crate::basis::BasisSet;
use crate::fieldtransform::CoeffVectorField;
use crate::grid::Grid2D;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `φ(x) = exp(-λ(x₂ - s)²)` sampled per grid row.
#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanWeight {
    pub lambda: f64,
    pub s: f64,
    pub rows: Vec<f64>,
}

impl CarlemanWeight {
    pub fn new(lambda: f64, s: f64, grid: &Grid2D) -> Self {
        assert!(lambda >= 0.0, "Carleman parameter must be non-negative");
        let rows = (0..grid.n_side()).map(|i| (-lambda * (grid.x2(i) - s).powi(2)).exp()).collect();
        Self { lambda, s, rows }
    }
}

/// The three coupling arrays of the truncated system.
#[derive(Debug, Clone)]
pub struct Couplings {
    pub n_modes: usize,
    /// `d[m N + r]`.
    pub d: Vec<Complex64>,
    /// `s[m N + r]`.
    pub s: Vec<Complex64>,
    /// `b[(m N + r) N + s] = b_{mr}^{(s)}`.
    pub b: Vec<Complex64>,
}

impl Couplings {
    pub fn from_basis(bs: &BasisSet) -> Self {
        let n = bs.n_modes;
        let mut d = Vec::with_capacity(n * n);
        let mut s = Vec::with_capacity(n * n);
        for m in 0..n {
            for r in 0..n {
                d.push(Complex64::new(bs.mat_d[(m, r)], 0.0));
                s.push(bs.mat_s[(m, r)]);
            }
        }
        let b = bs.tensor_b().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self { n_modes: n, d, s, b }
    }

    #[inline]
    fn b_at(&self, m: usize, r: usize, s: usize) -> Complex64 {
        self.b[(m * self.n_modes + r) * self.n_modes + s]
    }
}

#[derive(Debug, Clone)]
pub struct ObjectiveParams {
    pub rho: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub weight: CarlemanWeight,
    pub couplings: Couplings,
    pub carrier: CoeffVectorField,
    /// Drop the PDE residual term, leaving the pure regularizer.
    pub include_residual: bool,
}

impl ObjectiveParams {
    pub fn new(rho: f64, alpha1: f64, alpha2: f64, weight: CarlemanWeight, bs: &BasisSet, carrier: CoeffVectorField) -> Self {
        assert!(rho >= 0.0 && alpha1 >= 0.0 && alpha2 >= 0.0, "regularization weights must be non-negative");
        Self { rho, alpha1, alpha2, weight, couplings: Couplings::from_basis(bs), carrier, include_residual: true }
    }
}

/// Stencil differences of every mode at one interior node.
struct Stencil {
    lap: Vec<Complex64>,
    dx: Vec<Complex64>,
    dy: Vec<Complex64>,
}

fn stencil(v: &CoeffVectorField, i: usize, j: usize) -> Stencil {
    let n = v.n_modes();
    let mut st = Stencil { lap: vec![ZERO; n], dx: vec![ZERO; n], dy: vec![ZERO; n] };
    for r in 0..n {
        let c = v.get(i, j, r);
        st.lap[r] = v.get(i + 1, j, r) + v.get(i - 1, j, r) + v.get(i, j + 1, r) + v.get(i, j - 1, r) - 4.0 * c;
        st.dx[r] = v.get(i, j + 1, r) - c;
        st.dy[r] = v.get(i + 1, j, r) - c;
    }
    st
}

fn q_at(st: &Stencil, cp: &Couplings, m: usize, h: f64) -> Complex64 {
    let n = cp.n_modes;
    let mut q = ZERO;
    for r in 0..n {
        q += cp.d[m * n + r] * st.lap[r] / (h * h) + cp.s[m * n + r] * st.dy[r] / h;
        for s in 0..n {
            q += cp.b_at(m, r, s) * (st.dx[r] * st.dx[s] + st.dy[r] * st.dy[s]) / (h * h);
        }
    }
    q
}

/// Unweighted PDE residual of `V̂` at interior nodes (zero elsewhere).
pub fn residual_q(vhat: &CoeffVectorField, cp: &Couplings) -> CoeffVectorField {
    let grid = vhat.grid();
    let h = grid.h();
    let mut out = CoeffVectorField::zeros(grid, cp.n_modes);
    for j in 1..grid.n_cells {
        for i in 1..grid.n_cells {
            let st = stencil(vhat, i, j);
            for m in 0..cp.n_modes {
                out.set(i, j, m, q_at(&st, cp, m, h));
            }
        }
    }
    out
}

/// The individual parts of `J`, summed by [`JTerms::total`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JTerms {
    pub residual: f64,
    pub l2: f64,
    pub h2: f64,
    pub dirichlet: f64,
    pub neumann: f64,
}

impl JTerms {
    pub fn total(&self) -> f64 {
        self.residual + self.l2 + self.h2 + self.dirichlet + self.neumann
    }
}

pub fn evaluate_terms(w: &CoeffVectorField, p: &ObjectiveParams) -> JTerms {
    let grid = w.grid();
    let h = grid.h();
    let n = w.n_modes();
    let nc = grid.n_cells;
    let mut t = JTerms::default();

    if p.include_residual {
        let vhat = w + &p.carrier;
        for j in 1..nc {
            for i in 1..nc {
                let st = stencil(&vhat, i, j);
                let phi = p.weight.rows[i];
                for m in 0..n {
                    t.residual += (q_at(&st, &p.couplings, m, h) * phi).norm_sqr();
                }
            }
        }
        t.residual *= h * h;
    }

    t.l2 = p.rho * h * h * w.as_lined().iter().map(|z| z.norm_sqr()).sum::<f64>();

    let mut h2 = 0.0;
    for m in 0..n {
        for j in 1..nc {
            for i in 1..nc {
                let c = w.get(i, j, m);
                let dx = (w.get(i, j + 1, m) - c) / h;
                let dy = (w.get(i + 1, j, m) - c) / h;
                let dxx = (w.get(i, j + 1, m) - 2.0 * c + w.get(i, j - 1, m)) / (h * h);
                let dyy = (w.get(i + 1, j, m) - 2.0 * c + w.get(i - 1, j, m)) / (h * h);
                let mixed = (w.get(i + 1, j + 1, m) - w.get(i - 1, j + 1, m) - w.get(i + 1, j - 1, m)
                    + w.get(i - 1, j - 1, m))
                    / (h * h);
                h2 += dx.norm_sqr() + dy.norm_sqr() + dxx.norm_sqr() + dyy.norm_sqr() + 2.0 * mixed.norm_sqr();
            }
        }
    }
    t.h2 = p.rho * h * h * h2;

    let top = grid.top_row();
    for m in 0..n {
        for j in 0..grid.n_side() {
            t.dirichlet += w.get(top, j, m).norm_sqr();
        }
        for j in 1..nc {
            t.neumann += ((w.get(top, j, m) - w.get(top - 1, j, m)) / h).norm_sqr();
        }
    }
    t.dirichlet *= p.alpha1 * h;
    t.neumann *= p.alpha2 * h;
    t
}

pub fn evaluate_j(w: &CoeffVectorField, p: &ObjectiveParams) -> f64 {
    evaluate_terms(w, p).total()
}

/// `2 ∂J/∂W̄`, assembled by the chain rule summand by summand.
pub fn gradient_j(w: &CoeffVectorField, p: &ObjectiveParams) -> CoeffVectorField {
    let grid = w.grid();
    let h = grid.h();
    let h2 = h * h;
    let n = w.n_modes();
    let nc = grid.n_cells;
    let mut g = CoeffVectorField::zeros(grid, n);

    if p.include_residual {
        let cp = &p.couplings;
        let vhat = w + &p.carrier;
        let mut a_lap = vec![ZERO; n];
        let mut a_dx = vec![ZERO; n];
        let mut a_dy = vec![ZERO; n];
        for j in 1..nc {
            for i in 1..nc {
                let st = stencil(&vhat, i, j);
                let phi = p.weight.rows[i];
                a_lap.fill(ZERO);
                a_dx.fill(ZERO);
                a_dy.fill(ZERO);
                for m in 0..n {
                    // summand |h φ Q_m|²: contributes 2 (h φ)² Q_m conj(∂Q_m/∂·)
                    let e = 2.0 * h2 * phi * phi * q_at(&st, cp, m, h);
                    for r in 0..n {
                        let mut bx = ZERO;
                        let mut by = ZERO;
                        for s in 0..n {
                            let bb = cp.b_at(m, r, s) + cp.b_at(m, s, r);
                            bx += bb * st.dx[s];
                            by += bb * st.dy[s];
                        }
                        a_lap[r] += e * (cp.d[m * n + r] / h2).conj();
                        a_dx[r] += e * (bx / h2).conj();
                        a_dy[r] += e * (by / h2 + cp.s[m * n + r] / h).conj();
                    }
                }
                for r in 0..n {
                    let (l, x, y) = (a_lap[r], a_dx[r], a_dy[r]);
                    add(&mut g, i + 1, j, r, l + y);
                    add(&mut g, i - 1, j, r, l);
                    add(&mut g, i, j + 1, r, l + x);
                    add(&mut g, i, j - 1, r, l);
                    add(&mut g, i, j, r, -4.0 * l - x - y);
                }
            }
        }
    }

    let rho_w = 2.0 * p.rho * h2;
    for (gm, wm) in g.as_lined_mut().iter_mut().zip(w.as_lined()) {
        *gm += rho_w * wm;
    }
    for m in 0..n {
        for j in 1..nc {
            for i in 1..nc {
                let c = w.get(i, j, m);
                let dx = rho_w * (w.get(i, j + 1, m) - c) / h2;
                let dy = rho_w * (w.get(i + 1, j, m) - c) / h2;
                let dxx = rho_w * (w.get(i, j + 1, m) - 2.0 * c + w.get(i, j - 1, m)) / (h2 * h2);
                let dyy = rho_w * (w.get(i + 1, j, m) - 2.0 * c + w.get(i - 1, j, m)) / (h2 * h2);
                let mixed = 2.0 * rho_w
                    * (w.get(i + 1, j + 1, m) - w.get(i - 1, j + 1, m) - w.get(i + 1, j - 1, m) + w.get(i - 1, j - 1, m))
                    / (h2 * h2);
                add(&mut g, i, j + 1, m, dx + dxx);
                add(&mut g, i + 1, j, m, dy + dyy);
                add(&mut g, i, j, m, -dx - dy - 2.0 * dxx - 2.0 * dyy);
                add(&mut g, i, j - 1, m, dxx);
                add(&mut g, i - 1, j, m, dyy);
                add(&mut g, i + 1, j + 1, m, mixed);
                add(&mut g, i - 1, j + 1, m, -mixed);
                add(&mut g, i + 1, j - 1, m, -mixed);
                add(&mut g, i - 1, j - 1, m, mixed);
            }
        }
    }

    let top = grid.top_row();
    for m in 0..n {
        for j in 0..grid.n_side() {
            add(&mut g, top, j, m, 2.0 * p.alpha1 * h * w.get(top, j, m));
        }
        for j in 1..nc {
            let d = 2.0 * p.alpha2 * (w.get(top, j, m) - w.get(top - 1, j, m)) / h;
            add(&mut g, top, j, m, d);
            add(&mut g, top - 1, j, m, -d);
        }
    }
    g
}

#[inline]
fn add(g: &mut CoeffVectorField, i: usize, j: usize, r: usize, value: Complex64) {
    let m = g.grid().lined_index(i, j, r);
    g[m] += value;
}
