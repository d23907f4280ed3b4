//! Reconstruction loop: carrier, gradient step on `J`, coefficient update
//! and forward re-solve, repeated until `J` stalls.

use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, BasisSet};
use crate::carrier::{build_carrier, build_cutoff};
use crate::error::{Error, Result};
use crate::fieldtransform::{cauchy_to_v_data, log_to_coeffs, recover_coefficient, total_to_log, CoeffVectorField, StencilOrder};
use crate::forward::{solve_forward_all, CauchyData, Coefficient, IncidentWave};
use crate::grid::{Grid2D, KGrid};
use crate::objective::{evaluate_j, gradient_j, CarlemanWeight, ObjectiveParams};

/// Consecutive increases of `J` that trigger a warning.
const NON_DECREASE_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub epsilon: f64,
    pub rho: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub lambda: f64,
    pub s: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub n_modes: usize,
    pub half_width: f64,
    pub n_cells: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
    /// Cutoff transition width; `R/10` when absent.
    pub xi: Option<f64>,
    pub clamp_negative: bool,
    /// Gaussian smoothing width, in grid steps, applied along `x₁` to the
    /// transformed boundary data before the carrier is built; `0` disables.
    pub data_smoothing: f64,
    /// Set the coefficient to zero on `∂Ω` before each forward solve and in
    /// the output.
    pub zero_boundary: bool,
    /// Finite-difference stencils used when `a` is recovered from `V`.
    pub stencil: StencilOrder,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            rho: 1e-5,
            alpha1: 1e-3,
            alpha2: 1e-5,
            lambda: 5.0,
            s: 1.0,
            tolerance: 1e-3,
            max_iterations: 25,
            n_modes: 4,
            half_width: 0.8,
            n_cells: 28,
            k_min: 0.5,
            k_max: 2.0,
            n_k: 50,
            xi: None,
            clamp_negative: true,
            data_smoothing: 3.0,
            zero_boundary: true,
            stencil: StencilOrder::Fourth,
        }
    }
}

impl InversionConfig {
    pub fn xi(&self) -> f64 {
        self.xi.unwrap_or(self.half_width / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.rho >= 0.0 && self.alpha1 >= 0.0 && self.alpha2 >= 0.0 && self.lambda >= 0.0) {
            return bad("rho, alpha1, alpha2 and lambda must be non-negative");
        }
        if self.lambda > 0.0 && !(self.s > self.half_width) {
            return bad("s must exceed R");
        }
        if !(self.data_smoothing >= 0.0) {
            return bad("data_smoothing must be non-negative");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        let xi = self.xi();
        if !(xi > 0.0 && xi < self.half_width) {
            return bad("xi must lie in (0, R)");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.half_width, self.n_cells)
    }

    pub fn kgrid(&self) -> Result<KGrid> {
        KGrid::new(self.k_min, self.k_max, self.n_k)
    }

    fn check_data(&self, cd: &CauchyData) -> Result<()> {
        if cd.half_width != self.half_width
            || cd.n_cells != self.n_cells
            || cd.k_min != self.k_min
            || cd.k_max != self.k_max
            || cd.n_k != self.n_k
        {
            return Err(Error::GridMismatch(format!(
                "data: R={} Nx={} k=[{}, {}] Nk={}; config: R={} Nx={} k=[{}, {}] Nk={}",
                cd.half_width,
                cd.n_cells,
                cd.k_min,
                cd.k_max,
                cd.n_k,
                self.half_width,
                self.n_cells,
                self.k_min,
                self.k_max,
                self.n_k
            )));
        }
        if !cd.is_finite() {
            return Err(Error::InvalidParameter("Cauchy data contains non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub j_value: f64,
    pub gradient_norm: f64,
    /// Maximum of the coefficient produced in this iteration.
    pub a_max: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub gradient_evaluations: usize,
    pub forward_solves: usize,
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub coefficient: Coefficient,
    pub records: Vec<IterationRecord>,
    /// The `|ΔJ| < tolerance` test fired.
    pub converged: bool,
    /// Index of the iterate the coefficient was recovered from.
    pub selected_iterate: usize,
    pub non_decrease_warning: bool,
    pub counters: Counters,
    /// Largest branch-wrap count seen while taking logarithms.
    pub branch_jumps: usize,
    /// Discarded imaginary part of the elimination formula for the output.
    pub max_imaginary: f64,
}

struct Setup {
    grid: Grid2D,
    kg: KGrid,
    bs: BasisSet,
    params: ObjectiveParams,
}

fn setup(cd: &CauchyData, wave: &IncidentWave, cfg: &InversionConfig, lambda: f64) -> Result<Setup> {
    cfg.validate()?;
    cfg.check_data(cd)?;
    let (d1, d2) = wave.direction();
    if d1.abs() > 1e-12 || (d2 + 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "inversion is formulated for the downward wave d = (0, -1), got ({d1}, {d2})"
        )));
    }
    let grid = cfg.grid()?;
    let kg = cfg.kgrid()?;
    let bs = build_basis(&kg, cfg.n_modes)?;
    let bd = cauchy_to_v_data(cd, wave, &bs)?.smoothed(cfg.data_smoothing);
    let cutoff = build_cutoff(cfg.half_width, cfg.xi(), &grid)?;
    let carrier = build_carrier(&bd, &cutoff, &grid, &bs);
    let weight = CarlemanWeight::new(lambda, cfg.s, &grid);
    let params = ObjectiveParams::new(cfg.rho, cfg.alpha1, cfg.alpha2, weight, &bs, carrier);
    Ok(Setup { grid, kg, bs, params })
}

/// One gradient step followed by the forward re-solve, `Vₙ → Vₙ₊₁`.
struct Step {
    next: CoeffVectorField,
    gradient_norm: f64,
    a_max: f64,
    branch_jumps: usize,
}

fn descend(v: &CoeffVectorField, st: &Setup, wave: &IncidentWave, cfg: &InversionConfig, counters: &mut Counters) -> Result<Step> {
    let w = v - &st.params.carrier;
    let g = gradient_j(&w, &st.params);
    counters.gradient_evaluations += 1;
    let v_tilde = v.axpy(-cfg.epsilon, &g);
    let mut a = recover_coefficient(&v_tilde, &st.bs, cfg.stencil).coefficient;
    if cfg.zero_boundary {
        zero_on_boundary(&mut a);
    }
    let u = solve_forward_all(&a, wave, &st.kg)?;
    counters.forward_solves += 1;
    let lf = total_to_log(&u, wave, &st.grid, &st.kg)?;
    Ok(Step {
        next: log_to_coeffs(&lf, &st.bs, &st.grid),
        gradient_norm: g.norm(),
        a_max: a.max_with_location().0,
        branch_jumps: lf.branch_jumps,
    })
}

/// `a` vanishes on `∂Ω` by assumption on the scatterer.
fn zero_on_boundary(a: &mut Coefficient) {
    let grid = a.grid;
    for i in 0..grid.n_side() {
        for j in 0..grid.n_side() {
            if grid.is_boundary(i, j) {
                a.values[grid.node(i, j)] = 0.0;
            }
        }
    }
}

fn finish(v: &CoeffVectorField, st: &Setup, cfg: &InversionConfig) -> (Coefficient, f64) {
    let rec = recover_coefficient(v, &st.bs, cfg.stencil);
    let mut a = rec.coefficient;
    if cfg.zero_boundary {
        zero_on_boundary(&mut a);
    }
    if cfg.clamp_negative {
        a.clamp_negative();
    }
    (a, rec.max_imaginary)
}

/// Runs the loop until `|J(Wₙ) - J(Wₙ₋₁)| < tolerance` (`n ≥ 1`) or the
/// iteration cap.
pub fn run_inversion(cd: &CauchyData, wave: &IncidentWave, cfg: &InversionConfig) -> Result<InversionResult> {
    run_inversion_observed(cd, wave, cfg, |_, _, _| {})
}

/// [`run_inversion`] calling `observe(n, Wₙ, params)` at every visited iterate.
pub fn run_inversion_observed(
    cd: &CauchyData,
    wave: &IncidentWave,
    cfg: &InversionConfig,
    mut observe: impl FnMut(usize, &CoeffVectorField, &ObjectiveParams),
) -> Result<InversionResult> {
    let st = setup(cd, wave, cfg, cfg.lambda)?;
    let start = Instant::now();
    let mut counters = Counters::default();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut v = st.params.carrier.clone();
    let mut prev_j: Option<f64> = None;
    let mut increases = 0;
    let mut non_decrease_warning = false;
    let mut branch_jumps = 0;
    let mut converged = false;

    for n in 0..=cfg.max_iterations {
        let w = &v - &st.params.carrier;
        observe(n, &w, &st.params);
        let j = evaluate_j(&w, &st.params);
        if !j.is_finite() {
            return Err(Error::InvalidParameter(format!("J became non-finite at iteration {n}")));
        }
        if let Some(p) = prev_j {
            increases = if j > p { increases + 1 } else { 0 };
            if increases >= NON_DECREASE_RUN && !non_decrease_warning {
                warn!("J increased for {NON_DECREASE_RUN} consecutive iterations (n = {n})");
                non_decrease_warning = true;
            }
            if (j - p).abs() < cfg.tolerance {
                converged = true;
            }
        }
        if converged || n == cfg.max_iterations {
            let (a, max_imaginary) = finish(&v, &st, cfg);
            records.push(IterationRecord {
                n,
                j_value: j,
                gradient_norm: 0.0,
                a_max: a.max_with_location().0,
                wall_time_s: start.elapsed().as_secs_f64(),
            });
            info!("stopped at n = {n}, J = {j:.6e}, converged = {converged}");
            return Ok(InversionResult {
                coefficient: a,
                records,
                converged,
                selected_iterate: n,
                non_decrease_warning,
                counters,
                branch_jumps,
                max_imaginary,
            });
        }
        let step = descend(&v, &st, wave, cfg, &mut counters)?;
        branch_jumps = branch_jumps.max(step.branch_jumps);
        debug!("n = {n}: J = {j:.6e}, |grad| = {:.3e}, max a = {:.4}", step.gradient_norm, step.a_max);
        records.push(IterationRecord {
            n,
            j_value: j,
            gradient_norm: step.gradient_norm,
            a_max: step.a_max,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        v = step.next;
        prev_j = Some(j);
    }
    unreachable!("loop returns at the iteration cap")
}

/// Number of iterates visited by [`ablation_no_weight`].
pub const ABLATION_ITERATIONS: usize = 20;

/// The same loop with `φ ≡ 1` for a fixed number of iterates; returns the
/// coefficient of the iterate with the smallest `J`. `converged` reports
/// whether the tolerance test would have fired at any point.
pub fn ablation_no_weight(cd: &CauchyData, wave: &IncidentWave, cfg: &InversionConfig) -> Result<InversionResult> {
    let st = setup(cd, wave, cfg, 0.0)?;
    let start = Instant::now();
    let mut counters = Counters::default();
    let mut records = Vec::with_capacity(ABLATION_ITERATIONS);
    let mut v = st.params.carrier.clone();
    let mut best: Option<(f64, usize, CoeffVectorField)> = None;
    let mut prev_j: Option<f64> = None;
    let mut increases = 0;
    let mut non_decrease_warning = false;
    let mut tolerance_met = false;
    let mut branch_jumps = 0;

    for n in 0..ABLATION_ITERATIONS {
        let j = evaluate_j(&(&v - &st.params.carrier), &st.params);
        if !j.is_finite() {
            return Err(Error::InvalidParameter(format!("J became non-finite at iteration {n}")));
        }
        if let Some(p) = prev_j {
            tolerance_met |= (j - p).abs() < cfg.tolerance;
            increases = if j > p { increases + 1 } else { 0 };
            non_decrease_warning |= increases >= NON_DECREASE_RUN;
        }
        if best.as_ref().is_none_or(|(bj, _, _)| j < *bj) {
            best = Some((j, n, v.clone()));
        }
        let (gradient_norm, a_max) = if n + 1 < ABLATION_ITERATIONS {
            let step = descend(&v, &st, wave, cfg, &mut counters)?;
            branch_jumps = branch_jumps.max(step.branch_jumps);
            v = step.next;
            (step.gradient_norm, step.a_max)
        } else {
            (0.0, recover_coefficient(&v, &st.bs, cfg.stencil).coefficient.max_with_location().0)
        };
        records.push(IterationRecord { n, j_value: j, gradient_norm, a_max, wall_time_s: start.elapsed().as_secs_f64() });
        prev_j = Some(j);
    }
    let (_, selected_iterate, v_best) = best.expect("at least one iterate");
    let (coefficient, max_imaginary) = finish(&v_best, &st, cfg);
    info!("ablation: smallest J at iterate {selected_iterate}");
    Ok(InversionResult {
        coefficient,
        records,
        converged: tolerance_met,
        selected_iterate,
        non_decrease_warning,
        counters,
        branch_jumps,
        max_imaginary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn small(name: &str) -> Scenario {
        let mut sc = Scenario::builtin(name).unwrap();
        sc.inversion.n_cells = 14;
        sc.inversion.n_k = 12;
        sc.inversion.max_iterations = 4;
        sc
    }

    #[test]
    fn null_scatterer_stops_immediately() {
        let sc = small("null");
        let sim = sc.simulate().unwrap();
        let res = run_inversion(&sim.noisy, &sc.wave().unwrap(), &sc.inversion).unwrap();
        assert!(res.converged);
        assert_eq!(res.selected_iterate, 1);
        assert!(res.coefficient.values.iter().all(|a| a.abs() < 0.05));
        assert_eq!(res.counters, Counters { gradient_evaluations: 1, forward_solves: 1 });
    }

    #[test]
    fn counters_match_steps_and_output_is_nonnegative() {
        let mut sc = small("example1");
        sc.inversion.tolerance = 1e-12;
        let sim = sc.simulate().unwrap();
        let res = run_inversion(&sim.noisy, &sc.wave().unwrap(), &sc.inversion).unwrap();
        assert!(!res.converged);
        assert_eq!(res.records.len(), 5);
        assert!(res.records.iter().enumerate().all(|(n, r)| r.n == n));
        assert_eq!(res.counters, Counters { gradient_evaluations: 4, forward_solves: 4 });
        assert!(res.coefficient.values.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let sc = small("example2b");
        let run = || {
            let sim = sc.simulate().unwrap();
            let res = run_inversion(&sim.noisy, &sc.wave().unwrap(), &sc.inversion).unwrap();
            let js: Vec<u64> = res.records.iter().map(|r| r.j_value.to_bits()).collect();
            let a: Vec<u64> = res.coefficient.values.iter().map(|v| v.to_bits()).collect();
            (js, a)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn ablation_visits_fixed_number_of_iterates() {
        let mut sc = small("example1");
        sc.inversion.n_cells = 10;
        sc.inversion.n_k = 8;
        let sim = sc.simulate().unwrap();
        let res = ablation_no_weight(&sim.noisy, &sc.wave().unwrap(), &sc.inversion).unwrap();
        assert_eq!(res.records.len(), ABLATION_ITERATIONS);
        assert_eq!(res.counters.forward_solves, ABLATION_ITERATIONS - 1);
        let jmin = res.records.iter().map(|r| r.j_value).fold(f64::INFINITY, f64::min);
        assert_eq!(res.records[res.selected_iterate].j_value, jmin);
    }

    #[test]
    fn rejects_mismatched_data_and_oblique_waves() {
        let sc = small("example1");
        let sim = sc.simulate().unwrap();
        let mut cfg = sc.inversion.clone();
        cfg.n_cells = 16;
        assert!(matches!(run_inversion(&sim.noisy, &sc.wave().unwrap(), &cfg), Err(Error::GridMismatch(_))));
        let oblique = IncidentWave::new(0.6, -0.8).unwrap();
        assert!(run_inversion(&sim.noisy, &oblique, &sc.inversion).is_err());
        let mut bad = sc.inversion.clone();
        bad.epsilon = 0.0;
        assert!(bad.validate().is_err());
    }
}
