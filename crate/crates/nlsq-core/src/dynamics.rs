//! Time integration of the coupled system by Strang splitting.
//!
//! The linear flow is exact in the separable eigenbasis of `-Δ + V` (resp.
//! `-κΔ + V`), so it is unconditionally stable and unitary per component.
//! The nonlinear flow is pointwise (no spatial coupling) and integrated by a
//! classical RK4; it conserves `|u1|² + 2|u2|²` pointwise up to integrator
//! error, which doubles as the adaptivity monitor.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::field::FieldPair;
use crate::functionals::{self, ModelParams};
use crate::groundstate::GroundStateResult;
use crate::spectral;
use crate::spectral_basis::PairBasis;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct EvolveConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Nonlinear RK4 substeps per time step.
    pub substeps: usize,
    pub adaptive: bool,
    /// dt floor is `dt / dt_floor_factor`.
    pub dt_floor_factor: f64,
    /// Blow-up gradient threshold as a multiple of the initial gradient norm.
    pub gmax_factor: f64,
    /// Record one sample every `sample_stride` steps.
    pub sample_stride: usize,
    /// Per-step relative drift of the pointwise invariant that triggers
    /// halving when adaptive.
    pub invariant_tol: f64,
    /// Abort when boundary amplitude exceeds this fraction of the max.
    pub boundary_guard: f64,
}

impl EvolveConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        EvolveConfig {
            dt,
            horizon,
            substeps: 1,
            adaptive: true,
            dt_floor_factor: 65536.0,
            gmax_factor: 1e3,
            sample_stride: 100,
            invariant_tol: 1e-8,
            boundary_guard: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub t: f64,
    pub q: f64,
    pub e: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub virial: f64,
    pub n1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Completed,
    BlowupDetected(f64),
    DtFloorHit(f64),
}

#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub samples: Vec<Sample>,
    pub verdict: Verdict,
    pub final_pair: FieldPair,
}

impl TimeSeries {
    /// CSV with the fixed header `t,Q,E,grad_u,grad_v,virial,N1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,Q,E,grad_u,grad_v,virial,N1\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                s.t, s.q, s.e, s.grad_u, s.grad_v, s.virial, s.n1
            ));
        }
        out
    }
}

/// Exact linear half/full step: each eigenmode of `-Δ+V` (resp. `-κΔ+V`)
/// rotates by `e^{-iλ dt}`.
pub fn linear_step(pair: &mut FieldPair, basis: &PairBasis, dt: f64) {
    let grid = pair.grid.clone();
    basis.u.propagate(&mut pair.u, &grid, dt);
    basis.v.propagate(&mut pair.v, &grid, dt);
}

/// Pointwise nonlinear flow `i u̇1 = -u2 ū1`, `i u̇2 = -u1²/2` over `dt`
/// with `substeps` RK4 stages. Returns the largest relative drift of the
/// pointwise invariant `|u1|² + 2|u2|²`.
pub fn nonlinear_step(pair: &mut FieldPair, dt: f64, substeps: usize) -> f64 {
    let h = dt / substeps.max(1) as f64;
    let q_scale = pair
        .u
        .iter()
        .zip(&pair.v)
        .map(|(a, b)| a.norm_sqr() + 2.0 * b.norm_sqr())
        .fold(0.0f64, f64::max)
        .max(1e-300);

    let drift = pair
        .u
        .par_iter_mut()
        .zip(pair.v.par_iter_mut())
        .map(|(a, b)| {
            let q0 = a.norm_sqr() + 2.0 * b.norm_sqr();
            let (mut x, mut y) = (*a, *b);
            for _ in 0..substeps.max(1) {
                let (k1x, k1y) = rhs(x, y);
                let (k2x, k2y) = rhs(x + 0.5 * h * k1x, y + 0.5 * h * k1y);
                let (k3x, k3y) = rhs(x + 0.5 * h * k2x, y + 0.5 * h * k2y);
                let (k4x, k4y) = rhs(x + h * k3x, y + h * k3y);
                x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
                y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            }
            *a = x;
            *b = y;
            let q1 = x.norm_sqr() + 2.0 * y.norm_sqr();
            if !q1.is_finite() {
                return f64::INFINITY;
            }
            (q1 - q0).abs() / q0.max(1e-12 * q_scale)
        })
        .reduce(|| 0.0, f64::max);
    drift
}

#[inline]
fn rhs(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    (Complex64::i() * b * a.conj(), Complex64::i() * 0.5 * a * a)
}

fn sample_state(pair: &FieldPair, params: &ModelParams, t: f64) -> Sample {
    let gu = spectral::grad_norm_sq(&pair.u, &pair.grid).expect("shape");
    let gv = spectral::grad_norm_sq(&pair.v, &pair.grid).expect("shape");
    let k = functionals::interaction_k(pair);
    let pot = functionals::potential_term(pair, params);
    let au = spectral::axial_grad_norm_sq(&pair.u, &pair.grid).expect("shape");
    let av = spectral::axial_grad_norm_sq(&pair.v, &pair.grid).expect("shape");
    Sample {
        t,
        q: functionals::mass_q(pair),
        e: gu + params.kappa * gv + pot - k,
        grad_u: gu,
        grad_v: gv,
        virial: functionals::virial_moment(pair, params),
        n1: au + params.kappa * av - 0.25 * k,
    }
}

/// Strang composition `L(dt/2) ∘ N(dt) ∘ L(dt/2)`, with consecutive linear
/// half-steps merged between samples. Verdicts: `BlowupDetected` when the
/// gradient norm exceeds the threshold, or when the adaptive step collapses
/// to the floor while the gradient has grown; `DtFloorHit` for a floor
/// collapse without gradient growth; `Completed` at the horizon.
pub fn evolve(pair0: &FieldPair, params: &ModelParams, config: &EvolveConfig) -> Result<TimeSeries> {
    params.validate_grid(&pair0.grid)?;
    pair0.check_finite()?;
    let q0 = functionals::mass_q(pair0);
    if q0 <= 0.0 {
        return Err(Error::Unsupported("evolve requires Q(pair0) > 0".into()));
    }
    let basis = PairBasis::prepare(params, &pair0.grid)?;
    let mut pair = pair0.clone();
    let mut t = 0.0f64;
    let mut dt = config.dt;
    let dt_floor = config.dt / config.dt_floor_factor;
    let mut samples = Vec::new();

    let s0 = sample_state(&pair, params, 0.0);
    let g0 = (s0.grad_u + s0.grad_v).sqrt();
    let g_max = config.gmax_factor * g0.max(1e-300);
    samples.push(s0);

    let mut verdict = Verdict::Completed;
    // Size of the already-applied leading half step, if any. Linear flows
    // compose exactly, so a pending half of the wrong size is corrected by
    // one extra exact propagation.
    let mut half_pending: Option<f64> = None;
    let mut step_count = 0usize;

    'outer: while t < config.horizon - 1e-14 {
        let dt_step = dt.min(config.horizon - t);
        match half_pending {
            None => {
                linear_step(&mut pair, &basis, 0.5 * dt_step);
            }
            Some(h) if (h - 0.5 * dt_step).abs() > 1e-300 => {
                linear_step(&mut pair, &basis, 0.5 * dt_step - h);
            }
            _ => {}
        }
        // Every branch below ends the iteration with an explicit write to
        // half_pending, reflecting whether a leading half step is in flight.

        let saved = pair.clone();
        let drift = nonlinear_step(&mut pair, dt_step, config.substeps);
        if !drift.is_finite() || (config.adaptive && drift > config.invariant_tol) {
            // Reject: restore and unstagger exactly.
            pair = saved;
            linear_step(&mut pair, &basis, -0.5 * dt_step);
            half_pending = None;
            if !drift.is_finite() && !config.adaptive {
                return Err(Error::SolverAbort(format!("nonlinear overflow at t = {t:.6e}")));
            }
            dt *= 0.5;
            if dt < dt_floor {
                let s = sample_state(&pair, params, t);
                let gnow = (s.grad_u + s.grad_v).sqrt();
                samples.push(s);
                verdict = if gnow > 10.0 * g0 {
                    Verdict::BlowupDetected(t)
                } else {
                    Verdict::DtFloorHit(t)
                };
                break 'outer;
            }
            continue;
        }
        t += dt_step;
        step_count += 1;

        let due_sample = step_count % config.sample_stride.max(1) == 0;
        let at_end = t >= config.horizon - 1e-14;
        if due_sample || at_end {
            linear_step(&mut pair, &basis, 0.5 * dt_step);
            half_pending = None;
            pair.check_finite().map_err(|_| {
                Error::SolverAbort(format!("NaN encountered at t = {t:.6e}"))
            })?;
            let s = sample_state(&pair, params, t);
            let gnow = (s.grad_u + s.grad_v).sqrt();
            samples.push(s);
            if gnow > g_max {
                verdict = Verdict::BlowupDetected(t);
                break 'outer;
            }
            let b = spectral::boundary_amplitude_ratio(&pair.u, &pair.grid)
                .max(spectral::boundary_amplitude_ratio(&pair.v, &pair.grid));
            if b > config.boundary_guard {
                return Err(Error::SolverAbort(format!(
                    "boundary amplitude {b:.3e} exceeds guard at t = {t:.6e}; periodic wrap would corrupt the run"
                )));
            }
        } else {
            // Merge the trailing half with the next leading half.
            linear_step(&mut pair, &basis, dt_step);
            half_pending = Some(0.5 * dt_step);
        }
    }

    Ok(TimeSeries { samples, verdict, final_pair: pair })
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdReport {
    pub q_data: f64,
    pub q_threshold: f64,
    pub below_threshold: bool,
}

/// Global-existence threshold: `Q(data) < (n/4) Q(Q1, Q2)`.
pub fn global_threshold_check(
    pair0: &FieldPair,
    soliton: &GroundStateResult,
    n: usize,
) -> ThresholdReport {
    let q_data = functionals::mass_q(pair0);
    let q_threshold = n as f64 / 4.0 * functionals::mass_q(&soliton.pair);
    ThresholdReport { q_data, q_threshold, below_threshold: q_data < q_threshold }
}

#[derive(Debug, Clone, Copy)]
pub struct BlowupClassReport {
    pub i_data: f64,
    pub i_reference: f64,
    pub n1_data: f64,
    pub in_m: bool,
}

/// Membership in `M = { I < I(ground) and N1 < 0 }`.
pub fn blowup_class_check(
    pair0: &FieldPair,
    params: &ModelParams,
    ground: &GroundStateResult,
) -> BlowupClassReport {
    let i_data = functionals::energy_i(pair0, params);
    let n1 = functionals::axial_virial_n1(pair0, params);
    BlowupClassReport {
        i_data,
        i_reference: ground.i_value,
        n1_data: n1,
        in_m: i_data < ground.i_value && n1 < 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::Potential;
    use crate::grid::{make_grid, AxisSpec, Geometry, GridSpec};
    use std::sync::Arc;

    fn grid_1d(l: f64, m: usize) -> Arc<GridSpec> {
        Arc::new(
            make_grid(Geometry::Cartesian, vec![AxisSpec::periodic("xn", l, m)], None).unwrap(),
        )
    }

    #[test]
    fn nonlinear_step_frozen_coefficient() {
        // With u2 = 0 initially, u1 stays constant to leading order and
        // u2 grows like i·u1²·dt/2.
        let g = grid_1d(4.0, 8);
        let mut pair = FieldPair::new(
            g.clone(),
            vec![Complex64::new(0.8, 0.0); 8],
            vec![Complex64::default(); 8],
        )
        .unwrap();
        let dt = 1e-4;
        nonlinear_step(&mut pair, dt, 1);
        let expect = Complex64::i() * 0.5 * 0.64 * dt;
        assert!((pair.v[0] - expect).norm() < 1e-10);
        assert!((pair.u[0] - Complex64::new(0.8, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn nonlinear_step_matches_fine_oracle() {
        // Oracle: the same pointwise ODE integrated with 2000× smaller steps.
        let g = grid_1d(4.0, 8);
        let a0 = Complex64::new(0.9, -0.2);
        let b0 = Complex64::new(0.3, 0.4);
        let mut coarse = FieldPair::new(g.clone(), vec![a0; 8], vec![b0; 8]).unwrap();
        let mut fine = coarse.clone();
        let dt = 0.05;
        nonlinear_step(&mut coarse, dt, 1);
        nonlinear_step(&mut fine, dt, 2000);
        assert!((coarse.u[0] - fine.u[0]).norm() < 1e-10);
        assert!((coarse.v[0] - fine.v[0]).norm() < 1e-10);
        // Pointwise invariant conserved.
        let q0 = a0.norm_sqr() + 2.0 * b0.norm_sqr();
        let q1 = coarse.u[0].norm_sqr() + 2.0 * coarse.v[0].norm_sqr();
        assert!((q1 - q0).abs() < 1e-10 * q0);
    }

    #[test]
    fn zero_interaction_is_exactly_linear() {
        // Gaussian data under V1 with the coupling never acting (u2 = 0 keeps
        // u1 linear only when u1 = 0; instead check E drift is at roundoff
        // for data evolved with the linear step alone composed via evolve on
        // tiny amplitude where the nonlinearity is negligible at tolerance).
        let g = grid_1d(12.0, 256);
        let params = ModelParams::new(1, 1.0, Potential::V1).unwrap();
        let amp = 1e-6;
        let pair = FieldPair::from_fn(
            g.clone(),
            |x| Complex64::new(amp * (-0.5 * x[0] * x[0]).exp(), 0.0),
            |x| Complex64::new(amp * (-0.4 * x[0] * x[0]).exp(), 0.0),
        );
        let mut cfg = EvolveConfig::new(1e-3, 0.5);
        cfg.sample_stride = 100;
        let ts = evolve(&pair, &params, &cfg).unwrap();
        assert_eq!(ts.verdict, Verdict::Completed);
        let e0 = ts.samples.first().unwrap().e;
        let e1 = ts.samples.last().unwrap().e;
        assert!(((e1 - e0) / e0).abs() < 1e-10);
    }

    #[test]
    fn time_reversal_via_conjugation() {
        let g = grid_1d(10.0, 128);
        let params = ModelParams::new(1, 0.8, Potential::V1).unwrap();
        let pair = FieldPair::from_fn(
            g.clone(),
            |x| Complex64::new(0.6 * (-0.5 * x[0] * x[0]).exp(), 0.0),
            |x| Complex64::new(0.4 * (-0.7 * x[0] * x[0]).exp(), 0.1),
        );
        let mut cfg = EvolveConfig::new(5e-4, 0.4);
        cfg.adaptive = false;
        cfg.sample_stride = 1_000_000;
        let fwd = evolve(&pair, &params, &cfg).unwrap();
        let back = evolve(&fwd.final_pair.conj(), &params, &cfg).unwrap();
        let recovered = back.final_pair.conj();
        let err = recovered.l2_distance(&pair);
        let scale = (pair.mass_u() + pair.mass_v()).sqrt();
        assert!(err < 1e-9 * scale, "reversal error {err}");
    }
}
