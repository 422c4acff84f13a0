//! Scalar functionals of a field pair: masses, energies, the quadratic
//! interaction, Pohozaev and virial quantities, the Gagliardo–Nirenberg
//! quotient, the Steiner rearrangement along the free axis, and the
//! Heisenberg diagnostic.

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::field::FieldPair;
use crate::grid::{Geometry, GridSpec};
use crate::spectral;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Potential {
    None,
    /// Full harmonic trap `|x|²`.
    V1,
    /// Partial confinement `|x'|²` (free axis `x_n`).
    V2,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Effective spatial dimension, 1..=5.
    pub n: usize,
    pub kappa: f64,
    pub potential: Potential,
    /// Factor multiplying the potential (t⁻² for the scaled systems).
    pub potential_scale: f64,
}

impl ModelParams {
    pub fn new(n: usize, kappa: f64, potential: Potential) -> Result<Self> {
        if n == 0 || n > 5 {
            return Err(Error::Unsupported(format!("dimension n = {n} outside 1..=5")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Unsupported("kappa must be positive".into()));
        }
        if potential == Potential::V2 && n < 2 {
            return Err(Error::Unsupported("partial confinement V2 requires n >= 2".into()));
        }
        Ok(ModelParams { n, kappa, potential, potential_scale: 1.0 })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.potential_scale = scale;
        self
    }

    pub fn eps0(&self) -> f64 {
        self.kappa.min(1.0)
    }

    pub fn delta0(&self) -> f64 {
        self.kappa.max(1.0)
    }

    /// The grid must represent the model's spatial dimension.
    pub fn validate_grid(&self, grid: &GridSpec) -> Result<()> {
        if grid.spatial_dim() != self.n {
            return Err(Error::Unsupported(format!(
                "grid represents dimension {} but model has n = {}",
                grid.spatial_dim(),
                self.n
            )));
        }
        if self.potential == Potential::V2 && grid.ndim() < 2 {
            return Err(Error::Unsupported("V2 needs a transverse axis".into()));
        }
        Ok(())
    }

    /// Potential sampled on every grid node (scale applied).
    pub fn potential_values(&self, grid: &GridSpec) -> Vec<f64> {
        let raw = match self.potential {
            Potential::None => vec![0.0; grid.len()],
            Potential::V1 => grid.radius_sq(),
            Potential::V2 => grid.transverse_radius_sq(),
        };
        raw.into_iter().map(|v| v * self.potential_scale).collect()
    }

    /// Per-axis separable part of the potential (scale applied).
    pub fn axis_potential(&self, grid: &GridSpec, axis: usize) -> Vec<f64> {
        let coords = &grid.axes[axis].coords;
        let active = match self.potential {
            Potential::None => false,
            Potential::V1 => true,
            Potential::V2 => axis != grid.axial_axis(),
        };
        coords
            .iter()
            .map(|&x| if active { self.potential_scale * x * x } else { 0.0 })
            .collect()
    }
}

/// `K(u, v) = Re ∫ u² v̄ dx`.
pub fn interaction_k(pair: &FieldPair) -> f64 {
    let w = pair.grid.flat_weights();
    let mut acc = 0.0;
    for i in 0..pair.u.len() {
        acc += (pair.u[i] * pair.u[i] * pair.v[i].conj()).re * w[i];
    }
    acc
}

/// `∫ V (|u|² + |v|²)`.
pub fn potential_term(pair: &FieldPair, params: &ModelParams) -> f64 {
    if params.potential == Potential::None {
        return 0.0;
    }
    let v = params.potential_values(&pair.grid);
    let w = pair.grid.flat_weights();
    let mut acc = 0.0;
    for i in 0..pair.u.len() {
        acc += v[i] * (pair.u[i].norm_sqr() + pair.v[i].norm_sqr()) * w[i];
    }
    acc
}

pub fn kinetic_u(pair: &FieldPair) -> f64 {
    spectral::grad_norm_sq(&pair.u, &pair.grid).expect("shape checked")
}

pub fn kinetic_v(pair: &FieldPair) -> f64 {
    spectral::grad_norm_sq(&pair.v, &pair.grid).expect("shape checked")
}

/// Action `I = ½(‖∇u‖² + κ‖∇v‖²) + ½∫V(|u|²+|v|²) - ½K`.
pub fn energy_i(pair: &FieldPair, params: &ModelParams) -> f64 {
    0.5 * (kinetic_u(pair) + params.kappa * kinetic_v(pair)) + 0.5 * potential_term(pair, params)
        - 0.5 * interaction_k(pair)
}

/// Conserved energy `E = P - K` with `P = ‖∇u‖² + κ‖∇v‖² + ∫V(|u|²+|v|²)`.
pub fn energy_e(pair: &FieldPair, params: &ModelParams) -> f64 {
    kinetic_u(pair) + params.kappa * kinetic_v(pair) + potential_term(pair, params)
        - interaction_k(pair)
}

/// Conserved weighted mass `Q = ‖u‖² + 2‖v‖²`.
pub fn mass_q(pair: &FieldPair) -> f64 {
    pair.mass_u() + 2.0 * pair.mass_v()
}

/// Pohozaev functional `B = ‖∇u‖² + κ‖∇v‖² - ∫V(|u|²+|v|²) - (n/4)K`;
/// vanishes on constrained critical points.
pub fn pohozaev_b(pair: &FieldPair, params: &ModelParams) -> f64 {
    kinetic_u(pair) + params.kappa * kinetic_v(pair) - potential_term(pair, params)
        - params.n as f64 / 4.0 * interaction_k(pair)
}

/// Axial virial operator `N1 = ‖∂_{x_n}u‖² + κ‖∂_{x_n}v‖² - ¼K`.
pub fn axial_virial_n1(pair: &FieldPair, params: &ModelParams) -> f64 {
    let gu = spectral::axial_grad_norm_sq(&pair.u, &pair.grid).expect("shape checked");
    let gv = spectral::axial_grad_norm_sq(&pair.v, &pair.grid).expect("shape checked");
    gu + params.kappa * gv - 0.25 * interaction_k(pair)
}

/// Weighted variance `V(t) = ∫ |x|² (|u|² + |v|²/κ)`.
pub fn virial_moment(pair: &FieldPair, params: &ModelParams) -> f64 {
    let r2 = pair.grid.radius_sq();
    let w = pair.grid.flat_weights();
    let inv_k = 1.0 / params.kappa;
    let mut acc = 0.0;
    for i in 0..pair.u.len() {
        acc += r2[i] * (pair.u[i].norm_sqr() + inv_k * pair.v[i].norm_sqr()) * w[i];
    }
    acc
}

/// Right-hand side of the closed variance inequality, valid for κ = 1/2:
/// `8 E0 + 2(4-n) K - 16 ∫V(|u|²+|v|²)`.
pub fn virial_rhs(pair: &FieldPair, params: &ModelParams, e0: f64) -> Result<f64> {
    if (params.kappa - 0.5).abs() > 1e-12 {
        return Err(Error::KappaRestriction { op: "virial_rhs", kappa: params.kappa });
    }
    Ok(8.0 * e0 + 2.0 * (4.0 - params.n as f64) * interaction_k(pair)
        - 16.0 * potential_term(pair, params))
}

/// The cross term `Im ∫ |x|² v ū²` whose time derivative enters the variance
/// identity with weight `(1 - 1/(2κ))`; monitored, never used for verdicts.
pub fn virial_cross_term(pair: &FieldPair) -> f64 {
    let r2 = pair.grid.radius_sq();
    let w = pair.grid.flat_weights();
    let mut acc = 0.0;
    for i in 0..pair.u.len() {
        acc += (pair.v[i] * pair.u[i].conj() * pair.u[i].conj()).im * r2[i] * w[i];
    }
    acc
}

/// Dilation-invariant Gagliardo–Nirenberg quotient
/// `(‖∇u‖² + κ‖∇v‖²)^{n/4} Q^{(6-n)/4} / K`, requires `K > 0`.
pub fn gn_quotient(pair: &FieldPair, params: &ModelParams) -> Result<f64> {
    let k = interaction_k(pair);
    if k <= 0.0 {
        return Err(Error::NonPositiveK(k));
    }
    let a = kinetic_u(pair) + params.kappa * kinetic_v(pair);
    let q = mass_q(pair);
    let n = params.n as f64;
    Ok(a.powf(n / 4.0) * q.powf((6.0 - n) / 4.0) / k)
}

/// Heisenberg diagnostic: returns `(∫|ψ|², (2/n)‖∇ψ‖·‖xψ‖)`; the first
/// never exceeds the second.
pub fn heisenberg_check(field: &[Complex64], grid: &GridSpec, n: usize) -> Result<(f64, f64)> {
    let lhs = grid.norm_sq(field)?;
    let grad = spectral::grad_norm_sq(field, grid)?.sqrt();
    let r2 = grid.radius_sq();
    let w = grid.flat_weights();
    let mut xm = 0.0;
    for i in 0..field.len() {
        xm += r2[i] * field[i].norm_sqr() * w[i];
    }
    Ok((lhs, 2.0 / n as f64 * grad * xm.sqrt()))
}

/// Symmetric decreasing rearrangement of `|u|`, `|v|` along the free axis,
/// independently for each transverse node. Sort-based ("organ pipe")
/// placement preserves every `L^p` norm exactly on the grid.
pub fn steiner_rearrange_axial(pair: &FieldPair) -> FieldPair {
    let grid = &pair.grid;
    let shape = grid.shape();
    let m = *shape.last().unwrap();
    let rows = pair.u.len() / m;
    let placement = organ_pipe_placement(m);

    let rearrange = |src: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); src.len()];
        let mut vals: Vec<f64> = Vec::with_capacity(m);
        for r in 0..rows {
            vals.clear();
            vals.extend(src[r * m..(r + 1) * m].iter().map(|c| c.norm()));
            // Stable descending sort: ties keep grid order.
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
            for (rank, &i) in idx.iter().enumerate() {
                out[r * m + placement[rank]] = Complex64::new(vals[i], 0.0);
            }
        }
        out
    };

    FieldPair { u: rearrange(&pair.u), v: rearrange(&pair.v), grid: grid.clone() }
}

/// Placement order: center node first, then alternating right/left.
fn organ_pipe_placement(m: usize) -> Vec<usize> {
    let c = m / 2;
    let mut order = Vec::with_capacity(m);
    order.push(c);
    let mut k = 1isize;
    while order.len() < m {
        for &s in &[k, -k] {
            let p = (c as isize + s).rem_euclid(m as isize) as usize;
            if order.len() < m && !order.contains(&p) {
                order.push(p);
            }
        }
        k += 1;
    }
    order
}

/// Every scalar the crate knows how to compute about a pair, in one pass.
#[derive(Debug, Clone)]
pub struct FunctionalReport {
    pub mu1: f64,
    pub mu2: f64,
    pub q_mass: f64,
    pub kinetic_u: f64,
    pub kinetic_v: f64,
    pub potential: f64,
    pub k_value: f64,
    pub i_value: f64,
    pub e_value: f64,
    pub b_value: f64,
    pub n1_value: f64,
    pub virial_moment: f64,
    pub gn_j: Option<f64>,
}

impl FunctionalReport {
    pub fn compute(pair: &FieldPair, params: &ModelParams) -> Self {
        let ku = kinetic_u(pair);
        let kv = kinetic_v(pair);
        let pot = potential_term(pair, params);
        let k = interaction_k(pair);
        let mu1 = pair.mass_u();
        let mu2 = pair.mass_v();
        let n = params.n as f64;
        let gu = spectral::axial_grad_norm_sq(&pair.u, &pair.grid).expect("shape");
        let gv = spectral::axial_grad_norm_sq(&pair.v, &pair.grid).expect("shape");
        let a = ku + params.kappa * kv;
        FunctionalReport {
            mu1,
            mu2,
            q_mass: mu1 + 2.0 * mu2,
            kinetic_u: ku,
            kinetic_v: kv,
            potential: pot,
            k_value: k,
            i_value: 0.5 * a + 0.5 * pot - 0.5 * k,
            e_value: a + pot - k,
            b_value: a - pot - n / 4.0 * k,
            n1_value: gu + params.kappa * gv - 0.25 * k,
            virial_moment: virial_moment(pair, params),
            gn_j: if k > 0.0 {
                Some(a.powf(n / 4.0) * (mu1 + 2.0 * mu2).powf((6.0 - n) / 4.0) / k)
            } else {
                None
            },
        }
    }

    /// Flat JSON object with fixed key names.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("masses.mu1".into(), json!(self.mu1));
        m.insert("masses.mu2".into(), json!(self.mu2));
        m.insert("masses.Q".into(), json!(self.q_mass));
        m.insert("energy.kinetic_u".into(), json!(self.kinetic_u));
        m.insert("energy.kinetic_v".into(), json!(self.kinetic_v));
        m.insert("energy.potential".into(), json!(self.potential));
        m.insert("energy.I".into(), json!(self.i_value));
        m.insert("energy.E".into(), json!(self.e_value));
        m.insert("interaction.K".into(), json!(self.k_value));
        m.insert("pohozaev.B".into(), json!(self.b_value));
        m.insert("virial.N1".into(), json!(self.n1_value));
        m.insert("virial.moment".into(), json!(self.virial_moment));
        m.insert("gn.J".into(), self.gn_j.map(|j| json!(j)).unwrap_or(Value::Null));
        Value::Object(m)
    }
}

/// Helper: is this a grid the model can carry a virial moment on.
pub fn supports_virial(grid: &GridSpec) -> bool {
    matches!(grid.geometry, Geometry::Cartesian | Geometry::Cylindrical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, AxisSpec, Geometry};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid_1d(l: f64, m: usize) -> Arc<GridSpec> {
        Arc::new(make_grid(Geometry::Cartesian, vec![AxisSpec::periodic("xn", l, m)], None).unwrap())
    }

    fn gaussian_pair(grid: &Arc<GridSpec>) -> FieldPair {
        FieldPair::from_fn(
            grid.clone(),
            |x| Complex64::new((-0.5 * x[0] * x[0]).exp(), 0.0),
            |x| Complex64::new((-0.5 * x[0] * x[0]).exp(), 0.0),
        )
    }

    #[test]
    fn interaction_gaussian_oracle() {
        let g = grid_1d(16.0, 1024);
        let p = gaussian_pair(&g);
        let k = interaction_k(&p);
        let oracle = (2.0 * PI / 3.0).sqrt();
        assert!((k - oracle).abs() < 1e-8, "K = {k}");

        // K(u, 0) = 0 and the imaginary-v case.
        let zero = FieldPair::new(g.clone(), p.u.clone(), vec![Complex64::default(); g.len()])
            .unwrap();
        assert_eq!(interaction_k(&zero), 0.0);
        let iv = FieldPair::new(
            g.clone(),
            p.u.clone(),
            p.u.iter().map(|c| c * Complex64::i()).collect(),
        )
        .unwrap();
        assert!(interaction_k(&iv).abs() < 1e-14);
    }

    #[test]
    fn interaction_scaling_law() {
        // K(su, tv) = s² t K(u, v) for real s, t.
        let g = grid_1d(12.0, 256);
        let p = gaussian_pair(&g);
        let k0 = interaction_k(&p);
        let mut q = p.clone();
        q.scale(2.0, 3.0);
        assert!((interaction_k(&q) - 12.0 * k0).abs() < 1e-10 * k0.abs());
    }

    #[test]
    fn energies_on_zero_pair() {
        let g = grid_1d(8.0, 64);
        let z = FieldPair::zeros(g);
        let params = ModelParams::new(1, 1.0, Potential::None).unwrap();
        assert_eq!(energy_i(&z, &params), 0.0);
        assert_eq!(energy_e(&z, &params), 0.0);
        assert_eq!(mass_q(&z), 0.0);
        assert_eq!(pohozaev_b(&z, &params), 0.0);
        assert_eq!(axial_virial_n1(&z, &params), 0.0);
        assert_eq!(virial_moment(&z, &params), 0.0);
    }

    #[test]
    fn gaussian_pair_v1_closed_forms() {
        // For u = v = e^{-x²/2} in 1D with V1:
        //   ‖u‖² = √π, ‖∇u‖² = √π/2, ∫x²|u|² = √π/2, K = sqrt(2π/3).
        let g = grid_1d(16.0, 1024);
        let p = gaussian_pair(&g);
        let params = ModelParams::new(1, 2.0, Potential::V1).unwrap();
        let sp = PI.sqrt();
        let ku = kinetic_u(&p);
        let kv = kinetic_v(&p);
        let pot = potential_term(&p, &params);
        let k = interaction_k(&p);
        assert!((ku - sp / 2.0).abs() < 1e-9);
        assert!((kv - sp / 2.0).abs() < 1e-9);
        assert!((pot - sp).abs() < 1e-9);
        let i = energy_i(&p, &params);
        let expect = 0.5 * (ku + 2.0 * kv) + 0.5 * pot - 0.5 * k;
        assert!((i - expect).abs() < 1e-12);
        let e = energy_e(&p, &params);
        assert!((e - (ku + 2.0 * kv + pot - k)).abs() < 1e-12);
    }

    #[test]
    fn report_internally_consistent() {
        let g = grid_1d(14.0, 512);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = FieldPair::from_fn(
            g.clone(),
            |x| {
                Complex64::new(
                    (-0.4 * x[0] * x[0]).exp() * (1.0 + 0.1 * (x[0]).sin()),
                    0.05 * (-0.3 * x[0] * x[0]).exp(),
                )
            },
            |x| Complex64::new((-0.6 * x[0] * x[0]).exp(), 0.0),
        );
        let _ = rng.gen::<f64>();
        let params = ModelParams::new(1, 0.7, Potential::V1).unwrap();
        let r = FunctionalReport::compute(&p, &params);
        let i_parts = 0.5 * (r.kinetic_u + params.kappa * r.kinetic_v) + 0.5 * r.potential
            - 0.5 * r.k_value;
        assert!((r.i_value - i_parts).abs() <= 1e-12 * r.i_value.abs().max(1.0));
        let j = r.to_json();
        assert!(j.get("energy.I").is_some());
        assert!(j.get("virial.moment").is_some());
    }

    #[test]
    fn gauge_and_translation_invariance() {
        let g = grid_1d(12.0, 256);
        let p = FieldPair::from_fn(
            g.clone(),
            |x| Complex64::new((-0.5 * x[0] * x[0]).exp(), 0.2 * (-0.4 * x[0] * x[0]).exp()),
            |x| Complex64::new(0.8 * (-0.3 * x[0] * x[0]).exp(), 0.0),
        );
        let params = ModelParams::new(1, 1.3, Potential::None).unwrap();
        let th = 0.7f64;
        let gauged = FieldPair::new(
            g.clone(),
            p.u.iter().map(|c| c * Complex64::new(0.0, th).exp()).collect(),
            p.v.iter().map(|c| c * Complex64::new(0.0, 2.0 * th).exp()).collect(),
        )
        .unwrap();
        for (f, name) in [
            (energy_i(&p, &params) - energy_i(&gauged, &params), "I"),
            (energy_e(&p, &params) - energy_e(&gauged, &params), "E"),
            (interaction_k(&p) - interaction_k(&gauged), "K"),
            (mass_q(&p) - mass_q(&gauged), "Q"),
            (pohozaev_b(&p, &params) - pohozaev_b(&gauged, &params), "B"),
            (axial_virial_n1(&p, &params) - axial_virial_n1(&gauged, &params), "N1"),
        ] {
            assert!(f.abs() < 1e-12, "{name} not gauge invariant: {f}");
        }

        // Periodic shift along x_n leaves potential-free functionals unchanged.
        let shifted = FieldPair::new(
            g.clone(),
            spectral::axial_shift(&p.u, &g, 31),
            spectral::axial_shift(&p.v, &g, 31),
        )
        .unwrap();
        assert!((energy_i(&p, &params) - energy_i(&shifted, &params)).abs() < 1e-10);
        assert!((interaction_k(&p) - interaction_k(&shifted)).abs() < 1e-10);
    }

    #[test]
    fn virial_rhs_requires_half_kappa() {
        let g = grid_1d(8.0, 64);
        let p = gaussian_pair(&g);
        let bad = ModelParams::new(1, 1.0, Potential::None).unwrap();
        assert!(matches!(
            virial_rhs(&p, &bad, 0.0),
            Err(Error::KappaRestriction { .. })
        ));
        let ok = ModelParams::new(1, 0.5, Potential::None).unwrap();
        // Moment oracle: ‖xu‖² + 2‖xv‖² for κ = 1/2.
        let m = virial_moment(&p, &ok);
        let sp = PI.sqrt();
        assert!((m - (sp / 2.0 + 2.0 * sp / 2.0)).abs() < 1e-9);
        assert!(virial_rhs(&p, &ok, energy_e(&p, &ok)).is_ok());
    }

    #[test]
    fn heisenberg_gaussian_saturates() {
        let g = grid_1d(16.0, 1024);
        let f: Vec<Complex64> = g.axes[0]
            .coords
            .iter()
            .map(|&x| Complex64::new((-0.5 * x * x).exp(), 0.0))
            .collect();
        let (lhs, rhs) = heisenberg_check(&f, &g, 1).unwrap();
        assert!((lhs - rhs).abs() < 1e-8 * lhs, "lhs {lhs} rhs {rhs}");

        // Dilated Gaussian still saturates; random smooth field obeys it.
        let f2: Vec<Complex64> = g.axes[0]
            .coords
            .iter()
            .map(|&x| Complex64::new((-0.9 * x * x).exp(), 0.0))
            .collect();
        let (l2, r2) = heisenberg_check(&f2, &g, 1).unwrap();
        assert!(l2 <= r2 * (1.0 + 1e-8));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (a, b, c) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let f3: Vec<Complex64> = g.axes[0]
                .coords
                .iter()
                .map(|&x| {
                    Complex64::new(
                        (1.0 + 0.5 * a * (b * x).sin()) * (-(0.2 + 0.5 * c) * x * x).exp(),
                        0.0,
                    )
                })
                .collect();
            let (l3, r3) = heisenberg_check(&f3, &g, 1).unwrap();
            assert!(l3 <= r3 * (1.0 + 1e-10), "random field violates: {l3} > {r3}");
        }
    }

    #[test]
    fn rearrangement_preserves_lp_and_dirichlet() {
        let g = grid_1d(10.0, 128);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let p = FieldPair::new(
                g.clone(),
                (0..g.len())
                    .map(|_| Complex64::new(rng.gen::<f64>() - 0.3, rng.gen::<f64>() - 0.5))
                    .collect(),
                (0..g.len())
                    .map(|_| Complex64::new(rng.gen::<f64>(), 0.0))
                    .collect(),
            )
            .unwrap();
            let r = steiner_rearrange_axial(&p);
            let w = g.flat_weights();
            for pw in [1i32, 2, 3] {
                let lp = |f: &[Complex64]| -> f64 {
                    f.iter().zip(&w).map(|(c, wi)| c.norm().powi(pw) * wi).sum()
                };
                assert!((lp(&p.u) - lp(&r.u)).abs() < 1e-12 * lp(&p.u).max(1.0));
                assert!((lp(&p.v) - lp(&r.v)).abs() < 1e-12 * lp(&p.v).max(1.0));
            }
            // Axial Dirichlet energy does not increase (organ-pipe optimality
            // on the cycle), up to roundoff.
            let du = spectral::axial_grad_norm_sq(&r.u, &g).unwrap();
            let du0 = spectral::axial_grad_norm_sq(&p.u, &g).unwrap();
            assert!(du <= du0 * (1.0 + 1e-10) + 1e-12, "{du} > {du0}");
        }
    }

    #[test]
    fn rearrangement_fixed_point() {
        let g = grid_1d(10.0, 128);
        // Even, nonincreasing in |x|: already rearranged.
        let p = FieldPair::from_fn(
            g.clone(),
            |x| Complex64::new((-0.5 * x[0] * x[0]).exp(), 0.0),
            |x| Complex64::new(1.0 / (1.0 + x[0] * x[0]), 0.0),
        );
        let r = steiner_rearrange_axial(&p);
        for i in 0..g.len() {
            assert!((r.u[i] - p.u[i]).norm() < 1e-14);
            assert!((r.v[i] - p.v[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn gn_quotient_dilation_invariant() {
        let g = grid_1d(14.0, 512);
        let p = FieldPair::from_fn(
            g.clone(),
            |x| Complex64::new((-0.5 * x[0] * x[0]).exp(), 0.0),
            |x| Complex64::new(0.7 * (-0.4 * x[0] * x[0]).exp(), 0.0),
        );
        let params = ModelParams::new(1, 2.0, Potential::None).unwrap();
        let j0 = gn_quotient(&p, &params).unwrap();
        for &lam in &[0.5f64, 2.0] {
            // Mass-preserving dilation realized by rescaling the grid.
            let gl = Arc::new(
                make_grid(
                    Geometry::Cartesian,
                    vec![AxisSpec::periodic("xn", 14.0 / lam, 512)],
                    None,
                )
                .unwrap(),
            );
            let s = lam.powf(0.5); // λ^{n/2} with n = 1
            let pl = FieldPair::new(
                gl.clone(),
                p.u.iter().map(|c| c * s).collect(),
                p.v.iter().map(|c| c * s).collect(),
            )
            .unwrap();
            let jl = gn_quotient(&pl, &params).unwrap();
            assert!((jl - j0).abs() < 1e-8 * j0, "λ={lam}: {jl} vs {j0}");
        }
        // Nonpositive K is rejected.
        let neg = FieldPair::new(
            g.clone(),
            p.u.clone(),
            p.v.iter().map(|c| -c).collect(),
        )
        .unwrap();
        assert!(matches!(gn_quotient(&neg, &params), Err(Error::NonPositiveK(_))));
    }
}
