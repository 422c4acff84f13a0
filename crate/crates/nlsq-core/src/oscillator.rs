//! Transverse oscillator spectra, Hermite-type bases, and the lowest
//! eigenspace projections.
//!
//! The discrete operator `-κΔ_{x'} + |x'|²` is assembled on the transverse
//! axis (a periodic full line for `d = 1`, the radial axis otherwise) and its
//! lowest eigenpairs are extracted by shifted inverse iteration with full
//! re-orthogonalization.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::grid::{AxisKind, GridSpec};
use crate::linalg::{matvec, Lu};
use crate::{Error, Result};

/// A 1D operator `κ(-Δ_axis) + diag(pot)` in its weight-symmetrized form.
pub struct AxisOperator {
    pub n: usize,
    /// Row-major symmetric matrix acting on `ψ = wsqrt ⊙ φ`.
    pub sym: Vec<f64>,
    /// Square root of the bare node weight (`r^{(d-1)/2}`, or 1 on periodic axes).
    pub wsqrt: Vec<f64>,
    /// Full quadrature weights of the axis (spacing and surface factor included).
    pub quad: Vec<f64>,
}

/// Assemble the symmetrized dense operator for one axis of a grid.
/// `pot[i]` is the potential sampled on the axis nodes.
pub fn assemble_axis_operator(
    grid: &GridSpec,
    axis: usize,
    kappa: f64,
    pot: &[f64],
) -> AxisOperator {
    let a = &grid.axes[axis];
    let m = a.spec.count;
    assert_eq!(pot.len(), m);
    match a.spec.kind {
        AxisKind::Periodic => {
            // Circulant spectral (-∂²): first row from the multiplier k².
            let mut row = vec![0.0f64; m];
            for (d, r) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for (k_idx, &k) in a.wavenumbers.iter().enumerate() {
                    let th = 2.0 * std::f64::consts::PI * k_idx as f64 * d as f64 / m as f64;
                    s += k * k * th.cos();
                }
                *r = s / m as f64;
            }
            let mut sym = vec![0.0f64; m * m];
            for i in 0..m {
                for j in 0..m {
                    let d = (i + m - j) % m;
                    sym[i * m + j] = kappa * row[d];
                }
                sym[i * m + i] += pot[i];
            }
            AxisOperator { n: m, sym, wsqrt: vec![1.0; m], quad: a.weights.clone() }
        }
        AxisKind::Radial { transverse_dim } => {
            let d = transverse_dim as i32;
            let h = a.spacing;
            let face: Vec<f64> = (0..=m).map(|i| (i as f64 * h).powi(d - 1)).collect();
            let w: Vec<f64> = a.coords.iter().map(|&r| r.powi(d - 1)).collect();
            let wsqrt: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
            // -Δ_r in flux form: A φ_i = -(face_{i+1}(φ_{i+1}-φ_i) - face_i(φ_i-φ_{i-1})) / (w_i h²)
            // with zero inner flux (parity) and zero outer value.
            let mut sym = vec![0.0f64; m * m];
            for i in 0..m {
                let diag = (face[i + 1] + if i > 0 { face[i] } else { 0.0 }) / (w[i] * h * h);
                sym[i * m + i] = kappa * diag + pot[i];
                if i + 1 < m {
                    let off = -face[i + 1] / (h * h) / (wsqrt[i] * wsqrt[i + 1]);
                    sym[i * m + (i + 1)] = kappa * off;
                    sym[(i + 1) * m + i] = kappa * off;
                }
            }
            AxisOperator { n: m, sym, wsqrt, quad: a.weights.clone() }
        }
    }
}

/// Lowest `j_count` eigenpairs of a dense symmetric matrix by shifted inverse
/// iteration with full re-orthogonalization against converged vectors.
pub fn lowest_eigenpairs_sym(
    sym: &[f64],
    n: usize,
    j_count: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    assert!(j_count >= 1 && j_count <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f73_6369);
    let mut values = Vec::with_capacity(j_count);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(j_count);

    // A crude lower bound for the first shift.
    let mut sigma = {
        let min_diag = (0..n).map(|i| sym[i * n + i]).fold(f64::INFINITY, f64::min);
        let max_off = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| sym[i * n + j].abs())
                    .sum::<f64>()
            })
            .fold(0.0f64, f64::max);
        min_diag - max_off
    };

    for mode in 0..j_count {
        let mut shifted = sym.to_vec();
        for i in 0..n {
            shifted[i * n + i] -= sigma;
        }
        let mut lu = Lu::factor(&shifted, n)
            .or_else(|_| {
                // Shift landed on an eigenvalue: nudge and refactor.
                let mut s2 = sym.to_vec();
                for i in 0..n {
                    s2[i * n + i] -= sigma - 1e-8 * (1.0 + sigma.abs());
                }
                Lu::factor(&s2, n)
            })?;

        let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        orthonormalize(&mut x, &vectors);
        let mut rho = 0.0;
        let mut converged = false;
        let mut refactors = 0;
        for iter in 0..400 {
            let mut y = lu.solve(&x);
            orthonormalize(&mut y, &vectors);
            x = y;
            let ax = matvec(sym, n, &x);
            rho = dot(&ax, &x);
            let res: f64 = ax
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - rho * b) * (a - rho * b))
                .sum::<f64>()
                .sqrt();
            if res < 1e-11 * (1.0 + rho.abs()) {
                converged = true;
                break;
            }
            // Rayleigh-quotient refactoring accelerates stalled iterations.
            if iter > 0 && iter % 25 == 0 && refactors < 8 {
                let mut s2 = sym.to_vec();
                let shift = rho - 1e-10 * (1.0 + rho.abs());
                for i in 0..n {
                    s2[i * n + i] -= shift;
                }
                if let Ok(f) = Lu::factor(&s2, n) {
                    lu = f;
                    refactors += 1;
                }
            }
        }
        if !converged {
            let ax = matvec(sym, n, &x);
            let res: f64 = ax
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - rho * b) * (a - rho * b))
                .sum::<f64>()
                .sqrt();
            if res > 1e-8 * (1.0 + rho.abs()) {
                return Err(Error::EigenNoConvergence { mode, residual: res });
            }
        }
        sigma = rho + 1e-6 * (1.0 + rho.abs());
        values.push(rho);
        vectors.push(x);
    }

    // The shift walk visits eigenvalues in order, but guard the invariant.
    let mut order: Vec<usize> = (0..j_count).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let vectors_sorted: Vec<Vec<f64>> = order.iter().map(|&i| vectors[i].clone()).collect();
    Ok((values_sorted, vectors_sorted))
}

fn orthonormalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(x, b);
        for (xi, bi) in x.iter_mut().zip(b) {
            *xi -= c * bi;
        }
    }
    // Second pass for numerical orthogonality.
    for b in basis {
        let c = dot(x, b);
        for (xi, bi) in x.iter_mut().zip(b) {
            *xi -= c * bi;
        }
    }
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        for xi in x.iter_mut() {
            *xi /= norm;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigen-decomposition of the transverse operator `-κΔ_{x'} + |x'|²`.
pub struct OscillatorBasis {
    pub kappa: f64,
    pub transverse_dim: usize,
    pub eigenvalues: Vec<f64>,
    /// Quadrature-normalized eigenvectors on the transverse axis.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Full quadrature weights of the transverse axis.
    pub axis_weights: Vec<f64>,
    pub axis_coords: Vec<f64>,
}

impl OscillatorBasis {
    pub fn ground(&self) -> &[f64] {
        &self.eigenvectors[0]
    }

    pub fn l0(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Lowest `j_count` eigenpairs of `-κΔ_{x'} + |x'|²` on the transverse axis
/// (axis 0) of `grid`. `d` must match the axis: 1 for a periodic full line,
/// the declared transverse dimension for a radial axis.
pub fn transverse_spectrum(
    kappa: f64,
    d: usize,
    grid: &GridSpec,
    j_count: usize,
) -> Result<OscillatorBasis> {
    if j_count < 1 {
        return Err(Error::Unsupported("need at least one eigenpair".into()));
    }
    let axis = 0;
    match grid.axes[axis].spec.kind {
        AxisKind::Periodic => {
            if d != 1 {
                return Err(Error::Unsupported(format!(
                    "periodic transverse axis represents d = 1, got d = {d}"
                )));
            }
            if grid.ndim() == 2 && grid.axes[1].spec.kind != AxisKind::Periodic {
                return Err(Error::Unsupported("malformed grid".into()));
            }
        }
        AxisKind::Radial { transverse_dim } => {
            if transverse_dim != d {
                return Err(Error::Unsupported(format!(
                    "radial axis has d = {transverse_dim}, requested {d}"
                )));
            }
        }
    }
    let pot: Vec<f64> = grid.axes[axis].coords.iter().map(|&x| x * x).collect();
    let op = assemble_axis_operator(grid, axis, kappa, &pot);
    let (values, raw) = lowest_eigenpairs_sym(&op.sym, op.n, j_count, 17)?;

    let mut eigenvectors = Vec::with_capacity(j_count);
    for (j, psi) in raw.iter().enumerate() {
        // Back to quadrature space and normalize under the axis weights.
        let mut phi: Vec<f64> = psi.iter().zip(&op.wsqrt).map(|(p, w)| p / w).collect();
        let nrm: f64 = phi
            .iter()
            .zip(&op.quad)
            .map(|(p, w)| p * p * w)
            .sum::<f64>()
            .sqrt();
        for p in phi.iter_mut() {
            *p /= nrm;
        }
        // Sign convention: ground mode positive, higher modes positive at the
        // first node whose amplitude is nonnegligible.
        let max = phi.iter().fold(0.0f64, |m, &p| m.max(p.abs()));
        if j == 0 {
            let mean: f64 = phi.iter().zip(&op.quad).map(|(p, w)| p * w).sum();
            if mean < 0.0 {
                phi.iter_mut().for_each(|p| *p = -*p);
            }
        } else {
            let first = phi.iter().find(|p| p.abs() > 1e-9 * max);
            if matches!(first, Some(&p) if p < 0.0) {
                phi.iter_mut().for_each(|p| *p = -*p);
            }
        }
        eigenvectors.push(phi);
    }

    // Ground mode must be strictly positive on the interior and resolved by
    // the axis extent.
    let g = &eigenvectors[0];
    let gmax = g.iter().fold(0.0f64, |m, &p| m.max(p.abs()));
    if g.iter().any(|&p| p <= 0.0) {
        // Tiny negative tail values indicate under-resolution as well.
        let worst = g.iter().cloned().fold(f64::INFINITY, f64::min);
        if worst < -1e-12 * gmax {
            return Err(Error::UnderResolved(worst / gmax));
        }
    }
    let boundary = match grid.axes[axis].spec.kind {
        AxisKind::Periodic => g[0].abs().max(g[g.len() - 1].abs()),
        AxisKind::Radial { .. } => g[g.len() - 1].abs(),
    };
    if boundary > 1e-10 * gmax {
        return Err(Error::UnderResolved(boundary / gmax));
    }

    Ok(OscillatorBasis {
        kappa,
        transverse_dim: d,
        eigenvalues: values,
        eigenvectors,
        axis_weights: op.quad,
        axis_coords: grid.axes[axis].coords.clone(),
    })
}

/// Project a field onto the ground transverse mode: returns the axial profile
/// `φ̃(x_n) = ⟨field(·, x_n), Ψ0⟩` and the remainder `field - φ̃ ⊗ Ψ0`.
pub fn project_lowest(
    field: &[Complex64],
    basis: &OscillatorBasis,
    grid: &GridSpec,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    expand_mode(field, basis, grid, 0)
}

/// Same as `project_lowest` for an arbitrary mode index.
pub fn expand_mode(
    field: &[Complex64],
    basis: &OscillatorBasis,
    grid: &GridSpec,
    mode: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if grid.ndim() != 2 {
        return Err(Error::Unsupported("projection needs a transverse × axial grid".into()));
    }
    if field.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), found: field.len() });
    }
    let mt = grid.axes[0].spec.count;
    let ma = grid.axes[1].spec.count;
    if basis.axis_weights.len() != mt {
        return Err(Error::Unsupported("basis and grid transverse axes differ".into()));
    }
    let e = &basis.eigenvectors[mode];
    let mut profile = vec![Complex64::default(); ma];
    for i in 0..mt {
        let c = e[i] * basis.axis_weights[i];
        for j in 0..ma {
            profile[j] += field[i * ma + j] * c;
        }
    }
    let mut remainder = field.to_vec();
    for i in 0..mt {
        for j in 0..ma {
            remainder[i * ma + j] -= profile[j] * e[i];
        }
    }
    Ok((profile, remainder))
}

/// Quadrature overlap constants `s1 = ∫ Ψ0² Φ0 dx'` and `s2 = ∫ Φ0³ dx'`.
pub fn overlap_constants(basis_u: &OscillatorBasis, basis_v: &OscillatorBasis) -> (f64, f64) {
    let p = basis_u.ground();
    let q = basis_v.ground();
    let w = &basis_u.axis_weights;
    let s1: f64 = p.iter().zip(q).zip(w).map(|((a, b), wi)| a * a * b * wi).sum();
    let s2: f64 = q.iter().zip(w).map(|(b, wi)| b * b * b * wi).sum();
    (s1, s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, AxisSpec, Geometry};
    use std::f64::consts::PI;

    fn line_grid(l: f64, m: usize) -> GridSpec {
        make_grid(Geometry::Cartesian, vec![AxisSpec::periodic("x1", l, m)], None).unwrap()
    }

    fn radial_grid(d: usize, l: f64, m: usize) -> GridSpec {
        make_grid(
            Geometry::Cylindrical,
            vec![AxisSpec::radial(l, m, d), AxisSpec::periodic("xn", 4.0, 8)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_ladder() {
        let g = line_grid(12.0, 256);
        let b = transverse_spectrum(1.0, 1, &g, 5).unwrap();
        for (j, &l) in b.eigenvalues.iter().enumerate() {
            let expect = 2.0 * j as f64 + 1.0;
            assert!((l - expect).abs() < 1e-6, "l_{j} = {l}");
        }
        // Spectrum gap l1 - l0 = 2.
        assert!((b.eigenvalues[1] - b.eigenvalues[0] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn radial_ground_eigenvalue_is_d() {
        for d in 2..=4usize {
            let g = radial_grid(d, 12.0, 360);
            let b = transverse_spectrum(1.0, d, &g, 2).unwrap();
            assert!((b.l0() - d as f64).abs() < 1e-6, "d={d} l0={}", b.l0());
        }
    }

    #[test]
    fn kappa_scaling_of_ground_eigenvalue() {
        // m0 = sqrt(kappa) * l0, checked for kappa in {0.25, 0.5, 1, 2, 4}.
        let g = radial_grid(2, 14.0, 420);
        let l0 = transverse_spectrum(1.0, 2, &g, 1).unwrap().l0();
        for &kappa in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let m0 = transverse_spectrum(kappa, 2, &g, 1).unwrap().l0();
            assert!(
                (m0 / l0 - kappa.sqrt()).abs() < 1e-6,
                "kappa={kappa}: m0/l0 = {}",
                m0 / l0
            );
        }
        // kappa = 4, d = 2: m0 = 4.
        let m0 = transverse_spectrum(4.0, 2, &g, 1).unwrap().l0();
        assert!((m0 - 4.0).abs() < 1e-6);
    }

    #[test]
    fn ground_mode_matches_scaled_gaussian() {
        let kappa = 2.0;
        let g = line_grid(12.0, 512);
        let b = transverse_spectrum(kappa, 1, &g, 1).unwrap();
        // c · e^{-x²/(2√κ)}, L²-normalized.
        let s = kappa.sqrt();
        let c = (PI * s).powf(-0.25);
        for (i, &x) in b.axis_coords.iter().enumerate() {
            let expect = c * (-x * x / (2.0 * s)).exp();
            if expect > 1e-8 {
                assert!(
                    (b.eigenvectors[0][i] - expect).abs() < 1e-6,
                    "x={x}: {} vs {expect}",
                    b.eigenvectors[0][i]
                );
            }
        }
    }

    #[test]
    fn orthonormal_and_ordered() {
        let g = radial_grid(2, 12.0, 300);
        let b = transverse_spectrum(1.5, 2, &g, 6).unwrap();
        for j in 0..5 {
            assert!(b.eigenvalues[j] <= b.eigenvalues[j + 1]);
        }
        for i in 0..6 {
            let ni: f64 = b.eigenvectors[i]
                .iter()
                .zip(&b.axis_weights)
                .map(|(p, w)| p * p * w)
                .sum();
            assert!((ni - 1.0).abs() < 1e-10);
            for j in 0..i {
                let ip: f64 = b.eigenvectors[i]
                    .iter()
                    .zip(&b.eigenvectors[j])
                    .zip(&b.axis_weights)
                    .map(|((a, c), w)| a * c * w)
                    .sum();
                assert!(ip.abs() < 1e-8, "⟨e{i},e{j}⟩ = {ip}");
            }
        }
        assert!(b.eigenvectors[0].iter().all(|&p| p > 0.0));
    }

    #[test]
    fn projection_splits_mass_exactly() {
        let g = make_grid(
            Geometry::Cartesian,
            vec![AxisSpec::periodic("x1", 10.0, 128), AxisSpec::periodic("xn", 10.0, 64)],
            None,
        )
        .unwrap();
        let b = transverse_spectrum(1.0, 1, &g, 3).unwrap();
        let ma = 64;
        // field = g(x_n) Ψ0 + h(x_n) Ψ1.
        let gprof: Vec<f64> = g.axes[1].coords.iter().map(|&x| (-0.3 * x * x).exp()).collect();
        let hprof: Vec<f64> =
            g.axes[1].coords.iter().map(|&x| x * (-0.5 * x * x).exp()).collect();
        let mut field = vec![Complex64::default(); g.len()];
        for i in 0..128 {
            for j in 0..ma {
                field[i * ma + j] = Complex64::new(
                    gprof[j] * b.eigenvectors[0][i] + hprof[j] * b.eigenvectors[1][i],
                    0.0,
                );
            }
        }
        let (profile, remainder) = project_lowest(&field, &b, &g).unwrap();
        // Recovered profile equals g, remainder carries exactly the Ψ1 part.
        let ha = g.axes[1].spacing;
        let pg: f64 = profile
            .iter()
            .zip(&gprof)
            .map(|(p, q)| (p.re - q) * (p.re - q) * ha)
            .sum::<f64>()
            .sqrt();
        assert!(pg < 1e-10, "profile error {pg}");
        let mass_f = g.norm_sq(&field).unwrap();
        let mass_p: f64 = profile.iter().map(|p| p.norm_sqr() * ha).sum();
        let mass_r = g.norm_sq(&remainder).unwrap();
        assert!((mass_f - mass_p - mass_r).abs() < 1e-10 * mass_f);

        // Pure Ψ1 field projects to ~0.
        let mut f1 = vec![Complex64::default(); g.len()];
        for i in 0..128 {
            for j in 0..ma {
                f1[i * ma + j] = Complex64::new(hprof[j] * b.eigenvectors[1][i], 0.0);
            }
        }
        let (p1, r1) = project_lowest(&f1, &b, &g).unwrap();
        assert!(p1.iter().map(|p| p.norm_sqr() * ha).sum::<f64>().sqrt() < 1e-10);
        assert!((g.norm_sq(&r1).unwrap() - g.norm_sq(&f1).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn completeness_at_truncation() {
        let g = make_grid(
            Geometry::Cartesian,
            vec![AxisSpec::periodic("x1", 10.0, 128), AxisSpec::periodic("xn", 4.0, 8)],
            None,
        )
        .unwrap();
        let b = transverse_spectrum(1.0, 1, &g, 32).unwrap();
        // A smooth transverse field with a Gaussian envelope.
        let mut field = vec![Complex64::default(); g.len()];
        for (i, &x) in g.axes[0].coords.iter().enumerate() {
            let val = (0.7 * (1.3 * x).sin() + 0.4 * (0.9 * x + 0.5).cos() + 0.2 * x)
                * (-0.35 * x * x).exp();
            for j in 0..8 {
                field[i * 8 + j] = Complex64::new(val, 0.0);
            }
        }
        let mut resid = field.clone();
        for mode in 0..32 {
            let (_, r) = expand_mode(&resid, &b, &g, mode).unwrap();
            resid = r;
        }
        let err = g.norm_sq(&resid).unwrap().sqrt() / g.norm_sq(&field).unwrap().sqrt();
        assert!(err < 1e-6, "truncation error {err}");
    }

    #[test]
    fn overlap_constant_closed_form() {
        // κ=1, d=1: s1 = s2 = ∫ (π^{-1/4} e^{-x²/2})³ dx = sqrt(2/3)·π^{-1/4}.
        let g = line_grid(12.0, 512);
        let bu = transverse_spectrum(1.0, 1, &g, 1).unwrap();
        let bv = transverse_spectrum(1.0, 1, &g, 1).unwrap();
        let (s1, s2) = overlap_constants(&bu, &bv);
        let oracle = (2.0f64 / 3.0).sqrt() * PI.powf(-0.25);
        assert!((s1 - oracle).abs() < 1e-8, "s1 = {s1} vs {oracle}");
        assert!((s2 - oracle).abs() < 1e-8);

        // κ=2, d=1 symbolic Gaussian oracle:
        // Ψ0² Φ0 with widths 1 and √2: ∫ e^{-x²} e^{-x²/(2√2)} π^{-1/2} (π√2)^{-1/4} dx.
        let bv2 = transverse_spectrum(2.0, 1, &g, 1).unwrap();
        let (t1, t2) = overlap_constants(&bu, &bv2);
        let s = 2.0f64.sqrt();
        let a = 1.0 + 1.0 / (2.0 * s);
        let o1 = (PI / a).sqrt() / (PI.sqrt() * (PI * s).powf(0.25));
        // Φ0³: ∫ (π s)^{-3/4} e^{-3x²/(2s)} dx = (π s)^{-3/4} sqrt(2π s/3).
        let o2 = (PI * s).powf(-0.75) * (2.0 * PI * s / 3.0).sqrt();
        assert!((t1 - o1).abs() < 1e-8, "t1 = {t1} vs {o1}");
        assert!((t2 - o2).abs() < 1e-8, "t2 = {t2} vs {o2}");
    }
}
