//! Fast transforms and discrete differential operators.
//!
//! Periodic axes use exact Fourier multipliers; radial axes use the
//! second-order flux form of `∂_r² + (d-1)/r ∂_r`, which is self-adjoint
//! under the `r^{d-1}` quadrature weight, with an even-parity ghost at
//! `r = 0` and a zero boundary value at `r = L`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::grid::{AxisKind, GridSpec};
use crate::{Error, Result};

fn plan_cache() -> &'static Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached FFT plan for length `m`.
pub fn plan(m: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = plan_cache().lock().unwrap();
    cache
        .entry((m, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(m)
            } else {
                planner.plan_fft_forward(m)
            }
        })
        .clone()
}

/// In-place FFT along one axis of a row-major field. The inverse transform
/// includes the 1/m normalization, so forward-then-inverse is the identity.
pub fn fft_axis(field: &mut [Complex64], grid: &GridSpec, axis: usize, inverse: bool) {
    let shape = grid.shape();
    let m = shape[axis];
    let fft = plan(m, inverse);
    let scale = if inverse { 1.0 / m as f64 } else { 1.0 };

    if axis == shape.len() - 1 {
        field.par_chunks_mut(m).for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, line| {
                fft.process_with_scratch(line, scratch);
                if inverse {
                    for v in line.iter_mut() {
                        *v *= scale;
                    }
                }
            },
        );
    } else {
        // Transpose, run contiguous FFTs, transpose back.
        let m1 = shape[1];
        let mut t = transpose(field, m, m1);
        t.par_chunks_mut(m).for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, line| {
                fft.process_with_scratch(line, scratch);
                if inverse {
                    for v in line.iter_mut() {
                        *v *= scale;
                    }
                }
            },
        );
        let back = transpose(&t, m1, m);
        field.copy_from_slice(&back);
    }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::default(); src.len()];
    dst.par_chunks_mut(rows).enumerate().for_each(|(j, out)| {
        for i in 0..rows {
            out[i] = src[i * cols + j];
        }
    });
    dst
}

/// Apply the Laplacian restricted to the given axes. Periodic axes act by the
/// exact spectral multiplier `-k²`; a radial axis contributes the cylindrical
/// operator `∂_r² + (d-1)/r ∂_r` in flux form.
pub fn laplacian(field: &[Complex64], grid: &GridSpec, axes: &[usize]) -> Result<Vec<Complex64>> {
    if field.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), found: field.len() });
    }
    let mut out = vec![Complex64::default(); field.len()];
    for &axis in axes {
        match grid.axes[axis].spec.kind {
            AxisKind::Periodic => {
                let mut work = field.to_vec();
                fft_axis(&mut work, grid, axis, false);
                apply_axis_multiplier(&mut work, grid, axis, |k| -k * k);
                fft_axis(&mut work, grid, axis, true);
                for (o, w) in out.iter_mut().zip(&work) {
                    *o += w;
                }
            }
            AxisKind::Radial { .. } => {
                radial_laplacian_add(field, grid, axis, &mut out);
            }
        }
    }
    Ok(out)
}

/// Multiply the spectrum along `axis` by `f(k)`.
pub fn apply_axis_multiplier<F: Fn(f64) -> f64 + Sync>(
    field: &mut [Complex64],
    grid: &GridSpec,
    axis: usize,
    f: F,
) {
    let shape = grid.shape();
    let ks = &grid.axes[axis].wavenumbers;
    if axis == shape.len() - 1 {
        let m = shape[axis];
        field.par_chunks_mut(m).for_each(|line| {
            for (v, &k) in line.iter_mut().zip(ks) {
                *v *= f(k);
            }
        });
    } else {
        let m1 = shape[1];
        field.par_chunks_mut(m1).enumerate().for_each(|(i, line)| {
            let c = f(ks[i]);
            for v in line {
                *v *= c;
            }
        });
    }
}

fn radial_laplacian_add(field: &[Complex64], grid: &GridSpec, axis: usize, out: &mut [Complex64]) {
    assert_eq!(axis, 0, "radial axis is always axis 0");
    let a = &grid.axes[0];
    let d = match a.spec.kind {
        AxisKind::Radial { transverse_dim } => transverse_dim as i32,
        AxisKind::Periodic => unreachable!(),
    };
    let m = a.spec.count;
    let h = a.spacing;
    let m1 = grid.shape().get(1).copied().unwrap_or(1);
    // Face areas r_{i+1/2}^{d-1}; the inner face of cell 0 sits at r = 0 and
    // carries no flux (parity), the outer face at r = L sees a zero value.
    let face: Vec<f64> = (0..=m).map(|i| (i as f64 * h).powi(d - 1)).collect();
    let inv_w: Vec<f64> = a.coords.iter().map(|&r| 1.0 / (r.powi(d - 1) * h * h)).collect();

    out.par_chunks_mut(m1).enumerate().for_each(|(i, row)| {
        let up = face[i + 1];
        let dn = face[i];
        let c = inv_w[i];
        for j in 0..m1 {
            let fij = field[i * m1 + j];
            let f_up = if i + 1 < m { field[(i + 1) * m1 + j] } else { Complex64::default() };
            let flux_up = up * (f_up - fij);
            let flux_dn = if i > 0 { dn * (fij - field[(i - 1) * m1 + j]) } else { Complex64::default() };
            row[j] += c * (flux_up - flux_dn);
        }
    });
}

/// `Re ⟨-Δ_axes f, f⟩`: the discrete Dirichlet form, consistent with
/// `laplacian` so that energies and Euler-Lagrange residuals agree exactly.
pub fn dirichlet_form(field: &[Complex64], grid: &GridSpec, axes: &[usize]) -> Result<f64> {
    let lap = laplacian(field, grid, axes)?;
    let ip = grid.inner(&lap, field)?;
    Ok(-ip.re)
}

/// Kinetic seminorm along every axis: `‖∇f‖²` under the discrete form.
pub fn grad_norm_sq(field: &[Complex64], grid: &GridSpec) -> Result<f64> {
    let axes: Vec<usize> = (0..grid.ndim()).collect();
    dirichlet_form(field, grid, &axes)
}

/// `‖∂_{x_n} f‖²` (axial axis only).
pub fn axial_grad_norm_sq(field: &[Complex64], grid: &GridSpec) -> Result<f64> {
    dirichlet_form(field, grid, &[grid.axial_axis()])
}

/// `‖∇_{x'} f‖²` (all non-axial axes; zero on 1D grids).
pub fn transverse_grad_norm_sq(field: &[Complex64], grid: &GridSpec) -> Result<f64> {
    let ax = grid.axial_axis();
    if ax == 0 {
        return Ok(0.0);
    }
    dirichlet_form(field, grid, &[0])
}

/// Circularly shift the field along the axial axis by `offset` nodes.
pub fn axial_shift(field: &[Complex64], grid: &GridSpec, offset: isize) -> Vec<Complex64> {
    let shape = grid.shape();
    let m = *shape.last().unwrap();
    let rows = field.len() / m;
    let off = offset.rem_euclid(m as isize) as usize;
    let mut out = vec![Complex64::default(); field.len()];
    for r in 0..rows {
        let src = &field[r * m..(r + 1) * m];
        let dst = &mut out[r * m..(r + 1) * m];
        for j in 0..m {
            dst[(j + off) % m] = src[j];
        }
    }
    out
}

/// Node offset that moves the circular centroid of `|f|²` (along `x_n`)
/// to the origin.
pub fn axial_centering_offset(field: &[Complex64], grid: &GridSpec) -> isize {
    let shape = grid.shape();
    let m = *shape.last().unwrap();
    let rows = field.len() / m;
    // Circular mean: angle of Σ |f|² e^{iθ_j}, θ_j = π (x_j + L)/L.
    let mut acc = Complex64::default();
    for r in 0..rows {
        for j in 0..m {
            let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            acc += Complex64::new(0.0, th).exp() * field[r * m + j].norm_sqr();
        }
    }
    if acc.norm() < 1e-300 {
        return 0;
    }
    let mean = acc.arg().rem_euclid(2.0 * std::f64::consts::PI);
    let jc = (mean / (2.0 * std::f64::consts::PI) * m as f64).round() as isize;
    // Move node jc to the origin node (index m/2 on [-L, L)).
    (m as isize / 2) - jc
}

/// Largest `|f|` on the boundary nodes relative to the global maximum.
/// Used for the periodic-truncation warning and the dynamics abort guard.
pub fn boundary_amplitude_ratio(field: &[Complex64], grid: &GridSpec) -> f64 {
    let shape = grid.shape();
    let max = field.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let mut b = 0.0f64;
    match shape.len() {
        1 => {
            let m = shape[0];
            b = b.max(field[0].norm()).max(field[m - 1].norm()).max(field[m / 2].norm());
        }
        2 => {
            let (m0, m1) = (shape[0], shape[1]);
            for i in 0..m0 {
                b = b.max(field[i * m1].norm()).max(field[i * m1 + m1 - 1].norm());
            }
            for j in 0..m1 {
                b = b.max(field[j].norm()).max(field[(m0 - 1) * m1 + j].norm());
            }
        }
        _ => unreachable!(),
    }
    b / max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, AxisSpec, Geometry};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid_1d(l: f64, m: usize) -> GridSpec {
        make_grid(Geometry::Cartesian, vec![AxisSpec::periodic("xn", l, m)], None).unwrap()
    }

    #[test]
    fn fourier_mode_is_laplacian_eigenfunction() {
        let g = grid_1d(8.0, 64);
        let k = g.axes[0].wavenumbers[3];
        let f: Vec<Complex64> = g.axes[0]
            .coords
            .iter()
            .map(|&x| (Complex64::i() * k * x).exp())
            .collect();
        let lap = laplacian(&f, &g, &[0]).unwrap();
        for (l, v) in lap.iter().zip(&f) {
            assert!((l - (-k * k) * v).norm() < 1e-10);
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid_1d(8.0, 64);
        let f = vec![Complex64::new(2.5, -1.0); g.len()];
        let lap = laplacian(&f, &g, &[0]).unwrap();
        assert!(lap.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn cylindrical_laplacian_gaussian_oracle() {
        // Symbolic oracle for d=2: (∂_r² + (1/r)∂_r) e^{-r²/2} = (r²-2)e^{-r²/2}.
        let g = make_grid(
            Geometry::Cylindrical,
            vec![AxisSpec::radial(10.0, 400, 2), AxisSpec::periodic("xn", 4.0, 8)],
            None,
        )
        .unwrap();
        let mut f = Vec::with_capacity(g.len());
        for &r in &g.axes[0].coords {
            for _ in 0..8 {
                f.push(Complex64::new((-0.5 * r * r).exp(), 0.0));
            }
        }
        let lap = laplacian(&f, &g, &[0]).unwrap();
        let h = g.axes[0].spacing;
        for (i, &r) in g.axes[0].coords.iter().enumerate() {
            if r > 8.0 {
                continue; // tail below quadrature noise
            }
            let expect = (r * r - 2.0) * (-0.5 * r * r).exp();
            let got = lap[i * 8].re;
            assert!(
                (got - expect).abs() < 8.0 * h * h,
                "r={r} got {got} expect {expect}"
            );
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = grid_1d(6.0, 256);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f: Vec<Complex64> = (0..g.len())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let mut w = f.clone();
        fft_axis(&mut w, &g, 0, false);
        // Parseval: physical-space L² equals coefficient-space L² (with h·m scaling).
        let phys = g.norm_sq(&f).unwrap();
        let h = g.axes[0].spacing;
        let spec: f64 = w.iter().map(|v| v.norm_sqr()).sum::<f64>() * h / g.len() as f64;
        assert!((phys - spec).abs() < 1e-12 * phys);
        fft_axis(&mut w, &g, 0, true);
        let err: f64 = w
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-12 * phys.sqrt());
    }

    #[test]
    fn dirichlet_form_nonnegative_hermitian() {
        // Re ⟨Δf, f⟩ ≤ 0 and Im ⟨Δf, f⟩ ≈ 0 for random fields on both geometries.
        let g2 = make_grid(
            Geometry::Cylindrical,
            vec![AxisSpec::radial(8.0, 64, 3), AxisSpec::periodic("xn", 8.0, 64)],
            None,
        )
        .unwrap();
        let g1 = grid_1d(8.0, 128);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let g = if trial % 2 == 0 { &g1 } else { &g2 };
            let f: Vec<Complex64> = (0..g.len())
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let axes: Vec<usize> = (0..g.ndim()).collect();
            let lap = laplacian(&f, g, &axes).unwrap();
            let ip = g.inner(&lap, &f).unwrap();
            let scale = g.norm_sq(&f).unwrap();
            assert!(ip.re <= 1e-10 * scale, "Re⟨Δf,f⟩ = {} > 0", ip.re);
            assert!(ip.im.abs() < 1e-10 * scale.max(1.0), "Im⟨Δf,f⟩ = {}", ip.im);
        }
    }

    #[test]
    fn axial_shift_and_centering() {
        let g = grid_1d(8.0, 128);
        let f: Vec<Complex64> = g.axes[0]
            .coords
            .iter()
            .map(|&x| Complex64::new((-(x - 2.0) * (x - 2.0)).exp(), 0.0))
            .collect();
        let off = axial_centering_offset(&f, &g);
        let shifted = axial_shift(&f, &g, off);
        let center = g.axes[0].coords.iter().position(|&x| x.abs() < 1e-12).unwrap();
        let peak = shifted
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, center);
    }
}
