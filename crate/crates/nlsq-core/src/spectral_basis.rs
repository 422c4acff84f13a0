//! Separable eigenbasis of the linear operator `-c Δ + V` for one component.
//!
//! Every axis contributes either an exact Fourier diagonalization (periodic
//! axis with no potential on it) or a dense eigenbasis of the 1D operator
//! (radial axes, and periodic axes carrying a quadratic potential).  The
//! joint basis diagonalizes the full operator, so the linear propagator is
//! exactly unitary per component and shifted inverses are one multiplier.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::functionals::ModelParams;
use crate::grid::{AxisKind, GridSpec};
use crate::oscillator::assemble_axis_operator;
use crate::spectral::fft_axis;
use crate::{Error, Result};

enum AxisBasis {
    Fourier {
        /// Eigenvalue per wavenumber slot: `c k²`.
        eigs: Vec<f64>,
    },
    Dense {
        n: usize,
        /// Forward transform: row k holds `φ_k[i] · quad[i]`.
        fwd: Vec<f64>,
        /// Backward transform: row i holds `φ_k[i]` for all k.
        bwd: Vec<f64>,
        eigs: Vec<f64>,
    },
}

/// Eigen-structure of `-c Δ + V` on a grid, for one field component.
pub struct ComponentBasis {
    axes: Vec<AxisBasis>,
    shape: Vec<usize>,
}

impl ComponentBasis {
    /// `c` is the diffusion coefficient of the component (1 for u, κ for v).
    pub fn prepare(params: &ModelParams, grid: &GridSpec, c: f64) -> Result<Self> {
        let mut axes = Vec::with_capacity(grid.ndim());
        for axis in 0..grid.ndim() {
            let pot = params.axis_potential(grid, axis);
            let has_pot = pot.iter().any(|&p| p != 0.0);
            let periodic = matches!(grid.axes[axis].spec.kind, AxisKind::Periodic);
            if periodic && !has_pot {
                let eigs = grid.axes[axis].wavenumbers.iter().map(|&k| c * k * k).collect();
                axes.push(AxisBasis::Fourier { eigs });
            } else {
                let op = assemble_axis_operator(grid, axis, c, &pot);
                let n = op.n;
                let mat = DMatrix::from_row_slice(n, n, &op.sym);
                let eig = SymmetricEigen::new(mat);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
                let mut eigs = Vec::with_capacity(n);
                let mut fwd = vec![0.0f64; n * n];
                let mut bwd = vec![0.0f64; n * n];
                for (slot, &k) in order.iter().enumerate() {
                    eigs.push(eig.eigenvalues[k]);
                    let col = eig.eigenvectors.column(k);
                    // Quadrature-space eigenvector and its dual row.
                    let mut phi: Vec<f64> = (0..n).map(|i| col[i] / op.wsqrt[i]).collect();
                    let nrm: f64 = phi
                        .iter()
                        .zip(&op.quad)
                        .map(|(p, w)| p * p * w)
                        .sum::<f64>()
                        .sqrt();
                    phi.iter_mut().for_each(|p| *p /= nrm);
                    for i in 0..n {
                        fwd[slot * n + i] = phi[i] * op.quad[i];
                        bwd[i * n + slot] = phi[i];
                    }
                }
                if eigs[0].is_nan() {
                    return Err(Error::SolverAbort("symmetric eigensolve produced NaN".into()));
                }
                axes.push(AxisBasis::Dense { n, fwd, bwd, eigs });
            }
        }
        Ok(ComponentBasis { axes, shape: grid.shape() })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| match a {
                AxisBasis::Fourier { eigs } => eigs.iter().cloned().fold(f64::INFINITY, f64::min),
                AxisBasis::Dense { eigs, .. } => eigs[0],
            })
            .sum()
    }

    fn to_coeffs(&self, field: &mut Vec<Complex64>, grid: &GridSpec) {
        for (axis, ab) in self.axes.iter().enumerate() {
            match ab {
                AxisBasis::Fourier { .. } => fft_axis(field, grid, axis, false),
                AxisBasis::Dense { n, fwd, .. } => {
                    *field = dense_axis_apply(field, &self.shape, axis, fwd, *n);
                }
            }
        }
    }

    fn from_coeffs(&self, field: &mut Vec<Complex64>, grid: &GridSpec) {
        for (axis, ab) in self.axes.iter().enumerate() {
            match ab {
                AxisBasis::Fourier { .. } => fft_axis(field, grid, axis, true),
                AxisBasis::Dense { n, bwd, .. } => {
                    *field = dense_axis_apply(field, &self.shape, axis, bwd, *n);
                }
            }
        }
    }

    fn axis_eigs(&self, axis: usize) -> &[f64] {
        match &self.axes[axis] {
            AxisBasis::Fourier { eigs } => eigs,
            AxisBasis::Dense { eigs, .. } => eigs,
        }
    }

    /// Multiply each joint eigen-coefficient by `f(λ)` where `λ` is the total
    /// eigenvalue of the mode.
    pub fn apply_spectral<F: Fn(f64) -> Complex64 + Sync>(
        &self,
        field: &mut Vec<Complex64>,
        grid: &GridSpec,
        f: F,
    ) {
        self.to_coeffs(field, grid);
        match self.shape.len() {
            1 => {
                let e0 = self.axis_eigs(0);
                for (v, &l) in field.iter_mut().zip(e0) {
                    *v *= f(l);
                }
            }
            2 => {
                let e0 = self.axis_eigs(0);
                let e1 = self.axis_eigs(1);
                let m1 = self.shape[1];
                field.par_chunks_mut(m1).enumerate().for_each(|(i, row)| {
                    let base = e0[i];
                    for (v, &l) in row.iter_mut().zip(e1) {
                        *v *= f(base + l);
                    }
                });
            }
            _ => unreachable!(),
        }
        self.from_coeffs(field, grid);
    }

    /// Exact linear flow `e^{-i (-cΔ + V) dt}` applied in place.
    pub fn propagate(&self, field: &mut Vec<Complex64>, grid: &GridSpec, dt: f64) {
        self.apply_spectral(field, grid, |l| Complex64::new(0.0, -l * dt).exp());
    }

    /// `(α + H - shift)^{-1}`, the Sobolev-type preconditioner.  The caller
    /// guarantees `α + λ_min - shift > 0`.
    pub fn solve_shifted(&self, field: &mut Vec<Complex64>, grid: &GridSpec, alpha: f64, shift: f64) {
        self.apply_spectral(field, grid, |l| {
            Complex64::new(1.0 / (alpha + l - shift), 0.0)
        });
    }
}

/// Apply a dense axis transform `T` (n×n, row-major) along `axis`.
fn dense_axis_apply(
    field: &[Complex64],
    shape: &[usize],
    axis: usize,
    t: &[f64],
    n: usize,
) -> Vec<Complex64> {
    match (shape.len(), axis) {
        (1, 0) => {
            let mut out = vec![Complex64::default(); n];
            out.par_iter_mut().enumerate().for_each(|(k, o)| {
                let row = &t[k * n..(k + 1) * n];
                let mut acc = Complex64::default();
                for i in 0..n {
                    acc += field[i] * row[i];
                }
                *o = acc;
            });
            out
        }
        (2, 0) => {
            // out[k, j] = Σ_i T[k,i] field[i, j]
            let m1 = shape[1];
            let mut out = vec![Complex64::default(); field.len()];
            out.par_chunks_mut(m1).enumerate().for_each(|(k, orow)| {
                let trow = &t[k * n..(k + 1) * n];
                for i in 0..n {
                    let c = trow[i];
                    if c == 0.0 {
                        continue;
                    }
                    let frow = &field[i * m1..(i + 1) * m1];
                    for j in 0..m1 {
                        orow[j] += frow[j] * c;
                    }
                }
            });
            out
        }
        (2, 1) => {
            // out[i, k] = Σ_j field[i, j] T[k, j]
            let m1 = shape[1];
            debug_assert_eq!(m1, n);
            let mut out = vec![Complex64::default(); field.len()];
            out.par_chunks_mut(n).enumerate().for_each(|(i, orow)| {
                let frow = &field[i * n..(i + 1) * n];
                for (k, o) in orow.iter_mut().enumerate() {
                    let trow = &t[k * n..(k + 1) * n];
                    let mut acc = Complex64::default();
                    for j in 0..n {
                        acc += frow[j] * trow[j];
                    }
                    *o = acc;
                }
            });
            out
        }
        _ => unreachable!(),
    }
}

/// The pair of component bases used by the dynamics and the solvers.
pub struct PairBasis {
    pub u: ComponentBasis,
    pub v: ComponentBasis,
}

impl PairBasis {
    pub fn prepare(params: &ModelParams, grid: &GridSpec) -> Result<Self> {
        Ok(PairBasis {
            u: ComponentBasis::prepare(params, grid, 1.0)?,
            v: ComponentBasis::prepare(params, grid, params.kappa)?,
        })
    }
}
