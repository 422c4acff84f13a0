//! Grid geometry, coordinates and quadrature weights.
//!
//! Two discretizations cover every problem in the crate:
//!
//! * `Cartesian`: one or two periodic axes on `[-L, L)` with uniform spacing
//!   `2L/m`.  Differential operators are exact Fourier multipliers.
//! * `Cylindrical`: a radial axis `r ∈ (0, L]` carrying the transverse
//!   dimension `d = n-1` (fields are radial in `x'`), plus one periodic axial
//!   axis `x_n`.  The radial axis is sampled at cell midpoints
//!   `r_i = (i + 1/2) h` so the even-parity ghost below `r = 0` lands exactly
//!   on the mirrored node.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Default cap on the total number of grid points.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Geometry {
    Cartesian,
    Cylindrical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Periodic Fourier axis on `[-L, L)`.
    Periodic,
    /// Radial axis on `(0, L]` with weight `r^{d-1}`; `d` is the transverse
    /// dimension the axis represents.
    Radial { transverse_dim: usize },
}

#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub name: String,
    pub half_extent: f64,
    pub count: usize,
    pub kind: AxisKind,
}

impl AxisSpec {
    pub fn periodic(name: &str, half_extent: f64, count: usize) -> Self {
        AxisSpec { name: name.into(), half_extent, count, kind: AxisKind::Periodic }
    }

    pub fn radial(half_extent: f64, count: usize, transverse_dim: usize) -> Self {
        AxisSpec {
            name: "r".into(),
            half_extent,
            count,
            kind: AxisKind::Radial { transverse_dim },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Axis {
    pub spec: AxisSpec,
    pub spacing: f64,
    pub coords: Vec<f64>,
    /// Quadrature weight per node (includes spacing and, for radial axes,
    /// the surface factor times `r^{d-1}`).
    pub weights: Vec<f64>,
    /// Signed wavenumbers for periodic axes, empty for radial axes.
    pub wavenumbers: Vec<f64>,
}

/// Validated grid: geometry, axes, quadrature.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub geometry: Geometry,
    pub axes: Vec<Axis>,
}

/// Surface area of the unit sphere in `R^d`: `2 π^{d/2} / Γ(d/2)`.
pub fn sphere_surface(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half_integer(d)
}

/// Γ(d/2) for integer d ≥ 1.
fn gamma_half_integer(d: usize) -> f64 {
    match d {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (d as f64 / 2.0 - 1.0) * gamma_half_integer(d - 2),
    }
}

/// Build and validate a grid.
pub fn make_grid(geometry: Geometry, specs: Vec<AxisSpec>, budget: Option<usize>) -> Result<GridSpec> {
    let budget = budget.unwrap_or(DEFAULT_POINT_BUDGET);
    if specs.is_empty() {
        return Err(Error::InvalidGrid("no axes declared".into()));
    }
    match geometry {
        Geometry::Cartesian => {
            if specs.len() > 2 {
                return Err(Error::InvalidGrid("cartesian grids support 1 or 2 axes".into()));
            }
            if specs.iter().any(|a| !matches!(a.kind, AxisKind::Periodic)) {
                return Err(Error::InvalidGrid("cartesian axes must be periodic".into()));
            }
        }
        Geometry::Cylindrical => {
            if specs.len() != 2 {
                return Err(Error::InvalidGrid(
                    "cylindrical geometry requires exactly two axes (r, x_n)".into(),
                ));
            }
            if !matches!(specs[0].kind, AxisKind::Radial { .. })
                || !matches!(specs[1].kind, AxisKind::Periodic)
            {
                return Err(Error::InvalidGrid(
                    "cylindrical axes must be (radial, periodic axial)".into(),
                ));
            }
        }
    }
    let mut total: usize = 1;
    for s in &specs {
        if !(s.half_extent > 0.0) || !s.half_extent.is_finite() {
            return Err(Error::InvalidGrid(format!("axis {}: extent must be positive", s.name)));
        }
        if s.count < 8 {
            return Err(Error::InvalidGrid(format!("axis {}: need at least 8 points", s.name)));
        }
        if matches!(s.kind, AxisKind::Periodic) && !s.count.is_power_of_two() {
            return Err(Error::NonPowerOfTwo(s.count));
        }
        if let AxisKind::Radial { transverse_dim } = s.kind {
            if transverse_dim == 0 || transverse_dim > 4 {
                return Err(Error::InvalidGrid(format!(
                    "radial axis: transverse dimension {transverse_dim} outside 1..=4"
                )));
            }
        }
        total = total.saturating_mul(s.count);
    }
    if total > budget {
        return Err(Error::BudgetExceeded { total, budget });
    }

    let axes = specs
        .into_iter()
        .map(|spec| {
            let m = spec.count;
            let l = spec.half_extent;
            match spec.kind {
                AxisKind::Periodic => {
                    let h = 2.0 * l / m as f64;
                    let coords: Vec<f64> = (0..m).map(|j| -l + j as f64 * h).collect();
                    let weights = vec![h; m];
                    let wavenumbers: Vec<f64> = (0..m)
                        .map(|j| {
                            let s = if j <= m / 2 { j as isize } else { j as isize - m as isize };
                            PI / l * s as f64
                        })
                        .collect();
                    Axis { spec, spacing: h, coords, weights, wavenumbers }
                }
                AxisKind::Radial { transverse_dim } => {
                    let h = l / m as f64;
                    let surf = sphere_surface(transverse_dim);
                    let coords: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
                    let weights = coords
                        .iter()
                        .map(|&r| surf * r.powi(transverse_dim as i32 - 1) * h)
                        .collect();
                    Axis { spec, spacing: h, coords, weights, wavenumbers: Vec::new() }
                }
            }
        })
        .collect();

    Ok(GridSpec { geometry, axes })
}

impl GridSpec {
    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.spec.count).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.spec.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Effective spatial dimension represented by the grid.
    pub fn spatial_dim(&self) -> usize {
        match self.geometry {
            Geometry::Cartesian => self.axes.len(),
            Geometry::Cylindrical => match self.axes[0].spec.kind {
                AxisKind::Radial { transverse_dim } => transverse_dim + 1,
                AxisKind::Periodic => unreachable!(),
            },
        }
    }

    /// Index of the free axis `x_n` (always the last axis).
    pub fn axial_axis(&self) -> usize {
        self.axes.len() - 1
    }

    /// Quadrature weight of the multi-indexed node.
    #[inline]
    pub fn weight_at(&self, idx: &[usize]) -> f64 {
        self.axes.iter().zip(idx).map(|(a, &i)| a.weights[i]).product()
    }

    /// Flattened (row-major) quadrature weights.
    pub fn flat_weights(&self) -> Vec<f64> {
        match self.axes.len() {
            1 => self.axes[0].weights.clone(),
            2 => {
                let (a, b) = (&self.axes[0], &self.axes[1]);
                let mut w = Vec::with_capacity(a.weights.len() * b.weights.len());
                for wa in &a.weights {
                    for wb in &b.weights {
                        w.push(wa * wb);
                    }
                }
                w
            }
            _ => unreachable!("grids are 1D or 2D"),
        }
    }

    /// `|x|²` at every node (`r² + x_n²` on cylindrical grids).
    pub fn radius_sq(&self) -> Vec<f64> {
        self.map_coords(|xs| xs.iter().map(|x| x * x).sum())
    }

    /// `|x'|²` at every node: all coordinates except the axial one.
    pub fn transverse_radius_sq(&self) -> Vec<f64> {
        let last = self.axial_axis();
        self.map_coords_indexed(|k, x| if k == last { 0.0 } else { x * x })
    }

    fn map_coords<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        match self.axes.len() {
            1 => self.axes[0].coords.iter().map(|&x| f(&[x])).collect(),
            2 => {
                let mut out = Vec::with_capacity(self.len());
                for &x0 in &self.axes[0].coords {
                    for &x1 in &self.axes[1].coords {
                        out.push(f(&[x0, x1]));
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    fn map_coords_indexed<F: Fn(usize, f64) -> f64>(&self, f: F) -> Vec<f64> {
        match self.axes.len() {
            1 => self.axes[0].coords.iter().map(|&x| f(0, x)).collect(),
            2 => {
                let mut out = Vec::with_capacity(self.len());
                for &x0 in &self.axes[0].coords {
                    for &x1 in &self.axes[1].coords {
                        out.push(f(0, x0) + f(1, x1));
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// Weighted integral `∫ f` over the represented domain.
    pub fn integrate(&self, samples: &[Complex64]) -> Result<Complex64> {
        if samples.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), found: samples.len() });
        }
        let w = self.flat_weights();
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, wi) in samples.iter().zip(&w) {
            acc += s * wi;
        }
        Ok(acc)
    }

    /// Weighted inner product `∫ f ḡ`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
        if f.len() != self.len() || g.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                found: if f.len() != self.len() { f.len() } else { g.len() },
            });
        }
        let w = self.flat_weights();
        let mut acc = Complex64::new(0.0, 0.0);
        for ((a, b), wi) in f.iter().zip(g).zip(&w) {
            acc += a * b.conj() * wi;
        }
        Ok(acc)
    }

    /// `‖f‖²` under the grid quadrature.
    pub fn norm_sq(&self, f: &[Complex64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), found: f.len() });
        }
        let w = self.flat_weights();
        Ok(f.iter().zip(&w).map(|(a, wi)| a.norm_sqr() * wi).sum())
    }
}
