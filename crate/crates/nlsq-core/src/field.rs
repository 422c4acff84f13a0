//! The central state object: a pair of complex fields on a shared grid.

use num_complex::Complex64;
use std::sync::Arc;

use crate::grid::GridSpec;
use crate::{Error, Result};

/// Complex sample arrays for the two wave components on a shared grid.
#[derive(Debug, Clone)]
pub struct FieldPair {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub grid: Arc<GridSpec>,
}

impl FieldPair {
    /// Construct after shape and finiteness validation.
    pub fn new(grid: Arc<GridSpec>, u: Vec<Complex64>, v: Vec<Complex64>) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: u.len() });
        }
        if v.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: v.len() });
        }
        let pair = FieldPair { u, v, grid };
        pair.check_finite()?;
        Ok(pair)
    }

    pub fn zeros(grid: Arc<GridSpec>) -> Self {
        let n = grid.len();
        FieldPair { u: vec![Complex64::default(); n], v: vec![Complex64::default(); n], grid }
    }

    /// Build from real-valued closures over the node coordinates.
    pub fn from_fn<F, G>(grid: Arc<GridSpec>, f: F, g: G) -> Self
    where
        F: Fn(&[f64]) -> Complex64,
        G: Fn(&[f64]) -> Complex64,
    {
        let mut u = Vec::with_capacity(grid.len());
        let mut v = Vec::with_capacity(grid.len());
        match grid.ndim() {
            1 => {
                for &x in &grid.axes[0].coords {
                    u.push(f(&[x]));
                    v.push(g(&[x]));
                }
            }
            2 => {
                for &x0 in &grid.axes[0].coords {
                    for &x1 in &grid.axes[1].coords {
                        u.push(f(&[x0, x1]));
                        v.push(g(&[x0, x1]));
                    }
                }
            }
            _ => unreachable!(),
        }
        FieldPair { u, v, grid }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.u.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("u component"));
        }
        if self.v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("v component"));
        }
        Ok(())
    }

    pub fn mass_u(&self) -> f64 {
        self.grid.norm_sq(&self.u).expect("shape checked at construction")
    }

    pub fn mass_v(&self) -> f64 {
        self.grid.norm_sq(&self.v).expect("shape checked at construction")
    }

    pub fn scale(&mut self, su: f64, sv: f64) {
        for c in &mut self.u {
            *c *= su;
        }
        for c in &mut self.v {
            *c *= sv;
        }
    }

    /// Drop imaginary parts and negative lobes are kept; used by the real
    /// solvers which operate on real nonnegative iterates.
    pub fn real_part(&self) -> FieldPair {
        FieldPair {
            u: self.u.iter().map(|c| Complex64::new(c.re, 0.0)).collect(),
            v: self.v.iter().map(|c| Complex64::new(c.re, 0.0)).collect(),
            grid: self.grid.clone(),
        }
    }

    pub fn conj(&self) -> FieldPair {
        FieldPair {
            u: self.u.iter().map(|c| c.conj()).collect(),
            v: self.v.iter().map(|c| c.conj()).collect(),
            grid: self.grid.clone(),
        }
    }

    /// L² distance between two pairs on the same grid.
    pub fn l2_distance(&self, other: &FieldPair) -> f64 {
        let w = self.grid.flat_weights();
        let mut acc = 0.0;
        for i in 0..self.u.len() {
            acc += ((self.u[i] - other.u[i]).norm_sqr() + (self.v[i] - other.v[i]).norm_sqr())
                * w[i];
        }
        acc.sqrt()
    }
}
