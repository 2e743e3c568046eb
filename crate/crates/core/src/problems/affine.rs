//! Affine test problem: `F(x) = Ax + b`, `h(x) = Cx − d`, `g(x) = Gx − e`.

use nalgebra::{DMatrix, DVector};

use crate::error::{DpnError, Result};
use crate::mop::{Bounds, Mop};

#[derive(Debug, Clone)]
pub struct AffineMop {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub g: DMatrix<f64>,
    pub e: DVector<f64>,
    bounds: Bounds,
}

impl AffineMop {
    /// Unconstrained and unbounded.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(DpnError::InvalidArgument("A and b disagree in rows".into()));
        }
        let n = a.ncols();
        Ok(Self {
            a,
            b,
            c: DMatrix::zeros(0, n),
            d: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            e: DVector::zeros(0),
            bounds: Bounds::unbounded(n),
        })
    }

    /// `F(x) = x` in dimension `n`.
    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n), DVector::zeros(n)).expect("square identity")
    }

    pub fn with_equalities(mut self, c: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if c.ncols() != self.a.ncols() || c.nrows() != d.len() {
            return Err(DpnError::InvalidArgument("equality block has wrong shape".into()));
        }
        self.c = c;
        self.d = d;
        Ok(self)
    }

    pub fn with_inequalities(mut self, g: DMatrix<f64>, e: DVector<f64>) -> Result<Self> {
        if g.ncols() != self.a.ncols() || g.nrows() != e.len() {
            return Err(DpnError::InvalidArgument("inequality block has wrong shape".into()));
        }
        self.g = g;
        self.e = e;
        Ok(self)
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Result<Self> {
        if bounds.dim() != self.a.ncols() {
            return Err(DpnError::InvalidArgument("bounds have wrong dimension".into()));
        }
        self.bounds = bounds;
        Ok(self)
    }
}

fn affine(m: &DMatrix<f64>, off: &DVector<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x) - off).iter().copied().collect()
}

impl Mop for AffineMop {
    fn name(&self) -> &str {
        "affine"
    }
    fn n(&self) -> usize {
        self.a.ncols()
    }
    fn k(&self) -> usize {
        self.a.nrows()
    }
    fn p(&self) -> usize {
        self.c.nrows()
    }
    fn m(&self) -> usize {
        self.g.nrows()
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
    fn eval_f(&self, x: &[f64]) -> Vec<f64> {
        affine(&self.a, &-&self.b, x)
    }
    fn eval_h(&self, x: &[f64]) -> Vec<f64> {
        affine(&self.c, &self.d, x)
    }
    fn eval_g(&self, x: &[f64]) -> Vec<f64> {
        affine(&self.g, &self.e, x)
    }
    fn jac_f(&self, _x: &[f64]) -> DMatrix<f64> {
        self.a.clone()
    }
    fn hess_f(&self, _x: &[f64]) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.n(), self.n()); self.k()]
    }
    fn jac_h(&self, _x: &[f64]) -> DMatrix<f64> {
        self.c.clone()
    }
    fn jac_g(&self, _x: &[f64]) -> DMatrix<f64> {
        self.g.clone()
    }
    fn hess_h(&self, _x: &[f64]) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.n(), self.n()); self.p()]
    }
    fn hess_g(&self, _x: &[f64]) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.n(), self.n()); self.m()]
    }
}
