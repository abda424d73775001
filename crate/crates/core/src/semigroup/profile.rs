use nalgebra::{DVector, Scalar};
use num_traits::Zero;

use crate::error::invalid;
use crate::{Result, C64};

/// Age profile: an `E = R^n` (or `C^n`) value at every age-grid node,
/// stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile<T> {
    dim: usize,
    data: Vec<T>,
}

pub type AgeProfile = Profile<f64>;
pub type ComplexProfile = Profile<C64>;

impl<T: Scalar + Copy + Zero> Profile<T> {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * nodes],
        }
    }
}

impl<T: Scalar + Copy> Profile<T> {
    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "profile of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, nodes: usize, mut f: impl FnMut(usize) -> Vec<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * nodes);
        for k in 0..nodes {
            let v = f(k);
            if v.len() != dim {
                return Err(invalid(format!("node {k}: expected {dim} components")));
            }
            data.extend(v);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn at(&self, k: usize) -> &[T] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn at_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// Stacked column vector of length `dim · nodes`.
    pub fn to_vector(&self) -> DVector<T> {
        DVector::from_column_slice(&self.data)
    }

    pub fn from_vector(dim: usize, v: &DVector<T>) -> Result<Self> {
        Self::from_flat(dim, v.as_slice().to_vec())
    }
}

impl AgeProfile {
    pub fn constant(value: &[f64], nodes: usize) -> Self {
        let dim = value.len();
        let mut data = Vec::with_capacity(dim * nodes);
        for _ in 0..nodes {
            data.extend_from_slice(value);
        }
        Self { dim, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(∫ |u(a)|^p da)^{1/p}` by trapezoid over nodes spaced `da`.
    pub fn lp_norm(&self, p: f64, da: f64) -> f64 {
        lp_norm_flat(&self.data, self.dim, p, da)
    }

    pub fn sup_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> ComplexProfile {
        Profile {
            dim: self.dim,
            data: self.data.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }
}

impl ComplexProfile {
    pub fn lp_norm(&self, p: f64, da: f64) -> f64 {
        let nodes = self.nodes();
        let vals: Vec<f64> = (0..nodes)
            .map(|k| {
                self.at(k)
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    .sqrt()
                    .powf(p)
            })
            .collect();
        crate::quadrature::trapezoid(&vals, da).powf(1.0 / p)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn lp_norm_flat(data: &[f64], dim: usize, p: f64, da: f64) -> f64 {
    let vals: Vec<f64> = data
        .chunks(dim)
        .map(|v| crate::linalg::euclid(v).powf(p))
        .collect();
    crate::quadrature::trapezoid(&vals, da).powf(1.0 / p)
}
