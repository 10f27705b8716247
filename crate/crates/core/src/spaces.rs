//! Spectral realisation of a Gelfand triple `V ⊂ H ⊂ V'`.
//!
//! Elements are coefficient vectors in an orthonormal eigenbasis of a
//! positive self-adjoint operator with eigenvalues `λ_j`. The three norms
//! weight the squared coefficients by `1`, `λ_j` and `1/λ_j` respectively.

use std::ops::{Add, Index, IndexMut, Sub};

use crate::error::{Error, Result};

/// Which member of the triple a norm is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    H,
    V,
    VDual,
}

/// Coefficients of an element of the discretised pivot space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector(Vec<f64>);

impl SpectralVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", "coefficients must be finite"));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Unit vector along basis element `index` (0-based).
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = 1.0;
        v
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self((0..dim).map(f).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|c| c * factor).collect())
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &SpectralVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    /// Plain Euclidean length, i.e. the `H` norm without a descriptor.
    pub fn h_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl Index<usize> for SpectralVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for SpectralVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &SpectralVector {
    type Output = SpectralVector;
    fn add(self, rhs: &SpectralVector) -> SpectralVector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        SpectralVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &SpectralVector {
    type Output = SpectralVector;
    fn sub(self, rhs: &SpectralVector) -> SpectralVector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in subtraction");
        SpectralVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// Dimension and eigenvalues of the operator whose eigenbasis carries the
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceDescriptor {
    eigenvalues: Vec<f64>,
}

impl SpaceDescriptor {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("eigenvalues", "space must have at least one mode"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::invalid("eigenvalues", "eigenvalues must be finite and positive"));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("eigenvalues", "eigenvalues must be non-decreasing"));
        }
        Ok(Self { eigenvalues })
    }

    /// Dirichlet Laplacian on `(0, π)`: `λ_j = j²`, `j = 1..=dim`.
    pub fn laplacian_1d(dim: usize) -> Result<Self> {
        Self::new((1..=dim).map(|j| (j * j) as f64).collect())
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn norm(&self, x: &SpectralVector, kind: NormKind) -> Result<f64> {
        x.check_dim(self.dim())?;
        let sum: f64 = match kind {
            NormKind::H => x.0.iter().map(|c| c * c).sum(),
            NormKind::V => x.0.iter().zip(&self.eigenvalues).map(|(c, l)| l * c * c).sum(),
            NormKind::VDual => x.0.iter().zip(&self.eigenvalues).map(|(c, l)| c * c / l).sum(),
        };
        Ok(sum.sqrt())
    }
}

/// `H` inner product `Σ c_j d_j`.
pub fn inner_h(x: &SpectralVector, y: &SpectralVector) -> Result<f64> {
    y.check_dim(x.dim())?;
    Ok(x.0.iter().zip(&y.0).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> SpectralVector {
        SpectralVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn norms_of_small_vectors() {
        let space = SpaceDescriptor::new(vec![1.0, 4.0]).unwrap();
        let x = v(&[3.0, 4.0]);
        assert_eq!(space.norm(&x, NormKind::H).unwrap(), 5.0);
        assert!((space.norm(&x, NormKind::V).unwrap() - 73f64.sqrt()).abs() < 1e-15);
        assert!((space.norm(&x, NormKind::VDual).unwrap() - 13f64.sqrt()).abs() < 1e-15);
        for kind in [NormKind::H, NormKind::V, NormKind::VDual] {
            assert_eq!(space.norm(&SpectralVector::zeros(2), kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let space = SpaceDescriptor::laplacian_1d(3).unwrap();
        assert!(matches!(
            space.norm(&v(&[1.0, 2.0]), NormKind::H),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
        assert!(inner_h(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn inner_products() {
        assert_eq!(inner_h(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(inner_h(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        let x = v(&[0.3, -1.2, 2.5]);
        let n = SpaceDescriptor::laplacian_1d(3).unwrap().norm(&x, NormKind::H).unwrap();
        assert!((inner_h(&x, &x).unwrap() - n * n).abs() < 1e-14);
    }

    #[test]
    fn descriptor_validation() {
        assert!(SpaceDescriptor::new(vec![]).is_err());
        assert!(SpaceDescriptor::new(vec![1.0, 0.0]).is_err());
        assert!(SpaceDescriptor::new(vec![4.0, 1.0]).is_err());
        assert!(SpectralVector::new(vec![f64::NAN]).is_err());
        let lap = SpaceDescriptor::laplacian_1d(4).unwrap();
        assert_eq!(lap.eigenvalues(), &[1.0, 4.0, 9.0, 16.0]);
    }
}
