use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank, solve, Matrix};
use crate::scalar::Real;

/// Linear features over state-action pairs: row `s * |A| + a` is `φ(s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    phi: Matrix<T>,
    constant: Option<Vec<T>>,
}

/// On-disk feature document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureFile<T> {
    /// Must be `"s*n_actions+a"`.
    pub index: String,
    pub n_states: usize,
    pub n_actions: usize,
    pub phi: Vec<Vec<T>>,
}

pub const INDEX_CONVENTION: &str = "s*n_actions+a";

impl<T: Real> FeatureMap<T> {
    /// Checks `‖φ(s,a)‖₂ ≤ 1` and full column rank.
    pub fn new(phi: Matrix<T>) -> Result<Self> {
        if phi.rows() == 0 || phi.cols() == 0 {
            return Err(Error::Dimension("feature matrix must be non-empty".into()));
        }
        for i in 0..phi.rows() {
            let row = phi.row(i);
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("feature row {i} is not finite")));
            }
            let norm = row.iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > T::one() + T::stochastic_tol(row.len()) {
                return Err(Error::InvalidModel(format!("feature row {i} has norm {norm} > 1")));
            }
        }
        if rank(&phi) < phi.cols() {
            return Err(Error::InvalidModel(format!(
                "feature columns are linearly dependent (rank {} < d = {})",
                rank(&phi),
                phi.cols()
            )));
        }
        let constant = constant_direction(&phi);
        Ok(FeatureMap { phi, constant })
    }

    pub fn tabular(n_pairs: usize) -> Self {
        FeatureMap::new(Matrix::identity(n_pairs)).expect("identity features are valid")
    }

    pub fn n_pairs(&self) -> usize {
        self.phi.rows()
    }

    pub fn dim(&self) -> usize {
        self.phi.cols()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.phi
    }

    pub fn row(&self, pair: usize) -> &[T] {
        self.phi.row(pair)
    }

    /// `θ_e` with `Φθ_e = 1`, when the constant function is representable.
    pub fn constant_direction(&self) -> Option<&[T]> {
        self.constant.as_deref()
    }

    /// `Φθ`
    pub fn values(&self, theta: &[T]) -> Vec<T> {
        self.phi.mul_vec(theta)
    }

    pub fn from_file(f: FeatureFile<T>) -> Result<Self> {
        if f.index != INDEX_CONVENTION {
            return Err(Error::InvalidModel(format!(
                "feature index convention {:?} is not {INDEX_CONVENTION:?}",
                f.index
            )));
        }
        let want = f.n_states * f.n_actions;
        if f.phi.len() != want {
            return Err(Error::Dimension(format!(
                "feature matrix has {} rows, expected {want}",
                f.phi.len()
            )));
        }
        FeatureMap::new(Matrix::from_rows(&f.phi)?)
    }

    pub fn to_file(&self, n_states: usize, n_actions: usize) -> FeatureFile<T> {
        FeatureFile { index: INDEX_CONVENTION.into(), n_states, n_actions, phi: self.phi.to_rows() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: FeatureFile<T> =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_file(f)
    }

    /// Checks the feature matrix has one row per state-action pair.
    pub fn check_pairs(&self, n_pairs: usize) -> Result<()> {
        if self.n_pairs() != n_pairs {
            return Err(Error::Dimension(format!(
                "features cover {} state-action pairs, MDP has {n_pairs}",
                self.n_pairs()
            )));
        }
        Ok(())
    }
}

// Least squares for Φθ ≈ 1; accepted when the fit is exact to rounding.
fn constant_direction<T: Real>(phi: &Matrix<T>) -> Option<Vec<T>> {
    let ones = vec![T::one(); phi.rows()];
    let pt = phi.transpose();
    let theta = solve(&pt.matmul(phi), &pt.mul_vec(&ones)).ok()?;
    let fit = phi.mul_vec(&theta);
    let tol = T::lit(1e-9).max(T::stochastic_tol(phi.cols()));
    fit.iter().all(|&v| (v - T::one()).abs() < tol).then_some(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabular_contains_constants() {
        let f = FeatureMap::<f64>::tabular(4);
        assert_eq!(f.constant_direction().unwrap(), &[1.0; 4]);
    }

    #[test]
    fn rejects_long_rows_and_dependent_columns() {
        let long = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(FeatureMap::<f64>::new(long).is_err());
        let dep = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.2], vec![0.1, 0.1]]).unwrap();
        assert!(FeatureMap::<f64>::new(dep).is_err());
    }

    #[test]
    fn non_constant_span() {
        let m = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5], vec![0.3, 0.1]]).unwrap();
        assert!(FeatureMap::<f64>::new(m).unwrap().constant_direction().is_none());
    }

    #[test]
    fn file_round_trip() {
        let f = FeatureMap::<f64>::tabular(6);
        let doc = f.to_file(3, 2);
        assert_eq!(FeatureMap::from_file(doc.clone()).unwrap(), f);
        let mut bad = doc;
        bad.index = "a*n_states+s".into();
        assert!(FeatureMap::from_file(bad).is_err());
    }
}
