//! Positive discrete measures on a node set, their potentials and energies.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{NodeSetId, SubsetMask};
use crate::kernels::GramForm;
use crate::linalg::dot;

/// Nonnegative weights over the nodes of one node set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    node_set_id: NodeSetId,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(node_set_id: NodeSetId, weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {w} at node {i}")));
        }
        Ok(DiscreteMeasure { node_set_id, weights })
    }

    /// A measure on the node set of `gram`.
    pub fn on(gram: &GramForm, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != gram.len() {
            return Err(Error::DimensionMismatch { expected: gram.len(), found: weights.len() });
        }
        Self::new(gram.node_set_id(), weights)
    }

    pub fn zero(node_set_id: NodeSetId, len: usize) -> Self {
        DiscreteMeasure { node_set_id, weights: vec![0.0; len] }
    }

    /// Unit point mass at `index`.
    pub fn dirac(node_set_id: NodeSetId, len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        let mut w = vec![0.0; len];
        w[index] = 1.0;
        Ok(DiscreteMeasure { node_set_id, weights: w })
    }

    /// Extends weights given on `indices` by zero; negative round-off is clamped.
    pub fn embed(node_set_id: NodeSetId, len: usize, indices: &[usize], values: &[f64]) -> Result<Self> {
        let mut w = vec![0.0; len];
        for (&i, &v) in indices.iter().zip(values) {
            if i >= len {
                return Err(Error::IndexOutOfRange { index: i, len });
            }
            w[i] = v.max(0.0);
        }
        Self::new(node_set_id, w)
    }

    pub fn node_set_id(&self) -> NodeSetId {
        self.node_set_id
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `{i : w_i > 0}`.
    pub fn support(&self) -> SubsetMask {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        SubsetMask::new(idx, self.len()).expect("indices are in range")
    }

    pub fn is_supported_on(&self, mask: &SubsetMask) -> bool {
        (0..self.len()).all(|i| self.weights[i] == 0.0 || mask.contains(i))
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    /// `h μ` for `h >= 0`.
    pub fn scaled(&self, h: f64) -> Result<Self> {
        Self::new(self.node_set_id, self.weights.iter().map(|w| h * w).collect())
    }

    /// `μ + ν`.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.same_nodes(other)?;
        Ok(DiscreteMeasure {
            node_set_id: self.node_set_id,
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect(),
        })
    }

    /// Restriction to `mask`.
    pub fn restricted(&self, mask: &SubsetMask) -> Self {
        let weights = (0..self.len()).map(|i| if mask.contains(i) { self.weights[i] } else { 0.0 }).collect();
        DiscreteMeasure { node_set_id: self.node_set_id, weights }
    }

    /// Largest absolute weight difference.
    pub fn max_weight_diff(&self, other: &Self) -> f64 {
        self.weights.iter().zip(&other.weights).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    fn same_nodes(&self, other: &Self) -> Result<()> {
        if self.node_set_id != other.node_set_id || self.len() != other.len() {
            return Err(Error::NodeSetMismatch);
        }
        Ok(())
    }

    fn check_gram(&self, gram: &GramForm) -> Result<()> {
        if self.node_set_id != gram.node_set_id() || self.len() != gram.len() {
            return Err(Error::NodeSetMismatch);
        }
        Ok(())
    }
}

/// `κμ` evaluated at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector {
    values: Vec<f64>,
}

impl PotentialVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Minimum over `mask` (`+∞` on an empty mask).
    pub fn min_on(&self, mask: &SubsetMask) -> f64 {
        mask.iter().map(|i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    /// Maximum over `mask` (`−∞` on an empty mask).
    pub fn max_on(&self, mask: &SubsetMask) -> f64 {
        mask.iter().map(|i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn potential(gram: &GramForm, mu: &DiscreteMeasure) -> Result<PotentialVector> {
    mu.check_gram(gram)?;
    Ok(PotentialVector { values: gram.apply(&mu.weights) })
}

/// `κ(μ, ν) = wᵀ K v`.
pub fn mutual_energy(gram: &GramForm, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    mu.check_gram(gram)?;
    nu.check_gram(gram)?;
    Ok(gram.matrix().bilinear(&mu.weights, &nu.weights))
}

/// `‖μ‖² = κ(μ, μ)`.
pub fn energy(gram: &GramForm, mu: &DiscreteMeasure) -> Result<f64> {
    mutual_energy(gram, mu, mu)
}

/// `G(μ) = 2μ(X) − ‖μ‖²`.
pub fn g_functional(gram: &GramForm, mu: &DiscreteMeasure) -> Result<f64> {
    Ok(2.0 * mu.mass() - energy(gram, mu)?)
}

/// `‖μ − ν‖²` in the energy norm.
pub fn distance_squared(gram: &GramForm, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    mu.check_gram(gram)?;
    nu.check_gram(gram)?;
    let d: Vec<f64> = mu.weights.iter().zip(&nu.weights).map(|(a, b)| a - b).collect();
    Ok(dot(&d, &gram.apply(&d)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn k2() -> GramForm {
        GramForm::from_matrix(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap()
    }

    fn m(g: &GramForm, w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::on(g, w.to_vec()).unwrap()
    }

    #[test]
    fn potential_examples() {
        let g = k2();
        let third = 1.0 / 3.0;
        let p = potential(&g, &m(&g, &[third, third])).unwrap();
        assert!((p.value(0) - 1.0).abs() < 1e-15 && (p.value(1) - 1.0).abs() < 1e-15);
        assert_eq!(potential(&g, &m(&g, &[0.0, 0.0])).unwrap().values(), &[0.0, 0.0]);
        assert_eq!(potential(&g, &m(&g, &[1.0, 0.0])).unwrap().values(), &[2.0, 1.0]);
    }

    #[test]
    fn energy_examples() {
        let g = k2();
        let third = 1.0 / 3.0;
        let gam = m(&g, &[third, third]);
        assert!((energy(&g, &gam).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(energy(&g, &m(&g, &[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(mutual_energy(&g, &m(&g, &[1.0, 0.0]), &m(&g, &[0.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn g_functional_examples() {
        let g = k2();
        let third = 1.0 / 3.0;
        assert!((g_functional(&g, &m(&g, &[third, third])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g_functional(&g, &m(&g, &[0.0, 0.0])).unwrap(), 0.0);
        let g1 = GramForm::from_matrix(Matrix::from_rows(&[[2.0]]).unwrap()).unwrap();
        assert_eq!(g_functional(&g1, &m(&g1, &[0.5])).unwrap(), 0.5);
    }

    #[test]
    fn rejects_negative_and_foreign_measures() {
        let g = k2();
        assert!(matches!(DiscreteMeasure::on(&g, vec![-1.0, 0.0]), Err(Error::InvalidMeasure(_))));
        let other = GramForm::from_matrix(Matrix::identity(3)).unwrap();
        let mu = m(&other, &[1.0, 0.0, 0.0]);
        assert_eq!(potential(&g, &mu), Err(Error::NodeSetMismatch));
    }

    #[test]
    fn support_and_restriction() {
        let g = k2();
        let mu = m(&g, &[0.0, 2.0]);
        assert_eq!(mu.support().indices(), &[1]);
        assert!(mu.is_supported_on(&SubsetMask::single(1)));
        assert_eq!(mu.restricted(&SubsetMask::single(0)).mass(), 0.0);
    }
}
