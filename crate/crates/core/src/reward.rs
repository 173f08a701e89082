//! Reward functions and their parameterizations.
//!
//! The solver and the grid oracle work in a parameter space: either the full
//! tabular space `[0,1]^{SAH}` or a low-dimensional feature space `[0,1]^d`
//! mapped linearly onto rewards by a [`FeatureMap`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{SahTensor, Shape};

/// 0/1 map assigning each `(h, s, a)` to at most one feature.
///
/// Triples without a feature get the constant-zero reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    shape: Shape,
    dim: usize,
    index: Vec<Option<usize>>,
}

impl FeatureMap {
    pub fn new(shape: Shape, dim: usize, index: Vec<Option<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "feature dimension must be >= 1".into(),
            ));
        }
        if index.len() != shape.len() {
            return Err(Error::shape(
                format!("{} feature slots ({shape})", shape.len()),
                index.len(),
            ));
        }
        if let Some(bad) = index.iter().flatten().find(|&&f| f >= dim) {
            return Err(Error::InvalidArgument(format!(
                "feature index {bad} out of range for dimension {dim}"
            )));
        }
        Ok(FeatureMap { shape, dim, index })
    }

    pub fn from_fn(
        shape: Shape,
        dim: usize,
        mut f: impl FnMut(usize, usize, usize) -> Option<usize>,
    ) -> Result<Self> {
        let index = (0..shape.len())
            .map(|i| {
                let (h, s, a) = shape.unravel(i);
                f(h, s, a)
            })
            .collect();
        Self::new(shape, dim, index)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature(&self, h: usize, s: usize, a: usize) -> Option<usize> {
        self.index[self.shape.offset(h, s, a)]
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.index
    }

    /// `r = Phi theta`
    pub fn expand(&self, theta: &[f64]) -> SahTensor {
        debug_assert_eq!(theta.len(), self.dim);
        let data = self
            .index
            .iter()
            .map(|f| f.map_or(0.0, |f| theta[f]))
            .collect();
        SahTensor::from_vec(self.shape, data).expect("length matches shape")
    }

    /// `Phi^T v`
    pub fn pull_back(&self, v: &SahTensor) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (f, x) in self.index.iter().zip(v.as_slice()) {
            if let Some(f) = f {
                out[*f] += x;
            }
        }
        out
    }
}

/// Where the optimization variable lives.
#[derive(Clone, Debug, PartialEq)]
pub enum RewardSpace {
    /// One free coordinate per `(h, s, a)`.
    Tabular(Shape),
    /// `r = Phi theta` with `theta` in `[0,1]^d`.
    Features(FeatureMap),
}

impl RewardSpace {
    pub fn shape(&self) -> Shape {
        match self {
            RewardSpace::Tabular(shape) => *shape,
            RewardSpace::Features(map) => map.shape(),
        }
    }

    /// Dimension of the parameter vector.
    pub fn dim(&self) -> usize {
        match self {
            RewardSpace::Tabular(shape) => shape.len(),
            RewardSpace::Features(map) => map.dim(),
        }
    }

    pub fn expand(&self, params: &[f64]) -> SahTensor {
        match self {
            RewardSpace::Tabular(shape) => SahTensor::from_vec(*shape, params.to_vec())
                .expect("parameter length matches shape"),
            RewardSpace::Features(map) => map.expand(params),
        }
    }

    /// Maps a reward-space vector (e.g. a subgradient) to parameter space.
    pub fn pull_back(&self, v: &SahTensor) -> Vec<f64> {
        match self {
            RewardSpace::Tabular(_) => v.as_slice().to_vec(),
            RewardSpace::Features(map) => map.pull_back(v),
        }
    }

    pub fn point(&self, params: Vec<f64>) -> RewardPoint {
        let values = self.expand(&params);
        match self {
            RewardSpace::Tabular(_) => RewardPoint {
                values,
                theta: None,
            },
            RewardSpace::Features(_) => RewardPoint {
                values,
                theta: Some(params),
            },
        }
    }

    pub fn feature_map(&self) -> Option<&FeatureMap> {
        match self {
            RewardSpace::Tabular(_) => None,
            RewardSpace::Features(map) => Some(map),
        }
    }
}

/// A reward function `r_h(s, a)`, optionally carrying its feature parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardPoint {
    values: SahTensor,
    theta: Option<Vec<f64>>,
}

impl RewardPoint {
    /// Any finite tensor. Values outside `[0,1]` are accepted for internal use
    /// (reward differences, geometry on hulls); see [`RewardPoint::check_unit_box`].
    pub fn new(values: SahTensor) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::InvalidArgument(
                "reward has non-finite entries".into(),
            ));
        }
        Ok(RewardPoint {
            values,
            theta: None,
        })
    }

    pub fn from_features(map: &FeatureMap, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != map.dim() {
            return Err(Error::shape(
                format!("{} feature weights", map.dim()),
                theta.len(),
            ));
        }
        let values = map.expand(&theta);
        Ok(RewardPoint {
            values,
            theta: Some(theta),
        })
    }

    pub fn zeros(shape: Shape) -> Self {
        RewardPoint {
            values: SahTensor::zeros(shape),
            theta: None,
        }
    }

    pub fn values(&self) -> &SahTensor {
        &self.values
    }

    pub fn into_values(self) -> SahTensor {
        self.values
    }

    pub fn theta(&self) -> Option<&[f64]> {
        self.theta.as_deref()
    }

    pub fn shape(&self) -> Shape {
        self.values.shape()
    }

    pub fn check_unit_box(&self) -> Result<()> {
        let bad = |x: &f64| !(0.0..=1.0).contains(x);
        if self.values.as_slice().iter().any(bad)
            || self.theta.as_ref().is_some_and(|t| t.iter().any(bad))
        {
            return Err(Error::InvalidArgument(
                "reward entries must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn negated(&self) -> RewardPoint {
        RewardPoint {
            values: self.values.neg(),
            theta: self.theta.as_ref().map(|t| t.iter().map(|x| -x).collect()),
        }
    }

    /// `self - other`, dropping any parameterization.
    pub fn difference(&self, other: &RewardPoint) -> RewardPoint {
        RewardPoint {
            values: self.values.sub(&other.values),
            theta: None,
        }
    }
}

impl From<SahTensor> for RewardPoint {
    fn from(values: SahTensor) -> Self {
        RewardPoint {
            values,
            theta: None,
        }
    }
}
