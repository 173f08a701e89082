//! Dense tensors indexed by `(h, s, a)`.
//!
//! Rewards, visitation distributions and reward-space subgradients all live in
//! the same space `R^{H x S x A}`; they share [`SahTensor`] as storage. Steps are
//! zero-based internally (`h = 0` is the first step).

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State count, action count and horizon shared by every environment of a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Shape {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::InvalidArgument(format!(
                "states, actions and horizon must be >= 1 (got S={states}, A={actions}, H={horizon})"
            )));
        }
        Ok(Shape {
            states,
            actions,
            horizon,
        })
    }

    /// Number of `(h, s, a)` triples.
    pub fn len(&self) -> usize {
        self.states * self.actions * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn offset(&self, h: usize, s: usize, a: usize) -> usize {
        debug_assert!(h < self.horizon && s < self.states && a < self.actions);
        (h * self.states + s) * self.actions + a
    }

    /// Inverse of [`Shape::offset`].
    pub fn unravel(&self, offset: usize) -> (usize, usize, usize) {
        let a = offset % self.actions;
        let rest = offset / self.actions;
        (rest / self.states, rest % self.states, a)
    }

    pub fn ensure_eq(&self, other: &Shape) -> Result<()> {
        if self != other {
            return Err(Error::shape(self, other));
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S={} A={} H={}", self.states, self.actions, self.horizon)
    }
}

/// A real tensor over `(h, s, a)`, stored row-major as `[h][s][a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SahTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl SahTensor {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        SahTensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape(
                format!("{} entries ({shape})", shape.len()),
                format!("{} entries", data.len()),
            ));
        }
        Ok(SahTensor { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    data.push(f(h, s, a));
                }
            }
        }
        SahTensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Entries of step `h`, laid out as `[s][a]`.
    pub fn step(&self, h: usize) -> &[f64] {
        let n = self.shape.states * self.shape.actions;
        &self.data[h * n..(h + 1) * n]
    }

    pub fn dot(&self, other: &SahTensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &SahTensor) -> SahTensor {
        debug_assert_eq!(self.shape, other.shape);
        SahTensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x - y)
                .collect(),
        }
    }

    pub fn add(&self, other: &SahTensor) -> SahTensor {
        let mut out = self.clone();
        out.add_scaled(1.0, other);
        out
    }

    pub fn scale(&self, factor: f64) -> SahTensor {
        SahTensor {
            shape: self.shape,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: f64, other: &SahTensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += factor * y;
        }
    }

    pub fn neg(&self) -> SahTensor {
        self.scale(-1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize, usize)> for SahTensor {
    type Output = f64;

    fn index(&self, (h, s, a): (usize, usize, usize)) -> &f64 {
        &self.data[self.shape.offset(h, s, a)]
    }
}

impl IndexMut<(usize, usize, usize)> for SahTensor {
    fn index_mut(&mut self, (h, s, a): (usize, usize, usize)) -> &mut f64 {
        let i = self.shape.offset(h, s, a);
        &mut self.data[i]
    }
}
