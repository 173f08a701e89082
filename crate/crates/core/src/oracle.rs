//! Brute-force reference values on a regular grid of the reward parameters.
//!
//! The grid lives in parameter space: `[0,1]^d` for a feature map, the whole
//! `[0,1]^{SAH}` otherwise (which is only practical for toy shapes, hence the cap).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{constraint_value, FeasibleSetSpec, FeedbackConstraint};
use crate::reward::{RewardPoint, RewardSpace};
use crate::tensor::SahTensor;

pub const DEFAULT_GRID_CAP: u64 = 10_000_000;

/// The points `j / n` for `j = 0..=n` on every axis, with `n = floor(1/δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardGrid {
    dim: usize,
    resolution: f64,
    steps: usize,
}

impl RewardGrid {
    pub fn new(dim: usize, resolution: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("grid dimension must be >= 1".into()));
        }
        if !(resolution > 0.0 && resolution <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must lie in (0, 1], got {resolution}"
            )));
        }
        // 1/0.02 and similar must not lose a step to rounding
        let steps = (1.0 / resolution + 1e-9).floor() as usize;
        Ok(RewardGrid {
            dim,
            resolution,
            steps,
        })
    }

    pub fn for_space(space: &RewardSpace, resolution: f64) -> Result<Self> {
        Self::new(space.dim(), resolution)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn per_axis(&self) -> usize {
        self.steps + 1
    }

    /// `(floor(1/δ) + 1)^dim`, saturating.
    pub fn len(&self) -> u64 {
        (0..self.dim).fold(1u64, |acc, _| acc.saturating_mul(self.per_axis() as u64))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_cap(&self, cap: u64) -> Result<()> {
        let points = self.len();
        if points > cap {
            return Err(Error::GridTooLarge { points, cap });
        }
        Ok(())
    }

    /// Coordinates of the `index`-th point; the last axis varies fastest.
    pub fn point(&self, mut index: u64) -> Vec<f64> {
        let n = self.per_axis() as u64;
        let mut out = vec![0.0; self.dim];
        for x in out.iter_mut().rev() {
            *x = (index % n) as f64 / self.steps as f64;
            index /= n;
        }
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

fn feasible_at(set: &FeasibleSetSpec, r: &RewardPoint, tol: f64) -> Result<bool> {
    // cheap affine constraints first
    for c in set.constraints() {
        if let Some((dir, b)) = c.affine_part() {
            if dir.dot(r.values()) - b > tol {
                return Ok(false);
            }
        }
    }
    for c in set.constraints() {
        if c.affine_part().is_none() && constraint_value(c, r)? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridExtrema {
    /// `m*`
    pub min: f64,
    /// `M*`
    pub max: f64,
    pub argmin: RewardPoint,
    pub argmax: RewardPoint,
    pub feasible_points: u64,
    pub total_points: u64,
}

impl GridExtrema {
    /// `(M* - m*) / 2`
    pub fn uninformativeness(&self) -> f64 {
        (self.max - self.min) / 2.0
    }
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    index: u64,
}

fn pick(a: Option<Best>, b: Option<Best>, lower: bool) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            let a_wins = if lower {
                a.value < b.value
            } else {
                a.value > b.value
            };
            if a_wins || (a.value == b.value && a.index < b.index) {
                Some(a)
            } else {
                Some(b)
            }
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Scan {
    min: Option<Best>,
    max: Option<Best>,
    count: u64,
}

impl Scan {
    fn merge(self, other: Scan) -> Scan {
        Scan {
            min: pick(self.min, other.min, true),
            max: pick(self.max, other.max, false),
            count: self.count + other.count,
        }
    }
}

/// Exact extrema of `<Δd, r>` over the grid points satisfying every constraint
/// (tolerance 0). Ties resolve to the lowest grid index regardless of thread count.
pub fn grid_extrema(
    set: &FeasibleSetSpec,
    objective: &SahTensor,
    space: &RewardSpace,
    grid: &RewardGrid,
    cap: u64,
) -> Result<GridExtrema> {
    space.shape().ensure_eq(&objective.shape())?;
    space.shape().ensure_eq(&set.shape())?;
    check_grid(space, grid, cap)?;
    let total = grid.len();
    let scan = (0..total)
        .into_par_iter()
        .map(|i| -> Result<Scan> {
            let r = space.point(grid.point(i));
            if !feasible_at(set, &r, 0.0)? {
                return Ok(Scan::default());
            }
            let best = Some(Best {
                value: objective.dot(r.values()),
                index: i,
            });
            Ok(Scan {
                min: best,
                max: best,
                count: 1,
            })
        })
        .try_reduce(Scan::default, |a, b| Ok(a.merge(b)))?;
    match (scan.min, scan.max) {
        (Some(lo), Some(hi)) => Ok(GridExtrema {
            min: lo.value,
            max: hi.value,
            argmin: space.point(grid.point(lo.index)),
            argmax: space.point(grid.point(hi.index)),
            feasible_points: scan.count,
            total_points: total,
        }),
        _ => Err(Error::EmptyFeasibleGrid { points: total }),
    }
}

fn check_grid(space: &RewardSpace, grid: &RewardGrid, cap: u64) -> Result<()> {
    if grid.dim() != space.dim() {
        return Err(Error::shape(
            format!("{}-dimensional grid", space.dim()),
            format!("{}-dimensional grid", grid.dim()),
        ));
    }
    grid.check_cap(cap)
}

/// Parameters of every grid-feasible point, in grid order.
pub fn feasible_grid_params(
    set: &FeasibleSetSpec,
    space: &RewardSpace,
    grid: &RewardGrid,
    cap: u64,
) -> Result<Vec<Vec<f64>>> {
    space.shape().ensure_eq(&set.shape())?;
    check_grid(space, grid, cap)?;
    let kept: Vec<Option<Vec<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let params = grid.point(i);
            let r = space.point(params.clone());
            Ok(feasible_at(set, &r, 0.0)?.then_some(params))
        })
        .collect::<Result<_>>()?;
    Ok(kept.into_iter().flatten().collect())
}

/// Largest Slater margin `-max_i g_i(r)` over the grid, with the maximizing
/// parameters (first in grid order among ties).
pub fn max_slater_margin(
    set: &FeasibleSetSpec,
    space: &RewardSpace,
    grid: &RewardGrid,
    cap: u64,
) -> Result<(f64, Vec<f64>)> {
    space.shape().ensure_eq(&set.shape())?;
    check_grid(space, grid, cap)?;
    if set.is_empty() {
        return Ok((f64::INFINITY, grid.point(0)));
    }
    let best = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Option<Best>> {
            let r = space.point(grid.point(i));
            let worst = set
                .values(&r)?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(Some(Best {
                value: -worst,
                index: i,
            }))
        })
        .try_reduce(|| None, |a, b| Ok(pick(a, b, false)))?
        .expect("grid is nonempty");
    Ok((best.value, grid.point(best.index)))
}

/// `Î(F) - Î(F ∪ {extra})` with both extrema computed on the grid.
pub fn oracle_information_gain(
    set: &FeasibleSetSpec,
    label: &str,
    extra: FeedbackConstraint,
    objective: &SahTensor,
    space: &RewardSpace,
    grid: &RewardGrid,
    cap: u64,
) -> Result<f64> {
    let before = grid_extrema(set, objective, space, grid, cap)?;
    let after = grid_extrema(&set.with_extra(label, extra)?, objective, space, grid, cap)?;
    Ok(before.uninformativeness() - after.uninformativeness())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::feedback::feasibility;
    use crate::generators::{random_mdp, random_policy};
    use crate::mdp::policy_visitation;
    use crate::reward::FeatureMap;
    use crate::tensor::Shape;

    fn two_features() -> (Shape, FeatureMap) {
        let shape = Shape::new(1, 2, 1).unwrap();
        (
            shape,
            FeatureMap::new(shape, 2, vec![Some(0), Some(1)]).unwrap(),
        )
    }

    #[test]
    fn grid_contains_both_ends() {
        let g = RewardGrid::new(2, 0.02).unwrap();
        assert_eq!(g.per_axis(), 51);
        assert_eq!(g.len(), 51 * 51);
        assert_eq!(g.point(0), vec![0.0, 0.0]);
        assert_eq!(g.point(g.len() - 1), vec![1.0, 1.0]);
        assert_eq!(g.point(1), vec![0.0, 0.02]);
        let g = RewardGrid::new(1, 0.3).unwrap();
        assert_eq!(g.per_axis(), 4);
        assert_eq!(g.point(3), vec![1.0]);
    }

    #[test]
    fn cap_is_enforced() {
        let shape = Shape::new(4, 3, 2).unwrap();
        let space = RewardSpace::Tabular(shape);
        let grid = RewardGrid::for_space(&space, 0.5).unwrap();
        let err = grid_extrema(
            &FeasibleSetSpec::empty(shape),
            &SahTensor::zeros(shape),
            &space,
            &grid,
            DEFAULT_GRID_CAP,
        );
        assert!(matches!(err, Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn box_extremum() {
        let shape = Shape::new(1, 3, 1).unwrap();
        let space = RewardSpace::Tabular(shape);
        let objective = SahTensor::from_vec(shape, vec![0.0, 1.0, 0.0]).unwrap();
        let grid = RewardGrid::for_space(&space, 0.5).unwrap();
        let e = grid_extrema(
            &FeasibleSetSpec::empty(shape),
            &objective,
            &space,
            &grid,
            DEFAULT_GRID_CAP,
        )
        .unwrap();
        assert_eq!(e.max, 1.0);
        assert_eq!(e.min, 0.0);
        assert_eq!(e.argmax.values().as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(e.feasible_points, 27);
    }

    #[test]
    fn halfspace_geometry() {
        let (shape, map) = two_features();
        let space = RewardSpace::Features(map);
        // θ1 + θ2 <= 1 as a comparison between the two single-state "visitations"
        let both = SahTensor::from_vec(shape, vec![0.5, 0.5]).unwrap();
        let nothing = SahTensor::from_vec(shape, vec![0.0, 0.0]).unwrap();
        let set = FeasibleSetSpec::new(
            shape,
            vec![FeedbackConstraint::PolicyComparison {
                first: crate::mdp::VisitDist::new_unchecked(both),
                second: crate::mdp::VisitDist::new_unchecked(nothing),
                slack: 0.5,
            }],
        )
        .unwrap();
        let objective = SahTensor::from_vec(shape, vec![1.0, 0.0]).unwrap();
        let grid = RewardGrid::new(2, 0.1).unwrap();
        let e = grid_extrema(&set, &objective, &space, &grid, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(e.max, 1.0);
        assert_eq!(e.argmax.theta(), Some(&[1.0, 0.0][..]));
        let (margin, at) = max_slater_margin(&set, &space, &grid, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(margin, 0.5);
        assert_eq!(at, vec![0.0, 0.0]);
    }

    #[test]
    fn empty_feasible_grid_is_reported() {
        let (shape, map) = two_features();
        let space = RewardSpace::Features(map);
        let d = SahTensor::from_vec(shape, vec![1.0, 0.0]).unwrap();
        let z = SahTensor::from_vec(shape, vec![0.0, 1.0]).unwrap();
        let set = FeasibleSetSpec::new(
            shape,
            vec![FeedbackConstraint::PolicyComparison {
                first: crate::mdp::VisitDist::new_unchecked(d),
                second: crate::mdp::VisitDist::new_unchecked(z),
                slack: -2.0,
            }],
        )
        .unwrap();
        let grid = RewardGrid::new(2, 0.1).unwrap();
        let err = grid_extrema(
            &set,
            &SahTensor::zeros(shape),
            &space,
            &grid,
            DEFAULT_GRID_CAP,
        );
        assert!(matches!(err, Err(Error::EmptyFeasibleGrid { points: 121 })));
    }

    #[test]
    fn membership_agrees_with_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let shape = Shape::new(3, 2, 2).unwrap();
        let env = Arc::new(random_mdp(&mut rng, shape));
        let d = |rng: &mut ChaCha8Rng| policy_visitation(&env, &random_policy(rng, shape)).unwrap();
        let set = FeasibleSetSpec::new(
            shape,
            vec![
                FeedbackConstraint::Demonstration {
                    env: env.clone(),
                    demonstrator: d(&mut rng),
                    slack: 0.4,
                },
                FeedbackConstraint::PolicyComparison {
                    first: d(&mut rng),
                    second: d(&mut rng),
                    slack: 0.0,
                },
            ],
        )
        .unwrap();
        let map = FeatureMap::from_fn(shape, 3, |h, s, a| Some((h + s + a) % 3)).unwrap();
        let space = RewardSpace::Features(map);
        let grid = RewardGrid::new(3, 0.1).unwrap();
        let kept = feasible_grid_params(&set, &space, &grid, DEFAULT_GRID_CAP).unwrap();
        let mut expected = Vec::new();
        for p in grid.points() {
            if feasibility(&set, &space.point(p.clone()), 0.0)
                .unwrap()
                .feasible
            {
                expected.push(p);
            }
        }
        assert_eq!(grid.len(), 1331);
        assert_eq!(kept, expected);
        assert!(!kept.is_empty() && kept.len() < 1331);
    }

    #[test]
    fn extrema_sandwich_every_feasible_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = Shape::new(2, 2, 2).unwrap();
        let env = random_mdp(&mut rng, shape);
        let d = |rng: &mut ChaCha8Rng| policy_visitation(&env, &random_policy(rng, shape)).unwrap();
        let set = FeasibleSetSpec::new(
            shape,
            vec![FeedbackConstraint::PolicyComparison {
                first: d(&mut rng),
                second: d(&mut rng),
                slack: 0.0,
            }],
        )
        .unwrap();
        let objective = d(&mut rng).minus(&d(&mut rng));
        let map = FeatureMap::from_fn(shape, 2, |_, s, a| Some((s + a) % 2)).unwrap();
        let space = RewardSpace::Features(map);
        let grid = RewardGrid::new(2, 0.05).unwrap();
        let e = grid_extrema(&set, &objective, &space, &grid, DEFAULT_GRID_CAP).unwrap();
        for p in feasible_grid_params(&set, &space, &grid, DEFAULT_GRID_CAP).unwrap() {
            let v = objective.dot(space.point(p).values());
            assert!(e.min <= v && v <= e.max);
        }
    }

    #[test]
    fn extrema_do_not_depend_on_thread_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = Shape::new(1, 3, 1).unwrap();
        let space = RewardSpace::Tabular(shape);
        // many ties: objective only sees the first coordinate
        let objective =
            SahTensor::from_vec(shape, vec![rng.gen_range(0.5..1.0), 0.0, 0.0]).unwrap();
        let grid = RewardGrid::for_space(&space, 0.05).unwrap();
        let set = FeasibleSetSpec::empty(shape);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    grid_extrema(&set, &objective, &space, &grid, DEFAULT_GRID_CAP).unwrap()
                })
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one.argmax.values().as_slice(), &[1.0, 0.0, 0.0]);
    }
}
