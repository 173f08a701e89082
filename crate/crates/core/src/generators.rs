//! Seeded random instances: MDPs, policies, rewards, whole problems.
//!
//! Used by the experiment harness and by the randomized test suites.

use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::feedback::{constraint_value, FeasibleSetSpec, FeedbackConstraint};
use crate::mdp::{
    expected_return, policy_visitation, sample_trajectory, trajectory_visitation, MdpSpec, Policy,
    VisitDist,
};
use crate::reward::{FeatureMap, RewardPoint, RewardSpace};
use crate::solver::{Hyperparams, RobRelProblem};
use crate::tensor::{SahTensor, Shape};

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    // exponential spacings give a uniform draw from the simplex
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, shape: Shape) -> MdpSpec {
    let s0 = rng.gen_range(0..shape.states);
    let transitions = (0..shape.len())
        .flat_map(|_| random_simplex(rng, shape.states))
        .collect();
    MdpSpec::new(shape, s0, transitions).expect("rows are normalized")
}

pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, shape: Shape) -> Policy {
    let probs = (0..shape.horizon * shape.states)
        .flat_map(|_| random_simplex(rng, shape.actions))
        .collect();
    Policy::new(shape, probs).expect("rows are normalized")
}

pub fn random_deterministic_policy<R: Rng + ?Sized>(rng: &mut R, shape: Shape) -> Policy {
    let actions: Vec<usize> = (0..shape.horizon * shape.states)
        .map(|_| rng.gen_range(0..shape.actions))
        .collect();
    Policy::deterministic(shape, &actions).expect("actions in range")
}

/// Uniform reward in `[0,1]^{SAH}`.
pub fn random_reward<R: Rng + ?Sized>(rng: &mut R, shape: Shape) -> RewardPoint {
    let values = SahTensor::from_fn(shape, |_, _, _| rng.gen());
    RewardPoint::new(values).expect("finite")
}

/// A random feature-space problem together with the interior point used to
/// place its constraints.
#[derive(Clone, Debug)]
pub struct FeatureInstance {
    pub problem: RobRelProblem,
    /// Grid-aligned parameters at which every constraint is at most `-margin`.
    pub interior: Vec<f64>,
    pub margin: f64,
    /// The two environments: objective and comparisons live in the first,
    /// demonstrations in the second.
    pub envs: [Arc<MdpSpec>; 2],
}

/// Random `dim`-feature problem over two random environments with
/// `constraints` feedback of mixed kinds.
///
/// An interior point `θ̄` is drawn on the 0.02 grid inside `[0.2, 0.8]^dim`;
/// each slack (or fractional ratio) is set so the constraint sits between
/// `margin` and `margin + 0.25` below zero at `θ̄`. The set therefore contains
/// a grid point and has Slater margin at least `margin`.
pub fn random_feature_instance<R: Rng + ?Sized>(
    rng: &mut R,
    shape: Shape,
    dim: usize,
    constraints: usize,
    margin: f64,
    hyper: Hyperparams,
) -> Result<FeatureInstance> {
    let index = (0..shape.len())
        .map(|_| Some(rng.gen_range(0..dim)))
        .collect();
    let map = FeatureMap::new(shape, dim, index)?;
    let space = RewardSpace::Features(map);
    let envs = [
        Arc::new(random_mdp(rng, shape)),
        Arc::new(random_mdp(rng, shape)),
    ];
    let interior: Vec<f64> = (0..dim)
        .map(|_| rng.gen_range(10..=40) as f64 / 50.0)
        .collect();
    let bar = space.point(interior.clone());

    let visit = |rng: &mut R, env: &MdpSpec| policy_visitation(env, &random_policy(rng, shape));
    let drive = |rng: &mut R, env: &MdpSpec| -> Result<VisitDist> {
        let t = sample_trajectory(env, &random_deterministic_policy(rng, shape), rng);
        trajectory_visitation(shape, &t)
    };

    let mut list = Vec::with_capacity(constraints);
    for i in 0..constraints {
        let room = margin + rng.gen_range(0.0..0.25);
        let c = match rng.gen_range(0..5) {
            0 => FeedbackConstraint::Demonstration {
                env: envs[1].clone(),
                demonstrator: visit(rng, &envs[1])?,
                slack: 0.0,
            },
            1 => FeedbackConstraint::TrajectoryComparison {
                first: drive(rng, &envs[0])?,
                second: drive(rng, &envs[0])?,
                slack: 0.0,
            },
            2 => FeedbackConstraint::BadPolicyDemonstration {
                env: envs[1].clone(),
                demonstrator: visit(rng, &envs[1])?,
                slack: 0.0,
            },
            3 => {
                let (first, second) = (visit(rng, &envs[0])?, visit(rng, &envs[0])?);
                let (j1, j2) = (
                    expected_return(&first, &bar)?,
                    expected_return(&second, &bar)?,
                );
                let ratio = (j1 - room) / j2;
                if ratio > 0.0 && ratio <= 1.0 {
                    list.push((
                        format!("c{i}"),
                        FeedbackConstraint::FractionalComparison {
                            first,
                            second,
                            ratio,
                        },
                    ));
                    continue;
                }
                FeedbackConstraint::PolicyComparison {
                    first,
                    second,
                    slack: 0.0,
                }
            }
            _ => FeedbackConstraint::PolicyComparison {
                first: visit(rng, &envs[0])?,
                second: visit(rng, &envs[0])?,
                slack: 0.0,
            },
        };
        let slack = constraint_value(&c, &bar)? + room;
        list.push((format!("c{i}"), with_slack(c, slack)));
    }
    let set = FeasibleSetSpec::with_labels(shape, list)?;
    let objective = visit(rng, &envs[0])?.minus(&visit(rng, &envs[0])?);
    Ok(FeatureInstance {
        problem: RobRelProblem::new(objective, set, space, hyper)?,
        interior,
        margin,
        envs,
    })
}

fn with_slack(c: FeedbackConstraint, slack: f64) -> FeedbackConstraint {
    use FeedbackConstraint::*;
    match c {
        Demonstration {
            env, demonstrator, ..
        } => Demonstration {
            env,
            demonstrator,
            slack,
        },
        BadPolicyDemonstration {
            env, demonstrator, ..
        } => BadPolicyDemonstration {
            env,
            demonstrator,
            slack,
        },
        TrajectoryComparison { first, second, .. } => TrajectoryComparison {
            first,
            second,
            slack,
        },
        PolicyComparison { first, second, .. } => PolicyComparison {
            first,
            second,
            slack,
        },
        other => other,
    }
}
