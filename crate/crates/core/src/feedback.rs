//! Feedback as convex constraints `g(r) <= 0` on rewards.
//!
//! | kind | `g(r)` |
//! |------|--------|
//! | demonstration | `max_pi J^pi(r; p_D) - <d_D, r> - t` |
//! | trajectory comparison | `<d^{w1} - d^{w2}, r> - t` |
//! | policy comparison | `<d^{pi1} - d^{pi2}, r> - t` |
//! | fractional comparison | `ratio * <d^{pi2}, r> - <d^{pi1}, r>` |
//! | bad-policy demonstration | `<d_D, r> - min_pi J^pi(r; p_D) - t` |
//!
//! A comparison with slack `t` states that the first item is worse than the
//! second by at least `-t` (or better by at most `t`).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mdp::{backward_induction, policy_visitation, worst_policy, MdpSpec, VisitDist};
use crate::reward::RewardPoint;
use crate::tensor::{SahTensor, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeedbackKind {
    Demonstration,
    TrajectoryComparison,
    PolicyComparison,
    FractionalComparison,
    BadPolicyDemonstration,
}

impl FeedbackKind {
    pub fn name(self) -> &'static str {
        match self {
            FeedbackKind::Demonstration => "demonstration",
            FeedbackKind::TrajectoryComparison => "trajectory_comparison",
            FeedbackKind::PolicyComparison => "policy_comparison",
            FeedbackKind::FractionalComparison => "fractional_comparison",
            FeedbackKind::BadPolicyDemonstration => "bad_policy_demonstration",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeedbackConstraint {
    /// The demonstrator is at most `slack`-suboptimal in `env`.
    Demonstration {
        env: Arc<MdpSpec>,
        demonstrator: VisitDist,
        slack: f64,
    },
    /// `G(first) <= G(second) + slack`.
    TrajectoryComparison {
        first: VisitDist,
        second: VisitDist,
        slack: f64,
    },
    /// `J^{first} <= J^{second} + slack`.
    PolicyComparison {
        first: VisitDist,
        second: VisitDist,
        slack: f64,
    },
    /// `J^{first} >= ratio * J^{second}`, `ratio` in `(0, 1]`.
    FractionalComparison {
        first: VisitDist,
        second: VisitDist,
        ratio: f64,
    },
    /// The demonstrator is at most `slack` above the worst return in `env`.
    BadPolicyDemonstration {
        env: Arc<MdpSpec>,
        demonstrator: VisitDist,
        slack: f64,
    },
}

/// Value and one subgradient of a constraint at a point.
#[derive(Clone, Debug)]
pub struct ConstraintEval {
    pub value: f64,
    pub subgradient: SahTensor,
}

impl FeedbackConstraint {
    pub fn kind(&self) -> FeedbackKind {
        match self {
            FeedbackConstraint::Demonstration { .. } => FeedbackKind::Demonstration,
            FeedbackConstraint::TrajectoryComparison { .. } => FeedbackKind::TrajectoryComparison,
            FeedbackConstraint::PolicyComparison { .. } => FeedbackKind::PolicyComparison,
            FeedbackConstraint::FractionalComparison { .. } => FeedbackKind::FractionalComparison,
            FeedbackConstraint::BadPolicyDemonstration { .. } => {
                FeedbackKind::BadPolicyDemonstration
            }
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            FeedbackConstraint::Demonstration { demonstrator, .. }
            | FeedbackConstraint::BadPolicyDemonstration { demonstrator, .. } => {
                demonstrator.shape()
            }
            FeedbackConstraint::TrajectoryComparison { first, .. }
            | FeedbackConstraint::PolicyComparison { first, .. }
            | FeedbackConstraint::FractionalComparison { first, .. } => first.shape(),
        }
    }

    fn validate(&self) -> Result<()> {
        let shape = self.shape();
        match self {
            FeedbackConstraint::Demonstration { env, slack, .. }
            | FeedbackConstraint::BadPolicyDemonstration { env, slack, .. } => {
                shape.ensure_eq(&env.shape())?;
                finite_slack(*slack)
            }
            FeedbackConstraint::TrajectoryComparison { second, slack, .. }
            | FeedbackConstraint::PolicyComparison { second, slack, .. } => {
                shape.ensure_eq(&second.shape())?;
                finite_slack(*slack)
            }
            FeedbackConstraint::FractionalComparison { second, ratio, .. } => {
                shape.ensure_eq(&second.shape())?;
                if !(*ratio > 0.0 && *ratio <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "fractional comparison ratio must lie in (0, 1], got {ratio}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The constant direction `c` when `g(r) = <c, r> - b` is affine, together with `b`.
    pub fn affine_part(&self) -> Option<(SahTensor, f64)> {
        match self {
            FeedbackConstraint::TrajectoryComparison {
                first,
                second,
                slack,
            }
            | FeedbackConstraint::PolicyComparison {
                first,
                second,
                slack,
            } => Some((first.minus(second), *slack)),
            FeedbackConstraint::FractionalComparison {
                first,
                second,
                ratio,
            } => {
                let mut c = second.tensor().scale(*ratio);
                c.add_scaled(-1.0, first.tensor());
                Some((c, 0.0))
            }
            _ => None,
        }
    }

    /// `g(r)` together with a subgradient.
    ///
    /// For demonstrations the subgradient is `d^{pi*} - d_D` with `pi*` the
    /// backward-induction optimum for `r` (lowest action index among ties).
    pub fn evaluate(&self, r: &RewardPoint) -> Result<ConstraintEval> {
        self.shape().ensure_eq(&r.shape())?;
        let r = r.values();
        match self {
            FeedbackConstraint::Demonstration {
                env,
                demonstrator,
                slack,
            } => {
                let plan = backward_induction(env, r)?;
                let best = policy_visitation(env, &plan.policy)?;
                Ok(ConstraintEval {
                    value: plan.value - demonstrator.tensor().dot(r) - slack,
                    subgradient: best.minus(demonstrator),
                })
            }
            FeedbackConstraint::BadPolicyDemonstration {
                env,
                demonstrator,
                slack,
            } => {
                let plan = worst_policy(env, r)?;
                let worst = policy_visitation(env, &plan.policy)?;
                Ok(ConstraintEval {
                    value: demonstrator.tensor().dot(r) - plan.value - slack,
                    subgradient: demonstrator.minus(&worst),
                })
            }
            _ => {
                let (c, b) = self
                    .affine_part()
                    .expect("comparison constraints are affine");
                Ok(ConstraintEval {
                    value: c.dot(r) - b,
                    subgradient: c,
                })
            }
        }
    }
}

fn finite_slack(slack: f64) -> Result<()> {
    if !slack.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "slack must be finite, got {slack}"
        )));
    }
    Ok(())
}

/// `g(r)`.
pub fn constraint_value(c: &FeedbackConstraint, r: &RewardPoint) -> Result<f64> {
    match c {
        FeedbackConstraint::Demonstration {
            env,
            demonstrator,
            slack,
        } => {
            c.shape().ensure_eq(&r.shape())?;
            let best = backward_induction(env, r.values())?.value;
            Ok(best - demonstrator.tensor().dot(r.values()) - slack)
        }
        FeedbackConstraint::BadPolicyDemonstration {
            env,
            demonstrator,
            slack,
        } => {
            c.shape().ensure_eq(&r.shape())?;
            let worst = worst_policy(env, r.values())?.value;
            Ok(demonstrator.tensor().dot(r.values()) - worst - slack)
        }
        _ => c.evaluate(r).map(|e| e.value),
    }
}

/// One subgradient of `g` at `r`.
pub fn constraint_subgradient(c: &FeedbackConstraint, r: &RewardPoint) -> Result<SahTensor> {
    c.evaluate(r).map(|e| e.subgradient)
}

/// Ordered constraint list. The order is the dual-vector layout: demonstrations,
/// trajectory comparisons, policy comparisons, then the other kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleSetSpec {
    shape: Shape,
    constraints: Vec<FeedbackConstraint>,
    labels: Vec<String>,
}

impl FeasibleSetSpec {
    pub fn empty(shape: Shape) -> Self {
        FeasibleSetSpec {
            shape,
            constraints: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Labels default to `"<kind>#<position>"`.
    pub fn new(shape: Shape, constraints: Vec<FeedbackConstraint>) -> Result<Self> {
        let labeled = constraints
            .into_iter()
            .enumerate()
            .map(|(i, c)| (format!("{}#{i}", c.kind().name()), c))
            .collect();
        Self::with_labels(shape, labeled)
    }

    /// Entries are stably regrouped into layout order.
    pub fn with_labels(
        shape: Shape,
        constraints: Vec<(String, FeedbackConstraint)>,
    ) -> Result<Self> {
        let mut constraints = constraints;
        for (label, c) in &constraints {
            shape.ensure_eq(&c.shape()).map_err(|e| match e {
                Error::ShapeMismatch { expected, found } => Error::ShapeMismatch {
                    expected,
                    found: format!("{found} in feedback `{label}`"),
                },
                e => e,
            })?;
            c.validate()?;
        }
        constraints.sort_by_key(|(_, c)| c.kind());
        let (labels, constraints) = constraints.into_iter().unzip();
        Ok(FeasibleSetSpec {
            shape,
            constraints,
            labels,
        })
    }

    /// A copy with `extra` appended at its layout position.
    pub fn with_extra(&self, label: impl Into<String>, extra: FeedbackConstraint) -> Result<Self> {
        let mut entries: Vec<_> = self
            .labels
            .iter()
            .cloned()
            .zip(self.constraints.iter().cloned())
            .collect();
        entries.push((label.into(), extra));
        Self::with_labels(self.shape, entries)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[FeedbackConstraint] {
        &self.constraints
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeedbackConstraint)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(&self.constraints)
    }

    /// Number of entries of each kind, in layout order.
    pub fn layout(&self) -> Vec<(FeedbackKind, usize)> {
        let mut out: Vec<(FeedbackKind, usize)> = Vec::new();
        for c in &self.constraints {
            match out.last_mut() {
                Some((k, n)) if *k == c.kind() => *n += 1,
                _ => out.push((c.kind(), 1)),
            }
        }
        out
    }

    pub fn count(&self, kind: FeedbackKind) -> usize {
        self.constraints.iter().filter(|c| c.kind() == kind).count()
    }

    pub fn values(&self, r: &RewardPoint) -> Result<Vec<f64>> {
        self.constraints
            .iter()
            .map(|c| constraint_value(c, r))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// `g_i(r)` in layout order.
    pub values: Vec<f64>,
    /// Indices with `g_i(r) > tol`.
    pub violated: Vec<usize>,
}

/// Whether `max_i g_i(r) <= tol`.
pub fn feasibility(set: &FeasibleSetSpec, r: &RewardPoint, tol: f64) -> Result<Feasibility> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be >= 0, got {tol}"
        )));
    }
    let values = set.values(r)?;
    let violated: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > tol)
        .map(|(i, _)| i)
        .collect();
    Ok(Feasibility {
        feasible: violated.is_empty(),
        values,
        violated,
    })
}

/// `-max_i g_i(r)`: positive iff `r` is strictly feasible. `+inf` without constraints.
pub fn slater_margin(set: &FeasibleSetSpec, r: &RewardPoint) -> Result<f64> {
    let worst = set.values(r)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(-worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{
        random_deterministic_policy, random_mdp, random_policy, random_reward,
    };
    use crate::mdp::{sample_trajectories, trajectory_return, trajectory_visitation, Policy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_kinds(rng: &mut ChaCha8Rng, shape: Shape) -> Vec<FeedbackConstraint> {
        let env = Arc::new(random_mdp(rng, shape));
        let visit = |rng: &mut ChaCha8Rng| {
            let pi = random_policy(rng, shape);
            policy_visitation(&env, &pi).unwrap()
        };
        let trajs = sample_trajectories(&env, &random_policy(rng, shape), 2, rng.gen()).unwrap();
        vec![
            FeedbackConstraint::Demonstration {
                env: env.clone(),
                demonstrator: visit(rng),
                slack: 0.4,
            },
            FeedbackConstraint::TrajectoryComparison {
                first: trajectory_visitation(shape, &trajs[0]).unwrap(),
                second: trajectory_visitation(shape, &trajs[1]).unwrap(),
                slack: -0.5,
            },
            FeedbackConstraint::PolicyComparison {
                first: visit(rng),
                second: visit(rng),
                slack: 0.0,
            },
            FeedbackConstraint::FractionalComparison {
                first: visit(rng),
                second: visit(rng),
                ratio: 0.6,
            },
            FeedbackConstraint::BadPolicyDemonstration {
                env: env.clone(),
                demonstrator: visit(rng),
                slack: 0.2,
            },
        ]
    }

    #[test]
    fn identical_policies_compare_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let shape = Shape::new(3, 2, 3).unwrap();
        let env = random_mdp(&mut rng, shape);
        let d = policy_visitation(&env, &random_policy(&mut rng, shape)).unwrap();
        let c = FeedbackConstraint::PolicyComparison {
            first: d.clone(),
            second: d.clone(),
            slack: 0.0,
        };
        for _ in 0..10 {
            let r = random_reward(&mut rng, shape);
            assert_eq!(constraint_value(&c, &r).unwrap(), 0.0);
            assert_eq!(
                constraint_subgradient(&c, &r).unwrap(),
                SahTensor::zeros(shape)
            );
        }
    }

    #[test]
    fn optimal_demonstrator_has_zero_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = Shape::new(3, 3, 4).unwrap();
        let env = Arc::new(random_mdp(&mut rng, shape));
        let r = random_reward(&mut rng, shape);
        let plan = backward_induction(&env, r.values()).unwrap();
        let c = FeedbackConstraint::Demonstration {
            demonstrator: policy_visitation(&env, &plan.policy).unwrap(),
            env,
            slack: 0.0,
        };
        assert!(constraint_value(&c, &r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn trajectory_comparison_equals_return_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = Shape::new(2, 2, 3).unwrap();
        let env = random_mdp(&mut rng, shape);
        let trajs = sample_trajectories(&env, &Policy::uniform(shape), 2, 9).unwrap();
        let c = FeedbackConstraint::TrajectoryComparison {
            first: trajectory_visitation(shape, &trajs[0]).unwrap(),
            second: trajectory_visitation(shape, &trajs[1]).unwrap(),
            slack: 0.3,
        };
        for _ in 0..10 {
            let r = random_reward(&mut rng, shape);
            let direct = trajectory_return(&trajs[0], r.values())
                - trajectory_return(&trajs[1], r.values())
                - 0.3;
            assert!((constraint_value(&c, &r).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn demonstration_subgradient_at_zero_uses_lowest_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = Shape::new(3, 3, 3).unwrap();
        let env = Arc::new(random_mdp(&mut rng, shape));
        let demo = policy_visitation(&env, &random_deterministic_policy(&mut rng, shape)).unwrap();
        let c = FeedbackConstraint::Demonstration {
            env: env.clone(),
            demonstrator: demo.clone(),
            slack: 1.0,
        };
        let lowest = policy_visitation(&env, &Policy::constant(shape, 0).unwrap()).unwrap();
        let v = constraint_subgradient(&c, &RewardPoint::zeros(shape)).unwrap();
        assert_eq!(v, lowest.minus(&demo));
    }

    #[test]
    fn subgradient_inequality_holds_for_every_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = Shape::new(3, 2, 3).unwrap();
        for c in all_kinds(&mut rng, shape) {
            for _ in 0..100 {
                let r = random_reward(&mut rng, shape);
                let r2 = random_reward(&mut rng, shape);
                let e = c.evaluate(&r).unwrap();
                let lhs = constraint_value(&c, &r2).unwrap();
                let rhs = e.value + e.subgradient.dot(&r2.values().sub(r.values()));
                assert!(lhs >= rhs - 1e-8, "{:?}: {lhs} < {rhs}", c.kind());
            }
        }
    }

    #[test]
    fn constraints_are_convex_along_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape::new(3, 2, 3).unwrap();
        for c in all_kinds(&mut rng, shape) {
            for _ in 0..100 {
                let r1 = random_reward(&mut rng, shape);
                let r2 = random_reward(&mut rng, shape);
                let t: f64 = rng.gen();
                let mut mid = r1.values().scale(t);
                mid.add_scaled(1.0 - t, r2.values());
                let lhs = constraint_value(&c, &RewardPoint::new(mid).unwrap()).unwrap();
                let rhs = t * constraint_value(&c, &r1).unwrap()
                    + (1.0 - t) * constraint_value(&c, &r2).unwrap();
                assert!(lhs <= rhs + 1e-8, "{:?}", c.kind());
            }
        }
    }

    #[test]
    fn layout_groups_kinds_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shape = Shape::new(2, 2, 2).unwrap();
        let mut cs = all_kinds(&mut rng, shape);
        cs.reverse();
        let set = FeasibleSetSpec::new(shape, cs).unwrap();
        let kinds: Vec<_> = set.constraints().iter().map(|c| c.kind()).collect();
        assert_eq!(
            kinds,
            vec![
                FeedbackKind::Demonstration,
                FeedbackKind::TrajectoryComparison,
                FeedbackKind::PolicyComparison,
                FeedbackKind::FractionalComparison,
                FeedbackKind::BadPolicyDemonstration,
            ]
        );
        // labels travel with their constraint
        assert_eq!(set.labels()[0], "demonstration#4");
        assert_eq!(set.layout().len(), 5);
    }

    #[test]
    fn feasibility_reports_violations() {
        let shape = Shape::new(1, 2, 1).unwrap();
        let r = RewardPoint::new(SahTensor::from_vec(shape, vec![1.0, 0.5]).unwrap()).unwrap();
        assert!(
            feasibility(&FeasibleSetSpec::empty(shape), &r, 0.0)
                .unwrap()
                .feasible
        );

        let first = VisitDist::new(SahTensor::from_vec(shape, vec![1.0, 0.0]).unwrap()).unwrap();
        let second = VisitDist::new(SahTensor::from_vec(shape, vec![0.0, 1.0]).unwrap()).unwrap();
        // <d1 - d2, r> = 0.5 > 0
        let set = FeasibleSetSpec::new(
            shape,
            vec![FeedbackConstraint::PolicyComparison {
                first,
                second,
                slack: 0.0,
            }],
        )
        .unwrap();
        let f = feasibility(&set, &r, 0.0).unwrap();
        assert!(!f.feasible);
        assert_eq!(f.violated, vec![0]);
        assert!((f.values[0] - 0.5).abs() < 1e-15);
        assert!(feasibility(&set, &r, 0.5).unwrap().feasible);
        assert!(feasibility(&set, &r, -1.0).is_err());
    }

    #[test]
    fn feasibility_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shape = Shape::new(3, 2, 2).unwrap();
        let cs = all_kinds(&mut rng, shape);
        for _ in 0..50 {
            let r = random_reward(&mut rng, shape);
            let mut prev_feasible = true;
            for n in 0..=cs.len() {
                let set = FeasibleSetSpec::new(shape, cs[..n].to_vec()).unwrap();
                let f = feasibility(&set, &r, 0.0).unwrap().feasible;
                assert!(!f || prev_feasible, "adding a constraint enlarged the set");
                prev_feasible = f;
                let loose = feasibility(&set, &r, 0.3).unwrap().feasible;
                assert!(loose || !f);
            }
        }
    }

    #[test]
    fn slater_margin_values() {
        let shape = Shape::new(1, 2, 1).unwrap();
        let r = RewardPoint::new(SahTensor::from_vec(shape, vec![0.2, 0.5]).unwrap()).unwrap();
        assert_eq!(
            slater_margin(&FeasibleSetSpec::empty(shape), &r).unwrap(),
            f64::INFINITY
        );
        let first = VisitDist::new(SahTensor::from_vec(shape, vec![1.0, 0.0]).unwrap()).unwrap();
        let second = VisitDist::new(SahTensor::from_vec(shape, vec![0.0, 1.0]).unwrap()).unwrap();
        let set = FeasibleSetSpec::new(
            shape,
            vec![FeedbackConstraint::PolicyComparison {
                first,
                second,
                slack: 0.0,
            }],
        )
        .unwrap();
        assert!((slater_margin(&set, &r).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn invalid_ratio_and_shape_are_rejected() {
        let shape = Shape::new(1, 2, 1).unwrap();
        let d = VisitDist::new(SahTensor::from_vec(shape, vec![1.0, 0.0]).unwrap()).unwrap();
        let bad = FeedbackConstraint::FractionalComparison {
            first: d.clone(),
            second: d.clone(),
            ratio: 1.5,
        };
        assert!(FeasibleSetSpec::new(shape, vec![bad]).is_err());
        let other = Shape::new(2, 1, 1).unwrap();
        let ok = FeedbackConstraint::PolicyComparison {
            first: d.clone(),
            second: d,
            slack: 0.0,
        };
        assert!(matches!(
            FeasibleSetSpec::new(other, vec![ok]),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
