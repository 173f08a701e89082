//! Estimating visitation distributions from trajectory datasets and transition
//! models from forward-model exploration.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{FeasibleSetSpec, FeedbackConstraint};
use crate::mdp::{
    backward_induction, sample_trajectory, trajectory_visitation, MdpSpec, Policy, Trajectory,
    VisitDist,
};
use crate::tensor::{SahTensor, Shape};

/// Trajectories collected by running one policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub source: String,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    pub fn new(
        shape: Shape,
        source: impl Into<String>,
        trajectories: Vec<Trajectory>,
    ) -> Result<Self> {
        for t in &trajectories {
            t.validate(shape)?;
        }
        Ok(TrajectoryDataset {
            source: source.into(),
            trajectories,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Empirical visitation `d_h(s, a) = (1/n) sum_j 1{s_h^j = s, a_h^j = a}`.
pub fn estimate_visitation(shape: Shape, data: &TrajectoryDataset) -> Result<VisitDist> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = vec![0u64; shape.len()];
    for traj in &data.trajectories {
        traj.validate(shape)?;
        for (h, (&s, &a)) in traj.states.iter().zip(&traj.actions).enumerate() {
            counts[shape.offset(h, s, a)] += 1;
        }
    }
    let n = data.len() as f64;
    let d = SahTensor::from_vec(shape, counts.into_iter().map(|c| c as f64 / n).collect())?;
    VisitDist::new(d)
}

/// Transition counts `n_h(s, a, s')`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionCounts {
    shape: Shape,
    counts: Vec<u64>,
    visits: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(shape: Shape) -> Self {
        TransitionCounts {
            shape,
            counts: vec![0; shape.len() * shape.states],
            visits: vec![0; shape.len()],
        }
    }

    pub fn from_trajectories<'a>(
        shape: Shape,
        trajs: impl IntoIterator<Item = &'a Trajectory>,
    ) -> Result<Self> {
        let mut counts = Self::new(shape);
        for t in trajs {
            t.validate(shape)?;
            counts.record(t);
        }
        Ok(counts)
    }

    pub fn record(&mut self, traj: &Trajectory) {
        for h in 0..self.shape.horizon {
            let i = self.shape.offset(h, traj.states[h], traj.actions[h]);
            self.visits[i] += 1;
            self.counts[i * self.shape.states + traj.states[h + 1]] += 1;
        }
    }

    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.shape.offset(h, s, a)]
    }

    /// `p_h(s'|s,a) = n_h(s,a,s') / n_h(s,a)`; unvisited rows become uniform.
    pub fn estimate(&self, initial_state: usize) -> Result<MdpSpec> {
        let ns = self.shape.states;
        let mut p = Vec::with_capacity(self.counts.len());
        for (i, &n) in self.visits.iter().enumerate() {
            let row = &self.counts[i * ns..(i + 1) * ns];
            if n == 0 {
                p.extend(std::iter::repeat_n(1.0 / ns as f64, ns));
            } else {
                p.extend(row.iter().map(|&c| c as f64 / n as f64));
            }
        }
        MdpSpec::new(self.shape, initial_state, p)
    }
}

/// A simulator of a hidden MDP that returns one trajectory per query.
#[derive(Clone, Debug)]
pub struct ForwardModel {
    hidden: Arc<MdpSpec>,
    rng: ChaCha8Rng,
    queries: usize,
}

impl ForwardModel {
    pub fn new(hidden: Arc<MdpSpec>, seed: u64) -> Self {
        ForwardModel {
            hidden,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queries: 0,
        }
    }

    pub fn shape(&self) -> Shape {
        self.hidden.shape()
    }

    pub fn initial_state(&self) -> usize {
        self.hidden.initial_state()
    }

    pub fn sample(&mut self, policy: &Policy) -> Trajectory {
        self.queries += 1;
        sample_trajectory(&self.hidden, policy, &mut self.rng)
    }

    /// Total trajectories drawn so far.
    pub fn queries(&self) -> usize {
        self.queries
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationStrategy {
    /// Every episode plays the uniform policy.
    UniformRollouts,
    /// Every episode plans, under the current estimate, to reach the least-visited
    /// `(s, a, h)` among those reachable.
    #[default]
    CountGreedy,
}

/// States reachable at each step under `p` (any positive-probability path).
fn reachable_states(p: &MdpSpec) -> Vec<Vec<bool>> {
    let shape = p.shape();
    let mut out = vec![vec![false; shape.states]; shape.horizon];
    out[0][p.initial_state()] = true;
    for h in 0..shape.horizon - 1 {
        for s in 0..shape.states {
            if !out[h][s] {
                continue;
            }
            for a in 0..shape.actions {
                for (t, &q) in p.next(h, s, a).iter().enumerate() {
                    if q > 0.0 {
                        out[h + 1][t] = true;
                    }
                }
            }
        }
    }
    out
}

fn greedy_policy(counts: &TransitionCounts, estimate: &MdpSpec) -> Result<Policy> {
    let shape = counts.shape;
    let reachable = reachable_states(estimate);
    let mut target = None;
    let mut fewest = u64::MAX;
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            if !reachable[h][s] {
                continue;
            }
            for a in 0..shape.actions {
                let n = counts.visits(h, s, a);
                if n < fewest {
                    fewest = n;
                    target = Some((h, s, a));
                }
            }
        }
    }
    let (h, s, a) = target.expect("the initial state is always reachable");
    let mut reward = SahTensor::zeros(shape);
    reward[(h, s, a)] = 1.0;
    Ok(backward_induction(estimate, &reward)?.policy)
}

/// Spends `budget` forward-model queries and returns the count-based estimate.
pub fn estimate_transitions(
    model: &mut ForwardModel,
    budget: usize,
    strategy: ExplorationStrategy,
) -> Result<MdpSpec> {
    let shape = model.shape();
    let s0 = model.initial_state();
    let mut counts = TransitionCounts::new(shape);
    let uniform = Policy::uniform(shape);
    for _ in 0..budget {
        let traj = match strategy {
            ExplorationStrategy::UniformRollouts => model.sample(&uniform),
            ExplorationStrategy::CountGreedy => {
                let estimate = counts.estimate(s0)?;
                let policy = greedy_policy(&counts, &estimate)?;
                model.sample(&policy)
            }
        };
        counts.record(&traj);
    }
    counts.estimate(s0)
}

/// Where the visitation distribution of a policy-bearing feedback comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySource {
    Exact(VisitDist),
    /// Name of a dataset in the inputs.
    Dataset(String),
}

/// Where the transition model of a demonstration environment comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum EnvSource {
    Exact(Arc<MdpSpec>),
    Explore {
        hidden: Arc<MdpSpec>,
        budget: usize,
        strategy: ExplorationStrategy,
    },
}

/// Feedback before estimation.
#[derive(Clone, Debug, PartialEq)]
pub enum RawFeedback {
    Demonstration {
        env: EnvSource,
        demonstrator: PolicySource,
        slack: f64,
    },
    TrajectoryComparison {
        first: Trajectory,
        second: Trajectory,
        slack: f64,
    },
    PolicyComparison {
        first: PolicySource,
        second: PolicySource,
        slack: f64,
    },
    FractionalComparison {
        first: PolicySource,
        second: PolicySource,
        ratio: f64,
    },
    BadPolicyDemonstration {
        env: EnvSource,
        demonstrator: PolicySource,
        slack: f64,
    },
}

struct Resolver<'a> {
    shape: Shape,
    datasets: &'a BTreeMap<String, TrajectoryDataset>,
    rng: ChaCha8Rng,
}

impl Resolver<'_> {
    fn policy(&self, label: &str, src: &PolicySource) -> Result<VisitDist> {
        match src {
            PolicySource::Exact(d) => Ok(d.clone()),
            PolicySource::Dataset(name) => {
                let data = self
                    .datasets
                    .get(name)
                    .ok_or_else(|| Error::MissingDataset {
                        feedback: label.to_string(),
                        dataset: name.clone(),
                    })?;
                estimate_visitation(self.shape, data)
            }
        }
    }

    fn env(&mut self, src: &EnvSource) -> Result<Arc<MdpSpec>> {
        match src {
            EnvSource::Exact(p) => Ok(p.clone()),
            EnvSource::Explore {
                hidden,
                budget,
                strategy,
            } => {
                let mut model = ForwardModel::new(hidden.clone(), self.rng.gen());
                Ok(Arc::new(estimate_transitions(
                    &mut model, *budget, *strategy,
                )?))
            }
        }
    }
}

/// Fills every estimated slot of the feedback: visitation distributions from
/// the named datasets, demonstration environments from exploration. Trajectory
/// comparisons need no estimation and are copied as indicators.
pub fn estimated_constraint_set(
    shape: Shape,
    feedback: &[(String, RawFeedback)],
    datasets: &BTreeMap<String, TrajectoryDataset>,
    seed: u64,
) -> Result<FeasibleSetSpec> {
    let mut resolver = Resolver {
        shape,
        datasets,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut out = Vec::with_capacity(feedback.len());
    for (label, raw) in feedback {
        let c = match raw {
            RawFeedback::Demonstration {
                env,
                demonstrator,
                slack,
            } => FeedbackConstraint::Demonstration {
                demonstrator: resolver.policy(label, demonstrator)?,
                env: resolver.env(env)?,
                slack: *slack,
            },
            RawFeedback::BadPolicyDemonstration {
                env,
                demonstrator,
                slack,
            } => FeedbackConstraint::BadPolicyDemonstration {
                demonstrator: resolver.policy(label, demonstrator)?,
                env: resolver.env(env)?,
                slack: *slack,
            },
            RawFeedback::TrajectoryComparison {
                first,
                second,
                slack,
            } => FeedbackConstraint::TrajectoryComparison {
                first: trajectory_visitation(shape, first)?,
                second: trajectory_visitation(shape, second)?,
                slack: *slack,
            },
            RawFeedback::PolicyComparison {
                first,
                second,
                slack,
            } => FeedbackConstraint::PolicyComparison {
                first: resolver.policy(label, first)?,
                second: resolver.policy(label, second)?,
                slack: *slack,
            },
            RawFeedback::FractionalComparison {
                first,
                second,
                ratio,
            } => FeedbackConstraint::FractionalComparison {
                first: resolver.policy(label, first)?,
                second: resolver.policy(label, second)?,
                ratio: *ratio,
            },
        };
        out.push((label.clone(), c));
    }
    FeasibleSetSpec::with_labels(shape, out)
}

/// `sup_{r in [0,1]^{SAH}} |<v, r>|`, attained at a 0/1 reward.
pub fn sup_unit_box_gap(v: &SahTensor) -> f64 {
    let (pos, neg) =
        v.as_slice().iter().fold(
            (0.0, 0.0),
            |(p, n), &x| {
                if x > 0.0 {
                    (p + x, n)
                } else {
                    (p, n - x)
                }
            },
        );
    f64::max(pos, neg)
}

/// Largest `|p_h(s'|s,a) - q_h(s'|s,a)|` over rows reachable in `truth`.
pub fn transition_error_on_reachable(truth: &MdpSpec, estimate: &MdpSpec) -> f64 {
    let shape = truth.shape();
    let reachable = reachable_states(truth);
    let mut worst: f64 = 0.0;
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            if !reachable[h][s] {
                continue;
            }
            for a in 0..shape.actions {
                for (p, q) in truth.next(h, s, a).iter().zip(estimate.next(h, s, a)) {
                    worst = worst.max((p - q).abs());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::constraint_value;
    use crate::generators::{random_mdp, random_policy, random_reward};
    use crate::mdp::{policy_visitation, sample_trajectories};

    fn median(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        if n % 2 == 1 {
            xs[n / 2]
        } else {
            0.5 * (xs[n / 2 - 1] + xs[n / 2])
        }
    }

    #[test]
    fn identical_trajectories_give_their_indicator() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let w = Trajectory::new(shape, vec![0, 2, 1, 1], vec![1, 0, 1]).unwrap();
        let data = TrajectoryDataset::new(shape, "same", vec![w.clone(); 7]).unwrap();
        assert_eq!(
            estimate_visitation(shape, &data).unwrap(),
            trajectory_visitation(shape, &w).unwrap()
        );
    }

    #[test]
    fn two_trajectories_split_evenly() {
        let shape = Shape::new(2, 2, 1).unwrap();
        let a = Trajectory::new(shape, vec![0, 0], vec![0]).unwrap();
        let b = Trajectory::new(shape, vec![0, 1], vec![1]).unwrap();
        let data = TrajectoryDataset::new(shape, "split", vec![a, b]).unwrap();
        let d = estimate_visitation(shape, &data).unwrap();
        assert_eq!(d.tensor().as_slice(), &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let shape = Shape::new(2, 2, 1).unwrap();
        let data = TrajectoryDataset::new(shape, "none", vec![]).unwrap();
        assert!(matches!(
            estimate_visitation(shape, &data),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn sup_gap_matches_grid_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let shape = Shape::new(2, 2, 2).unwrap();
        for _ in 0..5 {
            let v = SahTensor::from_fn(shape, |_, _, _| rng.gen_range(-1.0..1.0));
            // every point of {0, 0.5, 1}^8
            let mut best: f64 = 0.0;
            for code in 0..3usize.pow(8) {
                let mut c = code;
                let r = SahTensor::from_fn(shape, |_, _, _| {
                    let x = (c % 3) as f64 * 0.5;
                    c /= 3;
                    x
                });
                best = best.max(v.dot(&r).abs());
            }
            assert!((sup_unit_box_gap(&v) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn visitation_error_shrinks_at_root_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = Shape::new(3, 2, 3).unwrap();
        let mdp = random_mdp(&mut rng, shape);
        let pi = random_policy(&mut rng, shape);
        let truth = policy_visitation(&mdp, &pi).unwrap();
        let errs: Vec<f64> = [100usize, 400, 1600]
            .iter()
            .map(|&n| {
                median(
                    (0..20)
                        .map(|seed| {
                            let trajs = sample_trajectories(&mdp, &pi, n, 1000 + seed).unwrap();
                            let data = TrajectoryDataset::new(shape, "pi", trajs).unwrap();
                            let d = estimate_visitation(shape, &data).unwrap();
                            sup_unit_box_gap(&d.minus(&truth))
                        })
                        .collect(),
                )
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
    }

    #[test]
    fn zero_budget_gives_uniform_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = Shape::new(3, 2, 2).unwrap();
        let mut model = ForwardModel::new(Arc::new(random_mdp(&mut rng, shape)), 0);
        let p = estimate_transitions(&mut model, 0, ExplorationStrategy::CountGreedy).unwrap();
        assert!(p
            .transitions()
            .iter()
            .all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(model.queries(), 0);
    }

    #[test]
    fn deterministic_rows_are_recovered() {
        let shape = Shape::new(4, 2, 3).unwrap();
        let hidden =
            MdpSpec::from_fn(shape, 0, |h, s, a, t| f64::from(t == (s + a + h) % 4)).unwrap();
        for strategy in [
            ExplorationStrategy::UniformRollouts,
            ExplorationStrategy::CountGreedy,
        ] {
            let mut model = ForwardModel::new(Arc::new(hidden.clone()), 3);
            let p = estimate_transitions(&mut model, 40, strategy).unwrap();
            assert_eq!(model.queries(), 40);
            let counts_seen = TransitionCounts::from_trajectories(
                shape,
                &sample_trajectories(&hidden, &Policy::uniform(shape), 1, 0).unwrap(),
            )
            .unwrap();
            assert!(counts_seen.visits(0, 0, 0) + counts_seen.visits(0, 0, 1) == 1);
            for h in 0..3 {
                for s in 0..4 {
                    for a in 0..2 {
                        let row = p.next(h, s, a);
                        if row.contains(&1.0) {
                            assert_eq!(row, hidden.next(h, s, a));
                        }
                    }
                }
            }
            assert_eq!(
                transition_error_on_reachable(&hidden, &p),
                0.0,
                "{strategy:?}"
            );
        }
    }

    #[test]
    fn exploration_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hidden = Arc::new(random_mdp(&mut rng, Shape::new(3, 2, 3).unwrap()));
        let run = |seed| {
            let mut m = ForwardModel::new(hidden.clone(), seed);
            estimate_transitions(&mut m, 200, ExplorationStrategy::CountGreedy).unwrap()
        };
        assert_eq!(run(9), run(9));
    }

    fn raw_problem(
        rng: &mut ChaCha8Rng,
        shape: Shape,
    ) -> (
        Vec<(String, RawFeedback)>,
        Vec<(String, RawFeedback)>,
        BTreeMap<String, TrajectoryDataset>,
    ) {
        let env = Arc::new(random_mdp(rng, shape));
        let pis: Vec<Policy> = (0..3).map(|_| random_policy(rng, shape)).collect();
        let mut datasets = BTreeMap::new();
        for (i, pi) in pis.iter().enumerate() {
            let trajs = sample_trajectories(&env, pi, 100_000, 50 + i as u64).unwrap();
            datasets.insert(
                format!("pi{i}"),
                TrajectoryDataset::new(shape, format!("pi{i}"), trajs).unwrap(),
            );
        }
        let exact = |i: usize| PolicySource::Exact(policy_visitation(&env, &pis[i]).unwrap());
        let data = |i: usize| PolicySource::Dataset(format!("pi{i}"));
        let trajs = sample_trajectories(&env, &pis[0], 2, 1).unwrap();
        let build = |src: &dyn Fn(usize) -> PolicySource, envsrc: EnvSource| {
            vec![
                (
                    "demo".to_string(),
                    RawFeedback::Demonstration {
                        env: envsrc,
                        demonstrator: src(0),
                        slack: 0.5,
                    },
                ),
                (
                    "tc".to_string(),
                    RawFeedback::TrajectoryComparison {
                        first: trajs[0].clone(),
                        second: trajs[1].clone(),
                        slack: 0.1,
                    },
                ),
                (
                    "pc".to_string(),
                    RawFeedback::PolicyComparison {
                        first: src(1),
                        second: src(2),
                        slack: 0.0,
                    },
                ),
            ]
        };
        let exact_fb = build(&exact, EnvSource::Exact(env.clone()));
        let est_fb = build(
            &data,
            EnvSource::Explore {
                hidden: env.clone(),
                budget: 20_000,
                strategy: ExplorationStrategy::CountGreedy,
            },
        );
        (exact_fb, est_fb, datasets)
    }

    #[test]
    fn estimated_set_approaches_exact_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape::new(3, 2, 3).unwrap();
        let (exact_fb, est_fb, datasets) = raw_problem(&mut rng, shape);
        let exact = estimated_constraint_set(shape, &exact_fb, &BTreeMap::new(), 0).unwrap();
        let est = estimated_constraint_set(shape, &est_fb, &datasets, 0).unwrap();
        for _ in 0..10 {
            let r = random_reward(&mut rng, shape);
            for (a, b) in exact.constraints().iter().zip(est.constraints()) {
                let gap =
                    (constraint_value(a, &r).unwrap() - constraint_value(b, &r).unwrap()).abs();
                assert!(gap < 0.05, "{:?}: {gap}", a.kind());
            }
        }
        // trajectory comparisons pass through unchanged
        assert_eq!(exact.constraints()[1], est.constraints()[1]);
    }

    #[test]
    fn exact_sources_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shape = Shape::new(2, 2, 2).unwrap();
        let env = Arc::new(random_mdp(&mut rng, shape));
        let d = policy_visitation(&env, &random_policy(&mut rng, shape)).unwrap();
        let fb = vec![(
            "demo".to_string(),
            RawFeedback::Demonstration {
                env: EnvSource::Exact(env.clone()),
                demonstrator: PolicySource::Exact(d.clone()),
                slack: 0.2,
            },
        )];
        let set = estimated_constraint_set(shape, &fb, &BTreeMap::new(), 1).unwrap();
        let expected = FeasibleSetSpec::with_labels(
            shape,
            vec![(
                "demo".to_string(),
                FeedbackConstraint::Demonstration {
                    env,
                    demonstrator: d,
                    slack: 0.2,
                },
            )],
        )
        .unwrap();
        assert_eq!(set, expected);
    }

    #[test]
    fn missing_dataset_names_the_feedback() {
        let shape = Shape::new(2, 2, 2).unwrap();
        let fb = vec![(
            "prefers-b".to_string(),
            RawFeedback::PolicyComparison {
                first: PolicySource::Dataset("a".into()),
                second: PolicySource::Dataset("b".into()),
                slack: 0.0,
            },
        )];
        match estimated_constraint_set(shape, &fb, &BTreeMap::new(), 0) {
            Err(Error::MissingDataset { feedback, dataset }) => {
                assert_eq!(feedback, "prefers-b");
                assert_eq!(dataset, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
