//! Finite-horizon tabular MDPs without reward.
//!
//! Provides transition models, policies, visitation distributions, expected
//! returns, backward induction and trajectory sampling. Steps are zero-based:
//! a trajectory visits `s_0 .. s_H` and plays `a_0 .. a_{H-1}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::RewardPoint;
use crate::tensor::{SahTensor, Shape};

/// Tolerance on row sums of transition and policy tables.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// Actions whose Q-value is within this distance of the maximum count as optimal.
pub const TIE_TOLERANCE: f64 = 1e-9;

fn check_simplex(row: &[f64], what: &'static str, h: usize, s: usize, a: usize) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if row.iter().any(|x| !(x.is_finite() && *x >= 0.0))
        || (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE
    {
        return Err(Error::NotADistribution { what, h, s, a, sum });
    }
    Ok(())
}

/// An MDP without reward: `(S, A, H, s0, p)` with `p[h][s][a]` a distribution over next states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    shape: Shape,
    initial_state: usize,
    transitions: Vec<f64>,
}

impl MdpSpec {
    /// `transitions` is laid out as `[h][s][a][s']`.
    pub fn new(shape: Shape, initial_state: usize, transitions: Vec<f64>) -> Result<Self> {
        let expected = shape.len() * shape.states;
        if transitions.len() != expected {
            return Err(Error::shape(
                format!("{expected} transition entries ({shape})"),
                transitions.len(),
            ));
        }
        if initial_state >= shape.states {
            return Err(Error::InvalidArgument(format!(
                "initial state {initial_state} out of range for {} states",
                shape.states
            )));
        }
        let mdp = MdpSpec {
            shape,
            initial_state,
            transitions,
        };
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    check_simplex(mdp.next(h, s, a), "transition row", h, s, a)?;
                }
            }
        }
        Ok(mdp)
    }

    /// Broadcasts a stationary `[s][a][s']` table over all steps.
    pub fn stationary(shape: Shape, initial_state: usize, table: &[f64]) -> Result<Self> {
        let per_step = shape.states * shape.actions * shape.states;
        if table.len() != per_step {
            return Err(Error::shape(
                format!("{per_step} stationary transition entries"),
                table.len(),
            ));
        }
        let transitions = table
            .iter()
            .copied()
            .cycle()
            .take(per_step * shape.horizon)
            .collect();
        Self::new(shape, initial_state, transitions)
    }

    pub fn from_fn(
        shape: Shape,
        initial_state: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut transitions = Vec::with_capacity(shape.len() * shape.states);
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    for t in 0..shape.states {
                        transitions.push(f(h, s, a, t));
                    }
                }
            }
        }
        Self::new(shape, initial_state, transitions)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Next-state distribution `p_h(. | s, a)`.
    #[inline]
    pub fn next(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.shape.states;
        let i = self.shape.offset(h, s, a) * n;
        &self.transitions[i..i + n]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// The same dynamics started from another state.
    pub fn with_initial_state(&self, initial_state: usize) -> Result<Self> {
        Self::new(self.shape, initial_state, self.transitions.clone())
    }

    fn check_reward(&self, r: &SahTensor) -> Result<()> {
        self.shape.ensure_eq(&r.shape())
    }
}

/// A Markovian policy `pi_h(a | s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    shape: Shape,
    probs: Vec<f64>,
}

impl Policy {
    /// `probs` is laid out as `[h][s][a]`.
    pub fn new(shape: Shape, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != shape.len() {
            return Err(Error::shape(
                format!("{} policy entries ({shape})", shape.len()),
                probs.len(),
            ));
        }
        let policy = Policy { shape, probs };
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                check_simplex(policy.dist(h, s), "policy row", h, s, 0)?;
            }
        }
        Ok(policy)
    }

    /// `actions[h * S + s]` is the action played at `(h, s)`.
    pub fn deterministic(shape: Shape, actions: &[usize]) -> Result<Self> {
        if actions.len() != shape.horizon * shape.states {
            return Err(Error::shape(
                format!("{} actions", shape.horizon * shape.states),
                actions.len(),
            ));
        }
        if let Some(a) = actions.iter().find(|&&a| a >= shape.actions) {
            return Err(Error::InvalidArgument(format!("action {a} out of range")));
        }
        let mut probs = vec![0.0; shape.len()];
        for (hs, &a) in actions.iter().enumerate() {
            probs[hs * shape.actions + a] = 1.0;
        }
        Ok(Policy { shape, probs })
    }

    /// Always plays `action`.
    pub fn constant(shape: Shape, action: usize) -> Result<Self> {
        Self::deterministic(shape, &vec![action; shape.horizon * shape.states])
    }

    pub fn uniform(shape: Shape) -> Self {
        Policy {
            shape,
            probs: vec![1.0 / shape.actions as f64; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dist(&self, h: usize, s: usize) -> &[f64] {
        let i = self.shape.offset(h, s, 0);
        &self.probs[i..i + self.shape.actions]
    }

    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[self.shape.offset(h, s, a)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The action played at `(h, s)` if the policy is deterministic there.
    pub fn action(&self, h: usize, s: usize) -> Option<usize> {
        let row = self.dist(h, s);
        row.iter().position(|&p| p == 1.0)
    }
}

/// Visitation distribution `d_h(s, a)`: each step slice sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitDist(SahTensor);

impl VisitDist {
    pub fn new(d: SahTensor) -> Result<Self> {
        let shape = d.shape();
        for h in 0..shape.horizon {
            let slice = d.step(h);
            let sum: f64 = slice.iter().sum();
            if slice.iter().any(|x| !(x.is_finite() && *x >= 0.0))
                || (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE
            {
                return Err(Error::NotADistribution {
                    what: "visitation step",
                    h,
                    s: 0,
                    a: 0,
                    sum,
                });
            }
        }
        Ok(VisitDist(d))
    }

    pub(crate) fn new_unchecked(d: SahTensor) -> Self {
        VisitDist(d)
    }

    pub fn tensor(&self) -> &SahTensor {
        &self.0
    }

    pub fn into_tensor(self) -> SahTensor {
        self.0
    }

    pub fn shape(&self) -> Shape {
        self.0.shape()
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.0[(h, s, a)]
    }

    /// `d - other`, the direction of comparison-type constraints.
    pub fn minus(&self, other: &VisitDist) -> SahTensor {
        self.0.sub(&other.0)
    }
}

/// A state-action trajectory `(s_0, a_0, ..., s_{H-1}, a_{H-1}, s_H)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    pub fn new(shape: Shape, states: Vec<usize>, actions: Vec<usize>) -> Result<Self> {
        let t = Trajectory { states, actions };
        t.validate(shape)?;
        Ok(t)
    }

    pub fn validate(&self, shape: Shape) -> Result<()> {
        if self.states.len() != shape.horizon + 1 || self.actions.len() != shape.horizon {
            return Err(Error::shape(
                format!("{} states and {} actions", shape.horizon + 1, shape.horizon),
                format!(
                    "{} states and {} actions",
                    self.states.len(),
                    self.actions.len()
                ),
            ));
        }
        if self.states.iter().any(|&s| s >= shape.states)
            || self.actions.iter().any(|&a| a >= shape.actions)
        {
            return Err(Error::InvalidArgument(
                "trajectory index out of range".into(),
            ));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

/// Result of backward induction.
#[derive(Clone, Debug)]
pub struct Plan {
    /// Optimal value from the initial state.
    pub value: f64,
    /// Deterministic optimal policy; ties go to the lowest action index.
    pub policy: Policy,
    /// `V_h(s)` for `h = 0..=H`, laid out as `[h][s]`.
    pub state_values: Vec<f64>,
    /// `Q_h(s, a)`.
    pub q_values: SahTensor,
    /// Per `(h, s)` (index `h * S + s`): actions within [`TIE_TOLERANCE`] of the best Q-value.
    pub optimal_actions: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sense {
    Max,
    Min,
}

fn plan(
    mdp: &MdpSpec,
    r: &SahTensor,
    sense: Sense,
    allowed: Option<&[Vec<usize>]>,
) -> Result<Plan> {
    mdp.check_reward(r)?;
    let shape = mdp.shape;
    let (ns, na, nh) = (shape.states, shape.actions, shape.horizon);
    let mut v = vec![0.0; (nh + 1) * ns];
    let mut q = SahTensor::zeros(shape);
    let mut actions = vec![0usize; nh * ns];
    let mut optimal = vec![Vec::new(); nh * ns];
    let better = |x: f64, y: f64| match sense {
        Sense::Max => x > y,
        Sense::Min => x < y,
    };

    for h in (0..nh).rev() {
        let (now, later) = v.split_at_mut((h + 1) * ns);
        let v_next = &later[..ns];
        for s in 0..ns {
            for a in 0..na {
                let cont: f64 = mdp
                    .next(h, s, a)
                    .iter()
                    .zip(v_next)
                    .map(|(p, v)| p * v)
                    .sum();
                q[(h, s, a)] = r[(h, s, a)] + cont;
            }
            let candidates: Vec<usize> = match allowed {
                Some(sets) => sets[h * ns + s].clone(),
                None => (0..na).collect(),
            };
            let mut best = q[(h, s, candidates[0])];
            for &a in &candidates[1..] {
                if better(q[(h, s, a)], best) {
                    best = q[(h, s, a)];
                }
            }
            let ties: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&a| (q[(h, s, a)] - best).abs() <= TIE_TOLERANCE)
                .collect();
            actions[h * ns + s] = ties[0];
            now[h * ns + s] = best;
            optimal[h * ns + s] = ties;
        }
    }

    Ok(Plan {
        value: v[mdp.initial_state],
        policy: Policy::deterministic(shape, &actions)?,
        state_values: v,
        q_values: q,
        optimal_actions: optimal,
    })
}

/// `J*(r; p)` with an optimal deterministic policy. Rewards may be any finite values.
pub fn backward_induction(mdp: &MdpSpec, r: &SahTensor) -> Result<Plan> {
    plan(mdp, r, Sense::Max, None)
}

/// `min_pi J^pi(r; p)`, with a minimizing policy.
pub fn worst_policy(mdp: &MdpSpec, r: &SahTensor) -> Result<Plan> {
    plan(mdp, r, Sense::Min, None)
}

/// Minimizes `J^pi(r; p)` over policies that only play `allowed[h * S + s]` actions.
pub fn restricted_minimum(mdp: &MdpSpec, r: &SahTensor, allowed: &[Vec<usize>]) -> Result<Plan> {
    let shape = mdp.shape;
    if allowed.len() != shape.horizon * shape.states
        || allowed
            .iter()
            .any(|set| set.is_empty() || set.iter().any(|&a| a >= shape.actions))
    {
        return Err(Error::InvalidArgument(
            "allowed action sets must be nonempty and in range for every (h, s)".into(),
        ));
    }
    plan(mdp, r, Sense::Min, Some(allowed))
}

/// Visitation distribution of `policy` in `mdp`.
pub fn policy_visitation(mdp: &MdpSpec, policy: &Policy) -> Result<VisitDist> {
    let shape = mdp.shape;
    shape.ensure_eq(&policy.shape)?;
    let (ns, na) = (shape.states, shape.actions);
    let mut d = SahTensor::zeros(shape);
    let mut state_mass = vec![0.0; ns];
    state_mass[mdp.initial_state] = 1.0;
    for h in 0..shape.horizon {
        let mut next_mass = vec![0.0; ns];
        for s in 0..ns {
            let mass = state_mass[s];
            if mass == 0.0 {
                continue;
            }
            for a in 0..na {
                let x = mass * policy.prob(h, s, a);
                d[(h, s, a)] = x;
                if x != 0.0 {
                    for (t, p) in mdp.next(h, s, a).iter().enumerate() {
                        next_mass[t] += x * p;
                    }
                }
            }
        }
        state_mass = next_mass;
    }
    Ok(VisitDist::new_unchecked(d))
}

/// `J = <d, r>`.
pub fn expected_return(d: &VisitDist, r: &RewardPoint) -> Result<f64> {
    d.shape().ensure_eq(&r.shape())?;
    Ok(d.tensor().dot(r.values()))
}

/// Indicator tensor of the state-action pairs visited by `traj`.
pub fn trajectory_visitation(shape: Shape, traj: &Trajectory) -> Result<VisitDist> {
    traj.validate(shape)?;
    let mut d = SahTensor::zeros(shape);
    for (h, (&s, &a)) in traj.states.iter().zip(&traj.actions).enumerate() {
        d[(h, s, a)] = 1.0;
    }
    Ok(VisitDist::new_unchecked(d))
}

/// `G(traj; r) = sum_h r_h(s_h, a_h)`.
pub fn trajectory_return(traj: &Trajectory, r: &SahTensor) -> f64 {
    traj.states
        .iter()
        .zip(&traj.actions)
        .enumerate()
        .map(|(h, (&s, &a))| r[(h, s, a)])
        .sum()
}

/// Inverse-CDF draw from `probs` in index order.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left `acc` slightly below one
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// One trajectory under `policy`, drawing from `rng`.
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &MdpSpec,
    policy: &Policy,
    rng: &mut R,
) -> Trajectory {
    let h_max = mdp.shape.horizon;
    let mut states = Vec::with_capacity(h_max + 1);
    let mut actions = Vec::with_capacity(h_max);
    let mut s = mdp.initial_state;
    states.push(s);
    for h in 0..h_max {
        let a = sample_index(policy.dist(h, s), rng);
        s = sample_index(mdp.next(h, s, a), rng);
        actions.push(a);
        states.push(s);
    }
    Trajectory { states, actions }
}

/// `n` i.i.d. trajectories; identical output for identical `seed`.
pub fn sample_trajectories(
    mdp: &MdpSpec,
    policy: &Policy,
    n: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    mdp.shape.ensure_eq(&policy.shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| sample_trajectory(mdp, policy, &mut rng))
        .collect())
}
