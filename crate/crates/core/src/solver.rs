//! Primal-dual subgradient solver for the extreme policy-gap values over the
//! feasible reward set, and the robust prediction built from them.
//!
//! For `g(r) = <Δd, r>` the worst-case absolute error of a prediction `x` over
//! the feasible set is `max(x - m, M - x)` where `m`, `M` are the extreme values
//! of `g`; it is minimized by the midpoint `(M + m) / 2` with value `(M - m) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{FeasibleSetSpec, FeedbackConstraint};
use crate::reward::{RewardPoint, RewardSpace};
use crate::tensor::SahTensor;

/// Iteration count `K`, step size `alpha` and dual radius `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub iters: usize,
    pub alpha: f64,
    pub dual_radius: f64,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.iters < 1 {
            return Err(Error::InvalidArgument(
                "iteration count must be >= 1".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !(self.dual_radius >= 0.0 && self.dual_radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dual radius must be nonnegative and finite, got {}",
                self.dual_radius
            )));
        }
        Ok(())
    }
}

/// Step size and dual radius from the worst-case convergence bound, plus the
/// subgradient-norm bounds they are built from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedHyperparams {
    pub dual_radius: f64,
    pub alpha: f64,
    /// `U = 2 sqrt(H) (1 + s sqrt(|F|))`, the bound on `||∂_r L||_2`.
    pub primal_bound: f64,
    /// `2 H sqrt(|F|)`, the bound on `||∂_λ L||_2`.
    pub dual_bound: f64,
}

impl DerivedHyperparams {
    pub fn with_iters(&self, iters: usize) -> Hyperparams {
        Hyperparams {
            iters,
            alpha: self.alpha,
            dual_radius: self.dual_radius,
        }
    }
}

/// `s = 4H/ξ + sqrt((4H/ξ)^2 + SAH/4)` and `α = ε / (16 H (1 + s sqrt(|F|))^2)`.
pub fn default_hyperparams(
    horizon: usize,
    states: usize,
    actions: usize,
    xi: f64,
    epsilon: f64,
    constraints: usize,
) -> Result<DerivedHyperparams> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Slater margin must be positive, got {xi}"
        )));
    }
    let h = horizon as f64;
    if !(epsilon > 0.0 && epsilon <= 2.0 * h) {
        return Err(Error::InvalidArgument(format!(
            "target accuracy must lie in (0, 2H] = (0, {}], got {epsilon}",
            2.0 * h
        )));
    }
    let lead = 4.0 * h / xi;
    let sah = (states * actions * horizon) as f64;
    let s = lead + (lead * lead + sah / 4.0).sqrt();
    let root_f = (constraints as f64).sqrt();
    let alpha = epsilon / (16.0 * h * (1.0 + s * root_f).powi(2));
    Ok(DerivedHyperparams {
        dual_radius: s,
        alpha,
        primal_bound: 2.0 * h.sqrt() * (1.0 + s * root_f),
        dual_bound: 2.0 * h * root_f,
    })
}

/// Predict `<Δd, r>` robustly over the rewards satisfying every constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct RobRelProblem {
    objective: SahTensor,
    constraints: FeasibleSetSpec,
    space: RewardSpace,
    hyper: Hyperparams,
}

impl RobRelProblem {
    pub fn new(
        objective: SahTensor,
        constraints: FeasibleSetSpec,
        space: RewardSpace,
        hyper: Hyperparams,
    ) -> Result<Self> {
        let shape = space.shape();
        shape.ensure_eq(&objective.shape())?;
        shape.ensure_eq(&constraints.shape())?;
        if !objective.is_finite() {
            return Err(Error::InvalidArgument(
                "objective direction has non-finite entries".into(),
            ));
        }
        hyper.validate()?;
        Ok(RobRelProblem {
            objective,
            constraints,
            space,
            hyper,
        })
    }

    /// `Δd`
    pub fn objective(&self) -> &SahTensor {
        &self.objective
    }

    pub fn constraints(&self) -> &FeasibleSetSpec {
        &self.constraints
    }

    pub fn space(&self) -> &RewardSpace {
        &self.space
    }

    pub fn hyper(&self) -> Hyperparams {
        self.hyper
    }

    pub fn with_hyper(&self, hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        Ok(RobRelProblem {
            hyper,
            ..self.clone()
        })
    }

    pub fn with_constraints(&self, constraints: FeasibleSetSpec) -> Result<Self> {
        Self::new(
            self.objective.clone(),
            constraints,
            self.space.clone(),
            self.hyper,
        )
    }

    /// `<Δd, r>`
    pub fn gap(&self, r: &RewardPoint) -> f64 {
        self.objective.dot(r.values())
    }
}

/// Sign constraint on the multipliers: `λ >= 0` when minimizing, `λ <= 0` when maximizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualSign {
    Nonnegative,
    Nonpositive,
}

/// One multiplier per constraint, in the layout order of the feasible set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualVector(pub Vec<f64>);

impl DualVector {
    pub fn zeros(len: usize) -> Self {
        DualVector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_layout(&self, set: &FeasibleSetSpec) -> Result<()> {
        if self.0.len() != set.len() {
            return Err(Error::DualLayout {
                expected: set.len(),
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

/// `L(r, λ) = <Δd, r> + Σ_i λ_i g_i(r)`
pub fn lagrangian(problem: &RobRelProblem, r: &RewardPoint, lambda: &DualVector) -> Result<f64> {
    lambda.check_layout(&problem.constraints)?;
    let mut value = problem.gap(r);
    for (&l, c) in lambda.0.iter().zip(problem.constraints.constraints()) {
        if l != 0.0 {
            value += l * crate::feedback::constraint_value(c, r)?;
        }
    }
    Ok(value)
}

/// Subgradients of the Lagrangian with respect to the reward (in reward space)
/// and the multipliers (`∂_λ L = g(r)`).
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianSubgradients {
    pub reward: SahTensor,
    pub dual: Vec<f64>,
}

pub fn lagrangian_subgradients(
    problem: &RobRelProblem,
    r: &RewardPoint,
    lambda: &DualVector,
) -> Result<LagrangianSubgradients> {
    lambda.check_layout(&problem.constraints)?;
    let mut reward = problem.objective.clone();
    let mut dual = Vec::with_capacity(lambda.0.len());
    for (&l, c) in lambda.0.iter().zip(problem.constraints.constraints()) {
        let eval = c.evaluate(r)?;
        if l != 0.0 {
            reward.add_scaled(l, &eval.subgradient);
        }
        dual.push(eval.value);
    }
    Ok(LagrangianSubgradients { reward, dual })
}

/// Euclidean projection onto the reward set: clamp every parameter to `[0, 1]`.
pub fn project_reward(space: &RewardSpace, mut params: Vec<f64>) -> RewardPoint {
    for x in &mut params {
        *x = x.clamp(0.0, 1.0);
    }
    space.point(params)
}

/// Euclidean projection onto `{λ : sign(λ) as given, ||λ||_2 <= s}`.
///
/// Clamping to the orthant and then rescaling radially is exact for this set.
pub fn project_dual(lambda: &[f64], radius: f64, sign: DualSign) -> DualVector {
    let mut out: Vec<f64> = lambda
        .iter()
        .map(|&x| match sign {
            DualSign::Nonnegative => x.max(0.0),
            DualSign::Nonpositive => x.min(0.0),
        })
        .collect();
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > radius {
        let k = radius / norm;
        for x in &mut out {
            *x *= k;
        }
    }
    DualVector(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Min => "min",
            Direction::Max => "max",
        }
    }
}

/// State of one iteration, measured at `(r_k, λ_k)` before the update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// `<Δd, r_k>`
    pub objective: f64,
    /// `max(0, max_i g_i(r_k))`
    pub max_violation: f64,
    /// `||λ_k||_2`
    pub dual_norm: f64,
    /// `||∂_r L(r_k, λ_k)||_2` in reward space.
    pub primal_grad_norm: f64,
    /// `||∂_λ L(r_k, λ_k)||_2`
    pub dual_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extremum {
    pub direction: Direction,
    /// `<Δd, r̂_K>`
    pub value: f64,
    /// `r̂_K = (1/K) Σ_{k=0}^{K} r_k`
    pub reward: RewardPoint,
    /// `K + 1` rows when requested.
    pub trace: Option<Vec<TraceRow>>,
}

/// Runs `K + 1` primal-dual steps from `r_0 = 0`, `λ_0 = 0`.
///
/// Minimizing: `r ← Π(r - α ∂_r L)`, `λ ← Π_{D+}(λ + α g(r))`.
/// Maximizing: `r ← Π(r + α ∂_r L)`, `λ ← Π_{D-}(λ - α g(r))`.
/// The returned average divides the sum of the `K + 1` iterates by `K`.
pub fn pdsm_extremum(
    problem: &RobRelProblem,
    direction: Direction,
    trace: bool,
) -> Result<Extremum> {
    let hyper = problem.hyper;
    hyper.validate()?;
    let space = &problem.space;
    let (sign, step, dual_sign) = match direction {
        Direction::Min => (-1.0, 1.0, DualSign::Nonnegative),
        Direction::Max => (1.0, -1.0, DualSign::Nonpositive),
    };
    let alpha = hyper.alpha;
    let mut params = vec![0.0; space.dim()];
    let mut r = space.point(params.clone());
    let mut lambda = DualVector::zeros(problem.constraints.len());
    let mut sum = vec![0.0; space.dim()];
    let mut rows = trace.then(|| Vec::with_capacity(hyper.iters + 1));

    for k in 0..=hyper.iters {
        for (acc, x) in sum.iter_mut().zip(&params) {
            *acc += x;
        }
        let grads = lagrangian_subgradients(problem, &r, &lambda)?;
        if let Some(rows) = rows.as_mut() {
            let worst = grads.dual.iter().copied().fold(0.0, f64::max);
            rows.push(TraceRow {
                iter: k,
                objective: problem.gap(&r),
                max_violation: worst,
                dual_norm: lambda.norm2(),
                primal_grad_norm: grads.reward.norm2(),
                dual_grad_norm: grads.dual.iter().map(|x| x * x).sum::<f64>().sqrt(),
            });
        }
        if k == hyper.iters {
            break;
        }
        let pulled = space.pull_back(&grads.reward);
        let moved: Vec<f64> = params
            .iter()
            .zip(&pulled)
            .map(|(x, g)| x + sign * alpha * g)
            .collect();
        let dual_moved: Vec<f64> = lambda
            .0
            .iter()
            .zip(&grads.dual)
            .map(|(l, g)| l + step * alpha * g)
            .collect();
        r = project_reward(space, moved);
        params = match r.theta() {
            Some(theta) => theta.to_vec(),
            None => r.values().as_slice().to_vec(),
        };
        lambda = project_dual(&dual_moved, hyper.dual_radius, dual_sign);
    }

    let k = hyper.iters as f64;
    let averaged: Vec<f64> = sum.into_iter().map(|x| x / k).collect();
    let reward = space.point(averaged);
    Ok(Extremum {
        direction,
        value: problem.gap(&reward),
        reward,
        trace: rows,
    })
}

/// `(x̂, Î) = ((M + m) / 2, (M - m) / 2)`
pub fn combine(min: f64, max: f64) -> (f64, f64) {
    ((max + min) / 2.0, (max - min) / 2.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub min: Extremum,
    pub max: Extremum,
    /// `x̂ = (M̂ + m̂) / 2`
    pub prediction: f64,
    /// `Î = (M̂ - m̂) / 2`
    pub uninformativeness: f64,
    pub hyper: Hyperparams,
}

/// Both extremum solves (run concurrently) and their combination.
pub fn rob_rel(problem: &RobRelProblem) -> Result<SolveReport> {
    rob_rel_traced(problem, false)
}

pub fn rob_rel_traced(problem: &RobRelProblem, trace: bool) -> Result<SolveReport> {
    let (min, max) = rayon::join(
        || pdsm_extremum(problem, Direction::Min, trace),
        || pdsm_extremum(problem, Direction::Max, trace),
    );
    let (min, max) = (min?, max?);
    let (prediction, uninformativeness) = combine(min.value, max.value);
    Ok(SolveReport {
        min,
        max,
        prediction,
        uninformativeness,
        hyper: problem.hyper,
    })
}

/// `max(x - m, M - x)`: the largest error of predicting `x` when the truth can be anywhere in `[m, M]`.
pub fn worst_case_loss(x: f64, min: f64, max: f64) -> Result<f64> {
    if min > max {
        return Err(Error::InvalidArgument(format!(
            "lower extreme {min} exceeds upper extreme {max}"
        )));
    }
    Ok(f64::max(x - min, max - x))
}

/// `Î(F) - Î(F ∪ {extra})` from two solver runs.
pub fn information_gain(
    problem: &RobRelProblem,
    label: &str,
    extra: FeedbackConstraint,
) -> Result<f64> {
    let before = rob_rel(problem)?.uninformativeness;
    let extended = problem.with_constraints(problem.constraints.with_extra(label, extra)?)?;
    let after = rob_rel(&extended)?.uninformativeness;
    Ok(before - after)
}
