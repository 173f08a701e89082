//! The JSON problem-spec format.
//!
//! A spec names environments, policies and feedback, picks the reward
//! parameterization and the solver hyperparameters, and says whether the
//! solver sees exact quantities or estimates built from sampled data. See
//! `docs/spec-format.md` for the schema.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    estimate_visitation, estimated_constraint_set, EnvSource, ExplorationStrategy, PolicySource,
    RawFeedback, TrajectoryDataset,
};
use crate::feedback::FeasibleSetSpec;
use crate::mdp::{
    policy_visitation, sample_trajectories, MdpSpec, Policy, Trajectory, VisitDist,
    DISTRIBUTION_TOLERANCE,
};
use crate::oracle::{max_slater_margin, RewardGrid};
use crate::reward::{FeatureMap, RewardSpace};
use crate::solver::{default_hyperparams, DerivedHyperparams, Hyperparams, RobRelProblem};
use crate::tensor::{SahTensor, Shape};

pub const SCHEMA_VERSION: u32 = 1;

/// Grid resolution used to look for a strictly feasible reward when the Slater
/// margin is not given.
pub const SLATER_GRID_RESOLUTION: f64 = 0.1;

/// Largest grid scanned for the Slater check.
const SLATER_GRID_CAP: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub schema_version: u32,
    pub shape: Shape,
    pub environments: BTreeMap<String, EnvironmentSpec>,
    pub features: FeatureSpec,
    pub policies: BTreeMap<String, PolicySpec>,
    pub target: TargetSpec,
    pub feedback: Vec<FeedbackSpec>,
    pub hyper: HyperSpec,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub initial_state: usize,
    /// `[h][s][a][s']`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `[s][a][s']`, the same at every step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_stationary: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureSpec {
    /// The string `"tabular"`.
    Tabular(TabularTag),
    Map {
        dim: usize,
        /// `[h][s][a]`, `null` for the constant-zero reward.
        index: Vec<Vec<Vec<Option<usize>>>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TabularTag {
    Tabular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// `[h][s][a]` action probabilities.
    Table {
        probs: Vec<Vec<Vec<f64>>>,
    },
    /// `[h][s]` deterministic actions.
    Actions {
        actions: Vec<Vec<usize>>,
    },
    Constant {
        action: usize,
    },
    /// Trajectories in a JSON file, relative to the spec file. The visitation
    /// is always estimated from them.
    Dataset {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub environment: String,
    pub first: String,
    pub second: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedbackSpec {
    Demonstration {
        label: String,
        environment: String,
        policy: String,
        slack: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exploration_budget: Option<usize>,
    },
    TrajectoryComparison {
        label: String,
        first: TrajectorySpec,
        second: TrajectorySpec,
        #[serde(default)]
        slack: f64,
    },
    PolicyComparison {
        label: String,
        environment: String,
        first: String,
        second: String,
        #[serde(default)]
        slack: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    FractionalComparison {
        label: String,
        environment: String,
        first: String,
        second: String,
        ratio: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    BadPolicyDemonstration {
        label: String,
        environment: String,
        policy: String,
        slack: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exploration_budget: Option<usize>,
    },
}

impl FeedbackSpec {
    pub fn label(&self) -> &str {
        match self {
            FeedbackSpec::Demonstration { label, .. }
            | FeedbackSpec::TrajectoryComparison { label, .. }
            | FeedbackSpec::PolicyComparison { label, .. }
            | FeedbackSpec::FractionalComparison { label, .. }
            | FeedbackSpec::BadPolicyDemonstration { label, .. } => label,
        }
    }
}

/// Either `alpha` and `dual_radius` directly, or `epsilon` (and optionally
/// `xi`) to derive the missing ones from the worst-case convergence bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSpec {
    pub iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

/// Command-line replacements for [`HyperSpec`] fields.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HyperOverrides {
    pub iters: Option<usize>,
    pub alpha: Option<f64>,
    pub dual_radius: Option<f64>,
    pub epsilon: Option<f64>,
    pub xi: Option<f64>,
}

impl HyperSpec {
    pub fn merged(&self, o: &HyperOverrides) -> HyperSpec {
        HyperSpec {
            iters: o.iters.unwrap_or(self.iters),
            alpha: o.alpha.or(self.alpha),
            dual_radius: o.dual_radius.or(self.dual_radius),
            epsilon: o.epsilon.or(self.epsilon),
            xi: o.xi.or(self.xi),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSpec {
    pub seed: u64,
    /// Trajectories sampled per policy unless a feedback overrides it.
    pub samples: usize,
    /// Forward-model queries per demonstration environment unless overridden.
    pub exploration_budget: usize,
    #[serde(default)]
    pub strategy: ExplorationStrategy,
}

/// How the hyperparameters were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HyperResolution {
    pub used: Hyperparams,
    pub epsilon: Option<f64>,
    pub xi: Option<f64>,
    /// Set when `xi` came from a grid search rather than from the spec.
    pub xi_estimated: bool,
    pub derived: Option<DerivedHyperparams>,
}

/// A validated spec turned into solver inputs.
#[derive(Clone, Debug)]
pub struct LoadedProblem {
    pub spec: SpecFile,
    /// What the solver sees (estimated quantities in estimated mode).
    pub problem: RobRelProblem,
    /// Exact constraints and objective, for the oracle.
    pub exact_constraints: FeasibleSetSpec,
    pub exact_objective: SahTensor,
    pub environments: BTreeMap<String, Arc<MdpSpec>>,
    pub hyper: HyperResolution,
    /// Best Slater margin found on a coarse grid of the exact feasible set.
    pub slater_margin: Option<f64>,
    pub warnings: Vec<String>,
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SpecFile = serde_json::from_str(text).map_err(|e| {
            Error::spec(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(Error::spec(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    spec.schema_version
                ),
            ));
        }
        Ok(spec)
    }

    /// Canonical form: pretty JSON with sorted maps and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Validates every reference and array, estimates what needs estimating and
    /// resolves the hyperparameters. `base_dir` anchors dataset paths.
    pub fn build(&self, base_dir: &Path, overrides: &HyperOverrides) -> Result<LoadedProblem> {
        let shape = Shape::new(self.shape.states, self.shape.actions, self.shape.horizon)
            .map_err(|e| Error::spec("shape", e.to_string()))?;
        let environments = self.environments(shape)?;
        let space = self.reward_space(shape)?;
        let policies = self.policies(shape, base_dir)?;
        let ctx = Context {
            shape,
            environments: &environments,
            policies: &policies,
        };

        let target_env = ctx.env("target.environment", &self.target.environment)?;
        let exact_d =
            |field: &str, name: &str, env: &Arc<MdpSpec>| ctx.exact_visitation(field, name, env);
        let exact_objective = exact_d("target.first", &self.target.first, &target_env)?
            .minus(&exact_d("target.second", &self.target.second, &target_env)?);
        let exact_constraints = self.constraints(&ctx, None)?;

        let (objective, constraints) = match self.mode {
            Mode::Exact => (exact_objective.clone(), exact_constraints.clone()),
            Mode::Estimated => {
                let est = self.estimation.as_ref().ok_or_else(|| {
                    Error::spec("estimation", "estimated mode needs an `estimation` block")
                })?;
                let mut sampler = Sampler::new(est);
                let first = ctx.visitation_with(
                    "target.first",
                    &self.target.first,
                    &target_env,
                    &mut sampler,
                    None,
                )?;
                let second = ctx.visitation_with(
                    "target.second",
                    &self.target.second,
                    &target_env,
                    &mut sampler,
                    None,
                )?;
                let constraints = self.constraints(&ctx, Some(&mut sampler))?;
                (first.minus(&second), constraints)
            }
        };

        let mut warnings = Vec::new();
        let slater_margin = match RewardGrid::for_space(&space, SLATER_GRID_RESOLUTION) {
            Ok(grid) if grid.len() <= SLATER_GRID_CAP => {
                Some(max_slater_margin(&exact_constraints, &space, &grid, SLATER_GRID_CAP)?.0)
            }
            _ => None,
        };
        if let Some(m) = slater_margin {
            if m <= 0.0 {
                warnings.push(format!(
                    "no strictly feasible reward found on a {SLATER_GRID_RESOLUTION}-grid (best margin {m}); \
                     the feasible set may be empty or thin"
                ));
            }
        }

        let hyper = resolve_hyper(
            &self.hyper.merged(overrides),
            shape,
            constraints.len(),
            slater_margin,
        )?;
        let problem = RobRelProblem::new(objective, constraints, space, hyper.used)?;
        Ok(LoadedProblem {
            spec: self.clone(),
            problem,
            exact_constraints,
            exact_objective,
            environments,
            hyper,
            slater_margin,
            warnings,
        })
    }

    fn environments(&self, shape: Shape) -> Result<BTreeMap<String, Arc<MdpSpec>>> {
        let mut out = BTreeMap::new();
        for (name, env) in &self.environments {
            let path = format!("environments.{name}");
            out.insert(name.clone(), Arc::new(env.build(shape, &path)?));
        }
        Ok(out)
    }

    fn reward_space(&self, shape: Shape) -> Result<RewardSpace> {
        match &self.features {
            FeatureSpec::Tabular(_) => Ok(RewardSpace::Tabular(shape)),
            FeatureSpec::Map { dim, index } => {
                let flat = flatten3(index, shape, "features.index")?;
                FeatureMap::new(shape, *dim, flat)
                    .map(RewardSpace::Features)
                    .map_err(|e| Error::spec("features", e.to_string()))
            }
        }
    }

    fn policies(&self, shape: Shape, base_dir: &Path) -> Result<BTreeMap<String, PolicyKind>> {
        let mut out = BTreeMap::new();
        for (name, p) in &self.policies {
            let path = format!("policies.{name}");
            let kind = match p {
                PolicySpec::Table { probs } => {
                    let flat: Vec<f64> = flatten3(probs, shape, &format!("{path}.probs"))?;
                    PolicyKind::Known(
                        Policy::new(shape, flat).map_err(|e| Error::spec(&path, e.to_string()))?,
                    )
                }
                PolicySpec::Actions { actions } => {
                    if actions.len() != shape.horizon
                        || actions.iter().any(|row| row.len() != shape.states)
                    {
                        return Err(Error::spec(
                            format!("{path}.actions"),
                            format!("expected [{}][{}] actions", shape.horizon, shape.states),
                        ));
                    }
                    let flat: Vec<usize> = actions.concat();
                    PolicyKind::Known(
                        Policy::deterministic(shape, &flat)
                            .map_err(|e| Error::spec(&path, e.to_string()))?,
                    )
                }
                PolicySpec::Constant { action } => PolicyKind::Known(
                    Policy::constant(shape, *action)
                        .map_err(|e| Error::spec(&path, e.to_string()))?,
                ),
                PolicySpec::Dataset { path: file } => {
                    let full = base_dir.join(file);
                    let text = std::fs::read_to_string(&full)?;
                    let data: TrajectoryDataset = serde_json::from_str(&text).map_err(|e| {
                        Error::spec(format!("{path}.path"), format!("{}: {e}", full.display()))
                    })?;
                    let data = TrajectoryDataset::new(shape, data.source, data.trajectories)
                        .map_err(|e| Error::spec(format!("{path}.path"), e.to_string()))?;
                    let d = estimate_visitation(shape, &data)
                        .map_err(|e| Error::spec(&path, e.to_string()))?;
                    PolicyKind::Data(d)
                }
            };
            out.insert(name.clone(), kind);
        }
        Ok(out)
    }

    fn constraints(
        &self,
        ctx: &Context<'_>,
        mut sampler: Option<&mut Sampler>,
    ) -> Result<FeasibleSetSpec> {
        let shape = ctx.shape;
        let mut raw = Vec::with_capacity(self.feedback.len());
        let mut datasets = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (i, fb) in self.feedback.iter().enumerate() {
            let path = format!("feedback[{i}]");
            if !seen.insert(fb.label().to_string()) {
                return Err(Error::spec(
                    format!("{path}.label"),
                    format!("duplicate label `{}`", fb.label()),
                ));
            }
            let mut source = |field: &str,
                              policy: &str,
                              env: &Arc<MdpSpec>,
                              samples: Option<usize>|
             -> Result<PolicySource> {
                let field = format!("{path}.{field}");
                match sampler.as_deref_mut() {
                    None => Ok(PolicySource::Exact(
                        ctx.exact_visitation(&field, policy, env)?,
                    )),
                    Some(s) => {
                        let d = ctx.visitation_with(&field, policy, env, s, samples)?;
                        let key = format!("{field}:{policy}");
                        datasets.insert(key.clone(), d);
                        Ok(PolicySource::Dataset(key))
                    }
                }
            };
            let item = match fb {
                FeedbackSpec::Demonstration {
                    environment,
                    policy,
                    slack,
                    samples,
                    exploration_budget,
                    ..
                }
                | FeedbackSpec::BadPolicyDemonstration {
                    environment,
                    policy,
                    slack,
                    samples,
                    exploration_budget,
                    ..
                } => {
                    let env = ctx.env(&format!("{path}.environment"), environment)?;
                    let demonstrator = source("policy", policy, &env, *samples)?;
                    let env = match &self.estimation {
                        Some(est) if self.mode == Mode::Estimated => EnvSource::Explore {
                            hidden: env,
                            budget: exploration_budget.unwrap_or(est.exploration_budget),
                            strategy: est.strategy,
                        },
                        _ => EnvSource::Exact(env),
                    };
                    if matches!(fb, FeedbackSpec::Demonstration { .. }) {
                        RawFeedback::Demonstration {
                            env,
                            demonstrator,
                            slack: *slack,
                        }
                    } else {
                        RawFeedback::BadPolicyDemonstration {
                            env,
                            demonstrator,
                            slack: *slack,
                        }
                    }
                }
                FeedbackSpec::TrajectoryComparison {
                    first,
                    second,
                    slack,
                    ..
                } => RawFeedback::TrajectoryComparison {
                    first: first.build(shape, &format!("{path}.first"))?,
                    second: second.build(shape, &format!("{path}.second"))?,
                    slack: *slack,
                },
                FeedbackSpec::PolicyComparison {
                    environment,
                    first,
                    second,
                    slack,
                    samples,
                    ..
                } => {
                    let env = ctx.env(&format!("{path}.environment"), environment)?;
                    RawFeedback::PolicyComparison {
                        first: source("first", first, &env, *samples)?,
                        second: source("second", second, &env, *samples)?,
                        slack: *slack,
                    }
                }
                FeedbackSpec::FractionalComparison {
                    environment,
                    first,
                    second,
                    ratio,
                    samples,
                    ..
                } => {
                    let env = ctx.env(&format!("{path}.environment"), environment)?;
                    RawFeedback::FractionalComparison {
                        first: source("first", first, &env, *samples)?,
                        second: source("second", second, &env, *samples)?,
                        ratio: *ratio,
                    }
                }
            };
            raw.push((fb.label().to_string(), item));
        }
        // the sampled visitations are already estimates; hand them over as
        // single-purpose exact sources so the estimation layer only explores
        let raw: Vec<(String, RawFeedback)> = raw
            .into_iter()
            .map(|(label, fb)| (label, resolve_sources(fb, &datasets)))
            .collect();
        let seed = match (&self.estimation, sampler) {
            (Some(_), Some(s)) => s.rng.gen(),
            _ => 0,
        };
        estimated_constraint_set(shape, &raw, &BTreeMap::new(), seed).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::spec("feedback", msg),
            other => other,
        })
    }
}

fn resolve_sources(fb: RawFeedback, data: &BTreeMap<String, VisitDist>) -> RawFeedback {
    let fix = |src: PolicySource| match src {
        PolicySource::Dataset(key) => PolicySource::Exact(data[&key].clone()),
        exact => exact,
    };
    match fb {
        RawFeedback::Demonstration {
            env,
            demonstrator,
            slack,
        } => RawFeedback::Demonstration {
            env,
            demonstrator: fix(demonstrator),
            slack,
        },
        RawFeedback::BadPolicyDemonstration {
            env,
            demonstrator,
            slack,
        } => RawFeedback::BadPolicyDemonstration {
            env,
            demonstrator: fix(demonstrator),
            slack,
        },
        RawFeedback::PolicyComparison {
            first,
            second,
            slack,
        } => RawFeedback::PolicyComparison {
            first: fix(first),
            second: fix(second),
            slack,
        },
        RawFeedback::FractionalComparison {
            first,
            second,
            ratio,
        } => RawFeedback::FractionalComparison {
            first: fix(first),
            second: fix(second),
            ratio,
        },
        tc @ RawFeedback::TrajectoryComparison { .. } => tc,
    }
}

fn resolve_hyper(
    h: &HyperSpec,
    shape: Shape,
    constraints: usize,
    slater: Option<f64>,
) -> Result<HyperResolution> {
    if h.iters < 1 {
        return Err(Error::spec("hyper.iters", "must be >= 1"));
    }
    if let (Some(alpha), Some(dual_radius)) = (h.alpha, h.dual_radius) {
        let used = Hyperparams {
            iters: h.iters,
            alpha,
            dual_radius,
        };
        used.validate()
            .map_err(|e| Error::spec("hyper", e.to_string()))?;
        return Ok(HyperResolution {
            used,
            epsilon: h.epsilon,
            xi: h.xi,
            xi_estimated: false,
            derived: None,
        });
    }
    let epsilon = h.epsilon.ok_or_else(|| {
        Error::spec(
            "hyper",
            "give `alpha` and `dual_radius`, or `epsilon` to derive them",
        )
    })?;
    let (xi, xi_estimated) = match (h.xi, slater) {
        (Some(xi), _) => (xi, false),
        (None, Some(m)) if m > 0.0 && m.is_finite() => (m, true),
        (None, Some(m)) if m == f64::INFINITY => (1.0, true),
        _ => {
            return Err(Error::spec(
                "hyper.xi",
                "no Slater margin given and none could be found on the coarse grid",
            ))
        }
    };
    let derived = default_hyperparams(
        shape.horizon,
        shape.states,
        shape.actions,
        xi,
        epsilon,
        constraints,
    )
    .map_err(|e| Error::spec("hyper", e.to_string()))?;
    let used = Hyperparams {
        iters: h.iters,
        alpha: h.alpha.unwrap_or(derived.alpha),
        dual_radius: h.dual_radius.unwrap_or(derived.dual_radius),
    };
    used.validate()
        .map_err(|e| Error::spec("hyper", e.to_string()))?;
    Ok(HyperResolution {
        used,
        epsilon: Some(epsilon),
        xi: Some(xi),
        xi_estimated,
        derived: Some(derived),
    })
}

enum PolicyKind {
    Known(Policy),
    Data(VisitDist),
}

struct Context<'a> {
    shape: Shape,
    environments: &'a BTreeMap<String, Arc<MdpSpec>>,
    policies: &'a BTreeMap<String, PolicyKind>,
}

impl Context<'_> {
    fn env(&self, field: &str, name: &str) -> Result<Arc<MdpSpec>> {
        self.environments
            .get(name)
            .cloned()
            .ok_or_else(|| Error::spec(field, format!("unknown environment `{name}`")))
    }

    fn policy(&self, field: &str, name: &str) -> Result<&PolicyKind> {
        self.policies
            .get(name)
            .ok_or_else(|| Error::spec(field, format!("unknown policy `{name}`")))
    }

    fn exact_visitation(&self, field: &str, name: &str, env: &MdpSpec) -> Result<VisitDist> {
        match self.policy(field, name)? {
            PolicyKind::Known(pi) => policy_visitation(env, pi),
            PolicyKind::Data(d) => Ok(d.clone()),
        }
    }

    fn visitation_with(
        &self,
        field: &str,
        name: &str,
        env: &MdpSpec,
        sampler: &mut Sampler,
        samples: Option<usize>,
    ) -> Result<VisitDist> {
        match self.policy(field, name)? {
            PolicyKind::Known(pi) => {
                let n = samples.unwrap_or(sampler.samples);
                if n == 0 {
                    return Err(Error::spec(
                        field,
                        "estimated mode needs at least one sample per policy",
                    ));
                }
                let trajs = sample_trajectories(env, pi, n, sampler.rng.gen())?;
                estimate_visitation(
                    self.shape,
                    &TrajectoryDataset::new(self.shape, name, trajs)?,
                )
            }
            PolicyKind::Data(d) => Ok(d.clone()),
        }
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    samples: usize,
}

impl Sampler {
    fn new(est: &EstimationSpec) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(est.seed),
            samples: est.samples,
        }
    }
}

impl EnvironmentSpec {
    pub fn from_mdp(mdp: &MdpSpec) -> Self {
        let shape = mdp.shape();
        let p = (0..shape.horizon)
            .map(|h| {
                (0..shape.states)
                    .map(|s| {
                        (0..shape.actions)
                            .map(|a| mdp.next(h, s, a).to_vec())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        EnvironmentSpec {
            initial_state: mdp.initial_state(),
            p: Some(p),
            p_stationary: None,
        }
    }

    fn build(&self, shape: Shape, path: &str) -> Result<MdpSpec> {
        let (ns, na, nh) = (shape.states, shape.actions, shape.horizon);
        if self.initial_state >= ns {
            return Err(Error::spec(
                format!("{path}.initial_state"),
                format!("state {} out of range for {ns} states", self.initial_state),
            ));
        }
        let rows: Vec<(usize, &Vec<f64>)> = match (&self.p, &self.p_stationary) {
            (Some(p), None) => {
                if p.len() != nh {
                    return Err(Error::spec(
                        format!("{path}.p"),
                        format!("expected {nh} steps, found {}", p.len()),
                    ));
                }
                let mut rows = Vec::with_capacity(shape.len());
                for (h, ph) in p.iter().enumerate() {
                    check_len(ph.len(), ns, &format!("{path}.p[{h}]"))?;
                    for (s, phs) in ph.iter().enumerate() {
                        check_len(phs.len(), na, &format!("{path}.p[{h}][{s}]"))?;
                        rows.extend(phs.iter().map(|row| (h, row)));
                    }
                }
                rows
            }
            (None, Some(p)) => {
                check_len(p.len(), ns, &format!("{path}.p_stationary"))?;
                let mut step = Vec::with_capacity(ns * na);
                for (s, ps) in p.iter().enumerate() {
                    check_len(ps.len(), na, &format!("{path}.p_stationary[{s}]"))?;
                    step.extend(ps.iter());
                }
                (0..nh)
                    .flat_map(|h| step.iter().map(move |row| (h, *row)))
                    .collect()
            }
            _ => {
                return Err(Error::spec(
                    path,
                    "give exactly one of `p` and `p_stationary`",
                ));
            }
        };
        let stationary = self.p.is_none();
        let mut flat = Vec::with_capacity(shape.len() * ns);
        for (i, (h, row)) in rows.iter().enumerate() {
            let (s, a) = ((i / na) % ns, i % na);
            let at = if stationary {
                format!("{path}.p_stationary[{s}][{a}]")
            } else {
                format!("{path}.p[{h}][{s}][{a}]")
            };
            check_len(row.len(), ns, &at)?;
            let sum: f64 = row.iter().sum();
            if row.iter().any(|x| !(x.is_finite() && *x >= 0.0))
                || (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE
            {
                return Err(Error::spec(
                    at,
                    format!("row at (h={h}, s={s}, a={a}) is not a distribution (sum = {sum})"),
                ));
            }
            flat.extend_from_slice(row);
        }
        MdpSpec::new(shape, self.initial_state, flat).map_err(|e| Error::spec(path, e.to_string()))
    }
}

impl TrajectorySpec {
    pub fn from_trajectory(t: &Trajectory) -> Self {
        TrajectorySpec {
            states: t.states.clone(),
            actions: t.actions.clone(),
        }
    }

    fn build(&self, shape: Shape, path: &str) -> Result<Trajectory> {
        Trajectory::new(shape, self.states.clone(), self.actions.clone())
            .map_err(|e| Error::spec(path, e.to_string()))
    }
}

impl FeatureSpec {
    pub fn from_map(map: &FeatureMap) -> Self {
        let shape = map.shape();
        let index = (0..shape.horizon)
            .map(|h| {
                (0..shape.states)
                    .map(|s| (0..shape.actions).map(|a| map.feature(h, s, a)).collect())
                    .collect()
            })
            .collect();
        FeatureSpec::Map {
            dim: map.dim(),
            index,
        }
    }
}

fn check_len(found: usize, expected: usize, path: &str) -> Result<()> {
    if found != expected {
        return Err(Error::spec(
            path,
            format!("expected {expected} entries, found {found}"),
        ));
    }
    Ok(())
}

fn flatten3<T: Clone>(x: &[Vec<Vec<T>>], shape: Shape, path: &str) -> Result<Vec<T>> {
    check_len(x.len(), shape.horizon, path)?;
    let mut out = Vec::with_capacity(shape.len());
    for (h, xh) in x.iter().enumerate() {
        check_len(xh.len(), shape.states, &format!("{path}[{h}]"))?;
        for (s, xhs) in xh.iter().enumerate() {
            check_len(xhs.len(), shape.actions, &format!("{path}[{h}][{s}]"))?;
            out.extend_from_slice(xhs);
        }
    }
    Ok(out)
}
