//! Robust reward learning from heterogeneous feedback.
//!
//! Feedback (demonstrations, trajectory and policy comparisons, ...) defines a
//! convex feasible set of rewards. For the task of predicting the return gap
//! `J^{pi1}(r) - J^{pi2}(r)` between two policies, the prediction minimizing
//! the worst-case error over that set is the midpoint of the extreme gaps, and
//! half their spread is the smallest achievable worst-case error. The
//! [`solver`] computes both extremes with a primal-dual subgradient method;
//! [`oracle`] recomputes them by brute force on a grid.

pub mod commands;
pub mod error;
pub mod estimation;
pub mod feedback;
pub mod generators;
pub mod lanes;
pub mod mdp;
pub mod oracle;
pub mod premetric;
pub mod report;
pub mod reward;
pub mod solver;
pub mod specfile;
pub mod tensor;

pub use error::{Error, Result};
pub use feedback::{FeasibleSetSpec, FeedbackConstraint};
pub use mdp::{MdpSpec, Policy, Trajectory, VisitDist};
pub use reward::{FeatureMap, RewardPoint, RewardSpace};
pub use solver::{rob_rel, Hyperparams, RobRelProblem, SolveReport};
pub use tensor::{SahTensor, Shape};
