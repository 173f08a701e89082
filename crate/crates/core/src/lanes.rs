//! The three-lane road experiment.
//!
//! An agent drives for `H = 5` steps on a road with lanes L, C, R. At every
//! step each lane holds one item (ball, square, triangle or nothing); the state
//! is the pair (lane, item), 12 states in total. Actions push left, keep, or
//! push right, with the stochastic lane dynamics of [`LANE_TRANSITIONS`]. The
//! item seen at each step is fixed by a per-step [`ItemLayout`], so the
//! transition tensor over the 12 states depends on the step even though the
//! lane dynamics do not. The reward has one feature per item, zero for nothing.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{expected_return, policy_visitation, MdpSpec, Policy, Trajectory};
use crate::reward::{FeatureMap, RewardPoint, RewardSpace};
use crate::specfile::{
    EnvironmentSpec, FeatureSpec, FeedbackSpec, HyperSpec, Mode, PolicySpec, SpecFile, TargetSpec,
    TrajectorySpec, SCHEMA_VERSION,
};
use crate::tensor::Shape;

pub const HORIZON: usize = 5;
pub const LANES: usize = 3;
pub const ITEMS: usize = 4;
pub const STATES: usize = LANES * ITEMS;
pub const ACTIONS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Lane {
    L = 0,
    C = 1,
    R = 2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Item {
    /// Ball
    B = 0,
    /// Square
    S = 1,
    /// Triangle
    T = 2,
    /// Nothing
    N = 3,
}

/// Actions, in index order: push left, keep lane, push right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Move {
    Left = 0,
    Keep = 1,
    Right = 2,
}

const LANE_LIST: [Lane; 3] = [Lane::L, Lane::C, Lane::R];

impl Lane {
    pub fn from_index(i: usize) -> Option<Lane> {
        LANE_LIST.get(i).copied()
    }
}

/// `LANE_TRANSITIONS[action][lane][next lane]`
pub const LANE_TRANSITIONS: [[[f64; 3]; 3]; 3] = [
    // push left
    [[1.0, 0.0, 0.0], [0.6, 0.4, 0.0], [0.0, 0.6, 0.4]],
    // keep
    [[0.55, 0.45, 0.0], [0.3, 0.4, 0.3], [0.0, 0.45, 0.55]],
    // push right
    [[0.3, 0.7, 0.0], [0.0, 0.3, 0.7], [0.0, 0.0, 1.0]],
];

pub fn state_index(lane: Lane, item: Item) -> usize {
    lane as usize * ITEMS + item as usize
}

pub fn lane_of(state: usize) -> Lane {
    LANE_LIST[state / ITEMS]
}

/// Which item occupies each lane at each step, `rows[h][lane]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemLayout {
    rows: Vec<[Item; 3]>,
}

impl ItemLayout {
    pub fn new(rows: Vec<[Item; 3]>) -> Result<Self> {
        if rows.len() != HORIZON {
            return Err(Error::InvalidArgument(format!(
                "layout needs {HORIZON} rows, got {}",
                rows.len()
            )));
        }
        Ok(ItemLayout { rows })
    }

    /// Parses rows such as `"B.T"`: one character per lane, `.` for nothing.
    pub fn parse(rows: &[&str]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|row| {
                let items: Vec<Item> = row
                    .chars()
                    .map(|c| match c {
                        'B' => Ok(Item::B),
                        'S' => Ok(Item::S),
                        'T' => Ok(Item::T),
                        '.' | 'N' => Ok(Item::N),
                        other => Err(Error::InvalidArgument(format!(
                            "unknown item `{other}` in layout"
                        ))),
                    })
                    .collect::<Result<_>>()?;
                <[Item; 3]>::try_from(items).map_err(|_| {
                    Error::InvalidArgument(format!("layout row `{row}` must have 3 lanes"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parsed)
    }

    pub fn empty() -> Self {
        ItemLayout {
            rows: vec![[Item::N; 3]; HORIZON],
        }
    }

    /// Item in `lane` at step `h`; past the last step every lane is empty.
    pub fn item(&self, h: usize, lane: Lane) -> Item {
        self.rows.get(h).map_or(Item::N, |row| row[lane as usize])
    }

    pub fn state(&self, h: usize, lane: Lane) -> usize {
        state_index(lane, self.item(h, lane))
    }
}

pub fn shape() -> Shape {
    Shape::new(STATES, ACTIONS, HORIZON).expect("nonzero")
}

/// The 12-state MDP for `layout`, starting in `start`.
pub fn lanes_mdp(layout: &ItemLayout, start: Lane) -> MdpSpec {
    MdpSpec::from_fn(shape(), layout.state(0, start), |h, s, a, t| {
        let lane = lane_of(s);
        let next = lane_of(t);
        if t == layout.state(h + 1, next) {
            LANE_TRANSITIONS[a][lane as usize][next as usize]
        } else {
            0.0
        }
    })
    .expect("lane rows are distributions")
}

/// Reward feature per item, the same at every step and for every action.
pub fn item_features() -> FeatureMap {
    FeatureMap::from_fn(shape(), 3, |_, s, _| match s % ITEMS {
        3 => None,
        item => Some(item),
    })
    .expect("valid features")
}

/// A deterministic policy that looks only at the step and the lane.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanePolicy {
    /// `moves[h][lane]`
    pub moves: Vec<[Move; 3]>,
}

impl LanePolicy {
    pub fn constant(m: Move) -> Self {
        LanePolicy {
            moves: vec![[m; 3]; HORIZON],
        }
    }

    pub fn policy(&self) -> Result<Policy> {
        if self.moves.len() != HORIZON {
            return Err(Error::InvalidArgument(format!(
                "lane policy needs {HORIZON} rows, got {}",
                self.moves.len()
            )));
        }
        let actions: Vec<usize> = self
            .moves
            .iter()
            .flat_map(|row| (0..STATES).map(move |s| row[lane_of(s) as usize] as usize))
            .collect();
        Policy::deterministic(shape(), &actions)
    }

    pub fn table(&self) -> Vec<Vec<usize>> {
        self.moves
            .iter()
            .map(|row| {
                (0..STATES)
                    .map(|s| row[lane_of(s) as usize] as usize)
                    .collect()
            })
            .collect()
    }
}

/// A drive through a layout: the lane at every step (`H + 1` entries) and the
/// moves (`H` entries).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneTrajectory {
    pub lanes: Vec<Lane>,
    pub moves: Vec<Move>,
}

impl LaneTrajectory {
    /// Fails if any lane change is impossible under the lane dynamics.
    pub fn trajectory(&self, layout: &ItemLayout) -> Result<Trajectory> {
        if self.lanes.len() != HORIZON + 1 || self.moves.len() != HORIZON {
            return Err(Error::InvalidArgument(format!(
                "a drive needs {} lanes and {HORIZON} moves",
                HORIZON + 1
            )));
        }
        for h in 0..HORIZON {
            let p = LANE_TRANSITIONS[self.moves[h] as usize][self.lanes[h] as usize]
                [self.lanes[h + 1] as usize];
            if p == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "move {:?} cannot take lane {:?} to {:?} at step {h}",
                    self.moves[h],
                    self.lanes[h],
                    self.lanes[h + 1]
                )));
            }
        }
        let states = self
            .lanes
            .iter()
            .enumerate()
            .map(|(h, &l)| layout.state(h, l))
            .collect();
        let actions = self.moves.iter().map(|&m| m as usize).collect();
        Trajectory::new(shape(), states, actions)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveComparison {
    pub first: LaneTrajectory,
    pub second: LaneTrajectory,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyPreference {
    pub first: LanePolicy,
    pub second: LanePolicy,
    pub slack: f64,
}

/// Everything that defines a lanes problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanesExperiment {
    /// Road where the two target policies are compared; starts in C.
    pub target_layout: ItemLayout,
    /// Road of the policy comparisons; starts in L.
    pub comparison_layout: ItemLayout,
    /// Road of the demonstration; starts in R.
    pub demo_layout: ItemLayout,
    /// True item values `(ball, square, triangle)`.
    pub reward: [f64; 3],
    /// Drives on the target road.
    pub trajectory_comparisons: Vec<DriveComparison>,
    pub policy_comparisons: Vec<PolicyPreference>,
    pub demonstration: LanePolicy,
    pub demonstration_slack: f64,
}

pub const TARGET_START: Lane = Lane::C;
pub const COMPARISON_START: Lane = Lane::L;
pub const DEMO_START: Lane = Lane::R;

fn drive(lanes: &str, moves: &str) -> LaneTrajectory {
    let lanes = lanes
        .chars()
        .map(|c| match c {
            'L' => Lane::L,
            'C' => Lane::C,
            _ => Lane::R,
        })
        .collect();
    let moves = moves
        .chars()
        .map(|c| match c {
            '<' => Move::Left,
            '=' => Move::Keep,
            _ => Move::Right,
        })
        .collect();
    LaneTrajectory { lanes, moves }
}

fn lane_policy(rows: [&str; HORIZON]) -> LanePolicy {
    LanePolicy {
        moves: rows
            .iter()
            .map(|row| {
                let m: Vec<Move> = row
                    .chars()
                    .map(|c| match c {
                        '<' => Move::Left,
                        '=' => Move::Keep,
                        _ => Move::Right,
                    })
                    .collect();
                [m[0], m[1], m[2]]
            })
            .collect(),
    }
}

impl LanesExperiment {
    /// The shipped reference configuration. Layouts and feedback are a
    /// hand-made stand-in chosen so that every feedback holds strictly for the
    /// true reward `(0.7, 0.1, 0.2)`.
    pub fn reference() -> Self {
        LanesExperiment {
            target_layout: ItemLayout::parse(&["...", "S.B", "BTS", "T.B", "SBT"]).expect("valid"),
            comparison_layout: ItemLayout::parse(&["...", ".SB", "BT.", "S.T", "TBS"])
                .expect("valid"),
            demo_layout: ItemLayout::parse(&["...", "BS.", "T.S", ".BT", "SB."]).expect("valid"),
            reward: [0.7, 0.1, 0.2],
            trajectory_comparisons: vec![
                DriveComparison {
                    first: drive("CLCLLL", "<><=="),
                    second: drive("CRRRCL", ">==<<"),
                    slack: 0.3,
                },
                DriveComparison {
                    first: drive("CLLCCL", "<=>=<"),
                    second: drive("CRCRCL", "><><<"),
                    slack: 1.0,
                },
                DriveComparison {
                    first: drive("CCLCCL", "=<>=<"),
                    second: drive("CRCRCL", "><><<"),
                    slack: -0.5,
                },
            ],
            policy_comparisons: vec![
                PolicyPreference {
                    first: lane_policy(["<=>", "><<", ">>>", "==<", "=><"]),
                    second: lane_policy(["=><", "<==", ">>>", "<<=", "==="]),
                    slack: 0.0,
                },
                PolicyPreference {
                    first: lane_policy(["<==", "<><", "=<=", "><>", "<>>"]),
                    second: lane_policy(["==>", ">=<", "><<", "==<", "<<<"]),
                    slack: 0.5,
                },
            ],
            demonstration: lane_policy([">><", "=<>", "><>", "<>>", ">=>"]),
            demonstration_slack: 1.0,
        }
    }

    pub fn target_env(&self) -> MdpSpec {
        lanes_mdp(&self.target_layout, TARGET_START)
    }

    pub fn comparison_env(&self) -> MdpSpec {
        lanes_mdp(&self.comparison_layout, COMPARISON_START)
    }

    pub fn demo_env(&self) -> MdpSpec {
        lanes_mdp(&self.demo_layout, DEMO_START)
    }

    pub fn reward_point(&self) -> Result<RewardPoint> {
        RewardPoint::from_features(&item_features(), self.reward.to_vec())
    }

    pub fn reward_space(&self) -> RewardSpace {
        RewardSpace::Features(item_features())
    }

    /// `ΔJ(r*) = J^{always right}(r*) - J^{always left}(r*)` on the target road.
    pub fn true_gap(&self) -> Result<f64> {
        let env = self.target_env();
        let r = self.reward_point()?;
        let right = policy_visitation(&env, &LanePolicy::constant(Move::Right).policy()?)?;
        let left = policy_visitation(&env, &LanePolicy::constant(Move::Left).policy()?)?;
        Ok(expected_return(&right, &r)? - expected_return(&left, &r)?)
    }

    /// The experiment as a problem spec, exact mode.
    pub fn spec_file(&self, hyper: HyperSpec) -> Result<SpecFile> {
        if self.reward.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument(
                "item values must lie in [0, 1]".into(),
            ));
        }
        let mut environments = BTreeMap::new();
        environments.insert(
            "target".to_string(),
            EnvironmentSpec::from_mdp(&self.target_env()),
        );
        environments.insert(
            "comparison".to_string(),
            EnvironmentSpec::from_mdp(&self.comparison_env()),
        );
        environments.insert(
            "demonstration".to_string(),
            EnvironmentSpec::from_mdp(&self.demo_env()),
        );

        let mut policies = BTreeMap::new();
        policies.insert(
            "always_right".to_string(),
            PolicySpec::Constant {
                action: Move::Right as usize,
            },
        );
        policies.insert(
            "always_left".to_string(),
            PolicySpec::Constant {
                action: Move::Left as usize,
            },
        );
        let mut feedback = Vec::new();
        for (i, c) in self.trajectory_comparisons.iter().enumerate() {
            feedback.push(FeedbackSpec::TrajectoryComparison {
                label: format!("drive_{}", i + 1),
                first: TrajectorySpec::from_trajectory(&c.first.trajectory(&self.target_layout)?),
                second: TrajectorySpec::from_trajectory(&c.second.trajectory(&self.target_layout)?),
                slack: c.slack,
            });
        }
        for (i, c) in self.policy_comparisons.iter().enumerate() {
            let (a, b) = (
                format!("comparison_{}_first", i + 1),
                format!("comparison_{}_second", i + 1),
            );
            policies.insert(
                a.clone(),
                PolicySpec::Actions {
                    actions: c.first.table(),
                },
            );
            policies.insert(
                b.clone(),
                PolicySpec::Actions {
                    actions: c.second.table(),
                },
            );
            feedback.push(FeedbackSpec::PolicyComparison {
                label: format!("comparison_{}", i + 1),
                environment: "comparison".into(),
                first: a,
                second: b,
                slack: c.slack,
                samples: None,
            });
        }
        policies.insert(
            "expert".to_string(),
            PolicySpec::Actions {
                actions: self.demonstration.table(),
            },
        );
        feedback.push(FeedbackSpec::Demonstration {
            label: "expert".into(),
            environment: "demonstration".into(),
            policy: "expert".into(),
            slack: self.demonstration_slack,
            samples: None,
            exploration_budget: None,
        });

        Ok(SpecFile {
            schema_version: SCHEMA_VERSION,
            shape: shape(),
            environments,
            features: FeatureSpec::from_map(&item_features()),
            policies,
            target: TargetSpec {
                environment: "target".into(),
                first: "always_right".into(),
                second: "always_left".into(),
            },
            feedback,
            hyper,
            mode: Mode::Exact,
            estimation: None,
        })
    }

    /// The hidden environments, for estimation experiments.
    pub fn environments(&self) -> BTreeMap<&'static str, Arc<MdpSpec>> {
        let mut out = BTreeMap::new();
        out.insert("target", Arc::new(self.target_env()));
        out.insert("comparison", Arc::new(self.comparison_env()));
        out.insert("demonstration", Arc::new(self.demo_env()));
        out
    }
}

/// Hyperparameters of the reference run: 1200 iterations of step 0.01.
pub fn reference_hyper() -> HyperSpec {
    HyperSpec {
        iters: 1200,
        alpha: Some(0.01),
        dual_radius: Some(REFERENCE_DUAL_RADIUS),
        epsilon: None,
        xi: None,
    }
}

/// Dual radius of the reference run, large enough never to bind in practice.
pub const REFERENCE_DUAL_RADIUS: f64 = 100.0;
