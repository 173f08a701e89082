//! Dissimilarities between rewards, and the Chebyshev center, radius and
//! diameter of a finite reward set under them.
//!
//! Only `L2`, `Linf` and the policy-comparison loss `LCO` are metrics (up to
//! identity of indiscernibles); `LPL` and `LGR` are asymmetric and break the
//! triangle inequality, which is what makes a zero radius with a positive
//! diameter possible.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mdp::{backward_induction, restricted_minimum, MdpSpec};
use crate::reward::RewardPoint;

#[derive(Clone, Debug, PartialEq)]
pub enum Premetric {
    /// `||r - r'||_2`
    L2,
    /// `max |r - r'|`
    Linf,
    /// Worst return error over all `(S x A)^H x S` trajectories, consistent with the dynamics or not.
    Trajectory,
    /// `J*(r') - min_{π ∈ Π*(r)} J^π(r')`: suboptimality under `r'` of planning with `r`.
    Planning(Arc<MdpSpec>),
    /// `E_{s~ρ}[max_a r'(s,a) - r'(s, greedy(r)(s))]` for single-step rewards.
    Greedy(Vec<f64>),
    /// `max_π |J^π(r) - J^π(r')|`
    Comparison(Arc<MdpSpec>),
}

impl Premetric {
    pub fn name(&self) -> &'static str {
        match self {
            Premetric::L2 => "l2",
            Premetric::Linf => "linf",
            Premetric::Trajectory => "trajectory",
            Premetric::Planning(_) => "planning",
            Premetric::Greedy(_) => "greedy",
            Premetric::Comparison(_) => "comparison",
        }
    }
}

/// `pm(r, r')`
pub fn premetric_eval(pm: &Premetric, r: &RewardPoint, r2: &RewardPoint) -> Result<f64> {
    let shape = r.shape();
    shape.ensure_eq(&r2.shape())?;
    let (a, b) = (r.values(), r2.values());
    match pm {
        Premetric::L2 => Ok(a.sub(b).norm2()),
        Premetric::Linf => Ok(a.sub(b).max_abs()),
        Premetric::Trajectory => {
            // each step picks its own (s, a) freely, so the max over trajectories splits per step
            let diff = a.sub(b);
            let per_step = |sign: f64| -> f64 {
                (0..shape.horizon)
                    .map(|h| {
                        diff.step(h)
                            .iter()
                            .map(|x| sign * x)
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .sum()
            };
            Ok(f64::max(per_step(1.0), per_step(-1.0)))
        }
        Premetric::Planning(env) => {
            let plan = backward_induction(env, a)?;
            let best = backward_induction(env, b)?.value;
            let worst_optimal = restricted_minimum(env, b, &plan.optimal_actions)?.value;
            Ok(best - worst_optimal)
        }
        Premetric::Greedy(rho) => {
            if shape.horizon != 1 {
                return Err(Error::Unsupported(format!(
                    "the greedy premetric needs single-step rewards, got horizon {}",
                    shape.horizon
                )));
            }
            if rho.len() != shape.states {
                return Err(Error::shape(
                    format!("{} state weights", shape.states),
                    rho.len(),
                ));
            }
            let mut total = 0.0;
            for (s, &w) in rho.iter().enumerate() {
                let row = a.step(0);
                let row = &row[s * shape.actions..(s + 1) * shape.actions];
                let greedy = first_argmax(row);
                let other = &b.step(0)[s * shape.actions..(s + 1) * shape.actions];
                let best = other.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                total += w * (best - other[greedy]);
            }
            Ok(total)
        }
        Premetric::Comparison(env) => {
            let diff = a.sub(b);
            let up = backward_induction(env, &diff)?.value;
            let down = backward_induction(env, &diff.neg())?.value;
            Ok(f64::max(up, down))
        }
    }
}

fn first_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chebyshev {
    /// Index into the candidate list.
    pub center: usize,
    /// `min_c max_{y in set} pm(c, y)`
    pub radius: f64,
    /// `max_{x, y in set} pm(x, y)`
    pub diameter: f64,
}

/// `max_{y in set} pm(x, y)`: the worst-case loss of choosing `x`.
pub fn worst_case_premetric(pm: &Premetric, x: &RewardPoint, set: &[RewardPoint]) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for y in set {
        worst = worst.max(premetric_eval(pm, x, y)?);
    }
    Ok(worst)
}

/// Center chosen among `candidates` (first in order among ties).
pub fn chebyshev_quantities(
    set: &[RewardPoint],
    pm: &Premetric,
    candidates: &[RewardPoint],
) -> Result<Chebyshev> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(
            "Chebyshev quantities need a nonempty set".into(),
        ));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate centers given".into()));
    }
    let mut center = 0;
    let mut radius = f64::INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let w = worst_case_premetric(pm, c, set)?;
        if w < radius {
            radius = w;
            center = i;
        }
    }
    let mut diameter: f64 = 0.0;
    for x in set {
        diameter = diameter.max(worst_case_premetric(pm, x, set)?);
    }
    Ok(Chebyshev {
        center,
        radius,
        diameter,
    })
}

/// Convex combinations of `vertices` whose weights are multiples of `1/n`,
/// `n = floor(1/δ)`: a sampled convex hull.
pub fn hull_samples(vertices: &[RewardPoint], resolution: f64) -> Result<Vec<RewardPoint>> {
    let Some(first) = vertices.first() else {
        return Err(Error::InvalidArgument("hull of an empty set".into()));
    };
    for v in vertices {
        first.shape().ensure_eq(&v.shape())?;
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "hull resolution must lie in (0, 1], got {resolution}"
        )));
    }
    let n = (1.0 / resolution + 1e-9).floor() as usize;
    let mut out = Vec::new();
    let mut weights = vec![0usize; vertices.len()];
    compositions(n, 0, &mut weights, &mut |w| {
        let mut acc = first.values().scale(0.0);
        for (k, v) in w.iter().zip(vertices) {
            if *k > 0 {
                acc.add_scaled(*k as f64 / n as f64, v.values());
            }
        }
        out.push(RewardPoint::from(acc));
    });
    Ok(out)
}

fn compositions(left: usize, at: usize, w: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if at + 1 == w.len() {
        w[at] = left;
        emit(w);
        return;
    }
    for k in (0..=left).rev() {
        w[at] = k;
        compositions(left - k, at + 1, w, emit);
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::generators::{random_mdp, random_reward};
    use crate::mdp::trajectory_return;
    use crate::mdp::Trajectory;
    use crate::tensor::{SahTensor, Shape};

    fn point(shape: Shape, v: &[f64]) -> RewardPoint {
        RewardPoint::new(SahTensor::from_vec(shape, v.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn every_premetric_vanishes_on_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let shape = Shape::new(3, 2, 3).unwrap();
        let env = Arc::new(random_mdp(&mut rng, shape));
        let r = random_reward(&mut rng, shape);
        for pm in [
            Premetric::L2,
            Premetric::Linf,
            Premetric::Trajectory,
            Premetric::Planning(env.clone()),
            Premetric::Comparison(env),
        ] {
            assert_eq!(premetric_eval(&pm, &r, &r).unwrap(), 0.0, "{}", pm.name());
        }
        let single = Shape::new(2, 3, 1).unwrap();
        let r = random_reward(&mut rng, single);
        assert_eq!(
            premetric_eval(&Premetric::Greedy(vec![0.5, 0.5]), &r, &r).unwrap(),
            0.0
        );
    }

    #[test]
    fn trajectory_loss_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = Shape::new(2, 2, 3).unwrap();
        for _ in 0..5 {
            let r = random_reward(&mut rng, shape);
            let r2 = random_reward(&mut rng, shape);
            let mut best: f64 = 0.0;
            // all (s, a)^3 x s trajectories
            for code in 0..(4usize.pow(3) * 2) {
                let mut c = code;
                let mut states = Vec::new();
                let mut actions = Vec::new();
                for _ in 0..3 {
                    states.push(c % 2);
                    c /= 2;
                    actions.push(c % 2);
                    c /= 2;
                }
                states.push(c % 2);
                let w = Trajectory::new(shape, states, actions).unwrap();
                let gap = trajectory_return(&w, r.values()) - trajectory_return(&w, r2.values());
                best = best.max(gap.abs());
            }
            let got = premetric_eval(&Premetric::Trajectory, &r, &r2).unwrap();
            assert!((got - best).abs() < 1e-12);
        }
    }

    #[test]
    fn planning_loss_three_action_example() {
        let shape = Shape::new(1, 3, 1).unwrap();
        let env = Arc::new(MdpSpec::from_fn(shape, 0, |_, _, _, _| 1.0).unwrap());
        let pm = Premetric::Planning(env);
        let r = point(shape, &[1.0, 0.0, 0.5]);
        let r2 = point(shape, &[0.0, 1.0, 0.5]);
        assert_eq!(premetric_eval(&pm, &r, &r2).unwrap(), 1.0);
        assert_eq!(premetric_eval(&pm, &r2, &r).unwrap(), 1.0);
        let center = point(shape, &[0.0, 0.0, 1.0]);
        assert_eq!(premetric_eval(&pm, &center, &r).unwrap(), 0.5);
        assert_eq!(premetric_eval(&pm, &center, &r2).unwrap(), 0.5);
    }

    #[test]
    fn greedy_loss_is_asymmetric() {
        let shape = Shape::new(1, 2, 1).unwrap();
        let pm = Premetric::Greedy(vec![1.0]);
        let r = point(shape, &[1.0, 0.0]);
        let r2 = point(shape, &[0.0, 0.5]);
        assert_eq!(premetric_eval(&pm, &r, &r2).unwrap(), 0.5);
        assert_eq!(premetric_eval(&pm, &r2, &r).unwrap(), 1.0);
        let long = Shape::new(1, 2, 2).unwrap();
        let x = point(long, &[0.0; 4]);
        assert!(matches!(
            premetric_eval(&pm, &x, &x),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn comparison_loss_is_a_pseudometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = Shape::new(3, 2, 3).unwrap();
        let env = Arc::new(random_mdp(&mut rng, shape));
        let pm = Premetric::Comparison(env);
        for _ in 0..30 {
            let [a, b, c] = [0; 3].map(|_| random_reward(&mut rng, shape));
            let ab = premetric_eval(&pm, &a, &b).unwrap();
            assert!((ab - premetric_eval(&pm, &b, &a).unwrap()).abs() <= 1e-9);
            let ac = premetric_eval(&pm, &a, &c).unwrap();
            let cb = premetric_eval(&pm, &c, &b).unwrap();
            assert!(ab <= ac + cb + 1e-9);
        }
    }

    #[test]
    fn two_point_l2_geometry() {
        let shape = Shape::new(1, 2, 1).unwrap();
        let set = vec![point(shape, &[0.0, 0.0]), point(shape, &[1.0, 1.0])];
        let candidates: Vec<RewardPoint> = (0..=10)
            .flat_map(|i| (0..=10).map(move |j| (i, j)))
            .map(|(i, j)| point(shape, &[i as f64 / 10.0, j as f64 / 10.0]))
            .collect();
        let c = chebyshev_quantities(&set, &Premetric::L2, &candidates).unwrap();
        assert_eq!(candidates[c.center].values().as_slice(), &[0.5, 0.5]);
        assert!((c.radius - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((c.diameter - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hull_sampling_counts_compositions() {
        let shape = Shape::new(1, 1, 1).unwrap();
        let vs: Vec<RewardPoint> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&x| point(shape, &[x]))
            .collect();
        // compositions of 4 into 3 parts: C(6, 2) = 15
        assert_eq!(hull_samples(&vs, 0.25).unwrap().len(), 15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vs: Vec<RewardPoint> = (0..2).map(|_| point(shape, &[rng.gen()])).collect();
        let hull = hull_samples(&vs, 0.5).unwrap();
        assert_eq!(hull.len(), 3);
        assert_eq!(hull[0], vs[0]);
        assert_eq!(hull[2], vs[1]);
        assert!(chebyshev_quantities(&[], &Premetric::L2, &vs).is_err());
    }
}
