//! Agent rollouts on fresh environments and the metrics reported for them:
//! trajectory success rate, modified Hausdorff distance to the expert, and
//! mean episode return.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cost::CostModel;
use crate::expert::expert_episode;
use crate::gridworld::{generate_env, Control, GridState, TaskSpec};
use crate::irl::sample_control;
use crate::planner::{Limits, Planner, ProductNode};
use crate::scalar::Scalar;
use crate::wfa::Wfa;

pub const RETURN_CONVENTION: &str = "1 - 0.9 * steps / horizon if the goal is reached, else 0";
const AGENT_SALT: u64 = 0x2545_f491_4f6c_dd1d;

/// Why a rollout ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Goal,
    /// The automaton accepted away from the goal.
    Accepted,
    Horizon,
    /// No control had an accepting path.
    Unreachable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub states: Vec<GridState>,
    pub controls: Vec<Control>,
    pub termination: Termination,
}

impl Rollout {
    pub fn success(&self) -> bool {
        self.termination == Termination::Goal
    }

    pub fn positions(&self) -> Vec<(usize, usize)> {
        self.states.iter().map(GridState::pos).collect()
    }
}

/// Roll the planning agent from `start`. `eta = 0` picks the argmin control.
pub fn rollout_agent<T: Scalar>(
    start: &GridState,
    wfa: &Wfa<T>,
    model: &CostModel<T>,
    eta: f64,
    horizon: usize,
    seed: u64,
    limits: Limits,
) -> Rollout {
    // costs are fixed for the whole episode, so one planner memo serves it
    let mut planner = Planner::with_model(wfa, model, limits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ AGENT_SALT);
    let mut node = ProductNode::initial(start.clone(), wfa);
    let mut states = vec![start.clone()];
    let mut controls = Vec::new();
    let termination = loop {
        if node.x.at_goal() {
            break Termination::Goal;
        }
        if wfa.accepts(&node.wfa_state) {
            break Termination::Accepted;
        }
        if controls.len() >= horizon {
            break Termination::Horizon;
        }
        let q = planner.q_values(&node);
        let Some(u) = sample_control(&q, eta, &mut rng) else {
            break Termination::Unreachable;
        };
        node = node.successor(u, wfa);
        states.push(node.x.clone());
        controls.push(u);
    };
    Rollout { states, controls, termination }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
}

fn dist(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dr = a.0 as f64 - b.0 as f64;
    let dc = a.1 as f64 - b.1 as f64;
    (dr * dr + dc * dc).sqrt()
}

fn directed(a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    let total: f64 = a.iter().map(|&p| b.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min)).sum();
    total / a.len() as f64
}

/// Modified Hausdorff distance between two position sequences: the larger
/// of the two directed mean nearest-point distances.
pub fn mhd(agent: &[(usize, usize)], expert: &[(usize, usize)]) -> Result<f64, MetricError> {
    if agent.is_empty() || expert.is_empty() {
        return Err(MetricError::EmptyTrajectory);
    }
    Ok(directed(agent, expert).max(directed(expert, agent)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub success: bool,
    pub termination: Termination,
    pub steps: usize,
    pub optimal_steps: usize,
    /// Only for successful episodes.
    pub mhd: Option<f64>,
}

/// Fraction of episodes that reach the goal within twice the optimal steps.
pub fn tsr(episodes: &[EpisodeRecord]) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    let ok = episodes.iter().filter(|e| e.success && e.steps <= 2 * e.optimal_steps).count();
    ok as f64 / episodes.len() as f64
}

pub fn episode_return(success: bool, steps: usize, horizon: usize) -> f64 {
    if success {
        1.0 - 0.9 * steps as f64 / horizon as f64
    } else {
        0.0
    }
}

pub fn mean_return(episodes: &[EpisodeRecord], horizon: usize) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    episodes.iter().map(|e| episode_return(e.success, e.steps, horizon)).sum::<f64>() / episodes.len() as f64
}

/// Mean per-episode MHD over successful episodes; `None` without successes.
pub fn mean_mhd(episodes: &[EpisodeRecord]) -> Option<f64> {
    let v: Vec<f64> = episodes.iter().filter_map(|e| e.mhd).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: String,
    pub n_envs: usize,
    pub seed: u64,
    pub horizon: usize,
    pub eta: f64,
    pub tsr: f64,
    pub mhd: Option<f64>,
    pub mean_return: f64,
    pub expert_mean_return: f64,
    pub return_convention: String,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub n_envs: usize,
    pub seed: u64,
    pub horizon: usize,
    pub eta: f64,
    pub limits: Limits,
}

/// Evaluate on environments `seed, seed + 1, …` against the greedy expert.
pub fn evaluate<T: Scalar>(task: &TaskSpec, wfa: &Wfa<T>, model: &CostModel<T>, cfg: &EvalConfig) -> EvalReport {
    let mut episodes = Vec::with_capacity(cfg.n_envs);
    let mut expert_returns = 0.0;
    for i in 0..cfg.n_envs {
        let env_seed = cfg.seed.wrapping_add(i as u64);
        let start = generate_env(task, env_seed);
        let expert = expert_episode(task, env_seed, 0.0).expect("generated environments are solvable");
        let optimal_steps = expert.len();
        expert_returns += episode_return(true, optimal_steps, cfg.horizon);
        let r = rollout_agent(&start, wfa, model, cfg.eta, cfg.horizon, env_seed, cfg.limits);
        let expert_pos: Vec<_> = expert.all_states().map(GridState::pos).collect();
        let m = if r.success() { mhd(&r.positions(), &expert_pos).ok() } else { None };
        episodes.push(EpisodeRecord {
            seed: env_seed,
            success: r.success(),
            termination: r.termination,
            steps: r.controls.len(),
            optimal_steps,
            mhd: m,
        });
    }
    let n = cfg.n_envs.max(1) as f64;
    EvalReport {
        task: format!("{:?}", task.kind).to_lowercase(),
        n_envs: cfg.n_envs,
        seed: cfg.seed,
        horizon: cfg.horizon,
        eta: cfg.eta,
        tsr: tsr(&episodes),
        mhd: mean_mhd(&episodes),
        mean_return: mean_return(&episodes, cfg.horizon),
        expert_mean_return: if cfg.n_envs == 0 { 0.0 } else { expert_returns / n },
        return_convention: RETURN_CONVENTION.to_string(),
        episodes,
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostKind;
    use crate::expert::goal_reach_wfa;
    use crate::gridworld::{shortest_distance_to_goal, TaskKind};
    use proptest::prelude::*;

    fn rec(success: bool, steps: usize, optimal: usize) -> EpisodeRecord {
        EpisodeRecord {
            seed: 0,
            success,
            termination: if success { Termination::Goal } else { Termination::Horizon },
            steps,
            optimal_steps: optimal,
            mhd: None,
        }
    }

    #[test]
    fn tsr_examples() {
        assert_eq!(tsr(&[rec(true, 5, 5), rec(true, 3, 3)]), 1.0);
        assert_eq!(tsr(&[rec(false, 5, 5)]), 0.0);
        assert_eq!(tsr(&[rec(true, 10, 5), rec(false, 5, 5)]), 0.5);
        assert_eq!(tsr(&[rec(true, 11, 5)]), 0.0);
    }

    #[test]
    fn mhd_examples() {
        let a = [(0, 0), (0, 1), (1, 1)];
        assert_eq!(mhd(&a, &a).unwrap(), 0.0);
        assert_eq!(mhd(&[(0, 0)], &[(0, 0), (0, 1)]).unwrap(), 0.5);
        assert_eq!(mhd(&[], &a).unwrap_err(), MetricError::EmptyTrajectory);
    }

    proptest! {
        #[test]
        fn mhd_is_symmetric_and_nonnegative(
            a in prop::collection::vec((0usize..8, 0usize..8), 1..10),
            b in prop::collection::vec((0usize..8, 0usize..8), 1..10),
        ) {
            let ab = mhd(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, mhd(&b, &a).unwrap());
        }
    }

    #[test]
    fn return_examples() {
        assert_eq!(mean_return(&[rec(false, 3, 3), rec(false, 9, 3)], 100), 0.0);
        assert_eq!(episode_return(true, 0, 100), 1.0);
        assert!((episode_return(true, 100, 100) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn accepting_start_is_empty_rollout() {
        let x = generate_env(&TaskSpec::doorkey(), 1);
        let wfa = Wfa::<f64>::from_parts(vec![1.0], vec![1.0], vec![], 0.5, 3);
        let m = CostModel::for_state(CostKind::Linear, &x, 0);
        let r = rollout_agent(&x, &wfa, &m, 0.0, 10, 0, Limits::default());
        assert!(r.controls.is_empty());
        assert_eq!(r.termination, Termination::Accepted);
    }

    #[test]
    fn goal_automaton_with_flat_costs_is_optimal() {
        let task = TaskSpec::doorkey();
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        for seed in 0..5 {
            let x = generate_env(&task, seed);
            let m = CostModel::for_state(CostKind::Linear, &x, 0);
            let r = rollout_agent(&x, &wfa, &m, 0.0, task.horizon_cap, seed, Limits::default());
            assert!(r.success());
            assert_eq!(r.controls.len(), shortest_distance_to_goal(&x).unwrap());
            assert_eq!(r, rollout_agent(&x, &wfa, &m, 0.0, task.horizon_cap, seed, Limits::default()));
        }
    }

    #[test]
    fn report_with_perfect_agent() {
        let task = TaskSpec::doorkey();
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let m = CostModel::for_state(CostKind::Linear, &generate_env(&task, 0), 0);
        let cfg = EvalConfig { n_envs: 4, seed: 10, horizon: task.horizon_cap, eta: 0.0, limits: Limits::default() };
        let rep = evaluate(&task, &wfa, &m, &cfg);
        assert_eq!(rep.tsr, 1.0);
        assert!((rep.mean_return - rep.expert_mean_return).abs() < 1e-12);
        assert!(rep.mhd.unwrap() >= 0.0);
        assert_eq!(rep.to_json(), evaluate(&task, &wfa, &m, &cfg).to_json());
    }
}
