//! Demonstration generators: a goal-directed expert with a Boltzmann
//! temperature, and a uniform random explorer that supplies failures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::demo::Demonstration;
use crate::gridworld::{generate_env, Control, TaskKind, TaskSpec, CONTROLS};
use crate::irl::sample_control;
use crate::planner::{EdgeCosts, Limits, Planner, ProductNode};
use crate::wfa::Wfa;
use crate::word::Symbol;

/// Attempts allowed per requested episode before giving up.
const MAX_ATTEMPTS_PER_EPISODE: u64 = 1000;
const POLICY_SALT: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Debug, Error, PartialEq)]
pub enum ExpertError {
    #[error("temperature must be non-negative, got {0}")]
    Temperature(f64),
    #[error("collected {got} of {wanted} episodes after {attempts} attempts")]
    Exhausted { wanted: usize, got: usize, attempts: u64 },
}

/// Two-state automaton that accepts once a transition lands on the goal:
/// planning against it with unit costs is shortest-path-to-goal.
pub fn goal_reach_wfa(kind: TaskKind) -> Wfa<f64> {
    let ap_count = kind.ap_count();
    let goal = 1u8 << kind.goal_bit();
    let transitions = (0..1u8 << ap_count)
        .map(|b| {
            let w = if b & goal != 0 { vec![0.0, 1.0, 0.0, 1.0] } else { vec![1.0, 0.0, 0.0, 1.0] };
            (Symbol::from_bits(b), w)
        })
        .collect();
    Wfa::from_parts(vec![1.0, 0.0], vec![0.0, 1.0], transitions, 0.5, ap_count)
}

fn policy_rng(env_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(env_seed ^ POLICY_SALT)
}

/// One expert rollout on the environment generated from `env_seed`; `None`
/// if the goal was not reached within the horizon.
pub fn expert_episode(task: &TaskSpec, env_seed: u64, eta: f64) -> Option<Demonstration> {
    let start = generate_env(task, env_seed);
    let goal_wfa = goal_reach_wfa(task.kind);
    let mut planner = Planner::new(&goal_wfa, EdgeCosts::Unit, Limits::default());
    let mut rng = policy_rng(env_seed);
    let mut node = ProductNode::initial(start.clone(), &goal_wfa);
    let mut controls = Vec::new();
    while !node.x.at_goal() && controls.len() < task.horizon_cap {
        let q = planner.q_values(&node);
        let u = sample_control(&q, eta, &mut rng)?;
        node = node.successor(u, &goal_wfa);
        controls.push(u);
    }
    node.x.at_goal().then(|| Demonstration::from_rollout(start, controls, 1.0, env_seed))
}

/// `n` successful expert demonstrations (score 1). Episode `i` uses the
/// environment seed `seed + i`; episodes that miss the goal are skipped.
pub fn gen_success(task: &TaskSpec, n: usize, eta: f64, seed: u64) -> Result<Vec<Demonstration>, ExpertError> {
    if !(eta >= 0.0) {
        return Err(ExpertError::Temperature(eta));
    }
    let mut out = Vec::with_capacity(n);
    let budget = n as u64 * MAX_ATTEMPTS_PER_EPISODE;
    let mut attempts = 0u64;
    while out.len() < n {
        if attempts >= budget {
            return Err(ExpertError::Exhausted { wanted: n, got: out.len(), attempts });
        }
        if let Some(d) = expert_episode(task, seed.wrapping_add(attempts), eta) {
            out.push(d);
        }
        attempts += 1;
    }
    Ok(out)
}

/// Uniform random controls for `horizon` steps; `None` if the goal was hit.
pub fn random_episode(task: &TaskSpec, env_seed: u64, horizon: usize) -> Option<Demonstration> {
    let start = generate_env(task, env_seed);
    let mut rng = policy_rng(env_seed);
    let mut x = start.clone();
    let mut controls = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let u: Control = CONTROLS[rng.gen_range(0..CONTROLS.len())];
        x = x.step(u);
        controls.push(u);
        if x.at_goal() {
            return None;
        }
    }
    Some(Demonstration::from_rollout(start, controls, 0.0, env_seed))
}

/// Default random-exploration length: one step per map cell.
pub fn default_failure_horizon(task: &TaskSpec) -> usize {
    task.height * task.width
}

/// `n` random episodes that never reach the goal (score 0).
pub fn gen_failure(task: &TaskSpec, n: usize, seed: u64, horizon: usize) -> Result<Vec<Demonstration>, ExpertError> {
    let mut out = Vec::with_capacity(n);
    let budget = n as u64 * MAX_ATTEMPTS_PER_EPISODE;
    let mut attempts = 0u64;
    while out.len() < n {
        if attempts >= budget {
            return Err(ExpertError::Exhausted { wanted: n, got: out.len(), attempts });
        }
        if let Some(d) = random_episode(task, seed.wrapping_add(attempts), horizon) {
            out.push(d);
        }
        attempts += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{shortest_distance_to_goal, success};

    #[test]
    fn greedy_expert_is_optimal() {
        let task = TaskSpec::doorkey();
        let demos = gen_success(&task, 16, 0.0, 100).unwrap();
        for d in &demos {
            let opt = shortest_distance_to_goal(d.initial_state()).unwrap();
            assert_eq!(d.len(), opt, "env {}", d.env_seed);
            assert_eq!(d.score, 1.0);
            let last = d.word.last().unwrap();
            assert!(last.has(task.kind.goal_bit()));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let task = TaskSpec::doorkey();
        assert_eq!(gen_success(&task, 4, 0.5, 7).unwrap(), gen_success(&task, 4, 0.5, 7).unwrap());
        assert_eq!(gen_failure(&task, 4, 7, 64).unwrap(), gen_failure(&task, 4, 7, 64).unwrap());
    }

    #[test]
    fn tempered_expert_is_longer_on_average() {
        let task = TaskSpec::doorkey();
        let greedy = gen_success(&task, 32, 0.0, 500).unwrap();
        let tempered = gen_success(&task, 32, 0.5, 500).unwrap();
        let mean = |d: &[Demonstration]| d.iter().map(|x| x.len() as f64).sum::<f64>() / d.len() as f64;
        assert!(mean(&tempered) > mean(&greedy));
        for d in &tempered {
            assert!(d.len() >= shortest_distance_to_goal(d.initial_state()).unwrap());
        }
    }

    #[test]
    fn failures_never_reach_goal() {
        let task = TaskSpec::doorkey();
        let demos = gen_failure(&task, 128, 3, default_failure_horizon(&task)).unwrap();
        assert_eq!(demos.len(), 128);
        for d in &demos {
            let states: Vec<_> = d.all_states().cloned().collect();
            assert_eq!(success(&states), 0);
            assert_eq!(d.score, 0.0);
        }
    }

    #[test]
    fn multiroom_expert_reaches_goal() {
        let task = TaskSpec::multiroom();
        let demos = gen_success(&task, 2, 0.0, 1).unwrap();
        for d in &demos {
            assert!(d.terminal.at_goal());
            assert_eq!(d.len(), shortest_distance_to_goal(d.initial_state()).unwrap());
        }
    }

    #[test]
    fn negative_temperature_is_rejected() {
        assert_eq!(gen_success(&TaskSpec::doorkey(), 1, -1.0, 0).unwrap_err(), ExpertError::Temperature(-1.0));
    }
}
