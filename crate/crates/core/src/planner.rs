//! Shortest paths on the product of a gridworld with a WFA.
//!
//! A product node pairs a grid state with a WFA hidden state; its goal set is
//! WFA acceptance. Grid states and (quantized) WFA states are interned once
//! per [`Planner`], so a Dijkstra edge costs a few table lookups. Grid
//! successors and features persist for the planner's lifetime; edge costs
//! and memoized values are dropped whenever the costs change.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::cost::{features, CostModel};
use crate::gridworld::{Control, GridState, CONTROLS};
use crate::scalar::Scalar;
use crate::wfa::{Wfa, WfaState};
use crate::word::Symbol;

pub const DEFAULT_MAX_EXPANSIONS: usize = 200_000;
/// Q value reported for controls from which no accepting node is reachable.
pub const UNREACHABLE_Q: f64 = 1e18;
const ALPHA_QUANTUM: f64 = 1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_expansions: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_expansions: DEFAULT_MAX_EXPANSIONS }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductNode<T> {
    pub x: GridState,
    pub wfa_state: WfaState<T>,
}

impl<T: Scalar> ProductNode<T> {
    pub fn initial(x: GridState, wfa: &Wfa<T>) -> Self {
        ProductNode { x, wfa_state: wfa.initial_state() }
    }

    pub fn successor(&self, u: Control, wfa: &Wfa<T>) -> Self {
        let (y, sigma) = self.x.transition(u);
        ProductNode { x: y, wfa_state: wfa.step(&self.wfa_state, sigma) }
    }
}

/// Edge weights used by the search.
#[derive(Clone, Debug)]
pub enum EdgeCosts<T> {
    /// Every transition costs 1.
    Unit,
    Model(CostModel<T>),
}

/// One transition of a planned path, by interned ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathStep {
    pub grid: u32,
    pub wfa: u32,
    pub control: Control,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult<T> {
    pub value: T,
    pub path: Rc<[PathStep]>,
    pub expansions: usize,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("no accepting product node reached after {expansions} expansions")]
    Unreachable { expansions: usize },
}

/// `Q(x, u)` and the optimal path `τ(x, u)` that starts with `(x, u)`.
/// Unreachable controls carry [`UNREACHABLE_Q`] and no path.
#[derive(Clone, Debug, PartialEq)]
pub struct QEntry<T> {
    pub control: Control,
    pub q: T,
    pub path: Option<Vec<PathStep>>,
}

impl<T: Scalar> QEntry<T> {
    pub fn is_reachable(&self) -> bool {
        self.path.is_some()
    }
}

struct Expansion {
    next: [(u32, Symbol); 6],
    feats: [Box<[u32]>; 6],
}

#[derive(Default)]
struct GridGraph {
    states: Vec<GridState>,
    index: FxHashMap<GridState, u32>,
    expanded: Vec<Option<Box<Expansion>>>,
}

impl GridGraph {
    fn intern(&mut self, x: &GridState) -> u32 {
        if let Some(&id) = self.index.get(x) {
            return id;
        }
        let id = self.states.len() as u32;
        self.states.push(x.clone());
        self.expanded.push(None);
        self.index.insert(x.clone(), id);
        id
    }

    fn expand(&mut self, id: u32) -> &Expansion {
        if self.expanded[id as usize].is_none() {
            let x = self.states[id as usize].clone();
            let mut next = [(0u32, Symbol::EMPTY); 6];
            let feats = CONTROLS.map(|u| features(&x, u).into_boxed_slice());
            for u in CONTROLS {
                let (y, sigma) = x.transition(u);
                next[u.id()] = (self.intern(&y), sigma);
            }
            self.expanded[id as usize] = Some(Box::new(Expansion { next, feats }));
        }
        self.expanded[id as usize].as_deref().expect("expanded above")
    }
}

struct AutomatonGraph<T> {
    states: Vec<WfaState<T>>,
    accepting: Vec<bool>,
    index: FxHashMap<(Option<Symbol>, Box<[i64]>), u32>,
    next: FxHashMap<(u32, Symbol), u32>,
}

impl<T: Scalar> AutomatonGraph<T> {
    fn new() -> Self {
        AutomatonGraph {
            states: Vec::new(),
            accepting: Vec::new(),
            index: FxHashMap::default(),
            next: FxHashMap::default(),
        }
    }

    fn intern(&mut self, s: &WfaState<T>, wfa: &Wfa<T>) -> u32 {
        let key: Box<[i64]> = s.alpha.iter().map(|a| (a.as_f64() * ALPHA_QUANTUM).round() as i64).collect();
        let key = (s.last_symbol, key);
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.states.len() as u32;
        self.accepting.push(wfa.accepts(s));
        self.states.push(s.clone());
        self.index.insert(key, id);
        id
    }

    fn step(&mut self, id: u32, sigma: Symbol, wfa: &Wfa<T>) -> u32 {
        if self.states[id as usize].last_symbol == Some(sigma) {
            return id;
        }
        if let Some(&n) = self.next.get(&(id, sigma)) {
            return n;
        }
        let s = wfa.step(&self.states[id as usize], sigma);
        let n = self.intern(&s, wfa);
        self.next.insert((id, sigma), n);
        n
    }
}

fn product_key(grid: u32, wfa: u32) -> u64 {
    (grid as u64) << 32 | wfa as u64
}

/// Heap entry ordered so that `BinaryHeap` pops the smallest `(g, seq)`.
struct Open<T> {
    g: T,
    seq: u64,
    local: u32,
}

impl<T: Scalar> PartialEq for Open<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Open<T> {}

impl<T: Scalar> PartialOrd for Open<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Open<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .g
            .partial_cmp(&self.g)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

type Memo<T> = Result<(T, Rc<[PathStep]>), PlanError>;

/// Dijkstra on the product space with a value memo valid for one cost
/// snapshot.
pub struct Planner<'w, T> {
    wfa: &'w Wfa<T>,
    limits: Limits,
    costs: EdgeCosts<T>,
    grid: GridGraph,
    automaton: AutomatonGraph<T>,
    /// Per grid id; `None` until computed for the current costs.
    edge_costs: Vec<Option<[T; 6]>>,
    memo: FxHashMap<u64, Memo<T>>,
}

impl<'w, T: Scalar> Planner<'w, T> {
    pub fn new(wfa: &'w Wfa<T>, costs: EdgeCosts<T>, limits: Limits) -> Self {
        Planner {
            wfa,
            limits,
            costs,
            grid: GridGraph::default(),
            automaton: AutomatonGraph::new(),
            edge_costs: Vec::new(),
            memo: FxHashMap::default(),
        }
    }

    pub fn with_model(wfa: &'w Wfa<T>, model: &CostModel<T>, limits: Limits) -> Self {
        Self::new(wfa, EdgeCosts::Model(model.clone()), limits)
    }

    pub fn wfa(&self) -> &Wfa<T> {
        self.wfa
    }

    pub fn costs(&self) -> &EdgeCosts<T> {
        &self.costs
    }

    /// Replace the edge costs, invalidating cached costs and values.
    pub fn set_costs(&mut self, costs: EdgeCosts<T>) {
        self.costs = costs;
        self.edge_costs.clear();
        self.memo.clear();
    }

    pub fn set_model(&mut self, model: &CostModel<T>) {
        self.set_costs(EdgeCosts::Model(model.clone()));
    }

    /// Drop every cached grid state as well (bounds memory across many maps).
    pub fn clear_all(&mut self) {
        self.grid = GridGraph::default();
        self.automaton = AutomatonGraph::new();
        self.edge_costs.clear();
        self.memo.clear();
    }

    pub fn grid_state(&self, id: u32) -> &GridState {
        &self.grid.states[id as usize]
    }

    pub fn wfa_state(&self, id: u32) -> &WfaState<T> {
        &self.automaton.states[id as usize]
    }

    pub fn cached_grid_states(&self) -> usize {
        self.grid.states.len()
    }

    fn intern(&mut self, node: &ProductNode<T>) -> (u32, u32) {
        (self.grid.intern(&node.x), self.automaton.intern(&node.wfa_state, self.wfa))
    }

    fn costs_of(&mut self, grid: u32) -> [T; 6] {
        let g = grid as usize;
        if self.edge_costs.len() <= g {
            self.edge_costs.resize(self.grid.states.len().max(g + 1), None);
        }
        if let Some(c) = self.edge_costs[g] {
            return c;
        }
        let c = match &self.costs {
            EdgeCosts::Unit => [T::one(); 6],
            EdgeCosts::Model(m) => {
                let exp = self.grid.expand(grid);
                CONTROLS.map(|u| m.cost_of_features(&exp.feats[u.id()]))
            }
        };
        self.edge_costs[g] = Some(c);
        c
    }

    /// Edge cost `c(x, u)` under the current costs.
    pub fn edge_cost(&mut self, grid: u32, u: Control) -> T {
        self.costs_of(grid)[u.id()]
    }

    /// Sparse features of `(x, u)` for a cached grid state.
    pub fn features_of(&mut self, grid: u32, u: Control) -> &[u32] {
        &self.grid.expand(grid).feats[u.id()]
    }

    /// `V(start)`: cheapest cost to reach an accepting product node.
    pub fn plan_value(&mut self, start: &ProductNode<T>) -> Result<PlanResult<T>, PlanError> {
        let (g, w) = self.intern(start);
        self.plan_ids(g, w)
    }

    fn plan_ids(&mut self, grid: u32, wfa: u32) -> Result<PlanResult<T>, PlanError> {
        let key = product_key(grid, wfa);
        if let Some(m) = self.memo.get(&key) {
            return m.clone().map(|(value, path)| PlanResult { value, path, expansions: 0 });
        }
        let (res, expansions) = self.dijkstra(grid, wfa);
        match res {
            Ok(path) => {
                let value = self.memoize_path(&path);
                Ok(PlanResult { value, path, expansions })
            }
            Err(e) => {
                self.memo.insert(key, Err(e));
                Err(e)
            }
        }
    }

    /// Record every suffix of an optimal path, each summed front to back.
    fn memoize_path(&mut self, path: &Rc<[PathStep]>) -> T {
        let mut start_value = T::zero();
        for k in 0..=path.len() {
            let node_key = match path.get(k) {
                Some(s) => product_key(s.grid, s.wfa),
                None => match path.last() {
                    Some(last) => {
                        let (ng, sigma) = self.grid.expand(last.grid).next[last.control.id()];
                        let nw = self.automaton.step(last.wfa, sigma, self.wfa);
                        product_key(ng, nw)
                    }
                    None => continue,
                },
            };
            let mut v = T::zero();
            for s in &path[k..] {
                v = v + self.edge_cost(s.grid, s.control);
            }
            if k == 0 {
                start_value = v;
            }
            let suffix: Rc<[PathStep]> = path[k..].into();
            self.memo.entry(node_key).or_insert(Ok((v, suffix)));
        }
        if path.is_empty() {
            // accepting start; key is not derivable from an empty path
            return T::zero();
        }
        start_value
    }

    fn dijkstra(&mut self, grid: u32, wfa: u32) -> (Result<Rc<[PathStep]>, PlanError>, usize) {
        if self.automaton.accepting[wfa as usize] {
            self.memo.insert(product_key(grid, wfa), Ok((T::zero(), Rc::from(Vec::new()))));
            return (Ok(Rc::from(Vec::new())), 0);
        }
        let mut local: FxHashMap<u64, u32> = FxHashMap::default();
        let mut nodes: Vec<(u32, u32)> = vec![(grid, wfa)];
        let mut g: Vec<T> = vec![T::zero()];
        let mut parent: Vec<(u32, Control)> = vec![(u32::MAX, Control::TurnLeft)];
        let mut closed: Vec<bool> = vec![false];
        local.insert(product_key(grid, wfa), 0);
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        heap.push(Open { g: T::zero(), seq, local: 0 });
        let mut expansions = 0usize;

        while let Some(Open { g: gv, local: li, .. }) = heap.pop() {
            let li = li as usize;
            if closed[li] || gv > g[li] {
                continue;
            }
            closed[li] = true;
            let (ng, nw) = nodes[li];
            if self.automaton.accepting[nw as usize] {
                let mut steps = Vec::new();
                let mut cur = li;
                while parent[cur].0 != u32::MAX {
                    let (p, u) = parent[cur];
                    let (pg, pw) = nodes[p as usize];
                    steps.push(PathStep { grid: pg, wfa: pw, control: u });
                    cur = p as usize;
                }
                steps.reverse();
                return (Ok(steps.into()), expansions);
            }
            expansions += 1;
            if expansions > self.limits.max_expansions {
                return (Err(PlanError::Unreachable { expansions: expansions - 1 }), expansions - 1);
            }
            let costs = self.costs_of(ng);
            let next = self.grid.expand(ng).next;
            for u in CONTROLS {
                let (sg, sigma) = next[u.id()];
                let sw = self.automaton.step(nw, sigma, self.wfa);
                let cand = gv + costs[u.id()];
                let k = product_key(sg, sw);
                let si = match local.get(&k) {
                    Some(&si) => si as usize,
                    None => {
                        let si = nodes.len();
                        local.insert(k, si as u32);
                        nodes.push((sg, sw));
                        g.push(T::infinity());
                        parent.push((u32::MAX, u));
                        closed.push(false);
                        si
                    }
                };
                if !closed[si] && cand < g[si] {
                    g[si] = cand;
                    parent[si] = (li as u32, u);
                    seq += 1;
                    heap.push(Open { g: cand, seq, local: si as u32 });
                }
            }
        }
        (Err(PlanError::Unreachable { expansions }), expansions)
    }

    /// `Q(x, u) = c(x, u) + V(T(s, u))` for every control, in canonical order.
    pub fn q_values(&mut self, node: &ProductNode<T>) -> [QEntry<T>; 6] {
        let (g, w) = self.intern(node);
        self.q_values_ids(g, w)
    }

    pub fn q_values_ids(&mut self, grid: u32, wfa: u32) -> [QEntry<T>; 6] {
        let costs = self.costs_of(grid);
        let next = self.grid.expand(grid).next;
        CONTROLS.map(|u| {
            let (sg, sigma) = next[u.id()];
            let sw = self.automaton.step(wfa, sigma, self.wfa);
            match self.plan_ids(sg, sw) {
                Ok(r) => {
                    let mut path = Vec::with_capacity(r.path.len() + 1);
                    path.push(PathStep { grid, wfa, control: u });
                    path.extend_from_slice(&r.path);
                    QEntry { control: u, q: costs[u.id()] + r.value, path: Some(path) }
                }
                Err(_) => QEntry { control: u, q: T::lit(UNREACHABLE_Q), path: None },
            }
        })
    }

    /// Intern a product node, returning `(grid id, wfa id)`.
    pub fn node_ids(&mut self, node: &ProductNode<T>) -> (u32, u32) {
        self.intern(node)
    }

    /// Ids of the successor of `(grid, wfa)` under `u`.
    pub fn successor_ids(&mut self, grid: u32, wfa: u32, u: Control) -> (u32, u32) {
        let (sg, sigma) = self.grid.expand(grid).next[u.id()];
        (sg, self.automaton.step(wfa, sigma, self.wfa))
    }

    pub fn accepts(&self, wfa: u32) -> bool {
        self.automaton.accepting[wfa as usize]
    }

    /// Sum of edge costs along a path.
    pub fn path_cost(&mut self, path: &[PathStep]) -> T {
        let mut v = T::zero();
        for s in path {
            v = v + self.edge_cost(s.grid, s.control);
        }
        v
    }

    /// `grad += scale · Σ_{(x,u) ∈ path} ∂c(x,u)/∂θ` (no-op for unit costs).
    pub fn accumulate_path_grad(&mut self, path: &[PathStep], scale: T, grad: &mut [T]) {
        let model = match &self.costs {
            EdgeCosts::Model(m) => m.clone(),
            EdgeCosts::Unit => return,
        };
        for s in path {
            let f = &self.grid.expand(s.grid).feats[s.control.id()];
            model.accumulate_grad_features(f, scale, grad);
        }
    }

    /// Materialize a path as `(state, control)` pairs.
    pub fn transitions(&self, path: &[PathStep]) -> Vec<(GridState, Control)> {
        path.iter().map(|s| (self.grid_state(s.grid).clone(), s.control)).collect()
    }

    /// Product node reached after following `path` from its first node.
    pub fn path_end(&mut self, path: &[PathStep]) -> Option<(u32, u32)> {
        let last = path.last()?;
        Some(self.successor_ids(last.grid, last.wfa, last.control))
    }
}

/// One-shot `V(start)` with a fresh planner.
pub fn plan_value<T: Scalar>(
    start: &ProductNode<T>,
    costs: EdgeCosts<T>,
    wfa: &Wfa<T>,
    limits: Limits,
) -> Result<(T, Vec<(GridState, Control)>), PlanError> {
    let mut p = Planner::new(wfa, costs, limits);
    let r = p.plan_value(start)?;
    Ok((r.value, p.transitions(&r.path)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostKind;
    use crate::expert::goal_reach_wfa;
    use crate::gridworld::{generate_env, EncodedState, TaskKind, TaskSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn open_room(n: usize, agent: (usize, usize), dir: u8, goal: (usize, usize)) -> GridState {
        let mut map = vec![vec![0u8; n]; n];
        for i in 0..n {
            map[0][i] = 1;
            map[n - 1][i] = 1;
            map[i][0] = 1;
            map[i][n - 1] = 1;
        }
        map[goal.0][goal.1] = 5;
        GridState::decode(&EncodedState { map, pos: [agent.0, agent.1], dir, carried: 0 }).unwrap()
    }

    #[test]
    fn accepting_start_has_zero_value_and_empty_path() {
        let x = generate_env(&TaskSpec::doorkey(), 1);
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let mut node = ProductNode::initial(x, &wfa);
        node.wfa_state.alpha = vec![0.0, 1.0];
        let (v, path) = plan_value(&node, EdgeCosts::Unit, &wfa, Limits::default()).unwrap();
        assert_eq!(v, 0.0);
        assert!(path.is_empty());
    }

    #[test]
    fn unit_cost_value_matches_bfs() {
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        for seed in 0..20 {
            let x = generate_env(&TaskSpec::doorkey_sized(6), seed);
            let bfs = crate::gridworld::shortest_distance_to_goal(&x).unwrap();
            let (v, path) = plan_value(&ProductNode::initial(x, &wfa), EdgeCosts::Unit, &wfa, Limits::default()).unwrap();
            assert_eq!(v, bfs as f64);
            assert_eq!(path.len(), bfs);
        }
    }

    #[test]
    fn walled_off_goal_is_unreachable() {
        let mut x = open_room(6, (1, 1), 3, (4, 4));
        let mut enc = x.encode();
        enc.map[3][4] = 1;
        enc.map[4][3] = 1;
        x = GridState::decode(&enc).unwrap();
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let err = plan_value(&ProductNode::initial(x, &wfa), EdgeCosts::Unit, &wfa, Limits::default()).unwrap_err();
        assert!(matches!(err, PlanError::Unreachable { .. }));
    }

    #[test]
    fn expansion_limit_is_reported() {
        let x = generate_env(&TaskSpec::doorkey(), 3);
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let err = plan_value(&ProductNode::initial(x, &wfa), EdgeCosts::Unit, &wfa, Limits { max_expansions: 5 }).unwrap_err();
        assert_eq!(err, PlanError::Unreachable { expansions: 5 });
    }

    #[test]
    fn forward_is_best_next_to_goal() {
        // agent at (2,2) facing right, goal at (2,3)
        let x = open_room(5, (2, 2), 3, (2, 3));
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let mut p = Planner::new(&wfa, EdgeCosts::Unit, Limits::default());
        let q = p.q_values(&ProductNode::initial(x, &wfa));
        let fwd = q[Control::Forward.id()].q;
        assert_eq!(fwd, 1.0);
        for e in &q {
            if e.control != Control::Forward {
                assert!(e.q > fwd, "{:?}", e);
            }
        }
    }

    fn random_linear(x: &GridState, seed: u64) -> CostModel<f64> {
        let mut m = CostModel::for_state(CostKind::Linear, x, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.theta.iter_mut().for_each(|t| *t = rng.gen_range(-1.0..1.0));
        m
    }

    #[test]
    fn q_minus_cost_is_successor_value_and_bellman_holds() {
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        for seed in 0..5 {
            let x = generate_env(&TaskSpec::doorkey_sized(6), seed);
            let model = random_linear(&x, seed);
            let node = ProductNode::initial(x.clone(), &wfa);
            let mut p = Planner::with_model(&wfa, &model, Limits::default());
            let v = p.plan_value(&node).unwrap().value;
            let q = p.q_values(&node);
            for e in &q {
                let succ = node.successor(e.control, &wfa);
                let mut fresh = Planner::with_model(&wfa, &model, Limits::default());
                let vs = fresh.plan_value(&succ).unwrap().value;
                assert!((e.q - model.cost(&x, e.control) - vs).abs() < 1e-9);
                let path = e.path.as_ref().unwrap();
                assert!((p.path_cost(path) - e.q).abs() < 1e-9);
            }
            let min_q = q.iter().map(|e| e.q).fold(f64::INFINITY, f64::min);
            assert!((v - min_q).abs() < 1e-9);
        }
    }

    #[test]
    fn path_telescopes_and_ends_accepting() {
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let x = generate_env(&TaskSpec::doorkey(), 11);
        let model = random_linear(&x, 4);
        let mut p = Planner::with_model(&wfa, &model, Limits::default());
        let r = p.plan_value(&ProductNode::initial(x, &wfa)).unwrap();
        let mut total = 0.0;
        for s in r.path.iter() {
            total += model.cost(p.grid_state(s.grid), s.control);
        }
        assert!((total - r.value).abs() < 1e-9);
        let (_, w) = p.path_end(&r.path).unwrap();
        assert!(p.accepts(w));
    }

    #[test]
    fn memoized_suffix_values_agree_with_fresh_search() {
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let x = generate_env(&TaskSpec::doorkey(), 12);
        let model = random_linear(&x, 5);
        let mut p = Planner::with_model(&wfa, &model, Limits::default());
        let r = p.plan_value(&ProductNode::initial(x, &wfa)).unwrap();
        for s in r.path.iter() {
            let node = ProductNode { x: p.grid_state(s.grid).clone(), wfa_state: p.wfa_state(s.wfa).clone() };
            let cached = p.plan_value(&node).unwrap().value;
            let fresh = plan_value(&node, EdgeCosts::Model(model.clone()), &wfa, Limits::default()).unwrap().0;
            assert!((cached - fresh).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_cost_scales_unit_value_and_keeps_path() {
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let x = generate_env(&TaskSpec::doorkey_sized(6), 7);
        let mut flat = CostModel::for_state(CostKind::Linear, &x, 0);
        flat.epsilon_floor = 0.0;
        let node = ProductNode::initial(x, &wfa);
        let (vu, pu) = plan_value(&node, EdgeCosts::Unit, &wfa, Limits::default()).unwrap();
        let (vf, pf) = plan_value(&node, EdgeCosts::Model(flat), &wfa, Limits::default()).unwrap();
        assert!((vf - std::f64::consts::LN_2 * vu).abs() < 1e-9);
        assert_eq!(pu, pf);
    }

    #[test]
    fn set_costs_invalidates_memo() {
        let wfa = goal_reach_wfa(TaskKind::DoorKey);
        let x = generate_env(&TaskSpec::doorkey_sized(6), 2);
        let node = ProductNode::initial(x.clone(), &wfa);
        let mut p = Planner::new(&wfa, EdgeCosts::Unit, Limits::default());
        let a = p.plan_value(&node).unwrap().value;
        p.set_model(&CostModel::for_state(CostKind::Linear, &x, 0));
        let b = p.plan_value(&node).unwrap().value;
        assert!((b - a * (std::f64::consts::LN_2 + 1e-3)).abs() < 1e-9);
    }
}
