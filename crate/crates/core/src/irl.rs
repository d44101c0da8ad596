//! Boltzmann policy over planner Q values, demonstration negative
//! log-likelihood, its path subgradient, and the training loop.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost::CostModel;
use crate::demo::Demonstration;
use crate::gridworld::Control;
use crate::optim::{clip_norm, AdamParams, Optimizer, OptimizerKind};
use crate::planner::{Limits, Planner, ProductNode, QEntry, UNREACHABLE_Q};
use crate::scalar::Scalar;
use crate::wfa::Wfa;

pub const DEFAULT_AGENT_ETA: f64 = 0.5;
pub const DEFAULT_BATCH_SIZE: usize = 16;
pub const DEFAULT_GRAD_CLIP: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum IrlError {
    #[error("no feasible control: every Q value is infinite")]
    NoFeasibleControl,
    #[error("demonstrated control {control:?} is unreachable (Q infinite)")]
    InfeasibleDemoControl { control: Control },
    #[error("no demonstration scores at or above the acceptance threshold")]
    NoSuccessfulDemos,
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("loss became non-finite at epoch {epoch} (batch {batch})")]
    Diverged { epoch: usize, batch: usize },
}

fn is_infeasible<T: Scalar>(q: T) -> bool {
    !q.is_finite() || q.as_f64() >= UNREACHABLE_Q
}

/// `π(u) ∝ exp(−Q(u)/η)`; infeasible entries get probability exactly 0.
pub fn boltzmann<T: Scalar>(q: &[T], eta: T) -> Result<Vec<T>, IrlError> {
    if !(eta > T::zero()) {
        return Err(IrlError::Temperature(eta.as_f64()));
    }
    let min_q = q
        .iter()
        .copied()
        .filter(|&v| !is_infeasible(v))
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or(IrlError::NoFeasibleControl)?;
    let w: Vec<T> = q
        .iter()
        .map(|&v| if is_infeasible(v) { T::zero() } else { (-(v - min_q) / eta).exp() })
        .collect();
    let z: T = w.iter().copied().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Lowest finite Q, ties to the earliest control.
pub fn argmin_control<T: Scalar>(q: &[QEntry<T>]) -> Option<Control> {
    let mut best: Option<(T, Control)> = None;
    for e in q {
        if is_infeasible(e.q) {
            continue;
        }
        if best.map_or(true, |(b, _)| e.q < b) {
            best = Some((e.q, e.control));
        }
    }
    best.map(|(_, u)| u)
}

/// Draw a control from `boltzmann(Q, η)`; `η = 0` is [`argmin_control`].
pub fn sample_control<T: Scalar, R: Rng>(q: &[QEntry<T>], eta: f64, rng: &mut R) -> Option<Control> {
    if eta == 0.0 {
        return argmin_control(q);
    }
    let values: Vec<T> = q.iter().map(|e| e.q).collect();
    let probs = boltzmann(&values, T::lit(eta)).ok()?;
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (e, p) in q.iter().zip(&probs) {
        if *p == T::zero() {
            continue;
        }
        acc += p.as_f64();
        last = Some(e.control);
        if r < acc {
            return Some(e.control);
        }
    }
    last
}

/// Product nodes visited by a demonstration: the WFA state at step `t` is
/// folded over the labels of the earlier transitions.
pub fn demo_product_nodes<T: Scalar>(demo: &Demonstration, wfa: &Wfa<T>) -> Vec<ProductNode<T>> {
    let mut s = wfa.initial_state();
    let mut out = Vec::with_capacity(demo.len());
    for (t, x) in demo.states.iter().enumerate() {
        out.push(ProductNode { x: x.clone(), wfa_state: s.clone() });
        s = wfa.step(&s, demo.word.symbols()[t]);
    }
    out
}

/// Demonstration transitions that enter the loss (`s ≥ ξ`), as interned
/// planner ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DemoTransition {
    pub demo: usize,
    pub t: usize,
    pub grid: u32,
    pub wfa: u32,
    pub control: Control,
}

pub fn collect_transitions<T: Scalar>(demos: &[Demonstration], planner: &mut Planner<'_, T>) -> Vec<DemoTransition> {
    let xi = planner.wfa().xi.as_f64();
    let mut out = Vec::new();
    for (i, d) in demos.iter().enumerate() {
        if d.score < xi {
            continue;
        }
        for (t, node) in demo_product_nodes(d, planner.wfa()).iter().enumerate() {
            let (grid, wfa) = planner.node_ids(node);
            out.push(DemoTransition { demo: i, t, grid, wfa, control: d.controls[t] });
        }
    }
    out
}

/// `−log π(u_t | x_t)` at one transition; when `grad` is given, also adds
/// `scale · ∂(−log π)/∂θ` into it.
pub fn transition_nll<T: Scalar>(
    planner: &mut Planner<'_, T>,
    tr: &DemoTransition,
    eta: T,
    grad: Option<(&mut [T], T)>,
) -> Result<T, IrlError> {
    let q = planner.q_values_ids(tr.grid, tr.wfa);
    let values: Vec<T> = q.iter().map(|e| e.q).collect();
    let probs = boltzmann(&values, eta)?;
    let k = tr.control.id();
    if probs[k] == T::zero() {
        return Err(IrlError::InfeasibleDemoControl { control: tr.control });
    }
    let nll = -probs[k].ln();
    if let Some((g, scale)) = grad {
        // ∂(−log π(u_t))/∂θ = (1/η) Σ_u' (1{u'=u_t} − π(u')) ∂Q(u')/∂θ
        for (e, &p) in q.iter().zip(&probs) {
            let indicator = if e.control == tr.control { T::one() } else { T::zero() };
            let coef = scale * (indicator - p) / eta;
            if coef == T::zero() {
                continue;
            }
            if let Some(path) = &e.path {
                planner.accumulate_path_grad(path, coef, g);
            }
        }
    }
    Ok(nll)
}

/// `∂ log π_θ(u_t | x_t)/∂θ` through the optimal paths `τ(x_t, u')`.
pub fn subgradient<T: Scalar>(
    node: &ProductNode<T>,
    control: Control,
    model: &CostModel<T>,
    wfa: &Wfa<T>,
    eta: f64,
    limits: Limits,
) -> Result<Vec<T>, IrlError> {
    let mut planner = Planner::with_model(wfa, model, limits);
    let (grid, w) = planner.node_ids(node);
    let tr = DemoTransition { demo: 0, t: 0, grid, wfa: w, control };
    let mut g = vec![T::zero(); model.num_params()];
    transition_nll(&mut planner, &tr, T::lit(eta), Some((&mut g, -T::one())))?;
    Ok(g)
}

/// `log π_θ(u | x)` for one product node.
pub fn log_policy<T: Scalar>(
    node: &ProductNode<T>,
    control: Control,
    model: &CostModel<T>,
    wfa: &Wfa<T>,
    eta: f64,
    limits: Limits,
) -> Result<T, IrlError> {
    let mut planner = Planner::with_model(wfa, model, limits);
    let (grid, w) = planner.node_ids(node);
    let tr = DemoTransition { demo: 0, t: 0, grid, wfa: w, control };
    transition_nll(&mut planner, &tr, T::lit(eta), None).map(|v| -v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NllReport<T> {
    /// Sum over successful-demo transitions; `+∞` if any was infeasible.
    pub loss: T,
    pub transitions: usize,
    /// `(demo index, step)` of transitions whose control was unreachable.
    pub unreachable: Vec<(usize, usize)>,
}

/// `L_c(θ) = −Σ_{n: s ≥ ξ} Σ_t log π_θ(u_t | x_t)`.
pub fn nll_loss<T: Scalar>(
    demos: &[Demonstration],
    model: &CostModel<T>,
    wfa: &Wfa<T>,
    eta: f64,
    limits: Limits,
) -> Result<NllReport<T>, IrlError> {
    nll_and_grad(demos, model, wfa, eta, limits, false).map(|(r, _)| r)
}

/// Loss together with its full-batch gradient.
pub fn nll_and_grad<T: Scalar>(
    demos: &[Demonstration],
    model: &CostModel<T>,
    wfa: &Wfa<T>,
    eta: f64,
    limits: Limits,
    with_grad: bool,
) -> Result<(NllReport<T>, Vec<T>), IrlError> {
    let mut planner = Planner::with_model(wfa, model, limits);
    let transitions = collect_transitions(demos, &mut planner);
    let mut grad = vec![T::zero(); if with_grad { model.num_params() } else { 0 }];
    let mut loss = T::zero();
    let mut unreachable = Vec::new();
    for tr in &transitions {
        let g = if with_grad { Some((grad.as_mut_slice(), T::one())) } else { None };
        match transition_nll(&mut planner, tr, T::lit(eta), g) {
            Ok(v) => loss = loss + v,
            Err(IrlError::InfeasibleDemoControl { .. }) | Err(IrlError::NoFeasibleControl) => {
                unreachable.push((tr.demo, tr.t));
                loss = T::infinity();
            }
            Err(e) => return Err(e),
        }
    }
    Ok((NllReport { loss, transitions: transitions.len(), unreachable }, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub adam: AdamParams,
    pub grad_clip: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub limits: Limits,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: DEFAULT_AGENT_ETA,
            lr: 0.05,
            epochs: 30,
            optimizer: OptimizerKind::Adam,
            adam: AdamParams::default(),
            grad_clip: DEFAULT_GRAD_CLIP,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            limits: Limits::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean `−log π` over the transitions that were feasible this epoch.
    pub mean_nll: f64,
    /// Transitions skipped because their control had no accepting path.
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutput<T> {
    pub model: CostModel<T>,
    pub trace: Vec<EpochStats>,
}

/// Minibatch subgradient descent on the demonstration NLL.
pub fn train<T: Scalar>(
    demos: &[Demonstration],
    wfa: &Wfa<T>,
    model: CostModel<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutput<T>, IrlError> {
    if !(cfg.eta > 0.0) {
        return Err(IrlError::Temperature(cfg.eta));
    }
    let mut model = model;
    let mut planner = Planner::with_model(wfa, &model, cfg.limits);
    let mut transitions = collect_transitions(demos, &mut planner);
    if transitions.is_empty() {
        return Err(IrlError::NoSuccessfulDemos);
    }
    let eta = T::lit(cfg.eta);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, model.num_params(), cfg.adam);
    let mut grad = vec![T::zero(); model.num_params()];
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        transitions.shuffle(&mut rng);
        let mut total = 0.0;
        let mut counted = 0usize;
        let mut skipped = 0usize;
        for (batch, chunk) in transitions.chunks(cfg.batch_size.max(1)).enumerate() {
            planner.set_model(&model);
            grad.iter_mut().for_each(|g| *g = T::zero());
            let mut used = 0usize;
            for tr in chunk {
                match transition_nll(&mut planner, tr, eta, Some((&mut grad, T::one()))) {
                    Ok(v) => {
                        if !v.is_finite() {
                            return Err(IrlError::Diverged { epoch, batch });
                        }
                        total += v.as_f64();
                        counted += 1;
                        used += 1;
                    }
                    Err(IrlError::InfeasibleDemoControl { .. }) | Err(IrlError::NoFeasibleControl) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            if used == 0 {
                continue;
            }
            let inv = T::one() / T::lit(used as f64);
            grad.iter_mut().for_each(|g| *g = *g * inv);
            clip_norm(&mut grad, T::lit(cfg.grad_clip));
            opt.step(&mut model.theta, &grad);
            if model.theta.iter().any(|t| !t.is_finite()) {
                return Err(IrlError::Diverged { epoch, batch });
            }
        }
        let mean_nll = if counted == 0 { f64::NAN } else { total / counted as f64 };
        if !mean_nll.is_finite() {
            return Err(IrlError::Diverged { epoch, batch: 0 });
        }
        trace.push(EpochStats { epoch, mean_nll, skipped });
    }
    Ok(TrainOutput { model, trace })
}

/// `epoch,mean_nll` CSV.
pub fn trace_csv(trace: &[EpochStats]) -> String {
    let mut s = String::from("epoch,mean_nll\n");
    for e in trace {
        writeln!(s, "{},{}", e.epoch, e.mean_nll).expect("write to string");
    }
    s
}

pub fn save_trace(path: impl AsRef<Path>, trace: &[EpochStats]) -> std::io::Result<()> {
    fs::write(path, trace_csv(trace))
}
