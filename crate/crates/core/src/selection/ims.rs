//! Quasi-Newton descent on the information criterion in log-strength
//! coordinates `eta = (ln gamma_r, ln gamma_c)`.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate_objective, gradient, Criterion, Mode, ObjectiveEvaluation, ProbeSet};
use crate::completion::BmcProblem;
use crate::error::Result;
use crate::solver::{SolveAudit, SolverConfig};
use crate::system::PenaltyParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImsConfig {
    /// Cap on recorded iterates, the starting point included.
    pub max_iters: usize,
    /// Stop when the log-coordinate gradient has sup-norm at most this.
    pub grad_tol: f64,
    pub memory: usize,
    pub armijo_c1: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Longest trial step in log coordinates (sup-norm).
    pub max_step: f64,
    pub probes: usize,
    pub seed: u64,
    pub criterion: Criterion,
}

impl Default for ImsConfig {
    fn default() -> Self {
        ImsConfig {
            max_iters: 200,
            grad_tol: 1e-5,
            memory: 10,
            armijo_c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 40,
            max_step: 4.0,
            probes: 5,
            seed: 0,
            criterion: Criterion::Bic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    /// Gradient within tolerance, or no decrease of the objective is
    /// representable in floating point along the search direction.
    Converged,
    MaxIters,
    LineSearchFailure,
    /// The fit reproduced the observations exactly, so the log of the
    /// residual is unbounded below.
    PerfectFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub gamma: PenaltyParams,
    pub objective: f64,
    pub grad_inf_norm: f64,
    /// Cumulative linear solves so far.
    pub solves: usize,
    /// Cumulative seconds since the start.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub iterates: Vec<IterateRecord>,
    pub status: TerminalStatus,
    /// Objective evaluations, including rejected line-search trials.
    pub evaluations: usize,
    pub gradients: usize,
    pub solves: usize,
    pub wall_seconds: f64,
}

impl SelectionTrace {
    pub fn iterations(&self) -> usize {
        self.iterates.len()
    }

    pub fn last(&self) -> &IterateRecord {
        self.iterates.last().expect("a trace holds at least the starting point")
    }
}

struct Point<'p> {
    eta: [f64; 2],
    value: f64,
    grad: [f64; 2],
    eval: ObjectiveEvaluation<'p>,
}

fn inf_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// L-BFGS two-loop recursion: `-H g` for the implicit inverse Hessian `H`.
fn direction(g: [f64; 2], memory: &VecDeque<([f64; 2], [f64; 2])>) -> [f64; 2] {
    let mut q = g;
    let mut alphas = Vec::with_capacity(memory.len());
    for &(s, y) in memory.iter().rev() {
        let rho = 1.0 / dot2(y, s);
        let a = rho * dot2(s, q);
        q = [q[0] - a * y[0], q[1] - a * y[1]];
        alphas.push((a, rho));
    }
    if let Some(&(s, y)) = memory.back() {
        let scale = dot2(s, y) / dot2(y, y);
        q = [q[0] * scale, q[1] * scale];
    }
    for (&(s, y), &(a, rho)) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot2(y, q);
        q = [q[0] + (a - b) * s[0], q[1] + (a - b) * s[1]];
    }
    [-q[0], -q[1]]
}

/// Minimizes the criterion from `init`. Hutchinson mode draws its probes
/// once from `cfg.seed` and keeps them for the whole run. Failed trial
/// evaluations count as `+inf` in the line search.
pub fn ims<'p>(
    p: &'p BmcProblem,
    init: PenaltyParams,
    mode: Mode,
    cfg: &ImsConfig,
    solver: &SolverConfig,
) -> Result<(PenaltyParams, SelectionTrace)> {
    let start = Instant::now();
    let audit = SolveAudit::new();
    let solver = SolverConfig { audit: Some(audit.clone()), ..solver.clone() };
    let probes = match mode {
        Mode::Exact => None,
        Mode::Hutchinson => Some(ProbeSet::rademacher(cfg.probes, p.n_rows() * p.n_cols(), cfg.seed)),
    };
    let mut evaluations = 0usize;
    let mut gradients = 0usize;
    let criterion = cfg.criterion;

    let mut evaluate = |gamma: PenaltyParams| -> Result<ObjectiveEvaluation<'p>> {
        evaluations += 1;
        evaluate_objective(p, gamma, mode, probes.as_ref(), &solver)
    };
    let log_gradient = |eval: &ObjectiveEvaluation<'_>, count: &mut usize| -> Result<[f64; 2]> {
        *count += 1;
        let g = gradient(p, eval, &solver)?.for_criterion(criterion);
        Ok([eval.gamma.gamma_r * g[0], eval.gamma.gamma_c * g[1]])
    };

    let eta0 = init.log();
    let eval0 = evaluate(init)?;
    let mut records = Vec::new();
    let record = |pt: &Point<'_>, records: &mut Vec<IterateRecord>| {
        records.push(IterateRecord {
            gamma: pt.eval.gamma,
            objective: pt.value,
            grad_inf_norm: inf_norm(pt.grad),
            solves: audit.count(),
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    };
    if eval0.rss_floored {
        let gamma = eval0.gamma;
        records.push(IterateRecord {
            gamma,
            objective: eval0.value(criterion),
            grad_inf_norm: f64::NAN,
            solves: audit.count(),
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        let trace = SelectionTrace {
            iterates: records,
            status: TerminalStatus::PerfectFit,
            evaluations,
            gradients,
            solves: audit.count(),
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        return Ok((gamma, trace));
    }
    let grad0 = log_gradient(&eval0, &mut gradients)?;
    let mut current = Point { eta: eta0, value: eval0.value(criterion), grad: grad0, eval: eval0 };
    record(&current, &mut records);
    let mut memory: VecDeque<([f64; 2], [f64; 2])> = VecDeque::with_capacity(cfg.memory);

    let status = loop {
        if inf_norm(current.grad) <= cfg.grad_tol {
            break TerminalStatus::Converged;
        }
        if records.len() >= cfg.max_iters {
            break TerminalStatus::MaxIters;
        }
        let mut d = direction(current.grad, &memory);
        if !(dot2(d, current.grad) < 0.0) {
            memory.clear();
            d = direction(current.grad, &memory);
        }
        let mut cap = cfg.max_step;
        if memory.is_empty() {
            cap = cap.min(1.0);
        }
        let dn = inf_norm(d);
        if dn > cap {
            d = [d[0] * cap / dn, d[1] * cap / dn];
        }
        let slope = dot2(d, current.grad);
        let mut step = 1.0;
        let mut accepted = None;
        let mut stalled = false;
        for _ in 0..=cfg.max_backtracks {
            if !decrease_visible(current.value, step * slope) {
                stalled = true;
                break;
            }
            let target = current.value + cfg.armijo_c1 * step * slope;
            let eta = [current.eta[0] + step * d[0], current.eta[1] + step * d[1]];
            match PenaltyParams::from_log(eta[0], eta[1]).and_then(&mut evaluate) {
                Ok(eval) => {
                    let value = eval.value(criterion);
                    if value.is_finite() && value <= target && value < current.value {
                        accepted = Some((eta, value, eval));
                        break;
                    }
                }
                Err(e) if e.is_solver_failure() => log::debug!("trial point failed: {e}"),
                Err(e) => return Err(e),
            }
            step *= cfg.shrink;
        }
        let Some((eta, value, eval)) = accepted else {
            // no decrease is representable along a descent direction
            break if stalled { TerminalStatus::Converged } else { TerminalStatus::LineSearchFailure };
        };
        if eval.rss_floored {
            current = Point { eta, value, grad: [f64::NAN; 2], eval };
            record(&current, &mut records);
            break TerminalStatus::PerfectFit;
        }
        let grad = log_gradient(&eval, &mut gradients)?;
        let s = [eta[0] - current.eta[0], eta[1] - current.eta[1]];
        let y = [grad[0] - current.grad[0], grad[1] - current.grad[1]];
        if dot2(s, y) > 1e-12 * dot2(s, s).sqrt() * dot2(y, y).sqrt() {
            if memory.len() == cfg.memory {
                memory.pop_front();
            }
            memory.push_back((s, y));
        }
        current = Point { eta, value, grad, eval };
        record(&current, &mut records);
    };

    let trace = SelectionTrace {
        iterates: records,
        status,
        evaluations,
        gradients,
        solves: audit.count(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((current.eval.gamma, trace))
}

/// Whether a predicted change of the objective survives rounding.
fn decrease_visible(value: f64, change: f64) -> bool {
    value + change < value
}
