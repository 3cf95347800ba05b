//! Asynchronous projected block coordinate descent over the sample-event
//! sequence.
//!
//! Each iteration applies the scheduled deliveries first (copying the
//! sender's block value as of the delivery stamp), then every agent
//! scheduled to compute takes a projected step on its own block using its
//! local, possibly stale, view. Runs are single-threaded and deterministic
//! given the schedule and initial state.

use crate::async_schedule::{AsyncSchedule, SamplingPlan};
use crate::bounds::{constants_block, gamma_max, BoundInputs, ConstantsBlock, ObjectiveConstants};
use crate::error::{Result, TvqpError};
use crate::linalg::{dist, norm};
use crate::oracle::{
    find_stationary_set, nearest_stationary, solve_strongly_convex, OracleSettings, StationarySet,
};
use crate::qp_model::{build_aggregate, AggregateObjective, GradientMode, TimeVaryingQp};

/// One agent's local copy of the decision vector with per-sender stamps.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub local_view: Vec<f64>,
    pub block_index: usize,
    pub last_computed: Option<usize>,
    pub copy_stamps: Vec<usize>,
}

/// The network at iteration k: authoritative blocks plus per-agent views.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub true_state: Vec<f64>,
    pub agents: Vec<AgentState>,
    pub k: usize,
    /// Trailing true states x(k-B+1..=k) for delivery lookups.
    history: Vec<Vec<f64>>,
    history_len: usize,
}

impl NetworkState {
    pub fn new(x0: &[f64], num_agents: usize, b: usize) -> Self {
        let agents = (0..num_agents)
            .map(|i| AgentState {
                local_view: x0.to_vec(),
                block_index: i,
                last_computed: None,
                copy_stamps: vec![0; num_agents],
            })
            .collect();
        NetworkState {
            true_state: x0.to_vec(),
            agents,
            k: 0,
            history: vec![x0.to_vec(); b + 1],
            history_len: b + 1,
        }
    }

    fn stored_state(&self, tau: usize) -> &[f64] {
        &self.history[tau % self.history_len]
    }

    fn push_history(&mut self, k_next: usize) {
        let slot = k_next % self.history_len;
        self.history[slot] = self.true_state.clone();
    }
}

/// Apply iteration k: deliveries, then the scheduled block updates.
/// Returns the update vector `s(k)` (zero on blocks that did not compute).
pub fn step(
    state: &mut NetworkState,
    k: usize,
    agg: &AggregateObjective,
    schedule: &AsyncSchedule,
    qp: &TimeVaryingQp,
    gamma_z: f64,
    mode: GradientMode,
) -> Vec<f64> {
    debug_assert!(gamma_z > 0.0);
    let partition = &qp.partition;
    let n = qp.n();

    for d in &schedule.deliveries[k] {
        let value = state.stored_state(d.tau).to_vec();
        let range = partition.range(d.from);
        state.agents[d.to].local_view[range.clone()].copy_from_slice(&value[range]);
        state.agents[d.to].copy_stamps[d.from] = d.tau;
    }

    // all updates are computed from the post-delivery views, then committed
    // together so no agent sees a peer's iteration-k block early
    let mut s = vec![0.0; n];
    let mut new_blocks: Vec<(usize, Vec<f64>)> = Vec::new();
    for &i in &schedule.compute_events[k] {
        let view = &state.agents[i].local_view;
        let direction = agg.eval_block_direction(i, view, mode);
        let range = partition.range(i);
        let stepped: Vec<f64> = view[range.clone()]
            .iter()
            .zip(&direction)
            .map(|(x, g)| x - gamma_z * g)
            .collect();
        let projected = crate::qp_model::project_box(&qp.box_set, partition, i, &stepped);
        for (off, j) in range.clone().enumerate() {
            s[j] = projected[off] - state.true_state[j];
        }
        new_blocks.push((i, projected));
    }
    for (i, block) in new_blocks {
        let range = partition.range(i);
        state.true_state[range.clone()].copy_from_slice(&block);
        state.agents[i].local_view[range].copy_from_slice(&block);
        state.agents[i].last_computed = Some(k);
    }

    state.k = k + 1;
    state.push_history(k + 1);
    s
}

/// Step-size selection per interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaPolicy {
    Fixed(f64),
    /// `safety * gamma_max_z`, re-evaluated each interval from the bound
    /// constants.
    Auto { safety: f64 },
}

/// Engine options.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub mode: GradientMode,
    pub gamma: GammaPolicy,
    /// Attach the ground-truth solvers: fills the alpha and err columns.
    pub oracle: Option<OracleSettings>,
    /// Error-bound constant fed to the bound constants (config override).
    pub lambda_z: f64,
    /// Evaluate the per-interval constants block even under a fixed gamma.
    pub eval_bounds: bool,
    /// Keep per-iteration local views for replay checks (test-sized runs).
    pub record_views: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: GradientMode::Literal,
            gamma: GammaPolicy::Fixed(1e-3),
            oracle: None,
            lambda_z: 1.0,
            eval_bounds: false,
            record_views: false,
        }
    }
}

/// Per-iteration trace row. `alpha` and `err_opt` are NaN when no oracle is
/// attached. `alpha` is empirical: it measures against the stationary
/// points the multistart search found, which may undercount on nonconvex
/// aggregates.
#[derive(Debug, Clone, Copy)]
pub struct IterRow {
    pub k: usize,
    pub z: usize,
    pub t_z: f64,
    pub cost: f64,
    pub s_norm: f64,
    pub beta: f64,
    pub alpha: f64,
    pub err_opt: f64,
}

/// Per-interval record: sampling state, aggregate fingerprint, the step used,
/// end-of-interval diagnostics, and the bound constants when evaluated.
#[derive(Debug, Clone)]
pub struct IntervalRow {
    pub z: usize,
    pub t_z: f64,
    pub theta: Vec<f64>,
    pub qhat_fingerprint: u64,
    pub gamma: f64,
    pub cost_end: f64,
    pub alpha_end: f64,
    pub err_end: f64,
    pub bound: Option<ConstantsBlock>,
    pub objective_constants: Option<ObjectiveConstants>,
}

/// Full run output: per-iteration rows (k = 0..=eta_T), per-interval rows,
/// and the state history.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rows: Vec<IterRow>,
    pub intervals: Vec<IntervalRow>,
    /// x(k) for k = 0..=eta_T.
    pub states: Vec<Vec<f64>>,
    pub eta: Vec<usize>,
    pub b: usize,
    /// Local views per iteration per agent (only when requested).
    pub views: Option<Vec<Vec<Vec<f64>>>>,
}

impl RunTrace {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// beta(k) recomputed from the s-norm column.
    pub fn beta_of(&self, k: usize) -> f64 {
        let lo = k.saturating_sub(self.b);
        self.rows[lo..k].iter().map(|r| r.s_norm * r.s_norm).sum()
    }
}

fn fnv1a_fingerprint(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

struct IntervalOracle {
    stationary: StationarySet,
    /// Minimizer of the true sampled problem f(.; t_z).
    opt_point: Vec<f64>,
}

fn build_interval_oracle(
    qp: &TimeVaryingQp,
    agg: &AggregateObjective,
    settings: &OracleSettings,
) -> Result<IntervalOracle> {
    // synchronous-style aggregates are symmetric strongly convex; skip the
    // multistart in that case
    let stationary = if agg.q_hat.asymmetry() <= 1e-12 {
        let (point, cost) = solve_strongly_convex(&agg.q_hat, &agg.r_hat, &qp.box_set, settings.tol)
            .map(|(p, c)| (p, c + agg.value_offset))?;
        StationarySet {
            points: vec![point],
            costs: vec![cost],
            t_z: agg.t_z,
            residual_tol: settings.tol,
            dedup_radius: settings.dedup_radius,
        }
    } else {
        let set = find_stationary_set(agg, &qp.box_set, settings);
        if set.is_empty() {
            return Err(TvqpError::Oracle(format!(
                "no stationary points found at t_z = {}",
                agg.t_z
            )));
        }
        set
    };
    let q_true = qp.q_at(agg.t_z);
    let r_true = qp.r_at(agg.t_z);
    let (opt_point, _) = solve_strongly_convex(&q_true, &r_true, &qp.box_set, settings.tol)?;
    Ok(IntervalOracle {
        stationary,
        opt_point,
    })
}

/// Execute the full run over every sample event in the plan.
pub fn run(
    qp: &TimeVaryingQp,
    plan: &SamplingPlan,
    schedule: &AsyncSchedule,
    cfg: &EngineConfig,
    x0: &[f64],
) -> Result<RunTrace> {
    let num_agents = qp.num_agents();
    if schedule.num_agents != num_agents {
        return Err(TvqpError::Config(
            "schedule and partition disagree on the number of agents".into(),
        ));
    }
    if plan.num_agents() != num_agents {
        return Err(TvqpError::Config(
            "sampling plan and partition disagree on the number of agents".into(),
        ));
    }
    if schedule.kappa.len() != plan.num_events() {
        return Err(TvqpError::Config(format!(
            "schedule has {} intervals, plan has {} sample events",
            schedule.kappa.len(),
            plan.num_events()
        )));
    }
    if x0.len() != qp.n() || !qp.box_set.contains(x0, 1e-12) {
        return Err(TvqpError::Config("x0 must lie in the box".into()));
    }
    if let GammaPolicy::Fixed(g) = cfg.gamma {
        if g <= 0.0 {
            return Err(TvqpError::Config("gamma must be positive".into()));
        }
    }

    let total = schedule.total_iterations();
    let mut state = NetworkState::new(x0, num_agents, schedule.b);
    let mut rows: Vec<IterRow> = Vec::with_capacity(total + 1);
    let mut intervals: Vec<IntervalRow> = Vec::with_capacity(plan.num_events());
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(total + 1);
    let mut views: Option<Vec<Vec<Vec<f64>>>> = cfg.record_views.then(Vec::new);
    let mut s_norms: Vec<f64> = Vec::with_capacity(total);

    let eval_bounds = cfg.eval_bounds || matches!(cfg.gamma, GammaPolicy::Auto { .. });
    let mut alpha_carry: Option<f64> = None;

    let mut k = 0usize;
    for z in 0..plan.num_events() {
        let sample_state = plan.sample_state(z);
        let agg = build_aggregate(qp, &sample_state)?;
        let t_z = sample_state.t_z;

        let oc = eval_bounds.then(|| crate::bounds::objective_constants(&agg, qp, plan.delta));
        let kappa_z = schedule.kappa[z];
        let r_z = kappa_z / schedule.b;
        let bi = oc.as_ref().map(|oc| BoundInputs {
            num_agents,
            delay_bound: schedule.b,
            dim: qp.n(),
            lambda_z: cfg.lambda_z,
            sigma_z: oc.d_x,
            epsilon_z: None,
            kappa_z,
            r_z,
            phi: qp.xi,
            psi: oc.l_z.max(qp.xi * (1.0 + 1e-9)),
            u_bar: oc.m_z,
            nu_x: BoundInputs::box_corner_fraction(qp.n()),
            alpha_carry,
        });

        let gamma_z = match cfg.gamma {
            GammaPolicy::Fixed(g) => g,
            GammaPolicy::Auto { safety } => {
                let oc = oc.as_ref().unwrap();
                let bi = bi.as_ref().unwrap();
                let gm = gamma_max(oc, bi)?;
                safety * gm
            }
        };

        let bound = match (&oc, &bi) {
            (Some(oc), Some(bi)) => {
                let blk = constants_block(oc, bi, gamma_z)?;
                alpha_carry = Some(blk.a_z * blk.rho_z.powi(r_z as i32 - 1));
                Some(blk)
            }
            _ => None,
        };

        let oracle = match &cfg.oracle {
            Some(settings) => Some(build_interval_oracle(qp, &agg, settings)?),
            None => None,
        };

        let interval_end = schedule.eta[z];
        while k < interval_end {
            let beta = {
                let lo = k.saturating_sub(schedule.b);
                s_norms[lo..k].iter().map(|s| s * s).sum::<f64>()
            };
            let cost = agg.eval_cost(&state.true_state);
            let (alpha, err_opt) = match &oracle {
                Some(orc) => {
                    let (_, near_cost) = nearest_stationary(&orc.stationary, &state.true_state)?;
                    (
                        cost - near_cost,
                        dist(&state.true_state, &orc.opt_point),
                    )
                }
                None => (f64::NAN, f64::NAN),
            };
            states.push(state.true_state.clone());
            if let Some(v) = views.as_mut() {
                v.push(state.agents.iter().map(|a| a.local_view.clone()).collect());
            }
            let s = step(&mut state, k, &agg, schedule, qp, gamma_z, cfg.mode);
            let s_norm = norm(&s);
            s_norms.push(s_norm);
            rows.push(IterRow {
                k,
                z,
                t_z,
                cost,
                s_norm,
                beta,
                alpha,
                err_opt,
            });
            k += 1;
        }

        // end-of-interval diagnostics at x(eta_z) under this interval's objective
        let cost_end = agg.eval_cost(&state.true_state);
        let (alpha_end, err_end) = match &oracle {
            Some(orc) => {
                let (_, near_cost) = nearest_stationary(&orc.stationary, &state.true_state)?;
                (
                    cost_end - near_cost,
                    dist(&state.true_state, &orc.opt_point),
                )
            }
            None => (f64::NAN, f64::NAN),
        };
        intervals.push(IntervalRow {
            z,
            t_z,
            theta: sample_state.theta.clone(),
            qhat_fingerprint: fnv1a_fingerprint(agg.q_hat.data()),
            gamma: gamma_z,
            cost_end,
            alpha_end,
            err_end,
            bound,
            objective_constants: oc,
        });
    }

    // final boundary row under the last interval's objective
    let last = intervals.last().expect("at least one sample event");
    let z = last.z;
    let final_sample = plan.sample_state(z);
    let agg = build_aggregate(qp, &final_sample)?;
    let beta = {
        let lo = k.saturating_sub(schedule.b);
        s_norms[lo..k].iter().map(|s| s * s).sum::<f64>()
    };
    rows.push(IterRow {
        k,
        z,
        t_z: last.t_z,
        cost: agg.eval_cost(&state.true_state),
        s_norm: 0.0,
        beta,
        alpha: last.alpha_end,
        err_opt: last.err_end,
    });
    states.push(state.true_state.clone());
    if let Some(v) = views.as_mut() {
        v.push(state.agents.iter().map(|a| a.local_view.clone()).collect());
    }

    Ok(RunTrace {
        rows,
        intervals,
        states,
        eta: schedule.eta.clone(),
        b: schedule.b,
        views,
    })
}

/// First iteration index `k >= eta_{z-1} + B` whose update magnitude falls
/// below `threshold`; returns the interval's iteration count `kappa_z` as a
/// sentinel when the interval exhausts without settling.
pub fn estimate_khat(trace: &RunTrace, z: usize, threshold: f64) -> usize {
    let eta_prev = if z == 0 { 0 } else { trace.eta[z - 1] };
    let eta_z = trace.eta[z];
    let kappa_z = eta_z - eta_prev;
    for k in (eta_prev + trace.b)..eta_z {
        if trace.rows[k].s_norm < threshold {
            return k;
        }
    }
    kappa_z
}
