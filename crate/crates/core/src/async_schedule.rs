//! Asynchronous event structure: per-agent sampling sets, per-iteration
//! computation sets, and bounded-delay delivery sets.
//!
//! Generation is seeded and fully deterministic. Random events are thinned
//! by the configured probabilities and then forced when needed so that every
//! generated schedule satisfies the partial-asynchrony bound `B`: every
//! agent computes at least once per window of length `B`, and the copy of
//! any block held by any agent is never older than `B - 1` iterations.

use crate::error::{Result, TvqpError};
use crate::linalg::Mat;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Per-agent sampling times and the realized sampling-lag bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub t_s: f64,
    pub horizon: f64,
    /// Sorted per-agent sample times, each a multiple of `t_s`, all
    /// containing t = 0.
    pub per_agent_sets: Vec<Vec<f64>>,
    /// Sorted union of all agents' sample times.
    pub union_times: Vec<f64>,
    /// Realized max over agents and consecutive events of
    /// `|theta_i(t_{z+1}) - theta_i(t_z)|`.
    pub delta: f64,
}

impl SamplingPlan {
    pub fn num_agents(&self) -> usize {
        self.per_agent_sets.len()
    }

    /// Number of sample events (intervals) in the plan.
    pub fn num_events(&self) -> usize {
        self.union_times.len()
    }

    /// Freshest sample time of agent `i` not after `t`.
    pub fn theta(&self, i: usize, t: f64) -> f64 {
        let set = &self.per_agent_sets[i];
        let mut best = set[0];
        for &s in set {
            if s <= t + 1e-12 {
                best = s;
            } else {
                break;
            }
        }
        best
    }

    /// Sample state at event index z.
    pub fn sample_state(&self, z: usize) -> crate::qp_model::SampleState {
        let t_z = self.union_times[z];
        let theta = (0..self.num_agents()).map(|i| self.theta(i, t_z)).collect();
        crate::qp_model::SampleState { theta, t_z }
    }

    fn compute_delta(per_agent_sets: &[Vec<f64>], union_times: &[f64]) -> f64 {
        let mut delta: f64 = 0.0;
        for i in 0..per_agent_sets.len() {
            let theta_at = |t: f64| {
                let set = &per_agent_sets[i];
                let mut best = set[0];
                for &s in set {
                    if s <= t + 1e-12 {
                        best = s;
                    } else {
                        break;
                    }
                }
                best
            };
            for w in union_times.windows(2) {
                delta = delta.max((theta_at(w[1]) - theta_at(w[0])).abs());
            }
        }
        delta
    }
}

/// Each agent independently keeps each grid time with probability
/// `p_sample[i]` (t = 0 always kept). Deterministic given the seed.
pub fn generate_sampling(
    seed: u64,
    t_s: f64,
    horizon: f64,
    p_sample: &[f64],
) -> Result<SamplingPlan> {
    if t_s <= 0.0 {
        return Err(TvqpError::Config("t_s must be positive".into()));
    }
    if horizon < t_s {
        return Err(TvqpError::Config(
            "horizon shorter than one sampling period".into(),
        ));
    }
    if p_sample.is_empty() || p_sample.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(TvqpError::Config(
            "sampling probabilities must lie in (0, 1]".into(),
        ));
    }
    let num_agents = p_sample.len();
    let grid_len = (horizon / t_s).floor() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut per_agent_sets = vec![Vec::new(); num_agents];
    for (i, set) in per_agent_sets.iter_mut().enumerate() {
        set.push(0.0);
        for l in 1..grid_len {
            if rng.random::<f64>() < p_sample[i] {
                set.push(l as f64 * t_s);
            }
        }
    }

    let mut union_times: Vec<f64> = Vec::new();
    for l in 0..grid_len {
        let t = l as f64 * t_s;
        if per_agent_sets
            .iter()
            .any(|s| s.iter().any(|&v| (v - t).abs() < 1e-12))
        {
            union_times.push(t);
        }
    }
    let delta = SamplingPlan::compute_delta(&per_agent_sets, &union_times);
    Ok(SamplingPlan {
        t_s,
        horizon,
        per_agent_sets,
        union_times,
        delta,
    })
}

/// One delivered message: receiver copies sender's block as it was at
/// iteration `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub to: usize,
    pub from: usize,
    pub tau: usize,
}

/// Which ordered pairs exchange blocks; `None` means all-to-all.
#[derive(Debug, Clone, PartialEq)]
pub struct CommMask {
    active: Vec<Vec<bool>>,
}

impl CommMask {
    pub fn all_to_all(num_agents: usize) -> Self {
        CommMask {
            active: vec![vec![true; num_agents]; num_agents],
        }
    }

    /// Pairs communicate only when either agent's rows of `q0` touch the
    /// other's columns.
    pub fn from_block_pattern(q0: &Mat, partition: &crate::qp_model::BlockPartition) -> Self {
        let num_agents = partition.num_agents();
        let mut active = vec![vec![false; num_agents]; num_agents];
        for i in 0..num_agents {
            for j in 0..num_agents {
                if i == j {
                    continue;
                }
                let mut coupled = false;
                'outer: for r in partition.range(i) {
                    for c in partition.range(j) {
                        if q0[(r, c)] != 0.0 || q0[(c, r)] != 0.0 {
                            coupled = true;
                            break 'outer;
                        }
                    }
                }
                active[i][j] = coupled;
            }
        }
        CommMask { active }
    }

    pub fn is_active(&self, to: usize, from: usize) -> bool {
        self.active[to][from]
    }
}

/// Full event schedule over the iteration axis.
#[derive(Debug, Clone)]
pub struct AsyncSchedule {
    pub b: usize,
    pub num_agents: usize,
    /// Iterations allotted to each sample interval.
    pub kappa: Vec<usize>,
    /// Prefix sums: `eta[z]` = total iterations through interval z.
    pub eta: Vec<usize>,
    /// For each iteration k, the agents computing at k.
    pub compute_events: Vec<Vec<usize>>,
    /// For each iteration k, deliveries applied at k (at most one per
    /// ordered pair).
    pub deliveries: Vec<Vec<Delivery>>,
    pub seed: u64,
    pub mask: CommMask,
}

impl AsyncSchedule {
    pub fn total_iterations(&self) -> usize {
        *self.eta.last().unwrap_or(&0)
    }

    pub fn computes_at(&self, k: usize, agent: usize) -> bool {
        self.compute_events[k].contains(&agent)
    }

    /// Interval index owning iteration k.
    pub fn interval_of(&self, k: usize) -> usize {
        match self.eta.binary_search(&(k + 1)) {
            Ok(z) => z,
            Err(z) => z,
        }
    }
}

/// Generate a schedule satisfying the delay bound `B`.
///
/// Computation and delivery events fire randomly with `p_update` / `p_comm`
/// and are forced when the bound would otherwise be violated: an agent idle
/// for `B - 1` steps computes at the B-th, and a pair whose delivered
/// information is about to turn `B` iterations old receives a fresh-enough
/// delivery. Delivery stamps are drawn uniformly from the admissible window.
pub fn generate_schedule(
    seed: u64,
    num_agents: usize,
    b: usize,
    kappa: &[usize],
    p_update: f64,
    p_comm: f64,
    mask: Option<CommMask>,
) -> Result<AsyncSchedule> {
    if b == 0 {
        return Err(TvqpError::Config("delay bound B must be >= 1".into()));
    }
    if kappa.is_empty() || kappa.iter().any(|&k| k == 0) {
        return Err(TvqpError::Config("kappa entries must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p_update) || !(0.0..=1.0).contains(&p_comm) {
        return Err(TvqpError::Config("probabilities must lie in [0, 1]".into()));
    }
    let mask = mask.unwrap_or_else(|| CommMask::all_to_all(num_agents));

    let mut eta = Vec::with_capacity(kappa.len());
    let mut acc = 0usize;
    for &kz in kappa {
        acc += kz;
        eta.push(acc);
    }
    let total = acc;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compute_events: Vec<Vec<usize>> = Vec::with_capacity(total);
    let mut deliveries: Vec<Vec<Delivery>> = Vec::with_capacity(total);

    // last_compute[i] = iteration of agent i's most recent compute (-1 none)
    let mut last_compute = vec![-1i64; num_agents];
    // onboard_stamp[i][j] = stamp of agent i's copy of block j (init 0)
    let mut onboard_stamp = vec![vec![0i64; num_agents]; num_agents];

    for k in 0..total {
        let ki = k as i64;
        let mut computes = Vec::new();
        for (i, last) in last_compute.iter_mut().enumerate() {
            let random_fire = rng.random::<f64>() < p_update;
            let forced = ki - *last >= b as i64;
            if random_fire || forced {
                computes.push(i);
                *last = ki;
            }
        }
        let mut delivered = Vec::new();
        for i in 0..num_agents {
            for j in 0..num_agents {
                if i == j || !mask.is_active(i, j) {
                    continue;
                }
                let random_fire = rng.random::<f64>() < p_comm;
                let stamp = &mut onboard_stamp[i][j];
                let forced = ki - *stamp >= b as i64;
                if random_fire || forced {
                    let lo = 0i64.max(ki - b as i64 + 1).max(*stamp);
                    let tau = if lo >= ki {
                        ki
                    } else {
                        rng.random_range(lo..=ki)
                    };
                    delivered.push(Delivery {
                        to: i,
                        from: j,
                        tau: tau as usize,
                    });
                    *stamp = tau;
                }
            }
        }
        compute_events.push(computes);
        deliveries.push(delivered);
    }

    Ok(AsyncSchedule {
        b,
        num_agents,
        kappa: kappa.to_vec(),
        eta,
        compute_events,
        deliveries,
        seed,
        mask,
    })
}

/// Which partial-asynchrony condition a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// No computation by the agent inside the window starting at k.
    ComputeWindow,
    /// A delivered stamp outside `[max(0, k-B+1), k]`.
    DeliveryStamp,
    /// An onboard copy older than `B - 1` iterations at k.
    CopyAge,
}

/// One violation, naming the condition, the agent(s), and the iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub agent: usize,
    pub counterpart: Option<usize>,
    pub k: usize,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            ViolationKind::ComputeWindow => write!(
                f,
                "agent {} has no compute in window starting at k={}",
                self.agent, self.k
            ),
            ViolationKind::DeliveryStamp => write!(
                f,
                "delivery {}<-{} at k={} carries an out-of-window stamp",
                self.agent,
                self.counterpart.unwrap_or(usize::MAX),
                self.k
            ),
            ViolationKind::CopyAge => write!(
                f,
                "agent {}'s copy of block {} exceeds age B-1 at k={}",
                self.agent,
                self.counterpart.unwrap_or(usize::MAX),
                self.k
            ),
        }
    }
}

/// Check both partial-asynchrony conditions for every agent, pair, and
/// iteration. Runs of consecutive violating windows are reported once, at
/// the first iteration of the run.
pub fn validate_schedule(s: &AsyncSchedule) -> Vec<Violation> {
    let total = s.total_iterations();
    let b = s.b;
    let mut out = Vec::new();

    // condition 1: compute windows
    for agent in 0..s.num_agents {
        let mut computes = vec![false; total];
        for (k, evs) in s.compute_events.iter().enumerate() {
            if evs.contains(&agent) {
                computes[k] = true;
            }
        }
        let mut in_run = false;
        if total >= b {
            for k in 0..=(total - b) {
                let ok = computes[k..k + b].iter().any(|&c| c);
                if !ok && !in_run {
                    out.push(Violation {
                        kind: ViolationKind::ComputeWindow,
                        agent,
                        counterpart: None,
                        k,
                    });
                }
                in_run = !ok;
            }
        }
    }

    // condition 2a: every delivered stamp inside the admissible window
    for (k, dels) in s.deliveries.iter().enumerate() {
        for d in dels {
            let lo = k.saturating_sub(b - 1);
            if d.tau < lo || d.tau > k {
                out.push(Violation {
                    kind: ViolationKind::DeliveryStamp,
                    agent: d.to,
                    counterpart: Some(d.from),
                    k,
                });
            }
        }
    }

    // condition 2b: replay onboard stamps; age must stay <= B-1 at every k
    let mut stamp = vec![vec![0i64; s.num_agents]; s.num_agents];
    let mut in_run = vec![vec![false; s.num_agents]; s.num_agents];
    for k in 0..total {
        for d in &s.deliveries[k] {
            stamp[d.to][d.from] = d.tau as i64;
        }
        for i in 0..s.num_agents {
            for j in 0..s.num_agents {
                if i == j || !s.mask.is_active(i, j) {
                    continue;
                }
                let age = k as i64 - stamp[i][j];
                let bad = age > (b as i64 - 1);
                if bad && !in_run[i][j] {
                    out.push(Violation {
                        kind: ViolationKind::CopyAge,
                        agent: i,
                        counterpart: Some(j),
                        k,
                    });
                }
                in_run[i][j] = bad;
            }
        }
    }
    out
}
