//! Reference algorithms: an independent dense synchronous block coordinate
//! descent (the fully synchronous regime) and a decentralized
//! consensus-gradient method for comparison runs.

use crate::async_schedule::SamplingPlan;
use crate::bcd_engine::{IntervalRow, IterRow, RunTrace};
use crate::error::{Result, TvqpError};
use crate::linalg::{dist, dot, jacobi_eigenvalues, Mat};
use crate::oracle::{solve_strongly_convex, OracleSettings};
use crate::qp_model::TimeVaryingQp;

/// Dense synchronous projected gradient on the sampled objective: every
/// agent samples, computes, and communicates at every tick (B = 1).
///
/// Kept independent of the async engine so the two can cross-validate
/// each other.
pub fn run_sync_bcd(
    qp: &TimeVaryingQp,
    t_s: f64,
    horizon: f64,
    kappa: usize,
    gamma: f64,
    x0: &[f64],
    oracle: Option<&OracleSettings>,
) -> Result<RunTrace> {
    if gamma <= 0.0 {
        return Err(TvqpError::Config("gamma must be positive".into()));
    }
    if t_s <= 0.0 || horizon < 0.0 {
        return Err(TvqpError::Config("bad time grid".into()));
    }
    if x0.len() != qp.n() || !qp.box_set.contains(x0, 1e-12) {
        return Err(TvqpError::Config("x0 must lie in the box".into()));
    }
    let events = (horizon / t_s).floor() as usize + 1;
    let mut x = x0.to_vec();
    let mut rows: Vec<IterRow> = Vec::new();
    let mut intervals: Vec<IntervalRow> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    let mut s_norms: Vec<f64> = Vec::new();
    let mut eta = Vec::new();
    let mut k = 0usize;

    for z in 0..events {
        let t_z = z as f64 * t_s;
        let q = qp.q_at(t_z);
        let r = qp.r_at(t_z);
        let opt = match oracle {
            Some(settings) => Some(solve_strongly_convex(&q, &r, &qp.box_set, settings.tol)?),
            None => None,
        };
        let cost_of = |x: &[f64]| 0.5 * dot(x, &q.matvec(x)) + dot(&r, x) + qp.value_offset;

        for _ in 0..kappa {
            let cost = cost_of(&x);
            let beta: f64 = s_norms[k.saturating_sub(1)..k].iter().map(|s| s * s).sum();
            let (alpha, err) = match &opt {
                Some((p, f_star)) => (cost - (f_star + qp.value_offset), dist(&x, p)),
                None => (f64::NAN, f64::NAN),
            };
            states.push(x.clone());
            let grad: Vec<f64> = q.matvec(&x).iter().zip(&r).map(|(a, b)| a + b).collect();
            let stepped: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - gamma * g).collect();
            let next = qp.box_set.project(&stepped);
            let s_norm = dist(&next, &x);
            s_norms.push(s_norm);
            rows.push(IterRow {
                k,
                z,
                t_z,
                cost,
                s_norm,
                beta,
                alpha,
                err_opt: err,
            });
            x = next;
            k += 1;
        }
        eta.push(k);

        let cost_end = cost_of(&x);
        let (alpha_end, err_end) = match &opt {
            Some((p, f_star)) => (cost_end - (f_star + qp.value_offset), dist(&x, p)),
            None => (f64::NAN, f64::NAN),
        };
        intervals.push(IntervalRow {
            z,
            t_z,
            theta: vec![t_z; qp.num_agents()],
            qhat_fingerprint: 0,
            gamma,
            cost_end,
            alpha_end,
            err_end,
            bound: None,
            objective_constants: None,
        });
    }

    // boundary row under the final objective
    let last = intervals.last().unwrap();
    let beta: f64 = s_norms[k.saturating_sub(1)..k].iter().map(|s| s * s).sum();
    rows.push(IterRow {
        k,
        z: last.z,
        t_z: last.t_z,
        cost: last.cost_end,
        s_norm: 0.0,
        beta,
        alpha: last.alpha_end,
        err_opt: last.err_end,
    });
    states.push(x);

    Ok(RunTrace {
        rows,
        intervals,
        states,
        eta,
        b: 1,
        views: None,
    })
}

/// Mixing weights and step size for the consensus-gradient baseline.
///
/// The local split assigns each agent `f_i = (1/N) f(.; theta_i(t_z))`: the
/// full sampled objective at the agent's own sample time, scaled so the sum
/// matches the average of sampled objectives.
#[derive(Debug, Clone)]
pub struct ConsensusConfig {
    pub weights: Mat,
    pub gamma: f64,
}

impl ConsensusConfig {
    /// Complete graph with uniform Metropolis weights (all entries 1/N).
    pub fn complete(num_agents: usize, gamma: f64) -> Self {
        let w = 1.0 / num_agents as f64;
        let mut m = Mat::zeros(num_agents, num_agents);
        for i in 0..num_agents {
            for j in 0..num_agents {
                m[(i, j)] = w;
            }
        }
        ConsensusConfig { weights: m, gamma }
    }

    /// Ring topology with 1/3 self and neighbor weights.
    pub fn ring(num_agents: usize, gamma: f64) -> Self {
        let n = num_agents;
        let mut m = Mat::zeros(n, n);
        if n == 1 {
            m[(0, 0)] = 1.0;
        } else if n == 2 {
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] = 0.5;
                }
            }
        } else {
            for i in 0..n {
                m[(i, i)] = 1.0 / 3.0;
                m[(i, (i + 1) % n)] = 1.0 / 3.0;
                m[(i, (i + n - 1) % n)] = 1.0 / 3.0;
            }
        }
        ConsensusConfig { weights: m, gamma }
    }

    /// Doubly stochastic, nonnegative, and mixing (positive spectral gap).
    pub fn validate(&self) -> Result<()> {
        let m = &self.weights;
        if !m.is_square() {
            return Err(TvqpError::Config("weight matrix must be square".into()));
        }
        let n = m.n_rows();
        for i in 0..n {
            let row_sum: f64 = (0..n).map(|j| m[(i, j)]).sum();
            let col_sum: f64 = (0..n).map(|j| m[(j, i)]).sum();
            if (row_sum - 1.0).abs() > 1e-12 || (col_sum - 1.0).abs() > 1e-12 {
                return Err(TvqpError::Config(format!(
                    "weights not doubly stochastic at index {i}"
                )));
            }
            for j in 0..n {
                if m[(i, j)] < 0.0 {
                    return Err(TvqpError::Config("negative mixing weight".into()));
                }
            }
        }
        if n > 1 {
            let eigs = jacobi_eigenvalues(m).0;
            // second-largest magnitude must stay below 1
            let gap_ok = eigs[1].abs() < 1.0 - 1e-12 && eigs[eigs.len() - 1].abs() < 1.0 - 1e-12;
            if !gap_ok {
                return Err(TvqpError::Config("weight matrix has no spectral gap".into()));
            }
        }
        if self.gamma <= 0.0 {
            return Err(TvqpError::Config("consensus gamma must be positive".into()));
        }
        Ok(())
    }
}

/// Decentralized consensus gradient descent on the shared sampled-objective
/// realization; every agent keeps a full-dimension copy and the reported
/// state is the average of copies.
pub fn run_consensus(
    qp: &TimeVaryingQp,
    plan: &SamplingPlan,
    cfg: &ConsensusConfig,
    kappa: &[usize],
    x0: &[f64],
    oracle: Option<&OracleSettings>,
) -> Result<RunTrace> {
    cfg.validate()?;
    let num_agents = qp.num_agents();
    if cfg.weights.n_rows() != num_agents {
        return Err(TvqpError::Config(
            "weight matrix size does not match the number of agents".into(),
        ));
    }
    if kappa.len() != plan.num_events() {
        return Err(TvqpError::Config(
            "kappa must cover every sample event".into(),
        ));
    }
    if x0.len() != qp.n() || !qp.box_set.contains(x0, 1e-12) {
        return Err(TvqpError::Config("x0 must lie in the box".into()));
    }
    let n = qp.n();
    let nf = num_agents as f64;
    let gamma = cfg.gamma;

    let mut copies: Vec<Vec<f64>> = vec![x0.to_vec(); num_agents];
    let average = |copies: &[Vec<f64>]| -> Vec<f64> {
        let mut avg = vec![0.0; n];
        for c in copies {
            for (a, v) in avg.iter_mut().zip(c) {
                *a += v / nf;
            }
        }
        avg
    };

    let mut rows = Vec::new();
    let mut intervals = Vec::new();
    let mut states = Vec::new();
    let mut s_norms: Vec<f64> = Vec::new();
    let mut eta = Vec::new();
    let mut k = 0usize;

    for z in 0..plan.num_events() {
        let sample_state = plan.sample_state(z);
        let t_z = sample_state.t_z;
        // per-agent sampled data and their average
        let mut q_i: Vec<Mat> = Vec::with_capacity(num_agents);
        let mut r_i: Vec<Vec<f64>> = Vec::with_capacity(num_agents);
        let mut q_avg = Mat::zeros(n, n);
        let mut r_avg = vec![0.0; n];
        for i in 0..num_agents {
            let q = qp.q_at(sample_state.theta[i]);
            let r = qp.r_at(sample_state.theta[i]);
            q_avg = q_avg.add(&q.scale(1.0 / nf));
            for (acc, v) in r_avg.iter_mut().zip(&r) {
                *acc += v / nf;
            }
            q_i.push(q);
            r_i.push(r);
        }
        let opt_avg = match oracle {
            Some(settings) => {
                Some(solve_strongly_convex(&q_avg, &r_avg, &qp.box_set, settings.tol)?)
            }
            None => None,
        };
        let opt_true = match oracle {
            Some(settings) => {
                let q = qp.q_at(t_z);
                let r = qp.r_at(t_z);
                Some(solve_strongly_convex(&q, &r, &qp.box_set, settings.tol)?.0)
            }
            None => None,
        };
        let cost_of = |x: &[f64]| 0.5 * dot(x, &q_avg.matvec(x)) + dot(&r_avg, x) + qp.value_offset;

        for _ in 0..kappa[z] {
            let avg = average(&copies);
            let cost = cost_of(&avg);
            let beta: f64 = s_norms[k.saturating_sub(1)..k].iter().map(|s| s * s).sum();
            let alpha = match &opt_avg {
                Some((_, f_star)) => cost - (f_star + qp.value_offset),
                None => f64::NAN,
            };
            let err = match &opt_true {
                Some(p) => dist(&avg, p),
                None => f64::NAN,
            };
            states.push(avg.clone());

            // mix, descend on the local split, project
            let mut next: Vec<Vec<f64>> = Vec::with_capacity(num_agents);
            for i in 0..num_agents {
                let mut mixed = vec![0.0; n];
                for j in 0..num_agents {
                    let w = cfg.weights[(i, j)];
                    if w == 0.0 {
                        continue;
                    }
                    for (m, v) in mixed.iter_mut().zip(&copies[j]) {
                        *m += w * v;
                    }
                }
                let grad: Vec<f64> = q_i[i]
                    .matvec(&copies[i])
                    .iter()
                    .zip(&r_i[i])
                    .map(|(a, b)| (a + b) / nf)
                    .collect();
                let stepped: Vec<f64> = mixed
                    .iter()
                    .zip(&grad)
                    .map(|(m, g)| m - gamma * g)
                    .collect();
                next.push(qp.box_set.project(&stepped));
            }
            copies = next;
            let new_avg = average(&copies);
            let s_norm = dist(&new_avg, &avg);
            s_norms.push(s_norm);
            rows.push(IterRow {
                k,
                z,
                t_z,
                cost,
                s_norm,
                beta,
                alpha,
                err_opt: err,
            });
            k += 1;
        }
        eta.push(k);

        let avg = average(&copies);
        let cost_end = cost_of(&avg);
        let alpha_end = match &opt_avg {
            Some((_, f_star)) => cost_end - (f_star + qp.value_offset),
            None => f64::NAN,
        };
        let err_end = match &opt_true {
            Some(p) => dist(&avg, p),
            None => f64::NAN,
        };
        intervals.push(IntervalRow {
            z,
            t_z,
            theta: sample_state.theta.clone(),
            qhat_fingerprint: 0,
            gamma,
            cost_end,
            alpha_end,
            err_end,
            bound: None,
            objective_constants: None,
        });
    }

    let last = intervals.last().unwrap();
    let beta: f64 = s_norms[k.saturating_sub(1)..k].iter().map(|s| s * s).sum();
    rows.push(IterRow {
        k,
        z: last.z,
        t_z: last.t_z,
        cost: last.cost_end,
        s_norm: 0.0,
        beta,
        alpha: last.alpha_end,
        err_opt: last.err_end,
    });
    states.push(average(&copies));

    Ok(RunTrace {
        rows,
        intervals,
        states,
        eta,
        b: 1,
        views: None,
    })
}

/// Max disagreement `||y_i - y_bar||` over agents for one copies snapshot
/// (exposed for tests and diagnostics).
pub fn disagreement(copies: &[Vec<f64>]) -> f64 {
    let n = copies[0].len();
    let nf = copies.len() as f64;
    let mut avg = vec![0.0; n];
    for c in copies {
        for (a, v) in avg.iter_mut().zip(c) {
            *a += v / nf;
        }
    }
    copies
        .iter()
        .map(|c| dist(c, &avg))
        .fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::async_schedule::{generate_sampling, generate_schedule};
    use crate::bcd_engine::{run, EngineConfig, GammaPolicy};
    use crate::linalg::norm;
    use crate::qp_model::{BlockPartition, BoxConstraint, QpFamily};

    fn modulated_qp(agents: usize, block: usize) -> TimeVaryingQp {
        let n = agents * block;
        let mut q0 = Mat::identity(n).scale(3.0);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let v = 0.3 / (1.0 + (i as f64 - j as f64).abs());
                    q0[(i, j)] = v;
                }
            }
        }
        let q0 = q0.symmetric_part();
        TimeVaryingQp::new(
            BlockPartition::uniform(agents, block).unwrap(),
            BoxConstraint::symmetric(n, 10.0).unwrap(),
            QpFamily::Modulated {
                q0,
                cos_amp: Mat::identity(n),
                sin_amp: Mat::zeros(n, n),
                omega: 0.1,
                r0: vec![2.0; n],
                r_freq: 2.0,
            },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn sync_bcd_matches_async_engine() {
        let qp = modulated_qp(3, 2);
        let plan = generate_sampling(1, 1.0, 4.0, &[1.0, 1.0, 1.0]).unwrap();
        let kappa = vec![60; plan.num_events()];
        let schedule = generate_schedule(2, 3, 1, &kappa, 1.0, 1.0, None).unwrap();
        let x0 = vec![0.5; 6];
        let cfg = EngineConfig {
            gamma: GammaPolicy::Fixed(0.05),
            ..Default::default()
        };
        let async_trace = run(&qp, &plan, &schedule, &cfg, &x0).unwrap();
        let sync_trace = run_sync_bcd(&qp, 1.0, 4.0, 60, 0.05, &x0, None).unwrap();
        assert_eq!(async_trace.states.len(), sync_trace.states.len());
        for (a, b) in async_trace.states.iter().zip(&sync_trace.states) {
            assert!(dist(a, b) <= 1e-12);
        }
    }

    #[test]
    fn sync_bcd_geometric_decay() {
        // static strongly convex: fitted per-iteration contraction < 1
        let qp = modulated_qp(2, 1);
        let trace = run_sync_bcd(
            &qp,
            1.0,
            0.0,
            400,
            0.05,
            &[5.0, -5.0],
            Some(&OracleSettings::default()),
        )
        .unwrap();
        let alphas: Vec<f64> = trace.rows.iter().map(|r| r.alpha).collect();
        // contraction fit over the early segment where alpha is far from zero
        let mut worst_ratio: f64 = 0.0;
        for k in 1..60 {
            if alphas[k - 1] > 1e-14 {
                worst_ratio = worst_ratio.max(alphas[k] / alphas[k - 1]);
            }
        }
        assert!(worst_ratio < 1.0, "no contraction: {worst_ratio}");
        // single step per event collapses to one projected-gradient step
        let t1 = run_sync_bcd(&qp, 1.0, 1.0, 1, 0.05, &[5.0, -5.0], None).unwrap();
        assert_eq!(t1.rows.len(), 3);
    }

    #[test]
    fn consensus_single_agent_is_projected_gradient() {
        let qp = modulated_qp(1, 2);
        let plan = generate_sampling(5, 1.0, 3.0, &[1.0]).unwrap();
        let kappa = vec![40; plan.num_events()];
        let cfg = ConsensusConfig::complete(1, 0.05);
        let x0 = vec![3.0, -3.0];
        let cons = run_consensus(&qp, &plan, &cfg, &kappa, &x0, None).unwrap();
        let sync = run_sync_bcd(&qp, 1.0, 3.0, 40, 0.05, &x0, None).unwrap();
        for (a, b) in cons.states.iter().zip(&sync.states) {
            assert!(dist(a, b) <= 1e-12);
        }
    }

    #[test]
    fn consensus_copies_agree_under_identical_samples() {
        let qp = modulated_qp(2, 1);
        let plan = generate_sampling(7, 1.0, 2.0, &[1.0, 1.0]).unwrap();
        let kappa = vec![10; plan.num_events()];
        let cfg = ConsensusConfig::complete(2, 0.05);
        // equal initialization + identical sampled objectives keep copies equal,
        // so disagreement stays zero and the average stays feasible
        let trace = run_consensus(&qp, &plan, &cfg, &kappa, &[1.0, 1.0], None).unwrap();
        for s in &trace.states {
            assert!(qp.box_set.contains(s, 1e-9));
        }
        // the run is deterministic
        let again = run_consensus(&qp, &plan, &cfg, &kappa, &[1.0, 1.0], None).unwrap();
        assert_eq!(trace.states, again.states);
    }

    #[test]
    fn consensus_weight_validation() {
        assert!(ConsensusConfig::complete(4, 0.1).validate().is_ok());
        assert!(ConsensusConfig::ring(5, 0.1).validate().is_ok());
        let mut bad = ConsensusConfig::complete(3, 0.1);
        bad.weights[(0, 0)] = 0.9;
        assert!(bad.validate().is_err());
        let neg = ConsensusConfig {
            weights: Mat::from_rows(&[&[1.5, -0.5], &[-0.5, 1.5]]),
            gamma: 0.1,
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn comparison_shares_the_sampled_objective_realization() {
        // the async engine and the consensus baseline see identical theta
        // vectors at every event when handed the same plan
        let qp = modulated_qp(3, 2);
        let plan = generate_sampling(13, 1.0, 5.0, &[0.5, 0.5, 0.5]).unwrap();
        let kappa = vec![20; plan.num_events()];
        let schedule = generate_schedule(14, 3, 3, &kappa, 0.6, 0.6, None).unwrap();
        let cfg = EngineConfig {
            gamma: GammaPolicy::Fixed(0.01),
            ..Default::default()
        };
        let x0 = vec![1.0; 6];
        let a = run(&qp, &plan, &schedule, &cfg, &x0).unwrap();
        let c = run_consensus(
            &qp,
            &plan,
            &ConsensusConfig::complete(3, 0.01),
            &kappa,
            &x0,
            None,
        )
        .unwrap();
        assert_eq!(a.intervals.len(), c.intervals.len());
        for (ia, ic) in a.intervals.iter().zip(&c.intervals) {
            assert_eq!(ia.theta, ic.theta);
            assert_eq!(ia.t_z, ic.t_z);
        }
    }

    #[test]
    fn disagreement_bounded_on_async_samples() {
        let qp = modulated_qp(3, 2);
        let plan = generate_sampling(11, 1.0, 6.0, &[0.5, 0.5, 0.5]).unwrap();
        let kappa = vec![30; plan.num_events()];
        let cfg = ConsensusConfig::complete(3, 0.02);
        let trace = run_consensus(&qp, &plan, &cfg, &kappa, &vec![1.0; 6], None).unwrap();
        let d = qp.box_set.diameter();
        for s in &trace.states {
            assert!(qp.box_set.contains(s, 1e-9));
            assert!(norm(s) <= d);
        }
    }
}
