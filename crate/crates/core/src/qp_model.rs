//! Time-varying quadratic programs over box constraints, block partitions,
//! per-agent sampling state, and the row-block-stacked aggregate objective.
//!
//! The canonical cost convention throughout the crate is
//! `f(x;t) = 0.5 x^T Q(t) x + r(t)^T x + offset`, so the gradient is
//! `Q(t) x + r(t)` and agent i's update direction is exactly the i-th row
//! block of Q applied to its local view.

use crate::error::{Result, TvqpError};
use crate::linalg::{dot, norm, Mat};

/// Per-agent block sizes with derived offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    n: usize,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(TvqpError::Config("partition must be nonempty".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(TvqpError::Config("block sizes must be >= 1".into()));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(BlockPartition {
            sizes,
            offsets,
            n: acc,
        })
    }

    /// Uniform partition: `agents` blocks of `block_size` each.
    pub fn uniform(agents: usize, block_size: usize) -> Result<Self> {
        BlockPartition::new(vec![block_size; agents])
    }

    pub fn num_agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.sizes[i]
    }

    pub fn block<'a>(&self, i: usize, x: &'a [f64]) -> &'a [f64] {
        &x[self.range(i)]
    }
}

/// Axis-aligned box constraint set with nonempty interior.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxConstraint {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(TvqpError::Config("box bounds length mismatch".into()));
        }
        // rejects NaN bounds as well as inverted ones
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(TvqpError::Config(
                "box must satisfy lo[j] < hi[j] for all j".into(),
            ));
        }
        Ok(BoxConstraint { lo, hi })
    }

    /// Symmetric box `[-half, half]^n`.
    pub fn symmetric(n: usize, half: f64) -> Result<Self> {
        BoxConstraint::new(vec![-half; n], vec![half; n])
    }

    pub fn n(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Euclidean diameter ||hi - lo||.
    pub fn diameter(&self) -> f64 {
        norm(&self.hi.iter().zip(&self.lo).map(|(h, l)| h - l).collect::<Vec<_>>())
    }

    /// Inradius: half the smallest side length.
    pub fn inradius(&self) -> f64 {
        0.5 * self
            .hi
            .iter()
            .zip(&self.lo)
            .map(|(h, l)| h - l)
            .fold(f64::INFINITY, f64::min)
    }

    /// max_{x in box} ||x||, attained at the vertex maximizing each |coordinate|.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.hi
            .iter()
            .zip(&self.lo)
            .map(|(h, l)| h - l)
            .product()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
    }

    /// Componentwise clamp of the full vector.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| v.clamp(l, h))
            .collect()
    }

    /// Clamp in place.
    pub fn project_in_place(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }
}

/// Componentwise clamp of a block-i vector into the box restricted to block i.
pub fn project_box(bx: &BoxConstraint, partition: &BlockPartition, i: usize, v: &[f64]) -> Vec<f64> {
    let range = partition.range(i);
    assert_eq!(v.len(), range.len());
    v.iter()
        .zip(range)
        .map(|(&val, j)| val.clamp(bx.lo[j], bx.hi[j]))
        .collect()
}

/// Reference curve for the tracking family: `amp_x cos(w t), amp_y sin(freq_y w t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCurve {
    pub amp_x: f64,
    pub amp_y: f64,
    pub omega: f64,
    pub freq_y: f64,
}

impl ReferenceCurve {
    pub fn position(&self, t: f64) -> [f64; 2] {
        [
            self.amp_x * (self.omega * t).cos(),
            self.amp_y * (self.freq_y * self.omega * t).sin(),
        ]
    }

    /// Upper bound on ||d/dt position||.
    pub fn speed_bound(&self) -> f64 {
        let vx = self.amp_x.abs() * self.omega.abs();
        let vy = self.amp_y.abs() * self.freq_y.abs() * self.omega.abs();
        (vx * vx + vy * vy).sqrt()
    }
}

/// Closed-form parametric families; Lipschitz constants are analytic.
#[derive(Debug, Clone, PartialEq)]
pub enum QpFamily {
    /// Static problem: Q(t) = Q0, r(t) = r0.
    Constant { q0: Mat, r0: Vec<f64> },
    /// Sinusoidally modulated matrix and linear term:
    /// `Q(t) = Q0 + C cos(w t) + S sin(w t)`, `r(t) = r0 sin(r_freq w t)`.
    Modulated {
        q0: Mat,
        cos_amp: Mat,
        sin_amp: Mat,
        omega: f64,
        r0: Vec<f64>,
        r_freq: f64,
    },
    /// Each agent holds a 2-D position tracking a moving planar reference:
    /// `Q = q_scale I`, `r(t) = -q_scale (1_N (x) ref(t))`.
    Tracking {
        q_scale: f64,
        curve: ReferenceCurve,
    },
}

/// A time-varying QP instance: partition, box, family, strong-convexity
/// floor xi, and a nonnegative cost shift.
#[derive(Debug, Clone)]
pub struct TimeVaryingQp {
    pub partition: BlockPartition,
    pub box_set: BoxConstraint,
    pub family: QpFamily,
    pub xi: f64,
    pub value_offset: f64,
}

impl TimeVaryingQp {
    pub fn new(
        partition: BlockPartition,
        box_set: BoxConstraint,
        family: QpFamily,
        xi: f64,
    ) -> Result<Self> {
        if box_set.n() != partition.n() {
            return Err(TvqpError::Config(format!(
                "box dimension {} does not match partition total {}",
                box_set.n(),
                partition.n()
            )));
        }
        if xi <= 0.0 {
            return Err(TvqpError::Config("xi must be positive".into()));
        }
        let me = TimeVaryingQp {
            partition,
            box_set,
            family,
            xi,
            value_offset: 0.0,
        };
        me.check_family_dims()?;
        Ok(me)
    }

    fn check_family_dims(&self) -> Result<()> {
        let n = self.partition.n();
        let dims_ok = match &self.family {
            QpFamily::Constant { q0, r0 } => {
                q0.n_rows() == n && q0.n_cols() == n && r0.len() == n
            }
            QpFamily::Modulated {
                q0,
                cos_amp,
                sin_amp,
                r0,
                ..
            } => {
                q0.n_rows() == n
                    && q0.n_cols() == n
                    && cos_amp.n_rows() == n
                    && cos_amp.n_cols() == n
                    && sin_amp.n_rows() == n
                    && sin_amp.n_cols() == n
                    && r0.len() == n
            }
            QpFamily::Tracking { .. } => self
                .partition
                .sizes
                .iter()
                .all(|&s| s == 2),
        };
        if dims_ok {
            Ok(())
        } else {
            Err(TvqpError::Config("family dimensions inconsistent with partition".into()))
        }
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn num_agents(&self) -> usize {
        self.partition.num_agents()
    }

    /// Q(t) as a full matrix.
    pub fn q_at(&self, t: f64) -> Mat {
        match &self.family {
            QpFamily::Constant { q0, .. } => q0.clone(),
            QpFamily::Modulated {
                q0,
                cos_amp,
                sin_amp,
                omega,
                ..
            } => q0
                .add(&cos_amp.scale((omega * t).cos()))
                .add(&sin_amp.scale((omega * t).sin())),
            QpFamily::Tracking { q_scale, .. } => Mat::identity(self.n()).scale(*q_scale),
        }
    }

    /// r(t) as a full vector.
    pub fn r_at(&self, t: f64) -> Vec<f64> {
        match &self.family {
            QpFamily::Constant { r0, .. } => r0.clone(),
            QpFamily::Modulated {
                r0, omega, r_freq, ..
            } => {
                let s = (r_freq * omega * t).sin();
                r0.iter().map(|v| v * s).collect()
            }
            QpFamily::Tracking { q_scale, curve } => {
                let p = curve.position(t);
                let mut r = Vec::with_capacity(self.n());
                for _ in 0..self.num_agents() {
                    r.push(-q_scale * p[0]);
                    r.push(-q_scale * p[1]);
                }
                r
            }
        }
    }

    /// Row block i of Q evaluated at time t.
    pub fn q_block_rows_at(&self, i: usize, t: f64) -> Mat {
        let q = self.q_at(t);
        let range = self.partition.range(i);
        let rows: Vec<&[f64]> = range.map(|r| q.row(r)).collect();
        Mat::from_rows(&rows)
    }

    /// Block i of r evaluated at time t.
    pub fn r_block_at(&self, i: usize, t: f64) -> Vec<f64> {
        let r = self.r_at(t);
        self.partition.block(i, &r).to_vec()
    }

    /// Analytic Lipschitz constant of `t -> Q^[i](t)` in the spectral norm.
    pub fn lipschitz_q_block(&self, i: usize) -> f64 {
        match &self.family {
            QpFamily::Constant { .. } => 0.0,
            QpFamily::Modulated {
                cos_amp,
                sin_amp,
                omega,
                ..
            } => {
                let range = self.partition.range(i);
                let c_rows: Vec<&[f64]> = range.clone().map(|r| cos_amp.row(r)).collect();
                let s_rows: Vec<&[f64]> = range.map(|r| sin_amp.row(r)).collect();
                let c_norm = Mat::from_rows(&c_rows).operator_norm();
                let s_norm = Mat::from_rows(&s_rows).operator_norm();
                omega.abs() * (c_norm + s_norm)
            }
            QpFamily::Tracking { .. } => 0.0,
        }
    }

    /// Analytic Lipschitz constant of `t -> r^[i](t)`.
    pub fn lipschitz_r_block(&self, i: usize) -> f64 {
        match &self.family {
            QpFamily::Constant { .. } => 0.0,
            QpFamily::Modulated {
                r0, omega, r_freq, ..
            } => {
                let block = self.partition.block(i, r0);
                (r_freq * omega).abs() * norm(block)
            }
            QpFamily::Tracking { q_scale, curve } => q_scale.abs() * curve.speed_bound(),
        }
    }

    /// Jump constant from the analytic Lipschitz sums:
    /// `L_t = 0.5 max||x||^2 sum L_Q^[i] + max||x|| sum L_r^[i]`.
    pub fn continuous_jump_constant(&self) -> f64 {
        let max_norm = self.box_set.max_norm();
        let sum_lq: f64 = (0..self.num_agents())
            .map(|i| self.lipschitz_q_block(i))
            .sum();
        let sum_lr: f64 = (0..self.num_agents())
            .map(|i| self.lipschitz_r_block(i))
            .sum();
        0.5 * max_norm * max_norm * sum_lq + max_norm * sum_lr
    }

    /// Symmetry and eigenvalue-floor checks on a uniformly sampled time grid.
    pub fn validate_on_grid(&self, horizon: f64, samples: usize) -> Result<()> {
        let steps = samples.max(2);
        for s in 0..steps {
            let t = horizon * (s as f64) / ((steps - 1) as f64);
            let q = self.q_at(t);
            if q.asymmetry() > 1e-12 {
                return Err(TvqpError::Precondition(format!(
                    "Q(t) asymmetric at t={t}: {}",
                    q.asymmetry()
                )));
            }
            let (eigs, _) = crate::linalg::jacobi_eigenvalues(&q);
            let min_eig = eigs.last().copied().unwrap_or(0.0);
            if min_eig < self.xi - 1e-9 {
                return Err(TvqpError::Precondition(format!(
                    "lambda_min(Q({t})) = {min_eig} below xi = {}",
                    self.xi
                )));
            }
        }
        Ok(())
    }
}

/// Freshest-sample times per agent at a sample event.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleState {
    pub theta: Vec<f64>,
    pub t_z: f64,
}

impl SampleState {
    pub fn new(theta: Vec<f64>, t_z: f64) -> Result<Self> {
        if theta.iter().any(|&th| th > t_z + 1e-12) {
            return Err(TvqpError::Config(
                "sample times must not exceed the event time".into(),
            ));
        }
        Ok(SampleState { theta, t_z })
    }

    /// All agents sampled at the event time itself.
    pub fn synchronous(num_agents: usize, t_z: f64) -> Self {
        SampleState {
            theta: vec![t_z; num_agents],
            t_z,
        }
    }
}

/// Direction convention for asymmetric aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Verbatim update direction `q_hat^[i] x + r_hat^[i]`.
    #[default]
    Literal,
    /// Block gradient of the cost: `(sym(q_hat))^[i] x + r_hat^[i]`.
    Symmetrized,
}

/// Row-block-stacked objective built from per-agent sample times.
/// `q_hat` may be asymmetric, and its symmetric part may be indefinite even
/// when every per-agent sample is strongly convex.
#[derive(Debug, Clone)]
pub struct AggregateObjective {
    pub q_hat: Mat,
    pub r_hat: Vec<f64>,
    pub t_z: f64,
    pub sample_state: SampleState,
    pub partition: BlockPartition,
    pub value_offset: f64,
}

impl AggregateObjective {
    pub fn n(&self) -> usize {
        self.q_hat.n_rows()
    }

    /// `0.5 x^T q_hat x + r_hat^T x + offset`. The skew part of q_hat
    /// contributes nothing to the quadratic form.
    pub fn eval_cost(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n());
        let qx = self.q_hat.matvec(x);
        0.5 * dot(x, &qx) + dot(&self.r_hat, x) + self.value_offset
    }

    /// Full-space direction: `q_hat x + r_hat` (or its symmetrized variant).
    pub fn eval_direction(&self, x: &[f64], mode: GradientMode) -> Vec<f64> {
        let qx = match mode {
            GradientMode::Literal => self.q_hat.matvec(x),
            GradientMode::Symmetrized => self.q_hat.symmetric_part().matvec(x),
        };
        qx.iter().zip(&self.r_hat).map(|(a, b)| a + b).collect()
    }

    /// Block-i direction of length n_i.
    pub fn eval_block_direction(&self, i: usize, x: &[f64], mode: GradientMode) -> Vec<f64> {
        assert_eq!(x.len(), self.n());
        let range = self.partition.range(i);
        match mode {
            GradientMode::Literal => {
                let mut out = self.q_hat.rows_matvec(range.start, range.len(), x);
                for (o, j) in out.iter_mut().zip(range) {
                    *o += self.r_hat[j];
                }
                out
            }
            GradientMode::Symmetrized => {
                let sym = self.q_hat.symmetric_part();
                let mut out = sym.rows_matvec(range.start, range.len(), x);
                for (o, j) in out.iter_mut().zip(range) {
                    *o += self.r_hat[j];
                }
                out
            }
        }
    }

    /// A symmetric-part copy paired with the same linear term; used by
    /// descent-property checks and the ground-truth solvers.
    pub fn symmetrized_matrix(&self) -> Mat {
        self.q_hat.symmetric_part()
    }
}

/// Stack row blocks `Q^[i](theta_i)` and `r^[i](theta_i)` into the aggregate.
pub fn build_aggregate(qp: &TimeVaryingQp, sample_state: &SampleState) -> Result<AggregateObjective> {
    let num_agents = qp.num_agents();
    if sample_state.theta.len() != num_agents {
        return Err(TvqpError::Config(format!(
            "sample state has {} entries, partition has {} agents",
            sample_state.theta.len(),
            num_agents
        )));
    }
    let n = qp.n();
    let mut q_hat = Mat::zeros(n, n);
    let mut r_hat = vec![0.0; n];
    for i in 0..num_agents {
        let theta_i = sample_state.theta[i];
        let q_i = qp.q_at(theta_i);
        let r_i = qp.r_at(theta_i);
        for row in qp.partition.range(i) {
            q_hat.row_mut(row).copy_from_slice(q_i.row(row));
            r_hat[row] = r_i[row];
        }
    }
    Ok(AggregateObjective {
        q_hat,
        r_hat,
        t_z: sample_state.t_z,
        sample_state: sample_state.clone(),
        partition: qp.partition.clone(),
        value_offset: qp.value_offset,
    })
}

/// The two-agent construction whose asynchronous samples make the aggregate
/// nonconvex: `Q(t) = [[1.2+cos t, sin t],[sin t, 1.2]]` sampled at
/// `theta_1 = 5 pi / 4`, `theta_2 = 3 pi / 2`.
///
/// The uniform eigenvalue floor of this family is just above 0.045
/// (attained near `cos t = -0.6`), so xi = 0.04 here.
pub fn nonconvex_demo_qp() -> TimeVaryingQp {
    let partition = BlockPartition::uniform(2, 1).unwrap();
    let box_set = BoxConstraint::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let q0 = Mat::from_rows(&[&[1.2, 0.0], &[0.0, 1.2]]);
    let cos_amp = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
    let sin_amp = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    TimeVaryingQp::new(
        partition,
        box_set,
        QpFamily::Modulated {
            q0,
            cos_amp,
            sin_amp,
            omega: 1.0,
            r0: vec![0.0, 0.0],
            r_freq: 1.0,
        },
        0.04,
    )
    .unwrap()
}

/// Sample times used in the nonconvexity construction.
pub fn nonconvex_demo_sample_state() -> SampleState {
    let t1 = 5.0 * std::f64::consts::PI / 4.0;
    let t2 = 3.0 * std::f64::consts::PI / 2.0;
    SampleState::new(vec![t1, t2], t2).unwrap()
}
