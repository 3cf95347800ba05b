//! Closed-form convergence constants and tracking-error bounds: objective
//! constants per interval, the derived constants block, the admissible
//! step-size ceiling, the accumulated suboptimality bound, and the geometric
//! constants relating aggregate minimizers to the true sampled minimizers.

use crate::error::{Result, TvqpError};
use crate::linalg::norm;
use crate::oracle::Quadratic;
use crate::qp_model::{AggregateObjective, BoxConstraint, TimeVaryingQp};

/// Objective-level constants for one sample interval.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveConstants {
    /// Spectral norm of the symmetrized aggregate Hessian.
    pub l_z: f64,
    /// Gradient-norm bound over the box.
    pub m_z: f64,
    /// Cost upper bound over the box.
    pub m_g_z: f64,
    /// Lipschitz constant of the cost over the box.
    pub l_g_z: f64,
    pub d_x: f64,
    pub r_x: f64,
    /// Jump constant of the objective between consecutive sample events.
    pub l_t: f64,
    /// Sampling-lag bound.
    pub delta: f64,
}

/// Upper-bound constants from the aggregate and the box geometry.
///
/// `m_z` and `m_g_z` are closed-form majorants (exact maximization of an
/// indefinite quadratic over a box is NP-hard); `delta` comes from the
/// realized sampling plan.
pub fn objective_constants(
    agg: &AggregateObjective,
    qp: &TimeVaryingQp,
    delta: f64,
) -> ObjectiveConstants {
    let l_z = agg.q_hat.sym_spectral_norm();
    let max_norm = qp.box_set.max_norm();
    let r_norm = norm(&agg.r_hat);
    let m_z = l_z * max_norm + r_norm;
    let m_g_z = 0.5 * l_z * max_norm * max_norm + r_norm * max_norm + agg.value_offset;
    ObjectiveConstants {
        l_z,
        m_z,
        m_g_z,
        l_g_z: m_z,
        d_x: qp.box_set.diameter(),
        r_x: qp.box_set.inradius(),
        l_t: qp.continuous_jump_constant(),
        delta,
    }
}

/// Problem-level inputs for the bound machinery.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub num_agents: usize,
    pub delay_bound: usize,
    pub dim: usize,
    /// Error-bound constant (config override or empirical estimate).
    pub lambda_z: f64,
    /// Minimizer drift bound between consecutive events.
    pub sigma_z: f64,
    /// Diagnostic separation estimate, when available.
    pub epsilon_z: Option<f64>,
    pub kappa_z: usize,
    /// Linear-phase window count; convention `kappa_z div B` unless a
    /// measured settling index is supplied.
    pub r_z: usize,
    /// Strong-convexity floor of the true objective.
    pub phi: f64,
    /// Curvature ceiling across intervals.
    pub psi: f64,
    /// Gradient-norm ceiling across intervals.
    pub u_bar: f64,
    /// Corner fraction of the box reachable by inscribed balls.
    pub nu_x: f64,
    /// `a_{z-1} rho_{z-1}^{r_{z-1}-1}` carried from the previous interval;
    /// `None` seeds the recursion at z = 0.
    pub alpha_carry: Option<f64>,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi < self.psi) {
            return Err(TvqpError::Precondition(format!(
                "need 0 < phi < psi, got phi={} psi={}",
                self.phi, self.psi
            )));
        }
        if self.u_bar <= 0.0 {
            return Err(TvqpError::Precondition("u_bar must be positive".into()));
        }
        if !(self.nu_x > 0.0 && self.nu_x < 1.0) {
            return Err(TvqpError::Precondition("nu_x must lie in (0,1)".into()));
        }
        Ok(())
    }

    /// Default corner fraction for a box: a ball at a corner intersects the
    /// box in one orthant.
    pub fn box_corner_fraction(dim: usize) -> f64 {
        0.5f64.powi(dim as i32)
    }
}

/// Derived per-interval constants at a given step size.
#[derive(Debug, Clone, Copy)]
pub struct ConstantsBlock {
    pub d_z: f64,
    pub e_z: f64,
    pub f_z: f64,
    pub g_z: f64,
    pub a_z: f64,
    pub b_z: f64,
    pub c_z: f64,
    pub rho_z: f64,
    pub k_z: f64,
    pub gamma_z: f64,
    pub gamma_max_z: f64,
}

/// Raw constants at a candidate step size; used both by the public
/// constructor and inside the step-size search.
fn eval_block(oc: &ObjectiveConstants, bi: &BoundInputs, gamma: f64) -> Option<ConstantsBlock> {
    let l = oc.l_z;
    let nf = bi.num_agents as f64;
    let bf = bi.delay_bound as f64;
    let lam2 = bi.lambda_z * bi.lambda_z;
    if l <= 0.0 {
        return None;
    }

    let d = (2.0 - gamma * l * (1.0 + bf + nf * bf)) / 2.0;
    if d <= 0.0 {
        return None;
    }
    let e = l * nf * bf / 2.0;
    let lead = (nf * l * l / 2.0) * (nf * (7.0 * l * l + 6.0 * l + 3.0) + 3.0);
    let f = lead
        + 1.5
            * (bf * nf * (6.0 * l.powi(4) + 12.0 * l.powi(3) + 14.0 * l * l)
                + 3.0 * l * l
                + 6.0 * l
                + 7.0
                + nf * lam2 * (l * l * (bf * nf * (6.0 * l * l + 8.0) + 3.0) + 4.0))
        + 1.0;
    let g = lead
        + l * bf * nf / 2.0
        + nf * bf * l * l * (9.0 * l * l + 18.0 * l + 21.0 + nf * lam2 * (9.0 * l * l + 12.0));

    let c = d / (2.0 * f + 2.0 * d);
    let rho = 1.0 - gamma * c;
    // rho may round to exactly 1.0 for bracketing-only gammas near zero
    if !(rho > 0.0 && rho <= 1.0) {
        return None;
    }

    let ratio = 8.0 * e * (g / f + e / d) * f; // a/b enforcement factor
    let (a, b) = match bi.alpha_carry {
        None => {
            let a0 = (oc.l_g_z * oc.d_x).max(ratio * bf * oc.d_x * oc.d_x / d);
            let b0 = d / ratio * a0;
            (a0, b0)
        }
        Some(carry) => {
            let b = bf * oc.d_x * oc.d_x;
            let a = carry
                + 2.0 * oc.l_t * oc.delta
                + bf * oc.d_x * oc.m_z
                + oc.l_g_z * bi.sigma_z
                + 4.0 * l * bf * bf * oc.d_x * oc.d_x * e * (g / f + e / d) * f / d;
            // keep b/a within the ratio the recursion relies on
            let a = a.max(ratio * b / d);
            (a, b)
        }
    };
    let k = 2.0 * oc.l_t * oc.delta
        + bf * oc.d_x * oc.m_z
        + oc.l_g_z * bi.sigma_z
        + 4.0 * bf * bf * l * oc.d_x * oc.d_x * e * (g / f + e / d) * f / d;

    Some(ConstantsBlock {
        d_z: d,
        e_z: e,
        f_z: f,
        g_z: g,
        a_z: a,
        b_z: b,
        c_z: c,
        rho_z: rho,
        k_z: k,
        gamma_z: gamma,
        gamma_max_z: f64::NAN,
    })
}

/// The eight admissible-step terms evaluated at `gamma`; entries that do not
/// constrain (zero denominators) are reported as infinity.
pub fn gamma_terms(oc: &ObjectiveConstants, bi: &BoundInputs, gamma: f64) -> Option<[f64; 8]> {
    let blk = eval_block(oc, bi, gamma)?;
    let l = oc.l_z;
    let nf = bi.num_agents as f64;
    let bf = bi.delay_bound as f64;
    let (d, e, f, g, c) = (blk.d_z, blk.e_z, blk.f_z, blk.g_z, blk.c_z);

    let t1 = 0.5;
    let t2 = 2.0 / (l * (1.0 + bf + 2.0 * nf * bf));
    let gfed = g / f + e / d;
    let t3 = if gfed > 0.0 { 1.0 / gfed } else { f64::INFINITY };
    // root of E c x^2 - (a/b + 2E + Dc) x + D = 0, in rationalized form so
    // the E -> 0 limit stays finite
    let s = blk.a_z / blk.b_z + 2.0 * e + d * c;
    let disc = (s * s - 4.0 * d * e * c).max(0.0);
    let t4 = 2.0 * d / (s + disc.sqrt());
    let t5 = if e > 0.0 { d / e } else { f64::INFINITY };
    let t6 = 1.0 / (2.0 * c);
    let t7 = if gfed > 0.0 {
        d / (8.0 * f * gfed * c)
    } else {
        f64::INFINITY
    };
    let t8 = 2.0 / (3.0 * l * bf * nf + l * bf);
    Some([t1, t2, t3, t4, t5, t6, t7, t8])
}

const GAMMA_TERM_NAMES: [&str; 8] = [
    "1/2 cap",
    "descent window 2/(L(1+B+2NB))",
    "(G/F + E/D)^-1",
    "beta-contraction root",
    "D/E",
    "1/(2c)",
    "D/(8F(G/F+E/D)c)",
    "2/(3LBN + LB)",
];

fn gamma_feasible(oc: &ObjectiveConstants, bi: &BoundInputs, gamma: f64) -> bool {
    match gamma_terms(oc, bi, gamma) {
        None => false,
        Some(terms) => terms.iter().all(|&t| gamma <= t),
    }
}

/// Largest admissible step size: the greatest `gamma` in (0, 1/2] satisfying
/// every min-term, the terms themselves being functions of `gamma`.
/// Solved by bisection, falling back to a grid scan if the feasibility
/// predicate is not monotone over the probe grid.
pub fn gamma_max(oc: &ObjectiveConstants, bi: &BoundInputs) -> Result<f64> {
    bi.validate()?;
    if oc.l_z <= 0.0 {
        return Err(TvqpError::Precondition(
            "gamma_max undefined for a degenerate (L_z = 0) objective".into(),
        ));
    }
    let lo0 = 1e-300;
    let hi0 = 0.5;
    if !gamma_feasible(oc, bi, lo0) {
        // name the first violated term at the bracket floor
        let msg = match gamma_terms(oc, bi, lo0) {
            None => "constants undefined near gamma = 0".to_string(),
            Some(terms) => {
                let bad = terms
                    .iter()
                    .enumerate()
                    .find(|(_, &t)| lo0 > t)
                    .map(|(i, _)| GAMMA_TERM_NAMES[i])
                    .unwrap_or("unknown term");
                format!("empty feasible step region; violated term: {bad}")
            }
        };
        return Err(TvqpError::StepSize(msg));
    }
    if gamma_feasible(oc, bi, hi0) {
        return Ok(hi0);
    }

    // monotonicity probe
    let probes = 64;
    let mut last = true;
    let mut monotone = true;
    for p in 1..=probes {
        let gamma = hi0 * p as f64 / probes as f64;
        let ok = gamma_feasible(oc, bi, gamma);
        if ok && !last {
            monotone = false;
            break;
        }
        last = ok;
    }

    if monotone {
        let mut lo = lo0;
        let mut hi = hi0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gamma_feasible(oc, bi, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-9 * hi.max(1e-30) {
                break;
            }
        }
        Ok(lo)
    } else {
        // conservative prefix scan: largest gamma below the first infeasibility
        let fine = 65536;
        let mut best = lo0;
        for p in 1..=fine {
            let gamma = hi0 * p as f64 / fine as f64;
            if gamma_feasible(oc, bi, gamma) {
                best = gamma;
            } else {
                break;
            }
        }
        Ok(best)
    }
}

/// Evaluate the full constants block at a supplied step size.
pub fn constants_block(
    oc: &ObjectiveConstants,
    bi: &BoundInputs,
    gamma_z: f64,
) -> Result<ConstantsBlock> {
    bi.validate()?;
    if !(gamma_z > 0.0 && gamma_z < 1.0) {
        return Err(TvqpError::Precondition(format!(
            "gamma_z must lie in (0,1), got {gamma_z}"
        )));
    }
    let mut blk = eval_block(oc, bi, gamma_z).ok_or_else(|| {
        TvqpError::StepSize(format!(
            "gamma = {gamma_z} out of range: D_z <= 0 or degenerate constants"
        ))
    })?;
    if blk.rho_z >= 1.0 {
        return Err(TvqpError::StepSize(format!(
            "gamma = {gamma_z} too small to contract (rho rounds to 1)"
        )));
    }
    blk.gamma_max_z = gamma_max(oc, bi)?;
    Ok(blk)
}

/// The accumulated suboptimality bound per interval and its
/// non-vanishing tail (the uniform-ultimate-boundedness floor).
#[derive(Debug, Clone, Copy)]
pub struct AccumulatedBound {
    pub total: f64,
    pub tail: f64,
}

/// `a_0 prod_i rho_i^{r_i - 1} + sum_j K_j prod_{k>=j} rho_k^{r_k - 1}`
/// evaluated for every interval prefix.
pub fn accumulated_alpha_bound(blocks: &[ConstantsBlock], r: &[usize]) -> Vec<AccumulatedBound> {
    assert_eq!(blocks.len(), r.len());
    let mut out = Vec::with_capacity(blocks.len());
    for z in 0..blocks.len() {
        let pow = |i: usize| blocks[i].rho_z.powi(r[i] as i32 - 1);
        let mut head = blocks[0].a_z;
        for i in 0..=z {
            head *= pow(i);
        }
        let mut tail = 0.0;
        for j in 1..=z {
            let mut term = blocks[j].k_z;
            for k in j..=z {
                term *= pow(k);
            }
            tail += term;
        }
        out.push(AccumulatedBound {
            total: head + tail,
            tail,
        });
    }
    out
}

/// Lanczos approximation of the gamma function (g = 7, 9 coefficients);
/// relative error below 1e-12 on the half-integers used here.
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
pub fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Geometric constant `phi^2 pi^{n/2} / (n 2^{n+3} Gamma(n/2)) nu (r/d)^n`.
pub fn k1(n: usize, nu_x: f64, r_x: f64, d_x: f64, phi: f64) -> f64 {
    let nf = n as f64;
    phi * phi * std::f64::consts::PI.powf(nf / 2.0)
        / (nf * 2.0f64.powf(nf + 3.0) * gamma_fn(nf / 2.0))
        * nu_x
        * (r_x / d_x).powf(nf)
}

/// Largest L2 discrepancy `max_z max{ ||f-h||^2, ||f-g||^2 }` over the
/// sample events.
pub fn k2(
    f_true: &[Quadratic],
    g_agg: &[Quadratic],
    h_envelope: &[Quadratic],
    bx: &BoxConstraint,
) -> f64 {
    assert_eq!(f_true.len(), g_agg.len());
    assert_eq!(f_true.len(), h_envelope.len());
    let mut worst: f64 = 0.0;
    for z in 0..f_true.len() {
        let fh = crate::oracle::l2_distance_squared(&f_true[z], &h_envelope[z], bx);
        let fg = crate::oracle::l2_distance_squared(&f_true[z], &g_agg[z], bx);
        worst = worst.max(fh.max(fg));
    }
    worst
}

/// The envelope `h(x) = 0.5 ||x||^2 + M_{g,z}` as a quadratic.
pub fn envelope_quadratic(n: usize, m_g_z: f64) -> Quadratic {
    Quadratic {
        a: crate::linalg::Mat::identity(n).scale(0.5),
        b: vec![0.0; n],
        c: m_g_z,
    }
}

/// `(4 u / phi)^{n/(2n+4)} (l2_sq / K1)^{1/(2n+4)}`: distance between the
/// box minimizers of two strongly convex objectives with L2 gap `l2_sq`.
pub fn argmin_distance_bound(l2_sq: f64, k1: f64, n: usize, u_bar: f64, phi: f64) -> f64 {
    let nf = n as f64;
    (4.0 * u_bar / phi).powf(nf / (2.0 * nf + 4.0)) * (l2_sq / k1).powf(1.0 / (2.0 * nf + 4.0))
}

/// Geometric decay term plus the non-vanishing floor from the minimizer
/// displacement: `a_z rho_z^{r_z - 1} + (4u/phi)^{n/(2n+4)} (K2/K1)^{1/(2n+4)}`.
pub fn tracking_error_bound(
    a_z: f64,
    rho_z: f64,
    r_z: usize,
    k1: f64,
    k2: f64,
    n: usize,
    u_bar: f64,
    phi: f64,
) -> f64 {
    let nf = n as f64;
    a_z * rho_z.powi(r_z as i32 - 1)
        + (4.0 * u_bar / phi).powf(nf / (2.0 * nf + 4.0)) * (k2 / k1).powf(1.0 / (2.0 * nf + 4.0))
}
