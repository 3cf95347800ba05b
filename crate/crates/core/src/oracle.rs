//! Ground-truth numerical subsystem: box-QP minimizers, stationary sets of
//! the possibly nonconvex aggregate, symmetric eigenvalues, exact L2
//! distances between quadratics over a box, and empirical estimates of the
//! error-bound, separation, and drift constants.

use crate::error::{Result, TvqpError};
use crate::linalg::{dist, dot, halton_point, jacobi_eigenvalues, norm, sub, Mat};
use crate::qp_model::{AggregateObjective, BoxConstraint, GradientMode};

/// Settings for stationary-set searches.
#[derive(Debug, Clone)]
pub struct OracleSettings {
    pub multistarts: usize,
    pub tol: f64,
    pub dedup_radius: f64,
    pub max_iters: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            multistarts: 64,
            tol: 1e-10,
            dedup_radius: 1e-6,
            max_iters: 2_000_000,
        }
    }
}

/// Points satisfying `x = Pi_box[x - grad g(x)]` to tolerance, with costs.
#[derive(Debug, Clone)]
pub struct StationarySet {
    pub points: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub t_z: f64,
    pub residual_tol: f64,
    pub dedup_radius: f64,
}

impl StationarySet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn min_cost(&self) -> Option<f64> {
        self.costs.iter().cloned().fold(None, |m, c| match m {
            None => Some(c),
            Some(v) => Some(v.min(c)),
        })
    }
}

/// Fixed-point residual of the unit-step projected gradient map.
pub fn fixed_point_residual(bx: &BoxConstraint, x: &[f64], grad: &[f64]) -> f64 {
    let stepped: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - g).collect();
    let projected = bx.project(&stepped);
    dist(x, &projected)
}

/// Minimize `0.5 x^T Q x + r^T x` over the box for symmetric PD `Q`.
///
/// Projected gradient with fixed step `1/lambda_max(Q)` until the unit-step
/// fixed-point residual drops below `tol`. Strong convexity makes the
/// minimizer unique.
pub fn solve_strongly_convex(
    q: &Mat,
    r: &[f64],
    bx: &BoxConstraint,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    if !q.is_square() || q.n_rows() != r.len() || r.len() != bx.n() {
        return Err(TvqpError::Precondition("dimension mismatch".into()));
    }
    if q.asymmetry() > 1e-9 {
        return Err(TvqpError::Precondition("Q must be symmetric".into()));
    }
    let (eigs, _) = jacobi_eigenvalues(q);
    let lambda_max = *eigs.first().unwrap();
    let lambda_min = *eigs.last().unwrap();
    if lambda_min <= 0.0 {
        return Err(TvqpError::Precondition(format!(
            "Q not positive definite (lambda_min = {lambda_min})"
        )));
    }
    let step = 1.0 / lambda_max;
    let mut x = bx.project(&vec![0.0; r.len()]);
    for _ in 0..200_000_000 {
        let grad: Vec<f64> = q.matvec(&x).iter().zip(r).map(|(a, b)| a + b).collect();
        if fixed_point_residual(bx, &x, &grad) <= tol {
            let value = 0.5 * dot(&x, &q.matvec(&x)) + dot(r, &x);
            return Ok((x, value));
        }
        let stepped: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        x = bx.project(&stepped);
    }
    Err(TvqpError::Oracle(
        "strongly convex solve did not reach tolerance".into(),
    ))
}

fn aggregate_gradient(agg: &AggregateObjective, x: &[f64]) -> Vec<f64> {
    agg.eval_direction(x, GradientMode::Symmetrized)
}

/// Deterministic start points: box vertices (when affordable), the center,
/// and Halton points filling the remaining budget.
fn start_points(bx: &BoxConstraint, multistarts: usize) -> Vec<Vec<f64>> {
    let n = bx.n();
    let mut starts = Vec::new();
    let center: Vec<f64> = bx
        .lo()
        .iter()
        .zip(bx.hi())
        .map(|(l, h)| 0.5 * (l + h))
        .collect();
    starts.push(center);
    if n <= 10 {
        for mask in 0..(1usize << n) {
            let v: Vec<f64> = (0..n)
                .map(|j| {
                    if mask >> j & 1 == 1 {
                        bx.hi()[j]
                    } else {
                        bx.lo()[j]
                    }
                })
                .collect();
            starts.push(v);
        }
    }
    let mut idx = 1;
    while starts.len() < multistarts.max(1) + if n <= 10 { (1 << n) + 1 } else { 1 } {
        let u = halton_point(idx, n.min(12));
        let v: Vec<f64> = (0..n)
            .map(|j| {
                let uj = if j < 12 { u[j] } else { u[j % 12] };
                bx.lo()[j] + uj * (bx.hi()[j] - bx.lo()[j])
            })
            .collect();
        starts.push(v);
        idx += 1;
        if idx > 8 * multistarts + 16 {
            break;
        }
    }
    starts
}

/// Multistart projected gradient (symmetrized direction) to tolerance, then
/// dedup within `dedup_radius` keeping the lowest cost per cluster.
pub fn find_stationary_set(
    agg: &AggregateObjective,
    bx: &BoxConstraint,
    settings: &OracleSettings,
) -> StationarySet {
    let sym = agg.symmetrized_matrix();
    let (eigs, _) = jacobi_eigenvalues(&sym);
    let l = eigs.iter().fold(0.0f64, |m, &e| m.max(e.abs())).max(1e-12);
    let step = 1.0 / l;

    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    for start in start_points(bx, settings.multistarts) {
        let mut x = bx.project(&start);
        let mut converged = false;
        for _ in 0..settings.max_iters {
            let grad = aggregate_gradient(agg, &x);
            if fixed_point_residual(bx, &x, &grad) <= settings.tol {
                converged = true;
                break;
            }
            let stepped: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let next = bx.project(&stepped);
            if dist(&next, &x) < settings.tol * step.min(1.0) * 1e-3 {
                // stalled out; accept if the unit-step residual is close
                x = next;
                let grad = aggregate_gradient(agg, &x);
                converged = fixed_point_residual(bx, &x, &grad) <= settings.tol * 10.0;
                break;
            }
            x = next;
        }
        if converged {
            found.push((x.clone(), agg.eval_cost(&x)));
        }
    }

    // dedup: greedy clustering in discovery order, keep lowest cost
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut costs: Vec<f64> = Vec::new();
    for (p, c) in found {
        match points
            .iter()
            .position(|q| dist(q, &p) < settings.dedup_radius)
        {
            Some(k) => {
                if c < costs[k] {
                    points[k] = p;
                    costs[k] = c;
                }
            }
            None => {
                points.push(p);
                costs.push(c);
            }
        }
    }
    StationarySet {
        points,
        costs,
        t_z: agg.t_z,
        residual_tol: settings.tol,
        dedup_radius: settings.dedup_radius,
    }
}

/// Among the stored points nearest to `x` (ties within the dedup radius),
/// return the one with the lowest cost.
pub fn nearest_stationary<'a>(set: &'a StationarySet, x: &[f64]) -> Result<(&'a [f64], f64)> {
    if set.is_empty() {
        return Err(TvqpError::Oracle("stationary set is empty".into()));
    }
    let dists: Vec<f64> = set.points.iter().map(|p| dist(p, x)).collect();
    let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut best: Option<usize> = None;
    for (k, &d) in dists.iter().enumerate() {
        if d <= dmin + set.dedup_radius {
            match best {
                None => best = Some(k),
                Some(b) => {
                    if set.costs[k] < set.costs[b] {
                        best = Some(k);
                    }
                }
            }
        }
    }
    let k = best.unwrap();
    Ok((&set.points[k], set.costs[k]))
}

/// Eigenvalues of `(M + M^T)/2`, sorted descending.
pub fn symmetric_part_eigs(m: &Mat) -> Vec<f64> {
    jacobi_eigenvalues(&m.symmetric_part()).0
}

/// A quadratic `x^T A x + b^T x + c` used by the L2 machinery.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub a: Mat,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Quadratic {
    /// From the crate's cost convention `0.5 x^T Q x + r^T x + off`.
    pub fn from_cost(q: &Mat, r: &[f64], off: f64) -> Self {
        Quadratic {
            a: q.scale(0.5),
            b: r.to_vec(),
            c: off,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(x, &self.a.matvec(x)) + dot(&self.b, x) + self.c
    }
}

/// Exact 1-D power moment `int_a^b x^p dx`.
fn power_moment(a: f64, b: f64, p: usize) -> f64 {
    let e = (p + 1) as f64;
    (b.powf(e) - a.powf(e)) / e
}

/// Box integral of a monomial with per-dimension powers.
fn monomial_integral(bx: &BoxConstraint, powers: &[usize]) -> f64 {
    let mut acc = 1.0;
    for (j, &p) in powers.iter().enumerate() {
        acc *= power_moment(bx.lo()[j], bx.hi()[j], p);
    }
    acc
}

/// `|| q1 - q2 ||^2` in L2 over the box, in exact closed form.
///
/// The difference `d(x) = x^T A x + b^T x + c` is squared and expanded into
/// monomials of total degree <= 4, whose box integrals factor into products
/// of 1-D power moments.
pub fn l2_distance_squared(q1: &Quadratic, q2: &Quadratic, bx: &BoxConstraint) -> f64 {
    let n = bx.n();
    assert_eq!(q1.a.n_rows(), n);
    assert_eq!(q2.a.n_rows(), n);
    let a = q1.a.sub(&q2.a);
    let b = sub(&q1.b, &q2.b);
    let c = q1.c - q2.c;

    let mut powers = vec![0usize; n];
    let mut total = 0.0;

    // (x^T A x)^2
    for i in 0..n {
        for j in 0..n {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..n {
                for l in 0..n {
                    let akl = a[(k, l)];
                    if akl == 0.0 {
                        continue;
                    }
                    powers.iter_mut().for_each(|p| *p = 0);
                    powers[i] += 1;
                    powers[j] += 1;
                    powers[k] += 1;
                    powers[l] += 1;
                    total += aij * akl * monomial_integral(bx, &powers);
                }
            }
        }
    }
    // 2 (x^T A x)(b^T x)
    for i in 0..n {
        for j in 0..n {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..n {
                if b[k] == 0.0 {
                    continue;
                }
                powers.iter_mut().for_each(|p| *p = 0);
                powers[i] += 1;
                powers[j] += 1;
                powers[k] += 1;
                total += 2.0 * aij * b[k] * monomial_integral(bx, &powers);
            }
        }
    }
    // (b^T x)^2 and 2c (x^T A x) share degree-2 monomials
    for i in 0..n {
        for j in 0..n {
            let coeff = b[i] * b[j] + 2.0 * c * a[(i, j)];
            if coeff == 0.0 {
                continue;
            }
            powers.iter_mut().for_each(|p| *p = 0);
            powers[i] += 1;
            powers[j] += 1;
            total += coeff * monomial_integral(bx, &powers);
        }
    }
    // 2c b^T x
    for (i, &bi) in b.iter().enumerate() {
        if bi == 0.0 {
            continue;
        }
        powers.iter_mut().for_each(|p| *p = 0);
        powers[i] += 1;
        total += 2.0 * c * bi * monomial_integral(bx, &powers);
    }
    // c^2
    total += c * c * bx.volume();
    total
}

/// Empirical error-bound constant: the worst sampled ratio of distance to the
/// stationary set over the unit-step fixed-point residual. Residuals below
/// 1e-12 are excluded; with no valid samples the estimate is the 0 sentinel.
pub fn estimate_error_bound_constant(
    agg: &AggregateObjective,
    bx: &BoxConstraint,
    set: &StationarySet,
    samples: usize,
) -> (f64, Option<Vec<f64>>) {
    if set.is_empty() {
        return (0.0, None);
    }
    let n = bx.n();
    let mut best_ratio = 0.0;
    let mut best_x: Option<Vec<f64>> = None;
    for s in 1..=samples.max(1) {
        let u = halton_point(s, n.min(12));
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let uj = u[j % u.len()];
                bx.lo()[j] + uj * (bx.hi()[j] - bx.lo()[j])
            })
            .collect();
        let grad = aggregate_gradient(agg, &x);
        let residual = fixed_point_residual(bx, &x, &grad);
        if residual < 1e-12 {
            continue;
        }
        let d = set
            .points
            .iter()
            .map(|p| dist(p, &x))
            .fold(f64::INFINITY, f64::min);
        let ratio = d / residual;
        if ratio > best_ratio {
            best_ratio = ratio;
            best_x = Some(x);
        }
    }
    (best_ratio, best_x)
}

/// Smallest distance between stationary points with distinct costs;
/// infinity when every pair has (numerically) equal cost.
pub fn estimate_separation(set: &StationarySet) -> f64 {
    let mut eps = f64::INFINITY;
    for i in 0..set.len() {
        for j in (i + 1)..set.len() {
            if (set.costs[i] - set.costs[j]).abs() > 1e-9 {
                eps = eps.min(dist(&set.points[i], &set.points[j]));
            }
        }
    }
    eps
}

/// Largest cross-pair distance between consecutive stationary sets,
/// capped at the box diameter.
pub fn estimate_sigma(prev: &StationarySet, next: &StationarySet, bx: &BoxConstraint) -> f64 {
    let mut sigma: f64 = 0.0;
    for p in &prev.points {
        for q in &next.points {
            sigma = sigma.max(dist(p, q));
        }
    }
    sigma.min(bx.diameter())
}

/// Maximum over samples of ||grad g(x)|| (diagnostic spot check for M_z).
pub fn sampled_gradient_sup(agg: &AggregateObjective, bx: &BoxConstraint, samples: usize) -> f64 {
    let n = bx.n();
    let mut sup: f64 = 0.0;
    for s in 1..=samples {
        let u = halton_point(s, n.min(12));
        let x: Vec<f64> = (0..n)
            .map(|j| bx.lo()[j] + u[j % u.len()] * (bx.hi()[j] - bx.lo()[j]))
            .collect();
        sup = sup.max(norm(&aggregate_gradient(agg, &x)));
    }
    sup
}
