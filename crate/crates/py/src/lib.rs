//! Python bindings for the asynchronous time-varying QP toolkit: the
//! nonconvex-aggregate demo, box-QP solves, exact L2 distances, the bound
//! constants, schedule validation, and config-driven experiment runs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tvqp::async_schedule::{generate_schedule, validate_schedule};
use tvqp::bcd_engine::run;
use tvqp::config::ExperimentConfig;
use tvqp::error::TvqpError;
use tvqp::linalg::Mat;
use tvqp::metrics::compute_metrics;
use tvqp::oracle;
use tvqp::qp_model::{build_aggregate, nonconvex_demo_qp, nonconvex_demo_sample_state};

fn to_py_err(e: TvqpError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mat_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Mat> {
    let n_rows = rows.len();
    if n_rows == 0 {
        return Err(PyValueError::new_err("matrix must be nonempty"));
    }
    let n_cols = rows[0].len();
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(Mat::from_vec(
        n_rows,
        n_cols,
        rows.into_iter().flatten().collect(),
    ))
}

/// The row-block-stacked matrix of the two-agent nonconvexity construction.
#[pyfunction]
fn nonconvex_demo_matrix() -> Vec<Vec<f64>> {
    let qp = nonconvex_demo_qp();
    let agg = build_aggregate(&qp, &nonconvex_demo_sample_state()).unwrap();
    (0..2).map(|i| agg.q_hat.row(i).to_vec()).collect()
}

/// Eigenvalues of its symmetric part, sorted descending.
#[pyfunction]
fn nonconvex_demo_eigenvalues() -> (f64, f64) {
    let qp = nonconvex_demo_qp();
    let agg = build_aggregate(&qp, &nonconvex_demo_sample_state()).unwrap();
    let eigs = oracle::symmetric_part_eigs(&agg.q_hat);
    (eigs[0], eigs[1])
}

/// Eigenvalues of `(M + M^T) / 2` for a square matrix, sorted descending.
#[pyfunction]
fn symmetric_part_eigs(matrix: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let m = mat_from_rows(matrix)?;
    if !m.is_square() {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(oracle::symmetric_part_eigs(&m))
}

/// Minimize `0.5 x^T Q x + r^T x` over the box `[lo, hi]` for symmetric
/// positive definite Q; returns (minimizer, optimal value).
#[pyfunction]
#[pyo3(signature = (q, r, lo, hi, tol = 1e-10))]
fn solve_box_qp(
    q: Vec<Vec<f64>>,
    r: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    tol: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let q = mat_from_rows(q)?;
    let bx = tvqp::qp_model::BoxConstraint::new(lo, hi).map_err(to_py_err)?;
    oracle::solve_strongly_convex(&q, &r, &bx, tol).map_err(to_py_err)
}

/// Exact squared L2 distance over the box between two quadratics
/// `x^T A x + b^T x + c`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn l2_distance_squared(
    a1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    c1: f64,
    a2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    c2: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
) -> PyResult<f64> {
    let q1 = oracle::Quadratic {
        a: mat_from_rows(a1)?,
        b: b1,
        c: c1,
    };
    let q2 = oracle::Quadratic {
        a: mat_from_rows(a2)?,
        b: b2,
        c: c2,
    };
    let bx = tvqp::qp_model::BoxConstraint::new(lo, hi).map_err(to_py_err)?;
    Ok(oracle::l2_distance_squared(&q1, &q2, &bx))
}

/// Geometric constant relating L2 objective gaps to minimizer displacement.
#[pyfunction]
fn k1(n: usize, nu_x: f64, r_x: f64, d_x: f64, phi: f64) -> f64 {
    tvqp::bounds::k1(n, nu_x, r_x, d_x, phi)
}

/// Minimizer-displacement bound from an L2 objective gap.
#[pyfunction]
fn argmin_distance_bound(l2_sq: f64, k1: f64, n: usize, u_bar: f64, phi: f64) -> f64 {
    tvqp::bounds::argmin_distance_bound(l2_sq, k1, n, u_bar, phi)
}

/// Generate a seeded schedule and return its violations (empty = valid).
#[pyfunction]
#[pyo3(signature = (seed, num_agents, b, kappa, p_update = 0.6, p_comm = 0.6))]
fn check_schedule(
    seed: u64,
    num_agents: usize,
    b: usize,
    kappa: Vec<usize>,
    p_update: f64,
    p_comm: f64,
) -> PyResult<Vec<String>> {
    let s = generate_schedule(seed, num_agents, b, &kappa, p_update, p_comm, None)
        .map_err(to_py_err)?;
    Ok(validate_schedule(&s)
        .into_iter()
        .map(|v| v.to_string())
        .collect())
}

/// Trace and summary of one experiment run.
#[pyclass]
struct RunResult {
    #[pyo3(get)]
    rms_error: Option<f64>,
    #[pyo3(get)]
    avg_before_sample: Option<f64>,
    #[pyo3(get)]
    final_alpha: Vec<f64>,
    #[pyo3(get)]
    final_state: Vec<f64>,
    #[pyo3(get)]
    k: Vec<usize>,
    #[pyo3(get)]
    cost: Vec<f64>,
    #[pyo3(get)]
    alpha: Vec<f64>,
    #[pyo3(get)]
    err_opt: Vec<f64>,
    #[pyo3(get)]
    s_norm: Vec<f64>,
}

/// Run the experiment described by a config file and return its trace.
#[pyfunction]
#[pyo3(signature = (config_path, seed = None))]
fn run_experiment(config_path: &str, seed: Option<u64>) -> PyResult<RunResult> {
    let mut cfg =
        ExperimentConfig::load(std::path::Path::new(config_path)).map_err(to_py_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let qp = cfg.build_problem().map_err(to_py_err)?;
    let plan = cfg.build_plan().map_err(to_py_err)?;
    let schedule = cfg.build_schedule(&plan, &qp).map_err(to_py_err)?;
    let x0 = cfg.build_x0(&qp).map_err(to_py_err)?;
    let trace = run(&qp, &plan, &schedule, &cfg.engine_config(), &x0).map_err(to_py_err)?;
    let summary = compute_metrics(&trace);
    Ok(RunResult {
        rms_error: summary.rms_error,
        avg_before_sample: summary.avg_before_sample,
        final_alpha: summary.final_alpha.iter().map(|&(_, a)| a).collect(),
        final_state: trace.final_state().to_vec(),
        k: trace.rows.iter().map(|r| r.k).collect(),
        cost: trace.rows.iter().map(|r| r.cost).collect(),
        alpha: trace.rows.iter().map(|r| r.alpha).collect(),
        err_opt: trace.rows.iter().map(|r| r.err_opt).collect(),
        s_norm: trace.rows.iter().map(|r| r.s_norm).collect(),
    })
}

#[pymodule]
fn tvqp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(nonconvex_demo_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(nonconvex_demo_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_part_eigs, m)?)?;
    m.add_function(wrap_pyfunction!(solve_box_qp, m)?)?;
    m.add_function(wrap_pyfunction!(l2_distance_squared, m)?)?;
    m.add_function(wrap_pyfunction!(k1, m)?)?;
    m.add_function(wrap_pyfunction!(argmin_distance_bound, m)?)?;
    m.add_function(wrap_pyfunction!(check_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<RunResult>()?;
    Ok(())
}
