//! Trace and report emission: CSV schemas (17-significant-digit floats),
//! the per-interval bounds table, schedule dumps, and SVG line plots.

use crate::async_schedule::AsyncSchedule;
use crate::bcd_engine::{IterRow, RunTrace};
use crate::bounds::{
    constants_block, envelope_quadratic, gamma_max, k1, k2,
    objective_constants, accumulated_alpha_bound, BoundInputs, ConstantsBlock,
};
use crate::config::ExperimentConfig;
use crate::error::{Result, TvqpError};
use crate::metrics::SummaryReport;
use crate::oracle::{
    estimate_error_bound_constant, estimate_separation, estimate_sigma, find_stationary_set,
    solve_strongly_convex, Quadratic, StationarySet,
};
use crate::qp_model::build_aggregate;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// 17 significant decimal digits: enough to round-trip every f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub const TRACE_HEADER: &str = "k,z,t_z,cost,s_norm,beta,alpha,err_opt";

/// Emit the per-iteration trace. Core columns must be finite; alpha/err may
/// be NaN only when no oracle was attached.
pub fn write_trace_csv(path: &Path, trace: &RunTrace, require_finite_oracle: bool) -> Result<()> {
    let mut out = String::with_capacity(trace.rows.len() * 96);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        if !(r.cost.is_finite() && r.s_norm.is_finite() && r.beta.is_finite()) {
            return Err(TvqpError::Config(format!(
                "nonfinite value in trace at k = {}",
                r.k
            )));
        }
        if require_finite_oracle && !(r.alpha.is_finite() && r.err_opt.is_finite()) {
            return Err(TvqpError::Config(format!(
                "nonfinite oracle column in trace at k = {}",
                r.k
            )));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k,
            r.z,
            format_float(r.t_z),
            format_float(r.cost),
            format_float(r.s_norm),
            format_float(r.beta),
            format_float(r.alpha),
            format_float(r.err_opt),
        );
    }
    write_atomic(path, &out)
}

/// Parse a trace CSV back into rows (numeric columns bit-exact).
pub fn read_trace_csv(path: &Path) -> Result<Vec<IterRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| TvqpError::Config("empty trace csv".into()))?;
    if header != TRACE_HEADER {
        return Err(TvqpError::Config(format!(
            "unexpected trace header `{header}`"
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(TvqpError::Config(format!(
                "trace row {} has {} columns",
                idx + 2,
                cols.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| TvqpError::Config(format!("bad float `{s}` in trace row {}", idx + 2)))
        };
        rows.push(IterRow {
            k: cols[0]
                .parse()
                .map_err(|_| TvqpError::Config(format!("bad k in row {}", idx + 2)))?,
            z: cols[1]
                .parse()
                .map_err(|_| TvqpError::Config(format!("bad z in row {}", idx + 2)))?,
            t_z: parse_f(cols[2])?,
            cost: parse_f(cols[3])?,
            s_norm: parse_f(cols[4])?,
            beta: parse_f(cols[5])?,
            alpha: parse_f(cols[6])?,
            err_opt: parse_f(cols[7])?,
        });
    }
    Ok(rows)
}

/// Per-interval companion file: sampling state, step size, and end-of-interval
/// diagnostics.
pub fn write_intervals_csv(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut out = String::new();
    out.push_str("z,t_z,gamma,cost_end,alpha_end,err_end,qhat_fingerprint,theta\n");
    for iv in &trace.intervals {
        let theta = iv
            .theta
            .iter()
            .map(|v| format_float(*v))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:016x},{}",
            iv.z,
            format_float(iv.t_z),
            format_float(iv.gamma),
            format_float(iv.cost_end),
            format_float(iv.alpha_end),
            format_float(iv.err_end),
            iv.qhat_fingerprint,
            theta
        );
    }
    write_atomic(path, &out)
}

/// Debug dump of the event schedule: one row per event.
pub fn write_schedule_csv(path: &Path, schedule: &AsyncSchedule) -> Result<()> {
    let mut out = String::new();
    out.push_str("k,agent,event_type,counterpart,tau\n");
    for k in 0..schedule.total_iterations() {
        for &agent in &schedule.compute_events[k] {
            let _ = writeln!(out, "{k},{agent},compute,,");
        }
        for d in &schedule.deliveries[k] {
            let _ = writeln!(out, "{k},{},deliver,{},{}", d.to, d.from, d.tau);
        }
    }
    write_atomic(path, &out)
}

/// Labelled summary lines for run/compare/sweep outputs.
pub fn write_summary_csv(path: &Path, rows: &[(String, SummaryReport)]) -> Result<()> {
    let mut out = String::new();
    out.push_str("label,rms_error,avg_before_sample,final_alpha\n");
    for (label, report) in rows {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format_float(x),
            None => "unavailable".into(),
        };
        let final_alpha = report
            .final_alpha
            .last()
            .map(|&(_, a)| format_float(a))
            .unwrap_or_else(|| "unavailable".into());
        let _ = writeln!(
            out,
            "{label},{},{},{final_alpha}",
            fmt_opt(report.rms_error),
            fmt_opt(report.avg_before_sample)
        );
    }
    write_atomic(path, &out)
}

// ---------------------------------------------------------------------------
// bounds report
// ---------------------------------------------------------------------------

/// One interval of the bounds table.
#[derive(Debug, Clone)]
pub struct BoundsRow {
    pub z: usize,
    pub t_z: f64,
    pub l_z: f64,
    pub m_z: f64,
    pub gamma_used: f64,
    pub block: ConstantsBlock,
    pub r_z: usize,
    pub accum_total: f64,
    pub accum_tail: f64,
    pub tracking: f64,
    pub lambda_hat: f64,
    pub eps_hat: f64,
    pub sigma_hat: f64,
}

/// Full bounds pipeline output.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub rows: Vec<BoundsRow>,
    pub phi: f64,
    pub psi: f64,
    pub u_bar: f64,
    pub nu_x: f64,
    pub k1: f64,
    pub k2: f64,
    pub value_offset_used: f64,
}

/// Evaluate every per-interval constant and both headline bounds for the
/// configured experiment. Raises the cost offset when the sampled aggregates
/// dip below zero so the nonnegativity assumption holds.
pub fn bounds_report(cfg: &ExperimentConfig) -> Result<BoundsReport> {
    let mut qp = cfg.build_problem()?;
    let plan = cfg.build_plan()?;
    let events = plan.num_events();
    let kappa: Vec<usize> = if cfg.kappa.len() == 1 {
        vec![cfg.kappa[0]; events]
    } else {
        cfg.kappa.clone()
    };
    if kappa.len() != events {
        return Err(TvqpError::Config(
            "kappa must cover every sample event".into(),
        ));
    }

    // pass 1: stationary sets, empirical constants, and the cost floor
    let mut sets: Vec<StationarySet> = Vec::with_capacity(events);
    let mut lambda_hats = Vec::with_capacity(events);
    for z in 0..events {
        let agg = build_aggregate(&qp, &plan.sample_state(z))?;
        let set = if agg.q_hat.asymmetry() <= 1e-12 {
            let (p, c) =
                solve_strongly_convex(&agg.q_hat, &agg.r_hat, &qp.box_set, cfg.oracle.tol)?;
            StationarySet {
                points: vec![p],
                costs: vec![c + agg.value_offset],
                t_z: agg.t_z,
                residual_tol: cfg.oracle.tol,
                dedup_radius: cfg.oracle.dedup_radius,
            }
        } else {
            find_stationary_set(&agg, &qp.box_set, &cfg.oracle)
        };
        if set.is_empty() {
            return Err(TvqpError::Oracle(format!(
                "no stationary points found at t_z = {}",
                agg.t_z
            )));
        }
        let (lambda_hat, _) = estimate_error_bound_constant(&agg, &qp.box_set, &set, 2000);
        lambda_hats.push(lambda_hat);
        sets.push(set);
    }
    let inf_cost = sets
        .iter()
        .filter_map(|s| s.min_cost())
        .fold(f64::INFINITY, f64::min);
    let raise = (-inf_cost).max(0.0);
    let value_offset_used = qp.value_offset + raise;
    qp.value_offset = value_offset_used;
    for set in &mut sets {
        for c in &mut set.costs {
            *c += raise;
        }
    }

    // pass 2: objective constants with the final offset
    let mut ocs = Vec::with_capacity(events);
    let mut f_quads = Vec::with_capacity(events);
    let mut g_quads = Vec::with_capacity(events);
    let mut h_quads = Vec::with_capacity(events);
    for z in 0..events {
        let agg = build_aggregate(&qp, &plan.sample_state(z))?;
        let oc = objective_constants(&agg, &qp, plan.delta);
        let t_z = plan.union_times[z];
        f_quads.push(Quadratic::from_cost(
            &qp.q_at(t_z),
            &qp.r_at(t_z),
            qp.value_offset,
        ));
        g_quads.push(Quadratic::from_cost(
            &agg.q_hat,
            &agg.r_hat,
            agg.value_offset,
        ));
        h_quads.push(envelope_quadratic(qp.n(), oc.m_g_z));
        ocs.push(oc);
    }
    let phi = qp.xi;
    let psi = ocs.iter().map(|oc| oc.l_z).fold(phi * (1.0 + 1e-9), f64::max);
    let u_bar = ocs.iter().map(|oc| oc.m_z).fold(1e-12, f64::max);
    let nu_x = BoundInputs::box_corner_fraction(qp.n());
    let k1_v = k1(qp.n(), nu_x, ocs[0].r_x, ocs[0].d_x, phi);
    let k2_v = k2(&f_quads, &g_quads, &h_quads, &qp.box_set);
    // pass 3: constants blocks with the step-size policy and carry
    let mut rows: Vec<BoundsRow> = Vec::with_capacity(events);
    let mut blocks: Vec<ConstantsBlock> = Vec::with_capacity(events);
    let mut r_seq: Vec<usize> = Vec::with_capacity(events);
    let mut alpha_carry = None;
    for z in 0..events {
        let oc = &ocs[z];
        let r_z = kappa[z] / cfg.b;
        let sigma_hat = if z == 0 {
            0.0
        } else {
            estimate_sigma(&sets[z - 1], &sets[z], &qp.box_set)
        };
        let bi = BoundInputs {
            num_agents: cfg.agents,
            delay_bound: cfg.b,
            dim: qp.n(),
            lambda_z: cfg.lambda_z,
            sigma_z: oc.d_x,
            epsilon_z: Some(estimate_separation(&sets[z])),
            kappa_z: kappa[z],
            r_z,
            phi,
            psi,
            u_bar,
            nu_x,
            alpha_carry,
        };
        let gamma_used = match cfg.gamma {
            crate::bcd_engine::GammaPolicy::Fixed(g) => g,
            crate::bcd_engine::GammaPolicy::Auto { safety } => safety * gamma_max(oc, &bi)?,
        };
        let block = constants_block(oc, &bi, gamma_used)?;
        alpha_carry = Some(block.a_z * block.rho_z.powi(r_z as i32 - 1));
        let tracking = crate::bounds::tracking_error_bound(
            block.a_z,
            block.rho_z,
            r_z,
            k1_v,
            k2_v,
            qp.n(),
            u_bar,
            phi,
        );
        rows.push(BoundsRow {
            z,
            t_z: plan.union_times[z],
            l_z: oc.l_z,
            m_z: oc.m_z,
            gamma_used,
            block,
            r_z,
            accum_total: f64::NAN,
            accum_tail: f64::NAN,
            tracking,
            lambda_hat: lambda_hats[z],
            eps_hat: estimate_separation(&sets[z]),
            sigma_hat,
        });
        blocks.push(block);
        r_seq.push(r_z);
    }
    let accumulated = accumulated_alpha_bound(&blocks, &r_seq);
    for (row, acc) in rows.iter_mut().zip(&accumulated) {
        row.accum_total = acc.total;
        row.accum_tail = acc.tail;
    }

    Ok(BoundsReport {
        rows,
        phi,
        psi,
        u_bar,
        nu_x,
        k1: k1_v,
        k2: k2_v,
        value_offset_used,
    })
}

pub fn write_bounds_csv(path: &Path, report: &BoundsReport) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "z,t_z,L_z,gamma_max,gamma_used,D_z,E_z,F_z,G_z,a_z,b_z,c_z,rho_z,K_z,r_z,accum_bound,accum_tail,tracking_bound,lambda_hat,eps_hat,sigma_hat\n",
    );
    for r in &report.rows {
        let b = &r.block;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.z,
            format_float(r.t_z),
            format_float(r.l_z),
            format_float(b.gamma_max_z),
            format_float(r.gamma_used),
            format_float(b.d_z),
            format_float(b.e_z),
            format_float(b.f_z),
            format_float(b.g_z),
            format_float(b.a_z),
            format_float(b.b_z),
            format_float(b.c_z),
            format_float(b.rho_z),
            format_float(b.k_z),
            r.r_z,
            format_float(r.accum_total),
            format_float(r.accum_tail),
            format_float(r.tracking),
            format_float(r.lambda_hat),
            format_float(r.eps_hat),
            format_float(r.sigma_hat),
        );
    }
    write_atomic(path, &out)
}

/// Human-readable fixed-width bounds table for stdout.
pub fn render_bounds_table(report: &BoundsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "phi={:.6e} psi={:.6e} u_bar={:.6e} nu_x={:.3e} K1={:.6e} K2={:.6e} offset={:.6e}",
        report.phi,
        report.psi,
        report.u_bar,
        report.nu_x,
        report.k1,
        report.k2,
        report.value_offset_used
    );
    let _ = writeln!(
        out,
        "{:>3} {:>8} {:>10} {:>11} {:>11} {:>10} {:>10} {:>12} {:>10} {:>12} {:>12} {:>10} {:>10} {:>10}",
        "z", "t_z", "L_z", "gamma_max", "gamma", "D_z", "rho_z", "a_z", "K_z", "accum", "tracking", "lam_hat", "eps_hat", "sig_hat"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>3} {:>8.3} {:>10.4e} {:>11.4e} {:>11.4e} {:>10.4e} {:>10.8} {:>12.5e} {:>10.4e} {:>12.5e} {:>12.5e} {:>10.4e} {:>10.4e} {:>10.4e}",
            r.z,
            r.t_z,
            r.l_z,
            r.block.gamma_max_z,
            r.gamma_used,
            r.block.d_z,
            r.block.rho_z,
            r.block.a_z,
            r.block.k_z,
            r.accum_total,
            r.tracking,
            r.lambda_hat,
            r.eps_hat,
            r.sigma_hat,
        );
    }
    out
}

// ---------------------------------------------------------------------------
// SVG plots
// ---------------------------------------------------------------------------

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn nice_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Render selected trace columns as an SVG polyline chart. The first column
/// is the x axis; every further column becomes one series.
pub fn plot_csv(csv_path: &Path, out_path: &Path, cols: &[String]) -> Result<()> {
    if cols.len() < 2 {
        return Err(TvqpError::Config(
            "plot needs at least an x column and one series".into(),
        ));
    }
    let text = fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| TvqpError::Config("empty csv".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    let mut idx = Vec::with_capacity(cols.len());
    for c in cols {
        match names.iter().position(|n| n == c) {
            Some(p) => idx.push(p),
            None => {
                return Err(TvqpError::Config(format!(
                    "column `{c}` not found; header has {}",
                    header
                )));
            }
        }
    }
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for (row_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        for (ci, &fi) in idx.iter().enumerate() {
            let v: f64 = fields
                .get(fi)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| {
                    TvqpError::Config(format!("bad value in row {} column {}", row_no + 2, fi))
                })?;
            if !v.is_finite() {
                return Err(TvqpError::Config(format!(
                    "nonfinite value in column `{}` row {}",
                    cols[ci],
                    row_no + 2
                )));
            }
            data[ci].push(v);
        }
    }
    if data[0].is_empty() {
        return Err(TvqpError::Config("csv has no data rows".into()));
    }

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &data[0] {
        x_min = x_min.min(v);
        x_max = x_max.max(v);
    }
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for series in &data[1..] {
        for &v in series {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if x_max == x_min {
        x_max += 1.0;
        x_min -= 1.0;
    }
    if y_max == y_min {
        y_max += 1.0;
        y_min -= 1.0;
    }
    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let sx = |v: f64| MARGIN_L + (v - x_min) / (x_max - x_min) * plot_w;
    let sy = |v: f64| MARGIN_T + (1.0 - (v - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>"
    );
    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        SVG_H - MARGIN_B,
        SVG_W - MARGIN_R,
        SVG_H - MARGIN_B
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>",
        SVG_H - MARGIN_B
    );
    // ticks
    for i in 0..=5 {
        let fx = x_min + (x_max - x_min) * i as f64 / 5.0;
        let px = sx(fx);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.2}\" y1=\"{}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"black\"/>",
            SVG_H - MARGIN_B,
            SVG_H - MARGIN_B + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.2}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            SVG_H - MARGIN_B + 20.0,
            nice_label(fx)
        );
        let fy = y_min + (y_max - y_min) * i as f64 / 5.0;
        let py = sy(fy);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{MARGIN_L}\" y2=\"{py:.2}\" stroke=\"black\"/>",
            MARGIN_L - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            MARGIN_L - 8.0,
            py + 4.0,
            nice_label(fy)
        );
    }
    // axis titles
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        SVG_H - 10.0,
        cols[0]
    );
    // series
    for (si, series) in data[1..].iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut points = String::new();
        for (x, y) in data[0].iter().zip(series) {
            let _ = write!(points, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.trim_end()
        );
        // legend entry
        let ly = MARGIN_T + 16.0 * si as f64 + 10.0;
        let lx = SVG_W - MARGIN_R - 150.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            lx + 24.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"12\">{}</text>",
            lx + 30.0,
            ly + 4.0,
            cols[si + 1]
        );
    }
    svg.push_str("</svg>\n");
    write_atomic(out_path, &svg)
}
