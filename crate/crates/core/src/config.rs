//! Experiment configuration: a flat sectioned key=value text format and the
//! builders that turn a parsed config into problem, plan, schedule, and
//! initial state.
//!
//! Grammar: `[section]` headers, `key = value` pairs, `#` comments, blank
//! lines ignored. Values are scalars, comma lists, or tagged forms like
//! `diag:1,2,3` / `const:100` / `random_range:-30,30`.

use crate::async_schedule::{generate_sampling, generate_schedule, AsyncSchedule, CommMask, SamplingPlan};
use crate::bcd_engine::{EngineConfig, GammaPolicy};
use crate::error::{Result, TvqpError};
use crate::linalg::Mat;
use crate::oracle::OracleSettings;
use crate::qp_model::{
    BlockPartition, BoxConstraint, GradientMode, QpFamily, ReferenceCurve, TimeVaryingQp,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Raw parsed file: section -> key -> (value, line number).
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    pub path: String,
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl RawConfig {
    pub fn parse_str(path: &str, text: &str) -> Result<RawConfig> {
        let mut cfg = RawConfig {
            path: path.to_string(),
            sections: BTreeMap::new(),
        };
        let mut current = String::from("");
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(TvqpError::ConfigParse {
                        path: path.to_string(),
                        line: line_no,
                        msg: "malformed section header".into(),
                    });
                }
                current = line[1..line.len() - 1].trim().to_string();
                cfg.sections.entry(current.clone()).or_default();
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(TvqpError::ConfigParse {
                    path: path.to_string(),
                    line: line_no,
                    msg: "expected `key = value`".into(),
                });
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(TvqpError::ConfigParse {
                    path: path.to_string(),
                    line: line_no,
                    msg: "empty key or value".into(),
                });
            }
            cfg.sections
                .entry(current.clone())
                .or_default()
                .insert(key, (value, line_no));
        }
        Ok(cfg)
    }

    pub fn parse_file(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)?;
        RawConfig::parse_str(&path.display().to_string(), &text)
    }

    fn get(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn err(&self, section: &str, key: &str, msg: &str) -> TvqpError {
        let line = self.get(section, key).map(|(_, l)| *l).unwrap_or(0);
        TvqpError::ConfigParse {
            path: self.path.clone(),
            line,
            msg: format!("[{section}] {key}: {msg}"),
        }
    }

    pub fn str_opt(&self, section: &str, key: &str) -> Option<String> {
        self.get(section, key).map(|(v, _)| v.clone())
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, _)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.err(section, key, "not a number")),
        }
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    pub fn usize_opt(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, _)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| self.err(section, key, "not a nonnegative integer")),
        }
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize_opt(section, key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            None => Ok(default),
            Some((v, _)) => v
                .parse::<u64>()
                .map_err(|_| self.err(section, key, "not a nonnegative integer")),
        }
    }

    /// Scalar broadcast or comma list of exactly `len` numbers.
    pub fn f64_list_or(&self, section: &str, key: &str, len: usize, default: f64) -> Result<Vec<f64>> {
        match self.get(section, key) {
            None => Ok(vec![default; len]),
            Some((v, _)) => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                let nums: std::result::Result<Vec<f64>, _> =
                    parts.iter().map(|p| p.parse::<f64>()).collect();
                let nums = nums.map_err(|_| self.err(section, key, "not a number list"))?;
                if nums.len() == 1 {
                    Ok(vec![nums[0]; len])
                } else if nums.len() == len {
                    Ok(nums)
                } else {
                    Err(self.err(
                        section,
                        key,
                        &format!("expected 1 or {len} entries, got {}", nums.len()),
                    ))
                }
            }
        }
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), (value.to_string(), 0));
    }
}

/// Initial-state policies.
#[derive(Debug, Clone, PartialEq)]
pub enum X0Policy {
    Zero,
    RandomInBox,
    RandomRange(f64, f64),
    Explicit(Vec<f64>),
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    // problem
    pub family: String,
    pub agents: usize,
    pub block_size: usize,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub xi_override: Option<f64>,
    pub value_offset: f64,
    pub q0_spec: String,
    pub cos_amp_spec: String,
    pub sin_amp_spec: String,
    pub omega: f64,
    pub r0_spec: String,
    pub r_freq: f64,
    pub q_scale: f64,
    pub curve: ReferenceCurve,
    // schedule
    pub t_s: f64,
    pub horizon: f64,
    pub p_sample: Vec<f64>,
    pub p_update: f64,
    pub p_comm: f64,
    pub b: usize,
    pub kappa: Vec<usize>,
    pub comm_mask_from_pattern: bool,
    // run
    pub gamma: GammaPolicy,
    pub mode: GradientMode,
    pub x0: X0Policy,
    pub with_oracle: bool,
    pub eval_bounds: bool,
    // oracle
    pub oracle: OracleSettings,
    pub lambda_z: f64,
    // consensus
    pub consensus_gamma: Option<f64>,
    pub consensus_topology: String,
    // output
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig> {
        let agents = raw.usize_or("problem", "agents", 2)?;
        let block_size = raw.usize_or("problem", "block_size", 1)?;
        if agents == 0 || block_size == 0 {
            return Err(raw.err("problem", "agents", "agents and block_size must be >= 1"));
        }
        let n = agents * block_size;
        let box_lo = raw.f64_list_or("problem", "box_lo", n, -100.0)?;
        let box_hi = raw.f64_list_or("problem", "box_hi", n, 100.0)?;

        let p_sample = raw.f64_list_or("schedule", "p_sample", agents, 0.5)?;
        if p_sample.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(raw.err("schedule", "p_sample", "must lie in (0, 1]"));
        }
        let p_update = raw.f64_or("schedule", "p_update", 0.6)?;
        let p_comm = raw.f64_or("schedule", "p_comm", 0.6)?;
        // 0 means forced-only events; still valid under the delay bound
        for (name, p) in [("p_update", p_update), ("p_comm", p_comm)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(raw.err("schedule", name, "must lie in [0, 1]"));
            }
        }
        let b = raw.usize_or("schedule", "B", 1)?;
        if b == 0 {
            return Err(raw.err("schedule", "B", "must be >= 1"));
        }

        let t_s = raw.f64_or("schedule", "t_s", 1.0)?;
        let horizon = raw.f64_or("schedule", "horizon", 10.0)?;
        let events = if t_s > 0.0 {
            (horizon / t_s).floor() as usize + 1
        } else {
            0
        };
        let kappa = match raw.str_opt("schedule", "kappa") {
            None => vec![100; events.max(1)],
            Some(v) => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                let nums: std::result::Result<Vec<usize>, _> =
                    parts.iter().map(|p| p.parse::<usize>()).collect();
                let nums = nums.map_err(|_| raw.err("schedule", "kappa", "not an integer list"))?;
                if nums.iter().any(|&kz| kz == 0) {
                    return Err(raw.err("schedule", "kappa", "entries must be >= 1"));
                }
                nums
            }
        };

        let gamma = match raw.str_opt("run", "gamma").as_deref() {
            None => GammaPolicy::Fixed(1e-3),
            Some("auto") => GammaPolicy::Auto {
                safety: raw.f64_or("run", "gamma_safety", 0.9)?,
            },
            Some(v) => {
                let g: f64 = v
                    .parse()
                    .map_err(|_| raw.err("run", "gamma", "expected a number or `auto`"))?;
                if g <= 0.0 {
                    return Err(raw.err("run", "gamma", "must be positive"));
                }
                GammaPolicy::Fixed(g)
            }
        };
        let mode = match raw.str_opt("run", "mode").as_deref() {
            None | Some("literal") => GradientMode::Literal,
            Some("symmetrized") => GradientMode::Symmetrized,
            Some(other) => {
                return Err(raw.err("run", "mode", &format!("unknown mode `{other}`")));
            }
        };
        let x0 = match raw.str_opt("run", "x0").as_deref() {
            None | Some("zero") => X0Policy::Zero,
            Some("random") => X0Policy::RandomInBox,
            Some(v) if v.starts_with("random_range:") => {
                let rest = &v["random_range:".len()..];
                let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(raw.err("run", "x0", "random_range needs `lo,hi`"));
                }
                let lo: f64 = parts[0]
                    .parse()
                    .map_err(|_| raw.err("run", "x0", "bad range"))?;
                let hi: f64 = parts[1]
                    .parse()
                    .map_err(|_| raw.err("run", "x0", "bad range"))?;
                X0Policy::RandomRange(lo, hi)
            }
            Some(v) if v.starts_with("list:") => {
                let rest = &v["list:".len()..];
                let nums: std::result::Result<Vec<f64>, _> =
                    rest.split(',').map(|p| p.trim().parse::<f64>()).collect();
                X0Policy::Explicit(nums.map_err(|_| raw.err("run", "x0", "bad list"))?)
            }
            Some(other) => {
                return Err(raw.err("run", "x0", &format!("unknown x0 policy `{other}`")));
            }
        };

        let oracle = OracleSettings {
            multistarts: raw.usize_or("oracle", "multistarts", 64)?,
            tol: raw.f64_or("oracle", "tol", 1e-10)?,
            dedup_radius: raw.f64_or("oracle", "dedup_radius", 1e-6)?,
            max_iters: raw.usize_or("oracle", "max_iters", 2_000_000)?,
        };

        Ok(ExperimentConfig {
            seed: raw.u64_or("run", "seed", 0)?,
            family: raw
                .str_opt("problem", "family")
                .unwrap_or_else(|| "modulated".into()),
            agents,
            block_size,
            box_lo,
            box_hi,
            xi_override: raw.f64_opt("problem", "xi")?,
            value_offset: raw.f64_or("problem", "value_offset", 0.0)?,
            q0_spec: raw
                .str_opt("problem", "q0")
                .unwrap_or_else(|| "random_spd".into()),
            cos_amp_spec: raw
                .str_opt("problem", "cos_amp")
                .unwrap_or_else(|| "identity:1".into()),
            sin_amp_spec: raw
                .str_opt("problem", "sin_amp")
                .unwrap_or_else(|| "zero".into()),
            omega: raw.f64_or("problem", "omega", 0.1)?,
            r0_spec: raw
                .str_opt("problem", "r0")
                .unwrap_or_else(|| "const:100".into()),
            r_freq: raw.f64_or("problem", "r_freq", 2.0)?,
            q_scale: raw.f64_or("problem", "q_scale", 10.0)?,
            curve: ReferenceCurve {
                amp_x: raw.f64_or("problem", "ref_amp_x", 100.0)?,
                amp_y: raw.f64_or("problem", "ref_amp_y", 100.0)?,
                omega: raw.f64_or("problem", "ref_omega", 0.01)?,
                freq_y: raw.f64_or("problem", "ref_freq_y", 3.0)?,
            },
            t_s,
            horizon,
            p_sample,
            p_update,
            p_comm,
            b,
            kappa,
            comm_mask_from_pattern: matches!(
                raw.str_opt("schedule", "comm_mask").as_deref(),
                Some("pattern")
            ),
            gamma,
            mode,
            x0,
            with_oracle: raw.str_opt("run", "alpha").as_deref() != Some("off"),
            eval_bounds: raw.str_opt("run", "eval_bounds").as_deref() == Some("on"),
            oracle,
            lambda_z: raw.f64_or("oracle", "lambda", 1.0)?,
            consensus_gamma: raw.f64_opt("consensus", "gamma")?,
            consensus_topology: raw
                .str_opt("consensus", "topology")
                .unwrap_or_else(|| "complete".into()),
            out_dir: PathBuf::from(raw.str_opt("output", "dir").unwrap_or_else(|| "out".into())),
        })
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(&RawConfig::parse_file(path)?)
    }

    pub fn n(&self) -> usize {
        self.agents * self.block_size
    }

    // derived seeds keep the independent random streams reproducible
    pub fn seed_sampling(&self) -> u64 {
        self.seed
    }
    pub fn seed_schedule(&self) -> u64 {
        self.seed.wrapping_add(1)
    }
    pub fn seed_x0(&self) -> u64 {
        self.seed.wrapping_add(2)
    }
    pub fn seed_problem(&self) -> u64 {
        self.seed.wrapping_add(3)
    }

    fn parse_matrix_spec(&self, spec: &str, n: usize, rng: &mut ChaCha8Rng) -> Result<Mat> {
        if spec == "zero" {
            return Ok(Mat::zeros(n, n));
        }
        if spec == "random_spd" {
            // tall M keeps lambda_min(M^T M) well away from zero, so the
            // cosine modulation cannot drain the strong convexity
            let rows = 2 * n;
            let mut m = Mat::zeros(rows, n);
            for i in 0..rows {
                for j in 0..n {
                    m[(i, j)] = rng.sample::<f64, _>(StandardNormal);
                }
            }
            let q = m.transpose().matmul(&m).add(&Mat::identity(n));
            return Ok(q.symmetric_part());
        }
        if let Some(rest) = spec.strip_prefix("identity:") {
            let scale: f64 = rest
                .trim()
                .parse()
                .map_err(|_| TvqpError::Config(format!("bad identity scale in `{spec}`")))?;
            return Ok(Mat::identity(n).scale(scale));
        }
        if let Some(rest) = spec.strip_prefix("diag:") {
            let nums: std::result::Result<Vec<f64>, _> =
                rest.split(',').map(|p| p.trim().parse::<f64>()).collect();
            let nums =
                nums.map_err(|_| TvqpError::Config(format!("bad diagonal list in `{spec}`")))?;
            if nums.len() != n {
                return Err(TvqpError::Config(format!(
                    "diag needs {n} entries, got {}",
                    nums.len()
                )));
            }
            let mut m = Mat::zeros(n, n);
            for (i, v) in nums.into_iter().enumerate() {
                m[(i, i)] = v;
            }
            return Ok(m);
        }
        Err(TvqpError::Config(format!("unknown matrix spec `{spec}`")))
    }

    fn parse_vector_spec(&self, spec: &str, n: usize) -> Result<Vec<f64>> {
        if spec == "zero" {
            return Ok(vec![0.0; n]);
        }
        if let Some(rest) = spec.strip_prefix("const:") {
            let v: f64 = rest
                .trim()
                .parse()
                .map_err(|_| TvqpError::Config(format!("bad constant in `{spec}`")))?;
            return Ok(vec![v; n]);
        }
        if let Some(rest) = spec.strip_prefix("list:") {
            let nums: std::result::Result<Vec<f64>, _> =
                rest.split(',').map(|p| p.trim().parse::<f64>()).collect();
            let nums = nums.map_err(|_| TvqpError::Config(format!("bad list in `{spec}`")))?;
            if nums.len() != n {
                return Err(TvqpError::Config(format!(
                    "list needs {n} entries, got {}",
                    nums.len()
                )));
            }
            return Ok(nums);
        }
        Err(TvqpError::Config(format!("unknown vector spec `{spec}`")))
    }

    /// Instantiate the time-varying QP (seeded where the family is random).
    pub fn build_problem(&self) -> Result<TimeVaryingQp> {
        let n = self.n();
        let partition = BlockPartition::uniform(self.agents, self.block_size)?;
        let box_set = BoxConstraint::new(self.box_lo.clone(), self.box_hi.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed_problem());

        let family = match self.family.as_str() {
            "constant" => QpFamily::Constant {
                q0: self.parse_matrix_spec(&self.q0_spec, n, &mut rng)?,
                r0: self.parse_vector_spec(&self.r0_spec, n)?,
            },
            "modulated" => QpFamily::Modulated {
                q0: self.parse_matrix_spec(&self.q0_spec, n, &mut rng)?,
                cos_amp: self.parse_matrix_spec(&self.cos_amp_spec, n, &mut rng)?,
                sin_amp: self.parse_matrix_spec(&self.sin_amp_spec, n, &mut rng)?,
                omega: self.omega,
                r0: self.parse_vector_spec(&self.r0_spec, n)?,
                r_freq: self.r_freq,
            },
            "tracking" => {
                if self.block_size != 2 {
                    return Err(TvqpError::Config(
                        "tracking family needs block_size = 2".into(),
                    ));
                }
                QpFamily::Tracking {
                    q_scale: self.q_scale,
                    curve: self.curve.clone(),
                }
            }
            other => {
                return Err(TvqpError::Config(format!("unknown family `{other}`")));
            }
        };

        let xi = match self.xi_override {
            Some(v) => v,
            None => estimate_xi(&family, &partition, self.horizon)?,
        };
        let mut qp = TimeVaryingQp::new(partition, box_set, family, xi)?;
        qp.value_offset = self.value_offset;
        qp.validate_on_grid(self.horizon.max(self.t_s), 100)?;
        Ok(qp)
    }

    pub fn build_plan(&self) -> Result<SamplingPlan> {
        generate_sampling(self.seed_sampling(), self.t_s, self.horizon, &self.p_sample)
    }

    pub fn build_schedule(&self, plan: &SamplingPlan, qp: &TimeVaryingQp) -> Result<AsyncSchedule> {
        let events = plan.num_events();
        let kappa: Vec<usize> = if self.kappa.len() == 1 {
            vec![self.kappa[0]; events]
        } else if self.kappa.len() == events {
            self.kappa.clone()
        } else {
            return Err(TvqpError::Config(format!(
                "kappa has {} entries but the plan realizes {events} sample events",
                self.kappa.len()
            )));
        };
        let mask = if self.comm_mask_from_pattern {
            let q0 = qp.q_at(0.0);
            Some(CommMask::from_block_pattern(&q0, &qp.partition))
        } else {
            None
        };
        generate_schedule(
            self.seed_schedule(),
            self.agents,
            self.b,
            &kappa,
            self.p_update,
            self.p_comm,
            mask,
        )
    }

    pub fn build_x0(&self, qp: &TimeVaryingQp) -> Result<Vec<f64>> {
        let n = qp.n();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed_x0());
        let x0 = match &self.x0 {
            X0Policy::Zero => qp.box_set.project(&vec![0.0; n]),
            X0Policy::RandomInBox => (0..n)
                .map(|j| rng.random_range(qp.box_set.lo()[j]..qp.box_set.hi()[j]))
                .collect(),
            X0Policy::RandomRange(lo, hi) => {
                // rejects NaN endpoints as well as inverted ranges
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                if !(lo < hi) {
                    return Err(TvqpError::Config("x0 range must satisfy lo < hi".into()));
                }
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(*lo..*hi)).collect();
                qp.box_set.project(&raw)
            }
            X0Policy::Explicit(v) => {
                if v.len() != n {
                    return Err(TvqpError::Config(format!(
                        "x0 list needs {n} entries, got {}",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if !qp.box_set.contains(&x0, 1e-12) {
            return Err(TvqpError::Config("x0 must lie in the box".into()));
        }
        Ok(x0)
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            mode: self.mode,
            gamma: self.gamma,
            oracle: self.with_oracle.then(|| self.oracle.clone()),
            lambda_z: self.lambda_z,
            eval_bounds: self.eval_bounds,
            record_views: false,
        }
    }
}

/// Strong-convexity floor for a family: analytic when the modulation norms
/// allow it, otherwise the grid minimum shaved by 1%.
fn estimate_xi(family: &QpFamily, partition: &BlockPartition, horizon: f64) -> Result<f64> {
    let n = partition.n();
    let probe = TimeVaryingQp {
        partition: partition.clone(),
        box_set: BoxConstraint::symmetric(n, 1.0)?,
        family: family.clone(),
        xi: 1.0,
        value_offset: 0.0,
    };
    let steps = 200;
    let mut min_eig = f64::INFINITY;
    for s in 0..=steps {
        let t = horizon.max(1.0) * s as f64 / steps as f64;
        let (eigs, _) = crate::linalg::jacobi_eigenvalues(&probe.q_at(t));
        min_eig = min_eig.min(*eigs.last().unwrap());
    }
    if min_eig <= 0.0 {
        return Err(TvqpError::Config(format!(
            "family is not uniformly positive definite (grid min eigenvalue {min_eig})"
        )));
    }
    Ok(min_eig * 0.99)
}
