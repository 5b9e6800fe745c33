//! The experiment subcommands.

use std::time::Instant;

use clap::ValueEnum;
use fpp_core::engine::{brute_force_front, geodesic, layer_passage_times, skeleton_passage_time, EngineError};
use fpp_core::exec::SeedMap;
use fpp_core::field::{FieldError, WeightField};
use fpp_core::nearly_gamma::{exp_moment_check, nearly_gamma_scan, sufficient_condition_check, FitWindow, GridSpec};
use fpp_core::scaling::{
    dyadic_checks, estimate_h_n, estimate_time_constant, excess_mean_field, fluctuation_fit, passage_samples, rate_fit, select_corner, ExcessTable, MeanSeries, ScalingError,
    TimeConstantEstimate,
};
use fpp_core::skeleton::{augmented_skeleton, cg_approx_skeleton, classify_blocks, climbing_skeleton, skeleton_count_bound_check, t_skel_cg, CoarseParams, SkeletonError};
use fpp_core::{LatticePath, Site};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::exec::Pool;
use crate::output::{coord_header, header, opt, FileEntry, OutputDir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Simulate,
    Mu,
    RateFit,
    Fluctuations,
    ExcessField,
    NearlyGamma,
    SkeletonStats,
    OracleCheck,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn config_err(key: &'static str, reason: impl ToString) -> RunError {
    RunError::Config(ConfigError::Invalid { key, reason: reason.to_string() })
}

impl From<ScalingError> for RunError {
    fn from(e: ScalingError) -> Self {
        match e {
            ScalingError::OddLength(_) => config_err("n", e),
            ScalingError::Unreachable { .. } | ScalingError::Engine(EngineError::Unreachable { .. }) => config_err("x", e),
            ScalingError::Field(FieldError::Dimension(_)) => config_err("d", e),
            other => RunError::Numeric(other.to_string()),
        }
    }
}

impl From<EngineError> for RunError {
    fn from(e: EngineError) -> Self {
        ScalingError::Engine(e).into()
    }
}

impl From<FieldError> for RunError {
    fn from(e: FieldError) -> Self {
        ScalingError::Field(e).into()
    }
}

impl From<SkeletonError> for RunError {
    fn from(e: SkeletonError) -> Self {
        match e {
            SkeletonError::Scaling(s) => s.into(),
            SkeletonError::Engine(s) => s.into(),
            SkeletonError::ZeroGrid { .. } => config_err("h_n", e),
            SkeletonError::InnerLength { .. } => config_err("n1", e),
            SkeletonError::BlockLength(_) => config_err("n", e),
            SkeletonError::BlockCount => config_err("k", e),
            other => RunError::Numeric(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: Subcommand,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    pub files: Vec<FileEntry>,
}

/// Runs one subcommand, writing its outputs and `manifest.json` into
/// `config.out`.
pub fn run(sub: Subcommand, cfg: &ExperimentConfig) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let pool = Pool::new(cfg.workers).map_err(|e| RunError::Numeric(e.to_string()))?;
    let mut out = OutputDir::create(&cfg.out)?;
    match sub {
        Subcommand::Simulate => simulate(cfg, &pool, &mut out)?,
        Subcommand::Mu => mu(cfg, &pool, &mut out)?,
        Subcommand::RateFit => rate(cfg, &pool, &mut out)?,
        Subcommand::Fluctuations => fluctuations(cfg, &pool, &mut out)?,
        Subcommand::ExcessField => excess_field(cfg, &pool, &mut out)?,
        Subcommand::NearlyGamma => nearly_gamma(cfg, &mut out)?,
        Subcommand::SkeletonStats => skeleton_stats(cfg, &pool, &mut out)?,
        Subcommand::OracleCheck => oracle_check(cfg, &pool, &mut out)?,
    }
    let manifest = RunManifest {
        tool: "fpp",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: sub,
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: out.files().to_vec(),
    };
    let mut text = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?;
    text.push(b'\n');
    std::fs::write(out.root().join("manifest.json"), text)?;
    Ok(manifest)
}

fn samples(cfg: &ExperimentConfig) -> Result<usize, RunError> {
    usize::try_from(cfg.samples).map_err(|_| config_err("samples", "too large"))
}

fn zeros(cfg: &ExperimentConfig) -> Vec<i32> {
    vec![0; cfg.d]
}

fn write_series(out: &mut OutputDir, series: &MeanSeries) -> std::io::Result<()> {
    let rows = series.entries.iter().map(|e| vec![e.n.to_string(), e.mean.to_string(), e.stderr.to_string(), e.samples.to_string()]);
    out.write_csv("series.csv", &header(&["n", "mean", "stderr", "samples"]), rows)
}

fn series(cfg: &ExperimentConfig, pool: &Pool, x: &[i32]) -> Result<MeanSeries, RunError> {
    let s = samples(cfg)?;
    if s < 2 {
        return Err(config_err("samples", "at least 2 samples are needed for standard errors"));
    }
    Ok(MeanSeries::from_matrix(&passage_samples(pool, &cfg.law, cfg.d, &cfg.n, x, s, cfg.seed)?))
}

fn simulate(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutputDir) -> Result<(), RunError> {
    let m = passage_samples(pool, &cfg.law, cfg.d, &cfg.n, &cfg.x, samples(cfg)?, cfg.seed)?;
    let rows = m.rows.iter().enumerate().flat_map(|(i, row)| {
        let seed = cfg.seed.wrapping_add(i as u64);
        m.ns.iter().zip(row).map(move |(n, v)| vec![seed.to_string(), n.to_string(), v.to_string()])
    });
    out.write_csv("samples.csv", &header(&["seed", "n", "value"]), rows)?;
    write_series(out, &MeanSeries::from_matrix(&m))?;
    Ok(())
}

fn mu(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutputDir) -> Result<(), RunError> {
    let s = series(cfg, pool, &zeros(cfg))?;
    write_series(out, &s)?;
    let est = estimate_time_constant(&s)?;
    out.write_json("mu.json", &json!({ "estimate": est, "dyadic_checks": dyadic_checks(&s) }))?;
    Ok(())
}

fn rate(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutputDir) -> Result<(), RunError> {
    let s = series(cfg, pool, &zeros(cfg))?;
    write_series(out, &s)?;
    let est = estimate_time_constant(&s)?;
    let fit = rate_fit(&s, &est)?;
    out.write_json("ratefit.json", &json!({ "mu": est, "fit": fit }))?;
    Ok(())
}

fn fluctuations(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutputDir) -> Result<(), RunError> {
    let s = series(cfg, pool, &zeros(cfg))?;
    write_series(out, &s)?;
    let fit = fluctuation_fit(&s)?;
    let rows = fit.entries.iter().map(|e| vec![e.n.to_string(), e.stddev.to_string(), e.log_scale_ratio.to_string()]);
    out.write_csv("fluctuations.csv", &header(&["n", "stddev", "log_scale_ratio"]), rows)?;
    out.write_json("fluctuations.json", &json!({ "chi_hat": fit.chi_hat, "intercept": fit.intercept, "log_scale_spread": fit.log_scale_spread }))?;
    Ok(())
}

fn mu_estimate(cfg: &ExperimentConfig, pool: &Pool) -> Result<TimeConstantEstimate, RunError> {
    let s = passage_samples(pool, &cfg.law, cfg.d, &[cfg.mu_n], &zeros(cfg), cfg.mu_samples as usize, cfg.seed)?;
    Ok(estimate_time_constant(&MeanSeries::from_matrix(&s))?)
}

fn excess_field(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutputDir) -> Result<(), RunError> {
    let mu = mu_estimate(cfg, pool)?;
    let mut cells = Vec::new();
    let mut pairs = Vec::new();
    let mut shells = Vec::new();
    for &n in &cfg.n {
        let f = excess_mean_field(pool, &cfg.law, cfg.d, n, cfg.window, samples(cfg)?, cfg.seed, &mu)?;
        for c in &f.cells {
            let mut row = vec![n.to_string()];
            row.extend(c.x.iter().map(|v| v.to_string()));
            row.extend([c.s_hat.to_string(), c.stderr.to_string()]);
            cells.push(row);
        }
        for p in &f.pairs {
            let mut row = vec![n.to_string()];
            row.extend(p.x.iter().map(|v| v.to_string()));
            row.extend([p.diff.to_string(), p.joint_stderr.to_string(), p.paired_stderr.to_string()]);
            pairs.push(row);
        }
        if n >= 16 {
            let h = estimate_h_n(&f)?;
            let corner = select_corner(&f, &h);
            shells.push(json!({ "n": n, "estimate": h, "corner": corner.as_ref().map(|c| &c.0), "margin": corner.map(|c| c.1) }));
        }
    }
    let mut head = vec!["n".to_string()];
    head.extend(coord_header(cfg.d));
    let mut cell_head = head.clone();
    cell_head.extend(header(&["s_hat", "stderr"]));
    out.write_csv("excess_field.csv", &cell_head, cells)?;
    head.extend(header(&["diff", "joint_stderr", "paired_stderr"]));
    out.write_csv("symmetry.csv", &head, pairs)?;
    out.write_json("excess_summary.json", &json!({ "mu": mu, "h_n": shells }))?;
    Ok(())
}

fn nearly_gamma(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let law = &cfg.law;
    let default = GridSpec::for_law(law, cfg.grid_count);
    let (y_min, y_max) = (cfg.grid_min.unwrap_or(default.y_min), cfg.grid_max.unwrap_or(default.y_max));
    let grid = GridSpec::new(y_min, y_max, cfg.grid_count);
    let scan = match (nearly_gamma_scan(law, grid, cfg.a_max), nearly_gamma_scan(law, grid.refined(), cfg.a_max)) {
        (Ok(r), Ok(fine)) => {
            let stability = (fine.a_fit - r.a_fit).abs() / r.a_fit;
            let rows = r.grid.iter().map(|(y, u)| vec![y.to_string(), u.to_string()]);
            out.write_csv("upsilon.csv", &header(&["y", "upsilon"]), rows)?;
            json!({
                "pass": r.pass,
                "reason": r.reason(),
                "a_fit": r.a_fit,
                "a_fit_refined": fine.a_fit,
                "relative_change": stability,
                "interval_connected": r.interval_connected,
                "continuity_flag": r.continuity_flag,
                "undefined_points": r.failures.len(),
            })
        }
        (Err(e), _) | (_, Err(e)) => json!({ "pass": false, "reason": e.to_string() }),
    };
    let suff = sufficient_condition_check(law, FitWindow::default());
    let moment = exp_moment_check(law, 0.5, law.quantile(1.0 - 1e-6).max(1.0)).map(|m| json!({ "t": 0.5, "finite": m.finite, "value": m.value, "tail": m.tail, "decay": m.decay }));
    out.write_json(
        "nearly_gamma.json",
        &json!({
            "law": law.to_string(),
            "grid": { "y_min": y_min, "y_max": y_max, "count": cfg.grid_count },
            "a_max": cfg.a_max,
            "scan": scan,
            "sufficient_condition": {
                "condition": suff.condition, "alpha": suff.alpha, "beta": suff.beta, "diagnostic": suff.diagnostic,
            },
            "exp_moment": moment.unwrap_or_else(|e| json!({ "error": e.to_string() })),
        }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct GeodesicRecord {
    seed: u64,
    excessive: usize,
    sidestep: usize,
    t_path: f64,
    t_skel_aug: f64,
    t_skel_cg: Option<f64>,
    roundtrip: bool,
    estimated: bool,
    long_segments: usize,
    short_segments: usize,
    clean_short: usize,
    n_sigma: usize,
    slow_sigma: usize,
    #[serde(skip)]
    dump: Option<Value>,
    #[serde(skip)]
    cg_tuples: Vec<fpp_core::skeleton::CgTuple>,
}

fn skeleton_stats(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutputDir) -> Result<(), RunError> {
    let (d, n, k) = (cfg.d, cfg.n[0], cfg.k);
    let mu = mu_estimate(cfg, pool)?;
    let radius = cfg.h_cap.min(n);
    let field = excess_mean_field(pool, &cfg.law, d, n, radius, cfg.mu_samples as usize, cfg.seed, &mu)?;
    let (h_n, corner, h_report) = match cfg.h_n {
        Some(h) => {
            let mut x = vec![0; d];
            x[0] = h;
            if (n + h) % 2 != 0 {
                if d == 1 {
                    return Err(config_err("h_n", format!("h_n={h} has the wrong parity for n={n} in d=1")));
                }
                x[1] = 1;
            }
            (h, x, json!({ "h_n": h, "source": "config" }))
        }
        None => {
            let est = estimate_h_n(&field)?;
            let (x, margin) = select_corner(&field, &est).ok_or_else(|| RunError::Numeric("no unexcessive corner found".into()))?;
            let report = json!({ "h_n": est.h_n, "source": "estimated", "capped": est.capped, "shells_scanned": est.shells_scanned, "threshold": est.threshold, "corner": x, "margin": margin });
            (est.h_n, x, report)
        }
    };
    let params = CoarseParams::new(d, n, k, h_n, cfg.n1, cfg.c3)?;
    let short_max = (2 * n as u64 / params.phi) as i32;
    let mut table = ExcessTable::default();
    for m in 1..=short_max.max(1) {
        table.insert(excess_mean_field(pool, &cfg.law, d, m, m, cfg.mu_samples as usize, cfg.seed, &mu)?);
    }
    let block_target = Site::new(i32::try_from(k as i64 * i64::from(n)).map_err(|_| config_err("k", "k·n overflows"))?, vec![0; d]);
    let climb_target = Site::new(n, corner.clone());
    let origin = Site::origin(d);
    let records = pool.map_seeds(0..cfg.geodesics, |i| {
        let seed = cfg.seed.wrapping_add(i);
        let w = WeightField::new(seed, cfg.law.clone(), d)?;
        let g = geodesic(&w, &origin, &block_target)?;
        let path: LatticePath = g.geodesic.expect("geodesic requested");
        let classes = classify_blocks(&path, &params, &field)?;
        let cg = cg_approx_skeleton(&path, &params, &classes)?;
        let aug = augmented_skeleton(&path, &params, &classes)?;
        let t_skel_aug = skeleton_passage_time(&w, &aug.segments())?;
        let t_cg = t_skel_cg(&w, &cg)?;
        let roundtrip = cg.sidestep_blocks(h_n) == classes.sidestep && cg.excessive_blocks() == classes.excessive;
        let climb_path = geodesic(&w, &origin, &climb_target)?.geodesic.expect("geodesic requested");
        let climb = climbing_skeleton(&climb_path, params.u_n, &table, cfg.c3)?;
        let short = climb.segments.len() - climb.long_count();
        let dump = cfg.dump_skeletons.then(|| json!({ "seed": seed, "classification": classes, "cg": cg, "augmented": aug, "climbing": climb }));
        Ok::<_, RunError>(GeodesicRecord {
            seed,
            excessive: classes.excessive.len(),
            sidestep: classes.sidestep.len(),
            t_path: g.value,
            t_skel_aug,
            t_skel_cg: t_cg,
            roundtrip,
            estimated: classes.estimated || climb.estimated,
            long_segments: climb.long_count(),
            short_segments: short,
            clean_short: climb.segments.iter().filter(|s| s.clean == Some(true)).count(),
            n_sigma: climb.n_sigma(),
            slow_sigma: climb.slow_sigma_increments,
            dump,
            cg_tuples: cg.tuples,
        })
    });
    let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
    let b = params.b_nk();
    let rows = records.iter().map(|r| {
        vec![r.seed.to_string(), k.to_string(), n.to_string(), r.excessive.to_string(), r.sidestep.to_string(), b.to_string(), r.t_path.to_string(), r.t_skel_aug.to_string(), opt(r.t_skel_cg)]
    });
    out.write_csv("skeleton_stats.csv", &header(&["seed", "k", "n", "e_ex", "e_side", "b_nk", "t_path", "t_skel_aug", "t_skel_cg"]), rows)?;
    let rows = records.iter().map(|r| {
        vec![r.seed.to_string(), r.long_segments.to_string(), r.short_segments.to_string(), r.clean_short.to_string(), r.n_sigma.to_string(), r.slow_sigma.to_string(), r.estimated.to_string()]
    });
    out.write_csv("climbing.csv", &header(&["seed", "long", "short", "clean_short", "n_sigma", "slow_sigma", "estimated"]), rows)?;
    let counts = count_checks(&params, records.first().map(|r| r.cg_tuples.as_slice()).unwrap_or(&[]));
    match &counts {
        Ok(rows) => out.write_csv(
            "counts.csv",
            &header(&["j", "in_b", "enumerated", "bound", "ok", "interp_count", "interp_h_bound", "interp_n_bound", "within_h_bound", "within_n_bound"]),
            rows.clone(),
        )?,
        Err(_) => {}
    }
    let count = records.len().max(1) as f64;
    let summary = json!({
        "params": params,
        "h_n": h_report,
        "mu": mu,
        "geodesics": records.len(),
        "mean_exceptional_fraction": records.iter().map(|r| (r.excessive + r.sidestep) as f64 / k as f64).sum::<f64>() / count,
        "roundtrip_all": records.iter().all(|r| r.roundtrip),
        "aug_below_path_all": records.iter().all(|r| r.t_skel_aug <= r.t_path),
        "long_within_half_phi_all": records.iter().all(|r| 2 * r.long_segments as u64 <= params.phi),
        "count_checks": match &counts {
            Ok(rows) => json!({ "all_ok": rows.iter().all(|r| r[4] == "true" && (r[8].is_empty() || r[8] == "true")) }),
            Err(e) => json!({ "skipped": e.to_string() }),
        },
    });
    out.write_json("skeleton_summary.json", &summary)?;
    if cfg.dump_skeletons {
        let dumps: Vec<&Value> = records.iter().filter_map(|r| r.dump.as_ref()).collect();
        out.write_json("skeletons.json", &dumps)?;
    }
    Ok(())
}

fn count_checks(params: &CoarseParams, prefix: &[fpp_core::skeleton::CgTuple]) -> Result<Vec<Vec<String>>, SkeletonError> {
    let mut rows = Vec::new();
    for j in 1..=params.k.min(4) {
        for in_b in [false, true] {
            let c = skeleton_count_bound_check(params, prefix, j, in_b)?;
            let i = c.interpolation.as_ref();
            rows.push(vec![
                j.to_string(),
                in_b.to_string(),
                c.enumerated.to_string(),
                c.bound.to_string(),
                c.ok.to_string(),
                i.map(|v| v.count.to_string()).unwrap_or_default(),
                i.map(|v| v.h_bound.to_string()).unwrap_or_default(),
                i.map(|v| v.n_bound.to_string()).unwrap_or_default(),
                i.map(|v| v.within_h_bound.to_string()).unwrap_or_default(),
                i.map(|v| v.within_n_bound.to_string()).unwrap_or_default(),
            ]);
        }
    }
    Ok(rows)
}

fn oracle_check(cfg: &ExperimentConfig, pool: &Pool, out: &mut OutputDir) -> Result<(), RunError> {
    let d = cfg.d;
    let ms: Vec<i32> = (2..=cfg.m_max).step_by(2).collect();
    let origin = Site::origin(d);
    let results = pool.map_seeds(0..cfg.samples, |i| {
        let seed = cfg.seed.wrapping_add(i);
        let w = WeightField::new(seed, cfg.law.clone(), d)?;
        let mut per_m = Vec::with_capacity(ms.len());
        for &m in &ms {
            let front = layer_passage_times(&w, &origin, m)?;
            let oracle = brute_force_front(&w, &origin, m)?;
            let matches = oracle.iter().filter(|(x, t)| front.get(x).to_bits() == t.to_bits()).count();
            let exact = matches == oracle.len() && front.finite_cells().count() == oracle.len();
            per_m.push((m, oracle.len(), matches, exact));
        }
        Ok::<_, RunError>((seed, per_m))
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows = results.iter().flat_map(|(seed, per_m)| per_m.iter().map(move |(m, cells, matches, exact)| vec![d.to_string(), m.to_string(), seed.to_string(), cells.to_string(), matches.to_string(), exact.to_string()]));
    out.write_csv("oracle.csv", &header(&["d", "m", "seed", "cells", "matches", "exact"]), rows)?;
    let matched = results.iter().filter(|(_, per_m)| per_m.iter().all(|r| r.3)).count();
    out.write_json("oracle.json", &json!({ "d": d, "m": ms, "seeds": results.len(), "exact_seeds": matched }))?;
    Ok(())
}
