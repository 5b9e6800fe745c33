//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fpp_core::engine::{brute_force_front, geodesic, layer_passage_times, skeleton_passage_time};
use fpp_core::exec::Sequential;
use fpp_core::field::WeightField;
use fpp_core::lattice::{symmetrized_sum, transform_path};
use fpp_core::nearly_gamma::{nearly_gamma_scan, GridSpec, DEFAULT_A_MAX};
use fpp_core::scaling::{
    dyadic_checks, estimate_h_n, estimate_time_constant, excess_mean_field, fluctuation_fit, passage_samples, rate_fit, select_corner, ExcessMeanField, ExcessTable, MeanEntry,
    MeanSeries, RateKind, SampleMatrix, TimeConstantEstimate,
};
use fpp_core::skeleton::{augmented_skeleton, cg_approx_skeleton, classify_blocks, climbing_skeleton, simple_skeleton, skeleton_count_bound_check, CoarseParams};
use fpp_core::{LatticePath, PassageLaw, PathMap, Sign, Site, Step};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Verdict = Result<(bool, String), String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, id: u32, name: &str, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = verdict.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            self.failures += 1;
        }
        println!("{} C{id} {name}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
    }
}

fn exp1() -> PassageLaw {
    PassageLaw::exponential(1.0)
}

fn constant1() -> PassageLaw {
    "const:value=1".parse().unwrap()
}

fn c1_oracle() -> Verdict {
    let start = Instant::now();
    let (mut total, mut exact) = (0, 0);
    for d in 1..=2usize {
        for m in (2..=8).step_by(2) {
            for seed in 0..100u64 {
                let w = WeightField::new(seed, exp1(), d).map_err(|e| e.to_string())?;
                let o = Site::origin(d);
                let front = layer_passage_times(&w, &o, m).map_err(|e| e.to_string())?;
                let oracle = brute_force_front(&w, &o, m).map_err(|e| e.to_string())?;
                total += 1;
                if front.finite_cells().count() == oracle.len() && oracle.iter().all(|(x, t)| front.get(x).to_bits() == t.to_bits()) {
                    exact += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((exact == total && secs < 60.0, format!("{exact}/{total} (d, m, seed) fronts identical, {secs:.1}s < 60s")))
}

fn c2_degenerate() -> Verdict {
    let law = constant1();
    let ns: Vec<i32> = (3..=10).map(|k| 1 << k).collect();
    let m = passage_samples(&Sequential, &law, 1, &ns, &[0], 20, 0).map_err(|e| e.to_string())?;
    let series = MeanSeries::from_matrix(&m);
    let exact_means = series.entries.iter().all(|e| e.mean == f64::from(e.n) && e.variance == 0.0);
    let mu = estimate_time_constant(&series).map_err(|e| e.to_string())?;
    let d2 = passage_samples(&Sequential, &law, 2, &[8, 16, 32], &[0, 0], 5, 0).map_err(|e| e.to_string())?;
    let exact_d2 = d2.rows.iter().all(|r| r.iter().zip(&d2.ns).all(|(v, n)| *v == f64::from(*n)));
    let n = 128;
    let field = excess_mean_field(&Sequential, &law, 1, n, n, 3, 0, &TimeConstantEstimate::exact(1.0)).map_err(|e| e.to_string())?;
    let zero_excess = field.cells.iter().all(|c| c.s_hat == 0.0 && c.stderr == 0.0);
    let h = estimate_h_n(&field).map_err(|e| e.to_string())?;
    let params = CoarseParams::new(1, n, 4, h.h_n, None, 1.0).map_err(|e| e.to_string())?;
    // Every path ties under constant weights; take the straight zigzag one.
    let w = WeightField::new(0, law, 1).map_err(|e| e.to_string())?;
    let steps = (0..4 * n).map(|i| Step::new(0, if i % 2 == 0 { Sign::Plus } else { Sign::Minus })).collect();
    let path = LatticePath::new(Site::origin(1), steps);
    let t_path = skeleton_passage_time(&w, &[(Site::origin(1), Site::new(4 * n, [0]))]).map_err(|e| e.to_string())?;
    let straight = simple_skeleton(&path, n).map_err(|e| e.to_string())?.points.iter().all(|p| p.transverse == [0]);
    let classes = classify_blocks(&path, &params, &field).map_err(|e| e.to_string())?;
    let pass = exact_means && mu.mu_hat == 1.0 && exact_d2 && zero_excess && straight && t_path == f64::from(4 * n) && classes.all().is_empty();
    Ok((
        pass,
        format!(
            "a0n = n with zero variance for n = 8..1024: {exact_means}; mu_hat = {}; d=2 exact: {exact_d2}; s_hat == 0: {zero_excess}; T(0, 4n) = {t_path}; straight skeleton: {straight}, E = {:?}",
            mu.mu_hat,
            classes.all()
        ),
    ))
}

fn c3_subadditivity(shared: &mut Option<SampleMatrix>) -> Verdict {
    let start = Instant::now();
    let ns: Vec<i32> = (3..=10).map(|k| 1 << k).collect();
    let m = passage_samples(&Sequential, &exp1(), 1, &ns, &[0], 20_000, 0).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let series = MeanSeries::from_matrix(&m);
    *shared = Some(m);
    let checks = dyadic_checks(&series);
    let held = checks.iter().filter(|c| c.holds).count();
    let worst = checks.iter().map(|c| c.mean_2n - c.bound).fold(f64::NEG_INFINITY, f64::max);
    let ratios: Vec<String> = series.entries.iter().map(|e| format!("{:.4}", e.mean / f64::from(e.n))).collect();
    let pass = held == checks.len() && checks.len() == 7 && secs < 600.0;
    Ok((pass, format!("{held}/{} dyadic pairs within 3 sigma (max mean(2n) - bound = {worst:.3}); mean/n = [{}]; sampling {secs:.0}s < 600s single-threaded", checks.len(), ratios.join(", "))))
}

struct ExcessStats {
    cells: usize,
    min_z: f64,
    pairs: usize,
    max_joint: f64,
    max_paired: f64,
    pass: bool,
}

fn excess_stats(f: &ExcessMeanField) -> ExcessStats {
    let min_z = f.cells.iter().map(|c| c.s_hat / c.stderr).fold(f64::INFINITY, f64::min);
    let nonneg = f.cells.iter().all(|c| c.s_hat >= -3.0 * c.stderr);
    let max_joint = f.pairs.iter().map(|p| p.diff.abs() / p.joint_stderr).fold(0.0, f64::max);
    let max_paired = f.pairs.iter().map(|p| p.diff.abs() / p.paired_stderr).fold(0.0, f64::max);
    let sym = f.pairs.iter().all(|p| p.diff.abs() <= 3.0 * p.joint_stderr);
    ExcessStats { cells: f.cells.len(), min_z, pairs: f.pairs.len(), max_joint, max_paired, pass: nonneg && sym && !f.pairs.is_empty() }
}

fn c4_excess(shared: &Option<SampleMatrix>) -> Verdict {
    let mu1 = match shared {
        Some(m) => estimate_time_constant(&MeanSeries::from_matrix(&m.truncated(m.samples()))).map_err(|e| e.to_string())?,
        None => {
            let m = passage_samples(&Sequential, &exp1(), 1, &[1024], &[0], 2000, 0).map_err(|e| e.to_string())?;
            estimate_time_constant(&MeanSeries::from_matrix(&m)).map_err(|e| e.to_string())?
        }
    };
    let f1 = excess_mean_field(&Sequential, &exp1(), 1, 128, 16, 4000, 1_000_000, &mu1).map_err(|e| e.to_string())?;
    let mu2 = {
        let m = passage_samples(&Sequential, &exp1(), 2, &[256], &[0, 0], 200, 2_000_000).map_err(|e| e.to_string())?;
        estimate_time_constant(&MeanSeries::from_matrix(&m)).map_err(|e| e.to_string())?
    };
    let f2 = excess_mean_field(&Sequential, &exp1(), 2, 128, 16, 1000, 3_000_000, &mu2).map_err(|e| e.to_string())?;
    let (s1, s2) = (excess_stats(&f1), excess_stats(&f2));
    let describe = |d: usize, s: &ExcessStats, mu: &TimeConstantEstimate| {
        format!(
            "d={d}: {} cells, min s_hat/sigma = {:.2}, {} pairs max |diff|/sigma_joint = {:.2} (paired {:.2}), mu_hat = {:.4} from n = {}",
            s.cells, s.min_z, s.pairs, s.max_joint, s.max_paired, mu.mu_hat, mu.n_used
        )
    };
    Ok((s1.pass && s2.pass, format!("{}; {}", describe(1, &s1, &mu1), describe(2, &s2, &mu2))))
}

fn c5_nearly_gamma() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for spec in ["exp:rate=1", "gamma:shape=2,rate=1", "uniform:a=0,b=1", "weibull:shape=2,scale=1"] {
        let law: PassageLaw = spec.parse().map_err(|e: fpp_core::LawError| e.to_string())?;
        let grid = GridSpec::for_law(&law, 200);
        let coarse = nearly_gamma_scan(&law, grid, DEFAULT_A_MAX).map_err(|e| e.to_string())?;
        let fine = nearly_gamma_scan(&law, grid.refined(), DEFAULT_A_MAX).map_err(|e| e.to_string())?;
        let change = (fine.a_fit - coarse.a_fit).abs() / coarse.a_fit;
        let ok = coarse.pass && fine.pass && coarse.a_fit.is_finite() && change < 0.05;
        pass &= ok;
        parts.push(format!("{spec} A_fit = {:.4} (change {:.2}%)", coarse.a_fit, 100.0 * change));
    }
    let split: PassageLaw = "piecewise:0..1,2..3".parse().map_err(|e: fpp_core::LawError| e.to_string())?;
    let r = nearly_gamma_scan(&split, GridSpec::for_law(&split, 200), DEFAULT_A_MAX).map_err(|e| e.to_string())?;
    let reason_ok = !r.pass && r.reason() == "support is not an interval";
    pass &= reason_ok;
    parts.push(format!("piecewise:0..1,2..3 fails with \"{}\"", r.reason()));
    Ok((pass, parts.join("; ")))
}

fn c6_fluctuations(shared: &Option<SampleMatrix>) -> Verdict {
    let wanted = [64, 128, 256, 512, 1024];
    let start = Instant::now();
    let series = match shared {
        Some(m) => {
            let m = m.truncated(10_000);
            let full = MeanSeries::from_matrix(&m);
            MeanSeries { entries: full.entries.into_iter().filter(|e| wanted.contains(&e.n)).collect() }
        }
        None => MeanSeries::from_matrix(&passage_samples(&Sequential, &exp1(), 1, &wanted, &[0], 10_000, 0).map_err(|e| e.to_string())?),
    };
    let fit = fluctuation_fit(&series).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let pass = (0.25..=0.45).contains(&fit.chi_hat) && fit.log_scale_spread < 3.0 && series.entries.len() == 5 && series.entries.iter().all(|e| e.samples == 10_000);
    let ratios: Vec<String> = fit.entries.iter().map(|e| format!("{:.3}", e.log_scale_ratio)).collect();
    Ok((
        pass,
        format!(
            "chi_hat = {:.4} in [0.25, 0.45]; sd/(n/log n)^(1/2) = [{}], max/min = {:.3} < 3; first 10^4 samples of the subadditivity run (+{secs:.1}s)",
            fit.chi_hat,
            ratios.join(", "),
            fit.log_scale_spread
        ),
    ))
}

fn c7_rate_fit() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let std_normal = Normal::new(0.0, 1.0).map_err(|e| e.to_string())?;
    let mu = TimeConstantEstimate::exact(1.0);
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in RateKind::ALL {
        let (mut hits, mut worst) = (0, 0.0f64);
        for _ in 0..50 {
            let c = rng.gen_range(0.5..=10.0);
            let entries = (3..=14)
                .map(|k| {
                    let n = 1i32 << k;
                    let excess = c * kind.value(f64::from(n));
                    let se = 0.01 * excess;
                    MeanEntry { n, mean: f64::from(n) + excess + se * std_normal.sample(&mut rng), stderr: se, samples: 10_000, variance: se * se * 10_000.0 }
                })
                .collect();
            let fit = rate_fit(&MeanSeries { entries }, &mu).map_err(|e| e.to_string())?;
            let fitted = fit.candidates.iter().find(|f| f.kind == kind).map(|f| f.constant).unwrap_or(f64::NAN);
            let err = (fitted - c).abs() / c;
            worst = worst.max(err);
            if fit.best == kind && err < 0.05 {
                hits += 1;
            }
        }
        pass &= hits == 50;
        parts.push(format!("{} {hits}/50 (max constant error {:.2}%)", kind.name(), 100.0 * worst));
    }
    Ok((pass, parts.join("; ")))
}

fn c8_skeletons(shared: &Option<SampleMatrix>) -> Verdict {
    let (n, k, d) = (128, 32usize, 1usize);
    let law = exp1();
    let mu = match shared {
        Some(m) => estimate_time_constant(&MeanSeries::from_matrix(m)).map_err(|e| e.to_string())?,
        None => estimate_time_constant(&MeanSeries::from_matrix(&passage_samples(&Sequential, &law, 1, &[1024], &[0], 2000, 0).map_err(|e| e.to_string())?)).map_err(|e| e.to_string())?,
    };
    let field = excess_mean_field(&Sequential, &law, d, n, n, 400, 5_000_000, &mu).map_err(|e| e.to_string())?;
    let h = estimate_h_n(&field).map_err(|e| e.to_string())?;
    let (corner, _) = select_corner(&field, &h).ok_or("no unexcessive corner")?;
    let params = CoarseParams::new(d, n, k, h.h_n, None, 1.0).map_err(|e| e.to_string())?;
    let mut table = ExcessTable::default();
    for m in 1..=(2 * n as u64 / params.phi) as i32 {
        table.insert(excess_mean_field(&Sequential, &law, d, m, m, 400, 6_000_000, &mu).map_err(|e| e.to_string())?);
    }
    let (mut roundtrip, mut below, mut long_ok, mut counts_ok, mut count_checks) = (0, 0, 0, 0, 0);
    let mut exceptional = 0usize;
    for i in 0..100u64 {
        let w = WeightField::new(4_000_000 + i, law.clone(), d).map_err(|e| e.to_string())?;
        let g = geodesic(&w, &Site::origin(d), &Site::new(k as i32 * n, [0])).map_err(|e| e.to_string())?;
        let path = g.geodesic.ok_or("missing geodesic")?;
        let classes = classify_blocks(&path, &params, &field).map_err(|e| e.to_string())?;
        exceptional += classes.all().len();
        let cg = cg_approx_skeleton(&path, &params, &classes).map_err(|e| e.to_string())?;
        if cg.sidestep_blocks(params.h_n) == classes.sidestep && cg.excessive_blocks() == classes.excessive {
            roundtrip += 1;
        }
        let aug = augmented_skeleton(&path, &params, &classes).map_err(|e| e.to_string())?;
        if skeleton_passage_time(&w, &aug.segments()).map_err(|e| e.to_string())? <= g.value {
            below += 1;
        }
        let climb_path = geodesic(&w, &Site::origin(d), &Site::new(n, corner.clone())).map_err(|e| e.to_string())?.geodesic.ok_or("missing geodesic")?;
        let climb = climbing_skeleton(&climb_path, params.u_n, &table, 1.0).map_err(|e| e.to_string())?;
        if 2 * climb.long_count() as u64 <= params.phi {
            long_ok += 1;
        }
        for j in 1..=k {
            for in_b in [false, true] {
                let c = skeleton_count_bound_check(&params, &cg.tuples, j, in_b).map_err(|e| e.to_string())?;
                count_checks += 1;
                let interp = c.interpolation.as_ref().map_or(true, |i| i.within_h_bound && i.within_n_bound);
                if c.ok && interp {
                    counts_ok += 1;
                }
            }
        }
    }
    let pass = roundtrip == 100 && below == 100 && long_ok == 100 && counts_ok == count_checks;
    Ok((
        pass,
        format!(
            "h_n = {} (capped: {}), phi = {}, u_n = {}, n1 = {}; E_side round trip {roundtrip}/100; T_skel(aug) <= T {below}/100; long <= phi/2 {long_ok}/100; count bounds {counts_ok}/{count_checks}; mean |E|/k = {:.4}",
            h.h_n,
            h.capped,
            params.phi,
            params.u_n,
            params.n1,
            exceptional as f64 / (100 * k) as f64
        ),
    ))
}

fn random_path(rng: &mut ChaCha8Rng) -> LatticePath {
    let d = rng.gen_range(1..=3usize);
    let len = rng.gen_range(1..=64usize);
    let steps = (0..len).map(|_| Step::new(rng.gen_range(0..d), if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus })).collect();
    LatticePath::new(Site::origin(d), steps)
}

fn c9_transforms() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut good = 0;
    for _ in 0..1000 {
        let path = random_path(&mut rng);
        let d = path.dim();
        let mut ok = true;
        let mut maps = vec![PathMap::Zeta, PathMap::Eta];
        maps.extend((1..=d).map(PathMap::Xi));
        for map in &maps {
            let once = transform_path(&path, map).map_err(|e| e.to_string())?;
            ok &= transform_path(&once, map).map_err(|e| e.to_string())? == path;
        }
        let trace = path.trace();
        let zeta = transform_path(&path, &PathMap::Zeta).map_err(|e| e.to_string())?;
        for j in 1..=d {
            let a = transform_path(&path, &PathMap::Xi(j)).map_err(|e| e.to_string())?;
            let b = transform_path(&zeta, &PathMap::Xi(j)).map_err(|e| e.to_string())?;
            let sum = symmetrized_sum(&a, &b).map_err(|e| e.to_string())?;
            for (i, p) in sum.points().iter().enumerate() {
                ok &= p.layer == 2 * i as i64;
                for (axis, &v) in p.transverse.iter().enumerate() {
                    ok &= v == if axis == j - 1 { 2 * i64::from(trace.at(i)[0]) } else { 0 };
                }
            }
        }
        let eta = transform_path(&path, &PathMap::Eta).map_err(|e| e.to_string())?;
        let horizontal = symmetrized_sum(&path, &eta).map_err(|e| e.to_string())?;
        ok &= horizontal.points().iter().enumerate().all(|(i, p)| p.layer == 2 * i as i64 && p.transverse.iter().all(|&v| v == 0));
        if ok {
            good += 1;
        }
    }
    Ok((good == 1000, format!("{good}/1000 random paths: zeta, eta, xi^j involutions; symmetrized and horizontal sums exact")))
}

fn run_binary(sub: &str, config: &str, workers: &str, dir: &Path) -> Result<serde_json::Value, String> {
    let cfg_path = dir.join(format!("{sub}.toml"));
    std::fs::write(&cfg_path, config).map_err(|e| e.to_string())?;
    let out = dir.join(format!("{sub}-{workers}"));
    let status = Command::new(env!("CARGO_BIN_EXE_fpp"))
        .args([sub, "--workers", workers, "--out", out.to_str().unwrap(), "--config", cfg_path.to_str().unwrap()])
        .env_remove("FPP_WORKERS")
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("{sub} failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    let text = std::fs::read_to_string(out.join("manifest.json")).map_err(|e| e.to_string())?;
    let m: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok(m["files"].clone())
}

fn c10_reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [
        ("simulate", "n = [8, 16, 32]\nsamples = 200\nseed = 3\nx = [2]"),
        ("mu", "n_min = 8\nn_max = 64\nsamples = 200"),
        ("fluctuations", "n_min = 8\nn_max = 64\nsamples = 200"),
        ("excess-field", "d = 2\nn = [16]\nsamples = 100\nwindow = 4\nmu_n = 32\nmu_samples = 50"),
        ("skeleton-stats", "n = [64]\nk = 4\ngeodesics = 8\nmu_n = 128\nmu_samples = 60"),
        ("oracle-check", "d = 2\nsamples = 20"),
        ("nearly-gamma", "law = \"gamma:shape=2,rate=1\""),
    ];
    let mut same = 0;
    for (sub, cfg) in runs {
        let one = run_binary(sub, cfg, "1", tmp.path())?;
        let four = run_binary(sub, cfg, "4", tmp.path())?;
        let again = run_binary(sub, cfg, "1", &tmp.path().join("again").tap_mkdir()?)?;
        if one == four && one == again && one.as_array().is_some_and(|a| !a.is_empty()) {
            same += 1;
        }
    }
    Ok((same == runs.len(), format!("{same}/{} subcommands byte-identical across reruns and 1 vs 4 workers", runs.len())))
}

trait TapMkdir {
    fn tap_mkdir(self) -> Result<std::path::PathBuf, String>;
}

impl TapMkdir for std::path::PathBuf {
    fn tap_mkdir(self) -> Result<std::path::PathBuf, String> {
        std::fs::create_dir_all(&self).map_err(|e| e.to_string())?;
        Ok(self)
    }
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let mut shared: Option<SampleMatrix> = None;
    suite.check(1, "oracle equivalence", c1_oracle);
    suite.check(2, "degenerate exactness", c2_degenerate);
    suite.check(3, "subadditivity", || c3_subadditivity(&mut shared));
    suite.check(4, "excess-mean properties", || c4_excess(&shared));
    suite.check(5, "nearly-gamma regression", c5_nearly_gamma);
    suite.check(6, "fluctuation scaling", || c6_fluctuations(&shared));
    suite.check(7, "rate-fit self-test", c7_rate_fit);
    suite.check(8, "skeleton machinery", || c8_skeletons(&shared));
    suite.check(9, "path-transform identities", c9_transforms);
    suite.check(10, "reproducibility", c10_reproducibility);
    if suite.failures > 0 {
        println!("{} criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
