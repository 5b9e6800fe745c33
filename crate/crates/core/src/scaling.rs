//! Monte Carlo estimates of mean passage times, the time constant, excess
//! means, the slowly varying scale functions and rate fits.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::engine::{passage_to_targets, passage_to_window, EngineError, Window};
use crate::exec::SeedMap;
use crate::field::{FieldError, WeightField};
use crate::lattice::Site;
use crate::law::PassageLaw;
use crate::nearly_gamma::ols;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("n={0} must be even")]
    OddLength(i64),
    #[error("target {x:?} is not reachable at layer {n}")]
    Unreachable { n: i64, x: Vec<i32> },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("scale functions need m >= 16 (log m >= ln 16), got log m = {0}")]
    ScaleDomain(f64),
    #[error("series is empty")]
    EmptySeries,
    #[error("no positive excess: every point has excess <= 2 stderr")]
    NoPositiveExcess,
    #[error("only {0} usable points, need at least 3")]
    TooFewPoints(usize),
    #[error("need at least {need} dyadic n values, got {got}")]
    TooFewDyadic { need: usize, got: usize },
    #[error("degenerate variance at n={0}")]
    DegenerateVariance(i32),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `T((0,0),(n,x))` for every `n` in `ns`, one row per seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    pub ns: Vec<i32>,
    pub x: Vec<i32>,
    pub seed: u64,
    /// `rows[i][j]` is the sample for seed `seed + i` at `ns[j]`.
    pub rows: Vec<Vec<f64>>,
}

impl SampleMatrix {
    pub fn samples(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// The first `k` seeds only.
    pub fn truncated(&self, k: usize) -> Self {
        Self { rows: self.rows[..k.min(self.rows.len())].to_vec(), ..self.clone() }
    }
}

fn validate_targets(ns: &[i32], x: &[i32]) -> Result<(), ScalingError> {
    let reach: i64 = x.iter().map(|v| i64::from(*v).abs()).sum();
    for &n in ns {
        if n % 2 != 0 {
            return Err(ScalingError::OddLength(n.into()));
        }
        if i64::from(n) < reach || (i64::from(n) + reach) % 2 != 0 {
            return Err(ScalingError::Unreachable { n: n.into(), x: x.to_vec() });
        }
    }
    Ok(())
}

/// Samples `T((0,0),(n,x))` over seeds `seed, seed+1, ...`, one sweep per
/// seed covering every `n`.
pub fn passage_samples<E: SeedMap>(exec: &E, law: &PassageLaw, d: usize, ns: &[i32], x: &[i32], samples: usize, seed: u64) -> Result<SampleMatrix, ScalingError> {
    validate_targets(ns, x)?;
    WeightField::new(seed, law.clone(), d)?;
    let targets: Vec<Site> = ns.iter().map(|&n| Site::new(n, x.to_vec())).collect();
    let origin = Site::origin(d);
    let rows = exec.map_seeds(0..samples as u64, |i| {
        let field = WeightField::new(seed.wrapping_add(i), law.clone(), d)?;
        Ok::<_, ScalingError>(passage_to_targets(&field, &origin, &targets)?)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(SampleMatrix { ns: ns.to_vec(), x: x.to_vec(), seed, rows })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MeanEntry {
    pub n: i32,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub variance: f64,
}

/// Sample mean and unbiased variance, summed in input order.
pub fn mean_and_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let (mut sum, mut k) = (0.0, 0usize);
    for v in values.clone() {
        sum += v;
        k += 1;
    }
    let mean = sum / k as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let var = if k > 1 { ss / (k - 1) as f64 } else { 0.0 };
    (mean, var, k)
}

/// Estimates of `E a_{0n}` (or `E T((0,0),(n,x))`) over increasing `n`.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MeanSeries {
    pub entries: Vec<MeanEntry>,
}

impl MeanSeries {
    pub fn from_matrix(m: &SampleMatrix) -> Self {
        let mut entries: Vec<MeanEntry> = (0..m.ns.len())
            .map(|j| {
                let (mean, variance, samples) = mean_and_variance(m.column(j));
                MeanEntry { n: m.ns[j], mean, stderr: libm::sqrt(variance / samples as f64), samples, variance }
            })
            .collect();
        entries.sort_by_key(|e| e.n);
        entries.dedup_by_key(|e| e.n);
        Self { entries }
    }

    pub fn get(&self, n: i32) -> Option<&MeanEntry> {
        self.entries.iter().find(|e| e.n == n)
    }
}

pub fn mean_passage_series<E: SeedMap>(exec: &E, law: &PassageLaw, d: usize, ns: &[i32], x: &[i32], samples: usize, seed: u64) -> Result<MeanSeries, ScalingError> {
    if samples < 2 {
        return Err(ScalingError::TooFewSamples { need: 2, got: samples });
    }
    Ok(MeanSeries::from_matrix(&passage_samples(exec, law, d, ns, x, samples, seed)?))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RatioEntry {
    pub n: i32,
    pub ratio: f64,
    pub stderr: f64,
}

/// `mean(n)/n` at the largest `n`. Since `E a_{0n}/n ≥ μ` for every `n`, the
/// estimate is biased upward.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TimeConstantEstimate {
    pub mu_hat: f64,
    pub n_used: i32,
    pub stderr: f64,
    pub ci_halfwidth: f64,
    pub ratios: Vec<RatioEntry>,
    pub note: &'static str,
}

impl TimeConstantEstimate {
    /// A known value with no sampling error.
    pub fn exact(mu: f64) -> Self {
        Self { mu_hat: mu, n_used: 0, stderr: 0.0, ci_halfwidth: 0.0, ratios: Vec::new(), note: "exact" }
    }
}

pub fn estimate_time_constant(series: &MeanSeries) -> Result<TimeConstantEstimate, ScalingError> {
    let last = series.entries.iter().max_by_key(|e| e.n).ok_or(ScalingError::EmptySeries)?;
    let n = f64::from(last.n);
    let stderr = last.stderr / n;
    let ratios = series.entries.iter().map(|e| RatioEntry { n: e.n, ratio: e.mean / f64::from(e.n), stderr: e.stderr / f64::from(e.n) }).collect();
    Ok(TimeConstantEstimate { mu_hat: last.mean / n, n_used: last.n, stderr, ci_halfwidth: 1.96 * stderr, ratios, note: "upper-biased" })
}

/// `mean(2n) ≤ 2·mean(n) + 3·√(se(2n)² + 4·se(n)²)` for one dyadic pair;
/// the same inequality says `mean/n` does not increase beyond noise.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DyadicCheck {
    pub n: i32,
    pub mean_n: f64,
    pub mean_2n: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn dyadic_checks(series: &MeanSeries) -> Vec<DyadicCheck> {
    let mut out = Vec::new();
    for a in &series.entries {
        if let Some(b) = a.n.checked_mul(2).and_then(|n2| series.get(n2)) {
            let sigma = libm::sqrt(b.stderr * b.stderr + 4.0 * a.stderr * a.stderr);
            let bound = 2.0 * a.mean + 3.0 * sigma;
            out.push(DyadicCheck { n: a.n, mean_n: a.mean, mean_2n: b.mean, bound, holds: b.mean <= bound });
        }
    }
    out
}

/// `ψ(m) = C3·(log m)^{1/2}/log log m`, `θ(m) = (log m)^{3/2}`,
/// `φ(m) = ⌊(log m)²⌋`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ScaleValues {
    pub log_m: f64,
    pub psi: f64,
    pub theta: f64,
    pub phi: u64,
    pub c3: f64,
}

pub fn scale_functions(m: u64, c3: f64) -> Result<ScaleValues, ScalingError> {
    if m < 16 {
        return Err(ScalingError::ScaleDomain(libm::log(m as f64)));
    }
    scale_functions_from_log(libm::log(m as f64), c3)
}

/// The scale functions for a given `log m`.
pub fn scale_functions_from_log(log_m: f64, c3: f64) -> Result<ScaleValues, ScalingError> {
    if !(log_m >= libm::log(16.0)) || !log_m.is_finite() {
        return Err(ScalingError::ScaleDomain(log_m));
    }
    let psi = c3 * libm::sqrt(log_m) / libm::log(log_m);
    let theta = log_m * libm::sqrt(log_m);
    let phi = libm::floor(log_m * log_m) as u64;
    Ok(ScaleValues { log_m, psi, theta, phi, c3 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct IncrementClass {
    pub slow: bool,
    pub excessive: bool,
}

/// Slow iff `s ≥ n^{1/2}/ψ(n)`; excessive iff `s > n^{1/2}θ(n)`.
pub fn classify_increment(s_hat: f64, n: u64, c3: f64) -> Result<IncrementClass, ScalingError> {
    let sv = scale_functions(n, c3)?;
    let root = libm::sqrt(n as f64);
    Ok(IncrementClass { slow: s_hat >= root / sv.psi, excessive: s_hat > root * sv.theta })
}

/// Threshold above which `(n, x)` is excessive.
pub fn excessive_threshold(n: u64) -> Result<f64, ScalingError> {
    Ok(libm::sqrt(n as f64) * scale_functions(n, 1.0)?.theta)
}

/// Candidate growth rates for `E a_{0n} - nμ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum RateKind {
    /// `n^{1/2} log n`
    SqrtLog,
    /// `n^{1/2} log log n / (log n)^{1/2}`
    LoglogRate,
    /// `n^{1/3}`
    Kpz,
    /// `(n / log n)^{1/2}`
    SqrtOverLog,
}

impl RateKind {
    pub const ALL: [RateKind; 4] = [RateKind::SqrtLog, RateKind::LoglogRate, RateKind::Kpz, RateKind::SqrtOverLog];

    pub fn name(self) -> &'static str {
        match self {
            Self::SqrtLog => "sqrt_log",
            Self::LoglogRate => "loglog_rate",
            Self::Kpz => "kpz",
            Self::SqrtOverLog => "sqrt_over_log",
        }
    }

    pub fn value(self, n: f64) -> f64 {
        let ln = libm::log(n);
        match self {
            Self::SqrtLog => libm::sqrt(n) * ln,
            Self::LoglogRate => libm::sqrt(n) * libm::log(ln) / libm::sqrt(ln),
            Self::Kpz => libm::cbrt(n),
            Self::SqrtOverLog => libm::sqrt(n / ln),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CandidateFit {
    pub kind: RateKind,
    pub constant: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExcessPoint {
    pub n: i32,
    pub excess: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RateFit {
    pub candidates: Vec<CandidateFit>,
    pub best: RateKind,
    pub used: Vec<ExcessPoint>,
    pub excluded: Vec<ExcessPoint>,
}

fn is_power_of_two(n: i32) -> bool {
    n > 0 && (n & (n - 1)) == 0
}

/// Fits `mean(n) - n·mu_hat ≈ C·r(n)` on the log scale for each candidate
/// rate `r`. Points whose excess is not above twice its standard error are
/// excluded.
pub fn rate_fit(series: &MeanSeries, mu: &TimeConstantEstimate) -> Result<RateFit, ScalingError> {
    let dyadic = series.entries.iter().filter(|e| is_power_of_two(e.n)).count();
    if dyadic < 5 {
        return Err(ScalingError::TooFewDyadic { need: 5, got: dyadic });
    }
    let (mut used, mut excluded) = (Vec::new(), Vec::new());
    for e in &series.entries {
        let p = ExcessPoint { n: e.n, excess: e.mean - f64::from(e.n) * mu.mu_hat, stderr: e.stderr };
        if p.excess > 2.0 * p.stderr && p.excess > 0.0 {
            used.push(p);
        } else {
            excluded.push(p);
        }
    }
    if used.is_empty() {
        return Err(ScalingError::NoPositiveExcess);
    }
    if used.len() < 3 {
        return Err(ScalingError::TooFewPoints(used.len()));
    }
    let candidates: Vec<CandidateFit> = RateKind::ALL
        .iter()
        .map(|&kind| {
            let resid: Vec<f64> = used.iter().map(|p| libm::log(p.excess) - libm::log(kind.value(f64::from(p.n)))).collect();
            let log_c = resid.iter().sum::<f64>() / resid.len() as f64;
            let residual = libm::sqrt(resid.iter().map(|r| (r - log_c) * (r - log_c)).sum::<f64>());
            CandidateFit { kind, constant: libm::exp(log_c), residual }
        })
        .collect();
    let best = candidates.iter().min_by(|a, b| a.residual.total_cmp(&b.residual)).map(|c| c.kind).unwrap_or(RateKind::SqrtLog);
    Ok(RateFit { candidates, best, used, excluded })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FluctuationEntry {
    pub n: i32,
    pub stddev: f64,
    /// `stddev / (n / log n)^{1/2}`.
    pub log_scale_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FluctuationFit {
    pub chi_hat: f64,
    pub intercept: f64,
    pub entries: Vec<FluctuationEntry>,
    /// `max/min` of the ratios.
    pub log_scale_spread: f64,
}

/// Log-log slope of the sample standard deviation against `n`.
pub fn fluctuation_fit(series: &MeanSeries) -> Result<FluctuationFit, ScalingError> {
    let dyadic = series.entries.iter().filter(|e| is_power_of_two(e.n)).count();
    if dyadic < 4 {
        return Err(ScalingError::TooFewDyadic { need: 4, got: dyadic });
    }
    let mut entries = Vec::with_capacity(series.entries.len());
    for e in &series.entries {
        let sd = libm::sqrt(e.variance);
        if !(sd > 0.0) {
            return Err(ScalingError::DegenerateVariance(e.n));
        }
        let n = f64::from(e.n);
        entries.push(FluctuationEntry { n: e.n, stddev: sd, log_scale_ratio: sd / libm::sqrt(n / libm::log(n)) });
    }
    let xs: Vec<f64> = entries.iter().map(|e| libm::log(f64::from(e.n))).collect();
    let ys: Vec<f64> = entries.iter().map(|e| libm::log(e.stddev)).collect();
    let (chi_hat, intercept) = ols(&xs, &ys);
    let (lo, hi) = entries.iter().fold((f64::INFINITY, 0.0f64), |(l, h), e| (l.min(e.log_scale_ratio), h.max(e.log_scale_ratio)));
    Ok(FluctuationFit { chi_hat, intercept, entries, log_scale_spread: hi / lo })
}

pub fn fluctuation_exponent<E: SeedMap>(exec: &E, law: &PassageLaw, d: usize, ns: &[i32], samples: usize, seed: u64) -> Result<FluctuationFit, ScalingError> {
    fluctuation_fit(&mean_passage_series(exec, law, d, ns, &vec![0; d], samples, seed)?)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExcessCell {
    pub x: Vec<i32>,
    pub mean: f64,
    /// Standard error of `mean` alone.
    pub mean_stderr: f64,
    pub s_hat: f64,
    /// Standard error of `s_hat`, including the uncertainty of `mu_hat`.
    pub stderr: f64,
}

/// Comparison of `ŝ(m,x)` with `ŝ(m,-x)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ReflectionPair {
    pub x: Vec<i32>,
    /// `ŝ(m,x) - ŝ(m,-x)`.
    pub diff: f64,
    /// `√(se(x)² + se(-x)²)` from the two mean standard errors.
    pub joint_stderr: f64,
    /// Standard error of the per-field difference `T(x) - T(-x)`.
    pub paired_stderr: f64,
}

/// Estimated `s(m,x) = E T((0,0),(m,x)) - mμ` on a window.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExcessMeanField {
    pub m: i32,
    pub d: usize,
    pub mu_hat: f64,
    pub mu_stderr: f64,
    pub samples: usize,
    pub window: Window,
    /// Reachable cells in row-major order.
    pub cells: Vec<ExcessCell>,
    pub pairs: Vec<ReflectionPair>,
}

fn cone_window(d: usize, m: i32, radius: i32) -> Window {
    let r = radius.min(m).max(0);
    Window::ball(&vec![0; d], r)
}

/// Estimates `ŝ(m,x)` for `|x|∞ ≤ radius` (clipped to the cone) from
/// `samples` fields.
pub fn excess_mean_field<E: SeedMap>(exec: &E, law: &PassageLaw, d: usize, m: i32, radius: i32, samples: usize, seed: u64, mu: &TimeConstantEstimate) -> Result<ExcessMeanField, ScalingError> {
    if samples < 2 {
        return Err(ScalingError::TooFewSamples { need: 2, got: samples });
    }
    if m < 1 {
        return Err(ScalingError::Unreachable { n: m.into(), x: vec![0; d] });
    }
    WeightField::new(seed, law.clone(), d)?;
    let window = cone_window(d, m, radius);
    let origin = Site::origin(d);
    let fronts = exec.map_seeds(0..samples as u64, |i| {
        let field = WeightField::new(seed.wrapping_add(i), law.clone(), d)?;
        Ok::<_, ScalingError>(passage_to_window(&field, &origin, m, window.clone())?.values)
    });
    let fronts = fronts.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(excess_from_fronts(d, m, &window, &fronts, mu))
}

fn excess_from_fronts(d: usize, m: i32, window: &Window, fronts: &[Vec<f64>], mu: &TimeConstantEstimate) -> ExcessMeanField {
    let k = fronts.len();
    let mut cells = Vec::new();
    let mut index: BTreeMap<Vec<i32>, usize> = BTreeMap::new();
    for c in 0..window.len() {
        if !fronts[0][c].is_finite() {
            continue;
        }
        let (mean, var, _) = mean_and_variance(fronts.iter().map(|f| f[c]));
        let mean_stderr = libm::sqrt(var / k as f64);
        let mu_term = f64::from(m) * mu.stderr;
        let x = window.coords(c);
        index.insert(x.clone(), c);
        cells.push(ExcessCell { x, mean, mean_stderr, s_hat: mean - f64::from(m) * mu.mu_hat, stderr: libm::sqrt(mean_stderr * mean_stderr + mu_term * mu_term) });
    }
    let mut pairs = Vec::new();
    for cell in &cells {
        let neg: Vec<i32> = cell.x.iter().map(|v| -v).collect();
        if neg <= cell.x {
            continue;
        }
        if let (Some(&a), Some(&b)) = (index.get(&cell.x), index.get(&neg)) {
            let (diff, var, _) = mean_and_variance(fronts.iter().map(|f| f[a] - f[b]));
            let other = cells.iter().find(|c| c.x == neg).map_or(0.0, |c| c.mean_stderr);
            pairs.push(ReflectionPair {
                x: cell.x.clone(),
                diff,
                joint_stderr: libm::sqrt(cell.mean_stderr * cell.mean_stderr + other * other),
                paired_stderr: libm::sqrt(var / k as f64),
            });
        }
    }
    ExcessMeanField { m, d, mu_hat: mu.mu_hat, mu_stderr: mu.stderr, samples: k, window: window.clone(), cells, pairs }
}

impl ExcessMeanField {
    pub fn cell(&self, x: &[i32]) -> Option<&ExcessCell> {
        self.cells.iter().find(|c| c.x == x)
    }

    /// The stored cell nearest to `x` in ℓ¹, ties to the first in row-major
    /// order.
    pub fn nearest(&self, x: &[i32]) -> Option<&ExcessCell> {
        self.cells.iter().min_by_key(|c| c.x.iter().zip(x).map(|(a, b)| (i64::from(*a) - i64::from(*b)).abs()).sum::<i64>())
    }

    /// The cell of smallest `ŝ` (ties to the first in row-major order).
    pub fn argmin(&self) -> Option<&ExcessCell> {
        self.cells.iter().min_by(|a, b| a.s_hat.total_cmp(&b.s_hat))
    }
}

/// `h_n` estimated by scanning `|x|∞` shells of an excess field.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HnEstimate {
    pub h_n: i32,
    /// True when the largest scanned shell was still unexcessive, so the
    /// true `h_n` may be larger.
    pub capped: bool,
    pub shells_scanned: i32,
    pub threshold: f64,
}

pub fn estimate_h_n(field: &ExcessMeanField) -> Result<HnEstimate, ScalingError> {
    let threshold = excessive_threshold(field.m as u64)?;
    let cap = field.window.hi.iter().copied().max().unwrap_or(0);
    let mut h = 0;
    for cell in &field.cells {
        let r = cell.x.iter().map(|v| v.abs()).max().unwrap_or(0);
        if cell.s_hat <= threshold {
            h = h.max(r);
        }
    }
    let capped = h == cap && cap < field.m;
    Ok(HnEstimate { h_n: h, capped, shells_scanned: cap + 1, threshold })
}

/// The unexcessive corner `x̂*` with `|x̂*|∞ = h_n = x̂*_1`, choosing the
/// smallest `ŝ` among candidates. Also returns the margin below the
/// excessive threshold.
pub fn select_corner(field: &ExcessMeanField, h: &HnEstimate) -> Option<(Vec<i32>, f64)> {
    field
        .cells
        .iter()
        .filter(|c| c.x[0] == h.h_n && c.x.iter().all(|v| v.abs() <= h.h_n) && c.s_hat <= h.threshold)
        .min_by(|a, b| a.s_hat.total_cmp(&b.s_hat))
        .map(|c| (c.x.clone(), h.threshold - c.s_hat))
}

/// An `ŝ` value and whether it came from a fallback rather than the
/// requested cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcessValue {
    pub s_hat: f64,
    pub estimated: bool,
}

/// Source of `ŝ(m,x)` values for classification.
pub trait ExcessLookup {
    fn excess(&self, m: i32, x: &[i32]) -> Option<ExcessValue>;
}

impl ExcessLookup for ExcessMeanField {
    fn excess(&self, m: i32, x: &[i32]) -> Option<ExcessValue> {
        if m != self.m {
            return None;
        }
        if let Some(c) = self.cell(x) {
            return Some(ExcessValue { s_hat: c.s_hat, estimated: false });
        }
        self.nearest(x).map(|c| ExcessValue { s_hat: c.s_hat, estimated: true })
    }
}

/// Excess fields at several lengths; lengths without a field fall back to
/// the nearest available one.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExcessTable {
    pub fields: BTreeMap<i32, ExcessMeanField>,
}

impl ExcessTable {
    pub fn insert(&mut self, f: ExcessMeanField) {
        self.fields.insert(f.m, f);
    }
}

impl ExcessLookup for ExcessTable {
    fn excess(&self, m: i32, x: &[i32]) -> Option<ExcessValue> {
        if let Some(f) = self.fields.get(&m) {
            return f.excess(m, x);
        }
        let f = self.fields.values().min_by_key(|f| (i64::from(f.m) - i64::from(m)).abs())?;
        f.nearest(x).map(|c| ExcessValue { s_hat: c.s_hat, estimated: true })
    }
}

/// The same `ŝ` everywhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantExcess(pub f64);

impl ExcessLookup for ConstantExcess {
    fn excess(&self, _m: i32, _x: &[i32]) -> Option<ExcessValue> {
        Some(ExcessValue { s_hat: self.0, estimated: false })
    }
}

/// `ŝ` from a closure `(m, x) -> s`.
pub struct FnExcess<F>(pub F);

impl<F: Fn(i32, &[i32]) -> f64> ExcessLookup for FnExcess<F> {
    fn excess(&self, m: i32, x: &[i32]) -> Option<ExcessValue> {
        Some(ExcessValue { s_hat: (self.0)(m, x), estimated: false })
    }
}

/// No values at all; forces the envelope fallback.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoExcess;

impl ExcessLookup for NoExcess {
    fn excess(&self, _m: i32, _x: &[i32]) -> Option<ExcessValue> {
        None
    }
}
