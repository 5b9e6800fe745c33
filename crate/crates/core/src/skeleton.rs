//! Skeletons of block paths: simple, coarse-grained, augmented and
//! climbing, plus the entropy counts behind the coarse-grained ones.
//!
//! A block path runs from layer 0 to layer `kn`; `x^{(i)}` is its transverse
//! position at layer `i`. Inside block `j` the sites
//! `d_j = (jn, x^{(jn)})`, `e_j = (jn + n1, ·)` and `f_j = (jn - n1, ·)` mark
//! the block boundary and the two points at distance `n1` from it.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::engine::{min_passage_time, EngineError};
use crate::field::BondWeights;
use crate::lattice::{LatticePath, PathTrace, Site};
use crate::scaling::{classify_increment, scale_functions, ExcessLookup, ScalingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkeletonError {
    #[error("block length n={0} must be even and at least 16")]
    BlockLength(i32),
    #[error("block count k must be positive")]
    BlockCount,
    #[error("u_n = 0: h_n={h_n} is below 2 phi(n) = {}", 2 * .phi)]
    ZeroGrid { h_n: i32, phi: u64 },
    #[error("n1={n1} must be even with 0 < n1 < n/2 = {}", .n / 2)]
    InnerLength { n1: i32, n: i32 },
    #[error("path length {len} is not a multiple of n={n}")]
    Indivisible { len: usize, n: i32 },
    #[error("path length {len} is not {expected}")]
    PathLength { len: usize, expected: usize },
    #[error("path must start at layer 0")]
    PathStart,
    #[error("path never reaches first coordinate {height}")]
    Height { height: i64 },
    #[error("count enumeration needs d <= 2 and h_n <= 200 (d={d}, h_n={h_n})")]
    Guard { d: usize, h_n: i32 },
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Block length, block count and coarse-graining scales.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CoarseParams {
    pub d: usize,
    pub n: i32,
    pub k: usize,
    pub h_n: i32,
    pub phi: u64,
    pub u_n: i32,
    pub n1: i32,
    pub c3: f64,
}

impl CoarseParams {
    /// `u_n = 2⌊h_n/(2φ(n))⌋`. Without `n1` the default is `2d⌊n/φ(n)⌋`.
    pub fn new(d: usize, n: i32, k: usize, h_n: i32, n1: Option<i32>, c3: f64) -> Result<Self, SkeletonError> {
        if n < 16 || n % 2 != 0 {
            return Err(SkeletonError::BlockLength(n));
        }
        if k == 0 {
            return Err(SkeletonError::BlockCount);
        }
        let phi = scale_functions(n as u64, c3)?.phi;
        let u_n = 2 * (i64::from(h_n.max(0)) / (2 * phi as i64)) as i32;
        if u_n == 0 {
            return Err(SkeletonError::ZeroGrid { h_n, phi });
        }
        let n1 = n1.unwrap_or_else(|| {
            let v = 2 * d as i32 * (n / phi as i32);
            v - v % 2
        });
        if n1 <= 0 || n1 % 2 != 0 || 2 * n1 >= n {
            return Err(SkeletonError::InnerLength { n1, n });
        }
        Ok(Self { d, n, k, h_n, phi, u_n, n1, c3 })
    }

    /// `b_nk = ⌊k log log n / log n⌋`.
    pub fn b_nk(&self) -> usize {
        b_nk(self.n, self.k)
    }
}

pub fn b_nk(n: i32, k: usize) -> usize {
    let l = libm::log(f64::from(n));
    libm::floor(k as f64 * libm::log(l) / l) as usize
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SimpleSkeleton {
    pub n: i32,
    pub points: Vec<Site>,
}

/// The sites of `path` at layers `0, n, 2n, ...`.
pub fn simple_skeleton(path: &LatticePath, n: i32) -> Result<SimpleSkeleton, SkeletonError> {
    if n <= 0 || path.len() % n as usize != 0 {
        return Err(SkeletonError::Indivisible { len: path.len(), n });
    }
    let trace = path.trace();
    let points = (0..=path.len() / n as usize).map(|j| trace.site(j * n as usize)).collect();
    Ok(SimpleSkeleton { n, points })
}

/// Projection of `site` onto the grid `u·Z^d` in layer `target_layer`:
/// nearest grid point in ℓ¹, ties to the lexicographically smallest.
pub fn pi_project(site: &Site, target_layer: i32, u: i32) -> Site {
    let z = site
        .transverse
        .iter()
        .map(|&y| {
            let lo = y.div_euclid(u) * u;
            if 2 * (y - lo) <= u {
                lo
            } else {
                lo + u
            }
        })
        .collect::<Vec<_>>();
    Site::new(target_layer, z)
}

fn linf(a: &[i32], b: &[i32]) -> i32 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).max().unwrap_or(0)
}

fn diff(a: &[i32], b: &[i32]) -> Vec<i32> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

/// Whether a sidestep occurs between `d_{j-1}, e_{j-1}` or `f_j, d_j`.
pub fn is_sidestep(h_n: i32, d0: &Site, e: &Site, f: &Site, d1: &Site) -> bool {
    linf(&e.transverse, &d0.transverse) > h_n || linf(&d1.transverse, &f.transverse) > h_n
}

#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BlockClassification {
    /// Blocks (1-based) with an excessive increment.
    pub excessive: Vec<usize>,
    /// Non-excessive blocks with a sidestep.
    pub sidestep: Vec<usize>,
    pub b_nk: usize,
    /// Blocks classified by the `|x|∞ ≤ h_n` fallback because no excess
    /// value was available.
    pub fallback: Vec<usize>,
    /// Some lookup returned an estimated value.
    pub estimated: bool,
}

impl BlockClassification {
    pub fn all(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.excessive.iter().chain(&self.sidestep).copied().collect();
        v.sort_unstable();
        v
    }

    pub fn is_excessive(&self, j: usize) -> bool {
        self.excessive.contains(&j)
    }

    pub fn is_sidestep(&self, j: usize) -> bool {
        self.sidestep.contains(&j)
    }
}

fn block_trace(path: &LatticePath, p: &CoarseParams) -> Result<PathTrace, SkeletonError> {
    let expected = p.k * p.n as usize;
    if path.len() != expected {
        return Err(SkeletonError::PathLength { len: path.len(), expected });
    }
    if path.start.layer != 0 {
        return Err(SkeletonError::PathStart);
    }
    Ok(path.trace())
}

struct BlockSites {
    d0: Site,
    e: Site,
    f: Site,
    d1: Site,
}

fn block_sites(t: &PathTrace, p: &CoarseParams, j: usize) -> BlockSites {
    let (n, n1) = (p.n as usize, p.n1 as usize);
    BlockSites { d0: t.site((j - 1) * n), e: t.site((j - 1) * n + n1), f: t.site(j * n - n1), d1: t.site(j * n) }
}

/// Splits the blocks of `path` into excessive, sidestep and regular ones.
pub fn classify_blocks<L: ExcessLookup + ?Sized>(path: &LatticePath, params: &CoarseParams, lookup: &L) -> Result<BlockClassification, SkeletonError> {
    let t = block_trace(path, params)?;
    let mut out = BlockClassification { b_nk: params.b_nk(), ..Default::default() };
    for j in 1..=params.k {
        let b = block_sites(&t, params, j);
        let inc = diff(&b.d1.transverse, &b.d0.transverse);
        let excessive = match lookup.excess(params.n, &inc) {
            Some(v) => {
                out.estimated |= v.estimated;
                classify_increment(v.s_hat, params.n as u64, params.c3)?.excessive
            }
            None => {
                out.fallback.push(j);
                inc.iter().map(|v| v.abs()).max().unwrap_or(0) > params.h_n
            }
        };
        if excessive {
            out.excessive.push(j);
        } else if is_sidestep(params.h_n, &b.d0, &b.e, &b.f, &b.d1) {
            out.sidestep.push(j);
        }
    }
    Ok(out)
}

/// One tuple `R_j` of a coarse-grained approximate skeleton.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum CgTuple {
    /// `(d_{j-1}, d_j)` for an excessive block.
    Excessive { start: Site, end: Site },
    /// `(d_{j-1}, e_{j-1}, f_j, d_j)` for a sidestep block.
    Sidestep { d0: Site, e: Site, f: Site, d1: Site },
    /// `(π(e_{j-1}), π(f_j))`, both grid points on the block boundaries.
    Regular { start: Site, end: Site },
}

impl CgTuple {
    pub fn last(&self) -> &Site {
        match self {
            Self::Excessive { end, .. } | Self::Regular { end, .. } => end,
            Self::Sidestep { d1, .. } => d1,
        }
    }

    /// Endpoint pairs whose passage times make up the tuple's share of
    /// `T_skel`.
    pub fn segments(&self) -> Vec<(Site, Site)> {
        match self {
            Self::Excessive { start, end } | Self::Regular { start, end } => vec![(start.clone(), end.clone())],
            Self::Sidestep { d0, e, f, d1 } => vec![(d0.clone(), e.clone()), (e.clone(), f.clone()), (f.clone(), d1.clone())],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CgApproxSkeleton {
    pub u_n: i32,
    pub tuples: Vec<CgTuple>,
}

pub fn cg_approx_skeleton(path: &LatticePath, params: &CoarseParams, classes: &BlockClassification) -> Result<CgApproxSkeleton, SkeletonError> {
    let t = block_trace(path, params)?;
    let tuples = (1..=params.k)
        .map(|j| {
            let b = block_sites(&t, params, j);
            if classes.is_excessive(j) {
                CgTuple::Excessive { start: b.d0, end: b.d1 }
            } else if classes.is_sidestep(j) {
                CgTuple::Sidestep { d0: b.d0, e: b.e, f: b.f, d1: b.d1 }
            } else {
                CgTuple::Regular { start: pi_project(&b.e, b.d0.layer, params.u_n), end: pi_project(&b.f, b.d1.layer, params.u_n) }
            }
        })
        .collect();
    Ok(CgApproxSkeleton { u_n: params.u_n, tuples })
}

impl CgApproxSkeleton {
    /// The sidestep blocks, read off the tuples alone.
    pub fn sidestep_blocks(&self, h_n: i32) -> Vec<usize> {
        self.tuples
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                CgTuple::Sidestep { d0, e, f, d1 } if is_sidestep(h_n, d0, e, f, d1) => Some(i + 1),
                _ => None,
            })
            .collect()
    }

    pub fn excessive_blocks(&self) -> Vec<usize> {
        self.tuples.iter().enumerate().filter_map(|(i, t)| matches!(t, CgTuple::Excessive { .. }).then_some(i + 1)).collect()
    }
}

/// `T_skel` of a coarse-grained approximate skeleton, or `None` when some
/// regular tuple joins grid points that no path connects.
pub fn t_skel_cg<W: BondWeights + ?Sized>(w: &W, skel: &CgApproxSkeleton) -> Result<Option<f64>, SkeletonError> {
    let mut total = 0.0;
    for tuple in &skel.tuples {
        for (a, b) in tuple.segments() {
            if !a.reaches(&b) {
                return Ok(None);
            }
            total += min_passage_time(w, &a, &b)?;
        }
    }
    Ok(Some(total))
}

/// One tuple `V_j` of an augmented skeleton.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum AugTuple {
    Pair { start: Site, end: Site },
    Quad { d0: Site, e: Site, f: Site, d1: Site },
}

impl AugTuple {
    pub fn segments(&self) -> Vec<(Site, Site)> {
        match self {
            Self::Pair { start, end } => vec![(start.clone(), end.clone())],
            Self::Quad { d0, e, f, d1 } => vec![(d0.clone(), e.clone()), (e.clone(), f.clone()), (f.clone(), d1.clone())],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AugmentedSkeleton {
    pub tuples: Vec<AugTuple>,
}

impl AugmentedSkeleton {
    pub fn segments(&self) -> Vec<(Site, Site)> {
        self.tuples.iter().flat_map(AugTuple::segments).collect()
    }
}

pub fn augmented_skeleton(path: &LatticePath, params: &CoarseParams, classes: &BlockClassification) -> Result<AugmentedSkeleton, SkeletonError> {
    let t = block_trace(path, params)?;
    let tuples = (1..=params.k)
        .map(|j| {
            let b = block_sites(&t, params, j);
            if classes.is_sidestep(j) {
                AugTuple::Quad { d0: b.d0, e: b.e, f: b.f, d1: b.d1 }
            } else {
                AugTuple::Pair { start: b.d0, end: b.d1 }
            }
        })
        .collect();
    Ok(AugmentedSkeleton { tuples })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum SegmentClass {
    Short,
    Long,
}

/// A slow increment inside a climbing segment, at path indices
/// `alpha < beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SlowWitness {
    pub alpha: usize,
    pub beta: usize,
    pub s_hat: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ClimbingSegment {
    pub class: SegmentClass,
    /// Only short segments are checked.
    pub clean: Option<bool>,
    pub witness: Option<SlowWitness>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ClimbingSkeleton {
    pub n: usize,
    pub phi: u64,
    pub u_n: i32,
    /// `τ_1, ..., τ_φ`: first index where the first coordinate reaches
    /// `j·u_n`.
    pub taus: Vec<usize>,
    pub sites: Vec<Site>,
    pub segments: Vec<ClimbingSegment>,
    /// Merged `τ`, witness and long-segment grid indices, sorted.
    pub sigma: Vec<usize>,
    /// Increments between consecutive `σ` values (starting from 0) that
    /// are slow.
    pub slow_sigma_increments: usize,
    /// Some lookup was missing or estimated.
    pub estimated: bool,
}

impl ClimbingSkeleton {
    pub fn long_count(&self) -> usize {
        self.segments.iter().filter(|s| s.class == SegmentClass::Long).count()
    }

    pub fn has_clean_short(&self) -> bool {
        self.segments.iter().any(|s| s.clean == Some(true))
    }

    pub fn n_sigma(&self) -> usize {
        self.sigma.len()
    }
}

/// Climbing skeleton of a path from `(0,0)` to `(n, x*)`. Slow means
/// `ŝ ≥ n^{1/2}/ψ(n)` with `n` the full path length.
pub fn climbing_skeleton<L: ExcessLookup + ?Sized>(path: &LatticePath, u_n: i32, lookup: &L, c3: f64) -> Result<ClimbingSkeleton, SkeletonError> {
    let n = path.len();
    let scales = scale_functions(n as u64, c3)?;
    let phi = scales.phi;
    if u_n <= 0 {
        return Err(SkeletonError::ZeroGrid { h_n: 0, phi });
    }
    let slow_at = libm::sqrt(n as f64) / scales.psi;
    let t = path.trace();
    let mut taus = Vec::with_capacity(phi as usize);
    let mut next = 0usize;
    for j in 1..=phi {
        let height = j as i64 * i64::from(u_n);
        let found = (next..=n).find(|&i| i64::from(t.at(i)[0]) == height);
        let tau = found.ok_or(SkeletonError::Height { height })?;
        taus.push(tau);
        next = tau;
    }
    let short_max = 2.0 * n as f64 / phi as f64;
    let grid = ((2 * n) as u64 / phi).max(1) as usize;
    let mut estimated = false;
    let slow_between = |a: usize, b: usize, est: &mut bool| -> Option<f64> {
        let inc = diff(t.at(b), t.at(a));
        match lookup.excess((b - a) as i32, &inc) {
            Some(v) => {
                *est |= v.estimated;
                (v.s_hat >= slow_at).then_some(v.s_hat)
            }
            None => {
                *est = true;
                None
            }
        }
    };
    let mut segments = Vec::with_capacity(taus.len());
    let mut sigma: BTreeSet<usize> = taus.iter().copied().collect();
    let mut prev = 0usize;
    for &tau in &taus {
        if (tau - prev) as f64 <= short_max {
            let mut witness = None;
            'scan: for a in prev..tau {
                for b in a + 1..=tau {
                    if let Some(s_hat) = slow_between(a, b, &mut estimated) {
                        witness = Some(SlowWitness { alpha: a, beta: b, s_hat });
                        break 'scan;
                    }
                }
            }
            if let Some(w) = witness {
                sigma.insert(w.alpha);
                sigma.insert(w.beta);
            }
            segments.push(ClimbingSegment { class: SegmentClass::Short, clean: Some(witness.is_none()), witness });
        } else {
            sigma.extend((prev + 1..tau).filter(|i| i % grid == 0));
            segments.push(ClimbingSegment { class: SegmentClass::Long, clean: None, witness: None });
        }
        prev = tau;
    }
    sigma.remove(&0);
    let sigma: Vec<usize> = sigma.into_iter().collect();
    let mut slow_sigma_increments = 0;
    let mut a = 0;
    for &b in &sigma {
        if slow_between(a, b, &mut estimated).is_some() {
            slow_sigma_increments += 1;
        }
        a = b;
    }
    let sites = taus.iter().map(|&i| t.site(i)).collect();
    Ok(ClimbingSkeleton { n, phi, u_n, taus, sites, segments, sigma, slow_sigma_increments, estimated })
}

/// Enumerated number of admissible `R_j` and its bound.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CountCheck {
    pub j: usize,
    pub in_b: bool,
    pub enumerated: u128,
    pub bound: u128,
    pub ok: bool,
    /// For `j ∉ B`: the per-block factor of the interpolating tuples.
    pub interpolation: Option<InterpolationCount>,
}

/// Tuples `(p_{j-1}, v_{j-1}, w_j, p_j)` consistent with a regular `R_j`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct InterpolationCount {
    pub count: u128,
    /// `(4h_n + 1)^{4d}`.
    pub h_bound: u128,
    /// `n^{4d}`.
    pub n_bound: u128,
    pub within_h_bound: bool,
    pub within_n_bound: bool,
}

fn pow(b: u128, e: usize) -> u128 {
    (0..e).fold(1u128, |acc, _| acc.saturating_mul(b))
}

/// Lattice offsets `x` with `|x|₁ ≤ len` and `|x|₁ ≡ len (mod 2)`.
fn cone_size(d: usize, len: i32) -> u128 {
    let mut count = 0u128;
    let mut x = vec![-len; d];
    loop {
        let l1: i32 = x.iter().map(|v| v.abs()).sum();
        if l1 <= len && (len - l1) % 2 == 0 {
            count += 1;
        }
        let mut a = 0;
        loop {
            if a == d {
                return count;
            }
            x[a] += 1;
            if x[a] <= len {
                break;
            }
            x[a] = -len;
            a += 1;
        }
    }
}

/// Sites `y` of the given parity with `|y - c|∞ ≤ r` satisfying `keep`.
fn count_box(c: &[i32], r: i32, parity: i32, keep: impl Fn(&[i32]) -> bool) -> u128 {
    let d = c.len();
    let mut count = 0u128;
    let mut y: Vec<i32> = c.iter().map(|v| v - r).collect();
    loop {
        if (y.iter().sum::<i32>() - parity).rem_euclid(2) == 0 && keep(&y) {
            count += 1;
        }
        let mut a = 0;
        loop {
            if a == d {
                return count;
            }
            y[a] += 1;
            if y[a] <= c[a] + r {
                break;
            }
            y[a] = c[a] - r;
            a += 1;
        }
    }
}

/// Grid points of `u·Z^d` within ℓ∞ distance `h` of the grid point `c`.
pub fn grid_points_within(c: &[i32], h: i32, u: i32) -> u128 {
    count_box(c, h, 0, |y| y.iter().all(|v| v.rem_euclid(u) == 0))
}

/// Counts the admissible values of `R_j` given `R_1, ..., R_{j-1}`.
///
/// For `j ∉ B` the new tuple is a pair of grid points, the first within
/// `h_n` of the projected previous endpoint and the second within `h_n` of
/// the first, bounded by `(3φ(n))^{2d}`. For `j ∈ B` it is a 2- or 4-tuple
/// of sites reachable inside the block, bounded by `(2n)^{4d}`.
pub fn skeleton_count_bound_check(params: &CoarseParams, prefix: &[CgTuple], j: usize, in_b: bool) -> Result<CountCheck, SkeletonError> {
    let (d, h, u, n, n1) = (params.d, params.h_n, params.u_n, params.n, params.n1);
    if d > 2 || h > 200 {
        return Err(SkeletonError::Guard { d, h_n: h });
    }
    let start_layer = (j as i32 - 1) * n;
    let prev = if j >= 2 { prefix.get(j - 2) } else { None };
    let anchor = prev.map_or_else(|| Site::origin(d), |t| t.last().clone());
    let exact_anchor = !matches!(prev, Some(CgTuple::Regular { .. }));
    if !in_b {
        let center: Vec<i32> = pi_project(&anchor, start_layer, u).transverse;
        let per_point = grid_points_within(&center, h, u);
        let enumerated = per_point * per_point;
        let bound = pow(3 * u128::from(params.phi), 2 * d);
        // Interpolating tuples for a regular tuple with start `v'` and end `w'`.
        let v_prime = center.clone();
        let w_prime = center;
        let p0 = count_box(&v_prime, 2 * h, start_layer, |_| true);
        let cell = |c: &[i32], layer: i32| count_box(c, u / 2, layer, |y| pi_project(&Site::new(layer, y.to_vec()), layer, u).transverse == c);
        let v = cell(&v_prime, start_layer + n1);
        let w = cell(&w_prime, start_layer + n - n1);
        let p1 = count_box(&w_prime, 2 * h, start_layer + n, |_| true);
        let count = p0 * v * w * p1;
        let h_bound = pow(4 * h as u128 + 1, 4 * d);
        let n_bound = pow(n as u128, 4 * d);
        let interpolation = InterpolationCount { count, h_bound, n_bound, within_h_bound: count <= h_bound, within_n_bound: count <= n_bound };
        return Ok(CountCheck { j, in_b, enumerated, bound, ok: enumerated <= bound, interpolation: Some(interpolation) });
    }
    // Choices for `d_{j-1}`: fixed after an exact tuple, else within `2h_n`.
    let starts = if exact_anchor { 1 } else { count_box(&anchor.transverse, 2 * h, start_layer, |_| true) };
    let pairs = cone_size(d, n);
    let quads = cone_size(d, n1) * cone_size(d, n - 2 * n1) * cone_size(d, n1);
    let enumerated = starts * (pairs + quads);
    let bound = pow(2 * n as u128, 4 * d);
    Ok(CountCheck { j, in_b, enumerated, bound, ok: enumerated <= bound, interpolation: None })
}
