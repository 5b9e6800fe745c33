//! Exact min-plus passage times, fronts and geodesics.
//!
//! A sweep advances one layer at a time through a box per layer. The box at
//! layer `l` is the forward cone of the source intersected with the hull of
//! the backward cones of all requested targets, so every requested cell sees
//! all of its competing paths. Only cells of the right parity are touched.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::field::BondWeights;
use crate::lattice::{LatticeError, LatticePath, PathError, Site, Step};

/// Largest transverse dimension handled by the engine.
pub const MAX_DIM: usize = 3;
/// Largest number of cells in one layer box.
pub const MAX_LAYER_CELLS: u64 = 1 << 25;
/// Largest total argmin table, in bytes, for geodesic extraction.
pub const MAX_ARGMIN_BYTES: u64 = 1 << 30;
/// Largest layer gap accepted by the brute-force enumerator.
pub const BRUTE_FORCE_MAX_LAYERS: i32 = 12;

const NO_ARG: u8 = u8::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("{to} is not reachable from {from}")]
    Unreachable { from: Site, to: Site },
    #[error("layer {layer} window holds {cells} cells, above the limit")]
    WindowOverflow { layer: i64, cells: u64 },
    #[error("unsupported transverse dimension {0}")]
    Dimension(usize),
    #[error("brute force limited to {max} layers, asked for {layers}")]
    Guard { layers: i64, max: i32 },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// An axis-aligned box of transverse coordinates. Empty when any `lo > hi`.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Window {
    pub lo: Vec<i32>,
    pub hi: Vec<i32>,
}

impl Window {
    pub fn new(lo: Vec<i32>, hi: Vec<i32>) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: &[i32]) -> Self {
        Self { lo: x.to_vec(), hi: x.to_vec() }
    }

    /// `center ± radius` in every coordinate.
    pub fn ball(center: &[i32], radius: i32) -> Self {
        Self { lo: center.iter().map(|c| c - radius).collect(), hi: center.iter().map(|c| c + radius).collect() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l + 1) as usize).product()
        }
    }

    pub fn contains(&self, x: &[i32]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Row-major index with the last axis fastest.
    pub fn index(&self, x: &[i32]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for i in 0..self.dim() {
            idx = idx * (self.hi[i] - self.lo[i] + 1) as usize + (x[i] - self.lo[i]) as usize;
        }
        Some(idx)
    }

    /// Coordinates of the cell at a row-major index.
    pub fn coords(&self, mut idx: usize) -> Vec<i32> {
        let mut x = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            let w = (self.hi[i] - self.lo[i] + 1) as usize;
            x[i] = self.lo[i] + (idx % w) as i32;
            idx /= w;
        }
        x
    }

    fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [0usize; MAX_DIM];
        let d = self.dim();
        let mut acc = 1usize;
        for i in (0..d).rev() {
            s[i] = acc;
            acc *= (self.hi[i] - self.lo[i] + 1).max(0) as usize;
        }
        s
    }
}

/// Passage times from a source to every cell of a window in one layer;
/// `+∞` on cells that are unreachable or of the wrong parity.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerFront {
    pub layer: i32,
    pub window: Window,
    pub values: Vec<f64>,
}

impl LayerFront {
    pub fn get(&self, x: &[i32]) -> f64 {
        self.window.index(x).map_or(f64::INFINITY, |i| self.values[i])
    }

    /// Finite cells in row-major order.
    pub fn finite_cells(&self) -> impl Iterator<Item = (Vec<i32>, f64)> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(i, &v)| (self.window.coords(i), v))
    }
}

/// A borrowed front handed to sweep visitors.
#[derive(Clone, Copy, Debug)]
pub struct FrontView<'a> {
    pub layer: i32,
    pub window: &'a Window,
    pub values: &'a [f64],
}

impl FrontView<'_> {
    pub fn get(&self, x: &[i32]) -> f64 {
        self.window.index(x).map_or(f64::INFINITY, |i| self.values[i])
    }

    pub fn to_front(&self) -> LayerFront {
        LayerFront { layer: self.layer, window: self.window.clone(), values: self.values.to_vec() }
    }
}

/// A request for exact values on a window of one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetBox {
    pub layer: i32,
    pub window: Window,
}

impl TargetBox {
    pub fn point(site: &Site) -> Self {
        Self { layer: site.layer, window: Window::point(&site.transverse) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PassageResult {
    pub value: f64,
    pub geodesic: Option<LatticePath>,
}

/// Argmin choices per layer, recorded for geodesic extraction.
struct ArgminTable {
    layers: Vec<(Window, Vec<u8>)>,
    bytes: u64,
}

fn region(source: &Site, l: i32, targets: &[TargetBox]) -> Result<Window, EngineError> {
    let layer = i64::from(source.layer) + i64::from(l);
    let d = source.dim();
    let mut lo = vec![0i32; d];
    let mut hi = vec![0i32; d];
    for i in 0..d {
        let s = i64::from(source.transverse[i]);
        let mut a = s - i64::from(l);
        let mut b = s + i64::from(l);
        let mut tlo = i64::MAX;
        let mut thi = i64::MIN;
        for t in targets.iter().filter(|t| i64::from(t.layer) >= layer && !t.window.is_empty()) {
            let gap = i64::from(t.layer) - layer;
            tlo = tlo.min(i64::from(t.window.lo[i]) - gap);
            thi = thi.max(i64::from(t.window.hi[i]) + gap);
        }
        a = a.max(tlo);
        b = b.min(thi);
        if a > b {
            a = 1;
            b = 0;
        }
        lo[i] = i32::try_from(a).map_err(|_| LatticeError::Overflow)?;
        hi[i] = i32::try_from(b).map_err(|_| LatticeError::Overflow)?;
    }
    let w = Window { lo, hi };
    let cells: u64 = if w.is_empty() { 0 } else { w.lo.iter().zip(&w.hi).map(|(l, h)| (i64::from(*h) - i64::from(*l) + 1) as u64).product() };
    if cells > MAX_LAYER_CELLS {
        return Err(EngineError::WindowOverflow { layer, cells });
    }
    Ok(w)
}

fn check_dims<W: BondWeights + ?Sized>(w: &W, site: &Site) -> Result<usize, EngineError> {
    let d = w.dim();
    if d == 0 || d > MAX_DIM {
        return Err(EngineError::Dimension(d));
    }
    if site.dim() != d {
        return Err(LatticeError::DimensionMismatch { expected: d, found: site.dim() }.into());
    }
    Ok(d)
}

/// Runs the layer recurrence from `source` up to the highest target layer,
/// handing each layer's front to `visit`. Values are exact on every target
/// cell and on every cell whose backward cone fits inside later boxes.
pub fn sweep<W, F>(w: &W, source: &Site, targets: &[TargetBox], visit: F) -> Result<(), EngineError>
where
    W: BondWeights + ?Sized,
    F: FnMut(FrontView<'_>),
{
    sweep_inner(w, source, targets, None, visit)
}

fn sweep_inner<W, F>(w: &W, source: &Site, targets: &[TargetBox], mut argmin: Option<&mut ArgminTable>, mut visit: F) -> Result<(), EngineError>
where
    W: BondWeights + ?Sized,
    F: FnMut(FrontView<'_>),
{
    let d = check_dims(w, source)?;
    if !source.is_lattice_site() {
        return Err(LatticeError::Parity(source.clone()).into());
    }
    for t in targets {
        if t.window.dim() != d {
            return Err(LatticeError::DimensionMismatch { expected: d, found: t.window.dim() }.into());
        }
    }
    let top = targets.iter().map(|t| i64::from(t.layer) - i64::from(source.layer)).max().unwrap_or(0);
    if top < 0 {
        return Ok(());
    }
    let top = i32::try_from(top).map_err(|_| LatticeError::Overflow)?;

    let mut prev_win = region(source, 0, targets)?;
    let mut prev = vec![f64::INFINITY; prev_win.len()];
    if let Some(i) = prev_win.index(&source.transverse) {
        prev[i] = 0.0;
    }
    if let Some(table) = argmin.as_deref_mut() {
        table.layers.push((prev_win.clone(), vec![NO_ARG; prev.len()]));
    }
    visit(FrontView { layer: source.layer, window: &prev_win, values: &prev });

    let steps: Vec<Step> = Step::all(d).collect();
    let mut cur: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for l in 1..=top {
        let layer = source.layer + l;
        let cur_win = region(source, l, targets)?;
        cur.clear();
        cur.resize(cur_win.len(), f64::INFINITY);
        let mut args = if argmin.is_some() { vec![NO_ARG; cur.len()] } else { Vec::new() };
        if let Some(table) = argmin.as_deref_mut() {
            table.bytes += cur.len() as u64;
            if table.bytes > MAX_ARGMIN_BYTES {
                return Err(EngineError::WindowOverflow { layer: i64::from(layer), cells: table.bytes });
            }
        }
        if !cur_win.is_empty() && !prev_win.is_empty() {
            relax_layer(w, layer, &steps, &prev_win, &prev, &cur_win, &mut cur, &mut weights, argmin.is_some().then_some(&mut args[..]));
        }
        if let Some(table) = argmin.as_deref_mut() {
            table.layers.push((cur_win.clone(), args));
        }
        visit(FrontView { layer, window: &cur_win, values: &cur });
        core::mem::swap(&mut prev, &mut cur);
        prev_win = cur_win;
    }
    Ok(())
}

/// One min-plus step `T(layer, y) = min_k T(layer-1, y - step_k) + ω`.
/// Candidates are scanned in canonical step order and only a strictly
/// smaller value replaces the incumbent.
#[allow(clippy::too_many_arguments)]
fn relax_layer<W: BondWeights + ?Sized>(
    w: &W,
    layer: i32,
    steps: &[Step],
    pwin: &Window,
    prev: &[f64],
    cwin: &Window,
    cur: &mut [f64],
    weights: &mut Vec<f64>,
    mut args: Option<&mut [u8]>,
) {
    let d = cwin.dim();
    let last = d - 1;
    let cstr = cwin.strides();
    let pstr = pwin.strides();
    let (plo_last, phi_last) = (pwin.lo[last], pwin.hi[last]);
    // Outgoing weights of every reachable cell of the previous layer.
    let fan = 2 * d;
    weights.clear();
    weights.resize(prev.len() * fan, 0.0);
    let mut x = [0i32; MAX_DIM];
    x[..d].copy_from_slice(&pwin.lo);
    for (i, v) in prev.iter().enumerate() {
        if *v < f64::INFINITY {
            w.site_weights(layer - 1, &x[..d], &mut weights[i * fan..(i + 1) * fan]);
        }
        for a in (0..d).rev() {
            if x[a] < pwin.hi[a] {
                x[a] += 1;
                break;
            }
            x[a] = pwin.lo[a];
        }
    }
    let mut prefix = [0i32; MAX_DIM];
    prefix[..last].copy_from_slice(&cwin.lo[..last]);
    loop {
        let mut row_base = 0usize;
        let mut prefix_sum = i64::from(layer);
        for i in 0..last {
            row_base += (prefix[i] - cwin.lo[i]) as usize * cstr[i];
            prefix_sum += i64::from(prefix[i]);
        }
        // Per step: offset of the predecessor row in `prev`, shift along the
        // last axis, and predecessor coordinates with the last one to fill.
        let mut bases = [usize::MAX; 2 * MAX_DIM];
        let mut shifts = [0i32; 2 * MAX_DIM];
        for (k, step) in steps.iter().enumerate() {
            let a = step.axis as usize;
            let delta = step.sign.delta();
            let mut p = prefix;
            if a < last {
                p[a] -= delta;
            } else {
                shifts[k] = delta;
            }
            if (0..last).all(|i| pwin.lo[i] <= p[i] && p[i] <= pwin.hi[i]) {
                bases[k] = (0..last).map(|i| (p[i] - pwin.lo[i]) as usize * pstr[i]).sum();
            }
        }
        let mut y = cwin.lo[last];
        if (prefix_sum + i64::from(y)).rem_euclid(2) != 0 {
            y += 1;
        }
        while y <= cwin.hi[last] {
            let mut best = f64::INFINITY;
            let mut arg = NO_ARG;
            for k in 0..steps.len() {
                if bases[k] == usize::MAX {
                    continue;
                }
                let py = y - shifts[k];
                if py < plo_last || py > phi_last {
                    continue;
                }
                let pidx = bases[k] + (py - plo_last) as usize;
                let v = prev[pidx];
                if v == f64::INFINITY {
                    continue;
                }
                let cand = v + weights[pidx * fan + k];
                if cand < best {
                    best = cand;
                    arg = k as u8;
                }
            }
            let idx = row_base + (y - cwin.lo[last]) as usize;
            cur[idx] = best;
            if let Some(a) = args.as_deref_mut() {
                a[idx] = arg;
            }
            y += 2;
        }
        // Advance the prefix odometer over axes 0..last.
        let mut i = last;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if prefix[i] < cwin.hi[i] {
                prefix[i] += 1;
                break;
            }
            prefix[i] = cwin.lo[i];
        }
    }
}

/// Errors unless `target` lies in the forward cone of `source` with
/// matching parity.
pub fn check_reachable(source: &Site, target: &Site) -> Result<(), EngineError> {
    if source.dim() != target.dim() {
        return Err(LatticeError::DimensionMismatch { expected: source.dim(), found: target.dim() }.into());
    }
    let gap = i64::from(target.layer) - i64::from(source.layer);
    let reachable = source.is_lattice_site() && target.is_lattice_site() && gap >= 0 && source.l1_distance(target) as i64 <= gap;
    if reachable {
        Ok(())
    } else {
        Err(EngineError::Unreachable { from: source.clone(), to: target.clone() })
    }
}

/// `T(source, (source.layer + m, x))` for every `x` with
/// `|x - source|₁ ≤ m`, on the box `source ± m`.
pub fn layer_passage_times<W: BondWeights + ?Sized>(w: &W, source: &Site, m: i32) -> Result<LayerFront, EngineError> {
    check_dims(w, source)?;
    if m < 0 {
        return Err(EngineError::Unreachable { from: source.clone(), to: Site::new(source.layer.saturating_add(m), source.transverse.clone()) });
    }
    let layer = source.layer.checked_add(m).ok_or(LatticeError::Overflow)?;
    passage_to_window(w, source, layer, Window::ball(&source.transverse, m))
}

/// Passage times from `source` to every cell of `window` in `layer`.
pub fn passage_to_window<W: BondWeights + ?Sized>(w: &W, source: &Site, layer: i32, window: Window) -> Result<LayerFront, EngineError> {
    let target = TargetBox { layer, window };
    let mut out = None;
    sweep(w, source, core::slice::from_ref(&target), |f| {
        if f.layer == layer {
            out = Some(f.to_front());
        }
    })?;
    Ok(out.unwrap_or(LayerFront { layer, window: target.window.clone(), values: vec![f64::INFINITY; target.window.len()] }))
}

/// Exact passage times to several targets with one sweep.
pub fn passage_to_targets<W: BondWeights + ?Sized>(w: &W, source: &Site, targets: &[Site]) -> Result<Vec<f64>, EngineError> {
    check_dims(w, source)?;
    for t in targets {
        check_reachable(source, t)?;
    }
    let boxes: Vec<TargetBox> = targets.iter().map(TargetBox::point).collect();
    let mut out = vec![f64::INFINITY; targets.len()];
    sweep(w, source, &boxes, |f| {
        for (slot, t) in out.iter_mut().zip(targets) {
            if t.layer == f.layer {
                *slot = f.get(&t.transverse);
            }
        }
    })?;
    Ok(out)
}

/// `T(source, target)`.
pub fn min_passage_time<W: BondWeights + ?Sized>(w: &W, source: &Site, target: &Site) -> Result<f64, EngineError> {
    Ok(passage_to_targets(w, source, core::slice::from_ref(target))?[0])
}

/// `T(source, target)` with a geodesic. Among tied predecessors the one
/// reached by the smallest step in `(axis, Minus < Plus)` order is kept.
pub fn geodesic<W: BondWeights + ?Sized>(w: &W, source: &Site, target: &Site) -> Result<PassageResult, EngineError> {
    check_dims(w, source)?;
    check_reachable(source, target)?;
    let mut table = ArgminTable { layers: Vec::new(), bytes: 0 };
    let mut value = f64::INFINITY;
    sweep_inner(w, source, &[TargetBox::point(target)], Some(&mut table), |f| {
        if f.layer == target.layer {
            value = f.get(&target.transverse);
        }
    })?;
    let mut steps = Vec::with_capacity(table.layers.len().saturating_sub(1));
    let mut x = target.transverse.clone();
    for (win, args) in table.layers.iter().skip(1).rev() {
        let idx = win.index(&x).expect("geodesic stays inside the swept boxes");
        let step = Step::from_ordinal(args[idx] as usize);
        x[step.axis as usize] -= step.sign.delta();
        steps.push(step);
    }
    steps.reverse();
    Ok(PassageResult { value, geodesic: Some(LatticePath::new(source.clone(), steps)) })
}

/// `T(γ)`: the weights along a valid path, summed in path order.
pub fn path_weight<W: BondWeights + ?Sized>(w: &W, path: &LatticePath) -> Result<f64, EngineError> {
    check_dims(w, &path.start)?;
    path.validate()?;
    let mut x = path.start.transverse.clone();
    let mut total = 0.0;
    for (i, step) in path.steps.iter().enumerate() {
        total += w.step_weight(path.start.layer + i as i32, &x, *step);
        x[step.axis as usize] += step.sign.delta();
    }
    Ok(total)
}

/// `Σ T(u_i, v_i)` over segments that need not connect.
pub fn skeleton_passage_time<W: BondWeights + ?Sized>(w: &W, segments: &[(Site, Site)]) -> Result<f64, EngineError> {
    let mut total = 0.0;
    for (u, v) in segments {
        total += min_passage_time(w, u, v)?;
    }
    Ok(total)
}

fn brute_guard(source: &Site, m: i64) -> Result<(), EngineError> {
    if m > i64::from(BRUTE_FORCE_MAX_LAYERS) {
        return Err(EngineError::Guard { layers: m, max: BRUTE_FORCE_MAX_LAYERS });
    }
    if m < 0 {
        return Err(EngineError::Unreachable { from: source.clone(), to: source.clone() });
    }
    Ok(())
}

/// Visits every move sequence of length `m` from `source`, pruning those
/// that can no longer land on `target` when one is given.
fn enumerate_paths<W: BondWeights + ?Sized>(w: &W, source: &Site, m: i32, target: Option<&[i32]>, visit: &mut dyn FnMut(&[i32], f64)) {
    fn rec<W: BondWeights + ?Sized>(w: &W, layer: i32, left: i32, x: &mut Vec<i32>, acc: f64, target: Option<&[i32]>, visit: &mut dyn FnMut(&[i32], f64)) {
        if let Some(t) = target {
            let dist: i64 = x.iter().zip(t).map(|(a, b)| (i64::from(*a) - i64::from(*b)).abs()).sum();
            if dist > i64::from(left) {
                return;
            }
        }
        if left == 0 {
            visit(x, acc);
            return;
        }
        for step in Step::all(x.len()) {
            let wt = w.step_weight(layer, x, step);
            let a = step.axis as usize;
            x[a] += step.sign.delta();
            rec(w, layer + 1, left - 1, x, acc + wt, target, visit);
            x[a] -= step.sign.delta();
        }
    }
    let mut x = source.transverse.clone();
    rec(w, source.layer, m, &mut x, 0.0, target, visit);
}

/// Minimum of `T(γ)` over an explicit enumeration of all move sequences
/// from `source` that land on `target`. Limited to short gaps.
pub fn brute_force_passage<W: BondWeights + ?Sized>(w: &W, source: &Site, target: &Site) -> Result<f64, EngineError> {
    check_dims(w, source)?;
    brute_guard(source, i64::from(target.layer) - i64::from(source.layer))?;
    check_reachable(source, target)?;
    let mut best = f64::INFINITY;
    enumerate_paths(w, source, target.layer - source.layer, Some(&target.transverse), &mut |_, v| best = best.min(v));
    Ok(best)
}

/// Brute-force minimum for every endpoint in layer `source.layer + m`.
pub fn brute_force_front<W: BondWeights + ?Sized>(w: &W, source: &Site, m: i32) -> Result<BTreeMap<Vec<i32>, f64>, EngineError> {
    check_dims(w, source)?;
    brute_guard(source, i64::from(m))?;
    if !source.is_lattice_site() {
        return Err(LatticeError::Parity(source.clone()).into());
    }
    let mut out: BTreeMap<Vec<i32>, f64> = BTreeMap::new();
    enumerate_paths(w, source, m, None, &mut |x, v| {
        let e = out.entry(x.to_vec()).or_insert(f64::INFINITY);
        *e = e.min(v);
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::WeightField;
    use crate::lattice::Sign;
    use crate::law::PassageLaw;
    use alloc::string::ToString;

    fn exp_field(seed: u64, d: usize) -> WeightField {
        WeightField::new(seed, PassageLaw::exponential(1.0), d).unwrap()
    }

    fn const_field(d: usize) -> WeightField {
        WeightField::new(0, "const:value=1".parse().unwrap(), d).unwrap()
    }

    #[test]
    fn zero_layers_is_a_single_zero_cell() {
        let f = layer_passage_times(&exp_field(1, 2), &Site::origin(2), 0).unwrap();
        assert_eq!(f.finite_cells().collect::<Vec<_>>(), vec![(vec![0, 0], 0.0)]);
    }

    #[test]
    fn constant_weights_give_layer_gap() {
        let f = layer_passage_times(&const_field(2), &Site::origin(2), 6).unwrap();
        let cells: Vec<_> = f.finite_cells().collect();
        assert!(cells.iter().all(|(_, v)| *v == 6.0));
        // Sites with |x|₁ ≤ 6 and even coordinate sum.
        let expected = (-6i32..=6).flat_map(|a| (-6i32..=6).map(move |b| (a, b))).filter(|(a, b)| a.abs() + b.abs() <= 6 && (a + b) % 2 == 0).count();
        assert_eq!(cells.len(), expected);
        assert_eq!(min_passage_time(&const_field(1), &Site::origin(1), &Site::new(40, [0])).unwrap(), 40.0);
    }

    #[test]
    fn unreachable_targets_are_errors() {
        let f = exp_field(1, 1);
        assert!(matches!(min_passage_time(&f, &Site::origin(1), &Site::new(2, [4])), Err(EngineError::Unreachable { .. })));
        assert!(matches!(min_passage_time(&f, &Site::origin(1), &Site::new(2, [1])), Err(EngineError::Unreachable { .. })));
        assert!(matches!(min_passage_time(&f, &Site::new(2, [0]), &Site::origin(1)), Err(EngineError::Unreachable { .. })));
        assert_eq!(min_passage_time(&f, &Site::new(2, [0]), &Site::new(2, [0])).unwrap(), 0.0);
    }

    #[test]
    fn brute_force_small_cases() {
        let f = exp_field(5, 1);
        let o = Site::origin(1);
        let w_plus = f.step_weight(0, &[0], Step::new(0, Sign::Plus));
        assert_eq!(brute_force_passage(&f, &o, &Site::new(1, [1])).unwrap(), w_plus);
        let p1 = w_plus + f.step_weight(1, &[1], Step::new(0, Sign::Minus));
        let p2 = f.step_weight(0, &[0], Step::new(0, Sign::Minus)) + f.step_weight(1, &[-1], Step::new(0, Sign::Plus));
        assert_eq!(brute_force_passage(&f, &o, &Site::new(2, [0])).unwrap(), p1.min(p2));
        assert!(matches!(brute_force_passage(&f, &o, &Site::new(14, [0])), Err(EngineError::Guard { .. })));
    }

    #[test]
    fn dp_matches_brute_force_every_cell() {
        for d in 1..=2 {
            for seed in 0..10 {
                let f = exp_field(seed, d);
                for m in [1, 2, 5, 6] {
                    let front = layer_passage_times(&f, &Site::origin(d), m).unwrap();
                    let brute = brute_force_front(&f, &Site::origin(d), m).unwrap();
                    assert_eq!(front.finite_cells().count(), brute.len());
                    for (x, v) in &brute {
                        assert_eq!(front.get(x), *v);
                    }
                }
            }
        }
    }

    #[test]
    fn geodesic_weight_equals_value() {
        for d in 1..=3 {
            let f = exp_field(11, d);
            let mut t = vec![0; d];
            t[0] = 4;
            let target = Site::new(30, t);
            let r = geodesic(&f, &Site::origin(d), &target).unwrap();
            let path = r.geodesic.unwrap();
            assert_eq!(path.end().unwrap(), target);
            assert_eq!(path_weight(&f, &path).unwrap(), r.value);
            assert_eq!(r.value, min_passage_time(&f, &Site::origin(d), &target).unwrap());
        }
    }

    #[test]
    fn tied_geodesic_is_canonical() {
        let r = geodesic(&const_field(1), &Site::origin(1), &Site::new(4, [0])).unwrap();
        assert_eq!(r.value, 4.0);
        // Each backtrack step prefers the predecessor reached by `1-`.
        assert_eq!(r.geodesic.unwrap().to_string(), "0 0; 1+ 1+ 1- 1-");
    }

    #[test]
    fn multi_target_sweep_agrees_with_single_queries() {
        let f = exp_field(3, 1);
        let targets: Vec<Site> = [8, 16, 32, 64].iter().map(|&n| Site::new(n, [0])).collect();
        let all = passage_to_targets(&f, &Site::origin(1), &targets).unwrap();
        for (t, v) in targets.iter().zip(&all) {
            assert_eq!(*v, min_passage_time(&f, &Site::origin(1), t).unwrap());
        }
    }

    #[test]
    fn skeleton_segments_sum() {
        let f = const_field(1);
        let segs = [(Site::new(0, [0]), Site::new(4, [2])), (Site::new(10, [0]), Site::new(16, [0]))];
        assert_eq!(skeleton_passage_time(&f, &segs).unwrap(), 10.0);
    }
}
