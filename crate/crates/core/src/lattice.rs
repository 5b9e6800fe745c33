//! Geometry of the directed even lattice.
//!
//! A site is a pair `(n, x)` with `n` the layer and `x ∈ Z^d` the transverse
//! position; it belongs to the lattice when `n + x_1 + ... + x_d` is even.
//! Bonds join `(n, x)` to `(n + 1, x ± e_i)`, so a directed path is fully
//! described by its start site and a list of unit transverse steps.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("site {0} is not on the even sublattice")]
    Parity(Site),
    #[error("dimension mismatch: expected d={expected}, found d={found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate index {index} out of range for d={d}")]
    AxisOutOfRange { index: usize, d: usize },
    #[error("coordinate overflow")]
    Overflow,
    #[error("paths have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paths start on different layers ({0} vs {1})")]
    StartLayerMismatch(i32, i32),
    #[error("translation by an odd-parity vector leaves the lattice")]
    OddTranslation,
    #[error("invalid path: {0}")]
    InvalidPath(#[from] PathError),
    #[error("cannot parse path: {0}")]
    Parse(String),
}

/// First violation found while checking a path, with the index of the
/// offending step (or site, for site-list input).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at index {index}")]
pub struct PathError {
    pub index: usize,
    pub kind: PathErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathErrorKind {
    StartParity,
    DimensionMismatch,
    AxisOutOfRange,
    Overflow,
    LayerNotIncreasing,
    NotAdjacent,
}

impl fmt::Display for PathErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::StartParity => "start site off the lattice",
            Self::DimensionMismatch => "dimension mismatch",
            Self::AxisOutOfRange => "coordinate index out of range",
            Self::Overflow => "coordinate overflow",
            Self::LayerNotIncreasing => "layer does not advance by one",
            Self::NotAdjacent => "consecutive sites not adjacent",
        };
        f.write_str(s)
    }
}

/// A point `(layer, x)` of `Z^{d+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Site {
    pub layer: i32,
    pub transverse: Vec<i32>,
}

impl Site {
    pub fn new(layer: i32, transverse: impl Into<Vec<i32>>) -> Self {
        Self { layer, transverse: transverse.into() }
    }

    pub fn origin(d: usize) -> Self {
        Self { layer: 0, transverse: alloc::vec![0; d] }
    }

    pub fn dim(&self) -> usize {
        self.transverse.len()
    }

    pub fn is_lattice_site(&self) -> bool {
        is_lattice_site(self)
    }

    pub fn l1_distance(&self, other: &Site) -> u64 {
        l1(&self.transverse, &other.transverse)
    }

    pub fn linf_distance(&self, other: &Site) -> u64 {
        linf(&self.transverse, &other.transverse)
    }

    /// True when `other` is reachable from `self` by a directed path:
    /// `other` lies on a later (or the same) layer, inside the forward cone,
    /// with consistent parity.
    pub fn reaches(&self, other: &Site) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let dl = i64::from(other.layer) - i64::from(self.layer);
        if dl < 0 {
            return false;
        }
        let dx = self.l1_distance(other);
        dx <= dl as u64 && (dl as u64 - dx) % 2 == 0
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},(", self.layer)?;
        for (i, x) in self.transverse.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str("))")
    }
}

pub(crate) fn l1(a: &[i32], b: &[i32]) -> u64 {
    a.iter().zip(b).map(|(&p, &q)| (i64::from(p) - i64::from(q)).unsigned_abs()).sum()
}

pub(crate) fn linf(a: &[i32], b: &[i32]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| (i64::from(p) - i64::from(q)).unsigned_abs())
        .max()
        .unwrap_or(0)
}

/// Membership in the even sublattice: `layer + Σ transverse` is even.
pub fn is_lattice_site(site: &Site) -> bool {
    let s: i64 = i64::from(site.layer) + site.transverse.iter().map(|&x| i64::from(x)).sum::<i64>();
    s.rem_euclid(2) == 0
}

/// A directed bond `⟨(n,x),(n+1,y)⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    from: Site,
    to: Site,
}

impl Bond {
    pub fn new(from: Site, to: Site) -> Result<Self, LatticeError> {
        if from.dim() != to.dim() {
            return Err(LatticeError::DimensionMismatch { expected: from.dim(), found: to.dim() });
        }
        if !from.is_lattice_site() {
            return Err(LatticeError::Parity(from));
        }
        let adjacent = i64::from(to.layer) == i64::from(from.layer) + 1 && from.l1_distance(&to) == 1;
        if !adjacent {
            return Err(LatticeError::InvalidPath(PathError { index: 1, kind: PathErrorKind::NotAdjacent }));
        }
        Ok(Self { from, to })
    }

    pub fn from_step(from: &Site, step: Step) -> Result<Self, LatticeError> {
        let to = step.apply(from)?;
        Self::new(from.clone(), to)
    }

    pub fn from_site(&self) -> &Site {
        &self.from
    }

    pub fn to_site(&self) -> &Site {
        &self.to
    }

    /// The unit step taken by this bond.
    pub fn step(&self) -> Step {
        let (axis, delta) = self
            .from
            .transverse
            .iter()
            .zip(&self.to.transverse)
            .enumerate()
            .find_map(|(i, (a, b))| (a != b).then(|| (i, i64::from(*b) - i64::from(*a))))
            .expect("bond endpoints differ in one coordinate");
        Step::new(axis, if delta > 0 { Sign::Plus } else { Sign::Minus })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn delta(self) -> i32 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

/// One transverse unit move. `axis` is zero-based; the text format uses
/// one-based coordinate indices.
///
/// Steps order by `(axis, sign)` with `Minus < Plus`; that order is the
/// canonical tie-break used by the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub axis: u8,
    pub sign: Sign,
}

impl Step {
    pub fn new(axis: usize, sign: Sign) -> Self {
        Self { axis: axis as u8, sign }
    }

    /// Position of this step in the canonical order, `2·axis + (sign == Plus)`.
    pub fn ordinal(self) -> usize {
        2 * self.axis as usize + usize::from(self.sign == Sign::Plus)
    }

    pub fn from_ordinal(k: usize) -> Self {
        Self::new(k / 2, if k % 2 == 1 { Sign::Plus } else { Sign::Minus })
    }

    /// All `2d` steps in canonical order.
    pub fn all(d: usize) -> impl Iterator<Item = Step> {
        (0..2 * d).map(Step::from_ordinal)
    }

    pub fn apply(self, site: &Site) -> Result<Site, LatticeError> {
        let d = site.dim();
        let axis = self.axis as usize;
        if axis >= d {
            return Err(LatticeError::AxisOutOfRange { index: axis + 1, d });
        }
        let layer = site.layer.checked_add(1).ok_or(LatticeError::Overflow)?;
        let mut transverse = site.transverse.clone();
        transverse[axis] = transverse[axis].checked_add(self.sign.delta()).ok_or(LatticeError::Overflow)?;
        Ok(Site { layer, transverse })
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "{}{}", self.axis as usize + 1, s)
    }
}

/// The `2d` forward neighbours of a lattice site, in canonical step order.
pub fn forward_neighbors(site: &Site, d: usize) -> Result<Vec<Site>, LatticeError> {
    if site.dim() != d {
        return Err(LatticeError::DimensionMismatch { expected: d, found: site.dim() });
    }
    if !site.is_lattice_site() {
        return Err(LatticeError::Parity(site.clone()));
    }
    Step::all(d).map(|s| s.apply(site)).collect()
}

/// A directed lattice path stored as a start site plus unit steps; the site
/// sequence is derived on demand.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticePath {
    pub start: Site,
    pub steps: Vec<Step>,
}

impl LatticePath {
    pub fn new(start: Site, steps: Vec<Step>) -> Self {
        Self { start, steps }
    }

    pub fn empty(start: Site) -> Self {
        Self { start, steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    /// Build a path from an explicit site list, reporting the index of the
    /// first site that breaks adjacency.
    pub fn from_sites(sites: &[Site]) -> Result<Self, PathError> {
        let Some(first) = sites.first() else {
            return Err(PathError { index: 0, kind: PathErrorKind::StartParity });
        };
        if !first.is_lattice_site() {
            return Err(PathError { index: 0, kind: PathErrorKind::StartParity });
        }
        let mut steps = Vec::with_capacity(sites.len().saturating_sub(1));
        for (i, w) in sites.windows(2).enumerate() {
            let index = i + 1;
            let (a, b) = (&w[0], &w[1]);
            if a.dim() != b.dim() {
                return Err(PathError { index, kind: PathErrorKind::DimensionMismatch });
            }
            if i64::from(b.layer) != i64::from(a.layer) + 1 {
                return Err(PathError { index, kind: PathErrorKind::LayerNotIncreasing });
            }
            if a.l1_distance(b) != 1 {
                return Err(PathError { index, kind: PathErrorKind::NotAdjacent });
            }
            let bond = Bond { from: a.clone(), to: b.clone() };
            steps.push(bond.step());
        }
        Ok(Self { start: first.clone(), steps })
    }

    /// Check every invariant; on success returns the endpoint.
    pub fn validate(&self) -> Result<Site, PathError> {
        if !self.start.is_lattice_site() {
            return Err(PathError { index: 0, kind: PathErrorKind::StartParity });
        }
        let d = self.dim();
        let mut cur = self.start.clone();
        for (i, step) in self.steps.iter().enumerate() {
            if step.axis as usize >= d {
                return Err(PathError { index: i, kind: PathErrorKind::AxisOutOfRange });
            }
            cur = step.apply(&cur).map_err(|_| PathError { index: i, kind: PathErrorKind::Overflow })?;
        }
        Ok(cur)
    }

    pub fn end(&self) -> Result<Site, PathError> {
        self.validate()
    }

    /// The full site sequence, `len + 1` sites.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut cur = self.start.clone();
        out.push(cur.clone());
        for step in &self.steps {
            cur.layer += 1;
            cur.transverse[step.axis as usize] += step.sign.delta();
            out.push(cur.clone());
        }
        out
    }

    pub fn trace(&self) -> PathTrace {
        PathTrace::new(self)
    }

    /// Bonds traversed, in order.
    pub fn bonds(&self) -> Vec<Bond> {
        let sites = self.sites();
        sites.windows(2).map(|w| Bond { from: w[0].clone(), to: w[1].clone() }).collect()
    }

    /// Sub-path between step indices `from..to`.
    pub fn segment(&self, from: usize, to: usize) -> LatticePath {
        let trace = self.trace();
        LatticePath { start: trace.site(from), steps: self.steps[from..to].to_vec() }
    }

    pub fn concat(&self, other: &LatticePath) -> Option<LatticePath> {
        let end = self.validate().ok()?;
        (end == other.start).then(|| {
            let mut steps = self.steps.clone();
            steps.extend_from_slice(&other.steps);
            LatticePath { start: self.start.clone(), steps }
        })
    }
}

/// Validate a path: `Ok(endpoint)` iff every invariant holds.
pub fn validate_path(path: &LatticePath) -> Result<Site, PathError> {
    path.validate()
}

/// Flat table of the transverse positions `x^{(0)}, ..., x^{(len)}` of a path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathTrace {
    pub start_layer: i32,
    d: usize,
    coords: Vec<i32>,
}

impl PathTrace {
    fn new(path: &LatticePath) -> Self {
        let d = path.dim();
        let mut coords = Vec::with_capacity((path.len() + 1) * d);
        coords.extend_from_slice(&path.start.transverse);
        for (i, step) in path.steps.iter().enumerate() {
            let base = i * d;
            for a in 0..d {
                let prev = coords[base + a];
                coords.push(if a == step.axis as usize { prev + step.sign.delta() } else { prev });
            }
        }
        Self { start_layer: path.start.layer, d, coords }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.coords.len() / self.d.max(1) - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, i: usize) -> &[i32] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn site(&self, i: usize) -> Site {
        Site { layer: self.start_layer + i as i32, transverse: self.at(i).to_vec() }
    }
}

/// Deterministic point maps on `Z^{d+1}` that fix the layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathMap {
    /// Negate transverse coordinates `2..d`.
    Zeta,
    /// Swap transverse coordinates 1 and `j` (one-based).
    Xi(usize),
    /// Negate every transverse coordinate.
    Eta,
    /// Shift by an even-parity vector `(layer, x)`.
    Translate(Site),
}

impl PathMap {
    fn map_point(&self, site: &Site) -> Result<Site, LatticeError> {
        let mut out = site.clone();
        match self {
            PathMap::Zeta => out.transverse.iter_mut().skip(1).for_each(|x| *x = -*x),
            PathMap::Xi(j) => out.transverse.swap(0, j - 1),
            PathMap::Eta => out.transverse.iter_mut().for_each(|x| *x = -*x),
            PathMap::Translate(v) => {
                out.layer = out.layer.checked_add(v.layer).ok_or(LatticeError::Overflow)?;
                for (x, dx) in out.transverse.iter_mut().zip(&v.transverse) {
                    *x = x.checked_add(*dx).ok_or(LatticeError::Overflow)?;
                }
            }
        }
        Ok(out)
    }

    fn map_step(&self, step: Step) -> Step {
        match self {
            PathMap::Zeta if step.axis > 0 => Step { axis: step.axis, sign: step.sign.flip() },
            PathMap::Xi(j) => {
                let other = (*j - 1) as u8;
                let axis = if step.axis == 0 {
                    other
                } else if step.axis == other {
                    0
                } else {
                    step.axis
                };
                Step { axis, sign: step.sign }
            }
            PathMap::Eta => Step { axis: step.axis, sign: step.sign.flip() },
            _ => step,
        }
    }
}

/// Pointwise image of a path under one of the lattice symmetries.
pub fn transform_path(path: &LatticePath, map: &PathMap) -> Result<LatticePath, LatticeError> {
    let d = path.dim();
    match map {
        PathMap::Xi(j) if *j == 0 || *j > d => {
            return Err(LatticeError::AxisOutOfRange { index: *j, d });
        }
        PathMap::Translate(v) => {
            if v.dim() != d {
                return Err(LatticeError::DimensionMismatch { expected: d, found: v.dim() });
            }
            if !v.is_lattice_site() {
                return Err(LatticeError::OddTranslation);
            }
        }
        _ => {}
    }
    let start = map.map_point(&path.start)?;
    let steps = path.steps.iter().map(|&s| map.map_step(s)).collect();
    Ok(LatticePath { start, steps })
}

/// A point of a [`PseudoPath`]; coordinates are widened so that sums of
/// lattice sites never overflow.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PseudoPoint {
    pub layer: i64,
    pub transverse: Vec<i64>,
}

/// A sequence of points on layers advancing by a fixed even stride;
/// consecutive points need not be adjacent. Kept apart from
/// [`LatticePath`] so it can never be fed to the passage engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoPath {
    points: Vec<PseudoPoint>,
    stride: i64,
}

impl PseudoPath {
    pub fn new(points: Vec<PseudoPoint>, stride: i64) -> Option<Self> {
        let ok = stride > 0
            && stride % 2 == 0
            && points.windows(2).all(|w| w[1].layer - w[0].layer == stride);
        ok.then_some(Self { points, stride })
    }

    pub fn points(&self) -> &[PseudoPoint] {
        &self.points
    }

    pub fn stride(&self) -> i64 {
        self.stride
    }
}

/// Pointwise vector sum of two equal-length paths starting on the same layer.
pub fn symmetrized_sum(a: &LatticePath, b: &LatticePath) -> Result<PseudoPath, LatticeError> {
    if a.len() != b.len() {
        return Err(LatticeError::LengthMismatch(a.len(), b.len()));
    }
    if a.start.layer != b.start.layer {
        return Err(LatticeError::StartLayerMismatch(a.start.layer, b.start.layer));
    }
    if a.dim() != b.dim() {
        return Err(LatticeError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let (ta, tb) = (a.trace(), b.trace());
    let points = (0..=a.len())
        .map(|i| PseudoPoint {
            layer: 2 * (i64::from(a.start.layer) + i as i64),
            transverse: ta.at(i).iter().zip(tb.at(i)).map(|(&p, &q)| i64::from(p) + i64::from(q)).collect(),
        })
        .collect();
    Ok(PseudoPath { points, stride: 2 })
}

impl fmt::Display for LatticePath {
    /// `start_layer start_x1..xd; m1s1 m2s2 ...`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start.layer)?;
        for x in &self.start.transverse {
            write!(f, " {x}")?;
        }
        f.write_str(";")?;
        for s in &self.steps {
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

impl FromStr for LatticePath {
    type Err = LatticeError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = |m: &str| LatticeError::Parse(alloc::format!("{m} in {line:?}"));
        let (head, tail) = line.split_once(';').ok_or_else(|| bad("missing ';'"))?;
        let mut nums = head.split_whitespace().map(|t| t.parse::<i32>());
        let layer = nums.next().ok_or_else(|| bad("missing start layer"))?.map_err(|_| bad("bad integer"))?;
        let transverse = nums.collect::<Result<Vec<_>, _>>().map_err(|_| bad("bad integer"))?;
        if transverse.is_empty() {
            return Err(bad("missing transverse coordinates"));
        }
        let d = transverse.len();
        let mut steps = Vec::new();
        for tok in tail.split_whitespace() {
            let (idx, sign) = tok.split_at(tok.len() - 1);
            let sign = match sign {
                "+" => Sign::Plus,
                "-" => Sign::Minus,
                _ => return Err(bad("step sign must be + or -")),
            };
            let idx: usize = idx.parse().map_err(|_| bad("bad coordinate index"))?;
            if idx == 0 || idx > d {
                return Err(LatticeError::AxisOutOfRange { index: idx, d });
            }
            steps.push(Step::new(idx - 1, sign));
        }
        let path = LatticePath { start: Site { layer, transverse }, steps };
        path.validate()?;
        Ok(path)
    }
}
