//! Interval and cap families on `[0,1]^d`, built in exact dyadic arithmetic.
//!
//! The one-dimensional building block is the anisotropic partition of
//! `[0,1]` at scale `R`: a flat piece `[0, R^{-1/(2m)}]` next to the
//! degenerate point, followed by dyadic shells `[2^{k-1}, 2^k]·R^{-1/(2m)}`
//! each cut into `2^{(2m-2)(k-1)}` equal pieces. Products of these (and of
//! uniform `R^{-1/2}` blocks) give every family used by the experiments.

mod dyadic;
mod io;
mod omega;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dyadic::DyadicRational;
pub use io::{family_from_json, family_to_csv, family_to_json, FamilyJson};
pub use omega::{block_pieces, omega_regions, tau_decompose, OmegaRegion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapsError {
    #[error("non-dyadic scale {value}: {what} is not an integer power of 2")]
    NonDyadicScale { value: u64, what: String },
    #[error("point coordinate {0} lies outside [0,1]")]
    OutOfDomain(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported frequency dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("region {0} is handled by rescaling, not subdivision")]
    UnsupportedRegion(usize),
    #[error("family kind {0} cannot be constructed directly")]
    UnsupportedKind(String),
    #[error("fine cap {fine} is not contained in any coarse cap")]
    NotNested { fine: usize },
    #[error("incompatible scales for refinement: {0}")]
    IncompatibleScales(String),
    #[error("tiling violated: {0}")]
    TilingViolated(String),
    #[error("malformed family data: {0}")]
    Malformed(String),
}

/// A scale `R = 2^log2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scale {
    log2: u32,
}

impl Scale {
    pub fn new(value: u64) -> Result<Self, CapsError> {
        if value == 0 || !value.is_power_of_two() {
            return Err(CapsError::NonDyadicScale {
                value,
                what: "R".into(),
            });
        }
        Ok(Scale {
            log2: value.trailing_zeros(),
        })
    }

    pub fn from_log2(log2: u32) -> Self {
        Scale { log2 }
    }

    pub fn log2(&self) -> u32 {
        self.log2
    }

    pub fn value(&self) -> u64 {
        1u64 << self.log2
    }

    pub fn as_f64(&self) -> f64 {
        2f64.powi(self.log2 as i32)
    }

    /// `n` such that `R^{1/root} = 2^n`.
    pub fn root_log2(&self, root: u32) -> Result<u32, CapsError> {
        if root == 0 || self.log2 % root != 0 {
            return Err(CapsError::NonDyadicScale {
                value: self.value(),
                what: format!("R^(1/{root})"),
            });
        }
        Ok(self.log2 / root)
    }
}

/// How an axis interval was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisTag {
    /// `[0, R^{-1/(2m)}]`
    Flat,
    /// `θ_{k,μ}`, the μ-th piece of the k-th dyadic shell.
    Dyadic { k: u32, mu: u64 },
    /// `[a, a + R^{-1/2}]`
    Uniform { a: DyadicRational },
    /// j-th piece of length `(λ K^{1/2})^{-1}` inside the block `[λ, 2λ]`.
    Scaled { lambda: DyadicRational, j: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxisInterval {
    pub lo: DyadicRational,
    pub hi: DyadicRational,
    pub tag: AxisTag,
}

impl AxisInterval {
    pub fn new(lo: DyadicRational, hi: DyadicRational, tag: AxisTag) -> Self {
        debug_assert!(lo < hi, "empty interval [{lo}, {hi}]");
        AxisInterval { lo, hi, tag }
    }

    pub fn len(&self) -> DyadicRational {
        self.hi - self.lo
    }

    pub fn bounds_f64(&self) -> [f64; 2] {
        [self.lo.to_f64(), self.hi.to_f64()]
    }

    pub fn contains_interval(&self, other: &AxisInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Half-open membership, closed at 1.
    pub fn contains_point(&self, x: f64) -> bool {
        let (lo, hi) = (self.lo.to_f64(), self.hi.to_f64());
        x >= lo && (x < hi || (x == 1.0 && hi == 1.0))
    }
}

impl fmt::Display for AxisInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo.to_f64(), self.hi.to_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Every axis uses the anisotropic partition.
    F4,
    /// The axes in the bitmask use uniform `R^{-1/2}` blocks (bit 0 = axis 1).
    F4Mixed { uniform_mask: u8 },
    /// Axes 1 and 2 uniform, axis 3 anisotropic.
    F4Tilde,
    UniformGrid,
    /// Pieces of a region `Ω_i` at intermediate scale K.
    Tau { region: u8 },
}

impl FamilyKind {
    pub fn mixed(uniform_axes: &[usize]) -> Self {
        let mask = uniform_axes
            .iter()
            .fold(0u8, |m, &a| m | (1u8 << (a.saturating_sub(1))));
        FamilyKind::F4Mixed { uniform_mask: mask }
    }

    fn axis_is_uniform(&self, axis: usize) -> bool {
        match *self {
            FamilyKind::F4 | FamilyKind::Tau { .. } => false,
            FamilyKind::F4Mixed { uniform_mask } => uniform_mask & (1 << axis) != 0,
            FamilyKind::F4Tilde => axis < 2,
            FamilyKind::UniformGrid => true,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            FamilyKind::F4 => "f4".into(),
            FamilyKind::F4Mixed { uniform_mask } => {
                let axes: Vec<String> = (0..8)
                    .filter(|a| uniform_mask & (1 << a) != 0)
                    .map(|a| (a + 1).to_string())
                    .collect();
                format!("f4mixed[{}]", axes.join(","))
            }
            FamilyKind::F4Tilde => "f4tilde".into(),
            FamilyKind::UniformGrid => "uniform".into(),
            FamilyKind::Tau { region } => format!("tau[{region}]"),
        }
    }

    /// Inverse of [`FamilyKind::label`]; also accepts `f4mixed` (axis 1).
    pub fn parse(s: &str) -> Result<Self, CapsError> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "f4" => return Ok(FamilyKind::F4),
            "f4tilde" | "f4-tilde" | "tilde" => return Ok(FamilyKind::F4Tilde),
            "uniform" | "uniformgrid" | "uniform-grid" => return Ok(FamilyKind::UniformGrid),
            "f4mixed" | "f4-mixed" | "mixed" => return Ok(FamilyKind::mixed(&[1])),
            _ => {}
        }
        let inner = |prefix: &str| -> Option<String> {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('['))
                .and_then(|r| r.strip_suffix(']'))
                .map(str::to_owned)
        };
        if let Some(list) = inner("f4mixed") {
            let axes = list
                .split(',')
                .map(|a| a.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CapsError::Malformed(format!("bad axis list in {s}")))?;
            if axes.iter().any(|&a| a == 0 || a > 8) {
                return Err(CapsError::Malformed(format!("axis out of range in {s}")));
            }
            return Ok(FamilyKind::mixed(&axes));
        }
        if let Some(r) = inner("tau") {
            let region = r
                .parse::<u8>()
                .map_err(|_| CapsError::Malformed(format!("bad region in {s}")))?;
            return Ok(FamilyKind::Tau { region });
        }
        Err(CapsError::Malformed(format!("unknown family kind '{s}'")))
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Identifies the family that owns a cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FamilyId {
    pub scale: Scale,
    pub m: u32,
    pub d: usize,
    pub kind: FamilyKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cap {
    pub axes: Vec<AxisInterval>,
    pub family: FamilyId,
}

impl Cap {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn volume(&self) -> DyadicRational {
        self.axes
            .iter()
            .fold(DyadicRational::ONE, |v, a| v * a.len())
    }

    pub fn bounds_f64(&self) -> Vec<[f64; 2]> {
        self.axes.iter().map(AxisInterval::bounds_f64).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.axes
            .iter()
            .map(|a| (a.lo + a.hi).halve().to_f64())
            .collect()
    }

    pub fn contains_cap(&self, other: &Cap) -> bool {
        self.axes.len() == other.axes.len()
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.contains_interval(b))
    }

    pub fn contains_point(&self, xi: &[f64]) -> bool {
        xi.len() == self.axes.len() && self.axes.iter().zip(xi).all(|(a, &x)| a.contains_point(x))
    }

    fn interiors_overlap(&self, other: &Cap) -> bool {
        self.axes
            .iter()
            .zip(&other.axes)
            .all(|(a, b)| a.lo < b.hi && b.lo < a.hi)
    }
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.axes.iter().enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Index of a cap inside its family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CapId(pub usize);

/// A product partition of `[0,1]^d`. Caps are stored row-major over the
/// per-axis interval lists (axis 1 varies slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct CapFamily {
    id: FamilyId,
    axes: Vec<Vec<AxisInterval>>,
    caps: Vec<Cap>,
}

impl CapFamily {
    pub(crate) fn from_axes(id: FamilyId, axes: Vec<Vec<AxisInterval>>) -> Self {
        let mut caps = Vec::with_capacity(axes.iter().map(Vec::len).product());
        let mut idx = vec![0usize; axes.len()];
        'outer: loop {
            caps.push(Cap {
                axes: idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect(),
                family: id,
            });
            for j in (0..axes.len()).rev() {
                idx[j] += 1;
                if idx[j] < axes[j].len() {
                    continue 'outer;
                }
                idx[j] = 0;
            }
            break;
        }
        CapFamily { id, axes, caps }
    }

    pub fn id(&self) -> FamilyId {
        self.id
    }

    pub fn scale(&self) -> Scale {
        self.id.scale
    }

    pub fn m(&self) -> u32 {
        self.id.m
    }

    pub fn dim(&self) -> usize {
        self.id.d
    }

    pub fn kind(&self) -> FamilyKind {
        self.id.kind
    }

    pub fn caps(&self) -> &[Cap] {
        &self.caps
    }

    pub fn cap(&self, id: CapId) -> &Cap {
        &self.caps[id.0]
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn axis_intervals(&self, axis: usize) -> &[AxisInterval] {
        &self.axes[axis]
    }

    fn flat_index(&self, per_axis: &[usize]) -> usize {
        per_axis
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    /// The cap whose half-open box contains `xi` (closed at 1).
    pub fn locate(&self, xi: &[f64]) -> Result<CapId, CapsError> {
        if xi.len() != self.id.d {
            return Err(CapsError::DimensionMismatch {
                expected: self.id.d,
                got: xi.len(),
            });
        }
        let mut per_axis = Vec::with_capacity(xi.len());
        for (&x, ax) in xi.iter().zip(&self.axes) {
            if !(0.0..=1.0).contains(&x) {
                return Err(CapsError::OutOfDomain(x));
            }
            // first interval whose upper end exceeds x
            let i = ax.partition_point(|iv| iv.hi.to_f64() <= x);
            per_axis.push(i.min(ax.len() - 1));
        }
        Ok(CapId(self.flat_index(&per_axis)))
    }

    /// The cap containing the box `inner`, if any.
    pub fn containing(&self, inner: &Cap) -> Option<CapId> {
        let mut per_axis = Vec::with_capacity(inner.axes.len());
        for (iv, ax) in inner.axes.iter().zip(&self.axes) {
            let i = ax.partition_point(|c| c.hi <= iv.lo);
            if i >= ax.len() || !ax[i].contains_interval(iv) {
                return None;
            }
            per_axis.push(i);
        }
        Some(CapId(self.flat_index(&per_axis)))
    }
}

fn check_dim(d: usize) -> Result<(), CapsError> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(CapsError::UnsupportedDimension(d))
    }
}

/// The anisotropic partition of `[0,1]` at scale `R` for the phase `t^{2m}`.
pub fn axis_intervals(r: u64, m: u32) -> Result<Vec<AxisInterval>, CapsError> {
    if m == 0 {
        return Err(CapsError::Malformed("half-degree m must be at least 1".into()));
    }
    let scale = Scale::new(r)?;
    let n = scale.root_log2(2 * m)? as i32;
    let mut out = Vec::new();
    out.push(AxisInterval::new(
        DyadicRational::ZERO,
        DyadicRational::pow2(-n),
        AxisTag::Flat,
    ));
    let split = 2 * m as i32 - 2;
    for k in 1..=n {
        let start = DyadicRational::pow2(k - 1 - n);
        // piece length 2^{k-1-n} / 2^{(2m-2)(k-1)}
        let len = DyadicRational::pow2((k - 1) * (1 - split) - n);
        let count = 1u64 << (split * (k - 1));
        let mut lo = start;
        for mu in 1..=count {
            let hi = lo + len;
            out.push(AxisInterval::new(lo, hi, AxisTag::Dyadic { k: k as u32, mu }));
            lo = hi;
        }
    }
    Ok(out)
}

/// `R^{1/2}` blocks of length `R^{-1/2}`.
pub fn uniform_intervals(r: u64) -> Result<Vec<AxisInterval>, CapsError> {
    let scale = Scale::new(r)?;
    let half = scale.root_log2(2)? as i32;
    let len = DyadicRational::pow2(-half);
    Ok((0..(1u64 << half))
        .map(|i| {
            let a = len * DyadicRational::from_int(i as i64);
            AxisInterval::new(a, a + len, AxisTag::Uniform { a })
        })
        .collect())
}

pub fn cap_family(r: u64, m: u32, d: usize, kind: FamilyKind) -> Result<CapFamily, CapsError> {
    check_dim(d)?;
    if let FamilyKind::Tau { .. } = kind {
        return Err(CapsError::UnsupportedKind(kind.label()));
    }
    if let FamilyKind::F4Mixed { uniform_mask } = kind {
        if uniform_mask >> d != 0 {
            return Err(CapsError::Malformed(format!(
                "uniform axis outside dimension {d} in {kind}"
            )));
        }
    }
    let scale = Scale::new(r)?;
    let aniso = axis_intervals(r, m)?;
    let needs_uniform = (0..d).any(|a| kind.axis_is_uniform(a));
    let uniform = if needs_uniform {
        uniform_intervals(r)?
    } else {
        Vec::new()
    };
    let axes = (0..d)
        .map(|a| {
            if kind.axis_is_uniform(a) {
                uniform.clone()
            } else {
                aniso.clone()
            }
        })
        .collect();
    Ok(CapFamily::from_axes(FamilyId { scale, m, d, kind }, axes))
}

/// Exact check that `caps` tile `[0,1]^d`: every box inside the cube, cap
/// volumes summing to 1, and pairwise disjoint interiors.
pub fn verify_tiling(caps: &[Cap], d: usize) -> Result<(), CapsError> {
    let mut total = DyadicRational::ZERO;
    for (i, c) in caps.iter().enumerate() {
        if c.dim() != d {
            return Err(CapsError::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        for a in &c.axes {
            if a.lo < DyadicRational::ZERO || a.hi > DyadicRational::ONE || a.lo >= a.hi {
                return Err(CapsError::TilingViolated(format!("cap {i} ({c}) leaves the unit cube")));
            }
        }
        total = total + c.volume();
    }
    if total != DyadicRational::ONE {
        return Err(CapsError::TilingViolated(format!("volumes sum to {total}, not 1")));
    }
    verify_disjoint(caps)
}

/// Cells of the grid spanned by all cap endpoints; above this the sweep
/// is used instead.
const MAX_COMPRESSED_CELLS: usize = 1 << 26;

/// Exact disjointness of cap interiors. Endpoints are compressed per axis
/// and every cap marks the grid cells it covers; a cell marked twice is an
/// overlap. Falls back to a sweep along axis 1 when the grid is too large.
pub fn verify_disjoint(caps: &[Cap]) -> Result<(), CapsError> {
    let Some(d) = caps.first().map(Cap::dim) else {
        return Ok(());
    };
    let mut coords: Vec<Vec<DyadicRational>> = vec![Vec::new(); d];
    for c in caps {
        for (j, a) in c.axes.iter().enumerate() {
            coords[j].push(a.lo);
            coords[j].push(a.hi);
        }
    }
    for v in coords.iter_mut() {
        v.sort();
        v.dedup();
    }
    let cells = coords
        .iter()
        .try_fold(1usize, |acc, v| acc.checked_mul(v.len().saturating_sub(1).max(1)));
    match cells {
        Some(n) if n <= MAX_COMPRESSED_CELLS => disjoint_by_cells(caps, &coords, n),
        _ => disjoint_by_sweep(caps),
    }
}

fn disjoint_by_cells(caps: &[Cap], coords: &[Vec<DyadicRational>], n: usize) -> Result<(), CapsError> {
    const FREE: u32 = u32::MAX;
    let mut owner = vec![FREE; n];
    let sizes: Vec<usize> = coords.iter().map(|v| v.len().saturating_sub(1).max(1)).collect();
    for (i, c) in caps.iter().enumerate() {
        let ranges: Vec<(usize, usize)> = c
            .axes
            .iter()
            .zip(coords)
            .map(|(a, v)| (v.binary_search(&a.lo).unwrap(), v.binary_search(&a.hi).unwrap()))
            .collect();
        if ranges.iter().any(|(lo, hi)| lo >= hi) {
            continue;
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        'cells: loop {
            let flat = idx.iter().zip(&sizes).fold(0, |acc, (&k, &s)| acc * s + k);
            let prev = owner[flat];
            if prev != FREE {
                let j = prev as usize;
                return Err(CapsError::TilingViolated(format!(
                    "caps {j} ({}) and {i} ({}) overlap",
                    caps[j], c
                )));
            }
            owner[flat] = i as u32;
            for a in (0..idx.len()).rev() {
                idx[a] += 1;
                if idx[a] < ranges[a].1 {
                    continue 'cells;
                }
                idx[a] = ranges[a].0;
            }
            break;
        }
    }
    Ok(())
}

/// Sweep along axis 1; only caps whose axis-1 extents overlap are compared.
fn disjoint_by_sweep(caps: &[Cap]) -> Result<(), CapsError> {
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by(|&a, &b| caps[a].axes[0].lo.cmp(&caps[b].axes[0].lo));
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let lo = caps[i].axes[0].lo;
        active.retain(|&j| caps[j].axes[0].hi > lo);
        if let Some(&j) = active.iter().find(|&&j| caps[i].interiors_overlap(&caps[j])) {
            return Err(CapsError::TilingViolated(format!(
                "caps {j} ({}) and {i} ({}) overlap",
                caps[j], caps[i]
            )));
        }
        active.push(i);
    }
    Ok(())
}

/// Largest deviation of `t^{2m}` from its secant over the interval.
///
/// `t^{2m}` is convex, so the maximum sits where the tangent is parallel
/// to the secant; that point is found in closed form.
pub fn flatness(interval: &AxisInterval, m: u32) -> f64 {
    let deg = 2 * m as i32;
    let [lo, hi] = interval.bounds_f64();
    let (flo, fhi) = (lo.powi(deg), hi.powi(deg));
    let slope = (fhi - flo) / (hi - lo);
    let t = (slope / deg as f64).powf(1.0 / (deg - 1) as f64).clamp(lo, hi);
    let secant = flo + slope * (t - lo);
    (secant - t.powi(deg)).max(0.0)
}

/// `(min φ″, max φ″) · len² / 8` for `φ = t^{2m}`, the envelope that
/// brackets [`flatness`] for any convex phase.
pub fn flatness_envelope(interval: &AxisInterval, m: u32) -> (f64, f64) {
    let deg = 2.0 * m as f64;
    let [lo, hi] = interval.bounds_f64();
    let d2 = |t: f64| deg * (deg - 1.0) * t.powf(deg - 2.0);
    let len2 = (hi - lo) * (hi - lo);
    (d2(lo) * len2 / 8.0, d2(hi) * len2 / 8.0)
}

/// Map each cap of `fine` to the cap of `coarse` containing it, for two
/// anisotropic families one dyadic step apart.
pub fn refinement_map(coarse: &CapFamily, fine: &CapFamily) -> Result<Vec<CapId>, CapsError> {
    if coarse.kind() != FamilyKind::F4 || fine.kind() != FamilyKind::F4 {
        return Err(CapsError::IncompatibleScales(
            "refinement is defined between anisotropic families only".into(),
        ));
    }
    if coarse.m() != fine.m() || coarse.dim() != fine.dim() {
        return Err(CapsError::IncompatibleScales(
            "families differ in half-degree or dimension".into(),
        ));
    }
    let step = 2 * fine.m();
    if fine.scale().log2() != coarse.scale().log2() + step {
        return Err(CapsError::IncompatibleScales(format!(
            "fine scale 2^{} is not one dyadic step above 2^{}",
            fine.scale().log2(),
            coarse.scale().log2()
        )));
    }
    fine.caps()
        .iter()
        .enumerate()
        .map(|(i, c)| coarse.containing(c).ok_or(CapsError::NotNested { fine: i }))
        .collect()
}
