//! The eight-region split of `[0,1]^3` at an intermediate scale `K`, and
//! the subdivision of each non-corner region into pieces `τ`.

use serde::{Deserialize, Serialize};

use super::{
    AxisInterval, AxisTag, CapFamily, CapsError, DyadicRational, FamilyId, FamilyKind, Scale,
};

/// Which axes are "large" (`[K^{-1/4}, 1]`) for each region index.
const LARGE: [[bool; 3]; 8] = [
    [false, false, false],
    [true, false, false],
    [false, true, false],
    [false, false, true],
    [false, true, true],
    [true, false, true],
    [true, true, false],
    [true, true, true],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaRegion {
    pub index: usize,
    pub k: Scale,
    pub large: [bool; 3],
    pub lo: [DyadicRational; 3],
    pub hi: [DyadicRational; 3],
}

impl OmegaRegion {
    pub fn volume(&self) -> DyadicRational {
        (0..3).fold(DyadicRational::ONE, |v, j| v * (self.hi[j] - self.lo[j]))
    }

    pub fn contains_point(&self, xi: &[f64]) -> bool {
        xi.len() == 3
            && (0..3).all(|j| {
                let (lo, hi) = (self.lo[j].to_f64(), self.hi[j].to_f64());
                xi[j] >= lo && xi[j] <= hi
            })
    }
}

/// `K^{-1/4}` as a dyadic rational, and its exponent.
fn quarter_root(k: u64) -> Result<(Scale, i32), CapsError> {
    let scale = Scale::new(k)?;
    let n = scale.root_log2(4)? as i32;
    if n == 0 {
        return Err(CapsError::NonDyadicScale {
            value: k,
            what: "K (must exceed 1)".into(),
        });
    }
    Ok((scale, n))
}

pub fn omega_regions(k: u64) -> Result<Vec<OmegaRegion>, CapsError> {
    let (scale, n) = quarter_root(k)?;
    let s = DyadicRational::pow2(-n);
    Ok(LARGE
        .iter()
        .enumerate()
        .map(|(index, large)| {
            let mut lo = [DyadicRational::ZERO; 3];
            let mut hi = [s; 3];
            for j in 0..3 {
                if large[j] {
                    lo[j] = s;
                    hi[j] = DyadicRational::ONE;
                }
            }
            OmegaRegion {
                index,
                k: scale,
                large: *large,
                lo,
                hi,
            }
        })
        .collect())
}

/// Pieces of `[λ, 2λ]` of length `(λ K^{1/2})^{-1}`; there are `λ² K^{1/2}`.
pub fn block_pieces(lambda: DyadicRational, k: u64) -> Result<Vec<AxisInterval>, CapsError> {
    let (_, n) = quarter_root(k)?;
    let l = lambda
        .log2_exact()
        .ok_or_else(|| CapsError::Malformed(format!("λ = {lambda} is not a power of 2")))?;
    if l > -1 || l < -n {
        return Err(CapsError::Malformed(format!(
            "λ = {lambda} outside [K^(-1/4), 1/2]"
        )));
    }
    let count = 1u64 << (2 * l + 2 * n);
    let len = DyadicRational::pow2(-l - 2 * n);
    let mut lo = lambda;
    Ok((1..=count)
        .map(|j| {
            let hi = lo + len;
            let iv = AxisInterval::new(lo, hi, AxisTag::Scaled { lambda, j });
            lo = hi;
            iv
        })
        .collect())
}

/// All pieces of `[K^{-1/4}, 1]`, dyadic blocks in increasing order.
fn large_axis(k: u64, n: i32) -> Result<Vec<AxisInterval>, CapsError> {
    let mut out = Vec::new();
    for s in (1..=n).rev() {
        out.extend(block_pieces(DyadicRational::pow2(-s), k)?);
    }
    Ok(out)
}

/// Subdivide `Ω_i` (i ≥ 1). Large axes are cut into the `τ` pieces of each
/// dyadic block; small axes stay whole at `[0, K^{-1/4}]`.
pub fn tau_decompose(region: &OmegaRegion) -> Result<CapFamily, CapsError> {
    if region.index == 0 {
        return Err(CapsError::UnsupportedRegion(0));
    }
    let k = region.k.value();
    let (_, n) = quarter_root(k)?;
    let large = large_axis(k, n)?;
    let small = vec![AxisInterval::new(
        DyadicRational::ZERO,
        DyadicRational::pow2(-n),
        AxisTag::Flat,
    )];
    let axes = region
        .large
        .iter()
        .map(|&l| if l { large.clone() } else { small.clone() })
        .collect();
    let id = FamilyId {
        scale: region.k,
        m: 2,
        d: 3,
        kind: FamilyKind::Tau {
            region: region.index as u8,
        },
    };
    Ok(CapFamily::from_axes(id, axes))
}

#[cfg(test)]
mod tests {
    use super::super::verify_disjoint;
    use super::*;

    #[test]
    fn k16_corners() {
        let regions = omega_regions(16).unwrap();
        let half = DyadicRational::new(1, 1);
        assert_eq!(regions[0].lo, [DyadicRational::ZERO; 3]);
        assert_eq!(regions[0].hi, [half; 3]);
        assert_eq!(regions[7].lo, [half; 3]);
        assert_eq!(regions[7].hi, [DyadicRational::ONE; 3]);
        assert_eq!(regions[4].large, [false, true, true]);
        assert_eq!(regions[6].large, [true, true, false]);
    }

    #[test]
    fn regions_tile_cube() {
        for k in [16u64, 256, 4096] {
            let regions = omega_regions(k).unwrap();
            let total = regions
                .iter()
                .fold(DyadicRational::ZERO, |v, r| v + r.volume());
            assert_eq!(total, DyadicRational::ONE);
            for (i, a) in regions.iter().enumerate() {
                for b in &regions[i + 1..] {
                    let overlap = (0..3).all(|j| a.lo[j] < b.hi[j] && b.lo[j] < a.hi[j]);
                    assert!(!overlap, "{} and {}", a.index, b.index);
                }
            }
        }
        assert!(omega_regions(32).is_err());
        assert!(omega_regions(1).is_err());
    }

    #[test]
    fn tau_examples() {
        let r7 = omega_regions(16).unwrap()[7];
        let fam = tau_decompose(&r7).unwrap();
        assert_eq!(fam.len(), 1);
        assert!(fam.caps()[0]
            .axes
            .iter()
            .all(|a| a.lo == DyadicRational::new(1, 1) && a.hi == DyadicRational::ONE));

        let half = DyadicRational::new(1, 1);
        let pieces = block_pieces(half, 256).unwrap();
        assert_eq!(pieces.len(), 4);
        assert!(pieces.iter().all(|p| p.len() == DyadicRational::new(1, 3)));
        assert_eq!(pieces[3].tag, AxisTag::Scaled { lambda: half, j: 4 });
    }

    #[test]
    fn tau_tiles_region() {
        for k in [16u64, 256, 4096] {
            for region in omega_regions(k).unwrap().into_iter().skip(1) {
                let fam = tau_decompose(&region).unwrap();
                let total = fam
                    .caps()
                    .iter()
                    .fold(DyadicRational::ZERO, |v, c| v + c.volume());
                assert_eq!(total, region.volume());
                verify_disjoint(fam.caps()).unwrap();
                for c in fam.caps() {
                    for j in 0..3 {
                        assert!(c.axes[j].lo >= region.lo[j] && c.axes[j].hi <= region.hi[j]);
                    }
                }
            }
        }
        let r0 = omega_regions(16).unwrap()[0];
        assert_eq!(tau_decompose(&r0), Err(CapsError::UnsupportedRegion(0)));
    }
}
