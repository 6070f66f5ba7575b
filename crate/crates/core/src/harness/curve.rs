use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ratio::{check_p, measure, ratio_stderr, rhs_seed};
use super::{Ensemble, HarnessError, RatioRecord, RhsWeight, MIN_BUDGET};
use crate::caps::{block_pieces, CapFamily, DyadicRational, FamilyId, FamilyKind, Scale};
use crate::oscillo::{FrequencyFunction, PhaseSpec, SpacePointSet, WeightSpec};

/// How the planar norms are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CurveMode {
    MonteCarlo { budget: usize, seed: u64 },
    /// Midpoint grid with `steps` cells per axis over `[-R, R]²`; with the
    /// decaying weight the right side uses the truncated box `[-4R, 4R]²` at
    /// the same spacing.
    Grid { steps: usize },
}

/// The pieces of `[λ, 2λ]` at scale `K` as a one-dimensional family.
pub fn curve_family(lambda: DyadicRational, k: u64) -> Result<CapFamily, HarnessError> {
    let pieces = block_pieces(lambda, k)?;
    let id = FamilyId {
        scale: Scale::new(k)?,
        m: 2,
        d: 1,
        kind: FamilyKind::Tau { region: 1 },
    };
    Ok(CapFamily::from_axes(id, vec![pieces]))
}

/// Decoupling ratio of `Γ_λ = {(t, t⁴) : t ∈ [λ, 2λ]}` into its pieces at
/// scale `K` (default `K = R`), measured on `B_R ⊂ ℝ²`.
pub fn curve_ratio(
    ens: &Ensemble,
    p: f64,
    r: u64,
    lambda: DyadicRational,
    k: Option<u64>,
    weight: RhsWeight,
    mode: CurveMode,
) -> Result<RatioRecord, HarnessError> {
    let start = Instant::now();
    check_p(p)?;
    let k = k.unwrap_or(r);
    let family = curve_family(lambda, k)?;
    let f = ens.build(&family)?;
    let groups: Vec<FrequencyFunction> = f.split_by_family(&family)?.into_iter().map(|(_, g)| g).collect();
    if groups.is_empty() {
        return Err(HarnessError::EmptyEnsemble);
    }
    let phase = PhaseSpec::quartic(1);
    let radius = r as f64;
    let center = [0.0; 2];
    let (lhs_pts, rhs_pts, seed, samples) = match mode {
        CurveMode::MonteCarlo { budget, seed } => {
            if budget < MIN_BUDGET {
                return Err(HarnessError::BudgetTooSmall(budget));
            }
            let lhs = SpacePointSet::monte_carlo_ball(&center, radius, budget, seed);
            let rhs = (weight == RhsWeight::PaperWeight)
                .then(|| SpacePointSet::weight_sampled(&WeightSpec::paper(&center, radius), budget, rhs_seed(seed)));
            (lhs, rhs, seed, budget)
        }
        CurveMode::Grid { steps } => {
            if steps == 0 {
                return Err(HarnessError::Config("grid needs at least one step".into()));
            }
            let lhs = SpacePointSet::grid(&[-radius; 2], &[radius; 2], &[steps; 2]);
            let rhs = (weight == RhsWeight::PaperWeight).then(|| {
                let t = match WeightSpec::paper(&center, radius).kind {
                    crate::oscillo::WeightKind::PaperWeight { truncation } => truncation,
                    crate::oscillo::WeightKind::Indicator => 1.0,
                };
                let n = (steps as f64 * t).round() as usize;
                SpacePointSet::grid(&[-t * radius; 2], &[t * radius; 2], &[n; 2])
            });
            (lhs, rhs, 0, steps * steps)
        }
    };
    let m = measure(&groups, &phase, p, radius, &lhs_pts, rhs_pts.as_ref(), weight)?;
    if !(m.rhs > 0.0) {
        return Err(HarnessError::Degenerate("right-hand side vanished".into()));
    }
    Ok(RatioRecord {
        r,
        p,
        d: 1,
        m: 2,
        family: format!("curve(lambda={lambda},K={k})"),
        ensemble: ens.label(),
        rhs_weight: weight,
        lhs: m.lhs.norm,
        rhs: m.rhs,
        ratio: m.lhs.norm / m.rhs,
        lhs_stderr: m.lhs.stderr,
        rhs_stderr: m.rhs_stderr,
        ratio_stderr: ratio_stderr(m.lhs.norm, m.rhs, m.lhs.stderr, m.rhs_stderr),
        mc_samples: samples,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pow2(e: i32) -> DyadicRational {
        DyadicRational::pow2(e)
    }

    #[test]
    fn piece_counts() {
        let half = curve_family(pow2(-1), 16).unwrap();
        assert_eq!(half.len(), 1);
        // λ = 1/4 at K = 256: λ² K^{1/2} = 1 piece of length 1/4
        let quarter = curve_family(pow2(-2), 256).unwrap();
        assert_eq!(quarter.len(), 1);
        let iv = quarter.axis_intervals(0)[0];
        assert_eq!((iv.lo, iv.hi), (pow2(-2), pow2(-1)));
        let fine = curve_family(pow2(-1), 256).unwrap();
        assert_eq!(fine.len(), 4);
        assert_eq!(fine.axis_intervals(0)[0].len(), pow2(-3));
        assert!(curve_family(pow2(-3), 16).is_err());
    }

    #[test]
    fn single_interval_is_trivial() {
        for mode in [CurveMode::MonteCarlo { budget: 1000, seed: 3 }, CurveMode::Grid { steps: 64 }] {
            let rec = curve_ratio(&Ensemble::SingleCap { cap: None }, 2.0, 16, pow2(-1), None, RhsWeight::Indicator, mode)
                .unwrap();
            assert!((rec.ratio - 1.0).abs() < 1e-12, "{rec:?}");
        }
    }

    #[test]
    fn grid_and_monte_carlo_agree() {
        let ens = Ensemble::RandomPhasePerCap { seed: 2 };
        let grid = curve_ratio(&ens, 4.0, 64, pow2(-1), Some(256), RhsWeight::Indicator, CurveMode::Grid { steps: 512 }).unwrap();
        let mc = curve_ratio(
            &ens,
            4.0,
            64,
            pow2(-1),
            Some(256),
            RhsWeight::Indicator,
            CurveMode::MonteCarlo { budget: 20_000, seed: 1 },
        )
        .unwrap();
        assert!((grid.lhs - mc.lhs).abs() < 4.0 * mc.lhs_stderr, "{grid:?} {mc:?}");
        assert!((grid.rhs - mc.rhs).abs() < 4.0 * mc.rhs_stderr, "{grid:?} {mc:?}");
    }
}
