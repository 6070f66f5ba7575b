use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Ensemble, HarnessError};
use crate::caps::CapFamily;
use crate::oscillo::{
    accumulate, ChunkSums, FieldEngine, FrequencyFunction, NormEstimate, PhaseSpec, SpacePointSet,
    WeightSpec,
};

pub const MIN_BUDGET: usize = 1000;

/// Weight used on the right-hand side; the left side is always the
/// indicator of `B_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsWeight {
    Indicator,
    #[default]
    PaperWeight,
}

impl RhsWeight {
    pub fn label(&self) -> &'static str {
        match self {
            RhsWeight::Indicator => "indicator",
            RhsWeight::PaperWeight => "paper",
        }
    }

    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "indicator" | "ball" => Ok(RhsWeight::Indicator),
            "paper" | "paper_weight" | "weight" | "decaying" => Ok(RhsWeight::PaperWeight),
            other => Err(HarnessError::Config(format!("unknown weight '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    #[serde(rename = "R")]
    pub r: u64,
    pub p: f64,
    pub d: usize,
    pub m: u32,
    pub family: String,
    pub ensemble: String,
    pub rhs_weight: RhsWeight,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    pub ratio_stderr: f64,
    pub mc_samples: usize,
    pub seed: u64,
    pub wall_time: f64,
}

impl RatioRecord {
    /// Equality of everything except the wall-clock time.
    pub fn same_measurement(&self, other: &RatioRecord) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a.lhs.to_bits() == other.lhs.to_bits()
            && a.rhs.to_bits() == other.rhs.to_bits()
            && a.ratio.to_bits() == other.ratio.to_bits()
            && a.lhs_stderr.to_bits() == other.lhs_stderr.to_bits()
            && a.rhs_stderr.to_bits() == other.rhs_stderr.to_bits()
            && a == *other
    }
}

/// `(Σ_g S_g^{2/p})^{1/2}` with a leave-one-chunk-out jackknife error.
pub(crate) fn rhs_from_chunks(chunks: &[ChunkSums], n_groups: usize, total: usize, p: f64) -> (f64, f64) {
    let mut s = vec![0.0; n_groups];
    for c in chunks {
        for (acc, v) in s.iter_mut().zip(&c.groups) {
            *acc += v;
        }
    }
    let combine = |vals: &mut dyn Iterator<Item = f64>| vals.map(|v| v.max(0.0).powf(2.0 / p)).sum::<f64>().sqrt();
    let rhs = combine(&mut s.iter().copied());
    let k = chunks.len();
    if k < 2 {
        return (rhs, 0.0);
    }
    let leave: Vec<f64> = chunks
        .iter()
        .map(|c| {
            let scale = total as f64 / (total - c.count) as f64;
            combine(&mut s.iter().zip(&c.groups).map(|(a, b)| (a - b) * scale))
        })
        .collect();
    let mean = leave.iter().sum::<f64>() / k as f64;
    let var = leave.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (k - 1) as f64 / k as f64;
    (rhs, var.sqrt())
}

pub(crate) fn lhs_from_chunks(chunks: &[ChunkSums], total: usize, p: f64, mc: bool) -> NormEstimate {
    let (s, s2) = chunks.iter().fold((0.0, 0.0), |(a, b), c| (a + c.total, b + c.total_sq));
    NormEstimate::from_sums(s, s2, total, p, mc)
}

/// Seed of the right-hand point set, distinct from the left one.
pub(crate) fn rhs_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

pub(crate) struct Measured {
    pub lhs: NormEstimate,
    pub rhs: f64,
    pub rhs_stderr: f64,
}

/// Shared core of the cap and curve ratios: `groups` are the pieces
/// `f|_θ`, evaluated with one engine.
pub(crate) fn measure(
    groups: &[FrequencyFunction],
    phase: &PhaseSpec,
    p: f64,
    radius: f64,
    lhs_pts: &SpacePointSet,
    rhs_pts: Option<&SpacePointSet>,
    weight: RhsWeight,
) -> Result<Measured, HarnessError> {
    let engine = FieldEngine::new(groups, phase)?;
    let n = phase.dim() + 1;
    let center = vec![0.0; n];
    let ball = WeightSpec::indicator(&center, radius);
    let mc = lhs_pts.is_monte_carlo();
    Ok(match weight {
        RhsWeight::Indicator => {
            let sums = accumulate(&engine, lhs_pts, p, &ball, true, true);
            let (rhs, rhs_stderr) = rhs_from_chunks(&sums, groups.len(), lhs_pts.len(), p);
            Measured {
                lhs: lhs_from_chunks(&sums, lhs_pts.len(), p, mc),
                rhs,
                rhs_stderr: if mc { rhs_stderr } else { 0.0 },
            }
        }
        RhsWeight::PaperWeight => {
            let paper = WeightSpec::paper(&center, radius);
            let rp = rhs_pts.expect("decaying weight needs its own point set");
            let left = accumulate(&engine, lhs_pts, p, &ball, true, false);
            let right = accumulate(&engine, rp, p, &paper, false, true);
            let (rhs, rhs_stderr) = rhs_from_chunks(&right, groups.len(), rp.len(), p);
            Measured {
                lhs: lhs_from_chunks(&left, lhs_pts.len(), p, mc),
                rhs,
                rhs_stderr: if rp.is_monte_carlo() { rhs_stderr } else { 0.0 },
            }
        }
    })
}

pub(crate) fn ratio_stderr(lhs: f64, rhs: f64, se_l: f64, se_r: f64) -> f64 {
    if rhs > 0.0 {
        (lhs / rhs) * ((se_l / lhs.max(f64::MIN_POSITIVE)).powi(2) + (se_r / rhs).powi(2)).sqrt()
    } else {
        f64::NAN
    }
}

pub fn check_p(p: f64) -> Result<(), HarnessError> {
    if (2.0..=6.0).contains(&p) {
        Ok(())
    } else {
        Err(HarnessError::ExponentOutOfRange(p))
    }
}

/// `‖E_{[0,1]^d} f‖_{L^p(B_R)} / (Σ_θ ‖E_θ f‖²_{L^p(w)})^{1/2}`, Monte Carlo
/// with `budget` points per side.
pub fn decoupling_ratio(
    ens: &Ensemble,
    p: f64,
    r: u64,
    family: &CapFamily,
    weight: RhsWeight,
    budget: usize,
    seed: u64,
) -> Result<RatioRecord, HarnessError> {
    let start = Instant::now();
    check_p(p)?;
    if budget < MIN_BUDGET {
        return Err(HarnessError::BudgetTooSmall(budget));
    }
    if family.scale().value() != r {
        return Err(HarnessError::ScaleMismatch {
            requested: r,
            family: family.scale().value(),
        });
    }
    let f = ens.build(family)?;
    let groups: Vec<FrequencyFunction> = f.split_by_family(family)?.into_iter().map(|(_, g)| g).collect();
    if groups.is_empty() {
        return Err(HarnessError::EmptyEnsemble);
    }
    let d = family.dim();
    let phase = PhaseSpec::pure_power(d, 2 * family.m());
    let radius = r as f64;
    let center = vec![0.0; d + 1];
    let lhs_pts = SpacePointSet::monte_carlo_ball(&center, radius, budget, seed);
    let rhs_pts = match weight {
        RhsWeight::PaperWeight => Some(SpacePointSet::weight_sampled(
            &WeightSpec::paper(&center, radius),
            budget,
            rhs_seed(seed),
        )),
        RhsWeight::Indicator => None,
    };
    let m = measure(&groups, &phase, p, radius, &lhs_pts, rhs_pts.as_ref(), weight)?;
    if !(m.rhs > 0.0) {
        return Err(HarnessError::Degenerate("right-hand side vanished".into()));
    }
    let ratio = m.lhs.norm / m.rhs;
    Ok(RatioRecord {
        r,
        p,
        d,
        m: family.m(),
        family: family.kind().label(),
        ensemble: ens.label(),
        rhs_weight: weight,
        lhs: m.lhs.norm,
        rhs: m.rhs,
        ratio,
        lhs_stderr: m.lhs.stderr,
        rhs_stderr: m.rhs_stderr,
        ratio_stderr: ratio_stderr(m.lhs.norm, m.rhs, m.lhs.stderr, m.rhs_stderr),
        mc_samples: budget,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caps::{cap_family, FamilyKind};

    #[test]
    fn single_cap_p2_is_exact() {
        let fam = cap_family(256, 2, 1, FamilyKind::F4).unwrap();
        let rec = decoupling_ratio(&Ensemble::SingleCap { cap: None }, 2.0, 256, &fam, RhsWeight::Indicator, 1000, 4).unwrap();
        assert!((rec.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cap_paper_weight_bounds() {
        let fam = cap_family(16, 2, 3, FamilyKind::F4).unwrap();
        for p in [2.0, 4.0] {
            let rec =
                decoupling_ratio(&Ensemble::SingleCap { cap: Some(3) }, p, 16, &fam, RhsWeight::PaperWeight, 2000, 1)
                    .unwrap();
            assert!(rec.ratio > 0.0 && rec.ratio <= 2f64.powf(400.0 / p), "{rec:?}");
            assert!(rec.rhs_stderr > 0.0);
        }
    }

    #[test]
    fn preconditions() {
        let fam = cap_family(16, 2, 1, FamilyKind::F4).unwrap();
        let one = Ensemble::ConstantOne;
        assert_eq!(
            decoupling_ratio(&one, 2.0, 16, &fam, RhsWeight::Indicator, 999, 0),
            Err(HarnessError::BudgetTooSmall(999))
        );
        assert!(matches!(
            decoupling_ratio(&one, 7.0, 16, &fam, RhsWeight::Indicator, 1000, 0),
            Err(HarnessError::ExponentOutOfRange(_))
        ));
        assert!(matches!(
            decoupling_ratio(&one, 2.0, 256, &fam, RhsWeight::Indicator, 1000, 0),
            Err(HarnessError::ScaleMismatch { .. })
        ));
    }

    #[test]
    fn deterministic_records() {
        let fam = cap_family(256, 2, 2, FamilyKind::F4).unwrap();
        let ens = Ensemble::RandomPhasePerCap { seed: 9 };
        let a = decoupling_ratio(&ens, 4.0, 256, &fam, RhsWeight::PaperWeight, 1500, 9).unwrap();
        let b = decoupling_ratio(&ens, 4.0, 256, &fam, RhsWeight::PaperWeight, 1500, 9).unwrap();
        assert!(a.same_measurement(&b));
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<RatioRecord>(&json).unwrap(), a);
    }
}
