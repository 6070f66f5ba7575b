use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{decoupling_ratio, Ensemble, HarnessError, RatioRecord, RhsWeight};
use crate::caps::{cap_family, CapFamily, FamilyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub r_values: Vec<u64>,
    pub p_values: Vec<f64>,
    pub d: usize,
    pub m: u32,
    pub kind: FamilyKind,
    pub ensembles: Vec<Ensemble>,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub rhs_weight: RhsWeight,
}

/// One measurement of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub r: u64,
    pub p: f64,
    pub ensemble: Ensemble,
    pub seed: u64,
}

impl SweepCell {
    /// Stable identifier used to skip finished cells.
    pub fn key(&self) -> String {
        format!("R={};p={};ens={};seed={}", self.r, self.p, self.ensemble.label(), self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: SweepCell,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub p: f64,
    pub ensemble: String,
    #[serde(rename = "R_values")]
    pub r_values: Vec<u64>,
    pub medians: Vec<f64>,
    pub epsilon_hat: f64,
    pub intercept: f64,
    pub residual_norm: f64,
    pub records_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<RatioRecord>,
    pub failures: Vec<CellFailure>,
    pub fits: Vec<GrowthFit>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let distinct: BTreeSet<u64> = self.r_values.iter().copied().collect();
        if distinct.len() < 3 {
            return Err(HarnessError::TooFewScales(distinct.len()));
        }
        if self.p_values.is_empty() || self.ensembles.is_empty() || self.seeds.is_empty() {
            return Err(HarnessError::Config("empty p, ensemble or seed list".into()));
        }
        for &p in &self.p_values {
            super::ratio::check_p(p)?;
        }
        if self.budget < super::MIN_BUDGET {
            return Err(HarnessError::BudgetTooSmall(self.budget));
        }
        Ok(())
    }

    /// Cells ordered by p, ensemble, R, seed.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &p in &self.p_values {
            for ens in &self.ensembles {
                for &r in &self.r_values {
                    for &seed in &self.seeds {
                        out.push(SweepCell {
                            r,
                            p,
                            ensemble: ens.reseeded(seed),
                            seed,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn family(&self, r: u64) -> Result<CapFamily, HarnessError> {
        Ok(cap_family(r, self.m, self.d, self.kind)?)
    }
}

pub fn run_cell(cfg: &SweepConfig, family: &CapFamily, cell: &SweepCell) -> Result<RatioRecord, HarnessError> {
    decoupling_ratio(&cell.ensemble, cell.p, cell.r, family, cfg.rhs_weight, cfg.budget, cell.seed)
}

/// Run every cell in order. `observer` sees each cell as it finishes; a
/// failing cell is recorded and the sweep continues.
pub fn sweep(
    cfg: &SweepConfig,
    mut observer: impl FnMut(&SweepCell, &Result<RatioRecord, HarnessError>),
) -> Result<SweepOutcome, HarnessError> {
    cfg.validate()?;
    let mut families: BTreeMap<u64, Result<CapFamily, HarnessError>> = BTreeMap::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for cell in cfg.cells() {
        let fam = families.entry(cell.r).or_insert_with(|| cfg.family(cell.r));
        let res = match fam {
            Ok(f) => run_cell(cfg, f, &cell),
            Err(e) => Err(e.clone()),
        };
        observer(&cell, &res);
        match res {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(CellFailure {
                cell,
                error: e.to_string(),
            }),
        }
    }
    let fits = fit_growth(&records)?;
    Ok(SweepOutcome {
        records,
        failures,
        fits,
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn seedless_label(label: &str) -> String {
    // "random_phase(seed=3)" and "lattice(n=4,seed=3)" group across seeds
    match label.find("seed=") {
        Some(i) => {
            let head = label[..i].trim_end_matches(',').trim_end_matches('(');
            if label[..i].ends_with(',') {
                format!("{head})")
            } else {
                head.to_string()
            }
        }
        None => label.to_string(),
    }
}

/// Least-squares slope of `ln(median ratio)` against `ln R`, one fit per
/// `(p, ensemble)` with at least 3 scales; groups with fewer are skipped
/// unless no group qualifies.
pub fn fit_growth(records: &[RatioRecord]) -> Result<Vec<GrowthFit>, HarnessError> {
    let mut groups: BTreeMap<(u64, String), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for rec in records {
        groups
            .entry((rec.p.to_bits(), seedless_label(&rec.ensemble)))
            .or_default()
            .entry(rec.r)
            .or_default()
            .push(rec.ratio);
    }
    let mut fits = Vec::new();
    let mut most = 0;
    for ((pbits, ens), by_r) in groups {
        most = most.max(by_r.len());
        if by_r.len() < 3 {
            continue;
        }
        let used = by_r.values().map(Vec::len).sum();
        let r_values: Vec<u64> = by_r.keys().copied().collect();
        let medians: Vec<f64> = by_r.into_values().map(|mut v| median(&mut v)).collect();
        let xs: Vec<f64> = r_values.iter().map(|&r| (r as f64).ln()).collect();
        let ys: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let residual_norm = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if !slope.is_finite() {
            return Err(HarnessError::Degenerate(format!("non-finite growth fit for {ens}")));
        }
        fits.push(GrowthFit {
            p: f64::from_bits(pbits),
            ensemble: ens,
            r_values,
            medians,
            epsilon_hat: slope,
            intercept,
            residual_norm,
            records_used: used,
        });
    }
    if fits.is_empty() && !records.is_empty() {
        return Err(HarnessError::TooFewScales(most));
    }
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(r: u64, ratio: f64, seed: u64) -> RatioRecord {
        RatioRecord {
            r,
            p: 4.0,
            d: 1,
            m: 2,
            family: "f4".into(),
            ensemble: format!("random_phase(seed={seed})"),
            rhs_weight: RhsWeight::Indicator,
            lhs: ratio,
            rhs: 1.0,
            ratio,
            lhs_stderr: 0.0,
            rhs_stderr: 0.0,
            ratio_stderr: 0.0,
            mc_samples: 1000,
            seed,
            wall_time: 0.0,
        }
    }

    #[test]
    fn fit_recovers_power_law() {
        let mut recs = Vec::new();
        for (i, r) in [16u64, 256, 4096].into_iter().enumerate() {
            for s in 0..3 {
                // outlier on one seed is ignored by the median
                let noise = if s == 2 && i == 1 { 50.0 } else { 1.0 };
                recs.push(rec(r, 2.0 * (r as f64).powf(0.25) * noise, s));
            }
        }
        let fits = fit_growth(&recs).unwrap();
        assert_eq!(fits.len(), 1);
        assert_eq!(fits[0].ensemble, "random_phase");
        assert!((fits[0].epsilon_hat - 0.25).abs() < 1e-12);
        assert!((fits[0].intercept - 2f64.ln()).abs() < 1e-12);
        assert!(fits[0].residual_norm < 1e-12);
        assert_eq!(fits[0].records_used, 9);
    }

    #[test]
    fn too_few_scales() {
        let recs = vec![rec(16, 1.0, 0), rec(256, 1.0, 0)];
        assert_eq!(fit_growth(&recs), Err(HarnessError::TooFewScales(2)));
        let cfg = SweepConfig {
            r_values: vec![256],
            p_values: vec![2.0],
            d: 1,
            m: 2,
            kind: FamilyKind::F4,
            ensembles: vec![Ensemble::ConstantOne],
            budget: 1000,
            seeds: vec![0],
            rhs_weight: RhsWeight::Indicator,
        };
        assert_eq!(sweep(&cfg, |_, _| {}).unwrap_err(), HarnessError::TooFewScales(1));
    }

    #[test]
    fn seedless_labels() {
        assert_eq!(seedless_label("random_phase(seed=7)"), "random_phase");
        assert_eq!(seedless_label("lattice(n=4,seed=7)"), "lattice(n=4)");
        assert_eq!(seedless_label("one"), "one");
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
