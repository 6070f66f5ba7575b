//! Weighted `L^p` norms of sampled fields.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::FieldEngine;
use super::points::{weight_value, SpacePointSet, WeightSpec};
use super::OscilloError;

/// `|v|^p`, with cheap paths for the exponents the experiments use.
#[inline]
pub fn abs_pow(v: Complex64, p: f64) -> f64 {
    let s = v.norm_sqr();
    if p == 2.0 {
        s
    } else if p == 4.0 {
        s * s
    } else if p == 6.0 {
        s * s * s
    } else if (p - 10.0 / 3.0).abs() < 1e-15 {
        let c = s.cbrt();
        s * c * c
    } else {
        s.powf(0.5 * p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    /// `(Σ w |v|^p mass)^{1/p}`
    pub norm: f64,
    pub stderr: f64,
    /// the sum inside the root
    pub power: f64,
    pub power_stderr: f64,
}

impl NormEstimate {
    /// From Monte Carlo single-point estimates `z_i` of the power integral.
    pub fn from_sums(sum_z: f64, sum_z2: f64, count: usize, p: f64, monte_carlo: bool) -> Self {
        let m = count as f64;
        let power = sum_z / m;
        let power_stderr = if monte_carlo && count > 1 {
            let var = ((sum_z2 - sum_z * sum_z / m) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        Self::from_power(power, power_stderr, p)
    }

    /// Delta method: `se(S^{1/p}) = S^{1/p} se(S) / (p S)`.
    pub fn from_power(power: f64, power_stderr: f64, p: f64) -> Self {
        let norm = power.max(0.0).powf(1.0 / p);
        let stderr = if power > 0.0 {
            norm * power_stderr / (p * power)
        } else {
            0.0
        };
        NormEstimate {
            norm,
            stderr,
            power,
            power_stderr,
        }
    }
}

pub fn lp_norm(
    values: &[Complex64],
    p: f64,
    w: &WeightSpec,
    pts: &SpacePointSet,
) -> Result<NormEstimate, OscilloError> {
    if values.len() != pts.len() {
        return Err(OscilloError::MismatchedLengths {
            values: values.len(),
            points: pts.len(),
        });
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(OscilloError::Unsupported(format!("exponent p = {p}")));
    }
    let m = pts.len() as f64;
    let z: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| m * pts.mass(i) * pts.weight_factor(i, w) * abs_pow(v, p))
        .collect();
    // two passes, so a constant field has zero spread
    let power = z.iter().sum::<f64>() / m;
    let power_stderr = if pts.is_monte_carlo() && z.len() > 1 {
        let var = z.iter().map(|zi| (zi - power) * (zi - power)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    } else {
        0.0
    };
    Ok(NormEstimate::from_power(power, power_stderr, p))
}

/// Per-chunk power sums produced by [`accumulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkSums {
    pub count: usize,
    /// `Σ z_i` and `Σ z_i²` for the sum over all groups, where
    /// `z_i = M · mass_i · weight_i · |Σ_g v_g|^p`
    pub total: f64,
    pub total_sq: f64,
    /// `Σ mass_i · weight_i · |v_g|^p` for each group
    pub groups: Vec<f64>,
}

/// Evaluate the engine on every point and accumulate power sums chunk by
/// chunk. Chunks are reduced in index order, so the result does not depend
/// on the number of threads.
pub fn accumulate(
    engine: &FieldEngine,
    pts: &SpacePointSet,
    p: f64,
    w: &WeightSpec,
    want_total: bool,
    want_groups: bool,
) -> Vec<ChunkSums> {
    let m = pts.len() as f64;
    let g = engine.n_groups();
    pts.chunk_ranges()
        .into_par_iter()
        .map(|range| {
            let mut ws = engine.workspace();
            let mut vals = vec![Complex64::new(0.0, 0.0); g];
            let mut sums = ChunkSums {
                count: range.len(),
                total: 0.0,
                total_sq: 0.0,
                groups: vec![0.0; if want_groups { g } else { 0 }],
            };
            for i in range {
                let mass = pts.mass(i) * pts.weight_factor(i, w);
                if mass == 0.0 {
                    continue;
                }
                engine.eval_into(pts.point(i), &mut ws, &mut vals);
                if want_total {
                    let total: Complex64 = vals.iter().sum();
                    let z = m * mass * abs_pow(total, p);
                    sums.total += z;
                    sums.total_sq += z * z;
                }
                if want_groups {
                    for (acc, &v) in sums.groups.iter_mut().zip(&vals) {
                        *acc += mass * abs_pow(v, p);
                    }
                }
            }
            sums
        })
        .collect()
}

/// Dump `x₁…x_{d+1}, re, im, weight` per point.
pub fn write_field_csv<W: Write>(
    out: W,
    pts: &SpacePointSet,
    values: &[Complex64],
    w: &WeightSpec,
) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=pts.dim()).map(|j| format!("x{j}")).collect();
    header.extend(["re".into(), "im".into(), "weight".into()]);
    wr.write_record(&header)?;
    for (i, v) in values.iter().enumerate() {
        let mut row: Vec<String> = pts.point(i).iter().map(|c| c.to_string()).collect();
        row.push(v.re.to_string());
        row.push(v.im.to_string());
        row.push(weight_value(pts.point(i), w).to_string());
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
