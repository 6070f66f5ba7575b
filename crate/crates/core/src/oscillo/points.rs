//! Space sample sets and the ball weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Points per chunk. Each chunk draws from its own RNG stream, so a point
/// set does not depend on how chunks are scheduled.
pub const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Indicator,
    /// `(1 + |x − x₀|/R)^{−100n}`, zero beyond `truncation · R`.
    PaperWeight { truncation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub kind: WeightKind,
}

impl WeightSpec {
    pub fn indicator(center: &[f64], radius: f64) -> Self {
        WeightSpec {
            center: center.to_vec(),
            radius,
            kind: WeightKind::Indicator,
        }
    }

    pub fn paper(center: &[f64], radius: f64) -> Self {
        WeightSpec {
            center: center.to_vec(),
            radius,
            kind: WeightKind::PaperWeight { truncation: 4.0 },
        }
    }

    pub fn exponent(&self) -> i32 {
        100 * self.center.len() as i32
    }
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn weight_value(x: &[f64], w: &WeightSpec) -> f64 {
    let r = dist(x, &w.center);
    match w.kind {
        WeightKind::Indicator => {
            if r <= w.radius {
                1.0
            } else {
                0.0
            }
        }
        WeightKind::PaperWeight { truncation } => {
            if r > truncation * w.radius {
                0.0
            } else {
                (1.0 + r / w.radius).powi(-w.exponent())
            }
        }
    }
}

/// Surface area of the unit sphere in `ℝⁿ`.
pub fn sphere_area(n: usize) -> f64 {
    // Γ(n/2) by the half-integer recurrence
    let mut gamma = if n % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut s = if n % 2 == 0 { 1.0 } else { 0.5 };
    while s < n as f64 / 2.0 - 0.25 {
        gamma *= s;
        s += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma
}

pub fn ball_volume(n: usize, radius: f64) -> f64 {
    sphere_area(n) / n as f64 * radius.powi(n as i32)
}

/// `∫_{ℝⁿ} (1 + |x|/R)^{−N} dx = S_{n−1} Rⁿ B(n, N − n)`.
pub fn paper_weight_mass(n: usize, radius: f64) -> f64 {
    let big = 100 * n;
    // B(n, N−n) = (n−1)! / ((N−n)(N−n+1)…(N−1))
    let mut beta = (1..n).map(|k| k as f64).product::<f64>();
    for k in (big - n)..big {
        beta /= k as f64;
    }
    sphere_area(n) * radius.powi(n as i32) * beta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointSetKind {
    /// Cell midpoints of a uniform grid on a box.
    Grid { lo: Vec<f64>, hi: Vec<f64>, steps: Vec<usize> },
    MonteCarloBall { center: Vec<f64>, radius: f64, count: usize, seed: u64 },
    /// Points drawn from the (truncated) decaying weight itself.
    WeightSampled { weight: WeightSpec, count: usize, seed: u64 },
    Explicit,
}

/// Points in `ℝ^{d+1}` with a quadrature mass per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacePointSet {
    kind: PointSetKind,
    dim: usize,
    coords: Vec<f64>,
    mass: Vec<f64>,
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in out.iter_mut().take(n) {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 1e-300 {
            let inv = 1.0 / s.sqrt();
            for v in out.iter_mut().take(n) {
                *v *= inv;
            }
            return;
        }
    }
}

impl SpacePointSet {
    pub fn from_points(dim: usize, coords: Vec<f64>, mass: f64) -> Self {
        assert_eq!(coords.len() % dim, 0);
        let n = coords.len() / dim;
        SpacePointSet {
            kind: PointSetKind::Explicit,
            dim,
            coords,
            mass: vec![mass; n],
        }
    }

    pub fn grid(lo: &[f64], hi: &[f64], steps: &[usize]) -> Self {
        let dim = lo.len();
        let cell: f64 = (0..dim).map(|j| (hi[j] - lo[j]) / steps[j] as f64).product();
        let total: usize = steps.iter().product();
        let mut coords = Vec::with_capacity(total * dim);
        for flat in 0..total {
            let mut rem = flat;
            let mut p = vec![0.0; dim];
            for j in (0..dim).rev() {
                let i = rem % steps[j];
                rem /= steps[j];
                let h = (hi[j] - lo[j]) / steps[j] as f64;
                p[j] = lo[j] + h * (i as f64 + 0.5);
            }
            coords.extend(p);
        }
        SpacePointSet {
            kind: PointSetKind::Grid {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
                steps: steps.to_vec(),
            },
            dim,
            coords,
            mass: vec![cell; total],
        }
    }

    /// `count` points uniform in the ball, mass `vol(B)/count` each.
    pub fn monte_carlo_ball(center: &[f64], radius: f64, count: usize, seed: u64) -> Self {
        let n = center.len();
        let coords = Self::chunked(n, count, |chunk, len| {
            let mut rng = chunk_rng(seed, chunk);
            let mut out = Vec::with_capacity(len * n);
            let mut dir = vec![0.0; n];
            for _ in 0..len {
                unit_direction(&mut rng, n, &mut dir);
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / n as f64);
                out.extend(dir.iter().zip(center).map(|(d, c)| c + r * d));
            }
            out
        });
        SpacePointSet {
            kind: PointSetKind::MonteCarloBall {
                center: center.to_vec(),
                radius,
                count,
                seed,
            },
            dim: n,
            coords,
            mass: vec![ball_volume(n, radius) / count as f64; count],
        }
    }

    /// `count` points with density proportional to the decaying weight: the
    /// radius is `R·X/(1−X)` with `X ~ Beta(n, 100n − n)`. Mass per point is
    /// `∫ω / count`, zero past the truncation radius.
    pub fn weight_sampled(weight: &WeightSpec, count: usize, seed: u64) -> Self {
        let WeightKind::PaperWeight { truncation } = weight.kind else {
            panic!("weight_sampled needs a decaying weight");
        };
        let n = weight.center.len();
        let beta = Beta::new(n as f64, (100 * n - n) as f64).expect("valid beta parameters");
        let radius = weight.radius;
        let center = weight.center.clone();
        let coords = Self::chunked(n, count, |chunk, len| {
            let mut rng = chunk_rng(seed, chunk);
            let mut out = Vec::with_capacity(len * n);
            let mut dir = vec![0.0; n];
            for _ in 0..len {
                unit_direction(&mut rng, n, &mut dir);
                let x: f64 = beta.sample(&mut rng);
                let r = radius * x / (1.0 - x);
                out.extend(dir.iter().zip(&center).map(|(d, c)| c + r * d));
            }
            out
        });
        let each = paper_weight_mass(n, radius) / count as f64;
        let mass = coords
            .chunks(n)
            .map(|p| if dist(p, &center) > truncation * radius { 0.0 } else { each })
            .collect();
        SpacePointSet {
            kind: PointSetKind::WeightSampled {
                weight: weight.clone(),
                count,
                seed,
            },
            dim: n,
            coords,
            mass,
        }
    }

    fn chunked(n: usize, count: usize, f: impl Fn(usize, usize) -> Vec<f64> + Sync) -> Vec<f64> {
        let chunks: Vec<Vec<f64>> = (0..count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| f(c, CHUNK.min(count - c * CHUNK)))
            .collect();
        let out: Vec<f64> = chunks.concat();
        debug_assert_eq!(out.len(), n * count);
        out
    }

    pub fn kind(&self) -> &PointSetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(
            self.kind,
            PointSetKind::MonteCarloBall { .. } | PointSetKind::WeightSampled { .. }
        )
    }

    /// The weight already folded into the point density, if any.
    pub fn sampled_weight(&self) -> Option<&WeightSpec> {
        match &self.kind {
            PointSetKind::WeightSampled { weight, .. } => Some(weight),
            _ => None,
        }
    }

    /// Factor applied to `|v|^p · mass` so the sum estimates `∫ |v|^p w`.
    pub fn weight_factor(&self, i: usize, w: &WeightSpec) -> f64 {
        match self.sampled_weight() {
            Some(s) if s == w => 1.0,
            Some(s) => {
                let base = weight_value(self.point(i), s);
                if base > 0.0 {
                    weight_value(self.point(i), w) / base
                } else {
                    0.0
                }
            }
            None => weight_value(self.point(i), w),
        }
    }

    pub fn chunk_ranges(&self) -> Vec<std::ops::Range<usize>> {
        (0..self.len().div_ceil(CHUNK))
            .map(|c| c * CHUNK..((c + 1) * CHUNK).min(self.len()))
            .collect()
    }
}
