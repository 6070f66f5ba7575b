//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use decoupling_core::caps::CapFamily;
use decoupling_core::oscillo::{FrequencyFunction, PieceCoeffs};
use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term recurrence.
pub fn gl(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

pub fn cis(t: f64) -> Complex64 {
    let a = 2.0 * PI * (t - t.round());
    Complex64::new(a.cos(), a.sin())
}

/// Composite Gauss rule on `[a, b]` with `panels` panels of `order` nodes.
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gl(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let c = a + h * (k as f64 + 0.5);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((c + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}

/// Adaptive bisection with a 10-point Gauss rule, splitting until both
/// halves agree with the whole to `tol` per unit length.
pub fn adaptive(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn rule(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, x: &[f64], w: &[f64]) -> Complex64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        x.iter().zip(w).map(|(xi, wi)| f(c + h * xi) * (h * wi)).sum()
    }
    #[allow(clippy::too_many_arguments)]
    fn go(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, whole: Complex64, density: f64, depth: u32, x: &[f64], w: &[f64]) -> Complex64 {
        let m = 0.5 * (a + b);
        let l = rule(f, a, m, x, w);
        let r = rule(f, m, b, x, w);
        if depth >= 30 || (l + r - whole).norm() <= density * (b - a) {
            l + r
        } else {
            go(f, a, m, l, density, depth + 1, x, w) + go(f, m, b, r, density, depth + 1, x, w)
        }
    }
    let (x, w) = gl(10);
    go(f, a, b, rule(f, a, b, &x, &w), tol / (b - a), 0, &x, &w)
}

/// Each group of `f` as a discrete measure `Σ c_i δ_{ξ_i}` on `[0,1]`
/// that integrates `e(x₁ξ + x₂ξ⁴)` accurately for `|x| ≤ radius`.
pub fn planar_groups(f: &FrequencyFunction, family: &CapFamily, radius: f64) -> Vec<Vec<(f64, Complex64)>> {
    let bounds: Vec<[f64; 2]> = family.axis_intervals(0).iter().map(|iv| iv.bounds_f64()).collect();
    let mut groups: Vec<Vec<(f64, Complex64)>> = vec![Vec::new(); bounds.len()];
    match f {
        FrequencyFunction::Atomic { atoms, .. } => {
            for a in atoms {
                let t = a.xi[0];
                let g = bounds
                    .iter()
                    .position(|b| t >= b[0] && t < b[1])
                    .unwrap_or(bounds.len() - 1);
                groups[g].push((t, a.amp));
            }
        }
        FrequencyFunction::PerCapGrid { pieces, .. } => {
            for piece in pieces {
                let PieceCoeffs::Constant { c } = piece.coeffs else {
                    panic!("planar oracle takes constant pieces");
                };
                let [a, b] = piece.bounds[0];
                let g = bounds.iter().position(|bd| (bd[0] - a).abs() < 1e-15).expect("piece is a cap");
                // 12 nodes per cycle of the phase
                let cycles = radius * ((b - a) + (b.powi(4) - a.powi(4)));
                let panels = cycles.ceil().max(1.0) as usize;
                for (t, w) in composite(a, b, panels, 12) {
                    groups[g].push((t, c * w));
                }
            }
        }
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// Powers `∫_{B_R} |Σ_g v_g|^p` and `∫_{B_R} |v_g|^p` for each `p`, by a
/// midpoint rule on rows of spacing `h` whose cells tile each chord exactly.
pub struct DiskPowers {
    pub total: Vec<f64>,
    pub groups: Vec<Vec<f64>>,
}

pub fn disk_powers(groups: &[Vec<(f64, Complex64)>], radius: f64, h: f64, ps: &[f64]) -> DiskPowers {
    let rows = (2.0 * radius / h).round() as usize;
    let ng = groups.len();
    let mut total = vec![0.0; ps.len()];
    let mut per = vec![vec![0.0; ng]; ps.len()];
    let mut acc: Vec<Vec<Complex64>> = groups.iter().map(|g| vec![Complex64::new(0.0, 0.0); g.len()]).collect();
    let mut step: Vec<Vec<Complex64>> = acc.clone();
    let mut vals = vec![Complex64::new(0.0, 0.0); ng];
    for k in 0..rows {
        let x2 = -radius + h * (k as f64 + 0.5);
        let c = (radius * radius - x2 * x2).max(0.0).sqrt();
        let cells = ((2.0 * c / h).ceil() as usize).max(1);
        let hx = 2.0 * c / cells as f64;
        let x1 = -c + 0.5 * hx;
        for (g, nodes) in groups.iter().enumerate() {
            for (i, &(t, w)) in nodes.iter().enumerate() {
                acc[g][i] = w * cis(x1 * t + x2 * t.powi(4));
                step[g][i] = cis(hx * t);
            }
        }
        let mass = h * hx;
        for _ in 0..cells {
            for g in 0..ng {
                let mut s = Complex64::new(0.0, 0.0);
                for (a, st) in acc[g].iter_mut().zip(&step[g]) {
                    s += *a;
                    *a *= st;
                }
                vals[g] = s;
            }
            let sum: Complex64 = vals.iter().sum();
            for (pi, &p) in ps.iter().enumerate() {
                total[pi] += mass * sum.norm().powf(p);
                for g in 0..ng {
                    per[pi][g] += mass * vals[g].norm().powf(p);
                }
            }
        }
    }
    DiskPowers { total, groups: per }
}

/// `(lhs, rhs)` norms with an error estimate from halving the spacing.
pub struct OracleNorms {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_err: f64,
    pub rhs_err: f64,
}

pub fn planar_oracle(groups: &[Vec<(f64, Complex64)>], radius: f64, h: f64, ps: &[f64]) -> Vec<OracleNorms> {
    let fine = disk_powers(groups, radius, h, ps);
    let coarse = disk_powers(groups, radius, 2.0 * h, ps);
    let norms = |d: &DiskPowers, i: usize, p: f64| {
        let lhs = d.total[i].powf(1.0 / p);
        let rhs = d.groups[i].iter().map(|s| s.powf(2.0 / p)).sum::<f64>().sqrt();
        (lhs, rhs)
    };
    ps.iter()
        .enumerate()
        .map(|(i, &p)| {
            let (lf, rf) = norms(&fine, i, p);
            let (lc, rc) = norms(&coarse, i, p);
            OracleNorms {
                lhs: lf,
                rhs: rf,
                lhs_err: (lf - lc).abs(),
                rhs_err: (rf - rc).abs(),
            }
        })
        .collect()
}
