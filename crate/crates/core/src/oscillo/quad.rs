//! Gauss–Legendre rules and Legendre/Lagrange helpers.

use crate::caps::Cap;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))`.
pub fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// `P_0(z), …, P_{n-1}(z)`.
pub fn legendre_values(n: usize, z: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let (mut p0, mut p1) = (1.0, z);
    for k in 0..n {
        match k {
            0 => out.push(1.0),
            1 => out.push(z),
            _ => {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
                out.push(p2);
            }
        }
    }
    out
}

/// Rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    (
        x.iter().map(|s| c + h * s).collect(),
        w.iter().map(|wi| h * wi).collect(),
    )
}

/// Values of the Lagrange basis through `nodes` at `t`.
pub fn lagrange_basis(nodes: &[f64], t: f64) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(k, &tk)| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &ti)| (t - ti) / (tk - ti))
                .product()
        })
        .collect()
}

/// A node of a tensor rule: position and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadNode {
    pub xi: Vec<f64>,
    pub weight: f64,
}

/// Tensor Gauss–Legendre rule of order `q` per axis on the cap box,
/// row-major over axes.
pub fn quadrature_nodes(cap: &Cap, q: usize) -> Vec<QuadNode> {
    let per_axis: Vec<(Vec<f64>, Vec<f64>)> = cap
        .bounds_f64()
        .iter()
        .map(|&[a, b]| gauss_legendre_on(q, a, b))
        .collect();
    let d = per_axis.len();
    let total = q.pow(d as u32);
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut idx = vec![0; d];
            for j in (0..d).rev() {
                idx[j] = rem % q;
                rem /= q;
            }
            QuadNode {
                xi: (0..d).map(|j| per_axis[j].0[idx[j]]).collect(),
                weight: (0..d).map(|j| per_axis[j].1[idx[j]]).product(),
            }
        })
        .collect()
}
