//! One-dimensional oscillatory integrals `∫_a^b h(t) e(x t + x₄ φ(t)) dt`.
//!
//! Each panel removes the tangent line of the phase at its centre; the
//! linear part is integrated exactly through
//! `∫_{-1}^{1} P_n(s) e^{iωs} ds = 2 iⁿ j_n(ω)`, and the leftover smooth
//! factor is projected onto Legendre polynomials. Panels are added only
//! when `x₄` bends the phase by more than a small fraction of a cycle.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::phase::{derivative, horner};
use super::quad::{gauss_legendre, lagrange_basis, legendre_values};

/// Maximum phase curvature per panel, in cycles.
const CURVE_BUDGET: f64 = 0.05;
/// Legendre order of the projection for constant amplitudes.
const BASE_ORDER: usize = 16;
const MAX_LEVEL: usize = 16;

/// `e(t) = exp(2πi t)`, reduced mod 1 first.
#[inline]
pub fn e(t: f64) -> Complex64 {
    let (s, c) = (std::f64::consts::TAU * (t - t.round())).sin_cos();
    Complex64::new(c, s)
}

/// Spherical Bessel functions `j_0(x), …, j_{n-1}(x)` written into `out`.
pub fn sph_bessel_into(x: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    let ax = x.abs();
    if ax < 0.5 {
        sph_bessel_series(ax, out);
    } else if ax >= n as f64 {
        let (s, c) = ax.sin_cos();
        out[0] = s / ax;
        if n > 1 {
            out[1] = s / (ax * ax) - c / ax;
        }
        for k in 1..n.saturating_sub(1) {
            out[k + 1] = (2 * k + 1) as f64 / ax * out[k] - out[k - 1];
        }
    } else {
        sph_bessel_miller(ax, out);
    }
    if x < 0.0 {
        for v in out.iter_mut().skip(1).step_by(2) {
            *v = -*v;
        }
    }
}

fn sph_bessel_series(x: f64, out: &mut [f64]) {
    let y = -0.5 * x * x;
    let mut lead = 1.0; // x^n / (2n+1)!!
    for (k, v) in out.iter_mut().enumerate() {
        if k > 0 {
            lead *= x / (2 * k + 1) as f64;
        }
        let (mut term, mut sum) = (1.0, 1.0);
        for i in 1..12 {
            term *= y / (i as f64 * (2 * k + 2 * i + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        *v = lead * sum;
    }
}

fn sph_bessel_miller(x: f64, out: &mut [f64]) {
    let n = out.len();
    let start = n + 24 + x as usize;
    let (mut hi, mut mid) = (0.0f64, 1e-30f64);
    for v in out.iter_mut() {
        *v = 0.0;
    }
    for k in (1..=start).rev() {
        // j_{k-1} = (2k+1)/x j_k - j_{k+1}
        let lo = (2 * k + 1) as f64 / x * mid - hi;
        hi = mid;
        mid = lo;
        if k - 1 < n {
            out[k - 1] = lo;
        }
        if mid.abs() > 1e250 {
            hi *= 1e-250;
            mid *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if j0.abs() >= j1.abs() || n < 2 {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for v in out.iter_mut() {
        *v *= scale;
    }
}

/// A Legendre projection rule of order `n` on `[-1, 1]`.
#[derive(Debug)]
struct ProjectionRule {
    nodes: Vec<f64>,
    /// `wp[n][i] = (2n+1) w_i P_n(s_i)`
    wp: Vec<Vec<f64>>,
}

impl ProjectionRule {
    fn new(n: usize) -> Self {
        let (nodes, w) = gauss_legendre(n);
        let pv: Vec<Vec<f64>> = nodes.iter().map(|&s| legendre_values(n, s)).collect();
        let wp = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| (2 * k + 1) as f64 * w[i] * pv[i][k])
                    .collect()
            })
            .collect();
        ProjectionRule { nodes, wp }
    }

    fn order(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug)]
struct Panel {
    c: f64,
    h: f64,
    phi_c: f64,
    dphi_c: f64,
    /// `φ(t_i) − φ(c) − φ'(c)(t_i − c)` at the projection nodes
    rem: Vec<f64>,
    /// `lag[k * order + i] = L_k(t_i)`
    lag: Vec<f64>,
}

/// Integrator for one interval and one axis phase, with lazily built
/// panel tables at every refinement level.
#[derive(Debug)]
pub struct AxisIntegrator {
    a: f64,
    b: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    bend: f64,
    lagrange_nodes: Vec<f64>,
    rule: ProjectionRule,
    levels: Vec<OnceLock<Vec<Panel>>>,
}

impl AxisIntegrator {
    /// `q = 0` integrates the plain exponential; `q ≥ 2` also provides the
    /// moments against the Lagrange basis at the `q` Gauss nodes of `[a, b]`.
    pub fn new(a: f64, b: f64, phi: &[f64], q: usize) -> Self {
        let dphi = derivative(phi, 1);
        let d2 = derivative(phi, 2);
        let m = a.abs().max(b.abs());
        let bound: f64 = d2
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * m.powi(i as i32))
            .sum();
        let lagrange_nodes = if q >= 2 {
            let (x, _) = gauss_legendre(q);
            x.iter().map(|s| 0.5 * (a + b) + 0.5 * (b - a) * s).collect()
        } else {
            Vec::new()
        };
        AxisIntegrator {
            a,
            b,
            phi: phi.to_vec(),
            dphi,
            bend: bound * (b - a) * (b - a) / 8.0,
            rule: ProjectionRule::new(BASE_ORDER + lagrange_nodes.len()),
            lagrange_nodes,
            levels: (0..=MAX_LEVEL).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn bounds(&self) -> [f64; 2] {
        [self.a, self.b]
    }

    pub fn q(&self) -> usize {
        self.lagrange_nodes.len()
    }

    fn level_for(&self, x4: f64) -> usize {
        let need = (x4.abs() * self.bend / CURVE_BUDGET).sqrt().ceil();
        if need <= 1.0 {
            return 0;
        }
        let lvl = need.log2().ceil() as usize;
        lvl.min(MAX_LEVEL)
    }

    fn panels(&self, level: usize) -> &[Panel] {
        self.levels[level].get_or_init(|| {
            let count = 1usize << level;
            let len = (self.b - self.a) / count as f64;
            (0..count)
                .map(|p| {
                    let lo = self.a + len * p as f64;
                    let h = 0.5 * len;
                    let c = lo + h;
                    let phi_c = horner(&self.phi, c);
                    let dphi_c = horner(&self.dphi, c);
                    let ts: Vec<f64> = self.rule.nodes.iter().map(|s| c + h * s).collect();
                    let rem = ts
                        .iter()
                        .map(|&t| horner(&self.phi, t) - phi_c - dphi_c * (t - c))
                        .collect();
                    let n = self.rule.order();
                    let mut lag = vec![0.0; self.q() * n];
                    for (i, &t) in ts.iter().enumerate() {
                        for (k, l) in lagrange_basis(&self.lagrange_nodes, t).into_iter().enumerate() {
                            lag[k * n + i] = l;
                        }
                    }
                    Panel {
                        c,
                        h,
                        phi_c,
                        dphi_c,
                        rem,
                        lag,
                    }
                })
                .collect()
        })
    }

    /// Filon weights times the smooth factor, `β_i g_i`, for one panel.
    fn panel_weights(&self, panel: &Panel, x: f64, x4: f64, scratch: &mut Scratch) {
        let n = self.rule.order();
        let omega = std::f64::consts::TAU * (x + x4 * panel.dphi_c) * panel.h;
        sph_bessel_into(omega, &mut scratch.bessel[..n]);
        // iⁿ jₙ(ω)
        for k in 0..n {
            let j = scratch.bessel[k];
            scratch.coef[k] = match k % 4 {
                0 => Complex64::new(j, 0.0),
                1 => Complex64::new(0.0, j),
                2 => Complex64::new(-j, 0.0),
                _ => Complex64::new(0.0, -j),
            };
        }
        let outer = e(x * panel.c + x4 * panel.phi_c) * panel.h;
        for i in 0..n {
            let mut beta = Complex64::new(0.0, 0.0);
            for k in 0..n {
                beta += scratch.coef[k] * self.rule.wp[k][i];
            }
            scratch.weighted[i] = beta * e(x4 * panel.rem[i]) * outer;
        }
    }

    /// `∫_a^b e(x t + x₄ φ(t)) dt`.
    pub fn integral(&self, x: f64, x4: f64, scratch: &mut Scratch) -> Complex64 {
        scratch.ensure(self.rule.order());
        let n = self.rule.order();
        let mut total = Complex64::new(0.0, 0.0);
        for panel in self.panels(self.level_for(x4)) {
            self.panel_weights(panel, x, x4, scratch);
            total += scratch.weighted[..n].iter().sum::<Complex64>();
        }
        total
    }

    /// `∫_a^b L_k(t) e(x t + x₄ φ(t)) dt` for `k < q`.
    pub fn moments(&self, x: f64, x4: f64, scratch: &mut Scratch, out: &mut [Complex64]) {
        let q = self.q();
        assert_eq!(out.len(), q);
        scratch.ensure(self.rule.order());
        let n = self.rule.order();
        out.fill(Complex64::new(0.0, 0.0));
        for panel in self.panels(self.level_for(x4)) {
            self.panel_weights(panel, x, x4, scratch);
            for (k, o) in out.iter_mut().enumerate() {
                let lag = &panel.lag[k * n..(k + 1) * n];
                *o += scratch.weighted[..n]
                    .iter()
                    .zip(lag)
                    .map(|(w, l)| w * l)
                    .sum::<Complex64>();
            }
        }
    }
}

/// Reusable buffers for [`AxisIntegrator`].
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    bessel: Vec<f64>,
    coef: Vec<Complex64>,
    weighted: Vec<Complex64>,
}

impl Scratch {
    fn ensure(&mut self, n: usize) {
        if self.bessel.len() < n {
            self.bessel.resize(n, 0.0);
            self.coef.resize(n, Complex64::new(0.0, 0.0));
            self.weighted.resize(n, Complex64::new(0.0, 0.0));
        }
    }
}
