//! Affine changes of variables `ξ_j = a_j + w_j η_j` that carry a box onto
//! `[0,1]^d`, and the conjugated operator data they produce.
//!
//! Expanding `φ_j(a_j + w_j η)` binomially gives `Σ_k b_{k,j} η^k`. The
//! constant is dropped (unimodular factor), the linear coefficient moves
//! into the space map, and the rest, divided by a vertical scale `s`,
//! becomes the new axis phase `ψ_j`. With `x̃_j = w_j x_j + b_{1,j} x_{d+1}`
//! and `x̃_{d+1} = s x_{d+1}` one gets `|E_τ f(x)| = |E^ψ f̃(x̃)|`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caps::Cap;
use crate::oscillo::{
    derivative, eval_extension, horner, Atom, FrequencyFunction, OscilloError, PhaseSpec, Piece,
    PieceCoeffs, SpacePointSet,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RescaleError {
    #[error("degenerate box: axis {axis} has width {width}")]
    DegenerateBox { axis: usize, width: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-positive vertical scale {0}")]
    BadScale(f64),
    #[error(transparent)]
    Oscillo(#[from] OscilloError),
}

/// Which space map to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapVariant {
    /// Diagonal `w_j`: the map forced by the substitution.
    #[default]
    Exact,
    /// Diagonal `a_j² w_j` (that is `λ K^{-1/2}` instead of `λ^{-1} K^{-1/2}`
    /// for the `τ` pieces). Kept to show that it breaks the identity.
    SwappedScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineConjugation {
    pub offsets: Vec<f64>,
    pub widths: Vec<f64>,
    /// `(d+1) × (d+1)`, rows act on `x`.
    pub matrix: Vec<Vec<f64>>,
    pub amplitude: f64,
    pub vertical_scale: f64,
    pub phase_out: PhaseSpec,
    /// `b_{1,j}`, the linear coefficients moved into the last column.
    pub linear_discard: Vec<f64>,
    pub variant: MapVariant,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `b_k = Σ_i c_i C(i,k) a^{i−k} w^k`.
fn expand(c: &[f64], a: f64, w: f64) -> Vec<f64> {
    (0..c.len())
        .map(|k| {
            (k..c.len())
                .map(|i| c[i] * binomial(i, k) * a.powi((i - k) as i32) * w.powi(k as i32))
                .sum()
        })
        .collect()
}

fn dyadic_floor(a: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else {
        2f64.powi(a.log2().floor() as i32)
    }
}

/// Vertical scale making the leading curvature of `ψ` of unit size:
/// `max_j max(w_j² φ_j''(λ_j) / (D(D−1)), w_j^D |c_D|)` with `λ_j` the dyadic
/// floor of `a_j` and `D` the axis degree.
pub fn default_vertical_scale(phase: &PhaseSpec, offsets: &[f64], widths: &[f64]) -> f64 {
    (0..phase.dim())
        .map(|j| {
            let c = phase.axis(j);
            let deg = phase.degree(j);
            if deg < 2 {
                return 0.0;
            }
            let lam = dyadic_floor(offsets[j]);
            let d2 = horner(&derivative(c, 2), lam);
            let curv = widths[j].powi(2) * d2.abs() / (deg * (deg - 1)) as f64;
            let top = widths[j].powi(deg as i32) * c[deg].abs();
            curv.max(top)
        })
        .fold(0.0, f64::max)
}

/// Conjugate the box `(offsets, widths)` for an arbitrary separable phase.
pub fn conjugate_box(
    offsets: &[f64],
    widths: &[f64],
    phase: &PhaseSpec,
    variant: MapVariant,
    scale: Option<f64>,
) -> Result<AffineConjugation, RescaleError> {
    let d = phase.dim();
    if offsets.len() != d || widths.len() != d {
        return Err(RescaleError::DimensionMismatch {
            expected: d,
            got: offsets.len(),
        });
    }
    for (axis, &width) in widths.iter().enumerate() {
        if !(width > 0.0) {
            return Err(RescaleError::DegenerateBox { axis, width });
        }
    }
    let s = scale.unwrap_or_else(|| default_vertical_scale(phase, offsets, widths));
    if !(s > 0.0) {
        return Err(RescaleError::BadScale(s));
    }
    let mut matrix = vec![vec![0.0; d + 1]; d + 1];
    let mut linear = Vec::with_capacity(d);
    let mut psi = Vec::with_capacity(d);
    for j in 0..d {
        let b = expand(phase.axis(j), offsets[j], widths[j]);
        let b1 = b.get(1).copied().unwrap_or(0.0);
        matrix[j][j] = match variant {
            MapVariant::Exact => widths[j],
            MapVariant::SwappedScale => offsets[j] * offsets[j] * widths[j],
        };
        matrix[j][d] = b1;
        linear.push(b1);
        let mut pj: Vec<f64> = b.iter().map(|bk| bk / s).collect();
        pj.iter_mut().take(2).for_each(|v| *v = 0.0);
        psi.push(pj);
    }
    matrix[d][d] = s;
    Ok(AffineConjugation {
        offsets: offsets.to_vec(),
        widths: widths.to_vec(),
        matrix,
        amplitude: widths.iter().product(),
        vertical_scale: s,
        phase_out: PhaseSpec::new(psi),
        linear_discard: linear,
        variant,
    })
}

/// Conjugation of a cap for the pure phase `Σ ξ_j^{2m}`.
pub fn conjugate(tau: &Cap, m: u32) -> Result<AffineConjugation, RescaleError> {
    conjugate_with(tau, &PhaseSpec::pure_power(tau.dim(), 2 * m), MapVariant::Exact, None)
}

pub fn conjugate_with(
    tau: &Cap,
    phase: &PhaseSpec,
    variant: MapVariant,
    scale: Option<f64>,
) -> Result<AffineConjugation, RescaleError> {
    let b = tau.bounds_f64();
    let offsets: Vec<f64> = b.iter().map(|x| x[0]).collect();
    let widths: Vec<f64> = b.iter().map(|x| x[1] - x[0]).collect();
    conjugate_box(&offsets, &widths, phase, variant, scale)
}

impl AffineConjugation {
    pub fn dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn determinant(&self) -> f64 {
        // upper triangular apart from the last column
        (0..=self.dim()).map(|j| self.matrix[j][j]).product()
    }

    /// `ξ ↦ η = (ξ − a)/w`.
    pub fn to_unit(&self, xi: &[f64]) -> Vec<f64> {
        xi.iter()
            .zip(&self.offsets)
            .zip(&self.widths)
            .map(|((x, a), w)| (x - a) / w)
            .collect()
    }

    /// `f̃`: densities pick up the Jacobian `Π w_j`; atoms keep their mass.
    pub fn transform_function(&self, f: &FrequencyFunction) -> FrequencyFunction {
        match f {
            FrequencyFunction::Atomic { d, atoms, provenance } => FrequencyFunction::Atomic {
                d: *d,
                atoms: atoms
                    .iter()
                    .map(|a| Atom {
                        xi: self.to_unit(&a.xi),
                        amp: a.amp,
                    })
                    .collect(),
                provenance: provenance.clone(),
            },
            FrequencyFunction::PerCapGrid { d, q, pieces, provenance } => {
                let amp = self.amplitude;
                let pieces = pieces
                    .iter()
                    .map(|p| {
                        let bounds = p
                            .bounds
                            .iter()
                            .enumerate()
                            .map(|(j, b)| {
                                let (a, w) = (self.offsets[j], self.widths[j]);
                                [(b[0] - a) / w, (b[1] - a) / w]
                            })
                            .collect();
                        let coeffs = match &p.coeffs {
                            PieceCoeffs::Constant { c } => PieceCoeffs::Constant { c: c * amp },
                            PieceCoeffs::Separable { axes } => {
                                let mut axes = axes.clone();
                                axes[0].iter_mut().for_each(|v| *v *= amp);
                                PieceCoeffs::Separable { axes }
                            }
                            PieceCoeffs::Nodal { values } => PieceCoeffs::Nodal {
                                values: values.iter().map(|v| v * amp).collect(),
                            },
                        };
                        Piece { bounds, coeffs }
                    })
                    .collect();
                FrequencyFunction::PerCapGrid {
                    d: *d,
                    q: *q,
                    pieces,
                    provenance: provenance.clone(),
                }
            }
        }
    }

    /// Axis-aligned half-widths of `T(B_R)`: `R · ‖row_j‖`.
    pub fn image_half_widths(&self, radius: f64) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| radius * row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// `∫|f|`, the scale below which relative errors are not meaningful.
fn total_mass(f: &FrequencyFunction) -> f64 {
    match f {
        FrequencyFunction::Atomic { atoms, .. } => atoms.iter().map(|a| a.amp.norm()).sum(),
        FrequencyFunction::PerCapGrid { pieces, .. } => pieces
            .iter()
            .map(|p| {
                let vol: f64 = p.bounds.iter().map(|b| b[1] - b[0]).product();
                let peak = match &p.coeffs {
                    PieceCoeffs::Constant { c } => c.norm(),
                    PieceCoeffs::Separable { axes } => axes
                        .iter()
                        .map(|a| a.iter().map(|v| v.norm()).fold(0.0, f64::max))
                        .product(),
                    PieceCoeffs::Nodal { values } => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
                };
                vol * peak
            })
            .sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugationCheck {
    pub max_rel_error: f64,
    pub worst_point: usize,
    pub floor: f64,
    pub tolerance: f64,
    pub exceeded: bool,
}

/// Both sides of `|E_τ f(x)| = |E^ψ_{[0,1]^d} f̃(T x)|` at every point.
pub fn conjugation_sides(
    f: &FrequencyFunction,
    tau: &Cap,
    phase: &PhaseSpec,
    conj: &AffineConjugation,
    pts: &SpacePointSet,
) -> Result<(Vec<Complex64>, Vec<Complex64>), RescaleError> {
    let left = eval_extension(f, &tau.bounds_f64(), phase, pts)?;
    let n = pts.dim();
    let mapped: Vec<f64> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| conj.apply(pts.point(i)))
        .collect();
    let mapped = SpacePointSet::from_points(n, mapped, 1.0);
    let ft = conj.transform_function(f);
    // atoms on the far edge may land a rounding error outside [0,1]
    let unit: Vec<[f64; 2]> = vec![[-1e-12, 1.0 + 1e-12]; phase.dim()];
    let right = eval_extension(&ft, &unit, &conj.phase_out, &mapped)?;
    Ok((left, right))
}

/// Max over points of `||L| − |R|| / max(|L|, ε)`, `ε = 10⁻⁶ ∫|f|`.
pub fn verify_conjugation_with(
    f: &FrequencyFunction,
    tau: &Cap,
    phase: &PhaseSpec,
    conj: &AffineConjugation,
    pts: &SpacePointSet,
    tol: f64,
) -> Result<ConjugationCheck, RescaleError> {
    let (left, right) = conjugation_sides(f, tau, phase, conj, pts)?;
    let floor = 1e-6 * total_mass(f);
    let (worst_point, max_rel_error) = left
        .iter()
        .zip(&right)
        .map(|(l, r)| (l.norm() - r.norm()).abs() / l.norm().max(floor))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    Ok(ConjugationCheck {
        max_rel_error,
        worst_point,
        floor,
        tolerance: tol,
        exceeded: !(max_rel_error <= tol),
    })
}

pub fn verify_conjugation(
    f: &FrequencyFunction,
    tau: &Cap,
    m: u32,
    pts: &SpacePointSet,
    tol: f64,
) -> Result<ConjugationCheck, RescaleError> {
    let phase = PhaseSpec::pure_power(tau.dim(), 2 * m);
    let conj = conjugate_with(tau, &phase, MapVariant::Exact, None)?;
    verify_conjugation_with(f, tau, &phase, &conj, pts, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisConditions {
    pub min_d2: f64,
    pub max_d2: f64,
    pub max_abs_d3: f64,
    pub max_abs_d4: f64,
    pub higher_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConditions {
    pub axes: Vec<AxisConditions>,
}

impl PhaseConditions {
    /// `φ'' ≥ lo`, `φ'' ≤ hi`, `|φ'''| ≤ d3`, `|φ''''| ≤ d4`, nothing above.
    pub fn within(&self, lo: f64, hi: f64, d3: f64, d4: f64) -> bool {
        self.axes.iter().all(|a| {
            a.min_d2 >= lo && a.max_d2 <= hi && a.max_abs_d3 <= d3 && a.max_abs_d4 <= d4 && a.higher_zero
        })
    }
}

/// Real roots of `c` in `[lo, hi]`, found between consecutive critical
/// points by bisection.
fn roots_in(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let deg = c.iter().rposition(|&v| v != 0.0).unwrap_or(0);
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        let r = -c[0] / c[1];
        return if (lo..=hi).contains(&r) { vec![r] } else { Vec::new() };
    }
    let mut knots = vec![lo];
    knots.extend(roots_in(&derivative(&c[..=deg], 1), lo, hi));
    knots.push(hi);
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (horner(c, a), horner(c, b));
        if fa == 0.0 {
            out.push(a);
            continue;
        }
        if fa * fb > 0.0 {
            continue;
        }
        while b - a > 1e-15 {
            let mid = 0.5 * (a + b);
            if horner(c, mid) * fa > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    if horner(c, hi) == 0.0 {
        out.push(hi);
    }
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-13);
    out
}

/// `(min, max)` of a polynomial on `[lo, hi]`.
fn poly_range(c: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let mut cands = vec![lo, hi];
    cands.extend(roots_in(&derivative(c, 1), lo, hi));
    cands
        .iter()
        .map(|&t| horner(c, t))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

pub fn check_phase_conditions(psi: &PhaseSpec) -> PhaseConditions {
    PhaseConditions {
        axes: (0..psi.dim())
            .map(|j| {
                let c = psi.axis(j);
                let (min_d2, max_d2) = poly_range(&derivative(c, 2), 0.0, 1.0);
                let (a3, b3) = poly_range(&derivative(c, 3), 0.0, 1.0);
                let (a4, b4) = poly_range(&derivative(c, 4), 0.0, 1.0);
                AxisConditions {
                    min_d2,
                    max_d2,
                    max_abs_d3: a3.abs().max(b3.abs()),
                    max_abs_d4: a4.abs().max(b4.abs()),
                    higher_zero: c.iter().skip(5).all(|&v| v == 0.0),
                }
            })
            .collect(),
    }
}
