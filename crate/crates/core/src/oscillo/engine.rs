//! Pointwise evaluation of `E f(x) = ∫ f(ξ) e(x·ξ + x_{d+1} φ(ξ)) dξ`.
//!
//! Separability of the phase turns every box integral into a product of
//! one-dimensional integrals, so the engine deduplicates axis intervals
//! across pieces and evaluates each once per point.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use super::filon::{e, AxisIntegrator, Scratch};
use super::freq::{Atom, FrequencyFunction, PieceCoeffs};
use super::points::SpacePointSet;
use super::{OscilloError, PhaseSpec};
use crate::caps::Cap;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug)]
struct AxisSlot {
    integrator: AxisIntegrator,
    moments: bool,
}

#[derive(Debug)]
struct PieceRef {
    slots: Vec<usize>,
    coeffs: PieceCoeffs,
}

#[derive(Debug)]
struct AtomRef {
    idx: Vec<usize>,
    amp: Complex64,
}

#[derive(Debug, Default)]
struct Group {
    pieces: Vec<PieceRef>,
    atoms: Vec<AtomRef>,
}

/// Evaluates a list of functions ("groups") at space points; each group
/// produces one output value per point.
#[derive(Debug)]
pub struct FieldEngine {
    d: usize,
    q: usize,
    phase: PhaseSpec,
    axes: Vec<Vec<AxisSlot>>,
    /// distinct atom coordinates per axis, with `φ_j` at each
    atom_coords: Vec<Vec<(f64, f64)>>,
    groups: Vec<Group>,
}

/// Per-thread buffers for [`FieldEngine::eval_into`].
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    scratch: Scratch,
    integral: Vec<Vec<Complex64>>,
    moments: Vec<Vec<Vec<Complex64>>>,
    atom_table: Vec<Vec<Complex64>>,
    contract: Vec<Complex64>,
}

impl FieldEngine {
    pub fn new(groups: &[FrequencyFunction], phase: &PhaseSpec) -> Result<Self, OscilloError> {
        let d = phase.dim();
        let mut q = 0usize;
        for g in groups {
            if g.dim() != d {
                return Err(OscilloError::DimensionMismatch {
                    expected: d,
                    got: g.dim(),
                });
            }
            if let FrequencyFunction::PerCapGrid { q: gq, .. } = g {
                if *gq < 2 {
                    return Err(OscilloError::QuadratureOrderTooLow(*gq));
                }
                if q != 0 && q != *gq {
                    return Err(OscilloError::Unsupported("mixed quadrature orders".into()));
                }
                q = *gq;
            }
        }

        let mut interval_index: Vec<HashMap<(u64, u64), usize>> = vec![HashMap::new(); d];
        let mut intervals: Vec<Vec<([f64; 2], bool)>> = vec![Vec::new(); d];
        let mut coord_index: Vec<HashMap<u64, usize>> = vec![HashMap::new(); d];
        let mut coords: Vec<Vec<(f64, f64)>> = vec![Vec::new(); d];
        let mut out_groups = Vec::with_capacity(groups.len());

        for g in groups {
            let mut group = Group::default();
            match g {
                FrequencyFunction::PerCapGrid { pieces, .. } => {
                    for piece in pieces {
                        if piece.bounds.len() != d {
                            return Err(OscilloError::DimensionMismatch {
                                expected: d,
                                got: piece.bounds.len(),
                            });
                        }
                        check_coeff_shape(&piece.coeffs, q, d)?;
                        let moments = !matches!(piece.coeffs, PieceCoeffs::Constant { .. });
                        let slots = piece
                            .bounds
                            .iter()
                            .enumerate()
                            .map(|(j, &[a, b])| {
                                if !(a < b) {
                                    return Err(OscilloError::Unsupported(format!("empty piece [{a}, {b}]")));
                                }
                                let key = (a.to_bits(), b.to_bits());
                                let id = *interval_index[j].entry(key).or_insert_with(|| {
                                    intervals[j].push(([a, b], false));
                                    intervals[j].len() - 1
                                });
                                intervals[j][id].1 |= moments;
                                Ok(id)
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        group.pieces.push(PieceRef {
                            slots,
                            coeffs: piece.coeffs.clone(),
                        });
                    }
                }
                FrequencyFunction::Atomic { atoms, .. } => {
                    for Atom { xi, amp } in atoms {
                        if xi.len() != d {
                            return Err(OscilloError::DimensionMismatch {
                                expected: d,
                                got: xi.len(),
                            });
                        }
                        let idx = xi
                            .iter()
                            .enumerate()
                            .map(|(j, &t)| {
                                *coord_index[j].entry(t.to_bits()).or_insert_with(|| {
                                    coords[j].push((t, phase.eval_axis(j, t)));
                                    coords[j].len() - 1
                                })
                            })
                            .collect();
                        group.atoms.push(AtomRef { idx, amp: *amp });
                    }
                }
            }
            out_groups.push(group);
        }

        let axes = intervals
            .into_iter()
            .enumerate()
            .map(|(j, list)| {
                list.into_iter()
                    .map(|([a, b], moments)| AxisSlot {
                        integrator: AxisIntegrator::new(a, b, phase.axis(j), if moments { q } else { 0 }),
                        moments,
                    })
                    .collect()
            })
            .collect();
        Ok(FieldEngine {
            d,
            q,
            phase: phase.clone(),
            axes,
            atom_coords: coords,
            groups: out_groups,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn phase(&self) -> &PhaseSpec {
        &self.phase
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            scratch: Scratch::default(),
            integral: self.axes.iter().map(|a| vec![ZERO; a.len()]).collect(),
            moments: self
                .axes
                .iter()
                .map(|a| {
                    a.iter()
                        .map(|s| if s.moments { vec![ZERO; self.q] } else { Vec::new() })
                        .collect()
                })
                .collect(),
            atom_table: self.atom_coords.iter().map(|c| vec![ZERO; c.len()]).collect(),
            contract: Vec::new(),
        }
    }

    /// Value of every group at the space point `x ∈ ℝ^{d+1}`.
    pub fn eval_into(&self, x: &[f64], ws: &mut Workspace, out: &mut [Complex64]) {
        assert_eq!(x.len(), self.d + 1);
        assert_eq!(out.len(), self.groups.len());
        let x4 = x[self.d];
        for (j, slots) in self.axes.iter().enumerate() {
            for (s, slot) in slots.iter().enumerate() {
                if slot.moments {
                    let m = &mut ws.moments[j][s];
                    slot.integrator.moments(x[j], x4, &mut ws.scratch, m);
                    ws.integral[j][s] = m.iter().sum();
                } else {
                    ws.integral[j][s] = slot.integrator.integral(x[j], x4, &mut ws.scratch);
                }
            }
        }
        for (j, list) in self.atom_coords.iter().enumerate() {
            for (k, &(t, phi)) in list.iter().enumerate() {
                ws.atom_table[j][k] = e(x[j] * t + x4 * phi);
            }
        }
        for (g, o) in self.groups.iter().zip(out.iter_mut()) {
            let mut total = ZERO;
            for p in &g.pieces {
                total += self.piece_value(p, ws);
            }
            for a in &g.atoms {
                let mut v = a.amp;
                for (j, &i) in a.idx.iter().enumerate() {
                    v *= ws.atom_table[j][i];
                }
                total += v;
            }
            *o = total;
        }
    }

    fn piece_value(&self, p: &PieceRef, ws: &mut Workspace) -> Complex64 {
        match &p.coeffs {
            PieceCoeffs::Constant { c } => p
                .slots
                .iter()
                .enumerate()
                .fold(*c, |acc, (j, &s)| acc * ws.integral[j][s]),
            PieceCoeffs::Separable { axes } => axes
                .iter()
                .zip(&p.slots)
                .enumerate()
                .map(|(j, (g, &s))| {
                    g.iter()
                        .zip(&ws.moments[j][s])
                        .map(|(gv, m)| gv * m)
                        .sum::<Complex64>()
                })
                .product(),
            PieceCoeffs::Nodal { values } => {
                // contract the last axis first, one axis at a time
                let q = self.q;
                ws.contract.clear();
                ws.contract.extend_from_slice(values);
                let mut len = values.len();
                for j in (0..self.d).rev() {
                    let m = &ws.moments[j][p.slots[j]];
                    len /= q;
                    for r in 0..len {
                        let row = &ws.contract[r * q..(r + 1) * q];
                        let v: Complex64 = row.iter().zip(m).map(|(a, b)| a * b).sum();
                        ws.contract[r] = v;
                    }
                }
                ws.contract[0]
            }
        }
    }

    /// Group values at every point of `pts`, as `[point][group]`.
    pub fn eval_all(&self, pts: &SpacePointSet) -> Vec<Vec<Complex64>> {
        let chunks: Vec<Vec<Vec<Complex64>>> = pts
            .chunk_ranges()
            .into_par_iter()
            .map(|range| {
                let mut ws = self.workspace();
                range
                    .map(|i| {
                        let mut out = vec![ZERO; self.groups.len()];
                        self.eval_into(pts.point(i), &mut ws, &mut out);
                        out
                    })
                    .collect()
            })
            .collect();
        chunks.into_iter().flatten().collect()
    }
}

fn check_coeff_shape(c: &PieceCoeffs, q: usize, d: usize) -> Result<(), OscilloError> {
    let ok = match c {
        PieceCoeffs::Constant { .. } => true,
        PieceCoeffs::Separable { axes } => axes.len() == d && axes.iter().all(|a| a.len() == q),
        PieceCoeffs::Nodal { values } => values.len() == q.pow(d as u32),
    };
    if ok {
        Ok(())
    } else {
        Err(OscilloError::Unsupported(format!(
            "coefficient layout does not match q = {q}, d = {d}"
        )))
    }
}

/// A box `Q` given as per-axis bounds.
pub fn box_of(cap: &Cap) -> Vec<[f64; 2]> {
    cap.bounds_f64()
}

/// `E_Q f` at every point of `pts`.
pub fn eval_extension(
    f: &FrequencyFunction,
    q_box: &[[f64; 2]],
    phase: &PhaseSpec,
    pts: &SpacePointSet,
) -> Result<Vec<Complex64>, OscilloError> {
    let d = phase.dim();
    if q_box.len() != d || f.dim() != d || pts.dim() != d + 1 {
        return Err(OscilloError::DimensionMismatch {
            expected: d,
            got: f.dim(),
        });
    }
    let inside = |lo: f64, hi: f64, j: usize| lo >= q_box[j][0] && hi <= q_box[j][1];
    match f {
        FrequencyFunction::PerCapGrid { q, pieces, .. } => {
            if *q < 2 {
                return Err(OscilloError::QuadratureOrderTooLow(*q));
            }
            for piece in pieces {
                if !piece.bounds.iter().enumerate().all(|(j, b)| inside(b[0], b[1], j)) {
                    return Err(OscilloError::SupportOutsideQ(format!("piece {:?}", piece.bounds)));
                }
            }
        }
        FrequencyFunction::Atomic { atoms, .. } => {
            for a in atoms {
                if !a.xi.iter().enumerate().all(|(j, &t)| inside(t, t, j)) {
                    return Err(OscilloError::SupportOutsideQ(format!("atom {:?}", a.xi)));
                }
            }
        }
    }
    let engine = FieldEngine::new(std::slice::from_ref(f), phase)?;
    Ok(engine.eval_all(pts).into_iter().map(|v| v[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caps::{cap_family, FamilyKind};
    use crate::oscillo::quad::gauss_legendre_on;

    #[test]
    fn constant_one_at_origin() {
        let fam = cap_family(16, 2, 3, FamilyKind::F4).unwrap();
        let f = FrequencyFunction::constant_per_cap(fam.caps(), &vec![Complex64::new(1.0, 0.0); fam.len()], 4);
        let pts = SpacePointSet::from_points(4, vec![0.0; 4], 1.0);
        let v = eval_extension(&f, &[[0.0, 1.0]; 3], &PhaseSpec::quartic(3), &pts).unwrap();
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn atom_has_constant_modulus() {
        let a = Complex64::new(0.3, -0.4);
        let f = FrequencyFunction::atomic(
            3,
            vec![Atom {
                xi: vec![0.2, 0.7, 0.9],
                amp: a,
            }],
        );
        let pts = SpacePointSet::monte_carlo_ball(&[0.0; 4], 256.0, 50, 1);
        let v = eval_extension(&f, &[[0.0, 1.0]; 3], &PhaseSpec::quartic(3), &pts).unwrap();
        assert!(v.iter().all(|z| (z.norm() - 0.5).abs() < 1e-14));
    }

    #[test]
    fn errors() {
        let fam = cap_family(16, 2, 1, FamilyKind::F4).unwrap();
        let f = FrequencyFunction::constant_per_cap(fam.caps(), &[Complex64::new(1.0, 0.0); 2], 1);
        let pts = SpacePointSet::from_points(2, vec![0.0; 2], 1.0);
        assert!(matches!(
            eval_extension(&f, &[[0.0, 1.0]], &PhaseSpec::quartic(1), &pts),
            Err(OscilloError::QuadratureOrderTooLow(1))
        ));
        let f = FrequencyFunction::constant_per_cap(fam.caps(), &[Complex64::new(1.0, 0.0); 2], 4);
        assert!(matches!(
            eval_extension(&f, &[[0.0, 0.5]], &PhaseSpec::quartic(1), &pts),
            Err(OscilloError::SupportOutsideQ(_))
        ));
    }

    #[test]
    fn nodal_separable_and_constant_agree() {
        // f(ξ) = cos(ξ₁)·e^{ξ₂} sampled three ways on one cap
        let fam = cap_family(256, 2, 2, FamilyKind::F4).unwrap();
        let caps = &fam.caps()[8..9];
        let g1 = |t: f64| Complex64::new(t.cos(), 0.0);
        let g2 = |t: f64| Complex64::new(t.exp(), 0.0);
        let sep = FrequencyFunction::separable_from_fns(caps, 12, &[&g1, &g2]);
        let nod = FrequencyFunction::nodal_from_fn(caps, 12, |xi| g1(xi[0]) * g2(xi[1]));
        let pts = SpacePointSet::monte_carlo_ball(&[0.0; 3], 256.0, 20, 9);
        let ph = PhaseSpec::quartic(2);
        let a = eval_extension(&sep, &[[0.0, 1.0]; 2], &ph, &pts).unwrap();
        let b = eval_extension(&nod, &[[0.0, 1.0]; 2], &ph, &pts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-13);
        }
        // plain tensor Gauss at a point where the integrand barely oscillates
        let bounds = caps[0].bounds_f64();
        let x = [0.5, -0.25, 0.75];
        let pts = SpacePointSet::from_points(3, x.to_vec(), 1.0);
        let v = eval_extension(&nod, &[[0.0, 1.0]; 2], &ph, &pts).unwrap()[0];
        let (n1, w1) = gauss_legendre_on(30, bounds[0][0], bounds[0][1]);
        let (n2, w2) = gauss_legendre_on(30, bounds[1][0], bounds[1][1]);
        let mut want = ZERO;
        for (a, wa) in n1.iter().zip(&w1) {
            for (b, wb) in n2.iter().zip(&w2) {
                want += g1(*a) * g2(*b) * e(x[0] * a + x[1] * b + x[2] * (a.powi(4) + b.powi(4))) * wa * wb;
            }
        }
        assert!((v - want).norm() < 1e-13);
    }
}
