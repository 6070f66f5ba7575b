//! Test inputs `f`: per-cap polynomial data or finite atomic measures.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::quad::{gauss_legendre_on, lagrange_basis};
use super::OscilloError;
use crate::caps::{Cap, CapFamily};

/// Amplitude of `f` on one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PieceCoeffs {
    /// `f ≡ c`
    Constant { c: Complex64 },
    /// `f(ξ) = Π_j g_j(ξ_j)`, each `g_j` given by its values at the `q`
    /// Gauss nodes of axis `j`.
    Separable { axes: Vec<Vec<Complex64>> },
    /// Values at the `q^d` tensor Gauss nodes, row-major over axes.
    Nodal { values: Vec<Complex64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub bounds: Vec<[f64; 2]>,
    pub coeffs: PieceCoeffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub xi: Vec<f64>,
    pub amp: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencyFunction {
    PerCapGrid {
        d: usize,
        q: usize,
        pieces: Vec<Piece>,
        #[serde(default)]
        provenance: Option<String>,
    },
    Atomic {
        d: usize,
        atoms: Vec<Atom>,
        #[serde(default)]
        provenance: Option<String>,
    },
}

impl FrequencyFunction {
    pub fn dim(&self) -> usize {
        match self {
            FrequencyFunction::PerCapGrid { d, .. } | FrequencyFunction::Atomic { d, .. } => *d,
        }
    }

    pub fn with_provenance(mut self, text: impl Into<String>) -> Self {
        match &mut self {
            FrequencyFunction::PerCapGrid { provenance, .. }
            | FrequencyFunction::Atomic { provenance, .. } => *provenance = Some(text.into()),
        }
        self
    }

    /// `f ≡ c_θ` on each cap.
    pub fn constant_per_cap(caps: &[Cap], coeffs: &[Complex64], q: usize) -> Self {
        assert_eq!(caps.len(), coeffs.len());
        let d = caps.first().map_or(0, Cap::dim);
        FrequencyFunction::PerCapGrid {
            d,
            q,
            pieces: caps
                .iter()
                .zip(coeffs)
                .filter(|(_, c)| c.norm_sqr() > 0.0)
                .map(|(cap, &c)| Piece {
                    bounds: cap.bounds_f64(),
                    coeffs: PieceCoeffs::Constant { c },
                })
                .collect(),
            provenance: None,
        }
    }

    /// Sample `g` at the tensor nodes of every cap.
    pub fn nodal_from_fn(caps: &[Cap], q: usize, g: impl Fn(&[f64]) -> Complex64) -> Self {
        let d = caps.first().map_or(0, Cap::dim);
        let pieces = caps
            .iter()
            .map(|cap| {
                let values = super::quad::quadrature_nodes(cap, q)
                    .iter()
                    .map(|n| g(&n.xi))
                    .collect();
                Piece {
                    bounds: cap.bounds_f64(),
                    coeffs: PieceCoeffs::Nodal { values },
                }
            })
            .collect();
        FrequencyFunction::PerCapGrid {
            d,
            q,
            pieces,
            provenance: None,
        }
    }

    /// Sample per-axis factors `g_j` at the Gauss nodes of every cap.
    pub fn separable_from_fns(caps: &[Cap], q: usize, g: &[&dyn Fn(f64) -> Complex64]) -> Self {
        let d = caps.first().map_or(0, Cap::dim);
        assert_eq!(g.len(), d);
        let pieces = caps
            .iter()
            .map(|cap| {
                let axes = cap
                    .bounds_f64()
                    .iter()
                    .zip(g)
                    .map(|(&[a, b], gj)| gauss_legendre_on(q, a, b).0.iter().map(|&t| gj(t)).collect())
                    .collect();
                Piece {
                    bounds: cap.bounds_f64(),
                    coeffs: PieceCoeffs::Separable { axes },
                }
            })
            .collect();
        FrequencyFunction::PerCapGrid {
            d,
            q,
            pieces,
            provenance: None,
        }
    }

    pub fn atomic(d: usize, atoms: Vec<Atom>) -> Self {
        FrequencyFunction::Atomic {
            d,
            atoms,
            provenance: None,
        }
    }

    /// Pointwise value of the represented function (interpolated inside
    /// pieces; atoms have no pointwise value and give an error).
    pub fn value_at(&self, xi: &[f64]) -> Result<Complex64, OscilloError> {
        let FrequencyFunction::PerCapGrid { q, pieces, .. } = self else {
            return Err(OscilloError::Unsupported("pointwise value of an atomic measure".into()));
        };
        let mut total = Complex64::new(0.0, 0.0);
        for piece in pieces {
            let inside = piece
                .bounds
                .iter()
                .zip(xi)
                .all(|(&[a, b], &t)| t >= a && t < b);
            if !inside {
                continue;
            }
            let basis: Vec<Vec<f64>> = piece
                .bounds
                .iter()
                .zip(xi)
                .map(|(&[a, b], &t)| lagrange_basis(&gauss_legendre_on(*q, a, b).0, t))
                .collect();
            total += match &piece.coeffs {
                PieceCoeffs::Constant { c } => *c,
                PieceCoeffs::Separable { axes } => axes
                    .iter()
                    .zip(&basis)
                    .map(|(g, l)| g.iter().zip(l).map(|(v, li)| v * li).sum::<Complex64>())
                    .product(),
                PieceCoeffs::Nodal { values } => {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for (flat, v) in values.iter().enumerate() {
                        let mut rem = flat;
                        let mut w = 1.0;
                        for l in basis.iter().rev() {
                            w *= l[rem % q];
                            rem /= q;
                        }
                        sum += v * w;
                    }
                    sum
                }
            };
        }
        Ok(total)
    }

    /// Keep only the part of `f` inside `cap` (pieces must not straddle it).
    pub fn restrict(&self, cap: &Cap) -> Result<Self, OscilloError> {
        let b = cap.bounds_f64();
        Ok(match self {
            FrequencyFunction::PerCapGrid { d, q, pieces, provenance } => {
                let mut kept = Vec::new();
                for piece in pieces {
                    let inside = piece.bounds.iter().zip(&b).all(|(p, c)| p[0] >= c[0] && p[1] <= c[1]);
                    let disjoint = piece.bounds.iter().zip(&b).any(|(p, c)| p[1] <= c[0] || p[0] >= c[1]);
                    if inside {
                        kept.push(piece.clone());
                    } else if !disjoint {
                        return Err(OscilloError::SupportOutsideQ(
                            "piece straddles the restriction box".into(),
                        ));
                    }
                }
                FrequencyFunction::PerCapGrid {
                    d: *d,
                    q: *q,
                    pieces: kept,
                    provenance: provenance.clone(),
                }
            }
            FrequencyFunction::Atomic { d, atoms, provenance } => FrequencyFunction::Atomic {
                d: *d,
                atoms: atoms.iter().filter(|a| cap.contains_point(&a.xi)).cloned().collect(),
                provenance: provenance.clone(),
            },
        })
    }

    /// Split into one function per family cap (caps carrying no mass are
    /// omitted); returns `(cap index, restricted f)`.
    pub fn split_by_family(&self, family: &CapFamily) -> Result<Vec<(usize, Self)>, OscilloError> {
        let n = family.len();
        match self {
            FrequencyFunction::Atomic { d, atoms, provenance } => {
                let mut groups: Vec<Vec<Atom>> = vec![Vec::new(); n];
                for atom in atoms {
                    let id = family
                        .locate(&atom.xi)
                        .map_err(|e| OscilloError::SupportOutsideQ(e.to_string()))?;
                    groups[id.0].push(atom.clone());
                }
                Ok(groups
                    .into_iter()
                    .enumerate()
                    .filter(|(_, g)| !g.is_empty())
                    .map(|(i, atoms)| {
                        (
                            i,
                            FrequencyFunction::Atomic {
                                d: *d,
                                atoms,
                                provenance: provenance.clone(),
                            },
                        )
                    })
                    .collect())
            }
            FrequencyFunction::PerCapGrid { d, q, pieces, provenance } => {
                let mut groups: Vec<Vec<Piece>> = vec![Vec::new(); n];
                for piece in pieces {
                    let center: Vec<f64> = piece.bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect();
                    let id = family
                        .locate(&center)
                        .map_err(|e| OscilloError::SupportOutsideQ(e.to_string()))?;
                    let cap = family.cap(id).bounds_f64();
                    let inside = piece.bounds.iter().zip(&cap).all(|(p, c)| p[0] >= c[0] && p[1] <= c[1]);
                    if !inside {
                        return Err(OscilloError::SupportOutsideQ(
                            "piece straddles a family cap".into(),
                        ));
                    }
                    groups[id.0].push(piece.clone());
                }
                Ok(groups
                    .into_iter()
                    .enumerate()
                    .filter(|(_, g)| !g.is_empty())
                    .map(|(i, pieces)| {
                        (
                            i,
                            FrequencyFunction::PerCapGrid {
                                d: *d,
                                q: *q,
                                pieces,
                                provenance: provenance.clone(),
                            },
                        )
                    })
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caps::{cap_family, FamilyKind};

    #[test]
    fn nodal_interpolation_reproduces_polynomials() {
        let fam = cap_family(256, 2, 2, FamilyKind::F4).unwrap();
        let g = |xi: &[f64]| Complex64::new(xi[0].powi(3) * xi[1], xi[1].powi(2));
        let f = FrequencyFunction::nodal_from_fn(fam.caps(), 5, g);
        for xi in [[0.1, 0.7], [0.55, 0.95], [0.9, 0.3]] {
            let v = f.value_at(&xi).unwrap();
            assert!((v - g(&xi)).norm() < 1e-13);
        }
    }

    #[test]
    fn json_round_trip() {
        let fam = cap_family(16, 2, 2, FamilyKind::F4).unwrap();
        let coeffs: Vec<Complex64> = (0..fam.len()).map(|i| Complex64::from_polar(1.0, i as f64)).collect();
        let f = FrequencyFunction::constant_per_cap(fam.caps(), &coeffs, 4).with_provenance("seed=3");
        let back: FrequencyFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        let a = FrequencyFunction::atomic(
            2,
            vec![Atom {
                xi: vec![0.25, 0.5],
                amp: Complex64::new(0.5, -1.0),
            }],
        );
        let back: FrequencyFunction = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn split_groups_atoms_by_cap() {
        let fam = cap_family(16, 2, 1, FamilyKind::F4).unwrap();
        let atoms = [0.0, 0.25, 0.5, 0.75]
            .iter()
            .map(|&x| Atom {
                xi: vec![x],
                amp: Complex64::new(1.0, 0.0),
            })
            .collect();
        let parts = FrequencyFunction::atomic(1, atoms).split_by_family(&fam).unwrap();
        assert_eq!(parts.len(), 2);
        for (_, p) in &parts {
            let FrequencyFunction::Atomic { atoms, .. } = p else { panic!() };
            assert_eq!(atoms.len(), 2);
        }
    }
}
