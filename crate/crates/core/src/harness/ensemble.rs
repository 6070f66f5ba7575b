use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::caps::CapFamily;
use crate::oscillo::{e, Atom, FrequencyFunction};

/// A reproducible test input `f`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ensemble {
    /// Indicator of one cap (`None`: the middle cap of the family).
    SingleCap { cap: Option<usize> },
    ConstantOne,
    /// Unit-modulus random constant on every cap.
    RandomPhasePerCap { seed: u64 },
    /// `n` lattice atoms per axis with unit amplitudes and random phases.
    AtomicLattice { n: usize, seed: u64 },
}

impl Ensemble {
    pub fn label(&self) -> String {
        match self {
            Ensemble::SingleCap { cap: None } => "single".into(),
            Ensemble::SingleCap { cap: Some(c) } => format!("single[{c}]"),
            Ensemble::ConstantOne => "one".into(),
            Ensemble::RandomPhasePerCap { seed } => format!("random_phase(seed={seed})"),
            Ensemble::AtomicLattice { n, seed } => format!("lattice(n={n},seed={seed})"),
        }
    }

    /// The same ensemble drawn with another seed (seedless kinds unchanged).
    pub fn reseeded(&self, seed: u64) -> Self {
        match *self {
            Ensemble::RandomPhasePerCap { .. } => Ensemble::RandomPhasePerCap { seed },
            Ensemble::AtomicLattice { n, .. } => Ensemble::AtomicLattice { n, seed },
            ref other => other.clone(),
        }
    }

    /// Label with the seed removed, used to group records across seeds.
    pub fn family_label(&self) -> String {
        match self {
            Ensemble::RandomPhasePerCap { .. } => "random_phase".into(),
            Ensemble::AtomicLattice { n, .. } => format!("lattice(n={n})"),
            other => other.label(),
        }
    }

    /// Parse `single`, `single[3]`, `one`, `random_phase`, `lattice(n=8)`.
    pub fn parse(text: &str, seed: u64) -> Result<Self, HarnessError> {
        let t = text.trim().to_ascii_lowercase().replace(' ', "");
        let bad = || HarnessError::Config(format!("unknown ensemble '{text}'"));
        if t == "single" || t == "single_cap" {
            return Ok(Ensemble::SingleCap { cap: None });
        }
        if let Some(rest) = t.strip_prefix("single[").and_then(|r| r.strip_suffix(']')) {
            return Ok(Ensemble::SingleCap {
                cap: Some(rest.parse().map_err(|_| bad())?),
            });
        }
        if t == "one" || t == "constant_one" || t == "constant" {
            return Ok(Ensemble::ConstantOne);
        }
        if t.starts_with("random_phase") || t == "random" {
            return Ok(Ensemble::RandomPhasePerCap { seed });
        }
        if let Some(rest) = t.strip_prefix("lattice") {
            let inner = rest.trim_start_matches('(').trim_end_matches(')');
            let mut n = 4;
            for part in inner.split(',').filter(|p| !p.is_empty()) {
                match part.split_once('=') {
                    Some(("n", v)) => n = v.parse().map_err(|_| bad())?,
                    Some(("seed", _)) => {}
                    _ => return Err(bad()),
                }
            }
            if n == 0 {
                return Err(bad());
            }
            return Ok(Ensemble::AtomicLattice { n, seed });
        }
        Err(bad())
    }

    fn phases(seed: u64, count: usize) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| e(rng.random::<f64>())).collect()
    }

    pub fn build(&self, family: &CapFamily) -> Result<FrequencyFunction, HarnessError> {
        let caps = family.caps();
        if caps.is_empty() {
            return Err(HarnessError::EmptyEnsemble);
        }
        let one = Complex64::new(1.0, 0.0);
        let f = match *self {
            Ensemble::SingleCap { cap } => {
                let idx = cap.unwrap_or(caps.len() / 2);
                if idx >= caps.len() {
                    return Err(HarnessError::Config(format!(
                        "cap {idx} out of range for {} caps",
                        caps.len()
                    )));
                }
                let mut c = vec![Complex64::new(0.0, 0.0); caps.len()];
                c[idx] = one;
                FrequencyFunction::constant_per_cap(caps, &c, 4)
            }
            Ensemble::ConstantOne => FrequencyFunction::constant_per_cap(caps, &vec![one; caps.len()], 4),
            Ensemble::RandomPhasePerCap { seed } => {
                FrequencyFunction::constant_per_cap(caps, &Self::phases(seed, caps.len()), 4)
            }
            Ensemble::AtomicLattice { n, seed } => {
                let d = family.dim();
                let lo: Vec<f64> = (0..d).map(|j| family.axis_intervals(j)[0].lo.to_f64()).collect();
                let hi: Vec<f64> = (0..d)
                    .map(|j| family.axis_intervals(j).last().expect("nonempty axis").hi.to_f64())
                    .collect();
                let total = n.pow(d as u32);
                let phases = Self::phases(seed, total);
                let atoms = (0..total)
                    .map(|flat| {
                        let mut rem = flat;
                        let mut xi = vec![0.0; d];
                        for j in (0..d).rev() {
                            let a = rem % n;
                            rem /= n;
                            xi[j] = lo[j] + (hi[j] - lo[j]) * a as f64 / n as f64;
                        }
                        Atom {
                            xi,
                            amp: phases[flat],
                        }
                    })
                    .collect();
                FrequencyFunction::atomic(d, atoms)
            }
        };
        Ok(f.with_provenance(self.label()))
    }
}
