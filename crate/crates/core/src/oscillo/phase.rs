//! Separable polynomial phases `φ(ξ) = Σ_j φ_j(ξ_j)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    /// `coeffs[j][i]` multiplies `ξ_j^i`.
    pub coeffs: Vec<Vec<f64>>,
}

impl PhaseSpec {
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        PhaseSpec { coeffs }
    }

    /// `φ_j(ξ) = ξ^power` on every axis.
    pub fn pure_power(d: usize, power: u32) -> Self {
        let mut c = vec![0.0; power as usize + 1];
        c[power as usize] = 1.0;
        PhaseSpec {
            coeffs: vec![c; d],
        }
    }

    pub fn quartic(d: usize) -> Self {
        Self::pure_power(d, 4)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn axis(&self, j: usize) -> &[f64] {
        &self.coeffs[j]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.coeffs[j]
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    pub fn eval_axis(&self, j: usize, t: f64) -> f64 {
        horner(&self.coeffs[j], t)
    }

    /// `φ_j^{(order)}(t)`.
    pub fn deriv_axis(&self, j: usize, order: usize, t: f64) -> f64 {
        horner(&derivative(&self.coeffs[j], order), t)
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        xi.iter().enumerate().map(|(j, &t)| self.eval_axis(j, t)).sum()
    }

    /// An upper bound for `max |φ_j''|` on `[a, b]`.
    pub fn second_derivative_bound(&self, j: usize, a: f64, b: f64) -> f64 {
        let m = a.abs().max(b.abs());
        derivative(&self.coeffs[j], 2)
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * m.powi(i as i32))
            .sum()
    }
}

pub fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci)
}

pub fn derivative(c: &[f64], order: usize) -> Vec<f64> {
    let mut out = c.to_vec();
    for _ in 0..order {
        if out.len() <= 1 {
            return vec![0.0];
        }
        out = out
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &ci)| ci * i as f64)
            .collect();
    }
    out
}
