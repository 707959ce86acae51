//! Gauss–Hermite quadrature.
//!
//! Nodes and weights for the weight function e^{-x^2}, computed by Newton
//! iteration on the orthonormal Hermite recurrence. A rule of order q
//! integrates polynomials up to degree 2q-1 exactly, which makes it the
//! natural tool for Gaussian expectations of smooth integrands.

use crate::error::{Error, Result};

const PI_POW_MINUS_QUARTER: f64 = 0.751_125_544_464_942_5;

/// Nodes (symmetric about 0) and positive weights summing to sqrt(pi).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::config(format!(
                "quadrature order must be at least 2, got {order}"
            )));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0f64;
        let mut z_prev = 0.0f64;
        let mut z_prev2 = 0.0f64;
        for i in 0..(n + 1) / 2 {
            // initial guesses for the i-th largest root (Numerical Recipes)
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * z_prev2,
                3 => 1.91 * z - 0.91 * z_prev2,
                _ => 2.0 * z - z_prev2,
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                // evaluate the orthonormal Hermite polynomial and derivative at z
                let mut p1 = PI_POW_MINUS_QUARTER;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            z_prev2 = z_prev;
            z_prev = z;
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            let w = 2.0 / (pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        // nodes in increasing order
        nodes.reverse();
        weights.reverse();
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[f(mu + sigma Z)] for Z standard normal.
    #[inline]
    pub fn gaussian_expectation(&self, mu: f64, sigma: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;
        let scale = std::f64::consts::SQRT_2 * sigma;
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mu + scale * x);
        }
        acc * INV_SQRT_PI
    }
}
