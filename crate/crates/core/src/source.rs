//! Gaussian source wavelet and its discrete point-source representation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::Layout;

/// `g(t) = exp(−(t − t0)² / (2σ0²)) / (σ0 √(2π))`, unit integral over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWavelet {
    pub t0: f64,
    pub sigma0: f64,
}

impl GaussianWavelet {
    pub fn new(t0: f64, sigma0: f64) -> Self {
        Self { t0, sigma0 }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    /// `k`-th time derivative, via probabilists' Hermite polynomials:
    /// `g⁽ᵏ⁾(t) = (−1/σ0)ᵏ Heₖ(τ) g(t)` with `τ = (t − t0)/σ0`.
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        let tau = (t - self.t0) / self.sigma0;
        let g = (-0.5 * tau * tau).exp() / (self.sigma0 * (2.0 * std::f64::consts::PI).sqrt());
        let (mut he_prev, mut he) = (0.0, 1.0);
        for n in 0..k {
            let next = tau * he - n as f64 * he_prev;
            he_prev = he;
            he = next;
        }
        (-1.0 / self.sigma0).powi(k as i32) * he * g
    }
}

/// Point source `amplitude · δ(x − x0) g(t)` added to the pressure rate `dp/dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSourceSpec {
    pub location: Vec<f64>,
    pub wavelet: GaussianWavelet,
    pub amplitude: f64,
}

/// A [`PointSourceSpec`] resolved onto the nodes of its owning element.
#[derive(Debug, Clone)]
pub struct PointSource {
    pub spec: PointSourceSpec,
    pub element: usize,
    /// Discrete delta: `L_i(ξ0) L_j(η0) L_k(θ0) / (h_i h_j h_k J)` at each local node.
    pub delta: Vec<f64>,
}

impl PointSource {
    pub fn new(layout: &Layout, spec: PointSourceSpec) -> Result<Self> {
        let (element, reference) = layout.mesh().locate(&spec.location, true)?;
        if reference.iter().any(|r| r.abs() >= 1.0) {
            return Err(Error::config("source lies on an element boundary"));
        }
        let dim = layout.dim();
        let basis: Vec<Vec<f64>> = reference
            .iter()
            .map(|&r| layout.ops(crate::mesh::Axis::X).basis_at(r))
            .collect();
        let jac = layout.jacobian(element);
        let delta = (0..layout.nodes_per_element())
            .map(|node| {
                let idx = layout.node_index(node);
                let l: f64 = (0..dim).map(|a| basis[a][idx[a]]).product();
                l / (layout.node_weight(node) * jac)
            })
            .collect();
        Ok(Self {
            spec,
            element,
            delta,
        })
    }

    /// Coefficient multiplying [`PointSource::delta`] in the `k`-th time derivative of the forcing.
    pub fn time_factor(&self, k: usize, t: f64) -> f64 {
        self.spec.amplitude * self.spec.wavelet.derivative(k, t)
    }
}
