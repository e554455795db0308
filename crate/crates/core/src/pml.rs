//! Damping profiles and parameters of the perfectly matched layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::mesh::{Axis, Mesh};

/// Value substituted for an error-model tolerance that reaches 1 on very coarse meshes.
pub const TOL_CLAMP: f64 = 0.99;

/// How the cubic profile is sampled onto the element nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DampingMode {
    /// Profile collocated at every quadrature node.
    #[default]
    Nodal,
    /// One value per element, the profile evaluated at the element centroid.
    ElementConstant,
}

/// Layer geometry, strength and stabilization weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmlConfig {
    /// Layer width δ (km).
    pub width: f64,
    /// Damping strength d0 (1/s).
    pub d0: f64,
    /// Layers present at both ends of each axis.
    pub active: [bool; 3],
    /// Stabilizing weight on the σ penalty.
    pub omega_y: f64,
    /// Stabilizing weight on the ψ penalty.
    pub omega_z: f64,
    pub mode: DampingMode,
    /// Permits `ω ≠ 1`, which has no stability guarantee.
    pub allow_unstable: bool,
}

impl PmlConfig {
    /// No layers at all.
    pub fn none() -> Self {
        Self {
            width: 0.0,
            d0: 0.0,
            active: [false; 3],
            omega_y: 1.0,
            omega_z: 1.0,
            mode: DampingMode::Nodal,
            allow_unstable: false,
        }
    }

    pub fn is_active(&self) -> bool {
        self.active.iter().any(|&a| a) && self.d0 > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("omega_y", self.omega_y), ("omega_z", self.omega_z)] {
            if w != 0.0 && w != 1.0 {
                return Err(Error::config(format!("{name} must be 0 or 1, got {w}")));
            }
            if w != 1.0 && !self.allow_unstable {
                return Err(Error::config(format!(
                    "{name} = {w} requires allow_unstable (no stability guarantee)"
                )));
            }
        }
        if !(self.d0 >= 0.0) || !self.d0.is_finite() {
            return Err(Error::config(format!("pml d0 = {} must be >= 0", self.d0)));
        }
        if self.active.iter().any(|&a| a) && !(self.width > 0.0) {
            return Err(Error::config(format!(
                "pml width = {} must be > 0 when a layer is active",
                self.width
            )));
        }
        Ok(())
    }
}

impl Default for PmlConfig {
    fn default() -> Self {
        Self::none()
    }
}

/// `d0 · (dist / δ)³` where `dist` is how far `x` lies outside `[interior.0, interior.1]`.
pub fn cubic_profile(x: f64, interior: (f64, f64), delta: f64, d0: f64) -> f64 {
    let dist = if x < interior.0 {
        interior.0 - x
    } else if x > interior.1 {
        x - interior.1
    } else {
        return 0.0;
    };
    d0 * (dist / delta).powi(3)
}

/// Damping strength giving a relative reflection `tol` for a layer of width `delta`.
pub fn compute_d0(c: f64, delta: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::config(format!("pml tolerance {tol} must lie in (0, 1)")));
    }
    if !(c > 0.0) || !(delta > 0.0) {
        return Err(Error::config("wave speed and pml width must be positive"));
    }
    Ok(4.0 * c / (2.0 * delta) * (1.0 / tol).ln())
}

/// Error-model tolerance `C0 [ Δx / (δ (P + 1)) ]^(P + 1)`.
pub fn compute_tol(c0: f64, delta: f64, dx: f64, degree: usize) -> f64 {
    let np = degree as f64 + 1.0;
    c0 * (dx / (delta * np)).powf(np)
}

/// [`compute_tol`] clamped below 1 so that `ln(1/tol) > 0`.
pub fn compute_tol_clamped(c0: f64, delta: f64, dx: f64, degree: usize) -> f64 {
    compute_tol(c0, delta, dx, degree).min(TOL_CLAMP)
}

/// Nodal damping coefficients `d_x, d_y, d_z` over every element node.
#[derive(Debug, Clone)]
pub struct DampingField {
    /// One array per axis, laid out like a solver field; `None` where identically zero.
    pub d: [Option<Vec<f64>>; 3],
}

impl DampingField {
    pub fn zero() -> Self {
        Self { d: [None, None, None] }
    }

    pub fn axis(&self, a: usize) -> Option<&[f64]> {
        self.d[a].as_deref()
    }

    pub fn value(&self, a: usize, i: usize) -> f64 {
        self.d[a].as_ref().map_or(0.0, |d| d[i])
    }

    pub fn is_zero(&self) -> bool {
        self.d.iter().all(|d| d.as_ref().is_none_or(|v| v.iter().all(|&x| x == 0.0)))
    }
}

/// Interior (undamped) interval along `axis` for a mesh with layers of `width`.
pub fn interior_extent(mesh: &Mesh, axis: Axis, width: f64) -> Result<(f64, f64)> {
    let (lo, hi) = mesh.bounds(axis);
    let interior = (lo + width, hi - width);
    if !(interior.1 > interior.0) {
        return Err(Error::config(format!(
            "pml width {width} leaves no interior along {} (extent {})",
            axis.name(),
            hi - lo
        )));
    }
    Ok(interior)
}

/// Sample the damping profile at every node of `layout`.
pub fn sample_damping(layout: &Layout, config: &PmlConfig) -> Result<DampingField> {
    config.validate()?;
    let mesh = layout.mesh();
    let mut field = DampingField::zero();
    if config.d0 == 0.0 {
        return Ok(field);
    }
    for a in 0..mesh.dim() {
        if !config.active[a] {
            continue;
        }
        let axis = Axis::from_index(a);
        let interior = interior_extent(mesh, axis, config.width)?;
        let mut values = vec![0.0; layout.field_len()];
        let np = layout.np();
        for e in 0..mesh.num_elements() {
            let lmn = mesh.element_coords(e);
            let (x0, x1) = (mesh.edges(axis)[lmn[a]], mesh.edges(axis)[lmn[a] + 1]);
            let centroid = cubic_profile(0.5 * (x0 + x1), interior, config.width, config.d0);
            for node in 0..layout.nodes_per_element() {
                let idx = layout.node_index(node)[a];
                debug_assert!(idx < np);
                values[e * layout.nodes_per_element() + node] = match config.mode {
                    DampingMode::Nodal => {
                        let xi = layout.ops(axis).nodes[idx];
                        let x = x0 + 0.5 * (x1 - x0) * (1.0 + xi);
                        cubic_profile(x, interior, config.width, config.d0)
                    }
                    DampingMode::ElementConstant => centroid,
                };
            }
        }
        field.d[a] = Some(values);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadKind;
    use approx::assert_abs_diff_eq;

    #[test]
    fn profile_examples() {
        let i = (-50.0, 50.0);
        assert_eq!(cubic_profile(25.0, i, 10.0, 8.0), 0.0);
        assert_abs_diff_eq!(cubic_profile(55.0, i, 10.0, 8.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cubic_profile(60.0, i, 10.0, 8.0), 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cubic_profile(-60.0, i, 10.0, 8.0), 8.0, epsilon = 1e-14);
        // continuous at the interface from both sides
        assert_eq!(cubic_profile(50.0, i, 10.0, 8.0), 0.0);
        assert!(cubic_profile(50.0 + 1e-9, i, 10.0, 8.0) < 1e-20);
    }

    #[test]
    fn d0_examples() {
        // 4c/(2δ) = 0.2968, times ln(10⁴)
        let expected = 0.2968 * (1e4f64).ln();
        assert_abs_diff_eq!(compute_d0(1.484, 10.0, 1e-4).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 2.7336, epsilon = 1e-4);
        assert_abs_diff_eq!(compute_d0(1.0, 2.0, (-1.0f64).exp()).unwrap(), 1.0, epsilon = 1e-14);
        let d = compute_d0(1.484, 0.55, 1e-3).unwrap();
        assert_abs_diff_eq!(d, 4.0 * 1.484 / 1.1 * (1e3f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(d, 37.277, epsilon = 1e-3);
        assert!(compute_d0(1.0, 1.0, 1.0).is_err());
        assert!(compute_d0(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn tol_examples() {
        assert_abs_diff_eq!(compute_tol(10.0, 10.0, 5.0, 4), 1e-4, epsilon = 1e-17);
        assert_abs_diff_eq!(compute_tol(10.0, 10.0, 10.0, 4), 3.2e-3, epsilon = 1e-16);
        assert_abs_diff_eq!(compute_tol(1.0, 1.0, 5.0, 4), 1.0, epsilon = 1e-15);
        assert_eq!(compute_tol_clamped(1.0, 1.0, 50.0, 4), TOL_CLAMP);
    }

    #[test]
    fn tol_scaling() {
        for p in 1..=8 {
            let a = compute_tol(10.0, 10.0, 5.0, p);
            let b = compute_tol(10.0, 10.0, 2.5, p);
            let ratio = a / b;
            assert_abs_diff_eq!(ratio, 2f64.powi(p as i32 + 1), epsilon = 1e-9 * ratio);
            assert!(compute_tol(10.0, 20.0, 5.0, p) < a);
            for dx in [10.0, 5.0, 2.5, 1.25] {
                let d0 = compute_d0(1.484, 10.0, compute_tol_clamped(10.0, 10.0, dx, p)).unwrap();
                assert!(d0.is_finite() && d0 > 0.0);
            }
        }
    }

    fn strip_layout() -> Layout {
        let mesh = Mesh::uniform(&[(-60.0, 60.0), (0.0, 50.0)], &[10.0, 10.0]).unwrap();
        Layout::new(mesh, QuadKind::Gll, 4).unwrap()
    }

    #[test]
    fn strip_and_whole_space_sampling() {
        let layout = strip_layout();
        let mut cfg = PmlConfig {
            width: 10.0,
            d0: 8.0,
            active: [true, false, false],
            ..PmlConfig::none()
        };
        let f = sample_damping(&layout, &cfg).unwrap();
        assert!(f.axis(1).is_none());
        let dx = f.axis(0).unwrap();
        for (i, &d) in dx.iter().enumerate() {
            let x = layout.node_coords(i)[0];
            assert!(d >= 0.0);
            if x.abs() <= 50.0 {
                assert_eq!(d, 0.0);
            } else {
                assert!(d > 0.0);
                assert_abs_diff_eq!(d, cubic_profile(x, (-50.0, 50.0), 10.0, 8.0), epsilon = 1e-14);
            }
        }

        let mesh = Mesh::uniform(&[(-60.0, 60.0), (-10.0, 60.0)], &[5.0, 5.0]).unwrap();
        let layout = Layout::new(mesh, QuadKind::Gl, 4).unwrap();
        cfg.active = [true, true, false];
        cfg.mode = DampingMode::ElementConstant;
        let f = sample_damping(&layout, &cfg).unwrap();
        // corner element (0, 0) has both profiles active
        let npe = layout.nodes_per_element();
        assert!(f.value(0, 0) > 0.0 && f.value(1, 0) > 0.0);
        assert_eq!(f.value(0, npe - 1), f.value(0, 0));
        assert_abs_diff_eq!(f.value(0, 0), 8.0 * 0.75f64.powi(3), epsilon = 1e-14);
    }

    #[test]
    fn no_pml_and_bad_width() {
        let layout = strip_layout();
        let f = sample_damping(&layout, &PmlConfig::none()).unwrap();
        assert!(f.is_zero());
        let cfg = PmlConfig {
            width: 60.0,
            d0: 1.0,
            active: [true, false, false],
            ..PmlConfig::none()
        };
        assert!(matches!(sample_damping(&layout, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn omega_validation() {
        let mut cfg = PmlConfig::none();
        cfg.omega_y = 0.0;
        assert!(cfg.validate().is_err());
        cfg.allow_unstable = true;
        assert!(cfg.validate().is_ok());
        cfg.omega_y = 0.5;
        assert!(cfg.validate().is_err());
    }
}
