//! Structured Cartesian meshes and element-wise material fields.

use crate::error::{Error, Result};

/// Coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }

    pub fn name(self) -> &'static str {
        ["x", "y", "z"][self as usize]
    }
}

/// Tensor-product mesh of `L × M (× N)` elements.
///
/// In 2D the z direction is absent: `counts[2] == 1` and no z edges are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    edges: [Vec<f64>; 3],
}

impl Mesh {
    /// Build a mesh from explicit element edges, one strictly increasing array per axis.
    pub fn from_edges(edges: Vec<Vec<f64>>) -> Result<Self> {
        let dim = edges.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::config(format!("mesh dimension {dim} not in {{2, 3}}")));
        }
        for (a, e) in edges.iter().enumerate() {
            if e.len() < 2 {
                return Err(Error::config(format!(
                    "axis {} needs at least one element",
                    Axis::from_index(a).name()
                )));
            }
            if e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::config(format!(
                    "edges along axis {} are not strictly increasing",
                    Axis::from_index(a).name()
                )));
            }
        }
        let mut it = edges.into_iter();
        let ex = it.next().unwrap_or_default();
        let ey = it.next().unwrap_or_default();
        let ez = it.next().unwrap_or_default();
        Ok(Self {
            dim,
            edges: [ex, ey, ez],
        })
    }

    /// Uniform mesh of `bounds[a] = (lo, hi)` with element size `spacing[a]`.
    pub fn uniform(bounds: &[(f64, f64)], spacing: &[f64]) -> Result<Self> {
        if bounds.len() != spacing.len() {
            return Err(Error::config("bounds and spacing have different lengths"));
        }
        let mut edges = Vec::with_capacity(bounds.len());
        for (a, (&(lo, hi), &h)) in bounds.iter().zip(spacing).enumerate() {
            let name = Axis::from_index(a).name();
            if !(hi > lo) || !(h > 0.0) {
                return Err(Error::config(format!(
                    "invalid extent [{lo}, {hi}] or spacing {h} along {name}"
                )));
            }
            let ratio = (hi - lo) / h;
            let count = ratio.round();
            if count < 1.0 || (ratio - count).abs() > 1e-12 * ratio.max(1.0) {
                return Err(Error::config(format!(
                    "spacing {h} does not divide the {name} extent {}",
                    hi - lo
                )));
            }
            let count = count as usize;
            let e: Vec<f64> = (0..=count)
                .map(|i| {
                    if i == count {
                        hi
                    } else {
                        lo + i as f64 * (hi - lo) / count as f64
                    }
                })
                .collect();
            edges.push(e);
        }
        Self::from_edges(edges)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Element counts `[L, M, N]`, with `N = 1` in 2D.
    pub fn counts(&self) -> [usize; 3] {
        let c = |a: usize| {
            if a < self.dim {
                self.edges[a].len() - 1
            } else {
                1
            }
        };
        [c(0), c(1), c(2)]
    }

    pub fn num_elements(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn edges(&self, axis: Axis) -> &[f64] {
        &self.edges[axis.index()]
    }

    /// Size of element slab `i` along `axis`.
    pub fn size(&self, axis: Axis, i: usize) -> f64 {
        let e = &self.edges[axis.index()];
        e[i + 1] - e[i]
    }

    pub fn bounds(&self, axis: Axis) -> (f64, f64) {
        let e = &self.edges[axis.index()];
        (e[0], e[e.len() - 1])
    }

    pub fn min_size(&self) -> f64 {
        (0..self.dim)
            .flat_map(|a| self.edges[a].windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Flat element index of `(l, m, n)`.
    pub fn flat_index(&self, lmn: [usize; 3]) -> usize {
        let [nl, nm, _] = self.counts();
        lmn[0] + nl * (lmn[1] + nm * lmn[2])
    }

    pub fn element_coords(&self, flat: usize) -> [usize; 3] {
        let [nl, nm, _] = self.counts();
        [flat % nl, (flat / nl) % nm, flat / (nl * nm)]
    }

    /// Neighbouring element across face `(axis, side)`; `None` on the outer boundary.
    /// `side == 0` is the lower face.
    pub fn neighbor(&self, flat: usize, axis: Axis, side: usize) -> Option<usize> {
        let mut c = self.element_coords(flat);
        let a = axis.index();
        let count = self.counts()[a];
        if side == 0 {
            if c[a] == 0 {
                return None;
            }
            c[a] -= 1;
        } else {
            if c[a] + 1 == count {
                return None;
            }
            c[a] += 1;
        }
        Some(self.flat_index(c))
    }

    /// Affine map from reference coordinates in `[−1, 1]^dim` to physical coordinates.
    pub fn reference_to_physical(&self, flat: usize, reference: &[f64]) -> Vec<f64> {
        assert_eq!(reference.len(), self.dim, "reference point dimension mismatch");
        let c = self.element_coords(flat);
        reference
            .iter()
            .enumerate()
            .map(|(a, &r)| {
                assert!(r.abs() <= 1.0 + 1e-14, "reference coordinate {r} outside [-1, 1]");
                let e = &self.edges[a];
                let (lo, h) = (e[c[a]], e[c[a] + 1] - e[c[a]]);
                lo + 0.5 * h * (1.0 + r)
            })
            .collect()
    }

    /// Locate the element containing a physical point.
    ///
    /// Returns the element and the reference coordinates of the point. Points on an
    /// interior element boundary belong to two elements; `strict` turns that into an
    /// error instead of picking the lower one.
    pub fn locate(&self, point: &[f64], strict: bool) -> Result<(usize, Vec<f64>)> {
        if point.len() != self.dim {
            return Err(Error::config("point dimension does not match mesh"));
        }
        let mut lmn = [0usize; 3];
        let mut reference = Vec::with_capacity(self.dim);
        for (a, &x) in point.iter().enumerate() {
            let e = &self.edges[a];
            let (lo, hi) = (e[0], e[e.len() - 1]);
            if x < lo || x > hi {
                return Err(Error::config(format!(
                    "point coordinate {x} outside mesh along {}",
                    Axis::from_index(a).name()
                )));
            }
            let mut i = e.partition_point(|&edge| edge <= x).saturating_sub(1);
            i = i.min(e.len() - 2);
            let h = e[i + 1] - e[i];
            let tol = 1e-12 * h;
            let on_interior_edge = ((x - e[i]).abs() <= tol && i > 0)
                || ((x - e[i + 1]).abs() <= tol && i + 2 < e.len());
            if strict && on_interior_edge {
                return Err(Error::config(format!(
                    "point coordinate {x} lies on an element boundary along {}",
                    Axis::from_index(a).name()
                )));
            }
            lmn[a] = i;
            reference.push((2.0 * (x - e[i]) / h - 1.0).clamp(-1.0, 1.0));
        }
        Ok((self.flat_index(lmn), reference))
    }
}

/// Bulk modulus and density sampled at the nodes of every element.
///
/// Arrays are laid out `[element][node]` in the same order as solver fields.
#[derive(Debug, Clone)]
pub struct Material {
    kappa: Vec<f64>,
    rho: Vec<f64>,
}

impl Material {
    pub fn new(kappa: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if kappa.len() != rho.len() {
            return Err(Error::config("kappa and rho arrays differ in length"));
        }
        if kappa.iter().chain(&rho).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::config("bulk modulus and density must be positive"));
        }
        Ok(Self { kappa, rho })
    }

    /// Homogeneous medium with wave speed `c` (km/s) and density `rho` (g/cm³).
    pub fn constant(c: f64, rho: f64, num_values: usize) -> Result<Self> {
        if !(c > 0.0) || !(rho > 0.0) {
            return Err(Error::config("wave speed and density must be positive"));
        }
        Self::new(vec![rho * c * c; num_values], vec![rho; num_values])
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn wave_speed(&self, i: usize) -> f64 {
        (self.kappa[i] / self.rho[i]).sqrt()
    }

    pub fn impedance(&self, i: usize) -> f64 {
        (self.kappa[i] * self.rho[i]).sqrt()
    }

    pub fn max_wave_speed(&self) -> f64 {
        (0..self.len()).map(|i| self.wave_speed(i)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn strip_mesh_counts() {
        let m = Mesh::uniform(&[(-60.0, 60.0), (0.0, 50.0)], &[10.0, 10.0]).unwrap();
        assert_eq!(m.counts(), [12, 5, 1]);
        assert_eq!(m.num_elements(), 60);
    }

    #[test]
    fn cube_mesh_counts() {
        let h = 5.0 / 9.0;
        let m = Mesh::uniform(&[(0.0, 5.0); 3], &[h, h, h]).unwrap();
        assert_eq!(m.counts(), [9, 9, 9]);
        assert_abs_diff_eq!(m.size(Axis::Z, 8), h, epsilon = 1e-14);
        assert_eq!(m.bounds(Axis::X), (0.0, 5.0));
    }

    #[test]
    fn single_element_and_bad_spacing() {
        let m = Mesh::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[1.0, 1.0]).unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.size(Axis::X, 0), 1.0);
        let err = Mesh::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[0.3, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(Mesh::from_edges(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn flat_index_round_trip() {
        let m = Mesh::uniform(&[(0.0, 3.0), (0.0, 4.0), (0.0, 5.0)], &[1.0, 1.0, 1.0]).unwrap();
        for e in 0..m.num_elements() {
            assert_eq!(m.flat_index(m.element_coords(e)), e);
        }
        assert_eq!(m.neighbor(0, Axis::X, 0), None);
        assert_eq!(m.neighbor(0, Axis::X, 1), Some(1));
        assert_eq!(m.neighbor(0, Axis::Z, 1), Some(12));
    }

    #[test]
    fn reference_map() {
        let m = Mesh::from_edges(vec![vec![2.0, 4.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(m.reference_to_physical(0, &[0.0, -1.0]), vec![3.0, 0.0]);
        assert_eq!(m.reference_to_physical(0, &[-1.0, 1.0]), vec![2.0, 1.0]);
        let m = Mesh::uniform(&[(-60.0, 60.0), (0.0, 50.0)], &[10.0, 10.0]).unwrap();
        assert_abs_diff_eq!(m.reference_to_physical(0, &[0.5, 0.0])[0], -52.5, epsilon = 1e-13);
    }

    #[test]
    #[should_panic]
    fn reference_map_rejects_outside_points() {
        let m = Mesh::from_edges(vec![vec![2.0, 4.0], vec![0.0, 1.0]]).unwrap();
        m.reference_to_physical(0, &[1.5, 0.0]);
    }

    #[test]
    fn locate_points() {
        let h = 5.0 / 9.0;
        let m = Mesh::uniform(&[(0.0, 5.0); 3], &[h, h, h]).unwrap();
        let (e, r) = m.locate(&[1.5, 2.5, 2.5], true).unwrap();
        assert_eq!(m.element_coords(e), [2, 4, 4]);
        let back = m.reference_to_physical(e, &r);
        for (a, b) in back.iter().zip([1.5, 2.5, 2.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
        }
        let m2 = Mesh::uniform(&[(0.0, 2.0), (0.0, 2.0)], &[1.0, 1.0]).unwrap();
        assert!(m2.locate(&[1.0, 0.5], true).is_err());
        assert!(m2.locate(&[1.0, 0.5], false).is_ok());
    }

    #[test]
    fn constant_material_examples() {
        let m = Material::constant(1.484, 1.0, 4).unwrap();
        assert_abs_diff_eq!(m.impedance(0), 1.484, epsilon = 1e-15);
        assert_abs_diff_eq!(m.kappa()[0], 2.202256, epsilon = 1e-12);
        let m = Material::constant(1.0, 1.0, 1).unwrap();
        assert_eq!((m.kappa()[0], m.impedance(0)), (1.0, 1.0));
        let m = Material::constant(2.0, 0.5, 1).unwrap();
        assert_abs_diff_eq!(m.kappa()[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.impedance(0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.wave_speed(0), 2.0, epsilon = 1e-15);
        assert!(Material::constant(-1.0, 1.0, 1).is_err());
    }
}
