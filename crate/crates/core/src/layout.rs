//! Node numbering shared by every solver field: tensor-product nodes inside each
//! element of a [`Mesh`], plus the face-point numbering used by traces.
//!
//! Within an element, node `(i, j, k)` has local index `i + np·(j + np·k)`, so the
//! x index runs fastest. Face points on an `a`-face enumerate the remaining
//! axes in increasing order.

use crate::error::Result;
use crate::mesh::{Axis, Mesh};
use crate::quadrature::{Operators1D, QuadKind};

#[derive(Debug, Clone)]
pub struct Layout {
    mesh: Mesh,
    ops: Operators1D,
    np: usize,
    npe: usize,
    nf: usize,
    /// `face_base[a][t]`: local node of face point `t` at normal index 0.
    face_base: [Vec<usize>; 3],
}

impl Layout {
    pub fn new(mesh: Mesh, kind: QuadKind, degree: usize) -> Result<Self> {
        let ops = Operators1D::new(kind, degree)?;
        let dim = mesh.dim();
        let np = degree + 1;
        let npe = np.pow(dim as u32);
        let nf = np.pow(dim as u32 - 1);
        let mut face_base: [Vec<usize>; 3] = Default::default();
        for (a, base) in face_base.iter_mut().enumerate().take(dim) {
            let tangential: Vec<usize> = (0..dim).filter(|&b| b != a).collect();
            *base = (0..nf)
                .map(|t| {
                    let mut rem = t;
                    let mut node = 0;
                    for &b in &tangential {
                        node += (rem % np) * np.pow(b as u32);
                        rem /= np;
                    }
                    node
                })
                .collect();
        }
        Ok(Self {
            mesh,
            ops,
            np,
            npe,
            nf,
            face_base,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.np - 1
    }

    pub fn kind(&self) -> QuadKind {
        self.ops.kind
    }

    /// One-dimensional operators along `axis` (identical on every axis).
    pub fn ops(&self, _axis: Axis) -> &Operators1D {
        &self.ops
    }

    /// Nodes per axis, `P + 1`.
    pub fn np(&self) -> usize {
        self.np
    }

    pub fn nodes_per_element(&self) -> usize {
        self.npe
    }

    pub fn face_points(&self) -> usize {
        self.nf
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    /// Length of one scalar field over the whole mesh.
    pub fn field_len(&self) -> usize {
        self.npe * self.mesh.num_elements()
    }

    /// Stride between consecutive nodes along `axis` inside an element.
    pub fn stride(&self, axis: usize) -> usize {
        self.np.pow(axis as u32)
    }

    /// Per-axis node indices of local node `node` (global indices are reduced modulo the element size).
    pub fn node_index(&self, node: usize) -> [usize; 3] {
        let n = node % self.npe;
        let np = self.np;
        [n % np, (n / np) % np, n / (np * np)]
    }

    pub fn face_base(&self, axis: usize) -> &[usize] {
        &self.face_base[axis]
    }

    /// Physical coordinates of global node `g = element · npe + local`.
    pub fn node_coords(&self, g: usize) -> [f64; 3] {
        let e = g / self.npe;
        let idx = self.node_index(g);
        let lmn = self.mesh.element_coords(e);
        let mut out = [0.0; 3];
        for a in 0..self.dim() {
            let edges = self.mesh.edges(Axis::from_index(a));
            let (lo, hi) = (edges[lmn[a]], edges[lmn[a] + 1]);
            out[a] = lo + 0.5 * (hi - lo) * (1.0 + self.ops.nodes[idx[a]]);
        }
        out
    }

    /// Half-sizes `Δ/2` of element `e` per axis (1 for absent axes).
    pub fn half_sizes(&self, e: usize) -> [f64; 3] {
        let lmn = self.mesh.element_coords(e);
        let mut h = [1.0; 3];
        for (a, v) in h.iter_mut().enumerate().take(self.dim()) {
            *v = 0.5 * self.mesh.size(Axis::from_index(a), lmn[a]);
        }
        h
    }

    pub fn jacobian(&self, e: usize) -> f64 {
        self.half_sizes(e).iter().product()
    }

    /// Reference quadrature weight of local node `node`, `h_i h_j (h_k)`.
    pub fn node_weight(&self, node: usize) -> f64 {
        let idx = self.node_index(node);
        (0..self.dim()).map(|a| self.ops.weights[idx[a]]).product()
    }

    /// Quadrature weight of face point `t` on an `axis` face, excluding the Jacobian.
    pub fn face_weight(&self, axis: usize, t: usize) -> f64 {
        let base = self.face_base[axis][t];
        let idx = self.node_index(base);
        (0..self.dim())
            .filter(|&b| b != axis)
            .map(|b| self.ops.weights[idx[b]])
            .product()
    }

    /// Face Jacobian of element `e` on an `axis` face: product of the tangential half-sizes.
    pub fn face_jacobian(&self, e: usize, axis: usize) -> f64 {
        let h = self.half_sizes(e);
        (0..self.dim()).filter(|&b| b != axis).map(|b| h[b]).product()
    }

    /// Extrapolate an element-local nodal array to the face points of face `(axis, left)`.
    pub fn extrapolate(&self, values: &[f64], axis: usize, left: bool, out: &mut [f64]) {
        let e = self.ops.endpoint(left);
        let stride = self.stride(axis);
        for (t, o) in out.iter_mut().enumerate() {
            let base = self.face_base[axis][t];
            let mut s = 0.0;
            for (m, em) in e.iter().enumerate() {
                s += em * values[base + m * stride];
            }
            *o = s;
        }
    }

    /// Interpolate an element-local nodal array at reference point `reference`.
    pub fn interpolate(&self, values: &[f64], reference: &[f64]) -> f64 {
        let basis: Vec<Vec<f64>> = reference.iter().map(|&r| self.ops.basis_at(r)).collect();
        let mut s = 0.0;
        for (node, v) in values.iter().enumerate() {
            let idx = self.node_index(node);
            let w: f64 = (0..self.dim()).map(|a| basis[a][idx[a]]).product();
            s += w * v;
        }
        s
    }
}

/// Slot of each prognostic variable inside an element block of a [`State`].
///
/// 2D: `p, u, v, σ`; 3D: `p, u, v, w, σ, ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Pressure,
    Velocity(Axis),
    Sigma,
    Psi,
}

pub fn num_fields(dim: usize) -> usize {
    2 * dim
}

impl Field {
    pub fn slot(self, dim: usize) -> usize {
        match self {
            Field::Pressure => 0,
            Field::Velocity(a) => 1 + a.index(),
            Field::Sigma => 1 + dim,
            Field::Psi => {
                assert_eq!(dim, 3, "ψ exists only in 3D");
                5
            }
        }
    }

    pub fn all(dim: usize) -> Vec<Field> {
        let mut v = vec![Field::Pressure];
        v.extend((0..dim).map(|a| Field::Velocity(Axis::from_index(a))));
        v.push(Field::Sigma);
        if dim == 3 {
            v.push(Field::Psi);
        }
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Pressure => "p",
            Field::Velocity(Axis::X) => "u",
            Field::Velocity(Axis::Y) => "v",
            Field::Velocity(Axis::Z) => "w",
            Field::Sigma => "sigma",
            Field::Psi => "psi",
        }
    }
}

/// All prognostic fields, stored element by element: `data[(e·nfields + slot)·npe + node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    dim: usize,
    npe: usize,
    nelem: usize,
    pub data: Vec<f64>,
}

impl State {
    pub fn zeros(layout: &Layout) -> Self {
        let dim = layout.dim();
        let npe = layout.nodes_per_element();
        let nelem = layout.num_elements();
        Self {
            dim,
            npe,
            nelem,
            data: vec![0.0; num_fields(dim) * npe * nelem],
        }
    }

    /// Wrap a flat vector (same layout as [`State::data`]).
    pub fn from_vec(layout: &Layout, data: Vec<f64>) -> Self {
        let mut s = Self::zeros(layout);
        assert_eq!(data.len(), s.data.len(), "state vector length mismatch");
        s.data = data;
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nfields(&self) -> usize {
        num_fields(self.dim)
    }

    pub fn num_elements(&self) -> usize {
        self.nelem
    }

    pub fn nodes_per_element(&self) -> usize {
        self.npe
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, field: Field, e: usize) -> usize {
        (e * self.nfields() + field.slot(self.dim)) * self.npe
    }

    pub fn element_field(&self, field: Field, e: usize) -> &[f64] {
        let o = self.offset(field, e);
        &self.data[o..o + self.npe]
    }

    pub fn element_field_mut(&mut self, field: Field, e: usize) -> &mut [f64] {
        let o = self.offset(field, e);
        let n = self.npe;
        &mut self.data[o..o + n]
    }

    /// Value of `field` at global node `g = e · npe + local`.
    pub fn get(&self, field: Field, g: usize) -> f64 {
        self.data[self.offset(field, g / self.npe) + g % self.npe]
    }

    pub fn set(&mut self, field: Field, g: usize, v: f64) {
        let o = self.offset(field, g / self.npe) + g % self.npe;
        self.data[o] = v;
    }

    /// Copy of one field over the whole mesh, `[element][node]`.
    pub fn field_values(&self, field: Field) -> Vec<f64> {
        (0..self.nelem)
            .flat_map(|e| self.element_field(field, e).iter().copied())
            .collect()
    }

    /// Fill `field` by collocation of `f` at the node coordinates.
    pub fn fill<F: Fn([f64; 3]) -> f64>(&mut self, layout: &Layout, field: Field, f: F) {
        for g in 0..layout.field_len() {
            let v = f(layout.node_coords(g));
            self.set(field, g, v);
        }
    }

    pub fn max_abs(&self, field: Field) -> f64 {
        (0..self.nelem)
            .flat_map(|e| self.element_field(field, e).iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First non-finite entry as `(element, field)`.
    pub fn find_non_finite(&self) -> Option<(usize, Field)> {
        let pos = self.data.iter().position(|v| !v.is_finite())?;
        let block = pos / self.npe;
        let e = block / self.nfields();
        let slot = block % self.nfields();
        let field = Field::all(self.dim)[slot];
        Some((e, field))
    }
}
