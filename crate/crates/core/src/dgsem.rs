//! Semi-discrete right-hand side: tensor-product volume terms, upwind face
//! penalties and the PML auxiliary equations.
//!
//! In solved form, per element and with `pen` the face penalties below,
//!
//! ```text
//! dp/dt = −d_x p + κ (−Σ_a D_a v_a − σ − ψ + Σ_a pen_p,a)
//! dv_a/dt = −d_a v_a + (1/ρ)(−D_a p + pen_v,a)
//! dσ/dt = −d_y σ − (d_y − d_x)(D_y v − ω_y pen_p,y)
//! dψ/dt = −d_z ψ − (d_z − d_x)(D_z w − ω_z pen_p,z)
//! ```
//!
//! where `pen_p,a = −(2/Δa) H⁻¹(e(−1) F/Z − e(1) G/Z)` and
//! `pen_v,a = −(2/Δa) H⁻¹(e(−1) F + e(1) G)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::{boundary_hat, fluctuation, interface_hat, outgoing_characteristic, BoundarySpec, Side, TraceState};
use crate::layout::{num_fields, Layout, State};
use crate::mesh::{Axis, Material};
use crate::pml::{sample_damping, DampingField, PmlConfig};
use crate::source::{PointSource, PointSourceSpec};

/// Which equation a face penalty feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    /// Pressure (and auxiliary) equations: fluctuations weighted by `1/Z`, minus sign between faces.
    Pressure,
    /// Velocity equation of the face-normal component.
    Velocity,
}

/// Energy dissipated per unit time by the face terms, split by origin.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dissipation {
    /// `Σ F²/Z` or `G²/Z` over element faces that are interior to the mesh.
    pub interior: f64,
    /// The same fluctuation sums restricted to outer faces, `[axis][side]`.
    pub outer_fluctuation: [[f64; 2]; 3],
    /// Boundary terms `(1 − r²) χ_out²/Z` per outer face.
    pub boundary: [[f64; 2]; 3],
}

impl Dissipation {
    pub fn boundary_total(&self) -> f64 {
        self.boundary.iter().flatten().sum()
    }

    /// Everything dissipated through outer face `(axis, side)`.
    pub fn outer_face(&self, axis: usize, side: usize) -> f64 {
        self.outer_fluctuation[axis][side] + self.boundary[axis][side]
    }

    /// Total dissipation rate; with zero damping `dE/dt = −total`.
    pub fn total(&self) -> f64 {
        self.interior + self.outer_fluctuation.iter().flatten().sum::<f64>() + self.boundary_total()
    }
}

/// Everything the right-hand side needs besides the state.
#[derive(Debug, Clone)]
pub struct RhsContext {
    pub layout: Layout,
    pub material: Material,
    pub damping: DampingField,
    pub pml: PmlConfig,
    pub boundary: BoundarySpec,
    pub source: Option<PointSource>,
    /// Impedance at each face point, `[element][axis][side][point]`.
    face_z: Vec<f64>,
    node_idx: Vec<[usize; 3]>,
    inv_weights: Vec<f64>,
}

/// Face traces `p`, `v_n` of every element, indexed like `RhsContext::face_z`.
struct Traces {
    p: Vec<f64>,
    vn: Vec<f64>,
}

struct Scratch {
    dp: Vec<f64>,
    dv: Vec<f64>,
    pen_p: Vec<f64>,
    pen_v: Vec<f64>,
    fluct: Vec<f64>,
    z: Vec<f64>,
}

impl RhsContext {
    /// Build a context, sampling the damping profile from `pml`.
    pub fn new(
        layout: Layout,
        material: Material,
        pml: PmlConfig,
        boundary: BoundarySpec,
        source: Option<PointSourceSpec>,
    ) -> Result<Self> {
        let damping = sample_damping(&layout, &pml)?;
        Self::with_damping(layout, material, damping, pml, boundary, source)
    }

    /// Build a context with an explicitly supplied damping field.
    pub fn with_damping(
        layout: Layout,
        material: Material,
        damping: DampingField,
        pml: PmlConfig,
        boundary: BoundarySpec,
        source: Option<PointSourceSpec>,
    ) -> Result<Self> {
        pml.validate()?;
        boundary.validate()?;
        if material.len() != layout.field_len() {
            return Err(Error::config(format!(
                "material has {} values, mesh has {} nodes",
                material.len(),
                layout.field_len()
            )));
        }
        for a in 0..3 {
            if let Some(d) = damping.axis(a) {
                if a >= layout.dim() || d.len() != layout.field_len() {
                    return Err(Error::config(format!("damping field d_{} has the wrong shape", Axis::from_index(a).name())));
                }
                if d.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::config("damping must be non-negative"));
                }
            }
        }
        let source = source.map(|s| PointSource::new(&layout, s)).transpose()?;

        let dim = layout.dim();
        let npe = layout.nodes_per_element();
        let nf = layout.face_points();
        let mut face_z = vec![0.0; layout.num_elements() * dim * 2 * nf];
        let (mut k_face, mut r_face) = (vec![0.0; nf], vec![0.0; nf]);
        for e in 0..layout.num_elements() {
            let kappa = &material.kappa()[e * npe..(e + 1) * npe];
            let rho = &material.rho()[e * npe..(e + 1) * npe];
            for a in 0..dim {
                for s in 0..2 {
                    layout.extrapolate(kappa, a, s == 0, &mut k_face);
                    layout.extrapolate(rho, a, s == 0, &mut r_face);
                    let o = ((e * dim + a) * 2 + s) * nf;
                    for t in 0..nf {
                        let z = (k_face[t] * r_face[t]).sqrt();
                        if !(z > 0.0) {
                            return Err(Error::config("material extrapolates to a non-positive impedance on a face"));
                        }
                        face_z[o + t] = z;
                    }
                }
            }
        }
        let node_idx = (0..npe).map(|n| layout.node_index(n)).collect();
        let inv_weights = layout.ops(Axis::X).weights.iter().map(|w| 1.0 / w).collect();
        Ok(Self {
            layout,
            material,
            damping,
            pml,
            boundary,
            source,
            face_z,
            node_idx,
            inv_weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Length of a state vector.
    pub fn state_len(&self) -> usize {
        num_fields(self.dim()) * self.layout.field_len()
    }

    fn face_offset(&self, e: usize, axis: usize, side: usize) -> usize {
        ((e * self.dim() + axis) * 2 + side) * self.layout.face_points()
    }

    /// Impedance at the face points of face `(axis, side)` of element `e`.
    pub fn face_impedance(&self, e: usize, axis: usize, side: Side) -> &[f64] {
        let o = self.face_offset(e, axis, side as usize);
        &self.face_z[o..o + self.layout.face_points()]
    }

    fn traces(&self, state: &State) -> Traces {
        let dim = self.dim();
        let nf = self.layout.face_points();
        let npe = self.layout.nodes_per_element();
        let nfld = num_fields(dim);
        let block = dim * 2 * nf;
        let n = self.layout.num_elements() * block;
        let mut p = vec![0.0; n];
        let mut vn = vec![0.0; n];
        p.par_chunks_mut(block)
            .zip(vn.par_chunks_mut(block))
            .enumerate()
            .for_each(|(e, (pb, vb))| {
                let elem = &state.data[e * nfld * npe..(e + 1) * nfld * npe];
                let pres = &elem[..npe];
                for a in 0..dim {
                    let vel = &elem[(1 + a) * npe..(2 + a) * npe];
                    for s in 0..2 {
                        let o = (a * 2 + s) * nf;
                        self.layout.extrapolate(pres, a, s == 0, &mut pb[o..o + nf]);
                        self.layout.extrapolate(vel, a, s == 0, &mut vb[o..o + nf]);
                    }
                }
            });
        Traces { p, vn }
    }

    /// Hat state and the fluctuation of element `e` at face point `t` of face `(axis, side)`.
    #[inline]
    fn face_point(&self, tr: &Traces, e: usize, axis: usize, side: usize, t: usize) -> (TraceState, f64, f64) {
        let o = self.face_offset(e, axis, side) + t;
        let (p, vn, z) = (tr.p[o], tr.vn[o], self.face_z[o]);
        let sd = Side::from_index(side);
        let hat = match self.layout.mesh().neighbor(e, Axis::from_index(axis), side) {
            Some(nb) => {
                let on = self.face_offset(nb, axis, 1 - side) + t;
                let (pn, vnn, zn) = (tr.p[on], tr.vn[on], self.face_z[on]);
                if side == 0 {
                    interface_hat(pn, vnn, zn, p, vn, z)
                } else {
                    interface_hat(p, vn, z, pn, vnn, zn)
                }
            }
            None => boundary_hat(p, vn, z, self.boundary.get(axis, sd), sd),
        };
        (hat, fluctuation(p, vn, z, hat, sd), z)
    }

    /// Linear part of the right-hand side, `out = A q` (no source, no finiteness check).
    pub fn apply(&self, state: &State, out: &mut State) {
        let dim = self.dim();
        let npe = self.layout.nodes_per_element();
        let nf = self.layout.face_points();
        let nfld = num_fields(dim);
        assert_eq!(state.len(), self.state_len(), "state length mismatch");
        assert_eq!(out.len(), self.state_len(), "output length mismatch");
        let tr = self.traces(state);
        out.data
            .par_chunks_mut(nfld * npe)
            .enumerate()
            .for_each_init(
                || Scratch {
                    dp: vec![0.0; npe],
                    dv: vec![0.0; npe],
                    pen_p: vec![0.0; npe],
                    pen_v: vec![0.0; npe],
                    fluct: vec![0.0; nf],
                    z: vec![0.0; nf],
                },
                |sc, (e, block)| self.element_rhs(state, &tr, e, block, sc),
            );
    }

    fn element_rhs(&self, state: &State, tr: &Traces, e: usize, out: &mut [f64], sc: &mut Scratch) {
        let dim = self.dim();
        let npe = self.layout.nodes_per_element();
        let nf = self.layout.face_points();
        let nfld = num_fields(dim);
        let elem = &state.data[e * nfld * npe..(e + 1) * nfld * npe];
        let g0 = e * npe;
        let kappa = &self.material.kappa()[g0..g0 + npe];
        let rho = &self.material.rho()[g0..g0 + npe];
        let half = self.layout.half_sizes(e);
        let dx = self.damping.axis(0).map(|d| &d[g0..g0 + npe]);

        let pres = &elem[..npe];
        let sigma_slot = 1 + dim;
        let (out_p, rest) = out.split_at_mut(npe);
        // pressure: −d_x p − κ(σ + ψ); velocity/auxiliary terms are added per axis below
        for n in 0..npe {
            let mut aux = elem[sigma_slot * npe + n];
            if dim == 3 {
                aux += elem[5 * npe + n];
            }
            out_p[n] = -kappa[n] * aux - dx.map_or(0.0, |d| d[n] * pres[n]);
        }
        for a in 0..dim {
            let vel = &elem[(1 + a) * npe..(2 + a) * npe];
            volume_derivative_into(&self.layout, &self.node_idx, pres, a, half[a], &mut sc.dp);
            volume_derivative_into(&self.layout, &self.node_idx, vel, a, half[a], &mut sc.dv);
            sc.pen_p.iter_mut().for_each(|v| *v = 0.0);
            sc.pen_v.iter_mut().for_each(|v| *v = 0.0);
            for side in 0..2 {
                for t in 0..nf {
                    let (_, f, z) = self.face_point(tr, e, a, side, t);
                    sc.fluct[t] = f;
                    sc.z[t] = z;
                }
                let sd = Side::from_index(side);
                self.penalty_into(PenaltyKind::Pressure, a, sd, half[a], &sc.fluct, &sc.z, &mut sc.pen_p);
                self.penalty_into(PenaltyKind::Velocity, a, sd, half[a], &sc.fluct, &sc.z, &mut sc.pen_v);
            }
            let da = self.damping.axis(a).map(|d| &d[g0..g0 + npe]);
            let out_v = &mut rest[a * npe..(a + 1) * npe];
            for n in 0..npe {
                out_p[n] += kappa[n] * (sc.pen_p[n] - sc.dv[n]);
                out_v[n] = (sc.pen_v[n] - sc.dp[n]) / rho[n] - da.map_or(0.0, |d| d[n] * vel[n]);
            }
            if a >= 1 {
                let slot = if a == 1 { sigma_slot } else { 5 };
                let omega = if a == 1 { self.pml.omega_y } else { self.pml.omega_z };
                let aux = &elem[slot * npe..(slot + 1) * npe];
                let out_aux = &mut rest[(slot - 1) * npe..slot * npe];
                for n in 0..npe {
                    let d_a = da.map_or(0.0, |d| d[n]);
                    let diff = d_a - dx.map_or(0.0, |d| d[n]);
                    out_aux[n] = -d_a * aux[n] - diff * (sc.dv[n] - omega * sc.pen_p[n]);
                }
            }
        }
    }

    fn penalty_into(
        &self,
        kind: PenaltyKind,
        axis: usize,
        side: Side,
        half: f64,
        fluct: &[f64],
        z: &[f64],
        out: &mut [f64],
    ) {
        let ops = self.layout.ops(Axis::from_index(axis));
        let ev = ops.endpoint(side == Side::Left);
        let stride = self.layout.stride(axis);
        let sign = match (kind, side) {
            (PenaltyKind::Pressure, Side::Right) => 1.0,
            _ => -1.0,
        };
        for (t, &base) in self.layout.face_base(axis).iter().enumerate() {
            let val = match kind {
                PenaltyKind::Pressure => fluct[t] / z[t],
                PenaltyKind::Velocity => fluct[t],
            };
            if val == 0.0 {
                continue;
            }
            let c = sign * val / half;
            for (m, &em) in ev.iter().enumerate() {
                out[base + m * stride] += c * em * self.inv_weights[m];
            }
        }
    }

    /// Add the `k`-th time derivative of the source forcing at time `t`.
    pub fn add_source(&self, out: &mut State, k: usize, t: f64) {
        if let Some(src) = &self.source {
            let f = src.time_factor(k, t);
            let p = out.element_field_mut(crate::layout::Field::Pressure, src.element);
            for (v, d) in p.iter_mut().zip(&src.delta) {
                *v += f * d;
            }
        }
    }

    /// Full right-hand side at time `t`, including the source.
    pub fn rhs(&self, state: &State, t: f64) -> Result<State> {
        check_finite(state, t)?;
        let mut out = State::zeros(&self.layout);
        self.apply(state, &mut out);
        self.add_source(&mut out, 0, t);
        Ok(out)
    }

    /// Face dissipation of the current state.
    pub fn dissipation(&self, state: &State) -> Dissipation {
        let dim = self.dim();
        let nf = self.layout.face_points();
        let tr = self.traces(state);
        let mut d = Dissipation::default();
        for e in 0..self.layout.num_elements() {
            for a in 0..dim {
                let fj = self.layout.face_jacobian(e, a);
                for side in 0..2 {
                    let outer = self.layout.mesh().neighbor(e, Axis::from_index(a), side).is_none();
                    let sd = Side::from_index(side);
                    let r = self.boundary.get(a, sd);
                    let (mut fl, mut bt) = (0.0, 0.0);
                    for t in 0..nf {
                        let w = self.layout.face_weight(a, t) * fj;
                        let (_, f, z) = self.face_point(&tr, e, a, side, t);
                        fl += w * f * f / z;
                        if outer {
                            let o = self.face_offset(e, a, side) + t;
                            let chi = outgoing_characteristic(tr.p[o], tr.vn[o], z, sd);
                            bt += w * (1.0 - r * r) * chi * chi / z;
                        }
                    }
                    if outer {
                        d.outer_fluctuation[a][side] += fl;
                        d.boundary[a][side] += bt;
                    } else {
                        d.interior += fl;
                    }
                }
            }
        }
        d
    }
}

/// Error out on the first non-finite entry of `state`.
pub fn check_finite(state: &State, t: f64) -> Result<()> {
    match state.find_non_finite() {
        None => Ok(()),
        Some((e, field)) => Err(Error::Numerical(format!(
            "non-finite {} in element {e} at t = {t}",
            field.name()
        ))),
    }
}

fn volume_derivative_into(layout: &Layout, node_idx: &[[usize; 3]], values: &[f64], axis: usize, half: f64, out: &mut [f64]) {
    let ops = layout.ops(Axis::from_index(axis));
    let np = layout.np();
    let stride = layout.stride(axis);
    let inv = 1.0 / half;
    for (n, o) in out.iter_mut().enumerate() {
        let i = node_idx[n][axis];
        let base = n - i * stride;
        let row = &ops.d[i * np..(i + 1) * np];
        let mut s = 0.0;
        for (m, dm) in row.iter().enumerate() {
            s += dm * values[base + m * stride];
        }
        *o = s * inv;
    }
}

/// Physical derivative along `axis` of an element-local nodal array, `(2/Δ) (D ⊗ I ⊗ I)`.
pub fn volume_derivative(layout: &Layout, values: &[f64], axis: Axis, element: usize) -> Vec<f64> {
    let idx: Vec<[usize; 3]> = (0..layout.nodes_per_element()).map(|n| layout.node_index(n)).collect();
    let mut out = vec![0.0; layout.nodes_per_element()];
    let half = layout.half_sizes(element)[axis.index()];
    volume_derivative_into(layout, &idx, values, axis.index(), half, &mut out);
    out
}

/// Nodal increment of one face penalty: `−(2/Δ)H⁻¹ e(−1)F/Z` or `+(2/Δ)H⁻¹ e(1)G/Z` for
/// [`PenaltyKind::Pressure`], `−(2/Δ)H⁻¹ e(±1)F|G` for [`PenaltyKind::Velocity`].
pub fn face_penalty(
    ctx: &RhsContext,
    kind: PenaltyKind,
    element: usize,
    axis: Axis,
    side: Side,
    fluct: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; ctx.layout.nodes_per_element()];
    let z = ctx.face_impedance(element, axis.index(), side).to_vec();
    let half = ctx.layout.half_sizes(element)[axis.index()];
    ctx.penalty_into(kind, axis.index(), side, half, fluct, &z, &mut out);
    out
}
