//! Discrete energy, error norms, the analytic point-source solution, dense
//! operator assembly and eigenvalue-based stability checks.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dgsem::{Dissipation, RhsContext};
use crate::error::{Error, Result};
use crate::layout::{Field, Layout, State};
use crate::mesh::Axis;
use crate::source::GaussianWavelet;

/// Largest operator dimension accepted by [`assemble_global_operator`].
pub const MAX_DENSE_DOF: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub energy: f64,
    pub linf_p: f64,
    #[serde(skip)]
    pub dissipation: Option<Dissipation>,
}

/// `Σ_e Σ_n ½ [p²/κ + ρ |v|²] h_n J_e`; auxiliary fields are excluded.
pub fn discrete_energy(ctx: &RhsContext, state: &State) -> f64 {
    weighted_product(ctx, state, state)
}

/// Energy inner product `⟨a, b⟩ = Σ [a_p b_p/κ + ρ a_v·b_v] h J / 2` over the physical fields.
pub fn weighted_product(ctx: &RhsContext, a: &State, b: &State) -> f64 {
    let layout = &ctx.layout;
    let dim = layout.dim();
    let npe = layout.nodes_per_element();
    let kappa = ctx.material.kappa();
    let rho = ctx.material.rho();
    let mut total = 0.0;
    for e in 0..layout.num_elements() {
        let jac = layout.jacobian(e);
        let pa = a.element_field(Field::Pressure, e);
        let pb = b.element_field(Field::Pressure, e);
        let mut sum = 0.0;
        for n in 0..npe {
            let g = e * npe + n;
            let mut s = pa[n] * pb[n] / kappa[g];
            for ax in 0..dim {
                let f = Field::Velocity(Axis::from_index(ax));
                s += rho[g] * a.element_field(f, e)[n] * b.element_field(f, e)[n];
            }
            sum += layout.node_weight(n) * s;
        }
        total += 0.5 * jac * sum;
    }
    total
}

/// Chain-rule energy rate `dE/dt = 2⟨q, q_t⟩` for a state and its time derivative.
pub fn energy_rate(ctx: &RhsContext, state: &State, rate: &State) -> f64 {
    2.0 * weighted_product(ctx, state, rate)
}

pub fn energy_report(ctx: &RhsContext, state: &State, t: f64, with_dissipation: bool) -> EnergyReport {
    EnergyReport {
        t,
        energy: discrete_energy(ctx, state),
        linf_p: state.max_abs(Field::Pressure),
        dissipation: with_dissipation.then(|| ctx.dissipation(state)),
    }
}

/// Free-space pressure of the point source `δ(x − x0) g(t)` forcing `p_tt − c²Δp`:
/// `p = −g′(t − r/c) / (4π r c²)`.
pub fn analytic_point_pressure(x: &[f64], x0: &[f64], t: f64, c: f64, wavelet: &GaussianWavelet) -> Result<f64> {
    let r = x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if !(r > 0.0) {
        return Err(Error::config("analytic solution is singular at the source location"));
    }
    Ok(-wavelet.derivative(1, t - r / c) / (4.0 * std::f64::consts::PI * r * c * c))
}

/// `max |a − b|` over entries where `mask` is true (all entries when `None`).
///
/// Panics if the lengths differ.
pub fn linf_error(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> f64 {
    assert_eq!(a.len(), b.len(), "linf_error: length mismatch");
    if let Some(m) = mask {
        assert_eq!(m.len(), a.len(), "linf_error: mask length mismatch");
    }
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .fold(0.0, |m, (_, (x, y))| m.max((x - y).abs()))
}

/// Node mask of the points of `layout` satisfying `pred`.
pub fn node_mask<F: Fn([f64; 3]) -> bool>(layout: &Layout, pred: F) -> Vec<bool> {
    (0..layout.field_len()).map(|g| pred(layout.node_coords(g))).collect()
}

/// Pressure error of `state` against a reference computed on a larger mesh with the same
/// element size and degree, over the nodes of `state` selected by `mask`.
///
/// Nodes are matched by physical coordinates; a node without a counterpart is a contract violation.
pub fn linf_error_vs_reference(
    layout: &Layout,
    state: &State,
    ref_layout: &Layout,
    reference: &State,
    mask: &[bool],
) -> f64 {
    assert_eq!(mask.len(), layout.field_len(), "mask length mismatch");
    let npe = layout.nodes_per_element();
    let mut err: f64 = 0.0;
    for e in 0..layout.num_elements() {
        let first = e * npe;
        if !(first..first + npe).any(|g| mask[g]) {
            continue;
        }
        // element centroid locates the matching reference element
        let c = layout.mesh().reference_to_physical(e, &vec![0.0; layout.dim()]);
        let (re, _) = ref_layout
            .mesh()
            .locate(&c, false)
            .expect("reference mesh does not cover the solution mesh");
        let p = state.element_field(Field::Pressure, e);
        let pr = reference.element_field(Field::Pressure, re);
        for n in 0..npe {
            if mask[first + n] {
                let (x, xr) = (layout.node_coords(first + n), ref_layout.node_coords(re * npe + n));
                assert!(
                    x.iter().zip(&xr).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs())),
                    "reference mesh is not aligned with the solution mesh"
                );
                err = err.max((p[n] - pr[n]).abs());
            }
        }
    }
    err
}

/// Dense matrix `A` with `A q = apply(q)` for the source-free operator.
pub fn assemble_global_operator(ctx: &RhsContext) -> Result<Mat<f64>> {
    let n = ctx.state_len();
    if n > MAX_DENSE_DOF {
        return Err(Error::config(format!(
            "operator dimension {n} exceeds the dense limit {MAX_DENSE_DOF}"
        )));
    }
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut unit = State::zeros(&ctx.layout);
            unit.data[j] = 1.0;
            let mut out = State::zeros(&ctx.layout);
            ctx.apply(&unit, &mut out);
            out.data
        })
        .collect();
    Ok(Mat::from_fn(n, n, |i, j| columns[j][i]))
}

/// `A x` for a dense operator and a flat vector.
pub fn mat_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len(), "mat_vec: dimension mismatch");
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

/// Infinity norm (max absolute row sum).
pub fn matrix_norm_inf(a: &Mat<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub dimension: usize,
    #[serde(skip)]
    pub eigenvalues: Vec<Complex64>,
    /// `max Re λ`.
    pub abscissa: f64,
    pub norm: f64,
    /// `min ‖A v − λ v‖ / ‖v‖` for the eigenvalue attaining the abscissa.
    pub residual: f64,
}

/// Full spectrum of `a` and its spectral abscissa, with an eigenvector residual check.
pub fn spectral_abscissa(a: &Mat<f64>) -> Result<SpectrumReport> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::config("operator must be square and non-empty"));
    }
    let norm = matrix_norm_inf(a);
    let evd = a
        .eigen()
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let eigenvalues: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    if eigenvalues.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
        return Err(Error::Numerical("eigensolver returned non-finite eigenvalues".into()));
    }
    let imax = (0..n)
        .max_by(|&x, &y| eigenvalues[x].re.total_cmp(&eigenvalues[y].re))
        .expect("non-empty spectrum");
    let lambda = eigenvalues[imax];
    let v = evd.U().col(imax);
    let vnorm = (0..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
    let rnorm = (0..n)
        .map(|i| {
            let av: Complex64 = (0..n).map(|j| v[j] * a[(i, j)]).sum();
            (av - lambda * v[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    let mut residual = rnorm / vnorm;
    if !(residual <= 1e-8 * norm) {
        // Defective clusters give ill-conditioned eigenvectors; the backward
        // error σ_min(A − λI) is the residual of the best unit vector instead.
        residual = residual.min(smallest_singular_value(a, lambda)?);
    }
    if !(residual <= 1e-8 * norm) {
        return Err(Error::Numerical(format!(
            "eigenvalue residual {residual:e} for λ = {lambda} exceeds 1e-8‖A‖"
        )));
    }
    Ok(SpectrumReport {
        dimension: n,
        abscissa: lambda.re,
        eigenvalues,
        norm,
        residual,
    })
}

fn smallest_singular_value(a: &Mat<f64>, lambda: Complex64) -> Result<f64> {
    let n = a.nrows();
    let shifted: Mat<Complex64> = Mat::from_fn(n, n, |i, j| {
        let v = Complex64::new(a[(i, j)], 0.0);
        if i == j {
            v - lambda
        } else {
            v
        }
    });
    let s = shifted
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
    Ok(s.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::BoundarySpec;
    use crate::mesh::{Material, Mesh};
    use crate::pml::PmlConfig;
    use crate::quadrature::QuadKind;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx2(kind: QuadKind, p: usize, r: f64, counts: (usize, usize)) -> RhsContext {
        let mesh = Mesh::uniform(&[(0.0, counts.0 as f64), (0.0, counts.1 as f64)], &[1.0, 1.0]).unwrap();
        let layout = Layout::new(mesh, kind, p).unwrap();
        let mat = Material::constant(1.0, 1.0, layout.field_len()).unwrap();
        RhsContext::new(layout, mat, PmlConfig::none(), BoundarySpec::uniform(r), None).unwrap()
    }

    fn random(ctx: &RhsContext, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = State::zeros(&ctx.layout);
        s.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s
    }

    #[test]
    fn energy_examples() {
        let c = ctx2(QuadKind::Gl, 2, 0.0, (1, 1));
        let mut s = State::zeros(&c.layout);
        assert_eq!(discrete_energy(&c, &s), 0.0);
        s.fill(&c.layout, Field::Pressure, |_| 1.0);
        assert_relative_eq!(discrete_energy(&c, &s), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn energy_matches_nested_loop_oracle() {
        let c = ctx2(QuadKind::Glr, 3, 0.0, (2, 2));
        let s = random(&c, 3);
        let w = &c.layout.ops(Axis::X).weights;
        let np = c.layout.np();
        let mut e_ref = 0.0;
        for e in (0..c.layout.num_elements()).rev() {
            for j in 0..np {
                for i in 0..np {
                    let n = i + np * j;
                    let g = e * c.layout.nodes_per_element() + n;
                    let (p, u, v) = (
                        s.get(Field::Pressure, g),
                        s.get(Field::Velocity(Axis::X), g),
                        s.get(Field::Velocity(Axis::Y), g),
                    );
                    // κ = ρ = 1, element Jacobian 1/4
                    e_ref += 0.5 * (p * p + u * u + v * v) * w[i] * w[j] * 0.25;
                }
            }
        }
        assert_relative_eq!(discrete_energy(&c, &s), e_ref, max_relative = 1e-13);
    }

    #[test]
    fn energy_rate_identity_without_damping() {
        for kind in QuadKind::ALL {
            for r in [0.0, -1.0, 1.0, 0.4] {
                let c = ctx2(kind, 3, r, (2, 2));
                let mut s = random(&c, 11);
                // σ couples into the pressure rate even without damping; the identity concerns the wave part
                for e in 0..c.layout.num_elements() {
                    s.element_field_mut(Field::Sigma, e).fill(0.0);
                }
                let rate = c.rhs(&s, 0.0).unwrap();
                let chain = energy_rate(&c, &s, &rate);
                let diss = c.dissipation(&s).total();
                assert_relative_eq!(chain, -diss, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn analytic_solution_examples() {
        let g = GaussianWavelet::new(0.7, 0.1149);
        let x0 = [2.5, 2.5, 2.5];
        let c = 1.484;
        assert!(analytic_point_pressure(&x0, &x0, 1.0, c, &g).is_err());
        let rx = [4.5, 2.5, 2.5];
        let peak = g.value(0.7);
        // well before arrival
        let early = analytic_point_pressure(&rx, &x0, 2.0 / c + 0.7 - 7.0 * 0.1149, c, &g).unwrap();
        assert!(early.abs() < 1e-10 * peak);
        // zero crossing at the retarded center time
        let mid = analytic_point_pressure(&rx, &x0, 0.7 + 2.0 / c, c, &g).unwrap();
        assert!(mid.abs() < 1e-12 * peak);
        // extremum of −g′ at t0 + σ0 after travel time, ≈ 2.16 s
        let t_peak = 0.7 + 2.0 / c + 0.1149;
        assert!((t_peak - 2.16).abs() < 0.01);
        let at = |t: f64| analytic_point_pressure(&rx, &x0, t, c, &g).unwrap();
        assert!(at(t_peak).abs() > at(t_peak - 0.01).abs() && at(t_peak).abs() > at(t_peak + 0.01).abs());
    }

    #[test]
    fn analytic_solution_satisfies_wave_equation() {
        let g = GaussianWavelet::new(0.7, 0.1149);
        let x0 = [0.0, 0.0, 0.0];
        let c = 1.484;
        let f = |x: [f64; 3], t: f64| analytic_point_pressure(&x, &x0, t, c, &g).unwrap();
        let (x, t) = ([0.9, 0.5, -0.3], 0.7 + 1.08 / c);
        let mut res = Vec::new();
        for h in [4e-3, 2e-3] {
            let ptt = (f(x, t + h) - 2.0 * f(x, t) + f(x, t - h)) / (h * h);
            let mut lap = 0.0;
            for a in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[a] += h;
                xm[a] -= h;
                lap += (f(xp, t) - 2.0 * f(x, t) + f(xm, t)) / (h * h);
            }
            res.push((ptt - c * c * lap).abs() / ptt.abs().max(1.0));
        }
        // O(h²) residual: halving h cuts it by ~4
        assert!(res[1] < 0.3 * res[0], "{res:?}");
        assert!(res[1] < 1e-2, "{res:?}");
    }

    #[test]
    fn linf_examples() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(linf_error(&a, &a, None), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 1e-3).collect();
        assert_relative_eq!(linf_error(&a, &b, None), 1e-3, max_relative = 1e-9);
        let mut c = a.clone();
        c[2] = 10.0;
        let mask = vec![true, true, false];
        assert_eq!(linf_error(&a, &c, Some(&mask)), 0.0);
        assert_eq!(linf_error(&a, &c, None), 7.0);
    }

    #[test]
    fn operator_reproduces_rhs() {
        let c = ctx2(QuadKind::Gll, 1, 0.0, (1, 1));
        let a = assemble_global_operator(&c).unwrap();
        assert_eq!(a.nrows(), 16);
        for seed in 0..10 {
            let s = random(&c, seed);
            let ax = mat_vec(&a, &s.data);
            let d = c.rhs(&s, 0.0).unwrap();
            let scale = d.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in ax.iter().zip(&d.data) {
                assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn operator_locality_and_auxiliary_rows() {
        let c = ctx2(QuadKind::Gl, 1, 0.0, (3, 1));
        let a = assemble_global_operator(&c).unwrap();
        let blk = 4 * c.layout.nodes_per_element();
        // elements 0 and 2 share no face
        for i in 0..blk {
            for j in 2 * blk..3 * blk {
                assert_eq!(a[(i, j)], 0.0);
                assert_eq!(a[(j, i)], 0.0);
            }
        }
        let npe = c.layout.nodes_per_element();
        for e in 0..3 {
            for n in 0..npe {
                let row = (e * 4 + 3) * npe + n;
                assert!((0..a.ncols()).all(|j| a[(row, j)] == 0.0));
            }
        }
    }

    #[test]
    fn defective_spectrum_uses_backward_error() {
        // nilpotent Jordan block: eigenvectors are ill-conditioned but every
        // computed eigenvalue is exact for a nearby matrix
        let n = 6;
        let a = Mat::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
        let r = spectral_abscissa(&a).unwrap();
        assert!(r.residual <= 1e-8 * r.norm);
        assert!(r.abscissa.abs() < 1e-2);
        let diag = Mat::from_fn(3, 3, |i, j| if i == j { -(i as f64) } else { 0.0 });
        let r = spectral_abscissa(&diag).unwrap();
        assert_eq!(r.abscissa, 0.0);
        assert_eq!(r.norm, 2.0);
    }

    #[test]
    fn undamped_upwind_spectrum_is_dissipative() {
        let c = ctx2(QuadKind::Gll, 2, 0.0, (2, 1));
        let a = assemble_global_operator(&c).unwrap();
        let rep = spectral_abscissa(&a).unwrap();
        assert!(rep.abscissa <= 1e-10 * rep.norm, "{}", rep.abscissa);
        assert_eq!(rep.eigenvalues.len(), a.nrows());
    }

    #[test]
    fn size_guard() {
        let mesh = Mesh::uniform(&[(0.0, 10.0), (0.0, 10.0)], &[1.0, 1.0]).unwrap();
        let layout = Layout::new(mesh, QuadKind::Gll, 7).unwrap();
        let mat = Material::constant(1.0, 1.0, layout.field_len()).unwrap();
        let c = RhsContext::new(layout, mat, PmlConfig::none(), BoundarySpec::default(), None).unwrap();
        assert!(matches!(assemble_global_operator(&c), Err(Error::Config(_))));
    }
}
