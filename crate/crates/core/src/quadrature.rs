//! One-dimensional Gauss quadrature rules and the nodal summation-by-parts
//! operators built on them.
//!
//! For a rule with `P + 1` nodes the Lagrange basis `L_i` interpolates at the
//! nodes, and the operators satisfy `Q + Qᵀ = B` with
//! `B = e(1)e(1)ᵀ − e(−1)e(−1)ᵀ` whenever the rule integrates polynomials of
//! degree `2P − 1` exactly, which holds for all three node families here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 12;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Quadrature node family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadKind {
    /// Gauss–Legendre–Lobatto: both endpoints are nodes, exact to degree `2P − 1`.
    #[serde(rename = "GLL")]
    Gll,
    /// Gauss–Legendre: no endpoint is a node, exact to degree `2P + 1`.
    #[serde(rename = "GL")]
    Gl,
    /// Gauss–Legendre–Radau with the left endpoint `ξ = −1` as a node, exact to degree `2P`.
    #[serde(rename = "GLR")]
    Glr,
}

impl QuadKind {
    pub const ALL: [QuadKind; 3] = [QuadKind::Gll, QuadKind::Gl, QuadKind::Glr];

    /// Highest monomial degree integrated exactly by the `(P + 1)`-point rule.
    pub fn exactness_degree(self, degree: usize) -> usize {
        match self {
            QuadKind::Gll => 2 * degree - 1,
            QuadKind::Glr => 2 * degree,
            QuadKind::Gl => 2 * degree + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadKind::Gll => "GLL",
            QuadKind::Gl => "GL",
            QuadKind::Glr => "GLR",
        }
    }
}

impl std::fmt::Display for QuadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for QuadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GLL" => Ok(QuadKind::Gll),
            "GL" => Ok(QuadKind::Gl),
            "GLR" => Ok(QuadKind::Glr),
            other => Err(Error::config(format!("unknown quadrature kind `{other}`"))),
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative, by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        // P'_{k+1} = P'_{k-1} + (2k+1) P_k
        let dp_next = dp_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

fn newton<F>(mut x: f64, f: F) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    for _ in 0..NEWTON_MAX_ITER {
        let (val, der) = f(x);
        let dx = val / der;
        x -= dx;
        if dx.abs() <= NEWTON_TOL {
            break;
        }
    }
    x
}

fn check_degree(degree: usize) -> Result<()> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::config(format!(
            "polynomial degree {degree} outside supported range 1..={MAX_DEGREE}"
        )));
    }
    Ok(())
}

/// Nodes and weights of the `(degree + 1)`-point rule of the given kind.
pub fn build_rule(kind: QuadKind, degree: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_degree(degree)?;
    let n = degree + 1;
    let nf = n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);

    match kind {
        QuadKind::Gl => {
            for i in 0..n {
                let guess = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
                let x = newton(guess, |x| legendre(n, x));
                let (_, dp) = legendre(n, x);
                nodes.push(x);
                weights.push(2.0 / ((1.0 - x * x) * dp * dp));
            }
        }
        QuadKind::Gll => {
            let p = degree;
            let pf = p as f64;
            nodes.push(-1.0);
            for i in 1..p {
                let guess = -(std::f64::consts::PI * i as f64 / pf).cos();
                // roots of P'_P; P''_P from the Legendre ODE
                let x = newton(guess, |x| {
                    let (lp, dlp) = legendre(p, x);
                    let d2 = (2.0 * x * dlp - pf * (pf + 1.0) * lp) / (1.0 - x * x);
                    (dlp, d2)
                });
                nodes.push(x);
            }
            nodes.push(1.0);
            for &x in &nodes {
                let (lp, _) = legendre(p, x);
                weights.push(2.0 / (pf * (pf + 1.0) * lp * lp));
            }
        }
        QuadKind::Glr => {
            // interior nodes are the roots of P_{n-1} + P_n other than −1
            nodes.push(-1.0);
            for i in 1..n {
                let guess = -(2.0 * std::f64::consts::PI * i as f64 / (2.0 * nf - 1.0)).cos();
                let x = newton(guess, |x| {
                    let (a, da) = legendre(n - 1, x);
                    let (b, db) = legendre(n, x);
                    (a + b, da + db)
                });
                nodes.push(x);
            }
            weights.push(2.0 / (nf * nf));
            for &x in &nodes[1..] {
                let (lp, _) = legendre(n - 1, x);
                weights.push((1.0 - x) / (nf * nf * lp * lp));
            }
        }
    }

    for w in nodes.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Numerical(format!(
                "{kind} node construction for degree {degree} did not produce increasing nodes"
            )));
        }
    }
    Ok((nodes, weights))
}

/// Barycentric weights of a node set.
fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| xj - xk)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Values `L_i(ξ)` of every Lagrange basis polynomial on `nodes`.
pub fn lagrange_basis(nodes: &[f64], bary: &[f64], xi: f64) -> Vec<f64> {
    if let Some(hit) = nodes.iter().position(|&x| x == xi) {
        let mut out = vec![0.0; nodes.len()];
        out[hit] = 1.0;
        return out;
    }
    let terms: Vec<f64> = nodes
        .iter()
        .zip(bary)
        .map(|(&x, &w)| w / (xi - x))
        .collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / denom).collect()
}

/// Reference-interval operators for one quadrature rule.
///
/// Matrices are stored row-major, `(P + 1) × (P + 1)`.
#[derive(Debug, Clone)]
pub struct Operators1D {
    pub kind: QuadKind,
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `Q_ij = Σ_m h_m L_i(ξ_m) L_j'(ξ_m)`.
    pub q: Vec<f64>,
    /// `D = H⁻¹ Q`, the nodal differentiation matrix.
    pub d: Vec<f64>,
    /// `B = e(1)e(1)ᵀ − e(−1)e(−1)ᵀ`.
    pub b: Vec<f64>,
    /// Lagrange basis evaluated at `ξ = −1`.
    pub e_left: Vec<f64>,
    /// Lagrange basis evaluated at `ξ = +1`.
    pub e_right: Vec<f64>,
    bary: Vec<f64>,
}

impl Operators1D {
    pub fn new(kind: QuadKind, degree: usize) -> Result<Self> {
        let (nodes, weights) = build_rule(kind, degree)?;
        let n = nodes.len();
        let bary = barycentric_weights(&nodes);

        // D_mj = L_j'(ξ_m)
        let mut d = vec![0.0; n * n];
        for m in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if j != m {
                    let v = (bary[j] / bary[m]) / (nodes[m] - nodes[j]);
                    d[m * n + j] = v;
                    diag -= v;
                }
            }
            d[m * n + m] = diag;
        }
        // with L_i(ξ_m) = δ_im the quadrature sum collapses to h_i L_j'(ξ_i)
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] = weights[i] * d[i * n + j];
            }
        }

        let e_left = lagrange_basis(&nodes, &bary, -1.0);
        let e_right = lagrange_basis(&nodes, &bary, 1.0);
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = e_right[i] * e_right[j] - e_left[i] * e_left[j];
            }
        }

        Ok(Self {
            kind,
            degree,
            nodes,
            weights,
            q,
            d,
            b,
            e_left,
            e_right,
            bary,
        })
    }

    /// Number of nodes, `P + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Basis values `L_i(ξ)`.
    pub fn basis_at(&self, xi: f64) -> Vec<f64> {
        lagrange_basis(&self.nodes, &self.bary, xi)
    }

    /// Evaluate the interpolant with nodal values `coeffs` at `ξ`.
    pub fn interpolate_to_point(&self, coeffs: &[f64], xi: f64) -> f64 {
        assert_eq!(coeffs.len(), self.len(), "nodal value count mismatch");
        assert!(xi.abs() <= 1.0 + 1e-14, "reference coordinate {xi} outside [-1, 1]");
        self.basis_at(xi)
            .iter()
            .zip(coeffs)
            .map(|(l, c)| l * c)
            .sum()
    }

    /// Boundary extraction vector for the face at `ξ = −1` (`left`) or `ξ = +1`.
    pub fn endpoint(&self, left: bool) -> &[f64] {
        if left {
            &self.e_left
        } else {
            &self.e_right
        }
    }

    /// Largest entry of `|Q + Qᵀ − B|`.
    pub fn sbp_defect(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r = self.q[i * n + j] + self.q[j * n + i] - self.b[i * n + j];
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

/// Convenience wrapper matching [`Operators1D::new`].
pub fn build_operators(kind: QuadKind, degree: usize) -> Result<Operators1D> {
    Operators1D::new(kind, degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn monomial_integral(k: usize) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            2.0 / (k as f64 + 1.0)
        }
    }

    #[test]
    fn gll_degree_one_is_trapezoid() {
        let (x, w) = build_rule(QuadKind::Gll, 1).unwrap();
        assert_eq!(x, vec![-1.0, 1.0]);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gl_degree_one_matches_bisection_roots_of_p2() {
        // independent oracle: bisection on P_2(x) = (3x² − 1)/2 in explicit form
        let p2 = |x: f64| 0.5 * (3.0 * x * x - 1.0);
        let bisect = |mut a: f64, mut b: f64| {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if p2(a) * p2(m) <= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            0.5 * (a + b)
        };
        let r1 = bisect(-1.0, 0.0);
        let r2 = bisect(0.0, 1.0);
        let (x, w) = build_rule(QuadKind::Gl, 1).unwrap();
        assert_abs_diff_eq!(x[0], r1, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], r2, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gll_degree_two_is_simpson() {
        let (x, w) = build_rule(QuadKind::Gll, 2).unwrap();
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 1.0 / 3.0, epsilon = 1e-15);
        for k in 0..=3 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            assert_abs_diff_eq!(s, monomial_integral(k), epsilon = 1e-15);
        }
    }

    #[test]
    fn exactness_and_sbp_for_all_kinds() {
        for kind in QuadKind::ALL {
            for p in 1..=8 {
                let ops = Operators1D::new(kind, p).unwrap();
                let sum: f64 = ops.weights.iter().sum();
                assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-13);
                assert!(ops.weights.iter().all(|&w| w > 0.0));
                for k in 0..=kind.exactness_degree(p) {
                    let s: f64 = ops
                        .nodes
                        .iter()
                        .zip(&ops.weights)
                        .map(|(x, w)| w * x.powi(k as i32))
                        .sum();
                    assert!(
                        (s - monomial_integral(k)).abs() <= 1e-12,
                        "{kind} P={p} k={k}: {s}"
                    );
                }
                // one degree beyond is not exact
                let k = kind.exactness_degree(p) + 1;
                let s: f64 = ops
                    .nodes
                    .iter()
                    .zip(&ops.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                assert!((s - monomial_integral(k)).abs() > 1e-10, "{kind} P={p}");
                assert!(ops.sbp_defect() <= 1e-12, "{kind} P={p}: {}", ops.sbp_defect());
            }
        }
    }

    #[test]
    fn endpoint_membership() {
        for p in 1..=8 {
            let gll = build_rule(QuadKind::Gll, p).unwrap().0;
            assert_eq!(gll[0], -1.0);
            assert_eq!(gll[p], 1.0);
            let glr = build_rule(QuadKind::Glr, p).unwrap().0;
            assert_eq!(glr[0], -1.0);
            assert!(glr[p] < 1.0);
            let gl = build_rule(QuadKind::Gl, p).unwrap().0;
            assert!(gl[0] > -1.0 && gl[p] < 1.0);
        }
    }

    #[test]
    fn symmetry_of_node_sets() {
        for p in 1..=8 {
            for kind in [QuadKind::Gll, QuadKind::Gl] {
                let x = build_rule(kind, p).unwrap().0;
                for i in 0..=p {
                    assert_abs_diff_eq!(x[i], -x[p - i], epsilon = 1e-14);
                }
            }
            let x = build_rule(QuadKind::Glr, p).unwrap().0;
            assert!((x[0] + x[p]).abs() > 1e-3);
        }
    }

    #[test]
    fn rejects_unsupported_degree() {
        assert!(matches!(build_rule(QuadKind::Gl, 0), Err(Error::Config(_))));
        assert!(matches!(build_rule(QuadKind::Gll, 13), Err(Error::Config(_))));
        assert!(build_rule(QuadKind::Glr, 12).is_ok());
    }

    #[test]
    fn gll_linear_operators() {
        let ops = Operators1D::new(QuadKind::Gll, 1).unwrap();
        let expected = [-0.5, 0.5, -0.5, 0.5];
        for (a, b) in ops.d.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let ops = Operators1D::new(QuadKind::Gll, 2).unwrap();
        let b_expected = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        for (a, b) in ops.b.iter().zip(b_expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn cardinality_and_derivative_exactness() {
        for kind in QuadKind::ALL {
            for p in 1..=8 {
                let ops = Operators1D::new(kind, p).unwrap();
                let n = ops.len();
                for m in 0..n {
                    let l = ops.basis_at(ops.nodes[m]);
                    for (i, v) in l.iter().enumerate() {
                        assert_eq!(*v, if i == m { 1.0 } else { 0.0 });
                    }
                }
                for k in 0..=p {
                    let f: Vec<f64> = ops.nodes.iter().map(|x| x.powi(k as i32)).collect();
                    for m in 0..n {
                        let df: f64 = (0..n).map(|j| ops.d[m * n + j] * f[j]).sum();
                        let exact = if k == 0 {
                            0.0
                        } else {
                            k as f64 * ops.nodes[m].powi(k as i32 - 1)
                        };
                        assert!((df - exact).abs() < 1e-11, "{kind} P={p} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let ops = Operators1D::new(QuadKind::Gll, 2).unwrap();
        assert_abs_diff_eq!(ops.interpolate_to_point(&[3.0; 3], 0.37), 3.0, epsilon = 1e-15);
        let sq: Vec<f64> = ops.nodes.iter().map(|x| x * x).collect();
        assert_abs_diff_eq!(ops.interpolate_to_point(&sq, 0.5), 0.25, epsilon = 1e-15);

        let ops = Operators1D::new(QuadKind::Gl, 4).unwrap();
        let cube: Vec<f64> = ops.nodes.iter().map(|x| x.powi(3)).collect();
        assert_abs_diff_eq!(ops.interpolate_to_point(&cube, 1.0), 1.0, epsilon = 1e-13);
        assert!(ops.sbp_defect() <= 1e-12);
        // GL extraction vectors are dense
        assert!(ops.e_left.iter().all(|v| v.abs() > 1e-3));
    }
}
