//! Quick operator and energy property checks, runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ader::TimeStepper;
use crate::analysis::{assemble_global_operator, energy_rate, mat_vec, spectral_abscissa};
use crate::dgsem::RhsContext;
use crate::error::Result;
use crate::flux::BoundarySpec;
use crate::layout::{Field, Layout, State};
use crate::mesh::{Material, Mesh};
use crate::pml::PmlConfig;
use crate::quadrature::{Operators1D, QuadKind};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= tolerance,
        worst,
        tolerance,
    }
}

/// Random physical fields in `[−1, 1]`; auxiliary fields stay zero.
pub fn random_state(layout: &Layout, rng: &mut ChaCha8Rng) -> State {
    let mut s = State::zeros(layout);
    for f in Field::all(layout.dim()) {
        if matches!(f, Field::Sigma | Field::Psi) {
            continue;
        }
        for g in 0..layout.field_len() {
            s.set(f, g, rng.gen_range(-1.0..=1.0));
        }
    }
    s
}

fn context(bounds: &[(f64, f64)], size: f64, kind: QuadKind, degree: usize, r: f64) -> Result<RhsContext> {
    let mesh = Mesh::uniform(bounds, &vec![size; bounds.len()])?;
    let layout = Layout::new(mesh, kind, degree)?;
    let material = Material::constant(1.484, 1.0, layout.field_len())?;
    RhsContext::new(layout, material, PmlConfig::none(), BoundarySpec::uniform(r), None)
}

/// Largest quadrature error over monomials up to the exactness degree, and largest SBP defect.
pub fn operator_defects(max_degree: usize) -> Result<(f64, f64)> {
    let (mut quad, mut sbp) = (0.0f64, 0.0f64);
    for kind in QuadKind::ALL {
        for p in 1..=max_degree {
            let ops = Operators1D::new(kind, p)?;
            sbp = sbp.max(ops.sbp_defect());
            for k in 0..=kind.exactness_degree(p) {
                let exact = if k % 2 == 0 { 2.0 / (k + 1) as f64 } else { 0.0 };
                let q: f64 = ops.nodes.iter().zip(&ops.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                quad = quad.max((q - exact).abs());
            }
        }
    }
    Ok((quad, sbp))
}

/// Worst relative mismatch between `2⟨q, Aq⟩` and minus the face dissipation, zero damping.
pub fn energy_rate_mismatch(seed: u64, samples: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for kind in QuadKind::ALL {
        for r in [-1.0, 0.0, 1.0] {
            let ctx = context(&[(0.0, 2.0), (0.0, 1.0)], 0.5, kind, 3, r)?;
            for _ in 0..samples {
                let q = random_state(&ctx.layout, &mut rng);
                let rate = ctx.rhs(&q, 0.0)?;
                let chain = energy_rate(&ctx, &q, &rate);
                let faces = -ctx.dissipation(&q).total();
                worst = worst.max((chain - faces).abs() / chain.abs().max(faces.abs()));
            }
        }
    }
    Ok(worst)
}

/// Worst relative difference between the assembled operator and the matrix-free right-hand side.
pub fn operator_mismatch(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for kind in QuadKind::ALL {
        let ctx = context(&[(0.0, 2.0), (0.0, 1.0)], 1.0, kind, 2, 0.0)?;
        let a = assemble_global_operator(&ctx)?;
        for _ in 0..5 {
            let q = random_state(&ctx.layout, &mut rng);
            let direct = ctx.rhs(&q, 0.0)?;
            let via = mat_vec(&a, &q.data);
            let scale = direct.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = direct.data.iter().zip(&via).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            worst = worst.max(diff / scale);
        }
    }
    Ok(worst)
}

/// One time step against the truncated exponential series `Σ (Δt A)ᵏ/k!` applied to a random state.
pub fn step_polynomial_mismatch(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = context(&[(0.0, 2.0), (0.0, 1.0)], 1.0, QuadKind::Gll, 3, 0.5)?;
    let a = assemble_global_operator(&ctx)?;
    let q0 = random_state(&ctx.layout, &mut rng);
    let mut stepper = TimeStepper::new(&ctx, 0.35)?;
    let mut q = q0.clone();
    stepper.step(&ctx, &mut q)?;
    let mut term = q0.data.clone();
    let mut series = q0.data.clone();
    for k in 1..=stepper.order {
        term = mat_vec(&a, &term).into_iter().map(|v| v * stepper.dt / k as f64).collect();
        for (s, t) in series.iter_mut().zip(&term) {
            *s += t;
        }
    }
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(q.data.iter().zip(&series).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale)
}

/// Spectral abscissa over `‖A‖` of the undamped upwind operator with absorbing boundaries.
pub fn upwind_abscissa() -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for kind in QuadKind::ALL {
        let ctx = context(&[(0.0, 2.0), (0.0, 1.0)], 1.0, kind, 2, 0.0)?;
        let report = spectral_abscissa(&assemble_global_operator(&ctx)?)?;
        worst = worst.max(report.abscissa / report.norm);
    }
    Ok(worst)
}

/// Every check with its tolerance.
pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    let (quad, sbp) = operator_defects(8)?;
    Ok(vec![
        check("quadrature_exactness", quad, 1e-12),
        check("sbp_identity", sbp, 1e-12),
        check("energy_rate_identity", energy_rate_mismatch(seed, 5)?, 1e-10),
        check("operator_matches_rhs", operator_mismatch(seed)?, 1e-12),
        check("step_matches_taylor_polynomial", step_polynomial_mismatch(seed)?, 1e-12),
        check("upwind_spectrum_dissipative", upwind_abscissa()?, 1e-10),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_all(7).unwrap() {
            assert!(c.passed, "{} worst {:e} > {:e}", c.name, c.worst, c.tolerance);
        }
    }
}
