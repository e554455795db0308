//! Taylor-type (ADER) single-step time integration.
//!
//! For the linear system `q' = A q + s(t)`, successive time derivatives obey
//! `q⁽ᵏ⁺¹⁾ = A q⁽ᵏ⁾ + s⁽ᵏ⁾(t)`, and one step is the truncated Taylor series
//! `q(t + Δt) = Σ_{k=0..K} Δtᵏ/k! q⁽ᵏ⁾`.

use crate::dgsem::{check_finite, RhsContext};
use crate::error::{Error, Result};
use crate::layout::State;

/// Stable step size `CFL · h_min / ((2P + 1) c_max)`.
pub fn cfl_dt(cfl: f64, degree: usize, c_max: f64, min_size: f64) -> f64 {
    cfl * min_size / ((2 * degree + 1) as f64 * c_max)
}

#[derive(Debug, Clone)]
pub struct TimeStepper {
    /// Number of Taylor terms beyond the identity.
    pub order: usize,
    pub cfl: f64,
    pub dt: f64,
    pub t: f64,
    deriv: State,
    next: State,
}

impl TimeStepper {
    /// Stepper with `K = P + 1` and `Δt` from [`cfl_dt`] on the context's mesh and material.
    pub fn new(ctx: &RhsContext, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0) {
            return Err(Error::config(format!("cfl = {cfl} must be positive")));
        }
        let dt = cfl_dt(
            cfl,
            ctx.layout.degree(),
            ctx.material.max_wave_speed(),
            ctx.layout.mesh().min_size(),
        );
        Self::with_dt(ctx, ctx.layout.degree() + 1, dt, cfl)
    }

    pub fn with_dt(ctx: &RhsContext, order: usize, dt: f64, cfl: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("time step {dt} must be positive")));
        }
        Ok(Self {
            order,
            cfl,
            dt,
            t: 0.0,
            deriv: State::zeros(&ctx.layout),
            next: State::zeros(&ctx.layout),
        })
    }

    /// Advance `state` by one step of size `dt` in place.
    pub fn step(&mut self, ctx: &RhsContext, state: &mut State) -> Result<()> {
        check_finite(state, self.t)?;
        self.deriv.data.copy_from_slice(&state.data);
        let mut factor = 1.0;
        for k in 0..self.order {
            ctx.apply(&self.deriv, &mut self.next);
            ctx.add_source(&mut self.next, k, self.t);
            std::mem::swap(&mut self.deriv, &mut self.next);
            factor *= self.dt / (k + 1) as f64;
            for (q, d) in state.data.iter_mut().zip(&self.deriv.data) {
                *q += factor * d;
            }
        }
        self.t += self.dt;
        check_finite(state, self.t)
    }
}
