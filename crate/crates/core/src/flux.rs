//! Characteristic variables, hat states and flux fluctuations on element faces.
//!
//! Sign conventions: at a face with outward normal pointing in the negative
//! coordinate direction ("left" face) the incoming characteristic is
//! `½(Z v_n + p)` and the penalty is `F`; at a "right" face the incoming
//! characteristic is `½(Z v_n − p)` and the penalty is `G`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which end of an element (or of the domain) a face sits on along its axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Lower coordinate end, reference coordinate `−1`.
    Left,
    /// Upper coordinate end, reference coordinate `+1`.
    Right,
}

impl Side {
    pub fn from_index(i: usize) -> Side {
        if i == 0 {
            Side::Left
        } else {
            Side::Right
        }
    }
}

/// Reflection coefficients on the six (four in 2D) outer faces.
///
/// `r = 0` is absorbing, `r = 1` forces `p = 0`, `r = −1` forces `v_n = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// `[axis][side]`, side 0 = lower face.
    pub r: [[f64; 2]; 3],
}

impl BoundarySpec {
    pub fn uniform(r: f64) -> Self {
        Self { r: [[r; 2]; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        for (a, pair) in self.r.iter().enumerate() {
            for (s, r) in pair.iter().enumerate() {
                if !(r.abs() <= 1.0) {
                    return Err(Error::config(format!(
                        "reflection coefficient r_{}{} = {r} violates |r| <= 1",
                        ["x", "y", "z"][a],
                        ["-", "+"][s]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, axis: usize, side: Side) -> f64 {
        self.r[axis][match side {
            Side::Left => 0,
            Side::Right => 1,
        }]
    }
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::uniform(0.0)
    }
}

/// Single-valued face state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceState {
    pub p: f64,
    pub vn: f64,
}

/// Characteristic pair `(½(Z v_n + p), ½(Z v_n − p))`.
#[inline]
pub fn characteristics(p: f64, vn: f64, z: f64) -> (f64, f64) {
    (0.5 * (z * vn + p), 0.5 * (z * vn - p))
}

/// Hat state at an interior face between a lower ("minus") and upper ("plus") element.
///
/// Enforces continuity of pressure and normal velocity while preserving the
/// characteristic leaving each side.
#[inline]
pub fn interface_hat(p_m: f64, vn_m: f64, z_m: f64, p_p: f64, vn_p: f64, z_p: f64) -> TraceState {
    let zs = z_m + z_p;
    TraceState {
        vn: (z_m * vn_m + z_p * vn_p + p_m - p_p) / zs,
        p: (z_p * p_m + z_m * p_p + z_m * z_p * (vn_m - vn_p)) / zs,
    }
}

/// Hat state at an outer face with reflection coefficient `r`.
#[inline]
pub fn boundary_hat(p: f64, vn: f64, z: f64, r: f64, side: Side) -> TraceState {
    match side {
        Side::Right => {
            let q = z * vn + p;
            TraceState {
                p: 0.5 * (1.0 - r) * q,
                vn: 0.5 * (1.0 + r) * q / z,
            }
        }
        Side::Left => {
            let q = z * vn - p;
            TraceState {
                p: -0.5 * (1.0 - r) * q,
                vn: 0.5 * (1.0 + r) * q / z,
            }
        }
    }
}

/// Flux fluctuation of the element data against the hat state: `F` on a left
/// face, `G` on a right face.
#[inline]
pub fn fluctuation(p: f64, vn: f64, z: f64, hat: TraceState, side: Side) -> f64 {
    let dv = z * (vn - hat.vn);
    let dp = p - hat.p;
    match side {
        Side::Left => 0.5 * (dv + dp),
        Side::Right => 0.5 * (dv - dp),
    }
}

/// Characteristic leaving the domain through an outer face (preserved by [`boundary_hat`]).
#[inline]
pub fn outgoing_characteristic(p: f64, vn: f64, z: f64, side: Side) -> f64 {
    let (minus, plus) = characteristics(p, vn, z);
    match side {
        Side::Left => plus,
        Side::Right => minus,
    }
}
