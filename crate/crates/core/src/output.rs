//! CSV time series, receiver traces and legacy-ASCII VTK snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::EnergyReport;
use crate::error::Result;
use crate::layout::{Field, Layout, State};

/// Sampled pressure at one receiver, with the free-space solution when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverTrace {
    pub location: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub exact: Option<Vec<f64>>,
}

const FACE_NAMES: [[&str; 2]; 3] = [["x_minus", "x_plus"], ["y_minus", "y_plus"], ["z_minus", "z_plus"]];

/// Columns `t_s, energy, linf_p, diss_interior, diss_<face>...` (one per outer face).
pub fn timeseries_csv(series: &[EnergyReport], dim: usize) -> String {
    let mut out = String::from("t_s,energy,linf_p,diss_interior");
    for names in FACE_NAMES.iter().take(dim) {
        for n in names {
            write!(out, ",diss_{n}").unwrap();
        }
    }
    out.push('\n');
    for r in series {
        write!(out, "{:e},{:e},{:e}", r.t, r.energy, r.linf_p).unwrap();
        match &r.dissipation {
            Some(d) => {
                write!(out, ",{:e}", d.interior).unwrap();
                for a in 0..dim {
                    for s in 0..2 {
                        write!(out, ",{:e}", d.outer_face(a, s)).unwrap();
                    }
                }
            }
            None => out.push_str(&",".repeat(1 + 2 * dim)),
        }
        out.push('\n');
    }
    out
}

/// Columns `t_s, r<i>_p[, r<i>_exact]` for every receiver.
pub fn receivers_csv(traces: &[ReceiverTrace]) -> String {
    let mut out = String::from("t_s");
    for (i, tr) in traces.iter().enumerate() {
        write!(out, ",r{i}_p").unwrap();
        if tr.exact.is_some() {
            write!(out, ",r{i}_exact").unwrap();
        }
    }
    out.push('\n');
    let Some(first) = traces.first() else {
        return out;
    };
    for k in 0..first.t.len() {
        write!(out, "{:e}", first.t[k]).unwrap();
        for tr in traces {
            write!(out, ",{:e}", tr.p[k]).unwrap();
            if let Some(ex) = &tr.exact {
                write!(out, ",{:e}", ex[k]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Legacy-ASCII VTK structured grid through every nodal point, with scalars `p` and `abs_p`.
///
/// Grid index `I = l·(P+1) + i` along each axis, x fastest; in 2D the grid has one z layer.
pub fn vtk_snapshot(layout: &Layout, state: &State, t: f64) -> String {
    let dim = layout.dim();
    let np = layout.np();
    let counts = layout.mesh().counts();
    let npe = layout.nodes_per_element();
    let dims: Vec<usize> = (0..3).map(|a| if a < dim { counts[a] * np } else { 1 }).collect();
    let total = dims[0] * dims[1] * dims[2];
    let mut order = Vec::with_capacity(total);
    for gk in 0..dims[2] {
        for gj in 0..dims[1] {
            for gi in 0..dims[0] {
                let g = [gi, gj, gk];
                let mut lmn = [0; 3];
                let mut local = 0;
                let mut stride = 1;
                for a in 0..dim {
                    lmn[a] = g[a] / np;
                    local += (g[a] % np) * stride;
                    stride *= np;
                }
                order.push(layout.mesh().flat_index(lmn) * npe + local);
            }
        }
    }
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "pressure t_s={t:e}").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET STRUCTURED_GRID").unwrap();
    writeln!(out, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2]).unwrap();
    writeln!(out, "POINTS {total} double").unwrap();
    for &g in &order {
        let x = layout.node_coords(g);
        writeln!(out, "{:e} {:e} {:e}", x[0], x[1], x[2]).unwrap();
    }
    writeln!(out, "POINT_DATA {total}").unwrap();
    let p = state.field_values(Field::Pressure);
    for (name, f) in [("p", (|v: f64| v) as fn(f64) -> f64), ("abs_p", f64::abs)] {
        writeln!(out, "SCALARS {name} double 1").unwrap();
        writeln!(out, "LOOKUP_TABLE default").unwrap();
        for &g in &order {
            writeln!(out, "{:e}", f(p[g])).unwrap();
        }
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}
