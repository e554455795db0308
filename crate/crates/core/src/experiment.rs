//! Running configured experiments and PML convergence studies.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ader::{cfl_dt, TimeStepper};
use crate::analysis::{analytic_point_pressure, energy_report, linf_error_vs_reference, node_mask, EnergyReport};
use crate::config::{Derived, ExperimentConfig, InitialCondition};
use crate::dgsem::RhsContext;
use crate::error::{Error, Result};
use crate::layout::{Field, State};
use crate::mesh::Axis;
use crate::output::{receivers_csv, timeseries_csv, vtk_snapshot, write_file, ReceiverTrace};
use crate::pml::interior_extent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// `max |p|` passed `blowup_threshold`; the run stopped there.
    BlowupThreshold,
    NumericalFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: &'static str,
    pub derived: Derived,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub steps_taken: usize,
    pub final_t_s: f64,
    pub initial_linf_p: f64,
    pub max_linf_p: f64,
    pub final_linf_p: f64,
    pub final_energy: f64,
}

/// Everything a run produces; files are written as well when `output_dir` is set.
#[derive(Debug, Clone)]
pub struct Run {
    pub ctx: RhsContext,
    pub state: State,
    pub summary: RunSummary,
    pub series: Vec<EnergyReport>,
    pub receivers: Vec<ReceiverTrace>,
}

/// Nodal initial data described by `cfg`.
pub fn initial_state(cfg: &ExperimentConfig, ctx: &RhsContext) -> State {
    let layout = &ctx.layout;
    let mut s = State::zeros(layout);
    match cfg.initial_condition {
        InitialCondition::Zero => {}
        InitialCondition::Gaussian => {
            let c = &cfg.gaussian_center_km;
            let w = cfg.gaussian_width_km2;
            s.fill(layout, Field::Pressure, |x| {
                let r2: f64 = c.iter().zip(x).map(|(a, b)| (b - a).powi(2)).sum();
                (-std::f64::consts::LN_2 * r2 / w).exp()
            });
        }
        InitialCondition::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut fields = vec![Field::Pressure];
            fields.extend((0..layout.dim()).map(|a| Field::Velocity(Axis::from_index(a))));
            for f in fields {
                for g in 0..layout.field_len() {
                    s.set(f, g, rng.gen_range(-1.0..=1.0));
                }
            }
        }
    }
    s
}

/// Step count and step size that land exactly on `t_final_s` without exceeding the CFL step.
pub fn time_grid(cfg: &ExperimentConfig, ctx: &RhsContext) -> (usize, f64) {
    let dt_max = cfg.dt_s.unwrap_or_else(|| {
        cfl_dt(
            cfg.cfl,
            ctx.layout.degree(),
            ctx.material.max_wave_speed(),
            ctx.layout.mesh().min_size(),
        )
    });
    if cfg.t_final_s <= 0.0 {
        return (0, dt_max);
    }
    let steps = (cfg.t_final_s / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (steps, cfg.t_final_s / steps as f64)
}

pub fn derived(cfg: &ExperimentConfig, ctx: &RhsContext) -> Result<Derived> {
    let (tol, d0) = cfg.damping_strength()?;
    let (steps, dt) = time_grid(cfg, ctx);
    Ok(Derived {
        tol,
        d0_per_s: d0,
        dt_s: dt,
        steps,
        dof: ctx.state_len(),
    })
}

struct Receiver {
    element: usize,
    reference: Vec<f64>,
}

/// Run one experiment to `t_final_s`.
///
/// A non-finite state ends the run with [`Error::Numerical`] after the partial
/// outputs and a failure record have been written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Run> {
    let ctx = cfg.build_context()?;
    let derived = derived(cfg, &ctx)?;
    let out_dir = cfg.output_dir.as_ref().map(PathBuf::from);
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
        write_file(&dir.join("config_effective.json"), &cfg.to_json())?;
    }

    let mut state = initial_state(cfg, &ctx);
    let mut stepper = TimeStepper::with_dt(&ctx, ctx.layout.degree() + 1, derived.dt_s, cfg.cfl)?;

    let located: Vec<Receiver> = cfg
        .receivers_km
        .iter()
        .map(|r| {
            ctx.layout
                .mesh()
                .locate(r, false)
                .map(|(element, reference)| Receiver { element, reference })
        })
        .collect::<Result<_>>()?;
    let exact_known = ctx.source.is_some() && ctx.layout.dim() == 3;
    let mut receivers: Vec<ReceiverTrace> = cfg
        .receivers_km
        .iter()
        .map(|loc| ReceiverTrace {
            location: loc.clone(),
            t: Vec::new(),
            p: Vec::new(),
            exact: exact_known.then(Vec::new),
        })
        .collect();
    let sample = |state: &State, t: f64, receivers: &mut Vec<ReceiverTrace>| -> Result<()> {
        for (tr, rc) in receivers.iter_mut().zip(&located) {
            tr.t.push(t);
            tr.p.push(
                ctx.layout
                    .interpolate(state.element_field(Field::Pressure, rc.element), &rc.reference),
            );
            if let (Some(ex), Some(src)) = (tr.exact.as_mut(), ctx.source.as_ref()) {
                // the closed form belongs to unit negative forcing
                let unit = analytic_point_pressure(
                    &tr.location,
                    &src.spec.location,
                    t,
                    cfg.wave_speed_km_s,
                    &src.spec.wavelet,
                )?;
                ex.push(-src.spec.amplitude * unit);
            }
        }
        Ok(())
    };

    let mut snapshots: Vec<(f64, bool)> = cfg.snapshot_times_s.iter().map(|&t| (t, false)).collect();
    let mut write_due_snapshots = |state: &State, t: f64, dt: f64| -> Result<()> {
        if let Some(dir) = &out_dir {
            for (idx, (ts, done)) in snapshots.iter_mut().enumerate() {
                if !*done && t >= *ts - 0.5 * dt {
                    write_file(&dir.join(format!("snapshot_{idx:04}.vtk")), &vtk_snapshot(&ctx.layout, state, t))?;
                    *done = true;
                }
            }
        }
        Ok(())
    };

    let mut series = vec![energy_report(&ctx, &state, 0.0, true)];
    sample(&state, 0.0, &mut receivers)?;
    write_due_snapshots(&state, 0.0, derived.dt_s)?;
    let initial_linf = series[0].linf_p;
    let mut max_linf = initial_linf;
    let mut status = RunStatus::Completed;
    let mut failure = None;
    let mut steps_taken = 0;

    for n in 1..=derived.steps {
        if let Err(e) = stepper.step(&ctx, &mut state) {
            status = RunStatus::NumericalFailure;
            failure = Some(e.to_string());
            break;
        }
        steps_taken = n;
        let t = n as f64 * derived.dt_s;
        stepper.t = t;
        sample(&state, t, &mut receivers)?;
        let linf = state.max_abs(Field::Pressure);
        max_linf = max_linf.max(linf);
        let blown = cfg.blowup_threshold.is_some_and(|b| linf > b);
        let every = cfg.output_every_steps;
        if n == derived.steps || blown || (every > 0 && n % every == 0) {
            series.push(energy_report(&ctx, &state, t, true));
        }
        write_due_snapshots(&state, t, derived.dt_s)?;
        if blown {
            status = RunStatus::BlowupThreshold;
            break;
        }
    }

    let final_t = steps_taken as f64 * derived.dt_s;
    let finite = status != RunStatus::NumericalFailure;
    let summary = RunSummary {
        experiment: cfg.experiment.name(),
        derived,
        status,
        failure: failure.clone(),
        steps_taken,
        final_t_s: final_t,
        initial_linf_p: initial_linf,
        max_linf_p: max_linf,
        final_linf_p: if finite { state.max_abs(Field::Pressure) } else { f64::NAN },
        final_energy: if finite {
            crate::analysis::discrete_energy(&ctx, &state)
        } else {
            f64::NAN
        },
    };
    if let Some(dir) = &out_dir {
        write_outputs(dir, &ctx, &series, &receivers, &summary)?;
    }
    if let Some(msg) = failure {
        return Err(Error::Numerical(msg));
    }
    Ok(Run {
        ctx,
        state,
        summary,
        series,
        receivers,
    })
}

fn write_outputs(
    dir: &Path,
    ctx: &RhsContext,
    series: &[EnergyReport],
    receivers: &[ReceiverTrace],
    summary: &RunSummary,
) -> Result<()> {
    write_file(&dir.join("timeseries.csv"), &timeseries_csv(series, ctx.dim()))?;
    if !receivers.is_empty() {
        write_file(&dir.join("receivers.csv"), &receivers_csv(receivers))?;
    }
    write_file(&dir.join("summary.json"), &serde_json::to_string_pretty(summary)?)
}

/// Relative L² misfit `‖p − p_exact‖ / ‖p_exact‖` of a trace over `[t0, t1]`,
/// with the denominator taken over `norm_window`.
pub fn trace_misfit(trace: &ReceiverTrace, window: (f64, f64), norm_window: (f64, f64)) -> Option<f64> {
    let exact = trace.exact.as_ref()?;
    let inside = |t: f64, w: (f64, f64)| t >= w.0 && t <= w.1;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..trace.t.len() {
        if inside(trace.t[k], window) {
            num += (trace.p[k] - exact[k]).powi(2);
        }
        if inside(trace.t[k], norm_window) {
            den += exact[k].powi(2);
        }
    }
    (den > 0.0).then(|| (num / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceMode {
    H,
    P,
}

impl FromStr for ConvergenceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(ConvergenceMode::H),
            "p" => Ok(ConvergenceMode::P),
            other => Err(Error::config(format!("convergence mode must be h or p, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub element_size_km: f64,
    pub degree: usize,
    pub tol: Option<f64>,
    pub d0_per_s: f64,
    pub dt_s: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub mode: ConvergenceMode,
    pub levels: Vec<ConvergenceLevel>,
    /// Least-squares slope of `ln e` against `ln Δx` (h mode only).
    pub observed_order: Option<f64>,
    /// `e_i / e_{i+1}` for consecutive levels.
    pub ratios: Vec<f64>,
    pub strictly_decreasing: bool,
    pub notes: Vec<String>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("element_size_km,degree,tol,d0_per_s,dt_s,error\n");
        for l in &self.levels {
            let tol = l.tol.map(|t| format!("{t:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{:e},{},{},{:e},{:e},{:e}\n",
                l.element_size_km, l.degree, tol, l.d0_per_s, l.dt_s, l.error
            ));
        }
        out
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` when the abscissae have no spread
/// or a value is not positive.
pub fn least_squares_order(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-24 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// The same problem on a domain widened along every PML axis by at least `2 t_final c`,
/// in whole elements, with the layers removed.
pub fn reference_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut r = cfg.clone();
    let dx = cfg.element_size_km;
    let k = (2.0 * cfg.t_final_s * cfg.wave_speed_km_s / dx - 1e-9).ceil().max(0.0);
    let m = k * dx;
    if cfg.pml_x {
        r.x_min_km -= m;
        r.x_max_km += m;
    }
    if cfg.pml_y {
        r.y_min_km -= m;
        r.y_max_km += m;
    }
    if cfg.pml_z {
        r.z_min_km = r.z_min_km.map(|v| v - m);
        r.z_max_km = r.z_max_km.map(|v| v + m);
    }
    r.pml_x = false;
    r.pml_y = false;
    r.pml_z = false;
    r.output_dir = None;
    r.snapshot_times_s.clear();
    r.receivers_km.clear();
    r.blowup_threshold = None;
    r.output_every_steps = 0;
    r
}

/// Final-time pressure error in the region outside the layers, against [`reference_config`].
pub fn interior_pml_error(cfg: &ExperimentConfig) -> Result<(f64, Derived)> {
    let mut quiet = cfg.clone();
    quiet.output_dir = None;
    quiet.snapshot_times_s.clear();
    quiet.output_every_steps = 0;
    let run = run_experiment(&quiet)?;
    let reference = run_experiment(&reference_config(&quiet))?;
    let layout = &run.ctx.layout;
    let active = [cfg.pml_x, cfg.pml_y, cfg.pml_z];
    let mut extents = Vec::new();
    for (a, on) in active.iter().enumerate().take(layout.dim()) {
        if *on {
            extents.push((a, interior_extent(layout.mesh(), Axis::from_index(a), cfg.pml_width_km)?));
        }
    }
    let mask = node_mask(layout, |x| {
        extents
            .iter()
            .all(|&(a, (lo, hi))| x[a] >= lo - 1e-9 && x[a] <= hi + 1e-9)
    });
    let err = linf_error_vs_reference(layout, &run.state, &reference.ctx.layout, &reference.state, &mask);
    Ok((err, run.summary.derived))
}

/// PML error at several resolutions. `levels` are element sizes (h mode) or degrees (p mode).
///
/// Non-monotone errors and undefined orders are reported in the table, not raised.
pub fn convergence_study(base: &ExperimentConfig, mode: ConvergenceMode, levels: &[f64]) -> Result<ConvergenceTable> {
    if levels.len() < 3 {
        return Err(Error::config("a convergence study needs at least 3 levels"));
    }
    let mut rows = Vec::new();
    for &lv in levels {
        let mut cfg = base.clone();
        match mode {
            ConvergenceMode::H => cfg.element_size_km = lv,
            ConvergenceMode::P => {
                if !(lv >= 1.0 && lv.fract() == 0.0) {
                    return Err(Error::config(format!("degree level {lv} is not a positive integer")));
                }
                cfg.degree = lv as usize;
            }
        }
        cfg.validate()?;
        let (error, d) = interior_pml_error(&cfg)?;
        rows.push(ConvergenceLevel {
            element_size_km: cfg.element_size_km,
            degree: cfg.degree,
            tol: d.tol,
            d0_per_s: d.d0_per_s,
            dt_s: d.dt_s,
            error,
        });
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let strictly_decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let mut notes = Vec::new();
    let observed_order = match mode {
        ConvergenceMode::H => {
            let sizes: Vec<f64> = rows.iter().map(|r| r.element_size_km).collect();
            let o = least_squares_order(&sizes, &errors);
            if o.is_none() {
                notes.push("observed order undefined: levels have no spread or an error is zero".into());
            }
            o
        }
        ConvergenceMode::P => None,
    };
    if !strictly_decreasing {
        notes.push("errors do not decrease strictly with refinement".into());
    }
    Ok(ConvergenceTable {
        mode,
        levels: rows,
        observed_order,
        ratios,
        strictly_decreasing,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentId;
    use approx::assert_relative_eq;

    fn small_strip() -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(ExperimentId::Strip2d);
        c.x_min_km = -30.0;
        c.x_max_km = 30.0;
        c.y_max_km = 20.0;
        c.gaussian_center_km = vec![0.0, 10.0];
        c.pml_width_km = 10.0;
        c.degree = 2;
        c.t_final_s = 5.0;
        c
    }

    #[test]
    fn least_squares_examples() {
        let x = [10.0, 5.0, 2.5];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(5)).collect();
        assert_relative_eq!(least_squares_order(&x, &y).unwrap(), 5.0, max_relative = 1e-12);
        assert_eq!(least_squares_order(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(least_squares_order(&[1.0, 2.0], &[0.0, 1.0]), None);
    }

    #[test]
    fn time_grid_lands_on_final_time() {
        let cfg = small_strip();
        let ctx = cfg.build_context().unwrap();
        let (n, dt) = time_grid(&cfg, &ctx);
        let dt_max = cfl_dt(0.35, 2, 1.484, 10.0);
        assert!(dt <= dt_max && dt > 0.9 * dt_max);
        assert_relative_eq!(n as f64 * dt, 5.0, max_relative = 1e-14);
    }

    #[test]
    fn reference_domain_is_widened_in_whole_elements() {
        let cfg = small_strip();
        let r = reference_config(&cfg);
        assert_eq!(r.x_min_km, -50.0);
        assert_eq!(r.x_max_km, 50.0);
        assert_eq!((r.y_min_km, r.y_max_km), (0.0, 20.0));
        assert!(!r.pml_x);
        assert_eq!(r.damping_strength().unwrap().1, 0.0);
    }

    #[test]
    fn run_records_series_and_receivers() {
        let mut cfg = small_strip();
        cfg.receivers_km = vec![vec![5.0, 10.0]];
        cfg.output_every_steps = 3;
        let run = run_experiment(&cfg).unwrap();
        let steps = run.summary.derived.steps;
        assert_eq!(run.summary.status, RunStatus::Completed);
        assert_eq!(run.receivers[0].t.len(), steps + 1);
        assert!(run.receivers[0].exact.is_none());
        assert_eq!(run.series.first().unwrap().t, 0.0);
        assert_relative_eq!(run.series.last().unwrap().t, 5.0, max_relative = 1e-14);
        assert_eq!(run.series.len(), 1 + steps / 3 + usize::from(steps % 3 != 0));
        // receiver at t = 0 samples the initial Gaussian
        assert_relative_eq!(run.receivers[0].p[0], (-std::f64::consts::LN_2 * 25.0 / 9.0).exp(), max_relative = 0.05);
    }

    #[test]
    fn blowup_threshold_stops_the_run() {
        let mut cfg = small_strip();
        cfg.blowup_threshold = Some(0.5);
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.summary.status, RunStatus::BlowupThreshold);
        assert_eq!(run.summary.steps_taken, 1);
    }

    #[test]
    fn random_initial_state_is_seeded() {
        let mut cfg = small_strip();
        cfg.initial_condition = InitialCondition::Random;
        let ctx = cfg.build_context().unwrap();
        let a = initial_state(&cfg, &ctx);
        assert_eq!(a, initial_state(&cfg, &ctx));
        cfg.seed = 1;
        assert_ne!(a, initial_state(&cfg, &ctx));
        assert!(a.element_field(Field::Sigma, 0).iter().all(|&v| v == 0.0));
        assert!(a.max_abs(Field::Pressure) <= 1.0);
    }

    #[test]
    fn misfit_windows() {
        let tr = ReceiverTrace {
            location: vec![0.0; 3],
            t: vec![0.0, 1.0, 2.0, 3.0],
            p: vec![0.0, 1.0, 0.0, 0.5],
            exact: Some(vec![0.0, 1.0, 0.0, 0.0]),
        };
        assert_relative_eq!(trace_misfit(&tr, (0.0, 3.0), (0.0, 3.0)).unwrap(), 0.5);
        assert_eq!(trace_misfit(&tr, (0.0, 2.0), (0.0, 3.0)).unwrap(), 0.0);
        assert_eq!(trace_misfit(&tr, (2.5, 3.0), (2.5, 3.0)), None);
    }

    #[test]
    fn convergence_needs_three_levels() {
        let cfg = small_strip();
        assert!(matches!(
            convergence_study(&cfg, ConvergenceMode::H, &[10.0, 5.0]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            convergence_study(&cfg, ConvergenceMode::P, &[2.0, 2.5, 3.0]),
            Err(Error::Config(_))
        ));
        assert_eq!("p".parse::<ConvergenceMode>().unwrap(), ConvergenceMode::P);
        assert!("q".parse::<ConvergenceMode>().is_err());
    }

    #[test]
    fn degenerate_levels_report_undefined_order() {
        let cfg = small_strip();
        let table = convergence_study(&cfg, ConvergenceMode::H, &[10.0, 10.0, 10.0]).unwrap();
        assert_eq!(table.observed_order, None);
        assert!(!table.strictly_decreasing);
        assert_eq!(table.notes.len(), 2);
        assert!(table.levels[0].error > 0.0);
        assert!(table.ratios.iter().all(|&r| r == 1.0));
    }
}
