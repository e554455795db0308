//! Flat JSON experiment configuration with named presets.
//!
//! A file holds one JSON object. The `experiment` key selects a preset
//! (`strip2d`, `wholespace2d`, `pointsource3d` or `custom`); every other key
//! overrides one field of that preset. Units are part of the key names.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dgsem::RhsContext;
use crate::error::{Error, Result};
use crate::flux::BoundarySpec;
use crate::layout::Layout;
use crate::mesh::{Material, Mesh};
use crate::pml::{compute_d0, compute_tol_clamped, DampingMode, PmlConfig};
use crate::quadrature::QuadKind;
use crate::source::{GaussianWavelet, PointSourceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Strip2d,
    Wholespace2d,
    Pointsource3d,
    Custom,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Strip2d => "strip2d",
            ExperimentId::Wholespace2d => "wholespace2d",
            ExperimentId::Pointsource3d => "pointsource3d",
            ExperimentId::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    /// `p = exp(−ln 2 · |x − center|² / width)`, other fields zero.
    Gaussian,
    /// Uniform random values in `[−1, 1]` for `p` and the velocities, from `seed`.
    Random,
}

/// Every setting of one run. Serialized form is the flat JSON accepted by [`ExperimentConfig::from_json`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub x_min_km: f64,
    pub x_max_km: f64,
    pub y_min_km: f64,
    pub y_max_km: f64,
    /// `null` for a 2D run.
    pub z_min_km: Option<f64>,
    pub z_max_km: Option<f64>,
    pub element_size_km: f64,
    pub degree: usize,
    pub quadrature: QuadKind,
    pub wave_speed_km_s: f64,
    pub density_g_cm3: f64,
    pub r_x_minus: f64,
    pub r_x_plus: f64,
    pub r_y_minus: f64,
    pub r_y_plus: f64,
    pub r_z_minus: f64,
    pub r_z_plus: f64,
    pub pml_width_km: f64,
    pub pml_x: bool,
    pub pml_y: bool,
    pub pml_z: bool,
    /// Explicit damping strength; when `null` it follows from `pml_tol`.
    pub pml_d0_per_s: Option<f64>,
    /// Relative PML error; when `null` it follows from the `pml_c0` error model.
    pub pml_tol: Option<f64>,
    pub pml_c0: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub damping_mode: DampingMode,
    pub allow_unstable: bool,
    pub t_final_s: f64,
    pub cfl: f64,
    /// Overrides the CFL step when set.
    pub dt_s: Option<f64>,
    pub initial_condition: InitialCondition,
    pub gaussian_center_km: Vec<f64>,
    pub gaussian_width_km2: f64,
    /// Point-source location; `null` disables the source.
    pub source_location_km: Option<Vec<f64>>,
    pub source_t0_s: f64,
    pub source_sigma0_s: f64,
    pub source_amplitude: f64,
    pub receivers_km: Vec<Vec<f64>>,
    /// `null` disables file output.
    pub output_dir: Option<String>,
    /// Time-series row every this many steps (0 = first and last step only).
    pub output_every_steps: usize,
    pub snapshot_times_s: Vec<f64>,
    /// Stop early once `max|p|` exceeds this value (`null` = never).
    pub blowup_threshold: Option<f64>,
    pub seed: u64,
}

/// Derived quantities echoed next to the outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derived {
    pub tol: Option<f64>,
    pub d0_per_s: f64,
    pub dt_s: f64,
    pub steps: usize,
    pub dof: usize,
}

impl ExperimentConfig {
    pub fn preset(id: ExperimentId) -> Self {
        let base = Self {
            experiment: id,
            x_min_km: -60.0,
            x_max_km: 60.0,
            y_min_km: 0.0,
            y_max_km: 50.0,
            z_min_km: None,
            z_max_km: None,
            element_size_km: 10.0,
            degree: 4,
            quadrature: QuadKind::Gll,
            wave_speed_km_s: 1.484,
            density_g_cm3: 1.0,
            r_x_minus: 0.0,
            r_x_plus: 0.0,
            r_y_minus: 0.0,
            r_y_plus: 0.0,
            r_z_minus: 0.0,
            r_z_plus: 0.0,
            pml_width_km: 10.0,
            pml_x: true,
            pml_y: false,
            pml_z: false,
            pml_d0_per_s: Some(8.0),
            pml_tol: None,
            pml_c0: 10.0,
            omega_y: 1.0,
            omega_z: 1.0,
            damping_mode: DampingMode::Nodal,
            allow_unstable: false,
            t_final_s: 500.0,
            cfl: 0.35,
            dt_s: None,
            initial_condition: InitialCondition::Gaussian,
            gaussian_center_km: vec![0.0, 25.0],
            gaussian_width_km2: 9.0,
            source_location_km: None,
            source_t0_s: 0.7,
            source_sigma0_s: 0.1149,
            source_amplitude: -1.0,
            receivers_km: Vec::new(),
            output_dir: None,
            output_every_steps: 1,
            snapshot_times_s: Vec::new(),
            blowup_threshold: None,
            seed: 0,
        };
        match id {
            ExperimentId::Strip2d => base,
            ExperimentId::Wholespace2d => Self {
                y_min_km: -10.0,
                y_max_km: 60.0,
                element_size_km: 5.0,
                pml_y: true,
                pml_d0_per_s: None,
                ..base
            },
            ExperimentId::Pointsource3d => Self {
                x_min_km: 0.0,
                x_max_km: 5.0,
                y_min_km: 0.0,
                y_max_km: 5.0,
                z_min_km: Some(0.0),
                z_max_km: Some(5.0),
                element_size_km: 5.0 / 9.0,
                quadrature: QuadKind::Gl,
                pml_width_km: 0.55,
                pml_y: true,
                pml_z: true,
                pml_d0_per_s: None,
                pml_tol: Some(1e-3),
                t_final_s: 10.0,
                // fifth-order Taylor stepping is unstable at 0.35 on 3D meshes
                cfl: 0.25,
                initial_condition: InitialCondition::Zero,
                source_location_km: Some(vec![1.5, 2.5, 2.5]),
                receivers_km: vec![vec![3.5, 2.5, 2.5]],
                ..base
            },
            ExperimentId::Custom => Self {
                pml_x: false,
                pml_d0_per_s: Some(0.0),
                ..base
            },
        }
    }

    /// Parse a flat JSON object, filling absent keys from the selected preset.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(user) = value else {
            return Err(Error::config("configuration must be a JSON object"));
        };
        let id = match user.get("experiment") {
            None => ExperimentId::Custom,
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|_| Error::config(format!("key `experiment`: unknown experiment {v}")))?,
        };
        let Value::Object(mut merged) = serde_json::to_value(Self::preset(id))? else {
            unreachable!("config serializes to an object")
        };
        for (k, v) in user {
            if !merged.contains_key(&k) {
                return Err(Error::config(format!("unknown key `{k}`")));
            }
            merged.insert(k, v);
        }
        let cfg: Self = serde_path_to_error::deserialize(Value::Object(merged)).map_err(|e| {
            Error::config(format!("key `{}`: {}", e.path(), e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Map of the keys that differ from the preset of the same experiment.
    pub fn overrides(&self) -> Map<String, Value> {
        let (Ok(Value::Object(mine)), Ok(Value::Object(base))) =
            (serde_json::to_value(self), serde_json::to_value(Self::preset(self.experiment)))
        else {
            unreachable!("config serializes to an object")
        };
        mine.into_iter().filter(|(k, v)| base.get(k) != Some(v)).collect()
    }

    pub fn dim(&self) -> usize {
        if self.z_min_km.is_some() {
            3
        } else {
            2
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(self.x_min_km, self.x_max_km), (self.y_min_km, self.y_max_km)];
        if let (Some(lo), Some(hi)) = (self.z_min_km, self.z_max_km) {
            b.push((lo, hi));
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::config(format!("key `{key}`: {why}")));
        if self.z_min_km.is_some() != self.z_max_km.is_some() {
            return bad("z_min_km", "z_min_km and z_max_km must both be set or both be null");
        }
        for (key, (lo, hi)) in ["x", "y", "z"].iter().zip(self.bounds()) {
            if !(hi > lo) {
                return bad(&format!("{key}_max_km"), "must exceed the lower bound");
            }
        }
        if !(self.element_size_km > 0.0) {
            return bad("element_size_km", "must be positive");
        }
        if !(self.wave_speed_km_s > 0.0) {
            return bad("wave_speed_km_s", "must be positive");
        }
        if !(self.density_g_cm3 > 0.0) {
            return bad("density_g_cm3", "must be positive");
        }
        if !(self.t_final_s >= 0.0) {
            return bad("t_final_s", "must be non-negative");
        }
        if !(self.cfl > 0.0) {
            return bad("cfl", "must be positive");
        }
        if let Some(dt) = self.dt_s {
            if !(dt > 0.0) {
                return bad("dt_s", "must be positive");
            }
        }
        for (key, r) in [
            ("r_x_minus", self.r_x_minus),
            ("r_x_plus", self.r_x_plus),
            ("r_y_minus", self.r_y_minus),
            ("r_y_plus", self.r_y_plus),
            ("r_z_minus", self.r_z_minus),
            ("r_z_plus", self.r_z_plus),
        ] {
            if !(r.abs() <= 1.0) {
                return bad(key, "reflection coefficient must satisfy |r| <= 1");
            }
        }
        if self.pml_z && self.dim() == 2 {
            return bad("pml_z", "no z axis in a 2D run");
        }
        if self.any_pml() && !(self.pml_width_km > 0.0) {
            return bad("pml_width_km", "must be positive when a layer is active");
        }
        if let Some(d0) = self.pml_d0_per_s {
            if !(d0 >= 0.0) {
                return bad("pml_d0_per_s", "must be non-negative");
            }
        }
        if let Some(tol) = self.pml_tol {
            if !(tol > 0.0 && tol < 1.0) {
                return bad("pml_tol", "must lie in (0, 1)");
            }
        }
        if !(self.pml_c0 > 0.0) {
            return bad("pml_c0", "must be positive");
        }
        for (key, w) in [("omega_y", self.omega_y), ("omega_z", self.omega_z)] {
            if w != 0.0 && w != 1.0 {
                return bad(key, "must be 0 or 1");
            }
            if w == 0.0 && !self.allow_unstable {
                return bad(key, "0 has no stability guarantee; set allow_unstable to use it");
            }
        }
        if self.initial_condition == InitialCondition::Gaussian && self.gaussian_center_km.len() != self.dim() {
            return bad("gaussian_center_km", "needs one coordinate per axis");
        }
        if !(self.gaussian_width_km2 > 0.0) {
            return bad("gaussian_width_km2", "must be positive");
        }
        if let Some(loc) = &self.source_location_km {
            if loc.len() != self.dim() {
                return bad("source_location_km", "needs one coordinate per axis");
            }
            if !(self.source_sigma0_s > 0.0) {
                return bad("source_sigma0_s", "must be positive");
            }
        }
        for r in &self.receivers_km {
            if r.len() != self.dim() {
                return bad("receivers_km", "each receiver needs one coordinate per axis");
            }
        }
        if self.snapshot_times_s.iter().any(|t| !(*t >= 0.0)) {
            return bad("snapshot_times_s", "times must be non-negative");
        }
        Ok(())
    }

    fn any_pml(&self) -> bool {
        self.pml_x || self.pml_y || self.pml_z
    }

    /// `(tol, d0)`: explicit `pml_d0_per_s` wins, then `pml_tol`, then the `pml_c0` error model.
    pub fn damping_strength(&self) -> Result<(Option<f64>, f64)> {
        if !self.any_pml() {
            return Ok((None, 0.0));
        }
        if let Some(d0) = self.pml_d0_per_s {
            return Ok((None, d0));
        }
        let tol = match self.pml_tol {
            Some(t) => t,
            None => compute_tol_clamped(self.pml_c0, self.pml_width_km, self.element_size_km, self.degree),
        };
        Ok((Some(tol), compute_d0(self.wave_speed_km_s, self.pml_width_km, tol)?))
    }

    pub fn pml_config(&self) -> Result<PmlConfig> {
        let (_, d0) = self.damping_strength()?;
        Ok(PmlConfig {
            width: self.pml_width_km,
            d0,
            active: [self.pml_x, self.pml_y, self.pml_z],
            omega_y: self.omega_y,
            omega_z: self.omega_z,
            mode: self.damping_mode,
            allow_unstable: self.allow_unstable,
        })
    }

    pub fn boundary(&self) -> BoundarySpec {
        BoundarySpec {
            r: [
                [self.r_x_minus, self.r_x_plus],
                [self.r_y_minus, self.r_y_plus],
                [self.r_z_minus, self.r_z_plus],
            ],
        }
    }

    pub fn source(&self) -> Option<PointSourceSpec> {
        self.source_location_km.as_ref().map(|loc| PointSourceSpec {
            location: loc.clone(),
            wavelet: GaussianWavelet::new(self.source_t0_s, self.source_sigma0_s),
            amplitude: self.source_amplitude,
        })
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let bounds = self.bounds();
        let spacing = vec![self.element_size_km; bounds.len()];
        Mesh::uniform(&bounds, &spacing)
    }

    /// Assemble the right-hand-side context described by this configuration.
    pub fn build_context(&self) -> Result<RhsContext> {
        self.validate()?;
        let layout = Layout::new(self.mesh()?, self.quadrature, self.degree)?;
        let material = Material::constant(self.wave_speed_km_s, self.density_g_cm3, layout.field_len())?;
        RhsContext::new(layout, material, self.pml_config()?, self.boundary(), self.source())
    }
}
