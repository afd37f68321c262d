//! Target localization: the grid matched filter (GDFT) and the 3D-DFT /
//! 3D-MUSIC parameter-estimation baselines.
//!
//! All estimators consume a [`SensingTensor`]: a tensor whose first axis
//! carries the AoA phase ramp, whose second axis carries the AoD ramp and
//! whose third axis holds frequency bins on a uniform lattice.

mod dft3d;
mod gdft;
mod music;
mod peaks;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedTensor;
use crate::scenario::{GridSpec, Point, SPEED_OF_LIGHT};
use crate::tensor::CTensor3;
use crate::waveform::{EchoTensor, Side};

pub use dft3d::{dft3d_estimate, dft3d_grid_spectrum, dft3d_transform, DelayScaling};
pub use gdft::{gdft_spectrum, gdft_spectrum_naive};
pub use music::{music3d_estimate, music_grid_spectrum, MusicSpectra};
pub use peaks::pick_peaks;

/// Estimator input with axes (AoA antenna, AoD antenna, frequency bin).
#[derive(Debug, Clone, PartialEq)]
pub struct SensingTensor {
    pub data: CTensor3,
    /// Frequency step between consecutive bins.
    pub bin_spacing_hz: f64,
    /// Bins that carry data, ascending. Unoccupied bins are zero in `data`.
    pub occupied: Vec<usize>,
}

impl SensingTensor {
    pub fn new(data: CTensor3, bin_spacing_hz: f64, occupied: Vec<usize>) -> Result<Self> {
        let [a, b, n] = data.dims();
        if a == 0 || b == 0 || n == 0 {
            return Err(Error::Shape("empty sensing tensor".into()));
        }
        if occupied.iter().any(|&i| i >= n) || occupied.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape(
                "occupied bins must be ascending and in range".into(),
            ));
        }
        if !(bin_spacing_hz.is_finite() && bin_spacing_hz > 0.0) {
            return Err(Error::Precondition("bin spacing must be > 0".into()));
        }
        Ok(Self {
            data,
            bin_spacing_hz,
            occupied,
        })
    }

    /// Fully occupied tensor.
    pub fn dense(data: CTensor3, bin_spacing_hz: f64) -> Result<Self> {
        let n = data.dims()[2];
        Self::new(data, bin_spacing_hz, (0..n).collect())
    }

    pub fn from_fused(f: &FusedTensor) -> Result<Self> {
        Self::new(f.data.clone(), f.scs_base_hz, f.occupied_bins())
    }

    /// Single-receiver input on that receiver's own subcarrier lattice. The
    /// MiBS tensor is transposed so its first axis carries the AoA.
    pub fn from_echo(e: &EchoTensor) -> Result<Self> {
        let data = match e.side {
            Side::MbsRx => e.data.clone(),
            Side::MibsRx => e.data.transpose01(),
        };
        Self::dense(data, e.scs_hz)
    }

    pub fn n_antennas(&self) -> (usize, usize) {
        let [a, b, _] = self.data.dims();
        (a, b)
    }

    pub fn n_bins(&self) -> usize {
        self.data.dims()[2]
    }

    pub fn bin_frequencies(&self) -> Vec<f64> {
        self.occupied
            .iter()
            .map(|&n| n as f64 * self.bin_spacing_hz)
            .collect()
    }
}

/// Matched-filter output over a search grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult<'g> {
    pub values: Vec<f64>,
    pub grid: &'g GridSpec,
}

impl SpectrumResult<'_> {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// CSV with header `grid_index,x_m,y_m,spectrum_value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "grid_index,x_m,y_m,spectrum_value")?;
        for (i, (p, v)) in self.grid.points.iter().zip(&self.values).enumerate() {
            writeln!(w, "{i},{},{},{:e}", p.x, p.y, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gdft")]
    Gdft,
    #[serde(rename = "dft3d")]
    Dft3d,
    #[serde(rename = "music3d")]
    Music3d,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gdft, Method::Dft3d, Method::Music3d];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gdft => "gdft",
            Method::Dft3d => "dft3d",
            Method::Music3d => "music3d",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method '{s}' (expected gdft, dft3d or music3d)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub estimates: Vec<Point>,
    pub method: Method,
    /// Spectrum value behind each estimate, descending.
    pub peak_values: Vec<f64>,
    /// Fewer than the requested number of targets were found.
    pub incomplete: bool,
}

/// Bistatic parameters recovered by a baseline estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamEstimate {
    pub aoa: f64,
    pub aod: f64,
    pub delay: f64,
}

/// Position from an AoA at the MBS and a bistatic delay: the MBS ray is
/// intersected with the ellipse whose foci are the two stations.
pub fn aoa_localize(est: &ParamEstimate, mbs: &Point, mibs: &Point) -> Result<Point> {
    let range_sum = est.delay * SPEED_OF_LIGHT;
    let baseline = mbs.distance(mibs);
    if !(range_sum > baseline) {
        return Err(Error::Geometry(format!(
            "range sum {range_sum} m does not exceed baseline {baseline} m"
        )));
    }
    // Ray direction from the MBS under the broadside (+y) convention.
    let (ux, uy) = (est.aoa.sin(), est.aoa.cos());
    let cos_psi = (ux * (mibs.x - mbs.x) + uy * (mibs.y - mbs.y)) / baseline;
    let den = 2.0 * (range_sum - baseline * cos_psi);
    if !(den > 0.0) {
        return Err(Error::Geometry(
            "ray does not intersect the delay ellipse".into(),
        ));
    }
    let d = (range_sum * range_sum - baseline * baseline) / den;
    Ok(Point::new(mbs.x + d * ux, mbs.y + d * uy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorParams {
    /// Peak suppression radius for the grid search; `None` uses two cells.
    pub min_separation_m: Option<f64>,
    /// MUSIC angle search points over [-pi/2, pi/2).
    pub music_angle_grid: usize,
    /// MUSIC delay search points over one unambiguous delay period.
    pub music_delay_grid: usize,
    pub delay_scaling: DelayScaling,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            min_separation_m: None,
            music_angle_grid: 1024,
            music_delay_grid: 4096,
            delay_scaling: DelayScaling::Standard,
        }
    }
}

impl EstimatorParams {
    pub fn min_separation(&self, grid: &GridSpec) -> f64 {
        self.min_separation_m
            .unwrap_or_else(|| 2.0 * grid.resolution().unwrap_or(0.0))
    }
}

fn localize_params(
    params: &[(ParamEstimate, f64)],
    method: Method,
    grid: &GridSpec,
    n_targets: usize,
    mbs: &Point,
    mibs: &Point,
) -> LocalizationResult {
    let bounds = grid.bounds();
    let mut estimates = Vec::new();
    let mut peak_values = Vec::new();
    for (p, v) in params {
        // Estimates whose delay falls inside the baseline cannot be mapped.
        if let Ok(pos) = aoa_localize(p, mbs, mibs) {
            estimates.push(bounds.clamp(pos));
            peak_values.push(*v);
        }
    }
    LocalizationResult {
        incomplete: estimates.len() < n_targets,
        estimates,
        method,
        peak_values,
    }
}

/// Runs one localization method end to end.
pub fn localize(
    method: Method,
    input: &SensingTensor,
    grid: &GridSpec,
    n_targets: usize,
    params: &EstimatorParams,
    mbs: &Point,
    mibs: &Point,
) -> Result<LocalizationResult> {
    if n_targets == 0 {
        return Err(Error::Precondition("number of targets must be >= 1".into()));
    }
    match method {
        Method::Gdft => {
            let spectrum = gdft_spectrum(input, grid)?;
            pick_peaks(&spectrum, n_targets, params.min_separation(grid))
        }
        Method::Dft3d => {
            let est = dft3d_estimate(input, n_targets, params.delay_scaling)?;
            Ok(localize_params(&est, method, grid, n_targets, mbs, mibs))
        }
        Method::Music3d => {
            let est = music3d_estimate(
                input,
                n_targets,
                params.music_angle_grid,
                params.music_delay_grid,
            )?;
            Ok(localize_params(&est, method, grid, n_targets, mbs, mibs))
        }
    }
}

/// Phase factor `exp(j*phase)`.
#[inline]
pub(crate) fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}
