//! System configuration, scene geometry and search-grid construction.
//!
//! Both uniform linear arrays lie along the global x-axis with broadside
//! towards +y. Angles are measured from broadside, so a target at offset
//! `dx` and range `r` from an array satisfies `sin(angle) = dx / r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Transmit-side parameters of both base stations.
///
/// Each receiver observes the *other* station's transmission, so the MBS
/// echo link uses the `*_mibs` values and the MiBS echo link the `*_mbs`
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_subcarriers_mbs: usize,
    pub n_subcarriers_mibs: usize,
    pub n_symbols: usize,
    pub n_rx: usize,
    pub n_tx: usize,
    pub tx_power_mbs_dbm: f64,
    pub tx_power_mibs_dbm: f64,
    pub carrier_freq_mbs_hz: f64,
    pub carrier_freq_mibs_hz: f64,
    pub scs_mbs_hz: f64,
    pub scs_mibs_hz: f64,
    pub cp_duration_s: f64,
}

impl SystemConfig {
    /// Full-scale parameter set (64 antennas, 512 subcarriers, Q = 4).
    pub fn full_scale() -> Self {
        Self {
            n_subcarriers_mbs: 512,
            n_subcarriers_mibs: 512,
            n_symbols: 128,
            n_rx: 64,
            n_tx: 64,
            tx_power_mbs_dbm: 46.0,
            tx_power_mibs_dbm: 27.0,
            carrier_freq_mbs_hz: 2.6e9,
            carrier_freq_mibs_hz: 26e9,
            scs_mbs_hz: 30e3,
            scs_mibs_hz: 120e3,
            cp_duration_s: 2.34e-6,
        }
    }

    /// Reduced configuration used for CI-scale experiments: 8 antennas,
    /// 64 subcarriers per link and Q = 2.
    ///
    /// The low-band spacing is 16 times the full-scale one so the low-band
    /// link keeps its full-scale bandwidth (64 x 480 kHz = 512 x 30 kHz);
    /// the cyclic prefix is scaled with the symbol length.
    pub fn desk() -> Self {
        Self {
            n_subcarriers_mbs: 64,
            n_subcarriers_mibs: 64,
            n_symbols: 16,
            n_rx: 8,
            n_tx: 8,
            scs_mbs_hz: 480e3,
            scs_mibs_hz: 960e3,
            cp_duration_s: 2.34e-6 / 16.0,
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_subcarriers_mbs", self.n_subcarriers_mbs),
            ("n_subcarriers_mibs", self.n_subcarriers_mibs),
            ("n_symbols", self.n_symbols),
            ("n_rx", self.n_rx),
            ("n_tx", self.n_tx),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.n_rx != self.n_tx {
            return Err(Error::Config(format!(
                "n_rx ({}) must equal n_tx ({})",
                self.n_rx, self.n_tx
            )));
        }
        for (name, v) in [
            ("tx_power_mbs_dbm", self.tx_power_mbs_dbm),
            ("tx_power_mibs_dbm", self.tx_power_mibs_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        for (name, v) in [
            ("carrier_freq_mbs_hz", self.carrier_freq_mbs_hz),
            ("carrier_freq_mibs_hz", self.carrier_freq_mibs_hz),
            ("scs_mbs_hz", self.scs_mbs_hz),
            ("scs_mibs_hz", self.scs_mibs_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        if !(self.cp_duration_s.is_finite() && self.cp_duration_s >= 0.0) {
            return Err(Error::Config("cp_duration_s must be >= 0".into()));
        }
        self.q()?;
        Ok(())
    }

    /// Integer subcarrier-spacing ratio between the high and low band.
    pub fn q(&self) -> Result<usize> {
        scs_ratio(self.scs_mibs_hz, self.scs_mbs_hz)
    }

    /// Antenna count per array (`n_rx == n_tx`).
    pub fn n_antennas(&self) -> usize {
        self.n_rx
    }
}

/// Ratio `high / low` if it is a positive integer (within 1e-9 relative).
pub fn scs_ratio(high: f64, low: f64) -> Result<usize> {
    let r = high / low;
    let q = r.round();
    if !(r.is_finite() && q >= 1.0 && (r - q).abs() <= 1e-9 * q) {
        return Err(Error::Config(format!(
            "subcarrier spacing ratio {high}/{low} is not a positive integer"
        )));
    }
    Ok(q as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub pos: Point,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub heading: f64,
    #[serde(default = "unit_reflectivity")]
    pub reflectivity: num_complex::Complex64,
}

fn unit_reflectivity() -> num_complex::Complex64 {
    num_complex::Complex64::new(1.0, 0.0)
}

impl Target {
    pub fn stationary(x: f64, y: f64) -> Self {
        Self {
            pos: Point::new(x, y),
            speed: 0.0,
            heading: 0.0,
            reflectivity: unit_reflectivity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pos.is_finite() {
            return Err(Error::Config("target position must be finite".into()));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(Error::Config("target speed must be >= 0".into()));
        }
        if !(-std::f64::consts::PI..std::f64::consts::PI).contains(&self.heading) {
            return Err(Error::Config("target heading must lie in [-pi, pi)".into()));
        }
        if !(self.reflectivity.re.is_finite() && self.reflectivity.im.is_finite()) {
            return Err(Error::Config("target reflectivity must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mbs_pos: Point,
    pub mibs_pos: Point,
    pub targets: Vec<Target>,
    /// Noise power spectral density; `None` synthesizes noiseless echoes.
    #[serde(default)]
    pub noise_psd_dbm_hz: Option<f64>,
}

impl Scenario {
    /// Base stations at (0,0) and (300,0) m with three targets at
    /// (200,30), (250,60) and (300,80) m.
    pub fn reference() -> Self {
        Self {
            mbs_pos: Point::new(0.0, 0.0),
            mibs_pos: Point::new(300.0, 0.0),
            targets: vec![
                Target::stationary(200.0, 30.0),
                Target::stationary(250.0, 60.0),
                Target::stationary(300.0, 80.0),
            ],
            noise_psd_dbm_hz: None,
        }
    }

    pub fn baseline(&self) -> f64 {
        self.mbs_pos.distance(&self.mibs_pos)
    }

    pub fn truths(&self) -> Vec<Point> {
        self.targets.iter().map(|t| t.pos).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mbs_pos.is_finite() && self.mibs_pos.is_finite()) {
            return Err(Error::Config(
                "base station positions must be finite".into(),
            ));
        }
        if self.baseline() <= 0.0 {
            return Err(Error::Config("MBS and MiBS positions coincide".into()));
        }
        for t in &self.targets {
            t.validate()?;
        }
        for (i, a) in self.targets.iter().enumerate() {
            for b in &self.targets[i + 1..] {
                if a.pos == b.pos {
                    return Err(Error::Config(format!(
                        "duplicate target position ({}, {})",
                        a.pos.x, a.pos.y
                    )));
                }
            }
        }
        if let Some(n) = self.noise_psd_dbm_hz {
            if !n.is_finite() {
                return Err(Error::Config("noise_psd_dbm_hz must be finite".into()));
            }
        }
        Ok(())
    }

    /// Same scene with a different noise level.
    pub fn with_noise(&self, noise_psd_dbm_hz: Option<f64>) -> Self {
        Self {
            noise_psd_dbm_hz,
            ..self.clone()
        }
    }
}

/// Bistatic parameters of a point as seen by the two arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistaticParams {
    /// Angle of arrival at the MBS array.
    pub aoa: f64,
    /// Angle of departure at the MiBS array.
    pub aod: f64,
    /// Transmitter-target-receiver propagation delay in seconds.
    pub delay: f64,
}

fn broadside_angle(target: &Point, array: &Point, label: &str) -> Result<f64> {
    let dx = target.x - array.x;
    let dy = target.y - array.y;
    let r = dx.hypot(dy);
    if r == 0.0 {
        return Err(Error::Geometry(format!("target coincides with {label}")));
    }
    if dy <= 0.0 {
        return Err(Error::Geometry(format!(
            "target ({}, {}) is not in front of the {label} array",
            target.x, target.y
        )));
    }
    Ok((dx / r).asin())
}

pub fn bistatic_geometry(target: &Point, mbs: &Point, mibs: &Point) -> Result<BistaticParams> {
    if !(target.is_finite() && mbs.is_finite() && mibs.is_finite()) {
        return Err(Error::Geometry("non-finite coordinate".into()));
    }
    let aoa = broadside_angle(target, mbs, "MBS")?;
    let aod = broadside_angle(target, mibs, "MiBS")?;
    let delay = (target.distance(mbs) + target.distance(mibs)) / SPEED_OF_LIGHT;
    Ok(BistaticParams { aoa, aod, delay })
}

/// Doppler shift of the transmitter-target-receiver path for a moving target.
pub fn doppler_shift(target: &Target, aoa: f64, aod: f64, carrier_freq: f64) -> Result<f64> {
    if !(carrier_freq.is_finite() && carrier_freq > 0.0) {
        return Err(Error::Precondition("carrier frequency must be > 0".into()));
    }
    Ok(-target.speed * carrier_freq / SPEED_OF_LIGHT
        * ((target.heading - aoa).cos() + (target.heading - aod).cos()))
}

/// Axis-aligned search rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Default search area spanning both stations and the reference targets.
    pub const fn reference() -> Self {
        Self::new(0.0, 300.0, 10.0, 100.0)
    }

    pub fn diagonal(&self) -> f64 {
        (self.x_max - self.x_min).hypot(self.y_max - self.y_min)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
        )
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max < self.x_min || self.y_max < self.y_min {
            return Err(Error::Precondition(format!("invalid region {self:?}")));
        }
        Ok(())
    }
}

fn lattice_count(extent: f64, resolution: f64) -> usize {
    (extent / resolution + 1e-9).floor() as usize + 1
}

/// Candidate positions with their precomputed bistatic parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub points: Vec<Point>,
    pub aoa: Vec<f64>,
    pub aod: Vec<f64>,
    pub delays: Vec<f64>,
    lattice: Option<Lattice>,
}

/// Regular lattice layout, kept so peak search can find lattice neighbours.
#[derive(Debug, Clone, PartialEq)]
struct Lattice {
    region: Region,
    resolution: f64,
    nx: usize,
    ny: usize,
    /// Row-major (x fastest) cell -> point index; `None` for excluded cells.
    cells: Vec<Option<usize>>,
    /// Point index -> (ix, iy).
    coords: Vec<(usize, usize)>,
}

impl GridSpec {
    /// Rectangular lattice over `region`, row-major with x fastest. Points
    /// coincident with a base station are dropped.
    pub fn build(region: Region, resolution: f64, mbs: &Point, mibs: &Point) -> Result<Self> {
        region.validate()?;
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Precondition("grid resolution must be > 0".into()));
        }
        let nx = lattice_count(region.x_max - region.x_min, resolution);
        let ny = lattice_count(region.y_max - region.y_min, resolution);
        let mut cells = vec![None; nx * ny];
        let mut coords = Vec::new();
        let mut points = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let p = Point::new(
                    region.x_min + ix as f64 * resolution,
                    region.y_min + iy as f64 * resolution,
                );
                if p == *mbs || p == *mibs {
                    continue;
                }
                cells[iy * nx + ix] = Some(points.len());
                coords.push((ix, iy));
                points.push(p);
            }
        }
        let mut grid = Self::from_points(points, mbs, mibs)?;
        grid.lattice = Some(Lattice {
            region,
            resolution,
            nx,
            ny,
            cells,
            coords,
        });
        Ok(grid)
    }

    /// Grid over an arbitrary point list (no lattice neighbourhood).
    pub fn from_points(points: Vec<Point>, mbs: &Point, mibs: &Point) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let params = points
            .iter()
            .map(|p| bistatic_geometry(p, mbs, mibs))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            aoa: params.iter().map(|b| b.aoa).collect(),
            aod: params.iter().map(|b| b.aod).collect(),
            delays: params.iter().map(|b| b.delay).collect(),
            points,
            lattice: None,
        })
    }

    pub fn n_grid(&self) -> usize {
        self.points.len()
    }

    pub fn resolution(&self) -> Option<f64> {
        self.lattice.as_ref().map(|l| l.resolution)
    }

    pub fn region(&self) -> Option<Region> {
        self.lattice.as_ref().map(|l| l.region)
    }

    /// Lattice dimensions `(nx, ny)` when built from a region.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.lattice.as_ref().map(|l| (l.nx, l.ny))
    }

    /// Bounding box of the grid points.
    pub fn bounds(&self) -> Region {
        if let Some(r) = self.region() {
            return r;
        }
        let mut r = Region::new(
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &self.points {
            r.x_min = r.x_min.min(p.x);
            r.x_max = r.x_max.max(p.x);
            r.y_min = r.y_min.min(p.y);
            r.y_max = r.y_max.max(p.y);
        }
        r
    }

    /// Index of the point closest to `p` (lowest index on ties).
    pub fn nearest(&self, p: &Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, q) in self.points.iter().enumerate() {
            let d = q.distance(p);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Indices of the up-to-eight lattice neighbours of point `g`.
    /// Empty for grids without lattice structure.
    pub fn neighbours(&self, g: usize) -> Vec<usize> {
        let Some(l) = &self.lattice else {
            return Vec::new();
        };
        let (ix, iy) = l.coords[g];
        let mut out = Vec::with_capacity(8);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (x, y) = (ix as i64 + dx, iy as i64 + dy);
                if x < 0 || y < 0 || x >= l.nx as i64 || y >= l.ny as i64 {
                    continue;
                }
                if let Some(j) = l.cells[y as usize * l.nx + x as usize] {
                    out.push(j);
                }
            }
        }
        out
    }

    /// Checks that every stored parameter matches the geometry of its point.
    pub fn check_consistency(&self, mbs: &Point, mibs: &Point) -> Result<()> {
        let g = self.points.len();
        if g == 0 || self.aoa.len() != g || self.aod.len() != g || self.delays.len() != g {
            return Err(Error::Shape("grid vectors differ in length".into()));
        }
        for i in 0..g {
            let b = bistatic_geometry(&self.points[i], mbs, mibs)?;
            if b.aoa != self.aoa[i] || b.aod != self.aod[i] || b.delay != self.delays[i] {
                return Err(Error::Shape(format!("grid point {i} is inconsistent")));
            }
        }
        Ok(())
    }
}

/// Grid over `region` for the stations of `scenario`.
pub fn build_grid(region: Region, resolution: f64, scenario: &Scenario) -> Result<GridSpec> {
    GridSpec::build(region, resolution, &scenario.mbs_pos, &scenario.mibs_pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const MBS: Point = Point::new(0.0, 0.0);
    const MIBS: Point = Point::new(300.0, 0.0);

    #[test]
    fn coincident_target_is_rejected() {
        assert!(matches!(
            bistatic_geometry(&MIBS, &MBS, &MIBS),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn target_behind_arrays_is_rejected() {
        assert!(bistatic_geometry(&Point::new(100.0, -5.0), &MBS, &MIBS).is_err());
        assert!(bistatic_geometry(&Point::new(100.0, 0.0), &MBS, &MIBS).is_err());
    }

    #[test]
    fn delay_of_first_reference_target() {
        // Hand-computed distance sum.
        let r = (200.0f64 * 200.0 + 900.0).sqrt() + (100.0f64 * 100.0 + 900.0).sqrt();
        assert!((r - 306.64).abs() < 0.01);
        let b = bistatic_geometry(&Point::new(200.0, 30.0), &MBS, &MIBS).unwrap();
        assert!((b.delay - r / SPEED_OF_LIGHT).abs() < 1e-18);
        assert!((b.delay - 1.0228e-6).abs() < 1e-10);
    }

    #[test]
    fn broadside_target_has_zero_aoa() {
        let b = bistatic_geometry(&Point::new(0.0, 100.0), &MBS, &MIBS).unwrap();
        assert_eq!(b.aoa, 0.0);
        assert!((b.aod - (-300.0f64 / 300.0f64.hypot(100.0)).asin()).abs() < 1e-15);
    }

    #[test]
    fn doppler_examples() {
        let mut t = Target::stationary(10.0, 10.0);
        assert_eq!(doppler_shift(&t, 0.3, -0.2, 2.6e9).unwrap(), 0.0);
        t.speed = 10.0;
        let fd = doppler_shift(&t, 0.0, 0.0, 2.6e9).unwrap();
        assert!((fd - (-2.0 * 10.0 * 2.6e9 / SPEED_OF_LIGHT)).abs() < 1e-9);
        assert!((fd + 173.45).abs() < 0.01);
        t.heading = 0.0;
        let fd = doppler_shift(&t, -FRAC_PI_2, FRAC_PI_2, 2.6e9).unwrap();
        assert!(fd.abs() < 1e-12);
        assert!(doppler_shift(&t, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn reference_grid_has_310_points_at_10m() {
        let g = GridSpec::build(Region::new(0.0, 300.0, 10.0, 100.0), 10.0, &MBS, &MIBS).unwrap();
        assert_eq!(g.n_grid(), 31 * 10);
        assert_eq!(g.shape(), Some((31, 10)));
        // x fastest
        assert_eq!(g.points[1], Point::new(10.0, 10.0));
        assert_eq!(g.points[31], Point::new(0.0, 20.0));
        g.check_consistency(&MBS, &MIBS).unwrap();
    }

    #[test]
    fn single_point_grid() {
        let g = GridSpec::build(Region::new(200.0, 200.0, 30.0, 30.0), 1.0, &MBS, &MIBS).unwrap();
        assert_eq!(g.n_grid(), 1);
        assert!((g.delays[0] - 1.0228e-6).abs() < 1e-10);
    }

    #[test]
    fn coarse_resolution_gives_origin_only() {
        let g = GridSpec::build(Region::new(10.0, 40.0, 10.0, 30.0), 100.0, &MBS, &MIBS).unwrap();
        assert_eq!(g.points, vec![Point::new(10.0, 10.0)]);
    }

    #[test]
    fn station_points_are_excluded() {
        let mbs = Point::new(0.0, 10.0);
        let mibs = Point::new(20.0, 0.0);
        // (0,10) is the MBS itself; every other point sits in front of both arrays.
        let g = GridSpec::build(Region::new(0.0, 0.0, 10.0, 20.0), 10.0, &mbs, &mibs).unwrap();
        assert_eq!(g.points, vec![Point::new(0.0, 20.0)]);
        let err = GridSpec::build(Region::new(0.0, 0.0, 10.0, 10.0), 10.0, &mbs, &mibs);
        assert_eq!(err, Err(Error::EmptyGrid));
    }

    #[test]
    fn invalid_grid_requests() {
        assert!(GridSpec::build(Region::new(1.0, 0.0, 10.0, 20.0), 1.0, &MBS, &MIBS).is_err());
        assert!(GridSpec::build(Region::reference(), 0.0, &MBS, &MIBS).is_err());
    }

    #[test]
    fn lattice_neighbours() {
        let g = GridSpec::build(Region::new(0.0, 20.0, 10.0, 30.0), 10.0, &MBS, &MIBS).unwrap();
        assert_eq!(g.neighbours(4).len(), 8);
        let mut corner = g.neighbours(0);
        corner.sort();
        assert_eq!(corner, vec![1, 3, 4]);
    }

    #[test]
    fn config_validation() {
        SystemConfig::full_scale().validate().unwrap();
        SystemConfig::desk().validate().unwrap();
        assert_eq!(SystemConfig::full_scale().q().unwrap(), 4);
        assert_eq!(SystemConfig::desk().q().unwrap(), 2);
        let mut c = SystemConfig::desk();
        c.n_tx = 4;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::desk();
        c.scs_mibs_hz = 45e3;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::desk();
        c.n_symbols = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn scenario_validation() {
        Scenario::reference().validate().unwrap();
        let mut s = Scenario::reference();
        s.mibs_pos = s.mbs_pos;
        assert!(s.validate().is_err());
        let mut s = Scenario::reference();
        s.targets.push(Target::stationary(200.0, 30.0));
        assert!(s.validate().is_err());
        let mut s = Scenario::reference();
        s.targets[0].heading = PI;
        assert!(s.validate().is_err());
    }

    fn front_point() -> impl Strategy<Value = Point> {
        (-200.0..500.0f64, 1.0..400.0f64).prop_map(|(x, y)| Point::new(x, y))
    }

    proptest! {
        #[test]
        fn swapping_stations_swaps_angles(p in front_point()) {
            let a = bistatic_geometry(&p, &MBS, &MIBS).unwrap();
            let b = bistatic_geometry(&p, &MIBS, &MBS).unwrap();
            prop_assert_eq!(a.aoa, b.aod);
            prop_assert_eq!(a.aod, b.aoa);
            prop_assert!((a.delay - b.delay).abs() <= 1e-15 * a.delay);
        }

        #[test]
        fn delay_exceeds_baseline(p in front_point()) {
            let b = bistatic_geometry(&p, &MBS, &MIBS).unwrap();
            prop_assert!(b.delay > 300.0 / SPEED_OF_LIGHT);
        }

        #[test]
        fn built_grids_are_consistent(x0 in 0.0..100.0f64, w in 0.0..60.0f64, h in 0.0..60.0f64, res in 1.0..20.0f64) {
            let g = GridSpec::build(Region::new(x0, x0 + w, 5.0, 5.0 + h), res, &MBS, &MIBS).unwrap();
            g.check_consistency(&MBS, &MIBS).unwrap();
            prop_assert_eq!(g.n_grid(), lattice_count(w, res) * lattice_count(h, res));
        }
    }
}
