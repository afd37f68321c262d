//! Frequency-domain echo synthesis for the two passive receivers.
//!
//! Each receiver hears the other station's OFDM transmission reflected by
//! the targets. After the known communication symbols are removed, one OFDM
//! symbol of the echo is a rank-3 tensor indexed by (receive antenna,
//! transmit antenna, subcarrier) whose phase ramps encode the receive angle,
//! the transmit angle and the bistatic delay.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    bistatic_geometry, doppler_shift, Scenario, SystemConfig, Target, SPEED_OF_LIGHT,
};
use crate::tensor::CTensor3;

/// Which station receives the echo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// MBS receives the high-band MiBS transmission.
    MbsRx,
    /// MiBS receives the low-band MBS transmission.
    MibsRx,
}

impl Side {
    pub(crate) fn code(self) -> u64 {
        match self {
            Side::MbsRx => 0,
            Side::MibsRx => 1,
        }
    }
}

/// Transmit parameters of the station illuminating a receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub tx_power_dbm: f64,
    pub carrier_hz: f64,
    pub scs_hz: f64,
    pub n_subcarriers: usize,
    pub symbol_duration_s: f64,
}

impl LinkParams {
    pub fn for_side(config: &SystemConfig, side: Side) -> Self {
        let (tx_power_dbm, carrier_hz, scs_hz, n_subcarriers) = match side {
            Side::MbsRx => (
                config.tx_power_mibs_dbm,
                config.carrier_freq_mibs_hz,
                config.scs_mibs_hz,
                config.n_subcarriers_mibs,
            ),
            Side::MibsRx => (
                config.tx_power_mbs_dbm,
                config.carrier_freq_mbs_hz,
                config.scs_mbs_hz,
                config.n_subcarriers_mbs,
            ),
        };
        Self {
            tx_power_dbm,
            carrier_hz,
            scs_hz,
            n_subcarriers,
            symbol_duration_s: 1.0 / scs_hz + config.cp_duration_s,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn amplitude(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm).sqrt()
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Per-resource-element complex noise variance for a noise density and
/// subcarrier bandwidth.
pub fn noise_variance(noise_psd_dbm_hz: f64, scs_hz: f64) -> f64 {
    dbm_to_watts(noise_psd_dbm_hz) * scs_hz
}

/// Target reflection amplitude model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// The target reflectivity is used as the path amplitude.
    Unit,
    /// Bistatic radar equation with RCS `|reflectivity|^2` (m^2).
    #[default]
    BistaticRadar,
}

/// Path amplitude for a target at transmitter range `ranges.0` and receiver
/// range `ranges.1`.
pub fn path_gain(
    target: &Target,
    ranges: (f64, f64),
    wavelength: f64,
    mode: GainMode,
) -> Result<Complex64> {
    let (d_tx, d_rx) = ranges;
    if !(d_tx > 0.0 && d_rx > 0.0) {
        return Err(Error::Geometry("path range must be > 0".into()));
    }
    Ok(match mode {
        GainMode::Unit => target.reflectivity,
        GainMode::BistaticRadar => {
            let rcs = target.reflectivity.norm_sqr();
            Complex64::new(
                rcs.sqrt() * wavelength / ((4.0 * PI).powf(1.5) * d_tx * d_rx),
                0.0,
            )
        }
    })
}

/// ULA response with half-wavelength spacing; element `k` (1-based) is
/// `exp(j*pi*k*sin(angle))`.
pub fn steering_vector(angle: f64, n_elems: usize) -> Vec<Complex64> {
    let s = angle.sin();
    (1..=n_elems)
        .map(|k| Complex64::from_polar(1.0, PI * k as f64 * s))
        .collect()
}

/// Post-cancellation echo of one OFDM symbol at one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoTensor {
    /// Axes: (receive antenna, transmit antenna, subcarrier).
    pub data: CTensor3,
    /// Subcarrier spacing of the transmitting station.
    pub scs_hz: f64,
    pub side: Side,
}

impl EchoTensor {
    pub fn n_subcarriers(&self) -> usize {
        self.data.dims()[2]
    }

    pub fn n_antennas(&self) -> usize {
        self.data.dims()[0]
    }
}

/// Noiseless channel tensor (before noise and with communication data
/// already removed).
fn channel_tensor(
    config: &SystemConfig,
    scenario: &Scenario,
    side: Side,
    symbol_index: usize,
    gain: GainMode,
) -> Result<CTensor3> {
    config.validate()?;
    scenario.validate()?;
    if symbol_index >= config.n_symbols {
        return Err(Error::Precondition(format!(
            "symbol index {symbol_index} >= {} symbols",
            config.n_symbols
        )));
    }
    let link = LinkParams::for_side(config, side);
    let n = config.n_antennas();
    let mut out = CTensor3::zeros([n, n, link.n_subcarriers]);
    let amp = link.amplitude();
    for target in &scenario.targets {
        let geo = bistatic_geometry(&target.pos, &scenario.mbs_pos, &scenario.mibs_pos)?;
        let (rx_angle, tx_angle, d_rx, d_tx) = match side {
            Side::MbsRx => (
                geo.aoa,
                geo.aod,
                target.pos.distance(&scenario.mbs_pos),
                target.pos.distance(&scenario.mibs_pos),
            ),
            Side::MibsRx => (
                geo.aod,
                geo.aoa,
                target.pos.distance(&scenario.mibs_pos),
                target.pos.distance(&scenario.mbs_pos),
            ),
        };
        let b = path_gain(target, (d_tx, d_rx), link.wavelength(), gain)?;
        let fd = doppler_shift(target, geo.aoa, geo.aod, link.carrier_hz)?;
        let doppler = Complex64::from_polar(
            1.0,
            2.0 * PI * fd * symbol_index as f64 * link.symbol_duration_s,
        );
        let common = b * amp * doppler;
        let a_rx = steering_vector(rx_angle, n);
        let a_tx = steering_vector(tx_angle, n);
        let delay_ramp: Vec<Complex64> = (0..link.n_subcarriers)
            .map(|sc| Complex64::from_polar(1.0, -2.0 * PI * sc as f64 * link.scs_hz * geo.delay))
            .collect();
        let data = out.as_mut_slice();
        let mut i = 0;
        for ar in &a_rx {
            for at in &a_tx {
                let w = common * ar * at;
                for d in &delay_ramp {
                    data[i] += w * d;
                    i += 1;
                }
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::Precondition("non-finite echo parameter".into()));
    }
    Ok(out)
}

fn side_rng(seed: u64, side: Side) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(side.code() + 1);
    rng
}

/// Adds circular complex Gaussian noise of per-entry variance `variance`.
pub fn add_noise<R: Rng>(tensor: &mut CTensor3, variance: f64, rng: &mut R) {
    let sigma = (variance / 2.0).sqrt();
    for v in tensor.as_mut_slice() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(sigma * re, sigma * im);
    }
}

/// Synthesizes the post-cancellation echo seen by `side` during OFDM symbol
/// `symbol_index`. Noise (if the scenario has a noise level) is drawn from
/// a generator seeded with `seed`, on a stream distinct per side.
pub fn synthesize_echo(
    config: &SystemConfig,
    scenario: &Scenario,
    side: Side,
    symbol_index: usize,
    seed: u64,
    gain: GainMode,
) -> Result<EchoTensor> {
    let mut data = channel_tensor(config, scenario, side, symbol_index, gain)?;
    let link = LinkParams::for_side(config, side);
    if let Some(psd) = scenario.noise_psd_dbm_hz {
        let mut rng = side_rng(seed, side);
        add_noise(&mut data, noise_variance(psd, link.scs_hz), &mut rng);
    }
    Ok(EchoTensor {
        data,
        scs_hz: link.scs_hz,
        side,
    })
}

/// Random unit-modulus QPSK symbols of shape `(1, n_tx, n_subcarriers)`.
pub fn qpsk_symbols<R: Rng>(n_tx: usize, n_subcarriers: usize, rng: &mut R) -> CTensor3 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CTensor3::from_fn([1, n_tx, n_subcarriers], |_, _, _| {
        let re = if rng.random::<bool>() { h } else { -h };
        let im = if rng.random::<bool>() { h } else { -h };
        Complex64::new(re, im)
    })
}

/// Noiseless received tensor before cancellation: every transmit-antenna
/// contribution is modulated by a known QPSK symbol. Returns the raw tensor
/// and the symbols.
pub fn synthesize_raw(
    config: &SystemConfig,
    scenario: &Scenario,
    side: Side,
    symbol_index: usize,
    seed: u64,
    gain: GainMode,
) -> Result<(CTensor3, CTensor3)> {
    let mut raw = channel_tensor(config, scenario, side, symbol_index, gain)?;
    let [nr, nt, nc] = raw.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let symbols = qpsk_symbols(nt, nc, &mut rng);
    for k in 0..nr {
        for p in 0..nt {
            for n in 0..nc {
                let v = raw.get(k, p, n) * symbols.get(0, p, n);
                raw.set(k, p, n, v);
            }
        }
    }
    Ok((raw, symbols))
}

/// Removes known communication symbols by per-resource-element division.
///
/// `known_symbols` has shape `(1, n_tx, n_sc)` (shared by all receive
/// antennas) or the full shape of `raw`.
pub fn cancel_communication(
    raw: &CTensor3,
    known_symbols: &CTensor3,
    scs_hz: f64,
    side: Side,
) -> Result<EchoTensor> {
    let [nr, nt, nc] = raw.dims();
    let [sr, st, sc] = known_symbols.dims();
    if st != nt || sc != nc || (sr != 1 && sr != nr) {
        return Err(Error::Shape(format!(
            "symbols {:?} incompatible with echo {:?}",
            known_symbols.dims(),
            raw.dims()
        )));
    }
    let mut out = raw.clone();
    for k in 0..nr {
        let ks = if sr == 1 { 0 } else { k };
        for p in 0..nt {
            for n in 0..nc {
                let x = known_symbols.get(ks, p, n);
                if x.norm_sqr() == 0.0 {
                    return Err(Error::ZeroSymbol {
                        tx: p,
                        subcarrier: n,
                    });
                }
                out.set(k, p, n, raw.get(k, p, n) / x);
            }
        }
    }
    Ok(EchoTensor {
        data: out,
        scs_hz,
        side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Point;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn one_antenna_config() -> SystemConfig {
        SystemConfig {
            n_rx: 1,
            n_tx: 1,
            ..SystemConfig::desk()
        }
    }

    fn single_target(x: f64, y: f64) -> Scenario {
        Scenario {
            targets: vec![Target::stationary(x, y)],
            ..Scenario::reference()
        }
    }

    #[test]
    fn steering_examples() {
        assert!(steering_vector(0.0, 4)
            .iter()
            .all(|v| close(*v, c(1.0, 0.0), 0.0)));
        let v = steering_vector(PI / 6.0, 2);
        assert!(close(v[0], c(0.0, 1.0), 1e-15));
        assert!(close(v[1], c(-1.0, 0.0), 1e-15));
        let w = steering_vector(-PI / 6.0, 2);
        assert!(close(w[0], v[0].conj(), 1e-15) && close(w[1], v[1].conj(), 1e-15));
    }

    #[test]
    fn no_targets_no_noise_is_zero() {
        let s = Scenario {
            targets: vec![],
            ..Scenario::reference()
        };
        let e =
            synthesize_echo(&SystemConfig::desk(), &s, Side::MbsRx, 0, 1, GainMode::Unit).unwrap();
        assert_eq!(e.data.dims(), [8, 8, 64]);
        assert!(e.data.as_slice().iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn single_antenna_amplitude_and_delay_ramp() {
        let cfg = one_antenna_config();
        let s = single_target(200.0, 30.0);
        let tau = bistatic_geometry(&s.targets[0].pos, &s.mbs_pos, &s.mibs_pos)
            .unwrap()
            .delay;
        for side in [Side::MbsRx, Side::MibsRx] {
            let link = LinkParams::for_side(&cfg, side);
            let e = synthesize_echo(&cfg, &s, side, 0, 0, GainMode::Unit).unwrap();
            let f = e.data.fiber(0, 0);
            let step = Complex64::from_polar(1.0, -2.0 * PI * link.scs_hz * tau);
            for n in 0..f.len() {
                assert!((f[n].norm() - link.amplitude()).abs() < 1e-12);
                if n + 1 < f.len() {
                    assert!(close(f[n + 1] / f[n], step, 1e-9));
                }
            }
        }
    }

    #[test]
    fn table_power_amplitude() {
        let link = LinkParams::for_side(&SystemConfig::full_scale(), Side::MibsRx);
        assert!((link.amplitude() - 39.81f64.sqrt()).abs() < 1e-3);
        assert!((link.amplitude() - 6.31).abs() < 0.005);
    }

    #[test]
    fn invalid_symbol_index() {
        let cfg = SystemConfig::desk();
        let r = synthesize_echo(
            &cfg,
            &Scenario::reference(),
            Side::MbsRx,
            cfg.n_symbols,
            0,
            GainMode::Unit,
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn doppler_phase_only_after_first_symbol() {
        let cfg = SystemConfig::desk();
        let mut s = single_target(200.0, 30.0);
        let still = synthesize_echo(&cfg, &s, Side::MbsRx, 0, 0, GainMode::Unit).unwrap();
        s.targets[0].speed = 30.0;
        let moving0 = synthesize_echo(&cfg, &s, Side::MbsRx, 0, 0, GainMode::Unit).unwrap();
        let moving3 = synthesize_echo(&cfg, &s, Side::MbsRx, 3, 0, GainMode::Unit).unwrap();
        assert_eq!(still, moving0);
        let geo = bistatic_geometry(&s.targets[0].pos, &s.mbs_pos, &s.mibs_pos).unwrap();
        let link = LinkParams::for_side(&cfg, Side::MbsRx);
        let fd = doppler_shift(&s.targets[0], geo.aoa, geo.aod, link.carrier_hz).unwrap();
        let rot = Complex64::from_polar(1.0, 2.0 * PI * fd * 3.0 * link.symbol_duration_s);
        assert!(close(
            moving3.data.get(2, 5, 7),
            still.data.get(2, 5, 7) * rot,
            1e-12
        ));
    }

    #[test]
    fn path_gain_examples() {
        let t = Target::stationary(1.0, 1.0);
        assert_eq!(
            path_gain(&t, (5.0, 5.0), 0.1, GainMode::Unit).unwrap(),
            c(1.0, 0.0)
        );
        let lambda = SPEED_OF_LIGHT / 2.6e9;
        assert!((lambda - 0.1153).abs() < 1e-4);
        let g = path_gain(&t, (100.0, 100.0), 0.1153, GainMode::BistaticRadar).unwrap();
        let oracle = 0.1153 / ((4.0 * PI).powf(1.5) * 100.0 * 100.0);
        assert!((g.re - oracle).abs() < 1e-20);
        assert!((g.re - 2.59e-7).abs() < 0.005e-7);
        let g2 = path_gain(&t, (200.0, 200.0), 0.1153, GainMode::BistaticRadar).unwrap();
        assert!((g.re / g2.re - 4.0).abs() < 1e-12);
        assert!(path_gain(&t, (0.0, 1.0), 0.1, GainMode::Unit).is_err());
    }

    #[test]
    fn cancellation_examples() {
        let raw = CTensor3::from_fn([2, 3, 4], |k, p, n| c(k as f64 + 0.5, p as f64 - n as f64));
        let ones = CTensor3::from_fn([1, 3, 4], |_, _, _| c(1.0, 0.0));
        let out = cancel_communication(&raw, &ones, 1.0, Side::MbsRx).unwrap();
        assert_eq!(out.data, raw);

        let s = c(0.3, -1.2);
        let x = Complex64::from_polar(1.0, 0.7);
        let raw = CTensor3::from_vec([1, 1, 1], vec![s * x]).unwrap();
        let sym = CTensor3::from_vec([1, 1, 1], vec![x]).unwrap();
        let out = cancel_communication(&raw, &sym, 1.0, Side::MibsRx).unwrap();
        assert!(close(out.data.get(0, 0, 0), s, 1e-15));

        let zero = CTensor3::zeros([1, 1, 1]);
        assert_eq!(
            cancel_communication(&raw, &zero, 1.0, Side::MibsRx),
            Err(Error::ZeroSymbol {
                tx: 0,
                subcarrier: 0
            })
        );
        let bad = CTensor3::zeros([1, 2, 1]);
        assert!(matches!(
            cancel_communication(&raw, &bad, 1.0, Side::MibsRx),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn cancellation_recovers_closed_form() {
        let cfg = SystemConfig::desk();
        let s = single_target(250.0, 60.0);
        for side in [Side::MbsRx, Side::MibsRx] {
            let (raw, sym) = synthesize_raw(&cfg, &s, side, 0, 9, GainMode::Unit).unwrap();
            let link = LinkParams::for_side(&cfg, side);
            let out = cancel_communication(&raw, &sym, link.scs_hz, side).unwrap();
            let closed = synthesize_echo(&cfg, &s, side, 0, 9, GainMode::Unit).unwrap();
            for (a, b) in out.data.as_slice().iter().zip(closed.data.as_slice()) {
                assert!(close(*a, *b, 1e-12 * b.norm().max(1.0)));
            }
        }
    }

    #[test]
    fn phase_ramps_and_reciprocity() {
        // Equal numerologies and powers on both links.
        let cfg = SystemConfig {
            scs_mbs_hz: 30e3,
            scs_mibs_hz: 30e3,
            tx_power_mibs_dbm: 46.0,
            carrier_freq_mibs_hz: 2.6e9,
            ..SystemConfig::desk()
        };
        let s = single_target(120.0, 70.0);
        let geo = bistatic_geometry(&s.targets[0].pos, &s.mbs_pos, &s.mibs_pos).unwrap();
        let mbs = synthesize_echo(&cfg, &s, Side::MbsRx, 0, 0, GainMode::Unit).unwrap();
        let mibs = synthesize_echo(&cfg, &s, Side::MibsRx, 0, 0, GainMode::Unit).unwrap();
        let rx = Complex64::from_polar(1.0, PI * geo.aoa.sin());
        let tx = Complex64::from_polar(1.0, PI * geo.aod.sin());
        assert!(close(
            mbs.data.get(3, 2, 5) / mbs.data.get(2, 2, 5),
            rx,
            1e-12
        ));
        assert!(close(
            mbs.data.get(2, 3, 5) / mbs.data.get(2, 2, 5),
            tx,
            1e-12
        ));
        assert!(close(
            mibs.data.get(3, 2, 5) / mibs.data.get(2, 2, 5),
            tx,
            1e-12
        ));
        let t = mibs.data.transpose01();
        for (a, b) in t.as_slice().iter().zip(mbs.data.as_slice()) {
            assert!(close(*a, *b, 1e-9));
        }
    }

    #[test]
    fn superposition_of_targets() {
        let cfg = SystemConfig::desk();
        let all = Scenario::reference();
        let sum = all
            .targets
            .iter()
            .map(|t| {
                let s = Scenario {
                    targets: vec![t.clone()],
                    ..all.clone()
                };
                synthesize_echo(&cfg, &s, Side::MibsRx, 0, 0, GainMode::BistaticRadar)
                    .unwrap()
                    .data
            })
            .reduce(|a, b| &a + &b)
            .unwrap();
        let joint =
            synthesize_echo(&cfg, &all, Side::MibsRx, 0, 0, GainMode::BistaticRadar).unwrap();
        for (a, b) in joint.data.as_slice().iter().zip(sum.as_slice()) {
            assert!(close(*a, *b, 1e-12 * b.norm()));
        }
    }

    #[test]
    fn noise_variance_matches_density() {
        let cfg = SystemConfig {
            n_rx: 16,
            n_tx: 16,
            n_subcarriers_mibs: 512,
            ..SystemConfig::desk()
        };
        let s = Scenario {
            targets: vec![],
            noise_psd_dbm_hz: Some(-150.0),
            ..Scenario::reference()
        };
        let e = synthesize_echo(&cfg, &s, Side::MbsRx, 0, 42, GainMode::Unit).unwrap();
        let n = e.data.as_slice().len();
        assert!(n >= 100_000);
        let var = e.data.energy() / n as f64;
        let expected = noise_variance(-150.0, cfg.scs_mibs_hz);
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn seeded_noise_is_reproducible_and_sides_differ() {
        let cfg = SystemConfig::desk();
        let s = Scenario::reference().with_noise(Some(-150.0));
        let a = synthesize_echo(&cfg, &s, Side::MbsRx, 0, 5, GainMode::Unit).unwrap();
        let b = synthesize_echo(&cfg, &s, Side::MbsRx, 0, 5, GainMode::Unit).unwrap();
        let c = synthesize_echo(&cfg, &s, Side::MbsRx, 0, 6, GainMode::Unit).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn geometry_errors_propagate() {
        let s = Scenario {
            targets: vec![Target {
                pos: Point::new(50.0, -1.0),
                ..Target::stationary(0.0, 0.0)
            }],
            ..Scenario::reference()
        };
        assert!(
            synthesize_echo(&SystemConfig::desk(), &s, Side::MbsRx, 0, 0, GainMode::Unit).is_err()
        );
    }

    proptest! {
        #[test]
        fn steering_has_unit_modulus(angle in -3.2..3.2f64, n in 1usize..40) {
            let v = steering_vector(angle, n);
            prop_assert_eq!(v.len(), n);
            for e in v {
                prop_assert!((e.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
