//! Symbol-level fusion of the two receivers' echo tensors.
//!
//! The MiBS receiver observes the low-band transmission on a lattice of
//! spacing `Δf`, the MBS receiver the high-band one on spacing `Q·Δf`.
//! Both carry the same delay ramp, so after swapping the MiBS antenna axes
//! (its receive array sees the AoD, its transmit side the AoA) the two
//! tensors interleave on one fused `Δf` lattice: MBS subcarrier `n₁` lands
//! on bin `Q·n₁`, MiBS subcarrier `n₂` on bin `n₂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::scs_ratio;
use crate::tensor::CTensor3;
use crate::waveform::{EchoTensor, Side};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupancy {
    MibsOnly,
    MbsOnly,
    Overlap,
    Empty,
}

/// Scaling applied on bins observed by both receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Overlap bins hold `(a + b) / (2 N²)`.
    PaperLiteral,
    /// Overlap bins hold the plain average `(a + b) / 2`.
    #[default]
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionOptions {
    pub mode: FusionMode,
    /// Scale each link to unit RMS before fusing.
    pub equalize: bool,
    /// Use a depth of `Q·N_c¹ − 1` bins instead of the minimal covering depth.
    pub q_scaled_depth: bool,
}

impl FusionOptions {
    pub fn with_mode(mode: FusionMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedTensor {
    /// Axes: (AoA antenna, AoD antenna, fused bin).
    pub data: CTensor3,
    pub occupancy: Vec<Occupancy>,
    pub scs_base_hz: f64,
    pub mode: FusionMode,
    pub q: usize,
}

impl FusedTensor {
    pub fn n_bins(&self) -> usize {
        self.occupancy.len()
    }

    pub fn occupied_bins(&self) -> Vec<usize> {
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, o)| **o != Occupancy::Empty)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, state: Occupancy) -> usize {
        self.occupancy.iter().filter(|o| **o == state).count()
    }

    /// Baseband frequency offset of fused bin `n_prime`.
    pub fn bin_frequency(&self, n_prime: usize) -> Result<f64> {
        fused_bin_frequency(n_prime, self.scs_base_hz, self.n_bins())
    }
}

pub fn fused_bin_frequency(n_prime: usize, scs_base_hz: f64, n_bins: usize) -> Result<f64> {
    if n_prime >= n_bins {
        return Err(Error::OutOfRange {
            index: n_prime,
            len: n_bins,
        });
    }
    Ok(n_prime as f64 * scs_base_hz)
}

/// Number of fused bins needed to hold `n_mibs` MiBS subcarriers and
/// `n_mbs` MBS subcarriers at ratio `q`.
pub fn fused_depth(q: usize, n_mbs: usize, n_mibs: usize) -> usize {
    (q * (n_mbs - 1) + 1).max(n_mibs)
}

/// Occupancy of every fused bin.
pub fn occupancy_map(q: usize, n_mbs: usize, n_mibs: usize, n_bins: usize) -> Vec<Occupancy> {
    (0..n_bins)
        .map(|b| {
            let from_mibs = b < n_mibs;
            let from_mbs = b % q == 0 && b / q < n_mbs;
            match (from_mibs, from_mbs) {
                (true, true) => Occupancy::Overlap,
                (true, false) => Occupancy::MibsOnly,
                (false, true) => Occupancy::MbsOnly,
                (false, false) => Occupancy::Empty,
            }
        })
        .collect()
}

fn rms(t: &CTensor3) -> f64 {
    (t.energy() / t.as_slice().len() as f64).sqrt()
}

pub fn fuse_symbol_level(
    y_mbs: &EchoTensor,
    y_mibs: &EchoTensor,
    q: usize,
    opts: FusionOptions,
) -> Result<FusedTensor> {
    if y_mbs.side != Side::MbsRx || y_mibs.side != Side::MibsRx {
        return Err(Error::Shape(
            "expected one MBS-received and one MiBS-received tensor".into(),
        ));
    }
    let [a0, a1, n_mbs] = y_mbs.data.dims();
    let [b0, b1, n_mibs] = y_mibs.data.dims();
    if a0 != a1 || b0 != b1 || a0 != b0 {
        return Err(Error::Shape(format!(
            "antenna dimensions differ: {:?} vs {:?}",
            y_mbs.data.dims(),
            y_mibs.data.dims()
        )));
    }
    if n_mbs == 0 || n_mibs == 0 || a0 == 0 {
        return Err(Error::Shape("empty echo tensor".into()));
    }
    if q == 0 || scs_ratio(y_mbs.scs_hz, y_mibs.scs_hz)? != q {
        return Err(Error::Shape(format!(
            "q = {q} does not match spacing ratio {} / {}",
            y_mbs.scs_hz, y_mibs.scs_hz
        )));
    }
    let n = a0;
    let minimal = fused_depth(q, n_mbs, n_mibs);
    let n_bins = if opts.q_scaled_depth {
        let literal = (q * n_mibs).saturating_sub(1);
        if literal < minimal {
            return Err(Error::Shape(format!(
                "literal depth {literal} cannot hold {minimal} bins"
            )));
        }
        literal
    } else {
        minimal
    };
    let occupancy = occupancy_map(q, n_mbs, n_mibs, n_bins);

    let mut mibs_t = y_mibs.data.transpose01();
    let mut mbs = y_mbs.data.clone();
    if opts.equalize {
        for t in [&mut mibs_t, &mut mbs] {
            let r = rms(t);
            if r > 0.0 {
                t.scale(Complex64::new(1.0 / r, 0.0));
            }
        }
    }
    let overlap_scale = match opts.mode {
        FusionMode::PaperLiteral => 1.0 / (2.0 * (n * n) as f64),
        FusionMode::Normalized => 0.5,
    };

    let mut data = CTensor3::zeros([n, n, n_bins]);
    for k in 0..n {
        for p in 0..n {
            let a = mibs_t.fiber(k, p);
            let b = mbs.fiber(k, p);
            for (bin, occ) in occupancy.iter().enumerate() {
                let v = match occ {
                    Occupancy::MibsOnly => a[bin],
                    Occupancy::MbsOnly => b[bin / q],
                    Occupancy::Overlap => (a[bin] + b[bin / q]) * overlap_scale,
                    Occupancy::Empty => continue,
                };
                data.set(k, p, bin, v);
            }
        }
    }
    Ok(FusedTensor {
        data,
        occupancy,
        scs_base_hz: y_mibs.scs_hz,
        mode: opts.mode,
        q,
    })
}
