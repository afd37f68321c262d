//! 3D-DFT baseline: forward DFT along both antenna axes, inverse DFT along
//! the frequency axis, then peak indices mapped back to angles and delay.
//!
//! Normalization: the forward transforms are unnormalized and the inverse
//! carries `1 / n_bins`, so `Σ|X|² = (N_a · N_b / n_bins) · Σ|x|²`.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{ParamEstimate, SensingTensor, SpectrumResult};
use crate::error::{Error, Result};
use crate::scenario::GridSpec;
use crate::tensor::CTensor3;

/// Conversion from delay bin index to seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayScaling {
    /// `γ / (Δf · n_bins)`.
    #[default]
    Standard,
    /// `γ / (Δf · n_bins · N)` with `N` the antenna count.
    PaperLiteral,
}

fn transform_axis(
    t: &mut CTensor3,
    axis: usize,
    direction: FftDirection,
    planner: &mut FftPlanner<f64>,
) {
    let dims = t.dims();
    let len = dims[axis];
    if len == 1 {
        return;
    }
    let fft = planner.plan_fft(len, direction);
    let strides = [dims[1] * dims[2], dims[2], 1];
    let stride = strides[axis];
    let data = t.as_mut_slice();
    let mut line = vec![Complex64::new(0.0, 0.0); len];
    let (o1, o2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for i in 0..dims[o1] {
        for j in 0..dims[o2] {
            let base = i * strides[o1] + j * strides[o2];
            for (m, v) in line.iter_mut().enumerate() {
                *v = data[base + m * stride];
            }
            fft.process(&mut line);
            for (m, v) in line.iter().enumerate() {
                data[base + m * stride] = *v;
            }
        }
    }
}

/// DFT along both antenna axes and scaled IDFT along the bin axis.
pub fn dft3d_transform(input: &SensingTensor) -> CTensor3 {
    let mut t = input.data.clone();
    let mut planner = FftPlanner::new();
    transform_axis(&mut t, 0, FftDirection::Forward, &mut planner);
    transform_axis(&mut t, 1, FftDirection::Forward, &mut planner);
    transform_axis(&mut t, 2, FftDirection::Inverse, &mut planner);
    let n = input.n_bins() as f64;
    t.scale(Complex64::new(1.0 / n, 0.0));
    t
}

/// Sine of the angle belonging to spatial-frequency bin `i` of `n`, with
/// bins at or above `n/2` wrapped to negative frequencies.
fn bin_sine(i: usize, n: usize) -> f64 {
    let signed = if 2 * i >= n && n > 1 {
        i as f64 - n as f64
    } else {
        i as f64
    };
    2.0 * signed / n as f64
}

fn bin_delay(
    i: usize,
    spacing: f64,
    n_bins: usize,
    n_antennas: usize,
    scaling: DelayScaling,
) -> f64 {
    match scaling {
        DelayScaling::Standard => i as f64 / (spacing * n_bins as f64),
        DelayScaling::PaperLiteral => i as f64 / (spacing * n_bins as f64 * n_antennas as f64),
    }
}

/// Indices of 3D local maxima of `mag` (circular neighbourhood), strongest
/// first, ties to the lower flat index.
fn local_maxima(mag: &[f64], dims: [usize; 3]) -> Vec<usize> {
    let [a, b, c] = dims;
    let mut out = Vec::new();
    for i in 0..a {
        for j in 0..b {
            'cell: for k in 0..c {
                let idx = (i * b + j) * c + k;
                let v = mag[idx];
                if v == 0.0 {
                    continue;
                }
                for di in [a - 1, 0, 1] {
                    for dj in [b - 1, 0, 1] {
                        for dk in [c - 1, 0, 1] {
                            let nb = (((i + di) % a) * b + (j + dj) % b) * c + (k + dk) % c;
                            if nb == idx {
                                continue;
                            }
                            if mag[nb] > v || (mag[nb] == v && nb < idx) {
                                continue 'cell;
                            }
                        }
                    }
                }
                out.push(idx);
            }
        }
    }
    out.sort_by(|&x, &y| mag[y].total_cmp(&mag[x]).then(x.cmp(&y)));
    out
}

/// Estimates `(aoa, aod, delay)` of the `n_targets` strongest 3D-DFT peaks,
/// returned with their transform magnitudes in descending order.
pub fn dft3d_estimate(
    input: &SensingTensor,
    n_targets: usize,
    scaling: DelayScaling,
) -> Result<Vec<(ParamEstimate, f64)>> {
    if n_targets == 0 {
        return Err(Error::Precondition("number of targets must be >= 1".into()));
    }
    let t = dft3d_transform(input);
    let dims = t.dims();
    let mag: Vec<f64> = t.as_slice().iter().map(|v| v.norm()).collect();
    let peaks = local_maxima(&mag, dims);
    if peaks.len() < n_targets {
        return Err(Error::InsufficientPeaks {
            found: peaks.len(),
            requested: n_targets,
        });
    }
    let [na, nb, nc] = dims;
    Ok(peaks[..n_targets]
        .iter()
        .map(|&idx| {
            let alpha = idx / (nb * nc);
            let beta = (idx / nc) % nb;
            let gamma = idx % nc;
            let est = ParamEstimate {
                aoa: bin_sine(alpha, na).asin(),
                aod: bin_sine(beta, nb).asin(),
                delay: bin_delay(gamma, input.bin_spacing_hz, nc, na, scaling),
            };
            (est, mag[idx])
        })
        .collect())
}

/// 3D-DFT magnitude at the bin nearest to each grid point's parameters.
pub fn dft3d_grid_spectrum<'g>(
    input: &SensingTensor,
    grid: &'g GridSpec,
) -> Result<SpectrumResult<'g>> {
    if grid.n_grid() == 0 {
        return Err(Error::EmptyGrid);
    }
    let t = dft3d_transform(input);
    let [na, nb, nc] = t.dims();
    let wrap = |x: f64, n: usize| (x.round() as i64).rem_euclid(n as i64) as usize;
    let values = (0..grid.n_grid())
        .map(|g| {
            let a = wrap(grid.aoa[g].sin() * na as f64 / 2.0, na);
            let b = wrap(grid.aod[g].sin() * nb as f64 / 2.0, nb);
            let c = wrap(grid.delays[g] * input.bin_spacing_hz * nc as f64, nc);
            t.get(a, b, c).norm()
        })
        .collect();
    Ok(SpectrumResult { values, grid })
}
