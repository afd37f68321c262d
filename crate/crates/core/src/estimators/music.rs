//! 3D-MUSIC baseline as three one-dimensional subspace searches: AoA from
//! the first-axis covariance, AoD from the second-axis covariance and delay
//! from the frequency-axis covariance. The per-axis peak lists are paired by
//! descending pseudo-spectrum value.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{cis, ParamEstimate, SensingTensor, SpectrumResult};
use crate::error::{Error, Result};
use crate::scenario::GridSpec;

/// Sample covariance along one axis of the (occupied) tensor.
fn covariance(input: &SensingTensor, axis: usize) -> DMatrix<Complex64> {
    let (na, nb) = input.n_antennas();
    let occ = &input.occupied;
    let dim = [na, nb, occ.len()][axis];
    let mut r = DMatrix::<Complex64>::zeros(dim, dim);
    let mut x = vec![Complex64::new(0.0, 0.0); dim];
    let mut snapshots = 0usize;
    let mut accumulate = |x: &[Complex64]| {
        for i in 0..dim {
            for j in 0..dim {
                r[(i, j)] += x[i] * x[j].conj();
            }
        }
    };
    match axis {
        0 => {
            for p in 0..nb {
                for &n in occ {
                    for (k, v) in x.iter_mut().enumerate() {
                        *v = input.data.get(k, p, n);
                    }
                    accumulate(&x);
                    snapshots += 1;
                }
            }
        }
        1 => {
            for k in 0..na {
                for &n in occ {
                    for (p, v) in x.iter_mut().enumerate() {
                        *v = input.data.get(k, p, n);
                    }
                    accumulate(&x);
                    snapshots += 1;
                }
            }
        }
        _ => {
            for k in 0..na {
                for p in 0..nb {
                    let fiber = input.data.fiber(k, p);
                    for (v, &n) in x.iter_mut().zip(occ) {
                        *v = fiber[n];
                    }
                    accumulate(&x);
                    snapshots += 1;
                }
            }
        }
    }
    r / Complex64::new(snapshots as f64, 0.0)
}

/// Orthonormal basis of the noise subspace (eigenvectors of the
/// `dim - n_signals` smallest eigenvalues), one vector per column.
fn noise_subspace(r: DMatrix<Complex64>, n_signals: usize) -> Result<DMatrix<Complex64>> {
    let dim = r.nrows();
    if dim < n_signals + 1 {
        return Err(Error::Rank {
            dim,
            n_targets: n_signals,
        });
    }
    let eig = r.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let cols: Vec<_> = order[..dim - n_signals]
        .iter()
        .map(|&c| eig.eigenvectors.column(c).into_owned())
        .collect();
    Ok(DMatrix::from_columns(&cols))
}

/// `‖E_nᴴ a‖² / ‖a‖²` for steering vector `a`.
fn projection(noise: &DMatrix<Complex64>, a: &[Complex64]) -> f64 {
    let norm_a: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let mut total = 0.0;
    for c in 0..noise.ncols() {
        let col = noise.column(c);
        let mut s = Complex64::new(0.0, 0.0);
        for (e, v) in col.iter().zip(a) {
            s += e.conj() * v;
        }
        total += s.norm_sqr();
    }
    total / norm_a
}

fn angle_steering(angle: f64, n: usize) -> Vec<Complex64> {
    let s = angle.sin();
    (1..=n).map(|k| cis(PI * k as f64 * s)).collect()
}

fn delay_steering(tau: f64, freqs: &[f64]) -> Vec<Complex64> {
    freqs.iter().map(|f| cis(-2.0 * PI * f * tau)).collect()
}

/// The three noise subspaces of an input, reusable for any evaluation.
pub struct MusicSpectra {
    aoa_noise: DMatrix<Complex64>,
    aod_noise: DMatrix<Complex64>,
    delay_noise: DMatrix<Complex64>,
    freqs: Vec<f64>,
    n_aoa: usize,
    n_aod: usize,
}

impl MusicSpectra {
    pub fn new(input: &SensingTensor, n_targets: usize) -> Result<Self> {
        if n_targets == 0 {
            return Err(Error::Precondition(
                "MUSIC needs the number of targets (>= 1)".into(),
            ));
        }
        let (n_aoa, n_aod) = input.n_antennas();
        Ok(Self {
            aoa_noise: noise_subspace(covariance(input, 0), n_targets)?,
            aod_noise: noise_subspace(covariance(input, 1), n_targets)?,
            delay_noise: noise_subspace(covariance(input, 2), n_targets)?,
            freqs: input.bin_frequencies(),
            n_aoa,
            n_aod,
        })
    }

    /// Normalized noise-subspace projections at `(aoa, aod, delay)`.
    pub fn projections(&self, aoa: f64, aod: f64, delay: f64) -> [f64; 3] {
        [
            projection(&self.aoa_noise, &angle_steering(aoa, self.n_aoa)),
            projection(&self.aod_noise, &angle_steering(aod, self.n_aod)),
            projection(&self.delay_noise, &delay_steering(delay, &self.freqs)),
        ]
    }
}

/// Pseudo-spectrum peaks over a 1D grid: up to `n` local maxima (edges
/// compare with their single neighbour), strongest first.
fn top_peaks(values: &[f64], n: usize) -> Vec<usize> {
    let len = values.len();
    let beats = |a: usize, b: usize| values[a] > values[b] || (values[a] == values[b] && a < b);
    let mut peaks: Vec<usize> = (0..len)
        .filter(|&i| (i == 0 || !beats(i - 1, i)) && (i + 1 == len || !beats(i + 1, i)))
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    peaks.truncate(n);
    peaks
}

fn pseudo(proj: f64) -> f64 {
    1.0 / proj.max(f64::MIN_POSITIVE)
}

/// Per-axis MUSIC estimates with their combined pseudo-spectrum value
/// (sum of the three axis values), strongest first.
///
/// Angles are searched on `angle_grid` points `-π/2 + iπ/angle_grid`, delay
/// on `delay_grid` points spanning one unambiguous period `1 / Δf`.
pub fn music3d_estimate(
    input: &SensingTensor,
    n_targets: usize,
    angle_grid: usize,
    delay_grid: usize,
) -> Result<Vec<(ParamEstimate, f64)>> {
    if angle_grid < 2 || delay_grid < 2 {
        return Err(Error::Precondition(
            "MUSIC search grids need >= 2 points".into(),
        ));
    }
    let spectra = MusicSpectra::new(input, n_targets)?;
    let angles: Vec<f64> = (0..angle_grid)
        .map(|i| -PI / 2.0 + i as f64 * PI / angle_grid as f64)
        .collect();
    let period = 1.0 / input.bin_spacing_hz;
    let delays: Vec<f64> = (0..delay_grid)
        .map(|i| i as f64 * period / delay_grid as f64)
        .collect();

    let aoa_ps: Vec<f64> = angles
        .iter()
        .map(|&a| {
            pseudo(projection(
                &spectra.aoa_noise,
                &angle_steering(a, spectra.n_aoa),
            ))
        })
        .collect();
    let aod_ps: Vec<f64> = angles
        .iter()
        .map(|&a| {
            pseudo(projection(
                &spectra.aod_noise,
                &angle_steering(a, spectra.n_aod),
            ))
        })
        .collect();
    let delay_ps: Vec<f64> = delays
        .iter()
        .map(|&t| {
            pseudo(projection(
                &spectra.delay_noise,
                &delay_steering(t, &spectra.freqs),
            ))
        })
        .collect();

    let a = top_peaks(&aoa_ps, n_targets);
    let b = top_peaks(&aod_ps, n_targets);
    let c = top_peaks(&delay_ps, n_targets);
    let found = a.len().min(b.len()).min(c.len());
    if found < n_targets {
        return Err(Error::InsufficientPeaks {
            found,
            requested: n_targets,
        });
    }
    Ok((0..n_targets)
        .map(|i| {
            (
                ParamEstimate {
                    aoa: angles[a[i]],
                    aod: angles[b[i]],
                    delay: delays[c[i]],
                },
                aoa_ps[a[i]] + aod_ps[b[i]] + delay_ps[c[i]],
            )
        })
        .collect())
}

/// Joint MUSIC map over a position grid: `1 / (sum of the three normalized
/// noise projections)` at each point's exact parameters.
pub fn music_grid_spectrum<'g>(
    input: &SensingTensor,
    grid: &'g GridSpec,
    n_targets: usize,
) -> Result<SpectrumResult<'g>> {
    if grid.n_grid() == 0 {
        return Err(Error::EmptyGrid);
    }
    let spectra = MusicSpectra::new(input, n_targets)?;
    let values = (0..grid.n_grid())
        .map(|g| {
            let p = spectra.projections(grid.aoa[g], grid.aod[g], grid.delays[g]);
            pseudo(p.iter().sum())
        })
        .collect();
    Ok(SpectrumResult { values, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_peaks_orders_and_limits() {
        let v = [1.0, 3.0, 2.0, 5.0, 4.0, 4.0, 0.0];
        assert_eq!(top_peaks(&v, 5), vec![3, 1]);
        assert_eq!(top_peaks(&v, 1), vec![3]);
        assert_eq!(top_peaks(&[2.0, 1.0, 2.0], 2), vec![0, 2]);
    }

    #[test]
    fn noise_subspace_rank_error() {
        let r = DMatrix::<Complex64>::identity(4, 4);
        assert_eq!(
            noise_subspace(r.clone(), 4).unwrap_err(),
            Error::Rank {
                dim: 4,
                n_targets: 4
            }
        );
        assert_eq!(noise_subspace(r, 3).unwrap().ncols(), 1);
    }
}
