use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{cis, SensingTensor, SpectrumResult};
use crate::error::{Error, Result};
use crate::scenario::GridSpec;

/// Occupied bins gathered contiguously, `(k, p, occupied bin)` layout.
fn compact(input: &SensingTensor) -> Vec<Complex64> {
    let (na, nb) = input.n_antennas();
    let mut out = Vec::with_capacity(na * nb * input.occupied.len());
    for k in 0..na {
        for p in 0..nb {
            let fiber = input.data.fiber(k, p);
            out.extend(input.occupied.iter().map(|&n| fiber[n]));
        }
    }
    out
}

/// Grid matched filter: for every grid point, the magnitude of the
/// correlation between the tensor and the steering/delay template of
/// that point.
///
/// Templates are generated per point and never stored; every point's sum
/// runs in the fixed order k, then p, then bin, so results do not depend
/// on the thread count.
pub fn gdft_spectrum<'g>(input: &SensingTensor, grid: &'g GridSpec) -> Result<SpectrumResult<'g>> {
    if grid.n_grid() == 0 {
        return Err(Error::EmptyGrid);
    }
    let (na, nb) = input.n_antennas();
    let freqs = input.bin_frequencies();
    let nf = freqs.len();
    let data = compact(input);

    let values = (0..grid.n_grid())
        .into_par_iter()
        .map(|g| {
            let s_aoa = grid.aoa[g].sin();
            let s_aod = grid.aod[g].sin();
            let tau = grid.delays[g];
            let delay: Vec<Complex64> = freqs.iter().map(|f| cis(2.0 * PI * f * tau)).collect();
            let aod: Vec<Complex64> = (1..=nb).map(|p| cis(-PI * p as f64 * s_aod)).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..na {
                let mut row = Complex64::new(0.0, 0.0);
                for (p, wp) in aod.iter().enumerate() {
                    let fiber = &data[(k * nb + p) * nf..(k * nb + p + 1) * nf];
                    let mut s = Complex64::new(0.0, 0.0);
                    for (d, h) in fiber.iter().zip(&delay) {
                        s += d * h;
                    }
                    row += wp * s;
                }
                acc += cis(-PI * (k + 1) as f64 * s_aoa) * row;
            }
            acc.norm()
        })
        .collect();
    Ok(SpectrumResult { values, grid })
}

/// Reference implementation: materializes each matching tensor, takes the
/// Hadamard product with the data and sums every entry.
pub fn gdft_spectrum_naive<'g>(
    input: &SensingTensor,
    grid: &'g GridSpec,
) -> Result<SpectrumResult<'g>> {
    if grid.n_grid() == 0 {
        return Err(Error::EmptyGrid);
    }
    let [na, nb, nbins] = input.data.dims();
    let mut occupied = vec![false; nbins];
    for &n in &input.occupied {
        occupied[n] = true;
    }
    let values = (0..grid.n_grid())
        .map(|g| {
            let mut hadamard = Vec::with_capacity(na * nb * nbins);
            for k in 1..=na {
                for p in 1..=nb {
                    for (n, occ) in occupied.iter().enumerate() {
                        let h = if *occ {
                            cis(-PI * k as f64 * grid.aoa[g].sin())
                                * cis(-PI * p as f64 * grid.aod[g].sin())
                                * cis(2.0 * PI * n as f64 * input.bin_spacing_hz * grid.delays[g])
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                        hadamard.push(h * input.data.get(k - 1, p - 1, n));
                    }
                }
            }
            hadamard.iter().sum::<Complex64>().norm()
        })
        .collect();
    Ok(SpectrumResult { values, grid })
}
