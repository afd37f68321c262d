use super::{LocalizationResult, Method, SpectrumResult};
use crate::error::{Error, Result};

/// Picks up to `n_targets` spectrum peaks.
///
/// Candidates are the lattice local maxima (every point for grids without a
/// lattice). They are taken in descending value, ties to the lower grid
/// index, and a candidate closer than `min_separation` to an accepted peak
/// is skipped.
pub fn pick_peaks(
    spectrum: &SpectrumResult<'_>,
    n_targets: usize,
    min_separation: f64,
) -> Result<LocalizationResult> {
    if n_targets == 0 {
        return Err(Error::Precondition("number of targets must be >= 1".into()));
    }
    let grid = spectrum.grid;
    let v = &spectrum.values;
    if v.len() != grid.n_grid() {
        return Err(Error::Shape(
            "spectrum length differs from grid size".into(),
        ));
    }
    let beats = |a: usize, b: usize| v[a] > v[b] || (v[a] == v[b] && a < b);
    let mut candidates: Vec<usize> = (0..v.len())
        .filter(|&g| grid.neighbours(g).into_iter().all(|nb| !beats(nb, g)))
        .collect();
    candidates.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));

    let mut picked: Vec<usize> = Vec::with_capacity(n_targets);
    for g in candidates {
        if picked.len() == n_targets {
            break;
        }
        let p = grid.points[g];
        if picked
            .iter()
            .all(|&q| grid.points[q].distance(&p) >= min_separation)
        {
            picked.push(g);
        }
    }
    Ok(LocalizationResult {
        incomplete: picked.len() < n_targets,
        estimates: picked.iter().map(|&g| grid.points[g]).collect(),
        peak_values: picked.iter().map(|&g| v[g]).collect(),
        method: Method::Gdft,
    })
}
