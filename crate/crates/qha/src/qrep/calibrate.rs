//! Duflo-Moore calibration against the orthogonality relation.
//!
//! For a square-integrable irreducible representation the matrix
//! coefficients satisfy
//!
//! ```text
//! <C_{psi1,phi1}, C_{psi2,phi2}>_{L2(G)} = <psi1, psi2> conj(<Dinv phi1, Dinv phi2>)
//! ```
//!
//! The multiplier *shape* of D is fixed by the model (a constant for
//! Schrödinger mod center, ξ^{1/2} on the affine Hardy space); the scalar in
//! front is fitted by least squares over a small test basis: stack the
//! left-hand Gram matrix L and the uncalibrated right-hand Gram R₀ over all
//! basis pairs and take c = Σ Re(L·conj(R₀)) / Σ|R₀|², giving D-scale
//! c^{-1/2}. The fit residual is reported and persisted with run manifests.

use super::{Rep, RepKind, SampleGrid, State, WindowSpec};
use crate::error::Result;
use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct CalibrationSettings {
    /// half-width of the group window in the translation coordinate
    pub window_b: f64,
    /// half-width in the second coordinate (modulation y, or log-scale τ)
    pub window_t: f64,
    pub nodes_b: usize,
    pub nodes_t: usize,
}

impl CalibrationSettings {
    pub fn default_for(kind: RepKind) -> CalibrationSettings {
        match kind {
            RepKind::Schrodinger => CalibrationSettings {
                window_b: 6.0,
                window_t: 6.0,
                nodes_b: 128,
                nodes_t: 128,
            },
            RepKind::AffineWavelet => CalibrationSettings {
                window_b: 32.0,
                window_t: 2.0,
                nodes_b: 512,
                nodes_t: 64,
            },
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CalibrationReport {
    /// fitted Duflo-Moore scalar (d, or the affine multiplier constant)
    pub scale: f64,
    /// relative Frobenius residual of the orthogonality fit
    pub residual: f64,
    /// raw least-squares coefficient c with scale = c^{-1/2}
    pub fitted_c: f64,
    pub basis_size: usize,
    pub group_nodes: usize,
}

/// Test basis: four states with nontrivial pairwise overlaps.
fn test_basis(rep: &Rep, grid: SampleGrid) -> Result<Vec<State>> {
    let probe = Rep::new(rep.kind, grid);
    match rep.kind {
        RepKind::Schrodinger => (0..4)
            .map(|k| probe.window(&WindowSpec::Hermite { k }))
            .collect(),
        RepKind::AffineWavelet => (0..4)
            .map(|j| {
                probe.window(&WindowSpec::MorletLike {
                    center_freq: 0.125 * (0.25 * j as f64).exp(),
                    width: 0.15,
                })
            })
            .collect(),
    }
}

/// Grid used for calibration quadratures. The affine model gets its own
/// finer grid so the far-translation chirps in the group window stay
/// resolved; the fitted scalar is a property of the representation, not of
/// the grid, and transfers to the experiment grid.
fn calibration_grid(rep: &Rep) -> SampleGrid {
    match rep.kind {
        RepKind::Schrodinger => rep.grid,
        RepKind::AffineWavelet => SampleGrid::centered(2048, 23.0, 0.0),
    }
}

pub(super) fn run(rep: &Rep, settings: &CalibrationSettings) -> Result<CalibrationReport> {
    let grid = calibration_grid(rep);
    let probe = Rep::new(rep.kind, grid);
    // clamp the translation window so the shifted test basis stays clear of
    // the grid edge on small grids; the coefficient mass outside the
    // clamped window is negligible for the Hermite basis
    let mut settings = settings.clone();
    if rep.kind == RepKind::Schrodinger {
        let max_half = (grid.extent / 2.0 - 4.0).max(2.0);
        settings.window_b = settings.window_b.min(max_half);
        settings.window_t = settings.window_t.min(max_half);
    }
    let settings = &settings;
    let basis = test_basis(rep, grid)?;
    let nb = basis.len();
    let pairs: Vec<(usize, usize)> = (0..nb)
        .flat_map(|i| (0..nb).map(move |j| (i, j)))
        .collect();

    // quadrature nodes over the truncated group window
    let hb = 2.0 * settings.window_b / settings.nodes_b as f64;
    let ht = 2.0 * settings.window_t / settings.nodes_t as f64;
    let node_weight = hb * ht;

    // rows of C values, computed per τ slab in index order so the Gram
    // accumulation below is run-to-run deterministic
    let slabs: Result<Vec<Vec<Vec<Complex64>>>> = (0..settings.nodes_t)
        .into_par_iter()
        .map(|it| {
            let t = -settings.window_t + (it as f64 + 0.5) * ht;
            // the shift (translation, or log-scale move) depends only on t
            let moved: Vec<State> = basis
                .iter()
                .map(|psi| probe.shift(psi, t))
                .collect::<Result<_>>()?;
            (0..settings.nodes_b)
                .map(|ib| {
                    let b = -settings.window_b + (ib as f64 + 0.5) * hb;
                    pairs
                        .iter()
                        .map(|&(i, j)| match rep.kind {
                            RepKind::Schrodinger => {
                                probe.modulate_unchecked(&moved[i], b).inner(&basis[j])
                            }
                            RepKind::AffineWavelet => {
                                probe.chirp_unchecked(&moved[i], b).inner(&basis[j])
                            }
                        })
                        .collect::<Result<Vec<Complex64>>>()
                })
                .collect()
        })
        .collect();
    let rows: Vec<Vec<Complex64>> = slabs?.into_iter().flatten().collect();

    // lhs Gram: <C_k, C_l> = sum_nodes C_k conj(C_l) * weight
    let np = pairs.len();
    let mut lhs = vec![Complex64::ZERO; np * np];
    for row in &rows {
        for k in 0..np {
            for l in 0..np {
                lhs[k * np + l] += row[k] * row[l].conj();
            }
        }
    }
    for v in &mut lhs {
        *v *= node_weight;
    }

    // rhs Gram with the uncalibrated multiplier
    let mut rhs = vec![Complex64::ZERO; np * np];
    let duflo0: Vec<State> = basis
        .iter()
        .map(|phi| match rep.kind {
            RepKind::Schrodinger => phi.clone(),
            RepKind::AffineWavelet => State {
                grid: phi.grid,
                values: phi
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (-0.5 * phi.grid.point(j)).exp())
                    .collect(),
            },
        })
        .collect();
    for (k, &(i1, j1)) in pairs.iter().enumerate() {
        for (l, &(i2, j2)) in pairs.iter().enumerate() {
            rhs[k * np + l] =
                basis[i1].inner(&basis[i2])? * duflo0[j1].inner(&duflo0[j2])?.conj();
        }
    }

    // scalar least squares lhs ≈ c rhs
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in lhs.iter().zip(&rhs) {
        num += (a * b.conj()).re;
        den += b.norm_sqr();
    }
    let c = num / den;
    let mut resid_sq = 0.0;
    let mut lhs_sq = 0.0;
    for (a, b) in lhs.iter().zip(&rhs) {
        resid_sq += (a - b * c).norm_sqr();
        lhs_sq += a.norm_sqr();
    }
    Ok(CalibrationReport {
        scale: c.powf(-0.5),
        residual: (resid_sq / lhs_sq).sqrt(),
        fitted_c: c,
        basis_size: nb,
        group_nodes: settings.nodes_b * settings.nodes_t,
    })
}
