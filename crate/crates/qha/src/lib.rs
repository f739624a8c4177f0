//! Numerical laboratory for operator convolutions in quantum harmonic
//! analysis on locally compact groups.
//!
//! The crate builds localization-type operators χ_E ∗ S for concrete groups
//! and representations, computes their spectra, and measures how the
//! eigenvalue count near 1 tracks tr(S)·μ(E) as the sets E grow — the
//! behavior that separates unimodular groups with Følner sequences from the
//! rest. Everything is organized around five subsystems:
//!
//! - [`groups`] — group models in chart coordinates, Haar measures, regions,
//!   dilations, and midpoint quadrature;
//! - [`folner`] — the deficiency ratio β_E, region sequences, and Følner
//!   profiles (including the affine negative control);
//! - [`qrep`] — discretized Schrödinger and affine-wavelet representations,
//!   matrix coefficients, and Duflo-Moore calibration;
//! - [`opconv`] — function-operator and operator-operator convolutions by
//!   quadrature, densities, and the trace-identity checks;
//! - [`spectra`] — Hermitian eigendecomposition, eigenvalue counting,
//!   accumulation ratios, and the functional-calculus bounds;
//! - [`runner`] — the configuration-driven experiment runner behind the
//!   `qha` binary (CSV/JSON/SVG emission, manifests, determinism).
//!
//! Start with the runnable examples (`cargo run --release --example ...`)
//! for one walkthrough per capability.

pub mod error;
pub mod folner;
pub mod groups;
pub mod opconv;
pub mod qrep;
pub mod runner;
pub mod special;
pub mod spectra;

pub use error::{Error, Result};
