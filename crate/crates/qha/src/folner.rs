//! Følner ratios, region sequences, and amenability diagnostics.
//!
//! The deficiency ratio β_E(x) = μ(E \ Ex⁻¹)/μ(E) measures how far a set is
//! from right-translation invariance. A sequence (E_k) is Følner when
//! sup_K β_{E_k} → 0 on every compact K; on a connected group, pointwise
//! decay near the identity is already enough. Two constructors are provided:
//! convex scalings kV in abelian charts and dilations Γ_{r_k}(E) on the
//! homogeneous models. The affine dilation family is deliberately included
//! even though it is *not* Følner — it is the negative control for the
//! eigenvalue-accumulation experiments.

use crate::error::{Error, Result};
use crate::groups::{measure, measure_on, Grid, Group, Point, QuadSpec, Region, TranslateSide};
use rayon::prelude::*;

/// β_E(x) = (μ(E) − μ(E ∩ Ex⁻¹)) / μ(E), clamped to [0, 1].
pub fn beta(group: Group, region: &Region, x: Point, spec: QuadSpec) -> Result<f64> {
    group.validate(x)?;
    let mu = measure(group, region, spec)?;
    if mu <= 0.0 {
        return Err(Error::ZeroMeasure(region.label().into()));
    }
    Ok(beta_with_measure(group, region, x, spec, mu))
}

fn beta_with_measure(group: Group, region: &Region, x: Point, spec: QuadSpec, mu: f64) -> f64 {
    let shifted = region.translated(group, x, TranslateSide::RightInverse);
    let grid = Grid::over(group, region.bbox(), spec).expect("region grid");
    let overlap = measure_on(&grid, &region.intersect(&shifted));
    (1.0 - overlap / mu).clamp(0.0, 1.0)
}

/// How a region sequence is generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceKind {
    /// kV for a convex symmetric V in an abelian chart (scale = r_k).
    ConvexScaling,
    /// Γ_{r_k}(E) under the model's dilation family.
    Dilation,
}

/// A sequence of regions E_k, generated lazily from a base region and a
/// scale list.
#[derive(Clone, Debug)]
pub struct RegionSequence {
    group: Group,
    kind: SequenceKind,
    base: Region,
    scales: Vec<f64>,
}

impl RegionSequence {
    /// Convex scalings kV. Only valid on the abelian models, where
    /// V^k = kV holds exactly for convex symmetric V; word powers on the
    /// non-abelian models are out of scope.
    pub fn convex_scaling(group: Group, base: Region, scales: Vec<f64>) -> Result<Self> {
        if !group.is_abelian() {
            return Err(Error::Config(format!(
                "convex-scaling sequences are unsupported on the non-abelian model `{}`",
                group.name()
            )));
        }
        check_symmetric(group, &base)?;
        Ok(RegionSequence {
            group,
            kind: SequenceKind::ConvexScaling,
            base,
            scales,
        })
    }

    pub fn dilation(group: Group, base: Region, scales: Vec<f64>) -> Result<Self> {
        if scales.iter().any(|&r| r <= 0.0) {
            return Err(Error::Config("dilation scales must be positive".into()));
        }
        Ok(RegionSequence {
            group,
            kind: SequenceKind::Dilation,
            base,
            scales,
        })
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn scale(&self, k: usize) -> f64 {
        self.scales[k]
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    /// E_k for the k-th scale (0-based index into the scale list). Both
    /// kinds reduce to a dilation of the base region; they differ in their
    /// admissibility checks and intent.
    pub fn generate(&self, k: usize) -> Region {
        let r = self.scales[k];
        if r == 1.0 {
            self.base.clone()
        } else {
            self.base.dilated(self.group, r)
        }
    }
}

/// Sample-based symmetry check E = −E on the base region's bbox grid.
fn check_symmetric(group: Group, region: &Region) -> Result<()> {
    let grid = Grid::over(group, region.bbox(), QuadSpec::new(16))?;
    for idx in 0..grid.len() {
        let (p, _) = grid.node(idx);
        if region.contains(p) != region.contains(group.invert(p)) {
            return Err(Error::Config(format!(
                "convex-scaling base region `{}` is not symmetric",
                region.label()
            )));
        }
    }
    Ok(())
}

/// E⁻¹ as a region.
pub fn inverse_region(group: Group, region: &Region) -> Region {
    region.inverted(group)
}

#[derive(Clone, Debug)]
pub struct ProfileEntry {
    pub k: usize,
    pub scale: f64,
    pub mu: f64,
    /// max of β_{E_k} over the sampled nodes of K (a lower bound for the sup)
    pub sup_beta: f64,
    pub probe_beta: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FolnerProfile {
    pub entries: Vec<ProfileEntry>,
}

impl FolnerProfile {
    pub fn sup_betas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.sup_beta).collect()
    }
}

/// Per-k Følner diagnostics: sup of β_{E_k} over the quadrature nodes of a
/// compact set K, plus β at designated probe points.
pub fn folner_profile(
    group: Group,
    seq: &RegionSequence,
    compact: &Region,
    compact_per_axis: usize,
    probes: &[Point],
    spec: QuadSpec,
) -> Result<FolnerProfile> {
    if seq.is_empty() {
        return Err(Error::Config("empty scale sequence".into()));
    }
    for &p in probes {
        group.validate(p)?;
    }
    let kgrid = Grid::over(group, compact.bbox(), QuadSpec::new(compact_per_axis))?;
    let knodes: Vec<Point> = (0..kgrid.len())
        .map(|i| kgrid.node(i).0)
        .filter(|&p| compact.contains(p))
        .collect();
    if knodes.is_empty() {
        return Err(Error::Config("compact set contains no grid nodes".into()));
    }

    let entries: Result<Vec<ProfileEntry>> = (0..seq.len())
        .map(|k| {
            let ek = seq.generate(k);
            let mu = measure(group, &ek, spec)?;
            if mu <= 0.0 {
                return Err(Error::ZeroMeasure(ek.label().into()));
            }
            let sup_beta = knodes
                .par_iter()
                .map(|&x| beta_with_measure(group, &ek, x, spec, mu))
                .reduce(|| 0.0, f64::max);
            let probe_beta = probes
                .iter()
                .map(|&x| beta_with_measure(group, &ek, x, spec, mu))
                .collect();
            Ok(ProfileEntry {
                k: k + 1,
                scale: seq.scale(k),
                mu,
                sup_beta,
                probe_beta,
            })
        })
        .collect();
    Ok(FolnerProfile { entries: entries? })
}
