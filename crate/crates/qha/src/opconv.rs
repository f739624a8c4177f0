//! Function-operator and operator-operator convolutions by quadrature.
//!
//! The function-operator convolution f ∗ S = ∫ f(x) π(x)* S π(x) dμ(x) is
//! assembled as a weighted sum of rank-one updates: S is factorized into its
//! significant eigencomponents, the adjoint orbit states π(x)*φ are produced
//! row by row (the expensive fractional shift depends only on the outer grid
//! axis), and each node contributes w·λ·ψψ* to the lower triangle of the
//! accumulator. The operator-operator convolution (S ∗ T)(x) = tr(S α_x(T))
//! collapses to matrix coefficients when both operators have low rank.
//!
//! Trace identities tie the two sides together and are exposed as explicit
//! reports: tr(f ∗ S) = tr(S)∫f dμ, the trace-of-square identity
//! tr((E ∗ S)²) = tr(S)∫h_S(x) μ(E ∩ x⁻¹E) dμ(x), and the integrated
//! operator-operator identity ∫ S ∗ A dμ = tr(S) tr(D⁻¹ A D⁻¹).

use crate::error::{Error, Result};
use crate::groups::{kahan_sum, measure, Grid, Group, Point, QuadSpec, Region};
use crate::qrep::{Operator, Rep, State};
use crate::spectra;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Eigencomponents below this fraction of the largest magnitude are dropped
/// when factorizing operators for quadrature loops.
const RANK_TOL: f64 = 1e-12;
/// Node batch size for the accumulation kernel (fixed for determinism).
const NODE_BATCH: usize = 64;
/// h_S windows must capture all but this much of the unit total integral.
pub const HS_MASS_TOL: f64 = 1e-3;

/// Quadrature nodes on a group with their Haar weights.
#[derive(Clone, Debug)]
pub struct NodeSet {
    pub group: Group,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl NodeSet {
    /// All grid nodes over a region's bounding box that lie in the region.
    pub fn over_region(group: Group, region: &Region, spec: QuadSpec) -> Result<NodeSet> {
        let grid = Grid::over(group, region.bbox(), spec)?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for idx in 0..grid.len() {
            let (p, w) = grid.node(idx);
            if region.contains(p) {
                points.push(p);
                weights.push(w);
            }
        }
        Ok(NodeSet {
            group,
            points,
            weights,
        })
    }

    /// Symmetric window around the identity: a box of half-width `half` in
    /// every chart coordinate (centered at scale 1 in log coordinates on the
    /// affine model).
    pub fn identity_window(group: Group, half: f64, per_axis: usize) -> Result<NodeSet> {
        let region = identity_window_region(group, half);
        NodeSet::over_region(group, &region, QuadSpec::new(per_axis))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn identity_window_region(group: Group, half: f64) -> Region {
    match group {
        Group::Affine => Region::rect([-half, (-half).exp()], [half, half.exp()]),
        Group::Euclidean(1) => Region::interval(-half, half),
        Group::Heisenberg => {
            Region::named_box("idwin", &[-half, -half, -half], &[half, half, half])
        }
        _ => Region::rect([-half, -half], [half, half]),
    }
}

/// Complex samples of a function on a node set.
#[derive(Clone, Debug)]
pub struct SampledGroupFunction {
    pub nodes: NodeSet,
    pub values: Vec<Complex64>,
}

impl SampledGroupFunction {
    pub fn integral(&self) -> Complex64 {
        let re: Vec<f64> = self
            .values
            .iter()
            .zip(&self.nodes.weights)
            .map(|(v, w)| v.re * w)
            .collect();
        let im: Vec<f64> = self
            .values
            .iter()
            .zip(&self.nodes.weights)
            .map(|(v, w)| v.im * w)
            .collect();
        Complex64::new(kahan_sum(&re), kahan_sum(&im))
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// The function factor of a function-operator convolution.
pub enum ConvWeight<'a> {
    /// χ_E over a quadrature grid on E's bounding box.
    Indicator(&'a Region, QuadSpec),
    /// An explicitly sampled function carrying its own nodes.
    Sampled(&'a SampledGroupFunction),
}

struct WeightedNodes {
    points: Vec<Point>,
    /// Haar weight times the (real) function value.
    factors: Vec<f64>,
}

fn collect_nodes(rep: &Rep, f: &ConvWeight) -> Result<WeightedNodes> {
    let group = rep.group();
    match f {
        ConvWeight::Indicator(region, spec) => {
            let set = NodeSet::over_region(group, region, *spec)?;
            if set.is_empty() {
                return Err(Error::ZeroMeasure(region.label().into()));
            }
            let factors = set.weights;
            Ok(WeightedNodes {
                points: set.points,
                factors,
            })
        }
        ConvWeight::Sampled(f) => {
            if f.nodes.group != group {
                return Err(Error::Config("sampled function lives on another group".into()));
            }
            let max_im = f.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
            let scale = f.sup_abs();
            if max_im > 1e-12 * scale.max(1.0) {
                return Err(Error::Config(
                    "function-operator convolution needs a real-valued weight".into(),
                ));
            }
            Ok(WeightedNodes {
                points: f.nodes.points.clone(),
                factors: f
                    .values
                    .iter()
                    .zip(&f.nodes.weights)
                    .map(|(v, w)| v.re * w)
                    .collect(),
            })
        }
    }
}

/// Significant eigencomponents (λ, unit state) of a Hermitian operator.
pub(crate) fn factorize(op: &Operator) -> Result<Vec<(f64, State)>> {
    let dev = op.hermitian_deviation();
    if dev > 1e-10 {
        return Err(Error::NotHermitian(dev));
    }
    let decomp = spectra::eigen(op)?;
    let h = op.grid.step();
    let lmax = decomp
        .values
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    let mut comps = Vec::new();
    for (i, &lam) in decomp.values.iter().enumerate() {
        if lam.abs() > RANK_TOL * lmax {
            let col = decomp.vectors.column(i);
            // unit h-weighted state from the unit l2 eigenvector
            let values: Vec<Complex64> = col.iter().map(|v| v / h.sqrt()).collect();
            comps.push((
                lam,
                State {
                    grid: op.grid,
                    values,
                },
            ));
        }
    }
    Ok(comps)
}

/// f ∗ S by midpoint quadrature.
///
/// For the indicator case S must be Hermitian PSD (flagged) — that is the
/// localization-operator setting; sampled weights accept any Hermitian S.
/// The result is Hermitian by construction and PSD whenever the weight is
/// nonnegative and S is PSD.
pub fn fo_conv(rep: &Rep, f: ConvWeight, s: &Operator) -> Result<Operator> {
    if s.grid != rep.grid {
        return Err(Error::GridMismatch);
    }
    if matches!(f, ConvWeight::Indicator(..)) && !s.psd {
        return Err(Error::NotPsd(f64::NAN));
    }
    let nodes = collect_nodes(rep, &f)?;
    let comps = factorize(s)?;
    let psd_out = s.psd && nodes.factors.iter().all(|&w| w >= 0.0);
    let mat = accumulate(rep, &nodes, &comps)?;
    Ok(Operator {
        grid: rep.grid,
        mat,
        hermitian: true,
        psd: psd_out,
    })
}

/// tr(f ∗ S) without assembling the operator: Σ_j w_j f_j Σ_c λ_c ‖ψ_{c,j}‖².
/// This is the exact trace of the quadrature operator (the trace of each
/// rank-one update is the squared state norm).
pub fn fo_conv_trace(rep: &Rep, f: ConvWeight, s: &Operator) -> Result<f64> {
    if s.grid != rep.grid {
        return Err(Error::GridMismatch);
    }
    let nodes = collect_nodes(rep, &f)?;
    let comps = factorize(s)?;
    let n = rep.grid.n;
    let h = rep.grid.step();
    let order = row_order(&nodes.points, rep);
    let mut terms = Vec::with_capacity(nodes.points.len());
    let mut row_key = f64::NAN;
    let mut rows: Vec<crate::qrep::ConvRow> = Vec::new();
    let mut buf = vec![Complex64::ZERO; n];
    for &idx in &order {
        if nodes.factors[idx] == 0.0 {
            continue;
        }
        let p = nodes.points[idx];
        let (c0, c1) = row_split(rep, p);
        if c0 != row_key {
            rows = comps
                .iter()
                .map(|(_, phi)| rep.conv_row(phi, c0))
                .collect::<Result<_>>()?;
            row_key = c0;
        }
        let mut t = 0.0;
        for ((lam, _), row) in comps.iter().zip(&rows) {
            rep.conv_node(row, c0, c1, &mut buf)?;
            let nrm: f64 = buf.iter().map(|v| v.norm_sqr()).sum::<f64>() * h;
            t += lam * nrm;
        }
        terms.push(t * nodes.factors[idx]);
    }
    Ok(kahan_sum(&terms))
}

/// Outer-axis coordinate (row) and inner coordinate for a node.
fn row_split(rep: &Rep, p: Point) -> (f64, f64) {
    match rep.kind {
        // rows over the translation x, nodes over the modulation y
        crate::qrep::RepKind::Schrodinger => (p.coord(0), p.coord(1)),
        // rows over the scale a, nodes over the translation b
        crate::qrep::RepKind::AffineWavelet => (p.coord(1), p.coord(0)),
    }
}

/// Node indices sorted so equal row coordinates are adjacent, preserving a
/// fixed deterministic order.
fn row_order(points: &[Point], rep: &Rep) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, ia) = row_split(rep, points[a]);
        let (rb, ib) = row_split(rep, points[b]);
        ra.partial_cmp(&rb)
            .unwrap()
            .then(ia.partial_cmp(&ib).unwrap())
    });
    order
}

/// Accumulates Σ_j factor_j Σ_c λ_c ψ ψ* over the lower triangle, batching
/// nodes and parallelizing over output columns. Deterministic: batches and
/// the per-column node order are fixed, independent of the thread count.
fn accumulate(rep: &Rep, nodes: &WeightedNodes, comps: &[(f64, State)]) -> Result<DMatrix<Complex64>> {
    let n = rep.grid.n;
    let h = rep.grid.step();
    let order = row_order(&nodes.points, rep);
    let m = order.len();

    // SoA accumulator, column-major lower triangle
    let mut acc_re = vec![0.0f64; n * n];
    let mut acc_im = vec![0.0f64; n * n];

    // batch state buffers
    let mut ys_re: Vec<Vec<f64>> = vec![vec![0.0; n]; NODE_BATCH * comps.len().max(1)];
    let mut ys_im: Vec<Vec<f64>> = vec![vec![0.0; n]; NODE_BATCH * comps.len().max(1)];
    let mut scales: Vec<f64> = vec![0.0; NODE_BATCH * comps.len().max(1)];

    let mut row_key = f64::NAN;
    let mut rows: Vec<crate::qrep::ConvRow> = Vec::new();
    let mut buf = vec![Complex64::ZERO; n];

    let mut start = 0usize;
    while start < m {
        let end = (start + NODE_BATCH).min(m);
        let mut filled = 0usize;
        for &idx in &order[start..end] {
            if nodes.factors[idx] == 0.0 {
                continue;
            }
            let p = nodes.points[idx];
            let (c0, c1) = row_split(rep, p);
            if c0 != row_key {
                rows = comps
                    .iter()
                    .map(|(_, phi)| rep.conv_row(phi, c0))
                    .collect::<Result<_>>()?;
                row_key = c0;
            }
            for ((lam, _), row) in comps.iter().zip(&rows) {
                rep.conv_node(row, c0, c1, &mut buf)?;
                for (j, v) in buf.iter().enumerate() {
                    ys_re[filled][j] = v.re;
                    ys_im[filled][j] = v.im;
                }
                // rank-one matrix is h psi psi^*, so fold h into the scale
                scales[filled] = nodes.factors[idx] * lam * h;
                filled += 1;
            }
        }

        // parallel over disjoint column strips; each strip loops the batch in
        // a fixed order
        let cols: Vec<(usize, &mut [f64])> = acc_re.chunks_mut(n).enumerate().collect();
        let cols_im: Vec<&mut [f64]> = acc_im.chunks_mut(n).collect();
        cols.into_par_iter()
            .zip(cols_im.into_par_iter())
            .for_each(|((j, cr), ci)| {
                for b in 0..filled {
                    let yr = &ys_re[b];
                    let yi = &ys_im[b];
                    // scal = scale * conj(y_j)
                    let sr = scales[b] * yr[j];
                    let si = -scales[b] * yi[j];
                    let (crj, cij) = (&mut cr[j..], &mut ci[j..]);
                    let (yrj, yij) = (&yr[j..], &yi[j..]);
                    for i in 0..crj.len() {
                        crj[i] += sr * yrj[i] - si * yij[i];
                        cij[i] += sr * yij[i] + si * yrj[i];
                    }
                }
            });
        start = end;
    }

    // mirror the lower triangle
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = Complex64::new(acc_re[j * n + i], acc_im[j * n + i]);
            mat[(i, j)] = v;
            mat[(j, i)] = v.conj();
        }
        mat[(j, j)] = Complex64::new(acc_re[j * n + j], 0.0);
    }
    Ok(mat)
}

/// Reference implementation by dense conjugation, for cross-checking the
/// batched kernel on small inputs.
pub fn fo_conv_dense_reference(rep: &Rep, f: ConvWeight, s: &Operator) -> Result<Operator> {
    let nodes = collect_nodes(rep, &f)?;
    let mut mat = DMatrix::<Complex64>::zeros(rep.grid.n, rep.grid.n);
    for (p, w) in nodes.points.iter().zip(&nodes.factors) {
        let a = rep.alpha(*p, s)?;
        mat += a.mat * Complex64::new(*w, 0.0);
    }
    Ok(Operator {
        grid: rep.grid,
        mat,
        hermitian: s.hermitian,
        psd: s.psd,
    })
}

/// (S ∗ T)(x) = tr(S α_x(T)) over a node set.
///
/// Both operators are factorized; if T has low rank the value reduces to
/// sums of |⟨π(x)*ψ_t, φ_s⟩|²-type matrix coefficients, otherwise T is
/// applied densely to the π(x)φ_s.
pub fn oo_conv(rep: &Rep, s: &Operator, t: &Operator, nodes: &NodeSet) -> Result<SampledGroupFunction> {
    if s.grid != rep.grid || t.grid != rep.grid {
        return Err(Error::GridMismatch);
    }
    let s_comps = factorize(s)?;
    let t_comps = factorize(t)?;
    let low_rank = t_comps.len() <= 32;
    let values: Result<Vec<Complex64>> = nodes
        .points
        .par_iter()
        .map(|&x| {
            if low_rank {
                oo_value_low_rank(rep, &s_comps, &t_comps, x)
            } else {
                oo_value_dense_t(rep, &s_comps, t, x)
            }
        })
        .collect();
    Ok(SampledGroupFunction {
        nodes: nodes.clone(),
        values: values?,
    })
}

/// Single-point evaluation of (S ∗ T)(x) from precomputed factors.
pub(crate) fn oo_value_low_rank(
    rep: &Rep,
    s_comps: &[(f64, State)],
    t_comps: &[(f64, State)],
    x: Point,
) -> Result<Complex64> {
    let mut acc = 0.0;
    for (nu, psi) in t_comps {
        let moved = rep.apply_adjoint(x, psi)?;
        for (lam, phi) in s_comps {
            // tr((h phi phi^*) (h chi chi^*)) = |<chi, phi>|^2
            acc += lam * nu * moved.inner(phi)?.norm_sqr();
        }
    }
    Ok(Complex64::new(acc, 0.0))
}

fn oo_value_dense_t(
    rep: &Rep,
    s_comps: &[(f64, State)],
    t: &Operator,
    x: Point,
) -> Result<Complex64> {
    let mut acc = Complex64::ZERO;
    for (lam, phi) in s_comps {
        let moved = rep.apply(x, phi)?;
        let t_moved = t.apply_state(&moved)?;
        acc += t_moved.inner(&moved)? * *lam;
    }
    Ok(acc)
}

/// A normalized density operator: PSD, trace class, tr(D⁻¹ S D⁻¹) = 1.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub op: Operator,
    pub trace: f64,
    /// tr(D⁻¹ S D⁻¹) after normalization (= 1 up to rounding)
    pub weighted_trace: f64,
    /// the factor the raw operator was multiplied by
    pub scale_applied: f64,
}

/// Rescales a Hermitian PSD operator so that tr(D⁻¹ S D⁻¹) = 1. On the
/// mod-center Schrödinger model this is tr(S) = d².
pub fn normalize_density(rep: &Rep, raw: &Operator) -> Result<DensityOperator> {
    if raw.grid != rep.grid {
        return Err(Error::GridMismatch);
    }
    let comps = factorize(raw)?;
    if comps.is_empty() {
        return Err(Error::ZeroMeasure("density operator".into()));
    }
    let trace_raw: f64 = comps.iter().map(|(l, _)| l).sum();
    if let Some((lmin, _)) = comps
        .iter()
        .filter(|(l, _)| *l < 0.0)
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
    {
        if *lmin < -1e-8 * trace_raw.abs() {
            return Err(Error::NotPsd(*lmin));
        }
    }
    let mut weighted = 0.0;
    for (lam, phi) in &comps {
        if *lam > 0.0 {
            weighted += lam * rep.duflo_inv_weight(phi)?;
        }
    }
    if !(weighted.is_finite()) || weighted <= 0.0 || weighted > 1e12 * trace_raw {
        return Err(Error::guard(
            "non-admissible",
            format!("tr(Dinv S Dinv) = {weighted:.3e} is outside the admissible range"),
        ));
    }
    let scale = 1.0 / weighted;
    let mut op = raw.clone();
    op.mat *= Complex64::new(scale, 0.0);
    op.hermitian = true;
    op.psd = true;
    Ok(DensityOperator {
        trace: trace_raw * scale,
        weighted_trace: 1.0,
        scale_applied: scale,
        op,
    })
}

/// h_S = tr(S)⁻¹ (S ∗ S) on a node window, with its integral, its value at
/// the identity (= tr(S²)/tr(S), computed exactly), and the truncation
/// deficit of the window.
#[derive(Clone, Debug)]
pub struct HsFunction {
    pub fun: SampledGroupFunction,
    pub integral: f64,
    pub at_identity: f64,
    pub truncated_mass: f64,
}

pub fn h_s(rep: &Rep, s: &DensityOperator, nodes: &NodeSet) -> Result<HsFunction> {
    if s.trace <= 0.0 {
        return Err(Error::ZeroMeasure("density operator trace".into()));
    }
    let raw = oo_conv(rep, &s.op, &s.op, nodes)?;
    let scale = 1.0 / s.trace;
    let fun = SampledGroupFunction {
        nodes: raw.nodes,
        values: raw.values.iter().map(|v| v * scale).collect(),
    };
    let integral = fun.integral().re;
    let at_identity = s.op.frobenius_sq() / s.trace;
    Ok(HsFunction {
        truncated_mass: (1.0 - integral).abs(),
        fun,
        integral,
        at_identity,
    })
}

/// Checks that the h_S window captured enough mass; pipelines abort through
/// this guard rather than silently using a truncated integral.
pub fn check_hs_mass(hs: &HsFunction) -> Result<()> {
    if hs.truncated_mass > HS_MASS_TOL {
        return Err(Error::guard(
            "hs-truncation",
            format!(
                "h_S window captures only {:.6} of the unit integral (deficit {:.2e})",
                hs.integral, hs.truncated_mass
            ),
        ));
    }
    Ok(())
}

/// ∫ h_S(x) μ(E ∩ x⁻¹E) dμ(x) — the overlap integral on the right-hand
/// side of the trace-of-square identity and of the accumulation bound.
pub fn hs_overlap_integral(
    group: Group,
    hs: &HsFunction,
    region: &Region,
    measure_spec: QuadSpec,
) -> Result<f64> {
    let grid = Grid::over(group, region.bbox(), measure_spec)?;
    // cache region nodes once; for each x sum Haar weights of nodes y with
    // y in E and x y in E
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for idx in 0..grid.len() {
        let (p, w) = grid.node(idx);
        if region.contains(p) {
            pts.push(p);
            wts.push(w);
        }
    }
    let terms: Vec<f64> = hs
        .fun
        .nodes
        .points
        .par_iter()
        .zip(&hs.fun.nodes.weights)
        .zip(&hs.fun.values)
        .map(|((&x, &wx), v)| {
            let mut overlap = 0.0;
            for (&y, &wy) in pts.iter().zip(&wts) {
                if region.contains(group.multiply(x, y)) {
                    overlap += wy;
                }
            }
            v.re * wx * overlap
        })
        .collect();
    Ok(kahan_sum(&terms))
}

#[derive(Clone, Debug)]
pub struct TraceSquareReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub truncated_mass: f64,
}

/// tr((E ∗ S)²) against tr(S) ∫ h_S(x) μ(E ∩ x⁻¹E) dμ(x). The left side is
/// the Frobenius norm of the assembled operator, the right side a group-side
/// double quadrature — two independent routes to the same number.
pub fn trace_of_square_identity(
    rep: &Rep,
    region: &Region,
    s: &DensityOperator,
    quad: QuadSpec,
    hs_nodes: &NodeSet,
    measure_spec: QuadSpec,
) -> Result<TraceSquareReport> {
    let mu = measure(rep.group(), region, measure_spec)?;
    if mu <= 0.0 {
        return Err(Error::ZeroMeasure(region.label().into()));
    }
    let op = fo_conv(rep, ConvWeight::Indicator(region, quad), &s.op)?;
    let lhs = op.frobenius_sq();
    let hs = h_s(rep, s, hs_nodes)?;
    check_hs_mass(&hs)?;
    let rhs = s.trace * hs_overlap_integral(rep.group(), &hs, region, measure_spec)?;
    Ok(TraceSquareReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE),
        truncated_mass: hs.truncated_mass,
    })
}

/// Max over sample points of |((f∗S)∗T)(x) − (f∗(S∗T))(x)|.
///
/// The left route assembles the operator f∗S and convolves it with T; the
/// right route convolves the scalar function S∗T with f directly:
/// (f ∗ g)(x) = ∫ f(y) g(x y⁻¹) dμ(y).
pub fn associativity_check(
    rep: &Rep,
    f: &SampledGroupFunction,
    s: &Operator,
    t: &Operator,
    samples: &[Point],
) -> Result<f64> {
    let group = rep.group();
    let fs = fo_conv(rep, ConvWeight::Sampled(f), s)?;
    let fs_comps = factorize(&fs)?;
    let t_comps = factorize(t)?;
    let s_comps = factorize(s)?;
    // full-rank T (e.g. the identity) factorizes into delta-like states the
    // adjoint orbit cannot carry; use the dense-T route there
    let low_rank = t_comps.len() <= 32;
    let value = |comps: &[(f64, State)], x: Point| -> Result<Complex64> {
        if low_rank {
            oo_value_low_rank(rep, comps, &t_comps, x)
        } else {
            oo_value_dense_t(rep, comps, t, x)
        }
    };
    let mut max_diff = 0.0f64;
    for &x in samples {
        let lhs = value(&fs_comps, x)?;
        // rhs: integrate f(y) (S*T)(x y^{-1}) over f's nodes
        let terms: Result<Vec<Complex64>> = f
            .nodes
            .points
            .par_iter()
            .zip(&f.nodes.weights)
            .zip(&f.values)
            .map(|((&y, &w), fv)| {
                let arg = group.multiply(x, group.invert(y));
                Ok(value(&s_comps, arg)? * fv * w)
            })
            .collect();
        let rhs: Complex64 = terms?.into_iter().sum();
        max_diff = max_diff.max((lhs - rhs).norm());
    }
    Ok(max_diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::point2;
    use crate::qrep::{hermite_state, SampleGrid, WindowSpec};
    use crate::special::reg_lower_gamma;

    fn schrod(n: usize, extent: f64) -> Rep {
        Rep::schrodinger(SampleGrid::new(n, extent))
    }

    fn gaussian_density(rep: &Rep) -> DensityOperator {
        let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
        let op = Operator::rank_one(&phi, &phi).unwrap();
        normalize_density(rep, &op).unwrap()
    }

    #[test]
    fn zero_weight_gives_zero_operator() {
        let rep = schrod(64, 8.0);
        let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
        let s = Operator::rank_one(&phi, &phi).unwrap();
        let nodes = NodeSet::identity_window(rep.group(), 1.0, 4).unwrap();
        let f = SampledGroupFunction {
            values: vec![Complex64::ZERO; nodes.len()],
            nodes,
        };
        let out = fo_conv(&rep, ConvWeight::Sampled(&f), &s).unwrap();
        assert!(out.frobenius_sq() < 1e-30);
    }

    #[test]
    fn batched_kernel_matches_dense_reference() {
        let rep = schrod(64, 8.0);
        let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
        let h1 = hermite_state(rep.grid, 1);
        let s = Operator::mixture(&[(0.6, phi), (0.4, h1)]).unwrap();
        let e = Region::disk([0.1, -0.2], 1.0);
        let spec = QuadSpec::new(6);
        let fast = fo_conv(&rep, ConvWeight::Indicator(&e, spec), &s).unwrap();
        let slow = fo_conv_dense_reference(&rep, ConvWeight::Indicator(&e, spec), &s).unwrap();
        let diff = (&fast.mat - &slow.mat).norm() / slow.mat.norm();
        assert!(diff < 1e-10, "kernel mismatch {diff}");
        assert!(fast.hermitian && fast.psd);
        assert!(fast.hermitian_deviation() < 1e-12);
    }

    #[test]
    fn trace_identity_disk() {
        // tr(chi_E * S) = tr(S) mu(E)
        let rep = schrod(256, 16.0);
        let s = gaussian_density(&rep);
        // generic center so the midpoint boundary error has no lattice
        // resonance with the grid
        let e = Region::disk([0.11, -0.07], 1.5);
        let tr = fo_conv_trace(&rep, ConvWeight::Indicator(&e, QuadSpec::new(256)), &s.op).unwrap();
        let exact = s.trace * std::f64::consts::PI * 1.5 * 1.5;
        assert!(
            (tr - exact).abs() / exact < 1e-3,
            "tr={tr} vs {exact} (rel {:.2e})",
            (tr - exact).abs() / exact
        );
    }

    #[test]
    fn trace_path_matches_assembled_trace() {
        let rep = schrod(128, 12.0);
        let s = gaussian_density(&rep);
        let e = Region::disk([0.0, 0.0], 1.0);
        let spec = QuadSpec::new(32);
        let t1 = fo_conv_trace(&rep, ConvWeight::Indicator(&e, spec), &s.op).unwrap();
        let op = fo_conv(&rep, ConvWeight::Indicator(&e, spec), &s.op).unwrap();
        let t2 = op.trace().re;
        assert!((t1 - t2).abs() < 1e-10 * t1.abs().max(1.0));
    }

    #[test]
    fn disk_eigenvalues_match_incomplete_gamma_oracle() {
        // small version of the anti-Wick oracle check
        let rep = schrod(256, 16.0);
        let s = gaussian_density(&rep);
        let e = Region::disk([0.0, 0.0], 1.0);
        let op = fo_conv(&rep, ConvWeight::Indicator(&e, QuadSpec::new(256)), &s.op).unwrap();
        let lam = crate::spectra::eigen(&op).unwrap().values;
        let x = std::f64::consts::PI;
        for n in 0..10 {
            let oracle = reg_lower_gamma(n as f64 + 1.0, x);
            assert!(
                (lam[n] - oracle).abs() < 1e-3,
                "n={n}: {} vs {oracle}",
                lam[n]
            );
        }
    }

    #[test]
    fn indicator_conv_rejects_non_psd() {
        let rep = schrod(64, 8.0);
        let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
        let h1 = hermite_state(rep.grid, 1);
        let s = Operator::mixture(&[(0.5, phi), (-0.5, h1)]).unwrap();
        let e = Region::disk([0.0, 0.0], 1.0);
        assert!(matches!(
            fo_conv(&rep, ConvWeight::Indicator(&e, QuadSpec::new(8)), &s),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn oo_conv_gaussian_autocorrelation() {
        // (S*S)(x) = e^{-pi |x|^2} for the unit Gaussian projector
        let rep = schrod(256, 16.0);
        let s = gaussian_density(&rep);
        let nodes = NodeSet::identity_window(rep.group(), 2.0, 16).unwrap();
        let f = oo_conv(&rep, &s.op, &s.op, &nodes).unwrap();
        for (p, v) in f.nodes.points.iter().zip(&f.values) {
            let expect = (-std::f64::consts::PI * (p.coord(0).powi(2) + p.coord(1).powi(2))).exp();
            assert!((v.re - expect).abs() < 1e-8 && v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn oo_conv_sup_bound() {
        // sup |S*T| <= ||S||_tr ||T||_op
        let rep = schrod(128, 12.0);
        let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
        let h2 = hermite_state(rep.grid, 2);
        let s = Operator::mixture(&[(0.7, phi), (0.3, h2.clone())]).unwrap();
        let t = Operator::mixture(&[(0.9, h2)]).unwrap();
        let nodes = NodeSet::identity_window(rep.group(), 2.0, 12).unwrap();
        let f = oo_conv(&rep, &s, &t, &nodes).unwrap();
        // trace norm 1.0, operator norm 0.9
        assert!(f.sup_abs() <= 1.0 * 0.9 + 1e-9);
    }

    #[test]
    fn oo_conv_with_identity_is_constant_trace() {
        let rep = schrod(64, 8.0);
        let s = gaussian_density(&rep);
        let t = Operator::identity(rep.grid);
        let nodes = NodeSet::identity_window(rep.group(), 1.0, 4).unwrap();
        let f = oo_conv(&rep, &s.op, &t, &nodes).unwrap();
        for v in &f.values {
            assert!((v.re - s.trace).abs() < 1e-9 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn h_s_properties() {
        let rep = schrod(256, 16.0);
        let s = gaussian_density(&rep);
        let nodes = NodeSet::identity_window(rep.group(), 3.2, 96).unwrap();
        let hs = h_s(&rep, &s, &nodes).unwrap();
        // total integral 1
        assert!(
            (hs.integral - 1.0).abs() < 1e-2,
            "integral = {}",
            hs.integral
        );
        // h_S(e) = tr(S^2)/tr(S) = 1 for a rank-one density
        assert!((hs.at_identity - 1.0).abs() < 1e-9);
        // non-negative and symmetric: h_S(x^{-1}) = h_S(x)
        let g = rep.group();
        let s_comps = factorize(&s.op).unwrap();
        for &x in &[point2(0.3, 0.7), point2(-1.1, 0.2)] {
            let a = oo_value_low_rank(&rep, &s_comps, &s_comps, x).unwrap().re;
            let b = oo_value_low_rank(&rep, &s_comps, &s_comps, g.invert(x))
                .unwrap()
                .re;
            assert!(a >= 0.0 && (a - b).abs() < 1e-9 * a.max(1e-12));
        }
    }

    #[test]
    fn hs_mass_guard_trips_on_small_window() {
        let rep = schrod(256, 16.0);
        let s = gaussian_density(&rep);
        let nodes = NodeSet::identity_window(rep.group(), 0.5, 32).unwrap();
        let hs = h_s(&rep, &s, &nodes).unwrap();
        assert!(matches!(
            check_hs_mass(&hs),
            Err(Error::Guard { guard: "hs-truncation", .. })
        ));
    }

    #[test]
    fn normalize_density_examples() {
        let rep = schrod(128, 12.0);
        let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
        // unit Gaussian projector is already normalized (d = 1)
        let s1 = normalize_density(&rep, &Operator::rank_one(&phi, &phi).unwrap()).unwrap();
        assert!((s1.scale_applied - 1.0).abs() < 1e-9);
        assert!((s1.trace - 1.0).abs() < 1e-9);
        // doubled operator is scaled back by 1/2
        let mut doubled = Operator::rank_one(&phi, &phi).unwrap();
        doubled.mat *= Complex64::new(2.0, 0.0);
        let s2 = normalize_density(&rep, &doubled).unwrap();
        assert!((s2.scale_applied - 0.5).abs() < 1e-9);
        // orthonormal rank-one mixture with trace 1 is unchanged
        let parts: Vec<(f64, State)> = [0.4, 0.3, 0.2, 0.1]
            .iter()
            .enumerate()
            .map(|(k, &w)| (w, hermite_state(rep.grid, k)))
            .collect();
        let mixed = Operator::mixture(&parts).unwrap();
        let s3 = normalize_density(&rep, &mixed).unwrap();
        assert!((s3.scale_applied - 1.0).abs() < 1e-6, "{}", s3.scale_applied);
    }

    #[test]
    fn trace_of_square_small_region_taylor() {
        // for a tiny box, tr((E*S)^2) ~ mu(E)^2 tr(S) h_S(e)
        let rep = schrod(256, 16.0);
        let s = gaussian_density(&rep);
        let side = 0.05;
        let e = Region::rect([-side / 2.0, -side / 2.0], [side / 2.0, side / 2.0]);
        let op = fo_conv(&rep, ConvWeight::Indicator(&e, QuadSpec::new(16)), &s.op).unwrap();
        let lhs = op.frobenius_sq();
        let mu = side * side;
        let expect = mu * mu * s.trace * 1.0; // h_S(e) = 1
        assert!((lhs - expect).abs() / expect < 1e-2, "lhs={lhs} expect={expect}");
    }

    #[test]
    fn associativity_of_convolutions() {
        let rep = schrod(128, 12.0);
        let g = rep.group();
        let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
        let h1 = hermite_state(rep.grid, 1);
        let s = Operator::rank_one(&phi, &phi).unwrap();
        let t = Operator::rank_one(&h1, &h1).unwrap();
        // gaussian-windowed weight on a small window
        let nodes = NodeSet::identity_window(g, 2.0, 24).unwrap();
        let values = nodes
            .points
            .iter()
            .map(|p| {
                Complex64::new(
                    (-(p.coord(0).powi(2) + p.coord(1).powi(2))).exp(),
                    0.0,
                )
            })
            .collect();
        let f = SampledGroupFunction { nodes, values };
        let samples = [g.identity(), point2(0.4, -0.3), point2(-0.8, 0.6)];
        let resid = associativity_check(&rep, &f, &s, &t, &samples).unwrap();
        // scale: ||f||_1 ||S||_tr ||T||_op
        let f_l1 = f.integral().re;
        assert!(resid <= 1e-3 * f_l1, "residual {resid} vs scale {f_l1}");
    }

    #[test]
    fn oo_conv_zero_t_is_zero() {
        let rep = schrod(64, 8.0);
        let s = gaussian_density(&rep);
        let t = Operator::zero(rep.grid);
        let nodes = NodeSet::identity_window(rep.group(), 1.0, 4).unwrap();
        let f = oo_conv(&rep, &s.op, &t, &nodes).unwrap();
        assert!(f.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn integrated_identity_both_models() {
        // int_G (S * A) dmu = tr(S) tr(Dinv A Dinv) with A independent of S
        let rep = schrod(256, 16.0);
        let s = gaussian_density(&rep);
        let h2 = hermite_state(rep.grid, 2);
        let a = Operator::rank_one(&h2, &h2).unwrap();
        let nodes = NodeSet::identity_window(rep.group(), 4.0, 96).unwrap();
        let f = oo_conv(&rep, &s.op, &a, &nodes).unwrap();
        let lhs = f.integral().re;
        let rhs = s.trace * rep.duflo_inv_weight(&h2).unwrap();
        assert!(
            (lhs - rhs).abs() / rhs < 1e-2,
            "schrodinger: lhs={lhs} rhs={rhs}"
        );

        let rep = Rep::affine_wavelet(crate::qrep::SampleGrid::centered(1024, 23.0, 6.0));
        let phi = rep
            .window(&WindowSpec::MorletLike {
                center_freq: 0.125,
                width: 0.3,
            })
            .unwrap();
        let psi = rep
            .window(&WindowSpec::MorletLike {
                center_freq: 0.25,
                width: 0.25,
            })
            .unwrap();
        let s = normalize_density(&rep, &Operator::rank_one(&phi, &phi).unwrap()).unwrap();
        let a = Operator::rank_one(&psi, &psi).unwrap();
        // window wide enough in b for the slow coefficient decay, a few
        // correlation widths in the log-scale direction
        let region = Region::rect([-12.0, (-2.5f64).exp()], [12.0, 2.5f64.exp()]);
        let nodes = NodeSet::over_region(rep.group(), &region, QuadSpec::new(128)).unwrap();
        let f = oo_conv(&rep, &s.op, &a, &nodes).unwrap();
        let lhs = f.integral().re;
        let rhs = s.trace * rep.duflo_inv_weight(&psi).unwrap();
        assert!((lhs - rhs).abs() / rhs < 1e-2, "affine: lhs={lhs} rhs={rhs}");
    }

    #[test]
    fn associativity_with_identity_t() {
        // f = indicator-like weight, T = I: both routes equal tr(S) mu-weighted constants
        let rep = schrod(64, 8.0);
        let g = rep.group();
        let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
        let s = Operator::rank_one(&phi, &phi).unwrap();
        let t = Operator::identity(rep.grid);
        let nodes = NodeSet::identity_window(g, 1.0, 8).unwrap();
        let values = vec![Complex64::ONE; nodes.len()];
        let f = SampledGroupFunction { nodes, values };
        let resid = associativity_check(&rep, &f, &s, &t, &[g.identity()]).unwrap();
        assert!(resid < 1e-9, "resid={resid}");
    }
}
