//! Hermitian eigendecomposition, eigenvalue counting, accumulation ratios,
//! and the functional-calculus estimates used by the accumulation bound.
//!
//! The quantitative machinery works on plain eigenvalue lists:
//!
//! - θ(t) = −t on [0, 1−δ], 1−t on (1−δ, 1], so that
//!   tr(θ(T)) = #{λ > 1−δ} − Σλ exactly;
//! - σ(t) = m_δ t(1−t) with m_δ = max(1/δ, 1/(1−δ)) dominates |θ|;
//! - ρ(t) = t(1−t) drives the converse inequality
//!   tr(ρ(T))/tr(T) ≤ 1 − #{λ > 1−δ}/tr(T) · (1 − δ − sup ρ).
//!
//! Combining them gives the two-sided control of the accumulation ratio
//! C_δ = #{λ > 1−δ} / (tr(S) μ(E)) that the experiments measure.

use crate::error::{Error, Result};
use crate::opconv::HsFunction;
use crate::qrep::Operator;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues within this distance of the counting threshold are counted
/// as above it and reported as boundary cases.
pub const COUNT_SNAP: f64 = 1e-12;
/// Relative eigensolver residual contract.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

pub struct EigenDecomp {
    /// descending
    pub values: Vec<f64>,
    /// columns are the eigenvectors matching `values`
    pub vectors: DMatrix<Complex64>,
    /// max sampled relative residual ‖Av − λv‖ / ‖A‖
    pub residual: f64,
}

/// Full Hermitian eigendecomposition, sorted descending, with a residual
/// spot check on sampled eigenpairs.
pub fn eigen(op: &Operator) -> Result<EigenDecomp> {
    if !op.hermitian {
        return Err(Error::NotHermitian(op.hermitian_deviation()));
    }
    let dev = op.hermitian_deviation();
    if dev > 1e-10 {
        return Err(Error::NotHermitian(dev));
    }
    let n = op.mat.nrows();
    // The graded far tails of localization operators (entries spanning
    // hundreds of orders of magnitude) drive the QL iteration into 0/0
    // Wilkinson shifts. Entries this far below the largest one carry no
    // information at any tolerance in this crate, so they are flushed to
    // zero before decomposing, escalating once if NaNs still appear.
    let scale = op
        .mat
        .iter()
        .map(|v| v.norm_sqr())
        .fold(0.0f64, f64::max)
        .sqrt();
    let mut se = None;
    for flush in [1e-60, 1e-30] {
        let mut mat = op.mat.clone();
        if scale > 0.0 {
            let thresh_sq = (scale * flush) * (scale * flush);
            for v in mat.iter_mut() {
                if v.norm_sqr() < thresh_sq {
                    *v = Complex64::ZERO;
                }
            }
        }
        let cand = mat.symmetric_eigen();
        if cand.eigenvalues.iter().all(|v| v.is_finite()) {
            se = Some(cand);
            break;
        }
    }
    let se = se.ok_or_else(|| Error::guard("eigen-nan", "eigensolver produced NaN"))?;
    let mut order: Vec<usize> = (0..n).collect();
    // descending; ties broken by original index
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &se.eigenvectors.column(i));
    }

    // residual contract on a handful of pairs spread over the spectrum
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut residual = 0.0f64;
    if scale > 0.0 {
        let samples: Vec<usize> = [0, 1, n / 4, n / 2, 3 * n / 4, n - 1]
            .into_iter()
            .filter(|&i| i < n)
            .collect();
        for i in samples {
            let v = vectors.column(i);
            let r = (&op.mat * v - v * Complex64::new(values[i], 0.0)).norm();
            residual = residual.max(r / scale);
        }
        if residual > EIGEN_RESIDUAL_TOL {
            return Err(Error::guard(
                "eigen-residual",
                format!("eigensolver residual {residual:.2e} above contract"),
            ));
        }
    }
    Ok(EigenDecomp {
        values,
        vectors,
        residual,
    })
}

/// Eigenvalue list plus the metadata the accumulation pipeline records.
#[derive(Clone, Debug)]
pub struct SpectrumRecord {
    /// descending
    pub eigenvalues: Vec<f64>,
    pub k: usize,
    pub scale: f64,
    pub region_label: String,
    pub mu: f64,
    pub tr_s: f64,
    pub solver_residual: f64,
}

impl SpectrumRecord {
    pub fn sum(&self) -> f64 {
        crate::groups::kahan_sum(&self.eigenvalues)
    }

    pub fn sum_sq(&self) -> f64 {
        let sq: Vec<f64> = self.eigenvalues.iter().map(|l| l * l).collect();
        crate::groups::kahan_sum(&sq)
    }
}

/// Builds a spectrum record from a localization operator, enforcing the
/// eigenvalue range contract for density-operator convolutions: all
/// eigenvalues in [−1e−8·tr, 1 + 1e−6]. Values below the floor abort (they
/// indicate quadrature failure); values inside it are clamped to 0.
pub fn spectrum_record(
    op: &Operator,
    k: usize,
    scale: f64,
    region_label: &str,
    mu: f64,
    tr_s: f64,
    density_range: bool,
) -> Result<SpectrumRecord> {
    let decomp = eigen(op)?;
    let mut values = decomp.values;
    if density_range {
        let trace = op.trace().re;
        let floor = -1e-8 * trace.abs().max(f64::MIN_POSITIVE);
        if let Some(&min) = values.last() {
            if min < floor {
                return Err(Error::guard(
                    "negative-eigenvalue-floor",
                    format!("eigenvalue {min:.3e} below {floor:.3e}"),
                ));
            }
        }
        if let Some(&max) = values.first() {
            if max > 1.0 + 1e-6 {
                return Err(Error::guard(
                    "operator-norm-bound",
                    format!("eigenvalue {max:.8} above 1 + 1e-6"),
                ));
            }
        }
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    Ok(SpectrumRecord {
        eigenvalues: values,
        k,
        scale,
        region_label: region_label.to_string(),
        mu,
        tr_s,
        solver_residual: decomp.residual,
    })
}

/// #{n : λ_n > 1 − δ}. Strict comparison with a 1e−12 snap: eigenvalues
/// within the snap of the threshold count as above.
pub fn count_above(rec: &SpectrumRecord, delta: f64) -> Result<usize> {
    Ok(count_above_detailed(rec, delta)?.0)
}

/// Count plus the number of eigenvalues that needed the snap rule.
pub fn count_above_detailed(rec: &SpectrumRecord, delta: f64) -> Result<(usize, usize)> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    let threshold = 1.0 - delta;
    let mut count = 0;
    let mut snapped = 0;
    for &l in &rec.eigenvalues {
        if l > threshold {
            count += 1;
        } else if (threshold - l) <= COUNT_SNAP {
            count += 1;
            snapped += 1;
        } else {
            break; // descending
        }
    }
    Ok((count, snapped))
}

pub fn m_delta(delta: f64) -> f64 {
    (1.0 / delta).max(1.0 / (1.0 - delta))
}

/// Functional-calculus test functions on [0, 1].
#[derive(Clone, Debug)]
pub enum CalcFunction {
    /// θ: −t below the threshold, 1−t above; range [δ−1, δ)
    Theta { delta: f64 },
    /// σ(t) = m_δ t(1−t), the polynomial dominating |θ|
    Sigma { delta: f64 },
    /// ρ(t) = t(1−t)
    Rho,
    /// piecewise-linear table
    Table(Vec<(f64, f64)>),
}

impl CalcFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            CalcFunction::Theta { delta } => {
                if t <= 1.0 - delta {
                    -t
                } else {
                    1.0 - t
                }
            }
            CalcFunction::Sigma { delta } => m_delta(*delta) * t * (1.0 - t),
            CalcFunction::Rho => t * (1.0 - t),
            CalcFunction::Table(knots) => {
                if knots.is_empty() {
                    return 0.0;
                }
                if t <= knots[0].0 {
                    return knots[0].1;
                }
                for w in knots.windows(2) {
                    if t <= w[1].0 {
                        let f = (t - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + f * (w[1].1 - w[0].1);
                    }
                }
                knots.last().unwrap().1
            }
        }
    }
}

/// tr(ρ(T)) = Σ ρ(λ_n), with eigenvalues clamped to [0, 1]. Values outside
/// [−1e−8, 1 + 1e−6] are a domain violation.
pub fn calc_trace(rec: &SpectrumRecord, f: &CalcFunction) -> Result<f64> {
    let mut terms = Vec::with_capacity(rec.eigenvalues.len());
    for &l in &rec.eigenvalues {
        if l < -1e-8 || l > 1.0 + 1e-6 {
            return Err(Error::guard(
                "calc-domain",
                format!("eigenvalue {l:.3e} outside [0,1] beyond the clamp"),
            ));
        }
        terms.push(f.eval(l.clamp(0.0, 1.0)));
    }
    Ok(crate::groups::kahan_sum(&terms))
}

#[derive(Clone, Debug)]
pub struct AccEntry {
    pub k: usize,
    pub scale: f64,
    pub mu: f64,
    pub count: usize,
    pub snapped: usize,
    pub ratio: f64,
    pub bound_rhs: Option<f64>,
}

/// Accumulation ratios C_δ^(k) = #{λ > 1−δ} / (tr(S) μ(E_k)) across a
/// family of spectrum records, with a monotone-trend summary.
#[derive(Clone, Debug)]
pub struct AccumulationRecord {
    pub delta: f64,
    pub entries: Vec<AccEntry>,
    /// true when the ratio is nondecreasing along the sequence
    pub nondecreasing: bool,
}

pub fn accumulation_ratio(
    recs: &[SpectrumRecord],
    delta: f64,
    tr_s: f64,
) -> Result<AccumulationRecord> {
    let mut entries = Vec::with_capacity(recs.len());
    for rec in recs {
        if rec.mu <= 0.0 {
            return Err(Error::ZeroMeasure(rec.region_label.clone()));
        }
        let (count, snapped) = count_above_detailed(rec, delta)?;
        entries.push(AccEntry {
            k: rec.k,
            scale: rec.scale,
            mu: rec.mu,
            count,
            snapped,
            ratio: count as f64 / (tr_s * rec.mu),
            bound_rhs: None,
        });
    }
    let nondecreasing = entries.windows(2).all(|w| w[1].ratio >= w[0].ratio - 1e-12);
    Ok(AccumulationRecord {
        delta,
        entries,
        nondecreasing,
    })
}

#[derive(Clone, Debug)]
pub struct BoundCheck {
    /// |C_δ − 1|
    pub lhs: f64,
    /// m_δ (1 − ∫ h_S(x) μ(E ∩ x⁻¹E)/μ(E) dμ(x))
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates both sides of the accumulation bound
/// |C_δ − 1| ≤ m_δ (1 − ∫ h_S μ(E ∩ x⁻¹E)/μ(E) dμ) for one spectrum,
/// given the precomputed overlap integral ∫ h_S(x) μ(E ∩ x⁻¹E) dμ(x).
pub fn bound_check(
    rec: &SpectrumRecord,
    delta: f64,
    hs: &HsFunction,
    overlap_integral: f64,
) -> Result<BoundCheck> {
    crate::opconv::check_hs_mass(hs)?;
    if rec.mu <= 0.0 {
        return Err(Error::ZeroMeasure(rec.region_label.clone()));
    }
    let count = count_above(rec, delta)? as f64;
    let c = count / (rec.tr_s * rec.mu);
    let lhs = (c - 1.0).abs();
    let rhs = m_delta(delta) * (1.0 - overlap_integral / rec.mu);
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-2,
    })
}

/// Converse counting inequality on a spectrum: for ρ(t) = t(1−t) and
/// δ ≤ 1/2, tr(ρ(T))/tr(T) ≤ 1 − #{λ > 1−δ}/tr(T) · (1 − δ − (1−δ)δ).
pub fn rho_count_inequality(rec: &SpectrumRecord, delta: f64, slack: f64) -> Result<bool> {
    let tr = rec.sum();
    if tr <= 0.0 {
        return Err(Error::ZeroMeasure(rec.region_label.clone()));
    }
    let lhs = calc_trace(rec, &CalcFunction::Rho)? / tr;
    let sup_rho = (1.0 - delta) * delta; // sup of t(1-t) on (1-delta, 1] for delta <= 1/2
    let count = count_above(rec, delta)? as f64;
    Ok(lhs <= 1.0 - count / tr * (1.0 - delta - sup_rho) + slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qrep::{hermite_state, Operator, SampleGrid};

    fn record(vals: &[f64]) -> SpectrumRecord {
        let mut v = vals.to_vec();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        SpectrumRecord {
            eigenvalues: v,
            k: 1,
            scale: 1.0,
            region_label: "test".into(),
            mu: 1.0,
            tr_s: 1.0,
            solver_residual: 0.0,
        }
    }

    #[test]
    fn eigen_identity_and_rank_one() {
        let grid = SampleGrid::new(4, 4.0);
        let id = Operator::identity(grid);
        let d = eigen(&id).unwrap();
        assert_eq!(d.values, vec![1.0; 4]);

        let grid = SampleGrid::new(64, 24.0);
        let phi = hermite_state(grid, 0);
        let p = Operator::rank_one(&phi, &phi).unwrap();
        let d = eigen(&p).unwrap();
        assert!((d.values[0] - 1.0).abs() < 1e-12);
        assert!(d.values[1].abs() < 1e-12);
        assert!(d.residual < 1e-12);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let grid = SampleGrid::new(8, 4.0);
        let mut op = Operator::identity(grid);
        op.mat[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(eigen(&op), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn count_above_cases() {
        let rec = record(&[1.0, 1.0, 0.0]);
        assert_eq!(count_above(&rec, 0.5).unwrap(), 2);
        let rec = record(&[0.2, 0.1]);
        assert_eq!(count_above(&rec, 0.5).unwrap(), 0);
        assert!(count_above(&rec, 1.5).is_err());
        assert!(count_above(&rec, 0.0).is_err());
        // snap rule
        let rec = record(&[0.5 - 1e-13, 0.4]);
        let (c, snapped) = count_above_detailed(&rec, 0.5).unwrap();
        assert_eq!((c, snapped), (1, 1));
    }

    #[test]
    fn theta_decomposition_identity() {
        // tr(theta(T)) = count - sum(lambda), exactly on the list
        let rec = record(&[0.99, 0.7, 0.53, 0.2, 0.001]);
        for delta in [0.1, 0.25, 0.5] {
            let t = calc_trace(&rec, &CalcFunction::Theta { delta }).unwrap();
            let count = count_above(&rec, delta).unwrap() as f64;
            assert!((t - (count - rec.sum())).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_range_and_sigma_domination() {
        for delta in [0.1, 0.25, 0.5] {
            let theta = CalcFunction::Theta { delta };
            let sigma = CalcFunction::Sigma { delta };
            let mut t = 0.0;
            while t <= 1.0 {
                let th = theta.eval(t);
                assert!((delta - 1.0..delta).contains(&th), "theta({t}) = {th}");
                assert!(th.abs() <= sigma.eval(t) + 1e-12);
                t += 1e-3;
            }
        }
    }

    #[test]
    fn m_delta_values() {
        assert_eq!(m_delta(0.5), 2.0);
        assert_eq!(m_delta(0.1), 10.0);
        assert!((m_delta(0.25) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn calc_trace_examples() {
        let rec = record(&[1.0, 0.5, 0.0]);
        let table = CalcFunction::Table(vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!((calc_trace(&rec, &table).unwrap() - 1.5).abs() < 1e-12);
        assert!((calc_trace(&rec, &CalcFunction::Rho).unwrap() - 0.25).abs() < 1e-12);
        let bad = record(&[1.5]);
        assert!(calc_trace(&bad, &CalcFunction::Rho).is_err());
    }

    #[test]
    fn rho_count_inequality_exact_lists() {
        let recs = [
            record(&[1.0, 0.9, 0.5, 0.3, 0.05]),
            record(&[0.99; 10]),
            record(&[0.1, 0.09, 0.01]),
        ];
        for rec in &recs {
            for delta in [0.1, 0.25, 0.5] {
                assert!(rho_count_inequality(rec, delta, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn accumulation_ratio_ideal_spectrum() {
        // spectrum of exactly tr(S) mu(E) ones: ratio 1 for any delta
        let mut rec = record(&[1.0; 12]);
        rec.mu = 12.0;
        rec.tr_s = 1.0;
        let acc = accumulation_ratio(&[rec], 0.25, 1.0).unwrap();
        assert!((acc.entries[0].ratio - 1.0).abs() < 1e-12);
        assert!(acc.nondecreasing);
    }

    #[test]
    fn spectrum_record_clamps_and_aborts() {
        let grid = SampleGrid::new(8, 4.0);
        let mut op = Operator::identity(grid);
        op.mat *= Complex64::new(0.5, 0.0);
        let rec = spectrum_record(&op, 1, 1.0, "id", 1.0, 1.0, true).unwrap();
        assert!(rec.eigenvalues.iter().all(|&l| (l - 0.5).abs() < 1e-12));

        // an operator with eigenvalue above 1 + 1e-6 trips the norm bound
        let mut big = Operator::identity(grid);
        big.mat *= Complex64::new(1.1, 0.0);
        assert!(matches!(
            spectrum_record(&big, 1, 1.0, "big", 1.0, 1.0, true),
            Err(Error::Guard { guard: "operator-norm-bound", .. })
        ));
    }
}
