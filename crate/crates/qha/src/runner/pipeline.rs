//! The experiment pipeline behind `qha <kind> --config <path>`.
//!
//! Every kind follows the same discipline: parse and validate the config,
//! calibrate the representation if one is involved, run the computation,
//! write CSV/JSON/SVG outputs, and write the manifest last. Outputs are
//! byte-deterministic for a fixed config; per-stage timings are only
//! recorded when `record_timings` is set (they are the one nondeterministic
//! quantity, so they default to off).

use super::config::{parse_region, Config};
use super::output::{self, fmt_f, Series};
use crate::error::{Error, Result};
use crate::folner::{folner_profile, RegionSequence};
use crate::groups::{measure, Group, Point, QuadSpec, Region};
use crate::opconv::{
    self, fo_conv, fo_conv_trace, normalize_density, ConvWeight, DensityOperator, NodeSet,
};
use crate::qrep::{CalibrationSettings, Operator, Rep, RepKind, SampleGrid, WindowSpec};
use crate::special::reg_lower_gamma;
use crate::spectra::{self, accumulation_ratio, spectrum_record, SpectrumRecord};
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub resolution: Option<usize>,
    pub quiet: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub kind: String,
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<crate::qrep::CalibrationReport>,
    /// (label, deficit) pairs for every truncated group integral
    pub truncated_mass: Vec<(String, f64)>,
    pub summary: serde_json::Value,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Vec<(String, u128)>>,
}

struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
    quiet: bool,
}

impl Emitter {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        output::write_csv(&self.path(name), header, rows)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        output::write_bytes(&self.path(name), body.as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn plot(&mut self, name: &str, title: &str, xl: &str, yl: &str, series: &[Series]) -> Result<()> {
        output::line_plot(&self.path(name), title, xl, yl, series)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }
}

struct Stages {
    enabled: bool,
    t0: Instant,
    entries: Vec<(String, u128)>,
}

impl Stages {
    fn new(enabled: bool) -> Stages {
        Stages {
            enabled,
            t0: Instant::now(),
            entries: Vec::new(),
        }
    }

    fn mark(&mut self, label: &str) {
        if self.enabled {
            self.entries.push((label.to_string(), self.t0.elapsed().as_millis()));
            self.t0 = Instant::now();
        }
    }

    fn into_option(self) -> Option<Vec<(String, u128)>> {
        if self.enabled {
            Some(self.entries)
        } else {
            None
        }
    }
}

/// Runs one experiment. The CLI maps error variants to exit codes: invalid
/// config 2, numerical guard 3, I/O 4.
pub fn run(cfg: &Config, ov: &Overrides) -> Result<RunManifest> {
    cfg.validate()?;
    let out_dir = ov
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.output_dir.as_deref().unwrap_or("out")));
    std::fs::create_dir_all(&out_dir)?;
    probe_writable(&out_dir)?;
    let mut em = Emitter {
        dir: out_dir,
        files: Vec::new(),
        quiet: ov.quiet,
    };
    match cfg.kind.as_str() {
        "accumulate" | "affine-counterexample" => run_accumulate(cfg, ov, &mut em),
        "oracle-antiwick" => run_oracle(cfg, ov, &mut em),
        "traceid" => run_traceid(cfg, ov, &mut em),
        "folner" => run_folner(cfg, ov, &mut em),
        other => Err(Error::Config(format!("unknown kind `{other}`"))),
    }
}

fn probe_writable(dir: &Path) -> Result<()> {
    let probe = dir.join(".qha-write-probe");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

fn finish(em: &mut Emitter, mut manifest: RunManifest) -> Result<RunManifest> {
    manifest.files = em.files.clone();
    manifest.files.sort();
    manifest.files.push("manifest.json".into());
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    output::write_bytes(&em.path("manifest.json"), body.as_bytes())?;
    Ok(manifest)
}

// ----- representation plumbing ------------------------------------------

fn rep_kind_for(cfg: &Config, group: Group) -> Result<RepKind> {
    let default = match group {
        Group::Affine => "affine_wavelet",
        Group::PhasePlane => "schrodinger",
        g => {
            return Err(Error::Config(format!(
                "no representation available on `{}`",
                g.name()
            )))
        }
    };
    match cfg.representation.as_deref().unwrap_or(default) {
        "schrodinger" => Ok(RepKind::Schrodinger),
        "affine_wavelet" => Ok(RepKind::AffineWavelet),
        other => Err(Error::Config(format!("unknown representation `{other}`"))),
    }
}

fn sample_grid_for(cfg: &Config, kind: RepKind) -> SampleGrid {
    let (n0, t0, c0) = match kind {
        RepKind::Schrodinger => (1024, 24.0, 0.0),
        RepKind::AffineWavelet => (1024, 23.0, 6.0),
    };
    SampleGrid::centered(
        cfg.state_n.unwrap_or(n0),
        cfg.state_extent.unwrap_or(t0),
        cfg.state_center.unwrap_or(c0),
    )
}

fn calibrated_rep(cfg: &Config, group: Group) -> Result<(Rep, crate::qrep::CalibrationReport)> {
    let kind = rep_kind_for(cfg, group)?;
    let mut rep = Rep::new(kind, sample_grid_for(cfg, kind));
    let report = rep.calibrate(&CalibrationSettings::default_for(kind))?;
    Ok((rep, report))
}

fn window_spec_for(cfg: &Config, kind: RepKind) -> Result<WindowSpec> {
    let default = match kind {
        RepKind::Schrodinger => "gaussian(1.0)",
        RepKind::AffineWavelet => "morlet(0.125,0.3)",
    };
    WindowSpec::parse(cfg.window.as_deref().unwrap_or(default))
}

fn density_for(cfg: &Config, rep: &Rep) -> Result<DensityOperator> {
    let spec = window_spec_for(cfg, rep.kind)?;
    let parts = rep.window_mixture(&spec)?;
    let raw = Operator::mixture(&parts)?;
    normalize_density(rep, &raw)
}

/// h_S quadrature window around the identity: a symmetric box, except the
/// affine log-scale axis which needs only a few correlation widths.
fn hs_nodes_for(cfg: &Config, group: Group) -> Result<NodeSet> {
    let half = cfg.hs_window.unwrap_or(match group {
        Group::Affine => 12.0,
        _ => 3.2,
    });
    let per_axis = cfg.hs_per_axis.unwrap_or(128);
    let region = match group {
        Group::Affine => {
            let tau = half.min(2.5);
            Region::rect([-half, (-tau).exp()], [half, tau.exp()])
        }
        _ => opconv::identity_window_region(group, half),
    };
    NodeSet::over_region(group, &region, QuadSpec::new(per_axis))
}

// ----- accumulate / affine-counterexample --------------------------------

fn run_accumulate(cfg: &Config, ov: &Overrides, em: &mut Emitter) -> Result<RunManifest> {
    let mut stages = Stages::new(cfg.record_timings.unwrap_or(false));
    let group = cfg.group()?;
    if cfg.kind == "affine-counterexample" && group != Group::Affine {
        return Err(Error::Config(
            "affine-counterexample runs on the affine group".into(),
        ));
    }
    let (rep, calibration) = calibrated_rep(cfg, group)?;
    let density = density_for(cfg, &rep)?;
    stages.mark("calibrate");

    let base = cfg.region(group)?;
    let scales = cfg.scales.clone().unwrap_or_else(|| match cfg.kind.as_str() {
        "affine-counterexample" => vec![2.0, 4.0, 8.0, 16.0],
        _ => vec![2.0, 4.0, 8.0],
    });
    let deltas = cfg.deltas.clone().unwrap_or_else(|| vec![0.1, 0.25, 0.5]);
    let quad = QuadSpec::new(ov.resolution.or(cfg.quad_per_axis).unwrap_or(match group {
        Group::Affine => 128,
        _ => 256,
    }));
    let measure_spec = QuadSpec::new(cfg.measure_per_axis.unwrap_or(match group {
        Group::Affine => 1024,
        _ => 2048,
    }));

    let mut records: Vec<SpectrumRecord> = Vec::new();
    for (k, &r) in scales.iter().enumerate() {
        let region = if r == 1.0 { base.clone() } else { base.dilated(group, r) };
        let mu = measure(group, &region, measure_spec)?;
        if mu <= 0.0 {
            return Err(Error::ZeroMeasure(region.label().into()));
        }
        let op = fo_conv(&rep, ConvWeight::Indicator(&region, quad), &density.op)?;
        let rec = spectrum_record(&op, k + 1, r, region.label(), mu, density.trace, true)?;
        em.note(&format!(
            "scale {r}: mu = {mu:.6}, trace = {:.6}, top eigenvalue = {:.6}",
            rec.sum(),
            rec.eigenvalues.first().copied().unwrap_or(0.0)
        ));
        records.push(rec);
        stages.mark(&format!("spectrum r={r}"));
    }

    // optional accumulation-bound right-hand sides
    let mut truncated = Vec::new();
    let mut bounds: Vec<Vec<f64>> = Vec::new();
    let with_bounds = cfg.with_bounds.unwrap_or(false);
    let mut hs_data = None;
    if with_bounds {
        let nodes = hs_nodes_for(cfg, group)?;
        let hs = opconv::h_s(&rep, &density, &nodes)?;
        opconv::check_hs_mass(&hs)?;
        truncated.push(("h_S".to_string(), hs.truncated_mass));
        for rec in &records {
            let region = if rec.scale == 1.0 {
                base.clone()
            } else {
                base.dilated(group, rec.scale)
            };
            let overlap = opconv::hs_overlap_integral(group, &hs, &region, quad)?;
            let rhs: Vec<f64> = deltas
                .iter()
                .map(|&d| spectra::m_delta(d) * (1.0 - overlap / rec.mu))
                .collect();
            bounds.push(rhs);
        }
        hs_data = Some(hs);
        stages.mark("bounds");
    }

    // spectra.csv: k, n, lambda
    let mut rows = Vec::new();
    for rec in &records {
        for (n, &l) in rec.eigenvalues.iter().enumerate() {
            rows.push(vec![rec.k.to_string(), n.to_string(), fmt_f(l)]);
        }
    }
    em.csv("spectra.csv", &["k", "n", "lambda"], &rows)?;

    // accumulation.csv: k, mu_Ek, delta, count, ratio, bound_rhs
    let mut acc_rows = Vec::new();
    let mut acc_records = Vec::new();
    for (di, &d) in deltas.iter().enumerate() {
        let acc = accumulation_ratio(&records, d, density.trace)?;
        for (ki, e) in acc.entries.iter().enumerate() {
            acc_rows.push(vec![
                e.k.to_string(),
                fmt_f(e.mu),
                fmt_f(d),
                e.count.to_string(),
                fmt_f(e.ratio),
                if with_bounds {
                    fmt_f(bounds[ki][di])
                } else {
                    String::new()
                },
            ]);
        }
        acc_records.push(acc);
    }
    em.csv(
        "accumulation.csv",
        &["k", "mu_Ek", "delta", "count", "ratio", "bound_rhs"],
        &acc_rows,
    )?;

    // plots: one accumulation plot per delta, plus the spectrum plunge
    for acc in &acc_records {
        let series = [Series {
            label: format!("delta={}", acc.delta),
            points: acc
                .entries
                .iter()
                .map(|e| (e.scale, e.ratio))
                .collect(),
        }];
        em.plot(
            &format!("accumulation_delta_{}.svg", acc.delta),
            &format!("accumulation ratio, delta = {}", acc.delta),
            "scale r",
            "C_delta",
            &series,
        )?;
    }
    let plunge: Vec<Series> = records
        .iter()
        .map(|rec| Series {
            label: format!("r={}", rec.scale),
            points: rec
                .eigenvalues
                .iter()
                .enumerate()
                .take_while(|&(n, &l)| n < 8 || l > 1e-6)
                .map(|(n, &l)| (n as f64, l))
                .collect(),
        })
        .collect();
    em.plot("spectrum.svg", "eigenvalue plunge profile", "n", "lambda_n", &plunge)?;

    // per-delta ceilings (the affine refutation records these)
    let mut ceilings = serde_json::Map::new();
    for acc in &acc_records {
        let max_ratio = acc.entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
        ceilings.insert(
            format!("{}", acc.delta),
            json!({ "max_ratio": max_ratio, "epsilon": 1.0 - max_ratio }),
        );
    }

    let report = accumulate_report(cfg, &records, &acc_records, with_bounds, &bounds);
    em.text("report.md", &report)?;

    let summary = json!({
        "tr_s": density.trace,
        "scales": scales,
        "deltas": deltas,
        "ceilings": ceilings,
        "hs_at_identity": hs_data.as_ref().map(|h| h.at_identity),
    });
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind.clone(),
        config_sha256: cfg.sha256(),
        calibration: Some(calibration),
        truncated_mass: truncated,
        summary,
        files: Vec::new(),
        timings_ms: stages.into_option(),
    };
    finish(em, manifest)
}

fn accumulate_report(
    cfg: &Config,
    records: &[SpectrumRecord],
    accs: &[spectra::AccumulationRecord],
    with_bounds: bool,
    bounds: &[Vec<f64>],
) -> String {
    let mut s = String::new();
    s.push_str(&format!("# {} run\n\n", cfg.kind));
    s.push_str("| k | scale | mu(E_k) | tr(E_k*S) | lambda_max |\n|---|---|---|---|---|\n");
    for rec in records {
        s.push_str(&format!(
            "| {} | {} | {:.8} | {:.8} | {:.8} |\n",
            rec.k,
            rec.scale,
            rec.mu,
            rec.sum(),
            rec.eigenvalues.first().copied().unwrap_or(0.0)
        ));
    }
    s.push_str("\n## Accumulation ratios\n\n");
    s.push_str("| delta | k | count | C_delta | bound rhs |\n|---|---|---|---|---|\n");
    for (di, acc) in accs.iter().enumerate() {
        for (ki, e) in acc.entries.iter().enumerate() {
            let b = if with_bounds {
                format!("{:.6}", bounds[ki][di])
            } else {
                "-".into()
            };
            s.push_str(&format!(
                "| {} | {} | {} | {:.8} | {} |\n",
                acc.delta, e.k, e.count, e.ratio, b
            ));
        }
        let max_ratio = acc.entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
        s.push_str(&format!(
            "\nceiling at delta {}: max C = {:.8}, epsilon = {:.8}\n\n",
            acc.delta,
            max_ratio,
            1.0 - max_ratio
        ));
    }
    s
}

// ----- oracle-antiwick ----------------------------------------------------

fn run_oracle(cfg: &Config, ov: &Overrides, em: &mut Emitter) -> Result<RunManifest> {
    let mut stages = Stages::new(cfg.record_timings.unwrap_or(false));
    let group = cfg.group()?;
    if group != Group::PhasePlane {
        return Err(Error::Config("oracle-antiwick runs on the phase plane".into()));
    }
    // criterion setup: n = 512, T = 24 unless overridden
    let mut cfg_eff = cfg.clone();
    cfg_eff.state_n = Some(cfg.state_n.unwrap_or(512));
    let (rep, calibration) = calibrated_rep(&cfg_eff, group)?;
    let density = density_for(&cfg_eff, &rep)?;
    let region = cfg.region(group)?;
    let radius = origin_disk_radius(&region).ok_or_else(|| {
        Error::Config("oracle-antiwick needs an origin-centered disk region".into())
    })?;
    let quad = QuadSpec::new(ov.resolution.or(cfg.quad_per_axis).unwrap_or(256));
    let op = fo_conv(&rep, ConvWeight::Indicator(&region, quad), &density.op)?;
    let mu_exact = std::f64::consts::PI * radius * radius;
    let rec = spectrum_record(&op, 1, radius, region.label(), mu_exact, density.trace, true)?;
    stages.mark("spectrum");

    let x = std::f64::consts::PI * radius * radius;
    let keep = rec
        .eigenvalues
        .iter()
        .take_while(|&&l| l > 1e-12)
        .count()
        .max(25)
        .min(rec.eigenvalues.len());
    let mut rows = Vec::new();
    let mut max_diff_top25 = 0.0f64;
    for n in 0..keep {
        let oracle = reg_lower_gamma(n as f64 + 1.0, x);
        let diff = (rec.eigenvalues[n] - oracle).abs();
        if n < 25 {
            max_diff_top25 = max_diff_top25.max(diff);
        }
        rows.push(vec![
            n.to_string(),
            fmt_f(rec.eigenvalues[n]),
            fmt_f(oracle),
            fmt_f(diff),
        ]);
    }
    em.csv(
        "oracle.csv",
        &["n", "lambda_num", "lambda_oracle", "abs_diff"],
        &rows,
    )?;
    em.plot(
        "spectrum.svg",
        &format!("disk R = {radius}: quadrature vs oracle"),
        "n",
        "lambda_n",
        &[
            Series {
                label: "numerical".into(),
                points: rec.eigenvalues[..keep]
                    .iter()
                    .enumerate()
                    .map(|(n, &l)| (n as f64, l))
                    .collect(),
            },
            Series {
                label: "P(n+1, pi R^2)".into(),
                points: (0..keep)
                    .map(|n| (n as f64, reg_lower_gamma(n as f64 + 1.0, x)))
                    .collect(),
            },
        ],
    )?;
    em.note(&format!("top-25 max |lambda - oracle| = {max_diff_top25:.3e}"));
    let report = format!(
        "# oracle-antiwick run\n\ndisk radius {radius}, quadrature {qa} per axis.\n\n\
         max |lambda_n - P(n+1, pi R^2)| over the top 25 eigenvalues: {max_diff_top25:.6e}\n",
        qa = quad.per_axis
    );
    em.text("report.md", &report)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind.clone(),
        config_sha256: cfg.sha256(),
        calibration: Some(calibration),
        truncated_mass: Vec::new(),
        summary: json!({
            "radius": radius,
            "max_abs_diff_top25": max_diff_top25,
            "trace": rec.sum(),
        }),
        files: Vec::new(),
        timings_ms: stages.into_option(),
    };
    finish(em, manifest)
}

fn origin_disk_radius(region: &Region) -> Option<f64> {
    // the disk bbox is centered on the origin exactly when the disk is
    let b = region.bbox();
    if b.dim() != 2 {
        return None;
    }
    let r = b.hi(0);
    let centered = (b.lo(0) + r).abs() < 1e-12
        && (b.hi(1) - r).abs() < 1e-12
        && (b.lo(1) + r).abs() < 1e-12;
    let looks_like_disk = region.contains(crate::groups::point2(0.0, 0.0))
        && !region.contains(crate::groups::point2(0.99 * r, 0.99 * r));
    if centered && looks_like_disk {
        Some(r)
    } else {
        None
    }
}

// ----- traceid ------------------------------------------------------------

fn run_traceid(cfg: &Config, ov: &Overrides, em: &mut Emitter) -> Result<RunManifest> {
    let mut stages = Stages::new(cfg.record_timings.unwrap_or(false));
    let group = cfg.group()?;
    let (rep, calibration) = calibrated_rep(cfg, group)?;
    let density = density_for(cfg, &rep)?;
    let region = cfg.region(group)?;
    let quad = QuadSpec::new(ov.resolution.or(cfg.quad_per_axis).unwrap_or(256));
    let measure_spec = QuadSpec::new(cfg.measure_per_axis.unwrap_or(2048));
    stages.mark("setup");

    #[derive(Serialize)]
    struct IdentityRecord {
        identity: String,
        lhs: f64,
        rhs: f64,
        residual: f64,
        resolution: usize,
        truncated_mass: f64,
    }
    let mut out = Vec::new();

    // trace identity: tr(chi_E * S) = tr(S) mu(E)
    let mu = measure(group, &region, measure_spec)?;
    if mu <= 0.0 {
        return Err(Error::ZeroMeasure(region.label().into()));
    }
    let lhs = fo_conv_trace(&rep, ConvWeight::Indicator(&region, quad), &density.op)?;
    let rhs = density.trace * mu;
    out.push(IdentityRecord {
        identity: "trace".into(),
        lhs,
        rhs,
        residual: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE),
        resolution: quad.per_axis,
        truncated_mass: 0.0,
    });
    stages.mark("trace-identity");

    // h_S normalization and the trace-of-square identity share the window
    let nodes = hs_nodes_for(cfg, group)?;
    let hs = opconv::h_s(&rep, &density, &nodes)?;
    opconv::check_hs_mass(&hs)?;
    out.push(IdentityRecord {
        identity: "hs-normalization".into(),
        lhs: hs.integral,
        rhs: 1.0,
        residual: (hs.integral - 1.0).abs(),
        resolution: cfg.hs_per_axis.unwrap_or(128),
        truncated_mass: hs.truncated_mass,
    });

    let ts = opconv::trace_of_square_identity(&rep, &region, &density, quad, &nodes, quad)?;
    out.push(IdentityRecord {
        identity: "trace-of-square".into(),
        lhs: ts.lhs,
        rhs: ts.rhs,
        residual: ts.residual,
        resolution: quad.per_axis,
        truncated_mass: ts.truncated_mass,
    });
    stages.mark("trace-of-square");

    // integrated operator-operator identity with A = S:
    // int (S*S) dmu = tr(S) tr(Dinv S Dinv) = tr(S)
    let l1_lhs = hs.integral * density.trace;
    let l1_rhs = density.trace * density.weighted_trace;
    out.push(IdentityRecord {
        identity: "integrated-oo".into(),
        lhs: l1_lhs,
        rhs: l1_rhs,
        residual: (l1_lhs - l1_rhs).abs() / l1_rhs.abs().max(f64::MIN_POSITIVE),
        resolution: cfg.hs_per_axis.unwrap_or(128),
        truncated_mass: hs.truncated_mass,
    });

    let mut body = serde_json::to_string_pretty(&out)?;
    body.push('\n');
    em.text("traceid.json", &body)?;
    let mut report = String::from("# traceid run\n\n| identity | lhs | rhs | residual |\n|---|---|---|---|\n");
    for r in &out {
        report.push_str(&format!(
            "| {} | {:.10e} | {:.10e} | {:.3e} |\n",
            r.identity, r.lhs, r.rhs, r.residual
        ));
    }
    em.text("report.md", &report)?;
    for r in &out {
        em.note(&format!("{}: residual {:.3e}", r.identity, r.residual));
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind.clone(),
        config_sha256: cfg.sha256(),
        calibration: Some(calibration),
        truncated_mass: vec![("h_S".into(), hs.truncated_mass)],
        summary: json!({
            "max_residual": out.iter().map(|r| r.residual).fold(0.0, f64::max),
        }),
        files: Vec::new(),
        timings_ms: stages.into_option(),
    };
    finish(em, manifest)
}

// ----- folner ---------------------------------------------------------------

fn run_folner(cfg: &Config, ov: &Overrides, em: &mut Emitter) -> Result<RunManifest> {
    let mut stages = Stages::new(cfg.record_timings.unwrap_or(false));
    let group = cfg.group()?;
    let base = match (&cfg.region, group) {
        (Some(spec), _) => parse_region(spec)?,
        (None, Group::Affine) => Region::rect([0.0, 1.0], [1.0, std::f64::consts::E]),
        (None, _) => Region::rect([-1.0, -1.0], [1.0, 1.0]),
    };
    let scales = cfg
        .scales
        .clone()
        .unwrap_or_else(|| (1..=8).map(|k| k as f64).collect());
    let seq = match cfg.sequence.as_deref().unwrap_or(match group {
        Group::Affine | Group::Heisenberg => "dilation",
        _ => "convex",
    }) {
        "convex" => RegionSequence::convex_scaling(group, base, scales)?,
        _ => RegionSequence::dilation(group, base, scales)?,
    };
    let compact = match &cfg.compact_set {
        Some(spec) => parse_region(spec)?,
        None => match group {
            Group::Affine => Region::rect([-1.0, 0.5], [1.0, 2.0]),
            Group::Euclidean(1) => Region::interval(-1.0, 1.0),
            _ => Region::disk([0.0, 0.0], 1.0),
        },
    };
    let mut probes: Vec<Point> = cfg
        .probes
        .clone()
        .unwrap_or_default()
        .iter()
        .map(|c| Point::new(c))
        .collect();
    // sampled probes flow from the config seed
    let sample_count = cfg.probe_count.unwrap_or(if probes.is_empty() { 2 } else { 0 });
    if sample_count > 0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
        let bbox = compact.bbox();
        let mut tries = 0;
        while probes.len() < sample_count + cfg.probes.as_ref().map_or(0, |p| p.len()) {
            let coords: Vec<f64> = (0..bbox.dim())
                .map(|i| rng.random_range(bbox.lo(i)..=bbox.hi(i)))
                .collect();
            let p = Point::new(&coords);
            if compact.contains(p) {
                probes.push(p);
            }
            tries += 1;
            if tries > 10_000 {
                return Err(Error::Config("could not sample probes in the compact set".into()));
            }
        }
    }
    let quad = QuadSpec::new(ov.resolution.or(cfg.quad_per_axis).unwrap_or(512));
    let profile = folner_profile(
        group,
        &seq,
        &compact,
        cfg.compact_per_axis.unwrap_or(16),
        &probes,
        quad,
    )?;
    stages.mark("profile");

    let mut header: Vec<String> = vec!["k".into(), "mu_Ek".into(), "sup_beta_K".into()];
    for i in 1..=probes.len() {
        header.push(format!("beta_at_probe_{i}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = profile
        .entries
        .iter()
        .map(|e| {
            let mut row = vec![e.k.to_string(), fmt_f(e.mu), fmt_f(e.sup_beta)];
            row.extend(e.probe_beta.iter().map(|&b| fmt_f(b)));
            row
        })
        .collect();
    em.csv("folner.csv", &header_refs, &rows)?;

    em.plot(
        "folner.svg",
        "Folner profile",
        "k",
        "beta",
        &[Series {
            label: "sup over K".into(),
            points: profile
                .entries
                .iter()
                .map(|e| (e.k as f64, e.sup_beta))
                .collect(),
        }],
    )?;
    let final_sup = profile.entries.last().map(|e| e.sup_beta).unwrap_or(1.0);
    em.note(&format!("final sup_K beta = {final_sup:.6}"));
    let report = format!(
        "# folner run\n\ngroup {}, {} steps; final sup_K beta = {final_sup:.8}\n",
        group.name(),
        profile.entries.len()
    );
    em.text("report.md", &report)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind.clone(),
        config_sha256: cfg.sha256(),
        calibration: None,
        truncated_mass: Vec::new(),
        summary: json!({
            "final_sup_beta": final_sup,
            "probe_count": probes.len(),
        }),
        files: Vec::new(),
        timings_ms: stages.into_option(),
    };
    finish(em, manifest)
}
