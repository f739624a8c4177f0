//! The affine negative control: accumulation ratios that stay away from 1.
//!
//! On the (non-unimodular) affine group, dilating E = [0,1]×[1,e] by
//! (b, a) ↦ (r b, a^r) does *not* produce a Følner sequence, and the
//! accumulation ratio C_δ stalls below 1 — the refutation counterpart of
//! the phase-plane example. The recorded ceiling is the quantity the
//! acceptance suite pins down.
//!
//! ```bash
//! cargo run --release --example affine_counterexample
//! ```

use qha::groups::{measure, Group, QuadSpec, Region};
use qha::opconv::{fo_conv, normalize_density, ConvWeight};
use qha::qrep::{CalibrationSettings, Operator, Rep, RepKind, SampleGrid, WindowSpec};
use qha::spectra::{accumulation_ratio, spectrum_record};

fn main() {
    let mut rep = Rep::affine_wavelet(SampleGrid::centered(1024, 23.0, 6.0));
    let cal = rep
        .calibrate(&CalibrationSettings::default_for(RepKind::AffineWavelet))
        .unwrap();
    println!(
        "calibrated Duflo-Moore multiplier scale: {:.8} (fit residual {:.2e})",
        cal.scale, cal.residual
    );

    let phi = rep
        .window(&WindowSpec::MorletLike {
            center_freq: 0.125,
            width: 0.3,
        })
        .unwrap();
    let s = normalize_density(&rep, &Operator::rank_one(&phi, &phi).unwrap()).unwrap();
    println!("density operator: tr(S) = {:.6} (tr(Dinv S Dinv) = 1)\n", s.trace);

    let base = Region::rect([0.0, 1.0], [1.0, std::f64::consts::E]);
    let mut records = Vec::new();
    for (k, &r) in [2.0, 4.0, 8.0, 16.0].iter().enumerate() {
        let region = base.dilated(Group::Affine, r);
        let mu = measure(Group::Affine, &region, QuadSpec::new(1024)).unwrap();
        println!("r = {r:>2}: scale range [1, e^{r}], mu = {mu:.2} ...");
        let op = fo_conv(&rep, ConvWeight::Indicator(&region, QuadSpec::new(128)), &s.op).unwrap();
        let rec = spectrum_record(&op, k + 1, r, region.label(), mu, s.trace, true).unwrap();
        records.push(rec);
    }

    let acc = accumulation_ratio(&records, 0.5, s.trace).unwrap();
    println!("\n{:>6} {:>10} {:>8} {:>12}", "r", "tr(E*S)", "count", "C_0.5");
    for (e, rec) in acc.entries.iter().zip(&records) {
        println!("{:>6} {:>10.4} {:>8} {:>12.6}", e.scale, rec.sum(), e.count, e.ratio);
    }
    let ceiling = acc.entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    println!("\nceiling: max_r C_0.5 = {ceiling:.6}, epsilon = {:.6}", 1.0 - ceiling);
}
