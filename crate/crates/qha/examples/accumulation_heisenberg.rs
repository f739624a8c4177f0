//! Eigenvalue accumulation on the phase plane (the positive control).
//!
//! Disks dilated by r = 2, 4, 8 produce localization operators whose
//! eigenvalue count above 1−δ grows like tr(S)·μ(E_r); the ratio
//! C_δ = count / (tr(S) μ) climbs toward 1 because the dilated disks form
//! a Følner sequence and the group is unimodular.
//!
//! ```bash
//! cargo run --release --example accumulation_heisenberg
//! ```

use qha::groups::{measure, Group, QuadSpec, Region};
use qha::opconv::{fo_conv, normalize_density, ConvWeight};
use qha::qrep::{Operator, Rep, SampleGrid, WindowSpec};
use qha::spectra::{accumulation_ratio, spectrum_record};

fn main() {
    let rep = Rep::schrodinger(SampleGrid::new(1024, 24.0));
    let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
    let s = normalize_density(&rep, &Operator::rank_one(&phi, &phi).unwrap()).unwrap();
    let base = Region::disk([0.0, 0.0], 1.0);

    let mut records = Vec::new();
    for (k, &r) in [2.0, 4.0, 8.0].iter().enumerate() {
        let region = base.dilated(Group::PhasePlane, r);
        let mu = measure(Group::PhasePlane, &region, QuadSpec::new(2048)).unwrap();
        let quad = if r < 8.0 { 128 } else { 256 };
        println!("r = {r}: quadrature {quad}^2 over the disk bbox ...");
        let op = fo_conv(&rep, ConvWeight::Indicator(&region, QuadSpec::new(quad)), &s.op).unwrap();
        let rec = spectrum_record(&op, k + 1, r, region.label(), mu, s.trace, true).unwrap();
        records.push(rec);
    }

    println!("\n{:>6} {:>6} {:>12} {:>8} {:>12}", "delta", "r", "mu(E_r)", "count", "C_delta");
    for delta in [0.1, 0.25, 0.5] {
        let acc = accumulation_ratio(&records, delta, s.trace).unwrap();
        for e in &acc.entries {
            println!(
                "{delta:>6} {:>6} {:>12.4} {:>8} {:>12.6}",
                e.scale, e.mu, e.count, e.ratio
            );
        }
        println!("    nondecreasing in r: {}", acc.nondecreasing);
    }
}
