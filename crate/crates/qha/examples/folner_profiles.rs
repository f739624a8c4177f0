//! Følner profiles: a positive and a negative control.
//!
//! Scaled squares kV in the plane are a Følner sequence — the deficiency
//! sup over a compact set decays like 1/k. The affine dilations of
//! E = [0,1]×[1,e] are not: β at a fixed probe point stays near 1.
//!
//! ```bash
//! cargo run --release --example folner_profiles
//! ```

use qha::folner::{beta, folner_profile, RegionSequence};
use qha::groups::{point2, Group, QuadSpec, Region};

fn main() {
    // positive control: squares [-k, k]^2 in the plane
    let g = Group::Euclidean(2);
    let v = Region::rect([-1.0, -1.0], [1.0, 1.0]);
    let scales: Vec<f64> = [1, 2, 3, 4, 6, 8, 12, 16, 24, 40].iter().map(|&k| k as f64).collect();
    let seq = RegionSequence::convex_scaling(g, v, scales).unwrap();
    let kball = Region::disk([0.0, 0.0], 1.0);
    let s = 2.0f64.sqrt() / 2.0;
    let profile = folner_profile(g, &seq, &kball, 16, &[point2(s, s)], QuadSpec::new(512)).unwrap();

    println!("squares kV in R^2, K = unit ball (closed form ~ sqrt(2)/(2k)):");
    println!("{:>6} {:>12} {:>12} {:>12}", "k", "mu(E_k)", "sup_K beta", "closed form");
    for e in &profile.entries {
        let closed = 2.0 * s / (2.0 * e.scale) - s * s / (4.0 * e.scale * e.scale);
        println!("{:>6} {:>12.1} {:>12.6} {:>12.6}", e.scale, e.mu, e.sup_beta, closed);
    }

    // negative control: affine dilations, probe fixed at (1, 1)
    let g = Group::Affine;
    let e = Region::rect([0.0, 1.0], [1.0, std::f64::consts::E]);
    println!("\naffine dilations of [0,1]x[1,e], probe x = (1, 1):");
    println!("{:>6} {:>12} {:>12} {:>12}", "r", "mu(E_r)", "beta(probe)", "closed form");
    for r in [2.0, 4.0, 8.0, 16.0] {
        let er = e.dilated(g, r);
        let b = beta(g, &er, point2(1.0, 1.0), QuadSpec::new(512)).unwrap();
        let closed = 1.0 - (r * r.ln() - r + 1.0) / (r * r);
        println!("{r:>6} {:>12.1} {b:>12.6} {closed:>12.6}", r * r);
    }
    println!("\nthe probe values do not decay: the dilated sets are not a Folner sequence");
}
