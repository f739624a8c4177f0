//! The integral identities that tie the operator and group sides together.
//!
//! Four checks on the phase plane, each computed by two genuinely different
//! routes:
//!
//! 1. tr(χ_E ∗ S) = tr(S) μ(E)
//! 2. tr((E ∗ S)²) = tr(S) ∫ h_S(x) μ(E ∩ x⁻¹E) dμ(x)
//! 3. ∫ S ∗ S dμ = tr(S) tr(D⁻¹ S D⁻¹)
//! 4. (f ∗ S) ∗ T = f ∗ (S ∗ T) at sampled points
//!
//! ```bash
//! cargo run --release --example trace_identities
//! ```

use num_complex::Complex64;
use qha::groups::{point2, Group, QuadSpec, Region};
use qha::opconv::{
    associativity_check, fo_conv_trace, h_s, normalize_density, trace_of_square_identity,
    ConvWeight, NodeSet, SampledGroupFunction,
};
use qha::qrep::{hermite_state, Operator, Rep, SampleGrid, WindowSpec};

fn main() {
    let rep = Rep::schrodinger(SampleGrid::new(512, 24.0));
    let phi = rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap();
    let s = normalize_density(&rep, &Operator::rank_one(&phi, &phi).unwrap()).unwrap();
    let region = Region::disk([0.11, -0.07], 1.5);
    let mu_exact = std::f64::consts::PI * 1.5 * 1.5;

    // 1. trace identity
    let tr = fo_conv_trace(
        &rep,
        ConvWeight::Indicator(&region, QuadSpec::new(256)),
        &s.op,
    )
    .unwrap();
    println!(
        "trace identity:     tr = {tr:.8}, tr(S) mu(E) = {:.8}, residual {:.2e}",
        s.trace * mu_exact,
        (tr - s.trace * mu_exact).abs() / (s.trace * mu_exact)
    );

    // 2. trace of the square
    let nodes = NodeSet::identity_window(Group::PhasePlane, 3.2, 128).unwrap();
    let ts = trace_of_square_identity(&rep, &region, &s, QuadSpec::new(256), &nodes, QuadSpec::new(256))
        .unwrap();
    println!(
        "trace of square:    lhs = {:.8}, rhs = {:.8}, residual {:.2e}",
        ts.lhs, ts.rhs, ts.residual
    );

    // 3. integrated operator-operator convolution (h_S has unit mass)
    let hs = h_s(&rep, &s, &nodes).unwrap();
    println!(
        "integrated S*S:     int h_S = {:.10} (deficit {:.2e}), h_S(e) = {:.10}",
        hs.integral, hs.truncated_mass, hs.at_identity
    );

    // 4. associativity with a Gaussian-windowed weight and a rank-one T
    let h1 = hermite_state(rep.grid, 1);
    let t = Operator::rank_one(&h1, &h1).unwrap();
    let fnodes = NodeSet::identity_window(Group::PhasePlane, 2.0, 24).unwrap();
    let values = fnodes
        .points
        .iter()
        .map(|p| Complex64::new((-(p.coord(0).powi(2) + p.coord(1).powi(2))).exp(), 0.0))
        .collect();
    let f = SampledGroupFunction { nodes: fnodes, values };
    let samples = [Group::PhasePlane.identity(), point2(0.4, -0.3), point2(-0.8, 0.6)];
    let resid = associativity_check(&rep, &f, &s.op, &t, &samples).unwrap();
    println!("associativity:      max |(f*S)*T - f*(S*T)| = {resid:.2e} over {} points", samples.len());
}
