//! Discretized representation spaces and unitary representation actions.
//!
//! Two representations are realized on an n-point sample grid:
//!
//! - **Schrödinger** (Heisenberg group modulo center, acting on the phase
//!   plane): states are samples of ψ ∈ L²(ℝ) on a uniform time grid, and
//!   π(x, y)ψ(u) = e^{2πi y u} ψ(u + x). Translations are band-limited
//!   fractional shifts through the FFT; modulations are pointwise phases.
//!   Both are exactly unitary on the grid.
//!
//! - **Affine wavelet** (ax+b group): states live on the Hardy space of
//!   positive-frequency signals, stored in *log-frequency* coordinates
//!   s = ln ξ via the unitary map (Wψ)(s) = e^{s/2} ψ̂(e^s). In these
//!   coordinates a dilation by a is a shift by ln a and a translation by b
//!   is the pointwise chirp e^{-2πi b e^s}, so
//!   (W π(b,a) ψ)(s) = e^{-2πi b e^s} (Wψ)(s + ln a).
//!   This makes the huge dilation ranges of the scaled-set experiments
//!   representable at fixed resolution; the price is that chirps must stay
//!   resolved, which is enforced by an alias-energy guard.
//!
//! The Duflo-Moore operator is a frequency multiplier: a constant d for the
//! mod-center Schrödinger case, c·ξ^{1/2} on the affine Hardy space. The
//! scalar is calibrated against the orthogonality relation (see
//! [`calibrate`]) rather than asserted.

mod calibrate;

pub use calibrate::{CalibrationReport, CalibrationSettings};

use crate::error::{Error, Result};
use crate::groups::{Group, Point};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Fraction of the input norm allowed to wrap around the grid edge in a
/// band-limited shift, or to fold past Nyquist in a modulation.
pub const WRAP_ENERGY_TOL: f64 = 1e-10;
/// Energy allowed where a chirp oscillates too fast for the grid.
pub const CHIRP_ALIAS_TOL: f64 = 1e-8;
/// A chirp is considered resolved up to this fraction of Nyquist.
const CHIRP_NYQUIST_FRACTION: f64 = 0.9;

/// Uniform sample grid: n points u_j = center - T/2 + j h, h = T/n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleGrid {
    pub n: usize,
    pub extent: f64,
    pub center: f64,
}

impl SampleGrid {
    pub fn new(n: usize, extent: f64) -> Self {
        SampleGrid {
            n,
            extent,
            center: 0.0,
        }
    }

    pub fn centered(n: usize, extent: f64, center: f64) -> Self {
        SampleGrid { n, extent, center }
    }

    pub fn step(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.center - self.extent / 2.0 + j as f64 * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Signed DFT bin frequency k/T.
    pub fn frequency(&self, k: usize) -> f64 {
        let half = self.n / 2;
        if k < half {
            k as f64 / self.extent
        } else {
            (k as f64 - self.n as f64) / self.extent
        }
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.step()
    }
}

/// Discretized element of the representation space.
#[derive(Clone, Debug)]
pub struct State {
    pub grid: SampleGrid,
    pub values: Vec<Complex64>,
}

impl State {
    pub fn zero(grid: SampleGrid) -> State {
        State {
            grid,
            values: vec![Complex64::ZERO; grid.n],
        }
    }

    pub fn from_fn(grid: SampleGrid, f: impl Fn(f64) -> Complex64) -> State {
        let values = (0..grid.n).map(|j| f(grid.point(j))).collect();
        State { grid, values }
    }

    /// h-weighted inner product ⟨self, other⟩ = h Σ self conj(other).
    pub fn inner(&self, other: &State) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let mut acc = Complex64::ZERO;
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a * b.conj();
        }
        Ok(acc * self.grid.step())
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.step() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalized(mut self) -> State {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero state");
        for v in &mut self.values {
            *v /= n;
        }
        self
    }

    pub fn scaled(mut self, c: Complex64) -> State {
        for v in &mut self.values {
            *v *= c;
        }
        self
    }
}

/// Hermitian-capable dense operator on the discretized space.
///
/// Matrices act on plain coordinate vectors; the grid weight h is absorbed
/// into rank-one construction and inner products, so a rank-one φ⊗φ built
/// from a unit state has matrix trace exactly 1.
#[derive(Clone, Debug)]
pub struct Operator {
    pub grid: SampleGrid,
    pub mat: DMatrix<Complex64>,
    pub hermitian: bool,
    pub psd: bool,
}

impl Operator {
    pub fn zero(grid: SampleGrid) -> Operator {
        Operator {
            grid,
            mat: DMatrix::zeros(grid.n, grid.n),
            hermitian: true,
            psd: true,
        }
    }

    pub fn identity(grid: SampleGrid) -> Operator {
        Operator {
            grid,
            mat: DMatrix::identity(grid.n, grid.n),
            hermitian: true,
            psd: true,
        }
    }

    /// ψ ⊗ φ: the operator ξ ↦ ⟨ξ, φ⟩ ψ, with matrix h ψ φ*.
    pub fn rank_one(psi: &State, phi: &State) -> Result<Operator> {
        if psi.grid != phi.grid {
            return Err(Error::GridMismatch);
        }
        let n = psi.grid.n;
        let h = psi.grid.step();
        let mut mat = DMatrix::zeros(n, n);
        for j in 0..n {
            let c = phi.values[j].conj() * h;
            for i in 0..n {
                mat[(i, j)] = psi.values[i] * c;
            }
        }
        let herm = std::ptr::eq(psi, phi)
            || psi
                .values
                .iter()
                .zip(&phi.values)
                .all(|(a, b)| (a - b).norm_sqr() == 0.0);
        Ok(Operator {
            grid: psi.grid,
            mat,
            hermitian: herm,
            psd: herm,
        })
    }

    /// Weighted sum of projectors Σ w_k φ_k ⊗ φ_k.
    pub fn mixture(parts: &[(f64, State)]) -> Result<Operator> {
        assert!(!parts.is_empty());
        let grid = parts[0].1.grid;
        let mut op = Operator::zero(grid);
        let mut psd = true;
        for (w, phi) in parts {
            let r = Operator::rank_one(phi, phi)?;
            op.mat += r.mat * Complex64::new(*w, 0.0);
            psd &= *w >= 0.0;
        }
        op.hermitian = true;
        op.psd = psd;
        Ok(op)
    }

    pub fn trace(&self) -> Complex64 {
        let mut t = Complex64::ZERO;
        for i in 0..self.mat.nrows() {
            t += self.mat[(i, i)];
        }
        t
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum()
    }

    /// max |M - M^H| entry, relative to the largest entry.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.mat.nrows();
        let mut dev: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for j in 0..n {
            for i in j..n {
                dev = dev.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
                scale = scale.max(self.mat[(i, j)].norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            dev / scale
        }
    }

    pub fn apply_state(&self, psi: &State) -> Result<State> {
        if psi.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let v = nalgebra::DVector::from_column_slice(&psi.values);
        let out = &self.mat * v;
        Ok(State {
            grid: psi.grid,
            values: out.iter().copied().collect(),
        })
    }
}

/// Window state specification, parsed from config strings like
/// `gaussian(1.0)`, `hermite(2)`, `morlet(0.125,0.3)`, or
/// `mixed_hermite(0.4,0.3,0.2,0.1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum WindowSpec {
    Gaussian { width: f64 },
    Hermite { k: usize },
    MorletLike { center_freq: f64, width: f64 },
    MixedHermite { weights: Vec<f64> },
}

impl WindowSpec {
    pub fn parse(s: &str) -> Result<WindowSpec> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], &s[i + 1..s.len() - 1]),
            _ => (s, ""),
        };
        let nums: Vec<f64> = if args.trim().is_empty() {
            vec![]
        } else {
            args.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad window argument `{t}` in `{s}`")))
                })
                .collect::<Result<_>>()?
        };
        match name {
            "gaussian" => Ok(WindowSpec::Gaussian {
                width: *nums.first().unwrap_or(&1.0),
            }),
            "hermite" => Ok(WindowSpec::Hermite {
                k: *nums.first().unwrap_or(&0.0) as usize,
            }),
            "morlet" | "morlet_like" => {
                if nums.len() != 2 {
                    return Err(Error::Config(format!(
                        "`{s}`: morlet takes (center-frequency, width)"
                    )));
                }
                Ok(WindowSpec::MorletLike {
                    center_freq: nums[0],
                    width: nums[1],
                })
            }
            "mixed_hermite" => {
                if nums.is_empty() {
                    return Err(Error::Config("mixed_hermite needs weights".into()));
                }
                Ok(WindowSpec::MixedHermite { weights: nums })
            }
            other => Err(Error::Config(format!("unknown window kind `{other}`"))),
        }
    }
}

/// Unit-normalized Hermite function of order k on the grid, in the
/// convention where h_0(u) = 2^{1/4} e^{-π u²} and ĥ_k = (-i)^k h_k.
pub fn hermite_state(grid: SampleGrid, k: usize) -> State {
    let pts = grid.points();
    let mut prev: Vec<f64> = vec![0.0; grid.n];
    let mut cur: Vec<f64> = pts.iter().map(|&u| (-std::f64::consts::PI * u * u).exp()).collect();
    for m in 0..k {
        let next: Vec<f64> = pts
            .iter()
            .enumerate()
            .map(|(j, &u)| {
                let x = (2.0 * std::f64::consts::PI).sqrt() * u;
                2.0 * x * cur[j] - 2.0 * m as f64 * prev[j]
            })
            .collect();
        prev = cur;
        cur = next;
    }
    State {
        grid,
        values: cur.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    }
    .normalized()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepKind {
    Schrodinger,
    AffineWavelet,
}

/// A unitary representation model bound to a sample grid.
#[derive(Clone)]
pub struct Rep {
    pub kind: RepKind,
    pub grid: SampleGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Calibrated Duflo-Moore scalar: d for Schrödinger-mod-center
    /// (D = d·I), the multiplier constant c for the affine model
    /// (D = c·ξ^{1/2}). Defaults to 1 until [`Rep::calibrate`] runs.
    pub duflo_scale: f64,
}

impl std::fmt::Debug for Rep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rep")
            .field("kind", &self.kind)
            .field("grid", &self.grid)
            .field("duflo_scale", &self.duflo_scale)
            .finish()
    }
}

impl Rep {
    pub fn new(kind: RepKind, grid: SampleGrid) -> Rep {
        let mut planner = FftPlanner::new();
        Rep {
            kind,
            grid,
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
            duflo_scale: 1.0,
        }
    }

    pub fn schrodinger(grid: SampleGrid) -> Rep {
        Rep::new(RepKind::Schrodinger, grid)
    }

    pub fn affine_wavelet(grid: SampleGrid) -> Rep {
        Rep::new(RepKind::AffineWavelet, grid)
    }

    pub fn group(&self) -> Group {
        match self.kind {
            RepKind::Schrodinger => Group::PhasePlane,
            RepKind::AffineWavelet => Group::Affine,
        }
    }

    /// Builds a window state. Gaussian/Hermite windows live on the
    /// Schrödinger time grid; morlet-like windows on the affine
    /// log-frequency grid.
    pub fn window(&self, spec: &WindowSpec) -> Result<State> {
        match (self.kind, spec) {
            (RepKind::Schrodinger, WindowSpec::Gaussian { width }) => {
                if *width <= 0.0 {
                    return Err(Error::Config("gaussian width must be positive".into()));
                }
                let w = *width;
                Ok(State::from_fn(self.grid, |u| {
                    Complex64::new((-std::f64::consts::PI * (u / w).powi(2)).exp(), 0.0)
                })
                .normalized())
            }
            (RepKind::Schrodinger, WindowSpec::Hermite { k }) => Ok(hermite_state(self.grid, *k)),
            (RepKind::AffineWavelet, WindowSpec::MorletLike { center_freq, width }) => {
                if *center_freq <= 0.0 || *width <= 0.0 {
                    return Err(Error::Config("morlet parameters must be positive".into()));
                }
                let s0 = center_freq.ln();
                let w = *width;
                Ok(State::from_fn(self.grid, |s| {
                    Complex64::new((-(s - s0).powi(2) / (4.0 * w * w)).exp(), 0.0)
                })
                .normalized())
            }
            (kind, spec) => Err(Error::Config(format!(
                "window {spec:?} is not available for {kind:?}"
            ))),
        }
    }

    /// Density-operator building blocks for a window spec: a list of
    /// (weight, state) pairs.
    pub fn window_mixture(&self, spec: &WindowSpec) -> Result<Vec<(f64, State)>> {
        match spec {
            WindowSpec::MixedHermite { weights } => {
                if self.kind != RepKind::Schrodinger {
                    return Err(Error::Config(
                        "mixed_hermite windows require the Schrödinger model".into(),
                    ));
                }
                Ok(weights
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| (w, hermite_state(self.grid, k)))
                    .collect())
            }
            other => Ok(vec![(1.0, self.window(other)?)]),
        }
    }

    fn fft(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.fwd.process(&mut buf);
        buf
    }

    fn ifft_inplace(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let scale = 1.0 / buf.len() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Band-limited fractional shift: returns ψ(· + dx).
    ///
    /// The shift is circular; content of the input within |dx| of the grid
    /// edge would wrap around, so its energy is guarded.
    pub fn shift(&self, state: &State, dx: f64) -> Result<State> {
        self.check_grid(state)?;
        self.wrap_guard(&state.values, dx, state.norm_sq())?;
        Ok(self.shift_unguarded(state, dx))
    }

    fn shift_spectrum(&self, spec: &mut [Complex64], dx: f64) {
        for (k, v) in spec.iter_mut().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * self.grid.frequency(k) * dx;
            *v *= Complex64::from_polar(1.0, phase);
        }
    }

    fn wrap_guard(&self, values: &[Complex64], dx: f64, norm_sq: f64) -> Result<()> {
        if dx == 0.0 || norm_sq == 0.0 {
            return Ok(());
        }
        let h = self.grid.step();
        let band = ((dx.abs() / h).ceil() as usize + 1).min(self.grid.n);
        let energy: f64 = if dx > 0.0 {
            values[..band].iter().map(|v| v.norm_sqr()).sum::<f64>() * h
        } else {
            values[self.grid.n - band..]
                .iter()
                .map(|v| v.norm_sqr())
                .sum::<f64>()
                * h
        };
        if energy > WRAP_ENERGY_TOL * norm_sq {
            return Err(Error::guard(
                "wrap-around",
                format!(
                    "shift by {dx:.3} wraps {:.2e} of the state energy past the grid edge",
                    energy / norm_sq
                ),
            ));
        }
        Ok(())
    }

    /// Pointwise modulation e^{2πi m u}. Folding of the shifted spectrum
    /// past Nyquist is guarded using the state's own spectrum.
    pub fn modulate(&self, state: &State, m: f64) -> Result<State> {
        self.check_grid(state)?;
        let spec = self.fft(&state.values);
        let tail = modulation_alias_energy(&spec, self.grid, m);
        let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        if total > 0.0 && tail > WRAP_ENERGY_TOL * total {
            return Err(Error::guard(
                "modulation-alias",
                format!(
                    "modulation by {m:.3} folds {:.2e} of the spectrum past Nyquist",
                    tail / total
                ),
            ));
        }
        Ok(self.modulate_unchecked(state, m))
    }

    pub(crate) fn modulate_unchecked(&self, state: &State, m: f64) -> State {
        let two_pi_m = 2.0 * std::f64::consts::PI * m;
        State {
            grid: state.grid,
            values: state
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, two_pi_m * state.grid.point(j)))
                .collect(),
        }
    }

    /// Pointwise chirp e^{-2πi b e^s} on the log-frequency grid, with the
    /// alias-energy guard: where |b| e^s exceeds the resolvable rate, the
    /// state must carry (almost) no energy.
    fn chirp(&self, state: &State, b: f64) -> Result<State> {
        self.chirp_guard(&state.values, b)?;
        Ok(self.chirp_unchecked(state, b))
    }

    pub(crate) fn chirp_unchecked(&self, state: &State, b: f64) -> State {
        State {
            grid: state.grid,
            values: state
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let phase = -2.0 * std::f64::consts::PI * b * state.grid.point(j).exp();
                    v * Complex64::from_polar(1.0, phase)
                })
                .collect(),
        }
    }

    fn chirp_guard(&self, values: &[Complex64], b: f64) -> Result<()> {
        if b == 0.0 {
            return Ok(());
        }
        let j0 = self.chirp_safe_index(b);
        if j0 >= self.grid.n {
            return Ok(());
        }
        let h = self.grid.step();
        let total: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h;
        let tail: f64 = values[j0..].iter().map(|v| v.norm_sqr()).sum::<f64>() * h;
        if total > 0.0 && tail > CHIRP_ALIAS_TOL * total {
            return Err(Error::guard(
                "chirp-alias",
                format!(
                    "chirp rate |b| e^s exceeds {CHIRP_NYQUIST_FRACTION} Nyquist on {:.2e} of the state energy (b = {b:.3})",
                    tail / total
                ),
            ));
        }
        Ok(())
    }

    /// First grid index where the instantaneous chirp rate |b| e^s passes
    /// the resolvable fraction of Nyquist.
    pub(crate) fn chirp_safe_index(&self, b: f64) -> usize {
        let limit = CHIRP_NYQUIST_FRACTION * self.grid.nyquist();
        let s_star = (limit / b.abs()).ln();
        let lo = self.grid.point(0);
        if s_star <= lo {
            return 0;
        }
        (((s_star - lo) / self.grid.step()).floor() as usize + 1).min(self.grid.n)
    }

    /// π(x)ψ.
    pub fn apply(&self, x: Point, state: &State) -> Result<State> {
        self.group().validate(x)?;
        match self.kind {
            RepKind::Schrodinger => {
                let shifted = self.shift(state, x.coord(0))?;
                self.modulate(&shifted, x.coord(1))
            }
            RepKind::AffineWavelet => {
                let (b, a) = (x.coord(0), x.coord(1));
                let shifted = self.shift(state, a.ln())?;
                self.chirp(&shifted, b)
            }
        }
    }

    /// π(x)*ψ, the exact adjoint of the discrete `apply`.
    pub fn apply_adjoint(&self, x: Point, state: &State) -> Result<State> {
        self.group().validate(x)?;
        match self.kind {
            RepKind::Schrodinger => {
                // (M_y S_x)^* = S_{-x} M_{-y}
                let demod = self.modulate(state, -x.coord(1))?;
                self.shift(&demod, -x.coord(0))
            }
            RepKind::AffineWavelet => self.apply(self.group().invert(x), state),
        }
    }

    /// Matrix coefficient C_{ψ,φ}(x) = ⟨π(x)ψ, φ⟩.
    pub fn matrix_coefficient(&self, psi: &State, phi: &State, x: Point) -> Result<Complex64> {
        self.apply(x, psi)?.inner(phi)
    }

    /// α_x(T) = π(x)* T π(x) by dense conjugation. O(n³); fine for tests
    /// and small operators, not for quadrature loops.
    ///
    /// π(x) is used as the exact discrete (circular) unitary here, without
    /// the wrap guards: basis columns are delta spikes for which the
    /// continuum-fidelity guards are meaningless, while unitary conjugation
    /// is exact either way.
    pub fn alpha(&self, x: Point, t: &Operator) -> Result<Operator> {
        self.group().validate(x)?;
        self.check_grid_op(t)?;
        let n = self.grid.n;
        // U = matrix of pi(x)
        let mut u = DMatrix::<Complex64>::zeros(n, n);
        for j in 0..n {
            let mut e = State::zero(self.grid);
            e.values[j] = Complex64::ONE;
            let col = self.apply_unguarded(x, &e);
            for i in 0..n {
                u[(i, j)] = col.values[i];
            }
        }
        let mat = u.adjoint() * &t.mat * &u;
        Ok(Operator {
            grid: t.grid,
            mat,
            hermitian: t.hermitian,
            psd: t.psd,
        })
    }

    fn apply_unguarded(&self, x: Point, state: &State) -> State {
        match self.kind {
            RepKind::Schrodinger => {
                let shifted = self.shift_unguarded(state, x.coord(0));
                self.modulate_unchecked(&shifted, x.coord(1))
            }
            RepKind::AffineWavelet => {
                let (b, a) = (x.coord(0), x.coord(1));
                let shifted = self.shift_unguarded(state, a.ln());
                self.chirp_unchecked(&shifted, b)
            }
        }
    }

    fn shift_unguarded(&self, state: &State, dx: f64) -> State {
        let mut spec = self.fft(&state.values);
        self.shift_spectrum(&mut spec, dx);
        self.ifft_inplace(&mut spec);
        State {
            grid: state.grid,
            values: spec,
        }
    }

    /// Duflo-Moore multiplier D^power (power ∈ {+1, -1}).
    pub fn duflo_apply(&self, state: &State, power: i32) -> Result<State> {
        self.check_grid(state)?;
        assert!(power == 1 || power == -1);
        let out = match self.kind {
            RepKind::Schrodinger => {
                let c = self.duflo_scale.powi(power);
                state.clone().scaled(Complex64::new(c, 0.0))
            }
            RepKind::AffineWavelet => {
                let c = self.duflo_scale.powi(power);
                State {
                    grid: state.grid,
                    values: state
                        .values
                        .iter()
                        .enumerate()
                        .map(|(j, v)| {
                            v * c * (0.5 * power as f64 * state.grid.point(j)).exp()
                        })
                        .collect(),
                }
            }
        };
        if power == -1 {
            let (a, b) = (out.norm_sq(), state.norm_sq());
            if b > 0.0 && a > 1e12 * b {
                return Err(Error::guard(
                    "non-admissible",
                    format!("D^-1 amplifies the state norm by {:.2e}", (a / b).sqrt()),
                ));
            }
        }
        Ok(out)
    }

    /// ‖D⁻¹ψ‖² — the admissibility weight used by density normalization.
    pub fn duflo_inv_weight(&self, state: &State) -> Result<f64> {
        Ok(self.duflo_apply(state, -1)?.norm_sq())
    }

    /// Runs the orthogonality-relation calibration and stores the fitted
    /// Duflo-Moore scalar on the representation.
    pub fn calibrate(&mut self, settings: &CalibrationSettings) -> Result<CalibrationReport> {
        let report = calibrate::run(self, settings)?;
        self.duflo_scale = report.scale;
        Ok(report)
    }

    fn check_grid(&self, state: &State) -> Result<()> {
        if state.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn check_grid_op(&self, op: &Operator) -> Result<()> {
        if op.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    // ----- quadrature-loop support ---------------------------------------
    //
    // Function-operator convolutions evaluate the adjoint family pi(x)*phi
    // on a product grid. The expensive factor (the fractional shift) only
    // depends on the outer grid axis, so it is computed once per row; the
    // per-node completion is a pointwise phase.

    /// Per-row data for the adjoint family: the shifted profile plus the
    /// lookup tables the per-node guards need.
    pub fn conv_row(&self, component: &State, axis0: f64) -> Result<ConvRow> {
        match self.kind {
            RepKind::Schrodinger => {
                // row coordinate = x (translation); pi(x,y)* = S_{-x} after M_{-y},
                // and M commutes with the guard since |spectrum| is shift-invariant
                let shifted = self.shift(component, -axis0)?;
                let spec = self.fft(&component.values);
                Ok(ConvRow {
                    state: shifted,
                    spectral_tail: SpectralTail::from_spectrum(&spec, self.grid),
                    chirp_suffix: Vec::new(),
                })
            }
            RepKind::AffineWavelet => {
                // row coordinate = scale a; shifted profile (W phi)(s - ln a)
                let shifted = self.shift(component, -axis0.ln())?;
                let h = self.grid.step();
                let mut suffix = vec![0.0; self.grid.n + 1];
                for j in (0..self.grid.n).rev() {
                    suffix[j] = suffix[j + 1] + shifted.values[j].norm_sqr() * h;
                }
                Ok(ConvRow {
                    state: shifted,
                    spectral_tail: SpectralTail::default(),
                    chirp_suffix: suffix,
                })
            }
        }
    }

    /// Completes a row state to the node state π(x)*φ, writing into `out`.
    pub fn conv_node(&self, row: &ConvRow, axis0: f64, axis1: f64, out: &mut [Complex64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.grid.n);
        match self.kind {
            RepKind::Schrodinger => {
                let y = axis1;
                let tail = row.spectral_tail.alias_energy(self.grid, -y);
                if tail > WRAP_ENERGY_TOL * row.spectral_tail.total.max(f64::MIN_POSITIVE) {
                    return Err(Error::guard(
                        "modulation-alias",
                        format!("modulation by {y:.3} folds {:.2e} of the window spectrum", tail / row.spectral_tail.total),
                    ));
                }
                let two_pi_y = -2.0 * std::f64::consts::PI * y;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = row.state.values[j]
                        * Complex64::from_polar(1.0, two_pi_y * self.grid.point(j));
                }
                Ok(())
            }
            RepKind::AffineWavelet => {
                // node chirp parameter is b/a with the +2pi i sign from the
                // inverse point (-b/a, 1/a)
                let (a, b) = (axis0, axis1);
                let bp = b / a;
                let j0 = self.chirp_safe_index(bp);
                if j0 < self.grid.n {
                    let tail = row.chirp_suffix[j0];
                    let total = row.chirp_suffix[0];
                    if total > 0.0 && tail > CHIRP_ALIAS_TOL * total {
                        return Err(Error::guard(
                            "chirp-alias",
                            format!(
                                "node (b={b:.3}, a={a:.3e}): chirp under-resolved on {:.2e} of the state energy",
                                tail / total
                            ),
                        ));
                    }
                }
                let two_pi_bp = 2.0 * std::f64::consts::PI * bp;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = row.state.values[j]
                        * Complex64::from_polar(1.0, two_pi_bp * self.grid.point(j).exp());
                }
                Ok(())
            }
        }
    }
}

/// Shifted component profile plus guard tables for one quadrature row.
pub struct ConvRow {
    pub state: State,
    spectral_tail: SpectralTail,
    chirp_suffix: Vec<f64>,
}

/// Cumulative spectral energies from the top and bottom frequency edges.
#[derive(Default)]
struct SpectralTail {
    /// cum_top[m] = energy of the m highest-frequency bins
    cum_top: Vec<f64>,
    cum_bottom: Vec<f64>,
    total: f64,
}

impl SpectralTail {
    fn from_spectrum(spec: &[Complex64], grid: SampleGrid) -> SpectralTail {
        // order bins by signed frequency
        let n = grid.n;
        let mut by_freq: Vec<(f64, f64)> = spec
            .iter()
            .enumerate()
            .map(|(k, v)| (grid.frequency(k), v.norm_sqr()))
            .collect();
        by_freq.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut cum_top = vec![0.0; n + 1];
        let mut cum_bottom = vec![0.0; n + 1];
        for m in 0..n {
            cum_top[m + 1] = cum_top[m] + by_freq[n - 1 - m].1;
            cum_bottom[m + 1] = cum_bottom[m] + by_freq[m].1;
        }
        SpectralTail {
            total: cum_top[n],
            cum_top,
            cum_bottom,
        }
    }

    /// Energy folded past Nyquist when the spectrum is shifted by `m` bins
    /// worth of modulation.
    fn alias_energy(&self, grid: SampleGrid, modulation: f64) -> f64 {
        if modulation == 0.0 || self.cum_top.is_empty() {
            return 0.0;
        }
        let dxi = 1.0 / grid.extent;
        let bins = ((modulation.abs() / dxi).ceil() as usize).min(grid.n);
        if modulation > 0.0 {
            self.cum_top[bins]
        } else {
            self.cum_bottom[bins]
        }
    }
}

fn modulation_alias_energy(spec: &[Complex64], grid: SampleGrid, m: f64) -> f64 {
    SpectralTail::from_spectrum(spec, grid).alias_energy(grid, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::point2;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn schrod() -> Rep {
        Rep::schrodinger(SampleGrid::new(512, 24.0))
    }

    fn affine() -> Rep {
        Rep::affine_wavelet(SampleGrid::centered(1024, 23.0, 6.0))
    }

    fn gaussian(rep: &Rep) -> State {
        rep.window(&WindowSpec::Gaussian { width: 1.0 }).unwrap()
    }

    fn morlet(rep: &Rep) -> State {
        rep.window(&WindowSpec::MorletLike {
            center_freq: 0.125,
            width: 0.3,
        })
        .unwrap()
    }

    fn random_state(rep: &Rep, rng: &mut StdRng) -> State {
        // random band-limited, well-localized state: random mix of windows
        let base = match rep.kind {
            RepKind::Schrodinger => (0..4).map(|k| hermite_state(rep.grid, k)).collect::<Vec<_>>(),
            RepKind::AffineWavelet => (0..4)
                .map(|k| {
                    rep.window(&WindowSpec::MorletLike {
                        center_freq: 0.18 * 1.3f64.powi(k),
                        width: 0.2,
                    })
                    .unwrap()
                })
                .collect(),
        };
        let mut st = State::zero(rep.grid);
        for b in base {
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            for (v, u) in st.values.iter_mut().zip(&b.values) {
                *v += c * u;
            }
        }
        st.normalized()
    }

    #[test]
    fn grid_points_match_formula() {
        let g = SampleGrid::new(8, 4.0);
        assert!((g.point(0) + 2.0).abs() < 1e-15);
        assert!((g.step() - 0.5).abs() < 1e-15);
        assert!((g.point(7) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn shift_matches_gaussian_translate() {
        let rep = schrod();
        let phi = gaussian(&rep);
        let shifted = rep.shift(&phi, 0.7).unwrap();
        for (j, v) in shifted.values.iter().enumerate().step_by(17) {
            let u = rep.grid.point(j);
            let expect = 2f64.powf(0.25) * (-std::f64::consts::PI * (u + 0.7).powi(2)).exp();
            assert!((v.re - expect).abs() < 1e-10 && v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn apply_identity_is_noop() {
        for rep in [schrod(), affine()] {
            let phi = match rep.kind {
                RepKind::Schrodinger => gaussian(&rep),
                RepKind::AffineWavelet => morlet(&rep),
            };
            let out = rep.apply(rep.group().identity(), &phi).unwrap();
            let diff: f64 = out
                .values
                .iter()
                .zip(&phi.values)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            assert!(diff.sqrt() < 1e-12);
        }
    }

    #[test]
    fn pure_modulation_multiplies_pointwise() {
        let rep = schrod();
        let phi = gaussian(&rep);
        let out = rep.apply(point2(0.0, 1.3), &phi).unwrap();
        for (j, (o, p)) in out.values.iter().zip(&phi.values).enumerate().step_by(13) {
            let u = rep.grid.point(j);
            let expect = p * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 1.3 * u);
            assert!((o - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn unitarity_random_states_and_points() {
        let mut rng = StdRng::seed_from_u64(7);
        for rep in [schrod(), affine()] {
            for _ in 0..40 {
                let psi = random_state(&rep, &mut rng);
                let x = match rep.kind {
                    RepKind::Schrodinger => {
                        point2(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
                    }
                    RepKind::AffineWavelet => {
                        point2(rng.random_range(-2.0..2.0), rng.random_range(0.25..4.0))
                    }
                };
                let out = rep.apply(x, &psi).unwrap();
                assert!(
                    (out.norm() - psi.norm()).abs() < 1e-8,
                    "{:?} x={x:?}",
                    rep.kind
                );
            }
        }
    }

    #[test]
    fn gaussian_ambiguity_closed_form() {
        // |<pi(x,y) phi, phi>| = e^{-pi (x^2+y^2)/2} for the unit Gaussian
        let rep = schrod();
        let phi = gaussian(&rep);
        for (x, y) in [(0.5, 0.25), (1.0, -0.7), (0.0, 1.5), (-1.2, 0.4)] {
            let c = rep.matrix_coefficient(&phi, &phi, point2(x, y)).unwrap();
            let expect = (-std::f64::consts::PI * (x * x + y * y) / 2.0).exp();
            assert!(
                (c.norm() - expect).abs() < 1e-10,
                "({x},{y}): {} vs {expect}",
                c.norm()
            );
        }
    }

    #[test]
    fn matrix_coefficient_at_identity_is_norm() {
        let rep = affine();
        let phi = morlet(&rep);
        let c = rep
            .matrix_coefficient(&phi, &phi, rep.group().identity())
            .unwrap();
        assert!((c - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn affine_representation_property() {
        let rep = affine();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let psi = random_state(&rep, &mut rng);
            let x = point2(rng.random_range(-1.5..1.5), rng.random_range(0.5..2.0));
            let y = point2(rng.random_range(-1.5..1.5), rng.random_range(0.5..2.0));
            let lhs = rep.apply(x, &rep.apply(y, &psi).unwrap()).unwrap();
            let rhs = rep.apply(rep.group().multiply(x, y), &psi).unwrap();
            let diff: f64 = lhs
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(diff < 1e-6, "diff={diff}");
        }
    }

    #[test]
    fn schrodinger_projective_phase_cancels_in_alpha() {
        // pi(x)pi(y) = phase * pi(xy); alpha is phase-free
        let rep = Rep::schrodinger(SampleGrid::new(128, 12.0));
        let g = rep.group();
        let phi = gaussian(&rep);
        let t = Operator::rank_one(&phi, &phi).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..4 {
            let x = point2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let y = point2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let lhs = rep.alpha(x, &rep.alpha(y, &t).unwrap()).unwrap();
            let rhs = rep.alpha(g.multiply(y, x), &t).unwrap();
            let diff = (&lhs.mat - &rhs.mat).norm();
            assert!(diff < 1e-7, "alpha action property diff={diff}");
        }
    }

    #[test]
    fn alpha_preserves_trace_and_flags() {
        let rep = Rep::schrodinger(SampleGrid::new(128, 12.0));
        let phi = gaussian(&rep);
        let psi = hermite_state(rep.grid, 1);
        let t = Operator::mixture(&[(0.7, phi), (0.3, psi)]).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..4 {
            let x = point2(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let at = rep.alpha(x, &t).unwrap();
            assert!((at.trace() - t.trace()).norm() < 1e-9);
            assert!(at.hermitian && at.psd);
            assert!(at.hermitian_deviation() < 1e-10);
        }
    }

    #[test]
    fn adjoint_is_matrix_adjoint() {
        let mut rng = StdRng::seed_from_u64(19);
        for rep in [schrod(), affine()] {
            let psi = random_state(&rep, &mut rng);
            let phi = random_state(&rep, &mut rng);
            let x = match rep.kind {
                RepKind::Schrodinger => point2(0.8, -1.1),
                RepKind::AffineWavelet => point2(0.8, 1.7),
            };
            let a = rep.apply(x, &psi).unwrap().inner(&phi).unwrap();
            let b = psi.inner(&rep.apply_adjoint(x, &phi).unwrap()).unwrap();
            assert!((a - b).norm() < 1e-10, "{:?}", rep.kind);
        }
    }

    #[test]
    fn duflo_covariance_affine() {
        // pi(x) D = Delta(x)^{-1/2} D pi(x)
        let rep = affine();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..10 {
            let psi = random_state(&rep, &mut rng);
            let x = point2(rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0));
            let lhs = rep.apply(x, &rep.duflo_apply(&psi, 1).unwrap()).unwrap();
            let factor = rep.group().modular(x).powf(-0.5);
            let rhs = rep
                .duflo_apply(&rep.apply(x, &psi).unwrap(), 1)
                .unwrap()
                .scaled(Complex64::new(factor, 0.0));
            let diff: f64 = lhs
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(diff < 1e-5, "covariance residual {diff}");
        }
    }

    #[test]
    fn duflo_inverse_pair_roundtrip() {
        for rep in [schrod(), affine()] {
            let phi = match rep.kind {
                RepKind::Schrodinger => gaussian(&rep),
                RepKind::AffineWavelet => morlet(&rep),
            };
            let back = rep
                .duflo_apply(&rep.duflo_apply(&phi, 1).unwrap(), -1)
                .unwrap();
            let diff: f64 = back
                .values
                .iter()
                .zip(&phi.values)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(diff < 1e-8);
        }
    }

    #[test]
    fn schrodinger_duflo_is_identity_scale() {
        let rep = schrod();
        let phi = gaussian(&rep);
        let d = rep.duflo_apply(&phi, 1).unwrap();
        let diff: f64 = d
            .values
            .iter()
            .zip(&phi.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-14);
    }

    #[test]
    fn wrap_guard_trips_on_large_shift() {
        let rep = schrod();
        let phi = gaussian(&rep);
        let err = rep.shift(&phi, 11.8).unwrap_err();
        assert!(matches!(err, Error::Guard { guard: "wrap-around", .. }));
    }

    #[test]
    fn modulation_guard_trips_past_nyquist() {
        let rep = schrod();
        let phi = gaussian(&rep);
        // Nyquist is ~10.7 at n=512, T=24
        let err = rep.modulate(&phi, 10.5).unwrap_err();
        assert!(matches!(err, Error::Guard { guard: "modulation-alias", .. }));
    }

    #[test]
    fn chirp_guard_trips_on_fast_chirp() {
        let rep = affine();
        // window at high center frequency so b e^s is under-resolved
        let phi = rep
            .window(&WindowSpec::MorletLike {
                center_freq: 4.0,
                width: 0.3,
            })
            .unwrap();
        let err = rep.apply(point2(12.0, 1.0), &phi).unwrap_err();
        assert!(matches!(err, Error::Guard { guard: "chirp-alias", .. }));
    }

    #[test]
    fn rank_one_trace_is_inner_product() {
        let rep = schrod();
        let phi = gaussian(&rep);
        let psi = hermite_state(rep.grid, 2);
        let op = Operator::rank_one(&psi, &phi).unwrap();
        let t = op.trace();
        let ip = psi.inner(&phi).unwrap();
        assert!((t - ip).norm() < 1e-12);
        let proj = Operator::rank_one(&phi, &phi).unwrap();
        assert!((proj.trace() - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn hermite_states_are_orthonormal() {
        let grid = SampleGrid::new(512, 24.0);
        for i in 0..6 {
            for j in 0..6 {
                let hi = hermite_state(grid, i);
                let hj = hermite_state(grid, j);
                let ip = hi.inner(&hj).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-9 && ip.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prop_alpha_rank_one_factorizes_as_coefficients() {
        // <alpha_x(phi2 (x) phi1) psi1, psi2> = C_{psi1,phi1}(x) conj(C_{psi2,phi2}(x))
        let rep = Rep::schrodinger(SampleGrid::new(256, 24.0));
        let mut rng = StdRng::seed_from_u64(29);
        let psi1 = random_state(&rep, &mut rng);
        let psi2 = random_state(&rep, &mut rng);
        let phi1 = random_state(&rep, &mut rng);
        let phi2 = random_state(&rep, &mut rng);
        for _ in 0..4 {
            let x = point2(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let op = Operator::rank_one(&phi2, &phi1).unwrap();
            let lhs = rep
                .alpha(x, &op)
                .unwrap()
                .apply_state(&psi1)
                .unwrap()
                .inner(&psi2)
                .unwrap();
            let rhs = rep.matrix_coefficient(&psi1, &phi1, x).unwrap()
                * rep.matrix_coefficient(&psi2, &phi2, x).unwrap().conj();
            assert!((lhs - rhs).norm() < 1e-9, "lhs={lhs} rhs={rhs}");
        }
    }

    #[test]
    fn conv_row_node_matches_apply_adjoint() {
        for rep in [schrod(), affine()] {
            let phi = match rep.kind {
                RepKind::Schrodinger => gaussian(&rep),
                RepKind::AffineWavelet => morlet(&rep),
            };
            let (c0, c1, x) = match rep.kind {
                // node (x, y) with row coordinate x
                RepKind::Schrodinger => (0.9, -1.4, point2(0.9, -1.4)),
                // node (b, a) with row coordinate a
                RepKind::AffineWavelet => (3.0, 2.5, point2(2.5, 3.0)),
            };
            let row = rep.conv_row(&phi, c0).unwrap();
            let mut out = vec![Complex64::ZERO; rep.grid.n];
            rep.conv_node(&row, c0, c1, &mut out).unwrap();
            let direct = rep.apply_adjoint(x, &phi).unwrap();
            let diff: f64 = out
                .iter()
                .zip(&direct.values)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            // schrodinger: the row/node order swaps shift and modulation,
            // which costs the projective phase e^{-2pi i x y}
            let phase = match rep.kind {
                RepKind::Schrodinger => {
                    Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * c0 * c1)
                }
                RepKind::AffineWavelet => Complex64::ONE,
            };
            let diff_phase: f64 = out
                .iter()
                .zip(&direct.values)
                .map(|(a, b)| (a - phase * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(
                diff_phase.min(diff) < 1e-10,
                "{:?}: diff={diff} diff_phase={diff_phase}",
                rep.kind
            );
        }
    }

    #[test]
    fn window_spec_parsing() {
        assert_eq!(
            WindowSpec::parse("gaussian(1.0)").unwrap(),
            WindowSpec::Gaussian { width: 1.0 }
        );
        assert_eq!(
            WindowSpec::parse("hermite(3)").unwrap(),
            WindowSpec::Hermite { k: 3 }
        );
        assert_eq!(
            WindowSpec::parse("morlet(0.125, 0.3)").unwrap(),
            WindowSpec::MorletLike {
                center_freq: 0.125,
                width: 0.3
            }
        );
        assert_eq!(
            WindowSpec::parse("mixed_hermite(0.4,0.3,0.2,0.1)").unwrap(),
            WindowSpec::MixedHermite {
                weights: vec![0.4, 0.3, 0.2, 0.1]
            }
        );
        assert!(WindowSpec::parse("boxcar(1)").is_err());
    }
}
