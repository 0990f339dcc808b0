//! Sliding Fourier components `c[n]`, `s[n]` and their attenuated variants.
//!
//! For a frequency ω and decay α ≥ 0,
//!
//! ```text
//! c[n] = Σ_{k=-K}^{K} x[n-k] e^{αk} cos(ωk)
//! s[n] = Σ_{k=-K}^{K} x[n-k] e^{αk} sin(ωk)
//! ```
//!
//! Every strategy computes `A[n] = c[n] - i s[n] = Σ_k x[n-k] z^k` with
//! `z = e^{α - iω}`. With `α = 0` the recursive filters run forward in time.
//! With `α > 0` they run backward, where the pole `w = 1/z` lies inside the
//! unit circle, which keeps the state bounded by `max|x| / (1 - e^{-α})`.
//!
//! Phases and twiddle factors are always evaluated in double precision and
//! rounded once to the working precision.

use std::f64::consts::PI;
use std::fmt::Debug;

use num_complex::{Complex, Complex64};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

use crate::error::{invalid, Result};
use crate::exec::{self, Workers};
use crate::signal::{Precision, Signal};
use crate::sliding_sum::{self, SlidingSumVariant};

/// Floating-point type of the engine state.
pub trait Real: Float + FromPrimitive + ToPrimitive + NumAssign + Send + Sync + Debug + Default + 'static {
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

fn cplx<T: Real>(v: Complex64) -> Complex<T> {
    Complex::new(T::of(v.re), T::of(v.im))
}

fn widen<T: Real>(v: Complex<T>) -> Complex64 {
    Complex64::new(v.re.to_f64().unwrap_or(f64::NAN), v.im.to_f64().unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Prefix sums of `x[m] w^m`; windows are prefix differences.
    #[default]
    KernelIntegral,
    /// First-order recursive filter, then window truncation.
    Recursive1,
    /// Real second-order recursive filter, then window truncation.
    Recursive2,
    /// Kernel integral whose window sums come from the log-depth sliding sum.
    SlidingSum,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "kernel" => Ok(Strategy::KernelIntegral),
            "rec1" => Ok(Strategy::Recursive1),
            "rec2" => Ok(Strategy::Recursive2),
            "sliding" => Ok(Strategy::SlidingSum),
            other => Err(format!("unknown strategy `{other}` (kernel, rec1, rec2, sliding)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::KernelIntegral => "kernel",
            Strategy::Recursive1 => "rec1",
            Strategy::Recursive2 => "rec2",
            Strategy::SlidingSum => "sliding",
        })
    }
}

/// Window length used when truncating a recursive filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// Subtract the state `2K` samples back and add the one leaving sample.
    #[default]
    TwoK,
    /// Subtract the state `2K + 1` samples back.
    TwoKPlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frequency {
    /// `ω = βp`.
    Order(u32),
    /// Any `ω` in rad/sample.
    Real(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SftConfig {
    pub half_width: usize,
    pub beta: f64,
    pub frequency: Frequency,
    pub alpha: f64,
    pub strategy: Strategy,
    pub truncation: Truncation,
    pub precision: Precision,
}

impl SftConfig {
    /// Plain SFT of order `p` with `β = π/K`, kernel-integral strategy, double precision.
    pub fn new(half_width: usize, order: u32) -> Self {
        SftConfig {
            half_width,
            beta: PI / half_width.max(1) as f64,
            frequency: Frequency::Order(order),
            alpha: 0.0,
            strategy: Strategy::default(),
            truncation: Truncation::default(),
            precision: Precision::default(),
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_frequency(mut self, frequency: Frequency) -> Self {
        self.frequency = frequency;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// `α = 2γ n0` for a Gaussian with `γ = 1/(2σ²)`.
    pub fn with_shift(self, sigma: f64, shift: usize) -> Self {
        self.with_alpha(shift as f64 / (sigma * sigma))
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn omega(&self) -> f64 {
        match self.frequency {
            Frequency::Order(p) => self.beta * p as f64,
            Frequency::Real(w) => w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_width == 0 {
            return invalid("half-width K must be at least 1");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be positive, got {}", self.beta));
        }
        if !self.omega().is_finite() {
            return invalid("frequency must be finite");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return invalid(format!("decay alpha must be non-negative, got {}", self.alpha));
        }
        Ok(())
    }

    fn z(&self) -> Complex64 {
        Complex64::from_polar(self.alpha.exp(), -self.omega())
    }

    /// `z^m`, snapped to exactly 1 when `α = 0` and `ωm` is a whole number of turns.
    fn z_pow(&self, m: usize) -> Complex64 {
        power(self.alpha, -self.omega(), m as f64)
    }

    fn w_pow(&self, m: usize) -> Complex64 {
        power(-self.alpha, self.omega(), m as f64)
    }
}

fn power(log_mag: f64, angle: f64, m: f64) -> Complex64 {
    let turns = angle * m / (2.0 * PI);
    if log_mag == 0.0 && (turns - turns.round()).abs() < 1e-12 {
        return Complex64::new(1.0, 0.0);
    }
    Complex64::from_polar((log_mag * m).exp(), angle * m)
}

/// `c[n]` and `s[n]` for `n` in `[first, first + c.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub first: isize,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
}

impl Components {
    fn from_a<T: Real>(first: isize, a: &[Complex<T>]) -> Self {
        let (c, s) = a
            .iter()
            .map(|v| {
                let v = widen(*v);
                (v.re, -v.im)
            })
            .unzip();
        Components { first, c, s }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `c[n] - i s[n]` at position `j` of the range.
    pub fn combined(&self, j: usize) -> Complex64 {
        Complex64::new(self.c[j], -self.s[j])
    }
}

/// Plain SFT components over `[0, N)`; `cfg.alpha` must be 0.
pub fn sft_components(sig: &Signal, cfg: &SftConfig) -> Result<Components> {
    if cfg.alpha != 0.0 {
        return invalid("plain SFT requires alpha = 0; use asft_components");
    }
    components_range(sig, cfg, 0, sig.len())
}

/// Attenuated components over `[0, N)`; `cfg.alpha` must be positive.
pub fn asft_components(sig: &Signal, cfg: &SftConfig) -> Result<Components> {
    if cfg.alpha <= 0.0 {
        return invalid("attenuated SFT requires alpha > 0");
    }
    components_range(sig, cfg, 0, sig.len())
}

/// Components over `[first, first + len)`, reading the boundary-extended signal.
pub fn components_range(sig: &Signal, cfg: &SftConfig, first: isize, len: usize) -> Result<Components> {
    cfg.validate()?;
    let ext = sig.extended_range(first - cfg.half_width as isize, len + 2 * cfg.half_width);
    Ok(match cfg.precision {
        Precision::Single => Components::from_a(first, &window_sums::<f32>(&ext, cfg, Workers::ALL)),
        Precision::Double => Components::from_a(first, &window_sums::<f64>(&ext, cfg, Workers::ALL)),
    })
}

/// Components for several configurations over the same range, one task per
/// configuration.
pub fn components_many(
    sig: &Signal,
    cfgs: &[SftConfig],
    first: isize,
    len: usize,
    workers: Workers,
) -> Result<Vec<Components>> {
    cfgs.iter().try_for_each(SftConfig::validate)?;
    let k = cfgs.iter().map(|c| c.half_width).max().unwrap_or(0);
    let ext = sig.extended_range(first - k as isize, len + 2 * k);
    let inner = if cfgs.len() > 1 { Workers::SEQUENTIAL } else { workers };
    Ok(exec::map(workers, cfgs, |cfg| {
        let off = k - cfg.half_width;
        let ext = &ext[off..off + len + 2 * cfg.half_width];
        match cfg.precision {
            Precision::Single => Components::from_a(first, &window_sums::<f32>(ext, cfg, inner)),
            Precision::Double => Components::from_a(first, &window_sums::<f64>(ext, cfg, inner)),
        }
    }))
}

/// `A[j] = Σ_{i=0}^{2K} ext[j+i] z^{K-i}` for `j` in `0..ext.len() - 2K`.
pub(crate) fn window_sums<T: Real>(ext: &[f64], cfg: &SftConfig, workers: Workers) -> Vec<Complex<T>> {
    let k = cfg.half_width;
    if ext.len() <= 2 * k {
        return Vec::new();
    }
    match (cfg.strategy, cfg.alpha > 0.0) {
        (Strategy::KernelIntegral, false) => kernel_integral(ext, cfg),
        (Strategy::KernelIntegral, true) => kernel_integral_rebased(ext, cfg),
        (Strategy::Recursive1, false) => truncate_forward(ext, cfg, &forward_first_order(ext, cfg)),
        (Strategy::Recursive1, true) => truncate_backward(ext, cfg, &backward_first_order(ext, cfg)),
        (Strategy::Recursive2, false) => truncate_forward(ext, cfg, &forward_second_order(ext, cfg)),
        (Strategy::Recursive2, true) => truncate_backward(ext, cfg, &backward_second_order(ext, cfg)),
        (Strategy::SlidingSum, _) => sliding_sum_window_sums(ext, cfg, SlidingSumVariant::Flat, workers),
    }
}

/// `U[m] = Σ_{i ≤ m} ext[i] e^{iωi}`; `A[j] = e^{-iω(K+j)} (U[j+2K] - U[j-1])`.
fn kernel_integral<T: Real>(ext: &[f64], cfg: &SftConfig) -> Vec<Complex<T>> {
    let u = prefix_sums::<T>(ext, cfg.omega());
    let k = cfg.half_width;
    let w = cfg.omega();
    (0..ext.len() - 2 * k)
        .map(|j| {
            let lower = if j == 0 { Complex::default() } else { u[j - 1] };
            cplx::<T>(Complex64::from_polar(1.0, -w * (k + j) as f64)) * (u[j + 2 * k] - lower)
        })
        .collect()
}

fn prefix_sums<T: Real>(ext: &[f64], omega: f64) -> Vec<Complex<T>> {
    let mut acc = Complex::<T>::default();
    ext.iter()
        .enumerate()
        .map(|(m, x)| {
            acc += cplx::<T>(Complex64::from_polar(*x, omega * m as f64));
            acc
        })
        .collect()
}

/// Attenuated kernel integral. `x[m] w^m` spans `e^{-α·len}`, so prefixes are
/// restarted every `2K + 1` samples with the block start as phase origin; a
/// window then straddles at most two blocks.
fn kernel_integral_rebased<T: Real>(ext: &[f64], cfg: &SftConfig) -> Vec<Complex<T>> {
    let k = cfg.half_width;
    let block = 2 * k + 1;
    let mut prefix = vec![Complex::<T>::default(); ext.len()];
    for (b, chunk) in prefix.chunks_mut(block).enumerate() {
        let base = b * block;
        let mut acc = Complex::<T>::default();
        for (i, slot) in chunk.iter_mut().enumerate() {
            acc += cplx::<T>(cfg.w_pow(i) * ext[base + i]);
            *slot = acc;
        }
    }
    let zk = cplx::<T>(cfg.z_pow(k));
    (0..ext.len() - 2 * k)
        .map(|j| {
            let base = j / block * block;
            let sum = if j == base {
                prefix[j + 2 * k]
            } else {
                let head = (prefix[base + block - 1] - prefix[j - 1]) * cplx::<T>(cfg.z_pow(j - base));
                let tail = prefix[j + 2 * k] * cplx::<T>(cfg.w_pow(base + block - j));
                head + tail
            };
            zk * sum
        })
        .collect()
}

/// `V[m] = z V[m-1] + ext[m]` from a zero state before `ext[0]`.
fn forward_first_order<T: Real>(ext: &[f64], cfg: &SftConfig) -> Vec<Complex<T>> {
    let z = cplx::<T>(cfg.z());
    let mut v = Complex::<T>::default();
    ext.iter()
        .map(|x| {
            v = v * z + T::of(*x);
            v
        })
        .collect()
}

/// `W[j] = ext[j] + w W[j+1]` from a zero state after the last sample.
fn backward_first_order<T: Real>(ext: &[f64], cfg: &SftConfig) -> Vec<Complex<T>> {
    let w = cplx::<T>(cfg.w_pow(1));
    let mut out = vec![Complex::<T>::default(); ext.len()];
    let mut acc = Complex::<T>::default();
    for (slot, x) in out.iter_mut().zip(ext).rev() {
        acc = acc * w + T::of(*x);
        *slot = acc;
    }
    out
}

/// Real recursion `R[m] = 2e^{α}cos ω R[m-1] - e^{2α} R[m-2] + ext[m]`,
/// then `V[m] = R[m] - z̄ R[m-1]`.
fn forward_second_order<T: Real>(ext: &[f64], cfg: &SftConfig) -> Vec<Complex<T>> {
    let z = cfg.z();
    let (a1, a2) = (T::of(2.0 * z.re), T::of(z.norm_sqr()));
    let zc = cplx::<T>(z.conj());
    let (mut r1, mut r2) = (T::zero(), T::zero());
    ext.iter()
        .map(|x| {
            let r = a1 * r1 - a2 * r2 + T::of(*x);
            let v = Complex::from(r) - zc * r1;
            r2 = r1;
            r1 = r;
            v
        })
        .collect()
}

/// Mirror of [`forward_second_order`] with the pole `w` running backward.
fn backward_second_order<T: Real>(ext: &[f64], cfg: &SftConfig) -> Vec<Complex<T>> {
    let w = cfg.w_pow(1);
    let (a1, a2) = (T::of(2.0 * w.re), T::of(w.norm_sqr()));
    let wc = cplx::<T>(w.conj());
    let (mut r1, mut r2) = (T::zero(), T::zero());
    let mut out = vec![Complex::<T>::default(); ext.len()];
    for (slot, x) in out.iter_mut().zip(ext).rev() {
        let r = a1 * r1 - a2 * r2 + T::of(*x);
        *slot = Complex::from(r) - wc * r1;
        r2 = r1;
        r1 = r;
    }
    out
}

fn truncate_forward<T: Real>(ext: &[f64], cfg: &SftConfig, v: &[Complex<T>]) -> Vec<Complex<T>> {
    let k = cfg.half_width;
    let z_neg_k = cplx::<T>(power(-cfg.alpha, cfg.omega(), k as f64));
    let z2k = cplx::<T>(cfg.z_pow(2 * k));
    let z2k1 = cplx::<T>(cfg.z_pow(2 * k + 1));
    (0..ext.len() - 2 * k)
        .map(|j| {
            let window = match cfg.truncation {
                // V_(2K)[j+2K] = V[j+2K] - z^{2K} V[j]; the sample at j re-enters.
                Truncation::TwoK => (v[j + 2 * k] - z2k * v[j]) + z2k * T::of(ext[j]),
                Truncation::TwoKPlusOne => {
                    let older = if j == 0 { Complex::default() } else { v[j - 1] };
                    v[j + 2 * k] - z2k1 * older
                }
            };
            z_neg_k * window
        })
        .collect()
}

fn truncate_backward<T: Real>(ext: &[f64], cfg: &SftConfig, w: &[Complex<T>]) -> Vec<Complex<T>> {
    let k = cfg.half_width;
    let zk = cplx::<T>(cfg.z_pow(k));
    let w2k = cplx::<T>(cfg.w_pow(2 * k));
    let w2k1 = cplx::<T>(cfg.w_pow(2 * k + 1));
    let at = |i: usize| w.get(i).copied().unwrap_or_default();
    (0..ext.len() - 2 * k)
        .map(|j| {
            let window = match cfg.truncation {
                Truncation::TwoK => (w[j] - w2k * at(j + 2 * k)) + w2k * T::of(ext[j + 2 * k]),
                Truncation::TwoKPlusOne => w[j] - w2k1 * at(j + 2 * k + 1),
            };
            zk * window
        })
        .collect()
}

/// Largest exponent `α·span` allowed inside one sliding-sum segment.
const MAX_SEGMENT_DECAY: f64 = 20.0;

/// Window sums of `f[m] = ext[m] w^{m - j0}` by the data-parallel sliding sum,
/// segment by segment so that `|w^{m-j0}|` stays within `e^{±20}`.
pub(crate) fn sliding_sum_window_sums<T: Real>(
    ext: &[f64],
    cfg: &SftConfig,
    variant: SlidingSumVariant,
    workers: Workers,
) -> Vec<Complex<T>> {
    let k = cfg.half_width;
    let out_len = ext.len() - 2 * k;
    let seg = if cfg.alpha > 0.0 {
        ((MAX_SEGMENT_DECAY / cfg.alpha) as usize).saturating_sub(2 * k).max(1)
    } else {
        out_len
    };
    let zk = cfg.z_pow(k);
    let mut out = Vec::with_capacity(out_len);
    let mut j0 = 0;
    while j0 < out_len {
        let n = seg.min(out_len - j0);
        let f: Vec<Complex<T>> = ext[j0..j0 + n + 2 * k]
            .iter()
            .enumerate()
            .map(|(i, x)| cplx::<T>(cfg.w_pow(i) * *x))
            .collect();
        let h = sliding_sum::sliding_sum_with(&f, 2 * k + 1, variant, workers)
            .expect("window length is within the segment");
        out.extend(h.iter().enumerate().map(|(i, v)| cplx::<T>(zk * cfg.z_pow(i)) * *v));
        j0 += n;
    }
    out
}

/// Running and windowed state of one strategy over the extended signal
/// `ext[i] = x[first - K + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SftState {
    pub first: isize,
    pub strategy: Strategy,
    /// Unwindowed state over the extended signal: `u` for the kernel
    /// integral, `v` (forward) or `ṽ` (backward, attenuated) for the
    /// recursive filters.
    pub running: Vec<Complex64>,
    /// Windowed state per output sample, by the in-window recurrence that
    /// adds the entering and subtracts the leaving sample.
    pub windowed: Vec<Complex64>,
    /// The same windowed state as a difference of running values.
    pub windowed_from_running: Vec<Complex64>,
}

/// Windowed state sequences over `[0, N)`.
///
/// Kernel integral (`α = 0`): `u_(2K+1)[j] = Σ_{m=j}^{j+2K} ext[m] e^{iωm}`.
/// Recursive, `α = 0`: `v_(2K)[j+2K] = Σ_{m=j+1}^{j+2K} ext[m] z^{j+2K-m}`.
/// Recursive or kernel integral, `α > 0`: `ṽ_(2K)[j] = Σ_{m=j}^{j+2K-1} ext[m] w^{m-j}`.
pub fn sliding_window_state(sig: &Signal, cfg: &SftConfig) -> Result<SftState> {
    cfg.validate()?;
    let k = cfg.half_width;
    let ext = sig.extended_range(-(k as isize), sig.len() + 2 * k);
    Ok(match cfg.precision {
        Precision::Single => window_state::<f32>(&ext, cfg),
        Precision::Double => window_state::<f64>(&ext, cfg),
    })
}

fn window_state<T: Real>(ext: &[f64], cfg: &SftConfig) -> SftState {
    let k = cfg.half_width;
    let out_len = ext.len() - 2 * k;
    let omega = cfg.omega();
    let widen_all = |v: &[Complex<T>]| v.iter().map(|c| widen(*c)).collect::<Vec<_>>();
    let (running, windowed, from_running) = if cfg.alpha > 0.0 {
        let running = match cfg.strategy {
            Strategy::Recursive2 => backward_second_order::<T>(ext, cfg),
            _ => backward_first_order::<T>(ext, cfg),
        };
        let w = cplx::<T>(cfg.w_pow(1));
        let w2k = cplx::<T>(cfg.w_pow(2 * k));
        let mut windowed = vec![Complex::<T>::default(); out_len];
        let mut acc: Complex<T> = (0..2 * k).rev().fold(Complex::default(), |a, m| a * w + T::of(ext[out_len - 1 + m]));
        windowed[out_len - 1] = acc;
        for j in (0..out_len - 1).rev() {
            acc = acc * w + T::of(ext[j]) - w2k * T::of(ext[j + 2 * k]);
            windowed[j] = acc;
        }
        let at = |i: usize| running.get(i).copied().unwrap_or_default();
        let from: Vec<_> = (0..out_len).map(|j| running[j] - w2k * at(j + 2 * k)).collect();
        (widen_all(&running), widen_all(&windowed), widen_all(&from))
    } else if cfg.strategy == Strategy::KernelIntegral || cfg.strategy == Strategy::SlidingSum {
        let running = prefix_sums::<T>(ext, omega);
        let f = |m: usize| cplx::<T>(Complex64::from_polar(ext[m], omega * m as f64));
        let mut acc = (0..=2 * k).fold(Complex::<T>::default(), |a, m| a + f(m));
        let mut windowed = vec![acc];
        for j in 1..out_len {
            acc = acc + f(j + 2 * k) - f(j - 1);
            windowed.push(acc);
        }
        let from: Vec<_> = (0..out_len)
            .map(|j| running[j + 2 * k] - if j == 0 { Complex::default() } else { running[j - 1] })
            .collect();
        (widen_all(&running), widen_all(&windowed), widen_all(&from))
    } else {
        let running = match cfg.strategy {
            Strategy::Recursive2 => forward_second_order::<T>(ext, cfg),
            _ => forward_first_order::<T>(ext, cfg),
        };
        let z = cplx::<T>(cfg.z());
        let z2k = cplx::<T>(cfg.z_pow(2 * k));
        let mut v = Complex::<T>::default();
        let mut all = Vec::with_capacity(ext.len());
        for (m, x) in ext.iter().enumerate() {
            let leaving = if m >= 2 * k { T::of(ext[m - 2 * k]) } else { T::zero() };
            v = v * z + T::of(*x) - z2k * leaving;
            all.push(v);
        }
        let windowed = all[2 * k..].to_vec();
        let from: Vec<_> = (0..out_len).map(|j| running[j + 2 * k] - z2k * running[j]).collect();
        (widen_all(&running), widen_all(&windowed), widen_all(&from))
    };
    SftState { first: 0, strategy: cfg.strategy, running, windowed, windowed_from_running: from_running }
}

/// State `(Re v, -Im v)` of the two-multiplier-pair FIR block with
/// `A1 = A4 = cos ω`, `-A2 = A3 = sin ω` and feed-forward `B = -1` on the
/// sample `2K` steps back, for each `m` of the extended signal.
///
/// Requires a plain SFT whose frequency completes whole turns over `2K`.
pub fn fir_block_state(sig: &Signal, cfg: &SftConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let k = cfg.half_width;
    if cfg.alpha != 0.0 || cfg.z_pow(2 * k) != Complex64::new(1.0, 0.0) {
        return invalid("the FIR block needs alpha = 0 and a frequency with z^{2K} = 1");
    }
    let ext = sig.extended_range(-(k as isize), sig.len() + 2 * k);
    let z = cfg.z();
    let (a1, a2, a3, a4, b) = (z.re, z.im, -z.im, z.re, -1.0);
    let (mut y1, mut y2) = (0.0f64, 0.0f64);
    Ok(ext
        .iter()
        .enumerate()
        .map(|(m, x)| {
            let leaving = if m >= 2 * k { ext[m - 2 * k] } else { 0.0 };
            let n1 = a1 * y1 + a2 * y2 + x + b * leaving;
            let n2 = a3 * y1 + a4 * y2;
            y1 = n1;
            y2 = n2;
            (y1, y2)
        })
        .collect())
}

/// Recursive state over the extended signal: `v` (forward) or `ṽ` (backward).
pub fn running_state(sig: &Signal, cfg: &SftConfig) -> Result<Vec<Complex64>> {
    Ok(sliding_window_state(sig, cfg)?.running)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Largest `|state|` in single precision: `v`/`ṽ` for recursive filters,
    /// `u` for the kernel integral.
    pub max_state_magnitude: f64,
    /// `max|x| / (1 - e^{-α})` for attenuated transforms.
    pub state_bound: Option<f64>,
    /// `max_n |A_single - A_double| / max_n |A_double|`.
    pub max_component_error: f64,
    /// Per-sample `|A_single - A_double| / max_n |A_double|`.
    pub error_profile: Vec<f64>,
}

/// Runs `cfg` in single and double precision on the same signal.
pub fn stability_probe(sig: &Signal, cfg: &SftConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let k = cfg.half_width;
    let ext = sig.extended_range(-(k as isize), sig.len() + 2 * k);
    let single = window_sums::<f32>(&ext, cfg, Workers::ALL);
    let double = window_sums::<f64>(&ext, cfg, Workers::ALL);
    let scale = double.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let error_profile: Vec<f64> = single
        .iter()
        .zip(&double)
        .map(|(s, d)| (widen(*s) - d).norm() / scale)
        .collect();
    let max_component_error = error_profile.iter().fold(0.0f64, |m, v| m.max(*v));
    let state: Vec<Complex<f32>> = match (cfg.strategy, cfg.alpha > 0.0) {
        (Strategy::Recursive1, false) => forward_first_order(&ext, cfg),
        (Strategy::Recursive2, false) => forward_second_order(&ext, cfg),
        (Strategy::Recursive2, true) => backward_second_order(&ext, cfg),
        (_, true) => backward_first_order(&ext, cfg),
        (_, false) => prefix_sums(&ext, cfg.omega()),
    };
    let max_state_magnitude = state.iter().fold(0.0f64, |m, v| m.max(widen(*v).norm()));
    let state_bound = (cfg.alpha > 0.0).then(|| sig.max_abs() / (1.0 - (-cfg.alpha).exp()));
    Ok(StabilityReport { max_state_magnitude, state_bound, max_component_error, error_profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{make_test_signal, BoundaryPolicy, TestSignal};

    fn brute(sig: &Signal, cfg: &SftConfig) -> Vec<Complex64> {
        let k = cfg.half_width as isize;
        (0..sig.len() as isize)
            .map(|n| {
                (-k..=k)
                    .map(|kk| {
                        let kk_f = kk as f64;
                        Complex64::from_polar((cfg.alpha * kk_f).exp(), -cfg.omega() * kk_f) * sig.extended_sample(n - kk)
                    })
                    .sum()
            })
            .collect()
    }

    fn max_err(a: &Components, b: &[Complex64]) -> f64 {
        (0..a.len()).map(|j| (a.combined(j) - b[j]).norm()).fold(0.0, f64::max)
    }

    const STRATEGIES: [Strategy; 4] =
        [Strategy::KernelIntegral, Strategy::Recursive1, Strategy::Recursive2, Strategy::SlidingSum];

    #[test]
    fn constant_signal_sums() {
        let sig = make_test_signal(TestSignal::Constant, 40, 0).unwrap();
        for strategy in STRATEGIES {
            let c0 = sft_components(&sig, &SftConfig::new(6, 0).with_strategy(strategy)).unwrap();
            for j in 0..40 {
                assert!((c0.c[j] - 13.0).abs() < 1e-12);
                assert!(c0.s[j].abs() < 1e-12);
            }
            let cfg = SftConfig::new(6, 2).with_strategy(strategy);
            let expect: f64 = (-6..=6).map(|k| (cfg.omega() * k as f64).cos()).sum();
            let c2 = sft_components(&sig, &cfg).unwrap();
            for j in 0..40 {
                assert!((c2.c[j] - expect).abs() < 1e-12, "{strategy}");
                assert!(c2.s[j].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strategies_match_brute_force() {
        let sig = make_test_signal(TestSignal::SeededNoise, 64, 7).unwrap();
        for alpha in [0.0, 0.05] {
            for p in [0, 1, 3, 8] {
                for trunc in [Truncation::TwoK, Truncation::TwoKPlusOne] {
                    for strategy in STRATEGIES {
                        let cfg = SftConfig::new(8, p).with_alpha(alpha).with_strategy(strategy).with_truncation(trunc);
                        let want = brute(&sig, &cfg);
                        let got = components_range(&sig, &cfg, 0, 64).unwrap();
                        assert!(max_err(&got, &want) < 1e-10, "{strategy} p={p} alpha={alpha}");
                        let single = components_range(&sig, &cfg.with_precision(Precision::Single), 0, 64).unwrap();
                        let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
                        assert!(max_err(&single, &want) < 1e-3 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn real_frequency_and_tuned_beta() {
        let sig = make_test_signal(TestSignal::Chirp, 100, 0).unwrap();
        for strategy in STRATEGIES {
            for alpha in [0.0, 0.02] {
                let cfg = SftConfig::new(10, 0)
                    .with_frequency(Frequency::Real(0.731))
                    .with_alpha(alpha)
                    .with_strategy(strategy);
                assert!(max_err(&components_range(&sig, &cfg, 0, 100).unwrap(), &brute(&sig, &cfg)) < 1e-10);
                let tuned = SftConfig::new(10, 3).with_beta(0.87 * PI / 10.0).with_alpha(alpha).with_strategy(strategy);
                assert!(max_err(&components_range(&sig, &tuned, 0, 100).unwrap(), &brute(&sig, &tuned)) < 1e-10);
            }
        }
    }

    #[test]
    fn real_frequency_reproduces_integer_order() {
        let sig = make_test_signal(TestSignal::SeededNoise, 50, 2).unwrap();
        let cfg = SftConfig::new(7, 3);
        let a = sft_components(&sig, &cfg).unwrap();
        let b = sft_components(&sig, &cfg.with_frequency(Frequency::Real(cfg.omega()))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn attenuated_impulse_response() {
        let sig = Signal::new(
            (0..41).map(|i| if i == 20 { 1.0 } else { 0.0 }).collect(),
            BoundaryPolicy::Zero,
        )
        .unwrap();
        let cfg = SftConfig::new(6, 2).with_alpha(0.1).with_strategy(Strategy::Recursive1);
        let got = asft_components(&sig, &cfg).unwrap();
        for n in 0..41isize {
            let d = n - 20;
            let expect = if d.abs() <= 6 {
                Complex64::from_polar((0.1 * d as f64).exp(), -cfg.omega() * d as f64)
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((got.combined(n as usize) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn tiny_alpha_is_continuous() {
        let sig = make_test_signal(TestSignal::SeededNoise, 80, 3).unwrap();
        let plain = sft_components(&sig, &SftConfig::new(9, 2)).unwrap();
        for strategy in STRATEGIES {
            let att = asft_components(&sig, &SftConfig::new(9, 2).with_alpha(1e-8).with_strategy(strategy)).unwrap();
            let scale = plain.c.iter().chain(&plain.s).fold(0.0f64, |m, v| m.max(v.abs()));
            for j in 0..80 {
                assert!((att.combined(j) - plain.combined(j)).norm() < 1e-5 * scale);
            }
        }
    }

    #[test]
    fn mode_checks() {
        let sig = make_test_signal(TestSignal::Constant, 8, 0).unwrap();
        assert!(asft_components(&sig, &SftConfig::new(2, 1)).is_err());
        assert!(sft_components(&sig, &SftConfig::new(2, 1).with_alpha(0.1)).is_err());
        assert!(sft_components(&sig, &SftConfig::new(2, 1).with_alpha(-0.1)).is_err());
        assert!(sft_components(&sig, &SftConfig::new(0, 1)).is_err());
    }

    #[test]
    fn windowed_recurrences_match_prefix_differences() {
        let sig = make_test_signal(TestSignal::SeededNoise, 128, 11).unwrap();
        for alpha in [0.0, 0.03] {
            for strategy in [Strategy::KernelIntegral, Strategy::Recursive1, Strategy::Recursive2] {
                let st = sliding_window_state(&sig, &SftConfig::new(10, 4).with_alpha(alpha).with_strategy(strategy)).unwrap();
                assert_eq!(st.windowed.len(), 128);
                for (a, b) in st.windowed.iter().zip(&st.windowed_from_running) {
                    assert!((a - b).norm() < 1e-10, "{strategy} alpha={alpha}");
                }
            }
        }
        let zero = Signal::from_samples(vec![0.0; 30]).unwrap();
        let st = sliding_window_state(&zero, &SftConfig::new(4, 1).with_strategy(Strategy::Recursive1)).unwrap();
        assert!(st.running.iter().chain(&st.windowed).all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn fir_block_reproduces_first_order_window() {
        let sig = make_test_signal(TestSignal::SeededNoise, 90, 5).unwrap();
        let cfg = SftConfig::new(8, 3).with_strategy(Strategy::Recursive1);
        let block = fir_block_state(&sig, &cfg).unwrap();
        let st = sliding_window_state(&sig, &cfg).unwrap();
        for (j, v) in st.windowed.iter().enumerate() {
            let (y1, y2) = block[j + 16];
            assert_eq!((v.re, -v.im), (y1, y2));
        }
        assert!(fir_block_state(&sig, &cfg.with_beta(0.3)).is_err());
    }

    #[test]
    fn attenuated_state_is_bounded() {
        let sig = make_test_signal(TestSignal::SeededNoise, 20_000, 9).unwrap();
        for strategy in [Strategy::Recursive1, Strategy::Recursive2] {
            let cfg = SftConfig::new(96, 5).with_shift(32.0, 4).with_strategy(strategy);
            let r = stability_probe(&sig, &cfg).unwrap();
            if strategy == Strategy::Recursive1 {
                assert!(r.max_state_magnitude <= r.state_bound.unwrap());
            }
            assert!(r.max_component_error < 1e-4);
        }
    }

    #[test]
    fn linearity_and_shift_covariance() {
        let x = make_test_signal(TestSignal::SeededNoise, 60, 1).unwrap().with_boundary(BoundaryPolicy::Zero);
        let y = make_test_signal(TestSignal::Chirp, 60, 0).unwrap().with_boundary(BoundaryPolicy::Zero);
        let mix = Signal::new(
            x.samples().iter().zip(y.samples()).map(|(a, b)| 2.0 * a - 0.5 * b).collect(),
            BoundaryPolicy::Zero,
        )
        .unwrap();
        let mut shifted = vec![0.0];
        shifted.extend_from_slice(&x.samples()[..59]);
        let shifted = Signal::new(shifted, BoundaryPolicy::Zero).unwrap();
        for strategy in STRATEGIES {
            let cfg = SftConfig::new(5, 2).with_strategy(strategy);
            let (cx, cy, cm) = (
                sft_components(&x, &cfg).unwrap(),
                sft_components(&y, &cfg).unwrap(),
                sft_components(&mix, &cfg).unwrap(),
            );
            let cs = sft_components(&shifted, &cfg).unwrap();
            for j in 0..60 {
                assert!((cm.combined(j) - (cx.combined(j) * 2.0 - cy.combined(j) * 0.5)).norm() < 1e-12);
            }
            for j in 6..54 {
                assert!((cs.combined(j + 1) - cx.combined(j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn many_configs_match_single_calls() {
        let sig = make_test_signal(TestSignal::SeededNoise, 70, 4).unwrap();
        let cfgs: Vec<SftConfig> = (0..5).map(|p| SftConfig::new(6 + p as usize, p)).collect();
        for workers in [Workers(1), Workers(3)] {
            let many = components_many(&sig, &cfgs, -3, 75, workers).unwrap();
            for (cfg, got) in cfgs.iter().zip(&many) {
                assert_eq!(*got, components_range(&sig, cfg, -3, 75).unwrap());
            }
        }
    }
}
