//! Analytic Gaussian, Gaussian-derivative and Morlet kernels, and the
//! brute-force truncated convolution used as ground truth.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{invalid, Result};
use crate::exec::{self, Workers};
use crate::signal::Signal;

/// Default half-window for a smoothing size: `ceil(3σ)`.
pub fn default_half_width(sigma: f64) -> usize {
    ((3.0 * sigma).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    sigma: f64,
    gamma: f64,
    half_width: usize,
}

impl GaussianParams {
    pub fn new(sigma: f64, half_width: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {sigma}"));
        }
        if half_width == 0 {
            return invalid("half-width K must be at least 1");
        }
        Ok(GaussianParams { sigma, gamma: 1.0 / (2.0 * sigma * sigma), half_width })
    }

    /// `K = ceil(3σ)`.
    pub fn with_default_width(sigma: f64) -> Result<Self> {
        Self::new(sigma, default_half_width(sigma))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn gauss(&self, n: f64) -> f64 {
        (self.gamma / PI).sqrt() * (-self.gamma * n * n).exp()
    }

    pub fn gauss_d(&self, n: f64) -> f64 {
        -2.0 * self.gamma * n * self.gauss(n)
    }

    pub fn gauss_dd(&self, n: f64) -> f64 {
        let g = self.gamma;
        (4.0 * g * g * n * n - 2.0 * g) * self.gauss(n)
    }

    pub fn eval(&self, order: GaussOrder, n: f64) -> f64 {
        match order {
            GaussOrder::Smooth => self.gauss(n),
            GaussOrder::First => self.gauss_d(n),
            GaussOrder::Second => self.gauss_dd(n),
        }
    }

    /// The kernel sampled on `[-K, K]`.
    pub fn sampled(&self, order: GaussOrder) -> SampledKernel<f64> {
        let k = self.half_width as isize;
        SampledKernel::from_fn(-k, k, |n| self.eval(order, n as f64))
    }
}

/// Derivative order of a Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GaussOrder {
    Smooth,
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorletParams {
    sigma: f64,
    xi: f64,
    c_xi: f64,
    kappa_xi: f64,
    half_width: usize,
}

impl MorletParams {
    pub fn new(sigma: f64, xi: f64, half_width: usize) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return invalid(format!("xi must be positive, got {xi}"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {sigma}"));
        }
        if half_width == 0 {
            return invalid("half-width K must be at least 1");
        }
        let xi2 = xi * xi;
        let c_xi = (1.0 + (-xi2).exp() - 2.0 * (-0.75 * xi2).exp()).powf(-0.5);
        let kappa_xi = (-0.5 * xi2).exp();
        Ok(MorletParams { sigma, xi, c_xi, kappa_xi, half_width })
    }

    pub fn with_default_width(sigma: f64, xi: f64) -> Result<Self> {
        Self::new(sigma, xi, default_half_width(sigma))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn c_xi(&self) -> f64 {
        self.c_xi
    }

    pub fn kappa_xi(&self) -> f64 {
        self.kappa_xi
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn with_half_width(mut self, half_width: usize) -> Self {
        self.half_width = half_width.max(1);
        self
    }

    /// Carrier frequency in radians per sample, `ξ/σ`.
    pub fn carrier(&self) -> f64 {
        self.xi / self.sigma
    }

    /// Amplitude in front of the envelope, `C_ξ / (π^{1/4} √σ)`.
    pub fn amplitude(&self) -> f64 {
        self.c_xi / (PI.powf(0.25) * self.sigma.sqrt())
    }

    /// `exp(-n²/(2σ²))`.
    pub fn envelope(&self, n: f64) -> f64 {
        (-n * n / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn morlet(&self, n: f64) -> Complex64 {
        let carrier = Complex64::from_polar(1.0, self.carrier() * n);
        (carrier - self.kappa_xi) * (self.amplitude() * self.envelope(n))
    }

    pub fn sampled(&self) -> SampledKernel<Complex64> {
        let k = self.half_width as isize;
        SampledKernel::from_fn(-k, k, |n| self.morlet(n as f64))
    }
}

/// Kernel taps on the signed offset range `[first, first + taps.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel<T> {
    pub first: isize,
    pub taps: Vec<T>,
}

impl<T> SampledKernel<T> {
    pub fn from_fn(first: isize, last: isize, f: impl Fn(isize) -> T) -> Self {
        SampledKernel { first, taps: (first..=last).map(f).collect() }
    }

    pub fn last(&self) -> isize {
        self.first + self.taps.len() as isize - 1
    }

    /// Tap at offset `k`, `None` outside the support.
    pub fn at(&self, k: isize) -> Option<&T> {
        usize::try_from(k - self.first).ok().and_then(|i| self.taps.get(i))
    }
}

impl<T: Copy + Zero> SampledKernel<T> {
    /// Taps on `[lo, hi]`, zero outside the stored support.
    pub fn padded(&self, lo: isize, hi: isize) -> Vec<T> {
        (lo..=hi).map(|k| self.at(k).copied().unwrap_or_else(T::zero)).collect()
    }
}

/// Element type a kernel can have: real or complex.
pub trait Tap: Copy + Send + Sync + Zero + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T> Tap for T where T: Copy + Send + Sync + Zero + Add<Output = T> + Mul<f64, Output = T> {}

/// `out[n] = Σ_k kernel[k] x[n-k]` over the kernel support, boundary-extended.
///
/// O(N·taps); this is the reference every fast transform is checked against.
pub fn truncated_convolution<T: Tap>(sig: &Signal, kernel: &SampledKernel<T>) -> Vec<T> {
    truncated_convolution_with(sig, kernel, Workers::ALL)
}

pub fn truncated_convolution_with<T: Tap>(
    sig: &Signal,
    kernel: &SampledKernel<T>,
    workers: Workers,
) -> Vec<T> {
    let n = sig.len();
    let width = kernel.taps.len();
    // ext[i] = x[i - last]; out[n] = Σ_i rev[i] * ext[n + i]
    let ext = sig.extended_range(-kernel.last(), n + width - 1);
    let rev: Vec<T> = kernel.taps.iter().rev().copied().collect();
    let mut out = vec![T::zero(); n];
    let chunk = (exec::chunk_len(n) / width.max(1)).max(64);
    exec::fill_chunks(workers, &mut out, chunk, |start, c| {
        for (j, o) in c.iter_mut().enumerate() {
            *o = dot(&rev, &ext[start + j..start + j + width]);
        }
    });
    out
}

fn dot<T: Tap>(taps: &[T], xs: &[f64]) -> T {
    let mut acc = [T::zero(); 4];
    let mut tc = taps.chunks_exact(4);
    let mut xc = xs.chunks_exact(4);
    for (t, x) in (&mut tc).zip(&mut xc) {
        acc[0] = acc[0] + t[0] * x[0];
        acc[1] = acc[1] + t[1] * x[1];
        acc[2] = acc[2] + t[2] * x[2];
        acc[3] = acc[3] + t[3] * x[3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (t, x) in tc.remainder().iter().zip(xc.remainder()) {
        sum = sum + *t * *x;
    }
    sum
}
