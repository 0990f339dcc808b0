//! Gaussian smoothing, Gaussian-derivative smoothing and the Morlet wavelet
//! transform assembled from sliding Fourier components.
//!
//! Every transform is a [`Reconstruction`]: a prefactor, a decay α, an output
//! shift `n0` and a list of weighted components,
//!
//! ```text
//! out[n] = pref · Σ_t (wc_t c_t[n + n0] + ws_t s_t[n + n0])
//! ```
//!
//! which is a convolution with the effective kernel
//! `pref · e^{αk} Σ_t (wc_t cos ω_t k + ws_t sin ω_t k)` placed at `k - n0`.
//! With `α = 2γ n0` the factor `e^{αk}` completes the square of the
//! Gaussian, so a Gaussian fitted around zero yields its own translate:
//! `e^{-α²/4γ} e^{αk} G[k] = G[k - n0]`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::engine::{components_many, Frequency, SftConfig, Strategy, Truncation};
use crate::error::{invalid, Error, Result};
use crate::eval::relative_rmse;
use crate::exec::Workers;
use crate::fourier::{
    first_order_scan_limit, fit_gauss, fit_morlet_direct, fit_morlet_multiply, select_optimal_ps, tune_beta, CoefficientSet, Coefficients,
    HarmonicGrid,
};
use crate::kernels::{default_half_width, truncated_convolution_with, GaussOrder, GaussianParams, MorletParams, SampledKernel};
use crate::signal::{Precision, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Gauss,
    GaussD,
    GaussDD,
    MorletDirect,
    MorletMultiply,
}

impl TransformKind {
    pub fn is_morlet(self) -> bool {
        matches!(self, TransformKind::MorletDirect | TransformKind::MorletMultiply)
    }

    fn gauss_order(self) -> Option<GaussOrder> {
        match self {
            TransformKind::Gauss => Some(GaussOrder::Smooth),
            TransformKind::GaussD => Some(GaussOrder::First),
            TransformKind::GaussDD => Some(GaussOrder::Second),
            _ => None,
        }
    }
}

impl From<GaussOrder> for TransformKind {
    fn from(order: GaussOrder) -> Self {
        match order {
            GaussOrder::Smooth => TransformKind::Gauss,
            GaussOrder::First => TransformKind::GaussD,
            GaussOrder::Second => TransformKind::GaussDD,
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformKind::Gauss => "gauss",
            TransformKind::GaussD => "gauss-d",
            TransformKind::GaussDD => "gauss-dd",
            TransformKind::MorletDirect => "morlet-direct",
            TransformKind::MorletMultiply => "morlet-multiply",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sft,
    /// Attenuated SFT read `shift` samples ahead.
    Asft { shift: usize },
    /// Brute-force convolution with the kernel truncated to `[-3σ, 3σ]`.
    Truncated,
}

impl Method {
    pub fn shift(self) -> usize {
        match self {
            Method::Asft { shift } => shift,
            _ => 0,
        }
    }
}

/// How β is chosen when a spec is built.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BetaChoice {
    /// Tuned for Gaussian kinds, `π/K` for Morlet kinds.
    #[default]
    Auto,
    /// `π/K`.
    Base,
    /// Minimizes the plain-Gaussian error at the same `P`.
    Tuned,
    Fixed(f64),
}

/// One weighted component of a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub frequency: Frequency,
    pub wc: Complex64,
    pub ws: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub prefactor: f64,
    pub alpha: f64,
    pub shift: usize,
    pub half_width: usize,
    pub beta: f64,
    pub terms: Vec<Term>,
}

impl Reconstruction {
    fn omega(&self, f: Frequency) -> f64 {
        match f {
            Frequency::Order(p) => self.beta * p as f64,
            Frequency::Real(w) => w,
        }
    }

    /// Effective kernel on `[-K - n0, K - n0]`.
    pub fn effective_kernel(&self) -> SampledKernel<Complex64> {
        let k = self.half_width as isize;
        let n0 = self.shift as isize;
        SampledKernel::from_fn(-k - n0, k - n0, |kp| {
            let kk = (kp + n0) as f64;
            let series: Complex64 = self
                .terms
                .iter()
                .map(|t| {
                    let (s, c) = (self.omega(t.frequency) * kk).sin_cos();
                    t.wc * c + t.ws * s
                })
                .sum();
            series * (self.prefactor * (self.alpha * kk).exp())
        })
    }

    fn configs(&self, strategy: Strategy, truncation: Truncation, precision: Precision) -> Vec<SftConfig> {
        self.terms
            .iter()
            .map(|t| SftConfig {
                half_width: self.half_width,
                beta: self.beta,
                frequency: t.frequency,
                alpha: self.alpha,
                strategy,
                truncation,
                precision,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub method: Method,
    pub gaussian: GaussianParams,
    pub morlet: Option<MorletParams>,
    /// Gaussian kinds: `[a]`, `[b]` or `[d]` for SFT; attenuated derivatives
    /// also carry the lower orders (`[a, b]`, `[a, b, d]`). Morlet kinds: one set.
    pub coeffs: Vec<CoefficientSet>,
    pub strategy: Strategy,
    pub truncation: Truncation,
    pub precision: Precision,
    pub abbreviation: String,
}

fn resolve_beta(choice: BetaChoice, params: &GaussianParams, order: u32, gaussian: bool) -> Result<f64> {
    let base = HarmonicGrid::default_beta(params.half_width());
    match choice {
        BetaChoice::Auto if gaussian => Ok(tune_beta(params, order.max(1))?.0),
        BetaChoice::Auto | BetaChoice::Base => Ok(base),
        BetaChoice::Tuned => Ok(tune_beta(params, order.max(1))?.0),
        BetaChoice::Fixed(b) => Ok(b),
    }
}

impl TransformSpec {
    /// Gaussian (or derivative) smoothing with orders up to `P`.
    /// `shift > 0` selects the attenuated transform with `α = 2γ·shift`.
    pub fn gaussian(
        order: GaussOrder,
        sigma: f64,
        half_width: Option<usize>,
        max_order: u32,
        beta: BetaChoice,
        shift: usize,
    ) -> Result<Self> {
        if max_order < 1 {
            return invalid("P must be at least 1");
        }
        let params = GaussianParams::new(sigma, half_width.unwrap_or_else(|| default_half_width(sigma)))?;
        if shift as f64 > sigma / 4.0 {
            return invalid(format!("shift n0 = {shift} exceeds sigma/4 = {}", sigma / 4.0));
        }
        let beta = resolve_beta(beta, &params, max_order, true)?;
        let wanted: &[GaussOrder] = match (order, shift) {
            (o, 0) => match o {
                GaussOrder::Smooth => &[GaussOrder::Smooth],
                GaussOrder::First => &[GaussOrder::First],
                GaussOrder::Second => &[GaussOrder::Second],
            },
            (GaussOrder::Smooth, _) => &[GaussOrder::Smooth],
            (GaussOrder::First, _) => &[GaussOrder::Smooth, GaussOrder::First],
            (GaussOrder::Second, _) => &[GaussOrder::Smooth, GaussOrder::First, GaussOrder::Second],
        };
        let coeffs = wanted
            .iter()
            .map(|o| fit_gauss(&params, *o, max_order, beta))
            .collect::<Result<Vec<_>>>()?;
        let method = if shift > 0 { Method::Asft { shift } } else { Method::Sft };
        Ok(TransformSpec {
            kind: order.into(),
            method,
            gaussian: params,
            morlet: None,
            coeffs,
            strategy: Strategy::default(),
            truncation: Truncation::default(),
            precision: Precision::default(),
            abbreviation: abbreviation('G', 'D', shift, max_order),
        })
    }

    /// Direct Morlet fit with `P_D` orders starting at `P_S` (scanned when `None`).
    pub fn morlet_direct(params: MorletParams, first_order: Option<u32>, order_count: u32, beta: BetaChoice, shift: usize) -> Result<Self> {
        let gaussian = GaussianParams::new(params.sigma(), params.half_width())?;
        let beta = resolve_beta(beta, &gaussian, order_count, false)?;
        let ps = match first_order {
            Some(ps) => ps,
            None if shift == 0 => select_optimal_ps(&params, order_count)?.0,
            None => {
                // The shifted target has other even/odd content, so scan on the shifted kernel itself.
                let mut best: Option<(f64, Self)> = None;
                for ps in 0..=first_order_scan_limit(&params, order_count) {
                    let spec = match Self::morlet_direct(params, Some(ps), order_count, BetaChoice::Fixed(beta), shift) {
                        Ok(s) => s,
                        Err(Error::FitDegenerate { .. }) => continue,
                        Err(e) => return Err(e),
                    };
                    let err = spec.kernel_rmse()?;
                    if best.as_ref().is_none_or(|(e, _)| err < *e) {
                        best = Some((err, spec));
                    }
                }
                return best.map(|(_, s)| s).ok_or_else(|| Error::InvalidArgument("no admissible P_S".into()));
            }
        };
        let set = fit_morlet_direct(&params, ps, order_count, beta, shift)?;
        Ok(TransformSpec {
            kind: TransformKind::MorletDirect,
            method: if shift > 0 { Method::Asft { shift } } else { Method::Sft },
            gaussian,
            morlet: Some(params),
            coeffs: vec![set],
            strategy: Strategy::default(),
            truncation: Truncation::default(),
            precision: Precision::default(),
            abbreviation: abbreviation('M', 'D', shift, order_count),
        })
    }

    /// Multiplication method with a Gaussian-envelope fit of orders `0..=P_M`.
    pub fn morlet_multiply(params: MorletParams, max_order: u32, beta: BetaChoice, shift: usize) -> Result<Self> {
        let gaussian = GaussianParams::new(params.sigma(), params.half_width())?;
        let beta = resolve_beta(beta, &gaussian, max_order, false)?;
        let set = fit_morlet_multiply(&params, max_order, beta)?;
        Ok(TransformSpec {
            kind: TransformKind::MorletMultiply,
            method: if shift > 0 { Method::Asft { shift } } else { Method::Sft },
            gaussian,
            morlet: Some(params),
            coeffs: vec![set],
            strategy: Strategy::default(),
            truncation: Truncation::default(),
            precision: Precision::default(),
            abbreviation: abbreviation('M', 'M', shift, max_order),
        })
    }

    /// Brute-force convolution with the kernel truncated to `[-ceil(3σ), ceil(3σ)]`.
    pub fn truncated(kind: TransformKind, sigma: f64, xi: Option<f64>) -> Result<Self> {
        let gaussian = GaussianParams::with_default_width(sigma)?;
        let morlet = if kind.is_morlet() {
            let xi = xi.ok_or_else(|| Error::InvalidArgument("Morlet transforms need xi".into()))?;
            Some(MorletParams::with_default_width(sigma, xi)?)
        } else {
            None
        };
        Ok(TransformSpec {
            kind,
            method: Method::Truncated,
            gaussian,
            morlet,
            coeffs: Vec::new(),
            strategy: Strategy::default(),
            truncation: Truncation::default(),
            precision: Precision::default(),
            abbreviation: if kind.is_morlet() { "MCT3".into() } else { "GCT3".into() },
        })
    }

    /// Builds a spec from a filter name: `GCT3`, `MCT3`, or
    /// `(G|M)(D|M)[S<n0>]P<order>` such as `GDP6`, `MDS5P7`, `MMP3`.
    ///
    /// For `GD…` names `opts.derivative` picks smoothing or a derivative.
    pub fn from_abbreviation(name: &str, opts: &SpecOptions) -> Result<Self> {
        let parsed = parse_abbreviation(name)?;
        let xi = || opts.xi.ok_or_else(|| Error::InvalidArgument(format!("{name} needs xi")));
        let mut spec = match parsed {
            Abbreviation::Truncated { morlet } => {
                let kind = if morlet { TransformKind::MorletDirect } else { opts.derivative.into() };
                Self::truncated(kind, opts.sigma, if morlet { Some(xi()?) } else { None })?
            }
            Abbreviation::Gauss { shift, order } => {
                Self::gaussian(opts.derivative, opts.sigma, opts.half_width, order, opts.beta, shift)?
            }
            Abbreviation::MorletDirect { shift, order } => {
                let k = opts.half_width.unwrap_or_else(|| default_half_width(opts.sigma));
                Self::morlet_direct(MorletParams::new(opts.sigma, xi()?, k)?, opts.first_order, order, opts.beta, shift)?
            }
            Abbreviation::MorletMultiply { shift, order } => {
                let k = opts.half_width.unwrap_or_else(|| default_half_width(opts.sigma));
                Self::morlet_multiply(MorletParams::new(opts.sigma, xi()?, k)?, order, opts.beta, shift)?
            }
        };
        spec.abbreviation = name.to_string();
        Ok(spec)
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

    pub fn shift(&self) -> usize {
        self.method.shift()
    }

    pub fn half_width(&self) -> usize {
        self.gaussian.half_width()
    }

    /// `α = 2γ n0`.
    pub fn alpha(&self) -> f64 {
        2.0 * self.gaussian.gamma() * self.shift() as f64
    }

    pub fn beta(&self) -> Option<f64> {
        self.coeffs.first().map(|c| c.beta)
    }

    fn coeff(&self, i: usize) -> Result<&CoefficientSet> {
        self.coeffs
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("{} is missing coefficient set {i}", self.abbreviation)))
    }

    /// Components and weights; `None` for the truncated-convolution method.
    pub fn reconstruction(&self) -> Result<Option<Reconstruction>> {
        if self.method == Method::Truncated {
            return Ok(None);
        }
        let alpha = self.alpha();
        let n0 = self.shift() as f64;
        let prefactor = (-self.gaussian.gamma() * n0 * n0).exp();
        let first = self.coeff(0)?;
        let real = |v: f64| Complex64::new(v, 0.0);
        let mut terms = Vec::new();
        match (&self.kind, self.shift()) {
            (TransformKind::Gauss | TransformKind::GaussD | TransformKind::GaussDD, 0) => match &first.coefficients {
                Coefficients::GaussCos(a) | Coefficients::GaussDeriv2Cos(a) => {
                    self.expect_coeffs(&[GaussOrder::Smooth, GaussOrder::Second])?;
                    terms.extend(a.iter().enumerate().map(|(p, v)| Term { frequency: Frequency::Order(p as u32), wc: real(*v), ws: real(0.0) }));
                }
                Coefficients::GaussDerivSin(b) => {
                    self.expect_coeffs(&[GaussOrder::First])?;
                    terms.extend(b.iter().enumerate().map(|(i, v)| Term { frequency: Frequency::Order(i as u32 + 1), wc: real(0.0), ws: real(*v) }));
                }
                _ => return invalid("coefficient kind does not match a Gaussian transform"),
            },
            (TransformKind::Gauss | TransformKind::GaussD | TransformKind::GaussDD, _) => {
                let a = gauss_values(self.coeff(0)?, "a")?;
                let b = if self.kind == TransformKind::Gauss { Vec::new() } else { gauss_values(self.coeff(1)?, "b")? };
                let d = if self.kind == TransformKind::GaussDD { gauss_values(self.coeff(2)?, "d")? } else { Vec::new() };
                if b.len() > a.len() || (!d.is_empty() && d.len() != a.len()) {
                    return invalid("attenuated derivative needs a, b and d fitted with the same P");
                }
                for (p, ap) in a.iter().enumerate() {
                    let bp = if p == 0 { 0.0 } else { b.get(p).copied().unwrap_or(0.0) };
                    let (wc, ws) = match self.kind {
                        TransformKind::Gauss => (*ap, 0.0),
                        TransformKind::GaussD => (alpha * ap + 0.0, bp),
                        _ => (d[p] + alpha * alpha * ap, 2.0 * alpha * bp),
                    };
                    terms.push(Term { frequency: Frequency::Order(p as u32), wc: real(wc), ws: real(ws) });
                }
            }
            (TransformKind::MorletDirect, _) => {
                let Coefficients::MorletDirect { first_order, m, l } = &first.coefficients else {
                    return invalid("Morlet direct transform needs direct Morlet coefficients");
                };
                if first.shift != self.shift() {
                    return invalid(format!("coefficients were fitted for shift {}, spec uses {}", first.shift, self.shift()));
                }
                for (i, (mp, lp)) in m.iter().zip(l).enumerate() {
                    terms.push(Term {
                        frequency: Frequency::Order(first_order + i as u32),
                        wc: *mp,
                        ws: Complex64::i() * lp,
                    });
                }
            }
            (TransformKind::MorletMultiply, _) => {
                let Coefficients::MorletMultiply(a) = &first.coefficients else {
                    return invalid("Morlet multiply transform needs envelope coefficients");
                };
                let mp = self.morlet.ok_or_else(|| Error::InvalidArgument("Morlet transform without Morlet params".into()))?;
                let amp = mp.amplitude();
                let carrier = Complex64::from_polar(amp, -mp.carrier() * n0);
                let order = a.len() as i32 - 1;
                for p in -order..=order {
                    let ap = first.a_prime(p).unwrap_or(0.0);
                    terms.push(Term {
                        frequency: Frequency::Real(mp.carrier() + first.beta * p as f64),
                        wc: carrier * ap,
                        ws: Complex64::i() * carrier * ap,
                    });
                }
                for (p, ap) in a.iter().enumerate() {
                    terms.push(Term { frequency: Frequency::Order(p as u32), wc: real(-amp * mp.kappa_xi() * ap), ws: real(0.0) });
                }
            }
        }
        Ok(Some(Reconstruction {
            prefactor,
            alpha,
            shift: self.shift(),
            half_width: first.half_width,
            beta: first.beta,
            terms,
        }))
    }

    fn expect_coeffs(&self, allowed: &[GaussOrder]) -> Result<()> {
        let order = self.kind.gauss_order().unwrap_or(GaussOrder::Smooth);
        if !allowed.contains(&order) {
            return invalid(format!("coefficients do not match transform {}", self.kind));
        }
        Ok(())
    }

    /// Kernel the transform convolves with: the fitted effective kernel, or
    /// the truncated true kernel for [`Method::Truncated`].
    pub fn effective_kernel(&self) -> Result<SampledKernel<Complex64>> {
        match self.reconstruction()? {
            Some(r) => Ok(r.effective_kernel()),
            None => {
                let k = self.gaussian.half_width() as isize;
                Ok(SampledKernel::from_fn(-k, k, |n| self.true_kernel(n)))
            }
        }
    }

    /// The exact kernel the transform approximates.
    pub fn true_kernel(&self, n: isize) -> Complex64 {
        let n = n as f64;
        match (self.kind.gauss_order(), &self.morlet) {
            (Some(order), _) => self.gaussian.eval(order, n).into(),
            (None, Some(m)) => m.morlet(n),
            (None, None) => Complex64::new(f64::NAN, 0.0),
        }
    }

    /// Relative RMSE (percent) of the effective kernel against the true one,
    /// over `[-3K, 3K]` for Gaussian kinds and `[-5K, 5K]` for Morlet kinds.
    pub fn kernel_rmse(&self) -> Result<f64> {
        let k = self.half_width() as isize;
        let span = if self.kind.is_morlet() { 5 * k } else { 3 * k };
        let approx = self.effective_kernel()?.padded(-span, span);
        let truth: Vec<Complex64> = (-span..=span).map(|n| self.true_kernel(n)).collect();
        relative_rmse(&approx, &truth)
    }

    pub fn apply(&self, sig: &Signal) -> Result<TransformResult> {
        self.apply_with(sig, Workers::ALL)
    }

    pub fn apply_with(&self, sig: &Signal, workers: Workers) -> Result<TransformResult> {
        let values: Vec<Complex64> = match self.reconstruction()? {
            None => truncated_convolution_with(sig, &self.effective_kernel()?, workers),
            Some(r) => {
                let n = sig.len();
                let cfgs = r.configs(self.strategy, self.truncation, self.precision);
                let comps = components_many(sig, &cfgs, r.shift as isize, n, workers)?;
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for (t, c) in r.terms.iter().zip(&comps) {
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += t.wc * c.c[j] + t.ws * c.s[j];
                    }
                }
                out.iter_mut().for_each(|v| *v *= r.prefactor);
                out
            }
        };
        let values = if self.kind.is_morlet() {
            Values::Complex(values)
        } else {
            Values::Real(values.iter().map(|v| v.re).collect())
        };
        Ok(TransformResult {
            values,
            meta: TransformMeta {
                abbreviation: self.abbreviation.clone(),
                kind: self.kind,
                method: self.method,
                strategy: self.strategy,
                precision: self.precision,
            },
        })
    }

    fn check(&self, kinds: &[TransformKind], asft: Option<bool>) -> Result<()> {
        if !kinds.contains(&self.kind) {
            return invalid(format!("{} is a {} transform", self.abbreviation, self.kind));
        }
        match (asft, self.method) {
            (Some(true), Method::Asft { .. }) | (Some(false), Method::Sft) | (None, Method::Sft | Method::Asft { .. }) => Ok(()),
            _ => invalid(format!("{} uses the wrong method for this operation", self.abbreviation)),
        }
    }
}

fn gauss_values(set: &CoefficientSet, what: &str) -> Result<Vec<f64>> {
    match (&set.coefficients, what) {
        (Coefficients::GaussCos(a), "a") => Ok(a.clone()),
        (Coefficients::GaussDeriv2Cos(d), "d") => Ok(d.clone()),
        // b_p stored from p = 1; index by p.
        (Coefficients::GaussDerivSin(b), "b") => Ok(std::iter::once(0.0).chain(b.iter().copied()).collect()),
        _ => invalid(format!("expected {what} coefficients, found {}", set.coefficients.kind_name())),
    }
}

fn abbreviation(transform: char, method: char, shift: usize, order: u32) -> String {
    if shift > 0 {
        format!("{transform}{method}S{shift}P{order}")
    } else {
        format!("{transform}{method}P{order}")
    }
}

/// Options for [`TransformSpec::from_abbreviation`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpecOptions {
    pub sigma: f64,
    pub xi: Option<f64>,
    pub half_width: Option<usize>,
    pub first_order: Option<u32>,
    pub beta: BetaChoice,
    pub derivative: GaussOrder,
}

impl SpecOptions {
    pub fn new(sigma: f64) -> Self {
        SpecOptions { sigma, xi: None, half_width: None, first_order: None, beta: BetaChoice::Auto, derivative: GaussOrder::Smooth }
    }

    pub fn xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    pub fn half_width(mut self, k: usize) -> Self {
        self.half_width = Some(k);
        self
    }

    pub fn derivative(mut self, order: GaussOrder) -> Self {
        self.derivative = order;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abbreviation {
    Truncated { morlet: bool },
    Gauss { shift: usize, order: u32 },
    MorletDirect { shift: usize, order: u32 },
    MorletMultiply { shift: usize, order: u32 },
}

pub fn parse_abbreviation(name: &str) -> Result<Abbreviation> {
    let bad = || Error::InvalidArgument(format!("unknown filter name `{name}`"));
    match name {
        "GCT3" => return Ok(Abbreviation::Truncated { morlet: false }),
        "MCT3" => return Ok(Abbreviation::Truncated { morlet: true }),
        _ => {}
    }
    let bytes = name.as_bytes();
    if bytes.len() < 4 {
        return Err(bad());
    }
    let rest = &name[2..];
    let (shift, rest) = match rest.strip_prefix('S') {
        Some(r) => {
            let end = r.find('P').ok_or_else(bad)?;
            let n0: usize = r[..end].parse().map_err(|_| bad())?;
            if n0 == 0 {
                return Err(bad());
            }
            (n0, &r[end..])
        }
        None => (0, rest),
    };
    let order: u32 = rest.strip_prefix('P').ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if order == 0 || !rest[1..].bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    match (bytes[0], bytes[1]) {
        (b'G', b'D') => Ok(Abbreviation::Gauss { shift, order }),
        (b'M', b'D') => Ok(Abbreviation::MorletDirect { shift, order }),
        (b'M', b'M') => Ok(Abbreviation::MorletMultiply { shift, order }),
        _ => Err(bad()),
    }
}

/// Every filter name of the comparison table.
pub const TABLE_NAMES: &[&str] = &[
    "GDP6", "MDP5", "MDP6", "MDP7", "MDP9", "MDP11", "MDS5P5", "MDS5P7", "MDS5P9", "MDS5P11", "MMP2", "MMP3", "MMP4",
    "MMP5", "MMS5P2", "MMS5P3", "MMS5P4", "MMS5P5", "GCT3", "MCT3",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Real(v) => v.len(),
            Values::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        match self {
            Values::Real(v) => v.iter().map(|x| Complex64::new(*x, 0.0)).collect(),
            Values::Complex(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformMeta {
    pub abbreviation: String,
    pub kind: TransformKind,
    pub method: Method,
    pub strategy: Strategy,
    pub precision: Precision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult {
    pub values: Values,
    pub meta: TransformMeta,
}

/// `x_G[n] ≈ Σ a_p c_p[n]` and the derivative analogues.
pub fn gauss_smooth_sft(sig: &Signal, spec: &TransformSpec) -> Result<TransformResult> {
    spec.check(&[TransformKind::Gauss, TransformKind::GaussD, TransformKind::GaussDD], Some(false))?;
    spec.apply(sig)
}

/// `x_G[n] ≈ e^{-α²/4γ} Σ a_p c̃_p[n + n0]`.
pub fn gauss_smooth_asft(sig: &Signal, spec: &TransformSpec) -> Result<TransformResult> {
    spec.check(&[TransformKind::Gauss], Some(true))?;
    spec.apply(sig)
}

/// Attenuated first and second derivatives:
/// `x_GD ≈ e^{-α²/4γ} Σ (α a_p c̃_p + b_p s̃_p)[n + n0]`,
/// `x_GDD ≈ e^{-α²/4γ} Σ ((d_p + α² a_p) c̃_p + 2α b_p s̃_p)[n + n0]`.
pub fn gauss_derivs_asft(sig: &Signal, spec: &TransformSpec) -> Result<TransformResult> {
    spec.check(&[TransformKind::GaussD, TransformKind::GaussDD], Some(true))?;
    spec.apply(sig)
}

pub fn morlet_direct(sig: &Signal, spec: &TransformSpec) -> Result<TransformResult> {
    spec.check(&[TransformKind::MorletDirect], None)?;
    spec.apply(sig)
}

/// `x_M = A [Σ_{p=-P}^{P} a'_p (c(ω_p) + i s(ω_p)) - κ Σ_{p=0}^{P} a_p c_p]`,
/// `ω_p = ξ/σ + βp`.
pub fn morlet_multiply(sig: &Signal, spec: &TransformSpec) -> Result<TransformResult> {
    spec.check(&[TransformKind::MorletMultiply], None)?;
    spec.apply(sig)
}

/// Default `β` for a half-width.
pub fn base_beta(half_width: usize) -> f64 {
    PI / half_width as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::truncated_convolution;
    use crate::signal::{make_test_signal, BoundaryPolicy, TestSignal};

    fn max_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn abbreviations_parse() {
        for name in TABLE_NAMES {
            parse_abbreviation(name).unwrap();
        }
        assert_eq!(parse_abbreviation("MDS5P11").unwrap(), Abbreviation::MorletDirect { shift: 5, order: 11 });
        assert_eq!(parse_abbreviation("GDP6").unwrap(), Abbreviation::Gauss { shift: 0, order: 6 });
        for bad in ["", "GMP3", "GDP", "MDS0P5", "MDSP5", "MDP5x", "XDP3", "MDP0"] {
            assert!(parse_abbreviation(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn every_table_name_builds() {
        let opts = SpecOptions::new(12.0).xi(8.0);
        for name in TABLE_NAMES {
            let spec = TransformSpec::from_abbreviation(name, &opts).unwrap();
            assert_eq!(spec.abbreviation, *name);
            assert_eq!(spec.kind.is_morlet(), name.starts_with('M'));
            assert_eq!(spec.shift(), if name.contains("S5") { 5 } else { 0 });
        }
    }

    #[test]
    fn outputs_equal_fitted_kernel_convolution() {
        let sig = make_test_signal(TestSignal::SeededNoise, 300, 21).unwrap();
        let mut specs = Vec::new();
        for order in [GaussOrder::Smooth, GaussOrder::First, GaussOrder::Second] {
            specs.push(TransformSpec::gaussian(order, 12.0, None, 4, BetaChoice::Tuned, 0).unwrap());
            specs.push(TransformSpec::gaussian(order, 12.0, None, 4, BetaChoice::Tuned, 3).unwrap());
        }
        let m = MorletParams::with_default_width(10.0, 6.0).unwrap();
        specs.push(TransformSpec::morlet_direct(m, None, 6, BetaChoice::Base, 0).unwrap());
        specs.push(TransformSpec::morlet_direct(m, None, 6, BetaChoice::Base, 2).unwrap());
        specs.push(TransformSpec::morlet_multiply(m, 3, BetaChoice::Base, 0).unwrap());
        specs.push(TransformSpec::morlet_multiply(m, 3, BetaChoice::Base, 2).unwrap());
        for spec in specs {
            let want = truncated_convolution(&sig, &spec.effective_kernel().unwrap());
            for strategy in [Strategy::KernelIntegral, Strategy::Recursive1, Strategy::Recursive2, Strategy::SlidingSum] {
                let got = spec.clone().with_strategy(strategy).apply(&sig).unwrap().values.to_complex();
                assert!(max_rel(&got, &want) < 1e-9, "{} {} {strategy}", spec.abbreviation, spec.kind);
            }
        }
    }

    #[test]
    fn shifted_kernels_track_true_kernels() {
        for order in [GaussOrder::Smooth, GaussOrder::First, GaussOrder::Second] {
            let sft = TransformSpec::gaussian(order, 85.0, Some(256), 4, BetaChoice::Tuned, 0).unwrap();
            let asft = TransformSpec::gaussian(order, 85.0, Some(256), 4, BetaChoice::Tuned, 10).unwrap();
            let (a, b) = (sft.kernel_rmse().unwrap(), asft.kernel_rmse().unwrap());
            assert!(b < 1.6 * a + 0.01, "{order:?}: sft {a}, asft {b}");
        }
    }

    #[test]
    fn shift_bound_enforced() {
        assert!(TransformSpec::gaussian(GaussOrder::Smooth, 16.0, None, 3, BetaChoice::Base, 5).is_err());
        assert!(TransformSpec::gaussian(GaussOrder::Smooth, 16.0, None, 3, BetaChoice::Base, 4).is_ok());
        assert!(TransformSpec::gaussian(GaussOrder::Smooth, 16.0, None, 0, BetaChoice::Base, 0).is_err());
    }

    #[test]
    fn constant_signal_responses() {
        let one = make_test_signal(TestSignal::Constant, 400, 0).unwrap();
        let g = TransformSpec::gaussian(GaussOrder::Smooth, 16.0, None, 4, BetaChoice::Tuned, 0).unwrap();
        let Values::Real(v) = g.apply(&one).unwrap().values else { unreachable!() };
        let mass: f64 = g.effective_kernel().unwrap().taps.iter().map(|c| c.re).sum();
        assert!(v.iter().all(|x| (x - mass).abs() < 1e-10 && (x - 1.0).abs() < 5e-3));
        for shift in [0, 4] {
            let d = TransformSpec::gaussian(GaussOrder::First, 16.0, None, 4, BetaChoice::Tuned, shift).unwrap();
            let Values::Real(v) = d.apply(&one).unwrap().values else { unreachable!() };
            let tol = if shift == 0 { 1e-9 } else { 1e-3 };
            assert!(v.iter().all(|x| x.abs() < tol), "shift {shift}");
        }
    }

    #[test]
    fn ramp_slope_response() {
        // Centered ramp, so that the small DC leak of the shifted window does not dominate.
        let ramp = Signal::new((0..600).map(|i| i as f64 - 300.0).collect(), BoundaryPolicy::Zero).unwrap();
        let oracle = truncated_convolution(&ramp, &GaussianParams::with_default_width(20.0).unwrap().sampled(GaussOrder::First));
        for shift in [0, 4] {
            let d = TransformSpec::gaussian(GaussOrder::First, 20.0, None, 5, BetaChoice::Tuned, shift).unwrap();
            let out = if shift == 0 { gauss_smooth_sft(&ramp, &d) } else { gauss_derivs_asft(&ramp, &d) };
            let Values::Real(v) = out.unwrap().values else { unreachable!() };
            for n in 295..305 {
                assert!((v[n] - oracle[n]).abs() < 0.01 * oracle[n].abs(), "{shift} {n}: {} vs {}", v[n], oracle[n]);
            }
        }
    }

    #[test]
    fn impulse_peaks_align() {
        let imp = make_test_signal(TestSignal::Impulse, 301, 0).unwrap();
        let sft = TransformSpec::gaussian(GaussOrder::Smooth, 24.0, None, 4, BetaChoice::Tuned, 0).unwrap();
        let asft = TransformSpec::gaussian(GaussOrder::Smooth, 24.0, None, 4, BetaChoice::Tuned, 6).unwrap();
        let argmax = |r: TransformResult| {
            let Values::Real(v) = r.values else { unreachable!() };
            v.iter().enumerate().fold((0, f64::MIN), |b, (i, x)| if *x > b.1 { (i, *x) } else { b }).0
        };
        assert_eq!(argmax(gauss_smooth_sft(&imp, &sft).unwrap()), 150);
        assert_eq!(argmax(gauss_smooth_asft(&imp, &asft).unwrap()), 150);
    }

    #[test]
    fn wrong_operation_is_rejected() {
        let sig = make_test_signal(TestSignal::Constant, 50, 0).unwrap();
        let g = TransformSpec::gaussian(GaussOrder::Smooth, 8.0, None, 3, BetaChoice::Base, 0).unwrap();
        assert!(gauss_smooth_asft(&sig, &g).is_err());
        assert!(morlet_direct(&sig, &g).is_err());
        let mut broken = g.clone();
        broken.kind = TransformKind::GaussD;
        assert!(broken.apply(&sig).is_err());
    }

    #[test]
    fn zero_signal_gives_zero() {
        let zero = Signal::from_samples(vec![0.0; 128]).unwrap();
        let m = MorletParams::with_default_width(8.0, 10.0).unwrap();
        for spec in [
            TransformSpec::morlet_direct(m, None, 6, BetaChoice::Base, 0).unwrap(),
            TransformSpec::morlet_multiply(m, 3, BetaChoice::Base, 0).unwrap(),
        ] {
            assert!(spec.apply(&zero).unwrap().values.to_complex().iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn tone_magnitude_is_flat() {
        let (sigma, xi) = (60.0, 10.0);
        let tone = Signal::from_samples((0..2000).map(|n| (xi * n as f64 / sigma).cos()).collect()).unwrap();
        let m = MorletParams::with_default_width(sigma, xi).unwrap();
        for spec in [
            TransformSpec::morlet_direct(m, None, 6, BetaChoice::Base, 0).unwrap(),
            TransformSpec::morlet_multiply(m, 3, BetaChoice::Base, 0).unwrap(),
        ] {
            let v = spec.apply(&tone).unwrap().values.to_complex();
            let mags: Vec<f64> = v[400..1600].iter().map(|c| c.norm()).collect();
            let (lo, hi) = mags.iter().fold((f64::MAX, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
            assert!((hi - lo) / hi < 0.02, "{}: ripple {}", spec.abbreviation, (hi - lo) / hi);
        }
    }

    #[test]
    fn truncated_method_is_the_oracle() {
        let sig = make_test_signal(TestSignal::SeededNoise, 100, 1).unwrap();
        let spec = TransformSpec::from_abbreviation("GCT3", &SpecOptions::new(5.0)).unwrap();
        let Values::Real(v) = spec.apply(&sig).unwrap().values else { unreachable!() };
        let want = truncated_convolution(&sig, &GaussianParams::with_default_width(5.0).unwrap().sampled(GaussOrder::Smooth));
        assert_eq!(v, want);
    }
}
