//! Least-squares trigonometric approximations of the Gaussian, its
//! derivatives, and the Morlet wavelet over a finite window `[-K, K]`.
//!
//! The sinusoids `cos(βpk)`, `sin(βpk)` sampled on `[-K, K]` are not
//! orthogonal (in particular once β is tuned away from `π/K`), so every fit
//! solves the full Gram system rather than projecting mode by mode.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::eval::relative_rmse;
use crate::kernels::{GaussOrder, GaussianParams, MorletParams, SampledKernel};

/// Largest Gram-matrix condition estimate accepted by [`fit_mmse`].
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Relative tolerance of the golden-section search on β.
pub const BETA_TOLERANCE: f64 = 1e-4;

/// Sinusoid orders and base frequency of a fit on `[-K, K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicGrid {
    pub half_width: usize,
    pub beta: f64,
    pub cos_orders: Vec<u32>,
    pub sin_orders: Vec<u32>,
}

impl HarmonicGrid {
    /// `β = π/K`: the basic wavelength is `2K`.
    pub fn default_beta(half_width: usize) -> f64 {
        PI / half_width as f64
    }

    pub fn new(half_width: usize, beta: f64, cos_orders: Vec<u32>, sin_orders: Vec<u32>) -> Result<Self> {
        let grid = HarmonicGrid { half_width, beta, cos_orders, sin_orders };
        grid.validate()?;
        Ok(grid)
    }

    pub fn cosines(half_width: usize, beta: f64, orders: impl IntoIterator<Item = u32>) -> Result<Self> {
        Self::new(half_width, beta, orders.into_iter().collect(), Vec::new())
    }

    pub fn sines(half_width: usize, beta: f64, orders: impl IntoIterator<Item = u32>) -> Result<Self> {
        Self::new(half_width, beta, Vec::new(), orders.into_iter().collect())
    }

    fn validate(&self) -> Result<()> {
        if self.half_width == 0 {
            return invalid("fit half-width K must be at least 1");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be positive, got {}", self.beta));
        }
        for orders in [&self.cos_orders, &self.sin_orders] {
            let mut sorted = orders.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != orders.len() {
                return invalid("sinusoid orders must be distinct");
            }
        }
        if self.sin_orders.contains(&0) {
            return invalid("sin(0·k) is identically zero and cannot be a basis function");
        }
        let count = self.basis_len();
        if count == 0 {
            return invalid("a fit needs at least one basis function");
        }
        if count > 2 * self.half_width + 1 {
            return invalid(format!("{count} basis functions exceed the {} fit nodes", 2 * self.half_width + 1));
        }
        Ok(())
    }

    pub fn basis_len(&self) -> usize {
        self.cos_orders.len() + self.sin_orders.len()
    }

    /// Basis functions evaluated at `k`, cosines first.
    fn basis_row(&self, k: f64, row: &mut Vec<f64>) {
        row.clear();
        row.extend(self.cos_orders.iter().map(|&p| (self.beta * p as f64 * k).cos()));
        row.extend(self.sin_orders.iter().map(|&p| (self.beta * p as f64 * k).sin()));
    }

    fn design(&self) -> DMatrix<f64> {
        let k = self.half_width as isize;
        let rows = 2 * self.half_width + 1;
        let mut a = DMatrix::zeros(rows, self.basis_len());
        let mut row = Vec::with_capacity(self.basis_len());
        for (i, kk) in (-k..=k).enumerate() {
            self.basis_row(kk as f64, &mut row);
            for (j, v) in row.iter().enumerate() {
                a[(i, j)] = *v;
            }
        }
        a
    }
}

/// Solution of one real least-squares problem on a [`HarmonicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    /// Coefficients in `grid.cos_orders` order.
    pub cos: Vec<f64>,
    /// Coefficients in `grid.sin_orders` order.
    pub sin: Vec<f64>,
    /// Relative RMSE on the fit nodes, percent.
    pub fit_rmse: f64,
}

/// Minimizes `Σ_{k=-K}^{K} |f̂[k] - target[k]|²` over the grid's sinusoids.
///
/// `target` holds the samples at `k = -K..=K`. Solved through the Gram
/// system `AᵀA c = Aᵀt` in double precision.
pub fn fit_mmse(target: &[f64], grid: &HarmonicGrid) -> Result<LeastSquaresFit> {
    grid.validate()?;
    if target.len() != 2 * grid.half_width + 1 {
        return invalid(format!("target has {} samples, expected {}", target.len(), 2 * grid.half_width + 1));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return invalid("target kernel has non-finite samples");
    }
    let a = grid.design();
    let coef = solve_gram(&a, &[target])?.remove(0);
    let approx = &a * &coef;
    let fit_rmse = if target.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        relative_rmse(approx.as_slice(), target)?
    };
    let nc = grid.cos_orders.len();
    Ok(LeastSquaresFit {
        cos: coef.as_slice()[..nc].to_vec(),
        sin: coef.as_slice()[nc..].to_vec(),
        fit_rmse,
    })
}

fn solve_gram(a: &DMatrix<f64>, rhs: &[&[f64]]) -> Result<Vec<DVector<f64>>> {
    let gram = a.transpose() * a;
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_GRAM_CONDITION {
        return Err(Error::FitDegenerate { condition, limit: MAX_GRAM_CONDITION });
    }
    let chol = gram
        .cholesky()
        .ok_or(Error::FitDegenerate { condition, limit: MAX_GRAM_CONDITION })?;
    Ok(rhs
        .iter()
        .map(|t| chol.solve(&(a.transpose() * DVector::from_column_slice(t))))
        .collect())
}

/// Fitted coefficients by transform kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// `a_p`, `p = 0..=P`: `Ĝ[k] = Σ a_p cos(βpk)`.
    GaussCos(Vec<f64>),
    /// `b_p`, `p = 1..=P` (index 0 holds `b_1`): `Ĝ_D[k] = Σ b_p sin(βpk)`.
    GaussDerivSin(Vec<f64>),
    /// `d_p`, `p = 0..=P`: `Ĝ_DD[k] = Σ d_p cos(βpk)`.
    GaussDeriv2Cos(Vec<f64>),
    /// `ψ̂[k] = Σ m_p cos(βpk) + i l_p sin(βpk)` for `p = first..first+m.len()`.
    /// `l` at `p = 0` is always zero. Coefficients are real unless the fit
    /// targets an attenuated (shifted) transform.
    MorletDirect { first_order: u32, m: Vec<Complex64>, l: Vec<Complex64> },
    /// Gaussian-envelope coefficients `a_p`, `p = 0..=P`, for the
    /// multiplication method; see [`CoefficientSet::a_prime`].
    MorletMultiply(Vec<f64>),
}

impl Coefficients {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Coefficients::GaussCos(_) => "gauss-cos",
            Coefficients::GaussDerivSin(_) => "gauss-deriv-sin",
            Coefficients::GaussDeriv2Cos(_) => "gauss-deriv2-cos",
            Coefficients::MorletDirect { .. } => "morlet-direct",
            Coefficients::MorletMultiply(_) => "morlet-multiply",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub coefficients: Coefficients,
    pub half_width: usize,
    pub beta: f64,
    pub sigma: f64,
    /// Morlet center frequency, `None` for Gaussian kinds.
    pub xi: Option<f64>,
    /// Output shift the fit was made for; only Morlet direct fits depend on it.
    pub shift: usize,
    /// Relative RMSE of the reconstruction on the fit nodes, percent.
    pub fit_rmse: f64,
}

impl CoefficientSet {
    /// Highest sinusoid order used.
    pub fn max_order(&self) -> u32 {
        match &self.coefficients {
            Coefficients::GaussCos(a) | Coefficients::GaussDeriv2Cos(a) | Coefficients::MorletMultiply(a) => {
                a.len() as u32 - 1
            }
            Coefficients::GaussDerivSin(b) => b.len() as u32,
            Coefficients::MorletDirect { first_order, m, .. } => first_order + m.len() as u32 - 1,
        }
    }

    /// Two-sided coefficients of the multiplication method, `p = -P..=P`:
    /// `a'_0 = a_0`, `a'_{±p} = a_p / 2`.
    pub fn a_prime(&self, p: i32) -> Option<f64> {
        match &self.coefficients {
            Coefficients::MorletMultiply(a) => {
                let q = p.unsigned_abs() as usize;
                a.get(q).map(|v| if q == 0 { *v } else { 0.5 * v })
            }
            _ => None,
        }
    }

    /// The fitted function at offset `k` (not restricted to `[-K, K]`).
    pub fn evaluate(&self, k: f64) -> Complex64 {
        let b = self.beta;
        match &self.coefficients {
            Coefficients::GaussCos(a) | Coefficients::GaussDeriv2Cos(a) => {
                a.iter().enumerate().map(|(p, v)| v * (b * p as f64 * k).cos()).sum::<f64>().into()
            }
            Coefficients::GaussDerivSin(c) => c
                .iter()
                .enumerate()
                .map(|(i, v)| v * (b * (i + 1) as f64 * k).sin())
                .sum::<f64>()
                .into(),
            Coefficients::MorletDirect { first_order, m, l } => m
                .iter()
                .zip(l)
                .enumerate()
                .map(|(i, (mp, lp))| {
                    let w = b * (*first_order as usize + i) as f64 * k;
                    mp * w.cos() + Complex64::i() * lp * w.sin()
                })
                .sum(),
            Coefficients::MorletMultiply(a) => {
                let env: f64 = a.iter().enumerate().map(|(p, v)| v * (b * p as f64 * k).cos()).sum();
                let xi = self.xi.unwrap_or_default();
                match MorletParams::new(self.sigma, xi, self.half_width) {
                    Ok(mp) => (Complex64::from_polar(1.0, mp.carrier() * k) - mp.kappa_xi()) * (mp.amplitude() * env),
                    Err(_) => Complex64::new(f64::NAN, f64::NAN),
                }
            }
        }
    }

    /// The fitted kernel sampled on `[-K, K]`.
    pub fn kernel(&self) -> SampledKernel<Complex64> {
        let k = self.half_width as isize;
        SampledKernel::from_fn(-k, k, |n| self.evaluate(n as f64))
    }

    pub fn real_kernel(&self) -> SampledKernel<f64> {
        let k = self.kernel();
        SampledKernel { first: k.first, taps: k.taps.iter().map(|c| c.re).collect() }
    }
}

/// Fits `G`, `G_D` or `G_DD` with orders up to `P` (`1..=P` for `G_D`).
pub fn fit_gauss(params: &GaussianParams, order: GaussOrder, max_order: u32, beta: f64) -> Result<CoefficientSet> {
    let k = params.half_width();
    let target = params.sampled(order).taps;
    let (grid, wrap): (HarmonicGrid, fn(Vec<f64>) -> Coefficients) = match order {
        GaussOrder::Smooth => (HarmonicGrid::cosines(k, beta, 0..=max_order)?, Coefficients::GaussCos),
        GaussOrder::First => (HarmonicGrid::sines(k, beta, 1..=max_order)?, Coefficients::GaussDerivSin),
        GaussOrder::Second => (HarmonicGrid::cosines(k, beta, 0..=max_order)?, Coefficients::GaussDeriv2Cos),
    };
    let fit = fit_mmse(&target, &grid)?;
    let values = if order == GaussOrder::First { fit.sin } else { fit.cos };
    Ok(CoefficientSet {
        coefficients: wrap(values),
        half_width: k,
        beta,
        sigma: params.sigma(),
        xi: None,
        shift: 0,
        fit_rmse: fit.fit_rmse,
    })
}

/// Relative RMSE (percent) of a Gaussian-kind fit over `[-3K, 3K]`, the fit
/// being zero outside `[-K, K]`.
pub fn gaussian_fit_error(set: &CoefficientSet, params: &GaussianParams, order: GaussOrder) -> f64 {
    let k = set.half_width as isize;
    let approx = set.real_kernel();
    let truth: Vec<f64> = (-3 * k..=3 * k).map(|n| params.eval(order, n as f64)).collect();
    relative_rmse(&approx.padded(-3 * k, 3 * k), &truth).unwrap_or(f64::INFINITY)
}

/// Coarse scan followed by golden-section refinement of `objective` on
/// `[lo, hi]`. Returns the minimizer and its value.
pub fn bounded_minimize(objective: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    const SCAN: usize = 24;
    let step = (hi - lo) / SCAN as f64;
    let (mut best_i, mut best_v) = (0, f64::INFINITY);
    for i in 0..=SCAN {
        let v = objective(lo + step * i as f64);
        if v < best_v {
            best_i = i;
            best_v = v;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while (b - a).abs() > rel_tol * 0.5 * (a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    let (x, v) = if fc < fd { (c, fc) } else { (d, fd) };
    if best_v < v {
        (lo + step * best_i as f64, best_v)
    } else {
        (x, v)
    }
}

/// Chooses β in `[0.5π/K, 1.5π/K]` minimizing the `[-3K, 3K]` error of the
/// plain Gaussian fit with orders `0..=P`.
pub fn tune_beta(params: &GaussianParams, max_order: u32) -> Result<(f64, CoefficientSet)> {
    if max_order < 1 {
        return invalid("beta tuning needs P >= 1");
    }
    let base = HarmonicGrid::default_beta(params.half_width());
    let objective = |beta: f64| {
        fit_gauss(params, GaussOrder::Smooth, max_order, beta)
            .map(|s| gaussian_fit_error(&s, params, GaussOrder::Smooth))
            .unwrap_or(f64::INFINITY)
    };
    let (beta, _) = bounded_minimize(objective, 0.5 * base, 1.5 * base, BETA_TOLERANCE);
    Ok((beta, fit_gauss(params, GaussOrder::Smooth, max_order, beta)?))
}

/// Smoothing size and β that together minimize the `[-3K, 3K]` error of a
/// Gaussian fit at fixed `K` and `P`. σ is searched in `[K/6, K/2]`.
pub fn tune_sigma_and_beta(half_width: usize, max_order: u32) -> Result<(GaussianParams, f64, CoefficientSet)> {
    let k = half_width as f64;
    let objective = |sigma: f64| {
        GaussianParams::new(sigma, half_width)
            .and_then(|p| tune_beta(&p, max_order).map(|(_, s)| gaussian_fit_error(&s, &p, GaussOrder::Smooth)))
            .unwrap_or(f64::INFINITY)
    };
    let (sigma, _) = bounded_minimize(objective, k / 6.0, k / 2.0, 1e-5);
    let params = GaussianParams::new(sigma, half_width)?;
    let (beta, set) = tune_beta(&params, max_order)?;
    Ok((params, beta, set))
}

/// Fit target of a direct Morlet fit. With a shift `n0 > 0` the target is
/// `e^{α²/4γ} e^{-αk} ψ[k - n0]` with `α = 2γ n0`, so that the attenuated
/// transform read `n0` samples ahead reproduces ψ.
fn morlet_direct_target(params: &MorletParams, shift: usize) -> Vec<Complex64> {
    let k = params.half_width() as isize;
    let n0 = shift as f64;
    (-k..=k)
        .map(|kk| {
            let kk = kk as f64;
            let carrier = Complex64::from_polar(1.0, params.carrier() * (kk - n0));
            (carrier - params.kappa_xi()) * (params.amplitude() * params.envelope(kk))
        })
        .collect()
}

/// Direct Morlet fit with orders `P_S..P_S+P_D-1` on `[-K, K]` (`K` from
/// `params`).
///
/// Unshifted: real part on cosines, imaginary part on sines. Shifted: the
/// target is no longer even/odd split, so both parts use both families and
/// the coefficients become complex.
pub fn fit_morlet_direct(
    params: &MorletParams,
    first_order: u32,
    order_count: u32,
    beta: f64,
    shift: usize,
) -> Result<CoefficientSet> {
    if order_count == 0 {
        return invalid("P_D must be at least 1");
    }
    let k = params.half_width();
    let orders: Vec<u32> = (first_order..first_order + order_count).collect();
    let sin_orders: Vec<u32> = orders.iter().copied().filter(|&p| p > 0).collect();
    let target = morlet_direct_target(params, shift);
    let re: Vec<f64> = target.iter().map(|c| c.re).collect();
    let im: Vec<f64> = target.iter().map(|c| c.im).collect();
    let sin_slot = |p: u32| sin_orders.iter().position(|&q| q == p);

    let (m, l) = if shift == 0 {
        let re_fit = fit_mmse(&re, &HarmonicGrid::cosines(k, beta, orders.clone())?)?;
        let im_fit = fit_mmse(&im, &HarmonicGrid::sines(k, beta, sin_orders.clone())?)?;
        let m = re_fit.cos.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let l = orders
            .iter()
            .map(|&p| sin_slot(p).map_or(Complex64::new(0.0, 0.0), |i| Complex64::new(im_fit.sin[i], 0.0)))
            .collect();
        (m, l)
    } else {
        let grid = HarmonicGrid::new(k, beta, orders.clone(), sin_orders.clone())?;
        let a = grid.design();
        let sols = solve_gram(&a, &[&re, &im])?;
        let nc = orders.len();
        let m = (0..nc).map(|i| Complex64::new(sols[0][i], sols[1][i])).collect();
        // i·l·sin must equal (re_s + i im_s)·sin, so l = im_s - i re_s.
        let l = orders
            .iter()
            .map(|&p| sin_slot(p).map_or(Complex64::new(0.0, 0.0), |i| Complex64::new(sols[1][nc + i], -sols[0][nc + i])))
            .collect();
        (m, l)
    };
    let mut set = CoefficientSet {
        coefficients: Coefficients::MorletDirect { first_order, m, l },
        half_width: k,
        beta,
        sigma: params.sigma(),
        xi: Some(params.xi()),
        shift,
        fit_rmse: 0.0,
    };
    let approx = set.kernel().taps;
    set.fit_rmse = relative_rmse(&approx, &target)?;
    Ok(set)
}

/// Gaussian-envelope fit for the multiplication method, orders `0..=P`.
pub fn fit_morlet_multiply(params: &MorletParams, max_order: u32, beta: f64) -> Result<CoefficientSet> {
    let k = params.half_width() as isize;
    let env: Vec<f64> = (-k..=k).map(|n| params.envelope(n as f64)).collect();
    let fit = fit_mmse(&env, &HarmonicGrid::cosines(params.half_width(), beta, 0..=max_order)?)?;
    let mut set = CoefficientSet {
        coefficients: Coefficients::MorletMultiply(fit.cos),
        half_width: params.half_width(),
        beta,
        sigma: params.sigma(),
        xi: Some(params.xi()),
        shift: 0,
        fit_rmse: 0.0,
    };
    set.fit_rmse = relative_rmse(&set.kernel().taps, &params.sampled().taps)?;
    Ok(set)
}

/// Relative RMSE (percent) over `[-5K, 5K]` of an unshifted Morlet fit
/// against the exact wavelet, the fit being zero outside `[-K, K]`.
pub fn morlet_fit_error(set: &CoefficientSet, params: &MorletParams) -> f64 {
    let k = set.half_width as isize;
    let truth: Vec<Complex64> = (-5 * k..=5 * k).map(|n| params.morlet(n as f64)).collect();
    relative_rmse(&set.kernel().padded(-5 * k, 5 * k), &truth).unwrap_or(f64::INFINITY)
}

/// Upper end of the `P_S` scan: `ceil(Kξ/(πσ)) + P_D`.
pub fn first_order_scan_limit(params: &MorletParams, order_count: u32) -> u32 {
    let k = params.half_width() as f64;
    (k * params.xi() / (PI * params.sigma())).ceil() as u32 + order_count
}

/// Exhaustive scan for the first order `P_S` of a direct Morlet fit with
/// `β = π/K`; ties go to the smaller `P_S`.
pub fn select_optimal_ps(params: &MorletParams, order_count: u32) -> Result<(u32, CoefficientSet)> {
    if order_count == 0 {
        return invalid("P_D must be at least 1");
    }
    let beta = HarmonicGrid::default_beta(params.half_width());
    let mut best: Option<(u32, f64, CoefficientSet)> = None;
    for ps in 0..=first_order_scan_limit(params, order_count) {
        let set = match fit_morlet_direct(params, ps, order_count, beta, 0) {
            Ok(s) => s,
            Err(Error::FitDegenerate { .. }) => continue,
            Err(e) => return Err(e),
        };
        let err = morlet_fit_error(&set, params);
        if best.as_ref().is_none_or(|(_, e, _)| err < *e) {
            best = Some((ps, err, set));
        }
    }
    best.map(|(ps, _, s)| (ps, s))
        .ok_or_else(|| Error::InvalidArgument("no admissible P_S".into()))
}

const RECORD_MAGIC: &str = "sftwave-coefficients";
const RECORD_VERSION: u32 = 1;

impl CoefficientSet {
    /// Plain-text record: a header, then one line per coefficient
    /// (`name order value...`). Values use shortest round-trip formatting.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{RECORD_MAGIC} {RECORD_VERSION}");
        let _ = writeln!(out, "kind {}", self.coefficients.kind_name());
        let _ = writeln!(out, "half_width {}", self.half_width);
        let _ = writeln!(out, "beta {:?}", self.beta);
        let _ = writeln!(out, "sigma {:?}", self.sigma);
        if let Some(xi) = self.xi {
            let _ = writeln!(out, "xi {xi:?}");
        }
        let _ = writeln!(out, "shift {}", self.shift);
        let _ = writeln!(out, "fit_rmse {:?}", self.fit_rmse);
        match &self.coefficients {
            Coefficients::GaussCos(a) => write_real(&mut out, "a", 0, a),
            Coefficients::GaussDerivSin(b) => write_real(&mut out, "b", 1, b),
            Coefficients::GaussDeriv2Cos(d) => write_real(&mut out, "d", 0, d),
            Coefficients::MorletMultiply(a) => write_real(&mut out, "a", 0, a),
            Coefficients::MorletDirect { first_order, m, l } => {
                for (i, (mp, lp)) in m.iter().zip(l).enumerate() {
                    let p = *first_order as usize + i;
                    let _ = writeln!(out, "m {p} {:?} {:?}", mp.re, mp.im);
                    let _ = writeln!(out, "l {p} {:?} {:?}", lp.re, lp.im);
                }
            }
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let fail = |msg: String| Error::Format(msg);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next().map(|l| l.split_whitespace().collect::<Vec<_>>()) {
            Some(h) if h.len() == 2 && h[0] == RECORD_MAGIC => {
                let v: u32 = h[1].parse().map_err(|_| fail(format!("bad version `{}`", h[1])))?;
                if v != RECORD_VERSION {
                    return Err(fail(format!("unsupported record version {v}")));
                }
            }
            _ => return Err(fail("missing record header".into())),
        }
        let mut kind = None;
        let (mut half_width, mut beta, mut sigma, mut xi, mut shift, mut fit_rmse) = (None, None, None, None, 0, 0.0);
        let mut reals: Vec<(usize, f64)> = Vec::new();
        let mut m: Vec<(usize, Complex64)> = Vec::new();
        let mut l: Vec<(usize, Complex64)> = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i)
                    .ok_or_else(|| fail(format!("short line `{line}`")))?
                    .parse::<f64>()
                    .map_err(|_| fail(format!("bad number in `{line}`")))
            };
            let idx = || -> Result<usize> {
                f.get(1)
                    .ok_or_else(|| fail(format!("short line `{line}`")))?
                    .parse::<usize>()
                    .map_err(|_| fail(format!("bad order in `{line}`")))
            };
            match f[0] {
                "kind" => kind = f.get(1).map(|s| s.to_string()),
                "half_width" => half_width = Some(num(1)? as usize),
                "beta" => beta = Some(num(1)?),
                "sigma" => sigma = Some(num(1)?),
                "xi" => xi = Some(num(1)?),
                "shift" => shift = num(1)? as usize,
                "fit_rmse" => fit_rmse = num(1)?,
                "a" | "b" | "d" => reals.push((idx()?, num(2)?)),
                "m" => m.push((idx()?, Complex64::new(num(2)?, num(3)?))),
                "l" => l.push((idx()?, Complex64::new(num(2)?, num(3)?))),
                other => return Err(fail(format!("unknown field `{other}`"))),
            }
        }
        let kind = kind.ok_or_else(|| fail("missing kind".into()))?;
        let contiguous = |first: usize, v: &[(usize, f64)]| -> Result<Vec<f64>> {
            if v.is_empty() || v.iter().enumerate().any(|(i, (p, _))| *p != first + i) {
                return Err(fail("coefficient orders must be contiguous and ascending".into()));
            }
            Ok(v.iter().map(|(_, x)| *x).collect())
        };
        let coefficients = match kind.as_str() {
            "gauss-cos" => Coefficients::GaussCos(contiguous(0, &reals)?),
            "gauss-deriv-sin" => Coefficients::GaussDerivSin(contiguous(1, &reals)?),
            "gauss-deriv2-cos" => Coefficients::GaussDeriv2Cos(contiguous(0, &reals)?),
            "morlet-multiply" => Coefficients::MorletMultiply(contiguous(0, &reals)?),
            "morlet-direct" => {
                let first = m.first().map(|(p, _)| *p).ok_or_else(|| fail("no m coefficients".into()))?;
                let ok = m.len() == l.len()
                    && m.iter().zip(&l).enumerate().all(|(i, ((pm, _), (pl, _)))| *pm == first + i && *pl == first + i);
                if !ok {
                    return Err(fail("m/l orders must be paired, contiguous and ascending".into()));
                }
                Coefficients::MorletDirect {
                    first_order: first as u32,
                    m: m.into_iter().map(|(_, c)| c).collect(),
                    l: l.into_iter().map(|(_, c)| c).collect(),
                }
            }
            other => return Err(fail(format!("unknown kind `{other}`"))),
        };
        let set = CoefficientSet {
            coefficients,
            half_width: half_width.ok_or_else(|| fail("missing half_width".into()))?,
            beta: beta.ok_or_else(|| fail("missing beta".into()))?,
            sigma: sigma.ok_or_else(|| fail("missing sigma".into()))?,
            xi,
            shift,
            fit_rmse,
        };
        if matches!(set.coefficients, Coefficients::MorletDirect { .. } | Coefficients::MorletMultiply(_)) && set.xi.is_none() {
            return Err(fail("Morlet record without xi".into()));
        }
        Ok(set)
    }
}

fn write_real(out: &mut String, name: &str, first: usize, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{name} {} {v:?}", first + i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn target_in_span_is_recovered() {
        let k = 20;
        let beta = HarmonicGrid::default_beta(k);
        let target: Vec<f64> = (-(k as isize)..=k as isize).map(|n| (beta * 2.0 * n as f64).cos()).collect();
        let fit = fit_mmse(&target, &HarmonicGrid::cosines(k, beta, 0..=4).unwrap()).unwrap();
        for (p, a) in fit.cos.iter().enumerate() {
            let expect = if p == 2 { 1.0 } else { 0.0 };
            assert!((a - expect).abs() < 1e-10, "a_{p} = {a}");
        }
        assert!(fit.fit_rmse < 1e-10);
    }

    #[test]
    fn grid_validation() {
        assert!(HarmonicGrid::cosines(4, 0.0, 0..=2).is_err());
        assert!(HarmonicGrid::new(4, 1.0, vec![1, 1], vec![]).is_err());
        assert!(HarmonicGrid::sines(4, 1.0, 0..=2).is_err());
        assert!(HarmonicGrid::cosines(2, 1.0, 0..=5).is_err());
        assert!(fit_mmse(&[1.0; 3], &HarmonicGrid::cosines(4, 1.0, 0..=1).unwrap()).is_err());
    }

    #[test]
    fn collinear_basis_is_degenerate() {
        // β = 2π: every cosine is identically one on integer nodes.
        let grid = HarmonicGrid::cosines(10, 2.0 * PI, 0..=2).unwrap();
        let err = fit_mmse(&[1.0; 21], &grid).unwrap_err();
        assert!(matches!(err, Error::FitDegenerate { .. }));
    }

    #[test]
    fn residual_is_orthogonal_to_basis() {
        let p = GaussianParams::new(5.0, 15).unwrap();
        let beta = 1.1 * HarmonicGrid::default_beta(15);
        let grid = HarmonicGrid::cosines(15, beta, 0..=3).unwrap();
        let target = p.sampled(GaussOrder::Smooth).taps;
        let fit = fit_mmse(&target, &grid).unwrap();
        let a = grid.design();
        let coef = DVector::from_column_slice(&fit.cos);
        let resid = DVector::from_column_slice(&target) - &a * coef;
        let norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..a.ncols() {
            assert!(a.column(j).dot(&resid).abs() < 1e-9 * norm);
        }
    }

    #[test]
    fn gram_solution_matches_svd_least_squares() {
        // Independent route: SVD of the design matrix, no normal equations.
        let p = GaussianParams::new(4.0, 12).unwrap();
        let beta = HarmonicGrid::default_beta(12);
        let grid = HarmonicGrid::cosines(12, beta, 0..=3).unwrap();
        let target = p.sampled(GaussOrder::Smooth).taps;
        let fit = fit_mmse(&target, &grid).unwrap();
        let a = grid.design();
        let t = DVector::from_column_slice(&target);
        let svd_coef = a.clone().svd(true, true).solve(&t, 1e-14).unwrap();
        let r_svd = (&t - &a * &svd_coef).norm();
        let r_gram = (&t - &a * DVector::from_column_slice(&fit.cos)).norm();
        assert!((r_svd - r_gram).abs() < 1e-10);
        for (x, y) in svd_coef.iter().zip(&fit.cos) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn residual_does_not_grow_with_order() {
        let p = GaussianParams::new(10.0, 30).unwrap();
        let beta = HarmonicGrid::default_beta(30);
        let mut last = f64::INFINITY;
        for order in 0..8 {
            let r = fit_gauss(&p, GaussOrder::Smooth, order, beta).unwrap().fit_rmse;
            assert!(r <= last * (1.0 + 1e-12), "P={order}: {r} > {last}");
            last = r;
        }
    }

    #[test]
    fn tuned_beta_improves_with_order() {
        let p = GaussianParams::new(70.0, 256).unwrap();
        let (b3, s3) = tune_beta(&p, 3).unwrap();
        let (_, s5) = tune_beta(&p, 5).unwrap();
        let base = HarmonicGrid::default_beta(256);
        assert!(b3 >= 0.5 * base && b3 <= 1.5 * base);
        let e3 = gaussian_fit_error(&s3, &p, GaussOrder::Smooth);
        let e5 = gaussian_fit_error(&s5, &p, GaussOrder::Smooth);
        assert!(e5 <= e3);
        // deterministic
        assert_eq!(tune_beta(&p, 3).unwrap().0, b3);
    }

    #[test]
    fn table_one_cells_at_tuned_smoothing_size() {
        let (params, _, s4) = tune_sigma_and_beta(256, 4).unwrap();
        let e4 = gaussian_fit_error(&s4, &params, GaussOrder::Smooth);
        assert!(e4 <= 0.05, "P=4: {e4}");
        let (params, _, s3) = tune_sigma_and_beta(256, 3).unwrap();
        assert!(gaussian_fit_error(&s3, &params, GaussOrder::Smooth) <= 0.20);
        let (params, _, s6) = tune_sigma_and_beta(256, 6).unwrap();
        assert!(gaussian_fit_error(&s6, &params, GaussOrder::Smooth) <= 0.003);
    }

    #[test]
    fn multiply_coefficients_are_symmetric() {
        let m = MorletParams::new(60.0, 10.0, 180).unwrap();
        let set = fit_morlet_multiply(&m, 3, HarmonicGrid::default_beta(180)).unwrap();
        let Coefficients::MorletMultiply(a) = &set.coefficients else { unreachable!() };
        assert_eq!(set.a_prime(0), Some(a[0]));
        for p in 1..=3 {
            assert_eq!(set.a_prime(p), set.a_prime(-p));
            assert_eq!(set.a_prime(p), Some(a[p as usize] / 2.0));
        }
        assert_eq!(set.a_prime(4), None);
    }

    #[test]
    fn direct_fit_near_truncation_error() {
        let m = MorletParams::new(60.0, 10.0, 196).unwrap();
        let (_, set) = select_optimal_ps(&m, 6).unwrap();
        let direct = morlet_fit_error(&set, &m);
        let trunc = MorletParams::with_default_width(60.0, 10.0).unwrap();
        let k = trunc.half_width() as isize;
        let truth: Vec<Complex64> = (-5 * k..=5 * k).map(|n| trunc.morlet(n as f64)).collect();
        let truncated = relative_rmse(&trunc.sampled().padded(-5 * k, 5 * k), &truth).unwrap();
        assert!(direct <= 1.5 * truncated, "direct {direct}, truncated {truncated}");
    }

    #[test]
    fn kappa_is_negligible_at_large_xi() {
        let m = MorletParams::new(60.0, 20.0, 180).unwrap();
        let beta = HarmonicGrid::default_beta(180);
        let with = fit_morlet_direct(&m, 10, 6, beta, 0).unwrap();
        // The same fit against a carrier without the κ term.
        let k = 180isize;
        let re: Vec<f64> = (-k..=k).map(|n| m.amplitude() * m.envelope(n as f64) * (m.carrier() * n as f64).cos()).collect();
        let plain = fit_mmse(&re, &HarmonicGrid::cosines(180, beta, 10..16).unwrap()).unwrap();
        let Coefficients::MorletDirect { m: mc, .. } = &with.coefficients else { unreachable!() };
        for (a, b) in mc.iter().zip(&plain.cos) {
            assert!((a.re - b).abs() < 1e-8);
        }
    }

    #[test]
    fn optimal_first_order_examples() {
        let m = MorletParams::new(60.0, 1.0, 180).unwrap();
        assert_eq!(select_optimal_ps(&m, 6).unwrap().0, 0);
        for xi in [6.0, 9.0, 12.0] {
            let m = MorletParams::new(60.0, xi, 180).unwrap();
            let centre = xi * 180.0 / (PI * 60.0) - 3.0;
            let ps = select_optimal_ps(&m, 6).unwrap().0 as f64;
            assert!((ps - centre).abs() <= 2.0, "xi={xi}: P_S={ps}, centre={centre}");
        }
    }

    #[test]
    fn optimal_first_order_beats_zero_at_large_xi() {
        let m = MorletParams::new(60.0, 16.0, 180).unwrap();
        let beta = HarmonicGrid::default_beta(180);
        let (ps, best) = select_optimal_ps(&m, 6).unwrap();
        assert!(ps > 0);
        let zero = fit_morlet_direct(&m, 0, 6, beta, 0).unwrap();
        assert!(morlet_fit_error(&best, &m) < morlet_fit_error(&zero, &m));
    }

    #[test]
    fn record_rejects_garbage() {
        assert!(CoefficientSet::from_record("").is_err());
        assert!(CoefficientSet::from_record("sftwave-coefficients 2\nkind gauss-cos").is_err());
        let ok = "sftwave-coefficients 1\nkind gauss-cos\nhalf_width 4\nbeta 0.7\nsigma 1.5\nshift 0\nfit_rmse 0\na 0 0.5\na 2 0.1\n";
        assert!(CoefficientSet::from_record(ok).is_err());
    }

    fn arb_set() -> impl Strategy<Value = CoefficientSet> {
        let reals = prop::collection::vec(-1e3f64..1e3, 1..8);
        let cplx = prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..8);
        (0u8..5, reals, cplx, 0u32..20, 1usize..500, 1e-3f64..10.0, 0usize..9, 0.0f64..100.0).prop_map(
            |(kind, r, c, first, k, beta, shift, rmse)| {
                let cs: Vec<Complex64> = c.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
                let coefficients = match kind {
                    0 => Coefficients::GaussCos(r),
                    1 => Coefficients::GaussDerivSin(r),
                    2 => Coefficients::GaussDeriv2Cos(r),
                    3 => Coefficients::MorletMultiply(r),
                    _ => Coefficients::MorletDirect { first_order: first, m: cs.clone(), l: cs.iter().map(|z| z * 0.5).collect() },
                };
                let xi = matches!(kind, 3 | 4).then_some(beta * 3.0);
                CoefficientSet { coefficients, half_width: k, beta, sigma: beta * 7.0, xi, shift, fit_rmse: rmse }
            },
        )
    }

    proptest! {
        #[test]
        fn record_round_trips_exactly(set in arb_set()) {
            let text = set.to_record();
            prop_assert_eq!(CoefficientSet::from_record(&text).unwrap(), set);
        }
    }
}
