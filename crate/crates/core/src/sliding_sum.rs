//! Log-depth sliding sums `h[n] = Σ_{k=0}^{L-1} f[n+k]`.
//!
//! Both variants run as bulk-synchronous rounds: each round reads the arrays
//! of the previous round and writes fresh ones, so a round can be split over
//! any number of workers without changing a single bit of the result.
//!
//! * [`SlidingSumVariant::Flat`] doubles a running block sum `g` each round
//!   and folds it into `h` when the corresponding bit of `L` is set.
//! * [`SlidingSumVariant::Blocked8`] processes three bits per stage inside
//!   `(16, 8)` tiles, then regroups rows by eight so that the next stage sees
//!   sums of `8^s` consecutive samples as neighbouring rows.

use std::fmt::Write as _;
use std::ops::Add;

use num_complex::Complex64;
use num_traits::Zero;

use crate::engine::{self, Components, Real, SftConfig, Strategy};
use crate::error::{invalid, Result};
use crate::exec::{self, Workers};
use crate::kernels::default_half_width;
use crate::signal::{Precision, Signal};

/// Element of a sliding sum.
pub trait Summand: Copy + Send + Sync + Zero + Add<Output = Self> {}
impl<T> Summand for T where T: Copy + Send + Sync + Zero + Add<Output = T> {}

/// Tile shape `(x threads, y threads)` of a [`SlidingSumVariant::Blocked8`] block.
pub const BLOCK_SHAPE: (usize, usize) = (16, 8);

/// `⌊m / 2^r⌋ mod 2`.
pub fn bit(m: usize, r: u32) -> usize {
    m.checked_shr(r).unwrap_or(0) & 1
}

/// `R` with `2^{R-1} ≤ L < 2^R`; zero for `L = 0`.
pub fn rounds_for(l: usize) -> u32 {
    usize::BITS - l.leading_zeros()
}

/// Number of base-8 digits of `L`.
pub fn octal_digits(l: usize) -> u32 {
    let mut d = 0;
    let mut v = l;
    while v > 0 {
        v /= 8;
        d += 1;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlidingSumVariant {
    #[default]
    Flat,
    Blocked8,
}

impl std::str::FromStr for SlidingSumVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "flat" => Ok(SlidingSumVariant::Flat),
            "blocked8" => Ok(SlidingSumVariant::Blocked8),
            other => Err(format!("unknown variant `{other}` (flat, blocked8)")),
        }
    }
}

impl std::fmt::Display for SlidingSumVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SlidingSumVariant::Flat => "flat",
            SlidingSumVariant::Blocked8 => "blocked8",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingSumPlan {
    pub n: usize,
    pub window: usize,
    /// `R` with `2^{R-1} ≤ L < 2^R`.
    pub rounds: u32,
    pub variant: SlidingSumVariant,
    pub block_shape: (usize, usize),
    /// Core budget `M` of the cost model.
    pub cores: usize,
    /// Smallest power of eight holding the signal (and every stage of `L`).
    pub padded_len: usize,
    /// Sinusoid orders summed per sample (one sliding sum each).
    pub orders: usize,
    /// Smoothing size the truncated-convolution comparison is priced at.
    pub sigma: f64,
}

impl SlidingSumPlan {
    pub fn new(n: usize, window: usize, variant: SlidingSumVariant) -> Result<Self> {
        if window == 0 || window > n {
            return invalid(format!("window length {window} must be in [1, {n}]"));
        }
        let mut x = octal_digits(window);
        while 8usize.pow(x) < n {
            x += 1;
        }
        Ok(SlidingSumPlan {
            n,
            window,
            rounds: rounds_for(window),
            variant,
            block_shape: BLOCK_SHAPE,
            cores: 1,
            padded_len: 8usize.pow(x),
            orders: 1,
            sigma: (window - 1) as f64 / 6.0,
        })
    }

    /// Plan for a transform with `orders` sinusoids at smoothing size σ,
    /// window `2K + 1` with `K = ceil(3σ)`.
    pub fn for_transform(n: usize, sigma: f64, orders: usize, variant: SlidingSumVariant, cores: usize) -> Result<Self> {
        let window = 2 * default_half_width(sigma) + 1;
        let mut plan = Self::new(n.max(window), window, variant)?;
        plan.n = n;
        plan.orders = orders;
        plan.sigma = sigma;
        plan.cores = cores.max(1);
        Ok(plan)
    }

    pub fn with_cores(mut self, cores: usize) -> Self {
        self.cores = cores.max(1);
        self
    }

    /// Outer driver iterations of the blocked variant.
    pub fn stages(&self) -> u32 {
        octal_digits(self.window)
    }

    /// Bulk-parallel rounds executed by the plan's variant.
    pub fn parallel_steps(&self) -> usize {
        match self.variant {
            SlidingSumVariant::Flat => self.rounds as usize,
            SlidingSumVariant::Blocked8 => 3 * self.stages() as usize,
        }
    }

    /// Per-round trace the variant would produce, without running it.
    pub fn trace(&self) -> Vec<RoundTrace> {
        match self.variant {
            SlidingSumVariant::Flat => flat_trace(self.n, self.window),
            SlidingSumVariant::Blocked8 => blocked_trace(self.padded_len, self.window),
        }
    }
}

/// One bulk-synchronous round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrace {
    /// Round index over the whole run.
    pub round: usize,
    /// Doubling distance exponent within the stage.
    pub r: u32,
    /// Bit of the (stage-local) window length deciding the fold into `h`.
    pub bit: usize,
    /// Inclusive index range updated: sample index (flat) or tile row
    /// `x_T` (blocked).
    pub active_span: (usize, usize),
    /// Scalar additions performed.
    pub adds: u64,
}

/// `round,r,bit,active_span,adds` with the span written as `lo:hi`.
pub fn trace_csv(trace: &[RoundTrace]) -> String {
    let mut out = String::from("round,r,bit,active_span,adds\n");
    for t in trace {
        let _ = writeln!(out, "{},{},{},{}:{},{}", t.round, t.r, t.bit, t.active_span.0, t.active_span.1, t.adds);
    }
    out
}

fn flat_trace(n: usize, l: usize) -> Vec<RoundTrace> {
    (0..rounds_for(l))
        .map(|r| {
            let step = 1usize << r;
            let b = bit(l, r);
            let active = n.saturating_sub(step);
            RoundTrace {
                round: r as usize,
                r,
                bit: b,
                active_span: (0, active.saturating_sub(1)),
                adds: (active * (1 + b)) as u64,
            }
        })
        .collect()
}

fn blocked_trace(padded: usize, l: usize) -> Vec<RoundTrace> {
    let (tx, ty) = BLOCK_SHAPE;
    let mut out = Vec::new();
    let mut rows = padded;
    let mut cols = 1;
    let mut len = l;
    while len > 0 {
        let blocks = rows.div_ceil(64) * cols;
        for r in 0..3 {
            let b = bit(len, r);
            let active = tx - (1 << r);
            out.push(RoundTrace {
                round: out.len(),
                r,
                bit: b,
                active_span: (0, active - 1),
                adds: (blocks * ty * active * (1 + b)) as u64,
            });
        }
        rows /= 8;
        cols *= 8;
        len /= 8;
    }
    out
}

fn check_window(n: usize, l: usize) -> Result<()> {
    if l == 0 || l > n {
        return invalid(format!("window length {l} must be in [1, {n}]"));
    }
    Ok(())
}

/// Flat doubling sliding sum; `N - L + 1` outputs in `R` rounds.
pub fn sliding_sum_flat<T: Summand>(f: &[T], l: usize) -> Result<Vec<T>> {
    Ok(sliding_sum_flat_traced(f, l, Workers::ALL)?.0)
}

pub fn sliding_sum_flat_traced<T: Summand>(f: &[T], l: usize, workers: Workers) -> Result<(Vec<T>, Vec<RoundTrace>)> {
    let n = f.len();
    check_window(n, l)?;
    let mut g = f.to_vec();
    let mut h = vec![T::zero(); n];
    let mut g_next = g.clone();
    let mut h_next = h.clone();
    let chunk = exec::chunk_len(n);
    for r in 0..rounds_for(l) {
        let step = 1usize << r;
        let fold = bit(l, r) == 1;
        let active = n.saturating_sub(step);
        {
            let (g_ref, h_ref) = (&g, &h);
            exec::fill_chunks(workers, &mut g_next, chunk, |start, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    let n_ = start + i;
                    *o = if n_ < active { g_ref[n_] + g_ref[n_ + step] } else { g_ref[n_] };
                }
            });
            if fold {
                exec::fill_chunks(workers, &mut h_next, chunk, |start, out| {
                    for (i, o) in out.iter_mut().enumerate() {
                        let n_ = start + i;
                        *o = match n_.cmp(&active) {
                            std::cmp::Ordering::Less => g_ref[n_] + h_ref[n_ + step],
                            std::cmp::Ordering::Equal => g_ref[n_],
                            std::cmp::Ordering::Greater => h_ref[n_],
                        };
                    }
                });
            }
        }
        std::mem::swap(&mut g, &mut g_next);
        if fold {
            std::mem::swap(&mut h, &mut h_next);
        }
    }
    h.truncate(n - l + 1);
    Ok((h, flat_trace(n, l)))
}

/// Blocked base-8 sliding sum over `(16, 8)` tiles.
pub fn sliding_sum_blocked8<T: Summand>(f: &[T], l: usize) -> Result<Vec<T>> {
    Ok(sliding_sum_blocked8_traced(f, l, Workers::ALL)?.0)
}

/// Stage-`s` grids hold `rows × 8^s` elements in row-major order; grid cell
/// `(j, c)` stands for the original position `8^s j + off_s(c)`, where
/// `off_s` reverses the `s` base-8 digits of `c`.
///
/// Block `(x_B, y_B)` loads `g[x_T + 8 y_T + 64 x_B][y_B]` into tile
/// `s[x_T][y_T]` for `x_T < 16`, `y_T < 8`: each tile column is eight rows of
/// its own plus the eight that follow, which is what an 8-wide sum starting
/// at any of its own rows needs. After three doubling rounds the first eight
/// tile rows are written transposed to `g'[y_T + 8 x_B][x_T + 8 y_B]`.
pub fn sliding_sum_blocked8_traced<T: Summand>(
    f: &[T],
    l: usize,
    workers: Workers,
) -> Result<(Vec<T>, Vec<RoundTrace>)> {
    let n = f.len();
    check_window(n, l)?;
    let plan = SlidingSumPlan::new(n, l, SlidingSumVariant::Blocked8)?;
    let padded = plan.padded_len;
    let mut grid: Vec<(T, T)> = vec![(T::zero(), T::zero()); padded];
    for (slot, v) in grid.iter_mut().zip(f) {
        slot.0 = *v;
    }
    let mut next = grid.clone();
    let (mut rows, mut cols, mut len) = (padded, 1usize, l);
    while len > 0 {
        let new_rows = rows / 8;
        let new_cols = cols * 8;
        let bits = [bit(len, 0) == 1, bit(len, 1) == 1, bit(len, 2) == 1];
        let src = &grid;
        let at = |row: usize, col: usize| -> (T, T) {
            if row < rows { src[row * cols + col] } else { (T::zero(), T::zero()) }
        };
        // One x_B covers new rows 8x_B..8x_B+8, i.e. a contiguous 64·cols run.
        let per_block = 64 * cols;
        let chunk = per_block * (exec::chunk_len(padded) / per_block).max(1);
        exec::fill_chunks(workers, &mut next, chunk, |start, out| {
            let first_xb = start / per_block;
            for xb in first_xb..first_xb + out.len().div_ceil(per_block) {
                for yb in 0..cols {
                    let tile = run_tile(|xt, yt| at(xt + 8 * yt + 64 * xb, yb), bits);
                    for yt in 0..8 {
                        let row = yt + 8 * xb;
                        if row >= new_rows {
                            continue;
                        }
                        for xt in 0..8 {
                            out[row * new_cols + xt + 8 * yb - start] = tile[xt][yt];
                        }
                    }
                }
            }
        });
        std::mem::swap(&mut grid, &mut next);
        rows = new_rows;
        cols = new_cols;
        len /= 8;
    }
    let stages = plan.stages();
    let mut h = vec![T::zero(); n - l + 1];
    for (idx, cell) in grid.iter().enumerate() {
        let (j, c) = (idx / cols, idx % cols);
        let pos = j * cols + digit_reverse(c, stages);
        if pos < h.len() {
            h[pos] = cell.1;
        }
    }
    Ok((h, blocked_trace(padded, l)))
}

/// Three doubling rounds on a `(16, 8)` tile of `(g, h)` pairs, double-buffered.
fn run_tile<T: Summand>(load: impl Fn(usize, usize) -> (T, T), bits: [bool; 3]) -> [[(T, T); 8]; 16] {
    let mut tile = [[(T::zero(), T::zero()); 8]; 16];
    for (xt, row) in tile.iter_mut().enumerate() {
        for (yt, cell) in row.iter_mut().enumerate() {
            *cell = load(xt, yt);
        }
    }
    for (r, fold) in bits.iter().enumerate() {
        let step = 1 << r;
        let prev = tile;
        for xt in 0..16 - step {
            for yt in 0..8 {
                let (s, t) = prev[xt][yt];
                let (s2, t2) = prev[xt + step][yt];
                tile[xt][yt] = (s + s2, if *fold { s + t2 } else { t });
            }
        }
    }
    tile
}

/// Reverses the lowest `digits` base-8 digits of `c`.
pub fn digit_reverse(c: usize, digits: u32) -> usize {
    let (mut v, mut out) = (c, 0);
    for _ in 0..digits {
        out = out * 8 + v % 8;
        v /= 8;
    }
    out
}

/// Original positions laid out as the stage-`s` grid: `layout[j][c]`.
pub fn stage_layout(n: usize, stage: u32) -> Vec<Vec<usize>> {
    let cols = 8usize.pow(stage);
    let rows = n.div_ceil(cols);
    (0..rows)
        .map(|j| (0..cols).map(|c| j * cols + digit_reverse(c, stage)).collect())
        .collect()
}

pub fn sliding_sum_with<T: Summand>(f: &[T], l: usize, variant: SlidingSumVariant, workers: Workers) -> Result<Vec<T>> {
    Ok(match variant {
        SlidingSumVariant::Flat => sliding_sum_flat_traced(f, l, workers)?.0,
        SlidingSumVariant::Blocked8 => sliding_sum_blocked8_traced(f, l, workers)?.0,
    })
}

/// Which operation count dominates the run time for a given core budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Every data point has its own core.
    Saturated,
    /// Cores are shared between `N / M` points.
    CoreBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub parallel_steps: usize,
    /// Additions performed by the planned sliding sums (all orders, real and
    /// imaginary part).
    pub total_adds: u64,
    /// SFT multiplications, `7NP`.
    pub total_mults: u64,
    /// Truncated-convolution multiplications (and additions), `N(2⌈3σ⌉+1)`.
    pub convolution_mults: u64,
    pub sft_regime: Regime,
    pub convolution_regime: Regime,
    /// Asymptotic SFT time for the regime, e.g. `O(P log2 K)`.
    pub sft_order: &'static str,
    pub convolution_order: &'static str,
}

/// Multiplications per sample and order: two to form `x e^{iωm}`, four to
/// remove the phase, one for the coefficient.
pub const SFT_MULTS_PER_SAMPLE_ORDER: u64 = 7;

pub fn sft_multiplies(n: usize, orders: usize) -> u64 {
    SFT_MULTS_PER_SAMPLE_ORDER * n as u64 * orders as u64
}

pub fn convolution_multiplies(n: usize, sigma: f64) -> u64 {
    n as u64 * (2 * default_half_width(sigma) as u64 + 1)
}

pub fn cost_model(plan: &SlidingSumPlan) -> CostReport {
    let per_sum: u64 = plan.trace().iter().map(|t| t.adds).sum();
    let conv = convolution_multiplies(plan.n, plan.sigma);
    let sft_regime = if plan.cores > plan.n { Regime::Saturated } else { Regime::CoreBound };
    let convolution_regime = if plan.cores as u64 > conv { Regime::Saturated } else { Regime::CoreBound };
    CostReport {
        parallel_steps: plan.parallel_steps(),
        total_adds: per_sum * 2 * plan.orders as u64,
        total_mults: sft_multiplies(plan.n, plan.orders),
        convolution_mults: conv,
        sft_regime,
        convolution_regime,
        sft_order: match sft_regime {
            Regime::Saturated => "O(P log2 K)",
            Regime::CoreBound => "O(N P log2 K / M)",
        },
        convolution_order: match convolution_regime {
            Regime::Saturated => "O(log2 sigma)",
            Regime::CoreBound => "O(N sigma / M)",
        },
    }
}

/// SFT components with the window sums taken by the chosen sliding-sum
/// variant. `cfg.strategy` must be the kernel integral.
pub fn sft_via_sliding_sum(sig: &Signal, cfg: &SftConfig, variant: SlidingSumVariant, workers: Workers) -> Result<Components> {
    if cfg.strategy != Strategy::KernelIntegral && cfg.strategy != Strategy::SlidingSum {
        return invalid("sliding-sum evaluation needs the kernel-integral strategy");
    }
    cfg.validate()?;
    let k = cfg.half_width;
    let ext = sig.extended_range(-(k as isize), sig.len() + 2 * k);
    Ok(match cfg.precision {
        Precision::Single => sums_to_components::<f32>(&ext, cfg, variant, workers),
        Precision::Double => sums_to_components::<f64>(&ext, cfg, variant, workers),
    })
}

fn sums_to_components<T: Real>(ext: &[f64], cfg: &SftConfig, variant: SlidingSumVariant, workers: Workers) -> Components {
    let a = engine::sliding_sum_window_sums::<T>(ext, cfg, variant, workers);
    let (c, s) = a
        .iter()
        .map(|v| {
            let v = Complex64::new(v.re.to_f64().unwrap_or(f64::NAN), v.im.to_f64().unwrap_or(f64::NAN));
            (v.re, -v.im)
        })
        .unzip();
    Components { first: 0, c, s }
}
