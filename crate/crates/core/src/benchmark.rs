//! Timing harness for the scaling comparison between SFT-based smoothing and
//! truncated convolution.

use std::fmt;
use std::fmt::Write as _;
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use crate::engine::Strategy;
use crate::error::{invalid, Error, Result};
use crate::exec::Workers;
use crate::kernels::{truncated_convolution_with, GaussOrder, GaussianParams};
use crate::signal::{make_test_signal, Precision, TestSignal};
use crate::sliding_sum::{cost_model, CostReport, SlidingSumPlan, SlidingSumVariant};
use crate::smoothers::{BetaChoice, TransformSpec};

/// Gaussian orders used by the benchmarked SFT smoother (`P = 6`, orders `0..=6`).
pub const BENCH_ORDER: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    Sft(Strategy),
    Convolution,
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchMethod::Sft(s) => write!(f, "sft-{s}"),
            BenchMethod::Convolution => f.write_str("conv"),
        }
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conv" | "truncated" => Ok(BenchMethod::Convolution),
            _ => match s.strip_prefix("sft-") {
                Some(strategy) => strategy.parse().map(BenchMethod::Sft).map_err(Error::InvalidArgument),
                None => invalid(format!("unknown bench method `{s}`")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub methods: Vec<BenchMethod>,
    pub precision: Precision,
    pub workers: Workers,
    pub repetitions: usize,
    pub warmups: usize,
    pub seed: u64,
}

impl BenchConfig {
    /// `N` from 100 to 102400 at `σ = 16`.
    pub fn length_sweep() -> Self {
        BenchConfig {
            ns: (0..11).map(|i| 100usize << i).collect(),
            sigmas: vec![16.0],
            ..Self::sigma_sweep()
        }
    }

    /// `σ` from 16 to 8192 at `N = 102400`.
    pub fn sigma_sweep() -> Self {
        BenchConfig {
            ns: vec![102_400],
            sigmas: (0..10).map(|i| 16.0 * f64::from(1u32 << i)).collect(),
            methods: vec![BenchMethod::Sft(Strategy::KernelIntegral), BenchMethod::Convolution],
            precision: Precision::Double,
            workers: Workers::ALL,
            repetitions: 5,
            warmups: 2,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 3 {
            return invalid("at least 3 repetitions are needed");
        }
        if self.ns.is_empty() || self.sigmas.is_empty() || self.methods.is_empty() {
            return invalid("empty benchmark grid");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub n: usize,
    pub sigma: f64,
    pub precision: Precision,
    pub workers: usize,
    pub median_ns: u128,
    pub ops: CostReport,
}

pub fn median(values: &mut [u128]) -> u128 {
    values.sort_unstable();
    let m = values.len() / 2;
    if values.len() % 2 == 1 { values[m] } else { (values[m - 1] + values[m]) / 2 }
}

/// Median wall time of `f` over `reps` runs after `warmups` discarded runs.
pub fn time_median<R>(warmups: usize, reps: usize, mut f: impl FnMut() -> R) -> u128 {
    for _ in 0..warmups {
        black_box(f());
    }
    let mut times: Vec<u128> = (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            black_box(f());
            t.elapsed().as_nanos()
        })
        .collect();
    median(&mut times)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for t in &idx[i..=j] {
            r[*t] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Op counts for one grid point: a flat sliding-sum plan over `P + 1` orders.
pub fn op_counts(n: usize, sigma: f64, cores: usize) -> Result<CostReport> {
    let plan = SlidingSumPlan::for_transform(n, sigma, BENCH_ORDER as usize + 1, SlidingSumVariant::Flat, cores)?;
    Ok(cost_model(&plan))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let cores = match cfg.workers.0 {
        0 => std::thread::available_parallelism().map_or(1, |c| c.get()),
        w => w,
    };
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let sig = make_test_signal(TestSignal::SeededNoise, n, cfg.seed)?;
        for &sigma in &cfg.sigmas {
            let ops = op_counts(n, sigma, cores)?;
            for &method in &cfg.methods {
                let median_ns = match method {
                    BenchMethod::Sft(strategy) => {
                        let spec = TransformSpec::gaussian(GaussOrder::Smooth, sigma, None, BENCH_ORDER, BetaChoice::Base, 0)?
                            .with_strategy(strategy)
                            .with_precision(cfg.precision);
                        let mut err = None;
                        let t = time_median(cfg.warmups, cfg.repetitions, || {
                            if let Err(e) = spec.apply_with(&sig, cfg.workers) {
                                err = Some(e);
                            }
                        });
                        if let Some(e) = err {
                            return Err(e);
                        }
                        t
                    }
                    BenchMethod::Convolution => {
                        let kernel = GaussianParams::with_default_width(sigma)?.sampled(GaussOrder::Smooth);
                        time_median(cfg.warmups, cfg.repetitions, || truncated_convolution_with(&sig, &kernel, cfg.workers))
                    }
                };
                rows.push(BenchRow { method, n, sigma, precision: cfg.precision, workers: cfg.workers.0, median_ns, ops: ops.clone() });
            }
        }
    }
    Ok(rows)
}

pub const BENCH_CSV_HEADER: &str =
    "method,N,sigma,precision,workers,median_ns,parallel_steps,total_adds,total_mults,convolution_mults";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.n,
            r.sigma,
            r.precision,
            r.workers,
            r.median_ns,
            r.ops.parallel_steps,
            r.ops.total_adds,
            r.ops.total_mults,
            r.ops.convolution_mults
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_spearman() {
        assert_eq!(median(&mut [5, 1, 3]), 3);
        assert_eq!(median(&mut [4, 1, 3, 2]), 2);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 100.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 2.0]) - 0.894_427_190_999_916).abs() < 1e-12);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [BenchMethod::Convolution, BenchMethod::Sft(Strategy::KernelIntegral), BenchMethod::Sft(Strategy::Recursive2)] {
            assert_eq!(m.to_string().parse::<BenchMethod>().unwrap(), m);
        }
        assert!("fft".parse::<BenchMethod>().is_err());
    }

    #[test]
    fn tiny_bench_runs() {
        let cfg = BenchConfig {
            ns: vec![500],
            sigmas: vec![4.0, 8.0],
            repetitions: 3,
            warmups: 1,
            workers: Workers::SEQUENTIAL,
            ..BenchConfig::sigma_sweep()
        };
        let rows = run_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert_eq!(r.ops, op_counts(r.n, r.sigma, 1).unwrap());
        }
        assert_eq!(bench_csv(&rows).lines().count(), 5);
        assert!(run_bench(&BenchConfig { repetitions: 2, ..cfg }).is_err());
    }
}
