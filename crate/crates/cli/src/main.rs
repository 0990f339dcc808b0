use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use sftwave::benchmark::{bench_csv, run_bench, spearman, BenchConfig, BenchMethod};
use sftwave::engine::{Strategy, Truncation};
use sftwave::eval::{
    morlet_rmse_sweep, reports_csv, table1_experiment, table1_reference, truncation_baseline, within_table1_band,
    MorletMethod, SweepConfig, TABLE1_HALF_WIDTH,
};
use sftwave::fourier::{
    fit_gauss, fit_morlet_direct, fit_morlet_multiply, gaussian_fit_error, morlet_fit_error, select_optimal_ps, tune_beta,
};
use sftwave::kernels::{default_half_width, truncated_convolution_with, GaussOrder, GaussianParams, MorletParams, SampledKernel};
use sftwave::signal::{make_test_signal, BoundaryPolicy, Precision, Signal, TestSignal};
use sftwave::sliding_sum::{sliding_sum_blocked8_traced, sliding_sum_flat_traced, trace_csv, SlidingSumVariant};
use sftwave::smoothers::{BetaChoice, SpecOptions, TransformSpec, Values};
use sftwave::Workers;

#[derive(Parser, Debug)]
#[command(name = "sftwave", version, about = "Gaussian smoothing and Morlet wavelet transforms by sliding Fourier transforms")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit kernel coefficients and write a coefficient record.
    Fit(FitArgs),
    /// Run a transform over a signal file or a generated signal.
    Transform(TransformArgs),
    /// Kernel errors for P = 2..6 at K = 256, plain and attenuated.
    RmseTable(OutputArgs),
    /// Per-xi Morlet kernel error with K chosen from a grid.
    MorletSweep(SweepArgs),
    /// Time SFT smoothing against truncated convolution.
    Bench(BenchArgs),
    /// Per-round trace of a sliding sum on seeded integer data.
    SlidingSumTrace(TraceArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum KernelArg {
    Gauss,
    GaussD,
    GaussDd,
    Morlet,
    MorletMultiply,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, value_enum)]
    kernel: KernelArg,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    xi: Option<f64>,
    /// Half-width; defaults to ceil(3 sigma).
    #[arg(long = "K")]
    k: Option<usize>,
    /// Highest order (Gaussian kinds, multiply method).
    #[arg(long = "P")]
    p: Option<u32>,
    /// Number of orders of the direct Morlet fit.
    #[arg(long = "PD")]
    pd: Option<u32>,
    /// Lowest order of the direct Morlet fit.
    #[arg(long = "PS")]
    ps: Option<u32>,
    #[arg(long = "auto-PS")]
    auto_ps: bool,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "tune-beta")]
    tune_beta: bool,
    /// Output shift of the attenuated direct Morlet fit.
    #[arg(long, default_value_t = 0)]
    shift: usize,
    /// Coefficient record path; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BoundaryArg {
    Zero,
    Clamp,
}

#[derive(Args, Debug)]
struct TransformArgs {
    /// Signal file, one sample per line.
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,
    /// Generated signal: impulse, constant, chirp, noise.
    #[arg(long)]
    generate: Option<TestSignal>,
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Filter name such as GDP6, MDS5P7, MMP3, GCT3.
    #[arg(long)]
    abbrev: String,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "PS")]
    ps: Option<u32>,
    /// Gaussian derivative order for GD names: 0, 1 or 2.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    derivative: u8,
    #[arg(long, default_value = "kernel")]
    strategy: Strategy,
    #[arg(long, default_value = "double")]
    precision: Precision,
    /// Subtract the state 2K+1 samples back instead of 2K.
    #[arg(long)]
    truncate_2k1: bool,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Clamp)]
    boundary: BoundaryArg,
    /// Also write the truncated-convolution output and the error against it.
    #[arg(long)]
    oracle: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    Direct,
    Multiply,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 60.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Direct)]
    method: MethodArg,
    /// P_D for the direct method, P_M for the multiply method.
    #[arg(long = "P", default_value_t = 6)]
    p: u32,
    /// Fixed P_S; scanned per K when omitted.
    #[arg(long = "PS")]
    ps: Option<u32>,
    #[arg(long, default_value_t = 0)]
    shift: usize,
    /// Comma-separated xi values; 1..20 by default.
    #[arg(long, value_delimiter = ',')]
    xi: Vec<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SweepKind {
    Sigma,
    Length,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = SweepKind::Sigma)]
    sweep: SweepKind,
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// sft-kernel, sft-rec1, sft-rec2, sft-sliding, conv.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<BenchMethod>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 2)]
    warmups: usize,
    #[arg(long, default_value = "double")]
    precision: Precision,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    #[arg(long = "L")]
    l: usize,
    #[arg(long, default_value = "flat")]
    variant: SlidingSumVariant,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn usage(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let k = a.k.unwrap_or_else(|| default_half_width(a.sigma));
    let (set, kernel_rmse, note) = match a.kernel {
        KernelArg::Gauss | KernelArg::GaussD | KernelArg::GaussDd => {
            let p = a.p.unwrap_or_else(|| usage("--P is required for Gaussian kernels"));
            let order = match a.kernel {
                KernelArg::Gauss => GaussOrder::Smooth,
                KernelArg::GaussD => GaussOrder::First,
                _ => GaussOrder::Second,
            };
            let params = GaussianParams::new(a.sigma, k)?;
            let beta = match (a.beta, a.tune_beta) {
                (Some(_), true) => usage("--beta and --tune-beta exclude each other"),
                (Some(b), false) => b,
                (None, true) => tune_beta(&params, p)?.0,
                (None, false) => std::f64::consts::PI / k as f64,
            };
            let set = fit_gauss(&params, order, p, beta)?;
            let e = gaussian_fit_error(&set, &params, order);
            (set, e, String::new())
        }
        KernelArg::Morlet | KernelArg::MorletMultiply => {
            let xi = a.xi.unwrap_or_else(|| usage("--xi is required for Morlet kernels"));
            let params = MorletParams::new(a.sigma, xi, k)?;
            let beta = a.beta.unwrap_or(std::f64::consts::PI / k as f64);
            if a.tune_beta {
                usage("--tune-beta applies to Gaussian kernels");
            }
            if a.kernel == KernelArg::MorletMultiply {
                let p = a.p.unwrap_or_else(|| usage("--P is required for the multiply method"));
                let set = fit_morlet_multiply(&params, p, beta)?;
                let e = morlet_fit_error(&set, &params);
                (set, e, String::new())
            } else {
                let pd = a.pd.unwrap_or_else(|| usage("--PD is required for the direct method"));
                let ps = match (a.ps, a.auto_ps) {
                    (Some(_), true) => usage("--PS and --auto-PS exclude each other"),
                    (Some(ps), false) => ps,
                    (None, true) => select_optimal_ps(&params.with_half_width(k), pd)?.0,
                    (None, false) => usage("--PS or --auto-PS is required for the direct method"),
                };
                let unshifted = fit_morlet_direct(&params, ps, pd, beta, 0)?;
                let e = morlet_fit_error(&unshifted, &params);
                let set = if a.shift > 0 { fit_morlet_direct(&params, ps, pd, beta, a.shift)? } else { unshifted };
                (set, e, format!("P_S={ps}\n"))
            }
        }
    };
    emit(a.output.as_deref(), &set.to_record())?;
    if a.output.is_some() {
        print!("{note}");
        println!("beta={}", set.beta);
        println!("fit_rmse_percent={}", set.fit_rmse);
        println!("kernel_rmse_percent={kernel_rmse}");
    } else {
        eprint!("{note}");
        eprintln!("kernel_rmse_percent={kernel_rmse}");
    }
    Ok(())
}

fn write_values(out: &mut String, n: usize, v: Complex64, complex: bool) {
    if complex {
        let _ = write!(out, "{n},{},{}", v.re, v.im);
    } else {
        let _ = write!(out, "{n},{}", v.re);
    }
}

fn cmd_transform(a: &TransformArgs, workers: Workers) -> Result<()> {
    let boundary = match a.boundary {
        BoundaryArg::Zero => BoundaryPolicy::Zero,
        BoundaryArg::Clamp => BoundaryPolicy::Clamp,
    };
    let sig = match (&a.input, a.generate) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Signal::parse_text(&text, boundary)?
        }
        (None, Some(kind)) => make_test_signal(kind, a.n, a.seed)?.with_boundary(boundary),
        (None, None) => usage("one of --input or --generate is required"),
    };
    let derivative = match a.derivative {
        0 => GaussOrder::Smooth,
        1 => GaussOrder::First,
        _ => GaussOrder::Second,
    };
    let opts = SpecOptions {
        sigma: a.sigma,
        xi: a.xi,
        half_width: a.k,
        first_order: a.ps,
        beta: BetaChoice::Auto,
        derivative,
    };
    let spec = TransformSpec::from_abbreviation(&a.abbrev, &opts)?
        .with_strategy(a.strategy)
        .with_precision(a.precision)
        .with_truncation(if a.truncate_2k1 { Truncation::TwoKPlusOne } else { Truncation::TwoK });
    let result = spec.apply_with(&sig, workers)?;
    let complex = matches!(result.values, Values::Complex(_));
    let values = result.values.to_complex();

    let oracle = if a.oracle {
        let truth = TransformSpec::truncated(spec.kind, a.sigma, a.xi)?;
        let kernel: SampledKernel<Complex64> = truth.effective_kernel()?;
        Some(truncated_convolution_with(&sig, &kernel, workers))
    } else {
        None
    };

    let mut out = String::from(if complex { "n,re,im" } else { "n,value" });
    if oracle.is_some() {
        out.push_str(if complex { ",oracle_re,oracle_im,rel_error" } else { ",oracle,rel_error" });
    }
    out.push('\n');
    let scale = oracle.as_ref().map(|o| o.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(f64::MIN_POSITIVE));
    let mut max_err = 0.0f64;
    for (i, v) in values.iter().enumerate() {
        write_values(&mut out, i, *v, complex);
        if let (Some(o), Some(scale)) = (&oracle, scale) {
            let err = (v - o[i]).norm() / scale;
            max_err = max_err.max(err);
            if complex {
                let _ = write!(out, ",{},{},{err}", o[i].re, o[i].im);
            } else {
                let _ = write!(out, ",{},{err}", o[i].re);
            }
        }
        out.push('\n');
    }
    emit(a.output.as_deref(), &out)?;
    let summary = format!(
        "filter={} kind={} strategy={} precision={} kernel_rmse_percent={}{}",
        spec.abbreviation,
        spec.kind,
        spec.strategy,
        spec.precision,
        spec.kernel_rmse()?,
        if oracle.is_some() { format!(" max_rel_error={max_err}") } else { String::new() }
    );
    if a.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_rmse_table(a: &OutputArgs, workers: Workers) -> Result<()> {
    let mut reports = table1_experiment(workers)?;
    let sigma = TABLE1_HALF_WIDTH as f64 / 3.0;
    reports.push(truncation_baseline(sigma, TABLE1_HALF_WIDTH)?);
    let mut misses = 0;
    for r in &reports {
        if let Some(reference) = table1_reference(r) {
            if !within_table1_band(r.relative_rmse, reference) {
                misses += 1;
                eprintln!(
                    "outside band: {} {} P={} ours={:.4} reference={}",
                    if r.is_asft() { "asft" } else { "sft" },
                    r.kind,
                    r.order,
                    r.relative_rmse,
                    reference
                );
            }
        }
    }
    emit(a.output.as_deref(), &reports_csv(&reports))?;
    eprintln!("{misses} cell(s) outside the reference band");
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, workers: Workers) -> Result<()> {
    let method = match a.method {
        MethodArg::Direct => MorletMethod::Direct { order_count: a.p, first_order: a.ps },
        MethodArg::Multiply => MorletMethod::Multiply { max_order: a.p },
    };
    let mut cfg = SweepConfig::new(a.sigma, method, a.shift);
    if !a.xi.is_empty() {
        cfg = cfg.with_xis(a.xi.clone());
    }
    let reports = morlet_rmse_sweep(&cfg, workers)?;
    emit(a.output.as_deref(), &reports_csv(&reports))
}

fn cmd_bench(a: &BenchArgs, workers: Workers) -> Result<()> {
    let mut cfg = match a.sweep {
        SweepKind::Sigma => BenchConfig::sigma_sweep(),
        SweepKind::Length => BenchConfig::length_sweep(),
    };
    if !a.n.is_empty() {
        cfg.ns = a.n.clone();
    }
    if !a.sigma.is_empty() {
        cfg.sigmas = a.sigma.clone();
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods.clone();
    }
    cfg.repetitions = a.reps;
    cfg.warmups = a.warmups;
    cfg.precision = a.precision;
    cfg.workers = workers;
    cfg.seed = a.seed;
    if cfg.repetitions < 3 {
        usage("--reps must be at least 3");
    }
    let rows = run_bench(&cfg)?;
    emit(a.output.as_deref(), &bench_csv(&rows))?;

    let sft = BenchMethod::Sft(Strategy::KernelIntegral);
    let series = |m: BenchMethod| -> Vec<(f64, f64)> {
        rows.iter().filter(|r| r.method == m).map(|r| (r.sigma, r.median_ns as f64)).collect()
    };
    if a.sweep == SweepKind::Sigma && cfg.ns.len() == 1 {
        let s = series(sft);
        let c = series(BenchMethod::Convolution);
        if s.len() > 1 {
            let (lo, hi) = s.iter().fold((f64::MAX, 0.0f64), |(l, h), (_, t)| (l.min(*t), h.max(*t)));
            eprintln!("sft max/min median over sigma: {:.3}", hi / lo);
        }
        if c.len() > 1 {
            let (x, y): (Vec<f64>, Vec<f64>) = c.iter().copied().unzip();
            eprintln!("convolution spearman(sigma, median): {:.4}", spearman(&x, &y));
        }
        if let (Some(st), Some(ct)) = (s.last(), c.last()) {
            if st.0 == ct.0 {
                eprintln!("speedup at sigma={}: {:.1}x (published: 413.6x, 0.545 ms for SFT; informational)", st.0, ct.1 / st.1);
            }
        }
    }
    Ok(())
}

fn cmd_trace(a: &TraceArgs, workers: Workers) -> Result<()> {
    let f: Vec<i64> = make_test_signal(TestSignal::SeededNoise, a.n, a.seed)?
        .samples()
        .iter()
        .map(|v| (v * 1000.0).round() as i64)
        .collect();
    let (sums, trace) = match a.variant {
        SlidingSumVariant::Flat => sliding_sum_flat_traced(&f, a.l, workers)?,
        SlidingSumVariant::Blocked8 => sliding_sum_blocked8_traced(&f, a.l, workers)?,
    };
    let brute_ok = sums.len() == a.n - a.l + 1 && sums.iter().enumerate().all(|(i, s)| *s == f[i..i + a.l].iter().sum::<i64>());
    emit(a.output.as_deref(), &trace_csv(&trace))?;
    eprintln!("rounds={} matches_brute_force={brute_ok}", trace.len());
    if !brute_ok {
        anyhow::bail!("sliding sum disagrees with brute force");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let workers = Workers(cli.workers);
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Transform(a) => cmd_transform(a, workers),
        Command::RmseTable(a) => cmd_rmse_table(a, workers),
        Command::MorletSweep(a) => cmd_sweep(a, workers),
        Command::Bench(a) => cmd_bench(a, workers),
        Command::SlidingSumTrace(a) => cmd_trace(a, workers),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sftwave::smoothers::TABLE_NAMES;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("sftwave").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_with_2() {
        for args in [
            &["fit", "--sigma", "10"][..],
            &["fit", "--kernel", "cubic", "--sigma", "10"],
            &["transform", "--abbrev", "GDP6", "--sigma", "5", "--derivative", "3"],
            &["transform", "--abbrev", "GDP6", "--sigma", "5", "--strategy", "fft"],
            &["bench", "--methods", "fft"],
            &["sliding-sum-trace"],
            &["nonsense"],
        ] {
            let err = parse(args).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{args:?}");
        }
        assert!(parse(&["fit", "--kernel", "gauss", "--sigma", "10", "--P", "3"]).is_ok());
    }

    #[test]
    fn every_table_name_runs() {
        let dir = tempfile::tempdir().unwrap();
        for name in TABLE_NAMES {
            let out = dir.path().join(format!("{name}.csv"));
            let cli = parse(&[
                "transform", "--generate", "chirp", "--N", "300", "--abbrev", name, "--sigma", "8", "--xi", "5", "-o",
                out.to_str().unwrap(),
            ])
            .unwrap();
            run(cli).unwrap();
            let text = fs::read_to_string(&out).unwrap();
            assert_eq!(text.lines().count(), 301, "{name}");
        }
    }

    #[test]
    fn bad_input_is_a_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("x.txt");
        fs::write(&input, "1.0\nNaN\n2.0\n").unwrap();
        let cli = parse(&["transform", "--input", input.to_str().unwrap(), "--abbrev", "GDP4", "--sigma", "3"]).unwrap();
        assert!(run(cli).is_err());
        let cli = parse(&["transform", "--generate", "noise", "--abbrev", "GXP4", "--sigma", "3"]).unwrap();
        assert!(run(cli).is_err());
        let cli = parse(&["fit", "--kernel", "gauss", "--sigma=-1", "--P", "3"]).unwrap();
        assert!(run(cli).is_err());
    }

    #[test]
    fn fit_record_and_oracle_output() {
        let dir = tempfile::tempdir().unwrap();
        let rec = dir.path().join("fit.txt");
        run(parse(&["fit", "--kernel", "gauss-d", "--sigma", "12", "--P", "4", "-o", rec.to_str().unwrap()]).unwrap()).unwrap();
        assert!(!fs::read_to_string(&rec).unwrap().is_empty());
        let out = dir.path().join("t.csv");
        run(parse(&[
            "transform", "--generate", "impulse", "--N", "200", "--abbrev", "MMP3", "--sigma", "6", "--xi", "4", "--oracle",
            "-o", out.to_str().unwrap(),
        ])
        .unwrap())
        .unwrap();
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("n,re,im,oracle_re,oracle_im,rel_error"));
    }
}
