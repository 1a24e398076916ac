use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fpsketch_cli::{commands, BenchArgs, CliError, EstimateArgs, Format, GenArgs, StreamFile};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fpsketch", version, about = "Turnstile F_p estimation and its exact oracle")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, ValueEnum)]
enum Out {
    Json,
    Csv,
}

#[derive(Copy, Clone, ValueEnum)]
enum StreamFormat {
    Auto,
    Text,
    Binary,
}

impl StreamFormat {
    fn get(self) -> Option<Format> {
        match self {
            StreamFormat::Auto => None,
            StreamFormat::Text => Some(Format::Text),
            StreamFormat::Binary => Some(Format::Binary),
        }
    }
}

#[derive(Args)]
struct Input {
    /// Stream file, `-` for stdin.
    #[arg(long)]
    stream: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    format: StreamFormat,
}

#[derive(Args)]
struct Params {
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Constant preset: `desk` (one core) or `paper` (analysis constants).
    #[arg(long, default_value = "desk")]
    profile: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate F_p of a stream.
    Estimate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        params: Params,
        /// Number of independent instances (default from delta).
        #[arg(long)]
        instances: Option<usize>,
        /// Independent repetitions with derived seeds.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Fixed-point HighEnd counters.
        #[arg(long)]
        fixed_point: bool,
        /// Skip the exact comparison.
        #[arg(long)]
        no_oracle: bool,
        #[arg(long, value_enum, default_value = "json")]
        out: Out,
    },
    /// Exact F_p and heavy hitters by direct summation.
    Oracle {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        phi: Option<f64>,
        /// Print the nonzero entries of x.
        #[arg(long)]
        vector: bool,
        /// Print the reduced vector of the first instance for these parameters.
        #[arg(long)]
        reduced: bool,
        #[arg(long, value_enum, default_value = "json")]
        out: Out,
    },
    /// Per-update latency against eps.
    Bench {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Comma-separated eps values; empty gives an empty table.
        #[arg(long, default_value = "0.2,0.1,0.05")]
        eps: String,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 1 << 20)]
        n: u64,
        #[arg(long, default_value_t = 20_000)]
        updates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "desk")]
        profile: String,
        /// Per-update polynomial evaluation baseline.
        #[arg(long)]
        horner: bool,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
    /// Write a synthetic turnstile stream.
    Gen {
        /// zipf, uniform, point or planted.
        #[arg(long, default_value = "zipf")]
        kind: String,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 100_000)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_delta: i64,
        #[arg(long, default_value_t = 1.1)]
        theta: f64,
        #[arg(long, default_value_t = 1000.0)]
        scale: f64,
        #[arg(long, default_value_t = 5)]
        heavy: usize,
        #[arg(long, default_value_t = 3000)]
        heavy_value: i64,
        #[arg(long, default_value_t = 2000)]
        light: usize,
        #[arg(long, default_value_t = 50)]
        light_max: i64,
        #[arg(long, value_enum, default_value = "text")]
        format: StreamFormat,
        /// Output file (default stdout).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert between text and binary stream files.
    Convert {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        to: StreamFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn read_input(input: &Input) -> Result<StreamFile, CliError> {
    if input.stream == Path::new("-") {
        StreamFile::read(std::io::stdin().lock(), input.format.get())
    } else {
        StreamFile::open(&input.stream, input.format.get())
    }
}

fn write_stream(file: &StreamFile, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => file.write(std::fs::File::create(p)?, format),
        None => file.write(std::io::stdout().lock(), format),
    }
}

fn emit<T: Serialize>(rows: &[T], out: Out) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    match out {
        Out::Json => {
            let mut w = stdout.lock();
            for r in rows {
                serde_json::to_writer(&mut w, r)?;
                writeln!(w)?;
            }
        }
        Out::Csv => {
            let mut w = csv::Writer::from_writer(stdout.lock());
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleCsv {
    n: u64,
    p: f64,
    fp: f64,
    support: usize,
    phi: Option<f64>,
    /// `index:sign` pairs separated by `;`.
    heavy: String,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Estimate { input, params, instances, trials, fixed_point, no_oracle, out } => {
            let file = read_input(&input)?;
            let args = EstimateArgs {
                p: params.p,
                eps: params.eps,
                delta: params.delta,
                seed: params.seed,
                instances,
                trials,
                profile: params.profile,
                fixed_point,
                oracle: !no_oracle,
            };
            let (records, status) = commands::estimate(&file, &args);
            emit(&records, out)?;
            status
        }
        Cmd::Oracle { input, params, phi, vector, reduced, out } => {
            let file = read_input(&input)?;
            let est = EstimateArgs {
                eps: params.eps,
                delta: params.delta,
                seed: params.seed,
                profile: params.profile.clone(),
                ..EstimateArgs::default()
            };
            let r = commands::oracle(&file, params.p, phi, vector, reduced.then_some(&est))?;
            match out {
                Out::Json => emit(&[r], out),
                Out::Csv => {
                    let heavy = r.heavy.iter().map(|h| format!("{}:{}", h.index, h.sign)).collect::<Vec<_>>().join(";");
                    emit(&[OracleCsv { n: r.n, p: r.p, fp: r.fp, support: r.support, phi: r.phi, heavy }], out)
                }
            }
        }
        Cmd::Bench { p, eps, delta, n, updates, seed, profile, horner, out } => {
            let eps = eps
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("bad eps {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let (rows, exponent) = commands::bench(&BenchArgs { p, eps, delta, n, updates, seed, profile, horner })?;
            emit(&rows, out)?;
            if let Some(e) = exponent {
                eprintln!("fitted exponent of mean latency in 1/eps: {e:.3}");
            }
            Ok(())
        }
        Cmd::Gen {
            kind,
            n,
            m,
            seed,
            max_delta,
            theta,
            scale,
            heavy,
            heavy_value,
            light,
            light_max,
            format,
            output,
        } => {
            let file = commands::generate(&GenArgs {
                kind,
                n,
                m,
                seed,
                max_delta,
                theta,
                scale,
                heavy,
                heavy_value,
                light,
                light_max,
            })?;
            write_stream(&file, format.get().unwrap_or(Format::Text), output.as_deref())
        }
        Cmd::Convert { input, to, output } => {
            let file = read_input(&input)?;
            let to = to.get().ok_or_else(|| CliError::Usage("--to must be text or binary".into()))?;
            write_stream(&file, to, output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpsketch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
