use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use irdf_core::closed_form::{BecModel, BscModel, ExampleModel};
use irdf_core::distortion::{is_subadditive_sample, DistortionMatrix, DistortionSpec, FTransform};
use irdf_core::operational::{best_code_search, code_count, Criterion, ENUMERATION_LIMIT};
use irdf_core::solver::{IndirectProblem, SlopePoint, SolverConfig};
use irdf_core::source::{JointSource, SourceFile};

#[derive(Parser)]
#[command(
    name = "irdf",
    version,
    about = "Indirect rate-distortion under f-separable distortion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the iRDF curve with the Blahut-Arimoto solver.
    Curve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Evaluate the iRDF at one distortion level.
    Point {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(id = "level", long = "D", alias = "d", allow_negative_numbers = true)]
        level: f64,
    },
    /// Closed-form curve for the built-in binary models.
    ClosedForm {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Compare the solver against the closed form over a grid.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 40)]
        points: usize,
        /// Largest tolerated deviation in nats.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive search over short block codes.
    Brute {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
        m: Vec<usize>,
        /// Minimize the excess probability at this level instead of the average.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random sub-additivity test of the f-separable distortion.
    Subadd {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Bsc,
    Bec,
}

#[derive(Args)]
struct ModelArgs {
    /// Built-in binary model, ignored when --source is given.
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long, default_value_t = 0.15)]
    beta: f64,
    #[arg(long, default_value_t = 0.4)]
    delta: f64,
    /// JSON source description.
    #[arg(long)]
    source: Option<PathBuf>,
    /// identity, sqrt, quadratic, power:p, shifted_cubic:a, exponential:rho, or JSON.
    #[arg(long)]
    f: Option<FTransform>,
    /// hamming or a JSON matrix descriptor.
    #[arg(long)]
    distortion: Option<DistortionSpec>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    convergence_tol: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            convergence_tol: self.convergence_tol,
            ..SolverConfig::default()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
    Value,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Report rates in bits.
    #[arg(long)]
    bits: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Model {
    source: JointSource,
    distortion: DistortionMatrix,
    f: FTransform,
    example: Option<ExampleModel>,
}

impl ModelArgs {
    fn build(&self) -> anyhow::Result<Model> {
        if let Some(path) = &self.source {
            let file = SourceFile::load(path)
                .with_context(|| format!("loading source {}", path.display()))?;
            let source = file.source()?;
            let xhat = file.xhat_alphabet();
            let distortion = match &self.distortion {
                Some(spec) => spec.build(source.x_alphabet().size(), xhat.size())?,
                None => file.distortion()?,
            };
            let f = self
                .f
                .clone()
                .or_else(|| file.f.clone())
                .unwrap_or_default();
            return Ok(Model {
                source,
                distortion,
                f,
                example: None,
            });
        }
        let f = self.f.clone().unwrap_or_default();
        let example = match self.model.unwrap_or(ModelKind::Bsc) {
            ModelKind::Bsc => ExampleModel::Bsc(BscModel::new(self.beta, f.clone())?),
            ModelKind::Bec => ExampleModel::Bec(BecModel::new(self.delta, f.clone())?),
        };
        let source = example.source();
        let distortion = match &self.distortion {
            Some(spec) => spec.build(2, 2)?,
            None => example.distortion(),
        };
        let example = (self.distortion.is_none() || distortion == DistortionMatrix::hamming(2, 2))
            .then_some(example);
        Ok(Model {
            source,
            distortion,
            f,
            example,
        })
    }
}

#[derive(Serialize)]
struct Row {
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "f_of_D")]
    f_of_d: f64,
    rate_nats: f64,
    rate_bits: f64,
    slope_s: f64,
    converged: bool,
}

impl Row {
    fn from_point(p: &SlopePoint, f: &FTransform) -> Self {
        Self::new(
            p.distortion,
            f.apply(p.distortion),
            p.rate,
            p.s,
            p.converged,
        )
    }

    fn new(d: f64, f_of_d: f64, rate_nats: f64, slope_s: f64, converged: bool) -> Self {
        Self {
            d,
            f_of_d,
            rate_nats,
            rate_bits: rate_nats / LN_2,
            slope_s,
            converged,
        }
    }

    fn rate(&self, bits: bool) -> f64 {
        if bits {
            self.rate_bits
        } else {
            self.rate_nats
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn render(rows: &[Row], format: Format, bits: bool) -> anyhow::Result<String> {
    let mut s = String::new();
    match format {
        Format::Csv => {
            s.push_str("D,f_of_D,rate_nats,rate_bits,slope_s,converged\n");
            for r in rows {
                writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    num(r.d),
                    num(r.f_of_d),
                    num(r.rate_nats),
                    num(r.rate_bits),
                    num(r.slope_s),
                    r.converged
                )?;
            }
        }
        Format::Json => {
            s = serde_json::to_string_pretty(rows)?;
            s.push('\n');
        }
        Format::Value => {
            for r in rows {
                writeln!(s, "{}", r.rate(bits))?;
            }
        }
        Format::Svg => s = svg(rows, bits),
    }
    Ok(s)
}

fn svg(rows: &[Row], bits: bool) -> String {
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let xs = rows.iter().map(|r| r.d);
    let ys = rows.iter().map(|r| r.rate(bits));
    let (x0, x1) = (
        xs.clone().fold(f64::INFINITY, f64::min),
        xs.fold(f64::NEG_INFINITY, f64::max),
    );
    let y1 = ys.fold(0.0, f64::max);
    let sx = if x1 > x0 {
        (w - 2.0 * pad) / (x1 - x0)
    } else {
        0.0
    };
    let sy = if y1 > 0.0 { (h - 2.0 * pad) / y1 } else { 0.0 };
    let pts: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{:.3},{:.3}",
                pad + (r.d - x0) * sx,
                h - pad - r.rate(bits) * sy
            )
        })
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"{}\"/>\n</svg>\n",
        pts.join(" ")
    )
}

fn emit(text: &str, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(&text, out)
}

/// Exit status chosen by the command.
enum Outcome {
    Ok,
    NotConverged,
    Failed,
}

fn grid(d_min: f64, d_max: f64, points: usize) -> anyhow::Result<Vec<f64>> {
    if points < 2 {
        bail!("a curve needs at least two points");
    }
    let span = d_max - d_min;
    Ok((1..=points)
        .map(|i| {
            if i == points {
                d_max
            } else {
                d_min + span * i as f64 / points as f64
            }
        })
        .collect())
}

fn converged_outcome(all: bool) -> Outcome {
    if all {
        Outcome::Ok
    } else {
        eprintln!("warning: the solver did not converge at every point");
        Outcome::NotConverged
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Curve {
            model,
            solver,
            output,
            points,
        } => {
            let m = model.build()?;
            let problem = IndirectProblem::new(&m.source, &m.distortion, &m.f)?;
            let curve = problem.sweep(points, &solver.config())?;
            let rows: Vec<Row> = curve
                .points
                .iter()
                .map(|p| Row::from_point(p, &m.f))
                .collect();
            let text = render(&rows, output.format.unwrap_or(Format::Csv), output.bits)?;
            emit(&text, output.out.as_ref())?;
            Ok(converged_outcome(curve.all_converged()))
        }
        Command::Point {
            model,
            solver,
            output,
            level: distortion,
        } => {
            let m = model.build()?;
            let problem = IndirectProblem::new(&m.source, &m.distortion, &m.f)?;
            let p = problem.solve_at_distortion(distortion, &solver.config())?;
            if p.above_max {
                let (_, d_max) = problem.distortion_bounds()?;
                eprintln!("warning: D = {distortion} exceeds D_max = {d_max}; the rate is 0");
            }
            let mut row = Row::from_point(&p, &m.f);
            row.d = distortion;
            row.f_of_d = m.f.apply(distortion);
            let text = render(&[row], output.format.unwrap_or(Format::Value), output.bits)?;
            emit(&text, output.out.as_ref())?;
            Ok(converged_outcome(p.converged))
        }
        Command::ClosedForm {
            model,
            output,
            points,
        } => {
            let m = model.build()?;
            let example = m.example.ok_or_else(|| {
                anyhow!("closed forms exist only for --model bsc|bec with Hamming distortion")
            })?;
            let (lo, hi) = irdf_core::closed_form::domain_bounds_examples(&example)?;
            let mut rows = Vec::with_capacity(points);
            for d in grid(lo, hi, points)? {
                let r = example.rate(d)?;
                rows.push(Row::new(d, m.f.apply(d), r.rate, r.slope, true));
            }
            let text = render(&rows, output.format.unwrap_or(Format::Csv), output.bits)?;
            emit(&text, output.out.as_ref())?;
            Ok(Outcome::Ok)
        }
        Command::Verify {
            model,
            solver,
            points,
            tol,
            out,
        } => {
            let m = model.build()?;
            let example = m
                .example
                .ok_or_else(|| anyhow!("verify needs --model bsc|bec with Hamming distortion"))?;
            let problem = IndirectProblem::new(&m.source, &m.distortion, &m.f)?;
            let curve = problem.sweep(points, &solver.config())?;
            let mut max_dev: f64 = 0.0;
            let mut worst_d = f64::NAN;
            for p in &curve.points {
                let dev = (p.rate - example.rate(p.distortion)?.rate).abs();
                if dev > max_dev {
                    max_dev = dev;
                    worst_d = p.distortion;
                }
            }
            #[derive(Serialize)]
            struct Report {
                points: usize,
                max_deviation_nats: f64,
                worst_distortion: f64,
                tol: f64,
                converged: bool,
                pass: bool,
            }
            let pass = max_dev <= tol;
            let report = Report {
                points: curve.points.len(),
                max_deviation_nats: max_dev,
                worst_distortion: worst_d,
                tol,
                converged: curve.all_converged(),
                pass,
            };
            eprintln!(
                "max deviation {max_dev:e} nats over {} points",
                report.points
            );
            emit_json(&report, out.as_ref())?;
            if !pass {
                return Ok(Outcome::Failed);
            }
            Ok(converged_outcome(report.converged))
        }
        Command::Brute {
            model,
            solver,
            n,
            m: ms,
            threshold,
            out,
        } => {
            let m = model.build()?;
            let problem = IndirectProblem::new(&m.source, &m.distortion, &m.f)?;
            let criterion = match threshold {
                Some(t) => Criterion::Excess { threshold: t },
                None => Criterion::Average,
            };
            #[derive(Serialize)]
            struct Entry {
                n: usize,
                m: usize,
                rate_nats: f64,
                avg_distortion: f64,
                excess_prob: Option<f64>,
                reference_distortion: f64,
                encoder: Vec<usize>,
                decoder: Vec<Vec<usize>>,
            }
            let mut entries = Vec::new();
            for &bn in &n {
                for &bm in &ms {
                    let count =
                        code_count(m.source.z_alphabet().size(), m.distortion.cols(), bn, bm);
                    if count > ENUMERATION_LIMIT {
                        eprintln!("skipping n = {bn}, M = {bm}: {count:e} codes");
                        continue;
                    }
                    let (code, eval) =
                        best_code_search(&m.source, &m.distortion, &m.f, bn, bm, criterion)?;
                    let rate = code.rate();
                    let reference = problem.distortion_at_rate(rate, &solver.config())?;
                    entries.push(Entry {
                        n: bn,
                        m: bm,
                        rate_nats: rate,
                        avg_distortion: eval.avg_distortion,
                        excess_prob: threshold.map(|_| eval.excess_prob),
                        reference_distortion: reference.distortion,
                        encoder: code.encoder,
                        decoder: code.decoder,
                    });
                }
            }
            emit_json(&entries, out.as_ref())?;
            Ok(Outcome::Ok)
        }
        Command::Subadd {
            model,
            trials,
            n,
            seed,
            out,
        } => {
            let m = model.build()?;
            let report = is_subadditive_sample(&m.f, &m.distortion, trials, n, seed)?;
            emit_json(&report, out.as_ref())?;
            Ok(Outcome::Ok)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<irdf_core::Error>() {
        Some(irdf_core::Error::Domain(_) | irdf_core::Error::OutOfRange { .. }) => 2,
        _ => 1,
    }
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("IRDF_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("IRDF_THREADS = {v:?}"))?;
        if n == 0 {
            bail!("IRDF_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| run(cli));
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Ok(Outcome::NotConverged) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
