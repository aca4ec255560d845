use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use circularity::data::{
    generate, load_dataset, lowess_smooth, write_dataset, GeneratorKind, GeneratorSpec,
    SmootherConfig,
};
use circularity::embedding::embed;
use circularity::energy::{default_grid, log_grid, profile_with, BandwidthObjective};
use circularity::geometry::{circularity_test, is_simple_closed_polygon, DEFAULT_EPS};
use circularity::linalg::sample_gamma;
use circularity::optimizer::{estimate_with, resolve_bounds, OptimizerConfig};
use circularity::report::{
    estimate_report, polygon_report, polygon_svg, profile_svg, verdict_report,
    write_embedding_csv, write_profile_csv, write_trace_csv, Report,
};
use circularity::{Error, OrderedDataset};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Parser)]
#[command(name = "circularity", version, about = "Bandwidth selection and circularity testing for ordered point clouds")]
struct Cli {
    /// Seed for the anchor matrix and generators.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance of the polygon test.
    #[arg(long, global = true, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, global = true)]
    sigma_min: Option<f64>,
    #[arg(long, global = true)]
    sigma_max: Option<f64>,
    /// Grid size: energy-curve samples, or the optimizer's initial scan.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Report,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Write a synthetic ordered dataset.
    Generate(GenerateArgs),
    /// Lowess-smooth every column against row order.
    Smooth(SmoothArgs),
    /// Embed at a fixed bandwidth.
    Embed(EmbedArgs),
    /// Energy and perimeter over a log-spaced bandwidth grid.
    EnergyCurve(InputArgs),
    /// Estimate the energy-minimizing bandwidth.
    Estimate(InputArgs),
    /// Decide whether the ordered data trace a circle (exit 0 accept, 1 reject).
    TestCircularity(InputArgs),
}

#[derive(Debug, Clone, Args)]
struct InputArgs {
    input: PathBuf,
    /// The input's first non-comment line is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Clone, Args)]
struct GenerateArgs {
    #[arg(long, required_unless_present = "config")]
    kind: Option<String>,
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    windings: Option<u32>,
    /// Dimension of the Gaussian cloud.
    #[arg(long)]
    dim: Option<usize>,
    /// `key = value` generator spec; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SmoothArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    degree: usize,
}

#[derive(Debug, Clone, Args)]
struct EmbedArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    sigma: f64,
}

enum Outcome {
    Done,
    Accept,
    Reject,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_)
        | Error::Parse { .. }
        | Error::RaggedRows { .. }
        | Error::NonNumericCell { .. }
        | Error::AllDegenerate
        | Error::DegenerateKernel { .. }
        | Error::RankCollapse { .. }
        | Error::DegenerateDenominator { .. }
        | Error::DegenerateObjective
        | Error::SolverDiverged { .. }
        | Error::DuplicateAnchors { .. } => 3,
        _ => 2,
    }
}

impl Cli {
    /// Flags that determine the output, rendered canonically.
    fn canonical(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        format!("{c:?}")
    }

    fn header_line(&self) -> String {
        let flags = self.canonical();
        let digest = hex::encode(Sha256::digest(flags.as_bytes()));
        format!("circularity {VERSION} seed={} digest={digest}", self.seed)
    }

    fn optimizer_config(&self) -> OptimizerConfig {
        let mut cfg = OptimizerConfig {
            seed: self.seed,
            ..OptimizerConfig::default()
        };
        if let Some(g) = self.grid {
            cfg.init_grid_size = g;
        }
        cfg
    }

    /// Bounds from the flags, with missing ends taken from the data default.
    fn bounds(&self, default: (f64, f64)) -> (f64, f64) {
        (
            self.sigma_min.unwrap_or(default.0),
            self.sigma_max.unwrap_or(default.1),
        )
    }
}

struct Sink {
    header: String,
    flags: String,
    out: Option<PathBuf>,
}

impl Sink {
    fn open(&self) -> Result<Box<dyn Write>, Error> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn hash_commented(&self, body: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<(), Error> {
        let mut w = self.open()?;
        writeln!(w, "# {}", self.header)?;
        writeln!(w, "# flags: {}", self.flags)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn svg(&self, svg: &str) -> Result<(), Error> {
        let mut w = self.open()?;
        writeln!(w, "<!-- {} -->", self.header)?;
        w.write_all(svg.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn report(&self, report: &Report) -> Result<(), Error> {
        self.hash_commented(|w| {
            w.write_all(report.render().as_bytes())?;
            Ok(())
        })
    }
}

fn load(input: &InputArgs) -> Result<OrderedDataset, Error> {
    load_dataset(&input.input, input.header)
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    if !(cli.eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be nonnegative, got {}", cli.eps)));
    }
    let sink = Sink {
        header: cli.header_line(),
        flags: cli.canonical(),
        out: cli.out.clone(),
    };
    match &cli.command {
        Command::Generate(args) => {
            let spec = generator_spec(cli, args)?;
            let data = generate(&spec)?;
            sink.hash_commented(|w| write_dataset(&data, w))?;
        }
        Command::Smooth(args) => {
            let data = load(&args.input)?;
            let cfg = SmootherConfig {
                alpha: args.alpha,
                degree: args.degree,
            };
            let smoothed = lowess_smooth(&data, &cfg)?;
            sink.hash_commented(|w| write_dataset(&smoothed, w))?;
        }
        Command::Embed(args) => {
            let data = load(&args.input)?;
            let gamma = sample_gamma(data.n(), cli.seed)?;
            let e = embed(&data, &gamma, args.sigma)?;
            if e.degenerate {
                return Err(Error::DegenerateDenominator { sigma: args.sigma });
            }
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => sink.hash_commented(|w| write_embedding_csv(&e.z, w))?,
                Format::Svg => {
                    let title = format!("Z(X, sigma = {}) seed {}", args.sigma, e.seed);
                    sink.svg(&polygon_svg(&e.z, &title))?;
                }
                Format::Report => {
                    let poly = is_simple_closed_polygon(&e.z, cli.eps)?;
                    let mut r = Report::new();
                    r.push("sigma", args.sigma).push("seed", e.seed);
                    polygon_report(&poly, &mut r);
                    sink.report(&r)?;
                }
            }
        }
        Command::EnergyCurve(input) => {
            let data = load(input)?;
            let gamma = sample_gamma(data.n(), cli.seed)?;
            let objective = BandwidthObjective::new(&data, &gamma)?;
            let default = default_grid(objective.distances());
            let (lo, hi) = cli.bounds((default.min, default.max));
            let count = cli.grid.unwrap_or(default.count);
            let spec = circularity::energy::GridSpec::new(lo, hi, count)?;
            let profile = profile_with(&objective, &log_grid(spec.min, spec.max, spec.count))?;
            if profile.usable().next().is_none() {
                return Err(Error::AllDegenerate);
            }
            match cli.format.unwrap_or(Format::Csv) {
                Format::Svg => sink.svg(&profile_svg(&profile))?,
                _ => sink.hash_commented(|w| write_profile_csv(&profile, w))?,
            }
        }
        Command::Estimate(input) => {
            let data = load(input)?;
            let gamma = sample_gamma(data.n(), cli.seed)?;
            let objective = BandwidthObjective::new(&data, &gamma)?;
            let mut cfg = resolve_bounds(&objective, &cli.optimizer_config());
            cfg.sigma_bounds = cfg.sigma_bounds.map(|b| cli.bounds(b));
            let est = estimate_with(&objective, &cfg)?;
            match cli.format.unwrap_or(Format::Report) {
                Format::Csv => sink.hash_commented(|w| write_trace_csv(&est.trace, w))?,
                Format::Svg => {
                    let sigma = est.sigma_star.unwrap_or(est.best_sigma);
                    let z = objective.embedding(sigma)?.z;
                    sink.svg(&polygon_svg(&z, &format!("Z at sigma = {sigma}")))?;
                }
                Format::Report => {
                    let mut r = Report::new();
                    r.push("seed", cli.seed);
                    estimate_report(&est, &mut r);
                    sink.report(&r)?;
                }
            }
        }
        Command::TestCircularity(input) => {
            let data = load(input)?;
            let mut cfg = cli.optimizer_config();
            if cli.sigma_min.is_some() || cli.sigma_max.is_some() {
                let gamma = sample_gamma(data.n(), cli.seed)?;
                let objective = BandwidthObjective::new(&data, &gamma)?;
                cfg.sigma_bounds = resolve_bounds(&objective, &cfg).sigma_bounds.map(|b| cli.bounds(b));
            }
            let verdict = circularity_test(&data, &cfg, cli.eps)?;
            match cli.format.unwrap_or(Format::Report) {
                Format::Svg => match &verdict.embedding {
                    Some(z) => {
                        let title = format!("Z at sigma* = {}", verdict.sigma_star.unwrap_or_default());
                        sink.svg(&polygon_svg(z, &title))?;
                    }
                    None => {
                        return Err(Error::InvalidArgument(
                            "no minimizer, so there is no embedding to draw".into(),
                        ))
                    }
                },
                Format::Csv => match &verdict.estimate {
                    Some(est) => sink.hash_commented(|w| write_trace_csv(&est.trace, w))?,
                    None => sink.hash_commented(|_| Ok(()))?,
                },
                Format::Report => {
                    let mut r = Report::new();
                    verdict_report(&verdict, &mut r);
                    sink.report(&r)?;
                }
            }
            return Ok(if verdict.accept_h0 {
                Outcome::Accept
            } else {
                Outcome::Reject
            });
        }
    }
    Ok(Outcome::Done)
}

fn generator_spec(cli: &Cli, args: &GenerateArgs) -> Result<GeneratorSpec, Error> {
    let mut spec = match &args.config {
        Some(path) => GeneratorSpec::from_key_values(&read_text(path)?)?,
        None => GeneratorSpec::new(GeneratorKind::Circle, 0),
    };
    if let Some(k) = &args.kind {
        spec.kind = k.parse()?;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(v) = args.noise {
        spec.noise = v;
    }
    if let Some(v) = args.windings {
        spec.windings = v;
    }
    if let Some(v) = args.dim {
        spec.dim = v;
    }
    if args.config.is_none() || cli.seed != 0 {
        spec.seed = cli.seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn read_text(path: &Path) -> Result<String, Error> {
    Ok(std::fs::read_to_string(path)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done | Outcome::Accept) => ExitCode::SUCCESS,
        Ok(Outcome::Reject) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
