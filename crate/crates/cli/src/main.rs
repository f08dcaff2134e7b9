//! `hgf`: command-line front end to the laboratory.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hgf_core::data::{DataFamily, DecayParams, InitialData};
use hgf_core::decay_estimates::{envelope_scan, poisson_snapshots, verify_envelope, Envelope};
use hgf_core::geometry::{scalar_curvature, ConformalMetric};
use hgf_core::harness::{fit_exponent, resolve_workers, sweep, write_sweep_outputs, SweepConfig};
use hgf_core::io::{read_field_csv, write_breakdown_json, write_fields_csv, write_json, write_norms_csv, write_state_csv};
use hgf_core::nonlinear_solver::{energy_lemma24_diagnostic, run, RunConfig};
use hgf_core::vector_fields::commutator_suite;
use hgf_core::wave_kernel::{poisson_eval, poisson_field, QuadratureSpec};
use hgf_core::{Data, Field, Grid};

#[derive(Parser)]
#[command(name = "hgf", version, about = "Hyperbolic geometric flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct DataArgs {
    /// Built-in data (zero, one, velocity, gaussian, rational, gaussian_tail)
    /// or a TOML file with `family`, `A`, `k` and optionally `epsilon`.
    #[arg(long, default_value = "gaussian")]
    data: String,
    #[arg(long = "A", default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    /// Scale applied to the data.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
}

#[derive(clap::Args, Clone)]
struct QuadArgs {
    #[arg(long, default_value_t = 256)]
    radial_nodes: usize,
    #[arg(long, default_value_t = 256)]
    angular_nodes: usize,
}

impl QuadArgs {
    fn spec(&self) -> Result<QuadratureSpec> {
        Ok(QuadratureSpec::new(self.radial_nodes, self.angular_nodes)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FromKind {
    U,
    V,
}

#[derive(Subcommand)]
enum Command {
    /// Linear solution at one point by the Poisson formula.
    LinearEval {
        #[arg(long)]
        t: f64,
        /// Position as `x1,x2`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        x: (f64, f64),
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Linear solution on a square grid, as CSV `x1,x2,value`.
    LinearField {
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 4.0)]
        half_width: f64,
        #[arg(long, default_value_t = 65)]
        nodes: usize,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        quad: QuadArgs,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sup of |phi|/envelope along a ray for radial data.
    EnvelopeCheck {
        #[arg(long, default_value = "rational")]
        data: String,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long = "A", default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 40.0)]
        horizon: f64,
        /// Nodes on the ray `[0, 2 horizon]`.
        #[arg(long, default_value_t = 161)]
        grid: usize,
        /// Snapshots per unit time.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Commutator residuals of the seven generators over the test corpus.
    VfCheck {
        #[arg(long, default_value_t = 3.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 0.7)]
        t: f64,
    },
    /// Evolve the quasilinear equation from a TOML run configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also evaluate the perturbed energy inequality on the snapshots.
        #[arg(long)]
        energy_diagnostic: bool,
    },
    /// Scalar curvature of a snapshot CSV, as CSV `x1,x2,R`.
    Curvature {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "u")]
        from: FromKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an eps sweep and fit the life-span law.
    LifespanSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?)),
        _ => Err(format!("expected x1,x2, got {s}")),
    }
}

#[derive(Deserialize)]
struct DataFile {
    family: DataFamily,
    #[serde(flatten)]
    params: DecayParams,
}

fn family_data(family: DataFamily, amplitude: f64, k: f64, epsilon: f64) -> Result<Data> {
    let params = DecayParams::new(amplitude, k, 1.0)?;
    Ok(InitialData::from_family(family, params, epsilon)?)
}

fn load_data(args: &DataArgs) -> Result<Data> {
    let path = Path::new(&args.data);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let f: DataFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return family_data(f.family, f.params.amplitude, f.params.k, f.params.epsilon);
    }
    let eps = args.epsilon;
    Ok(match args.data.as_str() {
        "zero" => InitialData::zero(),
        "one" => InitialData::constant(eps, 0.0),
        "velocity" => InitialData::constant(0.0, eps),
        "gaussian" => InitialData::new(move |x: f64, y: f64| eps * (-(x * x + y * y)).exp(), |_, _| 0.0).with_gradient(
            move |x, y| {
                let e = eps * (-(x * x + y * y)).exp();
                [-2.0 * x * e, -2.0 * y * e]
            },
        ),
        "rational" => family_data(DataFamily::Rational, args.amplitude, args.k, args.epsilon)?,
        "gaussian_tail" => family_data(DataFamily::GaussianTail, args.amplitude, args.k, args.epsilon)?,
        other => bail!("unknown data {other:?} (and no such file)"),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct EvalRecord {
    t: f64,
    x: [f64; 2],
    value: f64,
    quad_spec: QuadratureSpec,
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::LinearEval { t, x, data, quad } => {
            let spec = quad.spec()?;
            let value = poisson_eval(t, x, &load_data(&data)?, &spec)?;
            let rec = EvalRecord { t, x: [x.0, x.1], value, quad_spec: spec };
            println!("{}", serde_json::to_string(&rec)?);
        }
        Command::LinearField { t, half_width, nodes, data, quad, out } => {
            let grid = Grid::square(half_width, nodes)?;
            let field = poisson_field(t, &grid, &load_data(&data)?, &quad.spec()?)?;
            write_fields_csv(output(out.as_deref())?, &[("value", &field)])?;
        }
        Command::EnvelopeCheck { data, k, amplitude, horizon, grid, rate, quad, out } => {
            let family = match data.as_str() {
                "rational" => DataFamily::Rational,
                "gaussian_tail" => DataFamily::GaussianTail,
                other => bail!("envelope-check needs radial family data, got {other:?}"),
            };
            if !(horizon > 0.0) || !(rate > 0.0) {
                bail!("horizon and rate must be positive");
            }
            let phi = family_data(family, amplitude, k, 1.0)?;
            let ray = Grid::ray(2.0 * horizon, grid)?;
            let n = (horizon * rate).round().max(1.0) as usize;
            let times: Vec<f64> = (1..=n).map(|i| i as f64 * horizon / n as f64).collect();
            let solution = poisson_snapshots(&phi, &times, &ray, &quad.spec()?)?;
            let env = Envelope::new(amplitude, k)?;
            let report = verify_envelope(&solution, &env)?;
            std::fs::create_dir_all(&out)?;
            write_json(&out.join("envelope_report.json"), &report)?;
            let mut w = csv::Writer::from_path(out.join("envelope.csv"))?;
            for row in envelope_scan(&solution, &env)? {
                w.serialize(row)?;
            }
            w.flush()?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::VfCheck { half_width, h, levels, t } => {
            let records = commutator_suite(half_width, h, levels, t)?;
            println!("{}", serde_json::to_string_pretty(&records)?);
        }
        Command::Simulate { config, out, energy_diagnostic } => {
            let cfg = RunConfig::from_toml_file(&config)?;
            let result = run::<f64>(&cfg)?;
            std::fs::create_dir_all(&out)?;
            for (i, s) in result.snapshots.iter().enumerate() {
                write_state_csv(&out.join(format!("snapshot_{i:04}.csv")), s)?;
            }
            write_norms_csv(&out.join("norms.csv"), &result.norms)?;
            write_breakdown_json(&out.join("breakdown.json"), &result.breakdown)?;
            // the resolved config, including the norm orders (l1, l2)
            std::fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
            if energy_diagnostic {
                write_json(&out.join("energy.json"), &energy_lemma24_diagnostic(&result.snapshots)?)?;
            }
            log::info!("{} steps, {:?}", result.steps, result.breakdown);
            println!("{}", serde_json::to_string(&result.breakdown)?);
        }
        Command::Curvature { input, from, out } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let (col, to_v): (&str, fn(f64) -> f64) = match from {
                FromKind::U => ("u", f64::exp),
                FromKind::V => ("v", |v| v),
            };
            let field: Field = match read_field_csv(file, Some(col)) {
                Ok(f) => f,
                Err(_) => read_field_csv(File::open(&input)?, None)?,
            };
            let metric = ConformalMetric::new(field.map(to_v))?;
            let r = scalar_curvature(&metric)?;
            write_fields_csv(output(out.as_deref())?, &[("R", &r)])?;
        }
        Command::LifespanSweep { config, workers, out } => {
            let cfg = SweepConfig::from_toml_file(&config)?;
            let n = resolve_workers(workers, &cfg);
            match sweep(&cfg, n) {
                Ok(records) => {
                    let fit = fit_exponent(&records)?;
                    write_sweep_outputs(&out, &records, &fit)?;
                    println!("{}", serde_json::to_string(&fit)?);
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    if !e.completed.is_empty() {
                        let fit = fit_exponent(&e.completed)?;
                        write_sweep_outputs(&out, &e.completed, &fit)?;
                    }
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
