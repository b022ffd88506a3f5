use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bellcert::bell::{builtin_expression, BellExpression};
use bellcert::entanglement::certify_entanglement;
use bellcert::experiments::io::{parse_correlation, parse_expression, parse_nondegeneracy_certificate, parse_spec, read_text, write_text};
use bellcert::experiments::{
    linear_grid, positivity_threshold, sweep_csv, sweep_with, to_json, MeasurementSource, NoiseKind, Shots, SimulationSpec,
    Simulator, StateSource,
};
use bellcert::nondegeneracy::{certify_nondegeneracy, NondegeneracyCertificate};
use bellcert::tsirelson::{seesaw, SeesawConfig};
use bellcert::{Error, Result};

#[derive(Parser)]
#[command(name = "bellcert", version, about = "Bell-inequality nondegeneracy and entanglement bounds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 50)]
    restarts: usize,
    #[arg(long, global = true, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// No progress or summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Nondegeneracy certificate from seesaw estimates of C(I,d,1) and C(I,d,2).
    Certify {
        /// Builtin name or expression JSON file.
        expr: String,
        #[arg(long)]
        dim: usize,
    },
    /// Seesaw estimate of C(I,d,t).
    Tsirelson {
        expr: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        top: usize,
    },
    /// Entanglement bounds for an observed correlation.
    Bound {
        correlation: PathBuf,
        #[arg(long)]
        expr: String,
        #[arg(long)]
        dim: usize,
        /// Nondegeneracy certificate; computed (and cached beside --out) when absent.
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Correlation from a known state and measurements.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Emit the state and measurements along with the correlation.
        #[arg(long)]
        record: bool,
    },
    /// Noise sweep of the certified bound against the true coherent information.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        cert: Option<PathBuf>,
        /// Comma-separated noise weights; overrides --w-max/--steps.
        #[arg(long, value_delimiter = ',')]
        w_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.3)]
        w_max: f64,
        #[arg(long, default_value_t = 30)]
        steps: usize,
    },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value = "cglmp3")]
    expr: String,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Simulation spec JSON; the flags below are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// optimal_cglmp, maximally_entangled, random_pure, random_mixed or file:PATH
    #[arg(long, default_value = "optimal_cglmp")]
    state: String,
    #[arg(long, default_value_t = 0.0)]
    noise_w: f64,
    /// white or random
    #[arg(long, default_value = "white")]
    noise: String,
    /// optimal, random or file:PATH
    #[arg(long, default_value = "optimal")]
    measurements: String,
    /// exact or a shot count per setting pair
    #[arg(long, default_value = "exact")]
    shots: String,
}

impl Common {
    fn seesaw(&self) -> SeesawConfig {
        SeesawConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            ..SeesawConfig::default()
        }
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => write_text(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn json_only(&self) -> Result<()> {
        if self.format == Some(Format::Csv) {
            return Err(Error::InvalidArgument("csv output is only available for sweep".into()));
        }
        Ok(())
    }
}

fn resolve_expr(name: &str) -> Result<BellExpression> {
    let path = Path::new(name);
    if path.is_file() {
        parse_expression(&read_text(path)?)
    } else {
        builtin_expression(name)
    }
}

fn with_path(value: &str, what: &str) -> Result<Option<PathBuf>> {
    match value.strip_prefix("file:") {
        Some(p) if !p.is_empty() => Ok(Some(PathBuf::from(p))),
        Some(_) => Err(Error::BadSpec(format!("{what} file: needs a path"))),
        None => Ok(None),
    }
}

impl SimArgs {
    fn spec(&self, seed: u64) -> Result<SimulationSpec> {
        if let Some(p) = &self.spec {
            return parse_spec(&read_text(p)?);
        }
        let state = match with_path(&self.state, "state")? {
            Some(p) => StateSource::File(p),
            None => match self.state.as_str() {
                "optimal_cglmp" => StateSource::OptimalCglmp,
                "maximally_entangled" => StateSource::MaximallyEntangled,
                "random_pure" => StateSource::RandomPure,
                "random_mixed" => StateSource::RandomMixed,
                other => return Err(Error::BadSpec(format!("unknown state `{other}`"))),
            },
        };
        let measurement_source = match with_path(&self.measurements, "measurement")? {
            Some(p) => MeasurementSource::File(p),
            None => match self.measurements.as_str() {
                "optimal" => MeasurementSource::Optimal,
                "random" => MeasurementSource::Random,
                other => return Err(Error::BadSpec(format!("unknown measurement source `{other}`"))),
            },
        };
        let noise = match self.noise.as_str() {
            "white" => NoiseKind::White,
            "random" => NoiseKind::Random,
            other => return Err(Error::BadSpec(format!("unknown noise kind `{other}`"))),
        };
        let spec = SimulationSpec {
            state,
            noise_w: self.noise_w,
            noise,
            measurement_source,
            shots: self.shots.parse::<Shots>()?,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn load_certificate(path: &Path, expr: &BellExpression, d: usize) -> Result<NondegeneracyCertificate> {
    let cert = parse_nondegeneracy_certificate(&read_text(path)?)?;
    if cert.d != d || cert.name != expr.name() {
        return Err(Error::InvalidArgument(format!(
            "certificate {} is for {}/d={}, not {}/d={d}",
            path.display(),
            cert.name,
            cert.d,
            expr.name()
        )));
    }
    Ok(cert)
}

/// Given certificate, else the cache beside `--out`, else a fresh computation.
fn obtain_certificate(common: &Common, given: Option<&Path>, expr: &BellExpression, d: usize) -> Result<NondegeneracyCertificate> {
    if let Some(p) = given {
        return load_certificate(p, expr, d);
    }
    let cache = common.out.as_ref().map(|o| {
        let mut s = o.clone().into_os_string();
        s.push(".cert.json");
        PathBuf::from(s)
    });
    if let Some(c) = cache.as_ref().filter(|c| c.is_file()) {
        if let Ok(cert) = load_certificate(c, expr, d) {
            common.note(&format!("using cached certificate {}", c.display()));
            return Ok(cert);
        }
    }
    common.note(&format!("computing nondegeneracy certificate for {} at d = {d}", expr.name()));
    let cert = certify_nondegeneracy(expr, d, &common.seesaw())?;
    if let Some(c) = cache {
        write_text(&c, &to_json(&cert)?)?;
    }
    Ok(cert)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    family: String,
    expression: &'a str,
    d: usize,
    c_q: f64,
    eps1_max: f64,
    positivity_threshold: Option<f64>,
    rows: &'a [bellcert::experiments::SweepRow],
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Certify { expr, dim } => {
            common.json_only()?;
            let e = resolve_expr(expr)?;
            let cert = certify_nondegeneracy(&e, *dim, &common.seesaw())?;
            common.note(&format!(
                "c_q = {:.6}, C(I,{dim},2) = {:.6}, nondegenerate = {}",
                cert.c_q, cert.c2, cert.nondegenerate
            ));
            common.emit(&to_json(&cert)?)
        }
        Command::Tsirelson { expr, dim, top } => {
            common.json_only()?;
            let e = resolve_expr(expr)?;
            let est = seesaw(&e, *dim, *top, &common.seesaw())?;
            common.note(&format!("C({},{dim},{top}) >= {:.10} ({})", e.name(), est.value, est.kind));
            common.emit(&to_json(&est)?)
        }
        Command::Bound { correlation, expr, dim, cert } => {
            common.json_only()?;
            let e = resolve_expr(expr)?;
            let c = parse_correlation(&read_text(correlation)?)?;
            let nd = obtain_certificate(common, cert.as_deref(), &e, *dim)?;
            let ent = certify_entanglement(&c, &e, &nd, *dim)?;
            match ent.ic_lower_ebits {
                Some(v) => common.note(&format!("coherent information >= {v:.6} ebits (certified: {})", ent.certified)),
                None => common.note("no bound: violation outside the certificate's range"),
            }
            common.emit(&to_json(&ent)?)
        }
        Command::Simulate { sim, record } => {
            common.json_only()?;
            let e = resolve_expr(&sim.expr)?;
            let spec = sim.spec(common.seed)?;
            let rec = Simulator::new(&spec, &e, sim.dim, &common.seesaw())?.run(spec.noise_w, spec.seed)?;
            common.note(&format!("violation = {:.10}", rec.violation));
            if *record {
                common.emit(&to_json(&rec)?)
            } else {
                common.emit(&to_json(&rec.correlation)?)
            }
        }
        Command::Sweep {
            sim,
            cert,
            w_grid,
            w_max,
            steps,
        } => {
            let e = resolve_expr(&sim.expr)?;
            let spec = sim.spec(common.seed)?;
            let grid = match w_grid {
                Some(g) => g.clone(),
                None => linear_grid(*w_max, *steps),
            };
            let nd = obtain_certificate(common, cert.as_deref(), &e, sim.dim)?;
            let simulator = Simulator::new(&spec, &e, sim.dim, &common.seesaw())?;
            let rows = sweep_with(&simulator, &nd, &grid)?;
            let threshold = positivity_threshold(&rows);
            let family = format!("{:?} noise on {:?}, shots {:?}", spec.noise, spec.state, spec.shots).to_lowercase();
            common.note(&format!(
                "family: {family}; c_q = {:.6}, eps1_max = {:.6}, positive up to gap {}",
                nd.c_q,
                nd.eps1_max,
                threshold.map_or("(none)".to_string(), |t| format!("{t:.6}"))
            ));
            match common.format.unwrap_or(Format::Csv) {
                Format::Csv => common.emit(&sweep_csv(&rows)),
                Format::Json => common.emit(&to_json(&SweepReport {
                    family,
                    expression: e.name(),
                    d: sim.dim,
                    c_q: nd.c_q,
                    eps1_max: nd.eps1_max,
                    positivity_threshold: threshold,
                    rows: &rows,
                })?),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
