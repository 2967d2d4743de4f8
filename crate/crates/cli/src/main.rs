use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use svlab::config::{Command, Format, ProblemConfig, RunConfig, SweepConfig, SweepOutput, SweepParameter};
use svlab::{Coefficient, Error, Geometry, Operator};

mod exec;
mod output;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SVLAB_OUT_DIR";

#[derive(Parser)]
#[command(name = "svlab", version, about = "Solvers for singular degenerate elliptic Dirichlet problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a JSON configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a command configured entirely from flags.
    Solve {
        #[arg(value_enum)]
        command: CliCommand,
        #[command(flatten)]
        problem: ProblemFlags,
        #[command(flatten)]
        sweep: SweepFlags,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliCommand {
    Oned,
    Radial,
    Scheme,
    Eigen,
    Verify,
    Sweep,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Oned => Command::Oned,
            CliCommand::Radial => Command::Radial,
            CliCommand::Scheme => Command::Scheme,
            CliCommand::Eigen => Command::Eigen,
            CliCommand::Verify => Command::Verify,
            CliCommand::Sweep => Command::Sweep,
        }
    }
}

/// Flags overriding the numeric and output blocks.
#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output formats (comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    formats: Option<Vec<CliFormat>>,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliOperator {
    Trace,
    PucciPlus,
    PucciMinus,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliGeometry {
    Interval,
    Ball,
}

#[derive(Args)]
struct ProblemFlags {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    gamma: f64,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum, default_value = "trace")]
    operator: CliOperator,
    /// Lower ellipticity constant of a Pucci operator.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Upper ellipticity constant of a Pucci operator.
    #[arg(long = "big-a", default_value_t = 1.0)]
    big_a: f64,
    /// Constant or expression in x (or r).
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    c: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    h: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    p: String,
    #[arg(long, value_enum, default_value = "interval")]
    geometry: CliGeometry,
    /// Interval length or ball radius.
    #[arg(long, default_value_t = 1.0)]
    size: f64,
}

#[derive(Args)]
struct SweepFlags {
    #[arg(long, value_enum)]
    parameter: Option<CliSweepParameter>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    solver: Option<CliCommand>,
    #[arg(long, value_enum, value_delimiter = ',')]
    outputs: Option<Vec<CliSweepOutput>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliSweepParameter {
    Alpha,
    Gamma,
    C,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliSweepOutput {
    MaxU,
    Residual,
    Lambda1,
    BoundaryExponent,
    RBar,
}

fn coefficient(name: &str, src: &str) -> Result<Coefficient, Error> {
    Coefficient::parse(src).map_err(|e| Error::Config(format!("--{name}: {e}")))
}

fn config_from_flags(command: CliCommand, pf: &ProblemFlags, sf: &SweepFlags) -> Result<RunConfig, Error> {
    let operator = match pf.operator {
        CliOperator::Trace => Operator::Trace,
        CliOperator::PucciPlus => Operator::PucciPlus { a: pf.a, big_a: pf.big_a },
        CliOperator::PucciMinus => Operator::PucciMinus { a: pf.a, big_a: pf.big_a },
    };
    let geometry = match pf.geometry {
        CliGeometry::Interval => Geometry::Interval { length: pf.size },
        CliGeometry::Ball => Geometry::Ball { radius: pf.size },
    };
    let problem = ProblemConfig {
        alpha: pf.alpha,
        gamma: pf.gamma,
        dim: pf.dim,
        operator,
        c: coefficient("c", &pf.c)?,
        h: coefficient("h", &pf.h)?,
        p: coefficient("p", &pf.p)?,
        geometry,
    };
    let mut cfg = RunConfig::new(command.into(), problem);
    if let CliCommand::Sweep = command {
        let (Some(parameter), Some(values), Some(outputs)) = (sf.parameter, sf.values.clone(), sf.outputs.clone()) else {
            return Err(Error::Config("solve sweep needs --parameter, --values and --outputs".into()));
        };
        cfg.sweep = Some(SweepConfig {
            parameter: match parameter {
                CliSweepParameter::Alpha => SweepParameter::Alpha,
                CliSweepParameter::Gamma => SweepParameter::Gamma,
                CliSweepParameter::C => SweepParameter::C,
            },
            values,
            solver: sf.solver.map(Command::from).unwrap_or(Command::Scheme),
            outputs: outputs
                .into_iter()
                .map(|o| match o {
                    CliSweepOutput::MaxU => SweepOutput::MaxU,
                    CliSweepOutput::Residual => SweepOutput::Residual,
                    CliSweepOutput::Lambda1 => SweepOutput::Lambda1,
                    CliSweepOutput::BoundaryExponent => SweepOutput::BoundaryExponent,
                    CliSweepOutput::RBar => SweepOutput::RBar,
                })
                .collect(),
        });
    }
    Ok(cfg)
}

fn apply_overrides(cfg: &mut RunConfig, common: &Common) {
    if let Some(out) = &common.out {
        cfg.output.dir = Some(out.to_string_lossy().into_owned());
    }
    if let Some(n) = common.nodes {
        cfg.numeric.nodes = n;
    }
    if let Some(t) = common.tol {
        cfg.numeric.tol = t;
    }
    if let Some(s) = common.seed {
        cfg.numeric.seed = s;
    }
    if let Some(f) = &common.formats {
        cfg.output.formats = f
            .iter()
            .map(|f| match f {
                CliFormat::Csv => Format::Csv,
                CliFormat::Json => Format::Json,
            })
            .collect();
    }
}

fn load(cmd: &Cmd) -> Result<(RunConfig, usize), Error> {
    let (mut cfg, common) = match cmd {
        Cmd::Run { config, common } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            (RunConfig::from_json(&text)?, common)
        }
        Cmd::Solve {
            command,
            problem,
            sweep,
            common,
        } => (config_from_flags(*command, problem, sweep)?, common),
    };
    apply_overrides(&mut cfg, common);
    cfg.validate()?;
    if common.jobs == 0 {
        return Err(Error::Config("--jobs must be >= 1".into()));
    }
    Ok((cfg, common.jobs))
}

/// 1: configuration or parameter problems, 2: violated hypotheses,
/// 3: solver failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parameter(_)
        | Error::Precondition(_)
        | Error::Regime(_)
        | Error::InsufficientData { .. } => 1,
        Error::Hypothesis(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with configuration errors.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = load(&cli.cmd).and_then(|(cfg, jobs)| exec::execute(&cfg, jobs));
    match result {
        Ok(report) => {
            for line in report {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("svlab: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
