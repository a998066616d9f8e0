use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use envlink::envs::EnvSpec;
use envlink::server::{Server, ServerConfig, ServerError};
use envlink::wire::{DEFAULT_PORT, PORT_ENV};
use envlink_cli::parity::{self, ParityConfig};
use envlink_cli::qlearn::{curve_csv, QConfig, QLearner};
use envlink_cli::{bench, rollout, Endpoint, Failure, Target};
use log::info;

#[derive(Parser)]
#[command(name = "envlink", version, about = "Serve and drive multi-agent environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Environment to run in-process, e.g. gridworld:5x5:n2 or pendulum
    #[arg(long)]
    env: Option<EnvSpec>,
    /// Served environment to connect to, host:port
    #[arg(long)]
    connect: Option<Endpoint>,
}

impl Source {
    fn target(self) -> Target {
        match (self.env, self.connect) {
            (Some(spec), _) => Target::Local(spec),
            (None, Some(ep)) => Target::Remote(ep),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Host an environment until interrupted
    Serve {
        #[arg(long)]
        env: EnvSpec,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Seconds to wait for every agent's action in a round
        #[arg(long, default_value_t = 30.0)]
        barrier_timeout: f64,
        #[arg(long, hide = true)]
        fault_round: Option<u64>,
    },
    /// Run a seeded random policy and write one JSON line per round
    Rollout {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "random")]
        policy: Policy,
        /// Output file; standard output if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that local, in-process-served and loopback-served runs are identical
    Parity {
        #[arg(long)]
        env: EnvSpec,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        fault_round: Option<u64>,
    },
    /// Train a tabular Q-learner and write its learning curve as CSV
    TrainQ {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 500)]
        episodes: u64,
        #[arg(long, default_value_t = 50)]
        eval_every: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure round throughput and latency against a server
    Bench {
        #[arg(long)]
        connect: Endpoint,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
    },
}

fn output(path: Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn serve(env: EnvSpec, bind: String, port: u16, barrier_timeout: f64, fault_round: Option<u64>) -> Result<(), Failure> {
    if !(barrier_timeout.is_finite() && barrier_timeout > 0.0) {
        return Err(Failure::Usage("--barrier-timeout must be a positive number of seconds".into()));
    }
    let config = ServerConfig {
        bind,
        port,
        barrier_timeout: Duration::from_secs_f64(barrier_timeout),
        fault_round,
    };
    let server = Server::serve(env.build()?, config).map_err(|e| match e {
        ServerError::Bind { .. } => Failure::Network(e.to_string()),
        other => Failure::Usage(other.to_string()),
    })?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "listening on {}", server.local_addr())?;
    stdout.flush()?;
    drop(stdout);
    info!("serving {env} on {}", server.local_addr());
    server.wait();
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve {
            env,
            bind,
            port,
            barrier_timeout,
            fault_round,
        } => serve(env, bind, port, barrier_timeout, fault_round),
        Command::Rollout {
            source,
            steps,
            seed,
            policy: Policy::Random,
            out,
        } => {
            let mut out = output(out)?;
            let env = source.target().open()?;
            let summary = rollout::rollout(env, steps, seed, &mut out)?;
            out.flush()?;
            info!("{} rounds, {} complete episodes", summary.steps, summary.episode_returns.len());
            for (i, returns) in summary.episode_returns.iter().enumerate() {
                info!("episode {i} returns {returns:?}");
            }
            Ok(())
        }
        Command::Parity {
            env,
            steps,
            seed,
            fault_round,
        } => {
            let config = ParityConfig {
                spec: env,
                steps,
                seed,
                fault_round,
                server_exe: std::env::current_exe()?,
            };
            match parity::run(&config)? {
                Ok(n) => {
                    println!("parity ok: {n} rounds identical across {}", parity::PATHS.join(", "));
                    Ok(())
                }
                Err(d) => {
                    println!("{d}");
                    Err(Failure::Mismatch("parity check failed".into()))
                }
            }
        }
        Command::TrainQ {
            source,
            alpha,
            gamma,
            epsilon,
            episodes,
            eval_every,
            seed,
            out,
        } => {
            let config = QConfig {
                alpha,
                gamma,
                epsilon,
                episodes,
                eval_every,
                seed,
                ..QConfig::default()
            };
            config.validate()?;
            let mut env = source.target().open()?;
            let mut learner = QLearner::new(&env, config)?;
            let curve = learner.train(&mut env)?;
            env.close()?;
            let mut out = output(out)?;
            out.write_all(curve_csv(&curve).as_bytes())?;
            out.flush()?;
            Ok(())
        }
        Command::Bench { connect, steps } => {
            let env = Target::Remote(connect).open()?;
            let report = bench::bench(env, steps)?;
            println!("{report}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // only a standalone server reports every round
    let filter = match cli.command {
        Command::Serve { .. } => "info",
        _ => "info,envlink::server=warn",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(filter)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("envlink: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
