use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use rnav_core::decision::DecisionState;
use rnav_core::harness::{
    batch, batch_sequential, load_scenario, run_with, serve_live, JsonlWriter, LiveConfig,
    NullSink, Policy, RunMode, Scenario, SeedRange, TraceSink, Transport,
};
use rnav_core::logic::{
    apply_subst, parse_program, parse_query, Externals, SolveLimits, Solver, Term, VarId,
};
use rnav_core::protocol::{run_decision_client, Endpoint, DEFAULT_PORT};

#[derive(Parser)]
#[command(name = "rnav", version, about = "Reactive robot navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RulesArg {
    /// Decision rule file replacing the built-in program.
    #[arg(long, value_name = "FILE")]
    rules: Option<PathBuf>,
    /// Use the hard-coded decision table instead of a rule program.
    #[arg(long, conflicts_with = "rules")]
    direct: bool,
}

impl RulesArg {
    fn policy(&self) -> Result<Policy> {
        if self.direct {
            return Ok(Policy::Direct);
        }
        match &self.rules {
            None => Ok(Policy::default()),
            Some(path) => {
                let text = read(path)?;
                Policy::from_rules(&text).with_context(|| format!("parsing {}", path.display()))
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Run the decision side as a TCP client on the loopback interface.
        #[arg(long)]
        socket: bool,
        /// Port for --socket; 0 picks a free one.
        #[arg(long, env = "RNAV_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Write the JSONL trace here (`-` for stdout).
        #[arg(long, value_name = "OUT.jsonl")]
        trace: Option<PathBuf>,
        #[command(flatten)]
        rules: RulesArg,
    },
    /// Run a seed range and print aggregate statistics.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        /// Inclusive range `A..B`.
        #[arg(long, default_value = "1..100")]
        seeds: SeedRange,
        /// Exit with status 1 when the success rate is below this.
        #[arg(long, value_name = "R")]
        min_success: Option<f64>,
        /// Run seeds one after another.
        #[arg(long)]
        sequential: bool,
        /// Include one report per seed.
        #[arg(long)]
        verbose: bool,
        #[command(flatten)]
        rules: RulesArg,
    },
    /// Serve a live session to browser viewers over WebSocket.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, env = "RNAV_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Simulation ticks per second.
        #[arg(long, default_value_t = 20.0)]
        speed: f64,
        #[arg(long, value_name = "OUT.jsonl")]
        trace: Option<PathBuf>,
        #[command(flatten)]
        rules: RulesArg,
    },
    /// Load a rule file, list its predicates and optionally run a query.
    Engine {
        #[arg(long, value_name = "FILE")]
        rules: Option<PathBuf>,
        /// Query to solve, e.g. `get_directions(D, I)`.
        #[arg(long)]
        query: Option<String>,
        #[arg(long, default_value_t = 10)]
        max_solutions: usize,
    },
    /// Act as the robot side: wait for one decision client on a port.
    Executor {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, env = "RNAV_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, value_name = "OUT.jsonl")]
        trace: Option<PathBuf>,
    },
    /// Act as the decision side: connect to an executor.
    Client {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "RNAV_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[command(flatten)]
        rules: RulesArg,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn scenario(path: &Path) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn trace_sink(path: Option<&Path>) -> Result<Box<dyn TraceSink + Send>> {
    Ok(match path {
        None => Box::new(NullSink),
        Some(p) if p.as_os_str() == "-" => Box::new(JsonlWriter(std::io::stdout())),
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Box::new(JsonlWriter(BufWriter::new(f)))
        }
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn engine(rules: Option<&Path>, query: Option<&str>, max: usize) -> Result<ExitCode> {
    let text = match rules {
        Some(p) => read(p)?,
        None => rnav_core::decision::BUILTIN_RULES.to_string(),
    };
    // Same initial database the decision side starts from.
    let mut program = DecisionState::new(parse_program(&text).context("parsing rules")?)
        .program()
        .clone();
    println!("{} clauses", program.clause_count());
    for key in program.predicates() {
        println!("  {key}");
    }
    let Some(q) = query else {
        return Ok(ExitCode::SUCCESS);
    };
    let query = parse_query(q).context("parsing query")?;
    let mut externals = Externals::new();
    let mut solver = Solver::new(
        &mut program,
        &query.goal,
        &mut externals,
        SolveLimits::default(),
    );
    let mut count = 0;
    while count < max {
        match solver.next_solution()? {
            None => break,
            Some(s) => {
                count += 1;
                let bindings: Vec<String> = query
                    .var_names
                    .iter()
                    .enumerate()
                    .filter(|(_, name)| !name.starts_with('_'))
                    .map(|(i, name)| format!("{name} = {}", apply_subst(&s, &Term::Var(VarId(i)))))
                    .collect();
                if bindings.is_empty() {
                    println!("true");
                } else {
                    println!("{}", bindings.join(", "));
                }
            }
        }
    }
    if count == 0 {
        println!("false");
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario: path,
            seed,
            socket,
            port,
            trace,
            rules,
        } => {
            let s = scenario(&path)?;
            let policy = rules.policy()?;
            let mode = if socket {
                RunMode::Socket(Transport::Tcp(Endpoint::new("127.0.0.1", port)))
            } else {
                RunMode::InProcess
            };
            let mut sink = trace_sink(trace.as_deref())?;
            let report = run_with(&s, seed, &mode, &policy, sink.as_mut(), None)?;
            drop(sink);
            if trace.as_deref().is_none_or(|p| p.as_os_str() != "-") {
                print_json(&report)?;
            }
            Ok(if report.reached {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Batch {
            scenario: path,
            seeds,
            min_success,
            sequential,
            verbose,
            rules,
        } => {
            let s = scenario(&path)?;
            let policy = rules.policy()?;
            let seeds = seeds.seeds();
            let started = std::time::Instant::now();
            let mut summary = if sequential {
                batch_sequential(&s, &seeds, &policy)
            } else {
                batch(&s, &seeds, &policy)
            };
            let elapsed = started.elapsed().as_secs_f64();
            if !verbose {
                summary.reports.clear();
            }
            print_json(&serde_json::json!({
                "scenario": s.name,
                "seeds": seeds.len(),
                "success_rate": summary.success_rate,
                "mean_cycles": summary.mean_cycles,
                "mean_path_length": summary.mean_path_length,
                "wall_time_s": elapsed,
                "reports": summary.reports,
            }))?;
            match min_success {
                Some(r) if summary.success_rate < r => {
                    eprintln!("success rate {} below {r}", summary.success_rate);
                    Ok(ExitCode::from(1))
                }
                _ => Ok(ExitCode::SUCCESS),
            }
        }
        Command::Serve {
            scenario: path,
            seed,
            port,
            host,
            speed,
            trace,
            rules,
        } => {
            let s = scenario(&path)?;
            let policy = rules.policy()?;
            if speed.is_nan() || speed <= 0.0 {
                bail!("--speed must be positive");
            }
            let listener = TcpListener::bind((host.as_str(), port))
                .with_context(|| format!("binding {host}:{port}"))?;
            let sink = match trace {
                Some(p) => Some(trace_sink(Some(&p))?),
                None => None,
            };
            let config = LiveConfig {
                ticks_per_second: speed,
                ..LiveConfig::default()
            };
            let handle = serve_live(s, seed, policy, listener, config, sink)?;
            eprintln!("live session on ws://{}", handle.local_addr());
            handle.wait();
            Ok(ExitCode::SUCCESS)
        }
        Command::Engine {
            rules,
            query,
            max_solutions,
        } => engine(rules.as_deref(), query.as_deref(), max_solutions),
        Command::Executor {
            scenario: path,
            seed,
            port,
            host,
            trace,
        } => {
            let s = scenario(&path)?;
            let mut sink = trace_sink(trace.as_deref())?;
            eprintln!("waiting for a decision client on {host}:{port}");
            let mode = RunMode::Socket(Transport::External(Endpoint::new(host, port)));
            let report = run_with(&s, seed, &mode, &Policy::Direct, sink.as_mut(), None)?;
            drop(sink);
            print_json(&report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Client { host, port, rules } => {
            let policy = rules.policy()?;
            let stream = TcpStream::connect((host.as_str(), port))
                .with_context(|| format!("connecting to {host}:{port}"))?;
            stream.set_nodelay(true)?;
            let mut reader = BufReader::new(stream.try_clone()?);
            let mut writer = stream;
            let mut decision = policy.decision_maker();
            let report = run_decision_client(decision.as_mut(), &mut reader, &mut writer);
            eprintln!("{} cycles, ended: {:?}", report.cycles, report.end);
            Ok(ExitCode::SUCCESS)
        }
    }
}
