use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use stoch_tree::closest_pair::{threshold_probability, Algorithm};
use stoch_tree::expectation::{expected_approx, expected_approx_metric, expected_exact, parse_metric};
use stoch_tree::lvd::{build_lvd, parse_lvd, serialize_lvd};
use stoch_tree::reduction::reduce;
use stoch_tree::{generate_random, parse_instance, serialize_instance, Instance, Length, ProbModel};

mod validate;

#[derive(Parser)]
#[command(name = "stree", version, about = "Stochastic closest pair and most-likely Voronoi diagrams on trees")]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closest-pair statistics.
    #[command(subcommand)]
    Scp(Scp),
    /// Most-likely Voronoi diagrams.
    #[command(subcommand)]
    Lvd(LvdCmd),
    /// Reduce an instance to the points-at-vertices tree.
    Reduce {
        #[arg(long)]
        input: PathBuf,
        /// Print the reduced tree in instance format with a vertex back-map.
        #[arg(long)]
        dump: bool,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// uniform, fixed:<p> or uniform:<lo>
        #[arg(long, default_value = "uniform")]
        prob_model: ProbModel,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-check every algorithm against the brute-force oracles.
    Validate(validate::ValidateArgs),
    /// Time the threshold variants over a size sweep (CSV).
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum Scp {
    /// Probability that the closest pair is at least `ell` apart.
    Threshold {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        ell: f64,
        #[arg(long, default_value = "auto")]
        algo: Algorithm,
    },
    /// Expected closest-pair distance.
    Expect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, conflicts_with = "epsilon")]
        exact: bool,
        /// Approximate within a factor 1 + epsilon.
        #[arg(long, allow_hyphen_values = true)]
        epsilon: Option<f64>,
    },
    /// Approximate expectation on a distance-matrix instance.
    ExpectMetric {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
    },
}

#[derive(Subcommand)]
enum LvdCmd {
    /// Build the k-LVD and write it in the diagram format.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Answer a query from a stored diagram.
    Query {
        #[arg(long)]
        lvd: PathBuf,
        #[arg(long)]
        edge: usize,
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
    },
    /// Diagram statistics and the size bounds.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Point counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    sizes: Vec<usize>,
    /// Vertex count of the path-heavy trees; each size also runs with t = 2n.
    #[arg(long, default_value_t = 20)]
    t: usize,
    /// Largest n for the cubic variant.
    #[arg(long, default_value_t = 500)]
    cubic_max: usize,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    ell: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// At most 12 significant digits, trailing zeros dropped.
fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let r: f64 = format!("{x:.11e}").parse().expect("scientific literal");
    format!("{r}")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path) -> Result<Instance> {
    parse_instance(&read(path)?).with_context(|| format!("invalid instance {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        bail!("{what} must be a positive number, got {x}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let json = cli.json;
    match cli.command {
        Command::Scp(Scp::Threshold { input, ell, algo }) => {
            positive(ell, "--ell")?;
            let inst = load(&input)?;
            let p = threshold_probability(&inst, ell, algo)?;
            if json {
                println!("{}", json!({ "ell": ell, "algo": algo.to_string(), "probability": p }));
            } else {
                println!("{}", num(p));
            }
        }
        Command::Scp(Scp::Expect { input, exact, epsilon }) => {
            if let Some(e) = epsilon {
                positive(e, "--epsilon")?;
            }
            let inst = load(&input)?;
            match epsilon {
                Some(e) if !exact => {
                    let r = expected_approx(&inst, e)?;
                    if json {
                        println!(
                            "{}",
                            json!({ "epsilon": e, "value": r.value, "queries": r.queries, "query_bound": r.query_bound })
                        );
                    } else {
                        println!("{}", num(r.value));
                    }
                }
                _ => {
                    let v = expected_exact(&inst)?;
                    if json {
                        println!("{}", json!({ "exact": true, "value": v }));
                    } else {
                        println!("{}", num(v));
                    }
                }
            }
        }
        Command::Scp(Scp::ExpectMetric { input, epsilon }) => {
            positive(epsilon, "--epsilon")?;
            let m = parse_metric(&read(&input)?).with_context(|| format!("invalid metric {}", input.display()))?;
            let r = expected_approx_metric(&m, epsilon)?;
            if json {
                println!("{}", json!({ "epsilon": epsilon, "value": r.value, "queries": r.queries }));
            } else {
                println!("{}", num(r.value));
            }
        }
        Command::Lvd(LvdCmd::Build { input, k, output }) => {
            if k == 0 {
                bail!("--k must be at least 1");
            }
            let inst = load(&input)?;
            let (lvd, stats) = build_lvd(&inst, k)?;
            let text = serialize_lvd(&lvd);
            if output.is_some() || !json {
                emit(output.as_deref(), &text)?;
            }
            if json {
                println!(
                    "{}",
                    json!({
                        "k": k,
                        "answers": lvd.answer_count(),
                        "breakpoints": lvd.breakpoint_count(),
                        "cells": stats.cell_count,
                        "xi": stats.xi,
                    })
                );
            }
        }
        Command::Lvd(LvdCmd::Query { lvd, edge, delta }) => {
            let d = Length::from_f64(delta)
                .filter(|d| *d >= Length::ZERO)
                .with_context(|| format!("--delta must be a nonnegative length, got {delta}"))?;
            let diagram = parse_lvd(&read(&lvd)?).with_context(|| format!("invalid diagram {}", lvd.display()))?;
            let ids = diagram.query(edge, d)?;
            if json {
                println!("{}", json!({ "edge": edge, "delta": delta, "answer": ids }));
            } else {
                let s: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                println!("{}", s.join(" "));
            }
        }
        Command::Lvd(LvdCmd::Stats { input, k }) => {
            if k == 0 {
                bail!("--k must be at least 1");
            }
            let inst = load(&input)?.normalize();
            let (_, s) = build_lvd(&inst, k)?;
            let n = inst.len();
            let cell_ok = s.cell_count <= s.xi + 1;
            let shallow_ok = (1..n.max(2)).all(|d| s.shallow_degree_sum(d) <= 8 * (d * n) as u64);
            if json {
                println!(
                    "{}",
                    json!({
                        "n": n,
                        "k": k,
                        "cells": s.cell_count,
                        "xi": s.xi,
                        "critical": s.critical.len(),
                        "centers": s.center_count,
                        "shallow_degree_sums": s.shallow_degree_sums,
                        "cells_per_kn": s.cell_count as f64 / (k * n) as f64,
                        "cell_bound_holds": cell_ok,
                        "shallow_bound_holds": shallow_ok,
                    })
                );
            } else {
                println!("points {n}");
                println!("cells {}", s.cell_count);
                println!("xi {}", s.xi);
                println!("critical_centers {}", s.critical.len());
                println!("centers {}", s.center_count);
                println!("cells_per_kn {}", num(s.cell_count as f64 / (k * n) as f64));
                println!("cell_bound {}", if cell_ok { "holds" } else { "VIOLATED" });
                println!("shallow_bound {}", if shallow_ok { "holds" } else { "VIOLATED" });
            }
            return Ok(cell_ok && shallow_ok);
        }
        Command::Reduce { input, dump } => {
            let inst = load(&input)?.normalize();
            if inst.is_empty() {
                bail!("instance has no points to reduce");
            }
            let space = reduce(&inst)?;
            if dump {
                print!("{}", space.dump());
            } else if json {
                println!(
                    "{}",
                    json!({
                        "vertices": space.len(),
                        "points": inst.len(),
                        "chains": space.chains().len(),
                        "non_chain_vertices": space.non_chain_count(),
                    })
                );
            } else {
                println!("vertices {}", space.len());
                println!("points {}", inst.len());
                println!("chains {}", space.chains().len());
                println!("non_chain_vertices {}", space.non_chain_count());
            }
        }
        Command::Gen { t, n, seed, prob_model, output } => {
            let inst = generate_random(t, n, seed, prob_model)?;
            emit(output.as_deref(), &serialize_instance(&inst))?;
        }
        Command::Validate(args) => return validate::run(&args, json),
        Command::Bench(args) => bench(&args)?,
    }
    Ok(true)
}

fn bench(args: &BenchArgs) -> Result<()> {
    positive(args.ell, "--ell")?;
    if args.t < 2 {
        bail!("--t must be at least 2");
    }
    let mut out = io::stdout().lock();
    writeln!(out, "n,t,algo,seconds")?;
    for &n in &args.sizes {
        for t in [args.t, 2 * n] {
            let inst = generate_random(t, n, args.seed, ProbModel::Uniform)?;
            for algo in Algorithm::EXPLICIT {
                if algo == Algorithm::Cubic && n > args.cubic_max {
                    continue;
                }
                let start = Instant::now();
                threshold_probability(&inst, args.ell, algo)?;
                writeln!(out, "{n},{t},{algo},{:.6}", start.elapsed().as_secs_f64())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
