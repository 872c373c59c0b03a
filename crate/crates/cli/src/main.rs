//! `covforge`: command-line front end for the covariant engine.
//!
//! Exit status: 0 on success, 1 on a usage, input or engine error, 2 when a
//! verification finds differences.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use covforge::counting::cs_dim;
use covforge::discover::{
    audit_registry, delta, expected_table_d7, replay_catalog, run_pipeline, verify_distribution,
    AuditStatus, PipelineOptions, ReplayOptions, SearchOptions, DEFAULT_BUDGET,
};
use covforge::linalg::RankMode;
use covforge::registry::{DistributionTable, Registry};
use covforge::transvect::{semitransvectant, semitransvectant_direct, transvectant};
use covforge::{FormContext, Poly, SemiInvariant};

#[derive(Parser, Debug)]
#[command(name = "covforge", version, about = "Covariants of binary forms")]
struct Cli {
    /// Worker threads for parallel cell computations.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RegistryArg {
    /// Registry file.
    #[arg(long, env = "COVFORGE_REGISTRY")]
    registry: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Grid,
    Records,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimension of the covariants of degree I and order J of the degree-D form.
    Dim { d: u32, i: u32, j: u32 },
    /// Classical transvectant (F,G)^R of two covariants in t, x1.., Y1, Y2.
    Transvect { f: String, g: String, r: u32 },
    /// Semitransvectant [F,G]^R of two semi-invariants in t, x1..xd.
    Semitransvect {
        #[arg(long)]
        d: u32,
        f: String,
        g: String,
        r: u32,
        /// Compute through full covariants instead of the direct formula.
        #[arg(long)]
        oracle: bool,
    },
    /// Leading coefficient of a covariant.
    Kappa {
        #[arg(long)]
        d: u32,
        f: String,
    },
    /// The covariant with the given leading coefficient.
    Reconstruct {
        #[arg(long)]
        d: u32,
        a: String,
    },
    /// Builds a minimal generating system degree by degree.
    Discover {
        d: u32,
        #[arg(long)]
        max_degree: u32,
        #[command(flatten)]
        registry: RegistryArg,
        /// Use the two-prime rank test (exact fallback on disagreement).
        #[arg(long)]
        modular: bool,
        /// Nonzero candidates examined per cell.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Replays the reference constructions for the degree-7 form.
    Replay {
        #[arg(long, default_value_t = 30)]
        max_degree: u32,
        /// Also recompute orders by iterating D.
        #[arg(long)]
        operational_orders: bool,
        /// Write the resulting registry here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints the degree/order distribution of a registry.
    Table {
        #[command(flatten)]
        registry: RegistryArg,
        /// Print the bundled degree-7 table instead.
        #[arg(long)]
        expected: bool,
        #[arg(long, value_enum, default_value_t = TableFormat::Grid)]
        format: TableFormat,
    },
    /// Compares a registry's distribution with the bundled degree-7 table.
    Verify {
        #[command(flatten)]
        registry: RegistryArg,
        /// Only compare degrees up to this one.
        #[arg(long)]
        max_degree: Option<u32>,
        /// Recount every cell exactly instead of counting records.
        #[arg(long)]
        recount: bool,
    },
    /// Re-checks constructions and irreducibility certificates.
    Audit {
        #[command(flatten)]
        registry: RegistryArg,
        #[arg(long)]
        modular: bool,
        /// Also recompute every order by iterating D.
        #[arg(long)]
        check_orders: bool,
    },
}

/// Successful outcome of a command.
enum Outcome {
    Ok,
    Diff,
}

fn read_input(arg: &str) -> anyhow::Result<String> {
    match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("cannot read {path}"))
            .map(|s| s.trim().to_string()),
        None => Ok(arg.to_string()),
    }
}

fn parse_poly(arg: &str) -> anyhow::Result<Poly> {
    let text = read_input(arg)?;
    text.parse::<Poly>()
        .map_err(|e| anyhow::anyhow!("malformed polynomial `{text}`: {e}"))
}

fn parse_semi(ctx: &FormContext, arg: &str) -> anyhow::Result<SemiInvariant> {
    let p = parse_poly(arg)?;
    let s = SemiInvariant::from_xform(ctx, &p)?;
    if !ctx.is_semiinvariant(s.poly())? {
        bail!("`{p}` is not annihilated by D");
    }
    Ok(s)
}

fn require_registry(arg: &RegistryArg) -> anyhow::Result<Registry> {
    let path = arg
        .registry
        .as_ref()
        .context("no registry given (use --registry or COVFORGE_REGISTRY)")?;
    Ok(Registry::load(path)?)
}

fn print_table(table: &DistributionTable, format: TableFormat) {
    match format {
        TableFormat::Grid => print!("{}", table.to_grid()),
        TableFormat::Records => {
            let rows: Vec<_> = table
                .records()
                .into_iter()
                .map(|(degree, order, delta)| json!({"degree": degree, "order": order, "delta": delta}))
                .collect();
            println!("{}", serde_json::Value::Array(rows));
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Dim { d, i, j } => {
            println!("{}", cs_dim(d, i, j));
        }
        Command::Transvect { f, g, r } => {
            let (f, g) = (parse_poly(&f)?, parse_poly(&g)?);
            println!("{}", transvectant(&f, &g, r)?);
        }
        Command::Semitransvect { d, f, g, r, oracle } => {
            let ctx = FormContext::new(d)?;
            let (f, g) = (parse_semi(&ctx, &f)?, parse_semi(&ctx, &g)?);
            let res = if oracle {
                semitransvectant(&ctx, &f, &g, r)?
            } else {
                semitransvectant_direct(&ctx, &f, &g, r)?
            };
            match res {
                Some(v) => println!("{}", v.poly()),
                None => println!("0"),
            }
        }
        Command::Kappa { d, f } => {
            let ctx = FormContext::new(d)?;
            let v = ctx.kappa(&parse_poly(&f)?)?;
            println!("{}", v.poly());
        }
        Command::Reconstruct { d, a } => {
            let ctx = FormContext::new(d)?;
            let a = parse_semi(&ctx, &a)?;
            println!("{}", ctx.kappa_inverse(&a));
        }
        Command::Discover {
            d,
            max_degree,
            registry,
            modular,
            budget,
        } => {
            let ctx = FormContext::new(d)?;
            let opts = PipelineOptions {
                max_degree,
                search: SearchOptions {
                    budget,
                    mode: if modular {
                        RankMode::Modular
                    } else {
                        RankMode::Exact
                    },
                    ..SearchOptions::default()
                },
                registry_path: registry.registry,
            };
            let out = run_pipeline(&ctx, &opts)?;
            for c in &out.cells {
                println!(
                    "({},{}) dim {} sigma {} syzygy {} delta {} found {} tried {} {:.2}s",
                    c.count.degree,
                    c.count.order,
                    c.count.dim,
                    c.count.sigma,
                    c.count.syzygy,
                    c.count.delta(),
                    c.found,
                    c.tried,
                    c.seconds
                );
            }
            print!("{}", out.table.to_grid());
            if let Some(i) = out.stopped_at {
                for c in out.exhausted_cells() {
                    eprintln!(
                        "budget exhausted at ({},{}): {} of {} generators after {} candidates",
                        c.count.degree,
                        c.count.order,
                        c.found,
                        c.count.delta(),
                        c.tried
                    );
                }
                bail!("discovery stopped at degree {i}");
            }
            println!("generators: {}", out.generator_count());
        }
        Command::Replay {
            max_degree,
            operational_orders,
            out,
        } => {
            let ctx = FormContext::new(7)?;
            let (reg, report) = replay_catalog(
                &ctx,
                ReplayOptions {
                    max_degree,
                    operational_orders,
                    include_opaque: true,
                },
            )?;
            for e in &report.entries {
                if e.order_matches() && e.replaced_by.is_none() {
                    continue;
                }
                let computed = e
                    .computed_order
                    .map_or_else(|| "undefined".to_string(), |o| o.to_string());
                print!(
                    "{}: {} printed order {} computed {}",
                    e.name, e.construction, e.printed_order, computed
                );
                if let Some(fix) = &e.replaced_by {
                    print!(", replaced by {fix}");
                }
                println!();
            }
            for (deg, n) in report.per_degree() {
                println!("degree {deg}: {n}");
            }
            println!("records: {}", reg.len());
            if let Some(p) = out {
                reg.save(&p)?;
            }
        }
        Command::Table {
            registry,
            expected,
            format,
        } => {
            let table = if expected {
                expected_table_d7()
            } else {
                require_registry(&registry)?.distribution()
            };
            print_table(&table, format);
        }
        Command::Verify {
            registry,
            max_degree,
            recount,
        } => {
            let reg = require_registry(&registry)?;
            if reg.d() != 7 {
                bail!("the bundled table is for d=7, registry has d={}", reg.d());
            }
            let limit = max_degree.unwrap_or(30).min(reg.complete_through().max(1));
            let table = if recount {
                let mut t = DistributionTable::default();
                t.set(1, 7, 1);
                for i in 2..=limit {
                    for j in covforge::discover::orders_of_degree(7, i) {
                        let n = delta(&reg, i, j, RankMode::Exact)?.delta();
                        if n > 0 {
                            t.set(i, j, n);
                        }
                    }
                }
                t
            } else {
                reg.distribution()
            };
            let diff = verify_distribution(&table, &expected_table_d7(), Some(limit));
            for c in &diff {
                println!(
                    "({},{}): expected {} found {}",
                    c.degree, c.order, c.expected, c.found
                );
            }
            if !diff.is_empty() {
                return Ok(Outcome::Diff);
            }
            println!("distribution matches through degree {limit}");
        }
        Command::Audit {
            registry,
            modular,
            check_orders,
        } => {
            let reg = require_registry(&registry)?;
            let mode = if modular {
                RankMode::Modular
            } else {
                RankMode::Exact
            };
            let entries = audit_registry(&reg, mode, check_orders)?;
            let mut failed = false;
            for e in &entries {
                if !matches!(e.status, AuditStatus::Ok | AuditStatus::Skipped) {
                    failed = true;
                }
                println!("{} ({},{}): {:?}", e.name, e.degree, e.order, e.status);
            }
            if failed {
                return Ok(Outcome::Diff);
            }
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors exit 1 so that status 2 always means a verification diff.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Diff) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
