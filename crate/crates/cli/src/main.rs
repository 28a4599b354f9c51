use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use gridgap::bench::{
    fit_exponent, parse_family, read_sweep_csv, run_sweep, write_csv, write_json, Law, SweepConfig,
};
use gridgap::chain::audit;
use gridgap::families::{check_falloff_class, check_flat_class, DensityFamily};
use gridgap::mixing::{mixing_times_with, write_curve_csv, MixingOptions, DEFAULT_MIX_CAP};
use gridgap::pathbound::{
    certify, recipe, write_edge_csv, BoundOptions, Engine, PathSystem, DEFAULT_PAIR_CAP,
};
use gridgap::spectral::{spectral_gap_with, SolverMode, SpectralOptions};

/// Spectral gaps, path certificates and mixing times for Metropolis chains
/// on lattice boxes.
///
/// FAMILY arguments are inline JSON (`{"family": "valley", ...}`) or a path
/// to a .json or .toml file. Every flag can also be set through the
/// environment variable named in its help, prefixed GRIDGAP_.
#[derive(Parser)]
#[command(name = "gridgap", version)]
struct Cli {
    /// Output file (JSON, or CSV for sweep); stdout when absent.
    #[arg(long, global = true, env = "GRIDGAP_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true, env = "GRIDGAP_THREADS")]
    threads: Option<usize>,
    /// Largest chain handed to the dense eigensolver.
    #[arg(long, global = true, env = "GRIDGAP_DENSE_CAP")]
    dense_cap: Option<usize>,
    /// Largest number of path pairs enumerated by a certificate.
    #[arg(long, global = true, env = "GRIDGAP_PAIR_CAP")]
    pair_cap: Option<u64>,
    /// Seed for the sampled class-membership checks.
    #[arg(long, global = true, env = "GRIDGAP_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a chain and print it as JSON.
    Build {
        family: String,
        /// Include per-edge conductances.
        #[arg(long)]
        edges: bool,
    },
    /// Exact spectral gap.
    Gap {
        family: String,
        #[arg(long, default_value = "auto")]
        solver: String,
        /// Also report the next eigenvalue.
        #[arg(long)]
        second: bool,
    },
    /// Weighted-path lower bound, compared with the exact gap.
    Bound {
        family: String,
        #[arg(long, default_value = "auto")]
        case: String,
        /// Walk every path instead of using the fast engine.
        #[arg(long)]
        direct: bool,
        /// Write per-edge values to this CSV file.
        #[arg(long)]
        edge_csv: Option<PathBuf>,
    },
    /// Mixing times over all starts and the sandwich check.
    Mix {
        family: String,
        #[arg(long, env = "GRIDGAP_MIX_CAP", default_value_t = DEFAULT_MIX_CAP)]
        mix_cap: usize,
        /// Write the distance curve to this CSV file.
        #[arg(long)]
        curve_csv: Option<PathBuf>,
    },
    /// Run a TOML sweep config; CSV goes to --out.
    Sweep {
        config: PathBuf,
        /// Also write records with timings as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fit a scaling exponent to the gaps of a sweep CSV.
    Fit {
        csv: PathBuf,
        /// Cell name to fit; required when the CSV holds several.
        #[arg(long)]
        cell: Option<String>,
        /// Predicted exponent s in N^s (log N)^r.
        #[arg(long, allow_hyphen_values = true)]
        exponent: f64,
        /// Predicted log power r.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        log_power: i32,
        #[arg(long, default_value_t = 0.2)]
        tolerance: f64,
        #[arg(long, default_value_t = 4.0)]
        ratio_factor: f64,
    },
    /// Chain identities, certificate sandwich, path audit and mixing sandwich.
    Check {
        family: String,
        #[arg(long, default_value = "auto")]
        case: String,
        #[arg(long, env = "GRIDGAP_MIX_CAP", default_value_t = DEFAULT_MIX_CAP)]
        mix_cap: usize,
    },
}

fn load_family(arg: &str) -> Result<DensityFamily> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading family file {arg}"))?
    };
    Ok(parse_family(&text)?)
}

fn emit(out: &Option<PathBuf>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn spectral_opts(cli: &Cli, mode: SolverMode, second: bool) -> SpectralOptions {
    let mut o = SpectralOptions {
        mode,
        second_gap: second,
        ..SpectralOptions::default()
    };
    if let Some(c) = cli.dense_cap {
        o.dense_cap = c;
    }
    o
}

fn bound_opts(cli: &Cli, direct: bool) -> BoundOptions {
    BoundOptions {
        pair_cap: cli.pair_cap.unwrap_or(DEFAULT_PAIR_CAP),
        engine: if direct { Engine::Direct } else { Engine::Auto },
        ..BoundOptions::default()
    }
}

/// Runs the command; `Ok(false)` means a certification check failed.
fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Build { family, edges } => {
            let chain = load_family(family)?.build_chain()?;
            emit(&cli.out, &serde_json::to_value(chain.to_json(*edges))?)?;
            Ok(true)
        }
        Command::Gap {
            family,
            solver,
            second,
        } => {
            let chain = load_family(family)?.build_chain()?;
            let mode: SolverMode = solver.parse()?;
            let r = spectral_gap_with(&chain, &spectral_opts(cli, mode, *second))?;
            emit(&cli.out, &json!({ "states": chain.len(), "spectral": r }))?;
            Ok(true)
        }
        Command::Bound {
            family,
            case,
            direct,
            edge_csv,
        } => {
            let fam = load_family(family)?;
            let chain = fam.build_chain()?;
            let b = certify(&chain, &fam, case, &bound_opts(cli, *direct))?;
            let lambda =
                spectral_gap_with(&chain, &spectral_opts(cli, SolverMode::Auto, false))?.gap;
            if let Some(p) = edge_csv {
                write_edge_csv(&chain, &b, create(p)?)?;
            }
            let ok = b.lower_bound <= lambda;
            emit(
                &cli.out,
                &json!({ "bound": b, "lambda": lambda, "certified": ok }),
            )?;
            Ok(ok)
        }
        Command::Mix {
            family,
            mix_cap,
            curve_csv,
        } => {
            let chain = load_family(family)?.build_chain()?;
            let lambda =
                spectral_gap_with(&chain, &spectral_opts(cli, SolverMode::Auto, false))?.gap;
            let m = mixing_times_with(
                &chain,
                lambda,
                &MixingOptions {
                    dense_cap: *mix_cap,
                    ..MixingOptions::default()
                },
            )?;
            if let Some(p) = curve_csv {
                write_curve_csv(&m.curve, create(p)?)?;
            }
            let ok = m.sandwich_holds(1e-6);
            emit(&cli.out, &json!({ "mixing": m, "sandwich": ok }))?;
            Ok(ok)
        }
        Command::Sweep { config, json } => {
            let text = fs::read_to_string(config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = SweepConfig::from_toml(&text)?;
            if let Some(c) = cli.pair_cap {
                cfg.settings.pair_cap = c;
            }
            if let Some(c) = cli.dense_cap {
                cfg.settings.dense_cap = c;
            }
            if let Some(s) = cli.seed {
                cfg.settings.seed = s;
            }
            let records = run_sweep(&cfg)?;
            match &cli.out {
                Some(p) => write_csv(&records, create(p)?)?,
                None => write_csv(&records, std::io::stdout().lock())?,
            }
            if let Some(p) = json {
                write_json(&records, create(p)?)?;
            }
            let mut ok = true;
            for r in &records {
                let good = r.error.is_none()
                    && r.certified
                    && r.sandwich != Some(false)
                    && r.class_ok != Some(false);
                if !good {
                    eprintln!(
                        "failed: {} N={} certified={} error={}",
                        r.cell,
                        r.n,
                        r.certified,
                        r.error.as_deref().unwrap_or("none")
                    );
                }
                ok &= good;
            }
            Ok(ok)
        }
        Command::Fit {
            csv,
            cell,
            exponent,
            log_power,
            tolerance,
            ratio_factor,
        } => {
            let rows = read_sweep_csv(create_reader(csv)?)?;
            let mut cells: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
            cells.sort_unstable();
            cells.dedup();
            let name = match cell {
                Some(c) => c.clone(),
                None if cells.len() == 1 => cells[0].to_string(),
                None => bail!("CSV holds cells {cells:?}; choose one with --cell"),
            };
            let mut pts: Vec<(f64, f64)> = Vec::new();
            for (c, n, l) in &rows {
                if *c == name {
                    let l = l.with_context(|| format!("no gap recorded at N = {n}"))?;
                    pts.push((*n as f64, l));
                }
            }
            let law = Law {
                exponent: *exponent,
                log_power: *log_power,
                tolerance: *tolerance,
                ratio_factor: *ratio_factor,
            };
            let fit = fit_exponent(&pts, &law)?;
            let ok = fit.pass;
            emit(&cli.out, &json!({ "cell": name, "fit": fit }))?;
            Ok(ok)
        }
        Command::Check {
            family,
            case,
            mix_cap,
        } => check(cli, family, case, *mix_cap),
    }
}

fn create_reader(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn check(cli: &Cli, family: &str, case: &str, mix_cap: usize) -> Result<bool> {
    let fam = load_family(family)?;
    let chain = fam.build_chain()?;
    let identities = audit(&chain);
    let lambda = spectral_gap_with(&chain, &spectral_opts(cli, SolverMode::Auto, false))?.gap;
    let b = certify(&chain, &fam, case, &bound_opts(cli, false))?;
    let (upper, upper_case) = gridgap::bench::best_upper(&chain, &fam, None)?;
    let r = recipe(&fam, case)?;
    let paths = PathSystem::new(&chain, r.mode, r.rule)?.audit(&chain)?;
    let seed = cli.seed.unwrap_or(0);
    let class = match fam {
        DensityFamily::ExpFalloff { .. } => Some(check_falloff_class(&fam, seed)?),
        DensityFamily::FlatClass { .. } => Some(check_flat_class(&fam, seed)?),
        _ => None,
    };
    let mixing = if chain.len() <= mix_cap {
        Some(mixing_times_with(
            &chain,
            lambda,
            &MixingOptions {
                dense_cap: mix_cap,
                ..MixingOptions::default()
            },
        )?)
    } else {
        None
    };
    let certified = b.lower_bound <= lambda && lambda <= upper;
    let sandwich = mixing.as_ref().map(|m| m.sandwich_holds(1e-6));
    let passed = identities.passed(1e-12)
        && certified
        && paths.passed()
        && class.as_ref().is_none_or(|c| c.passed())
        && sandwich != Some(false);
    emit(
        &cli.out,
        &json!({
            "family": fam.tag(),
            "params": fam.describe(),
            "states": chain.len(),
            "identities": identities,
            "lambda": lambda,
            "lower": b.lower_bound,
            "upper": upper,
            "upper_case": upper_case,
            "certified": certified,
            "paths": { "checked": paths.paths, "failures": paths.failures.len(), "passed": paths.passed() },
            "class": class,
            "mixing": mixing,
            "sandwich": sandwich,
            "passed": passed,
        }),
    )?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("certification check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
