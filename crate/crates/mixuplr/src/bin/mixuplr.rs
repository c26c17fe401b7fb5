//! Command-line experiment harness.
//!
//! Usage:
//!   mixuplr <train|ablate-zeta|attack|audit|plot> --config <path>
//!           [--out <dir>] [--seeds 0,1,2] [--eps 0.007,0.07] [--zeta 0,1,2,3]
//!
//! Exit codes: 0 success, 2 config error, 3 runtime failure.
//! MIXUPLR_THREADS caps parallel per-seed jobs.

use std::path::PathBuf;
use std::process::ExitCode;

use mixuplr::error::Error;
use mixuplr::experiment::{
    cmd_ablate_zeta, cmd_attack, cmd_audit, cmd_plot, cmd_train, ExperimentConfig,
};

const USAGE: &str = "usage: mixuplr <train|ablate-zeta|attack|audit|plot> --config <path> \
[--out <dir>] [--seeds 0,1,2] [--eps 0.007,0.07] [--zeta 0,1,2,3]";

struct CliArgs {
    command: String,
    config: PathBuf,
    out: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    eps: Option<Vec<f64>>,
    zeta: Option<Vec<f64>>,
}

fn parse_list<T: std::str::FromStr>(raw: &str, flag: &str) -> Result<Vec<T>, String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| format!("bad {flag} entry `{s}`")))
        .collect()
}

fn parse_args(mut args: std::env::Args) -> Result<CliArgs, String> {
    args.next(); // program name
    let command = args.next().ok_or(USAGE.to_string())?;
    if !["train", "ablate-zeta", "attack", "audit", "plot"].contains(&command.as_str()) {
        return Err(format!("unknown command `{command}`\n{USAGE}"));
    }
    let mut config = None;
    let mut out = None;
    let mut seeds = None;
    let mut eps = None;
    let mut zeta = None;
    while let Some(flag) = args.next() {
        let mut value_for = |flag: &str| args.next().ok_or(format!("{flag} needs a value"));
        match flag.as_str() {
            "--config" => config = Some(PathBuf::from(value_for("--config")?)),
            "--out" => out = Some(PathBuf::from(value_for("--out")?)),
            "--seeds" => seeds = Some(parse_list::<u64>(&value_for("--seeds")?, "--seeds")?),
            "--eps" => eps = Some(parse_list::<f64>(&value_for("--eps")?, "--eps")?),
            "--zeta" => zeta = Some(parse_list::<f64>(&value_for("--zeta")?, "--zeta")?),
            other => return Err(format!("unknown flag `{other}`\n{USAGE}")),
        }
    }
    let config = config.ok_or(format!("--config is required\n{USAGE}"))?;
    Ok(CliArgs { command, config, out, seeds, eps, zeta })
}

fn run(args: CliArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Some(seeds) = args.seeds {
        if seeds.is_empty() {
            return Err(Error::Config("--seeds must not be empty".into()));
        }
        cfg.repeat_seeds = seeds;
    }
    cfg.validate()?;
    match args.command.as_str() {
        "train" => {
            let agg = cmd_train(&cfg)?;
            for (seed, median, _) in &agg.per_seed {
                println!("seed {seed}: median error {median:.6}");
            }
            println!("mean {:.6} std {:.6}", agg.mean_error, agg.std_error);
        }
        "ablate-zeta" => {
            let zetas = args.zeta.unwrap_or_else(|| cfg.ablate_zetas.clone());
            cmd_ablate_zeta(&cfg, &zetas)?;
            println!("wrote {}", cfg.out_dir.join("ablate_zeta.csv").display());
        }
        "attack" => {
            let eps = args.eps.unwrap_or_else(|| cfg.attack_eps.clone());
            let reports = cmd_attack(&cfg, &eps)?;
            for r in &reports {
                println!(
                    "eps {} seed {}: clean {:.4} adv {:.4} drop {:.2}%",
                    r.epsilon, r.seed, r.clean_accuracy, r.adversarial_accuracy, r.percent_drop
                );
            }
        }
        "audit" => {
            cmd_audit(&cfg)?;
            println!("wrote audit reports to {}", cfg.out_dir.display());
        }
        "plot" => {
            cmd_plot(&cfg)?;
            println!("wrote grid and scatter to {}", cfg.out_dir.display());
        }
        _ => unreachable!("validated in parse_args"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match parse_args(std::env::args()) {
        Ok(args) => args,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_))) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
