use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand};

use fris_core::harness::{
    compare_scenarios, fit_distances, fit_models, parse_config, run_oracle, run_scenario, write_curve,
    FitMethod, FitSpec, RunOptions, ScenarioSpec,
};
use fris_core::mixture::{TrainingSet, DEFAULT_EM_TOLERANCE};
use fris_core::{Error, Result};

#[derive(Parser)]
#[command(name = "fris", version, about = "Outage simulation for fluid reconfigurable surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Replace the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the scenario's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its outage curve.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Curve destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the training magnitudes, one per line.
        #[arg(long)]
        samples_out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit Nakagami models to a file of magnitudes.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long, default_value_t = DEFAULT_EM_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the swarm with brute force on a small fluid scenario.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Paired comparison of two scenarios.
    Compare {
        /// Give twice: `--config a.cfg --config b.cfg`.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

static CANCEL: AtomicBool = AtomicBool::new(false);

fn load(path: &Path, o: &Overrides) -> Result<ScenarioSpec> {
    let mut spec = parse_config(path)?;
    if let Some(s) = o.seed {
        spec.master_seed = s;
    }
    if let Some(t) = o.trials {
        spec.trials = t;
    }
    spec.validate()?;
    Ok(spec)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            samples_out,
            overrides,
        } => {
            let spec = load(&config, &overrides)?;
            let opts = RunOptions {
                threads: overrides.threads,
                cancel: Some(&CANCEL),
            };
            let report = run_scenario(&spec, opts)?;
            if report.truncated {
                eprintln!("interrupted: writing {} completed trials", report.magnitudes.len());
            }
            emit(&out, &write_curve(&report))?;
            if let Some(p) = samples_out {
                let data = match report.training {
                    Some(t) => t,
                    None => TrainingSet::new(report.magnitudes.clone(), "monte carlo trials")?,
                };
                data.write(&p)?;
            }
        }
        Command::Fit {
            samples,
            components,
            tol,
            seed,
            out,
        } => {
            let data = TrainingSet::read(&samples)?;
            let fit = FitSpec {
                q: components,
                t_sp: data.len(),
                tol,
                methods: vec![FitMethod::Em, FitMethod::Mom, FitMethod::Ks],
            };
            if components == 0 {
                return Err(Error::Config {
                    field: "components",
                    reason: "must be at least 1".into(),
                });
            }
            let models = fit_models(&data, &fit, seed)?;
            let mut text = String::new();
            if let Some(em) = &models.em {
                for (i, c) in em.components.iter().enumerate() {
                    text += &format!(
                        "em component={i} alpha={:.10e} m={:.10e} omega={:.10e}\n",
                        c.weight, c.shape, c.mean_power
                    );
                }
                text += &format!("em converged={} iterations={}\n", em.converged, em.fit_log.len());
            }
            for (name, c) in [("mom", &models.mom), ("ks", &models.ks)] {
                if let Some(c) = c {
                    text += &format!("{name} m={:.10e} omega={:.10e}\n", c.shape, c.mean_power);
                }
            }
            for (method, d) in fit_distances(&data, &models) {
                text += &format!("ks_distance {method}={d:.6e}\n");
            }
            emit(&out, &text)?;
        }
        Command::Oracle {
            config,
            out,
            overrides,
        } => {
            let mut spec = load(&config, &overrides)?;
            if overrides.trials.is_none() {
                spec.trials = spec.trials.min(100);
            }
            let rows = run_oracle(
                &spec,
                spec.trials,
                RunOptions {
                    threads: overrides.threads,
                    cancel: None,
                },
            )?;
            let mut text = String::from("trial,exhaustive,epso,ratio,same_selection\n");
            let mut hits = 0;
            for r in &rows {
                let ratio = if r.exhaustive > 0.0 { r.epso / r.exhaustive } else { 1.0 };
                hits += usize::from(ratio >= 0.99);
                text += &format!(
                    "{},{:.12e},{:.12e},{:.6},{}\n",
                    r.trial, r.exhaustive, r.epso, ratio, r.same_selection
                );
            }
            text += &format!("# within_1pct={hits}/{}\n", rows.len());
            emit(&out, &text)?;
        }
        Command::Compare {
            config,
            out,
            overrides,
        } => {
            if config.len() != 2 {
                return Err(Error::Config {
                    field: "config",
                    reason: format!("compare takes exactly two scenario files, got {}", config.len()),
                });
            }
            let a = load(&config[0], &overrides)?;
            let b = load(&config[1], &overrides)?;
            let opts = RunOptions {
                threads: overrides.threads,
                cancel: Some(&CANCEL),
            };
            let c = compare_scenarios(&a, &b, opts)?;
            let mut text = format!(
                "# a={} b={} trials={} paired={}\n# dominance P(z_a >= z_b)={:.6}\n",
                a.architecture,
                b.architecture,
                c.a.len(),
                c.paired,
                c.dominance()
            );
            text += "gamma_bar_db,op_a,op_b\n";
            for (db, pa, pb) in c.outage_rows() {
                text += &format!("{db:.12e},{pa:.12e},{pb:.12e}\n");
            }
            emit(&out, &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = ctrlc::set_handler(|| {
        if CANCEL.swap(true, Ordering::Relaxed) {
            std::process::exit(130);
        }
    });
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            let mut lines = msg.lines();
            eprintln!("error[{}]: {}", e.kind(), lines.next().unwrap_or(""));
            for l in lines {
                eprintln!("{l}");
            }
            ExitCode::from(2)
        }
    }
}
