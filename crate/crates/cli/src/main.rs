use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fwnmpc::model::{load_model_params, model_params_to_toml, ModelParams};
use fwnmpc::sim::{
    builtin_scenario, load_scenario, run, scenario_to_toml, write_csv, Scenario, SimReport,
    BUILTIN_SCENARIOS,
};
use fwnmpc::sysid::{
    add_noise, estimate, fit_static_curves, fly_maneuver, freeform_spec, perturb, replay,
    split_train_validation, standard_suite, validate, ChannelWeights, Dataset, EstimateOptions,
    FitReport, NoiseTable, Structure,
};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fwnmpc", version, about = "Fixed-wing NMPC path following: simulation and identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write a CSV log.
    Simulate(SimulateArgs),
    /// List the built-in scenarios.
    ListScenarios,
    /// Print a scenario (built-in or file) as a fully explicit scenario file.
    ShowScenario {
        scenario: String,
    },
    /// Print the default model parameters.
    ShowParams,
    /// System identification on synthetic or logged data.
    #[command(subcommand)]
    Sysid(SysidCommand),
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// CSV log destination; `-` writes to stdout.
    #[arg(long)]
    out: PathBuf,
    /// Also write a TOML summary of the run.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Exit with an error if any controller call was degraded or the plant failed.
    #[arg(long)]
    strict: bool,
    /// Include wall-clock solver times in the log and report.
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum SysidCommand {
    /// Fly the standard maneuver suite and write one CSV per flight.
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        /// Parameters of the simulated aircraft; defaults to the nominal set.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Multiplier on the default output noise levels (0 disables noise).
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a freeform flight of this many seconds for replay.
        #[arg(long)]
        freeform: Option<f64>,
        /// Fraction of flights written as training data; the rest go to `validation/`.
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
    },
    /// Estimate one parameter block by output-error minimization.
    Fit {
        /// `cl` (attitude) or `ol` (velocity and throttle).
        #[arg(long)]
        structure: String,
        /// Training CSV files.
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Starting parameters; defaults to the nominal set.
        #[arg(long)]
        initial: Option<PathBuf>,
        /// Scale the starting parameters by random factors 1 ± this fraction.
        #[arg(long)]
        perturb: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplier on the default noise levels used as channel weights.
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        #[arg(long, default_value_t = 200)]
        max_iterations: usize,
        /// Fit report destination (TOML).
        #[arg(long)]
        out: PathBuf,
        /// Also write the starting parameters with the fitted block substituted.
        #[arg(long)]
        params_out: Option<PathBuf>,
    },
    /// Per-channel RMSE of a fit report on held-out CSV files.
    Validate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Physical constants; defaults to the nominal set.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Open-loop replay of a complete parameter set against a logged flight.
    Replay {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Least-squares fit of the static thrust, drag and lift curves.
    Static {
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn resolve_scenario(name: &str) -> Result<Scenario> {
    if let Some(s) = builtin_scenario(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        bail!(
            "`{name}` is neither a built-in scenario ({}) nor a file",
            BUILTIN_SCENARIOS.join(", ")
        );
    }
    Ok(load_scenario(path)?)
}

fn params_or_default(path: Option<&Path>) -> Result<ModelParams> {
    Ok(match path {
        Some(p) => load_model_params(p)?,
        None => ModelParams::default(),
    })
}

fn read_datasets(paths: &[PathBuf]) -> Result<Vec<Dataset>> {
    paths
        .iter()
        .map(|p| Dataset::read_csv(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate(args: &SimulateArgs) -> Result<bool> {
    let scenario = resolve_scenario(&args.scenario)?;
    let log = run(&scenario)?;
    if args.out.as_os_str() == "-" {
        write_csv(&log, std::io::stdout().lock(), args.timing)?;
    } else {
        let file = fs::File::create(&args.out)
            .with_context(|| format!("creating {}", args.out.display()))?;
        write_csv(&log, std::io::BufWriter::new(file), args.timing)?;
    }
    let report = SimReport::new(&log, scenario.v_a_ref, args.timing);
    if let Some(path) = &args.report {
        write_text(path, &report.to_toml()?)?;
    }
    let mut err = std::io::stderr().lock();
    writeln!(
        err,
        "{}: {:.1} s simulated, {} controller calls, {} degraded",
        report.scenario, report.simulated_time, report.solver.calls, report.solver.degraded
    )?;
    if let Some(st) = &report.settled {
        writeln!(
            err,
            "settled: max|e_lat| {:.3} m, max|e_lon| {:.3} m, v_A RMSE {:.3} m/s",
            st.max_abs_e_lat, st.max_abs_e_lon, st.rmse_v_a
        )?;
    }
    if let Some(reason) = &log.terminated {
        writeln!(err, "terminated early: {reason}")?;
    }
    Ok(!(args.strict && (report.solver.degraded > 0 || !report.completed)))
}

fn sysid(cmd: SysidCommand) -> Result<()> {
    match cmd {
        SysidCommand::Generate {
            out_dir,
            params,
            noise_scale,
            seed,
            freeform,
            train_fraction,
        } => {
            let params = params_or_default(params.as_deref())?;
            let noise = NoiseTable::default().scaled(noise_scale);
            let outputs = ["phi", "theta", "p", "q", "r", "v_a", "gamma", "a_x", "a_z"];
            let noisy = |ds: &Dataset, s: u64| -> Result<Dataset> {
                Ok(if noise_scale > 0.0 {
                    add_noise(ds, &outputs, &noise, s)?
                } else {
                    ds.clone()
                })
            };
            let indexed: Vec<usize> = (0..standard_suite().len()).collect();
            let (train, held) = split_train_validation(indexed, train_fraction, seed);
            let specs = standard_suite();
            for (dir, set) in [("train", &train), ("validation", &held)] {
                let dir = out_dir.join(dir);
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                for &i in set.iter() {
                    let flight = fly_maneuver(&params, &specs[i])?;
                    noisy(&flight, seed.wrapping_add(1 + i as u64))?
                        .write_csv(&dir.join(format!("flight_{i:03}.csv")))?;
                }
            }
            if let Some(duration) = freeform {
                let flight = fly_maneuver(&params, &freeform_spec(duration, seed))?;
                noisy(&flight, seed.wrapping_add(10_000))?
                    .write_csv(&out_dir.join("freeform.csv"))?;
            }
            write_text(&out_dir.join("truth.toml"), &model_params_to_toml(&params)?)?;
            eprintln!(
                "wrote {} training and {} validation flights to {}",
                train.len(),
                held.len(),
                out_dir.display()
            );
        }
        SysidCommand::Fit {
            structure,
            data,
            initial,
            perturb: fraction,
            seed,
            noise_scale,
            max_iterations,
            out,
            params_out,
        } => {
            let Some(structure) = Structure::parse(&structure) else {
                bail!("unknown structure `{structure}`; use `cl` or `ol`");
            };
            if !(noise_scale > 0.0) {
                bail!("--noise-scale must be positive for fitting");
            }
            let mut start = params_or_default(initial.as_deref())?;
            if let Some(f) = fraction {
                start = structure.apply(&start, &perturb(&structure.extract(&start), f, seed));
            }
            let datasets = read_datasets(&data)?;
            let weights =
                ChannelWeights::from_noise(structure, &NoiseTable::default().scaled(noise_scale));
            let opts = EstimateOptions {
                max_iterations,
                ..Default::default()
            };
            let report = estimate(structure, &start, &datasets, &weights, &opts)?;
            write_text(&out, &report.to_toml()?)?;
            if let Some(p) = params_out {
                write_text(&p, &model_params_to_toml(&report.apply(&start)?)?)?;
            }
            eprintln!(
                "{:?} after {} iterations, cost {:.6e} -> {:.6e}",
                report.termination, report.iterations, report.initial_cost, report.cost
            );
            for (name, value) in &report.parameters {
                eprintln!(
                    "  {name:>10} = {value:>12.6} ± {:.2e}",
                    report.std_dev.get(name).copied().unwrap_or(f64::NAN)
                );
            }
            if report.failed {
                bail!("estimation failed at the starting point");
            }
        }
        SysidCommand::Validate {
            report,
            data,
            params,
        } => {
            let text = fs::read_to_string(&report)
                .with_context(|| format!("reading {}", report.display()))?;
            let fit = FitReport::from_toml(&text)?;
            let consts = params_or_default(params.as_deref())?.constants;
            let v = validate(&fit, &consts, &read_datasets(&data)?)?;
            println!("datasets = {}\nsamples = {}", v.datasets, v.samples);
            for (c, e) in &v.rmse {
                println!("rmse.{c} = {e}");
            }
        }
        SysidCommand::Replay { params, data } => {
            let params = load_model_params(&params)?;
            let flight = Dataset::read_csv(&data)?;
            let r = replay(&params, &flight)?;
            println!("completed = {}\nduration = {}", r.completed, r.duration);
            for (c, e) in &r.rmse {
                println!("rmse.{c} = {e}");
            }
        }
        SysidCommand::Static { data, params } => {
            let consts = params_or_default(params.as_deref())?.constants;
            let fit = fit_static_curves(&read_datasets(&data)?, &consts)?;
            println!(
                "samples = {}\nrms_residual = {}\nc_t = {:?}\nc_d = {:?}\nc_l = {:?}",
                fit.samples_used, fit.rms_residual, fit.c_t, fit.c_d, fit.c_l
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::ListScenarios => {
            for name in BUILTIN_SCENARIOS {
                let s = builtin_scenario(name).expect("listed scenario exists");
                println!("{name:<14} {}", s.description);
            }
            Ok(true)
        }
        Command::ShowScenario { scenario } => resolve_scenario(&scenario)
            .and_then(|s| Ok(scenario_to_toml(&s)?))
            .map(|t| {
                print!("{t}");
                true
            }),
        Command::ShowParams => model_params_to_toml(&ModelParams::default())
            .map(|t| {
                print!("{t}");
                true
            })
            .map_err(Into::into),
        Command::Sysid(cmd) => sysid(cmd).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("strict mode: run was degraded");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
