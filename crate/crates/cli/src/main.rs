use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slide_core::acquisition::{config_hash, generate_batch, Batch, Generator};
use slide_core::pipeline::{bench_csv, benchmark, run_eval, EvalCycle, EVAL_DURATION};
use slide_core::slide::{arrange_dataset, load_sldx, probe_window, save_sldx, sensor_preset, PROBE_BATCH};
use slide_core::surrogate::{build_network, hidden_units_preset, load_snet, save_snet, train, ArchSpec, NetMeta, TrainParams};
use slide_core::{Config, Error};

#[derive(Parser)]
#[command(name = "slide", version, about = "Flexible boom simulation and windowed deflection surrogates")]
struct Cli {
    /// TOML file overriding the default model parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Beam model summary.
    Fem {
        #[command(subcommand)]
        what: FemCommand,
    },
    /// Simulate a batch of randomized trajectories.
    Gen {
        #[arg(long)]
        batch: usize,
        #[arg(long, default_value_t = 0.0)]
        payload: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write one CSV per trajectory into this directory.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Estimate the window length from decay probes at the batch payload.
    SlideWindow {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = PROBE_BATCH)]
        probe_batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to tdwindow.json next to the data file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut a batch into scaled training windows.
    Arrange {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        td: usize,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        sensors: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network on an arranged dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "L")]
        arch: String,
        /// td, 2td, 3td or a plain count.
        #[arg(long, default_value = "td")]
        units: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f32>,
    },
    /// Run a trained network on the scripted evaluation cycle.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        payload: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time simulation against inference for several batch sizes.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "80,160,320")]
        batches: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        payload: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum FemCommand {
    /// Node count, lowest frequencies and the tip-load check.
    Info,
}

fn load_config(path: Option<&Path>) -> slide_core::Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Fem { what: FemCommand::Info } => {
            let modal = cfg.modal_model()?;
            let fe = modal.fe_model();
            let spec = &fe.spec;
            println!("nodes: {}", fe.n_nodes());
            let freqs: Vec<String> = modal.frequencies.iter().take(5).map(|f| format!("{f:.3}")).collect();
            println!("frequencies_hz: {}", freqs.join(" "));
            println!("analytic_f1_hz: {:.3}", spec.analytic_first_frequency());
            let force = 1000.0;
            let fem = fe.static_tip_deflection(force)?;
            let exact = force * spec.length.powi(3) / (3.0 * spec.bending_stiffness());
            println!(
                "tip_deflection_m: {fem:.6e} (analytic {exact:.6e}, rel err {:.2e})",
                ((fem - exact) / exact).abs()
            );
        }
        Command::Gen {
            batch,
            payload,
            seed,
            out,
            csv,
        } => {
            let generator = Generator::from_config(&cfg, payload)?;
            let data = generate_batch(batch, seed, &generator, config_hash(&cfg, payload, seed, batch))?;
            data.save(&out)?;
            if let Some(dir) = csv {
                data.write_csv_dir(&dir)?;
            }
            let retries: u32 = data.trajectories.iter().map(|t| t.retries() as u32).sum();
            println!(
                "wrote {} trajectories to {} ({retries} retries, config {})",
                data.trajectories.len(),
                out.display(),
                data.config_hash
            );
        }
        Command::SlideWindow {
            data,
            probe_batch,
            seed,
            out,
        } => {
            let batch = Batch::load(&data)?;
            let generator = Generator::from_config(&cfg, batch.payload)?;
            let window = probe_window(&generator, probe_batch, seed)?;
            let out = out.unwrap_or_else(|| data.with_file_name("tdwindow.json"));
            std::fs::write(&out, serde_json::to_string_pretty(&window)?)?;
            println!("t_d = {} steps ({:.3} s)", window.steps, window.seconds);
        }
        Command::Arrange {
            data,
            td,
            k,
            sensors,
            out,
        } => {
            let batch = Batch::load(&data)?;
            let (train_ds, val_ds) = arrange_dataset(&batch, td, k, &sensor_preset(sensors)?)?;
            save_sldx(&out, &train_ds, &val_ds)?;
            println!("{} training and {} validation windows", train_ds.n_samples, val_ds.n_samples);
        }
        Command::Train {
            data,
            arch,
            units,
            seed,
            out,
            max_epochs,
            lr,
        } => {
            let (train_ds, val_ds) = load_sldx(&data)?;
            let hidden = hidden_units_preset(&units, train_ds.t_d)?;
            let spec = ArchSpec::new(&arch, hidden, train_ds.n_inputs(), train_ds.n_outputs())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = build_network(&spec, NetMeta::from_dataset(&train_ds), &mut rng)?;
            let mut params = TrainParams {
                seed,
                ..TrainParams::default()
            };
            if let Some(n) = max_epochs {
                params.max_epochs = n;
            }
            if let Some(lr) = lr {
                params.learning_rate = lr;
            }
            let (best, history) = train(&net, &train_ds, &val_ds, &params)?;
            save_snet(&out, &best)?;
            std::fs::write(out.with_file_name("history.csv"), history.to_csv())?;
            println!(
                "best validation mse {:.3e} at epoch {} of {}",
                history.best_val,
                history.best_epoch,
                history.records.len()
            );
        }
        Command::Eval {
            model,
            payload,
            seed,
            out,
        } => {
            let net = load_snet(&model)?;
            let generator = Generator::from_config(&cfg, payload)?;
            let cycle = EvalCycle::new(EVAL_DURATION, generator.integrator.dt, payload, seed);
            std::fs::create_dir_all(&out)?;
            let m = run_eval(&net, &cycle, &generator, &out)?;
            println!("MAPE {:.3}%  MAE {:.4e} m  ({} points)", m.mape, m.mae, m.n_points);
        }
        Command::Bench {
            model,
            batches,
            out,
            payload,
            seed,
        } => {
            if batches.is_empty() {
                bail!(Error::InvalidArgument("no batch sizes given".into()));
            }
            let net = load_snet(&model)?;
            let generator = Generator::from_config(&cfg, payload)?;
            let rows = benchmark(&net, &generator, &batches, seed)?;
            let csv = bench_csv(&rows);
            std::fs::write(&out, &csv).with_context(|| format!("writing {}", out.display()))?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
