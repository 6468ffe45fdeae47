use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wrs_cli::{bench, simulate, CliError, Overrides};
use wrs_core::{synth_scanpath, SynthParams};
use wrs_live::{LiveConfig, LiveError};

#[derive(Parser)]
#[command(
    name = "wrs",
    version,
    about = "Temporal reservoir sampling over simulated foveated rendering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scanpath over a scene and write frames, metrics and a manifest.
    Simulate(Overrides),
    /// Time each pipeline stage after warmup frames.
    Bench(Overrides),
    /// Stream the live pipeline over a websocket.
    Serve {
        #[command(flatten)]
        run: Overrides,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 30.0)]
        tick_hz: f64,
        /// Directory with a built viewer; defaults to the embedded page.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Scanpath utilities.
    Scanpath {
        #[command(subcommand)]
        command: ScanpathCommand,
    },
}

#[derive(Subcommand)]
enum ScanpathCommand {
    /// Write a synthetic fixation and saccade scanpath as CSV.
    Synth {
        #[command(flatten)]
        run: Overrides,
        #[arg(long)]
        fixations: Option<usize>,
        #[arg(long)]
        fixation_frames: Option<usize>,
        #[arg(long)]
        saccade_deg: Option<f64>,
        #[arg(long)]
        sigma_deg: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wrs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(o) => {
            let cfg = o.resolve()?;
            let out = simulate(&cfg)?;
            let summary = out.report.summary();
            for (method, s) in &summary.methods {
                println!(
                    "{method}: {} frames, mean PSNR {:.3} dB, mean SSIM {:.4}",
                    s.frames, s.mean_psnr_db, s.mean_ssim
                );
            }
            println!("wrote {}", cfg.out.display());
            Ok(())
        }
        Command::Bench(o) => {
            let cfg = o.resolve()?;
            let report = bench(&cfg)?;
            std::fs::create_dir_all(&cfg.out).map_err(CliError::runtime)?;
            let path = cfg.out.join(wrs_cli::bench::BENCH_JSON);
            std::fs::write(&path, report.to_json()).map_err(CliError::runtime)?;
            print!("{}", report.table());
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Serve {
            run,
            port,
            host,
            tick_hz,
            assets,
        } => {
            let cfg = run.resolve()?;
            let scene = cfg
                .scene
                .ok_or_else(|| CliError::config("scene", "live mode needs a procedural scene"))?;
            let live = LiveConfig {
                scene,
                geometry: cfg.geometry,
                pipeline: cfg.pipeline,
                seed: cfg.seed,
                method: Default::default(),
                tick_hz,
            };
            live.validate().map_err(|e| CliError::config("serve", e))?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::config("host", e))?;
            let rt = tokio::runtime::Runtime::new().map_err(CliError::runtime)?;
            rt.block_on(async {
                let server = wrs_live::bind(live, addr).await.map_err(|e| match e {
                    LiveError::Config(_) | LiveError::Core(_) => CliError::config("serve", e),
                    other => CliError::runtime(other),
                })?;
                eprintln!(
                    "serving on http://{}",
                    server.local_addr().map_err(CliError::runtime)?
                );
                server
                    .with_assets(assets)
                    .run()
                    .await
                    .map_err(CliError::runtime)
            })
        }
        Command::Scanpath {
            command:
                ScanpathCommand::Synth {
                    run,
                    fixations,
                    fixation_frames,
                    saccade_deg,
                    sigma_deg,
                },
        } => {
            let cfg = run.resolve()?;
            let mut params = match cfg.scanpath {
                wrs_cli::ScanpathSource::Synth(p) => p,
                wrs_cli::ScanpathSource::Path(_) => SynthParams::default(),
            };
            params.fixations = fixations.unwrap_or(params.fixations);
            params.fixation_frames = fixation_frames.unwrap_or(params.fixation_frames);
            params.saccade_deg = saccade_deg.unwrap_or(params.saccade_deg);
            params.jitter_sigma_deg = sigma_deg.unwrap_or(params.jitter_sigma_deg);
            if run.seed.is_some() {
                params.seed = cfg.seed;
            }
            let sp = synth_scanpath(&params, &cfg.geometry)
                .map_err(|e| CliError::config("scanpath", e))?;
            let path = if cfg.out.extension().is_some_and(|e| e == "csv") {
                cfg.out.clone()
            } else {
                std::fs::create_dir_all(&cfg.out).map_err(CliError::runtime)?;
                cfg.out.join("scanpath.csv")
            };
            sp.write_csv(&path).map_err(CliError::runtime)?;
            println!("wrote {} ({} samples)", path.display(), sp.samples().len());
            Ok(())
        }
    }
}
