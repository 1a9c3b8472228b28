use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cpalign::sim::checks::run_checks;
use cpalign::sim::complexity::{count_similarity_ops, SimilarityMode};
use cpalign::sim::config::SimConfig;
use cpalign::sim::pgm::write_pgm;
use cpalign::sim::{generate_scenario, run_sweep, CodecMode, Pipeline, RunOptions, Scenario, Template};
use cpalign::temporal::{temporal_loss_tallied, CosineGranularity, OpCounts};
use cpalign::Tensor3;

#[derive(Parser)]
#[command(name = "cpalign", version, about = "Collaborative perception alignment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults are used when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Scenario JSON written by `gen`; generated from the config when omitted.
    #[arg(short, long)]
    scenario: Option<PathBuf>,
    /// Overrides `scenario.template`.
    #[arg(long, value_parser = parse_template)]
    template: Option<Template>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write it as JSON.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// One end-to-end pipeline run, reported as JSON.
    Run {
        #[command(flatten)]
        common: Common,
        /// Evaluation time in seconds.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long)]
        tau_ms: Option<f64>,
        #[arg(long)]
        no_ptam: bool,
        #[arg(long)]
        no_phd: bool,
        #[arg(long, value_parser = parse_codec)]
        codec: Option<CodecMode>,
        #[arg(long)]
        sigma_local_m: Option<f64>,
        #[arg(long)]
        sigma_head_deg: Option<f64>,
        /// Report path; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Directory for PGM foreground maps.
        #[arg(long)]
        pgm_dir: Option<PathBuf>,
    },
    /// Delay and noise sweep written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write per-point aggregates as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Similarity operation counts, closed form and instrumented.
    Bench {
        #[arg(long, default_value_t = 64)]
        channels: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 16)]
        window: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in property checks.
    Check {
        /// Include the end-to-end delay sweep.
        #[arg(long)]
        sweep: bool,
    },
    /// Write the configured networks to a weight archive.
    Weights {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn parse_template(s: &str) -> Result<Template, String> {
    match s {
        "straight" => Ok(Template::Straight),
        "crossing" => Ok(Template::Crossing),
        "turning" => Ok(Template::Turning),
        _ => Err(format!("unknown template `{s}` (straight, crossing, turning)")),
    }
}

fn parse_codec(s: &str) -> Result<CodecMode, String> {
    match s {
        "identity" => Ok(CodecMode::Identity),
        "fp16" => Ok(CodecMode::Fp16),
        "int8" => Ok(CodecMode::Int8),
        _ => Err(format!("unknown codec `{s}` (identity, fp16, int8)")),
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        Some(p) => SimConfig::from_file(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(SimConfig::default()),
    }
}

fn setup(common: &Common) -> Result<(SimConfig, Scenario)> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(t) = common.template {
        cfg.scenario.template = t;
    }
    let scenario = match &common.scenario {
        Some(p) => Scenario::read_json(File::open(p).with_context(|| format!("opening {}", p.display()))?)?,
        None => generate_scenario(&cfg.scenario)?,
    };
    Ok((cfg, scenario))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchReport {
    channels: usize,
    height: usize,
    width: usize,
    window: usize,
    global: OpCounts,
    blockwise: OpCounts,
    ratio: f64,
    instrumented: OpCounts,
    instrumented_matches: bool,
}

fn bench(c: usize, h: usize, w: usize, l: usize) -> Result<BenchReport> {
    let global = count_similarity_ops(c, h, w, l, SimilarityMode::Global)?;
    let blockwise = count_similarity_ops(c, h, w, l, SimilarityMode::Blockwise)?;
    let pred = Tensor3::from_fn(c, h, w, |k, y, x| ((k * 31 + y * 7 + x) as f64 * 0.37).sin() + 1.5);
    let gt = Tensor3::from_fn(c, h, w, |k, y, x| ((k * 13 + y * 3 + x * 5) as f64 * 0.21).cos() + 1.5);
    let mut tally = OpCounts::default();
    temporal_loss_tallied(&[pred], &[gt], l, CosineGranularity::Cell, &mut tally)?;
    Ok(BenchReport {
        channels: c,
        height: h,
        width: w,
        window: l,
        global,
        blockwise,
        ratio: blockwise.mul as f64 / global.mul as f64,
        instrumented: tally,
        instrumented_matches: tally == blockwise,
    })
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { common, out } => {
            let (_, scenario) = setup(&common)?;
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            scenario.write_json(BufWriter::new(f))?;
        }
        Command::Run {
            common,
            time,
            tau_ms,
            no_ptam,
            no_phd,
            codec,
            sigma_local_m,
            sigma_head_deg,
            out,
            pgm_dir,
        } => {
            let (cfg, scenario) = setup(&common)?;
            let t = time.unwrap_or(cfg.run.time);
            let mut opts = RunOptions::from_config(&cfg);
            if let Some(v) = tau_ms {
                opts.tau_ms = v;
            }
            opts.ptam &= !no_ptam;
            opts.phd &= !no_phd;
            if let Some(m) = codec {
                opts.codec.mode = m;
            }
            if let Some(v) = sigma_local_m {
                opts.sigma_local_m = v;
            }
            if let Some(v) = sigma_head_deg {
                opts.sigma_head_deg = v;
            }
            let pipeline = Pipeline::new(cfg, scenario)?;
            let (report, artifacts) = pipeline.run_detailed(t, &opts)?;
            if let Some(dir) = pgm_dir {
                std::fs::create_dir_all(&dir)?;
                let mut maps = vec![("ego", &artifacts.ego_map), ("fused", &artifacts.final_map)];
                let names: Vec<String> = (0..artifacts.collaborator_maps.len())
                    .map(|i| format!("collaborator{i}"))
                    .collect();
                for (n, m) in names.iter().zip(&artifacts.collaborator_maps) {
                    maps.push((n.as_str(), m));
                }
                for (name, map) in maps {
                    let p = dir.join(format!("{name}.pgm"));
                    write_pgm(map, 0.0, 1.0, BufWriter::new(File::create(&p)?))?;
                }
            }
            write_json(&report, out.as_deref())?;
        }
        Command::Sweep { common, out, json } => {
            let (cfg, scenario) = setup(&common)?;
            if cfg.sweep.tau_ms.is_empty() {
                bail!("sweep.tau_ms is empty");
            }
            let pipeline = Pipeline::new(cfg, scenario)?;
            let report = run_sweep(&pipeline)?;
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            report.write_csv(BufWriter::new(f))?;
            if let Some(p) = json {
                write_json(&report, Some(&p))?;
            }
        }
        Command::Bench {
            channels,
            height,
            width,
            window,
            out,
        } => {
            write_json(&bench(channels, height, width, window)?, out.as_deref())?;
        }
        Command::Check { sweep } => {
            let results = run_checks(sweep);
            let mut failed = 0;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += usize::from(!r.passed);
            }
            println!("{} checks, {failed} failed", results.len());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Weights { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let models = cpalign::sim::Models::load(&cfg)?;
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            models.export().write_to(BufWriter::new(f))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
