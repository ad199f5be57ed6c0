use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use clutter_core::harness::{
    run_benchmark, run_episode_with, write_depth_png, EpisodeOptions, ExperimentConfig, Pipeline, Policy,
};
use clutter_core::uncertainty::{write_grid_csv, write_heatmap_png};

#[derive(Parser)]
#[command(name = "clutter", version, about = "Multi-view recognition of tabletop clutter with push exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print or save its log.
    Run {
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        #[arg(long, default_value = "smart")]
        policy: Policy,
        /// Maximum number of pushes.
        #[arg(long)]
        budget: Option<usize>,
        /// Termination threshold on peak uncertainty (smart policy).
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        views: Option<usize>,
        #[arg(long, default_value_t = 10)]
        objects: usize,
        /// Base configuration file; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for the episode log and per-step heatmaps.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the seeded benchmark described by a config file.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Worker threads (results do not depend on this).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write depth images and uncertainty maps of a generated scene.
    Render {
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        #[arg(long, default_value_t = 10)]
        objects: usize,
        #[arg(long)]
        views: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "render-out")]
        out: PathBuf,
    },
    /// Print the default configuration file.
    Config,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            scene_seed,
            policy,
            budget,
            threshold,
            views,
            objects,
            config,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(t) = threshold {
                cfg.termination_threshold = t;
            }
            if let Some(v) = views {
                cfg.views = v;
            }
            let settings = cfg.settings(objects)?;
            let options = EpisodeOptions {
                heatmap_dir: out.clone(),
            };
            if let Some(dir) = &out {
                create_dir(dir)?;
            }
            let log = run_episode_with(&settings, policy, scene_seed, &options)?;
            let json = log.to_json()?;
            match out {
                Some(dir) => {
                    let path = dir.join(format!("{policy}_{objects}_{scene_seed}.json"));
                    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
                }
                None => println!("{json}"),
            }
            let m = log.metrics;
            eprintln!(
                "{policy}: P {:.2} R {:.2} F1 {:.2} after {} motion(s)",
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1,
                log.motions
            );
        }
        Command::Bench { config, out, jobs } => {
            let cfg = load_config(config.as_deref())?;
            create_dir(&out)?;
            let report = run_benchmark(&cfg, jobs, Some(&out))?;
            print!("{}", report.summary_text());
        }
        Command::Render {
            scene_seed,
            objects,
            views,
            config,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(v) = views {
                cfg.views = v;
            }
            let pipeline = Pipeline::new(&cfg.settings(objects)?)?;
            let scene = pipeline.scene(scene_seed);
            let obs = pipeline.observe(&scene, scene_seed, 0)?;
            create_dir(&out)?;
            scene.save(&out.join("scene.toml"))?;
            for (k, r) in obs.renderings.iter().enumerate() {
                write_depth_png(&r.image, &out.join(format!("view{k}_depth.png")))?;
            }
            for (name, grid) in [
                ("uncertainty", &obs.field.combined),
                ("entropy", &obs.field.entropy),
                ("disagreement", &obs.field.disagreement),
                ("height", obs.heights.grid()),
            ] {
                write_heatmap_png(grid, &out.join(format!("{name}.png")))?;
                write_grid_csv(grid, &out.join(format!("{name}.csv")))?;
            }
            println!(
                "{} objects, {} recognized, peak uncertainty {:.3}",
                scene.len(),
                obs.recognition.total(),
                obs.field.combined.max()
            );
        }
        Command::Config => print!("{}", ExperimentConfig::default().to_toml()?),
    }
    Ok(())
}
