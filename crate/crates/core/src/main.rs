use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use pedeval::annotation::{self, Dataset};
use pedeval::config::Settings;
use pedeval::error::{Error, Result};
use pedeval::metrics::instance::WrongLabelRule;
use pedeval::plot;
use pedeval::predlog::{self, JoinPolicy, PredictionRecord};
use pedeval::report::{self, EvalOptions, MetricReport};
use pedeval::sampler::Task;
use pedeval::scenario::{self, Factor};
use pedeval::synth::{self, IntentionLaw, Predictor, SynthPaths, SynthSpec};
use pedeval::pipeline;

#[derive(Parser)]
#[command(name = "pedeval", version, about = "Pedestrian behavior prediction benchmark evaluator")]
struct Cli {
    /// Worker threads for sampling; 0 uses all cores.
    #[arg(long, global = true, env = "PEDEVAL_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset file and print a summary.
    IngestCheck { dataset: PathBuf },
    /// Write the samples of one task as JSON lines.
    Sample {
        dataset: PathBuf,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Join predictions with samples and write the metric report.
    Evaluate {
        dataset: PathBuf,
        predictions: PathBuf,
        #[arg(long)]
        task: Task,
        /// Only use records of this model.
        #[arg(long)]
        model: Option<String>,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-class table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Markdown summary.
        #[arg(long)]
        markdown: Option<PathBuf>,
        /// Include the scenario slice table.
        #[arg(long)]
        scenario: bool,
        /// Action predictions on the intention windows, for the agreement table.
        #[arg(long)]
        agreement_predictions: Option<PathBuf>,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Scenario slice table as CSV.
    Scenario {
        dataset: PathBuf,
        predictions: PathBuf,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        model: Option<String>,
        /// Additionally slice by two factors jointly (experimental).
        #[arg(long, num_args = 2, value_parser = parse_enum::<Factor>)]
        pair: Option<Vec<Factor>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Intention/action agreement table as CSV.
    Agreement {
        dataset: PathBuf,
        intention_predictions: PathBuf,
        /// Action predictions on the intention windows.
        action_predictions: PathBuf,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Generate a seeded synthetic dataset with prediction logs.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_instances: usize,
        #[arg(long, default_value_t = 60)]
        track_len_min: u32,
        #[arg(long, default_value_t = 300)]
        track_len_max: u32,
        #[arg(long, default_value_t = 0.28)]
        crossing_frac: f64,
        /// uniform | bimodal
        #[arg(long, default_value = "bimodal")]
        intention_law: IntentionLaw,
        /// oracle | anti_oracle | noisy:<eps> | constant:<class>
        #[arg(long, default_value = "noisy:0.3")]
        predictor: Predictor,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Per-class AP bar chart of a report.
    Plot {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Every settings key as an optional flag; flags override the config file.
#[derive(Args, Default)]
struct SettingsArgs {
    /// TOML or JSON settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    obs_len: Option<u32>,
    #[arg(long)]
    overlap_frac: Option<f64>,
    #[arg(long)]
    tte_min: Option<u32>,
    #[arg(long)]
    tte_max: Option<u32>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long, num_args = 2)]
    intention_bins: Option<Vec<f64>>,
    #[arg(long)]
    keep_long_tte: Option<bool>,
    #[arg(long)]
    windows_from_exp_start: Option<bool>,
    #[arg(long)]
    region_width: Option<f64>,
    #[arg(long)]
    n_regions: Option<u32>,
    #[arg(long)]
    sigma_r: Option<f64>,
    #[arg(long)]
    sigma_a: Option<f64>,
    #[arg(long)]
    tte_max_ref: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    scale_bins: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    speed_bins: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_enum::<Factor>)]
    factors: Option<Vec<Factor>>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long, value_parser = parse_enum::<JoinPolicy>)]
    join: Option<JoinPolicy>,
    #[arg(long, value_parser = parse_enum::<WrongLabelRule>)]
    wrong_label: Option<WrongLabelRule>,
    #[arg(long)]
    per_class_delta: Option<bool>,
    #[arg(long)]
    export_weights: Option<bool>,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl SettingsArgs {
    fn resolve(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { s.$field = v.clone(); })*
            };
        }
        apply!(
            obs_len, overlap_frac, tte_min, tte_max, horizon, keep_long_tte,
            windows_from_exp_start, region_width, n_regions, sigma_r, sigma_a,
            scale_bins, speed_bins, factors, min_samples, join, wrong_label,
            per_class_delta, export_weights
        );
        if let Some(b) = &self.intention_bins {
            s.intention_bins = [b[0], b[1]];
        }
        if self.tte_max_ref.is_some() {
            s.tte_max_ref = self.tte_max_ref;
        }
        s.validate()?;
        Ok(s)
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(dataset: &Path, predictions: &Path, settings: &Settings) -> Result<(Dataset, Vec<PredictionRecord>)> {
    let ds = annotation::read_dataset(dataset)?;
    let preds = predlog::read_predictions(predictions, settings.n_regions)?;
    Ok((ds, preds))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestCheck { dataset } => {
            let ds = annotation::read_dataset(&dataset)?;
            let frames: usize = ds.instances.iter().map(annotation::instance_duration).sum();
            println!(
                "{}: {} ({}) ok, {} videos, {} instances, {} frames",
                dataset.display(),
                ds.name,
                ds.split,
                ds.videos.len(),
                ds.instances.len(),
                frames
            );
        }
        Command::Sample {
            dataset,
            task,
            out,
            settings,
        } => {
            let settings = settings.resolve()?;
            let ds = annotation::read_dataset(&dataset)?;
            let samples = pipeline::samples_for_task(&ds, task, &settings.sampler(), &settings.grid());
            log::info!("{} {task} samples", samples.len());
            write_or_print(out.as_deref(), &predlog::samples_to_string(&samples)?)?;
        }
        Command::Evaluate {
            dataset,
            predictions,
            task,
            model,
            out,
            csv,
            markdown,
            scenario,
            agreement_predictions,
            settings,
        } => {
            let settings = settings.resolve()?;
            let (ds, preds) = load(&dataset, &predictions, &settings)?;
            let agreement_predictions = agreement_predictions
                .map(|p| predlog::read_predictions(p, settings.n_regions))
                .transpose()?;
            let opts = EvalOptions {
                model,
                scenario,
                scenario_pair: None,
                agreement_predictions,
            };
            let r = report::evaluate(&ds, &preds, task, &settings, &opts)?;
            write_or_print(out.as_deref(), &r.to_json()?)?;
            if let Some(p) = csv {
                write_or_print(Some(&p), &r.per_class_csv()?)?;
            }
            if let Some(p) = markdown {
                write_or_print(Some(&p), &r.to_markdown())?;
            }
        }
        Command::Scenario {
            dataset,
            predictions,
            task,
            model,
            pair,
            out,
            settings,
        } => {
            let settings = settings.resolve()?;
            let (ds, preds) = load(&dataset, &predictions, &settings)?;
            let opts = EvalOptions {
                model,
                scenario: true,
                scenario_pair: pair.map(|p| (p[0], p[1])),
                agreement_predictions: None,
            };
            let r = report::evaluate(&ds, &preds, task, &settings, &opts)?;
            let bins = r.scenario.unwrap_or_default();
            write_or_print(out.as_deref(), &scenario::slices_to_csv(&bins)?)?;
        }
        Command::Agreement {
            dataset,
            intention_predictions,
            action_predictions,
            model,
            out,
            settings,
        } => {
            let settings = settings.resolve()?;
            let (ds, preds) = load(&dataset, &intention_predictions, &settings)?;
            let action = predlog::read_predictions(&action_predictions, settings.n_regions)?;
            let opts = EvalOptions {
                model,
                scenario: false,
                scenario_pair: None,
                agreement_predictions: Some(action),
            };
            let r = report::evaluate(&ds, &preds, Task::Intention, &settings, &opts)?;
            let section = r.agreement.expect("requested agreement section");
            for (k, v) in &section.outcomes {
                log::info!("{k}: {v:.6}");
            }
            write_or_print(out.as_deref(), &scenario::agreement_to_csv(&section.cells)?)?;
        }
        Command::Synth {
            out_dir,
            n_instances,
            track_len_min,
            track_len_max,
            crossing_frac,
            intention_law,
            predictor,
            seed,
        } => {
            let spec = SynthSpec {
                n_instances,
                track_len_range: [track_len_min, track_len_max],
                crossing_frac,
                intention_prob_law: intention_law,
                predictor,
                seed,
            };
            let out = synth::generate(&spec)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let paths = SynthPaths::in_dir(&out_dir);
            synth::write_outputs(&out, &paths)?;
            println!(
                "{} instances, {} predictions -> {}",
                out.dataset.instances.len(),
                out.predictions.len(),
                out_dir.display()
            );
        }
        Command::Plot { report, out } => {
            let text = std::fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            let r = MetricReport::from_json(&text)?;
            write_or_print(Some(&out), &plot::per_class_ap_svg(&r)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = cli.threads;
    match pipeline::with_threads(threads, || run(cli)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
