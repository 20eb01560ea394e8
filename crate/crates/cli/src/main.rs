use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tattoo_stats::boost::read_rank_histogram;
use tattoo_stats::data::{export_dataset, ingest, Setting, SynthConfig};
use tattoo_stats::featurize::FeatureMode;
use tattoo_stats::report::{self, plot_rank_histograms, plot_series, InputPaths, ReportOutcome, RunConfig, Scope};
use tattoo_stats::{Error, Result};

#[derive(Parser)]
#[command(name = "tattoo-stats", version, about = "Laser tattoo-removal treatment statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (patients.csv, tattoos.csv, treatments.csv).
    Synth(RunArgs),
    /// Validate the three input tables and list the rows that were excluded.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        /// Also write issues.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-tattoo feature summaries and the correlation-pruning result.
    Featurize(RunArgs),
    /// Proportion, location, rank and ANOVA tables.
    Tests(RunArgs),
    /// Logistic regression on the pruned features.
    Logit(RunArgs),
    /// Bootstrap importance ranking (with the logistic fit for the combined table).
    Rank(RunArgs),
    /// Everything: tables, models, plots and the manifest.
    Report(RunArgs),
    /// Render one SVG chart.
    Plot(PlotArgs),
}

#[derive(Args, Clone, Default)]
struct InputArgs {
    #[arg(long, requires_all = ["tattoos", "treatments"])]
    patients: Option<PathBuf>,
    #[arg(long, requires_all = ["patients", "treatments"])]
    tattoos: Option<PathBuf>,
    #[arg(long, requires_all = ["patients", "tattoos"])]
    treatments: Option<PathBuf>,
}

impl InputArgs {
    fn paths(&self) -> Option<InputPaths> {
        Some(InputPaths {
            patients: self.patients.clone()?,
            tattoos: self.tattoos.clone()?,
            treatments: self.treatments.clone()?,
        })
    }
}

/// Flags override the matching fields of the JSON config.
#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "demo")]
    config: Option<PathBuf>,
    /// Start from the bundled demonstration config.
    #[arg(long)]
    demo: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// full or first-arrival
    #[arg(long)]
    mode: Option<FeatureMode>,
    /// Significance level [default: 0.1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Randomization-test permutations [default: 100000]
    #[arg(long = "n-perm")]
    n_perm: Option<u64>,
    /// Bootstrap fits [default: 300]
    #[arg(long)]
    sims: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match (&self.config, self.demo) {
            (Some(p), _) => RunConfig::from_file(p)?,
            (None, true) => RunConfig::demo(),
            (None, false) => RunConfig::default(),
        };
        if let Some(p) = self.input.paths() {
            c.input = Some(p);
            c.synth = None;
        } else if c.input.is_none() && c.synth.is_none() {
            c.synth = Some(SynthConfig::default());
        }
        if let Some(v) = self.seed {
            c.seed = Some(v);
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.n_perm {
            c.n_perm = v;
        }
        if let Some(v) = self.sims {
            c.sims = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        Ok(c)
    }
}

#[derive(Args)]
struct PlotArgs {
    /// Draw the rank distributions from a rank_histogram.csv.
    #[arg(long, conflicts_with = "tattoo")]
    histogram: Option<PathBuf>,
    /// Draw the treatment series of this tattoo.
    #[arg(long, required_unless_present = "histogram")]
    tattoo: Option<String>,
    /// fluence, spot_size, wavelength or frequency
    #[arg(long, default_value = "fluence")]
    setting: Setting,
    /// Output file; standard output when omitted.
    #[arg(long = "svg")]
    svg: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

fn summarize(outcome: &ReportOutcome) -> ExitCode {
    for name in outcome.bundle.names() {
        println!("{}", outcome.out.join(name).display());
    }
    exit_for_issues(outcome.issues)
}

fn exit_for_issues(issues: usize) -> ExitCode {
    if issues > 0 {
        eprintln!("warning: {issues} input rows failed validation and were excluded (see issues.csv)");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn scoped(args: &RunArgs, scope: Scope, series_plots: bool) -> Result<ExitCode> {
    let mut config = args.resolve()?;
    if !series_plots {
        config.plots.series = 0;
    }
    Ok(summarize(&report::run_scoped(&config, scope)?))
}

const NONE: Scope = Scope { tests: false, logit: false, rank: false, plots: false };

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io { path: p.to_path_buf(), source: e }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth(args) => {
            let mut config = args.resolve()?;
            if config.synth.is_none() {
                config.synth = Some(SynthConfig::default());
                config.input = None;
            }
            let seed = config.seed.ok_or_else(|| Error::Parameter("--seed is required".into()))?;
            let (ds, summary) = report::load_dataset(&config)?;
            export_dataset(&ds, &config.out)?;
            let mut json = serde_json::to_string_pretty(&summary)?;
            json.push('\n');
            let path = config.out.join("synth_summary.json");
            fs::write(&path, json).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            let counts = ds.row_counts();
            println!(
                "seed {seed}: {} patients, {} tattoos, {} treatments -> {}",
                counts.patients,
                counts.tattoos,
                counts.treatments,
                config.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest { input, out } => {
            let p = input
                .paths()
                .ok_or_else(|| Error::Parameter("--patients, --tattoos and --treatments are required".into()))?;
            let ds = ingest(&p.patients, &p.tattoos, &p.treatments)?;
            let c = ds.row_counts();
            println!(
                "{} patients, {} tattoos, {} treatment series ({} treatments), {} issues",
                c.patients, c.tattoos, c.series, c.treatments, c.issues
            );
            for i in &ds.issues {
                let row = i.row.map(|r| format!(" row {r}")).unwrap_or_default();
                eprintln!("{}{row}: {}", i.file, i.message);
            }
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                write_out(Some(&dir.join("issues.csv")), &report::issues_csv(&ds)?)?;
            }
            Ok(exit_for_issues(ds.issues.len()))
        }
        Command::Featurize(args) => {
            let config = args.resolve()?;
            let outcome = report::run_scoped(&config, NONE)?;
            let m = &outcome.manifest;
            eprintln!("retained: {}", m.retained_features.join(", "));
            for r in &m.removed_features {
                eprintln!("removed: {} (mean |r| {:.4})", r.feature, r.mean_abs_r);
            }
            Ok(summarize(&outcome))
        }
        Command::Tests(args) => scoped(&args, Scope { tests: true, ..NONE }, false),
        Command::Logit(args) => scoped(&args, Scope { logit: true, ..NONE }, false),
        Command::Rank(args) => scoped(&args, Scope { rank: true, plots: true, ..NONE }, false),
        Command::Report(args) => scoped(&args, Scope::ALL, true),
        Command::Plot(args) => {
            let svg = if let Some(h) = &args.histogram {
                let file = fs::File::open(h).map_err(|e| Error::Io { path: h.clone(), source: e })?;
                plot_rank_histograms(&read_rank_histogram(file)?, None)
            } else {
                let id = args.tattoo.as_deref().expect("clap requires --tattoo");
                let config = args.run.resolve()?;
                let (ds, _) = report::load_dataset(&config)?;
                let series =
                    ds.series_for(id).ok_or_else(|| Error::Input(format!("no treatment series for tattoo `{id}`")))?;
                plot_series(series, args.setting)
            };
            write_out(args.svg.as_deref(), &svg)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
