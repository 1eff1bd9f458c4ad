use std::path::{Path, PathBuf};
use std::sync::Arc;

use bop2te::boundary::InterimCounts;
use bop2te::optimizer::SearchMethod;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::app;
use crate::config::{parse_phi_grid, DesignConfig, MultiDoseConfig, OcConfig, OcRequest};
use crate::error::AppError;
use crate::protocol::render_protocol;
use crate::report;
use crate::store::{Store, STORE_ENV};

#[derive(Debug, Parser)]
#[command(name = "bop2te", version, about = "Phase II designs with joint efficacy and toxicity monitoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// JSON config file (design spec, or multi-dose spec for simulate-multidose).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for Monte Carlo runs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo replicates.
    #[arg(long, global = true)]
    pub mc: Option<usize>,
    /// Comma separated odds ratios for a sensitivity table, e.g. 0.25,1,4.
    #[arg(long, global = true)]
    pub phi_grid: Option<String>,
    /// Exhaustive search over boundary vectors instead of the cutoff grid.
    #[arg(long, global = true)]
    pub global: bool,
    /// With --global: only vectors that stop whenever the observed rates are
    /// worse than the unacceptable rates.
    #[arg(long, global = true)]
    pub practical_constraint: bool,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Design store (JSON-lines journal).
    #[arg(long, global = true, env = STORE_ENV)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize boundaries for a design spec and save it.
    Design,
    /// Operating characteristics of a saved design (--id) or a spec (--config).
    Oc {
        #[arg(long)]
        id: Option<String>,
        /// Odds ratio at the hypothesis points (default: the design's).
        #[arg(long)]
        phi: Option<f64>,
    },
    /// Simulate a randomized multi-dose trial.
    SimulateMultidose,
    /// Record an interim decision for a saved design; without counts, list
    /// the decisions recorded so far.
    Decide {
        #[arg(long)]
        id: String,
        /// Patients evaluated so far; must be a scheduled look.
        #[arg(long, requires_all = ["x_e", "x_t"])]
        n: Option<usize>,
        /// Cumulative responses.
        #[arg(long = "x-e", requires = "n")]
        x_e: Option<usize>,
        /// Cumulative toxicities.
        #[arg(long = "x-t", requires = "n")]
        x_t: Option<usize>,
    },
    /// Print the protocol text for a saved design.
    Protocol {
        #[arg(long)]
        id: String,
    },
    /// Run the HTTP JSON API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Maximum concurrent computations.
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
}

impl GlobalOpts {
    fn store(&self) -> Result<Store, AppError> {
        Store::open(self.store.clone().unwrap_or_else(Store::default_path))
    }

    fn config_path(&self) -> Result<&Path, AppError> {
        self.config.as_deref().ok_or_else(|| AppError::validation("config", "--config <path> is required"))
    }

    fn search(&self) -> Option<SearchMethod> {
        match (self.global, self.practical_constraint) {
            (true, true) => Some(SearchMethod::GlobalPractical),
            (true, false) => Some(SearchMethod::Global),
            (false, true) => None,
            (false, false) => None,
        }
    }

    fn design_config(&self) -> Result<DesignConfig, AppError> {
        let config: DesignConfig = read_json(self.config_path()?)?;
        self.apply_search(config)
    }

    fn apply_search(&self, mut config: DesignConfig) -> Result<DesignConfig, AppError> {
        if self.practical_constraint && !self.global {
            return Err(AppError::validation("practical_constraint", "--practical-constraint requires --global"));
        }
        if let Some(search) = self.search() {
            config.search = search;
        }
        config.spec.validate()?;
        Ok(config)
    }

    fn oc_request(&self, phi: Option<f64>) -> Result<OcRequest, AppError> {
        Ok(OcRequest {
            phi,
            phi_grid: self.phi_grid.as_deref().map(parse_phi_grid).transpose()?,
            mc: self.mc,
            seed: self.seed,
        })
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::validation("config", format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn render<T: Serialize>(format: Format, value: &T, table: impl FnOnce() -> String) -> Result<String, AppError> {
    Ok(match format {
        Format::Table => table(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value)?;
            s.push('\n');
            s
        }
    })
}

/// Runs one command and returns what it prints.
pub fn execute(cli: &Cli) -> Result<String, AppError> {
    let o = &cli.opts;
    match &cli.command {
        Command::Design => {
            let config = o.design_config()?;
            let store = o.store()?;
            let doc = app::create_design(&store, &config)?;
            let oc = app::oc_report(&doc, &o.oc_request(None)?)?;
            render(o.format, &doc, || format!("{}\n{}", report::design_report(&doc), report::oc_table(&oc)))
        }
        Command::Oc { id, phi } => {
            let request = o.oc_request(*phi)?;
            let report = match (id, &o.config) {
                (Some(id), _) => app::oc_report(&o.store()?.document(id)?, &request)?,
                (None, Some(path)) => {
                    let input: OcConfig = read_json(path)?;
                    let config = o.apply_search(input.design)?;
                    let boundaries = match input.boundaries {
                        Some(b) => b,
                        None => app::run_search(&config)?.boundaries,
                    };
                    app::oc_for_boundaries(None, &config.spec, &boundaries, &request)?
                }
                (None, None) => return Err(AppError::validation("id", "give --id <design> or --config <path>")),
            };
            render(o.format, &report, || report::oc_table(&report))
        }
        Command::SimulateMultidose => {
            let mut config: MultiDoseConfig = read_json(o.config_path()?)?;
            if let Some(reps) = o.mc {
                config.replicates = reps;
            }
            if let Some(seed) = o.seed {
                config.seed = seed;
            }
            let result = app::run_multidose(&config)?;
            render(o.format, &result, || report::multidose_table(&config, &result))
        }
        Command::Decide { id, n, x_e, x_t } => {
            let store = o.store()?;
            match (n, x_e, x_t) {
                (Some(n), Some(x_e), Some(x_t)) => {
                    let entry = app::record_decision(&store, id, InterimCounts { n: *n, x_e: *x_e, x_t: *x_t })?;
                    render(o.format, &entry, || report::decision_text(&entry.record))
                }
                _ => {
                    let log = store.decisions(id)?;
                    render(o.format, &log, || report::decision_log_table(&log))
                }
            }
        }
        Command::Protocol { id } => {
            let doc = o.store()?.document(id)?;
            let text = render_protocol(&doc)?;
            render(o.format, &serde_json::json!({ "document_id": doc.id, "text": text }), || text.clone())
        }
        Command::Serve { bind, workers } => {
            let store = Arc::new(o.store()?);
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(crate::server::serve(store, bind, *workers))?;
            Ok(String::new())
        }
    }
}

/// Executes the command and writes its output to `--out` or stdout.
pub fn run(cli: &Cli) -> Result<(), AppError> {
    let output = execute(cli)?;
    match &cli.opts.out {
        Some(path) => std::fs::write(path, output)?,
        None => print!("{output}"),
    }
    Ok(())
}
