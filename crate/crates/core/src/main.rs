use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use excessd::ingest::FitWindow;
use excessd::report::{self, RunConfig};
use excessd::timeseries::{Backend, MadWindow};

#[derive(Parser)]
#[command(
    name = "excessd",
    version,
    about = "Excess-mortality baselines, covid death cross-prediction and impact indexes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit baselines and write forecasts.csv
    Forecast(Opts),
    /// Write excess.csv (actual minus expected deaths)
    Excess(Opts),
    /// Write regressions.json (DC vs CC and DC vs EM)
    Regress(Opts),
    /// Write indexes.csv and, with --charts, the bar charts
    Indexes(Opts),
    /// Run every stage and write summary.json
    Pipeline(Opts),
}

fn parse_targets(s: &str) -> Result<Vec<i32>, String> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("'{t}' is not a year")))
        .collect()
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (code, area) = s.split_once('=').ok_or_else(|| format!("'{s}' is not CODE=AREA"))?;
    let area: f64 = area.parse().map_err(|_| format!("'{area}' is not a number"))?;
    Ok((code.trim().to_uppercase(), area))
}

#[derive(Args)]
struct Opts {
    /// Long-format all-cause deaths CSV (country_code,year,deaths)
    #[arg(long)]
    deaths: PathBuf,
    /// Annual covid CSV (country_code,year,cases,deaths)
    #[arg(long)]
    covid: Option<PathBuf>,
    /// Registry CSV replacing the embedded EU-27 registry
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value = "2010:2019")]
    fit_window: FitWindow,
    #[arg(long, default_value = "2020,2021", value_parser = parse_targets)]
    targets: std::vec::Vec<i32>,
    #[arg(long, default_value = "arima-init")]
    backend: Backend,
    #[arg(long, default_value_t = 0.95)]
    coverage: f64,
    /// Persons per standardization unit
    #[arg(long, default_value_t = 100_000.0)]
    std_unit: f64,
    #[arg(long, default_value = "all")]
    mad_window: MadWindow,
    /// Countries left out of rankings and bar charts, e.g. CY,LU,MT
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    /// Effective land area for a country, e.g. SE=205170 (repeatable)
    #[arg(long = "area-override", value_parser = parse_override)]
    area_overrides: Vec<(String, f64)>,
    /// Drop countries that fail validation or estimation instead of aborting
    #[arg(long)]
    allow_partial: bool,
    /// Emit SVG charts
    #[arg(long)]
    charts: bool,
    #[arg(long, env = "EXCESSD_OUT", default_value = "excessd-out")]
    out: PathBuf,
}

impl Opts {
    fn into_config(self) -> RunConfig {
        RunConfig {
            deaths: self.deaths,
            covid: self.covid,
            registry: self.registry,
            fit_window: self.fit_window,
            target_years: self.targets,
            backend: self.backend,
            coverage: self.coverage,
            std_unit: self.std_unit,
            mad_window: self.mad_window,
            area_overrides: self.area_overrides,
            out_dir: self.out,
            tables: true,
            charts: self.charts,
            exclude: self
                .exclude
                .into_iter()
                .map(|c| c.trim().to_uppercase())
                .filter(|c| !c.is_empty())
                .collect::<BTreeSet<_>>(),
            allow_partial: self.allow_partial,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Forecast(o) => report::cmd_forecast(&o.into_config()).map(|_| ()),
        Command::Excess(o) => report::cmd_excess(&o.into_config()).map(|_| ()),
        Command::Regress(o) => report::cmd_regress(&o.into_config()).map(|_| ()),
        Command::Indexes(o) => report::cmd_indexes(&o.into_config()).map(|_| ()),
        Command::Pipeline(o) => report::cmd_pipeline(&o.into_config()).map(|s| {
            for y in &s.years {
                println!("{}: sum of mean predicted covid deaths = {:.0}", y.year, y.dc_bar_total);
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
