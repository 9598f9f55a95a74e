use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use hom_purity::estimator::{analyze, AnalysisInput, DipSamples, PurityReport, SpectrumInput};
use hom_purity::hom::PhotonStatistics;
use hom_purity::scenario::{simulate, ConfigError, RawConfig, ScenarioConfig, Simulation};
use hom_purity::width::{convert_width, WidthConvention, WidthSpec};

mod output;

use output::{fmt_num, write_json, Format, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(#[from] hom_purity::Error),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "hom-purity", version, about = "Heralded-photon purity from HOM dip widths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward model for one scenario config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Repeat a scenario over values of one numeric config field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config key, e.g. phase_matching.width_nm
        #[arg(long)]
        sweep: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Estimate purity from a measured or simulated dip trace.
    Analyze {
        /// CSV with a delay column (delay_s or delay_ps) and I_tau or counts.
        #[arg(long)]
        dip: PathBuf,
        /// Width spec, e.g. "1.0 fwhm_intensity_nm@796".
        #[arg(long)]
        sigma_g1: String,
        #[arg(long)]
        sigma_beta: String,
        /// p0,p1,p2,beta_sq
        #[arg(long, value_delimiter = ',', num_args = 4)]
        stats: Option<Vec<f64>>,
        #[arg(long)]
        visibility: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a width between conventions.
    Convert {
        /// Width spec, e.g. "1.0 fwhm_intensity_nm@796".
        width: String,
        #[arg(long)]
        to: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

/// Provenance of one command run.
#[derive(Debug, Serialize)]
struct RunRecord {
    config_hash: String,
    artifacts: Vec<String>,
    report: Option<PurityReport>,
}

fn hash_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// File names relative to the output directory, so records do not depend on where they were written.
fn artifact_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
        .collect()
}

fn write_simulation(sim: &Simulation, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    let mut artifacts = Vec::new();

    let mut jsa = Table::new(vec!["nu_s_rad_s", "nu_i_rad_s", "phi_re", "phi_im"]);
    let (nu_s, nu_i) = (sim.jsa.grid_s().points(), sim.jsa.grid_i().points());
    for (s, &a) in nu_s.iter().enumerate() {
        for (i, &b) in nu_i.iter().enumerate() {
            let v = sim.jsa.values()[[s, i]];
            jsa.push(vec![a, b, v.re, v.im]);
        }
    }
    artifacts.push(jsa.write(out, "jsa", format)?);

    let mut g = Table::new(vec!["nu_rad_s", "nu_prime_rad_s", "g_re_s", "g_im_s"]);
    let nu = sim.density.grid().points();
    for (j, &a) in nu.iter().enumerate() {
        for (k, &b) in nu.iter().enumerate() {
            let v = sim.density.values()[[j, k]];
            g.push(vec![a, b, v.re, v.im]);
        }
    }
    artifacts.push(g.write(out, "g_density", format)?);

    let mut spectrum = Table::new(vec!["nu_rad_s", "density_s", "reference_amplitude_sqrt_s"]);
    for (k, &n) in nu.iter().enumerate() {
        spectrum.push(vec![n, sim.marginal.density[k], sim.reference.amplitude()[k].re]);
    }
    artifacts.push(spectrum.write(out, "spectrum", format)?);

    let delays = sim.dip.delay_points();
    let mut dip = match &sim.coincidences {
        Some(_) => Table::new(vec!["delay_s", "I_tau", "Pc"]),
        None => Table::new(vec!["delay_s", "I_tau"]),
    };
    for (k, &t) in delays.iter().enumerate() {
        let mut row = vec![t, sim.dip.values()[k]];
        if let Some(c) = &sim.coincidences {
            row.push(c.values()[k]);
        }
        dip.push(row);
    }
    artifacts.push(dip.write(out, "dip", format)?);

    let report_path = out.join("report.json");
    write_json(&report_path, &sim.report)?;
    artifacts.push(report_path);
    Ok(artifacts)
}

fn cmd_simulate(config: &Path, out: &Path, format: Format) -> Result<RunRecord, CliError> {
    let text = read(config)?;
    let raw = RawConfig::parse(&text)?;
    let scenario = ScenarioConfig::from_raw(&raw)?;
    let sim = simulate(&scenario)?;
    ensure_dir(out)?;
    let artifacts = write_simulation(&sim, out, format)?;
    Ok(RunRecord {
        config_hash: hash_hex(raw.canonical().as_bytes()),
        artifacts: artifact_names(&artifacts),
        report: Some(sim.report),
    })
}

fn cmd_sweep(config: &Path, field: &str, values: &[String], out: &Path, format: Format) -> Result<RunRecord, CliError> {
    let text = read(config)?;
    let raw = RawConfig::parse(&text)?;
    ScenarioConfig::from_raw(&raw)?;
    if values.is_empty() {
        return Err(CliError::Config("--values: empty list".into()));
    }
    match raw.get(field) {
        None => return Err(CliError::Config(format!("--sweep: field `{field}` is not set in the config"))),
        Some(v) if v.parse::<f64>().is_err() => {
            return Err(CliError::Config(format!("--sweep: field `{field}` = `{v}` is not numeric")))
        }
        Some(_) => {}
    }
    let parsed: Vec<f64> = values
        .iter()
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("--values: `{v}` is not a number")))
        })
        .collect::<Result<_, _>>()?;
    let configs: Vec<ScenarioConfig> = values
        .iter()
        .map(|v| {
            let mut r = raw.clone();
            r.set(field, v.trim());
            ScenarioConfig::from_raw(&r).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;

    let results: Vec<Result<Simulation, hom_purity::Error>> = configs.par_iter().map(simulate).collect();
    let mut table = Table::new(vec!["swept_value", "dip_fwhm_s", "P_direct", "P_width", "T"]);
    for (value, result) in parsed.iter().zip(results) {
        let sim = result?;
        let r = &sim.report;
        table.push(vec![
            *value,
            r.dip_fwhm_s,
            r.p_direct.unwrap_or(f64::NAN),
            r.p_width.unwrap_or(f64::NAN),
            sim.overlap,
        ]);
    }
    ensure_dir(out)?;
    let path = table.write(out, "sweep", format)?;
    let mut hashed = raw.canonical();
    hashed.push_str(&format!("sweep {field} = {}\n", values.join(",")));
    Ok(RunRecord {
        config_hash: hash_hex(hashed.as_bytes()),
        artifacts: artifact_names(&[path]),
        report: None,
    })
}

struct DipTrace {
    delay_s: Vec<f64>,
    values: Vec<f64>,
    is_interference: bool,
}

fn read_dip(path: &Path) -> Result<DipTrace, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (delay_col, delay_scale) = match (find("delay_s"), find("delay_ps")) {
        (Some(c), _) => (c, 1.0),
        (None, Some(c)) => (c, 1e-12),
        (None, None) => return Err(CliError::Config(format!("{}: missing column delay_s or delay_ps", path.display()))),
    };
    let (value_col, is_interference) = match (find("I_tau"), find("counts")) {
        (Some(c), _) => (c, true),
        (None, Some(c)) => (c, false),
        (None, None) => return Err(CliError::Config(format!("{}: missing column I_tau or counts", path.display()))),
    };
    let mut trace = DipTrace {
        delay_s: Vec::new(),
        values: Vec::new(),
        is_interference,
    };
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let cell = |col: usize| -> Result<f64, CliError> {
            record
                .get(col)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("{}: row {}: column {} is not numeric", path.display(), k + 2, col + 1)))
        };
        trace.delay_s.push(cell(delay_col)? * delay_scale);
        trace.values.push(cell(value_col)?);
    }
    Ok(trace)
}

fn width_arg(flag: &str, value: &str) -> Result<f64, CliError> {
    let spec: WidthSpec = value
        .parse()
        .map_err(|e: hom_purity::Error| CliError::Config(format!("--{flag}: {e}")))?;
    spec.sigma_intensity_rad_s()
        .map_err(|e| CliError::Config(format!("--{flag}: {e}")))
}

fn cmd_analyze(
    dip: &Path,
    sigma_g1: &str,
    sigma_beta: &str,
    stats: Option<&[f64]>,
    visibility: Option<f64>,
    out: &Path,
) -> Result<RunRecord, CliError> {
    let trace = read_dip(dip)?;
    let sigma_g1 = width_arg("sigma-g1", sigma_g1)?;
    let sigma_beta = width_arg("sigma-beta", sigma_beta)?;
    let statistics = match stats {
        Some(&[p0, p1, p2, b]) => Some(
            PhotonStatistics::new(p0, p1, p2, b).map_err(|e| CliError::Config(format!("--stats: {e}")))?,
        ),
        Some(_) => return Err(CliError::Config("--stats needs p0,p1,p2,beta_sq".into())),
        None => None,
    };
    let samples = if trace.is_interference {
        DipSamples::Interference {
            delay_s: &trace.delay_s,
            values: &trace.values,
        }
    } else {
        DipSamples::Coincidences {
            delay_s: &trace.delay_s,
            counts: &trace.values,
        }
    };
    let report = analyze(&AnalysisInput {
        dip: samples,
        spectrum: SpectrumInput::Sigma(sigma_g1),
        sigma_beta,
        statistics,
        visibility,
        p_direct: None,
    })?;
    ensure_dir(out)?;
    let path = out.join("report.json");
    write_json(&path, &report)?;

    let mut hashed = fs::read(dip).map_err(|e| CliError::io(dip, e))?;
    hashed.extend(format!("{sigma_g1:e} {sigma_beta:e} {stats:?} {visibility:?}").bytes());
    Ok(RunRecord {
        config_hash: hash_hex(&hashed),
        artifacts: artifact_names(&[path]),
        report: Some(report),
    })
}

fn cmd_convert(width: &str, to: &str, format: Format) -> Result<(), CliError> {
    let spec: WidthSpec = width.parse().map_err(|e: hom_purity::Error| CliError::Config(e.to_string()))?;
    let target: WidthConvention = to.parse().map_err(|e: hom_purity::Error| CliError::Config(format!("--to: {e}")))?;
    let converted = convert_width(&spec, target).map_err(|e| CliError::Config(e.to_string()))?;
    match format {
        Format::Csv => println!("{} {}", fmt_num(converted.value), converted.convention),
        Format::Json => println!(
            "{}",
            serde_json::to_string(&converted).map_err(|e| CliError::Io(e.to_string()))?
        ),
    }
    Ok(())
}

fn write_record(out: &Path, record: &RunRecord) -> Result<(), CliError> {
    write_json(&out.join("run.json"), record)?;
    println!("{}", serde_json::to_string(record).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, format } => {
            let record = cmd_simulate(&config, &out, format)?;
            write_record(&out, &record)
        }
        Command::Sweep {
            config,
            sweep,
            values,
            out,
            format,
        } => {
            let record = cmd_sweep(&config, &sweep, &values, &out, format)?;
            write_record(&out, &record)
        }
        Command::Analyze {
            dip,
            sigma_g1,
            sigma_beta,
            stats,
            visibility,
            out,
        } => {
            let record = cmd_analyze(&dip, &sigma_g1, &sigma_beta, stats.as_deref(), visibility, &out)?;
            write_record(&out, &record)
        }
        Command::Convert { width, to, format } => cmd_convert(&width, &to, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hom-purity: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
