use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phasefrac::postio::{
    export_vtk, fracture_metrics, probe, read_result, write_outputs, write_text, ProbeField, FRACTURE_THRESHOLD,
};
use phasefrac::scenario::{parse_config, parse_config_str, preset, ScenarioConfig};
use phasefrac::solver::run_simulation;
use phasefrac::{Error, Result};

/// Phase-field hydraulic fracture simulator.
#[derive(Parser, Debug)]
#[command(name = "phasefrac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write VTK snapshots, probe CSVs and result.json.
    Run {
        /// Scenario TOML file; keys override the preset when both are given.
        config: Option<PathBuf>,
        /// Built-in preset, optionally with options: `name:key=value,...`.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Drop the initial-stress terms from stress, energy and crack drive
        /// (boundary tractions are kept).
        #[arg(long)]
        baseline_no_sigma0: bool,
    },
    /// Sample a field at a point for every snapshot of a result.
    Probe {
        /// Run output directory or result.json.
        result: PathBuf,
        /// Point coordinates, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        point: Vec<f64>,
        /// p, phi, ux, uy or uz.
        #[arg(long, default_value = "p")]
        field: String,
        /// CSV file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fractured measure and directional extents per snapshot.
    Metrics {
        /// Run output directory or result.json.
        result: PathBuf,
        /// Origin of the extents, comma separated (default: domain centre).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        origin: Option<Vec<f64>>,
        /// Element-average φ at which an element counts as fractured.
        #[arg(long, default_value_t = FRACTURE_THRESHOLD)]
        threshold: f64,
        /// CSV file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one snapshot (default: last) as legacy VTK.
    Export {
        /// Run output directory or result.json.
        result: PathBuf,
        /// Snapshot index.
        #[arg(long)]
        snapshot: Option<usize>,
        /// VTK file to write.
        #[arg(long)]
        out: PathBuf,
    },
}

fn result_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("result.json")
    } else {
        p.to_path_buf()
    }
}

fn point3(key: &str, v: &[f64]) -> Result<[f64; 3]> {
    if !(2..=3).contains(&v.len()) {
        return Err(Error::config(key, format!("expected 2 or 3 coordinates, got {}", v.len())));
    }
    let mut x = [0.0; 3];
    x[..v.len()].copy_from_slice(v);
    Ok(x)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(config: Option<&Path>, preset_name: Option<&str>) -> Result<ScenarioConfig> {
    match (config, preset_name) {
        (None, None) => Err(Error::config("", "give a config file or --preset")),
        (None, Some(name)) => preset(name),
        (Some(path), None) => parse_config(path),
        (Some(path), Some(name)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("", e.to_string()))?;
            table.insert("preset".into(), toml::Value::String(name.into()));
            let merged = toml::to_string(&table).map_err(|e| Error::config("", e.to_string()))?;
            parse_config_str(&merged, path.parent().unwrap_or(Path::new(".")))
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run {
            config,
            preset,
            out,
            baseline_no_sigma0,
        } => {
            let cfg = load_config(config.as_deref(), preset.as_deref())?;
            let result = run_simulation(&cfg, baseline_no_sigma0)?;
            write_outputs(&result, &out, cfg.output.vtk)?;
            let steps = result.log.len().saturating_sub(1);
            match &result.failure {
                Some(f) => {
                    eprintln!("phasefrac: run stopped after {steps} steps: {}", f.message);
                    Ok(f.exit_code)
                }
                None => {
                    eprintln!(
                        "phasefrac: {} finished {steps} steps, {} snapshots in {}",
                        cfg.title,
                        result.snapshots.len(),
                        out.display()
                    );
                    Ok(0)
                }
            }
        }
        Command::Probe {
            result,
            point,
            field,
            out,
        } => {
            let r = read_result(result_path(&result))?;
            let field = ProbeField::parse(&field)?;
            let series = probe(&r.mesh, &r.snapshots, point3("--point", &point)?, field)?;
            emit(out.as_deref(), &series.to_csv())?;
            Ok(0)
        }
        Command::Metrics {
            result,
            origin,
            threshold,
            out,
        } => {
            let r = read_result(result_path(&result))?;
            let origin = match origin {
                Some(o) => point3("--origin", &o)?,
                None => {
                    let (lo, hi) = r.mesh.bounding_box();
                    [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])]
                }
            };
            let mut dirs = vec![
                ("+x", [1.0, 0.0, 0.0]),
                ("-x", [-1.0, 0.0, 0.0]),
                ("+y", [0.0, 1.0, 0.0]),
                ("-y", [0.0, -1.0, 0.0]),
            ];
            if r.mesh.dim() == 3 {
                dirs.push(("+z", [0.0, 0.0, 1.0]));
                dirs.push(("-z", [0.0, 0.0, -1.0]));
            }
            let m = fracture_metrics(&r, threshold, origin, &dirs)?;
            emit(out.as_deref(), &m.to_csv())?;
            Ok(0)
        }
        Command::Export { result, snapshot, out } => {
            let r = read_result(result_path(&result))?;
            let i = snapshot.unwrap_or(r.snapshots.len().saturating_sub(1));
            let state = r
                .snapshots
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("snapshot {i} does not exist ({} stored)", r.snapshots.len())))?;
            export_vtk(&r.mesh, state, &out)?;
            Ok(0)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("PHASEFRAC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    configure_threads();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("phasefrac: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
