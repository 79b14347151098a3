use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use hoverkit::report::{cell, RunSummary};
use hoverkit::sweep::{endurance_comparison, hover_budget, sweep_gamma, Variants};
use hoverkit::{config, trace, AppError, AppResult};
use hoverkit_core::linmodel::{
    linearize_hover, measurement_matrix, observability_rank, EquilibriumPoint, MeasurementKind,
};
use hoverkit_core::riccati::eigenvalues;
use hoverkit_core::sim::{run_closed_loop, Design, ScenarioConfig};
use hoverkit_core::zupt::DetectorConfig;

#[derive(Parser)]
#[command(
    name = "hoverkit",
    version,
    about = "Closed-loop quadrotor hover simulation with intermittent position fixes"
)]
struct Cli {
    /// JSON scenario file; missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    duration: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Disable the battery stage.
    #[arg(long, global = true)]
    no_battery: bool,
    /// Set any config key, e.g. `--set vehicle.mass=1.1` (value parsed as JSON).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Unaided,
    Aided,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// One run: CSV trace and JSON metrics.
    Simulate {
        #[arg(long)]
        gamma: Option<f64>,
        /// Detector preset: off, strict or permissive.
        #[arg(long, default_value = "off")]
        detector: String,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        log_every: Option<usize>,
    },
    /// Grid over gamma and seeds with paired aided/unaided ratios.
    Sweep {
        #[arg(long, default_value = "1,0.05,0.01,0.005,0.001")]
        gammas: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, value_enum, default_value = "both")]
        variant: VariantArg,
        #[arg(long, default_value = "strict")]
        detector: String,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Hover budget and power/hover-time comparison.
    Endurance {
        #[arg(long, default_value = "0.5,0.05,0.005")]
        gammas: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value = "strict")]
        detector: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Hover model matrices, observability ranks and spectra.
    Linearize {
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the default scenario file.
    DefaultConfig,
}

fn set_path(root: &mut Value, path: &str, value: Value) -> AppResult<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| AppError::Config(format!("`{path}`: `{key}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        node = obj.entry((*key).to_string()).or_insert_with(|| json!({}));
    }
    Ok(())
}

fn scenario(cli: &Cli) -> AppResult<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => ScenarioConfig::default(),
    };
    let o = &cli.overrides;
    if !o.set.is_empty() {
        let mut v = serde_json::to_value(&cfg)?;
        for item in &o.set {
            let (k, raw) =
                item.split_once('=').ok_or_else(|| AppError::Config(format!("`{item}` is not KEY=VALUE")))?;
            let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut v, k, val)?;
        }
        cfg = serde_json::from_value(v).map_err(|e| AppError::Config(e.to_string()))?;
    }
    if let Some(dt) = o.dt {
        cfg.dt = dt;
    }
    if let Some(d) = o.duration {
        cfg.duration = d;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if o.no_battery {
        cfg.battery = None;
    }
    cfg.validate().map_err(|e| AppError::Config(e.to_string()))?;
    Ok(cfg)
}

fn preset(name: &str) -> AppResult<DetectorConfig> {
    config::detector_from_name(name)?.ok_or_else(|| AppError::Config("this command needs a detector preset".into()))
}

fn emit<T: Serialize>(value: &T, path: &Option<PathBuf>) -> AppResult<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
        None => {
            let out = io::stdout();
            let mut w = out.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn complex_list(m: &nalgebra::DMatrix<f64>) -> Value {
    let mut ev = eigenvalues(m);
    ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    Value::Array(ev.iter().map(|z| json!([z.re, z.im])).collect())
}

fn rows<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> Value {
    Value::Array((0..R).map(|i| Value::Array((0..C).map(|j| json!(m[(i, j)])).collect())).collect())
}

fn run(cli: Cli) -> AppResult<ExitCode> {
    if let Command::DefaultConfig = cli.cmd {
        println!("{}", config::default_json());
        return Ok(ExitCode::SUCCESS);
    }
    let mut cfg = scenario(&cli)?;
    match cli.cmd {
        Command::Simulate { gamma, detector, trace: trace_path, metrics, log_every } => {
            if let Some(g) = gamma {
                cfg.gamma = g;
            }
            if let Some(n) = log_every {
                cfg.log_every = n;
            }
            cfg.detector = config::detector_from_name(&detector)?;
            cfg.validate().map_err(|e| AppError::Config(e.to_string()))?;
            let (tr, report) = run_closed_loop(&cfg)?;
            if let Some(p) = trace_path {
                trace::write_csv(&tr, BufWriter::new(File::create(p)?))?;
            }
            emit(&RunSummary::new(cfg.gamma, cfg.seed, &report), &metrics)?;
            Ok(if report.diverged { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Sweep { gammas, seeds, variant, detector, json, csv } => {
            let gammas = config::parse_list(&gammas)?;
            let v = match variant {
                VariantArg::Unaided => Variants::Unaided,
                VariantArg::Aided => Variants::Aided,
                VariantArg::Both => Variants::Both,
            };
            let table = sweep_gamma(&cfg, &gammas, seeds, v, preset(&detector)?)?;
            if let Some(p) = csv {
                let mut w = csv::Writer::from_path(p)?;
                w.write_record([
                    "gamma",
                    "aided",
                    "seeds",
                    "diverged",
                    "err_pos",
                    "err_att_deg",
                    "u_tot",
                    "u_sat",
                    "zeta_ss",
                    "power_w",
                ])?;
                for c in &table.cells {
                    w.write_record([
                        c.gamma.to_string(),
                        c.aided.to_string(),
                        c.seeds.to_string(),
                        c.diverged.to_string(),
                        cell(c.err_pos_median, 4),
                        cell(c.err_att_median, 3),
                        cell(c.u_tot_median, 4),
                        cell(c.u_sat_median, 4),
                        cell(c.zeta_ss_median, 4),
                        cell(c.power_avg.unwrap_or(f64::INFINITY), 3),
                    ])?;
                }
                w.flush()?;
            }
            emit(&table, &json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Endurance { gammas, seeds, detector, json } => {
            let gammas = config::parse_list(&gammas)?;
            let hover = hover_budget(&cfg)?;
            let rows = endurance_comparison(&cfg, &gammas, seeds, preset(&detector)?)?;
            emit(&json!({ "hover": hover, "comparison": rows }), &json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Linearize { json } => {
            let p = cfg.vehicle;
            let (a, b) = linearize_hover(&p, &EquilibriumPoint::hover(&p, 0.0));
            let mut ranks = serde_json::Map::new();
            for (name, kinds) in [
                ("position", vec![MeasurementKind::Position]),
                ("velocity", vec![MeasurementKind::Velocity]),
                ("attitude", vec![MeasurementKind::Attitude]),
                ("body_rates", vec![MeasurementKind::BodyRates]),
                ("all", MeasurementKind::ALL.to_vec()),
            ] {
                ranks.insert(name.into(), json!(observability_rank(&a, &measurement_matrix(&kinds)?)));
            }
            let design = Design::new(&cfg)?;
            let ad = nalgebra::DMatrix::from_column_slice(12, 12, a.as_slice());
            let bd = nalgebra::DMatrix::from_column_slice(12, 4, b.as_slice());
            let kd = nalgebra::DMatrix::from_column_slice(4, 12, design.gains.k.as_slice());
            let c = measurement_matrix(&MeasurementKind::ALL)?;
            let out = json!({
                "a": rows(&a),
                "b": rows(&b),
                "observability_rank": ranks,
                "eigenvalues": {
                    "open_loop": complex_list(&ad),
                    "controller": complex_list(&(&ad - &bd * &kd)),
                    "estimator": complex_list(&(&ad - &design.gains.l * &c)),
                },
                "lqr_gain": rows(&design.gains.k),
            });
            emit(&out, &json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DefaultConfig => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
