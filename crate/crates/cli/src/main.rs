use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use diqkd_core::bounds::{
    al_curve, channel_curve, dephasing_simulation, fbjl_curve, fractional_curve, hull_curve,
    pironio_curve, Axis, BoundCurve, FbjlConfig,
};
use diqkd_core::devices::{behavior_from, honest_chsh_device};
use diqkd_core::io::{behavior_to_json, parse_behavior, parse_state};
use diqkd_core::measures::{er_numeric, ErConfig, IntrinsicConfig};
use diqkd_core::polytope::max_local_weight;
use diqkd_core::states::ChannelKind;
use diqkd_core::Error;

#[derive(Parser)]
#[command(name = "diqkd", version, about = "Upper bounds on device-independent key rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a bound curve.
    Curve(CurveArgs),
    /// Numerical relative entropy of entanglement of a state file.
    Er {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Maximal local weight of a behavior file.
    Localweight {
        #[arg(long)]
        file: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Behavior table of the honest CHSH device with isotropic noise.
    Device {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a dephasing device replicates a channel's CHSH violation.
    Simulate {
        #[arg(long)]
        kind: SimKind,
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct CurveArgs {
    which: CurveKind,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, value_enum, default_value_t = AxisArg::Nu)]
    axis: AxisArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Let Eve keep the local-vertex index (fbjl and hull).
    #[arg(long)]
    register: bool,
    /// Channel kind, required by `curve channel`.
    #[arg(long)]
    kind: Option<ChannelArg>,
    #[arg(long, default_value_t = 1.0)]
    p_max: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveKind {
    Al,
    Fbjl,
    Hull,
    Fractional,
    Pironio,
    Channel,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum AxisArg {
    Nu,
    Omega,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Dephasing,
    Depolarizing,
    Erasure,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    Depolarizing,
    Erasure,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::OutOfRange(_)
            | Error::BadSetting(_)
            | Error::Parse(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidBehavior(_)
            | Error::InvalidPovm(_)
            | Error::NotHermitian(_)
            | Error::NotPsd(_)
            | Error::NonFinite
            | Error::AlphabetTooLarge(_)
            | Error::NoViolation(_)
            | Error::GridMismatch => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// Rounds to 12 significant digits.
fn sig12(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

fn curve_csv(c: &BoundCurve) -> String {
    let mut s = String::from("param,omega,qber,value\n");
    for p in &c.samples {
        s.push_str(&format!("{},{},{},{}\n", sig12(p.param), sig12(p.omega), sig12(p.qber), sig12(p.value)));
    }
    s
}

fn curve_json(c: &BoundCurve) -> Value {
    let samples: Vec<Value> = c
        .samples
        .iter()
        .map(|p| {
            json!({"param": sig12(p.param), "omega": sig12(p.omega), "qber": sig12(p.qber), "value": sig12(p.value)})
        })
        .collect();
    json!({"name": c.name, "axis": c.axis, "samples": samples})
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn emit_json(v: &Value, out: &OutArgs) -> Result<(), Failure> {
    if out.format == Format::Csv {
        return Err(Failure::Usage("this subcommand only writes JSON".into()));
    }
    emit(&(serde_json::to_string_pretty(v).expect("json value serialises") + "\n"), &out.out)
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn curve(a: &CurveArgs) -> Result<(), Failure> {
    if a.grid < 2 {
        return Err(Failure::Usage("--grid must be at least 2".into()));
    }
    let axis = match a.axis {
        AxisArg::Nu => Axis::Nu,
        AxisArg::Omega => Axis::Omega,
    };
    let fbjl_cfg = FbjlConfig {
        keep_index_register: a.register,
        intrinsic: IntrinsicConfig { seed: a.seed, ..Default::default() },
        ..Default::default()
    };
    let mut support = None;
    let c = match a.which {
        CurveKind::Al => al_curve(axis, a.grid)?,
        CurveKind::Fbjl => fbjl_curve(axis, a.grid, &fbjl_cfg)?,
        CurveKind::Hull => {
            let h = hull_curve(axis, a.grid, &fbjl_cfg)?;
            support = Some(h.support);
            h.hull
        }
        CurveKind::Fractional => fractional_curve(axis, a.grid)?,
        CurveKind::Pironio => pironio_curve(axis, a.grid)?,
        CurveKind::Channel => {
            let kind = match a.kind {
                Some(ChannelArg::Dephasing) => ChannelKind::Dephasing,
                Some(ChannelArg::Depolarizing) => ChannelKind::Depolarizing,
                Some(ChannelArg::Erasure) => ChannelKind::Erasure,
                None => return Err(Failure::Usage("curve channel needs --kind".into())),
            };
            if !(a.p_max > 0.0 && a.p_max <= 1.0) {
                return Err(Failure::Usage("--p-max must lie in (0, 1]".into()));
            }
            channel_curve(kind, a.p_max, a.grid)?
        }
    };
    match a.out.format {
        Format::Csv => emit(&curve_csv(&c), &a.out.out),
        Format::Json => {
            let mut v = curve_json(&c);
            if let Some(s) = support {
                v["support"] = json!(s);
            }
            emit(&(serde_json::to_string_pretty(&v).expect("json value serialises") + "\n"), &a.out.out)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Curve(a) => curve(&a),
        Command::Er { file, seed, out } => {
            let rho = parse_state(&read(&file)?)?;
            let r = er_numeric(&rho, &ErConfig { seed, ..Default::default() })?;
            emit_json(&json!({"value": sig12(r.value), "terms": r.ensemble.weights.len()}), &out)
        }
        Command::Localweight { file, out } => {
            let b = parse_behavior(&read(&file)?)?;
            let d = max_local_weight(&b)?;
            let vertices: Vec<Value> = d
                .vertices
                .iter()
                .map(|(v, w)| json!({"a": v.a, "b": v.b, "weight": sig12(*w)}))
                .collect();
            emit_json(&json!({"local_weight": sig12(d.local_weight), "vertices": vertices}), &out)
        }
        Command::Device { nu, out } => {
            if !(0.0..=1.0).contains(&nu) {
                return Err(Failure::Usage("--nu must lie in [0, 1]".into()));
            }
            let (rho, m) = honest_chsh_device(nu)?;
            emit(&(behavior_to_json(&behavior_from(&rho, &m)?) + "\n"), &out)
        }
        Command::Simulate { kind, p, out } => {
            let kind = match kind {
                SimKind::Depolarizing => ChannelKind::Depolarizing,
                SimKind::Erasure => ChannelKind::Erasure,
            };
            let r = dephasing_simulation(kind, p)?;
            emit_json(&serde_json::to_value(&r).expect("report serialises"), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(1)
        }
    }
}
