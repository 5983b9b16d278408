use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};
use sparse_gdf::amp::{run_ensemble, BpConfig, EnsembleConfig};
use sparse_gdf::datagen::Predictors;
use sparse_gdf::oracle::exact_l0_curve;
use sparse_gdf::rs::DeltaPath;
use sparse_gdf::selection::{observables, sweep_path};
use sparse_gdf::{Error, ModelParams, Penalty};

const FORMAT_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "sparse-gdf", version, about = "Degrees of freedom of sparse regression estimators")]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// File of `key = value` lines; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print rows as a JSON array on stdout. With `--out`, CSV still goes to the file.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replica-symmetric GDF, errors and stability along a sparsity grid.
    RsCurve(RsCurveArgs),
    /// Belief-propagation ensemble estimates of the GDF.
    Bp(BpArgs),
    /// Exact l0 (best-subset) GDF on small instances.
    L0Exact(L0Args),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    L1,
    En,
    L0,
    Scad,
}

#[derive(Args, Debug)]
struct PenaltyArgs {
    #[arg(long, value_enum, default_value = "l1")]
    penalty: Family,
    /// Ridge weight of the elastic net.
    #[arg(long, default_value_t = 0.1)]
    eta2: f64,
    /// SCAD shape parameter.
    #[arg(long, default_value_t = 8.0)]
    a: f64,
    /// SCAD threshold.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

impl PenaltyArgs {
    /// Penalty of the chosen family at unit sparsity parameter.
    fn build(&self) -> Result<Penalty, Error> {
        let p = match self.penalty {
            Family::L1 => Penalty::L1 { eta: 1.0 },
            Family::En => Penalty::ElasticNet { eta1: 1.0, eta2: self.eta2 },
            Family::L0 => Penalty::L0 { eta: 1.0 },
            Family::Scad => Penalty::Scad { eta: 1.0, a: self.a, lambda: self.lambda },
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Mean of the responses.
    #[arg(long = "my", default_value_t = 0.0, allow_hyphen_values = true)]
    m_y: f64,
    /// Variance of the responses.
    #[arg(long = "sy2", default_value_t = 1.0)]
    sigma_y2: f64,
}

#[derive(Args, Debug)]
struct RsCurveArgs {
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    data: DataArgs,
    /// M / N.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Sparsity grid as `start:stop:count`, endpoints included.
    #[arg(long, default_value = "0.01:0.99:99", value_parser = parse_grid)]
    delta_grid: Grid,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BpArgs {
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Predictor ensemble: `iid`, `ex1:<c>` or `ex2:<T>`.
    #[arg(long, default_value = "iid", value_parser = parse_predictors)]
    ensemble: Predictors,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target sparsities as `start:stop:count`; each is mapped to `eta` through the replica solution.
    #[arg(long, default_value = "0.1:0.5:5", value_parser = parse_grid)]
    delta_grid: Grid,
    /// Step of the finite-difference divergence.
    #[arg(long, default_value_t = 1e-6)]
    sure_eps: f64,
    /// Skip the per-instance divergence estimate.
    #[arg(long)]
    no_sure: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct L0Args {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// `eta` values as `start:stop:count`.
    #[arg(long, default_value = "0.2:1.0:5", value_parser = parse_grid)]
    eta_grid: Grid,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err(format!("expected start:stop:count, got {s:?}"));
    };
    let start: f64 = start.trim().parse().map_err(|e| format!("start: {e}"))?;
    let stop: f64 = stop.trim().parse().map_err(|e| format!("stop: {e}"))?;
    let count: usize = count.trim().parse().map_err(|e| format!("count: {e}"))?;
    if !start.is_finite() || !stop.is_finite() {
        return Err("grid endpoints must be finite".into());
    }
    Ok(Grid(match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect(),
    }))
}

fn parse_predictors(s: &str) -> Result<Predictors, String> {
    match s.split_once(':') {
        None if s == "iid" => Ok(Predictors::Iid),
        Some(("ex1", c)) => c.parse().map(|c| Predictors::Example1 { c }).map_err(|e| format!("ex1 correlation: {e}")),
        Some(("ex2", t)) => t.parse().map(|t| Predictors::Example2 { t }).map_err(|e| format!("ex2 group size: {e}")),
        _ => Err(format!("expected iid, ex1:<c> or ex2:<T>, got {s:?}")),
    }
}

/// A table cell. Missing values print as empty CSV fields and JSON nulls.
#[derive(Debug, Clone)]
enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

struct Table {
    /// Written as a `#` comment line before the CSV header.
    banner: String,
    columns: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn write_csv<W: Write>(&self, mut out: W) -> Result<(), Error> {
        writeln!(out, "# {}", self.banner)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        w.flush()?;
        Ok(())
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.columns.iter().zip(row).map(|(k, c)| (k.to_string(), c.json())).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    fn emit(&self, out: Option<&PathBuf>, json: bool) -> Result<(), Error> {
        if let Some(path) = out {
            self.write_csv(BufWriter::new(File::create(path)?))?;
        }
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        if json {
            serde_json::to_writer_pretty(&mut lock, &self.to_json()).map_err(io::Error::from)?;
            writeln!(lock)?;
        } else if out.is_none() {
            self.write_csv(&mut lock)?;
        }
        Ok(())
    }
}

fn params_banner(p: &Penalty, prm: &ModelParams) -> String {
    format!("penalty={p} alpha={} m_y={} sigma_y2={}", prm.alpha, prm.m_y, prm.sigma_y2)
}

fn rs_curve(args: &RsCurveArgs) -> Result<Table, Error> {
    let pen = args.penalty.build()?;
    let prm = ModelParams::new(args.alpha, args.data.m_y, args.data.sigma_y2)?;
    let rows = if args.delta_grid.0.is_empty() {
        Vec::new()
    } else {
        let path = DeltaPath::new(&pen, &prm)?;
        sweep_path(&path, &args.delta_grid.0)
    };
    let rows = rows
        .into_iter()
        .map(|row| {
            let state = row.solution.as_ref().and_then(|s| s.state);
            let obs = row.observables;
            vec![
                Cell::Num(row.delta),
                Cell::opt(row.penalty.and_then(|p| p.eta())),
                Cell::opt(state.map(|s| s.q)),
                Cell::opt(state.map(|s| s.chi)),
                Cell::opt(state.map(|s| s.qhat)),
                Cell::opt(state.map(|s| s.chihat)),
                Cell::opt(row.solution.as_ref().map(|s| s.rho_hat)),
                row.solution.as_ref().map_or(Cell::Empty, |s| Cell::Text(s.branch.to_string())),
                row.solution.as_ref().map_or(Cell::Empty, |s| Cell::Bool(s.rs_locally_stable)),
                row.solution.as_ref().map_or(Cell::Empty, |s| Cell::Bool(s.at_stable)),
                Cell::opt(obs.map(|o| o.df)),
                Cell::opt(obs.map(|o| o.err_train)),
                Cell::opt(obs.map(|o| o.err_pre)),
                Cell::opt(obs.map(|o| o.aic)),
                Cell::opt(obs.and_then(|o| o.free_energy)),
                Cell::opt(obs.and_then(|o| o.r_bar)),
                row.error.map_or(Cell::Empty, Cell::Text),
            ]
        })
        .collect();
    Ok(Table {
        banner: format!("sparse-gdf rs-curve v{FORMAT_VERSION} {}", params_banner(&pen, &prm)),
        columns: &[
            "delta",
            "eta",
            "q",
            "chi",
            "qhat",
            "chihat",
            "rho_hat",
            "branch",
            "rs_stable",
            "at_stable",
            "df",
            "err_train",
            "err_pre",
            "aic",
            "f",
            "r_bar",
            "error",
        ],
        rows,
    })
}

fn bp(args: &BpArgs) -> Result<Table, Error> {
    let family = args.penalty.build()?;
    if args.n == 0 || args.m == 0 {
        return Err(Error::InvalidParameter(format!("N and M must be positive, got N={} M={}", args.n, args.m)));
    }
    if args.samples == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !(args.damping > 0.0 && args.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!("damping must be in (0, 1], got {}", args.damping)));
    }
    // surface a bad group size before any solver work
    args.ensemble.generate(args.m, args.n, 0)?;
    let prm = ModelParams::new(args.m as f64 / args.n as f64, args.data.m_y, args.data.sigma_y2)?;
    for &d in &args.delta_grid.0 {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::UnphysicalRegion(d));
        }
    }
    let path = if args.delta_grid.0.is_empty() { None } else { Some(DeltaPath::new(&family, &prm)?) };
    let mut rows = Vec::new();
    for &delta in &args.delta_grid.0 {
        let path = path.as_ref().expect("non-empty grid has a path");
        let pen = match path.solve_for_delta(delta) {
            Ok((pen, _)) => pen,
            Err(e) => {
                let mut row = vec![Cell::Num(delta)];
                row.extend(std::iter::repeat_with(|| Cell::Empty).take(9));
                row.push(Cell::Text(e.to_string()));
                rows.push(row);
                continue;
            }
        };
        let cfg = EnsembleConfig {
            n: args.n,
            m: args.m,
            predictors: args.ensemble,
            m_y: args.data.m_y,
            sigma_y2: args.data.sigma_y2,
            samples: args.samples,
            seed: args.seed,
            bp: BpConfig { damping: args.damping, tol: args.tol, max_iter: args.max_iter },
            sure_eps: (!args.no_sure).then_some(args.sure_eps),
        };
        let s = run_ensemble(&cfg, &pen)?;
        rows.push(vec![
            Cell::Num(delta),
            Cell::opt(pen.eta()),
            Cell::opt(s.delta),
            Cell::opt(s.df_cov),
            Cell::opt(s.df_sure),
            Cell::opt(s.delta_eff),
            Cell::Int(s.converged),
            Cell::Int(s.samples),
            Cell::Num(s.converged as f64 / s.samples as f64),
            Cell::Num(s.mean_iterations),
            Cell::Empty,
        ]);
    }
    Ok(Table {
        banner: format!(
            "sparse-gdf bp v{FORMAT_VERSION} {} N={} M={} ensemble={} samples={} seed={}",
            params_banner(&family, &prm),
            args.n,
            args.m,
            args.ensemble.tag(),
            args.samples,
            args.seed
        ),
        columns: &[
            "delta",
            "eta",
            "delta_bp",
            "df_cov",
            "df_sure",
            "delta_eff_bp",
            "converged",
            "samples",
            "convergence_rate",
            "mean_iterations",
            "error",
        ],
        rows,
    })
}

fn l0_exact(args: &L0Args) -> Result<Table, Error> {
    if args.samples < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: args.samples });
    }
    let prm = ModelParams::new(args.alpha, args.data.m_y, args.data.sigma_y2)?;
    for &eta in &args.eta_grid.0 {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
        }
    }
    let points = exact_l0_curve(&prm, args.n, &args.eta_grid.0, args.samples, args.seed)?;
    let pen = Penalty::L0 { eta: 1.0 };
    let path = if points.is_empty() { None } else { Some(DeltaPath::new(&pen, &prm)?) };
    let rows = points
        .iter()
        .map(|pt| {
            let df_rs = path.as_ref().and_then(|path| match path.solve_for_delta(pt.mean_delta) {
                Ok((p, sol)) => observables(&p, &prm, &sol).ok().map(|o| o.df),
                // past the end of the finite branch the estimator interpolates
                Err(Error::NotBracketed { max, .. }) if pt.mean_delta > max && path.has_divergent_branch() => Some(1.0),
                Err(_) => None,
            });
            vec![Cell::Num(pt.eta), Cell::Num(pt.mean_delta), Cell::Num(pt.df_exact), Cell::opt(df_rs)]
        })
        .collect();
    Ok(Table {
        banner: format!(
            "sparse-gdf l0-exact v{FORMAT_VERSION} {} N={} samples={} seed={}",
            params_banner(&pen, &prm),
            args.n,
            args.samples,
            args.seed
        ),
        columns: &["eta", "mean_delta", "df_exact", "df_rs"],
        rows,
    })
}

const SUBCOMMANDS: [&str; 3] = ["rs-curve", "bp", "l0-exact"];

/// Splice the `--config` file into argv as `--key=value` flags placed right
/// after the subcommand, so anything typed on the command line overrides it.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| format!("{path}:{}: expected key = value", lineno + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        match value.trim() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            v => injected.push(format!("--{key}={v}")),
        }
    }
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let mut out = argv[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_)
            | Error::TooLarge { .. }
            | Error::InvalidT { .. }
            | Error::UnphysicalRegion(_)
            | Error::TooFewSamples { .. }
    )
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match &cli.command {
        Command::RsCurve(a) => rs_curve(a).and_then(|t| t.emit(a.out.as_ref(), cli.json)),
        Command::Bp(a) => bp(a).and_then(|t| t.emit(a.out.as_ref(), cli.json)),
        Command::L0Exact(a) => l0_exact(a).and_then(|t| t.emit(a.out.as_ref(), cli.json)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage(&e) { 2 } else { 3 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_include_both_ends() {
        assert_eq!(parse_grid("0:1:3").unwrap(), Grid(vec![0.0, 0.5, 1.0]));
        assert_eq!(parse_grid("0.2:0.9:1").unwrap(), Grid(vec![0.2]));
        assert!(parse_grid("0:1:0").unwrap().0.is_empty());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:inf:3").is_err());
    }

    #[test]
    fn predictor_specs() {
        assert_eq!(parse_predictors("iid").unwrap(), Predictors::Iid);
        assert_eq!(parse_predictors("ex1:0.5").unwrap(), Predictors::Example1 { c: 0.5 });
        assert_eq!(parse_predictors("ex2:25").unwrap(), Predictors::Example2 { t: 25 });
        assert!(parse_predictors("ex2:x").is_err());
        assert!(parse_predictors("gauss").is_err());
    }

    #[test]
    fn config_lands_after_the_subcommand() {
        let dir = std::env::temp_dir().join(format!("sparse-gdf-cfg-{}", std::process::id()));
        std::fs::write(&dir, "alpha = 0.7\nno_sure = true\njson = false\n").unwrap();
        let argv: Vec<String> =
            ["prog", "--config", dir.to_str().unwrap(), "bp", "--alpha", "0.2"].iter().map(|s| s.to_string()).collect();
        let out = expand_config(argv).unwrap();
        std::fs::remove_file(&dir).unwrap();
        assert_eq!(out[3..], ["bp", "--alpha=0.7", "--no-sure", "--alpha", "0.2"]);
    }
}
