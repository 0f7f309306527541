use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ttcone::projection::{angle_value, approx_project};
use ttcone::ttd::{canonicalize, tt_rank, tt_svd};
use ttcone_bench::{
    emit_csv, emit_json, load_tensor, run_experiment, run_pair, store_tensor, write_csv,
    BenchError, ExperimentConfig, OracleSettings, Result,
};

/// Approximate projection onto the tangent cone of bounded TT-rank tensors.
#[derive(Parser)]
#[command(name = "ttproj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seeded experiment over random pairs.
    Bench {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Per-pair CSV output (stdout when omitted).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON summary output.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write wall_ms as 0 so repeated runs are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Project one tensor given in t3d files.
    Project {
        /// Base point of TT-rank below the bound.
        #[arg(long)]
        x: PathBuf,
        /// Tensor to project.
        #[arg(long)]
        y: PathBuf,
        #[arg(long, num_args = 2, value_names = ["K1", "K2"])]
        k: Vec<usize>,
        #[arg(long, default_value_t = 1e-16)]
        eps: f64,
        #[arg(long, default_value_t = 10)]
        imax: usize,
        /// Relative singular-value threshold used to detect the TT-rank of X.
        #[arg(long, default_value_t = 1e-10)]
        rank_tol: f64,
        /// Where to write the projection (t3d).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the η trace of one pair as CSV.
    Eta {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        pair: usize,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, num_args = 3, value_names = ["N1", "N2", "N3"], default_values_t = [5, 5, 5])]
    n: Vec<usize>,
    #[arg(long, num_args = 2, value_names = ["R1", "R2"], default_values_t = [2, 2])]
    r: Vec<usize>,
    #[arg(long, num_args = 2, value_names = ["K1", "K2"], default_values_t = [3, 3])]
    k: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pairs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-16)]
    eps: f64,
    #[arg(long, default_value_t = 10)]
    imax: usize,
    /// none, multistart:<starts> or grid:<resolution>
    #[arg(long, default_value = "multistart:100")]
    oracle: String,
}

impl ExperimentArgs {
    fn config(&self, timing: bool) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            dims: [self.n[0], self.n[1], self.n[2]],
            true_rank: (self.r[0], self.r[1]),
            bound_rank: (self.k[0], self.k[1]),
            n_pairs: self.pairs,
            seed: self.seed,
            eps: self.eps,
            i_max: self.imax,
            oracle: self.oracle.parse::<OracleSettings>()?,
            timing,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn bench(
    exp: &ExperimentArgs,
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
    timing: bool,
) -> Result<()> {
    let cfg = exp.config(timing)?;
    let (records, summary) = run_experiment(&cfg)?;
    match csv {
        Some(path) => emit_csv(&records, path)?,
        None => write_csv(&records, std::io::stdout().lock())?,
    }
    if let Some(path) = json {
        emit_json(&summary, path)?;
    }
    let c = &summary.counts;
    eprintln!(
        "{} pairs: angle min {:.6} median {:.6}; above ratio bound {}/{}, above Kutschan bound {}/{}",
        c.pairs, summary.approx.min, summary.approx.median, c.above_omega_s4, c.pairs, c.above_kutschan, c.pairs
    );
    Ok(())
}

fn project(
    x: PathBuf,
    y: PathBuf,
    k: &[usize],
    eps: f64,
    imax: usize,
    rank_tol: f64,
    out: Option<PathBuf>,
) -> Result<()> {
    let xt = load_tensor(x)?;
    let yt = load_tensor(y)?;
    if xt.dims() != yt.dims() {
        return Err(BenchError::Config(format!(
            "X has dims {:?} but Y has {:?}",
            xt.dims(),
            yt.dims()
        )));
    }
    let ranks = tt_rank(&xt, rank_tol)?;
    if ranks.0 == 0 {
        return Err(BenchError::Config(
            "X is zero; its TT-rank is (0, 0)".into(),
        ));
    }
    let base = canonicalize(&tt_svd(&xt, ranks)?)?;
    let opts = ttcone::AlternatingOptions { eps, i_max: imax };
    let res = approx_project(&yt, &base, (k[0], k[1]), opts)?;
    let angle = angle_value(&yt, &res.y_tilde)
        .map(|a| format!("{a:e}"))
        .unwrap_or_else(|_| "undefined".into());
    println!("tt_rank_x = {} {}", ranks.0, ranks.1);
    println!("norm_y = {:e}", yt.norm());
    println!("norm_ytilde = {:e}", res.y_tilde.norm());
    println!("tangent_space_norm = {:e}", res.tangent_space_norm);
    println!("angle = {angle}");
    println!("iterations = {}", res.iterations);
    match res.omega {
        Some(w) => println!("omega = {w:e}"),
        None => println!("omega = undefined"),
    }
    if let Some(path) = out {
        store_tensor(&res.y_tilde, path)?;
    }
    Ok(())
}

fn eta(exp: &ExperimentArgs, pair: usize) -> Result<()> {
    let mut cfg = exp.config(false)?;
    if pair >= cfg.n_pairs {
        return Err(BenchError::Config(format!(
            "pair {pair} out of range for {} pairs",
            cfg.n_pairs
        )));
    }
    cfg.oracle = OracleSettings::None;
    let record = run_pair(&cfg, pair)?;
    println!("iteration,eta,increment");
    let mut prev: Option<f64> = None;
    for (i, e) in record.eta_trace.iter().enumerate() {
        let inc = prev.map(|p| format!("{:e}", e - p)).unwrap_or_default();
        println!("{},{:e},{}", i + 1, e, inc);
        prev = Some(*e);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench {
            exp,
            csv,
            json,
            no_timing,
        } => bench(&exp, csv, json, !no_timing),
        Command::Project {
            x,
            y,
            k,
            eps,
            imax,
            rank_tol,
            out,
        } => project(x, y, &k, eps, imax, rank_tol, out),
        Command::Eta { exp, pair } => eta(&exp, pair),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
