use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use bnncert::certify::{check_certificate, CertOutcome};
use bnncert::check::{check_xlrup, Outcome};
use bnncert::count::{approx_count, parse_certificate, write_certificate, CountError, CountParams};
use bnncert::elaborate::{elaborate, ElabError};
use bnncert::encode::{encode_cnf, encode_robustness, BnnNetwork, RobustnessQuery};
use bnncert::formula::{parse_formula, write_formula};
use bnncert::solver::{solve_formula, SolveError};
use bnncert::{Formula, SolverConfig, Verdict};

const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "bnncert", version, about = "Certified solving and counting for CNF-XOR-BNN formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Budget {
    /// Stop after this many conflicts per solver call.
    #[arg(long)]
    max_conflicts: Option<u64>,
    /// Wall-clock limit in seconds per solver call.
    #[arg(long)]
    timeout: Option<f64>,
}

impl Budget {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_conflicts: self.max_conflicts,
            time_limit: self.timeout.map(Duration::from_secs_f64),
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide satisfiability. Exit 10 for SAT, 20 for UNSAT.
    Solve {
        formula: PathBuf,
        /// Write a FRAT-XOR-BNN proof here.
        #[arg(long)]
        proof: Option<PathBuf>,
        /// Elaborate the proof of an UNSAT answer into XLRUP and write it here.
        #[arg(long)]
        xlrup: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Approximate (projected) model count; prints `s mc <estimate>`.
    Count {
        formula: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the counting certificate here.
        #[arg(long)]
        cert: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Turn a FRAT-XOR-BNN proof into a hinted XLRUP proof.
    Elaborate {
        formula: PathBuf,
        frat: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check an XLRUP proof. Exit 0 verified, 1 rejected, 2 parse error.
    CheckXlrup { formula: PathBuf, proof: PathBuf },
    /// Check a counting certificate. Exit 0 certified, 1 rejected, 2 inconclusive.
    CheckCert {
        formula: PathBuf,
        cert: PathBuf,
        #[command(flatten)]
        budget: Budget,
    },
    /// Encode a robustness query for a network given as JSON.
    Encode {
        network: PathBuf,
        /// Anchor input as a 0/1 string.
        #[arg(long)]
        input: String,
        /// Anchor output as a 0/1 string; defaults to the network's output on the anchor.
        #[arg(long)]
        output: Option<String>,
        #[arg(long)]
        radius: usize,
        /// Emit plain CNF instead of native BNN constraints.
        #[arg(long)]
        cnf: bool,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Solve every formula in a manifest and report times and PAR-2.
    Bench {
        /// One formula path per line, relative to the manifest; `#` starts a comment.
        manifest: PathBuf,
        /// Per-instance time limit in seconds.
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
        /// Number of parallel workers.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Print a JSON summary instead of text.
        #[arg(long)]
        json: bool,
    },
}

/// Failure carrying its exit code.
struct Fail(u8, String);

fn usage(msg: impl std::fmt::Display) -> Fail {
    Fail(EXIT_USAGE, msg.to_string())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| Fail(1, format!("{}: {e}", path.display())))
}

fn load_formula(path: &Path) -> Result<Formula, Fail> {
    parse_formula(read(path)?.as_bytes()).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn solve_err(e: SolveError) -> Fail {
    match e {
        SolveError::BudgetExhausted => Fail(EXIT_BUDGET, "s UNKNOWN (budget exhausted)".into()),
        SolveError::Proof(p) => Fail(1, p.to_string()),
    }
}

fn model_line(f: &Formula, v: &Verdict) -> String {
    let Verdict::Sat(m) = v else { return String::new() };
    let mut line = String::from("v");
    for l in m.truncated(f.num_vars()).lits() {
        line.push_str(&format!(" {}", l.to_dimacs()));
    }
    line.push_str(" 0");
    line
}

fn cmd_solve(formula: &Path, proof: Option<&Path>, xlrup: Option<&Path>, budget: &Budget) -> Result<u8, Fail> {
    let f = load_formula(formula)?;
    let mut frat = Vec::new();
    let logging = proof.is_some() || xlrup.is_some();
    let v = solve_formula(&f, budget.config(), logging.then_some(&mut frat as &mut dyn Write)).map_err(solve_err)?;
    if let Some(p) = proof {
        fs::write(p, &frat).map_err(|e| Fail(1, format!("{}: {e}", p.display())))?;
    }
    match v {
        Verdict::Sat(_) => {
            println!("s SATISFIABLE\n{}", model_line(&f, &v));
            Ok(10)
        }
        Verdict::Unsat => {
            if let Some(x) = xlrup {
                let text = String::from_utf8(frat).map_err(|e| Fail(1, e.to_string()))?;
                let out = elaborate(&f, &text).map_err(|e| Fail(1, format!("elaboration failed: {e}")))?;
                write(x, &out)?;
            }
            println!("s UNSATISFIABLE");
            Ok(20)
        }
    }
}

fn cmd_count(formula: &Path, params: CountParams, cert: Option<&Path>, budget: &Budget) -> Result<u8, Fail> {
    let f = load_formula(formula)?;
    let (est, c) = approx_count(&f, &params, budget.config()).map_err(|e| match e {
        CountError::Budget => Fail(EXIT_BUDGET, e.to_string()),
        CountError::HasXors | CountError::InvalidParams(_) => usage(e),
        CountError::Internal(_) => Fail(1, e.to_string()),
    })?;
    if let Some(p) = cert {
        write(p, &write_certificate(&c))?;
    }
    println!("s mc {est}");
    Ok(0)
}

fn cmd_elaborate(formula: &Path, frat: &Path, output: &Path) -> Result<u8, Fail> {
    let f = load_formula(formula)?;
    let out = elaborate(&f, &read(frat)?).map_err(|e: ElabError| Fail(1, e.to_string()))?;
    write(output, &out)?;
    Ok(0)
}

fn cmd_check_xlrup(formula: &Path, proof: &Path) -> Result<u8, Fail> {
    let f = load_formula(formula)?;
    match check_xlrup(&f, &read(proof)?).map_err(usage)? {
        Outcome::Verified => {
            println!("s VERIFIED");
            Ok(0)
        }
        Outcome::Rejected { line, reason } => {
            println!("s REJECTED");
            eprintln!("proof line {line}: {reason}");
            Ok(1)
        }
    }
}

fn cmd_check_cert(formula: &Path, cert: &Path, budget: &Budget) -> Result<u8, Fail> {
    let f = load_formula(formula)?;
    let c = match parse_certificate(&read(cert)?) {
        Ok(c) => c,
        Err(e) => {
            println!("s rejected");
            eprintln!("{e}");
            return Ok(1);
        }
    };
    match check_certificate(&f, &c, budget.config()) {
        CertOutcome::Certified(v) => {
            println!("s certified {v}");
            Ok(0)
        }
        CertOutcome::Rejected(why) => {
            println!("s rejected");
            eprintln!("{why}");
            Ok(1)
        }
        CertOutcome::Inconclusive(why) => {
            println!("s inconclusive");
            eprintln!("{why}");
            Ok(2)
        }
    }
}

fn bits(s: &str) -> Result<Vec<bool>, Fail> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(usage(format!("bit string `{s}` may only contain 0 and 1"))),
        })
        .collect()
}

fn cmd_encode(network: &Path, input: &str, output: Option<&str>, radius: usize, cnf: bool, out: &Path) -> Result<u8, Fail> {
    let net = BnnNetwork::from_json(&read(network)?).map_err(usage)?;
    net.validate().map_err(usage)?;
    let anchor_input = bits(input)?;
    if anchor_input.len() != net.input_width() {
        return Err(usage(format!("--input has {} bits, network takes {}", anchor_input.len(), net.input_width())));
    }
    let anchor_output = match output {
        Some(o) => bits(o)?,
        None => net.forward(&anchor_input),
    };
    let q = RobustnessQuery { network: net, anchor_input, anchor_output, radius };
    let (mut f, _) = encode_robustness(&q).map_err(usage)?;
    if cnf {
        f = encode_cnf(&f).map_err(usage)?.0;
    }
    write(out, &write_formula(&f))?;
    Ok(0)
}

#[derive(Serialize)]
struct BenchRow {
    instance: String,
    status: &'static str,
    seconds: f64,
}

#[derive(Serialize)]
struct BenchSummary {
    timeout: f64,
    solved: usize,
    par2: f64,
    instances: Vec<BenchRow>,
}

/// Mean runtime with every unsolved instance charged twice the timeout.
fn par2(times: &[Option<f64>], timeout: f64) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    times.iter().map(|t| t.unwrap_or(2.0 * timeout)).sum::<f64>() / times.len() as f64
}

fn bench_one(path: &Path, timeout: f64) -> BenchRow {
    let config = SolverConfig { time_limit: Some(Duration::from_secs_f64(timeout)), ..SolverConfig::default() };
    let start = Instant::now();
    let status = match fs::read(path).ok().and_then(|b| parse_formula(&b).ok()) {
        None => "error",
        Some(f) => match solve_formula(&f, config, None) {
            Ok(Verdict::Sat(_)) => "sat",
            Ok(Verdict::Unsat) => "unsat",
            Err(SolveError::BudgetExhausted) => "timeout",
            Err(SolveError::Proof(_)) => "error",
        },
    };
    let seconds = start.elapsed().as_secs_f64();
    BenchRow { instance: path.display().to_string(), status, seconds }
}

fn cmd_bench(manifest: &Path, timeout: f64, jobs: usize, json: bool) -> Result<u8, Fail> {
    if timeout.is_nan() || timeout <= 0.0 {
        return Err(usage("--timeout must be positive"));
    }
    let text = read(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let paths: Vec<PathBuf> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| dir.join(l))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Fail(1, e.to_string()))?;
    let rows: Vec<BenchRow> = pool.install(|| paths.par_iter().map(|p| bench_one(p, timeout)).collect());
    let times: Vec<Option<f64>> =
        rows.iter().map(|r| matches!(r.status, "sat" | "unsat").then_some(r.seconds.min(timeout))).collect();
    let summary = BenchSummary {
        timeout,
        solved: times.iter().flatten().count(),
        par2: par2(&times, timeout),
        instances: rows,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| Fail(1, e.to_string()))?);
    } else {
        for r in &summary.instances {
            println!("{:<8} {:>10.3}s  {}", r.status, r.seconds, r.instance);
        }
        println!("solved {}/{}  PAR-2 {:.3}", summary.solved, summary.instances.len(), summary.par2);
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Fail> {
    match cli.command {
        Command::Solve { formula, proof, xlrup, budget } => cmd_solve(&formula, proof.as_deref(), xlrup.as_deref(), &budget),
        Command::Count { formula, epsilon, delta, seed, cert, budget } => {
            let params = CountParams::new(epsilon, delta, seed).map_err(usage)?;
            cmd_count(&formula, params, cert.as_deref(), &budget)
        }
        Command::Elaborate { formula, frat, output } => cmd_elaborate(&formula, &frat, &output),
        Command::CheckXlrup { formula, proof } => cmd_check_xlrup(&formula, &proof),
        Command::CheckCert { formula, cert, budget } => cmd_check_cert(&formula, &cert, &budget),
        Command::Encode { network, input, output, radius, cnf, out } => {
            cmd_encode(&network, &input, output.as_deref(), radius, cnf, &out)
        }
        Command::Bench { manifest, timeout, jobs, json } => cmd_bench(&manifest, timeout, jobs, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            if code == EXIT_BUDGET {
                println!("{msg}");
            } else {
                eprintln!("error: {msg}");
            }
            ExitCode::from(code)
        }
    }
}
