use clap::{Args, Parser, Subcommand, ValueEnum};
use stable_lottery::gen::{cyclic_example, pav_lower_bound, random_approval, random_ranking, PavFamilyParams};
use stable_lottery::io::{parse_instance, parse_lottery, write_instance, write_lottery, LotteryFile};
use stable_lottery::model::{expected_capture, Committee, Instance, Lottery, StabilityReport};
use stable_lottery::rules::{pav_exact, pav_greedy, pav_score, stable_k3_traced};
use stable_lottery::solver::{auto_l, mwu_solve, SolverConfig};
use stable_lottery::verify::{lemma1_sweep, lemma5_sweep, search_stable_existence, worst_blocking, ProfileEnumeration};
use stable_lottery::Error;
use std::io::Read;
use std::process::ExitCode;

const EXIT_NOT_CERTIFIED: u8 = 3;

/// Stable lotteries over committees: solve, verify, and stress-test.
#[derive(Parser)]
#[command(name = "stablelot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an ε-approximately stable lottery.
    Solve(SolveArgs),
    /// Report the worst attacker against a lottery.
    Verify(VerifyArgs),
    /// Proportional approval voting winner as a point-mass lottery.
    Pav(PavArgs),
    /// Stable committee for an approval instance with K = 3.
    Stable3 {
        #[arg(long)]
        instance: String,
    },
    /// Exhaustive search for approval instances without a stable committee.
    Search {
        #[arg(long)]
        max_m: usize,
        #[arg(long)]
        max_n: usize,
        /// Walk every approval matrix instead of one profile per multiset.
        #[arg(long)]
        all_matrices: bool,
    },
    /// Generate an instance file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        /// Write here instead of standard output.
        #[arg(long, global = true)]
        out: Option<String>,
    },
    /// Exact checks of the Poisson-binomial tail and matching bounds.
    Lemma {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest number of Bernoulli variables per trial.
        #[arg(long, default_value_t = 20)]
        max_len: usize,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file, or `-` for standard input.
    #[arg(long)]
    instance: String,
    #[arg(long)]
    epsilon: f64,
    /// Attacker size bound, or `auto` (ranking instances only).
    #[arg(long = "L")]
    l: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lottery output path; standard output when absent.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    sample_voters: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 1)]
    check_every: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: String,
    #[arg(long)]
    lottery: String,
    /// Attacker size bound; defaults to K.
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Check this single attacker (comma-separated ids) instead of searching.
    #[arg(long, value_delimiter = ',')]
    attacker: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PavMode {
    Greedy,
    Exact,
}

#[derive(Args)]
struct PavArgs {
    #[arg(long)]
    instance: String,
    #[arg(long, value_enum, default_value_t = PavMode::Greedy)]
    mode: PavMode,
    /// Write the winner as a point-mass lottery file.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum GenKind {
    /// Six ranking voters with no stable committee for K = 3.
    Cyclic,
    /// Instance on which sequential PAV is far from stable.
    PavLb {
        #[arg(long = "P")]
        p: usize,
        #[arg(long)]
        n: Option<u64>,
    },
    RandomApproval {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    RandomRanking {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => 2,
            Error::Budget { .. } => 4,
            Error::SolverFailure { .. } => 5,
            Error::Internal(_) => 6,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn read_source(path: &str) -> Result<String, Failure> {
    let mut text = String::new();
    let res = if path == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    Ok(text)
}

fn write_target(path: &str, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure {
        code: 2,
        message: format!("cannot write {path}: {e}"),
    })
}

fn load_instance(path: &str) -> Result<Instance, Failure> {
    Ok(parse_instance(&read_source(path)?)?)
}

/// `a/b` in lowest terms.
fn fraction(a: u128, b: u128) -> String {
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let g = gcd(a, b).max(1);
    format!("{}/{}", a / g, b / g)
}

/// Ratio line, with the exact fraction `K·V / (n·|S'|)` when the capture is
/// integral.
fn ratio_line(instance: &Instance, capture: f64, size: usize, ratio: f64) -> String {
    let rounded = capture.round();
    if (capture - rounded).abs() < 1e-9 {
        let num = instance.k() as u128 * rounded as u128;
        let den = instance.n() as u128 * size as u128;
        format!("ratio:    {} = {ratio:.6}", fraction(num, den))
    } else {
        format!("ratio:    {ratio:.6}")
    }
}

fn print_report(instance: &Instance, report: &StabilityReport) {
    println!("worst attacker: {}", report.worst_attacker);
    println!("capture:  {:.6}", report.capture);
    println!(
        "budget:   {} = {:.6}",
        fraction(instance.n() as u128 * report.worst_attacker.len() as u128, instance.k() as u128),
        report.budget
    );
    println!(
        "{}",
        ratio_line(instance, report.capture, report.worst_attacker.len(), report.ratio)
    );
    println!("L:        {}", report.l_checked);
}

fn cmd_solve(args: SolveArgs) -> CmdResult {
    let instance = load_instance(&args.instance)?;
    let l = if args.l == "auto" {
        if !instance.all_ranking() {
            return Err(usage(
                "--L auto needs every voter to submit a ranking; pass an explicit --L",
            ));
        }
        auto_l(&instance)
    } else {
        args.l
            .parse()
            .map_err(|_| usage(format!("--L expects an integer or `auto`, got {}", args.l)))?
    };
    let config = SolverConfig {
        max_iters: args.max_iters,
        sample_voters: args.sample_voters,
        check_every: args.check_every,
        ..SolverConfig::new(args.epsilon, l, args.seed)
    };
    let outcome = mwu_solve(&instance, &config)?;
    let mut file = LotteryFile::from_lottery(&outcome.lottery);
    file.certified_epsilon = outcome.certified.then_some(args.epsilon);
    file.l = Some(l);
    file.seed = Some(args.seed);
    let text = write_lottery(&file);
    match &args.out {
        Some(path) => write_target(path, &text)?,
        None => print!("{text}"),
    }
    println!("seed:     {}", args.seed);
    println!("epsilon:  {}", args.epsilon);
    println!("rounds:   {}", outcome.rounds);
    println!("support:  {}", outcome.lottery.entries().len());
    print_report(&instance, &outcome.report);
    if outcome.certified {
        println!("certified at epsilon = {}", args.epsilon);
        Ok(0)
    } else {
        println!("NOT certified at epsilon = {}", args.epsilon);
        Ok(EXIT_NOT_CERTIFIED)
    }
}

fn holds(ratio: f64, epsilon: f64) -> bool {
    if epsilon > 0.0 {
        ratio <= 1.0 + epsilon
    } else {
        ratio < 1.0
    }
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    if !(args.epsilon >= 0.0) {
        return Err(usage(format!("--epsilon must be non-negative, got {}", args.epsilon)));
    }
    let instance = load_instance(&args.instance)?;
    let lottery: Lottery = parse_lottery(&read_source(&args.lottery)?)?.to_lottery()?;
    let report = match &args.attacker {
        Some(ids) => {
            let attacker = Committee::new(ids.iter().copied());
            if attacker.is_empty() || attacker.len() != ids.len() || attacker.iter().any(|c| c >= instance.m()) {
                return Err(usage(format!("invalid attacker {ids:?}")));
            }
            if lottery.k() != instance.k() {
                return Err(usage("lottery committee size differs from K"));
            }
            let capture = expected_capture(&instance, &lottery, &attacker);
            let budget = instance.budget(attacker.len());
            StabilityReport {
                l_checked: attacker.len(),
                ratio: capture / budget,
                worst_attacker: attacker,
                capture,
                budget,
            }
        }
        None => worst_blocking(&instance, &lottery, args.l.unwrap_or(instance.k()))?,
    };
    print_report(&instance, &report);
    if holds(report.ratio, args.epsilon) {
        println!("stable at epsilon = {}", args.epsilon);
        Ok(0)
    } else {
        println!("NOT stable at epsilon = {}", args.epsilon);
        Ok(EXIT_NOT_CERTIFIED)
    }
}

fn cmd_pav(args: PavArgs) -> CmdResult {
    let instance = load_instance(&args.instance)?;
    let committee = match args.mode {
        PavMode::Greedy => pav_greedy(&instance)?,
        PavMode::Exact => pav_exact(&instance)?,
    };
    println!("committee: {committee}");
    println!("score:     {:.6}", pav_score(&instance, &committee)?.0);
    if let Some(path) = &args.out {
        write_target(path, &write_lottery(&LotteryFile::from_lottery(&Lottery::point_mass(committee))))?;
    }
    Ok(0)
}

fn cmd_stable3(path: &str) -> CmdResult {
    let instance = load_instance(path)?;
    let outcome = stable_k3_traced(&instance)?;
    println!("committee: {}", outcome.committee);
    println!("case:      {:?}", outcome.case);
    println!("seed:      {}", outcome.seed);
    Ok(0)
}

fn cmd_search(max_m: usize, max_n: usize, all_matrices: bool) -> CmdResult {
    let mode = if all_matrices {
        ProfileEnumeration::AllMatrices
    } else {
        ProfileEnumeration::Multisets
    };
    let summary = search_stable_existence(max_m, max_n, mode)?;
    println!("m <= {max_m}, n <= {max_n}: {} instances checked", summary.instances);
    if summary.counterexamples.is_empty() {
        println!("all instances admit a stable committee");
        Ok(0)
    } else {
        println!("{} instances without a stable committee:", summary.counterexamples.len());
        for inst in &summary.counterexamples {
            print!("{}", write_instance(inst));
        }
        Ok(EXIT_NOT_CERTIFIED)
    }
}

fn cmd_gen(kind: GenKind, out: Option<String>) -> CmdResult {
    let (instance, seed) = match kind {
        GenKind::Cyclic => (cyclic_example(), None),
        GenKind::PavLb { p, n } => (pav_lower_bound(PavFamilyParams { p, n })?.0, None),
        GenKind::RandomApproval { m, n, k, density, seed } => (random_approval(m, n, k, density, seed)?, Some(seed)),
        GenKind::RandomRanking { m, n, k, seed } => (random_ranking(m, n, k, seed)?, Some(seed)),
    };
    let text = write_instance(&instance);
    match out {
        Some(path) => {
            write_target(&path, &text)?;
            if let Some(s) = seed {
                println!("seed: {s}");
            }
        }
        None => {
            print!("{text}");
            if let Some(s) = seed {
                eprintln!("seed: {s}");
            }
        }
    }
    Ok(0)
}

fn cmd_lemma(trials: usize, seed: u64, max_len: usize) -> CmdResult {
    if max_len == 0 {
        return Err(usage("--max-len must be positive"));
    }
    println!("seed: {seed}");
    println!("{:<8} {:>8} {:>8} {:>10} {:>12}", "check", "held", "trials", "checks", "worst lhs/rhs");
    let sweeps = [
        ("lemma5", lemma5_sweep(trials, max_len, seed)?),
        ("lemma1", lemma1_sweep(trials, max_len, seed)?),
    ];
    for (name, summary) in &sweeps {
        println!(
            "{name:<8} {:>8} {:>8} {:>10} {:>12.6}",
            summary.held, summary.trials, summary.checks, summary.worst_ratio
        );
    }
    for (name, summary) in &sweeps {
        println!("{name}: {}/{} hold", summary.held, summary.trials);
    }
    let all = sweeps.iter().all(|(_, s)| s.held == s.trials);
    Ok(if all { 0 } else { EXIT_NOT_CERTIFIED })
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Pav(args) => cmd_pav(args),
        Command::Stable3 { instance } => cmd_stable3(&instance),
        Command::Search {
            max_m,
            max_n,
            all_matrices,
        } => cmd_search(max_m, max_n, all_matrices),
        Command::Gen { kind, out } => cmd_gen(kind, out),
        Command::Lemma { trials, seed, max_len } => cmd_lemma(trials, seed, max_len),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
