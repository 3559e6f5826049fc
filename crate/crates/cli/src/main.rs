//! `ilal`: parse, check, reduce and measure `.lal` programs, evaluate
//! polynomial encodings and run compiled Turing machines.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;

use ilal::cutelim::{normalize_random, trace_csv, StepRecord};
use ilal::formula::parse_formula;
use ilal::lal::{Program, PRELUDE};
use ilal::measure::{self, dims, gamma_of, Instrument, MeasureError};
use ilal::net::canonical_form;
use ilal::term::{print_term, reduce_term};
use ilal::tm::{compile_machine, oracle_run, verify_against_oracle, Engine as TmEngine};
use ilal::translate::{decode_numeral, decode_numeral_term, net_to_term, term_to_net};
use ilal::typecheck::{check_derivation, check_term, parse_derivation, synth_term, TypeEnv};
use ilal::workloads::{self, Workload};
use ilal::{Machine, Net, PolySpec, RoundReport, SigmaOptions, Term};

const DEFAULT_FUEL: u64 = 50_000_000;

#[derive(Parser)]
#[command(name = "ilal", version, about = "Light affine proof nets: terms, types and cut elimination")]
struct Cli {
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0x11a1)]
    seed: u64,
    /// Definitions loaded before FILE in place of the built-in prelude.
    #[arg(long, global = true)]
    prelude: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the definitions of FILE in canonical form.
    Parse { file: PathBuf },
    /// Type-check the entry point of FILE, or every annotated definition.
    Check {
        file: PathBuf,
        /// Check the entry point against this formula.
        #[arg(long = "type", conflicts_with = "derivation")]
        ty: Option<String>,
        /// Check a derivation script whose subject is the entry point.
        #[arg(long)]
        derivation: Option<PathBuf>,
    },
    /// Normalize the entry point of FILE.
    Reduce {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Engine::Term)]
        engine: Engine,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        /// Write the net engine's rewrite trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Translate the entry point of FILE to a proof net.
    ToNet {
        file: PathBuf,
        #[arg(long = "dump-net")]
        dump_net: PathBuf,
    },
    /// Read a net written by `to-net` back to a term.
    Readback { net: PathBuf },
    /// Per-level dimensions of the net of FILE's entry point.
    Measure { file: PathBuf },
    /// Evaluate the encoding of a polynomial at a numeral.
    Poly {
        /// a0,a1,…,aθ
        #[arg(long, value_delimiter = ',', required = true)]
        coeffs: Vec<u64>,
        #[arg(long)]
        arg: usize,
        #[arg(long, value_enum, default_value_t = Engine::Term)]
        engine: Engine,
    },
    /// Turing machines.
    Tm {
        #[command(subcommand)]
        command: TmCommand,
    },
    /// Normalize a workload suite on the net engine and write per-round CSV.
    Bench {
        #[arg(long, value_enum, default_value_t = Suite::Stdlib)]
        suite: Suite,
        #[arg(long)]
        out: PathBuf,
        /// Also check the per-step measure laws.
        #[arg(long)]
        instrument: bool,
        /// Worker threads; 0 picks one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Reduce random nets in random orders and compare normal forms.
    Confluence {
        #[arg(long, default_value_t = 100)]
        nets: usize,
        #[arg(long, default_value_t = 5)]
        orders: usize,
        #[arg(long = "max-nodes", default_value_t = 30)]
        max_nodes: usize,
    },
}

#[derive(Subcommand)]
enum TmCommand {
    /// Run a machine on an input for p(|input|) steps.
    Run {
        #[arg(long)]
        machine: PathBuf,
        /// Input word over {0,1}.
        #[arg(long, default_value = "")]
        input: String,
        #[arg(long, value_enum, default_value_t = TmEngineArg::Term)]
        engine: TmEngineArg,
        /// Compare with the interpreter and the type-derived output depth.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Term,
    Net,
}

#[derive(Clone, Copy, ValueEnum)]
enum TmEngineArg {
    Term,
    Net,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    /// Arithmetic and the degree-2 polynomial matrix.
    Stdlib,
    /// Succ chains to 20, sum/mult/pred tables to 6.
    Arith,
    /// Degree ≤ 2, coefficients ≤ 3, arguments ≤ 4.
    Poly,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// The program and the number of definitions that came from the prelude.
fn load(prelude: &Option<PathBuf>, file: &Path) -> Result<(Program, usize)> {
    let base = match prelude {
        Some(p) => read(p)?,
        None => PRELUDE.to_string(),
    };
    let mut program = Program::parse(&base).context("prelude")?;
    let skip = program.raw_definitions().len();
    program.load(&read(file)?).with_context(|| file.display().to_string())?;
    Ok((program, skip))
}

fn entry(program: &Program) -> Result<(String, Term)> {
    program.main().map(|(n, t)| (n.to_string(), t.clone())).ok_or_else(|| anyhow!("no definitions"))
}

/// The decoded numeral and its `§` prefix, if the normal form is one.
fn numeral_line(value: Option<(usize, usize)>) -> Option<String> {
    value.map(|(m, k)| format!("numeral m={m} prefix={k}"))
}

/// Returns whether every requested check passed.
fn run(cli: Cli) -> Result<bool> {
    let prelude = &cli.prelude;
    match cli.command {
        Command::Parse { file } => {
            let program = Program::parse(&read(&file)?).with_context(|| file.display().to_string())?;
            for (name, t) in program.raw_definitions() {
                println!("{name} = {} ;", print_term(t));
            }
            for (name, ty) in program.types() {
                println!("{name} : {ty} ;");
            }
            Ok(true)
        }
        Command::Check { file, ty, derivation } => {
            let (program, skip) = load(prelude, &file)?;
            check(&program, skip, ty, derivation)
        }
        Command::Reduce { file, engine, fuel, trace } => {
            let (_, t) = entry(&load(prelude, &file)?.0)?;
            reduce(&t, engine, fuel, trace.as_deref())
        }
        Command::ToNet { file, dump_net } => {
            let (name, t) = entry(&load(prelude, &file)?.0)?;
            let net = term_to_net(&t).with_context(|| name.clone())?;
            write(&dump_net, &net.to_json())?;
            println!("{name}: {} nodes, depth {}", net.size(), net.depth());
            Ok(true)
        }
        Command::Readback { net } => {
            let n = Net::from_json(&read(&net)?)?;
            let t = net_to_term(&n)?;
            println!("{}", print_term(&t));
            Ok(true)
        }
        Command::Measure { file } => {
            let (name, t) = entry(&load(prelude, &file)?.0)?;
            let net = term_to_net(&t).with_context(|| name.clone())?;
            print!("{}", measure_table(&net));
            Ok(true)
        }
        Command::Poly { coeffs, arg, engine } => {
            let p = PolySpec::new(&coeffs);
            let w = workloads::poly_application(&p, arg);
            let got = match engine {
                Engine::Term => decode_numeral_term(&reduce_term(&w.term, DEFAULT_FUEL)?.term),
                Engine::Net => {
                    decode_numeral(&sigma(&term_to_net(&w.term)?, Instrument::Off, DEFAULT_FUEL)?.0)
                }
            };
            let (m, k) = got.ok_or_else(|| anyhow!("normal form is not a numeral"))?;
            println!("m={m} prefix={k}");
            Ok(true)
        }
        Command::Tm { command: TmCommand::Run { machine, input, engine, verify, fuel } } => {
            tm_run(&machine, &input, engine, verify, fuel)
        }
        Command::Bench { suite, out, instrument, jobs } => bench(suite, &out, instrument, jobs),
        Command::Confluence { nets, orders, max_nodes } => confluence(cli.seed, nets, orders, max_nodes),
    }
}

fn check(program: &Program, skip: usize, ty: Option<String>, derivation: Option<PathBuf>) -> Result<bool> {
    let env = TypeEnv::from_program(program);
    let (name, _) = entry(program)?;
    let raw = program.raw(&name).expect("entry is defined").clone();
    if let Some(path) = derivation {
        let d = parse_derivation(&read(&path)?).with_context(|| path.display().to_string())?;
        let violations = check_derivation(&d);
        for v in &violations {
            println!("{v}");
        }
        let subject = env.expand(&raw);
        if !ilal::term::alpha_eq(&d.conclusion.subject, &subject) {
            println!("subject {} is not {name}", d.conclusion.subject);
            return Ok(false);
        }
        println!("{name} : {} ({} rules, {} violations)", d.conclusion.formula, d.size(), violations.len());
        return Ok(violations.is_empty());
    }
    if let Some(text) = ty {
        let target = parse_formula(&text)?;
        return Ok(match check_term(&raw, &target, &env) {
            Ok(_) => {
                println!("{name} : {target} ok");
                true
            }
            Err(e) => {
                println!("{name} : {target} {e}");
                false
            }
        });
    }
    let mut ok = true;
    let mut seen = false;
    for (def, _) in &program.raw_definitions()[skip..] {
        let Some(target) = program.declared_type(def) else { continue };
        seen |= def == &name;
        let t = program.raw(def).expect("defined");
        match check_term(t, target, &env) {
            Ok(_) => println!("{def} : {target} ok"),
            Err(e) => {
                ok = false;
                println!("{def} : {target} {e}");
            }
        }
    }
    if !seen {
        match synth_term(&raw, &env) {
            Ok(d) => println!("{name} : {}", d.conclusion.formula),
            Err(e) => {
                ok = false;
                println!("{name}: {e}");
            }
        }
    }
    Ok(ok)
}

fn sigma(net: &Net, instrument: Instrument, fuel: u64) -> Result<(Net, Vec<RoundReport>)> {
    let opts = SigmaOptions { instrument, fuel };
    match measure::normalize_sigma(net, opts) {
        Ok(r) => Ok(r),
        Err(e @ MeasureError::BoundViolated { .. }) => {
            let path = std::env::temp_dir().join(format!("ilal-violation-{}.json", std::process::id()));
            write(&path, &net.to_json())?;
            bail!("{e}; net snapshot in {}", path.display())
        }
        Err(e) => Err(e.into()),
    }
}

fn reduce(t: &Term, engine: Engine, fuel: u64, trace: Option<&Path>) -> Result<bool> {
    match engine {
        Engine::Term => {
            if trace.is_some() {
                bail!("--trace needs --engine net");
            }
            let r = reduce_term(t, fuel).map_err(|e| anyhow!("no normal form within {} steps", e.steps))?;
            println!("{}", print_term(&r.term));
            if let Some(line) = numeral_line(decode_numeral_term(&r.term)) {
                println!("{line}");
            }
            println!("steps={}", r.steps);
        }
        Engine::Net => {
            let (out, rounds) = sigma(&term_to_net(t)?, Instrument::Off, fuel)?;
            let back = net_to_term(&out)?;
            println!("{}", print_term(&back));
            if let Some(line) = numeral_line(decode_numeral(&out)) {
                println!("{line}");
            }
            println!("steps={} rounds={}", measure::total_counted(&rounds), rounds.len());
            if let Some(path) = trace {
                let records: Vec<StepRecord> = rounds
                    .iter()
                    .flat_map(|r| r.trace.iter().cloned())
                    .enumerate()
                    .map(|(i, s)| StepRecord { ordinal: i as u64, ..s })
                    .collect();
                write(path, &trace_csv(&records))?;
            }
        }
    }
    Ok(true)
}

fn measure_table(net: &Net) -> String {
    let mu = dims(net);
    let mut s = format!("depth {}  D {}\n", measure::depth(net), mu.total());
    s.push_str(&format!("{:>3} {:>6} {:>6} {:>6} {:>4}  gamma\n", "l", "d_l", "n_l", "b_l", "W_l"));
    for (l, lv) in mu.levels.iter().enumerate() {
        s.push_str(&format!(
            "{l:>3} {:>6} {:>6} {:>6} {:>4}  {}\n",
            lv.d(),
            lv.n,
            lv.b,
            lv.max_weight(),
            gamma_of(&mu, l)
        ));
    }
    s
}

fn bits(input: &str) -> Result<Vec<u8>> {
    input
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(anyhow!("input symbol {other:?} is not 0 or 1")),
        })
        .collect()
}

fn show(bits: &[u8]) -> String {
    bits.iter().map(|b| char::from(b'0' + b)).collect()
}

fn tm_run(path: &Path, input: &str, engine: TmEngineArg, verify: bool, fuel: u64) -> Result<bool> {
    let m = Machine::from_json(&read(path)?).with_context(|| path.display().to_string())?;
    let input = bits(input)?;
    let engine = match engine {
        TmEngineArg::Oracle => {
            if verify {
                bail!("--verify compares an engine with the oracle; pick --engine term or net");
            }
            let r = oracle_run(&m, &input);
            let accepted = r.accepted_at.map_or("no".to_string(), |k| format!("at step {k}"));
            println!("output={} steps={} accepted={accepted}", show(&r.output), r.steps);
            return Ok(true);
        }
        TmEngineArg::Term => TmEngine::Term,
        TmEngineArg::Net => TmEngine::Net,
    };
    let compiled = compile_machine(&m);
    let v = verify_against_oracle(&compiled, &m, &input, engine, fuel)?;
    let Some((out, prefix)) = &v.decoded else {
        println!("normal form is not a tape");
        return Ok(false);
    };
    println!("output={} prefix={prefix} steps={}", show(out), v.steps);
    if !verify {
        return Ok(true);
    }
    let depth = compiled.output_depth().map_err(|e| anyhow!("output depth: {e}"))?;
    if v.matches() && *prefix == depth {
        println!("MATCH");
        Ok(true)
    } else {
        println!("MISMATCH expected={} prefix={depth}", show(&v.expected));
        Ok(false)
    }
}

fn suite(s: Suite) -> Vec<Workload> {
    match s {
        Suite::Stdlib => workloads::stdlib_suite(),
        Suite::Arith => workloads::arithmetic_suite(20, 6),
        Suite::Poly => workloads::poly_matrix(2, 3, 4),
    }
}

/// Per-round CSV rows of one workload, or a one-line failure.
fn bench_one(w: &Workload, instrument: Instrument) -> Result<Vec<String>, String> {
    let fail = |e: String| format!("{}: {e}", w.name);
    let net = term_to_net(&w.term).map_err(|e| fail(e.to_string()))?;
    let (out, rounds) = sigma(&net, instrument, DEFAULT_FUEL).map_err(|e| fail(format!("{e:#}")))?;
    let rows = rounds.iter().enumerate().map(|(i, r)| r.csv_row(&w.name, i)).collect();
    if decode_numeral(&out) != Some(w.expected) {
        return Err(fail(format!("normal form is not {:?}", w.expected)));
    }
    if let Some(v) = rounds.iter().flat_map(|r| &r.law_violations).next() {
        return Err(fail(v.to_string()));
    }
    Ok(rows)
}

fn bench(s: Suite, out: &Path, instrument: bool, jobs: usize) -> Result<bool> {
    let ws = suite(s);
    let instrument = if instrument { Instrument::On } else { Instrument::Off };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let results: Vec<Result<Vec<String>, String>> =
        pool.install(|| ws.par_iter().map(|w| bench_one(w, instrument)).collect());
    let mut csv = String::from(RoundReport::CSV_HEADER);
    csv.push('\n');
    let mut failures = 0;
    for r in &results {
        match r {
            Ok(rows) => rows.iter().for_each(|row| {
                csv.push_str(row);
                csv.push('\n');
            }),
            Err(e) => {
                failures += 1;
                eprintln!("{e}");
            }
        }
    }
    write(out, &csv)?;
    println!("{} workloads, {failures} failed", ws.len());
    Ok(failures == 0)
}

fn confluence(seed: u64, nets: usize, orders: usize, max_nodes: usize) -> Result<bool> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut divergent = 0;
    for i in 0..nets {
        let (t, net) = workloads::random_net(&mut rng, max_nodes);
        let mut forms = BTreeSet::new();
        for _ in 0..orders {
            let n =
                normalize_random(&net, DEFAULT_FUEL, &mut rng).with_context(|| format!("net {i}: {t}"))?;
            forms.insert(canonical_form(&n.net));
        }
        if forms.len() > 1 {
            divergent += 1;
            println!("net {i} has {} normal forms: {t}", forms.len());
        }
    }
    println!("{nets} nets, {orders} orders each, {divergent} divergent");
    Ok(divergent == 0)
}
