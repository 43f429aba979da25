use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use linkgreg::design::{draw_srswor, ht_exact_moments};
use linkgreg::estimators::{DiagnosticKind, DiagnosticsReport};
use linkgreg::harness::{
    drift_diagnostic, format_sig, parse_scenarios, run_scenario, summarize_to_table, ScenarioConfig,
    SimulationWorld,
};
use linkgreg::io::{self, LoadedInputs};
use linkgreg::linkage::Scope;
use linkgreg::synthpop::{gen_population, PopulationModel};
use linkgreg::{Error, Estimate, EstimatorKind, Target};

const SCENARIOS: [(&str, &str); 4] = [
    ("table1_block1", include_str!("../scenarios/table1_block1.txt")),
    ("table2_block2", include_str!("../scenarios/table2_block2.txt")),
    ("table3_block3", include_str!("../scenarios/table3_block3.txt")),
    ("tables", include_str!("../scenarios/tables.txt")),
];

/// Stream of replicate 0, so a dumped sample is the first simulated one.
const REPLICATE_STREAM: u64 = 1 << 32;

/// Below this many replicates the Monte Carlo error swamps the tables.
const SMALL_K: usize = 100;

#[derive(Parser)]
#[command(name = "linkgreg", version, about = "GREG estimation with linked auxiliary data")]
struct Cli {
    /// Worker threads for the simulation; 0 uses every core.
    #[arg(long, global = true, env = "LINKGREG_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo blocks of a scenario file and write the tables.
    Simulate {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        /// Master seed; block k uses seed + k.
        #[arg(long)]
        seed: Option<u64>,
        /// Replicates per block.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "linkgreg-out")]
        out: PathBuf,
        /// Also write each block's population, links and one sample here.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Estimate from a sample, auxiliary records and links.
    Estimate {
        #[command(flatten)]
        files: InputFiles,
        /// Comma-separated: ht, ideal, sub, pi, pri, sri, sbl, sls.
        #[arg(long, value_delimiter = ',', required = true)]
        estimator: Vec<EstimatorKind>,
        #[arg(long, value_enum, default_value_t = TargetArg::Mean)]
        target: TargetArg,
        /// Print full-precision CSV instead of the report.
        #[arg(long)]
        csv: bool,
    },
    /// Show the link structure and, with a sample, the consistency tests.
    Diagnose {
        #[command(flatten)]
        files: InputFiles,
    },
    /// Check HT unbiasedness by enumerating every SRSWOR sample.
    Oracle {
        #[arg(long = "big-n")]
        big_n: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct InputFiles {
    /// `unit_id,y,pi[,x...]`.
    #[arg(long)]
    sample: PathBuf,
    /// `record_id,x1,...`.
    #[arg(long)]
    aux: PathBuf,
    /// `unit_id,record_id[,weight][,is_best]`; weights are reverse weights.
    #[arg(long)]
    links: PathBuf,
    /// Incidence weights for PI, in the link format.
    #[arg(long)]
    incidence: Option<PathBuf>,
    /// Population size N.
    #[arg(long = "big-n")]
    big_n: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Mean,
    Total,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Mean => Target::Mean,
            TargetArg::Total => Target::Total,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_numerical));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Simulate {
            scenario,
            seed,
            k,
            out,
            dump,
        } => simulate(&scenario, seed, k, &out, dump.as_deref()),
        Command::Estimate {
            files,
            estimator,
            target,
            csv,
        } => estimate(&files, &estimator, target.into(), csv),
        Command::Diagnose { files } => diagnose(&files),
        Command::Oracle { big_n, n, seed } => oracle(big_n, n, seed),
    }
}

fn load_scenario(name: &str) -> Result<String> {
    let path = Path::new(name);
    if path.exists() {
        return fs::read_to_string(path).with_context(|| format!("reading {}", path.display()));
    }
    SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| text.to_string())
        .with_context(|| {
            let names: Vec<_> = SCENARIOS.iter().map(|(n, _)| *n).collect();
            format!("no scenario file '{name}' and no bundled scenario of that name ({})", names.join(", "))
        })
}

fn simulate(
    scenario: &str,
    seed: Option<u64>,
    k: Option<usize>,
    out: &Path,
    dump: Option<&Path>,
) -> Result<()> {
    let text = load_scenario(scenario)?;
    let mut blocks = parse_scenarios(&text).with_context(|| format!("scenario '{scenario}'"))?;
    for (b, block) in blocks.iter_mut().enumerate() {
        if let Some(s) = seed {
            block.seed = s.wrapping_add(b as u64);
        }
        if let Some(k) = k {
            block.replicates = k;
        }
        block.validate().with_context(|| format!("block '{}'", block.name))?;
        if block.replicates < SMALL_K {
            eprintln!(
                "warning: block '{}' has K = {}; Monte Carlo error will be large",
                block.name, block.replicates
            );
        }
    }

    let mut summaries = Vec::with_capacity(blocks.len());
    for block in &blocks {
        summaries.push(run_scenario(block).with_context(|| format!("block '{}'", block.name))?);
        if let Some(dir) = dump {
            dump_block(block, &dir.join(&block.name))?;
        }
    }

    let table = summarize_to_table(&summaries);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (block, summary) in table.blocks.iter().zip(&summaries) {
        let mut csv = block.to_csv();
        let _ = writeln!(csv, "truth,,{}", summary.truth);
        fs::write(out.join(format!("{}.csv", block.name)), csv)?;
    }
    let text = table.to_text();
    fs::write(out.join("tables.txt"), &text)?;
    print!("{text}");
    for line in drift_diagnostic(&summaries) {
        println!("{line}");
    }
    for s in &summaries {
        for e in s.estimators.iter().filter(|e| e.failures > 0) {
            eprintln!("note: {} failed in {} of {} replicates of '{}'", e.column, e.failures, s.replicates, s.config.name);
        }
    }
    Ok(())
}

/// The block's fixed world plus the sample of replicate 0.
fn dump_block(block: &ScenarioConfig, dir: &Path) -> Result<()> {
    let world = SimulationWorld::for_block(block)?;
    let ctx = &world.context;
    io::dump_simulation(
        dir,
        &world.population,
        &world.generated,
        ctx.weights(linkgreg::linkage::WeightKind::Reverse),
        ctx.weights(linkgreg::linkage::WeightKind::Incidence),
    )?;
    let mut rng = linkgreg::rng::stream_rng(block.seed, REPLICATE_STREAM);
    let sample = draw_srswor(block.population_size, block.sample_size, &mut rng)?;
    let y = sample.units().iter().map(|&i| world.population.y[i]).collect::<Vec<_>>();
    io::write_sample(File::create(dir.join("sample.csv"))?, &sample, &y)?;
    Ok(())
}

/// `(unit, record, weight)` triples.
type Triples = Vec<(usize, usize, f64)>;

fn load(files: &InputFiles) -> Result<(LoadedInputs, Option<Triples>)> {
    for (what, p) in [("sample", &files.sample), ("aux", &files.aux), ("links", &files.links)] {
        if !p.exists() {
            bail!("{what} file {} does not exist", p.display());
        }
    }
    let inputs = io::load_inputs(&files.aux, &files.links, &files.sample, files.big_n)
        .context("loading inputs")?;
    let incidence = match &files.incidence {
        Some(p) => {
            let rows = io::read_links(File::open(p).with_context(|| format!("opening {}", p.display()))?)?;
            Some(inputs.resolve_weights(&rows)?)
        }
        None => None,
    };
    Ok((inputs, incidence))
}

fn diagnostic_kind(kind: EstimatorKind) -> Option<DiagnosticKind> {
    match kind {
        EstimatorKind::Sri => Some(DiagnosticKind::Sri),
        EstimatorKind::Sbl => Some(DiagnosticKind::Sbl),
        EstimatorKind::Sls => Some(DiagnosticKind::Sls),
        _ => None,
    }
}

fn estimate(files: &InputFiles, kinds: &[EstimatorKind], target: Target, csv: bool) -> Result<()> {
    let (inputs, incidence) = load(files)?;
    let mut results: Vec<(Estimate, Option<DiagnosticsReport>)> = Vec::new();
    for &kind in kinds {
        let ctx = inputs
            .context_for(kind, incidence.as_deref())
            .with_context(|| format!("{kind}-GREG"))?;
        let e = ctx
            .estimate(kind, &inputs.sample, &inputs.y)
            .with_context(|| format!("{kind} estimate"))?
            .to_target(target);
        let diag = diagnostic_kind(kind)
            .map(|d| ctx.diagnose(d, &inputs.sample))
            .transpose()
            .with_context(|| format!("{kind} diagnostics"))?;
        results.push((e, diag));
    }

    if csv {
        println!("estimator,field,value");
        for (e, diag) in &results {
            println!("{},estimate,{}", e.estimator, e.value);
            if let Some(v) = e.variance {
                println!("{},variance,{}", e.estimator, v);
                println!("{},se,{}", e.estimator, v.sqrt());
            }
            for (c, comp) in diag.iter().flat_map(|d| d.components.iter().enumerate()) {
                if let Some(z) = comp.z {
                    println!("{},z{},{}", e.estimator, c + 1, z);
                }
            }
        }
        return Ok(());
    }
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), format_sig);
    for (e, diag) in &results {
        println!("{} ({})", e.estimator, if target == Target::Mean { "mean" } else { "total" });
        println!("  estimate  {}", format_sig(e.value));
        println!("  variance  {}", fmt_opt(e.variance));
        println!("  SE        {}", fmt_opt(e.standard_error()));
        if let Some(d) = diag {
            for (c, comp) in d.components.iter().enumerate() {
                println!(
                    "  {} consistency x{}: difference {}, z {}",
                    d.kind,
                    c + 1,
                    format_sig(comp.value),
                    fmt_opt(comp.z)
                );
            }
        }
    }
    Ok(())
}

fn id_set(ids: impl Iterator<Item = String>) -> String {
    format!("{{{}}}", ids.collect::<Vec<_>>().join(", "))
}

fn diagnose(files: &InputFiles) -> Result<()> {
    let (inputs, _) = load(files)?;
    let l = &inputs.linkage;
    let scope = l.scope();
    let (owner, set) = match scope {
        Scope::Population => ("population", "beta"),
        Scope::Sample => ("sample", "s"),
    };
    println!(
        "{owner} links: {} units, {} records, {} links",
        l.units().len(),
        l.n_records(),
        l.n_links()
    );
    for (p, &i) in l.units().iter().enumerate() {
        let records = l.alpha_at(p).iter().map(|&r| inputs.record_ids[r].clone());
        println!("alpha_{} = {}", inputs.unit_ids[i], id_set(records));
    }
    for r in l.linked_records() {
        let units = l.beta(r).iter().map(|&i| inputs.unit_ids[i].clone());
        println!("{set}_{} = {}", inputs.record_ids[r], id_set(units));
    }
    let sample = &inputs.sample;
    let unique = sample
        .units()
        .iter()
        .filter(|&&i| l.d(i) == Some(1))
        .count();
    println!("sample: n = {}, unique-link units n1 = {}", sample.len(), unique);

    for kind in [DiagnosticKind::Sri, DiagnosticKind::Sbl, DiagnosticKind::Sls] {
        let est = match kind {
            DiagnosticKind::Sri => EstimatorKind::Sri,
            DiagnosticKind::Sbl => EstimatorKind::Sbl,
            DiagnosticKind::Sls => EstimatorKind::Sls,
        };
        let report = inputs
            .context_for(est, None)
            .and_then(|ctx| ctx.diagnose(kind, sample));
        match report {
            Ok(r) => {
                for (c, comp) in r.components.iter().enumerate() {
                    let z = comp.z.map_or_else(|| "n/a".into(), format_sig);
                    let verdict = if comp.rejects(1.96) { "reject" } else { "ok" };
                    println!("{kind} x{}: difference {}, z {z} ({verdict})", c + 1, format_sig(comp.value));
                }
            }
            Err(e) => println!("{kind}: unavailable ({e})"),
        }
    }
    Ok(())
}

fn oracle(big_n: usize, n: usize, seed: u64) -> Result<()> {
    let model = PopulationModel::new(big_n, 1.5, 0.0)?;
    let pop = gen_population(&model, &mut linkgreg::rng::stream_rng(seed, 0))?;
    let m = ht_exact_moments(&pop.y, n)?;
    let total = pop.total();
    let bias = (m.expectation - total).abs();
    let ev = m
        .expected_variance_estimate
        .context("HT variance estimate unavailable")?;
    let var_dev = (ev - m.variance).abs();
    let rel_bias = bias / total.abs().max(f64::MIN_POSITIVE);
    let rel_var = var_dev / m.variance.abs().max(f64::MIN_POSITIVE);
    println!("samples            {}", m.samples);
    println!("|E[Y_hat] - Y|     {:e} (relative {:e})", bias, rel_bias);
    println!("|E[v_hat] - Var|   {:e} (relative {:e})", var_dev, rel_var);
    if rel_bias > 1e-10 || rel_var > 1e-10 {
        bail!(Error::Numerical(format!(
            "enumeration deviates beyond 1e-10 relative (bias {rel_bias:e}, variance {rel_var:e})"
        )));
    }
    println!("exact");
    Ok(())
}

