//! Command-line front end: validate instance files, build and cache
//! constructions, run simulations to CSV, evaluate rate regions, and measure
//! leakage.
//!
//! Every flag can come from the environment instead, spelled with the
//! `CICC_` prefix (`--seed 7` equals `CICC_SEED=7`). All randomness derives
//! from the one manifest seed, and reruns with the same flags produce
//! byte-identical artifacts regardless of worker count.
//!
//! Exit codes: 0 on success, 1 when a requested assertion fails, 2 on any
//! operational error (bad input file, infeasible construction, refused
//! enumeration).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cicc::case::classify_case;
use cicc::construction::{build_construction, Construction, EstimatorMode};
use cicc::fixtures;
use cicc::harness::{
    run_with_construction, ExperimentConfig, MetricsReport, CSV_SCHEMA_VERSION,
};
use cicc::instance::CiccInstance;
use cicc::leakage::{adversarial_plan, exact_leakage, plugin_with_plan, PLUGIN_CAVEAT};
use cicc::parse::parse_instance;
use cicc::region::{evaluate_region, theorem1_projection};
use cicc::Error;

#[derive(Parser)]
#[command(
    name = "cicc",
    version,
    about = "Simulator for chained polar codes on the two-user cognitive \
             interference channel with a confidential message",
    after_help = "Every flag also reads from the environment with the CICC_ \
                  prefix, e.g. CICC_SEED=7 cicc simulate ..."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build entropy profiles and index sets for one (instance, N, delta); cached by content key.
    Construct(ConstructArgs),
    /// Push frames through encoder, channel, and both decoders; write CSV, summary, and manifest.
    Simulate(SimulateArgs),
    /// Evaluate the rate-region bounds and their message-only projection.
    Region(RegionArgs),
    /// Enumerate the exact leakage of a frame layout (tiny N only), optionally with a plug-in estimate.
    LeakageOracle(LeakageArgs),
    /// Write the bundled example instances as .cicc files.
    Fixtures(FixturesArgs),
}

/// Flags shared by every command that builds a construction.
#[derive(Args)]
struct CoreArgs {
    /// Instance file in the plain-text grammar.
    #[arg(long, env = "CICC_INSTANCE")]
    instance: PathBuf,
    /// Directory for every artifact this run writes.
    #[arg(long, env = "CICC_OUT", default_value = "cicc-out")]
    out: PathBuf,
    /// Block length N (a power of two).
    #[arg(long, env = "CICC_N")]
    n: usize,
    /// Entropy threshold for the high/low index cuts.
    #[arg(long, env = "CICC_DELTA", default_value_t = 0.05)]
    delta: f64,
    /// Profile estimator; exact enumerates joints and only works at tiny N.
    #[arg(long, env = "CICC_MODE", value_enum, default_value_t = ModeArg::Mc)]
    mode: ModeArg,
    /// Monte-Carlo sample count per profile when --mode mc.
    #[arg(long, env = "CICC_MC_SAMPLES", default_value_t = 100_000)]
    mc_samples: usize,
    /// Manifest seed; every random stream derives from it.
    #[arg(long, env = "CICC_SEED", default_value_t = 0)]
    seed: u64,
}

impl CoreArgs {
    fn mode(&self) -> EstimatorMode {
        match self.mode {
            ModeArg::Exact => EstimatorMode::Exact,
            ModeArg::Mc => EstimatorMode::MonteCarlo { samples: self.mc_samples },
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    core: CoreArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    core: CoreArgs,
    /// Chained blocks per frame.
    #[arg(long, env = "CICC_M", default_value_t = 2)]
    m: usize,
    /// Independent frames to simulate.
    #[arg(long, env = "CICC_FRAMES", default_value_t = 100)]
    frames: usize,
    /// Fraction of each free index set actually loaded with content.
    #[arg(long, env = "CICC_BACKOFF", default_value_t = 0.85)]
    backoff: f64,
    /// Add a plug-in leakage estimate over this many sampled frames (0 = off).
    #[arg(long, env = "CICC_PLUGIN_SAMPLES", default_value_t = 0)]
    plugin_samples: usize,
    /// Fail (exit 1) unless the achieved rates lie inside the region bounds.
    #[arg(long)]
    assert_in_region: bool,
    /// Fail (exit 1) unless every error counter is exactly zero.
    #[arg(long)]
    assert_zero_errors: bool,
}

#[derive(Args)]
struct RegionArgs {
    /// Instance file in the plain-text grammar.
    #[arg(long, env = "CICC_INSTANCE")]
    instance: PathBuf,
    /// Directory for the region CSV.
    #[arg(long, env = "CICC_OUT", default_value = "cicc-out")]
    out: PathBuf,
}

#[derive(Args)]
struct LeakageArgs {
    #[command(flatten)]
    core: CoreArgs,
    /// Chained blocks per frame.
    #[arg(long, env = "CICC_M", default_value_t = 1)]
    m: usize,
    /// Fraction of each free index set actually loaded with content.
    #[arg(long, env = "CICC_BACKOFF", default_value_t = 1.0)]
    backoff: f64,
    /// Measure the deliberately insecure layout instead of the proper one.
    #[arg(long)]
    adversarial: bool,
    /// Also run the plug-in estimator over this many frames (0 = off).
    #[arg(long, env = "CICC_PLUGIN_SAMPLES", default_value_t = 0)]
    plugin_samples: usize,
}

#[derive(Args)]
struct FixturesArgs {
    /// Directory to write the .cicc files into.
    #[arg(long, env = "CICC_OUT", default_value = "cicc-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Construct(a) => cmd_construct(&a),
        Cmd::Simulate(a) => cmd_simulate(&a),
        Cmd::Region(a) => cmd_region(&a),
        Cmd::LeakageOracle(a) => cmd_leakage(&a),
        Cmd::Fixtures(a) => cmd_fixtures(&a),
    };
    match res {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Reads and validates an instance file; warnings go to stderr, errors carry
/// the path so the diagnostic names the exact file and location.
fn load_instance(path: &Path) -> Result<CiccInstance, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let inst = parse_instance(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    for w in inst.warnings() {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(inst)
}

/// Writes through a temporary file and renames, so readers never see a
/// partial artifact.
fn atomic_write(path: &Path, content: &str) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| format!("{}: {e}", tmp.display()))?;
    fs::rename(&tmp, path).map_err(|e| format!("{}: {e}", path.display()))
}

/// The cache key covers everything the construction depends on.
fn cache_key(hash: &str, core: &CoreArgs) -> String {
    format!(
        "{hash}-n{}-d{}-{}-s{}",
        core.n,
        core.delta,
        core.mode().to_string().replace(' ', ""),
        core.seed
    )
}

/// Loads the construction from the cache or builds and stores it. The bool
/// reports a cache hit.
fn cached_construction(
    inst: &CiccInstance,
    core: &CoreArgs,
) -> Result<(Construction, bool, PathBuf), String> {
    let dir = core.out.join("constructions");
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let path = dir.join(format!("{}.txt", cache_key(&inst.hash(), core)));
    if path.exists() {
        let text =
            fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let c = Construction::from_text(&text)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        if c.instance_hash != inst.hash() || c.n != core.n {
            return Err(format!(
                "{}: cached construction does not match its key (instance {}, N {}); \
                 delete the file and rerun",
                path.display(),
                c.instance_hash,
                c.n
            ));
        }
        return Ok((c, true, path));
    }
    let c = build_construction(inst, core.n, core.delta, core.mode(), core.seed)
        .map_err(|e| e.to_string())?;
    atomic_write(&path, &c.to_text())?;
    Ok((c, false, path))
}

fn cmd_construct(args: &ConstructArgs) -> Result<ExitCode, String> {
    let inst = load_instance(&args.core.instance)?;
    let (c, hit, path) = cached_construction(&inst, &args.core)?;
    let n = c.n;
    let mut s = String::new();
    let _ = writeln!(s, "instance {} case {}", c.instance_hash, c.case.label);
    let _ = writeln!(
        s,
        "layer1 (X1): |I1| {} |I2| {} frozen {} sampled {} of {n}",
        c.layer1.part.i1.len(),
        c.layer1.part.i2.len(),
        c.layer1.part.frozen.len(),
        c.layer1.part.sampled.len()
    );
    let _ = writeln!(
        s,
        "layer2 (U):  |I1| {} |I2| {} frozen {} sampled {} of {n}",
        c.layer2.part.i1.len(),
        c.layer2.part.i2.len(),
        c.layer2.part.frozen.len(),
        c.layer2.part.sampled.len()
    );
    let _ = writeln!(
        s,
        "confidential (V): |I2s| {} |I2p| {} chained {} frozen {} sampled {} of {n}",
        c.v.part.i2s.len(),
        c.v.part.i2p.len(),
        c.v.part.r2.len(),
        c.v.part.f2.len(),
        c.v.part.d2.len()
    );
    let _ = writeln!(
        s,
        "prefix (X2): w_reuse {} fresh {} sampled {} of {n}",
        c.prefix.w_reuse.len(),
        c.prefix.fresh.len(),
        c.prefix.sampled.len()
    );
    print!("{s}");
    println!(
        "{} construction: {}",
        if hit { "cache hit, reusing" } else { "built and cached" },
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Everything that determines a simulate run's artifacts, in versioned text
/// form. Same manifest plus same seed means byte-identical CSV outputs.
struct RunManifest {
    instance_path: String,
    instance_hash: String,
    construction_key: String,
    out_dir: String,
    seed: u64,
    lines: Vec<(String, String)>,
}

impl RunManifest {
    fn to_text(&self) -> String {
        let mut s = String::from("cicc-manifest v1\n");
        let _ = writeln!(s, "instance-path {}", self.instance_path);
        let _ = writeln!(s, "instance-hash {}", self.instance_hash);
        let _ = writeln!(s, "construction-key {}", self.construction_key);
        let _ = writeln!(s, "out {}", self.out_dir);
        let _ = writeln!(s, "seed {}", self.seed);
        for (k, v) in &self.lines {
            let _ = writeln!(s, "{k} {v}");
        }
        s.push_str("end\n");
        s
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, String> {
    let core = &args.core;
    let inst = load_instance(&core.instance)?;
    let (construction, hit, cpath) = cached_construction(&inst, core)?;
    if hit {
        println!("cache hit, reusing construction: {}", cpath.display());
    }
    let cfg = ExperimentConfig {
        n: core.n,
        m: args.m,
        frames: args.frames,
        delta: core.delta,
        backoff: args.backoff,
        seed: core.seed,
        mode: core.mode(),
    };
    let mut report =
        run_with_construction(&inst, &construction, &cfg).map_err(|e| e.to_string())?;
    if args.plugin_samples > 0 {
        let plan = construction.plan(args.m, args.backoff).map_err(|e| e.to_string())?;
        let est = plugin_with_plan(&inst, plan, core.seed, args.plugin_samples)
            .map_err(|e| e.to_string())?;
        println!("note: {PLUGIN_CAVEAT}");
        report = report.with_leakage(est);
    }

    let manifest = RunManifest {
        instance_path: core.instance.display().to_string(),
        instance_hash: inst.hash(),
        construction_key: cache_key(&inst.hash(), core),
        out_dir: core.out.display().to_string(),
        seed: core.seed,
        lines: vec![
            ("command".into(), "simulate".into()),
            ("n".into(), core.n.to_string()),
            ("m".into(), args.m.to_string()),
            ("frames".into(), args.frames.to_string()),
            ("delta".into(), core.delta.to_string()),
            ("backoff".into(), args.backoff.to_string()),
            ("mode".into(), core.mode().to_string()),
            ("plugin-samples".into(), args.plugin_samples.to_string()),
            ("assert-in-region".into(), args.assert_in_region.to_string()),
            ("assert-zero-errors".into(), args.assert_zero_errors.to_string()),
        ],
    };

    fs::create_dir_all(&core.out).map_err(|e| format!("{}: {e}", core.out.display()))?;
    let csv_path = core.out.join("results.csv");
    let csv = format!("{}\n{}\n", MetricsReport::csv_header(), report.to_csv_row());
    atomic_write(&csv_path, &csv)?;
    let summary_path = core.out.join("summary.txt");
    atomic_write(&summary_path, &report.summary_text())?;
    let manifest_path = core.out.join("manifest.txt");
    atomic_write(&manifest_path, &manifest.to_text())?;

    print!("{}", report.summary_text());
    println!(
        "wrote {} {} {}",
        csv_path.display(),
        summary_path.display(),
        manifest_path.display()
    );

    let mut failures = Vec::new();
    if args.assert_in_region && !report.in_region {
        for v in &report.violations {
            failures.push(format!(
                "in-region: {} violated ({} vs {})",
                v.inequality, v.value, v.limit
            ));
        }
        if report.violations.is_empty() {
            failures.push("in-region: rate tuple outside the bounds".into());
        }
    }
    if args.assert_zero_errors {
        for (name, e) in [
            ("Pe1", &report.pe1),
            ("Pe2", &report.pe2),
            ("pe_m1", &report.pe_m1),
            ("pe_m2c", &report.pe_m2c),
            ("pe_m2p", &report.pe_m2p),
            ("pe_m2s", &report.pe_m2s),
        ] {
            if e.events > 0 {
                failures.push(format!(
                    "zero-errors: {name} counted {} events in {} frames",
                    e.events, e.trials
                ));
            }
        }
    }
    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &failures {
            eprintln!("assertion failed: {f}");
        }
        Ok(ExitCode::from(1))
    }
}

fn cmd_region(args: &RegionArgs) -> Result<ExitCode, String> {
    let inst = load_instance(&args.instance)?;
    let case = classify_case(&inst).map_err(|e| e.to_string())?;
    let b = evaluate_region(&inst).map_err(|e| e.to_string())?;
    let proj = theorem1_projection(&b);

    let header = "schema_version,instance_id,case,b1,b2,b3,b4,b5,b6,\
                  r1_max,r2_max,sum_max,r2s_max";
    let row = format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        CSV_SCHEMA_VERSION,
        inst.hash(),
        case.label,
        b.b1,
        b.b2,
        b.b3,
        b.b4,
        b.b5,
        b.b6,
        proj.r1_max,
        proj.r2_max,
        proj.sum_max,
        proj.r2s_max
    );
    fs::create_dir_all(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let path = args.out.join("region.csv");
    atomic_write(&path, &format!("{header}\n{row}\n"))?;

    println!("instance {} case {}", inst.hash(), case.label);
    println!(
        "bounds: b1 {} b2 {} b3 {} b4 {} b5 {} b6 {}",
        b.b1, b.b2, b.b3, b.b4, b.b5, b.b6
    );
    println!(
        "message projection: R1 <= {} R2 <= {} R1+R2 <= {} R2s <= {}",
        proj.r1_max, proj.r2_max, proj.sum_max, proj.r2s_max
    );
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_leakage(args: &LeakageArgs) -> Result<ExitCode, String> {
    let core = &args.core;
    let inst = load_instance(&core.instance)?;
    let (construction, hit, cpath) = cached_construction(&inst, core)?;
    if hit {
        println!("cache hit, reusing construction: {}", cpath.display());
    }
    let (layout, plan) = if args.adversarial {
        ("adversarial", adversarial_plan(&construction, args.m, args.backoff))
    } else {
        ("proper", construction.plan(args.m, args.backoff))
    };
    let plan = plan.map_err(|e| e.to_string())?;

    let exact = match exact_leakage(&inst, &plan) {
        Ok(r) => r,
        Err(Error::TooLarge(msg)) => {
            return Err(format!(
                "refused: {msg}; lower N or m, or use --plugin-samples on a simulate run"
            ))
        }
        Err(e) => return Err(e.to_string()),
    };

    let mut rows = vec![format!(
        "{},{},{},{},{layout},exact,{},0,{},{},{}",
        CSV_SCHEMA_VERSION,
        inst.hash(),
        core.n,
        args.m,
        exact.bits,
        exact.symbols,
        exact.message_bits,
        exact.states
    )];
    println!(
        "exact leakage ({layout} layout): {} bits/frame = {} symbols, \
         secret stream carries {} bits, {} states enumerated",
        exact.bits, exact.symbols, exact.message_bits, exact.states
    );

    if args.plugin_samples > 0 {
        let est = plugin_with_plan(&inst, plan, core.seed, args.plugin_samples)
            .map_err(|e| e.to_string())?;
        println!(
            "plug-in estimate: {} +/- {} bits/frame over {} frames",
            est.value, est.err, args.plugin_samples
        );
        println!("note: {PLUGIN_CAVEAT}");
        rows.push(format!(
            "{},{},{},{},{layout},plugin,{},{},,,",
            CSV_SCHEMA_VERSION,
            inst.hash(),
            core.n,
            args.m,
            est.value,
            est.err
        ));
    }

    fs::create_dir_all(&core.out).map_err(|e| format!("{}: {e}", core.out.display()))?;
    let path = core.out.join("leakage.csv");
    let header =
        "schema_version,instance_id,N,m,layout,method,bits,err,symbols,message_bits,states";
    atomic_write(&path, &format!("{header}\n{}\n", rows.join("\n")))?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_fixtures(args: &FixturesArgs) -> Result<ExitCode, String> {
    fs::create_dir_all(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    for name in fixtures::NAMES {
        let text = fixtures::text(name).expect("catalog names are exhaustive");
        let path = args.out.join(format!("{name}.cicc"));
        atomic_write(&path, &text)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
