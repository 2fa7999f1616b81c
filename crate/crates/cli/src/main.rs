//! Command-line front door for the trapdoor generator task: key and dataset
//! lifecycle, classification, evaluation, attacks, trapdoor-free baselines,
//! and margin analysis.
//!
//! Every subcommand is deterministic given its flags; randomness always flows
//! from an explicit `--rng-seed`, which is echoed in file headers and reports.
//! Exit codes: 0 success, 1 runtime failure (missing or corrupt files,
//! capacity limits), 2 usage errors (bad flags or parameters).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bbstask::adversary::{
    baseline_stat_distinguishers, eval_accuracy, eval_per_sample, eval_robust_accuracy,
    greedy_flip_attack, greedy_packed_suffix_attack, stratified_split, train_linear_baseline,
    EvalReport,
};
use bbstask::classify::{
    default_tolerance, margin_bound, robust_classify, trapdoor_classify, CandidateSet,
    ClassifierConfig,
};
use bbstask::task::{keygen, make_dataset, read_dataset, read_key, write_dataset, write_key};
use bbstask::{BitString, Dataset, Error, TaskParams, TrapdoorKey};

#[derive(Parser)]
#[command(
    name = "bbstask",
    about = "Trapdoor pseudorandom generator classification task",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a trapdoor key and task parameters
    Keygen(KeygenArgs),
    /// Sample a labeled two-class dataset under a key
    Gen(GenArgs),
    /// Label a single record or every record in a dataset
    Classify(ClassifyArgs),
    /// Measure classification accuracy on a labeled dataset
    Eval(EvalArgs),
    /// Measure robust accuracy under a greedy bit-flip attack
    Attack(AttackArgs),
    /// Run the trapdoor-free statistical and linear baselines
    Baseline(BaselineArgs),
    /// Print the analytic margin bound over a grid of distances
    Margin(MarginArgs),
}

#[derive(Args)]
struct KeygenArgs {
    /// Modulus size in bits (must be even; each factor gets half)
    #[arg(long)]
    modulus_bits: u64,
    /// Seed length in bits (default: modulus-bits + 64)
    #[arg(long)]
    seed_len: Option<usize>,
    /// Record length in bits (default: 4 x seed length)
    #[arg(long)]
    record_len: Option<usize>,
    /// Omit the seed prefix from records (hide-the-seed mode)
    #[arg(long)]
    no_prefix: bool,
    /// Append a label-revealing dummy coordinate to every record
    #[arg(long)]
    dummy: bool,
    /// Seed for key generation randomness
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Where to write the secret key file
    #[arg(long)]
    out: PathBuf,
    /// Optionally write a public parameter file (modulus without factors)
    #[arg(long)]
    public_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Key file from `keygen`
    #[arg(long)]
    key: PathBuf,
    /// Samples to draw per class
    #[arg(long)]
    count_per_class: usize,
    /// Seed for sampling randomness
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Override the key's task: omit seed prefixes from records
    #[arg(long)]
    no_prefix: bool,
    /// Override the key's task: append a label-revealing dummy coordinate
    #[arg(long)]
    dummy: bool,
    /// Where to write the dataset file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Key file from `keygen`
    #[arg(long)]
    key: PathBuf,
    /// One record as a 0/1 string
    #[arg(long, group = "input", required = true)]
    record: Option<String>,
    /// Dataset file: classify every record in order
    #[arg(long, group = "input")]
    data: Option<PathBuf>,
    /// Suffix mismatch tolerance: `auto` = (record_len - seed_len)/4
    #[arg(long, default_value = "auto")]
    tolerance: String,
    /// Prefix search radius (0 = plain classification)
    #[arg(long, default_value_t = 0)]
    radius: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Key file from `keygen`
    #[arg(long)]
    key: PathBuf,
    /// Labeled dataset file from `gen`
    #[arg(long)]
    data: PathBuf,
    /// Suffix mismatch tolerance: `auto` = (record_len - seed_len)/4
    #[arg(long, default_value = "auto")]
    tolerance: String,
    /// Prefix search radius (0 = plain classification)
    #[arg(long, default_value_t = 0)]
    radius: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct AttackArgs {
    /// Key file from `keygen`
    #[arg(long)]
    key: PathBuf,
    /// Labeled dataset file from `gen`
    #[arg(long)]
    data: PathBuf,
    /// Maximum bit flips per record
    #[arg(long)]
    budget: usize,
    /// Suffix mismatch tolerance: `auto` = (record_len - seed_len)/4
    #[arg(long, default_value = "auto")]
    tolerance: String,
    /// Prefix search radius of the defending classifier
    #[arg(long, default_value_t = 0)]
    radius: usize,
    /// Restrict flips to suffix positions (fast path for radius >= 1)
    #[arg(long)]
    suffix_only: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct BaselineArgs {
    /// Labeled dataset file from `gen`
    #[arg(long)]
    data: PathBuf,
    /// Training epochs for the linear baseline
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Step size for the linear baseline
    #[arg(long, default_value_t = 0.05)]
    step_size: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Rejected: baselines measure what is learnable WITHOUT the trapdoor
    #[arg(long, hide = true)]
    key: Option<PathBuf>,
}

#[derive(Args)]
struct MarginArgs {
    /// Seed length in bits (taken from --key when omitted)
    #[arg(long)]
    seed_len: Option<usize>,
    /// Record length in bits (taken from --key when omitted)
    #[arg(long)]
    record_len: Option<usize>,
    /// Distances to bound (repeatable; default: a 13-point grid)
    #[arg(long, action = clap::ArgAction::Append)]
    d: Vec<usize>,
    /// Also print exact enumerated coverage next to each bound (toy scale)
    #[arg(long)]
    exact: bool,
    /// Key file; required by --exact, also a source of the task geometry
    #[arg(long)]
    key: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Human-readable lines
    Text,
    /// `field=value` lines for scripting
    Flat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::InvalidParameter(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Keygen(args) => cmd_keygen(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Margin(args) => cmd_margin(args),
    }
}

fn cmd_keygen(args: KeygenArgs) -> Result<(), Error> {
    if !args.modulus_bits.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "--modulus-bits must have even parity so both factors get equal widths; {} is odd",
            args.modulus_bits
        )));
    }
    let seed_len = args.seed_len.unwrap_or(args.modulus_bits as usize + 64);
    let params = TaskParams {
        modulus_bits: args.modulus_bits,
        seed_len,
        record_len: args.record_len.unwrap_or(4 * seed_len),
        include_seed_prefix: !args.no_prefix,
        dummy_coordinate: args.dummy,
    };
    params.validate()?;

    let (key, modulus) = keygen(&params, &mut bbstask::rng::seeded_rng(args.rng_seed))?;
    write_key(&args.out, &key, &params)?;
    if let Some(public) = &args.public_out {
        std::fs::write(public, public_params_text(&key, &params))?;
    }

    println!("N={:x}", modulus);
    println!("modulus_bits={}", modulus.bits());
    println!("seed_len={}", params.seed_len);
    println!("record_len={}", params.record_len);
    println!("include_seed_prefix={}", u8::from(params.include_seed_prefix));
    println!("dummy_coordinate={}", u8::from(params.dummy_coordinate));
    println!("rng_seed={}", args.rng_seed);
    println!("key_file={}", args.out.display());
    if let Some(public) = &args.public_out {
        println!("public_file={}", public.display());
    }
    Ok(())
}

/// The shareable half of a key file: everything except the factorization.
fn public_params_text(key: &TrapdoorKey, params: &TaskParams) -> String {
    format!(
        "version=1\nN={:x}\nseed_len={}\nrecord_len={}\ninclude_seed_prefix={}\ndummy_coordinate={}\n",
        key.modulus(),
        params.seed_len,
        params.record_len,
        u8::from(params.include_seed_prefix),
        u8::from(params.dummy_coordinate),
    )
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let (key, mut params) = read_key(&args.key)?;
    if args.no_prefix {
        params.include_seed_prefix = false;
    }
    if args.dummy {
        params.dummy_coordinate = true;
    }
    let dataset = make_dataset(&key, &params, args.count_per_class, args.rng_seed)?;
    write_dataset(&args.out, &dataset)?;

    println!("dataset={}", args.out.display());
    println!("samples={}", dataset.samples.len());
    println!("record_bits={}", params.stored_record_len());
    println!("include_seed_prefix={}", u8::from(params.include_seed_prefix));
    println!("dummy_coordinate={}", u8::from(params.dummy_coordinate));
    println!("rng_seed={}", args.rng_seed);
    Ok(())
}

/// Parse `--tolerance`: the literal `auto` or a number of suffix mismatches.
fn resolve_tolerance(text: &str, params: &TaskParams) -> Result<usize, Error> {
    if text == "auto" {
        return Ok(default_tolerance(params));
    }
    text.parse().map_err(|_| {
        Error::InvalidParameter(format!(
            "--tolerance must be `auto` or a non-negative integer, got `{text}`"
        ))
    })
}

/// Remove the dummy coordinate, if the task has one, so the trapdoor
/// classifiers see the core record.
fn strip_dummy(params: &TaskParams, record: &BitString) -> Result<BitString, Error> {
    if record.len() != params.stored_record_len() {
        return Err(Error::InvalidParameter(format!(
            "record has {} bits, expected {}",
            record.len(),
            params.stored_record_len()
        )));
    }
    Ok(if params.dummy_coordinate {
        record.slice(0, params.record_len)
    } else {
        record.clone()
    })
}

fn classify_one(
    key: &TrapdoorKey,
    params: &TaskParams,
    record: &BitString,
    tolerance: usize,
    radius: usize,
) -> Result<u8, Error> {
    let core = strip_dummy(params, record)?;
    if radius == 0 {
        trapdoor_classify(key, params, &core, tolerance)
    } else {
        let cfg = ClassifierConfig {
            suffix_tolerance: tolerance,
            prefix_radius: radius,
        };
        robust_classify(key, params, &core, &cfg)
    }
}

/// The dataset must have been generated under the key it is judged with.
fn check_same_modulus(key: &TrapdoorKey, dataset: &Dataset, data_path: &Path) -> Result<(), Error> {
    if key.modulus() != &dataset.modulus {
        return Err(Error::UnsupportedMode(format!(
            "dataset {} was generated under modulus {:x}, but the key has modulus {:x}",
            data_path.display(),
            dataset.modulus,
            key.modulus()
        )));
    }
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), Error> {
    let (key, key_params) = read_key(&args.key)?;
    if let Some(text) = &args.record {
        let record = BitString::parse(text)?;
        let tolerance = resolve_tolerance(&args.tolerance, &key_params)?;
        let label = classify_one(&key, &key_params, &record, tolerance, args.radius)?;
        println!("label={label}");
        return Ok(());
    }
    let data_path = args.data.as_ref().expect("clap enforces record|data");
    let dataset = read_dataset(data_path)?;
    check_same_modulus(&key, &dataset, data_path)?;
    let tolerance = resolve_tolerance(&args.tolerance, &dataset.params)?;
    for sample in &dataset.samples {
        let label = classify_one(&key, &dataset.params, &sample.record, tolerance, args.radius)?;
        println!("{label}");
    }
    Ok(())
}

fn print_report(format: Format, header: &[(&str, String)], prefix: &str, report: &EvalReport) {
    match format {
        Format::Text => {
            let fields: Vec<String> = header.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("{}", fields.join(" "));
            println!("{report}");
        }
        Format::Flat => {
            for (k, v) in header {
                println!("{k}={v}");
            }
            print!("{}", report.flat(prefix));
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let (key, _) = read_key(&args.key)?;
    let dataset = read_dataset(&args.data)?;
    check_same_modulus(&key, &dataset, &args.data)?;
    let tolerance = resolve_tolerance(&args.tolerance, &dataset.params)?;
    let report = eval_accuracy(
        |record| classify_one(&key, &dataset.params, record, tolerance, args.radius),
        &dataset,
    )?;
    print_report(
        args.format,
        &[
            ("data", args.data.display().to_string()),
            ("rng_seed", dataset.rng_seed.to_string()),
            ("tolerance", tolerance.to_string()),
            ("radius", args.radius.to_string()),
        ],
        "eval",
        &report,
    );
    Ok(())
}

fn cmd_attack(args: AttackArgs) -> Result<(), Error> {
    let (key, _) = read_key(&args.key)?;
    let dataset = read_dataset(&args.data)?;
    check_same_modulus(&key, &dataset, &args.data)?;
    let tolerance = resolve_tolerance(&args.tolerance, &dataset.params)?;

    // attacks operate on the core record; a dummy coordinate is stripped
    // (the trapdoor classifiers ignore it anyway)
    let core_params = TaskParams {
        dummy_coordinate: false,
        ..dataset.params.clone()
    };
    let core_dataset = Dataset {
        params: core_params.clone(),
        modulus: dataset.modulus.clone(),
        samples: dataset
            .samples
            .iter()
            .map(|s| {
                Ok(bbstask::LabeledSample {
                    record: strip_dummy(&dataset.params, &s.record)?,
                    label: s.label,
                })
            })
            .collect::<Result<Vec<_>, Error>>()?,
        rng_seed: dataset.rng_seed,
    };

    let report = if args.radius == 0 {
        eval_robust_accuracy(
            |record| trapdoor_classify(&key, &core_params, record, tolerance),
            &core_dataset,
            args.budget,
        )?
    } else if args.suffix_only {
        let seed_len = core_params.seed_len;
        eval_per_sample(&core_dataset, |sample| {
            let prefix = sample.record.slice(0, seed_len);
            let candidates = CandidateSet::build(&key, &core_params, &prefix, args.radius)?;
            let attack = greedy_packed_suffix_attack(
                &candidates,
                &sample.record,
                seed_len,
                tolerance,
                sample.label,
                args.budget,
            );
            Ok(!attack.success)
        })?
    } else {
        let cfg = ClassifierConfig {
            suffix_tolerance: tolerance,
            prefix_radius: args.radius,
        };
        eval_per_sample(&core_dataset, |sample| {
            let attack = greedy_flip_attack(
                |record| robust_classify(&key, &core_params, record, &cfg),
                &sample.record,
                sample.label,
                args.budget,
            )?;
            Ok(!attack.success)
        })?
    };

    print_report(
        args.format,
        &[
            ("data", args.data.display().to_string()),
            ("rng_seed", dataset.rng_seed.to_string()),
            ("tolerance", tolerance.to_string()),
            ("radius", args.radius.to_string()),
            ("budget", args.budget.to_string()),
            ("suffix_only", u8::from(args.suffix_only).to_string()),
        ],
        "robust",
        &report,
    );
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), Error> {
    if args.key.is_some() {
        return Err(Error::InvalidParameter(
            "baseline measures what is learnable without the trapdoor; run it without --key"
                .to_string(),
        ));
    }
    let dataset = read_dataset(&args.data)?;
    let outcomes = baseline_stat_distinguishers(&dataset)?;
    let (train, test) = stratified_split(&dataset)?;
    let linear = train_linear_baseline(&train, &test, args.epochs, args.step_size)?;

    match args.format {
        Format::Text => {
            println!(
                "data={} rng_seed={} epochs={} step_size={}",
                args.data.display(),
                dataset.rng_seed,
                args.epochs,
                args.step_size
            );
            for outcome in &outcomes {
                println!("{}: {}", outcome.name, outcome.report);
            }
            println!("linear: {linear}");
        }
        Format::Flat => {
            println!("rng_seed={}", dataset.rng_seed);
            for outcome in &outcomes {
                print!("{}", outcome.report.flat(outcome.name));
            }
            print!("{}", linear.flat("linear"));
        }
    }
    Ok(())
}

/// Caps for `margin --exact`: enumerating all records against all seeds.
const EXACT_MARGIN_MAX_RECORD_LEN: usize = 20;
const EXACT_MARGIN_MAX_SEED_LEN: usize = 12;
const EXACT_MARGIN_MAX_TOTAL_BITS: usize = 26;

fn cmd_margin(args: MarginArgs) -> Result<(), Error> {
    let from_key = match &args.key {
        Some(path) => Some(read_key(path)?),
        None => None,
    };
    let (seed_len, record_len) = match (&from_key, args.seed_len, args.record_len) {
        (Some((_, params)), s, r) => {
            if s.is_some_and(|v| v != params.seed_len)
                || r.is_some_and(|v| v != params.record_len)
            {
                return Err(Error::InvalidParameter(
                    "--seed-len/--record-len disagree with the key file's task".to_string(),
                ));
            }
            (params.seed_len, params.record_len)
        }
        (None, Some(s), Some(r)) => (s, r),
        (None, _, _) => {
            return Err(Error::InvalidParameter(
                "margin needs --seed-len and --record-len (or --key)".to_string(),
            ));
        }
    };

    let grid = if args.d.is_empty() {
        let mut grid: Vec<usize> = (0..=12).map(|i| i * record_len / 12).collect();
        grid.dedup();
        grid
    } else {
        for &d in &args.d {
            if d > record_len {
                return Err(Error::InvalidParameter(format!(
                    "--d {d} exceeds the record length {record_len}"
                )));
            }
        }
        args.d.clone()
    };

    let exact = if args.exact {
        let Some((key, params)) = &from_key else {
            return Err(Error::InvalidParameter(
                "--exact needs --key to know the generator".to_string(),
            ));
        };
        Some(exact_coverage(key, params, seed_len, record_len)?)
    } else {
        None
    };

    println!("seed_len={seed_len} record_len={record_len}");
    for &d in &grid {
        let bound = margin_bound(seed_len, record_len, d)?;
        match &exact {
            Some(coverage) => {
                println!("d={d} bound={bound:.6e} exact={:.6e}", coverage[d]);
            }
            None => println!("d={d} bound={bound:.6e}"),
        }
    }
    Ok(())
}

/// Exact probability that a uniform record lies within distance d of the
/// support, for every d, by enumerating all records against all seeds.
fn exact_coverage(
    key: &TrapdoorKey,
    params: &TaskParams,
    seed_len: usize,
    record_len: usize,
) -> Result<Vec<f64>, Error> {
    if record_len > EXACT_MARGIN_MAX_RECORD_LEN
        || seed_len > EXACT_MARGIN_MAX_SEED_LEN
        || seed_len + record_len > EXACT_MARGIN_MAX_TOTAL_BITS
    {
        return Err(Error::CapacityExceeded(format!(
            "--exact enumerates 2^{record_len} records x 2^{seed_len} seeds; \
             caps are record_len <= {EXACT_MARGIN_MAX_RECORD_LEN}, seed_len <= \
             {EXACT_MARGIN_MAX_SEED_LEN}, sum <= {EXACT_MARGIN_MAX_TOTAL_BITS}"
        )));
    }
    let supports: Vec<u64> = (0..1u64 << seed_len)
        .map(|value| {
            let seed = BitString::from_uint(value, seed_len);
            let record = bbstask::bbs::sample_record(
                &seed,
                key,
                record_len,
                params.include_seed_prefix,
            )?;
            Ok((0..record_len).fold(0u64, |acc, i| (acc << 1) | u64::from(record.bit(i))))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut histogram = vec![0u64; record_len + 1];
    for value in 0..1u64 << record_len {
        let distance = supports
            .iter()
            .map(|s| (s ^ value).count_ones() as usize)
            .min()
            .expect("at least one seed");
        histogram[distance] += 1;
    }
    let total = (1u64 << record_len) as f64;
    let mut covered = 0u64;
    Ok(histogram
        .iter()
        .map(|&count| {
            covered += count;
            covered as f64 / total
        })
        .collect())
}
