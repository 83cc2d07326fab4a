//! Command implementations behind the `nami` binary. Every command writes to
//! the given streams and returns its exit code, so tests can run them in-process.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nami::discrete::{expected_posterior_kl, fit_inverse_exact};
use nami::independence::{enumerate_independencies, DEFAULT_ENUM_CAP};
use nami::inversion::{invert, nami_invert, InverseStructure, Mode, NamiOptions};
use nami::masks::{inverse_spec, made_masks, subset_masks, tree_made_spec, verify_connectivity, MaskOptions, MaskSpec, MaskStack};
use nami::verification::verify;
use nami::{fixtures, io as nio, BayesNet, Error, VarId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SEMANTIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nami", version, about = "Invert Bayesian-network structures and certify the result")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an inverse structure for a model.
    Invert(InvertArgs),
    /// Print the step table of a NaMI run.
    Trace(TraceArgs),
    /// Check an inverse for the I-map, minimality and naturalness properties.
    Verify(VerifyArgs),
    /// Exact expected posterior KL of the best inverse with a given structure.
    Kl(KlArgs),
    /// Generate MADE-style masking matrices.
    Masks(MasksArgs),
    /// Time NaMI on a family of growing models; prints CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct InversionArgs {
    /// Model in BN JSON.
    pub input: PathBuf,
    #[arg(long, default_value = "forward")]
    pub mode: Mode,
    /// Latent groups, e.g. "A,B;C" or '[["A","B"],["C"]]'.
    #[arg(long)]
    pub groups: Option<String>,
    /// Stop after the latents instead of also eliminating the observations.
    #[arg(long)]
    pub latent_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[command(flatten)]
    pub inversion: InversionArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub inversion: InversionArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub model: PathBuf,
    pub inverse: PathBuf,
    #[arg(long)]
    pub json: bool,
    /// Also list the independencies of both structures.
    #[arg(long)]
    pub emit_independencies: bool,
    /// Largest model checked by enumeration; bigger ones use the local Markov test.
    #[arg(long, env = "NAMI_ENUM_CAP", default_value_t = DEFAULT_ENUM_CAP)]
    pub enum_cap: usize,
}

#[derive(Debug, Args)]
pub struct KlArgs {
    /// Discrete model (BN JSON with "cpds").
    pub model: PathBuf,
    /// Inverse structure; when absent it is built with --mode.
    pub inverse: Option<PathBuf>,
    #[arg(long, default_value = "forward")]
    pub mode: Mode,
    /// Exit 1 when the KL exceeds this value.
    #[arg(long)]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskKind {
    Made,
    Tree,
    Subset,
}

#[derive(Debug, Args)]
pub struct MasksArgs {
    #[arg(long, value_enum)]
    pub kind: MaskKind,
    /// Number of latents (made).
    #[arg(long)]
    pub latents: Option<usize>,
    /// Number of observations (made).
    #[arg(long, default_value_t = 1)]
    pub obs: usize,
    /// Tree depth (tree).
    #[arg(long)]
    pub depth: Option<u32>,
    /// Inverse structure to realize (subset).
    #[arg(long)]
    pub inverse: Option<PathBuf>,
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "32,32", value_delimiter = ',')]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw hidden labels purely uniformly, without covering the pool first.
    #[arg(long)]
    pub uniform: bool,
    #[arg(long)]
    pub no_skip: bool,
    /// Output units per factor.
    #[arg(long, default_value_t = 1)]
    pub params: usize,
    /// Write the JSON here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write one `.npy` file per mask into this directory.
    #[arg(long)]
    pub npy: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Chain,
    Tree,
    Random,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "chain")]
    pub family: Family,
    /// Model sizes (tree: depths), comma separated.
    #[arg(long, default_value = "100,1000,10000", value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, default_value = "forward")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Runs per size; the fastest is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Leave out the timing column so output is reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn parse(message: impl Into<String>) -> Self {
        CliError { code: EXIT_PARSE, message: message.into() }
    }

    fn semantic(message: impl Into<String>) -> Self {
        CliError { code: EXIT_SEMANTIC, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(_) => CliError::parse(e.to_string()),
            _ => CliError::semantic(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::parse(e.to_string())
    }
}

type CmdResult = Result<i32, CliError>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Invert(a) => cmd_invert(a, out),
        Command::Trace(a) => cmd_trace(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Kl(a) => cmd_kl(a, out, err),
        Command::Masks(a) => cmd_masks(a, out, err),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn load_bn(path: &Path) -> Result<BayesNet, CliError> {
    nio::bn_from_json(&read(path)?).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> CliError {
    let mut c = CliError::from(e);
    c.message = format!("{}: {}", path.display(), c.message);
    c
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::semantic(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(CliError::from),
    }
}

/// Accepts `"A,B;C"` or a JSON list of lists.
pub fn parse_groups(text: &str) -> Result<Vec<Vec<String>>, CliError> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| CliError::parse(format!("groups: {e}")));
    }
    Ok(text
        .split(';')
        .map(|g| g.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        .collect())
}

fn build_inverse(a: &InversionArgs) -> Result<(BayesNet, InverseStructure), CliError> {
    let bn = load_bn(&a.input)?;
    let groups = match &a.groups {
        Some(text) => Some(
            parse_groups(text)?
                .iter()
                .map(|g| g.iter().map(|n| bn.id(n)).collect::<Result<Vec<VarId>, _>>())
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let h = match a.mode {
        Mode::Nami(direction) | Mode::Grouped(direction) => {
            if matches!(a.mode, Mode::Grouped(_)) && groups.is_none() {
                return Err(CliError::semantic(format!("mode {} needs --groups", a.mode)));
            }
            let mut opts = NamiOptions::new(direction);
            opts.groups = groups;
            opts.eliminate_observed = !a.latent_only;
            nami_invert(&bn, &opts)?
        }
        other => {
            if groups.is_some() || a.latent_only {
                return Err(CliError::semantic(format!("--groups and --latent-only only apply to NaMI modes, not {other}")));
            }
            invert(&bn, other, None)?
        }
    };
    Ok((bn, h))
}

pub fn cmd_invert(a: &InvertArgs, out: &mut dyn Write) -> CmdResult {
    let (_, h) = build_inverse(&a.inversion)?;
    let text = match a.format {
        Format::Json => format!("{:#}\n", nio::inverse_to_json(&h)),
        Format::Dot => h.to_dot(),
    };
    emit(out, a.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

pub fn cmd_trace(a: &TraceArgs, out: &mut dyn Write) -> CmdResult {
    if !a.inversion.mode.is_nami() {
        return Err(CliError::semantic(format!("trace needs a NaMI mode, got {}", a.inversion.mode)));
    }
    let (bn, h) = build_inverse(&a.inversion)?;
    let trace = h.trace.expect("NaMI runs record a trace");
    out.write_all(trace.render(&bn).as_bytes())?;
    Ok(EXIT_OK)
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let g = load_bn(&a.model)?;
    let h = load_bn(&a.inverse)?;
    let report = verify(&h, &g, a.enum_cap)?;
    let indeps = if a.emit_independencies {
        Some((enumerate_independencies(&g, a.enum_cap)?, enumerate_independencies(&h, a.enum_cap)?))
    } else {
        None
    };
    if a.json {
        let mut v = report.to_json(&h);
        if let Some((ig, ih)) = &indeps {
            v["independencies"] = json!({"model": ig.to_json(&g), "inverse": ih.to_json(&h)});
        }
        writeln!(out, "{v:#}")?;
    } else {
        out.write_all(report.render(&h).as_bytes())?;
        if let Some((ig, ih)) = &indeps {
            for (label, set, bn) in [("model", ig, &g), ("inverse", ih, &h)] {
                writeln!(out, "I({label}): {} assertions", set.len())?;
                for x in set.assertions() {
                    writeln!(out, "  {}", x.display(bn))?;
                }
            }
        }
    }
    Ok(if report.all_pass() { EXIT_OK } else { EXIT_PROPERTY })
}

pub fn cmd_kl(a: &KlArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = nio::discrete_from_json(&read(&a.model)?).map_err(|e| with_path(e, &a.model))?;
    let h = match &a.inverse {
        Some(p) => load_bn(p)?,
        None => invert(&model.structure, a.mode, None)?.graph,
    };
    let fitted = fit_inverse_exact(&model, &h)?;
    for &(v, row) in &fitted.zero_rows {
        writeln!(err, "note: {} row {row} has no posterior mass; set to uniform", model.structure.name(v))?;
    }
    let kl = expected_posterior_kl(&model, &fitted.q)?;
    writeln!(out, "{kl:.11e}")?;
    Ok(match a.max {
        Some(m) if kl > m => EXIT_PROPERTY,
        _ => EXIT_OK,
    })
}

fn mask_json(kind: &str, spec: &MaskSpec, stack: &MaskStack, ok: bool, witness: Option<String>) -> Value {
    json!({
        "kind": kind,
        "spec": spec.to_json(),
        "stack": stack.to_json(),
        "connectivity": {"exact": ok, "witness": witness},
    })
}

pub fn cmd_masks(a: &MasksArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let opts = MaskOptions { coverage: !a.uniform, skip: !a.no_skip, params_per_factor: a.params };
    let missing = |flag: &str| CliError::semantic(format!("--kind {:?} needs {flag}", a.kind).to_lowercase());
    let (spec, stack, ints) = match a.kind {
        MaskKind::Made => {
            let m = a.latents.ok_or_else(|| missing("--latents"))?;
            let made = made_masks(m, a.obs, &a.hidden, a.seed, opts)?;
            let ints = json!({"input": made.input_ints, "hidden": made.hidden_ints, "output": made.output_ints});
            (made.spec, made.stack, Some(ints))
        }
        MaskKind::Tree => {
            let spec = tree_made_spec(a.depth.ok_or_else(|| missing("--depth"))?, &a.hidden, a.seed, opts)?;
            let stack = subset_masks(&spec)?;
            (spec, stack, None)
        }
        MaskKind::Subset => {
            let h = load_bn(a.inverse.as_deref().ok_or_else(|| missing("--inverse"))?)?;
            nami::inversion::validate_inverse(&h)?;
            let spec = inverse_spec(&h, &a.hidden, a.seed, opts)?;
            let stack = subset_masks(&spec)?;
            (spec, stack, None)
        }
    };
    let expected: Vec<Vec<VarId>> = spec.output_labels.iter().map(|l| l.members.clone()).collect();
    let (ok, witness) = verify_connectivity(&stack, &spec.input_vars, &expected)?;
    let witness = witness.map(|w| format!("{w:?}"));
    if let Some(w) = &witness {
        writeln!(err, "connectivity differs from the declared factors: {w}")?;
    }
    let kind = format!("{:?}", a.kind).to_lowercase();
    let mut doc = mask_json(&kind, &spec, &stack, ok, witness);
    if let Some(ints) = ints {
        doc["integer_labels"] = ints;
    }
    if let Some(dir) = &a.npy {
        write_npy_dir(dir, &stack)?;
    }
    emit(out, a.out.as_deref(), &format!("{doc:#}\n"))?;
    Ok(if ok { EXIT_OK } else { EXIT_PROPERTY })
}

fn write_npy_dir(dir: &Path, stack: &MaskStack) -> Result<(), CliError> {
    let fail = |e: io::Error| CliError::semantic(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    let masks = stack.masks.iter().enumerate().map(|(k, m)| (format!("layer{k}.npy"), m));
    for (name, m) in masks.chain(stack.skip.iter().map(|m| ("skip.npy".to_string(), m))) {
        let mut buf = Vec::new();
        m.write_npy(&mut buf).map_err(fail)?;
        fs::write(dir.join(name), buf).map_err(fail)?;
    }
    Ok(())
}

/// One bench row: model size, largest clique, fastest wall time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub max_clique: usize,
    pub seconds: f64,
}

pub fn bench_rows(a: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    let direction = match a.mode {
        Mode::Nami(d) => d,
        other => return Err(CliError::semantic(format!("bench needs forward or reverse, got {other}"))),
    };
    let opts = NamiOptions::new(direction);
    a.sizes
        .iter()
        .map(|&size| {
            let bn = bench_model(a.family, size, a.seed)?;
            let mut best = f64::INFINITY;
            let mut max_clique = 0;
            for _ in 0..a.repeats.max(1) {
                let t = Instant::now();
                let h = nami_invert(&bn, &opts)?;
                best = best.min(t.elapsed().as_secs_f64());
                let steps = &h.trace.as_ref().expect("trace").steps;
                max_clique = steps.iter().map(|s| s.parents.len() + 1).max().unwrap_or(0);
            }
            Ok(BenchRow { n: bn.n(), max_clique, seconds: best })
        })
        .collect()
}

fn bench_model(family: Family, size: usize, seed: u64) -> Result<BayesNet, CliError> {
    match family {
        Family::Chain if size >= 2 => Ok(fixtures::chain(size)),
        Family::Tree if (2..=24).contains(&size) => Ok(fixtures::binary_tree(size as u32)),
        Family::Random if size >= 2 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (size as u64).rotate_left(32));
            Ok(fixtures::random_sparse_dag(&mut rng, size, 2, 0.3))
        }
        _ => Err(CliError::semantic(format!("size {size} is out of range for the {family:?} family"))),
    }
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    let rows = bench_rows(a)?;
    if a.no_timing {
        writeln!(out, "n,max_clique")?;
    } else {
        writeln!(out, "n,max_clique,seconds")?;
    }
    for r in rows {
        if a.no_timing {
            writeln!(out, "{},{}", r.n, r.max_clique)?;
        } else {
            writeln!(out, "{},{},{:.9}", r.n, r.max_clique, r.seconds)?;
        }
    }
    Ok(EXIT_OK)
}
