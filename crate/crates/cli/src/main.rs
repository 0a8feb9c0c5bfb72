//! `handoff`: validate models, synthesize handoff policies, sweep the
//! Pareto front, generate the built-in examples and simulate bundles.
//!
//! Exit codes: 0 success, 1 validation or synthesis failure, 2 I/O, schema
//! or usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use handoff_core::builtin::arm::ArmParams;
use handoff_core::builtin::gridworld::GridParams;
use handoff_core::builtin::Example;
use handoff_core::format::{
    self, read_text, Document, Inputs, ModelFile, PolicyBundle, TraceRecord,
};
use handoff_core::pareto::beta_grid;
use handoff_core::report::{parse_weight_pair, parse_weights, sweep_csv, sweep_svg};
use handoff_core::sim::{estimate, simulate, trace_seed, EstimateOptions};
use handoff_core::{
    synthesize, validate_cognitive, validate_mdp, validate_rabin, CognitiveModel, Error,
    LabeledMdp, RabinAutomaton, SynthesisConfig,
};

#[derive(Parser)]
#[command(name = "handoff", version, about = "Pareto-optimal control handoff synthesis")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate model files.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Synthesize a policy bundle for one weight vector.
    Synthesize {
        #[command(flatten)]
        inputs: InputArgs,
        /// `w1,w2`, non-negative and summing to 1.
        #[arg(long, value_parser = parse_weight_pair)]
        weights: Weights,
        #[command(flatten)]
        tuning: Tuning,
        /// Bundle path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a list of weight vectors and tabulate the value profiles.
    Sweep {
        #[command(flatten)]
        inputs: InputArgs,
        /// Use the weights `(k/(n+1), 1-k/(n+1))` for `k = 1..=n`.
        #[arg(long, conflicts_with = "weights_file", required_unless_present = "weights_file")]
        grid: Option<usize>,
        /// File with one `w1,w2` pair per line.
        #[arg(long)]
        weights_file: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Write the four input files of a built-in example.
    Example {
        name: ExampleName,
        /// JSON file overriding generator parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Monte-Carlo estimates for a policy bundle.
    Simulate {
        #[arg(long)]
        policy_bundle: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        traces: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        horizon: usize,
        /// Minimum post-switch length for the recurrence table.
        #[arg(long)]
        min_suffix: Option<usize>,
        /// Estimates path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the first `--export-count` traces here, one JSON record per line.
        #[arg(long)]
        export_traces: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        export_count: usize,
    },
}

type Weights = [f64; 2];

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    Arm,
    Gridworld,
}

#[derive(Args)]
struct InputArgs {
    /// Built-in example instead of the four files.
    #[arg(long, conflicts_with_all = ["ma", "mh", "att", "dra"])]
    example: Option<ExampleName>,
    #[arg(long, required_unless_present = "example")]
    ma: Option<PathBuf>,
    #[arg(long, required_unless_present = "example")]
    mh: Option<PathBuf>,
    #[arg(long, required_unless_present = "example")]
    att: Option<PathBuf>,
    #[arg(long, required_unless_present = "example")]
    dra: Option<PathBuf>,
}

#[derive(Args)]
struct Tuning {
    #[arg(long, default_value_t = 1e-4)]
    eps_aug: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps_visit: f64,
}

impl Tuning {
    fn config(&self) -> SynthesisConfig {
        let mut c = SynthesisConfig {
            eps_aug: self.eps_aug,
            ..SynthesisConfig::default()
        };
        c.aec.eps_visit = self.eps_visit;
        c
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Json(_) | Error::Format(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.cmd {
        Command::Validate { paths } => cmd_validate(&paths),
        Command::Synthesize { inputs, weights, tuning, out } => {
            cmd_synthesize(&inputs, weights, &tuning, out.as_deref())
        }
        Command::Sweep { inputs, grid, weights_file, tuning, out, svg } => cmd_sweep(
            &inputs,
            grid,
            weights_file.as_deref(),
            &tuning,
            out.as_deref(),
            svg.as_deref(),
        ),
        Command::Example { name, params, out_dir } => cmd_example(name, params.as_deref(), &out_dir),
        Command::Simulate {
            policy_bundle,
            traces,
            seed,
            horizon,
            min_suffix,
            out,
            export_traces,
            export_count,
        } => cmd_simulate(
            &policy_bundle,
            EstimateOptions {
                traces,
                horizon,
                seed,
                min_suffix: min_suffix.unwrap_or(horizon / 2),
            },
            out.as_deref(),
            export_traces.as_deref().map(|p| (p, export_count)),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_validate(paths: &[PathBuf]) -> CmdResult {
    let mut code = 0u8;
    for path in paths {
        let text = match read_text(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("{e}");
                code = 2;
                continue;
            }
        };
        let doc = match Document::parse(&text) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                code = 2;
                continue;
            }
        };
        match doc.build() {
            Err(e) => {
                println!("{}: invalid: {e}", path.display());
                code = code.max(1);
            }
            Ok(model) => {
                let violations = model.validate();
                if violations.is_empty() {
                    println!("{}: ok ({})", path.display(), model.kind());
                } else {
                    println!("{}: {} violation(s)", path.display(), violations.len());
                    for v in violations {
                        println!("  {v}");
                    }
                    code = code.max(1);
                }
            }
        }
    }
    match code {
        0 => Ok(()),
        c => Err(Failure { code: c, message: "validation failed".into() }),
    }
}

fn example(name: ExampleName, params: Option<&Path>) -> Result<Example, Failure> {
    let text = params.map(read_text).transpose()?;
    let parse_err = |e: serde_json::Error| Failure::usage(format!("parameters: {e}"));
    let ex = match name {
        ExampleName::Arm => {
            let p: ArmParams = match &text {
                Some(t) => serde_json::from_str(t).map_err(parse_err)?,
                None => ArmParams::default(),
            };
            p.build()?
        }
        ExampleName::Gridworld => {
            let p: GridParams = match &text {
                Some(t) => serde_json::from_str(t).map_err(parse_err)?,
                None => GridParams::default(),
            };
            p.build().map_err(|e| match e {
                Error::Format(m) => Failure::usage(m),
                e => e.into(),
            })?
        }
    };
    Ok(ex)
}

fn load_inputs(args: &InputArgs) -> Result<(LabeledMdp, LabeledMdp, CognitiveModel, RabinAutomaton), Failure> {
    let (ma, mh, att, dra) = match args.example {
        Some(name) => {
            let ex = example(name, None)?;
            (ex.autonomous, ex.human, ex.attention, ex.automaton)
        }
        None => {
            let path = |p: &Option<PathBuf>| p.clone().expect("clap enforces presence");
            let ma = format::parse_mdp(&read_text(&path(&args.ma))?)?;
            let mh = format::parse_mdp(&read_text(&path(&args.mh))?)?;
            let att = format::parse_cognitive(&read_text(&path(&args.att))?)?;
            let dra = format::parse_rabin(&read_text(&path(&args.dra))?)?;
            (ma, mh, att, dra)
        }
    };
    let mut problems = Vec::new();
    for (what, vs) in [
        ("--ma", validate_mdp(&ma)),
        ("--mh", validate_mdp(&mh)),
        ("--att", validate_cognitive(&att)),
        ("--dra", validate_rabin(&dra)),
    ] {
        problems.extend(vs.into_iter().map(|v| format!("{what}: {v}")));
    }
    if !problems.is_empty() {
        return Err(Failure::invalid(problems.join("\n")));
    }
    Ok((ma, mh, att, dra))
}

fn cmd_synthesize(args: &InputArgs, weights: Weights, tuning: &Tuning, out: Option<&Path>) -> CmdResult {
    let (ma, mh, att, dra) = load_inputs(args)?;
    let syn = synthesize(&ma, &mh, &att, &dra, &tuning.config())?;
    for w in syn.warnings() {
        eprintln!("warning: {w}");
    }
    let sol = syn.scalarize(weights)?;
    eprintln!(
        "lambda = ({}, {}), u1 = {}, u2 = {}",
        sol.lambda[0], sol.lambda[1], sol.profile.u1, sol.profile.u2
    );
    let bundle = PolicyBundle::new(
        Inputs::new(&ma, &mh, &att, &dra),
        &syn,
        sol.weights,
        sol.lambda,
        sol.profile,
        &sol.policy,
    );
    write_output(out, &format::to_json(&bundle)?)
}

fn cmd_sweep(
    args: &InputArgs,
    grid: Option<usize>,
    weights_file: Option<&Path>,
    tuning: &Tuning,
    out: Option<&Path>,
    svg: Option<&Path>,
) -> CmdResult {
    let weights = match (grid, weights_file) {
        (Some(0), _) => return Err(Failure::usage("--grid must be at least 1")),
        (Some(k), _) => beta_grid(k),
        (None, Some(path)) => parse_weights(&read_text(path)?)?,
        (None, None) => return Err(Failure::usage("one of --grid or --weights-file is required")),
    };
    let (ma, mh, att, dra) = load_inputs(args)?;
    let syn = synthesize(&ma, &mh, &att, &dra, &tuning.config())?;
    for w in syn.warnings() {
        eprintln!("warning: {w}");
    }
    let points = syn.sweep(&weights);
    for p in &points {
        if let Err(e) = &p.result {
            eprintln!("warning: weights ({}, {}) failed: {e}", p.weights[0], p.weights[1]);
        }
    }
    write_output(out, &sweep_csv(&points)?)?;
    if let Some(path) = svg {
        write_output(Some(path), &sweep_svg(&points))?;
    }
    Ok(())
}

fn cmd_example(name: ExampleName, params: Option<&Path>, out_dir: &Path) -> CmdResult {
    let ex = example(name, params)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let files = [
        ("ma.json", ModelFile::Mdp(ex.autonomous)),
        ("mh.json", ModelFile::Mdp(ex.human)),
        ("att.json", ModelFile::Cognitive(ex.attention)),
        ("dra.json", ModelFile::Rabin(ex.automaton)),
    ];
    for (file, model) in files {
        let path = out_dir.join(file);
        write_output(Some(&path), &model.to_json()?)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_simulate(
    bundle: &Path,
    opts: EstimateOptions,
    out: Option<&Path>,
    export: Option<(&Path, usize)>,
) -> CmdResult {
    if opts.traces == 0 || opts.horizon == 0 {
        return Err(Failure::usage("--traces and --horizon must be positive"));
    }
    let bundle = PolicyBundle::parse(&read_text(bundle)?)?;
    let r = bundle.restore()?;
    let est = estimate(&r.product, &r.policy, &r.terminal, &opts)?;
    let report = format::SimulationReport {
        estimate: est,
        lp_profile: bundle.profile,
    };
    write_output(out, &format::to_json(&report)?)?;
    if let Some((path, count)) = export {
        let mut text = String::new();
        for i in 0..count.min(opts.traces) {
            let seed = trace_seed(opts.seed, i as u64);
            let trace = simulate(&r.product, &r.policy, &r.terminal, seed, opts.horizon)?;
            text.push_str(&format::to_json_line(&TraceRecord::new(&r.product, i, seed, &trace))?);
        }
        write_output(Some(path), &text)?;
    }
    Ok(())
}
