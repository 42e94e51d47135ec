use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::freqbound::frequency_bound;
use crate::midcore::{certify_claim, CertifyInput, DesignInput, Verdict};
use crate::pendulum::{
    assignment_design, figure2_csv, figure2_table, gmid_design, intermediate_design,
    PendulumConfig, Variant,
};
use crate::quasipoly::{Quasipolynomial, SearchBox};
use crate::roots::find_roots;
use crate::simulate::{fit_decay_rate, integrate, DdeProblem};
use crate::specfun::{combo_f, kummer_phi, CombinationParams, KummerParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CERTIFIED: i32 = 2;
pub const EXIT_REFUTED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "middelay",
    version,
    about = "Design and certify dominant multiple roots of single-delay quasipolynomials"
)]
pub struct Cli {
    /// Directory for report files; without it the main report goes to stdout.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the quasipolynomial with a root of multiplicity n + m from {n, m, tau, lambda0, A}.
    Design(InputArg),
    /// Certify that lambda0 is the dominant root.
    Certify {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(0..=12))]
        max_ord: u64,
    },
    /// Locate all roots in a box.
    Spectrum {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        bx: BoxArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Frequency bound for a normalized quasipolynomial (delay 1, root at 0).
    FreqBound {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(0..=12))]
        max_ord: u64,
        /// Normalize around this root first.
        #[arg(long, allow_hyphen_values = true)]
        lambda0: Option<f64>,
    },
    /// Delayed PD designs for the pendulum.
    Pendulum(PendulumArgs),
    /// Integrate the delay equation and fit its decay rate.
    Simulate(InputArg),
    /// Run the acceptance criteria and print a pass/fail table.
    Selfcheck,
    /// Special-function evaluation.
    Specfun {
        #[command(subcommand)]
        command: SpecfunCommand,
    },
}

#[derive(Debug, Args)]
pub struct InputArg {
    /// JSON input file, or `-` for stdin.
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoxArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub re_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub re_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Classical,
    InvertedOnCart,
}

#[derive(Debug, Args)]
pub struct PendulumArgs {
    #[arg(long, value_enum, default_value = "classical")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,
    #[arg(long = "L", default_value_t = 1.0)]
    pub l: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Delay; the classical default is the quadruple-root delay sqrt(2L/g).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Write the lambda0(tau) table for g/L = 1..7 instead of a design.
    #[arg(long)]
    pub figure2: bool,
    #[arg(long, default_value_t = 100)]
    pub tau_grid: usize,
}

#[derive(Debug, Subcommand)]
pub enum SpecfunCommand {
    /// Evaluate Phi(a, b, z), or F = alpha Phi(a, b, z) + beta Phi(a, b+1, z) when alpha or beta is given.
    Eval {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        re: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        im: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {msg}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn invalid(e: impl std::fmt::Display) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Exit code, files to write and a summary line for stderr.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub artifacts: Vec<Artifact>,
    pub summary: String,
}

/// `PrettyFormatter` that prints every float as `{:.16e}`.
struct ExactFloats(PrettyFormatter<'static>);

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17 significant digits per float and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    v.serialize(&mut ser).expect("report types serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })
}

fn read_input<T: DeserializeOwned>(p: &Path) -> Result<T, CliError> {
    let name = p.display().to_string();
    let text = if name == "-" {
        io::read_to_string(io::stdin())
    } else {
        std::fs::read_to_string(p)
    }
    .map_err(|source| CliError::Io {
        path: name.clone(),
        source,
    })?;
    parse_json(&text, &name)
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact {
        name: name.to_string(),
        contents,
    }
}

#[derive(Serialize)]
struct Report<'a, I: Serialize, R: Serialize> {
    command: &'a str,
    input: I,
    result: R,
}

fn report<I: Serialize, R: Serialize>(command: &str, input: I, result: R) -> String {
    to_json(&Report {
        command,
        input,
        result,
    })
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Certified => EXIT_OK,
        Verdict::NotCertifiedByMethod => EXIT_NOT_CERTIFIED,
        Verdict::Refuted => EXIT_REFUTED,
    }
}

fn certify_text(text: &str, path: &str, max_ord: usize) -> Result<Outcome, CliError> {
    let input: CertifyInput = parse_json(text, path)?;
    let q = input
        .quasi()
        .map_err(|e| CliError::Invalid(format!("{path}: {e}")))?;
    let cert =
        certify_claim(&q, input.lambda0, input.a_param, max_ord).map_err(CliError::invalid)?;
    let code = verdict_code(cert.verdict);
    let summary = format!("verdict: {:?}", cert.verdict);
    Ok(Outcome {
        code,
        artifacts: vec![artifact(
            "certificate.json",
            report("certify", &input, &cert),
        )],
        summary,
    })
}

/// Exit status of `certify` on an in-memory input document.
pub fn certify_exit_code(text: &str) -> i32 {
    match certify_text(text, "<memory>", 5) {
        Ok(o) => o.code,
        Err(_) => EXIT_INPUT,
    }
}

fn default_box(q: &Quasipolynomial) -> SearchBox {
    let r = q.companion().envelope_bound(0.0).max(1.0) + 1.0;
    SearchBox {
        re_min: -r,
        re_max: r,
        im_min: -r,
        im_max: r,
    }
}

fn roots_csv(r: &crate::roots::SpectrumReport) -> String {
    let mut s = String::from("re,im,multiplicity,residual\n");
    for x in &r.roots {
        writeln!(
            s,
            "{:.16e},{:.16e},{},{:.16e}",
            x.location.re, x.location.im, x.multiplicity, x.residual
        )
        .expect("write to String");
    }
    s
}

#[derive(Serialize)]
struct PendulumInput {
    variant: Variant,
    g: f64,
    #[serde(rename = "L")]
    l: f64,
    tau: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct SimulateInput {
    #[serde(flatten)]
    problem: DdeProblem,
    #[serde(default)]
    window: Option<[f64; 2]>,
}

fn pendulum(args: &PendulumArgs) -> Result<Outcome, CliError> {
    if args.figure2 {
        if args.tau_grid < 2 {
            return Err(CliError::Invalid("--tau-grid must be at least 2".into()));
        }
        let ratios: Vec<f64> = (1..=7).map(f64::from).collect();
        let rows = figure2_table(&ratios, args.tau_grid);
        return Ok(Outcome {
            code: EXIT_OK,
            artifacts: vec![artifact("figure2.csv", figure2_csv(&rows))],
            summary: format!("{} rows", rows.len()),
        });
    }
    let variant = match args.variant {
        VariantArg::Classical => Variant::Classical,
        VariantArg::InvertedOnCart => Variant::InvertedOnCart { eps: args.eps },
    };
    let cfg = PendulumConfig::new(args.g, args.l, variant).map_err(CliError::invalid)?;
    let input = PendulumInput {
        variant,
        g: args.g,
        l: args.l,
        tau: args.tau,
    };
    let (pd, a_param) = match (variant, args.tau) {
        (Variant::Classical, None) => {
            let d = gmid_design(&cfg).map_err(CliError::invalid)?;
            (d, d.a_param())
        }
        (Variant::Classical, Some(tau)) => {
            let d = intermediate_design(&cfg, tau).map_err(CliError::invalid)?;
            (d, d.a_param())
        }
        (Variant::InvertedOnCart { .. }, Some(tau)) => {
            let (d, mid) = assignment_design(&cfg, tau).map_err(CliError::invalid)?;
            (d, mid.a_param)
        }
        (Variant::InvertedOnCart { .. }, None) => {
            return Err(CliError::Invalid(
                "--tau is required for the inverted pendulum".into(),
            ))
        }
    };
    let q = pd.quasi(&cfg).map_err(CliError::invalid)?;
    let certify_input = CertifyInput {
        n: q.n(),
        m: q.m(),
        tau: pd.tau,
        a: q.a_coeffs(),
        alpha: q.alpha_coeffs(),
        lambda0: pd.lambda0,
        a_param,
    };
    #[derive(Serialize)]
    struct Out<'a> {
        design: &'a crate::pendulum::PdDesign,
        #[serde(rename = "A")]
        a_param: f64,
        quasi: &'a Quasipolynomial,
        certify_input: &'a CertifyInput,
    }
    let out = Out {
        design: &pd,
        a_param,
        quasi: &q,
        certify_input: &certify_input,
    };
    Ok(Outcome {
        code: EXIT_OK,
        artifacts: vec![
            artifact("pendulum.json", report("pendulum", &input, &out)),
            artifact("certify_input.json", to_json(&certify_input)),
        ],
        summary: format!(
            "k_p = {:.16e}, k_d = {:.16e}, lambda0 = {:.16e}",
            pd.k_p, pd.k_d, pd.lambda0
        ),
    })
}

fn complex_text(v: Complex64) -> String {
    format!("{:.16e} {:+.16e}i\n", v.re, v.im)
}

/// Runs one subcommand without touching the filesystem except to read input.
pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Design(inp) => {
            let input: DesignInput = read_input(&inp.input)?;
            let d = input.build().map_err(CliError::invalid)?;
            Ok(Outcome {
                code: EXIT_OK,
                artifacts: vec![
                    artifact("design.json", report("design", &input, &d)),
                    artifact("quasi.json", to_json(&d.quasi)),
                ],
                summary: format!(
                    "multiplicity {} at lambda0 = {:.16e}",
                    d.multiplicity, d.lambda0
                ),
            })
        }
        Command::Certify { input, max_ord } => {
            let name = input.input.display().to_string();
            let text = if name == "-" {
                io::read_to_string(io::stdin())
            } else {
                std::fs::read_to_string(&input.input)
            }
            .map_err(|source| CliError::Io {
                path: name.clone(),
                source,
            })?;
            certify_text(&text, &name, *max_ord as usize)
        }
        Command::Spectrum { input, bx, tol } => {
            let q: Quasipolynomial = read_input(&input.input)?;
            let d = default_box(&q);
            let search = SearchBox::new(
                bx.re_min.unwrap_or(d.re_min),
                bx.re_max.unwrap_or(d.re_max),
                bx.im_min.unwrap_or(d.im_min),
                bx.im_max.unwrap_or(d.im_max),
            )
            .map_err(CliError::invalid)?;
            if !(*tol > 0.0) {
                return Err(CliError::Invalid("--tol must be positive".into()));
            }
            let r = find_roots(&q, &search, *tol).map_err(CliError::invalid)?;
            #[derive(Serialize)]
            struct In<'a> {
                quasi: &'a Quasipolynomial,
                tol: f64,
            }
            Ok(Outcome {
                code: EXIT_OK,
                artifacts: vec![
                    artifact(
                        "spectrum.json",
                        report(
                            "spectrum",
                            In {
                                quasi: &q,
                                tol: *tol,
                            },
                            &r,
                        ),
                    ),
                    artifact("roots.csv", roots_csv(&r)),
                ],
                summary: format!("{} roots, total winding {}", r.roots.len(), r.total_winding),
            })
        }
        Command::FreqBound {
            input,
            max_ord,
            lambda0,
        } => {
            let q: Quasipolynomial = read_input(&input.input)?;
            let qn = match lambda0 {
                Some(l) => q.normalize(*l),
                None => q.clone(),
            };
            if qn.delay() != 1.0 {
                return Err(CliError::Invalid(format!(
                    "normalized input must have tau = 1 (got {}); pass --lambda0 to normalize",
                    qn.delay()
                )));
            }
            let r = frequency_bound(&qn, *max_ord as usize);
            let mut csv = String::from("x,omega_max\n");
            for s in &r.sup_curve {
                match s.omega_max {
                    Some(w) => writeln!(csv, "{:.16e},{:.16e}", s.x, w),
                    None => writeln!(csv, "{:.16e},", s.x),
                }
                .expect("write to String");
            }
            #[derive(Serialize)]
            struct In<'a> {
                quasi: &'a Quasipolynomial,
                max_ord: u64,
                lambda0: Option<f64>,
                x_max: f64,
            }
            let inp = In {
                quasi: &q,
                max_ord: *max_ord,
                lambda0: *lambda0,
                x_max: r.x_max,
            };
            Ok(Outcome {
                code: EXIT_OK,
                artifacts: vec![
                    artifact("freq_bound.json", report("freq-bound", inp, &r)),
                    artifact("sup_curve.csv", csv),
                ],
                summary: format!(
                    "order {} flag {} bound {:?}",
                    r.order_used, r.dominance_flag, r.omega_bound
                ),
            })
        }
        Command::Pendulum(args) => pendulum(args),
        Command::Simulate(inp) => {
            let input: SimulateInput = read_input(&inp.input)?;
            let traj = integrate(&input.problem).map_err(CliError::invalid)?;
            let tau = input.problem.quasi.delay();
            let window = input
                .window
                .unwrap_or([5.0 * tau, (20.0 * tau).min(traj.t_end())]);
            #[derive(Serialize)]
            struct Out {
                samples: usize,
                t_end: f64,
                fit: Option<crate::simulate::DecayFit>,
                fit_error: Option<String>,
            }
            let (fit, fit_error) = match fit_decay_rate(&traj, window) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let out = Out {
                samples: traj.len(),
                t_end: traj.t_end(),
                fit,
                fit_error,
            };
            Ok(Outcome {
                code: EXIT_OK,
                artifacts: vec![
                    artifact("simulate.json", report("simulate", &input, &out)),
                    artifact("trajectory.csv", traj.to_csv()),
                ],
                summary: match &out.fit {
                    Some(f) => format!("decay rate {:.16e}", f.rate),
                    None => out.fit_error.clone().unwrap_or_default(),
                },
            })
        }
        Command::Selfcheck => {
            let results = crate::selfcheck::run_all();
            let all = results.iter().all(|r| r.passed);
            Ok(Outcome {
                code: if all { EXIT_OK } else { EXIT_NOT_CERTIFIED },
                artifacts: vec![
                    artifact("selfcheck.txt", crate::selfcheck::table(&results)),
                    artifact("selfcheck.json", to_json(&results)),
                ],
                summary: format!(
                    "{}/{} criteria passed",
                    results.iter().filter(|r| r.passed).count(),
                    results.len()
                ),
            })
        }
        Command::Specfun {
            command:
                SpecfunCommand::Eval {
                    a,
                    b,
                    re,
                    im,
                    alpha,
                    beta,
                },
        } => {
            let z = Complex64::new(*re, *im);
            let v = if alpha.is_some() || beta.is_some() {
                let p = CombinationParams::real(*a, *b, alpha.unwrap_or(0.0), beta.unwrap_or(0.0))
                    .map_err(CliError::invalid)?;
                combo_f(&p, z)
            } else {
                kummer_phi(&KummerParams::real(*a, *b).map_err(CliError::invalid)?, z)
            }
            .map_err(CliError::invalid)?;
            Ok(Outcome {
                code: EXIT_OK,
                artifacts: vec![artifact("value.txt", complex_text(v))],
                summary: String::new(),
            })
        }
    }
}

/// Parses, executes and writes artifacts; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    match &cli.out {
        Some(dir) => {
            if let Err(e) = std::fs::create_dir_all(dir) {
                eprintln!("error: {}: {e}", dir.display());
                return EXIT_INPUT;
            }
            for a in &outcome.artifacts {
                let path = dir.join(&a.name);
                if let Err(e) = std::fs::write(&path, &a.contents) {
                    eprintln!("error: {}: {e}", path.display());
                    return EXIT_INPUT;
                }
            }
        }
        None => {
            if let Some(a) = outcome.artifacts.first() {
                print!("{}", a.contents);
            }
        }
    }
    if !outcome.summary.is_empty() {
        eprintln!("{}", outcome.summary);
    }
    outcome.code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        let s = to_json(&serde_json::json!({"x": 0.1, "n": 3, "nan": f64::NAN}));
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64().unwrap(), 0.1);
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = parse_json::<DesignInput>("{\"n\": 2,\n \"m\": \"x\"}", "in.json").unwrap_err();
        match e {
            CliError::Parse { line, column, .. } => assert_eq!((line, column), (2, 9)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn malformed_certify_input_is_exit_one() {
        assert_eq!(certify_exit_code("{\"n\": 2}"), EXIT_INPUT);
    }
}
