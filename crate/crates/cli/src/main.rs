use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use dirichlet_zeros::contraction::{
    construct_vanishing, interpolate_on_sequence, Construction, RunConfig,
};
use dirichlet_zeros::dbar::Rect;
use dirichlet_zeros::dirichlet::{divisor_power_sum, DirichletPolynomial, SpaceWeight};
use dirichlet_zeros::embedding::{embedding_exponent, verify_contractive_embedding, zero_criterion_for_hp};
use dirichlet_zeros::geometry::{
    blaschke_condition, carleson_condition, cone_aperture, shapiro_shields_condition, PointSequence,
};
use dirichlet_zeros::laplace::GridFunction;
use dirichlet_zeros::verifier::{count_zeros, necessity_check, write_zero_csv, Contour};
use dirichlet_zeros::Error;

/// Dirichlet series vanishing on, or interpolating along, finite sequences.
#[derive(Parser)]
#[command(name = "dzeros", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a nontrivial series vanishing on a sequence.
    Construct(ConstructArgs),
    /// Build a series agreeing with a target density's transform on a sequence.
    Interpolate(ConstructArgs),
    /// Check a series against a sequence: residuals and winding counts.
    Verify(VerifyArgs),
    /// Compare H^p and D_alpha norms.
    Embed(EmbedArgs),
    /// Run the zero-set sufficient conditions on a sequence.
    Conditions(ConditionsArgs),
    /// Normalised divisor power sums.
    Asymptotics(AsymptoticsArgs),
}

#[derive(Args)]
struct RunFlags {
    /// `h2`, a number alpha >= 0, or `inf`.
    #[arg(long, default_value = "h2")]
    space: String,
    /// Half-height R of the cutoff support.
    #[arg(long = "r", default_value_t = 5.0)]
    r: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n-cap")]
    n_cap: Option<usize>,
    #[arg(long = "eps-vanish")]
    eps_vanish: Option<f64>,
    /// JSON run configuration; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    /// JSON array of points `{"sigma", "t", "multiplicity"}`.
    #[arg(long)]
    seq: PathBuf,
    /// Target density `{"breakpoints", "values"}`; switches to interpolation.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Directory for `F.json` and `certificate.json`.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct VerifyArgs {
    /// Series as `[[n, re, im], ...]`.
    #[arg(long = "f")]
    f: PathBuf,
    #[arg(long)]
    seq: Option<PathBuf>,
    /// Relative residual allowed at the points.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Radius of the winding disks around the points.
    #[arg(long, default_value_t = 1e-2)]
    radius: f64,
    /// `sigma0,sigma1,t0,t1` to locate zeros in.
    #[arg(long = "box")]
    rect: Option<String>,
    /// CSV of zeros found in the box.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    /// Polynomial as `[[n, re, im], ...]`.
    #[arg(long, conflicts_with = "random")]
    poly: Option<PathBuf>,
    /// Number of random polynomials.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Largest index of a random polynomial.
    #[arg(long = "max-len", default_value_t = 8)]
    max_len: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConditionsArgs {
    #[arg(long)]
    seq: PathBuf,
    /// Exponent for the Carleson-type sum.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Target `p` in (2, 4) for the H^p criterion.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    /// A number alpha >= 0 or `inf`.
    #[arg(long, default_value = "1")]
    alpha: String,
    /// Cut-offs M.
    #[arg(long, num_args = 1.., default_values_t = [1_000_000u64, 2_000_000])]
    m: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoContraction { .. } | Error::NontrivialityFailed { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn bad(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| bad(e.to_string()))?;
    match out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| bad(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_weight(text: &str) -> std::result::Result<SpaceWeight, Failure> {
    if text.eq_ignore_ascii_case("inf") {
        return Ok(SpaceWeight::Infinite);
    }
    let a: f64 = text.parse().map_err(|_| bad(format!("bad alpha {text:?}")))?;
    Ok(SpaceWeight::finite(a)?)
}

fn run_config(flags: &RunFlags) -> std::result::Result<RunConfig, Failure> {
    let mut base = serde_json::to_value(RunConfig::default()).map_err(|e| bad(e.to_string()))?;
    let space: Value = if flags.space.eq_ignore_ascii_case("h2") || flags.space.eq_ignore_ascii_case("inf") {
        json!(flags.space.to_ascii_lowercase())
    } else {
        json!(flags
            .space
            .parse::<f64>()
            .map_err(|_| bad(format!("bad space {:?}", flags.space)))?)
    };
    base["alpha"] = space;
    base["R"] = json!(flags.r);
    if let Some(s) = flags.seed {
        base["seed"] = json!(s);
    }
    if let Some(n) = flags.n_cap {
        base["N_cap"] = json!(n);
    }
    if let Some(e) = flags.eps_vanish {
        base["eps_vanish"] = json!(e);
    }
    if let Some(path) = &flags.config {
        let file: Value = serde_json::from_str(&read(path)?).map_err(|e| bad(format!("config: {e}")))?;
        let Value::Object(map) = file else {
            return Err(bad("config must be a JSON object"));
        };
        for (k, v) in map {
            base[k] = v;
        }
    }
    Ok(RunConfig::from_json(&base.to_string())?)
}

fn cmd_construct(args: &ConstructArgs, interpolate: bool) -> Outcome {
    let config = run_config(&args.run)?;
    let seq = PointSequence::from_json(&read(&args.seq)?)?;
    let result: Construction = match (&args.target, interpolate) {
        (Some(t), _) => interpolate_on_sequence(&seq, &GridFunction::from_json(&read(t)?)?, &config)?,
        (None, true) => return Err(bad("interpolate needs --target")),
        (None, false) => construct_vanishing(&seq, &config)?,
    };
    fs::create_dir_all(&args.out).map_err(|e| bad(format!("{}: {e}", args.out.display())))?;
    fs::write(args.out.join("F.json"), result.series.to_json()? + "\n")
        .map_err(|e| bad(e.to_string()))?;
    emit(&result.cert, Some(&args.out.join("certificate.json")))?;
    let c = &result.cert;
    println!(
        "N={} rho_hat={:.3e} iterations={} max_relative_residual={:.3e} certified={}",
        c.n,
        c.rho_hat,
        c.records.len(),
        c.max_relative_residual,
        c.certified
    );
    Ok(c.certified)
}

fn parse_rect(text: &str) -> std::result::Result<Rect, Failure> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(format!("bad box {text:?}")))?;
    let [a, b, c, d] = parts[..] else {
        return Err(bad(format!("box needs four numbers, got {text:?}")));
    };
    Ok(Rect::new(a, b, c, d)?)
}

#[derive(Serialize)]
struct PointReport {
    sigma: f64,
    t: f64,
    multiplicity: u32,
    relative_residuals: Vec<f64>,
    winding: Option<i64>,
    ok: bool,
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let f = DirichletPolynomial::from_json(&read(&args.f)?)?;
    let rect = args.rect.as_deref().map(parse_rect).transpose()?;
    let seq = match &args.seq {
        Some(p) => PointSequence::from_json(&read(p)?)?,
        None => PointSequence::empty(),
    };
    let norm = f.norm_h2();
    let tol = 1e-12 * norm.max(f64::MIN_POSITIVE);
    let mut points = Vec::new();
    for p in seq.points() {
        let relative_residuals: Vec<f64> = (0..p.multiplicity)
            .map(|k| {
                let v = f.evaluate_derivative(p.z(), k).norm();
                if norm > 0.0 { v / norm } else { f64::INFINITY }
            })
            .collect();
        let winding = count_zeros(|s| f.evaluate(s), Contour::circle(p.z(), args.radius)?, tol)
            .ok()
            .map(|z| z.count);
        let ok = relative_residuals.iter().all(|r| *r <= args.eps)
            && winding.is_some_and(|w| w >= p.multiplicity as i64);
        points.push(PointReport {
            sigma: p.sigma(),
            t: p.t,
            multiplicity: p.multiplicity,
            relative_residuals,
            winding,
            ok,
        });
    }
    let necessity = rect.map(|r| necessity_check(&f, r)).transpose()?;
    if let (Some(n), Some(path)) = (&necessity, &args.csv) {
        let file = fs::File::create(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        write_zero_csv(file, &n.zeros)?;
    }
    let ok = points.iter().all(|p| p.ok);
    emit(
        &json!({ "norm_h2": norm, "points": points, "necessity": necessity, "ok": ok }),
        args.out.as_deref(),
    )?;
    Ok(ok)
}

fn random_poly(rng: &mut ChaCha8Rng, max_len: usize) -> DirichletPolynomial {
    let len = rng.gen_range(1..=max_len.max(1));
    let coeffs = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    DirichletPolynomial::new(1, coeffs)
}

fn cmd_embed(args: &EmbedArgs) -> Outcome {
    let exponent = embedding_exponent(args.alpha)?;
    let polys = match (&args.poly, args.random) {
        (Some(p), _) => vec![DirichletPolynomial::from_json(&read(p)?)?],
        (None, Some(n)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            (0..n).map(|_| random_poly(&mut rng, args.max_len)).collect()
        }
        (None, None) => Vec::new(),
    };
    let integer = args.alpha.fract() == 0.0;
    let mut checks = Vec::new();
    if integer && !polys.is_empty() {
        for p in &polys {
            checks.push(verify_contractive_embedding(p, args.alpha as u32)?);
        }
    } else if !polys.is_empty() {
        return Err(bad("norm comparison needs an integer alpha"));
    }
    let violations = checks.iter().filter(|c| !c.ok).count();
    emit(
        &json!({
            "alpha": args.alpha,
            "exponent": exponent,
            "checks": checks,
            "violations": violations,
        }),
        args.out.as_deref(),
    )?;
    Ok(violations == 0)
}

fn cmd_conditions(args: &ConditionsArgs) -> Outcome {
    let seq = PointSequence::from_json(&read(&args.seq)?)?;
    let shapiro = match shapiro_shields_condition(&seq) {
        Ok(r) => json!(r),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let hp = args.p.map(|p| zero_criterion_for_hp(&seq, p)).transpose()?;
    let aperture = (!seq.is_empty()).then(|| cone_aperture(&seq, 0.0));
    emit(
        &json!({
            "blaschke": blaschke_condition(&seq),
            "carleson": carleson_condition(&seq, args.beta)?,
            "beta": args.beta,
            "shapiro_shields": shapiro,
            "cone_aperture_at_0": aperture,
            "hp_criterion": hp,
        }),
        args.out.as_deref(),
    )?;
    Ok(true)
}

fn cmd_asymptotics(args: &AsymptoticsArgs) -> Outcome {
    let weight = parse_weight(&args.alpha)?;
    if args.m.iter().any(|&m| m < 3) {
        return Err(bad("every M must be at least 3"));
    }
    let reports: Vec<_> = args.m.iter().map(|&m| divisor_power_sum(weight, m)).collect();
    let changes: Vec<f64> = reports
        .windows(2)
        .map(|w| (w[1].normalized_ratio - w[0].normalized_ratio).abs() / w[0].normalized_ratio)
        .collect();
    emit(
        &json!({ "alpha": args.alpha, "reports": reports, "relative_changes": changes }),
        args.out.as_deref(),
    )?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Construct(a) => cmd_construct(a, false),
        Command::Interpolate(a) => cmd_construct(a, true),
        Command::Verify(a) => cmd_verify(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Conditions(a) => cmd_conditions(a),
        Command::Asymptotics(a) => cmd_asymptotics(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
