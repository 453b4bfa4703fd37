#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod failure;
mod report;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssl_core::convexity::{classify_convexity, convexify, sverak_example, Label};
use ssl_core::fields::{write_field, FieldFile, ScalarField};
use ssl_core::matching::{build_matching_displacement, MatchOptions};
use ssl_core::material::Lame;
use ssl_core::monge_ampere::{ma_residual, solve_ma, MAOptions, MAProblem};
use ssl_core::recovery::{gamma_scan, RecoveryInputs};
use ssl_core::shell_energy::{
    distance_to_rotations, energy_3d_with, limit_kirchhoff, read_deformation, shell_embedding, total_energy_with,
    ShellParams,
};

use config::{make_grid, Config, Domain, NumList, Source};
use failure::Failure;
use report::{convexity_table, match_table, num, scan_table, write_atomic};

#[derive(Parser)]
#[command(name = "ssl", version, about = "Monge-Ampere constrained shallow-shell experiments")]
struct Cli {
    /// `key = value` experiment file; flags on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monge-Ampere solver.
    Ma {
        #[command(subcommand)]
        action: MaAction,
    },
    /// Matching corrections of an infinitesimal isometry.
    Match {
        #[command(subcommand)]
        action: MatchAction,
    },
    /// Scaled recovery energies against the bending limit.
    Gamma {
        #[command(subcommand)]
        action: GammaAction,
    },
    /// Sign classification and convex envelope.
    Convexity {
        #[command(subcommand)]
        action: ConvexityAction,
    },
    /// Reference fields.
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
    /// Elastic energy of a stored deformation.
    Energy {
        #[command(subcommand)]
        action: EnergyAction,
    },
}

#[derive(Subcommand)]
enum MaAction {
    Solve(MaSolveArgs),
}

#[derive(Subcommand)]
enum MatchAction {
    Run(MatchRunArgs),
}

#[derive(Subcommand)]
enum GammaAction {
    Scan(GammaScanArgs),
}

#[derive(Subcommand)]
enum ConvexityAction {
    Analyze(ConvexityArgs),
}

#[derive(Subcommand)]
enum FixturesAction {
    Sverak(FixtureArgs),
}

#[derive(Subcommand)]
enum EnergyAction {
    Eval(EnergyArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Nodes per side.
    #[arg(long)]
    grid: Option<usize>,
    /// `square` ([0,1]²) or `disk` (unit disc).
    #[arg(long)]
    domain: Option<Domain>,
}

#[derive(Args)]
struct MaterialArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct MaSolveArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Right-hand side.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<Source>,
    /// Dirichlet data.
    #[arg(long, allow_hyphen_values = true)]
    boundary: Option<Source>,
    /// Lower bound required of `f`.
    #[arg(long, allow_hyphen_values = true)]
    c0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// FIELD2D output with components `u` and the residual.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatchRunArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<Source>,
    #[arg(long, allow_hyphen_values = true)]
    v: Option<Source>,
    /// Comma-separated thicknesses.
    #[arg(long, allow_hyphen_values = true)]
    h: Option<NumList>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Keep the Jacobian at `-cof ∇²v`.
    #[arg(long)]
    frozen: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GammaScanArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    material: MaterialArgs,
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<Source>,
    #[arg(long, allow_hyphen_values = true)]
    v: Option<Source>,
    /// Transverse load; must be balanced.
    #[arg(long, allow_hyphen_values = true)]
    load: Option<Source>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Thickness quadrature points.
    #[arg(long)]
    nq: Option<usize>,
    /// Comma-separated, strictly decreasing thicknesses.
    #[arg(long, allow_hyphen_values = true)]
    h: Option<NumList>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvexityArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, allow_hyphen_values = true)]
    u: Option<Source>,
    /// Singular-set threshold on `det ∇²u`.
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// FIELD2D output with components `u` and its convex envelope.
    #[arg(long)]
    envelope_out: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnergyArgs {
    #[command(flatten)]
    material: MaterialArgs,
    /// DEF3D file.
    #[arg(long)]
    deformation: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<Source>,
    /// Limit displacement; adds the bending target to the output.
    #[arg(long, allow_hyphen_values = true)]
    v: Option<Source>,
    #[arg(long, allow_hyphen_values = true)]
    load: Option<Source>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
}

fn grid_from(cfg: &Config, args: &GridArgs, domain: Domain) -> Result<std::sync::Arc<ssl_core::fields::Grid>, Failure> {
    let n = cfg.pick_or(args.grid, "grid", 65)?;
    let domain = cfg.pick_or(args.domain, "domain", domain)?;
    make_grid(n, domain)
}

fn lame_from(cfg: &Config, args: &MaterialArgs) -> Result<Lame, Failure> {
    Ok(Lame::new(
        cfg.pick_or(args.mu, "mu", 1.0)?,
        cfg.pick_or(args.lambda, "lambda", 1.0)?,
    )?)
}

fn alpha_from(cfg: &Config, cli: Option<f64>) -> Result<f64, Failure> {
    let alpha = cfg.pick_or(cli, "alpha", 0.5)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::invalid(
            "invalid_alpha",
            format!("alpha must lie in (0, 1), got {alpha}"),
        ));
    }
    Ok(alpha)
}

fn sources(cfg: &Config, list: &[(Option<Source>, &str, Option<&str>)]) -> Result<Vec<Source>, Failure> {
    let out = list
        .iter()
        .map(|(cli, key, default)| match (cfg.pick(cli.clone(), key)?, default) {
            (Some(s), _) => Ok(s),
            (None, Some(d)) => Ok(d.parse().expect("default expression")),
            (None, None) => Err(Failure::invalid("missing_key", format!("`{key}` is required"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.iter().try_for_each(Source::check_exists)?;
    Ok(out)
}

fn write_fields(path: &Path, fields: &[&ScalarField]) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_field(&mut buf, &FieldFile::from_fields(fields)?)?;
    write_atomic(path, &buf)
}

fn ma_solve(cfg: &Config, a: MaSolveArgs) -> Result<(), Failure> {
    let src = sources(cfg, &[(a.f, "f", Some("1")), (a.boundary, "boundary", None)])?;
    let g = grid_from(cfg, &a.grid, Domain::Square)?;
    let defaults = MAOptions::default();
    let opts = MAOptions {
        tol: cfg.pick_or(a.tol, "tol", defaults.tol)?,
        max_iter: cfg.pick_or(a.max_iter, "max_iter", defaults.max_iter)?,
        ..defaults
    };
    let out = cfg.pick(a.out, "out")?;
    let f = src[0].field(&g, "f")?;
    let problem = MAProblem::new(f.clone(), src[1].field(&g, "boundary")?, cfg.pick(a.c0, "c0")?)?;
    let sol = solve_ma(&problem, None, &opts)?;
    let residual = ma_residual(&sol.u, &f)?;
    let max_res = g
        .interior_nodes()
        .into_iter()
        .map(|k| residual.at(k).abs())
        .fold(0.0, f64::max);
    println!("iterations={}", sol.iterations);
    println!("max_residual={}", num(max_res));
    if let Some(p) = out {
        write_fields(&p, &[&sol.u, &residual])?;
        println!("wrote={}", p.display());
    }
    Ok(())
}

fn match_run(cfg: &Config, a: MatchRunArgs) -> Result<(), Failure> {
    let src = sources(cfg, &[(a.v0, "v0", None), (a.v, "v", None)])?;
    let hs = cfg.require(a.h, "h")?.0;
    if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Failure::invalid("invalid_h_list", "thicknesses must be positive"));
    }
    let frozen = a.frozen || cfg.pick::<bool>(None, "frozen")?.unwrap_or(false);
    let g = grid_from(cfg, &a.grid, Domain::Square)?;
    let defaults = MatchOptions::default();
    let opts = MatchOptions {
        tol: cfg.pick_or(a.tol, "tol", defaults.tol)?,
        max_iter: cfg.pick_or(a.max_iter, "max_iter", defaults.max_iter)?,
        frozen,
        ..defaults
    };
    let out = cfg.pick(a.out, "out")?;
    let (v0, v) = (src[0].field(&g, "v0")?, src[1].field(&g, "v")?);
    let runs = hs
        .iter()
        .map(|&h| {
            let r = build_matching_displacement(h, &v0, &v, &opts)?;
            println!(
                "h={} iterations={} curvature_residual={} isometry_over_h2={}",
                num(h),
                r.newton_iterations,
                num(r.curvature_residual),
                num(r.isometry_residual / (h * h))
            );
            Ok(r)
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    if let Some(p) = out {
        write_atomic(&p, &match_table(&runs)?.to_csv())?;
        println!("wrote={}", p.display());
    }
    Ok(())
}

fn gamma_scan_cmd(cfg: &Config, a: GammaScanArgs) -> Result<(), Failure> {
    let src = sources(
        cfg,
        &[(a.v0, "v0", None), (a.v, "v", None), (a.load, "load", Some("0"))],
    )?;
    let hs = cfg.require(a.h, "h")?.0;
    if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) || hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Failure::invalid(
            "invalid_h_list",
            format!("thicknesses must be positive and strictly decreasing, got {hs:?}"),
        ));
    }
    let alpha = alpha_from(cfg, a.alpha)?;
    let lame = lame_from(cfg, &a.material)?;
    let g = grid_from(cfg, &a.grid, Domain::Square)?;
    let mut params = ShellParams::new(hs[0], alpha, lame)?;
    if let Some(nq) = cfg.pick(a.nq, "nq")? {
        params = params.with_nq(nq)?;
    }
    let out = cfg.pick(a.out, "out")?;
    let inp = RecoveryInputs::new(
        src[0].field(&g, "v0")?,
        src[1].field(&g, "v")?,
        params,
        src[2].field(&g, "load")?,
    )?;
    let report = gamma_scan(&inp, &hs)?;
    for r in &report.rows {
        println!(
            "h={} ratio_I={} ratio_J={} target={} kh_err={} v_h_l2_gap={}",
            num(r.h),
            num(r.ratio_i),
            num(r.ratio_j),
            num(r.target),
            num(r.kh_err),
            num(r.v_h_l2_gap)
        );
    }
    let opt = |x: Option<f64>| x.map(num).unwrap_or_else(|| "none".into());
    println!("kh_exponent={}", opt(report.kh_exponent()));
    println!("gap_exponent={}", opt(report.gap_exponent()));
    println!("h_star={}", opt(report.h_star()));
    if let Some(p) = out {
        write_atomic(&p, &scan_table(&report).to_csv())?;
        println!("wrote={}", p.display());
    }
    Ok(())
}

fn convexity_cmd(cfg: &Config, a: ConvexityArgs) -> Result<(), Failure> {
    let src = sources(cfg, &[(a.u, "u", None)])?;
    let g = grid_from(cfg, &a.grid, Domain::Square)?;
    let eps = cfg.pick(a.eps, "eps")?;
    let (out, env_out) = (cfg.pick(a.out, "out")?, cfg.pick(a.envelope_out, "envelope_out")?);
    let u = src[0].field(&g, "u")?;
    let r = classify_convexity(&u, eps)?;
    println!("verdict={}", r.verdict);
    println!(
        "convex={} concave={} indeterminate={} singular={}",
        r.count(Label::Convex),
        r.count(Label::Concave),
        r.count(Label::Indeterminate),
        r.singular_count()
    );
    println!("eps={}", num(r.eps));
    if let Some(p) = out {
        write_atomic(&p, &convexity_table(&r).to_csv())?;
        println!("wrote={}", p.display());
    }
    if let Some(p) = env_out {
        write_fields(&p, &[&u, &convexify(&u)?])?;
        println!("wrote={}", p.display());
    }
    Ok(())
}

fn fixtures_sverak(cfg: &Config, a: FixtureArgs) -> Result<(), Failure> {
    let g = grid_from(cfg, &a.grid, Domain::Disk)?;
    let out = cfg.require(a.out, "out")?;
    write_fields(&out, &[&sverak_example(&g)])?;
    println!("wrote={}", out.display());
    Ok(())
}

fn energy_eval(cfg: &Config, a: EnergyArgs) -> Result<(), Failure> {
    let path: PathBuf = cfg.require(a.deformation, "deformation")?;
    if !path.is_file() {
        return Err(Failure::invalid(
            "missing_file",
            format!("deformation file {} not found", path.display()),
        ));
    }
    let mut list = vec![(a.v0, "v0", None), (a.load, "load", Some("0"))];
    let want_limit = a.v.is_some() || cfg.raw("v").is_some();
    if want_limit {
        list.push((a.v, "v", None));
    }
    let src = sources(cfg, &list)?;
    let h = cfg.require(a.h, "h")?;
    let alpha = alpha_from(cfg, a.alpha)?;
    let lame = lame_from(cfg, &a.material)?;
    let file = File::open(&path).map_err(|e| Failure::io(&path, e))?;
    let vh = read_deformation(&mut BufReader::new(file))?;
    let g = vh.grid().clone();
    let params = ShellParams::new(h, alpha, lame)?.with_nq(vh.nq())?;
    let v0 = src[0].field(&g, "v0")?;
    let load = src[1].field(&g, "load")?;
    let emb = shell_embedding(&v0, &params)?;
    let i = energy_3d_with(&vh, &emb)?;
    let j = total_energy_with(&vh, &emb, &load)?;
    let scale = params.energy_scale();
    println!("energy_I={}", num(i));
    println!("energy_J={}", num(j));
    println!("ratio_I={}", num(i / scale));
    println!("ratio_J={}", num(j / scale));
    println!("dist_so3={}", num(distance_to_rotations(&vh, &emb)?));
    if want_limit {
        println!(
            "target={}",
            num(limit_kirchhoff(&src[2].field(&g, "v")?, &v0, &load, &lame)?)
        );
    }
    Ok(())
}

fn set_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SSL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::invalid(
            "invalid_threads",
            format!("SSL_THREADS must be a positive integer, got `{raw}`"),
        )
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::invalid("invalid_threads", e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    set_threads()?;
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Ma {
            action: MaAction::Solve(a),
        } => ma_solve(&cfg, a),
        Command::Match {
            action: MatchAction::Run(a),
        } => match_run(&cfg, a),
        Command::Gamma {
            action: GammaAction::Scan(a),
        } => gamma_scan_cmd(&cfg, a),
        Command::Convexity {
            action: ConvexityAction::Analyze(a),
        } => convexity_cmd(&cfg, a),
        Command::Fixtures {
            action: FixturesAction::Sverak(a),
        } => fixtures_sverak(&cfg, a),
        Command::Energy {
            action: EnergyAction::Eval(a),
        } => energy_eval(&cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let detail = e.to_string();
            let detail = detail.lines().next().unwrap_or("").trim_start_matches("error: ");
            // malformed values are validation failures; unknown commands and flags are usage errors
            let f = match e.kind() {
                ErrorKind::InvalidValue | ErrorKind::ValueValidation => Failure::invalid("invalid_value", detail),
                _ => Failure::usage(detail),
            };
            eprintln!("{f}");
            return ExitCode::from(f.exit);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit)
        }
    }
}
