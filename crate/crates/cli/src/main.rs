//! `gpsh`: batch frontend for classifying forms, checking boundaries, solving
//! lattice Dirichlet problems, computing hulls and running reproductions.
//!
//! Exit codes: 0 success (in P, PASS, no violations), 1 negative verdict, 2 error.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use gpsh_core::GrassmannSet;
use clap::{Args, Parser, Subcommand};

use config::{check_schedule, parse_domain, parse_json_arg, parse_points, parse_step, parse_vector, RunConfig};
use output::{manifest, Output};

#[derive(Parser, Debug)]
#[command(name = "gpsh", version, about = "Geometric plurisubharmonicity toolkit")]
struct Cli {
    /// Random seed for sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Solver tolerance in value units.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// TOML config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GArg {
    /// Grassmannian subset as inline JSON or a JSON file, e.g. '{"variant":"full","n":2,"p":1}'.
    #[arg(long)]
    g: Option<String>,
}

#[derive(Args, Debug, Default)]
struct LatticeArgs {
    /// Lattice step, e.g. 1/32.
    #[arg(long, value_parser = parse_step)]
    h: Option<f64>,
    /// Stencil radius (1..=3).
    #[arg(long)]
    radius: Option<usize>,
    /// Lower box corner, comma separated.
    #[arg(long, value_parser = vector, allow_hyphen_values = true)]
    lo: Option<Vector>,
    /// Upper box corner, comma separated.
    #[arg(long, value_parser = vector, allow_hyphen_values = true)]
    hi: Option<Vector>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// sgs (symmetric Gauss-Seidel) or jacobi.
    #[arg(long)]
    schedule: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify a symmetric matrix (CSV) against P(G).
    Classify {
        #[command(flatten)]
        g: GArg,
        #[arg(long)]
        matrix: Option<String>,
        /// Base point for fiber-field sets.
        #[arg(long, value_parser = vector, allow_hyphen_values = true)]
        point: Option<Vector>,
    },
    /// Solve the lattice Dirichlet problem for the G-harmonic equation.
    Solve {
        #[command(flatten)]
        g: GArg,
        #[command(flatten)]
        lattice: LatticeArgs,
        /// saddle | xsq | abs | custom-csv
        #[arg(long)]
        boundary: Option<String>,
        /// CSV "x..,value" for custom-csv boundary data.
        #[arg(long)]
        boundary_file: Option<String>,
    },
    /// Largest discrete G-psh function below an obstacle.
    Envelope {
        #[command(flatten)]
        g: GArg,
        #[command(flatten)]
        lattice: LatticeArgs,
        /// saddle | xsq | abs | double-well | custom-csv
        #[arg(long)]
        obstacle: Option<String>,
        #[arg(long)]
        obstacle_file: Option<String>,
    },
    /// Discrete G-convex hull of a point set.
    Hull {
        #[command(flatten)]
        g: GArg,
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Points "x,y;x,y;..." snapped to the lattice.
        #[arg(long, value_parser = points, allow_hyphen_values = true)]
        points: Option<Points>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Per-point boundary G-convexity of a builtin domain.
    Boundary {
        #[command(flatten)]
        g: GArg,
        /// ball | ellipse | hyperboloid | halfspace | annulus | crescent513, or JSON like '{"builtin":"ball","dim":3}'.
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        grid_h: Option<f64>,
        #[arg(long)]
        strict_eta: Option<f64>,
    },
    /// Span of the projections of G and whether G involves all variables.
    Span {
        #[command(flatten)]
        g: GArg,
        #[arg(long, value_parser = vector, allow_hyphen_values = true)]
        point: Option<Vector>,
    },
    /// Free dimension of G with a certificate subspace.
    Freedim {
        #[command(flatten)]
        g: GArg,
    },
    /// Run a named reproduction scenario.
    Repro {
        /// ex2.3 | ex5.13 | ex6.6 | ex8.6 | appA-nonclosed | remark5.10
        name: String,
    },
    /// Discrete maximum principle on random dually G-psh functions.
    MpCheck {
        #[command(flatten)]
        g: GArg,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Clone, Debug)]
struct Vector(Vec<f64>);

#[derive(Clone, Debug)]
struct Points(Vec<Vec<f64>>);

fn vector(s: &str) -> std::result::Result<Vector, String> {
    parse_vector(s).map(Vector)
}

fn points(s: &str) -> std::result::Result<Points, String> {
    parse_points(s).map(Points)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_g(cfg: &mut RunConfig, g: GArg) -> Result<()> {
    if let Some(text) = g.g {
        cfg.g = Some(parse_json_arg::<serde_json::Value>(&text, &mut cfg.inputs)?);
    }
    Ok(())
}

fn apply_lattice(cfg: &mut RunConfig, l: LatticeArgs) -> Result<()> {
    set(&mut cfg.lattice.h, l.h);
    set(&mut cfg.lattice.radius, l.radius);
    set_opt(&mut cfg.lattice.lo, l.lo.map(|v| v.0));
    set_opt(&mut cfg.lattice.hi, l.hi.map(|v| v.0));
    set(&mut cfg.max_sweeps, l.max_sweeps);
    set(&mut cfg.schedule, l.schedule);
    check_schedule(&cfg.schedule)
}

fn resolve(cli: Cli, cfg: &mut RunConfig) -> Result<()> {
    if let Some(path) = &cli.config {
        *cfg = RunConfig::load(path)?;
        cfg.inputs.push(path.display().to_string());
    }
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.tol, cli.tol);
    if let Some(out) = cli.out {
        cfg.out = out.display().to_string();
    }
    match cli.command {
        Command::Classify { g, matrix, point } => {
            cfg.command = "classify".into();
            apply_g(cfg, g)?;
            set_opt(&mut cfg.matrix, matrix);
            set_opt(&mut cfg.point, point.map(|v| v.0));
            if let Some(m) = &cfg.matrix {
                cfg.inputs.push(m.clone());
            }
        }
        Command::Solve { g, lattice, boundary, boundary_file } => {
            cfg.command = "solve".into();
            apply_g(cfg, g)?;
            apply_lattice(cfg, lattice)?;
            set_opt(&mut cfg.boundary, boundary);
            set_opt(&mut cfg.boundary_file, boundary_file);
            if let Some(f) = &cfg.boundary_file {
                cfg.inputs.push(f.clone());
            }
        }
        Command::Envelope { g, lattice, obstacle, obstacle_file } => {
            cfg.command = "envelope".into();
            apply_g(cfg, g)?;
            apply_lattice(cfg, lattice)?;
            set_opt(&mut cfg.obstacle, obstacle);
            set_opt(&mut cfg.obstacle_file, obstacle_file);
            if let Some(f) = &cfg.obstacle_file {
                cfg.inputs.push(f.clone());
            }
        }
        Command::Hull { g, lattice, points, threshold } => {
            cfg.command = "hull".into();
            apply_g(cfg, g)?;
            apply_lattice(cfg, lattice)?;
            set_opt(&mut cfg.hull_points, points.map(|p| p.0));
            set(&mut cfg.threshold, threshold);
        }
        Command::Boundary { g, domain, grid_h, strict_eta } => {
            cfg.command = "boundary".into();
            apply_g(cfg, g)?;
            if let Some(d) = domain {
                cfg.domain = Some(parse_domain(&d, &mut cfg.inputs)?);
            }
            set(&mut cfg.grid_h, grid_h);
            set(&mut cfg.strict_eta, strict_eta);
        }
        Command::Span { g, point } => {
            cfg.command = "span".into();
            apply_g(cfg, g)?;
            set_opt(&mut cfg.point, point.map(|v| v.0));
        }
        Command::Freedim { g } => {
            cfg.command = "freedim".into();
            apply_g(cfg, g)?;
        }
        Command::Repro { name } => {
            cfg.command = "repro".into();
            cfg.name = Some(name);
        }
        Command::MpCheck { g, lattice, trials } => {
            cfg.command = "mp-check".into();
            apply_g(cfg, g)?;
            apply_lattice(cfg, lattice)?;
            set(&mut cfg.trials, trials);
        }
    }
    if let Some(v) = cfg.g.take() {
        let g: GrassmannSet = serde_json::from_value(v.clone()).with_context(|| format!("invalid Grassmannian {v}"))?;
        cfg.g = Some(serde_json::to_value(g.with_seed(cfg.seed))?);
    }
    Ok(())
}

fn dispatch(cfg: &RunConfig, out: &mut Output) -> Result<commands::Outcome> {
    match cfg.command.as_str() {
        "classify" => commands::cmd_classify(cfg, out),
        "solve" => commands::cmd_solve(cfg, out),
        "envelope" => commands::cmd_envelope(cfg, out),
        "hull" => commands::cmd_hull(cfg, out),
        "boundary" => commands::cmd_boundary(cfg, out),
        "span" => commands::cmd_span(cfg, out),
        "freedim" => commands::cmd_freedim(cfg, out),
        "repro" => commands::cmd_repro(cfg, out),
        "mp-check" => commands::cmd_mp_check(cfg, out),
        other => anyhow::bail!("unknown command '{other}'"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let fallback_out = cli.out.clone();
    let mut cfg = RunConfig::default();
    let resolved = resolve(cli, &mut cfg);
    if let Some(out) = fallback_out {
        cfg.out = out.display().to_string();
    }
    let mut out = match Output::new(PathBuf::from(&cfg.out).as_path()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = resolved.and_then(|_| dispatch(&cfg, &mut out));
    let (code, err) = match result {
        Ok((code, summary)) => {
            let text = serde_json::to_string_pretty(&summary).unwrap_or_default();
            let _ = writeln!(std::io::stdout(), "{text}");
            (code, None)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            (2, Some(format!("{e:#}")))
        }
    };
    let mut files = out.files().to_vec();
    files.push("manifest.json".into());
    let m = manifest(&cfg, &files, code, err);
    if let Err(e) = out.write_json("manifest.json", &m) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::from(code as u8)
}
