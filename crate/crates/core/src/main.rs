//! Command-line harness: experiment orchestration, scenario reproduction and
//! figure-data emission.
//!
//! Exit codes: 0 all checks passed, 1 an assertion (reproduction line or
//! dominance check) failed, 2 configuration error, 3 numerical failure.
//! Artifact writes are atomic (write to a temporary file in the target
//! directory, then rename), so a crashed run never leaves a half-written
//! artifact behind.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use aggstop::config::ExperimentConfig;
use aggstop::diffusion::DiffusionSpec;
use aggstop::equilibrium::{is_barrier_equilibrium, optimal_verdict, smallest_threshold};
use aggstop::error::SolverError;
use aggstop::examples::{self, fmt17};
use aggstop::mc::{estimate_hit_transform, estimate_j, McConfig, Scheme};
use aggstop::scalar::linspace;
use aggstop::valuation::Policy;

#[derive(Parser)]
#[command(name = "aggstop", about = "Equilibrium stopping under aggregated discounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a declared experiment config and write its artifacts.
    Run {
        config: PathBuf,
        /// Override the Monte Carlo seed declared in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the grid point counts declared in the config.
        #[arg(long)]
        grid_n: Option<usize>,
        /// Skip precondition checks; scan-based fallbacks where needed.
        #[arg(long)]
        force: bool,
    },
    /// Recompute a named scenario and compare against its expected table.
    Reproduce {
        /// Scenario id, or "all".
        example_id: String,
        #[arg(long, default_value_t = 201)]
        grid_n: usize,
    },
    /// Write figure data (CSV plus a sidecar schema file).
    EmitFigure {
        /// One of: regions, barrier-map-gbm, barrier-map-bessel.
        figure: String,
        out_path: PathBuf,
        #[arg(long, default_value_t = 201)]
        grid_n: usize,
    },
    /// Quick Monte Carlo cross-check of the closed-form transforms.
    OracleCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20_000)]
        paths: usize,
    },
    /// List the scenario ids known to `reproduce`.
    ListExamples,
}

fn exit_code(e: &SolverError) -> i32 {
    match e {
        SolverError::Numeric(_) | SolverError::Domain(_) => 3,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, seed, grid_n, force } => run(&config, seed, grid_n, force),
        Command::Reproduce { example_id, grid_n } => reproduce(&example_id, grid_n),
        Command::EmitFigure { figure, out_path, grid_n } => emit_figure(&figure, &out_path, grid_n),
        Command::OracleCheck { seed, paths } => oracle_check(seed, paths),
        Command::ListExamples => {
            for id in examples::EXAMPLE_IDS {
                println!("{id}");
            }
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => std::process::exit(0),
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

/// Write atomically: temp file in the destination directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<(), SolverError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::fs::write(tmp.path(), contents)?;
    tmp.persist(path).map_err(|e| SolverError::Io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SolverError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| SolverError::Numeric(format!("serialization failed: {e}")))?;
    write_atomic(path, &(text + "\n"))
}

fn run(
    config_path: &Path,
    seed: Option<u64>,
    grid_n: Option<usize>,
    force: bool,
) -> Result<bool, SolverError> {
    let mut cfg = ExperimentConfig::from_path(config_path)?;
    if let (Some(s), Some(mc)) = (seed, cfg.mc.as_mut()) {
        mc.seed = s;
    }
    if let Some(n) = grid_n {
        cfg.grids.x.n = n;
        cfg.grids.a.n = n;
    }
    let force = force || cfg.force;
    let ctx = cfg.build_context()?;
    let out = cfg.outputs.dir.clone();
    let x_grid = cfg.grids.x.to_vec();
    let mut all_pass = true;

    if cfg.outputs.artifacts.iter().any(|a| a == "conditions") {
        let r_grid = cfg.grids.r.to_vec();
        let report = ctx.model.check_model_conditions(&r_grid, &x_grid)?;
        let holds = report.cii_a_holds && report.cii_b_holds;
        write_json(&out.join("conditions.json"), &json!({
            "model_conditions_hold": holds,
            "violations_a": report.violations_a.len(),
            "violations_b": report.violations_b.len(),
        }))?;
        if !holds {
            all_pass = false;
        }
    }

    // threshold is the backbone of every downstream artifact
    let threshold = smallest_threshold(&ctx, force)?;
    if cfg.outputs.artifacts.iter().any(|a| a == "threshold") {
        write_json(&out.join("threshold.json"), &threshold)?;
    }
    let check = is_barrier_equilibrium(&ctx, threshold.a_star, &x_grid)?;
    if !check.holds {
        eprintln!(
            "assertion failed: [0, a*] is not an equilibrium on the grid (worst gap {} at x = {})",
            check.worst_gap, check.worst_x
        );
        all_pass = false;
    }

    if cfg.outputs.artifacts.iter().any(|a| a == "verdict") {
        let a_grid: Vec<f64> = linspace(threshold.a_star, ctx.strike, cfg.grids.a.n);
        let x_scan: Vec<f64> = linspace(threshold.a_star, *x_grid.last().unwrap(), cfg.grids.x.n);
        let report = optimal_verdict(&ctx, &x_scan, &a_grid)?;
        write_json(&out.join("verdict.json"), &report)?;
    }

    if cfg.outputs.artifacts.iter().any(|a| a == "barrier_map") {
        let a_grid: Vec<f64> = linspace(threshold.a_star, ctx.strike, cfg.grids.a.n);
        let x_scan: Vec<f64> = linspace(threshold.a_star, *x_grid.last().unwrap(), cfg.grids.x.n);
        let map = aggstop::equilibrium::optimal_barrier_map(&ctx, &x_scan, &a_grid)?;
        let mut csv = String::from("x,a_lo,a_hi,argmax,max_value\n");
        for row in &map {
            let lo = row.intervals.first().map(|i| i.0).unwrap_or(row.argmax);
            let hi = row.intervals.last().map(|i| i.1).unwrap_or(row.argmax);
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt17(row.x), fmt17(lo), fmt17(hi), fmt17(row.argmax), fmt17(row.max_value)
            ));
        }
        write_atomic(&out.join("barrier_map.csv"), &csv)?;
        write_atomic(
            &out.join("barrier_map.schema.txt"),
            "barrier_map.csv: one row per state x\n\
             x         state the maximizer scan is run from\n\
             a_lo      smallest maximizing barrier on the a-grid\n\
             a_hi      largest maximizing barrier on the a-grid\n\
             argmax    first barrier attaining the maximum value\n\
             max_value maximum of the barrier value over the a-grid\n",
        )?;
    }

    if cfg.outputs.artifacts.iter().any(|a| a == "mc_check") {
        let mc = cfg.mc_config()?.expect("validated: mc_check requires [mc]");
        let a = threshold.a_star;
        let x = 0.5 * (a + ctx.strike.max(a + 0.2));
        let policy = Policy::one_barrier(0.0, a)?;
        let est = estimate_j(&ctx, x, &policy, &mc)?;
        let cf = ctx.lambda(x, a)?;
        let tol = 3.5 * est.aggregated.std_error + est.aggregated.truncation_bound;
        let pass = (est.aggregated.mean - cf).abs() <= tol;
        write_json(&out.join("mc_check.json"), &json!({
            "x": x,
            "barrier": a,
            "closed_form": cf,
            "mc_mean": est.aggregated.mean,
            "mc_std_error": est.aggregated.std_error,
            "truncation_bound": est.aggregated.truncation_bound,
            "tolerance": tol,
            "pass": pass,
            "per_node": est.per_node,
        }))?;
        if !pass {
            eprintln!(
                "assertion failed: MC check off by {} (tolerance {tol})",
                (est.aggregated.mean - cf).abs()
            );
            all_pass = false;
        }
    }
    Ok(all_pass)
}

fn reproduce(example_id: &str, grid_n: usize) -> Result<bool, SolverError> {
    let ids: Vec<&str> = if example_id == "all" {
        examples::EXAMPLE_IDS.to_vec()
    } else {
        vec![example_id]
    };
    let mut all_pass = true;
    let mut records = Vec::new();
    for id in ids {
        let rec = examples::reproduce(id, grid_n)?;
        for line in &rec.lines {
            println!(
                "{} {} {}: expected {} computed {} (tol {})",
                if line.pass { "PASS" } else { "FAIL" },
                rec.example_id,
                line.check,
                line.expected,
                line.computed,
                line.tol
            );
        }
        all_pass &= rec.pass;
        records.push(rec);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&records)
            .map_err(|e| SolverError::Numeric(format!("serialization failed: {e}")))?
    );
    Ok(all_pass)
}

fn emit_figure(figure: &str, out_path: &Path, grid_n: usize) -> Result<bool, SolverError> {
    let n = grid_n.max(11);
    let (csv, schema) = match figure {
        "regions" => {
            let a_grid = linspace(0.55, 0.85, n);
            let x_grid = linspace(0.5, 1.1, n);
            let mut csv = String::from("a,x,region\n");
            for (a, x, label) in examples::region_rows(&a_grid, &x_grid) {
                csv.push_str(&format!("{},{},{label}\n", fmt17(a), fmt17(x)));
            }
            (
                csv,
                "regions figure: piecewise branch of the capped two-exponent GBM barrier value\n\
                 a      candidate barrier\n\
                 x      state\n\
                 region red (x < a), blue (hit values uncapped), green (one value capped),\n\
                        yellow (both values capped)\n",
            )
        }
        "barrier-map-gbm" | "barrier-map-bessel" => {
            let id = if figure == "barrier-map-gbm" {
                "gbm-cap-ex3"
            } else {
                "bessel-cap-ex2"
            };
            let rows = examples::barrier_map_rows(id, n)?;
            let mut csv = String::from("x,a_lo,a_hi,argmax,max_value\n");
            for (x, lo, hi, argmax, max_value) in rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt17(x), fmt17(lo), fmt17(hi), fmt17(argmax), fmt17(max_value)
                ));
            }
            (
                csv,
                "barrier map figure: maximizing barriers per state for the scenario\n\
                 x         state\n\
                 a_lo,a_hi extremes of the maximizer plateau on the a-grid\n\
                 argmax    first maximizing barrier\n\
                 max_value maximum barrier value\n",
            )
        }
        other => {
            return Err(SolverError::Argument(format!(
                "unknown figure {other:?}; known: regions, barrier-map-gbm, barrier-map-bessel"
            )))
        }
    };
    write_atomic(out_path, &csv)?;
    write_atomic(&out_path.with_extension("schema.txt"), schema)?;
    Ok(true)
}

fn oracle_check(seed: u64, paths: usize) -> Result<bool, SolverError> {
    #[derive(Serialize)]
    struct Line {
        model: &'static str,
        r: f64,
        x: f64,
        a: f64,
        closed_form: f64,
        mc_mean: f64,
        std_error: f64,
        truncation_bound: f64,
        z: f64,
        pass: bool,
    }
    let battery: [(&'static str, f64, f64, f64, f64, f64); 3] = [
        // (model, r, x, a, dt, horizon)
        ("gbm", 0.5, 1.0, 0.8, 5e-4, 20.0),
        ("gbm", 1.0, 1.0, 0.8, 5e-4, 15.0),
        ("bessel", 0.5, 1.0, 0.5, 5e-4, 20.0),
    ];
    let mut all_pass = true;
    let mut lines = Vec::new();
    for (model_name, r, x, a, dt, horizon) in battery {
        let (model, scheme) = match model_name {
            "gbm" => (DiffusionSpec::gbm(0.05, 0.2)?, Scheme::ExactGbmIncrement),
            _ => (DiffusionSpec::bessel(0.5)?, Scheme::ExactBessel3),
        };
        let cfg = McConfig::new(paths, dt, horizon, seed, scheme)?;
        let est = estimate_hit_transform(&model, r, x, a, &cfg)?;
        let cf = model.hit_transform(r, x, a)?.value;
        let z = if est.std_error > 0.0 {
            (est.mean - cf) / est.std_error
        } else {
            0.0
        };
        let pass = (est.mean - cf).abs() <= 3.5 * est.std_error + est.truncation_bound;
        all_pass &= pass;
        lines.push(Line {
            model: model_name,
            r,
            x,
            a,
            closed_form: cf,
            mc_mean: est.mean,
            std_error: est.std_error,
            truncation_bound: est.truncation_bound,
            z,
            pass,
        });
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&lines)
            .map_err(|e| SolverError::Numeric(format!("serialization failed: {e}")))?
    );
    Ok(all_pass)
}
