//! Run drivers: the four operating modes behind the command-line interface.
//!
//! Every artifact-producing mode writes its manifest before any computation,
//! so a crashed or interrupted run still leaves a full record of what was
//! asked for; artifacts follow, written by a single writer in trajectory
//! order. Stochastic work is deterministic in (seed, trajectory index): each
//! trajectory consumes its own counter-mode RNG stream, so output bytes do
//! not depend on the worker-thread count or on scheduling.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::besov::{para_gt, para_lt, partition_residual, resonance};
use crate::config::{ConfigDoc, Mode, RunConfig};
use crate::cutoff::{apply_pn, default_grid, heat_semigroup, Profile};
use crate::enhancement::{draw_noise, init_enhanced, EnhancedState};
use crate::error::{Error, Result};
use crate::estimators::{
    compute_report, mean_se, tightness_report, EstimatorReport, TrajectorySample,
    MIN_TIGHTNESS_ENSEMBLE, ZS_NAMES,
};
use crate::io::{
    fmt_csv_float, write_atomic, write_csv, write_field_snapshot, write_manifest,
};
use crate::renorm::{metropolis_mun, sample_mu0, ModelParams, RenormConstants, PCN_BETA};
use crate::solver::{step_coupled, SqeState};
use crate::spectral::{forward_transform, inverse_transform, k_sq, lp_norm, mul_auto, FourierField};

/// Exit code for a failed run: 2 for configuration or data-format problems,
/// 3 for numerical blow-up, 1 for runtime faults (I/O, desynchronized state).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::GridTooCoarse { .. }
        | Error::GridMismatch { .. }
        | Error::InsufficientResolution { .. }
        | Error::AliasUnsafe { .. }
        | Error::BudgetExceeded { .. }
        | Error::InsufficientSnapshots { .. }
        | Error::SnapshotFormat(_) => 2,
        Error::BlowUp { .. } => 3,
        Error::StaleHistory { .. } | Error::Io(_) => 1,
    }
}

/// Exit code when `selfcheck` finds a failing invariant.
pub const EXIT_SELFCHECK: i32 = 4;

/// Worker-thread cap: the `PHI4_THREADS` environment variable when set (a
/// positive integer), otherwise the machine's available parallelism.
pub fn worker_threads() -> Result<usize> {
    match std::env::var("PHI4_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::Config(format!(
                    "PHI4_THREADS must be a positive integer, got {s:?}"
                ))
            }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// What a completed run reports back to the caller.
#[derive(Debug)]
pub struct RunOutcome {
    /// Human-readable report lines, one per check or summary item.
    pub lines: Vec<String>,
    /// Number of failed invariants (0 outside selfcheck mode).
    pub failed_checks: usize,
}

/// Runs a validated configuration with the worker-thread cap taken from the
/// environment.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    run_with(config, worker_threads()?)
}

/// Runs a validated configuration on a private pool of `threads` workers.
pub fn run_with(config: &RunConfig, threads: usize) -> Result<RunOutcome> {
    config.validate()?;
    if threads < 1 {
        return Err(Error::Config(format!(
            "thread count must be >= 1, got {threads}"
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build a {threads}-thread pool: {e}")))?;
    pool.install(|| match config.mode {
        Mode::Selfcheck => selfcheck_outcome(),
        Mode::RenormTable => renorm_table_run(config, threads),
        Mode::Simulate => simulate_run(config, threads),
        Mode::TightnessReport => tightness_run(config, threads),
    })
}

// ---------------------------------------------------------------------------
// Selfcheck

/// One audited invariant: its measured worst-case violation and tolerance.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
}

impl CheckLine {
    pub fn pass(&self) -> bool {
        self.worst <= self.tol
    }
}

fn add_assign(acc: &mut FourierField, rhs: &FourierField) {
    for (a, b) in acc.coeff_mut().iter_mut().zip(rhs.coeff()) {
        *a += b;
    }
}

fn rel_l2(a: &FourierField, b: &FourierField) -> f64 {
    let diff: f64 = a
        .coeff()
        .iter()
        .zip(b.coeff())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    diff.sqrt() / b.l2_norm().max(f64::MIN_POSITIVE)
}

/// Fast internal-consistency audit of the numerical core; every check has a
/// strict tolerance and the whole battery runs in seconds.
pub fn selfcheck() -> Result<Vec<CheckLine>> {
    let mut checks = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(0x5e1f_c0de);

    // The dyadic partition sums to 1 everywhere the grid can reach.
    checks.push(CheckLine {
        name: "dyadic partition of unity",
        worst: partition_residual(default_grid(3), 2000),
        tol: 1e-10,
    });

    // The paraproduct trisection reassembles the alias-free product.
    let grid = default_grid(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f = sample_mu0(grid, 1.0, &mut rng);
        let g = sample_mu0(grid, 1.0, &mut rng);
        let mut sum = para_lt(&f, &g)?;
        add_assign(&mut sum, &para_gt(&f, &g)?);
        add_assign(&mut sum, &resonance(&f, &g)?);
        worst = worst.max(rel_l2(&sum, &mul_auto(&f, &g)));
    }
    checks.push(CheckLine {
        name: "paraproduct trisection",
        worst,
        tol: 1e-10,
    });

    // The heat propagator is exact per mode: e^{-t(|k|^2 + m0^2)}.
    let m0 = 1.0;
    let mut worst = 0.0f64;
    for &k in &[
        [0i64, 0, 0],
        [1, 0, 0],
        [2, -1, 0],
        [3, 2, 1],
        [-4, 0, 2],
        [8, -8, 8],
    ] {
        for &t in &[0.05, 0.3, 1.0] {
            let mut e_k = FourierField::zero(grid);
            e_k.set(k, Complex64::new(1.0, 0.0));
            let out = heat_semigroup(&e_k, t, m0);
            let expected = (-t * (k_sq(k) + m0 * m0)).exp();
            for (c, kk) in out.coeff().iter().zip(grid.iter_modes()) {
                let want = if kk == k { expected } else { 0.0 };
                worst = worst.max((c - want).norm());
            }
        }
    }
    checks.push(CheckLine {
        name: "heat propagator per mode",
        worst,
        tol: 1e-14,
    });

    // Coefficient l2 equals the physical L2 norm (orthonormal modes).
    let f = sample_mu0(grid, 1.0, &mut rng);
    let u = inverse_transform(&f);
    checks.push(CheckLine {
        name: "Parseval identity",
        worst: (lp_norm(&u, 2.0) - f.l2_norm()).abs() / f.l2_norm(),
        tol: 1e-10,
    });

    // The transform round-trip reproduces band-limited coefficients.
    checks.push(CheckLine {
        name: "transform round-trip",
        worst: rel_l2(&forward_transform(&u), &f),
        tol: 1e-12,
    });

    // The outer cutoff leaves the inner cutoff's range pointwise fixed.
    let p1 = apply_pn(&f, 1, Profile::Smooth1)?;
    let p21 = apply_pn(&p1, 1, Profile::Ramp2)?;
    let worst = p1
        .coeff()
        .iter()
        .zip(p21.coeff())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    checks.push(CheckLine {
        name: "nested cutoff projection",
        worst,
        tol: 0.0,
    });

    Ok(checks)
}

fn selfcheck_outcome() -> Result<RunOutcome> {
    let checks = selfcheck()?;
    let mut lines = Vec::new();
    let mut failed = 0;
    for c in &checks {
        let status = if c.pass() { "PASS" } else { "FAIL" };
        lines.push(format!(
            "selfcheck {:<28} worst {:9.3e}  tol {:7.1e}  {status}",
            c.name, c.worst, c.tol
        ));
        if !c.pass() {
            failed += 1;
        }
    }
    lines.push(if failed == 0 {
        format!("selfcheck: all {} checks passed", checks.len())
    } else {
        format!("selfcheck: {failed} of {} checks FAILED", checks.len())
    });
    Ok(RunOutcome {
        lines,
        failed_checks: failed,
    })
}

// ---------------------------------------------------------------------------
// Renormalization table

/// One row of the renormalization-constant table with its convergence
/// diagnostics: the linear constant doubles per level, the logarithmic one
/// grows by near-constant increments.
#[derive(Debug, Clone)]
pub struct RenormRow {
    pub n: u32,
    pub c1: f64,
    pub c2: f64,
    pub c1_ratio: Option<f64>,
    pub c2_increment: Option<f64>,
}

/// Renormalization constants for cutoff orders `0..=n_max` at mass `m0`.
pub fn renorm_rows(n_max: u32, m0: f64) -> Result<Vec<RenormRow>> {
    let mut rows: Vec<RenormRow> = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let c = RenormConstants::compute(n, m0)?;
        let (c1_ratio, c2_increment) = match rows.last() {
            Some(prev) => (Some(c.c1 / prev.c1), Some(c.c2 - prev.c2)),
            None => (None, None),
        };
        rows.push(RenormRow {
            n,
            c1: c.c1,
            c2: c.c2,
            c1_ratio,
            c2_increment,
        });
    }
    Ok(rows)
}

fn renorm_table_run(config: &RunConfig, threads: usize) -> Result<RunOutcome> {
    let out_dir = config.output_dir.as_path();
    fs::create_dir_all(out_dir)?;
    write_manifest(
        &out_dir.join("manifest.json"),
        &manifest_json(config, threads, json!(null)),
    )?;
    let rows = renorm_rows(config.params.n, config.params.m0)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_csv_float(r.c1),
                r.c1_ratio.map(fmt_csv_float).unwrap_or_default(),
                fmt_csv_float(r.c2),
                r.c2_increment.map(fmt_csv_float).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("renorm_table.csv"),
        &["n", "c1", "c1_ratio", "c2", "c2_increment"],
        &csv_rows,
    )?;
    let mut lines = vec![format!(
        "renorm-table: wrote {} rows to {}",
        rows.len(),
        out_dir.join("renorm_table.csv").display()
    )];
    for r in &rows {
        lines.push(format!(
            "n = {}: c1 = {:.9e} (ratio {}), c2 = {:.9e} (increment {})",
            r.n,
            r.c1,
            r.c1_ratio
                .map_or_else(|| "-".to_string(), |v| format!("{v:.4}")),
            r.c2,
            r.c2_increment
                .map_or_else(|| "-".to_string(), |v| format!("{v:.6e}")),
        ));
    }
    Ok(RunOutcome {
        lines,
        failed_checks: 0,
    })
}

// ---------------------------------------------------------------------------
// Trajectory worker

/// One complete trajectory of the coupled system: a stationary enhancement
/// with realized convolution history, an equilibrated initial field, a joint
/// burn-in on shared noise, then the measured window [0, T].
pub struct Trajectory {
    pub index: usize,
    pub pcn_acceptance: f64,
    /// The full field at the start of the measured window.
    pub x0: FourierField,
    /// The full field at the end of the measured window.
    pub x_final: FourierField,
    /// Snapshots at the initial step, every `snapshot_every` steps, and the
    /// final step.
    pub samples: Vec<TrajectorySample>,
    pub enhanced_first: EnhancedState,
    pub enhanced_last: EnhancedState,
    /// Full fields at snapshot times; kept only when requested.
    pub fields: Vec<(f64, FourierField)>,
}

fn steps_for(horizon: f64, dt: f64) -> u64 {
    if horizon <= 0.0 {
        0
    } else {
        (horizon / dt).round().max(1.0) as u64
    }
}

/// Runs trajectory `index` of the ensemble. Each trajectory owns RNG stream
/// `index` under the configured seed, so results are independent of worker
/// scheduling; `keep_fields` retains full-field snapshots for serialization.
pub fn run_trajectory(
    config: &RunConfig,
    consts: &RenormConstants,
    index: usize,
    keep_fields: bool,
) -> Result<Trajectory> {
    let params = config.params;
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64);

    // Stationary enhancement: history realized by an explicit noise burn-in.
    let mut enhanced = init_enhanced(&params, consts, config.burn_in_t, params.dt, &mut rng)?;

    // Equilibrated initial field from the cutoff measure.
    let (x_init, stats) = metropolis_mun(&params, consts, config.pcn_steps, PCN_BETA, &mut rng)?;

    // Joint burn-in: field and enhancement advance on shared noise, so the
    // remainder history entering the measured window is the one this field
    // actually experienced.
    let mut state = SqeState::new(x_init, &enhanced, params, *consts)?;
    for _ in 0..steps_for(config.burn_in_t, params.dt) {
        let dw = draw_noise(params.grid, params.dt, &mut rng);
        state = step_coupled(&state, &mut enhanced, &dw)?;
    }

    // Relabel the burn-in end as t = 0. The dynamics see time only through
    // increments, so the shift is exact; rebuilding the state re-anchors the
    // low/high split and the remainder history at the new origin.
    enhanced.t = 0.0;
    let mut state = SqeState::new(state.xtilde, &enhanced, params, *consts)?;

    let steps = steps_for(params.t_final, params.dt);
    let x0 = state.xtilde.clone();
    let enhanced_first = enhanced.clone();
    let mut samples = vec![TrajectorySample::capture(&state, &enhanced)?];
    let mut fields = Vec::new();
    if keep_fields {
        fields.push((state.t, state.xtilde.clone()));
    }
    for step in 1..=steps {
        let dw = draw_noise(params.grid, params.dt, &mut rng);
        state = step_coupled(&state, &mut enhanced, &dw)?;
        if step % config.snapshot_every as u64 == 0 || step == steps {
            samples.push(TrajectorySample::capture(&state, &enhanced)?);
            if keep_fields {
                fields.push((state.t, state.xtilde.clone()));
            }
        }
    }
    Ok(Trajectory {
        index,
        pcn_acceptance: stats.acceptance_rate(),
        x0,
        x_final: state.xtilde.clone(),
        samples,
        enhanced_first,
        enhanced_last: enhanced,
        fields,
    })
}

// ---------------------------------------------------------------------------
// Simulate

fn simulate_run(config: &RunConfig, threads: usize) -> Result<RunOutcome> {
    let params = config.params;
    let consts = RenormConstants::compute(params.n, params.m0)?;
    let out_dir = config.output_dir.as_path();
    fs::create_dir_all(out_dir)?;
    let fields_dir = out_dir.join("fields");
    fs::create_dir_all(&fields_dir)?;
    write_manifest(
        &out_dir.join("manifest.json"),
        &manifest_json(config, threads, json!({ "c1": consts.c1, "c2": consts.c2 })),
    )?;

    let trajectories = (0..config.ensemble)
        .into_par_iter()
        .map(|i| run_trajectory(config, &consts, i, true))
        .collect::<Result<Vec<Trajectory>>>()?;

    // Single writer, trajectory order.
    let mut summary_rows = Vec::with_capacity(trajectories.len());
    for traj in &trajectories {
        write_trajectory_series(out_dir, traj)?;
        for (j, (t, f)) in traj.fields.iter().enumerate() {
            let path = fields_dir.join(format!("traj{:03}_snap{:03}.phi4", traj.index, j));
            write_field_snapshot(&path, f, params.m0, *t)?;
        }
        summary_rows.push(vec![
            traj.index.to_string(),
            fmt_csv_float(traj.pcn_acceptance),
            fmt_csv_float(traj.x0.l2_norm()),
            fmt_csv_float(traj.x_final.l2_norm()),
        ]);
    }
    write_csv(
        &out_dir.join("summary.csv"),
        &["trajectory", "pcn_acceptance", "l2_initial", "l2_final"],
        &summary_rows,
    )?;

    let mean_acc = trajectories.iter().map(|t| t.pcn_acceptance).sum::<f64>()
        / trajectories.len() as f64;
    let snaps = trajectories.first().map_or(0, |t| t.fields.len());
    Ok(RunOutcome {
        lines: vec![
            format!(
                "simulate: {} trajectories, {snaps} snapshots each, written to {}",
                trajectories.len(),
                out_dir.display()
            ),
            format!("simulate: mean initial-sampler acceptance {mean_acc:.3}"),
        ],
        failed_checks: 0,
    })
}

fn write_trajectory_series(out_dir: &Path, traj: &Trajectory) -> Result<()> {
    debug_assert_eq!(traj.fields.len(), traj.samples.len());
    let rows: Vec<Vec<String>> = traj
        .samples
        .iter()
        .zip(&traj.fields)
        .map(|(s, (t, full))| {
            vec![
                fmt_csv_float(*t),
                fmt_csv_float(full.l2_norm()),
                fmt_csv_float(s.x2.l2_norm()),
                fmt_csv_float(s.xlt.l2_norm()),
                fmt_csv_float(s.xgeq.l2_norm()),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join(format!("traj{:03}.csv", traj.index)),
        &["t", "l2_full", "l2_second", "l2_low", "l2_high"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// Uniformity (tightness) report

fn tightness_run(config: &RunConfig, threads: usize) -> Result<RunOutcome> {
    let base = config.params;
    if base.n < 1 {
        return Err(Error::Config(format!(
            "uniformity report needs at least 2 cutoff levels; set n >= 1 (got n = {})",
            base.n
        )));
    }
    if config.ensemble < MIN_TIGHTNESS_ENSEMBLE {
        return Err(Error::Config(format!(
            "uniformity report needs an ensemble of at least {MIN_TIGHTNESS_ENSEMBLE} \
             per level, got {}",
            config.ensemble
        )));
    }

    // Constants for every level up front, so the manifest records them.
    let mut levels = Vec::with_capacity(base.n as usize + 1);
    for n in 0..=base.n {
        levels.push(RenormConstants::compute(n, base.m0)?);
    }
    let out_dir = config.output_dir.as_path();
    fs::create_dir_all(out_dir)?;
    let level_values: Vec<serde_json::Value> = levels
        .iter()
        .map(|c| json!({ "n": c.n, "c1": c.c1, "c2": c.c2 }))
        .collect();
    write_manifest(
        &out_dir.join("manifest.json"),
        &manifest_json(config, threads, json!(level_values)),
    )?;

    let mut per_n = Vec::with_capacity(levels.len());
    for consts in &levels {
        let n = consts.n;
        // Levels differ only in the cutoff order: grid and seed follow it.
        let level_config = RunConfig {
            params: ModelParams {
                n,
                grid: default_grid(n),
                seed: base.seed + n as u64,
                ..base
            },
            ..config.clone()
        };
        let reports = (0..config.ensemble)
            .into_par_iter()
            .map(|i| {
                let traj = run_trajectory(&level_config, consts, i, false)?;
                let enhanced = [traj.enhanced_first, traj.enhanced_last];
                compute_report(
                    &traj.samples,
                    &enhanced,
                    &traj.x0,
                    &config.exponents,
                    &level_config.params,
                    config.ensemble,
                )
            })
            .collect::<Result<Vec<EstimatorReport>>>()?;
        per_n.push((n, reports));
    }

    let report = tightness_report(&per_n, config.growth_factor)?;

    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.quantity.to_string(),
                fmt_csv_float(r.mean),
                fmt_csv_float(r.std_err),
                r.ensemble.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("tightness.csv"),
        &["n", "quantity", "mean", "std_err", "ensemble"],
        &rows,
    )?;

    // Ensemble means of the enhancement sup-norms, per level.
    let mut zs_rows = Vec::new();
    for (n, reports) in &per_n {
        for (idx, name) in ZS_NAMES.iter().enumerate() {
            let vals: Vec<f64> = reports.iter().map(|r| r.zs_sups[idx].1).collect();
            let (mean, se) = mean_se(&vals);
            zs_rows.push(vec![
                n.to_string(),
                name.to_string(),
                fmt_csv_float(mean),
                fmt_csv_float(se),
            ]);
        }
    }
    write_csv(
        &out_dir.join("zs_sups.csv"),
        &["n", "quantity", "mean", "std_err"],
        &zs_rows,
    )?;

    // Red flags, possibly none; always written so consumers need no stat.
    let flag_text = if report.red_flags.is_empty() {
        String::new()
    } else {
        report.red_flags.join("\n") + "\n"
    };
    write_atomic(&out_dir.join("red_flags.txt"), flag_text.as_bytes())?;

    let mut lines = vec![format!(
        "tightness: {} levels x {} trajectories, tables written to {}",
        per_n.len(),
        config.ensemble,
        out_dir.display()
    )];
    if report.red_flags.is_empty() {
        lines.push(format!(
            "tightness: PASS - no quantity grows monotonically by more than {:.1}x across levels",
            report.growth_factor
        ));
    } else {
        for f in &report.red_flags {
            lines.push(format!("tightness RED FLAG: {f}"));
        }
    }
    Ok(RunOutcome {
        lines,
        failed_checks: 0,
    })
}

// ---------------------------------------------------------------------------
// Manifest

fn manifest_json(config: &RunConfig, threads: usize, constants: serde_json::Value) -> serde_json::Value {
    json!({
        "format": "phi4-run-manifest",
        "format_version": 1,
        "generator": concat!("phi4 ", env!("CARGO_PKG_VERSION")),
        "mode": config.mode.as_str(),
        "threads": threads,
        "config": serde_json::to_value(ConfigDoc::from_config(config))
            .expect("a validated config serializes"),
        "grid": { "k_max": config.params.grid.k_max(), "m": config.params.grid.m() },
        "renorm_constants": constants,
        "rng": {
            "algorithm": "ChaCha12",
            "seed": config.params.seed,
            "streams": "one stream per trajectory index; uniformity levels offset the seed by n",
        },
    })
}
