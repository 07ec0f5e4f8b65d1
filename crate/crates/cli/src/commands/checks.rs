use std::io::Write;

use bartgp::accuracy::{run_accuracy_sweep, SweepConfig, SweepRow};
use bartgp::grid::{build_grid, AxisWeights, GridStrategy, SplitGrid};
use bartgp::treeprior::{covariance_check, CovarianceCheckConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{json_document, schedule, write_csv_comment, write_json};
use crate::args::{AccuracyArgs, CheckPriorArgs};
use crate::data::{read_table_path, Encoding};
use crate::error::{usage, CliError, Result};

pub fn check_prior(a: &CheckPriorArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let sched = schedule(&a.schedule)?;
    let (x, grid) = match &a.input {
        Some(path) => {
            let table = read_table_path(path)?;
            let (x, _) = Encoding::infer(&table, None)?.apply(&table)?;
            let grid = build_grid(&x, GridStrategy::Midpoints)?;
            (x, grid)
        }
        None => {
            if a.n_points == 0 || a.p == 0 || a.splits == 0 {
                return Err(usage("need --n-points, --p and --splits >= 1"));
            }
            // a stream the tree sampler never uses
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX);
            let x = DMatrix::from_fn(a.n_points, a.p, |_, _| rng.gen::<f64>());
            (x, SplitGrid::unit_uniform(a.p, a.splits))
        }
    };
    let cfg = CovarianceCheckConfig { n_samples: a.samples, m_trees: a.trees, seed, total_var: 1.0, level: a.level };
    let report = covariance_check(&x, &grid, &sched, &AxisWeights::uniform(grid.dim()), &cfg)?;
    let points: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let body = json!({ "points": points, "report": report });
    write_json(out, &json_document("check-prior", seed, a, body)?)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("max |z| = {:.3} exceeds {:.3}", report.max_z, report.threshold)))
    }
}

/// Error-bound gates for rows at α = 0.95, β = 2, D₀ = 2; messages for the
/// rows that fail.
pub fn accuracy_gates(rows: &[SweepRow]) -> Vec<String> {
    let mut failures = Vec::new();
    for r in rows.iter().filter(|r| r.alpha == 0.95 && r.beta == 2.0 && r.d0 == 2) {
        let limit = match r.p {
            1 => Some(0.0065 * 1.5),
            10 => Some(0.0005 * 2.0),
            _ => None,
        };
        if let Some(l) = limit {
            if r.max_error > l {
                failures.push(format!("p = {}, r = {}: max error {:.6} > {l}", r.p, r.r, r.max_error));
            }
        }
        if r.p >= 2 {
            match r.gamma_bar {
                Some(g) if (0.90..=1.0).contains(&g) => {}
                Some(g) => failures.push(format!("p = {}, r = {}: weighted median gamma {g:.4} outside [0.90, 1]", r.p, r.r)),
                None => failures.push(format!("p = {}, r = {}: no pair with a usable width", r.p, r.r)),
            }
        }
    }
    failures
}

pub fn accuracy(a: &AccuracyArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let cfg = SweepConfig {
        alphas: a.alphas.clone(),
        betas: a.betas.clone(),
        ps: a.ps.clone(),
        d0s: a.d0s.clone(),
        rs: a.rs.clone(),
        n_pairs: a.pairs,
        n_splits: a.splits,
        seed,
        budget: a.budget,
    };
    let rows = run_accuracy_sweep(&cfg)?;
    write_csv_comment(out, "accuracy", seed, a)?;
    let mut w = csv::Writer::from_writer(&mut *out);
    w.write_record(["alpha", "beta", "p", "D0", "r", "gamma_bar", "max_width", "max_error", "n_pairs", "n_skipped"])?;
    for r in &rows {
        if r.n_skipped > 0 {
            eprintln!("skipped {} pairs over the recursion budget at alpha={} beta={} p={}", r.n_skipped, r.alpha, r.beta, r.p);
        }
        w.write_record([
            r.alpha.to_string(),
            r.beta.to_string(),
            r.p.to_string(),
            r.d0.to_string(),
            r.r.to_string(),
            r.gamma_bar.map(|g| g.to_string()).unwrap_or_default(),
            r.max_width.to_string(),
            r.max_error.to_string(),
            r.n_pairs.to_string(),
            r.n_skipped.to_string(),
        ])?;
    }
    w.flush()?;
    let failures = accuracy_gates(&rows);
    if failures.is_empty() || a.no_gate {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failures.join("; ")))
    }
}
