use std::collections::BTreeMap;
use std::io::Write;

use bartgp::grid::{build_grid, count_splits, AxisWeights, GridStrategy, SplitCounts, SplitGrid};
use bartgp::kernel::{self, comparison_kernel, ComparisonKernel, TruncationSpec};
use bartgp::kmatrix::{cov_matrix, KernelMatrixRequest};
use clap::ValueEnum;
use serde_json::json;

use super::{json_document, parse_list, schedule, write_csv_comment, write_json};
use crate::args::{GridKind, KernelArgs, MatrixArgs, PlotcovArgs, Variant};
use crate::data::{read_table_path, Encoding};
use crate::error::{usage, Result};

struct KernelInput {
    counts: SplitCounts,
    points: Option<(Vec<f64>, Vec<f64>)>,
}

fn parse_counts(specs: &[String]) -> Result<SplitCounts> {
    let mut triples = Vec::new();
    for axis in specs.iter().flat_map(|s| s.split(';')).filter(|s| !s.trim().is_empty()) {
        let v: Vec<usize> = parse_list(axis, "--counts")?;
        if v.len() != 3 {
            return Err(usage(format!("--counts needs below,between,above per axis, got '{axis}'")));
        }
        triples.push((v[0], v[1], v[2]));
    }
    Ok(SplitCounts::from_triples(&triples))
}

fn kernel_input(a: &KernelArgs, weights_dim: Option<usize>) -> Result<KernelInput> {
    let sources = [!a.counts.is_empty(), a.x.is_some() || a.x2.is_some(), a.same_point && a.x.is_none()];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(usage("give exactly one of --counts, --x/--x2 or --same-point"));
    }
    if !a.counts.is_empty() {
        return Ok(KernelInput { counts: parse_counts(&a.counts)?, points: None });
    }
    let (x, x2) = match (&a.x, &a.x2) {
        (Some(x), Some(x2)) => (parse_list(x, "--x")?, parse_list(x2, "--x2")?),
        (Some(x), None) if a.same_point => {
            let v: Vec<f64> = parse_list(x, "--x")?;
            (v.clone(), v)
        }
        (None, None) => {
            let p = weights_dim.unwrap_or(1);
            (vec![0.5; p], vec![0.5; p])
        }
        _ => return Err(usage("--x and --x2 go together")),
    };
    if x.len() != x2.len() {
        return Err(usage(format!("--x has {} coordinates but --x2 has {}", x.len(), x2.len())));
    }
    if a.splits == 0 {
        return Err(usage("--splits must be >= 1"));
    }
    let grid = SplitGrid::unit_uniform(x.len(), a.splits);
    Ok(KernelInput { counts: count_splits(&grid, &x, &x2)?, points: Some((x, x2)) })
}

fn variant_name(v: Variant) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

pub fn kernel(a: &KernelArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let sched = schedule(&a.schedule)?;
    let weights = a.weights.as_deref().map(|s| parse_list::<f64>(s, "--weights")).transpose()?;
    let input = kernel_input(a, weights.as_ref().map(Vec::len))?;
    let c = &input.counts;
    if c.dim() == 0 {
        return Err(usage("no axes given"));
    }
    let w = match weights {
        Some(v) => AxisWeights::new(v)?,
        None => AxisWeights::uniform(c.dim()),
    };
    if w.dim() != c.dim() {
        return Err(usage(format!("{} weights for {} axes", w.dim(), c.dim())));
    }
    let pseudo_spec = match &a.resets {
        Some(r) => TruncationSpec::new(parse_list(r, "--resets")?, a.gamma)?,
        None => TruncationSpec::uniform(a.d0, a.r, a.gamma)?,
    };
    let comparison = |kind: ComparisonKernel| -> Result<f64> {
        let (x, x2) = input.points.as_ref().ok_or_else(|| usage("comparison kernels need --x/--x2 or --same-point"))?;
        Ok(comparison_kernel(x, x2, kind)?.value)
    };
    let alpha = a.schedule.alpha;
    let mut values = BTreeMap::new();
    for &v in &a.variant {
        let value = match v {
            Variant::Exact => kernel::exact_corr_budget(c, &w, &sched, 0, a.budget)?.0,
            Variant::Reference => kernel::reference_corr(c, &w, &sched)?,
            Variant::Truncated => kernel::truncated_corr(c, &w, &sched, 0, a.depth, a.gamma)?,
            Variant::Pseudo => kernel::pseudo_recursive_corr_budget(c, &w, &sched, 0, &pseudo_spec, a.budget)?,
            Variant::Depth1 => kernel::depth1_closed(c, &w, &sched, 0, 1.0 - (1.0 - a.gamma) * sched.prob(1))?,
            Variant::Depth2 => kernel::depth2_closed(c, &w, &sched, 0, a.gamma)?,
            Variant::Laplace => comparison(ComparisonKernel::Laplace { eta: a.eta })?,
            Variant::ShiftedLaplace => comparison(ComparisonKernel::ShiftedLaplace { eta: a.eta, alpha })?,
            Variant::Power => comparison(ComparisonKernel::Power { q: a.q, alpha })?,
        };
        values.insert(variant_name(v), value);
    }
    if values.len() == 1 && !a.bounds && !a.json {
        let v = values.values().next().expect("one value");
        writeln!(out, "{v}")?;
        return Ok(());
    }
    let mut body = json!({
        "counts": { "below": c.below, "between": c.between, "above": c.above },
        "values": values,
    });
    if a.bounds {
        let b = kernel::bounds(c, &w, &sched, a.d0, a.r)?;
        body["bounds"] = json!({
            "lower": b.lower,
            "upper": b.upper,
            "width": b.width(),
            "midpoint": b.midpoint(),
            "D0": a.d0,
            "r": a.r,
        });
    }
    write_json(out, &json_document("kernel", seed, a, body)?)
}

pub fn plotcov(a: &PlotcovArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    if a.points < 2 || a.splits == 0 || a.p.contains(&0) {
        return Err(usage("plotcov needs --points >= 2, --splits >= 1 and every --p >= 1"));
    }
    let sched = schedule(&a.schedule)?;
    let shifted = ComparisonKernel::ShiftedLaplace { eta: a.eta, alpha: a.schedule.alpha };
    write_csv_comment(out, "plotcov", seed, a)?;
    let mut w = csv::Writer::from_writer(&mut *out);
    w.write_record(["p", "t", "bart", "shifted_laplace"])?;
    for &p in &a.p {
        let grid = SplitGrid::unit_uniform(p, a.splits);
        let weights = AxisWeights::uniform(p);
        let x = vec![0.0; p];
        for j in 0..a.points {
            // along the diagonal from the origin to the opposite corner
            let t = j as f64 / (a.points - 1) as f64;
            let x2 = vec![t; p];
            let k = kernel::reference_corr(&count_splits(&grid, &x, &x2)?, &weights, &sched)?;
            let s = comparison_kernel(&x, &x2, shifted)?.value;
            w.write_record([p.to_string(), t.to_string(), k.to_string(), s.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn matrix(a: &MatrixArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let table = read_table_path(&a.input)?;
    let enc = Encoding::infer(&table, None)?;
    let (x, _) = enc.apply(&table)?;
    let x2 = match &a.input2 {
        Some(path) => enc.apply(&read_table_path(path)?)?.0,
        None => x.clone(),
    };
    let strategy = match a.grid {
        GridKind::Midpoints => GridStrategy::Midpoints,
        GridKind::Uniform => {
            let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            GridStrategy::Uniform { count: a.splits, lo, hi }
        }
    };
    let grid = build_grid(&x, strategy)?;
    let mut req = KernelMatrixRequest::new(&x, &x2, &grid, schedule(&a.schedule)?);
    req.scale = a.scale;
    let m = cov_matrix(&req)?;
    write_csv_comment(out, "matrix", seed, a)?;
    let mut w = csv::Writer::from_writer(&mut *out);
    w.write_record((0..m.ncols()).map(|j| format!("c{j}")))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
