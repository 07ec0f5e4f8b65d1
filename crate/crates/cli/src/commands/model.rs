use std::io::Write;
use std::path::PathBuf;

use bartgp::gp::{
    fit_map, predict as gp_predict, set_lambda_from_ols, FitOptions, FitResult, GpModel, HyperParams, KernelConfig,
    LambdaFit, NoisePrior, PredictOptions,
};
use bartgp::grid::{build_grid, GridStrategy};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{json_document, write_json, SCHEMA_VERSION};
use crate::args::{FitArgs, GenerateArgs, PredictArgs, Rows, Transform};
use crate::data::{apply_transform, friedman, read_table_path, select, select_rows, split_rows, Encoding, Scaling};
use crate::error::{usage, Result};

/// Everything `predict` needs: preprocessing, the split, the fitted
/// hyperparameters and the (scaled) training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub seed: u64,
    pub config: Value,
    pub data: PathBuf,
    pub encoding: Encoding,
    pub transform: Transform,
    pub scaling: Scaling,
    pub n_rows: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub lambda: LambdaFit,
    pub model: GpModel,
    pub fit: FitResult,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn fit(a: &FitArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let table = read_table_path(&a.data)?;
    let encoding = Encoding::infer(&table, Some(&a.target))?;
    let (x, y) = encoding.apply(&table)?;
    let y = apply_transform(&y.expect("target column present"), a.transform)?;
    let (train, test) = split_rows(x.nrows(), a.train_ratio, seed)?;
    let xt = select_rows(&x, &train);
    let yt = select(&y, &train);
    let scaling = if a.no_standardize { Scaling::IDENTITY } else { Scaling::fit(&yt) };
    let ys = scaling.forward(&yt);

    let grid = build_grid(&xt, GridStrategy::Midpoints)?;
    let lambda = set_lambda_from_ols(&xt, &ys, a.nu, a.q)?;
    let prior = NoisePrior::new(a.nu, lambda.lambda, a.q)?;
    let s2 = if lambda.sigma2_hat > 0.0 { lambda.sigma2_hat } else { lambda.lambda };
    let init = HyperParams { alpha: a.alpha, beta: a.beta, k: a.k, log_sigma2: s2.ln() };
    let kernel = KernelConfig { p0_override: a.p0_one, ..KernelConfig::reference(xt.ncols()) };
    let opts = FitOptions { tune_kernel: !a.no_tune_kernel, tune_k: !a.no_tune_k, max_iter: a.max_iter, ..FitOptions::default() };
    let result = fit_map(&xt, &ys, &grid, &kernel, &prior, &init, &opts)?;
    if let Some(w) = &result.warning {
        eprintln!("warning: {w}");
    }

    let model = GpModel { grid, kernel, params: result.params, noise: prior };
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        seed,
        config: serde_json::to_value(a)?,
        data: a.data.clone(),
        encoding: encoding.clone(),
        transform: a.transform,
        scaling,
        n_rows: x.nrows(),
        train_rows: train.clone(),
        test_rows: test.clone(),
        lambda,
        model,
        fit: result.clone(),
        train_x: rows_of(&xt),
        train_y: ys.iter().copied().collect(),
    };
    let f = std::fs::File::create(&a.model_out)
        .map_err(|e| usage(format!("cannot create {}: {e}", a.model_out.display())))?;
    serde_json::to_writer(std::io::BufWriter::new(f), &file)?;

    let body = json!({
        "n_train": train.len(),
        "n_test": test.len(),
        "features": encoding.feature_names(),
        "scaling": scaling,
        "lambda": lambda,
        "params": result.params,
        "sigma": result.params.sigma2().sqrt() * scaling.sd,
        "fit": result,
        "model_path": a.model_out,
    });
    write_json(out, &json_document("fit", seed, a, body)?)
}

/// Percentile of sorted values by linear interpolation.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
}

pub fn predict(a: &PredictArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let f = std::fs::File::open(&a.model).map_err(|e| usage(format!("cannot open {}: {e}", a.model.display())))?;
    let mf: ModelFile = serde_json::from_reader(std::io::BufReader::new(f))?;
    if mf.schema_version != SCHEMA_VERSION {
        return Err(usage(format!("model schema version {} is not {SCHEMA_VERSION}", mf.schema_version)));
    }
    let path = a.data.clone().unwrap_or_else(|| mf.data.clone());
    let table = read_table_path(&path)?;
    let (x, y) = mf.encoding.apply(&table)?;
    let rows: Vec<usize> = match a.rows {
        Rows::All => (0..x.nrows()).collect(),
        Rows::Test => {
            if x.nrows() != mf.n_rows {
                return Err(usage(format!(
                    "{} has {} rows but the model was split on {}; use --rows all for new data",
                    path.display(),
                    x.nrows(),
                    mf.n_rows
                )));
            }
            mf.test_rows.clone()
        }
    };
    if rows.is_empty() {
        return Err(usage("no rows to predict"));
    }
    let xs = select_rows(&x, &rows);
    let y_scaled = match &y {
        Some(y) => Some(mf.scaling.forward(&select(&apply_transform(y, mf.transform)?, &rows))),
        None => None,
    };
    let p = xs.ncols();
    let xt = DMatrix::from_fn(mf.train_x.len(), p, |i, j| mf.train_x[i][j]);
    let yt = DVector::from_vec(mf.train_y.clone());
    let opts = PredictOptions { n_sigma_draws: a.sigma_draws, n_f_per_sigma: a.f_draws };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let post = gp_predict(&xt, &yt, &xs, &mf.model, &opts, y_scaled.as_ref(), &mut rng)?;

    let sd = mf.scaling.sd;
    if let Some(path) = &a.predictions {
        let f = std::fs::File::create(path).map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
        let mut head = vec!["row", "mean", "sd", "lower95", "upper95"];
        if y.is_some() {
            head.push("y");
        }
        w.write_record(&head)?;
        for (i, &r) in rows.iter().enumerate() {
            let mut col: Vec<f64> = post.samples.column(i).iter().copied().collect();
            let mut rec = vec![r.to_string(), mf.scaling.inverse(post.mean[i]).to_string()];
            if col.is_empty() {
                rec.extend([String::new(), String::new(), String::new()]);
            } else {
                let m = col.iter().sum::<f64>() / col.len() as f64;
                let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (col.len().max(2) - 1) as f64;
                col.sort_by(f64::total_cmp);
                rec.push((v.sqrt() * sd).to_string());
                rec.push(mf.scaling.inverse(percentile(&col, 0.025)).to_string());
                rec.push(mf.scaling.inverse(percentile(&col, 0.975)).to_string());
            }
            if let Some(ys) = &y_scaled {
                rec.push(mf.scaling.inverse(ys[i]).to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
    }

    let mean_s2 = post.sigma2_draws.iter().sum::<f64>() / post.sigma2_draws.len() as f64;
    let body = json!({
        "data": path,
        "n_rows": rows.len(),
        "metrics": {
            "rmse_standardized": post.rmse,
            "log_loss_standardized": post.log_loss,
            "rmse": post.rmse.map(|r| r * sd),
            // the density of y picks up a 1/sd factor per point
            "log_loss": post.log_loss.map(|l| l + sd.ln()),
        },
        "sigma_posterior_mean": (mean_s2).sqrt() * sd,
        "acceptance_rate": post.acceptance_rate,
    });
    write_json(out, &json_document("predict", seed, a, body)?)
}

pub fn generate(a: &GenerateArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    friedman(a.n, a.p, a.noise, a.categorical, seed)?.write(out)
}
