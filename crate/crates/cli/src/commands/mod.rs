//! Command implementations. Each writes its main output to `out`; JSON
//! outputs and CSV comment headers carry the schema version, the command,
//! the seed and the resolved arguments.

mod checks;
mod kernel;
mod model;

use std::io::Write;
use std::str::FromStr;

use bartgp::kernel::DepthSchedule;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::{Cli, Command, ScheduleArgs};
use crate::error::{usage, Result};

pub use checks::{accuracy, accuracy_gates, check_prior};
pub use kernel::{kernel, matrix, plotcov};
pub use model::{fit, generate, predict, ModelFile};

pub const SCHEMA_VERSION: u32 = 1;

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Kernel(a) => kernel(a, seed, out),
        Command::Plotcov(a) => plotcov(a, seed, out),
        Command::Matrix(a) => matrix(a, seed, out),
        Command::CheckPrior(a) => check_prior(a, seed, out),
        Command::Accuracy(a) => accuracy(a, seed, out),
        Command::Fit(a) => fit(a, seed, out),
        Command::Predict(a) => predict(a, seed, out),
        Command::Generate(a) => generate(a, seed, out),
    }
}

fn header<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Map<String, Value>> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m.insert("seed".into(), json!(seed));
    m.insert("config".into(), serde_json::to_value(config)?);
    Ok(m)
}

pub(crate) fn json_document<C: Serialize>(command: &str, seed: u64, config: &C, body: Value) -> Result<Value> {
    let mut m = header(command, seed, config)?;
    if let Value::Object(b) = body {
        m.extend(b);
    }
    Ok(Value::Object(m))
}

pub(crate) fn write_json(out: &mut dyn Write, doc: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, doc)?;
    writeln!(out)?;
    Ok(())
}

/// `# {...}` line that precedes CSV output.
pub(crate) fn write_csv_comment<C: Serialize>(out: &mut dyn Write, command: &str, seed: u64, config: &C) -> Result<()> {
    writeln!(out, "# {}", Value::Object(header(command, seed, config)?))?;
    Ok(())
}

pub(crate) fn schedule(a: &ScheduleArgs) -> Result<DepthSchedule> {
    let s = DepthSchedule::new(a.alpha, a.beta)?;
    Ok(if a.p0_one { s.with_root_certain() } else { s })
}

pub(crate) fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| usage(format!("{what}: cannot parse '{}'", v.trim()))))
        .collect()
}
