//! Scenario files: parsing, validation, dispatch, sweeps and deterministic CSV output.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use commands::{execute, Outcome};
pub use config::{
    CoherenceBlock, CoherenceCase, Command, CrcBlock, CrcCase, IonizationBlock, IvBlock,
    JunctionBlock, LinearRange, PleBlock, Scenario, SsrBlock, SsrCase, Sweep, TrapBlock,
    TwoPhotonBlock,
};
pub use output::{num, sha256_hex, CsvTable, EmittedFile, RunManifest};

use crate::error::{Error, ErrorCategory, Result};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "V2SIM_OUT_DIR";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    /// Category and message of each failed sweep point, in order.
    pub failures: Vec<(usize, ErrorCategory, String)>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.failures.first().map(|f| f.1.exit_code()).unwrap_or(0)
    }
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<(Scenario, PathBuf)> {
    let s = Scenario::from_file(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    s.validate(&base)?;
    Ok((s, base))
}

pub fn output_dir(s: &Scenario, base: &Path, opts: &RunOptions) -> PathBuf {
    if let Some(d) = &opts.out_dir {
        return d.clone();
    }
    if let Some(d) = &s.output_dir {
        return s.resolve(base, d);
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(&s.name),
        _ => PathBuf::from("out").join(&s.name),
    }
}

pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    let s = Scenario::from_file(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    run_loaded(s, &base, opts)
}

pub fn run_loaded(mut s: Scenario, base: &Path, opts: &RunOptions) -> Result<RunReport> {
    if opts.seed.is_some() {
        s.seed = opts.seed;
    }
    s.validate(base)?;
    if opts.jobs == Some(0) {
        return Err(Error::validation("--jobs", "must be >= 1"));
    }
    match opts.jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(|| run_inner(&s, base, opts)),
        None => run_inner(&s, base, opts),
    }
}

fn run_inner(s: &Scenario, base: &Path, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let dir = output_dir(s, base, opts);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let seed = s.seed.unwrap_or(0);
    let mut files = Vec::new();
    let mut failures = Vec::new();

    match &s.sweep {
        None => {
            let out = execute(s, base, seed)?;
            for (name, t) in &out.tables {
                files.push(output::write_table(&dir, Path::new(name), t)?);
            }
        }
        Some(sw) => {
            let points: Vec<Result<Outcome>> = sw
                .values
                .par_iter()
                .map(|v| {
                    let mut p = s.with_parameter(&sw.parameter, v)?;
                    p.sweep = None;
                    p.validate(base)?;
                    execute(&p, base, seed)
                })
                .collect();
            let mut keys: Vec<String> = Vec::new();
            for o in points.iter().flatten() {
                for (k, _) in &o.summary {
                    if !keys.contains(k) {
                        keys.push(k.clone());
                    }
                }
            }
            let mut header = vec![
                "point".to_string(),
                sw.parameter.clone(),
                "status".to_string(),
            ];
            header.extend(keys.iter().cloned());
            header.push("error".into());
            let mut summary = CsvTable {
                header,
                rows: Vec::new(),
            };
            for (k, (v, r)) in sw.values.iter().zip(&points).enumerate() {
                let value = match v {
                    toml::Value::String(x) => x.clone(),
                    other => other.to_string(),
                };
                let mut row = vec![k.to_string(), value];
                match r {
                    Ok(o) => {
                        row.push("ok".into());
                        for key in &keys {
                            let cell = o.summary.iter().find(|p| &p.0 == key).map(|p| p.1.clone());
                            row.push(cell.unwrap_or_default());
                        }
                        row.push(String::new());
                        for (name, t) in &o.tables {
                            let rel = Path::new(&format!("point_{k:03}")).join(name);
                            files.push(output::write_table(&dir, &rel, t)?);
                        }
                    }
                    Err(e) => {
                        row.push("failed".into());
                        row.extend(keys.iter().map(|_| String::new()));
                        row.push(e.to_string());
                        failures.push((k, e.category(), e.to_string()));
                    }
                }
                summary.rows.push(row);
            }
            files.push(output::write_table(
                &dir,
                Path::new("sweep_summary.csv"),
                &summary,
            )?);
        }
    }

    let canonical = s.to_toml_string()?;
    let manifest = RunManifest {
        scenario: s.name.clone(),
        command: s.command.to_string(),
        scenario_sha256: sha256_hex(canonical.as_bytes()),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: s.seed,
        wall_clock_s: start.elapsed().as_secs_f64(),
        files,
        failed_points: failures.iter().map(|f| f.0).collect(),
    };
    output::write_manifest(&dir, &manifest)?;
    Ok(RunReport {
        out_dir: dir,
        manifest,
        failures,
    })
}
