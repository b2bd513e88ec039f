//! Batch front-end: read a unitary, decompose it along a scheme, write the
//! factorization and an optional verification report.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::error::{Error, Result};
use crate::schemes::{build_from_spec, default_catalog, Scheme, SchemeSpec};
use crate::synth::{reconstruct_and_verify, Decomposer, FactorizationJson, MatrixJson, SynthOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

#[derive(Clone, Debug, Parser)]
#[command(
    name = "cartan-synth",
    version,
    about = "Factor a unitary into exponentials along a Cartan decomposition scheme"
)]
pub struct JobConfig {
    /// Scheme family: ccd-new, kg, bipartite or ccd.
    #[arg(long)]
    pub scheme: String,
    /// Number of qubits.
    #[arg(long, conflicts_with = "dims")]
    pub qubits: Option<usize>,
    /// Subsystem dimensions, comma separated (e.g. 2,4).
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Bipartite index rounds as `p1,q1:p2,q2`, rounds separated by `;`.
    #[arg(long)]
    pub pq_schedule: Option<String>,
    /// Input matrix as JSON `{"n": .., "entries": [[re, im], ..]}` in row-major order.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Solver tolerance.
    #[arg(long, env = "CARTAN_SYNTH_TOL")]
    pub tol: Option<f64>,
    /// Factors within this distance of the identity are dropped.
    #[arg(long)]
    pub prune_tol: Option<f64>,
    /// Re-multiply the written factorization and attach a report.
    #[arg(long)]
    pub verify: bool,
    /// Include each factor's matrix in the output.
    #[arg(long)]
    pub emit_matrices: bool,
}

/// Parse `p1,q1:p2,q2;p1,q1:p2,q2`.
pub fn parse_pq_schedule(text: &str) -> Result<Vec<[(usize, usize); 2]>> {
    let pair = |s: &str| -> Result<(usize, usize)> {
        let (p, q) = s.split_once(',').ok_or_else(|| Error::Parse(format!("expected p,q in {s:?}")))?;
        let num = |x: &str| x.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{x:?}: {e}")));
        Ok((num(p)?, num(q)?))
    };
    text.split(';')
        .filter(|r| !r.trim().is_empty())
        .map(|round| {
            let (a, b) = round
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected two subsystems separated by ':' in {round:?}")))?;
            Ok([pair(a)?, pair(b)?])
        })
        .collect()
}

impl JobConfig {
    pub fn scheme(&self) -> Result<Scheme> {
        let base = default_catalog()
            .into_iter()
            .find(|s| s.family == self.scheme || s.name == self.scheme)
            .ok_or_else(|| Error::UnsupportedScheme(self.scheme.clone()))?;
        let sized = self.qubits.is_some() || self.dims.is_some();
        let spec = SchemeSpec {
            qubits: if sized { self.qubits } else { base.qubits },
            dims: if sized { self.dims.clone() } else { base.dims.clone() },
            pq_schedule: match &self.pq_schedule {
                Some(text) => Some(parse_pq_schedule(text)?),
                None if sized => None,
                None => base.pq_schedule.clone(),
            },
            ..base
        };
        build_from_spec(&spec)
    }

    pub fn options(&self) -> SynthOptions {
        let mut opts = SynthOptions::default();
        if let Some(tol) = self.tol {
            opts.tol = tol;
        }
        if let Some(prune) = self.prune_tol {
            opts.prune_tol = prune;
        }
        opts
    }
}

fn read_matrix(path: &Path) -> Result<MatrixJson> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn to_text(out: &FactorizationJson) -> Result<String> {
    let mut text = serde_json::to_string_pretty(out)?;
    text.push('\n');
    Ok(text)
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Run one job; returns whether verification passed (always true without `--verify`).
pub fn execute(cfg: &JobConfig) -> Result<bool> {
    let input = read_matrix(&cfg.input)?;
    let x = input.to_matrix()?;
    let scheme = cfg.scheme()?;
    if scheme.n() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: scheme.n(), got: x.nrows() });
    }
    let opts = cfg.options();
    let decomposer = Decomposer::new(&scheme, opts.clone())?;
    let f = decomposer.decompose(&x)?;
    let out = FactorizationJson::from_factorization(&f, cfg.emit_matrices, None);
    let text = to_text(&out)?;
    if !cfg.verify {
        emit(&text, cfg.output.as_deref())?;
        return Ok(true);
    }
    // verify from the serialized form, read back from disk when there is a file
    let written = match &cfg.output {
        Some(path) => {
            emit(&text, Some(path))?;
            std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        }
        None => text,
    };
    let reloaded: FactorizationJson = serde_json::from_str(&written)?;
    let report = reconstruct_and_verify(&reloaded.to_factorization()?, &x, &decomposer.seq, &opts);
    let passed = report.passed;
    let out = FactorizationJson { report: Some(report), ..reloaded };
    emit(&to_text(&out)?, cfg.output.as_deref())?;
    Ok(passed)
}

/// Parse `argv` and run the job, mapping the outcome to an exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match JobConfig::try_parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cfg) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("cartan-synth: verification failed");
            EXIT_VERIFY_FAILED
        }
        Err(e) => {
            eprintln!("cartan-synth: {e}");
            EXIT_ERROR
        }
    }
}
