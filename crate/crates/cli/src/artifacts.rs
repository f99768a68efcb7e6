//! Run-directory artifacts. Everything is plain CSV/JSON/text, written
//! atomically (temp file in the target directory, then rename) so a crashed
//! run never leaves a half-written file behind.
//!
//! Float columns use Rust's shortest round-trip formatting, which is
//! deterministic, so repeated runs with one seed produce byte-identical
//! files.

use std::io::Write;
use std::path::{Path, PathBuf};

use pfa_core::eval::FactorSummary;
use pfa_core::model::Snapshot;
use pfa_core::samplers::TraceRow;
use pfa_core::{Error, Result};
use serde::Serialize;

/// Run-level metadata: enough to identify what produced a directory.
#[derive(Debug, Serialize)]
pub struct RunInfo<'a> {
    pub tool: &'a str,
    pub version: &'a str,
    pub command: &'a str,
    pub variant: &'a str,
    pub seed: u64,
    pub threads: usize,
}

/// One evaluation outcome row; `replicate` is a number, "mean", or
/// "uniform" for the baseline.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub a_phi: Option<f64>,
    pub replicate: String,
    pub perplexity: f64,
    pub active_factors: Option<f64>,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    // Temp files are born 0600; loosen to the usual artifact mode.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_run_info(dir: &Path, info: &RunInfo) -> Result<()> {
    let json = serde_json::to_string_pretty(info)
        .map_err(|e| Error::data(format!("cannot serialize run info: {e}")))?;
    write_atomic(&dir.join("run.json"), json.as_bytes())
}

pub fn write_resolved_config(dir: &Path, rendered: &str) -> Result<()> {
    write_atomic(&dir.join("resolved_config.txt"), rendered.as_bytes())
}

pub fn write_trace(dir: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut out = String::from("iteration,loglik,n_active_factors,mh_accept_rate\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.iteration, row.loglik, row.n_active_factors, row.mh_accept_rate
        ));
    }
    write_atomic(&dir.join("trace.csv"), out.as_bytes())
}

pub fn write_snapshot(dir: &Path, snapshot: &Snapshot) -> Result<()> {
    let json = serde_json::to_string(snapshot)
        .map_err(|e| Error::data(format!("cannot serialize snapshot: {e}")))?;
    write_atomic(&dir.join("snapshot.json"), json.as_bytes())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("cannot parse snapshot {}: {e}", path.display())))
}

/// Factor report CSV. Term ids are rendered through `vocab`; top terms are
/// packed "word:loading" space-separated, with csv quoting handling any
/// embedded commas in vocabulary words.
pub fn write_factor_report(dir: &Path, report: &[FactorSummary], vocab: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "factor",
        "active",
        "allocated",
        "weight",
        "mark",
        "mean_count",
        "vmr",
        "top_terms",
    ])
    .map_err(csv_err)?;
    for f in report {
        let terms = f
            .top_terms
            .iter()
            .map(|(t, v)| {
                let name = vocab.get(*t as usize).map(String::as_str).unwrap_or("?");
                format!("{name}:{v:.6e}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([
            f.factor.to_string(),
            f.active.to_string(),
            f.allocated.to_string(),
            f.weight.to_string(),
            f.mark.to_string(),
            f.mean_count.to_string(),
            f.vmr.to_string(),
            terms,
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::data(format!("factor report: {e}")))?;
    write_atomic(&dir.join("factor_report.csv"), &bytes)
}

pub fn write_perplexity(dir: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut out = String::from("a_phi,replicate,perplexity,active_factors\n");
    for row in rows {
        let a_phi = row.a_phi.map(|v| v.to_string()).unwrap_or_default();
        let active = row
            .active_factors
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{a_phi},{},{},{active}\n",
            row.replicate, row.perplexity
        ));
    }
    write_atomic(&dir.join("perplexity.csv"), out.as_bytes())
}

/// Buffet simulation rows: one per (replicate, customer).
pub fn write_simulation(dir: &Path, rows: &[(u64, u64, u64, u64)]) -> Result<()> {
    let mut out = String::from("replicate,customer,new_dishes,total_scoops\n");
    for (rep, customer, new_dishes, scoops) in rows {
        out.push_str(&format!("{rep},{customer},{new_dishes},{scoops}\n"));
    }
    write_atomic(&dir.join("simulation.csv"), out.as_bytes())
}

fn csv_err(e: csv::Error) -> Error {
    Error::data(format!("csv write failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(
            std::fs::read_dir(dir.path()).unwrap().count(),
            1,
            "no temp leftovers"
        );
    }

    #[test]
    fn trace_format_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            TraceRow {
                iteration: 1,
                loglik: -1.5,
                n_active_factors: 3,
                mh_accept_rate: 0.25,
            },
            TraceRow {
                iteration: 2,
                loglik: -1.25,
                n_active_factors: 2,
                mh_accept_rate: f64::NAN,
            },
        ];
        write_trace(dir.path(), &rows).unwrap();
        let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert_eq!(
            text,
            "iteration,loglik,n_active_factors,mh_accept_rate\n1,-1.5,3,0.25\n2,-1.25,2,NaN\n"
        );
    }

    #[test]
    fn factor_report_quotes_awkward_vocab() {
        let dir = tempfile::tempdir().unwrap();
        let report = vec![FactorSummary {
            factor: 0,
            active: true,
            allocated: 10,
            weight: 0.5,
            mark: 1.0,
            mean_count: 1.0,
            vmr: 2.0,
            top_terms: vec![(0, 0.75), (1, 0.25)],
        }];
        let vocab = vec!["with,comma".to_string(), "plain".to_string()];
        write_factor_report(dir.path(), &report, &vocab).unwrap();
        let text = std::fs::read_to_string(dir.path().join("factor_report.csv")).unwrap();
        assert!(
            text.contains("\"with,comma:7.500000e-1 plain:2.500000e-1\""),
            "{text}"
        );
    }
}
