//! Sparse bag-of-words ingestion and export.
//!
//! The corpus format is the common sparse triplet layout: three header
//! lines giving the document count, vocabulary size, and number of triplet
//! lines, followed by one `doc term count` triplet per line, all ids
//! 1-indexed. A `bow_header = false` corpus skips the header and takes its
//! dimensions from the largest ids seen.
//!
//! Duplicate triplets aggregate. Terms occurring in fewer than
//! `min_doc_freq` documents are dropped and the surviving term ids are
//! repacked contiguously, so the returned vocabulary lines up with the
//! matrix rows.

use std::io::{BufWriter, Write};
use std::path::Path;

use pfa_core::model::CountMatrix;
use pfa_core::{Error, Result};

/// Read one corpus. `vocab_path` may be absent, in which case synthetic
/// `term_<original id>` names are generated.
pub fn ingest_bow(
    docword_path: &Path,
    vocab_path: Option<&Path>,
    min_doc_freq: u32,
    header: bool,
) -> Result<(CountMatrix, Vec<String>)> {
    let text = std::fs::read_to_string(docword_path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut header_value = |what: &str| -> Result<usize> {
        let (line, l) = lines
            .next()
            .ok_or_else(|| Error::data(format!("corpus ended before the {what} header line")))?;
        l.parse::<usize>().map_err(|_| Error::Parse {
            line,
            msg: format!("expected the {what} header count, got '{l}'"),
        })
    };

    let declared = if header {
        let n_docs = header_value("document")?;
        let n_terms = header_value("vocabulary")?;
        let nnz = header_value("triplet")?;
        Some((n_docs, n_terms, nnz))
    } else {
        None
    };

    let mut triplets: Vec<(u32, u32, u64)> = Vec::new();
    let (mut max_doc, mut max_term) = (0u64, 0u64);
    for (line, l) in lines {
        let mut it = l.split_whitespace();
        let (a, b, c) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 'doc term count', got '{l}'"),
                })
            }
        };
        let field = |name: &str, tok: &str| -> Result<u64> {
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line,
                msg: format!("{name} is not a nonnegative integer: '{tok}'"),
            })
        };
        let (doc, term, count) = (
            field("doc id", a)?,
            field("term id", b)?,
            field("count", c)?,
        );
        if doc == 0 || term == 0 {
            return Err(Error::Parse {
                line,
                msg: "ids are 1-indexed; got 0".into(),
            });
        }
        if count == 0 {
            return Err(Error::Parse {
                line,
                msg: "zero-count triplet".into(),
            });
        }
        if let Some((n_docs, n_terms, _)) = declared {
            if doc > n_docs as u64 {
                return Err(Error::data(format!(
                    "line {line}: doc id {doc} exceeds the declared {n_docs} documents"
                )));
            }
            if term > n_terms as u64 {
                return Err(Error::data(format!(
                    "line {line}: term id {term} exceeds the declared {n_terms} terms"
                )));
            }
        }
        max_doc = max_doc.max(doc);
        max_term = max_term.max(term);
        triplets.push((term as u32 - 1, doc as u32 - 1, count));
    }

    let (n_docs, n_terms) = match declared {
        Some((n_docs, n_terms, nnz)) => {
            if nnz != triplets.len() {
                log::warn!(
                    "{}: header declares {nnz} triplets, found {}",
                    docword_path.display(),
                    triplets.len()
                );
            }
            (n_docs, n_terms)
        }
        None => (max_doc as usize, max_term as usize),
    };
    if n_docs == 0 || n_terms == 0 {
        return Err(Error::data("corpus declares no documents or no terms"));
    }

    let full = CountMatrix::from_triplets(n_terms, n_docs, triplets)?;
    let vocab = match vocab_path {
        Some(p) => read_vocab(p, n_terms)?,
        None => (1..=n_terms).map(|t| format!("term_{t}")).collect(),
    };

    prune_rare_terms(&full, vocab, min_doc_freq)
}

pub(crate) fn read_vocab(path: &Path, n_terms: usize) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let mut terms: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
    // A trailing newline leaves one empty tail entry; drop it.
    while terms.last().is_some_and(|t| t.is_empty()) {
        terms.pop();
    }
    if terms.len() != n_terms {
        return Err(Error::data(format!(
            "vocabulary has {} entries but the corpus declares {n_terms} terms",
            terms.len()
        )));
    }
    if let Some(idx) = terms.iter().position(|t| t.is_empty()) {
        return Err(Error::Parse {
            line: idx + 1,
            msg: "empty vocabulary entry".into(),
        });
    }
    Ok(terms)
}

/// Drop terms below the document-frequency floor and repack ids.
fn prune_rare_terms(
    counts: &CountMatrix,
    vocab: Vec<String>,
    min_doc_freq: u32,
) -> Result<(CountMatrix, Vec<String>)> {
    if min_doc_freq <= 1 {
        return Ok((counts.clone(), vocab));
    }
    let df = counts.term_doc_freq();
    let mut remap: Vec<Option<u32>> = vec![None; counts.n_terms()];
    let mut kept_vocab = Vec::new();
    for (t, &freq) in df.iter().enumerate() {
        if freq >= min_doc_freq {
            remap[t] = Some(kept_vocab.len() as u32);
            kept_vocab.push(vocab[t].clone());
        }
    }
    if kept_vocab.is_empty() {
        return Err(Error::data(format!(
            "no term occurs in at least {min_doc_freq} documents"
        )));
    }
    let triplets: Vec<(u32, u32, u64)> = counts
        .entries()
        .iter()
        .filter_map(|e| remap[e.term as usize].map(|t| (t, e.doc, e.count)))
        .collect();
    let pruned = CountMatrix::from_triplets(kept_vocab.len(), counts.n_docs(), triplets)?;
    Ok((pruned, kept_vocab))
}

/// Write a corpus back out in the same header + triplet format.
pub fn export_bow(counts: &CountMatrix, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", counts.n_docs())?;
    writeln!(w, "{}", counts.n_terms())?;
    writeln!(w, "{}", counts.entries().len())?;
    for e in counts.entries() {
        writeln!(w, "{} {} {}", e.doc + 1, e.term + 1, e.count)?;
    }
    w.flush()?;
    Ok(())
}
