//! The four subcommands. Each resolves the config, validates what it needs,
//! runs, and leaves a self-describing artifact directory behind.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ndarray::Array2;
use pfa_core::eval::{factor_report, split_counts, PerplexityAccum};
use pfa_core::model::CountMatrix;
use pfa_core::rng::RngStream;
use pfa_core::samplers::{run_chain_streaming, run_em, ChainConfig, TraceRow};
use pfa_core::{Error, Result};

use crate::artifacts::{self, EvalRow, RunInfo};
use crate::config::{CommandKind, ExperimentConfig};
use crate::ingest::ingest_bow;

fn prepare_outdir(cfg: &ExperimentConfig, cmd: CommandKind) -> Result<()> {
    std::fs::create_dir_all(&cfg.outdir)?;
    artifacts::write_resolved_config(&cfg.outdir, &cfg.render_resolved())?;
    artifacts::write_run_info(
        &cfg.outdir,
        &RunInfo {
            tool: "pfa",
            version: env!("CARGO_PKG_VERSION"),
            command: cmd.as_str(),
            variant: cfg.chain.variant.as_str(),
            seed: cfg.seed,
            threads: cfg.threads,
        },
    )
}

fn load_corpus(cfg: &ExperimentConfig) -> Result<(CountMatrix, Vec<String>)> {
    let docword = cfg.docword.as_deref().expect("validated");
    ingest_bow(
        docword,
        cfg.vocab.as_deref(),
        cfg.min_doc_freq,
        cfg.bow_header,
    )
}

/// Expected per-factor allocation of the observed counts under a point
/// estimate: the allocation E-step, summed over cells. Stands in for the
/// sampled allocation totals when a fit has no allocation (EM).
fn expected_factor_totals(
    counts: &CountMatrix,
    phi: &Array2<f64>,
    theta: &Array2<f64>,
) -> Vec<u64> {
    let k = phi.ncols();
    let mut totals = vec![0.0f64; k];
    for e in counts.entries() {
        let (p, i) = (e.term as usize, e.doc as usize);
        let mut lambda = 0.0;
        for kk in 0..k {
            lambda += phi[[p, kk]] * theta[[kk, i]];
        }
        if lambda <= 0.0 {
            continue;
        }
        let scale = e.count as f64 / lambda;
        for kk in 0..k {
            totals[kk] += scale * phi[[p, kk]] * theta[[kk, i]];
        }
    }
    totals.into_iter().map(|v| v.round() as u64).collect()
}

pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate(CommandKind::Fit)?;
    let (counts, vocab) = load_corpus(cfg)?;
    prepare_outdir(cfg, CommandKind::Fit)?;
    if let Some(path) = &cfg.export_pruned {
        crate::ingest::export_bow(&counts, path)?;
        let vocab_text = vocab.join("\n") + "\n";
        artifacts::write_atomic(&path.with_extension("vocab.txt"), vocab_text.as_bytes())?;
    }

    let chain = &cfg.chain;
    let mut rng = RngStream::new(cfg.seed).substream("fit");
    let (state, trace, totals) = if chain.variant.is_em() {
        let res = run_em(&counts, chain, &mut rng)?;
        let trace: Vec<TraceRow> = res
            .objective
            .iter()
            .enumerate()
            .map(|(i, &obj)| TraceRow {
                iteration: (i + 1) as u64,
                loglik: obj,
                n_active_factors: chain.k,
                mh_accept_rate: f64::NAN,
            })
            .collect();
        let totals = expected_factor_totals(&counts, &res.state.phi, &res.state.theta);
        if !res.converged {
            log::warn!(
                "EM used its full {} iteration budget without meeting em_tol",
                res.n_iterations
            );
        }
        (res.state, trace, totals)
    } else {
        let res = run_chain_streaming(&counts, chain, &mut rng, &mut |_, _, _| Ok(()))?;
        (res.final_state, res.trace, res.final_factor_totals)
    };

    let iterations = trace.len() as u64;
    let mut snapshot = state.snapshot(
        chain.variant.as_str(),
        iterations,
        chain.hyper.to_map(chain.variant),
    );
    snapshot.seed = Some(cfg.seed);
    snapshot.factor_totals = Some(totals.clone());

    artifacts::write_trace(&cfg.outdir, &trace)?;
    artifacts::write_snapshot(&cfg.outdir, &snapshot)?;
    let report = factor_report(&state, &totals, cfg.top_terms)?;
    artifacts::write_factor_report(&cfg.outdir, &report, &vocab)?;
    Ok(())
}

/// Outcome of one (grid point, replicate) evaluation job.
struct JobResult {
    perplexity: f64,
    active_factors: f64,
}

fn eval_one(
    cfg: &ExperimentConfig,
    counts: &CountMatrix,
    a_phi: f64,
    grid_idx: usize,
    rep: usize,
) -> Result<JobResult> {
    let mut chain: ChainConfig = cfg.chain;
    chain.hyper.a_phi = a_phi;

    let base = RngStream::new(cfg.seed)
        .substream("eval")
        .substream_indexed("grid", grid_idx as u64)
        .substream_indexed("replicate", rep as u64);
    let mut split_rng = base.substream("split");
    let pair = split_counts(counts, cfg.split_ratio, rep as u64, &mut split_rng)?;
    let mut chain_rng = base.substream("chain");

    let mut accum = PerplexityAccum::new(&pair.test);
    let active = if chain.variant.is_em() {
        let res = run_em(&pair.train, &chain, &mut chain_rng)?;
        accum.add_sample(&pair.test, &res.state.phi, &res.state.theta)?;
        let totals = expected_factor_totals(&pair.train, &res.state.phi, &res.state.theta);
        totals.iter().filter(|&&t| t > 0).count() as f64
    } else {
        let mut active_sum = 0usize;
        let mut n_kept = 0usize;
        run_chain_streaming(
            &pair.train,
            &chain,
            &mut chain_rng,
            &mut |_, state, alloc| {
                accum.add_sample(&pair.test, &state.phi, &state.theta)?;
                active_sum += alloc.n_active();
                n_kept += 1;
                Ok(())
            },
        )?;
        if n_kept == 0 {
            f64::NAN
        } else {
            active_sum as f64 / n_kept as f64
        }
    };
    Ok(JobResult {
        perplexity: accum.perplexity(&pair.test)?,
        active_factors: active,
    })
}

pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate(CommandKind::Eval)?;
    let (counts, _vocab) = load_corpus(cfg)?;
    prepare_outdir(cfg, CommandKind::Eval)?;

    let grid: Vec<f64> = cfg
        .a_phi_grid
        .clone()
        .unwrap_or_else(|| vec![cfg.chain.hyper.a_phi]);
    let n_jobs = grid.len() * cfg.replicates;

    // Deterministic regardless of worker count: every job owns fixed
    // substreams and a fixed result slot.
    let next_job = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<JobResult>>>> =
        Mutex::new((0..n_jobs).map(|_| None).collect());
    let workers = cfg.threads.min(n_jobs).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = next_job.fetch_add(1, Ordering::Relaxed);
                if job >= n_jobs {
                    break;
                }
                let (grid_idx, rep) = (job / cfg.replicates, job % cfg.replicates);
                let out = eval_one(cfg, &counts, grid[grid_idx], grid_idx, rep);
                slots.lock().expect("eval worker poisoned")[job] = Some(out);
            });
        }
    });

    let results = slots.into_inner().expect("eval worker poisoned");
    let mut rows: Vec<EvalRow> = Vec::with_capacity(n_jobs + grid.len() + 1);
    for (grid_idx, &a_phi) in grid.iter().enumerate() {
        let mut perps = Vec::with_capacity(cfg.replicates);
        let mut actives = Vec::with_capacity(cfg.replicates);
        for rep in 0..cfg.replicates {
            let slot = results[grid_idx * cfg.replicates + rep]
                .as_ref()
                .expect("all jobs ran");
            let res = match slot {
                Ok(r) => r,
                Err(e) => {
                    return Err(Error::data(format!(
                        "replicate {rep} at a_phi {a_phi} failed: {e}"
                    )))
                }
            };
            perps.push(res.perplexity);
            actives.push(res.active_factors);
            rows.push(EvalRow {
                a_phi: Some(a_phi),
                replicate: rep.to_string(),
                perplexity: res.perplexity,
                active_factors: Some(res.active_factors),
            });
        }
        let mean = perps.iter().sum::<f64>() / perps.len() as f64;
        let mean_active = actives.iter().sum::<f64>() / actives.len() as f64;
        rows.push(EvalRow {
            a_phi: Some(a_phi),
            replicate: "mean".to_string(),
            perplexity: mean,
            active_factors: Some(mean_active),
        });
    }
    // The uniform predictor scores exactly the vocabulary size.
    rows.push(EvalRow {
        a_phi: None,
        replicate: "uniform".to_string(),
        perplexity: counts.n_terms() as f64,
        active_factors: None,
    });
    artifacts::write_perplexity(&cfg.outdir, &rows)
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate(CommandKind::Simulate)?;
    prepare_outdir(cfg, CommandKind::Simulate)?;

    let hyper = cfg.bnb_hyper();
    let mut rows = Vec::with_capacity(cfg.sim_replicates * cfg.sim_customers);
    for rep in 0..cfg.sim_replicates {
        let mut rng = RngStream::new(cfg.seed)
            .substream("simulate")
            .substream_indexed("replicate", rep as u64);
        let draw = pfa_core::bnb::simulate_msibp(&hyper, cfg.sim_customers, &mut rng)?;
        for customer in 0..cfg.sim_customers {
            let scoops: u64 = draw.counts[customer].iter().map(|&(_, n)| n).sum();
            rows.push((
                rep as u64,
                (customer + 1) as u64,
                draw.new_dishes[customer],
                scoops,
            ));
        }
    }
    artifacts::write_simulation(&cfg.outdir, &rows)
}

pub fn cmd_report(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate(CommandKind::Report)?;
    let snap_path: &Path = cfg.snapshot.as_deref().expect("validated");
    let snapshot = artifacts::read_snapshot(snap_path)?;
    let state = snapshot.to_state()?;
    let totals = snapshot.factor_totals.clone().ok_or_else(|| {
        Error::data("snapshot records no factor totals; re-fit to produce a reportable snapshot")
    })?;
    let vocab = match cfg.vocab.as_deref() {
        Some(path) => crate::ingest::read_vocab(path, snapshot.n_terms)?,
        None => (1..=snapshot.n_terms)
            .map(|t| format!("term_{t}"))
            .collect(),
    };
    prepare_outdir(cfg, CommandKind::Report)?;
    let report = factor_report(&state, &totals, cfg.top_terms)?;
    artifacts::write_factor_report(&cfg.outdir, &report, &vocab)
}
