//! Experiment configuration: a flat `key = value` file plus a few CLI
//! overrides, resolved into one fully defaulted struct.
//!
//! Every key has a default, so a minimal fit config is just the corpus
//! path. Unknown and duplicate keys are rejected outright; a config that
//! parses is exactly the config that runs, and `render_resolved` writes the
//! full resolved key set back out so a run directory always records what it
//! actually used.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pfa_core::bnb::MarkMeasure;
use pfa_core::samplers::{ChainConfig, Variant};
use pfa_core::{Error, Result};

/// Which command the config is being validated for; commands differ in
/// which paths they require.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Fit,
    Eval,
    Simulate,
    Report,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Fit => "fit",
            CommandKind::Eval => "eval",
            CommandKind::Simulate => "simulate",
            CommandKind::Report => "report",
        }
    }
}

/// Values given on the command line that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub variant: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub chain: ChainConfig,
    /// Corpus in sparse triplet form ("doc term count", 1-indexed).
    pub docword: Option<PathBuf>,
    /// One term per line, aligned with the corpus term ids.
    pub vocab: Option<PathBuf>,
    /// Whether the corpus file starts with the three N/P/NNZ header lines.
    pub bow_header: bool,
    /// Drop terms occurring in fewer documents than this.
    pub min_doc_freq: u32,
    pub split_ratio: f64,
    pub replicates: usize,
    /// Optional loading-concentration sweep for `eval`.
    pub a_phi_grid: Option<Vec<f64>>,
    /// Buffet simulation shape.
    pub sim_customers: usize,
    pub sim_replicates: usize,
    pub alpha: f64,
    pub gamma_mass: f64,
    pub mark: MarkMeasure,
    /// Snapshot to summarize (`report`).
    pub snapshot: Option<PathBuf>,
    /// Write the pruned corpus (and `<stem>.vocab.txt`) here after ingest.
    pub export_pruned: Option<PathBuf>,
    pub top_terms: usize,
    pub outdir: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

/// One parsed `key = value` occurrence.
struct RawValue {
    line: usize,
    value: String,
}

struct RawConfig(BTreeMap<String, RawValue>);

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 'key = value', got '{trimmed}'"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty key".into(),
                });
            }
            if let Some(prev) = map.insert(key.clone(), RawValue { line, value }) {
                return Err(Error::config(format!(
                    "duplicate key '{key}' (lines {} and {line})",
                    prev.line
                )));
            }
        }
        Ok(RawConfig(map))
    }

    fn take(&mut self, key: &str) -> Option<RawValue> {
        self.0.remove(key)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw.value.parse::<T>().map(Some).map_err(|_| {
                Error::config(format!(
                    "key '{key}' (line {}): cannot parse '{}'",
                    raw.line, raw.value
                ))
            }),
        }
    }

    fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => match raw.value.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                other => Err(Error::config(format!(
                    "key '{key}' (line {}): expected true or false, got '{other}'",
                    raw.line
                ))),
            },
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((key, raw)) = self.0.into_iter().next() {
            return Err(Error::config(format!(
                "unknown key '{key}' (line {})",
                raw.line
            )));
        }
        Ok(())
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>> = s
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("a_phi_grid: cannot parse '{}'", tok.trim())))
        })
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(Error::config("a_phi_grid must not be empty"));
    }
    for &v in &vals {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(format!(
                "a_phi_grid values must be positive, got {v}"
            )));
        }
    }
    Ok(vals)
}

impl ExperimentConfig {
    /// Parse a config file and fold in the CLI overrides.
    pub fn load(path: &Path, over: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::resolve(&text, over)
    }

    pub fn resolve(text: &str, over: &Overrides) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;

        // Variant and K first: the per-variant defaults hang off them.
        let variant_str = match &over.variant {
            Some(v) => v.clone(),
            None => raw
                .take("variant")
                .map(|r| r.value)
                .unwrap_or_else(|| "bgg".to_string()),
        };
        if over.variant.is_some() {
            // A CLI override still consumes (and discards) the file's key.
            raw.take("variant");
        }
        let variant = Variant::parse(&variant_str)?;
        let k = raw.take_parsed::<usize>("k")?.unwrap_or(400);

        let mut chain = ChainConfig::new(variant, k);
        if let Some(v) = raw.take_parsed("n_iterations")? {
            chain.n_iterations = v;
        }
        if let Some(v) = raw.take_parsed("burn_in")? {
            chain.burn_in = v;
        }
        if let Some(v) = raw.take_parsed("thin")? {
            chain.thin = v;
        }
        if let Some(v) = raw.take_parsed("mh_stepsize")? {
            chain.mh_stepsize = v;
        }
        if let Some(v) = raw.take_parsed("mh_adapt_window")? {
            chain.mh_adapt_window = v;
        }
        if let Some(v) = raw.take_parsed("accept_lo")? {
            chain.accept_lo = v;
        }
        if let Some(v) = raw.take_parsed("accept_hi")? {
            chain.accept_hi = v;
        }
        if let Some(v) = raw.take_parsed("em_tol")? {
            chain.em_tol = v;
        }
        if let Some(v) = raw.take_bool("audit")? {
            chain.audit = v;
        }
        if let Some(v) = raw.take_parsed("c")? {
            chain.hyper.c = v;
        }
        if let Some(v) = raw.take_parsed("c0")? {
            chain.hyper.c0 = v;
        }
        if let Some(v) = raw.take_parsed("r0")? {
            chain.hyper.r0 = v;
        }
        if let Some(v) = raw.take_parsed("eps")? {
            chain.hyper.eps = v;
        }
        if let Some(v) = raw.take_parsed("a_phi")? {
            chain.hyper.a_phi = v;
        }
        if let Some(v) = raw.take_parsed("a_theta")? {
            chain.hyper.a_theta = v;
        }
        if let Some(v) = raw.take_parsed("b_phi")? {
            chain.hyper.b_phi = v;
        }
        if let Some(v) = raw.take_parsed("g_init")? {
            chain.hyper.g_init = v;
        }
        if let Some(v) = raw.take_parsed("r_fixed")? {
            chain.hyper.r_fixed = v;
        }
        if let Some(v) = raw.take_parsed("p_fixed")? {
            chain.hyper.p_fixed = v;
        }
        if let Some(v) = raw.take_bool("estimate_g")? {
            chain.hyper.estimate_g = v;
        }

        let mark_kind = raw
            .take("mark")
            .map(|r| r.value)
            .unwrap_or_else(|| "gamma".to_string());
        let mark_r = raw.take_parsed::<f64>("mark_r")?.unwrap_or(1.0);
        let mark_shape = raw.take_parsed::<f64>("mark_shape")?.unwrap_or(1.0);
        let mark_scale = raw.take_parsed::<f64>("mark_scale")?.unwrap_or(1.0);
        let mark = match mark_kind.as_str() {
            "gamma" => MarkMeasure::Gamma {
                shape: mark_shape,
                scale: mark_scale,
            },
            "point" => MarkMeasure::Point { r: mark_r },
            other => {
                return Err(Error::config(format!(
                    "mark must be 'gamma' or 'point', got '{other}'"
                )))
            }
        };

        let cfg = ExperimentConfig {
            chain,
            docword: raw.take("docword").map(|r| PathBuf::from(r.value)),
            vocab: raw.take("vocab").map(|r| PathBuf::from(r.value)),
            bow_header: raw.take_bool("bow_header")?.unwrap_or(true),
            min_doc_freq: raw.take_parsed("min_doc_freq")?.unwrap_or(5),
            split_ratio: raw.take_parsed("split_ratio")?.unwrap_or(0.8),
            replicates: raw.take_parsed("replicates")?.unwrap_or(5),
            a_phi_grid: match raw.take("a_phi_grid") {
                None => None,
                Some(r) => Some(parse_grid(&r.value)?),
            },
            sim_customers: raw.take_parsed("sim_customers")?.unwrap_or(10),
            sim_replicates: raw.take_parsed("sim_replicates")?.unwrap_or(100),
            alpha: raw.take_parsed("alpha")?.unwrap_or(1.0),
            gamma_mass: raw.take_parsed("gamma_mass")?.unwrap_or(1.0),
            mark,
            snapshot: raw.take("snapshot").map(|r| PathBuf::from(r.value)),
            export_pruned: raw.take("export_pruned").map(|r| PathBuf::from(r.value)),
            top_terms: raw.take_parsed("top_terms")?.unwrap_or(10),
            outdir: raw
                .take("outdir")
                .map(|r| PathBuf::from(r.value))
                .unwrap_or_else(|| PathBuf::from("pfa-out")),
            seed: over.seed.or(raw.take_parsed("seed")?).unwrap_or(0),
            threads: over.threads.or(raw.take_parsed("threads")?).unwrap_or(1),
        };
        raw.finish()?;
        Ok(cfg)
    }

    /// Validate the parts the given command will actually use.
    pub fn validate(&self, cmd: CommandKind) -> Result<()> {
        let needs_corpus = matches!(cmd, CommandKind::Fit | CommandKind::Eval);
        if needs_corpus {
            self.chain.validate()?;
            let Some(docword) = &self.docword else {
                return Err(Error::config("this command needs a 'docword' corpus path"));
            };
            resolvable("docword", docword)?;
            if let Some(v) = &self.vocab {
                resolvable("vocab", v)?;
            }
        }
        match cmd {
            CommandKind::Eval => {
                if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
                    return Err(Error::config(format!(
                        "split_ratio must lie in (0, 1), got {}",
                        self.split_ratio
                    )));
                }
                if self.replicates == 0 {
                    return Err(Error::config("replicates must be at least 1"));
                }
            }
            CommandKind::Simulate => {
                self.bnb_hyper().validate().map_err(|e| match e {
                    // Bad simulation settings are config mistakes here.
                    Error::Domain(m) => Error::Config(m),
                    other => other,
                })?;
            }
            CommandKind::Report => {
                let Some(snap) = &self.snapshot else {
                    return Err(Error::config("report needs a 'snapshot' path"));
                };
                resolvable("snapshot", snap)?;
                if let Some(v) = &self.vocab {
                    resolvable("vocab", v)?;
                }
            }
            CommandKind::Fit => {}
        }
        if self.threads == 0 {
            return Err(Error::config("threads must be at least 1"));
        }
        if self.top_terms == 0 {
            return Err(Error::config("top_terms must be at least 1"));
        }
        Ok(())
    }

    /// The buffet-process view of the hyperparameters (`simulate`).
    pub fn bnb_hyper(&self) -> pfa_core::bnb::BnbHyper {
        pfa_core::bnb::BnbHyper {
            c: self.chain.hyper.c,
            alpha: self.alpha,
            gamma_mass: self.gamma_mass,
            eps: self.chain.hyper.eps,
            mark: self.mark,
        }
    }

    /// Render the full resolved key set, sorted, in re-ingestible form.
    pub fn render_resolved(&self) -> String {
        let h = &self.chain.hyper;
        let mut rows: Vec<(String, String)> = vec![
            ("variant".into(), self.chain.variant.as_str().into()),
            ("k".into(), self.chain.k.to_string()),
            ("n_iterations".into(), self.chain.n_iterations.to_string()),
            ("burn_in".into(), self.chain.burn_in.to_string()),
            ("thin".into(), self.chain.thin.to_string()),
            ("mh_stepsize".into(), self.chain.mh_stepsize.to_string()),
            (
                "mh_adapt_window".into(),
                self.chain.mh_adapt_window.to_string(),
            ),
            ("accept_lo".into(), self.chain.accept_lo.to_string()),
            ("accept_hi".into(), self.chain.accept_hi.to_string()),
            ("em_tol".into(), self.chain.em_tol.to_string()),
            ("audit".into(), self.chain.audit.to_string()),
            ("c".into(), h.c.to_string()),
            ("c0".into(), h.c0.to_string()),
            ("r0".into(), h.r0.to_string()),
            ("eps".into(), h.eps.to_string()),
            ("a_phi".into(), h.a_phi.to_string()),
            ("a_theta".into(), h.a_theta.to_string()),
            ("b_phi".into(), h.b_phi.to_string()),
            ("g_init".into(), h.g_init.to_string()),
            ("r_fixed".into(), h.r_fixed.to_string()),
            ("p_fixed".into(), h.p_fixed.to_string()),
            ("estimate_g".into(), h.estimate_g.to_string()),
            ("bow_header".into(), self.bow_header.to_string()),
            ("min_doc_freq".into(), self.min_doc_freq.to_string()),
            ("split_ratio".into(), self.split_ratio.to_string()),
            ("replicates".into(), self.replicates.to_string()),
            ("sim_customers".into(), self.sim_customers.to_string()),
            ("sim_replicates".into(), self.sim_replicates.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("gamma_mass".into(), self.gamma_mass.to_string()),
            ("top_terms".into(), self.top_terms.to_string()),
            ("outdir".into(), self.outdir.display().to_string()),
            ("seed".into(), self.seed.to_string()),
            ("threads".into(), self.threads.to_string()),
        ];
        match self.mark {
            MarkMeasure::Gamma { shape, scale } => {
                rows.push(("mark".into(), "gamma".into()));
                rows.push(("mark_shape".into(), shape.to_string()));
                rows.push(("mark_scale".into(), scale.to_string()));
            }
            MarkMeasure::Point { r } => {
                rows.push(("mark".into(), "point".into()));
                rows.push(("mark_r".into(), r.to_string()));
            }
        }
        if let Some(p) = &self.docword {
            rows.push(("docword".into(), p.display().to_string()));
        }
        if let Some(p) = &self.vocab {
            rows.push(("vocab".into(), p.display().to_string()));
        }
        if let Some(p) = &self.snapshot {
            rows.push(("snapshot".into(), p.display().to_string()));
        }
        if let Some(p) = &self.export_pruned {
            rows.push(("export_pruned".into(), p.display().to_string()));
        }
        if let Some(grid) = &self.a_phi_grid {
            let joined = grid
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            rows.push(("a_phi_grid".into(), joined));
        }
        rows.sort();
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn resolvable(key: &str, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{key} path does not exist: {}",
            path.display()
        )))
    }
}
