use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Invariant identifiers an assertion may reference, with a one-line meaning.
pub const INVARIANTS: &[(&str, &str)] = &[
    ("EFF-COHERENT-EXACT", "partial trace of a coherent state equals the classical potential at every ε"),
    ("EFF-MIXTURE-RATE", "log sup-gap of a mixture decays in 1/ε at least at the configured fraction of −D"),
    ("SPEC-RESOLVENT-MONOTONE", "resolvent distance to the limit does not grow as ε halves"),
    ("SPEC-VARIATIONAL-UB", "quantum ground energy lies below the product-state trial energy"),
    ("SPEC-LOWER-FLOOR", "energies stay above σ̲(H₀) − N² Σ |λ|²/ω"),
    ("SPEC-AM-MONOTONE", "alternating minimization never raises the classical energy"),
    ("TRAP-REPRODUCTION", "partial trace of the trap state reproduces the mollified trap on the interior"),
    ("TRAP-FIELD-ENERGY", "field energy of the trap state grows strictly as ε decreases"),
    ("TRAP-RESOLVENT-DECREASE", "resolvent distance to H₀ + W decreases strictly as ε decreases"),
    ("FOCK-CCR", "‖a†_n Ψ‖² − ‖a_n Ψ‖² = ε ‖Ψ‖² below the cutoff"),
    ("FOCK-NORM-IDENTITY", "‖a†(g)Ψ‖² = ‖a(g)Ψ‖² + ε ‖g‖² ‖Ψ‖² below the cutoff"),
    ("FOCK-EST-NELSON", "‖a(g)Ψ‖ ≤ ‖ω^{−1/2} g‖ ⟨Ψ, dΓ(ω) Ψ⟩^{1/2}"),
    ("FOCK-FORM-BOUND", "|⟨Ψ, A Ψ⟩| ≤ 2 ‖g‖ ‖(dΓ(1) + 1)^{1/4} Ψ‖² for ε ≤ 1"),
    ("FOCK-DISPLACEMENT", "⟨Ξ(f), a_n Ξ(f)⟩ = f_n"),
    ("FOCK-OVERLAP", "numerical coherent overlap matches the closed form"),
    ("POL-BOUNDED-PART", "sup of the low-frequency field part below its Cauchy–Schwarz bound"),
    ("POL-FORM-BOUND", "high-frequency part form-bounded by α t + ‖z‖² C / α"),
];

pub fn is_invariant(id: &str) -> bool {
    INVARIANTS.iter().any(|(k, _)| *k == id)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(id: &str, passed: bool, detail: impl Into<String>) -> Self {
        assert!(is_invariant(id), "undocumented invariant {id}");
        Self {
            id: id.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub tags: Vec<String>,
    pub notes: Vec<String>,
    /// One map per ε, in sweep order.
    pub metrics: Vec<BTreeMap<String, f64>>,
    pub summary: BTreeMap<String, f64>,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn new(experiment: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            config_hash: config_hash(cfg),
            seed: cfg.run.seed,
            eps: cfg.sweep.eps.clone(),
            tags: Vec::new(),
            notes: Vec::new(),
            metrics: Vec::new(),
            summary: BTreeMap::new(),
            assertions: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.assertions.iter().filter(|a| !a.passed).map(|a| a.id.as_str()).collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            crate::EXIT_PASS
        } else {
            crate::EXIT_ASSERTION
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text + "\n")
    }
}

/// SHA-256 of the canonical key-value form of the resolved configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(&cfg.canonical()).expect("canonical form serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Numeric CSV with every value in `{:.12e}`.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}
