//! Experiment orchestration: configs, sweeps, lemma checks and the CLI.

pub mod cli;
pub mod config;
pub mod lemmas;
pub mod sweep;

pub use cli::run_cli;
pub use config::{alpha_star, c_n, AlphaStar, ExperimentConfig, PotentialSpec};
pub use lemmas::{run_lemma_checks, CheckOutcome, CheckStatus, LemmaReport};
pub use sweep::{run_localization_sweep, run_phase_sweep, write_csv, LocalizationRow, Regime, SweepRow};
