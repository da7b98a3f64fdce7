//! The `pam` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{c_n, ExperimentConfig, PotentialSpec};
use super::lemmas::run_lemma_checks;
use super::sweep::{run_localization_sweep, run_phase_sweep, write_csv};
use crate::error::{PamError, Result};
use crate::evolution::{default_tracked, write_growth_csv, EvolutionState, Evolver, Method};
use crate::fkmc::{estimate_endpoint, estimate_total_mass};
use crate::potential::PotentialField;
use crate::spectral::principal_eig_with_gap;

#[derive(Parser, Debug)]
#[command(name = "pam", version, about = "Parabolic Anderson model on the hypercube")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a potential field and write it as JSON.
    Sample(Common),
    /// Principal eigenpair with zero boundary on the top-l set minus x_i.
    Eig {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        i: usize,
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// Include the eigenvector in the output.
        #[arg(long)]
        with_vector: bool,
    },
    /// Evolve the equation and write tracked observables as CSV.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Output times, increasing.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
        times: Vec<f64>,
        /// Start from the delta at this potential rank instead of flat data.
        #[arg(long)]
        from_rank: Option<usize>,
    },
    /// Feynman-Kac Monte Carlo estimate.
    Fk {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Potential rank of the starting vertex.
        #[arg(long, default_value_t = 1)]
        start_rank: usize,
        /// Estimate v(t, x, y) at this rank's vertex instead of the total mass.
        #[arg(long)]
        end_rank: Option<usize>,
    },
    /// Growth phase sweep over seeds, ranks and the alpha grid.
    SweepGrowth(Common),
    /// Localization sweep from delta initial data.
    SweepLocalization(Common),
    /// Numerical lemma checks; exits 1 when any check fails.
    CheckLemmas(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; defaults to the configured path or stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Omit the generation timestamp from CSV headers.
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    /// rem, coupled-rem, coupled-exponential, custom-tail:<p>, flat:<v>
    #[arg(long)]
    potential: Option<String>,
    /// Single seed; shorthand for `--seeds s`.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    alpha_relative: Option<bool>,
    #[arg(long)]
    eig_tol: Option<f64>,
    #[arg(long)]
    evolve_tol: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lemma_ns: Option<Vec<usize>>,
    #[arg(long)]
    spectral_bound_n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    spectral_bound_times: Option<Vec<f64>>,
    #[arg(long)]
    growth_csv: Option<PathBuf>,
    #[arg(long)]
    localization_csv: Option<PathBuf>,
    #[arg(long)]
    lemma_report: Option<PathBuf>,
}

/// Config file, then `PAM_SEED`, then flags.
fn resolve(c: &Common, env_seed: Option<String>) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| {
            PamError::InvalidArgument(format!("cannot load config {}: {e}", p.display()))
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = env_seed {
        let seed = s
            .trim()
            .parse()
            .map_err(|_| PamError::InvalidArgument(format!("PAM_SEED={s:?} is not an integer")))?;
        cfg.seeds = vec![seed];
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = &c.$f { cfg.$f = v.clone(); } )* };
    }
    set!(
        n, kappa, seeds, ranks, alpha_grid, alpha_relative, eig_tol, evolve_tol, lemma_ns,
        spectral_bound_n, spectral_bound_times, growth_csv, localization_csv, lemma_report
    );
    if let Some(s) = c.seed {
        cfg.seeds = vec![s];
    }
    if let Some(p) = &c.potential {
        cfg.potential = PotentialSpec::parse(p)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = open(path)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn first_field(cfg: &ExperimentConfig) -> Result<PotentialField> {
    cfg.potential.sample(cfg.n, cfg.seeds[0])
}

fn where_to(p: Option<&Path>) -> String {
    p.map_or_else(|| "stdout".to_string(), |p| p.display().to_string())
}

/// Runs one command and returns the exit code to use on success.
fn execute(cmd: Command, env_seed: Option<String>) -> std::result::Result<i32, (i32, PamError)> {
    let usage = |e| (2, e);
    let failed = |e| (1, e);
    match cmd {
        Command::Sample(c) => {
            let cfg = resolve(&c, env_seed).map_err(usage)?;
            let f = first_field(&cfg).map_err(failed)?;
            let out = c.output.as_deref();
            write_text(out, &f.to_json().map_err(failed)?).map_err(failed)?;
            eprintln!(
                "sample: n = {}, seed = {}, max xi = {:.6} -> {}",
                f.n(),
                f.seed(),
                f.max_value(),
                where_to(out)
            );
        }
        Command::Eig { common: c, i, l, with_vector } => {
            let cfg = resolve(&c, env_seed).map_err(usage)?;
            let f = first_field(&cfg).map_err(failed)?;
            let r = principal_eig_with_gap(cfg.kappa, &f, i, l, cfg.eig_tol).map_err(failed)?;
            let out = c.output.as_deref();
            write_text(out, &r.to_json(with_vector).map_err(failed)?).map_err(failed)?;
            eprintln!(
                "eig: lambda_({i},{l}) = {:.12}, gap = {:.6}, residual = {:.2e} -> {}",
                r.lambda,
                r.gap.unwrap_or(f64::NAN),
                r.residual,
                where_to(out)
            );
        }
        Command::Evolve { common: c, times, from_rank } => {
            let cfg = resolve(&c, env_seed).map_err(usage)?;
            let f = first_field(&cfg).map_err(failed)?;
            let (initial, extra) = match from_rank {
                Some(k) if k == 0 || k > f.values().len() => {
                    return Err(usage(PamError::InvalidArgument(format!("rank {k} out of range"))))
                }
                Some(k) => {
                    let y = f.vertex_of_rank(k);
                    (EvolutionState::delta(f.n(), y), vec![y])
                }
                None => (EvolutionState::flat(f.n()), vec![]),
            };
            let ev = Evolver::new(cfg.kappa, &f, Method::Auto, cfg.evolve_tol).map_err(failed)?;
            let recs = ev
                .records(initial, &times, &default_tracked(&f, &extra))
                .map_err(failed)?;
            let out = c.output.as_deref();
            let alpha = times.last().map_or(0.0, |t| t / c_n(f.n()));
            let w = open(out).map_err(failed)?;
            write_growth_csv(w, &recs, &f, alpha).map_err(failed)?;
            let last = recs.last();
            eprintln!(
                "evolve: t = {}, log total mass = {:.6} -> {}",
                last.map_or(0.0, |r| r.t),
                last.map_or(f64::NAN, |r| r.log_total_mass),
                where_to(out)
            );
        }
        Command::Fk {
            common: c,
            t,
            samples,
            start_rank,
            end_rank,
        } => {
            let cfg = resolve(&c, env_seed).map_err(usage)?;
            let f = first_field(&cfg).map_err(failed)?;
            let size = f.values().len();
            for k in std::iter::once(start_rank).chain(end_rank) {
                if k == 0 || k > size {
                    return Err(usage(PamError::InvalidArgument(format!("rank {k} out of range"))));
                }
            }
            let y = f.vertex_of_rank(start_rank);
            let est = match end_rank {
                None => estimate_total_mass(y, t, cfg.kappa, &f, samples, cfg.seeds[0]),
                Some(k) => estimate_endpoint(f.vertex_of_rank(k), y, t, cfg.kappa, &f, samples, cfg.seeds[0]),
            }
            .map_err(failed)?;
            let out = c.output.as_deref();
            write_text(out, &est.to_json().map_err(failed)?).map_err(failed)?;
            eprintln!(
                "fk: {} = {:.6e} +- {:.2e} ({} walks) -> {}",
                est.target,
                est.mean,
                est.std_error,
                est.n_samples,
                where_to(out)
            );
        }
        Command::SweepGrowth(c) => {
            let cfg = resolve(&c, env_seed).map_err(usage)?;
            let rows = run_phase_sweep(&cfg).map_err(failed)?;
            let path = c.output.clone().unwrap_or_else(|| cfg.growth_csv.clone());
            write_csv(open(Some(&path)).map_err(failed)?, &rows, !c.no_timestamp).map_err(failed)?;
            let errors = rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!(
                "sweep-growth: {} rows ({errors} error rows) -> {}",
                rows.len(),
                path.display()
            );
        }
        Command::SweepLocalization(c) => {
            let cfg = resolve(&c, env_seed).map_err(usage)?;
            let rows = run_localization_sweep(&cfg).map_err(failed)?;
            let path = c.output.clone().unwrap_or_else(|| cfg.localization_csv.clone());
            write_csv(open(Some(&path)).map_err(failed)?, &rows, !c.no_timestamp).map_err(failed)?;
            let errors = rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!(
                "sweep-localization: {} rows ({errors} error rows) -> {}",
                rows.len(),
                path.display()
            );
        }
        Command::CheckLemmas(c) => {
            let cfg = resolve(&c, env_seed).map_err(usage)?;
            let report = run_lemma_checks(&cfg).map_err(failed)?;
            let path = c.output.clone().unwrap_or_else(|| cfg.lemma_report.clone());
            write_text(Some(&path), &report.to_json().map_err(failed)?).map_err(failed)?;
            if report.passed {
                eprintln!("check-lemmas: {} checks passed -> {}", report.checks.len(), path.display());
            } else {
                eprintln!(
                    "check-lemmas: FAILED {} -> {}",
                    report.failed_checks.join(", "),
                    path.display()
                );
                return Ok(1);
            }
        }
    }
    Ok(0)
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code: 0 on success, 1 on a failed check or a
/// runtime error, 2 on a usage or config error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, std::env::var("PAM_SEED").ok()) {
        Ok(code) => code,
        Err((code, e)) => {
            eprintln!("pam: error: {e}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(args: &[&str]) -> Common {
        let mut full = vec!["pam", "sample"];
        full.extend_from_slice(args);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Sample(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_beat_env_which_beats_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"n": 9, "seeds": [1, 2, 3], "kappa": 0.5}"#).unwrap();
        let path = p.to_str().unwrap();
        let cfg = resolve(&common(&["--config", path]), None).unwrap();
        assert_eq!((cfg.n, cfg.seeds.clone(), cfg.kappa), (9, vec![1, 2, 3], 0.5));
        let cfg = resolve(&common(&["--config", path]), Some("7".into())).unwrap();
        assert_eq!(cfg.seeds, vec![7]);
        let cfg = resolve(&common(&["--config", path, "--seed", "4", "--n", "6"]), Some("7".into())).unwrap();
        assert_eq!((cfg.n, cfg.seeds), (6, vec![4]));
    }

    #[test]
    fn list_flags_split_on_commas() {
        let cfg = resolve(&common(&["--alpha-grid", "0.5,1,2", "--ranks", "2,3"]), None).unwrap();
        assert_eq!(cfg.alpha_grid, vec![0.5, 1.0, 2.0]);
        assert_eq!(cfg.ranks, vec![2, 3]);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_cli(["pam", "frobnicate"]), 2);
        assert_eq!(run_cli(["pam", "sample", "--bogus"]), 2);
        assert_eq!(run_cli(["pam", "sample", "--config", "/nonexistent/c.json"]), 2);
        assert_eq!(run_cli(["pam", "sample", "--potential", "pareto"]), 2);
    }
}
