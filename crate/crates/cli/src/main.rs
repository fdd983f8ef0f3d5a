//! Batch front end: solve, analyze, search, threshold and continuation runs
//! with reproducible JSON outputs.
//!
//! Exit codes: 0 success, 1 input error (no output written), 2 solver did
//! not converge (record still written), 3 structure invariant failed
//! (report still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hfsolve::integrals::{basis_from_json, build_tables, molecule_from_json, MoleculeSpec,
    OrthoTables};
use hfsolve::scf::{
    initial_guess, multistart_search, scf_solve, threshold_j, CriticalPointRecord, GuessMode,
    ScfOptions, StartLog, Termination,
};
use hfsolve::structure::{
    analyze, continue_path, AnalyzeOptions, ContinuationDirection, CorrectorOptions,
};

#[derive(Parser)]
#[command(name = "hfsolve", version, about = "Hartree-Fock solver and solution-set structure analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Molecule JSON file: {"nuclei":[{"Z":1.0,"pos":[x,y,z]},...],"n_electrons":N}
    #[arg(long)]
    molecule: PathBuf,
    /// Basis JSON file: {"shells":[{"center_index":0,"primitives":[{"exponent":a,"coefficient":c},...]},...]}
    #[arg(long)]
    basis: PathBuf,
    /// RNG seed; fixed seed means byte-identical outputs
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (JSON)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Residual tolerance, sqrt of the paired residual
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0.1)]
    level_shift: f64,
    #[arg(long, default_value_t = 0.3)]
    damping: f64,
}

impl SolverArgs {
    fn to_options(&self, seed: u64) -> ScfOptions {
        ScfOptions {
            max_iter: self.max_iter,
            residual_tol: self.tol,
            damping: self.damping,
            level_shift: self.level_shift,
            seed,
            ..ScfOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run SCF from the core guess and write the critical-point record
    Scf {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Orbital-energy gate for the B(eps) classification
        #[arg(long, default_value_t = 0.1)]
        eps_gate: f64,
        /// Starts used for the threshold estimate behind the classification
        #[arg(long, default_value_t = 8)]
        n_starts: usize,
    },
    /// Structure analysis of a converged record
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        /// Record JSON produced by `scf`
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps_gate: f64,
        #[arg(long, default_value_t = 8)]
        n_starts: usize,
        /// Relative singular-value threshold for the kernel decision
        #[arg(long, default_value_t = 1e-7)]
        rank_tol: f64,
        /// Continuation step length
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
    },
    /// Multistart search, deduplicated catalog plus a run log
    Search {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 8)]
        n_starts: usize,
    },
    /// Finite-basis first-threshold estimate over N-1 orbitals
    Threshold {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 8)]
        n_starts: usize,
    },
    /// Predictor-corrector continuation from a converged record
    Continue {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        record: PathBuf,
        /// "phase" for the global phase orbit, or a kernel-basis index
        #[arg(long, default_value = "phase")]
        direction: String,
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_inputs(input: &InputArgs) -> anyhow::Result<(MoleculeSpec, OrthoTables)> {
    let mol_text = std::fs::read_to_string(&input.molecule)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", input.molecule.display()))?;
    let molecule = molecule_from_json(&mol_text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", input.molecule.display()))?;
    molecule.validate()?;
    let basis_text = std::fs::read_to_string(&input.basis)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", input.basis.display()))?;
    let basis = basis_from_json(&basis_text, &molecule)
        .map_err(|e| anyhow::anyhow!("{}: {e}", input.basis.display()))?;
    let tables = build_tables(&molecule, &basis)?.orthonormalize()?;
    Ok((molecule, tables))
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_runlog(out: &Option<PathBuf>, log: &[StartLog]) -> anyhow::Result<()> {
    let mut text = String::new();
    for entry in log {
        text.push_str(&serde_json::to_string(entry)?);
        text.push('\n');
    }
    match out {
        Some(p) => {
            let mut lp = p.clone().into_os_string();
            lp.push(".runlog.jsonl");
            std::fs::write(Path::new(&lp), text)?;
        }
        None => eprint!("{text}"),
    }
    Ok(())
}

fn read_record(path: &Path) -> anyhow::Result<CriticalPointRecord> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    let rec: CriticalPointRecord =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(rec)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Scf {
            input,
            solver,
            eps_gate,
            n_starts,
        } => {
            let (molecule, tables) = read_inputs(&input)?;
            let n = molecule.n_electrons;
            let opts = solver.to_options(input.seed);
            let guess = initial_guess(&tables, n, GuessMode::Core, input.seed)?;
            let mut record = scf_solve(&tables, n, &guess, &opts)?;
            let j_hat = if n >= 2 {
                threshold_j(&tables, n - 1, n_starts, &opts)
                    .ok()
                    .map(|(t, _)| t.j_hat)
            } else {
                None
            };
            record.classify(j_hat, Some(eps_gate));
            print_summary(&record);
            write_json(&input.out, &record)?;
            if record.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Analyze {
            input,
            record,
            eps_gate,
            n_starts,
            rank_tol,
            delta,
        } => {
            let (_molecule, tables) = read_inputs(&input)?;
            let rec = read_record(&record)?;
            let opts = ScfOptions {
                seed: input.seed,
                ..ScfOptions::default()
            };
            let j_hat = if rec.n_orbitals >= 2 {
                threshold_j(&tables, rec.n_orbitals - 1, n_starts, &opts)
                    .ok()
                    .map(|(t, _)| t.j_hat)
            } else {
                None
            };
            let report = analyze(
                &rec,
                &tables,
                &AnalyzeOptions {
                    j_hat,
                    eps_gate,
                    rank_tol_rel: rank_tol,
                    delta,
                    split: None,
                },
            )?;
            println!(
                "kernel_dim={} gap={:.3e} verdict={} koopmans_max={:.3e} checks_passed={}",
                report.kernel_dim,
                report.sigma_gap,
                report.verdict,
                report.koopmans.iter().cloned().fold(0.0, f64::max),
                report.checks_passed
            );
            write_json(&input.out, &report)?;
            if report.checks_passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
        Command::Search {
            input,
            solver,
            n_starts,
        } => {
            let (molecule, tables) = read_inputs(&input)?;
            let opts = solver.to_options(input.seed);
            let (catalog, log) =
                multistart_search(&tables, molecule.n_electrons, n_starts, &opts)?;
            println!(
                "{} start(s), {} converged, {} distinct solution(s)",
                n_starts,
                log.iter().filter(|l| l.converged).count(),
                catalog.len()
            );
            for rec in &catalog.records {
                println!(
                    "  E = {:+.10}  eps = {:?}  iters = {}",
                    rec.energy.total,
                    rec.energies.eps.to_vec(),
                    rec.iterations
                );
            }
            write_json(&input.out, &catalog)?;
            write_runlog(&input.out, &log)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Threshold {
            input,
            solver,
            n_starts,
        } => {
            let (molecule, tables) = read_inputs(&input)?;
            if molecule.n_electrons < 2 {
                anyhow::bail!("threshold needs n_electrons >= 2 (estimates over N-1 orbitals)");
            }
            let opts = solver.to_options(input.seed);
            let (est, log) = threshold_j(&tables, molecule.n_electrons - 1, n_starts, &opts)?;
            println!(
                "J_hat({}) = {:+.12} over {} start(s) [finite-basis upper estimate]",
                molecule.n_electrons - 1,
                est.j_hat,
                est.n_starts
            );
            write_json(&input.out, &est)?;
            write_runlog(&input.out, &log)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Continue {
            input,
            record,
            direction,
            delta,
            steps,
            tol,
        } => {
            let (_molecule, tables) = read_inputs(&input)?;
            let rec = read_record(&record)?;
            let dir = if direction == "phase" {
                ContinuationDirection::GlobalPhase
            } else {
                let k: usize = direction
                    .parse()
                    .map_err(|_| anyhow::anyhow!("--direction must be \"phase\" or an index"))?;
                ContinuationDirection::Kernel(k)
            };
            let copts = CorrectorOptions {
                residual_tol: tol,
                ..CorrectorOptions::default()
            };
            let path = continue_path(&rec, &tables, dir, delta, steps, &copts)?;
            #[derive(Serialize)]
            struct PathPoint<'a> {
                step: usize,
                residual: f64,
                distance_from_start: f64,
                corrector_iterations: usize,
                energy: f64,
                orthogonality_residual: f64,
                orbitals: &'a hfsolve::hf_core::OrbitalSet,
                orbital_energies: Vec<f64>,
            }
            let points: Vec<PathPoint> = path
                .iter()
                .enumerate()
                .map(|(k, p)| PathPoint {
                    step: k + 1,
                    residual: p.residual,
                    distance_from_start: p.distance_from_start,
                    corrector_iterations: p.corrector_iterations,
                    energy: p.energy_total,
                    orthogonality_residual: p.orthogonality_residual,
                    orbitals: &p.orbitals,
                    orbital_energies: p.energies.eps.to_vec(),
                })
                .collect();
            for p in &points {
                println!(
                    "step {:2}: residual {:.3e}  distance {:.6}  E {:+.12}",
                    p.step, p.residual, p.distance_from_start, p.energy
                );
            }
            write_json(&input.out, &points)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_summary(record: &CriticalPointRecord) {
    let status = match record.termination {
        Termination::Converged => "converged",
        Termination::MaxIterExceeded => "max iterations exceeded",
        Termination::OscillationDetected => "oscillation detected",
    };
    println!(
        "{} after {} iteration(s): E = {:+.12}, residual = {:.3e}",
        status, record.iterations, record.energy.total, record.residual_norm
    );
    println!(
        "orbital energies: {:?}",
        record.energies.eps.to_vec()
    );
    println!(
        "orthogonality residual: {:.3e}",
        record.orthogonality_residual
    );
    if let (Some(j), Some(b)) = (
        record.classification.j_threshold,
        record.classification.below_threshold,
    ) {
        println!("basis-set gate E < J_hat(N-1) = {j:+.8}: {b}");
    }
    if let (Some(e), Some(b)) = (
        record.classification.eps_gate,
        record.classification.b_eps_member,
    ) {
        println!("basis-set gate all eps_i < -{e}: {b}");
    }
}
