//! Critical-point search: Roothaan-style fixed-point iteration with linear
//! density damping and an annealed level shift, a multistart driver with
//! gauge-aware deduplication, and the finite-basis estimate of the first
//! energy threshold.

use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hf_core::{
    self, density, energy, residual_f, residual_norm, EnergyBreakdown, OrbitalEnergies,
    OrbitalSet, FEASIBILITY_TOL,
};
use crate::integrals::OrthoTables;
use crate::linalg;
use crate::C64;

#[derive(Debug, Error)]
pub enum ScfError {
    #[error("requested {n} orbitals but the basis has only {n_basis} functions")]
    TooManyOrbitals { n: usize, n_basis: usize },
    #[error("guess has {guess} basis functions but the tables have {tables}")]
    BasisMismatch { guess: usize, tables: usize },
    #[error("initial guess is not feasible: {0}")]
    InfeasibleGuess(#[from] hf_core::HfError),
    #[error("invalid options: {0}")]
    BadOptions(String),
    #[error("no start converged out of {n_starts}")]
    NoConvergedStart { n_starts: usize },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScfOptions {
    pub max_iter: usize,
    /// Convergence threshold on sqrt(<<F, F>>).
    pub residual_tol: f64,
    /// Threshold for the energy 2-cycle (oscillation) detector.
    pub energy_tol: f64,
    /// Linear density mixing weight on the previous density, in [0, 1).
    pub damping: f64,
    /// Level shift applied to the virtual space, annealed to zero once the
    /// residual drops below 1e-4.
    pub level_shift: f64,
    pub seed: u64,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions {
            max_iter: 500,
            residual_tol: 1e-9,
            energy_tol: 1e-12,
            damping: 0.3,
            level_shift: 0.1,
            seed: 0,
        }
    }
}

impl ScfOptions {
    pub fn validate(&self) -> Result<(), ScfError> {
        if !(self.residual_tol > 0.0) || !(self.energy_tol > 0.0) {
            return Err(ScfError::BadOptions("tolerances must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(ScfError::BadOptions(format!(
                "damping {} outside [0,1)",
                self.damping
            )));
        }
        if self.level_shift < 0.0 {
            return Err(ScfError::BadOptions("level shift must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterExceeded,
    OscillationDetected,
}

/// Gate flags evaluated against the finite-basis threshold estimate; both
/// are basis-set gates, not statements about the exact infimum.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Classification {
    pub j_threshold: Option<f64>,
    pub below_threshold: Option<bool>,
    pub eps_gate: Option<f64>,
    pub b_eps_member: Option<bool>,
}

/// A converged (or best-effort) critical point with its audit data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPointRecord {
    pub n_basis: usize,
    pub n_orbitals: usize,
    pub orbitals: OrbitalSet,
    pub energies: OrbitalEnergies,
    pub energy: EnergyBreakdown,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub orthogonality_residual: f64,
    /// Boundary eigenvalue-degeneracy seen by the aufbau selection in the
    /// final iteration; reported, never resolved physically.
    pub aufbau_degenerate: bool,
    pub classification: Classification,
}

impl CriticalPointRecord {
    /// Dedup key: energy rounded to 1e-8 and sorted orbital energies rounded
    /// to 1e-6. Two records additionally match only if their density
    /// matrices are close in Frobenius norm, which quotients out the gauge.
    pub fn dedup_key(&self) -> (i64, Vec<i64>) {
        let e = (self.energy.total * 1e8).round() as i64;
        let mut eps: Vec<i64> = self
            .energies
            .eps
            .iter()
            .map(|x| (x * 1e6).round() as i64)
            .collect();
        eps.sort();
        (e, eps)
    }

    pub fn density_distance(&self, other: &CriticalPointRecord) -> f64 {
        let pa = density(&self.orbitals).p;
        let pb = density(&other.orbitals).p;
        (&pa - &pb).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn same_solution(&self, other: &CriticalPointRecord) -> bool {
        self.dedup_key() == other.dedup_key() && self.density_distance(other) <= 1e-5
    }

    pub fn classify(&mut self, j_threshold: Option<f64>, eps_gate: Option<f64>) {
        self.classification.j_threshold = j_threshold;
        self.classification.below_threshold = j_threshold.map(|j| self.energy.total < j);
        self.classification.eps_gate = eps_gate;
        self.classification.b_eps_member =
            eps_gate.map(|e| self.energies.eps.iter().all(|&x| x < -e));
    }
}

/// Deduplicated converged records, sorted by energy.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolutionCatalog {
    pub records: Vec<CriticalPointRecord>,
}

impl SolutionCatalog {
    /// Insert keeping the catalog deduplicated; returns true when the record
    /// was genuinely new.
    pub fn insert(&mut self, rec: CriticalPointRecord) -> bool {
        if self.records.iter().any(|r| r.same_solution(&rec)) {
            return false;
        }
        self.records.push(rec);
        self.records.sort_by(|a, b| {
            a.energy
                .total
                .partial_cmp(&b.energy.total)
                .unwrap()
                .then(a.iterations.cmp(&b.iterations))
        });
        true
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Finite-basis estimate of the first energy threshold: the minimum
/// converged energy over the multistart — an upper bound for the basis-set
/// infimum, labeled as such in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub j_hat: f64,
    pub n_starts: usize,
    pub best: CriticalPointRecord,
}

/// One line of the multistart run log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartLog {
    pub seed: u64,
    pub converged: bool,
    #[serde(rename = "E")]
    pub energy: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuessMode {
    Core,
    Random,
}

/// Lowest-N eigenvectors of h, optionally rotated by a seeded random unitary
/// and seeded per-orbital phases. Always orthonormal.
pub fn initial_guess(
    tables: &OrthoTables,
    n_orbitals: usize,
    mode: GuessMode,
    seed: u64,
) -> Result<OrbitalSet, ScfError> {
    let nb = tables.n_basis;
    if n_orbitals > nb {
        return Err(ScfError::TooManyOrbitals {
            n: n_orbitals,
            n_basis: nb,
        });
    }
    let mut c = Array2::<C64>::zeros((nb, n_orbitals));
    for i in 0..n_orbitals {
        for mu in 0..nb {
            c[(mu, i)] = C64::new(tables.h_eigenvectors[(mu, i)], 0.0);
        }
    }
    if mode == GuessMode::Random {
        let mut rng = StdRng::seed_from_u64(seed);
        let u = random_unitary(nb, &mut rng);
        c = u.dot(&c);
        for i in 0..n_orbitals {
            let th = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
            let ph = C64::new(th.cos(), th.sin());
            for mu in 0..nb {
                c[(mu, i)] *= ph;
            }
        }
    }
    Ok(OrbitalSet::new(c))
}

fn random_unitary(n: usize, rng: &mut StdRng) -> Array2<C64> {
    let mut a = Array2::<C64>::zeros((n, n));
    for v in a.iter_mut() {
        *v = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    // modified Gram-Schmidt; deterministic for a fixed seed
    for j in 0..n {
        for k in 0..j {
            let d: C64 = (0..n).map(|r| a[(r, k)].conj() * a[(r, j)]).sum();
            for r in 0..n {
                let akr = a[(r, k)];
                a[(r, j)] -= d * akr;
            }
        }
        let nrm: f64 = (0..n).map(|r| a[(r, j)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            a[(r, j)] /= nrm;
        }
    }
    a
}

/// Energy 2-cycle detector: flags oscillation once the energy returns to the
/// value from two iterations ago (within `energy_tol`) while still moving
/// between consecutive iterations, for `persistence` iterations in a row.
pub struct OscillationDetector {
    history: Vec<f64>,
    energy_tol: f64,
    persistence: usize,
    streak: usize,
}

impl OscillationDetector {
    pub fn new(energy_tol: f64, persistence: usize) -> Self {
        OscillationDetector {
            history: Vec::new(),
            energy_tol,
            persistence,
            streak: 0,
        }
    }

    pub fn push(&mut self, e: f64) -> bool {
        self.history.push(e);
        let n = self.history.len();
        if n >= 3 {
            let two_cycle = (self.history[n - 1] - self.history[n - 3]).abs() <= self.energy_tol
                && (self.history[n - 1] - self.history[n - 2]).abs() > 10.0 * self.energy_tol;
            self.streak = if two_cycle { self.streak + 1 } else { 0 };
        }
        self.streak >= self.persistence
    }
}

/// Aufbau selection with a deterministic tie-break: within a degenerate group
/// at the occupation boundary (gap < 1e-10), prefer eigenvectors with the
/// largest overlap onto the previous occupied span, then lexicographic index.
fn select_occupied(
    vals: &Array1<f64>,
    vecs: &Array2<C64>,
    n_occ: usize,
    prev: &OrbitalSet,
) -> (Array2<C64>, bool) {
    let nb = vecs.nrows();
    let ntot = vals.len();
    let mut chosen: Vec<usize> = (0..n_occ).collect();
    let mut degenerate = false;
    if n_occ < ntot {
        let boundary = vals[n_occ - 1];
        let group: Vec<usize> = (0..ntot)
            .filter(|&k| (vals[k] - boundary).abs() < 1e-10)
            .collect();
        if group.iter().any(|&k| k >= n_occ) {
            degenerate = true;
            let below: Vec<usize> = (0..ntot)
                .filter(|&k| vals[k] < boundary - 1e-10)
                .collect();
            let want = n_occ - below.len();
            // score = squared norm of the projection onto the previous occupied span
            let mut scored: Vec<(f64, usize)> = group
                .iter()
                .map(|&k| {
                    let mut s = 0.0;
                    for i in 0..prev.n_orbitals() {
                        let mut d = C64::new(0.0, 0.0);
                        for mu in 0..nb {
                            d += prev.c[(mu, i)].conj() * vecs[(mu, k)];
                        }
                        s += d.norm_sqr();
                    }
                    (s, k)
                })
                .collect();
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            chosen = below;
            chosen.extend(scored.iter().take(want).map(|&(_, k)| k));
            chosen.sort();
        }
    }
    let mut c = Array2::<C64>::zeros((nb, n_occ));
    for (dst, &src) in chosen.iter().enumerate() {
        for mu in 0..nb {
            c[(mu, dst)] = vecs[(mu, src)];
        }
    }
    (c, degenerate)
}

/// Fixed-point SCF from a feasible guess. Always returns a record; the
/// `termination` field distinguishes convergence from iteration-limit or
/// oscillation exits, which keep the best iterate.
pub fn scf_solve(
    tables: &OrthoTables,
    n_orbitals: usize,
    guess: &OrbitalSet,
    opts: &ScfOptions,
) -> Result<CriticalPointRecord, ScfError> {
    opts.validate()?;
    if n_orbitals > tables.n_basis {
        return Err(ScfError::TooManyOrbitals {
            n: n_orbitals,
            n_basis: tables.n_basis,
        });
    }
    if guess.n_basis() != tables.n_basis {
        return Err(ScfError::BasisMismatch {
            guess: guess.n_basis(),
            tables: tables.n_basis,
        });
    }
    guess.require_feasible(FEASIBILITY_TOL)?;
    let nb = tables.n_basis;
    let eye = Array2::<C64>::eye(nb);

    let mut current = guess.clone();
    let mut p_mix = density(&current).p;
    let mut shift = opts.level_shift;
    let mut detector = OscillationDetector::new(opts.energy_tol, 50);
    let mut best: Option<(f64, CriticalPointRecord)> = None;
    let mut termination = Termination::MaxIterExceeded;
    let mut iterations = opts.max_iter;
    let mut degenerate_last = false;

    for it in 0..opts.max_iter {
        let hc = tables.h.mapv(|x| C64::new(x, 0.0));
        let f_mix = &hc + &hf_core::coulomb_matrix(&tables.eri, &p_mix)
            - &hf_core::exchange_matrix(&tables.eri, &p_mix);
        let f_work = if shift > 0.0 {
            let p_proj = density(&current).p;
            &f_mix + &((&eye - &p_proj) * C64::new(shift, 0.0))
        } else {
            f_mix.clone()
        };
        let (vals, vecs) = linalg::eigh(&f_work)?;
        let (c, degen) = select_occupied(&vals, &vecs, n_orbitals, &current);
        degenerate_last = degen;
        current = OrbitalSet::new(c);

        let eps = hf_core::orbital_energies_from(&current, tables)
            .map_err(ScfError::InfeasibleGuess)?;
        let res = residual_f(&current, &eps, tables);
        let rnorm = residual_norm(&res);
        let ebd = energy(&current, tables);

        let better = best.as_ref().map_or(true, |(r, _)| rnorm < *r);
        if better {
            best = Some((
                rnorm,
                make_record(&current, eps.clone(), ebd.clone(), rnorm, it + 1, degen),
            ));
        }

        if rnorm <= opts.residual_tol {
            termination = Termination::Converged;
            iterations = it + 1;
            break;
        }
        if rnorm < 1e-4 {
            shift = 0.0;
        }
        if detector.push(ebd.total) {
            termination = Termination::OscillationDetected;
            iterations = it + 1;
            break;
        }
        let p_new = density(&current).p;
        p_mix = &p_new * C64::new(1.0 - opts.damping, 0.0)
            + &p_mix * C64::new(opts.damping, 0.0);
    }

    let (_, mut record) = best.expect("at least one iteration ran");
    record.termination = termination;
    record.converged = termination == Termination::Converged
        && record.residual_norm <= opts.residual_tol
        && record.orbitals.norm_deviation() <= 1e-9;
    if termination == Termination::Converged {
        record.iterations = iterations;
    }
    record.aufbau_degenerate = degenerate_last || record.aufbau_degenerate;
    Ok(record)
}

fn make_record(
    orbitals: &OrbitalSet,
    energies: OrbitalEnergies,
    energy: EnergyBreakdown,
    residual: f64,
    iterations: usize,
    degenerate: bool,
) -> CriticalPointRecord {
    CriticalPointRecord {
        n_basis: orbitals.n_basis(),
        n_orbitals: orbitals.n_orbitals(),
        orbitals: orbitals.clone(),
        energies,
        energy,
        residual_norm: residual,
        iterations,
        converged: false,
        termination: Termination::MaxIterExceeded,
        orthogonality_residual: orbitals.orthogonality_residual(),
        aufbau_degenerate: degenerate,
        classification: Classification::default(),
    }
}

/// Multistart driver. Start 0 uses the core guess, the rest seeded random
/// rotations. Starts run in parallel but are individually deterministic;
/// the merge is order-independent because insertion happens in start order
/// and the catalog sort is stable.
pub fn multistart_search(
    tables: &OrthoTables,
    n_orbitals: usize,
    n_starts: usize,
    opts: &ScfOptions,
) -> Result<(SolutionCatalog, Vec<StartLog>), ScfError> {
    if n_starts == 0 {
        return Err(ScfError::BadOptions("n_starts must be >= 1".into()));
    }
    let results: Vec<Result<(u64, CriticalPointRecord), ScfError>> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let seed = opts.seed.wrapping_add(k as u64);
            let guess = if k == 0 {
                initial_guess(tables, n_orbitals, GuessMode::Core, seed)?
            } else {
                initial_guess(tables, n_orbitals, GuessMode::Random, seed)?
            };
            let rec = scf_solve(tables, n_orbitals, &guess, opts)?;
            Ok((seed, rec))
        })
        .collect();

    let mut catalog = SolutionCatalog::default();
    let mut log = Vec::with_capacity(n_starts);
    for r in results {
        let (seed, rec) = r?;
        log.push(StartLog {
            seed,
            converged: rec.converged,
            energy: rec.energy.total,
            iterations: rec.iterations,
            residual: rec.residual_norm,
        });
        if rec.converged {
            catalog.insert(rec);
        }
    }
    Ok((catalog, log))
}

/// Finite-basis first-threshold estimate over `n_minus_one` orbitals,
/// together with the per-start run log.
pub fn threshold_j(
    tables: &OrthoTables,
    n_minus_one: usize,
    n_starts: usize,
    opts: &ScfOptions,
) -> Result<(ThresholdEstimate, Vec<StartLog>), ScfError> {
    if n_minus_one < 1 {
        return Err(ScfError::BadOptions(
            "threshold needs at least one orbital".into(),
        ));
    }
    let (catalog, log) = multistart_search(tables, n_minus_one, n_starts, opts)?;
    let best = catalog
        .records
        .first()
        .cloned()
        .ok_or(ScfError::NoConvergedStart { n_starts })?;
    Ok((
        ThresholdEstimate {
            j_hat: best.energy.total,
            n_starts,
            best,
        },
        log,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::{build_tables, BasisSet, MoleculeSpec, Nucleus, Primitive, Shell};

    pub(crate) fn h2_tables() -> OrthoTables {
        let molecule = MoleculeSpec::new(
            vec![
                Nucleus { charge: 1.0, position: [0.0, 0.0, -0.7] },
                Nucleus { charge: 1.0, position: [0.0, 0.0, 0.7] },
            ],
            2,
        )
        .unwrap();
        let mk = |alpha: f64, z: f64| Shell {
            center: [0.0, 0.0, z],
            primitives: vec![Primitive { exponent: alpha, coefficient: 1.0 }],
        };
        let basis =
            BasisSet::new(vec![mk(1.2, -0.7), mk(0.3, -0.7), mk(1.2, 0.7), mk(0.3, 0.7)]).unwrap();
        build_tables(&molecule, &basis).unwrap().orthonormalize().unwrap()
    }

    pub(crate) fn he_like_tables(z: f64) -> OrthoTables {
        let molecule = MoleculeSpec::new(
            vec![Nucleus { charge: z, position: [0.0; 3] }],
            2,
        )
        .unwrap();
        let zz = z * z;
        let basis = BasisSet::new(
            [1.0, 0.25, 0.0625, 0.015625]
                .iter()
                .map(|&e| Shell {
                    center: [0.0; 3],
                    primitives: vec![Primitive { exponent: zz * e, coefficient: 1.0 }],
                })
                .collect(),
        )
        .unwrap();
        build_tables(&molecule, &basis).unwrap().orthonormalize().unwrap()
    }

    #[test]
    fn core_guess_one_orbital_is_ground_state() {
        let t = h2_tables();
        let g = initial_guess(&t, 1, GuessMode::Core, 0).unwrap();
        // lowest eigenvector of h up to sign
        let mut overlap = C64::new(0.0, 0.0);
        for mu in 0..t.n_basis {
            overlap += g.c[(mu, 0)].conj() * C64::new(t.h_eigenvectors[(mu, 0)], 0.0);
        }
        assert!((overlap.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn random_guess_is_orthonormal_and_deterministic() {
        let t = h2_tables();
        let a = initial_guess(&t, 2, GuessMode::Random, 77).unwrap();
        let b = initial_guess(&t, 2, GuessMode::Random, 77).unwrap();
        assert!(a.orthogonality_residual() <= 1e-12);
        assert!(a.norm_deviation() <= 1e-12);
        for (x, y) in a.c.iter().zip(b.c.iter()) {
            assert_eq!(x, y);
        }
        assert!(matches!(
            initial_guess(&t, 9, GuessMode::Core, 0),
            Err(ScfError::TooManyOrbitals { .. })
        ));
    }

    #[test]
    fn one_electron_problem_converges_immediately() {
        let t = h2_tables();
        let opts = ScfOptions::default();
        let guess = initial_guess(&t, 1, GuessMode::Core, 0).unwrap();
        let rec = scf_solve(&t, 1, &guess, &opts).unwrap();
        assert!(rec.converged);
        assert!(rec.iterations <= 2);
        assert!((rec.energy.total - t.h_eigenvalues[0]).abs() <= 1e-10);
        assert!((rec.energies.eps[0] - t.h_eigenvalues[0]).abs() <= 1e-10);
    }

    #[test]
    fn h2_model_converges_from_core_guess() {
        let t = h2_tables();
        let opts = ScfOptions::default();
        let guess = initial_guess(&t, 2, GuessMode::Core, 0).unwrap();
        let rec = scf_solve(&t, 2, &guess, &opts).unwrap();
        assert!(rec.converged, "residual {}", rec.residual_norm);
        assert!(rec.residual_norm <= 1e-9);
        assert!(rec.orthogonality_residual <= 1e-9);
        // e agrees with the occupied eigenvalues of the final Fock operator
        let f = crate::hf_core::fock(&rec.orbitals, &t);
        let (vals, _) = linalg::eigh(&f).unwrap();
        for i in 0..2 {
            assert!(
                vals.iter().any(|v| (v - rec.energies.eps[i]).abs() <= 1e-9),
                "eps {} missing from Fock spectrum",
                rec.energies.eps[i]
            );
        }
    }

    #[test]
    fn level_shift_does_not_move_the_fixed_point() {
        let t = h2_tables();
        let guess = initial_guess(&t, 2, GuessMode::Core, 0).unwrap();
        let rec_a = scf_solve(&t, 2, &guess, &ScfOptions::default()).unwrap();
        let rec_b = scf_solve(
            &t,
            2,
            &guess,
            &ScfOptions {
                level_shift: 0.0,
                ..ScfOptions::default()
            },
        )
        .unwrap();
        assert!(rec_a.converged && rec_b.converged);
        assert!(rec_a.same_solution(&rec_b));
    }

    #[test]
    fn max_iter_returns_best_iterate() {
        let t = h2_tables();
        let guess = initial_guess(&t, 2, GuessMode::Random, 5).unwrap();
        let rec = scf_solve(
            &t,
            2,
            &guess,
            &ScfOptions {
                max_iter: 1,
                ..ScfOptions::default()
            },
        )
        .unwrap();
        assert!(!rec.converged);
        assert_eq!(rec.termination, Termination::MaxIterExceeded);
        assert!(rec.residual_norm.is_finite());
    }

    #[test]
    fn oscillation_detector_flags_two_cycles() {
        let mut d = OscillationDetector::new(1e-12, 50);
        let mut fired = false;
        for k in 0..130 {
            let e = if k % 2 == 0 { 1.0 } else { 2.0 };
            if d.push(e) {
                fired = true;
                break;
            }
        }
        assert!(fired);
        let mut d2 = OscillationDetector::new(1e-12, 50);
        for k in 0..200 {
            assert!(!d2.push(1.0 / (k + 1) as f64));
        }
    }

    #[test]
    fn multistart_dedup_and_determinism() {
        let t = h2_tables();
        let opts = ScfOptions::default();
        let (cat1, log1) = multistart_search(&t, 2, 1, &opts).unwrap();
        assert_eq!(cat1.len(), 1);
        assert_eq!(log1.len(), 1);
        let (cat4a, _) = multistart_search(&t, 2, 4, &opts).unwrap();
        let (cat4b, _) = multistart_search(&t, 2, 4, &opts).unwrap();
        assert_eq!(cat4a.len(), cat4b.len());
        for (a, b) in cat4a.records.iter().zip(cat4b.records.iter()) {
            assert_eq!(a.energy.total.to_bits(), b.energy.total.to_bits());
        }
    }

    #[test]
    fn gauge_rotated_duplicate_collapses() {
        let t = h2_tables();
        let opts = ScfOptions::default();
        let guess = initial_guess(&t, 2, GuessMode::Core, 0).unwrap();
        let rec = scf_solve(&t, 2, &guess, &opts).unwrap();
        let mut rotated = rec.clone();
        let ph = C64::new(0.6f64.cos(), 0.6f64.sin());
        for mu in 0..t.n_basis {
            rotated.orbitals.c[(mu, 0)] *= ph;
        }
        let mut cat = SolutionCatalog::default();
        assert!(cat.insert(rec));
        assert!(!cat.insert(rotated));
        assert_eq!(cat.len(), 1);
    }

    #[test]
    fn threshold_one_orbital_is_ground_eigenvalue() {
        let t = h2_tables();
        let (est, log) = threshold_j(&t, 1, 3, &ScfOptions::default()).unwrap();
        assert_eq!(log.len(), 3);
        assert!((est.j_hat - t.h_eigenvalues[0]).abs() <= 1e-10);
        assert!(est.j_hat < 0.0);
        // the estimate is the minimum over every converged start
        let (catalog, _) = multistart_search(&t, 1, 3, &ScfOptions::default()).unwrap();
        for rec in &catalog.records {
            assert!(est.j_hat <= rec.energy.total + 1e-12);
        }
    }

    #[test]
    fn he_like_system_is_gate_active() {
        let t = he_like_tables(6.0);
        let guess = initial_guess(&t, 2, GuessMode::Core, 0).unwrap();
        let mut rec = scf_solve(&t, 2, &guess, &ScfOptions::default()).unwrap();
        assert!(rec.converged);
        let j1 = threshold_j(&t, 1, 2, &ScfOptions::default()).unwrap().0.j_hat;
        rec.classify(Some(j1), Some(0.1));
        assert_eq!(rec.classification.below_threshold, Some(true));
        assert_eq!(rec.classification.b_eps_member, Some(true));
        assert!(rec.energy.total <= j1 - 0.1);
    }
}
