//! Predictor-corrector continuation along kernel directions and the
//! non-isolation probe. The corrector is a minimum-norm Newton iteration
//! restricted to the orthogonal complement of the kernel at the starting
//! point, the numerical shadow of the implicit-function-theorem splitting.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{
    derealify, global_phase_tangent, jacobian, kernel_basis, norm, phase_tangent, realify,
    residual_realified, KernelBasis, RealJacobian, RealLayout, StructureError, DEFAULT_RANK_TOL,
};
use crate::hf_core::{energy, OrbitalEnergies, OrbitalSet};
use crate::integrals::OrthoTables;
use crate::linalg;
use crate::scf::CriticalPointRecord;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectorOptions {
    pub residual_tol: f64,
    pub max_iter: usize,
    pub rank_tol_rel: f64,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        CorrectorOptions {
            residual_tol: 1e-9,
            max_iter: 20,
            rank_tol_rel: DEFAULT_RANK_TOL,
        }
    }
}

/// A point on the solution set: orbitals, multipliers and audit numbers.
#[derive(Debug, Clone)]
pub struct ContinuedPoint {
    pub orbitals: OrbitalSet,
    pub energies: OrbitalEnergies,
    pub residual: f64,
    pub distance_from_start: f64,
    pub corrector_iterations: usize,
    pub energy_total: f64,
    pub orthogonality_residual: f64,
}

/// Truncated-pseudoinverse solve of J dx = -F restricted to the complement
/// of `excluded` (orthonormal columns).
fn corrector_step(
    j: &RealJacobian,
    f: &Array1<f64>,
    excluded: &[Array1<f64>],
    rank_tol_rel: f64,
) -> Array1<f64> {
    let dim = f.len();
    // project the Jacobian columns onto the complement of the excluded span
    let mut jp = j.mat.clone();
    for v in excluded {
        // jp <- jp (I - v v^T)
        let jv = j.mat.dot(v);
        for r in 0..dim {
            for c in 0..dim {
                jp[(r, c)] -= jv[r] * v[c];
            }
        }
    }
    let (u, s, vt) = linalg::svd(&jp);
    let smax = s[0].max(f64::MIN_POSITIVE);
    let mut dx = Array1::<f64>::zeros(dim);
    let utf = u.t().dot(f);
    for k in 0..s.len() {
        if s[k] > rank_tol_rel * smax {
            let coef = -utf[k] / s[k];
            for r in 0..dim {
                dx[r] += coef * vt[(r, k)];
            }
        }
    }
    // keep the update inside the complement
    for v in excluded {
        let d = dx.dot(v);
        for r in 0..dim {
            dx[r] -= d * v[r];
        }
    }
    dx
}

/// One predictor-corrector step of length `delta` along `tangent` from a
/// solution point. The kernel at the starting point is excluded from the
/// correction so the step cannot slide back along the manifold.
pub fn continue_step(
    orbitals: &OrbitalSet,
    energies: &OrbitalEnergies,
    tables: &OrthoTables,
    tangent: &Array1<f64>,
    delta: f64,
    opts: &CorrectorOptions,
) -> Result<ContinuedPoint, StructureError> {
    let layout = RealLayout {
        n_basis: orbitals.n_basis(),
        n_orbitals: orbitals.n_orbitals(),
    };
    let x0 = realify(orbitals, energies);
    let r0 = norm(&residual_realified(&x0, layout, tables));
    if r0 > opts.residual_tol {
        return Err(StructureError::NotConverged {
            residual: r0,
            tol: opts.residual_tol,
        });
    }
    let j0 = jacobian(orbitals, energies, tables);
    let kb = kernel_basis(&j0, opts.rank_tol_rel);

    let mut x = &x0 + &tangent.mapv(|t| t * delta);
    let mut iterations = 0;
    let mut residual = norm(&residual_realified(&x, layout, tables));
    while residual > opts.residual_tol {
        if iterations >= opts.max_iter {
            return Err(StructureError::CorrectorDiverged {
                max_iter: opts.max_iter,
                residual,
            });
        }
        let (orb_k, eps_k) = derealify(&x, layout);
        let jk = jacobian(&orb_k, &eps_k, tables);
        let fk = residual_realified(&x, layout, tables);
        let dx = corrector_step(&jk, &fk, &kb.vectors, opts.rank_tol_rel);
        x = &x + &dx;
        iterations += 1;
        residual = norm(&residual_realified(&x, layout, tables));
        if !residual.is_finite() {
            return Err(StructureError::CorrectorDiverged {
                max_iter: opts.max_iter,
                residual,
            });
        }
    }
    let distance = norm(&(&x - &x0));
    if distance < delta / 10.0 || distance < delta / 2.0 {
        // both the hard collapse and the soft short-step case are failures;
        // delta = 0 passes because 0 >= 0 on both thresholds
        if delta > 0.0 {
            return Err(StructureError::StepCollapsed {
                distance,
                required: delta / 2.0,
            });
        }
    }
    let (orb1, eps1) = derealify(&x, layout);
    let e = energy(&orb1, tables).total;
    let ortho = orb1.orthogonality_residual();
    Ok(ContinuedPoint {
        orbitals: orb1,
        energies: eps1,
        residual,
        distance_from_start: distance,
        corrector_iterations: iterations,
        energy_total: e,
        orthogonality_residual: ortho,
    })
}

/// Which tangent a continuation run follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationDirection {
    /// Simultaneous phase rotation of every orbital.
    GlobalPhase,
    /// k-th vector of the numerical kernel basis.
    Kernel(usize),
}

/// Multi-step continuation. The tangent is refreshed after every accepted
/// step: the global-phase tangent is recomputed at the new point, kernel
/// tangents follow the kernel vector best aligned with the previous one.
pub fn continue_path(
    record: &CriticalPointRecord,
    tables: &OrthoTables,
    direction: ContinuationDirection,
    delta: f64,
    steps: usize,
    opts: &CorrectorOptions,
) -> Result<Vec<ContinuedPoint>, StructureError> {
    let mut orbitals = record.orbitals.clone();
    let mut energies = record.energies.clone();
    let mut tangent = match direction {
        ContinuationDirection::GlobalPhase => global_phase_tangent(&orbitals)?,
        ContinuationDirection::Kernel(k) => {
            let j = jacobian(&orbitals, &energies, tables);
            let kb = kernel_basis(&j, opts.rank_tol_rel);
            kb.vectors
                .get(k)
                .cloned()
                .ok_or(StructureError::ZeroOrbital { index: k })?
        }
    };
    let start = realify(&orbitals, &energies);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut point = continue_step(&orbitals, &energies, tables, &tangent, delta, opts)?;
        point.distance_from_start = norm(&(&realify(&point.orbitals, &point.energies) - &start));
        orbitals = point.orbitals.clone();
        energies = point.energies.clone();
        tangent = match direction {
            ContinuationDirection::GlobalPhase => global_phase_tangent(&orbitals)?,
            ContinuationDirection::Kernel(_) => {
                let j = jacobian(&orbitals, &energies, tables);
                let kb = kernel_basis(&j, opts.rank_tol_rel);
                let mut best = tangent.clone();
                let mut score = f64::NEG_INFINITY;
                for v in &kb.vectors {
                    let d = v.dot(&tangent);
                    if d.abs() > score {
                        score = d.abs();
                        best = if d >= 0.0 { v.clone() } else { v.mapv(|x| -x) };
                    }
                }
                best
            }
        };
        out.push(point);
    }
    Ok(out)
}

/// Outcome of one probe direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionOutcome {
    pub direction: String,
    pub delta: f64,
    pub outcome: String,
    pub corrector_iterations: usize,
    pub final_residual: f64,
    pub distance: f64,
    pub energy_shift: f64,
    pub orthogonality_residual: f64,
}

/// Local picture of the solution set at one converged record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldReport {
    pub kernel_dim: usize,
    pub sigma_max: f64,
    pub sigma_gap: f64,
    pub rank_ambiguous: bool,
    /// ||J v_j|| / sigma_max for the per-orbital phase tangents.
    pub phase_tangent_residuals: Vec<f64>,
    pub phase_tangents_independent: bool,
    pub outcomes: Vec<DirectionOutcome>,
    pub non_isolated: bool,
    /// "non_isolated", "isolated" or "inconclusive" (ambiguous rank).
    pub verdict: String,
}

#[derive(Debug, Clone)]
pub struct ProbeOptions {
    pub delta: f64,
    pub rank_tol_rel: f64,
    pub corrector: CorrectorOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            delta: 1e-2,
            rank_tol_rel: DEFAULT_RANK_TOL,
            corrector: CorrectorOptions::default(),
        }
    }
}

/// Kernel extraction plus continuation along every kernel direction at
/// +-delta. `non_isolated` is true exactly when at least one step lands on a
/// distinct solution within tolerance.
pub fn manifold_probe(
    record: &CriticalPointRecord,
    tables: &OrthoTables,
    opts: &ProbeOptions,
) -> Result<ManifoldReport, StructureError> {
    if !record.converged {
        return Err(StructureError::NotConverged {
            residual: record.residual_norm,
            tol: opts.corrector.residual_tol,
        });
    }
    let orbitals = &record.orbitals;
    let energies = &record.energies;
    let j = jacobian(orbitals, energies, tables);
    let kb: KernelBasis = kernel_basis(&j, opts.rank_tol_rel);

    let n_orb = orbitals.n_orbitals();
    let mut phase_res = Vec::with_capacity(n_orb);
    let mut tangents: Vec<Array1<f64>> = Vec::with_capacity(n_orb);
    for jdx in 0..n_orb {
        let v = phase_tangent(orbitals, jdx)?;
        phase_res.push(norm(&j.mat.dot(&v)) / kb.sigma_max.max(f64::MIN_POSITIVE));
        tangents.push(v);
    }
    // linear independence through the Gram spectrum
    let mut gram = Array2::<f64>::zeros((n_orb, n_orb));
    for a in 0..n_orb {
        for b in 0..n_orb {
            gram[(a, b)] = tangents[a].dot(&tangents[b]);
        }
    }
    let (gvals, _) = linalg::eigh_real(&gram)?;
    let independent = gvals[0] > 1e-8;

    let mut outcomes = Vec::new();
    let mut any_success = false;
    for (k, v) in kb.vectors.iter().enumerate() {
        for sign in [1.0f64, -1.0] {
            let dir = v.mapv(|x| x * sign);
            let label = format!("kernel[{k}]{}", if sign > 0.0 { "+" } else { "-" });
            match continue_step(orbitals, energies, tables, &dir, opts.delta, &opts.corrector) {
                Ok(p) => {
                    any_success = true;
                    outcomes.push(DirectionOutcome {
                        direction: label,
                        delta: opts.delta,
                        outcome: "accepted".into(),
                        corrector_iterations: p.corrector_iterations,
                        final_residual: p.residual,
                        distance: p.distance_from_start,
                        energy_shift: p.energy_total - record.energy.total,
                        orthogonality_residual: p.orthogonality_residual,
                    });
                }
                Err(e) => {
                    let outcome = match e {
                        StructureError::CorrectorDiverged { .. } => "corrector_diverged",
                        StructureError::StepCollapsed { .. } => "step_collapsed",
                        _ => "error",
                    };
                    outcomes.push(DirectionOutcome {
                        direction: label,
                        delta: opts.delta,
                        outcome: outcome.into(),
                        corrector_iterations: opts.corrector.max_iter,
                        final_residual: f64::NAN,
                        distance: 0.0,
                        energy_shift: 0.0,
                        orthogonality_residual: f64::NAN,
                    });
                }
            }
        }
    }

    let verdict = if kb.ambiguous {
        "inconclusive"
    } else if any_success {
        "non_isolated"
    } else {
        "isolated"
    };
    Ok(ManifoldReport {
        kernel_dim: kb.dim,
        sigma_max: kb.sigma_max,
        sigma_gap: kb.gap_ratio,
        rank_ambiguous: kb.ambiguous,
        phase_tangent_residuals: phase_res,
        phase_tangents_independent: independent,
        outcomes,
        non_isolated: any_success,
        verdict: verdict.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    #[test]
    fn zero_step_returns_start() {
        let t = h2_tables();
        let rec = converged(&t, 2);
        let v = global_phase_tangent(&rec.orbitals).unwrap();
        let p = continue_step(
            &rec.orbitals,
            &rec.energies,
            &t,
            &v,
            0.0,
            &CorrectorOptions::default(),
        )
        .unwrap();
        assert!(p.distance_from_start <= 1e-12);
        assert!(p.residual <= 1e-9);
    }

    #[test]
    fn phase_step_lands_on_the_orbit() {
        let t = h2_tables();
        let rec = converged(&t, 2);
        let v = global_phase_tangent(&rec.orbitals).unwrap();
        let delta = 1e-2;
        let p = continue_step(
            &rec.orbitals,
            &rec.energies,
            &t,
            &v,
            delta,
            &CorrectorOptions::default(),
        )
        .unwrap();
        assert!(p.residual <= 1e-9);
        assert!((p.distance_from_start - delta).abs() <= delta * 0.05);
        assert!((p.energy_total - rec.energy.total).abs() <= 1e-10);
        // the analytically known orbit point: common rotation by
        // theta = delta / ||unnormalized global tangent||
        let n_orb = rec.orbitals.n_orbitals() as f64;
        let theta = delta / (2.0 * n_orb).sqrt();
        let (o_exact, e_exact) =
            super::super::orbit_sample(&rec.orbitals, &rec.energies, &[theta, theta]);
        let x_exact = realify(&o_exact, &e_exact);
        let x_land = realify(&p.orbitals, &p.energies);
        assert!(norm(&(&x_exact - &x_land)) <= 1e-4 * delta.max(1e-6) / 1e-2);
    }

    #[test]
    fn probe_confirms_non_isolation() {
        let t = h2_tables();
        let rec = converged(&t, 2);
        let rep = manifold_probe(&rec, &t, &ProbeOptions::default()).unwrap();
        assert!(rep.kernel_dim >= 2);
        assert!(rep.non_isolated);
        assert_eq!(rep.verdict, "non_isolated");
        assert!(rep.phase_tangents_independent);
        for r in &rep.phase_tangent_residuals {
            assert!(*r <= 1e-8);
        }
        for o in &rep.outcomes {
            if o.outcome == "accepted" {
                assert!(o.final_residual <= 1e-9);
            }
        }
    }

    #[test]
    fn zero_tangent_collapses() {
        let t = h2_tables();
        let rec = converged(&t, 2);
        let zero = ndarray::Array1::<f64>::zeros(
            2 * t.n_basis * rec.n_orbitals + rec.n_orbitals,
        );
        let err = continue_step(
            &rec.orbitals,
            &rec.energies,
            &t,
            &zero,
            1e-2,
            &CorrectorOptions::default(),
        );
        assert!(matches!(err, Err(StructureError::StepCollapsed { .. })));
    }

    #[test]
    fn probe_rejects_unconverged_records() {
        let t = h2_tables();
        let mut rec = converged(&t, 2);
        rec.converged = false;
        assert!(matches!(
            manifold_probe(&rec, &t, &ProbeOptions::default()),
            Err(StructureError::NotConverged { .. })
        ));
    }

    #[test]
    fn ten_phase_steps_keep_energy_constant() {
        let t = h2_tables();
        let rec = converged(&t, 2);
        let path = continue_path(
            &rec,
            &t,
            ContinuationDirection::GlobalPhase,
            1e-2,
            10,
            &CorrectorOptions::default(),
        )
        .unwrap();
        assert_eq!(path.len(), 10);
        for p in &path {
            assert!(p.residual <= 1e-9);
            assert!((p.energy_total - rec.energy.total).abs() <= 1e-8);
        }
        // distances from the start grow monotonically along the orbit
        for w in path.windows(2) {
            assert!(w[1].distance_from_start > w[0].distance_from_start);
        }
    }
}
