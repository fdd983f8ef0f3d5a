//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured numbers. Desk scale throughout (n_basis <= 16, N <= 4).

use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use hfsolve::hf_core::{coulomb_matrix, pair_operators, OrbitalEnergies, OrbitalSet};
use hfsolve::integrals::{
    build_tables, eri_prim, kinetic_prim, nuclear_prim, oracle, overlap_prim, BasisSet,
    MoleculeSpec, Nucleus, OrthoTables, Primitive, Shell,
};
use hfsolve::linalg;
use hfsolve::scf::{
    initial_guess, scf_solve, threshold_j, CriticalPointRecord, GuessMode, ScfOptions,
};
use hfsolve::structure::{
    analyze, continue_path, default_split, gradient_check, jacobian, kernel_basis,
    lm_decomposition, manifold_probe, phase_tangent, realify, rescaling_construction,
    residual_realified, AnalyzeOptions, ContinuationDirection, CorrectorOptions, ProbeOptions,
    RealLayout,
};
use hfsolve::C64;

// ---- shared test systems ---------------------------------------------------

fn h2_sto3g() -> OrthoTables {
    let molecule = MoleculeSpec::new(
        vec![
            Nucleus { charge: 1.0, position: [0.0, 0.0, -0.7] },
            Nucleus { charge: 1.0, position: [0.0, 0.0, 0.7] },
        ],
        2,
    )
    .unwrap();
    let prims = vec![
        Primitive { exponent: 3.42525091, coefficient: 0.15432897 },
        Primitive { exponent: 0.62391373, coefficient: 0.53532814 },
        Primitive { exponent: 0.16885540, coefficient: 0.44463454 },
    ];
    let basis = BasisSet::new(vec![
        Shell { center: [0.0, 0.0, -0.7], primitives: prims.clone() },
        Shell { center: [0.0, 0.0, 0.7], primitives: prims },
    ])
    .unwrap();
    build_tables(&molecule, &basis).unwrap().orthonormalize().unwrap()
}

fn h2_four_functions() -> OrthoTables {
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

fn he_like(z: f64) -> OrthoTables {
    let molecule = MoleculeSpec::new(vec![Nucleus { charge: z, position: [0.0; 3] }], 2).unwrap();
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

fn converged(tables: &OrthoTables, n: usize) -> CriticalPointRecord {
    let guess = initial_guess(tables, n, GuessMode::Core, 0).unwrap();
    let rec = scf_solve(tables, n, &guess, &ScfOptions::default()).unwrap();
    assert!(rec.converged, "SCF failed: residual {}", rec.residual_norm);
    rec
}

/// The converged-record fleet the per-record criteria quantify over.
fn record_fleet() -> Vec<(&'static str, OrthoTables, CriticalPointRecord)> {
    let mut out = Vec::new();
    for (name, tables, n) in [
        ("h2-sto3g/N=2", h2_sto3g(), 2),
        ("h2-4f/N=1", h2_four_functions(), 1),
        ("h2-4f/N=2", h2_four_functions(), 2),
        ("he-z6/N=1", he_like(6.0), 1),
        ("he-z6/N=2", he_like(6.0), 2),
        ("he-z6/N=3", he_like(6.0), 3),
    ] {
        let rec = converged(&tables, n);
        out.push((name, tables, rec));
    }
    out
}

fn random_feasible(tables: &OrthoTables, n_orb: usize, seed: u64) -> OrbitalSet {
    let mut rng = StdRng::seed_from_u64(seed);
    let nb = tables.n_basis;
    let mut c = Array2::<C64>::zeros((nb, n_orb));
    for i in 0..n_orb {
        for mu in 0..nb {
            c[(mu, i)] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let nrm: f64 = c.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for mu in 0..nb {
            c[(mu, i)] /= nrm;
        }
    }
    OrbitalSet::new(c)
}

fn random_point(
    tables: &OrthoTables,
    n_orb: usize,
    seed: u64,
) -> (OrbitalSet, OrbitalEnergies) {
    let mut rng = StdRng::seed_from_u64(seed);
    let nb = tables.n_basis;
    let mut c = Array2::<C64>::zeros((nb, n_orb));
    for v in c.iter_mut() {
        *v = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.8;
    }
    let eps = Array1::from_iter((0..n_orb).map(|_| -rng.random::<f64>()));
    (OrbitalSet::new(c), OrbitalEnergies { eps })
}

// ---- criterion 1: integral oracle agreement --------------------------------

#[test]
fn acceptance_01_integral_oracle_agreement() {
    fn rand_exp(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * rng.random::<f64>()
    }
    fn rand_pos(rng: &mut StdRng) -> [f64; 3] {
        [
            2.0 * (rng.random::<f64>() - 0.5),
            2.0 * (rng.random::<f64>() - 0.5),
            2.0 * (rng.random::<f64>() - 0.5),
        ]
    }
    let started = std::time::Instant::now();
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst_one = 0.0f64;
    let mut worst_eri = 0.0f64;
    let n_configs = 50;
    for k in 0..n_configs {
        let (alpha, beta) = (rand_exp(&mut rng, 0.2, 2.5), rand_exp(&mut rng, 0.2, 2.5));
        let (a, b) = (rand_pos(&mut rng), rand_pos(&mut rng));
        let molecule = MoleculeSpec::new(
            vec![
                Nucleus {
                    charge: rand_exp(&mut rng, 0.5, 3.0),
                    position: rand_pos(&mut rng),
                },
                Nucleus {
                    charge: rand_exp(&mut rng, 0.5, 3.0),
                    position: rand_pos(&mut rng),
                },
            ],
            2,
        )
        .unwrap();

        let s_err = (overlap_prim(alpha, a, beta, b)
            - oracle::overlap(alpha, a, beta, b).unwrap())
        .abs();
        let t_err = (kinetic_prim(alpha, a, beta, b)
            - oracle::kinetic(alpha, a, beta, b).unwrap())
        .abs();
        let v_err = (nuclear_prim(alpha, a, beta, b, &molecule)
            - oracle::nuclear(alpha, a, beta, b, &molecule).unwrap())
        .abs();
        worst_one = worst_one.max(s_err).max(t_err).max(v_err);
        assert!(s_err <= 1e-10, "config {k}: overlap error {s_err:e}");
        assert!(t_err <= 1e-10, "config {k}: kinetic error {t_err:e}");
        assert!(v_err <= 1e-10, "config {k}: nuclear error {v_err:e}");

        let (gamma, delta) = (rand_exp(&mut rng, 0.2, 2.5), rand_exp(&mut rng, 0.2, 2.5));
        let (c, d) = (rand_pos(&mut rng), rand_pos(&mut rng));
        let eri_err = (eri_prim(alpha, a, beta, b, gamma, c, delta, d)
            - oracle::eri(alpha, a, beta, b, gamma, c, delta, d).unwrap())
        .abs();
        worst_eri = worst_eri.max(eri_err);
        assert!(eri_err <= 1e-6, "config {k}: eri error {eri_err:e}");
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 60.0, "oracle suite took {secs:.1} s");
    println!(
        "ACCEPTANCE 1 (integral oracle, {n_configs} configs): PASS  \
         worst one-electron {worst_one:.2e} (tol 1e-10), worst eri {worst_eri:.2e} (tol 1e-6), {secs:.1} s"
    );
}

// ---- criterion 2: gradient identity ----------------------------------------

#[test]
fn acceptance_02_gradient_identity() {
    let tables = h2_four_functions();
    let mut worst_ratio = 0.0f64;
    let mut worst_abs = 0.0f64;
    for p in 0..20 {
        let (orb, eps) = random_point(&tables, 2, 300 + p);
        let rep = gradient_check(&orb, &eps, &tables, 10, 9000 + p);
        assert!(
            rep.max_err_h4 <= 1e-6,
            "point {p}: absolute error {:e}",
            rep.max_err_h4
        );
        let ratio = rep.max_err_h4 / rep.max_err_h3.max(1e-300);
        // rounding floor: the ratio test only means something above noise
        if rep.max_err_h3 > 1e-10 {
            assert!(ratio <= 0.02, "point {p}: ratio {ratio}");
            worst_ratio = worst_ratio.max(ratio);
        }
        worst_abs = worst_abs.max(rep.max_err_h4);
    }
    println!(
        "ACCEPTANCE 2 (gradient identity, 20 points x 10 dirs): PASS  \
         worst |err| at h=1e-4: {worst_abs:.2e} (tol 1e-6), worst h-ratio {worst_ratio:.4} (tol 0.02)"
    );
}

// ---- criterion 3: solver correctness ---------------------------------------

#[test]
fn acceptance_03_solver_correctness() {
    // N = 1 on several bases: E and eps_1 equal the ground eigenvalue of h
    let mut worst = 0.0f64;
    for tables in [h2_sto3g(), h2_four_functions(), he_like(6.0)] {
        let rec = converged(&tables, 1);
        let lam0 = tables.h_eigenvalues[0];
        worst = worst
            .max((rec.energy.total - lam0).abs())
            .max((rec.energies.eps[0] - lam0).abs());
        assert!((rec.energy.total - lam0).abs() <= 1e-10);
        assert!((rec.energies.eps[0] - lam0).abs() <= 1e-10);
    }
    // two-electron / two-nucleus model from the core guess
    let tables = h2_four_functions();
    let guess = initial_guess(&tables, 2, GuessMode::Core, 0).unwrap();
    let rec = scf_solve(&tables, 2, &guess, &ScfOptions::default()).unwrap();
    assert!(rec.converged);
    assert!(rec.residual_norm <= 1e-9);
    assert!(rec.iterations <= 500);
    println!(
        "ACCEPTANCE 3 (solver correctness): PASS  \
         N=1 deviation {worst:.2e} (tol 1e-10); 2e/2nuc residual {:.2e} in {} iterations",
        rec.residual_norm, rec.iterations
    );
}

// ---- criterion 4: Koopmans identity ----------------------------------------

#[test]
fn acceptance_04_koopmans_identity() {
    let mut worst = 0.0f64;
    for (name, tables, rec) in record_fleet() {
        for (k, r) in hfsolve::structure::koopmans_check(&rec, &tables)
            .iter()
            .enumerate()
        {
            assert!(*r <= 1e-8, "{name}: drop {k} residual {r:e}");
            worst = worst.max(*r);
        }
    }
    println!(
        "ACCEPTANCE 4 (Koopmans drop-one identity, all records): PASS  worst residual {worst:.2e} (tol 1e-8)"
    );
}

// ---- criterion 5: orbital-energy bounds ------------------------------------

#[test]
fn acceptance_05_orbital_energy_bounds() {
    let mut gate_seen = false;
    for (name, tables, rec) in record_fleet() {
        let lam0 = tables.h_eigenvalues[0];
        for &e in rec.energies.eps.iter() {
            assert!(e >= lam0 - 1e-9, "{name}: eps {e} below {lam0}");
        }
        if rec.n_orbitals >= 2 {
            let (est, _) = threshold_j(&tables, rec.n_orbitals - 1, 4, &ScfOptions::default())
                .unwrap();
            if rec.energy.total <= est.j_hat - 0.1 {
                gate_seen = true;
                for &e in rec.energies.eps.iter() {
                    assert!(e <= -0.1 + 1e-8, "{name}: eps {e} above gate");
                }
            }
        }
    }
    assert!(gate_seen, "no record exercised the threshold gate");
    println!(
        "ACCEPTANCE 5 (orbital-energy bounds, lower + threshold gate): PASS  gate exercised: {gate_seen}"
    );
}

// ---- criterion 6: positivity suites ----------------------------------------

#[test]
fn acceptance_06_positivity() {
    let tables = he_like(6.0);
    let mut rng = StdRng::seed_from_u64(606);
    let nb = tables.n_basis;
    let mut worst = f64::INFINITY;
    for trial in 0..5 {
        let orb = random_feasible(&tables, 2, 700 + trial);
        // single-orbital positivity
        for i in 0..2 {
            let ops = pair_operators(&orb, &tables, i, i);
            for _ in 0..100 {
                let w: Vec<C64> = (0..nb)
                    .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect();
                let mut val = C64::new(0.0, 0.0);
                for mu in 0..nb {
                    for nu in 0..nb {
                        val += w[mu].conj() * (ops.q_hat[(mu, nu)] - ops.s_hat[(mu, nu)]) * w[nu];
                    }
                }
                worst = worst.min(val.re);
                assert!(val.re >= -1e-12, "single-orbital form {:e}", val.re);
            }
        }
        // block positivity of the Coulomb-minus-offdiagonal operator
        let cols: Vec<Array1<C64>> = (0..2).map(|i| orb.column(i)).collect();
        let d01 = {
            let mut m = Array2::<C64>::zeros((nb, nb));
            for r in 0..nb {
                for c in 0..nb {
                    m[(r, c)] = cols[0][r] * cols[1][c].conj();
                }
            }
            m
        };
        let j_oths: Vec<Array2<C64>> = (0..2)
            .map(|i| {
                let o = 1 - i;
                let mut m = Array2::<C64>::zeros((nb, nb));
                for r in 0..nb {
                    for c in 0..nb {
                        m[(r, c)] = cols[o][r] * cols[o][c].conj();
                    }
                }
                coulomb_matrix(&tables.eri, &m)
            })
            .collect();
        let q01 = coulomb_matrix(&tables.eri, &d01);
        for _ in 0..100 {
            let w: Vec<Vec<C64>> = (0..2)
                .map(|_| {
                    (0..nb)
                        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                        .collect()
                })
                .collect();
            let mut val = 0.0;
            for i in 0..2 {
                for mu in 0..nb {
                    for nu in 0..nb {
                        val += (w[i][mu].conj() * j_oths[i][(mu, nu)] * w[i][nu]).re;
                    }
                }
            }
            // cross terms: - <w_0, Q01 w_1> - <w_1, Q01^H w_0> = -2 Re<w_0, Q01 w_1>
            let mut cross = C64::new(0.0, 0.0);
            for mu in 0..nb {
                for nu in 0..nb {
                    cross += w[0][mu].conj() * q01[(mu, nu)] * w[1][nu];
                }
            }
            val -= 2.0 * cross.re;
            worst = worst.min(val);
            assert!(val >= -1e-12, "block form {val:e}");
        }
    }
    println!(
        "ACCEPTANCE 6 (positivity, 5 orbit sets x 100 samples x 2 suites): PASS  min value {worst:.2e} (floor -1e-12)"
    );
}

// ---- criterion 7: Jacobian fidelity -----------------------------------------

#[test]
fn acceptance_07_jacobian_fidelity() {
    let tables = h2_four_functions();
    let layout = RealLayout { n_basis: tables.n_basis, n_orbitals: 2 };
    let mut worst_entry = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut rng = StdRng::seed_from_u64(707);
    for p in 0..4 {
        let (orb, eps) = random_point(&tables, 2, 800 + p);
        let j = jacobian(&orb, &eps, &tables);
        worst_sym = worst_sym.max(
            linalg::frobenius_r(&(&j.mat - &j.mat.t().to_owned()))
                / linalg::frobenius_r(&j.mat),
        );
        // full-matrix central difference at h = 1e-4
        let x0 = realify(&orb, &eps);
        let h = 1e-4;
        for k in 0..layout.dim() {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (&residual_realified(&xp, layout, &tables)
                - &residual_realified(&xm, layout, &tables))
                .mapv(|x| x / (2.0 * h));
            for r in 0..layout.dim() {
                worst_entry = worst_entry.max((fd[r] - j.mat[(r, k)]).abs());
            }
        }
        // order-2 decay along random directions
        for _ in 0..4 {
            let mut v = Array1::<f64>::zeros(layout.dim());
            for e in v.iter_mut() {
                *e = rng.random::<f64>() - 0.5;
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let v = v.mapv(|x| x / nrm);
            let jv = j.mat.dot(&v);
            let mut errs = [0.0f64; 2];
            for (idx, h) in [1e-3, 1e-4].iter().enumerate() {
                let fp = residual_realified(&(&x0 + &v.mapv(|x| x * h)), layout, &tables);
                let fm = residual_realified(&(&x0 - &v.mapv(|x| x * h)), layout, &tables);
                let fd = (&fp - &fm).mapv(|x| x / (2.0 * h));
                errs[idx] = (&fd - &jv).iter().map(|x| x * x).sum::<f64>().sqrt();
            }
            if errs[0] > 1e-10 {
                let ratio = errs[1] / errs[0];
                worst_ratio = worst_ratio.max(ratio);
                assert!(ratio <= 0.02, "direction ratio {ratio}");
            }
        }
    }
    assert!(worst_entry <= 1e-6, "max entry error {worst_entry:e}");
    assert!(worst_sym <= 1e-10, "symmetry {worst_sym:e}");
    println!(
        "ACCEPTANCE 7 (Jacobian fidelity): PASS  max FD entry error {worst_entry:.2e} (tol 1e-6), \
         symmetry {worst_sym:.2e} (tol 1e-10), worst order-2 ratio {worst_ratio:.4}"
    );
}

// ---- criterion 8: L + M decomposition ---------------------------------------

#[test]
fn acceptance_08_lm_decomposition() {
    let mut admissible_seen = 0;
    let mut worst_rec = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    for (name, tables, rec) in record_fleet() {
        let split = default_split(&rec.energies);
        if !(split > 0.0) {
            continue;
        }
        let lm = match lm_decomposition(&rec.orbitals, &rec.energies, &tables, split) {
            Ok(d) => d,
            Err(_) => continue,
        };
        admissible_seen += 1;
        let j = jacobian(&rec.orbitals, &rec.energies, &tables);
        let sum = &lm.l_mat + &lm.m_mat;
        let err = linalg::frobenius_r(&(&sum - &j.mat)) / linalg::frobenius_r(&j.mat);
        assert!(err <= 1e-10, "{name}: reconstruction {err:e}");
        worst_rec = worst_rec.max(err);
        let lmin = lm.lambda_min_orbital().unwrap();
        assert!(
            lmin >= split / 2.0 - 1e-8,
            "{name}: lambda_min {lmin} < {}",
            split / 2.0
        );
        worst_margin = worst_margin.min(lmin - split / 2.0);
        let count = tables
            .h_eigenvalues
            .iter()
            .filter(|&&v| v <= -split / 2.0)
            .count();
        assert_eq!(lm.h2_count, count, "{name}: h2 rank mismatch");
    }
    assert!(admissible_seen >= 2, "too few admissible records");
    println!(
        "ACCEPTANCE 8 (L+M split on {admissible_seen} admissible records): PASS  \
         worst reconstruction {worst_rec:.2e} (tol 1e-10), min coercivity margin {worst_margin:.2e}"
    );
}

// ---- criterion 9: kernel and manifold structure ------------------------------

#[test]
fn acceptance_09_kernel_and_manifold() {
    let mut min_gap = f64::INFINITY;
    for (name, tables, rec) in record_fleet() {
        let n = rec.n_orbitals;
        let j = jacobian(&rec.orbitals, &rec.energies, &tables);
        let kb = kernel_basis(&j, 1e-7);
        assert!(kb.dim >= n, "{name}: kernel dim {} < {n}", kb.dim);
        assert!(kb.gap_ratio >= 10.0, "{name}: gap {}", kb.gap_ratio);
        min_gap = min_gap.min(kb.gap_ratio);
        for k in 0..n {
            let v = phase_tangent(&rec.orbitals, k).unwrap();
            let r = j.mat.dot(&v).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(
                r <= 1e-8 * kb.sigma_max,
                "{name}: phase tangent {k} residual {r:e}"
            );
        }
        let probe = manifold_probe(&rec, &tables, &ProbeOptions::default()).unwrap();
        assert!(probe.non_isolated, "{name}: isolated?");
        // ten steps along the global phase orbit
        let path = continue_path(
            &rec,
            &tables,
            ContinuationDirection::GlobalPhase,
            1e-2,
            10,
            &CorrectorOptions::default(),
        )
        .unwrap();
        assert_eq!(path.len(), 10);
        for p in &path {
            assert!(p.residual <= 1e-9, "{name}: path residual {:e}", p.residual);
            assert!(
                (p.energy_total - rec.energy.total).abs() <= 1e-8,
                "{name}: energy drift {:e}",
                p.energy_total - rec.energy.total
            );
        }
    }
    println!(
        "ACCEPTANCE 9 (kernel >= N, gap >= 10, non-isolation, 10-step phase continuation): PASS  \
         min gap ratio {min_gap:.2e}"
    );
}

// ---- criterion 10: rescaling construction ------------------------------------

#[test]
fn acceptance_10_rescaling() {
    let tables = he_like(6.0);
    let rec = converged(&tables, 2);
    let mut rng = StdRng::seed_from_u64(1010);
    let nb = tables.n_basis;
    let mut tested = 0;
    let mut worst_increase = f64::NEG_INFINITY;
    let mut attempts = 0;
    while tested < 50 && attempts < 2000 {
        attempts += 1;
        let mut c = rec.orbitals.c.clone();
        for i in 0..2 {
            for mu in 0..nb {
                c[(mu, i)] += C64::new(
                    0.3 * (rng.random::<f64>() - 0.5),
                    0.3 * (rng.random::<f64>() - 0.5),
                );
            }
            let nrm: f64 = c.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for mu in 0..nb {
                c[(mu, i)] /= nrm;
            }
        }
        let orb = OrbitalSet::new(c);
        if orb.orthogonality_residual() < 1e-3 {
            continue; // want genuinely non-orthogonal inputs
        }
        let out = match rescaling_construction(&orb, &tables) {
            Ok(o) => o,
            Err(_) => continue,
        };
        if out.fallback {
            continue; // nonnegative input energy: construction reports, not asserts
        }
        tested += 1;
        assert!(out.orbitals.orthogonality_residual() <= 1e-10);
        assert!(out.orbitals.norm_deviation() <= 1e-10);
        let increase = out.output_energy - out.input_energy;
        worst_increase = worst_increase.max(increase);
        assert!(
            increase <= 1e-10,
            "energy increased by {increase:e} (in {} out {})",
            out.input_energy,
            out.output_energy
        );
    }
    assert_eq!(tested, 50, "only {tested} negative-energy samples drawn");
    println!(
        "ACCEPTANCE 10 (rescaling, 50 seeded non-orthogonal negative-energy sets): PASS  \
         worst energy change {worst_increase:.2e} (tol 1e-10)"
    );
}

// ---- supporting sanity: the analyze aggregate stays green --------------------

#[test]
fn acceptance_analyze_aggregate() {
    let tables = he_like(6.0);
    let rec = converged(&tables, 2);
    let (est, _) = threshold_j(&tables, 1, 4, &ScfOptions::default()).unwrap();
    let report = analyze(
        &rec,
        &tables,
        &AnalyzeOptions {
            j_hat: Some(est.j_hat),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(report.checks_passed);
    assert_eq!(report.verdict, "non_isolated");
    println!(
        "ACCEPTANCE aggregate (analyze on gate-active record): PASS  kernel_dim {} gap {:.2e}",
        report.kernel_dim, report.sigma_gap
    );
}
