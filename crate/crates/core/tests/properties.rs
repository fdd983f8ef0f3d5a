//! Property tests for the structural invariants that hold at every input,
//! not just at hand-picked points.

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use hfsolve::hf_core::{pairing, residual_f, residual_norm, OrbitalEnergies, OrbitalSet, PairVector};
use hfsolve::integrals::{boys::boys_f0, build_tables, BasisSet, MoleculeSpec, Nucleus, Primitive,
    Shell, OrthoTables};
use hfsolve::structure::{derealify, orbit_sample, realify, realify_pair, RealLayout};
use hfsolve::C64;

fn tables() -> OrthoTables {
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

fn orbital_strategy(nb: usize, n_orb: usize) -> impl Strategy<Value = (OrbitalSet, OrbitalEnergies)> {
    let coords = prop::collection::vec(-1.0f64..1.0, 2 * nb * n_orb);
    let eps = prop::collection::vec(-2.0f64..0.5, n_orb);
    (coords, eps).prop_map(move |(cs, es)| {
        let mut c = Array2::<C64>::zeros((nb, n_orb));
        for i in 0..n_orb {
            for mu in 0..nb {
                c[(mu, i)] = C64::new(cs[2 * (i * nb + mu)], cs[2 * (i * nb + mu) + 1]);
            }
        }
        (
            OrbitalSet::new(c),
            OrbitalEnergies { eps: Array1::from_vec(es) },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boys_is_decreasing_and_bounded(t in 0.0f64..500.0, dt in 1e-6f64..10.0) {
        let a = boys_f0(t).unwrap();
        let b = boys_f0(t + dt).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b < a);
    }

    #[test]
    fn realify_round_trips((orb, eps) in orbital_strategy(4, 2)) {
        let layout = RealLayout { n_basis: 4, n_orbitals: 2 };
        let x = realify(&orb, &eps);
        let (orb2, eps2) = derealify(&x, layout);
        for (p, q) in orb.c.iter().zip(orb2.c.iter()) {
            prop_assert!((p - q).norm() <= 1e-14);
        }
        for (p, q) in eps.eps.iter().zip(eps2.eps.iter()) {
            prop_assert!((p - q).abs() <= 1e-14);
        }
    }

    #[test]
    fn pairing_is_symmetric_and_euclidean(
        (o1, e1) in orbital_strategy(4, 2),
        (o2, e2) in orbital_strategy(4, 2),
    ) {
        let y1 = PairVector { orbitals: o1.c, scalars: e1.eps };
        let y2 = PairVector { orbitals: o2.c, scalars: e2.eps };
        let ab = pairing(&y1, &y2).unwrap();
        let ba = pairing(&y2, &y1).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
        let dot = realify_pair(&y1).dot(&realify_pair(&y2));
        prop_assert!((ab - dot).abs() <= 1e-11 * (1.0 + ab.abs()));
    }

    #[test]
    fn orbit_rotation_preserves_the_residual(
        (orb, eps) in orbital_strategy(4, 2),
        th0 in -3.2f64..3.2,
        th1 in -3.2f64..3.2,
    ) {
        let t = tables();
        let r0 = residual_norm(&residual_f(&orb, &eps, &t));
        let (orb2, eps2) = orbit_sample(&orb, &eps, &[th0, th1]);
        let r1 = residual_norm(&residual_f(&orb2, &eps2, &t));
        prop_assert!((r0 - r1).abs() <= 1e-12 * (1.0 + r0));
    }
}
