//! Core Hartree-Fock objects in the Löwdin-orthonormalized basis: density
//! matrix, Fock operator, energy functional (density form and pairwise form),
//! the norm-constrained Lagrangian, the bilinear pairing and the residual map
//! whose zeros are exactly the critical points.
//!
//! Orbitals are complex columns; every orbital is singly occupied and all
//! exchange terms are active. There is no closed-shell factor of two
//! anywhere.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::integrals::{EriTensor, OrthoTables};
use crate::report::{serde_c64_matrix, serde_f64_vec};
use crate::C64;

#[derive(Debug, Error)]
pub enum HfError {
    #[error("orbital set is not feasible: max | ||phi_i||^2 - 1 | = {dev:e} > {tol:e}")]
    NotFeasible { dev: f64, tol: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("orbital energy expectation has imaginary part {imag:e}")]
    NonRealExpectation { imag: f64 },
}

/// Discretized orbital tuple: column i holds the coefficients of orbital i
/// in the orthonormalized basis. Feasibility only constrains the norms;
/// orthogonality between different orbitals is *not* required.
///
/// Serializes flat as `{"re": [[...]], "im": [[...]]}` (row-major, one row
/// per basis function, one column per orbital).
#[derive(Debug, Clone)]
pub struct OrbitalSet {
    pub c: Array2<C64>,
}

impl Serialize for OrbitalSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serde_c64_matrix::serialize(&self.c, s)
    }
}

impl<'de> Deserialize<'de> for OrbitalSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(OrbitalSet {
            c: serde_c64_matrix::deserialize(d)?,
        })
    }
}

pub const FEASIBILITY_TOL: f64 = 1e-9;

impl OrbitalSet {
    pub fn new(c: Array2<C64>) -> Self {
        OrbitalSet { c }
    }

    pub fn n_basis(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_orbitals(&self) -> usize {
        self.c.ncols()
    }

    pub fn column(&self, i: usize) -> Array1<C64> {
        self.c.column(i).to_owned()
    }

    /// max_i | ||phi_i||^2 - 1 |
    pub fn norm_deviation(&self) -> f64 {
        (0..self.n_orbitals())
            .map(|i| (self.c.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.norm_deviation() <= tol
    }

    pub fn require_feasible(&self, tol: f64) -> Result<(), HfError> {
        let dev = self.norm_deviation();
        if dev > tol {
            return Err(HfError::NotFeasible { dev, tol });
        }
        Ok(())
    }

    /// max_{i != j} |<phi_i, phi_j>|
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.n_orbitals();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d: C64 = self
                    .c
                    .column(i)
                    .iter()
                    .zip(self.c.column(j).iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Gram matrix D_ij = <phi_i, phi_j>.
    pub fn gram(&self) -> Array2<C64> {
        let n = self.n_orbitals();
        let mut d = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                d[(i, j)] = self
                    .c
                    .column(i)
                    .iter()
                    .zip(self.c.column(j).iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
            }
        }
        d
    }
}

/// Lagrange multipliers / Fock eigenvalues attached to the orbitals.
/// Serializes as a plain JSON array.
#[derive(Debug, Clone)]
pub struct OrbitalEnergies {
    pub eps: Array1<f64>,
}

impl Serialize for OrbitalEnergies {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serde_f64_vec::serialize(&self.eps, s)
    }
}

impl<'de> Deserialize<'de> for OrbitalEnergies {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(OrbitalEnergies {
            eps: serde_f64_vec::deserialize(d)?,
        })
    }
}

/// P = sum_i c_i c_i^dagger; Hermitian PSD, trace = N on feasible sets.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub p: Array2<C64>,
}

pub fn density(orbitals: &OrbitalSet) -> DensityMatrix {
    let n = orbitals.n_basis();
    let mut p = Array2::<C64>::zeros((n, n));
    for i in 0..orbitals.n_orbitals() {
        let ci = orbitals.c.column(i);
        for mu in 0..n {
            for nu in 0..n {
                p[(mu, nu)] += ci[mu] * ci[nu].conj();
            }
        }
    }
    DensityMatrix { p }
}

/// Coulomb contraction J[P]_{mu nu} = sum_{la si} (mu nu | la si) P_{la si}.
pub fn coulomb_matrix(eri: &EriTensor, p: &Array2<C64>) -> Array2<C64> {
    let n = eri.n;
    let mut out = Array2::<C64>::zeros((n, n));
    for mu in 0..n {
        for nu in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for la in 0..n {
                for si in 0..n {
                    acc += eri.get(mu, nu, la, si) * p[(la, si)];
                }
            }
            out[(mu, nu)] = acc;
        }
    }
    out
}

/// Exchange-type contraction K[P]_{mu nu} = sum_{la si} (mu la | si nu) P_{la si}.
pub fn exchange_matrix(eri: &EriTensor, p: &Array2<C64>) -> Array2<C64> {
    let n = eri.n;
    let mut out = Array2::<C64>::zeros((n, n));
    for mu in 0..n {
        for nu in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for la in 0..n {
                for si in 0..n {
                    acc += eri.get(mu, la, si, nu) * p[(la, si)];
                }
            }
            out[(mu, nu)] = acc;
        }
    }
    out
}

fn outer(a: &Array1<C64>, b: &Array1<C64>) -> Array2<C64> {
    let n = a.len();
    let mut m = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a[i] * b[j].conj();
        }
    }
    m
}

fn outer_t(a: &Array1<C64>, b: &Array1<C64>) -> Array2<C64> {
    // a b^T without conjugation; feeds the conjugate-linear exchange blocks
    let n = a.len();
    let mut m = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a[i] * b[j];
        }
    }
    m
}

/// Fock matrix F = h + J[P] - K[P].
pub fn fock(orbitals: &OrbitalSet, tables: &OrthoTables) -> Array2<C64> {
    let p = density(orbitals).p;
    let hc = tables.h.mapv(|x| C64::new(x, 0.0));
    &hc + &coulomb_matrix(&tables.eri, &p) - &exchange_matrix(&tables.eri, &p)
}

/// The pair operators attached to orbitals (i, j): the multiplicative
/// Coulomb-type operator, the exchange-type operator, and the
/// conjugate-linear exchange variant realized as `w -> B conj(w)`.
pub struct PairOperators {
    /// Multiplicative operator from the overlap density of orbitals (i, j).
    pub q_hat: Array2<C64>,
    /// Nonlocal exchange operator of the pair.
    pub s_hat: Array2<C64>,
    /// Matrix of the conjugate-linear map `w -> s_bar * conj(w)`.
    pub s_bar: Array2<C64>,
}

pub fn pair_operators(
    orbitals: &OrbitalSet,
    tables: &OrthoTables,
    i: usize,
    j: usize,
) -> PairOperators {
    let ci = orbitals.column(i);
    let cj = orbitals.column(j);
    let dij = outer(&ci, &cj);
    PairOperators {
        q_hat: coulomb_matrix(&tables.eri, &dij),
        s_hat: exchange_matrix(&tables.eri, &dij),
        s_bar: exchange_matrix(&tables.eri, &outer_t(&ci, &cj)),
    }
}

/// Total energy with its pieces. `total` comes from the density-matrix form;
/// `coulomb`/`exchange` count distinct pairs (i < j), so
/// `total = core + coulomb - exchange` up to `form_difference`, which records
/// the observed gap between the two independent routes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub core: f64,
    pub coulomb: f64,
    pub exchange: f64,
    pub j_pairs: Vec<Vec<f64>>,
    pub k_pairs: Vec<Vec<f64>>,
    /// |density-form total - pairwise total|
    pub form_difference: f64,
}

fn re_trace(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    // Re tr(a b)
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

pub fn energy(orbitals: &OrbitalSet, tables: &OrthoTables) -> EnergyBreakdown {
    let n_orb = orbitals.n_orbitals();
    let p = density(orbitals).p;
    let hc = tables.h.mapv(|x| C64::new(x, 0.0));
    let jm = coulomb_matrix(&tables.eri, &p);
    let km = exchange_matrix(&tables.eri, &p);
    let core = re_trace(&hc, &p);
    // density form: the self-interaction inside the Coulomb double integral
    // cancels against its exchange counterpart in the total
    let total_density_form = core + 0.5 * re_trace(&p, &jm) - 0.5 * re_trace(&p, &km);

    let mut j_pairs = vec![vec![0.0; n_orb]; n_orb];
    let mut k_pairs = vec![vec![0.0; n_orb]; n_orb];
    let d: Vec<Array2<C64>> = (0..n_orb)
        .map(|i| {
            let ci = orbitals.column(i);
            outer(&ci, &ci)
        })
        .collect();
    for i in 0..n_orb {
        let jdi = coulomb_matrix(&tables.eri, &d[i]);
        let kdi = exchange_matrix(&tables.eri, &d[i]);
        for j in 0..n_orb {
            j_pairs[j][i] = re_trace(&d[j], &jdi);
            k_pairs[j][i] = re_trace(&d[j], &kdi);
        }
    }
    let mut coulomb_pairs = 0.0;
    let mut exchange_pairs = 0.0;
    for i in 0..n_orb {
        for j in (i + 1)..n_orb {
            coulomb_pairs += j_pairs[i][j];
            exchange_pairs += k_pairs[i][j];
        }
    }
    let pairwise = core + coulomb_pairs - exchange_pairs;

    EnergyBreakdown {
        total: total_density_form,
        core,
        coulomb: coulomb_pairs,
        exchange: exchange_pairs,
        j_pairs,
        k_pairs,
        form_difference: (total_density_form - pairwise).abs(),
    }
}

/// Slater-determinant expectation <Psi, H Psi> for a possibly non-orthonormal
/// orbital set with nonsingular Gram matrix. Coincides with [`energy`] on
/// orthonormal sets; on merely norm-constrained sets the two functionals
/// genuinely differ.
pub fn determinant_energy(orbitals: &OrbitalSet, tables: &OrthoTables) -> Result<f64, HfError> {
    let n_orb = orbitals.n_orbitals();
    let d = orbitals.gram();
    let (vals, vecs) = crate::linalg::eigh(&d.mapv(|z| z))
        .map_err(|e| HfError::DimensionMismatch(e.to_string()))?;
    if vals[0] < 1e-12 {
        return Err(HfError::DimensionMismatch(format!(
            "Gram matrix singular (min eigenvalue {:e})",
            vals[0]
        )));
    }
    let det: f64 = vals.iter().product();
    let mut dinv = Array2::<C64>::zeros((n_orb, n_orb));
    for i in 0..n_orb {
        for j in 0..n_orb {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n_orb {
                acc += vecs[(i, k)] * vecs[(j, k)].conj() / vals[k];
            }
            dinv[(i, j)] = acc;
        }
    }

    let hc = tables.h.mapv(|x| C64::new(x, 0.0));
    let mut one = C64::new(0.0, 0.0);
    let hmo = {
        let n = orbitals.n_basis();
        let mut m = Array2::<C64>::zeros((n_orb, n_orb));
        for i in 0..n_orb {
            for j in 0..n_orb {
                let mut acc = C64::new(0.0, 0.0);
                for mu in 0..n {
                    for nu in 0..n {
                        acc += orbitals.c[(mu, i)].conj() * hc[(mu, nu)] * orbitals.c[(nu, j)];
                    }
                }
                m[(i, j)] = acc;
            }
        }
        m
    };
    for i in 0..n_orb {
        for j in 0..n_orb {
            one += hmo[(i, j)] * dinv[(j, i)];
        }
    }

    // <ij|w|kl> in physicists' ordering = chemists' (i k | j l) over MO columns
    let n = orbitals.n_basis();
    let mut mo = vec![C64::new(0.0, 0.0); n_orb * n_orb * n_orb * n_orb];
    let midx = |i: usize, k: usize, j: usize, l: usize| ((i * n_orb + k) * n_orb + j) * n_orb + l;
    for i in 0..n_orb {
        for k in 0..n_orb {
            for j in 0..n_orb {
                for l in 0..n_orb {
                    let mut acc = C64::new(0.0, 0.0);
                    for mu in 0..n {
                        for nu in 0..n {
                            let cik = orbitals.c[(mu, i)].conj() * orbitals.c[(nu, k)];
                            if cik.norm_sqr() < 1e-60 {
                                continue;
                            }
                            for la in 0..n {
                                for si in 0..n {
                                    acc += tables.eri.get(mu, nu, la, si)
                                        * cik
                                        * orbitals.c[(la, j)].conj()
                                        * orbitals.c[(si, l)];
                                }
                            }
                        }
                    }
                    mo[midx(i, k, j, l)] = acc;
                }
            }
        }
    }
    let mut two = C64::new(0.0, 0.0);
    for i in 0..n_orb {
        for j in 0..n_orb {
            for k in 0..n_orb {
                for l in 0..n_orb {
                    two += mo[midx(i, k, j, l)]
                        * (dinv[(k, i)] * dinv[(l, j)] - dinv[(l, i)] * dinv[(k, j)]);
                }
            }
        }
    }
    Ok(det * (one.re + 0.5 * two.re))
}

/// f(Phi, e) = E(Phi) - sum_i eps_i (||phi_i||^2 - 1).
pub fn lagrangian_f(orbitals: &OrbitalSet, energies: &OrbitalEnergies, tables: &OrthoTables) -> f64 {
    let e = energy(orbitals, tables).total;
    let mut penalty = 0.0;
    for i in 0..orbitals.n_orbitals() {
        let nrm: f64 = orbitals.c.column(i).iter().map(|z| z.norm_sqr()).sum();
        penalty += energies.eps[i] * (nrm - 1.0);
    }
    e - penalty
}

/// A vector with one complex orbital block per orbital plus one real scalar
/// per orbital: the common shape of points, increments and residuals.
#[derive(Debug, Clone)]
pub struct PairVector {
    pub orbitals: Array2<C64>,
    pub scalars: Array1<f64>,
}

impl PairVector {
    pub fn zeros(n_basis: usize, n_orbitals: usize) -> Self {
        PairVector {
            orbitals: Array2::zeros((n_basis, n_orbitals)),
            scalars: Array1::zeros(n_orbitals),
        }
    }
}

/// Residual map: orbital block i is F(Phi) c_i - eps_i c_i, scalar block i is
/// 1 - ||c_i||^2. Zero exactly at the critical points of the Lagrangian.
pub fn residual_f(
    orbitals: &OrbitalSet,
    energies: &OrbitalEnergies,
    tables: &OrthoTables,
) -> PairVector {
    let n = orbitals.n_basis();
    let n_orb = orbitals.n_orbitals();
    let f = fock(orbitals, tables);
    let mut out = PairVector::zeros(n, n_orb);
    for i in 0..n_orb {
        let ci = orbitals.c.column(i);
        for mu in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for nu in 0..n {
                acc += f[(mu, nu)] * ci[nu];
            }
            out.orbitals[(mu, i)] = acc - energies.eps[i] * ci[mu];
        }
        out.scalars[i] = 1.0 - ci.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    out
}

/// Bilinear pairing <<y1, y2>> = sum_i 2 Re <phi_i^1, phi_i^2> + sum_i e^1_i e^2_i.
pub fn pairing(y1: &PairVector, y2: &PairVector) -> Result<f64, HfError> {
    if y1.orbitals.dim() != y2.orbitals.dim() || y1.scalars.len() != y2.scalars.len() {
        return Err(HfError::DimensionMismatch(format!(
            "{:?}/{:?} vs {:?}/{:?}",
            y1.orbitals.dim(),
            y1.scalars.len(),
            y2.orbitals.dim(),
            y2.scalars.len()
        )));
    }
    let mut acc = 0.0;
    for (a, b) in y1.orbitals.iter().zip(y2.orbitals.iter()) {
        acc += 2.0 * (a.conj() * b).re;
    }
    for (a, b) in y1.scalars.iter().zip(y2.scalars.iter()) {
        acc += a * b;
    }
    Ok(acc)
}

/// sqrt(<<y, y>>) of a residual; the solver's convergence measure.
pub fn residual_norm(y: &PairVector) -> f64 {
    pairing(y, y).expect("self-pairing").sqrt()
}

/// eps_i = Re <phi_i, F(Phi) phi_i> for a feasible orbital set. The imaginary
/// part vanishes by Hermiticity and is asserted.
pub fn orbital_energies_from(
    orbitals: &OrbitalSet,
    tables: &OrthoTables,
) -> Result<OrbitalEnergies, HfError> {
    orbitals.require_feasible(FEASIBILITY_TOL)?;
    let f = fock(orbitals, tables);
    let n = orbitals.n_basis();
    let n_orb = orbitals.n_orbitals();
    let mut eps = Array1::<f64>::zeros(n_orb);
    for i in 0..n_orb {
        let ci = orbitals.c.column(i);
        let mut acc = C64::new(0.0, 0.0);
        for mu in 0..n {
            for nu in 0..n {
                acc += ci[mu].conj() * f[(mu, nu)] * ci[nu];
            }
        }
        if acc.im.abs() > 1e-12 * acc.norm().max(1.0) {
            return Err(HfError::NonRealExpectation { imag: acc.im });
        }
        eps[i] = acc.re;
    }
    Ok(OrbitalEnergies { eps })
}
