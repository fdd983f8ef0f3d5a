//! One- and two-electron integrals over contracted s-type Gaussians.
//!
//! The one-electron operator is h = -laplacian + V with
//! V(x) = -sum_j Z_j / |x - xbar_j|; note the full Laplacian (no factor 1/2),
//! so the kinetic self-energy of a normalized primitive is 3*alpha.
//! Electron-repulsion integrals use chemists' notation
//! (mu nu | lambda sigma) = int chi_mu(x) chi_nu(x) |x-y|^-1 chi_la(y) chi_si(y).

pub mod boys;
pub mod quadrature;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use boys::boys_f0_raw;

#[derive(Debug, Error)]
pub enum IntegralError {
    #[error("Boys function argument must be nonnegative, got {t}")]
    BoysDomain { t: f64 },
    #[error("primitive exponent must be positive, got {exponent}")]
    NonPositiveExponent { exponent: f64 },
    #[error("basis set has no shells")]
    EmptyBasis,
    #[error("shell {shell} has no primitives")]
    EmptyShell { shell: usize },
    #[error(
        "overlap matrix numerically singular (min eigenvalue {min_eig:e}); \
         shells {shell_a} and {shell_b} are linearly dependent"
    )]
    LinearDependence {
        min_eig: f64,
        shell_a: usize,
        shell_b: usize,
    },
    #[error("molecule: {0}")]
    BadMolecule(String),
    #[error("basis references nucleus index {index} but molecule has {n_nuclei}")]
    BadCenterIndex { index: usize, n_nuclei: usize },
    #[error("quadrature oracle did not reach requested accuracy {requested:e} (got {achieved:e})")]
    OracleAccuracy { requested: f64, achieved: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Point nucleus: charge and position in bohr.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Nucleus {
    #[serde(rename = "Z")]
    pub charge: f64,
    #[serde(rename = "pos")]
    pub position: [f64; 3],
}

/// Fixed data of the problem: nuclei and electron count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub nuclei: Vec<Nucleus>,
    pub n_electrons: usize,
}

impl MoleculeSpec {
    pub fn new(nuclei: Vec<Nucleus>, n_electrons: usize) -> Result<Self, IntegralError> {
        let m = MoleculeSpec {
            nuclei,
            n_electrons,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), IntegralError> {
        if self.nuclei.is_empty() {
            return Err(IntegralError::BadMolecule("no nuclei".into()));
        }
        for (j, n) in self.nuclei.iter().enumerate() {
            if !(n.charge > 0.0) {
                return Err(IntegralError::BadMolecule(format!(
                    "nucleus {j} has non-positive charge {}",
                    n.charge
                )));
            }
        }
        for i in 0..self.nuclei.len() {
            for j in (i + 1)..self.nuclei.len() {
                let d2: f64 = (0..3)
                    .map(|k| (self.nuclei[i].position[k] - self.nuclei[j].position[k]).powi(2))
                    .sum();
                if d2 < 1e-20 {
                    return Err(IntegralError::BadMolecule(format!(
                        "nuclei {i} and {j} coincide"
                    )));
                }
            }
        }
        if self.n_electrons < 1 {
            return Err(IntegralError::BadMolecule(
                "n_electrons must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Primitive Gaussian exp(-alpha |r - center|^2) with a contraction weight.
/// In a constructed [`BasisSet`] the coefficient already includes the
/// primitive normalization and the contraction rescaling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Primitive {
    pub exponent: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone)]
pub struct Shell {
    pub center: [f64; 3],
    pub primitives: Vec<Primitive>,
}

/// Contracted s-function basis. Construction normalizes every contracted
/// function to unit self-overlap (input coefficients are understood relative
/// to normalized primitives, the usual convention of published tables).
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub shells: Vec<Shell>,
}

impl BasisSet {
    pub fn new(mut shells: Vec<Shell>) -> Result<Self, IntegralError> {
        if shells.is_empty() {
            return Err(IntegralError::EmptyBasis);
        }
        for (si, shell) in shells.iter_mut().enumerate() {
            if shell.primitives.is_empty() {
                return Err(IntegralError::EmptyShell { shell: si });
            }
            for p in &mut shell.primitives {
                if !(p.exponent > 0.0) {
                    return Err(IntegralError::NonPositiveExponent {
                        exponent: p.exponent,
                    });
                }
                p.coefficient *= (2.0 * p.exponent / PI).powf(0.75);
            }
            let mut s = 0.0;
            for a in &shell.primitives {
                for b in &shell.primitives {
                    s += a.coefficient
                        * b.coefficient
                        * overlap_prim(a.exponent, shell.center, b.exponent, shell.center);
                }
            }
            let scale = 1.0 / s.sqrt();
            for p in &mut shell.primitives {
                p.coefficient *= scale;
            }
        }
        Ok(BasisSet { shells })
    }

    pub fn len(&self) -> usize {
        self.shells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shells.is_empty()
    }
}

// ---- closed-form primitive integrals ------------------------------------

/// Overlap of two unnormalized s primitives.
pub fn overlap_prim(alpha: f64, a: [f64; 3], beta: f64, b: [f64; 3]) -> f64 {
    let p = alpha + beta;
    let mu = alpha * beta / p;
    (PI / p).powf(1.5) * (-mu * dist2(a, b)).exp()
}

/// <g_a | -laplacian | g_b> for unnormalized s primitives.
pub fn kinetic_prim(alpha: f64, a: [f64; 3], beta: f64, b: [f64; 3]) -> f64 {
    let p = alpha + beta;
    let mu = alpha * beta / p;
    let r2 = dist2(a, b);
    2.0 * mu * (3.0 - 2.0 * mu * r2) * overlap_prim(alpha, a, beta, b)
}

/// <g_a | V | g_b> with V(x) = -sum_j Z_j / |x - xbar_j|.
pub fn nuclear_prim(alpha: f64, a: [f64; 3], beta: f64, b: [f64; 3], molecule: &MoleculeSpec) -> f64 {
    let p = alpha + beta;
    let mu = alpha * beta / p;
    let pc = product_center(alpha, a, beta, b);
    let pref = -2.0 * PI / p * (-mu * dist2(a, b)).exp();
    let mut v = 0.0;
    for nuc in &molecule.nuclei {
        v += nuc.charge * pref * boys_f0_raw(p * dist2(pc, nuc.position));
    }
    v
}

/// Repulsion integral (ab|cd) of unnormalized s primitives.
#[allow(clippy::too_many_arguments)]
pub fn eri_prim(
    alpha: f64,
    a: [f64; 3],
    beta: f64,
    b: [f64; 3],
    gamma: f64,
    c: [f64; 3],
    delta: f64,
    d: [f64; 3],
) -> f64 {
    let p = alpha + beta;
    let q = gamma + delta;
    let pp = product_center(alpha, a, beta, b);
    let qq = product_center(gamma, c, delta, d);
    let rho = p * q / (p + q);
    let pref = 2.0 * PI.powf(2.5) / (p * q * (p + q).sqrt());
    pref * (-(alpha * beta / p) * dist2(a, b) - (gamma * delta / q) * dist2(c, d)).exp()
        * boys_f0_raw(rho * dist2(pp, qq))
}

fn product_center(alpha: f64, a: [f64; 3], beta: f64, b: [f64; 3]) -> [f64; 3] {
    let p = alpha + beta;
    [
        (alpha * a[0] + beta * b[0]) / p,
        (alpha * a[1] + beta * b[1]) / p,
        (alpha * a[2] + beta * b[2]) / p,
    ]
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

// ---- contracted integrals over shells ------------------------------------

fn contracted_pair(
    si: &Shell,
    sj: &Shell,
    f: impl Fn(f64, [f64; 3], f64, [f64; 3]) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for a in &si.primitives {
        for b in &sj.primitives {
            acc += a.coefficient * b.coefficient * f(a.exponent, si.center, b.exponent, sj.center);
        }
    }
    acc
}

fn contracted_eri(si: &Shell, sj: &Shell, sk: &Shell, sl: &Shell) -> f64 {
    let mut acc = 0.0;
    for a in &si.primitives {
        for b in &sj.primitives {
            for c in &sk.primitives {
                for d in &sl.primitives {
                    acc += a.coefficient
                        * b.coefficient
                        * c.coefficient
                        * d.coefficient
                        * eri_prim(
                            a.exponent, si.center, b.exponent, sj.center, c.exponent, sk.center,
                            d.exponent, sl.center,
                        );
                }
            }
        }
    }
    acc
}

/// Dense 4-index repulsion tensor with the full 8-fold permutation symmetry
/// holding bitwise: each canonical value is computed once and mirrored.
#[derive(Debug, Clone)]
pub struct EriTensor {
    pub n: usize,
    data: Vec<f64>,
}

impl EriTensor {
    fn zeros(n: usize) -> Self {
        EriTensor {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    #[inline]
    pub fn get(&self, mu: usize, nu: usize, la: usize, si: usize) -> f64 {
        self.data[((mu * self.n + nu) * self.n + la) * self.n + si]
    }

    #[inline]
    fn set(&mut self, mu: usize, nu: usize, la: usize, si: usize, v: f64) {
        self.data[((mu * self.n + nu) * self.n + la) * self.n + si] = v;
    }

    fn scatter(&mut self, mu: usize, nu: usize, la: usize, si: usize, v: f64) {
        self.set(mu, nu, la, si, v);
        self.set(nu, mu, la, si, v);
        self.set(mu, nu, si, la, v);
        self.set(nu, mu, si, la, v);
        self.set(la, si, mu, nu, v);
        self.set(si, la, mu, nu, v);
        self.set(la, si, nu, mu, v);
        self.set(si, la, nu, mu, v);
    }
}

/// Canonical (mu >= nu, la >= si, pair(mu,nu) >= pair(la,si)) quadruples.
fn canonical_quadruples(n: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    let pair = |i: usize, j: usize| i * (i + 1) / 2 + j;
    for mu in 0..n {
        for nu in 0..=mu {
            for la in 0..n {
                for si in 0..=la {
                    if pair(mu, nu) >= pair(la, si) {
                        out.push((mu, nu, la, si));
                    }
                }
            }
        }
    }
    out
}

/// All matrices and the repulsion tensor over the contracted basis,
/// in the raw (non-orthogonal) basis.
#[derive(Debug, Clone)]
pub struct IntegralTables {
    pub n_basis: usize,
    pub s_ov: Array2<f64>,
    pub kinetic: Array2<f64>,
    pub v_nuc: Array2<f64>,
    pub h_core: Array2<f64>,
    pub eri: EriTensor,
    pub s_min_eigenvalue: f64,
}

/// Which one-electron integral an oracle call refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneElectronKind {
    Overlap,
    Kinetic,
    Nuclear,
}

/// Assemble every table. Deterministic regardless of the rayon worker count:
/// each canonical slot is computed by exactly one task and the scatter order
/// is fixed.
pub fn build_tables(
    molecule: &MoleculeSpec,
    basis: &BasisSet,
) -> Result<IntegralTables, IntegralError> {
    molecule.validate()?;
    let n = basis.len();
    let mut s_ov = Array2::<f64>::zeros((n, n));
    let mut kinetic = Array2::<f64>::zeros((n, n));
    let mut v_nuc = Array2::<f64>::zeros((n, n));

    let upper: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .collect();
    let one: Vec<(f64, f64, f64)> = upper
        .par_iter()
        .map(|&(i, j)| {
            let si = &basis.shells[i];
            let sj = &basis.shells[j];
            (
                contracted_pair(si, sj, overlap_prim),
                contracted_pair(si, sj, kinetic_prim),
                contracted_pair(si, sj, |a, ac, b, bc| nuclear_prim(a, ac, b, bc, molecule)),
            )
        })
        .collect();
    for (&(i, j), &(s, t, v)) in upper.iter().zip(one.iter()) {
        s_ov[(i, j)] = s;
        s_ov[(j, i)] = s;
        kinetic[(i, j)] = t;
        kinetic[(j, i)] = t;
        v_nuc[(i, j)] = v;
        v_nuc[(j, i)] = v;
    }
    let h_core = &kinetic + &v_nuc;

    let (s_eigs, s_vecs) = linalg::eigh_real(&s_ov)?;
    let s_min = s_eigs[0];
    if s_min < 1e-10 {
        // name the two shells that dominate the near-null direction
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            s_vecs[(b, 0)]
                .abs()
                .partial_cmp(&s_vecs[(a, 0)].abs())
                .unwrap()
        });
        return Err(IntegralError::LinearDependence {
            min_eig: s_min,
            shell_a: idx[0].min(*idx.get(1).unwrap_or(&idx[0])),
            shell_b: idx[0].max(*idx.get(1).unwrap_or(&idx[0])),
        });
    }

    let quads = canonical_quadruples(n);
    let vals: Vec<f64> = quads
        .par_iter()
        .map(|&(mu, nu, la, si)| {
            contracted_eri(
                &basis.shells[mu],
                &basis.shells[nu],
                &basis.shells[la],
                &basis.shells[si],
            )
        })
        .collect();
    let mut eri = EriTensor::zeros(n);
    for (&(mu, nu, la, si), &v) in quads.iter().zip(vals.iter()) {
        eri.scatter(mu, nu, la, si, v);
    }

    Ok(IntegralTables {
        n_basis: n,
        s_ov,
        kinetic,
        v_nuc,
        h_core,
        eri,
        s_min_eigenvalue: s_min,
    })
}

/// Tables transformed once into the Löwdin-orthonormalized basis, where the
/// discretized L2 inner product is the plain complex dot product. Everything
/// downstream consumes this form.
#[derive(Debug, Clone)]
pub struct OrthoTables {
    pub n_basis: usize,
    /// One-electron operator h in the orthonormal basis (real symmetric).
    pub h: Array2<f64>,
    pub eri: EriTensor,
    /// The S^{-1/2} transform that produced this basis.
    pub x: Array2<f64>,
    /// Spectrum of h, ascending, with orthonormal eigenvectors as columns.
    pub h_eigenvalues: ndarray::Array1<f64>,
    pub h_eigenvectors: Array2<f64>,
}

impl IntegralTables {
    pub fn orthonormalize(&self) -> Result<OrthoTables, IntegralError> {
        let n = self.n_basis;
        let x = linalg::loewdin_half_inverse(&self.s_ov)?;
        let mut h = x.t().dot(&self.h_core).dot(&x);
        // exact symmetry by averaging the transpose
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (h[(i, j)] + h[(j, i)]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }

        // four-stage O(n^5) transform, then re-canonicalize so the 8-fold
        // symmetry is bitwise again
        let mut t = vec![0.0f64; n * n * n * n];
        let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
        // stage 1: mu
        for a in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let mut acc = 0.0;
                        for p in 0..n {
                            acc += x[(p, a)] * self.eri.get(p, q, r, s);
                        }
                        t[idx(a, q, r, s)] = acc;
                    }
                }
            }
        }
        let mut t2 = vec![0.0f64; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let mut acc = 0.0;
                        for q in 0..n {
                            acc += x[(q, b)] * t[idx(a, q, r, s)];
                        }
                        t2[idx(a, b, r, s)] = acc;
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for s in 0..n {
                        let mut acc = 0.0;
                        for r in 0..n {
                            acc += x[(r, c)] * t2[idx(a, b, r, s)];
                        }
                        t[idx(a, b, c, s)] = acc;
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut acc = 0.0;
                        for s in 0..n {
                            acc += x[(s, d)] * t[idx(a, b, c, s)];
                        }
                        t2[idx(a, b, c, d)] = acc;
                    }
                }
            }
        }
        let mut eri = EriTensor::zeros(n);
        for &(mu, nu, la, si) in &canonical_quadruples(n) {
            let perms = [
                (mu, nu, la, si),
                (nu, mu, la, si),
                (mu, nu, si, la),
                (nu, mu, si, la),
                (la, si, mu, nu),
                (si, la, mu, nu),
                (la, si, nu, mu),
                (si, la, nu, mu),
            ];
            let avg = perms.iter().map(|&(a, b, c, d)| t2[idx(a, b, c, d)]).sum::<f64>() / 8.0;
            eri.scatter(mu, nu, la, si, avg);
        }

        let (h_eigenvalues, h_eigenvectors) = linalg::eigh_real(&h)?;
        Ok(OrthoTables {
            n_basis: n,
            h,
            eri,
            x,
            h_eigenvalues,
            h_eigenvectors,
        })
    }
}

/// Quadrature-oracle entry point mirroring the closed-form primitives.
pub mod oracle {
    pub use super::quadrature::{oracle_eri as eri, oracle_kinetic as kinetic,
        oracle_nuclear as nuclear, oracle_overlap as overlap};
    pub use super::quadrature::contracted;
}

// ---- JSON file formats ----------------------------------------------------

/// On-disk molecule format:
/// `{"nuclei":[{"Z":1.0,"pos":[0,0,0]},...],"n_electrons":2}`
pub fn molecule_from_json(text: &str) -> Result<MoleculeSpec, serde_json::Error> {
    serde_json::from_str::<MoleculeSpec>(text)
}

#[derive(Debug, Serialize, Deserialize)]
struct BasisFilePrimitive {
    exponent: f64,
    coefficient: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BasisFileShell {
    center_index: usize,
    primitives: Vec<BasisFilePrimitive>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BasisFile {
    shells: Vec<BasisFileShell>,
}

/// On-disk basis format:
/// `{"shells":[{"center_index":0,"primitives":[{"exponent":...,"coefficient":...}]}]}`
/// with `center_index` referring to molecule nuclei.
pub fn basis_from_json(text: &str, molecule: &MoleculeSpec) -> Result<BasisSet, BasisParseError> {
    let parsed: BasisFile = serde_json::from_str(text)?;
    let mut shells = Vec::with_capacity(parsed.shells.len());
    for sh in parsed.shells {
        if sh.center_index >= molecule.nuclei.len() {
            return Err(BasisParseError::Integral(IntegralError::BadCenterIndex {
                index: sh.center_index,
                n_nuclei: molecule.nuclei.len(),
            }));
        }
        shells.push(Shell {
            center: molecule.nuclei[sh.center_index].position,
            primitives: sh
                .primitives
                .iter()
                .map(|p| Primitive {
                    exponent: p.exponent,
                    coefficient: p.coefficient,
                })
                .collect(),
        });
    }
    Ok(BasisSet::new(shells)?)
}

#[derive(Debug, Error)]
pub enum BasisParseError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Integral(#[from] IntegralError),
}
