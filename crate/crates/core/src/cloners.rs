//! Universal symmetric qubit cloners as isometries from the input qubit into
//! `copies ⊗ ancilla`.
//!
//! The blank qubit and the machine's initial state are absorbed into the
//! map, which is specified only on the physical input qubit. Coefficients
//! are real and nonnegative throughout.
//!
//! Three families are built:
//!
//! * [`build_simple_cloner`]: `|0> -> a|00>|A> + b(|01>+|10>)|B>` and
//!   `|1> -> a|11>|Ã> + b(|01>+|10>)|B̃>`, with reduction factor `a²`.
//! * [`build_general_cloner`]: the same plus `c|11>|C>` / `c|00>|C̃>`
//!   branches; reduction factor `a² - c²`. Ancilla states are found by a
//!   seeded least-squares search.
//! * [`build_gisin_massar_3`]: the optimal 1→3 cloner on the symmetric
//!   three-qubit subspace with three orthonormal ancilla states.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, inner, kron_vec, norm, C64, ComplexMatrix, FactorShape, ALGEBRAIC_TOL};
use crate::states::{bloch_vector, BlochVector, DensityOperator, StateVector};

/// Largest reduction factor of a universal 1→2 cloner.
pub const OPTIMAL_ETA_12: f64 = 2.0 / 3.0;
/// Reduction factor of the optimal 1→3 cloner.
pub const ETA_13: f64 = 5.0 / 9.0;
/// Constraint residuals at or below this pass.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Allowed spread of the measured reduction factor across inputs and clones.
pub const ISOTROPY_TOL: f64 = 1e-9;
/// Seed for the 20 random probe states of [`measured_reduction_factor`].
pub const PROBE_SEED: u64 = 0x5eed_b10c;
pub const PROBE_RANDOM_STATES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClonerKind {
    Simple12,
    General12,
    GisinMassar13,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coefficients {
    Simple { a: f64, b: f64 },
    General { a: f64, b: f64, c: f64 },
    GisinMassar([f64; 3]),
}

/// Coefficients, ancilla overlaps and declared reduction factor of a cloner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClonerSpec {
    pub coefficients: Coefficients,
    pub eta: f64,
    pub ancilla_dim: usize,
    /// Real parts of the ancilla inner products, keyed like `"<B~|A>"`.
    pub overlaps: BTreeMap<String, f64>,
}

impl ClonerSpec {
    pub fn kind(&self) -> ClonerKind {
        match self.coefficients {
            Coefficients::Simple { .. } => ClonerKind::Simple12,
            Coefficients::General { .. } => ClonerKind::General12,
            Coefficients::GisinMassar(_) => ClonerKind::GisinMassar13,
        }
    }

    pub fn num_copies(&self) -> usize {
        match self.kind() {
            ClonerKind::GisinMassar13 => 3,
            _ => 2,
        }
    }

    /// Checks the normalization and reduction-factor invariants of the kind.
    pub fn validate(&self) -> Result<()> {
        let fail = |what: String| Err(Error::NonIsotropic(what));
        match self.coefficients {
            Coefficients::Simple { a, b } => {
                let r = (a * a + 2.0 * b * b - 1.0).abs();
                if r > 1e-12 {
                    return fail(format!("a² + 2b² - 1 = {r:e}"));
                }
            }
            Coefficients::General { a, b, c } => {
                let r = (a * a + 2.0 * b * b + c * c - 1.0).abs();
                if r > 1e-12 {
                    return fail(format!("a² + 2b² + c² - 1 = {r:e}"));
                }
            }
            Coefficients::GisinMassar(coeffs) => {
                for (i, &ai) in coeffs.iter().enumerate() {
                    let expected = gisin_massar_coefficient(i);
                    if (ai - expected).abs() > 1e-15 {
                        return fail(format!("a_{i} = {ai}, expected {expected}"));
                    }
                }
                if (self.eta - ETA_13).abs() > 1e-15 {
                    return fail(format!("eta = {} for the 1→3 cloner", self.eta));
                }
                return Ok(());
            }
        }
        if !(self.eta > 0.0 && self.eta <= OPTIMAL_ETA_12 + 1e-15) {
            return Err(Error::Domain {
                name: "eta",
                value: self.eta,
                domain: "(0, 2/3]",
            });
        }
        Ok(())
    }
}

/// Ancilla output states of the simple cloner.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleAncillas {
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub a_tilde: Vec<C64>,
    pub b_tilde: Vec<C64>,
}

/// Ancilla output states of the general cloner.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralAncillas {
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub c: Vec<C64>,
    pub a_tilde: Vec<C64>,
    pub b_tilde: Vec<C64>,
    pub c_tilde: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ancillas {
    Simple(SimpleAncillas),
    General(GeneralAncillas),
    /// `dim` orthonormal basis states, as used by the 1→3 cloner.
    Orthonormal(usize),
}

/// Isometry `C² -> (C²)^{⊗copies} ⊗ C^{ancilla_dim}`; column k is `U|k>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CloneIsometry {
    matrix: ComplexMatrix,
    num_copies: usize,
    ancilla_dim: usize,
}

impl CloneIsometry {
    pub fn new(matrix: ComplexMatrix, num_copies: usize, ancilla_dim: usize) -> Result<Self> {
        let expected = (1usize << num_copies) * ancilla_dim;
        if matrix.cols() != 2 || matrix.rows() != expected {
            return Err(Error::DimensionMismatch {
                op: "clone isometry",
                left_rows: matrix.rows(),
                left_cols: matrix.cols(),
                right_rows: expected,
                right_cols: 2,
            });
        }
        let iso = Self {
            matrix,
            num_copies,
            ancilla_dim,
        };
        let r = iso.isometry_residual();
        if r > ALGEBRAIC_TOL {
            return Err(Error::NotIsometric(r));
        }
        Ok(iso)
    }

    fn from_branches(zero: Vec<C64>, one: Vec<C64>, num_copies: usize, ancilla_dim: usize) -> Result<Self> {
        let rows = zero.len();
        let mut m = ComplexMatrix::zeros(rows, 2);
        for (i, (z, o)) in zero.into_iter().zip(one).enumerate() {
            m[(i, 0)] = z;
            m[(i, 1)] = o;
        }
        Self::new(m, num_copies, ancilla_dim)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn num_copies(&self) -> usize {
        self.num_copies
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Max elementwise deviation of `V†V` from `I₂`.
    pub fn isometry_residual(&self) -> f64 {
        let gram = self.matrix.adjoint().matmul(&self.matrix).expect("V†V");
        gram.max_abs_diff(&ComplexMatrix::identity(2)).expect("2x2")
    }

    /// Copies first, ancilla last.
    pub fn output_shape(&self) -> FactorShape {
        let mut dims = vec![2; self.num_copies];
        dims.push(self.ancilla_dim);
        FactorShape::new(dims).expect("positive dims")
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        Ok(StateVector::new(self.matrix.matvec(psi.amplitudes())?))
    }

    /// Reduced single-qubit state of every clone for input `psi`.
    pub fn clone_states(&self, psi: &StateVector) -> Result<Vec<DensityOperator>> {
        let out = DensityOperator::from_pure(&self.apply(psi)?, self.output_shape())?;
        (0..self.num_copies).map(|k| out.partial_trace(&[k])).collect()
    }
}

/// A cloner together with its ancilla realization.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltCloner {
    pub spec: ClonerSpec,
    pub ancillas: Ancillas,
    pub isometry: CloneIsometry,
}

/// Residual of every constraint equation, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub residuals: BTreeMap<String, f64>,
    pub max_residual: f64,
    pub pass: bool,
}

impl ConstraintReport {
    fn from_residuals(residuals: BTreeMap<String, f64>) -> Self {
        let max_residual = residuals.values().fold(0.0_f64, |m, r| m.max(r.abs()));
        Self {
            residuals,
            max_residual,
            pass: max_residual <= CONSTRAINT_TOL,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }
}

fn basis(dim: usize, i: usize) -> Vec<C64> {
    StateVector::basis(dim, i).amplitudes().to_vec()
}

fn lincomb(terms: &[(f64, &[C64])]) -> Vec<C64> {
    let n = terms[0].1.len();
    let mut out = vec![C64::default(); n];
    for (w, v) in terms {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x * w;
        }
    }
    out
}

/// `Σ coeff · |copies> ⊗ |ancilla>`.
fn branch(terms: &[(f64, &[C64], &[C64])]) -> Vec<C64> {
    let parts: Vec<Vec<C64>> = terms.iter().map(|(_, k, a)| kron_vec(k, a)).collect();
    let weighted: Vec<(f64, &[C64])> = terms.iter().zip(&parts).map(|((w, _, _), p)| (*w, p.as_slice())).collect();
    lincomb(&weighted)
}

fn two_qubit(bits: &str) -> Vec<C64> {
    basis(4, usize::from_str_radix(bits, 2).expect("bitstring"))
}

fn plus_unnormalized() -> Vec<C64> {
    lincomb(&[(1.0, &two_qubit("01")), (1.0, &two_qubit("10"))])
}

fn simple_isometry(a: f64, b: f64, anc: &SimpleAncillas) -> Result<CloneIsometry> {
    let plus = plus_unnormalized();
    let zero = branch(&[(a, &two_qubit("00"), &anc.a), (b, &plus, &anc.b)]);
    let one = branch(&[(a, &two_qubit("11"), &anc.a_tilde), (b, &plus, &anc.b_tilde)]);
    CloneIsometry::from_branches(zero, one, 2, anc.a.len())
}

fn general_isometry(a: f64, b: f64, cc: f64, anc: &GeneralAncillas) -> Result<CloneIsometry> {
    let plus = plus_unnormalized();
    let zero = branch(&[
        (a, &two_qubit("00"), &anc.a),
        (b, &plus, &anc.b),
        (cc, &two_qubit("11"), &anc.c),
    ]);
    let one = branch(&[
        (a, &two_qubit("11"), &anc.a_tilde),
        (b, &plus, &anc.b_tilde),
        (cc, &two_qubit("00"), &anc.c_tilde),
    ]);
    CloneIsometry::from_branches(zero, one, 2, anc.a.len())
}

/// Overlap `<B~|A>` (= `<A~|B>`) of the simple cloner with reduction factor `eta`.
pub fn simple_overlap(eta: f64) -> f64 {
    (eta / (2.0 * (1.0 - eta))).sqrt().min(1.0)
}

fn simple_realization(eta: f64, dim: usize) -> SimpleAncillas {
    let x = simple_overlap(eta);
    let y = (1.0 - x * x).max(0.0).sqrt();
    let e: Vec<Vec<C64>> = (0..dim).map(|i| basis(dim, i)).collect();
    SimpleAncillas {
        a: e[0].clone(),
        b: e[1].clone(),
        b_tilde: lincomb(&[(x, &e[0]), (y, &e[2])]),
        a_tilde: lincomb(&[(x, &e[1]), (y, &e[3])]),
    }
}

fn check_eta_12(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= OPTIMAL_ETA_12) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            domain: "(0, 2/3]",
        });
    }
    Ok(())
}

fn simple_overlaps(anc: &SimpleAncillas) -> BTreeMap<String, f64> {
    [
        ("<A|B>", inner(&anc.a, &anc.b)),
        ("<B|B~>", inner(&anc.b, &anc.b_tilde)),
        ("<A~|B~>", inner(&anc.a_tilde, &anc.b_tilde)),
        ("<B~|A>", inner(&anc.b_tilde, &anc.a)),
        ("<A~|B>", inner(&anc.a_tilde, &anc.b)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.re))
    .collect()
}

/// The η-parameterized simple cloner, `a = sqrt(eta)`, `b = sqrt((1-eta)/2)`.
///
/// Ancilla space is 4-dimensional: `|A> = e1`, `|B> = e2`,
/// `|B̃> = x e1 + sqrt(1-x²) e3`, `|Ã> = x e2 + sqrt(1-x²) e4` with
/// `x = sqrt(eta / (2(1-eta)))`, which is at most 1 exactly when `eta <= 2/3`.
pub fn build_simple_cloner(eta: f64) -> Result<BuiltCloner> {
    check_eta_12(eta)?;
    let a = eta.sqrt();
    let b = ((1.0 - eta) / 2.0).sqrt();
    let anc = simple_realization(eta, 4);
    let isometry = simple_isometry(a, b, &anc)?;
    let spec = ClonerSpec {
        coefficients: Coefficients::Simple { a, b },
        eta,
        ancilla_dim: 4,
        overlaps: simple_overlaps(&anc),
    };
    spec.validate()?;
    Ok(BuiltCloner {
        spec,
        ancillas: Ancillas::Simple(anc),
        isometry,
    })
}

fn max_unit_norm_deviation(vs: &[&[C64]]) -> f64 {
    vs.iter().map(|v| (norm(v) - 1.0).abs()).fold(0.0, f64::max)
}

/// Residuals of the simple cloner's normalization, orthogonality and
/// reduction-factor conditions for a given ancilla realization.
pub fn check_simple_constraints(spec: &ClonerSpec, anc: &SimpleAncillas) -> Result<ConstraintReport> {
    let (a, b) = match spec.coefficients {
        Coefficients::Simple { a, b } => (a, b),
        _ => {
            return Err(Error::WrongKind {
                expected: "Simple12".into(),
                found: format!("{:?}", spec.kind()),
            })
        }
    };
    let eta_overlap = b * a * inner(&anc.b_tilde, &anc.a) + a * b * inner(&anc.a_tilde, &anc.b);
    let mut r = BTreeMap::new();
    r.insert("norm".to_string(), a * a + 2.0 * b * b - 1.0);
    r.insert("<B|B~>".to_string(), inner(&anc.b, &anc.b_tilde).norm());
    r.insert("<A|B>".to_string(), inner(&anc.a, &anc.b).norm());
    r.insert("<A~|B~>".to_string(), inner(&anc.a_tilde, &anc.b_tilde).norm());
    r.insert("eta_overlap".to_string(), spec.eta - eta_overlap.re);
    r.insert("eta_a2".to_string(), spec.eta - a * a);
    r.insert(
        "unit_norms".to_string(),
        max_unit_norm_deviation(&[&anc.a, &anc.b, &anc.a_tilde, &anc.b_tilde]),
    );
    Ok(ConstraintReport::from_residuals(r))
}

/// Residuals of the general cloner's unitarity, symmetry and isotropy
/// conditions, plus ancilla norms and the isometry.
///
/// The imaginary-part condition is read as
/// `Im(b a <B̃|A> + a b <Ã|B>) = 0`, the companion of the real-part
/// reduction-factor condition.
pub fn check_general_constraints(a: f64, b: f64, cc: f64, anc: &GeneralAncillas) -> ConstraintReport {
    let eta_overlap = b * a * inner(&anc.b_tilde, &anc.a) + a * b * inner(&anc.a_tilde, &anc.b);
    let mut r = BTreeMap::new();
    r.insert("normalization".to_string(), a * a + 2.0 * b * b + cc * cc - 1.0);
    r.insert(
        "orthogonality".to_string(),
        (a * cc * inner(&anc.a, &anc.c_tilde) + 2.0 * b * b * inner(&anc.b, &anc.b_tilde)
            + a * cc * inner(&anc.c, &anc.a_tilde))
        .norm(),
    );
    r.insert("reduction_real".to_string(), a * a - cc * cc - eta_overlap.re);
    r.insert("reduction_imag".to_string(), eta_overlap.im);
    r.insert(
        "cross_bc".to_string(),
        (b * cc * inner(&anc.b, &anc.c_tilde) + cc * b * inner(&anc.c, &anc.b_tilde)).norm(),
    );
    r.insert(
        "symmetry_ab".to_string(),
        (a * b * inner(&anc.b, &anc.a) + b * cc * inner(&anc.c, &anc.b)).norm(),
    );
    r.insert(
        "symmetry_tilde".to_string(),
        (a * b * inner(&anc.b_tilde, &anc.a_tilde) + b * cc * inner(&anc.c_tilde, &anc.b_tilde)).norm(),
    );
    r.insert(
        "isotropy_ac".to_string(),
        (cc * a * inner(&anc.c_tilde, &anc.a) - a * cc * inner(&anc.a_tilde, &anc.c)).norm(),
    );
    r.insert(
        "unit_norms".to_string(),
        max_unit_norm_deviation(&[&anc.a, &anc.b, &anc.c, &anc.a_tilde, &anc.b_tilde, &anc.c_tilde]),
    );
    let iso = match general_isometry(a, b, cc, anc) {
        Ok(iso) => iso.isometry_residual(),
        Err(Error::NotIsometric(res)) => res,
        Err(_) => f64::INFINITY,
    };
    r.insert("isometry".to_string(), iso);
    ConstraintReport::from_residuals(r)
}

/// Budget and seed of the general-cloner feasibility search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Restarts evaluated together before checking for a feasible one.
    pub batch: usize,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 200,
            iterations: 5000,
            seed: DEFAULT_SEED,
            tolerance: CONSTRAINT_TOL,
            batch: 8,
        }
    }
}

const GENERAL_ANCILLA_DIM: usize = 6;

/// Most general symmetric isotropic 1→2 cloner with coefficients `a`, `c`
/// (`b` follows from normalization) and reduction factor `a² - c²`.
///
/// With `A, B, C` fixed to `e1, e2, e3` of a 6-dimensional real ancilla
/// space, `Ã, B̃, C̃` are found by random-restart Levenberg–Marquardt on the
/// stacked constraint residuals, projecting back to unit vectors after
/// every step. At `c = 0` the simple cloner's realization is used directly.
/// The returned cloner's declared η is cross-checked against
/// [`measured_reduction_factor`].
pub fn build_general_cloner(a: f64, cc: f64, config: &SearchConfig) -> Result<BuiltCloner> {
    if !(a.is_finite() && cc.is_finite() && a > cc && cc >= 0.0 && a * a + cc * cc <= 1.0 + 1e-12) {
        return Err(Error::Domain {
            name: "a",
            value: a,
            domain: "a > c >= 0 and a² + c² <= 1",
        });
    }
    let b = ((1.0 - a * a - cc * cc) / 2.0).max(0.0).sqrt();
    let eta = a * a - cc * cc;

    let anc = if cc == 0.0 {
        check_eta_12(eta)?;
        let s = simple_realization(eta, GENERAL_ANCILLA_DIM);
        GeneralAncillas {
            a: s.a,
            b: s.b,
            c: basis(GENERAL_ANCILLA_DIM, 2),
            a_tilde: s.a_tilde,
            b_tilde: s.b_tilde,
            c_tilde: basis(GENERAL_ANCILLA_DIM, 5),
        }
    } else {
        search_general(a, b, cc, config)?
    };

    let report = check_general_constraints(a, b, cc, &anc);
    if !report.pass {
        return Err(Error::Infeasible {
            restarts: config.restarts,
            best_residual: report.max_residual,
        });
    }
    let isometry = general_isometry(a, b, cc, &anc)?;
    let measured = measured_reduction_factor(&isometry)?;
    if (measured - eta).abs() > ISOTROPY_TOL {
        return Err(Error::NonIsotropic(format!(
            "declared eta {eta} but measured {measured}"
        )));
    }
    let overlaps = [
        ("<A|C~>", inner(&anc.a, &anc.c_tilde)),
        ("<C|A~>", inner(&anc.c, &anc.a_tilde)),
        ("<B|B~>", inner(&anc.b, &anc.b_tilde)),
        ("<B~|A>", inner(&anc.b_tilde, &anc.a)),
        ("<A~|B>", inner(&anc.a_tilde, &anc.b)),
        ("<B|C~>", inner(&anc.b, &anc.c_tilde)),
        ("<C|B~>", inner(&anc.c, &anc.b_tilde)),
        ("<B~|A~>", inner(&anc.b_tilde, &anc.a_tilde)),
        ("<C~|B~>", inner(&anc.c_tilde, &anc.b_tilde)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.re))
    .collect();
    let spec = ClonerSpec {
        coefficients: Coefficients::General { a, b, c: cc },
        eta,
        ancilla_dim: GENERAL_ANCILLA_DIM,
        overlaps,
    };
    spec.validate()?;
    Ok(BuiltCloner {
        spec,
        ancillas: Ancillas::General(anc),
        isometry,
    })
}

/// Unknowns: `Ã`, `B̃`, `C̃` stacked as three real 6-vectors.
const N_VARS: usize = 3 * GENERAL_ANCILLA_DIM;
const N_RES: usize = 8;
const AT: usize = 0;
const BT: usize = GENERAL_ANCILLA_DIM;
const CT: usize = 2 * GENERAL_ANCILLA_DIM;

struct Problem {
    a: f64,
    b: f64,
    c: f64,
}

impl Problem {
    fn residuals(&self, x: &[f64; N_VARS]) -> [f64; N_RES] {
        let (a, b, c) = (self.a, self.b, self.c);
        let dot = |p: usize, q: usize| (0..GENERAL_ANCILLA_DIM).map(|k| x[p + k] * x[q + k]).sum::<f64>();
        [
            a * c * (x[CT] + x[AT + 2]) + 2.0 * b * b * x[BT + 1],
            a * b * (x[BT] + x[AT + 1]) - (a * a - c * c),
            b * c * (x[CT + 1] + x[BT + 2]),
            a * b * dot(BT, AT) + b * c * dot(CT, BT),
            c * a * x[CT] - a * c * x[AT + 2],
            dot(AT, AT) - 1.0,
            dot(BT, BT) - 1.0,
            dot(CT, CT) - 1.0,
        ]
    }

    fn jacobian(&self, x: &[f64; N_VARS]) -> [[f64; N_VARS]; N_RES] {
        let (a, b, c) = (self.a, self.b, self.c);
        let mut j = [[0.0; N_VARS]; N_RES];
        j[0][CT] = a * c;
        j[0][AT + 2] = a * c;
        j[0][BT + 1] = 2.0 * b * b;
        j[1][BT] = a * b;
        j[1][AT + 1] = a * b;
        j[2][CT + 1] = b * c;
        j[2][BT + 2] = b * c;
        for k in 0..GENERAL_ANCILLA_DIM {
            j[3][AT + k] = a * b * x[BT + k];
            j[3][BT + k] = a * b * x[AT + k] + b * c * x[CT + k];
            j[3][CT + k] = b * c * x[BT + k];
            j[5][AT + k] = 2.0 * x[AT + k];
            j[6][BT + k] = 2.0 * x[BT + k];
            j[7][CT + k] = 2.0 * x[CT + k];
        }
        j[4][CT] = c * a;
        j[4][AT + 2] = -a * c;
        j
    }
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn normalize_blocks(x: &mut [f64; N_VARS]) {
    for start in [AT, BT, CT] {
        let block = &mut x[start..start + GENERAL_ANCILLA_DIM];
        let n = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            block.iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// Solves the symmetric positive definite system `m y = rhs` by Cholesky.
fn cholesky_solve(m: &[[f64; N_RES]; N_RES], rhs: &[f64; N_RES]) -> Option<[f64; N_RES]> {
    let mut l = [[0.0; N_RES]; N_RES];
    for i in 0..N_RES {
        for j in 0..=i {
            let s = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0; N_RES];
    for i in 0..N_RES {
        y[i] = (rhs[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = [0.0; N_RES];
    for i in (0..N_RES).rev() {
        x[i] = (y[i] - (i + 1..N_RES).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// One restart: returns the final point and its max residual.
fn descend(problem: &Problem, seed: u64, iterations: usize, tol: f64) -> ([f64; N_VARS], f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = [0.0; N_VARS];
    x.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    normalize_blocks(&mut x);

    let mut r = problem.residuals(&x);
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    // stop well below the acceptance tolerance so rounding cannot push us over
    let target = tol * 1e-2;
    for _ in 0..iterations {
        if max_abs(&r) <= target {
            break;
        }
        let j = problem.jacobian(&x);
        // minimum-norm damped Gauss-Newton step: dx = -Jᵀ (J Jᵀ + λI)⁻¹ r
        let mut jjt = [[0.0; N_RES]; N_RES];
        for p in 0..N_RES {
            for q in 0..N_RES {
                jjt[p][q] = (0..N_VARS).map(|k| j[p][k] * j[q][k]).sum();
            }
            jjt[p][p] += lambda;
        }
        let Some(y) = cholesky_solve(&jjt, &r) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = x;
        for k in 0..N_VARS {
            trial[k] -= (0..N_RES).map(|p| j[p][k] * y[p]).sum::<f64>();
        }
        normalize_blocks(&mut trial);
        let tr = problem.residuals(&trial);
        let tc = sum_sq(&tr);
        if tc < cost {
            x = trial;
            r = tr;
            cost = tc;
            lambda = (lambda / 3.0).max(1e-15);
        } else {
            lambda = (lambda * 4.0).min(1e8);
        }
    }
    (x, max_abs(&r))
}

fn ancillas_from_vars(x: &[f64; N_VARS]) -> GeneralAncillas {
    let vec_of = |start: usize| -> Vec<C64> {
        x[start..start + GENERAL_ANCILLA_DIM].iter().map(|&v| c(v, 0.0)).collect()
    };
    GeneralAncillas {
        a: basis(GENERAL_ANCILLA_DIM, 0),
        b: basis(GENERAL_ANCILLA_DIM, 1),
        c: basis(GENERAL_ANCILLA_DIM, 2),
        a_tilde: vec_of(AT),
        b_tilde: vec_of(BT),
        c_tilde: vec_of(CT),
    }
}

/// Restarts run in fixed-size batches; within the first batch holding a
/// feasible point the lowest full residual wins, ties to the lower index.
fn search_general(a: f64, b: f64, cc: f64, config: &SearchConfig) -> Result<GeneralAncillas> {
    let problem = Problem { a, b, c: cc };
    let batch = config.batch.max(1);
    let mut best_residual = f64::INFINITY;
    let mut start = 0;
    while start < config.restarts {
        let end = (start + batch).min(config.restarts);
        let mut results: Vec<(usize, f64, GeneralAncillas)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let (x, _) = descend(&problem, config.seed.wrapping_add(i as u64), config.iterations, config.tolerance);
                let anc = ancillas_from_vars(&x);
                let res = check_general_constraints(a, b, cc, &anc).max_residual;
                (i, res, anc)
            })
            .collect();
        results.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        let (_, res, anc) = results.swap_remove(0);
        best_residual = best_residual.min(res);
        if res <= config.tolerance {
            return Ok(anc);
        }
        start = end;
    }
    Err(Error::Infeasible {
        restarts: config.restarts,
        best_residual,
    })
}

pub fn gisin_massar_coefficient(i: usize) -> f64 {
    ((3 - i) as f64 / 6.0).sqrt()
}

/// Normalized permutation-symmetric three-qubit state with `ones` ones.
pub fn symmetric_state(ones: usize) -> Vec<C64> {
    assert!(ones <= 3);
    let members: Vec<usize> = (0..8usize).filter(|b| b.count_ones() as usize == ones).collect();
    let w = 1.0 / (members.len() as f64).sqrt();
    let mut v = vec![C64::default(); 8];
    for m in members {
        v[m] = c(w, 0.0);
    }
    v
}

/// Optimal 1→3 cloner with orthonormal ancilla states `|A_0>, |A_1>, |A_2>`:
/// `|0> -> Σ a_i |A_i> ⊗ |{0,3-i},{1,i}>` and
/// `|1> -> Σ a_i |A_{2-i}> ⊗ |{0,i},{1,3-i}>`, `a_i = sqrt((3-i)/6)`.
///
/// Vectors are laid out clones first, ancilla last.
pub fn build_gisin_massar_3() -> Result<BuiltCloner> {
    let coeffs = [0, 1, 2].map(gisin_massar_coefficient);
    let anc: Vec<Vec<C64>> = (0..3).map(|i| basis(3, i)).collect();
    let sym: Vec<Vec<C64>> = (0..=3).map(symmetric_state).collect();
    let zero_terms: Vec<(f64, &[C64], &[C64])> = (0..3)
        .map(|i| (coeffs[i], sym[i].as_slice(), anc[i].as_slice()))
        .collect();
    let one_terms: Vec<(f64, &[C64], &[C64])> = (0..3)
        .map(|i| (coeffs[i], sym[3 - i].as_slice(), anc[2 - i].as_slice()))
        .collect();
    let isometry = CloneIsometry::from_branches(branch(&zero_terms), branch(&one_terms), 3, 3)?;
    let overlaps = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (format!("<A{i}|A{j}>"), inner(&anc[i], &anc[j]).re))
        .collect();
    let spec = ClonerSpec {
        coefficients: Coefficients::GisinMassar(coeffs),
        eta: ETA_13,
        ancilla_dim: 3,
        overlaps,
    };
    spec.validate()?;
    Ok(BuiltCloner {
        spec,
        ancillas: Ancillas::Orthonormal(3),
        isometry,
    })
}

/// The six Bloch-axis states followed by the seeded random probe states.
pub fn probe_states() -> Vec<StateVector> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut out = vec![
        StateVector::qubit(0.0, 0.0),
        StateVector::qubit(PI, 0.0),
        StateVector::qubit(FRAC_PI_2, 0.0),
        StateVector::qubit(FRAC_PI_2, PI),
        StateVector::qubit(FRAC_PI_2, FRAC_PI_2),
        StateVector::qubit(FRAC_PI_2, -FRAC_PI_2),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    for _ in 0..PROBE_RANDOM_STATES {
        let theta = (1.0 - 2.0 * rng.gen::<f64>()).acos();
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        out.push(StateVector::qubit(theta, phi));
    }
    out
}

/// Common Bloch-vector shrink factor of every clone over the probe states.
///
/// Fails with [`Error::NonIsotropic`] if some clone's Bloch vector is not
/// parallel to the input's, or the factor varies across inputs or clones,
/// by more than [`ISOTROPY_TOL`].
pub fn measured_reduction_factor(iso: &CloneIsometry) -> Result<f64> {
    let mut factors = Vec::new();
    for (n, psi) in probe_states().iter().enumerate() {
        let s = BlochVector::of_pure(psi)?;
        for (k, rho) in iso.clone_states(psi)?.iter().enumerate() {
            let r = bloch_vector(rho)?;
            let eta = r.dot(&s);
            let off_axis = r.distance(&s.scaled(eta));
            if off_axis > ISOTROPY_TOL {
                return Err(Error::NonIsotropic(format!(
                    "probe {n}, clone {k}: Bloch vector off the input axis by {off_axis:e}"
                )));
            }
            factors.push(eta);
        }
    }
    let lo = factors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = factors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > ISOTROPY_TOL {
        return Err(Error::NonIsotropic(format!("reduction factor varies in [{lo}, {hi}]")));
    }
    Ok(factors.iter().sum::<f64>() / factors.len() as f64)
}
