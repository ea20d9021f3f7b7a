//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any FAIL.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex64;
use qbroadcast::broadcast::{default_alpha_grid, default_eta_grid, numeric_alpha_range, run_broadcast, sweep};
use qbroadcast::cloners::{
    build_general_cloner, build_gisin_massar_3, build_simple_cloner, check_simple_constraints,
    measured_reduction_factor, Ancillas, BuiltCloner, SearchConfig,
};
use qbroadcast::linalg::{hermitian_eigenvalues, ComplexMatrix, FactorShape};
use qbroadcast::separability::{
    max_entangled_copies, nonlocal_cloning_range, nonlocal_scaling, ppt_verdict, ScalingVerdict, Verdict,
    DEFAULT_PPT_TOL,
};
use qbroadcast::states::{
    bloch_vector, fidelity_pure, fit_scaled_form, phi_plus, BlochVector, DensityOperator, EntangledInput,
    StateVector,
};
use qbroadcast::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Inconclusive(String),
}

type Criterion = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return Outcome::Fail(format!("{}: {e}", stringify!($e))),
        }
    };
}

fn real4(entries: [[f64; 4]; 4]) -> ComplexMatrix {
    ComplexMatrix::from_real(4, 4, &entries.concat()).unwrap()
}

/// Same-site pair written out by hand.
fn oracle_local(a2: f64, eta: f64) -> ComplexMatrix {
    let b2 = 1.0 - a2;
    let h = (1.0 - eta) / 2.0;
    real4([
        [a2 * eta, 0.0, 0.0, 0.0],
        [0.0, h, h, 0.0],
        [0.0, h, h, 0.0],
        [0.0, 0.0, 0.0, b2 * eta],
    ])
}

/// Cross-site pair written out by hand.
fn oracle_nonlocal(a2: f64, eta: f64) -> ComplexMatrix {
    let b2 = 1.0 - a2;
    let n = ((1.0 - eta) / 2.0).powi(2);
    let m = (1.0 - eta * eta) / 4.0;
    let coh = a2.sqrt() * b2.sqrt() * eta * eta;
    real4([
        [a2 * eta + n, 0.0, 0.0, coh],
        [0.0, m, 0.0, 0.0],
        [0.0, 0.0, m, 0.0],
        [coh, 0.0, 0.0, b2 * eta + n],
    ])
}

fn oracle_nonlocal_3(a2: f64) -> ComplexMatrix {
    let b2 = 1.0 - a2;
    let coh = 25.0 * a2.sqrt() * b2.sqrt() / 81.0;
    real4([
        [(45.0 * a2 + 4.0) / 81.0, 0.0, 0.0, coh],
        [0.0, 14.0 / 81.0, 0.0, 0.0],
        [0.0, 0.0, 14.0 / 81.0, 0.0],
        [coh, 0.0, 0.0, (45.0 * b2 + 4.0) / 81.0],
    ])
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cloner = tri!(build_simple_cloner(2.0 / 3.0)).isometry;
    let range = tri!(numeric_alpha_range(&cloner, 1e-8));
    let secs = start.elapsed().as_secs_f64();
    let half = 39f64.sqrt() / 16.0;
    let (lo, hi) = match range.bounds {
        Some(b) => b,
        None => return Outcome::Fail("empty numeric range".into()),
    };
    let err = (lo - (0.5 - half)).abs().max((hi - (0.5 + half)).abs());
    ensure(
        err <= 1e-6 && secs < 10.0 && range.note.is_none(),
        format!("numeric [{lo:.10}, {hi:.10}], endpoint error {err:.1e}, {secs:.2} s"),
    )
}

fn criterion_2() -> Outcome {
    let target = 1.0 / 3f64.sqrt();
    let mut found = None;
    for k in 0..=200 {
        let eta = 2.0 / 3.0 - k as f64 * 1e-3;
        let cloner = tri!(build_simple_cloner(eta)).isometry;
        if tri!(numeric_alpha_range(&cloner, 1e-6)).is_empty() {
            found = Some(eta);
            break;
        }
    }
    let Some(eta) = found else {
        return Outcome::Fail("no empty interval above eta = 0.4667".into());
    };
    let fidelity = (1.0 + eta) / 2.0;
    let fidelity_target = (1.0 + target) / 2.0;
    ensure(
        (eta - target).abs() <= 1e-3 && (fidelity - fidelity_target).abs() <= 5e-4,
        format!(
            "first empty interval at eta {eta:.6} (|Δ| {:.1e}), fidelity {fidelity:.7} vs {fidelity_target:.7}",
            (eta - target).abs()
        ),
    )
}

fn criterion_3() -> Outcome {
    let etas = default_eta_grid();
    let alphas = default_alpha_grid();
    let rows = sweep(&etas, &alphas);
    let flagged = rows.iter().filter(|r| r.disagreement).count();
    let mut worst: f64 = 0.0;
    for &eta in &etas {
        let cloner = tri!(build_simple_cloner(eta)).isometry;
        for &a2 in &alphas {
            let r = tri!(run_broadcast(&tri!(EntangledInput::new(a2)), &cloner));
            let (lo, nl) = (oracle_local(a2, eta), oracle_nonlocal(a2, eta));
            for p in &r.local_pairs {
                worst = worst.max(tri!(p.state.matrix().max_abs_diff(&lo)));
            }
            for p in &r.nonlocal_pairs {
                worst = worst.max(tri!(p.state.matrix().max_abs_diff(&nl)));
            }
        }
    }
    ensure(
        flagged == 0 && worst <= 1e-10 && rows.len() == 909,
        format!("{} grid points, {flagged} disagreement rows, max deviation {worst:.1e}", rows.len()),
    )
}

fn criterion_4() -> Outcome {
    let rows = sweep(&default_eta_grid(), &default_alpha_grid());
    let entangled = rows
        .iter()
        .filter(|r| r.nonlocal_verdict == Some(Verdict::Entangled))
        .count();
    let violations = rows
        .iter()
        .filter(|r| r.nonlocal_verdict == Some(Verdict::Entangled) && r.local_verdict != Some(Verdict::Separable))
        .count();
    ensure(
        violations == 0 && entangled > 0,
        format!("{entangled} entangled nonlocal points, {violations} with an entangled local pair"),
    )
}

fn criterion_5() -> Outcome {
    let built = tri!(build_gisin_massar_3());
    let mut worst: f64 = 0.0;
    let mut entangled = 0;
    for a2 in default_alpha_grid() {
        let r = tri!(run_broadcast(&tri!(EntangledInput::new(a2)), &built.isometry));
        let expected = oracle_nonlocal_3(a2);
        for p in &r.nonlocal_pairs {
            worst = worst.max(tri!(p.state.matrix().max_abs_diff(&expected)));
            if tri!(ppt_verdict(&p.state, DEFAULT_PPT_TOL)).verdict == Verdict::Entangled {
                entangled += 1;
            }
        }
    }
    let half = tri!(run_broadcast(&tri!(EntangledInput::new(0.5)), &built.isometry));
    let s = tri!(fit_scaled_form(half.nonlocal(), &phi_plus())).s;
    let eta = tri!(measured_reduction_factor(&built.isometry));
    ensure(
        worst <= 1e-10 && entangled == 0 && (s - 25.0 / 81.0).abs() <= 1e-10 && (eta - 5.0 / 9.0).abs() <= 1e-10,
        format!("max deviation {worst:.1e}, {entangled} entangled pairs, s {s:.12}, measured eta {eta:.12}"),
    )
}

fn criterion_6() -> Outcome {
    let mut exact = true;
    for m in 1..=10u32 {
        let s = tri!(nonlocal_scaling(m)).s_nl;
        exact &= s == (4.0 + m as f64) / (5.0 * m as f64);
    }
    let seven = tri!(nonlocal_scaling(7));
    let best = max_entangled_copies();
    let range = nonlocal_cloning_range();
    let r = 2f64.sqrt() / 3.0;
    let range_err = match range.bounds {
        Some((lo, hi)) => (lo - (0.5 - r)).abs().max((hi - (0.5 + r)).abs()),
        None => f64::INFINITY,
    };
    ensure(
        exact && seven.verdict == ScalingVerdict::Separable && best == 6 && range_err <= 1e-12,
        format!(
            "s_nl exact for M=1..10: {exact}, M=7 {:?}, max copies {best}, range error {range_err:.1e}",
            seven.verdict
        ),
    )
}

fn random_qubits(n: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let theta = (1.0 - 2.0 * rng.gen::<f64>()).acos();
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            StateVector::qubit(theta, phi)
        })
        .collect()
}

fn cloner_properties(built: &BuiltCloner, eta: f64) -> Result<(f64, f64, f64, f64, f64), Error> {
    let iso = built.isometry.isometry_residual();
    let Ancillas::Simple(anc) = &built.ancillas else {
        unreachable!("simple cloner");
    };
    let constraints = check_simple_constraints(&built.spec, anc)?.max_residual;
    let (mut isotropy, mut symmetry, mut fidelity): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for psi in random_qubits(20, 0xacce) {
        let s = BlochVector::of_pure(&psi)?;
        let clones = built.isometry.clone_states(&psi)?;
        for rho in &clones {
            isotropy = isotropy.max(bloch_vector(rho)?.distance(&s.scaled(eta)));
            fidelity = fidelity.max((fidelity_pure(&psi, rho)? - (1.0 + eta) / 2.0).abs());
            symmetry = symmetry.max(rho.max_abs_diff(&clones[0])?);
        }
    }
    Ok((iso, constraints, isotropy, symmetry, fidelity))
}

fn criterion_7() -> Outcome {
    // 0.6667 lies above the optimal bound 2/3 and is read as 2/3.
    let mut lines = Vec::new();
    let mut ok = true;
    for eta in [0.58, 0.60, 0.62, 2.0 / 3.0] {
        let built = tri!(build_simple_cloner(eta));
        let (iso, cons, isotropy, symmetry, fidelity) = tri!(cloner_properties(&built, eta));
        ok &= iso <= 1e-10 && cons <= 1e-10 && isotropy <= 1e-9 && symmetry <= 1e-10 && fidelity <= 1e-9;
        lines.push(format!(
            "eta {eta:.4}: iso {iso:.0e} cons {cons:.0e} isotropy {isotropy:.0e} sym {symmetry:.0e} F {fidelity:.0e}"
        ));
    }
    ensure(ok, lines.join("; "))
}

fn criterion_8() -> Outcome {
    let (a2, c2): (f64, f64) = (0.6, 0.05);
    let built = match build_general_cloner(a2.sqrt(), c2.sqrt(), &SearchConfig::default()) {
        Ok(b) => b,
        Err(Error::Infeasible { restarts, best_residual }) => {
            return Outcome::Inconclusive(format!(
                "no c > 0 realization in {restarts} restarts (best {best_residual:.1e})"
            ))
        }
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let eta = a2 - c2;
    let mut worst: f64 = 0.0;
    for a in default_alpha_grid().into_iter().step_by(10) {
        let r = tri!(run_broadcast(&tri!(EntangledInput::new(a)), &built.isometry));
        for p in &r.nonlocal_pairs {
            worst = worst.max(tri!(p.state.matrix().max_abs_diff(&oracle_nonlocal(a, eta))));
        }
    }
    ensure(
        worst <= 1e-9,
        format!("a² = {a2}, c² = {c2}: nonlocal pair matches eta = {eta} form within {worst:.1e}"),
    )
}

/// Characteristic polynomial coefficients `[1, c1, .., cn]` of `h`.
fn faddeev_leverrier(h: &ComplexMatrix) -> Vec<Complex64> {
    let n = h.rows();
    let id = ComplexMatrix::identity(n);
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    let mut m = ComplexMatrix::zeros(n, n);
    for k in 1..=n {
        let prev = *coeffs.last().unwrap();
        m = h.matmul(&m).unwrap().add(&id.scale(prev)).unwrap();
        let ck = -h.matmul(&m).unwrap().trace().unwrap() / k as f64;
        coeffs.push(ck);
    }
    coeffs
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Roots of a monic polynomial by simultaneous Weierstrass iteration.
fn durand_kerner(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let bound = 1.0 + coeffs[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * bound).collect();
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let denom = (0..n)
                .filter(|&j| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            let step = horner(coeffs, z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * bound {
            break;
        }
    }
    z
}

fn random_hermitian(rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        h[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..4 {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let h = random_hermitian(&mut rng);
        let jacobi = tri!(hermitian_eigenvalues(&h));
        let mut roots: Vec<f64> = durand_kerner(&faddeev_leverrier(&h)).iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        for (a, b) in jacobi.iter().zip(&roots) {
            worst = worst.max((a - b).abs());
        }
    }
    let bell = tri!(DensityOperator::from_pure(&phi_plus(), FactorShape::qubits(2)));
    let spectrum = tri!(hermitian_eigenvalues(&tri!(bell.partial_transpose(1))));
    let bell_err = spectrum
        .iter()
        .zip([-0.5, 0.5, 0.5, 0.5])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(
        worst <= 1e-8 && bell_err <= 1e-10,
        format!("1000 random 4x4: max gap to polynomial roots {worst:.1e}; Bell PT spectrum error {bell_err:.1e}"),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("1 optimal-cloner alpha² interval", criterion_1),
        ("2 broadcasting threshold", criterion_2),
        ("3 closed-form equivalence", criterion_3),
        ("4 local/nonlocal complementarity", criterion_4),
        ("5 1→3 broadcasting", criterion_5),
        ("6 nonlocal scaling", criterion_6),
        ("7 cloner properties", criterion_7),
        ("8 general-cloner form invariance", criterion_8),
        ("9 eigen-solver oracle", criterion_9),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("PASS criterion {name} ({secs:.2} s): {d}"),
            Outcome::Inconclusive(d) => println!("INCONCLUSIVE criterion {name} ({secs:.2} s): {d}"),
            Outcome::Fail(d) => {
                failures += 1;
                println!("FAIL criterion {name} ({secs:.2} s): {d}");
            }
        }
    }
    println!("acceptance: {} of 9 criteria failed", failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
