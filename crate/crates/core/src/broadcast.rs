//! Local cloning of both halves of `alpha|00> + beta|11>` and extraction of
//! every output pair.
//!
//! The global post-cloning pure state is built first (dimension 256 for
//! 1→2 cloners, 576 for the 1→3 cloner), then its density operator, then
//! the pair states by partial trace. Factor layout is
//! `[site-1 clones.., site-1 ancilla, site-2 clones.., site-2 ancilla]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloners::{build_gisin_massar_3, build_simple_cloner, CloneIsometry, OPTIMAL_ETA_12};
use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, FactorShape, ALGEBRAIC_TOL};
use crate::separability::{
    inseparable_alpha_range, local_separable_alpha_range, ppt_verdict, AlphaRange, PptReport, RangeKind, Verdict,
    DEFAULT_PPT_TOL,
};
use crate::states::{DensityOperator, EntangledInput};

/// A two-qubit output state and the global factors it was traced down to.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub factors: (usize, usize),
    pub state: DensityOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastResult {
    pub input: EntangledInput,
    pub num_copies: usize,
    pub ancilla_dim: usize,
    /// Two clones at the same site.
    pub local_pairs: Vec<PairState>,
    /// One clone from each site, site-1 qubit first.
    pub nonlocal_pairs: Vec<PairState>,
}

impl BroadcastResult {
    pub fn local(&self) -> &DensityOperator {
        &self.local_pairs[0].state
    }

    pub fn nonlocal(&self) -> &DensityOperator {
        &self.nonlocal_pairs[0].state
    }

    /// Largest elementwise distance of any pair from the first pair of its group.
    pub fn pair_spread(&self) -> f64 {
        let spread = |pairs: &[PairState]| {
            pairs
                .iter()
                .map(|p| p.state.max_abs_diff(&pairs[0].state).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max)
        };
        spread(&self.local_pairs).max(spread(&self.nonlocal_pairs))
    }
}

/// Factor shape of the global state for cloners with `copies` outputs.
pub fn global_shape(copies: usize, ancilla_dim: usize) -> FactorShape {
    let mut dims = vec![2; copies];
    dims.push(ancilla_dim);
    dims.extend(std::iter::repeat_n(2, copies));
    dims.push(ancilla_dim);
    FactorShape::new(dims).expect("positive dims")
}

fn global_state(input: &EntangledInput, cloner: &CloneIsometry) -> Vec<C64> {
    let m = cloner.matrix();
    let u0 = m.col(0);
    let u1 = m.col(1);
    let n = u0.len();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(u0[i] * u0[j] * input.alpha + u1[i] * u1[j] * input.beta);
        }
    }
    out
}

fn pair(global: &DensityOperator, i: usize, j: usize) -> Result<PairState> {
    let reduced = global.partial_trace(&[i, j])?;
    let state = DensityOperator::new(reduced.into_matrix(), FactorShape::qubits(2))?;
    Ok(PairState { factors: (i, j), state })
}

/// Applies `cloner` to both qubits and extracts all local and nonlocal pairs.
pub fn run_broadcast(input: &EntangledInput, cloner: &CloneIsometry) -> Result<BroadcastResult> {
    let copies = cloner.num_copies();
    if !(2..=3).contains(&copies) {
        return Err(Error::WrongKind {
            expected: "1→2 or 1→3 cloner".into(),
            found: format!("1→{copies} cloner"),
        });
    }
    let residual = cloner.isometry_residual();
    if residual > ALGEBRAIC_TOL {
        return Err(Error::NotIsometric(residual));
    }
    let shape = global_shape(copies, cloner.ancilla_dim());
    let psi = crate::states::StateVector::new(global_state(input, cloner));
    let global = DensityOperator::from_pure(&psi, shape)?;

    let site2 = copies + 1;
    let mut local_pairs = Vec::new();
    for base in [0, site2] {
        for i in 0..copies {
            for j in i + 1..copies {
                local_pairs.push(pair(&global, base + i, base + j)?);
            }
        }
    }
    let mut nonlocal_pairs = Vec::new();
    for i in 0..copies {
        for j in 0..copies {
            nonlocal_pairs.push(pair(&global, i, site2 + j)?);
        }
    }
    Ok(BroadcastResult {
        input: *input,
        num_copies: copies,
        ancilla_dim: cloner.ancilla_dim(),
        local_pairs,
        nonlocal_pairs,
    })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= OPTIMAL_ETA_12) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            domain: "(0, 2/3]",
        });
    }
    Ok(())
}

fn two_qubit(m: ComplexMatrix) -> Result<DensityOperator> {
    DensityOperator::new(m, FactorShape::qubits(2))
}

/// Same-site pair: `α²η|00><00| + β²η|11><11| + (1-η)|+><+|` with the
/// normalized `|+> = (|01> + |10>)/sqrt(2)`.
pub fn closed_form_local(input: &EntangledInput, eta: f64) -> Result<DensityOperator> {
    check_eta(eta)?;
    let mut m = ComplexMatrix::zeros(4, 4);
    let half = (1.0 - eta) / 2.0;
    m[(0, 0)] = C64::new(input.alpha_sq * eta, 0.0);
    m[(3, 3)] = C64::new(input.beta_sq() * eta, 0.0);
    for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        m[(i, j)] = C64::new(half, 0.0);
    }
    two_qubit(m)
}

/// Cross-site pair for 1→2 cloners with reduction factor `eta`.
pub fn closed_form_nonlocal(input: &EntangledInput, eta: f64) -> Result<DensityOperator> {
    check_eta(eta)?;
    let noise = ((1.0 - eta) / 2.0).powi(2);
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new(input.alpha_sq * eta + noise, 0.0);
    m[(3, 3)] = C64::new(input.beta_sq() * eta + noise, 0.0);
    m[(1, 1)] = C64::new((1.0 - eta * eta) / 4.0, 0.0);
    m[(2, 2)] = m[(1, 1)];
    let coherence = C64::new(input.alpha * input.beta * eta * eta, 0.0);
    m[(0, 3)] = coherence;
    m[(3, 0)] = coherence;
    two_qubit(m)
}

/// Cross-site pair for the 1→3 cloner.
pub fn closed_form_nonlocal_3(input: &EntangledInput) -> Result<DensityOperator> {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new((45.0 * input.alpha_sq + 4.0) / 81.0, 0.0);
    m[(3, 3)] = C64::new((45.0 * input.beta_sq() + 4.0) / 81.0, 0.0);
    m[(1, 1)] = C64::new(14.0 / 81.0, 0.0);
    m[(2, 2)] = C64::new(14.0 / 81.0, 0.0);
    let coherence = C64::new(25.0 * input.alpha * input.beta / 81.0, 0.0);
    m[(0, 3)] = coherence;
    m[(3, 0)] = coherence;
    two_qubit(m)
}

fn nonlocal_report(cloner: &CloneIsometry, alpha_sq: f64) -> Result<PptReport> {
    let input = EntangledInput::new(alpha_sq)?;
    let result = run_broadcast(&input, cloner)?;
    ppt_verdict(result.nonlocal(), DEFAULT_PPT_TOL)
}

/// Shrinks `[sep, ent]` (either order) around the verdict flip.
fn bisect(cloner: &CloneIsometry, mut sep: f64, mut ent: f64, tolerance: f64) -> Result<f64> {
    while (ent - sep).abs() > tolerance {
        let mid = 0.5 * (sep + ent);
        if nonlocal_report(cloner, mid)?.verdict.is_entangled() {
            ent = mid;
        } else {
            sep = mid;
        }
    }
    Ok(0.5 * (sep + ent))
}

/// alpha² interval on which the pipeline's cross-site pair is entangled.
///
/// Bisects `[0, 1/2]` and `[1/2, 1]` for the verdict flip to width
/// `tolerance`. A separable midpoint gives an empty range; a midpoint whose
/// smallest partial-transpose eigenvalue is within the verdict tolerance of
/// zero gives the point `{1/2}`. Failure to bracket yields an empty range
/// with a note, and so does a failed interior re-check.
pub fn numeric_alpha_range(cloner: &CloneIsometry, tolerance: f64) -> Result<AlphaRange> {
    if cloner.num_copies() != 2 {
        return Err(Error::WrongKind {
            expected: "1→2 cloner".into(),
            found: format!("1→{} cloner", cloner.num_copies()),
        });
    }
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::Domain {
            name: "tolerance",
            value: tolerance,
            domain: "> 0",
        });
    }
    let mid = nonlocal_report(cloner, 0.5)?;
    if mid.min_eigenvalue.abs() <= mid.tolerance {
        return Ok(AlphaRange::interval(0.5, 0.5, RangeKind::Numeric));
    }
    if !mid.verdict.is_entangled() {
        return Ok(AlphaRange::empty(RangeKind::Numeric));
    }
    for end in [0.0, 1.0] {
        let r = nonlocal_report(cloner, end)?;
        if r.verdict.is_entangled() {
            return Ok(AlphaRange::empty(RangeKind::Numeric).with_note(format!(
                "cannot bracket: alpha_sq = {end} is entangled (min eigenvalue {:e})",
                r.min_eigenvalue
            )));
        }
    }
    let lo = bisect(cloner, 0.0, 0.5, tolerance)?;
    let hi = bisect(cloner, 1.0, 0.5, tolerance)?;
    let range = AlphaRange::interval(lo, hi, RangeKind::Numeric);

    let w = hi - lo;
    for x in [lo + w / 4.0, 0.5, hi - w / 4.0] {
        if !nonlocal_report(cloner, x)?.verdict.is_entangled() {
            return Ok(range.with_note(format!("interior re-check failed at alpha_sq = {x}")));
        }
    }
    Ok(range)
}

pub type ClosedForm = fn(&EntangledInput, f64) -> Result<DensityOperator>;

/// Closed forms the sweep compares the pipeline against.
#[derive(Clone, Copy)]
pub struct ClosedForms {
    pub local: ClosedForm,
    pub nonlocal: ClosedForm,
}

impl Default for ClosedForms {
    fn default() -> Self {
        Self {
            local: closed_form_local,
            nonlocal: closed_form_nonlocal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub alpha_sq: f64,
    pub nonlocal_verdict: Option<Verdict>,
    pub local_verdict: Option<Verdict>,
    pub min_pt_eigenvalue: Option<f64>,
    pub analytic_nonlocal_inseparable: Option<bool>,
    pub analytic_local_separable: Option<bool>,
    /// Max elementwise distance of any extracted pair from its closed form.
    pub closed_form_deviation: Option<f64>,
    pub disagreement: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(eta: f64, alpha_sq: f64, err: &Error) -> Self {
        Self {
            eta,
            alpha_sq,
            nonlocal_verdict: None,
            local_verdict: None,
            min_pt_eigenvalue: None,
            analytic_nonlocal_inseparable: None,
            analytic_local_separable: None,
            closed_form_deviation: None,
            disagreement: true,
            error: Some(err.to_string()),
        }
    }
}

fn sweep_point(eta: f64, alpha_sq: f64, cloner: &CloneIsometry, forms: &ClosedForms) -> Result<SweepRow> {
    let input = EntangledInput::new(alpha_sq)?;
    let result = run_broadcast(&input, cloner)?;
    let nonlocal = ppt_verdict(result.nonlocal(), DEFAULT_PPT_TOL)?;
    let local = ppt_verdict(result.local(), DEFAULT_PPT_TOL)?;

    let expected_local = (forms.local)(&input, eta)?;
    let expected_nonlocal = (forms.nonlocal)(&input, eta)?;
    let mut deviation: f64 = 0.0;
    for p in &result.local_pairs {
        deviation = deviation.max(p.state.max_abs_diff(&expected_local)?);
    }
    for p in &result.nonlocal_pairs {
        deviation = deviation.max(p.state.max_abs_diff(&expected_nonlocal)?);
    }

    let analytic_nonlocal = inseparable_alpha_range(eta)?.contains_strictly(alpha_sq);
    let analytic_local = local_separable_alpha_range(eta)?.contains(alpha_sq);
    let disagreement = nonlocal.verdict.is_entangled() != analytic_nonlocal
        || local.verdict.is_entangled() == analytic_local
        || deviation > ALGEBRAIC_TOL;
    Ok(SweepRow {
        eta,
        alpha_sq,
        nonlocal_verdict: Some(nonlocal.verdict),
        local_verdict: Some(local.verdict),
        min_pt_eigenvalue: Some(nonlocal.min_eigenvalue),
        analytic_nonlocal_inseparable: Some(analytic_nonlocal),
        analytic_local_separable: Some(analytic_local),
        closed_form_deviation: Some(deviation),
        disagreement,
        error: None,
    })
}

/// One row per `(eta, alpha_sq)`, ordered by eta index then alpha index.
pub fn sweep(eta_grid: &[f64], alpha_grid: &[f64]) -> Vec<SweepRow> {
    sweep_with(eta_grid, alpha_grid, &ClosedForms::default())
}

pub fn sweep_with(eta_grid: &[f64], alpha_grid: &[f64], forms: &ClosedForms) -> Vec<SweepRow> {
    let cloners: Vec<Result<CloneIsometry>> = eta_grid
        .iter()
        .map(|&eta| build_simple_cloner(eta).map(|b| b.isometry))
        .collect();
    let n_alpha = alpha_grid.len();
    (0..eta_grid.len() * n_alpha)
        .into_par_iter()
        .map(|k| {
            let eta = eta_grid[k / n_alpha];
            let alpha_sq = alpha_grid[k % n_alpha];
            let row = match &cloners[k / n_alpha] {
                Ok(cloner) => sweep_point(eta, alpha_sq, cloner, forms),
                Err(e) => Err(e.clone()),
            };
            row.unwrap_or_else(|e| SweepRow::failed(eta, alpha_sq, &e))
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

pub fn default_eta_grid() -> Vec<f64> {
    linspace(0.58, OPTIMAL_ETA_12, 9)
}

pub fn default_alpha_grid() -> Vec<f64> {
    linspace(0.0, 1.0, 101)
}

/// Largest number of local copies whose maximally entangled broadcast stays
/// entangled, over the constructed optimal 1→2 and 1→3 cloners.
pub fn max_local_broadcast_copies() -> Result<usize> {
    let input = EntangledInput::new(0.5)?;
    let cloners = [
        build_simple_cloner(OPTIMAL_ETA_12)?.isometry,
        build_gisin_massar_3()?.isometry,
    ];
    let mut best = 1;
    for cloner in &cloners {
        let result = run_broadcast(&input, cloner)?;
        if !ppt_verdict(result.nonlocal(), DEFAULT_PPT_TOL)?.verdict.is_entangled() {
            break;
        }
        best = cloner.num_copies();
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloners::build_gisin_massar_3;
    use crate::states::{entangled_input_state, fit_scaled_form, phi_plus};
    use approx::assert_abs_diff_eq;

    fn input(a2: f64) -> EntangledInput {
        EntangledInput::new(a2).unwrap()
    }

    #[test]
    fn optimal_broadcast_at_half_matches_scaled_form() {
        let cloner = build_simple_cloner(2.0 / 3.0).unwrap().isometry;
        let r = run_broadcast(&input(0.5), &cloner).unwrap();
        assert_eq!(r.local_pairs.len(), 2);
        assert_eq!(r.nonlocal_pairs.len(), 4);
        let expected = closed_form_nonlocal(&input(0.5), 2.0 / 3.0).unwrap();
        assert!(r.nonlocal().max_abs_diff(&expected).unwrap() <= 1e-10);
        let fit = fit_scaled_form(r.nonlocal(), &phi_plus()).unwrap();
        assert_abs_diff_eq!(fit.s, 4.0 / 9.0, epsilon = 1e-10);
        assert!(fit.residual <= 1e-10);
    }

    #[test]
    fn product_input_never_entangles() {
        for eta in [0.4, 0.6, 2.0 / 3.0] {
            let cloner = build_simple_cloner(eta).unwrap().isometry;
            let r = run_broadcast(&input(1.0), &cloner).unwrap();
            for p in &r.nonlocal_pairs {
                assert_eq!(ppt_verdict(&p.state, DEFAULT_PPT_TOL).unwrap().verdict, Verdict::Separable);
            }
        }
    }

    #[test]
    fn pipeline_matches_closed_forms_at_point_three() {
        let cloner = build_simple_cloner(0.6).unwrap().isometry;
        let r = run_broadcast(&input(0.3), &cloner).unwrap();
        let nl = closed_form_nonlocal(&input(0.3), 0.6).unwrap();
        let lo = closed_form_local(&input(0.3), 0.6).unwrap();
        for p in &r.nonlocal_pairs {
            assert!(p.state.max_abs_diff(&nl).unwrap() <= 1e-10);
        }
        for p in &r.local_pairs {
            assert!(p.state.max_abs_diff(&lo).unwrap() <= 1e-10);
        }
        assert!(r.pair_spread() <= 1e-10);
    }

    #[test]
    fn closed_form_local_examples() {
        for (a2, eta) in [(0.0, 0.4), (0.37, 0.6), (1.0, 2.0 / 3.0)] {
            let rho = closed_form_local(&input(a2), eta).unwrap();
            assert_abs_diff_eq!(rho.matrix().trace().unwrap().re, 1.0, epsilon = 1e-15);
        }
        let rho = closed_form_local(&input(0.5), 2.0 / 3.0).unwrap();
        let m = rho.matrix();
        assert_abs_diff_eq!(m[(0, 0)].re, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(3, 3)].re, 1.0 / 3.0, epsilon = 1e-15);
        // 1/3 on |+><+| spreads 1/6 over the |01>,|10> block
        for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            assert_abs_diff_eq!(m[(i, j)].re, 1.0 / 6.0, epsilon = 1e-15);
        }
        assert!(closed_form_local(&input(0.5), 0.7).is_err());
    }

    #[test]
    fn closed_form_nonlocal_examples() {
        for (a2, eta) in [(0.0, 0.4), (0.37, 0.6), (1.0, 2.0 / 3.0)] {
            let rho = closed_form_nonlocal(&input(a2), eta).unwrap();
            assert_abs_diff_eq!(rho.matrix().trace().unwrap().re, 1.0, epsilon = 1e-15);
        }
        let ent = closed_form_nonlocal(&input(0.5), 2.0 / 3.0).unwrap();
        assert_eq!(ppt_verdict(&ent, DEFAULT_PPT_TOL).unwrap().verdict, Verdict::Entangled);
        let sep = closed_form_nonlocal(&input(0.05), 2.0 / 3.0).unwrap();
        assert_eq!(ppt_verdict(&sep, DEFAULT_PPT_TOL).unwrap().verdict, Verdict::Separable);
    }

    #[test]
    fn closed_form_three_copy_examples() {
        for a2 in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let i = input(a2);
            // (45α² + 4 + 45β² + 4 + 28) / 81 = 1
            let sum = (45.0 * i.alpha_sq + 4.0 + 45.0 * i.beta_sq() + 4.0 + 28.0) / 81.0;
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
            let rho = closed_form_nonlocal_3(&i).unwrap();
            assert_abs_diff_eq!(rho.matrix().trace().unwrap().re, 1.0, epsilon = 1e-15);
        }
        let half = closed_form_nonlocal_3(&input(0.5)).unwrap();
        let fit = fit_scaled_form(&half, &phi_plus()).unwrap();
        assert_abs_diff_eq!(fit.s, 25.0 / 81.0, epsilon = 1e-12);
        assert!(fit.residual <= 1e-10);

        let one = closed_form_nonlocal_3(&input(1.0)).unwrap();
        let m = one.matrix();
        for (k, d) in [49.0, 14.0, 14.0, 4.0].iter().enumerate() {
            assert_abs_diff_eq!(m[(k, k)].re, d / 81.0, epsilon = 1e-15);
        }
        assert_eq!(m[(0, 3)].norm(), 0.0);
    }

    #[test]
    fn three_copy_pipeline() {
        let cloner = build_gisin_massar_3().unwrap().isometry;
        for a2 in [0.0, 0.3, 0.5, 1.0] {
            let r = run_broadcast(&input(a2), &cloner).unwrap();
            assert_eq!(r.nonlocal_pairs.len(), 9);
            assert_eq!(r.local_pairs.len(), 6);
            let expected = closed_form_nonlocal_3(&input(a2)).unwrap();
            for p in &r.nonlocal_pairs {
                assert!(p.state.max_abs_diff(&expected).unwrap() <= 1e-10);
                assert_eq!(ppt_verdict(&p.state, DEFAULT_PPT_TOL).unwrap().verdict, Verdict::Separable);
            }
        }
    }

    #[test]
    fn numeric_range_reproduces_optimal_interval() {
        let cloner = build_simple_cloner(2.0 / 3.0).unwrap().isometry;
        let r = numeric_alpha_range(&cloner, 1e-6).unwrap();
        assert!(r.note.is_none(), "{r:?}");
        let half = 39f64.sqrt() / 16.0;
        assert_abs_diff_eq!(r.lo().unwrap(), 0.5 - half, epsilon = 1e-6);
        assert_abs_diff_eq!(r.hi().unwrap(), 0.5 + half, epsilon = 1e-6);
    }

    #[test]
    fn numeric_range_threshold_and_below() {
        let at = build_simple_cloner(1.0 / 3f64.sqrt()).unwrap().isometry;
        let r = numeric_alpha_range(&at, 1e-6).unwrap();
        assert!(r.width() <= 1e-4);
        assert!(r.contains(0.5));

        let below = build_simple_cloner(0.5).unwrap().isometry;
        assert!(numeric_alpha_range(&below, 1e-6).unwrap().is_empty());

        let gm = build_gisin_massar_3().unwrap().isometry;
        assert!(matches!(numeric_alpha_range(&gm, 1e-6), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn sweep_small_grid_has_no_disagreements() {
        let rows = sweep(&[0.5, 0.6, 2.0 / 3.0], &linspace(0.0, 1.0, 21));
        assert_eq!(rows.len(), 63);
        assert!(rows.iter().all(|r| !r.disagreement), "{:?}", rows.iter().find(|r| r.disagreement));
        for r in rows.iter().filter(|r| r.eta == 0.5) {
            assert_eq!(r.nonlocal_verdict, Some(Verdict::Separable));
        }
        for r in &rows {
            if r.nonlocal_verdict == Some(Verdict::Entangled) {
                assert_eq!(r.local_verdict, Some(Verdict::Separable));
            }
        }
        // ordering: eta-major
        assert_eq!(rows[21].eta, 0.6);
        assert_eq!(rows[21].alpha_sq, 0.0);
    }

    #[test]
    fn sweep_records_bad_points() {
        let rows = sweep(&[0.9], &[0.5]);
        assert!(rows[0].disagreement);
        assert!(rows[0].error.as_deref().unwrap().contains("eta"));
    }

    #[test]
    fn sweep_flags_faulty_closed_form() {
        fn flipped(input: &EntangledInput, eta: f64) -> Result<DensityOperator> {
            let mut m = closed_form_nonlocal(input, eta)?.into_matrix();
            m[(0, 3)] = -m[(0, 3)];
            m[(3, 0)] = -m[(3, 0)];
            DensityOperator::new(m, FactorShape::qubits(2))
        }
        let forms = ClosedForms {
            nonlocal: flipped,
            ..ClosedForms::default()
        };
        let rows = sweep_with(&[0.6], &[0.5], &forms);
        assert!(rows[0].disagreement);
    }

    #[test]
    fn local_copies_limit() {
        assert_eq!(max_local_broadcast_copies().unwrap(), 2);
    }

    #[test]
    fn linspace_endpoints() {
        let g = default_eta_grid();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 0.58);
        assert_eq!(g[8], 2.0 / 3.0);
        assert_eq!(default_alpha_grid()[100], 1.0);
        assert_eq!(linspace(0.3, 0.9, 1), vec![0.3]);
        let _ = entangled_input_state(0.5).unwrap();
    }
}
