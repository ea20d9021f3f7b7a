//! Partial-transpose separability verdicts and the analytic alpha² ranges.
//!
//! For two qubits a positive partial transpose is necessary and sufficient
//! for separability. States whose smallest partial-transpose eigenvalue lies
//! within the tolerance of zero are reported as separable, with the raw
//! eigenvalue kept in the report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::states::DensityOperator;

pub const DEFAULT_PPT_TOL: f64 = 1e-9;
/// Radicands within this distance of zero give a single-point range.
pub const RADICAND_TOL: f64 = 1e-14;
/// Scaled-form separability threshold for two qubits.
pub const WERNER_THRESHOLD: f64 = 1.0 / 3.0;
pub const SCALING_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Separable,
    Entangled,
}

impl Verdict {
    pub fn is_entangled(self) -> bool {
        self == Verdict::Entangled
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PptReport {
    pub min_eigenvalue: f64,
    pub spectrum: [f64; 4],
    pub verdict: Verdict,
    pub tolerance: f64,
}

/// Peres–Horodecki test on the second qubit of a two-qubit state.
pub fn ppt_verdict(rho: &DensityOperator, tolerance: f64) -> Result<PptReport> {
    if rho.shape().dims() != [2, 2] {
        return Err(Error::WrongKind {
            expected: "two-qubit density operator".into(),
            found: format!("factor shape {:?}", rho.shape().dims()),
        });
    }
    let pt = rho.partial_transpose(1)?;
    let eig = hermitian_eigenvalues(&pt)?;
    let spectrum = [eig[0], eig[1], eig[2], eig[3]];
    let min_eigenvalue = spectrum[0];
    let verdict = if min_eigenvalue < -tolerance {
        Verdict::Entangled
    } else {
        Verdict::Separable
    };
    Ok(PptReport {
        min_eigenvalue,
        spectrum,
        verdict,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeKind {
    /// alpha² for which the cross-site output pair is entangled.
    InseparableNonlocal,
    /// alpha² for which the same-site output pair is separable.
    SeparableLocal,
    /// alpha² reachable by a single nonlocal cloner acting on the pair.
    NonlocalCloning,
    /// Found by bisection on the partial-transpose verdict.
    Numeric,
}

/// Closed interval of alpha², possibly empty or a single point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRange {
    pub bounds: Option<(f64, f64)>,
    pub kind: RangeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AlphaRange {
    pub fn empty(kind: RangeKind) -> Self {
        Self {
            bounds: None,
            kind,
            note: None,
        }
    }

    pub fn interval(lo: f64, hi: f64, kind: RangeKind) -> Self {
        debug_assert!(lo <= hi);
        Self {
            bounds: Some((lo, hi)),
            kind,
            note: None,
        }
    }

    /// `1/2 ± sqrt(radicand)`, classified by the sign of the radicand.
    fn centered(radicand: f64, kind: RangeKind) -> Self {
        if radicand < -RADICAND_TOL {
            Self::empty(kind)
        } else if radicand <= RADICAND_TOL {
            Self::interval(0.5, 0.5, kind)
        } else {
            let r = radicand.sqrt();
            Self::interval(0.5 - r, 0.5 + r, kind)
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_none()
    }

    pub fn is_point(&self) -> bool {
        matches!(self.bounds, Some((lo, hi)) if lo == hi)
    }

    pub fn lo(&self) -> Option<f64> {
        self.bounds.map(|b| b.0)
    }

    pub fn hi(&self) -> Option<f64> {
        self.bounds.map(|b| b.1)
    }

    pub fn width(&self) -> f64 {
        self.bounds.map_or(0.0, |(lo, hi)| hi - lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        matches!(self.bounds, Some((lo, hi)) if lo <= x && x <= hi)
    }

    pub fn contains_strictly(&self, x: f64) -> bool {
        matches!(self.bounds, Some((lo, hi)) if lo < x && x < hi)
    }
}

fn check_eta(eta: f64, upper: f64, domain: &'static str) -> Result<()> {
    if !(eta > 0.0 && eta <= upper) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            domain,
        });
    }
    Ok(())
}

/// alpha² for which the cross-site pair produced by cloners with reduction
/// factor `eta` is entangled: `1/2 ± sqrt(1/4 - (1-η²)²/(16η⁴))`.
///
/// The radicand is evaluated as `(3η²-1)(η²+1)/(16η⁴)`, which avoids the
/// cancellation between `1/4` and the second term near `η = 1/sqrt(3)`.
/// Empty for `η < 1/sqrt(3)`, the single point `{1/2}` at equality.
pub fn inseparable_alpha_range(eta: f64) -> Result<AlphaRange> {
    check_eta(eta, 2.0 / 3.0, "(0, 2/3]")?;
    let e2 = eta * eta;
    let radicand = (3.0 * e2 - 1.0) * (e2 + 1.0) / (16.0 * e2 * e2);
    Ok(AlphaRange::centered(radicand, RangeKind::InseparableNonlocal))
}

/// alpha² for which the same-site pair is separable:
/// `1/2 ± sqrt(1/4 - (1-η)²/(4η²))`, radicand evaluated as `(2η-1)/(4η²)`.
pub fn local_separable_alpha_range(eta: f64) -> Result<AlphaRange> {
    check_eta(eta, 1.0, "(0, 1]")?;
    let radicand = (2.0 * eta - 1.0) / (4.0 * eta * eta);
    Ok(AlphaRange::centered(radicand, RangeKind::SeparableLocal))
}

/// `1/2 ± sqrt(2)/3`.
pub fn nonlocal_cloning_range() -> AlphaRange {
    let r = std::f64::consts::SQRT_2 / 3.0;
    AlphaRange::interval(0.5 - r, 0.5 + r, RangeKind::NonlocalCloning)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingVerdict {
    Separable,
    Entangled,
    Boundary,
}

/// Scaling parameter of the `m`-copy nonlocal cloner output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlocalScaling {
    pub m: u32,
    pub s_nl: f64,
    pub verdict: ScalingVerdict,
}

/// `s_nl = (4 + m) / (5m)` compared against the 1/3 threshold.
pub fn nonlocal_scaling(m: u32) -> Result<NonlocalScaling> {
    if m == 0 {
        return Err(Error::Domain {
            name: "m",
            value: 0.0,
            domain: "m >= 1",
        });
    }
    let s_nl = (4.0 + m as f64) / (5.0 * m as f64);
    let verdict = if (s_nl - WERNER_THRESHOLD).abs() <= SCALING_BOUNDARY_TOL {
        ScalingVerdict::Boundary
    } else if s_nl > WERNER_THRESHOLD {
        ScalingVerdict::Entangled
    } else {
        ScalingVerdict::Separable
    };
    Ok(NonlocalScaling { m, s_nl, verdict })
}

/// Largest copy count whose scaled output is not strictly below the
/// separability threshold. `s_nl` decreases in `m`, so this is the last
/// count before the first separable one; the boundary count `m = 6` is
/// included.
pub fn max_entangled_copies() -> u32 {
    let mut m = 1;
    while nonlocal_scaling(m + 1).expect("m >= 1").verdict != ScalingVerdict::Separable {
        m += 1;
    }
    m
}
