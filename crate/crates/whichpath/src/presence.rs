//! Presence signals: alpha extraction, oracle comparison, conditional and
//! two-probe analyses.
//!
//! The presence signal of a probe site is defined through the detected
//! pointer state. Writing `phi_out(eps)` for the unnormalized ancilla
//! vector reaching the detect port when the site's probe is switched on
//! with strength `eps`,
//!
//! ```text
//! alpha = <phi_perp | phi_out(eps)> / (eps * <phi | phi_out(eps)>)    (eps -> 0)
//! ```
//!
//! Three independent routes compute it:
//!
//! - [`alpha_analytic`] propagates the rotation generator once and reads
//!   off the exact linear response.
//! - [`alpha_finite_difference`] evaluates the ratio at `+eps` and `-eps`
//!   and averages, which cancels the leading error and converges at
//!   second order.
//! - [`weak_value_oracle`] never touches the pointer: it multiplies the
//!   undisturbed forward amplitude at the site by the transfer amplitude
//!   from the site to the detector, normalized by the detect amplitude.
//!   This equals the weak value of the projector onto the site's path.
//!
//! For circuits without a sign-flip device all three agree. With a device
//! in flight the detected signal can disagree with the oracle; such sites
//! are flagged as lying.
//!
//! When the reference amplitude `<phi | phi_out>` falls below
//! [`DIVERGENCE_TOL`] the signal has no finite limit and is reported as
//! [`Alpha::Divergent`]. The attached value is then the pointer signal
//! measured against the full state norm instead; at finite `eps` it grows
//! as `1/eps`, so `|value| * eps` stays bounded, which is the advertised
//! divergence scaling.

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::circuit::{Circuit, CircuitError, Cut};
use crate::qstate::{AncillaVector, TwoLevelOp, PHI, PHI_PERP};
use crate::{MarkerId, PathLabel, Scalar, SiteId};

/// Reference amplitudes below this are treated as vanishing.
pub const DIVERGENCE_TOL: f64 = 1e-10;
/// Observed-versus-oracle deviations above this flag a site as lying.
pub const LYING_TOL: f64 = 1e-9;
/// Default probe strength for finite-difference runs.
pub const DEFAULT_EPSILON: f64 = 1e-4;

fn divergence_tol<T: Scalar>() -> T {
    T::from_f64(DIVERGENCE_TOL).unwrap()
}

/// A presence signal: either a finite complex value or a divergence under
/// postselection.
///
/// For a divergent result `scaled` holds the pointer signal normalized by
/// the full state norm: the finite-difference routes store the raw ratio
/// at the requested `eps` (which scales as `1/eps`), the analytic route
/// stores the limit of `eps * alpha(eps)`. `None` means no signal reaches
/// the detector at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha<T: Scalar> {
    Finite(Complex<T>),
    Divergent { scaled: Option<Complex<T>> },
}

impl<T: Scalar> Alpha<T> {
    pub fn is_divergent(&self) -> bool {
        matches!(self, Alpha::Divergent { .. })
    }

    pub fn finite(&self) -> Option<Complex<T>> {
        match self {
            Alpha::Finite(v) => Some(*v),
            Alpha::Divergent { .. } => None,
        }
    }

    pub fn scaled(&self) -> Option<Complex<T>> {
        match self {
            Alpha::Finite(_) => None,
            Alpha::Divergent { scaled } => *scaled,
        }
    }

    /// The displayed value: the finite signal, or the attached divergent
    /// ratio when there is one.
    pub fn value(&self) -> Option<Complex<T>> {
        match self {
            Alpha::Finite(v) => Some(*v),
            Alpha::Divergent { scaled } => *scaled,
        }
    }

    pub fn magnitude(&self) -> Option<T> {
        self.value().map(|v| v.norm())
    }
}

/// How the observed signal is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMode {
    Analytic,
    FiniteDifference,
}

/// Exact linear response: alpha from a single propagation of the rotation
/// generator.
pub fn alpha_analytic<T: Scalar>(
    c: &Circuit<T>,
    site: &SiteId,
    condition: Option<&MarkerId>,
) -> Result<Alpha<T>, CircuitError> {
    let base = c.propagate_with(None, condition)?;
    let den = base
        .entry(c.detect())
        .map(|v| v.component(PHI))
        .unwrap_or_else(|| Complex::new(T::zero(), T::zero()));

    let deriv = c.propagate_with(Some((site, TwoLevelOp::probe_generator())), condition)?;
    let d = deriv
        .entry(c.detect())
        .cloned()
        .unwrap_or_else(|| AncillaVector::zero(c.ancilla_dim()));
    let num = d.component(PHI_PERP);

    let tol = divergence_tol::<T>();
    if den.norm() < tol {
        let d_norm = d.norm2().sqrt();
        let scaled = if d_norm >= tol {
            Some(num / Complex::new(d_norm, T::zero()))
        } else {
            None
        };
        return Ok(Alpha::Divergent { scaled });
    }
    Ok(Alpha::Finite(num / den))
}

struct FdSample<T: Scalar> {
    num: Complex<T>,
    den: Complex<T>,
    norm: T,
}

fn fd_sample<T: Scalar>(
    c: &Circuit<T>,
    site: &SiteId,
    eps: T,
    condition: Option<&MarkerId>,
) -> Result<FdSample<T>, CircuitError> {
    let out = c.propagate_with(Some((site, TwoLevelOp::probe_rotation(eps))), condition)?;
    let det = out
        .entry(c.detect())
        .cloned()
        .unwrap_or_else(|| AncillaVector::zero(c.ancilla_dim()));
    Ok(FdSample {
        num: det.component(PHI_PERP),
        den: det.component(PHI),
        norm: det.norm2().sqrt(),
    })
}

/// Finite-difference alpha at probe strength `eps`, centrally averaged
/// over `+eps` and `-eps`.
///
/// Agrees with [`alpha_analytic`] to second order in `eps`. When the
/// reference amplitude vanishes the result is divergent and carries the
/// raw norm-referenced ratio, which scales as `1/eps`.
pub fn alpha_finite_difference<T: Scalar>(
    c: &Circuit<T>,
    site: &SiteId,
    eps: T,
    condition: Option<&MarkerId>,
) -> Result<Alpha<T>, CircuitError> {
    if eps <= T::zero() {
        return Err(CircuitError::NegativeEpsilon(format!("{eps}")));
    }
    let plus = fd_sample(c, site, eps, condition)?;
    let minus = fd_sample(c, site, -eps, condition)?;
    let tol = divergence_tol::<T>();

    if plus.den.norm() < tol || minus.den.norm() < tol {
        let mut raws = Vec::new();
        for (sample, signed) in [(&plus, eps), (&minus, -eps)] {
            if sample.norm >= tol {
                raws.push(sample.num / Complex::new(signed * sample.norm, T::zero()));
            }
        }
        let scaled = match raws.len() {
            0 => None,
            n => {
                let sum = raws
                    .iter()
                    .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
                Some(sum / Complex::new(T::from_usize(n).unwrap(), T::zero()))
            }
        };
        return Ok(Alpha::Divergent { scaled });
    }

    let half = T::from_f64(0.5).unwrap();
    let a_plus = plus.num / (Complex::new(eps, T::zero()) * plus.den);
    let a_minus = minus.num / (Complex::new(-eps, T::zero()) * minus.den);
    Ok(Alpha::Finite((a_plus + a_minus).scale(half)))
}

/// Weak value of the projector onto `path` at the time slice entering
/// stage `stage`: forward amplitude times backward transfer over the
/// detect amplitude.
pub fn weak_value_at<T: Scalar>(c: &Circuit<T>, stage: usize, path: &PathLabel) -> Alpha<T> {
    let det = c.detect_amplitude();
    if det.norm() < divergence_tol::<T>() {
        return Alpha::Divergent { scaled: None };
    }
    let fwd = c.forward_amplitudes().at(stage, path);
    let bwd = c.backward_transfer(stage, path);
    Alpha::Finite(fwd * bwd / det)
}

/// The oracle a probe site's signal is judged against.
///
/// Computed entirely in the undisturbed sector, so in-flight pointer
/// devices cannot influence it.
pub fn weak_value_oracle<T: Scalar>(
    c: &Circuit<T>,
    site: &SiteId,
) -> Result<Alpha<T>, CircuitError> {
    let rec = c
        .site(site)
        .ok_or_else(|| CircuitError::UnknownSite(site.as_str().to_owned()))?;
    Ok(weak_value_at(c, rec.stage, &rec.path))
}

/// Sum of weak values over a declared cut. Equals 1 whenever the detect
/// amplitude is nonvanishing, since the cut carries the full amplitude.
pub fn cut_presence_sum<T: Scalar>(c: &Circuit<T>, cut: &Cut) -> Option<Complex<T>> {
    let mut sum = Complex::new(T::zero(), T::zero());
    for label in &cut.labels {
        match weak_value_at(c, cut.stage, label) {
            Alpha::Finite(v) => sum = sum + v,
            Alpha::Divergent { .. } => return None,
        }
    }
    Some(sum)
}

/// True when the undisturbed (but possibly conditioned) amplitude
/// reaching the detector vanishes; every observed signal is then
/// divergent.
pub fn postselection_divergent<T: Scalar>(
    c: &Circuit<T>,
    condition: Option<&MarkerId>,
) -> Result<bool, CircuitError> {
    let base = c.propagate_with(None, condition)?;
    let amp = base
        .entry(c.detect())
        .map(|v| v.component(PHI))
        .unwrap_or_else(|| Complex::new(T::zero(), T::zero()));
    Ok(amp.norm() < divergence_tol::<T>())
}

/// One row of a [`PresenceReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct PresenceEntry<T: Scalar> {
    pub site: SiteId,
    pub observed: Alpha<T>,
    pub oracle: Alpha<T>,
    /// `|observed|`, or the magnitude of the attached divergent ratio.
    pub magnitude: Option<T>,
    pub lying: bool,
    pub divergent: bool,
}

/// Transverse momentum kick left on the reflecting element at a probe
/// site: the real part of the oracle value times `sqrt(2) * p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T: Scalar> {
    pub site: SiteId,
    pub mirror_kick: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresenceReport<T: Scalar> {
    pub mode: AlphaMode,
    /// Probe strength used by finite-difference rows; zero for analytic.
    pub epsilon_used: T,
    pub entries: Vec<PresenceEntry<T>>,
    /// Present when a transverse momentum was supplied.
    pub traces: Vec<TraceRecord<T>>,
}

impl<T: Scalar> PresenceReport<T> {
    pub fn entry(&self, site: &str) -> Option<&PresenceEntry<T>> {
        self.entries.iter().find(|e| e.site.as_str() == site)
    }

    /// Sites flagged as lying, in declaration order.
    pub fn lying_sites(&self) -> Vec<&SiteId> {
        self.entries
            .iter()
            .filter(|e| e.lying)
            .map(|e| &e.site)
            .collect()
    }
}

fn classify_lying<T: Scalar>(observed: &Alpha<T>, oracle: &Alpha<T>, tol: T) -> bool {
    match (observed, oracle) {
        (Alpha::Finite(o), Alpha::Finite(w)) => (o - w).norm() > tol,
        (Alpha::Divergent { .. }, Alpha::Divergent { .. }) => false,
        _ => true,
    }
}

/// Lying tolerance for one entry.  The finite-difference estimator
/// carries O(eps^2) truncation, so its tolerance widens by
/// `(1 + |alpha|) * eps^2`; this stays orders of magnitude below the
/// order-one disagreements the flag is meant to catch.
fn lying_tolerance<T: Scalar>(mode: AlphaMode, epsilon: T, observed: &Alpha<T>) -> T {
    let base = T::from_f64(LYING_TOL).unwrap();
    match mode {
        AlphaMode::Analytic => base,
        AlphaMode::FiniteDifference => {
            let mag = observed.magnitude().unwrap_or_else(T::zero);
            base + (T::one() + mag) * epsilon * epsilon
        }
    }
}

/// Probes every site one at a time and assembles the full comparison
/// against the weak-value oracle.
///
/// `momentum` adds a trace record per site with a finite oracle value.
/// `condition` applies marker conditioning to the observed signals only;
/// the oracle stays unconditioned.
pub fn full_report<T: Scalar>(
    c: &Circuit<T>,
    mode: AlphaMode,
    epsilon: T,
    momentum: Option<T>,
    condition: Option<&MarkerId>,
) -> Result<PresenceReport<T>, CircuitError> {
    let mut entries = Vec::new();
    let mut traces = Vec::new();
    let sqrt2 = T::from_f64(2.0).unwrap().sqrt();

    for rec in c.sites() {
        let observed = match mode {
            AlphaMode::Analytic => alpha_analytic(c, &rec.id, condition)?,
            AlphaMode::FiniteDifference => alpha_finite_difference(c, &rec.id, epsilon, condition)?,
        };
        let oracle = weak_value_oracle(c, &rec.id)?;
        let tol = lying_tolerance(mode, epsilon, &observed);
        let lying = classify_lying(&observed, &oracle, tol);
        entries.push(PresenceEntry {
            site: rec.id.clone(),
            magnitude: observed.magnitude(),
            divergent: observed.is_divergent(),
            observed,
            oracle,
            lying,
        });
        if let (Some(p), Some(w)) = (momentum, oracle.finite()) {
            traces.push(TraceRecord {
                site: rec.id.clone(),
                mirror_kick: w.re * sqrt2 * p,
            });
        }
    }

    Ok(PresenceReport {
        mode,
        epsilon_used: match mode {
            AlphaMode::Analytic => T::zero(),
            AlphaMode::FiniteDifference => epsilon,
        },
        entries,
        traces,
    })
}

/// Alpha under marker conditioning: the state is projected onto the
/// marker's path at the marker's stage before postselection.
pub fn conditional_alpha<T: Scalar>(
    c: &Circuit<T>,
    site: &SiteId,
    marker: &MarkerId,
) -> Result<Alpha<T>, CircuitError> {
    alpha_analytic(c, site, Some(marker))
}

/// Outcome of [`presence_ratio`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresenceRatio<T: Scalar> {
    Finite(T),
    /// The localized reference diverges while the observed signal stays
    /// finite; the comparative presence is zero.
    ZeroByDivergence,
    /// No meaningful comparison (observed divergent, or a vanishing
    /// finite reference).
    Undefined,
}

impl<T: Scalar> PresenceRatio<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            PresenceRatio::Finite(v) => Some(*v),
            PresenceRatio::ZeroByDivergence => Some(T::zero()),
            PresenceRatio::Undefined => None,
        }
    }
}

/// Observed signal magnitude relative to the reference a particle
/// localized on the probed path would leave.
///
/// The reference is [`conditional_alpha`] with the given marker, which is
/// expected to sit on the probed site's path.
pub fn presence_ratio<T: Scalar>(
    c: &Circuit<T>,
    site: &SiteId,
    marker: &MarkerId,
) -> Result<PresenceRatio<T>, CircuitError> {
    let observed = alpha_analytic(c, site, None)?;
    let reference = conditional_alpha(c, site, marker)?;
    Ok(match (observed, reference) {
        (Alpha::Finite(o), Alpha::Divergent { .. }) => {
            if o.norm() < divergence_tol::<T>() {
                PresenceRatio::Finite(T::zero())
            } else {
                PresenceRatio::ZeroByDivergence
            }
        }
        (Alpha::Finite(o), Alpha::Finite(r)) => {
            if r.norm() < divergence_tol::<T>() {
                if o.norm() < divergence_tol::<T>() {
                    PresenceRatio::Finite(T::zero())
                } else {
                    PresenceRatio::Undefined
                }
            } else {
                PresenceRatio::Finite(o.norm() / r.norm())
            }
        }
        (Alpha::Divergent { .. }, _) => PresenceRatio::Undefined,
    })
}

/// Joint pointer state of two simultaneously active probes, read at the
/// detect port.
///
/// Component `cxy` multiplies the basis state with probe A's pointer in
/// level `x` and probe B's in level `y` (0 undisturbed, 1 excited).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoProbeState<T: Scalar> {
    pub c00: Complex<T>,
    pub c10: Complex<T>,
    pub c01: Complex<T>,
    pub c11: Complex<T>,
}

impl<T: Scalar> TwoProbeState<T> {
    /// Probe B's pointer components after projecting probe A's pointer
    /// onto its excited level.
    pub fn b_given_a_excited(&self) -> (Complex<T>, Complex<T>) {
        (self.c10, self.c11)
    }
}

/// Runs the circuit with both probes switched on at the same strength,
/// each coupled to its own two-level pointer (joint dimension 4).
pub fn two_probe_analysis<T: Scalar>(
    c: &Circuit<T>,
    probe_a: &SiteId,
    probe_b: &SiteId,
    eps: T,
) -> Result<TwoProbeState<T>, CircuitError> {
    use crate::circuit::{Element, Stage};
    use crate::qstate::JointState;

    if probe_a == probe_b {
        return Err(CircuitError::DuplicateSite(probe_a.as_str().to_owned()));
    }
    for id in [probe_a, probe_b] {
        if c.site(id).is_none() {
            return Err(CircuitError::UnknownSite(id.as_str().to_owned()));
        }
    }

    // Basis index is a + 2*b for pointer levels (a, b). Probe A acts on
    // the pairs (0,1) and (2,3), probe B on (0,2) and (1,3).
    const A_PAIRS: [(usize, usize); 2] = [(0, 1), (2, 3)];
    const B_PAIRS: [(usize, usize); 2] = [(0, 2), (1, 3)];

    let rotation = TwoLevelOp::probe_rotation(eps);
    let flip = TwoLevelOp::pi_device();
    let mut state = JointState::new();
    state.insert(c.source().clone(), AncillaVector::basis(4, 0));

    for stage in c.stages() {
        match stage {
            Stage::Element { path, element } => match element {
                Element::Probe(id) => {
                    let pairs = if id == probe_a {
                        Some(A_PAIRS)
                    } else if id == probe_b {
                        Some(B_PAIRS)
                    } else {
                        None
                    };
                    if let Some(pairs) = pairs {
                        for (i, j) in pairs {
                            state.apply_op(path, &rotation, i, j)?;
                        }
                    }
                }
                Element::PiDevice => {
                    // The device flips the excited level of both pointers.
                    for (i, j) in A_PAIRS.into_iter().chain(B_PAIRS) {
                        state.apply_op(path, &flip, i, j)?;
                    }
                }
                Element::Block => state.set_zero(path)?,
                Element::Marker(_) => {}
                Element::Phase(angle) => {
                    state.scale(path, Complex::from_polar(T::one(), *angle))?;
                }
                Element::Mirror => {}
            },
            Stage::Splitter(sp) => {
                let u = state
                    .remove(&sp.input_u)
                    .ok_or_else(|| CircuitError::NotLive(sp.input_u.as_str().to_owned()))?;
                let v = match &sp.input_v {
                    Some(label) => state
                        .remove(label)
                        .ok_or_else(|| CircuitError::NotLive(label.as_str().to_owned()))?,
                    None => AncillaVector::zero(4),
                };
                let (out_u, out_v) = crate::circuit::beam_split(&u, &v, sp.t(), sp.r())?;
                state.insert(sp.output_u.clone(), out_u);
                state.insert(sp.output_v.clone(), out_v);
            }
        }
    }

    let det = state
        .entry(c.detect())
        .cloned()
        .unwrap_or_else(|| AncillaVector::zero(4));
    Ok(TwoProbeState {
        c00: det.component(0),
        c10: det.component(1),
        c01: det.component(2),
        c11: det.component(3),
    })
}

/// Per-site pair of signals: in the circuit as built, then with a block
/// in place.
pub type BlockContrast<T> = BTreeMap<SiteId, (Alpha<T>, Alpha<T>)>;

/// Observed signal of each listed probe before and after a block is
/// dropped on `block_path`.
pub fn block_effect_probe<T: Scalar>(
    c: &Circuit<T>,
    block_path: &PathLabel,
    probes: &[SiteId],
) -> Result<BlockContrast<T>, CircuitError> {
    let blocked = c.with_block_on(block_path)?;
    let mut out = BTreeMap::new();
    for site in probes {
        let before = alpha_analytic(c, site, None)?;
        let after = alpha_analytic(&blocked, site, None)?;
        out.insert(site.clone(), (before, after));
    }
    Ok(out)
}
