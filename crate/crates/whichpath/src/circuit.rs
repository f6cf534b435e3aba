//! Interferometer circuits: elements, staged layout, propagation.
//!
//! A [`Circuit`] is an ordered list of stages applied to a [`JointState`].
//! A stage either applies one [`Element`] to a single path or mixes two
//! paths on a beam splitter. Path labels are produced by splitter outputs
//! (or by the source), stay live until consumed as a splitter input, and
//! are unique over the whole circuit.
//!
//! The beam splitter convention is fixed once: with reflection amplitude
//! `r` and transmission amplitude `t`,
//!
//! ```text
//! u' = r*u + t*v
//! v' = t*u - r*v
//! ```
//!
//! which is real, symmetric and its own inverse. A `split` stage is the
//! same matrix with the second input port left dark. The ratio carried in
//! the circuit is the reflection probability `r^2`.

use std::collections::BTreeSet;

use num_complex::Complex;
use thiserror::Error;

use crate::qstate::{AncillaVector, JointState, StateError, TwoLevelOp, PHI, PHI_PERP};
use crate::{MarkerId, PathLabel, Scalar, SiteId};

/// Tolerance on `t^2 + r^2 = 1` for beam splitter parameters.
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("path label `{0}` is not live here")]
    NotLive(String),
    #[error("duplicate path label `{0}`")]
    DuplicatePath(String),
    #[error("duplicate probe site `{0}`")]
    DuplicateSite(String),
    #[error("duplicate marker `{0}`")]
    DuplicateMarker(String),
    #[error("duplicate splitter name `{0}`")]
    DuplicateSplitter(String),
    #[error("splitter ports must be distinct")]
    PortsNotDistinct,
    #[error("ratio {0} outside [0, 1]")]
    RatioOutOfRange(String),
    #[error("beam splitter parameters not unitary: t^2 + r^2 = {0}")]
    NonUnitary(String),
    #[error("unknown probe site `{0}`")]
    UnknownSite(String),
    #[error("unknown marker `{0}`")]
    UnknownMarker(String),
    #[error("unknown path label `{0}`")]
    UnknownPath(String),
    #[error("probe strength must be nonnegative, got {0}")]
    NegativeEpsilon(String),
    #[error("no detect port declared")]
    MissingDetect,
    #[error("detect port already declared as `{0}`")]
    DetectAlreadySet(String),
    #[error("detect port `{0}` does not survive to the end of the circuit")]
    DetectNotLive(String),
    #[error("ancilla dimension {0} is too small; need at least 2")]
    AncillaDimTooSmall(usize),
    #[error(transparent)]
    State(#[from] StateError),
}

/// One single-path element.
#[derive(Debug, Clone, PartialEq)]
pub enum Element<T: Scalar> {
    /// A named location where the probe disturbance may act. Inactive
    /// probes are the identity.
    Probe(SiteId),
    /// Flips the sign of the `phi_perp` pointer component.
    PiDevice,
    /// Removes all amplitude from the path.
    Block,
    /// Nondemolition presence recorder; identity unless conditioned on.
    Marker(MarkerId),
    /// Multiplies the path amplitude by `exp(i * angle)`.
    Phase(T),
    /// Geometric redirection; the identity on amplitudes.
    Mirror,
}

/// A two-port beam splitter stage.
///
/// `input_v` of `None` means the second input port is dark, i.e. the
/// splitter is used to split one beam rather than recombine two.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitter<T: Scalar> {
    pub name: String,
    pub input_u: PathLabel,
    pub input_v: Option<PathLabel>,
    /// Receives `r*u + t*v`; for a split this is the reflected port.
    pub output_u: PathLabel,
    /// Receives `t*u - r*v`; for a split this is the transmitted port.
    pub output_v: PathLabel,
    /// Reflection probability `r^2`.
    pub ratio: T,
}

impl<T: Scalar> Splitter<T> {
    pub fn r(&self) -> T {
        self.ratio.sqrt()
    }

    pub fn t(&self) -> T {
        (T::one() - self.ratio).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage<T: Scalar> {
    Element {
        path: PathLabel,
        element: Element<T>,
    },
    Splitter(Splitter<T>),
}

/// A complete time slice: the set of path labels that together carry the
/// full amplitude just before stage `stage`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cut {
    pub labels: BTreeSet<PathLabel>,
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteRecord {
    pub id: SiteId,
    pub stage: usize,
    pub path: PathLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerRecord {
    pub id: MarkerId,
    pub stage: usize,
    pub path: PathLabel,
}

/// Mixes two ancilla vectors on a beam splitter with transmission
/// amplitude `t` and reflection amplitude `r`.
///
/// Returns `(r*u + t*v, t*u - r*v)`. The parameters must satisfy
/// `t^2 + r^2 = 1` within [`UNITARITY_TOL`].
pub fn beam_split<T: Scalar>(
    u: &AncillaVector<T>,
    v: &AncillaVector<T>,
    t: T,
    r: T,
) -> Result<(AncillaVector<T>, AncillaVector<T>), CircuitError> {
    let defect = (t * t + r * r - T::one()).abs();
    if defect > T::from_f64(UNITARITY_TOL).unwrap() {
        return Err(CircuitError::NonUnitary(format!("{}", t * t + r * r)));
    }
    let rc = Complex::new(r, T::zero());
    let tc = Complex::new(t, T::zero());
    let out_u = u.scaled(rc).add(&v.scaled(tc))?;
    let out_v = u.scaled(tc).add(&v.scaled(-rc))?;
    Ok((out_u, out_v))
}

/// A validated, immutable circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit<T: Scalar> {
    ancilla_dim: usize,
    source: PathLabel,
    detect: PathLabel,
    stages: Vec<Stage<T>>,
    sites: Vec<SiteRecord>,
    markers: Vec<MarkerRecord>,
}

impl<T: Scalar> Circuit<T> {
    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn source(&self) -> &PathLabel {
        &self.source
    }

    pub fn detect(&self) -> &PathLabel {
        &self.detect
    }

    pub fn stages(&self) -> &[Stage<T>] {
        &self.stages
    }

    /// Probe sites in declaration order.
    pub fn sites(&self) -> &[SiteRecord] {
        &self.sites
    }

    pub fn markers(&self) -> &[MarkerRecord] {
        &self.markers
    }

    pub fn site(&self, id: &SiteId) -> Option<&SiteRecord> {
        self.sites.iter().find(|s| &s.id == id)
    }

    pub fn marker(&self, id: &MarkerId) -> Option<&MarkerRecord> {
        self.markers.iter().find(|m| &m.id == id)
    }

    /// Path labels live just before stage `stage`.
    pub fn live_at(&self, stage: usize) -> BTreeSet<PathLabel> {
        let mut live = BTreeSet::new();
        live.insert(self.source.clone());
        for s in &self.stages[..stage.min(self.stages.len())] {
            if let Stage::Splitter(sp) = s {
                live.remove(&sp.input_u);
                if let Some(v) = &sp.input_v {
                    live.remove(v);
                }
                live.insert(sp.output_u.clone());
                live.insert(sp.output_v.clone());
            }
        }
        live
    }

    /// Propagates the source pointer state through every stage.
    ///
    /// `active_probe` selects at most one probe site whose rotation by
    /// `epsilon` is switched on; all other probe sites act as the
    /// identity. With `condition` set, the named marker projects the state
    /// onto its own path at its stage (no renormalization).
    pub fn propagate(
        &self,
        active_probe: Option<&SiteId>,
        epsilon: T,
        condition: Option<&MarkerId>,
    ) -> Result<JointState<T>, CircuitError> {
        if epsilon < T::zero() {
            return Err(CircuitError::NegativeEpsilon(format!("{epsilon}")));
        }
        let probe = active_probe.map(|id| (id, TwoLevelOp::probe_rotation(epsilon)));
        self.propagate_with(probe, condition)
    }

    /// Propagation with an arbitrary operator at the active probe site.
    ///
    /// This is the shared engine behind [`Self::propagate`], the signed
    /// finite-difference branches, and linear-response runs that place the
    /// rotation generator at the site instead of a finite rotation.
    pub(crate) fn propagate_with(
        &self,
        probe: Option<(&SiteId, TwoLevelOp<T>)>,
        condition: Option<&MarkerId>,
    ) -> Result<JointState<T>, CircuitError> {
        if let Some((id, _)) = probe {
            if self.site(id).is_none() {
                return Err(CircuitError::UnknownSite(id.as_str().to_owned()));
            }
        }
        if let Some(id) = condition {
            if self.marker(id).is_none() {
                return Err(CircuitError::UnknownMarker(id.as_str().to_owned()));
            }
        }

        let dim = self.ancilla_dim;
        let mut state = JointState::new();
        state.insert(self.source.clone(), AncillaVector::phi(dim));

        for stage in &self.stages {
            match stage {
                Stage::Element { path, element } => match element {
                    Element::Probe(id) => {
                        if let Some((active, op)) = &probe {
                            if *active == id {
                                state.apply_op(path, op, PHI, PHI_PERP)?;
                            }
                        }
                    }
                    Element::PiDevice => {
                        state.apply_op(path, &TwoLevelOp::pi_device(), PHI, PHI_PERP)?;
                    }
                    Element::Block => state.set_zero(path)?,
                    Element::Marker(id) => {
                        if condition == Some(id) {
                            state.project_onto(path)?;
                        }
                    }
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
                        None => AncillaVector::zero(dim),
                    };
                    let (out_u, out_v) = beam_split(&u, &v, sp.t(), sp.r())?;
                    state.insert(sp.output_u.clone(), out_u);
                    state.insert(sp.output_v.clone(), out_v);
                }
            }
        }
        Ok(state)
    }

    /// Scalar amplitudes of the undisturbed `phi` sector.
    ///
    /// Snapshot `k` holds, per live path, the amplitude just before stage
    /// `k`; snapshot `stages.len()` is the output. Probe sites, devices,
    /// markers and mirrors act trivially here, while phases and blocks
    /// participate.
    pub fn forward_amplitudes(&self) -> ForwardAmplitudes<T> {
        let mut current: Vec<(PathLabel, Complex<T>)> =
            vec![(self.source.clone(), Complex::new(T::one(), T::zero()))];
        let mut snapshots = Vec::with_capacity(self.stages.len() + 1);
        snapshots.push(current.clone());
        for stage in &self.stages {
            scalar_step(&mut current, stage);
            snapshots.push(current.clone());
        }
        ForwardAmplitudes { snapshots }
    }

    /// Amplitude reaching the detect port from a unit `phi`-sector
    /// excitation placed on `path` just before stage `stage`.
    pub fn backward_transfer(&self, stage: usize, path: &PathLabel) -> Complex<T> {
        let mut current: Vec<(PathLabel, Complex<T>)> =
            vec![(path.clone(), Complex::new(T::one(), T::zero()))];
        for s in &self.stages[stage.min(self.stages.len())..] {
            scalar_step(&mut current, s);
        }
        current
            .iter()
            .find(|(label, _)| label == &self.detect)
            .map(|(_, amp)| *amp)
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Undisturbed `phi`-sector amplitude at the detect port.
    pub fn detect_amplitude(&self) -> Complex<T> {
        let fwd = self.forward_amplitudes();
        fwd.at(self.stages.len(), &self.detect)
    }

    /// Copy of the circuit with a block inserted on `path`, placed at the
    /// end of that path's segment (just before it is consumed, or at the
    /// end of the circuit if it never is).
    pub fn with_block_on(&self, path: &PathLabel) -> Result<Circuit<T>, CircuitError> {
        let produced = *path == self.source
            || self.stages.iter().any(|s| match s {
                Stage::Splitter(sp) => sp.output_u == *path || sp.output_v == *path,
                _ => false,
            });
        if !produced {
            return Err(CircuitError::UnknownPath(path.as_str().to_owned()));
        }
        let consumed_at = self.stages.iter().position(|s| match s {
            Stage::Splitter(sp) => sp.input_u == *path || sp.input_v.as_ref() == Some(path),
            _ => false,
        });
        let mut stages = self.stages.clone();
        let at = consumed_at.unwrap_or(stages.len());
        stages.insert(
            at,
            Stage::Element {
                path: path.clone(),
                element: Element::Block,
            },
        );
        let (sites, markers) = index_stages(&stages);
        Ok(Circuit {
            ancilla_dim: self.ancilla_dim,
            source: self.source.clone(),
            detect: self.detect.clone(),
            stages,
            sites,
            markers,
        })
    }
}

/// Per-stage `phi`-sector amplitude snapshots from
/// [`Circuit::forward_amplitudes`].
#[derive(Debug, Clone)]
pub struct ForwardAmplitudes<T: Scalar> {
    snapshots: Vec<Vec<(PathLabel, Complex<T>)>>,
}

impl<T: Scalar> ForwardAmplitudes<T> {
    /// Amplitude on `path` just before stage `stage` (zero when the label
    /// is not live there).
    pub fn at(&self, stage: usize, path: &PathLabel) -> Complex<T> {
        self.snapshots
            .get(stage)
            .and_then(|snap| snap.iter().find(|(label, _)| label == path))
            .map(|(_, amp)| *amp)
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

fn scalar_step<T: Scalar>(current: &mut Vec<(PathLabel, Complex<T>)>, stage: &Stage<T>) {
    match stage {
        Stage::Element { path, element } => match element {
            Element::Phase(angle) => {
                if let Some(slot) = current.iter_mut().find(|(label, _)| label == path) {
                    slot.1 = slot.1 * Complex::from_polar(T::one(), *angle);
                }
            }
            Element::Block => {
                if let Some(slot) = current.iter_mut().find(|(label, _)| label == path) {
                    slot.1 = Complex::new(T::zero(), T::zero());
                }
            }
            _ => {}
        },
        Stage::Splitter(sp) => {
            let take = |current: &mut Vec<(PathLabel, Complex<T>)>, label: &PathLabel| match current
                .iter()
                .position(|(l, _)| l == label)
            {
                Some(idx) => current.remove(idx).1,
                None => Complex::new(T::zero(), T::zero()),
            };
            let u = take(current, &sp.input_u);
            let v = match &sp.input_v {
                Some(label) => take(current, label),
                None => Complex::new(T::zero(), T::zero()),
            };
            let r = Complex::new(sp.r(), T::zero());
            let t = Complex::new(sp.t(), T::zero());
            current.push((sp.output_u.clone(), r * u + t * v));
            current.push((sp.output_v.clone(), t * u - r * v));
        }
    }
}

fn index_stages<T: Scalar>(stages: &[Stage<T>]) -> (Vec<SiteRecord>, Vec<MarkerRecord>) {
    let mut sites = Vec::new();
    let mut markers = Vec::new();
    for (idx, stage) in stages.iter().enumerate() {
        if let Stage::Element { path, element } = stage {
            match element {
                Element::Probe(id) => sites.push(SiteRecord {
                    id: id.clone(),
                    stage: idx,
                    path: path.clone(),
                }),
                Element::Marker(id) => markers.push(MarkerRecord {
                    id: id.clone(),
                    stage: idx,
                    path: path.clone(),
                }),
                _ => {}
            }
        }
    }
    (sites, markers)
}

/// Incremental, validating constructor for [`Circuit`].
#[derive(Debug, Clone)]
pub struct CircuitBuilder<T: Scalar> {
    ancilla_dim: usize,
    source: PathLabel,
    stages: Vec<Stage<T>>,
    live: BTreeSet<PathLabel>,
    used_labels: BTreeSet<PathLabel>,
    site_ids: BTreeSet<SiteId>,
    marker_ids: BTreeSet<MarkerId>,
    splitter_names: BTreeSet<String>,
    detect: Option<PathLabel>,
}

impl<T: Scalar> CircuitBuilder<T> {
    /// Starts a circuit whose source enters on `source`.
    pub fn new(source: impl Into<PathLabel>) -> Self {
        let source = source.into();
        let mut live = BTreeSet::new();
        live.insert(source.clone());
        let mut used = BTreeSet::new();
        used.insert(source.clone());
        Self {
            ancilla_dim: 2,
            source,
            stages: Vec::new(),
            live,
            used_labels: used,
            site_ids: BTreeSet::new(),
            marker_ids: BTreeSet::new(),
            splitter_names: BTreeSet::new(),
            detect: None,
        }
    }

    pub fn ancilla_dim(&mut self, dim: usize) -> Result<&mut Self, CircuitError> {
        if dim < 2 {
            return Err(CircuitError::AncillaDimTooSmall(dim));
        }
        self.ancilla_dim = dim;
        Ok(self)
    }

    pub fn live_labels(&self) -> &BTreeSet<PathLabel> {
        &self.live
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Appends one element to a live path.
    pub fn element(
        &mut self,
        path: impl Into<PathLabel>,
        element: Element<T>,
    ) -> Result<&mut Self, CircuitError> {
        let path = path.into();
        if !self.live.contains(&path) {
            return Err(CircuitError::NotLive(path.as_str().to_owned()));
        }
        match &element {
            Element::Probe(id) if !self.site_ids.insert(id.clone()) => {
                return Err(CircuitError::DuplicateSite(id.as_str().to_owned()));
            }
            Element::Marker(id) if !self.marker_ids.insert(id.clone()) => {
                return Err(CircuitError::DuplicateMarker(id.as_str().to_owned()));
            }
            _ => {}
        }
        self.stages.push(Stage::Element { path, element });
        Ok(self)
    }

    pub fn probe(
        &mut self,
        path: impl Into<PathLabel>,
        id: impl Into<SiteId>,
    ) -> Result<&mut Self, CircuitError> {
        self.element(path, Element::Probe(id.into()))
    }

    pub fn pi_device(&mut self, path: impl Into<PathLabel>) -> Result<&mut Self, CircuitError> {
        self.element(path, Element::PiDevice)
    }

    pub fn block(&mut self, path: impl Into<PathLabel>) -> Result<&mut Self, CircuitError> {
        self.element(path, Element::Block)
    }

    pub fn marker(
        &mut self,
        path: impl Into<PathLabel>,
        id: impl Into<MarkerId>,
    ) -> Result<&mut Self, CircuitError> {
        self.element(path, Element::Marker(id.into()))
    }

    pub fn phase(
        &mut self,
        path: impl Into<PathLabel>,
        angle: T,
    ) -> Result<&mut Self, CircuitError> {
        self.element(path, Element::Phase(angle))
    }

    pub fn mirror(&mut self, path: impl Into<PathLabel>) -> Result<&mut Self, CircuitError> {
        self.element(path, Element::Mirror)
    }

    /// Splits one live path into a reflected and a transmitted output.
    ///
    /// `ratio` is the reflection probability going to the first output.
    pub fn split(
        &mut self,
        name: impl Into<String>,
        input: impl Into<PathLabel>,
        outputs: (impl Into<PathLabel>, impl Into<PathLabel>),
        ratio: T,
    ) -> Result<&mut Self, CircuitError> {
        self.splitter(
            name,
            input.into(),
            None,
            outputs.0.into(),
            outputs.1.into(),
            ratio,
        )
    }

    /// Recombines two live paths.
    ///
    /// The first output receives `r*u + t*v`, the second `t*u - r*v`.
    pub fn merge(
        &mut self,
        name: impl Into<String>,
        inputs: (impl Into<PathLabel>, impl Into<PathLabel>),
        outputs: (impl Into<PathLabel>, impl Into<PathLabel>),
        ratio: T,
    ) -> Result<&mut Self, CircuitError> {
        self.splitter(
            name,
            inputs.0.into(),
            Some(inputs.1.into()),
            outputs.0.into(),
            outputs.1.into(),
            ratio,
        )
    }

    fn splitter(
        &mut self,
        name: impl Into<String>,
        input_u: PathLabel,
        input_v: Option<PathLabel>,
        output_u: PathLabel,
        output_v: PathLabel,
        ratio: T,
    ) -> Result<&mut Self, CircuitError> {
        let name = name.into();
        if self.splitter_names.contains(&name) {
            return Err(CircuitError::DuplicateSplitter(name));
        }
        if !(ratio >= T::zero() && ratio <= T::one()) {
            return Err(CircuitError::RatioOutOfRange(format!("{ratio}")));
        }
        if !self.live.contains(&input_u) {
            return Err(CircuitError::NotLive(input_u.as_str().to_owned()));
        }
        if let Some(v) = &input_v {
            if *v == input_u {
                return Err(CircuitError::PortsNotDistinct);
            }
            if !self.live.contains(v) {
                return Err(CircuitError::NotLive(v.as_str().to_owned()));
            }
        }
        if output_u == output_v {
            return Err(CircuitError::PortsNotDistinct);
        }
        for out in [&output_u, &output_v] {
            if self.used_labels.contains(out) {
                return Err(CircuitError::DuplicatePath(out.as_str().to_owned()));
            }
        }

        self.live.remove(&input_u);
        if let Some(v) = &input_v {
            self.live.remove(v);
        }
        for out in [&output_u, &output_v] {
            self.live.insert(out.clone());
            self.used_labels.insert(out.clone());
        }
        self.splitter_names.insert(name.clone());
        self.stages.push(Stage::Splitter(Splitter {
            name,
            input_u,
            input_v,
            output_u,
            output_v,
            ratio,
        }));
        Ok(self)
    }

    pub fn detect(&mut self, path: impl Into<PathLabel>) -> Result<&mut Self, CircuitError> {
        let path = path.into();
        if let Some(existing) = &self.detect {
            return Err(CircuitError::DetectAlreadySet(existing.as_str().to_owned()));
        }
        if !self.used_labels.contains(&path) {
            return Err(CircuitError::UnknownPath(path.as_str().to_owned()));
        }
        self.detect = Some(path);
        Ok(self)
    }

    pub fn build(self) -> Result<Circuit<T>, CircuitError> {
        let detect = self.detect.ok_or(CircuitError::MissingDetect)?;
        if !self.live.contains(&detect) {
            return Err(CircuitError::DetectNotLive(detect.as_str().to_owned()));
        }
        let (sites, markers) = index_stages(&self.stages);
        Ok(Circuit {
            ancilla_dim: self.ancilla_dim,
            source: self.source,
            detect,
            stages: self.stages,
            sites,
            markers,
        })
    }
}
