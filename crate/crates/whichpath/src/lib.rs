//! Presence-signal analysis for multi-path interferometers.
//!
//! A particle crossing an interferometer carries a two-level pointer degree
//! of freedom. A weak disturbance placed in one arm rotates that pointer by
//! a small angle epsilon; whatever fraction of the rotation survives to the
//! detection port, divided by epsilon, is the arm's presence signal alpha.
//! For plain circuits alpha equals the weak value of the projector onto the
//! arm, but an in-flight device that flips the sign of the rotated pointer
//! component can make the detected signal disagree with the weak value: the
//! record then lies about where the particle has been.
//!
//! The crate propagates exact complex amplitudes through staged circuits of
//! beam splitters, phases, blocks and markers, extracts alpha per probe
//! site by linear response or finite differencing, compares it against an
//! independently computed weak-value oracle, and classifies each site as
//! honest, lying, or divergent under postselection.
//!
//! Modules:
//!
//! - [`qstate`]: pointer vectors, joint path states, two-level operators.
//! - [`circuit`]: circuit construction, validation, and propagation.
//! - [`presence`]: alpha extraction, oracle comparison, conditional and
//!   two-probe analyses.
//! - [`scenariodsl`]: the `.ifz` text format for scenarios.
//! - [`presets`]: built-in scenarios with golden expectation tables.
//! - [`cli`]: the `whichpath` command-line front end.
//!
//! All amplitude arithmetic is generic over the floating-point scalar via
//! [`Scalar`]; the `*64` aliases below fix `f64`, which is what the file
//! format, the presets and the CLI use.

use std::fmt;

use num_traits::{Float, FloatConst, FromPrimitive};

pub mod circuit;
pub mod cli;
pub mod presence;
pub mod presets;
pub mod qstate;
pub mod scenariodsl;
#[cfg(test)]
pub(crate) mod testutil;

/// Floating-point scalar backing amplitude arithmetic: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_newtype!(
    /// Name of one path segment between splitter events.
    PathLabel
);
id_newtype!(
    /// Identifier of a probe site, the location a disturbance can act at.
    SiteId
);
id_newtype!(
    /// Identifier of a marker, a nondemolition presence recorder.
    MarkerId
);

pub type AncillaVector64 = qstate::AncillaVector<f64>;
pub type JointState64 = qstate::JointState<f64>;
pub type TwoLevelOp64 = qstate::TwoLevelOp<f64>;
pub type Circuit64 = circuit::Circuit<f64>;
pub type CircuitBuilder64 = circuit::CircuitBuilder<f64>;
pub type Alpha64 = presence::Alpha<f64>;
pub type PresenceReport64 = presence::PresenceReport<f64>;

pub use circuit::{beam_split, Circuit, CircuitBuilder, CircuitError, Cut, Element, Stage};
pub use presence::{
    alpha_analytic, alpha_finite_difference, block_effect_probe, conditional_alpha,
    cut_presence_sum, full_report, postselection_divergent, presence_ratio, two_probe_analysis,
    weak_value_at, weak_value_oracle, Alpha, AlphaMode, BlockContrast, PresenceEntry,
    PresenceRatio, PresenceReport, TraceRecord, TwoProbeState, DEFAULT_EPSILON, DIVERGENCE_TOL,
    LYING_TOL,
};
pub use presets::{
    all_presets, build_preset, list_presets, verify_scenario, PresetEntry, VerifyFailure,
};
pub use qstate::{inner, AncillaVector, JointState, TwoLevelOp};
pub use scenariodsl::{
    parse, parse_with_diagnostics, serialize, ParseDiagnostic, Scenario, Severity,
};
