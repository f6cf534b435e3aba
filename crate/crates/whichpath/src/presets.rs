//! Built-in scenarios embedded from `scenarios/*.ifz`.
//!
//! Each preset is stored as a canonical scenario file, embedded at
//! compile time, and parsed on demand, so the files on disk are the
//! single source of truth. The `expect` table inside each file records
//! the reference presence signals that [`verify_scenario`] checks
//! against a fresh analytic run.

use std::fmt;

use num_complex::Complex64;

use crate::circuit::CircuitError;
use crate::presence::{cut_presence_sum, full_report, AlphaMode};
use crate::scenariodsl::{parse, Scenario};
use crate::SiteId;

/// Tolerance for comparing a computed signal against a stored one.
pub const VERIFY_TOL: f64 = 1e-9;

/// A named, documented scenario shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// Canonical scenario text, byte-identical to `serialize` output.
    pub source: &'static str,
}

pub const PRESETS: &[PresetEntry] = &[
    PresetEntry {
        name: "fig1a",
        description: "Single undivided path with probes at both ends; the particle \
                      is fully present everywhere along it.",
        source: include_str!("../../../scenarios/fig1a.ifz"),
    },
    PresetEntry {
        name: "fig1b",
        description: "One beam splitter with detection on the reflected port; the \
                      transmitted port shows no presence.",
        source: include_str!("../../../scenarios/fig1b.ifz"),
    },
    PresetEntry {
        name: "fig2a",
        description: "Balanced two-arm interferometer tuned constructively; each arm \
                      carries presence one half.",
        source: include_str!("../../../scenarios/fig2a.ifz"),
    },
    PresetEntry {
        name: "fig2a_pi",
        description: "Balanced interferometer with a pointer sign-flip device on arm B \
                      downstream of its probe; the input and arm B then report signals \
                      that disagree with the weak-value oracle.",
        source: include_str!("../../../scenarios/fig2a_pi.ifz"),
    },
    PresetEntry {
        name: "fig2a_two_probe",
        description: "Balanced interferometer for the joint two-probe run on arms A \
                      and B; the joint excitation amplitude vanishes identically.",
        source: include_str!("../../../scenarios/fig2a_two_probe.ifz"),
    },
    PresetEntry {
        name: "fig2b",
        description: "Unbalanced 90:10 interferometer; the arms carry presence 0.9 \
                      and 0.1.",
        source: include_str!("../../../scenarios/fig2b.ifz"),
    },
    PresetEntry {
        name: "fig2c",
        description: "Unbalanced 90:10 interferometer tuned destructively; the arm \
                      signals overshoot to 1.125 and undershoot to -0.125 while still \
                      summing to one.",
        source: include_str!("../../../scenarios/fig2c.ifz"),
    },
    PresetEntry {
        name: "fig3a",
        description: "Nested interferometer with the inner loop tuned dark toward the \
                      final recombiner; the feed and exit arms show zero presence while \
                      the inner arms show +1 and -1.",
        source: include_str!("../../../scenarios/fig3a.ifz"),
    },
    PresetEntry {
        name: "fig3a_block_e",
        description: "Nested interferometer with the feed arm blocked after its probe; \
                      every inner-loop signal vanishes while the outer arm is \
                      unaffected.",
        source: include_str!("../../../scenarios/fig3a_block_e.ifz"),
    },
    PresetEntry {
        name: "fig3b",
        description: "Nested interferometer with a pointer sign-flip device on inner \
                      arm B upstream of its probe; the input and feed-arm signals \
                      inflate to 3 and 2 while the weak-value oracle is unchanged.",
        source: include_str!("../../../scenarios/fig3b.ifz"),
    },
];

pub fn list_presets() -> &'static [PresetEntry] {
    PRESETS
}

pub fn preset(name: &str) -> Option<&'static PresetEntry> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Parses the named preset. Embedded sources are validated by the test
/// suite, so a parse failure here is a packaging bug.
pub fn build_preset(name: &str) -> Option<Scenario> {
    preset(name).map(|p| {
        parse(p.source).unwrap_or_else(|e| panic!("embedded preset '{name}' is invalid: {e:?}"))
    })
}

/// Builds every preset, in listed order.
pub fn all_presets() -> Vec<Scenario> {
    PRESETS
        .iter()
        .map(|p| build_preset(p.name).expect("listed preset builds"))
        .collect()
}

/// One discrepancy found by [`verify_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub enum VerifyFailure {
    /// A probe's recomputed signal does not match the stored one.
    /// `observed` is `None` when the signal is divergent or the site
    /// does not exist.
    Signal {
        site: SiteId,
        expected: Complex64,
        observed: Option<Complex64>,
    },
    /// The weak values across a declared cut do not sum to one.
    CutSum {
        stage: usize,
        sum: Option<Complex64>,
    },
}

impl fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyFailure::Signal {
                site,
                expected,
                observed: Some(v),
            } => write!(f, "site {site}: expected {expected}, computed {v}"),
            VerifyFailure::Signal { site, expected, .. } => {
                write!(f, "site {site}: expected {expected}, no finite signal")
            }
            VerifyFailure::CutSum {
                stage,
                sum: Some(s),
            } => write!(f, "cut before stage {stage}: weak values sum to {s}, not 1"),
            VerifyFailure::CutSum { stage, .. } => {
                write!(
                    f,
                    "cut before stage {stage}: weak values are not all finite"
                )
            }
        }
    }
}

/// Recomputes every probe signal analytically and checks it against the
/// scenario's `expect` table, then checks that the weak values across
/// each declared cut sum to one.
pub fn verify_scenario(s: &Scenario) -> Result<Vec<VerifyFailure>, CircuitError> {
    let report = full_report(&s.circuit, AlphaMode::Analytic, 0.0, None, None)?;
    let mut failures = Vec::new();
    for (site, expected) in &s.expected {
        let observed = report
            .entry(site.as_str())
            .and_then(|e| e.observed.finite());
        let ok = matches!(observed, Some(v) if (v - expected).norm() <= VERIFY_TOL);
        if !ok {
            failures.push(VerifyFailure::Signal {
                site: site.clone(),
                expected: *expected,
                observed,
            });
        }
    }
    for cut in &s.cuts {
        let sum = cut_presence_sum(&s.circuit, cut);
        let ok = matches!(sum, Some(v) if (v - Complex64::new(1.0, 0.0)).norm() <= VERIFY_TOL);
        if !ok {
            failures.push(VerifyFailure::CutSum {
                stage: cut.stage,
                sum,
            });
        }
    }
    Ok(failures)
}
