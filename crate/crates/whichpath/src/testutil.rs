//! Circuit fixtures shared by the unit tests.

use crate::circuit::{Circuit, CircuitBuilder};

/// Where the sign-flip device sits relative to the probe site on arm B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DeviceSpot {
    None,
    BeforeProbe,
    AfterProbe,
}

/// Single path `W` from source to detector, probed at entry (`IN`) and
/// exit (`OUT`), with a marker `mW` in between.
pub(crate) fn one_path() -> Circuit<f64> {
    let mut b = CircuitBuilder::<f64>::new("W");
    b.probe("W", "IN").unwrap();
    b.mirror("W").unwrap();
    b.marker("W", "mW").unwrap();
    b.probe("W", "OUT").unwrap();
    b.detect("W").unwrap();
    b.build().unwrap()
}

/// One balanced splitter, detection on the reflected port, the other port
/// (`REF`) never reunited with it.
pub(crate) fn split_only() -> Circuit<f64> {
    let mut b = CircuitBuilder::<f64>::new("IN");
    b.probe("IN", "IN").unwrap();
    b.split("BS1", "IN", ("OUT", "REF"), 0.5).unwrap();
    b.probe("OUT", "OUT").unwrap();
    b.probe("REF", "REF").unwrap();
    b.detect("OUT").unwrap();
    b.build().unwrap()
}

/// Two-arm interferometer with equal splitters of the given reflection
/// probability. `tune_pi` adds a half-turn phase on arm B so the detect
/// port interferes destructively; `device` optionally inserts the
/// sign-flip device on arm B around the probe site. Arm A carries a
/// marker `mA`.
pub(crate) fn mzi(ratio: f64, tune_pi: bool, device: DeviceSpot) -> Circuit<f64> {
    let mut b = CircuitBuilder::<f64>::new("IN");
    b.probe("IN", "IN").unwrap();
    b.split("BS1", "IN", ("A", "B"), ratio).unwrap();
    b.probe("A", "A").unwrap();
    b.marker("A", "mA").unwrap();
    if device == DeviceSpot::BeforeProbe {
        b.pi_device("B").unwrap();
    }
    b.probe("B", "B").unwrap();
    if device == DeviceSpot::AfterProbe {
        b.pi_device("B").unwrap();
    }
    if tune_pi {
        b.phase("B", std::f64::consts::PI).unwrap();
    }
    b.merge("BS2", ("A", "B"), ("OUT", "D"), ratio).unwrap();
    b.probe("OUT", "OUT").unwrap();
    b.detect("OUT").unwrap();
    b.build().unwrap()
}

pub(crate) fn balanced_mzi() -> Circuit<f64> {
    mzi(0.5, false, DeviceSpot::None)
}

/// Nested layout: an outer 1/3 splitter peels off arm C, the rest enters
/// a balanced inner loop (arms A and B) tuned so its recombined port F
/// goes dark, and a final 1/3 recombiner merges C with F towards the
/// detector. Arm E (the inner loop's feed) carries a marker `mE`.
///
/// With `device_in_b` the sign-flip device sits on arm B upstream of the
/// probe site; `block_e` drops a block right after the probe on E.
pub(crate) fn nested(device_in_b: bool, block_e: bool) -> Circuit<f64> {
    let mut b = CircuitBuilder::<f64>::new("IN");
    b.probe("IN", "IN").unwrap();
    b.split("BS1", "IN", ("C", "E"), 1.0 / 3.0).unwrap();
    b.probe("C", "C").unwrap();
    b.probe("E", "E").unwrap();
    b.marker("E", "mE").unwrap();
    if block_e {
        b.block("E").unwrap();
    }
    b.split("BS2", "E", ("A", "B"), 0.5).unwrap();
    b.probe("A", "A").unwrap();
    if device_in_b {
        b.pi_device("B").unwrap();
    }
    b.probe("B", "B").unwrap();
    b.phase("B", std::f64::consts::PI).unwrap();
    b.merge("BS3", ("A", "B"), ("F", "G"), 0.5).unwrap();
    b.probe("F", "F").unwrap();
    b.merge("BS4", ("C", "F"), ("OUT", "H"), 1.0 / 3.0).unwrap();
    b.probe("OUT", "OUT").unwrap();
    b.detect("OUT").unwrap();
    b.build().unwrap()
}

/// Like [`nested`] but with the sign-flip device on arm E instead of B.
pub(crate) fn nested_device_in_e() -> Circuit<f64> {
    let mut b = CircuitBuilder::<f64>::new("IN");
    b.probe("IN", "IN").unwrap();
    b.split("BS1", "IN", ("C", "E"), 1.0 / 3.0).unwrap();
    b.probe("C", "C").unwrap();
    b.probe("E", "E").unwrap();
    b.pi_device("E").unwrap();
    b.split("BS2", "E", ("A", "B"), 0.5).unwrap();
    b.probe("A", "A").unwrap();
    b.probe("B", "B").unwrap();
    b.phase("B", std::f64::consts::PI).unwrap();
    b.merge("BS3", ("A", "B"), ("F", "G"), 0.5).unwrap();
    b.probe("F", "F").unwrap();
    b.merge("BS4", ("C", "F"), ("OUT", "H"), 1.0 / 3.0).unwrap();
    b.probe("OUT", "OUT").unwrap();
    b.detect("OUT").unwrap();
    b.build().unwrap()
}
