//! Shared machinery for the integration suites: a seeded random circuit
//! generator, an independent dense reference propagator, and a small
//! pass/fail reporter.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use whichpath::circuit::{Circuit, CircuitBuilder, Cut, Element, Stage};
use whichpath::{PathLabel, Scenario, SiteId};

/// One step of a replayable circuit description.  Keeping the recipe
/// separate from the built [`Circuit`] lets a single random draw be
/// materialized several ways (with or without devices, with different
/// detect ports).
pub enum Op {
    Probe(String, String),
    Marker(String, String),
    Phase(String, f64),
    Mirror(String),
    Device(String),
    Split {
        name: String,
        input: String,
        outputs: (String, String),
        ratio: f64,
    },
    Merge {
        name: String,
        inputs: (String, String),
        outputs: (String, String),
        ratio: f64,
    },
    /// Record a full time slice at this point.
    Cut,
}

pub struct Program {
    pub ops: Vec<Op>,
    pub live_at_end: Vec<String>,
}

/// Draws a random interferometer recipe: at most six concurrent paths,
/// splitter ratios away from the degenerate endpoints, a probe on the
/// source plus a sprinkling of probes, markers, phases, mirrors and
/// sign-flip devices, and at least one full cut.
pub fn random_program(rng: &mut ChaCha8Rng) -> Program {
    let mut ops = vec![Op::Probe("P0".into(), "s0".into())];
    let mut live: Vec<String> = vec!["P0".into()];
    let mut next_path = 1usize;
    let mut next_site = 1usize;
    let mut next_marker = 0usize;
    let mut next_bs = 0usize;
    let max_live = rng.gen_range(2..=6);
    let steps = rng.gen_range(5..=14);

    for _ in 0..steps {
        match rng.gen_range(0..12u8) {
            0..=3 if live.len() < max_live => {
                let input = live.swap_remove(rng.gen_range(0..live.len()));
                let a = format!("P{next_path}");
                let b = format!("P{}", next_path + 1);
                next_path += 2;
                ops.push(Op::Split {
                    name: format!("BS{next_bs}"),
                    input,
                    outputs: (a.clone(), b.clone()),
                    ratio: rng.gen_range(0.15..0.85),
                });
                next_bs += 1;
                live.push(a);
                live.push(b);
            }
            4 if live.len() >= 2 => {
                let u = live.swap_remove(rng.gen_range(0..live.len()));
                let v = live.swap_remove(rng.gen_range(0..live.len()));
                let a = format!("P{next_path}");
                let b = format!("P{}", next_path + 1);
                next_path += 2;
                ops.push(Op::Merge {
                    name: format!("BS{next_bs}"),
                    inputs: (u, v),
                    outputs: (a.clone(), b.clone()),
                    ratio: rng.gen_range(0.15..0.85),
                });
                next_bs += 1;
                live.push(a);
                live.push(b);
            }
            5..=6 => {
                let path = live[rng.gen_range(0..live.len())].clone();
                ops.push(Op::Probe(path, format!("s{next_site}")));
                next_site += 1;
            }
            7 => {
                let path = live[rng.gen_range(0..live.len())].clone();
                ops.push(Op::Phase(path, rng.gen_range(-3.1..3.1)));
            }
            8 => {
                let path = live[rng.gen_range(0..live.len())].clone();
                ops.push(Op::Mirror(path));
            }
            9 => {
                let path = live[rng.gen_range(0..live.len())].clone();
                ops.push(Op::Marker(path, format!("m{next_marker}")));
                next_marker += 1;
            }
            10 => {
                let path = live[rng.gen_range(0..live.len())].clone();
                ops.push(Op::Device(path));
            }
            _ => ops.push(Op::Cut),
        }
    }
    ops.push(Op::Cut);
    Program {
        ops,
        live_at_end: live,
    }
}

/// Replays a recipe into a circuit.  Sign-flip devices are skipped when
/// `include_devices` is false, which leaves an otherwise identical
/// geometry for invisibility comparisons.
pub fn materialize(p: &Program, detect: &str, include_devices: bool) -> (Circuit<f64>, Vec<Cut>) {
    let mut b = CircuitBuilder::<f64>::new("P0");
    let mut cuts = Vec::new();
    for op in &p.ops {
        match op {
            Op::Probe(path, site) => {
                b.probe(path.as_str(), site.as_str()).unwrap();
            }
            Op::Marker(path, id) => {
                b.marker(path.as_str(), id.as_str()).unwrap();
            }
            Op::Phase(path, angle) => {
                b.phase(path.as_str(), *angle).unwrap();
            }
            Op::Mirror(path) => {
                b.mirror(path.as_str()).unwrap();
            }
            Op::Device(path) => {
                if include_devices {
                    b.pi_device(path.as_str()).unwrap();
                }
            }
            Op::Split {
                name,
                input,
                outputs,
                ratio,
            } => {
                b.split(
                    name.as_str(),
                    input.as_str(),
                    (outputs.0.as_str(), outputs.1.as_str()),
                    *ratio,
                )
                .unwrap();
            }
            Op::Merge {
                name,
                inputs,
                outputs,
                ratio,
            } => {
                b.merge(
                    name.as_str(),
                    (inputs.0.as_str(), inputs.1.as_str()),
                    (outputs.0.as_str(), outputs.1.as_str()),
                    *ratio,
                )
                .unwrap();
            }
            Op::Cut => cuts.push(Cut {
                labels: b.live_labels().clone(),
                stage: b.stage_count(),
            }),
        }
    }
    b.detect(detect).unwrap();
    (b.build().unwrap(), cuts)
}

/// Picks the final label carrying the most undisturbed amplitude.  With
/// at most six concurrent paths this bounds the postselection overlap
/// from below, keeping every presence signal well conditioned.
pub fn pick_detect(p: &Program) -> String {
    let (c, _) = materialize(p, &p.live_at_end[0], false);
    let fwd = c.forward_amplitudes();
    let end = c.stages().len();
    p.live_at_end
        .iter()
        .max_by(|a, b| {
            let na = fwd.at(end, &PathLabel::from(a.as_str())).norm();
            let nb = fwd.at(end, &PathLabel::from(b.as_str())).norm();
            na.partial_cmp(&nb).unwrap()
        })
        .unwrap()
        .clone()
}

/// A random device-free circuit with its recorded full cuts, detect port
/// chosen for a healthy postselection overlap.
pub fn random_device_free(rng: &mut ChaCha8Rng) -> (Circuit<f64>, Vec<Cut>) {
    let p = random_program(rng);
    let detect = pick_detect(&p);
    materialize(&p, &detect, false)
}

/// A random scenario (circuit, cuts, a few expectations) for round-trip
/// checks; devices are kept so the textual form covers every element.
pub fn random_scenario(rng: &mut ChaCha8Rng, index: usize) -> Scenario {
    let p = random_program(rng);
    let detect = pick_detect(&p);
    let (circuit, cuts) = materialize(&p, &detect, true);
    let mut expected = std::collections::BTreeMap::new();
    for rec in circuit.sites() {
        if rng.gen_bool(0.5) {
            let re = rng.gen_range(-2.0..2.0);
            let im = if rng.gen_bool(0.3) {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            };
            expected.insert(rec.id.clone(), Complex64::new(re, im));
        }
    }
    Scenario {
        name: format!("rand{index}"),
        circuit,
        cuts,
        expected,
    }
}

/// Detect-port pointer components `(phi, phi_perp)` from a dense
/// reference propagation written independently of the library's walk:
/// the state lives in one flat vector indexed by `path * dim + level`.
/// Assumes each label is produced once, which holds for every preset and
/// for [`random_program`] output.
pub fn dense_detect_components(
    c: &Circuit<f64>,
    active: Option<(&SiteId, f64)>,
) -> (Complex64, Complex64) {
    let mut labels: Vec<PathLabel> = vec![c.source().clone()];
    for s in c.stages() {
        if let Stage::Splitter(sp) = s {
            for l in [&sp.output_u, &sp.output_v] {
                if !labels.contains(l) {
                    labels.push(l.clone());
                }
            }
        }
    }
    let dim = c.ancilla_dim();
    let index_of = |l: &PathLabel| labels.iter().position(|x| x == l).unwrap();
    let zero = Complex64::new(0.0, 0.0);
    let mut amp = vec![zero; labels.len() * dim];
    amp[index_of(c.source()) * dim] = Complex64::new(1.0, 0.0);

    for stage in c.stages() {
        match stage {
            Stage::Element { path, element } => {
                let base = index_of(path) * dim;
                match element {
                    Element::Probe(id) => {
                        if let Some((active_id, eps)) = active {
                            if id == active_id {
                                let (c0, c1) = (amp[base], amp[base + 1]);
                                let (ce, se) = (eps.cos(), eps.sin());
                                amp[base] = c0 * ce - c1 * se;
                                amp[base + 1] = c0 * se + c1 * ce;
                            }
                        }
                    }
                    Element::PiDevice => amp[base + 1] = -amp[base + 1],
                    Element::Block => {
                        for k in 0..dim {
                            amp[base + k] = zero;
                        }
                    }
                    Element::Phase(angle) => {
                        let ph = Complex64::from_polar(1.0, *angle);
                        for k in 0..dim {
                            amp[base + k] *= ph;
                        }
                    }
                    Element::Marker(_) | Element::Mirror => {}
                }
            }
            Stage::Splitter(sp) => {
                let r = sp.ratio.sqrt();
                let t = (1.0 - sp.ratio).sqrt();
                let ui = index_of(&sp.input_u) * dim;
                let vi = sp.input_v.as_ref().map(|l| index_of(l) * dim);
                let ou = index_of(&sp.output_u) * dim;
                let ov = index_of(&sp.output_v) * dim;
                for k in 0..dim {
                    let u = amp[ui + k];
                    let v = vi.map_or(zero, |i| amp[i + k]);
                    amp[ui + k] = zero;
                    if let Some(i) = vi {
                        amp[i + k] = zero;
                    }
                    amp[ou + k] = r * u + t * v;
                    amp[ov + k] = t * u - r * v;
                }
            }
        }
    }
    let det = index_of(c.detect()) * dim;
    (amp[det], amp[det + 1])
}

/// Independent presence estimate: central difference of the excited
/// detect component over the probe strength, sharpened one Richardson
/// step, normalized by the undisturbed amplitude.
pub fn dense_alpha_richardson(c: &Circuit<f64>, site: &SiteId, eps: f64) -> Complex64 {
    let base = dense_detect_components(c, None).0;
    let slope = |e: f64| {
        let plus = dense_detect_components(c, Some((site, e))).1;
        let minus = dense_detect_components(c, Some((site, -e))).1;
        (plus - minus) / (2.0 * e) / base
    };
    (slope(eps / 2.0) * 4.0 - slope(eps)) / 3.0
}

/// Collects named checks for one acceptance criterion and prints a
/// single pass/fail line when finished.
pub struct Criterion {
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    pub fn new(name: &'static str) -> Self {
        Criterion {
            name,
            failures: Vec::new(),
        }
    }

    pub fn check(&mut self, what: &str, ok: bool) {
        if !ok {
            self.failures.push(what.to_owned());
        }
    }

    pub fn check_close(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let d = (got - want).abs();
        if d.is_nan() || d > tol {
            self.failures
                .push(format!("{what}: got {got}, want {want} within {tol}"));
        }
    }

    pub fn check_close_c(&mut self, what: &str, got: Complex64, want: Complex64, tol: f64) {
        let d = (got - want).norm();
        if d.is_nan() || d > tol {
            self.failures
                .push(format!("{what}: got {got}, want {want} within {tol}"));
        }
    }

    pub fn finish(self) {
        if self.failures.is_empty() {
            println!("{}: pass", self.name);
        } else {
            println!("{}: FAIL — {}", self.name, self.failures[0]);
            panic!("{}: {}", self.name, self.failures.join("; "));
        }
    }
}
