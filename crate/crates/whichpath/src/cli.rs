//! Command-line front end: run scenarios, sweep probe strengths, check
//! the shipped tables, and list presets.
//!
//! All commands write UTF-8 to the supplied writers and return a process
//! exit code:
//!
//! - `0` success
//! - `1` a `verify` check failed
//! - `2` the input could not be loaded (unknown preset, unreadable file,
//!   parse errors, bad flags)
//! - `3` the postselection is divergent, i.e. no undisturbed amplitude
//!   reaches the detector under the requested conditioning; the report
//!   is still printed with every row flagged divergent
//!
//! `tsv` and `json` output is byte-deterministic: values are rounded to
//! 12 significant digits before formatting. Human tables round to 6
//! significant digits and print values below 1e-9 as 0.

use std::io::Write;
use std::path::Path;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::circuit::{Circuit, Element, Stage};
use crate::presence::{
    alpha_analytic, alpha_finite_difference, full_report, postselection_divergent,
    weak_value_oracle, AlphaMode, PresenceEntry, DEFAULT_EPSILON,
};
use crate::presets::{build_preset, list_presets, verify_scenario, VERIFY_TOL};
use crate::scenariodsl::{parse_with_diagnostics, Scenario};
use crate::{MarkerId, SiteId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_DIVERGENT_POSTSELECTION: i32 = 3;

macro_rules! outln {
    ($dst:expr, $($arg:tt)*) => {
        let _ = writeln!($dst, $($arg)*);
    };
}

#[derive(Debug, Parser)]
#[command(
    name = "whichpath",
    version,
    about = "Presence-signal analysis for multi-path interferometers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute every probe's presence signal and compare it to the
    /// weak-value oracle
    Run {
        /// Preset name or path to a scenario file
        input: String,
        /// How the observed signal is computed
        #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
        mode: ModeArg,
        /// Probe strength for finite-difference mode
        #[arg(long, default_value_t = DEFAULT_EPSILON, allow_negative_numbers = true)]
        epsilon: f64,
        /// Report only this probe site
        #[arg(long)]
        probe: Option<String>,
        /// Condition on a marker having seen the particle
        #[arg(long)]
        condition: Option<String>,
        #[arg(long, value_enum, default_value_t = FormatArg::Table)]
        format: FormatArg,
        /// Print only signal magnitudes, hiding sign and phase
        #[arg(long)]
        magnitude: bool,
    },
    /// Tabulate the finite-difference signal of one probe over a list of
    /// probe strengths
    Sweep {
        /// Preset name or path to a scenario file
        input: String,
        /// Probe site to sweep
        #[arg(long)]
        probe: String,
        /// Comma-separated probe strengths
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            default_values_t = vec![1e-2, 1e-3, 1e-4, 1e-5]
        )]
        epsilons: Vec<f64>,
        /// Condition on a marker having seen the particle
        #[arg(long)]
        condition: Option<String>,
    },
    /// Check every preset against its stored table and run the
    /// cross-checks
    Verify,
    /// List the built-in scenarios
    Presets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Analytic,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Tsv,
    Json,
}

/// Everything `run` needs; mirrors the `run` subcommand's flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: String,
    pub mode: AlphaMode,
    pub epsilon: f64,
    /// `None` reports every probe site.
    pub probe: Option<String>,
    pub condition: Option<String>,
    pub format: OutputFormat,
    pub magnitude_only: bool,
}

/// Routes a parsed command line to its implementation.
pub fn dispatch(cli: Cli, out: &mut impl Write, err: &mut impl Write) -> i32 {
    match cli.command {
        Command::Run {
            input,
            mode,
            epsilon,
            probe,
            condition,
            format,
            magnitude,
        } => cmd_run(
            RunConfig {
                input,
                mode: match mode {
                    ModeArg::Analytic => AlphaMode::Analytic,
                    ModeArg::Fd => AlphaMode::FiniteDifference,
                },
                epsilon,
                probe,
                condition,
                format: match format {
                    FormatArg::Table => OutputFormat::Table,
                    FormatArg::Tsv => OutputFormat::Tsv,
                    FormatArg::Json => OutputFormat::Json,
                },
                magnitude_only: magnitude,
            },
            out,
            err,
        ),
        Command::Sweep {
            input,
            probe,
            epsilons,
            condition,
        } => cmd_sweep(&input, &probe, &epsilons, condition.as_deref(), out, err),
        Command::Verify => cmd_verify(out),
        Command::Presets => cmd_presets(out),
    }
}

/// Resolves `input` as a preset name first, then as a file path.
fn load_scenario(input: &str, err: &mut impl Write) -> Result<Scenario, i32> {
    if let Some(s) = build_preset(input) {
        return Ok(s);
    }
    if !Path::new(input).exists() {
        outln!(
            err,
            "error: '{input}' is neither a preset nor an existing file"
        );
        outln!(
            err,
            "hint: 'whichpath presets' lists the built-in scenarios"
        );
        return Err(EXIT_BAD_INPUT);
    }
    let text = match std::fs::read_to_string(input) {
        Ok(t) => t,
        Err(e) => {
            outln!(err, "error: cannot read '{input}': {e}");
            return Err(EXIT_BAD_INPUT);
        }
    };
    let (scenario, diags) = parse_with_diagnostics(&text);
    for d in &diags {
        outln!(err, "{input}: {d}");
    }
    match scenario {
        Some(s) => Ok(s),
        None => Err(EXIT_BAD_INPUT),
    }
}

fn resolve_condition(
    circuit: &Circuit<f64>,
    name: Option<&str>,
    err: &mut impl Write,
) -> Result<Option<MarkerId>, i32> {
    match name {
        None => Ok(None),
        Some(n) => {
            let id = MarkerId::from(n);
            if circuit.marker(&id).is_none() {
                outln!(err, "error: unknown marker '{n}'");
                return Err(EXIT_BAD_INPUT);
            }
            Ok(Some(id))
        }
    }
}

/// A usable probe strength: finite and strictly positive.
fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Rounds to `digits` significant figures so shortest-decimal printing
/// is stable across runs and platforms.
fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - magnitude);
    if !factor.is_finite() || factor == 0.0 {
        return x;
    }
    (x * factor).round() / factor
}

/// Machine formatting: 12 significant figures, shortest decimal.
fn fmt_machine(x: f64) -> String {
    format!("{}", round_sig(x, 12))
}

/// Table formatting: 6 significant figures; numerical dust prints as 0.
fn fmt_table(x: f64) -> String {
    let r = round_sig(x, 6);
    if r.abs() < 1e-9 {
        "0".to_owned()
    } else {
        format!("{r}")
    }
}

fn opt_machine(x: Option<f64>) -> String {
    x.map(fmt_machine).unwrap_or_default()
}

fn opt_table(x: Option<f64>) -> String {
    x.map(fmt_table).unwrap_or_else(|| "-".to_owned())
}

struct Row {
    site: String,
    alpha: Option<Complex64>,
    alpha_abs: Option<f64>,
    oracle: Option<Complex64>,
    lying: bool,
    divergent: bool,
}

impl Row {
    fn from_entry(e: &PresenceEntry<f64>) -> Self {
        Row {
            site: e.site.as_str().to_owned(),
            alpha: e.observed.value(),
            alpha_abs: e.magnitude,
            oracle: e.oracle.finite(),
            lying: e.lying,
            divergent: e.divergent,
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    scenario: &'a str,
    mode: &'a str,
    epsilon: f64,
    rows: Vec<JsonRow>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum JsonRow {
    Full {
        site: String,
        alpha_re: Option<f64>,
        alpha_im: Option<f64>,
        alpha_abs: Option<f64>,
        oracle_re: Option<f64>,
        oracle_im: Option<f64>,
        lying: bool,
        divergent: bool,
    },
    Magnitude {
        site: String,
        alpha_abs: Option<f64>,
        oracle_abs: Option<f64>,
        lying: bool,
        divergent: bool,
    },
}

fn mode_name(mode: AlphaMode) -> &'static str {
    match mode {
        AlphaMode::Analytic => "analytic",
        AlphaMode::FiniteDifference => "fd",
    }
}

pub fn cmd_run(config: RunConfig, out: &mut impl Write, err: &mut impl Write) -> i32 {
    let scenario = match load_scenario(&config.input, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if config.mode == AlphaMode::FiniteDifference && !positive(config.epsilon) {
        outln!(
            err,
            "error: --epsilon must be positive, got {}",
            config.epsilon
        );
        return EXIT_BAD_INPUT;
    }
    let condition = match resolve_condition(&scenario.circuit, config.condition.as_deref(), err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = match full_report(
        &scenario.circuit,
        config.mode,
        config.epsilon,
        None,
        condition.as_ref(),
    ) {
        Ok(r) => r,
        Err(e) => {
            outln!(err, "error: {e}");
            return EXIT_BAD_INPUT;
        }
    };

    let mut rows: Vec<Row> = report.entries.iter().map(Row::from_entry).collect();
    if let Some(site) = &config.probe {
        rows.retain(|r| &r.site == site);
        if rows.is_empty() {
            outln!(err, "error: unknown probe site '{site}'");
            return EXIT_BAD_INPUT;
        }
    }

    match config.format {
        OutputFormat::Table => {
            let suffix = match config.mode {
                AlphaMode::Analytic => String::new(),
                AlphaMode::FiniteDifference => format!(", epsilon={}", fmt_machine(config.epsilon)),
            };
            outln!(
                out,
                "scenario {} ({}{})",
                scenario.name,
                mode_name(config.mode),
                suffix
            );
            if config.magnitude_only {
                outln!(
                    out,
                    "{:<10} {:>12} {:>12} {:>6} {:>9}",
                    "site",
                    "|alpha|",
                    "|oracle|",
                    "lying",
                    "divergent"
                );
                for r in &rows {
                    outln!(
                        out,
                        "{:<10} {:>12} {:>12} {:>6} {:>9}",
                        r.site,
                        opt_table(r.alpha_abs),
                        opt_table(r.oracle.map(|o| o.norm())),
                        flag(r.lying),
                        flag(r.divergent)
                    );
                }
            } else {
                outln!(
                    out,
                    "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6} {:>9}",
                    "site",
                    "alpha_re",
                    "alpha_im",
                    "|alpha|",
                    "oracle_re",
                    "oracle_im",
                    "lying",
                    "divergent"
                );
                for r in &rows {
                    outln!(
                        out,
                        "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6} {:>9}",
                        r.site,
                        opt_table(r.alpha.map(|a| a.re)),
                        opt_table(r.alpha.map(|a| a.im)),
                        opt_table(r.alpha_abs),
                        opt_table(r.oracle.map(|o| o.re)),
                        opt_table(r.oracle.map(|o| o.im)),
                        flag(r.lying),
                        flag(r.divergent)
                    );
                }
            }
        }
        OutputFormat::Tsv => {
            if config.magnitude_only {
                outln!(out, "site\talpha_abs\toracle_abs\tlying\tdivergent");
                for r in &rows {
                    outln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}",
                        r.site,
                        opt_machine(r.alpha_abs),
                        opt_machine(r.oracle.map(|o| o.norm())),
                        r.lying,
                        r.divergent
                    );
                }
            } else {
                outln!(
                    out,
                    "site\talpha_re\talpha_im\talpha_abs\toracle_re\toracle_im\tlying\tdivergent"
                );
                for r in &rows {
                    outln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        r.site,
                        opt_machine(r.alpha.map(|a| a.re)),
                        opt_machine(r.alpha.map(|a| a.im)),
                        opt_machine(r.alpha_abs),
                        opt_machine(r.oracle.map(|o| o.re)),
                        opt_machine(r.oracle.map(|o| o.im)),
                        r.lying,
                        r.divergent
                    );
                }
            }
        }
        OutputFormat::Json => {
            let json_rows: Vec<JsonRow> = rows
                .iter()
                .map(|r| {
                    if config.magnitude_only {
                        JsonRow::Magnitude {
                            site: r.site.clone(),
                            alpha_abs: r.alpha_abs.map(|v| round_sig(v, 12)),
                            oracle_abs: r.oracle.map(|o| round_sig(o.norm(), 12)),
                            lying: r.lying,
                            divergent: r.divergent,
                        }
                    } else {
                        JsonRow::Full {
                            site: r.site.clone(),
                            alpha_re: r.alpha.map(|a| round_sig(a.re, 12)),
                            alpha_im: r.alpha.map(|a| round_sig(a.im, 12)),
                            alpha_abs: r.alpha_abs.map(|v| round_sig(v, 12)),
                            oracle_re: r.oracle.map(|o| round_sig(o.re, 12)),
                            oracle_im: r.oracle.map(|o| round_sig(o.im, 12)),
                            lying: r.lying,
                            divergent: r.divergent,
                        }
                    }
                })
                .collect();
            let doc = JsonReport {
                scenario: &scenario.name,
                mode: mode_name(config.mode),
                epsilon: report.epsilon_used,
                rows: json_rows,
            };
            let rendered = serde_json::to_string_pretty(&doc).expect("report serializes");
            outln!(out, "{rendered}");
        }
    }

    match postselection_divergent(&scenario.circuit, condition.as_ref()) {
        Ok(true) => EXIT_DIVERGENT_POSTSELECTION,
        Ok(false) => EXIT_OK,
        Err(e) => {
            outln!(err, "error: {e}");
            EXIT_BAD_INPUT
        }
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn cmd_sweep(
    input: &str,
    probe: &str,
    epsilons: &[f64],
    condition: Option<&str>,
    out: &mut impl Write,
    err: &mut impl Write,
) -> i32 {
    let scenario = match load_scenario(input, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let site = SiteId::from(probe);
    if scenario.circuit.site(&site).is_none() {
        outln!(err, "error: unknown probe site '{probe}'");
        return EXIT_BAD_INPUT;
    }
    if epsilons.is_empty() {
        outln!(err, "error: no probe strengths given");
        return EXIT_BAD_INPUT;
    }
    if let Some(bad) = epsilons.iter().find(|e| !positive(**e)) {
        outln!(err, "error: probe strengths must be positive, got {bad}");
        return EXIT_BAD_INPUT;
    }
    let condition = match resolve_condition(&scenario.circuit, condition, err) {
        Ok(c) => c,
        Err(code) => return code,
    };

    outln!(out, "epsilon\talpha_re\talpha_im\talpha_abs\tdivergent");
    for &eps in epsilons {
        let alpha = match alpha_finite_difference(&scenario.circuit, &site, eps, condition.as_ref())
        {
            Ok(a) => a,
            Err(e) => {
                outln!(err, "error: {e}");
                return EXIT_BAD_INPUT;
            }
        };
        let value = alpha.value();
        outln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            fmt_machine(eps),
            opt_machine(value.map(|v| v.re)),
            opt_machine(value.map(|v| v.im)),
            opt_machine(alpha.magnitude()),
            alpha.is_divergent()
        );
    }
    EXIT_OK
}

/// One verify line; `detail` holds the first failing comparison when not
/// passing.
fn report_check(out: &mut impl Write, ok: &mut bool, name: &str, result: Result<String, String>) {
    match result {
        Ok(detail) => {
            outln!(out, "PASS {name}: {detail}");
        }
        Err(detail) => {
            outln!(out, "FAIL {name}: {detail}");
            *ok = false;
        }
    }
}

fn has_pi_device(circuit: &Circuit<f64>) -> bool {
    circuit.stages().iter().any(|s| {
        matches!(
            s,
            Stage::Element {
                element: Element::PiDevice,
                ..
            }
        )
    })
}

pub fn cmd_verify(out: &mut impl Write) -> i32 {
    let mut ok = true;

    for p in list_presets() {
        let scenario = match build_preset(p.name) {
            Some(s) => s,
            None => unreachable!("listed preset builds"),
        };
        let result = match verify_scenario(&scenario) {
            Ok(failures) if failures.is_empty() => Ok(format!(
                "{} signals, {} cuts",
                scenario.expected.len(),
                scenario.cuts.len()
            )),
            Ok(failures) => Err(failures[0].to_string()),
            Err(e) => Err(e.to_string()),
        };
        report_check(out, &mut ok, p.name, result);
    }

    // The sign-flip device must not move the oracle: fig3b's oracle
    // column has to reproduce fig3a's stored table.
    {
        let plain = build_preset("fig3a").expect("shipped preset");
        let device = build_preset("fig3b").expect("shipped preset");
        let mut result = Ok("oracle unchanged by the device".to_owned());
        for (site, want) in &plain.expected {
            let got = weak_value_oracle(&device.circuit, site)
                .ok()
                .and_then(|a| a.finite());
            match got {
                Some(v) if (v - want).norm() <= 1e-12 => {}
                Some(v) => {
                    result = Err(format!("site {site}: fig3b oracle {v}, fig3a table {want}"));
                    break;
                }
                None => {
                    result = Err(format!("site {site}: fig3b oracle not finite"));
                    break;
                }
            }
        }
        report_check(out, &mut ok, "oracle equality fig3a/fig3b", result);
    }

    // Without a device, the detected signal must equal the oracle.
    {
        let mut checked = 0usize;
        let mut result: Result<String, String> = Ok(String::new());
        'outer: for p in list_presets() {
            let scenario = build_preset(p.name).expect("shipped preset");
            if has_pi_device(&scenario.circuit) {
                continue;
            }
            for rec in scenario.circuit.sites() {
                let a = alpha_analytic(&scenario.circuit, &rec.id, None)
                    .ok()
                    .and_then(|a| a.finite());
                let w = weak_value_oracle(&scenario.circuit, &rec.id)
                    .ok()
                    .and_then(|a| a.finite());
                match (a, w) {
                    (Some(a), Some(w)) if (a - w).norm() <= 1e-10 => checked += 1,
                    _ => {
                        result = Err(format!(
                            "{} site {}: analytic {a:?} vs oracle {w:?}",
                            p.name, rec.id
                        ));
                        break 'outer;
                    }
                }
            }
        }
        if result.is_ok() {
            result = Ok(format!("{checked} sites across device-free presets"));
        }
        report_check(out, &mut ok, "oracle equivalence", result);
    }

    // Finite differences must converge at second order.
    {
        let scenario = build_preset("fig2b").expect("shipped preset");
        let site = SiteId::from("A");
        let exact = alpha_analytic(&scenario.circuit, &site, None)
            .ok()
            .and_then(|a| a.finite());
        let result = match exact {
            Some(exact) => {
                let mut errs = Vec::new();
                for eps in [1e-2, 1e-3, 1e-4] {
                    let fd = alpha_finite_difference(&scenario.circuit, &site, eps, None)
                        .ok()
                        .and_then(|a| a.finite());
                    match fd {
                        Some(fd) => errs.push((fd - exact).norm()),
                        None => errs.push(f64::NAN),
                    }
                }
                let order = (errs[0] / errs[2]).log10() / 2.0;
                if order >= 1.9 {
                    Ok(format!("order {:.2} over three decades", order))
                } else {
                    Err(format!("order {order:.2} < 1.9; errors {errs:?}"))
                }
            }
            None => Err("analytic reference is not finite".to_owned()),
        };
        report_check(out, &mut ok, "fd convergence fig2b/A", result);
    }

    // The verify tolerance itself, for the record.
    outln!(out, "tolerance {VERIFY_TOL:e}");

    if ok {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

pub fn cmd_presets(out: &mut impl Write) -> i32 {
    for p in list_presets() {
        outln!(out, "{:<16} {}", p.name, p.description);
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_string(config: RunConfig) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = cmd_run(config, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    fn table_config(input: &str) -> RunConfig {
        RunConfig {
            input: input.to_owned(),
            mode: AlphaMode::Analytic,
            epsilon: DEFAULT_EPSILON,
            probe: None,
            condition: None,
            format: OutputFormat::Table,
            magnitude_only: false,
        }
    }

    #[test]
    fn rounding_to_significant_figures() {
        assert_eq!(round_sig(0.123456789, 6), 0.123457);
        assert_eq!(round_sig(123456.789, 6), 123457.0);
        assert_eq!(round_sig(-0.0001234564, 6), -0.000123456);
        assert_eq!(round_sig(0.0, 12), 0.0);
        assert_eq!(round_sig(1.0 + 1e-14, 12), 1.0);
        assert_eq!(fmt_machine(0.1 + 0.2), "0.3");
        assert_eq!(fmt_table(1.2e-16), "0");
    }

    #[test]
    fn run_table_shows_the_nested_loop_rows() {
        let (code, out, err) = run_to_string(table_config("fig3a"));
        assert_eq!(code, EXIT_OK, "stderr: {err}");
        assert!(out.starts_with("scenario fig3a (analytic)\n"));
        let b_row: Vec<&str> = out
            .lines()
            .find(|l| l.starts_with("B "))
            .expect("row for B")
            .split_whitespace()
            .collect();
        assert_eq!(b_row[1], "-1", "alpha_re column: {b_row:?}");
        assert_eq!(b_row[6], "no", "B does not lie: {b_row:?}");
    }

    #[test]
    fn run_single_probe_row_for_the_faked_absence() {
        let mut config = table_config("fig2a_pi");
        config.probe = Some("IN".to_owned());
        let (code, out, _) = run_to_string(config);
        assert_eq!(code, EXIT_OK);
        let rows: Vec<&str> = out.lines().skip(2).collect();
        assert_eq!(rows.len(), 1);
        let cells: Vec<&str> = rows[0].split_whitespace().collect();
        assert_eq!(cells[0], "IN");
        assert_eq!(cells[1], "0");
        assert_eq!(cells[6], "yes");
    }

    #[test]
    fn unknown_input_and_unknown_probe_exit_2() {
        let (code, _, err) = run_to_string(table_config("no_such_scenario"));
        assert_eq!(code, EXIT_BAD_INPUT);
        assert!(err.contains("neither a preset nor an existing file"));

        let mut config = table_config("fig2a");
        config.probe = Some("Q".to_owned());
        let (code, _, err) = run_to_string(config);
        assert_eq!(code, EXIT_BAD_INPUT);
        assert!(err.contains("unknown probe site"));

        let mut config = table_config("fig2a");
        config.condition = Some("mZ".to_owned());
        let (code, _, err) = run_to_string(config);
        assert_eq!(code, EXIT_BAD_INPUT);
        assert!(err.contains("unknown marker"));

        let mut config = table_config("fig2a");
        config.mode = AlphaMode::FiniteDifference;
        config.epsilon = 0.0;
        let (code, _, err) = run_to_string(config);
        assert_eq!(code, EXIT_BAD_INPUT);
        assert!(err.contains("--epsilon"));
    }

    #[test]
    fn conditioned_dark_postselection_exits_3_but_prints() {
        let mut config = table_config("fig3b");
        config.condition = Some("mE".to_owned());
        let (code, out, _) = run_to_string(config);
        assert_eq!(code, EXIT_DIVERGENT_POSTSELECTION);
        let e_row = out.lines().find(|l| l.starts_with("E ")).unwrap();
        assert!(e_row.ends_with("yes"), "E divergent: {e_row}");
    }

    #[test]
    fn machine_formats_are_byte_deterministic() {
        for format in [OutputFormat::Tsv, OutputFormat::Json] {
            let mut config = table_config("fig3b");
            config.format = format;
            let (c1, a, _) = run_to_string(config.clone());
            let (c2, b, _) = run_to_string(config);
            assert_eq!(c1, EXIT_OK);
            assert_eq!(c1, c2);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn json_schema_has_the_frozen_fields() {
        let mut config = table_config("fig2a");
        config.format = OutputFormat::Json;
        let (_, out, _) = run_to_string(config);
        let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(doc["scenario"], "fig2a");
        assert_eq!(doc["mode"], "analytic");
        assert_eq!(doc["epsilon"], 0.0);
        let rows = doc["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 4);
        let first = &rows[0];
        for key in [
            "site",
            "alpha_re",
            "alpha_im",
            "alpha_abs",
            "oracle_re",
            "oracle_im",
            "lying",
            "divergent",
        ] {
            assert!(first.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(first["site"], "IN");
        assert_eq!(first["alpha_re"], 1.0);
        assert_eq!(first["lying"], false);
    }

    #[test]
    fn magnitude_mode_hides_signs_and_matches_the_arms() {
        let mut config = table_config("fig3a");
        config.magnitude_only = true;
        config.format = OutputFormat::Tsv;
        let (code, out, _) = run_to_string(config);
        assert_eq!(code, EXIT_OK);
        let mut lines = out.lines();
        assert_eq!(
            lines.next().unwrap(),
            "site\talpha_abs\toracle_abs\tlying\tdivergent"
        );
        let cell = |line: &str, k: usize| line.split('\t').nth(k).unwrap().to_owned();
        let a = out
            .lines()
            .find(|l| l.starts_with("A\t"))
            .unwrap()
            .to_owned();
        let b = out
            .lines()
            .find(|l| l.starts_with("B\t"))
            .unwrap()
            .to_owned();
        assert_eq!(cell(&a, 1), cell(&b, 1), "A and B read identically");
        assert_eq!(cell(&a, 1), "1");
        assert!(!out.contains('-'), "no signs anywhere in magnitude mode");
    }

    #[test]
    fn sweep_emits_one_row_per_epsilon() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = cmd_sweep("fig2b", "A", &[1e-2, 1e-3, 1e-4], None, &mut out, &mut err);
        assert_eq!(code, EXIT_OK);
        let out = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "epsilon\talpha_re\talpha_im\talpha_abs\tdivergent"
        );
        assert!(lines[1].starts_with("0.01\t"));
        for row in &lines[1..] {
            assert!(row.ends_with("false"));
            let re: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
            assert!((re - 0.9).abs() < 1e-3, "row {row}");
        }
    }

    #[test]
    fn conditioned_sweep_shows_the_inverse_epsilon_scaling() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = cmd_sweep(
            "fig3b",
            "E",
            &[1e-3, 1e-4, 1e-5],
            Some("mE"),
            &mut out,
            &mut err,
        );
        assert_eq!(code, EXIT_OK);
        let out = String::from_utf8(out).unwrap();
        let mut products = Vec::new();
        for row in out.lines().skip(1) {
            let cells: Vec<&str> = row.split('\t').collect();
            assert_eq!(cells[4], "true", "divergent flag set: {row}");
            let eps: f64 = cells[0].parse().unwrap();
            let mag: f64 = cells[3].parse().unwrap();
            products.push(eps * mag);
        }
        for p in &products {
            assert!(
                (p - 1.0).abs() < 0.01,
                "|alpha|*eps stays near 1: {products:?}"
            );
        }
    }

    #[test]
    fn sweep_rejects_bad_requests() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(
            cmd_sweep("fig2b", "Q", &[1e-3], None, &mut out, &mut err),
            EXIT_BAD_INPUT
        );
        assert_eq!(
            cmd_sweep("fig2b", "A", &[], None, &mut out, &mut err),
            EXIT_BAD_INPUT
        );
        assert_eq!(
            cmd_sweep("fig2b", "A", &[-1e-3], None, &mut out, &mut err),
            EXIT_BAD_INPUT
        );
    }

    #[test]
    fn verify_passes_on_the_shipped_presets() {
        let mut out = Vec::new();
        let code = cmd_verify(&mut out);
        let out = String::from_utf8(out).unwrap();
        assert_eq!(code, EXIT_OK, "verify output:\n{out}");
        let passes = out.lines().filter(|l| l.starts_with("PASS ")).count();
        assert!(passes >= 13, "expected at least 13 PASS lines:\n{out}");
        assert!(!out.contains("FAIL"));
        assert!(out.contains("oracle equality fig3a/fig3b"));
    }

    #[test]
    fn presets_lists_all_ten() {
        let mut out = Vec::new();
        assert_eq!(cmd_presets(&mut out), EXIT_OK);
        let out = String::from_utf8(out).unwrap();
        assert_eq!(out.lines().count(), 10);
        assert!(out.contains("fig3b"));
        assert!(out.lines().all(|l| l.starts_with("fig")));
    }

    #[test]
    fn file_inputs_are_loaded_and_bad_files_exit_2() {
        let dir = std::env::temp_dir().join("whichpath-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let good = dir.join("good.ifz");
        std::fs::write(
            &good,
            "scenario custom\npath IN { probe IN }\ndetect IN\nexpect IN = 1\n",
        )
        .unwrap();
        let (code, out, _) = run_to_string(table_config(good.to_str().unwrap()));
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("scenario custom"));

        let bad = dir.join("bad.ifz");
        std::fs::write(&bad, "scenario broken\npath IN { oops }\ndetect IN\n").unwrap();
        let (code, _, err) = run_to_string(table_config(bad.to_str().unwrap()));
        assert_eq!(code, EXIT_BAD_INPUT);
        assert!(err.contains("unknown element"));
    }
}
