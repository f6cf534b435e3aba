//! The `.ifz` scenario format: parser and canonical serializer.
//!
//! A scenario file is a sequence of statements. Whitespace, including
//! newlines, carries no meaning, and `#` starts a comment running to the
//! end of the line. The statements are:
//!
//! ```text
//! scenario NAME                              header, required first
//! ancilla N                                  pointer dimension (default 2)
//! path LABEL { ELEMENTS }                    put elements on a live path
//! on LABEL { ELEMENTS }                      append more elements later
//! split NAME IN -> REFL, TRANS ratio R       one input, reflected port first
//! merge NAME IN1, IN2 -> OUT1, OUT2 ratio R  recombine two paths
//! cut LABEL, LABEL, ...                      declare a complete time slice
//! detect LABEL                               the postselected port, required
//! expect SITE = VALUE                        reference signal for `verify`
//! ```
//!
//! `ELEMENTS` is a `;`-separated list of `probe ID`, `device pi`,
//! `block`, `marker ID`, `phase ANGLE` and `mirror`. The first `path`
//! (or the input of the first splitter) names the source port. `R`,
//! `ANGLE` and `VALUE` accept decimals and rationals such as `1/3`;
//! `ANGLE` also accepts `pi`, and `VALUE` may be complex (`0.5-0.25i`).
//! Statement keywords are reserved and cannot name paths, splitters,
//! probes or markers.
//!
//! [`serialize`] emits a canonical form: one statement per line in stage
//! order with cuts interleaved at their time slice, expectations sorted
//! and listed last, single spaces, LF line endings, and numbers printed
//! as the shortest decimal that reparses to the same value (so the float
//! closest to pi prints as `pi`). Parsing a canonical text and
//! serializing the result reproduces the text byte for byte.
//!
//! Parsing never panics. Errors are collected as [`ParseDiagnostic`]s
//! with 1-based line and column numbers, and the parser resynchronizes
//! at the next statement keyword, so one malformed statement does not
//! hide problems in the rest of the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use crate::circuit::{Circuit, CircuitBuilder, Cut, Element, Stage};
use crate::{PathLabel, SiteId};

/// How bad a [`ParseDiagnostic`] is: errors prevent a scenario from
/// being produced, warnings do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

/// A problem found while parsing, with its 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at {}:{}: {}",
            self.severity, self.line, self.column, self.message
        )
    }
}

/// A parsed scenario: the circuit plus everything the file declares
/// about it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub circuit: Circuit<f64>,
    /// Declared time slices, in stage order.
    pub cuts: Vec<Cut>,
    /// Reference presence signals keyed by probe site.
    pub expected: BTreeMap<SiteId, Complex64>,
}

/// Parses a scenario, failing if any error-severity diagnostic occurs.
///
/// Warnings are discarded here; use [`parse_with_diagnostics`] to see
/// them.
pub fn parse(text: &str) -> Result<Scenario, Vec<ParseDiagnostic>> {
    let (scenario, diags) = parse_with_diagnostics(text);
    match scenario {
        Some(s) => Ok(s),
        None => Err(diags),
    }
}

/// Parses a scenario, returning it (if error-free) together with every
/// diagnostic encountered.
pub fn parse_with_diagnostics(text: &str) -> (Option<Scenario>, Vec<ParseDiagnostic>) {
    let (tokens, lex_diags) = lex(text);
    let mut parser = Parser {
        tokens,
        pos: 0,
        diags: lex_diags,
        name: None,
        builder: None,
        pending_ancilla: None,
        cuts: Vec::new(),
        expected: BTreeMap::new(),
        expect_positions: BTreeMap::new(),
        detect_position: None,
    };
    parser.run();
    parser.finish()
}

const STATEMENT_KEYWORDS: &[&str] = &[
    "scenario", "ancilla", "path", "on", "split", "merge", "detect", "cut", "expect",
];

const RESERVED: &[&str] = &[
    "scenario", "ancilla", "path", "on", "split", "merge", "ratio", "detect", "cut", "expect",
    "probe", "device", "pi", "block", "marker", "phase", "mirror",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(f64),
    Arrow,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Eq,
    Plus,
    Minus,
    Slash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Arrow => "'->'".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::Comma => "','".into(),
            Tok::Semi => "';'".into(),
            Tok::Eq => "'='".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> (Vec<Token>, Vec<ParseDiagnostic>) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut i = 0usize;

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                column += 1;
            }
            continue;
        }

        let (start_line, start_column) = (line, column);
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            column += i - start;
            tokens.push(Token {
                tok: Tok::Word(word),
                line: start_line,
                column: start_column,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let raw: String = chars[start..i].iter().collect();
            column += i - start;
            match raw.parse::<f64>() {
                Ok(value) => tokens.push(Token {
                    tok: Tok::Number(value),
                    line: start_line,
                    column: start_column,
                }),
                Err(_) => diags.push(ParseDiagnostic {
                    line: start_line,
                    column: start_column,
                    message: format!("malformed number '{raw}'"),
                    severity: Severity::Error,
                }),
            }
            continue;
        }

        let punct = match c {
            '-' if i + 1 < chars.len() && chars[i + 1] == '>' => {
                i += 2;
                column += 2;
                Some(Tok::Arrow)
            }
            '-' => Some(Tok::Minus),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semi),
            '=' => Some(Tok::Eq),
            '+' => Some(Tok::Plus),
            '/' => Some(Tok::Slash),
            _ => None,
        };
        match punct {
            Some(Tok::Arrow) => tokens.push(Token {
                tok: Tok::Arrow,
                line: start_line,
                column: start_column,
            }),
            Some(tok) => {
                i += 1;
                column += 1;
                tokens.push(Token {
                    tok,
                    line: start_line,
                    column: start_column,
                });
            }
            None => {
                diags.push(ParseDiagnostic {
                    line: start_line,
                    column: start_column,
                    message: format!("unexpected character '{c}'"),
                    severity: Severity::Error,
                });
                i += 1;
                column += 1;
            }
        }
    }

    tokens.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    (tokens, diags)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<ParseDiagnostic>,
    name: Option<String>,
    builder: Option<CircuitBuilder<f64>>,
    pending_ancilla: Option<(usize, (usize, usize))>,
    cuts: Vec<Cut>,
    expected: BTreeMap<SiteId, Complex64>,
    expect_positions: BTreeMap<SiteId, (usize, usize)>,
    detect_position: Option<(usize, usize)>,
}

type Parse<T> = Result<T, ()>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn position(&self) -> (usize, usize) {
        let t = self.peek();
        (t.line, t.column)
    }

    fn eof_position(&self) -> (usize, usize) {
        let t = self.tokens.last().expect("lexer always emits Eof");
        (t.line, t.column)
    }

    fn diag_at(&mut self, (line, column): (usize, usize), severity: Severity, message: String) {
        self.diags.push(ParseDiagnostic {
            line,
            column,
            message,
            severity,
        });
    }

    fn error_here<T>(&mut self, message: String) -> Parse<T> {
        let pos = self.position();
        self.diag_at(pos, Severity::Error, message);
        Err(())
    }

    fn peek_word(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w == word)
    }

    fn at_statement_keyword(&self) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if STATEMENT_KEYWORDS.contains(&w.as_str()))
    }

    /// Skips ahead to the next statement keyword so parsing can resume.
    fn recover(&mut self) {
        while !self.at_eof() && !self.at_statement_keyword() {
            self.advance();
        }
    }

    fn expect_ident(&mut self, what: &str) -> Parse<String> {
        match &self.peek().tok {
            Tok::Word(w) if RESERVED.contains(&w.as_str()) => {
                let w = w.clone();
                self.error_here(format!(
                    "'{w}' is a reserved word and cannot be used as {what}"
                ))
            }
            Tok::Word(w) => {
                let w = w.clone();
                self.advance();
                Ok(w)
            }
            other => {
                let found = other.describe();
                self.error_here(format!("expected {what}, found {found}"))
            }
        }
    }

    fn expect_punct(&mut self, tok: Tok, what: &str) -> Parse<()> {
        if self.peek().tok == tok {
            self.advance();
            Ok(())
        } else {
            let found = self.peek().tok.describe();
            self.error_here(format!("expected {what}, found {found}"))
        }
    }

    fn expect_keyword(&mut self, word: &str) -> Parse<()> {
        if self.peek_word(word) {
            self.advance();
            Ok(())
        } else {
            let found = self.peek().tok.describe();
            self.error_here(format!("expected '{word}', found {found}"))
        }
    }

    fn expect_number(&mut self, what: &str) -> Parse<f64> {
        match self.peek().tok {
            Tok::Number(v) => {
                self.advance();
                Ok(v)
            }
            _ => {
                let found = self.peek().tok.describe();
                self.error_here(format!("expected {what}, found {found}"))
            }
        }
    }

    /// `NUMBER` or `NUMBER / NUMBER`.
    fn unsigned_rational(&mut self, what: &str) -> Parse<f64> {
        let value = self.expect_number(what)?;
        if self.peek().tok == Tok::Slash {
            self.advance();
            let denom_pos = self.position();
            let denom = self.expect_number("a denominator")?;
            if denom == 0.0 {
                self.diag_at(denom_pos, Severity::Error, "denominator is zero".to_owned());
                return Err(());
            }
            Ok(value / denom)
        } else {
            Ok(value)
        }
    }

    fn signed_rational(&mut self, what: &str) -> Parse<f64> {
        let negative = match self.peek().tok {
            Tok::Minus => {
                self.advance();
                true
            }
            Tok::Plus => {
                self.advance();
                false
            }
            _ => false,
        };
        let value = self.unsigned_rational(what)?;
        Ok(if negative { -value } else { value })
    }

    /// `pi`, `-pi`, or a signed rational.
    fn angle(&mut self) -> Parse<f64> {
        let negative = if self.peek().tok == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        let value = if self.peek_word("pi") {
            self.advance();
            std::f64::consts::PI
        } else {
            self.unsigned_rational("an angle")?
        };
        Ok(if negative { -value } else { value })
    }

    /// `R`, `Ri`, `R+Si`, `R-Si`, `i`, or `-i`.
    fn complex_value(&mut self) -> Parse<Complex64> {
        if self.peek_word("i") {
            self.advance();
            return Ok(Complex64::new(0.0, 1.0));
        }
        if self.peek().tok == Tok::Minus {
            if let Some(next) = self.peek2() {
                if matches!(&next.tok, Tok::Word(w) if w == "i") {
                    self.advance();
                    self.advance();
                    return Ok(Complex64::new(0.0, -1.0));
                }
            }
        }
        let real = self.signed_rational("a number")?;
        if self.peek_word("i") {
            self.advance();
            return Ok(Complex64::new(0.0, real));
        }
        let sign = match self.peek().tok {
            Tok::Plus => 1.0,
            Tok::Minus => -1.0,
            _ => return Ok(Complex64::new(real, 0.0)),
        };
        self.advance();
        let imag = self.unsigned_rational("an imaginary part")?;
        self.expect_keyword("i")?;
        Ok(Complex64::new(real, sign * imag))
    }

    fn builder_or_error(&mut self, pos: (usize, usize)) -> Parse<()> {
        if self.builder.is_none() {
            self.diag_at(
                pos,
                Severity::Error,
                "no paths exist yet; declare one with 'path' or 'split' first".to_owned(),
            );
            return Err(());
        }
        Ok(())
    }

    /// Creates the builder on first use, rooting the circuit at `source`.
    fn ensure_builder(&mut self, source: &str) {
        if self.builder.is_some() {
            return;
        }
        let mut builder = CircuitBuilder::new(source);
        if let Some((dim, pos)) = self.pending_ancilla.take() {
            if let Err(e) = builder.ancilla_dim(dim) {
                self.diag_at(pos, Severity::Error, e.to_string());
            }
        }
        self.builder = Some(builder);
    }

    fn run(&mut self) {
        while !self.at_eof() {
            let result = match &self.peek().tok {
                Tok::Word(w) => match w.as_str() {
                    "scenario" => self.stmt_scenario(),
                    "ancilla" => self.stmt_ancilla(),
                    "path" => self.stmt_path(),
                    "on" => self.stmt_path(),
                    "split" => self.stmt_split(),
                    "merge" => self.stmt_merge(),
                    "detect" => self.stmt_detect(),
                    "cut" => self.stmt_cut(),
                    "expect" => self.stmt_expect(),
                    _ => {
                        let found = self.peek().tok.describe();
                        let r: Parse<()> =
                            self.error_here(format!("expected a statement keyword, found {found}"));
                        self.advance();
                        r
                    }
                },
                _ => {
                    let found = self.peek().tok.describe();
                    let r: Parse<()> =
                        self.error_here(format!("expected a statement keyword, found {found}"));
                    self.advance();
                    r
                }
            };
            if result.is_err() {
                self.recover();
            }
        }
    }

    fn stmt_scenario(&mut self) -> Parse<()> {
        let pos = self.position();
        self.advance();
        let name = self.expect_ident("the scenario name")?;
        if self.name.is_some() {
            self.diag_at(
                pos,
                Severity::Error,
                "duplicate 'scenario' header".to_owned(),
            );
            return Err(());
        }
        self.name = Some(name);
        Ok(())
    }

    fn stmt_ancilla(&mut self) -> Parse<()> {
        let pos = self.position();
        self.advance();
        let value = self.expect_number("the pointer dimension")?;
        if value.fract() != 0.0 || !(2.0..=1024.0).contains(&value) {
            self.diag_at(
                pos,
                Severity::Error,
                format!("pointer dimension must be an integer between 2 and 1024, got {value}"),
            );
            return Err(());
        }
        let dim = value as usize;
        match self.builder.as_mut() {
            Some(builder) => {
                if let Err(e) = builder.ancilla_dim(dim) {
                    self.diag_at(pos, Severity::Error, e.to_string());
                    return Err(());
                }
            }
            None => self.pending_ancilla = Some((dim, pos)),
        }
        Ok(())
    }

    fn stmt_path(&mut self) -> Parse<()> {
        self.advance();
        let label = self.expect_ident("a path label")?;
        self.expect_punct(Tok::LBrace, "'{'")?;
        self.ensure_builder(&label);
        {
            let builder = self.builder.as_ref().expect("just ensured");
            if !builder
                .live_labels()
                .contains(&PathLabel::from(label.as_str()))
            {
                let msg = format!("path '{label}' is not live here");
                return self.error_here(msg);
            }
        }
        if self.peek().tok == Tok::RBrace {
            self.advance();
            return Ok(());
        }
        loop {
            let element_pos = self.position();
            let element = self.element()?;
            let builder = self.builder.as_mut().expect("just ensured");
            if let Err(e) = builder.element(label.as_str(), element) {
                self.diag_at(element_pos, Severity::Error, e.to_string());
                return Err(());
            }
            match self.peek().tok {
                Tok::Semi => {
                    self.advance();
                }
                Tok::RBrace => {
                    self.advance();
                    return Ok(());
                }
                _ => {
                    let found = self.peek().tok.describe();
                    return self.error_here(format!("expected ';' or '}}', found {found}"));
                }
            }
        }
    }

    fn element(&mut self) -> Parse<Element<f64>> {
        match &self.peek().tok {
            Tok::Word(w) => match w.as_str() {
                "probe" => {
                    self.advance();
                    let id = self.expect_ident("a probe site name")?;
                    Ok(Element::Probe(SiteId::from(id.as_str())))
                }
                "device" => {
                    self.advance();
                    self.expect_keyword("pi")?;
                    Ok(Element::PiDevice)
                }
                "block" => {
                    self.advance();
                    Ok(Element::Block)
                }
                "marker" => {
                    self.advance();
                    let id = self.expect_ident("a marker name")?;
                    Ok(Element::Marker(crate::MarkerId::from(id.as_str())))
                }
                "phase" => {
                    self.advance();
                    let angle = self.angle()?;
                    Ok(Element::Phase(angle))
                }
                "mirror" => {
                    self.advance();
                    Ok(Element::Mirror)
                }
                other => {
                    let other = other.to_owned();
                    self.error_here(format!("unknown element '{other}'"))
                }
            },
            other => {
                let found = other.describe();
                self.error_here(format!("expected an element, found {found}"))
            }
        }
    }

    fn stmt_split(&mut self) -> Parse<()> {
        let pos = self.position();
        self.advance();
        let name = self.expect_ident("a splitter name")?;
        let input = self.expect_ident("the input path")?;
        self.expect_punct(Tok::Arrow, "'->'")?;
        let out_reflected = self.expect_ident("the reflected output")?;
        self.expect_punct(Tok::Comma, "','")?;
        let out_transmitted = self.expect_ident("the transmitted output")?;
        self.expect_keyword("ratio")?;
        let ratio = self.signed_rational("the reflection probability")?;
        self.ensure_builder(&input);
        let builder = self.builder.as_mut().expect("just ensured");
        if let Err(e) = builder.split(
            name,
            input.as_str(),
            (out_reflected.as_str(), out_transmitted.as_str()),
            ratio,
        ) {
            self.diag_at(pos, Severity::Error, e.to_string());
            return Err(());
        }
        Ok(())
    }

    fn stmt_merge(&mut self) -> Parse<()> {
        let pos = self.position();
        self.advance();
        let name = self.expect_ident("a splitter name")?;
        let input_u = self.expect_ident("the first input path")?;
        self.expect_punct(Tok::Comma, "','")?;
        let input_v = self.expect_ident("the second input path")?;
        self.expect_punct(Tok::Arrow, "'->'")?;
        let output_u = self.expect_ident("the first output")?;
        self.expect_punct(Tok::Comma, "','")?;
        let output_v = self.expect_ident("the second output")?;
        self.expect_keyword("ratio")?;
        let ratio = self.signed_rational("the reflection probability")?;
        self.ensure_builder(&input_u);
        let builder = self.builder.as_mut().expect("just ensured");
        if let Err(e) = builder.merge(
            name,
            (input_u.as_str(), input_v.as_str()),
            (output_u.as_str(), output_v.as_str()),
            ratio,
        ) {
            self.diag_at(pos, Severity::Error, e.to_string());
            return Err(());
        }
        Ok(())
    }

    fn stmt_detect(&mut self) -> Parse<()> {
        let pos = self.position();
        self.advance();
        let label = self.expect_ident("the detected path")?;
        self.builder_or_error(pos)?;
        self.detect_position = Some(pos);
        let builder = self.builder.as_mut().expect("checked above");
        if let Err(e) = builder.detect(label.as_str()) {
            self.diag_at(pos, Severity::Error, e.to_string());
            return Err(());
        }
        Ok(())
    }

    fn stmt_cut(&mut self) -> Parse<()> {
        let pos = self.position();
        self.advance();
        let mut labels = BTreeSet::new();
        let first = self.expect_ident("a path label")?;
        labels.insert(PathLabel::from(first.as_str()));
        while self.peek().tok == Tok::Comma {
            self.advance();
            let label_pos = self.position();
            let label = self.expect_ident("a path label")?;
            if !labels.insert(PathLabel::from(label.as_str())) {
                self.diag_at(
                    label_pos,
                    Severity::Warning,
                    format!("path '{label}' listed twice in this cut"),
                );
            }
        }
        self.builder_or_error(pos)?;
        let builder = self.builder.as_ref().expect("checked above");
        let live = builder.live_labels().clone();
        let stage = builder.stage_count();
        for label in &labels {
            if !live.contains(label) {
                self.diag_at(
                    pos,
                    Severity::Error,
                    format!("path '{label}' is not live at this cut"),
                );
                return Err(());
            }
        }
        if labels != live {
            let missing: Vec<&str> = live.difference(&labels).map(|l| l.as_str()).collect();
            self.diag_at(
                pos,
                Severity::Warning,
                format!(
                    "cut does not cover all live paths; missing: {}",
                    missing.join(", ")
                ),
            );
        }
        self.cuts.push(Cut { labels, stage });
        Ok(())
    }

    fn stmt_expect(&mut self) -> Parse<()> {
        let pos = self.position();
        self.advance();
        let site = self.expect_ident("a probe site name")?;
        self.expect_punct(Tok::Eq, "'='")?;
        let value = self.complex_value()?;
        let site = SiteId::from(site.as_str());
        if self.expected.insert(site.clone(), value).is_some() {
            self.diag_at(
                pos,
                Severity::Warning,
                format!("duplicate expectation for '{site}' replaces the earlier value"),
            );
        }
        self.expect_positions.insert(site, pos);
        Ok(())
    }

    fn finish(self) -> (Option<Scenario>, Vec<ParseDiagnostic>) {
        let eof = self.eof_position();
        let mut diags = self.diags;
        let name = match self.name {
            Some(n) => n,
            None => {
                diags.push(ParseDiagnostic {
                    line: 1,
                    column: 1,
                    message: "missing 'scenario' header".to_owned(),
                    severity: Severity::Error,
                });
                return (None, diags);
            }
        };
        let builder = match self.builder {
            Some(b) => b,
            None => {
                diags.push(ParseDiagnostic {
                    line: eof.0,
                    column: eof.1,
                    message: "scenario declares no paths".to_owned(),
                    severity: Severity::Error,
                });
                return (None, diags);
            }
        };
        let circuit = match builder.build() {
            Ok(c) => c,
            Err(e) => {
                let (line, column) = self.detect_position.unwrap_or(eof);
                diags.push(ParseDiagnostic {
                    line,
                    column,
                    message: e.to_string(),
                    severity: Severity::Error,
                });
                return (None, diags);
            }
        };
        for site in self.expected.keys() {
            if circuit.site(site).is_none() {
                let (line, column) = self.expect_positions.get(site).copied().unwrap_or(eof);
                diags.push(ParseDiagnostic {
                    line,
                    column,
                    message: format!("expectation refers to unknown probe site '{site}'"),
                    severity: Severity::Warning,
                });
            }
        }
        if diags.iter().any(|d| d.severity == Severity::Error) {
            return (None, diags);
        }
        (
            Some(Scenario {
                name,
                circuit,
                cuts: self.cuts,
                expected: self.expected,
            }),
            diags,
        )
    }
}

/// Shortest decimal that reparses to the same value; negative zero is
/// folded into zero.
fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x}")
}

fn fmt_complex(z: &Complex64) -> String {
    let re = if z.re == 0.0 { 0.0 } else { z.re };
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    if im == 0.0 {
        fmt_f64(re)
    } else if re == 0.0 {
        format!("{}i", fmt_f64(im))
    } else {
        format!(
            "{}{}{}i",
            fmt_f64(re),
            if im < 0.0 { "-" } else { "+" },
            fmt_f64(im.abs())
        )
    }
}

fn element_text(element: &Element<f64>) -> String {
    match element {
        Element::Probe(id) => format!("probe {id}"),
        Element::PiDevice => "device pi".to_owned(),
        Element::Block => "block".to_owned(),
        Element::Marker(id) => format!("marker {id}"),
        Element::Phase(angle) if *angle == std::f64::consts::PI => "phase pi".to_owned(),
        Element::Phase(angle) => format!("phase {}", fmt_f64(*angle)),
        Element::Mirror => "mirror".to_owned(),
    }
}

fn cut_text(cut: &Cut) -> String {
    let labels: Vec<&str> = cut.labels.iter().map(|l| l.as_str()).collect();
    format!("cut {}\n", labels.join(", "))
}

/// Renders a scenario in canonical form. Parsing the result yields the
/// same scenario, and for already-canonical input `serialize(parse(t))`
/// is `t` byte for byte.
pub fn serialize(s: &Scenario) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenario {}\n", s.name));
    if s.circuit.ancilla_dim() != 2 {
        out.push_str(&format!("ancilla {}\n", s.circuit.ancilla_dim()));
    }

    let stages = s.circuit.stages();
    let mut cuts: Vec<&Cut> = s.cuts.iter().collect();
    cuts.sort_by_key(|c| c.stage);
    let cut_stages: BTreeSet<usize> = cuts.iter().map(|c| c.stage).collect();

    let mut seen_paths: BTreeSet<PathLabel> = BTreeSet::new();
    let mut cut_index = 0usize;
    let mut i = 0usize;

    if stages.is_empty() {
        out.push_str(&format!("path {} {{}}\n", s.circuit.source()));
    }
    while i < stages.len() {
        while cut_index < cuts.len() && cuts[cut_index].stage <= i {
            out.push_str(&cut_text(cuts[cut_index]));
            cut_index += 1;
        }
        match &stages[i] {
            Stage::Splitter(sp) => {
                let line = match &sp.input_v {
                    None => format!(
                        "split {} {} -> {}, {} ratio {}\n",
                        sp.name,
                        sp.input_u,
                        sp.output_u,
                        sp.output_v,
                        fmt_f64(sp.ratio)
                    ),
                    Some(v) => format!(
                        "merge {} {}, {} -> {}, {} ratio {}\n",
                        sp.name,
                        sp.input_u,
                        v,
                        sp.output_u,
                        sp.output_v,
                        fmt_f64(sp.ratio)
                    ),
                };
                out.push_str(&line);
                i += 1;
            }
            Stage::Element { path, .. } => {
                let mut parts = Vec::new();
                let mut j = i;
                loop {
                    if let Stage::Element { element, .. } = &stages[j] {
                        parts.push(element_text(element));
                    }
                    let next = j + 1;
                    let continues = next < stages.len()
                        && !cut_stages.contains(&next)
                        && matches!(&stages[next], Stage::Element { path: p, .. } if p == path);
                    if continues {
                        j = next;
                    } else {
                        break;
                    }
                }
                let keyword = if seen_paths.insert(path.clone()) {
                    "path"
                } else {
                    "on"
                };
                out.push_str(&format!("{keyword} {path} {{ {} }}\n", parts.join(" ; ")));
                i = j + 1;
            }
        }
    }
    while cut_index < cuts.len() {
        out.push_str(&cut_text(cuts[cut_index]));
        cut_index += 1;
    }

    out.push_str(&format!("detect {}\n", s.circuit.detect()));
    for (site, value) in &s.expected {
        out.push_str(&format!("expect {site} = {}\n", fmt_complex(value)));
    }
    out
}
