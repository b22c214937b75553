//! Hand-curated regular expression baseline.
//!
//! The pattern file uses the layout of a Python source listing: an
//! `regex_encapsulators = {...}` block with `'start'` and `'end'` entries,
//! then one section per entity (a line holding the entity name) followed by
//! one Python string literal per line. Literals are decoded with Python
//! string semantics (raw `r'..'` or escaped `'..'`, bare lines taken as-is),
//! trailing `,` and `# comments` are dropped, and a small number of syntax
//! adaptations are applied before compiling (see [`port_pattern`] and
//! `data/patterns.port-notes.md`).
//!
//! Scanning applies every pattern (wrapped in the encapsulators) over the
//! whole text. Each matched byte collects the entity of every pattern that
//! covered it. Bytes with no candidate are `BACKGROUND`; bytes with several
//! candidates are split round-robin across the candidates in label order,
//! indexed by offset inside the run of bytes that share the same candidate
//! set.

use std::fs;
use std::path::Path;

use fancy_regex::{Regex, RegexBuilder};

use crate::error::{Error, Result};
use crate::label::{EntityLabel, NUM_LABELS};

/// The pattern listing shipped with the crate.
pub const BUNDLED_PATTERNS: &str = include_str!("../data/patterns.txt");

const BACKTRACK_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct CompiledPattern {
    /// Body as decoded from the file, before porting.
    pub source: String,
    /// Body after syntax adaptation.
    pub ported: String,
    /// Body wrapped in the encapsulators.
    pub scanner: Regex,
    /// Body anchored at both ends, for whole-value checks.
    pub full: Regex,
}

#[derive(Debug, Clone)]
pub struct PatternRegistry {
    pub encapsulator_start: String,
    pub encapsulator_end: String,
    entries: Vec<(EntityLabel, Vec<CompiledPattern>)>,
    encapsulated: bool,
}

/// One parsed section of a pattern file, before compilation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSource {
    pub start: String,
    pub end: String,
    pub sections: Vec<(EntityLabel, Vec<String>)>,
}

/// Decode a Python string literal (`'..'`, `".."`, `r'..'`), returning the
/// value and the rest of the line after the closing quote.
pub fn decode_python_literal(s: &str) -> Option<(String, &str)> {
    let (raw, rest) = match s.strip_prefix(['r', 'R']) {
        Some(r) => (true, r),
        None => (false, s),
    };
    let quote = rest.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let body = &rest[1..];
    let mut out = String::new();
    let mut chars = body.char_indices();
    while let Some((i, c)) = chars.next() {
        if c == quote {
            return Some((out, &body[i + 1..]));
        }
        if c != '\\' {
            out.push(c);
            continue;
        }
        let (_, n) = chars.next()?;
        if raw {
            out.push('\\');
            out.push(n);
            continue;
        }
        match n {
            '\\' => out.push('\\'),
            '\'' => out.push('\''),
            '"' => out.push('"'),
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            'x' => {
                let (_, h1) = chars.next()?;
                let (_, h2) = chars.next()?;
                let v = u8::from_str_radix(&format!("{h1}{h2}"), 16).ok()?;
                out.push(v as char);
            }
            other => {
                out.push('\\');
                out.push(other);
            }
        }
    }
    None
}

fn parse_pattern_line(line: &str) -> String {
    let t = line.trim();
    if let Some((value, _rest)) = decode_python_literal(t) {
        value
    } else {
        t.trim_end_matches(',').to_string()
    }
}

/// Parse the pattern listing without compiling.
pub fn parse_pattern_file(text: &str) -> Result<PatternSource> {
    let mut start = None;
    let mut end = None;
    let mut sections: Vec<(EntityLabel, Vec<String>)> = Vec::new();
    let mut skipping = false;
    let mut in_encapsulators = false;
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with("regex_encapsulators") {
            in_encapsulators = true;
            continue;
        }
        if in_encapsulators {
            if t.starts_with('}') {
                in_encapsulators = false;
                continue;
            }
            let (key, rest) = decode_python_literal(t)
                .ok_or_else(|| Error::Config(format!("bad encapsulator line: {t}")))?;
            let rest = rest.trim_start().trim_start_matches(':').trim_start();
            let (value, _) = decode_python_literal(rest)
                .ok_or_else(|| Error::Config(format!("bad encapsulator value: {t}")))?;
            match key.as_str() {
                "start" => start = Some(value),
                "end" => end = Some(value),
                other => return Err(Error::Config(format!("unknown encapsulator {other:?}"))),
            }
            continue;
        }
        if let Ok(label) = t.parse::<EntityLabel>() {
            skipping = matches!(label, EntityLabel::Person | EntityLabel::Background | EntityLabel::Pad);
            if !skipping {
                sections.push((label, Vec::new()));
            }
            continue;
        }
        if skipping {
            continue;
        }
        let Some((_, pats)) = sections.last_mut() else {
            return Err(Error::Config(format!("pattern before any entity header: {t}")));
        };
        pats.push(parse_pattern_line(t));
    }
    if sections.is_empty() {
        return Err(Error::Config("pattern file defines no entity patterns".into()));
    }
    Ok(PatternSource {
        start: start.unwrap_or_default(),
        end: end.unwrap_or_default(),
        sections,
    })
}

/// Adapt a pattern body to the host engine.
///
/// * A quantified lookbehind `(?<=...)?` is a no-op that the engine rejects;
///   it is removed.
/// * The bulleted-number ordinal opens with `(?<!\\()`, which leaves the
///   lookbehind unterminated (a doubled backslash); it becomes `(?<!\()`,
///   "not preceded by an opening parenthesis".
pub fn port_pattern(body: &str) -> String {
    let mut s = body.replace(r"(?<!\\()", r"(?<!\()");
    while let Some(i) = find_quantified_lookbehind(&s) {
        let close = matching_paren(&s, i).expect("balanced lookbehind");
        s.replace_range(i..close + 2, "");
    }
    s
}

fn find_quantified_lookbehind(s: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(off) = s[from..].find("(?<=") {
        let i = from + off;
        if let Some(close) = matching_paren(s, i) {
            if s[close + 1..].starts_with('?') {
                return Some(i);
            }
        }
        from = i + 1;
    }
    None
}

fn matching_paren(s: &str, open: usize) -> Option<usize> {
    let b = s.as_bytes();
    let mut depth = 0i32;
    let mut i = open;
    let mut in_class = false;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 1,
            b'[' if !in_class => in_class = true,
            b']' if in_class => in_class = false,
            b'(' if !in_class => depth += 1,
            b')' if !in_class => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn build(pattern: &str) -> std::result::Result<Regex, String> {
    RegexBuilder::new(pattern)
        .backtrack_limit(BACKTRACK_LIMIT)
        .build()
        .map_err(|e| e.to_string())
}

impl PatternRegistry {
    pub fn bundled() -> Result<Self> {
        Self::compile_str(BUNDLED_PATTERNS)
    }

    pub fn compile_file(path: &Path) -> Result<Self> {
        Self::compile_str(&fs::read_to_string(path)?)
    }

    pub fn compile_str(text: &str) -> Result<Self> {
        Self::compile(parse_pattern_file(text)?, true)
    }

    pub fn compile(source: PatternSource, encapsulated: bool) -> Result<Self> {
        let mut entries = Vec::with_capacity(source.sections.len());
        for (entity, bodies) in &source.sections {
            let mut compiled = Vec::with_capacity(bodies.len());
            for (index, body) in bodies.iter().enumerate() {
                let ported = port_pattern(body);
                let err = |message: String| Error::Pattern {
                    entity: entity.name().to_string(),
                    index,
                    message,
                };
                let scan_src = if encapsulated {
                    format!("{}(?:{}){}", source.start, ported, source.end)
                } else {
                    format!("(?:{ported})")
                };
                let scanner = build(&scan_src).map_err(err)?;
                let full = build(&format!("^(?:{ported})$")).map_err(err)?;
                compiled.push(CompiledPattern {
                    source: body.clone(),
                    ported,
                    scanner,
                    full,
                });
            }
            entries.push((*entity, compiled));
        }
        Ok(Self {
            encapsulator_start: source.start,
            encapsulator_end: source.end,
            entries,
            encapsulated,
        })
    }

    /// The same patterns with the encapsulators removed.
    pub fn without_encapsulators(&self) -> Result<Self> {
        let source = PatternSource {
            start: self.encapsulator_start.clone(),
            end: self.encapsulator_end.clone(),
            sections: self
                .entries
                .iter()
                .map(|(l, ps)| (*l, ps.iter().map(|p| p.source.clone()).collect()))
                .collect(),
        };
        Self::compile(source, false)
    }

    pub fn is_encapsulated(&self) -> bool {
        self.encapsulated
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityLabel> + '_ {
        self.entries.iter().map(|(l, _)| *l)
    }

    pub fn patterns(&self, entity: EntityLabel) -> &[CompiledPattern] {
        self.entries
            .iter()
            .find(|(l, _)| *l == entity)
            .map(|(_, p)| p.as_slice())
            .unwrap_or(&[])
    }

    pub fn entries(&self) -> &[(EntityLabel, Vec<CompiledPattern>)] {
        &self.entries
    }

    /// Index of the first pattern of `entity` that matches the whole value.
    pub fn full_match(&self, entity: EntityLabel, value: &str) -> Result<Option<usize>> {
        for (index, p) in self.patterns(entity).iter().enumerate() {
            let hit = p.full.is_match(value).map_err(|e| Error::Scan {
                entity: entity.name().to_string(),
                index,
                message: e.to_string(),
            })?;
            if hit {
                return Ok(Some(index));
            }
        }
        Ok(None)
    }

    /// Per-byte bitmask of candidate entities (bit = label id).
    pub fn candidate_masks(&self, text: &str) -> Result<Vec<u32>> {
        let mut masks = vec![0u32; text.len()];
        for (entity, pats) in &self.entries {
            let bit = 1u32 << entity.id();
            for (index, p) in pats.iter().enumerate() {
                for m in p.scanner.find_iter(text) {
                    let m = m.map_err(|e| Error::Scan {
                        entity: entity.name().to_string(),
                        index,
                        message: e.to_string(),
                    })?;
                    for mask in &mut masks[m.start()..m.end()] {
                        *mask |= bit;
                    }
                }
            }
        }
        Ok(masks)
    }

    pub fn scan_chars(&self, text: &str) -> Result<Vec<EntityLabel>> {
        Ok(resolve_candidates(&self.candidate_masks(text)?))
    }
}

/// Turn candidate masks into labels with the even tie split.
pub fn resolve_candidates(masks: &[u32]) -> Vec<EntityLabel> {
    let mut out = Vec::with_capacity(masks.len());
    let mut run_start = 0;
    for (i, &m) in masks.iter().enumerate() {
        if i == 0 || masks[i - 1] != m {
            run_start = i;
        }
        let label = match m.count_ones() {
            0 => EntityLabel::Background,
            1 => EntityLabel::from_id(m.trailing_zeros() as u8).expect("valid label bit"),
            n => {
                let pick = (i - run_start) % n as usize;
                let id = (0..NUM_LABELS as u8)
                    .filter(|b| m & (1 << b) != 0)
                    .nth(pick)
                    .expect("pick < popcount");
                EntityLabel::from_id(id).expect("valid label bit")
            }
        };
        out.push(label);
    }
    out
}
