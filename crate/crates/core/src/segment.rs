//! Sentence segmentation of raw record text into ordered text units.
//!
//! Spans are measured in `char` offsets, not bytes, so CJK records index the
//! same way as Latin ones.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-open `[start, end)` range of char offsets into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// One segmented sentence of a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextUnit {
    pub index: usize,
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationConfig {
    pub terminators: Vec<char>,
    pub max_unit_chars: usize,
    pub strip_whitespace: bool,
}

pub const DEFAULT_TERMINATORS: [char; 9] = ['。', '！', '？', '；', '.', '!', '?', ';', '\n'];

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            terminators: DEFAULT_TERMINATORS.to_vec(),
            max_unit_chars: 512,
            strip_whitespace: true,
        }
    }
}

impl SegmentationConfig {
    pub const MIN_UNIT_CHARS: usize = 8;

    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.terminators.is_empty() {
            return Err(SegmentError::InvalidConfig("terminator set is empty"));
        }
        if self.max_unit_chars < Self::MIN_UNIT_CHARS {
            return Err(SegmentError::InvalidConfig("max_unit_chars must be at least 8"));
        }
        Ok(())
    }

    fn is_terminator(&self, c: char) -> bool {
        self.terminators.contains(&c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("input text is empty or whitespace-only")]
    EmptyInput,
    #[error("invalid segmentation config: {0}")]
    InvalidConfig(&'static str),
}

/// Splits `text` into sentence units.
///
/// A unit ends at a terminator or when it reaches `max_unit_chars`. A Latin
/// `.` only terminates when followed by whitespace or end of text, so
/// decimals such as `3.5 mg` stay in one unit. Whitespace-only candidates are
/// dropped.
pub fn segment(text: &str, config: &SegmentationConfig) -> Result<Vec<TextUnit>, SegmentError> {
    config.validate()?;
    if text.trim().is_empty() {
        return Err(SegmentError::EmptyInput);
    }

    let chars: Vec<char> = text.chars().collect();
    let mut units = Vec::new();
    let mut start = 0;
    // First char counted toward the length cap of the current candidate.
    let mut content_start: Option<usize> = None;

    for i in 0..chars.len() {
        let c = chars[i];
        if content_start.is_none() && (!config.strip_whitespace || !c.is_whitespace()) {
            content_start = Some(i);
        }
        let terminates = config.is_terminator(c)
            && (c != '.' || chars.get(i + 1).is_none_or(|n| n.is_whitespace()));
        let full = content_start.is_some_and(|s| i + 1 - s >= config.max_unit_chars);
        if terminates || full {
            push_unit(&chars, start, i + 1, config, &mut units);
            start = i + 1;
            content_start = None;
        }
    }
    if start < chars.len() {
        push_unit(&chars, start, chars.len(), config, &mut units);
    }

    if units.is_empty() {
        return Err(SegmentError::EmptyInput);
    }
    Ok(units)
}

fn push_unit(
    chars: &[char],
    mut start: usize,
    mut end: usize,
    config: &SegmentationConfig,
    units: &mut Vec<TextUnit>,
) {
    if !chars[start..end].iter().any(|c| !c.is_whitespace()) {
        return;
    }
    if config.strip_whitespace {
        while chars[start].is_whitespace() {
            start += 1;
        }
        while chars[end - 1].is_whitespace() {
            end -= 1;
        }
    }
    units.push(TextUnit {
        index: units.len(),
        text: chars[start..end].iter().collect(),
        span: Span { start, end },
    });
}

/// Returns the source text covered by `span`.
pub fn slice_chars(source: &str, span: Span) -> String {
    source.chars().skip(span.start).take(span.len()).collect()
}
