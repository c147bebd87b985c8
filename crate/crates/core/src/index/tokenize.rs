use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    /// Order of the char n-grams emitted for CJK runs.
    pub cjk_ngram: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self { lowercase: true, cjk_ngram: 2 }
    }
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // kana
        | 0x3400..=0x4DBF    // CJK ext A
        | 0x4E00..=0x9FFF    // CJK unified
        | 0xAC00..=0xD7AF    // hangul syllables
        | 0xF900..=0xFAFF    // CJK compatibility
        | 0x20000..=0x2FA1F) // CJK ext B+
}

#[derive(PartialEq, Clone, Copy)]
enum Class {
    Cjk,
    Word,
    Sep,
}

fn class(c: char) -> Class {
    if is_cjk(c) {
        Class::Cjk
    } else if c.is_alphanumeric() {
        Class::Word
    } else {
        Class::Sep
    }
}

/// Splits Latin-style runs on whitespace and punctuation and emits char
/// n-grams for CJK runs. A CJK run shorter than the n-gram order is emitted
/// whole.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let chars: Vec<char> = if config.lowercase {
        text.chars().flat_map(char::to_lowercase).collect()
    } else {
        text.chars().collect()
    };
    let n = config.cjk_ngram.max(1);
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let kind = class(chars[i]);
        let start = i;
        while i < chars.len() && class(chars[i]) == kind {
            i += 1;
        }
        let run = &chars[start..i];
        match kind {
            Class::Sep => {}
            Class::Word => tokens.push(run.iter().collect()),
            Class::Cjk if run.len() < n => tokens.push(run.iter().collect()),
            Class::Cjk => tokens.extend(run.windows(n).map(|w| w.iter().collect::<String>())),
        }
    }
    tokens
}
