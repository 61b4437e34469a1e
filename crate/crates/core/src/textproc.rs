//! Tokenization, AoA annotation and `<edit>` tagging.

use serde::Serialize;
use thiserror::Error;

use crate::lexicon::AoaLexicon;

/// Literal placed on both sides of a word the rewriter should simplify.
pub const EDIT_TAG: &str = "<edit>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("word not found in sentence: {0:?}")]
    WordNotFound(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Token {
    pub surface: String,
    /// Char offset of the first character.
    pub start: usize,
    /// Char offset one past the last character.
    pub end: usize,
    pub is_word: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aoa: Option<f64>,
    /// Lexicon key that produced `aoa`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
    #[serde(skip)]
    byte_start: usize,
    #[serde(skip)]
    byte_end: usize,
}

impl Token {
    pub fn byte_range(&self) -> std::ops::Range<usize> {
        self.byte_start..self.byte_end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzedSentence {
    pub text: String,
    pub tokens: Vec<Token>,
    pub max_aoa_index: Option<usize>,
}

impl AnalyzedSentence {
    pub fn max_token(&self) -> Option<&Token> {
        self.max_aoa_index.map(|i| &self.tokens[i])
    }

    /// Highest rated AoA in the sentence, if any word is rated.
    pub fn max_aoa(&self) -> Option<f64> {
        self.max_token().and_then(|t| t.aoa)
    }

    /// True when the highest rated AoA is strictly below `target_age`, or
    /// when no word is rated at all.
    pub fn is_below(&self, target_age: f64) -> bool {
        self.max_aoa().is_none_or(|a| a < target_age)
    }

    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EditTaggedSentence {
    pub text: String,
    pub tagged_words: Vec<String>,
}

fn is_split_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'
                | '\u{2019}'
                | '\u{201c}'
                | '\u{201d}'
                | '\u{00ab}'
                | '\u{00bb}'
                | '\u{2013}'
                | '\u{2014}'
                | '\u{2026}'
        )
}

/// Splits `text` on whitespace, then peels leading and trailing punctuation
/// into one-character non-word tokens. Apostrophes and hyphens inside a word
/// stay put. Chunks without any letter are marked `is_word = false`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut char_pos = 0usize;
    let mut iter = text.char_indices().peekable();
    while let Some(&(b, c)) = iter.peek() {
        if c.is_whitespace() {
            iter.next();
            char_pos += 1;
            continue;
        }
        let chunk_start_byte = b;
        let chunk_start_char = char_pos;
        let mut chars = Vec::new();
        while let Some(&(b, c)) = iter.peek() {
            if c.is_whitespace() {
                break;
            }
            chars.push((b, c));
            iter.next();
            char_pos += 1;
        }
        let chunk_end_byte = chars.last().map(|&(b, c)| b + c.len_utf8()).unwrap_or(chunk_start_byte);
        split_chunk(text, &chars, chunk_start_char, chunk_end_byte, &mut tokens);
    }
    tokens
}

fn split_chunk(text: &str, chars: &[(usize, char)], first_char: usize, end_byte: usize, out: &mut Vec<Token>) {
    let mut lo = 0;
    let mut hi = chars.len();
    while lo < hi && is_split_punct(chars[lo].1) {
        lo += 1;
    }
    while hi > lo && is_split_punct(chars[hi - 1].1) {
        hi -= 1;
    }
    let byte_at = |i: usize| if i < chars.len() { chars[i].0 } else { end_byte };
    let push = |from: usize, to: usize, out: &mut Vec<Token>| {
        let surface = &text[byte_at(from)..byte_at(to)];
        out.push(Token {
            surface: surface.to_owned(),
            start: first_char + from,
            end: first_char + to,
            is_word: surface.chars().any(char::is_alphabetic),
            aoa: None,
            entry: None,
            byte_start: byte_at(from),
            byte_end: byte_at(to),
        });
    };
    for i in 0..lo {
        push(i, i + 1, out);
    }
    if lo < hi {
        push(lo, hi, out);
    }
    for i in hi.max(lo)..chars.len() {
        push(i, i + 1, out);
    }
}

/// Tokenizes `text` and rates every word token against `lex`.
pub fn annotate(lex: &AoaLexicon, text: &str) -> AnalyzedSentence {
    let mut tokens = tokenize(text);
    let mut max_aoa_index: Option<usize> = None;
    let mut best = f64::NEG_INFINITY;
    for (i, tok) in tokens.iter_mut().enumerate() {
        if !tok.is_word {
            continue;
        }
        if let Some((entry, aoa)) = lex.lookup_entry(&tok.surface) {
            tok.aoa = Some(aoa);
            tok.entry = Some(entry);
            // Strict comparison keeps the leftmost token on ties.
            if aoa > best {
                best = aoa;
                max_aoa_index = Some(i);
            }
        }
    }
    AnalyzedSentence {
        text: text.to_owned(),
        tokens,
        max_aoa_index,
    }
}

/// Rated word tokens whose AoA is strictly greater than `age`.
pub fn words_above(analyzed: &AnalyzedSentence, age: f64) -> Vec<&Token> {
    analyzed.words().filter(|t| t.aoa.is_some_and(|a| a > age)).collect()
}

/// Wraps the first not-yet-tagged occurrence of each word in `<edit>` tags.
/// Exact surface matches are preferred; a case-insensitive match is used as
/// a fallback.
pub fn tag_words<S: AsRef<str>>(text: &str, words: &[S]) -> Result<EditTaggedSentence, TextError> {
    let tokens = tokenize(text);
    let mut taken = vec![false; tokens.len()];
    for word in words {
        let word = word.as_ref();
        let pos = tokens
            .iter()
            .enumerate()
            .position(|(i, t)| !taken[i] && t.surface == word)
            .or_else(|| {
                tokens
                    .iter()
                    .enumerate()
                    .position(|(i, t)| !taken[i] && t.is_word && t.surface.to_lowercase() == word.to_lowercase())
            })
            .ok_or_else(|| TextError::WordNotFound(word.to_owned()))?;
        taken[pos] = true;
    }
    let mut out = String::with_capacity(text.len() + words.len() * 2 * EDIT_TAG.len());
    let mut cursor = 0;
    for (tok, _) in tokens.iter().zip(&taken).filter(|(_, &t)| t) {
        out.push_str(&text[cursor..tok.byte_start]);
        out.push_str(EDIT_TAG);
        out.push_str(&tok.surface);
        out.push_str(EDIT_TAG);
        cursor = tok.byte_end;
    }
    out.push_str(&text[cursor..]);
    Ok(EditTaggedSentence {
        text: out,
        tagged_words: words.iter().map(|w| w.as_ref().to_owned()).collect(),
    })
}

/// Removes every `<edit>` literal, repeating until none is left.
pub fn strip_tags(tagged: &str) -> String {
    let mut s = tagged.replace(EDIT_TAG, "");
    while s.contains(EDIT_TAG) {
        s = s.replace(EDIT_TAG, "");
    }
    s
}

/// Heuristic syllable count: maximal vowel groups (`y` counts as a vowel),
/// minus one for a silent final `e` unless the word ends in consonant + `le`.
/// Never less than one.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    let vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0usize;
    let mut prev = false;
    for &c in &letters {
        let v = vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = letters.len();
    if n >= 1 && letters[n - 1] == 'e' {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !vowel(letters[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}
