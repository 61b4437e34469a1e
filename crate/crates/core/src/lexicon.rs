//! Age-of-acquisition lexicon.
//!
//! An [`AoaLexicon`] maps lowercase words to the mean age (in years) at which
//! they are acquired. Surface forms are matched through a short candidate
//! chain (see [`normalize`]) so inflected words find their lemma entry.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon {name}: malformed CSV: {source}")]
    Csv {
        name: String,
        #[source]
        source: csv::Error,
    },
    #[error("lexicon {name} has zero valid rows ({skipped} skipped)")]
    Empty { name: String, skipped: usize },
}

/// On-disk layouts accepted by [`load_lexicon`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconFormat {
    /// `word,aoa` rows; a header row is detected by a non-numeric second column.
    #[default]
    Csv,
}

/// Counters collected while loading a lexicon.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadWarnings {
    pub duplicates: usize,
    pub malformed: usize,
    pub header_skipped: bool,
}

/// Immutable word → acquisition-age table.
#[derive(Debug, Clone)]
pub struct AoaLexicon {
    entries: HashMap<String, f64>,
    source_name: String,
    warnings: LoadWarnings,
}

/// Loads a lexicon from `path`.
pub fn load_lexicon(path: impl AsRef<Path>, format: LexiconFormat) -> Result<AoaLexicon, LexiconError> {
    let path = path.as_ref();
    let io_err = |source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut raw = String::new();
    File::open(path)
        .map_err(io_err)?
        .read_to_string(&mut raw)
        .map_err(io_err)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    match format {
        LexiconFormat::Csv => AoaLexicon::from_csv_str(&name, &raw),
    }
}

impl AoaLexicon {
    /// Parses CSV text. Rows with a non-numeric, non-finite or non-positive
    /// age are skipped; the first row is treated as a header when its second
    /// column is not a number.
    pub fn from_csv_str(name: &str, data: &str) -> Result<Self, LexiconError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(data.as_bytes());

        let mut entries = HashMap::new();
        let mut warnings = LoadWarnings::default();
        for (row_idx, record) in reader.records().enumerate() {
            let record = record.map_err(|source| LexiconError::Csv {
                name: name.to_owned(),
                source,
            })?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let word = record.get(0).unwrap_or("").trim_start_matches('\u{feff}');
            let aoa = record.get(1).and_then(|v| v.parse::<f64>().ok());
            let Some(aoa) = aoa.filter(|a| a.is_finite() && *a > 0.0) else {
                if row_idx == 0 && record.get(1).is_some_and(|v| v.parse::<f64>().is_err()) {
                    warnings.header_skipped = true;
                } else {
                    warnings.malformed += 1;
                }
                continue;
            };
            let key = word.to_lowercase();
            if key.is_empty() || key.chars().any(char::is_whitespace) {
                warnings.malformed += 1;
                continue;
            }
            if entries.contains_key(&key) {
                warnings.duplicates += 1;
                continue;
            }
            entries.insert(key, aoa);
        }
        if entries.is_empty() {
            return Err(LexiconError::Empty {
                name: name.to_owned(),
                skipped: warnings.malformed,
            });
        }
        if warnings.duplicates > 0 || warnings.malformed > 0 {
            log::warn!(
                "lexicon {name}: {} duplicate and {} malformed rows skipped",
                warnings.duplicates,
                warnings.malformed
            );
        }
        Ok(Self {
            entries,
            source_name: name.to_owned(),
            warnings,
        })
    }

    /// Builds a lexicon directly from pairs. Keys are lowercased; the first
    /// occurrence of a word wins.
    pub fn from_pairs<I, S>(name: &str, pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut entries = HashMap::new();
        let mut warnings = LoadWarnings::default();
        for (word, aoa) in pairs {
            let key = word.as_ref().to_lowercase();
            if key.is_empty() || key.chars().any(char::is_whitespace) || !(aoa.is_finite() && aoa > 0.0) {
                warnings.malformed += 1;
                continue;
            }
            match entries.entry(key) {
                Entry::Occupied(_) => warnings.duplicates += 1,
                Entry::Vacant(v) => {
                    v.insert(aoa);
                }
            }
        }
        Self {
            entries,
            source_name: name.to_owned(),
            warnings,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn warnings(&self) -> &LoadWarnings {
        &self.warnings
    }

    /// Exact lookup of an already-normalized key.
    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    /// Looks `word` up through the [`normalize`] chain, stopping at the
    /// first candidate present in the table.
    pub fn lookup(&self, word: &str) -> Option<f64> {
        self.lookup_entry(word).map(|(_, aoa)| aoa)
    }

    /// Like [`lookup`](Self::lookup) but also returns the matched key.
    pub fn lookup_entry(&self, word: &str) -> Option<(String, f64)> {
        normalize(word)
            .into_iter()
            .find_map(|cand| self.entries.get(&cand).map(|&aoa| (cand, aoa)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Free-function form of [`AoaLexicon::lookup`].
pub fn lookup(lex: &AoaLexicon, word: &str) -> Option<f64> {
    lex.lookup(word)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn push_unique(out: &mut Vec<String>, cand: String) {
    if !cand.is_empty() && !out.contains(&cand) {
        out.push(cand);
    }
}

/// Stem candidates for an `-ed`/`-ing` stem: silent-e restored, bare, and
/// with a doubled final consonant undone.
fn stem_candidates(stem: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = stem.chars().collect();
    let Some(&last) = chars.last() else { return };
    if !matches!(last, 'e' | 'y' | 'w' | 'x') && !chars.ends_with(&['e', 'e']) {
        push_unique(out, format!("{stem}e"));
    }
    push_unique(out, stem.to_owned());
    if chars.len() >= 3 && last == chars[chars.len() - 2] && last.is_alphabetic() && !is_vowel(last) {
        push_unique(out, chars[..chars.len() - 1].iter().collect());
    }
}

fn inflection_candidates(word: &str, out: &mut Vec<String>) {
    let n = word.chars().count();
    if let Some(stem) = word.strip_suffix("ing").filter(|_| n >= 5) {
        stem_candidates(stem, out);
    } else if let Some(stem) = word.strip_suffix("ied").filter(|_| n >= 5) {
        push_unique(out, format!("{stem}y"));
        push_unique(out, format!("{stem}ie"));
    } else if let Some(stem) = word.strip_suffix("ed").filter(|_| n >= 4) {
        stem_candidates(stem, out);
    } else if let Some(stem) = word.strip_suffix("ies").filter(|_| n >= 5) {
        push_unique(out, format!("{stem}y"));
        push_unique(out, format!("{stem}ie"));
    } else if let Some(stem) = word.strip_suffix("es").filter(|_| n >= 4) {
        let sibilant = ["s", "x", "z", "ch", "sh", "o"].iter().any(|s| stem.ends_with(s));
        if sibilant {
            push_unique(out, stem.to_owned());
        }
        push_unique(out, format!("{stem}e"));
    } else if let Some(stem) = word.strip_suffix('s').filter(|_| n >= 3) {
        if !stem.ends_with('s') && !stem.ends_with('u') && !stem.ends_with('i') {
            push_unique(out, stem.to_owned());
        }
    }
}

fn chain_for(lower: &str, out: &mut Vec<String>) {
    push_unique(out, lower.to_owned());
    let base = lower
        .strip_suffix("'s")
        .or_else(|| lower.strip_suffix("\u{2019}s"))
        .or_else(|| lower.strip_suffix('\''))
        .or_else(|| lower.strip_suffix('\u{2019}'))
        .unwrap_or(lower);
    push_unique(out, base.to_owned());
    inflection_candidates(base, out);
}

/// Candidate lexicon keys for a surface token, most specific first:
/// the lowercased surface, the surface without a possessive suffix, then
/// inflection-stripped stems. Hyphenated compounds additionally fall back to
/// the chain of their final segment (`non-native` → `native`).
pub fn normalize(word: &str) -> Vec<String> {
    let lower = word.trim().to_lowercase();
    let mut out = Vec::new();
    if lower.is_empty() {
        return out;
    }
    chain_for(&lower, &mut out);
    if let Some((_, head)) = lower.rsplit_once('-') {
        if head.chars().any(char::is_alphabetic) {
            chain_for(head, &mut out);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_two_rows() {
        let lex = AoaLexicon::from_csv_str("t", "denote,11.24\nterm,8.28\n").unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.lookup("denote"), Some(11.24));
        assert_eq!(lex.lookup("Denote"), Some(11.24));
        assert_eq!(lex.lookup("zzqx"), None);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            AoaLexicon::from_csv_str("t", ""),
            Err(LexiconError::Empty { .. })
        ));
    }

    #[test]
    fn duplicates_first_wins() {
        let lex = AoaLexicon::from_csv_str("t", "cat,4.0\ncat,5.0\n").unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.lookup("cat"), Some(4.0));
        assert_eq!(lex.warnings().duplicates, 1);
    }

    #[test]
    fn header_and_crlf() {
        let lex = AoaLexicon::from_csv_str("t", "Word,AoA_Kup\r\ncat,4.0\r\ndog,x\r\n").unwrap();
        assert!(lex.warnings().header_skipped);
        assert_eq!(lex.warnings().malformed, 1);
        assert_eq!(lex.lookup("cat"), Some(4.0));
    }

    #[test]
    fn only_malformed_rows_is_an_error() {
        assert!(AoaLexicon::from_csv_str("t", "a,b\nc,d\n").is_err());
        assert!(AoaLexicon::from_csv_str("t", "a,-1\nc,NaN\n").is_err());
    }

    #[test]
    fn normalize_chains() {
        assert_eq!(normalize("Songs"), vec!["songs", "song"]);
        assert_eq!(
            normalize("investigated"),
            vec!["investigated", "investigate", "investigat"]
        );
        assert_eq!(normalize("origins"), vec!["origins", "origin"]);
        assert_eq!(normalize("cat's"), vec!["cat's", "cat"]);
        assert_eq!(normalize("running"), vec!["running", "runne", "runn", "run"]);
        assert_eq!(normalize("stories"), vec!["stories", "story", "storie"]);
        assert_eq!(normalize("boxes"), vec!["boxes", "box", "boxe"]);
        assert_eq!(normalize("non-native"), vec!["non-native", "native"]);
        assert!(normalize("").is_empty());
    }

    #[test]
    fn chain_order_prefers_least_transformed() {
        let lex = AoaLexicon::from_pairs("t", [("songs", 3.0), ("song", 5.0)]);
        assert_eq!(lex.lookup_entry("songs"), Some(("songs".into(), 3.0)));
        let lex = AoaLexicon::from_pairs("t", [("investigate", 9.0)]);
        assert_eq!(lex.lookup_entry("investigated"), Some(("investigate".into(), 9.0)));
    }

    #[test]
    fn load_missing_file() {
        let err = load_lexicon("/nonexistent/aoa.csv", LexiconFormat::Csv).unwrap_err();
        assert!(matches!(err, LexiconError::Io { .. }));
    }
}
