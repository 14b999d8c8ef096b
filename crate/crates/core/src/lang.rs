//! Language detection and the English view of a query.
//!
//! Detection is a Unicode-script histogram: Devanagari → "hi", Bengali script
//! (which Assamese uses) → "as", Latin → "en". Mixed scripts resolve by
//! majority code-point share; ties resolve to "en"; text with no letters from
//! the configured scripts is "und". Code-mixed queries written in Latin
//! script are therefore tagged "en" — a known limitation of the default
//! detector. A statistical detector can be swapped in behind
//! [`detect_language`] without touching callers.
//!
//! The English view is computed once per query and consumed only by the
//! reranker and the crisis-subtype classifier; sparse and dense retrieval
//! always see the original query.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{ProviderError, TranslatorProvider};

/// Language tag from the configured set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LanguageTag {
    #[serde(rename = "en")]
    En,
    #[serde(rename = "hi")]
    Hi,
    #[serde(rename = "as")]
    As,
    /// Detection confidence below threshold (no classifiable letters).
    #[serde(rename = "und")]
    Und,
}

impl LanguageTag {
    pub fn code(&self) -> &'static str {
        match self {
            LanguageTag::En => "en",
            LanguageTag::Hi => "hi",
            LanguageTag::As => "as",
            LanguageTag::Und => "und",
        }
    }
}

impl std::fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Error)]
pub enum LangError {
    #[error("cannot detect language of empty text")]
    EmptyText,
    #[error("translation failed; original query preserved: {original}")]
    TranslationFailed { original: String },
}

/// Per-script letter tallies backing a detection decision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScriptCounts {
    pub latin: usize,
    pub devanagari: usize,
    pub bengali: usize,
    pub other_letters: usize,
}

/// Classify each letter of `text` by script range.
pub fn script_counts(text: &str) -> ScriptCounts {
    let mut c = ScriptCounts::default();
    for ch in text.chars() {
        if !ch.is_alphabetic() {
            continue;
        }
        let cp = ch as u32;
        if ch.is_ascii_alphabetic() || (0x00C0..=0x024F).contains(&cp) {
            c.latin += 1;
        } else if (0x0900..=0x097F).contains(&cp) {
            c.devanagari += 1;
        } else if (0x0980..=0x09FF).contains(&cp) {
            c.bengali += 1;
        } else {
            c.other_letters += 1;
        }
    }
    c
}

/// Detect the query language from its script histogram. Deterministic for
/// fixed input; errors only on empty (or all-whitespace) text.
pub fn detect_language(text: &str) -> Result<LanguageTag, LangError> {
    if text.trim().is_empty() {
        return Err(LangError::EmptyText);
    }
    let c = script_counts(text);
    let max = c.latin.max(c.devanagari).max(c.bengali);
    if max == 0 {
        return Ok(LanguageTag::Und);
    }
    // Ties (two scripts sharing the maximum) resolve to "en".
    let winners = [c.latin == max, c.devanagari == max, c.bengali == max]
        .iter()
        .filter(|&&w| w)
        .count();
    if winners > 1 || c.latin == max {
        return Ok(LanguageTag::En);
    }
    if c.devanagari == max {
        Ok(LanguageTag::Hi)
    } else {
        Ok(LanguageTag::As)
    }
}

/// The English view of a query: the identity when the query is already
/// English (regardless of translator behavior), the translator's output
/// otherwise. The original query is never mutated; on translator failure the
/// error carries it so callers can degrade to original-language-only
/// processing.
pub fn english_view(
    query: &str,
    lang: LanguageTag,
    translator: &dyn TranslatorProvider,
) -> Result<String, LangError> {
    if lang == LanguageTag::En {
        return Ok(query.to_string());
    }
    match translator.translate(query, "en") {
        Ok(t) => Ok(t),
        Err(ProviderError::Translation { original }) => {
            Err(LangError::TranslationFailed { original })
        }
        Err(_) => Err(LangError::TranslationFailed {
            original: query.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{FailingTranslator, TableTranslator};

    #[test]
    fn latin_english_detected() {
        assert_eq!(detect_language("What foods increase iron?").unwrap(), LanguageTag::En);
    }

    // Script-range oracle: every letter must fall in the expected Unicode
    // block before the detector's verdict is trusted.
    fn all_letters_in(text: &str, lo: u32, hi: u32) -> bool {
        text.chars()
            .filter(|c| c.is_alphabetic())
            .all(|c| (lo..=hi).contains(&(c as u32)))
    }

    #[test]
    fn devanagari_detected_as_hindi() {
        let text = "मुझे बुखार है";
        assert!(all_letters_in(text, 0x0900, 0x097F));
        assert_eq!(detect_language(text).unwrap(), LanguageTag::Hi);
    }

    #[test]
    fn bengali_script_detected_as_assamese() {
        let text = "মোৰ জ্বৰ আছে";
        assert!(all_letters_in(text, 0x0980, 0x09FF));
        assert_eq!(detect_language(text).unwrap(), LanguageTag::As);
    }

    #[test]
    fn empty_text_errors() {
        assert!(matches!(detect_language("   "), Err(LangError::EmptyText)));
    }

    #[test]
    fn digits_only_is_und() {
        assert_eq!(detect_language("1234 ??").unwrap(), LanguageTag::Und);
    }

    #[test]
    fn mixed_script_resolves_by_majority() {
        // Three Devanagari letters vs two Latin.
        assert_eq!(detect_language("बुखार ok").unwrap(), LanguageTag::Hi);
        // Majority Latin.
        assert_eq!(detect_language("bukhar hai को").unwrap(), LanguageTag::En);
    }

    #[test]
    fn english_view_is_identity_for_english() {
        // Even a failing translator is never consulted for English queries.
        let out = english_view("hello", LanguageTag::En, &FailingTranslator).unwrap();
        assert_eq!(out, "hello");
    }

    #[test]
    fn english_view_uses_translator_for_other_languages() {
        let t = TableTranslator::default().with("X", "Y");
        assert_eq!(english_view("X", LanguageTag::Hi, &t).unwrap(), "Y");
    }

    #[test]
    fn translator_failure_preserves_original() {
        match english_view("मदद", LanguageTag::Hi, &FailingTranslator) {
            Err(LangError::TranslationFailed { original }) => assert_eq!(original, "मदद"),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
