use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use crate::model::Language;
use crate::text::is_combining_mark;

const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");
const STOPWORDS_NL: &str = include_str!("../../data/stopwords_nl.txt");
const LEMMAS_EN: &str = include_str!("../../data/lemmas_en.tsv");
const LEMMAS_NL: &str = include_str!("../../data/lemmas_nl.tsv");

pub const MIN_TOKEN_CHARS: usize = 3;

/// Stop-word list and lemma lookup for one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessor {
    pub language: Language,
    stopwords: HashSet<String>,
    lemmas: HashMap<String, String>,
}

impl Preprocessor {
    pub fn new(
        language: Language,
        stopwords: HashSet<String>,
        lemmas: HashMap<String, String>,
    ) -> Self {
        Preprocessor {
            language,
            stopwords,
            lemmas,
        }
    }

    /// The lists bundled with the crate.
    pub fn shipped(language: Language) -> Self {
        let (stop, lemmas) = match language {
            Language::En => (STOPWORDS_EN, LEMMAS_EN),
            Language::Nl => (STOPWORDS_NL, LEMMAS_NL),
        };
        Self::new(language, parse_stopwords(stop), parse_lemmas(lemmas))
    }

    /// Stop words one per line, lemmas as `form<TAB>lemma`; `#` starts a comment line.
    pub fn from_files(language: Language, stopwords: &Path, lemmas: &Path) -> io::Result<Self> {
        Ok(Self::new(
            language,
            parse_stopwords(&fs::read_to_string(stopwords)?),
            parse_lemmas(&fs::read_to_string(lemmas)?),
        ))
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn lemma<'a>(&'a self, token: &'a str) -> &'a str {
        self.lemmas.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn preprocess(&self, text: &str) -> Vec<String> {
        preprocess(text, &self.stopwords, &self.lemmas)
    }
}

/// Lowercase letter runs (digits and punctuation split tokens), lemmatized, with
/// stop words and tokens under three characters removed. Order is preserved.
pub fn preprocess(
    text: &str,
    stopwords: &HashSet<String>,
    lemmas: &HashMap<String, String>,
) -> Vec<String> {
    text.split(|c: char| !(c.is_alphabetic() || is_combining_mark(c)))
        .filter(|s| !s.is_empty())
        .filter_map(|raw| {
            let lower = raw.to_lowercase();
            if stopwords.contains(&lower) {
                return None;
            }
            let lemma = lemmas.get(&lower).cloned().unwrap_or(lower);
            if stopwords.contains(&lemma) || lemma.chars().count() < MIN_TOKEN_CHARS {
                return None;
            }
            Some(lemma)
        })
        .collect()
}

fn content_lines(s: &str) -> impl Iterator<Item = &str> {
    s.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn parse_stopwords(s: &str) -> HashSet<String> {
    content_lines(s).map(str::to_lowercase).collect()
}

fn parse_lemmas(s: &str) -> HashMap<String, String> {
    content_lines(s)
        .filter_map(|l| {
            let (form, lemma) = l.split_once('\t')?;
            Some((form.trim().to_lowercase(), lemma.trim().to_lowercase()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_lists_load() {
        for lang in Language::ALL {
            let p = Preprocessor::shipped(lang);
            assert!(p.stopwords.len() > 50, "{lang}");
            assert!(p.lemmas.len() > 50, "{lang}");
        }
    }

    #[test]
    fn rules_apply_in_order() {
        let stop: HashSet<String> = ["the".to_string()].into();
        let lemmas: HashMap<String, String> = [
            ("dogs".to_string(), "dog".to_string()),
            ("oxen".to_string(), "ox".to_string()),
        ]
        .into();
        assert_eq!(
            preprocess("The 2 big dogs!", &stop, &lemmas),
            ["big", "dog"]
        );
        // a lemma shorter than three characters is dropped even if the surface form is long enough
        assert_eq!(
            preprocess("oxen x2y abc3def", &stop, &lemmas),
            ["abc", "def"]
        );
        assert!(preprocess("", &stop, &lemmas).is_empty());
    }
}
