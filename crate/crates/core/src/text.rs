//! Tokenization and case folding shared by the matcher, markers and lexicon.

/// Combining diacritical marks stay attached to their base letter.
pub fn is_combining_mark(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// Hyphen and apostrophe variants; word-internal when flanked by word characters.
pub fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2010}' | '\u{2011}' | '\u{2019}')
}

fn normalize_joiner(c: char) -> char {
    match c {
        '\u{2010}' | '\u{2011}' => '-',
        '\u{2019}' => '\'',
        other => other,
    }
}

/// Unicode lowercase with typographic hyphens and apostrophes mapped to ASCII.
/// Diacritics are kept.
pub fn fold(text: &str) -> String {
    text.chars()
        .map(normalize_joiner)
        .flat_map(char::to_lowercase)
        .collect()
}

/// A token and its byte span in the input it was cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits into maximal runs of word characters, allowing single joiners between
/// word characters ("half-breed", "homo's"). When `folded` is set each token is
/// passed through [`fold`]; spans always refer to the original text.
pub fn word_tokens(text: &str, folded: bool) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !is_word_char(chars[i].1) {
            i += 1;
            continue;
        }
        let start = i;
        let mut j = i + 1;
        while j < chars.len() {
            let c = chars[j].1;
            if is_word_char(c) {
                j += 1;
            } else if is_joiner(c) && j + 1 < chars.len() && is_word_char(chars[j + 1].1) {
                j += 2;
            } else {
                break;
            }
        }
        let s = chars[start].0;
        let e = chars.get(j).map(|(b, _)| *b).unwrap_or(text.len());
        let raw = &text[s..e];
        let tok = if folded {
            fold(raw)
        } else {
            raw.chars().map(normalize_joiner).collect()
        };
        out.push(Token {
            text: tok,
            start: s,
            end: e,
        });
        i = j;
    }
    out
}

/// Folded token texts only.
pub fn folded_words(text: &str) -> Vec<String> {
    word_tokens(text, true)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

/// First occurrence of `needle` as a contiguous token run inside `haystack`.
pub fn find_sequence<S: AsRef<str>>(haystack: &[S], needle: &[S]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| {
        haystack[i..i + needle.len()]
            .iter()
            .zip(needle)
            .all(|(a, b)| a.as_ref() == b.as_ref())
    })
}

/// Uppercases the first character only ("black" → "Black").
pub fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
