//! Rule-based claim splitting: paragraphs on blank lines, then sentences on
//! terminal punctuation, skipping known abbreviations and initials.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::types::{Claim, Span};

/// Lowercased tokens (with their final period) that never end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "approx.", "apr.", "aug.", "ave.", "capt.", "cf.", "co.", "col.", "corp.", "dec.", "dept.", "dr.", "e.g.", "est.",
    "etc.", "feb.", "fig.", "fri.", "gen.", "gov.", "i.e.", "inc.", "jan.", "jr.", "jul.", "jun.", "lt.", "ltd.",
    "mar.", "mon.", "mr.", "mrs.", "ms.", "mt.", "no.", "nov.", "oct.", "ph.d.", "prof.", "rep.", "rev.", "sat.",
    "sen.", "sep.", "sept.", "sgt.", "sr.", "st.", "sun.", "thu.", "tue.", "u.k.", "u.n.", "u.s.", "u.s.a.", "vol.",
    "vs.", "wed.",
];

const TERMINALS: [char; 4] = ['.', '!', '?', '\u{2026}'];
const CLOSERS: [char; 7] = ['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}'];

/// Splits `document` into one claim per sentence, in document order.
///
/// Spans are character offsets into `document`. Spans never overlap, and
/// together they cover every non-whitespace character exactly once.
pub fn split_claims_rule(document: &str) -> Vec<Claim> {
    let chars: Vec<char> = document.chars().collect();
    let mut claims = Vec::new();
    for (start, end) in paragraphs(&chars) {
        for (s, e) in sentences(&chars, start, end) {
            let text: String = chars[s..e].iter().collect();
            claims.push(Claim {
                id: format!("c{}", claims.len() + 1),
                text,
                source_span: Some(Span::new(s, e)),
                context: None,
            });
        }
    }
    claims
}

/// Sentence spans only, for callers that need segmentation without claims.
pub fn sentence_spans(document: &str) -> Vec<Span> {
    split_claims_rule(document)
        .into_iter()
        .filter_map(|c| c.source_span)
        .collect()
}

/// `[start, end)` char ranges of maximal runs of non-blank lines.
fn paragraphs(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut para_start: Option<usize> = None;
    let mut line_start = 0;
    let mut i = 0;
    while i <= chars.len() {
        if i == chars.len() || chars[i] == '\n' {
            let blank = chars[line_start..i].iter().all(|c| c.is_whitespace());
            match (blank, para_start) {
                (true, Some(s)) => {
                    out.push((s, line_start));
                    para_start = None;
                }
                (false, None) => para_start = Some(line_start),
                _ => {}
            }
            line_start = i + 1;
        }
        i += 1;
    }
    if let Some(s) = para_start {
        out.push((s, chars.len()));
    }
    out
}

fn sentences(chars: &[char], start: usize, end: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = start;
    loop {
        while i < end && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= end {
            break;
        }
        let sent_start = i;
        let mut boundary = None;
        while i < end {
            if TERMINALS.contains(&chars[i]) {
                let punct_at = i;
                let mut j = i + 1;
                while j < end && (TERMINALS.contains(&chars[j]) || CLOSERS.contains(&chars[j])) {
                    j += 1;
                }
                let followed_by_space = j >= end || chars[j].is_whitespace();
                if followed_by_space && !is_abbreviation(chars, sent_start, punct_at, j) {
                    boundary = Some(j);
                    break;
                }
                i = j;
            } else {
                i += 1;
            }
        }
        let sent_end = boundary.unwrap_or_else(|| trim_end(chars, sent_start, end));
        out.push((sent_start, sent_end));
        i = sent_end;
    }
    out
}

fn trim_end(chars: &[char], start: usize, mut end: usize) -> usize {
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    end
}

/// Whether the period at `dot` closes an abbreviation or an initial rather
/// than a sentence. `after` is one past the trailing punctuation run.
fn is_abbreviation(chars: &[char], floor: usize, dot: usize, after: usize) -> bool {
    if chars[dot] != '.' || after != dot + 1 {
        return false;
    }
    let mut word_start = dot;
    while word_start > floor && !chars[word_start - 1].is_whitespace() {
        word_start -= 1;
    }
    // strip opening brackets/quotes
    while word_start < dot && matches!(chars[word_start], '(' | '[' | '"' | '\'' | '\u{201c}') {
        word_start += 1;
    }
    let word: String = chars[word_start..=dot].iter().flat_map(|c| c.to_lowercase()).collect();
    if ABBREVIATIONS.contains(&word.as_str()) {
        return true;
    }
    // single capital initial such as the "J." in "J. Smith"
    dot - word_start == 1 && chars[word_start].is_uppercase()
}
