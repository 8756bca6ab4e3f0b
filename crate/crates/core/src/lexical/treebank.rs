//! Penn-Treebank-style word tokenizer.
//!
//! A rule-for-rule port of NLTK's `NLTKWordTokenizer` (the word-level stage
//! of `nltk.word_tokenize`). Regexes are applied in the same order with the
//! same substitutions; Python's `$` (end, or before a final newline) is
//! spelled `(?=\n?\z)`.

use std::sync::LazyLock;

use fancy_regex::Regex;

struct Rule {
    re: Regex,
    rep: &'static str,
}

fn rule(pattern: &str, rep: &'static str) -> Rule {
    Rule {
        re: Regex::new(pattern).expect("static tokenizer regex"),
        rep,
    }
}

const END: &str = r"(?=\n?\z)";

struct Rules {
    starting_quotes: Vec<Rule>,
    punctuation: Vec<Rule>,
    parens: Rule,
    double_dashes: Rule,
    ending_quotes: Vec<Rule>,
    contractions: Vec<Rule>,
}

static RULES: LazyLock<Rules> = LazyLock::new(|| Rules {
    starting_quotes: vec![
        rule(r"([«“‘„]|[`]+)", " ${1} "),
        rule(r#"^""#, "``"),
        rule(r"(``)", " ${1} "),
        rule(r#"([ (\[{<])("|'{2})"#, "${1} `` "),
        rule(r"(?i)(?<!\w)(')(?!(?:re|ve|ll|m|t|s|d|n)\b)(?=\w)", "${1} "),
    ],
    punctuation: vec![
        rule(&format!(r#"([^.])(\.)([\])}}>"'»”’ ]*)\s*{END}"#), "${1} ${2} ${3} "),
        rule(r"([:,])([^\d])", " ${1} ${2}"),
        rule(&format!(r"([:,]){END}"), " ${1} "),
        rule(r"\.{2,}", " ${0} "),
        rule(r"[;@#$%&]", " ${0} "),
        rule(r"[\x{2012}-\x{2015}]", " ${0} "),
        rule(&format!(r#"([^.])(\.)([\])}}>"']*)\s*{END}"#), "${1} ${2}${3} "),
        rule(r"[?!]", " ${0} "),
        rule(r"([^'])' ", "${1} ' "),
        rule(r"[*]", " ${0} "),
    ],
    parens: rule(r"[\]\[(){}<>]", " ${0} "),
    double_dashes: rule(r"--", " -- "),
    ending_quotes: vec![
        rule(r"([»”’])", " ${1} "),
        rule(r"''", " '' "),
        rule(r#"""#, " '' "),
        rule(r"\s+", " "),
        rule(r"([^' ])('[sS]|'[mM]|'[dD]|') ", "${1} ${2} "),
        rule(r"([^' ])('ll|'LL|'re|'RE|'ve|'VE|n't|N'T) ", "${1} ${2} "),
    ],
    contractions: vec![
        rule(r"(?i)\b(can)(not)\b", " ${1} ${2} "),
        rule(r"(?i)\b(d)('ye)\b", " ${1} ${2} "),
        rule(r"(?i)\b(gim)(me)\b", " ${1} ${2} "),
        rule(r"(?i)\b(gon)(na)\b", " ${1} ${2} "),
        rule(r"(?i)\b(got)(ta)\b", " ${1} ${2} "),
        rule(r"(?i)\b(lem)(me)\b", " ${1} ${2} "),
        rule(r"(?i)\b(more)('n)\b", " ${1} ${2} "),
        rule(r"(?i)\b(wan)(na)(?=\s)", " ${1} ${2} "),
        rule(r"(?i) ('t)(is)\b", " ${1} ${2} "),
        rule(r"(?i) ('t)(was)\b", " ${1} ${2} "),
    ],
});

fn apply(text: String, r: &Rule) -> String {
    match r.re.replace_all(&text, r.rep) {
        std::borrow::Cow::Borrowed(_) => text,
        std::borrow::Cow::Owned(s) => s,
    }
}

/// Shared, stateless word tokenizer handle.
#[derive(Clone, Copy, Debug, Default)]
pub struct WordTokenizer;

impl WordTokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        word_tokenize(text)
    }
}

pub fn word_tokenize(text: &str) -> Vec<String> {
    let rules = &*RULES;
    let mut text = text.to_string();
    for r in &rules.starting_quotes {
        text = apply(text, r);
    }
    for r in &rules.punctuation {
        text = apply(text, r);
    }
    text = apply(text, &rules.parens);
    text = apply(text, &rules.double_dashes);
    let mut text = format!(" {text} ");
    for r in &rules.ending_quotes {
        text = apply(text, r);
    }
    for r in &rules.contractions {
        text = apply(text, r);
    }
    text.split_whitespace().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_and_bang() {
        assert_eq!(word_tokenize("don't panic!"), ["do", "n't", "panic", "!"]);
    }

    #[test]
    fn empty_and_single() {
        assert!(word_tokenize("").is_empty());
        assert!(word_tokenize("   ").is_empty());
        assert_eq!(word_tokenize("hello"), ["hello"]);
    }

    #[test]
    fn golden_fixture_matches_reference() {
        #[derive(serde::Deserialize)]
        struct Case {
            text: String,
            tokens: Vec<String>,
        }
        let raw = include_str!("../../tests/fixtures/treebank_golden.json");
        let cases: Vec<Case> = serde_json::from_str(raw).unwrap();
        for c in cases {
            assert_eq!(word_tokenize(&c.text), c.tokens, "input: {:?}", c.text);
        }
    }
}
