//! Porter stemmer, NLTK-extensions variant (the `nltk.stem.PorterStemmer`
//! default mode).

use std::collections::HashMap;
use std::sync::LazyLock;

pub trait Stemmer {
    fn stem(&self, word: &str) -> String;
}

impl<F: Fn(&str) -> String> Stemmer for F {
    fn stem(&self, word: &str) -> String {
        self(word)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PorterStemmer;

static IRREGULAR: LazyLock<HashMap<&'static str, &'static str>> = LazyLock::new(|| {
    let forms: [(&str, &[&str]); 12] = [
        ("sky", &["sky", "skies"]),
        ("die", &["dying"]),
        ("lie", &["lying"]),
        ("tie", &["tying"]),
        ("news", &["news"]),
        ("inning", &["innings", "inning"]),
        ("outing", &["outings", "outing"]),
        ("canning", &["cannings", "canning"]),
        ("howe", &["howe"]),
        ("proceed", &["proceed"]),
        ("exceed", &["exceed"]),
        ("succeed", &["succeed"]),
    ];
    forms
        .iter()
        .flat_map(|(stem, words)| words.iter().map(move |w| (*w, *stem)))
        .collect()
});

type Word = Vec<char>;
type Condition<'a> = Option<Box<dyn Fn(&[char]) -> bool + 'a>>;

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn is_consonant(word: &[char], i: usize) -> bool {
    if is_vowel(word[i]) {
        return false;
    }
    if word[i] == 'y' {
        let mut i = i;
        let mut negate = false;
        while i > 0 && word[i] == 'y' {
            negate = !negate;
            i -= 1;
        }
        return (!is_vowel(word[i])) != negate;
    }
    true
}

fn consonant_flags(word: &[char]) -> Vec<bool> {
    let mut flags: Vec<bool> = Vec::with_capacity(word.len());
    for (i, &c) in word.iter().enumerate() {
        let flag = if is_vowel(c) {
            false
        } else if c == 'y' {
            i == 0 || !flags[i - 1]
        } else {
            true
        };
        flags.push(flag);
    }
    flags
}

/// Number of vowel-consonant sequences.
fn measure(stem: &[char]) -> usize {
    let flags = consonant_flags(stem);
    flags.windows(2).filter(|w| !w[0] && w[1]).count()
}

fn contains_vowel(stem: &[char]) -> bool {
    !consonant_flags(stem).iter().all(|&c| c)
}

fn ends_double_consonant(word: &[char]) -> bool {
    let n = word.len();
    n >= 2 && word[n - 1] == word[n - 2] && is_consonant(word, n - 1)
}

fn ends_cvc(word: &[char]) -> bool {
    let n = word.len();
    (n >= 3
        && is_consonant(word, n - 3)
        && !is_consonant(word, n - 2)
        && is_consonant(word, n - 1)
        && !matches!(word[n - 1], 'w' | 'x' | 'y'))
        || (n == 2 && !is_consonant(word, 0) && is_consonant(word, 1))
}

fn ends_with(word: &[char], suffix: &str) -> bool {
    let s: Word = suffix.chars().collect();
    word.len() >= s.len() && word[word.len() - s.len()..] == s[..]
}

fn strip(word: &[char], suffix: &str) -> Word {
    word[..word.len() - suffix.chars().count()].to_vec()
}

fn join(stem: &[char], rep: &str) -> Word {
    let mut out = stem.to_vec();
    out.extend(rep.chars());
    out
}

struct Rule<'a> {
    suffix: &'a str,
    rep: String,
    cond: Condition<'a>,
}

fn r<'a>(suffix: &'a str, rep: &str, cond: Condition<'a>) -> Rule<'a> {
    Rule {
        suffix,
        rep: rep.to_string(),
        cond,
    }
}

fn positive(stem: &[char]) -> bool {
    measure(stem) > 0
}

fn pos<'a>() -> Condition<'a> {
    Some(Box::new(positive))
}

fn gt1<'a>() -> Condition<'a> {
    Some(Box::new(|s: &[char]| measure(s) > 1))
}

/// First matching suffix decides; a failed condition returns the word as is.
fn apply_rules(word: &[char], rules: &[Rule<'_>]) -> Word {
    for rule in rules {
        if rule.suffix == "*d" && ends_double_consonant(word) {
            let stem = &word[..word.len() - 2];
            return match &rule.cond {
                Some(c) if !c(stem) => word.to_vec(),
                _ => join(stem, &rule.rep),
            };
        }
        if ends_with(word, rule.suffix) {
            let stem = strip(word, rule.suffix);
            return match &rule.cond {
                Some(c) if !c(&stem) => word.to_vec(),
                _ => join(&stem, &rule.rep),
            };
        }
    }
    word.to_vec()
}

fn step1a(word: &[char]) -> Word {
    if ends_with(word, "ies") && word.len() == 4 {
        return join(&strip(word, "ies"), "ie");
    }
    apply_rules(
        word,
        &[r("sses", "ss", None), r("ies", "i", None), r("ss", "ss", None), r("s", "", None)],
    )
}

fn step1b(word: &[char]) -> Word {
    if ends_with(word, "ied") {
        let rep = if word.len() == 4 { "ie" } else { "i" };
        return join(&strip(word, "ied"), rep);
    }
    if ends_with(word, "eed") {
        let stem = strip(word, "eed");
        return if measure(&stem) > 0 { join(&stem, "ee") } else { word.to_vec() };
    }
    let mut intermediate = None;
    for suffix in ["ed", "ing"] {
        if ends_with(word, suffix) {
            let stem = strip(word, suffix);
            if contains_vowel(&stem) {
                intermediate = Some(stem);
                break;
            }
        }
    }
    let Some(stem) = intermediate else {
        return word.to_vec();
    };
    let last = *stem.last().expect("stem with a vowel is non-empty");
    let last_s = last.to_string();
    apply_rules(
        &stem,
        &[
            r("at", "ate", None),
            r("bl", "ble", None),
            r("iz", "ize", None),
            r("*d", &last_s, Some(Box::new(move |_: &[char]| !matches!(last, 'l' | 's' | 'z')))),
            r("", "e", Some(Box::new(|s: &[char]| measure(s) == 1 && ends_cvc(s)))),
        ],
    )
}

fn step1c(word: &[char]) -> Word {
    apply_rules(
        word,
        &[r(
            "y",
            "i",
            Some(Box::new(|s: &[char]| s.len() > 1 && is_consonant(s, s.len() - 1))),
        )],
    )
}

fn step2(word: &[char]) -> Word {
    if ends_with(word, "alli") && positive(&strip(word, "alli")) {
        return step2(&join(&strip(word, "alli"), "al"));
    }
    let word_minus3: Word = word[..word.len().saturating_sub(3)].to_vec();
    let rules = [
        r("ational", "ate", pos()),
        r("tional", "tion", pos()),
        r("enci", "ence", pos()),
        r("anci", "ance", pos()),
        r("izer", "ize", pos()),
        r("bli", "ble", pos()),
        r("alli", "al", pos()),
        r("entli", "ent", pos()),
        r("eli", "e", pos()),
        r("ousli", "ous", pos()),
        r("ization", "ize", pos()),
        r("ation", "ate", pos()),
        r("ator", "ate", pos()),
        r("alism", "al", pos()),
        r("iveness", "ive", pos()),
        r("fulness", "ful", pos()),
        r("ousness", "ous", pos()),
        r("aliti", "al", pos()),
        r("iviti", "ive", pos()),
        r("biliti", "ble", pos()),
        r("fulli", "ful", pos()),
        r("logi", "log", Some(Box::new(move |_: &[char]| positive(&word_minus3)))),
    ];
    apply_rules(word, &rules)
}

fn step3(word: &[char]) -> Word {
    apply_rules(
        word,
        &[
            r("icate", "ic", pos()),
            r("ative", "", pos()),
            r("alize", "al", pos()),
            r("iciti", "ic", pos()),
            r("ical", "ic", pos()),
            r("ful", "", pos()),
            r("ness", "", pos()),
        ],
    )
}

fn step4(word: &[char]) -> Word {
    let rules = [
        r("al", "", gt1()),
        r("ance", "", gt1()),
        r("ence", "", gt1()),
        r("er", "", gt1()),
        r("ic", "", gt1()),
        r("able", "", gt1()),
        r("ible", "", gt1()),
        r("ant", "", gt1()),
        r("ement", "", gt1()),
        r("ment", "", gt1()),
        r("ent", "", gt1()),
        r(
            "ion",
            "",
            Some(Box::new(|s: &[char]| measure(s) > 1 && matches!(s.last(), Some('s' | 't')))),
        ),
        r("ou", "", gt1()),
        r("ism", "", gt1()),
        r("ate", "", gt1()),
        r("iti", "", gt1()),
        r("ous", "", gt1()),
        r("ive", "", gt1()),
        r("ize", "", gt1()),
    ];
    apply_rules(word, &rules)
}

fn step5a(word: &[char]) -> Word {
    if ends_with(word, "e") {
        let stem = strip(word, "e");
        let m = measure(&stem);
        if m > 1 || (m == 1 && !ends_cvc(&stem)) {
            return stem;
        }
    }
    word.to_vec()
}

fn step5b(word: &[char]) -> Word {
    let head: Word = word[..word.len().saturating_sub(1)].to_vec();
    apply_rules(word, &[r("ll", "l", Some(Box::new(move |_: &[char]| measure(&head) > 1)))])
}

impl Stemmer for PorterStemmer {
    fn stem(&self, word: &str) -> String {
        let lower = word.to_lowercase();
        if let Some(s) = IRREGULAR.get(lower.as_str()) {
            return s.to_string();
        }
        if word.chars().count() <= 2 {
            return lower;
        }
        let mut w: Word = lower.chars().collect();
        w = step1a(&w);
        w = step1b(&w);
        w = step1c(&w);
        w = step2(&w);
        w = step3(&w);
        w = step4(&w);
        w = step5a(&w);
        w = step5b(&w);
        w.into_iter().collect()
    }
}
