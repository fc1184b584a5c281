//! Seeded synthetic C-like corpora for desk-scale experiments.
//!
//! `RiskyCalls` separates the classes by which copy/format calls a function
//! uses (`strcpy(buf,` versus `strncpy(buf,` and so on). `Contextual` puts the
//! same call in both classes and moves the signal into the rarely repeated
//! length tokens passed to it, whose spelling and co-occurring neighbours are
//! class-specific.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledFunction};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthProfile {
    #[default]
    RiskyCalls,
    Contextual,
}

impl FromStr for SynthProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "risky_calls" | "risky-calls" => Ok(SynthProfile::RiskyCalls),
            "contextual" => Ok(SynthProfile::Contextual),
            _ => Err(Error::value(format!("unknown profile {s:?}; expected risky_calls or contextual"))),
        }
    }
}

impl fmt::Display for SynthProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthProfile::RiskyCalls => "risky_calls",
            SynthProfile::Contextual => "contextual",
        })
    }
}

const RISKY: &[&str] = &[
    "strcpy(buf, src);\n",
    "strcat(buf, src);\n",
    "gets(buf);\n",
    "sprintf(buf, \"%s\", src);\n",
    "memcpy(buf, src, strlen(src));\n",
    "scanf(\"%s\", buf);\n",
];

const SAFE: &[&str] = &[
    "strncpy(buf, src, sizeof(buf) - 1);\n",
    "strncat(buf, src, sizeof(buf) - strlen(buf) - 1);\n",
    "fgets(buf, sizeof(buf), stdin);\n",
    "snprintf(buf, sizeof(buf), \"%s\", src);\n",
    "memcpy(buf, src, MIN(len, sizeof(buf)));\n",
    "scanf(\"%15s\", buf);\n",
];

const FILLER: &[&str] = &[
    "int i = 0;\n",
    "i++;\n",
    "count += 1;\n",
    "printf(\"%d\\n\", i);\n",
    "if (i <= 10) {\n",
    "}\n",
    "total = total * 2;\n",
    "flag = !flag;\n",
    "log_msg(\"step\");\n",
    "x = y + z;\n",
    "ptr = NULL;\n",
    "return;\n",
];

const TYPES: &[&str] = &["void", "int", "static void", "static int"];
const NAMES: &[&str] = &[
    "parse_input",
    "copy_name",
    "read_field",
    "handle_request",
    "load_config",
    "set_title",
    "store_user",
    "format_msg",
];
const SIZES: &[&str] = &["8", "16", "32", "64", "128", "256"];

/// Length-argument spellings for the contextual profile: one stem family per
/// class, many numbered variants.
const CONTEXT_VARIANTS: usize = 60;
const UNCHECKED_STEMS: &[&str] = &["user_len", "raw_count", "input_size"];
const CHECKED_STEMS: &[&str] = &["bounded_len", "clamped_count", "capped_size"];
const UNCHECKED_NEIGHBOURS: &[&str] = &["recv(sock,", "read_header(pkt,", "atoi(argv[1]);\n"];
const CHECKED_NEIGHBOURS: &[&str] = &["MIN(limit,", "clamp(limit,", "assert(n < cap);\n"];

fn header(r: &mut Rng) -> String {
    let ty = TYPES.choose(r).expect("non-empty");
    let name = NAMES.choose(r).expect("non-empty");
    let size = SIZES.choose(r).expect("non-empty");
    format!("{ty} {name}(const char *src) {{\n    char buf[{size}];\n")
}

fn filler(r: &mut Rng, count: usize) -> Vec<&'static str> {
    (0..count).map(|_| *FILLER.choose(r).expect("non-empty")).collect()
}

fn risky_calls(r: &mut Rng, label: Label) -> String {
    let pool = if label == Label::Vulnerable { RISKY } else { SAFE };
    let lines = r.random_range(1..=4);
    let mut body: Vec<&str> = filler(r, lines);
    for _ in 0..r.random_range(1..=2) {
        body.push(pool.choose(r).expect("non-empty"));
    }
    body.shuffle(r);
    let mut s = header(r);
    body.iter().for_each(|line| {
        s.push_str("    ");
        s.push_str(line);
    });
    s.push_str("}\n");
    s
}

fn contextual(r: &mut Rng, label: Label) -> String {
    let (stems, neighbours) = if label == Label::Vulnerable {
        (UNCHECKED_STEMS, UNCHECKED_NEIGHBOURS)
    } else {
        (CHECKED_STEMS, CHECKED_NEIGHBOURS)
    };
    let stem = stems.choose(r).expect("non-empty");
    let variant = r.random_range(0..CONTEXT_VARIANTS);
    let name = format!("{stem}{variant}");
    let neighbour = neighbours.choose(r).expect("non-empty");
    let lines = r.random_range(1..=3);
    let mut body: Vec<String> = filler(r, lines).into_iter().map(String::from).collect();
    body.push(format!("n = {neighbour} {name});\n"));
    body.shuffle(r);
    let mut s = header(r);
    body.iter().for_each(|line| {
        s.push_str("    ");
        s.push_str(line);
    });
    // the same call in both classes; only the length token differs
    s.push_str(&format!("    memcpy(buf, src, {name});\n}}\n"));
    s
}

/// `n` functions, classes balanced within one, `round(noise * n)` labels
/// flipped (split evenly between the classes), order shuffled.
pub fn generate_synthetic_corpus(n: usize, profile: SynthProfile, noise: f64, seed: u64) -> Result<Vec<LabeledFunction>> {
    if n < 10 {
        return Err(Error::value(format!("synthetic corpus needs n >= 10, got {n}")));
    }
    if !(0.0..0.5).contains(&noise) {
        return Err(Error::value(format!("noise {noise} outside [0, 0.5)")));
    }
    let mut r = rng::seeded(seed);
    let mut items: Vec<(String, Label)> = (0..n)
        .map(|k| {
            let label = if k < n / 2 { Label::Safe } else { Label::Vulnerable };
            let source = match profile {
                SynthProfile::RiskyCalls => risky_calls(&mut r, label),
                SynthProfile::Contextual => contextual(&mut r, label),
            };
            (source, label)
        })
        .collect();

    let flips = (noise * n as f64).round() as usize;
    let safe: Vec<usize> = (0..n / 2).collect();
    let vulnerable: Vec<usize> = (n / 2..n).collect();
    // the odd flip goes from the larger class so balance stays within one
    let from_vulnerable = flips.div_ceil(2);
    let from_safe = flips / 2;
    let mut chosen: Vec<usize> = safe.choose_multiple(&mut r, from_safe).copied().collect();
    chosen.extend(vulnerable.choose_multiple(&mut r, from_vulnerable).copied());
    for i in chosen {
        items[i].1 = items[i].1.flipped();
    }
    items.shuffle(&mut r);
    items
        .into_iter()
        .map(|(s, l)| LabeledFunction::new(s, l))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balance(data: &[LabeledFunction]) -> (usize, usize) {
        let pos = data.iter().filter(|f| f.label == Label::Vulnerable).count();
        (data.len() - pos, pos)
    }

    #[test]
    fn ten_items_are_balanced() {
        let d = generate_synthetic_corpus(10, SynthProfile::RiskyCalls, 0.0, 3).unwrap();
        assert_eq!(balance(&d), (5, 5));
    }

    #[test]
    fn noise_keeps_balance_within_one() {
        for n in [11, 101, 2000] {
            let (a, b) = balance(&generate_synthetic_corpus(n, SynthProfile::Contextual, 0.05, 9).unwrap());
            assert!(a.abs_diff(b) <= 1, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic_corpus(200, SynthProfile::RiskyCalls, 0.1, 1).unwrap();
        let b = generate_synthetic_corpus(200, SynthProfile::RiskyCalls, 0.1, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_arguments() {
        assert!(generate_synthetic_corpus(9, SynthProfile::RiskyCalls, 0.0, 1).is_err());
        assert!(generate_synthetic_corpus(10, SynthProfile::RiskyCalls, 0.5, 1).is_err());
    }

    #[test]
    fn contextual_sentinel_is_in_both_classes() {
        let d = generate_synthetic_corpus(100, SynthProfile::Contextual, 0.0, 2).unwrap();
        assert!(d.iter().all(|f| f.source.contains("memcpy(buf, src,")));
    }
}
