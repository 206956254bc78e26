//! Shared fixture generation for the binary's test targets. The sentence
//! templates are fixed so expected pipeline counts can be derived by hand.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const HOBBY: [&str; 10] = [
    "painting", "chess", "cycling", "gardening", "photography", "pottery", "archery",
    "birdwatching", "calligraphy", "juggling",
];
pub const DAY: [&str; 10] = [
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "weekends",
    "holidays", "evenings",
];
pub const REL: [&str; 10] = [
    "sister", "brother", "cousin", "aunt", "uncle", "grandmother", "grandfather", "niece",
    "nephew", "roommate",
];
pub const CITY: [&str; 10] = [
    "boston", "denver", "seattle", "austin", "portland", "chicago", "atlanta", "phoenix",
    "tucson", "omaha",
];
pub const FOOD: [&str; 10] = [
    "pasta", "sushi", "tacos", "curry", "pancakes", "dumplings", "salad", "soup", "waffles",
    "chili",
];
pub const DRINK: [&str; 10] = [
    "coffee", "lemonade", "cider", "cocoa", "smoothies", "juice", "milk", "soda", "wine",
    "kombucha",
];
pub const NUM: [&str; 10] =
    ["two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven"];
pub const ANIMAL: [&str; 10] = [
    "cats", "dogs", "birds", "rabbits", "hamsters", "turtles", "ferrets", "goats", "hens",
    "ponies",
];
pub const ADJ: [&str; 10] = [
    "young", "old", "small", "large", "gray", "white", "brown", "black", "spotted", "striped",
];
pub const CITY2: [&str; 10] = [
    "paris", "tokyo", "rome", "cairo", "lima", "oslo", "dublin", "prague", "vienna", "madrid",
];
pub const SEASON: [&str; 10] = [
    "spring", "summer", "autumn", "winter", "january", "april", "june", "july", "august",
    "october",
];
pub const JOB: [&str; 10] = [
    "nurse", "teacher", "carpenter", "plumber", "barista", "librarian", "mechanic", "florist",
    "tailor", "baker",
];
pub const PLACE: [&str; 10] = [
    "town", "city", "village", "valley", "harbor", "hills", "suburbs", "capital", "mountains",
    "desert",
];

pub fn neutral(i: usize) -> (String, String) {
    let (a, b) = (i % 10, (i / 10) % 10);
    let tail = if i >= 100 { " indeed" } else { "" };
    (
        format!("i enjoy {} on {}{}", HOBBY[a], DAY[b], tail),
        format!("my {} lives in {}{}", REL[a], CITY[b], tail),
    )
}

pub fn negative(i: usize) -> (String, String) {
    let (a, b) = (i % 10, (i / 10) % 10);
    let tail = if i >= 100 { " indeed" } else { "" };
    (
        format!("i like {} with {}{}", FOOD[a], DRINK[b], tail),
        format!("i do not like {} with {}{}", FOOD[a], DRINK[b], tail),
    )
}

pub fn positive(p: usize) -> (String, String) {
    let (a, c) = (p % 10, (p / 10) % 10);
    match p % 3 {
        0 => {
            let s2 = format!("i own {} {} {}", NUM[a], ADJ[c], ANIMAL[a]);
            (format!("{s2} and one parrot"), s2)
        }
        1 => {
            let s1 = format!("i visited {} last {}", CITY2[a], SEASON[c]);
            let s2 = format!("{s1} with my {}", REL[a]);
            (s1, s2)
        }
        _ => {
            let s = format!("i work as a {} in the {}", JOB[a], PLACE[c]);
            (s.clone(), s)
        }
    }
}

/// Rows in fixed order: all neutrals, all negatives, all positives.
pub fn fixture_rows(
    n_neutral: usize,
    n_negative: usize,
    n_positive: usize,
) -> Vec<(String, String, &'static str)> {
    let mut rows = Vec::with_capacity(n_neutral + n_negative + n_positive);
    for i in 0..n_neutral {
        let (s1, s2) = neutral(i);
        rows.push((s1, s2, "neutral"));
    }
    for i in 0..n_negative {
        let (s1, s2) = negative(i);
        rows.push((s1, s2, "negative"));
    }
    for p in 0..n_positive {
        let (s1, s2) = positive(p);
        rows.push((s1, s2, "positive"));
    }
    rows
}

pub fn fixture_jsonl(n_neutral: usize, n_negative: usize, n_positive: usize) -> String {
    let mut out = String::new();
    for (s1, s2, label) in fixture_rows(n_neutral, n_negative, n_positive) {
        out.push_str(
            &serde_json::json!({"sentence1": s1, "sentence2": s2, "label": label}).to_string(),
        );
        out.push('\n');
    }
    out
}

pub fn write_fixture(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

pub fn memctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_memctl"))
}

pub fn run_ok(command: &mut Command) -> Output {
    let output = command.output().unwrap();
    assert!(
        output.status.success(),
        "command failed with {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    output
}
