//! Seeded synthetic corpora for end-to-end tests: classes with known,
//! controllable signal strength so learnability thresholds are meaningful.

use rand::RngExt;

use crate::corpus::NameRecord;
use crate::rng::{self, SeedRng, WeightedChoice};

/// Labels used by the four-class generators, in sorted order.
pub const FOUR_CLASS_LABELS: [&str; 4] = ["group_a", "group_b", "group_c", "group_d"];

/// Labels used by the two-class shared-surname generator.
pub const TWO_CLASS_LABELS: [&str; 2] = ["kin_a", "kin_b"];

fn random_word(rng: &mut SeedRng, letters: &[char], len_range: std::ops::RangeInclusive<usize>) -> String {
    let len = rng.random_range(len_range);
    (0..len)
        .map(|_| letters[rng.random_range(0..letters.len())])
        .collect()
}

/// Four classes over disjoint six-letter alphabet regions
/// (a–f, g–l, m–r, s–x). Any bi-char pins down the class, so a trained
/// model should separate these nearly perfectly.
pub fn disjoint_alphabet_corpus(n: usize, seed: u64) -> Vec<NameRecord> {
    let mut rng = rng::seeded(seed);
    let regions: Vec<Vec<char>> = (0..4)
        .map(|k| (0..6).map(|i| (b'a' + (k * 6 + i) as u8) as char).collect())
        .collect();
    (0..n)
        .map(|i| {
            let class = i % 4;
            NameRecord {
                last_name: random_word(&mut rng, &regions[class], 4..=10),
                first_name: None,
                label: FOUR_CLASS_LABELS[class].to_string(),
            }
        })
        .collect()
}

/// Four classes sharing the full a–z alphabet but with shifted letter
/// preferences: class k weights a twelve-letter window starting at letter
/// 5k (wrapping) four times higher than the rest. Classes overlap heavily,
/// so separating them requires learning frequency signatures rather than
/// memorizing disjoint symbols.
pub fn overlapping_alphabet_corpus(n: usize, seed: u64) -> Vec<NameRecord> {
    let mut rng = rng::seeded(seed);
    let choosers: Vec<(Vec<char>, WeightedChoice)> = (0..4usize)
        .map(|k| {
            let letters: Vec<char> = (b'a'..=b'z').map(|b| b as char).collect();
            let weights: Vec<u64> = (0..26)
                .map(|i| {
                    let in_window = (i + 26 - k * 5) % 26 < 12;
                    if in_window {
                        6
                    } else {
                        1
                    }
                })
                .collect();
            (letters, WeightedChoice::new(weights).expect("positive weights"))
        })
        .collect();
    (0..n)
        .map(|i| {
            let class = i % 4;
            let (letters, chooser) = &choosers[class];
            let len = rng.random_range(6..=12);
            let last_name: String = (0..len).map(|_| letters[chooser.draw(&mut rng)]).collect();
            NameRecord {
                last_name,
                first_name: None,
                label: FOUR_CLASS_LABELS[class].to_string(),
            }
        })
        .collect()
}

/// Two classes drawing surnames from one shared pool but first names from
/// disjoint alphabets (a–m vs. n–z). A last-name-only model can do no
/// better than each surname's class split; a full-name model sees the
/// separating signal.
pub fn shared_surname_corpus(n: usize, seed: u64) -> Vec<NameRecord> {
    let mut rng = rng::seeded(seed);
    let full: Vec<char> = (b'a'..=b'z').map(|b| b as char).collect();
    let pool: Vec<String> = (0..200).map(|_| random_word(&mut rng, &full, 5..=8)).collect();
    let first_alphabets: [Vec<char>; 2] = [
        (b'a'..=b'm').map(|b| b as char).collect(),
        (b'n'..=b'z').map(|b| b as char).collect(),
    ];
    (0..n)
        .map(|i| {
            let class = i % 2;
            NameRecord {
                last_name: pool[rng.random_range(0..pool.len())].clone(),
                first_name: Some(random_word(&mut rng, &first_alphabets[class], 4..=8)),
                label: TWO_CLASS_LABELS[class].to_string(),
            }
        })
        .collect()
}
