//! Binary code families that name tags, and their mapping onto carrier masks.
//!
//! A codebook file is plain text:
//!
//! ```text
//! # name: sloane-seidel-28-60-13
//! # word_length: 28
//! # min_distance: 13
//! 0000000000000000000000000000
//! ...
//! ```
//!
//! Character `i` of a word selects the carrier of group `i`: `0` picks the
//! lower wide carrier of the pair, `1` the upper one.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layout::{CarrierLayout, WideCarrierMask};

/// Longest word a [`Codeword`] can hold.
pub const MAX_WORD_LENGTH: usize = 64;

/// A fixed-length bit string; bit `i` is character `i` of the text form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Codeword {
    bits: u64,
    len: u8,
}

impl Codeword {
    pub fn from_bits(bits: u64, len: usize) -> Self {
        assert!(len <= MAX_WORD_LENGTH, "word length {len} exceeds {MAX_WORD_LENGTH}");
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        Self {
            bits: bits & mask,
            len: len as u8,
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        if text.is_empty() || text.len() > MAX_WORD_LENGTH {
            return None;
        }
        let mut bits = 0u64;
        for (i, c) in text.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => bits |= 1 << i,
                _ => return None,
            }
        }
        Some(Self::from_bits(bits, text.len()))
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.bits >> i) & 1 == 1
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn complement(&self) -> Self {
        Self::from_bits(!self.bits, self.len())
    }

    pub fn distance(&self, other: &Codeword) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    name: String,
    word_length: usize,
    declared_min_distance: u32,
    words: Vec<Codeword>,
}

impl Codebook {
    /// Validates `words` against the declared parameters and stores them in
    /// canonical (lexicographic) order. Errors name indices in input order.
    pub fn new(
        name: impl Into<String>,
        word_length: usize,
        declared_min_distance: u32,
        mut words: Vec<Codeword>,
    ) -> Result<Self> {
        if word_length == 0 || word_length > MAX_WORD_LENGTH {
            return Err(Error::InvalidParameter(format!(
                "word length must be in 1..={MAX_WORD_LENGTH}, got {word_length}"
            )));
        }
        if let Some((index, w)) = words.iter().enumerate().find(|(_, w)| w.len() != word_length) {
            return Err(Error::WordLength {
                index,
                found: w.len(),
                expected: word_length,
            });
        }
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                let distance = words[i].distance(&words[j]);
                if distance == 0 {
                    return Err(Error::DuplicateWord { first: i, second: j });
                }
                if distance < declared_min_distance {
                    return Err(Error::DistanceViolation {
                        first: i,
                        second: j,
                        distance,
                        declared: declared_min_distance,
                    });
                }
            }
        }
        words.sort_by_key(|w| w.to_string());
        Ok(Self {
            name: name.into(),
            word_length,
            declared_min_distance,
            words,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut word_length = None;
        let mut min_distance = None;
        let mut words = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = n + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let Some((key, value)) = header.split_once(':') else {
                    continue;
                };
                let value = value.trim();
                let parse_num = |v: &str| {
                    v.parse::<u32>().map_err(|e| Error::Parse {
                        line: lineno,
                        message: format!("{}: {e}", key.trim()),
                    })
                };
                match key.trim() {
                    "name" => name = Some(value.to_string()),
                    "word_length" => word_length = Some(parse_num(value)? as usize),
                    "min_distance" => min_distance = Some(parse_num(value)?),
                    _ => {}
                }
                continue;
            }
            let word = Codeword::parse(line).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("not a bit string: {line:?}"),
            })?;
            words.push(word);
        }
        let missing = |field: &str| Error::Parse {
            line: 0,
            message: format!("missing header field {field}"),
        };
        Self::new(
            name.ok_or_else(|| missing("name"))?,
            word_length.ok_or_else(|| missing("word_length"))?,
            min_distance.ok_or_else(|| missing("min_distance"))?,
            words,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Canonical text form; `parse` of this output reproduces it byte for byte.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# name: {}\n# word_length: {}\n# min_distance: {}\n",
            self.name, self.word_length, self.declared_min_distance
        );
        for w in &self.words {
            out.push_str(&w.to_string());
            out.push('\n');
        }
        out
    }

    /// The (28, 60, 13) family shipped with the crate.
    pub fn sloane_seidel() -> Self {
        Self::parse(include_str!("../data/sloane-seidel-28-60-13.txt"))
            .expect("bundled codebook is valid")
    }

    /// A family with a single word, for single-hypothesis detection.
    pub fn single(word: Codeword) -> Self {
        Self {
            name: "single".to_string(),
            word_length: word.len(),
            declared_min_distance: word.len() as u32,
            words: vec![word],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn word_length(&self) -> usize {
        self.word_length
    }

    pub fn declared_min_distance(&self) -> u32 {
        self.declared_min_distance
    }

    pub fn words(&self) -> &[Codeword] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Uniformly chosen word index.
    pub fn random_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.words.len())
    }

    /// The first `n` words, keeping the declared distance.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            name: format!("{}[..{n}]", self.name),
            words: self.words.iter().take(n).copied().collect(),
            ..self.clone()
        }
    }

    pub fn masks(&self, layout: &CarrierLayout) -> Result<Vec<WideCarrierMask>> {
        let groups = layout.group_map();
        self.words
            .iter()
            .map(|w| mask_from_groups(w, &groups))
            .collect()
    }
}

/// Exact minimum pairwise Hamming distance.
pub fn verify_min_distance(words: &[Codeword]) -> Result<u32> {
    if words.len() < 2 {
        return Err(Error::TooFewWords(words.len()));
    }
    let len = words[0].len();
    if let Some(w) = words.iter().find(|w| w.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: w.len(),
        });
    }
    let mut best = u32::MAX;
    for (i, a) in words.iter().enumerate() {
        for b in &words[i + 1..] {
            best = best.min(a.distance(b));
        }
    }
    Ok(best)
}

pub fn codeword_to_mask(word: &Codeword, layout: &CarrierLayout) -> Result<WideCarrierMask> {
    mask_from_groups(word, &layout.group_map())
}

fn mask_from_groups(word: &Codeword, groups: &[(usize, usize)]) -> Result<WideCarrierMask> {
    if word.len() != groups.len() {
        return Err(Error::LengthMismatch {
            expected: groups.len(),
            found: word.len(),
        });
    }
    let mut active: Vec<usize> = groups
        .iter()
        .enumerate()
        .map(|(g, &(first, second))| if word.bit(g) { second } else { first })
        .collect();
    active.sort_unstable();
    Ok(WideCarrierMask::from_sorted_unchecked(active))
}

/// Number of random candidates a fallback search examines.
const FALLBACK_CANDIDATES: usize = 1 << 16;

/// Randomised greedy code search: draws candidate words (each followed by its
/// complement) and keeps those at distance at least `target_distance` from
/// every word kept so far. Stops after `max_words` words or when the
/// candidate budget runs out, so the family may be small.
pub fn generate_fallback_family(
    word_length: usize,
    target_distance: u32,
    rng_seed: u64,
    max_words: usize,
) -> Result<Codebook> {
    if word_length == 0 || word_length > MAX_WORD_LENGTH {
        return Err(Error::InvalidParameter(format!(
            "word length must be in 1..={MAX_WORD_LENGTH}"
        )));
    }
    if target_distance as usize > word_length {
        return Err(Error::InvalidParameter(format!(
            "distance {target_distance} exceeds word length {word_length}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut words: Vec<Codeword> = Vec::new();
    let accept = |words: &mut Vec<Codeword>, w: Codeword| {
        if words.len() < max_words && words.iter().all(|k| k.distance(&w) >= target_distance.max(1)) {
            words.push(w);
        }
    };
    for _ in 0..FALLBACK_CANDIDATES {
        if words.len() >= max_words {
            break;
        }
        let w = Codeword::from_bits(rng.random::<u64>(), word_length);
        accept(&mut words, w);
        accept(&mut words, w.complement());
    }
    Codebook::new(
        format!("greedy-{word_length}-d{target_distance}-s{rng_seed}"),
        word_length,
        target_distance,
        words,
    )
}
