use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};

/// Word list shipped with the crate: `token<TAB>pos<TAB>count` per line.
pub const BUNDLED_WORDS: &str = include_str!("../../data/words.tsv");

#[derive(Debug, Clone, PartialEq)]
pub struct WordEntry {
    pub token: String,
    pub pos: String,
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capitalization {
    Lower,
    Upper,
    Title,
    Random,
}

/// Background vocabulary with its sampling distributions.
///
/// Words are drawn in two stages: a part-of-speech list by its total
/// frequency, then a word from that list by frequency.
#[derive(Debug, Clone)]
pub struct WordDistribution {
    words: Vec<WordEntry>,
    /// Probabilities for lower, upper, title and random casing.
    pub capitalization_dist: [f64; 4],
    /// Probabilities of joining 1, 2, 3 or 4 words into one token.
    pub join_count_dist: [f64; 4],
    pub join_delimiters: Vec<String>,
    lists: Vec<(String, Vec<usize>, WeightedIndex<f64>)>,
    list_index: WeightedIndex<f64>,
    cap_index: WeightedIndex<f64>,
    join_index: WeightedIndex<f64>,
}

pub const CAPITALIZATION_DIST: [f64; 4] = [0.59, 0.20, 0.20, 0.01];
pub const JOIN_COUNT_DIST: [f64; 4] = [0.9, 0.065, 0.025, 0.01];
pub const JOIN_DELIMITERS: [&str; 4] = ["", "_", "-", "."];

fn check_dist(name: &str, d: &[f64]) -> Result<()> {
    let sum: f64 = d.iter().sum();
    if d.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{name} must be a probability distribution, got {d:?}")));
    }
    Ok(())
}

impl WordDistribution {
    pub fn new(
        words: Vec<WordEntry>,
        capitalization_dist: [f64; 4],
        join_count_dist: [f64; 4],
        join_delimiters: Vec<String>,
    ) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Config("word list is empty".into()));
        }
        if let Some(w) = words.iter().find(|w| !(w.frequency > 0.0)) {
            return Err(Error::Config(format!("word {:?} has non-positive frequency", w.token)));
        }
        if join_delimiters.is_empty() {
            return Err(Error::Config("no join delimiters".into()));
        }
        check_dist("capitalization_dist", &capitalization_dist)?;
        check_dist("join_count_dist", &join_count_dist)?;

        let mut lists: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, w) in words.iter().enumerate() {
            match lists.iter_mut().find(|(p, _)| *p == w.pos) {
                Some((_, idx)) => idx.push(i),
                None => lists.push((w.pos.clone(), vec![i])),
            }
        }
        let totals: Vec<f64> = lists
            .iter()
            .map(|(_, idx)| idx.iter().map(|&i| words[i].frequency).sum())
            .collect();
        let lists = lists
            .into_iter()
            .map(|(pos, idx)| {
                let w = WeightedIndex::new(idx.iter().map(|&i| words[i].frequency))
                    .expect("positive weights");
                (pos, idx, w)
            })
            .collect();
        let werr = |e: rand::distributions::WeightedError| Error::Config(e.to_string());
        Ok(Self {
            list_index: WeightedIndex::new(totals).map_err(werr)?,
            cap_index: WeightedIndex::new(capitalization_dist).map_err(werr)?,
            join_index: WeightedIndex::new(join_count_dist).map_err(werr)?,
            words,
            capitalization_dist,
            join_count_dist,
            join_delimiters,
            lists,
        })
    }

    pub fn parse(text: &str) -> Result<Vec<WordEntry>> {
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(token), Some(pos), Some(count)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Config(format!("word list line {}: expected 3 fields", n + 1)));
            };
            let frequency: f64 = count
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("word list line {}: bad count", n + 1)))?;
            out.push(WordEntry {
                token: token.to_string(),
                pos: pos.to_string(),
                frequency,
            });
        }
        Ok(out)
    }

    pub fn from_words(words: Vec<WordEntry>) -> Result<Self> {
        Self::new(
            words,
            CAPITALIZATION_DIST,
            JOIN_COUNT_DIST,
            JOIN_DELIMITERS.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn bundled() -> Self {
        Self::from_words(Self::parse(BUNDLED_WORDS).expect("bundled list parses"))
            .expect("bundled list is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_words(Self::parse(&std::fs::read_to_string(path)?)?)
    }

    pub fn words(&self) -> &[WordEntry] {
        &self.words
    }

    pub fn sample_word<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        let (_, idx, w) = &self.lists[self.list_index.sample(rng)];
        &self.words[idx[w.sample(rng)]].token
    }

    pub fn sample_capitalization<R: Rng + ?Sized>(&self, rng: &mut R) -> Capitalization {
        [
            Capitalization::Lower,
            Capitalization::Upper,
            Capitalization::Title,
            Capitalization::Random,
        ][self.cap_index.sample(rng)]
    }

    pub fn sample_join_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.join_index.sample(rng) + 1
    }
}

pub fn capitalize<R: Rng + ?Sized>(word: &str, cap: Capitalization, rng: &mut R) -> String {
    match cap {
        Capitalization::Lower => word.to_lowercase(),
        Capitalization::Upper => word.to_uppercase(),
        Capitalization::Title => {
            let mut cs = word.chars();
            match cs.next() {
                Some(f) => f.to_uppercase().chain(cs.flat_map(|c| c.to_lowercase())).collect(),
                None => String::new(),
            }
        }
        Capitalization::Random => word
            .chars()
            .map(|c| {
                if rng.gen_bool(0.5) {
                    c.to_ascii_uppercase()
                } else {
                    c.to_ascii_lowercase()
                }
            })
            .collect(),
    }
}

/// One background token: 1-4 corpus words, each capitalized independently,
/// joined by a single delimiter.
pub fn generate_background_word<R: Rng + ?Sized>(dist: &WordDistribution, rng: &mut R) -> String {
    let n = dist.sample_join_count(rng);
    let delim = &dist.join_delimiters[rng.gen_range(0..dist.join_delimiters.len())];
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push_str(delim);
        }
        let cap = dist.sample_capitalization(rng);
        let w = dist.sample_word(rng).to_string();
        out.push_str(&capitalize(&w, cap, rng));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn entry(t: &str, pos: &str, f: f64) -> WordEntry {
        WordEntry {
            token: t.into(),
            pos: pos.into(),
            frequency: f,
        }
    }

    #[test]
    fn bundled_list_loads() {
        let d = WordDistribution::bundled();
        assert!(d.words().len() > 300);
        assert_eq!(d.words()[0].token, "the");
    }

    #[test]
    fn empty_list_is_an_error() {
        assert!(WordDistribution::from_words(vec![]).is_err());
        assert!(WordDistribution::from_words(vec![entry("a", "n", 0.0)]).is_err());
    }

    #[test]
    fn bad_distribution_is_an_error() {
        let r = WordDistribution::new(
            vec![entry("a", "n", 1.0)],
            [0.5, 0.5, 0.5, 0.0],
            JOIN_COUNT_DIST,
            vec!["".into()],
        );
        assert!(r.is_err());
    }

    #[test]
    fn single_lowercase_token() {
        let d = WordDistribution::new(
            vec![entry("alpha", "n", 1.0)],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            vec!["_".into()],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(generate_background_word(&d, &mut rng), "alpha");
    }

    #[test]
    fn two_joined_words_with_underscore() {
        let d = WordDistribution::new(
            vec![entry("alpha", "n", 1.0), entry("beta", "v", 1.0)],
            [0.5, 0.0, 0.5, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            vec!["_".into()],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let w = generate_background_word(&d, &mut rng);
            let parts: Vec<_> = w.split('_').collect();
            assert_eq!(parts.len(), 2, "{w}");
            for p in parts {
                let lower = p.to_lowercase();
                assert!(lower == "alpha" || lower == "beta");
                assert!(p == lower || p == capitalize(&lower, Capitalization::Title, &mut rng));
            }
        }
    }

    #[test]
    fn join_count_frequencies() {
        let d = WordDistribution::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[d.sample_join_count(&mut rng) - 1] += 1;
        }
        for (c, p) in counts.iter().zip(JOIN_COUNT_DIST) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn two_stage_sampling_matches_frequencies() {
        let d = WordDistribution::from_words(vec![
            entry("a", "x", 3.0),
            entry("b", "x", 1.0),
            entry("c", "y", 4.0),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 80_000;
        let mut ca = 0;
        let mut cc = 0;
        for _ in 0..n {
            match d.sample_word(&mut rng) {
                "a" => ca += 1,
                "c" => cc += 1,
                _ => {}
            }
        }
        assert!((ca as f64 / n as f64 - 0.375).abs() < 0.01);
        assert!((cc as f64 / n as f64 - 0.5).abs() < 0.01);
    }
}
