//! Random codebooks of frequency-typical input sequences.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::channel::CqChannel;
use crate::error::{Error, Result};
use crate::typicality::{is_frequency_typical, typical_set_nonempty};

/// Attempts per requested codeword before rejection sampling gives up.
const MAX_ATTEMPTS_PER_CODEWORD: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Codebook {
    pub n: usize,
    pub rate: f64,
    pub delta_source: f64,
    pub seed: u64,
    #[serde(default)]
    pub distinct: bool,
    pub codewords: Vec<Vec<usize>>,
}

/// `N_n = ceil(2^{nR})`. Exponents within `1e-9` of an integer are snapped so
/// that e.g. `n = 10, R = 0.3` gives 8 rather than 9.
pub fn codebook_size(n: usize, rate: f64) -> Result<usize> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::validation(format!(
            "rate {rate} must be finite and >= 0"
        )));
    }
    let exponent = n as f64 * rate;
    let snapped = if (exponent - exponent.round()).abs() < 1e-9 {
        exponent.round()
    } else {
        exponent
    };
    if snapped >= 62.0 {
        return Err(Error::resource(format!("2^{snapped} codewords")));
    }
    let size = snapped.exp2();
    let rounded = size.round();
    let size = if (size - rounded).abs() < 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        size.ceil()
    };
    Ok(size as usize)
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("codebook serialization: {e}")))
    }

    /// Parses a codebook document and checks its internal consistency.
    pub fn from_toml(text: &str) -> Result<Self> {
        let book: Codebook =
            toml::from_str(text).map_err(|e| Error::config(format!("codebook: {e}")))?;
        if book.codewords.iter().any(|c| c.len() != book.n) {
            return Err(Error::validation("codeword length differs from n"));
        }
        if book.codewords.len() != codebook_size(book.n, book.rate)? {
            return Err(Error::validation(format!(
                "codebook has {} codewords, expected ceil(2^(nR)) = {}",
                book.codewords.len(),
                codebook_size(book.n, book.rate)?
            )));
        }
        Ok(book)
    }

    /// Checks that every codeword is typical for the channel's priors.
    pub fn check_against(&self, ch: &CqChannel) -> Result<()> {
        for (s, word) in self.codewords.iter().enumerate() {
            if !is_frequency_typical(word, ch.priors(), self.delta_source) {
                return Err(Error::validation(format!("codeword {s} is not typical")));
            }
        }
        Ok(())
    }
}

/// Draws `ceil(2^{nR})` codewords: letters i.i.d. from the priors, rejecting
/// sequences that are not frequency typical. Codewords may repeat unless
/// `distinct` is set.
pub fn sample_codebook(
    ch: &CqChannel,
    n: usize,
    rate: f64,
    delta_source: f64,
    seed: u64,
    distinct: bool,
    budget: &Budget,
) -> Result<Codebook> {
    if n == 0 {
        return Err(Error::validation("n must be at least 1"));
    }
    let size = codebook_size(n, rate)?;
    if size > budget.max_codewords {
        return Err(Error::resource(format!(
            "{size} codewords exceed max_codewords = {}",
            budget.max_codewords
        )));
    }
    let priors = ch.priors();
    if !typical_set_nonempty(priors, n, delta_source) {
        return Err(Error::validation(format!(
            "no typical sequence of length {n} at delta = {delta_source}"
        )));
    }
    let cdf: Vec<f64> = priors
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut codewords = Vec::with_capacity(size);
    let mut attempts = 0usize;
    while codewords.len() < size {
        attempts += 1;
        if attempts > MAX_ATTEMPTS_PER_CODEWORD.saturating_mul(size) {
            return Err(Error::validation(format!(
                "could not draw {size} {}typical codewords (n = {n}, delta = {delta_source})",
                if distinct { "distinct " } else { "" }
            )));
        }
        let word: Vec<usize> = (0..n).map(|_| sample_index(&cdf, rng.random())).collect();
        if !is_frequency_typical(&word, priors, delta_source) {
            continue;
        }
        if distinct && !seen.insert(word.clone()) {
            continue;
        }
        codewords.push(word);
    }
    Ok(Codebook {
        n,
        rate,
        delta_source,
        seed,
        distinct,
        codewords,
    })
}

pub(crate) fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}
