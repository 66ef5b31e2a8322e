//! Classical-quantum channels: letter priors, output density matrices, their
//! spectral data, the average output state and the Holevo quantity.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_density, check_distribution, entropy_of_spectrum, CMatrix, CVector, HermitianMatrix,
    SpectralDecomposition, C64, TOL_EIG,
};

/// Nonzero part of the spectrum of one letter's output state.
#[derive(Debug, Clone)]
pub struct LetterSpectrum {
    /// `p_{k|j}` for the retained eigenvalues, descending.
    pub weights: Vec<f64>,
    /// `|k>_j` in the computational basis.
    pub vectors: Vec<CVector>,
    /// `|k>_j` in the eigenbasis of the average output state.
    pub vectors_avg_basis: Vec<CVector>,
    pub entropy: f64,
}

impl LetterSpectrum {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone)]
pub struct CqChannel {
    name: String,
    letter_dim: usize,
    priors: Vec<f64>,
    outputs: Vec<HermitianMatrix>,
    letters: Vec<LetterSpectrum>,
    average: HermitianMatrix,
    average_spectrum: SpectralDecomposition,
    average_entropy: f64,
}

impl CqChannel {
    /// Validates the priors and outputs and caches all spectral data.
    ///
    /// Letters with zero prior are rejected. Eigenvalues of `rho_j` at or below
    /// `TOL_EIG` are dropped from the letter spectra.
    pub fn new(priors: Vec<f64>, outputs: Vec<HermitianMatrix>) -> Result<Self> {
        check_distribution(&priors)?;
        if priors.len() != outputs.len() {
            return Err(Error::validation(format!(
                "{} priors but {} output states",
                priors.len(),
                outputs.len()
            )));
        }
        if let Some(j) = priors.iter().position(|&p| p <= 0.0) {
            return Err(Error::validation(format!("letter {j} has zero prior")));
        }
        let letter_dim = outputs[0].dim();
        if outputs.iter().any(|o| o.dim() != letter_dim) {
            return Err(Error::validation(
                "output states have mismatched dimensions",
            ));
        }
        let spectra = outputs
            .iter()
            .enumerate()
            .map(|(j, rho)| {
                check_density(rho)
                    .map_err(|e| Error::validation(format!("output of letter {j}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;

        let terms: Vec<(f64, &HermitianMatrix)> = priors.iter().copied().zip(&outputs).collect();
        let average = HermitianMatrix::weighted_sum(&terms)?;
        let average_spectrum = crate::linalg::spectral_decompose(&average);
        let average_entropy = entropy_of_spectrum(&average_spectrum.eigenvalues);
        let basis_adj = average_spectrum.eigenvectors.adjoint();

        let letters = spectra
            .iter()
            .map(|spec| {
                let keep: Vec<usize> = (0..spec.dim())
                    .filter(|&k| spec.eigenvalues[k] > TOL_EIG)
                    .collect();
                let vectors: Vec<CVector> = keep.iter().map(|&k| spec.eigenvector(k)).collect();
                LetterSpectrum {
                    weights: keep.iter().map(|&k| spec.eigenvalues[k]).collect(),
                    vectors_avg_basis: vectors.iter().map(|v| &basis_adj * v).collect(),
                    vectors,
                    entropy: entropy_of_spectrum(&spec.eigenvalues),
                }
            })
            .collect();

        Ok(CqChannel {
            name: "custom".to_string(),
            letter_dim,
            priors,
            outputs,
            letters,
            average,
            average_spectrum,
            average_entropy,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn builtin(spec: &BuiltinChannel) -> Result<Self> {
        spec.validate()?;
        let ket = |re: f64, im: f64| C64::new(re, im);
        let qubit = |a: f64, b: f64| CVector::from_vec(vec![ket(a, 0.0), ket(b, 0.0)]);
        let pure_pair = |s: f64| {
            (
                HermitianMatrix::outer(&qubit(1.0, 0.0)),
                HermitianMatrix::outer(&qubit(s, (1.0 - s * s).max(0.0).sqrt())),
            )
        };
        let ch = match *spec {
            BuiltinChannel::PurePair { overlap } => {
                let (a, b) = pure_pair(overlap);
                CqChannel::new(vec![0.5, 0.5], vec![a, b])?
            }
            BuiltinChannel::ClassicalBit { flip } => CqChannel::new(
                vec![0.5, 0.5],
                vec![
                    HermitianMatrix::from_diagonal(&[1.0 - flip, flip])?,
                    HermitianMatrix::from_diagonal(&[flip, 1.0 - flip])?,
                ],
            )?,
            BuiltinChannel::DepolarizedPair { overlap, noise } => {
                let (a, b) = pure_pair(overlap);
                let mixed = HermitianMatrix::from_diagonal(&[0.5, 0.5])?;
                let noisy = |h: &HermitianMatrix| {
                    HermitianMatrix::weighted_sum(&[(1.0 - noise, h), (noise, &mixed)])
                };
                CqChannel::new(vec![0.5, 0.5], vec![noisy(&a)?, noisy(&b)?])?
            }
            BuiltinChannel::Trine => {
                let outputs = (0..3)
                    .map(|k| {
                        let theta = 2.0 * PI * k as f64 / 3.0;
                        HermitianMatrix::outer(&qubit(theta.cos(), theta.sin()))
                    })
                    .collect();
                CqChannel::new(vec![1.0 / 3.0; 3], outputs)?
            }
        };
        Ok(ch.with_name(spec.to_string()))
    }

    /// A random channel with Ginibre-distributed mixed outputs and
    /// Dirichlet-like priors bounded away from zero.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        alphabet: usize,
        letter_dim: usize,
    ) -> Result<Self> {
        let raw: Vec<f64> = (0..alphabet).map(|_| 0.05 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let priors = raw.iter().map(|x| x / total).collect();
        let outputs = (0..alphabet)
            .map(|_| random_density(rng, letter_dim))
            .collect::<Result<Vec<_>>>()?;
        CqChannel::new(priors, outputs)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn letter_dim(&self) -> usize {
        self.letter_dim
    }

    pub fn alphabet_size(&self) -> usize {
        self.priors.len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn outputs(&self) -> &[HermitianMatrix] {
        &self.outputs
    }

    pub fn letter(&self, j: usize) -> &LetterSpectrum {
        &self.letters[j]
    }

    pub fn letters(&self) -> &[LetterSpectrum] {
        &self.letters
    }

    /// The average output state `rho = sum_j p_j rho_j`.
    pub fn average(&self) -> &HermitianMatrix {
        &self.average
    }

    /// Spectrum `p_k` and eigenbasis `|k>` of the average output, including
    /// zero eigenvalues so the basis is complete.
    pub fn average_spectrum(&self) -> &SpectralDecomposition {
        &self.average_spectrum
    }

    /// `S(rho)` in bits.
    pub fn average_entropy(&self) -> f64 {
        self.average_entropy
    }

    /// `sum_j p_j S(rho_j)` in bits.
    pub fn conditional_entropy(&self) -> f64 {
        self.priors
            .iter()
            .zip(&self.letters)
            .map(|(p, l)| p * l.entropy)
            .sum()
    }

    /// Output state of letter `j` written in the eigenbasis of `rho`.
    pub fn output_avg_basis(&self, j: usize) -> CMatrix {
        let v = &self.average_spectrum.eigenvectors;
        v.adjoint() * self.outputs[j].matrix() * v
    }

    /// True when every `|k>_j` is a basis vector (up to phase) of the
    /// eigenbasis of `rho`, so all outputs commute with `rho` and each other.
    pub fn is_jointly_diagonal(&self) -> bool {
        self.letters.iter().all(|l| {
            l.vectors_avg_basis
                .iter()
                .all(|v| v.iter().any(|z| z.norm_sqr() > 1.0 - 1e-12))
        })
    }
}

/// Holevo quantity `S(rho) - sum_j p_j S(rho_j)` in bits.
pub fn holevo_chi(ch: &CqChannel) -> f64 {
    (ch.average_entropy() - ch.conditional_entropy()).max(0.0)
}

/// Named test channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinChannel {
    /// `|psi_0> = |0>`, `|psi_1> = s|0> + sqrt(1 - s^2)|1>`, equal priors.
    PurePair { overlap: f64 },
    /// Diagonal outputs `diag(1-q, q)` and `diag(q, 1-q)`, equal priors.
    ClassicalBit { flip: f64 },
    /// The pure pair mixed with white noise: `(1 - l) |psi_j><psi_j| + l I/2`.
    DepolarizedPair { overlap: f64, noise: f64 },
    /// Three real qubit states at 120 degrees, uniform priors.
    Trine,
}

impl BuiltinChannel {
    fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "{name} = {v} must lie in [0, 1]"
                )))
            }
        };
        match *self {
            BuiltinChannel::PurePair { overlap } => unit("overlap", overlap),
            BuiltinChannel::ClassicalBit { flip } => unit("flip", flip),
            BuiltinChannel::DepolarizedPair { overlap, noise } => {
                unit("overlap", overlap)?;
                unit("noise", noise)
            }
            BuiltinChannel::Trine => Ok(()),
        }
    }

    /// Parses the command-line shorthand `name` or `name:value[,value]`, for
    /// example `pure_pair:0.7071` or `depolarized_pair:0,0.5`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let values = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::validation(format!("bad channel parameter {a:?}")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let spec = match (name.trim(), values.as_slice()) {
            ("pure_pair", [s]) => BuiltinChannel::PurePair { overlap: *s },
            ("classical_bit", []) => BuiltinChannel::ClassicalBit { flip: 0.0 },
            ("classical_bit", [q]) => BuiltinChannel::ClassicalBit { flip: *q },
            ("depolarized_pair", [s, l]) => BuiltinChannel::DepolarizedPair {
                overlap: *s,
                noise: *l,
            },
            ("trine", []) => BuiltinChannel::Trine,
            _ => {
                return Err(Error::validation(format!(
                    "unknown builtin channel {text:?}"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fixtures used by the verification commands and the acceptance suite:
    /// `chi` spans roughly 0.19 to 1 bit.
    pub fn default_fixtures() -> Vec<BuiltinChannel> {
        vec![
            BuiltinChannel::ClassicalBit { flip: 0.0 },
            BuiltinChannel::PurePair { overlap: 0.0 },
            BuiltinChannel::PurePair { overlap: 0.5 },
            BuiltinChannel::PurePair {
                overlap: std::f64::consts::FRAC_1_SQRT_2,
            },
            BuiltinChannel::DepolarizedPair {
                overlap: 0.0,
                noise: 0.5,
            },
        ]
    }
}

impl fmt::Display for BuiltinChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinChannel::PurePair { overlap } => write!(f, "pure_pair(s={overlap:.6})"),
            BuiltinChannel::ClassicalBit { flip } => write!(f, "classical_bit(q={flip:.6})"),
            BuiltinChannel::DepolarizedPair { overlap, noise } => {
                write!(f, "depolarized_pair(s={overlap:.6};l={noise:.6})")
            }
            BuiltinChannel::Trine => write!(f, "trine"),
        }
    }
}

/// `G G^dagger / Tr(G G^dagger)` for a complex Ginibre matrix `G`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<HermitianMatrix> {
    let mut gauss = || {
        // Box-Muller; keeps the dependency list to `rand`.
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    };
    let g = CMatrix::from_fn(dim, dim, |_, _| C64::new(gauss(), gauss()));
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    let m = m.unscale(tr);
    HermitianMatrix::new((&m + m.adjoint()).scale(0.5))
}

/// Haar-ish random unitary from the QR factor of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let mut gauss = || {
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    };
    let g = CMatrix::from_fn(dim, dim, |_, _| C64::new(gauss(), gauss()));
    g.qr().q()
}
