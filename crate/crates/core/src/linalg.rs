//! Dense complex Hermitian algebra and product-state kernels.
//!
//! Composite indices over `n` letters of dimension `d` use letter 1 as the most
//! significant base-`d` digit, so `|0>|1>` at `d = 2` is index 1 of 4.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::budget::Budget;
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
/// A generic (not necessarily product) state vector.
pub type DenseVector = CVector;

pub const TOL_HERM: f64 = 1e-10;
pub const TOL_EIG: f64 = 1e-10;
pub const TOL_TRACE: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// A square complex matrix equal to its conjugate transpose within
/// [`TOL_HERM`]. The stored matrix is exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::validation(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("matrix has non-finite entries"));
        }
        let dev = max_abs(&(&m - m.adjoint()));
        if dev > TOL_HERM {
            return Err(Error::validation(format!(
                "matrix is not Hermitian: max |A - A^dagger| = {dev:.3e}"
            )));
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(HermitianMatrix(sym))
    }

    /// Builds from real and (optional) imaginary row-major parts.
    pub fn from_parts(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<Self> {
        let dim = re.len();
        if re.iter().any(|row| row.len() != dim) {
            return Err(Error::validation("real part is not square"));
        }
        if let Some(im) = im {
            if im.len() != dim || im.iter().any(|row| row.len() != dim) {
                return Err(Error::validation("imaginary part does not match real part"));
            }
        }
        let m = CMatrix::from_fn(dim, dim, |r, c| {
            C64::new(re[r][c], im.map_or(0.0, |im| im[r][c]))
        });
        Self::new(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let v = CVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self::new(CMatrix::from_diagonal(&v))
    }

    /// `|v><v|` for any (not necessarily normalized) vector.
    pub fn outer(v: &CVector) -> Self {
        HermitianMatrix(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// `U A U^dagger`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        let m = u * &self.0 * u.adjoint();
        HermitianMatrix((&m + m.adjoint()).scale(0.5))
    }

    pub fn kron(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(self.0.kronecker(&other.0))
    }

    /// Weighted sum of Hermitian matrices of equal dimension.
    pub fn weighted_sum(terms: &[(f64, &HermitianMatrix)]) -> Result<Self> {
        let dim = terms
            .first()
            .ok_or_else(|| Error::validation("empty weighted sum"))?
            .1
            .dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for (w, h) in terms {
            if h.dim() != dim {
                return Err(Error::validation("dimension mismatch in weighted sum"));
            }
            acc += h.matrix().scale(*w);
        }
        Ok(HermitianMatrix(acc))
    }
}

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, i: usize) -> CVector {
        self.eigenvectors.column(i).into_owned()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let lam = CVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&x| C64::new(x, 0.0)),
        );
        &self.eigenvectors * CMatrix::from_diagonal(&lam) * self.eigenvectors.adjoint()
    }
}

/// Diagonalizes a Hermitian matrix.
///
/// Matrices that are already diagonal keep the standard basis (ties in stable
/// index order), so degenerate spectra such as `I/2` get a reproducible
/// eigenbasis. Eigenvalues in `[-TOL_EIG, 0)` are clamped to zero.
pub fn spectral_decompose(a: &HermitianMatrix) -> SpectralDecomposition {
    let m = a.matrix();
    let dim = a.dim();
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let off_diag = (0..dim)
        .flat_map(|r| (0..dim).filter(move |&c| c != r).map(move |c| (r, c)))
        .map(|(r, c)| m[(r, c)].norm())
        .fold(0.0, f64::max);

    let (values, vectors): (Vec<f64>, CMatrix) = if off_diag <= 4.0 * f64::EPSILON * scale {
        (
            m.diagonal().iter().map(|z| z.re).collect(),
            CMatrix::identity(dim, dim),
        )
    } else {
        let eig = SymmetricEigen::new(m.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));
    let eigenvalues = order
        .iter()
        .map(|&i| {
            let v = values[i];
            if (-TOL_EIG..0.0).contains(&v) {
                0.0
            } else {
                v
            }
        })
        .collect();
    let eigenvectors = CMatrix::from_fn(dim, dim, |r, c| vectors[(r, order[c])]);
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// `-sum lambda log2 lambda` over a spectrum, with `0 log 0 = 0`.
pub fn entropy_of_spectrum(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Von Neumann entropy in bits of a density matrix.
pub fn von_neumann_entropy(rho: &HermitianMatrix) -> Result<f64> {
    check_density(rho)?;
    Ok(entropy_of_spectrum(&spectral_decompose(rho).eigenvalues))
}

/// Shannon entropy in bits of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(entropy_of_spectrum(p))
}

pub(crate) fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::validation("empty probability vector"));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::validation(format!(
            "probabilities must be finite and >= 0: {p:?}"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > TOL_TRACE {
        return Err(Error::validation(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Unit trace and no eigenvalue below `-TOL_EIG`.
pub(crate) fn check_density(rho: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > TOL_TRACE {
        return Err(Error::validation(format!("trace is {tr}, expected 1")));
    }
    let spec = spectral_decompose(rho);
    let min = spec.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -TOL_EIG {
        return Err(Error::validation(format!(
            "matrix is not positive semidefinite (min eigenvalue {min:.3e})"
        )));
    }
    Ok(spec)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A tensor product `|x_1> (x) ... (x) |x_n>` of unit vectors of equal
/// dimension, stored factor-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductVector {
    factors: Vec<CVector>,
}

impl ProductVector {
    pub fn new(factors: Vec<CVector>) -> Result<Self> {
        let d = factors
            .first()
            .ok_or_else(|| Error::validation("product vector needs at least one factor"))?
            .len();
        for f in &factors {
            if f.len() != d || d == 0 {
                return Err(Error::validation(
                    "product vector factors must share a dimension",
                ));
            }
            if (f.norm() - 1.0).abs() > TOL_EIG {
                return Err(Error::validation(format!(
                    "product vector factor has norm {}",
                    f.norm()
                )));
            }
        }
        Ok(ProductVector { factors })
    }

    /// Factors assumed normalized by construction.
    pub(crate) fn from_unit_factors(factors: Vec<CVector>) -> Self {
        debug_assert!(!factors.is_empty());
        ProductVector { factors }
    }

    /// Computational-basis product `|i_1 ... i_n>`.
    pub fn basis(d: usize, digits: &[usize]) -> Result<Self> {
        let factors = digits
            .iter()
            .map(|&i| {
                if i >= d {
                    return Err(Error::validation(format!(
                        "basis digit {i} out of range for d = {d}"
                    )));
                }
                let mut v = CVector::zeros(d);
                v[i] = ONE;
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        ProductVector::new(factors)
    }

    pub fn factors(&self) -> &[CVector] {
        &self.factors
    }

    pub fn letters(&self) -> usize {
        self.factors.len()
    }

    pub fn letter_dim(&self) -> usize {
        self.factors[0].len()
    }

    /// Amplitude of the composite basis state with the given digits.
    pub fn component(&self, digits: &[usize]) -> C64 {
        self.factors
            .iter()
            .zip(digits)
            .fold(ONE, |acc, (f, &i)| acc * f[i])
    }
}

/// Kronecker product of the factors, letter 1 most significant.
pub fn expand(x: &ProductVector, budget: &Budget) -> Result<DenseVector> {
    budget.check_dim(x.letter_dim(), x.letters())?;
    Ok(expand_unchecked(x))
}

pub(crate) fn expand_unchecked(x: &ProductVector) -> DenseVector {
    let mut out: Vec<C64> = vec![ONE];
    for f in x.factors() {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &a in &out {
            next.extend(f.iter().map(|&b| a * b));
        }
        out = next;
    }
    CVector::from_vec(out)
}

/// `<expand(x)|y>` by contracting one letter at a time from the least
/// significant end; never materializes `expand(x)`.
pub fn product_inner(x: &ProductVector, y: &DenseVector) -> Result<C64> {
    let d = x.letter_dim();
    let expected = crate::budget::checked_pow(d, x.letters());
    if expected != Some(y.len()) {
        return Err(Error::validation(format!(
            "dimension mismatch: product vector spans {d}^{} entries, dense vector has {}",
            x.letters(),
            y.len()
        )));
    }
    Ok(product_inner_unchecked(x, y.as_slice()))
}

pub(crate) fn product_inner_unchecked(x: &ProductVector, y: &[C64]) -> C64 {
    let d = x.letter_dim();
    let mut buf: Vec<C64> = y.to_vec();
    for f in x.factors().iter().rev() {
        let conj: Vec<C64> = f.iter().map(|z| z.conj()).collect();
        let len = buf.len() / d;
        for r in 0..len {
            let block = &buf[r * d..(r + 1) * d];
            let s = block
                .iter()
                .zip(&conj)
                .fold(ZERO, |acc, (a, b)| acc + a * b);
            buf[r] = s;
        }
        buf.truncate(len);
    }
    buf[0]
}

/// Base-`d` digits of a composite index, letter 1 first.
pub fn index_to_digits(mut index: usize, d: usize, n: usize) -> Vec<usize> {
    let mut digits = vec![0; n];
    for slot in digits.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    digits
}

pub fn digits_to_index(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &x| acc * d + x)
}

/// Kronecker product of a list of square matrices, letter 1 first.
pub fn kron_all<'a>(mats: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    mats.into_iter()
        .fold(CMatrix::from_element(1, 1, ONE), |acc, m| acc.kronecker(m))
}
