//! Orthonormal polynomial families, total-degree tensor bases and Gauss rules.
//!
//! Every family is normalized against a *probability* density, so the
//! zeroth polynomial is the constant one and quadrature weights sum to one.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest total order accepted by [`BasisSpec::new`].
pub const MAX_ORDER: usize = 100;

/// Bases larger than this are refused instead of exhausting memory.
pub const MAX_BASIS_SIZE: usize = 10_000_000;

/// Univariate orthogonality measure and its orthonormal polynomials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolyFamily<T> {
    /// Uniform density on [-1, 1].
    Legendre,
    /// Standard normal density.
    HermiteProbabilists,
    /// Density proportional to (1 - x)^a (1 + x)^b on [-1, 1].
    Jacobi { a: T, b: T },
    /// Density proportional to x^a e^{-x} on (0, inf).
    Laguerre { a: T },
}

/// Interval on which a family's density is positive. `None` marks an infinite end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support<T> {
    pub lower: Option<T>,
    pub upper: Option<T>,
}

impl<T: Real> PolyFamily<T> {
    /// Jacobi family whose density is that of `2 Y - 1` for `Y ~ Beta(alpha, beta)`.
    pub fn from_beta(alpha: T, beta: T) -> Result<Self> {
        let fam = PolyFamily::Jacobi {
            a: beta - T::one(),
            b: alpha - T::one(),
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        let minus_one = -T::one();
        match *self {
            PolyFamily::Jacobi { a, b } if !(a > minus_one && b > minus_one) => Err(
                Error::InvalidArgument(format!("Jacobi exponents must exceed -1, got a={a}, b={b}")),
            ),
            PolyFamily::Laguerre { a } if !(a > minus_one) => Err(Error::InvalidArgument(
                format!("Laguerre exponent must exceed -1, got a={a}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            PolyFamily::Legendre => "legendre".into(),
            PolyFamily::HermiteProbabilists => "hermite".into(),
            PolyFamily::Jacobi { a, b } => format!("jacobi({a},{b})"),
            PolyFamily::Laguerre { a } => format!("laguerre({a})"),
        }
    }

    pub fn support(&self) -> Support<T> {
        match self {
            PolyFamily::Legendre | PolyFamily::Jacobi { .. } => Support {
                lower: Some(-T::one()),
                upper: Some(T::one()),
            },
            PolyFamily::HermiteProbabilists => Support {
                lower: None,
                upper: None,
            },
            PolyFamily::Laguerre { .. } => Support {
                lower: Some(T::zero()),
                upper: None,
            },
        }
    }

    /// Monic three-term recurrence coefficients `(alpha_n, beta_n)` with
    /// `p_{n+1} = (x - alpha_n) p_n - beta_n p_{n-1}` and `beta_0 = 1`.
    pub fn recurrence(&self, n: usize) -> (T, T) {
        let nf = T::from_usize_lossy(n);
        let one = T::one();
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        match *self {
            PolyFamily::Legendre => {
                let beta = if n == 0 {
                    one
                } else {
                    nf * nf / (four * nf * nf - one)
                };
                (T::zero(), beta)
            }
            PolyFamily::HermiteProbabilists => (T::zero(), if n == 0 { one } else { nf }),
            PolyFamily::Laguerre { a } => {
                let beta = if n == 0 { one } else { nf * (nf + a) };
                (two * nf + a + one, beta)
            }
            PolyFamily::Jacobi { a, b } => {
                let s = a + b;
                let alpha = if n == 0 {
                    (b - a) / (s + two)
                } else {
                    let k = two * nf + s;
                    (b * b - a * a) / (k * (k + two))
                };
                let beta = match n {
                    0 => one,
                    1 => four * (one + a) * (one + b) / ((two + s) * (two + s) * (T::lit(3.0) + s)),
                    _ => {
                        let k = two * nf + s;
                        four * nf * (nf + a) * (nf + b) * (nf + s) / (k * k * (k + one) * (k - one))
                    }
                };
                (alpha, beta)
            }
        }
    }

    /// Orthogonality density evaluated at `x` (zero outside the support).
    pub fn density(&self, x: T) -> T {
        let zero = T::zero();
        let one = T::one();
        match *self {
            PolyFamily::Legendre => {
                if x.abs() <= one {
                    T::lit(0.5)
                } else {
                    zero
                }
            }
            PolyFamily::HermiteProbabilists => {
                (-x * x / T::lit(2.0)).exp() / T::two_pi().sqrt()
            }
            PolyFamily::Jacobi { a, b } => {
                if x.abs() >= one {
                    return zero;
                }
                let (af, bf) = (a.to_f64_lossy(), b.to_f64_lossy());
                let log_norm = (af + bf + 1.0) * std::f64::consts::LN_2
                    + statrs::function::beta::ln_beta(af + 1.0, bf + 1.0);
                ((one - x).powf(a) * (one + x).powf(b)) / T::lit(log_norm.exp())
            }
            PolyFamily::Laguerre { a } => {
                if x <= zero {
                    return zero;
                }
                let log_norm = statrs::function::gamma::ln_gamma(a.to_f64_lossy() + 1.0);
                x.powf(a) * (-x).exp() / T::lit(log_norm.exp())
            }
        }
    }

    /// Writes `psi_0(x), ..., psi_{max_order}(x)` into `out`.
    pub fn eval_all_into(&self, max_order: usize, x: T, out: &mut [T]) {
        debug_assert!(out.len() > max_order);
        out[0] = T::one();
        if max_order == 0 {
            return;
        }
        let mut prev = T::zero();
        let mut cur = T::one();
        let mut sqrt_beta_n = T::zero();
        for n in 0..max_order {
            let (alpha, _) = self.recurrence(n);
            let (_, beta_next) = self.recurrence(n + 1);
            let sqrt_beta_next = beta_next.sqrt();
            let next = ((x - alpha) * cur - sqrt_beta_n * prev) / sqrt_beta_next;
            out[n + 1] = next;
            prev = cur;
            cur = next;
            sqrt_beta_n = sqrt_beta_next;
        }
    }

    pub fn eval_all(&self, max_order: usize, x: T) -> Vec<T> {
        let mut out = vec![T::zero(); max_order + 1];
        self.eval_all_into(max_order, x, &mut out);
        out
    }

    /// Value and derivative of `psi_order` at `x`.
    fn eval_with_derivative(&self, order: usize, x: T) -> (T, T) {
        let (mut p_prev, mut p_cur) = (T::zero(), T::one());
        let (mut d_prev, mut d_cur) = (T::zero(), T::zero());
        let mut sqrt_beta_n = T::zero();
        for n in 0..order {
            let (alpha, _) = self.recurrence(n);
            let sqrt_beta_next = self.recurrence(n + 1).1.sqrt();
            let p_next = ((x - alpha) * p_cur - sqrt_beta_n * p_prev) / sqrt_beta_next;
            let d_next = ((x - alpha) * d_cur + p_cur - sqrt_beta_n * d_prev) / sqrt_beta_next;
            p_prev = p_cur;
            p_cur = p_next;
            d_prev = d_cur;
            d_cur = d_next;
            sqrt_beta_n = sqrt_beta_next;
        }
        (p_cur, d_cur)
    }
}

/// Orthonormal polynomial of degree `order` of `family` evaluated at `x`.
pub fn eval_univariate<T: Real>(family: &PolyFamily<T>, order: usize, x: T) -> T {
    let mut buf = vec![T::zero(); order + 1];
    family.eval_all_into(order, x, &mut buf);
    buf[order]
}

/// Number of multi-indices with total degree at most `p` in `d` variables.
pub fn cardinality(d: usize, p: usize) -> Result<usize> {
    let overflow = || Error::Overflow(format!("basis cardinality for d={d}, p={p}"));
    // C(p+i, i) built up one factor at a time; each intermediate is an integer.
    let mut count: u128 = 1;
    for i in 1..=d as u128 {
        count = count.checked_mul(p as u128 + i).ok_or_else(overflow)? / i;
    }
    usize::try_from(count).map_err(|_| overflow())
}

/// All multi-indices with `sum(j) <= p`, graded by total degree and in
/// descending lexicographic order within a degree. The first entry is zero.
pub fn multi_index_set(d: usize, p: usize) -> Result<Vec<Vec<usize>>> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let size = cardinality(d, p)?;
    if size > MAX_BASIS_SIZE {
        return Err(Error::InvalidArgument(format!(
            "basis of {size} terms exceeds the enumeration limit of {MAX_BASIS_SIZE}"
        )));
    }
    let mut out = Vec::with_capacity(size);
    let mut current = vec![0usize; d];
    for degree in 0..=p {
        push_compositions(degree, 0, &mut current, &mut out);
    }
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

fn push_compositions(remaining: usize, pos: usize, current: &mut [usize], out: &mut Vec<Vec<usize>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.to_vec());
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first;
        push_compositions(remaining - first, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Total-degree tensor basis over `d` independent inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec<T> {
    families: Vec<PolyFamily<T>>,
    order: usize,
    indices: Vec<Vec<usize>>,
}

impl<T: Real> BasisSpec<T> {
    pub fn new(families: Vec<PolyFamily<T>>, order: usize) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::InvalidArgument("basis needs at least one dimension".into()));
        }
        if order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "total order {order} exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        for fam in &families {
            fam.validate()?;
        }
        let indices = multi_index_set(families.len(), order)?;
        Ok(Self {
            families,
            order,
            indices,
        })
    }

    /// Basis with the same family in every dimension.
    pub fn isotropic(family: PolyFamily<T>, dim: usize, order: usize) -> Result<Self> {
        Self::new(vec![family; dim], order)
    }

    pub fn families(&self) -> &[PolyFamily<T>] {
        &self.families
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of basis functions `P`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// Returns the shared family when every dimension uses it.
    pub fn common_family(&self) -> Option<PolyFamily<T>> {
        let first = self.families[0];
        self.families.iter().all(|f| *f == first).then_some(first)
    }

    /// Fills `table` (`d * (p+1)`, row per dimension) with univariate values at `xi`.
    fn fill_table(&self, xi: &[T], table: &mut [T]) {
        let stride = self.order + 1;
        for (k, fam) in self.families.iter().enumerate() {
            fam.eval_all_into(self.order, xi[k], &mut table[k * stride..(k + 1) * stride]);
        }
    }

    /// Writes the basis row at `xi` into `out` using `table` as scratch.
    pub fn eval_row_into(&self, xi: &[T], table: &mut Vec<T>, out: &mut [T]) {
        assert_eq!(xi.len(), self.dim(), "point dimension does not match the basis");
        assert_eq!(out.len(), self.len());
        let stride = self.order + 1;
        table.resize(self.dim() * stride, T::zero());
        self.fill_table(xi, table);
        for (slot, idx) in out.iter_mut().zip(&self.indices) {
            let mut v = T::one();
            for (k, &j) in idx.iter().enumerate() {
                if j != 0 {
                    v *= table[k * stride + j];
                }
            }
            *slot = v;
        }
    }

    /// Row of the measurement matrix: `psi_j(xi)` for every multi-index.
    pub fn eval_basis_row(&self, xi: &[T]) -> DVector<T> {
        let mut out = DVector::zeros(self.len());
        let mut table = Vec::new();
        self.eval_row_into(xi, &mut table, out.as_mut_slice());
        out
    }

    /// Sum of squared basis values, `B(xi)^2`.
    pub fn sum_squares(&self, xi: &[T], table: &mut Vec<T>, row: &mut Vec<T>) -> T {
        row.resize(self.len(), T::zero());
        self.eval_row_into(xi, table, row);
        row.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    /// Measurement matrix `Psi` for the points stored as rows of `points`.
    pub fn measurement_matrix(&self, points: &DMatrix<T>) -> Result<DMatrix<T>> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        let n = points.nrows();
        let mut psi = DMatrix::zeros(n, self.len());
        let mut table = Vec::new();
        let mut xi = vec![T::zero(); self.dim()];
        let mut row = vec![T::zero(); self.len()];
        for i in 0..n {
            for (k, x) in xi.iter_mut().enumerate() {
                *x = points[(i, k)];
            }
            self.eval_row_into(&xi, &mut table, &mut row);
            for (j, v) in row.iter().enumerate() {
                psi[(i, j)] = *v;
            }
        }
        Ok(psi)
    }
}

/// Gauss rule for a family's probability density.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub family: PolyFamily<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }
}

/// Golub–Welsch nodes, refined by Newton steps, with Christoffel weights.
pub fn gauss_rule<T: Real>(family: &PolyFamily<T>, n: usize) -> Result<QuadratureRule<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
    }
    family.validate()?;
    let mut jacobi = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        let (alpha, _) = family.recurrence(i);
        jacobi[(i, i)] = alpha;
        if i + 1 < n {
            let off = family.recurrence(i + 1).1.sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::try_new(jacobi, T::eps(), 0)
        .ok_or_else(|| Error::EigenFailure(format!("Jacobi matrix of size {n}")))?;
    let mut nodes: Vec<T> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    for x in nodes.iter_mut() {
        for _ in 0..2 {
            let (p, dp) = family.eval_with_derivative(n, *x);
            if dp == T::zero() {
                break;
            }
            let candidate = *x - p / dp;
            let (pc, _) = family.eval_with_derivative(n, candidate);
            if pc.abs() < p.abs() {
                *x = candidate;
            } else {
                break;
            }
        }
    }

    let mut buf = vec![T::zero(); n];
    let weights = nodes
        .iter()
        .map(|&x| {
            family.eval_all_into(n - 1, x, &mut buf);
            T::one() / buf.iter().fold(T::zero(), |acc, &v| acc + v * v)
        })
        .collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        family: *family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cardinalities() {
        assert_eq!(multi_index_set(3, 9).unwrap().len(), 220);
        assert_eq!(multi_index_set(4, 4).unwrap().len(), 70);
        assert_eq!(multi_index_set(15, 2).unwrap().len(), 136);
        assert_eq!(cardinality(7, 3).unwrap(), 120);
    }

    #[test]
    fn cardinality_overflow_is_reported() {
        assert!(matches!(cardinality(200, 200), Err(Error::Overflow(_))));
    }

    #[test]
    fn index_order_is_graded_lex() {
        let idx = multi_index_set(2, 2).unwrap();
        let expect: Vec<Vec<usize>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(idx, expect);
    }

    #[test]
    fn constant_polynomial_is_one() {
        for fam in [
            PolyFamily::Legendre,
            PolyFamily::HermiteProbabilists,
            PolyFamily::Jacobi { a: 0.5, b: 2.0 },
            PolyFamily::Laguerre { a: 1.5 },
        ] {
            assert_eq!(eval_univariate(&fam, 0, 3.7_f64), 1.0);
        }
    }

    #[test]
    fn known_low_order_values() {
        assert_relative_eq!(
            eval_univariate(&PolyFamily::Legendre, 1, 0.5_f64),
            0.866_025_403_784_438_6,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            eval_univariate(&PolyFamily::HermiteProbabilists, 2, 0.0_f64),
            -std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-14
        );
    }

    #[test]
    fn basis_rows() {
        let b0 = BasisSpec::<f64>::isotropic(PolyFamily::Legendre, 3, 0).unwrap();
        assert_eq!(b0.eval_basis_row(&[0.3, -0.2, 0.9]).as_slice(), &[1.0]);

        let b1 = BasisSpec::<f64>::isotropic(PolyFamily::Legendre, 1, 2).unwrap();
        let r = b1.eval_basis_row(&[0.0]);
        assert_relative_eq!(r[0], 1.0);
        assert_relative_eq!(r[1], 0.0);
        assert_relative_eq!(r[2], -1.118_033_988_749_895, epsilon = 1e-14);

        let b2 = BasisSpec::<f64>::isotropic(PolyFamily::Legendre, 2, 1).unwrap();
        let r = b2.eval_basis_row(&[1.0, 1.0]);
        assert_relative_eq!(r[1], 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(r[2], 3f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn small_gauss_rules() {
        let r = gauss_rule(&PolyFamily::<f64>::Legendre, 1).unwrap();
        assert_relative_eq!(r.nodes[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r.weights[0], 1.0, epsilon = 1e-15);

        let h = gauss_rule(&PolyFamily::<f64>::HermiteProbabilists, 2).unwrap();
        assert_relative_eq!(h.nodes[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(h.nodes[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(h.weights[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(h.weights[1], 0.5, epsilon = 1e-14);

        let l = gauss_rule(&PolyFamily::<f64>::Legendre, 50).unwrap();
        assert_relative_eq!(l.integrate(|x| x * x), 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(l.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn invalid_family_parameters() {
        assert!(PolyFamily::Jacobi { a: -1.0, b: 0.0 }.validate().is_err());
        assert!(PolyFamily::Laguerre { a: -1.5_f64 }.validate().is_err());
        assert!(BasisSpec::<f64>::new(vec![], 2).is_err());
        assert!(gauss_rule(&PolyFamily::<f64>::Legendre, 0).is_err());
    }

    #[test]
    fn beta_mapping_sets_exponents() {
        let fam = PolyFamily::from_beta(21.2_f64, 31.8).unwrap();
        match fam {
            PolyFamily::Jacobi { a, b } => {
                assert_relative_eq!(a, 30.8, epsilon = 1e-12);
                assert_relative_eq!(b, 20.2, epsilon = 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for fam in [
            PolyFamily::Legendre,
            PolyFamily::HermiteProbabilists,
            PolyFamily::Jacobi { a: 2.0, b: 3.5 },
            PolyFamily::Laguerre { a: 1.0 },
        ] {
            // midpoint rule on a wide window
            let (lo, hi) = match fam.support() {
                Support { lower: Some(l), upper: Some(u) } => (l, u),
                Support { lower: Some(l), upper: None } => (l, 60.0),
                _ => (-12.0, 12.0),
            };
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let total: f64 = (0..n).map(|i| fam.density(lo + (i as f64 + 0.5) * h) * h).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn f32_basis_matches_f64() {
        let b32 = BasisSpec::<f32>::isotropic(PolyFamily::Legendre, 2, 3).unwrap();
        let b64 = BasisSpec::<f64>::isotropic(PolyFamily::Legendre, 2, 3).unwrap();
        let r32 = b32.eval_basis_row(&[0.25, -0.6]);
        let r64 = b64.eval_basis_row(&[0.25, -0.6]);
        for (a, b) in r32.iter().zip(r64.iter()) {
            assert!((*a as f64 - b).abs() < 1e-5);
        }
    }
}
