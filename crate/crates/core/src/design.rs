//! Alphabetic optimality criteria, the sequential greedy construction and
//! Fedorov's exchange algorithm.
//!
//! Every criterion is minimized. Candidate rows enter already multiplied by
//! their least-squares weights.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::orthopoly::BasisSpec;
use crate::sampling::{sample_coherence_optimal, sample_standard, CandidatePool, McmcConfig, SampleSet, Strategy};
use crate::scalar::Real;
use crate::seed::derive_seed;
use crate::solver::{info_matrix, weighted_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// `|M^{-1}|^{1/P}`.
    D,
    /// `Tr(M^{-1})`; I-optimality coincides with it for orthonormal bases.
    A,
    /// Largest eigenvalue of `M^{-1}`.
    E,
    /// Condition number of `M`.
    K,
}

impl Criterion {
    pub fn letter(&self) -> &'static str {
        match self {
            Criterion::D => "d",
            Criterion::A => "a",
            Criterion::E => "e",
            Criterion::K => "k",
        }
    }

    pub fn parse(s: &str) -> Option<Criterion> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d" => Some(Criterion::D),
            "a" | "i" => Some(Criterion::A),
            "e" => Some(Criterion::E),
            "k" => Some(Criterion::K),
            _ => None,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.letter().to_ascii_uppercase())
    }
}

/// Relative size below which a pivot or eigenvalue is treated as zero.
fn singular_tol<T: Real>() -> T {
    T::eps().sqrt() * T::lit(1e-2)
}

/// Criterion of a symmetric information matrix; `+inf` when it is singular.
pub fn criterion_of_info<T: Real>(criterion: Criterion, m: &DMatrix<T>) -> T {
    let p = m.nrows();
    if p == 0 {
        return T::infinity();
    }
    let scale = m.diagonal().iter().copied().fold(T::zero(), |a, b| a.max(b));
    if scale <= T::zero() || !scale.is_finite_value() {
        return T::infinity();
    }
    let tol = singular_tol::<T>() * scale;
    match criterion {
        Criterion::D | Criterion::A => {
            let Some(chol) = m.clone().cholesky() else {
                return T::infinity();
            };
            let l = chol.l_dirty();
            if (0..p).any(|i| l[(i, i)] * l[(i, i)] <= tol) {
                return T::infinity();
            }
            if criterion == Criterion::D {
                let logdet = (0..p).fold(T::zero(), |acc, i| acc + l[(i, i)].ln()) * T::lit(2.0);
                (-logdet / T::from_usize_lossy(p)).exp()
            } else {
                chol.inverse().trace()
            }
        }
        Criterion::E | Criterion::K => {
            let Some(eig) = SymmetricEigen::try_new(m.clone(), T::eps(), 0) else {
                return T::infinity();
            };
            let lmin = eig.eigenvalues.iter().copied().fold(T::infinity(), |a, b| a.min(b));
            let lmax = eig.eigenvalues.iter().copied().fold(-T::infinity(), |a, b| a.max(b));
            if lmin <= tol {
                return T::infinity();
            }
            if criterion == Criterion::E {
                T::one() / lmin
            } else {
                lmax / lmin
            }
        }
    }
}

/// Criterion value of the design `W Psi` with `M = (W Psi)^T (W Psi) / N`.
pub fn criterion_value<T: Real>(criterion: Criterion, psi: &DMatrix<T>, weights: Option<&DVector<T>>) -> Result<T> {
    Ok(criterion_of_info(criterion, &info_matrix(psi, weights)?))
}

/// Rows selected from a candidate matrix together with cached quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState<T> {
    /// Candidate row indices in selection order.
    pub selected: Vec<usize>,
    /// Columns active at the last step: all `P` once the design has `P` rows.
    pub active_columns: Vec<usize>,
    pub criterion: Criterion,
    /// Criterion value of the final design, tracked along the update path.
    pub value: T,
    /// `M^{-1}` of the final design.
    pub inverse_cache: Option<DMatrix<T>>,
    /// Swaps performed by [`fedorov_exchange`].
    pub exchanges: usize,
}

impl<T: Real> DesignState<T> {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

fn validate_greedy<T: Real>(psi_c: &DMatrix<T>, n: usize) -> Result<()> {
    let (nc, p) = psi_c.shape();
    if p == 0 {
        return Err(Error::InvalidArgument("candidate matrix has no columns".into()));
    }
    if n < p || nc < n {
        return Err(Error::InvalidArgument(format!(
            "greedy design needs N_c >= N >= P, got N_c = {nc}, N = {n}, P = {p}"
        )));
    }
    Ok(())
}

fn pick_min<T: Real>(scores: &[T], taken: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if taken[i] || !s.is_finite_value() {
            continue;
        }
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Midpoint bisection for a root of a monotone `f` on `(lo, hi)`.
/// `increasing` gives the sign convention.
fn bisect<T: Real>(mut lo: T, mut hi: T, increasing: bool, f: impl Fn(T) -> T) -> T {
    let half = T::lit(0.5);
    for _ in 0..200 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v != v {
            break;
        }
        if (v < T::zero()) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::eps() * hi.abs().max(lo.abs()) {
            break;
        }
    }
    (lo + hi) * half
}

/// Extreme eigenvalues of `diag(lam) + z z^T` (`lam` ascending).
fn rank_one_extremes<T: Real>(lam: &[T], z: &[T]) -> (T, T) {
    let z2: Vec<T> = z.iter().map(|&v| v * v).collect();
    let zn = z2.iter().fold(T::zero(), |a, &b| a + b);
    let p = lam.len();
    if p == 1 {
        let v = lam[0] + zn;
        return (v, v);
    }
    let secular = |mu: T| {
        lam.iter()
            .zip(&z2)
            .fold(T::one(), |acc, (&l, &w)| acc + w / (l - mu))
    };
    let lo_hi = (lam[1]).min(lam[0] + zn);
    let mu_min = if lo_hi > lam[0] { bisect(lam[0], lo_hi, true, secular) } else { lam[0] };
    let mu_max = if zn > T::zero() {
        bisect(lam[p - 1], lam[p - 1] + zn, true, secular)
    } else {
        lam[p - 1]
    };
    (mu_min, mu_max)
}

/// Extreme eigenvalues of the arrowhead matrix `[[diag(lam), z], [z^T, c]]`.
fn arrowhead_extremes<T: Real>(lam: &[T], z: &[T], c: T) -> (T, T) {
    if lam.is_empty() {
        return (c, c);
    }
    let z2: Vec<T> = z.iter().map(|&v| v * v).collect();
    let zn = z2.iter().fold(T::zero(), |a, &b| a + b).sqrt();
    let g = |mu: T| {
        lam.iter()
            .zip(&z2)
            .fold(c - mu, |acc, (&l, &w)| acc - w / (l - mu))
    };
    let n = lam.len();
    let lo = (lam[0].min(c) - zn).max(T::zero());
    let mu_min = if lam[0] > lo { bisect(lo, lam[0], false, g) } else { lam[0] };
    let top = lam[n - 1].max(c);
    let mu_max = if zn > T::zero() { bisect(top, top + zn, false, g) } else { top };
    (mu_min, mu_max)
}

/// Ascending eigenvalues and matching eigenvectors (columns) of a symmetric matrix.
fn sorted_eigen<T: Real>(m: DMatrix<T>) -> Result<(Vec<T>, DMatrix<T>)> {
    let eig = SymmetricEigen::try_new(m, T::eps(), 0)
        .ok_or_else(|| Error::EigenFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let lam = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let q = eig.eigenvectors.select_columns(order.iter());
    Ok((lam, q))
}

fn eigen_score<T: Real>(criterion: Criterion, mu_min: T, mu_max: T) -> T {
    if !(mu_min > singular_tol::<T>() * mu_max) {
        return T::infinity();
    }
    match criterion {
        Criterion::E => -mu_min,
        _ => mu_max / mu_min,
    }
}

/// Sequential greedy construction over the weighted candidate rows.
///
/// While fewer than `P` rows are selected, the design uses only its leading
/// square block (one column added per row). Afterwards the full information
/// matrix is updated by rank-one formulas. Ties go to the lowest candidate index.
pub fn greedy_design<T: Real>(
    psi_c: &DMatrix<T>,
    weights: Option<&DVector<T>>,
    n: usize,
    criterion: Criterion,
) -> Result<DesignState<T>> {
    validate_greedy(psi_c, n)?;
    let a = weighted_matrix(psi_c, weights)?;
    let (nc, p) = a.shape();
    let tol = singular_tol::<T>();
    let row_norms: Vec<T> = (0..nc).map(|i| a.row(i).norm()).collect();

    let mut taken = vec![false; nc];
    let mut selected: Vec<usize> = Vec::with_capacity(n);
    let mut scores = vec![T::zero(); nc];

    // growth phase: V holds r_i S^{-1} for every candidate, X = S^{-1}
    let mut v = DMatrix::<T>::zeros(nc, p);
    let mut x = DMatrix::<T>::zeros(p, p);
    let mut eig_tracked = (T::zero(), T::zero());
    for step in 0..p {
        let k = step;
        let s = DVector::from_iterator(k, selected.iter().map(|&r| a[(r, k)]));
        let mut gamma: DVector<T> = a.column(k).into_owned();
        if k > 0 {
            gamma -= v.columns(0, k) * &s;
        }
        let singular = |i: usize, g: T| g.abs() <= tol * row_norms[i];
        match criterion {
            Criterion::D => {
                for i in 0..nc {
                    scores[i] = if singular(i, gamma[i]) { T::infinity() } else { -gamma[i].abs() };
                }
            }
            Criterion::A => {
                let xk = x.view((0, 0), (k, k));
                let u = xk * &s;
                let y = xk.tr_mul(&u);
                let xnorm2 = xk.norm_squared();
                let unorm2 = u.norm_squared();
                let yv = if k > 0 { v.columns(0, k) * &y } else { DVector::zeros(nc) };
                for i in 0..nc {
                    let g = gamma[i];
                    scores[i] = if singular(i, g) {
                        T::infinity()
                    } else {
                        let vn2 = v.view((i, 0), (1, k)).norm_squared();
                        xnorm2 + T::lit(2.0) * yv[i] / g + (T::one() + unorm2) * (T::one() + vn2) / (g * g)
                    };
                }
            }
            Criterion::E | Criterion::K => {
                if k == 0 {
                    for i in 0..nc {
                        let c = a[(i, 0)] * a[(i, 0)];
                        scores[i] = if singular(i, a[(i, 0)]) {
                            T::infinity()
                        } else {
                            eigen_score(criterion, c, c)
                        };
                    }
                } else {
                    let s_ext = a.select_rows(selected.iter()).columns(0, k + 1).into_owned();
                    let (lam, q) = sorted_eigen(&s_ext * s_ext.transpose())?;
                    let b = a.columns(0, k + 1);
                    let z = q.tr_mul(&(&s_ext * b.transpose()));
                    for i in 0..nc {
                        if taken[i] || singular(i, gamma[i]) {
                            scores[i] = T::infinity();
                            continue;
                        }
                        let c = b.row(i).norm_squared();
                        let zi: Vec<T> = z.column(i).iter().copied().collect();
                        let (lo, hi) = arrowhead_extremes(&lam, &zi, c);
                        scores[i] = eigen_score(criterion, lo, hi);
                    }
                }
            }
        }
        let sel = pick_min(&scores, &taken).ok_or(Error::ConstructionFailure { step: step + 1 })?;
        let g = gamma[sel];
        if matches!(criterion, Criterion::E | Criterion::K) {
            // recompute the chosen extremes for tracking
            eig_tracked = if k == 0 {
                let c = a[(sel, 0)] * a[(sel, 0)];
                (c, c)
            } else {
                let s_ext = a.select_rows(selected.iter()).columns(0, k + 1).into_owned();
                let (lam, q) = sorted_eigen(&s_ext * s_ext.transpose())?;
                let b = a.view((sel, 0), (1, k + 1)).transpose();
                let zi: Vec<T> = q.tr_mul(&(&s_ext * &b)).iter().copied().collect();
                arrowhead_extremes(&lam, &zi, b.norm_squared())
            };
        }
        if criterion == Criterion::A {
            let xk = x.view((0, 0), (k, k)).into_owned();
            let u = &xk * &s;
            let vs = v.view((sel, 0), (1, k)).into_owned();
            let mut xn = DMatrix::zeros(k + 1, k + 1);
            xn.view_mut((0, 0), (k, k)).copy_from(&(xk + &u * &vs / g));
            xn.view_mut((0, k), (k, 1)).copy_from(&(-&u / g));
            xn.view_mut((k, 0), (1, k)).copy_from(&(-&vs / g));
            xn[(k, k)] = T::one() / g;
            x.view_mut((0, 0), (k + 1, k + 1)).copy_from(&xn);
        }
        // v_i <- [v_i - (gamma_i / gamma) v_s, gamma_i / gamma]
        let vs: Vec<T> = (0..k).map(|j| v[(sel, j)]).collect();
        for j in 0..k {
            let vsj = vs[j];
            let mut col = v.column_mut(j);
            for i in 0..nc {
                col[i] -= gamma[i] / g * vsj;
            }
        }
        for i in 0..nc {
            v[(i, k)] = gamma[i] / g;
        }
        taken[sel] = true;
        selected.push(sel);
    }
    drop(v);

    // full-rank phase
    let s_full = a.select_rows(selected.iter());
    let mut gram = s_full.tr_mul(&s_full);
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(Error::ConstructionFailure { step: p })?;
    let l = chol.l_dirty();
    let mut logdet = (0..p).fold(T::zero(), |acc, i| acc + l[(i, i)].ln()) * T::lit(2.0);
    let mut ainv = chol.inverse();
    let mut trace = ainv.trace();

    let y = &a * &ainv;
    let mut d: Vec<T> = (0..nc).map(|i| y.row(i).dot(&a.row(i))).collect();
    let mut e: Vec<T> = (0..nc).map(|i| y.row(i).norm_squared()).collect();
    drop(y);

    while selected.len() < n {
        match criterion {
            Criterion::D => {
                for i in 0..nc {
                    scores[i] = -d[i];
                }
            }
            Criterion::A => {
                for i in 0..nc {
                    scores[i] = -e[i] / (T::one() + d[i]);
                }
            }
            Criterion::E | Criterion::K => {
                let (lam, q) = sorted_eigen(gram.clone())?;
                let z = q.tr_mul(&a.transpose());
                for i in 0..nc {
                    if taken[i] {
                        continue;
                    }
                    let zi: Vec<T> = z.column(i).iter().copied().collect();
                    let (lo, hi) = rank_one_extremes(&lam, &zi);
                    scores[i] = eigen_score(criterion, lo, hi);
                }
            }
        }
        let step = selected.len() + 1;
        let sel = pick_min(&scores, &taken).ok_or(Error::ConstructionFailure { step })?;
        if matches!(criterion, Criterion::E | Criterion::K) {
            let (lam, q) = sorted_eigen(gram.clone())?;
            let zi: Vec<T> = q.tr_mul(&a.row(sel).transpose()).iter().copied().collect();
            eig_tracked = rank_one_extremes(&lam, &zi);
        }
        let xr = a.row(sel).transpose();
        let g = &ainv * &xr;
        let c = T::one() + xr.dot(&g);
        let kv = &ainv * &g;
        let h = &a * &g;
        let kk = &a * &kv;
        let g2 = g.norm_squared();
        for i in 0..nc {
            let hi = h[i];
            d[i] -= hi * hi / c;
            e[i] = e[i] - T::lit(2.0) * hi * kk[i] / c + hi * hi * g2 / (c * c);
        }
        ainv -= &g * g.transpose() / c;
        logdet += c.ln();
        trace -= g2 / c;
        gram += &xr * xr.transpose();
        taken[sel] = true;
        selected.push(sel);
    }

    let nn = T::from_usize_lossy(n);
    let value = match criterion {
        Criterion::D => nn * (-logdet / T::from_usize_lossy(p)).exp(),
        Criterion::A => nn * trace,
        Criterion::E => nn / eig_tracked.0,
        Criterion::K => eig_tracked.1 / eig_tracked.0,
    };
    Ok(DesignState {
        selected,
        active_columns: (0..p).collect(),
        criterion,
        value,
        inverse_cache: Some(ainv * nn),
        exchanges: 0,
    })
}

/// Greedy construction that recomputes the criterion from scratch for every
/// candidate at every step. Slow; used to check [`greedy_design`].
pub fn greedy_design_naive<T: Real>(
    psi_c: &DMatrix<T>,
    weights: Option<&DVector<T>>,
    n: usize,
    criterion: Criterion,
) -> Result<DesignState<T>> {
    validate_greedy(psi_c, n)?;
    let a = weighted_matrix(psi_c, weights)?;
    let (nc, p) = a.shape();
    let mut taken = vec![false; nc];
    let mut selected: Vec<usize> = Vec::with_capacity(n);
    let mut scores = vec![T::infinity(); nc];
    while selected.len() < n {
        let cols = (selected.len() + 1).min(p);
        for i in 0..nc {
            if taken[i] {
                continue;
            }
            let mut rows = selected.clone();
            rows.push(i);
            let sub = a.select_rows(rows.iter()).columns(0, cols).into_owned();
            scores[i] = criterion_value(criterion, &sub, None)?;
        }
        let sel = pick_min(&scores, &taken).ok_or(Error::ConstructionFailure {
            step: selected.len() + 1,
        })?;
        taken[sel] = true;
        selected.push(sel);
    }
    finish_state(&a, selected, criterion, 0)
}

fn finish_state<T: Real>(
    a: &DMatrix<T>,
    selected: Vec<usize>,
    criterion: Criterion,
    exchanges: usize,
) -> Result<DesignState<T>> {
    let s = a.select_rows(selected.iter());
    let m = info_matrix(&s, None)?;
    let value = criterion_of_info(criterion, &m);
    let inverse_cache = m.try_inverse();
    Ok(DesignState {
        selected,
        active_columns: (0..a.ncols()).collect(),
        criterion,
        value,
        inverse_cache,
        exchanges,
    })
}

/// Fedorov's Delta for exchanging design row `i` with candidate `j`:
/// the determinant ratio after the swap is `1 + Delta`.
pub fn fedorov_delta<T: Real>(d_i: T, d_j: T, d_ij: T) -> T {
    d_j - (d_i * d_j - d_ij * d_ij) - d_i
}

/// Fedorov exchange for the D-criterion: repeatedly swaps the
/// (design row, candidate) pair with the largest Delta until it drops below `tol`.
pub fn fedorov_exchange<T: Real>(
    design: &DesignState<T>,
    psi_c: &DMatrix<T>,
    weights: Option<&DVector<T>>,
    tol: T,
    max_iter: usize,
) -> Result<DesignState<T>> {
    if design.criterion != Criterion::D {
        return Err(Error::UnsupportedStrategy {
            strategy: format!("fedorov-{}", design.criterion.letter()),
            reason: "exchange is defined for the D-criterion only".into(),
        });
    }
    let a = weighted_matrix(psi_c, weights)?;
    let nc = a.nrows();
    if design.selected.iter().any(|&i| i >= nc) {
        return Err(Error::InvalidArgument("design refers to rows outside the candidate matrix".into()));
    }
    let mut selected = design.selected.clone();
    let mut exchanges = design.exchanges;
    let mut in_design = vec![false; nc];
    for &i in &selected {
        in_design[i] = true;
    }
    for _ in 0..max_iter {
        let s = a.select_rows(selected.iter());
        let chol = s
            .tr_mul(&s)
            .cholesky()
            .ok_or(Error::SingularUpdate(0.0))?;
        let ainv = chol.inverse();
        let y = &a * &ainv;
        let d: Vec<T> = (0..nc).map(|i| y.row(i).dot(&a.row(i))).collect();
        let outside: Vec<usize> = (0..nc).filter(|&j| !in_design[j]).collect();
        if outside.is_empty() {
            break;
        }
        let y_in = y.select_rows(selected.iter());
        let a_out = a.select_rows(outside.iter());
        let cross = y_in * a_out.transpose();
        let mut best: Option<(usize, usize, T)> = None;
        for (pos, &i) in selected.iter().enumerate() {
            for (col, &j) in outside.iter().enumerate() {
                let delta = fedorov_delta(d[i], d[j], cross[(pos, col)]);
                if best.is_none_or(|(_, _, b)| delta > b) {
                    best = Some((pos, j, delta));
                }
            }
        }
        let Some((pos, j, delta)) = best else { break };
        if !(delta >= tol) || delta <= T::zero() {
            break;
        }
        in_design[selected[pos]] = false;
        in_design[j] = true;
        selected[pos] = j;
        exchanges += 1;
    }
    if exchanges == design.exchanges {
        return Ok(design.clone());
    }
    finish_state(&a, selected, Criterion::D, exchanges)
}

/// Whether a rank-one term is added to or removed from the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSign {
    Add,
    Remove,
}

impl UpdateSign {
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            UpdateSign::Add => x,
            UpdateSign::Remove => -x,
        }
    }
}

/// `|A +- a a^T| / |A| = 1 +- a^T A^{-1} a`.
pub fn det_update_ratio<T: Real>(a_inv: &DMatrix<T>, a: &DVector<T>, sign: UpdateSign) -> T {
    T::one() + sign.apply(a.dot(&(a_inv * a)))
}

/// Sherman–Morrison update of `A^{-1}` for `A +- a a^T`, with the new trace.
pub fn trace_update<T: Real>(a_inv: &DMatrix<T>, a: &DVector<T>, sign: UpdateSign) -> Result<(T, DMatrix<T>)> {
    let g = a_inv * a;
    let denom = T::one() + sign.apply(a.dot(&g));
    if denom.abs() <= T::lit(1e-12) {
        return Err(Error::SingularUpdate(denom.to_f64_lossy()));
    }
    let new_inv = a_inv - (&g * g.transpose()) * (sign.apply(T::one()) / denom);
    let trace = a_inv.trace() - sign.apply(g.norm_squared()) / denom;
    Ok((trace, new_inv))
}

/// `floor(1.5 P ln P)`, the default candidate-pool size.
pub fn default_candidate_count(p: usize) -> usize {
    if p < 2 {
        return p;
    }
    (1.5 * p as f64 * (p as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ExchangeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    /// Candidate pool size; defaults to `max(N, floor(1.5 P ln P))`.
    pub candidates: Option<usize>,
    /// Independent candidate pools tried; the best criterion value wins.
    pub restarts: usize,
    /// Follow the greedy construction with Fedorov exchange (D only).
    pub exchange: Option<ExchangeOptions>,
    pub mcmc: McmcConfig,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            candidates: None,
            restarts: 1,
            exchange: None,
            mcmc: McmcConfig::default(),
        }
    }
}

/// Selects `n` points from a candidate pool by the greedy construction.
pub fn alphabetic_design<T: Real>(
    spec: &BasisSpec<T>,
    n: usize,
    criterion: Criterion,
    pool: CandidatePool,
    seed: u64,
    opts: &DesignOptions,
) -> Result<(SampleSet<T>, DesignState<T>)> {
    let p = spec.len();
    let nc = match opts.candidates {
        Some(nc) if nc < n => {
            return Err(Error::InvalidArgument(format!(
                "candidate pool of {nc} cannot supply {n} points"
            )))
        }
        Some(nc) => nc,
        None => default_candidate_count(p).max(n),
    };
    let mut best: Option<(SampleSet<T>, DesignState<T>)> = None;
    for r in 0..opts.restarts.max(1) {
        let pool_seed = if r == 0 { seed } else { derive_seed(seed, &[r as u64]) };
        let cands = match pool {
            CandidatePool::CoherenceOptimal => sample_coherence_optimal(spec, nc, pool_seed, &opts.mcmc),
            CandidatePool::Standard => sample_standard(spec, nc, pool_seed),
        };
        let psi_c = spec.measurement_matrix(&cands.points)?;
        let mut state = greedy_design(&psi_c, Some(&cands.weights), n, criterion)?;
        if let Some(ex) = opts.exchange {
            state = fedorov_exchange(&state, &psi_c, Some(&cands.weights), T::lit(ex.tol), ex.max_iter)?;
        }
        if best.as_ref().is_none_or(|(_, b)| state.value < b.value) {
            let mut set = cands.select_rows(&state.selected);
            set.strategy = Strategy::Alphabetic { criterion, pool };
            set.seed = seed;
            set = set
                .with_param("n_candidates", nc)
                .with_param("restart", r);
            best = Some((set, state));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Alphabetic design over a coherence-optimal candidate pool of size `n_c`.
pub fn hybrid_design<T: Real>(
    spec: &BasisSpec<T>,
    n: usize,
    n_c: usize,
    criterion: Criterion,
    seed: u64,
) -> Result<(SampleSet<T>, DesignState<T>)> {
    let opts = DesignOptions {
        candidates: Some(n_c),
        ..DesignOptions::default()
    };
    alphabetic_design(spec, n, criterion, CandidatePool::CoherenceOptimal, seed, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::PolyFamily;
    use approx::assert_relative_eq;
    use rand::RngExt;

    fn random_matrix(nr: usize, nc: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seed::rng_from_seed(seed);
        DMatrix::from_fn(nr, nc, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn criteria_on_identity_and_diagonal() {
        let i4 = DMatrix::<f64>::identity(4, 4);
        assert_relative_eq!(criterion_of_info(Criterion::D, &i4), 1.0, epsilon = 1e-14);
        assert_relative_eq!(criterion_of_info(Criterion::A, &i4), 4.0, epsilon = 1e-14);
        assert_relative_eq!(criterion_of_info(Criterion::E, &i4), 1.0, epsilon = 1e-14);
        assert_relative_eq!(criterion_of_info(Criterion::K, &i4), 1.0, epsilon = 1e-14);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
        assert_relative_eq!(criterion_of_info(Criterion::D, &m), 1.0, epsilon = 1e-14);
        assert_relative_eq!(criterion_of_info(Criterion::A, &m), 2.5, epsilon = 1e-14);
        assert_relative_eq!(criterion_of_info(Criterion::E, &m), 2.0, epsilon = 1e-14);
        assert_relative_eq!(criterion_of_info(Criterion::K, &m), 4.0, epsilon = 1e-13);
    }

    #[test]
    fn duplicate_rows_are_singular() {
        let psi = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 1.0, 0.3]);
        for c in [Criterion::D, Criterion::A, Criterion::E, Criterion::K] {
            assert_eq!(criterion_value(c, &psi, None).unwrap(), f64::INFINITY);
        }
    }

    #[test]
    fn criterion_parse_aliases_i_to_a() {
        assert_eq!(Criterion::parse("I"), Some(Criterion::A));
        assert_eq!(Criterion::parse("x"), None);
    }

    #[test]
    fn det_and_trace_updates_on_identity() {
        let inv = DMatrix::<f64>::identity(3, 3);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(det_update_ratio(&inv, &e1, UpdateSign::Add), 2.0);
        assert_eq!(det_update_ratio(&inv, &e1, UpdateSign::Remove), 0.0);
        let (tr, _) = trace_update(&inv, &e1, UpdateSign::Add).unwrap();
        assert_relative_eq!(tr, 2.5);
        let (tr, m) = trace_update(&inv, &DVector::zeros(3), UpdateSign::Add).unwrap();
        assert_eq!(tr, 3.0);
        assert_eq!(m, inv);
        assert!(matches!(
            trace_update(&inv, &e1, UpdateSign::Remove),
            Err(Error::SingularUpdate(_))
        ));
    }

    #[test]
    fn greedy_takes_everything_when_pool_equals_n() {
        let psi = random_matrix(6, 3, 1);
        let st = greedy_design(&psi, None, 6, Criterion::D).unwrap();
        let mut s = st.selected.clone();
        s.sort();
        assert_eq!(s, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn greedy_matches_naive_on_small_instances() {
        for (seed, crit) in [(3, Criterion::D), (4, Criterion::A), (5, Criterion::E), (6, Criterion::K)] {
            let psi = random_matrix(30, 6, seed);
            let w = DVector::from_fn(30, |i, _| 0.5 + (i % 7) as f64 / 7.0);
            let fast = greedy_design(&psi, Some(&w), 12, crit).unwrap();
            let slow = greedy_design_naive(&psi, Some(&w), 12, crit).unwrap();
            assert_eq!(fast.selected, slow.selected, "criterion {crit}");
            assert_relative_eq!(fast.value, slow.value, max_relative = 1e-8);
        }
    }

    #[test]
    fn greedy_rejects_bad_sizes() {
        let psi = random_matrix(5, 3, 2);
        assert!(greedy_design(&psi, None, 2, Criterion::D).is_err());
        assert!(greedy_design(&psi, None, 6, Criterion::D).is_err());
    }

    #[test]
    fn all_zero_candidates_fail_construction() {
        let psi = DMatrix::<f64>::zeros(4, 2);
        assert_eq!(
            greedy_design(&psi, None, 2, Criterion::D),
            Err(Error::ConstructionFailure { step: 1 })
        );
    }

    #[test]
    fn fedorov_with_infinite_tolerance_is_identity() {
        let psi = random_matrix(10, 3, 8);
        let st = greedy_design(&psi, None, 4, Criterion::D).unwrap();
        let out = fedorov_exchange(&st, &psi, None, f64::INFINITY, 10).unwrap();
        assert_eq!(out, st);
        let a = fedorov_exchange(&st, &psi, None, 1e-9, 50).unwrap();
        assert!(criterion_value(Criterion::D, &psi.select_rows(a.selected.iter()), None).unwrap() <= st.value * (1.0 + 1e-12));
    }

    #[test]
    fn default_pool_size() {
        assert_eq!(default_candidate_count(220), 1779);
    }

    #[test]
    fn hybrid_selects_subset_of_candidates() {
        let spec = BasisSpec::isotropic(PolyFamily::<f64>::Legendre, 2, 3).unwrap();
        let (set, st) = hybrid_design(&spec, 12, 40, Criterion::D, 11).unwrap();
        assert_eq!(set.len(), 12);
        assert_eq!(set.candidate_indices.as_ref().unwrap(), &st.selected);
        assert_eq!(set.strategy.name(), "d-coh-opt");
    }
}
