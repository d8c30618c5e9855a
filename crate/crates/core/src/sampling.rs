//! Sample-set generators and the diagnostics used to compare them.
//!
//! Each generator returns a [`SampleSet`]: the points, their least-squares
//! weights and enough provenance (strategy, seed, parameters) to regenerate
//! them. Random strategies are pure functions of their arguments.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist, StandardNormal};
use statrs::distribution::{Beta, ContinuousCDF, Gamma, Normal};

use crate::design::Criterion;
use crate::error::{Error, Result};
use crate::orthopoly::{gauss_rule, BasisSpec, PolyFamily};
use crate::scalar::Real;
use crate::seed::{derive_seed, rng_from_seed, SampleRng};

/// Where the candidate pool of an alphabetic design comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidatePool {
    /// Coherence-optimal draws (the hybrid alphabetic-coherence-optimal scheme).
    CoherenceOptimal,
    /// Draws from the orthogonality measure (classical optimal design).
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Standard,
    Lhs,
    AsymptoticChebyshev,
    AsymptoticBall,
    CoherenceOptimal,
    RandQuadrature,
    HaltonQmc,
    Alphabetic {
        criterion: Criterion,
        pool: CandidatePool,
    },
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::Standard => "standard".into(),
            Strategy::Lhs => "lhs".into(),
            Strategy::AsymptoticChebyshev => "asymptotic-chebyshev".into(),
            Strategy::AsymptoticBall => "asymptotic-ball".into(),
            Strategy::CoherenceOptimal => "coh-opt".into(),
            Strategy::RandQuadrature => "rand-quad".into(),
            Strategy::HaltonQmc => "qmc".into(),
            Strategy::Alphabetic { criterion, pool } => match pool {
                CandidatePool::CoherenceOptimal => format!("{}-coh-opt", criterion.letter()),
                CandidatePool::Standard => format!("{}-opt", criterion.letter()),
            },
        }
    }

    /// Parses the names produced by [`Strategy::name`]. `asymptotic` picks
    /// the variant matching the basis at sampling time and maps to Chebyshev here.
    pub fn parse(name: &str) -> Option<Strategy> {
        let s = name.trim().to_ascii_lowercase();
        let simple = match s.as_str() {
            "standard" | "mc" => Some(Strategy::Standard),
            "lhs" | "lh" => Some(Strategy::Lhs),
            "asymptotic" | "asymptotic-chebyshev" => Some(Strategy::AsymptoticChebyshev),
            "asymptotic-ball" => Some(Strategy::AsymptoticBall),
            "coh-opt" | "coherence-optimal" => Some(Strategy::CoherenceOptimal),
            "rand-quad" | "randomized-quadrature" => Some(Strategy::RandQuadrature),
            "qmc" | "halton" => Some(Strategy::HaltonQmc),
            _ => None,
        };
        if simple.is_some() {
            return simple;
        }
        let (letter, pool) = if let Some(l) = s.strip_suffix("-coh-opt") {
            (l, CandidatePool::CoherenceOptimal)
        } else if let Some(l) = s.strip_suffix("-opt") {
            (l, CandidatePool::Standard)
        } else {
            return None;
        };
        let criterion = Criterion::parse(letter)?;
        Some(Strategy::Alphabetic { criterion, pool })
    }

    /// Whether the generator draws least-squares weights other than one.
    pub fn is_weighted(&self) -> bool {
        matches!(
            self,
            Strategy::AsymptoticChebyshev
                | Strategy::AsymptoticBall
                | Strategy::CoherenceOptimal
                | Strategy::Alphabetic {
                    pool: CandidatePool::CoherenceOptimal,
                    ..
                }
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Points (one per row) with their least-squares weights and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    pub points: DMatrix<T>,
    pub weights: DVector<T>,
    pub strategy: Strategy,
    pub seed: u64,
    /// Generator parameters echoed into the CSV header.
    pub params: Vec<(String, String)>,
    /// Non-fatal warnings such as an out-of-range MCMC acceptance rate.
    pub diagnostics: Vec<String>,
    /// Row indices into the candidate pool, for designs selected from one.
    pub candidate_indices: Option<Vec<usize>>,
}

impl<T: Real> SampleSet<T> {
    fn new(points: DMatrix<T>, weights: DVector<T>, strategy: Strategy, seed: u64) -> Self {
        Self {
            points,
            weights,
            strategy,
            seed,
            params: Vec::new(),
            diagnostics: Vec::new(),
            candidate_indices: None,
        }
    }

    fn unweighted(points: DMatrix<T>, strategy: Strategy, seed: u64) -> Self {
        let n = points.nrows();
        Self::new(points, DVector::from_element(n, T::one()), strategy, seed)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<T> {
        self.points.row(i).iter().copied().collect()
    }

    pub fn with_param(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// Keeps the rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let points = self.points.select_rows(rows.iter());
        let weights = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.weights[r]));
        Self {
            points,
            weights,
            strategy: self.strategy,
            seed: self.seed,
            params: self.params.clone(),
            diagnostics: self.diagnostics.clone(),
            candidate_indices: Some(rows.to_vec()),
        }
    }

    /// CSV text: a `#` header line, a column header, then one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("CSV output is ASCII")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "# strategy={} seed={}", self.strategy.name(), self.seed)?;
        for (k, v) in &self.params {
            write!(w, " {k}={v}")?;
        }
        writeln!(w)?;
        for diag in &self.diagnostics {
            writeln!(w, "# warning: {diag}")?;
        }
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("xi_{k}")).collect();
        header.push("w".into());
        if self.candidate_indices.is_some() {
            header.push("candidate".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut fields: Vec<String> = self.points.row(i).iter().map(|x| x.to_string()).collect();
            fields.push(self.weights[i].to_string());
            if let Some(idx) = &self.candidate_indices {
                fields.push(idx[i].to_string());
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Points, weights and (if present) candidate indices read back from [`SampleSet::write_csv`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub header: String,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub candidates: Option<Vec<usize>>,
}

pub fn read_sample_csv<R: BufRead>(reader: R) -> Result<SampleTable> {
    let bad = |msg: String| Error::InvalidArgument(format!("malformed sample CSV: {msg}"));
    let mut header = String::new();
    let mut columns: Option<Vec<String>> = None;
    let mut table = SampleTable {
        header: String::new(),
        points: Vec::new(),
        weights: Vec::new(),
        candidates: None,
    };
    for line in reader.lines() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_empty() {
                header = rest.trim().to_string();
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let Some(cols) = &columns else {
            columns = Some(fields.iter().map(|s| s.to_string()).collect());
            continue;
        };
        if fields.len() != cols.len() {
            return Err(bad(format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let has_cand = cols.last().map(String::as_str) == Some("candidate");
        let n_num = if has_cand { cols.len() - 1 } else { cols.len() };
        let nums: Vec<f64> = fields[..n_num]
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?;
        table.weights.push(nums[n_num - 1]);
        table.points.push(nums[..n_num - 1].to_vec());
        if has_cand {
            let c = fields[n_num].trim().parse::<usize>().map_err(|e| bad(e.to_string()))?;
            table.candidates.get_or_insert_with(Vec::new).push(c);
        }
    }
    table.header = header;
    Ok(table)
}

/// One draw from the orthogonality density of `family`.
pub fn draw_from_family<T: Real>(family: &PolyFamily<T>, rng: &mut SampleRng) -> f64 {
    match *family {
        PolyFamily::Legendre => rng.random_range(-1.0..1.0),
        PolyFamily::HermiteProbabilists => rng.sample(StandardNormal),
        PolyFamily::Jacobi { a, b } => {
            let beta = BetaDist::new(b.to_f64_lossy() + 1.0, a.to_f64_lossy() + 1.0)
                .expect("validated Jacobi exponents");
            2.0 * beta.sample(rng) - 1.0
        }
        PolyFamily::Laguerre { a } => GammaDist::new(a.to_f64_lossy() + 1.0, 1.0)
            .expect("validated Laguerre exponent")
            .sample(rng),
    }
}

/// Cumulative distribution of the orthogonality density.
pub fn family_cdf<T: Real>(family: &PolyFamily<T>, x: f64) -> f64 {
    match *family {
        PolyFamily::Legendre => ((x + 1.0) / 2.0).clamp(0.0, 1.0),
        PolyFamily::HermiteProbabilists => Normal::standard().cdf(x),
        PolyFamily::Jacobi { a, b } => Beta::new(b.to_f64_lossy() + 1.0, a.to_f64_lossy() + 1.0)
            .expect("validated Jacobi exponents")
            .cdf(((x + 1.0) / 2.0).clamp(0.0, 1.0)),
        PolyFamily::Laguerre { a } => Gamma::new(a.to_f64_lossy() + 1.0, 1.0)
            .expect("validated Laguerre exponent")
            .cdf(x.max(0.0)),
    }
}

/// Inverse of [`family_cdf`] for `u` in (0, 1).
pub fn family_inverse_cdf<T: Real>(family: &PolyFamily<T>, u: f64) -> f64 {
    match *family {
        PolyFamily::Legendre => 2.0 * u - 1.0,
        PolyFamily::HermiteProbabilists => Normal::standard().inverse_cdf(u),
        PolyFamily::Jacobi { a, b } => {
            2.0 * Beta::new(b.to_f64_lossy() + 1.0, a.to_f64_lossy() + 1.0)
                .expect("validated Jacobi exponents")
                .inverse_cdf(u)
                - 1.0
        }
        PolyFamily::Laguerre { a } => Gamma::new(a.to_f64_lossy() + 1.0, 1.0)
            .expect("validated Laguerre exponent")
            .inverse_cdf(u),
    }
}

fn points_from_fn<T: Real>(n: usize, d: usize, mut f: impl FnMut(usize, usize) -> f64) -> DMatrix<T> {
    let mut m = DMatrix::zeros(n, d);
    for i in 0..n {
        for k in 0..d {
            m[(i, k)] = T::lit(f(i, k));
        }
    }
    m
}

/// i.i.d. draws from the orthogonality measure, unit weights.
pub fn sample_standard<T: Real>(spec: &BasisSpec<T>, n: usize, seed: u64) -> SampleSet<T> {
    let mut rng = rng_from_seed(seed);
    let fams = spec.families();
    let points = points_from_fn(n, spec.dim(), |_, k| draw_from_family(&fams[k], &mut rng));
    SampleSet::unweighted(points, Strategy::Standard, seed)
}

/// Latin hypercube design: one point per equiprobable stratum in every
/// marginal, strata paired across dimensions by independent permutations.
pub fn sample_lhs<T: Real>(spec: &BasisSpec<T>, n: usize, seed: u64) -> SampleSet<T> {
    let mut rng = rng_from_seed(seed);
    let d = spec.dim();
    let mut points = DMatrix::zeros(n, d);
    let nf = n as f64;
    let mut perm: Vec<usize> = (0..n).collect();
    for (k, fam) in spec.families().iter().enumerate() {
        let column: Vec<f64> = (0..n)
            .map(|i| {
                let zeta: f64 = rng.random();
                // keep z strictly inside (0, 1) so unbounded inverse CDFs stay finite
                let z = ((i as f64 + zeta) / nf).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                family_inverse_cdf(fam, z)
            })
            .collect();
        perm.shuffle(&mut rng);
        for (i, &src) in perm.iter().enumerate() {
            points[(i, k)] = T::lit(column[src]);
        }
    }
    SampleSet::unweighted(points, Strategy::Lhs, seed)
}

/// Radius of the ball used for asymptotic Hermite sampling, `sqrt(2) sqrt(2p + 1)`.
pub fn hermite_ball_radius(order: usize) -> f64 {
    2f64.sqrt() * (2.0 * order as f64 + 1.0).sqrt()
}

fn draw_chebyshev(rng: &mut SampleRng) -> f64 {
    (std::f64::consts::PI * rng.random::<f64>()).cos()
}

fn draw_in_ball(rng: &mut SampleRng, d: usize, radius: f64, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
            norm2 += *x * *x;
        }
        if norm2 > 0.0 {
            let r = radius * rng.random::<f64>().powf(1.0 / d as f64) / norm2.sqrt();
            out.iter_mut().for_each(|x| *x *= r);
            return;
        }
    }
}

/// Asymptotic weight for the Chebyshev density, `prod (1 - xi_k^2)^(1/4)`.
pub fn chebyshev_weight<T: Real>(xi: &[T]) -> T {
    xi.iter()
        .fold(T::one(), |acc, &x| acc * (T::one() - x * x).max(T::zero()).powf(T::lit(0.25)))
}

/// Asymptotic Hermite weight `exp(-|xi|^2 / 4)`.
pub fn ball_weight<T: Real>(xi: &[T]) -> T {
    let r2 = xi.iter().fold(T::zero(), |acc, &x| acc + x * x);
    (-r2 / T::lit(4.0)).exp()
}

/// Asymptotic sampling: Chebyshev draws for Legendre bases, uniform draws in
/// a ball for Hermite bases, each with its analytic weight.
pub fn sample_asymptotic<T: Real>(spec: &BasisSpec<T>, n: usize, seed: u64) -> Result<SampleSet<T>> {
    let d = spec.dim();
    let mut rng = rng_from_seed(seed);
    match spec.common_family() {
        Some(PolyFamily::Legendre) => {
            let points: DMatrix<T> = points_from_fn(n, d, |_, _| draw_chebyshev(&mut rng));
            let weights = DVector::from_iterator(
                n,
                (0..n).map(|i| chebyshev_weight(&points.row(i).iter().copied().collect::<Vec<_>>())),
            );
            Ok(SampleSet::new(points, weights, Strategy::AsymptoticChebyshev, seed))
        }
        Some(PolyFamily::HermiteProbabilists) => {
            let radius = hermite_ball_radius(spec.order());
            let mut points = DMatrix::zeros(n, d);
            let mut buf = vec![0.0; d];
            for i in 0..n {
                draw_in_ball(&mut rng, d, radius, &mut buf);
                for k in 0..d {
                    points[(i, k)] = T::lit(buf[k]);
                }
            }
            let weights = DVector::from_iterator(
                n,
                (0..n).map(|i| ball_weight(&points.row(i).iter().copied().collect::<Vec<_>>())),
            );
            Ok(SampleSet::new(points, weights, Strategy::AsymptoticBall, seed).with_param("radius", radius))
        }
        _ => Err(Error::UnsupportedStrategy {
            strategy: "asymptotic".into(),
            reason: "requires every dimension to be Legendre, or every dimension Hermite".into(),
        }),
    }
}

/// `B(xi) = sqrt(sum_j psi_j(xi)^2)`.
pub fn b_value<T: Real>(spec: &BasisSpec<T>, xi: &[T]) -> T {
    let mut table = Vec::new();
    let mut row = Vec::new();
    spec.sum_squares(xi, &mut table, &mut row).sqrt()
}

/// Proposal density of the independence Metropolis–Hastings sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    /// Orthogonality measure when `d >= p`, asymptotic density otherwise.
    Auto,
    Orthogonality,
    /// Asymptotic density: Chebyshev (Legendre) or d-ball (Hermite).
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McmcConfig {
    pub burn_in: usize,
    /// Accepted moves between recorded states; `None` means `max(1, d)`.
    pub thinning: Option<usize>,
    pub proposal: Proposal,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            thinning: None,
            proposal: Proposal::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ResolvedProposal {
    Orthogonality,
    Chebyshev,
    Ball(f64),
}

impl ResolvedProposal {
    fn name(&self) -> &'static str {
        match self {
            ResolvedProposal::Orthogonality => "orthogonality",
            ResolvedProposal::Chebyshev => "chebyshev",
            ResolvedProposal::Ball(_) => "hermite-ball",
        }
    }

    fn draw<T: Real>(&self, spec: &BasisSpec<T>, rng: &mut SampleRng, out: &mut [f64]) {
        match *self {
            ResolvedProposal::Orthogonality => {
                for (x, fam) in out.iter_mut().zip(spec.families()) {
                    *x = draw_from_family(fam, rng);
                }
            }
            ResolvedProposal::Chebyshev => out.iter_mut().for_each(|x| *x = draw_chebyshev(rng)),
            ResolvedProposal::Ball(r) => draw_in_ball(rng, out.len(), r, out),
        }
    }

    /// `ln f(xi) - ln q(xi)` up to an additive constant.
    fn log_density_ratio(&self, xi: &[f64]) -> f64 {
        match self {
            ResolvedProposal::Orthogonality => 0.0,
            ResolvedProposal::Chebyshev => xi.iter().map(|x| 0.5 * (1.0 - x * x).ln()).sum(),
            ResolvedProposal::Ball(_) => -0.5 * xi.iter().map(|x| x * x).sum::<f64>(),
        }
    }
}

fn resolve_proposal<T: Real>(spec: &BasisSpec<T>, choice: Proposal) -> ResolvedProposal {
    let asymptotic = || match spec.common_family() {
        Some(PolyFamily::Legendre) => ResolvedProposal::Chebyshev,
        Some(PolyFamily::HermiteProbabilists) => {
            ResolvedProposal::Ball(hermite_ball_radius(spec.order()))
        }
        _ => ResolvedProposal::Orthogonality,
    };
    match choice {
        Proposal::Orthogonality => ResolvedProposal::Orthogonality,
        Proposal::Asymptotic => asymptotic(),
        Proposal::Auto if spec.order() > spec.dim() => asymptotic(),
        Proposal::Auto => ResolvedProposal::Orthogonality,
    }
}

/// Coherence-optimal sampling: an independence Metropolis–Hastings chain
/// targeting `f(xi) B(xi)^2`, weights `w = sqrt(P) / B(xi)` so that
/// `sum_j (w psi_j)^2 = P` at every returned point.
pub fn sample_coherence_optimal<T: Real>(
    spec: &BasisSpec<T>,
    n: usize,
    seed: u64,
    mcmc: &McmcConfig,
) -> SampleSet<T> {
    let d = spec.dim();
    let proposal = resolve_proposal(spec, mcmc.proposal);
    let thinning = mcmc.thinning.unwrap_or(d.max(1)).max(1);
    let mut rng = rng_from_seed(seed);
    let mut table = Vec::new();
    let mut row = Vec::new();
    let mut xi_t = vec![T::zero(); d];

    let mut log_target = |x: &[f64], table: &mut Vec<T>, row: &mut Vec<T>| -> (f64, T) {
        for (t, v) in xi_t.iter_mut().zip(x) {
            *t = T::lit(*v);
        }
        let b2 = spec.sum_squares(&xi_t, table, row);
        (b2.to_f64_lossy().ln() + proposal.log_density_ratio(x), b2)
    };

    let mut current = vec![0.0; d];
    let (mut cur_log, mut cur_b2);
    loop {
        proposal.draw(spec, &mut rng, &mut current);
        (cur_log, cur_b2) = log_target(&current, &mut table, &mut row);
        if cur_log.is_finite() {
            break;
        }
    }

    let mut candidate = vec![0.0; d];
    let mut points = DMatrix::zeros(n, d);
    let mut b2s = Vec::with_capacity(n);
    // States are recorded every `thinning` accepted moves; the cap only
    // matters for a chain that essentially never moves.
    let cap = mcmc.burn_in + n.max(1) * thinning * 10_000;
    let mut accepted_after_burn = 0usize;
    let mut it = 0usize;
    while b2s.len() < n && it < cap {
        it += 1;
        proposal.draw(spec, &mut rng, &mut candidate);
        let (cand_log, cand_b2) = log_target(&candidate, &mut table, &mut row);
        let log_alpha = cand_log - cur_log;
        let accept = cand_log.is_finite() && (log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha);
        if accept {
            std::mem::swap(&mut current, &mut candidate);
            cur_log = cand_log;
            cur_b2 = cand_b2;
            if it > mcmc.burn_in {
                accepted_after_burn += 1;
                if accepted_after_burn % thinning == 0 {
                    let r = b2s.len();
                    for k in 0..d {
                        points[(r, k)] = T::lit(current[k]);
                    }
                    b2s.push(cur_b2);
                }
            }
        }
    }
    let stalled = b2s.len() < n;
    while b2s.len() < n {
        let r = b2s.len();
        for k in 0..d {
            points[(r, k)] = T::lit(current[k]);
        }
        b2s.push(cur_b2);
    }
    let total = it;
    let sqrt_p = T::from_usize_lossy(spec.len()).sqrt();
    let weights = DVector::from_iterator(n, b2s.iter().map(|&b2| sqrt_p / b2.sqrt()));
    let steps = (total - mcmc.burn_in).max(1);
    let rate = accepted_after_burn as f64 / steps as f64;
    let mut set = SampleSet::new(points, weights, Strategy::CoherenceOptimal, seed)
        .with_param("burn_in", mcmc.burn_in)
        .with_param("thinning", thinning)
        .with_param("proposal", proposal.name())
        .with_param("acceptance_rate", format!("{rate:.4}"));
    if stalled {
        set.diagnostics.push("chain stalled; trailing states repeat the last accepted state".into());
    }
    if n > 0 && !(0.05..=0.95).contains(&rate) {
        set.diagnostics.push(format!(
            "Metropolis-Hastings acceptance rate {rate:.4} outside [0.05, 0.95]"
        ));
    }
    set
}

/// Default number of Gauss nodes per dimension for randomized quadrature, `p + 1`.
pub fn default_quadrature_level<T: Real>(spec: &BasisSpec<T>) -> usize {
    spec.order() + 1
}

/// `n` distinct points drawn uniformly from the tensor Gauss grid with
/// `level` nodes per dimension.
pub fn sample_randomized_quadrature<T: Real>(
    spec: &BasisSpec<T>,
    n: usize,
    level: usize,
    seed: u64,
) -> Result<SampleSet<T>> {
    let d = spec.dim();
    if level == 0 {
        return Err(Error::InvalidArgument("quadrature level must be positive".into()));
    }
    let grid = u32::try_from(d)
        .ok()
        .and_then(|e| level.checked_pow(e))
        .ok_or_else(|| Error::Overflow(format!("tensor grid size {level}^{d}")))?;
    if grid < n {
        return Err(Error::InsufficientGrid {
            level,
            dim: d,
            requested: n,
        });
    }
    let rules = spec
        .families()
        .iter()
        .map(|f| gauss_rule(f, level))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = rng_from_seed(seed);
    let picks = rand::seq::index::sample(&mut rng, grid, n);
    let mut points = DMatrix::zeros(n, d);
    for (i, mut flat) in picks.into_iter().enumerate() {
        for (k, rule) in rules.iter().enumerate() {
            points[(i, k)] = rule.nodes[flat % level];
            flat /= level;
        }
    }
    Ok(SampleSet::unweighted(points, Strategy::RandQuadrature, seed).with_param("level", level))
}

/// The first 50 primes, used as Halton bases.
pub const HALTON_PRIMES: [u64; 50] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229,
];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    value
}

/// Halton points in `[0, 1)^d`, using sequence indices `skip + 1 ..= skip + n`.
pub fn halton_unit(d: usize, n: usize, skip: u64) -> Result<DMatrix<f64>> {
    if d > HALTON_PRIMES.len() {
        return Err(Error::InvalidArgument(format!(
            "Halton sequences are limited to {} dimensions",
            HALTON_PRIMES.len()
        )));
    }
    Ok(DMatrix::from_fn(n, d, |i, k| {
        radical_inverse(skip + i as u64 + 1, HALTON_PRIMES[k])
    }))
}

/// Deterministic Halton design mapped onto `[-1, 1]^d`. Legendre bases only.
pub fn sample_qmc<T: Real>(spec: &BasisSpec<T>, n: usize, skip: u64) -> Result<SampleSet<T>> {
    if spec.common_family() != Some(PolyFamily::Legendre) {
        return Err(Error::UnsupportedStrategy {
            strategy: "qmc".into(),
            reason: "low-discrepancy designs are only defined here for uniform inputs".into(),
        });
    }
    let unit = halton_unit(spec.dim(), n, skip)?;
    let points = unit.map(|u| T::lit(2.0 * u - 1.0));
    Ok(SampleSet::unweighted(points, Strategy::HaltonQmc, 0).with_param("skip", skip))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyReport {
    pub star_discrepancy: f64,
    /// `false` when the value is a randomized lower bound.
    pub exact: bool,
}

/// Number of random anchor boxes used when `d > 2`.
pub const DISCREPANCY_PROBES: usize = 100_000;

/// Star discrepancy of points in `[0, 1)^d`: exact for `d <= 2`, a
/// randomized lower bound otherwise.
pub fn compute_star_discrepancy(points: &DMatrix<f64>) -> DiscrepancyReport {
    let n = points.nrows();
    let d = points.ncols();
    if n == 0 || d == 0 {
        return DiscrepancyReport {
            star_discrepancy: 0.0,
            exact: true,
        };
    }
    match d {
        1 => {
            let mut xs: Vec<f64> = points.column(0).iter().copied().collect();
            xs.sort_by(f64::total_cmp);
            let nf = n as f64;
            let disc = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| ((i + 1) as f64 / nf - x).max(x - i as f64 / nf))
                .fold(0.0, f64::max);
            DiscrepancyReport {
                star_discrepancy: disc.clamp(0.0, 1.0),
                exact: true,
            }
        }
        2 => DiscrepancyReport {
            star_discrepancy: star_discrepancy_2d(points).clamp(0.0, 1.0),
            exact: true,
        },
        _ => DiscrepancyReport {
            star_discrepancy: star_discrepancy_probe(points, DISCREPANCY_PROBES, 0x5eed).clamp(0.0, 1.0),
            exact: false,
        },
    }
}

fn star_discrepancy_2d(points: &DMatrix<f64>) -> f64 {
    let n = points.nrows();
    let nf = n as f64;
    let mut pts: Vec<(f64, f64)> = (0..n).map(|i| (points[(i, 0)], points[(i, 1)])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.push(1.0);
    xs.dedup();
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    ys.push(1.0);
    ys.sort_by(f64::total_cmp);
    ys.dedup();

    let mut worst: f64 = 0.0;
    let mut open_y: Vec<f64> = Vec::with_capacity(n);
    let mut closed_y: Vec<f64> = Vec::with_capacity(n);
    let mut next = 0;
    for &v1 in &xs {
        // points with x < v1
        while next < n && pts[next].0 < v1 {
            let y = pts[next].1;
            let pos = open_y.partition_point(|&t| t < y);
            open_y.insert(pos, y);
            next += 1;
        }
        closed_y.clear();
        closed_y.extend_from_slice(&open_y);
        let mut j = next;
        while j < n && pts[j].0 <= v1 {
            let y = pts[j].1;
            let pos = closed_y.partition_point(|&t| t < y);
            closed_y.insert(pos, y);
            j += 1;
        }
        for &v2 in &ys {
            let vol = v1 * v2;
            let open = open_y.partition_point(|&t| t < v2) as f64;
            let closed = closed_y.partition_point(|&t| t <= v2) as f64;
            worst = worst.max(vol - open / nf).max(closed / nf - vol);
        }
    }
    worst
}

fn star_discrepancy_probe(points: &DMatrix<f64>, probes: usize, seed: u64) -> f64 {
    let n = points.nrows();
    let d = points.ncols();
    let nf = n as f64;
    let mut rng = rng_from_seed(seed);
    let mut v = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for probe in 0..probes {
        if probe % 2 == 0 {
            v.iter_mut().for_each(|x| *x = rng.random::<f64>());
        } else {
            for (k, x) in v.iter_mut().enumerate() {
                *x = points[(rng.random_range(0..n), k)];
            }
        }
        let vol: f64 = v.iter().product();
        let (mut open, mut closed) = (0usize, 0usize);
        for i in 0..n {
            let mut inside_open = true;
            let mut inside_closed = true;
            for k in 0..d {
                let x = points[(i, k)];
                inside_open &= x < v[k];
                inside_closed &= x <= v[k];
            }
            open += inside_open as usize;
            closed += inside_closed as usize;
        }
        worst = worst.max(vol - open as f64 / nf).max(closed as f64 / nf - vol);
    }
    worst
}

/// Empirical coherence over probe points drawn by a strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceEstimate {
    /// `max_probe sum_j |w psi_j|^2`.
    pub mu_hat: f64,
    /// `max_probe max_j |w psi_j|^2`, the per-basis-function coherence.
    pub mu_max_term: f64,
    pub n_probe: usize,
}

/// Draws `n` points with `strategy`. Alphabetic strategies are not plain
/// samplers and are rejected here.
pub fn sample_with<T: Real>(
    spec: &BasisSpec<T>,
    strategy: Strategy,
    n: usize,
    seed: u64,
    mcmc: &McmcConfig,
) -> Result<SampleSet<T>> {
    match strategy {
        Strategy::Standard => Ok(sample_standard(spec, n, seed)),
        Strategy::Lhs => Ok(sample_lhs(spec, n, seed)),
        Strategy::AsymptoticChebyshev | Strategy::AsymptoticBall => sample_asymptotic(spec, n, seed),
        Strategy::CoherenceOptimal => Ok(sample_coherence_optimal(spec, n, seed, mcmc)),
        Strategy::RandQuadrature => {
            let base = default_quadrature_level(spec);
            // grow the grid until it can hold n distinct points
            let mut level = base;
            while u32::try_from(spec.dim())
                .ok()
                .and_then(|e| level.checked_pow(e))
                .is_some_and(|g| g < n)
            {
                level += 1;
            }
            sample_randomized_quadrature(spec, n, level, seed)
        }
        Strategy::HaltonQmc => sample_qmc(spec, n, seed),
        Strategy::Alphabetic { .. } => Err(Error::UnsupportedStrategy {
            strategy: strategy.name(),
            reason: "alphabetic designs are built by design::alphabetic_design".into(),
        }),
    }
}

/// Lower bound on the coherence parameter from `n_probe` strategy-drawn points.
pub fn estimate_coherence<T: Real>(
    spec: &BasisSpec<T>,
    strategy: Strategy,
    n_probe: usize,
    seed: u64,
) -> Result<CoherenceEstimate> {
    if n_probe == 0 {
        return Err(Error::InvalidArgument("coherence estimate needs at least one probe".into()));
    }
    const CHUNK: usize = 1 << 16;
    let mut mu_hat: f64 = 0.0;
    let mut mu_term: f64 = 0.0;
    let mut table = Vec::new();
    let mut row = vec![T::zero(); spec.len()];
    let mut xi = vec![T::zero(); spec.dim()];
    let mut done = 0usize;
    let mut chunk_id = 0u64;
    while done < n_probe {
        let m = CHUNK.min(n_probe - done);
        let chunk_seed = derive_seed(seed, &[chunk_id]);
        let set = sample_with(spec, strategy, m, chunk_seed, &McmcConfig::default())?;
        for i in 0..set.len() {
            for (k, x) in xi.iter_mut().enumerate() {
                *x = set.points[(i, k)];
            }
            spec.eval_row_into(&xi, &mut table, &mut row);
            let w = set.weights[i].to_f64_lossy();
            let mut sum = 0.0;
            for v in &row {
                let t = w * v.to_f64_lossy();
                let t2 = t * t;
                sum += t2;
                mu_term = mu_term.max(t2);
            }
            mu_hat = mu_hat.max(sum);
        }
        done += m;
        chunk_id += 1;
    }
    Ok(CoherenceEstimate {
        mu_hat,
        mu_max_term: mu_term,
        n_probe,
    })
}

/// Normalized orthogonality density, exposed for diagnostics and tests.
pub fn joint_density<T: Real>(spec: &BasisSpec<T>, xi: &[T]) -> T {
    spec.families()
        .iter()
        .zip(xi)
        .fold(T::one(), |acc, (f, &x)| acc * f.density(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn legendre(d: usize, p: usize) -> BasisSpec<f64> {
        BasisSpec::isotropic(PolyFamily::Legendre, d, p).unwrap()
    }

    #[test]
    fn standard_points_lie_in_support() {
        let s = sample_standard(&legendre(2, 3), 500, 1);
        assert!(s.points.iter().all(|x| (-1.0..=1.0).contains(x)));
        assert!(s.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn lhs_single_point_and_quarters() {
        let s = sample_lhs(&legendre(1, 1), 1, 3);
        assert_eq!(s.len(), 1);
        let s = sample_lhs(&legendre(1, 1), 4, 3);
        let mut strata: Vec<usize> = s.points.iter().map(|x| ((x + 1.0) / 2.0 * 4.0) as usize).collect();
        strata.sort();
        assert_eq!(strata, vec![0, 1, 2, 3]);
    }

    #[test]
    fn asymptotic_weights() {
        assert_relative_eq!(chebyshev_weight(&[0.0, 0.0]), 1.0);
        assert_relative_eq!(chebyshev_weight(&[0.6]), 0.894_427_190_999_915_9, epsilon = 1e-14);
        assert_relative_eq!(ball_weight(&[0.0_f64; 3]), 1.0);
    }

    #[test]
    fn asymptotic_rejects_mixed_bases() {
        let spec = BasisSpec::new(vec![PolyFamily::<f64>::Legendre, PolyFamily::HermiteProbabilists], 2).unwrap();
        assert!(matches!(
            sample_asymptotic(&spec, 10, 0),
            Err(Error::UnsupportedStrategy { .. })
        ));
        assert!(matches!(sample_qmc(&spec, 10, 0), Err(Error::UnsupportedStrategy { .. })));
    }

    #[test]
    fn b_value_examples() {
        assert_relative_eq!(b_value(&legendre(2, 0), &[0.3, 0.1]), 1.0);
        assert_relative_eq!(b_value(&legendre(1, 1), &[1.0]), 2.0, epsilon = 1e-14);
        assert_relative_eq!(b_value(&legendre(1, 2), &[0.0]), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn zero_order_coherence_optimal_has_unit_weights() {
        let s = sample_coherence_optimal(&legendre(2, 0), 50, 9, &McmcConfig::default());
        assert!(s.weights.iter().all(|&w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn radical_inverse_base_two() {
        let v: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
        assert!(sample_qmc(&legendre(2, 1), 0, 0).unwrap().is_empty());
    }

    #[test]
    fn quadrature_grid_errors() {
        let spec = legendre(2, 1);
        assert!(matches!(
            sample_randomized_quadrature(&spec, 10, 3, 0),
            Err(Error::InsufficientGrid { .. })
        ));
        let wide = legendre(40, 1);
        assert!(matches!(
            sample_randomized_quadrature(&wide, 10, 1000, 0),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn discrepancy_small_cases() {
        let one = DMatrix::from_row_slice(1, 1, &[0.5]);
        assert_relative_eq!(compute_star_discrepancy(&one).star_discrepancy, 0.5);
        let n = 8;
        let eq = DMatrix::from_fn(n, 1, |i, _| (2.0 * i as f64 + 1.0) / (2.0 * n as f64));
        assert_relative_eq!(compute_star_discrepancy(&eq).star_discrepancy, 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            Strategy::Standard,
            Strategy::Lhs,
            Strategy::AsymptoticChebyshev,
            Strategy::AsymptoticBall,
            Strategy::CoherenceOptimal,
            Strategy::RandQuadrature,
            Strategy::HaltonQmc,
            Strategy::Alphabetic {
                criterion: Criterion::D,
                pool: CandidatePool::CoherenceOptimal,
            },
            Strategy::Alphabetic {
                criterion: Criterion::A,
                pool: CandidatePool::Standard,
            },
        ] {
            assert_eq!(Strategy::parse(&s.name()), Some(s));
        }
        assert_eq!(
            Strategy::parse("i-coh-opt"),
            Some(Strategy::Alphabetic {
                criterion: Criterion::A,
                pool: CandidatePool::CoherenceOptimal
            })
        );
        assert_eq!(Strategy::parse("bogus"), None);
    }

    #[test]
    fn csv_round_trip() {
        let s = sample_coherence_optimal(&legendre(2, 3), 5, 4, &McmcConfig::default());
        let text = s.to_csv();
        assert!(text.starts_with("# strategy=coh-opt seed=4"));
        let back = read_sample_csv(text.as_bytes()).unwrap();
        assert_eq!(back.points.len(), 5);
        for i in 0..5 {
            assert_eq!(back.weights[i], s.weights[i]);
            assert_eq!(back.points[i], s.point(i));
        }
    }
}
