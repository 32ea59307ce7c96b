//! Spindle and decay models of order distributions, and the fit that splits a
//! measured distribution into the two.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distribution::{abs_diff, order_distribution, OrderDistribution};
use crate::error::{Error, Result};
use crate::interaction::InteractionSet;
use crate::lattice::{InteractionKind, LatticeVector, SubsetMask};

/// Largest `n` for which the dense `2^n × 2^n` smoothing system is built.
pub const MAX_DECAY_VARIABLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpindleParams {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    /// Magnitude of the injected uncertainty.
    pub delta: f64,
    /// Multiplier on the smoothed interactions.
    pub decay_scale: f64,
}

/// `β · Γ(αn+1) / (Γ(m+1) Γ(αn−m+1))`, zero where `αn − m + 1 ≤ 0`.
pub fn spindle_eval(p: SpindleParams, n: usize, m: usize) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!("order {m} exceeds n = {n}")));
    }
    let an = p.alpha * n as f64;
    if !(an + 1.0 > 0.0) {
        return Err(Error::Domain(format!("alpha * n + 1 = {} must be positive", an + 1.0)));
    }
    let rest = an - m as f64 + 1.0;
    if rest <= 0.0 {
        return Ok(0.0);
    }
    Ok(p.beta * (ln_gamma(an + 1.0) - ln_gamma(m as f64 + 1.0) - ln_gamma(rest)).exp())
}

/// `spindle_eval` for `m = 0..=n`.
pub fn spindle_curve(p: SpindleParams, n: usize) -> Result<Vec<f64>> {
    (0..=n).map(|m| spindle_eval(p, n, m)).collect()
}

fn check_decay_n(n: usize) -> Result<()> {
    if n > MAX_DECAY_VARIABLES {
        return Err(Error::Resource(format!(
            "the smoothing matrix supports at most {MAX_DECAY_VARIABLES} variables, got {n}"
        )));
    }
    Ok(())
}

/// `JᵀJ` of the trigger matrix, from closed-form counts of triggering samples.
fn gram(n: usize, kind: InteractionKind) -> DMatrix<f64> {
    let len = 1usize << n;
    let p = |k: u32| (1u64 << (n as u32 - k)) as f64;
    DMatrix::from_fn(len, len, |s, t| {
        let (s, t) = (s as u32, t as u32);
        let union = p((s | t).count_ones());
        match kind {
            InteractionKind::And => union,
            InteractionKind::Or => p(0) - p(s.count_ones()) - p(t.count_ones()) + union,
        }
    })
}

/// The system `JᵀJ + 2^n diag(c)` with `c_S = 2^{|S|} δ²`, factored.
///
/// For OR effects the `∅` row and column are dropped: `J`'s `∅` column is
/// zero, and `I^OR_∅` is zero by convention.
struct Smoother {
    n: usize,
    offset: usize,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Smoother {
    fn new(delta: f64, n: usize, kind: InteractionKind) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be >= 0, got {delta}")));
        }
        check_decay_n(n)?;
        let offset = usize::from(kind == InteractionKind::Or);
        let full = gram(n, kind);
        let len = full.nrows() - offset;
        let g = full.view((offset, offset), (len, len)).into_owned();
        let scale = (1usize << n) as f64;
        let mut a = g.clone();
        for i in 0..len {
            let order = ((i + offset) as u32).count_ones() as i32;
            a[(i, i)] += scale * 2f64.powi(order) * delta * delta;
        }
        let diag = a.diagonal();
        let condition = diag.max() / diag.min().max(f64::MIN_POSITIVE);
        let chol = Cholesky::new(a).ok_or_else(|| Error::LinearAlgebra {
            reason: format!("system for delta = {delta} is not positive definite"),
            condition,
        })?;
        Ok(Smoother { n, offset, gram: g, chol })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let rhs = &self.gram * DVector::from_column_slice(&x[self.offset..]);
        let y = self.chol.solve(&rhs);
        let mut out = vec![0.0; 1 << self.n];
        out[self.offset..].copy_from_slice(y.as_slice());
        out
    }

    fn matrix(&self) -> DMatrix<f64> {
        let len = 1usize << self.n;
        let inner = self.chol.solve(&self.gram);
        let mut m = DMatrix::zeros(len, len);
        m.view_mut((self.offset, self.offset), (len - self.offset, len - self.offset))
            .copy_from(&inner);
        m
    }
}

/// `M(δ) = (JᵀJ + 2^n diag(c))⁻¹ JᵀJ` for one interaction kind.
pub fn build_m_matrix(delta: f64, n: usize, kind: InteractionKind) -> Result<DMatrix<f64>> {
    Ok(Smoother::new(delta, n, kind)?.matrix())
}

/// Factored `M(δ)` for both kinds, reusable across interaction sets.
pub struct DecayOperator {
    pub delta: f64,
    and: Smoother,
    or: Smoother,
}

impl DecayOperator {
    pub fn new(delta: f64, n: usize) -> Result<Self> {
        Ok(DecayOperator {
            delta,
            and: Smoother::new(delta, n, InteractionKind::And)?,
            or: Smoother::new(delta, n, InteractionKind::Or)?,
        })
    }

    pub fn n(&self) -> usize {
        self.and.n
    }

    /// `M(δ) I*`. The bias is not an interaction: it is left out of the
    /// product and carried over unchanged, as is `τ`.
    pub fn predict(&self, i_star: &InteractionSet) -> Result<InteractionSet> {
        if i_star.n() != self.n() {
            return Err(Error::Shape(format!(
                "operator built for {} variables, interactions have {}",
                self.n(),
                i_star.n()
            )));
        }
        let mut and_in = i_star.i_and.as_slice().to_vec();
        and_in[0] = 0.0;
        let mut and_out = self.and.apply(&and_in);
        and_out[0] = i_star.i_and.get(SubsetMask::EMPTY);
        let or_out = self.or.apply(i_star.i_or.as_slice());
        let n = self.n();
        InteractionSet::new(
            i_star.bias,
            LatticeVector::new(n, and_out)?,
            LatticeVector::new(n, or_out)?,
            i_star.tau,
        )
    }
}

pub fn decay_predict(i_star: &InteractionSet, delta: f64) -> Result<InteractionSet> {
    DecayOperator::new(delta, i_star.n())?.predict(i_star)
}

/// Order distribution of `M(δ) I*` over all subsets, times `decay_scale`.
pub fn decay_eval(i_star: &InteractionSet, p: DecayParams) -> Result<OrderDistribution> {
    if !(p.decay_scale >= 0.0) {
        return Err(Error::Domain(format!("decay_scale must be >= 0, got {}", p.decay_scale)));
    }
    Ok(order_distribution(&decay_predict(i_star, p.delta)?, false).scaled(p.decay_scale))
}

/// Candidate values searched by [`disentangle`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitGrid {
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Fit separate `β` and `decay_scale` for the positive and negative curves.
    pub per_sign: bool,
}

impl Default for FitGrid {
    fn default() -> Self {
        FitGrid {
            alphas: (1..=30).map(|k| k as f64 / 20.0).collect(),
            deltas: logspace(1e-4, 1.0, 40),
            per_sign: false,
        }
    }
}

/// `count` points geometrically spaced from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

impl FitGrid {
    fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.deltas.is_empty() {
            return Err(Error::Config("fit grid needs at least one alpha and one delta".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Config("grid alphas must be positive".into()));
        }
        if self.deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::Config("grid deltas must be >= 0".into()));
        }
        Ok(())
    }
}

/// Separate scales of the per-sign fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignScales {
    pub beta_pos: f64,
    pub beta_neg: f64,
    pub decay_scale_pos: f64,
    pub decay_scale_neg: f64,
}

/// A fitted split of an order distribution. Curves are indexed by
/// `m = 0..=n`; order 0 is the bias, is not fitted and holds zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisentangleResult {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub decay_scale: f64,
    pub objective: f64,
    pub theory_pos: Vec<f64>,
    pub theory_neg: Vec<f64>,
    pub residual_pos: Vec<f64>,
    pub residual_neg: Vec<f64>,
    pub spindle_pos: Vec<f64>,
    pub spindle_neg: Vec<f64>,
    pub decay_pos: Vec<f64>,
    pub decay_neg: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sign: Option<SignScales>,
}

impl DisentangleResult {
    pub fn spindle(&self) -> SpindleParams {
        SpindleParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn decay(&self) -> DecayParams {
        DecayParams {
            delta: self.delta,
            decay_scale: self.decay_scale,
        }
    }

    pub fn spindle_mass(&self) -> f64 {
        self.spindle_pos.iter().chain(&self.spindle_neg).sum()
    }

    pub fn decay_mass(&self) -> f64 {
        self.decay_pos.iter().chain(&self.decay_neg).sum()
    }

    /// Share of the fitted mass carried by the decay component; 0 when
    /// nothing was fitted.
    pub fn decay_fraction(&self) -> f64 {
        let total = self.spindle_mass() + self.decay_mass();
        if total > 0.0 {
            self.decay_mass() / total
        } else {
            0.0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))
    }
}

/// `min_{x ≥ 0} ‖y − a x₁ − b x₂‖²`, exactly.
fn nnls2(a: &[f64], b: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let (aa, bb, ab, ay, by, yy) = (dot(a, a), dot(b, b), dot(a, b), dot(a, y), dot(b, y), dot(y, y));
    let sse = |x1: f64, x2: f64| {
        (yy - 2.0 * x1 * ay - 2.0 * x2 * by + x1 * x1 * aa + x2 * x2 * bb + 2.0 * x1 * x2 * ab).max(0.0)
    };
    let mut candidates = vec![(0.0, 0.0)];
    if aa > 0.0 {
        candidates.push(((ay / aa).max(0.0), 0.0));
    }
    if bb > 0.0 {
        candidates.push((0.0, (by / bb).max(0.0)));
    }
    let det = aa * bb - ab * ab;
    if det > 1e-14 * aa * bb {
        let x1 = (ay * bb - by * ab) / det;
        let x2 = (by * aa - ay * ab) / det;
        if x1 >= 0.0 && x2 >= 0.0 {
            candidates.push((x1, x2));
        }
    }
    candidates
        .into_iter()
        .map(|(x1, x2)| (x1, x2, sse(x1, x2)))
        .min_by(|p, q| p.2.total_cmp(&q.2))
        .unwrap()
}

/// Residual sum of squares computed directly from the fitted curves.
fn sse_direct(y: &[f64], a: &[f64], b: &[f64], x1: f64, x2: f64) -> f64 {
    y.iter()
        .zip(a)
        .zip(b)
        .map(|((y, a), b)| (y - x1 * a - x2 * b).powi(2))
        .sum()
}

fn check_pair(a: &OrderDistribution, n: usize) -> Result<()> {
    if a.n != n {
        return Err(Error::Shape(format!(
            "distribution over {} orders, interactions over {n} variables",
            a.n
        )));
    }
    Ok(())
}

/// Fits `a` with spindle plus decay, using `i_star` as the converged
/// interactions that the decay component smooths.
pub fn disentangle(a: &OrderDistribution, i_star: &InteractionSet, grid: &FitGrid) -> Result<DisentangleResult> {
    disentangle_population(a, std::slice::from_ref(i_star), grid)
}

/// As [`disentangle`], with the decay curve averaged over several `I*`.
pub fn disentangle_population(
    a: &OrderDistribution,
    i_stars: &[InteractionSet],
    grid: &FitGrid,
) -> Result<DisentangleResult> {
    grid.validate()?;
    let first = i_stars
        .first()
        .ok_or_else(|| Error::InvalidInput("no interaction sets for the decay component".into()))?;
    let n = first.n();
    check_pair(a, n)?;
    if let Some(bad) = i_stars.iter().find(|s| s.n() != n) {
        return Err(Error::Shape(format!("interaction sets over {n} and {} variables", bad.n())));
    }
    check_decay_n(n)?;
    let curves = grid
        .deltas
        .par_iter()
        .map(|&delta| {
            let op = DecayOperator::new(delta, n)?;
            let ds = i_stars
                .iter()
                .map(|s| Ok(order_distribution(&op.predict(s)?, false)))
                .collect::<Result<Vec<_>>>()?;
            Ok((delta, crate::distribution::mean_distribution(&ds)?))
        })
        .collect::<Result<Vec<_>>>()?;
    fit_curves(a, &curves, grid)
}

/// Grid search over precomputed unit-scale decay curves `(δ, D_δ)`.
pub fn fit_curves(
    a: &OrderDistribution,
    decay_curves: &[(f64, OrderDistribution)],
    grid: &FitGrid,
) -> Result<DisentangleResult> {
    grid.validate()?;
    if decay_curves.is_empty() {
        return Err(Error::Config("no decay curves to fit".into()));
    }
    let n = a.n;
    for (_, d) in decay_curves {
        check_pair(d, n)?;
    }
    let spindles = grid
        .alphas
        .iter()
        .map(|&alpha| Ok((alpha, spindle_curve(SpindleParams { alpha, beta: 1.0 }, n)?)))
        .collect::<Result<Vec<_>>>()?;
    let (ap, an) = (&a.pos[1..], &a.neg[1..]);
    let y: Vec<f64> = ap.iter().chain(an).copied().collect();

    struct Best {
        objective: f64,
        alpha: f64,
        delta: f64,
        scales: (f64, f64, f64, f64),
    }
    let mut best: Option<Best> = None;
    for (delta, d) in decay_curves {
        let (dp, dn) = (&d.pos[1..], &d.neg[1..]);
        let dd: Vec<f64> = dp.iter().chain(dn).copied().collect();
        for (alpha, s) in &spindles {
            let s = &s[1..];
            let (objective, scales) = if grid.per_sign {
                let (bp, gp, _) = nnls2(s, dp, ap);
                let (bn, gn, _) = nnls2(s, dn, an);
                let obj = sse_direct(ap, s, dp, bp, gp) + sse_direct(an, s, dn, bn, gn);
                (obj, (bp, bn, gp, gn))
            } else {
                let ss: Vec<f64> = s.iter().chain(s).copied().collect();
                let (b, g, _) = nnls2(&ss, &dd, &y);
                (sse_direct(&y, &ss, &dd, b, g), (b, b, g, g))
            };
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(Best {
                    objective,
                    alpha: *alpha,
                    delta: *delta,
                    scales,
                });
            }
        }
    }
    let best = best.expect("nonempty grid");
    let (bp, bn, gp, gn) = best.scales;
    let unit = spindle_curve(SpindleParams { alpha: best.alpha, beta: 1.0 }, n)?;
    let d = &decay_curves.iter().find(|(x, _)| *x == best.delta).unwrap().1;
    let zero_first = |mut v: Vec<f64>| {
        v[0] = 0.0;
        v
    };
    let spindle_pos = zero_first(unit.iter().map(|x| x * bp).collect());
    let spindle_neg = zero_first(unit.iter().map(|x| x * bn).collect());
    let decay_pos = zero_first(d.pos.iter().map(|x| x * gp).collect());
    let decay_neg = zero_first(d.neg.iter().map(|x| x * gn).collect());
    let theory_pos: Vec<f64> = spindle_pos.iter().zip(&decay_pos).map(|(x, y)| x + y).collect();
    let theory_neg: Vec<f64> = spindle_neg.iter().zip(&decay_neg).map(|(x, y)| x + y).collect();
    let residual_pos = zero_first(a.pos.iter().zip(&theory_pos).map(|(x, y)| (x - y).abs()).collect());
    let residual_neg = zero_first(a.neg.iter().zip(&theory_neg).map(|(x, y)| (x - y).abs()).collect());
    Ok(DisentangleResult {
        alpha: best.alpha,
        beta: if grid.per_sign { 0.5 * (bp + bn) } else { bp },
        delta: best.delta,
        decay_scale: if grid.per_sign { 0.5 * (gp + gn) } else { gp },
        objective: best.objective,
        theory_pos,
        theory_neg,
        residual_pos,
        residual_neg,
        spindle_pos,
        spindle_neg,
        decay_pos,
        decay_neg,
        per_sign: grid.per_sign.then_some(SignScales {
            beta_pos: bp,
            beta_neg: bn,
            decay_scale_pos: gp,
            decay_scale_neg: gn,
        }),
    })
}

/// Spindle-only fit of `a` over `m = 1..=n`, with `β` shared by both signs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpindleFit {
    pub params: SpindleParams,
    pub objective: f64,
    pub curve: Vec<f64>,
    pub residual: OrderDistribution,
}

impl SpindleFit {
    /// `‖residual‖₁ / ‖a‖₁` over orders `1..=n`.
    pub fn relative_residual(&self, a: &OrderDistribution) -> f64 {
        let mass = a.mass();
        if mass > 0.0 {
            self.residual.mass() / mass
        } else {
            0.0
        }
    }
}

pub fn fit_spindle(a: &OrderDistribution, alphas: &[f64]) -> Result<SpindleFit> {
    if alphas.is_empty() {
        return Err(Error::Config("no alphas to search".into()));
    }
    let n = a.n;
    let y: Vec<f64> = a.pos[1..].iter().chain(&a.neg[1..]).copied().collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for &alpha in alphas {
        let s = spindle_curve(SpindleParams { alpha, beta: 1.0 }, n)?;
        let ss: Vec<f64> = s[1..].iter().chain(&s[1..]).copied().collect();
        let zero = vec![0.0; ss.len()];
        let (beta, _, _) = nnls2(&ss, &zero, &y);
        let obj = sse_direct(&y, &ss, &zero, beta, 0.0);
        if best.is_none_or(|b| obj < b.2) {
            best = Some((alpha, beta, obj));
        }
    }
    let (alpha, beta, objective) = best.unwrap();
    let params = SpindleParams { alpha, beta };
    let mut curve = spindle_curve(params, n)?;
    curve[0] = 0.0;
    let mut theory = OrderDistribution::zeros(n);
    theory.pos = curve.clone();
    theory.neg = curve.clone();
    let mut res = abs_diff(a, &theory)?;
    res.pos[0] = 0.0;
    res.neg[0] = 0.0;
    Ok(SpindleFit {
        params,
        objective,
        curve,
        residual: res,
    })
}

/// Elementwise `|a − theory|`.
pub fn residual(a: &OrderDistribution, theory: &OrderDistribution) -> Result<OrderDistribution> {
    abs_diff(a, theory)
}
