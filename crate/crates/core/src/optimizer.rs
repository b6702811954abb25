//! Throughput-maximising choice of the block count m and code rate R.
//!
//! Closed forms via the lower Lambert-W branch cover the multiple-access
//! phase; everything else is found by direct minimisation of the expected
//! channel bits: a scan over admissible m, and for each m a coarse grid in R
//! refined by golden-section search.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::channel::{cutoff_rate, CodingModel};
use crate::error::{Error, Result};
use crate::throughput::{
    br_tdma_blocks, phase_bits_lower_bound, phase_cost, ExpectedCost, NetworkParams, Phase, Scheme,
};

pub const LAMBERT_A1: f64 = 0.3361;
pub const LAMBERT_A2: f64 = 0.0042;
pub const LAMBERT_A3: f64 = 0.0201;

/// Lower end of every rate bracket.
pub const RATE_FLOOR: f64 = 1e-3;
/// Fraction of the model's rate limit used as the upper end of the bracket.
pub const RATE_CEIL_FRACTION: f64 = 0.999;

fn approx_from_u(u: f64) -> f64 {
    let sigma = (u - 1.0).max(0.0);
    let s = sigma.sqrt();
    let inner = LAMBERT_A1 * (sigma / 2.0).sqrt() / (1.0 - LAMBERT_A2 * sigma * (-LAMBERT_A3 * s).exp());
    -u - (2.0 / LAMBERT_A1) * (1.0 - 1.0 / (1.0 + inner))
}

fn check_branch_domain(x: f64) -> Result<f64> {
    let branch = -(-1.0f64).exp();
    if !(x < 0.0 && x >= branch * (1.0 + 1e-15)) {
        return Err(Error::ModelDomain(format!("W_-1 undefined at x = {x}")));
    }
    Ok((-(-x).ln()).max(1.0))
}

/// Closed-form approximation of the lower Lambert-W branch, without refinement.
pub fn lambert_w_m1_approx(x: f64) -> Result<f64> {
    Ok(approx_from_u(check_branch_domain(x)?))
}

/// Lower branch W_-1(x) for -1/e <= x < 0, accurate to |W e^W - x| <= 1e-12 |x|.
pub fn lambert_w_m1(x: f64) -> Result<f64> {
    lambert_w_m1_neg_exp(check_branch_domain(x)?)
}

/// W_-1(-e^-u) for u >= 1, evaluated without forming e^-u, so it stays
/// finite for arguments far below the smallest double.
pub fn lambert_w_m1_neg_exp(u: f64) -> Result<f64> {
    if !(u >= 1.0) || !u.is_finite() {
        return Err(Error::ModelDomain(format!("W_-1(-e^-u) undefined at u = {u}")));
    }
    if u == 1.0 {
        return Ok(-1.0);
    }
    // Root of f(w) = w + ln(-w) + u on w <= -1; f is increasing there with
    // f(-1) = u - 1 > 0.
    let f = |w: f64| w + (-w).ln() + u;
    let mut hi = -1.0;
    let mut lo = -u - 2.0 * (u + 1.0).ln() - 2.0;
    let mut w = approx_from_u(u).clamp(lo, hi);
    let tol = 1e-15 * u.max(1.0);
    for _ in 0..200 {
        let fw = f(w);
        if fw.abs() <= tol {
            break;
        }
        if fw > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let d1 = 1.0 + 1.0 / w;
        let d2 = -1.0 / (w * w);
        let halley = fw / (d1 - fw * d2 / (2.0 * d1));
        let mut next = w - halley;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-16 * w.abs() {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

/// Rate ratio R/R0 minimising the multiple-access cost for blocks of `k`
/// bits under the error-exponent model:
/// `-ln2 k / (W_-1(-e^-(ln2 k + 1)) + 1)`.
pub fn optimal_rate_ratio_mac(k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Config(format!("block length must be positive, got {k}")));
    }
    let w = lambert_w_m1_neg_exp(LN_2 * k + 1.0)?;
    Ok(-LN_2 * k / (w + 1.0))
}

/// Continuous optimum of m for h = 0 and Y = 2 at fixed R/R0, given the
/// overhead X(q, 2).
pub fn optimal_m_closed_form(message_bits: f64, rate_ratio: f64, overhead: f64) -> Result<f64> {
    if !(rate_ratio > 0.0 && rate_ratio < 1.0) || !(overhead > 0.0) || !(message_bits > 0.0) {
        return Err(Error::Config("closed-form m needs 0 < R/R0 < 1, X > 0, K > 0".into()));
    }
    let a = LN_2 * (1.0 / rate_ratio - 1.0) * message_bits;
    let v = 1.0 + a / overhead;
    let w = lambert_w_m1_neg_exp(v)?;
    Ok(-a / (v + w))
}

/// Stationarity residual in R of the multiple-access cost.
pub fn mac_rate_residual(k: f64, rate_ratio: f64) -> f64 {
    let e = (-k * (1.0 / rate_ratio - 1.0)).exp2();
    1.0 - e - LN_2 * k / rate_ratio * e
}

/// Stationarity residual in m of the multiple-access RLNC cost at fixed
/// z = R0/R - 1: left side minus right side.
pub fn mac_m_residual(message_bits: f64, header_bits: f64, m: f64, z: f64, overhead: f64, y: u32) -> f64 {
    let k = message_bits / m + header_bits;
    let d = f64::from(y) - 1.0;
    let rhs = 1.0
        + LN_2 * z * message_bits * k * (overhead + m * d)
            / (message_bits * overhead - header_bits * m * m * d);
    (z * k).exp2() - rhs
}

fn tdma_rate_term(k: f64, rate_ratio: f64, i: u32) -> f64 {
    let fi = f64::from(i);
    let e = (-fi * k * (1.0 / rate_ratio - 1.0)).exp2();
    (1.0 - e - fi * k * LN_2 / rate_ratio * e) / (1.0 - e).powi(2)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Stationarity residual in R of the TDMA broadcast cost with Y-1 destinations.
pub fn broadcast_tdma_rate_residual(k: f64, rate_ratio: f64, y: u32) -> f64 {
    let d = y - 1;
    (1..=d)
        .map(|i| {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            sign * binomial(d, i) * tdma_rate_term(k, rate_ratio, i)
        })
        .sum()
}

/// Stationarity residual in R of the joint TDMA cost with equal crossover
/// probabilities on both links.
pub fn joint_tdma_rate_residual(k: f64, rate_ratio: f64, y: u32) -> f64 {
    tdma_rate_term(k, rate_ratio, 1) + broadcast_tdma_rate_residual(k, rate_ratio, y)
}

/// Settings of the (m, R) search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Largest m considered.
    pub m_max: u64,
    /// Coarse grid points in R before refinement.
    pub grid_points: usize,
    /// Width of the final golden-section interval in R.
    pub rate_tol: f64,
    /// Evaluate every admissible m; otherwise stop after `patience`
    /// consecutive admissible m fail to improve.
    pub exhaustive: bool,
    pub patience: u64,
    /// Skip block counts and rates whose cost lower bound exceeds the incumbent.
    pub prune: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { m_max: 256, grid_points: 32, rate_tol: 1e-9, exhaustive: true, patience: 8, prune: true }
    }
}

/// Outcome of a one-dimensional minimisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    /// Whether the coarse grid looked unimodal; if not, a denser grid was used.
    pub unimodal: bool,
}

fn is_unimodal(values: &[f64], best: usize) -> bool {
    let slack = |a: f64, b: f64| a <= b * (1.0 + 1e-12) || b.is_infinite();
    values[..=best].windows(2).all(|w| slack(w[1], w[0]))
        && values[best..].windows(2).all(|w| slack(w[0], w[1]))
}

/// Minimises `f` on `[lo, hi]`. Evaluation errors count as +infinity.
pub fn minimize_scalar<F>(f: F, lo: f64, hi: f64, grid_points: usize, tol: f64) -> Result<ScalarMinimum>
where
    F: Fn(f64) -> Result<f64>,
{
    minimize_scalar_bounded(f, |_| f64::NEG_INFINITY, lo, hi, grid_points, tol)
}

/// Like [`minimize_scalar`], but skips `f` wherever the cheap lower bound
/// `lower(x) <= f(x)` already exceeds the value it is compared against.
/// Skipped points count as +infinity.
pub fn minimize_scalar_bounded<F, L>(
    f: F,
    lower: L,
    lo: f64,
    hi: f64,
    grid_points: usize,
    tol: f64,
) -> Result<ScalarMinimum>
where
    F: Fn(f64) -> Result<f64>,
    L: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::Search(format!("empty bracket [{lo}, {hi}]")));
    }
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: f64, cutoff: f64| {
        if lower(x) > cutoff {
            return f64::INFINITY;
        }
        evaluations.set(evaluations.get() + 1);
        f(x).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
    };
    let grid = |n: usize| -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let mut best = f64::INFINITY;
        let vs = xs
            .iter()
            .map(|&x| {
                let v = eval(x, best);
                best = best.min(v);
                v
            })
            .collect();
        (xs, vs)
    };
    let argmin = |vs: &[f64]| {
        vs.iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v < vs[b] { i } else { b })
    };
    let n = grid_points.max(5);
    let (mut xs, mut vs) = grid(n);
    let mut best = argmin(&vs);
    let unimodal = is_unimodal(&vs, best);
    if !unimodal {
        log::warn!("objective not unimodal on [{lo}, {hi}]; using a denser grid");
        (xs, vs) = grid(16 * n);
        best = argmin(&vs);
    }
    if vs[best].is_infinite() {
        return Err(Error::Search(format!("objective infinite on all of [{lo}, {hi}]")));
    }
    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(xs.len() - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c, f64::INFINITY);
    let mut fd = eval(d, fc);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c, fd);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d, fc);
        }
    }
    let (mut x, mut value) = if fc <= fd { (c, fc) } else { (d, fd) };
    if vs[best] < value {
        (x, value) = (xs[best], vs[best]);
    }
    Ok(ScalarMinimum { x, value, evaluations: evaluations.get(), unimodal })
}

/// One evaluated block count in the search trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub m: u64,
    pub rate: f64,
    pub bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    /// Every admissible m was evaluated or ruled out by its cost floor.
    Global,
    /// The optimum beats its evaluated neighbours.
    Local,
}

/// Optimum (m, R) for one scheme and phase, with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub phase: Phase,
    pub scheme: Scheme,
    pub model: CodingModel,
    pub m_opt: u64,
    pub rate_opt: f64,
    /// R/R0 under the error-exponent model.
    pub rate_over_r0: Option<f64>,
    pub cost: ExpectedCost,
    pub certificate: Certificate,
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
    pub non_unimodal_brackets: usize,
    /// Block counts skipped because their cost floor exceeded the incumbent.
    pub pruned_blocks: usize,
}

/// Block counts the search may use: `1..=m_max`, at most one symbol-sized
/// block per l message bits, and m l | K in strict mode.
pub fn admissible_blocks(params: &NetworkParams, m_max: u64) -> Result<Vec<u64>> {
    let l = u64::from(params.field_degree()?);
    let cap = m_max.min(params.message_bits.div_ceil(l)).max(1);
    let ms: Vec<u64> = (1..=cap)
        .filter(|&m| {
            let mut p = *params;
            p.blocks = m;
            p.payload_bits().is_ok()
        })
        .collect();
    if ms.is_empty() {
        return Err(Error::Config(format!(
            "no admissible m <= {cap} for K = {} and l = {l}",
            params.message_bits
        )));
    }
    Ok(ms)
}

fn limiting_ps(params: &NetworkParams, phase: Phase) -> Vec<f64> {
    let ps = match phase {
        Phase::Mac => vec![params.p_mac],
        Phase::Broadcast => vec![params.p_br],
        Phase::Joint => vec![params.p_mac, params.p_br],
    };
    ps.into_iter().filter(|&p| p > 0.0).collect()
}

/// Upper end of the usable rate range for blocks of `k` bits in `phase`.
pub fn rate_limit(params: &NetworkParams, phase: Phase, k: f64) -> Result<f64> {
    limiting_ps(params, phase)
        .into_iter()
        .try_fold(1.0f64, |acc, p| Ok(acc.min(params.model.rate_limit(k, p)?)))
}

fn r0_of(params: &NetworkParams, phase: Phase) -> Option<f64> {
    if params.model != CodingModel::ErrorExponent {
        return None;
    }
    let p = limiting_ps(params, phase).into_iter().fold(0.0, f64::max);
    (p > 0.0).then(|| cutoff_rate(p))
}

/// Best rate for the block count already set in `params`.
pub fn optimal_rate(
    phase: Phase,
    scheme: Scheme,
    params: &NetworkParams,
    cfg: &SearchConfig,
) -> Result<(f64, ExpectedCost, ScalarMinimum)> {
    let k = params.block_bits()?;
    let cost_at = |rate: f64| {
        let mut p = *params;
        p.rate = rate;
        phase_cost(phase, scheme, &p)
    };
    if phase == Phase::Mac && params.model == CodingModel::ErrorExponent && params.p_mac > 0.0 {
        // The multiple-access cost is (k/R)/(1-ε) times a constant, so the
        // closed form is exact for both schemes.
        let rate = optimal_rate_ratio_mac(k)? * cutoff_rate(params.p_mac);
        let cost = cost_at(rate)?;
        let min = ScalarMinimum { x: rate, value: cost.bits, evaluations: 1, unimodal: true };
        return Ok((rate, cost, min));
    }
    if !limiting_ps(params, phase).is_empty() {
        let hi = RATE_CEIL_FRACTION * rate_limit(params, phase, k)?;
        let lower = |rate: f64| {
            let mut p = *params;
            p.rate = rate;
            if cfg.prune {
                phase_bits_lower_bound(phase, scheme, &p).unwrap_or(f64::NEG_INFINITY)
            } else {
                f64::NEG_INFINITY
            }
        };
        let min = minimize_scalar_bounded(
            |r| Ok(cost_at(r)?.bits),
            lower,
            RATE_FLOOR,
            hi,
            cfg.grid_points,
            cfg.rate_tol,
        )?;
        return Ok((min.x, cost_at(min.x)?, min));
    }
    // noiseless links: uncoded transmission
    let cost = cost_at(1.0)?;
    Ok((1.0, cost, ScalarMinimum { x: 1.0, value: cost.bits, evaluations: 1, unimodal: true }))
}

/// Rate-independent lower bound on the bits spent with `params.blocks`
/// blocks: zero block errors at the highest usable rate.
fn block_floor_bits(phase: Phase, scheme: Scheme, params: &NetworkParams) -> Result<f64> {
    let mut p = *params;
    p.rate = rate_limit(params, phase, params.block_bits()?)?;
    p.p_mac = 0.0;
    p.p_br = 0.0;
    phase_bits_lower_bound(phase, scheme, &p)
}

/// Jointly optimal (m, R) for `scheme` in `phase`. `params.blocks` and
/// `params.rate` are ignored.
pub fn optimize(phase: Phase, scheme: Scheme, params: &NetworkParams, cfg: &SearchConfig) -> Result<OptimizationResult> {
    let mut probe = *params;
    probe.blocks = 1;
    probe.rate = 0.5;
    probe.validate()?;
    let ms = admissible_blocks(params, cfg.m_max)?;
    let mut trace = Vec::with_capacity(ms.len());
    let mut best: Option<(u64, f64, ExpectedCost)> = None;
    let mut evaluations = 0;
    let mut non_unimodal = 0;
    let mut since_improvement = 0;
    let mut complete = true;
    let mut pruned = 0;
    for (idx, &m) in ms.iter().enumerate() {
        let mut p = *params;
        p.blocks = m;
        if let Some((_, _, b)) = best.filter(|_| cfg.prune) {
            if block_floor_bits(phase, scheme, &p).is_ok_and(|floor| floor > b.bits) {
                pruned += 1;
                continue;
            }
        }
        let (rate, cost, min) = match optimal_rate(phase, scheme, &p, cfg) {
            Ok(v) => v,
            Err(e) => {
                log::debug!("m = {m}: {e}");
                continue;
            }
        };
        evaluations += min.evaluations;
        non_unimodal += usize::from(!min.unimodal);
        trace.push(TracePoint { m, rate, bits: cost.bits });
        // ties go to the smaller m
        let improves = best.map_or(true, |(_, _, b)| cost.bits < b.bits * (1.0 - 1e-12));
        if improves {
            best = Some((m, rate, cost));
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if !cfg.exhaustive && since_improvement >= cfg.patience {
                complete = idx + 1 == ms.len();
                break;
            }
        }
    }
    let (m_opt, rate_opt, cost) =
        best.ok_or_else(|| Error::Search("no block count produced a finite cost".into()))?;
    Ok(OptimizationResult {
        phase,
        scheme,
        model: params.model,
        m_opt,
        rate_opt,
        rate_over_r0: r0_of(params, phase).map(|r0| rate_opt / r0),
        cost,
        certificate: if complete { Certificate::Global } else { Certificate::Local },
        trace,
        evaluations,
        non_unimodal_brackets: non_unimodal,
        pruned_blocks: pruned,
    })
}

/// Optimum for RLNC in the multiple-access phase.
pub fn optimal_m_mac(params: &NetworkParams, cfg: &SearchConfig) -> Result<OptimizationResult> {
    optimize(Phase::Mac, Scheme::Rlnc, params, cfg)
}

pub fn optimal_joint_tdma(params: &NetworkParams, cfg: &SearchConfig) -> Result<OptimizationResult> {
    optimize(Phase::Joint, Scheme::Tdma, params, cfg)
}

pub fn optimal_joint_rlnc(params: &NetworkParams, cfg: &SearchConfig) -> Result<OptimizationResult> {
    optimize(Phase::Joint, Scheme::Rlnc, params, cfg)
}

/// R/R0 minimising the TDMA broadcast cost for blocks of `k` bits and Y sources.
pub fn optimal_rate_broadcast_tdma(k: f64, y: u32, cfg: &SearchConfig) -> Result<f64> {
    if y < 2 {
        return Err(Error::Config("broadcast needs at least two sources".into()));
    }
    let cost = |ratio: f64| {
        let eps = (-k * (1.0 / ratio - 1.0)).exp2();
        Ok(br_tdma_blocks(y, 1, eps)? / ratio)
    };
    Ok(minimize_scalar(cost, RATE_FLOOR, RATE_CEIL_FRACTION, cfg.grid_points, cfg.rate_tol)?.x)
}

/// TDMA-over-RLNC bit ratio at each scheme's own optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub message_bits: u64,
    pub ratio: f64,
    pub rlnc: OptimizationResult,
    pub tdma: OptimizationResult,
}

pub fn optimal_throughput_ratio(phase: Phase, params: &NetworkParams, cfg: &SearchConfig) -> Result<RatioPoint> {
    let rlnc = optimize(phase, Scheme::Rlnc, params, cfg)?;
    let tdma = optimize(phase, Scheme::Tdma, params, cfg)?;
    Ok(RatioPoint { message_bits: params.message_bits, ratio: tdma.cost.bits / rlnc.cost.bits, rlnc, tdma })
}

/// Smallest K in `(lo, hi]` with optimised ratio >= 1, by bisection, given
/// ratio(lo) < 1 <= ratio(hi).
pub fn ratio_crossing(
    phase: Phase,
    params: &NetworkParams,
    lo: u64,
    hi: u64,
    cfg: &SearchConfig,
) -> Result<Option<u64>> {
    let above = |k: u64| -> Result<bool> {
        let mut p = *params;
        p.message_bits = k;
        Ok(optimal_throughput_ratio(phase, &p, cfg)?.ratio >= 1.0)
    };
    if lo >= hi || above(lo)? || !above(hi)? {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1 {
        let mid = a + (b - a) / 2;
        if above(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some(b))
}
