//! Expected slot and bit counts for the RLNC and TDMA schemes in the star
//! network, per phase (multiple access, broadcast) and jointly.

use serde::{Deserialize, Serialize};

use crate::channel::CodingModel;
use crate::error::{Error, Result};
use crate::overhead::{overhead_upper, p_success, star_overhead_exact};

/// Series are cut once the current term and a geometric bound on the rest fall below these.
pub const SERIES_TERM_TOLERANCE: f64 = 1e-12;
pub const SERIES_TAIL_TOLERANCE: f64 = 1e-10;
/// Series needing more terms than this are reported as non-convergent.
pub const SERIES_MAX_TERMS: u64 = 5_000_000;

/// How the K message bits are cut into m blocks of l-bit symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockSizing {
    /// m * l must divide K exactly.
    Strict,
    /// The message is zero-padded up to a multiple of m * l and padding is
    /// transmitted like data.
    #[default]
    Padded,
    /// Real-valued K/m payload, for comparisons with continuous closed forms.
    Fractional,
}

/// Overhead term used for the multiple-access phase of RLNC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverheadModel {
    /// The m-independent upper bound X*(q, Y).
    #[default]
    UpperBound,
    /// The exact expectation with Y independent receivers of (Y-1)m unknowns.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rlnc,
    Tdma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Multiple access only, broadcast link noiseless.
    Mac,
    /// Broadcast only, multiple-access link noiseless.
    Broadcast,
    /// Both links noisy.
    Joint,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rlnc" => Ok(Scheme::Rlnc),
            "tdma" => Ok(Scheme::Tdma),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mac" => Ok(Phase::Mac),
            "broadcast" | "br" => Ok(Phase::Broadcast),
            "joint" => Ok(Phase::Joint),
            other => Err(Error::Config(format!("unknown phase '{other}'"))),
        }
    }
}

/// Parameters of one operating point of the star network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Number of sources Y.
    pub sources: u32,
    /// Message length K in bits.
    pub message_bits: u64,
    /// Per-block header h in bits.
    pub header_bits: u64,
    /// Field size q = 2^l.
    pub field_size: u32,
    /// Blocks per message m.
    pub blocks: u64,
    /// Channel code rate R.
    pub rate: f64,
    /// Crossover probability of the multiple-access link.
    pub p_mac: f64,
    /// Crossover probability of the broadcast link.
    pub p_br: f64,
    pub model: CodingModel,
    #[serde(default)]
    pub sizing: BlockSizing,
    #[serde(default)]
    pub overhead: OverheadModel,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        if self.sources < 1 {
            return Err(Error::Config("at least one source is required".into()));
        }
        if self.message_bits == 0 {
            return Err(Error::Config("message length K must be positive".into()));
        }
        if self.blocks == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        self.field_degree()?;
        for (name, p) in [("p_mac", self.p_mac), ("p_br", self.p_br)] {
            if !(0.0..0.5).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 0.5)")));
            }
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::Config(format!("code rate {} outside (0, 1]", self.rate)));
        }
        Ok(())
    }

    /// l = log2 q.
    pub fn field_degree(&self) -> Result<u32> {
        let q = self.field_size;
        if q < 2 || q > 1 << 16 || !q.is_power_of_two() {
            return Err(Error::Config(format!("field size {q} is not 2^l with 1 <= l <= 16")));
        }
        Ok(q.trailing_zeros())
    }

    /// Data bits carried per block, including any padding.
    pub fn payload_bits(&self) -> Result<f64> {
        let l = u64::from(self.field_degree()?);
        let (k, m) = (self.message_bits, self.blocks);
        match self.sizing {
            BlockSizing::Strict => {
                if k % (m * l) != 0 {
                    return Err(Error::Config(format!(
                        "m * l = {} does not divide K = {k}",
                        m * l
                    )));
                }
                Ok((k / m) as f64)
            }
            BlockSizing::Padded => Ok((l * k.div_ceil(m * l)) as f64),
            BlockSizing::Fractional => Ok(k as f64 / m as f64),
        }
    }

    /// Bits entering the channel encoder per block, k = payload + h.
    pub fn block_bits(&self) -> Result<f64> {
        Ok(self.payload_bits()? + self.header_bits as f64)
    }

    /// Channel-coded bits per block, k / R.
    pub fn coded_bits(&self) -> Result<f64> {
        Ok(self.block_bits()? / self.rate)
    }

    fn block_error(&self, p: f64) -> Result<f64> {
        if p == 0.0 {
            return Ok(0.0);
        }
        self.model.block_error(self.rate, self.block_bits()?, p)
    }

    pub fn eps_mac(&self) -> Result<f64> {
        self.block_error(self.p_mac)
    }

    pub fn eps_br(&self) -> Result<f64> {
        self.block_error(self.p_br)
    }

    /// The crossover probability that limits the rate in `phase`.
    pub fn limiting_p(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Mac => self.p_mac,
            Phase::Broadcast => self.p_br,
            Phase::Joint => self.p_mac.max(self.p_br),
        }
    }
}

/// Value of a truncated series together with the number of terms summed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: u64,
}

/// Expected cost of delivering every message to every source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCost {
    /// Expected number of block transmissions (time slots).
    pub slots: f64,
    /// Expected channel bits, slots * k / R.
    pub bits: f64,
    /// Y K / bits.
    pub throughput: f64,
    /// Terms used by the broadcast series, when one was evaluated.
    pub series_terms: Option<u64>,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::ModelDomain(format!("block error {eps} outside [0, 1)")));
    }
    Ok(())
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Expected multiple-access slots for RLNC: ((Y-1)m + X) / (1 - ε).
pub fn mac_rlnc_blocks(y: u32, m: u64, q: u32, eps: f64, overhead: OverheadModel) -> Result<f64> {
    check_eps(eps)?;
    let unknowns = u64::from(y.saturating_sub(1)) * m;
    let x = match overhead {
        OverheadModel::UpperBound => overhead_upper(q, y),
        OverheadModel::Exact => star_overhead_exact(unknowns, q, y),
    };
    Ok((unknowns as f64 + x) / (1.0 - eps))
}

/// Expected multiple-access slots for TDMA: Y m / (1 - ε).
pub fn mac_tdma_blocks(y: u32, m: u64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(f64::from(y) * m as f64 / (1.0 - eps))
}

/// Expected broadcast slots for TDMA as the series
/// `Y m sum_{i>=0} [1 - (1 - ε^i)^(Y-1)]`.
pub fn br_tdma_blocks_series(y: u32, m: u64, eps: f64) -> Result<SeriesSum> {
    check_eps(eps)?;
    let scale = f64::from(y) * m as f64;
    let d = f64::from(y.saturating_sub(1));
    if d == 0.0 {
        return Ok(SeriesSum { value: 0.0, terms: 0 });
    }
    let mut sum = 1.0;
    let mut terms = 1;
    let mut ei = 1.0;
    loop {
        ei *= eps;
        if ei == 0.0 {
            break;
        }
        sum += -(d * (-ei).ln_1p()).exp_m1();
        terms += 1;
        if d * ei * eps / (1.0 - eps) < 1e-17 * sum {
            break;
        }
        if terms > SERIES_MAX_TERMS {
            return Err(Error::ModelDomain(format!("broadcast series did not converge at ε = {eps}")));
        }
    }
    Ok(SeriesSum { value: scale * sum, terms })
}

/// Expected broadcast slots for TDMA in finite form:
/// `Y m sum_{i=1..Y-1} (-1)^(i+1) C(Y-1, i) / (1 - ε^i)`.
pub fn br_tdma_blocks(y: u32, m: u64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let d = y.saturating_sub(1);
    let sum: f64 = (1..=d)
        .map(|i| {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            sign * binomial(d, i) / (1.0 - eps.powi(i as i32))
        })
        .sum();
    Ok(f64::from(y) * m as f64 * sum)
}

/// Expected broadcast slots for RLNC until all `y` sources decode their
/// `(y-1)m` unknowns, each receiving every slot independently with
/// probability `1 - eps`:
/// `m' + sum_{i>=m'} (1 - F(i)^Y)` with
/// `F(i) = sum_f Pr[f failures in i] P(m', i - m' - f, q)`.
pub fn br_rlnc_blocks(y: u32, m: u64, q: u32, eps: f64) -> Result<SeriesSum> {
    Ok(br_rlnc_moments(y, m, q, eps)?.0)
}

/// Broadcast series together with the variance of the broadcast count,
/// `sum_{i>=m'} (2(i - m') + 1) Pr[T > i] - (E[T] - m')^2`.
fn br_rlnc_moments(y: u32, m: u64, q: u32, eps: f64) -> Result<(SeriesSum, f64)> {
    check_eps(eps)?;
    let mp = u64::from(y.saturating_sub(1)) * m;
    if mp == 0 {
        return Ok((SeriesSum { value: 0.0, terms: 0 }, 0.0));
    }
    if mp as f64 / (1.0 - eps) > SERIES_MAX_TERMS as f64 {
        return Err(Error::ModelDomain(format!(
            "broadcast series needs more than {SERIES_MAX_TERMS} terms at ε = {eps}"
        )));
    }
    let yf = f64::from(y);
    let qf = f64::from(q);
    // P(m', x) differs from 1 by less than 1e-18 beyond this many extra blocks.
    let xs = (18.0 / qf.log10()).ceil() as usize + 1;
    let mut dp = Vec::with_capacity(xs + 1);
    let mut prev = 0.0;
    for x in 0..=xs as u64 {
        let p = p_success(mp, x, q);
        dp.push(p - prev);
        prev = p;
    }
    let tail_of = |t: f64, last: f64| -> bool {
        if t >= SERIES_TERM_TOLERANCE {
            return false;
        }
        let r = if last > 0.0 { t / last } else { 0.0 };
        r < 1.0 && t * r / (1.0 - r) < SERIES_TAIL_TOLERANCE
    };

    let mut sum = mp as f64;
    let mut terms = 0u64;
    let mut last = f64::INFINITY;
    let (mut excess, mut weighted) = (0.0, 0.0);

    if eps == 0.0 {
        // every slot is received: F(i) = P(m', i - m')
        for x in 0u64.. {
            let f = p_success(mp, x, q);
            let t = -(yf * f.ln()).exp_m1();
            sum += t;
            excess += t;
            weighted += (2 * x + 1) as f64 * t;
            terms += 1;
            if tail_of(t, last) || t == 0.0 {
                break;
            }
            last = t;
        }
        return Ok((SeriesSum { value: sum, terms }, weighted - excess * excess));
    }

    let ln_s = (-eps).ln_1p();
    let ln_f = eps.ln();
    // ln of Pr[S_i = j + 1] / Pr[S_i = j] is ln((i - j) / (j + 1)) + ln_up
    let ln_up = ln_s - ln_f;
    let j0 = mp - 1;
    // lp = ln Pr[S_i = m' - 1], where S_i counts receptions in i broadcasts
    let mut lp = j0 as f64 * ln_s;
    // low[x] = Pr[S_i < m' + x]; whichever tail is small is summed directly,
    // so low keeps full relative accuracy as it approaches 0
    let mut low = vec![0.0f64; xs + 1];
    let mut lpm = vec![0.0f64; xs + 2];
    let miss = 1.0 - p_success(mp, xs as u64, q);
    let mut i = j0;
    loop {
        i += 1;
        lp += (i as f64).ln() - ((i - j0) as f64).ln() + ln_f;
        lpm[0] = lp;
        for x in 1..xs + 2 {
            let j = j0 + x as u64 - 1;
            lpm[x] = if j >= i {
                f64::NEG_INFINITY
            } else {
                lpm[x - 1] + ((i - j) as f64 / (j + 1) as f64).ln() + ln_up
            };
        }
        if (j0 as f64) <= i as f64 * (1.0 - eps) {
            // at or left of the mean: lower tail summed downwards from m' - 1
            let (mut acc, mut term, mut j) = (1.0, 1.0, j0);
            while j > 0 {
                term *= j as f64 / (i - j + 1) as f64 * (-ln_up).exp();
                j -= 1;
                acc += term;
                if term < 1e-17 * acc {
                    break;
                }
            }
            low[0] = acc * lp.exp();
            for x in 1..=xs {
                low[x] = low[x - 1] + lpm[x].exp();
            }
        } else {
            // right of the mean: upper tail Pr[S_i >= m' + xs] summed upwards
            let (mut acc, mut term, mut j) = (1.0, 1.0, j0 + xs as u64 + 1);
            while j < i {
                term *= (i - j) as f64 / (j + 1) as f64 * ln_up.exp();
                j += 1;
                acc += term;
                if term < 1e-17 * acc {
                    break;
                }
            }
            let mut upper = acc * lpm[xs + 1].exp();
            low[xs] = 1.0 - upper;
            for x in (0..xs).rev() {
                upper += lpm[x + 1].exp();
                low[x] = 1.0 - upper;
            }
        }
        if i < mp {
            continue;
        }
        // 1 - F(i)
        let g = (dp.iter().zip(&low).map(|(d, l)| d * l.clamp(0.0, 1.0)).sum::<f64>() + miss).min(1.0);
        let t = -(yf * (-g).ln_1p()).exp_m1();
        sum += t;
        excess += t;
        weighted += (2 * (i - mp) + 1) as f64 * t;
        terms += 1;
        if tail_of(t, last) {
            break;
        }
        last = t;
        if terms > SERIES_MAX_TERMS {
            return Err(Error::ModelDomain(format!("broadcast series did not converge at ε = {eps}")));
        }
    }
    Ok((SeriesSum { value: sum, terms }, weighted - excess * excess))
}

/// Expected total slots for RLNC with both links noisy: the broadcast count
/// scaled by `1 + 1/(1 - ε_mac)`.
pub fn star_rlnc_slots(y: u32, m: u64, q: u32, eps_mac: f64, eps_br: f64) -> Result<SeriesSum> {
    check_eps(eps_mac)?;
    let br = br_rlnc_blocks(y, m, q, eps_br)?;
    Ok(SeriesSum { value: br.value * (1.0 + 1.0 / (1.0 - eps_mac)), terms: br.terms })
}

/// Expected total slots for TDMA with both links noisy.
pub fn star_tdma_slots(y: u32, m: u64, eps_mac: f64, eps_br: f64) -> Result<f64> {
    Ok(mac_tdma_blocks(y, m, eps_mac)? + br_tdma_blocks(y, m, eps_br)?)
}

/// Mean and variance of the total slot count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance of the attempts a geometric retransmission needs.
fn geometric_moments(eps: f64) -> (f64, f64) {
    (1.0 / (1.0 - eps), eps / ((1.0 - eps) * (1.0 - eps)))
}

/// Moments of the RLNC slot count `T + sum_{j<=T} G_j`, with `T` the broadcast
/// count and `G_j` the multiple-access attempts before broadcast `j`.
pub fn star_rlnc_slot_moments(y: u32, m: u64, q: u32, eps_mac: f64, eps_br: f64) -> Result<SlotMoments> {
    check_eps(eps_mac)?;
    let (br, var_t) = br_rlnc_moments(y, m, q, eps_br)?;
    let (mu, var_g) = geometric_moments(eps_mac);
    Ok(SlotMoments {
        mean: br.value * (1.0 + mu),
        variance: (1.0 + mu) * (1.0 + mu) * var_t + var_g * br.value,
    })
}

/// Moments of the TDMA slot count: per block, Y independent uplink
/// retransmissions and a broadcast repeated until all Y - 1 others hear it.
pub fn star_tdma_slot_moments(y: u32, m: u64, eps_mac: f64, eps_br: f64) -> Result<SlotMoments> {
    check_eps(eps_mac)?;
    check_eps(eps_br)?;
    let n = f64::from(y) * m as f64;
    let (mu, var_g) = geometric_moments(eps_mac);
    let d = f64::from(y.saturating_sub(1));
    // the broadcast count M of one block: Pr[M > t] = 1 - (1 - ε^t)^(Y-1)
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut et = 1.0;
    let mut t = 0u64;
    if d > 0.0 {
        loop {
            t += 1;
            et *= eps_br;
            let p = -(d * (-et).ln_1p()).exp_m1();
            if p == 0.0 {
                break;
            }
            s1 += p;
            s2 += (2 * t + 1) as f64 * p;
            if p < 1e-18 * s1.max(1e-300) || t > SERIES_MAX_TERMS {
                break;
            }
        }
    }
    let mean_m = if d > 0.0 { 1.0 + s1 } else { 0.0 };
    let var_m = s2 - 2.0 * s1 - s1 * s1;
    Ok(SlotMoments { mean: n * (mu + mean_m), variance: n * (var_g + var_m) })
}

fn cost(params: &NetworkParams, slots: f64, series_terms: Option<u64>) -> Result<ExpectedCost> {
    let bits = slots * params.coded_bits()?;
    Ok(ExpectedCost {
        slots,
        bits,
        throughput: f64::from(params.sources) * params.message_bits as f64 / bits,
        series_terms,
    })
}

/// Expected slots and bits of `scheme` in `phase` at the operating point `params`.
pub fn phase_cost(phase: Phase, scheme: Scheme, params: &NetworkParams) -> Result<ExpectedCost> {
    params.validate()?;
    let (y, m, q) = (params.sources, params.blocks, params.field_size);
    match (phase, scheme) {
        (Phase::Mac, Scheme::Rlnc) => {
            let slots = mac_rlnc_blocks(y, m, q, params.eps_mac()?, params.overhead)?;
            cost(params, slots, None)
        }
        (Phase::Mac, Scheme::Tdma) => cost(params, mac_tdma_blocks(y, m, params.eps_mac()?)?, None),
        (Phase::Broadcast, Scheme::Rlnc) => {
            let s = br_rlnc_blocks(y, m, q, params.eps_br()?)?;
            cost(params, s.value, Some(s.terms))
        }
        (Phase::Broadcast, Scheme::Tdma) => cost(params, br_tdma_blocks(y, m, params.eps_br()?)?, None),
        (Phase::Joint, Scheme::Rlnc) => {
            let s = star_rlnc_slots(y, m, q, params.eps_mac()?, params.eps_br()?)?;
            cost(params, s.value, Some(s.terms))
        }
        (Phase::Joint, Scheme::Tdma) => {
            cost(params, star_tdma_slots(y, m, params.eps_mac()?, params.eps_br()?)?, None)
        }
    }
}

/// Cheap lower bound on `phase_cost(..).bits`. Every receiver needs at least
/// m' successful broadcast blocks, so the series is bounded by m'/(1-ε).
pub fn phase_bits_lower_bound(phase: Phase, scheme: Scheme, params: &NetworkParams) -> Result<f64> {
    if scheme == Scheme::Tdma || phase == Phase::Mac {
        return Ok(phase_cost(phase, scheme, params)?.bits);
    }
    params.validate()?;
    let mp = f64::from(params.sources.saturating_sub(1)) * params.blocks as f64;
    let eps_br = params.eps_br()?;
    check_eps(eps_br)?;
    let mut slots = mp / (1.0 - eps_br);
    if phase == Phase::Joint {
        slots *= 1.0 + 1.0 / (1.0 - params.eps_mac()?);
    }
    Ok(slots * params.coded_bits()?)
}

/// Bits needed by TDMA over bits needed by RLNC at the same operating point;
/// values above 1 favour RLNC.
pub fn throughput_ratio(phase: Phase, params: &NetworkParams) -> Result<f64> {
    let rlnc = phase_cost(phase, Scheme::Rlnc, params)?;
    let tdma = phase_cost(phase, Scheme::Tdma, params)?;
    Ok(tdma.bits / rlnc.bits)
}
