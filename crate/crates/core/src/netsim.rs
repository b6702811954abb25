//! Slot-level Monte Carlo simulation of the star network under RLNC and
//! TDMA/ARQ, and comparison of simulated means against the analytics.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::CodeParams;
use crate::error::{Error, Result};
use crate::galois::{Element, GaloisField, IncrementalSolver};
use crate::rlnc::{encode_block, CoefficientStream, Ingest, ReceiverState, SourceMessage};
use crate::throughput::{
    star_rlnc_slot_moments, star_rlnc_slots, star_tdma_slot_moments, star_tdma_slots, NetworkParams, Scheme,
    SlotMoments,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// A trial is abandoned after this many slots.
pub const MAX_SLOTS_PER_TRIAL: u64 = 1_000_000;
/// |z| above this flags a validation point.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fidelity {
    /// Real GF(q) payloads are encoded, superposed, decoded and checked.
    Symbolic,
    /// Only coefficient vectors are tracked.
    #[default]
    RankOnly,
}

impl std::str::FromStr for Fidelity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symbolic" => Ok(Fidelity::Symbolic),
            "rank-only" | "rank" => Ok(Fidelity::RankOnly),
            other => Err(Error::Config(format!("unknown fidelity '{other}'"))),
        }
    }
}

/// What the simulator needs from an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub sources: u32,
    pub blocks: u64,
    pub field_size: u32,
    pub eps_mac: f64,
    pub eps_br: f64,
    /// Message length K, for the realised throughput.
    pub message_bits: u64,
    /// Whole channel bits per slot.
    pub coded_bits: u64,
    /// Payload symbols per block in symbolic mode.
    pub symbols_per_block: usize,
    /// Real-valued k/R minus `coded_bits`, from rounding to whole bits.
    pub rounding_bits: f64,
}

impl SimPoint {
    /// A point given directly by block error probabilities, with one bit per slot.
    pub fn new(sources: u32, blocks: u64, field_size: u32, eps_mac: f64, eps_br: f64) -> Result<Self> {
        let p = Self {
            sources,
            blocks,
            field_size,
            eps_mac,
            eps_br,
            message_bits: blocks,
            coded_bits: 1,
            symbols_per_block: 1,
            rounding_bits: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// The point reached by coding at `params.rate` with `params.blocks` blocks.
    pub fn from_params(params: &NetworkParams) -> Result<Self> {
        params.validate()?;
        let l = params.field_degree()?;
        let code = CodeParams::new(params.rate, params.block_bits()?)?;
        let payload = params.payload_bits()?;
        let p = Self {
            sources: params.sources,
            blocks: params.blocks,
            field_size: params.field_size,
            eps_mac: params.eps_mac()?,
            eps_br: params.eps_br()?,
            message_bits: params.message_bits,
            coded_bits: code.n_bits(),
            symbols_per_block: (payload / f64::from(l)).ceil().max(1.0) as usize,
            rounding_bits: code.n() - code.n_bits() as f64,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources == 0 || self.blocks == 0 {
            return Err(Error::Config("need at least one source and one block".into()));
        }
        GaloisField::with_size(self.field_size)?;
        for eps in [self.eps_mac, self.eps_br] {
            if !(0.0..1.0).contains(&eps) {
                return Err(Error::ModelDomain(format!("block error {eps} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// Expected total slots from the analytic model.
    pub fn analytic_slots(&self, scheme: Scheme) -> Result<f64> {
        match scheme {
            Scheme::Rlnc => Ok(star_rlnc_slots(self.sources, self.blocks, self.field_size, self.eps_mac, self.eps_br)?.value),
            Scheme::Tdma => star_tdma_slots(self.sources, self.blocks, self.eps_mac, self.eps_br),
        }
    }

    /// Mean and variance of the total slots from the analytic model.
    pub fn analytic_moments(&self, scheme: Scheme) -> Result<SlotMoments> {
        match scheme {
            Scheme::Rlnc => {
                star_rlnc_slot_moments(self.sources, self.blocks, self.field_size, self.eps_mac, self.eps_br)
            }
            Scheme::Tdma => star_tdma_slot_moments(self.sources, self.blocks, self.eps_mac, self.eps_br),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub point: SimPoint,
    pub scheme: Scheme,
    pub fidelity: Fidelity,
    pub trials: u64,
    pub seed: u64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        self.point.validate()
    }
}

/// One protocol event, for debugging traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    /// All `senders` transmitted block `block`; `relay_decoded` says whether
    /// the relay recovered the superposition.
    Mac { slot: u64, block: u64, senders: u32, relay_decoded: bool },
    /// The relay broadcast; `received` lists sources that got it intact.
    Broadcast { slot: u64, block: u64, received: Vec<u32> },
    /// `source` reached full rank after storing `stored` blocks.
    Decoded { slot: u64, source: u32, stored: u64 },
    /// TDMA: the relay forwarded `source`'s block `round` to every destination.
    Delivered { slot: u64, source: u32, round: u64 },
    /// Every source can decode; transmission stops.
    Ack { slot: u64 },
    /// The slot guard was hit.
    Abort { slot: u64 },
}

/// Writes events as newline-delimited JSON.
pub fn write_trace<W: Write>(events: &[Event], mut out: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
struct TrialOutcome {
    mac_slots: u64,
    br_slots: u64,
    /// Stored blocks beyond the unknown count at each source's decode time.
    overheads: Vec<u64>,
    aborted: bool,
    duplicates: u64,
    decode_failures: u64,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run_rlnc_trial(
    cfg: &TrialConfig,
    field: &Arc<GaloisField>,
    trial: u64,
    mut trace: Option<&mut Vec<Event>>,
) -> Result<TrialOutcome> {
    let pt = &cfg.point;
    let y = pt.sources as usize;
    let m = pt.blocks as usize;
    let mut rng = trial_rng(cfg.seed, trial);
    let streams: Vec<CoefficientStream> =
        (0..y).map(|s| CoefficientStream::new(s, rng.next_u64(), field, m)).collect();
    let symbolic = cfg.fidelity == Fidelity::Symbolic;
    let spb = if symbolic { pt.symbols_per_block } else { 0 };
    let messages: Vec<SourceMessage> = if symbolic {
        (0..y).map(|s| SourceMessage::random(s, m, spb, field, &mut rng)).collect()
    } else {
        Vec::new()
    };
    let mut receivers = (0..y)
        .map(|s| ReceiverState::new(field.clone(), s, y, m, spb))
        .collect::<Result<Vec<_>>>()?;
    let mut out = TrialOutcome { overheads: Vec::with_capacity(y), ..Default::default() };
    let mut log = |e: Event| {
        if let Some(t) = trace.as_deref_mut() {
            t.push(e);
        }
    };
    let unknowns = ((y - 1) * m) as u64;
    let mut block: u64 = 0;
    let mut coeffs = vec![0; m];
    loop {
        if receivers.iter().all(ReceiverState::is_decodable) {
            log(Event::Ack { slot: out.mac_slots + out.br_slots });
            break;
        }
        if out.mac_slots + out.br_slots >= MAX_SLOTS_PER_TRIAL {
            log::warn!("trial {trial} aborted after {MAX_SLOTS_PER_TRIAL} slots");
            out.aborted = true;
            log(Event::Abort { slot: out.mac_slots + out.br_slots });
            break;
        }
        let b = block;
        block += 1;
        out.mac_slots += 1;
        let relay_decoded = rng.gen::<f64>() >= pt.eps_mac;
        log(Event::Mac { slot: out.mac_slots + out.br_slots, block: b, senders: pt.sources, relay_decoded });
        if !relay_decoded {
            continue;
        }
        out.br_slots += 1;
        let slot = out.mac_slots + out.br_slots;
        let superposed: Vec<Element> = if symbolic {
            let mut acc = vec![0; spb];
            for (s, msg) in messages.iter().enumerate() {
                streams[s].fill(b, &mut coeffs);
                for (a, c) in acc.iter_mut().zip(encode_block(field, msg, &coeffs)?) {
                    *a ^= c;
                }
            }
            acc
        } else {
            Vec::new()
        };
        let mut received = Vec::new();
        for (s, rx) in receivers.iter_mut().enumerate() {
            if rx.is_decodable() {
                continue;
            }
            if rng.gen::<f64>() < pt.eps_br {
                continue;
            }
            received.push(s as u32);
            let result = if symbolic {
                rx.ingest(b, &superposed, &streams, &messages[s])?
            } else {
                rx.ingest_coefficients(b, &streams)?
            };
            if result == Ingest::Duplicate {
                out.duplicates += 1;
            }
            if rx.is_decodable() {
                out.overheads.push(rx.stored() as u64 - unknowns);
                if symbolic {
                    let decoded = rx.decode()?;
                    if decoded.iter().any(|(src, blocks)| blocks.as_slice() != messages[*src].blocks()) {
                        out.decode_failures += 1;
                    }
                }
            }
        }
        let newly: Vec<u32> = received
            .iter()
            .copied()
            .filter(|&s| receivers[s as usize].is_decodable())
            .collect();
        log(Event::Broadcast { slot, block: b, received });
        for s in newly {
            log(Event::Decoded { slot, source: s, stored: receivers[s as usize].stored() as u64 });
        }
    }
    Ok(out)
}

fn run_tdma_trial(cfg: &TrialConfig, trial: u64, mut trace: Option<&mut Vec<Event>>) -> TrialOutcome {
    let pt = &cfg.point;
    let mut rng = trial_rng(cfg.seed, trial);
    let mut out = TrialOutcome::default();
    let mut log = |e: Event| {
        if let Some(t) = trace.as_deref_mut() {
            t.push(e);
        }
    };
    let destinations = pt.sources as usize - 1;
    let mut pending = vec![false; destinations];
    let mut block = 0;
    'rounds: for round in 0..pt.blocks {
        for source in 0..pt.sources {
            loop {
                if out.mac_slots + out.br_slots >= MAX_SLOTS_PER_TRIAL {
                    out.aborted = true;
                    log(Event::Abort { slot: out.mac_slots + out.br_slots });
                    break 'rounds;
                }
                out.mac_slots += 1;
                let ok = rng.gen::<f64>() >= pt.eps_mac;
                log(Event::Mac { slot: out.mac_slots + out.br_slots, block, senders: 1, relay_decoded: ok });
                if ok {
                    break;
                }
            }
            pending.fill(true);
            let mut left = destinations;
            while left > 0 {
                if out.mac_slots + out.br_slots >= MAX_SLOTS_PER_TRIAL {
                    out.aborted = true;
                    log(Event::Abort { slot: out.mac_slots + out.br_slots });
                    break 'rounds;
                }
                out.br_slots += 1;
                let mut received = Vec::new();
                for (d, p) in pending.iter_mut().enumerate() {
                    if *p && rng.gen::<f64>() >= pt.eps_br {
                        *p = false;
                        left -= 1;
                        received.push(d as u32);
                    }
                }
                log(Event::Broadcast { slot: out.mac_slots + out.br_slots, block, received });
            }
            log(Event::Delivered { slot: out.mac_slots + out.br_slots, source, round });
            block += 1;
        }
    }
    if !out.aborted {
        log(Event::Ack { slot: out.mac_slots + out.br_slots });
    }
    out
}

fn run_trial(cfg: &TrialConfig, field: &Arc<GaloisField>, trial: u64, trace: Option<&mut Vec<Event>>) -> Result<TrialOutcome> {
    match cfg.scheme {
        Scheme::Rlnc => run_rlnc_trial(cfg, field, trial, trace),
        Scheme::Tdma => Ok(run_tdma_trial(cfg, trial, trace)),
    }
}

/// Event trace of a single trial.
pub fn trace_trial(cfg: &TrialConfig, trial: u64) -> Result<Vec<Event>> {
    cfg.validate()?;
    let field = Arc::new(GaloisField::with_size(cfg.point.field_size)?);
    let mut events = Vec::new();
    run_trial(cfg, &field, trial, Some(&mut events))?;
    Ok(events)
}

/// Exact count, sum and sum of squares of a non-negative integer sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accumulator {
    pub n: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl Accumulator {
    pub fn push(&mut self, x: u64) {
        self.n += 1;
        self.sum += u128::from(x);
        self.sum_sq += u128::from(x) * u128::from(x);
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn stat(&self) -> Stat {
        if self.n == 0 {
            return Stat { n: 0, mean: f64::NAN, std_dev: f64::NAN, std_error: f64::NAN, ci95: f64::NAN };
        }
        let n = self.n as f64;
        let mean = self.sum as f64 / n;
        // n * sum_sq - sum^2 is exact in integers
        let var = if self.n > 1 {
            let num = u128::from(self.n) * self.sum_sq - self.sum * self.sum;
            num as f64 / (n * (n - 1.0))
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        let std_error = std_dev / n.sqrt();
        Stat { n: self.n, mean, std_dev, std_error, ci95: 1.959_963_984_540_054 * std_error }
    }
}

/// Sample mean with its spread; `ci95` is the half-width of the normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: u64,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Partial {
    mac: Accumulator,
    br: Accumulator,
    total: Accumulator,
    overhead: Accumulator,
    histogram: BTreeMap<u64, u64>,
    aborted: u64,
    duplicates: u64,
    decode_failures: u64,
}

impl Partial {
    fn add(mut self, o: TrialOutcome) -> Self {
        self.duplicates += o.duplicates;
        self.decode_failures += o.decode_failures;
        if o.aborted {
            self.aborted += 1;
            return self;
        }
        self.mac.push(o.mac_slots);
        self.br.push(o.br_slots);
        self.total.push(o.mac_slots + o.br_slots);
        for x in o.overheads {
            self.overhead.push(x);
            *self.histogram.entry(x).or_default() += 1;
        }
        self
    }

    fn merge(mut self, o: Self) -> Self {
        self.mac = self.mac.merge(o.mac);
        self.br = self.br.merge(o.br);
        self.total = self.total.merge(o.total);
        self.overhead = self.overhead.merge(o.overhead);
        for (k, v) in o.histogram {
            *self.histogram.entry(k).or_default() += v;
        }
        self.aborted += o.aborted;
        self.duplicates += o.duplicates;
        self.decode_failures += o.decode_failures;
        self
    }
}

/// Aggregate of all trials of one configuration. Aborted trials are counted
/// but excluded from the statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    pub config: TrialConfig,
    pub mac_slots: Stat,
    pub broadcast_slots: Stat,
    pub total_slots: Stat,
    /// Channel bits sent, total slots times whole bits per slot.
    pub bit_time: Stat,
    /// Y K divided by the mean bit time.
    pub realized_throughput: f64,
    /// Per-receiver count of stored blocks beyond (Y-1)m at decode time (RLNC).
    pub overhead_histogram: BTreeMap<u64, u64>,
    pub decode_overhead: Stat,
    pub aborted_trials: u64,
    pub duplicate_blocks: u64,
    pub decode_failures: u64,
    /// Raw sums, so reports can be merged exactly.
    pub total_accumulator: Accumulator,
}

/// Runs all trials of `cfg`, in parallel, with a result independent of the
/// thread count.
pub fn simulate(cfg: &TrialConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let field = Arc::new(GaloisField::with_size(cfg.point.field_size)?);
    let part = (0..cfg.trials)
        .into_par_iter()
        .try_fold(Partial::default, |acc, t| Ok::<_, Error>(acc.add(run_trial(cfg, &field, t, None)?)))
        .try_reduce(Partial::default, |a, b| Ok(a.merge(b)))?;
    if part.aborted > 0 {
        log::warn!("{} of {} trials hit the slot guard", part.aborted, cfg.trials);
    }
    let total = part.total.stat();
    let scale = cfg.point.coded_bits as f64;
    let bit_time = Stat {
        n: total.n,
        mean: total.mean * scale,
        std_dev: total.std_dev * scale,
        std_error: total.std_error * scale,
        ci95: total.ci95 * scale,
    };
    Ok(SimulationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: *cfg,
        mac_slots: part.mac.stat(),
        broadcast_slots: part.br.stat(),
        total_slots: total,
        realized_throughput: f64::from(cfg.point.sources) * cfg.point.message_bits as f64 / bit_time.mean,
        bit_time,
        overhead_histogram: part.histogram,
        decode_overhead: part.overhead.stat(),
        aborted_trials: part.aborted,
        duplicate_blocks: part.duplicates,
        decode_failures: part.decode_failures,
        total_accumulator: part.total,
    })
}

pub fn simulate_rlnc(point: SimPoint, fidelity: Fidelity, trials: u64, seed: u64) -> Result<SimulationReport> {
    simulate(&TrialConfig { point, scheme: Scheme::Rlnc, fidelity, trials, seed })
}

pub fn simulate_tdma(point: SimPoint, trials: u64, seed: u64) -> Result<SimulationReport> {
    simulate(&TrialConfig { point, scheme: Scheme::Tdma, fidelity: Fidelity::RankOnly, trials, seed })
}

/// Decoding overhead on error-free links: blocks beyond the unknown count
/// until every receiver can decode.
///
/// With `sources = 1` a single receiver collects random vectors over m
/// unknowns. Otherwise all `sources` receivers of the star hear the same
/// superpositions, each seeing the (Y-1)m coefficients of the other sources.
pub fn simulate_overhead(sources: u32, m: u64, field_size: u32, trials: u64, seed: u64) -> Result<Stat> {
    if sources == 0 || m == 0 || trials == 0 {
        return Err(Error::Config("need a source, a block and a trial".into()));
    }
    let field = GaloisField::with_size(field_size)?;
    let (y, m) = (sources as usize, m as usize);
    let (receivers, unknowns) = if y == 1 { (1, m) } else { (y, (y - 1) * m) };
    let mask = (field_size - 1) as Element;
    let acc = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut solvers = vec![IncrementalSolver::new(unknowns, 0); receivers];
            let mut full = vec![0 as Element; y * m];
            let mut view = vec![0 as Element; unknowns];
            let mut blocks = 0u64;
            while solvers.iter().any(|s| !s.is_full_rank()) {
                if blocks >= MAX_SLOTS_PER_TRIAL {
                    return Err(Error::State(format!("overhead trial {t} did not terminate")));
                }
                blocks += 1;
                for chunk in full.chunks_mut(4) {
                    let word = rng.next_u64();
                    for (k, c) in chunk.iter_mut().enumerate() {
                        *c = (word >> (16 * k)) as Element & mask;
                    }
                }
                for (r, solver) in solvers.iter_mut().enumerate() {
                    if solver.is_full_rank() {
                        continue;
                    }
                    if receivers == 1 {
                        view.copy_from_slice(&full);
                    } else {
                        view[..r * m].copy_from_slice(&full[..r * m]);
                        view[r * m..].copy_from_slice(&full[(r + 1) * m..]);
                    }
                    solver.insert(&field, &view, &[])?;
                }
            }
            Ok(blocks - unknowns as u64)
        })
        .try_fold(Accumulator::default, |mut acc, x| {
            acc.push(x?);
            Ok::<_, Error>(acc)
        })
        .try_reduce(Accumulator::default, |a, b| Ok(a.merge(b)))?;
    Ok(acc.stat())
}

/// Analytic against simulated mean total slots at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub label: String,
    pub scheme: Scheme,
    pub point: SimPoint,
    pub analytic: f64,
    pub simulated: f64,
    /// Sample standard error of the simulated mean.
    pub std_error: f64,
    /// Standard error of the mean implied by the analytic variance.
    pub analytic_std_error: f64,
    pub z: f64,
    pub flagged: bool,
}

/// z-score of a sample mean against the analytic mean, scaled by the
/// analytic standard error `sqrt(variance / n)`. Rare events make the sample
/// variance unreliable, so the model variance is used. With zero variance
/// any difference is infinite.
pub fn z_score(analytic: f64, analytic_std_error: f64, mean: f64) -> f64 {
    let diff = mean - analytic;
    if diff == 0.0 {
        return 0.0;
    }
    if analytic_std_error > 0.0 {
        diff / analytic_std_error
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Simulates one point and compares its mean total slots with the analytic
/// value scaled by `1 + perturb`.
pub fn validate_point(
    label: &str,
    point: SimPoint,
    scheme: Scheme,
    fidelity: Fidelity,
    trials: u64,
    seed: u64,
    perturb: f64,
) -> Result<(ValidationRow, SimulationReport)> {
    let moments = point.analytic_moments(scheme)?;
    let analytic = moments.mean * (1.0 + perturb);
    let report = simulate(&TrialConfig { point, scheme, fidelity, trials, seed })?;
    let stat = report.total_slots;
    let analytic_std_error = (moments.variance.max(0.0) / stat.n.max(1) as f64).sqrt();
    let z = z_score(analytic, analytic_std_error, stat.mean);
    let row = ValidationRow {
        label: label.to_string(),
        scheme,
        point,
        analytic,
        simulated: stat.mean,
        std_error: stat.std_error,
        analytic_std_error,
        z,
        flagged: !(z.abs() <= Z_THRESHOLD),
    };
    Ok((row, report))
}

/// Runs [`validate_point`] on every `(label, point)`. Point `i` uses seed
/// `seed + i`.
pub fn validate(
    points: &[(String, SimPoint)],
    scheme: Scheme,
    fidelity: Fidelity,
    trials: u64,
    seed: u64,
    perturb: f64,
) -> Result<Vec<ValidationRow>> {
    points
        .iter()
        .enumerate()
        .map(|(i, (label, point))| {
            validate_point(label, *point, scheme, fidelity, trials, seed.wrapping_add(i as u64), perturb).map(|r| r.0)
        })
        .collect()
}
