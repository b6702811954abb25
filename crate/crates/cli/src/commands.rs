use anyhow::{anyhow, bail, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};
use starnc::netsim::{simulate_overhead, validate_point, SimPoint};
use starnc::optimizer::{optimal_throughput_ratio, optimize, OptimizationResult};
use starnc::overhead::{expected_overhead, overhead_lower, overhead_upper, star_overhead_exact};
use starnc::throughput::{NetworkParams, Phase, Scheme};

use crate::output::{write_json, Table};
use crate::settings::{Axis, Resolved, SchemeArg};
use crate::{UsageError, ValidationFailed};

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Rlnc => "rlnc",
        Scheme::Tdma => "tdma",
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Mac => "mac",
        Phase::Broadcast => "broadcast",
        Phase::Joint => "joint",
    }
}

/// Rejects parameter sets outside the modules' domains as usage errors.
fn checked(points: Vec<NetworkParams>) -> Result<Vec<NetworkParams>> {
    for p in &points {
        p.validate().map_err(|e| UsageError(e.to_string()))?;
    }
    Ok(points)
}

/// Fails with the first per-point error after the table has been written.
fn first_error(errors: Vec<starnc::Error>, total: usize) -> Result<()> {
    let count = errors.len();
    match errors.into_iter().next() {
        Some(e) => Err(anyhow::Error::new(e).context(format!("{count} of {total} points failed"))),
        None => Ok(()),
    }
}

fn network_columns(p: &NetworkParams) -> Value {
    json!({
        "K": p.message_bits,
        "q": p.field_size,
        "Y": p.sources,
        "h": p.header_bits,
        "p_mac": p.p_mac,
        "p_br": p.p_br,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut a, b) {
        a.extend(b);
    }
    a
}

/// Expected RLNC overhead per (m, q, Y): exact value, bounds and a simulated mean.
pub fn overhead(s: &Resolved) -> Result<()> {
    let points = checked(s.points(&[Axis::M, Axis::Q, Axis::Y])?)?;
    let rows: Vec<Result<Value>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (m, q, y) = (p.blocks, p.field_size, p.sources);
            let exact = if y == 1 { expected_overhead(m, q) } else { star_overhead_exact(u64::from(y - 1) * m, q, y) };
            let sim = if s.trials > 0 {
                Some(simulate_overhead(y, m, q, s.trials, s.seed.wrapping_add(i as u64))?)
            } else {
                None
            };
            Ok(json!({
                "m": m,
                "q": q,
                "Y": y,
                "exact": exact,
                "lower": overhead_lower(q, y),
                "upper": overhead_upper(q, y),
                "sim_mean": sim.map(|st| st.mean),
                "sim_ci95": sim.map(|st| st.ci95),
            }))
        })
        .collect();
    let mut table = Table::new("overhead", &["m", "q", "Y", "exact", "lower", "upper", "sim_mean", "sim_ci95"]);
    for row in rows {
        table.push(row?);
    }
    table.write(s)
}

fn optimum_columns(r: &OptimizationResult, p: &NetworkParams) -> Value {
    let mut at = *p;
    at.blocks = r.m_opt;
    at.rate = r.rate_opt;
    json!({
        "m_opt": r.m_opt,
        "rate": r.rate_opt,
        "rate_over_r0": r.rate_over_r0,
        "eps_mac": at.eps_mac().ok(),
        "eps_br": at.eps_br().ok(),
        "slots": r.cost.slots,
        "bits": r.cost.bits,
        "throughput": r.cost.throughput,
        "certificate": match r.certificate {
            starnc::optimizer::Certificate::Global => "global",
            starnc::optimizer::Certificate::Local => "local",
        },
    })
}

/// Optimum (m, R) per sweep point for one phase and scheme.
pub fn optimize_cmd(s: &Resolved) -> Result<()> {
    let points = checked(s.points(&Axis::NETWORK)?)?;
    let phase: Phase = s.phase.into();
    let schemes = s.scheme.unwrap_or(SchemeArg::Rlnc).schemes();
    let jobs: Vec<(Scheme, NetworkParams)> =
        schemes.iter().flat_map(|&sc| points.iter().map(move |p| (sc, *p))).collect();
    info!("optimizing {} points", jobs.len());
    let results: Vec<_> = jobs.par_iter().map(|(sc, p)| optimize(phase, *sc, p, &s.search)).collect();
    let mut table = Table::new(
        "optimize",
        &[
            "scheme", "phase", "K", "q", "Y", "h", "p_mac", "p_br", "m_opt", "rate", "rate_over_r0", "eps_mac",
            "eps_br", "slots", "bits", "throughput", "certificate", "error",
        ],
    );
    let mut errors = Vec::new();
    for ((sc, p), r) in jobs.iter().zip(results) {
        let head = merge(json!({ "scheme": scheme_name(*sc), "phase": phase_name(phase) }), network_columns(p));
        match r {
            Ok(r) => table.push(merge(head, optimum_columns(&r, p))),
            Err(e) => {
                warn!("{} K={}: {e}", scheme_name(*sc), p.message_bits);
                table.push(merge(head, json!({ "error": e.to_string() })));
                errors.push(e);
            }
        }
    }
    table.write(s)?;
    first_error(errors, jobs.len())
}

/// Smallest K in `(lo, hi]` on the same side of ratio 1 as `hi`, given that
/// `lo` and `hi` lie on opposite sides.
fn bisect_crossing(phase: Phase, base: &NetworkParams, s: &Resolved, lo: u64, hi: u64) -> Result<u64> {
    let above = |k: u64| -> Result<bool> {
        let mut p = *base;
        p.message_bits = k;
        Ok(optimal_throughput_ratio(phase, &p, &s.search)?.ratio >= 1.0)
    };
    let target = above(hi)?;
    let (mut a, mut b) = (lo, hi);
    while b - a > 1 {
        let mid = a + (b - a) / 2;
        if above(mid)? == target {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}

/// TDMA over RLNC bit ratio at each scheme's optimum, with the Y/(Y-1)
/// asymptote and the K where the ratio crosses 1.
pub fn ratio(s: &Resolved) -> Result<()> {
    let points = checked(s.points(&Axis::NETWORK)?)?;
    let phase: Phase = s.phase.into();
    let results: Vec<_> = points.par_iter().map(|p| optimal_throughput_ratio(phase, p, &s.search)).collect();
    let mut table = Table::new(
        "ratio",
        &[
            "K", "q", "Y", "h", "p_mac", "p_br", "ratio", "asymptote", "m_rlnc", "rate_rlnc", "bits_rlnc", "m_tdma",
            "rate_tdma", "bits_tdma", "error",
        ],
    );
    let mut errors = Vec::new();
    let mut ratios = Vec::new();
    for (p, r) in points.iter().zip(results) {
        let asymptote = (p.sources > 1).then(|| f64::from(p.sources) / f64::from(p.sources - 1));
        let head = merge(network_columns(p), json!({ "asymptote": asymptote }));
        match r {
            Ok(r) => {
                ratios.push(Some(r.ratio));
                table.push(merge(
                    head,
                    json!({
                        "ratio": r.ratio,
                        "m_rlnc": r.rlnc.m_opt,
                        "rate_rlnc": r.rlnc.rate_opt,
                        "bits_rlnc": r.rlnc.cost.bits,
                        "m_tdma": r.tdma.m_opt,
                        "rate_tdma": r.tdma.rate_opt,
                        "bits_tdma": r.tdma.cost.bits,
                    }),
                ));
            }
            Err(e) => {
                ratios.push(None);
                table.push(merge(head, json!({ "error": e.to_string() })));
                errors.push(e);
            }
        }
    }
    if let Some(sweep) = s.sweep.as_ref().filter(|sw| sw.axis == Axis::K) {
        let mut crossings = Vec::new();
        for (i, w) in ratios.windows(2).enumerate() {
            if let [Some(a), Some(b)] = w {
                if (*a >= 1.0) != (*b >= 1.0) {
                    let (lo, hi) = (sweep.values[i] as u64, sweep.values[i + 1] as u64);
                    let k = bisect_crossing(phase, &s.params, s, lo, hi)?;
                    crossings.push(json!({ "K": k, "direction": if *b >= 1.0 { "up" } else { "down" } }));
                }
            }
        }
        table.extra.insert("crossings".into(), Value::Array(crossings));
    }
    table.write(s)?;
    first_error(errors, points.len())
}

/// Simulates every sweep point and compares mean total slots with the
/// analytic model. Fails with a validation error when any |z| exceeds the
/// threshold.
pub fn simulate(s: &Resolved) -> Result<()> {
    if s.trials == 0 {
        bail!(UsageError("simulate needs --trials >= 1".into()));
    }
    let mut axes = Axis::NETWORK.to_vec();
    if !s.at_optimum {
        axes.extend([Axis::M, Axis::R]);
    }
    let points = checked(s.points(&axes)?)?;
    let schemes = s.scheme.unwrap_or(SchemeArg::Both).schemes();
    let mut table = Table::new(
        "simulate",
        &[
            "label", "scheme", "K", "q", "Y", "h", "p_mac", "p_br", "m", "rate", "eps_mac", "eps_br", "analytic",
            "simulated", "std_error", "analytic_std_error", "z", "flagged", "realized_throughput",
        ],
    );
    let mut reports = Vec::new();
    let mut flagged = 0;
    let mut index = 0u64;
    for &scheme in &schemes {
        for (i, base) in points.iter().enumerate() {
            let mut p = *base;
            if s.at_optimum {
                let opt = optimize(Phase::Joint, scheme, &p, &s.search)?;
                p.blocks = opt.m_opt;
                p.rate = opt.rate_opt;
            }
            let label = match &s.sweep {
                Some(sw) => format!("{}={}", sw.axis.name(), sw.values[i]),
                None => "base".to_string(),
            };
            let point = SimPoint::from_params(&p)?;
            let seed = s.seed.wrapping_add(index);
            index += 1;
            info!("simulating {} {label} with seed {seed}", scheme_name(scheme));
            let (row, report) =
                validate_point(&label, point, scheme, s.fidelity.into(), s.trials, seed, s.perturb_analytic)?;
            if row.flagged {
                flagged += 1;
                warn!("{} {label}: z = {:.2}", scheme_name(scheme), row.z);
            }
            table.push(merge(
                network_columns(&p),
                json!({
                    "label": label,
                    "scheme": scheme_name(scheme),
                    "m": p.blocks,
                    "rate": p.rate,
                    "eps_mac": point.eps_mac,
                    "eps_br": point.eps_br,
                    "analytic": row.analytic,
                    "simulated": row.simulated,
                    "std_error": row.std_error,
                    "analytic_std_error": row.analytic_std_error,
                    "z": if row.z.is_finite() { json!(row.z) } else { json!(row.z.to_string()) },
                    "flagged": row.flagged,
                    "realized_throughput": report.realized_throughput,
                }),
            ));
            reports.push(json!({ "label": label, "scheme": scheme_name(scheme), "report": report }));
        }
    }
    table.extra.insert("perturb_analytic".into(), json!(s.perturb_analytic));
    table.write(s)?;
    if let Some(path) = &s.report {
        write_json(path, &Value::Array(reports)).map_err(|e| anyhow!("{e:#}"))?;
    }
    if flagged > 0 {
        bail!(ValidationFailed { flagged, total: table.rows.len() });
    }
    Ok(())
}
