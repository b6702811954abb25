use starnc::channel::CodingModel;
use starnc::netsim::{
    simulate, simulate_overhead, simulate_rlnc, simulate_tdma, trace_trial, validate, Event, Fidelity, SimPoint,
    SimulationReport, TrialConfig, REPORT_SCHEMA_VERSION,
};
use starnc::optimizer::{optimal_rate, SearchConfig};
use starnc::overhead::{expected_overhead, star_overhead_exact};
use starnc::throughput::{star_rlnc_slots, star_tdma_slots, BlockSizing, NetworkParams, OverheadModel, Phase, Scheme};

fn params(y: u32, m: u64, q: u32, p: f64) -> NetworkParams {
    NetworkParams {
        sources: y,
        message_bits: 1000,
        header_bits: 16,
        field_size: q,
        blocks: m,
        rate: 0.5,
        p_mac: p,
        p_br: p,
        model: CodingModel::ErrorExponent,
        sizing: BlockSizing::Padded,
        overhead: OverheadModel::UpperBound,
    }
}

#[test]
fn noiseless_two_sources_use_two_slots() {
    let pt = SimPoint::new(2, 1, 1 << 16, 0.0, 0.0).unwrap();
    let r = simulate_rlnc(pt, Fidelity::Symbolic, 100, 1).unwrap();
    assert_eq!(r.total_slots.mean, 2.0);
    assert_eq!(r.total_slots.std_dev, 0.0);
}

#[test]
fn optimal_operating_point_matches_analytic_slots() {
    let mut p = params(2, 2, 4, 0.04);
    let (rate, cost, _) = optimal_rate(Phase::Joint, Scheme::Rlnc, &p, &SearchConfig::default()).unwrap();
    p.rate = rate;
    let pt = SimPoint::from_params(&p).unwrap();
    let r = simulate_rlnc(pt, Fidelity::RankOnly, 50_000, 17).unwrap();
    let s = r.total_slots;
    assert!((s.mean - cost.slots).abs() < 3.0 * s.std_error, "{} vs {}", s.mean, cost.slots);
}

#[test]
fn decode_overhead_matches_single_source_formula() {
    let (y, m, q) = (3u32, 2u64, 4u32);
    let pt = SimPoint::new(y, m, q, 0.0, 0.0).unwrap();
    let r = simulate_rlnc(pt, Fidelity::RankOnly, 30_000, 2).unwrap();
    let expected = expected_overhead(u64::from(y - 1) * m, q);
    let s = r.decode_overhead;
    assert!((s.mean - expected).abs() < 3.0 * s.std_error, "{} vs {expected}", s.mean);
}

#[test]
fn tdma_broadcast_matches_finite_form() {
    let pt = SimPoint::new(5, 1, 2, 0.0, 0.1).unwrap();
    let r = simulate_tdma(pt, 50_000, 3).unwrap();
    let analytic = pt.analytic_slots(Scheme::Tdma).unwrap();
    let s = r.total_slots;
    assert!((s.mean - analytic).abs() < 3.0 * s.std_error);
}

#[test]
fn single_source_overhead_simulation() {
    for (m, q) in [(1, 2), (4, 2), (3, 16)] {
        let s = simulate_overhead(1, m, q, 40_000, 5).unwrap();
        let expected = expected_overhead(m, q);
        assert!((s.mean - expected).abs() < 3.0 * s.std_error, "m={m} q={q}: {} vs {expected}", s.mean);
    }
    let s = simulate_overhead(3, 2, 4, 20_000, 6).unwrap();
    let independent = star_overhead_exact(4, 4, 3);
    assert!((s.mean - independent).abs() < 4.0 * s.std_error, "{} vs {independent}", s.mean);
}

#[test]
fn noiseless_tdma_grid_validates_exactly() {
    let points: Vec<(String, SimPoint)> = [(2, 1), (3, 4), (6, 2)]
        .into_iter()
        .map(|(y, m)| (format!("Y={y} m={m}"), SimPoint::new(y, m, 4, 0.0, 0.0).unwrap()))
        .collect();
    let rows = validate(&points, Scheme::Tdma, Fidelity::RankOnly, 200, 9, 0.0).unwrap();
    assert!(rows.iter().all(|r| r.z == 0.0 && !r.flagged));
}

#[test]
fn corrupted_analytics_are_flagged() {
    let points = vec![("noisy".to_string(), SimPoint::new(3, 2, 4, 0.1, 0.1).unwrap())];
    let clean = validate(&points, Scheme::Rlnc, Fidelity::RankOnly, 20_000, 4, 0.0).unwrap();
    assert!(!clean[0].flagged, "z = {}", clean[0].z);
    let mutated = validate(&points, Scheme::Rlnc, Fidelity::RankOnly, 20_000, 4, 0.05).unwrap();
    assert!(mutated[0].flagged, "z = {}", mutated[0].z);
}

#[test]
fn sources_transmit_until_global_ack() {
    let pt = SimPoint::new(4, 2, 2, 0.2, 0.3).unwrap();
    let cfg = TrialConfig { point: pt, scheme: Scheme::Rlnc, fidelity: Fidelity::RankOnly, trials: 1, seed: 12 };
    for trial in 0..30 {
        let events = trace_trial(&cfg, trial).unwrap();
        let ack = events.iter().position(|e| matches!(e, Event::Ack { .. })).unwrap();
        assert_eq!(ack, events.len() - 1);
        let decoded: Vec<usize> =
            events.iter().enumerate().filter(|(_, e)| matches!(e, Event::Decoded { .. })).map(|(i, _)| i).collect();
        assert_eq!(decoded.len(), 4);
        for e in &events[decoded[0]..ack] {
            if let Event::Mac { senders, .. } = e {
                assert_eq!(*senders, 4);
            }
        }
    }
}

#[test]
fn report_round_trips_through_json() {
    let pt = SimPoint::new(3, 2, 16, 0.1, 0.05).unwrap();
    let cfg = TrialConfig { point: pt, scheme: Scheme::Rlnc, fidelity: Fidelity::Symbolic, trials: 500, seed: 1 };
    let r = simulate(&cfg).unwrap();
    assert_eq!(r.schema_version, REPORT_SCHEMA_VERSION);
    let text = serde_json::to_string(&r).unwrap();
    let back: SimulationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
    assert_eq!(r.total_slots.n + r.aborted_trials, 500);
}

#[test]
fn analytic_variance_matches_sample_spread() {
    for (scheme, pt) in [
        (Scheme::Rlnc, SimPoint::new(3, 2, 4, 0.2, 0.3).unwrap()),
        (Scheme::Rlnc, SimPoint::new(5, 1, 64, 0.05, 0.1).unwrap()),
        (Scheme::Tdma, SimPoint::new(4, 2, 2, 0.2, 0.3).unwrap()),
    ] {
        let moments = pt.analytic_moments(scheme).unwrap();
        let expected_mean = match scheme {
            Scheme::Rlnc => star_rlnc_slots(pt.sources, pt.blocks, pt.field_size, pt.eps_mac, pt.eps_br).unwrap().value,
            Scheme::Tdma => star_tdma_slots(pt.sources, pt.blocks, pt.eps_mac, pt.eps_br).unwrap(),
        };
        assert!((moments.mean - expected_mean).abs() < 1e-9 * expected_mean);
        let s = simulate(&TrialConfig { point: pt, scheme, fidelity: Fidelity::RankOnly, trials: 40_000, seed: 21 })
            .unwrap()
            .total_slots;
        let ratio = s.std_dev * s.std_dev / moments.variance;
        assert!((ratio - 1.0).abs() < 0.05, "{scheme:?}: sample {} vs {}", s.std_dev.powi(2), moments.variance);
    }
}

#[test]
fn rare_retransmissions_are_not_flagged() {
    let pt = SimPoint::new(3, 1, 64, 9.6e-5, 9.6e-5).unwrap();
    let points: Vec<(String, SimPoint)> = (0..20).map(|i| (format!("{i}"), pt)).collect();
    let rows = validate(&points, Scheme::Tdma, Fidelity::RankOnly, 10_000, 100, 0.0).unwrap();
    assert!(rows.iter().all(|r| !r.flagged), "{:?}", rows.iter().map(|r| r.z).collect::<Vec<_>>());
}
