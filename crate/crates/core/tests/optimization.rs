use starnc::channel::CodingModel;
use starnc::optimizer::{optimal_throughput_ratio, optimize, Certificate, SearchConfig};
use starnc::throughput::{BlockSizing, NetworkParams, OverheadModel, Phase, Scheme};

fn params(k: u64, q: u32, y: u32, h: u64, p: f64, model: CodingModel) -> NetworkParams {
    NetworkParams {
        sources: y,
        message_bits: k,
        header_bits: h,
        field_size: q,
        blocks: 1,
        rate: 0.5,
        p_mac: p,
        p_br: p,
        model,
        sizing: BlockSizing::Padded,
        overhead: OverheadModel::UpperBound,
    }
}

fn cfg() -> SearchConfig {
    SearchConfig { m_max: 64, ..SearchConfig::default() }
}

#[test]
fn mac_block_count_grows_with_message_length() {
    let mut prev = 0;
    for k in [200, 500, 1000, 2000, 5000, 10_000, 20_000] {
        let mut p = params(k, 16, 3, 16, 0.11, CodingModel::ErrorExponent);
        p.p_br = 0.0;
        let r = optimize(Phase::Mac, Scheme::Rlnc, &p, &cfg()).unwrap();
        assert!(r.m_opt >= prev, "K={k}: m={} after {prev}", r.m_opt);
        assert_eq!(r.certificate, Certificate::Global);
        prev = r.m_opt;
    }
    assert!(prev > 1);
}

#[test]
fn ppv_block_count_shrinks_as_channel_degrades() {
    for k in [2000, 10_000] {
        let ms: Vec<u64> = [0.04, 0.11, 0.21]
            .into_iter()
            .map(|p| optimize(Phase::Joint, Scheme::Rlnc, &params(k, 4, 6, 32, p, CodingModel::Ppv), &cfg()).unwrap().m_opt)
            .collect();
        assert!(ms.windows(2).all(|w| w[1] <= w[0]), "K={k}: {ms:?}");
    }
}

#[test]
fn tdma_prefers_a_single_block() {
    for (k, y, h) in [(1000, 2, 0), (5000, 4, 16), (20_000, 6, 32)] {
        for model in [CodingModel::ErrorExponent, CodingModel::Ppv] {
            let r = optimize(Phase::Joint, Scheme::Tdma, &params(k, 4, y, h, 0.11, model), &cfg()).unwrap();
            assert_eq!(r.m_opt, 1, "K={k} Y={y} h={h} {model:?}");
        }
    }
}

#[test]
fn large_fields_beat_tdma_at_every_length() {
    for k in [100, 300, 1000, 3000, 10_000] {
        let r = optimal_throughput_ratio(Phase::Joint, &params(k, 64, 6, 32, 0.11, CodingModel::ErrorExponent), &cfg())
            .unwrap();
        assert!(r.ratio >= 1.0, "K={k}: {}", r.ratio);
    }
}

#[test]
fn ratio_grows_toward_its_asymptote() {
    let mut prev = 0.0;
    for k in [1000, 10_000, 100_000] {
        let r = optimal_throughput_ratio(Phase::Joint, &params(k, 16, 3, 16, 0.04, CodingModel::ErrorExponent), &cfg())
            .unwrap()
            .ratio;
        assert!(r > prev && r < 1.5, "K={k}: {r}");
        prev = r;
    }
}

#[test]
fn ee_optimum_is_independent_of_crossover() {
    let a = optimize(Phase::Joint, Scheme::Rlnc, &params(3000, 4, 3, 16, 0.04, CodingModel::ErrorExponent), &cfg())
        .unwrap();
    let b = optimize(Phase::Joint, Scheme::Rlnc, &params(3000, 4, 3, 16, 0.11, CodingModel::ErrorExponent), &cfg())
        .unwrap();
    assert_eq!(a.m_opt, b.m_opt);
    let (ra, rb) = (a.rate_over_r0.unwrap(), b.rate_over_r0.unwrap());
    assert!((ra - rb).abs() < 1e-6, "{ra} vs {rb}");
}
