use proptest::prelude::*;
use starnc::channel::{capacity, cutoff_rate, ppv_epsilon, ppv_rate, q_func, q_inv};
use starnc::galois::{Element, GaloisField, GfMatrix, IncrementalSolver};
use starnc::netsim::Accumulator;
use starnc::optimizer::{lambert_w_m1, lambert_w_m1_neg_exp, optimal_rate_ratio_mac};
use starnc::overhead::{
    expected_overhead, overhead_lower, overhead_upper, p_success, p_success_bounds, star_overhead_exact,
};
use starnc::throughput::{br_rlnc_blocks, br_tdma_blocks, br_tdma_blocks_series, mac_tdma_blocks};

fn field_and_elements(n: usize) -> impl Strategy<Value = (u32, Vec<Element>)> {
    (1u32..=16).prop_flat_map(move |l| {
        let q = 1u32 << l;
        (Just(l), proptest::collection::vec((0..q).prop_map(|x| x as Element), n))
    })
}

proptest! {
    #[test]
    fn field_axioms((l, v) in field_and_elements(3)) {
        let f = GaloisField::new(l).unwrap();
        let (a, b, c) = (v[0], v[1], v[2]);
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.mul(a, 1), a);
        prop_assert_eq!(f.add(a, a), 0);
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            prop_assert_eq!(f.pow(a, u64::from(f.size() - 1)), 1);
            prop_assert_eq!(f.div(f.mul(b, a), a).unwrap(), b);
        } else {
            prop_assert!(f.inv(a).is_err());
        }
    }

    #[test]
    fn slice_kernels_match_scalar_ops((l, v) in field_and_elements(17)) {
        let f = GaloisField::new(l).unwrap();
        let c = v[16];
        let src = &v[..8];
        let mut dst = v[8..16].to_vec();
        let expected: Vec<Element> = dst.iter().zip(src).map(|(&d, &s)| f.add(d, f.mul(c, s))).collect();
        f.mul_add_slice(&mut dst, src, c);
        prop_assert_eq!(dst, expected);
        let mut scaled = src.to_vec();
        f.scale_slice(&mut scaled, c);
        prop_assert_eq!(scaled, src.iter().map(|&s| f.mul(c, s)).collect::<Vec<_>>());
    }

    #[test]
    fn rank_is_transpose_invariant_and_bounded(
        (l, v) in field_and_elements(24),
        rows in 1usize..=4,
    ) {
        let f = GaloisField::new(l.min(4)).unwrap();
        let mask = (f.size() - 1) as Element;
        let cols = 24 / rows;
        let data: Vec<Vec<Element>> = (0..rows)
            .map(|r| (0..cols).map(|c| v[r * cols + c] & mask).collect())
            .collect();
        let a = GfMatrix::from_rows(&data).unwrap();
        let rank = a.rank(&f);
        prop_assert!(rank <= rows.min(cols));
        prop_assert_eq!(rank, a.transpose().rank(&f));
        let product = a.mul(&f, &a.transpose()).unwrap();
        prop_assert!(product.rank(&f) <= rank);
    }

    #[test]
    fn solver_recovers_unknowns(seed in any::<u64>(), l in 1u32..=8, n in 1usize..=10, len in 0usize..=4) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = GaloisField::new(l).unwrap();
        let q = f.size();
        let x: Vec<Vec<Element>> =
            (0..n).map(|_| (0..len).map(|_| rng.gen_range(0..q) as Element).collect()).collect();
        let mut solver = IncrementalSolver::new(n, len);
        let mut stored = 0;
        while !solver.is_full_rank() {
            let coeffs: Vec<Element> = (0..n).map(|_| rng.gen_range(0..q) as Element).collect();
            let rhs: Vec<Element> = (0..len)
                .map(|j| (0..n).fold(0, |acc, i| f.add(acc, f.mul(coeffs[i], x[i][j]))))
                .collect();
            let predicted = solver.would_increase_rank(&f, &coeffs);
            prop_assert_eq!(solver.insert(&f, &coeffs, &rhs).unwrap(), predicted);
            stored += 1;
            prop_assert!(stored < 10_000);
        }
        prop_assert_eq!(solver.solve(&f).unwrap(), x);
    }

    #[test]
    fn success_probability_sandwich(m in 1u64..200, x in 0u64..40, l in 1u32..=16) {
        let q = 1u32 << l;
        let p = p_success(m, x, q);
        let (lo, hi) = p_success_bounds(x, q);
        prop_assert!(lo <= p + 1e-15 && p <= hi + 1e-15, "{lo} {p} {hi}");
        prop_assert!(p_success(m + 1, x, q) <= p);
        prop_assert!(p_success(m, x + 1, q) >= p);
    }

    #[test]
    fn star_overhead_lies_between_bounds(m in 1u64..40, y in 1u32..=8, l in 1u32..=8) {
        let q = 1u32 << l;
        let (unknowns, receivers) = if y == 1 { (m, 1) } else { (u64::from(y - 1) * m, y) };
        let exact = star_overhead_exact(unknowns, q, receivers);
        let tol = 1e-12 * exact.max(1.0);
        prop_assert!(overhead_lower(q, y) <= exact + tol);
        prop_assert!(exact <= overhead_upper(q, y) + tol);
    }

    #[test]
    fn expected_overhead_monotone(m in 1u64..100, l in 1u32..=15) {
        let q = 1u32 << l;
        prop_assert!(expected_overhead(m + 1, q) >= expected_overhead(m, q));
        prop_assert!(expected_overhead(m, 2 * q) < expected_overhead(m, q));
        prop_assert!((star_overhead_exact(m, q, 1) - expected_overhead(m, q)).abs() < 1e-12);
    }

    #[test]
    fn tdma_series_identity(y in 2u32..=8, eps in 0.0f64..0.9) {
        let closed = br_tdma_blocks(y, 1, eps).unwrap();
        let series = br_tdma_blocks_series(y, 1, eps).unwrap();
        prop_assert!((closed - series.value).abs() <= 1e-9 * closed);
        prop_assert!(closed >= 1.0 / (1.0 - eps) - 1e-12);
    }

    #[test]
    fn rlnc_broadcast_bounds(y in 2u32..=6, m in 1u64..=8, l in 1u32..=8, eps in 0.0f64..0.8) {
        let q = 1u32 << l;
        let mp = f64::from(y - 1) * m as f64;
        let v = br_rlnc_blocks(y, m, q, eps).unwrap().value;
        prop_assert!(v >= mp / (1.0 - eps) - 1e-9);
        prop_assert!(v >= br_rlnc_blocks(y, m, q, eps * 0.5).unwrap().value - 1e-9);
        // rounds in which every one of the Y receivers hears at least one block
        let round = br_tdma_blocks(y + 1, 1, eps).unwrap();
        prop_assert!(v <= (mp + overhead_upper(q, y)) * round + 1e-9);
    }

    #[test]
    fn mac_tdma_scales_linearly(y in 1u32..=8, m in 1u64..=64, eps in 0.0f64..0.99) {
        let v = mac_tdma_blocks(y, m, eps).unwrap();
        prop_assert!((v - f64::from(y) * m as f64 / (1.0 - eps)).abs() <= 1e-9 * v);
    }

    #[test]
    fn lambert_log_form_solves_its_equation(u in 1.0f64..1e6) {
        let w = lambert_w_m1_neg_exp(u).unwrap();
        prop_assert!(w <= -1.0);
        prop_assert!((w + (-w).ln() + u).abs() <= 1e-12 * u);
    }

    #[test]
    fn lambert_direct_identity(t in 0.0f64..1.0) {
        let x = -(-1.0f64).exp() * (1.0 - t).max(1e-300);
        let w = lambert_w_m1(x).unwrap();
        prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs());
    }

    #[test]
    fn mac_rate_ratio_in_unit_interval(k in 1.0f64..1e6) {
        let r = optimal_rate_ratio_mac(k).unwrap();
        prop_assert!(r > 0.0 && r < 1.0);
        prop_assert!(optimal_rate_ratio_mac(k * 1.5).unwrap() >= r);
    }

    #[test]
    fn bsc_rates_are_ordered(p in 1e-6f64..0.4999) {
        let (c, r0) = (capacity(p), cutoff_rate(p));
        prop_assert!(0.0 < r0 && r0 <= c && c < 1.0);
    }

    #[test]
    fn q_function_inverts(x in -3.0f64..8.0) {
        let y = q_func(x);
        prop_assert!((q_inv(y).unwrap() - x).abs() < 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn ppv_epsilon_inverts_ppv_rate(n in 100.0f64..1e5, p in 0.01f64..0.3, eps in 1e-9f64..0.5) {
        let r = ppv_rate(n, p, eps).unwrap();
        if r > 0.0 && r < 1.0 {
            let back = ppv_epsilon(n, p, r).unwrap();
            prop_assert!((back - eps).abs() <= 1e-6 * eps, "{back} vs {eps}");
        }
    }

    #[test]
    fn accumulator_merge_matches_single_pass(xs in proptest::collection::vec(0u64..1_000_000, 1..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let mut whole = Accumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
        xs[..cut].iter().for_each(|&x| a.push(x));
        xs[cut..].iter().for_each(|&x| b.push(x));
        prop_assert_eq!(a.merge(b), whole);
        let mean = xs.iter().sum::<u64>() as f64 / xs.len() as f64;
        prop_assert!((whole.stat().mean - mean).abs() <= 1e-9 * mean.max(1.0));
    }
}
