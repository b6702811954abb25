//! Closed-form RLNC overhead analytics: probability that `m + x` random
//! coefficient vectors span GF(q)^m, the exact expected overhead of a single
//! source, and the m-independent bounds on the star-network overhead.

/// Sums stop once a provable bound on the remaining tail drops below this.
pub const TAIL_TOLERANCE: f64 = 1e-14;

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Probability that `m + x` independent uniform vectors over GF(q) have rank `m`:
/// `prod_{i=1..m} (1 - q^(-x-i))`. Equals 1 when `m = 0`.
pub fn p_success(m: u64, x: u64, q: u32) -> f64 {
    let q = f64::from(q);
    let mut log_p = 0.0;
    let mut term = q.powf(-(x as f64) - 1.0);
    for _ in 0..m {
        if term < 1e-18 {
            // remaining factors are 1 to double precision
            break;
        }
        log_p += (-term).ln_1p();
        term /= q;
    }
    log_p.exp()
}

/// Probability that all `y` receivers of a star network decode after
/// `(y-1)m + x` correctly received blocks, receivers treated as independent.
pub fn p_success_star(m: u64, x: u64, q: u32, y: u32) -> f64 {
    if y <= 1 {
        return 1.0;
    }
    p_success(u64::from(y - 1) * m, x, q).powi(y as i32)
}

/// m-independent `(lower, upper)` bounds on [`p_success`]:
/// `1 - q^-x / (q-1) < P <= 1 - q^(-x-1)`.
pub fn p_success_bounds(x: u64, q: u32) -> (f64, f64) {
    let qf = f64::from(q);
    let qx = qf.powf(-(x as f64));
    (1.0 - qx / (qf - 1.0), 1.0 - qx / qf)
}

/// Exact expected overhead in blocks of one source with `m` blocks:
/// `sum_{i=1..m} 1 / (q^i - 1)`.
pub fn expected_overhead(m: u64, q: u32) -> f64 {
    let qf = f64::from(q);
    let mut sum = 0.0;
    let mut qi = 1.0;
    for _ in 0..m {
        qi *= qf;
        let t = 1.0 / (qi - 1.0);
        sum += t;
        if t < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Expected number of blocks beyond `unknowns` before every one of
/// `receivers` independent receivers reaches full rank:
/// `sum_{x>=0} (1 - P(unknowns, x, q)^receivers)`.
///
/// With `receivers = 1` this is [`expected_overhead`]; with
/// `unknowns = (Y-1)m, receivers = Y` it is the exact counterpart of the
/// star-network bounds.
pub fn star_overhead_exact(unknowns: u64, q: u32, receivers: u32) -> f64 {
    if unknowns == 0 || receivers == 0 {
        return 0.0;
    }
    let qf = f64::from(q);
    let mut sum = 0.0;
    for x in 0u64.. {
        let p = p_success(unknowns, x, q);
        sum += -(f64::from(receivers) * p.ln()).exp_m1();
        // 1 - P^Y <= Y q^-(x+1) / (q - 1) for every later x as well, so the
        // rest of the series is dominated by a geometric tail.
        let next = f64::from(receivers) * qf.powf(-(x as f64) - 1.0) / (qf - 1.0);
        if next / (1.0 - 1.0 / qf) < TAIL_TOLERANCE {
            break;
        }
    }
    sum
}

/// Upper bound X*(q, Y) on the expected star-network overhead, independent of m:
/// `sum_{j=1..Y} C(Y,j) (-1)^(j+1) (q^(2j) - (q-1)^j) / ((q-1)^j (q^j - 1)^2)`.
pub fn overhead_upper(q: u32, y: u32) -> f64 {
    let qf = f64::from(q);
    (1..=y)
        .map(|j| {
            let jf = f64::from(j);
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            let qj = qf.powf(jf);
            let q1j = (qf - 1.0).powf(jf);
            sign * binomial(y, j) * (qj * qj - q1j) / (q1j * (qj - 1.0).powi(2))
        })
        .sum()
}

/// Lower bound on the expected star-network overhead, independent of m:
/// `sum_{j=1..Y} C(Y,j) (-1)^(j+1) ((q^2 - q)^j - q^j) / ((q-1)^j (q^j - 1)^2)`.
pub fn overhead_lower(q: u32, y: u32) -> f64 {
    let qf = f64::from(q);
    (1..=y)
        .map(|j| {
            let jf = f64::from(j);
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            let qj = qf.powf(jf);
            let q1j = (qf - 1.0).powf(jf);
            sign * binomial(y, j) * ((qf * qf - qf).powf(jf) - qj) / (q1j * (qj - 1.0).powi(2))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::{GaloisField, GfMatrix};

    #[test]
    fn p_success_examples() {
        assert_eq!(p_success(1, 0, 2), 0.5);
        assert!((p_success(2, 0, 2) - 0.375).abs() < 1e-15);
        assert!(1.0 - p_success(8, 64, 2) < 2f64.powi(-60));
        assert_eq!(p_success(0, 0, 2), 1.0);
    }

    #[test]
    fn p_success_matches_exhaustive_enumeration() {
        let f = GaloisField::new(1).unwrap();
        for n in [2usize, 3] {
            let total = 1u32 << (n * n);
            let mut full = 0u32;
            for bits in 0..total {
                let rows: Vec<Vec<u16>> = (0..n)
                    .map(|r| (0..n).map(|c| (bits >> (r * n + c) & 1) as u16).collect())
                    .collect();
                if GfMatrix::from_rows(&rows).unwrap().rank(&f) == n {
                    full += 1;
                }
            }
            let expected = p_success(n as u64, 0, 2);
            assert_eq!(f64::from(full) / f64::from(total), expected);
        }
    }

    #[test]
    fn p_success_monotone() {
        for q in [2u32, 4, 16] {
            for m in 1..10 {
                let mut prev = 0.0;
                for x in 0..20 {
                    let p = p_success(m, x, q);
                    assert!(p > prev && p < 1.0 || p == 1.0 && x > 10);
                    prev = p;
                }
            }
        }
        for m in 1..10 {
            assert!(p_success(m, 1, 4) > p_success(m, 1, 2));
            assert!(p_success(m, 1, 16) > p_success(m, 1, 4));
        }
    }

    #[test]
    fn star_success() {
        assert_eq!(p_success_star(5, 0, 2, 1), 1.0);
        let p = p_success(3, 2, 4);
        assert!((p_success_star(3, 2, 4, 2) - p * p).abs() < 1e-15);
        let p = p_success(2, 1, 4);
        assert!((p_success_star(1, 1, 4, 3) - p.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn bounds_sandwich_success_probability() {
        assert_eq!(p_success_bounds(0, 2), (0.0, 0.5));
        let (_, upper) = p_success_bounds(0, 64);
        assert_eq!(p_success(1, 0, 64), upper);
        for q in [2u32, 4, 16, 64] {
            for m in 1..=64 {
                for x in 0..=32 {
                    let (lo, hi) = p_success_bounds(x, q);
                    let p = p_success(m, x, q);
                    assert!(lo < p || lo - p < 1e-15, "q={q} m={m} x={x}");
                    assert!(p <= hi, "q={q} m={m} x={x}");
                }
            }
        }
    }

    #[test]
    fn expected_overhead_examples() {
        assert_eq!(expected_overhead(1, 2), 1.0);
        assert!((expected_overhead(1, 64) - 1.0 / 63.0).abs() < 1e-16);
        // sum_{i>=1} 1/(2^i - 1) = 1.606695152415291763...
        assert!((expected_overhead(64, 2) - 1.606_695_152_415_291_8).abs() < 1e-12);
        for q in [2u32, 4, 16] {
            for m in 1..20 {
                assert!(expected_overhead(m + 1, q) >= expected_overhead(m, q));
                assert!(expected_overhead(m, q * 2) < expected_overhead(m, q));
            }
        }
    }

    #[test]
    fn expected_overhead_agrees_with_success_distribution() {
        for q in [2u32, 4, 16, 64] {
            for m in [1u64, 2, 5, 16, 40] {
                let mut mean = 0.0;
                let mut prev = p_success(m, 0, q);
                for i in 1..400u64 {
                    let cur = p_success(m, i, q);
                    mean += i as f64 * (cur - prev);
                    prev = cur;
                    if 1.0 - cur < 1e-17 {
                        break;
                    }
                }
                assert!((mean - expected_overhead(m, q)).abs() < 1e-12, "q={q} m={m}");
                assert!((star_overhead_exact(m, q, 1) - expected_overhead(m, q)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bound_examples() {
        assert!((overhead_upper(2, 1) - 3.0).abs() < 1e-15);
        assert!(overhead_lower(2, 1).abs() < 1e-15);
        let (u, l) = (overhead_upper(64, 1), overhead_lower(64, 1));
        assert!(u - l < 1e-3);
        for m in 1..=64 {
            let x = expected_overhead(m, 64);
            assert!(l < x && x < u, "m={m}");
        }
        assert!(overhead_upper(1 << 16, 6) < 1e-3);
        assert!(overhead_lower(1 << 16, 6) < 1e-3);
        for q in [2u32, 4, 16, 64, 256] {
            for y in 1..=8 {
                assert!(overhead_lower(q, y) < overhead_upper(q, y), "q={q} y={y}");
            }
        }
    }

    #[test]
    fn bounds_sandwich_exact_star_overhead() {
        for q in [2u32, 4, 16, 64] {
            for y in 2..=6u32 {
                for m in [1u64, 2, 4, 8] {
                    let x = star_overhead_exact(u64::from(y - 1) * m, q, y);
                    assert!(overhead_lower(q, y) < x, "q={q} y={y} m={m}");
                    assert!(x < overhead_upper(q, y), "q={q} y={y} m={m}");
                }
            }
        }
    }

    #[test]
    fn overhead_grows_with_sources() {
        for q in [2u32, 4, 16, 64] {
            for y in 1..8 {
                assert!(overhead_upper(q, y + 1) > overhead_upper(q, y));
            }
        }
    }
}
