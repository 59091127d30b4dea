use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub mean: f64,
    pub p90: f64,
    pub p99: f64,
    pub p100: f64,
}

/// Nearest-rank value for integer percent `p` over sorted samples.
fn nearest_rank<T: Copy>(sorted: &[T], p: usize) -> T {
    let n = sorted.len();
    let rank = (p * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Mean and nearest-rank P90/P99/P100. None for an empty slice.
pub fn percentiles(samples: &[f64]) -> Option<Percentiles> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Some(Percentiles {
        mean: s.iter().sum::<f64>() / s.len() as f64,
        p90: nearest_rank(&s, 90),
        p99: nearest_rank(&s, 99),
        p100: nearest_rank(&s, 100),
    })
}

/// Same over integer microseconds, reported in milliseconds.
pub(crate) fn percentiles_us(samples: &[u64]) -> Percentiles {
    if samples.is_empty() {
        return Percentiles { mean: 0.0, p90: 0.0, p99: 0.0, p100: 0.0 };
    }
    let mut s = samples.to_vec();
    s.sort_unstable();
    let ms = |us: u64| us as f64 / 1000.0;
    let sum: u128 = s.iter().map(|&x| x as u128).sum();
    Percentiles {
        mean: sum as f64 / s.len() as f64 / 1000.0,
        p90: ms(nearest_rank(&s, 90)),
        p99: ms(nearest_rank(&s, 99)),
        p100: ms(nearest_rank(&s, 100)),
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let p = percentiles(&v).unwrap();
        assert_eq!((p.p90, p.p99, p.p100), (90.0, 99.0, 100.0));
        assert_eq!(p.mean, 50.5);
    }

    #[test]
    fn single_sample() {
        let p = percentiles(&[7.5]).unwrap();
        assert_eq!((p.mean, p.p90, p.p99, p.p100), (7.5, 7.5, 7.5, 7.5));
        assert!(percentiles(&[]).is_none());
    }

    #[test]
    fn microseconds() {
        let p = percentiles_us(&[3000, 1000, 2000]);
        assert_eq!((p.mean, p.p90, p.p100), (2.0, 3.0, 3.0));
    }

    proptest! {
        #[test]
        fn ordered_and_members(v in proptest::collection::vec(0u32..1_000_000, 1..300)) {
            let f: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
            let p = percentiles(&f).unwrap();
            prop_assert!(p.p90 <= p.p99 && p.p99 <= p.p100);
            prop_assert!(f.contains(&p.p90) && f.contains(&p.p99));
            prop_assert_eq!(p.p100, f.iter().cloned().fold(f64::MIN, f64::max));
            // at least p% of samples at or below the p-th percentile
            let below = f.iter().filter(|&&x| x <= p.p90).count();
            prop_assert!(below * 100 >= 90 * f.len());
        }
    }
}
