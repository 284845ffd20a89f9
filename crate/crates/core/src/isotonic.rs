//! Pool-adjacent-violators isotonic regression.

use crate::curve::PayoffCurve;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Least-squares non-decreasing fit of `ys` (unit weights).
pub fn pava(ys: &[f64]) -> Vec<f64> {
    // Each block: (sum, count). Adjacent blocks are merged while their means
    // violate the ordering.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(ys.len());
    for &y in ys {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 <= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = (s0 + s1, n0 + n1);
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (s, n) in blocks {
        out.extend(std::iter::repeat(s / n as f64).take(n));
    }
    out
}

/// Fits a monotone curve through `raw` in the requested direction.
///
/// The output keeps the input percentiles (sorted ascending).
pub fn monotone_fit(raw: &[(f64, f64)], direction: Direction) -> Result<PayoffCurve> {
    if raw.len() < 2 {
        return Err(Error::invalid("monotone fit needs at least two points"));
    }
    let mut pts = raw.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ys: Vec<f64> = match direction {
        Direction::Increasing => pts.iter().map(|p| p.1).collect(),
        Direction::Decreasing => pts.iter().map(|p| -p.1).collect(),
    };
    let mut fit = pava(&ys);
    if direction == Direction::Decreasing {
        fit.iter_mut().for_each(|v| *v = -*v);
    }
    PayoffCurve::new(pts.iter().map(|p| p.0).zip(fit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monotone_input_is_unchanged() {
        let raw = [(0.0, 0.1), (0.5, 0.2), (1.0, 0.2)];
        let c = monotone_fit(&raw, Direction::Increasing).unwrap();
        assert_eq!(c.knots(), &raw);
    }

    #[test]
    fn pools_violating_pair() {
        let raw = [(0.0, 0.3), (0.5, 0.1), (1.0, 0.2)];
        let c = monotone_fit(&raw, Direction::Decreasing).unwrap();
        let k = c.knots();
        assert_eq!(k[0], (0.0, 0.3));
        assert!((k[1].1 - 0.15).abs() < 1e-15);
        assert!((k[2].1 - 0.15).abs() < 1e-15);
        assert_eq!(k[1].0, 0.5);
    }

    #[test]
    fn cascading_merge() {
        assert_eq!(pava(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(
            pava(&[1.0, 3.0, 2.0, 0.0]),
            vec![1.0, 5.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0]
        );
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(monotone_fit(&[(0.0, 1.0)], Direction::Increasing).is_err());
        assert!(monotone_fit(&[(0.5, 1.0), (0.5, 2.0)], Direction::Increasing).is_err());
    }

    #[test]
    fn unsorted_input_is_sorted_first() {
        let c = monotone_fit(&[(1.0, 2.0), (0.0, 1.0)], Direction::Increasing).unwrap();
        assert_eq!(c.knots(), &[(0.0, 1.0), (1.0, 2.0)]);
    }

    fn sse(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
    }

    /// Exhaustive search over non-decreasing sequences drawn from a quantized
    /// level set. The PAV solution must do at least as well as every candidate.
    fn brute_best(ys: &[f64], levels: &[f64]) -> f64 {
        fn rec(ys: &[f64], levels: &[f64], start: usize, acc: f64, best: &mut f64) {
            if ys.is_empty() {
                *best = best.min(acc);
                return;
            }
            for li in start..levels.len() {
                let d = (ys[0] - levels[li]).powi(2);
                if acc + d < *best {
                    rec(&ys[1..], levels, li, acc + d, best);
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(ys, levels, 0, 0.0, &mut best);
        best
    }

    proptest! {
        #[test]
        fn beats_quantized_brute_force(ys in prop::collection::vec(0u8..9, 2..7)) {
            let ys: Vec<f64> = ys.into_iter().map(|v| v as f64 / 8.0).collect();
            let fit = pava(&ys);
            prop_assert!(fit.windows(2).all(|w| w[0] <= w[1] + 1e-15));
            let levels: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
            prop_assert!(sse(&fit, &ys) <= brute_best(&ys, &levels) + 1e-12);
        }

        #[test]
        fn idempotent(vals in prop::collection::vec(-1.0f64..1.0, 2..30), dec in any::<bool>()) {
            let dir = if dec { Direction::Decreasing } else { Direction::Increasing };
            let raw: Vec<(f64, f64)> = vals.iter().enumerate()
                .map(|(i, &v)| (i as f64 / (vals.len() - 1) as f64, v)).collect();
            let once = monotone_fit(&raw, dir).unwrap();
            let twice = monotone_fit(once.knots(), dir).unwrap();
            prop_assert_eq!(&once, &twice);
            match dir {
                Direction::Increasing => prop_assert!(once.is_non_decreasing()),
                Direction::Decreasing => prop_assert!(once.is_non_increasing()),
            }
        }

        #[test]
        fn preserves_mean(vals in prop::collection::vec(-1.0f64..1.0, 1..30)) {
            let fit = pava(&vals);
            let a: f64 = vals.iter().sum();
            let b: f64 = fit.iter().sum();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
