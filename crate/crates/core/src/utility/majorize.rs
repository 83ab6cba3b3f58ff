use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of comparing two sequences under (weak) majorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorizationOrder {
    /// Every prefix sum of sorted `a` dominates that of sorted `b`.
    pub weak: bool,
    /// Weak and the totals are equal.
    pub strict_major: bool,
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Compares `a` against `b`. Prefix sums are compared with an absolute
/// slack of `1e-12` times the larger total magnitude.
pub fn majorization(a: &[f64], b: &[f64]) -> Result<MajorizationOrder> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    let (sa, sb) = (sorted_desc(a), sorted_desc(b));
    let scale = 1.0f64
        .max(a.iter().map(|v| v.abs()).sum())
        .max(b.iter().map(|v| v.abs()).sum());
    let tol = 1e-12 * scale;
    let (mut pa, mut pb) = (0.0, 0.0);
    let mut weak = true;
    for (x, y) in sa.iter().zip(&sb) {
        pa += x;
        pb += y;
        if pa < pb - tol {
            weak = false;
            break;
        }
    }
    let strict_major = weak && (pa - pb).abs() <= tol;
    Ok(MajorizationOrder { weak, strict_major })
}

pub fn weakly_majorizes(a: &[f64], b: &[f64]) -> Result<bool> {
    Ok(majorization(a, b)?.weak)
}

/// `a` majorizes `b`: weak majorization with equal totals.
pub fn majorizes(a: &[f64], b: &[f64]) -> Result<bool> {
    Ok(majorization(a, b)?.strict_major)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            majorization(&[3.0, 1.0], &[2.0, 2.0]).unwrap(),
            MajorizationOrder {
                weak: true,
                strict_major: true
            }
        );
        assert_eq!(
            majorization(&[2.0, 2.0], &[1.0, 1.0]).unwrap(),
            MajorizationOrder {
                weak: true,
                strict_major: false
            }
        );
        assert!(!weakly_majorizes(&[1.0, 1.0], &[3.0, 0.0]).unwrap());
        assert!(weakly_majorizes(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn triple(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        let v = || proptest::collection::vec(0.0..1.0f64, n);
        (v(), v(), v())
    }

    proptest! {
        #[test]
        fn reflexive_and_transitive((a, b, c) in (1usize..8).prop_flat_map(triple)) {
            prop_assert!(weakly_majorizes(&a, &a).unwrap());
            if weakly_majorizes(&a, &b).unwrap() && weakly_majorizes(&b, &c).unwrap() {
                prop_assert!(weakly_majorizes(&a, &c).unwrap());
            }
        }

        #[test]
        fn antisymmetric_up_to_order(
            (a, b) in (1usize..5).prop_flat_map(|n| {
                let v = proptest::collection::vec(0u8..4, n);
                (v.clone(), v)
            }),
            shift in 0usize..5,
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            if majorizes(&a, &b).unwrap() && majorizes(&b, &a).unwrap() {
                prop_assert_eq!(sorted_desc(&a), sorted_desc(&b));
            }
            let mut rotated = a.clone();
            rotated.rotate_left(shift % a.len());
            prop_assert!(majorizes(&a, &rotated).unwrap());
        }
    }
}
