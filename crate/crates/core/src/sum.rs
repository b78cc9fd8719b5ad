//! Fixed-order pairwise summation.
//!
//! Reductions over grid nodes go through [`pairwise`] so that results do not
//! depend on how work was split between threads.

const LEAF: usize = 16;

/// Sum `xs` by recursive halving with a fixed split point.
pub fn pairwise(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for x in xs {
            s += *x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

/// Weighted sum `Σ w_i x_i`, pairwise.
pub fn dot(w: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), x.len());
    let prod: Vec<f64> = w.iter().zip(x).map(|(a, b)| a * b).collect();
    pairwise(&prod)
}

/// Euclidean norm of a flat vector, pairwise.
pub fn norm(x: &[f64]) -> f64 {
    let sq: Vec<f64> = x.iter().map(|a| a * a).collect();
    pairwise(&sq).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise(&xs), 500500.0);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(pairwise(&[]), 0.0);
    }
}
