//! Deterministic reductions.
//!
//! All reductions over data samples go through fixed-shape pairwise trees,
//! so a result depends only on the input values and their order, never on
//! how work was distributed across threads.

/// Leaf size below which the tree falls back to a sequential sum.
pub(crate) const PAIRWISE_LEAF: usize = 64;

/// Pairwise (cascade) summation with a fixed tree shape.
///
/// Splits at the midpoint until slices reach [`PAIRWISE_LEAF`], giving
/// O(log n) rounding-error growth instead of O(n) for naive accumulation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        values.iter().sum()
    } else {
        let (lo, hi) = values.split_at(values.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

/// Mean via pairwise summation; 0 for an empty slice.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        pairwise_sum(values) / values.len() as f64
    }
}
