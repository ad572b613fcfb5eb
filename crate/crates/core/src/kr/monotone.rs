//! Exact truncated-cost transport on the line by monotone partial matching.
//!
//! With cost `min(2, |x - y|)`, an optimal matching between equal-size
//! samples is equivalent to choosing which pairs to move at cost `|x - y|`
//! and releasing the rest at cost 1 per point. Because `|x - y|` has the
//! Monge property, the moved pairs can be taken order-preserving, so the
//! problem is an edit distance between the two sorted samples with
//! substitution cost `min(2, |x - y|)` and insertion/deletion cost 1.
//!
//! A path through cell `(i, j)` needs at least `2|i - j|` unit steps, and
//! the sorted coupling gives an upper bound `U` on the total, so only the
//! band `|i - j| <= U / 2` is ever relevant.

use alloc::vec;

use super::truncated_cost;

/// Total (unnormalised) optimal cost for two ascending samples of equal
/// length.
pub(crate) fn optimal_total(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    debug_assert_eq!(n, y.len());
    let upper: f64 = x.iter().zip(y).map(|(&a, &b)| truncated_cost(a, b)).sum();
    if upper == 0.0 {
        return 0.0;
    }
    let w = ((0.5 * upper) as usize + 1).min(n);
    let width = 2 * w + 1;
    // row i stores dp[i][j] for j = i - w ..= i + w at offset j + w - i
    let mut prev = vec![f64::INFINITY; width];
    let mut cur = vec![f64::INFINITY; width];
    for (off, p) in prev.iter_mut().enumerate() {
        let j = off as isize - w as isize;
        if (0..=n as isize).contains(&j) {
            *p = j as f64;
        }
    }
    for i in 1..=n {
        cur.fill(f64::INFINITY);
        let lo = i.saturating_sub(w);
        let hi = (i + w).min(n);
        for j in lo..=hi {
            let off = j + w - i;
            let mut best = f64::INFINITY;
            // dp[i-1][j] sits at offset off + 1 in the previous row
            if off + 1 < width {
                best = best.min(prev[off + 1] + 1.0);
            }
            if j > 0 {
                if off > 0 {
                    best = best.min(cur[off - 1] + 1.0);
                }
                best = best.min(prev[off] + truncated_cost(x[i - 1], y[j - 1]));
            }
            cur[off] = best;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[w].min(upper)
}
