//! Dense linear assignment by shortest augmenting paths (Jonker–Volgenant
//! style, following Crouse's formulation), with dual potentials.
//!
//! Costs are supplied by a closure so the `n × n` matrix never has to be
//! materialised.

use alloc::vec;
use alloc::vec::Vec;

const NONE: usize = usize::MAX;

/// Optimal assignment plus potentials `u`, `v` with `u[i] + v[j] <= c(i, j)`
/// everywhere and equality on assigned pairs.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn solve<C: Fn(usize, usize) -> f64>(n: usize, cost: C) -> Assignment {
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col4row = vec![NONE; n];
    let mut row4col = vec![NONE; n];

    let mut path = vec![NONE; n];
    let mut shortest = vec![f64::INFINITY; n];
    let mut remaining = vec![0usize; n];
    let mut row_seen = vec![false; n];
    let mut col_seen = vec![false; n];

    for cur_row in 0..n {
        // Dijkstra over reduced costs from cur_row to the nearest free column
        let mut num_remaining = n;
        for (it, r) in remaining.iter_mut().enumerate() {
            *r = n - it - 1;
        }
        row_seen.fill(false);
        col_seen.fill(false);
        shortest.fill(f64::INFINITY);

        let mut min_val = 0.0;
        let mut i = cur_row;
        let mut sink = NONE;
        while sink == NONE {
            row_seen[i] = true;
            let mut index = NONE;
            let mut lowest = f64::INFINITY;
            for (it, &j) in remaining[..num_remaining].iter().enumerate() {
                let r = min_val + cost(i, j) - u[i] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == NONE) {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            let j = remaining[index];
            if row4col[j] == NONE {
                sink = j;
            } else {
                i = row4col[j];
            }
            col_seen[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
        }

        u[cur_row] += min_val;
        for r in 0..n {
            if row_seen[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..n {
            if col_seen[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            core::mem::swap(&mut col4row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }

    Assignment {
        row_to_col: col4row,
        u,
        v,
    }
}
