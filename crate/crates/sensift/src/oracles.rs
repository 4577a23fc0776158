//! Naive reference implementations used to cross-check the production code.
//!
//! Everything here trades speed for obviousness: the warping-path oracle
//! enumerates every admissible path instead of running dynamic programming,
//! and the distance oracle is the textbook haversine written around `asin`
//! rather than `atan2`. Compiled only for tests (or behind the
//! `test-oracles` feature, so integration suites in other crates can reuse
//! them).

/// Textbook haversine great-circle distance in meters, `asin` form.
///
/// Kept deliberately separate from the production implementation so the two
/// can disagree if either is wrong.
pub fn haversine_reference(lat_a: f64, lon_a: f64, lat_b: f64, lon_b: f64) -> f64 {
    const EARTH_RADIUS_M: f64 = 6_378_137.0;
    let phi_a = lat_a.to_radians();
    let phi_b = lat_b.to_radians();
    let dphi = (lat_b - lat_a).to_radians();
    let dlambda = (lon_b - lon_a).to_radians();
    let a = (dphi / 2.0).sin().powi(2)
        + phi_a.cos() * phi_b.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Result of exhaustively enumerating monotone warping paths over a cost
/// grid: the minimal cumulative cost and the set of path lengths (cell
/// counts) that attain it.
#[derive(Debug, Clone)]
pub struct PathEnumeration {
    pub min_cost: f64,
    pub optimal_lengths: std::collections::BTreeSet<usize>,
    pub path_count: usize,
}

/// Enumerates every warping path from the top-left to the bottom-right cell
/// of `cost`, moving only diagonally, down, or right, accumulating cell
/// costs in path order (so sums round identically to a forward dynamic
/// program).
///
/// `cost` is row-major with `rows * cols` entries. Exponential in the grid
/// size; intended for grids up to roughly 8x8.
pub fn enumerate_warping_paths(cost: &[f64], rows: usize, cols: usize) -> PathEnumeration {
    assert_eq!(cost.len(), rows * cols, "cost grid shape mismatch");
    assert!(rows > 0 && cols > 0);

    let mut best = f64::INFINITY;
    let mut lengths = std::collections::BTreeSet::new();
    let mut count = 0usize;

    // Depth-first walk carrying the running sum; the first cell's cost is
    // part of every path.
    let mut stack: Vec<(usize, usize, f64, usize)> = vec![(0, 0, cost[0], 1)];
    while let Some((r, c, sum, len)) = stack.pop() {
        if r == rows - 1 && c == cols - 1 {
            count += 1;
            if sum < best {
                best = sum;
                lengths.clear();
                lengths.insert(len);
            } else if sum == best {
                lengths.insert(len);
            }
            continue;
        }
        let mut push = |nr: usize, nc: usize| {
            stack.push((nr, nc, sum + cost[nr * cols + nc], len + 1));
        };
        if r + 1 < rows && c + 1 < cols {
            push(r + 1, c + 1);
        }
        if r + 1 < rows {
            push(r + 1, c);
        }
        if c + 1 < cols {
            push(r, c + 1);
        }
    }

    PathEnumeration {
        min_cost: best,
        optimal_lengths: lengths,
        path_count: count,
    }
}

/// Number of monotone lattice paths (steps right, down, diagonal) between
/// opposite corners of an `n x n` grid; used to sanity-check the enumerator.
pub fn delannoy(n: usize) -> usize {
    let mut grid = vec![vec![0usize; n + 1]; n + 1];
    for (i, row) in grid.iter_mut().enumerate() {
        row[0] = 1;
        if i == 0 {
            row.fill(1);
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            grid[i][j] = grid[i - 1][j] + grid[i][j - 1] + grid[i - 1][j - 1];
        }
    }
    grid[n][n]
}
