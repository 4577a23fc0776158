//! Angle-based dynamic time warping between two equal-length observation
//! windows.
//!
//! Each window is first turned into a sequence of trend vectors: one vector
//! per adjacent slot pair, with the time component measured in grid steps and
//! the value component divided by a per-property scale. The cost of aligning
//! two vectors is the angle between them, which ignores constant vertical
//! offsets between streams (two sensors reading 14 C and 19 C but moving in
//! lockstep are perfectly similar). A dynamic program finds the cheapest
//! monotone warping path through the angle grid, and the similarity is the
//! cosine of the mean angle along that path, floored at zero once the mean
//! exceeds a right angle.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DtwError {
    #[error("window has a missing value at slot offset {0}")]
    MissingSlot(usize),
    #[error("window needs at least 2 filled slots, got {0}")]
    WindowTooShort(usize),
    #[error("value scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("trend vector sequence is empty")]
    EmptySequence,
    #[error("trend sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// A single step-to-step trend: time delta in grid steps, scaled value delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendVector {
    pub dt: f64,
    pub dv: f64,
}

/// The trend vectors of one window; length `u - 1` for a `u`-slot window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendVectorSequence(Vec<TrendVector>);

impl TrendVectorSequence {
    pub fn vectors(&self) -> &[TrendVector] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Outcome of aligning two trend sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpResult {
    /// Sum of angles along the optimal warping path, in radians.
    pub cumulative_distance: f64,
    /// Number of grid cells on the recovered optimal path.
    pub path_length: usize,
    /// `cos(cumulative_distance / path_length)`, floored at 0 past a right
    /// angle; always within `[0, 1]`.
    pub similarity: f64,
}

/// Converts a complete window slice into trend vectors.
///
/// Adjacent slots are one grid step apart, so every vector has `dt = 1`.
/// The value delta is divided by `value_scale` so that properties with
/// different dynamic ranges produce comparable angles.
pub fn to_trend_vectors(
    window: &[Option<f64>],
    value_scale: f64,
) -> Result<TrendVectorSequence, DtwError> {
    if !(value_scale > 0.0 && value_scale.is_finite()) {
        return Err(DtwError::InvalidScale(value_scale));
    }
    if window.len() < 2 {
        return Err(DtwError::WindowTooShort(window.len()));
    }
    let mut values = Vec::with_capacity(window.len());
    for (k, slot) in window.iter().enumerate() {
        values.push(slot.ok_or(DtwError::MissingSlot(k))?);
    }
    let vectors = values
        .windows(2)
        .map(|pair| TrendVector {
            dt: 1.0,
            dv: (pair[1] - pair[0]) / value_scale,
        })
        .collect();
    Ok(TrendVectorSequence(vectors))
}

/// Angle between two trend vectors, in `[0, pi]`.
///
/// The normalized dot product is clamped to `[-1, 1]` to absorb rounding;
/// componentwise-equal vectors short-circuit to exactly zero.
pub fn vector_angle(a: TrendVector, b: TrendVector) -> f64 {
    if a == b {
        return 0.0;
    }
    let dot = a.dt * b.dt + a.dv * b.dv;
    let norm = (a.dt * a.dt + a.dv * a.dv).sqrt() * (b.dt * b.dt + b.dv * b.dv).sqrt();
    (dot / norm).clamp(-1.0, 1.0).acos()
}

/// Aligns two equal-length trend sequences with dynamic programming.
///
/// The warping path is anchored at both corners of the angle grid, moves
/// only diagonally, down, or right (monotone and continuous), and minimizes
/// the summed angle. The path length comes from backtracking one optimal
/// path with a fixed tie-break: diagonal first, then the cell above, then
/// the cell to the left.
pub fn dtw_align(
    va: &TrendVectorSequence,
    vb: &TrendVectorSequence,
) -> Result<WarpResult, DtwError> {
    if va.is_empty() || vb.is_empty() {
        return Err(DtwError::EmptySequence);
    }
    if va.len() != vb.len() {
        return Err(DtwError::LengthMismatch(va.len(), vb.len()));
    }
    let n = va.len();
    let m = vb.len();
    let a = va.vectors();
    let b = vb.vectors();

    // cost[r][c] = angle between a[r] and b[c]; cum[r][c] = cheapest path sum
    // ending at (r, c). Flat row-major buffers.
    let mut cum = vec![0.0f64; n * m];
    for r in 0..n {
        for c in 0..m {
            let theta = vector_angle(a[r], b[c]);
            let best_prev = match (r, c) {
                (0, 0) => 0.0,
                (0, _) => cum[c - 1],
                (_, 0) => cum[(r - 1) * m],
                _ => {
                    let diag = cum[(r - 1) * m + (c - 1)];
                    let above = cum[(r - 1) * m + c];
                    let left = cum[r * m + (c - 1)];
                    diag.min(above).min(left)
                }
            };
            cum[r * m + c] = best_prev + theta;
        }
    }

    // Backtrack one optimal path to count its cells.
    let mut path_length = 1usize;
    let (mut r, mut c) = (n - 1, m - 1);
    while r > 0 || c > 0 {
        let (pr, pc) = if r == 0 {
            (0, c - 1)
        } else if c == 0 {
            (r - 1, 0)
        } else {
            let diag = cum[(r - 1) * m + (c - 1)];
            let above = cum[(r - 1) * m + c];
            let left = cum[r * m + (c - 1)];
            let best = diag.min(above).min(left);
            if diag == best {
                (r - 1, c - 1)
            } else if above == best {
                (r - 1, c)
            } else {
                (r, c - 1)
            }
        };
        r = pr;
        c = pc;
        path_length += 1;
    }

    let cumulative_distance = cum[n * m - 1];
    Ok(WarpResult {
        cumulative_distance,
        path_length,
        similarity: similarity_from(cumulative_distance, path_length),
    })
}

/// Maps a cumulative path distance and path length to a `[0, 1]` similarity.
pub fn similarity_from(cumulative_distance: f64, path_length: usize) -> f64 {
    let mean = cumulative_distance / path_length as f64;
    if mean > std::f64::consts::FRAC_PI_2 {
        0.0
    } else {
        mean.cos()
    }
}

/// Trend similarity between two complete, co-timed window slices.
pub fn trend_similarity(
    window_a: &[Option<f64>],
    window_b: &[Option<f64>],
    value_scale: f64,
) -> Result<f64, DtwError> {
    if window_a.len() != window_b.len() {
        return Err(DtwError::LengthMismatch(window_a.len(), window_b.len()));
    }
    let va = to_trend_vectors(window_a, value_scale)?;
    let vb = to_trend_vectors(window_b, value_scale)?;
    Ok(dtw_align(&va, &vb)?.similarity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::enumerate_warping_paths;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn window(values: &[f64]) -> Vec<Option<f64>> {
        values.iter().map(|&v| Some(v)).collect()
    }

    /// Runs the exhaustive path oracle on the same angle grid the aligner
    /// sees and returns (min cost, optimal path lengths).
    fn oracle(
        va: &TrendVectorSequence,
        vb: &TrendVectorSequence,
    ) -> crate::oracles::PathEnumeration {
        let n = va.len();
        let m = vb.len();
        let mut cost = vec![0.0; n * m];
        for (r, x) in va.vectors().iter().enumerate() {
            for (c, y) in vb.vectors().iter().enumerate() {
                cost[r * m + c] = vector_angle(*x, *y);
            }
        }
        enumerate_warping_paths(&cost, n, m)
    }

    #[test]
    fn trend_vectors_constant_window() {
        let v = to_trend_vectors(&window(&[3.0; 5]), 1.0).unwrap();
        assert_eq!(v.len(), 4);
        for tv in v.vectors() {
            assert_eq!(*tv, TrendVector { dt: 1.0, dv: 0.0 });
        }
    }

    #[test]
    fn trend_vectors_unit_slope() {
        let v = to_trend_vectors(&window(&[0.0, 1.0, 2.0, 3.0]), 1.0).unwrap();
        assert_eq!(v.len(), 3);
        for tv in v.vectors() {
            assert_eq!(*tv, TrendVector { dt: 1.0, dv: 1.0 });
        }
    }

    #[test]
    fn trend_vectors_apply_value_scale() {
        let v = to_trend_vectors(&window(&[0.0, 2.0, 4.0]), 2.0).unwrap();
        assert_eq!(v.vectors(), &[
            TrendVector { dt: 1.0, dv: 1.0 },
            TrendVector { dt: 1.0, dv: 1.0 },
        ]);
    }

    #[test]
    fn trend_vectors_reject_bad_windows() {
        assert!(matches!(
            to_trend_vectors(&[Some(1.0)], 1.0),
            Err(DtwError::WindowTooShort(1))
        ));
        assert!(matches!(
            to_trend_vectors(&[Some(1.0), None, Some(2.0)], 1.0),
            Err(DtwError::MissingSlot(1))
        ));
        assert!(matches!(
            to_trend_vectors(&window(&[1.0, 2.0]), 0.0),
            Err(DtwError::InvalidScale(_))
        ));
    }

    #[test]
    fn angle_of_identical_vectors_is_zero() {
        let a = TrendVector { dt: 1.0, dv: 1.0 };
        assert_eq!(vector_angle(a, a), 0.0);
    }

    #[test]
    fn angle_of_orthogonal_vectors_is_right() {
        let a = TrendVector { dt: 1.0, dv: 1.0 };
        let b = TrendVector { dt: 1.0, dv: -1.0 };
        assert!((vector_angle(a, b) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn angle_ignores_vector_magnitude() {
        // Parallel vectors: the angle is zero up to arccos conditioning
        // near 1, about 1e-8 radians, which is 1e-16 territory after the
        // closing cosine.
        let a = TrendVector { dt: 1.0, dv: 2.0 };
        let b = TrendVector { dt: 2.0, dv: 4.0 };
        let theta = vector_angle(a, b);
        assert!(theta < 1e-7, "angle {theta}");
        assert!(theta.cos() >= 1.0 - 1e-12);
    }

    #[test]
    fn align_identical_sequences_is_perfect() {
        let v = to_trend_vectors(&window(&[1.0, 4.0, 2.0, 8.0, 5.0]), 1.0).unwrap();
        let r = dtw_align(&v, &v).unwrap();
        assert_eq!(r.cumulative_distance, 0.0);
        assert_eq!(r.path_length, 4); // diagonal: u - 1 cells
        assert_eq!(r.similarity, 1.0);
    }

    #[test]
    fn align_constant_offset_is_perfect() {
        let a = window(&[10.0, 12.5, 11.0, 14.0]);
        let b: Vec<_> = a.iter().map(|v| v.map(|x| x + 7.25)).collect();
        let sim = trend_similarity(&a, &b, 1.0).unwrap();
        assert!(sim >= 1.0 - 1e-12);
    }

    #[test]
    fn align_matches_exhaustive_enumeration_on_small_case() {
        let va = to_trend_vectors(&window(&[0.0, 2.0, -1.0, 0.5]), 1.0).unwrap();
        let vb = to_trend_vectors(&window(&[1.0, 0.0, 3.0, 2.0]), 1.0).unwrap();
        let got = dtw_align(&va, &vb).unwrap();
        let want = oracle(&va, &vb);
        assert_eq!(got.cumulative_distance, want.min_cost);
        assert!(want.optimal_lengths.contains(&got.path_length));
        let eq4 = similarity_from(got.cumulative_distance, got.path_length);
        assert!((got.similarity - eq4).abs() <= 1e-12);
    }

    #[test]
    fn anti_trending_pair_has_zero_similarity() {
        // One rising, one falling at unit slope: every pairwise angle is
        // exactly pi/2, so the mean along any path is pi/2.
        let rising = window(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let falling = window(&[4.0, 3.0, 2.0, 1.0, 0.0]);
        let sim = trend_similarity(&rising, &falling, 1.0).unwrap();
        assert!(sim.abs() < 1e-12);

        let va = to_trend_vectors(&rising, 1.0).unwrap();
        let vb = to_trend_vectors(&falling, 1.0).unwrap();
        let r = dtw_align(&va, &vb).unwrap();
        let want = oracle(&va, &vb);
        assert_eq!(r.cumulative_distance, want.min_cost);
        assert!((r.cumulative_distance / r.path_length as f64 - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn align_rejects_degenerate_inputs() {
        let v = to_trend_vectors(&window(&[0.0, 1.0, 2.0]), 1.0).unwrap();
        let longer = to_trend_vectors(&window(&[0.0, 1.0, 2.0, 3.0]), 1.0).unwrap();
        assert!(matches!(
            dtw_align(&v, &longer),
            Err(DtwError::LengthMismatch(2, 3))
        ));
        let empty = TrendVectorSequence(vec![]);
        assert!(matches!(
            dtw_align(&empty, &empty),
            Err(DtwError::EmptySequence)
        ));
    }

    fn window_strategy(len: usize) -> impl Strategy<Value = Vec<Option<f64>>> {
        proptest::collection::vec(-10.0f64..10.0, len).prop_map(|v| window(&v))
    }

    proptest! {
        // The dynamic program must agree exactly with exhaustive path
        // enumeration, and the reported path length must belong to an
        // optimal path.
        #[test]
        fn dp_equals_path_enumeration(
            u in 3usize..=6,
            seed_a in proptest::collection::vec(-10.0f64..10.0, 6),
            seed_b in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            let a = window(&seed_a[..u]);
            let b = window(&seed_b[..u]);
            let va = to_trend_vectors(&a, 1.0).unwrap();
            let vb = to_trend_vectors(&b, 1.0).unwrap();
            let got = dtw_align(&va, &vb).unwrap();
            let want = oracle(&va, &vb);
            prop_assert_eq!(got.cumulative_distance, want.min_cost);
            prop_assert!(want.optimal_lengths.contains(&got.path_length));
            prop_assert!(got.path_length >= u - 1 && got.path_length <= 2 * u - 3);
        }

        // Angle symmetry transposes the grid, so similarity is symmetric.
        #[test]
        fn similarity_is_symmetric(
            a in window_strategy(8),
            b in window_strategy(8),
        ) {
            let ab = trend_similarity(&a, &b, 1.0).unwrap();
            let ba = trend_similarity(&b, &a, 1.0).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12, "ab={ab}, ba={ba}");
        }

        // Similarity stays within [0, 1] and hits 1 only when a zero-angle
        // path exists.
        #[test]
        fn similarity_is_bounded(
            a in window_strategy(7),
            b in window_strategy(7),
        ) {
            let va = to_trend_vectors(&a, 1.0).unwrap();
            let vb = to_trend_vectors(&b, 1.0).unwrap();
            let r = dtw_align(&va, &vb).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.similarity));
            if r.similarity == 1.0 {
                prop_assert!(r.cumulative_distance / r.path_length as f64 <= 1e-7);
            }
        }

        // Adding a constant to one window leaves similarity unchanged.
        #[test]
        fn similarity_shift_invariant(
            a in window_strategy(8),
            b in window_strategy(8),
            c in -100.0f64..100.0,
        ) {
            let shifted: Vec<_> = b.iter().map(|v| v.map(|x| x + c)).collect();
            let plain = trend_similarity(&a, &b, 1.0).unwrap();
            let moved = trend_similarity(&a, &shifted, 1.0).unwrap();
            prop_assert!((plain - moved).abs() <= 1e-9, "plain={plain}, moved={moved}");
            let self_sim = trend_similarity(&b, &shifted, 1.0).unwrap();
            prop_assert!(self_sim >= 1.0 - 1e-12);
        }

        // Scaling all values and the value scale together changes nothing.
        #[test]
        fn similarity_scale_invariant(
            a in window_strategy(8),
            b in window_strategy(8),
            m in 0.01f64..100.0,
        ) {
            let am: Vec<_> = a.iter().map(|v| v.map(|x| x * m)).collect();
            let bm: Vec<_> = b.iter().map(|v| v.map(|x| x * m)).collect();
            let plain = trend_similarity(&a, &b, 1.0).unwrap();
            let scaled = trend_similarity(&am, &bm, m).unwrap();
            prop_assert!((plain - scaled).abs() <= 1e-9, "plain={plain}, scaled={scaled}");
        }
    }
}
