use super::{InferredTrack, ObservedTrack, TrackSample};

/// Pairs sharing fewer timestamps than this are forbidden.
pub const MIN_OVERLAP: usize = 3;

/// Dense row-major cost matrix. `+∞` marks a forbidden pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "cost matrix must be rectangular"
        );
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_allowed(&self, r: usize, c: usize) -> bool {
        self.get(r, c).is_finite()
    }

    pub fn transposed(&self) -> CostMatrix {
        let mut t = CostMatrix::filled(self.cols, self.rows, 0.0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }
}

/// Mean planar distance over shared timestamps, or `None` below
/// [`MIN_OVERLAP`].
pub fn mean_aligned_distance(a: &[TrackSample], b: &[TrackSample]) -> Option<f64> {
    let (mut i, mut j) = (0, 0);
    let (mut sum, mut n) = (0.0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].t.cmp(&b[j].t) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].distance(&b[j]);
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (n >= MIN_OVERLAP).then(|| sum / n as f64)
}

/// Rows are inferred tracks, columns observed vehicles.
pub fn build_cost_matrix(inferred: &[InferredTrack], observed: &[ObservedTrack]) -> CostMatrix {
    let mut m = CostMatrix::filled(inferred.len(), observed.len(), f64::INFINITY);
    for (r, track) in inferred.iter().enumerate() {
        for (c, obs) in observed.iter().enumerate() {
            if let Some(d) = mean_aligned_distance(&track.samples, &obs.samples) {
                m.set(r, c, d);
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obfuscation::Micros;
    use crate::scene::VehicleId;
    use std::collections::BTreeSet;

    fn samples(ts: impl IntoIterator<Item = u64>, dy: f64) -> Vec<TrackSample> {
        ts.into_iter()
            .map(|t| TrackSample {
                t: Micros(t),
                x: t as f64 * 0.5,
                y: dy,
            })
            .collect()
    }

    fn inferred(s: Vec<TrackSample>) -> InferredTrack {
        InferredTrack {
            track_id: 0,
            samples: s,
            source_pseudonyms: BTreeSet::new(),
        }
    }

    fn observed(s: Vec<TrackSample>) -> ObservedTrack {
        ObservedTrack {
            vehicle_id: VehicleId(0),
            samples: s,
        }
    }

    #[test]
    fn identical_tracks_cost_zero() {
        let m = build_cost_matrix(
            &[inferred(samples(0..10, 0.0))],
            &[observed(samples(0..10, 0.0))],
        );
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn constant_offset_costs_offset() {
        let m = build_cost_matrix(
            &[inferred(samples(0..10, 5.0))],
            &[observed(samples(0..10, 0.0))],
        );
        assert!((m.get(0, 0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn no_overlap_forbidden() {
        let m = build_cost_matrix(
            &[inferred(samples(0..10, 0.0))],
            &[observed(samples(20..30, 0.0))],
        );
        assert_eq!(m.get(0, 0), f64::INFINITY);
        // exactly two shared timestamps is still too few
        let m = build_cost_matrix(
            &[inferred(samples(0..10, 0.0))],
            &[observed(samples(8..20, 0.0))],
        );
        assert!(!m.is_allowed(0, 0));
        let m = build_cost_matrix(
            &[inferred(samples(0..10, 0.0))],
            &[observed(samples(7..20, 0.0))],
        );
        assert!(m.is_allowed(0, 0));
    }

    #[test]
    fn partial_overlap_uses_shared_samples_only() {
        let mut a = samples(0..10, 0.0);
        for s in a.iter_mut().take(5) {
            s.y = 100.0;
        }
        let m = build_cost_matrix(&[inferred(a)], &[observed(samples(5..10, 0.0))]);
        assert_eq!(m.get(0, 0), 0.0);
    }
}
