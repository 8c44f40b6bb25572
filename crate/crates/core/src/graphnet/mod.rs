//! Time-varying weighted digraphs over piecewise-constant schedules.
//!
//! A [`SwitchingGraph`] holds an ordered schedule of adjacency matrices,
//! optionally repeating with a period. Edge weights are either zero or lie
//! in `[eta, gamma]`; the weight `a[(k, j)] > 0` means agent `k` receives
//! the state of agent `j`, so information flows `j -> k`.

mod connectivity;

pub use connectivity::{connected_at, uniformly_connected, ConnectivityReport};

use crate::matcore::{require_finite, DenseMatrix};
use crate::Real;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("schedule must contain at least one segment")]
    EmptySchedule,
    #[error("segment {segment}: adjacency is {rows}x{cols}, expected {n}x{n}")]
    BadDimensions { segment: usize, rows: usize, cols: usize, n: usize },
    #[error("segment {segment}: nonzero self-weight at node {node}")]
    SelfCycle { segment: usize, node: usize },
    #[error(
        "segment {segment}: weight {weight} at ({row},{col}) outside {{0}} u [{eta}, {gamma}]"
    )]
    WeightOutOfBand { segment: usize, row: usize, col: usize, weight: f64, eta: f64, gamma: f64 },
    #[error("weight bounds must satisfy 0 < eta <= gamma, got eta={eta}, gamma={gamma}")]
    BadWeightBounds { eta: f64, gamma: f64 },
    #[error("segment start times must be strictly increasing (segment {segment})")]
    NonIncreasingStarts { segment: usize },
    #[error("period {period} does not cover the schedule span {span}")]
    PeriodTooShort { period: f64, span: f64 },
    #[error("time {t} precedes the first segment start {start}")]
    BeforeSchedule { t: f64, start: f64 },
    #[error("horizon must be positive, got {horizon}")]
    NonPositiveHorizon { horizon: f64 },
    #[error("non-finite adjacency entry in segment {segment}")]
    NonFinite { segment: usize },
}

/// One piece of the schedule: the adjacency holds from `start` until the
/// next segment starts (or forever, for the last segment of an aperiodic
/// schedule).
#[derive(Debug, Clone)]
pub struct GraphSegment<T: Real> {
    pub start: T,
    pub adjacency: DenseMatrix<T>,
}

/// Piecewise-constant schedule of weighted adjacency matrices.
#[derive(Debug, Clone)]
pub struct SwitchingGraph<T: Real> {
    node_count: usize,
    segments: Vec<GraphSegment<T>>,
    period: Option<T>,
    eta: T,
    gamma: T,
}

impl<T: Real> SwitchingGraph<T> {
    /// Validates and builds a schedule.
    ///
    /// Every weight must be zero or in `[eta, gamma]`, diagonals must be
    /// zero, and starts strictly increasing. A periodic schedule repeats
    /// with `period` measured from the first start.
    pub fn new(
        segments: Vec<GraphSegment<T>>,
        period: Option<T>,
        eta: T,
        gamma: T,
    ) -> Result<Self, GraphError> {
        if segments.is_empty() {
            return Err(GraphError::EmptySchedule);
        }
        if !(eta > T::zero() && eta <= gamma) {
            return Err(GraphError::BadWeightBounds {
                eta: eta.to_f64().unwrap_or(f64::NAN),
                gamma: gamma.to_f64().unwrap_or(f64::NAN),
            });
        }
        let n = segments[0].adjacency.nrows();
        for (s, seg) in segments.iter().enumerate() {
            let a = &seg.adjacency;
            if a.nrows() != n || a.ncols() != n {
                return Err(GraphError::BadDimensions {
                    segment: s,
                    rows: a.nrows(),
                    cols: a.ncols(),
                    n,
                });
            }
            if require_finite(a).is_err() {
                return Err(GraphError::NonFinite { segment: s });
            }
            for k in 0..n {
                if a[(k, k)] != T::zero() {
                    return Err(GraphError::SelfCycle { segment: s, node: k });
                }
                for j in 0..n {
                    let w = a[(k, j)];
                    if w != T::zero() && !(w >= eta && w <= gamma) {
                        return Err(GraphError::WeightOutOfBand {
                            segment: s,
                            row: k,
                            col: j,
                            weight: w.to_f64().unwrap_or(f64::NAN),
                            eta: eta.to_f64().unwrap_or(f64::NAN),
                            gamma: gamma.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                }
            }
            if s > 0 && segments[s - 1].start >= seg.start {
                return Err(GraphError::NonIncreasingStarts { segment: s });
            }
        }
        if let Some(p) = period {
            let span = segments.last().unwrap().start - segments[0].start;
            if p <= span {
                return Err(GraphError::PeriodTooShort {
                    period: p.to_f64().unwrap_or(f64::NAN),
                    span: span.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { node_count: n, segments, period, eta, gamma })
    }

    /// A time-invariant graph: one segment starting at zero.
    pub fn time_invariant(adjacency: DenseMatrix<T>, eta: T, gamma: T) -> Result<Self, GraphError> {
        Self::new(
            vec![GraphSegment { start: T::zero(), adjacency }],
            None,
            eta,
            gamma,
        )
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn segments(&self) -> &[GraphSegment<T>] {
        &self.segments
    }

    pub fn period(&self) -> Option<T> {
        self.period
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    fn start_time(&self) -> T {
        self.segments[0].start
    }

    /// Index of the segment active at `t`. Periodic schedules fold `t` into
    /// the base period first.
    pub fn segment_index_at(&self, t: T) -> Result<usize, GraphError> {
        let t0 = self.start_time();
        let local = match self.period {
            Some(p) => {
                let wraps = ((t - t0) / p).floor();
                t - p * wraps
            }
            None => t,
        };
        if local < t0 {
            return Err(GraphError::BeforeSchedule {
                t: t.to_f64().unwrap_or(f64::NAN),
                start: t0.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut index = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start <= local {
                index = i;
            } else {
                break;
            }
        }
        Ok(index)
    }

    /// Adjacency matrix active at time `t`.
    pub fn adjacency_at(&self, t: T) -> Result<&DenseMatrix<T>, GraphError> {
        Ok(&self.segments[self.segment_index_at(t)?].adjacency)
    }

    /// Laplacian `L(t)`: diagonal holds the row sums of the adjacency,
    /// off-diagonal entries are the negated weights. Rows sum to zero.
    pub fn laplacian(&self, t: T) -> Result<DenseMatrix<T>, GraphError> {
        Ok(laplacian_of(self.adjacency_at(t)?))
    }

    /// In-degrees (row sums) and out-degrees (column sums) at time `t`.
    pub fn degrees(&self, t: T) -> Result<(Vec<T>, Vec<T>), GraphError> {
        let a = self.adjacency_at(t)?;
        let n = self.node_count;
        let in_deg = (0..n).map(|k| a.row(k).sum()).collect();
        let out_deg = (0..n).map(|k| a.column(k).sum()).collect();
        Ok((in_deg, out_deg))
    }

    /// True when in-degree equals out-degree at every node, to `tol`.
    pub fn is_balanced(&self, t: T, tol: T) -> Result<bool, GraphError> {
        let (ind, outd) = self.degrees(t)?;
        Ok(ind.iter().zip(&outd).all(|(&i, &o)| (i - o).abs() <= tol))
    }

    /// Splits `[t0, t1]` into spans on which the adjacency is constant.
    ///
    /// Returns `(span_start, span_end, segment_index)` triples covering the
    /// interval in order; periodic schedules are unrolled. This is the grid
    /// the simulation engine aligns its steps to.
    pub fn piecewise_spans(&self, t0: T, t1: T) -> Result<Vec<(T, T, usize)>, GraphError> {
        if t1 < t0 {
            return Err(GraphError::BeforeSchedule {
                t: t1.to_f64().unwrap_or(f64::NAN),
                start: t0.to_f64().unwrap_or(f64::NAN),
            });
        }
        self.segment_index_at(t0)?;
        let mut spans = Vec::new();
        let mut t = t0;
        // Guard against degenerate zero-length spans from float folding.
        let tiny = (t1 - t0 + T::one()) * T::scalar(1e-12);
        while t < t1 {
            let idx = self.segment_index_at(t)?;
            let next = self.next_switch_after(t);
            let end = match next {
                Some(s) if s < t1 => s,
                _ => t1,
            };
            if end - t > tiny {
                spans.push((t, end, idx));
                t = end;
            } else {
                t = end + tiny;
            }
        }
        if spans.is_empty() {
            // Zero-length window: report the active segment.
            spans.push((t0, t1, self.segment_index_at(t0)?));
        }
        Ok(spans)
    }

    /// First switching instant strictly after `t`, if any.
    fn next_switch_after(&self, t: T) -> Option<T> {
        let t0 = self.start_time();
        match self.period {
            None => self
                .segments
                .iter()
                .map(|s| s.start)
                .find(|&s| s > t),
            Some(p) => {
                let wraps = ((t - t0) / p).floor();
                let base = p * wraps;
                let local = t - base;
                for seg in &self.segments {
                    if seg.start > local {
                        return Some(seg.start + base);
                    }
                }
                // Wrap to the first segment of the next period.
                Some(self.segments[0].start + base + p)
            }
        }
    }

    /// Integral of the adjacency over `[t0, t1]`.
    pub fn integrated_adjacency(&self, t0: T, t1: T) -> Result<DenseMatrix<T>, GraphError> {
        let n = self.node_count;
        let mut acc = DMatrix::<T>::zeros(n, n);
        for (a, b, idx) in self.piecewise_spans(t0, t1)? {
            acc += &self.segments[idx].adjacency * (b - a);
        }
        Ok(acc)
    }
}

/// Laplacian of a single adjacency matrix.
pub fn laplacian_of<T: Real>(adjacency: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = adjacency.nrows();
    let mut l = -adjacency.clone();
    for k in 0..n {
        l[(k, k)] = adjacency.row(k).sum();
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::matrix_from_rows;
    use approx::assert_relative_eq;

    fn unit_graph(adj: Vec<Vec<f64>>) -> SwitchingGraph<f64> {
        SwitchingGraph::time_invariant(matrix_from_rows(&adj).unwrap(), 1.0, 1.0).unwrap()
    }

    /// One directed edge per quarter period: information flows
    /// 0 -> 1, then 1 -> 2, 2 -> 3, 3 -> 0.
    pub(crate) fn rotating_edge(period: f64) -> SwitchingGraph<f64> {
        let quarter = period / 4.0;
        let segments = (0..4)
            .map(|i| {
                let mut a = DMatrix::<f64>::zeros(4, 4);
                a[((i + 1) % 4, i)] = 1.0;
                GraphSegment { start: i as f64 * quarter, adjacency: a }
            })
            .collect();
        SwitchingGraph::new(segments, Some(period), 1.0, 1.0).unwrap()
    }

    #[test]
    fn laplacian_of_complete_two_graph() {
        let g = unit_graph(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let l = g.laplacian(0.0).unwrap();
        let expected = matrix_from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert_eq!(l, expected);
    }

    #[test]
    fn laplacian_of_single_directed_edge() {
        let g = unit_graph(vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        let l = g.laplacian(0.0).unwrap();
        let expected = matrix_from_rows(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(l, expected);
    }

    #[test]
    fn laplacian_of_directed_ring_is_circulant() {
        let g = unit_graph(vec![
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ]);
        let l = g.laplacian(0.0).unwrap();
        for k in 0..4 {
            assert_eq!(l[(k, k)], 1.0);
            assert_eq!(l[(k, (k + 3) % 4)], -1.0);
            assert_relative_eq!(l.row(k).sum(), 0.0);
        }
    }

    #[test]
    fn degrees_of_ring_and_star() {
        let ring = unit_graph(vec![
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ]);
        let (ind, outd) = ring.degrees(0.0).unwrap();
        assert!(ind.iter().all(|&d| d == 1.0));
        assert!(outd.iter().all(|&d| d == 1.0));

        // Star into node 0: node 0 receives from everyone.
        let star = unit_graph(vec![
            vec![0.0, 1.0, 1.0, 1.0],
            vec![0.0; 4],
            vec![0.0; 4],
            vec![0.0; 4],
        ]);
        let (ind, outd) = star.degrees(0.0).unwrap();
        assert_eq!(ind, vec![3.0, 0.0, 0.0, 0.0]);
        assert_eq!(outd, vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn weighted_single_edge_degree() {
        let g = SwitchingGraph::time_invariant(
            matrix_from_rows(&[vec![0.0, 0.5], vec![0.0, 0.0]]).unwrap(),
            0.5,
            1.0,
        )
        .unwrap();
        let (ind, _) = g.degrees(0.0).unwrap();
        assert_eq!(ind[0], 0.5);
    }

    #[test]
    fn balance_checks() {
        let ring = unit_graph(vec![
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ]);
        assert!(ring.is_balanced(0.0, 1e-12).unwrap());

        let edge = unit_graph(vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(!edge.is_balanced(0.0, 1e-12).unwrap());

        let chain = unit_graph(vec![
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ]);
        assert!(chain.is_balanced(0.0, 1e-12).unwrap());
    }

    #[test]
    fn validation_rejects_bad_weights_and_self_cycles() {
        let self_cycle = matrix_from_rows(&[vec![0.5, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            SwitchingGraph::time_invariant(self_cycle, 0.5, 1.0),
            Err(GraphError::SelfCycle { node: 0, .. })
        ));

        let below_eta = matrix_from_rows(&[vec![0.0, 0.1], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            SwitchingGraph::time_invariant(below_eta, 0.5, 1.0),
            Err(GraphError::WeightOutOfBand { .. })
        ));

        let ok = matrix_from_rows(&[vec![0.0, 0.7], vec![0.0, 0.0]]).unwrap();
        assert!(SwitchingGraph::time_invariant(ok, 0.5, 1.0).is_ok());
    }

    #[test]
    fn query_before_schedule_start_is_an_error() {
        let g = unit_graph(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(g.adjacency_at(-1.0), Err(GraphError::BeforeSchedule { .. })));
    }

    #[test]
    fn periodic_schedule_folds_time() {
        let g = rotating_edge(8.0);
        for k in 0..4 {
            assert_eq!(g.segment_index_at(2.0 * k as f64 + 0.5).unwrap(), k);
            assert_eq!(g.segment_index_at(2.0 * k as f64 + 0.5 + 8.0).unwrap(), k);
            assert_eq!(g.segment_index_at(2.0 * k as f64 + 0.5 + 80.0).unwrap(), k);
        }
    }

    #[test]
    fn piecewise_spans_cover_interval_and_split_at_switches() {
        let g = rotating_edge(8.0);
        let spans = g.piecewise_spans(1.0, 11.0).unwrap();
        assert_eq!(spans.first().unwrap().0, 1.0);
        assert_eq!(spans.last().unwrap().1, 11.0);
        for w in spans.windows(2) {
            assert_eq!(w[0].1, w[1].0);
            assert_ne!(w[0].2, w[1].2);
        }
        // Switches at 2, 4, 6, 8, 10 inside the window.
        assert_eq!(spans.len(), 6);
    }

    #[test]
    fn integrated_adjacency_over_a_period_is_the_ring() {
        let g = rotating_edge(8.0);
        let acc = g.integrated_adjacency(0.0, 8.0).unwrap();
        for i in 0..4 {
            assert_relative_eq!(acc[((i + 1) % 4, i)], 2.0, epsilon = 1e-9);
        }
        assert_relative_eq!(acc.sum(), 8.0, epsilon = 1e-9);
    }

    #[test]
    fn laplacian_rows_sum_to_zero_on_all_segments() {
        let g = rotating_edge(4.0);
        for seg in g.segments() {
            let l = laplacian_of(&seg.adjacency);
            for k in 0..4 {
                assert_eq!(l.row(k).sum(), 0.0);
            }
        }
    }
}
