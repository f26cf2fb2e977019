//! Scaling-collapse datasets near the critical lines and the self-dual point.

use std::f64::consts::FRAC_PI_4;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseRow {
    pub delta: f64,
    pub t: usize,
    pub delta_t: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseDataset {
    pub rows: Vec<CollapseRow>,
    pub anchor: Option<f64>,
    pub angle: Option<f64>,
    pub cut_fraction: f64,
}

/// `(J, g)` at detuning `delta` for a critical-line anchor `x`.
pub fn anchor_point(x: f64, delta: f64) -> (f64, f64) {
    (x - delta, x + delta)
}

/// `(J, g)` at distance `delta` from the self-dual point along direction `phi`.
pub fn self_dual_point(phi: f64, delta: f64) -> (f64, f64) {
    (FRAC_PI_4 - delta * phi.cos(), FRAC_PI_4 - delta * phi.sin())
}

impl CollapseDataset {
    /// Sorts rows by `(δ, t)`.
    pub fn new(mut rows: Vec<CollapseRow>, anchor: Option<f64>, angle: Option<f64>, cut_fraction: f64) -> Self {
        rows.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.t.cmp(&b.t)));
        Self { rows, anchor, angle, cut_fraction }
    }

    pub fn deltas(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.rows.iter().map(|r| r.delta).collect();
        d.dedup();
        d
    }

    /// `(δ·t, S)` for one detuning, ascending in `δ·t`.
    pub fn curve(&self, delta: f64) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self.rows.iter().filter(|r| r.delta == delta).map(|r| (r.delta_t, r.s)).collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    }

    /// Spread `max S − min S` over every row, the height of the collapse plot.
    pub fn range(&self) -> f64 {
        let (lo, hi) = self.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r.s), h.max(r.s)));
        hi - lo
    }

    /// Largest `|δ·t − δ t|` over all rows.
    pub fn consistency(&self) -> f64 {
        self.rows.iter().fold(0.0f64, |m, r| m.max((r.delta_t - r.delta * r.t as f64).abs()))
    }

    /// Largest pairwise gap between the curves of the given detunings
    /// (see [`max_pairwise_gap`]) as a fraction of [`Self::range`].
    pub fn deviation(&self, deltas: &[f64]) -> Option<f64> {
        let curves: Vec<Vec<(f64, f64)>> = deltas.iter().map(|&d| self.curve(d)).collect();
        let range = self.range();
        max_pairwise_gap(&curves).filter(|_| range > 0.0).map(|g| g / range)
    }
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> f64 {
    let i = curve.partition_point(|p| p.0 < x);
    if i == 0 {
        return curve[0].1;
    }
    if i == curve.len() {
        return curve[i - 1].1;
    }
    let (a, b) = (curve[i - 1], curve[i]);
    if b.0 == a.0 {
        return b.1;
    }
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

/// Largest vertical distance between any two curves over their common abscissa range.
///
/// Curves are `(x, y)` samples with `x` ascending, compared by linear
/// interpolation at every sample inside the overlap. `None` when no pair overlaps.
pub fn max_pairwise_gap(curves: &[Vec<(f64, f64)>]) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let from = a[0].0.max(b[0].0);
            let to = a[a.len() - 1].0.min(b[b.len() - 1].0);
            if from > to {
                continue;
            }
            let d =
                a.iter().chain(b.iter()).filter(|p| p.0 >= from && p.0 <= to).map(|p| (interpolate(a, p.0) - interpolate(b, p.0)).abs()).fold(0.0f64, f64::max);
            worst = Some(worst.map_or(d, |w| w.max(d)));
        }
    }
    worst
}

/// [`max_pairwise_gap`] divided by the spread of all values of `curves`.
pub fn collapse_deviation(curves: &[Vec<(f64, f64)>]) -> Option<f64> {
    let (lo, hi) = curves.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
    if !(hi > lo) {
        return None;
    }
    max_pairwise_gap(curves).map(|g| g / (hi - lo))
}
