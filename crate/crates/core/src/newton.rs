//! Quasi-homogeneous weights from the Newton polygon of a vector field.

use crate::error::{Error, Result};
use crate::poly::{lie_chain, BiPoly, PlanarField, WeightPair};
use crate::sigma::{DEFAULT_MAX_ORDER, TAU_ZERO};

/// Support point of the system: `(i - 1, j)` for `x^i y^j` in `P` and
/// `(i, j - 1)` for `x^i y^j` in `Q`.
pub fn support(field: &PlanarField) -> Vec<(i64, i64)> {
    let mut pts: Vec<(i64, i64)> = field
        .p
        .terms()
        .map(|(i, j, _)| (i as i64 - 1, j as i64))
        .chain(field.q.terms().map(|(i, j, _)| (i as i64, j as i64 - 1)))
        .collect();
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// Edges of the lower-left boundary of the Newton polygon, ordered from
/// the leftmost vertex down to the lowest one. Every edge has negative slope.
pub fn newton_edges(points: &[(i64, i64)]) -> Vec<((i64, i64), (i64, i64))> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut points = points.to_vec();
    points.sort_unstable();
    let min_j = points.iter().map(|p| p.1).min().unwrap();
    let end_i = points.iter().filter(|p| p.1 == min_j).map(|p| p.0).min().unwrap();

    // lowest point per column, restricted to columns left of the end vertex
    let mut cols: Vec<(i64, i64)> = Vec::new();
    for &(i, j) in &points {
        if i > end_i {
            continue;
        }
        match cols.last_mut() {
            Some(last) if last.0 == i => last.1 = last.1.min(j),
            _ => cols.push((i, j)),
        }
    }

    let mut hull: Vec<(i64, i64)> = Vec::new();
    for &p in &cols {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    // drop the flat or rising start: the boundary begins at the lowest point
    // of the leftmost column and only descends
    hull.windows(2).filter(|w| w[1].1 < w[0].1).map(|w| (w[0], w[1])).collect()
}

/// Weights for the weighted polar blow-up at the origin.
///
/// A fold of order `n` with `f = y` short-circuits to `(1, n)`. Otherwise the
/// weights are the normal of the Newton-polygon edge carrying the most
/// support points (leftmost on ties).
pub fn newton_polygon_weights(field: &PlanarField, f_is_y: bool) -> Result<WeightPair> {
    if field.is_zero() {
        return Err(Error::DegenerateSupport);
    }
    let [p0, q0] = field.eval(0.0, 0.0);
    if p0.hypot(q0) >= TAU_ZERO {
        if !f_is_y {
            return Err(Error::DegenerateSupport);
        }
        let chain = lie_chain(field, &BiPoly::y(), DEFAULT_MAX_ORDER);
        if chain[0].eval(0.0, 0.0).abs() >= TAU_ZERO {
            return Err(Error::DegenerateSupport);
        }
        return chain
            .iter()
            .position(|d| d.eval(0.0, 0.0).abs() >= TAU_ZERO)
            .map(|k| WeightPair::new(1, k as u32 + 1))
            .unwrap_or(Err(Error::DegenerateSupport));
    }

    let pts = support(field);
    let edges = newton_edges(&pts);
    let on_edge = |e: &((i64, i64), (i64, i64))| {
        let (a, b) = *e;
        pts.iter().filter(|p| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) == 0).count()
    };
    let best = edges
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| on_edge(a).cmp(&on_edge(b)).then(ib.cmp(ia)))
        .map(|(_, e)| *e)
        .ok_or(Error::DegenerateSupport)?;
    let ((i1, j1), (i2, j2)) = best;
    WeightPair::new((j1 - j2) as u32, (i2 - i1) as u32)
}
