//! Feasibility of small systems of half-planes over `(p, q) >= 0`.
//!
//! The feasible region is built by clipping a large box against each row
//! (Sutherland-Hodgman). Every polygon edge remembers the line it lies on,
//! so each new vertex is computed as a line-line intersection instead of
//! by interpolation along an edge. Strict rows are loosened for clipping and
//! repaired afterwards by [`repair_strict`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the clipping box `[0, BOX_LIMIT]^2`.
pub const BOX_LIMIT: f64 = 1e12;

/// Orientation slack on normalized rows.
pub const ORIENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Lt,
}

/// `a_p * p + a_q * q (<= | <) rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub a_p: f64,
    pub a_q: f64,
    pub rhs: f64,
    pub sense: Sense,
}

impl HalfPlane {
    pub fn le(a_p: f64, a_q: f64, rhs: f64) -> Self {
        Self {
            a_p,
            a_q,
            rhs,
            sense: Sense::Le,
        }
    }

    pub fn lt(a_p: f64, a_q: f64, rhs: f64) -> Self {
        Self {
            a_p,
            a_q,
            rhs,
            sense: Sense::Lt,
        }
    }

    /// `a_p * p + a_q * q >= rhs`.
    pub fn ge(a_p: f64, a_q: f64, rhs: f64) -> Self {
        Self::le(-a_p, -a_q, -rhs)
    }

    /// `a_p * p + a_q * q > rhs`.
    pub fn gt(a_p: f64, a_q: f64, rhs: f64) -> Self {
        Self::lt(-a_p, -a_q, -rhs)
    }

    pub fn is_strict(&self) -> bool {
        self.sense == Sense::Lt
    }

    /// Scaled so that `max(|a_p|, |a_q|, |rhs|) = 1`.
    pub fn normalized(&self) -> Self {
        let m = self.a_p.abs().max(self.a_q.abs()).max(self.rhs.abs());
        if m == 0.0 || !m.is_finite() {
            return *self;
        }
        Self {
            a_p: self.a_p / m,
            a_q: self.a_q / m,
            rhs: self.rhs / m,
            sense: self.sense,
        }
    }

    /// `a_p * p + a_q * q - rhs`; negative inside.
    pub fn excess(&self, p: f64, q: f64) -> f64 {
        self.a_p * p + self.a_q * q - self.rhs
    }

    /// Exact check with the row's own sense.
    pub fn holds(&self, p: f64, q: f64) -> bool {
        let e = self.excess(p, q);
        match self.sense {
            Sense::Le => e <= 0.0,
            Sense::Lt => e < 0.0,
        }
    }

    fn slack_tol(&self, p: f64, q: f64) -> f64 {
        ORIENT_TOL
            * (self.a_p * p)
                .abs()
                .max((self.a_q * q).abs())
                .max(self.rhs.abs())
                .max(1.0)
    }

    /// Loosened check with orientation slack, for normalized rows.
    fn holds_loose(&self, p: f64, q: f64) -> bool {
        self.excess(p, q) <= self.slack_tol(p, q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub witness: Option<(f64, f64)>,
    /// Per input row: strict and satisfied only with equality at the witness.
    pub on_strict_boundary: Vec<bool>,
    /// Vertices of the loosened feasible polygon, counterclockwise.
    pub polygon: Vec<(f64, f64)>,
}

impl FeasibilityResult {
    fn infeasible(rows: usize) -> Self {
        Self {
            feasible: false,
            witness: None,
            on_strict_boundary: vec![false; rows],
            polygon: Vec::new(),
        }
    }

    pub fn needs_repair(&self) -> bool {
        self.on_strict_boundary.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy)]
struct Line {
    a: f64,
    b: f64,
    c: f64,
}

fn intersect(l1: Line, l2: Line) -> Option<(f64, f64)> {
    let det = l1.a * l2.b - l2.a * l1.b;
    let scale = (l1.a.abs() + l1.b.abs()) * (l2.a.abs() + l2.b.abs());
    if det.abs() <= 1e-15 * scale {
        return None;
    }
    Some(((l1.c * l2.b - l2.c * l1.b) / det, (l1.a * l2.c - l2.a * l1.c) / det))
}

fn clip_polygon(poly: &[(f64, f64)], edges: &[Line], h: &HalfPlane) -> (Vec<(f64, f64)>, Vec<Line>) {
    let line = Line {
        a: h.a_p,
        b: h.a_q,
        c: h.rhs,
    };
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    let mut out_edges = Vec::with_capacity(n + 1);
    let inside: Vec<bool> = poly.iter().map(|&(p, q)| h.holds_loose(p, q)).collect();
    for i in 0..n {
        let j = (i + 1) % n;
        let (vi, vj) = (poly[i], poly[j]);
        match (inside[i], inside[j]) {
            (true, true) => {
                out.push(vi);
                out_edges.push(edges[i]);
            }
            (true, false) => {
                out.push(vi);
                out_edges.push(edges[i]);
                out.push(crossing(vi, vj, edges[i], line, h));
                out_edges.push(line);
            }
            (false, true) => {
                out.push(crossing(vi, vj, edges[i], line, h));
                out_edges.push(edges[i]);
            }
            (false, false) => {}
        }
    }
    dedup(&mut out, &mut out_edges);
    (out, out_edges)
}

fn crossing(vi: (f64, f64), vj: (f64, f64), edge: Line, line: Line, h: &HalfPlane) -> (f64, f64) {
    if let Some(x) = intersect(edge, line) {
        let (lo_p, hi_p) = (vi.0.min(vj.0), vi.0.max(vj.0));
        let (lo_q, hi_q) = (vi.1.min(vj.1), vi.1.max(vj.1));
        let pad = 1e-9 * (hi_p - lo_p + hi_q - lo_q).max(1.0);
        if x.0 >= lo_p - pad && x.0 <= hi_p + pad && x.1 >= lo_q - pad && x.1 <= hi_q + pad {
            return x;
        }
    }
    let (ei, ej) = (h.excess(vi.0, vi.1), h.excess(vj.0, vj.1));
    let t = (ei / (ei - ej)).clamp(0.0, 1.0);
    (vi.0 + t * (vj.0 - vi.0), vi.1 + t * (vj.1 - vi.1))
}

fn dedup(poly: &mut Vec<(f64, f64)>, edges: &mut Vec<Line>) {
    let mut i = 0;
    while poly.len() > 1 && i < poly.len() {
        let j = (i + 1) % poly.len();
        let (a, b) = (poly[i], poly[j]);
        let scale = a.0.abs().max(a.1.abs()).max(1.0);
        if (a.0 - b.0).abs() <= 1e-14 * scale && (a.1 - b.1).abs() <= 1e-14 * scale {
            // drop a; its incoming edge continues to b
            poly.remove(i);
            edges.remove(i);
        } else {
            i += 1;
        }
    }
}

/// Feasible polygon of the loosened system intersected with `p, q >= 0`,
/// with the witness minimizing `p + q`, then `p`.
pub fn feasible_point(rows: &[HalfPlane]) -> FeasibilityResult {
    feasible_point_min(rows, (1.0, 1.0))
}

/// As [`feasible_point`] with the witness minimizing `w_p * p + w_q * q`
/// (then `p`, then `q`) over the polygon vertices. Weights must be
/// nonnegative so the minimum is attained.
pub fn feasible_point_min(rows: &[HalfPlane], objective: (f64, f64)) -> FeasibilityResult {
    let norm: Vec<HalfPlane> = rows.iter().map(HalfPlane::normalized).collect();
    for h in &norm {
        if h.a_p == 0.0 && h.a_q == 0.0 {
            let ok = match h.sense {
                Sense::Le => h.rhs >= 0.0,
                Sense::Lt => h.rhs > 0.0,
            };
            if !ok {
                return FeasibilityResult::infeasible(rows.len());
            }
        }
    }
    let l = BOX_LIMIT;
    let mut poly = vec![(0.0, 0.0), (l, 0.0), (l, l), (0.0, l)];
    let mut edges = vec![
        Line {
            a: 0.0,
            b: -1.0,
            c: 0.0,
        },
        Line { a: 1.0, b: 0.0, c: l },
        Line { a: 0.0, b: 1.0, c: l },
        Line {
            a: -1.0,
            b: 0.0,
            c: 0.0,
        },
    ];
    for h in norm.iter().filter(|h| h.a_p != 0.0 || h.a_q != 0.0) {
        let (p2, e2) = clip_polygon(&poly, &edges, h);
        poly = p2;
        edges = e2;
        if poly.is_empty() {
            return FeasibilityResult::infeasible(rows.len());
        }
    }
    let (wp, wq) = objective;
    let witness = poly
        .iter()
        .map(|&(p, q)| (p.max(0.0), q.max(0.0)))
        .min_by(|x, y| {
            (wp * x.0 + wq * x.1)
                .total_cmp(&(wp * y.0 + wq * y.1))
                .then(x.0.total_cmp(&y.0))
                .then(x.1.total_cmp(&y.1))
        })
        .expect("nonempty polygon");
    let on_strict_boundary = norm
        .iter()
        .map(|h| h.is_strict() && h.excess(witness.0, witness.1) >= -h.slack_tol(witness.0, witness.1))
        .collect();
    FeasibilityResult {
        feasible: true,
        witness: Some(witness),
        on_strict_boundary,
        polygon: poly,
    }
}

/// Halvings tried by [`repair_strict`] per direction.
pub const REPAIR_STEPS: u32 = 60;

/// Moves a loosened witness into the strict interior.
///
/// First tries `(p - eps, q)` with `eps = eps0 * 2^-k`, `eps0 = 1e-6 * max(1, scale)`;
/// then steps of the same lengths toward the polygon's vertex centroid.
/// Every candidate must satisfy strict rows strictly and the other rows
/// exactly, with `p, q >= 0`.
pub fn repair_strict(res: &FeasibilityResult, rows: &[HalfPlane], scale: f64) -> Result<(f64, f64)> {
    let (p, q) = res
        .witness
        .ok_or_else(|| Error::invalid("repair_strict needs a feasible witness"))?;
    let ok = |p: f64, q: f64| p >= 0.0 && q >= 0.0 && rows.iter().all(|h| h.holds(p, q));
    if ok(p, q) {
        return Ok((p, q));
    }
    let eps0 = 1e-6 * scale.max(1.0);
    for k in 0..REPAIR_STEPS {
        let eps = eps0 * 0.5f64.powi(k as i32);
        if ok(p - eps, q) {
            return Ok((p - eps, q));
        }
    }
    if !res.polygon.is_empty() {
        let n = res.polygon.len() as f64;
        let cp = res.polygon.iter().map(|v| v.0).sum::<f64>() / n;
        let cq = res.polygon.iter().map(|v| v.1).sum::<f64>() / n;
        let dist = (cp - p).hypot(cq - q);
        if dist > 0.0 {
            for k in 0..REPAIR_STEPS {
                let t = (eps0 * 0.5f64.powi(k as i32) / dist).min(1.0);
                let (pp, qq) = (p + t * (cp - p), q + t * (cq - q));
                if ok(pp, qq) {
                    return Ok((pp, qq));
                }
            }
        }
    }
    Err(Error::Degenerate(format!("no strictly feasible point near ({p}, {q})")))
}
