//! Chord interpolation of convex quadratics with convex-combination weights.

use ies_milp::Relation;

use crate::bilevel::{LinearConstraint, Owner, Tag, VarId, VarTable};
use crate::error::{CoreError, Result};

/// `a x^2 + b x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticSpec {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x * x + self.b * x + self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwlCurve {
    pub points: Vec<(f64, f64)>,
    pub convex: bool,
}

impl PwlCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CoreError::Reformulation("curve needs at least two breakpoints".into()));
        }
        if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(CoreError::Reformulation(
                "breakpoints must be strictly increasing in x".into(),
            ));
        }
        let slopes: Vec<f64> = points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        let convex = slopes
            .windows(2)
            .all(|s| s[1] >= s[0] - 1e-12 * (1.0 + s[0].abs()));
        Ok(PwlCurve { points, convex })
    }

    /// Chords of `spec` through `n_segments + 1` uniform breakpoints on `[lo, hi]`.
    pub fn chord(spec: QuadraticSpec, lo: f64, hi: f64, n_segments: usize) -> Result<Self> {
        if spec.a < 0.0 {
            return Err(CoreError::Reformulation(format!(
                "quadratic coefficient {} is negative; the curve is not convex",
                spec.a
            )));
        }
        if n_segments == 0 {
            return Err(CoreError::Reformulation("need at least one segment".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CoreError::Reformulation(format!("bad domain [{lo}, {hi}]")));
        }
        let points = (0..=n_segments)
            .map(|k| {
                let x = if k == n_segments {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / n_segments as f64
                };
                (x, spec.eval(x))
            })
            .collect();
        PwlCurve::new(points)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Largest segment width.
    pub fn max_width(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .fold(0.0, f64::max)
    }

    /// Linear interpolation; `None` outside the domain.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return None;
        }
        let k = self.points.partition_point(|p| p.0 <= x).clamp(1, self.points.len() - 1);
        let (x0, y0) = self.points[k - 1];
        let (x1, y1) = self.points[k];
        if x == x1 {
            return Some(y1);
        }
        Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Worst-case over-approximation of a quadratic with leading coefficient `a`.
    pub fn error_bound(&self, a: f64) -> f64 {
        let w = self.max_width();
        a * w * w / 4.0
    }
}

/// Weights and rows produced by [`pwl_expand`].
#[derive(Debug, Clone)]
pub struct PwlExpansion {
    pub curve: PwlCurve,
    pub weights: Vec<VarId>,
    pub rows: Vec<LinearConstraint>,
    /// Objective terms `sum_k f(x_k) * lambda_k`.
    pub cost: Vec<(VarId, f64)>,
}

/// Convex-combination encoding of `f(arg)` where `arg = sum(terms) + constant`.
///
/// Adds one weight per breakpoint to `vars` and emits the convexity row
/// `sum lambda = 1` and the link row `sum x_k lambda_k - sum(terms) = constant`.
/// Minimizing `cost` then yields the chord interpolant, since `f` is convex.
#[allow(clippy::too_many_arguments)]
pub fn pwl_expand(
    spec: QuadraticSpec,
    domain: (f64, f64),
    n_segments: usize,
    arg_terms: &[(VarId, f64)],
    arg_constant: f64,
    vars: &mut VarTable,
    owner: Owner,
    name: &str,
    tag: Tag,
) -> Result<PwlExpansion> {
    let curve = PwlCurve::chord(spec, domain.0, domain.1, n_segments)?;
    let weights: Vec<VarId> = (0..curve.points.len())
        .map(|k| vars.add(format!("{name}.lambda{k}"), 0.0, f64::INFINITY, false, owner))
        .collect();
    let convexity = LinearConstraint::new(
        weights.iter().map(|&w| (w, 1.0)).collect(),
        Relation::Eq,
        1.0,
        tag,
        format!("{name}.convexity"),
    );
    let mut link: Vec<(VarId, f64)> = weights
        .iter()
        .zip(&curve.points)
        .filter(|(_, p)| p.0 != 0.0)
        .map(|(&w, p)| (w, p.0))
        .collect();
    link.extend(arg_terms.iter().map(|&(v, c)| (v, -c)));
    let link = LinearConstraint::new(link, Relation::Eq, arg_constant, tag, format!("{name}.link"));
    let cost = weights
        .iter()
        .zip(&curve.points)
        .filter(|(_, p)| p.1 != 0.0)
        .map(|(&w, p)| (w, p.1))
        .collect();
    Ok(PwlExpansion {
        curve,
        weights,
        rows: vec![convexity, link],
        cost,
    })
}
