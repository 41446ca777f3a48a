//! Principal curves for curved mine patterns.
//!
//! The curve is kept as a unit-speed polyline: `knots[i].lambda` is the arc
//! length from the first knot. Each iteration projects the cluster onto the
//! current polyline, smooths the coordinates against their projection index,
//! and resamples the smoothed curve at a fixed arc step.

use super::linear::principal_direction;
use super::spline::{fit_penalized, SmoothCurve};
use super::{PatternCoordinates, PatternError, PatternFitConfig};
use crate::clustering::Cluster;
use crate::geodata::MetricPoint;
use serde::{Deserialize, Serialize};

/// Default distance between approximation anchors (m).
pub const ANCHOR_SPACING: f64 = 25.0;
/// Anchor extent per side used while training (m).
pub const TRAINING_EXTENT: f64 = 1000.0;
/// Arc step of the unit-speed resampling (m).
const RESAMPLE_STEP: f64 = 1.0;
/// Upper bound on spline segments; small clusters use one per gap.
const MAX_SEGMENTS: usize = 20;
/// log10 range scanned for the smoothing weight.
const LOG_LAMBDA_RANGE: (f64, f64) = (-6.0, 8.0);
const LAMBDA_BISECTIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveKnot {
    pub lambda: f64,
    pub point: MetricPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvedPattern {
    pub knots: Vec<CurveKnot>,
    pub degree: usize,
    /// Bound on the residual of every cluster point (m).
    pub smoothness: f64,
    pub cluster_center: MetricPoint,
    /// Arc position of the curve point nearest to the cluster center.
    pub center_lambda: f64,
    pub anchors: Vec<MetricPoint>,
    /// Progress of every anchor: summed anchor-to-anchor distances from the center anchor.
    pub anchor_gammas: Vec<f64>,
    pub center_anchor: usize,
    pub anchor_spacing: f64,
    pub extent: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Mean squared projection distance, starting with the initial principal component.
    pub distance_history: Vec<f64>,
}

/// Nearest point on a unit-speed polyline. Ties resolve to the largest arc position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub lambda: f64,
    pub point: MetricPoint,
    pub distance_sq: f64,
}

pub fn project_onto_polyline(knots: &[CurveKnot], p: &MetricPoint) -> Projection {
    let mut best =
        Projection { lambda: knots[0].lambda, point: knots[0].point, distance_sq: p.distance_sq(&knots[0].point) };
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = b.point - a.point;
        let len_sq = seg.dot(&seg);
        let t = if len_sq > 0.0 { ((*p - a.point).dot(&seg) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
        let q = a.point + seg * t;
        let d = p.distance_sq(&q);
        if d <= best.distance_sq {
            best = Projection { lambda: a.lambda + t * (b.lambda - a.lambda), point: q, distance_sq: d };
        }
    }
    best
}

/// Point at arc position `s`, extended along the end tangents outside the curve.
pub fn point_at_arc(knots: &[CurveKnot], s: f64) -> MetricPoint {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if knots.len() == 1 {
        return first.point;
    }
    if s <= first.lambda {
        let dir = end_tangent(knots, false);
        return first.point + dir * (s - first.lambda);
    }
    if s >= last.lambda {
        let dir = end_tangent(knots, true);
        return last.point + dir * (s - last.lambda);
    }
    let i = knots.partition_point(|k| k.lambda <= s).saturating_sub(1).min(knots.len() - 2);
    let (a, b) = (knots[i], knots[i + 1]);
    let span = b.lambda - a.lambda;
    let t = if span > 0.0 { (s - a.lambda) / span } else { 0.0 };
    a.point + (b.point - a.point) * t
}

/// Unit tangent at one end, measured over the last couple of meters of arc.
fn end_tangent(knots: &[CurveKnot], at_end: bool) -> MetricPoint {
    let total = knots[knots.len() - 1].lambda - knots[0].lambda;
    let reach = total.min(2.0 * RESAMPLE_STEP);
    let (a, b) = if at_end {
        let end = knots[knots.len() - 1];
        (point_at_arc_inner(knots, end.lambda - reach), end.point)
    } else {
        let start = knots[0];
        (start.point, point_at_arc_inner(knots, start.lambda + reach))
    };
    let v = b - a;
    let n = v.norm();
    if n > 0.0 {
        v * (1.0 / n)
    } else {
        MetricPoint::new(1.0, 0.0)
    }
}

fn point_at_arc_inner(knots: &[CurveKnot], s: f64) -> MetricPoint {
    let s = s.clamp(knots[0].lambda, knots[knots.len() - 1].lambda);
    let i = knots.partition_point(|k| k.lambda <= s).saturating_sub(1).min(knots.len() - 2);
    let (a, b) = (knots[i], knots[i + 1]);
    let span = b.lambda - a.lambda;
    let t = if span > 0.0 { (s - a.lambda) / span } else { 0.0 };
    a.point + (b.point - a.point) * t
}

/// Mean squared distance from `points` to the polyline.
pub fn mean_squared_distance(knots: &[CurveKnot], points: &[MetricPoint]) -> f64 {
    points.iter().map(|p| project_onto_polyline(knots, p).distance_sq).sum::<f64>() / points.len() as f64
}

/// Build a polyline through `vertices` parameterized by cumulative arc length from 0.
fn arc_polyline(vertices: &[MetricPoint]) -> Vec<CurveKnot> {
    let mut out = Vec::with_capacity(vertices.len());
    let mut s = 0.0;
    for (i, v) in vertices.iter().enumerate() {
        if i > 0 {
            let step = v.distance(&vertices[i - 1]);
            if step == 0.0 {
                continue;
            }
            s += step;
        }
        out.push(CurveKnot { lambda: s, point: *v });
    }
    out
}

/// Resample a curve at a fixed arc step so the result has unit speed.
fn unit_speed_resample(curve: &SmoothCurve) -> Vec<CurveKnot> {
    let (lo, hi) = curve.domain();
    let samples = (((hi - lo) * 4.0).ceil() as usize).clamp(64, 40_000);
    let dense: Vec<MetricPoint> = (0..=samples)
        .map(|i| {
            let (x, y) = curve.eval(lo + (hi - lo) * i as f64 / samples as f64);
            MetricPoint::new(x, y)
        })
        .collect();
    let fine = arc_polyline(&dense);
    if fine.len() < 2 {
        return fine;
    }
    let total = fine[fine.len() - 1].lambda;
    let steps = (total / RESAMPLE_STEP).floor() as usize;
    let mut out: Vec<CurveKnot> = (0..=steps)
        .map(|k| {
            let s = k as f64 * RESAMPLE_STEP;
            CurveKnot { lambda: s, point: point_at_arc_inner(&fine, s) }
        })
        .collect();
    if total - steps as f64 * RESAMPLE_STEP > 1e-9 {
        out.push(CurveKnot { lambda: total, point: fine[fine.len() - 1].point });
    }
    out
}

struct SmoothingStep {
    knots: Vec<CurveKnot>,
}

/// One conditional-expectation step: smooth the points against their
/// projection indices with the stiffest spline whose largest residual stays
/// within `max_residual`.
fn smooth_step(points: &[MetricPoint], lambdas: &[f64], degree: usize, max_residual: f64) -> Option<SmoothingStep> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]).then(a.cmp(&b)));
    let ts: Vec<f64> = order.iter().map(|&i| lambdas[i]).collect();
    let xs: Vec<f64> = order.iter().map(|&i| points[i].x).collect();
    let ys: Vec<f64> = order.iter().map(|&i| points[i].y).collect();
    let n_segments = (points.len() - 1).clamp(1, MAX_SEGMENTS);

    let fit = |log_lambda: f64| -> Option<(SmoothCurve, f64)> {
        let c = fit_penalized(&ts, &xs, &ys, degree, n_segments, 10f64.powf(log_lambda))?;
        let worst = ts
            .iter()
            .zip(xs.iter().zip(&ys))
            .map(|(&t, (&x, &y))| {
                let (fx, fy) = c.eval(t);
                (fx - x).hypot(fy - y)
            })
            .fold(0.0, f64::max);
        Some((c, worst))
    };

    let (lo, hi) = LOG_LAMBDA_RANGE;
    let stiff = fit(hi)?;
    let chosen = if stiff.1 <= max_residual {
        stiff.0
    } else {
        let loose = fit(lo)?;
        if loose.1 > max_residual {
            loose.0
        } else {
            let (mut a, mut b) = (lo, hi);
            let mut best = loose.0;
            for _ in 0..LAMBDA_BISECTIONS {
                let mid = 0.5 * (a + b);
                let (c, worst) = fit(mid)?;
                if worst <= max_residual {
                    a = mid;
                    best = c;
                } else {
                    b = mid;
                }
            }
            best
        }
    };
    let knots = unit_speed_resample(&chosen);
    (knots.len() >= 2).then_some(SmoothingStep { knots })
}

pub fn fit_principal_curve(cluster: &Cluster, config: &PatternFitConfig) -> Result<CurvedPattern, PatternError> {
    config.validate()?;
    let points = &cluster.points;
    let (center, direction) = principal_direction(points)?;
    let degree = if points.len() == 2 { 1 } else { config.max_spline_degree.clamp(1, 2) };

    // Initial curve: the first principal component across the projected span.
    let offsets: Vec<f64> = points.iter().map(|p| (*p - center).dot(&direction)).collect();
    let t_min = offsets.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut knots = arc_polyline(&[center + direction * t_min, center + direction * t_max]);
    let mut history = vec![mean_squared_distance(&knots, points)];
    let mut converged = points.len() == 2;
    let mut iterations = 0;

    while !converged && iterations < config.max_iterations {
        iterations += 1;
        let lambdas: Vec<f64> = points.iter().map(|p| project_onto_polyline(&knots, p).lambda).collect();
        let Some(step) = smooth_step(points, &lambdas, degree, config.pc_smoothness_factor) else {
            break;
        };
        let d = mean_squared_distance(&step.knots, points);
        let prev = *history.last().unwrap();
        if d > prev {
            // a step that moves the curve away from the points ends the fit
            converged = true;
            break;
        }
        knots = step.knots;
        history.push(d);
        if d <= 1e-12 || (prev - d) / prev.max(1e-12) < config.convergence_threshold {
            converged = true;
        }
    }

    let center_lambda = project_onto_polyline(&knots, &cluster.center).lambda;
    let pattern = CurvedPattern {
        knots,
        degree,
        smoothness: config.pc_smoothness_factor,
        cluster_center: cluster.center,
        center_lambda,
        anchors: Vec::new(),
        anchor_gammas: Vec::new(),
        center_anchor: 0,
        anchor_spacing: ANCHOR_SPACING,
        extent: 0.0,
        converged,
        iterations,
        distance_history: history,
    };
    Ok(build_anchors(pattern, TRAINING_EXTENT))
}

/// Place anchors every `anchor_spacing` meters of arc, `extent` meters to both
/// sides of the curve point nearest the cluster center.
pub fn build_anchors(mut pattern: CurvedPattern, extent: f64) -> CurvedPattern {
    let extent = extent.max(0.0);
    let per_side = (extent / pattern.anchor_spacing + 1e-9).floor() as i64;
    pattern.anchors = (-per_side..=per_side)
        .map(|k| point_at_arc(&pattern.knots, pattern.center_lambda + k as f64 * pattern.anchor_spacing))
        .collect();
    let c = per_side as usize;
    let mut gammas = vec![0.0; pattern.anchors.len()];
    for i in (c + 1)..pattern.anchors.len() {
        gammas[i] = gammas[i - 1] + pattern.anchors[i].distance(&pattern.anchors[i - 1]);
    }
    for i in (0..c).rev() {
        gammas[i] = gammas[i + 1] + pattern.anchors[i].distance(&pattern.anchors[i + 1]);
    }
    pattern.anchor_gammas = gammas;
    pattern.center_anchor = c;
    pattern.extent = extent;
    pattern
}

impl CurvedPattern {
    /// Nearest-anchor approximation of (progress, distance).
    pub fn transform(&self, p: &MetricPoint) -> PatternCoordinates {
        let mut best = (f64::INFINITY, f64::INFINITY);
        for (a, &g) in self.anchors.iter().zip(&self.anchor_gammas) {
            let d = a.distance_sq(p);
            if d < best.0 || (d == best.0 && g < best.1) {
                best = (d, g);
            }
        }
        PatternCoordinates { gamma: best.1, delta: best.0.sqrt() }
    }

    pub fn curve_points(&self) -> Vec<MetricPoint> {
        self.knots.iter().map(|k| k.point).collect()
    }

    pub fn length(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.lambda)
    }

    pub fn final_distance(&self) -> f64 {
        *self.distance_history.last().unwrap_or(&0.0)
    }
}

pub fn transform_curve(pattern: &CurvedPattern, p: &MetricPoint) -> PatternCoordinates {
    pattern.transform(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::linear::fit_linear;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn cluster(pts: Vec<MetricPoint>) -> Cluster {
        let n = pts.len();
        Cluster::from_members(&pts, (0..n).collect())
    }

    fn cfg(smoothness: f64) -> PatternFitConfig {
        PatternFitConfig { pc_smoothness_factor: smoothness, ..PatternFitConfig::default() }
    }

    fn noisy_arc(seed: u64, n: usize, radius: f64, sigma: f64) -> Vec<MetricPoint> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        (0..n)
            .map(|i| {
                let th = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
                MetricPoint::new(radius * th.cos() + noise.sample(&mut rng), radius * th.sin() + noise.sample(&mut rng))
            })
            .collect()
    }

    fn linear_d(points: &[MetricPoint]) -> f64 {
        let lp = fit_linear(&cluster(points.to_vec())).unwrap();
        points.iter().map(|p| lp.transform(p).delta.powi(2)).sum::<f64>() / points.len() as f64
    }

    #[test]
    fn two_points_give_the_segment() {
        let c = cluster(vec![MetricPoint::new(0.0, 0.0), MetricPoint::new(30.0, 40.0)]);
        let pc = fit_principal_curve(&c, &cfg(5.0)).unwrap();
        assert_eq!(pc.degree, 1);
        assert!(pc.converged);
        assert!((pc.length() - 50.0).abs() < 1e-9);
        let ends = [pc.knots[0].point, pc.knots.last().unwrap().point];
        assert!(ends.iter().any(|e| e.distance(&MetricPoint::new(0.0, 0.0)) < 1e-9));
        assert!(ends.iter().any(|e| e.distance(&MetricPoint::new(30.0, 40.0)) < 1e-9));
    }

    #[test]
    fn collinear_cluster_is_a_fixed_point() {
        let pts: Vec<MetricPoint> =
            (0..5).map(|i| MetricPoint::new(10.0 + 20.0 * i as f64, 5.0 + 10.0 * i as f64)).collect();
        let pc = fit_principal_curve(&cluster(pts.clone()), &cfg(5.0)).unwrap();
        assert!(pc.converged);
        assert_eq!(pc.degree, 2);
        assert!(pc.final_distance() < 1e-12);
        let lp = fit_linear(&cluster(pts)).unwrap();
        for k in &pc.knots {
            assert!(lp.transform(&k.point).delta < 1e-6);
        }
        assert!((pc.length() - 40.0 * 5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn arc_beats_straight_line() {
        let pts = noisy_arc(7, 10, 100.0, 2.0);
        let pc = fit_principal_curve(&cluster(pts.clone()), &cfg(5.0)).unwrap();
        let d_curve = mean_squared_distance(&pc.knots, &pts);
        let d_line = linear_d(&pts);
        assert!(d_curve < d_line, "curve {d_curve} vs line {d_line}");
        for p in &pts {
            // residual bound is on the spline at the projection index, the
            // true distance can only be smaller
            assert!(project_onto_polyline(&pc.knots, p).distance_sq.sqrt() <= 5.0 + 1e-6);
        }
    }

    #[test]
    fn curve_is_unit_speed() {
        let pts = noisy_arc(3, 12, 150.0, 1.0);
        let pc = fit_principal_curve(&cluster(pts), &cfg(5.0)).unwrap();
        for w in pc.knots.windows(2) {
            let arc = w[1].lambda - w[0].lambda;
            assert!(arc <= 1.0 + 1e-9);
            assert!((w[0].point.distance(&w[1].point) - arc).abs() < 1e-3);
        }
    }

    #[test]
    fn anchor_counts_and_straight_spacing() {
        let pts: Vec<MetricPoint> = (0..4).map(|i| MetricPoint::new(25.0 * i as f64, 0.0)).collect();
        let pc = fit_principal_curve(&cluster(pts), &cfg(5.0)).unwrap();
        assert_eq!(pc.anchors.len(), 81);
        assert_eq!(pc.center_anchor, 40);
        let pc = build_anchors(pc, 100.0);
        assert_eq!(pc.anchors.len(), 9);
        for w in pc.anchors.windows(2) {
            assert!((w[0].distance(&w[1]) - 25.0).abs() < 1e-9);
            assert!(w[0].y.abs() < 1e-9);
        }
        let pc = build_anchors(pc, 0.0);
        assert_eq!(pc.anchors.len(), 1);
    }

    #[test]
    fn anchor_arc_gaps_do_not_exceed_spacing() {
        let pts = noisy_arc(11, 10, 80.0, 1.5);
        let pc = fit_principal_curve(&cluster(pts), &cfg(10.0)).unwrap();
        let pc = build_anchors(pc, 300.0);
        // dense arc sampling between neighbouring anchors
        for k in 0..pc.anchors.len() - 1 {
            let s0 = pc.center_lambda + (k as f64 - pc.center_anchor as f64) * pc.anchor_spacing;
            let mut arc = 0.0;
            let mut prev = point_at_arc(&pc.knots, s0);
            for j in 1..=500 {
                let q = point_at_arc(&pc.knots, s0 + pc.anchor_spacing * j as f64 / 500.0);
                arc += q.distance(&prev);
                prev = q;
            }
            assert!(arc <= pc.anchor_spacing + 1e-6, "gap {arc}");
            assert!(prev.distance(&pc.anchors[k + 1]) < 1e-6);
        }
    }

    fn straight_pattern() -> CurvedPattern {
        let pts: Vec<MetricPoint> = (-2..=2).map(|i| MetricPoint::new(25.0 * i as f64, 0.0)).collect();
        fit_principal_curve(&cluster(pts), &cfg(5.0)).unwrap()
    }

    #[test]
    fn transform_examples() {
        let pc = straight_pattern();
        let c = pc.transform(&MetricPoint::new(0.0, 0.0));
        assert!(c.gamma.abs() < 1e-9 && c.delta.abs() < 1e-9);
        let c = pc.transform(&MetricPoint::new(50.0, 30.0));
        assert!((c.gamma - 50.0).abs() < 1e-9 && (c.delta - 30.0).abs() < 1e-9);
        let c = pc.transform(&MetricPoint::new(62.0, 10.0));
        // candidates: (50,0) at sqrt(144+100), (75,0) at sqrt(169+100)
        assert!((c.gamma - 50.0).abs() < 1e-9);
        assert!((c.delta - 244f64.sqrt()).abs() < 1e-9);
        // equidistant between anchors 0 and 25: smaller progress wins
        let c = pc.transform(&MetricPoint::new(12.5, 3.0));
        assert!(c.gamma.abs() < 1e-9);
    }

    #[test]
    fn approximation_never_undercuts_exact_distance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let pts = noisy_arc(5, 9, 120.0, 2.0);
        let pc = build_anchors(fit_principal_curve(&cluster(pts), &cfg(5.0)).unwrap(), 400.0);
        let dense: Vec<MetricPoint> =
            (0..=8000).map(|j| point_at_arc(&pc.knots, pc.center_lambda - 400.0 + 800.0 * j as f64 / 8000.0)).collect();
        for _ in 0..500 {
            let p = MetricPoint::new(rng.random_range(-200.0..300.0), rng.random_range(-200.0..300.0));
            let exact = dense.iter().map(|q| q.distance(&p)).fold(f64::INFINITY, f64::min);
            let approx = pc.transform(&p).delta;
            assert!(approx + 1e-6 >= exact - pc.anchor_spacing / 2.0);
            assert!(approx + 1e-6 >= exact);
            // the nearest anchor is at most half a spacing of arc from the nearest curve point
            assert!(approx <= exact + pc.anchor_spacing / 2.0 + 0.1, "{p:?}: approx {approx} exact {exact}");
        }
    }

    #[test]
    fn collinear_curve_agrees_with_linear_pattern() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<MetricPoint> =
            (0..6).map(|i| MetricPoint::new(3.0 + 18.0 * i as f64, -7.0 + 9.0 * i as f64)).collect();
        let lp = fit_linear(&cluster(pts.clone())).unwrap();
        let pc = build_anchors(fit_principal_curve(&cluster(pts), &cfg(5.0)).unwrap(), 500.0);
        let normal = MetricPoint::new(-lp.direction.y, lp.direction.x);
        for _ in 0..300 {
            // points whose projection falls on an anchor: distances must agree exactly
            let k = rng.random_range(0..pc.anchors.len());
            let off = rng.random_range(-100.0..100.0);
            let p = pc.anchors[k] + normal * off;
            let (a, b) = (lp.transform(&p), pc.transform(&p));
            assert!((a.gamma - b.gamma).abs() <= 12.5 + 1e-9);
            assert!((a.delta - b.delta).abs() < 1e-6, "{a:?} vs {b:?}");
            // arbitrary points: progress within half an anchor step
            let q = MetricPoint::new(rng.random_range(-300.0..400.0), rng.random_range(-300.0..300.0));
            if lp.transform(&q).gamma < 480.0 {
                assert!((lp.transform(&q).gamma - pc.transform(&q).gamma).abs() <= 12.5 + 1e-6);
            }
        }
    }

    #[test]
    fn distance_mostly_non_increasing() {
        let mut monotone = 0;
        let trials = 100;
        for seed in 0..trials {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
            let n = rng.random_range(3..15);
            let radius = rng.random_range(60.0..400.0);
            let sigma = rng.random_range(0.5..6.0);
            let smooth = [5.0, 10.0, 25.0][rng.random_range(0..3)];
            let pts = noisy_arc(seed, n, radius, sigma);
            let pc = fit_principal_curve(&cluster(pts), &cfg(smooth)).unwrap();
            if pc.distance_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12) {
                monotone += 1;
            }
        }
        assert!(monotone as f64 >= 0.95 * trials as f64, "monotone in {monotone}/{trials}");
    }
}
