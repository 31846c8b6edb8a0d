//! Convex polygons in the (consumer, producer) plane.

use serde::Serialize;

use crate::model::SurplusPoint;

/// Points closer than this are merged; a vertex closer than this to the line
/// through its neighbours is dropped.
pub const VERTEX_TOL: f64 = 1e-9;

/// Convex polygon stored counterclockwise from its lowest leftmost vertex.
/// One or two vertices encode a point or a segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurplusPolygon {
    vertices: Vec<SurplusPoint>,
    /// Polytope point attaining each vertex, when known.
    #[serde(skip)]
    witnesses: Vec<Option<Vec<f64>>>,
}

fn cross(o: SurplusPoint, a: SurplusPoint, b: SurplusPoint) -> f64 {
    (a.consumer - o.consumer) * (b.producer - o.producer) - (a.producer - o.producer) * (b.consumer - o.consumer)
}

fn seg_dist(p: SurplusPoint, a: SurplusPoint, b: SurplusPoint) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.consumer * ab.consumer + ab.producer * ab.producer;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let ap = p.sub(a);
    let t = ((ap.consumer * ab.consumer + ap.producer * ab.producer) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

impl SurplusPolygon {
    pub fn from_points(points: &[SurplusPoint]) -> Self {
        Self::from_witnessed(points.iter().map(|p| (*p, None)).collect())
    }

    pub fn singleton(p: SurplusPoint) -> Self {
        Self { vertices: vec![p], witnesses: vec![None] }
    }

    /// Monotone-chain hull with dedup and collinear pruning at [`VERTEX_TOL`].
    pub(crate) fn from_witnessed(mut pts: Vec<(SurplusPoint, Option<Vec<f64>>)>) -> Self {
        pts.sort_by(|a, b| {
            a.0.consumer.total_cmp(&b.0.consumer).then(a.0.producer.total_cmp(&b.0.producer))
        });
        let mut uniq: Vec<(SurplusPoint, Option<Vec<f64>>)> = Vec::with_capacity(pts.len());
        for (p, w) in pts {
            if let Some(dup) = uniq.iter_mut().find(|(q, _)| q.dist(p) <= VERTEX_TOL) {
                if dup.1.is_none() {
                    dup.1 = w;
                }
                continue;
            }
            uniq.push((p, w));
        }
        if uniq.len() <= 2 {
            let (vertices, witnesses) = uniq.into_iter().unzip();
            return Self { vertices, witnesses };
        }
        let n = uniq.len();
        let keeps_turn = |hull: &[usize], next: usize| {
            let o = uniq[hull[hull.len() - 2]].0;
            let a = uniq[hull[hull.len() - 1]].0;
            let b = uniq[next].0;
            let base = o.dist(b);
            cross(o, a, b) > VERTEX_TOL * base.max(f64::MIN_POSITIVE)
        };
        let mut lower: Vec<usize> = Vec::new();
        for i in 0..n {
            while lower.len() >= 2 && !keeps_turn(&lower, i) {
                lower.pop();
            }
            lower.push(i);
        }
        let mut upper: Vec<usize> = Vec::new();
        for i in (0..n).rev() {
            while upper.len() >= 2 && !keeps_turn(&upper, i) {
                upper.pop();
            }
            upper.push(i);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        // Start at the lowest of the leftmost vertices, treating consumer
        // values within tolerance as equal so the order survives rounding.
        let left = lower.iter().map(|&i| uniq[i].0.consumer).fold(f64::INFINITY, f64::min);
        let start = (0..lower.len())
            .filter(|&s| uniq[lower[s]].0.consumer <= left + VERTEX_TOL)
            .min_by(|&a, &b| uniq[lower[a]].0.producer.total_cmp(&uniq[lower[b]].0.producer))
            .unwrap_or(0);
        lower.rotate_left(start);
        let (vertices, witnesses) = lower.into_iter().map(|i| uniq[i].clone()).unzip();
        Self { vertices, witnesses }
    }

    pub fn vertices(&self) -> &[SurplusPoint] {
        &self.vertices
    }

    pub fn witnesses(&self) -> &[Option<Vec<f64>>] {
        &self.witnesses
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `β·c + (1−β)·p` applied to every vertex.
    pub fn affine(&self, beta: f64, c: SurplusPoint) -> Self {
        // a positive scaling keeps convexity and order, so no new hull
        if beta >= 1.0 {
            return Self::singleton(c);
        }
        let vertices = self.vertices.iter().map(|p| c.scale(beta).add(p.scale(1.0 - beta))).collect();
        Self { vertices, witnesses: self.witnesses.clone() }
    }

    /// Negative inside (depth to the nearest edge line), positive outside
    /// (Euclidean distance to the boundary).
    pub fn signed_distance(&self, p: SurplusPoint) -> f64 {
        let v = &self.vertices;
        match v.len() {
            0 => f64::INFINITY,
            1 => p.dist(v[0]),
            2 => seg_dist(p, v[0], v[1]),
            n => {
                let mut worst = f64::NEG_INFINITY;
                for i in 0..n {
                    let (a, b) = (v[i], v[(i + 1) % n]);
                    worst = worst.max(-cross(a, b, p) / a.dist(b));
                }
                if worst <= 0.0 {
                    worst
                } else {
                    (0..n).map(|i| seg_dist(p, v[i], v[(i + 1) % n])).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    pub fn contains(&self, p: SurplusPoint, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }

    /// Hausdorff distance; for convex sets it is attained at a vertex.
    pub fn hausdorff(&self, other: &SurplusPolygon) -> f64 {
        let one_way = |a: &SurplusPolygon, b: &SurplusPolygon| {
            a.vertices.iter().map(|p| b.signed_distance(*p).max(0.0)).fold(0.0, f64::max)
        };
        one_way(self, other).max(one_way(other, self))
    }

    fn extreme(&self, f: impl Fn(&SurplusPoint) -> f64, max: bool) -> f64 {
        let it = self.vertices.iter().map(f);
        if max {
            it.fold(f64::NEG_INFINITY, f64::max)
        } else {
            it.fold(f64::INFINITY, f64::min)
        }
    }

    pub fn max_producer(&self) -> f64 {
        self.extreme(|p| p.producer, true)
    }

    pub fn min_producer(&self) -> f64 {
        self.extreme(|p| p.producer, false)
    }

    pub fn max_consumer(&self) -> f64 {
        self.extreme(|p| p.consumer, true)
    }

    pub fn min_consumer(&self) -> f64 {
        self.extreme(|p| p.consumer, false)
    }

    pub fn centroid(&self) -> SurplusPoint {
        let n = self.vertices.len().max(1) as f64;
        self.vertices.iter().fold(SurplusPoint::default(), |a, p| a.add(*p)).scale(1.0 / n)
    }

    /// Copy scaled by `factor` about the vertex centroid.
    pub fn scaled(&self, factor: f64) -> Self {
        let c = self.centroid();
        Self::from_points(&self.vertices.iter().map(|p| c.add(p.sub(c).scale(factor))).collect::<Vec<_>>())
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return 0.0;
        }
        (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a.consumer * b.producer - b.consumer * a.producer
            })
            .sum::<f64>()
            / 2.0
    }
}
