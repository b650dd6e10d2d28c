//! Connected ridge curves and their salience.
//!
//! Ridge points are grouped into maximal 26-connected components of the
//! `(x, y, k)` lattice, so a ridge that drifts one pixel while stepping one
//! scale stays in one curve. Salience integrates the square root of the
//! strength over the curve's image-space projection with a unit step per
//! projected pixel; where several scales project onto one pixel, the largest
//! strength is used.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::image::PixelPoint;
use crate::ridge::{RidgePoint, RidgeVolume};

/// Disjoint-set forest with union by size and path halving.
#[derive(Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

/// A connected scale-space ridge curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "CurveRecord", into = "CurveRecord")]
pub struct RidgeCurve {
    /// Rank of the curve's first point in `(k, y, x)` scan order among all
    /// curves of the decomposition.
    pub id: usize,
    pub points: Vec<RidgePoint>,
    pub salience: f64,
    /// Distinct image-space pixels of the curve, in `(y, x)` order.
    pub projected: Vec<PixelPoint>,
}

#[derive(Serialize, Deserialize)]
struct CurveRecord {
    id: usize,
    salience: f64,
    points: Vec<RidgePoint>,
}

impl From<CurveRecord> for RidgeCurve {
    fn from(r: CurveRecord) -> Self {
        let projected = project(&r.points)
            .into_keys()
            .map(|(y, x)| PixelPoint::new(x, y))
            .collect();
        Self {
            id: r.id,
            points: r.points,
            salience: r.salience,
            projected,
        }
    }
}

impl From<RidgeCurve> for CurveRecord {
    fn from(c: RidgeCurve) -> Self {
        Self {
            id: c.id,
            salience: c.salience,
            points: c.points,
        }
    }
}

impl RidgeCurve {
    /// Builds a curve from its member points, computing projection and
    /// salience.
    pub fn from_points(id: usize, points: Vec<RidgePoint>) -> Self {
        let proj = project(&points);
        let salience = proj.values().map(|s| s.sqrt()).sum();
        let projected = proj.into_keys().map(|(y, x)| PixelPoint::new(x, y)).collect();
        Self {
            id,
            points,
            salience,
            projected,
        }
    }
}

/// Per-pixel maximum strength over the points projecting onto it, keyed by
/// `(y, x)`.
fn project(points: &[RidgePoint]) -> BTreeMap<(u32, u32), f64> {
    let mut proj = BTreeMap::new();
    for p in points {
        proj.entry((p.y, p.x))
            .and_modify(|s: &mut f64| *s = s.max(p.strength))
            .or_insert(p.strength);
    }
    proj
}

/// Discrete salience: the sum over projected pixels of the square root of
/// the largest strength projecting there, one pixel of arclength each.
pub fn salience(curve: &RidgeCurve) -> f64 {
    project(&curve.points).values().map(|s| s.sqrt()).sum()
}

/// Partitions a ridge volume into 26-connected curves, most salient first
/// (ties by ascending id).
pub fn extract_curves(volume: &RidgeVolume) -> Vec<RidgeCurve> {
    let mut points = volume.points.clone();
    points.sort_by_key(RidgePoint::key);
    let index: HashMap<(u32, u32, u32), usize> = points.iter().enumerate().map(|(i, p)| ((p.x, p.y, p.k), i)).collect();

    let mut uf = UnionFind::new(points.len());
    for (i, p) in points.iter().enumerate() {
        for dk in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dk, dy, dx) == (0, 0, 0) {
                        continue;
                    }
                    let (nx, ny, nk) = (p.x as i64 + dx, p.y as i64 + dy, p.k as i64 + dk);
                    if nx < 0 || ny < 0 || nk < 0 {
                        continue;
                    }
                    if let Some(&j) = index.get(&(nx as u32, ny as u32, nk as u32)) {
                        if j < i {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
    }

    // ids follow the first appearance of each component in scan order
    let mut root_to_id: HashMap<usize, usize> = HashMap::new();
    let mut members: Vec<Vec<RidgePoint>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let root = uf.find(i);
        let id = *root_to_id.entry(root).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[id].push(*p);
    }

    let mut curves: Vec<RidgeCurve> = members
        .into_iter()
        .enumerate()
        .map(|(id, pts)| RidgeCurve::from_points(id, pts))
        .collect();
    sort_by_salience(&mut curves);
    curves
}

/// Descending salience, then ascending id.
pub fn sort_by_salience(curves: &mut [RidgeCurve]) {
    curves.sort_by(|a, b| b.salience.total_cmp(&a.salience).then(a.id.cmp(&b.id)));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rp(x: u32, y: u32, k: u32, strength: f64) -> RidgePoint {
        RidgePoint { x, y, k, strength }
    }

    fn vol(points: Vec<RidgePoint>) -> RidgeVolume {
        RidgeVolume::new([64, 64, 9], points).unwrap()
    }

    #[test]
    fn empty_volume_gives_no_curves() {
        assert!(extract_curves(&RidgeVolume::empty(8, 8, 3)).is_empty());
    }

    #[test]
    fn single_voxel_salience_is_root_of_strength() {
        let curves = extract_curves(&vol(vec![rp(3, 4, 2, 4.0)]));
        assert_eq!(curves.len(), 1);
        assert_eq!(curves[0].salience, 2.0);
        assert_eq!(salience(&curves[0]), 2.0);
        assert_eq!(curves[0].projected, vec![PixelPoint::new(3, 4)]);
    }

    #[test]
    fn straight_ridge_uniform_strength() {
        let a: f64 = 0.0625;
        let pts: Vec<_> = (0..37).map(|y| rp(10, y, 3, a)).collect();
        let curves = extract_curves(&vol(pts));
        assert_eq!(curves.len(), 1);
        assert_eq!(curves[0].salience, 37.0 * a.sqrt());
    }

    #[test]
    fn scale_drift_stays_connected() {
        // one pixel sideways per scale step: 26-connected, not 6-connected
        let pts = vec![rp(5, 5, 2, 1.0), rp(6, 6, 3, 1.0), rp(7, 7, 4, 1.0)];
        assert_eq!(extract_curves(&vol(pts)).len(), 1);
        // a two-scale jump disconnects
        let pts = vec![rp(5, 5, 2, 1.0), rp(5, 6, 4, 1.0)];
        assert_eq!(extract_curves(&vol(pts)).len(), 2);
    }

    #[test]
    fn projection_takes_max_over_scales() {
        let pts = vec![rp(5, 5, 2, 1.0), rp(5, 5, 3, 9.0), rp(5, 6, 3, 4.0)];
        let curves = extract_curves(&vol(pts));
        assert_eq!(curves.len(), 1);
        assert_eq!(curves[0].salience, 3.0 + 2.0);
        assert_eq!(curves[0].projected.len(), 2);
        assert_eq!(curves[0].points.len(), 3);
    }

    #[test]
    fn ordering_and_ids() {
        // first-scanned component (k = 1) is weaker; it keeps id 0
        let pts = vec![rp(0, 0, 1, 1.0), rp(20, 20, 2, 16.0), rp(40, 40, 3, 1.0)];
        let curves = extract_curves(&vol(pts));
        let order: Vec<(usize, f64)> = curves.iter().map(|c| (c.id, c.salience)).collect();
        assert_eq!(order, vec![(1, 4.0), (0, 1.0), (2, 1.0)]);
    }

    #[test]
    fn parallel_ridges_are_separate_curves() {
        let mut pts = Vec::new();
        for y in 0..30 {
            pts.push(rp(10, y, 3, 1.0));
            pts.push(rp(11, y, 3, 0.5));
            pts.push(rp(20, y, 4, 2.0));
        }
        let curves = extract_curves(&vol(pts));
        assert_eq!(curves.len(), 2);
        let a: std::collections::HashSet<_> = curves[0].projected.iter().collect();
        assert!(curves[1].projected.iter().all(|p| !a.contains(p)));
    }

    #[test]
    fn json_round_trip_recomputes_projection() {
        let curves = extract_curves(&vol(vec![rp(1, 2, 1, 4.0), rp(2, 2, 1, 1.0)]));
        let json = serde_json::to_string(&curves).unwrap();
        assert_eq!(json, r#"[{"id":0,"salience":3.0,"points":[[1,2,1,4.0],[2,2,1,1.0]]}]"#);
        let back: Vec<RidgeCurve> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, curves);
    }
}
