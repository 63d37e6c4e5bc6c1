//! Multiresolution Reeb graphs over the normalised axial height, and a
//! coarse-to-fine matching score between two of them.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::curve::Point2;
use crate::mesh::{revolve, validate_mesh, TriangleMesh, BASE_INNER_RADIUS_MM, BASE_THICKNESS_MM};

/// Levels `0..DEFAULT_RESOLUTIONS`, so 16 intervals at the finest.
pub const DEFAULT_RESOLUTIONS: usize = 5;
pub const DEFAULT_AREA_WEIGHT: f64 = 0.5;
pub const BAG_RADIUS_MM: f64 = 25.0;
pub const BAG_BASE_RADIUS_MM: f64 = 30.0;

#[derive(Debug, Error, PartialEq)]
pub enum ReebError {
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("mesh has no axial extent")]
    Flat,
    #[error("need at least one resolution")]
    NoResolutions,
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("weight {0} outside [0, 1]")]
    BadWeight(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrgNode {
    /// Interval index within the level.
    pub interval: usize,
    /// Fraction of total surface area.
    pub area: f64,
    /// Fraction of the height range covered by the interval.
    pub range: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub neighbours: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MRGraph {
    pub levels: Vec<Vec<MrgNode>>,
}

impl MRGraph {
    pub fn resolutions(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &[MrgNode] {
        self.levels.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Area fraction of a triangle with sorted vertex heights `h` lying below `c`.
fn fraction_below(h: [f64; 3], c: f64) -> f64 {
    let [h0, h1, h2] = h;
    if c <= h0 {
        0.0
    } else if c >= h2 {
        1.0
    } else if c <= h1 {
        (c - h0) * (c - h0) / ((h1 - h0) * (h2 - h0))
    } else {
        1.0 - (h2 - c) * (h2 - c) / ((h2 - h1) * (h2 - h0))
    }
}

fn slab_of(mu: f64, k: usize) -> usize {
    ((mu * k as f64).floor() as usize).min(k - 1)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so labels do not depend on union order
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Per-level clipping of triangles into slabs.
struct Level {
    /// `(triangle, slab, area)` sorted by triangle then slab.
    pieces: Vec<(u32, u32, f64)>,
    first: Vec<u32>,
    component: Vec<usize>,
}

impl Level {
    fn piece(&self, t: usize, s: usize) -> Option<usize> {
        let start = self.first[t] as usize;
        let end = self.first[t + 1] as usize;
        (start..end).find(|&i| self.pieces[i].1 as usize == s)
    }
}

pub fn build_mrg(m: &TriangleMesh, resolutions: usize) -> Result<MRGraph, ReebError> {
    if resolutions == 0 {
        return Err(ReebError::NoResolutions);
    }
    if !validate_mesh(m).watertight {
        return Err(ReebError::NotWatertight);
    }
    let (lo, hi) = m
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v[2]), hi.max(v[2]))
        });
    if !(hi > lo) {
        return Err(ReebError::Flat);
    }
    let mu: Vec<f64> = m.vertices.iter().map(|v| (v[2] - lo) / (hi - lo)).collect();
    let areas: Vec<f64> = (0..m.triangles.len()).map(|t| m.triangle_area(t)).collect();
    let total: f64 = areas.iter().sum();
    let heights: Vec<[f64; 3]> = m
        .triangles
        .iter()
        .map(|t| {
            let mut h = t.map(|i| mu[i as usize]);
            h.sort_by(f64::total_cmp);
            h
        })
        .collect();

    let mut edges: HashMap<(u32, u32), Vec<u32>> =
        HashMap::with_capacity(m.triangles.len() * 3 / 2);
    for (ti, t) in m.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edges
                .entry((a.min(b), a.max(b)))
                .or_default()
                .push(ti as u32);
        }
    }
    let mut edge_list: Vec<((u32, u32), Vec<u32>)> = edges.into_iter().collect();
    edge_list.sort_unstable_by_key(|(e, _)| *e);

    let mut levels: Vec<Level> = Vec::with_capacity(resolutions);
    let mut graph = MRGraph { levels: Vec::new() };
    for l in 0..resolutions {
        let k = 1usize << l;
        let width = 1.0 / k as f64;
        let mut pieces = Vec::new();
        let mut first = Vec::with_capacity(m.triangles.len() + 1);
        for (t, h) in heights.iter().enumerate() {
            first.push(pieces.len() as u32);
            if h[2] - h[0] <= 0.0 {
                pieces.push((t as u32, slab_of(h[0], k) as u32, areas[t]));
                continue;
            }
            for s in slab_of(h[0], k)..=slab_of(h[2], k) {
                let f = fraction_below(*h, (s + 1) as f64 * width)
                    - fraction_below(*h, s as f64 * width);
                if f > 0.0 {
                    pieces.push((t as u32, s as u32, areas[t] * f));
                }
            }
        }
        first.push(pieces.len() as u32);
        let mut level = Level {
            pieces,
            first,
            component: Vec::new(),
        };

        let mut uf = UnionFind::new(level.pieces.len());
        let mut links: Vec<(usize, usize)> = Vec::new();
        for ((a, b), tris) in &edge_list {
            let (e0, e1) = {
                let (x, y) = (mu[*a as usize], mu[*b as usize]);
                (x.min(y), x.max(y))
            };
            let slabs: Vec<usize> = if e1 - e0 <= 0.0 {
                vec![slab_of(e0, k)]
            } else {
                (slab_of(e0, k)..=slab_of(e1, k))
                    .filter(|&s| (e1.min((s + 1) as f64 * width) - e0.max(s as f64 * width)) > 0.0)
                    .collect()
            };
            for s in slabs {
                let ids: Vec<usize> = tris
                    .iter()
                    .filter_map(|&t| level.piece(t as usize, s))
                    .collect();
                for w in ids.windows(2) {
                    uf.union(w[0], w[1]);
                }
            }
            // pieces either side of a slab boundary the edge touches
            for s in slab_of(e0, k).saturating_sub(1)..slab_of(e1, k).min(k - 1) {
                let boundary = (s + 1) as f64 * width;
                if boundary < e0 || boundary > e1 {
                    continue;
                }
                let below: Vec<usize> = tris
                    .iter()
                    .filter_map(|&t| level.piece(t as usize, s))
                    .collect();
                let above: Vec<usize> = tris
                    .iter()
                    .filter_map(|&t| level.piece(t as usize, s + 1))
                    .collect();
                for &b in &below {
                    for &a in &above {
                        links.push((b, a));
                    }
                }
            }
        }

        // components numbered by slab, then by first piece
        let roots: Vec<usize> = (0..level.pieces.len()).map(|i| uf.find(i)).collect();
        let mut order: Vec<(u32, usize)> = Vec::new();
        let mut seen: HashMap<usize, ()> = HashMap::new();
        for (i, &r) in roots.iter().enumerate() {
            if seen.insert(r, ()).is_none() {
                order.push((level.pieces[i].1, r));
            }
        }
        order.sort_by_key(|&(s, r)| (s, r));
        let label: HashMap<usize, usize> = order
            .iter()
            .enumerate()
            .map(|(n, &(_, r))| (r, n))
            .collect();
        level.component = roots.iter().map(|r| label[r]).collect();

        let mut nodes: Vec<MrgNode> = order
            .iter()
            .map(|&(s, _)| MrgNode {
                interval: s as usize,
                area: 0.0,
                range: width,
                parent: None,
                children: Vec::new(),
                neighbours: Vec::new(),
            })
            .collect();
        for (i, p) in level.pieces.iter().enumerate() {
            nodes[level.component[i]].area += p.2;
        }
        for n in &mut nodes {
            n.area /= total;
        }
        for t in 0..m.triangles.len() {
            for i in level.first[t] as usize + 1..level.first[t + 1] as usize {
                links.push((i - 1, i));
            }
        }
        for (i, j) in links {
            let (a, b) = (level.component[i], level.component[j]);
            if a != b {
                nodes[a].neighbours.push(b);
                nodes[b].neighbours.push(a);
            }
        }
        for n in &mut nodes {
            n.neighbours.sort_unstable();
            n.neighbours.dedup();
        }
        if let Some(prev) = levels.last() {
            let mut parent: Vec<Option<usize>> = vec![None; nodes.len()];
            for (i, p) in level.pieces.iter().enumerate() {
                let c = level.component[i];
                if parent[c].is_none() {
                    let up = prev
                        .piece(p.0 as usize, p.1 as usize / 2)
                        .expect("a piece with area has a piece in the enclosing slab");
                    parent[c] = Some(prev.component[up]);
                }
            }
            let coarse = graph.levels.last_mut().expect("previous level");
            for (c, p) in parent.into_iter().enumerate() {
                let p = p.expect("every node has pieces");
                nodes[c].parent = Some(p);
                coarse[p].children.push(c);
            }
        }
        graph.levels.push(nodes);
        levels.push(level);
    }
    Ok(graph)
}

fn pair_sim(a: &MrgNode, b: &MrgNode, w: f64, norm: f64) -> f64 {
    w * a.area.min(b.area) + (1.0 - w) * a.range.min(b.range) * norm
}

/// Coarse-to-fine greedy matching; the score is summed over the finest level
/// and normalised so that a graph scores exactly 1 against itself.
pub fn similarity(a: &MRGraph, b: &MRGraph, w: f64) -> Result<f64, ReebError> {
    if a.resolutions() != b.resolutions() {
        return Err(ReebError::ResolutionMismatch(
            a.resolutions(),
            b.resolutions(),
        ));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(ReebError::BadWeight(w));
    }
    let levels = a.resolutions();
    let mut matched: Vec<(usize, usize)> = Vec::new();
    let mut score = 0.0;
    for l in 0..levels {
        let (la, lb) = (&a.levels[l], &b.levels[l]);
        let span = |nodes: &[MrgNode]| nodes.iter().map(|n| n.range).sum::<f64>();
        let norm = 2.0 / (span(la) + span(lb));
        let mut candidates: Vec<(f64, usize, usize)> = if l == 0 {
            (0..la.len())
                .flat_map(|i| (0..lb.len()).map(move |j| (i, j)))
                .map(|(i, j)| (pair_sim(&la[i], &lb[j], w, norm), i, j))
                .collect()
        } else {
            matched
                .iter()
                .flat_map(|&(pi, pj)| {
                    let ca = &a.levels[l - 1][pi].children;
                    let cb = &b.levels[l - 1][pj].children;
                    ca.iter()
                        .flat_map(move |&i| cb.iter().map(move |&j| (i, j)))
                })
                .map(|(i, j)| (pair_sim(&la[i], &lb[j], w, norm), i, j))
                .collect()
        };
        candidates.sort_by(|x, y| {
            y.0.total_cmp(&x.0)
                .then((x.1.min(x.2), x.1.max(x.2)).cmp(&(y.1.min(y.2), y.1.max(y.2))))
                .then(x.1.cmp(&y.1))
        });
        let mut used_a = vec![false; la.len()];
        let mut used_b = vec![false; lb.len()];
        matched.clear();
        score = 0.0;
        for (s, i, j) in candidates {
            if !used_a[i] && !used_b[j] {
                used_a[i] = true;
                used_b[j] = true;
                matched.push((i, j));
                score += s;
            }
        }
    }
    Ok(score.clamp(0.0, 1.0))
}

/// Spherical membrane of `radius` truncated where its cross-section meets the
/// 15 mm mount, standing on a 1 mm plate of `base_radius`.
pub fn reference_bag(
    radius: f64,
    base_radius: f64,
    arc_samples: usize,
    angular_segments: usize,
) -> TriangleMesh {
    let r0 = BASE_INNER_RADIUS_MM.min(radius);
    let centre = (radius * radius - r0 * r0).sqrt();
    let start = (r0 / radius).asin();
    let start = if centre > 0.0 { start } else { PI / 2.0 };
    let mut chain = vec![
        Point2::new(0.0, -BASE_THICKNESS_MM),
        Point2::new(base_radius, -BASE_THICKNESS_MM),
        Point2::new(base_radius, 0.0),
    ];
    let n = arc_samples.max(2);
    // polar angle from the top pole, sweeping from the mount up to the pole
    let start_polar = PI - start;
    for i in 0..=n {
        let phi = start_polar * (1.0 - i as f64 / n as f64);
        chain.push(Point2::new(radius * phi.sin(), centre + radius * phi.cos()));
    }
    let last = chain.len() - 1;
    chain[last] = Point2::new(0.0, centre + radius);
    revolve(&chain, angular_segments).expect("bag chain is valid")
}

pub fn default_bag() -> TriangleMesh {
    reference_bag(BAG_RADIUS_MM, BAG_BASE_RADIUS_MM, 64, 32)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// UV sphere with rings every `180 / rings` degrees of latitude.
    pub fn sphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
        let chain: Vec<Point2> = (0..=rings)
            .map(|i| {
                let phi = PI * (1.0 - i as f64 / rings as f64);
                Point2::new(radius * phi.sin(), radius * phi.cos())
            })
            .map(|p| {
                if p.x < 1e-12 {
                    Point2::new(0.0, p.y)
                } else {
                    p
                }
            })
            .collect();
        revolve(&chain, segments).unwrap()
    }

    pub fn closed_cylinder(
        radius: f64,
        height: f64,
        rings: usize,
        segments: usize,
    ) -> TriangleMesh {
        let mut chain = vec![Point2::new(0.0, 0.0)];
        for i in 0..=rings {
            chain.push(Point2::new(radius, height * i as f64 / rings as f64));
        }
        chain.push(Point2::new(0.0, height));
        revolve(&chain, segments).unwrap()
    }

    pub fn spheroid(a: f64, c: f64, rings: usize, segments: usize) -> TriangleMesh {
        let chain: Vec<Point2> = (0..=rings)
            .map(|i| {
                let phi = PI * (1.0 - i as f64 / rings as f64);
                Point2::new(a * phi.sin(), c * phi.cos())
            })
            .map(|p| {
                if p.x < 1e-12 {
                    Point2::new(0.0, p.y)
                } else {
                    p
                }
            })
            .collect();
        revolve(&chain, segments).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn level_sums(g: &MRGraph) {
        for level in &g.levels {
            let s: f64 = level.iter().map(|n| n.area).sum();
            assert!((s - 1.0).abs() < 1e-9, "level sum {s}");
        }
    }

    #[test]
    fn fraction_below_matches_strip_integration() {
        let h = [0.1, 0.4, 0.9];
        for c in [0.0, 0.2, 0.4, 0.55, 0.8, 1.0] {
            // numeric oracle: triangle (0,h0) (1,h1) (0.3,h2) area below c by fine grid
            let tri = [(0.0, h[0]), (1.0, h[1]), (0.3, h[2])];
            let n = 600;
            let (mut inside, mut below) = (0, 0);
            for i in 0..n {
                for j in 0..n {
                    let (x, y) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                    let d = |p: (f64, f64), q: (f64, f64)| {
                        (q.0 - p.0) * (y - p.1) - (q.1 - p.1) * (x - p.0)
                    };
                    let s = [d(tri[0], tri[1]), d(tri[1], tri[2]), d(tri[2], tri[0])];
                    if s.iter().all(|v| *v >= 0.0) || s.iter().all(|v| *v <= 0.0) {
                        inside += 1;
                        if y < c {
                            below += 1;
                        }
                    }
                }
            }
            let oracle = below as f64 / inside as f64;
            assert!((fraction_below(h, c) - oracle).abs() < 5e-3, "c={c}");
        }
    }

    #[test]
    fn sphere_single_level() {
        let g = build_mrg(&sphere(1.0, 32, 32), 1).unwrap();
        assert_eq!(g.levels[0].len(), 1);
        assert!((g.levels[0][0].area - 1.0).abs() < 1e-12);
        assert_eq!(g.levels[0][0].range, 1.0);
    }

    #[test]
    fn sphere_levels_are_chains() {
        let g = build_mrg(&sphere(1.0, 48, 48), 4).unwrap();
        level_sums(&g);
        for (l, level) in g.levels.iter().enumerate() {
            assert_eq!(level.len(), 1 << l);
            for (i, n) in level.iter().enumerate() {
                assert_eq!(n.interval, i);
                let expected: Vec<usize> =
                    [i.checked_sub(1), Some(i + 1).filter(|&j| j < level.len())]
                        .into_iter()
                        .flatten()
                        .collect();
                assert_eq!(n.neighbours, expected);
            }
        }
    }

    #[test]
    fn children_sum_to_parent() {
        let g = build_mrg(&sphere(2.0, 40, 40), 5).unwrap();
        for l in 0..4 {
            for n in &g.levels[l] {
                let s: f64 = n.children.iter().map(|&c| g.levels[l + 1][c].area).sum();
                assert!((s - n.area).abs() < 1e-9);
            }
            for (c, n) in g.levels[l + 1].iter().enumerate() {
                assert!(g.levels[l][n.parent.unwrap()].children.contains(&c));
            }
        }
    }

    #[test]
    fn two_spheres_give_two_nodes_per_interval() {
        let mut m = sphere(1.0, 24, 24);
        m.append(&sphere(1.0, 24, 24).translated([5.0, 0.0, 0.0]));
        let g = build_mrg(&m, 4).unwrap();
        level_sums(&g);
        for (l, level) in g.levels.iter().enumerate() {
            assert_eq!(level.len(), 2 << l);
        }
    }

    #[test]
    fn offset_spheres_share_intervals_only_where_both_span() {
        let mut m = sphere(1.0, 24, 24);
        m.append(&sphere(1.0, 24, 24).translated([5.0, 0.0, 1.0]));
        // heights span [-1, 2]: quarters 0-2 hold the first sphere, 1-3 the second
        let g = build_mrg(&m, 3).unwrap();
        let counts: Vec<usize> = (0..4)
            .map(|s| g.levels[2].iter().filter(|n| n.interval == s).count())
            .collect();
        assert_eq!(counts, vec![1, 2, 2, 1]);
    }

    #[test]
    fn open_mesh_rejected() {
        let mut m = sphere(1.0, 8, 8);
        m.triangles.pop();
        assert_eq!(build_mrg(&m, 2).unwrap_err(), ReebError::NotWatertight);
        assert_eq!(
            build_mrg(&sphere(1.0, 8, 8), 0).unwrap_err(),
            ReebError::NoResolutions
        );
    }

    #[test]
    fn self_similarity_and_symmetry() {
        let a = build_mrg(&sphere(1.0, 30, 30), DEFAULT_RESOLUTIONS).unwrap();
        let b = build_mrg(&spheroid(1.0, 0.6, 30, 30), DEFAULT_RESOLUTIONS).unwrap();
        assert!((similarity(&a, &a, 0.5).unwrap() - 1.0).abs() < 1e-9);
        let ab = similarity(&a, &b, 0.5).unwrap();
        let ba = similarity(&b, &a, 0.5).unwrap();
        assert!((ab - ba).abs() < 1e-9);
        assert!(ab < 1.0 && ab > 0.0);
    }

    #[test]
    fn resolution_mismatch() {
        let a = build_mrg(&sphere(1.0, 8, 8), 2).unwrap();
        let b = build_mrg(&sphere(1.0, 8, 8), 3).unwrap();
        assert_eq!(
            similarity(&a, &b, 0.5),
            Err(ReebError::ResolutionMismatch(2, 3))
        );
    }

    #[test]
    fn cylinder_less_similar_than_mild_spheroid() {
        let sphere_g = build_mrg(&sphere(1.0, 90, 64), DEFAULT_RESOLUTIONS).unwrap();
        // equal area to the unit sphere: 2*pi*a*h + 2*pi*a^2 = 4*pi
        let (a, h) = (0.25, (2.0 - 0.0625) / 0.25);
        let cyl = build_mrg(&closed_cylinder(a, h, 64, 64), DEFAULT_RESOLUTIONS).unwrap();
        let obl = build_mrg(&spheroid(1.0, 0.9, 90, 64), DEFAULT_RESOLUTIONS).unwrap();
        let s_cyl = similarity(&sphere_g, &cyl, 0.5).unwrap();
        let s_obl = similarity(&sphere_g, &obl, 0.5).unwrap();
        assert!(s_cyl < s_obl, "{s_cyl} vs {s_obl}");
    }

    #[test]
    fn bag_is_watertight_and_self_similar() {
        let bag = default_bag();
        let r = validate_mesh(&bag);
        assert!(r.is_valid_solid());
        assert_eq!(r.euler_characteristic, 2);
        assert!((r.bbox_max[2] - (20.0 + 25.0)).abs() < 1e-9);
        let g = build_mrg(&bag, DEFAULT_RESOLUTIONS).unwrap();
        assert!((similarity(&g, &g, 0.5).unwrap() - 1.0).abs() < 1e-9);
    }
}
