//! Geometry checked against brute-force oracles that share nothing with the
//! implementation beyond the cell vertex lists.

mod common;

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaysim::hexgeom::{boundary_intersection, HexGrid, Point, RelayId};

use common::{oracle_candidates, oracle_crossing, random_pair, winding_number};

/// Unique undirected edges by rounding endpoints to a fixed lattice.
fn oracle_edge_count(grid: &HexGrid) -> (usize, HashMap<((i64, i64), (i64, i64)), usize>) {
    let key = |p: Point| ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64);
    let mut refs: HashMap<((i64, i64), (i64, i64)), usize> = HashMap::new();
    for c in &grid.cells {
        for i in 0..6 {
            let (a, b) = (key(c.vertices[i]), key(c.vertices[(i + 1) % 6]));
            let k = if a < b { (a, b) } else { (b, a) };
            *refs.entry(k).or_default() += 1;
        }
    }
    (refs.len(), refs)
}

#[test]
fn edge_dedup_matches_vertex_pair_oracle() {
    for n in [1, 2, 3, 7, 19, 20, 37, 50] {
        let g = HexGrid::build(n, 1.0).unwrap();
        let (count, refs) = oracle_edge_count(&g);
        assert_eq!(g.edges.len(), count, "n = {n}");
        assert!(refs.values().all(|&r| r == 1 || r == 2));
        let shared = refs.values().filter(|&&r| r == 2).count();
        assert_eq!(g.edges.iter().filter(|e| e.is_shared()).count(), shared);
    }
}

#[test]
fn twenty_cell_patch_counts() {
    let g = HexGrid::build(20, 1.0).unwrap();
    let (count, refs) = oracle_edge_count(&g);
    // Frozen from the oracle: 43 adjacent pairs among the 20 cells.
    assert_eq!(count, 77);
    assert_eq!(refs.values().filter(|&&r| r == 2).count(), 43);
    assert_eq!(g.edges.len(), 77);
    assert_eq!(g.n_relays(), 77);
    assert_eq!(g.base_stations.len(), 20);
}

#[test]
fn edge_reference_counts() {
    for n in [1, 7, 20] {
        let g = HexGrid::build(n, 1.3).unwrap();
        let mut refs = vec![0usize; g.edges.len()];
        for c in &g.cells {
            for e in c.edge_ids {
                refs[e.0] += 1;
            }
        }
        assert_eq!(refs.iter().sum::<usize>(), 6 * n);
        for e in &g.edges {
            assert_eq!(refs[e.id.0], e.cells.len());
            for &c in &e.cells {
                assert!(g.cell(c).edge_ids.contains(&e.id));
            }
        }
        // Exactly one relay per edge.
        let relays: HashSet<RelayId> = g.edges.iter().map(|e| e.relay_id).collect();
        assert_eq!(relays.len(), g.edges.len());
    }
}

#[test]
fn grid_is_connected() {
    let g = HexGrid::build(20, 1.0).unwrap();
    let mut seen = vec![false; g.cells.len()];
    let mut stack = vec![g.cells[0].id];
    seen[0] = true;
    while let Some(c) = stack.pop() {
        for n in g.neighbors(c) {
            if !seen[n.0] {
                seen[n.0] = true;
                stack.push(n);
            }
        }
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn cell_of_matches_winding_number() {
    let g = HexGrid::build(20, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20_000 {
        let q = Point::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        let expect = g
            .cells
            .iter()
            .find(|c| winding_number(&c.vertices, q) != 0)
            .map(|c| c.id);
        assert_eq!(g.cell_of(q), expect, "q = {q:?}");
    }
}

#[test]
fn boundary_intersection_matches_segment_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [1, 7, 20] {
        let g = HexGrid::build(n, 1.0).unwrap();
        for _ in 0..10_000 {
            let (src, dst) = random_pair(&g, &mut rng);
            let cell = g.cell(g.cell_of(src).unwrap());
            let (edge, p) = boundary_intersection(cell, src, dst).unwrap();
            let (slot, op) = oracle_crossing(cell, src, dst);
            assert_eq!(edge, cell.edge_ids[slot]);
            assert!(p.dist(op) < 1e-9, "{p:?} vs {op:?}");
            // p lies on the segment and on the edge.
            let (a, b) = cell.edge_segment(slot);
            assert!(dist_to_segment(p, src, dst) < 1e-9);
            assert!(dist_to_segment(p, a, b) < 1e-9);
        }
    }
}

fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let t = (p.sub(a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

#[test]
fn candidate_relays_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for n in [1, 7, 20] {
        let g = HexGrid::build(n, 1.0).unwrap();
        for _ in 0..10_000 {
            let (src, dst) = random_pair(&g, &mut rng);
            let got = g.candidate_relays(src, dst).unwrap();
            let want = oracle_candidates(&g, src, dst);
            assert_eq!(got.relays, want);
            let distinct: HashSet<_> = got.relays.iter().collect();
            assert_eq!(distinct.len(), 3);
        }
    }
}

/// The worked example: a cell `abcdef` with the line to the receiver
/// leaving through `bc`; the candidates are the relays on `bc`, `ab`, `cd`.
#[test]
fn worked_example_candidates() {
    let g = HexGrid::build(7, 1.0).unwrap();
    let cell = g.cell(g.cell_of(Point::new(0.0, 0.0)).unwrap());
    // Label a = vertex 0, b = vertex 1, c = vertex 2, d = vertex 3.
    let relay_on = |i: usize| g.edge(cell.edge_ids[i]).relay_id;
    let (r1, r2, r3) = (relay_on(0), relay_on(1), relay_on(2));
    let bc_mid = cell.vertices[1].add(cell.vertices[2]).scale(0.5);
    let m1 = Point::new(0.2, -0.1);
    let m2 = m1.add(bc_mid.sub(m1).scale(2.5));
    assert_ne!(g.cell_of(m2), Some(cell.id));
    let c = g.candidate_relays(m1, m2).unwrap();
    assert_eq!(c.relays, [r2, r1, r3]);
    assert_eq!(c.crossed_edge, cell.edge_ids[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Rotating source and destination by 60° about the central cell's
    /// center shifts every candidate one slot around that cell.
    #[test]
    fn rotation_equivariance(
        r in 0.0f64..0.8,
        theta in 0.0f64..std::f64::consts::TAU,
        dist in 1.0f64..6.0,
        phi in 0.0f64..std::f64::consts::TAU,
        turns in 1usize..6,
    ) {
        let g = HexGrid::build(20, 1.0).unwrap();
        let cell = &g.cells[0];
        let src = Point::new(r * theta.cos(), r * theta.sin());
        let dst = src.add(Point::new(dist * phi.cos(), dist * phi.sin()));
        prop_assume!(!cell.contains(dst));
        let slot_of = |rid: RelayId| cell.slot_of_edge(g.relay_edge(rid).id).unwrap();
        let before = g.candidate_relays(src, dst).unwrap();
        let pivot = cell.center;
        let angle = (60.0 * turns as f64).to_radians();
        let after = g
            .candidate_relays(src.rotate_about(pivot, angle), dst.rotate_about(pivot, angle))
            .unwrap();
        for k in 0..3 {
            prop_assert_eq!((slot_of(before.relays[k]) + turns) % 6, slot_of(after.relays[k]));
        }
    }

    #[test]
    fn crossing_point_on_both_segments(
        cell_idx in 0usize..20,
        u in 0.0f64..1.0, v in 0.0f64..1.0,
        phi in 0.0f64..std::f64::consts::TAU,
        len in 1.0f64..10.0,
        radius in 0.01f64..100.0,
    ) {
        let g = HexGrid::build(20, radius).unwrap();
        let cell = &g.cells[cell_idx];
        let (lo, hi) = cell.bounding_box();
        let src = Point::new(lo.x + u * (hi.x - lo.x), lo.y + v * (hi.y - lo.y));
        prop_assume!(cell.contains_strictly(src));
        let dst = src.add(Point::new(phi.cos(), phi.sin()).scale(len * 2.0 * radius));
        let (edge, p) = boundary_intersection(cell, src, dst).unwrap();
        let slot = cell.slot_of_edge(edge).unwrap();
        let (a, b) = cell.edge_segment(slot);
        let tol = 1e-9 * radius;
        prop_assert!(dist_to_segment(p, src, dst) <= tol);
        prop_assert!(dist_to_segment(p, a, b) <= tol);
    }
}
