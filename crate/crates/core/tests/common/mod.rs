//! Test-only oracles shared by the integration suites.

#![allow(dead_code)]

use rand::Rng;
use relaysim::hexgeom::{HexCell, HexGrid, Point, RelayId};

/// Winding number of the closed polygon `poly` around `q`.
pub fn winding_number(poly: &[Point], q: Point) -> i32 {
    let mut wn = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let side = (b.x - a.x) * (q.y - a.y) - (q.x - a.x) * (b.y - a.y);
        if a.y <= q.y {
            if b.y > q.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= q.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Proper intersection of segments `p1p2` and `p3p4` via Cramer's rule.
pub fn segment_intersection(p1: Point, p2: Point, p3: Point, p4: Point) -> Option<(f64, f64, Point)> {
    let d1 = (p2.x - p1.x, p2.y - p1.y);
    let d2 = (p4.x - p3.x, p4.y - p3.y);
    let det = d1.0 * (-d2.1) - d1.1 * (-d2.0);
    if det.abs() < 1e-15 {
        return None;
    }
    let rx = p3.x - p1.x;
    let ry = p3.y - p1.y;
    let t = (rx * (-d2.1) - ry * (-d2.0)) / det;
    let u = (d1.0 * ry - d1.1 * rx) / det;
    let eps = 1e-12;
    if (-eps..=1.0 + eps).contains(&t) && (-eps..=1.0 + eps).contains(&u) {
        Some((t, u, Point::new(p1.x + t * d1.0, p1.y + t * d1.1)))
    } else {
        None
    }
}

/// Slot of the edge crossed by `src → dst` and the crossing point, found by
/// testing all six edges.
pub fn oracle_crossing(cell: &HexCell, src: Point, dst: Point) -> (usize, Point) {
    let mut hits: Vec<(usize, f64, Point)> = (0..6)
        .filter_map(|i| {
            let a = cell.vertices[i];
            let b = cell.vertices[(i + 1) % 6];
            segment_intersection(src, dst, a, b).map(|(t, _, p)| (i, t, p))
        })
        .collect();
    assert!(!hits.is_empty(), "segment does not leave the cell");
    hits.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
    let (slot, _, p) = hits[0];
    // A crossing at a vertex touches two edges: prefer the lower edge id.
    let tied: Vec<usize> = hits
        .iter()
        .filter(|h| h.2.dist(p) < 1e-9)
        .map(|h| h.0)
        .collect();
    let best = tied
        .into_iter()
        .min_by_key(|&s| cell.edge_ids[s])
        .unwrap_or(slot);
    (best, p)
}

pub fn oracle_candidates(grid: &HexGrid, src: Point, dst: Point) -> [RelayId; 3] {
    let cell = grid
        .cells
        .iter()
        .find(|c| winding_number(&c.vertices, src) != 0)
        .expect("src inside grid");
    let (slot, _) = oracle_crossing(cell, src, dst);
    let relay = |s: usize| grid.edge(cell.edge_ids[s % 6]).relay_id;
    [relay(slot), relay(slot + 5), relay(slot + 1)]
}

/// A random source strictly inside a random cell and a destination outside
/// that cell, possibly outside the grid.
pub fn random_pair<R: Rng>(grid: &HexGrid, rng: &mut R) -> (Point, Point) {
    loop {
        let cell = &grid.cells[rng.random_range(0..grid.cells.len())];
        let (lo, hi) = cell.bounding_box();
        let src = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if !cell.contains_strictly(src) {
            continue;
        }
        let span = 2.0 + (grid.cells.len() as f64).sqrt() * 2.0;
        let dst = Point::new(rng.random_range(-span..span), rng.random_range(-span..span));
        if winding_number(&cell.vertices, dst) != 0 {
            continue;
        }
        return (src, dst);
    }
}
