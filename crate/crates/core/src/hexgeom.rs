//! Hexagonal cell lattice with relay stations on cell boundaries.
//!
//! Cells are pointy-top hexagons laid out as a spiral patch around the
//! origin cell in axial coordinates. Every unique boundary edge hosts exactly
//! one relay; an edge shared by two cells is stored once and referenced by
//! both. The grid is immutable after [`HexGrid::build`].

use std::fmt;

use thiserror::Error;

/// Relative tolerance for all point-on-segment and containment tests.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    /// Source and destination lie in the same cell; no relay is involved.
    #[error("source and destination are in the same cell {0}")]
    SameCell(CellId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelayId(pub usize);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}", self.0)
    }
}

impl fmt::Display for RelayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    /// Rotates counterclockwise about `pivot` by `angle` radians.
    pub fn rotate_about(self, pivot: Point, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        let d = self.sub(pivot);
        Point::new(pivot.x + c * d.x - s * d.y, pivot.y + s * d.x + c * d.y)
    }
}

#[derive(Debug, Clone)]
pub struct HexCell {
    pub id: CellId,
    /// Axial coordinate of the cell in the lattice.
    pub axial: (i32, i32),
    pub center: Point,
    /// Center-to-vertex distance.
    pub radius: f64,
    /// Counterclockwise; vertex `i` sits at angle `30° + 60°·i`.
    pub vertices: [Point; 6],
    /// `edge_ids[i]` joins `vertices[i]` and `vertices[(i + 1) % 6]`.
    pub edge_ids: [EdgeId; 6],
}

impl HexCell {
    fn new(id: CellId, axial: (i32, i32), center: Point, radius: f64) -> Self {
        let vertices = hex_vertices(center, radius);
        HexCell {
            id,
            axial,
            center,
            radius,
            vertices,
            edge_ids: [EdgeId(usize::MAX); 6],
        }
    }

    fn tol(&self) -> f64 {
        REL_TOL * self.radius
    }

    /// Signed distance of `q` to the supporting line of edge slot `i`,
    /// positive on the interior side.
    fn inner_distance(&self, slot: usize, q: Point) -> f64 {
        let a = self.vertices[slot];
        let b = self.vertices[(slot + 1) % 6];
        let e = b.sub(a);
        e.cross(q.sub(a)) / e.norm()
    }

    /// Closed containment (boundary counts as inside).
    pub fn contains(&self, q: Point) -> bool {
        (0..6).all(|i| self.inner_distance(i, q) >= -self.tol())
    }

    /// Open containment: at least the tolerance away from every edge.
    pub fn contains_strictly(&self, q: Point) -> bool {
        (0..6).all(|i| self.inner_distance(i, q) > self.tol())
    }

    pub fn slot_of_edge(&self, edge: EdgeId) -> Option<usize> {
        self.edge_ids.iter().position(|&e| e == edge)
    }

    pub fn edge_segment(&self, slot: usize) -> (Point, Point) {
        (self.vertices[slot], self.vertices[(slot + 1) % 6])
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let half_w = self.radius * 3f64.sqrt() / 2.0;
        (
            Point::new(self.center.x - half_w, self.center.y - self.radius),
            Point::new(self.center.x + half_w, self.center.y + self.radius),
        )
    }
}

fn hex_vertices(center: Point, radius: f64) -> [Point; 6] {
    std::array::from_fn(|i| {
        let theta = (30.0 + 60.0 * i as f64).to_radians();
        Point::new(
            center.x + radius * theta.cos(),
            center.y + radius * theta.sin(),
        )
    })
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub id: EdgeId,
    pub endpoints: (Point, Point),
    /// One entry for a boundary edge, two for a shared one (lower id first).
    pub cells: Vec<CellId>,
    pub relay_id: RelayId,
}

impl Edge {
    pub fn is_shared(&self) -> bool {
        self.cells.len() == 2
    }

    pub fn midpoint(&self) -> Point {
        self.endpoints.0.add(self.endpoints.1).scale(0.5)
    }
}

/// Result of [`HexGrid::candidate_relays`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidates {
    pub src_cell: CellId,
    /// Edge crossed by the segment from source to destination.
    pub crossed_edge: EdgeId,
    /// Crossed-edge relay first, then the ring neighbors at slots `i - 1`
    /// and `i + 1` of the source cell.
    pub relays: [RelayId; 3],
}

impl Candidates {
    pub fn crossed_relay(&self) -> RelayId {
        self.relays[0]
    }
}

#[derive(Debug, Clone)]
pub struct HexGrid {
    pub cells: Vec<HexCell>,
    pub edges: Vec<Edge>,
    /// Base station position per cell (the cell center).
    pub base_stations: Vec<Point>,
    radius: f64,
}

// Axial neighbor offsets in ring-walk order for pointy-top hexes.
const AXIAL_DIRS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

/// First `n` axial coordinates of the hexagonal spiral around the origin.
pub fn spiral_axial(n: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push((0, 0));
    let mut ring = 1;
    while out.len() < n {
        // Start at direction 4 scaled by the ring radius, then walk the ring.
        let mut cur = (AXIAL_DIRS[4].0 * ring, AXIAL_DIRS[4].1 * ring);
        'ring: for dir in AXIAL_DIRS {
            for _ in 0..ring {
                out.push(cur);
                if out.len() == n {
                    break 'ring;
                }
                cur = (cur.0 + dir.0, cur.1 + dir.1);
            }
        }
        ring += 1;
    }
    out
}

fn axial_to_point(q: i32, r: i32, radius: f64) -> Point {
    let sqrt3 = 3f64.sqrt();
    Point::new(
        radius * sqrt3 * (q as f64 + r as f64 / 2.0),
        radius * 1.5 * r as f64,
    )
}

impl HexGrid {
    /// Builds a spiral patch of `n_cells` cells with deduplicated edges, one
    /// relay per edge and one base station per cell.
    pub fn build(n_cells: usize, radius: f64) -> Result<HexGrid, GeomError> {
        if n_cells == 0 {
            return Err(GeomError::InvalidArgument(
                "n_cells must be positive".into(),
            ));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeomError::InvalidArgument(format!(
                "radius must be positive and finite, got {radius}"
            )));
        }
        let tol = REL_TOL * radius;
        let mut cells: Vec<HexCell> = spiral_axial(n_cells)
            .into_iter()
            .enumerate()
            .map(|(i, (q, r))| HexCell::new(CellId(i), (q, r), axial_to_point(q, r, radius), radius))
            .collect();
        let mut edges: Vec<Edge> = Vec::with_capacity(6 * n_cells);

        for cell in cells.iter_mut() {
            for slot in 0..6 {
                let (a, b) = cell.edge_segment(slot);
                let existing = edges.iter_mut().find(|e| {
                    let (p, q) = e.endpoints;
                    (p.dist(a) <= tol && q.dist(b) <= tol) || (p.dist(b) <= tol && q.dist(a) <= tol)
                });
                let id = match existing {
                    Some(e) => {
                        e.cells.push(cell.id);
                        e.id
                    }
                    None => {
                        let id = EdgeId(edges.len());
                        edges.push(Edge {
                            id,
                            endpoints: (a, b),
                            cells: vec![cell.id],
                            relay_id: RelayId(id.0),
                        });
                        id
                    }
                };
                cell.edge_ids[slot] = id;
            }
        }

        let base_stations = cells.iter().map(|c| c.center).collect();
        Ok(HexGrid {
            cells,
            edges,
            base_stations,
            radius,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n_relays(&self) -> usize {
        self.edges.len()
    }

    pub fn cell(&self, id: CellId) -> &HexCell {
        &self.cells[id.0]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    /// The edge hosting a relay. Relay and edge ids coincide.
    pub fn relay_edge(&self, relay: RelayId) -> &Edge {
        &self.edges[relay.0]
    }

    /// Cells sharing an edge with `id`, in ascending id order.
    pub fn neighbors(&self, id: CellId) -> Vec<CellId> {
        let mut out: Vec<CellId> = self.cells[id.0]
            .edge_ids
            .iter()
            .flat_map(|e| self.edges[e.0].cells.iter().copied())
            .filter(|&c| c != id)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Lowest-id cell whose closed hexagon contains `q`.
    pub fn cell_of(&self, q: Point) -> Option<CellId> {
        if !q.is_finite() {
            return None;
        }
        self.cells
            .iter()
            .filter(|c| c.center.dist(q) <= c.radius * (1.0 + REL_TOL))
            .find(|c| c.contains(q))
            .map(|c| c.id)
    }

    /// Finds the edge of `cell` through which the segment `src → dst` leaves
    /// the hexagon, together with the exit point.
    ///
    /// A crossing exactly through a vertex resolves to the incident edge with
    /// the lower id.
    pub fn boundary_intersection(
        &self,
        cell: CellId,
        src: Point,
        dst: Point,
    ) -> Result<(EdgeId, Point), GeomError> {
        let cell = self
            .cells
            .get(cell.0)
            .ok_or_else(|| GeomError::InvalidArgument(format!("unknown cell {cell}")))?;
        boundary_intersection(cell, src, dst)
    }

    /// The three candidate relays for a session from `src` to `dst`.
    pub fn candidate_relays(&self, src: Point, dst: Point) -> Result<Candidates, GeomError> {
        if !src.is_finite() || !dst.is_finite() {
            return Err(GeomError::InvalidArgument("non-finite coordinates".into()));
        }
        let src_cell = self
            .cell_of(src)
            .ok_or_else(|| GeomError::InvalidArgument("source outside grid".into()))?;
        let cell = &self.cells[src_cell.0];
        if cell.contains(dst) {
            return Err(GeomError::SameCell(src_cell));
        }
        let (edge, _) = boundary_intersection(cell, src, dst)?;
        let slot = cell
            .slot_of_edge(edge)
            .expect("crossed edge belongs to its cell");
        let ring = |s: usize| self.edges[cell.edge_ids[s].0].relay_id;
        Ok(Candidates {
            src_cell,
            crossed_edge: edge,
            relays: [ring(slot), ring((slot + 5) % 6), ring((slot + 1) % 6)],
        })
    }
}

/// Exit edge and exit point of `src → dst` from a convex hexagon, found by
/// clipping the parametric segment against each edge's half-plane.
pub fn boundary_intersection(
    cell: &HexCell,
    src: Point,
    dst: Point,
) -> Result<(EdgeId, Point), GeomError> {
    if !src.is_finite() || !dst.is_finite() {
        return Err(GeomError::InvalidArgument("non-finite coordinates".into()));
    }
    if !cell.contains_strictly(src) {
        return Err(GeomError::PreconditionViolation(format!(
            "source is not strictly inside cell {}",
            cell.id
        )));
    }
    if cell.contains_strictly(dst) {
        return Err(GeomError::PreconditionViolation(format!(
            "destination is inside cell {}",
            cell.id
        )));
    }
    let dir = dst.sub(src);
    let mut best: Option<(usize, f64)> = None;
    for slot in 0..6 {
        let (a, b) = cell.edge_segment(slot);
        let e = b.sub(a);
        // Outward normal for a counterclockwise polygon.
        let n = Point::new(e.y, -e.x);
        let denom = n.dot(dir);
        if denom <= 0.0 {
            continue;
        }
        let t = n.dot(a.sub(src)) / denom;
        if best.is_none_or(|(_, tb)| t < tb) {
            best = Some((slot, t));
        }
    }
    let (slot, t) = best.expect("segment leaving a bounded cell crosses some edge");
    let p = src.add(dir.scale(t.clamp(0.0, 1.0)));

    let tol = cell.tol();
    let (a, b) = cell.edge_segment(slot);
    let mut edge = cell.edge_ids[slot];
    let other_slot = if p.dist(a) <= tol {
        Some((slot + 5) % 6)
    } else if p.dist(b) <= tol {
        Some((slot + 1) % 6)
    } else {
        None
    };
    if let Some(s) = other_slot {
        edge = edge.min(cell.edge_ids[s]);
    }
    Ok((edge, p))
}
