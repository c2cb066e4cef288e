//! 2^K-neighborhood graphs over grid maps and instance assembly from
//! scenario entries.

use thiserror::Error;

use super::movingai::{GridMap, ScenarioEntry};
use crate::model::{Agent, AgentId, Instance, ModelError, Point, Vertex, VertexId};

/// Largest uniform radius at which agents on diagonal neighbors do not overlap.
pub const DEFAULT_RADIUS: f64 = std::f64::consts::SQRT_2 / 4.0;
pub const DEFAULT_SPEED: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("neighborhood exponent must be 2..=5, got {0}")]
    BadNeighborhood(u32),
    #[error("need at least one agent")]
    NoAgents,
    #[error("requested {0} agents but the scenario has {1} entries")]
    TooManyAgents(usize, usize),
    #[error("scenario entry {0} uses a blocked or out-of-map cell")]
    BlockedCell(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Move vectors of the 2^K neighborhood, in a fixed order.
pub fn move_vectors(k: u32) -> Result<Vec<(i64, i64)>, GridError> {
    if !(2..=5).contains(&k) {
        return Err(GridError::BadNeighborhood(k));
    }
    let mut base: Vec<(i64, i64)> = vec![(1, 0)];
    if k >= 3 {
        base.push((1, 1));
    }
    if k >= 4 {
        base.push((1, 2));
    }
    if k >= 5 {
        base.extend([(1, 3), (2, 3)]);
    }
    let mut out = Vec::new();
    for (a, b) in base {
        let mut vs = vec![(a, b), (b, a)];
        vs.dedup();
        for (x, y) in vs {
            for (sx, sy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let v = (x * sx, y * sy);
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
    }
    Ok(out)
}

/// Whether the open segment between the centers of cells `a` and `b` only
/// meets passable cells (any cell whose closed square it touches counts).
pub fn segment_clear(map: &GridMap, a: (i64, i64), b: (i64, i64)) -> bool {
    // Doubled coordinates: centers are odd, cell borders even.
    let (ax, ay) = (2 * a.0 + 1, 2 * a.1 + 1);
    let (bx, by) = (2 * b.0 + 1, 2 * b.1 + 1);
    let side = |x: i64, y: i64| (y - ay) * (bx - ax) - (x - ax) * (by - ay);
    for c in a.0.min(b.0)..=a.0.max(b.0) {
        for r in a.1.min(b.1)..=a.1.max(b.1) {
            let (x0, y0, x1, y1) = (2 * c, 2 * r, 2 * c + 2, 2 * r + 2);
            if ax.max(bx) < x0 || ax.min(bx) > x1 || ay.max(by) < y0 || ay.min(by) > y1 {
                continue;
            }
            let s = [side(x0, y0), side(x1, y0), side(x0, y1), side(x1, y1)];
            if s.iter().all(|&v| v > 0) || s.iter().all(|&v| v < 0) {
                continue;
            }
            if !map.is_passable(c, r) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridGraph {
    pub width: usize,
    pub height: usize,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<(VertexId, VertexId)>,
}

impl GridGraph {
    pub fn vertex_at(&self, col: usize, row: usize) -> VertexId {
        VertexId((row * self.width + col) as u32)
    }
}

/// One vertex per passable cell at `(col, row)`; one undirected edge per
/// neighborhood vector whose segment stays on passable cells.
pub fn build_graph(map: &GridMap, k: u32) -> Result<GridGraph, GridError> {
    let vectors = move_vectors(k)?;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for r in 0..map.height as i64 {
        for c in 0..map.width as i64 {
            if !map.is_passable(c, r) {
                continue;
            }
            let id = VertexId((r as usize * map.width + c as usize) as u32);
            vertices.push(Vertex {
                id,
                pos: Point::new(c as f64, r as f64),
            });
            for &(dx, dy) in &vectors {
                let (c2, r2) = (c + dx, r + dy);
                // each undirected edge once, from its lexicographically smaller end
                if (r2, c2) <= (r, c) || !map.is_passable(c2, r2) {
                    continue;
                }
                if segment_clear(map, (c, r), (c2, r2)) {
                    edges.push((id, VertexId((r2 as usize * map.width + c2 as usize) as u32)));
                }
            }
        }
    }
    Ok(GridGraph {
        width: map.width,
        height: map.height,
        vertices,
        edges,
    })
}

/// Instance with the first `k` scenario entries as agents `1..=k`.
pub fn make_instance(
    graph: &GridGraph,
    map: &GridMap,
    entries: &[ScenarioEntry],
    k: usize,
    radius: f64,
    speed: f64,
) -> Result<Instance, GridError> {
    if k == 0 {
        return Err(GridError::NoAgents);
    }
    if k > entries.len() {
        return Err(GridError::TooManyAgents(k, entries.len()));
    }
    let mut agents = Vec::with_capacity(k);
    for (i, e) in entries[..k].iter().enumerate() {
        for (c, r) in [e.start, e.goal] {
            if !map.is_passable(c as i64, r as i64) {
                return Err(GridError::BlockedCell(i + 1));
            }
        }
        agents.push(Agent {
            id: AgentId(i as u32 + 1),
            radius,
            speed,
            start: graph.vertex_at(e.start.0, e.start.1),
            goal: graph.vertex_at(e.goal.0, e.goal.1),
        });
    }
    Ok(Instance::new(
        graph.vertices.clone(),
        graph.edges.clone(),
        agents,
    )?)
}
