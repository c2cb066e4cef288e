#![allow(dead_code)]

use mapfr::io::grid::{build_graph, make_instance, DEFAULT_RADIUS, DEFAULT_SPEED};
use mapfr::io::movingai::{GridMap, ScenarioEntry};
use mapfr::model::{Agent, AgentId, Instance, Point, Vertex, VertexId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Unit square with both diagonals; agents cross along the diagonals.
pub fn figure1(radius: f64) -> Instance {
    let v = |id, x, y| Vertex {
        id: VertexId(id),
        pos: Point::new(x, y),
    };
    let a = |id, s, g| Agent {
        id: AgentId(id),
        radius,
        speed: 1.0,
        start: VertexId(s),
        goal: VertexId(g),
    };
    let e = |u, w| (VertexId(u), VertexId(w));
    Instance::new(
        vec![
            v(1, 0.0, 0.0),
            v(2, 1.0, 0.0),
            v(3, 0.0, 1.0),
            v(4, 1.0, 1.0),
        ],
        vec![e(1, 2), e(1, 3), e(1, 4), e(2, 3), e(2, 4), e(3, 4)],
        vec![a(1, 1, 4), a(2, 2, 3)],
    )
    .unwrap()
}

pub struct RandomCase {
    pub size: usize,
    pub k: u32,
    pub agents: usize,
    pub instance: Instance,
}

/// Open `size`×`size` grid with distinct random starts and goals.
pub fn random_grid_case(rng: &mut ChaCha8Rng, size: usize, k: u32, agents: usize) -> RandomCase {
    let map = GridMap::open(size, size).unwrap();
    let graph = build_graph(&map, k).unwrap();
    let mut cells: Vec<(usize, usize)> = (0..size)
        .flat_map(|r| (0..size).map(move |c| (c, r)))
        .collect();
    cells.shuffle(rng);
    let starts = &cells[..agents];
    let mut goals_pool = cells.clone();
    goals_pool.shuffle(rng);
    let goals = &goals_pool[..agents];
    let entries: Vec<ScenarioEntry> = starts
        .iter()
        .zip(goals)
        .map(|(&s, &g)| ScenarioEntry {
            bucket: 0,
            map: "open".into(),
            map_width: size,
            map_height: size,
            start: s,
            goal: g,
            optimal_length: 0.0,
        })
        .collect();
    let instance = make_instance(
        &graph,
        &map,
        &entries,
        agents,
        DEFAULT_RADIUS,
        DEFAULT_SPEED,
    )
    .unwrap();
    RandomCase {
        size,
        k,
        agents,
        instance,
    }
}

/// The fixed corpus of random open-grid cases used for cross-checking.
pub fn random_corpus(n: usize, seed: u64) -> Vec<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let size = if rng.gen_bool(0.5) { 4 } else { 6 };
            let k = rng.gen_range(2..=3);
            let agents = rng.gen_range(2..=4);
            random_grid_case(&mut rng, size, k, agents)
        })
        .collect()
}
