//! Line-oriented instance and solution files.
//!
//! Instance:
//! ```text
//! VERTICES
//! <id> <x> <y>
//! EDGES
//! <u> <v>
//! AGENTS
//! <id> <radius> <speed> <start> <goal>
//! ```
//! Solution: one event per line, `<agent> <from> <to> <t_start> <t_end>`,
//! times with 6 decimals. Blank lines and lines starting with `#` are ignored
//! in both formats.

use std::fmt::Write as _;

use super::{numbered_lines, parse_field, ParseError};
use crate::model::{
    Agent, AgentId, Instance, MotionEvent, Point, Solution, TemporalPlan, Vertex, VertexId,
};

pub fn write_instance(instance: &Instance) -> String {
    let mut out = String::from("VERTICES\n");
    for v in instance.vertices() {
        let _ = writeln!(out, "{} {} {}", v.id, v.pos.x, v.pos.y);
    }
    out.push_str("EDGES\n");
    for (u, v) in instance.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out.push_str("AGENTS\n");
    for a in instance.agents() {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            a.id, a.radius, a.speed, a.start, a.goal
        );
    }
    out
}

fn fields<'a>(
    line: usize,
    text: &'a str,
    n: usize,
    what: &str,
) -> Result<Vec<&'a str>, ParseError> {
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != n {
        return Err(ParseError::new(
            line,
            format!("{what} line needs {n} fields, found {}", f.len()),
        ));
    }
    Ok(f)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    numbered_lines(text).filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    })
}

pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    #[derive(PartialEq, PartialOrd)]
    enum Section {
        None,
        Vertices,
        Edges,
        Agents,
    }
    let mut section = Section::None;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut agents = Vec::new();
    let mut last_line = 0;
    for (l, line) in content_lines(text) {
        last_line = l;
        let t = line.trim();
        let next = match t {
            "VERTICES" => Some(Section::Vertices),
            "EDGES" => Some(Section::Edges),
            "AGENTS" => Some(Section::Agents),
            _ => None,
        };
        if let Some(s) = next {
            if s <= section {
                return Err(ParseError::new(l, format!("section {t} out of order")));
            }
            section = s;
            continue;
        }
        match section {
            Section::None => {
                return Err(ParseError::new(l, "expected section header VERTICES"));
            }
            Section::Vertices => {
                let f = fields(l, t, 3, "vertex")?;
                vertices.push(Vertex {
                    id: VertexId(parse_field(l, "vertex id", f[0])?),
                    pos: Point::new(parse_field(l, "x", f[1])?, parse_field(l, "y", f[2])?),
                });
            }
            Section::Edges => {
                let f = fields(l, t, 2, "edge")?;
                edges.push((
                    VertexId(parse_field(l, "vertex id", f[0])?),
                    VertexId(parse_field(l, "vertex id", f[1])?),
                ));
            }
            Section::Agents => {
                let f = fields(l, t, 5, "agent")?;
                agents.push(Agent {
                    id: AgentId(parse_field(l, "agent id", f[0])?),
                    radius: parse_field(l, "radius", f[1])?,
                    speed: parse_field(l, "speed", f[2])?,
                    start: VertexId(parse_field(l, "vertex id", f[3])?),
                    goal: VertexId(parse_field(l, "vertex id", f[4])?),
                });
            }
        }
    }
    if section != Section::Agents {
        return Err(ParseError::new(last_line + 1, "missing section"));
    }
    Instance::new(vertices, edges, agents).map_err(|e| ParseError::new(last_line, e.to_string()))
}

pub fn write_solution(solution: &Solution) -> String {
    let mut out = String::new();
    for p in &solution.plans {
        for e in &p.events {
            let _ = writeln!(
                out,
                "{} {} {} {:.6} {:.6}",
                e.agent, e.from, e.to, e.t_start, e.t_end
            );
        }
    }
    out
}

/// Events grouped into plans by agent, in order of first appearance. Agents
/// without events do not appear.
pub fn parse_solution(text: &str) -> Result<Vec<TemporalPlan>, ParseError> {
    let mut plans: Vec<TemporalPlan> = Vec::new();
    for (l, line) in content_lines(text) {
        let f = fields(l, line, 5, "event")?;
        let agent = AgentId(parse_field(l, "agent id", f[0])?);
        let e = MotionEvent {
            agent,
            from: VertexId(parse_field(l, "vertex id", f[1])?),
            to: VertexId(parse_field(l, "vertex id", f[2])?),
            t_start: parse_field(l, "time", f[3])?,
            t_end: parse_field(l, "time", f[4])?,
        };
        if !e.t_start.is_finite() || !e.t_end.is_finite() {
            return Err(ParseError::new(l, "times must be finite"));
        }
        match plans.iter_mut().find(|p| p.agent == agent) {
            Some(p) => p.events.push(e),
            None => plans.push(TemporalPlan::new(agent, vec![e])),
        }
    }
    Ok(plans)
}
