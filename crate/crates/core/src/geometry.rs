//! Continuous collision detection between moving discs, plan validation and
//! unsafe start-time intervals.

use thiserror::Error;

use crate::model::{
    Collision, Constraint, Instance, MotionEvent, Point, Solution, TemporalPlan, VertexId, EPS_G,
};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("segments have no common active span")]
    DisjointSpans,
    #[error("event references unknown vertex or agent")]
    UnknownReference,
    #[error("collision does not reproduce when recomputing unsafe intervals")]
    Inconsistent,
}

/// Half-open time interval `[lo, hi)`; `hi` may be `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t < self.hi
    }
}

/// A disc center moving linearly: `origin + velocity * (t - t_a)` over `[t_a, t_b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicSegment {
    pub origin: Point,
    pub vx: f64,
    pub vy: f64,
    pub t_a: f64,
    pub t_b: f64,
}

impl KinematicSegment {
    pub fn stationary(at: Point, t_a: f64, t_b: f64) -> Self {
        KinematicSegment {
            origin: at,
            vx: 0.0,
            vy: 0.0,
            t_a,
            t_b,
        }
    }

    pub fn from_points(from: Point, to: Point, t_a: f64, t_b: f64) -> Self {
        if from == to || t_b.is_infinite() {
            return Self::stationary(from, t_a, t_b);
        }
        let dt = t_b - t_a;
        KinematicSegment {
            origin: from,
            vx: (to.x - from.x) / dt,
            vy: (to.y - from.y) / dt,
            t_a,
            t_b,
        }
    }

    pub fn at(&self, t: f64) -> Point {
        let dt = t - self.t_a;
        Point::new(self.origin.x + self.vx * dt, self.origin.y + self.vy * dt)
    }

    pub fn is_stationary(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0
    }
}

pub fn segment_of(
    event: &MotionEvent,
    instance: &Instance,
) -> Result<KinematicSegment, GeometryError> {
    let a = instance
        .position(event.from)
        .ok_or(GeometryError::UnknownReference)?;
    let b = instance
        .position(event.to)
        .ok_or(GeometryError::UnknownReference)?;
    Ok(KinematicSegment::from_points(
        a,
        b,
        event.t_start,
        event.t_end,
    ))
}

/// The plan's events followed by an infinite parking pseudo-event at the goal.
pub fn events_with_parking(
    plan: &TemporalPlan,
    instance: &Instance,
) -> Result<Vec<MotionEvent>, GeometryError> {
    let agent = instance
        .agent(plan.agent)
        .ok_or(GeometryError::UnknownReference)?;
    let mut out = plan.events.clone();
    let (end_vertex, end_time) = match plan.events.last() {
        Some(e) => (e.to, e.t_end),
        None => (agent.start, 0.0),
    };
    out.push(MotionEvent {
        agent: plan.agent,
        from: end_vertex,
        to: end_vertex,
        t_start: end_time,
        t_end: f64::INFINITY,
    });
    Ok(out)
}

/// Earliest `s` in `[0, len)` with `|p0 + v s| < reach`, if any.
fn first_contact(p0: (f64, f64), v: (f64, f64), reach: f64, len: f64) -> Option<f64> {
    let c = p0.0 * p0.0 + p0.1 * p0.1 - reach * reach;
    if c < 0.0 {
        return Some(0.0);
    }
    let a = v.0 * v.0 + v.1 * v.1;
    let b = 2.0 * (p0.0 * v.0 + p0.1 * v.1);
    if a == 0.0 || b >= 0.0 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        // grazing at most
        return None;
    }
    let q = 0.5 * (-b + disc.sqrt());
    let s = c / q;
    (s < len).then_some(s)
}

/// Open set `{s in [0, len) : |p0 + v s| < reach}` as `(lo, hi)`, if nonempty.
fn inside_span(p0: (f64, f64), v: (f64, f64), reach: f64, len: f64) -> Option<(f64, f64)> {
    let c = p0.0 * p0.0 + p0.1 * p0.1 - reach * reach;
    let a = v.0 * v.0 + v.1 * v.1;
    if a == 0.0 {
        return (c < 0.0).then_some((0.0, len));
    }
    let b = 2.0 * (p0.0 * v.0 + p0.1 * v.1);
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let q = if b >= 0.0 {
        -0.5 * (b + sq)
    } else {
        -0.5 * (b - sq)
    };
    let (mut r1, mut r2) = (q / a, c / q);
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    let lo = r1.max(0.0);
    let hi = r2.min(len);
    (lo < hi).then_some((lo, hi))
}

fn contact_with_reach(
    seg_i: &KinematicSegment,
    seg_j: &KinematicSegment,
    reach: f64,
) -> Result<Option<f64>, GeometryError> {
    let lo = seg_i.t_a.max(seg_j.t_a);
    let hi = seg_i.t_b.min(seg_j.t_b);
    if lo >= hi || lo.is_nan() || hi.is_nan() {
        return Err(GeometryError::DisjointSpans);
    }
    let pi = seg_i.at(lo);
    let pj = seg_j.at(lo);
    let p0 = (pi.x - pj.x, pi.y - pj.y);
    let v = (seg_i.vx - seg_j.vx, seg_i.vy - seg_j.vy);
    Ok(first_contact(p0, v, reach, hi - lo).map(|s| lo + s))
}

/// Earliest time at which the two discs overlap (distance strictly below
/// `r_i + r_j`) on the common active span, or `None`.
pub fn collide(
    seg_i: &KinematicSegment,
    r_i: f64,
    seg_j: &KinematicSegment,
    r_j: f64,
) -> Result<Option<f64>, GeometryError> {
    contact_with_reach(seg_i, seg_j, r_i + r_j)
}

/// Times within the segment's span at which its disc overlaps a disc fixed at
/// `point` (`reach` is the sum of radii).
pub fn occupancy_window(seg: &KinematicSegment, point: Point, reach: f64) -> Option<Interval> {
    let start = seg.at(seg.t_a);
    let p0 = (start.x - point.x, start.y - point.y);
    inside_span(p0, (seg.vx, seg.vy), reach, seg.t_b - seg.t_a).map(|(a, b)| Interval {
        lo: seg.t_a + a,
        hi: seg.t_a + b,
    })
}

/// Collision-free check with the default geometric slack.
pub fn validate_plans(
    solution: &Solution,
    instance: &Instance,
) -> Result<Vec<Collision>, GeometryError> {
    validate_plans_with_slack(solution, instance, EPS_G)
}

/// Pairwise validation; overlap depth up to `slack` is tolerated. Reports at
/// most one collision per agent pair (the earliest), sorted by contact time.
pub fn validate_plans_with_slack(
    solution: &Solution,
    instance: &Instance,
    slack: f64,
) -> Result<Vec<Collision>, GeometryError> {
    let mut decomposed = Vec::with_capacity(solution.plans.len());
    for plan in &solution.plans {
        let radius = instance
            .agent(plan.agent)
            .ok_or(GeometryError::UnknownReference)?
            .radius;
        let events = events_with_parking(plan, instance)?;
        let segs = events
            .iter()
            .map(|e| segment_of(e, instance))
            .collect::<Result<Vec<_>, _>>()?;
        decomposed.push((radius, events, segs));
    }

    let mut out = Vec::new();
    for i in 0..decomposed.len() {
        for j in i + 1..decomposed.len() {
            let (ri, ei, si) = &decomposed[i];
            let (rj, ej, sj) = &decomposed[j];
            let reach = ri + rj - slack;
            let mut best: Option<Collision> = None;
            let (mut a, mut b) = (0, 0);
            while a < si.len() && b < sj.len() {
                let (x, y) = (&si[a], &sj[b]);
                if x.t_a.max(y.t_a) < x.t_b.min(y.t_b) {
                    if let Some(t) = contact_with_reach(x, y, reach)? {
                        if best.is_none_or(|c| t < c.contact_time) {
                            best = Some(Collision {
                                event_i: ei[a],
                                event_j: ej[b],
                                contact_time: t,
                            });
                        }
                    }
                }
                if best.is_some_and(|c| c.contact_time <= x.t_b.min(y.t_b)) {
                    break;
                }
                if x.t_b <= y.t_b {
                    a += 1;
                } else {
                    b += 1;
                }
            }
            out.extend(best);
        }
    }
    out.sort_by(|x, y| x.contact_time.total_cmp(&y.contact_time));
    Ok(out)
}

fn radius_of(event: &MotionEvent, instance: &Instance) -> Result<f64, GeometryError> {
    Ok(instance
        .agent(event.agent)
        .ok_or(GeometryError::UnknownReference)?
        .radius)
}

#[cfg(test)]
fn shifted(event: &MotionEvent, start: f64) -> MotionEvent {
    MotionEvent {
        t_start: start,
        t_end: start + event.duration(),
        ..*event
    }
}

/// Maximal interval `[lo, hi)` of start times (clipped at 0) such that
/// executing `moving` from that start collides with the fixed event.
/// `hi = inf` when every late enough start collides.
pub fn unsafe_interval(
    moving: &MotionEvent,
    fixed: &MotionEvent,
    instance: &Instance,
) -> Result<Option<Interval>, GeometryError> {
    let reach = radius_of(moving, instance)? + radius_of(fixed, instance)?;
    let fixed_seg = segment_of(fixed, instance)?;
    let from = instance
        .position(moving.from)
        .ok_or(GeometryError::UnknownReference)?;
    let to = instance
        .position(moving.to)
        .ok_or(GeometryError::UnknownReference)?;
    let d = moving.duration();

    let collides = |s: f64| -> bool {
        let seg = KinematicSegment::from_points(from, to, s, s + d);
        if seg.t_a.max(fixed_seg.t_a) >= seg.t_b.min(fixed_seg.t_b) {
            return false;
        }
        matches!(collide(&seg, 0.0, &fixed_seg, reach), Ok(Some(_)))
    };

    let raw = if moving.is_wait() {
        // Stationary mover at `from`: [s, s + d) must meet the fixed disc's window.
        occupancy_window(&fixed_seg, from, reach).map(|w| Interval {
            lo: w.lo - d,
            hi: w.hi,
        })
    } else if fixed_seg.is_stationary() {
        // Fixed disc at one point over [f0, f1); the mover's path is inside
        // its reach for path-times (a, b).
        let path = KinematicSegment::from_points(from, to, 0.0, d);
        occupancy_window(&path, fixed_seg.origin, reach).map(|w| Interval {
            lo: fixed_seg.t_a - w.hi,
            hi: fixed_seg.t_b - w.lo,
        })
    } else {
        bisect_unsafe(moving, &fixed_seg, from, to, &collides)
    };

    let Some(mut iv) = raw else { return Ok(None) };
    iv.lo = iv.lo.max(0.0);
    if iv.lo >= iv.hi || iv.lo.is_nan() || iv.hi.is_nan() {
        return Ok(None);
    }
    // Certify that the upper end is a collision-free start.
    if iv.hi.is_finite() {
        let mut guard = 0;
        while collides(iv.hi) && guard < 64 {
            iv.hi += f64::EPSILON * iv.hi.abs().max(1.0) * (1u64 << guard.min(40)) as f64;
            guard += 1;
        }
    }
    Ok(Some(iv))
}

fn bisect_unsafe(
    moving: &MotionEvent,
    fixed: &KinematicSegment,
    from: Point,
    to: Point,
    collides: &dyn Fn(f64) -> bool,
) -> Option<Interval> {
    let d = moving.duration();
    let inside = if collides(moving.t_start) {
        moving.t_start
    } else {
        closest_start(fixed, from, to, d).filter(|&s| collides(s))?
    };

    const ITERS: usize = 64;
    // Supremum: everything at or after the end of the fixed span is clear.
    let mut lo_in = inside;
    let mut hi_out = fixed.t_b;
    for _ in 0..ITERS {
        let mid = 0.5 * (lo_in + hi_out);
        if mid <= lo_in || mid >= hi_out {
            break;
        }
        if collides(mid) {
            lo_in = mid;
        } else {
            hi_out = mid;
        }
    }
    let hi = hi_out;

    // Infimum, bracketed below by starts that finish before the fixed span.
    let mut lo_out = (fixed.t_a - d).min(inside);
    let mut hi_in = inside;
    if collides(lo_out) {
        lo_out -= d;
    }
    for _ in 0..ITERS {
        let mid = 0.5 * (lo_out + hi_in);
        if mid <= lo_out || mid >= hi_in {
            break;
        }
        if collides(mid) {
            hi_in = mid;
        } else {
            lo_out = mid;
        }
    }
    Some(Interval { lo: hi_in, hi })
}

/// Start time minimizing the clearance between a mover along `from -> to`
/// (duration `d`) and a moving fixed segment: minimizes a convex quadratic in
/// (path-time, absolute time) over the feasible box.
fn closest_start(fixed: &KinematicSegment, from: Point, to: Point, d: f64) -> Option<f64> {
    let a = ((to.x - from.x) / d, (to.y - from.y) / d);
    let b = (fixed.vx, fixed.vy);
    let f0 = fixed.t_a;
    let f1 = fixed.t_b;
    // relative(τ, t) = from + a τ - (fixed.origin + b (t - f0)) = c + a τ - b t
    let c = (
        from.x - fixed.origin.x + b.0 * f0,
        from.y - fixed.origin.y + b.1 * f0,
    );
    let q = |tau: f64, t: f64| {
        let x = c.0 + a.0 * tau - b.0 * t;
        let y = c.1 + a.1 * tau - b.1 * t;
        x * x + y * y
    };
    let dot = |u: (f64, f64), v: (f64, f64)| u.0 * v.0 + u.1 * v.1;
    let aa = dot(a, a);
    let bb = dot(b, b);
    let ab = dot(a, b);
    let t_hi = if f1.is_finite() { f1 } else { f0 + d };
    let clamp_tau = |tau: f64| tau.clamp(0.0, d);
    let clamp_t = |t: f64| t.clamp(f0, t_hi);

    let mut cands: Vec<(f64, f64)> = vec![(0.0, f0), (0.0, t_hi), (d, f0), (d, t_hi)];
    for tau in [0.0, d] {
        if bb > 0.0 {
            let cc = (c.0 + a.0 * tau, c.1 + a.1 * tau);
            cands.push((tau, clamp_t(dot(cc, b) / bb)));
        }
    }
    for t in [f0, t_hi] {
        if aa > 0.0 {
            let cc = (c.0 - b.0 * t, c.1 - b.1 * t);
            cands.push((clamp_tau(-dot(cc, a) / aa), t));
        }
    }
    let det = aa * bb - ab * ab;
    if det.abs() > 1e-12 * (aa * bb).max(1e-300) {
        // ∇q = 0: aa τ - ab t = -c·a ; -ab τ + bb t = c·b
        let r1 = -dot(c, a);
        let r2 = dot(c, b);
        let tau = (r1 * bb + ab * r2) / det;
        let t = (aa * r2 + ab * r1) / det;
        cands.push((clamp_tau(tau), clamp_t(t)));
    }
    cands
        .into_iter()
        .min_by(|x, y| q(x.0, x.1).total_cmp(&q(y.0, y.1)))
        .map(|(tau, t)| t - tau)
}

/// Both agents' maximal unsafe start intervals (each with the other's event
/// held fixed). Each interval contains the colliding event's own start time.
pub fn resolve_collision(
    c: &Collision,
    instance: &Instance,
) -> Result<(Interval, Interval), GeometryError> {
    let side = |moving: &MotionEvent, fixed: &MotionEvent| -> Result<Interval, GeometryError> {
        let iv = unsafe_interval(moving, fixed, instance)?.ok_or(GeometryError::Inconsistent)?;
        let start = moving.t_start.max(0.0);
        if !(iv.lo <= start && start < iv.hi) {
            return Err(GeometryError::Inconsistent);
        }
        Ok(iv)
    };
    Ok((side(&c.event_i, &c.event_j)?, side(&c.event_j, &c.event_i)?))
}

/// The pair of branching constraints for a collision.
///
/// A moving side gets a forbidden start interval on its edge. A stationary
/// side (wait or parking) gets a stay window at its vertex: the times during
/// which the other agent's disc reaches over that vertex.
pub fn collision_constraints(
    c: &Collision,
    instance: &Instance,
) -> Result<(Constraint, Constraint), GeometryError> {
    let (iv_i, iv_j) = resolve_collision(c, instance)?;
    let side = |me: &MotionEvent,
                other: &MotionEvent,
                iv: Interval|
     -> Result<Constraint, GeometryError> {
        if !me.is_wait() {
            return Ok(Constraint {
                agent: me.agent,
                from: me.from,
                to: me.to,
                t_lo: iv.lo,
                t_hi: iv.hi,
            });
        }
        let reach = radius_of(me, instance)? + radius_of(other, instance)?;
        let at = instance
            .position(me.from)
            .ok_or(GeometryError::UnknownReference)?;
        let w = occupancy_window(&segment_of(other, instance)?, at, reach)
            .ok_or(GeometryError::Inconsistent)?;
        Ok(stay(me.agent, me.from, w))
    };
    Ok((
        side(&c.event_i, &c.event_j, iv_i)?,
        side(&c.event_j, &c.event_i, iv_j)?,
    ))
}

fn stay(agent: crate::model::AgentId, at: VertexId, w: Interval) -> Constraint {
    Constraint {
        agent,
        from: at,
        to: at,
        t_lo: w.lo,
        t_hi: w.hi,
    }
}
