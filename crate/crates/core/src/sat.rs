//! Incremental CDCL SAT solver: two watched literals, first-UIP learning,
//! VSIDS branching with phase saving, geometric restarts.

use std::fmt::Write as _;
use std::ops::Not;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SatError {
    #[error("variable {0} has not been allocated")]
    UnallocatedVariable(u32),
    #[error("empty clause")]
    EmptyClause,
}

/// Literal over variable ids starting at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        Lit(var << 1 | (!positive) as u32)
    }

    pub fn pos(var: u32) -> Lit {
        Lit::new(var, true)
    }

    pub fn neg(var: u32) -> Lit {
        Lit::new(var, false)
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn from_dimacs(x: i32) -> Lit {
        Lit::new(x.unsigned_abs(), x > 0)
    }

    pub fn to_dimacs(self) -> i32 {
        let v = self.var() as i32;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    fn code(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    /// Deadline reached before a verdict.
    Unknown,
}

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Clone, Copy)]
struct Watcher {
    clause: usize,
    blocker: Lit,
}

/// Max-heap of variables keyed by activity.
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn new() -> Self {
        VarHeap {
            heap: Vec::new(),
            pos: vec![None],
        }
    }

    fn grow(&mut self) {
        self.pos.push(None);
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize].is_some()
    }

    fn swap(&mut self, i: usize, j: usize) {
        self.heap.swap(i, j);
        self.pos[self.heap[i] as usize] = Some(i);
        self.pos[self.heap[j] as usize] = Some(j);
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let p = (i - 1) / 2;
            if act[self.heap[i] as usize] > act[self.heap[p] as usize] {
                self.swap(i, p);
                i = p;
            } else {
                break;
            }
        }
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut best = i;
            if l < self.heap.len() && act[self.heap[l] as usize] > act[self.heap[best] as usize] {
                best = l;
            }
            if r < self.heap.len() && act[self.heap[r] as usize] > act[self.heap[best] as usize] {
                best = r;
            }
            if best == i {
                break;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v as usize] = Some(i);
        self.up(i, act);
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if let Some(i) = self.pos[v as usize] {
            self.up(i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0];
        let last = self.heap.len() - 1;
        self.swap(0, last);
        self.heap.pop();
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.down(0, act);
        }
        Some(top)
    }
}

pub struct Solver {
    num_vars: u32,
    original: Vec<Vec<Lit>>,
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    order: VarHeap,
    var_inc: f64,
    cla_inc: f64,
    num_learnts: usize,
    max_learnts: f64,
    ok: bool,
    model: Vec<bool>,
    rng: ChaCha8Rng,
    deadline: Option<Instant>,
    pub conflicts: u64,
    pub decisions: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new()
    }
}

impl Solver {
    pub fn new() -> Self {
        Self::with_seed(0)
    }

    pub fn with_seed(seed: u64) -> Self {
        Solver {
            num_vars: 0,
            original: Vec::new(),
            clauses: Vec::new(),
            watches: vec![Vec::new(), Vec::new()],
            assigns: vec![UNDEF],
            level: vec![0],
            reason: vec![None],
            polarity: vec![false],
            activity: vec![0.0],
            seen: vec![false],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            order: VarHeap::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            num_learnts: 0,
            max_learnts: 0.0,
            ok: true,
            model: vec![false],
            rng: ChaCha8Rng::seed_from_u64(seed),
            deadline: None,
            conflicts: 0,
            decisions: 0,
        }
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn new_var(&mut self) -> u32 {
        self.num_vars += 1;
        let v = self.num_vars;
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.assigns.push(UNDEF);
        self.level.push(0);
        self.reason.push(None);
        self.polarity.push(false);
        self.activity.push(0.0);
        self.seen.push(false);
        self.model.push(false);
        self.order.grow();
        self.order.insert(v, &self.activity);
        v
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Number of clauses added through [`Solver::add_clause`].
    pub fn num_clauses(&self) -> usize {
        self.original.len()
    }

    /// False once the database is known unsatisfiable without assumptions.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    fn value(&self, l: Lit) -> i8 {
        let a = self.assigns[l.var() as usize];
        if l.is_positive() {
            a
        } else {
            -a
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    pub fn add_clause(&mut self, lits: &[Lit]) -> Result<(), SatError> {
        if let Some(l) = lits
            .iter()
            .find(|l| l.var() == 0 || l.var() > self.num_vars)
        {
            return Err(SatError::UnallocatedVariable(l.var()));
        }
        self.original.push(lits.to_vec());
        if !self.ok {
            return Ok(());
        }
        self.cancel_until(0);
        let mut ls = lits.to_vec();
        ls.sort_unstable();
        ls.dedup();
        let mut kept = Vec::with_capacity(ls.len());
        for (i, &l) in ls.iter().enumerate() {
            if i + 1 < ls.len() && ls[i + 1] == !l {
                return Ok(()); // tautology
            }
            match self.value(l) {
                TRUE => return Ok(()),
                FALSE => {}
                _ => kept.push(l),
            }
        }
        match kept.len() {
            0 => {
                self.ok = false;
            }
            1 => {
                self.enqueue(kept[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(kept, false);
            }
        }
        Ok(())
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> usize {
        let idx = self.clauses.len();
        self.watches[lits[0].code()].push(Watcher {
            clause: idx,
            blocker: lits[1],
        });
        self.watches[lits[1].code()].push(Watcher {
            clause: idx,
            blocker: lits[0],
        });
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        if learnt {
            self.num_learnts += 1;
        }
        idx
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var() as usize;
        self.assigns[v] = if l.is_positive() { TRUE } else { FALSE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause index.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.clauses[w.clause].deleted {
                    continue;
                }
                if self.value(w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let c = &mut self.clauses[w.clause];
                if c.lits[0] == false_lit {
                    c.lits.swap(0, 1);
                }
                let first = c.lits[0];
                let nw = Watcher {
                    clause: w.clause,
                    blocker: first,
                };
                if first != w.blocker && self.value(first) == TRUE {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                // Look for a new literal to watch.
                let mut moved = false;
                let len = self.clauses[w.clause].lits.len();
                for k in 2..len {
                    let l = self.clauses[w.clause].lits[k];
                    if self.value(l) != FALSE {
                        let c = &mut self.clauses[w.clause];
                        c.lits.swap(1, k);
                        self.watches[c.lits[1].code()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.value(first) == FALSE {
                    conflict = Some(w.clause);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.clause));
                }
            }
            ws.truncate(j);
            // Watches pushed for `false_lit` during the loop are impossible
            // (the new watch is never the false literal), so overwrite is safe.
            let pushed = std::mem::take(&mut self.watches[false_lit.code()]);
            ws.extend(pushed);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: u32) {
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, c: usize) {
        self.clauses[c].activity += self.cla_inc;
        if self.clauses[c].activity > 1e20 {
            for cl in self.clauses.iter_mut().filter(|c| c.learnt) {
                cl.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn analyze(&mut self, mut confl: usize) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit(0)];
        let mut path = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        loop {
            if self.clauses[confl].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            for k in start..self.clauses[confl].lits.len() {
                let q = self.clauses[confl].lits[k];
                let v = q.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(q.var());
                    if self.level[v] >= self.decision_level() {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            self.seen[lit.var() as usize] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[lit.var() as usize].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();

        // Drop literals implied by others already in the clause.
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            let redundant = match self.reason[l.var() as usize] {
                None => false,
                Some(r) => self.clauses[r].lits.iter().skip(1).all(|q| {
                    let v = q.var() as usize;
                    self.seen[v] || self.level[v] == 0
                }),
            };
            if !redundant {
                keep.push(l);
            }
        }
        for l in &learnt {
            self.seen[l.var() as usize] = false;
        }

        let bt = if keep.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..keep.len() {
                if self.level[keep[i].var() as usize] > self.level[keep[max_i].var() as usize] {
                    max_i = i;
                }
            }
            keep.swap(1, max_i);
            self.level[keep[1].var() as usize]
        };
        (keep, bt)
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for k in (lim..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = l.var();
            self.assigns[v as usize] = UNDEF;
            self.reason[v as usize] = None;
            self.polarity[v as usize] = l.is_positive();
            self.order.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = lim;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        if self.num_vars > 0 && self.rng.gen_bool(0.02) {
            let v = self.rng.gen_range(1..=self.num_vars);
            if self.assigns[v as usize] == UNDEF {
                return Some(Lit::new(v, self.polarity[v as usize]));
            }
        }
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assigns[v as usize] == UNDEF {
                return Some(Lit::new(v, self.polarity[v as usize]));
            }
        }
        None
    }

    fn locked(&self, c: usize) -> bool {
        let l = self.clauses[c].lits[0];
        self.value(l) == TRUE && self.reason[l.var() as usize] == Some(c)
    }

    fn reduce_db(&mut self) {
        let mut learnts: Vec<usize> = (0..self.clauses.len())
            .filter(|&c| self.clauses[c].learnt && !self.clauses[c].deleted)
            .collect();
        learnts.sort_by(|&a, &b| {
            self.clauses[a]
                .activity
                .total_cmp(&self.clauses[b].activity)
        });
        let half = learnts.len() / 2;
        for &c in &learnts[..half] {
            if self.clauses[c].lits.len() > 2 && !self.locked(c) {
                self.clauses[c].deleted = true;
                self.clauses[c].lits = Vec::new();
                self.num_learnts -= 1;
            }
        }
    }

    pub fn solve(&mut self) -> SatResult {
        self.solve_with_assumptions(&[])
    }

    /// Solves under temporary unit assumptions. An UNSAT answer only refers
    /// to the assumptions given; the database stays usable.
    pub fn solve_with_assumptions(&mut self, assumptions: &[Lit]) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return SatResult::Unsat;
        }
        self.max_learnts = self
            .max_learnts
            .max(self.original.len() as f64 / 3.0)
            .max(1000.0);
        let mut restart_limit = 100.0;
        loop {
            match self.search(restart_limit as u64, assumptions) {
                Some(r) => {
                    if r == SatResult::Sat {
                        for v in 1..=self.num_vars as usize {
                            self.model[v] = self.assigns[v] == TRUE;
                        }
                    }
                    self.cancel_until(0);
                    return r;
                }
                None => {
                    restart_limit *= 1.5;
                    self.max_learnts *= 1.1;
                }
            }
        }
    }

    fn search(&mut self, budget: u64, assumptions: &[Lit]) -> Option<SatResult> {
        let mut local = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                local += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(SatResult::Unsat);
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let c = self.attach(learnt, true);
                    self.bump_clause(c);
                    self.enqueue(first, Some(c));
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
                if self.conflicts.is_multiple_of(256)
                    && self.deadline.is_some_and(|d| Instant::now() >= d)
                {
                    return Some(SatResult::Unknown);
                }
            } else {
                if local >= budget {
                    self.cancel_until(0);
                    return None;
                }
                if self.num_learnts as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                }
                let mut next = None;
                while (self.decision_level() as usize) < assumptions.len() {
                    let a = assumptions[self.decision_level() as usize];
                    match self.value(a) {
                        TRUE => self.trail_lim.push(self.trail.len()),
                        FALSE => return Some(SatResult::Unsat),
                        _ => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                let lit = match next {
                    Some(a) => a,
                    None => match self.pick_branch() {
                        Some(l) => l,
                        None => return Some(SatResult::Sat),
                    },
                };
                self.decisions += 1;
                if self.decisions.is_multiple_of(1024)
                    && self.deadline.is_some_and(|d| Instant::now() >= d)
                {
                    return Some(SatResult::Unknown);
                }
                self.trail_lim.push(self.trail.len());
                self.enqueue(lit, None);
            }
        }
    }

    /// Value of `var` in the last satisfying assignment.
    pub fn model_value(&self, var: u32) -> bool {
        self.model[var as usize]
    }

    pub fn lit_true(&self, l: Lit) -> bool {
        self.model_value(l.var()) == l.is_positive()
    }

    /// The added clauses as DIMACS CNF.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.original.len());
        for c in &self.original {
            for l in c {
                let _ = write!(out, "{} ", l.to_dimacs());
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.original
    }
}
