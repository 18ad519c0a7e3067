//! Automatic schedule search: place a pipeline graph onto a fixed
//! execution-unit budget, find the critical path, greedily reassign units
//! toward it, and search over nano-batch splits.
//!
//! The schedule simulator is event-driven list scheduling with two
//! capacity rules: the units of concurrently running operations never
//! exceed the budget, and at most one operation of each resource class
//! runs at a time (two ops contending for the same physical resource gain
//! nothing from co-running and would otherwise let concave unit-scaling
//! curves beat the aggregate capacity of their class). Together these
//! keep every schedule above the per-class work lower bound.
//!
//! Determinism: ready operations start in (topological rank, node id)
//! order, events pop in (time, node id) order, and all tie-breaks use node
//! ids, so identical inputs always yield identical schedules.

use std::collections::BTreeSet;

use crate::cost::ResourceClass;
use crate::error::{Error, Result};
use crate::pipeline::{NanoSplit, NodeId, PipelineGraph};
use crate::profiles::{InterferenceMatrix, ProfileSet};

/// Units assigned to each node, indexed by [`NodeId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitAssignment {
    pub units: Vec<u32>,
}

impl UnitAssignment {
    pub fn uniform(graph: &PipelineGraph, units: u32) -> Self {
        UnitAssignment {
            units: vec![units; graph.len()],
        }
    }

    fn validate(&self, graph: &PipelineGraph, budget: u32) -> Result<()> {
        if self.units.len() != graph.len() {
            return Err(Error::Invariant(format!(
                "assignment covers {} nodes, graph has {}",
                self.units.len(),
                graph.len()
            )));
        }
        for (id, node) in graph.nodes() {
            let u = self.units[id.0];
            if u < node.min_units.max(1) {
                return Err(Error::Invariant(format!(
                    "node {} assigned {u} units, below min_units {}",
                    node.name, node.min_units
                )));
            }
            if u > budget {
                return Err(Error::Infeasible(format!(
                    "node {} demands {u} units, budget is {budget}",
                    node.name
                )));
            }
        }
        Ok(())
    }
}

/// Realized execution window of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start: f64,
    pub end: f64,
    pub units: u32,
}

/// A complete schedule of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Indexed by [`NodeId`].
    pub spans: Vec<Span>,
    pub makespan: f64,
    /// Per-class busy fraction of the makespan.
    pub utilization: Vec<(ResourceClass, f64)>,
}

impl Schedule {
    pub fn duration(&self, id: NodeId) -> f64 {
        self.spans[id.0].end - self.spans[id.0].start
    }

    /// CSV export: `node_id,kind,nano_index,units,start_s,end_s`.
    pub fn to_csv(&self, graph: &PipelineGraph) -> String {
        let mut s = String::from("node_id,kind,nano_index,units,start_s,end_s\n");
        for (id, node) in graph.nodes() {
            let span = &self.spans[id.0];
            s.push_str(&format!(
                "{},{},{},{},{:.9},{:.9}\n",
                node.name, node.kind, node.nano_index, span.units, span.start, span.end
            ));
        }
        s
    }
}

/// Event-driven list scheduling of `graph` under `assign`.
///
/// Interference is sampled once at operation start from the classes
/// already running (a conservative simplification; mid-flight changes in
/// co-residency do not retroactively change durations).
pub fn simulate_schedule(
    graph: &PipelineGraph,
    assign: &UnitAssignment,
    profiles: &ProfileSet,
    interference: &InterferenceMatrix,
    budget: u32,
) -> Result<Schedule> {
    assign.validate(graph, budget)?;
    let n = graph.len();
    let ranks = graph.topo_ranks();
    let mut indegree: Vec<usize> = (0..n).map(|i| graph.preds(NodeId(i)).count()).collect();
    let mut ready: BTreeSet<(usize, usize)> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| (ranks[i], i))
        .collect();
    // (end, id) min-ordered event queue.
    let mut running: BTreeSet<(EventTime, usize)> = BTreeSet::new();
    let mut spans: Vec<Option<Span>> = vec![None; n];
    let mut free_units = budget;
    let mut active_class: Vec<Option<ResourceClass>> = Vec::new();
    let mut now = 0.0f64;
    let mut done = 0usize;

    while done < n {
        // Start pass: launch every ready op that fits the remaining units
        // and whose resource class is idle, in (rank, id) order.
        let candidates: Vec<(usize, usize)> = ready.iter().copied().collect();
        for (rank, i) in candidates {
            let node = graph.node(NodeId(i));
            let curve = profiles.get(node.kind)?;
            let units = assign.units[i];
            if units > free_units {
                continue;
            }
            if active_class.iter().flatten().any(|c| *c == curve.resource_class) {
                continue;
            }
            let mut slowdown = 1.0;
            for c in active_class.iter().flatten() {
                slowdown *= interference.factor(*c, curve.resource_class);
            }
            let duration = curve.eval(node.work, units)? * slowdown;
            ready.remove(&(rank, i));
            free_units -= units;
            active_class.push(Some(curve.resource_class));
            spans[i] = Some(Span {
                start: now,
                end: now + duration,
                units,
            });
            running.insert((EventTime(now + duration), i));
        }

        if running.is_empty() {
            if done < n && ready.is_empty() {
                return Err(Error::Infeasible(
                    "schedule stalled with unreachable nodes".into(),
                ));
            }
            if done < n {
                // Nothing running yet nothing startable would be a deadlock;
                // a single ready op always fits an empty machine.
                return Err(Error::Infeasible("schedule deadlocked".into()));
            }
            break;
        }

        // Advance to the next completion (plus any simultaneous ones).
        let (t, first) = *running.iter().next().unwrap();
        now = t.0;
        let mut finished = vec![first];
        running.remove(&(t, first));
        while let Some(&(t2, j)) = running.iter().next() {
            if t2.0 == now {
                running.remove(&(t2, j));
                finished.push(j);
            } else {
                break;
            }
        }
        for i in finished {
            done += 1;
            let span = spans[i].unwrap();
            free_units += span.units;
            let class = profiles.get(graph.node(NodeId(i)).kind)?.resource_class;
            if let Some(pos) = active_class
                .iter()
                .position(|c| *c == Some(class))
            {
                active_class.swap_remove(pos);
            }
            for s in graph.succs(NodeId(i)) {
                indegree[s.0] -= 1;
                if indegree[s.0] == 0 {
                    ready.insert((ranks[s.0], s.0));
                }
            }
        }
    }

    let spans: Vec<Span> = spans.into_iter().map(Option::unwrap).collect();
    let makespan = spans.iter().map(|s| s.end).fold(0.0, f64::max);
    let mut busy = std::collections::BTreeMap::new();
    for (id, node) in graph.nodes() {
        let class = profiles.get(node.kind)?.resource_class;
        let span = &spans[id.0];
        *busy.entry(class).or_insert(0.0) += span.end - span.start;
    }
    let utilization = [
        ResourceClass::Compute,
        ResourceClass::Memory,
        ResourceClass::Network,
    ]
    .into_iter()
    .map(|c| {
        let t = busy.get(&c).copied().unwrap_or(0.0);
        (c, if makespan > 0.0 { t / makespan } else { 0.0 })
    })
    .collect();

    Ok(Schedule {
        spans,
        makespan,
        utilization,
    })
}

// f64 ordering key for the event queue; times are finite by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
struct EventTime(f64);

impl Eq for EventTime {}
impl PartialOrd for EventTime {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for EventTime {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).expect("finite time")
    }
}

/// The dependency chain with maximal total duration ending at the
/// makespan-defining node; ties break toward smaller node ids.
pub fn critical_path(schedule: &Schedule, graph: &PipelineGraph) -> Vec<NodeId> {
    let n = graph.len();
    if n == 0 {
        return Vec::new();
    }
    let end_node = (0..n)
        .max_by(|&a, &b| {
            schedule.spans[a]
                .end
                .partial_cmp(&schedule.spans[b].end)
                .unwrap()
                .then(b.cmp(&a)) // prefer the smaller id on ties
        })
        .unwrap();
    // Longest (by duration sum) chain ending at each node.
    let order = graph.topo_order();
    let mut best = vec![0.0f64; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    for id in order {
        let i = id.0;
        let mut incoming = 0.0;
        let mut via = None;
        for p in graph.preds(id) {
            let v = best[p.0];
            if v > incoming + 1e-18 || (via.is_none() && v >= incoming) {
                incoming = v;
                via = Some(p.0);
            } else if (v - incoming).abs() <= 1e-18 {
                if let Some(cur) = via {
                    if p.0 < cur {
                        via = Some(p.0);
                    }
                }
            }
        }
        best[i] = incoming + schedule.duration(id);
        prev[i] = via;
    }
    let mut path = Vec::new();
    let mut cursor = Some(end_node);
    while let Some(i) = cursor {
        path.push(NodeId(i));
        cursor = prev[i];
    }
    path.reverse();
    path
}

/// Scheduling bounds for a graph at a given budget: no schedule beats the
/// critical chain at full units or any class's aggregate work time; none
/// needs longer than running everything serially at full units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn schedule_bounds(graph: &PipelineGraph, profiles: &ProfileSet, budget: u32) -> Result<Bounds> {
    let n = graph.len();
    let mut latency = vec![0.0f64; n];
    let mut class_sum = std::collections::BTreeMap::new();
    for (id, node) in graph.nodes() {
        let curve = profiles.get(node.kind)?;
        let t = curve.eval(node.work, budget.min(curve.n_units()))?;
        latency[id.0] = t;
        *class_sum.entry(curve.resource_class).or_insert(0.0) += t;
    }
    let mut chain = vec![0.0f64; n];
    let mut longest: f64 = 0.0;
    for id in graph.topo_order() {
        let incoming = graph
            .preds(id)
            .map(|p| chain[p.0])
            .fold(0.0, f64::max);
        chain[id.0] = incoming + latency[id.0];
        longest = longest.max(chain[id.0]);
    }
    let class_max = class_sum.values().copied().fold(0.0, f64::max);
    let total: f64 = latency.iter().sum();
    Ok(Bounds {
        lower: longest.max(class_max),
        upper: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyParams {
    /// Units moved per accepted step.
    pub quantum: u32,
    pub max_iters: u32,
}

impl Default for GreedyParams {
    fn default() -> Self {
        GreedyParams {
            quantum: 1,
            max_iters: 200,
        }
    }
}

fn initial_assignment(
    graph: &PipelineGraph,
    profiles: &ProfileSet,
    budget: u32,
) -> Result<UnitAssignment> {
    let n = graph.len();
    let mut latency = vec![0.0f64; n];
    for (id, node) in graph.nodes() {
        let curve = profiles.get(node.kind)?;
        latency[id.0] = curve.eval(node.work, budget.min(curve.n_units()))?;
    }
    let total: f64 = latency.iter().sum();
    // Latency-proportional shares, floored at min_units; leftover units go
    // to the largest remainders so the whole budget is handed out.
    let mut units = Vec::with_capacity(n);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (id, node) in graph.nodes() {
        let share = if total > 0.0 {
            latency[id.0] / total
        } else {
            1.0 / n as f64
        };
        let exact = share * budget as f64;
        let u = (exact.floor() as u32).clamp(node.min_units.max(1), budget);
        remainders.push((exact - exact.floor(), id.0));
        units.push(u);
    }
    let assigned: u32 = units.iter().sum();
    let mut leftover = budget.saturating_sub(assigned);
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut cursor = 0;
    while leftover > 0 && !remainders.is_empty() {
        let i = remainders[cursor % remainders.len()].1;
        if units[i] < budget {
            units[i] += 1;
            leftover -= 1;
        }
        cursor += 1;
        if cursor > remainders.len() * budget as usize {
            break;
        }
    }
    Ok(UnitAssignment { units })
}

/// Alternative seed: partition the budget across the three resource
/// classes proportionally to each class's total full-budget time, then
/// give every op its class's share. Ops of one class never co-run, so
/// they can share one slot of the partition; ops of different classes
/// overlap within the budget by construction.
fn class_partition_assignment(
    graph: &PipelineGraph,
    profiles: &ProfileSet,
    budget: u32,
) -> Result<UnitAssignment> {
    let mut class_time = std::collections::BTreeMap::new();
    for (id, node) in graph.nodes() {
        let curve = profiles.get(node.kind)?;
        let t = curve.eval(node.work, budget.min(curve.n_units()))?;
        *class_time.entry(curve.resource_class).or_insert(0.0) += t;
        let _ = id;
    }
    let total: f64 = class_time.values().sum();
    let mut share: std::collections::BTreeMap<ResourceClass, u32> = std::collections::BTreeMap::new();
    let mut remainders: Vec<(f64, ResourceClass)> = Vec::new();
    let mut assigned = 0;
    for (&class, &t) in &class_time {
        let exact = if total > 0.0 {
            t / total * budget as f64
        } else {
            budget as f64 / class_time.len() as f64
        };
        let u = (exact.floor() as u32).max(1).min(budget);
        assigned += u;
        share.insert(class, u);
        remainders.push((exact - exact.floor(), class));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut leftover = budget.saturating_sub(assigned);
    for (_, class) in remainders.iter().cycle().take(remainders.len() * 2) {
        if leftover == 0 {
            break;
        }
        let u = share.get_mut(class).unwrap();
        if *u < budget {
            *u += 1;
            leftover -= 1;
        }
    }
    let mut units = Vec::with_capacity(graph.len());
    for (_, node) in graph.nodes() {
        let class = profiles.get(node.kind)?.resource_class;
        units.push(share[&class].max(node.min_units.max(1)).min(budget));
    }
    Ok(UnitAssignment { units })
}

/// Per-node slack: how late the op could start (holding everything else's
/// realized durations and the DAG edges) without growing the makespan.
fn slacks(schedule: &Schedule, graph: &PipelineGraph) -> Vec<f64> {
    let n = graph.len();
    let mut latest_start = vec![f64::INFINITY; n];
    let order = graph.topo_order();
    for id in order.iter().rev() {
        let i = id.0;
        let latest_end = if graph.succs(*id).next().is_none() {
            schedule.makespan
        } else {
            graph
                .succs(*id)
                .map(|s| latest_start[s.0])
                .fold(f64::INFINITY, f64::min)
        };
        latest_start[i] = latest_end - schedule.duration(*id);
    }
    (0..n)
        .map(|i| latest_start[i] - schedule.spans[i].start)
        .collect()
}

/// Greedy critical-path unit optimization.
///
/// Starting from an assignment proportional to each op's full-budget
/// latency share, repeatedly move `quantum` units from the non-critical op
/// with the most slack to whichever critical op best reduces the makespan,
/// accepting only strict improvements. Donors are tried in decreasing
/// slack order so a blocked top donor does not end the search early.
///
/// Unit counts only constrain operations that co-run, so when no transfer
/// helps, a critical op may also be grown outright by `quantum` (the
/// scheduler serializes anything that stops fitting). An accepted move is
/// repeated while it keeps strictly improving before the critical path is
/// recomputed, so one iteration can shift many units along a profitable
/// direction. The all-units-serial schedule is kept as a fallback
/// candidate, so the result never exceeds sequential execution at full
/// units.
pub fn greedy_optimize(
    graph: &PipelineGraph,
    profiles: &ProfileSet,
    budget: u32,
    params: &GreedyParams,
) -> Result<(UnitAssignment, Schedule)> {
    if budget == 0 {
        return Err(Error::Infeasible("unit budget must be positive".into()));
    }
    for (_, node) in graph.nodes() {
        if node.min_units > budget {
            return Err(Error::Infeasible(format!(
                "node {} requires {} units, budget is {budget}",
                node.name, node.min_units
            )));
        }
    }
    let interference = InterferenceMatrix::identity();

    // Two documented starting points: the latency-proportional assignment,
    // and the per-class partition that seeds cross-class overlap. The
    // descent is greedy, so the better converged candidate wins.
    let mut best: Option<(UnitAssignment, Schedule)> = None;
    for seed in [
        initial_assignment(graph, profiles, budget)?,
        class_partition_assignment(graph, profiles, budget)?,
    ] {
        let (assign, sched) = descend(graph, profiles, budget, params, seed, &interference)?;
        let replace = match &best {
            None => true,
            Some((_, cur)) => sched.makespan < cur.makespan * (1.0 - 1e-12),
        };
        if replace {
            best = Some((assign, sched));
        }
    }
    let (assign, schedule) = best.expect("at least one seed");

    // Serial fallback: every op at the full budget runs alone; this is the
    // sequential upper bound and caps pathological descents.
    let serial = UnitAssignment::uniform(graph, budget);
    let serial_sched = simulate_schedule(graph, &serial, profiles, &interference, budget)?;
    if serial_sched.makespan < schedule.makespan * (1.0 - 1e-12) {
        return Ok((serial, serial_sched));
    }
    Ok((assign, schedule))
}

fn descend(
    graph: &PipelineGraph,
    profiles: &ProfileSet,
    budget: u32,
    params: &GreedyParams,
    seed: UnitAssignment,
    interference: &InterferenceMatrix,
) -> Result<(UnitAssignment, Schedule)> {
    let mut assign = seed;
    let mut schedule = simulate_schedule(graph, &assign, profiles, interference, budget)?;

    let quantum = params.quantum.max(1);
    // Re-applies (donor -> target) while it strictly improves; donor None
    // is a pure growth move.
    let line_search = |assign: &mut UnitAssignment,
                       schedule: &mut Schedule,
                       donor: Option<usize>,
                       target: usize|
     -> Result<()> {
        loop {
            let mut trial = assign.clone();
            if let Some(d) = donor {
                if trial.units[d] < graph.node(NodeId(d)).min_units.max(1) + quantum {
                    return Ok(());
                }
                trial.units[d] -= quantum;
            }
            if trial.units[target] + quantum > budget {
                return Ok(());
            }
            trial.units[target] += quantum;
            let sched = simulate_schedule(graph, &trial, profiles, interference, budget)?;
            if sched.makespan < schedule.makespan * (1.0 - 1e-12) {
                *assign = trial;
                *schedule = sched;
            } else {
                return Ok(());
            }
        }
    };
    for _ in 0..params.max_iters {
        let critical: BTreeSet<usize> = critical_path(&schedule, graph)
            .into_iter()
            .map(|id| id.0)
            .collect();
        let slack = slacks(&schedule, graph);
        let mut donors: Vec<usize> = (0..graph.len())
            .filter(|i| !critical.contains(i))
            .filter(|&i| assign.units[i] >= graph.node(NodeId(i)).min_units.max(1) + quantum)
            .collect();
        donors.sort_by(|&a, &b| slack[b].partial_cmp(&slack[a]).unwrap().then(a.cmp(&b)));

        // The dependency-defined critical path is the first place to add
        // units, but exclusivity waits mean the binding op is not always
        // on it; a second pass considers every op as recipient.
        let all: Vec<usize> = (0..graph.len()).collect();
        let recipient_sets: [&[usize]; 2] = [&critical_vec(&critical), &all];

        let mut improved = false;
        'passes: for recipients in recipient_sets {
            for donor in donors.iter().copied() {
                let mut best: Option<(f64, usize, Schedule)> = None;
                for &target in recipients {
                    if target == donor || assign.units[target] + quantum > budget {
                        continue;
                    }
                    let mut trial = assign.clone();
                    trial.units[donor] -= quantum;
                    trial.units[target] += quantum;
                    let sched = simulate_schedule(graph, &trial, profiles, interference, budget)?;
                    let better_than_best = match &best {
                        None => true,
                        Some((m, t, _)) => {
                            sched.makespan < *m - 1e-18 || (sched.makespan <= *m && target < *t)
                        }
                    };
                    if better_than_best {
                        best = Some((sched.makespan, target, sched));
                    }
                }
                if let Some((makespan, target, sched)) = best {
                    if makespan < schedule.makespan * (1.0 - 1e-12) {
                        assign.units[donor] -= quantum;
                        assign.units[target] += quantum;
                        schedule = sched;
                        line_search(&mut assign, &mut schedule, Some(donor), target)?;
                        improved = true;
                        break 'passes;
                    }
                }
            }

            // Growth move: more units for a recipient without a donor.
            let mut best: Option<(f64, usize, Schedule)> = None;
            for &target in recipients {
                if assign.units[target] + quantum > budget {
                    continue;
                }
                let mut trial = assign.clone();
                trial.units[target] += quantum;
                let sched = simulate_schedule(graph, &trial, profiles, interference, budget)?;
                let better = match &best {
                    None => true,
                    Some((m, t, _)) => {
                        sched.makespan < *m - 1e-18 || (sched.makespan <= *m && target < *t)
                    }
                };
                if better {
                    best = Some((sched.makespan, target, sched));
                }
            }
            if let Some((makespan, target, sched)) = best {
                if makespan < schedule.makespan * (1.0 - 1e-12) {
                    assign.units[target] += quantum;
                    schedule = sched;
                    line_search(&mut assign, &mut schedule, None, target)?;
                    improved = true;
                    break 'passes;
                }
            }
        }

        if !improved {
            // Shrink move: freeing units can re-enable overlap an earlier
            // growth step destroyed. Largest holdings first.
            let mut order: Vec<usize> = (0..graph.len())
                .filter(|&i| assign.units[i] >= graph.node(NodeId(i)).min_units.max(1) + quantum)
                .collect();
            order.sort_by(|&a, &b| assign.units[b].cmp(&assign.units[a]).then(a.cmp(&b)));
            for i in order {
                let mut trial = assign.clone();
                trial.units[i] -= quantum;
                let sched = simulate_schedule(graph, &trial, profiles, interference, budget)?;
                if sched.makespan < schedule.makespan * (1.0 - 1e-12) {
                    assign = trial;
                    schedule = sched;
                    shrink_search(
                        graph, profiles, budget, quantum, interference, &mut assign,
                        &mut schedule, i,
                    )?;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok((assign, schedule))
}

fn critical_vec(critical: &BTreeSet<usize>) -> Vec<usize> {
    critical.iter().copied().collect()
}

/// Keeps shrinking one op while the makespan strictly improves.
#[allow(clippy::too_many_arguments)]
fn shrink_search(
    graph: &PipelineGraph,
    profiles: &ProfileSet,
    budget: u32,
    quantum: u32,
    interference: &InterferenceMatrix,
    assign: &mut UnitAssignment,
    schedule: &mut Schedule,
    target: usize,
) -> Result<()> {
    let min = graph.node(NodeId(target)).min_units.max(1);
    loop {
        if assign.units[target] < min + quantum {
            return Ok(());
        }
        let mut trial = assign.clone();
        trial.units[target] -= quantum;
        let sched = simulate_schedule(graph, &trial, profiles, interference, budget)?;
        if sched.makespan < schedule.makespan * (1.0 - 1e-12) {
            *assign = trial;
            *schedule = sched;
        } else {
            return Ok(());
        }
    }
}

/// One evaluated split candidate.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub split: NanoSplit,
    /// None when the candidate was infeasible.
    pub makespan: Option<f64>,
}

/// Outcome of a split search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_split: NanoSplit,
    pub best_assignment: UnitAssignment,
    pub best_schedule: Schedule,
    pub best_graph: PipelineGraph,
    pub bounds: Bounds,
    pub candidates: Vec<Candidate>,
}

type EvaluatedCandidate = (NanoSplit, Result<(PipelineGraph, UnitAssignment, Schedule)>);

fn pick_best(
    graphs: Vec<EvaluatedCandidate>,
    profiles: &ProfileSet,
    budget: u32,
) -> Result<SearchResult> {
    let mut candidates = Vec::with_capacity(graphs.len());
    let mut best: Option<(usize, PipelineGraph, UnitAssignment, Schedule)> = None;
    for (idx, (split, outcome)) in graphs.into_iter().enumerate() {
        match outcome {
            Ok((graph, assign, sched)) => {
                candidates.push(Candidate {
                    split,
                    makespan: Some(sched.makespan),
                });
                let replace = match &best {
                    None => true,
                    Some((_, _, _, cur)) => sched.makespan < cur.makespan - 1e-18,
                };
                if replace {
                    best = Some((idx, graph, assign, sched));
                }
            }
            Err(_) => candidates.push(Candidate {
                split,
                makespan: None,
            }),
        }
    }
    let (idx, graph, assign, sched) =
        best.ok_or_else(|| Error::Infeasible("all split candidates infeasible".into()))?;
    let bounds = schedule_bounds(&graph, profiles, budget)?;
    Ok(SearchResult {
        best_split: candidates[idx].split.clone(),
        best_assignment: assign,
        best_schedule: sched,
        best_graph: graph,
        bounds,
        candidates,
    })
}

fn eval_one(
    builder: &(dyn Fn(&NanoSplit) -> Result<PipelineGraph> + Sync),
    profiles: &ProfileSet,
    budget: u32,
    params: &GreedyParams,
    split: &NanoSplit,
) -> Result<(PipelineGraph, UnitAssignment, Schedule)> {
    let graph = builder(split)?;
    let (assign, sched) = greedy_optimize(&graph, profiles, budget, params)?;
    Ok((graph, assign, sched))
}

/// Runs [`greedy_optimize`] on every split and returns the minimum-makespan
/// candidate; ties keep the earliest split in the given order. Candidate
/// evaluation parallelizes under the `parallel` feature; results are
/// identical either way.
pub fn search(
    builder: &(dyn Fn(&NanoSplit) -> Result<PipelineGraph> + Sync),
    splits: &[NanoSplit],
    profiles: &ProfileSet,
    budget: u32,
    params: &GreedyParams,
) -> Result<SearchResult> {
    if splits.is_empty() {
        return Err(Error::Infeasible("no split candidates to search".into()));
    }
    #[cfg(feature = "parallel")]
    let evaluated: Vec<_> = {
        use rayon::prelude::*;
        splits
            .par_iter()
            .map(|s| (s.clone(), eval_one(builder, profiles, budget, params, s)))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let evaluated: Vec<_> = splits
        .iter()
        .map(|s| (s.clone(), eval_one(builder, profiles, budget, params, s)))
        .collect();
    pick_best(evaluated, profiles, budget)
}

/// Sequential reference engine for [`search`]; used when the `parallel`
/// feature is disabled and by the benchmark suite as the comparison
/// baseline.
pub fn search_serial(
    builder: &(dyn Fn(&NanoSplit) -> Result<PipelineGraph> + Sync),
    splits: &[NanoSplit],
    profiles: &ProfileSet,
    budget: u32,
    params: &GreedyParams,
) -> Result<SearchResult> {
    if splits.is_empty() {
        return Err(Error::Infeasible("no split candidates to search".into()));
    }
    let evaluated: Vec<_> = splits
        .iter()
        .map(|s| (s.clone(), eval_one(builder, profiles, budget, params, s)))
        .collect();
    pick_best(evaluated, profiles, budget)
}
