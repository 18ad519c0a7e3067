//! Per-layer operation DAGs with nano-batch splits.
//!
//! A nano-batch is a sub-division of the global batch at the granularity
//! of individual operations, which breaks the sequential dependency chain
//! of one batch and exposes overlap between operations of different
//! resource classes.
//!
//! Two builders matter: the sequential baseline (every operation in one
//! total chain over the whole batch) and the overlapped pipeline. The
//! overlapped edge set, per layer, is:
//!
//! ```text
//! KQV1 -> DA1-1 --\
//! KQV2 -> DA1-2 ---+--> AG1 -> O1(col) -> AG2 -> UGD1
//! KQV1,KQV2 -> PF -/
//! KQV3 -> DA2-1 --\
//! KQV4 -> DA2-2 ---+--> O2(row) -> AR -> UGD2
//! ```
//!
//! Four nano-batches feed KQV and decode attention so attention for the
//! first halves can start while the later KQV slices still run; O and UGD
//! are two-way. The second attention group's output is *not* gathered:
//! O2 runs row-parallel on the sharded heads and a single all-reduce after
//! it produces UGD2's input. Per layer that totals two all-gathers and one
//! all-reduce. Layers are identical, so graphs model one layer and carry a
//! layer multiplier; an unrolled builder exists for cross-layer studies.
//! Auxiliary ops (layernorm, RoPE, activation) are fused into neighbors
//! and carry no nodes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::BatchComposition;
use crate::error::{Error, Result};

/// Operation kinds schedulable in a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Kqv,
    DecodeAttn,
    PrefillAttn,
    OCol,
    ORow,
    Ugd,
    AllGather,
    AllReduce,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OpKind::Kqv => "KQV",
            OpKind::DecodeAttn => "DecodeAttn",
            OpKind::PrefillAttn => "PrefillAttn",
            OpKind::OCol => "O_col",
            OpKind::ORow => "O_row",
            OpKind::Ugd => "UGD",
            OpKind::AllGather => "AllGather",
            OpKind::AllReduce => "AllReduce",
        };
        write!(f, "{s}")
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key = s.to_ascii_lowercase().replace(['-', '_', ' '], "");
        Ok(match key.as_str() {
            "kqv" | "gemmkqv" | "qkv" => OpKind::Kqv,
            "decodeattn" | "decodeattention" | "gemv" => OpKind::DecodeAttn,
            "prefillattn" | "prefillattention" | "pf" => OpKind::PrefillAttn,
            "ocol" | "gemmo" | "o1" => OpKind::OCol,
            "orow" | "o2" => OpKind::ORow,
            "ugd" | "gemmugd" | "ffn" => OpKind::Ugd,
            "allgather" | "ag" => OpKind::AllGather,
            "allreduce" | "ar" => OpKind::AllReduce,
            _ => return Err(format!("unknown op kind `{s}`")),
        })
    }
}

/// Index of a node within its graph; doubles as the deterministic
/// tie-break order everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpNode {
    pub name: String,
    pub kind: OpKind,
    pub nano_index: usize,
    /// Work descriptor: dense tokens for GEMMs and collectives, KV elements
    /// for decode attention, prefill tokens for prefill attention.
    pub work: f64,
    pub min_units: u32,
}

/// Fractions of the batch assigned to each nano-batch, per op group.
/// Every group is positive and sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NanoSplit {
    pub kqv: [f64; 4],
    pub attn: [f64; 4],
    pub o: [f64; 2],
    pub ugd: [f64; 2],
}

impl Default for NanoSplit {
    fn default() -> Self {
        NanoSplit {
            kqv: [0.25; 4],
            attn: [0.25; 4],
            o: [0.5; 2],
            ugd: [0.5; 2],
        }
    }
}

impl NanoSplit {
    pub fn validate(&self) -> Result<()> {
        let groups: [(&str, &[f64]); 4] = [
            ("kqv", &self.kqv),
            ("attn", &self.attn),
            ("o", &self.o),
            ("ugd", &self.ugd),
        ];
        for (name, fractions) in groups {
            if fractions.iter().any(|f| *f <= 0.0) {
                return Err(Error::Invariant(format!(
                    "nano split group `{name}` must be strictly positive: {fractions:?}"
                )));
            }
            let sum: f64 = fractions.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Invariant(format!(
                    "nano split group `{name}` must sum to 1, got {sum}"
                )));
            }
        }
        Ok(())
    }

    /// Compact display like `kqv=1/4,1/4,1/4,1/4;o=1/2,1/2;...`.
    pub fn describe(&self) -> String {
        let fmt_group = |g: &[f64]| {
            g.iter()
                .map(|f| format!("{f:.4}"))
                .collect::<Vec<_>>()
                .join("/")
        };
        format!(
            "kqv={};attn={};o={};ugd={}",
            fmt_group(&self.kqv),
            fmt_group(&self.attn),
            fmt_group(&self.o),
            fmt_group(&self.ugd)
        )
    }

    /// Lexicographic key over all fractions, for deterministic ordering.
    pub fn sort_key(&self) -> Vec<u64> {
        self.kqv
            .iter()
            .chain(self.attn.iter())
            .chain(self.o.iter())
            .chain(self.ugd.iter())
            .map(|f| (f * 1e12) as u64)
            .collect()
    }
}

/// An immutable operation DAG for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineGraph {
    nodes: Vec<OpNode>,
    edges: Vec<(NodeId, NodeId)>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    pub split: NanoSplit,
    /// Reported makespans are per modeled layer times this factor.
    pub layer_multiplier: f64,
}

impl PipelineGraph {
    fn build(
        nodes: Vec<OpNode>,
        edges: Vec<(usize, usize)>,
        split: NanoSplit,
        layer_multiplier: f64,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::Invariant(format!("edge ({a},{b}) out of range")));
            }
            succs[a].push(b);
            preds[b].push(a);
        }
        let graph = PipelineGraph {
            nodes,
            edges: edges.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect(),
            preds,
            succs,
            split,
            layer_multiplier,
        };
        graph.check_acyclic()?;
        Ok(graph)
    }

    fn check_acyclic(&self) -> Result<()> {
        if self.topo_order().len() != self.nodes.len() {
            return Err(Error::Invariant("pipeline graph contains a cycle".into()));
        }
        Ok(())
    }

    /// Assembles a graph from explicit nodes and `(from, to)` index edges,
    /// validating acyclicity. Intended for hand-built fixtures; the
    /// pipeline builders are the normal construction path.
    pub fn from_parts(nodes: Vec<OpNode>, edges: Vec<(usize, usize)>) -> Result<Self> {
        PipelineGraph::build(nodes, edges, NanoSplit::default(), 1.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &OpNode {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &OpNode)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn preds(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.preds[id.0].iter().map(|&i| NodeId(i))
    }

    pub fn succs(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.succs[id.0].iter().map(|&i| NodeId(i))
    }

    /// Kahn topological order with NodeId tie-breaking; also used to
    /// detect cycles.
    pub fn topo_order(&self) -> Vec<NodeId> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.preds.iter().map(|p| p.len()).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..n)
            .filter(|&i| indegree[i] == 0)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(NodeId(i));
            for &s in &self.succs[i] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        order
    }

    /// Longest-path depth from sources, used as the scheduler's rank.
    pub fn topo_ranks(&self) -> Vec<usize> {
        let order = self.topo_order();
        let mut rank = vec![0usize; self.nodes.len()];
        for id in order {
            for &p in &self.preds[id.0] {
                rank[id.0] = rank[id.0].max(rank[p] + 1);
            }
        }
        rank
    }

    /// Total work per op kind, for conservation checks and reports.
    pub fn work_by_kind(&self) -> std::collections::BTreeMap<OpKind, f64> {
        let mut map = std::collections::BTreeMap::new();
        for n in &self.nodes {
            *map.entry(n.kind).or_insert(0.0) += n.work;
        }
        map
    }

    /// Structured-text export: a node block and an edge block.
    pub fn to_text(&self) -> String {
        let mut s = String::from("[nodes]\n# id kind nano_index work min_units\n");
        for (id, n) in self.nodes() {
            s.push_str(&format!(
                "{} {} {} {} {:.6} {}\n",
                id, n.name, n.kind, n.nano_index, n.work, n.min_units
            ));
        }
        s.push_str("[edges]\n# from -> to\n");
        for (a, b) in &self.edges {
            s.push_str(&format!(
                "{} -> {}\n",
                self.nodes[a.0].name, self.nodes[b.0].name
            ));
        }
        s
    }
}

/// Builds the overlapped pipeline for one layer (see the module docs for
/// the edge set). Prefill attention rides in nano-batch 1 as a single
/// node.
pub fn build_overlapped_pipeline(comp: &BatchComposition, split: &NanoSplit) -> Result<PipelineGraph> {
    split.validate()?;
    comp.validate()?;
    let b = comp.b_dense;
    let mut nodes = Vec::new();
    let mut add = |name: &str, kind: OpKind, nano: usize, work: f64| -> usize {
        nodes.push(OpNode {
            name: name.to_string(),
            kind,
            nano_index: nano,
            work,
            min_units: 1,
        });
        nodes.len() - 1
    };

    let kqv: Vec<usize> = (0..4)
        .map(|i| add(&format!("kqv{}", i + 1), OpKind::Kqv, i, split.kqv[i] * b))
        .collect();
    let da: Vec<usize> = (0..4)
        .map(|i| {
            add(
                &format!("da{}-{}", i / 2 + 1, i % 2 + 1),
                OpKind::DecodeAttn,
                i,
                split.attn[i] * comp.e_kv_touched,
            )
        })
        .collect();
    let pf = add("pf", OpKind::PrefillAttn, 0, comp.n_prefill_tokens);
    let ag1 = add("ag1", OpKind::AllGather, 0, split.o[0] * b);
    let o1 = add("o1", OpKind::OCol, 0, split.o[0] * b);
    let ag2 = add("ag2", OpKind::AllGather, 0, split.ugd[0] * b);
    let ugd1 = add("ugd1", OpKind::Ugd, 0, split.ugd[0] * b);
    let o2 = add("o2", OpKind::ORow, 1, split.o[1] * b);
    let ar = add("ar", OpKind::AllReduce, 1, split.ugd[1] * b);
    let ugd2 = add("ugd2", OpKind::Ugd, 1, split.ugd[1] * b);

    let mut edges = Vec::new();
    for i in 0..4 {
        edges.push((kqv[i], da[i]));
    }
    edges.push((kqv[0], pf));
    edges.push((kqv[1], pf));
    // Nano-batch 1: gather attention output, column-parallel O, gather
    // its output for UGD1.
    edges.push((da[0], ag1));
    edges.push((da[1], ag1));
    edges.push((pf, ag1));
    edges.push((ag1, o1));
    edges.push((o1, ag2));
    edges.push((ag2, ugd1));
    // Nano-batch 2: row-parallel O with no preceding gather, then one
    // all-reduce feeding UGD2.
    edges.push((da[2], o2));
    edges.push((da[3], o2));
    edges.push((o2, ar));
    edges.push((ar, ugd2));

    PipelineGraph::build(nodes, edges, split.clone(), 1.0)
}

/// Sequential baseline: one node per op kind in a total chain over the
/// whole batch. The chain is KQV -> DecodeAttn -> PrefillAttn ->
/// AllGather -> O(col) -> UGD -> AllReduce; the single AllGather node
/// carries both gathers' traffic (work 2*b_dense), so total collective
/// work matches the tensor-parallel accounting of two AGs plus one AR.
pub fn build_sequential_pipeline(comp: &BatchComposition) -> Result<PipelineGraph> {
    comp.validate()?;
    let b = comp.b_dense;
    let nodes = vec![
        ("kqv", OpKind::Kqv, b),
        ("da", OpKind::DecodeAttn, comp.e_kv_touched),
        ("pf", OpKind::PrefillAttn, comp.n_prefill_tokens),
        ("ag", OpKind::AllGather, 2.0 * b),
        ("o", OpKind::OCol, b),
        ("ugd", OpKind::Ugd, b),
        ("ar", OpKind::AllReduce, b),
    ];
    let nodes: Vec<OpNode> = nodes
        .into_iter()
        .map(|(name, kind, work)| OpNode {
            name: name.to_string(),
            kind,
            nano_index: 0,
            work,
            min_units: 1,
        })
        .collect();
    let edges: Vec<(usize, usize)> = (0..nodes.len() - 1).map(|i| (i, i + 1)).collect();
    PipelineGraph::build(nodes, edges, NanoSplit::default(), 1.0)
}

/// Single-device pipeline for small models: no network nodes; the FFN of
/// one nano-batch overlaps attention of the other. Two chains
/// KQVi -> DAi -> Oi -> UGDi with prefill attention in nano-batch 1;
/// the two-way `o` group of the split sizes both chains.
pub fn build_single_device_pipeline(
    comp: &BatchComposition,
    split: &NanoSplit,
) -> Result<PipelineGraph> {
    split.validate()?;
    comp.validate()?;
    let b = comp.b_dense;
    let mut nodes = Vec::new();
    let mut add = |name: &str, kind: OpKind, nano: usize, work: f64| -> usize {
        nodes.push(OpNode {
            name: name.to_string(),
            kind,
            nano_index: nano,
            work,
            min_units: 1,
        });
        nodes.len() - 1
    };
    let mut edges = Vec::new();
    let mut pf_home = None;
    for i in 0..2 {
        let frac = split.o[i];
        let kqv = add(&format!("kqv{}", i + 1), OpKind::Kqv, i, frac * b);
        let da = add(
            &format!("da{}", i + 1),
            OpKind::DecodeAttn,
            i,
            frac * comp.e_kv_touched,
        );
        let o = add(&format!("o{}", i + 1), OpKind::OCol, i, frac * b);
        let ugd = add(&format!("ugd{}", i + 1), OpKind::Ugd, i, frac * b);
        edges.push((kqv, da));
        edges.push((da, o));
        edges.push((o, ugd));
        if i == 0 {
            pf_home = Some((kqv, o));
        }
    }
    let (kqv1, o1) = pf_home.unwrap();
    let pf = add("pf", OpKind::PrefillAttn, 0, comp.n_prefill_tokens);
    edges.push((kqv1, pf));
    edges.push((pf, o1));
    PipelineGraph::build(nodes, edges, split.clone(), 1.0)
}

/// Unrolls the overlapped pipeline across `n_layers` for cross-layer
/// studies: each layer's UGD outputs feed the next layer's KQV slices.
pub fn build_overlapped_pipeline_unrolled(
    comp: &BatchComposition,
    split: &NanoSplit,
    n_layers: u32,
) -> Result<PipelineGraph> {
    if n_layers == 0 {
        return Err(Error::Invariant("n_layers must be >= 1".into()));
    }
    let one = build_overlapped_pipeline(comp, split)?;
    let per_layer = one.len();
    let mut nodes = Vec::with_capacity(per_layer * n_layers as usize);
    let mut edges = Vec::new();
    for layer in 0..n_layers as usize {
        let base = layer * per_layer;
        for (_, n) in one.nodes() {
            nodes.push(OpNode {
                name: format!("l{layer}.{}", n.name),
                ..n.clone()
            });
        }
        for (a, b) in one.edges() {
            edges.push((base + a.0, base + b.0));
        }
        if layer > 0 {
            let prev = (layer - 1) * per_layer;
            let layer_outputs: Vec<usize> = one
                .nodes()
                .filter(|(_, n)| n.kind == OpKind::Ugd)
                .map(|(id, _)| prev + id.0)
                .collect();
            let kqv_ids: Vec<usize> = one
                .nodes()
                .filter(|(_, n)| n.kind == OpKind::Kqv)
                .map(|(id, _)| base + id.0)
                .collect();
            for &out in &layer_outputs {
                for &kqv in &kqv_ids {
                    edges.push((out, kqv));
                }
            }
        }
    }
    PipelineGraph::build(nodes, edges, split.clone(), 1.0)
}

/// All ways to cut 1 into `k` positive parts that are multiples of
/// `1/denominator`, in lexicographic order.
pub fn compositions(k: usize, denominator: u32) -> Vec<Vec<f64>> {
    fn rec(parts_left: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts_left == 1 {
            if remaining >= 1 {
                prefix.push(remaining);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for take in 1..=remaining.saturating_sub(parts_left as u32 - 1) {
            prefix.push(take);
            rec(parts_left - 1, remaining - take, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    if k >= 1 {
        rec(k, denominator, &mut Vec::new(), &mut raw);
    }
    raw.into_iter()
        .map(|parts| {
            parts
                .into_iter()
                .map(|p| p as f64 / denominator as f64)
                .collect()
        })
        .collect()
}

/// Enumerates every valid [`NanoSplit`] whose fractions are multiples of
/// `1/denominator`, lexicographically ordered and deduplicated. With
/// `symmetric_dedup`, splits equal to another under reversing every group
/// (relabeling the nano-batches) keep only their first representative.
pub fn enumerate_splits(denominator: u32, symmetric_dedup: bool) -> Result<Vec<NanoSplit>> {
    if denominator == 0 {
        return Err(Error::Invariant("split granularity must be positive".into()));
    }
    let four = compositions(4, denominator);
    let two = compositions(2, denominator);
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for kqv in &four {
        for attn in &four {
            for o in &two {
                for ugd in &two {
                    let split = NanoSplit {
                        kqv: [kqv[0], kqv[1], kqv[2], kqv[3]],
                        attn: [attn[0], attn[1], attn[2], attn[3]],
                        o: [o[0], o[1]],
                        ugd: [ugd[0], ugd[1]],
                    };
                    if symmetric_dedup {
                        let mut rev = split.clone();
                        rev.kqv.reverse();
                        rev.attn.reverse();
                        rev.o.reverse();
                        rev.ugd.reverse();
                        let key = split.sort_key().min(rev.sort_key());
                        if !seen.insert(key) {
                            continue;
                        }
                    }
                    out.push(split);
                }
            }
        }
    }
    Ok(out)
}
