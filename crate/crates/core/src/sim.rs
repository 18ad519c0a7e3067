//! Iteration-level serving simulator.
//!
//! The engine advances one model iteration at a time: it refills the
//! global batch every iteration (continuous batching), co-batches chunked
//! prefill with decode, restricts the dense batch size to a configured
//! set of high-efficiency sizes (discrete batching), admits new requests
//! against a projected peak-memory trajectory, and removes finished
//! requests two iterations after their EOS (asynchronous batch formation
//! generates one useless token per request).
//!
//! Iteration latency comes from one of two backends: `Sequential` sums
//! each operation's binding-resource time; `Overlapped` replays the
//! greedy-optimized unit schedule of the overlapped pipeline with node
//! works rescaled to the iteration's composition, and falls back to the
//! sequential plan whenever that would be faster. Both backends are
//! floored at the aggregate roofline (total FLOPs, bytes, and network
//! traffic each divided by their capacity), so simulated throughput can
//! never exceed the analytical optimum.
//!
//! A run is strictly single-threaded and deterministic; independent runs
//! (e.g. rate sweeps) may execute concurrently.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::autosearch::{greedy_optimize, simulate_schedule, GreedyParams, UnitAssignment};
use crate::cost::{
    self, op_resource_table, BatchComposition, OpResourceRow,
};
use crate::error::{Error, Result};
use crate::pipeline::{build_overlapped_pipeline, NanoSplit};
use crate::profiles::{synth_profiles, AlphaConfig, InterferenceMatrix, ProfileSet};
use crate::specs::{HardwareSpec, ModelConfig, TraceRequest, WorkloadStats};

/// Iteration latency backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Sequential,
    Overlapped,
}

/// What to evict when actual memory use outruns the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardPolicy {
    /// Requeue the most recently admitted decoding request.
    Youngest,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Allowed dense batch sizes, strictly increasing.
    pub dense_batch_options: Vec<u64>,
    pub latency_backend: Backend,
    /// Iterations between a request's EOS and its removal from the batch.
    pub eos_lag_iters: u32,
    /// Assumed total decode length when projecting memory usage.
    pub avg_decode_hint: f64,
    pub discard_policy: DiscardPolicy,
    pub offload_enabled: bool,
    /// Nano-batch split used by the overlapped backend.
    pub split: NanoSplit,
    /// Saturation parameters for the overlapped backend's curves.
    pub alphas: AlphaConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            dense_batch_options: vec![512, 768, 1024, 1536, 2048],
            latency_backend: Backend::Sequential,
            eos_lag_iters: 2,
            avg_decode_hint: 256.0,
            discard_policy: DiscardPolicy::Youngest,
            offload_enabled: false,
            split: NanoSplit::default(),
            alphas: AlphaConfig::default(),
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dense_batch_options.is_empty() {
            return Err(Error::Invariant(
                "dense_batch_options must be non-empty".into(),
            ));
        }
        if !self
            .dense_batch_options
            .windows(2)
            .all(|w| w[0] < w[1])
        {
            return Err(Error::Invariant(
                "dense_batch_options must be strictly increasing".into(),
            ));
        }
        if self.dense_batch_options[0] == 0 {
            return Err(Error::Invariant("dense batch sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Dense-batch policy outcome for one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseChoice {
    pub b_dense: u64,
    pub prefill_chunk: u64,
    pub padding: u64,
}

/// Picks the dense batch size: the largest option not exceeding the
/// available tokens (decode plus prefill backlog); if even the smallest
/// option exceeds them, that smallest option runs with padding. Decode
/// tokens can never be deferred, so a decode load above the largest
/// option runs off-menu at exactly the decode count.
pub fn choose_dense_batch(n_decode: u64, prefill_backlog: u64, options: &[u64]) -> DenseChoice {
    let available = n_decode + prefill_backlog;
    let b_dense = match options.iter().rev().find(|&&o| o <= available) {
        Some(&o) => o.max(n_decode),
        None => options[0],
    };
    if b_dense <= n_decode {
        return DenseChoice {
            b_dense: n_decode.max(b_dense),
            prefill_chunk: 0,
            padding: 0,
        };
    }
    let room = b_dense - n_decode;
    let prefill_chunk = room.min(prefill_backlog);
    DenseChoice {
        b_dense,
        prefill_chunk,
        padding: room - prefill_chunk,
    }
}

/// Admission-relevant view of one live request.
#[derive(Debug, Clone, Copy)]
pub struct LiveView {
    pub kv_tokens: u64,
    pub prefill_remaining: u64,
    pub decoded: u64,
}

/// Projects the KV-byte trajectory of the live set plus a candidate
/// forward to all projected completions, assuming every request decodes
/// exactly `avg_decode_hint` tokens and holds its cache for the EOS lag.
/// Prefill is projected to land in one iteration, which over-estimates
/// early occupancy and keeps the check conservative.
///
/// Returns the projected peak bytes (weights included) and whether the
/// candidate fits.
pub fn predict_peak_memory(
    live: &[LiveView],
    candidate: &TraceRequest,
    config: &ServerConfig,
    model: &ModelConfig,
    hw: &HardwareSpec,
) -> (f64, bool) {
    let hint = config.avg_decode_hint.round().max(1.0) as u64;
    let lag_growth = config.eos_lag_iters.saturating_sub(1) as u64;

    // Events on the iteration timeline: per-step slope changes and jumps,
    // in tokens.
    let mut jump: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
    let mut slope: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
    let mut base_tokens = 0.0f64;

    let mut add_entry = |kv0: u64, prefill: u64, decoded: u64| {
        base_tokens += kv0 as f64;
        let ramp_start = if prefill > 0 {
            *jump.entry(1).or_insert(0.0) += prefill as f64;
            2
        } else {
            1
        };
        let ramp_len = hint.saturating_sub(decoded) + lag_growth;
        if ramp_len > 0 {
            *slope.entry(ramp_start).or_insert(0.0) += 1.0;
            *slope.entry(ramp_start + ramp_len).or_insert(0.0) -= 1.0;
        }
        let free_at = ramp_start + ramp_len;
        let total = kv0 as f64 + prefill as f64 + ramp_len as f64;
        *jump.entry(free_at).or_insert(0.0) -= total;
    };

    for v in live {
        add_entry(v.kv_tokens, v.prefill_remaining, v.decoded);
    }
    add_entry(0, candidate.input_len, 0);

    let mut steps: Vec<u64> = jump.keys().chain(slope.keys()).copied().collect();
    steps.sort_unstable();
    steps.dedup();
    let mut tokens = base_tokens;
    let mut peak_tokens = base_tokens;
    let mut cur_slope = 0.0;
    let mut prev_step = 0u64;
    for s in steps {
        tokens += cur_slope * (s - prev_step) as f64;
        tokens += jump.get(&s).copied().unwrap_or(0.0);
        cur_slope += slope.get(&s).copied().unwrap_or(0.0);
        peak_tokens = peak_tokens.max(tokens);
        prev_step = s;
    }

    let peak_bytes = peak_tokens * model.kv_bytes_per_token() + model.weight_bytes();
    (peak_bytes, peak_bytes <= hw.total_mem_size())
}

#[derive(Debug, Clone)]
struct LiveRequest {
    id: String,
    arrival: f64,
    input_len: u64,
    output_len: u64,
    admit_seq: u64,
    prefill_remaining: u64,
    kv_tokens: u64,
    decoded: u64,
    /// Nonzero once the final real token (the EOS) is out; counts batch
    /// formations until removal.
    drain_left: u32,
    first_token_time: Option<f64>,
    completion_time: Option<f64>,
}

impl LiveRequest {
    fn is_prefilling(&self) -> bool {
        self.prefill_remaining > 0
    }

    fn is_decoding(&self) -> bool {
        self.prefill_remaining == 0 && self.decoded < self.output_len
    }

    fn is_draining(&self) -> bool {
        self.prefill_remaining == 0 && self.decoded >= self.output_len
    }
}

/// One executed iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    /// Simulation clock at the end of this iteration, seconds.
    pub t: f64,
    pub b_dense: u64,
    /// KV-cache bytes resident after this iteration.
    pub kv_bytes: f64,
    pub util_compute: f64,
    pub util_mem: f64,
    pub util_net: f64,
    pub latency: f64,
}

/// Aggregated results of one simulation run.
#[derive(Debug, Clone)]
pub struct SimMetrics {
    /// Counted (input + output) tokens per second.
    pub total_throughput: f64,
    /// Mean end-to-end latency per output token, seconds.
    pub normalized_latency: f64,
    /// (percentile, seconds-per-token) points, percentiles 1..=100.
    pub latency_cdf: Vec<(f64, f64)>,
    pub per_iter: Vec<IterRecord>,
    pub wasted_tokens: u64,
    pub padding_tokens: u64,
    pub elapsed: f64,
    pub iterations: u64,
    pub completed: u64,
    pub counted_tokens: u64,
    /// All decode tokens produced, useful and wasted.
    pub emitted_tokens: u64,
    pub discarded: u64,
    /// Total stall time waiting on KV offload, seconds.
    pub offload_stall: f64,
    eos_lag_iters: u32,
    sum_output_len_completed: u64,
}

impl SimMetrics {
    /// Token conservation: every emitted decode token is either one of a
    /// completed request's `output_len` tokens or one post-EOS token per
    /// completed request per lag iteration.
    pub fn verify_conservation(&self) -> Result<()> {
        let expected_wasted = self.completed * self.eos_lag_iters.saturating_sub(1) as u64;
        if self.wasted_tokens != expected_wasted {
            return Err(Error::Invariant(format!(
                "wasted tokens {} != completed {} x (lag-1)",
                self.wasted_tokens, self.completed
            )));
        }
        if self.emitted_tokens != self.sum_output_len_completed + self.wasted_tokens {
            return Err(Error::Invariant(format!(
                "emitted {} != sum(output_len) {} + wasted {}",
                self.emitted_tokens, self.sum_output_len_completed, self.wasted_tokens
            )));
        }
        Ok(())
    }

    /// `latency_cdf.csv`: `percentile,s_per_token`.
    pub fn cdf_csv(&self) -> String {
        let mut s = String::from("percentile,s_per_token\n");
        for (p, v) in &self.latency_cdf {
            s.push_str(&format!("{p},{v:.9}\n"));
        }
        s
    }

    /// `per_iter.csv`: `t_s,b_dense,kv_bytes,util_compute,util_mem,util_net`.
    pub fn per_iter_csv(&self) -> String {
        let mut s = String::from("t_s,b_dense,kv_bytes,util_compute,util_mem,util_net\n");
        for r in &self.per_iter {
            s.push_str(&format!(
                "{:.9},{},{:.0},{:.6},{:.6},{:.6}\n",
                r.t, r.b_dense, r.kv_bytes, r.util_compute, r.util_mem, r.util_net
            ));
        }
        s
    }
}

/// Precomputed overlapped plan for one dense batch option.
struct Plan {
    assign: UnitAssignment,
    profiles: ProfileSet,
}

/// The iteration-level serving engine.
pub struct Simulator<'a> {
    hw: &'a HardwareSpec,
    model: &'a ModelConfig,
    config: &'a ServerConfig,
    stats: WorkloadStats,
    queue: VecDeque<TraceRequest>,
    live: Vec<LiveRequest>,
    plans: std::collections::BTreeMap<u64, Plan>,
    clock: f64,
    admit_counter: u64,
    // Accumulators.
    iterations: u64,
    emitted_tokens: u64,
    wasted_tokens: u64,
    padding_tokens: u64,
    completed: u64,
    counted_tokens: u64,
    sum_output_len_completed: u64,
    discarded: u64,
    offload_stall: f64,
    per_iter: Vec<IterRecord>,
    norm_latencies: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        hw: &'a HardwareSpec,
        model: &'a ModelConfig,
        config: &'a ServerConfig,
        trace: &[TraceRequest],
    ) -> Result<Self> {
        config.validate()?;
        hw.validate()?;
        model.validate()?;
        // Weights must fit with at least one token of KV headroom.
        cost::e_kv(hw, model)?;

        let stats = trace_stats(trace);
        let mut queue: Vec<TraceRequest> = trace.to_vec();
        queue.sort_by(|a, b| a.arrival.partial_cmp(&b.arrival).unwrap());

        let mut plans = std::collections::BTreeMap::new();
        if config.latency_backend == Backend::Overlapped {
            for &option in &config.dense_batch_options {
                let ref_comp = BatchComposition::steady_state(model, &stats, option as f64);
                let rows = op_resource_table(hw, model, &ref_comp, &stats);
                let profiles = synth_profiles(hw, model, &rows, &config.alphas, 0.0)?;
                let graph = build_overlapped_pipeline(&ref_comp, &config.split)?;
                let (assign, _) =
                    greedy_optimize(&graph, &profiles, hw.n_units, &GreedyParams::default())?;
                plans.insert(option, Plan { assign, profiles });
            }
        }

        Ok(Simulator {
            hw,
            model,
            config,
            stats,
            queue: queue.into(),
            live: Vec::new(),
            plans,
            clock: 0.0,
            admit_counter: 0,
            iterations: 0,
            emitted_tokens: 0,
            wasted_tokens: 0,
            padding_tokens: 0,
            completed: 0,
            counted_tokens: 0,
            sum_output_len_completed: 0,
            discarded: 0,
            offload_stall: 0.0,
            per_iter: Vec::new(),
            norm_latencies: Vec::new(),
        })
    }

    fn live_views(&self) -> Vec<LiveView> {
        self.live
            .iter()
            .map(|r| LiveView {
                kv_tokens: r.kv_tokens,
                prefill_remaining: r.prefill_remaining,
                decoded: r.decoded,
            })
            .collect()
    }

    fn kv_bytes(&self) -> f64 {
        self.live
            .iter()
            .map(|r| r.kv_tokens as f64)
            .sum::<f64>()
            * self.model.kv_bytes_per_token()
    }

    /// Removes drained requests (freeing their KV) and admits arrived
    /// requests that pass the peak-memory check, FIFO without bypass.
    /// Returns bytes freed this formation.
    fn form_membership(&mut self) -> f64 {
        let kv_per_token = self.model.kv_bytes_per_token();
        let mut freed = 0.0;
        self.live.retain(|r| {
            if r.is_draining() && r.drain_left <= 1 {
                freed += r.kv_tokens as f64 * kv_per_token;
                false
            } else {
                true
            }
        });
        while let Some(front) = self.queue.front() {
            if front.arrival > self.clock {
                break;
            }
            let views = self.live_views();
            let (_, admit) =
                predict_peak_memory(&views, front, self.config, self.model, self.hw);
            if !admit {
                break;
            }
            let req = self.queue.pop_front().unwrap();
            self.admit_counter += 1;
            self.live.push(LiveRequest {
                id: req.id,
                arrival: req.arrival,
                input_len: req.input_len,
                output_len: req.output_len,
                admit_seq: self.admit_counter,
                prefill_remaining: req.input_len,
                kv_tokens: 0,
                decoded: 0,
                drain_left: 0,
                first_token_time: None,
                completion_time: None,
            });
        }
        freed
    }

    /// Evicts the youngest decoding request back to the queue head.
    fn discard_youngest(&mut self) -> bool {
        let victim = self
            .live
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_decoding())
            .max_by_key(|(_, r)| r.admit_seq)
            .map(|(i, _)| i);
        let Some(i) = victim else { return false };
        let r = self.live.swap_remove(i);
        // Its emitted tokens will be re-emitted after re-prefill.
        self.emitted_tokens -= r.decoded;
        self.discarded += 1;
        self.queue.push_front(TraceRequest {
            id: r.id,
            arrival: r.arrival,
            input_len: r.input_len,
            output_len: r.output_len,
        });
        true
    }

    fn overlapped_latency(&self, comp: &BatchComposition, option: u64) -> Result<Option<f64>> {
        let Some(plan) = self.plans.get(&option) else {
            return Ok(None);
        };
        // Work scales with the iteration's composition; the unit
        // assignment and structure are reused from the reference plan.
        let graph = build_overlapped_pipeline(comp, &self.config.split)?;
        let sched = simulate_schedule(
            &graph,
            &plan.assign,
            &plan.profiles,
            &InterferenceMatrix::identity(),
            self.hw.n_units,
        )?;
        Ok(Some(sched.makespan * self.model.n_layers as f64))
    }

    /// Runs one iteration. Returns the record, or None when the
    /// simulation has drained.
    pub fn step(&mut self) -> Result<Option<IterRecord>> {
        let freed = self.form_membership();

        if self.live.is_empty() {
            match self.queue.front() {
                None => return Ok(None),
                Some(front) if front.arrival > self.clock => {
                    // Idle until the next arrival.
                    self.clock = front.arrival;
                    return self.step();
                }
                Some(front) => {
                    return Err(Error::ModelDoesNotFit(format!(
                        "request `{}` (input {}) can never be admitted",
                        front.id, front.input_len
                    )));
                }
            }
        }

        // Batch formation: decide decode participants and the dense size.
        let mut decode_idx: Vec<usize> = Vec::new();
        for (i, r) in self.live.iter_mut().enumerate() {
            if r.is_decoding() {
                decode_idx.push(i);
            } else if r.is_draining() && r.drain_left > 1 {
                r.drain_left -= 1;
                decode_idx.push(i);
            }
        }
        let backlog: u64 = self.live.iter().map(|r| r.prefill_remaining).sum();
        let choice = choose_dense_batch(
            decode_idx.len() as u64,
            backlog,
            &self.config.dense_batch_options,
        );
        self.padding_tokens += choice.padding;

        // Chunked prefill, FIFO by admission.
        let mut chunk_left = choice.prefill_chunk;
        let mut prefill_shares: Vec<(usize, u64)> = Vec::new();
        let mut prefill_order: Vec<usize> = (0..self.live.len())
            .filter(|&i| self.live[i].is_prefilling())
            .collect();
        prefill_order.sort_by_key(|&i| self.live[i].admit_seq);
        for i in prefill_order {
            if chunk_left == 0 {
                break;
            }
            let take = self.live[i].prefill_remaining.min(chunk_left);
            chunk_left -= take;
            prefill_shares.push((i, take));
        }

        // Composition for costing: padding rides as prefill-like tokens.
        let e_kv_touched: f64 = decode_idx
            .iter()
            .map(|&i| self.live[i].kv_tokens as f64)
            .sum::<f64>()
            * self.model.kv_elems_per_token();
        let comp = BatchComposition {
            b_req: self.live.len() as f64,
            b_dense: choice.b_dense as f64,
            e_kv_touched,
            n_prefill_tokens: (choice.b_dense - decode_idx.len() as u64) as f64,
            n_decode_tokens: decode_idx.len() as f64,
        };

        let rows = op_resource_table(self.hw, self.model, &comp, &self.stats);
        let sequential: f64 = rows.iter().map(OpResourceRow::t_bound).sum();
        let floor = roofline_floor(&rows);
        let latency = match self.config.latency_backend {
            Backend::Sequential => sequential.max(floor),
            Backend::Overlapped => match self.overlapped_latency(&comp, choice.b_dense)? {
                // The sequential plan stays available; use whichever is
                // faster this iteration.
                Some(makespan) => makespan.min(sequential).max(floor),
                None => sequential.max(floor),
            },
        };

        let mut iter_time = latency;
        if self.config.offload_enabled && freed > 0.0 {
            let offload_time = freed / self.hw.host_link_bw;
            if offload_time > latency {
                self.offload_stall += offload_time - latency;
                iter_time = offload_time;
            }
        }
        self.clock += iter_time;
        self.iterations += 1;

        // Apply effects: prefill lands, decodes emit one token each.
        for (i, take) in prefill_shares {
            let r = &mut self.live[i];
            r.prefill_remaining -= take;
            r.kv_tokens += take;
        }
        for &i in &decode_idx {
            let r = &mut self.live[i];
            r.kv_tokens += 1;
            self.emitted_tokens += 1;
            if r.decoded < r.output_len {
                r.decoded += 1;
                if r.decoded == 1 {
                    r.first_token_time = Some(self.clock);
                }
                if r.decoded == r.output_len {
                    self.finish_request(i);
                }
            } else {
                self.wasted_tokens += 1;
            }
        }
        // Requests with no decode wanted complete as soon as prefill ends.
        for i in 0..self.live.len() {
            let r = &self.live[i];
            if r.output_len == 0 && r.prefill_remaining == 0 && r.completion_time.is_none() {
                self.finish_request(i);
            }
        }

        // Memory safety net: eviction when reality outruns the hint.
        let capacity = self.hw.total_mem_size() - self.model.weight_bytes();
        while self.kv_bytes() > capacity {
            if !self.discard_youngest() {
                break;
            }
        }

        let util = |f: fn(&OpResourceRow) -> f64| -> f64 {
            (rows.iter().map(f).sum::<f64>() / latency).min(1.0)
        };
        let record = IterRecord {
            t: self.clock,
            b_dense: choice.b_dense,
            kv_bytes: self.kv_bytes(),
            util_compute: util(|r| r.t_compute),
            util_mem: util(|r| r.t_mem),
            util_net: util(|r| r.t_net),
            latency: iter_time,
        };
        self.per_iter.push(record);
        Ok(Some(record))
    }

    fn finish_request(&mut self, i: usize) {
        let lag = self.config.eos_lag_iters;
        let clock = self.clock;
        let r = &mut self.live[i];
        r.completion_time = Some(clock);
        r.drain_left = lag.max(1);
        self.completed += 1;
        self.counted_tokens += r.input_len + r.output_len;
        self.sum_output_len_completed += r.output_len;
        if r.output_len > 0 {
            self.norm_latencies
                .push((clock - r.arrival) / r.output_len as f64);
        }
    }

    /// Runs to drain and aggregates metrics.
    pub fn run(mut self) -> Result<SimMetrics> {
        while self.step()?.is_some() {}
        let elapsed = self.clock;
        let total_throughput = if elapsed > 0.0 {
            self.counted_tokens as f64 / elapsed
        } else {
            0.0
        };
        let mut sorted = self.norm_latencies.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let latency_cdf: Vec<(f64, f64)> = if sorted.is_empty() {
            Vec::new()
        } else {
            (1..=100)
                .map(|p| {
                    let rank = ((p as f64 / 100.0 * sorted.len() as f64).ceil() as usize)
                        .clamp(1, sorted.len());
                    (p as f64, sorted[rank - 1])
                })
                .collect()
        };
        let normalized_latency = if sorted.is_empty() {
            0.0
        } else {
            sorted.iter().sum::<f64>() / sorted.len() as f64
        };
        Ok(SimMetrics {
            total_throughput,
            normalized_latency,
            latency_cdf,
            per_iter: self.per_iter,
            wasted_tokens: self.wasted_tokens,
            padding_tokens: self.padding_tokens,
            elapsed,
            iterations: self.iterations,
            completed: self.completed,
            counted_tokens: self.counted_tokens,
            emitted_tokens: self.emitted_tokens,
            discarded: self.discarded,
            offload_stall: self.offload_stall,
            eos_lag_iters: self.config.eos_lag_iters,
            sum_output_len_completed: self.sum_output_len_completed,
        })
    }
}

fn trace_stats(trace: &[TraceRequest]) -> WorkloadStats {
    if trace.is_empty() {
        return WorkloadStats::new(1.0, 1.0);
    }
    let n = trace.len() as f64;
    let p_avg = trace.iter().map(|r| r.input_len as f64).sum::<f64>() / n;
    let d_avg = trace.iter().map(|r| r.output_len as f64).sum::<f64>() / n;
    WorkloadStats::new(p_avg.max(1.0), d_avg)
}

/// Aggregate roofline over the resource table: an iteration can be no
/// faster than its total FLOPs, bytes, or network traffic through the
/// corresponding capacity.
fn roofline_floor(rows: &[OpResourceRow]) -> f64 {
    let (tc, tm, tn) = rows.iter().fold((0.0f64, 0.0f64, 0.0f64), |acc, r| {
        (acc.0 + r.t_compute, acc.1 + r.t_mem, acc.2 + r.t_net)
    });
    tc.max(tm).max(tn)
}

/// Offline experiment: all requests present at time zero (arrivals are
/// forced to zero), run to drain.
pub fn run_offline(
    trace: &[TraceRequest],
    hw: &HardwareSpec,
    model: &ModelConfig,
    config: &ServerConfig,
) -> Result<SimMetrics> {
    let forced: Vec<TraceRequest> = trace
        .iter()
        .map(|r| TraceRequest {
            arrival: 0.0,
            ..r.clone()
        })
        .collect();
    Simulator::new(hw, model, config, &forced)?.run()
}

/// Online experiment: arrival-gated admission, reports normalized latency
/// and its distribution.
pub fn run_online(
    trace: &[TraceRequest],
    hw: &HardwareSpec,
    model: &ModelConfig,
    config: &ServerConfig,
) -> Result<SimMetrics> {
    Simulator::new(hw, model, config, trace)?.run()
}

// ---------------------------------------------------------------------------
// Trace generation
// ---------------------------------------------------------------------------

fn erf(x: f64) -> f64 {
    // Abramowitz & Stegun 7.1.26, |error| < 1.5e-7.
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Mean of `max(min, N(mu, sigma))`.
fn clipped_mean(mu: f64, sigma: f64, min: f64) -> f64 {
    let z = (min - mu) / sigma;
    min * normal_cdf(z) + mu * (1.0 - normal_cdf(z)) + sigma * normal_pdf(z)
}

/// Pre-clip mean placed so the clipped distribution's mean hits `target`.
/// Clipping at `min` raises the mean, so for wide distributions the
/// underlying normal must be centered lower than the target.
fn calibrated_mu(target: f64, sigma: f64, min: f64) -> f64 {
    if sigma <= 0.0 || target <= min {
        return target;
    }
    let mut lo = target - 12.0 * sigma;
    let mut hi = target;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clipped_mean(mid, sigma, min) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Samples a synthetic trace: clipped-normal lengths matching the given
/// means and standard deviations (minimum one input token) and
/// exponential inter-arrival times at `rate` requests/s (`rate = 0`
/// produces an offline trace with all arrivals at zero). Deterministic
/// for a fixed seed.
pub fn gen_trace(stats: &WorkloadStats, n: usize, rate: f64, seed: u64) -> Result<Vec<TraceRequest>> {
    stats.validate()?;
    if rate < 0.0 {
        return Err(Error::Invariant("rate must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_len = |rng: &mut ChaCha8Rng, mean: f64, std: f64, min: u64| -> u64 {
        if std <= 0.0 {
            return (mean.round() as u64).max(min);
        }
        let mu = calibrated_mu(mean, std, min as f64);
        let normal = Normal::new(mu, std).expect("std > 0");
        let x: f64 = normal.sample(rng);
        (x.round().max(min as f64)) as u64
    };
    let exp = if rate > 0.0 {
        Some(Exp::new(rate).map_err(|e| Error::Invariant(format!("bad rate: {e}")))?)
    } else {
        None
    };
    let mut t = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let input_len = sample_len(&mut rng, stats.p_avg.max(1.0), stats.p_std, 1);
        let output_len = sample_len(&mut rng, stats.d_avg.max(1.0), stats.d_std, 1);
        if let Some(exp) = &exp {
            t += exp.sample(&mut rng);
        }
        out.push(TraceRequest {
            id: format!("r{i:05}"),
            arrival: if rate > 0.0 { t } else { 0.0 },
            input_len,
            output_len,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Offload feasibility
// ---------------------------------------------------------------------------

/// Offload feasibility at a given achieved throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadReport {
    /// Bandwidth needed to move every processed token's KV off-device.
    pub required_bw: f64,
    pub link_bw: f64,
    pub exceeds: bool,
    /// Fraction of required bandwidth the link cannot carry (0 when it
    /// fits); the per-iteration stall grows proportionally to this.
    pub overflow_ratio: f64,
}

/// Checks whether the host offload path sustains eager KV offload at the
/// achieved throughput.
pub fn offload_check(throughput: f64, model: &ModelConfig, hw: &HardwareSpec) -> OffloadReport {
    let required_bw = cost::offload_bandwidth(throughput, model);
    let link_bw = hw.host_link_bw;
    let exceeds = required_bw > link_bw;
    let overflow_ratio = if exceeds && required_bw > 0.0 {
        (required_bw - link_bw) / required_bw
    } else {
        0.0
    };
    OffloadReport {
        required_bw,
        link_bw,
        exceeds,
        overflow_ratio,
    }
}
