use servesim::autosearch::*;
use servesim::cost::{op_resource_table, BatchComposition};
use servesim::pipeline::{build_overlapped_pipeline, NanoSplit};
use servesim::profiles::{synth_profiles, AlphaConfig, InterferenceMatrix};
use servesim::specs::{find_hardware, find_model, WorkloadStats};

fn main() {
    let hw = find_hardware("A100 - 80G").unwrap().with_devices(8);
    let model = find_model("llama-2-70b").unwrap();
    let stats = WorkloadStats::new(512.0, 1024.0);
    let comp = BatchComposition::steady_state(&model, &stats, 2048.0);
    let rows = op_resource_table(&hw, &model, &comp, &stats);
    let profiles = synth_profiles(&hw, &model, &rows, &AlphaConfig::default(), 0.0).unwrap();
    let graph = build_overlapped_pipeline(&comp, &NanoSplit::default()).unwrap();

    let params = GreedyParams { quantum: 1, max_iters: 5000 };
    let (assign, sched) = greedy_optimize(&graph, &profiles, hw.n_units, &params).unwrap();
    println!("final makespan/layer: {:.6} ms", sched.makespan * 1e3);
    for (id, node) in graph.nodes() {
        let span = sched.spans[id.0];
        println!(
            "  {:<8} units {:>3}  dur {:.4} ms  [{:.4}..{:.4}]",
            node.name,
            assign.units[id.0],
            (span.end - span.start) * 1e3,
            span.start * 1e3,
            span.end * 1e3
        );
    }
    let serial = UnitAssignment::uniform(&graph, hw.n_units);
    let s = simulate_schedule(&graph, &serial, &profiles, &InterferenceMatrix::identity(), hw.n_units).unwrap();
    println!("serial fallback: {:.6} ms", s.makespan * 1e3);
    let bounds = schedule_bounds(&graph, &profiles, hw.n_units).unwrap();
    println!("lower bound: {:.6} ms", bounds.lower * 1e3);
}
