//! Compares a directed ring, the ring with three chords and the complete
//! digraph, printing per-candidate levels and the running minima.
//!
//! cargo run --release --example graph_selection

use rol::model::{builtin_example_scenario, NetworkGraph};
use rol::synthesis::{optimize_over_graphs, CandidateGraph, LevelCache, SynthesisOptions};

fn main() -> rol::Result<()> {
    let s = builtin_example_scenario();
    let e = &s.graph.edges[0];
    let n = s.nodes();
    let ring: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let mut chords = ring.clone();
    chords.extend([(0, 3), (2, 5), (4, 1)]);
    let candidates = [
        ("ring", NetworkGraph::from_pairs(n, &ring, &e.w, &e.h, &e.hc)),
        ("ring+chords", NetworkGraph::from_pairs(n, &chords, &e.w, &e.h, &e.hc)),
        ("complete", NetworkGraph::complete(n, &e.w, &e.h, &e.hc)),
    ]
    .map(|(id, graph)| CandidateGraph { id: id.into(), graph });

    let cache = LevelCache::default();
    let result = optimize_over_graphs(&s, &candidates, &SynthesisOptions::from_scenario(&s), Some(&cache))?;
    println!("{:<12} {:>12} {:>12} {:>12} {:>12}", "candidate", "γ²", "γ̄²", "running γ²", "running γ̄²");
    for c in &result.candidates {
        println!(
            "{:<12} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            c.id, c.gamma2, c.bar_gamma2, c.running_gamma2, c.running_bar_gamma2
        );
    }
    println!("winner: {}", result.winner()?.id);

    // a second pass is served from the cache
    optimize_over_graphs(&s, &candidates, &SynthesisOptions::from_scenario(&s), Some(&cache))?;
    println!("cached scenarios: {}", cache.len());
    Ok(())
}
