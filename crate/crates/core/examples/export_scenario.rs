//! Writes the built-in six-node example (and a candidate-graph list for it) as JSON.
//!
//! cargo run --example export_scenario -- scenarios/

use std::path::PathBuf;

use rol::model::{builtin_example_scenario, save_scenario, NetworkGraph};
use rol::synthesis::CandidateGraph;

fn main() -> rol::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    std::fs::create_dir_all(&dir).map_err(|source| rol::Error::Io { path: dir.clone(), source })?;
    let s = builtin_example_scenario();
    save_scenario(&s, dir.join("example6.json"))?;

    let e = &s.graph.edges[0];
    let (w, h, hc) = (&e.w, &e.h, &e.hc);
    let n = s.nodes();
    let ring: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let mut chords = ring.clone();
    chords.extend([(0, 3), (2, 5), (4, 1)]);
    let candidates = vec![
        CandidateGraph { id: "ring".into(), graph: NetworkGraph::from_pairs(n, &ring, w, h, hc) },
        CandidateGraph { id: "ring+chords".into(), graph: NetworkGraph::from_pairs(n, &chords, w, h, hc) },
        CandidateGraph { id: "complete".into(), graph: NetworkGraph::complete(n, w, h, hc) },
    ];
    let json = rol::json::to_pretty(&candidates);
    let path = dir.join("candidates.json");
    std::fs::write(&path, json).map_err(|source| rol::Error::Io { path, source })?;
    println!("wrote {}/example6.json and candidates.json (ring matrices W {}x{})", dir.display(), w.nrows(), w.ncols());
    Ok(())
}
