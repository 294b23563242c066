use serde::{Deserialize, Serialize};

use crate::mat::{rows_opt, Mat};

/// Directed communication edge `from → to`: node `to` receives
/// `c = W·x̂_from + H·v + …` from node `from` (0-based indices).
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub w: Mat,
    pub h: Mat,
    pub hc: Mat,
}

impl Edge {
    /// Message dimension `p_ij`.
    pub fn p(&self) -> usize {
        self.w.nrows()
    }

    /// Detector-layer noise matrix `[H  H_c]`.
    pub fn h_stacked(&self) -> Mat {
        crate::mat::hstack(&[&self.h, &self.hc])
    }
}

/// Communication graph with per-edge channel matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct NetworkGraph {
    pub nodes: usize,
    pub edges: Vec<Edge>,
    /// Set when the topology is a default rather than supplied data.
    pub graph_assumed: bool,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    nodes: usize,
    #[serde(default)]
    graph_assumed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    defaults: Option<EdgeDefaults>,
    edges: Vec<EdgeDoc>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDefaults {
    #[serde(default, with = "rows_opt")]
    w: Option<Mat>,
    #[serde(default, with = "rows_opt")]
    h: Option<Mat>,
    #[serde(default, with = "rows_opt")]
    hc: Option<Mat>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    from: usize,
    to: usize,
    #[serde(default, with = "rows_opt", skip_serializing_if = "Option::is_none")]
    w: Option<Mat>,
    #[serde(default, with = "rows_opt", skip_serializing_if = "Option::is_none")]
    h: Option<Mat>,
    #[serde(default, with = "rows_opt", skip_serializing_if = "Option::is_none")]
    hc: Option<Mat>,
}

impl TryFrom<GraphDoc> for NetworkGraph {
    type Error = String;

    fn try_from(doc: GraphDoc) -> Result<Self, String> {
        let defaults = doc.defaults.unwrap_or(EdgeDefaults {
            w: None,
            h: None,
            hc: None,
        });
        let mut edges = Vec::with_capacity(doc.edges.len());
        for e in doc.edges {
            let label = format!("edge ({},{})", e.from, e.to);
            if e.from == 0 || e.to == 0 || e.from > doc.nodes || e.to > doc.nodes {
                return Err(format!("{label}: node labels run from 1 to {}", doc.nodes));
            }
            if e.from == e.to {
                return Err(format!("{label}: self-loops are not allowed"));
            }
            let pick = |own: Option<Mat>, def: &Option<Mat>, name: &str| {
                own.or_else(|| def.clone())
                    .ok_or_else(|| format!("{label}: missing {name} and no graph default"))
            };
            let w = pick(e.w, &defaults.w, "w")?;
            let p = w.nrows();
            let h = e
                .h
                .or_else(|| defaults.h.clone())
                .unwrap_or_else(|| Mat::zeros(p, 0));
            let hc = e
                .hc
                .or_else(|| defaults.hc.clone())
                .unwrap_or_else(|| Mat::zeros(p, 0));
            edges.push(Edge {
                from: e.from - 1,
                to: e.to - 1,
                w,
                h,
                hc,
            });
        }
        let g = NetworkGraph {
            nodes: doc.nodes,
            edges,
            graph_assumed: doc.graph_assumed,
        };
        if let Some((a, b)) = g.duplicate_edge() {
            return Err(format!("edge ({},{}) listed twice", a + 1, b + 1));
        }
        Ok(g)
    }
}

impl From<NetworkGraph> for GraphDoc {
    fn from(g: NetworkGraph) -> Self {
        // identical channel matrices on every edge are written once as defaults
        let uniform = g.edges.split_first().and_then(|(first, rest)| {
            rest.iter()
                .all(|e| e.w == first.w && e.h == first.h && e.hc == first.hc)
                .then(|| (first.w.clone(), first.h.clone(), first.hc.clone()))
        });
        let defaults = uniform.as_ref().map(|(w, h, hc)| EdgeDefaults {
            w: Some(w.clone()),
            h: Some(h.clone()),
            hc: Some(hc.clone()),
        });
        let keep = uniform.is_none();
        GraphDoc {
            nodes: g.nodes,
            graph_assumed: g.graph_assumed,
            defaults,
            edges: g
                .edges
                .into_iter()
                .map(|e| EdgeDoc {
                    from: e.from + 1,
                    to: e.to + 1,
                    w: keep.then_some(e.w),
                    h: keep.then_some(e.h),
                    hc: keep.then_some(e.hc),
                })
                .collect(),
        }
    }
}

impl NetworkGraph {
    /// Graph on `nodes` vertices with identical channel matrices on every listed edge.
    pub fn from_pairs(nodes: usize, pairs: &[(usize, usize)], w: &Mat, h: &Mat, hc: &Mat) -> Self {
        NetworkGraph {
            nodes,
            edges: pairs
                .iter()
                .map(|&(from, to)| Edge {
                    from,
                    to,
                    w: w.clone(),
                    h: h.clone(),
                    hc: hc.clone(),
                })
                .collect(),
            graph_assumed: false,
        }
    }

    /// Directed ring `0 → 1 → … → N−1 → 0`.
    pub fn directed_ring(nodes: usize, w: &Mat, h: &Mat, hc: &Mat) -> Self {
        let pairs: Vec<_> = (0..nodes).map(|i| (i, (i + 1) % nodes)).collect();
        Self::from_pairs(nodes, &pairs, w, h, hc)
    }

    /// Complete digraph.
    pub fn complete(nodes: usize, w: &Mat, h: &Mat, hc: &Mat) -> Self {
        let pairs: Vec<_> = (0..nodes)
            .flat_map(|i| (0..nodes).filter(move |&j| j != i).map(move |j| (j, i)))
            .collect();
        Self::from_pairs(nodes, &pairs, w, h, hc)
    }

    /// Edges entering node `i`, with their positions in `edges`.
    pub fn in_edges(&self, i: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.to == i)
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_edges(i).count()
    }

    pub fn find_edge(&self, from: usize, to: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.from == from && e.to == to)
    }

    fn duplicate_edge(&self) -> Option<(usize, usize)> {
        let mut seen: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.from, e.to)).collect();
        seen.sort_unstable();
        seen.windows(2).find(|w| w[0] == w[1]).map(|w| w[0])
    }

    /// Weak connectivity (edge directions ignored).
    pub fn is_weakly_connected(&self) -> bool {
        if self.nodes == 0 {
            return true;
        }
        let mut parent: Vec<usize> = (0..self.nodes).collect();
        fn root(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (root(&mut parent, e.from), root(&mut parent, e.to));
            parent[a] = b;
        }
        let r = root(&mut parent, 0);
        (0..self.nodes).all(|i| root(&mut parent, i) == r)
    }
}
