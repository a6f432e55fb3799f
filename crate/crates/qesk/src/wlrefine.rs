//! Weisfeiler-Lehman tree-index refinement over a whole dataset.
//!
//! Every iteration compresses vertex signatures through one codebook shared
//! by all graphs, so identical signatures receive identical integer codes
//! dataset-wide. A vertex's code at iteration `I` identifies the rooted
//! subtree of height `I - 1` around it: iteration 1 holds the hashed
//! initial attributes, and each later iteration hashes the vertex's own
//! code joined with the ascending-sorted codes of its neighbors.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphio::DatasetBundle;

/// How vertices are attributed before the first hashing pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelPolicy {
    /// Use the dataset's vertex attributes. Requires an attributed bundle.
    GivenAttributes,
    /// Use each vertex's degree.
    Degree,
    /// Give every vertex the same constant attribute.
    Constant,
}

impl std::fmt::Display for LabelPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LabelPolicy::GivenAttributes => "given-attributes",
            LabelPolicy::Degree => "degree",
            LabelPolicy::Constant => "constant",
        })
    }
}

impl std::str::FromStr for LabelPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "given-attributes" => Ok(LabelPolicy::GivenAttributes),
            "degree" => Ok(LabelPolicy::Degree),
            "constant" => Ok(LabelPolicy::Constant),
            other => Err(Error::Config(format!("unknown label policy {other:?}"))),
        }
    }
}

/// Shared signature-to-code tables, one per iteration.
///
/// Codes at iteration `I` are dense integers `0..size_at(I)`, allocated in
/// first-seen order over a fixed traversal (graphs in bundle order, vertices
/// in index order), which makes runs bit-reproducible.
#[derive(Debug, Clone, Default)]
pub struct AttributeCodebook {
    tables: Vec<HashMap<String, u32>>,
}

impl AttributeCodebook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of iterations with a table.
    pub fn iterations(&self) -> usize {
        self.tables.len()
    }

    /// Alphabet size `M_I` at 1-based iteration `iteration`.
    pub fn size_at(&self, iteration: usize) -> usize {
        self.tables[iteration - 1].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.tables.iter().map(|t| t.len()).collect()
    }

    /// Compress the signatures of one new iteration, in traversal order.
    fn assign(&mut self, signatures: &[Vec<String>]) -> Vec<Vec<u32>> {
        let mut table = HashMap::new();
        let codes = signatures
            .iter()
            .map(|graph_sigs| {
                graph_sigs
                    .iter()
                    .map(|sig| {
                        let next = table.len() as u32;
                        *table.entry(sig.clone()).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        self.tables.push(table);
        codes
    }
}

/// Vertex codes for every graph at every iteration `1..=i_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    // [graph][iteration - 1][vertex]
    labels: Vec<Vec<Vec<u32>>>,
}

impl LabelAssignment {
    pub fn graph_count(&self) -> usize {
        self.labels.len()
    }

    pub fn iterations(&self) -> usize {
        self.labels.first().map_or(0, |g| g.len())
    }

    /// Codes of `graph` at 1-based `iteration`.
    pub fn codes(&self, graph: usize, iteration: usize) -> &[u32] {
        &self.labels[graph][iteration - 1]
    }

    /// All iterations of one graph, iteration-major.
    pub fn per_iteration(&self, graph: usize) -> &[Vec<u32>] {
        &self.labels[graph]
    }
}

/// Hash the initial vertex attributes of every graph (iteration 1).
pub fn initial_labels(
    bundle: &DatasetBundle,
    policy: LabelPolicy,
    codebook: &mut AttributeCodebook,
) -> Result<Vec<Vec<u32>>> {
    if policy == LabelPolicy::GivenAttributes && !bundle.has_vertex_attributes {
        return Err(Error::Config(format!(
            "label policy given-attributes on unattributed dataset {:?}",
            bundle.name
        )));
    }
    let signatures: Vec<Vec<String>> = bundle
        .graphs
        .par_iter()
        .map(|g| match policy {
            LabelPolicy::GivenAttributes => g
                .initial_attributes()
                .expect("attributed bundle")
                .iter()
                .map(|a| a.to_string())
                .collect(),
            LabelPolicy::Degree => g.degrees().iter().map(|d| d.to_string()).collect(),
            LabelPolicy::Constant => vec!["0".to_string(); g.vertex_count()],
        })
        .collect();
    Ok(codebook.assign(&signatures))
}

/// One refinement step: iteration `I` codes to iteration `I + 1` codes.
///
/// Each vertex's signature is its own code, a separator, and the
/// comma-joined ascending-sorted codes of its neighbors.
pub fn refine_once(
    bundle: &DatasetBundle,
    labels_at: &[Vec<u32>],
    codebook: &mut AttributeCodebook,
) -> Vec<Vec<u32>> {
    let signatures: Vec<Vec<String>> = bundle
        .graphs
        .par_iter()
        .zip(labels_at.par_iter())
        .map(|(g, codes)| {
            let lists = g.adjacency_lists();
            (0..g.vertex_count())
                .map(|v| {
                    let mut neighbor_codes: Vec<u32> =
                        lists[v].iter().map(|&u| codes[u as usize]).collect();
                    neighbor_codes.sort_unstable();
                    let mut sig = codes[v].to_string();
                    sig.push('|');
                    for (k, c) in neighbor_codes.iter().enumerate() {
                        if k > 0 {
                            sig.push(',');
                        }
                        sig.push_str(&c.to_string());
                    }
                    sig
                })
                .collect()
        })
        .collect();
    codebook.assign(&signatures)
}

/// Run the refinement for iterations `1..=i_max` with a fresh codebook.
pub fn run_wl(
    bundle: &DatasetBundle,
    i_max: usize,
    policy: LabelPolicy,
) -> Result<(LabelAssignment, AttributeCodebook)> {
    if i_max < 1 {
        return Err(Error::Config("i_max must be at least 1".into()));
    }
    let mut codebook = AttributeCodebook::new();
    let mut per_iteration = vec![initial_labels(bundle, policy, &mut codebook)?];
    for _ in 1..i_max {
        let next = refine_once(bundle, per_iteration.last().unwrap(), &mut codebook);
        per_iteration.push(next);
    }
    let labels = (0..bundle.len())
        .map(|g| per_iteration.iter().map(|it| it[g].clone()).collect())
        .collect();
    Ok((LabelAssignment { labels }, codebook))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphio::Graph;

    fn bundle_of(graphs: Vec<Graph>) -> DatasetBundle {
        let has_attrs = graphs.iter().all(|g| g.initial_attributes().is_some());
        let n = graphs.len();
        DatasetBundle {
            name: "test".into(),
            graphs,
            class_labels: vec![0; n],
            has_vertex_attributes: has_attrs,
        }
    }

    #[test]
    fn initial_labels_first_seen_order() {
        let g = Graph::new(3, [], Some(vec![5, 9, 5])).unwrap();
        let bundle = bundle_of(vec![g]);
        let mut cb = AttributeCodebook::new();
        let labels = initial_labels(&bundle, LabelPolicy::GivenAttributes, &mut cb).unwrap();
        assert_eq!(labels[0], vec![0, 1, 0]);
        assert_eq!(cb.size_at(1), 2);
    }

    #[test]
    fn initial_labels_uniform_attributes_single_code() {
        let g1 = Graph::new(2, [(0, 1)], Some(vec![3, 3])).unwrap();
        let g2 = Graph::new(3, [], Some(vec![3, 3, 3])).unwrap();
        let bundle = bundle_of(vec![g1, g2]);
        let mut cb = AttributeCodebook::new();
        let labels = initial_labels(&bundle, LabelPolicy::GivenAttributes, &mut cb).unwrap();
        assert!(labels.iter().flatten().all(|&c| c == 0));
        assert_eq!(cb.size_at(1), 1);
    }

    #[test]
    fn degree_policy_on_path() {
        let g = Graph::new(3, [(0, 1), (1, 2)], None).unwrap();
        let bundle = bundle_of(vec![g]);
        let mut cb = AttributeCodebook::new();
        let labels = initial_labels(&bundle, LabelPolicy::Degree, &mut cb).unwrap();
        assert_eq!(labels[0], vec![0, 1, 0]);
    }

    #[test]
    fn given_attributes_requires_attributed_bundle() {
        let g = Graph::new(2, [(0, 1)], None).unwrap();
        let bundle = bundle_of(vec![g]);
        let mut cb = AttributeCodebook::new();
        assert!(matches!(
            initial_labels(&bundle, LabelPolicy::GivenAttributes, &mut cb),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn refine_single_edge_same_code() {
        let g = Graph::new(2, [(0, 1)], None).unwrap();
        let bundle = bundle_of(vec![g]);
        let mut cb = AttributeCodebook::new();
        let l1 = initial_labels(&bundle, LabelPolicy::Constant, &mut cb).unwrap();
        let l2 = refine_once(&bundle, &l1, &mut cb);
        assert_eq!(l2[0][0], l2[0][1]);
        assert_eq!(cb.size_at(2), 1);
    }

    #[test]
    fn refine_path_splits_center() {
        let g = Graph::new(3, [(0, 1), (1, 2)], None).unwrap();
        let bundle = bundle_of(vec![g]);
        let mut cb = AttributeCodebook::new();
        let l1 = initial_labels(&bundle, LabelPolicy::Constant, &mut cb).unwrap();
        let l2 = refine_once(&bundle, &l1, &mut cb);
        assert_eq!(l2[0][0], l2[0][2]);
        assert_ne!(l2[0][0], l2[0][1]);
        assert_eq!(cb.size_at(2), 2);
    }

    #[test]
    fn isolated_vertex_gets_distinct_code() {
        // Vertex 3 is isolated; its empty-neighborhood signature must not
        // collide with any vertex that has neighbors.
        let g = Graph::new(4, [(0, 1), (1, 2)], None).unwrap();
        let bundle = bundle_of(vec![g]);
        let mut cb = AttributeCodebook::new();
        let l1 = initial_labels(&bundle, LabelPolicy::Constant, &mut cb).unwrap();
        let l2 = refine_once(&bundle, &l1, &mut cb);
        assert!(l2[0][..3].iter().all(|&c| c != l2[0][3]));
    }

    #[test]
    fn run_wl_imax_one_is_initial_labeling() {
        let g = Graph::new(3, [(0, 1), (1, 2)], None).unwrap();
        let bundle = bundle_of(vec![g]);
        let (labels, cb) = run_wl(&bundle, 1, LabelPolicy::Degree).unwrap();
        assert_eq!(labels.iterations(), 1);
        assert_eq!(labels.codes(0, 1), &[0, 1, 0]);
        assert_eq!(cb.iterations(), 1);
    }

    #[test]
    fn triangle_stays_uniform() {
        let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)], Some(vec![4, 4, 4])).unwrap();
        let bundle = bundle_of(vec![g]);
        let (labels, cb) = run_wl(&bundle, 5, LabelPolicy::GivenAttributes).unwrap();
        for it in 1..=5 {
            assert_eq!(cb.size_at(it), 1);
            assert!(labels.codes(0, it).iter().all(|&c| c == labels.codes(0, it)[0]));
        }
    }

    #[test]
    fn isomorphic_graphs_share_code_multisets() {
        use crate::testutil::{permute_graph, random_connected_graph, random_permutation};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_connected_graph(&mut rng, 3, 12);
            let perm = random_permutation(&mut rng, g.vertex_count());
            let h = permute_graph(&g, &perm);
            let bundle = bundle_of(vec![g, h]);
            let (labels, _) = run_wl(&bundle, 4, LabelPolicy::Degree).unwrap();
            for it in 1..=4 {
                let mut a = labels.codes(0, it).to_vec();
                let mut b = labels.codes(1, it).to_vec();
                a.sort_unstable();
                b.sort_unstable();
                assert_eq!(a, b, "iteration {it}");
            }
        }
    }

    #[test]
    fn refinement_is_monotone() {
        use crate::testutil::random_graph;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let g = random_graph(&mut rng, 10, 0.3);
            let bundle = bundle_of(vec![g]);
            let (labels, _) = run_wl(&bundle, 5, LabelPolicy::Degree).unwrap();
            for it in 1..5 {
                let cur = labels.codes(0, it);
                let next = labels.codes(0, it + 1);
                for v in 0..cur.len() {
                    for u in 0..cur.len() {
                        if cur[v] != cur[u] {
                            assert_ne!(next[v], next[u], "iteration {it} merged {v} and {u}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn codebook_is_shared_across_graphs() {
        let p1 = Graph::new(3, [(0, 1), (1, 2)], None).unwrap();
        let p2 = Graph::new(3, [(0, 1), (1, 2)], None).unwrap();
        let bundle = bundle_of(vec![p1, p2]);
        let (labels, _) = run_wl(&bundle, 3, LabelPolicy::Degree).unwrap();
        for it in 1..=3 {
            assert_eq!(labels.codes(0, it), labels.codes(1, it));
        }
    }
}
