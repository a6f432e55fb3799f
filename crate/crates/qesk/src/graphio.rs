//! Benchmark dataset ingestion.
//!
//! Datasets are stored in the standard multi-file benchmark text layout:
//! an edge list `<DS>_A.txt` of comma-separated 1-indexed global vertex
//! pairs, a `<DS>_graph_indicator.txt` assigning every global vertex to a
//! graph, one class label per graph in `<DS>_graph_labels.txt`, and an
//! optional `<DS>_node_labels.txt` with one integer attribute per vertex.
//! Parsing converts to 0-based local indices, collapses duplicate edges
//! and both orientations, and drops self-loops with a logged count.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected simple graph with optional integer vertex attributes.
///
/// Edges are canonical unordered pairs `(u, v)` with `u < v`, sorted and
/// deduplicated. Self-loops are rejected at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(u32, u32)>,
    initial_attributes: Option<Vec<i64>>,
}

impl Graph {
    pub fn new(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
        initial_attributes: Option<Vec<i64>>,
    ) -> Result<Self> {
        let mut canonical = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Contract(format!("self-loop on vertex {a}")));
            }
            if a as usize >= vertex_count || b as usize >= vertex_count {
                return Err(Error::Contract(format!(
                    "edge ({a}, {b}) outside vertex range 0..{vertex_count}"
                )));
            }
            canonical.insert((a.min(b), a.max(b)));
        }
        if let Some(attrs) = &initial_attributes {
            if attrs.len() != vertex_count {
                return Err(Error::Contract(format!(
                    "{} attributes for {} vertices",
                    attrs.len(),
                    vertex_count
                )));
            }
        }
        Ok(Graph {
            vertex_count,
            edges: canonical.into_iter().collect(),
            initial_attributes,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Canonical unordered edge pairs, ascending.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn initial_attributes(&self) -> Option<&[i64]> {
        self.initial_attributes.as_deref()
    }

    /// Neighbor lists indexed by vertex, each ascending.
    pub fn adjacency_lists(&self) -> Vec<Vec<u32>> {
        let mut lists = vec![Vec::new(); self.vertex_count];
        for &(u, v) in &self.edges {
            lists[u as usize].push(v);
            lists[v as usize].push(u);
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        lists
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.vertex_count];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }
}

/// Symmetric 0/1 adjacency matrix of `g` with zero diagonal.
pub fn adjacency(g: &Graph) -> DMatrix<f64> {
    let n = g.vertex_count();
    let mut a = DMatrix::zeros(n, n);
    for &(u, v) in g.edges() {
        a[(u as usize, v as usize)] = 1.0;
        a[(v as usize, u as usize)] = 1.0;
    }
    a
}

/// A parsed dataset: graphs plus one class label per graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetBundle {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub class_labels: Vec<i64>,
    pub has_vertex_attributes: bool,
}

impl DatasetBundle {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// The four text sources of the benchmark layout, held in memory.
#[derive(Debug, Clone)]
pub struct TuSources {
    pub adjacency: String,
    pub graph_indicator: String,
    pub graph_labels: String,
    pub node_labels: Option<String>,
}

/// Load `<dataset_name>_*.txt` from `directory_path` and parse.
pub fn parse_tu_dataset(directory_path: &Path, dataset_name: &str) -> Result<DatasetBundle> {
    let read = |suffix: &str, mandatory: bool| -> Result<Option<String>> {
        let path = directory_path.join(format!("{dataset_name}_{suffix}.txt"));
        if !path.exists() {
            return if mandatory {
                Err(Error::MissingFile(path))
            } else {
                Ok(None)
            };
        }
        std::fs::read_to_string(&path)
            .map(Some)
            .map_err(|e| Error::io(path, e))
    };
    let sources = TuSources {
        adjacency: read("A", true)?.unwrap(),
        graph_indicator: read("graph_indicator", true)?.unwrap(),
        graph_labels: read("graph_labels", true)?.unwrap(),
        node_labels: read("node_labels", false)?,
    };
    parse_tu_sources(dataset_name, &sources)
}

/// Parse the benchmark layout from in-memory sources.
pub fn parse_tu_sources(dataset_name: &str, sources: &TuSources) -> Result<DatasetBundle> {
    let class_labels = parse_int_column(&sources.graph_labels, "graph_labels")?
        .into_iter()
        .map(|(_, v)| v)
        .collect::<Vec<_>>();
    let graph_count = class_labels.len();

    // Global vertex -> owning graph, in file order.
    let indicator = parse_int_column(&sources.graph_indicator, "graph_indicator")?;
    let mut owner = Vec::with_capacity(indicator.len());
    let mut vertex_counts = vec![0usize; graph_count];
    let mut local_index = Vec::with_capacity(indicator.len());
    for (line, gid) in &indicator {
        if *gid < 1 || *gid as usize > graph_count {
            return Err(Error::format(
                "graph_indicator",
                *line,
                format!("graph id {gid} outside 1..={graph_count}"),
            ));
        }
        let g = (*gid - 1) as usize;
        owner.push(g);
        local_index.push(vertex_counts[g]);
        vertex_counts[g] += 1;
    }
    let total_vertices = owner.len();

    let mut edge_sets: Vec<BTreeSet<(u32, u32)>> = vec![BTreeSet::new(); graph_count];
    let mut dropped_self_loops = 0usize;
    for (line, record) in records(&sources.adjacency) {
        let (a, b) = parse_pair(record, "A", line)?;
        for (endpoint, raw) in [(a, record), (b, record)] {
            let _ = raw;
            if endpoint < 1 || endpoint as usize > total_vertices {
                return Err(Error::format(
                    "A",
                    line,
                    format!("vertex {endpoint} outside 1..={total_vertices}"),
                ));
            }
        }
        if a == b {
            dropped_self_loops += 1;
            continue;
        }
        let (ga, gb) = (owner[(a - 1) as usize], owner[(b - 1) as usize]);
        if ga != gb {
            return Err(Error::format(
                "A",
                line,
                format!("edge ({a}, {b}) spans graphs {} and {}", ga + 1, gb + 1),
            ));
        }
        let (u, v) = (
            local_index[(a - 1) as usize] as u32,
            local_index[(b - 1) as usize] as u32,
        );
        edge_sets[ga].insert((u.min(v), u.max(v)));
    }
    if dropped_self_loops > 0 {
        log::info!("{dataset_name}: dropped {dropped_self_loops} self-loop record(s)");
    }

    let node_attrs = match &sources.node_labels {
        Some(text) => {
            let parsed = parse_int_column(text, "node_labels")?;
            if parsed.len() != total_vertices {
                let line = parsed.len().min(total_vertices) + 1;
                return Err(Error::format(
                    "node_labels",
                    line,
                    format!("{} records for {} vertices", parsed.len(), total_vertices),
                ));
            }
            let mut per_graph = vec![Vec::new(); graph_count];
            for (i, (_, v)) in parsed.into_iter().enumerate() {
                per_graph[owner[i]].push(v);
            }
            Some(per_graph)
        }
        None => None,
    };

    let mut graphs = Vec::with_capacity(graph_count);
    for g in 0..graph_count {
        let attrs = node_attrs.as_ref().map(|a| a[g].clone());
        graphs.push(Graph::new(
            vertex_counts[g],
            edge_sets[g].iter().copied(),
            attrs,
        )?);
    }

    Ok(DatasetBundle {
        name: dataset_name.to_string(),
        graphs,
        class_labels,
        has_vertex_attributes: node_attrs.is_some(),
    })
}

/// Render a bundle back to the four-file text layout.
///
/// Every undirected edge is written in both orientations, matching how the
/// benchmark distributions list them. Re-parsing the rendered sources yields
/// a bundle equal to the input.
pub fn render_tu_sources(bundle: &DatasetBundle) -> TuSources {
    let mut a = String::new();
    let mut indicator = String::new();
    let mut graph_labels = String::new();
    let mut node_labels = String::new();
    let mut offset = 0usize;
    for (g, graph) in bundle.graphs.iter().enumerate() {
        for v in 0..graph.vertex_count() {
            writeln!(indicator, "{}", g + 1).unwrap();
            if let Some(attrs) = graph.initial_attributes() {
                writeln!(node_labels, "{}", attrs[v]).unwrap();
            }
        }
        for &(u, v) in graph.edges() {
            let (gu, gv) = (offset + u as usize + 1, offset + v as usize + 1);
            writeln!(a, "{gu}, {gv}").unwrap();
            writeln!(a, "{gv}, {gu}").unwrap();
        }
        writeln!(graph_labels, "{}", bundle.class_labels[g]).unwrap();
        offset += graph.vertex_count();
    }
    TuSources {
        adjacency: a,
        graph_indicator: indicator,
        graph_labels,
        node_labels: bundle.has_vertex_attributes.then_some(node_labels),
    }
}

/// Write a bundle to `directory_path` in the benchmark layout.
pub fn write_tu_dataset(bundle: &DatasetBundle, directory_path: &Path) -> Result<()> {
    let sources = render_tu_sources(bundle);
    let mut files = vec![
        ("A", &sources.adjacency),
        ("graph_indicator", &sources.graph_indicator),
        ("graph_labels", &sources.graph_labels),
    ];
    if let Some(node_labels) = &sources.node_labels {
        files.push(("node_labels", node_labels));
    }
    for (suffix, text) in files {
        let path = directory_path.join(format!("{}_{suffix}.txt", bundle.name));
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Non-blank lines with their original 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_int_column(text: &str, file: &str) -> Result<Vec<(usize, i64)>> {
    records(text)
        .map(|(line, record)| {
            record
                .parse::<i64>()
                .map(|v| (line, v))
                .map_err(|_| Error::format(file, line, format!("expected integer, got {record:?}")))
        })
        .collect()
}

fn parse_pair(record: &str, file: &str, line: usize) -> Result<(i64, i64)> {
    let mut parts = record.split(',');
    let (a, b) = (parts.next(), parts.next());
    if let (Some(a), Some(b), None) = (a, b, parts.next()) {
        let a = a.trim().parse::<i64>();
        let b = b.trim().parse::<i64>();
        if let (Ok(a), Ok(b)) = (a, b) {
            return Ok((a, b));
        }
    }
    Err(Error::format(
        file,
        line,
        format!("expected \"u, v\", got {record:?}"),
    ))
}
