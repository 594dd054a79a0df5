//! Road-network graph and the matrices derived from it.
//!
//! A [`TrafficGraph`] is an undirected graph of traffic sensing locations
//! with edge lengths in miles and free-flow speeds in mph. From it this
//! module derives the adjacency matrix, the k-hop neighborhood matrices
//! (self-loops included), the all-pairs shortest-path distance matrix, the
//! free-flow reachable matrix, and the Hadamard support masks that confine
//! every graph convolution's receptive field.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{BoolMatrix, DenseMatrix};
use crate::scalar::Scalar;

/// Minutes per hour, the unit conversion inside the reachability test
/// (speeds are mph, the time quantum is minutes, distances are miles).
const MINUTES_PER_HOUR: f64 = 60.0;

/// Undirected edge with a positive roadway length in miles.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge<F> {
    pub a: usize,
    pub b: usize,
    pub length_miles: F,
}

/// Free-flow speed configuration: one network-wide scalar, or one speed per
/// node (typically the posted speed limit at each sensor).
#[derive(Debug, Clone, PartialEq)]
pub enum NodeSpeeds<F> {
    Uniform(F),
    PerNode(Vec<F>),
}

impl<F: Scalar> NodeSpeeds<F> {
    pub fn at(&self, node: usize) -> F {
        match self {
            NodeSpeeds::Uniform(s) => *s,
            NodeSpeeds::PerNode(v) => v[node],
        }
    }

    fn validate(&self, node_count: usize) -> Result<()> {
        match self {
            NodeSpeeds::Uniform(s) => {
                if !s.is_finite() || *s <= F::zero() {
                    return Err(Error::InvalidGraph(format!("free-flow speed must be positive, got {s}")));
                }
            }
            NodeSpeeds::PerNode(v) => {
                if v.len() != node_count {
                    return Err(Error::InvalidGraph(format!(
                        "per-node speeds cover {} nodes, graph has {node_count}",
                        v.len()
                    )));
                }
                for (i, s) in v.iter().enumerate() {
                    if !s.is_finite() || *s <= F::zero() {
                        return Err(Error::InvalidGraph(format!(
                            "free-flow speed at node {i} must be positive, got {s}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Undirected traffic network: nodes are sensing locations, edges are the
/// road segments connecting them. Congestion impact propagates both ways
/// along a road, so the graph carries no edge direction.
#[derive(Debug, Clone)]
pub struct TrafficGraph<F> {
    node_count: usize,
    edges: Vec<Edge<F>>,
    free_flow: NodeSpeeds<F>,
}

impl<F: Scalar> TrafficGraph<F> {
    /// Validates and builds a graph. Rejects out-of-range node indices,
    /// self-loops, duplicate undirected edges, and nonpositive lengths or
    /// speeds.
    pub fn new(node_count: usize, edges: Vec<Edge<F>>, free_flow: NodeSpeeds<F>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        free_flow.validate(node_count)?;
        let mut seen = HashSet::new();
        for e in &edges {
            if e.a >= node_count || e.b >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) references a node outside 0..{node_count}",
                    e.a, e.b
                )));
            }
            if e.a == e.b {
                return Err(Error::InvalidGraph(format!("self-loop edge at node {}", e.a)));
            }
            if !e.length_miles.is_finite() || e.length_miles <= F::zero() {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) must have positive length, got {}",
                    e.a, e.b, e.length_miles
                )));
            }
            let key = (e.a.min(e.b), e.a.max(e.b));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate undirected edge ({}, {})",
                    key.0, key.1
                )));
            }
        }
        Ok(TrafficGraph {
            node_count,
            edges,
            free_flow,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge<F>] {
        &self.edges
    }

    pub fn free_flow(&self) -> &NodeSpeeds<F> {
        &self.free_flow
    }

    fn neighbor_lists(&self) -> Vec<Vec<(usize, F)>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.a].push((e.b, e.length_miles));
            adj[e.b].push((e.a, e.length_miles));
        }
        // Fixed neighbor order keeps Dijkstra's tie-breaking deterministic.
        for list in &mut adj {
            list.sort_by_key(|&(n, _)| n);
        }
        adj
    }
}

/// Symmetric {0,1} adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    values: BoolMatrix,
}

impl AdjacencyMatrix {
    pub fn values(&self) -> &BoolMatrix {
        &self.values
    }

    pub fn node_count(&self) -> usize {
        self.values.rows()
    }

    /// Row sums, i.e. the diagonal of the degree matrix.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.values.rows())
            .map(|i| self.values.row(i).iter().filter(|&&v| v).count())
            .collect()
    }
}

/// k-hop neighborhood matrix: entry (i, j) is one iff node j is within k
/// hops of node i. Includes every node's self-loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KHopNeighborhood {
    order: usize,
    values: BoolMatrix,
}

impl KHopNeighborhood {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &BoolMatrix {
        &self.values
    }
}

/// All-pairs shortest-path distances in miles; unreachable pairs are
/// `+infinity`, the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<F> {
    values: DenseMatrix<F>,
}

impl<F: Scalar> DistanceMatrix<F> {
    pub fn values(&self) -> &DenseMatrix<F> {
        &self.values
    }

    pub fn node_count(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.values.get(i, j)
    }
}

/// Pairwise free-flow speeds used by the reachability test.
#[derive(Debug, Clone, PartialEq)]
pub enum FreeFlowSpeeds<F> {
    Uniform(F),
    PerPair(DenseMatrix<F>),
}

impl<F: Scalar> FreeFlowSpeeds<F> {
    pub fn at(&self, i: usize, j: usize) -> F {
        match self {
            FreeFlowSpeeds::Uniform(s) => *s,
            FreeFlowSpeeds::PerPair(m) => m.get(i, j),
        }
    }
}

/// Free-flow reachable matrix: entry (i, j) is one iff a vehicle at
/// free-flow speed covers the roadway distance between i and j within
/// `horizon_steps` time quanta. Every node is self-reachable.
#[derive(Debug, Clone, PartialEq)]
pub struct FFRMatrix<F> {
    values: BoolMatrix,
    horizon_steps: usize,
    time_quantum_min: F,
}

impl<F: Scalar> FFRMatrix<F> {
    pub fn values(&self) -> &BoolMatrix {
        &self.values
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    pub fn time_quantum_min(&self) -> F {
        self.time_quantum_min
    }

    /// Builds an FFR-shaped matrix directly from its {0,1} values. The
    /// diagonal is forced to one.
    pub fn from_values(values: BoolMatrix, horizon_steps: usize, time_quantum_min: F) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(Error::shape(
                "ffr",
                format!("{}x{}", values.rows(), values.cols()),
                "square".to_string(),
            ));
        }
        let mut values = values;
        for i in 0..values.rows() {
            values.set(i, i, true);
        }
        Ok(FFRMatrix {
            values,
            horizon_steps,
            time_quantum_min,
        })
    }
}

/// Receptive-field mask for one convolution order: the Hadamard product of
/// the k-hop neighborhood and the free-flow reachable matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    order: usize,
    values: BoolMatrix,
}

impl SupportMask {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &BoolMatrix {
        &self.values
    }

    pub fn node_count(&self) -> usize {
        self.values.rows()
    }

    /// Mask made of an explicit {0,1} matrix; used by tests and by model
    /// reconstruction from checkpoints.
    pub fn from_values(order: usize, values: BoolMatrix) -> Self {
        SupportMask { order, values }
    }
}

/// Builds the adjacency matrix of a validated graph.
pub fn build_adjacency<F: Scalar>(graph: &TrafficGraph<F>) -> AdjacencyMatrix {
    let n = graph.node_count();
    let mut values = BoolMatrix::zeros(n, n);
    for e in graph.edges() {
        values.set(e.a, e.b, true);
        values.set(e.b, e.a, true);
    }
    AdjacencyMatrix { values }
}

/// k-hop neighborhood matrix: the boolean power `(A + I)^k` clipped to
/// {0,1}. Entry (i, j) is one exactly when the hop distance d(i, j) <= k.
pub fn khop_neighborhood(adjacency: &AdjacencyMatrix, k: usize) -> Result<KHopNeighborhood> {
    if k == 0 {
        return Err(Error::InvalidArgument("hop order k must be >= 1".into()));
    }
    let n = adjacency.node_count();
    let mut one_hop = adjacency.values().clone();
    for i in 0..n {
        one_hop.set(i, i, true);
    }
    let mut values = one_hop.clone();
    for _ in 1..k {
        let next = values.bool_matmul(&one_hop)?;
        if next == values {
            break; // stationary: higher powers no longer grow
        }
        values = next;
    }
    Ok(KHopNeighborhood { order: k, values })
}

/// Dijkstra heap entry ordered by ascending distance, breaking ties on the
/// smaller node index so path reconstruction is deterministic.
struct HeapEntry<F> {
    dist: F,
    node: usize,
}

impl<F: Scalar> PartialEq for HeapEntry<F> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<F: Scalar> Eq for HeapEntry<F> {}
impl<F: Scalar> PartialOrd for HeapEntry<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Scalar> Ord for HeapEntry<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest distance.
        other
            .dist
            .partial_cmp(&self.dist)
            .expect("finite distances")
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn dijkstra<F: Scalar>(
    adj: &[Vec<(usize, F)>],
    source: usize,
) -> (Vec<F>, Vec<Option<usize>>) {
    let n = adj.len();
    let mut dist = vec![F::infinity(); n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = F::zero();
    heap.push(HeapEntry {
        dist: F::zero(),
        node: source,
    });
    while let Some(HeapEntry { node, .. }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        for &(next, len) in &adj[node] {
            let candidate = dist[node] + len;
            if candidate < dist[next] {
                dist[next] = candidate;
                prev[next] = Some(node);
                heap.push(HeapEntry {
                    dist: candidate,
                    node: next,
                });
            }
        }
    }
    (dist, prev)
}

/// All-pairs shortest-path distances over summed edge lengths (Dijkstra per
/// source). Disconnected pairs are `+infinity`. The two directions of a pair
/// sum the same edges in opposite orders, which can differ by one ulp, so
/// the result is symmetrized to the smaller rounding.
pub fn shortest_path_distances<F: Scalar>(graph: &TrafficGraph<F>) -> DistanceMatrix<F> {
    let n = graph.node_count();
    let adj = graph.neighbor_lists();
    let mut values = DenseMatrix::zeros(n, n);
    for source in 0..n {
        let (dist, _) = dijkstra(&adj, source);
        for (j, d) in dist.into_iter().enumerate() {
            values.set(source, j, d);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = values.get(i, j).min(values.get(j, i));
            values.set(i, j, d);
            values.set(j, i, d);
        }
    }
    DistanceMatrix { values }
}

/// Pairwise free-flow speeds. With a uniform network speed this is the
/// scalar; with per-node speeds, the speed between i and j is the harmonic
/// mean of the node speeds along the shortest path between them (ties broken
/// deterministically). Pairs without a path fall back to the harmonic mean
/// of the two endpoint speeds; the reachability test ignores them anyway
/// because their distance is infinite.
pub fn pairwise_free_flow<F: Scalar>(graph: &TrafficGraph<F>) -> FreeFlowSpeeds<F> {
    match graph.free_flow() {
        NodeSpeeds::Uniform(s) => FreeFlowSpeeds::Uniform(*s),
        NodeSpeeds::PerNode(speeds) => {
            let n = graph.node_count();
            let adj = graph.neighbor_lists();
            let mut pairwise = DenseMatrix::zeros(n, n);
            for source in 0..n {
                let (dist, prev) = dijkstra(&adj, source);
                // pairs are filled from the lower-index source and mirrored,
                // keeping the matrix exactly symmetric under path ties
                for target in source..n {
                    let s = if !dist[target].is_finite() {
                        harmonic_mean(&[speeds[source], speeds[target]])
                    } else {
                        let mut path_speeds = Vec::new();
                        let mut cursor = target;
                        loop {
                            path_speeds.push(speeds[cursor]);
                            match prev[cursor] {
                                Some(p) => cursor = p,
                                None => break,
                            }
                        }
                        harmonic_mean(&path_speeds)
                    };
                    pairwise.set(source, target, s);
                    pairwise.set(target, source, s);
                }
            }
            FreeFlowSpeeds::PerPair(pairwise)
        }
    }
}

fn harmonic_mean<F: Scalar>(values: &[F]) -> F {
    let count = F::from_usize(values.len()).expect("path length fits scalar");
    let inv_sum: F = values.iter().map(|&v| F::one() / v).sum();
    count / inv_sum
}

/// Free-flow reachable matrix: entry (i, j) is one iff
/// `speed(i, j) * m * delta_t` (converted mph * minutes -> miles) covers the
/// shortest-path distance. The diagonal is always one.
pub fn free_flow_reachable<F: Scalar>(
    dist: &DistanceMatrix<F>,
    speeds: &FreeFlowSpeeds<F>,
    horizon_steps: usize,
    time_quantum_min: F,
) -> Result<FFRMatrix<F>> {
    if horizon_steps == 0 {
        return Err(Error::InvalidArgument("horizon m must be >= 1".into()));
    }
    if !time_quantum_min.is_finite() || time_quantum_min <= F::zero() {
        return Err(Error::InvalidArgument(format!(
            "time quantum must be positive minutes, got {time_quantum_min}"
        )));
    }
    let n = dist.node_count();
    if let FreeFlowSpeeds::PerPair(m) = speeds {
        if m.shape() != (n, n) {
            return Err(Error::shape("free_flow_reachable", format!("{n}x{n}"), format!("{}x{}", m.rows(), m.cols())));
        }
    }
    let horizon = F::from_usize(horizon_steps).expect("horizon fits scalar") * time_quantum_min
        / F::c(MINUTES_PER_HOUR);
    let mut values = BoolMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let s = speeds.at(i, j);
            if !s.is_finite() || s <= F::zero() {
                return Err(Error::InvalidArgument(format!(
                    "free-flow speed for pair ({i}, {j}) must be positive, got {s}"
                )));
            }
            let d = dist.get(i, j);
            values.set(i, j, d.is_finite() && s * horizon >= d);
        }
    }
    for i in 0..n {
        values.set(i, i, true);
    }
    Ok(FFRMatrix {
        values,
        horizon_steps,
        time_quantum_min,
    })
}

/// Hadamard product of a k-hop neighborhood and the reachability matrix:
/// the {0,1} support outside which convolution weights are pinned to zero.
pub fn support_mask<F: Scalar>(khop: &KHopNeighborhood, ffr: &FFRMatrix<F>) -> Result<SupportMask> {
    let values = khop.values().and(ffr.values())?;
    Ok(SupportMask {
        order: khop.order(),
        values,
    })
}

/// Hop distances via BFS from every node; `usize::MAX` marks unreachable.
fn bfs_hops(adjacency: &AdjacencyMatrix) -> Vec<Vec<usize>> {
    let n = adjacency.node_count();
    let mut all = Vec::with_capacity(n);
    for source in 0..n {
        let mut hops = vec![usize::MAX; n];
        hops[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(node) = queue.pop_front() {
            for next in 0..n {
                if adjacency.values().get(node, next) && hops[next] == usize::MAX {
                    hops[next] = hops[node] + 1;
                    queue.push_back(next);
                }
            }
        }
        all.push(hops);
    }
    all
}

/// Smallest k at which the support mask stops growing, i.e.
/// `Ahat^k ⊙ FFR == Ahat^(k+1) ⊙ FFR`. Beyond it the mask equals the
/// reachability-confined closure. Always at least 1.
pub fn compute_k_max<F: Scalar>(adjacency: &AdjacencyMatrix, ffr: &FFRMatrix<F>) -> usize {
    let hops = bfs_hops(adjacency);
    let mut k_max = 1;
    for (i, row) in hops.iter().enumerate() {
        for (j, &hop) in row.iter().enumerate() {
            if ffr.values().get(i, j) && hop != usize::MAX {
                k_max = k_max.max(hop);
            }
        }
    }
    k_max
}

/// Everything the models need from a graph: the derived matrices and the
/// per-order support masks for hop orders 1..=k.
#[derive(Debug, Clone)]
pub struct GraphMatrices<F> {
    pub adjacency: AdjacencyMatrix,
    pub khops: Vec<KHopNeighborhood>,
    pub dist: DistanceMatrix<F>,
    pub ffr: FFRMatrix<F>,
    pub masks: Vec<SupportMask>,
    pub k_max: usize,
}

/// Derives adjacency, k-hop neighborhoods, distances, reachability, and
/// support masks in one pass.
pub fn build_graph_matrices<F: Scalar>(
    graph: &TrafficGraph<F>,
    k: usize,
    horizon_steps: usize,
    time_quantum_min: F,
) -> Result<GraphMatrices<F>> {
    if k == 0 {
        return Err(Error::InvalidArgument("hop order k must be >= 1".into()));
    }
    let adjacency = build_adjacency(graph);
    let dist = shortest_path_distances(graph);
    let speeds = pairwise_free_flow(graph);
    let ffr = free_flow_reachable(&dist, &speeds, horizon_steps, time_quantum_min)?;
    let mut khops = Vec::with_capacity(k);
    let mut masks = Vec::with_capacity(k);
    for order in 1..=k {
        let khop = khop_neighborhood(&adjacency, order)?;
        masks.push(support_mask(&khop, &ffr)?);
        khops.push(khop);
    }
    let k_max = compute_k_max(&adjacency, &ffr);
    Ok(GraphMatrices {
        adjacency,
        khops,
        dist,
        ffr,
        masks,
        k_max,
    })
}

// ---------------------------------------------------------------------------
// File formats: node-id list, topology CSV, speed-limit CSV, matrix export.
// ---------------------------------------------------------------------------

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads the node-id file: one sensor identifier per line, line number =
/// node index. Duplicate or empty ids are rejected.
pub fn load_node_ids(path: &Path) -> Result<Vec<String>> {
    let text = read_to_string(path)?;
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let id = line.trim();
        if id.is_empty() {
            return Err(Error::Data(format!(
                "{}: empty node id on line {}",
                path.display(),
                lineno + 1
            )));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::Data(format!(
                "{}: duplicate node id '{id}' on line {}",
                path.display(),
                lineno + 1
            )));
        }
        ids.push(id.to_string());
    }
    if ids.is_empty() {
        return Err(Error::Data(format!("{}: no node ids", path.display())));
    }
    Ok(ids)
}

fn id_index(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect()
}

/// Reads the topology CSV (`node_i,node_j,length_miles`, one edge per line).
/// Node columns hold sensor identifiers resolved through the node-id list.
pub fn load_topology<F: Scalar>(path: &Path, node_ids: &[String]) -> Result<Vec<Edge<F>>> {
    let text = read_to_string(path)?;
    let index = id_index(node_ids);
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Data(format!(
                "{}:{}: expected 'node_i,node_j,length_miles', got {} fields",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let resolve = |token: &str| -> Result<usize> {
            index.get(token).copied().ok_or_else(|| {
                Error::Data(format!(
                    "{}:{}: unknown node id '{token}'",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let a = resolve(fields[0])?;
        let b = resolve(fields[1])?;
        let length: f64 = fields[2].parse().map_err(|_| {
            Error::Data(format!(
                "{}:{}: bad edge length '{}'",
                path.display(),
                lineno + 1,
                fields[2]
            ))
        })?;
        edges.push(Edge {
            a,
            b,
            length_miles: F::c(length),
        });
    }
    Ok(edges)
}

/// Reads the optional speed-limit CSV (`node_id,free_flow_mph`). Nodes
/// absent from the file use the fallback scalar.
pub fn load_speed_limits<F: Scalar>(
    path: &Path,
    node_ids: &[String],
    fallback_mph: F,
) -> Result<NodeSpeeds<F>> {
    let text = read_to_string(path)?;
    let index = id_index(node_ids);
    let mut speeds = vec![fallback_mph; node_ids.len()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Data(format!(
                "{}:{}: expected 'node_id,free_flow_mph'",
                path.display(),
                lineno + 1
            )));
        }
        let node = index.get(fields[0]).copied().ok_or_else(|| {
            Error::Data(format!(
                "{}:{}: unknown node id '{}'",
                path.display(),
                lineno + 1,
                fields[0]
            ))
        })?;
        let mph: f64 = fields[1].parse().map_err(|_| {
            Error::Data(format!(
                "{}:{}: bad speed '{}'",
                path.display(),
                lineno + 1,
                fields[1]
            ))
        })?;
        speeds[node] = F::c(mph);
    }
    Ok(NodeSpeeds::PerNode(speeds))
}

/// Writes the topology of a graph back out in the edge-list CSV format.
pub fn write_topology_csv<F: Scalar>(
    path: &Path,
    graph: &TrafficGraph<F>,
    node_ids: &[String],
) -> Result<()> {
    let mut out = String::new();
    for e in graph.edges() {
        out.push_str(&format!(
            "{},{},{}\n",
            node_ids[e.a], node_ids[e.b], e.length_miles
        ));
    }
    write_file(path, out.as_bytes())
}

/// Writes a node-id file, one identifier per line in index order.
pub fn write_node_ids(path: &Path, node_ids: &[String]) -> Result<()> {
    let mut out = String::new();
    for id in node_ids {
        out.push_str(id);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Writes an N x N matrix as CSV with a header row of node identifiers.
pub fn write_matrix_csv<F: Scalar>(
    path: &Path,
    matrix: &DenseMatrix<F>,
    node_ids: &[String],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&node_ids.join(","));
    out.push('\n');
    for i in 0..matrix.rows() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Writes a {0,1} matrix as CSV with a header row of node identifiers.
pub fn write_bool_matrix_csv(path: &Path, matrix: &BoolMatrix, node_ids: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&node_ids.join(","));
    out.push('\n');
    for i in 0..matrix.rows() {
        let row: Vec<&str> = matrix.row(i).iter().map(|&v| if v { "1" } else { "0" }).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}
