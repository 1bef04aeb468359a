//! Graphs, frameworks, the edge map and the infinitesimal-rigidity rank test.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default relative tolerance for numerical ranks.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Undirected simple graph with a canonical (lexicographically sorted) edge list.
///
/// Vertices are zero-based internally; scenario files and reports use
/// one-based labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        Graph::new(r.num_vertices, r.edges)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr { num_vertices: g.num_vertices, edges: g.edges }
    }
}

impl Graph {
    /// Builds a graph from zero-based vertex pairs in any orientation and order.
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if num_vertices == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", a + 1)));
            }
            if a >= num_vertices || b >= num_vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge {{{},{}}} references a vertex outside 1..={num_vertices}",
                    a + 1,
                    b + 1
                )));
            }
            canon.push((a.min(b), a.max(b)));
        }
        if canon.is_empty() {
            return Err(Error::InvalidGraph("edge list is empty".into()));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge {{{},{}}}", w[0].0 + 1, w[0].1 + 1)));
        }
        let mut incident = vec![Vec::new(); num_vertices];
        for (e, &(i, j)) in canon.iter().enumerate() {
            incident[i].push(e);
            incident[j].push(e);
        }
        Ok(Graph { num_vertices, edges: canon, incident })
    }

    pub fn complete(num_vertices: usize) -> Result<Self> {
        let edges = (0..num_vertices).flat_map(|i| (i + 1..num_vertices).map(move |j| (i, j)));
        Graph::new(num_vertices, edges)
    }

    /// Complete graph with the listed zero-based edges removed.
    pub fn complete_without(num_vertices: usize, removed: &[(usize, usize)]) -> Result<Self> {
        let removed: Vec<_> = removed.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let edges =
            (0..num_vertices).flat_map(|i| (i + 1..num_vertices).map(move |j| (i, j))).filter(|e| !removed.contains(e));
        Graph::new(num_vertices, edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list, `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Indices (into [`Graph::edges`]) of edges incident to `vertex`.
    pub fn incident_edges(&self, vertex: usize) -> &[usize] {
        &self.incident[vertex]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.edge_index(a, b).is_some()
    }

    /// Copy of this graph with one extra edge.
    pub fn with_edge(&self, a: usize, b: usize) -> Result<Self> {
        Graph::new(self.num_vertices, self.edges.iter().copied().chain([(a, b)]))
    }
}

/// A graph together with positions of its vertices in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Framework<T> {
    graph: Graph,
    dim: usize,
    positions: Vec<T>,
}

impl<T: Scalar> Framework<T> {
    /// `positions` is the concatenated point `(p_1, ..., p_N)` of length `dim * N`.
    pub fn new(graph: Graph, dim: usize, positions: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("ambient dimension must be positive".into()));
        }
        if positions.len() != dim * graph.num_vertices() {
            return Err(Error::Dimension(format!(
                "expected {} coordinates for {} points in R^{dim}, got {}",
                dim * graph.num_vertices(),
                graph.num_vertices(),
                positions.len()
            )));
        }
        Ok(Framework { graph, dim, positions })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn point(&self, vertex: usize) -> &[T] {
        &self.positions[vertex * self.dim..(vertex + 1) * self.dim]
    }
}

/// Result of the infinitesimal-rigidity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank_g: usize,
    pub affine_span_dim: usize,
    pub required_rank: usize,
    pub tolerance: f64,
    pub is_inf_rigid: bool,
}

/// Squared edge lengths `||p_j - p_i||^2` in canonical edge order.
pub fn edge_map<T: Scalar>(fw: &Framework<T>) -> Vec<T> {
    squared_lengths(fw.graph(), fw.dim(), fw.positions())
}

pub(crate) fn squared_lengths<T: Scalar>(graph: &Graph, dim: usize, p: &[T]) -> Vec<T> {
    graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            (0..dim)
                .map(|a| {
                    let d = p[j * dim + a] - p[i * dim + a];
                    d * d
                })
                .sum()
        })
        .collect()
}

/// Derivative of the edge map, one row per canonical edge.
pub fn rigidity_matrix<T: Scalar>(fw: &Framework<T>) -> DMatrix<T> {
    let n = fw.dim();
    let p = fw.positions();
    let two = T::lit(2.0);
    let mut mat = DMatrix::from_element(fw.graph().num_edges(), p.len(), T::zero());
    for (row, &(i, j)) in fw.graph().edges().iter().enumerate() {
        for a in 0..n {
            let diff = p[i * n + a] - p[j * n + a];
            mat[(row, i * n + a)] = two * diff;
            mat[(row, j * n + a)] = -two * diff;
        }
    }
    mat
}

/// Number of singular values above `rel_tol * sigma_max`.
///
/// The decomposition runs in `f64` regardless of the input scalar.
pub fn numerical_rank<T: Scalar>(mat: &DMatrix<T>, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance must be positive, got {rel_tol}")));
    }
    if mat.is_empty() {
        return Ok(0);
    }
    let m: DMatrix<f64> = mat.map(|x| x.as_f64());
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Svd("matrix has non-finite entries".into()));
    }
    let svd = nalgebra::linalg::SVD::try_new(m, false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Svd("singular value iteration did not converge".into()))?;
    let sv = svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * smax).count())
}

/// Dimension of the affine span of the framework's points.
pub fn affine_span_dim<T: Scalar>(fw: &Framework<T>, rel_tol: f64) -> Result<usize> {
    let n = fw.dim();
    let count = fw.graph().num_vertices();
    if count == 0 {
        return Ok(0);
    }
    // offsets from the first point are exactly zero for coincident points,
    // where centring on the mean would leave rounding noise
    let base = fw.point(0);
    let centered = DMatrix::from_fn(count, n, |v, a| fw.point(v)[a].as_f64() - base[a].as_f64());
    numerical_rank(&centered, rel_tol)
}

/// Dimension of the congruence orbit of a configuration whose affine span has dimension `k`.
pub fn orbit_dimension(dim: usize, k: usize) -> usize {
    let free = dim - k.min(dim);
    dim * (dim + 1) / 2 - free * free.saturating_sub(1) / 2
}

pub fn is_infinitesimally_rigid<T: Scalar>(fw: &Framework<T>, rel_tol: f64) -> Result<RankReport> {
    let rank_g = numerical_rank(&rigidity_matrix(fw), rel_tol)?;
    let k = affine_span_dim(fw, rel_tol)?;
    let required_rank = fw.positions().len() - orbit_dimension(fw.dim(), k);
    Ok(RankReport {
        rank_g,
        affine_span_dim: k,
        required_rank,
        tolerance: rel_tol,
        is_inf_rigid: rank_g == required_rank,
    })
}
