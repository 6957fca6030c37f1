//! Undirected weighted graphs and their combinatorial Laplacian.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::linalg::RMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// An undirected graph with strictly positive edge weights.
///
/// Edges are stored once per unordered pair with `i < j`, sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.i] += e.w;
            d[e.j] += e.w;
        }
        d
    }

    /// Number of connected components (union-find).
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n;
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a.max(b)] = a.min(b);
                components -= 1;
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    pub fn require_connected(&self) -> Result<()> {
        match self.component_count() {
            1 => Ok(()),
            components => Err(Error::Disconnected { components }),
        }
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        laplacian(self)
    }

    /// One-line summary: vertex count, edge count, connectivity.
    pub fn stats_line(&self) -> String {
        let components = self.component_count();
        format!(
            "vertices={} edges={} components={} connected={}",
            self.n,
            self.edges.len(),
            components,
            components == 1
        )
    }
}

/// Validate, symmetrize and deduplicate an edge list.
pub fn build_graph(n: usize, edge_list: &[(usize, usize, f64)]) -> Result<Graph> {
    if n == 0 {
        return Err(Error::DegenerateInput("graph needs at least one vertex".into()));
    }
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(i, j, w) in edge_list {
        for index in [i, j] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, len: n });
            }
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { i, j, w });
        }
        let key = (i.min(j), i.max(j));
        if let Some(&first) = pairs.get(&key) {
            if first != w {
                return Err(Error::ConflictingDuplicateEdge { i: key.0, j: key.1, first, second: w });
            }
        } else {
            pairs.insert(key, w);
        }
    }
    let edges = pairs.into_iter().map(|((i, j), w)| Edge { i, j, w }).collect();
    Ok(Graph { n, edges })
}

/// Dense combinatorial Laplacian `L = D - W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    matrix: RMatrix,
}

impl LaplacianMatrix {
    /// Wrap an explicit symmetric matrix, e.g. one read from disk.
    pub fn from_matrix(matrix: RMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if matrix[[i, j]] != matrix[[j, i]] {
                    return Err(Error::InvalidParameter(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.matrix
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    /// Gershgorin upper bound on the largest eigenvalue.
    pub fn gershgorin_bound(&self) -> f64 {
        self.matrix
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let off: f64 = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum();
                row[i] + off
            })
            .fold(0.0, f64::max)
    }
}

pub fn laplacian(g: &Graph) -> LaplacianMatrix {
    let n = g.n;
    let mut m = RMatrix::zeros((n, n));
    for e in &g.edges {
        m[[e.i, e.j]] -= e.w;
        m[[e.j, e.i]] -= e.w;
        m[[e.i, e.i]] += e.w;
        m[[e.j, e.j]] += e.w;
    }
    LaplacianMatrix { matrix: m }
}

/// Which pairs of a point cloud receive an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sparsify {
    /// Every pair whose weight does not underflow to zero.
    Dense,
    /// Drop weights below the threshold.
    Threshold(f64),
    /// Union of each point's `k` nearest neighbours.
    Knn(usize),
}

impl Sparsify {
    /// Dense up to 1000 points, symmetrized 10-NN beyond.
    pub fn default_for(n_points: usize) -> Self {
        if n_points <= 1000 {
            Sparsify::Dense
        } else {
            Sparsify::Knn(10)
        }
    }
}

pub fn gaussian_weight(dist_sq: f64, sigma: f64) -> f64 {
    (-dist_sq / (2.0 * sigma * sigma)).exp()
}

/// Gaussian-kernel similarity graph over a point cloud.
pub fn gaussian_point_cloud_graph<P: AsRef<[f64]>>(points: &[P], sigma: f64, sparsify: Sparsify) -> Result<Graph> {
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateInput(format!("need at least 2 points, got {n}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let dim = points[0].as_ref().len();
    for p in points {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite coordinate".into()));
        }
    }
    let dist_sq = |a: usize, b: usize| -> f64 {
        points[a].as_ref().iter().zip(points[b].as_ref()).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let mut edges = Vec::new();
    match sparsify {
        Sparsify::Dense | Sparsify::Threshold(_) => {
            let floor = match sparsify {
                Sparsify::Threshold(eps) => eps,
                _ => 0.0,
            };
            for a in 0..n {
                for b in (a + 1)..n {
                    let w = gaussian_weight(dist_sq(a, b), sigma);
                    if w > 0.0 && w >= floor {
                        edges.push((a, b, w));
                    }
                }
            }
        }
        Sparsify::Knn(k) => {
            if k == 0 {
                return Err(Error::InvalidParameter("k must be at least 1".into()));
            }
            let mut chosen = std::collections::BTreeSet::new();
            for a in 0..n {
                let mut others: Vec<(f64, usize)> = (0..n).filter(|&b| b != a).map(|b| (dist_sq(a, b), b)).collect();
                others.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                for &(_, b) in others.iter().take(k) {
                    chosen.insert((a.min(b), a.max(b)));
                }
            }
            for (a, b) in chosen {
                let w = gaussian_weight(dist_sq(a, b), sigma);
                if w > 0.0 {
                    edges.push((a, b, w));
                }
            }
        }
    }
    build_graph(n, &edges)
}

/// Pixel lattice graph: pixels within spatial distance `cutoff` are joined
/// with weight `exp(-dist^2 / 2 theta_w^2)`.
pub fn image_grid_graph(image: ArrayView2<'_, f64>, theta_w: f64, cutoff: f64) -> Result<Graph> {
    let (h, w) = image.dim();
    if h < 2 || w < 2 {
        return Err(Error::DegenerateInput(format!("image must be at least 2x2, got {h}x{w}")));
    }
    if !(theta_w > 0.0) || !theta_w.is_finite() {
        return Err(Error::InvalidParameter(format!("theta_w must be positive, got {theta_w}")));
    }
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
    }
    let reach = cutoff.floor() as isize;
    let mut edges = Vec::new();
    for r in 0..h as isize {
        for c in 0..w as isize {
            let a = (r as usize) * w + c as usize;
            for dr in 0..=reach {
                for dc in -reach..=reach {
                    if dr == 0 && dc <= 0 {
                        continue;
                    }
                    let (r2, c2) = (r + dr, c + dc);
                    if r2 >= h as isize || c2 < 0 || c2 >= w as isize {
                        continue;
                    }
                    let d2 = (dr * dr + dc * dc) as f64;
                    if d2.sqrt() <= cutoff {
                        let b = (r2 as usize) * w + c2 as usize;
                        edges.push((a, b, gaussian_weight(d2, theta_w)));
                    }
                }
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    build_graph(h * w, &edges)
}

/// Write the tab-separated edge list, preceded by `#vertices N` and any
/// extra comment lines.
pub fn write_edge_list<W: Write>(g: &Graph, mut out: W, comments: &[String]) -> std::io::Result<()> {
    writeln!(out, "#vertices {}", g.n)?;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut buf = String::new();
    for e in &g.edges {
        buf.clear();
        let _ = writeln!(buf, "{}\t{}\t{}", e.i, e.j, e.w);
        out.write_all(buf.as_bytes())?;
    }
    out.flush()
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<Graph> {
    let mut n = None;
    let mut edges = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#vertices") {
            let v = rest.trim().parse::<usize>().map_err(|e| Error::parse(lineno, format!("bad vertex count: {e}")))?;
            n = Some(v);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let mut next = |name: &str| fields.next().ok_or_else(|| Error::parse(lineno, format!("missing {name}")));
        let i = next("i")?.trim().parse::<usize>().map_err(|e| Error::parse(lineno, e.to_string()))?;
        let j = next("j")?.trim().parse::<usize>().map_err(|e| Error::parse(lineno, e.to_string()))?;
        let w = next("w")?.trim().parse::<f64>().map_err(|e| Error::parse(lineno, e.to_string()))?;
        edges.push((i, j, w));
    }
    let n = n.ok_or_else(|| Error::parse(0, "missing '#vertices N' header"))?;
    build_graph(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn minimal_graph() {
        let g = build_graph(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn consistent_duplicate_is_merged() {
        let g = build_graph(3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(g.edges(), &[Edge { i: 0, j: 1, w: 1.0 }]);
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(matches!(build_graph(3, &[(0, 0, 1.0)]), Err(Error::SelfLoop(0))));
        assert!(matches!(build_graph(3, &[(0, 3, 1.0)]), Err(Error::IndexOutOfRange { index: 3, len: 3 })));
        assert!(matches!(build_graph(3, &[(0, 1, 0.0)]), Err(Error::NonPositiveWeight { .. })));
        assert!(matches!(build_graph(3, &[(0, 1, -2.0)]), Err(Error::NonPositiveWeight { .. })));
        assert!(matches!(
            build_graph(3, &[(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::ConflictingDuplicateEdge { i: 0, j: 1, .. })
        ));
    }

    #[test]
    fn path_laplacians() {
        let p2 = build_graph(2, &[(0, 1, 1.0)]).unwrap().laplacian();
        assert_eq!(p2.matrix(), &array![[1.0, -1.0], [-1.0, 1.0]]);
        let p3 = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap().laplacian();
        assert_eq!(p3.matrix(), &array![[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]]);
    }

    #[test]
    fn components_counted() {
        let g = build_graph(5, &[(0, 1, 1.0), (2, 3, 0.5)]).unwrap();
        assert_eq!(g.component_count(), 3);
        assert!(matches!(g.require_connected(), Err(Error::Disconnected { components: 3 })));
    }

    #[test]
    fn point_cloud_weights() {
        let sigma = 0.1;
        let pts = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![sigma * 2f64.sqrt(), 0.0]];
        let g = gaussian_point_cloud_graph(&pts, sigma, Sparsify::Dense).unwrap();
        let w01 = g.edges().iter().find(|e| (e.i, e.j) == (0, 1)).unwrap().w;
        let w02 = g.edges().iter().find(|e| (e.i, e.j) == (0, 2)).unwrap().w;
        assert_eq!(w01, 1.0);
        assert!((w02 - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(
            gaussian_point_cloud_graph(&[vec![1.0]], 0.1, Sparsify::Dense),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn knn_and_threshold_sparsify() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.1]).collect();
        let knn = gaussian_point_cloud_graph(&pts, 0.1, Sparsify::Knn(2)).unwrap();
        assert!(knn.is_connected());
        assert!(knn.edge_count() <= 6 * 2);
        for a in 0..5 {
            assert!(knn.edges().iter().any(|e| (e.i, e.j) == (a, a + 1)));
        }
        let thr = gaussian_point_cloud_graph(&pts, 0.1, Sparsify::Threshold(0.5)).unwrap();
        assert!(thr.edges().iter().all(|e| e.w >= 0.5));
        assert_eq!(thr.edge_count(), 5);
    }

    #[test]
    fn image_lattice() {
        let img = Array2::<f64>::zeros((2, 2));
        let theta_w = 0.7;
        let g = image_grid_graph(img.view(), theta_w, 1.0).unwrap();
        assert_eq!(g.n_vertices(), 4);
        assert_eq!(g.edge_count(), 4);
        let expected = (-1.0 / (2.0 * theta_w * theta_w)).exp();
        assert!(g.edges().iter().all(|e| (e.w - expected).abs() < 1e-15));
        assert!(matches!(image_grid_graph(img.view(), theta_w, 0.5), Err(Error::EmptyGraph)));
        let diag = image_grid_graph(img.view(), theta_w, 1.5).unwrap();
        assert_eq!(diag.edge_count(), 6);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = build_graph(4, &[(0, 1, 0.1 + 0.2), (2, 3, 1e-300), (1, 3, 7.0)]).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf, &["sigma=0.1".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("#vertices 4\n# sigma=0.1\n"));
        let back = read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(back, g);
        assert!(matches!(read_edge_list("0\t1\t1.0\n".as_bytes()), Err(Error::Parse { .. })));
    }
}
