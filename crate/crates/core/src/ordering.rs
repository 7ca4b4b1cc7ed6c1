//! Fill-reducing orderings for sparse symmetric factorization.
//!
//! Nested dissection on the adjacency graph: each region is split by a
//! level-set separator taken from a breadth-first search rooted at a
//! pseudo-peripheral vertex, the two halves are ordered recursively and the
//! separator is numbered last. Small regions fall back to reverse
//! Cuthill–McKee order.

use std::collections::VecDeque;

/// Symmetric adjacency structure without self loops.
#[derive(Debug, Clone)]
pub struct Graph {
    xadj: Vec<usize>,
    adj: Vec<u32>,
}

impl Graph {
    /// Builds the symmetrized graph of a square pattern given by rows.
    pub fn from_pattern(n: usize, row_ptr: &[usize], col_idx: &[u32]) -> Self {
        let mut deg = vec![0usize; n + 1];
        for i in 0..n {
            for &j in &col_idx[row_ptr[i]..row_ptr[i + 1]] {
                let j = j as usize;
                if j != i {
                    deg[i + 1] += 1;
                    deg[j + 1] += 1;
                }
            }
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut next = deg.clone();
        let mut adj = vec![0u32; deg[n]];
        for i in 0..n {
            for &j in &col_idx[row_ptr[i]..row_ptr[i + 1]] {
                let j = j as usize;
                if j != i {
                    adj[next[i]] = j as u32;
                    next[i] += 1;
                    adj[next[j]] = i as u32;
                    next[j] += 1;
                }
            }
        }
        // sort + dedup each list, then compact
        let mut xadj = vec![0usize; n + 1];
        let mut out = Vec::with_capacity(adj.len() / 2 + n);
        for i in 0..n {
            let list = &mut adj[deg[i]..deg[i + 1]];
            list.sort_unstable();
            let mut last = u32::MAX;
            for &v in list.iter() {
                if v != last {
                    out.push(v);
                    last = v;
                }
            }
            xadj[i + 1] = out.len();
        }
        Self { xadj, adj: out }
    }

    pub fn n(&self) -> usize {
        self.xadj.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.xadj[v]..self.xadj[v + 1]]
    }
}

const LEAF_SIZE: usize = 48;
const SEPARATOR: u32 = u32::MAX;

struct Dissector<'g> {
    g: &'g Graph,
    region: Vec<u32>,
    level: Vec<u32>,
    next_region: u32,
    order: Vec<usize>,
}

impl<'g> Dissector<'g> {
    /// BFS from `start` inside `id`; returns visited vertices in BFS order
    /// and the level boundaries.
    fn bfs(&mut self, start: usize, id: u32) -> (Vec<usize>, Vec<usize>) {
        let mut seen = Vec::new();
        let mut bounds = vec![0];
        let mut queue = VecDeque::new();
        self.level[start] = 0;
        queue.push_back(start);
        // mark visited by temporarily moving them out of the region
        let visiting = u32::MAX - 1;
        self.region[start] = visiting;
        let mut current = 0u32;
        while let Some(v) = queue.pop_front() {
            if self.level[v] != current {
                bounds.push(seen.len());
                current = self.level[v];
            }
            seen.push(v);
            for &w in self.g.neighbors(v) {
                let w = w as usize;
                if self.region[w] == id {
                    self.region[w] = visiting;
                    self.level[w] = current + 1;
                    queue.push_back(w);
                }
            }
        }
        bounds.push(seen.len());
        for &v in &seen {
            self.region[v] = id;
        }
        (seen, bounds)
    }

    fn pseudo_peripheral(&mut self, start: usize, id: u32) -> (usize, Vec<usize>, Vec<usize>) {
        let mut root = start;
        let (mut seen, mut bounds) = self.bfs(root, id);
        for _ in 0..4 {
            let last = &seen[bounds[bounds.len() - 2]..];
            let cand = *last
                .iter()
                .min_by_key(|&&v| self.g.neighbors(v).iter().filter(|&&w| self.region[w as usize] == id).count())
                .unwrap();
            let (s2, b2) = self.bfs(cand, id);
            if b2.len() > bounds.len() {
                root = cand;
                seen = s2;
                bounds = b2;
            } else {
                break;
            }
        }
        (root, seen, bounds)
    }

    fn leaf(&mut self, nodes: &[usize], id: u32) {
        // reverse Cuthill–McKee inside the region
        let (seen, _) = self.bfs(nodes[0], id);
        debug_assert_eq!(seen.len(), nodes.len());
        for &v in seen.iter().rev() {
            self.region[v] = SEPARATOR;
            self.order.push(v);
        }
    }

    fn fresh_region(&mut self) -> u32 {
        self.next_region += 1;
        self.next_region
    }

    fn dissect(&mut self, nodes: Vec<usize>, id: u32) {
        if nodes.is_empty() {
            return;
        }
        // split into connected components first
        let (first, _) = self.bfs(nodes[0], id);
        if first.len() < nodes.len() {
            let comp_id = self.fresh_region();
            for &v in &first {
                self.region[v] = comp_id;
            }
            let rest: Vec<usize> = nodes.into_iter().filter(|&v| self.region[v] == id).collect();
            self.dissect(first, comp_id);
            self.dissect(rest, id);
            return;
        }
        if nodes.len() <= LEAF_SIZE {
            self.leaf(&nodes, id);
            return;
        }
        let (_, seen, bounds) = self.pseudo_peripheral(nodes[0], id);
        let nlev = bounds.len() - 1;
        if nlev < 3 {
            self.leaf(&nodes, id);
            return;
        }
        let half = seen.len() / 2;
        let mut m = (1..nlev - 1).find(|&l| bounds[l + 1] >= half).unwrap_or(nlev - 2);
        m = m.clamp(1, nlev - 2);
        for l in 0..nlev {
            for &v in &seen[bounds[l]..bounds[l + 1]] {
                self.level[v] = l as u32;
            }
        }
        let level_of = |l: usize| &seen[bounds[l]..bounds[l + 1]];
        let upper = (m + 1) as u32;

        let part_a = self.fresh_region();
        let part_b = self.fresh_region();
        let mut a_nodes = Vec::new();
        let mut b_nodes = Vec::new();
        let mut sep = Vec::new();
        for l in 0..nlev {
            for &v in level_of(l) {
                if l < m {
                    a_nodes.push(v);
                } else if l > m {
                    b_nodes.push(v);
                } else {
                    let touches_upper = self
                        .g
                        .neighbors(v)
                        .iter()
                        .any(|&w| self.region[w as usize] == id && self.level[w as usize] == upper);
                    if touches_upper {
                        sep.push(v);
                    } else {
                        a_nodes.push(v);
                    }
                }
            }
        }
        for &v in &a_nodes {
            self.region[v] = part_a;
        }
        for &v in &b_nodes {
            self.region[v] = part_b;
        }
        for &v in &sep {
            self.region[v] = SEPARATOR;
        }
        self.dissect(a_nodes, part_a);
        self.dissect(b_nodes, part_b);
        self.order.extend(sep);
    }
}

/// Elimination order `perm[new] = old` by nested dissection.
pub fn nested_dissection(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut d = Dissector { g, region: vec![0; n], level: vec![0; n], next_region: 0, order: Vec::with_capacity(n) };
    d.dissect((0..n).collect(), 0);
    debug_assert_eq!(d.order.len(), n);
    d.order
}

/// Elimination order `perm[new] = old` by nested dissection with planar
/// cuts: each region is halved at the median coordinate along its longest
/// extent, and the smaller side of the cut's graph boundary becomes the
/// separator. Suited to graphs with an embedding, such as mesh unknowns.
pub fn coordinate_dissection(g: &Graph, coords: &[[f64; 3]]) -> Vec<usize> {
    assert_eq!(coords.len(), g.n());
    let n = g.n();
    let mut region = vec![0u32; n];
    let mut next = 0u32;
    let mut order = Vec::with_capacity(n);
    // explicit stack; a separator is emitted after both of its halves
    enum Task {
        Split(Vec<usize>),
        Emit(Vec<usize>),
    }
    let mut stack = vec![Task::Split((0..n).collect())];
    while let Some(task) = stack.pop() {
        let mut nodes = match task {
            Task::Emit(sep) => {
                order.extend(sep);
                continue;
            }
            Task::Split(nodes) => nodes,
        };
        if nodes.is_empty() {
            continue;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &v in &nodes {
            for d in 0..3 {
                lo[d] = lo[d].min(coords[v][d]);
                hi[d] = hi[d].max(coords[v][d]);
            }
        }
        let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
        let key = |v: usize| (coords[v][axis], coords[v][(axis + 1) % 3], coords[v][(axis + 2) % 3]);
        nodes.sort_unstable_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap().then(a.cmp(&b)));
        if nodes.len() <= LEAF_SIZE {
            order.extend(nodes);
            continue;
        }
        let half = nodes.len() / 2;
        let (left, right) = nodes.split_at(half);
        let (id_l, id_r) = (next + 1, next + 2);
        next += 2;
        for &v in left {
            region[v] = id_l;
        }
        for &v in right {
            region[v] = id_r;
        }
        let touching = |side: &[usize], other: u32, region: &[u32]| -> Vec<usize> {
            side.iter().copied().filter(|&v| g.neighbors(v).iter().any(|&w| region[w as usize] == other)).collect()
        };
        let sep_l = touching(left, id_r, &region);
        let sep_r = touching(right, id_l, &region);
        let sep = if sep_l.len() <= sep_r.len() { sep_l } else { sep_r };
        for &v in &sep {
            region[v] = SEPARATOR;
        }
        let rest_l: Vec<usize> = left.iter().copied().filter(|&v| region[v] == id_l).collect();
        let rest_r: Vec<usize> = right.iter().copied().filter(|&v| region[v] == id_r).collect();
        stack.push(Task::Emit(sep));
        stack.push(Task::Split(rest_r));
        stack.push(Task::Split(rest_l));
    }
    debug_assert_eq!(order.len(), n);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_graph(n: usize) -> Graph {
        let id = |i: usize, j: usize| i + n * j;
        let mut rows = vec![Vec::new(); n * n];
        for j in 0..n {
            for i in 0..n {
                let v = id(i, j);
                rows[v].push(v as u32);
                if i + 1 < n {
                    rows[v].push(id(i + 1, j) as u32);
                }
                if j + 1 < n {
                    rows[v].push(id(i, j + 1) as u32);
                }
            }
        }
        let mut ptr = vec![0];
        let mut cols = Vec::new();
        for r in rows {
            cols.extend(r);
            ptr.push(cols.len());
        }
        Graph::from_pattern(n * n, &ptr, &cols)
    }

    #[test]
    fn graph_is_symmetric() {
        let g = grid_graph(4);
        for v in 0..g.n() {
            for &w in g.neighbors(v) {
                assert!(g.neighbors(w as usize).contains(&(v as u32)));
            }
        }
        assert_eq!(g.neighbors(0).len(), 2);
        assert_eq!(g.neighbors(5).len(), 4);
    }

    #[test]
    fn permutation_is_complete() {
        for n in [1, 3, 10, 25] {
            let g = grid_graph(n);
            let mut p = nested_dissection(&g);
            p.sort_unstable();
            assert_eq!(p, (0..n * n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn disconnected_graph_is_ordered() {
        // two isolated vertices and an edge
        let g = Graph::from_pattern(4, &[0, 1, 2, 4, 5], &[0, 1, 2, 3, 3]);
        let mut p = nested_dissection(&g);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3]);
    }

    #[test]
    fn coordinate_dissection_is_complete() {
        for n in [1, 7, 20] {
            let g = grid_graph(n);
            let coords: Vec<[f64; 3]> = (0..n * n).map(|v| [(v % n) as f64, (v / n) as f64, 0.0]).collect();
            let mut p = coordinate_dissection(&g, &coords);
            p.sort_unstable();
            assert_eq!(p, (0..n * n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn planar_separator_splits_grid() {
        // on a 20x20 grid the first separator is one grid line, numbered last
        let n = 20;
        let g = grid_graph(n);
        let coords: Vec<[f64; 3]> = (0..n * n).map(|v| [(v % n) as f64, (v / n) as f64, 0.0]).collect();
        let p = coordinate_dissection(&g, &coords);
        let last: Vec<usize> = p[p.len() - n..].to_vec();
        let on_line = |d: usize| last.iter().all(|&v| coords[v][d] == coords[last[0]][d]);
        assert!(on_line(0) || on_line(1));
    }
}
