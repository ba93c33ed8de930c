//! Chain recurrence and spectral decomposition of finite systems, exact.
//!
//! A [`ChainGraph`] materializes every relation at once: the complete weighted
//! digraph `w(x -> y) = d(f(x), y)` answers reachability questions for every
//! threshold δ, and its finite set of distinct weights (the threshold
//! spectrum) is where anything can change. Chain components are the strongly
//! connected classes of the δ-view restricted to the δ-recurrent vertices;
//! within a chain-transitive component the cyclic decomposition is the graph
//! period (gcd of cycle lengths, computed from BFS level differences).

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::MetricDescriptor;
use crate::point::Point;
use crate::rational::ExactReal;
use crate::systems::SystemDescriptor;

/// The complete weighted digraph of a finite system.
#[derive(Clone, Debug)]
pub struct ChainGraph {
    size: usize,
    successors: Vec<usize>,
    weights: Vec<Vec<ExactReal>>,
}

/// `build_chain_graph`: weights `w(x -> y) = d(f(x), y)` for all ordered pairs.
pub fn build_chain_graph(system: &SystemDescriptor) -> Result<ChainGraph> {
    let n = system.finite_size()?;
    let successors = system.finite_successors()?.to_vec();
    let mut weights = vec![vec![ExactReal::zero(); n]; n];
    for x in 0..n {
        let fx = Point::Finite(successors[x]);
        for (y, w) in weights[x].iter_mut().enumerate() {
            *w = system.distance(&fx, &Point::Finite(y))?;
        }
    }
    Ok(ChainGraph { size: n, successors, weights })
}

impl ChainGraph {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn successor(&self, v: usize) -> usize {
        self.successors[v]
    }

    pub fn weight(&self, x: usize, y: usize) -> &ExactReal {
        &self.weights[x][y]
    }

    /// Distinct edge weights, sorted ascending (the threshold spectrum).
    pub fn spectrum(&self) -> Vec<ExactReal> {
        let mut values: Vec<ExactReal> = self.weights.iter().flatten().cloned().collect();
        values.sort();
        values.dedup();
        values
    }

    /// Positive thresholds plus midpoints between consecutive ones: the δ grid
    /// on which every all-δ statement is checked.
    pub fn threshold_grid(&self) -> Vec<ExactReal> {
        let spectrum: Vec<ExactReal> =
            self.spectrum().into_iter().filter(|v| !v.is_zero()).collect();
        let mut grid = Vec::new();
        for (i, v) in spectrum.iter().enumerate() {
            if i > 0 {
                if let Some(sum) = spectrum[i - 1].checked_add(v) {
                    grid.push(&sum / &ExactReal::from_int(2));
                }
            }
            grid.push(v.clone());
        }
        grid
    }

    /// Adjacency lists of the δ-view (edges of weight at most δ).
    pub fn delta_view(&self, delta: &ExactReal) -> Vec<Vec<usize>> {
        (0..self.size)
            .map(|x| {
                (0..self.size)
                    .filter(|&y| self.weights[x][y] <= *delta)
                    .collect()
            })
            .collect()
    }

    fn has_self_loop(&self, v: usize, delta: &ExactReal) -> bool {
        self.weights[v][v] <= *delta
    }

    /// Strongly connected components of the δ-view (Kosaraju); returns the
    /// component id of every vertex.
    fn scc_ids(&self, adj: &[Vec<usize>]) -> Vec<usize> {
        let n = self.size;
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            // iterative post-order DFS
            let mut stack = vec![(start, 0usize)];
            seen[start] = true;
            while let Some(&mut (v, ref mut i)) = stack.last_mut() {
                if *i < adj[v].len() {
                    let to = adj[v][*i];
                    *i += 1;
                    if !seen[to] {
                        seen[to] = true;
                        stack.push((to, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        let mut radj = vec![Vec::new(); n];
        for (v, outs) in adj.iter().enumerate() {
            for &to in outs {
                radj[to].push(v);
            }
        }
        let mut ids = vec![usize::MAX; n];
        let mut next_id = 0;
        for &v in order.iter().rev() {
            if ids[v] != usize::MAX {
                continue;
            }
            let mut stack = vec![v];
            ids[v] = next_id;
            while let Some(u) = stack.pop() {
                for &w in &radj[u] {
                    if ids[w] == usize::MAX {
                        ids[w] = next_id;
                        stack.push(w);
                    }
                }
            }
            next_id += 1;
        }
        ids
    }

    /// `CR_δ`: vertices lying on a δ-cycle of length at least 1.
    pub fn chain_recurrent_delta(&self, delta: &ExactReal) -> Vec<usize> {
        let adj = self.delta_view(delta);
        let ids = self.scc_ids(&adj);
        let mut count = vec![0usize; self.size];
        for &id in &ids {
            count[id] += 1;
        }
        (0..self.size)
            .filter(|&v| count[ids[v]] > 1 || self.has_self_loop(v, delta))
            .collect()
    }

    /// `CR(f)` on a finite system: the intersection over all δ collapses to
    /// the zero-weight view, whose cycles are the genuinely periodic points.
    pub fn chain_recurrent_exact(&self) -> Vec<usize> {
        self.chain_recurrent_delta(&ExactReal::zero())
    }

    /// Chain components at δ: classes of mutual δ-reachability restricted to
    /// `CR_δ`, each sorted, ordered by least vertex.
    pub fn chain_components(&self, delta: &ExactReal) -> Vec<Vec<usize>> {
        let adj = self.delta_view(delta);
        let ids = self.scc_ids(&adj);
        let cr = self.chain_recurrent_delta(delta);
        let mut by_id: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for &v in &cr {
            by_id.entry(ids[v]).or_default().push(v);
        }
        let mut components: Vec<Vec<usize>> = by_id.into_values().collect();
        for c in &mut components {
            c.sort_unstable();
        }
        components.sort_by_key(|c| c[0]);
        components
    }

    /// Graph period of a strongly connected component in the δ-view and its
    /// cyclic classes `D_0, ..., D_{m-1}` with `D_0` containing the least
    /// vertex; every δ-edge inside the component advances the class by one.
    pub fn cyclic_decomposition(
        &self,
        component: &[usize],
        delta: &ExactReal,
    ) -> Result<(usize, Vec<Vec<usize>>)> {
        if component.is_empty() {
            return Err(Error::InvalidParameter("empty component".into()));
        }
        let adj = self.delta_view(delta);
        let inside = |v: usize| component.contains(&v);
        // BFS levels from the least vertex, restricted to the component.
        let root = component[0];
        let mut level = vec![i64::MIN; self.size];
        level[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &to in &adj[v] {
                if inside(to) && level[to] == i64::MIN {
                    level[to] = level[v] + 1;
                    queue.push_back(to);
                }
            }
        }
        if component.iter().any(|&v| level[v] == i64::MIN) {
            return Err(Error::InvalidParameter(
                "component is not strongly connected in the δ-view".into(),
            ));
        }
        let mut g: i64 = 0;
        for &v in component {
            for &to in &adj[v] {
                if inside(to) {
                    g = num_integer::Integer::gcd(&g, &(level[v] + 1 - level[to]));
                }
            }
        }
        let m = g.unsigned_abs().max(1) as usize;
        let base = level[root];
        let mut classes = vec![Vec::new(); m];
        for &v in component {
            let idx = (level[v] - base).rem_euclid(m as i64) as usize;
            classes[idx].push(v);
        }
        for c in &mut classes {
            c.sort_unstable();
        }
        Ok((m, classes))
    }

    /// Chain transitivity at δ: every ordered pair of vertices is joined by a
    /// δ-chain of length at least 1.
    pub fn is_chain_transitive(&self, delta: &ExactReal) -> bool {
        let adj = self.delta_view(delta);
        let ids = self.scc_ids(&adj);
        if ids.iter().any(|&id| id != ids[0]) {
            return false;
        }
        if self.size == 1 {
            return self.has_self_loop(0, delta);
        }
        true
    }

    /// Chain mixing at δ: transitive with graph period 1.
    pub fn is_chain_mixing(&self, delta: &ExactReal) -> Result<bool> {
        if !self.is_chain_transitive(delta) {
            return Ok(false);
        }
        let all: Vec<usize> = (0..self.size).collect();
        let (m, _) = self.cyclic_decomposition(&all, delta)?;
        Ok(m == 1)
    }

    /// Chain-proximal pairs at δ: pairs from which synchronized δ-chains can
    /// meet (the product δ-view reaches the diagonal in >= 1 steps).
    pub fn chain_proximal(&self, delta: &ExactReal) -> Vec<(usize, usize)> {
        let n = self.size;
        let adj = self.delta_view(delta);
        let mut radj_pairs: Vec<Vec<usize>> = vec![Vec::new(); n * n];
        for (u, outs_u) in adj.iter().enumerate() {
            for (v, outs_v) in adj.iter().enumerate() {
                for &u2 in outs_u {
                    for &v2 in outs_v {
                        radj_pairs[u2 * n + v2].push(u * n + v);
                    }
                }
            }
        }
        // backward closure of the diagonal
        let mut proximal = vec![false; n * n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for d in 0..n {
            for &from in &radj_pairs[d * n + d] {
                if !proximal[from] {
                    proximal[from] = true;
                    queue.push_back(from);
                }
            }
        }
        while let Some(p) = queue.pop_front() {
            for &from in &radj_pairs[p] {
                if !proximal[from] {
                    proximal[from] = true;
                    queue.push_back(from);
                }
            }
        }
        (0..n * n).filter(|&p| proximal[p]).map(|p| (p / n, p % n)).collect()
    }

    /// `x ~_δ y` on a chain-transitive δ-view: joined by a chain whose length
    /// is a multiple of the period; equivalently, same cyclic class.
    pub fn sim_delta(&self, delta: &ExactReal) -> Result<Vec<(usize, usize)>> {
        if !self.is_chain_transitive(delta) {
            return Err(Error::InvalidParameter(
                "~_δ is defined for chain-transitive views".into(),
            ));
        }
        let all: Vec<usize> = (0..self.size).collect();
        let (_, classes) = self.cyclic_decomposition(&all, delta)?;
        let mut pairs = Vec::new();
        for class in &classes {
            for &x in class {
                for &y in class {
                    pairs.push((x, y));
                }
            }
        }
        pairs.sort_unstable();
        Ok(pairs)
    }
}

/// A full decomposition report at one threshold.
#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub delta: ExactReal,
    #[serde(rename = "CR")]
    pub cr: Vec<usize>,
    pub components: Vec<ComponentReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    pub vertices: Vec<usize>,
    pub period: usize,
    pub classes: Vec<Vec<usize>>,
    /// Whether the map sends the component into itself (automatic in the
    /// paper's chain-transitive setting, but not for every δ-view).
    pub f_invariant: bool,
}

pub fn decompose_at(graph: &ChainGraph, delta: &ExactReal) -> Result<Decomposition> {
    let cr = graph.chain_recurrent_delta(delta);
    let mut components = Vec::new();
    for comp in graph.chain_components(delta) {
        let (period, classes) = graph.cyclic_decomposition(&comp, delta)?;
        let f_invariant = comp.iter().all(|&v| comp.contains(&graph.successor(v)));
        components.push(ComponentReport { vertices: comp, period, classes, f_invariant });
    }
    Ok(Decomposition { delta: delta.clone(), cr, components })
}

/// DOT rendering of the δ-view for external visualization.
pub fn delta_view_dot(graph: &ChainGraph, delta: &ExactReal, labels: &[String]) -> String {
    let mut out = String::from("digraph delta_view {\n");
    for v in 0..graph.size() {
        let label = labels.get(v).cloned().unwrap_or_else(|| v.to_string());
        out.push_str(&format!("  n{v} [label=\"{label}\"];\n"));
    }
    for x in 0..graph.size() {
        for y in 0..graph.size() {
            if graph.weight(x, y) <= delta {
                out.push_str(&format!(
                    "  n{x} -> n{y} [label=\"{}\"];\n",
                    graph.weight(x, y)
                ));
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Adapted metric for a finite bijection with an ultrametric:
/// `d(x, y) = max over the pair orbit of D(f^i(x), f^i(y))`, under which `f`
/// is an isometry and `B_δ(f(x)) = f(B_δ(x))`.
pub fn adapted_isometry_metric(system: &SystemDescriptor) -> Result<MetricDescriptor> {
    let n = system.finite_size()?;
    let succ = system.finite_successors()?;
    let mut seen = vec![false; n];
    for &s in succ {
        if seen[s] {
            return Err(Error::InvalidParameter("map is not a bijection".into()));
        }
        seen[s] = true;
    }
    if !system.metric.ultrametric() {
        return Err(Error::InvalidParameter("base metric must be an ultrametric".into()));
    }
    let mut table = vec![vec![ExactReal::zero(); n]; n];
    for x in 0..n {
        for y in 0..n {
            // The pair orbit under a permutation is a cycle, so the supremum
            // over all of Z is the maximum over one loop.
            let (mut u, mut v) = (x, y);
            let mut best = ExactReal::zero();
            loop {
                best = best.max(system.distance(&Point::Finite(u), &Point::Finite(v))?);
                u = succ[u];
                v = succ[v];
                if (u, v) == (x, y) {
                    break;
                }
            }
            table[x][y] = best;
        }
    }
    let metric = MetricDescriptor::finite_table(table)?;
    debug_assert!(metric.ultrametric());
    Ok(metric)
}
