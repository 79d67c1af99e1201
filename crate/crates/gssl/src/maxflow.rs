//! Dinic max-flow on real capacities with an absolute tolerance.
//!
//! Arcs are stored in pairs: arc `2k` runs `u -> v`, arc `2k + 1` runs
//! `v -> u`, and `flow[2k] = -flow[2k + 1]`. An undirected edge of capacity
//! `c` gives both arcs capacity `c`, so its net flow lies in `[-c, c]`.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    n: usize,
    head: Vec<usize>,
    cap: Vec<f64>,
    flow: Vec<f64>,
    adj: Vec<Vec<usize>>,
    tol: f64,
}

/// One path of a flow decomposition: arc indices from source to sink.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFlow {
    pub arcs: Vec<usize>,
    pub value: f64,
}

impl FlowNetwork {
    pub fn new(n: usize, tol: f64) -> Self {
        Self {
            n,
            head: Vec::new(),
            cap: Vec::new(),
            flow: Vec::new(),
            adj: vec![Vec::new(); n],
            tol,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn arc_count(&self) -> usize {
        self.head.len()
    }

    fn push_pair(&mut self, u: usize, v: usize, fwd: f64, bwd: f64) -> usize {
        let a = self.head.len();
        self.head.push(v);
        self.cap.push(fwd);
        self.flow.push(0.0);
        self.adj[u].push(a);
        self.head.push(u);
        self.cap.push(bwd);
        self.flow.push(0.0);
        self.adj[v].push(a + 1);
        a
    }

    /// Directed arc `u -> v`; returns its index.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: f64) -> usize {
        self.push_pair(u, v, cap, 0.0)
    }

    /// Undirected edge; returns the `u -> v` arc index.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64) -> usize {
        self.push_pair(u, v, cap, cap)
    }

    pub fn tail(&self, a: usize) -> usize {
        self.head[a ^ 1]
    }

    pub fn head(&self, a: usize) -> usize {
        self.head[a]
    }

    pub fn capacity(&self, a: usize) -> f64 {
        self.cap[a]
    }

    pub fn flow(&self, a: usize) -> f64 {
        self.flow[a]
    }

    pub fn residual(&self, a: usize) -> f64 {
        self.cap[a] - self.flow[a]
    }

    /// Replaces both capacities of the pair starting at even arc `a`.
    pub fn set_capacity(&mut self, a: usize, fwd: f64, bwd: f64) {
        debug_assert!(a % 2 == 0);
        self.cap[a] = fwd;
        self.cap[a + 1] = bwd;
    }

    /// Sets the net flow on the pair starting at even arc `a`.
    pub fn set_flow(&mut self, a: usize, f: f64) {
        debug_assert!(a % 2 == 0);
        self.flow[a] = f;
        self.flow[a + 1] = -f;
    }

    pub fn reset_flow(&mut self) {
        self.flow.iter_mut().for_each(|f| *f = 0.0);
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.n];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.head[a];
                if level[v] == usize::MAX && self.residual(a) > self.tol {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, limit: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let a = self.adj[u][next[u]];
            let v = self.head[a];
            let r = self.residual(a);
            if r > self.tol && level[v] == level[u] + 1 {
                let pushed = self.augment(v, t, limit.min(r), level, next);
                if pushed > 0.0 {
                    self.flow[a] += pushed;
                    self.flow[a ^ 1] -= pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Augments from the current flow to a maximum flow and returns the
    /// total flow value out of `s`.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        loop {
            let level = self.levels(s);
            if level[t] == usize::MAX {
                break;
            }
            let mut next = vec![0usize; self.n];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut next);
                if pushed <= 0.0 {
                    break;
                }
            }
        }
        self.value(s)
    }

    /// Net flow out of `s`.
    pub fn value(&self, s: usize) -> f64 {
        self.adj[s].iter().map(|&a| self.flow[a]).sum()
    }

    /// Nodes reachable from `s` through arcs with residual above tolerance.
    pub fn reachable(&self, s: usize) -> Vec<bool> {
        self.levels(s).into_iter().map(|l| l != usize::MAX).collect()
    }

    /// Largest violation of capacity or conservation (excluding `s`, `t`).
    pub fn feasibility_error(&self, s: usize, t: usize) -> f64 {
        let cap_err = (0..self.arc_count())
            .map(|a| self.flow[a] - self.cap[a])
            .fold(0.0, f64::max);
        let cons_err = (0..self.n)
            .filter(|&u| u != s && u != t)
            .map(|u| self.adj[u].iter().map(|&a| self.flow[a]).sum::<f64>().abs())
            .fold(0.0, f64::max);
        cap_err.max(cons_err)
    }

    /// Decomposes the current flow into source-to-sink paths, discarding
    /// circulations. Paths are found in a deterministic order.
    pub fn decompose(&self, s: usize, t: usize) -> Vec<PathFlow> {
        let mut rem: Vec<f64> = self.flow.iter().map(|&f| f.max(0.0)).collect();
        let mut paths = Vec::new();
        loop {
            // walk greedily along positive remaining flow, cancelling cycles
            let mut stack: Vec<usize> = Vec::new();
            let mut on_path = vec![usize::MAX; self.n];
            let mut u = s;
            on_path[s] = 0;
            let reached = loop {
                if u == t {
                    break true;
                }
                let Some(&a) = self.adj[u].iter().find(|&&a| rem[a] > self.tol) else {
                    break false;
                };
                let v = self.head[a];
                if on_path[v] != usize::MAX {
                    // cycle: cancel it and resume from v
                    let start = on_path[v];
                    let mut cycle: Vec<usize> = stack[start..].to_vec();
                    cycle.push(a);
                    let m = cycle.iter().map(|&c| rem[c]).fold(f64::INFINITY, f64::min);
                    for &c in &cycle {
                        rem[c] -= m;
                    }
                    for &c in &stack[start..] {
                        on_path[self.head[c]] = usize::MAX;
                    }
                    on_path[v] = start;
                    stack.truncate(start);
                    u = v;
                    continue;
                }
                stack.push(a);
                on_path[v] = stack.len();
                u = v;
            };
            if !reached || stack.is_empty() {
                break;
            }
            let m = stack.iter().map(|&a| rem[a]).fold(f64::INFINITY, f64::min);
            for &a in &stack {
                rem[a] -= m;
            }
            paths.push(PathFlow { arcs: stack, value: m });
        }
        paths
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_example() {
        // CLRS-style network with max flow 23
        let mut g = FlowNetwork::new(6, 1e-9);
        let arcs = [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (1, 2, 10.0),
            (2, 1, 4.0),
            (1, 3, 12.0),
            (3, 2, 9.0),
            (2, 4, 14.0),
            (4, 3, 7.0),
            (3, 5, 20.0),
            (4, 5, 4.0),
        ];
        for (u, v, c) in arcs {
            g.add_arc(u, v, c);
        }
        assert!((g.max_flow(0, 5) - 23.0).abs() < 1e-12);
        assert!(g.feasibility_error(0, 5) < 1e-12);
        let paths = g.decompose(0, 5);
        let total: f64 = paths.iter().map(|p| p.value).sum();
        assert!((total - 23.0).abs() < 1e-9);
        for p in &paths {
            assert_eq!(g.tail(p.arcs[0]), 0);
            assert_eq!(g.head(*p.arcs.last().unwrap()), 5);
            for w in p.arcs.windows(2) {
                assert_eq!(g.head(w[0]), g.tail(w[1]));
            }
        }
        let side = g.reachable(0);
        assert!(side[0] && !side[5]);
    }

    #[test]
    fn undirected_edges_carry_either_direction() {
        let mut g = FlowNetwork::new(4, 1e-9);
        g.add_arc(0, 2, 5.0);
        let e = g.add_edge(1, 2, 3.0);
        g.add_arc(1, 3, 5.0);
        assert!((g.max_flow(0, 3) - 3.0).abs() < 1e-12);
        assert!((g.flow(e) + 3.0).abs() < 1e-12);
    }
}
