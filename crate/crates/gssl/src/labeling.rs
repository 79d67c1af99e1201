//! Label prediction on a weighted graph: harmonic, min-cut and local-global
//! labelers, rounding, and the 0-1 loss.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instances::{Label, SslInstance};
use crate::kernels::{build_graph, KernelSpec, WeightedGraph};
use crate::maxflow::FlowNetwork;

/// Absolute tolerance on normalized capacities for min-cut saturation tests.
pub const FLOW_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    Solved,
    /// Unlabeled node in a component without labeled nodes.
    Isolated,
}

/// Score in [0, 1] per unlabeled node.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabeling {
    pub f: BTreeMap<usize, f64>,
    pub coverage: BTreeMap<usize, Coverage>,
}

impl SoftLabeling {
    pub fn get(&self, u: usize) -> Option<f64> {
        self.f.get(&u).copied()
    }

    pub fn is_isolated(&self, u: usize) -> bool {
        self.coverage.get(&u) == Some(&Coverage::Isolated)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HardLabeling {
    pub labels: BTreeMap<usize, Label>,
}

impl HardLabeling {
    pub fn get(&self, u: usize) -> Option<Label> {
        self.labels.get(&u).copied()
    }
}

/// Net flow on one graph edge, positive from `u` to `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFlow {
    pub u: usize,
    pub v: usize,
    pub capacity: f64,
    pub flow: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutResult {
    /// Graph nodes on the source (label 0) side.
    pub partition: BTreeSet<usize>,
    pub cut_value: f64,
    pub flow: Vec<EdgeFlow>,
}

/// Label 1 iff `f >= 1/2`.
pub fn round_labels(soft: &SoftLabeling) -> HardLabeling {
    HardLabeling {
        labels: soft.f.iter().map(|(&u, &f)| (u, (f >= 0.5) as Label)).collect(),
    }
}

/// Components of the graph induced by positive entries of `p` in either direction.
fn components(p: &DMatrix<f64>) -> Vec<usize> {
    let n = p.nrows();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if comp[v] == usize::MAX && (p[(u, v)] > 0.0 || p[(v, u)] > 0.0) {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Unlabeled nodes whose component holds a labeled node, and those that do not.
pub(crate) fn split_covered(graph: &WeightedGraph, adjacency: &DMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    let comp = components(adjacency);
    let anchored: BTreeSet<usize> = graph.labeled().keys().map(|&l| comp[l]).collect();
    graph.unlabeled().iter().partition(|&&u| anchored.contains(&comp[u]))
}

/// Harmonic solution `(I - P_UU) f_U = P_UL f_L` with `P = D^-1 W`.
pub fn harmonic_solve(graph: &WeightedGraph) -> Result<SoftLabeling> {
    if graph.labeled().is_empty() {
        return Err(Error::Precondition("harmonic labeling needs a labeled node".into()));
    }
    let p = graph.transition();
    harmonic_from_transition(graph, &p)
}

/// Harmonic solve from a precomputed transition matrix.
pub(crate) fn harmonic_from_transition(graph: &WeightedGraph, p: &DMatrix<f64>) -> Result<SoftLabeling> {
    let (solved, isolated) = split_covered(graph, p);
    let mut soft = SoftLabeling {
        f: BTreeMap::new(),
        coverage: BTreeMap::new(),
    };
    for &u in &isolated {
        soft.f.insert(u, 0.5);
        soft.coverage.insert(u, Coverage::Isolated);
    }
    if solved.is_empty() {
        return Ok(soft);
    }
    let b = harmonic_rhs(graph, p, &solved);
    let elim = Absorbing::new(p, &solved);
    let x = elim.solve(&b, 0.5);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { component: solved });
    }
    for (k, &u) in solved.iter().enumerate() {
        soft.f.insert(u, x[k].clamp(0.0, 1.0));
        let c = if elim.closed[k] { Coverage::Isolated } else { Coverage::Solved };
        soft.coverage.insert(u, c);
    }
    Ok(soft)
}

/// Elimination of `(I - P_SS) x = b` for a substochastic block, with each
/// pivot formed as the sum of the remaining outgoing mass instead of
/// `1 - P_kk`. Stays accurate when a group of nodes leaks almost no mass
/// out of itself, where plain LU loses the leak to cancellation.
pub(crate) struct Absorbing {
    /// `r[k][j]` for `j > k` after eliminating `0..k`.
    upper: Vec<Vec<f64>>,
    /// Multipliers `r[i][k] / s_k` for `i > k`.
    lower: Vec<Vec<f64>>,
    pivot: Vec<f64>,
    /// Nodes whose walk cannot leave their group in floating point.
    pub(crate) closed: Vec<bool>,
}

impl Absorbing {
    pub(crate) fn new(p: &DMatrix<f64>, s: &[usize]) -> Self {
        let m = s.len();
        let mut r = DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { p[(s[i], s[j])] });
        let inside: BTreeSet<usize> = s.iter().copied().collect();
        let mut exit: Vec<f64> = s
            .iter()
            .map(|&u| (0..p.ncols()).filter(|v| !inside.contains(v)).map(|v| p[(u, v)]).sum())
            .collect();
        let mut upper = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(m);
        let mut pivot = Vec::with_capacity(m);
        let mut closed = vec![false; m];
        for k in 0..m {
            let sk: f64 = ((k + 1)..m).map(|j| r[(k, j)]).sum::<f64>() + exit[k];
            let mut mult = vec![0.0; m];
            if sk > 0.0 {
                for i in (k + 1)..m {
                    let f = r[(i, k)] / sk;
                    if f == 0.0 {
                        continue;
                    }
                    mult[i] = f;
                    for j in (k + 1)..m {
                        if j != i {
                            r[(i, j)] += f * r[(k, j)];
                        }
                    }
                    exit[i] += f * exit[k];
                }
            } else {
                closed[k] = true;
            }
            upper.push(((k + 1)..m).map(|j| r[(k, j)]).collect());
            lower.push(mult);
            pivot.push(sk);
        }
        Self {
            upper,
            lower,
            pivot,
            closed,
        }
    }

    /// Solution for right side `b`; closed nodes take `fill`.
    pub(crate) fn solve(&self, b: &[f64], fill: f64) -> Vec<f64> {
        let m = b.len();
        let mut y = b.to_vec();
        for k in 0..m {
            for i in (k + 1)..m {
                y[i] += self.lower[k][i] * y[k];
            }
        }
        let mut x = vec![0.0; m];
        for k in (0..m).rev() {
            if self.closed[k] {
                x[k] = fill;
                continue;
            }
            let acc: f64 = self.upper[k].iter().enumerate().map(|(o, r)| r * x[k + 1 + o]).sum();
            x[k] = (acc + y[k]) / self.pivot[k];
        }
        x
    }
}

/// Right side `P_SL f_L` of the harmonic system over the node list `s`.
pub(crate) fn harmonic_rhs(graph: &WeightedGraph, p: &DMatrix<f64>, s: &[usize]) -> Vec<f64> {
    s.iter()
        .map(|&u| graph.labeled().iter().map(|(&l, &y)| p[(u, l)] * y as f64).sum())
        .collect()
}

fn require_both_classes(graph: &WeightedGraph) -> Result<()> {
    let classes: BTreeSet<Label> = graph.labeled().values().copied().collect();
    if classes.len() < 2 {
        return Err(Error::Precondition("min-cut labeling needs labeled nodes of both classes".into()));
    }
    Ok(())
}

/// Augmented flow network over normalized weights. Node `n` is the source
/// (attached to label-0 nodes), node `n + 1` the sink (attached from
/// label-1 nodes). Returns the network, the arc of each graph edge in
/// `(u, v, arc)` form and the log of the weight scale.
pub(crate) fn cut_network(graph: &WeightedGraph) -> (FlowNetwork, Vec<(usize, usize, usize)>, f64) {
    let n = graph.n();
    let (w, log_scale) = graph.normalized_weights();
    // exceeds any cut, since every cut is a subset of the edges
    let inf = 1.0 + w.sum();
    let mut net = FlowNetwork::new(n + 2, FLOW_TOL);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if w[(u, v)] > 0.0 {
                edges.push((u, v, net.add_edge(u, v, w[(u, v)])));
            }
        }
    }
    for (&l, &y) in graph.labeled() {
        if y == 0 {
            net.add_arc(n, l, inf);
        } else {
            net.add_arc(l, n + 1, inf);
        }
    }
    (net, edges, log_scale)
}

/// Canonical minimum cut: the source side is the residual-reachable set.
pub fn mincut_label(graph: &WeightedGraph) -> Result<(HardLabeling, CutResult)> {
    require_both_classes(graph)?;
    let n = graph.n();
    let (mut net, edges, log_scale) = cut_network(graph);
    let value = net.max_flow(n, n + 1);
    let side = net.reachable(n);
    let scale = log_scale.exp();
    let partition: BTreeSet<usize> = (0..n).filter(|&u| side[u]).collect();
    let labels = graph
        .unlabeled()
        .iter()
        .map(|&u| (u, if side[u] { 0 } else { 1 }))
        .collect();
    let flow = edges
        .iter()
        .map(|&(u, v, a)| EdgeFlow {
            u,
            v,
            capacity: net.capacity(a) * scale,
            flow: net.flow(a) * scale,
        })
        .collect();
    Ok((
        HardLabeling { labels },
        CutResult {
            partition,
            cut_value: value * scale,
            flow,
        },
    ))
}

/// Closed form `(I - alpha S)^-1 Y` with `S = D^-1/2 W D^-1/2` and `Y` coded
/// +1/-1 on labeled nodes, rescaled by `(f + 1) / 2`.
pub fn local_global_label(graph: &WeightedGraph, alpha: f64) -> Result<SoftLabeling> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Param(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let n = graph.n();
    let (w, _) = graph.normalized_weights();
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let s = if deg[i] > 0.0 && deg[j] > 0.0 {
            w[(i, j)] / (deg[i] * deg[j]).sqrt()
        } else {
            0.0
        };
        (i == j) as u8 as f64 - alpha * s
    });
    let y = DVector::from_fn(n, |i, _| match graph.labeled().get(&i) {
        Some(1) => 1.0,
        Some(_) => -1.0,
        None => 0.0,
    });
    let all: Vec<usize> = (0..n).collect();
    let x = a.lu().solve(&y).ok_or(Error::Singular { component: all })?;
    let (_, isolated) = split_covered(graph, &w);
    let isolated: BTreeSet<usize> = isolated.into_iter().collect();
    let mut soft = SoftLabeling {
        f: BTreeMap::new(),
        coverage: BTreeMap::new(),
    };
    for &u in graph.unlabeled() {
        if isolated.contains(&u) {
            soft.f.insert(u, 0.5);
            soft.coverage.insert(u, Coverage::Isolated);
        } else {
            soft.f.insert(u, ((x[u] + 1.0) / 2.0).clamp(0.0, 1.0));
            soft.coverage.insert(u, Coverage::Solved);
        }
    }
    Ok(soft)
}

/// Fraction of unlabeled nodes whose prediction differs from the hidden label.
pub fn zero_one_loss(pred: &HardLabeling, instance: &SslInstance) -> Result<f64> {
    let unlabeled = instance.unlabeled();
    if unlabeled.is_empty() {
        return Ok(0.0);
    }
    let mut wrong = 0usize;
    for &u in unlabeled {
        let p = pred
            .get(u)
            .ok_or_else(|| Error::Precondition(format!("no prediction for node {u}")))?;
        let t = instance
            .reveal(u)
            .ok_or_else(|| Error::Precondition(format!("no hidden label for node {u}")))?;
        wrong += (p != t) as usize;
    }
    Ok(wrong as f64 / unlabeled.len() as f64)
}

/// Default local-global propagation strength.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Labeling algorithm applied to a graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    Harmonic,
    MinCut,
    LocalGlobal { alpha: f64 },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Harmonic => "harmonic",
            Objective::MinCut => "mincut",
            Objective::LocalGlobal { .. } => "local-global",
        }
    }

    pub fn predict(&self, graph: &WeightedGraph) -> Result<HardLabeling> {
        match *self {
            Objective::Harmonic => Ok(round_labels(&harmonic_solve(graph)?)),
            Objective::MinCut => Ok(mincut_label(graph)?.0),
            Objective::LocalGlobal { alpha } => Ok(round_labels(&local_global_label(graph, alpha)?)),
        }
    }

    /// Predicted labeling of `G(spec)`.
    pub fn labeling(&self, instance: &SslInstance, spec: &KernelSpec) -> Result<HardLabeling> {
        self.predict(&build_graph(instance, spec)?)
    }

    /// 0-1 loss of the prediction on `G(spec)`.
    pub fn loss(&self, instance: &SslInstance, spec: &KernelSpec) -> Result<f64> {
        zero_one_loss(&self.labeling(instance, spec)?, instance)
    }
}
