//! Piecewise-constant structure of the loss in the kernel parameter.
//!
//! Threshold graphs change only at pairwise distances, so their loss is an
//! exact [`PieceTable`]. For weighted families the module finds the maximal
//! interval around a query parameter on which the predicted labeling stays
//! fixed: an event-driven parametric max-flow sweep for min-cut, root finding
//! on `f_u - 1/2` for the harmonic labeler, and a brute-force grid oracle.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::instances::SslInstance;
use crate::kernels::{build_graph, scalar_domain, Domain, Family, WeightedGraph};
use crate::labeling::{
    harmonic_rhs, mincut_label, Absorbing, round_labels, split_covered, zero_one_loss, HardLabeling, Objective, FLOW_TOL,
};
use crate::maxflow::FlowNetwork;
use crate::roots::{nonneg, safeguarded_newton, scan_points};

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_SCAN_POINTS: usize = 64;
/// Default oracle grid step as a fraction of the domain width.
pub const DEFAULT_GRID_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackObjective {
    MinCut,
    Harmonic,
    Threshold,
}

impl FeedbackObjective {
    pub fn name(&self) -> &'static str {
        match self {
            FeedbackObjective::MinCut => "mincut",
            FeedbackObjective::Harmonic => "harmonic",
            FeedbackObjective::Threshold => "threshold",
        }
    }
}

/// Parameter interval on which the predicted labeling is constant.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackInterval {
    pub lo: f64,
    pub hi: f64,
    pub query: f64,
    pub tolerance: f64,
    pub objective: FeedbackObjective,
    pub lo_clamped: bool,
    pub hi_clamped: bool,
    /// The query lies on a boundary and the interval is the single point.
    pub boundary: bool,
    /// Newly saturated edges taken into the cut certificate (min-cut sweep).
    pub events: usize,
    /// Events that coincided within tolerance with another event.
    pub ties: usize,
    /// Largest capacity violation of the tracked flow at any event.
    pub max_violation: f64,
}

impl FeedbackInterval {
    fn new(query: f64, tolerance: f64, objective: FeedbackObjective) -> Self {
        Self {
            lo: query,
            hi: query,
            query,
            tolerance,
            objective,
            lo_clamped: false,
            hi_clamped: false,
            boundary: false,
            events: 0,
            ties: 0,
            max_violation: 0.0,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Exact loss of the threshold family: piece `0` is `r < b_0`, piece `i` is
/// `[b_{i-1}, b_i)` and the last piece is `r >= b_last`.
#[derive(Clone, Debug, PartialEq)]
pub struct PieceTable {
    pub breakpoints: Vec<f64>,
    pub piece_losses: Vec<f64>,
}

impl PieceTable {
    pub fn piece_count(&self) -> usize {
        self.piece_losses.len()
    }

    pub fn piece_of(&self, r: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= r)
    }

    pub fn loss_at(&self, r: f64) -> f64 {
        self.piece_losses[self.piece_of(r)]
    }

    /// Half-open bounds `[lo, hi)` of piece `i`, infinite at the ends.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
        let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Smallest loss and the leftmost piece attaining it.
    pub fn best_piece(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, &l) in self.piece_losses.iter().enumerate() {
            if l < best.1 {
                best = (i, l);
            }
        }
        best
    }
}

/// Unit-weight graph `1[d <= r]`, accepting any real `r`.
pub fn threshold_graph(instance: &SslInstance, r: f64) -> Result<WeightedGraph> {
    let d = instance.distances()?;
    let n = d.nrows();
    let w = DMatrix::from_fn(n, n, |i, j| if i != j && d[(i, j)] <= r { 1.0 } else { 0.0 });
    WeightedGraph::from_weights(w, instance.labeled().clone())
}

/// Loss of `labeler` on the threshold graph at `r`.
pub fn threshold_loss(instance: &SslInstance, labeler: Objective, r: f64) -> Result<f64> {
    zero_one_loss(&labeler.predict(&threshold_graph(instance, r)?)?, instance)
}

/// Sorted distinct off-diagonal distances.
pub fn distance_breakpoints(instance: &SslInstance) -> Result<Vec<f64>> {
    let d = instance.distances()?;
    let n = d.nrows();
    let mut b: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| d[(i, j)]))
        .collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    Ok(b)
}

pub fn threshold_pieces(instance: &SslInstance, labeler: Objective) -> Result<PieceTable> {
    let breakpoints = distance_breakpoints(instance)?;
    let k = breakpoints.len();
    let mut piece_losses = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let r = if i == 0 {
            // below every distance: the empty graph
            breakpoints.first().map_or(0.0, |b| b - 1.0)
        } else if i == k {
            breakpoints[k - 1]
        } else {
            0.5 * (breakpoints[i - 1] + breakpoints[i])
        };
        piece_losses.push(threshold_loss(instance, labeler, r)?);
    }
    Ok(PieceTable {
        breakpoints,
        piece_losses,
    })
}

/// The piece containing `r` as a feedback interval, clamped to the threshold domain.
pub fn threshold_feedback_interval(table: &PieceTable, domain: Domain, r: f64) -> FeedbackInterval {
    let (lo, hi) = table.bounds(table.piece_of(r));
    let mut out = FeedbackInterval::new(r, 0.0, FeedbackObjective::Threshold);
    out.lo = lo.max(domain.lo);
    out.lo_clamped = lo <= domain.lo;
    out.hi = hi.min(domain.hi);
    out.hi_clamped = hi >= domain.hi;
    out
}

/// Settings shared by the weighted-family interval searches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepConfig {
    /// Gaussian or polynomial.
    pub family: Family,
    /// Parameter range; the family default when `None`.
    pub domain: Option<Domain>,
    pub eps: f64,
    /// Coarse scan points per side before root refinement.
    pub scan_points: usize,
}

impl SweepConfig {
    pub fn gaussian(eps: f64) -> Self {
        Self {
            family: Family::Gaussian,
            domain: None,
            eps,
            scan_points: DEFAULT_SCAN_POINTS,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn domain(&self, instance: &SslInstance) -> Result<Domain> {
        match self.domain {
            Some(d) => Ok(d),
            None => scalar_domain(instance, self.family),
        }
    }

    fn check(&self, instance: &SslInstance, t0: f64) -> Result<Domain> {
        if !(self.eps > 0.0) {
            return Err(Error::Param(format!("eps = {} must be positive", self.eps)));
        }
        let domain = self.domain(instance)?;
        if !domain.contains(t0) {
            return Err(Error::Param(format!(
                "query {t0} outside the parameter domain [{}, {}]",
                domain.lo, domain.hi
            )));
        }
        Ok(domain)
    }
}

/// Log-weights of a scalar family and their parameter derivatives.
struct ScalarKernel {
    family: Family,
    base: DMatrix<f64>,
}

impl ScalarKernel {
    fn new(instance: &SslInstance, family: Family) -> Result<Self> {
        let base = match family {
            Family::Gaussian => instance.distances()?.clone(),
            Family::Polynomial { .. } => (*instance
                .metrics()
                .similarities()
                .first()
                .ok_or_else(|| Error::KindMismatch("polynomial kernel needs a similarity matrix".into()))?)
            .clone(),
            other => return Err(Error::Unsupported(format!("no parametric sweep for the {} family", other.name()))),
        };
        Ok(Self { family, base })
    }

    fn log_w(&self, i: usize, j: usize, t: f64) -> f64 {
        let x = self.base[(i, j)];
        match self.family {
            Family::Polynomial { degree } => degree as f64 * (x + t).ln(),
            _ => -x * x / (t * t),
        }
    }

    fn dlog_w(&self, i: usize, j: usize, t: f64) -> f64 {
        let x = self.base[(i, j)];
        match self.family {
            Family::Polynomial { degree } => degree as f64 / (x + t),
            _ => 2.0 * x * x / (t * t * t),
        }
    }

    fn graph(&self, instance: &SslInstance, t: f64) -> Result<WeightedGraph> {
        build_graph(instance, &self.family.at(t)?)
    }
}

/// `h_u = f_u - 1/2` and `dh_u/dt` per unlabeled node; `None` when isolated.
fn harmonic_state(
    kernel: &ScalarKernel,
    instance: &SslInstance,
    t: f64,
    derivative: bool,
) -> Result<Vec<Option<(f64, f64)>>> {
    let g = kernel.graph(instance, t)?;
    let p = g.transition();
    let (solved, _) = split_covered(&g, &p);
    let mut out: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    if !solved.is_empty() {
        let b = harmonic_rhs(&g, &p, &solved);
        let elim = Absorbing::new(&p, &solved);
        let x = elim.solve(&b, 0.5);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular { component: solved });
        }
        let mut dx = vec![0.0; solved.len()];
        if derivative {
            let n = g.n();
            let mut value = vec![0.0; n];
            for (&l, &y) in g.labeled() {
                value[l] = y as f64;
            }
            for (k, &u) in solved.iter().enumerate() {
                value[u] = x[k];
            }
            let rhs: Vec<f64> = (0..solved.len()).map(|k| {
                let i = solved[k];
                let row: Vec<f64> = (0..n)
                    .map(|j| if p[(i, j)] > 0.0 { kernel.dlog_w(i, j, t) } else { 0.0 })
                    .collect();
                let mean: f64 = (0..n).map(|j| p[(i, j)] * row[j]).sum();
                (0..n).map(|j| p[(i, j)] * (row[j] - mean) * value[j]).sum()
            }).collect();
            dx = elim.solve(&rhs, 0.0);
        }
        for (k, &u) in solved.iter().enumerate() {
            if !elim.closed[k] {
                out.insert(u, (x[k] - 0.5, dx[k]));
            }
        }
    }
    Ok(instance.unlabeled().iter().map(|u| out.get(u).copied()).collect())
}

pub fn harmonic_feedback_interval(instance: &SslInstance, sigma0: f64, eps: f64) -> Result<FeedbackInterval> {
    harmonic_feedback_interval_with(instance, sigma0, &SweepConfig::gaussian(eps))
}

pub fn harmonic_feedback_interval_with(instance: &SslInstance, t0: f64, cfg: &SweepConfig) -> Result<FeedbackInterval> {
    let domain = cfg.check(instance, t0)?;
    let kernel = ScalarKernel::new(instance, cfg.family)?;
    let eps = cfg.eps;
    let mut out = FeedbackInterval::new(t0, eps, FeedbackObjective::Harmonic);
    let h0 = harmonic_state(&kernel, instance, t0, false)?;
    if h0.iter().flatten().any(|&(h, _)| h.abs() < eps) {
        out.boundary = true;
        return Ok(out);
    }
    for dir in [-1.0, 1.0] {
        let end = if dir < 0.0 { domain.lo } else { domain.hi };
        let found = if t0 == end {
            None
        } else {
            harmonic_side(&kernel, instance, &h0, t0, end, dir, cfg)?
        };
        let (x, clamped) = found.map_or((end, true), |x| (x, false));
        if dir < 0.0 {
            out.lo = x;
            out.lo_clamped = clamped;
        } else {
            out.hi = x;
            out.hi_clamped = clamped;
        }
    }
    Ok(out)
}

/// Nearest label change from `t0` toward `end`, reported on the `t0` side.
fn harmonic_side(
    kernel: &ScalarKernel,
    instance: &SslInstance,
    h0: &[Option<(f64, f64)>],
    t0: f64,
    end: f64,
    dir: f64,
    cfg: &SweepConfig,
) -> Result<Option<f64>> {
    let pts = scan_points(t0, end, cfg.scan_points);
    let sign = |x: Option<(f64, f64)>| x.is_none_or(|(h, _)| nonneg(h));
    let mut prev = h0.to_vec();
    for k in 1..pts.len() {
        let cur = harmonic_state(kernel, instance, pts[k], false)?;
        let mut hits: Vec<f64> = Vec::new();
        for (i, (&a, &b)) in prev.iter().zip(&cur).enumerate() {
            match (a, b) {
                (Some((ha, _)), Some((hb, _))) if nonneg(ha) != nonneg(hb) => {
                    let (pos, neg) = safeguarded_newton(
                        |x| {
                            let s = harmonic_state(kernel, instance, x, true)?;
                            Ok(s[i].unwrap_or((0.0, 0.0)))
                        },
                        pts[k - 1],
                        pts[k],
                        cfg.eps,
                    )?;
                    hits.push(if nonneg(ha) { pos } else { neg });
                }
                (_, Some((hb, _))) if hb.abs() < cfg.eps => hits.push(pts[k]),
                _ if a.is_some() != b.is_some() && sign(a) != sign(b) => hits.push(pts[k - 1]),
                _ => {}
            }
        }
        if !hits.is_empty() {
            let nearest = hits.into_iter().fold(None, |acc: Option<f64>, x| match acc {
                Some(y) if (x - y) * dir >= 0.0 => Some(y),
                _ => Some(x),
            });
            return Ok(nearest);
        }
        prev = cur;
    }
    Ok(None)
}

/// Tracked flow of the min-cut sweep: the flow on each pair is a fixed
/// combination `sum_e a_e c_e(t)` of cut-edge capacities.
struct Certificate {
    coef: Vec<Vec<(usize, f64)>>,
    cut: Vec<bool>,
}

struct CutSweep<'a> {
    instance: &'a SslInstance,
    kernel: ScalarKernel,
    pairs: Vec<(usize, usize)>,
    net: FlowNetwork,
    source: usize,
    sink: usize,
    argmax: usize,
}

impl<'a> CutSweep<'a> {
    fn new(instance: &'a SslInstance, family: Family, t0: f64) -> Result<Self> {
        let kernel = ScalarKernel::new(instance, family)?;
        let n = instance.n();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
        let mut net = FlowNetwork::new(n + 2, FLOW_TOL);
        for &(u, v) in &pairs {
            net.add_edge(u, v, 0.0);
        }
        let inf = 1.0 + 2.0 * pairs.len() as f64;
        for (&l, &y) in instance.labeled() {
            if y == 0 {
                net.add_arc(n, l, inf);
            } else {
                net.add_arc(l, n + 1, inf);
            }
        }
        // the largest log-weight belongs to the same pair for every parameter
        let argmax = (0..pairs.len())
            .max_by(|&a, &b| {
                let (i, j) = pairs[a];
                let (k, l) = pairs[b];
                kernel.log_w(i, j, t0).total_cmp(&kernel.log_w(k, l, t0)).then(b.cmp(&a))
            })
            .unwrap_or(0);
        Ok(Self {
            instance,
            kernel,
            pairs,
            net,
            source: n,
            sink: n + 1,
            argmax,
        })
    }

    /// Normalized capacities `exp(lw - max lw)` and their derivatives.
    fn capacities(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let lw: Vec<f64> = self.pairs.iter().map(|&(u, v)| self.kernel.log_w(u, v, t)).collect();
        let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return (vec![0.0; lw.len()], vec![0.0; lw.len()]);
        }
        let (a, b) = self.pairs[self.argmax];
        let dmax = self.kernel.dlog_w(a, b, t);
        let c: Vec<f64> = lw.iter().map(|&x| (x - m).exp()).collect();
        let dc = self
            .pairs
            .iter()
            .zip(&c)
            .map(|(&(u, v), &ci)| if ci > 0.0 { ci * (self.kernel.dlog_w(u, v, t) - dmax) } else { 0.0 })
            .collect();
        (c, dc)
    }

    fn labeling(&self, t: f64) -> Result<HardLabeling> {
        Ok(mincut_label(&self.kernel.graph(self.instance, t)?)?.0)
    }

    /// Max flow at `t` saturating every edge of the cut with source side
    /// `side`, while leaving every other edge a margin of `gamma` of its
    /// capacity for the largest `gamma` that allows it.
    fn certificate(&mut self, t: f64, side: &[bool]) -> Option<Certificate> {
        let (c, _) = self.capacities(t);
        let cut: Vec<bool> = self.pairs.iter().map(|&(u, v)| side[u] != side[v]).collect();
        let cut_cap: f64 = c.iter().zip(&cut).filter(|(_, &k)| k).map(|(x, _)| x).sum();
        let allowance = FLOW_TOL * (2 + cut.iter().filter(|&&k| k).count()) as f64;
        let gammas = (1..=30).map(|k| 0.5f64.powi(k)).chain([0.0]);
        for gamma in gammas {
            for (p, &x) in c.iter().enumerate() {
                let cap = if cut[p] { x } else { x * (1.0 - gamma) };
                self.net.set_capacity(2 * p, cap, cap);
            }
            self.net.reset_flow();
            let value = self.net.max_flow(self.source, self.sink);
            if value < cut_cap - allowance {
                continue;
            }
            let npairs = self.pairs.len();
            let mut coef: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); npairs];
            for path in self.net.decompose(self.source, self.sink) {
                let crossing = path.arcs.iter().copied().find(|&a| {
                    a / 2 < npairs && side[self.net.tail(a)] && !side[self.net.head(a)]
                });
                let Some(e) = crossing.map(|a| a / 2) else { continue };
                if c[e] <= 0.0 {
                    continue;
                }
                let theta = path.value / c[e];
                for &a in &path.arcs {
                    if a / 2 < npairs {
                        let s = if a % 2 == 0 { theta } else { -theta };
                        *coef[a / 2].entry(e).or_insert(0.0) += s;
                    }
                }
            }
            return Some(Certificate {
                coef: coef.into_iter().map(|m| m.into_iter().collect()).collect(),
                cut,
            });
        }
        None
    }

    /// Slack functions `c_p -/+ F_p + FLOW_TOL` of every non-cut pair carrying flow,
    /// with derivatives, at `t`.
    fn slacks(&self, cert: &Certificate, t: f64) -> Vec<(f64, f64)> {
        let (c, dc) = self.capacities(t);
        let mut out = Vec::new();
        for (p, terms) in cert.coef.iter().enumerate() {
            if cert.cut[p] || terms.is_empty() {
                continue;
            }
            let f: f64 = terms.iter().map(|&(e, a)| a * c[e]).sum();
            let df: f64 = terms.iter().map(|&(e, a)| a * dc[e]).sum();
            // violations within the flow tolerance are invisible to the cut
            out.push((c[p] - f + FLOW_TOL, dc[p] - df));
            out.push((c[p] + f + FLOW_TOL, dc[p] + df));
        }
        out
    }

    /// Largest capacity excess of the tracked flow, and cut-edge shortfall, at `t`.
    fn violation(&self, cert: &Certificate, t: f64) -> f64 {
        let (c, _) = self.capacities(t);
        let mut worst: f64 = 0.0;
        for (p, terms) in cert.coef.iter().enumerate() {
            let f: f64 = terms.iter().map(|&(e, a)| a * c[e]).sum();
            if cert.cut[p] {
                if c[p] > FLOW_TOL {
                    worst = worst.max((c[p] - f.abs()).abs() - FLOW_TOL * 4.0);
                }
            } else {
                worst = worst.max(f.abs() - c[p]);
            }
        }
        worst.max(0.0)
    }

    /// `ln c_p(t) - ln FLOW_TOL` per pair, with derivatives.
    fn tolerance_gaps(&self, t: f64) -> Vec<(f64, f64)> {
        let (c, dc) = self.capacities(t);
        c.iter()
            .zip(&dc)
            .map(|(&x, &dx)| if x > 0.0 { (x.ln() - FLOW_TOL.ln(), dx / x) } else { (f64::NEG_INFINITY, 0.0) })
            .collect()
    }

    /// First point after `t` toward `end` where a slack reaches zero or a
    /// capacity crosses the flow tolerance; reported on the `t` side.
    /// Returns the point and whether other events coincide with it.
    fn next_event(&self, cert: &Certificate, t: f64, end: f64, dir: f64, cfg: &SweepConfig) -> Result<Option<(f64, usize)>> {
        let pts = scan_points(t, end, cfg.scan_points);
        let mut prev_s = self.slacks(cert, t);
        if prev_s.iter().any(|&(s, _)| !nonneg(s)) {
            return Ok(Some((t, 0)));
        }
        let mut prev_g = self.tolerance_gaps(t);
        for k in 1..pts.len() {
            let (a, b) = (pts[k - 1], pts[k]);
            let cur_s = self.slacks(cert, b);
            let cur_g = self.tolerance_gaps(b);
            let mut hits = Vec::new();
            for (i, (&(sa, _), &(sb, _))) in prev_s.iter().zip(&cur_s).enumerate() {
                if nonneg(sa) && !nonneg(sb) {
                    let (pos, _) = safeguarded_newton(|x| Ok(self.slacks(cert, x)[i]), a, b, cfg.eps)?;
                    hits.push(pos);
                }
            }
            for (p, (&(ga, _), &(gb, _))) in prev_g.iter().zip(&cur_g).enumerate() {
                if nonneg(ga) != nonneg(gb) {
                    let (pos, neg) = safeguarded_newton(
                        |x| {
                            let (g, dg) = self.tolerance_gaps(x)[p];
                            Ok(if g.is_finite() { (g, dg) } else { (-1.0, 0.0) })
                        },
                        a,
                        b,
                        cfg.eps,
                    )?;
                    hits.push(if nonneg(ga) { pos } else { neg });
                }
            }
            if !hits.is_empty() {
                hits.sort_by(|x, y| (x * dir).total_cmp(&(y * dir)));
                let first = hits[0];
                let ties = hits[1..].iter().filter(|&&x| (x - first).abs() <= cfg.eps).count();
                return Ok(Some((first, ties)));
            }
            prev_s = cur_s;
            prev_g = cur_g;
        }
        Ok(None)
    }
}

/// Certificates reaching less than this fraction of the parameter hand
/// over to the labeling scan.
const MIN_EXTENT: f64 = 1e-3;

/// First label change of the canonical cut from `t` toward `end`, located by
/// a coarse scan and bisection on the labeling; reported on the `t` side.
fn labeling_scan(
    sweep: &CutSweep,
    reference: &HardLabeling,
    t: f64,
    end: f64,
    cfg: &SweepConfig,
) -> Result<(f64, bool)> {
    let pts = scan_points(t, end, cfg.scan_points);
    for k in 1..pts.len() {
        if sweep.labeling(pts[k])? != *reference {
            let (mut inside, mut outside) = (pts[k - 1], pts[k]);
            for _ in 0..crate::roots::MAX_ITER {
                if (outside - inside).abs() <= cfg.eps {
                    break;
                }
                let mid = 0.5 * (inside + outside);
                if sweep.labeling(mid)? == *reference {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            return Ok((inside, false));
        }
    }
    Ok((end, true))
}

pub fn dynamic_mincut_interval(instance: &SslInstance, sigma0: f64, eps: f64) -> Result<FeedbackInterval> {
    dynamic_mincut_interval_with(instance, sigma0, &SweepConfig::gaussian(eps))
}

pub fn dynamic_mincut_interval_with(instance: &SslInstance, t0: f64, cfg: &SweepConfig) -> Result<FeedbackInterval> {
    let domain = cfg.check(instance, t0)?;
    let mut sweep = CutSweep::new(instance, cfg.family, t0)?;
    let n = instance.n();
    let eps = cfg.eps;
    let mut out = FeedbackInterval::new(t0, eps, FeedbackObjective::MinCut);
    let (reference, cut) = mincut_label(&sweep.kernel.graph(instance, t0)?)?;
    let side: Vec<bool> = (0..n + 2).map(|u| u == n || cut.partition.contains(&u)).collect();
    for x in [t0 - eps, t0 + eps] {
        if domain.contains(x) && sweep.labeling(x)? != reference {
            out.boundary = true;
            return Ok(out);
        }
    }
    let max_events = n * n;
    for dir in [-1.0, 1.0] {
        let end = if dir < 0.0 { domain.lo } else { domain.hi };
        let mut t = t0;
        let (x, clamped) = loop {
            if t == end {
                break (end, true);
            }
            let cert = if out.events < max_events { sweep.certificate(t, &side) } else { None };
            let Some(cert) = cert else {
                break labeling_scan(&sweep, &reference, t, end, cfg)?;
            };
            let Some((te, ties)) = sweep.next_event(&cert, t, end, dir, cfg)? else {
                out.max_violation = out.max_violation.max(sweep.violation(&cert, end));
                break (end, true);
            };
            if (te - t).abs() < MIN_EXTENT * t.abs().max(eps) {
                // a competing cut stays within the certificate margin
                break labeling_scan(&sweep, &reference, t, end, cfg)?;
            }
            out.events += 1;
            out.ties += ties;
            out.max_violation = out.max_violation.max(sweep.violation(&cert, te));
            let probe = domain.clamp(te + dir * eps);
            if sweep.labeling(probe)? != reference {
                break (te, false);
            }
            t = te;
        };
        if dir < 0.0 {
            out.lo = x;
            out.lo_clamped = clamped;
        } else {
            out.hi = x;
            out.hi_clamped = clamped;
        }
    }
    Ok(out)
}

/// Uniform grid `lo + k * step` over the domain, with `hi` appended.
pub fn parameter_grid(domain: Domain, step: f64) -> Vec<f64> {
    let mut g = Vec::new();
    let count = ((domain.width() / step) * (1.0 + 1e-12)).floor() as usize;
    for k in 0..=count {
        g.push(domain.lo + k as f64 * step);
    }
    if g.last().is_none_or(|&x| x < domain.hi - 1e-12 * domain.width().max(1.0)) {
        g.push(domain.hi);
    }
    g
}

fn feedback_objective(objective: Objective) -> FeedbackObjective {
    match objective {
        Objective::MinCut => FeedbackObjective::MinCut,
        _ => FeedbackObjective::Harmonic,
    }
}

/// Gaussian grid oracle with the default domain.
pub fn grid_oracle_interval(
    instance: &SslInstance,
    sigma0: f64,
    objective: Objective,
    grid_step: f64,
) -> Result<FeedbackInterval> {
    let domain = scalar_domain(instance, Family::Gaussian)?;
    grid_oracle_interval_with(instance, Family::Gaussian, domain, sigma0, objective, grid_step)
}

/// Maximal run of grid points around `t0` whose labeling equals the one at `t0`.
pub fn grid_oracle_interval_with(
    instance: &SslInstance,
    family: Family,
    domain: Domain,
    t0: f64,
    objective: Objective,
    grid_step: f64,
) -> Result<FeedbackInterval> {
    if !(grid_step > 0.0) {
        return Err(Error::Param(format!("grid step {grid_step} must be positive")));
    }
    let label = |t: f64| -> Result<HardLabeling> {
        let g = build_graph(instance, &family.at(t)?)?;
        match objective {
            Objective::Harmonic => Ok(round_labels(&crate::labeling::harmonic_solve(&g)?)),
            other => other.predict(&g),
        }
    };
    let reference = label(t0)?;
    let grid = parameter_grid(domain, grid_step);
    let mut out = FeedbackInterval::new(t0, grid_step, feedback_objective(objective));
    out.hi_clamped = true;
    for &x in grid.iter().filter(|&&x| x > t0) {
        if label(x)? != reference {
            out.hi_clamped = false;
            break;
        }
        out.hi = x;
    }
    if out.hi_clamped {
        out.hi = domain.hi.max(t0);
    }
    out.lo_clamped = true;
    for &x in grid.iter().rev().filter(|&&x| x < t0) {
        if label(x)? != reference {
            out.lo_clamped = false;
            break;
        }
        out.lo = x;
    }
    if out.lo_clamped {
        out.lo = domain.lo.min(t0);
    }
    Ok(out)
}

/// Feedback interval of `objective` around `t0` for a scalar weighted family.
pub fn feedback_interval(
    instance: &SslInstance,
    objective: Objective,
    t0: f64,
    cfg: &SweepConfig,
) -> Result<FeedbackInterval> {
    match objective {
        Objective::MinCut => dynamic_mincut_interval_with(instance, t0, cfg),
        Objective::Harmonic => harmonic_feedback_interval_with(instance, t0, cfg),
        other => Err(Error::Unsupported(format!("no feedback sets for the {} labeler", other.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_smoothed, ClusterParams, Label};

    /// Node 3 unlabeled; distance 1 to the label-1 node 0, distance 2 to the
    /// label-0 nodes 1 and 2; labeled nodes far from each other.
    fn crossing() -> SslInstance {
        let far = 50.0;
        let mut d = DMatrix::from_element(4, 4, far);
        for i in 0..4 {
            d[(i, i)] = 0.0;
        }
        for (j, x) in [(0, 1.0), (1, 2.0), (2, 2.0)] {
            d[(3, j)] = x;
            d[(j, 3)] = x;
        }
        SslInstance::from_distances(d, BTreeMap::from([(0, 1), (1, 0), (2, 0)]), BTreeMap::from([(3, 1 as Label)]))
            .unwrap()
    }

    fn star() -> f64 {
        (3.0 / 2f64.ln()).sqrt()
    }

    fn cfg() -> SweepConfig {
        SweepConfig::gaussian(1e-6).with_domain(Domain::new(0.5, 5.0))
    }

    #[test]
    fn breakpoints_are_distances() {
        let mut d = DMatrix::zeros(3, 3);
        for (i, j, x) in [(0, 1, 1.0), (0, 2, 1.7), (1, 2, 2.3)] {
            d[(i, j)] = x;
            d[(j, i)] = x;
        }
        let inst = SslInstance::from_distances(d, BTreeMap::from([(0, 0), (1, 1)]), BTreeMap::from([(2, 0)])).unwrap();
        let t = threshold_pieces(&inst, Objective::Harmonic).unwrap();
        assert_eq!(t.breakpoints, vec![1.0, 1.7, 2.3]);
        assert_eq!(t.piece_count(), 4);
        // node 2 joins node 0 at r = 1.7
        // node 2 ties at f = 1/2 once both edges are present
        assert_eq!(t.piece_losses, vec![1.0, 1.0, 0.0, 1.0]);
        assert_eq!(t.piece_of(1.7), 2);
        assert_eq!(t.bounds(2), (1.7, 2.3));
    }

    #[test]
    fn mincut_closed_form() {
        let inst = crossing();
        let lo = dynamic_mincut_interval_with(&inst, 1.5, &cfg()).unwrap();
        assert_eq!(lo.lo, 0.5);
        assert!(lo.lo_clamped && !lo.hi_clamped);
        assert!((lo.hi - star()).abs() < 1e-5, "{lo:?}");
        let hi = dynamic_mincut_interval_with(&inst, 3.0, &cfg()).unwrap();
        assert!((hi.lo - star()).abs() < 1e-5, "{hi:?}");
        assert_eq!(hi.hi, 5.0);
        assert!(hi.hi_clamped);
        assert!(lo.events <= 16 && hi.events <= 16);
        assert!(lo.max_violation <= 1e-9 && hi.max_violation <= 1e-9);
    }

    #[test]
    fn harmonic_closed_form() {
        let inst = crossing();
        let iv = harmonic_feedback_interval_with(&inst, 1.5, &cfg()).unwrap();
        assert_eq!(iv.lo, 0.5);
        assert!((iv.hi - star()).abs() <= 1e-6, "{iv:?}");
        let iv = harmonic_feedback_interval_with(&inst, 3.0, &cfg()).unwrap();
        assert!((iv.lo - star()).abs() <= 1e-6, "{iv:?}");
        assert!(iv.hi_clamped);
    }

    #[test]
    fn invariant_cut_spans_domain() {
        let mut d = DMatrix::from_element(3, 3, 1.0);
        for i in 0..3 {
            d[(i, i)] = 0.0;
        }
        d[(1, 2)] = 3.0;
        d[(2, 1)] = 3.0;
        let inst = SslInstance::from_distances(d, BTreeMap::from([(0, 0), (1, 1)]), BTreeMap::from([(2, 0)])).unwrap();
        let iv = dynamic_mincut_interval_with(&inst, 2.0, &cfg()).unwrap();
        assert_eq!((iv.lo, iv.hi), (0.5, 5.0));
        assert!(iv.lo_clamped && iv.hi_clamped);
    }

    #[test]
    fn symmetric_instance_is_degenerate() {
        let mut d = DMatrix::from_element(3, 3, 4.0);
        for i in 0..3 {
            d[(i, i)] = 0.0;
        }
        d[(0, 2)] = 1.0;
        d[(2, 0)] = 1.0;
        d[(1, 2)] = 1.0;
        d[(2, 1)] = 1.0;
        let inst = SslInstance::from_distances(d, BTreeMap::from([(0, 0), (1, 1)]), BTreeMap::from([(2, 0)])).unwrap();
        let iv = harmonic_feedback_interval_with(&inst, 1.5, &cfg()).unwrap();
        assert!(iv.boundary);
        assert_eq!((iv.lo, iv.hi), (1.5, 1.5));
    }

    #[test]
    fn oracle_contains_query_and_refines() {
        let inst = generate_smoothed(3, 12, 4, &ClusterParams::default(), 0.5).unwrap();
        let dom = scalar_domain(&inst, Family::Gaussian).unwrap();
        let step = dom.width() * 1e-3;
        let t0 = dom.lo + 0.15 * dom.width();
        let coarse = grid_oracle_interval(&inst, t0, Objective::MinCut, 2.0 * step).unwrap();
        let fine = grid_oracle_interval(&inst, t0, Objective::MinCut, step).unwrap();
        assert!(coarse.contains(t0) && fine.contains(t0));
        assert!((coarse.lo - fine.lo).abs() <= 2.0 * step + 1e-12);
        assert!((coarse.hi - fine.hi).abs() <= 2.0 * step + 1e-12);
    }

    #[test]
    fn sweeps_match_oracle_on_random_instance() {
        for seed in 0..4 {
            let inst = generate_smoothed(seed, 12, 4, &ClusterParams::default(), 0.5).unwrap();
            let dom = scalar_domain(&inst, Family::Gaussian).unwrap();
            let step = dom.width() * 1e-3;
            let t0 = dom.lo + 0.1 * dom.width();
            for (obj, iv) in [
                (Objective::MinCut, dynamic_mincut_interval(&inst, t0, 1e-6).unwrap()),
                (Objective::Harmonic, harmonic_feedback_interval(&inst, t0, 1e-6).unwrap()),
            ] {
                let oracle = grid_oracle_interval(&inst, t0, obj, step).unwrap();
                assert!((iv.lo - oracle.lo).abs() <= step, "{seed} {obj:?} {iv:?} {oracle:?}");
                assert!((iv.hi - oracle.hi).abs() <= step, "{seed} {obj:?} {iv:?} {oracle:?}");
            }
        }
    }

    #[test]
    fn threshold_interval_is_piece() {
        let t = PieceTable {
            breakpoints: vec![1.0, 2.0],
            piece_losses: vec![0.5, 0.2, 0.1],
        };
        let iv = threshold_feedback_interval(&t, Domain::new(1.0, 2.0), 1.5);
        assert_eq!((iv.lo, iv.hi), (1.0, 2.0));
        assert!(iv.lo_clamped && iv.hi_clamped);
        assert_eq!(t.best_piece(), (2, 0.1));
    }
}
