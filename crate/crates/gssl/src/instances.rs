//! Problem instances: distance data, labeled and unlabeled nodes, hidden
//! evaluation labels, synthetic generators and file ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Binary class label, 0 or 1.
pub type Label = u8;

/// Absolute tolerance for matrix symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Distance,
    Similarity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub kind: MetricKind,
    pub matrix: DMatrix<f64>,
}

/// Offending entry of an invalid matrix: (row, col, message).
type MatrixFault = (usize, usize, String);

fn check_matrix(matrix: &DMatrix<f64>, kind: MetricKind) -> std::result::Result<(), MatrixFault> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err((0, 0, format!("matrix is {}x{}, expected square", n, matrix.ncols())));
    }
    for i in 0..n {
        for j in 0..n {
            let x = matrix[(i, j)];
            if !x.is_finite() {
                return Err((i, j, format!("non-finite entry {x}")));
            }
            if x < 0.0 {
                return Err((i, j, format!("negative entry {x}")));
            }
            if (x - matrix[(j, i)]).abs() > SYMMETRY_TOL {
                return Err((i, j, format!("asymmetric matrix: {x} vs {}", matrix[(j, i)])));
            }
        }
        if kind == MetricKind::Distance && matrix[(i, i)] != 0.0 {
            return Err((i, i, "nonzero diagonal in distance matrix".into()));
        }
    }
    Ok(())
}

/// One or more symmetric nonnegative n×n matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSet {
    metrics: Vec<Metric>,
}

impl MetricSet {
    pub fn new(metrics: Vec<Metric>) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::Param("metric set is empty".into()));
        }
        let n = metrics[0].matrix.nrows();
        for (k, m) in metrics.iter().enumerate() {
            if m.matrix.nrows() != n {
                return Err(Error::Param(format!("metric {k} has size {}, expected {n}", m.matrix.nrows())));
            }
            check_matrix(&m.matrix, m.kind)
                .map_err(|(r, c, msg)| Error::Param(format!("metric {k} at ({r}, {c}): {msg}")))?;
        }
        Ok(Self { metrics })
    }

    /// Single distance matrix.
    pub fn distance(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![Metric {
            kind: MetricKind::Distance,
            matrix,
        }])
    }

    pub fn n(&self) -> usize {
        self.metrics[0].matrix.nrows()
    }

    pub fn metrics(&self) -> &[Metric] {
        &self.metrics
    }

    /// First distance-kind matrix.
    pub fn first_distance(&self) -> Option<&DMatrix<f64>> {
        self.metrics
            .iter()
            .find(|m| m.kind == MetricKind::Distance)
            .map(|m| &m.matrix)
    }

    pub fn similarities(&self) -> Vec<&DMatrix<f64>> {
        self.metrics
            .iter()
            .filter(|m| m.kind == MetricKind::Similarity)
            .map(|m| &m.matrix)
            .collect()
    }
}

/// Node identifiers with optional coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    ids: Vec<String>,
    coords: Option<Vec<Vec<f64>>>,
}

impl PointSet {
    pub fn new(ids: Vec<String>, coords: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let unique: BTreeSet<&String> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(Error::Param("node ids are not unique".into()));
        }
        if let Some(c) = &coords {
            if c.len() != ids.len() {
                return Err(Error::Param("coordinate count differs from id count".into()));
            }
            if let Some(first) = c.first() {
                if c.iter().any(|v| v.len() != first.len()) {
                    return Err(Error::Param("coordinate vectors differ in dimension".into()));
                }
            }
        }
        Ok(Self { ids, coords })
    }

    /// Ids "0", "1", ... without coordinates.
    pub fn indexed(n: usize) -> Self {
        Self {
            ids: (0..n).map(|i| i.to_string()).collect(),
            coords: None,
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    fn is_indexed(&self) -> bool {
        self.ids.iter().enumerate().all(|(i, id)| *id == i.to_string())
    }
}

/// A semi-supervised problem: metrics, labeled set L, unlabeled set U and the
/// hidden labels on U used only for loss evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct SslInstance {
    points: PointSet,
    metrics: MetricSet,
    labeled: BTreeMap<usize, Label>,
    unlabeled: Vec<usize>,
    truth: BTreeMap<usize, Label>,
}

impl SslInstance {
    /// Builds an instance. `truth` must cover exactly the unlabeled nodes, or
    /// be empty when hidden labels are unknown.
    pub fn new(
        points: PointSet,
        metrics: MetricSet,
        labeled: BTreeMap<usize, Label>,
        truth: BTreeMap<usize, Label>,
    ) -> Result<Self> {
        let n = metrics.n();
        if points.ids.len() != n {
            return Err(Error::Param(format!("{} ids for {n} nodes", points.ids.len())));
        }
        if labeled.is_empty() {
            return Err(Error::Param("no labeled nodes".into()));
        }
        for (&u, &l) in labeled.iter().chain(truth.iter()) {
            if u >= n {
                return Err(Error::Param(format!("node {u} out of range (n = {n})")));
            }
            if l > 1 {
                return Err(Error::Param(format!("label {l} of node {u} is not 0 or 1")));
            }
        }
        let unlabeled: Vec<usize> = (0..n).filter(|u| !labeled.contains_key(u)).collect();
        if !truth.is_empty() {
            let keys: Vec<usize> = truth.keys().copied().collect();
            if keys != unlabeled {
                return Err(Error::Param("truth must be defined exactly on the unlabeled nodes".into()));
            }
        }
        Ok(Self {
            points,
            metrics,
            labeled,
            unlabeled,
            truth,
        })
    }

    /// Instance over a single distance matrix with index ids.
    pub fn from_distances(
        distances: DMatrix<f64>,
        labeled: BTreeMap<usize, Label>,
        truth: BTreeMap<usize, Label>,
    ) -> Result<Self> {
        let n = distances.nrows();
        Self::new(PointSet::indexed(n), MetricSet::distance(distances)?, labeled, truth)
    }

    pub fn n(&self) -> usize {
        self.metrics.n()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn metrics(&self) -> &MetricSet {
        &self.metrics
    }

    pub fn labeled(&self) -> &BTreeMap<usize, Label> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    /// The first distance matrix.
    pub fn distances(&self) -> Result<&DMatrix<f64>> {
        self.metrics
            .first_distance()
            .ok_or_else(|| Error::KindMismatch("instance has no distance matrix".into()))
    }

    pub fn has_truth(&self) -> bool {
        !self.truth.is_empty()
    }

    /// Oracle access to the hidden label of an unlabeled node.
    pub fn reveal(&self, u: usize) -> Option<Label> {
        self.truth.get(&u).copied()
    }

    /// Copy in which `nodes` (unlabeled) become labeled with their hidden labels.
    pub fn with_revealed(&self, nodes: &[usize]) -> Result<Self> {
        let mut labeled = self.labeled.clone();
        let mut truth = self.truth.clone();
        for &u in nodes {
            let l = truth
                .remove(&u)
                .ok_or_else(|| Error::Precondition(format!("node {u} has no hidden label")))?;
            labeled.insert(u, l);
        }
        Self::new(self.points.clone(), self.metrics.clone(), labeled, truth)
    }

    /// Copy with a different labeled set; hidden labels follow `truth_source`
    /// (full assignment of every node) for nodes that end up unlabeled.
    pub fn relabeled(&self, labeled: BTreeMap<usize, Label>, truth_source: &BTreeMap<usize, Label>) -> Result<Self> {
        let truth = (0..self.n())
            .filter(|u| !labeled.contains_key(u))
            .filter_map(|u| truth_source.get(&u).map(|&l| (u, l)))
            .collect();
        Self::new(self.points.clone(), self.metrics.clone(), labeled, truth)
    }

    /// Copy with replaced metrics of the same size.
    pub fn with_metrics(&self, metrics: MetricSet) -> Result<Self> {
        Self::new(self.points.clone(), metrics, self.labeled.clone(), self.truth.clone())
    }

    /// Random sub-instance of `size` nodes drawn without replacement, keeping
    /// at least one labeled node of every class present.
    pub fn subsample<R: Rng>(&self, rng: &mut R, size: usize) -> Result<Self> {
        let n = self.n();
        if size < 2 || size > n {
            return Err(Error::Param(format!("subset size {size} outside [2, {n}]")));
        }
        let mut chosen: BTreeSet<usize> = BTreeSet::new();
        for class in 0..=1u8 {
            let members: Vec<usize> = self
                .labeled
                .iter()
                .filter(|(_, &l)| l == class)
                .map(|(&u, _)| u)
                .collect();
            if let Some(&u) = members.choose(rng) {
                chosen.insert(u);
            }
        }
        let mut rest: Vec<usize> = (0..n).filter(|u| !chosen.contains(u)).collect();
        rest.shuffle(rng);
        for u in rest {
            if chosen.len() >= size {
                break;
            }
            chosen.insert(u);
        }
        let nodes: Vec<usize> = chosen.into_iter().collect();
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(nodes.len(), nodes.len(), |i, j| m[(nodes[i], nodes[j])]);
        let metrics = MetricSet::new(
            self.metrics
                .metrics
                .iter()
                .map(|m| Metric {
                    kind: m.kind,
                    matrix: pick(&m.matrix),
                })
                .collect(),
        )?;
        let ids = nodes.iter().map(|&u| self.points.ids[u].clone()).collect();
        let coords = self
            .points
            .coords
            .as_ref()
            .map(|c| nodes.iter().map(|&u| c[u].clone()).collect());
        let mut labeled = BTreeMap::new();
        let mut truth = BTreeMap::new();
        for (i, &u) in nodes.iter().enumerate() {
            if let Some(&l) = self.labeled.get(&u) {
                labeled.insert(i, l);
            } else if let Some(&l) = self.truth.get(&u) {
                truth.insert(i, l);
            }
        }
        Self::new(PointSet::new(ids, coords)?, metrics, labeled, truth)
    }
}

// ---------------------------------------------------------------------------
// Synthetic generators

/// Two isotropic Gaussian clusters in the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterParams {
    pub centers: [[f64; 2]; 2],
    pub spread: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            centers: [[0.0, 0.0], [3.0, 0.0]],
            spread: 1.0,
        }
    }
}

/// Draws `n` points alternating between the two clusters; node `i` belongs
/// to cluster `i % 2`, which is also its label.
fn draw_clusters<R: Rng>(rng: &mut R, n: usize, clusters: &ClusterParams) -> Result<Vec<[f64; 2]>> {
    let normal = Normal::new(0.0, clusters.spread).map_err(|e| Error::Param(format!("cluster spread: {e}")))?;
    Ok((0..n)
        .map(|i| {
            let c = clusters.centers[i % 2];
            [c[0] + normal.sample(rng), c[1] + normal.sample(rng)]
        })
        .collect())
}

/// Picks a labeled set containing both classes; node classes are `i % 2`.
fn pick_labeled<R: Rng>(rng: &mut R, n: usize, n_labeled: usize) -> Vec<usize> {
    let evens: Vec<usize> = (0..n).step_by(2).collect();
    let odds: Vec<usize> = (1..n).step_by(2).collect();
    let mut chosen = vec![*evens.choose(rng).unwrap(), *odds.choose(rng).unwrap()];
    let mut rest: Vec<usize> = (0..n).filter(|u| !chosen.contains(u)).collect();
    rest.shuffle(rng);
    chosen.extend(rest.into_iter().take(n_labeled - 2));
    chosen.sort_unstable();
    chosen
}

/// Euclidean distance matrix of planar points.
fn euclidean<const D: usize>(points: &[[f64; D]]) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        points[i]
            .iter()
            .zip(points[j].iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

/// Adds independent uniform noise on [-w/2, w/2] to every ordered pair,
/// clamps at zero and re-symmetrizes by averaging.
fn perturb<R: Rng>(rng: &mut R, d: &DMatrix<f64>, noise_width: f64) -> DMatrix<f64> {
    let n = d.nrows();
    let mut noisy = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let e: f64 = rng.random_range(-0.5..0.5) * noise_width;
                noisy[(i, j)] = (d[(i, j)] + e).max(0.0);
            }
        }
    }
    DMatrix::from_fn(n, n, |i, j| 0.5 * (noisy[(i, j)] + noisy[(j, i)]))
}

fn check_sizes(n: usize, n_labeled: usize, noise_width: f64) -> Result<()> {
    if n < 4 {
        return Err(Error::Param(format!("n = {n} must be at least 4")));
    }
    if n_labeled < 2 || n_labeled >= n {
        return Err(Error::Param(format!("n_labeled = {n_labeled} must lie in [2, n)")));
    }
    if !(noise_width > 0.0 && noise_width.is_finite()) {
        return Err(Error::Param(format!("noise_width = {noise_width} must be positive")));
    }
    Ok(())
}

fn split_labels(n: usize, labeled_nodes: &[usize]) -> (BTreeMap<usize, Label>, BTreeMap<usize, Label>) {
    let mut labeled = BTreeMap::new();
    let mut truth = BTreeMap::new();
    for u in 0..n {
        let l = (u % 2) as Label;
        if labeled_nodes.contains(&u) {
            labeled.insert(u, l);
        } else {
            truth.insert(u, l);
        }
    }
    (labeled, truth)
}

/// Smoothed instance: clustered points whose pairwise distances carry
/// independent uniform noise of width `noise_width`.
pub fn generate_smoothed(
    seed: u64,
    n: usize,
    n_labeled: usize,
    clusters: &ClusterParams,
    noise_width: f64,
) -> Result<SslInstance> {
    check_sizes(n, n_labeled, noise_width)?;
    let mut rng = stream_rng(seed, 0);
    let points = draw_clusters(&mut rng, n, clusters)?;
    let labeled_nodes = pick_labeled(&mut rng, n, n_labeled);
    let d = perturb(&mut rng, &euclidean(&points), noise_width);
    let coords = points.iter().map(|p| p.to_vec()).collect();
    let (labeled, truth) = split_labels(n, &labeled_nodes);
    SslInstance::new(
        PointSet::new((0..n).map(|i| i.to_string()).collect(), Some(coords))?,
        MetricSet::distance(d)?,
        labeled,
        truth,
    )
}

/// Similarity `1 - d / max d` off the diagonal, zero on it.
pub fn similarity_from_distance(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    let max = d.iter().cloned().fold(0.0, f64::max);
    DMatrix::from_fn(n, n, |i, j| {
        if i == j || max == 0.0 {
            0.0
        } else {
            1.0 - d[(i, j)] / max
        }
    })
}

/// Smoothed instance carrying two similarity metrics: one derived from the
/// clustered distances and one drawn independently of the labels.
pub fn generate_two_metric(
    seed: u64,
    n: usize,
    n_labeled: usize,
    clusters: &ClusterParams,
    noise_width: f64,
) -> Result<SslInstance> {
    let base = generate_smoothed(seed, n, n_labeled, clusters, noise_width)?;
    let mut rng = stream_rng(seed, 1);
    let mut noise = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = rng.random();
            noise[(i, j)] = s;
            noise[(j, i)] = s;
        }
    }
    let d = base.distances()?.clone();
    let metrics = MetricSet::new(vec![
        Metric {
            kind: MetricKind::Distance,
            matrix: d.clone(),
        },
        Metric {
            kind: MetricKind::Similarity,
            matrix: similarity_from_distance(&d),
        },
        Metric {
            kind: MetricKind::Similarity,
            matrix: noise,
        },
    ])?;
    base.with_metrics(metrics)
}

/// Parameters of a synthetic stream.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedParams {
    pub n: usize,
    pub n_labeled: usize,
    pub clusters: ClusterParams,
    pub noise_width: f64,
    pub two_metric: bool,
}

impl Default for SmoothedParams {
    fn default() -> Self {
        Self {
            n: 20,
            n_labeled: 4,
            clusters: ClusterParams::default(),
            noise_width: 0.5,
            two_metric: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StreamSource {
    Synthetic { seed: u64, params: SmoothedParams },
    /// Files are cycled; when `subset` is set each round draws a fresh
    /// random sub-instance of that size.
    Files {
        paths: Vec<PathBuf>,
        subset: Option<usize>,
        seed: u64,
    },
}

/// A deterministic sequence of `count` instances.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceStream {
    pub source: StreamSource,
    pub count: usize,
}

impl InstanceStream {
    /// Instance of round `t` (0-based).
    pub fn get(&self, t: usize) -> Result<SslInstance> {
        match &self.source {
            StreamSource::Synthetic { seed, params } => {
                let s = stream_rng(*seed, t as u64).next_u64();
                if params.two_metric {
                    generate_two_metric(s, params.n, params.n_labeled, &params.clusters, params.noise_width)
                } else {
                    generate_smoothed(s, params.n, params.n_labeled, &params.clusters, params.noise_width)
                }
            }
            StreamSource::Files { paths, subset, seed } => {
                if paths.is_empty() {
                    return Err(Error::Param("empty file list".into()));
                }
                let inst = load_instance(&paths[t % paths.len()], None)?;
                match subset {
                    Some(size) => inst.subsample(&mut stream_rng(*seed, t as u64), *size),
                    None => Ok(inst),
                }
            }
        }
    }

    pub fn collect(&self) -> Result<Vec<SslInstance>> {
        (0..self.count).map(|t| self.get(t)).collect()
    }
}

// ---------------------------------------------------------------------------
// Adversarial fixtures

/// Oscillating threshold instance and its witness loss level.
#[derive(Clone, Debug)]
pub struct OscillationFixture {
    pub instance: SslInstance,
    pub witness: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    pub r_max: f64,
}

/// Threshold instance whose harmonic loss alternates around a witness as `r`
/// crosses each value of `r_values`.
///
/// Nodes are `a1, a2, a3` (label 0), `b1, b2` (label 1), then `u1..` with
/// hidden label 1 for odd index and 0 for even index, then padding nodes
/// attached only to `a1` (hidden label 0) up to `n` nodes.
pub fn make_threshold_oscillation_fixture(r_values: &[f64], n: usize) -> Result<OscillationFixture> {
    let k = r_values.len();
    if k == 0 {
        return Err(Error::Param("need at least one oscillation point".into()));
    }
    if n < 5 || k > n - 5 {
        return Err(Error::Param(format!("{k} oscillation points need n >= {}", k + 5)));
    }
    if r_values.iter().any(|&r| !(r > 1.0 && r < 2.0)) {
        return Err(Error::Param("oscillation points must lie in (1, 2)".into()));
    }
    if r_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Param("oscillation points must be strictly increasing".into()));
    }
    let r_minus = (1.0 + r_values[0]) / 2.0;
    let r_plus = 1.0 + r_values[k - 1] / 2.0;
    let r_max = 1.0 + r_plus / 2.0;

    let (a, b, u0, p0) = ([0usize, 1, 2], [3usize, 4], 5usize, 5 + k);
    let mut d = DMatrix::from_element(n, n, r_max);
    let mut set = |i: usize, j: usize, x: f64| {
        d[(i, j)] = x;
        d[(j, i)] = x;
    };
    set(a[0], a[1], r_minus);
    set(a[0], a[2], r_minus);
    set(a[1], a[2], r_minus);
    set(b[0], b[1], r_minus);
    for (idx, &rk) in r_values.iter().enumerate() {
        let u = u0 + idx;
        set(a[0], u, r_minus);
        set(a[1], u, r_plus);
        set(a[2], u, r_plus);
        set(b[0], u, rk);
        set(b[1], u, rk);
    }
    for p in p0..n {
        set(a[0], p, r_minus);
    }
    for i in 0..n {
        d[(i, i)] = 0.0;
    }

    let mut labeled = BTreeMap::new();
    for &x in &a {
        labeled.insert(x, 0);
    }
    for &x in &b {
        labeled.insert(x, 1);
    }
    let mut truth = BTreeMap::new();
    for idx in 0..k {
        // 1-based index k is labeled b (1) iff odd
        truth.insert(u0 + idx, if (idx + 1) % 2 == 1 { 1 } else { 0 });
    }
    for p in p0..n {
        truth.insert(p, 0);
    }

    // Below r_1 every u is predicted 0, so exactly the odd-indexed ones are wrong.
    let m = (n - 5) as f64;
    let odd = k.div_ceil(2) as f64;
    let l_high = odd / m;
    let l_low = (odd - 1.0) / m;
    let mut ids: Vec<String> = vec!["a1", "a2", "a3", "b1", "b2"].into_iter().map(String::from).collect();
    ids.extend((1..=k).map(|i| format!("u{i}")));
    ids.extend((1..=(n - 5 - k)).map(|i| format!("p{i}")));
    let instance = SslInstance::new(PointSet::new(ids, None)?, MetricSet::distance(d)?, labeled, truth)?;
    Ok(OscillationFixture {
        instance,
        witness: 0.5 * (l_high + l_low),
        r_minus,
        r_plus,
        r_max,
    })
}

/// Family of `m` oscillation instances shattered by `2^m` thresholds.
#[derive(Clone, Debug)]
pub struct ShatteringFamily {
    pub fixtures: Vec<OscillationFixture>,
    /// `thresholds[b]` realizes bit pattern `b`: instance `i` (bit `m-1-i` of
    /// `b`, most significant first) falls below its witness iff that bit is 1.
    pub thresholds: Vec<f64>,
}

/// Builds the bit-flip schedule: instance `i` oscillates exactly at the
/// breakpoints where bit `i` (most significant first) changes.
pub fn make_threshold_shattering_family(m: usize) -> Result<ShatteringFamily> {
    if m == 0 || m > 10 {
        return Err(Error::Param(format!("m = {m} must lie in [1, 10]")));
    }
    let count = 1usize << m;
    // Breakpoints c_1..c_{2^m-1} packed into [1.9, 1.95) so every instance's
    // upper constant 1 + c/2 exceeds all thresholds.
    let step = 0.05 / count as f64;
    let c: Vec<f64> = (1..count).map(|k| 1.9 + step * k as f64).collect();
    let thresholds: Vec<f64> = (0..count)
        .map(|b| if b == 0 { c[0] - step / 2.0 } else { c[b - 1] + step / 2.0 })
        .collect();
    let n = 5 + count - 1;
    let fixtures = (0..m)
        .map(|i| {
            let bit = m - 1 - i;
            let rs: Vec<f64> = (1..count)
                .filter(|k| ((k >> bit) & 1) != (((k - 1) >> bit) & 1))
                .map(|k| c[k - 1])
                .collect();
            make_threshold_oscillation_fixture(&rs, n)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShatteringFamily { fixtures, thresholds })
}

/// Node indices of the sigma-shattering fixture.
pub mod sigma_nodes {
    pub const A1: usize = 0;
    pub const A2: usize = 1;
    pub const B1: usize = 2;
    pub const B2: usize = 3;

    /// Index of `x_i` (1-based `i`).
    pub fn x(i: usize) -> usize {
        4 + 2 * (i - 1)
    }

    /// Index of `y_i` (1-based `i`).
    pub fn y(i: usize) -> usize {
        5 + 2 * (i - 1)
    }
}

/// Instance with labeled `a1, a2` (0) and `b1, b2` (1) followed by `N` pairs
/// `(x_i, y_i)`. Squared distances lie in `[1.5, 1.6]`; the emitted matrix
/// holds their square roots, so a Gaussian kernel gives `w = s^delta` with
/// `s = exp(-1 / sigma^2)`.
pub fn make_sigma_shattering_fixture(big_n: usize, epsilon: f64) -> Result<SslInstance> {
    use sigma_nodes::*;
    if big_n == 0 {
        return Err(Error::Param("N must be at least 1".into()));
    }
    if !(epsilon > 0.0) || 1.5 + 12.0 * big_n as f64 * epsilon >= 1.6 {
        return Err(Error::Param(format!("epsilon = {epsilon} must satisfy 0 < 1.5 + 12 N eps < 1.6")));
    }
    let n = 4 + 2 * big_n;
    let mut delta = DMatrix::from_element(n, n, 1.6);
    let mut set = |i: usize, j: usize, x: f64| {
        delta[(i, j)] = x;
        delta[(j, i)] = x;
    };
    let e = epsilon;
    let far = 1.5 + 12.0 * big_n as f64 * e;
    for i in 1..=big_n {
        let (xi, yi) = (x(i), y(i));
        set(xi, A1, 1.5);
        set(yi, B2, 1.5);
        set(xi, A2, far);
        set(yi, B1, far);
        set(xi, yi, far);
        set(xi, B1, 1.5 + e);
        set(xi, B2, 1.5 + e);
        set(yi, A1, 1.5 + e);
        set(yi, A2, 1.5 + e);
        for j in 1..i {
            set(xi, y(j), 1.5 + 6.0 * (2 * j - 1) as f64 * e);
            set(yi, x(j), 1.5 + 6.0 * (2 * j - 1) as f64 * e);
            set(xi, x(j), 1.5 + 12.0 * j as f64 * e);
            set(yi, y(j), 1.5 + 12.0 * j as f64 * e);
        }
    }
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { delta[(i, j)].sqrt() });
    let labeled = BTreeMap::from([(A1, 0), (A2, 0), (B1, 1), (B2, 1)]);
    let truth = (1..=big_n).flat_map(|i| [(x(i), 0), (y(i), 1)]).collect();
    let mut ids: Vec<String> = vec!["a1", "a2", "b1", "b2"].into_iter().map(String::from).collect();
    for i in 1..=big_n {
        ids.push(format!("x{i}"));
        ids.push(format!("y{i}"));
    }
    SslInstance::new(PointSet::new(ids, None)?, MetricSet::distance(d)?, labeled, truth)
}

// ---------------------------------------------------------------------------
// File formats

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceFormat {
    /// Matrix JSON document.
    Json,
    /// One row per point: `x1..xD,label` with an optional `truth` column.
    Csv,
}

impl InstanceFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(Self::Json),
            Some("csv") => Ok(Self::Csv),
            _ => Err(Error::FormatFile {
                path: path.to_path_buf(),
                msg: "unknown extension (expected .json or .csv)".into(),
            }),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MetricFile {
    kind: MetricKind,
    matrix: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ids: Option<Vec<String>>,
    labeled: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    truth: BTreeMap<String, serde_json::Value>,
    metrics: Vec<MetricFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<Vec<f64>>>,
}

fn file_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::FormatFile {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn read_file(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if text.trim().is_empty() {
        return Err(file_error(path, "empty file"));
    }
    Ok(text)
}

/// Loads an instance; the format defaults to the file extension.
pub fn load_instance(path: &Path, format: Option<InstanceFormat>) -> Result<SslInstance> {
    let format = match format {
        Some(f) => f,
        None => InstanceFormat::from_path(path)?,
    };
    let text = read_file(path)?;
    match format {
        InstanceFormat::Json => parse_json(path, &text),
        InstanceFormat::Csv => parse_csv(path, &text),
    }
}

fn parse_label_map(
    path: &Path,
    field: &str,
    raw: &BTreeMap<String, serde_json::Value>,
    index: &BTreeMap<&str, usize>,
) -> Result<BTreeMap<usize, Label>> {
    raw.iter()
        .map(|(id, v)| {
            let u = *index
                .get(id.as_str())
                .ok_or_else(|| file_error(path, format!("{field}: unknown node id {id:?}")))?;
            match v.as_u64() {
                Some(l @ (0 | 1)) => Ok((u, l as Label)),
                _ => Err(file_error(path, format!("{field}: unknown label value {v} for node {id:?}"))),
            }
        })
        .collect()
}

fn parse_json(path: &Path, text: &str) -> Result<SslInstance> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            row: e.line(),
            col: e.column(),
            msg: e.to_string(),
        })?;
    let n = file.n;
    let ids = file.ids.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
    if ids.len() != n {
        return Err(file_error(path, format!("{} ids for n = {n}", ids.len())));
    }
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if file.metrics.is_empty() {
        return Err(file_error(path, "no metrics"));
    }
    let mut metrics = Vec::new();
    for (k, m) in file.metrics.iter().enumerate() {
        if m.matrix.len() != n {
            return Err(file_error(path, format!("metric {k}: {} rows for n = {n}", m.matrix.len())));
        }
        for (r, row) in m.matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    row: r,
                    col: row.len(),
                    msg: format!("metric {k}: row has {} entries, expected {n}", row.len()),
                });
            }
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| m.matrix[i][j]);
        check_matrix(&matrix, m.kind).map_err(|(row, col, msg)| Error::Format {
            path: path.to_path_buf(),
            row,
            col,
            msg: format!("metric {k}: {msg}"),
        })?;
        metrics.push(Metric { kind: m.kind, matrix });
    }
    let labeled = parse_label_map(path, "labeled", &file.labeled, &index)?;
    if labeled.is_empty() {
        return Err(file_error(path, "no labeled nodes"));
    }
    let truth = parse_label_map(path, "truth", &file.truth, &index)?;
    let points = PointSet::new(ids, file.coords).map_err(|e| file_error(path, e.to_string()))?;
    let metrics = MetricSet::new(metrics).map_err(|e| file_error(path, e.to_string()))?;
    SslInstance::new(points, metrics, labeled, truth).map_err(|e| file_error(path, e.to_string()))
}

fn parse_csv_label(path: &Path, row: usize, col: usize, field: &str) -> Result<Option<Label>> {
    match field.trim() {
        "" => Ok(None),
        "0" => Ok(Some(0)),
        "1" => Ok(Some(1)),
        other => Err(Error::Format {
            path: path.to_path_buf(),
            row,
            col,
            msg: format!("unknown label value {other:?}"),
        }),
    }
}

/// Distance and similarity matrices from coordinates: Euclidean distance and
/// dot-product similarity min-max scaled to [0, 1].
pub fn metrics_from_coords(coords: &[Vec<f64>]) -> Result<MetricSet> {
    let n = coords.len();
    let dot = |i: usize, j: usize| coords[i].iter().zip(&coords[j]).map(|(a, b)| a * b).sum::<f64>();
    let dist = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        }
    });
    let raw = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { dot(i, j) });
    let off: Vec<f64> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| raw[(i, j)]).collect();
    let lo = off.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = off.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sim = DMatrix::from_fn(n, n, |i, j| {
        if i == j || !(hi > lo) {
            0.0
        } else {
            (raw[(i, j)] - lo) / (hi - lo)
        }
    });
    MetricSet::new(vec![
        Metric {
            kind: MetricKind::Distance,
            matrix: dist,
        },
        Metric {
            kind: MetricKind::Similarity,
            matrix: sim,
        },
    ])
}

fn parse_csv(path: &Path, text: &str) -> Result<SslInstance> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| file_error(path, format!("bad header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let label_col = names
        .iter()
        .position(|&h| h == "label")
        .ok_or_else(|| file_error(path, "missing label column"))?;
    let truth_col = names.iter().position(|&h| h == "truth");
    let coord_cols: Vec<usize> = (0..names.len()).filter(|&c| c != label_col && Some(c) != truth_col).collect();
    for (k, &c) in coord_cols.iter().enumerate() {
        if names[c] != format!("x{}", k + 1) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                row: 1,
                col: c + 1,
                msg: format!("unexpected header {:?}, expected x{}", names[c], k + 1),
            });
        }
    }
    if coord_cols.is_empty() {
        return Err(file_error(path, "no coordinate columns"));
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut truths = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Format {
            path: path.to_path_buf(),
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        if rec.len() != names.len() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                row,
                col: rec.len(),
                msg: format!("{} fields, expected {}", rec.len(), names.len()),
            });
        }
        let mut v = Vec::with_capacity(coord_cols.len());
        for &c in &coord_cols {
            let x: f64 = rec[c].trim().parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                row,
                col: c + 1,
                msg: format!("not a number: {:?}", &rec[c]),
            })?;
            if !x.is_finite() {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    row,
                    col: c + 1,
                    msg: "non-finite coordinate".into(),
                });
            }
            v.push(x);
        }
        coords.push(v);
        labels.push(parse_csv_label(path, row, label_col + 1, &rec[label_col])?);
        truths.push(match truth_col {
            Some(c) => parse_csv_label(path, row, c + 1, &rec[c])?,
            None => None,
        });
    }
    if coords.is_empty() {
        return Err(file_error(path, "no data rows"));
    }
    let labeled: BTreeMap<usize, Label> = labels.iter().enumerate().filter_map(|(u, l)| l.map(|l| (u, l))).collect();
    if labeled.is_empty() {
        return Err(file_error(path, "no labeled nodes"));
    }
    let truth: BTreeMap<usize, Label> = truths
        .iter()
        .enumerate()
        .filter(|(u, _)| !labeled.contains_key(u))
        .filter_map(|(u, t)| t.map(|t| (u, t)))
        .collect();
    let n = coords.len();
    let metrics = metrics_from_coords(&coords)?;
    let points = PointSet::new((0..n).map(|i| i.to_string()).collect(), Some(coords))?;
    SslInstance::new(points, metrics, labeled, truth).map_err(|e| file_error(path, e.to_string()))
}

impl SslInstance {
    /// JSON document in the matrix schema.
    pub fn to_json(&self) -> String {
        let ids = &self.points.ids;
        let map = |m: &BTreeMap<usize, Label>| {
            m.iter()
                .map(|(&u, &l)| (ids[u].clone(), serde_json::Value::from(l)))
                .collect::<BTreeMap<_, _>>()
        };
        let n = self.n();
        let file = InstanceFile {
            n,
            ids: if self.points.is_indexed() { None } else { Some(ids.clone()) },
            labeled: map(&self.labeled),
            truth: map(&self.truth),
            metrics: self
                .metrics
                .metrics
                .iter()
                .map(|m| MetricFile {
                    kind: m.kind,
                    matrix: (0..n).map(|i| (0..n).map(|j| m.matrix[(i, j)]).collect()).collect(),
                })
                .collect(),
            coords: self.points.coords.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
