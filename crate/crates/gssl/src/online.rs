//! Online parameter selection over instance streams: continuous exponential
//! weights with full information, the semi-bandit variant driven by feedback
//! intervals, a grid learner for the multi-metric box, and regret accounting.

use rand::Rng;

use crate::error::{Error, Result};
use crate::feedback::{
    feedback_interval, parameter_grid, threshold_feedback_interval, threshold_pieces, FeedbackInterval, PieceTable,
    SweepConfig, DEFAULT_EPS, DEFAULT_SCAN_POINTS,
};
use crate::instances::SslInstance;
use crate::kernels::{scalar_domain, Domain, Family, KernelSpec};
use crate::labeling::Objective;
use crate::rng::stream_rng;

pub const DEFAULT_LAMBDA: f64 = 0.5;
/// Largest multi-metric weight vector handled by the grid learner.
pub const MAX_GRID_DIM: usize = 4;
/// Grid size used for best-in-hindsight over weighted kernels.
pub const DEFAULT_REGRET_GRID: usize = 201;

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::Param(format!("lambda = {lambda} must lie in (0, 1]")))
    }
}

/// Piecewise-constant density on a closed interval, stored as log-weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseDensity {
    /// Piece edges, from the domain's low end to its high end.
    edges: Vec<f64>,
    log_weights: Vec<f64>,
}

impl PiecewiseDensity {
    pub fn uniform(domain: Domain) -> Self {
        Self {
            edges: vec![domain.lo, domain.hi],
            log_weights: vec![0.0],
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::new(self.edges[0], self.edges[self.edges.len() - 1])
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn piece_count(&self) -> usize {
        self.log_weights.len()
    }

    pub fn piece_of(&self, x: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= x);
        k.saturating_sub(1).min(self.piece_count() - 1)
    }

    /// Splits the piece containing `x` at `x`; no-op outside the open domain
    /// or at an existing edge.
    pub fn insert(&mut self, x: f64) {
        let d = self.domain();
        if !(x > d.lo && x < d.hi) {
            return;
        }
        let k = self.edges.partition_point(|&e| e < x);
        if self.edges[k] == x {
            return;
        }
        self.edges.insert(k, x);
        let w = self.log_weights[k - 1];
        self.log_weights.insert(k - 1, w);
    }

    /// Unnormalized piece masses `width * exp(lw - max lw)`.
    pub fn masses(&self) -> Vec<f64> {
        let m = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_weights
            .iter()
            .enumerate()
            .map(|(i, &lw)| (self.edges[i + 1] - self.edges[i]) * (lw - m).exp())
            .collect()
    }

    /// Probability of each piece.
    pub fn probabilities(&self) -> Vec<f64> {
        let m = self.masses();
        let total: f64 = m.iter().sum();
        if total > 0.0 {
            m.iter().map(|x| x / total).collect()
        } else {
            // single-point domain: all mass on the first piece
            let mut p = vec![0.0; m.len()];
            p[0] = 1.0;
            p
        }
    }

    /// Density value at `x` (zero outside the domain).
    pub fn density(&self, x: f64) -> f64 {
        let d = self.domain();
        if !d.contains(x) || d.width() == 0.0 {
            return 0.0;
        }
        let k = self.piece_of(x);
        self.probabilities()[k] / (self.edges[k + 1] - self.edges[k])
    }

    /// Probability of `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let p = self.probabilities();
        let mut total = 0.0;
        for (k, &pk) in p.iter().enumerate() {
            let (lo, hi) = (self.edges[k], self.edges[k + 1]);
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            if hi > lo {
                total += pk * overlap / (hi - lo);
            }
        }
        total
    }

    /// Exact draw: piece by mass, then uniform within it.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = p.len() - 1;
        for (i, &pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                k = i;
                break;
            }
        }
        let (lo, hi) = (self.edges[k], self.edges[k + 1]);
        lo + rng.random::<f64>() * (hi - lo)
    }

    /// Draw from `(1 - mu) p + mu * uniform`.
    pub fn sample_mixed<R: Rng>(&self, rng: &mut R, mu: f64) -> f64 {
        if mu > 0.0 && rng.random::<f64>() < mu {
            let d = self.domain();
            d.lo + rng.random::<f64>() * d.width()
        } else {
            self.sample(rng)
        }
    }

    /// Probability of `[a, b]` under the `mu`-uniform mixture.
    pub fn mixed_mass_between(&self, a: f64, b: f64, mu: f64) -> f64 {
        let d = self.domain();
        let uniform = if d.width() > 0.0 {
            ((b.min(d.hi) - a.max(d.lo)).max(0.0)) / d.width()
        } else {
            1.0
        };
        (1.0 - mu) * self.mass_between(a, b) + mu * uniform
    }

    /// Adds `delta` to the log-weight on `[a, b]`, splitting pieces at the ends.
    pub fn add_on(&mut self, a: f64, b: f64, delta: f64) {
        self.insert(a);
        self.insert(b);
        for k in 0..self.piece_count() {
            let mid = 0.5 * (self.edges[k] + self.edges[k + 1]);
            if mid >= a && mid <= b {
                self.log_weights[k] += delta;
            }
        }
    }

    /// Merges the breakpoints of `table` and adds `lambda * (1 - loss)` per piece.
    pub fn add_utility(&mut self, table: &PieceTable, lambda: f64) {
        for &b in &table.breakpoints {
            self.insert(b);
        }
        for k in 0..self.piece_count() {
            let mid = 0.5 * (self.edges[k] + self.edges[k + 1]);
            self.log_weights[k] += lambda * (1.0 - table.loss_at(mid));
        }
    }
}

/// Outcome of one learner round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub rho: f64,
    pub loss: f64,
    pub interval: Option<FeedbackInterval>,
}

fn require_threshold(family: Family) -> Result<()> {
    if family == Family::Threshold {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "full information needs the threshold family, got {}; use semi-bandit feedback",
            family.name()
        )))
    }
}

/// One round of continuous exponential weights with the whole loss function
/// observed. Returns the played parameter and its loss.
pub fn full_info_round<R: Rng>(
    state: &mut PiecewiseDensity,
    instance: &SslInstance,
    family: Family,
    labeler: Objective,
    lambda: f64,
    rng: &mut R,
) -> Result<(f64, f64, PieceTable)> {
    check_lambda(lambda)?;
    require_threshold(family)?;
    let rho = state.sample(rng);
    let table = threshold_pieces(instance, labeler)?;
    let loss = table.loss_at(rho);
    state.add_utility(&table, lambda);
    Ok((rho, loss, table))
}

/// Semi-bandit settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiBanditConfig {
    pub lambda: f64,
    pub eps: f64,
    pub scan_points: usize,
    /// Weight of the optional uniform exploration mixture.
    pub mixing: f64,
}

impl Default for SemiBanditConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            eps: DEFAULT_EPS,
            scan_points: DEFAULT_SCAN_POINTS,
            mixing: 0.0,
        }
    }
}

/// Result of one semi-bandit round.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiBanditRound {
    pub rho: f64,
    pub loss: f64,
    pub interval: FeedbackInterval,
    /// Importance-weighted loss estimate on the interval.
    pub estimate: f64,
}

/// Feedback interval of the family around `rho`, clipped to `domain`.
pub fn observe(
    instance: &SslInstance,
    family: Family,
    objective: Objective,
    domain: Domain,
    rho: f64,
    cfg: &SemiBanditConfig,
) -> Result<(FeedbackInterval, f64)> {
    match family {
        Family::Threshold => {
            let table = threshold_pieces(instance, objective)?;
            Ok((threshold_feedback_interval(&table, domain, rho), table.loss_at(rho)))
        }
        Family::Gaussian | Family::Polynomial { .. } => {
            let sweep = SweepConfig {
                family,
                domain: Some(domain),
                eps: cfg.eps,
                scan_points: cfg.scan_points,
            };
            let iv = feedback_interval(instance, objective, rho, &sweep)?;
            let loss = objective.loss(instance, &family.at(rho)?)?;
            Ok((iv, loss))
        }
        Family::Multi { .. } => Err(Error::Unsupported("semi-bandit feedback needs a scalar family".into())),
    }
}

/// `loss / P(interval)` on a nondegenerate interval, zero otherwise.
pub fn importance_estimate(loss: f64, interval_mass: f64) -> f64 {
    if interval_mass > 0.0 {
        loss / interval_mass
    } else {
        0.0
    }
}

/// One semi-bandit round: sample, observe the feedback interval, and move
/// log-weight `-lambda * l_hat` onto that interval. The state is untouched
/// when the feedback computation fails.
pub fn semi_bandit_round<R: Rng>(
    state: &mut PiecewiseDensity,
    instance: &SslInstance,
    family: Family,
    objective: Objective,
    cfg: &SemiBanditConfig,
    rng: &mut R,
) -> Result<SemiBanditRound> {
    check_lambda(cfg.lambda)?;
    let rho = state.sample_mixed(rng, cfg.mixing);
    let (interval, loss) = observe(instance, family, objective, state.domain(), rho, cfg)?;
    let mass = if interval.width() > 0.0 {
        state.mixed_mass_between(interval.lo, interval.hi, cfg.mixing)
    } else {
        0.0
    };
    let estimate = importance_estimate(loss, mass);
    if mass > 0.0 && estimate != 0.0 {
        state.add_on(interval.lo, interval.hi, -cfg.lambda * estimate);
    }
    Ok(SemiBanditRound {
        rho,
        loss,
        interval,
        estimate,
    })
}

/// Monte-Carlo mean of the semi-bandit estimate at each probe point with
/// the state held fixed. Feedback intervals are memoized, since the
/// interval and loss depend only on the interval the draw falls in.
pub fn estimator_means<R: Rng>(
    state: &PiecewiseDensity,
    instance: &SslInstance,
    family: Family,
    objective: Objective,
    cfg: &SemiBanditConfig,
    probes: &[f64],
    rounds: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut cache: Vec<(FeedbackInterval, f64)> = Vec::new();
    let mut sums = vec![0.0; probes.len()];
    for _ in 0..rounds {
        let rho = state.sample_mixed(rng, cfg.mixing);
        let hit = cache.iter().position(|(iv, _)| rho > iv.lo && rho < iv.hi);
        let k = match hit {
            Some(k) => k,
            None => {
                cache.push(observe(instance, family, objective, state.domain(), rho, cfg)?);
                cache.len() - 1
            }
        };
        let (iv, loss) = &cache[k];
        let mass = if iv.width() > 0.0 {
            state.mixed_mass_between(iv.lo, iv.hi, cfg.mixing)
        } else {
            0.0
        };
        let est = importance_estimate(*loss, mass);
        for (s, &x) in sums.iter_mut().zip(probes) {
            if iv.contains(x) {
                *s += est;
            }
        }
    }
    Ok(sums.into_iter().map(|s| s / rounds as f64).collect())
}

/// How the learner observes each round's loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackMode {
    Full,
    SemiBandit,
}

/// Settings of an online run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlineConfig {
    pub family: Family,
    pub objective: Objective,
    pub mode: FeedbackMode,
    pub semi_bandit: SemiBanditConfig,
    /// Parameter domain; the first instance's default when `None`.
    pub domain: Option<Domain>,
}

/// Learner trace and final state.
#[derive(Clone, Debug)]
pub struct OnlineRun {
    pub domain: Domain,
    pub rounds: Vec<RoundRecord>,
    pub state: PiecewiseDensity,
    /// Loss tables of full-information rounds, kept for replay.
    pub tables: Vec<PieceTable>,
}

pub fn run_domain(instances: &[SslInstance], family: Family, domain: Option<Domain>) -> Result<Domain> {
    match domain {
        Some(d) => Ok(d),
        None => {
            let first = instances.first().ok_or_else(|| Error::Param("empty instance stream".into()))?;
            scalar_domain(first, family)
        }
    }
}

/// Runs the learner over `instances` with the RNG stream derived from `seed`.
pub fn run_online(instances: &[SslInstance], cfg: &OnlineConfig, seed: u64) -> Result<OnlineRun> {
    let domain = run_domain(instances, cfg.family, cfg.domain)?;
    let mut state = PiecewiseDensity::uniform(domain);
    let mut rng = stream_rng(seed, 0x6c65_6172);
    let mut rounds = Vec::with_capacity(instances.len());
    let mut tables = Vec::new();
    for (t, inst) in instances.iter().enumerate() {
        let wrap = |e: Error| Error::Round {
            round: t,
            source: Box::new(e),
        };
        match cfg.mode {
            FeedbackMode::Full => {
                let (rho, loss, table) =
                    full_info_round(&mut state, inst, cfg.family, cfg.objective, cfg.semi_bandit.lambda, &mut rng)
                        .map_err(wrap)?;
                tables.push(table);
                rounds.push(RoundRecord {
                    round: t,
                    rho,
                    loss,
                    interval: None,
                });
            }
            FeedbackMode::SemiBandit => {
                let r = semi_bandit_round(&mut state, inst, cfg.family, cfg.objective, &cfg.semi_bandit, &mut rng)
                    .map_err(wrap)?;
                rounds.push(RoundRecord {
                    round: t,
                    rho: r.rho,
                    loss: r.loss,
                    interval: Some(r.interval),
                });
            }
        }
    }
    Ok(OnlineRun {
        domain,
        rounds,
        state,
        tables,
    })
}

/// Baseline playing a uniformly random parameter every round.
pub fn run_random_baseline(
    instances: &[SslInstance],
    family: Family,
    objective: Objective,
    domain: Domain,
    seed: u64,
) -> Result<Vec<RoundRecord>> {
    let mut rng = stream_rng(seed, 0x7261_6e64);
    instances
        .iter()
        .enumerate()
        .map(|(t, inst)| {
            let rho = domain.lo + rng.random::<f64>() * domain.width();
            let loss = loss_at(inst, family, objective, rho)?;
            Ok(RoundRecord {
                round: t,
                rho,
                loss,
                interval: None,
            })
        })
        .collect()
}

/// Loss of a scalar family at `rho`; the threshold family accepts any real.
pub fn loss_at(instance: &SslInstance, family: Family, objective: Objective, rho: f64) -> Result<f64> {
    match family {
        Family::Threshold => crate::feedback::threshold_loss(instance, objective, rho),
        _ => objective.loss(instance, &family.at(rho)?),
    }
}

/// Regret summary of a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretTrace {
    pub rounds: Vec<RoundRecord>,
    /// Cumulative best-in-hindsight loss after each round.
    pub best_loss_so_far: Vec<f64>,
    /// `(sum of incurred losses - best_loss_so_far) / t` after each round.
    pub avg_regret: Vec<f64>,
    pub cumulative_loss: f64,
    pub best_loss: f64,
    pub best_rho: f64,
    pub regret: f64,
    /// Grid used for weighted kernels: domain and point count.
    pub grid: Option<(Domain, usize)>,
}

/// Candidate parameters covering every distinct loss value: domain ends
/// and midpoints between consecutive merged breakpoints inside the domain.
fn threshold_candidates(tables: &[PieceTable], domain: Domain) -> Vec<f64> {
    let mut cuts: Vec<f64> = tables
        .iter()
        .flat_map(|t| t.breakpoints.iter().copied())
        .filter(|&b| b > domain.lo && b < domain.hi)
        .collect();
    cuts.push(domain.lo);
    cuts.push(domain.hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = vec![domain.lo];
    out.extend(cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.extend(cuts.iter().skip(1).copied());
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Best parameter in hindsight after each prefix, over a loss matrix
/// `losses[t][c]`. Ties keep the smallest candidate index.
fn prefix_best(losses: &[Vec<f64>], candidates: &[f64]) -> (Vec<f64>, f64) {
    let mut sums = vec![0.0; candidates.len()];
    let mut best = Vec::with_capacity(losses.len());
    let mut arg = 0;
    for row in losses {
        for (s, l) in sums.iter_mut().zip(row) {
            *s += l;
        }
        arg = 0;
        for (c, &s) in sums.iter().enumerate() {
            if s < sums[arg] {
                arg = c;
            }
        }
        best.push(sums[arg]);
    }
    (best, candidates.get(arg).copied().unwrap_or(f64::NAN))
}

/// Fills in best-in-hindsight and the average-regret curve. Exact over the
/// merged threshold pieces; over `grid_points` evenly spaced parameters for
/// weighted kernels.
pub fn compute_regret(
    rounds: &[RoundRecord],
    instances: &[SslInstance],
    family: Family,
    labeler: Objective,
    domain: Domain,
    grid_points: usize,
) -> Result<RegretTrace> {
    if rounds.len() != instances.len() {
        return Err(Error::Param(format!(
            "{} rounds but {} instances",
            rounds.len(),
            instances.len()
        )));
    }
    let (losses, candidates, grid) = match family {
        Family::Threshold => {
            let tables = instances
                .iter()
                .map(|i| threshold_pieces(i, labeler))
                .collect::<Result<Vec<_>>>()?;
            let cand = threshold_candidates(&tables, domain);
            let losses = tables
                .iter()
                .map(|t| cand.iter().map(|&c| t.loss_at(c)).collect())
                .collect();
            (losses, cand, None)
        }
        _ => {
            let count = grid_points.max(2);
            let step = domain.width() / (count - 1) as f64;
            let cand: Vec<f64> = if step > 0.0 {
                parameter_grid(domain, step)
            } else {
                vec![domain.lo]
            };
            let losses = instances
                .iter()
                .map(|i| cand.iter().map(|&c| loss_at(i, family, labeler, c)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            (losses, cand, Some((domain, count)))
        }
    };
    let (best_loss_so_far, best_rho) = prefix_best(&losses, &candidates);
    let mut cum = 0.0;
    let mut avg_regret = Vec::with_capacity(rounds.len());
    for (t, r) in rounds.iter().enumerate() {
        cum += r.loss;
        avg_regret.push((cum - best_loss_so_far[t]) / (t + 1) as f64);
    }
    let best_loss = best_loss_so_far.last().copied().unwrap_or(0.0);
    Ok(RegretTrace {
        rounds: rounds.to_vec(),
        best_loss_so_far,
        avg_regret,
        cumulative_loss: cum,
        best_loss,
        best_rho,
        regret: cum - best_loss,
        grid,
    })
}

/// Exponential weights over the cell centers of a grid on `[0, 1]^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    pub dim: usize,
    /// Cell centers per axis.
    pub axis: Vec<f64>,
    pub log_weights: Vec<f64>,
}

/// Per-axis grid resolution `T^{-1/2}`.
pub fn default_resolution(horizon: usize) -> f64 {
    1.0 / (horizon.max(1) as f64).sqrt()
}

impl GridDensity {
    pub fn new(dim: usize, resolution: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_GRID_DIM {
            return Err(Error::Param(format!(
                "grid learner supports 1 to {MAX_GRID_DIM} weights, got {dim}"
            )));
        }
        if !(resolution > 0.0 && resolution <= 1.0) {
            return Err(Error::Param(format!("grid resolution {resolution} must lie in (0, 1]")));
        }
        let k = (1.0 / resolution - 1e-9).ceil().max(1.0) as usize;
        let axis = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
        Ok(Self {
            dim,
            axis,
            log_weights: vec![0.0; k.pow(dim as u32)],
        })
    }

    pub fn cell_count(&self) -> usize {
        self.log_weights.len()
    }

    /// Center of cell `c`, first coordinate varying slowest.
    pub fn center(&self, c: usize) -> Vec<f64> {
        let k = self.axis.len();
        let mut out = vec![0.0; self.dim];
        let mut rem = c;
        for d in (0..self.dim).rev() {
            out[d] = self.axis[rem % k];
            rem /= k;
        }
        out
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let m = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|&x| (x - m).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, &x) in self.log_weights.iter().enumerate() {
            if x > self.log_weights[best] {
                best = c;
            }
        }
        best
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (c, &pc) in p.iter().enumerate() {
            acc += pc;
            if u < acc {
                return c;
            }
        }
        p.len() - 1
    }
}

fn multi_cell_losses(state: &GridDensity, instance: &SslInstance, degree: u32, labeler: Objective) -> Result<Vec<f64>> {
    (0..state.cell_count())
        .map(|c| {
            labeler.loss(
                instance,
                &KernelSpec::MultiPolynomial {
                    rho: state.center(c),
                    degree,
                },
            )
        })
        .collect()
}

fn multi_update<R: Rng>(state: &mut GridDensity, losses: &[f64], lambda: f64, rng: &mut R) -> usize {
    let cell = state.sample(rng);
    for (lw, l) in state.log_weights.iter_mut().zip(losses) {
        *lw += lambda * (1.0 - l);
    }
    cell
}

/// One grid round for the multi-metric family: play a sampled cell center,
/// then add `lambda * (1 - loss)` at every cell.
pub fn multi_param_round<R: Rng>(
    state: &mut GridDensity,
    instance: &SslInstance,
    degree: u32,
    labeler: Objective,
    lambda: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    check_lambda(lambda)?;
    let losses = multi_cell_losses(state, instance, degree, labeler)?;
    let cell = multi_update(state, &losses, lambda, rng);
    Ok((state.center(cell), losses[cell]))
}

/// Trace of a multi-metric grid run with best-cell-in-hindsight regret.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiRun {
    pub points: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub best_loss_so_far: Vec<f64>,
    pub avg_regret: Vec<f64>,
    pub best_point: Vec<f64>,
    pub state: GridDensity,
}

/// Full-information grid learner over `instances`; the weight dimension is
/// one more than the first instance's similarity count.
pub fn run_multi_online(
    instances: &[SslInstance],
    degree: u32,
    labeler: Objective,
    lambda: f64,
    resolution: f64,
    seed: u64,
) -> Result<MultiRun> {
    check_lambda(lambda)?;
    let first = instances.first().ok_or_else(|| Error::Param("empty instance stream".into()))?;
    let mut state = GridDensity::new(first.metrics().similarities().len() + 1, resolution)?;
    let mut rng = stream_rng(seed, 0x6d75_6c74);
    let mut table = Vec::with_capacity(instances.len());
    let (mut points, mut losses) = (Vec::new(), Vec::new());
    for (t, inst) in instances.iter().enumerate() {
        let cell_losses = multi_cell_losses(&state, inst, degree, labeler).map_err(|e| Error::Round {
            round: t,
            source: Box::new(e),
        })?;
        let cell = multi_update(&mut state, &cell_losses, lambda, &mut rng);
        points.push(state.center(cell));
        losses.push(cell_losses[cell]);
        table.push(cell_losses);
    }
    let cells: Vec<f64> = (0..state.cell_count()).map(|c| c as f64).collect();
    let (best_loss_so_far, best) = prefix_best(&table, &cells);
    let mut cum = 0.0;
    let avg_regret = losses
        .iter()
        .enumerate()
        .map(|(t, l)| {
            cum += l;
            (cum - best_loss_so_far[t]) / (t + 1) as f64
        })
        .collect();
    Ok(MultiRun {
        points,
        losses,
        best_loss_so_far,
        avg_regret,
        best_point: state.center(best as usize),
        state,
    })
}
