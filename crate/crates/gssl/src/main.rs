//! `gssl` command-line driver.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gssl::active::{active_pipeline_loss, random_query_loss};
use gssl::batch::{erm_threshold, erm_weighted_grid, gap_at};
use gssl::feedback::{feedback_interval, parameter_grid, threshold_pieces, SweepConfig, DEFAULT_SCAN_POINTS};
use gssl::instances::{
    make_sigma_shattering_fixture, make_threshold_oscillation_fixture, make_threshold_shattering_family,
    ClusterParams, InstanceStream, SmoothedParams, SslInstance, StreamSource,
};
use gssl::kernels::{scalar_domain, Domain, Family};
use gssl::labeling::Objective;
use gssl::online::{
    compute_regret, default_resolution, loss_at, run_domain, run_multi_online, run_online, run_random_baseline,
    FeedbackMode, OnlineConfig, SemiBanditConfig, DEFAULT_REGRET_GRID,
};
use gssl::rng::stream_rng;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] gssl::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Run(gssl::Error::Unsupported(_)) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "gssl", version, about = "Learn graph hyperparameters for semi-supervised label propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Loss as a function of the graph parameter on one instance.
    Sweep(SweepArgs),
    /// Online parameter learning over an instance stream.
    Online(OnlineArgs),
    /// Empirical risk minimization over a sample of instances.
    Erm(ErmArgs),
    /// Budgeted active learning along a parameter grid.
    Active(ActiveArgs),
    /// Write synthetic or fixture instances.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Threshold,
    Polynomial,
    Gaussian,
    Multi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Harmonic,
    Mincut,
    LocalGlobal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    #[value(alias = "full-info")]
    Full,
    SemiBandit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    None,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FixtureArg {
    /// Threshold instance with oscillating harmonic loss (`--r`).
    #[value(alias = "lemma-b1")]
    Oscillation,
    /// Threshold instances shattered by 2^m thresholds (`--m`, directory output).
    ThresholdShattering,
    /// Gaussian-kernel pair construction (`--pairs`, `--spacing`).
    SigmaShattering,
    /// Clustered instances with noisy distances (`--T` files).
    Smoothed,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Threshold)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Harmonic)]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = gssl::online::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Root and boundary tolerance of feedback intervals.
    #[arg(long, default_value_t = gssl::feedback::DEFAULT_EPS)]
    eps: f64,
    /// Number of rounds or synthetic instances.
    #[arg(long = "T", default_value_t = 50)]
    rounds: usize,
    /// Parameter grid `lo:hi:step`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridSpec>,
    #[arg(long, default_value_t = 2)]
    budget: usize,
    #[arg(long, value_enum, default_value_t = BaselineArg::None)]
    baseline: BaselineArg,
    /// Instance file (.json or .csv).
    #[arg(long, conflicts_with = "instances")]
    instance: Option<PathBuf>,
    /// Directory of instance files, or a comma-separated file list.
    #[arg(long)]
    instances: Option<String>,
    /// Random sub-instance size drawn per round from file instances.
    #[arg(long)]
    subset: Option<usize>,
    /// Points per synthetic instance.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Labeled points per synthetic instance.
    #[arg(long, default_value_t = 4)]
    labeled: usize,
    /// Polynomial kernel degree.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// Local-global smoothing weight.
    #[arg(long, default_value_t = gssl::labeling::DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Parameters at which feedback intervals are reported.
    #[arg(long, value_delimiter = ',')]
    probe: Vec<f64>,
    /// Output path for the probe intervals; standard output when absent.
    #[arg(long)]
    intervals: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OnlineArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = ModeArg::SemiBandit)]
    mode: ModeArg,
    /// Uniform exploration weight mixed into semi-bandit sampling.
    #[arg(long, default_value_t = 0.0)]
    mixing: f64,
}

#[derive(Args, Debug)]
struct ErmArgs {
    #[command(flatten)]
    common: Common,
    /// Held-out instances (directory or file list) for a test loss column.
    #[arg(long)]
    test: Option<String>,
}

#[derive(Args, Debug)]
struct ActiveArgs {
    #[command(flatten)]
    common: Common,
    /// Bandwidth grid `lo:hi:step`; overrides `--grid`.
    #[arg(long, value_parser = parse_grid)]
    sigma_grid: Option<GridSpec>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = FixtureArg::Smoothed)]
    fixture: FixtureArg,
    /// Oscillation points of the oscillation fixture.
    #[arg(long, value_delimiter = ',')]
    r: Vec<f64>,
    /// Instances in the threshold-shattering family.
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Pair count of the sigma-shattering fixture.
    #[arg(long, default_value_t = 2)]
    pairs: usize,
    /// Distance spacing of the sigma-shattering fixture.
    #[arg(long, default_value_t = 0.003)]
    spacing: f64,
    /// Fixture node count; the minimum when absent.
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct GridSpec {
    lo: f64,
    hi: f64,
    step: f64,
}

impl GridSpec {
    fn points(&self) -> Vec<f64> {
        parameter_grid(Domain::new(self.lo, self.hi), self.step)
    }
}

fn parse_grid(s: &str) -> std::result::Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:step, got {s:?}"));
    }
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    let g = GridSpec {
        lo: num(parts[0])?,
        hi: num(parts[1])?,
        step: num(parts[2])?,
    };
    if !(g.step > 0.0) || !(g.hi >= g.lo) || !g.lo.is_finite() || !g.hi.is_finite() {
        return Err(format!("need finite lo <= hi and step > 0, got {s:?}"));
    }
    Ok(g)
}

impl Common {
    fn family(&self) -> Family {
        match self.family {
            FamilyArg::Threshold => Family::Threshold,
            FamilyArg::Polynomial => Family::Polynomial { degree: self.degree },
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Multi => Family::Multi { degree: self.degree },
        }
    }

    fn objective(&self) -> Objective {
        match self.objective {
            ObjectiveArg::Harmonic => Objective::Harmonic,
            ObjectiveArg::Mincut => Objective::MinCut,
            ObjectiveArg::LocalGlobal => Objective::LocalGlobal { alpha: self.alpha },
        }
    }

    fn synthetic(&self) -> SmoothedParams {
        SmoothedParams {
            n: self.n,
            n_labeled: self.labeled,
            clusters: ClusterParams::default(),
            two_metric: matches!(self.family, FamilyArg::Polynomial | FamilyArg::Multi),
            ..SmoothedParams::default()
        }
    }

    /// `count` instances: files cycled in order, or a synthetic stream.
    fn stream(&self, count: usize) -> CliResult<Vec<SslInstance>> {
        let paths = match (&self.instance, &self.instances) {
            (Some(p), _) => Some(vec![p.clone()]),
            (None, Some(list)) => Some(expand_paths(list)?),
            (None, None) => None,
        };
        let source = match paths {
            Some(paths) => StreamSource::Files {
                paths,
                subset: self.subset,
                seed: self.seed,
            },
            None => StreamSource::Synthetic {
                seed: self.seed,
                params: self.synthetic(),
            },
        };
        Ok(InstanceStream { source, count }.collect()?)
    }

    /// Every file instance once, or `--T` synthetic instances.
    fn sample(&self) -> CliResult<Vec<SslInstance>> {
        let count = match (&self.instance, &self.instances) {
            (Some(_), _) => 1,
            (None, Some(list)) => expand_paths(list)?.len(),
            (None, None) => self.rounds,
        };
        self.stream(count)
    }

    fn single(&self) -> CliResult<SslInstance> {
        Ok(self.stream(1)?.remove(0))
    }

    fn scalar_family(&self, command: &str) -> CliResult<Family> {
        match self.family() {
            Family::Multi { .. } => Err(CliError::Usage(format!(
                "{command} takes a scalar family (threshold, polynomial or gaussian); multi is supported by `online --mode full`"
            ))),
            f => Ok(f),
        }
    }
}

fn expand_paths(list: &str) -> CliResult<Vec<PathBuf>> {
    let p = Path::new(list);
    if p.is_dir() {
        let rd = std::fs::read_dir(p).map_err(|source| gssl::Error::Io {
            path: p.to_path_buf(),
            source,
        })?;
        let mut files: Vec<PathBuf> = rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|f| matches!(f.extension().and_then(|e| e.to_str()), Some("json" | "csv")))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::Usage(format!("no .json or .csv instance files in {}", p.display())));
        }
        Ok(files)
    } else {
        let files: Vec<PathBuf> = list.split(',').filter(|s| !s.is_empty()).map(PathBuf::from).collect();
        if files.is_empty() {
            return Err(CliError::Usage("empty instance list".into()));
        }
        Ok(files)
    }
}

/// Worker count: `GSSL_THREADS` capped by the available parallelism.
fn workers() -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("GSSL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(k) => k.clamp(1, avail.max(1)),
        None => avail,
    }
}

/// Order-preserving parallel map over contiguous chunks.
fn par_map<T, U, F>(items: &[T], f: F) -> CliResult<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> gssl::Result<U> + Sync,
{
    let k = workers().min(items.len()).max(1);
    let chunk = items.len().div_ceil(k).max(1);
    let parts: Vec<gssl::Result<Vec<U>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                let f = &f;
                s.spawn(move || part.iter().enumerate().map(|(i, x)| f(c * chunk + i, x)).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// CSV sink on `--out` or standard output.
struct Sink {
    name: String,
    inner: csv::Writer<Box<dyn Write>>,
}

impl Sink {
    fn open(path: Option<&Path>) -> CliResult<Self> {
        let (name, w): (String, Box<dyn Write>) = match path {
            Some(p) => {
                let f = std::fs::File::create(p).map_err(|source| CliError::Write {
                    path: p.display().to_string(),
                    source,
                })?;
                (p.display().to_string(), Box::new(std::io::BufWriter::new(f)))
            }
            None => ("<stdout>".into(), Box::new(std::io::stdout())),
        };
        Ok(Self {
            name,
            inner: csv::Writer::from_writer(w),
        })
    }

    fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(|e| self.error(e.into()))
    }

    fn finish(mut self) -> CliResult<()> {
        self.inner.flush().map_err(|e| self.error(e))
    }

    fn error(&self, source: std::io::Error) -> CliError {
        CliError::Write {
            path: self.name.clone(),
            source,
        }
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn param_name(family: Family) -> &'static str {
    match family {
        Family::Threshold => "r",
        Family::Polynomial { .. } => "alpha",
        _ => "sigma",
    }
}

fn default_grid(instance: &SslInstance, family: Family) -> CliResult<Vec<f64>> {
    let d = scalar_domain(instance, family)?;
    Ok(if d.width() > 0.0 {
        parameter_grid(d, d.width() / 200.0)
    } else {
        vec![d.lo]
    })
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let c = &a.common;
    let family = c.scalar_family("sweep")?;
    let objective = c.objective();
    let inst = c.single()?;
    let mut out = Sink::open(c.out.as_deref())?;
    if family == Family::Threshold {
        let table = threshold_pieces(&inst, objective)?;
        out.row(["piece_lo", "piece_hi", "loss"])?;
        for i in 0..table.piece_count() {
            let (lo, hi) = table.bounds(i);
            out.row([num(lo), num(hi), num(table.piece_losses[i])])?;
        }
    } else {
        let grid = match c.grid {
            Some(g) => g.points(),
            None => default_grid(&inst, family)?,
        };
        let losses = par_map(&grid, |_, &x| loss_at(&inst, family, objective, x))?;
        out.row([param_name(family), "loss"])?;
        for (x, l) in grid.iter().zip(losses) {
            out.row([num(*x), num(l)])?;
        }
    }
    out.finish()?;
    if !a.probe.is_empty() {
        let cfg = SweepConfig {
            family,
            domain: c.grid.map(|g| Domain::new(g.lo, g.hi)),
            eps: c.eps,
            scan_points: DEFAULT_SCAN_POINTS,
        };
        let mut iv_out = Sink::open(a.intervals.as_deref())?;
        iv_out.row(["probe", "lo", "hi", "lo_clamped", "hi_clamped", "boundary"])?;
        let ivs = if family == Family::Threshold {
            let table = threshold_pieces(&inst, objective)?;
            let domain = cfg.domain(&inst)?;
            a.probe
                .iter()
                .map(|&p| gssl::feedback::threshold_feedback_interval(&table, domain, p))
                .collect()
        } else {
            par_map(&a.probe, |_, &p| feedback_interval(&inst, objective, p, &cfg))?
        };
        for (p, iv) in a.probe.iter().zip(ivs) {
            iv_out.row([
                num(*p),
                num(iv.lo),
                num(iv.hi),
                iv.lo_clamped.to_string(),
                iv.hi_clamped.to_string(),
                iv.boundary.to_string(),
            ])?;
        }
        iv_out.finish()?;
    }
    Ok(())
}

fn cmd_online(a: &OnlineArgs) -> CliResult<()> {
    let c = &a.common;
    let family = c.family();
    let objective = c.objective();
    let mode = match a.mode {
        ModeArg::Full => FeedbackMode::Full,
        ModeArg::SemiBandit => FeedbackMode::SemiBandit,
    };
    match (family, mode) {
        (Family::Polynomial { .. } | Family::Gaussian, FeedbackMode::Full) => {
            return Err(CliError::Usage(format!(
                "full-information mode needs the threshold or multi family; run `--mode semi-bandit` for the {} family",
                family.name()
            )))
        }
        (Family::Multi { .. }, FeedbackMode::SemiBandit) => {
            return Err(CliError::Usage("the multi family needs `--mode full`".into()))
        }
        (Family::Multi { .. }, _) if c.baseline == BaselineArg::Random => {
            return Err(CliError::Usage("the random baseline needs a scalar family".into()))
        }
        _ => {}
    }
    if c.rounds == 0 {
        return Err(CliError::Usage("--T must be at least 1".into()));
    }
    let instances = c.stream(c.rounds)?;
    let mut out = Sink::open(c.out.as_deref())?;

    if let Family::Multi { degree } = family {
        let run = run_multi_online(&instances, degree, objective, c.lambda, default_resolution(c.rounds), c.seed)?;
        out.row(["round", "rho", "loss", "best_loss_so_far", "avg_regret"])?;
        for t in 0..run.losses.len() {
            let rho: Vec<String> = run.points[t].iter().map(|&x| num(x)).collect();
            out.row([
                (t + 1).to_string(),
                rho.join(" "),
                num(run.losses[t]),
                num(run.best_loss_so_far[t]),
                num(run.avg_regret[t]),
            ])?;
        }
        out.finish()?;
        let total: f64 = run.losses.iter().sum();
        let best = run.best_loss_so_far.last().copied().unwrap_or(0.0);
        println!(
            "summary: T={} mode=full family=multi cumulative_loss={} best_loss={} regret={} avg_regret={}",
            run.losses.len(),
            num(total),
            num(best),
            num(total - best),
            num(run.avg_regret.last().copied().unwrap_or(0.0))
        );
        return Ok(());
    }

    let domain = run_domain(&instances, family, c.grid.map(|g| Domain::new(g.lo, g.hi)))?;
    let cfg = OnlineConfig {
        family,
        objective,
        mode,
        semi_bandit: SemiBanditConfig {
            lambda: c.lambda,
            eps: c.eps,
            mixing: a.mixing,
            ..SemiBanditConfig::default()
        },
        domain: Some(domain),
    };
    let run = run_online(&instances, &cfg, c.seed)?;
    let trace = compute_regret(&run.rounds, &instances, family, objective, domain, DEFAULT_REGRET_GRID)?;
    let baseline = match c.baseline {
        BaselineArg::None => None,
        BaselineArg::Random => {
            let rounds = run_random_baseline(&instances, family, objective, domain, c.seed)?;
            Some(compute_regret(&rounds, &instances, family, objective, domain, DEFAULT_REGRET_GRID)?)
        }
    };
    let mut header = vec!["round", "rho", "loss", "best_loss_so_far", "avg_regret"];
    if baseline.is_some() {
        header.extend(["baseline_rho", "baseline_loss", "baseline_avg_regret"]);
    }
    out.row(header)?;
    for (t, r) in trace.rounds.iter().enumerate() {
        let mut row = vec![
            (t + 1).to_string(),
            num(r.rho),
            num(r.loss),
            num(trace.best_loss_so_far[t]),
            num(trace.avg_regret[t]),
        ];
        if let Some(b) = &baseline {
            row.extend([num(b.rounds[t].rho), num(b.rounds[t].loss), num(b.avg_regret[t])]);
        }
        out.row(row)?;
    }
    out.finish()?;
    let mut summary = format!(
        "summary: T={} mode={} family={} cumulative_loss={} best_loss={} best_rho={} regret={} avg_regret={}",
        trace.rounds.len(),
        match mode {
            FeedbackMode::Full => "full",
            FeedbackMode::SemiBandit => "semi-bandit",
        },
        family.name(),
        num(trace.cumulative_loss),
        num(trace.best_loss),
        num(trace.best_rho),
        num(trace.regret),
        num(trace.avg_regret.last().copied().unwrap_or(0.0)),
    );
    if let Some(b) = &baseline {
        summary.push_str(&format!(
            " baseline_avg_regret={}",
            num(b.avg_regret.last().copied().unwrap_or(0.0))
        ));
    }
    println!("{summary}");
    Ok(())
}

fn cmd_erm(a: &ErmArgs) -> CliResult<()> {
    let c = &a.common;
    let family = c.scalar_family("erm")?;
    let objective = c.objective();
    let train = c.sample()?;
    let (rho, loss) = if family == Family::Threshold {
        erm_threshold(&train, objective)?
    } else {
        let grid = match c.grid {
            Some(g) => g.points(),
            None => default_grid(&train[0], family)?,
        };
        erm_weighted_grid(&train, family, objective, &grid)?
    };
    let test = match &a.test {
        Some(list) => {
            let paths = expand_paths(list)?;
            let t = Common {
                instance: None,
                instances: Some(list.clone()),
                ..c.clone()
            };
            Some(t.stream(paths.len())?)
        }
        None => None,
    };
    let mut out = Sink::open(c.out.as_deref())?;
    match test {
        None => {
            out.row(["rho_star", "train_loss"])?;
            out.row([num(rho), num(loss)])?;
        }
        Some(test) => {
            let test_loss = if family == Family::Threshold {
                gap_at(&train, &test, objective, rho)?.test_loss
            } else {
                let ls = test
                    .iter()
                    .map(|i| loss_at(i, family, objective, rho))
                    .collect::<gssl::Result<Vec<_>>>()?;
                ls.iter().sum::<f64>() / ls.len() as f64
            };
            out.row(["rho_star", "train_loss", "test_loss", "gap"])?;
            out.row([num(rho), num(loss), num(test_loss), num(test_loss - loss)])?;
        }
    }
    out.finish()
}

fn cmd_active(a: &ActiveArgs) -> CliResult<()> {
    let c = &a.common;
    let family = match c.family {
        FamilyArg::Threshold => Family::Gaussian,
        _ => c.scalar_family("active")?,
    };
    let inst = c.single()?;
    let grid = match a.sigma_grid.or(c.grid) {
        Some(g) => g.points(),
        None => default_grid(&inst, family)?,
    };
    let with_random = c.baseline == BaselineArg::Random;
    let rows = par_map(&grid, |k, &x| {
        let spec = family.at(x)?;
        let active = active_pipeline_loss(&inst, &spec, c.budget)?;
        let random = if with_random {
            Some(random_query_loss(&inst, &spec, c.budget, &mut stream_rng(c.seed, k as u64))?.loss)
        } else {
            None
        };
        Ok((active, random))
    })?;
    let mut out = Sink::open(c.out.as_deref())?;
    let mut header = vec![param_name(family), "loss", "queries"];
    if with_random {
        header.push("random_loss");
    }
    out.row(header)?;
    for (x, (active, random)) in grid.iter().zip(rows) {
        let q: Vec<String> = active.queries.iter().map(|u| u.to_string()).collect();
        let mut row = vec![num(*x), num(active.loss), q.join(" ")];
        if let Some(r) = random {
            row.push(num(r));
        }
        out.row(row)?;
    }
    out.finish()
}

fn write_instance(inst: &SslInstance, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => Ok(inst.save_json(p)?),
        None => {
            println!("{}", inst.to_json());
            Ok(())
        }
    }
}

fn write_directory(insts: &[SslInstance], path: Option<&Path>) -> CliResult<()> {
    let dir = path.ok_or_else(|| CliError::Usage("this fixture writes several files; pass --out <directory>".into()))?;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    for (i, inst) in insts.iter().enumerate() {
        inst.save_json(&dir.join(format!("{i:04}.json")))?;
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let c = &a.common;
    let out = c.out.as_deref();
    match a.fixture {
        FixtureArg::Oscillation => {
            if a.r.is_empty() {
                return Err(CliError::Usage("oscillation needs --r with at least one value".into()));
            }
            let n = a.size.unwrap_or(a.r.len() + 5);
            write_instance(&make_threshold_oscillation_fixture(&a.r, n)?.instance, out)
        }
        FixtureArg::ThresholdShattering => {
            let fam = make_threshold_shattering_family(a.m)?;
            let insts: Vec<SslInstance> = fam.fixtures.into_iter().map(|f| f.instance).collect();
            write_directory(&insts, out)
        }
        FixtureArg::SigmaShattering => write_instance(&make_sigma_shattering_fixture(a.pairs, a.spacing)?, out),
        FixtureArg::Smoothed => {
            let stream = InstanceStream {
                source: StreamSource::Synthetic {
                    seed: c.seed,
                    params: c.synthetic(),
                },
                count: c.rounds.max(1),
            };
            let insts = stream.collect()?;
            if insts.len() == 1 {
                write_instance(&insts[0], out)
            } else {
                write_directory(&insts, out)
            }
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Online(a) => cmd_online(a),
        Command::Erm(a) => cmd_erm(a),
        Command::Active(a) => cmd_active(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.code())
        }
    }
}
