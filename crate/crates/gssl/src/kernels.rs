//! Parametric graph construction from metric data.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::instances::{Label, SslInstance};

#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    /// `w = 1[d <= r]`.
    Threshold { r: f64 },
    /// `w = (s + alpha)^degree` on a similarity matrix.
    Polynomial { alpha: f64, degree: u32 },
    /// `w = exp(-d^2 / sigma^2)`.
    Gaussian { sigma: f64 },
    /// `w = (sum_i rho_i s_i + rho_p)^degree` over min-max normalized
    /// similarity matrices; `rho` holds `p - 1` weights and the offset.
    MultiPolynomial { rho: Vec<f64>, degree: u32 },
}

/// A kernel family indexed by one scalar parameter, or the multi-metric box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Threshold,
    Polynomial { degree: u32 },
    Gaussian,
    Multi { degree: u32 },
}

impl Family {
    /// Kernel at scalar parameter `rho`; not defined for the multi family.
    pub fn at(&self, rho: f64) -> Result<KernelSpec> {
        match *self {
            Family::Threshold => Ok(KernelSpec::Threshold { r: rho }),
            Family::Polynomial { degree } => Ok(KernelSpec::Polynomial { alpha: rho, degree }),
            Family::Gaussian => Ok(KernelSpec::Gaussian { sigma: rho }),
            Family::Multi { .. } => Err(Error::Unsupported("multi family takes a parameter vector".into())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Threshold => "threshold",
            Family::Polynomial { .. } => "polynomial",
            Family::Gaussian => "gaussian",
            Family::Multi { .. } => "multi",
        }
    }
}

/// Symmetric nonnegative weights with zero diagonal, plus node roles.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    w: DMatrix<f64>,
    degree: Vec<f64>,
    /// Natural log of the weights when available (Gaussian, polynomial), used for
    /// overflow-free rescaling; `-inf` on the diagonal.
    log_w: Option<DMatrix<f64>>,
    labeled: BTreeMap<usize, Label>,
    unlabeled: Vec<usize>,
}

impl WeightedGraph {
    /// Graph from an explicit weight matrix.
    pub fn from_weights(w: DMatrix<f64>, labeled: BTreeMap<usize, Label>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::Param("weight matrix must be square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let x = w[(i, j)];
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::Param(format!("weight ({i}, {j}) = {x} is not finite and nonnegative")));
                }
                if (x - w[(j, i)]).abs() > 1e-12 * x.abs().max(1.0) {
                    return Err(Error::Param(format!("weight matrix asymmetric at ({i}, {j})")));
                }
            }
            if w[(i, i)] != 0.0 {
                return Err(Error::Param(format!("nonzero self-loop at {i}")));
            }
        }
        if labeled.keys().any(|&u| u >= n) {
            return Err(Error::Param("labeled node out of range".into()));
        }
        let unlabeled = (0..n).filter(|u| !labeled.contains_key(u)).collect();
        let degree = (0..n).map(|i| w.row(i).sum()).collect();
        Ok(Self {
            w,
            degree,
            log_w: None,
            labeled,
            unlabeled,
        })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.w[(u, v)]
    }

    pub fn degree(&self, u: usize) -> f64 {
        self.degree[u]
    }

    pub fn log_weights(&self) -> Option<&DMatrix<f64>> {
        self.log_w.as_ref()
    }

    pub fn labeled(&self) -> &BTreeMap<usize, Label> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    /// Weights divided by a positive constant so the largest equals 1, and the
    /// natural log of that constant. Uses log-weights when present so
    /// entries that underflow in `w` keep their relative size.
    pub fn normalized_weights(&self) -> (DMatrix<f64>, f64) {
        let n = self.n();
        match &self.log_w {
            Some(lw) => {
                let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !m.is_finite() {
                    return (DMatrix::zeros(n, n), 0.0);
                }
                (lw.map(|x| (x - m).exp()), m)
            }
            None => {
                let m = self.w.iter().cloned().fold(0.0, f64::max);
                if m == 0.0 {
                    (self.w.clone(), 0.0)
                } else {
                    (self.w.map(|x| x / m), m.ln())
                }
            }
        }
    }

    /// Row-normalized transition weights `P = D^-1 W`; rows of zero degree
    /// stay zero. Computed from log-weights when present.
    pub fn transition(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut p = DMatrix::zeros(n, n);
        match &self.log_w {
            Some(lw) => {
                for i in 0..n {
                    let m = lw.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if !m.is_finite() {
                        continue;
                    }
                    let z: f64 = lw.row(i).iter().map(|&x| (x - m).exp()).sum();
                    for j in 0..n {
                        p[(i, j)] = (lw[(i, j)] - m).exp() / z;
                    }
                }
            }
            None => {
                for i in 0..n {
                    if self.degree[i] > 0.0 {
                        for j in 0..n {
                            p[(i, j)] = self.w[(i, j)] / self.degree[i];
                        }
                    }
                }
            }
        }
        p
    }

    /// Same weights with a different labeled set.
    pub fn with_labeled(&self, labeled: BTreeMap<usize, Label>) -> Result<Self> {
        let n = self.n();
        if labeled.keys().any(|&u| u >= n) {
            return Err(Error::Param("labeled node out of range".into()));
        }
        let mut g = self.clone();
        g.unlabeled = (0..n).filter(|u| !labeled.contains_key(u)).collect();
        g.labeled = labeled;
        Ok(g)
    }

    /// Same graph with every weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut g = self.clone();
        g.w *= c;
        for d in &mut g.degree {
            *d *= c;
        }
        if let Some(lw) = &mut g.log_w {
            let s = c.ln();
            lw.apply(|x| *x += s);
        }
        g
    }
}

fn off_diagonal(m: &DMatrix<f64>) -> impl Iterator<Item = f64> + '_ {
    let n = m.nrows();
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| m[(i, j)]))
}

/// Min-max normalization of the off-diagonal entries to [0, 1]; the
/// diagonal is set to zero.
pub fn min_max_normalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let lo = off_diagonal(m).fold(f64::INFINITY, f64::min);
    let hi = off_diagonal(m).fold(f64::NEG_INFINITY, f64::max);
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j || !(hi > lo) {
            0.0
        } else {
            (m[(i, j)] - lo) / (hi - lo)
        }
    })
}

fn check_base(u: usize, v: usize, base: f64) -> Result<()> {
    if base < 0.0 {
        Err(Error::NegativeKernelBase { u, v, base })
    } else {
        Ok(())
    }
}

/// Builds `G(rho)` for the instance.
pub fn build_graph(instance: &SslInstance, spec: &KernelSpec) -> Result<WeightedGraph> {
    let n = instance.n();
    let labeled = instance.labeled().clone();
    let mut log_w = None;
    let w = match spec {
        KernelSpec::Threshold { r } => {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(Error::Param(format!("threshold r = {r} must be finite and >= 0")));
            }
            let d = instance.distances()?;
            DMatrix::from_fn(n, n, |i, j| if i != j && d[(i, j)] <= *r { 1.0 } else { 0.0 })
        }
        KernelSpec::Gaussian { sigma } => {
            if !(sigma.is_finite() && *sigma > 0.0) {
                return Err(Error::Param(format!("sigma = {sigma} must be positive")));
            }
            let d = instance.distances()?;
            let s2 = sigma * sigma;
            let lw = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    f64::NEG_INFINITY
                } else {
                    -d[(i, j)] * d[(i, j)] / s2
                }
            });
            let w = lw.map(f64::exp);
            log_w = Some(lw);
            w
        }
        KernelSpec::Polynomial { alpha, degree } => {
            if *degree == 0 {
                return Err(Error::Param("polynomial degree must be >= 1".into()));
            }
            let s = *instance
                .metrics()
                .similarities()
                .first()
                .ok_or_else(|| Error::KindMismatch("polynomial kernel needs a similarity matrix".into()))?;
            let mut w = DMatrix::zeros(n, n);
            let mut lw = DMatrix::from_element(n, n, f64::NEG_INFINITY);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let base = s[(i, j)] + alpha;
                        check_base(i, j, base)?;
                        w[(i, j)] = base.powi(*degree as i32);
                        lw[(i, j)] = *degree as f64 * base.ln();
                    }
                }
            }
            log_w = Some(lw);
            w
        }
        KernelSpec::MultiPolynomial { rho, degree } => {
            if rho.len() < 2 {
                return Err(Error::Param("multi-metric kernel needs at least two entries in rho".into()));
            }
            if *degree == 0 {
                return Err(Error::Param("polynomial degree must be >= 1".into()));
            }
            let sims = instance.metrics().similarities();
            let p = rho.len();
            if sims.len() < p - 1 {
                return Err(Error::KindMismatch(format!(
                    "multi-metric kernel needs {} similarity matrices, instance has {}",
                    p - 1,
                    sims.len()
                )));
            }
            let norm: Vec<DMatrix<f64>> = sims[..p - 1].iter().map(|m| min_max_normalize(m)).collect();
            let mut w = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let base: f64 = norm.iter().zip(rho).map(|(m, r)| r * m[(i, j)]).sum::<f64>() + rho[p - 1];
                        check_base(i, j, base)?;
                        w[(i, j)] = base.powi(*degree as i32);
                    }
                }
            }
            w
        }
    };
    let mut g = WeightedGraph::from_weights(w, labeled)?;
    g.log_w = log_w;
    Ok(g)
}

/// Closed parameter interval; `degenerate` marks a single point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub degenerate: bool,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            degenerate: lo == hi,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamDomain {
    Interval(Domain),
    /// Per-coordinate intervals of the multi-metric weight vector.
    Box(Vec<Domain>),
}

/// Default Gaussian domain factors relative to the mean distance.
pub const GAUSSIAN_LO: f64 = 0.05;
pub const GAUSSIAN_HI: f64 = 10.0;

/// Gaussian domain `[c_lo * dbar, c_hi * dbar]` for mean off-diagonal distance `dbar`.
pub fn gaussian_domain(instance: &SslInstance, c_lo: f64, c_hi: f64) -> Result<Domain> {
    let d = instance.distances()?;
    let n = d.nrows();
    let count = (n * n.saturating_sub(1)) as f64;
    let mean = if count > 0.0 { off_diagonal(d).sum::<f64>() / count } else { 0.0 };
    Ok(Domain::new(c_lo * mean, c_hi * mean))
}

/// Parameter range covering every graph of interest for the family.
pub fn parameter_domain(instance: &SslInstance, family: Family) -> Result<ParamDomain> {
    match family {
        Family::Threshold => {
            let d = instance.distances()?;
            let lo = off_diagonal(d).fold(f64::INFINITY, f64::min);
            let hi = off_diagonal(d).fold(f64::NEG_INFINITY, f64::max);
            Ok(ParamDomain::Interval(Domain::new(lo, hi)))
        }
        Family::Gaussian => Ok(ParamDomain::Interval(gaussian_domain(instance, GAUSSIAN_LO, GAUSSIAN_HI)?)),
        Family::Polynomial { .. } => {
            let s = *instance
                .metrics()
                .similarities()
                .first()
                .ok_or_else(|| Error::KindMismatch("polynomial kernel needs a similarity matrix".into()))?;
            let hi = off_diagonal(s).fold(0.0, f64::max);
            Ok(ParamDomain::Interval(Domain::new(0.0, hi)))
        }
        Family::Multi { .. } => {
            let p = instance.metrics().similarities().len() + 1;
            Ok(ParamDomain::Box(vec![Domain::new(0.0, 1.0); p]))
        }
    }
}

/// Interval domain of a scalar family.
pub fn scalar_domain(instance: &SslInstance, family: Family) -> Result<Domain> {
    match parameter_domain(instance, family)? {
        ParamDomain::Interval(d) => Ok(d),
        ParamDomain::Box(_) => Err(Error::Unsupported("multi family has a box domain".into())),
    }
}
