//! Empirical risk minimization over a sample of instances and train/test
//! gap reporting.

use crate::error::{Error, Result};
use crate::feedback::{threshold_loss, threshold_pieces, PieceTable};
use crate::instances::SslInstance;
use crate::kernels::Family;
use crate::labeling::Objective;
use crate::online::loss_at;

/// Sample sizes of the generalization report.
pub const REPORT_SIZES: [usize; 4] = [10, 20, 40, 80];

/// Merged candidate parameters: midpoints between consecutive distinct
/// breakpoints, then the largest breakpoint for the last piece.
pub fn merged_candidates(tables: &[PieceTable]) -> Vec<f64> {
    let mut b: Vec<f64> = tables.iter().flat_map(|t| t.breakpoints.iter().copied()).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    let mut out: Vec<f64> = b.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if let Some(&last) = b.last() {
        out.push(last);
    }
    out
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Threshold minimizing the average loss over `instances`, with its train
/// loss. Ties go to the leftmost piece.
pub fn erm_threshold(instances: &[SslInstance], labeler: Objective) -> Result<(f64, f64)> {
    if instances.is_empty() {
        return Err(Error::Param("ERM needs at least one instance".into()));
    }
    let tables = instances
        .iter()
        .map(|i| threshold_pieces(i, labeler))
        .collect::<Result<Vec<_>>>()?;
    let cands = merged_candidates(&tables);
    let mut best = (f64::NAN, f64::INFINITY);
    for &c in &cands {
        let l = mean(tables.iter().map(|t| t.loss_at(c)));
        if l < best.1 {
            best = (c, l);
        }
    }
    Ok(best)
}

/// Grid point minimizing the average loss; ties go to the smallest parameter.
pub fn erm_weighted_grid(
    instances: &[SslInstance],
    family: Family,
    objective: Objective,
    grid: &[f64],
) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::Param("ERM grid is empty".into()));
    }
    if instances.is_empty() {
        return Err(Error::Param("ERM needs at least one instance".into()));
    }
    let mut best = (f64::NAN, f64::INFINITY);
    for &x in grid {
        let losses = instances
            .iter()
            .map(|i| loss_at(i, family, objective, x))
            .collect::<Result<Vec<_>>>()?;
        let l = mean(losses.into_iter());
        if l < best.1 || (l == best.1 && x < best.0) {
            best = (x, l);
        }
    }
    Ok(best)
}

/// Train and test losses of one threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub train_size: usize,
    pub rho: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub gap: f64,
}

/// Average test loss of threshold `rho` against its train loss.
pub fn gap_at(train: &[SslInstance], test: &[SslInstance], labeler: Objective, rho: f64) -> Result<GapRow> {
    let eval = |set: &[SslInstance]| -> Result<f64> {
        let ls = set
            .iter()
            .map(|i| threshold_loss(i, labeler, rho))
            .collect::<Result<Vec<_>>>()?;
        Ok(mean(ls.into_iter()))
    };
    let train_loss = eval(train)?;
    let test_loss = eval(test)?;
    Ok(GapRow {
        train_size: train.len(),
        rho,
        train_loss,
        test_loss,
        gap: test_loss - train_loss,
    })
}

/// ERM on the first `T` training instances for each `T` in `sizes` that
/// the training set can supply, scored on the fixed test set.
pub fn generalization_report(
    train: &[SslInstance],
    test: &[SslInstance],
    labeler: Objective,
    sizes: &[usize],
) -> Result<Vec<GapRow>> {
    sizes
        .iter()
        .filter(|&&t| t > 0 && t <= train.len())
        .map(|&t| {
            let (rho, _) = erm_threshold(&train[..t], labeler)?;
            gap_at(&train[..t], test, labeler, rho)
        })
        .collect()
}
