//! Budgeted batch query selection by exhaustive expected-uncertainty
//! minimization, and the query-then-propagate pipeline.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::instances::{Label, SslInstance};
use crate::kernels::{build_graph, Family, KernelSpec, WeightedGraph};
use crate::labeling::{harmonic_solve, round_labels, zero_one_loss, SoftLabeling};

/// Largest number of (subset, labeling) pairs the exhaustive search visits.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Chosen queries and their expected residual uncertainty.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryPlan {
    pub queries: Vec<usize>,
    pub score: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `sum_i 1/2 - |1/2 - f_i|` over unlabeled nodes of `soft` not in `skip`.
pub fn uncertainty(soft: &SoftLabeling, skip: &[usize]) -> f64 {
    soft.f
        .iter()
        .filter(|(u, _)| !skip.contains(u))
        .map(|(_, &f)| 0.5 - (0.5 - f).abs())
        .sum()
}

/// Probability of the labeling `bits` of `subset` under the soft labels `f`.
pub fn labeling_probability(soft: &SoftLabeling, subset: &[usize], bits: usize) -> f64 {
    subset
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let f = soft.get(s).unwrap_or(0.5);
            if (bits >> k) & 1 == 1 {
                f
            } else {
                1.0 - f
            }
        })
        .product()
}

/// Expected uncertainty `u^S` of querying `subset`, and the total
/// probability of its labelings.
pub fn subset_score(graph: &WeightedGraph, soft: &SoftLabeling, subset: &[usize]) -> Result<(f64, f64)> {
    let mut score = 0.0;
    let mut total = 0.0;
    for bits in 0..(1usize << subset.len()) {
        let p = labeling_probability(soft, subset, bits);
        let mut labeled = graph.labeled().clone();
        for (k, &s) in subset.iter().enumerate() {
            labeled.insert(s, ((bits >> k) & 1) as Label);
        }
        let after = harmonic_solve(&graph.with_labeled(labeled)?)?;
        score += p * uncertainty(&after, subset);
        total += p;
    }
    Ok((score, total))
}

/// Next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Size-`budget` subset of the unlabeled nodes minimizing expected
/// uncertainty; the first subset in lexicographic order wins ties.
pub fn budgeted_active_select(graph: &WeightedGraph, budget: usize) -> Result<QueryPlan> {
    let classes: std::collections::BTreeSet<Label> = graph.labeled().values().copied().collect();
    if classes.len() < 2 {
        return Err(Error::Precondition("initial labels must include both classes".into()));
    }
    let pool = graph.unlabeled().to_vec();
    if budget > pool.len() {
        return Err(Error::Param(format!(
            "budget {budget} exceeds the {} unlabeled nodes",
            pool.len()
        )));
    }
    let count = binomial(pool.len(), budget).saturating_mul(1u128 << budget.min(120));
    if count > ENUMERATION_LIMIT {
        return Err(Error::Combinatorial {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let soft = harmonic_solve(graph)?;
    let mut idx: Vec<usize> = (0..budget).collect();
    let mut best: Option<QueryPlan> = None;
    loop {
        let subset: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
        let (score, _) = subset_score(graph, &soft, &subset)?;
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(QueryPlan { queries: subset, score });
        }
        if budget == 0 || !next_combination(&mut idx, pool.len()) {
            break;
        }
    }
    Ok(best.expect("at least one subset"))
}

/// Outcome of querying and then propagating.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineResult {
    pub queries: Vec<usize>,
    pub loss: f64,
}

/// Harmonic 0-1 loss on the nodes left unlabeled after revealing `queries`.
pub fn loss_after_queries(instance: &SslInstance, spec: &KernelSpec, queries: &[usize]) -> Result<f64> {
    let revealed = instance.with_revealed(queries)?;
    let g = build_graph(&revealed, spec)?;
    zero_one_loss(&round_labels(&harmonic_solve(&g)?), &revealed)
}

pub fn active_pipeline_loss(instance: &SslInstance, spec: &KernelSpec, budget: usize) -> Result<PipelineResult> {
    let plan = budgeted_active_select(&build_graph(instance, spec)?, budget)?;
    let loss = loss_after_queries(instance, spec, &plan.queries)?;
    Ok(PipelineResult {
        queries: plan.queries,
        loss,
    })
}

/// Same pipeline with `budget` queries drawn uniformly from the unlabeled nodes.
pub fn random_query_loss<R: Rng>(
    instance: &SslInstance,
    spec: &KernelSpec,
    budget: usize,
    rng: &mut R,
) -> Result<PipelineResult> {
    let mut pool = instance.unlabeled().to_vec();
    if budget > pool.len() {
        return Err(Error::Param(format!("budget {budget} exceeds the {} unlabeled nodes", pool.len())));
    }
    pool.shuffle(rng);
    let mut queries: Vec<usize> = pool.into_iter().take(budget).collect();
    queries.sort_unstable();
    let loss = loss_after_queries(instance, spec, &queries)?;
    Ok(PipelineResult { queries, loss })
}

/// Pipeline loss along a parameter grid, with maximal runs of equal loss.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCurve {
    pub points: Vec<(f64, f64)>,
    /// `(first index, last index, loss)` of each constant run.
    pub runs: Vec<(usize, usize, f64)>,
}

pub fn active_parameter_sweep(instance: &SslInstance, family: Family, budget: usize, grid: &[f64]) -> Result<SweepCurve> {
    if grid.is_empty() {
        return Err(Error::Param("parameter grid is empty".into()));
    }
    let points = grid
        .iter()
        .map(|&x| Ok((x, active_pipeline_loss(instance, &family.at(x)?, budget)?.loss)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        runs: constant_runs(&points),
        points,
    })
}

pub fn constant_runs(points: &[(f64, f64)]) -> Vec<(usize, usize, f64)> {
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &(_, l)) in points.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.2 == l => r.1 = i,
            _ => runs.push((i, i, l)),
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_smoothed, ClusterParams};
    use nalgebra::DMatrix;
    use std::collections::BTreeMap;

    fn small() -> SslInstance {
        generate_smoothed(5, 8, 2, &ClusterParams::default(), 0.5).unwrap()
    }

    #[test]
    fn combinations_in_order() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[1], vec![0, 2]);
        assert_eq!(seen[5], vec![2, 3]);
        assert_eq!(binomial(30, 15), 155_117_520);
    }

    #[test]
    fn full_budget_takes_everything() {
        let inst = small();
        let g = build_graph(&inst, &KernelSpec::Gaussian { sigma: 1.5 }).unwrap();
        let plan = budgeted_active_select(&g, inst.unlabeled().len()).unwrap();
        assert_eq!(plan.queries, inst.unlabeled().to_vec());
        assert!(plan.score.abs() < 1e-12);
    }

    #[test]
    fn symmetric_instance_takes_first_subset() {
        // every unlabeled node at the same distance from everything
        let n = 6;
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        let inst = SslInstance::from_distances(
            d,
            BTreeMap::from([(0, 0), (1, 1)]),
            (2..n).map(|u| (u, (u % 2) as Label)).collect(),
        )
        .unwrap();
        let g = build_graph(&inst, &KernelSpec::Gaussian { sigma: 1.0 }).unwrap();
        let plan = budgeted_active_select(&g, 2).unwrap();
        assert_eq!(plan.queries, vec![2, 3]);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let inst = small();
        let g = build_graph(&inst, &KernelSpec::Gaussian { sigma: 1.0 }).unwrap();
        let soft = harmonic_solve(&g).unwrap();
        let (_, total) = subset_score(&g, &soft, &[2, 5, 7]).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_budget_is_plain_harmonic() {
        let inst = small();
        let spec = KernelSpec::Gaussian { sigma: 1.0 };
        let r = active_pipeline_loss(&inst, &spec, 0).unwrap();
        assert!(r.queries.is_empty());
        let plain = crate::labeling::Objective::Harmonic.loss(&inst, &spec).unwrap();
        assert_eq!(r.loss, plain);
    }

    #[test]
    fn guard_rejects_large_searches() {
        let inst = generate_smoothed(1, 40, 2, &ClusterParams::default(), 0.5).unwrap();
        let g = build_graph(&inst, &KernelSpec::Gaussian { sigma: 1.0 }).unwrap();
        assert!(matches!(budgeted_active_select(&g, 6), Err(Error::Combinatorial { .. })));
    }

    #[test]
    fn runs_partition_the_grid() {
        let runs = constant_runs(&[(0.0, 0.5), (1.0, 0.5), (2.0, 0.25), (3.0, 0.5)]);
        assert_eq!(runs, vec![(0, 1, 0.5), (2, 2, 0.25), (3, 3, 0.5)]);
    }
}
