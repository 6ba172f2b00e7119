//! Dataset construction procedures: budget subsampling, combining,
//! subsampling to a target return distribution, matching two return
//! distributions and building a subset with a prescribed mean and standard
//! deviation.
//!
//! Every procedure selects whole episodes and records its choice in a
//! [`SelectionPlan`]; [`replay`] rebuilds the output from the source and the
//! plan alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Actions, TrajectoryDataset, VaultMeta};
use crate::rng::{Stream, StreamRng};
use crate::stats::{
    episode_returns, equal_width_edges, finite_range, summarize, EpisodeReturnSummary, DEFAULT_BINS,
};

/// Total-variation distance above which a target fit is reported infeasible.
pub const TARGET_TV_TOLERANCE: f64 = 0.05;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;
pub const MAX_RESTARTS: usize = 10;
const PROB_SUM_TOLERANCE: f64 = 1e-9;
const QUOTA_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Subsample,
    Target,
    Match,
    Construct,
}

impl Operation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Operation::Subsample => "subsample",
            Operation::Target => "target",
            Operation::Match => "match",
            Operation::Construct => "construct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDistribution {
    #[serde(rename = "edges")]
    pub bin_edges: Vec<f64>,
    #[serde(rename = "probs")]
    pub probabilities: Vec<f64>,
}

impl TargetDistribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let k = self.probabilities.len();
        if k == 0 || self.bin_edges.len() != k + 1 {
            return bad(format!(
                "{} edges do not bound {} probabilities",
                self.bin_edges.len(),
                k
            ));
        }
        if self.bin_edges.iter().any(|e| !e.is_finite())
            || self.bin_edges.windows(2).any(|w| !(w[0] < w[1]))
        {
            return bad("bin edges must be finite and strictly ascending".into());
        }
        if self.probabilities.iter().any(|p| !(*p >= 0.0)) {
            return bad("probabilities must be non-negative".into());
        }
        let sum: f64 = self.probabilities.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return bad(format!("probabilities sum to {sum}, not 1"));
        }
        Ok(())
    }

    /// Bin of `x`; half-open bins, the last one closed.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        locate(&self.bin_edges, x)
    }
}

fn locate(edges: &[f64], x: f64) -> Option<usize> {
    let k = edges.len().checked_sub(1)?;
    if k == 0 || !(x >= edges[0] && x <= edges[k]) {
        return None;
    }
    Some((edges.partition_point(|&e| e <= x) - 1).min(k - 1))
}

/// How closely a target-distribution subsample met its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFit {
    pub total_variation: f64,
    pub feasible: bool,
    /// Positive-probability bins that held no source episodes.
    pub empty_bins: Vec<usize>,
    pub achieved_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub source: String,
    pub operation: Operation,
    pub seed: u64,
    /// Selected source episodes, ascending.
    pub indices: Vec<usize>,
    pub achieved: EpisodeReturnSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_fit: Option<TargetFit>,
}

impl SelectionPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn derived_meta(source: &VaultMeta, op: Operation, seed: u64) -> VaultMeta {
    let mut meta = source.clone();
    meta.name = format!("{}-{}", source.name, op.as_str());
    let step = format!("{} seed {seed}", op.as_str());
    meta.generation_method = if source.generation_method.is_empty() {
        step
    } else {
        format!("{}; {step}", source.generation_method)
    };
    meta.extras.insert("parent".into(), source.name.clone());
    meta
}

fn finish_plan(
    source: &TrajectoryDataset,
    op: Operation,
    seed: u64,
    mut indices: Vec<usize>,
    target_fit: Option<TargetFit>,
) -> Result<(TrajectoryDataset, SelectionPlan)> {
    indices.sort_unstable();
    let out = source.select_episodes(&indices, derived_meta(&source.meta, op, seed))?;
    let achieved = achieved_summary(&out);
    let plan = SelectionPlan {
        source: source.meta.name.clone(),
        operation: op,
        seed,
        indices,
        achieved,
        target_fit,
    };
    Ok((out, plan))
}

fn achieved_summary(d: &TrajectoryDataset) -> EpisodeReturnSummary {
    match summarize(&episode_returns(d, 1.0)) {
        Ok(mut s) => {
            s.n_transitions = d.n_transitions() as u64;
            s
        }
        Err(_) => EpisodeReturnSummary::empty(),
    }
}

/// Rebuilds the output of the operation recorded in `plan` from `source`.
pub fn replay(source: &TrajectoryDataset, plan: &SelectionPlan) -> Result<TrajectoryDataset> {
    if plan.source != source.meta.name {
        return Err(Error::InvalidArgument(format!(
            "plan was made from '{}', not '{}'",
            plan.source, source.meta.name
        )));
    }
    if plan.indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "plan indices must be strictly ascending".into(),
        ));
    }
    source.select_episodes(
        &plan.indices,
        derived_meta(&source.meta, plan.operation, plan.seed),
    )
}

/// Draws whole episodes uniformly without replacement until at least
/// `budget` transitions are selected or the source runs out.
///
/// When the source holds at least `budget` transitions the overshoot is
/// smaller than the longest source episode.
pub fn subsample_transitions(
    dataset: &TrajectoryDataset,
    budget: usize,
    seed: u64,
) -> Result<(TrajectoryDataset, SelectionPlan)> {
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    dataset.ensure_valid()?;
    let mut order: Vec<usize> = (0..dataset.n_episodes()).collect();
    StreamRng::new(seed, Stream::Subsample).shuffle(&mut order);
    let lengths = dataset.episode_lengths();
    let mut total = 0usize;
    let mut picked = Vec::new();
    for e in order {
        if total >= budget {
            break;
        }
        total += lengths[e];
        picked.push(e);
    }
    finish_plan(dataset, Operation::Subsample, seed, picked, None)
}

/// Concatenates datasets with identical schemas, in order.
///
/// The result takes the first input's metadata, renamed, with the names of
/// all inputs recorded under the `lineage` extra.
pub fn combine(datasets: &[TrajectoryDataset]) -> Result<TrajectoryDataset> {
    let first = datasets.first().ok_or(Error::EmptyInput)?;
    for d in datasets {
        first.schema_compatible(d)?;
        d.ensure_valid()?;
    }
    let mut out = first.clone();
    for d in &datasets[1..] {
        let offset = out.n_transitions() as u64;
        out.observations.extend_from_slice(&d.observations);
        match (&mut out.actions, &d.actions) {
            (Actions::Discrete(a), Actions::Discrete(b)) => a.extend_from_slice(b),
            (Actions::Continuous(a), Actions::Continuous(b)) => a.extend_from_slice(b),
            _ => return Err(Error::SchemaMismatch("action kinds differ".into())),
        }
        out.rewards.extend_from_slice(&d.rewards);
        out.terminals.extend_from_slice(&d.terminals);
        if let (Some(a), Some(b)) = (&mut out.state, &d.state) {
            a.data.extend_from_slice(&b.data);
        }
        out.episode_starts
            .extend(d.episode_starts.iter().map(|s| s + offset));
    }
    let names: Vec<&str> = datasets.iter().map(|d| d.meta.name.as_str()).collect();
    out.meta.name = if names.len() == 1 {
        names[0].to_string()
    } else {
        format!("combined-{}", names.len())
    };
    out.meta
        .extras
        .insert("lineage".into(), serde_json::to_string(&names)?);
    Ok(out)
}

/// Splits `total` units across bins in proportion to `weights` by largest
/// remainder, never exceeding `caps`. Ties go to the lower bin.
fn apportion(weights: &[f64], total: f64, caps: &[usize]) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        return vec![0; weights.len()];
    }
    let target = (total + QUOTA_EPSILON).floor().max(0.0) as usize;
    let exact: Vec<f64> = weights.iter().map(|w| w / wsum * total).collect();
    let mut q: Vec<usize> = exact
        .iter()
        .zip(caps)
        .map(|(x, &c)| ((x + QUOTA_EPSILON).floor() as usize).min(c))
        .collect();
    let mut assigned: usize = q.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&b| weights[b] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for b in order {
        if assigned >= target {
            break;
        }
        if q[b] < caps[b] {
            q[b] += 1;
            assigned += 1;
        }
    }
    q
}

fn bucket(
    returns: &[f64],
    mut bin_of: impl FnMut(f64) -> Option<usize>,
    k: usize,
) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (e, &r) in returns.iter().enumerate() {
        if let Some(b) = bin_of(r) {
            members[b].push(e);
        }
    }
    members
}

fn mean_length(members: &[usize], lengths: &[usize]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    members.iter().map(|&e| lengths[e] as f64).sum::<f64>() / members.len() as f64
}

fn draw_quotas(rng: &mut StreamRng, members: &[Vec<usize>], quotas: &[usize]) -> Vec<usize> {
    let mut picked = Vec::new();
    for (m, &q) in members.iter().zip(quotas) {
        picked.extend(rng.sample_indices(m.len(), q).into_iter().map(|i| m[i]));
    }
    picked
}

/// Subsamples whole episodes so their return histogram over the target's
/// edges follows the target probabilities, within a transition budget.
///
/// Episodes are bucketed by undiscounted return. The total episode count is
/// the largest that no bin's supply and the expected transition count cap;
/// it is split across bins by largest remainder and each bin is sampled
/// without replacement. Positive-probability bins without episodes are
/// dropped and listed in the plan's [`TargetFit`], which also records the
/// achieved total-variation distance.
pub fn subsample_to_target(
    dataset: &TrajectoryDataset,
    target: &TargetDistribution,
    budget: usize,
    seed: u64,
) -> Result<(TrajectoryDataset, SelectionPlan)> {
    target.validate()?;
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    dataset.ensure_valid()?;
    let returns = episode_returns(dataset, 1.0);
    let lengths = dataset.episode_lengths();
    let k = target.probabilities.len();
    let members = bucket(&returns, |r| target.bin_of(r), k);

    let empty_bins: Vec<usize> = (0..k)
        .filter(|&b| target.probabilities[b] > 0.0 && members[b].is_empty())
        .collect();
    let weights: Vec<f64> = (0..k)
        .map(|b| {
            if members[b].is_empty() {
                0.0
            } else {
                target.probabilities[b]
            }
        })
        .collect();
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::InfeasibleTarget(
            "no source episode falls in any positive-probability bin".into(),
        ));
    }

    let mut n = f64::INFINITY;
    let mut expected_len = 0.0;
    for b in 0..k {
        if weights[b] > 0.0 {
            let p = weights[b] / wsum;
            n = n.min(members[b].len() as f64 / p);
            expected_len += p * mean_length(&members[b], &lengths);
        }
    }
    n = n.min(budget as f64 / expected_len).max(1.0);
    let caps: Vec<usize> = members.iter().map(Vec::len).collect();
    let quotas = apportion(&weights, n, &caps);

    let mut rng = StreamRng::new(seed, Stream::TargetDistribution);
    let picked = draw_quotas(&mut rng, &members, &quotas);
    let achieved_counts: Vec<u64> = quotas.iter().map(|&q| q as u64).collect();
    let total: u64 = achieved_counts.iter().sum();
    let tv = 0.5
        * achieved_counts
            .iter()
            .zip(&target.probabilities)
            .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
            .sum::<f64>();
    let fit = TargetFit {
        total_variation: tv,
        feasible: tv <= TARGET_TV_TOLERANCE,
        empty_bins,
        achieved_counts,
    };
    finish_plan(dataset, Operation::Target, seed, picked, Some(fit))
}

/// Subsamples two datasets so their episode return histograms agree
/// bin-for-bin on `bins` common equal-width bins over the union support.
///
/// Each bin keeps `min(count_a, count_b)` episodes, scaled down uniformly so
/// the expected transition count of neither side exceeds `budget`.
pub fn match_distributions(
    a: &TrajectoryDataset,
    b: &TrajectoryDataset,
    bins: usize,
    budget: usize,
    seed: u64,
) -> Result<(
    (TrajectoryDataset, TrajectoryDataset),
    (SelectionPlan, SelectionPlan),
)> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    a.ensure_valid()?;
    b.ensure_valid()?;
    let ra = episode_returns(a, 1.0);
    let rb = episode_returns(b, 1.0);
    let (lo_a, hi_a) = finite_range(&ra).ok_or(Error::NoEpisodes)?;
    let (lo_b, hi_b) = finite_range(&rb).ok_or(Error::NoEpisodes)?;
    if hi_a < lo_b || hi_b < lo_a {
        return Err(Error::DisjointSupports);
    }
    let la = a.episode_lengths();
    let lb = b.episode_lengths();
    let shortest = |l: &[usize]| l.iter().copied().min().unwrap_or(0);
    if budget < shortest(&la).max(shortest(&lb)) {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} is smaller than one episode"
        )));
    }

    let (lo, hi) = (lo_a.min(lo_b), hi_a.max(hi_b));
    let (lo, hi) = if lo < hi {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    let edges = equal_width_edges(lo, hi, bins);
    let ma = bucket(&ra, |r| locate(&edges, r), bins);
    let mb = bucket(&rb, |r| locate(&edges, r), bins);
    let common: Vec<usize> = (0..bins).map(|i| ma[i].len().min(mb[i].len())).collect();
    let total: usize = common.iter().sum();
    if total == 0 {
        return Err(Error::DisjointSupports);
    }
    let expected = |m: &[Vec<usize>], l: &[usize]| -> f64 {
        (0..bins)
            .map(|i| common[i] as f64 * mean_length(&m[i], l))
            .sum()
    };
    let scale = 1f64
        .min(budget as f64 / expected(&ma, &la))
        .min(budget as f64 / expected(&mb, &lb));
    let weights: Vec<f64> = common.iter().map(|&c| c as f64).collect();
    let quotas = apportion(&weights, total as f64 * scale, &common);

    let pa = draw_quotas(&mut StreamRng::new(seed, Stream::MatchFirst), &ma, &quotas);
    let pb = draw_quotas(&mut StreamRng::new(seed, Stream::MatchSecond), &mb, &quotas);
    let (da, plan_a) = finish_plan(a, Operation::Match, seed, pa, None)?;
    let (db, plan_b) = finish_plan(b, Operation::Match, seed, pb, None)?;
    Ok(((da, db), (plan_a, plan_b)))
}

/// [`match_distributions`] with the default bin count.
pub fn match_distributions_default(
    a: &TrajectoryDataset,
    b: &TrajectoryDataset,
    budget: usize,
    seed: u64,
) -> Result<(
    (TrajectoryDataset, TrajectoryDataset),
    (SelectionPlan, SelectionPlan),
)> {
    match_distributions(a, b, DEFAULT_BINS, budget, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStdTarget {
    pub mean: f64,
    pub std: f64,
    pub n_episodes: usize,
    pub mean_tolerance: f64,
    pub std_tolerance: f64,
}

/// Running sums of a selected subset of returns.
struct Subset<'a> {
    returns: &'a [f64],
    selected: Vec<usize>,
    member: Vec<bool>,
    sum: f64,
    sum_sq: f64,
}

impl<'a> Subset<'a> {
    fn new(returns: &'a [f64], selected: Vec<usize>) -> Self {
        let mut member = vec![false; returns.len()];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for &e in &selected {
            member[e] = true;
            sum += returns[e];
            sum_sq += returns[e] * returns[e];
        }
        Subset {
            returns,
            selected,
            member,
            sum,
            sum_sq,
        }
    }

    fn moments(&self, sum: f64, sum_sq: f64) -> (f64, f64) {
        let n = self.selected.len() as f64;
        let mean = sum / n;
        (mean, (sum_sq / n - mean * mean).max(0.0).sqrt())
    }

    /// Exact moments recomputed from scratch, to shed accumulated drift.
    fn refresh(&mut self) {
        self.sum = self.selected.iter().map(|&e| self.returns[e]).sum();
        self.sum_sq = self.selected.iter().map(|&e| self.returns[e].powi(2)).sum();
    }
}

/// Picks exactly `n_episodes` episodes whose returns have the target mean
/// and population standard deviation within the given tolerances.
///
/// Starts from the episodes nearest the target mean and hill-climbs on
/// `|mean - mean*| / tol_mean + |std - std*| / tol_std` with random
/// single-episode swaps, accepting strict improvements only. Later restarts
/// begin from random subsets. The result is checked against the tolerances
/// on freshly recomputed statistics.
pub fn construct_mean_std(
    pool: &TrajectoryDataset,
    target: &MeanStdTarget,
    seed: u64,
    max_iters: usize,
) -> Result<(TrajectoryDataset, SelectionPlan)> {
    let MeanStdTarget {
        mean: mu,
        std: sigma,
        n_episodes: n,
        mean_tolerance: tol_m,
        std_tolerance: tol_s,
    } = *target;
    if n == 0 || max_iters == 0 {
        return Err(Error::InvalidArgument(
            "n_episodes and max_iters must be positive".into(),
        ));
    }
    if !(tol_m > 0.0 && tol_s > 0.0) || !mu.is_finite() || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(
            "tolerances must be positive and targets finite".into(),
        ));
    }
    pool.ensure_valid()?;
    let returns = episode_returns(pool, 1.0);
    let total = returns.len();
    if total < n {
        return Err(Error::InvalidArgument(format!(
            "pool holds {total} episodes, fewer than the {n} requested"
        )));
    }

    let cost = |m: f64, s: f64| (m - mu).abs() / tol_m + (s - sigma).abs() / tol_s;
    let mut rng = StreamRng::new(seed, Stream::ConstructMeanStd);
    let mut best: Option<(f64, f64, f64)> = None;

    for restart in 0..MAX_RESTARTS {
        let initial = if restart == 0 {
            let mut order: Vec<usize> = (0..total).collect();
            order.sort_by(|&a, &b| {
                (returns[a] - mu)
                    .abs()
                    .total_cmp(&(returns[b] - mu).abs())
                    .then(a.cmp(&b))
            });
            order.truncate(n);
            order
        } else {
            rng.sample_indices(total, n)
        };
        let mut sub = Subset::new(&returns, initial);
        let (m0, s0) = sub.moments(sub.sum, sub.sum_sq);
        let mut current = cost(m0, s0);

        for iter in 0..max_iters {
            let (m, s) = sub.moments(sub.sum, sub.sum_sq);
            if (m - mu).abs() <= 0.5 * tol_m && (s - sigma).abs() <= 0.5 * tol_s {
                break;
            }
            if n == total {
                break;
            }
            let slot = rng.index(n);
            let incoming = rng.index(total);
            if sub.member[incoming] {
                continue;
            }
            let outgoing = sub.selected[slot];
            let (ro, ri) = (returns[outgoing], returns[incoming]);
            let sum = sub.sum - ro + ri;
            let sum_sq = sub.sum_sq - ro * ro + ri * ri;
            let (m, s) = sub.moments(sum, sum_sq);
            let c = cost(m, s);
            if c < current {
                current = c;
                sub.selected[slot] = incoming;
                sub.member[outgoing] = false;
                sub.member[incoming] = true;
                sub.sum = sum;
                sub.sum_sq = sum_sq;
            }
            if iter % 65_536 == 65_535 {
                sub.refresh();
            }
        }

        let chosen: Vec<f64> = sub.selected.iter().map(|&e| returns[e]).collect();
        let check = summarize(&chosen)?;
        if (check.mean - mu).abs() <= tol_m && (check.std - sigma).abs() <= tol_s {
            return finish_plan(pool, Operation::Construct, seed, sub.selected, None);
        }
        let c = cost(check.mean, check.std);
        if best.is_none_or(|(bc, _, _)| c < bc) {
            best = Some((c, check.mean, check.std));
        }
    }
    let (_, m, s) = best.expect("at least one restart ran");
    Err(Error::InfeasibleTarget(format!(
        "best subset after {MAX_RESTARTS} restarts has mean {m:.4} and std {s:.4}, \
         target mean {mu} +/- {tol_m} and std {sigma} +/- {tol_s}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::small_dataset;
    use crate::stats::histogram;
    use crate::synth::{generate_normal_pool, generate_return_pool, pool_from_returns};

    fn episodes_are_source_slices(out: &TrajectoryDataset, src: &TrajectoryDataset, idx: &[usize]) {
        assert_eq!(out.n_episodes(), idx.len());
        for (k, &e) in idx.iter().enumerate() {
            let a = out.episode_slice(k).unwrap();
            let b = src.episode_slice(e).unwrap();
            assert_eq!(a.observations, b.observations);
            assert_eq!(a.actions, b.actions);
            assert_eq!(a.rewards, b.rewards);
            assert_eq!(a.terminals, b.terminals);
            assert_eq!(a.state, b.state);
        }
    }

    #[test]
    fn subsample_exhausts_small_source() {
        let d = small_dataset();
        let (out, plan) = subsample_transitions(&d, 100, 1).unwrap();
        assert_eq!(plan.indices, vec![0, 1, 2]);
        assert_eq!(out.n_transitions(), d.n_transitions());
    }

    #[test]
    fn subsample_hits_budget() {
        let pool = generate_normal_pool(10.0, 2.0, 2000, (10, 50), 3).unwrap();
        let (out, plan) = subsample_transitions(&pool, 20_000, 4).unwrap();
        let t = out.n_transitions() as i64;
        assert!((t - 20_000).abs() < 50);
        assert!(out.is_valid());
        episodes_are_source_slices(&out, &pool, &plan.indices);
        let (_, again) = subsample_transitions(&pool, 20_000, 4).unwrap();
        assert_eq!(plan, again);
        assert!(replay(&pool, &plan).unwrap().bit_identical(&out));
    }

    #[test]
    fn plan_json_round_trip() {
        let d = small_dataset();
        let (_, plan) = subsample_transitions(&d, 3, 9).unwrap();
        let back = SelectionPlan::from_json(&plan.to_json().unwrap()).unwrap();
        assert_eq!(plan, back);
    }

    #[test]
    fn combine_identity_and_concatenation() {
        let d = small_dataset();
        let mut one = combine(std::slice::from_ref(&d)).unwrap();
        assert!(one.meta.extras.remove("lineage").is_some());
        assert!(one.bit_identical(&d));
        let two = combine(&[d.clone(), d.clone()]).unwrap();
        assert_eq!(two.n_transitions(), 2 * d.n_transitions());
        assert_eq!(two.n_episodes(), 2 * d.n_episodes());
        assert!(two.is_valid());
        assert!(two.meta.extras["lineage"].contains(&d.meta.name));
    }

    #[test]
    fn combine_returns_multiset() {
        let a = generate_normal_pool(5.0, 1.0, 30, (2, 6), 1).unwrap();
        let b = generate_normal_pool(9.0, 1.0, 20, (2, 6), 2).unwrap();
        let c = combine(&[a.clone(), b.clone()]).unwrap();
        let mut expected = episode_returns(&a, 1.0);
        expected.extend(episode_returns(&b, 1.0));
        expected.sort_by(f64::total_cmp);
        let mut got = episode_returns(&c, 1.0);
        got.sort_by(f64::total_cmp);
        assert_eq!(got, expected);
    }

    #[test]
    fn combine_rejects_empty_and_mismatched() {
        assert!(matches!(combine(&[]), Err(Error::EmptyInput)));
        let mut other = small_dataset();
        other.state = None;
        assert!(combine(&[small_dataset(), other]).is_err());
    }

    #[test]
    fn target_self_histogram_returns_everything() {
        let pool = generate_return_pool((0.0, 20.0), 500, 5, 2).unwrap();
        let h = histogram(&episode_returns(&pool, 1.0), 10, None).unwrap();
        let target = TargetDistribution {
            bin_edges: h.bin_edges.clone(),
            probabilities: h.probabilities(),
        };
        let (out, plan) = subsample_to_target(&pool, &target, pool.n_transitions(), 1).unwrap();
        let fit = plan.target_fit.unwrap();
        assert!(fit.total_variation < 1e-12);
        assert!(out.n_episodes() >= pool.n_episodes() - 10);
    }

    #[test]
    fn target_outside_support_is_infeasible() {
        let pool = generate_return_pool((0.0, 20.0), 100, 5, 2).unwrap();
        let target = TargetDistribution {
            bin_edges: vec![50.0, 60.0],
            probabilities: vec![1.0],
        };
        assert!(matches!(
            subsample_to_target(&pool, &target, 100, 1),
            Err(Error::InfeasibleTarget(_))
        ));
    }

    #[test]
    fn bimodal_target() {
        let pool = generate_return_pool((0.0, 20.0), 20_000, 10, 5).unwrap();
        let target = TargetDistribution {
            bin_edges: vec![2.0, 4.0, 16.0, 18.0],
            probabilities: vec![0.5, 0.0, 0.5],
        };
        let (out, plan) = subsample_to_target(&pool, &target, 50_000, 3).unwrap();
        let returns = episode_returns(&out, 1.0);
        let mut counts = [0usize; 3];
        for r in &returns {
            counts[target.bin_of(*r).unwrap()] += 1;
        }
        let n = returns.len() as f64;
        let tv = 0.5
            * counts
                .iter()
                .zip(&target.probabilities)
                .map(|(&c, p)| (c as f64 / n - p).abs())
                .sum::<f64>();
        assert!(tv <= 0.05, "tv {tv}");
        assert!(plan.target_fit.unwrap().feasible);
        // About 2,000 eligible episodes per mode cap the draw below budget.
        assert!(out.n_transitions() <= 50_000);
        assert_eq!(counts[0], counts[2]);
    }

    #[test]
    fn target_validation() {
        let t = TargetDistribution {
            bin_edges: vec![0.0, 1.0],
            probabilities: vec![0.5],
        };
        assert!(t.validate().is_err());
        let t: TargetDistribution =
            serde_json::from_str(r#"{"edges":[0,1,2],"probs":[0.25,0.75]}"#).unwrap();
        assert!(t.validate().is_ok());
    }

    #[test]
    fn self_match_gives_equal_histograms() {
        let d = generate_normal_pool(10.0, 2.0, 400, (5, 15), 8).unwrap();
        let ((a, b), (pa, pb)) = match_distributions(&d, &d, 30, d.n_transitions(), 2).unwrap();
        assert_eq!(pa.indices.len(), pb.indices.len());
        let ha = histogram(&episode_returns(&a, 1.0), 30, Some((0.0, 20.0))).unwrap();
        let hb = histogram(&episode_returns(&b, 1.0), 30, Some((0.0, 20.0))).unwrap();
        assert_eq!(ha, hb);
    }

    #[test]
    fn disjoint_supports_are_rejected() {
        let a = pool_from_returns(&[1.0, 2.0], &[3, 3], 0).unwrap();
        let b = pool_from_returns(&[5.0, 6.0], &[3, 3], 0).unwrap();
        assert!(matches!(
            match_distributions(&a, &b, 10, 100, 0),
            Err(Error::DisjointSupports)
        ));
        let c = pool_from_returns(&[1.5, 2.5], &[3, 3], 0).unwrap();
        assert!(match_distributions(&a, &c, 10, 2, 0).is_err());
    }

    #[test]
    fn construct_constant_pool_is_infeasible() {
        let pool = pool_from_returns(&[5.0; 50], &[2; 50], 0).unwrap();
        let target = MeanStdTarget {
            mean: 10.0,
            std: 0.0,
            n_episodes: 10,
            mean_tolerance: 0.1,
            std_tolerance: 0.1,
        };
        assert!(matches!(
            construct_mean_std(&pool, &target, 1, 1000),
            Err(Error::InfeasibleTarget(_))
        ));
    }

    #[test]
    fn construct_meets_target() {
        let pool = generate_return_pool((0.0, 20.0), 5000, 2, 6).unwrap();
        let target = MeanStdTarget {
            mean: 10.0,
            std: 2.0,
            n_episodes: 500,
            mean_tolerance: 0.1,
            std_tolerance: 0.1,
        };
        let (out, plan) = construct_mean_std(&pool, &target, 3, DEFAULT_MAX_ITERS).unwrap();
        let s = summarize(&episode_returns(&out, 1.0)).unwrap();
        assert!((s.mean - 10.0).abs() <= 0.1);
        assert!((s.std - 2.0).abs() <= 0.1);
        assert_eq!(plan.indices.len(), 500);
        let (_, again) = construct_mean_std(&pool, &target, 3, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(plan, again);
    }
}
