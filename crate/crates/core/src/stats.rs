//! Episode returns and their summaries: moments, histograms and a Gaussian
//! kernel density for violin-style plots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TrajectoryDataset;

pub const DEFAULT_BINS: usize = 30;
pub const DENSITY_POINTS: usize = 256;
const MIN_BANDWIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReturnSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub n_transitions: u64,
    pub n_trajectories: u64,
}

impl EpisodeReturnSummary {
    /// Placeholder for a selection with no episodes.
    pub fn empty() -> Self {
        EpisodeReturnSummary {
            mean: 0.0,
            std: 0.0,
            min: 0.0,
            max: 0.0,
            n_transitions: 0,
            n_trajectories: 0,
        }
    }

    pub fn is_populated(&self) -> bool {
        self.n_trajectories >= 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin of `x` under this histogram's edges, or `None` when outside.
    ///
    /// Bins are half-open `[lo, hi)` except the last, which also takes its
    /// upper edge.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        bin_index(&self.bin_edges, x)
    }

    /// Counts normalised to probabilities (zeros when the histogram is empty).
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        self.counts
            .iter()
            .map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    pub fn trapezoid_integral(&self) -> f64 {
        trapezoid(&self.xs, &self.ys)
    }
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Discounted return of every episode.
///
/// Per-agent rewards are averaged at each step before discounting, so a
/// shared reward replicated across agents counts once. Accumulation is in
/// `f64`. Episodes are processed in parallel with ordered output.
pub fn episode_returns(dataset: &TrajectoryDataset, gamma: f64) -> Vec<f64> {
    let n = dataset.n_agents();
    if n == 0 {
        return vec![0.0; dataset.n_episodes()];
    }
    let ranges: Vec<_> = dataset.episode_ranges().collect();
    ranges
        .into_par_iter()
        .map(|rows| {
            let mut ret = 0.0f64;
            let mut discount = 1.0f64;
            for t in rows {
                let step: f64 = dataset.rewards[t * n..(t + 1) * n]
                    .iter()
                    .map(|&r| r as f64)
                    .sum();
                ret += discount * (step / n as f64);
                discount *= gamma;
            }
            ret
        })
        .collect()
}

/// Population mean, standard deviation and range of `returns`.
///
/// `n_transitions` is left at zero; see [`summarize_dataset`].
pub fn summarize(returns: &[f64]) -> Result<EpisodeReturnSummary> {
    if returns.is_empty() {
        return Err(Error::NoEpisodes);
    }
    // Welford's update
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (i, &x) in returns.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
        min = min.min(x);
        max = max.max(x);
    }
    let n = returns.len() as f64;
    Ok(EpisodeReturnSummary {
        mean: mean.clamp(min, max),
        std: (m2 / n).max(0.0).sqrt(),
        min,
        max,
        n_transitions: 0,
        n_trajectories: returns.len() as u64,
    })
}

/// Undiscounted return summary of a whole dataset, with transition count.
pub fn summarize_dataset(dataset: &TrajectoryDataset) -> Result<EpisodeReturnSummary> {
    let mut s = summarize(&episode_returns(dataset, 1.0))?;
    s.n_transitions = dataset.n_transitions() as u64;
    Ok(s)
}

/// Equal-width histogram.
///
/// Without a range the bins span `[min, max]`; if all values coincide the
/// span is widened by 0.5 on each side. Values outside an explicit range,
/// and NaNs, are not counted.
pub fn histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "histogram range ({lo}, {hi}) must satisfy lo < hi"
                )));
            }
            (lo, hi)
        }
        None => {
            let (min, max) = finite_range(values).ok_or(Error::EmptyInput)?;
            if min < max {
                (min, max)
            } else {
                (min - 0.5, max + 0.5)
            }
        }
    };
    let edges = equal_width_edges(lo, hi, bins);
    let mut counts = vec![0u64; bins];
    for &x in values {
        if let Some(b) = bin_index(&edges, x) {
            counts[b] += 1;
        }
    }
    Ok(Histogram {
        bin_edges: edges,
        counts,
    })
}

pub(crate) fn finite_range(values: &[f64]) -> Option<(f64, f64)> {
    let mut it = values.iter().copied().filter(|x| x.is_finite());
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x))))
}

/// `bins + 1` edges from `lo` to exactly `hi`.
pub fn equal_width_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    edges
}

pub(crate) fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let k = edges.len().checked_sub(1)?;
    if k == 0 || !(x >= edges[0] && x <= edges[k]) {
        return None;
    }
    let lo = edges[0];
    let width = (edges[k] - lo) / k as f64;
    let mut b = (((x - lo) / width).floor() as usize).min(k - 1);
    // The arithmetic guess can land one off near an edge; settle on the edge
    // array itself so a value equal to an interior edge goes right.
    while b > 0 && x < edges[b] {
        b -= 1;
    }
    while b + 1 < k && x >= edges[b + 1] {
        b += 1;
    }
    Some(b)
}

/// Gaussian kernel density over 256 points spanning `[min - 3h, max + 3h]`.
///
/// The default bandwidth is Silverman's `1.06 * sigma * n^(-1/5)` with a floor
/// of 1e-6. The curve is rescaled so its trapezoid integral over the grid is
/// one, which absorbs the kernel mass beyond the grid and discretisation
/// error.
pub fn density(values: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(
            "density needs at least 2 samples".into(),
        ));
    }
    let summary = summarize(values)?;
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {h} must be positive"
            )))
        }
        None => {
            if summary.std == 0.0 {
                return Err(Error::DegenerateDensity);
            }
            (1.06 * summary.std * (values.len() as f64).powf(-0.2)).max(MIN_BANDWIDTH)
        }
    };
    let lo = summary.min - 3.0 * h;
    let hi = summary.max + 3.0 * h;
    let step = (hi - lo) / (DENSITY_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..DENSITY_POINTS)
        .map(|i| {
            if i + 1 == DENSITY_POINTS {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect();
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut ys: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            values
                .iter()
                .map(|&v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    let area = trapezoid(&xs, &ys);
    if area > 0.0 && area.is_finite() {
        ys.iter_mut().for_each(|y| *y /= area);
    }
    Ok(DensityCurve {
        xs,
        ys,
        bandwidth: h,
    })
}
