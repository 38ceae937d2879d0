use rand::seq::index::sample;
use rayon::prelude::*;

use crate::netdata::DynamicNetwork;
use crate::rng::{Purpose, SeedTree};

use super::SviConfig;

/// Robbins–Monro step size `(s + τ)^{−κ}`.
pub fn step_size(s: usize, kappa: f64, tau_step: f64) -> f64 {
    (s as f64 + tau_step).powf(-kappa).min(1.0)
}

/// Sampled snapshots and per-node non-edge samples for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    /// Sampled snapshot indices, ascending.
    pub times: Vec<usize>,
    /// `M / |𝓜|`.
    pub time_weight: f64,
    /// `nonedges[s][i]`: sampled non-neighbors of `i` at snapshot `times[s]`, ascending.
    pub nonedges: Vec<Vec<Vec<u32>>>,
    /// `|N^c| / |N^{c*}|`, zero when nothing was sampled.
    pub nonedge_weight: Vec<Vec<f64>>,
}

impl Minibatch {
    /// Every snapshot and every non-edge, all weights one.
    pub fn exhaustive(net: &DynamicNetwork) -> Self {
        let times: Vec<usize> = (0..net.num_times()).collect();
        let nonedges: Vec<Vec<Vec<u32>>> = times
            .iter()
            .map(|&m| {
                (0..net.n())
                    .map(|i| complement_by_rank(net, m, i, 0..net.complement_size(m, i)))
                    .collect()
            })
            .collect();
        let nonedge_weight = nonedges
            .iter()
            .map(|row| row.iter().map(|s| if s.is_empty() { 0.0 } else { 1.0 }).collect())
            .collect();
        Minibatch {
            times,
            time_weight: 1.0,
            nonedges,
            nonedge_weight,
        }
    }

    pub fn len_times(&self) -> usize {
        self.times.len()
    }
}

/// `m₀ = min(⌈γ_M M⌉, 100)`.
pub fn time_sample_size(m: usize, gamma_m: f64) -> usize {
    ((gamma_m * m as f64).ceil() as usize).clamp(1, 100).min(m)
}

/// `min(⌊γ_n |N|⌋, |N^c|)`.
pub fn nonedge_sample_size(degree: usize, complement: usize, gamma_n: f64) -> usize {
    ((gamma_n * degree as f64).floor() as usize).min(complement)
}

/// Non-neighbors of `i` at snapshot `m` with the given ranks (ascending)
/// within the ordered complement set.
fn complement_by_rank(
    net: &DynamicNetwork,
    m: usize,
    i: usize,
    ranks: impl IntoIterator<Item = usize>,
) -> Vec<u32> {
    let neighbors = net.neighbors(m, i);
    let mut excluded: Vec<u32> = neighbors.to_vec();
    if !net.self_loops() {
        if let Err(pos) = excluded.binary_search(&(i as u32)) {
            excluded.insert(pos, i as u32);
        }
    }
    let mut out = Vec::new();
    let mut skip = 0;
    for r in ranks {
        // j is the r-th integer not in `excluded`
        let mut j = r + skip;
        while skip < excluded.len() && (excluded[skip] as usize) <= j {
            skip += 1;
            j = r + skip;
        }
        out.push(j as u32);
    }
    out
}

/// Draw the iteration-`s` minibatch. Each node samples from its own stream,
/// so the result does not depend on the worker count.
pub fn sample_minibatch(
    net: &DynamicNetwork,
    cfg: &SviConfig,
    seeds: &SeedTree,
    iteration: usize,
) -> Minibatch {
    let m_total = net.num_times();
    let m0 = time_sample_size(m_total, cfg.gamma_m);
    let mut rng = seeds.stream(Purpose::TimeSample, iteration as u64, 0);
    let mut times = sample(&mut rng, m_total, m0).into_vec();
    times.sort_unstable();
    let per_node: Vec<Vec<(Vec<u32>, f64)>> = (0..net.n())
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.stream(Purpose::NonEdgeSample, iteration as u64, i as u64);
            times
                .iter()
                .map(|&m| {
                    let complement = net.complement_size(m, i);
                    let k = nonedge_sample_size(net.neighbors(m, i).len(), complement, cfg.gamma_n);
                    if k == 0 {
                        return (Vec::new(), 0.0);
                    }
                    let mut ranks = sample(&mut rng, complement, k).into_vec();
                    ranks.sort_unstable();
                    (
                        complement_by_rank(net, m, i, ranks),
                        complement as f64 / k as f64,
                    )
                })
                .collect()
        })
        .collect();
    let mut nonedges = vec![Vec::with_capacity(net.n()); times.len()];
    let mut nonedge_weight = vec![Vec::with_capacity(net.n()); times.len()];
    for node in per_node {
        for (s, (set, w)) in node.into_iter().enumerate() {
            nonedges[s].push(set);
            nonedge_weight[s].push(w);
        }
    }
    Minibatch {
        time_weight: m_total as f64 / times.len() as f64,
        times,
        nonedges,
        nonedge_weight,
    }
}

/// `B_i(H_i)` for every node and `B(H) = ½ Σ_i B_i(H_i)`, where `h(m, i, j)`
/// is a per-dyad term symmetric in `(i, j)`. A self-loop dyad enters once
/// with full weight in `B(H)`.
pub fn unbiased_sum<F>(net: &DynamicNetwork, mb: &Minibatch, h: F) -> (Vec<f64>, f64)
where
    F: Fn(usize, usize, usize) -> f64,
{
    let mut per_node = vec![0.0; net.n()];
    let mut total = 0.0;
    for (s, &m) in mb.times.iter().enumerate() {
        for (i, acc) in per_node.iter_mut().enumerate() {
            let mut edge_part = 0.0;
            let mut edge_dyad = 0.0;
            for &j in net.neighbors(m, i) {
                let v = h(m, i, j as usize);
                edge_part += v;
                edge_dyad += if j as usize == i { v } else { 0.5 * v };
            }
            let mut non_part = 0.0;
            let mut non_dyad = 0.0;
            for &j in &mb.nonedges[s][i] {
                let v = h(m, i, j as usize);
                non_part += v;
                non_dyad += if j as usize == i { v } else { 0.5 * v };
            }
            let w = mb.nonedge_weight[s][i];
            *acc += mb.time_weight * (edge_part + w * non_part);
            total += mb.time_weight * (edge_dyad + w * non_dyad);
        }
    }
    (per_node, total)
}
