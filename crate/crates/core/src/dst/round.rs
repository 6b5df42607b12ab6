//! Prune-grow rounds.
//!
//! The layer step follows the paper's recipe: sample candidates, grow the
//! top-k by gradient magnitude within the sample, prune the k smallest
//! weight magnitudes, with k clamped so the grow set never exceeds the
//! candidate set. The model-global round pools grow and prune scores across
//! layers so connections can redistribute while the total stays fixed.

use std::collections::HashSet;

use log::{info, warn};
use rand::Rng;

use super::sampling::{build_distribution, sample_candidates, GrowthStrategy, SignVector};
use super::schedule::{cosine_decay, PruneGrowSchedule};
use super::DstError;
use crate::sparse::{
    allow_dense, gather_connection_grads, select_top_k, ConnectionIndex, ConnectionSet,
};
use crate::{Mat, Real};

/// Outcome of one layer-local round: the candidate set S, grown set G,
/// pruned set P, and the replacement count k.
#[derive(Debug, Clone)]
pub struct SubsetSample {
    pub candidates: Vec<ConnectionIndex>,
    pub grown: Vec<ConnectionIndex>,
    pub pruned: Vec<ConnectionIndex>,
    pub k: usize,
}

/// Per-layer view handed to the global round: the mutable connection set and
/// the cached effective input/output-gradient matrices for this batch.
pub struct LayerRoundInput<'a> {
    pub conn: &'a mut ConnectionSet,
    pub h_prev: &'a Mat,
    pub delta: &'a Mat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerRoundStats {
    pub candidates: usize,
    pub grown: usize,
    pub pruned: usize,
    pub active: usize,
}

/// Summary of one global round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundReport {
    pub k: usize,
    pub total_active: usize,
    pub per_layer: Vec<LayerRoundStats>,
}

/// Every inactive connection of the layer, in canonical order.
fn inactive_complement(conn: &ConnectionSet) -> Vec<ConnectionIndex> {
    let mut out = Vec::with_capacity(conn.dense_len() - conn.len());
    let mut active = conn.connections().iter().peekable();
    for b in 0..conn.n_out() {
        for a in 0..conn.n_in() {
            let c = ConnectionIndex::new(a, b);
            if active.peek() == Some(&&c) {
                active.next();
            } else {
                out.push(c);
            }
        }
    }
    out
}

/// Grow the top-k candidates by gradient magnitude and prune the k smallest
/// weight magnitudes. `candidates` must be canonically sorted and disjoint
/// from the active set; `k` must not exceed either set.
pub fn grow_prune_with_candidates(
    conn: &mut ConnectionSet,
    candidates: Vec<ConnectionIndex>,
    h_prev: &Mat,
    delta: &Mat,
    k: usize,
) -> Result<SubsetSample, DstError> {
    let grads = gather_connection_grads(&candidates, h_prev, delta);
    let magnitudes: Vec<Real> = grads.iter().map(|g| g.abs()).collect();
    let grow_idx = select_top_k(&magnitudes, k)?;
    let grown: Vec<ConnectionIndex> = grow_idx.iter().map(|&i| candidates[i]).collect();
    let neg_weight: Vec<Real> = conn.weights().iter().map(|w| -w.abs()).collect();
    let prune_pos = select_top_k(&neg_weight, k)?;
    let pruned: Vec<ConnectionIndex> = prune_pos.iter().map(|&p| conn.connections()[p]).collect();
    conn.apply_prune_grow(&prune_pos, &grown)?;
    Ok(SubsetSample {
        candidates,
        grown,
        pruned,
        k,
    })
}

/// One layer-local guided-exploration round at training step `t`. Returns
/// `None` when the schedule has expired. k may be zero (a no-op round).
pub fn grow_prune_step<R: Rng + ?Sized>(
    conn: &mut ConnectionSet,
    h_prev: &Mat,
    delta: &Mat,
    schedule: &PruneGrowSchedule,
    strategy: GrowthStrategy,
    t: usize,
    rng: &mut R,
) -> Result<Option<SubsetSample>, DstError> {
    if !strategy.is_gse() {
        return Err(DstError::StrategyMismatch(strategy.tag().into()));
    }
    let Some(alpha_t) = cosine_decay(t, schedule.alpha, schedule.t_end) else {
        return Ok(None);
    };
    let signs = strategy
        .needs_signs()
        .then(|| SignVector::sample(rng, h_prev.ncols()));
    let dist = build_distribution(strategy, h_prev, delta, signs.as_ref())?;
    let count = schedule.candidate_count(conn.len());
    let candidates = sample_candidates(&dist, conn, count, rng)?;
    let k = ((alpha_t * conn.len() as Real).ceil() as usize).min(candidates.len());
    Ok(Some(grow_prune_with_candidates(
        conn, candidates, h_prev, delta, k,
    )?))
}

/// Dense-gradient baseline round: the candidate set is the entire inactive
/// complement, so growth is greedy over the full gradient. The only code
/// path allowed to touch the dense index space.
pub fn rigl_grow_step(
    conn: &mut ConnectionSet,
    h_prev: &Mat,
    delta: &Mat,
    schedule: &PruneGrowSchedule,
    t: usize,
) -> Result<Option<SubsetSample>, DstError> {
    let Some(alpha_t) = cosine_decay(t, schedule.alpha, schedule.t_end) else {
        return Ok(None);
    };
    let _dense = allow_dense();
    let candidates = inactive_complement(conn);
    let k = ((alpha_t * conn.len() as Real).ceil() as usize).min(candidates.len());
    Ok(Some(grow_prune_with_candidates(
        conn, candidates, h_prev, delta, k,
    )?))
}

/// Random-growth baseline round: grows k distinct inactive connections
/// uniformly at random, prunes the k smallest weight magnitudes.
pub fn set_grow_step<R: Rng + ?Sized>(
    conn: &mut ConnectionSet,
    schedule: &PruneGrowSchedule,
    t: usize,
    rng: &mut R,
) -> Result<Option<SubsetSample>, DstError> {
    let Some(alpha_t) = cosine_decay(t, schedule.alpha, schedule.t_end) else {
        return Ok(None);
    };
    let complement = conn.dense_len() - conn.len();
    let k = ((alpha_t * conn.len() as Real).ceil() as usize).min(complement);
    let mut grown = sample_distinct_inactive(conn, k, rng);
    grown.sort_unstable();
    let neg_weight: Vec<Real> = conn.weights().iter().map(|w| -w.abs()).collect();
    let prune_pos = select_top_k(&neg_weight, k)?;
    let pruned: Vec<ConnectionIndex> = prune_pos.iter().map(|&p| conn.connections()[p]).collect();
    conn.apply_prune_grow(&prune_pos, &grown)?;
    Ok(Some(SubsetSample {
        candidates: grown.clone(),
        grown,
        pruned,
        k,
    }))
}

/// `k` distinct inactive connections chosen uniformly, in draw order.
fn sample_distinct_inactive<R: Rng + ?Sized>(
    conn: &ConnectionSet,
    k: usize,
    rng: &mut R,
) -> Vec<ConnectionIndex> {
    let complement = conn.dense_len() - conn.len();
    debug_assert!(k <= complement);
    if k == 0 {
        return Vec::new();
    }
    if complement <= 2 * k + 64 {
        // near-saturated layer: enumerate the complement and partially shuffle
        let mut pool = inactive_complement(conn);
        for i in 0..k {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(k);
        return pool;
    }
    let mut picked: HashSet<ConnectionIndex> = HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    let (n_in, dense) = (conn.n_in(), conn.dense_len());
    while out.len() < k {
        let lin = rng.gen_range(0..dense);
        let c = ConnectionIndex::new(lin % n_in, lin / n_in);
        if !conn.contains(c) && picked.insert(c) {
            out.push(c);
        }
    }
    out
}

/// Grow candidates ranked best-first for one global round, pooled over
/// layers as (layer, candidate-index) pairs.
fn ranked_global_growth<R: Rng + ?Sized>(
    layers: &mut [LayerRoundInput],
    schedule: &PruneGrowSchedule,
    strategy: GrowthStrategy,
    rng: &mut R,
) -> Result<(Vec<Vec<ConnectionIndex>>, Vec<(usize, usize)>), DstError> {
    let mut candidates: Vec<Vec<ConnectionIndex>> = Vec::with_capacity(layers.len());
    let mut pooled_scores: Vec<Real> = Vec::new();
    let mut pooled_refs: Vec<(usize, usize)> = Vec::new();

    let _dense = matches!(strategy, GrowthStrategy::RiglDense).then(allow_dense);
    for (l, layer) in layers.iter_mut().enumerate() {
        let cand = match strategy {
            GrowthStrategy::RiglDense => inactive_complement(layer.conn),
            _ => {
                let signs = strategy
                    .needs_signs()
                    .then(|| SignVector::sample(rng, layer.h_prev.ncols()));
                let dist = build_distribution(strategy, layer.h_prev, layer.delta, signs.as_ref())?;
                let count = schedule.candidate_count(layer.conn.len());
                sample_candidates(&dist, layer.conn, count, rng)?
            }
        };
        let grads = gather_connection_grads(&cand, layer.h_prev, layer.delta);
        for (i, g) in grads.iter().enumerate() {
            pooled_scores.push(g.abs());
            pooled_refs.push((l, i));
        }
        candidates.push(cand);
    }
    // rank once at the largest possible quota; shrinking a quota later just
    // truncates this list
    let order = crate::sparse::rank_top_k(&pooled_scores, pooled_scores.len())?;
    let ranked = order.into_iter().map(|i| pooled_refs[i]).collect();
    Ok((candidates, ranked))
}

/// Uniform global growth for the random baseline: layer chosen with
/// probability proportional to remaining inactive capacity, pair uniform
/// within the layer; exact sampling without replacement.
fn uniform_global_growth<R: Rng + ?Sized>(
    layers: &[LayerRoundInput],
    k: usize,
    rng: &mut R,
) -> Vec<Vec<ConnectionIndex>> {
    let mut picked: Vec<HashSet<ConnectionIndex>> =
        layers.iter().map(|_| HashSet::new()).collect();
    let mut remaining: Vec<usize> = layers
        .iter()
        .map(|l| l.conn.dense_len() - l.conn.len())
        .collect();
    let mut grown: Vec<Vec<ConnectionIndex>> = layers.iter().map(|_| Vec::new()).collect();
    for _ in 0..k {
        let total: usize = remaining.iter().sum();
        if total == 0 {
            break;
        }
        let mut ticket = rng.gen_range(0..total);
        let mut layer = 0;
        for (l, &r) in remaining.iter().enumerate() {
            if ticket < r {
                layer = l;
                break;
            }
            ticket -= r;
        }
        let conn = &layers[layer].conn;
        let (n_in, dense) = (conn.n_in(), conn.dense_len());
        let pick = if remaining[layer] * 8 < dense {
            // few free cells left: walk the complement directly
            let free: Vec<ConnectionIndex> = inactive_complement(conn)
                .into_iter()
                .filter(|c| !picked[layer].contains(c))
                .collect();
            free[rng.gen_range(0..free.len())]
        } else {
            loop {
                let lin = rng.gen_range(0..dense);
                let c = ConnectionIndex::new(lin % n_in, lin / n_in);
                if !conn.contains(c) && !picked[layer].contains(&c) {
                    break c;
                }
            }
        };
        picked[layer].insert(pick);
        remaining[layer] -= 1;
        grown[layer].push(pick);
    }
    grown
}

/// Global prune selection: pooled smallest weight magnitudes (ties toward
/// the lower pooled index), capped per layer so no layer drops below one
/// active connection after its grows land. Returns per-layer positions and
/// the number taken.
fn select_global_prunes(
    layers: &[LayerRoundInput],
    grow_counts: &[usize],
    k: usize,
) -> (Vec<Vec<usize>>, usize) {
    let mut pooled: Vec<(Real, usize, usize)> = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        for (p, w) in layer.conn.weights().iter().enumerate() {
            pooled.push((w.abs(), l, p));
        }
    }
    pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2))));
    let caps: Vec<usize> = layers
        .iter()
        .zip(grow_counts)
        .map(|(layer, &g)| (layer.conn.len() + g).saturating_sub(1))
        .collect();
    let mut taken = 0usize;
    let mut per_layer: Vec<Vec<usize>> = layers.iter().map(|_| Vec::new()).collect();
    for (_, l, p) in pooled {
        if taken == k {
            break;
        }
        if per_layer[l].len() < caps[l] {
            per_layer[l].push(p);
            taken += 1;
        }
    }
    for positions in &mut per_layer {
        positions.sort_unstable();
    }
    (per_layer, taken)
}

/// One model-global prune-grow round at step `t`: per-layer candidate
/// sampling, then globally pooled top-k growth and magnitude pruning so the
/// total active count is conserved while layers can exchange connections.
/// Returns `None` for the static strategy or an expired schedule.
pub fn global_grow_prune_round<R: Rng + ?Sized>(
    layers: &mut [LayerRoundInput],
    schedule: &PruneGrowSchedule,
    strategy: GrowthStrategy,
    t: usize,
    rng: &mut R,
) -> Result<Option<RoundReport>, DstError> {
    if !strategy.rewires() {
        return Ok(None);
    }
    let Some(alpha_t) = cosine_decay(t, schedule.alpha, schedule.t_end) else {
        return Ok(None);
    };
    let total_active: usize = layers.iter().map(|l| l.conn.len()).sum();

    // candidate generation + desired quota
    let (candidates, ranked) = match strategy {
        GrowthStrategy::SetRandom => (Vec::new(), Vec::new()),
        _ => ranked_global_growth(layers, schedule, strategy, rng)?,
    };
    let candidate_total = match strategy {
        GrowthStrategy::SetRandom => layers
            .iter()
            .map(|l| l.conn.dense_len() - l.conn.len())
            .sum(),
        _ => ranked.len(),
    };
    let quota = ((alpha_t * total_active as Real).ceil() as usize).min(candidate_total);

    // shrink the quota if the per-layer floor would be violated
    let mut k = quota;
    let (grown_per_layer, prune_per_layer) = loop {
        let grown: Vec<Vec<ConnectionIndex>> = match strategy {
            GrowthStrategy::SetRandom => uniform_global_growth(layers, k, rng),
            _ => {
                let mut per_layer: Vec<Vec<ConnectionIndex>> =
                    layers.iter().map(|_| Vec::new()).collect();
                for &(l, i) in ranked.iter().take(k) {
                    per_layer[l].push(candidates[l][i]);
                }
                per_layer
            }
        };
        let grow_counts: Vec<usize> = grown.iter().map(|g| g.len()).collect();
        let (prunes, taken) = select_global_prunes(layers, &grow_counts, k);
        if taken == k {
            break (grown, prunes);
        }
        warn!("prune-grow round at t={t}: layer floor reduces quota {k} -> {taken}");
        k = taken;
    };

    let mut per_layer = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter_mut().enumerate() {
        let mut grown = grown_per_layer[l].clone();
        grown.sort_unstable();
        layer.conn.apply_prune_grow(&prune_per_layer[l], &grown)?;
        per_layer.push(LayerRoundStats {
            candidates: match strategy {
                GrowthStrategy::SetRandom => grown.len(),
                _ => candidates[l].len(),
            },
            grown: grown.len(),
            pruned: prune_per_layer[l].len(),
            active: layer.conn.len(),
        });
    }
    let total_after: usize = layers.iter().map(|l| l.conn.len()).sum();
    debug_assert_eq!(total_active, total_after, "sparsity must be conserved");
    info!(
        "prune-grow round t={t} strategy={} alpha_t={alpha_t:.4} k={k} candidates={} active={total_after}",
        strategy.tag(),
        per_layer.iter().map(|s| s.candidates).sum::<usize>(),
    );
    Ok(Some(RoundReport {
        k,
        total_active: total_after,
        per_layer,
    }))
}
