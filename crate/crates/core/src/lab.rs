//! Brute-force oracles, constant estimation, and theorem-equivalence
//! harnesses on finite systems.
//!
//! The central primitive decides, for a finite system and thresholds
//! `(δ, ε)`, whether some δ-pseudo orbit escapes every ε-shadow. Tracking the
//! set of still-alive shadow orbits turns this into reachability of the empty
//! set in a product automaton over (pseudo point, alive mask) states, which is
//! exact at any horizon, including the infinite one: alive sets are decreasing
//! along a pseudo-orbit, so an infinite orbit is unshadowable exactly when one
//! of its finite prefixes is.

use rand::Rng;
use serde::Serialize;

use crate::decompose::{build_chain_graph, ChainGraph};
use crate::error::{Error, Result};
use crate::orbits::{random_pseudo_orbit, seeded_rng};
use crate::point::Point;
use crate::rational::ExactReal;
use crate::systems::{additive_cellular_map, SystemDescriptor};
use crate::point::SymbolicPoint;

/// Hard cap for exhaustive enumeration; beyond it, sampled mode is advised.
/// The default desk budget is 8 points at horizon 8.
pub const MAX_EXHAUSTIVE_POINTS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum EstimateMode {
    Exhaustive,
    Sampled { seed: u64, trials: usize },
}

struct FiniteTables {
    size: usize,
    succ: Vec<usize>,
    dist: Vec<Vec<ExactReal>>,
    chain: ChainGraph,
}

fn finite_tables(system: &SystemDescriptor) -> Result<FiniteTables> {
    let size = system.finite_size()?;
    let succ = system.finite_successors()?.to_vec();
    let mut dist = vec![vec![ExactReal::zero(); size]; size];
    for (i, row) in dist.iter_mut().enumerate() {
        for (j, d) in row.iter_mut().enumerate() {
            *d = system.distance(&Point::Finite(i), &Point::Finite(j))?;
        }
    }
    Ok(FiniteTables { size, succ, dist, chain: build_chain_graph(system)? })
}

/// Searches for a δ-pseudo orbit that no point ε-shadows; returns its vertex
/// path when one exists. `Horizon::Finite(t)` bounds the orbit to `t` points.
fn unshadowable_witness(
    t: &FiniteTables,
    delta: &ExactReal,
    eps: &ExactReal,
    horizon: Horizon,
) -> Option<Vec<usize>> {
    let n = t.size;
    assert!(n <= 64, "alive masks are u64");
    let max_points = match horizon {
        Horizon::Finite(tp) => tp,
        Horizon::Infinite => usize::MAX,
    };
    if max_points == 0 {
        return None;
    }
    let full_view = t.chain.delta_view(delta);
    // alive-mask transition tables
    let start_mask = |v: usize| -> u64 {
        let mut m = 0u64;
        for x in 0..n {
            if t.dist[x][v] <= *eps {
                m |= 1 << x;
            }
        }
        m
    };
    use std::collections::{HashMap, VecDeque};
    let mut parents: HashMap<(usize, u64), Option<(usize, u64)>> = HashMap::new();
    let mut queue: VecDeque<(usize, u64, usize)> = VecDeque::new();
    for v in 0..n {
        let m = start_mask(v);
        if parents.contains_key(&(v, m)) {
            continue;
        }
        parents.insert((v, m), None);
        if m == 0 {
            return Some(vec![v]);
        }
        queue.push_back((v, m, 1));
    }
    while let Some((v, mask, points)) = queue.pop_front() {
        if points >= max_points {
            continue;
        }
        for &v2 in &full_view[v] {
            let mut m2 = 0u64;
            for x in 0..n {
                if mask & (1 << x) != 0 {
                    let fx = t.succ[x];
                    if t.dist[fx][v2] <= *eps {
                        m2 |= 1 << fx;
                    }
                }
            }
            if parents.contains_key(&(v2, m2)) {
                continue;
            }
            parents.insert((v2, m2), Some((v, mask)));
            if m2 == 0 {
                // reconstruct the path
                let mut path = vec![v2];
                let mut cur = (v, mask);
                loop {
                    path.push(cur.0);
                    match parents[&cur] {
                        Some(prev) => cur = prev,
                        None => break,
                    }
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back((v2, m2, points + 1));
        }
    }
    None
}

/// `ε*(δ)`: the worst-case minimal shadowing radius over δ-pseudo orbits (of
/// `T` points in finite mode, of any length in infinite mode). Exhaustive and
/// exact; distances take finitely many values, so the answer is the smallest
/// candidate with no unshadowable witness.
pub fn minimal_shadowing_radius(
    system: &SystemDescriptor,
    delta: &ExactReal,
    horizon: Horizon,
) -> Result<ExactReal> {
    let t = finite_tables(system)?;
    if t.size > MAX_EXHAUSTIVE_POINTS {
        return Err(Error::BudgetExceeded(format!(
            "{} points exceed the exhaustive budget of {MAX_EXHAUSTIVE_POINTS}; \
             use minimal_shadowing_radius_sampled",
            t.size
        )));
    }
    let mut candidates: Vec<ExactReal> = t.dist.iter().flatten().cloned().collect();
    candidates.sort();
    candidates.dedup();
    for eps in candidates {
        if unshadowable_witness(&t, delta, &eps, horizon).is_none() {
            return Ok(eps);
        }
    }
    unreachable!("every orbit is shadowable at the diameter")
}

/// Sampled lower bound on `ε*(δ)`: seeded random δ-pseudo orbits, each scored
/// by its exact best shadow.
pub fn minimal_shadowing_radius_sampled(
    system: &SystemDescriptor,
    delta: &ExactReal,
    points: usize,
    trials: usize,
    seed: u64,
) -> Result<ExactReal> {
    let t = finite_tables(system)?;
    let mut worst = ExactReal::zero();
    for trial in 0..trials {
        let xi = random_pseudo_orbit(system, delta, points, seed.wrapping_add(trial as u64))?;
        let mut best: Option<ExactReal> = None;
        for x in 0..t.size {
            let mut cur = x;
            let mut dev = ExactReal::zero();
            for p in xi.points() {
                let v = p.as_finite()?;
                dev = dev.max(t.dist[cur][v].clone());
                cur = t.succ[cur];
            }
            best = Some(match best {
                None => dev,
                Some(b) => b.min(dev),
            });
        }
        worst = worst.max(best.unwrap());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateRow {
    pub delta: ExactReal,
    pub radius: ExactReal,
    pub ratio: ExactReal,
}

/// Worst-case shadowing constants over the threshold spectrum (plus
/// midpoints). Exhaustive reports are exact for the given horizon; sampled
/// reports are lower bounds on each `ε*(δ)`.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub horizon: Horizon,
    pub mode: EstimateMode,
    pub rows: Vec<EstimateRow>,
    pub sup_ratio: Option<ExactReal>,
    pub contractive: Option<bool>,
}

pub fn estimate_l(
    system: &SystemDescriptor,
    horizon: Horizon,
    mode: EstimateMode,
) -> Result<EstimateReport> {
    let graph = build_chain_graph(system)?;
    let mut rows = Vec::new();
    for delta in graph.threshold_grid() {
        let radius = match &mode {
            EstimateMode::Exhaustive => minimal_shadowing_radius(system, &delta, horizon)?,
            EstimateMode::Sampled { seed, trials } => {
                let points = match horizon {
                    Horizon::Finite(t) => t,
                    Horizon::Infinite => 8,
                };
                minimal_shadowing_radius_sampled(system, &delta, points, *trials, *seed)?
            }
        };
        let ratio = &radius / &delta;
        rows.push(EstimateRow { delta, radius, ratio });
    }
    let sup_ratio = rows.iter().map(|r| r.ratio.clone()).max();
    let contractive = sup_ratio.as_ref().map(|s| *s < ExactReal::one());
    Ok(EstimateReport { horizon, mode, rows, sup_ratio, contractive })
}

/// A ball-expanding counterexample: `y ∈ B_δ(f(x))` with no preimage of `y`
/// inside `B_{Lδ}(x)`.
#[derive(Clone, Debug, Serialize)]
pub struct BallWitness {
    pub x: usize,
    pub delta: ExactReal,
    pub y: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallCheck {
    pub holds: bool,
    pub witness: Option<BallWitness>,
}

/// Checks `B_δ(f(x)) ⊆ f(B_{Lδ}(x))` for every `x` and every real
/// `0 < δ <= δ₀`. For each pair `(x, y)` only the smallest δ admitting `y`
/// matters, so finitely many comparisons decide the whole range.
pub fn ball_expanding_check(
    system: &SystemDescriptor,
    l: &ExactReal,
    delta0: &ExactReal,
) -> Result<BallCheck> {
    let t = finite_tables(system)?;
    for x in 0..t.size {
        let fx = t.succ[x];
        for y in 0..t.size {
            let w = t.dist[fx][y].clone();
            if w.is_zero() || w > *delta0 {
                continue;
            }
            let radius = l * &w;
            let covered = (0..t.size).any(|z| t.succ[z] == y && t.dist[z][x] <= radius);
            if !covered {
                return Ok(BallCheck {
                    holds: false,
                    witness: Some(BallWitness { x, delta: w, y }),
                });
            }
        }
    }
    Ok(BallCheck { holds: true, witness: None })
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzSide {
    /// Per spectrum δ: does `ε*(δ) <= L·δ` hold?
    pub per_delta: Vec<(ExactReal, bool)>,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Thm16Report {
    pub l: ExactReal,
    pub delta0: ExactReal,
    /// Side (1) at the requested horizon and at the re-check horizon T+2
    /// (provisional data).
    pub lipschitz_at_horizon: Vec<(usize, bool)>,
    /// Side (1) decided at the infinite horizon (the verdict input).
    pub lipschitz_exact: bool,
    /// Side (2).
    pub ball_expanding: bool,
    pub ball_witness: Option<BallWitness>,
    /// Unshadowable pseudo-orbit path when side (1) fails exactly.
    pub shadowing_witness: Option<(ExactReal, Vec<usize>)>,
    /// Agreement per the equivalence (biconditional for L < 1; for L = 1 only
    /// ball-expanding implies shadowing).
    pub agree: bool,
    /// Set when the horizon-T answer differs from the exact one.
    pub horizon_too_short: bool,
}

fn lipschitz_side_at(
    system: &SystemDescriptor,
    l: &ExactReal,
    delta0: &ExactReal,
    horizon: Horizon,
) -> Result<(bool, Option<(ExactReal, Vec<usize>)>)> {
    let t = finite_tables(system)?;
    let spectrum: Vec<ExactReal> = t
        .chain
        .spectrum()
        .into_iter()
        .filter(|v| !v.is_zero() && *v <= *delta0)
        .collect();
    for delta in spectrum {
        let eps = l * &delta;
        if let Some(path) = unshadowable_witness(&t, &delta, &eps, horizon) {
            return Ok((false, Some((delta, path))));
        }
    }
    Ok((true, None))
}

/// The two sides of the ultrametric equivalence between `L`-Lipschitz
/// shadowing and ball expanding, computed independently and compared. The
/// verdict uses exact infinite-horizon shadowing; horizon-limited answers are
/// reported as provisional (with the re-check at T+2).
pub fn theorem16_harness(
    system: &SystemDescriptor,
    l: &ExactReal,
    delta0: &ExactReal,
    horizon: usize,
) -> Result<Thm16Report> {
    if !system.metric.ultrametric() {
        return Err(Error::InvalidParameter(
            "the equivalence harness needs an ultrametric".into(),
        ));
    }
    if *l > ExactReal::one() {
        return Err(Error::InvalidParameter("the equivalence covers 0 < L <= 1".into()));
    }
    let mut lipschitz_at_horizon = Vec::new();
    for t in [horizon, horizon + 2] {
        let (ok, _) = lipschitz_side_at(system, l, delta0, Horizon::Finite(t))?;
        lipschitz_at_horizon.push((t, ok));
    }
    let (lipschitz_exact, shadowing_witness) =
        lipschitz_side_at(system, l, delta0, Horizon::Infinite)?;
    let ball = ball_expanding_check(system, l, delta0)?;
    let agree = if *l < ExactReal::one() {
        lipschitz_exact == ball.holds
    } else {
        // L = 1: ball expanding still implies 1-Lipschitz shadowing, but not
        // conversely.
        !ball.holds || lipschitz_exact
    };
    let horizon_too_short = lipschitz_at_horizon.iter().any(|(_, ok)| *ok != lipschitz_exact);
    Ok(Thm16Report {
        l: l.clone(),
        delta0: delta0.clone(),
        lipschitz_at_horizon,
        lipschitz_exact,
        ball_expanding: ball.holds,
        ball_witness: ball.witness,
        shadowing_witness,
        agree,
        horizon_too_short,
    })
}

/// Minimal `M` with `d(f(x), f(y)) <= M d(x, y)` for all pairs (0 when the
/// map collapses everything).
pub fn lipschitz_constant(system: &SystemDescriptor) -> Result<ExactReal> {
    let t = finite_tables(system)?;
    let mut best = ExactReal::zero();
    for x in 0..t.size {
        for y in 0..t.size {
            if t.dist[x][y].is_zero() {
                continue;
            }
            let ratio = &t.dist[t.succ[x]][t.succ[y]] / &t.dist[x][y];
            best = best.max(ratio);
        }
    }
    Ok(best)
}

/// The subsystem induced on a vertex subset (which must be f-invariant);
/// returns the system plus the original indices in order.
pub fn restrict_to(system: &SystemDescriptor, vertices: &[usize]) -> Result<(SystemDescriptor, Vec<usize>)> {
    let t = finite_tables(system)?;
    let mut order: Vec<usize> = vertices.to_vec();
    order.sort_unstable();
    order.dedup();
    let position = |v: usize| order.iter().position(|&u| u == v);
    let mut succ = Vec::with_capacity(order.len());
    for &v in &order {
        let fv = t.succ[v];
        match position(fv) {
            Some(j) => succ.push(j),
            None => {
                return Err(Error::InvalidParameter(
                    "subset is not invariant under the map".into(),
                ))
            }
        }
    }
    let table: Vec<Vec<ExactReal>> = order
        .iter()
        .map(|&u| order.iter().map(|&v| t.dist[u][v].clone()).collect())
        .collect();
    let labels = order.iter().map(|v| v.to_string()).collect();
    let sub = SystemDescriptor::finite_with_metric(
        labels,
        crate::metric::MetricDescriptor::finite_table_unchecked(table),
        succ,
    )?;
    Ok((sub, order))
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictionReport {
    pub cr: Vec<usize>,
    /// Shared positive thresholds with (restricted radius, full radius).
    pub rows: Vec<(ExactReal, ExactReal, ExactReal)>,
    /// Restricted never exceeds full at every shared threshold.
    pub holds: bool,
}

/// Restriction to the chain recurrent set preserves the estimated constants:
/// the exact worst-case radius of `f|_CR` never exceeds the full system's at
/// any shared threshold.
pub fn restriction_preserves_l(system: &SystemDescriptor) -> Result<RestrictionReport> {
    let graph = build_chain_graph(system)?;
    let cr = graph.chain_recurrent_exact();
    let (sub, order) = restrict_to(system, &cr)?;
    let sub_graph = build_chain_graph(&sub)?;
    let mut rows = Vec::new();
    let mut holds = true;
    for delta in sub_graph.spectrum() {
        if delta.is_zero() {
            continue;
        }
        let restricted = minimal_shadowing_radius(&sub, &delta, Horizon::Infinite)?;
        let full = minimal_shadowing_radius(system, &delta, Horizon::Infinite)?;
        if restricted > full {
            holds = false;
        }
        rows.push((delta, restricted, full));
    }
    Ok(RestrictionReport { cr: order, rows, holds })
}

#[derive(Clone, Debug, Serialize)]
pub struct FinitenessRow {
    pub delta: ExactReal,
    pub component_count: usize,
    pub periods: Vec<usize>,
    /// Minimal distance between distinct components (absent with one
    /// component).
    pub gap: Option<ExactReal>,
    /// `ε*(gap)/gap` when the gap exists.
    pub ratio_at_gap: Option<ExactReal>,
    /// Does some recurrent vertex map into a different component?
    pub crossing: bool,
    /// The contradiction step: a contractive ratio at the gap forbids any
    /// crossing.
    pub consistent: bool,
}

/// Per-threshold component counts, periods, inter-component gaps, and the
/// local no-crossing check from the finiteness arguments.
pub fn finiteness_reports(system: &SystemDescriptor) -> Result<Vec<FinitenessRow>> {
    let graph = build_chain_graph(system)?;
    let t = finite_tables(system)?;
    let mut rows = Vec::new();
    for delta in graph.threshold_grid() {
        let components = graph.chain_components(&delta);
        let mut periods = Vec::new();
        for comp in &components {
            let (m, _) = graph.cyclic_decomposition(comp, &delta)?;
            periods.push(m);
        }
        let mut gap: Option<ExactReal> = None;
        for (i, a) in components.iter().enumerate() {
            for b in components.iter().skip(i + 1) {
                for &u in a {
                    for &v in b {
                        let d = t.dist[u][v].clone();
                        gap = Some(match gap {
                            None => d,
                            Some(g) => g.min(d),
                        });
                    }
                }
            }
        }
        let crossing = components.iter().enumerate().any(|(i, comp)| {
            comp.iter().any(|&v| {
                let fv = t.succ[v];
                components
                    .iter()
                    .enumerate()
                    .any(|(j, other)| j != i && other.contains(&fv))
            })
        });
        let ratio_at_gap = match &gap {
            Some(g) if !g.is_zero() => {
                let radius = minimal_shadowing_radius(system, g, Horizon::Infinite)?;
                Some(&radius / g)
            }
            _ => None,
        };
        let consistent = match &ratio_at_gap {
            Some(r) if *r < ExactReal::one() => !crossing,
            _ => true,
        };
        rows.push(FinitenessRow {
            delta,
            component_count: components.len(),
            periods,
            gap,
            ratio_at_gap,
            crossing,
            consistent,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Test-system generators.

/// Random finite system: uniform random map, symmetric distances drawn from
/// `{1/2, 5/8, 3/4, 7/8, 1}` (any such table satisfies the triangle
/// inequality).
pub fn random_finite_system(n: usize, seed: u64) -> Result<SystemDescriptor> {
    let mut rng = seeded_rng(seed);
    let values = [
        ExactReal::ratio(1, 2),
        ExactReal::ratio(5, 8),
        ExactReal::ratio(3, 4),
        ExactReal::ratio(7, 8),
        ExactReal::one(),
    ];
    let mut table = vec![vec![ExactReal::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = values[rng.gen_range(0..values.len())].clone();
            table[i][j] = v.clone();
            table[j][i] = v;
        }
    }
    let succ: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    SystemDescriptor::finite((0..n).map(|i| i.to_string()).collect(), table, succ)
}

/// Random finite ultrametric system: distances come from longest common
/// prefixes of binary codes (`d = 2^{-prefix}`), which always satisfy the
/// strong triangle inequality.
pub fn random_finite_ultrametric_system(n: usize, seed: u64) -> Result<SystemDescriptor> {
    assert!(n <= 64);
    let mut rng = seeded_rng(seed);
    // 4 random bits, then the index in 6 bits for uniqueness
    let codes: Vec<Vec<u8>> = (0..n)
        .map(|i| {
            let mut c: Vec<u8> = (0..4).map(|_| rng.gen_range(0..2u8)).collect();
            for b in (0..6).rev() {
                c.push(((i >> b) & 1) as u8);
            }
            c
        })
        .collect();
    let mut table = vec![vec![ExactReal::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let prefix = codes[i]
                .iter()
                .zip(&codes[j])
                .take_while(|(a, b)| a == b)
                .count() as i64;
            let d = ExactReal::from_int(2).pow_int(-prefix);
            table[i][j] = d.clone();
            table[j][i] = d;
        }
    }
    let succ: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let sys =
        SystemDescriptor::finite((0..n).map(|i| i.to_string()).collect(), table, succ)?;
    debug_assert!(sys.metric.ultrametric());
    Ok(sys)
}

fn word_label(word: &[u8]) -> String {
    word.iter().map(|b| char::from(b'0' + b)).collect()
}

fn depth_words(k: usize) -> Vec<Vec<u8>> {
    (0..(1usize << k))
        .map(|m| (0..k).map(|i| ((m >> (k - 1 - i)) & 1) as u8).collect())
        .collect()
}

fn word_metric(words: &[Vec<u8>], alpha: &ExactReal) -> Vec<Vec<ExactReal>> {
    let n = words.len();
    let mut table = vec![vec![ExactReal::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let fd = words[i]
                .iter()
                .zip(&words[j])
                .take_while(|(a, b)| a == b)
                .count() as i64;
            let d = alpha.pow_int(-(fd + 1));
            table[i][j] = d.clone();
            table[j][i] = d;
        }
    }
    table
}

/// Finite truncation of the one-sided shift on depth-k words (the unseen
/// coordinate is padded with 0, matching the image of the all-zero-tail
/// representative).
pub fn cylinder_shift_system(k: usize, alpha: ExactReal) -> Result<SystemDescriptor> {
    let words = depth_words(k);
    let index = |w: &[u8]| -> usize { w.iter().fold(0usize, |a, &b| (a << 1) | b as usize) };
    let succ: Vec<usize> = words
        .iter()
        .map(|w| {
            let mut v = w[1..].to_vec();
            v.push(0);
            index(&v)
        })
        .collect();
    SystemDescriptor::finite(
        words.iter().map(|w| word_label(w)).collect(),
        word_metric(&words, &alpha),
        succ,
    )
}

/// Finite truncation of the additive cellular map on depth-k words (image of
/// the all-zero-tail representative).
pub fn cylinder_cellular_system(k: usize, alpha: ExactReal) -> Result<SystemDescriptor> {
    let words = depth_words(k);
    let index = |w: &[u8]| -> usize { w.iter().fold(0usize, |a, &b| (a << 1) | b as usize) };
    let succ: Vec<usize> = words
        .iter()
        .map(|w| {
            let mut v: Vec<u8> = (0..k - 1).map(|i| w[i] ^ w[i + 1]).collect();
            v.push(w[k - 1]);
            index(&v)
        })
        .collect();
    SystemDescriptor::finite(
        words.iter().map(|w| word_label(w)).collect(),
        word_metric(&words, &alpha),
        succ,
    )
}

/// Exact verification of the cellular ball identity
/// `B_δ(f(x)) = f(B_{α^{-1}δ}(x))` at cylinder granularity: both sides are
/// unions of depth-k cylinders, the right side enumerated through depth-(k+1)
/// cylinders (the map sends each one onto a full depth-k cylinder).
pub fn cellular_ball_equality(k: usize, alpha: &ExactReal) -> Result<bool> {
    let system = SystemDescriptor::additive_cellular(alpha.clone())?;
    let cylinder_in_ball =
        |word: &[u8], center: &SymbolicPoint, r: &ExactReal| -> bool {
            // sup over the cylinder: fixed coordinates, then a free tail of
            // weight alpha^{-(len+1)}
            for (i, &s) in word.iter().enumerate() {
                let n = (i + 1) as i64;
                if s != center.coord(n) && alpha.pow_int(-n) > *r {
                    return false;
                }
            }
            alpha.pow_int(-(word.len() as i64 + 1)) <= *r
        };
    let deep = depth_words(k + 1);
    let shallow = depth_words(k);
    for delta_exp in 1..=k as i64 {
        let delta = alpha.pow_int(-delta_exp);
        let sub_radius = alpha.pow_int(-(delta_exp + 1));
        for x_word in &deep {
            let x = SymbolicPoint::one_sided(x_word, &[0], 2)?;
            let fx = additive_cellular_map(&x)?;
            let lhs: Vec<&Vec<u8>> = shallow
                .iter()
                .filter(|u| cylinder_in_ball(u, &fx, &delta))
                .collect();
            let mut rhs: Vec<Vec<u8>> = deep
                .iter()
                .filter(|v| {
                    let vp = SymbolicPoint::one_sided(v, &[0], 2).unwrap();
                    // [v] ⊆ B_{α^{-1}δ}(x)
                    let _ = &vp;
                    cylinder_in_ball(v, &x, &sub_radius)
                })
                .map(|v| (0..k).map(|i| v[i] ^ v[i + 1]).collect())
                .collect();
            rhs.sort();
            rhs.dedup();
            let mut lhs_sorted: Vec<Vec<u8>> = lhs.into_iter().cloned().collect();
            lhs_sorted.sort();
            if lhs_sorted != rhs {
                return Ok(false);
            }
        }
    }
    let _ = system;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap_system() -> SystemDescriptor {
        SystemDescriptor::finite(
            vec!["a".into(), "b".into()],
            vec![
                vec![ExactReal::zero(), ExactReal::one()],
                vec![ExactReal::one(), ExactReal::zero()],
            ],
            vec![1, 0],
        )
        .unwrap()
    }

    #[test]
    fn swap_radius_is_one_at_delta_one() {
        // At δ = 1 the constant pseudo-orbit (a, a, a) defeats both orbits.
        let sys = swap_system();
        let r = minimal_shadowing_radius(&sys, &ExactReal::one(), Horizon::Finite(3)).unwrap();
        assert_eq!(r, ExactReal::one());
    }

    #[test]
    fn radius_zero_below_spectrum() {
        let sys = swap_system();
        let r = minimal_shadowing_radius(&sys, &ExactReal::ratio(1, 2), Horizon::Finite(4))
            .unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn radius_monotone_in_delta() {
        for seed in 0..20 {
            let sys = random_finite_system(5, seed).unwrap();
            let small = minimal_shadowing_radius(&sys, &ExactReal::ratio(1, 2), Horizon::Finite(5))
                .unwrap();
            let large =
                minimal_shadowing_radius(&sys, &ExactReal::one(), Horizon::Finite(5)).unwrap();
            assert!(small <= large);
        }
    }

    #[test]
    fn sampled_mode_is_a_lower_bound() {
        for seed in 0..10 {
            let sys = random_finite_system(5, seed).unwrap();
            let delta = ExactReal::ratio(3, 4);
            let exact = minimal_shadowing_radius(&sys, &delta, Horizon::Finite(5)).unwrap();
            let sampled =
                minimal_shadowing_radius_sampled(&sys, &delta, 5, 40, seed).unwrap();
            assert!(sampled <= exact);
        }
    }

    #[test]
    fn estimator_deterministic_and_flags_swap_noncontractive() {
        let sys = swap_system();
        let a = estimate_l(&sys, Horizon::Finite(4), EstimateMode::Exhaustive).unwrap();
        let b = estimate_l(&sys, Horizon::Finite(4), EstimateMode::Exhaustive).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.contractive, Some(false));
        assert!(a.sup_ratio.unwrap() >= ExactReal::one());
    }

    #[test]
    fn adapted_isometry_estimates_at_most_one() {
        // A permutation with its adapted metric is 1-Lipschitz-shadowing at
        // every threshold.
        let base = random_finite_ultrametric_system(6, 3).unwrap();
        // turn the random map into a permutation
        let succ: Vec<usize> = (0..6).map(|i| (i + 2) % 6).collect();
        let perm = SystemDescriptor::finite_with_metric(
            (0..6).map(|i| i.to_string()).collect(),
            base.metric.clone(),
            succ,
        )
        .unwrap();
        let adapted = crate::decompose::adapted_isometry_metric(&perm).unwrap();
        let sys = SystemDescriptor::finite_with_metric(
            (0..6).map(|i| i.to_string()).collect(),
            adapted,
            perm.finite_successors().unwrap().to_vec(),
        )
        .unwrap();
        let report = estimate_l(&sys, Horizon::Infinite, EstimateMode::Exhaustive).unwrap();
        for row in &report.rows {
            assert!(row.ratio <= ExactReal::one(), "ratio {} at {}", row.ratio, row.delta);
        }
    }

    #[test]
    fn ball_check_examples() {
        // one-point system: vacuous
        let one_pt = SystemDescriptor::finite(
            vec!["p".into()],
            vec![vec![ExactReal::zero()]],
            vec![0],
        )
        .unwrap();
        assert!(ball_expanding_check(&one_pt, &ExactReal::ratio(1, 2), &ExactReal::one())
            .unwrap()
            .holds);
        // 2-point swap with L = 1/2: fails with a witness
        let check =
            ball_expanding_check(&swap_system(), &ExactReal::ratio(1, 2), &ExactReal::one())
                .unwrap();
        assert!(!check.holds);
        assert!(check.witness.is_some());
    }

    #[test]
    fn thm16_adapted_isometry_boundary() {
        // isometry with L = 1: both sides true
        let table = vec![
            vec![ExactReal::zero(), ExactReal::ratio(1, 2), ExactReal::one()],
            vec![ExactReal::ratio(1, 2), ExactReal::zero(), ExactReal::one()],
            vec![ExactReal::one(), ExactReal::one(), ExactReal::zero()],
        ];
        let perm = SystemDescriptor::finite(
            vec!["a".into(), "b".into(), "c".into()],
            table,
            vec![1, 0, 2],
        )
        .unwrap();
        let adapted = crate::decompose::adapted_isometry_metric(&perm).unwrap();
        let sys = SystemDescriptor::finite_with_metric(
            vec!["a".into(), "b".into(), "c".into()],
            adapted,
            vec![1, 0, 2],
        )
        .unwrap();
        let report =
            theorem16_harness(&sys, &ExactReal::one(), &ExactReal::one(), 6).unwrap();
        assert!(report.ball_expanding);
        assert!(report.lipschitz_exact);
        assert!(report.agree);
    }

    #[test]
    fn thm16_agreement_on_random_ultrametric_systems() {
        for seed in 0..30 {
            let sys = random_finite_ultrametric_system(6, seed).unwrap();
            let graph = build_chain_graph(&sys).unwrap();
            let delta0 = graph.spectrum().last().unwrap().clone();
            for l in [ExactReal::ratio(1, 2), ExactReal::ratio(1, 3), ExactReal::one()] {
                let report = theorem16_harness(&sys, &l, &delta0, 6).unwrap();
                assert!(report.agree, "seed {seed} L {l}");
            }
        }
    }

    #[test]
    fn lipschitz_constant_examples() {
        // isometry: M = 1
        let sys = swap_system();
        assert_eq!(lipschitz_constant(&sys).unwrap(), ExactReal::one());
        // collapse: M = 0
        let collapse = SystemDescriptor::finite(
            vec!["a".into(), "b".into()],
            vec![
                vec![ExactReal::zero(), ExactReal::one()],
                vec![ExactReal::one(), ExactReal::zero()],
            ],
            vec![0, 0],
        )
        .unwrap();
        assert!(lipschitz_constant(&collapse).unwrap().is_zero());
    }

    #[test]
    fn restriction_examples() {
        // permutation: CR is everything, equality
        let report = restriction_preserves_l(&swap_system()).unwrap();
        assert!(report.holds);
        assert_eq!(report.cr, vec![0, 1]);
        // a -> b -> b: restriction is the fixed point
        let funnel = SystemDescriptor::finite(
            vec!["a".into(), "b".into()],
            vec![
                vec![ExactReal::zero(), ExactReal::one()],
                vec![ExactReal::one(), ExactReal::zero()],
            ],
            vec![1, 1],
        )
        .unwrap();
        let report = restriction_preserves_l(&funnel).unwrap();
        assert!(report.holds);
        assert_eq!(report.cr, vec![1]);
    }

    #[test]
    fn finiteness_rows_consistent() {
        for seed in 0..20 {
            let sys = random_finite_system(6, seed).unwrap();
            for row in finiteness_reports(&sys).unwrap() {
                assert!(row.consistent, "seed {seed} delta {}", row.delta);
            }
        }
    }

    #[test]
    fn two_fixed_points_crossing_check() {
        // two fixed points at distance 1
        let sys = SystemDescriptor::finite(
            vec!["p".into(), "q".into()],
            vec![
                vec![ExactReal::zero(), ExactReal::one()],
                vec![ExactReal::one(), ExactReal::zero()],
            ],
            vec![0, 1],
        )
        .unwrap();
        let rows = finiteness_reports(&sys).unwrap();
        // below the spectrum: two components at distance 1, no crossing
        let first = &rows[0];
        assert_eq!(first.component_count, 2);
        assert_eq!(first.gap, Some(ExactReal::one()));
        assert!(!first.crossing);
        assert!(first.consistent);
    }

    #[test]
    fn cellular_ball_identity_small_depths() {
        for k in 2..=4 {
            assert!(cellular_ball_equality(k, &ExactReal::from_int(2)).unwrap(), "depth {k}");
        }
    }

    #[test]
    fn snowflake_estimator_law_exact() {
        // On a finite system with square-friendly distances, the estimate
        // under d^(1/2) at δ^(1/2) equals the square root of the estimate at δ.
        let table = vec![
            vec![ExactReal::zero(), ExactReal::ratio(1, 4), ExactReal::one()],
            vec![ExactReal::ratio(1, 4), ExactReal::zero(), ExactReal::one()],
            vec![ExactReal::one(), ExactReal::one(), ExactReal::zero()],
        ];
        let sys = SystemDescriptor::finite(
            vec!["a".into(), "b".into(), "c".into()],
            table,
            vec![1, 0, 0],
        )
        .unwrap();
        let snow = sys.snowflake(1, 2).unwrap();
        let graph = build_chain_graph(&sys).unwrap();
        for delta in graph.spectrum() {
            if delta.is_zero() {
                continue;
            }
            let base = minimal_shadowing_radius(&sys, &delta, Horizon::Infinite).unwrap();
            let delta_a = delta.pow_ratio(1, 2).unwrap();
            let snow_radius =
                minimal_shadowing_radius(&snow, &delta_a, Horizon::Infinite).unwrap();
            assert!(snow_radius <= base.pow_ratio(1, 2).unwrap());
        }
    }
}
