//! Pseudo-orbits, chains, and shadowing verification.
//!
//! Infinite pseudo-orbits are represented as a finite prefix plus a
//! periodically repeated suffix block. Verification of `d(f^i(x), x_i) <= ε`
//! over all `i >= 0` is decidable for these inputs: the pair (orbit point,
//! pseudo-orbit position) ranges over finitely many states, so the check runs
//! until a state repeats and the bound is then certified for every index.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricDescriptor;
use crate::point::{CirclePoint, Point, Side, Sym, SymbolicPoint};
use crate::rational::ExactReal;
use crate::systems::{MapKind, SystemDescriptor};

/// Tail behaviour of a pseudo-orbit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tail {
    /// The listed points are the whole pseudo-orbit.
    None,
    /// Points from `block_start` onward repeat forever.
    PeriodicFrom { block_start: usize },
}

/// A finite or periodically-extended pseudo-orbit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoOrbit {
    points: Vec<Point>,
    tail: Tail,
}

impl PseudoOrbit {
    pub fn finite(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("pseudo-orbit needs at least 2 points".into()));
        }
        Ok(PseudoOrbit { points, tail: Tail::None })
    }

    pub fn tail_periodic(points: Vec<Point>, block_start: usize) -> Result<Self> {
        if points.is_empty() || block_start >= points.len() {
            return Err(Error::InvalidParameter("periodic block must be non-empty".into()));
        }
        Ok(PseudoOrbit { points, tail: Tail::PeriodicFrom { block_start } })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.tail, Tail::PeriodicFrom { .. })
    }

    pub fn explicit_len(&self) -> usize {
        self.points.len()
    }

    /// The point at any index, unrolling the periodic tail.
    pub fn point_at(&self, i: usize) -> &Point {
        if i < self.points.len() {
            return &self.points[i];
        }
        match self.tail {
            Tail::None => panic!("index {i} beyond a finite pseudo-orbit"),
            Tail::PeriodicFrom { block_start } => {
                let b = self.points.len() - block_start;
                &self.points[block_start + (i - block_start) % b]
            }
        }
    }

    /// Position state used for stabilization detection: indices inside the
    /// explicit list are themselves, tail indices reduce modulo the block.
    fn position_state(&self, i: usize) -> usize {
        if i < self.points.len() {
            i
        } else {
            match self.tail {
                Tail::None => unreachable!(),
                Tail::PeriodicFrom { block_start } => {
                    let b = self.points.len() - block_start;
                    block_start + (i - block_start) % b
                }
            }
        }
    }
}

/// A finite chain `(x_0, ..., x_k)`, `k >= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    points: Vec<Point>,
}

impl Chain {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("a chain needs k >= 1".into()));
        }
        Ok(Chain { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn k(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_cycle(&self) -> bool {
        self.points.first() == self.points.last()
    }

    pub fn defect(&self, system: &SystemDescriptor) -> Result<ExactReal> {
        let mut worst = ExactReal::zero();
        for w in self.points.windows(2) {
            let gap = system.distance(&system.evaluate(&w[0])?, &w[1])?;
            worst = worst.max(gap);
        }
        Ok(worst)
    }
}

/// What a shadowing certificate claims about its point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuaranteeClass {
    /// `d(f^i(x), x_i) <= bound` for all verified indices.
    PerIndex,
    /// Per-index bound plus `f^k(x) = x_k` exactly.
    ExactEndpoint,
    /// `f^k(x) = x` exactly, with `d(x, x_0) <= bound`.
    Periodic,
}

/// A shadowing point together with the bound it achieves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowCertificate {
    pub shadow: Point,
    pub bound: ExactReal,
    pub class: GuaranteeClass,
    /// Highest index that was explicitly checked.
    pub horizon: usize,
    /// True when periodic-tail stabilization upgraded the check to all i >= 0.
    pub all_indices: bool,
    /// The Lipschitz shadowing constant of the family that produced this
    /// certificate, when one applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<ExactReal>,
}

impl ShadowCertificate {
    pub fn is_contractive(&self) -> bool {
        self.lipschitz
            .as_ref()
            .map(|l| *l < ExactReal::one())
            .unwrap_or(false)
    }
}

/// `max_i d(f(x_i), x_{i+1})`, including the wrap gap of a periodic tail.
pub fn pseudo_orbit_defect(system: &SystemDescriptor, xi: &PseudoOrbit) -> Result<ExactReal> {
    let pts = xi.points();
    let mut worst = ExactReal::zero();
    for w in pts.windows(2) {
        let gap = system.distance(&system.evaluate(&w[0])?, &w[1])?;
        worst = worst.max(gap);
    }
    if let Tail::PeriodicFrom { block_start } = *xi.tail() {
        let wrap = system.distance(
            &system.evaluate(&pts[pts.len() - 1])?,
            &pts[block_start],
        )?;
        worst = worst.max(wrap);
    }
    Ok(worst)
}

/// Outcome of a shadowing verification.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub ok: bool,
    /// Number of indices checked explicitly.
    pub checked: usize,
    /// True when the periodic-tail stabilization argument certifies the bound
    /// for every index, not just the checked ones.
    pub all_indices: bool,
    pub first_violation: Option<usize>,
}

/// Checks `d(f^i(x), x_i) <= eps`.
///
/// For finite pseudo-orbits every index is checked. For periodic-tail inputs
/// the scan continues past `horizon` until the (orbit point, tail position)
/// state repeats; both components are eventually periodic, so this terminates
/// and certifies the bound for all `i >= 0`.
pub fn verify_shadowing_report(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    x: &Point,
    eps: &ExactReal,
    horizon: usize,
) -> Result<VerifyReport> {
    let mut y = x.clone();
    match xi.tail() {
        Tail::None => {
            let n = xi.explicit_len();
            for i in 0..n {
                if !system.distance_le(&y, xi.point_at(i), eps)? {
                    return Ok(VerifyReport {
                        ok: false,
                        checked: i + 1,
                        all_indices: false,
                        first_violation: Some(i),
                    });
                }
                if i + 1 < n {
                    y = system.evaluate(&y)?;
                }
            }
            Ok(VerifyReport { ok: true, checked: n, all_indices: false, first_violation: None })
        }
        Tail::PeriodicFrom { block_start } => {
            if horizon < *block_start {
                return Err(Error::InvalidParameter(
                    "horizon must reach the periodic block".into(),
                ));
            }
            let mut seen: HashMap<(Point, usize), usize> = HashMap::new();
            let mut i = 0usize;
            loop {
                let state = (y.clone(), xi.position_state(i));
                if i >= horizon {
                    if let Some(_prev) = seen.get(&state) {
                        return Ok(VerifyReport {
                            ok: true,
                            checked: i,
                            all_indices: true,
                            first_violation: None,
                        });
                    }
                }
                seen.insert(state, i);
                if !system.distance_le(&y, xi.point_at(i), eps)? {
                    return Ok(VerifyReport {
                        ok: false,
                        checked: i + 1,
                        all_indices: false,
                        first_violation: Some(i),
                    });
                }
                y = system.evaluate(&y)?;
                i += 1;
            }
        }
    }
}

/// Boolean form of [`verify_shadowing_report`].
pub fn verify_shadowing(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    x: &Point,
    eps: &ExactReal,
    horizon: usize,
) -> Result<bool> {
    Ok(verify_shadowing_report(system, xi, x, eps, horizon)?.ok)
}

/// h-shadowing check: per-index bound for `i <= k-1` plus `f^k(x) = x_k`
/// exactly (canonical-form equality).
pub fn verify_h_shadow(
    system: &SystemDescriptor,
    chain: &Chain,
    x: &Point,
    eps: &ExactReal,
) -> Result<bool> {
    let k = chain.k();
    let mut y = x.clone();
    for i in 0..k {
        if !system.distance_le(&y, &chain.points()[i], eps)? {
            return Ok(false);
        }
        y = system.evaluate(&y)?;
    }
    Ok(y == chain.points()[k])
}

/// Re-runs the verification a certificate claims.
pub fn verify_certificate(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    cert: &ShadowCertificate,
) -> Result<bool> {
    let report = verify_shadowing_report(system, xi, &cert.shadow, &cert.bound, cert.horizon)?;
    if !report.ok {
        return Ok(false);
    }
    if cert.all_indices && !report.all_indices {
        return Ok(false);
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Seeded generators.

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest `n >= 1` with `alpha^{-n} * maxd <= delta`.
fn perturbation_depth(alpha: &ExactReal, maxd: &ExactReal, delta: &ExactReal) -> i64 {
    let mut n = 1i64;
    while &alpha.pow_int(-n) * maxd > *delta {
        n += 1;
        assert!(n < 4096, "delta too small for a bounded perturbation depth");
    }
    n
}

fn weighted_sup_params(system: &SystemDescriptor) -> Option<(ExactReal, ExactReal, Side)> {
    match &system.metric {
        MetricDescriptor::WeightedSup { side, alpha, symbols } => {
            Some((alpha.clone(), symbols.max_distance(), *side))
        }
        _ => None,
    }
}

fn random_symbol(rng: &mut ChaCha8Rng, alphabet: u8) -> Sym {
    rng.gen_range(0..alphabet)
}

/// Random eventually-periodic point of a sequence-space system.
pub fn random_symbolic_point(
    rng: &mut ChaCha8Rng,
    side: Side,
    alphabet: u8,
) -> Result<SymbolicPoint> {
    match side {
        Side::One => {
            let pre_len = rng.gen_range(0..=3);
            let per_len = rng.gen_range(1..=4);
            let pre: Vec<Sym> = (0..pre_len).map(|_| random_symbol(rng, alphabet)).collect();
            let per: Vec<Sym> = (0..per_len).map(|_| random_symbol(rng, alphabet)).collect();
            SymbolicPoint::one_sided(&pre, &per, alphabet)
        }
        Side::Two => {
            let l_len = rng.gen_range(1..=3);
            let c_len = rng.gen_range(0..=3);
            let r_len = rng.gen_range(1..=3);
            let l: Vec<Sym> = (0..l_len).map(|_| random_symbol(rng, alphabet)).collect();
            let c: Vec<Sym> = (0..c_len).map(|_| random_symbol(rng, alphabet)).collect();
            let r: Vec<Sym> = (0..r_len).map(|_| random_symbol(rng, alphabet)).collect();
            let anchor = rng.gen_range(-2..=2);
            SymbolicPoint::two_sided(&l, &c, &r, anchor, alphabet)
        }
    }
}

/// Random starting point of any system.
pub fn random_point(system: &SystemDescriptor, rng: &mut ChaCha8Rng) -> Result<Point> {
    match &system.domain {
        crate::systems::DomainKind::OneSidedSequences { alphabet } => Ok(Point::Symbolic(
            random_symbolic_point(rng, Side::One, *alphabet)?,
        )),
        crate::systems::DomainKind::TwoSidedSequences { alphabet } => Ok(Point::Symbolic(
            random_symbolic_point(rng, Side::Two, *alphabet)?,
        )),
        crate::systems::DomainKind::Circle => {
            let g = CIRCLE_GRID;
            Ok(Point::Circle(CirclePoint::from_ratio(rng.gen_range(0..g), g)))
        }
        crate::systems::DomainKind::Finite { labels } => {
            Ok(Point::Finite(rng.gen_range(0..labels.len())))
        }
    }
}

const CIRCLE_GRID: i64 = 2520;

/// Replaces symbols of `p` at depths >= `from` (absolute index for two-sided
/// points) inside a bounded window, leaving the canonical tail intact.
fn perturb_symbolic(
    rng: &mut ChaCha8Rng,
    p: &SymbolicPoint,
    from: i64,
    boundary_flip: bool,
) -> Result<SymbolicPoint> {
    let window = 5i64;
    let alphabet = p.alphabet();
    match p.side() {
        Side::One => {
            let (start, period) = p.one_sided_shape();
            let hi = (from + window).max(start);
            let mut pre: Vec<Sym> = (1..hi).map(|n| p.coord(n)).collect();
            let word: Vec<Sym> = (hi..hi + period).map(|n| p.coord(n)).collect();
            for n in from..hi {
                let idx = (n - 1) as usize;
                if n == from && boundary_flip {
                    let old = pre[idx];
                    pre[idx] = (old + 1 + rng.gen_range(0..alphabet - 1)) % alphabet;
                } else if rng.gen_bool(0.4) {
                    pre[idx] = random_symbol(rng, alphabet);
                }
            }
            SymbolicPoint::one_sided(&pre, &word, alphabet)
        }
        Side::Two => {
            let (rstart, rper, lend, lper) = p.two_sided_shape();
            let hi = (from + window).max(rstart.max(0));
            let lo = (-from - window).min(lend.min(0) - 1);
            let mut center: Vec<Sym> = (lo..=hi).map(|n| p.coord(n)).collect();
            let left: Vec<Sym> = (lo - lper..lo).map(|n| p.coord(n)).collect();
            let right: Vec<Sym> = (hi + 1..=hi + rper).map(|n| p.coord(n)).collect();
            let mut flip_done = false;
            for n in lo..=hi {
                if n.abs() < from {
                    continue;
                }
                let idx = (n - lo) as usize;
                if boundary_flip && !flip_done && n.abs() == from {
                    let old = center[idx];
                    center[idx] = (old + 1 + rng.gen_range(0..alphabet - 1)) % alphabet;
                    flip_done = true;
                } else if rng.gen_bool(0.3) {
                    center[idx] = random_symbol(rng, alphabet);
                }
            }
            SymbolicPoint::two_sided(&left, &center, &right, lo, alphabet)
        }
    }
}

fn perturb_circle(rng: &mut ChaCha8Rng, z: &CirclePoint, budget: &ExactReal) -> CirclePoint {
    // Steps on the 1/CIRCLE_GRID grid, capped by the budget and a half turn.
    let g = CIRCLE_GRID;
    let mut max_steps = 0i64;
    while max_steps < g / 2
        && ExactReal::ratio(max_steps + 1, g) <= *budget
    {
        max_steps += 1;
    }
    let delta = rng.gen_range(-max_steps..=max_steps);
    let shift = num_rational::BigRational::new(delta.into(), g.into());
    CirclePoint::new(z.angle() + shift)
}

fn step_budget(system: &SystemDescriptor, delta: &ExactReal) -> Result<StepBudget> {
    if let Some((alpha, maxd, _side)) = weighted_sup_params(system) {
        let depth = perturbation_depth(&alpha, &maxd, delta);
        Ok(StepBudget::Symbolic { depth })
    } else {
        match &system.metric {
            MetricDescriptor::CircleArc => Ok(StepBudget::Circle),
            MetricDescriptor::FiniteTable { .. } => Ok(StepBudget::Finite),
            _ => Err(Error::Unsupported("random generation on this metric".into())),
        }
    }
}

enum StepBudget {
    Symbolic { depth: i64 },
    Circle,
    Finite,
}

/// Random δ-pseudo orbit of `length` points, deterministic in `seed`.
/// The returned orbit re-verifies `pseudo_orbit_defect <= delta`.
pub fn random_pseudo_orbit(
    system: &SystemDescriptor,
    delta: &ExactReal,
    length: usize,
    seed: u64,
) -> Result<PseudoOrbit> {
    if length < 2 {
        return Err(Error::InvalidParameter("need at least 2 points".into()));
    }
    if delta.is_zero() {
        // δ = 0 admits only genuine orbits.
        let mut rng = seeded_rng(seed);
        let x0 = random_point(system, &mut rng)?;
        return genuine_orbit(system, &x0, length);
    }
    let mut rng = seeded_rng(seed);
    let budget = step_budget(system, delta)?;
    let mut points = vec![random_point(system, &mut rng)?];
    for _ in 1..length {
        let image = system.evaluate(points.last().unwrap())?;
        let next = perturb_within(system, &mut rng, &image, delta, &budget)?;
        points.push(next);
    }
    let orbit = PseudoOrbit::finite(points)?;
    debug_assert!(pseudo_orbit_defect(system, &orbit)? <= *delta);
    Ok(orbit)
}

fn perturb_within(
    system: &SystemDescriptor,
    rng: &mut ChaCha8Rng,
    image: &Point,
    delta: &ExactReal,
    budget: &StepBudget,
) -> Result<Point> {
    match budget {
        StepBudget::Symbolic { depth } => {
            let boundary_flip = rng.gen_bool(0.5);
            Ok(Point::Symbolic(perturb_symbolic(
                rng,
                image.as_symbolic()?,
                *depth,
                boundary_flip,
            )?))
        }
        StepBudget::Circle => Ok(Point::Circle(perturb_circle(
            rng,
            image.as_circle()?,
            delta,
        ))),
        StepBudget::Finite => {
            let size = system.finite_size()?;
            let mut ball = Vec::new();
            for j in 0..size {
                if system.distance_le(image, &Point::Finite(j), delta)? {
                    ball.push(j);
                }
            }
            // f(x_i) itself is always in the ball.
            Ok(Point::Finite(ball[rng.gen_range(0..ball.len())]))
        }
    }
}

/// The fully periodic point agreeing with `p` on the window `|n| <= w`; its
/// shift orbit closes after one period.
fn periodize_two_sided(p: &SymbolicPoint, w: i64) -> Result<SymbolicPoint> {
    let word: Vec<Sym> = (-w..=w).map(|n| p.coord(n)).collect();
    SymbolicPoint::two_sided(&word, &[], &word, -w, p.alphabet())
}

/// The genuine orbit `(x, f(x), ..., f^{length-1}(x))`.
pub fn genuine_orbit(system: &SystemDescriptor, x: &Point, length: usize) -> Result<PseudoOrbit> {
    let mut points = vec![x.clone()];
    for _ in 1..length {
        points.push(system.evaluate(points.last().unwrap())?);
    }
    PseudoOrbit::finite(points)
}

/// Iterates `x` until its orbit revisits a canonical form; returns the path
/// up to (not including) the revisit and the index the cycle re-enters.
pub fn orbit_to_cycle(system: &SystemDescriptor, x: &Point) -> Result<(Vec<Point>, usize)> {
    let mut seen: HashMap<Point, usize> = HashMap::new();
    let mut path = Vec::new();
    let mut y = x.clone();
    loop {
        if let Some(&j) = seen.get(&y) {
            return Ok((path, j));
        }
        seen.insert(y.clone(), path.len());
        path.push(y.clone());
        y = system.evaluate(&y)?;
        if path.len() > 2_000_000 {
            return Err(Error::BudgetExceeded("orbit failed to close".into()));
        }
    }
}

/// How many leading coordinates of a perturbation stay untouched so that both
/// pseudo-orbit gaps around the perturbed point stay within δ. The image of a
/// depth-`D` perturbation moves by at most one weight class for the shifts and
/// the cellular map, and by a `1/K` depth reduction for the subsequence map.
fn safe_tail_depth(system: &SystemDescriptor, base_depth: i64) -> i64 {
    match &system.map {
        MapKind::Subsequence { k } => (*k as i64) * (base_depth + 1),
        _ => base_depth + 1,
    }
}

/// Random δ-pseudo orbit with a periodic tail: a freely perturbed prefix
/// followed by a perturbation of a genuine cycle. Deterministic in `seed`.
pub fn random_tail_periodic(
    system: &SystemDescriptor,
    delta: &ExactReal,
    prefix_len: usize,
    seed: u64,
) -> Result<PseudoOrbit> {
    let mut rng = seeded_rng(seed);
    let budget = step_budget(system, delta)?;

    // Prefix: free perturbed steps.
    let mut points = vec![random_point(system, &mut rng)?];
    for _ in 1..prefix_len.max(1) {
        let image = system.evaluate(points.last().unwrap())?;
        points.push(perturb_within(system, &mut rng, &image, delta, &budget)?);
    }

    // Block: perturb a genuine cycle reachable within δ from the prefix end.
    // Two-sided shift orbits of non-periodic points never revisit a canonical
    // form, so there the cycle comes from a periodization of the image; the
    // other maps always close up.
    let image = system.evaluate(points.last().unwrap())?;
    let near = if matches!(system.map, MapKind::ShiftTwoSided) {
        match &budget {
            StepBudget::Symbolic { depth } => {
                Point::Symbolic(periodize_two_sided(image.as_symbolic()?, depth + 1)?)
            }
            _ => unreachable!("two-sided shift carries a weighted-sup metric"),
        }
    } else {
        perturb_within(system, &mut rng, &image, delta, &budget)?
    };
    let (path, cycle_start) = orbit_to_cycle(system, &near)?;
    // Walk the pre-cycle part as genuine steps (gap 0), then perturb around
    // the cycle itself.
    points.extend_from_slice(&path[..cycle_start]);
    let cycle = &path[cycle_start..];
    let block_start = points.len();
    match &budget {
        StepBudget::Symbolic { depth } => {
            let tail_depth = safe_tail_depth(system, *depth);
            for (j, q) in cycle.iter().enumerate() {
                if j == 0 {
                    points.push(q.clone());
                } else {
                    points.push(Point::Symbolic(perturb_symbolic(
                        &mut rng,
                        q.as_symbolic()?,
                        tail_depth,
                        false,
                    )?));
                }
            }
        }
        StepBudget::Circle => {
            let n = match system.map {
                MapKind::CirclePower { n } => n,
                _ => 2,
            };
            // Perturbations of q_i move each adjacent gap by at most
            // n*step + step, so budget δ/(n+1) keeps gaps within δ.
            let sub = delta / &ExactReal::from_int(u64::from(n) + 1);
            for (j, q) in cycle.iter().enumerate() {
                if j == 0 {
                    points.push(q.clone());
                } else {
                    points.push(Point::Circle(perturb_circle(&mut rng, q.as_circle()?, &sub)));
                }
            }
        }
        StepBudget::Finite => {
            for q in cycle {
                points.push(q.clone());
            }
        }
    }
    let orbit = PseudoOrbit::tail_periodic(points, block_start)?;
    debug_assert!(pseudo_orbit_defect(system, &orbit)? <= *delta);
    Ok(orbit)
}

/// Random δ-cycle of length `k`: a perturbed genuine periodic orbit with the
/// endpoints pinned to the same point.
pub fn random_cycle(
    system: &SystemDescriptor,
    delta: &ExactReal,
    k: usize,
    seed: u64,
) -> Result<Chain> {
    if k < 1 {
        return Err(Error::InvalidParameter("cycle length must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    match step_budget(system, delta)? {
        StepBudget::Symbolic { depth } => {
            let alphabet = system.alphabet().unwrap_or(2);
            let side = match &system.metric {
                MetricDescriptor::WeightedSup { side, .. } => *side,
                _ => Side::One,
            };
            // A genuine period-k point of the shift: any word of length k.
            let q0 = match (&system.map, side) {
                (MapKind::ShiftOneSided, Side::One) => {
                    let w: Vec<Sym> = (0..k).map(|_| random_symbol(&mut rng, alphabet)).collect();
                    Point::Symbolic(SymbolicPoint::one_sided(&[], &w, alphabet)?)
                }
                (MapKind::ShiftTwoSided, Side::Two) => {
                    let w: Vec<Sym> = (0..k).map(|_| random_symbol(&mut rng, alphabet)).collect();
                    Point::Symbolic(SymbolicPoint::two_sided(&w, &[], &w, 0, alphabet)?)
                }
                _ => {
                    // Fall back to the eventual cycle of a random orbit and
                    // repeat it to a multiple of its length.
                    return cycle_from_eventual(system, &mut rng, delta, k, depth);
                }
            };
            let tail_depth = safe_tail_depth(system, depth);
            let mut points = vec![q0.clone()];
            let mut q = q0.clone();
            for i in 1..k {
                q = system.evaluate(&q)?;
                let _ = i;
                points.push(Point::Symbolic(perturb_symbolic(
                    &mut rng,
                    q.as_symbolic()?,
                    tail_depth,
                    false,
                )?));
            }
            points.push(q0);
            let chain = Chain::new(points)?;
            debug_assert!(chain.is_cycle());
            debug_assert!(chain.defect(system)? <= *delta);
            Ok(chain)
        }
        _ => cycle_from_eventual(system, &mut rng, delta, k, 0),
    }
}

fn cycle_from_eventual(
    system: &SystemDescriptor,
    rng: &mut ChaCha8Rng,
    delta: &ExactReal,
    k: usize,
    _depth: i64,
) -> Result<Chain> {
    // Genuine eventual cycle (c_0, ..., c_{m-1}); a δ-cycle of length k exists
    // whenever m divides k, so resample until it does.
    for _ in 0..256 {
        let x0 = random_point(system, rng)?;
        let (path, start) = orbit_to_cycle(system, &x0)?;
        let m = path.len() - start;
        if k % m == 0 {
            let mut points = Vec::with_capacity(k + 1);
            for i in 0..=k {
                points.push(path[start + (i % m)].clone());
            }
            let chain = Chain::new(points)?;
            debug_assert!(chain.defect(system)? <= *delta);
            return Ok(chain);
        }
    }
    Err(Error::BudgetExceeded(format!(
        "no genuine cycle of length dividing {k} found"
    )))
}
