//! Iterative refinement schemes: h-shadowing refinement, periodic-point
//! extraction, preimage extraction, and ball-inclusion backward induction.
//!
//! Each scheme consumes a shadowing oracle (or a preimage selector) and runs
//! the corresponding contraction until its limit is attained exactly. On the
//! representable systems the limits are reachable in finitely many steps:
//! shift-constructor iterates stabilize coordinatewise, circle loops close on
//! the rational fixed point of an affine contraction, and ball-inclusion
//! fixed points are found by a verified window guess. Every oracle reply is
//! re-verified; a violation surfaces as an oracle fault with its witness.

use num_traits::Zero;
use serde::Serialize;

use crate::constructors::{
    preimage_selector_cellular, preimage_selector_circle, shadow_one_sided_shift,
    shadow_product_one_sided, shadow_product_two_sided, shadow_two_sided_shift,
};
use crate::error::{Error, Result};
use crate::metric::{AlphabetMetric, MetricDescriptor};
use crate::orbits::{
    orbit_to_cycle, verify_h_shadow, Chain, GuaranteeClass, PseudoOrbit, ShadowCertificate,
};
use crate::point::{Point, Side, Sym, SymbolicPoint};
use crate::rational::ExactReal;
use crate::systems::{MapKind, SystemDescriptor};

const MAX_REFINE_ITER: usize = 64;

/// A shadowing oracle: given a δ-chain, produces a point whose orbit stays
/// within `constant() * δ` of every chain entry (endpoint included).
pub trait ShadowOracle {
    /// The Lipschitz shadowing constant L.
    fn constant(&self) -> ExactReal;
    /// Validity threshold δ₀ (`None` means every δ is admissible).
    fn threshold(&self) -> Option<ExactReal>;
    fn shadow_chain(&self, chain: &Chain, delta: &ExactReal) -> Result<Point>;
}

/// A preimage selector: `preimage(base, target, r)` returns `z` with
/// `f(z) = target` exactly and `d(z, base) <= r`.
pub trait PreimageSelector {
    fn preimage(&self, base: &Point, target: &Point, radius: &ExactReal) -> Result<Point>;
}

/// Oracle backed by the explicit shift constructions; the constant follows
/// the metric: `α^{-1}` (one-sided), 1 (two-sided), `1/(α-1)` and `α/(α-1)`
/// for the product variants.
pub struct ShiftConstructorOracle<'a> {
    system: &'a SystemDescriptor,
}

impl<'a> ShiftConstructorOracle<'a> {
    pub fn new(system: &'a SystemDescriptor) -> Result<Self> {
        match (&system.map, &system.metric) {
            (MapKind::ShiftOneSided, MetricDescriptor::WeightedSup { .. })
            | (MapKind::ShiftTwoSided, MetricDescriptor::WeightedSup { .. }) => {
                Ok(ShiftConstructorOracle { system })
            }
            _ => Err(Error::DomainMismatch("shift oracle needs a shift system".into())),
        }
    }

    /// Extends a chain to a periodic-tail pseudo-orbit with the same defect:
    /// genuine continuation where orbits close, a periodization of the next
    /// image on the two-sided shift (whose non-periodic orbits never close).
    fn extend(&self, chain: &Chain, delta: &ExactReal) -> Result<PseudoOrbit> {
        let last = chain.points().last().unwrap();
        let mut pts: Vec<Point> = chain.points()[..chain.k()].to_vec();
        let block_start;
        if matches!(self.system.map, MapKind::ShiftTwoSided) {
            let image = self.system.evaluate(last)?;
            let (alpha, maxd) = match &self.system.metric {
                MetricDescriptor::WeightedSup { alpha, symbols, .. } => {
                    (alpha.clone(), symbols.max_distance())
                }
                _ => unreachable!(),
            };
            let mut w = 1i64;
            while !maxd.is_zero() && &alpha.pow_int(-(w + 1)) * &maxd > *delta {
                w += 1;
            }
            let q = periodize_two_sided(image.as_symbolic()?, w)?;
            pts.push(last.clone());
            block_start = pts.len();
            let (cycle, start) = orbit_to_cycle(self.system, &Point::Symbolic(q))?;
            debug_assert_eq!(start, 0);
            pts.extend(cycle);
        } else {
            let (path, start) = orbit_to_cycle(self.system, last)?;
            block_start = pts.len() + start;
            pts.extend(path);
        }
        PseudoOrbit::tail_periodic(pts, block_start)
    }
}

fn periodize_two_sided(p: &SymbolicPoint, w: i64) -> Result<SymbolicPoint> {
    let word: Vec<Sym> = (-w..=w).map(|n| p.coord(n)).collect();
    SymbolicPoint::two_sided(&word, &[], &word, -w, p.alphabet())
}

impl ShadowOracle for ShiftConstructorOracle<'_> {
    fn constant(&self) -> ExactReal {
        match &self.system.metric {
            MetricDescriptor::WeightedSup { side, alpha, symbols } => match (side, symbols) {
                (Side::One, AlphabetMetric::Discrete) => alpha.pow_int(-1),
                (Side::Two, AlphabetMetric::Discrete) => ExactReal::one(),
                (Side::One, AlphabetMetric::Table(_)) => {
                    &ExactReal::one() / &(alpha - &ExactReal::one())
                }
                (Side::Two, AlphabetMetric::Table(_)) => alpha / &(alpha - &ExactReal::one()),
            },
            _ => unreachable!(),
        }
    }

    fn threshold(&self) -> Option<ExactReal> {
        None
    }

    fn shadow_chain(&self, chain: &Chain, delta: &ExactReal) -> Result<Point> {
        let xi = self.extend(chain, delta)?;
        let cert = match &self.system.metric {
            MetricDescriptor::WeightedSup { side, symbols, .. } => match (side, symbols) {
                (Side::One, AlphabetMetric::Discrete) => {
                    shadow_one_sided_shift(self.system, &xi, delta)?
                }
                (Side::Two, AlphabetMetric::Discrete) => {
                    shadow_two_sided_shift(self.system, &xi, delta)?
                }
                (Side::One, AlphabetMetric::Table(_)) => {
                    shadow_product_one_sided(self.system, &xi, delta)?
                }
                (Side::Two, AlphabetMetric::Table(_)) => {
                    shadow_product_two_sided(self.system, &xi, delta)?
                }
            },
            _ => unreachable!(),
        };
        Ok(cert.shadow)
    }
}

/// Ball-inclusion oracle on the circle power system: constant `1/(n-1)`,
/// valid for `δ <= (n-1)/(2n)`, backed by exact root selection.
pub struct CircleInclusionOracle<'a> {
    system: &'a SystemDescriptor,
    n: u32,
}

impl<'a> CircleInclusionOracle<'a> {
    pub fn new(system: &'a SystemDescriptor) -> Result<Self> {
        match system.map {
            MapKind::CirclePower { n } => Ok(CircleInclusionOracle { system, n }),
            _ => Err(Error::DomainMismatch("expected a circle power system".into())),
        }
    }
}

impl ShadowOracle for CircleInclusionOracle<'_> {
    fn constant(&self) -> ExactReal {
        ExactReal::ratio(1, i64::from(self.n) - 1)
    }

    fn threshold(&self) -> Option<ExactReal> {
        // ε = δ/(n-1) must stay below the injectivity threshold 1/(2n).
        Some(ExactReal::ratio(i64::from(self.n) - 1, 2 * i64::from(self.n)))
    }

    fn shadow_chain(&self, chain: &Chain, delta: &ExactReal) -> Result<Point> {
        let eps = &self.constant() * delta;
        let selector = CircleRootSelector::new(self.system)?;
        let cert = lemma11_chain(self.system, &selector, chain, delta, &eps)?;
        Ok(cert.shadow)
    }
}

/// Brute-force oracle over a finite system: returns the min-max shadow of the
/// chain by exhaustive search. The constant is whatever the caller claims;
/// re-verification turns an overclaim into an oracle fault.
pub struct FiniteBruteOracle<'a> {
    system: &'a SystemDescriptor,
    constant: ExactReal,
    threshold: Option<ExactReal>,
}

impl<'a> FiniteBruteOracle<'a> {
    pub fn new(
        system: &'a SystemDescriptor,
        constant: ExactReal,
        threshold: Option<ExactReal>,
    ) -> Result<Self> {
        system.finite_size()?;
        Ok(FiniteBruteOracle { system, constant, threshold })
    }
}

impl ShadowOracle for FiniteBruteOracle<'_> {
    fn constant(&self) -> ExactReal {
        self.constant.clone()
    }

    fn threshold(&self) -> Option<ExactReal> {
        self.threshold.clone()
    }

    fn shadow_chain(&self, chain: &Chain, _delta: &ExactReal) -> Result<Point> {
        let mut best: Option<(ExactReal, Point)> = None;
        for z in self.system.finite_points()? {
            let mut cur = z.clone();
            let mut worst = ExactReal::zero();
            for (i, x) in chain.points().iter().enumerate() {
                worst = worst.max(self.system.distance(&cur, x)?);
                if i < chain.k() {
                    cur = self.system.evaluate(&cur)?;
                }
            }
            let better = match &best {
                None => true,
                Some((w, _)) => worst < *w,
            };
            if better {
                best = Some((worst, z));
            }
        }
        Ok(best.unwrap().1)
    }
}

/// Calls the oracle and re-verifies the per-index bound `L·δ` over the whole
/// chain (endpoint included), as the oracle invariant demands.
fn shadow_chain_verified(
    system: &SystemDescriptor,
    oracle: &dyn ShadowOracle,
    chain: &Chain,
    delta: &ExactReal,
) -> Result<Point> {
    let bound = &oracle.constant() * delta;
    let y = oracle.shadow_chain(chain, delta)?;
    let mut cur = y.clone();
    for (i, x) in chain.points().iter().enumerate() {
        if !system.distance_le(&cur, x, &bound)? {
            let deviation = system.distance(&cur, x).unwrap_or_else(|_| bound.clone());
            return Err(Error::OracleFault { bound, index: i, deviation });
        }
        if i < chain.k() {
            cur = system.evaluate(&cur)?;
        }
    }
    Ok(y)
}

fn check_threshold(oracle: &dyn ShadowOracle, delta: &ExactReal) -> Result<()> {
    if delta.is_zero() {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    if let Some(d0) = oracle.threshold() {
        if *delta > d0 {
            return Err(Error::InvalidParameter(format!(
                "delta {delta} exceeds the oracle threshold {d0}"
            )));
        }
    }
    Ok(())
}

/// When to stop a refinement.
#[derive(Clone, Debug)]
pub enum StopRule {
    /// Iterate until the limit is attained exactly.
    Exactness,
    /// Stop once the per-step budget falls below τ and report the gap.
    Tolerance(ExactReal),
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub iterate: Point,
    /// Chain budget consumed at this step (`L^{n+1} δ` in the cascades).
    pub budget: ExactReal,
}

/// A refinement result: the certificate plus the audited iterate trace.
#[derive(Clone, Debug, Serialize)]
pub struct Refinement {
    pub certificate: ShadowCertificate,
    pub trace: Vec<TraceStep>,
    pub iterations: usize,
    /// Endpoint gap bound in tolerance mode (`None` once exact).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_gap: Option<ExactReal>,
}

/// Iteration bound `ceil(log(δ/τ) / log(1/L)) + 1`, computed by exact search.
fn tolerance_iteration_bound(l: &ExactReal, delta: &ExactReal, tau: &ExactReal) -> usize {
    let mut m = 0usize;
    let mut cur = delta.clone();
    while cur >= *tau && m < 4096 {
        cur = &cur * l;
        m += 1;
    }
    m + 1
}

fn orbit_chain(
    system: &SystemDescriptor,
    start: &Point,
    k: usize,
    endpoint: Point,
) -> Result<Chain> {
    let mut pts = Vec::with_capacity(k + 1);
    let mut cur = start.clone();
    for _ in 0..k {
        pts.push(cur.clone());
        cur = system.evaluate(&cur)?;
    }
    pts.push(endpoint);
    Chain::new(pts)
}

/// h-shadowing refinement: from a δ-chain, produce `x` with per-index bound
/// `Lδ/(1-L)` and an exact endpoint `f^k(x) = x_k`. The iterates re-shadow
/// the chain `(y_n, f(y_n), ..., f^{k-1}(y_n), x_k)` at budget `L^{n+1}δ`.
pub fn h_shadow_refine(
    system: &SystemDescriptor,
    oracle: &dyn ShadowOracle,
    chain: &Chain,
    delta: &ExactReal,
    stop: StopRule,
) -> Result<Refinement> {
    let l = oracle.constant();
    if l >= ExactReal::one() {
        return Err(Error::RefusedConstant("h-shadowing refinement needs L < 1".into()));
    }
    check_threshold(oracle, delta)?;
    let defect = chain.defect(system)?;
    if defect > *delta {
        return Err(Error::DefectExceedsDelta { defect, delta: delta.clone() });
    }
    let k = chain.k();
    let endpoint = chain.points()[k].clone();
    let per_index_bound = &(&l * delta) / &(&ExactReal::one() - &l);

    let mut trace = Vec::new();
    let mut budget = delta.clone();
    let mut y = shadow_chain_verified(system, oracle, chain, &budget)?;
    trace.push(TraceStep { iterate: y.clone(), budget: budget.clone() });

    let iteration_cap = match &stop {
        StopRule::Exactness => MAX_REFINE_ITER,
        StopRule::Tolerance(tau) => tolerance_iteration_bound(&l, delta, tau),
    };
    let mut iterations = 1usize;
    loop {
        budget = &l * &budget; // L^{n+1} δ
        let yk = system.iterate(&y, k)?;
        let exact = yk == endpoint;
        match &stop {
            StopRule::Exactness if exact => {
                if !verify_h_shadow(system, chain, &y, &per_index_bound)? {
                    return Err(Error::OracleFault {
                        bound: per_index_bound,
                        index: k,
                        deviation: ExactReal::one(),
                    });
                }
                return Ok(Refinement {
                    certificate: ShadowCertificate {
                        shadow: y,
                        bound: per_index_bound,
                        class: GuaranteeClass::ExactEndpoint,
                        horizon: k,
                        all_indices: false,
                        lipschitz: Some(l),
                    },
                    trace,
                    iterations,
                    endpoint_gap: None,
                });
            }
            StopRule::Tolerance(tau) if budget < *tau => {
                assert!(
                    iterations <= iteration_cap,
                    "iteration count {iterations} exceeded the logarithmic bound {iteration_cap}"
                );
                return Ok(Refinement {
                    certificate: ShadowCertificate {
                        shadow: y,
                        bound: per_index_bound,
                        class: GuaranteeClass::PerIndex,
                        horizon: k,
                        all_indices: false,
                        lipschitz: Some(l),
                    },
                    trace,
                    iterations,
                    endpoint_gap: Some(budget),
                });
            }
            _ => {}
        }
        // The chain (y, f(y), ..., f^{k-1}(y), x_k) must be an L^{n+1}δ-chain.
        if !system.distance_le(&yk, &endpoint, &budget)? {
            return Err(Error::OracleFault {
                bound: budget,
                index: k,
                deviation: system.distance(&yk, &endpoint).unwrap_or(ExactReal::one()),
            });
        }
        let next_chain = orbit_chain(system, &y, k, endpoint.clone())?;
        y = shadow_chain_verified(system, oracle, &next_chain, &budget)?;
        trace.push(TraceStep { iterate: y.clone(), budget: budget.clone() });
        iterations += 1;
        if iterations > iteration_cap {
            return Err(Error::BudgetExceeded(format!(
                "no exact endpoint after {iterations} refinement steps"
            )));
        }
    }
}

/// Preimage extraction: given `d(f(x), y) <= δ`, returns `z` with `f(z) = y`
/// exactly and `d(z, x) <= Lδ` on ultrametric systems, `<= Lδ/(1-L)` in
/// general (the two-point-chain iteration of the equivalence proof).
pub fn preimage_from_oracle(
    system: &SystemDescriptor,
    oracle: &dyn ShadowOracle,
    x: &Point,
    y: &Point,
    delta: &ExactReal,
) -> Result<Point> {
    let l = oracle.constant();
    if l >= ExactReal::one() {
        return Err(Error::RefusedConstant("preimage extraction needs L < 1".into()));
    }
    check_threshold(oracle, delta)?;
    let fx = system.evaluate(x)?;
    if !system.distance_le(&fx, y, delta)? {
        return Err(Error::InvalidParameter("y is not within delta of f(x)".into()));
    }
    let ultra = system.metric.ultrametric();
    let bound = if ultra {
        &l * delta
    } else {
        &(&l * delta) / &(&ExactReal::one() - &l)
    };

    let mut budget = delta.clone();
    let mut z = shadow_chain_verified(
        system,
        oracle,
        &Chain::new(vec![x.clone(), y.clone()])?,
        &budget,
    )?;
    for _ in 0..MAX_REFINE_ITER {
        if system.evaluate(&z)? == *y {
            if !system.distance_le(&z, x, &bound)? {
                return Err(Error::OracleFault {
                    bound,
                    index: 0,
                    deviation: system.distance(&z, x).unwrap_or(ExactReal::one()),
                });
            }
            return Ok(z);
        }
        budget = &l * &budget;
        z = shadow_chain_verified(
            system,
            oracle,
            &Chain::new(vec![z.clone(), y.clone()])?,
            &budget,
        )?;
    }
    Err(Error::BudgetExceeded("preimage iteration did not reach exactness".into()))
}

fn refine_cycle(
    system: &SystemDescriptor,
    oracle: &dyn ShadowOracle,
    cycle: &Chain,
    delta: &ExactReal,
    cascade: ExactReal,
    bound_distance: ExactReal,
) -> Result<Refinement> {
    check_threshold(oracle, delta)?;
    if !cycle.is_cycle() {
        return Err(Error::InvalidParameter("input is not a cycle (x_0 != x_k)".into()));
    }
    let defect = cycle.defect(system)?;
    if defect > *delta {
        return Err(Error::DefectExceedsDelta { defect, delta: delta.clone() });
    }
    let k = cycle.k();
    let x0 = cycle.points()[0].clone();
    let l = oracle.constant();

    let mut trace = Vec::new();
    let mut y = shadow_chain_verified(system, oracle, cycle, delta)?;
    trace.push(TraceStep { iterate: y.clone(), budget: delta.clone() });
    // cascade budget: (2L)^{n+1} δ additively, L^{n+1} δ in the ultrametric
    // variant.
    let mut budget = &cascade * delta;
    let mut iterations = 1usize;
    loop {
        let yk = system.iterate(&y, k)?;
        // cycle-defect contraction invariant, exact at every step
        if !system.distance_le(&yk, &y, &budget)? {
            return Err(Error::OracleFault {
                bound: budget,
                index: k,
                deviation: system.distance(&yk, &y).unwrap_or(ExactReal::one()),
            });
        }
        if yk == y {
            if !system.distance_le(&y, &x0, &bound_distance)? {
                return Err(Error::OracleFault {
                    bound: bound_distance,
                    index: 0,
                    deviation: system.distance(&y, &x0).unwrap_or(ExactReal::one()),
                });
            }
            return Ok(Refinement {
                certificate: ShadowCertificate {
                    shadow: y,
                    bound: bound_distance,
                    class: GuaranteeClass::Periodic,
                    horizon: k,
                    all_indices: false,
                    lipschitz: Some(l),
                },
                trace,
                iterations,
                endpoint_gap: None,
            });
        }
        let next_cycle = orbit_chain(system, &y, k, y.clone())?;
        y = shadow_chain_verified(system, oracle, &next_cycle, &budget)?;
        trace.push(TraceStep { iterate: y.clone(), budget: budget.clone() });
        budget = &cascade * &budget;
        iterations += 1;
        if iterations > MAX_REFINE_ITER {
            return Err(Error::BudgetExceeded(format!(
                "no exact periodic point after {iterations} cascade steps"
            )));
        }
    }
}

/// Periodic-point extraction from a δ-cycle (additive doubling cascade):
/// needs `L < 1/2`; returns `x` with `f^k(x) = x` and `d(x, x_0) <= Lδ/(1-2L)`.
pub fn periodic_refine(
    system: &SystemDescriptor,
    oracle: &dyn ShadowOracle,
    cycle: &Chain,
    delta: &ExactReal,
) -> Result<Refinement> {
    let l = oracle.constant();
    let two_l = &ExactReal::from_int(2) * &l;
    if two_l >= ExactReal::one() {
        return Err(Error::RefusedConstant(
            "the doubling cascade diverges for L >= 1/2".into(),
        ));
    }
    let bound = &(&l * delta) / &(&ExactReal::one() - &two_l);
    refine_cycle(system, oracle, cycle, delta, two_l, bound)
}

/// Ultrametric periodic-point extraction: the max inequality removes the
/// doubling, so any `L < 1` works and the distance bound improves to `Lδ`.
pub fn periodic_refine_ultrametric(
    system: &SystemDescriptor,
    oracle: &dyn ShadowOracle,
    cycle: &Chain,
    delta: &ExactReal,
) -> Result<Refinement> {
    if !system.metric.ultrametric() {
        return Err(Error::RefusedConstant("the max cascade needs an ultrametric".into()));
    }
    let l = oracle.constant();
    if l >= ExactReal::one() {
        return Err(Error::RefusedConstant("needs L < 1".into()));
    }
    let bound = &l * delta;
    refine_cycle(system, oracle, cycle, delta, l, bound)
}

/// Selector wrapping the forced cellular recursion.
pub struct CellularSelector<'a> {
    system: &'a SystemDescriptor,
    alpha: ExactReal,
}

impl<'a> CellularSelector<'a> {
    pub fn new(system: &'a SystemDescriptor) -> Result<Self> {
        match (&system.map, &system.metric) {
            (MapKind::AdditiveCellular, MetricDescriptor::WeightedSup { alpha, .. }) => {
                Ok(CellularSelector { system, alpha: alpha.clone() })
            }
            _ => Err(Error::DomainMismatch("expected the additive cellular system".into())),
        }
    }
}

impl PreimageSelector for CellularSelector<'_> {
    fn preimage(&self, base: &Point, target: &Point, radius: &ExactReal) -> Result<Point> {
        // d(z, base) <= radius corresponds to the ball parameter δ = α·radius.
        let delta = &self.alpha * radius;
        preimage_selector_cellular(
            self.system,
            target.as_symbolic()?,
            base.as_symbolic()?,
            &delta,
        )
    }
}

/// Selector wrapping exact circle root extraction.
pub struct CircleRootSelector<'a> {
    system: &'a SystemDescriptor,
}

impl<'a> CircleRootSelector<'a> {
    pub fn new(system: &'a SystemDescriptor) -> Result<Self> {
        match system.map {
            MapKind::CirclePower { .. } => Ok(CircleRootSelector { system }),
            _ => Err(Error::DomainMismatch("expected a circle power system".into())),
        }
    }
}

impl PreimageSelector for CircleRootSelector<'_> {
    fn preimage(&self, base: &Point, target: &Point, radius: &ExactReal) -> Result<Point> {
        preimage_selector_circle(self.system, target.as_circle()?, base.as_circle()?, radius)
    }
}

/// Exhaustive selector on finite systems: the closest preimage within the
/// radius, ties toward the least index.
pub struct FiniteSelector<'a> {
    system: &'a SystemDescriptor,
}

impl<'a> FiniteSelector<'a> {
    pub fn new(system: &'a SystemDescriptor) -> Result<Self> {
        system.finite_size()?;
        Ok(FiniteSelector { system })
    }
}

impl PreimageSelector for FiniteSelector<'_> {
    fn preimage(&self, base: &Point, target: &Point, radius: &ExactReal) -> Result<Point> {
        let mut best: Option<(ExactReal, Point)> = None;
        for z in self.system.finite_points()? {
            if self.system.evaluate(&z)? == *target {
                let d = self.system.distance(&z, base)?;
                if d <= *radius {
                    let better = match &best {
                        None => true,
                        Some((w, _)) => d < *w,
                    };
                    if better {
                        best = Some((d, z));
                    }
                }
            }
        }
        best.map(|(_, z)| z)
            .ok_or(Error::InclusionViolation { radius: radius.clone() })
    }
}

/// Backward induction over a finite chain (the ball-inclusion lemma): with
/// `B_{δ+ε}(f(x)) ⊆ f(B_ε(x))`, sets `p_k = x_k` and pulls back through the
/// selector, giving `d(p_i, x_i) <= ε` and an exact endpoint.
pub fn lemma11_chain(
    system: &SystemDescriptor,
    selector: &dyn PreimageSelector,
    chain: &Chain,
    delta: &ExactReal,
    eps: &ExactReal,
) -> Result<ShadowCertificate> {
    let defect = chain.defect(system)?;
    if defect > *delta {
        return Err(Error::DefectExceedsDelta { defect, delta: delta.clone() });
    }
    let k = chain.k();
    let mut p = chain.points()[k].clone();
    for i in (0..k).rev() {
        p = selector.preimage(&chain.points()[i], &p, eps)?;
    }
    if !verify_h_shadow(system, chain, &p, eps)? {
        return Err(Error::OracleFault {
            bound: eps.clone(),
            index: 0,
            deviation: ExactReal::one(),
        });
    }
    Ok(ShadowCertificate {
        shadow: p,
        bound: eps.clone(),
        class: GuaranteeClass::ExactEndpoint,
        horizon: k,
        all_indices: false,
        lipschitz: None,
    })
}

/// Ball-inclusion shadowing of a periodic-tail pseudo-orbit: the nested
/// intersection over increasing horizons collapses onto the fixed point of
/// the block's preimage loop, which is extracted exactly and verified, then
/// pulled back through the prefix.
pub fn lemma11_tail_periodic(
    system: &SystemDescriptor,
    selector: &dyn PreimageSelector,
    xi: &PseudoOrbit,
    delta: &ExactReal,
    eps: &ExactReal,
) -> Result<ShadowCertificate> {
    let block_start = match *xi.tail() {
        crate::orbits::Tail::PeriodicFrom { block_start } => block_start,
        crate::orbits::Tail::None => {
            return Err(Error::InvalidParameter("use lemma11_chain for finite inputs".into()))
        }
    };
    let defect = crate::orbits::pseudo_orbit_defect(system, xi)?;
    if defect > *delta {
        return Err(Error::DefectExceedsDelta { defect, delta: delta.clone() });
    }
    let n = xi.explicit_len();
    let block: Vec<Point> = xi.points()[block_start..].to_vec();
    // One loop of the block's preimage composition.
    let loop_once = |p: &Point| -> Result<Point> {
        let mut cur = p.clone();
        for x in block.iter().rev() {
            cur = selector.preimage(x, &cur, eps)?;
        }
        Ok(cur)
    };
    let anchor = block[0].clone();
    let fixed = fixed_point_of_loop(&loop_once, &anchor)?;
    if !system.distance_le(&fixed, &anchor, eps)? {
        return Err(Error::InclusionViolation { radius: eps.clone() });
    }
    // Pull the fixed point back through the prefix.
    let mut p = fixed;
    for i in (0..block_start).rev() {
        p = selector.preimage(&xi.points()[i], &p, eps)?;
    }
    let report = crate::orbits::verify_shadowing_report(system, xi, &p, eps, n)?;
    if !report.ok {
        return Err(Error::OracleFault {
            bound: eps.clone(),
            index: report.first_violation.unwrap_or(0),
            deviation: ExactReal::one(),
        });
    }
    Ok(ShadowCertificate {
        shadow: p,
        bound: eps.clone(),
        class: GuaranteeClass::PerIndex,
        horizon: report.checked,
        all_indices: report.all_indices,
        lipschitz: None,
    })
}

/// Exact fixed point of a contracting preimage loop. Coordinate `m` of the
/// loop's output depends only on coordinates below `m` of the input (the
/// selectors are forced recursions), so iterates agree with the fixed point
/// on a growing window; candidates read off a window are verified exactly.
fn fixed_point_of_loop(
    loop_once: &dyn Fn(&Point) -> Result<Point>,
    anchor: &Point,
) -> Result<Point> {
    match anchor {
        Point::Finite(_) => {
            let mut cur = anchor.clone();
            for _ in 0..4096 {
                let next = loop_once(&cur)?;
                if next == cur {
                    return Ok(cur);
                }
                cur = next;
            }
            Err(Error::BudgetExceeded("preimage loop did not stabilize".into()))
        }
        Point::Circle(_) => {
            // The loop is affine with a rational contraction ratio once the
            // branch pattern settles; solve θ* from consecutive iterates and
            // verify.
            let mut prev = loop_once(anchor)?;
            let mut cur = loop_once(&prev)?;
            for _ in 0..24 {
                let next = loop_once(&cur)?;
                if cur == next {
                    return Ok(cur);
                }
                let (a, b) = (prev.as_circle()?.angle(), cur.as_circle()?.angle());
                let c = next.as_circle()?.angle();
                let db = b - a;
                let dc = c - b;
                if !db.is_zero() {
                    let r = &dc / &db;
                    let one = num_rational::BigRational::from_integer(1.into());
                    if r != one {
                        let theta = b + &dc / &(&one - &r);
                        let candidate = Point::Circle(crate::point::CirclePoint::new(theta));
                        if loop_once(&candidate)? == candidate {
                            return Ok(candidate);
                        }
                    }
                }
                prev = cur;
                cur = next;
            }
            Err(Error::BudgetExceeded("circle preimage loop did not close".into()))
        }
        Point::Symbolic(_) => {
            // Iterate to push agreement depth, then guess an eventually
            // periodic form from a window and verify it exactly.
            let mut cur = anchor.clone();
            for round in 1..=6usize {
                let window = 16 * round as i64;
                for _ in 0..window {
                    cur = loop_once(&cur)?;
                }
                if loop_once(&cur)? == cur {
                    return Ok(cur);
                }
                let s = cur.as_symbolic()?;
                let coords: Vec<Sym> = (1..=window).map(|n| s.coord(n)).collect();
                'guess: for per in 1..=(window as usize) / 3 {
                    for pre in 0..=(window as usize - 3 * per) {
                        let mut consistent = true;
                        for j in pre..window as usize - per {
                            if coords[j] != coords[j + per] {
                                consistent = false;
                                break;
                            }
                        }
                        if !consistent {
                            continue;
                        }
                        let cand = Point::Symbolic(SymbolicPoint::one_sided(
                            &coords[..pre],
                            &coords[pre..pre + per],
                            s.alphabet(),
                        )?);
                        if loop_once(&cand)? == cand {
                            return Ok(cand);
                        }
                        continue 'guess;
                    }
                }
            }
            Err(Error::BudgetExceeded(
                "no eventually periodic fixed point found in the window budget".into(),
            ))
        }
        Point::Assembled(_) => {
            Err(Error::Unsupported("preimage loops over assembled points".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{random_cycle, random_pseudo_orbit};
    use crate::point::CirclePoint;

    fn shift(alpha: u64) -> SystemDescriptor {
        SystemDescriptor::one_sided_shift(ExactReal::from_int(alpha)).unwrap()
    }

    #[test]
    fn h_refine_on_genuine_chain_is_immediate() {
        let sys = shift(2);
        let oracle = ShiftConstructorOracle::new(&sys).unwrap();
        let x = Point::Symbolic(SymbolicPoint::one_sided(&[1, 0], &[1, 1, 0], 2).unwrap());
        let orbit = crate::orbits::genuine_orbit(&sys, &x, 6).unwrap();
        let chain = Chain::new(orbit.points().to_vec()).unwrap();
        let out =
            h_shadow_refine(&sys, &oracle, &chain, &ExactReal::ratio(1, 8), StopRule::Exactness)
                .unwrap();
        assert!(
            verify_h_shadow(&sys, &chain, &out.certificate.shadow, &out.certificate.bound)
                .unwrap()
        );
    }

    #[test]
    fn h_refine_random_chains_exact_endpoint() {
        let sys = shift(2);
        let oracle = ShiftConstructorOracle::new(&sys).unwrap();
        let delta = ExactReal::ratio(1, 8);
        for seed in 0..100 {
            let xi = random_pseudo_orbit(&sys, &delta, 6, seed).unwrap();
            let chain = Chain::new(xi.points().to_vec()).unwrap();
            let out = h_shadow_refine(&sys, &oracle, &chain, &delta, StopRule::Exactness).unwrap();
            // L = 1/2: per-index bound Lδ/(1-L) = δ
            assert_eq!(out.certificate.bound, delta);
            assert_eq!(out.certificate.class, GuaranteeClass::ExactEndpoint);
            assert!(
                verify_h_shadow(&sys, &chain, &out.certificate.shadow, &out.certificate.bound)
                    .unwrap()
            );
            assert!(out.iterations <= 4, "stabilization took {}", out.iterations);
        }
    }

    #[test]
    fn h_refine_tolerance_mode_iteration_bound() {
        let sys = shift(2);
        let oracle = ShiftConstructorOracle::new(&sys).unwrap();
        let delta = ExactReal::ratio(1, 8);
        let tau = ExactReal::ratio(1, 1024);
        let xi = random_pseudo_orbit(&sys, &delta, 5, 11).unwrap();
        let chain = Chain::new(xi.points().to_vec()).unwrap();
        let out =
            h_shadow_refine(&sys, &oracle, &chain, &delta, StopRule::Tolerance(tau.clone()))
                .unwrap();
        assert!(out.endpoint_gap.unwrap() < tau);
    }

    #[test]
    fn faulty_oracle_is_reported() {
        struct Lazy;
        impl ShadowOracle for Lazy {
            fn constant(&self) -> ExactReal {
                ExactReal::ratio(1, 2)
            }
            fn threshold(&self) -> Option<ExactReal> {
                None
            }
            fn shadow_chain(&self, chain: &Chain, _delta: &ExactReal) -> Result<Point> {
                // always replies with the chain start: violates the bound on
                // most inputs
                Ok(chain.points()[0].clone())
            }
        }
        let sys = shift(2);
        let delta = ExactReal::ratio(1, 8);
        let mut saw_fault = false;
        for seed in 0..40 {
            let xi = random_pseudo_orbit(&sys, &delta, 6, seed).unwrap();
            let chain = Chain::new(xi.points().to_vec()).unwrap();
            if matches!(
                h_shadow_refine(&sys, &Lazy, &chain, &delta, StopRule::Exactness),
                Err(Error::OracleFault { .. })
            ) {
                saw_fault = true;
                break;
            }
        }
        assert!(saw_fault);
    }

    #[test]
    fn preimage_from_oracle_ultrametric_bound() {
        let sys = shift(2);
        let oracle = ShiftConstructorOracle::new(&sys).unwrap();
        let delta = ExactReal::ratio(1, 4);
        let x = Point::Symbolic(SymbolicPoint::one_sided(&[0, 1], &[1, 0], 2).unwrap());
        let y = Point::Symbolic(SymbolicPoint::one_sided(&[1, 1, 1], &[0, 1], 2).unwrap());
        assert!(sys.distance_le(&sys.evaluate(&x).unwrap(), &y, &delta).unwrap());
        let z = preimage_from_oracle(&sys, &oracle, &x, &y, &delta).unwrap();
        assert_eq!(sys.evaluate(&z).unwrap(), y);
        let bound = &ExactReal::ratio(1, 2) * &delta;
        assert!(sys.distance_le(&z, &x, &bound).unwrap());
    }

    #[test]
    fn periodic_refine_constants() {
        // L = 1/4 via the alpha = 4 oracle; bound Lδ/(1-2L) = δ/2.
        let sys = shift(4);
        let oracle = ShiftConstructorOracle::new(&sys).unwrap();
        assert_eq!(oracle.constant(), ExactReal::ratio(1, 4));
        let delta = ExactReal::ratio(1, 16);
        for seed in 0..60 {
            let cycle = random_cycle(&sys, &delta, 5, seed).unwrap();
            let out = periodic_refine(&sys, &oracle, &cycle, &delta).unwrap();
            let x = &out.certificate.shadow;
            assert_eq!(sys.iterate(x, 5).unwrap(), *x);
            assert_eq!(out.certificate.bound, ExactReal::ratio(1, 32));
            assert!(sys.distance_le(x, &cycle.points()[0], &out.certificate.bound).unwrap());
        }
    }

    #[test]
    fn periodic_refine_refuses_half_but_ultrametric_accepts() {
        let sys = shift(2);
        let oracle = ShiftConstructorOracle::new(&sys).unwrap();
        assert_eq!(oracle.constant(), ExactReal::ratio(1, 2));
        let delta = ExactReal::ratio(1, 8);
        let cycle = random_cycle(&sys, &delta, 4, 3).unwrap();
        assert!(matches!(
            periodic_refine(&sys, &oracle, &cycle, &delta),
            Err(Error::RefusedConstant(_))
        ));
        let out = periodic_refine_ultrametric(&sys, &oracle, &cycle, &delta).unwrap();
        let x = &out.certificate.shadow;
        assert_eq!(sys.iterate(x, 4).unwrap(), *x);
        // bound Lδ = 1/16
        assert_eq!(out.certificate.bound, ExactReal::ratio(1, 16));
        assert!(sys.distance_le(x, &cycle.points()[0], &out.certificate.bound).unwrap());
    }

    #[test]
    fn lemma11_cellular_chain() {
        // ε = δ/(α-1) solves ε = α^{-1}(δ+ε); for α = 2 that is ε = δ.
        let sys = SystemDescriptor::additive_cellular(ExactReal::from_int(2)).unwrap();
        let selector = CellularSelector::new(&sys).unwrap();
        let delta = ExactReal::ratio(1, 8);
        let eps = delta.clone();
        for seed in 0..60 {
            let xi = random_pseudo_orbit(&sys, &delta, 6, seed).unwrap();
            let chain = Chain::new(xi.points().to_vec()).unwrap();
            let cert = lemma11_chain(&sys, &selector, &chain, &delta, &eps).unwrap();
            assert!(verify_h_shadow(&sys, &chain, &cert.shadow, &eps).unwrap());
        }
    }

    #[test]
    fn lemma11_cellular_tail_periodic() {
        let sys = SystemDescriptor::additive_cellular(ExactReal::from_int(2)).unwrap();
        let selector = CellularSelector::new(&sys).unwrap();
        let delta = ExactReal::ratio(1, 8);
        let eps = delta.clone();
        for seed in 0..20 {
            let xi = crate::orbits::random_tail_periodic(&sys, &delta, 3, seed).unwrap();
            let cert = lemma11_tail_periodic(&sys, &selector, &xi, &delta, &eps).unwrap();
            assert!(cert.all_indices);
            assert!(crate::orbits::verify_shadowing(
                &sys,
                &xi,
                &cert.shadow,
                &eps,
                xi.explicit_len()
            )
            .unwrap());
        }
    }

    #[test]
    fn lemma11_circle_chain_and_tail() {
        let sys = SystemDescriptor::circle_power(3).unwrap();
        let selector = CircleRootSelector::new(&sys).unwrap();
        // Δ-pseudo orbit shadowed within Δ/(n-1) = Δ/2
        let delta = ExactReal::ratio(1, 12);
        let eps = ExactReal::ratio(1, 24);
        for seed in 0..60 {
            let xi = random_pseudo_orbit(&sys, &delta, 6, seed).unwrap();
            let chain = Chain::new(xi.points().to_vec()).unwrap();
            let cert = lemma11_chain(&sys, &selector, &chain, &delta, &eps).unwrap();
            assert!(verify_h_shadow(&sys, &chain, &cert.shadow, &eps).unwrap());
        }
        for seed in 0..20 {
            let xi = crate::orbits::random_tail_periodic(&sys, &delta, 3, seed).unwrap();
            let cert = lemma11_tail_periodic(&sys, &selector, &xi, &delta, &eps).unwrap();
            assert!(cert.all_indices);
        }
    }

    #[test]
    fn circle_oracle_refines_preimages_in_general_metric_mode() {
        let sys = SystemDescriptor::circle_power(3).unwrap();
        let oracle = CircleInclusionOracle::new(&sys).unwrap();
        // L = 1/2, δ below the oracle threshold 1/3
        let delta = ExactReal::ratio(1, 6);
        let x = Point::Circle(CirclePoint::from_ratio(5, 24));
        let fx = sys.evaluate(&x).unwrap();
        let y = Point::Circle(CirclePoint::new(
            fx.as_circle().unwrap().angle() + num_rational::BigRational::new(1.into(), 8.into()),
        ));
        assert!(sys.distance_le(&fx, &y, &delta).unwrap());
        let z = preimage_from_oracle(&sys, &oracle, &x, &y, &delta).unwrap();
        assert_eq!(sys.evaluate(&z).unwrap(), y);
        // general-metric bound Lδ/(1-L) = δ
        assert!(sys.distance_le(&z, &x, &delta).unwrap());
    }
}
