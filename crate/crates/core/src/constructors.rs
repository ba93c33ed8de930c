//! Explicit shadowing-point constructions for the named systems, with their
//! exact constants as verified postconditions.
//!
//! Each constructor assembles the shadowing point coordinate by coordinate
//! from the pseudo-orbit, re-verifies the claimed bound through
//! [`verify_shadowing_report`], and returns a certificate. Inputs must carry a
//! periodic tail so the constructed point is representable and the bound is
//! certified for every index, not a truncation.

use crate::error::{Error, Result};
use crate::metric::{AlphabetMetric, MetricDescriptor};
use crate::orbits::{
    pseudo_orbit_defect, verify_shadowing_report, GuaranteeClass, PseudoOrbit, ShadowCertificate,
    Tail,
};
use crate::point::{AssembledPoint, CirclePoint, Point, Side, Sym, SymbolicPoint};
use crate::rational::ExactReal;
use crate::systems::{additive_cellular_map, circle_power_map, MapKind, SystemDescriptor};

fn require_defect(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    delta: &ExactReal,
) -> Result<()> {
    if delta.is_zero() {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let defect = pseudo_orbit_defect(system, xi)?;
    if defect > *delta {
        return Err(Error::DefectExceedsDelta { defect, delta: delta.clone() });
    }
    Ok(())
}

fn require_tail(xi: &PseudoOrbit) -> Result<usize> {
    match *xi.tail() {
        Tail::PeriodicFrom { block_start } => Ok(block_start),
        Tail::None => Err(Error::InvalidParameter(
            "constructors need a periodic-tail pseudo-orbit".into(),
        )),
    }
}

fn shift_alpha(system: &SystemDescriptor, side: Side) -> Result<ExactReal> {
    match (&system.map, &system.metric) {
        (MapKind::ShiftOneSided, MetricDescriptor::WeightedSup { side: Side::One, alpha, .. })
            if side == Side::One =>
        {
            Ok(alpha.clone())
        }
        (MapKind::ShiftTwoSided, MetricDescriptor::WeightedSup { side: Side::Two, alpha, .. })
            if side == Side::Two =>
        {
            Ok(alpha.clone())
        }
        _ => Err(Error::DomainMismatch("expected a shift system".into())),
    }
}

/// The `N >= 1` with `alpha^{-N-1} <= delta < alpha^{-N}`, when
/// `delta < alpha^{-1}`.
fn case_split_index(alpha: &ExactReal, delta: &ExactReal) -> Option<i64> {
    if *delta >= alpha.pow_int(-1) {
        return None;
    }
    let mut n = 1i64;
    loop {
        if alpha.pow_int(-n - 1) <= *delta {
            return Some(n);
        }
        n += 1;
        assert!(n < 8192, "delta vanishingly small");
    }
}

/// The one-sided coordinate stream `i -> x^{(i)}_1`, folded into an
/// eventually-periodic point.
fn assemble_first_coordinates(xi: &PseudoOrbit, block_start: usize) -> Result<SymbolicPoint> {
    let alphabet = xi.points()[0].as_symbolic()?.alphabet();
    let stream: Vec<Sym> = xi
        .points()
        .iter()
        .map(|p| Ok(p.as_symbolic()?.coord(1)))
        .collect::<Result<_>>()?;
    SymbolicPoint::one_sided(&stream[..block_start], &stream[block_start..], alphabet)
}

fn certify(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    shadow: Point,
    verify_at: &ExactReal,
    bound: ExactReal,
    lipschitz: Option<ExactReal>,
) -> Result<ShadowCertificate> {
    debug_assert!(*verify_at <= bound);
    let report = verify_shadowing_report(system, xi, &shadow, verify_at, xi.explicit_len())?;
    if !report.ok {
        return Err(Error::OracleFault {
            bound: verify_at.clone(),
            index: report.first_violation.unwrap_or(0),
            deviation: bound,
        });
    }
    Ok(ShadowCertificate {
        shadow,
        bound,
        class: GuaranteeClass::PerIndex,
        horizon: report.checked,
        all_indices: report.all_indices,
        lipschitz,
    })
}

/// One-sided shift: the pseudo-orbit is `α^{-1}δ`-shadowed by the point whose
/// n-th coordinate is the first coordinate of orbit element n-1. Internally
/// verifies the tighter two-case bound (`α^{-2}` for `δ >= α^{-1}`, otherwise
/// `α^{-N-2}` with `α^{-N-1} <= δ < α^{-N}`).
pub fn shadow_one_sided_shift(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    delta: &ExactReal,
) -> Result<ShadowCertificate> {
    let alpha = shift_alpha(system, Side::One)?;
    if !matches!(
        system.metric,
        MetricDescriptor::WeightedSup { symbols: AlphabetMetric::Discrete, .. }
    ) {
        return Err(Error::DomainMismatch(
            "the α^{-1} construction uses the discrete coordinate distance".into(),
        ));
    }
    require_defect(system, xi, delta)?;
    let block_start = require_tail(xi)?;
    let shadow = Point::Symbolic(assemble_first_coordinates(xi, block_start)?);
    let tight = match case_split_index(&alpha, delta) {
        None => alpha.pow_int(-2),
        Some(n) => alpha.pow_int(-n - 2),
    };
    let bound = &alpha.pow_int(-1) * delta;
    certify(system, xi, shadow, &tight, bound, Some(alpha.pow_int(-1)))
}

/// Two-sided shift: the pseudo-orbit is `δ`-shadowed (constant L = 1) by the
/// point reading coordinate 0 of orbit element n at its own coordinate n, with
/// negative coordinates taken from the backward extension `σ^i(x^{(0)})`.
pub fn shadow_two_sided_shift(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    delta: &ExactReal,
) -> Result<ShadowCertificate> {
    let alpha = shift_alpha(system, Side::Two)?;
    if !matches!(
        system.metric,
        MetricDescriptor::WeightedSup { symbols: AlphabetMetric::Discrete, .. }
    ) {
        return Err(Error::DomainMismatch(
            "the constant-1 construction uses the discrete coordinate distance".into(),
        ));
    }
    require_defect(system, xi, delta)?;
    let block_start = require_tail(xi)?;
    let shadow = Point::Symbolic(assemble_center_coordinates(xi, block_start)?);
    let tight = match case_split_index(&alpha, delta) {
        None => alpha.pow_int(-1),
        Some(n) => alpha.pow_int(-n - 1),
    };
    certify(system, xi, shadow, &tight, delta.clone(), Some(ExactReal::one()))
}

/// Builds the two-sided shadow: coordinates `<= 0` come from orbit element 0,
/// coordinates `n >= 0` from the center coordinate of orbit element n.
fn assemble_center_coordinates(xi: &PseudoOrbit, block_start: usize) -> Result<SymbolicPoint> {
    let x0 = xi.points()[0].as_symbolic()?;
    let alphabet = x0.alphabet();
    let (_, _, lend, lper) = x0.two_sided_shape();
    let boundary = lend.min(-1);
    let left: Vec<Sym> = (boundary - lper + 1..=boundary).map(|n| x0.coord(n)).collect();
    let mut center: Vec<Sym> = (boundary + 1..=-1).map(|n| x0.coord(n)).collect();
    let stream: Vec<Sym> = xi
        .points()
        .iter()
        .map(|p| Ok(p.as_symbolic()?.coord(0)))
        .collect::<Result<_>>()?;
    center.extend_from_slice(&stream[..block_start]);
    let right = &stream[block_start..];
    SymbolicPoint::two_sided(&left, &center, right, boundary + 1, alphabet)
}

/// Product one-sided shift over a finite metric alphabet: bound `δ/(α-1)`,
/// contractive exactly when `α > 2`.
pub fn shadow_product_one_sided(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    delta: &ExactReal,
) -> Result<ShadowCertificate> {
    let alpha = shift_alpha(system, Side::One)?;
    require_defect(system, xi, delta)?;
    let block_start = require_tail(xi)?;
    let shadow = Point::Symbolic(assemble_first_coordinates(xi, block_start)?);
    let lip = &ExactReal::one() / &(&alpha - &ExactReal::one());
    let bound = &lip * delta;
    certify(system, xi, shadow, &bound.clone(), bound, Some(lip))
}

/// Product two-sided shift: bound `αδ/(α-1)`, with exact agreement at
/// coordinate 0.
pub fn shadow_product_two_sided(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    delta: &ExactReal,
) -> Result<ShadowCertificate> {
    let alpha = shift_alpha(system, Side::Two)?;
    require_defect(system, xi, delta)?;
    let block_start = require_tail(xi)?;
    let shadow_point = assemble_center_coordinates(xi, block_start)?;
    // Coordinate 0 of σ^i(x) is coordinate 0 of orbit element i by
    // construction; assert it over the explicit range.
    let mut probe = shadow_point.clone();
    for (i, p) in xi.points().iter().enumerate() {
        if probe.coord(0) != p.as_symbolic()?.coord(0) {
            return Err(Error::OracleFault {
                bound: ExactReal::zero(),
                index: i,
                deviation: ExactReal::one(),
            });
        }
        probe = crate::systems::shift_two_sided(&probe, false)?;
    }
    let lip = &alpha / &(&alpha - &ExactReal::one());
    let bound = &lip * delta;
    certify(system, xi, Point::Symbolic(shadow_point), &bound.clone(), bound, Some(lip))
}

/// Subsequence map `f_K`: bound `δ^K`. The shadow reads coordinate `a` of
/// orbit element `β` at its own coordinate `a·K^β`; it is generally not
/// eventually periodic, so it is returned as an assembled point.
pub fn shadow_subsequence_fk(
    system: &SystemDescriptor,
    xi: &PseudoOrbit,
    delta: &ExactReal,
) -> Result<ShadowCertificate> {
    let k = match (&system.map, &system.metric) {
        (
            MapKind::Subsequence { k },
            MetricDescriptor::WeightedSup {
                side: Side::One,
                alpha,
                symbols: AlphabetMetric::Discrete,
            },
        ) if *alpha == ExactReal::from_int(2) => *k,
        _ => {
            return Err(Error::DomainMismatch(
                "f_K construction needs the weight-2 one-sided binary metric".into(),
            ))
        }
    };
    require_defect(system, xi, delta)?;
    let block_start = require_tail(xi)?;
    let prefix: Vec<SymbolicPoint> = xi.points()[..block_start]
        .iter()
        .map(|p| Ok(p.as_symbolic()?.clone()))
        .collect::<Result<_>>()?;
    let block: Vec<SymbolicPoint> = xi.points()[block_start..]
        .iter()
        .map(|p| Ok(p.as_symbolic()?.clone()))
        .collect::<Result<_>>()?;
    let shadow = Point::Assembled(AssembledPoint::new(k, prefix, block)?);
    let two = ExactReal::from_int(2);
    let ki = i64::from(k);
    let tight = match case_split_index(&two, delta) {
        None => two.pow_int(-ki),
        Some(n) => two.pow_int(-ki * n - ki),
    };
    let bound = delta.pow_int(ki);
    certify(system, xi, shadow, &tight, bound, None)
}

/// Preimage selection for the additive cellular map: the unique `z` with
/// `f(z) = y`, `z_1 = x_1`, satisfying `d(z, x) <= α^{-1}δ` whenever
/// `y ∈ B_δ(f(x))`. The free bit is pinned to `x_1`; the rest is the forced
/// recursion `z_{n+1} = y_n + z_n`.
pub fn preimage_selector_cellular(
    system: &SystemDescriptor,
    y: &SymbolicPoint,
    x: &SymbolicPoint,
    delta: &ExactReal,
) -> Result<Point> {
    let alpha = match (&system.map, &system.metric) {
        (MapKind::AdditiveCellular, MetricDescriptor::WeightedSup { side: Side::One, alpha, .. }) => {
            alpha.clone()
        }
        _ => return Err(Error::DomainMismatch("expected the additive cellular system".into())),
    };
    let fx = additive_cellular_map(x)?;
    let radius = &alpha.pow_int(-1) * delta;
    if !system.metric.distance_le(
        &Point::Symbolic(fx),
        &Point::Symbolic(y.clone()),
        delta,
    )? {
        return Err(Error::InclusionViolation { radius });
    }
    let (y_start, y_per) = y.one_sided_shape();
    // Prefix-xor closure: the parity of the period word decides whether the
    // output period carries over or doubles.
    let parity: Sym = (0..y_per).map(|j| y.coord(y_start + j)).fold(0, |a, b| a ^ b);
    let per_len = if parity == 0 { y_per } else { 2 * y_per };
    let window = y_start + per_len;
    let mut z: Vec<Sym> = Vec::with_capacity(window as usize);
    z.push(x.coord(1));
    for n in 1..window {
        let last = *z.last().unwrap();
        z.push(y.coord(n) ^ last);
    }
    let split = (y_start - 1) as usize;
    let zp = SymbolicPoint::one_sided(&z[..split], &z[split..], 2)?;
    debug_assert_eq!(additive_cellular_map(&zp)?, *y);
    if !system.metric.distance_le(
        &Point::Symbolic(zp.clone()),
        &Point::Symbolic(x.clone()),
        &radius,
    )? {
        return Err(Error::InclusionViolation { radius });
    }
    Ok(Point::Symbolic(zp))
}

/// Injectivity threshold of the circle power map: preimage selection inside a
/// closed `δ`-ball is unique for `δ < 1/(2n)`.
pub fn circle_injectivity_threshold(n: u32) -> ExactReal {
    ExactReal::ratio(1, 2 * i64::from(n))
}

/// Preimage selection for `f_n` on the circle: the n-th root of `y` lying in
/// `B_δ(x)` (ties broken toward the smaller angle).
pub fn preimage_selector_circle(
    system: &SystemDescriptor,
    y: &CirclePoint,
    x: &CirclePoint,
    delta: &ExactReal,
) -> Result<Point> {
    let n = match (&system.map, &system.metric) {
        (MapKind::CirclePower { n }, MetricDescriptor::CircleArc) => *n,
        _ => return Err(Error::DomainMismatch("expected a circle power system".into())),
    };
    if *delta > circle_injectivity_threshold(n) {
        return Err(Error::InvalidParameter(format!(
            "delta exceeds the injectivity threshold 1/{}",
            2 * n
        )));
    }
    let pre_radius = &ExactReal::from_int(u64::from(n)) * delta;
    let fx = circle_power_map(x, n);
    if fx.arc_distance(y) > pre_radius {
        return Err(Error::InclusionViolation { radius: pre_radius });
    }
    let mut best: Option<CirclePoint> = None;
    for j in 0..i64::from(n) {
        let root = CirclePoint::new(
            (y.angle() + num_rational::BigRational::from_integer(j.into()))
                / num_rational::BigRational::from_integer(i64::from(n).into()),
        );
        if root.arc_distance(x) <= *delta {
            best = match best {
                None => Some(root),
                Some(prev) => {
                    let take = root.arc_distance(x) < prev.arc_distance(x)
                        || (root.arc_distance(x) == prev.arc_distance(x)
                            && root.angle() < prev.angle());
                    Some(if take { root } else { prev })
                }
            };
        }
    }
    let z = best.ok_or(Error::InclusionViolation { radius: delta.clone() })?;
    debug_assert_eq!(circle_power_map(&z, n), *y);
    Ok(Point::Circle(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{genuine_orbit, random_tail_periodic, verify_shadowing};
    use crate::systems::shift_one_sided;
    use std::collections::HashMap;

    fn one(u: &[Sym], w: &[Sym]) -> SymbolicPoint {
        SymbolicPoint::one_sided(u, w, 2).unwrap()
    }

    fn tail_orbit_of_genuine(system: &SystemDescriptor, x: &Point) -> PseudoOrbit {
        let (path, start) = crate::orbits::orbit_to_cycle(system, x).unwrap();
        PseudoOrbit::tail_periodic(path, start).unwrap()
    }

    #[test]
    fn one_sided_construction_on_genuine_orbit_returns_start() {
        let sys = SystemDescriptor::one_sided_shift(ExactReal::from_int(2)).unwrap();
        let x0 = Point::Symbolic(one(&[1, 0, 0], &[1, 1, 0]));
        let xi = tail_orbit_of_genuine(&sys, &x0);
        let cert = shadow_one_sided_shift(&sys, &xi, &ExactReal::ratio(1, 8)).unwrap();
        assert_eq!(cert.shadow, x0);
        assert!(
            verify_shadowing(&sys, &xi, &cert.shadow, &ExactReal::zero(), xi.explicit_len())
                .unwrap()
        );
    }

    #[test]
    fn one_sided_bound_on_random_orbits() {
        let sys = SystemDescriptor::one_sided_shift(ExactReal::from_int(2)).unwrap();
        let delta = ExactReal::ratio(1, 8);
        for seed in 0..200 {
            let xi = random_tail_periodic(&sys, &delta, 4, seed).unwrap();
            let cert = shadow_one_sided_shift(&sys, &xi, &delta).unwrap();
            assert_eq!(cert.bound, ExactReal::ratio(1, 16));
            assert!(cert.all_indices);
            assert!(cert.is_contractive());
            assert!(
                verify_shadowing(&sys, &xi, &cert.shadow, &cert.bound, xi.explicit_len()).unwrap()
            );
        }
    }

    #[test]
    fn one_sided_bound_is_attained_by_adversarial_orbit() {
        // delta = 1/8 (N = 2): flipping coordinate N+1 = 3 of every image
        // realizes deviation exactly alpha^{-N-2} = 1/16.
        let sys = SystemDescriptor::one_sided_shift(ExactReal::from_int(2)).unwrap();
        let delta = ExactReal::ratio(1, 8);
        let flip3 = |p: &SymbolicPoint| -> SymbolicPoint {
            let (start, per) = p.one_sided_shape();
            let hi = start.max(4) + per;
            let mut pre: Vec<Sym> = (1..hi).map(|n| p.coord(n)).collect();
            pre[2] ^= 1;
            let word: Vec<Sym> = (hi..hi + per).map(|n| p.coord(n)).collect();
            SymbolicPoint::one_sided(&pre, &word, 2).unwrap()
        };
        let mut seen: HashMap<SymbolicPoint, usize> = HashMap::new();
        let mut pts: Vec<Point> = Vec::new();
        let mut cur = one(&[], &[0]);
        let block_start = loop {
            if let Some(&j) = seen.get(&cur) {
                break j;
            }
            seen.insert(cur.clone(), pts.len());
            pts.push(Point::Symbolic(cur.clone()));
            cur = flip3(&shift_one_sided(&cur).unwrap());
        };
        let xi = PseudoOrbit::tail_periodic(pts, block_start).unwrap();
        assert_eq!(pseudo_orbit_defect(&sys, &xi).unwrap(), ExactReal::ratio(1, 8));
        let cert = shadow_one_sided_shift(&sys, &xi, &delta).unwrap();
        // realized max deviation over the explicit indices is exactly 1/16
        let mut worst = ExactReal::zero();
        let mut y = cert.shadow.clone();
        for i in 0..xi.explicit_len() {
            worst = worst.max(sys.distance(&y, xi.point_at(i)).unwrap());
            y = sys.evaluate(&y).unwrap();
        }
        assert_eq!(worst, ExactReal::ratio(1, 16));
    }

    #[test]
    fn two_sided_bound_and_naive_baseline() {
        let sys = SystemDescriptor::two_sided_shift(ExactReal::from_int(2)).unwrap();
        let delta = ExactReal::ratio(1, 8);
        let mut baseline_fails = false;
        for seed in 0..200 {
            let xi = random_tail_periodic(&sys, &delta, 4, seed).unwrap();
            let cert = shadow_two_sided_shift(&sys, &xi, &delta).unwrap();
            assert_eq!(cert.bound, delta);
            assert!(cert.all_indices);
            assert!(
                verify_shadowing(&sys, &xi, &cert.shadow, &cert.bound, xi.explicit_len()).unwrap()
            );
            let naive = xi.points()[0].clone();
            if !verify_shadowing(&sys, &xi, &naive, &delta, xi.explicit_len()).unwrap() {
                baseline_fails = true;
            }
        }
        assert!(baseline_fails, "the naive start point should fail for some orbit");
    }

    #[test]
    fn two_sided_construction_on_genuine_orbit_returns_start() {
        // Only fully periodic points have closing two-sided shift orbits.
        let sys = SystemDescriptor::two_sided_shift(ExactReal::from_int(2)).unwrap();
        let x0 = Point::Symbolic(
            SymbolicPoint::two_sided(&[0, 1, 1], &[], &[0, 1, 1], 0, 2).unwrap(),
        );
        let xi = tail_orbit_of_genuine(&sys, &x0);
        let cert = shadow_two_sided_shift(&sys, &xi, &ExactReal::ratio(1, 4)).unwrap();
        assert_eq!(cert.shadow, x0);
    }

    #[test]
    fn product_one_sided_constants() {
        let table = vec![
            vec![ExactReal::zero(), ExactReal::one()],
            vec![ExactReal::one(), ExactReal::zero()],
        ];
        let sys3 =
            SystemDescriptor::product_shift(Side::One, ExactReal::from_int(3), table.clone())
                .unwrap();
        let delta = ExactReal::ratio(1, 9);
        for seed in 0..100 {
            let xi = random_tail_periodic(&sys3, &delta, 3, seed).unwrap();
            let cert = shadow_product_one_sided(&sys3, &xi, &delta).unwrap();
            assert_eq!(cert.bound, ExactReal::ratio(1, 18));
            assert!(cert.is_contractive());
        }
        // alpha = 4 gives the contractive constant 1/3
        let sys4 =
            SystemDescriptor::product_shift(Side::One, ExactReal::from_int(4), table).unwrap();
        let xi = random_tail_periodic(&sys4, &ExactReal::ratio(1, 16), 3, 7).unwrap();
        let cert = shadow_product_one_sided(&sys4, &xi, &ExactReal::ratio(1, 16)).unwrap();
        assert_eq!(cert.lipschitz, Some(ExactReal::ratio(1, 3)));
        assert!(cert.is_contractive());
    }

    #[test]
    fn product_single_point_alphabet_is_degenerate() {
        let sys = SystemDescriptor::product_shift(
            Side::One,
            ExactReal::from_int(3),
            vec![vec![ExactReal::zero()]],
        )
        .unwrap();
        let p = Point::Symbolic(SymbolicPoint::one_sided(&[], &[0], 1).unwrap());
        let xi = PseudoOrbit::tail_periodic(vec![p.clone(), p.clone()], 1).unwrap();
        let cert = shadow_product_one_sided(&sys, &xi, &ExactReal::ratio(1, 9)).unwrap();
        assert!(verify_shadowing(&sys, &xi, &cert.shadow, &ExactReal::zero(), 2).unwrap());
    }

    #[test]
    fn product_two_sided_constants_and_center_exactness() {
        let table = vec![
            vec![ExactReal::zero(), ExactReal::one()],
            vec![ExactReal::one(), ExactReal::zero()],
        ];
        let sys =
            SystemDescriptor::product_shift(Side::Two, ExactReal::from_int(3), table).unwrap();
        let delta = ExactReal::ratio(1, 9);
        for seed in 0..100 {
            let xi = random_tail_periodic(&sys, &delta, 3, seed).unwrap();
            let cert = shadow_product_two_sided(&sys, &xi, &delta).unwrap();
            assert_eq!(cert.bound, ExactReal::ratio(1, 6));
            assert!(
                verify_shadowing(&sys, &xi, &cert.shadow, &cert.bound, xi.explicit_len()).unwrap()
            );
        }
    }

    #[test]
    fn subsequence_bound_examples() {
        let sys = SystemDescriptor::subsequence(2).unwrap();
        let delta = ExactReal::ratio(1, 8);
        for seed in 0..100 {
            let xi = random_tail_periodic(&sys, &delta, 3, seed).unwrap();
            let cert = shadow_subsequence_fk(&sys, &xi, &delta).unwrap();
            assert_eq!(cert.bound, ExactReal::ratio(1, 64));
            assert!(cert.all_indices);
        }
        // genuine orbit: zero deviations at every index
        let sys3 = SystemDescriptor::subsequence(3).unwrap();
        let x0 = Point::Symbolic(one(&[1, 0], &[1, 1, 0, 0]));
        let xi = tail_orbit_of_genuine(&sys3, &x0);
        let cert = shadow_subsequence_fk(&sys3, &xi, &ExactReal::ratio(1, 8)).unwrap();
        let mut y = cert.shadow.clone();
        for i in 0..xi.explicit_len() + 4 {
            let tiny = ExactReal::from_int(2).pow_int(-40);
            assert!(sys3.distance_le(&y, xi.point_at(i), &tiny).unwrap());
            y = sys3.evaluate(&y).unwrap();
        }
    }

    #[test]
    fn cellular_preimage_forced_recursion() {
        let sys = SystemDescriptor::additive_cellular(ExactReal::from_int(2)).unwrap();
        // y = f(x) gives back x
        let x = one(&[1, 0], &[0, 1, 1]);
        let y = additive_cellular_map(&x).unwrap();
        let z = preimage_selector_cellular(&sys, &y, &x, &ExactReal::ratio(1, 4)).unwrap();
        assert_eq!(z, Point::Symbolic(x.clone()));
        // x = 000..., y = 0010...: z = 000(1)^inf at distance 1/16
        let x0 = one(&[], &[0]);
        let y2 = one(&[0, 0, 1], &[0]);
        let z2 = preimage_selector_cellular(&sys, &y2, &x0, &ExactReal::ratio(1, 4)).unwrap();
        assert_eq!(z2, Point::Symbolic(one(&[0, 0, 0], &[1])));
        assert_eq!(
            sys.distance(&z2, &Point::Symbolic(x0)).unwrap(),
            ExactReal::ratio(1, 16)
        );
        // outside the ball: refused
        let far = one(&[1], &[0]);
        assert!(matches!(
            preimage_selector_cellular(&sys, &far, &one(&[], &[0]), &ExactReal::ratio(1, 4)),
            Err(Error::InclusionViolation { .. })
        ));
    }

    #[test]
    fn circle_preimage_nearest_root() {
        let sys = SystemDescriptor::circle_power(3).unwrap();
        let x = CirclePoint::from_ratio(0, 1);
        let y = CirclePoint::from_ratio(1, 12);
        let z = preimage_selector_circle(&sys, &y, &x, &ExactReal::ratio(1, 12)).unwrap();
        assert_eq!(z, Point::Circle(CirclePoint::from_ratio(1, 36)));
        // y = f(x) gives back x
        let w = CirclePoint::from_ratio(2, 7);
        let fw = circle_power_map(&w, 3);
        assert_eq!(
            preimage_selector_circle(&sys, &fw, &w, &ExactReal::ratio(1, 12)).unwrap(),
            Point::Circle(w)
        );
        // delta beyond the injectivity threshold is refused
        assert!(preimage_selector_circle(
            &sys,
            &CirclePoint::from_ratio(0, 1),
            &CirclePoint::from_ratio(0, 1),
            &ExactReal::ratio(1, 4),
        )
        .is_err());
    }

    #[test]
    fn circle_root_uniqueness_below_threshold() {
        // For delta < 1/(2n), at most one n-th root lies in B_delta(x).
        for n in [2u32, 3, 5] {
            let delta = ExactReal::ratio(1, (2 * i64::from(n)) + 1);
            for px in 0..24i64 {
                let x = CirclePoint::from_ratio(px, 24);
                for py in 0..24i64 {
                    let y = CirclePoint::from_ratio(py, 24);
                    let mut in_ball = 0;
                    for j in 0..i64::from(n) {
                        let root = CirclePoint::new(
                            (y.angle() + num_rational::BigRational::from_integer(j.into()))
                                / num_rational::BigRational::from_integer(i64::from(n).into()),
                        );
                        if root.arc_distance(&x) <= delta {
                            in_ball += 1;
                        }
                    }
                    assert!(in_ball <= 1, "n={n} x={px}/24 y={py}/24");
                }
            }
        }
    }

    #[test]
    fn snowflake_transport_of_the_one_sided_certificate() {
        // alpha = 4 snowflaked by 1/2 is the alpha = 2 system; a certificate at
        // (L, delta) transports to (L^{1/2}, delta^{1/2}).
        let sys4 = SystemDescriptor::one_sided_shift(ExactReal::from_int(4)).unwrap();
        let sys2 = sys4.snowflake(1, 2).unwrap();
        let delta = ExactReal::ratio(1, 16);
        let delta_sqrt = ExactReal::ratio(1, 4);
        for seed in 0..100 {
            let xi = random_tail_periodic(&sys4, &delta, 3, seed).unwrap();
            let cert = shadow_one_sided_shift(&sys4, &xi, &delta).unwrap();
            assert!(pseudo_orbit_defect(&sys2, &xi).unwrap() <= delta_sqrt);
            let transported = &ExactReal::ratio(1, 2) * &delta_sqrt;
            assert!(
                verify_shadowing(&sys2, &xi, &cert.shadow, &transported, xi.explicit_len())
                    .unwrap()
            );
        }
    }

    #[test]
    fn defect_above_delta_is_refused() {
        let sys = SystemDescriptor::one_sided_shift(ExactReal::from_int(2)).unwrap();
        let xi = PseudoOrbit::tail_periodic(
            vec![Point::Symbolic(one(&[], &[0])), Point::Symbolic(one(&[1], &[0]))],
            1,
        )
        .unwrap();
        assert!(matches!(
            shadow_one_sided_shift(&sys, &xi, &ExactReal::ratio(1, 8)),
            Err(Error::DefectExceedsDelta { .. })
        ));
    }

    #[test]
    fn genuine_orbit_helper_zero_defect() {
        let sys = SystemDescriptor::one_sided_shift(ExactReal::from_int(2)).unwrap();
        let orbit = genuine_orbit(&sys, &Point::Symbolic(one(&[1], &[0, 1])), 5).unwrap();
        assert!(pseudo_orbit_defect(&sys, &orbit).unwrap().is_zero());
    }
}
