//! Metrics over the supported point domains, evaluated exactly.
//!
//! The weighted-sup metrics on sequence spaces are `sup_n α^{-n} d_A(x_n, y_n)`
//! (one-sided, `n ≥ 1`) and `sup_n α^{-|n|} d_A(x_n, y_n)` (two-sided). For
//! eventually-periodic points the supremum is attained inside a finite window
//! determined by the preperiods and the lcm of the periods, so it is computed
//! exactly. Snowflaking raises a metric to a power in `(0, 1]`; the result is
//! materialized back into the same descriptor kinds, with symbolic radical
//! entries where a table value has no exact root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{Point, Side, SymbolicPoint};
use crate::rational::ExactReal;

/// Distance between alphabet symbols in a product sequence space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlphabetMetric {
    /// 0/1 indicator distance (the `|x_n - y_n|` of the binary examples).
    Discrete,
    /// A finite metric space on the alphabet, as a symmetric table.
    Table(Vec<Vec<ExactReal>>),
}

impl AlphabetMetric {
    pub fn distance(&self, a: u8, b: u8) -> ExactReal {
        match self {
            AlphabetMetric::Discrete => {
                if a == b {
                    ExactReal::zero()
                } else {
                    ExactReal::one()
                }
            }
            AlphabetMetric::Table(t) => t[a as usize][b as usize].clone(),
        }
    }

    pub fn max_distance(&self) -> ExactReal {
        match self {
            AlphabetMetric::Discrete => ExactReal::one(),
            AlphabetMetric::Table(t) => t
                .iter()
                .flatten()
                .cloned()
                .fold(ExactReal::zero(), ExactReal::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricDescriptor {
    /// `sup α^{-n} d_A(x_n, y_n)` over `n ≥ 1` (one-sided) or `n ∈ ℤ` weighted
    /// by `α^{-|n|}` (two-sided), with `α > 1`.
    WeightedSup {
        side: Side,
        alpha: ExactReal,
        symbols: AlphabetMetric,
    },
    /// A finite metric space given by a symmetric table.
    FiniteTable { table: Vec<Vec<ExactReal>> },
    /// Arc length on the circle of circumference 1.
    CircleArc,
}

fn validate_table(table: &[Vec<ExactReal>]) -> Result<()> {
    let n = table.len();
    if table.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("metric table is not square".into()));
    }
    for i in 0..n {
        for j in 0..n {
            if table[i][j] != table[j][i] {
                return Err(Error::InvalidParameter("metric table not symmetric".into()));
            }
            if (i == j) != table[i][j].is_zero() {
                return Err(Error::InvalidParameter(
                    "metric table must vanish exactly on the diagonal".into(),
                ));
            }
        }
    }
    // Triangle inequality, checked additively when every entry is rational and
    // by the strong (max) form otherwise; snowflaked tables always satisfy the
    // additive form when their base does.
    let all_rational = table.iter().flatten().all(|v| v.is_rational());
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let ok = if all_rational {
                    table[i][k] <= &table[i][j] + &table[j][k]
                } else {
                    table[i][k] <= table[i][j].clone().max(table[j][k].clone())
                };
                if !ok {
                    return Err(Error::InvalidParameter(format!(
                        "triangle inequality fails at ({i},{j},{k})"
                    )));
                }
            }
        }
    }
    Ok(())
}

impl MetricDescriptor {
    pub fn weighted_sup(side: Side, alpha: ExactReal, symbols: AlphabetMetric) -> Result<Self> {
        if alpha <= ExactReal::one() {
            return Err(Error::InvalidParameter("weighted-sup needs alpha > 1".into()));
        }
        if !alpha.is_rational() {
            return Err(Error::InvalidParameter("alpha must be rational".into()));
        }
        if let AlphabetMetric::Table(t) = &symbols {
            validate_table(t)?;
        }
        Ok(MetricDescriptor::WeightedSup { side, alpha, symbols })
    }

    pub fn binary_shift(side: Side, alpha: ExactReal) -> Result<Self> {
        Self::weighted_sup(side, alpha, AlphabetMetric::Discrete)
    }

    pub fn finite_table(table: Vec<Vec<ExactReal>>) -> Result<Self> {
        validate_table(&table)?;
        Ok(MetricDescriptor::FiniteTable { table })
    }

    pub(crate) fn finite_table_unchecked(table: Vec<Vec<ExactReal>>) -> Self {
        MetricDescriptor::FiniteTable { table }
    }

    /// Whether the strong triangle inequality holds. Exact for finite tables
    /// (exhaustive) and structural for the sequence-space metrics.
    pub fn ultrametric(&self) -> bool {
        match self {
            MetricDescriptor::WeightedSup { symbols, .. } => match symbols {
                AlphabetMetric::Discrete => true,
                AlphabetMetric::Table(t) => table_is_ultrametric(t),
            },
            MetricDescriptor::FiniteTable { table } => table_is_ultrametric(table),
            MetricDescriptor::CircleArc => false,
        }
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<ExactReal> {
        match self {
            MetricDescriptor::WeightedSup { side, alpha, symbols } => {
                match (x, y) {
                    (Point::Symbolic(a), Point::Symbolic(b)) => {
                        check_sides(a, b, *side)?;
                        Ok(weighted_sup_distance(a, b, alpha, symbols, *side))
                    }
                    _ => Err(Error::Unsupported(
                        "exact supremum over an assembled point is not closed-form; \
                         use distance_le"
                            .into(),
                    )),
                }
            }
            MetricDescriptor::FiniteTable { table } => {
                let (i, j) = (x.as_finite()?, y.as_finite()?);
                let n = table.len();
                if i >= n || j >= n {
                    return Err(Error::PointOutsideDomain { index: i.max(j), size: n });
                }
                Ok(table[i][j].clone())
            }
            MetricDescriptor::CircleArc => Ok(x.as_circle()?.arc_distance(y.as_circle()?)),
        }
    }

    /// Decides `d(x, y) <= bound` exactly. Unlike [`distance`], this also
    /// covers assembled points: only coordinates whose weight exceeds the
    /// bound can matter, so a finite scan decides the comparison.
    ///
    /// [`distance`]: MetricDescriptor::distance
    pub fn distance_le(&self, x: &Point, y: &Point, bound: &ExactReal) -> Result<bool> {
        if let MetricDescriptor::WeightedSup { side, alpha, symbols } = self {
            let (a, b) = (CoordView::new(x, *side)?, CoordView::new(y, *side)?);
            if a.alphabet() != b.alphabet() {
                return Err(Error::DomainMismatch("alphabet size mismatch".into()));
            }
            if bound.is_zero() && (a.is_assembled() || b.is_assembled()) {
                return Err(Error::Unsupported(
                    "exact equality of assembled points is not decided by a bounded scan".into(),
                ));
            }
            let maxd = symbols.max_distance();
            if maxd.is_zero() {
                return Ok(true);
            }
            // The center coordinate of a two-sided space carries weight 1.
            if *side == Side::Two && symbols.distance(a.coord(0), b.coord(0)) > *bound {
                return Ok(false);
            }
            // Scan every n with alpha^{-|n|} * maxd > bound.
            let mut n = 1i64;
            loop {
                let w = alpha.pow_int(-n);
                if &w * &maxd <= *bound {
                    return Ok(true);
                }
                for idx in index_pair(n, *side) {
                    if &w * &symbols.distance(a.coord(idx), b.coord(idx)) > *bound {
                        return Ok(false);
                    }
                }
                n += 1;
            }
        } else {
            Ok(self.distance(x, y)? <= *bound)
        }
    }

    /// The snowflake transform `d ↦ d^(num/den)` with exponent in `(0, 1]`.
    pub fn snowflake(&self, num: u32, den: u32) -> Result<MetricDescriptor> {
        if num == 0 || den == 0 || num > den {
            return Err(Error::InvalidParameter(
                "snowflake exponent must lie in (0, 1]".into(),
            ));
        }
        if num == den {
            return Ok(self.clone());
        }
        match self {
            MetricDescriptor::WeightedSup { side, alpha, symbols } => {
                let alpha2 = alpha.pow_ratio(num, den)?;
                if !alpha2.is_rational() {
                    return Err(Error::InvalidParameter(format!(
                        "alpha^({num}/{den}) is irrational; weighted-sup snowflake needs an \
                         exact root"
                    )));
                }
                let symbols2 = match symbols {
                    AlphabetMetric::Discrete => AlphabetMetric::Discrete,
                    AlphabetMetric::Table(t) => {
                        let mut out = Vec::with_capacity(t.len());
                        for row in t {
                            let mut r2 = Vec::with_capacity(row.len());
                            for v in row {
                                let p = v.pow_ratio(num, den)?;
                                if !p.is_rational() {
                                    return Err(Error::InvalidParameter(
                                        "alphabet table entry has no exact root".into(),
                                    ));
                                }
                                r2.push(p);
                            }
                            out.push(r2);
                        }
                        AlphabetMetric::Table(out)
                    }
                };
                MetricDescriptor::weighted_sup(*side, alpha2, symbols2)
            }
            MetricDescriptor::FiniteTable { table } => {
                let mut out = Vec::with_capacity(table.len());
                for row in table {
                    let mut r2 = Vec::with_capacity(row.len());
                    for v in row {
                        r2.push(v.pow_ratio(num, den)?);
                    }
                    out.push(r2);
                }
                // Powers in (0,1] preserve the metric axioms; entries may now
                // be symbolic radicals, so skip the additive re-validation.
                Ok(MetricDescriptor::finite_table_unchecked(out))
            }
            MetricDescriptor::CircleArc => Err(Error::InvalidParameter(
                "the arc metric's value set is not closed under exact roots".into(),
            )),
        }
    }
}

/// Exhaustive strong-triangle check over a finite table.
pub fn table_is_ultrametric(table: &[Vec<ExactReal>]) -> bool {
    let n = table.len();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if table[i][k] > table[i][j].clone().max(table[j][k].clone()) {
                    return false;
                }
            }
        }
    }
    true
}

/// `is_ultrametric` over a finite-table descriptor.
pub fn is_ultrametric(metric: &MetricDescriptor) -> Result<bool> {
    match metric {
        MetricDescriptor::FiniteTable { table } => Ok(table_is_ultrametric(table)),
        _ => Err(Error::InvalidParameter(
            "is_ultrametric runs on finite-table metrics".into(),
        )),
    }
}

/// Closed-ball membership: `d(center, candidate) <= r`.
pub fn ball_membership(
    metric: &MetricDescriptor,
    center: &Point,
    r: &ExactReal,
    candidate: &Point,
) -> Result<bool> {
    metric.distance_le(center, candidate, r)
}

/// Uniform coordinate access over symbolic and assembled points.
enum CoordView<'a> {
    Symbolic(&'a SymbolicPoint),
    Assembled(&'a crate::point::AssembledPoint),
}

impl<'a> CoordView<'a> {
    fn new(p: &'a Point, side: Side) -> Result<Self> {
        match p {
            Point::Symbolic(s) => {
                if s.side() != side {
                    return Err(Error::DomainMismatch(
                        "point side does not match metric".into(),
                    ));
                }
                Ok(CoordView::Symbolic(s))
            }
            Point::Assembled(a) => {
                if side != Side::One {
                    return Err(Error::DomainMismatch(
                        "assembled points live in one-sided spaces".into(),
                    ));
                }
                Ok(CoordView::Assembled(a))
            }
            _ => Err(Error::DomainMismatch("expected a sequence-space point".into())),
        }
    }

    fn coord(&self, n: i64) -> u8 {
        match self {
            CoordView::Symbolic(s) => s.coord(n),
            CoordView::Assembled(a) => a.coord(n),
        }
    }

    fn alphabet(&self) -> u8 {
        match self {
            CoordView::Symbolic(s) => s.alphabet(),
            CoordView::Assembled(a) => a.alphabet(),
        }
    }

    fn is_assembled(&self) -> bool {
        matches!(self, CoordView::Assembled(_))
    }
}

fn check_sides(a: &SymbolicPoint, b: &SymbolicPoint, side: Side) -> Result<()> {
    if a.side() != side || b.side() != side {
        return Err(Error::DomainMismatch("point side does not match metric".into()));
    }
    if a.alphabet() != b.alphabet() {
        return Err(Error::DomainMismatch("alphabet size mismatch".into()));
    }
    Ok(())
}

fn index_pair(n: i64, side: Side) -> Vec<i64> {
    match side {
        Side::One => vec![n],
        Side::Two => vec![n, -n],
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    num_integer::Integer::lcm(&a, &b)
}

fn weighted_sup_distance(
    a: &SymbolicPoint,
    b: &SymbolicPoint,
    alpha: &ExactReal,
    symbols: &AlphabetMetric,
    side: Side,
) -> ExactReal {
    let mut best = ExactReal::zero();
    let mut consider = |n: i64| {
        let d = symbols.distance(a.coord(n), b.coord(n));
        if !d.is_zero() {
            let w = alpha.pow_int(-n.abs());
            let v = &w * &d;
            if v > best {
                best = v;
            }
        }
    };
    match side {
        Side::One => {
            let (sa, pa) = a.one_sided_shape();
            let (sb, pb) = b.one_sided_shape();
            let hi = sa.max(sb) + lcm(pa, pb) - 1;
            for n in 1..=hi {
                consider(n);
            }
        }
        Side::Two => {
            let (ra, rpa, la, lpa) = a.two_sided_shape();
            let (rb, rpb, lb, lpb) = b.two_sided_shape();
            let hi = ra.max(rb).max(0) + lcm(rpa, rpb) - 1;
            let lo = la.min(lb).min(0) - lcm(lpa, lpb) + 1;
            for n in lo..=hi {
                consider(n);
            }
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct MetricJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<ExactReal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Vec<Vec<ExactReal>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ultrametric: Option<bool>,
}

impl Serialize for MetricDescriptor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let json = match self {
            MetricDescriptor::WeightedSup { side, alpha, symbols } => MetricJson {
                kind: match side {
                    Side::One => "weighted-sup-one-sided".into(),
                    Side::Two => "weighted-sup-two-sided".into(),
                },
                alpha: Some(alpha.clone()),
                table: match symbols {
                    AlphabetMetric::Discrete => None,
                    AlphabetMetric::Table(t) => Some(t.clone()),
                },
                ultrametric: Some(self.ultrametric()),
            },
            MetricDescriptor::FiniteTable { table } => MetricJson {
                kind: "finite-table".into(),
                alpha: None,
                table: Some(table.clone()),
                ultrametric: Some(self.ultrametric()),
            },
            MetricDescriptor::CircleArc => MetricJson {
                kind: "circle-arc".into(),
                alpha: None,
                table: None,
                ultrametric: Some(false),
            },
        };
        json.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricDescriptor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let json = MetricJson::deserialize(d)?;
        let err = |e: Error| DeError::custom(e.to_string());
        let metric = match json.kind.as_str() {
            "weighted-sup-one-sided" | "weighted-sup-two-sided" => {
                let side = if json.kind.starts_with("weighted-sup-one") {
                    Side::One
                } else {
                    Side::Two
                };
                let alpha = json
                    .alpha
                    .ok_or_else(|| DeError::custom("weighted-sup requires alpha"))?;
                let symbols = match json.table {
                    Some(t) => AlphabetMetric::Table(t),
                    None => AlphabetMetric::Discrete,
                };
                MetricDescriptor::weighted_sup(side, alpha, symbols).map_err(err)?
            }
            "finite-table" => {
                let t = json
                    .table
                    .ok_or_else(|| DeError::custom("finite-table requires table"))?;
                MetricDescriptor::finite_table(t).map_err(err)?
            }
            "circle-arc" => MetricDescriptor::CircleArc,
            other => return Err(DeError::custom(format!("unknown metric kind {other:?}"))),
        };
        if let Some(claim) = json.ultrametric {
            if claim && !metric.ultrametric() {
                return Err(DeError::custom(
                    "metric claims the ultrametric property but a triple violates it",
                ));
            }
        }
        Ok(metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::CirclePoint;

    fn one(u: &[u8], w: &[u8]) -> Point {
        Point::Symbolic(SymbolicPoint::one_sided(u, w, 2).unwrap())
    }

    fn two(l: &[u8], c: &[u8], r: &[u8], anchor: i64) -> Point {
        Point::Symbolic(SymbolicPoint::two_sided(l, c, r, anchor, 2).unwrap())
    }

    fn m1(alpha: i64) -> MetricDescriptor {
        MetricDescriptor::binary_shift(Side::One, ExactReal::from_int(alpha as u64)).unwrap()
    }

    #[test]
    fn one_sided_distance_first_disagreement() {
        let m = m1(2);
        let x = one(&[0], &[1]);
        let y = one(&[], &[1]);
        assert_eq!(m.distance(&x, &y).unwrap(), ExactReal::ratio(1, 2));
        assert!(m.distance(&x, &x).unwrap().is_zero());
    }

    #[test]
    fn two_sided_distance_min_weight_disagreement() {
        // Disagreements exactly at n = -3 and n = 5.
        let m = MetricDescriptor::binary_shift(Side::Two, ExactReal::from_int(2)).unwrap();
        let base = two(&[0], &[], &[0], 0);
        let mut center = vec![0u8; 11]; // indices -5..=5
        center[2] = 1; // n = -3
        center[10] = 1; // n = 5
        let y = two(&[0], &center, &[0], -5);
        let d = m.distance(&base, &y).unwrap();
        assert_eq!(d, ExactReal::ratio(1, 8));
        // Brute scan oracle over a wide window agrees.
        let (bx, by) = (base.as_symbolic().unwrap(), y.as_symbolic().unwrap());
        let mut brute = ExactReal::zero();
        for n in -64i64..=64 {
            if bx.coord(n) != by.coord(n) {
                brute = brute.max(ExactReal::from_int(2).pow_int(-n.abs()));
            }
        }
        assert_eq!(d, brute);
    }

    #[test]
    fn product_alphabet_distance() {
        // A = {a,b,c} with d(a,b)=1, d(b,c)=1/2, d(a,c)=1, alpha=3.
        let t = vec![
            vec![ExactReal::zero(), ExactReal::one(), ExactReal::one()],
            vec![ExactReal::one(), ExactReal::zero(), ExactReal::ratio(1, 2)],
            vec![ExactReal::one(), ExactReal::ratio(1, 2), ExactReal::zero()],
        ];
        let m = MetricDescriptor::weighted_sup(
            Side::One,
            ExactReal::from_int(3),
            AlphabetMetric::Table(t),
        )
        .unwrap();
        let a_inf = Point::Symbolic(SymbolicPoint::one_sided(&[], &[0], 3).unwrap());
        let b_a = Point::Symbolic(SymbolicPoint::one_sided(&[1], &[0], 3).unwrap());
        assert_eq!(m.distance(&a_inf, &b_a).unwrap(), ExactReal::ratio(1, 3));
    }

    #[test]
    fn ball_membership_closed() {
        let m = m1(2);
        let center = one(&[], &[0]);
        assert!(ball_membership(&m, &center, &ExactReal::zero(), &center).unwrap());
        let c1 = one(&[0, 0, 1], &[0]); // distance 1/8
        assert!(ball_membership(&m, &center, &ExactReal::ratio(1, 4), &c1).unwrap());
        let c2 = one(&[0, 1], &[0]); // distance 1/4, closed ball
        assert!(ball_membership(&m, &center, &ExactReal::ratio(1, 4), &c2).unwrap());
        let c3 = one(&[1], &[0]); // distance 1/2
        assert!(!ball_membership(&m, &center, &ExactReal::ratio(1, 4), &c3).unwrap());
    }

    #[test]
    fn snowflake_weighted_sup_takes_exact_root() {
        let m4 = m1(4);
        let m2 = m1(2);
        let s = m4.snowflake(1, 2).unwrap();
        assert_eq!(s, m2);
        // exponent 1 is the identity
        assert_eq!(m4.snowflake(1, 1).unwrap(), m4);
        // alpha without an exact root is refused
        assert!(m1(2).snowflake(1, 2).is_err());
        assert!(m1(2).snowflake(0, 2).is_err());
        assert!(m1(2).snowflake(3, 2).is_err());
    }

    #[test]
    fn snowflake_table_entries() {
        let t = vec![
            vec![ExactReal::zero(), ExactReal::ratio(1, 4), ExactReal::one()],
            vec![ExactReal::ratio(1, 4), ExactReal::zero(), ExactReal::one()],
            vec![ExactReal::one(), ExactReal::one(), ExactReal::zero()],
        ];
        let m = MetricDescriptor::finite_table(t).unwrap();
        let s = m.snowflake(1, 2).unwrap();
        let d01 = s
            .distance(&Point::Finite(0), &Point::Finite(1))
            .unwrap();
        assert_eq!(d01, ExactReal::ratio(1, 2));
        // An entry without an exact root is stored symbolically and still
        // compares exactly.
        let t2 = vec![
            vec![ExactReal::zero(), ExactReal::ratio(1, 2)],
            vec![ExactReal::ratio(1, 2), ExactReal::zero()],
        ];
        let m2 = MetricDescriptor::finite_table(t2).unwrap();
        let s2 = m2.snowflake(1, 2).unwrap();
        let d = s2
            .distance(&Point::Finite(0), &Point::Finite(1))
            .unwrap();
        assert!(!d.is_rational());
        assert!(d > ExactReal::ratio(7, 10));
        assert!(d < ExactReal::ratio(3, 4));
        assert!(is_ultrametric(&s2).unwrap());
    }

    #[test]
    fn ultrametric_tables() {
        let all_one = vec![
            vec![ExactReal::zero(), ExactReal::one(), ExactReal::one()],
            vec![ExactReal::one(), ExactReal::zero(), ExactReal::one()],
            vec![ExactReal::one(), ExactReal::one(), ExactReal::zero()],
        ];
        assert!(is_ultrametric(&MetricDescriptor::finite_table(all_one).unwrap()).unwrap());
        let two = ExactReal::from_int(2);
        let violating = vec![
            vec![ExactReal::zero(), ExactReal::one(), two.clone()],
            vec![ExactReal::one(), ExactReal::zero(), ExactReal::one()],
            vec![two, ExactReal::one(), ExactReal::zero()],
        ];
        assert!(!is_ultrametric(&MetricDescriptor::finite_table(violating).unwrap()).unwrap());
    }

    #[test]
    fn circle_arc_distance() {
        let m = MetricDescriptor::CircleArc;
        let a = Point::Circle(CirclePoint::from_ratio(0, 1));
        let b = Point::Circle(CirclePoint::from_ratio(2, 3));
        assert_eq!(m.distance(&a, &b).unwrap(), ExactReal::ratio(1, 3));
    }
}
