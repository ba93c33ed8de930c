//! Exactly-representable compact dynamical systems.
//!
//! A [`SystemDescriptor`] bundles a point domain, a metric, and a self-map,
//! each exactly evaluable. The named maps are the shift (one- and two-sided,
//! over binary or finite-metric alphabets), the additive cellular map
//! `y_n = x_n + x_{n+1}` over ℤ₂, the subsequence map `f_K(x)_n = x_{Kn}`,
//! circle power maps `z ↦ z^n`, and arbitrary finite transition tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{AlphabetMetric, MetricDescriptor};
use crate::point::{CirclePoint, Point, Side, Sym, SymbolicPoint};
use crate::rational::ExactReal;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    OneSidedSequences { alphabet: u8 },
    TwoSidedSequences { alphabet: u8 },
    Circle,
    Finite { labels: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum MapKind {
    ShiftOneSided,
    ShiftTwoSided,
    AdditiveCellular,
    Subsequence { k: u32 },
    CirclePower { n: u32 },
    Table { successors: Vec<usize> },
}

/// `σ(x)_n = x_{n+1}` on one-sided sequences.
pub fn shift_one_sided(x: &SymbolicPoint) -> Result<SymbolicPoint> {
    match x.repr() {
        crate::point::SymbolicRepr::OneSided { preperiod, period } => {
            if preperiod.is_empty() {
                let mut w = period.clone();
                w.rotate_left(1);
                SymbolicPoint::one_sided(&[], &w, x.alphabet())
            } else {
                SymbolicPoint::one_sided(&preperiod[1..], period, x.alphabet())
            }
        }
        _ => Err(Error::DomainMismatch("shift_one_sided needs a one-sided point".into())),
    }
}

/// The two-sided shift, a bijection; `inverse` selects the inverse shift.
pub fn shift_two_sided(x: &SymbolicPoint, inverse: bool) -> Result<SymbolicPoint> {
    match x.repr() {
        crate::point::SymbolicRepr::TwoSided { left, center, right, anchor } => {
            let shift = if inverse { 1 } else { -1 };
            SymbolicPoint::two_sided(left, center, right, anchor + shift, x.alphabet())
        }
        _ => Err(Error::DomainMismatch("shift_two_sided needs a two-sided point".into())),
    }
}

/// `y_n = x_n + x_{n+1}` over ℤ₂ on one-sided binary sequences.
pub fn additive_cellular_map(x: &SymbolicPoint) -> Result<SymbolicPoint> {
    if x.side() != Side::One || x.alphabet() != 2 {
        return Err(Error::DomainMismatch(
            "additive cellular map acts on one-sided binary sequences".into(),
        ));
    }
    let (start, period) = x.one_sided_shape();
    let pre_len = (start - 1) as usize;
    let out = |n: i64| -> Sym { x.coord(n) ^ x.coord(n + 1) };
    let preperiod: Vec<Sym> = (1..=pre_len as i64).map(out).collect();
    let word: Vec<Sym> = (0..period).map(|j| out(start + j)).collect();
    SymbolicPoint::one_sided(&preperiod, &word, 2)
}

/// `f_K(x)_n = x_{Kn}` on one-sided binary sequences, `K >= 2`.
pub fn subsequence_map(x: &SymbolicPoint, k: u32) -> Result<SymbolicPoint> {
    if k < 2 {
        return Err(Error::InvalidParameter("subsequence map needs K >= 2".into()));
    }
    if x.side() != Side::One {
        return Err(Error::DomainMismatch("subsequence map needs a one-sided point".into()));
    }
    let (start, period) = x.one_sided_shape();
    let k = k as i64;
    // Output is periodic from the first n with K*n >= start.
    let n0 = (start + k - 1) / k;
    let out = |n: i64| -> Sym { x.coord(k * n) };
    let preperiod: Vec<Sym> = (1..n0).map(out).collect();
    let word: Vec<Sym> = (n0..n0 + period).map(out).collect();
    SymbolicPoint::one_sided(&preperiod, &word, x.alphabet())
}

/// `f_n(z) = z^n` on the circle: angle multiplication mod 1.
pub fn circle_power_map(z: &CirclePoint, n: u32) -> CirclePoint {
    let angle = z.angle() * num_rational::BigRational::from_integer(n.into());
    CirclePoint::new(angle)
}

/// A compact system: domain, metric, and self-map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDescriptor {
    pub domain: DomainKind,
    pub metric: MetricDescriptor,
    pub map: MapKind,
}

impl SystemDescriptor {
    fn validate(self) -> Result<Self> {
        match (&self.domain, &self.map) {
            (DomainKind::OneSidedSequences { .. }, MapKind::ShiftOneSided)
            | (DomainKind::TwoSidedSequences { .. }, MapKind::ShiftTwoSided)
            | (DomainKind::Circle, MapKind::CirclePower { .. }) => {}
            (DomainKind::OneSidedSequences { alphabet: 2 }, MapKind::AdditiveCellular) => {}
            (DomainKind::OneSidedSequences { alphabet: 2 }, MapKind::Subsequence { k }) => {
                if *k < 2 {
                    return Err(Error::InvalidParameter("K must be at least 2".into()));
                }
            }
            (DomainKind::Finite { labels }, MapKind::Table { successors }) => {
                if successors.len() != labels.len()
                    || successors.iter().any(|&s| s >= labels.len())
                {
                    return Err(Error::InvalidParameter(
                        "transition table does not match the point list".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::DomainMismatch(
                    "map is not defined on this domain".into(),
                ))
            }
        }
        match (&self.domain, &self.metric) {
            (DomainKind::OneSidedSequences { .. }, MetricDescriptor::WeightedSup { side: Side::One, .. })
            | (DomainKind::TwoSidedSequences { .. }, MetricDescriptor::WeightedSup { side: Side::Two, .. })
            | (DomainKind::Circle, MetricDescriptor::CircleArc) => {}
            (DomainKind::Finite { labels }, MetricDescriptor::FiniteTable { table }) => {
                if table.len() != labels.len() {
                    return Err(Error::InvalidParameter(
                        "metric table does not match the point list".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::DomainMismatch(
                    "metric is not defined on this domain".into(),
                ))
            }
        }
        Ok(self)
    }

    /// The one-sided binary shift of weight `alpha` (`d = sup α^{-n}|x_n-y_n|`).
    pub fn one_sided_shift(alpha: ExactReal) -> Result<Self> {
        SystemDescriptor {
            domain: DomainKind::OneSidedSequences { alphabet: 2 },
            metric: MetricDescriptor::binary_shift(Side::One, alpha)?,
            map: MapKind::ShiftOneSided,
        }
        .validate()
    }

    pub fn two_sided_shift(alpha: ExactReal) -> Result<Self> {
        SystemDescriptor {
            domain: DomainKind::TwoSidedSequences { alphabet: 2 },
            metric: MetricDescriptor::binary_shift(Side::Two, alpha)?,
            map: MapKind::ShiftTwoSided,
        }
        .validate()
    }

    /// Shift over a finite metric alphabet (`D = sup α^{-n} d(x_n, y_n)`).
    pub fn product_shift(
        side: Side,
        alpha: ExactReal,
        alphabet_table: Vec<Vec<ExactReal>>,
    ) -> Result<Self> {
        let alphabet = alphabet_table.len() as u8;
        let metric =
            MetricDescriptor::weighted_sup(side, alpha, AlphabetMetric::Table(alphabet_table))?;
        SystemDescriptor {
            domain: match side {
                Side::One => DomainKind::OneSidedSequences { alphabet },
                Side::Two => DomainKind::TwoSidedSequences { alphabet },
            },
            metric,
            map: match side {
                Side::One => MapKind::ShiftOneSided,
                Side::Two => MapKind::ShiftTwoSided,
            },
        }
        .validate()
    }

    pub fn additive_cellular(alpha: ExactReal) -> Result<Self> {
        SystemDescriptor {
            domain: DomainKind::OneSidedSequences { alphabet: 2 },
            metric: MetricDescriptor::binary_shift(Side::One, alpha)?,
            map: MapKind::AdditiveCellular,
        }
        .validate()
    }

    /// The subsequence system of Example-type `f_K`, with the weight-2 metric.
    pub fn subsequence(k: u32) -> Result<Self> {
        SystemDescriptor {
            domain: DomainKind::OneSidedSequences { alphabet: 2 },
            metric: MetricDescriptor::binary_shift(Side::One, ExactReal::from_int(2))?,
            map: MapKind::Subsequence { k },
        }
        .validate()
    }

    pub fn circle_power(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("circle power needs n >= 2".into()));
        }
        SystemDescriptor {
            domain: DomainKind::Circle,
            metric: MetricDescriptor::CircleArc,
            map: MapKind::CirclePower { n },
        }
        .validate()
    }

    pub fn finite(
        labels: Vec<String>,
        table: Vec<Vec<ExactReal>>,
        successors: Vec<usize>,
    ) -> Result<Self> {
        SystemDescriptor {
            domain: DomainKind::Finite { labels },
            metric: MetricDescriptor::finite_table(table)?,
            map: MapKind::Table { successors },
        }
        .validate()
    }

    pub(crate) fn finite_with_metric(
        labels: Vec<String>,
        metric: MetricDescriptor,
        successors: Vec<usize>,
    ) -> Result<Self> {
        SystemDescriptor {
            domain: DomainKind::Finite { labels },
            metric,
            map: MapKind::Table { successors },
        }
        .validate()
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.domain, DomainKind::Finite { .. })
    }

    pub fn finite_size(&self) -> Result<usize> {
        match &self.domain {
            DomainKind::Finite { labels } => Ok(labels.len()),
            _ => Err(Error::DomainMismatch("finite-system operation".into())),
        }
    }

    pub fn finite_successors(&self) -> Result<&[usize]> {
        match &self.map {
            MapKind::Table { successors } => Ok(successors),
            _ => Err(Error::DomainMismatch("finite-system operation".into())),
        }
    }

    pub fn alphabet(&self) -> Option<u8> {
        match self.domain {
            DomainKind::OneSidedSequences { alphabet }
            | DomainKind::TwoSidedSequences { alphabet } => Some(alphabet),
            _ => None,
        }
    }

    /// Applies the system's map once.
    pub fn evaluate(&self, x: &Point) -> Result<Point> {
        match (&self.map, x) {
            (MapKind::ShiftOneSided, Point::Symbolic(p)) => {
                Ok(Point::Symbolic(shift_one_sided(p)?))
            }
            (MapKind::ShiftTwoSided, Point::Symbolic(p)) => {
                Ok(Point::Symbolic(shift_two_sided(p, false)?))
            }
            (MapKind::AdditiveCellular, Point::Symbolic(p)) => {
                Ok(Point::Symbolic(additive_cellular_map(p)?))
            }
            (MapKind::Subsequence { k }, Point::Symbolic(p)) => {
                Ok(Point::Symbolic(subsequence_map(p, *k)?))
            }
            (MapKind::Subsequence { k }, Point::Assembled(a)) => {
                if a.k() != *k {
                    return Err(Error::DomainMismatch(
                        "assembled point built for a different K".into(),
                    ));
                }
                Ok(Point::Assembled(a.advance()))
            }
            (MapKind::CirclePower { n }, Point::Circle(z)) => {
                Ok(Point::Circle(circle_power_map(z, *n)))
            }
            (MapKind::Table { successors }, Point::Finite(i)) => {
                if *i >= successors.len() {
                    return Err(Error::PointOutsideDomain {
                        index: *i,
                        size: successors.len(),
                    });
                }
                Ok(Point::Finite(successors[*i]))
            }
            _ => Err(Error::DomainMismatch("point does not belong to this system".into())),
        }
    }

    pub fn iterate(&self, x: &Point, steps: usize) -> Result<Point> {
        let mut y = x.clone();
        for _ in 0..steps {
            y = self.evaluate(&y)?;
        }
        Ok(y)
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<ExactReal> {
        self.metric.distance(x, y)
    }

    pub fn distance_le(&self, x: &Point, y: &Point, bound: &ExactReal) -> Result<bool> {
        self.metric.distance_le(x, y, bound)
    }

    /// All points of a finite system.
    pub fn finite_points(&self) -> Result<Vec<Point>> {
        Ok((0..self.finite_size()?).map(Point::Finite).collect())
    }

    /// A copy of this system with its metric snowflaked by `num/den`.
    pub fn snowflake(&self, num: u32, den: u32) -> Result<SystemDescriptor> {
        Ok(SystemDescriptor {
            domain: self.domain.clone(),
            metric: self.metric.snowflake(num, den)?,
            map: self.map.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(u: &[Sym], w: &[Sym]) -> SymbolicPoint {
        SymbolicPoint::one_sided(u, w, 2).unwrap()
    }

    #[test]
    fn shift_examples() {
        // 0111... -> 111...
        assert_eq!(shift_one_sided(&one(&[0], &[1])).unwrap(), one(&[], &[1]));
        // fixed point
        assert_eq!(shift_one_sided(&one(&[], &[0])).unwrap(), one(&[], &[0]));
        // 0101... -> 1010...
        let shifted = shift_one_sided(&one(&[], &[0, 1])).unwrap();
        assert_eq!(shifted, one(&[], &[1, 0]));
        for n in 1..=4 {
            assert_eq!(shifted.coord(n), one(&[], &[0, 1]).coord(n + 1));
        }
    }

    #[test]
    fn two_sided_shift_is_bijective() {
        let p = SymbolicPoint::two_sided(&[0], &[1], &[0], 0, 2).unwrap();
        let q = shift_two_sided(&p, false).unwrap();
        assert_eq!(q.coord(-1), 1);
        assert_eq!(q.coord(0), 0);
        assert_eq!(shift_two_sided(&q, true).unwrap(), p);
        let constant = SymbolicPoint::constant(1, Side::Two, 2).unwrap();
        assert_eq!(shift_two_sided(&constant, false).unwrap(), constant);
    }

    #[test]
    fn cellular_examples() {
        assert_eq!(additive_cellular_map(&one(&[], &[0])).unwrap(), one(&[], &[0]));
        assert_eq!(additive_cellular_map(&one(&[], &[1])).unwrap(), one(&[], &[0]));
        // 0101... -> 1111...
        assert_eq!(additive_cellular_map(&one(&[], &[0, 1])).unwrap(), one(&[], &[1]));
        // coordinate-wise check on a preperiodic input
        let x = one(&[1, 1, 0], &[1, 0, 0]);
        let y = additive_cellular_map(&x).unwrap();
        for n in 1..=12 {
            assert_eq!(y.coord(n), x.coord(n) ^ x.coord(n + 1));
        }
    }

    #[test]
    fn subsequence_examples() {
        assert_eq!(subsequence_map(&one(&[], &[1]), 2).unwrap(), one(&[], &[1]));
        // K=2 on 0101... -> 111...
        assert_eq!(subsequence_map(&one(&[], &[0, 1]), 2).unwrap(), one(&[], &[1]));
        // K=3 on (100)^inf -> 000...
        assert_eq!(subsequence_map(&one(&[], &[1, 0, 0]), 3).unwrap(), one(&[], &[0]));
        assert!(subsequence_map(&one(&[], &[1]), 1).is_err());
        // coordinate-wise check
        let x = one(&[1, 0, 1], &[0, 1, 1, 0]);
        let y = subsequence_map(&x, 2).unwrap();
        for n in 1..=16 {
            assert_eq!(y.coord(n), x.coord(2 * n));
        }
    }

    #[test]
    fn circle_power_examples() {
        let f = |p: i64, q: i64, n: u32| circle_power_map(&CirclePoint::from_ratio(p, q), n);
        assert_eq!(f(0, 1, 3), CirclePoint::from_ratio(0, 1));
        assert_eq!(f(1, 2, 2), CirclePoint::from_ratio(0, 1));
        assert_eq!(f(1, 7, 3), CirclePoint::from_ratio(3, 7));
    }

    #[test]
    fn evaluate_dispatch() {
        let three_cycle = SystemDescriptor::finite(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![ExactReal::zero(), ExactReal::one(), ExactReal::one()],
                vec![ExactReal::one(), ExactReal::zero(), ExactReal::one()],
                vec![ExactReal::one(), ExactReal::one(), ExactReal::zero()],
            ],
            vec![1, 2, 0],
        )
        .unwrap();
        assert_eq!(three_cycle.evaluate(&Point::Finite(0)).unwrap(), Point::Finite(1));
        assert!(three_cycle.evaluate(&Point::Finite(7)).is_err());

        let shift = SystemDescriptor::one_sided_shift(ExactReal::from_int(2)).unwrap();
        assert_eq!(
            shift.evaluate(&Point::Symbolic(one(&[0], &[1]))).unwrap(),
            Point::Symbolic(one(&[], &[1]))
        );

        let circle = SystemDescriptor::circle_power(3).unwrap();
        assert_eq!(
            circle.evaluate(&Point::Circle(CirclePoint::from_ratio(1, 7))).unwrap(),
            Point::Circle(CirclePoint::from_ratio(3, 7))
        );
    }

    #[test]
    fn lipschitz_bound_of_the_shift() {
        // d(sigma x, sigma y) <= alpha d(x, y) on a few explicit pairs.
        let sys = SystemDescriptor::one_sided_shift(ExactReal::from_int(2)).unwrap();
        let pairs = [
            (one(&[], &[0]), one(&[0, 0, 1], &[0])),
            (one(&[1, 0], &[1, 1, 0]), one(&[1], &[0, 1])),
            (one(&[], &[0, 1]), one(&[], &[1, 0])),
        ];
        let alpha = ExactReal::from_int(2);
        for (x, y) in pairs {
            let dxy = sys
                .distance(&Point::Symbolic(x.clone()), &Point::Symbolic(y.clone()))
                .unwrap();
            let dfxfy = sys
                .distance(
                    &Point::Symbolic(shift_one_sided(&x).unwrap()),
                    &Point::Symbolic(shift_one_sided(&y).unwrap()),
                )
                .unwrap();
            assert!(dfxfy <= &alpha * &dxy);
        }
    }
}
