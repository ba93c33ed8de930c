//! Exactly-representable points.
//!
//! Sequence-space points are stored in eventually-periodic form and reduced to
//! a canonical representative on construction, so structural equality is point
//! equality. One-sided points are `u·w^∞` with `w` primitive and `u` minimal;
//! two-sided points are `∞l · c · r^∞` with both periods primitive, the center
//! absorbed into the periodic rays as far as possible, and fully periodic
//! points pinned to anchor 0.

use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::ExactReal;

pub type Sym = u8;

/// Largest alphabet we serialize as digit strings.
pub const MAX_ALPHABET: u8 = 10;

fn primitive(word: &[Sym]) -> Vec<Sym> {
    let n = word.len();
    for d in 1..=n {
        if n % d == 0 && (d..n).all(|i| word[i] == word[i - d]) {
            return word[..d].to_vec();
        }
    }
    word.to_vec()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SymbolicRepr {
    OneSided {
        preperiod: Vec<Sym>,
        period: Vec<Sym>,
    },
    TwoSided {
        left: Vec<Sym>,
        center: Vec<Sym>,
        right: Vec<Sym>,
        anchor: i64,
    },
}

/// A point of a one- or two-sided sequence space, eventually periodic in each
/// direction, held in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolicPoint {
    alphabet: u8,
    repr: SymbolicRepr,
}

impl SymbolicPoint {
    pub fn one_sided(preperiod: &[Sym], period: &[Sym], alphabet: u8) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidParameter("empty period word".into()));
        }
        if alphabet < 1 || alphabet > MAX_ALPHABET {
            return Err(Error::InvalidParameter(format!(
                "alphabet size {alphabet} outside 1..={MAX_ALPHABET}"
            )));
        }
        if preperiod.iter().chain(period).any(|&s| s >= alphabet) {
            return Err(Error::InvalidParameter("symbol outside alphabet".into()));
        }
        let mut u = preperiod.to_vec();
        let mut w = primitive(period);
        while let Some(&last) = u.last() {
            if last == *w.last().unwrap() {
                u.pop();
                w.rotate_right(1);
            } else {
                break;
            }
        }
        Ok(SymbolicPoint {
            alphabet,
            repr: SymbolicRepr::OneSided { preperiod: u, period: w },
        })
    }

    pub fn two_sided(
        left: &[Sym],
        center: &[Sym],
        right: &[Sym],
        anchor: i64,
        alphabet: u8,
    ) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::InvalidParameter("empty period word".into()));
        }
        if alphabet < 1 || alphabet > MAX_ALPHABET {
            return Err(Error::InvalidParameter(format!(
                "alphabet size {alphabet} outside 1..={MAX_ALPHABET}"
            )));
        }
        if left
            .iter()
            .chain(center)
            .chain(right)
            .any(|&s| s >= alphabet)
        {
            return Err(Error::InvalidParameter("symbol outside alphabet".into()));
        }
        let mut l = primitive(left);
        let mut r = primitive(right);
        let mut c = center.to_vec();
        let mut anchor = anchor;
        // Absorb center symbols that continue the left period.
        while !c.is_empty() && c[0] == l[0] {
            c.remove(0);
            l.rotate_left(1);
            anchor += 1;
        }
        // Absorb center symbols that the right period would place anyway.
        while !c.is_empty() && *c.last().unwrap() == *r.last().unwrap() {
            c.pop();
            r.rotate_right(1);
        }
        if c.is_empty() {
            if l == r {
                // Fully periodic: pin the anchor to 0.
                let p = l.len() as i64;
                let w: Vec<Sym> = (0..l.len())
                    .map(|j| l[((j as i64 - anchor).rem_euclid(p)) as usize])
                    .collect();
                l = w.clone();
                r = w;
                anchor = 0;
            } else {
                // Push the boundary right while both rays agree there; this
                // terminates for distinct primitive words (Fine and Wilf).
                let mut guard = l.len() + r.len() + 1;
                while l[0] == r[0] && guard > 0 {
                    l.rotate_left(1);
                    r.rotate_left(1);
                    anchor += 1;
                    guard -= 1;
                }
                assert!(guard > 0, "distinct primitive rays must disagree");
            }
        }
        Ok(SymbolicPoint {
            alphabet,
            repr: SymbolicRepr::TwoSided { left: l, center: c, right: r, anchor },
        })
    }

    pub fn constant(sym: Sym, side: Side, alphabet: u8) -> Result<Self> {
        match side {
            Side::One => Self::one_sided(&[], &[sym], alphabet),
            Side::Two => Self::two_sided(&[sym], &[], &[sym], 0, alphabet),
        }
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    pub fn side(&self) -> Side {
        match self.repr {
            SymbolicRepr::OneSided { .. } => Side::One,
            SymbolicRepr::TwoSided { .. } => Side::Two,
        }
    }

    pub fn repr(&self) -> &SymbolicRepr {
        &self.repr
    }

    /// Coordinate access; one-sided points are indexed from 1, two-sided
    /// points over all of the integers.
    pub fn coord(&self, n: i64) -> Sym {
        match &self.repr {
            SymbolicRepr::OneSided { preperiod, period } => {
                assert!(n >= 1, "one-sided coordinates start at 1");
                let i = (n - 1) as usize;
                if i < preperiod.len() {
                    preperiod[i]
                } else {
                    period[(i - preperiod.len()) % period.len()]
                }
            }
            SymbolicRepr::TwoSided { left, center, right, anchor } => {
                if n < *anchor {
                    let idx = (n - anchor).rem_euclid(left.len() as i64);
                    left[idx as usize]
                } else if n < anchor + center.len() as i64 {
                    center[(n - anchor) as usize]
                } else {
                    let idx = (n - anchor - center.len() as i64)
                        .rem_euclid(right.len() as i64);
                    right[idx as usize]
                }
            }
        }
    }

    /// For one-sided points: index from which the sequence is periodic
    /// (1-based) and the primitive period length.
    pub fn one_sided_shape(&self) -> (i64, i64) {
        match &self.repr {
            SymbolicRepr::OneSided { preperiod, period } => {
                (preperiod.len() as i64 + 1, period.len() as i64)
            }
            _ => panic!("one_sided_shape on a two-sided point"),
        }
    }

    /// For two-sided points: (start of the right-periodic ray, right period,
    /// end of the left-periodic ray, left period).
    pub fn two_sided_shape(&self) -> (i64, i64, i64, i64) {
        match &self.repr {
            SymbolicRepr::TwoSided { left, center, right, anchor } => (
                anchor + center.len() as i64,
                right.len() as i64,
                anchor - 1,
                left.len() as i64,
            ),
            _ => panic!("two_sided_shape on a one-sided point"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    One,
    Two,
}

/// A point of the circle of circumference 1, stored as a reduced rational
/// angle in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CirclePoint {
    angle: BigRational,
}

impl CirclePoint {
    pub fn new(angle: BigRational) -> Self {
        let one = BigRational::from_integer(1.into());
        let mut a = angle.clone() - angle.floor();
        if a >= one {
            a -= one;
        }
        if a.is_negative() {
            a += BigRational::from_integer(1.into());
        }
        CirclePoint { angle: a }
    }

    pub fn from_ratio(p: i64, q: i64) -> Self {
        Self::new(BigRational::new(p.into(), q.into()))
    }

    pub fn angle(&self) -> &BigRational {
        &self.angle
    }

    /// Arc distance `min(|θ−φ|, 1−|θ−φ|)`.
    pub fn arc_distance(&self, other: &CirclePoint) -> ExactReal {
        let diff = (&self.angle - &other.angle).abs();
        let one = BigRational::from_integer(1.into());
        let wrap = &one - &diff;
        let d = if diff <= wrap { diff } else { wrap };
        ExactReal::from_big(d).expect("arc distance is nonnegative")
    }
}

/// A point assembled from the coordinates of a tail-periodic orbit of the
/// subsequence map: coordinate `n = a·K^β` (with `K ∤ a`) reads coordinate `a`
/// of orbit element `β`. Such points are generally not eventually periodic,
/// so they get their own representation; distances against them are decided
/// through bounded coordinate scans rather than a closed-form supremum.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AssembledPoint {
    k: u32,
    prefix: Vec<SymbolicPoint>,
    block: Vec<SymbolicPoint>,
}

impl AssembledPoint {
    pub fn new(k: u32, prefix: Vec<SymbolicPoint>, block: Vec<SymbolicPoint>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter("K must be at least 2".into()));
        }
        if block.is_empty() {
            return Err(Error::InvalidParameter("empty orbit block".into()));
        }
        for p in prefix.iter().chain(&block) {
            if p.side() != Side::One {
                return Err(Error::DomainMismatch(
                    "assembled points require one-sided orbit elements".into(),
                ));
            }
        }
        Ok(AssembledPoint { k, prefix, block })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn alphabet(&self) -> u8 {
        self.block[0].alphabet()
    }

    fn orbit_element(&self, beta: usize) -> &SymbolicPoint {
        if beta < self.prefix.len() {
            &self.prefix[beta]
        } else {
            &self.block[(beta - self.prefix.len()) % self.block.len()]
        }
    }

    pub fn coord(&self, n: i64) -> Sym {
        assert!(n >= 1);
        let k = self.k as i64;
        let mut a = n;
        let mut beta = 0usize;
        while a % k == 0 {
            a /= k;
            beta += 1;
        }
        self.orbit_element(beta).coord(a)
    }

    /// One application of the subsequence map: the assembled point of the
    /// orbit shifted by one.
    pub fn advance(&self) -> AssembledPoint {
        if self.prefix.is_empty() {
            let mut block = self.block.clone();
            block.rotate_left(1);
            AssembledPoint { k: self.k, prefix: Vec::new(), block }
        } else {
            AssembledPoint {
                k: self.k,
                prefix: self.prefix[1..].to_vec(),
                block: self.block.clone(),
            }
        }
    }
}

/// Any point of any supported domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Point {
    Symbolic(SymbolicPoint),
    Circle(CirclePoint),
    Finite(usize),
    Assembled(AssembledPoint),
}

impl Point {
    pub fn as_symbolic(&self) -> Result<&SymbolicPoint> {
        match self {
            Point::Symbolic(p) => Ok(p),
            _ => Err(Error::DomainMismatch("expected a symbolic point".into())),
        }
    }

    pub fn as_circle(&self) -> Result<&CirclePoint> {
        match self {
            Point::Circle(p) => Ok(p),
            _ => Err(Error::DomainMismatch("expected a circle point".into())),
        }
    }

    pub fn as_finite(&self) -> Result<usize> {
        match self {
            Point::Finite(i) => Ok(*i),
            _ => Err(Error::DomainMismatch("expected a finite-system point".into())),
        }
    }
}

fn word_to_string(word: &[Sym]) -> String {
    word.iter().map(|s| char::from(b'0' + s)).collect()
}

fn word_from_string(s: &str) -> Result<Vec<Sym>> {
    s.chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as Sym)
                .ok_or_else(|| Error::Serialization(format!("bad symbol {c:?}")))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointJson {
    OneSided {
        side: Side,
        preperiod: String,
        period: String,
        #[serde(default = "default_alphabet")]
        alphabet: u8,
    },
    TwoSided {
        side: Side,
        left: String,
        center: String,
        right: String,
        anchor: i64,
        #[serde(default = "default_alphabet")]
        alphabet: u8,
    },
    Circle {
        angle: ExactReal,
    },
    Finite {
        index: usize,
    },
    Assembled {
        rule: String,
        k: u32,
        prefix: Vec<Point>,
        block: Vec<Point>,
    },
}

fn default_alphabet() -> u8 {
    2
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let json = match self {
            Point::Symbolic(p) => match p.repr() {
                SymbolicRepr::OneSided { preperiod, period } => PointJson::OneSided {
                    side: Side::One,
                    preperiod: word_to_string(preperiod),
                    period: word_to_string(period),
                    alphabet: p.alphabet(),
                },
                SymbolicRepr::TwoSided { left, center, right, anchor } => PointJson::TwoSided {
                    side: Side::Two,
                    left: word_to_string(left),
                    center: word_to_string(center),
                    right: word_to_string(right),
                    anchor: *anchor,
                    alphabet: p.alphabet(),
                },
            },
            Point::Circle(p) => PointJson::Circle {
                angle: ExactReal::from_big(p.angle().clone())
                    .map_err(|e| serde::ser::Error::custom(e.to_string()))?,
            },
            Point::Finite(i) => PointJson::Finite { index: *i },
            Point::Assembled(a) => PointJson::Assembled {
                rule: "k-adic".into(),
                k: a.k,
                prefix: a.prefix.iter().cloned().map(Point::Symbolic).collect(),
                block: a.block.iter().cloned().map(Point::Symbolic).collect(),
            },
        };
        json.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let json = PointJson::deserialize(d)?;
        let err = |e: Error| DeError::custom(e.to_string());
        Ok(match json {
            PointJson::OneSided { preperiod, period, alphabet, .. } => Point::Symbolic(
                SymbolicPoint::one_sided(
                    &word_from_string(&preperiod).map_err(err)?,
                    &word_from_string(&period).map_err(err)?,
                    alphabet,
                )
                .map_err(err)?,
            ),
            PointJson::TwoSided { left, center, right, anchor, alphabet, .. } => Point::Symbolic(
                SymbolicPoint::two_sided(
                    &word_from_string(&left).map_err(err)?,
                    &word_from_string(&center).map_err(err)?,
                    &word_from_string(&right).map_err(err)?,
                    anchor,
                    alphabet,
                )
                .map_err(err)?,
            ),
            PointJson::Circle { angle } => Point::Circle(CirclePoint::new(
                angle.expect_ratio().map_err(err)?.clone(),
            )),
            PointJson::Finite { index } => Point::Finite(index),
            PointJson::Assembled { k, prefix, block, .. } => {
                let unwrap = |points: Vec<Point>| -> std::result::Result<Vec<SymbolicPoint>, D::Error> {
                    points
                        .into_iter()
                        .map(|p| match p {
                            Point::Symbolic(s) => Ok(s),
                            _ => Err(DeError::custom("assembled orbit element must be symbolic")),
                        })
                        .collect()
                };
                Point::Assembled(
                    AssembledPoint::new(k, unwrap(prefix)?, unwrap(block)?).map_err(err)?,
                )
            }
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
    fn one_sided_canonical_form() {
        // 0·(1)^∞ written redundantly
        let a = one(&[0, 1, 1], &[1, 1]);
        let b = one(&[0], &[1]);
        assert_eq!(a, b);
        // constant sequence
        let c = one(&[0, 0, 0], &[0]);
        assert_eq!(c, one(&[], &[0]));
        // 0101... with two presentations
        let d = one(&[0, 1], &[0, 1]);
        let e = one(&[], &[0, 1]);
        assert_eq!(d, e);
        assert_eq!(d.coord(1), 0);
        assert_eq!(d.coord(4), 1);
    }

    #[test]
    fn two_sided_canonical_form() {
        // all zeros, three presentations
        let z1 = SymbolicPoint::two_sided(&[0], &[], &[0], 5, 2).unwrap();
        let z2 = SymbolicPoint::two_sided(&[0, 0], &[0, 0], &[0], -3, 2).unwrap();
        assert_eq!(z1, z2);
        // single 1 at index 0 among zeros
        let p = SymbolicPoint::two_sided(&[0], &[1], &[0], 0, 2).unwrap();
        assert_eq!(p.coord(0), 1);
        assert_eq!(p.coord(-1), 0);
        assert_eq!(p.coord(1), 0);
        let q = SymbolicPoint::two_sided(&[0], &[0, 1, 0], &[0], -1, 2).unwrap();
        assert_eq!(p, q);
        // fully periodic ...0101... anchored consistently
        let r1 = SymbolicPoint::two_sided(&[0, 1], &[], &[0, 1], 0, 2).unwrap();
        let r2 = SymbolicPoint::two_sided(&[1, 0], &[], &[1, 0], 1, 2).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.coord(0), 0);
        assert_eq!(r1.coord(1), 1);
    }

    #[test]
    fn two_sided_coordinates_match_presentation() {
        // ∞(10) · 110 · (01)^∞ anchored at -1
        let p = SymbolicPoint::two_sided(&[1, 0], &[1, 1, 0], &[0, 1], -1, 2).unwrap();
        let expect = |n: i64| -> Sym {
            if n < -1 {
                // ... 1 0 1 0 ending just before -1
                if (-1 - n) % 2 == 1 { 0 } else { 1 }
            } else if n <= 1 {
                [1, 1, 0][(n + 1) as usize]
            } else if (n - 2) % 2 == 0 {
                0
            } else {
                1
            }
        };
        for n in -9..9 {
            assert_eq!(p.coord(n), expect(n), "coordinate {n}");
        }
    }

    #[test]
    fn circle_reduction() {
        let a = CirclePoint::from_ratio(9, 7);
        assert_eq!(a, CirclePoint::from_ratio(2, 7));
        let b = CirclePoint::from_ratio(-1, 4);
        assert_eq!(b, CirclePoint::from_ratio(3, 4));
        assert_eq!(
            CirclePoint::from_ratio(1, 8).arc_distance(&CirclePoint::from_ratio(7, 8)),
            ExactReal::ratio(1, 4)
        );
    }

    #[test]
    fn assembled_coordinates_follow_factorization() {
        // K = 2, constant orbit at y = (0,0,1)^∞: coordinate n reads y at the
        // odd part of n.
        let y = one(&[], &[0, 0, 1]);
        let x = AssembledPoint::new(2, vec![], vec![y.clone()]).unwrap();
        for n in 1..200i64 {
            let mut a = n;
            while a % 2 == 0 {
                a /= 2;
            }
            assert_eq!(x.coord(n), y.coord(a));
        }
        // advance rotates the block
        let z = one(&[], &[1]);
        let x2 = AssembledPoint::new(2, vec![y.clone()], vec![z.clone()]).unwrap();
        assert_eq!(x2.advance(), AssembledPoint::new(2, vec![], vec![z]).unwrap());
    }

    #[test]
    fn point_serialization_round_trip() {
        let points = vec![
            Point::Symbolic(one(&[0], &[1, 0])),
            Point::Symbolic(SymbolicPoint::two_sided(&[1, 0], &[1], &[0, 1], -2, 2).unwrap()),
            Point::Circle(CirclePoint::from_ratio(3, 7)),
            Point::Finite(4),
        ];
        for p in points {
            let s = serde_json::to_string(&p).unwrap();
            let back: Point = serde_json::from_str(&s).unwrap();
            assert_eq!(p, back, "round trip through {s}");
        }
    }
}
