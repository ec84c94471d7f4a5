//! Quaternion arithmetic, single values and component-major vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Squared norm below which a quaternion cannot be normalized.
pub const DEFAULT_NORM_EPS: f64 = 1e-12;

/// `a + b·i + c·j + d·k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Hamilton product `self ⊗ rhs`.
    #[inline]
    pub fn hamilton(self, rhs: Quaternion) -> Quaternion {
        let (a1, b1, c1, d1) = (self.a, self.b, self.c, self.d);
        let (a2, b2, c2, d2) = (rhs.a, rhs.b, rhs.c, rhs.d);
        Quaternion {
            a: a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            b: a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            c: a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            d: a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        }
    }

    #[inline]
    pub fn conjugate(self) -> Quaternion {
        Quaternion::new(self.a, -self.b, -self.c, -self.d)
    }

    /// Four-term dot product of the components.
    #[inline]
    pub fn inner(self, rhs: Quaternion) -> f64 {
        self.a * rhs.a + self.b * rhs.b + self.c * rhs.c + self.d * rhs.d
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.inner(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    #[inline]
    pub fn scale(self, s: f64) -> Quaternion {
        Quaternion::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn normalize(self) -> Result<Quaternion> {
        self.normalize_eps(DEFAULT_NORM_EPS)
    }

    /// Divides by the Euclidean norm; fails when the squared norm is below `eps`.
    #[inline]
    pub fn normalize_eps(self, eps: f64) -> Result<Quaternion> {
        let sq = self.norm_squared();
        if sq.is_nan() || sq < eps {
            return Err(Error::ZeroNorm {
                squared_norm: sq,
                epsilon: eps,
            });
        }
        let n = libm::sqrt(sq);
        Ok(Quaternion::new(self.a / n, self.b / n, self.c / n, self.d / n))
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.a + rhs.a, self.b + rhs.b, self.c + rhs.c, self.d + rhs.d)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.a - rhs.a, self.b - rhs.b, self.c - rhs.c, self.d - rhs.d)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.a, -self.b, -self.c, -self.d)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.hamilton(rhs)
    }
}

pub fn hamilton(q1: Quaternion, q2: Quaternion) -> Quaternion {
    q1.hamilton(q2)
}

pub fn conjugate(q: Quaternion) -> Quaternion {
    q.conjugate()
}

pub fn normalize(q: Quaternion) -> Result<Quaternion> {
    q.normalize()
}

pub fn inner(q1: Quaternion, q2: Quaternion) -> f64 {
    q1.inner(q2)
}

pub fn add(q1: Quaternion, q2: Quaternion) -> Quaternion {
    q1 + q2
}

pub fn sub(q1: Quaternion, q2: Quaternion) -> Quaternion {
    q1 - q2
}

/// Borrowed view of `k` quaternions stored as four parallel component arrays.
#[derive(Debug, Clone, Copy)]
pub struct QuatSlice<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub c: &'a [f64],
    pub d: &'a [f64],
}

impl<'a> QuatSlice<'a> {
    #[inline]
    pub fn len(&self) -> usize {
        self.a.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Quaternion {
        Quaternion::new(self.a[i], self.b[i], self.c[i], self.d[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = Quaternion> + 'a {
        let s = *self;
        (0..s.len()).map(move |i| s.get(i))
    }

    pub fn to_vector(&self) -> QuaternionVector {
        QuaternionVector {
            a: self.a.to_vec(),
            b: self.b.to_vec(),
            c: self.c.to_vec(),
            d: self.d.to_vec(),
        }
    }
}

/// `k ≥ 1` quaternions in component-of-quaternion layout.
#[derive(Debug, Clone, PartialEq)]
pub struct QuaternionVector {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl QuaternionVector {
    /// `len` zero quaternions.
    pub fn zeros(len: usize) -> Self {
        Self {
            a: vec![0.0; len],
            b: vec![0.0; len],
            c: vec![0.0; len],
            d: vec![0.0; len],
        }
    }

    /// `len` copies of the multiplicative identity.
    pub fn identity(len: usize) -> Self {
        Self {
            a: vec![1.0; len],
            ..Self::zeros(len)
        }
    }

    pub fn from_components(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let k = a.len();
        if k == 0 {
            return Err(Error::LengthMismatch {
                expected: 1,
                found: 0,
            });
        }
        for other in [&b, &c, &d] {
            if other.len() != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    found: other.len(),
                });
            }
        }
        Ok(Self { a, b, c, d })
    }

    pub fn from_quaternions(qs: &[Quaternion]) -> Self {
        let mut v = Self::zeros(qs.len());
        for (i, q) in qs.iter().enumerate() {
            v.set(i, *q);
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.a.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Quaternion {
        Quaternion::new(self.a[i], self.b[i], self.c[i], self.d[i])
    }

    #[inline]
    pub fn set(&mut self, i: usize, q: Quaternion) {
        self.a[i] = q.a;
        self.b[i] = q.b;
        self.c[i] = q.c;
        self.d[i] = q.d;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, q: Quaternion) {
        self.a[i] += q.a;
        self.b[i] += q.b;
        self.c[i] += q.c;
        self.d[i] += q.d;
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for comp in [&mut self.a, &mut self.b, &mut self.c, &mut self.d] {
            for x in comp.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn view(&self) -> QuatSlice<'_> {
        QuatSlice {
            a: &self.a,
            b: &self.b,
            c: &self.c,
            d: &self.d,
        }
    }

    pub fn components(&self) -> [&[f64]; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = Quaternion> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Adds `other` componentwise into `self`.
    pub fn accumulate(&mut self, other: &QuaternionVector) -> Result<()> {
        check_len(self.len(), other.len())?;
        for (dst, src) in [
            (&mut self.a, &other.a),
            (&mut self.b, &other.b),
            (&mut self.c, &other.c),
            (&mut self.d, &other.d),
        ] {
            for (x, y) in dst.iter_mut().zip(src) {
                *x += *y;
            }
        }
        Ok(())
    }

    pub fn hamilton(&self, other: &QuaternionVector) -> Result<QuaternionVector> {
        hamilton_vec(self.view(), other.view())
    }

    pub fn normalized(&self) -> Result<QuaternionVector> {
        normalize_vec(self.view())
    }

    pub fn inner(&self, other: &QuaternionVector) -> Result<f64> {
        inner_vec(self.view(), other.view())
    }
}

#[inline]
fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

/// Elementwise Hamilton product.
pub fn hamilton_vec(u: QuatSlice<'_>, v: QuatSlice<'_>) -> Result<QuaternionVector> {
    check_len(u.len(), v.len())?;
    let mut out = QuaternionVector::zeros(u.len());
    for i in 0..u.len() {
        out.set(i, u.get(i).hamilton(v.get(i)));
    }
    Ok(out)
}

/// Elementwise normalization; any zero-norm element fails the whole vector.
pub fn normalize_vec(v: QuatSlice<'_>) -> Result<QuaternionVector> {
    let mut out = QuaternionVector::zeros(v.len());
    for i in 0..v.len() {
        out.set(i, v.get(i).normalize()?);
    }
    Ok(out)
}

/// Sum of the elementwise quaternion inner products.
pub fn inner_vec(u: QuatSlice<'_>, v: QuatSlice<'_>) -> Result<f64> {
    check_len(u.len(), v.len())?;
    let mut acc = 0.0;
    for i in 0..u.len() {
        acc += u.a[i] * v.a[i] + u.b[i] * v.b[i] + u.c[i] * v.c[i] + u.d[i] * v.d[i];
    }
    Ok(acc)
}
