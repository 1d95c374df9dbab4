//! Pebble amounts.
//!
//! Game configurations use exact rationals. State pebble values are
//! logarithms base `k` of rationals built from set sizes, which are not
//! rational in general, so they are stored by their argument: `LogAmount(q)`
//! stands for `log_k q`. Addition is multiplication of arguments and order is
//! the order of arguments.

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Pow, Zero};

pub type Rational = Ratio<i64>;

pub trait Amount: Clone + Ord + fmt::Debug + fmt::Display + Send + Sync {
    fn zero() -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }
}

impl Amount for Rational {
    fn zero() -> Self {
        <Rational as Zero>::zero()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
}

/// `log_k q` for positive rational `q`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogAmount(pub BigRational);

impl LogAmount {
    /// `log_k(num / den)`.
    pub fn ratio(num: u64, den: u64) -> Self {
        assert!(num > 0 && den > 0, "logarithm of a non-positive number");
        LogAmount(BigRational::new(num.into(), den.into()))
    }

    /// `log_k k = 1`.
    pub fn unit(k: u32) -> Self {
        Self::ratio(k as u64, 1)
    }

    pub fn argument(&self) -> &BigRational {
        &self.0
    }

    /// Whether `log_k q >= num/den`, i.e. `q^den >= k^num`.
    pub fn at_least(&self, k: u32, num: i64, den: i64) -> bool {
        compare_log(&self.0, k, num, den) != std::cmp::Ordering::Less
    }

    pub fn cmp_rational(&self, k: u32, r: Rational) -> std::cmp::Ordering {
        compare_log(&self.0, k, *r.numer(), *r.denom())
    }

    /// Exact value if it is rational with denominator at most `max_den`.
    pub fn as_rational(&self, k: u32, max_den: i64) -> Option<Rational> {
        for den in 1..=max_den {
            let powered = Pow::pow(&self.0, den as u32);
            if !powered.denom().is_one() && !powered.numer().is_one() {
                continue;
            }
            for num in -(64 * den)..=(64 * den) {
                if compare_log(&self.0, k, num, den) == std::cmp::Ordering::Equal {
                    return Some(Rational::new(num, den));
                }
            }
        }
        None
    }

    /// Floating approximation for reports only.
    pub fn approx(&self, k: u32) -> f64 {
        let n = bigint_to_f64(self.0.numer());
        let d = bigint_to_f64(self.0.denom());
        (n.ln() - d.ln()) / (k as f64).ln()
    }
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    x.to_string().parse().unwrap_or(f64::INFINITY)
}

/// Orders `log_k q` against `num/den` with `den > 0`.
pub fn compare_log(q: &BigRational, k: u32, num: i64, den: i64) -> std::cmp::Ordering {
    assert!(den > 0);
    let lhs: BigRational = Pow::pow(q, den as u32);
    let kk = BigRational::from_integer(BigInt::from(k));
    let rhs: BigRational = if num >= 0 {
        Pow::pow(&kk, num as u32)
    } else {
        Pow::pow(&kk.recip(), (-num) as u32)
    };
    lhs.cmp(&rhs)
}

impl Amount for LogAmount {
    fn zero() -> Self {
        LogAmount(BigRational::one())
    }
    fn plus(&self, other: &Self) -> Self {
        LogAmount(&self.0 * &other.0)
    }
    fn minus(&self, other: &Self) -> Self {
        LogAmount(&self.0 / &other.0)
    }
}

impl fmt::Debug for LogAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "log({})", self.0)
    }
}

impl fmt::Display for LogAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_one() {
            write!(f, "0")
        } else {
            write!(f, "log({})", self.0)
        }
    }
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let d: i64 = d.trim().parse().ok()?;
            let n: i64 = n.trim().parse().ok()?;
            (d != 0).then(|| Rational::new(n, d))
        }
        None => text.parse().ok().map(Rational::from_integer),
    }
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
