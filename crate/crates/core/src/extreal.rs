//! Extended real values for `psi = -ln f`.
//!
//! `psi` takes values in `R ∪ {+inf}`; the infinity tag marks points
//! outside the support. A tagged value is used instead of a sentinel
//! float so that accidental arithmetic on "infinity" cannot leak into
//! subgradient or margin computations.

use std::cmp::Ordering;

/// A value in `R ∪ {+inf}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::PosInf)
    }

    /// Finite payload, or `None` at infinity.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Finite payload; panics at infinity. For call sites that already
    /// checked support membership.
    pub fn unwrap_finite(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => panic!("unwrap_finite on +inf"),
        }
    }

    /// `e^{-psi}`; zero at infinity.
    pub fn neg_exp(self) -> f64 {
        match self {
            ExtReal::Finite(v) => (-v).exp(),
            ExtReal::PosInf => 0.0,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }

    pub fn add_finite(self, rhs: f64) -> ExtReal {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a + rhs),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }

    pub fn scale(self, c: f64) -> ExtReal {
        debug_assert!(c > 0.0);
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(c * a),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::Finite(v)
    }
}
