//! Quintic smoothstep transition used by every cutoff in the crate.
//!
//! `descending(s)` equals 1 for `s <= 0`, 0 for `s >= 1`, and follows
//! `1 - (6s^5 - 15s^4 + 10s^3)` in between, which is monotone and C^2.

/// Value and first two derivatives of a scalar profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet {
        value: 0.0,
        d1: 0.0,
        d2: 0.0,
    };
    pub const ONE: Jet = Jet {
        value: 1.0,
        d1: 0.0,
        d2: 0.0,
    };
}

pub fn descending(s: f64) -> Jet {
    if s <= 0.0 {
        return Jet::ONE;
    }
    if s >= 1.0 {
        return Jet::ZERO;
    }
    let s2 = s * s;
    let s3 = s2 * s;
    let up = s3 * (10.0 - 15.0 * s + 6.0 * s2);
    let d1 = 30.0 * s2 * (1.0 - s) * (1.0 - s);
    let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    Jet {
        value: 1.0 - up,
        d1: -d1,
        d2: -d2,
    }
}

/// Cutoff equal to 1 below `lo`, 0 above `hi`, with derivatives in `x`.
pub fn window(x: f64, lo: f64, hi: f64) -> Jet {
    let width = hi - lo;
    let j = descending((x - lo) / width);
    Jet {
        value: j.value,
        d1: j.d1 / width,
        d2: j.d2 / (width * width),
    }
}
