//! Golden-section refinement of a bracketed extremum.

use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

impl ExtremumKind {
    fn sign(self) -> f64 {
        match self {
            ExtremumKind::Minimum => 1.0,
            ExtremumKind::Maximum => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExtremumKind::Minimum => "minimum",
            ExtremumKind::Maximum => "maximum",
        }
    }
}

/// Bracketing triplet `a < b < c` with `f(b)` more extreme than both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triplet {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub c: (f64, f64),
}

impl Triplet {
    pub fn width(&self) -> f64 {
        self.c.0 - self.a.0
    }

    pub fn is_bracket(&self, kind: ExtremumKind) -> bool {
        let s = kind.sign();
        self.a.0 < self.b.0 && self.b.0 < self.c.0 && s * self.b.1 <= s * self.a.1 && s * self.b.1 <= s * self.c.1
    }
}

const R: f64 = 0.381_966_011_250_105_2;

/// Shrinks `t` until its width is at most `rel_width * |b|`. Fails (with
/// the evaluation error, or `None` on an iteration cap) when `f` fails.
pub fn golden_refine<F, E>(
    mut f: F,
    mut t: Triplet,
    kind: ExtremumKind,
    rel_width: f64,
    max_iter: usize,
) -> Result<Triplet, Option<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let s = kind.sign();
    for _ in 0..max_iter {
        if t.width() <= rel_width * t.b.0.abs() {
            return Ok(t);
        }
        let (a, b, c) = (t.a.0, t.b.0, t.c.0);
        let x = if c - b > b - a { b + R * (c - b) } else { b - R * (b - a) };
        if x <= a || x >= c || x == b {
            return Ok(t);
        }
        let fx = f(x).map_err(Some)?;
        let better = s * fx < s * t.b.1;
        if x > b {
            if better {
                t.a = t.b;
                t.b = (x, fx);
            } else {
                t.c = (x, fx);
            }
        } else if better {
            t.c = t.b;
            t.b = (x, fx);
        } else {
            t.a = (x, fx);
        }
    }
    if t.width() <= rel_width * t.b.0.abs() {
        Ok(t)
    } else {
        Err(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trip(f: impl Fn(f64) -> f64, a: f64, b: f64, c: f64) -> Triplet {
        Triplet { a: (a, f(a)), b: (b, f(b)), c: (c, f(c)) }
    }

    #[test]
    fn finds_parabola_minimum() {
        let f = |x: f64| (x - 1.3).powi(2);
        let t = golden_refine(|x| Ok::<_, ()>(f(x)), trip(f, 0.0, 1.0, 3.0), ExtremumKind::Minimum, 1e-8, 500).unwrap();
        assert!(t.width() <= 1e-8 * 1.3 + 1e-15);
        assert!((t.b.0 - 1.3).abs() < 1e-8);
        assert!(t.is_bracket(ExtremumKind::Minimum));
    }

    #[test]
    fn finds_narrow_maximum() {
        let f = |x: f64| 1.0 / ((x - 2.0).powi(2) + 1e-8);
        let t = golden_refine(|x| Ok::<_, ()>(f(x)), trip(f, 1.0, 2.0 + 1e-5, 2.5), ExtremumKind::Maximum, 1e-9, 500)
            .unwrap();
        assert!((t.b.0 - 2.0).abs() < 1e-8, "{}", t.b.0);
    }

    #[test]
    fn propagates_failure() {
        let f = |x: f64| x * x;
        let r = golden_refine(
            |x| if x > 0.5 { Err("boom") } else { Ok(x * x) },
            trip(f, -1.0, 0.1, 2.0),
            ExtremumKind::Minimum,
            1e-9,
            500,
        );
        assert_eq!(r, Err(Some("boom")));
        let r = golden_refine(|x| Ok::<_, ()>(x * x), trip(f, -1.0, 0.1, 2.0), ExtremumKind::Minimum, 1e-12, 3);
        assert_eq!(r, Err(None));
    }
}
