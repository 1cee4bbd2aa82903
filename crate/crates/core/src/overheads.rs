//! Computation and communication overheads relative to an uncoded single server.
//!
//! With `K = p0 p1 p2` and upload counts `(R0, R1)`:
//!
//! ```text
//! delta    = R_th / K - 1                 extra block multiplications
//! delta_d  = R_th / (p0 p2) - 1           extra download volume
//!          = (p1 - 1) + p1 delta
//! delta_u0 = R0 / (p0 p1) - 1             extra upload volume for M0
//! delta_u1 = R1 / (p1 p2) - 1             extra upload volume for M1
//! ```
//!
//! All values are exact rationals; floats only appear at presentation.

use num_rational::Ratio;
use serde::Serialize;

use crate::blockmat::PartitionScheme;
use crate::schemes::{Scheme, SchemeKind};

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverheadReport {
    pub scheme: SchemeKind,
    pub partition: PartitionScheme,
    pub recovery_threshold: usize,
    pub uploads_left: usize,
    pub uploads_right: usize,
    #[serde(serialize_with = "as_f64")]
    pub delta: Rational,
    #[serde(serialize_with = "as_f64")]
    pub delta_u0: Rational,
    #[serde(serialize_with = "as_f64")]
    pub delta_u1: Rational,
    #[serde(serialize_with = "as_f64")]
    pub delta_d: Rational,
}

fn as_f64<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(to_f64(*r))
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn ratio(n: usize, d: usize) -> Rational {
    Rational::new(n as i64, d as i64)
}

pub fn compute_overheads(kind: SchemeKind, p: PartitionScheme) -> OverheadReport {
    let scheme = Scheme::new(kind, p);
    let r_th = scheme.recovery_threshold();
    let (r0, r1) = scheme.upload_counts();
    let one = Rational::from_integer(1);
    OverheadReport {
        scheme: kind,
        partition: p,
        recovery_threshold: r_th,
        uploads_left: r0,
        uploads_right: r1,
        delta: ratio(r_th, p.level()) - one,
        delta_u0: ratio(r0, p.p0 * p.p1) - one,
        delta_u1: ratio(r1, p.p1 * p.p2) - one,
        delta_d: ratio(r_th, p.p0 * p.p2) - one,
    }
}

impl OverheadReport {
    pub fn level(&self) -> usize {
        self.partition.level()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn p(p0: usize, p1: usize, p2: usize) -> PartitionScheme {
        PartitionScheme::new(p0, p1, p2).unwrap()
    }

    #[test]
    fn epc_two_two_two() {
        let rep = compute_overheads(SchemeKind::Epc, p(2, 2, 2));
        assert_eq!(rep.recovery_threshold, 9);
        assert_eq!(rep.delta, r(1, 8));
        assert_eq!(rep.delta_u0, r(5, 4));
        assert_eq!(rep.delta_u1, r(5, 4));
        assert_eq!(rep.delta_d, r(5, 4));
        // delta_u0 = p2 - 1 + p2 delta
        assert_eq!(rep.delta_u0, r(1, 1) + r(2, 1) * rep.delta);
    }

    #[test]
    fn tri_two_two_two() {
        let rep = compute_overheads(SchemeKind::Tri, p(2, 2, 2));
        assert_eq!(rep.recovery_threshold, 12);
        assert_eq!(rep.delta, r(1, 2));
        assert_eq!(rep.delta_u0, r(1, 2));
        assert_eq!(rep.delta_u1, r(1, 2));
        assert_eq!(rep.delta_d, r(2, 1));
    }

    #[test]
    fn bi0_two_two_two() {
        let rep = compute_overheads(SchemeKind::Bi0, p(2, 2, 2));
        assert_eq!(rep.recovery_threshold, 10);
        assert_eq!((rep.uploads_left, rep.uploads_right), (10, 5));
        assert_eq!(rep.delta, r(1, 4));
        assert_eq!(rep.delta_u0, r(3, 2));
        assert_eq!(rep.delta_u1, r(1, 4));
        assert_eq!(rep.delta_d, r(3, 2));
    }

    #[test]
    fn p1_of_one_has_no_computation_overhead() {
        for kind in SchemeKind::ALL {
            for (p0, p2) in [(1, 1), (3, 2), (5, 7)] {
                let rep = compute_overheads(kind, p(p0, 1, p2));
                assert_eq!(rep.delta, r(0, 1), "{kind} {p0} {p2}");
                if kind == SchemeKind::Tri {
                    assert_eq!(rep.delta_u0, r(0, 1));
                    assert_eq!(rep.delta_u1, r(0, 1));
                    assert_eq!(rep.delta_d, r(0, 1));
                }
            }
        }
    }

    #[test]
    fn bi2_is_bi0_transposed() {
        for p0 in 1..=4 {
            for p1 in 1..=4 {
                for p2 in 1..=4 {
                    let pp = p(p0, p1, p2);
                    let a = compute_overheads(SchemeKind::Bi2, pp);
                    let b = compute_overheads(SchemeKind::Bi0, pp.transposed());
                    assert_eq!(a.recovery_threshold, b.recovery_threshold);
                    assert_eq!(a.delta, b.delta);
                    assert_eq!(a.delta_d, b.delta_d);
                    assert_eq!(a.delta_u0, b.delta_u1);
                    assert_eq!(a.delta_u1, b.delta_u0);
                }
            }
        }
    }

    #[test]
    fn json_renders_floats() {
        let rep = compute_overheads(SchemeKind::Tri, p(2, 2, 2));
        let v = serde_json::to_value(rep).unwrap();
        assert_eq!(v["delta_d"], 2.0);
        assert_eq!(v["scheme"], "tri");
    }
}
