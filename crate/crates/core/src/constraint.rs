//! Four-ary constraint functions with exact rational weights.
//!
//! Entries are indexed big-endian by `(x1, x2, x3, x4)`, so the table index of
//! `x` is `8*x1 + 4*x2 + 2*x3 + x4`. Read as a 4x4 matrix the row is `x1 x2` and
//! the column is `x3 x4`.

use std::collections::BTreeMap;
use std::fmt;

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// An assignment to the four variables of a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits4(pub [u8; 4]);

impl Bits4 {
    pub fn from_index(idx: usize) -> Self {
        assert!(idx < 16);
        Bits4([
            ((idx >> 3) & 1) as u8,
            ((idx >> 2) & 1) as u8,
            ((idx >> 1) & 1) as u8,
            (idx & 1) as u8,
        ])
    }

    pub fn index(self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | (b as usize & 1))
    }

    /// Parses strings like `"0110"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        if bytes.len() != 4 || !bytes.iter().all(|c| *c == b'0' || *c == b'1') {
            return Err(Error::Parse {
                location: format!("table key {s:?}"),
                message: "expected four characters from {0,1}".into(),
            });
        }
        let mut out = [0u8; 4];
        for (o, c) in out.iter_mut().zip(bytes) {
            *o = c - b'0';
        }
        Ok(Bits4(out))
    }
}

impl fmt::Display for Bits4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintFunction4 {
    table: [Rational; 16],
}

impl ConstraintFunction4 {
    pub fn from_table(table: [Rational; 16]) -> Result<Self> {
        if let Some(neg) = table.iter().find(|w| w.is_negative()) {
            return Err(Error::NegativeWeight(rational::format(neg)));
        }
        Ok(ConstraintFunction4 { table })
    }

    pub fn zero() -> Self {
        ConstraintFunction4 {
            table: std::array::from_fn(|_| Rational::zero()),
        }
    }

    pub fn evaluate(&self, x: Bits4) -> &Rational {
        &self.table[x.index()]
    }

    pub fn entry(&self, idx: usize) -> &Rational {
        &self.table[idx]
    }

    pub fn table(&self) -> &[Rational; 16] {
        &self.table
    }

    pub fn scaled(&self, c: &Rational) -> Result<Self> {
        if c.is_negative() {
            return Err(Error::NegativeWeight(rational::format(c)));
        }
        Ok(ConstraintFunction4 {
            table: std::array::from_fn(|i| &self.table[i] * c),
        })
    }

    /// Invariance under flipping all four inputs.
    pub fn is_arrow_reversal_symmetric(&self) -> bool {
        (0..16).all(|i| self.table[i] == self.table[15 - i])
    }

    pub fn to_json(&self) -> FunctionFile {
        FunctionFile {
            arity: 4,
            table: self
                .table
                .iter()
                .enumerate()
                .filter(|(_, w)| !w.is_zero())
                .map(|(i, w)| (Bits4::from_index(i).to_string(), rational::format(w)))
                .collect(),
        }
    }

    pub fn from_json(file: &FunctionFile) -> Result<Self> {
        if file.arity != 4 {
            return Err(Error::Parse {
                location: "arity".into(),
                message: format!("only arity 4 is supported, got {}", file.arity),
            });
        }
        let mut table: [Rational; 16] = std::array::from_fn(|_| Rational::zero());
        for (key, value) in &file.table {
            let x = Bits4::parse(key)?;
            table[x.index()] = rational::parse(value).map_err(|_| Error::Parse {
                location: format!("table[{key:?}]"),
                message: format!("bad rational {value:?}"),
            })?;
        }
        ConstraintFunction4::from_table(table)
    }
}

/// On-disk form: `{"arity":4,"table":{"0011":"1","0110":"1/2"}}`. Missing keys are zero.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FunctionFile {
    pub arity: u32,
    pub table: BTreeMap<String, String>,
}

/// Vertex weights w1..w6, one per local arrow configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SixVertexParams {
    pub w: [Rational; 6],
}

impl SixVertexParams {
    pub fn new(w: [Rational; 6]) -> Result<Self> {
        if let Some(neg) = w.iter().find(|x| x.is_negative()) {
            return Err(Error::NegativeWeight(rational::format(neg)));
        }
        Ok(SixVertexParams { w })
    }

    /// Places the weights on the six two-hot inputs:
    /// `0011 -> w1, 0101 -> w2, 0110 -> w3, 1001 -> w4, 1010 -> w5, 1100 -> w6`.
    pub fn to_function(&self) -> ConstraintFunction4 {
        let mut table: [Rational; 16] = std::array::from_fn(|_| Rational::zero());
        for (idx, w) in [0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]
            .into_iter()
            .zip(self.w.iter())
        {
            table[idx] = w.clone();
        }
        ConstraintFunction4 { table }
    }
}

/// The function with `f(0011) = 1`, `f(0110) = f(1001) = b` and zero elsewhere.
pub fn make_fstar(b: &Rational) -> Result<ConstraintFunction4> {
    let z = Rational::zero();
    let one = rational::int(1);
    SixVertexParams::new([one, z.clone(), b.clone(), b.clone(), z.clone(), z])
        .map(|p| p.to_function())
}

/// Arrow-reversal symmetric weights: `w1 = w6 = a`, `w3 = w4 = b`, `w2 = w5 = c`.
pub fn make_six_vertex(a: &Rational, b: &Rational, c: &Rational) -> Result<ConstraintFunction4> {
    SixVertexParams::new([
        a.clone(),
        c.clone(),
        b.clone(),
        b.clone(),
        c.clone(),
        a.clone(),
    ])
    .map(|p| p.to_function())
}

pub fn evaluate(f: &ConstraintFunction4, x: Bits4) -> Rational {
    f.evaluate(x).clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn bits(s: &str) -> Bits4 {
        Bits4::parse(s).unwrap()
    }

    fn support(f: &ConstraintFunction4) -> Vec<(String, Rational)> {
        (0..16)
            .filter(|&i| !f.entry(i).is_zero())
            .map(|i| (Bits4::from_index(i).to_string(), f.entry(i).clone()))
            .collect()
    }

    #[test]
    fn fstar_tables() {
        let f = make_fstar(&int(1)).unwrap();
        assert_eq!(
            support(&f),
            vec![("0011".into(), int(1)), ("0110".into(), int(1)), ("1001".into(), int(1))]
        );
        assert_eq!(support(&make_fstar(&int(0)).unwrap()), vec![("0011".into(), int(1))]);
        let f = make_fstar(&frac(1, 2)).unwrap();
        assert_eq!(
            support(&f),
            vec![("0011".into(), int(1)), ("0110".into(), frac(1, 2)), ("1001".into(), frac(1, 2))]
        );
        assert!(make_fstar(&frac(-1, 3)).is_err());
    }

    #[test]
    fn six_vertex_layout() {
        let f = make_six_vertex(&int(1), &int(1), &int(2)).unwrap();
        for (k, v) in [("0011", 1), ("1100", 1), ("0110", 1), ("1001", 1), ("0101", 2), ("1010", 2)] {
            assert_eq!(f.evaluate(bits(k)), &int(v), "{k}");
        }
        assert_eq!(support(&f).len(), 6);
        assert_eq!(make_six_vertex(&int(0), &int(0), &int(0)).unwrap(), ConstraintFunction4::zero());
        let f = make_six_vertex(&int(1), &int(0), &int(0)).unwrap();
        assert_eq!(support(&f), vec![("0011".into(), int(1)), ("1100".into(), int(1))]);
        assert!(make_six_vertex(&int(1), &int(-1), &int(0)).is_err());
    }

    #[test]
    fn evaluate_lookups() {
        let f = make_fstar(&int(2)).unwrap();
        assert_eq!(evaluate(&f, bits("0110")), int(2));
        assert_eq!(evaluate(&f, bits("1100")), int(0));
        assert_eq!(evaluate(&f, bits("0011")), int(1));
    }

    #[test]
    fn fstar_breaks_arrow_reversal() {
        assert!(!make_fstar(&frac(1, 2)).unwrap().is_arrow_reversal_symmetric());
        assert!(make_six_vertex(&int(1), &frac(1, 2), &frac(1, 2))
            .unwrap()
            .is_arrow_reversal_symmetric());
        // restoring w1 = 1 with a = 1 still differs from f* at 1100
        let sym = make_six_vertex(&int(1), &int(1), &int(1)).unwrap();
        assert_ne!(sym, make_fstar(&int(1)).unwrap());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let f = make_fstar(&frac(1, 2)).unwrap();
        let text = serde_json::to_string(&f.to_json()).unwrap();
        assert_eq!(text, r#"{"arity":4,"table":{"0011":"1","0110":"1/2","1001":"1/2"}}"#);
        let back: FunctionFile = serde_json::from_str(&text).unwrap();
        assert_eq!(ConstraintFunction4::from_json(&back).unwrap(), f);

        let bad: FunctionFile = serde_json::from_str(r#"{"arity":4,"table":{"012":"1"}}"#).unwrap();
        assert!(ConstraintFunction4::from_json(&bad).is_err());
        let neg: FunctionFile = serde_json::from_str(r#"{"arity":4,"table":{"0011":"-1"}}"#).unwrap();
        assert!(ConstraintFunction4::from_json(&neg).is_err());
        let arity: FunctionFile = serde_json::from_str(r#"{"arity":3,"table":{}}"#).unwrap();
        assert!(ConstraintFunction4::from_json(&arity).is_err());
    }

    proptest! {
        #[test]
        fn fstar_support_is_pairwise_unequal(p in 0i64..50, q in 1i64..50, idx in 0usize..16) {
            let f = make_fstar(&frac(p, q)).unwrap();
            let x = Bits4::from_index(idx);
            if !f.evaluate(x).is_zero() {
                prop_assert_ne!(x.0[0], x.0[2]);
                prop_assert_ne!(x.0[1], x.0[3]);
            }
            prop_assert_eq!(Bits4::from_index(idx).index(), idx);
        }

        #[test]
        fn fstar_never_arrow_symmetric(p in 1i64..50, q in 1i64..50) {
            prop_assert!(!make_fstar(&frac(p, q)).unwrap().is_arrow_reversal_symmetric());
        }
    }
}
