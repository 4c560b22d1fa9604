//! Circuit-level states, their weights, and the edge picture they induce.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::{One, Zero};
use serde::Serialize;

use crate::constraint::{Bits4, ConstraintFunction4};
use crate::decomposition::{CircuitGraph, Decomposition};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::rational::{self, Rational};

/// One bit per circuit: `σ(C_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    bits: Vec<bool>,
}

impl Configuration {
    pub fn zeros(n: usize) -> Self {
        Configuration { bits: vec![false; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Configuration { bits }
    }

    /// Bit `i` of `mask` is circuit `i`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Configuration { bits: (0..n).map(|i| mask >> i & 1 == 1).collect() }
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.bits.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0, |m, (i, &b)| m | (b as u64) << i)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn with(&self, i: usize, value: bool) -> Self {
        let mut c = self.clone();
        c.bits[i] = value;
        c
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    /// The circuit both differ in, if they differ in exactly one.
    pub fn single_difference(&self, other: &Self) -> Option<usize> {
        let mut diff = self.bits.iter().zip(&other.bits).enumerate().filter(|(_, (a, b))| a != b);
        let first = diff.next()?.0;
        diff.next().is_none().then_some(first)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidArgument(format!("bad configuration {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Configuration::from_bits)
    }
}

/// No two adjacent circuits are both 1.
pub fn is_valid_on(sigma: &Configuration, cg: &CircuitGraph) -> bool {
    assert_eq!(sigma.len(), cg.n());
    sigma
        .ones()
        .all(|i| cg.neighbors(i).iter().all(|&j| !sigma.get(j)))
}

/// Circuit-level validity. Only meaningful on coherent instances without
/// self-intersections; other instances are rejected.
pub fn is_valid(sigma: &Configuration, d: &Decomposition) -> Result<bool> {
    if !d.is_coherent() {
        return Err(Error::Unsupported(format!(
            "incoherent circuits {:?}",
            d.incoherent_circuits()
        )));
    }
    if !d.self_intersection_free() {
        return Err(Error::Unsupported("self-intersecting circuit".into()));
    }
    if sigma.len() != d.n() {
        return Err(Error::InvalidArgument(format!(
            "configuration has {} bits, instance has {} circuits",
            sigma.len(),
            d.n()
        )));
    }
    Ok(is_valid_on(sigma, &d.circuit_graph(Default::default())))
}

/// `∏_{σ_i = 1} b^{δ_i}` with the degrees carried by `cg`.
pub fn mu_weight(sigma: &Configuration, cg: &CircuitGraph, b: &Rational) -> Result<Rational> {
    if sigma.len() != cg.n() || !is_valid_on(sigma, cg) {
        return Err(Error::InvalidConfiguration);
    }
    Ok(unnormalized_weight(sigma, cg, b))
}

pub(crate) fn unnormalized_weight(sigma: &Configuration, cg: &CircuitGraph, b: &Rational) -> Rational {
    let exponent: u32 = sigma.ones().map(|i| cg.degree(i)).sum();
    rational::pow(b, exponent)
}

/// Values on every (vertex, slot) induced by a circuit assignment. Along a
/// circuit the value alternates across every edge and every vertex pass.
pub fn half_values(sigma: &Configuration, g: &LabeledGraph, d: &Decomposition) -> Vec<[u8; 4]> {
    assert_eq!(sigma.len(), d.n());
    let mut values = vec![[u8::MAX; 4]; g.vertex_count];
    for c in &d.circuits {
        let s = sigma.get(c.id) as u8;
        let init = c.initial_edge.end;
        let init_is_entry = c.hops.iter().any(|h| h.entry == init);
        let (entry_val, exit_val) = if init_is_entry { (s, 1 - s) } else { (1 - s, s) };
        for h in &c.hops {
            values[h.entry.vertex][h.entry.slot as usize - 1] = entry_val;
            values[h.exit.vertex][h.exit.slot as usize - 1] = exit_val;
        }
    }
    debug_assert!(propagation_consistent(&values, g));
    values
}

/// Every slot assigned, every edge carries unequal halves.
pub fn propagation_consistent(values: &[[u8; 4]], g: &LabeledGraph) -> bool {
    let at = |s: crate::graph::SlotRef| values[s.vertex][s.slot as usize - 1];
    values.iter().all(|v| v.iter().all(|&x| x <= 1))
        && g.edges.iter().all(|e| at(e.a) != at(e.b))
}

/// Product over vertices of `f` at the induced local assignment.
pub fn exact_weight(
    sigma: &Configuration,
    g: &LabeledGraph,
    f: &ConstraintFunction4,
    d: &Decomposition,
) -> Rational {
    let values = half_values(sigma, g, d);
    let mut w = Rational::one();
    for v in values {
        let x = f.evaluate(Bits4(v));
        if x.is_zero() {
            return Rational::zero();
        }
        w *= x;
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Arrow {
    pub tail: usize,
    pub head: usize,
}

/// Edge id to arrow; the end carrying value 1 is the tail.
pub fn to_orientation(
    sigma: &Configuration,
    g: &LabeledGraph,
    d: &Decomposition,
) -> BTreeMap<usize, Arrow> {
    let values = half_values(sigma, g, d);
    g.edges
        .iter()
        .map(|e| {
            let a_val = values[e.a.vertex][e.a.slot as usize - 1];
            let arrow = if a_val == 1 {
                Arrow { tail: e.a.vertex, head: e.b.vertex }
            } else {
                Arrow { tail: e.b.vertex, head: e.a.vertex }
            };
            (e.id, arrow)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::make_fstar;
    use crate::decomposition::{decompose, Convention};
    use crate::graph::*;
    use crate::rational::{frac, int};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn torus_validity() {
        let d = decompose(&gen_torus(2, 2).unwrap()).unwrap();
        // circuits: row0, row1, col0, col1
        assert!(is_valid(&cfg("1100"), &d).unwrap());
        assert!(!is_valid(&cfg("1010"), &d).unwrap());
        assert!(is_valid(&cfg("0000"), &d).unwrap());
    }

    #[test]
    fn incoherent_instance_rejected() {
        let mut g = gen_fig2();
        for e in &mut g.edges {
            for end in [&mut e.a, &mut e.b] {
                if end.vertex == 1 && (end.slot == 1 || end.slot == 3) {
                    end.slot = 4 - end.slot;
                }
            }
        }
        let d = decompose(&g).unwrap();
        assert!(matches!(is_valid(&cfg("00"), &d), Err(Error::Unsupported(_))));
        let d = decompose(&gen_chain(1).unwrap()).unwrap();
        assert!(is_valid(&cfg("0"), &d).is_err());
    }

    #[test]
    fn mu_weights() {
        let d = decompose(&gen_torus(2, 2).unwrap()).unwrap();
        let cg = d.circuit_graph(Convention::Intersection);
        assert_eq!(mu_weight(&cfg("1100"), &cg, &frac(1, 2)).unwrap(), frac(1, 16));
        assert_eq!(mu_weight(&cfg("0000"), &cg, &frac(1, 2)).unwrap(), int(1));
        assert!(matches!(
            mu_weight(&cfg("1010"), &cg, &frac(1, 2)),
            Err(Error::InvalidConfiguration)
        ));

        let d = decompose(&gen_fig2()).unwrap();
        let n = d.circuit_graph(Convention::Neighbor);
        let i = d.circuit_graph(Convention::Intersection);
        assert_eq!(mu_weight(&cfg("10"), &n, &int(3)).unwrap(), int(3));
        assert_eq!(mu_weight(&cfg("10"), &i, &int(3)).unwrap(), int(9));
    }

    #[test]
    fn exact_weights() {
        let b = frac(2, 7);
        let f = make_fstar(&b).unwrap();
        let g = gen_fig2();
        let d = decompose(&g).unwrap();
        assert_eq!(exact_weight(&cfg("10"), &g, &f, &d), &b * &b);
        // both local (x1,x2) = (1,0)
        for v in half_values(&cfg("10"), &g, &d) {
            assert_eq!((v[0], v[1]), (1, 0));
        }
        assert_eq!(exact_weight(&cfg("11"), &g, &f, &d), int(0));

        let g = gen_torus(2, 2).unwrap();
        let d = decompose(&g).unwrap();
        assert_eq!(exact_weight(&cfg("0000"), &g, &f, &d), int(1));
        for v in half_values(&cfg("0000"), &g, &d) {
            assert_eq!(v, [0, 0, 1, 1]);
        }
        assert_eq!(exact_weight(&cfg("1010"), &g, &f, &d), int(0));
    }

    fn ice_rule(g: &LabeledGraph, o: &BTreeMap<usize, Arrow>) -> bool {
        let mut out = vec![0; g.vertex_count];
        let mut inn = vec![0; g.vertex_count];
        for a in o.values() {
            out[a.tail] += 1;
            inn[a.head] += 1;
        }
        out.iter().zip(&inn).all(|(&o, &i)| o == 2 && i == 2)
    }

    #[test]
    fn orientation() {
        let g = gen_torus(2, 2).unwrap();
        let d = decompose(&g).unwrap();
        let cg = d.circuit_graph(Convention::Intersection);
        for mask in 0..16u64 {
            let s = Configuration::from_mask(mask, 4);
            if is_valid_on(&s, &cg) {
                assert!(ice_rule(&g, &to_orientation(&s, &g, &d)));
            }
        }
        // all-zero: x3/x4 ends carry 1, so each edge points away from its x3/x4 end
        let o = to_orientation(&cfg("0000"), &g, &d);
        for e in &g.edges {
            let tail_end = if e.a.slot >= 3 { e.a } else { e.b };
            assert_eq!(o[&e.id].tail, tail_end.vertex);
        }
        // flipping a circuit reverses exactly its edges
        let flipped = to_orientation(&cfg("1000"), &g, &d);
        for e in &g.edges {
            let reversed = o[&e.id] != flipped[&e.id];
            assert_eq!(reversed, d.edge_circuit[e.id] == 0);
        }
        let json = serde_json::to_string(&o).unwrap();
        assert!(json.starts_with(r#"{"0":{"tail":0,"head":1}"#));
    }

    // Holant weight and circuit weight agree on coherent, self-intersection-free
    // instances: every vertex is a crossing of two distinct circuits.
    #[test]
    fn oracle_equivalence_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = frac(3, 5);
        let f = make_fstar(&b).unwrap();
        let mut checked = 0;
        for v in 1..7 {
            for _ in 0..5 {
                let Some(g) = gen_random_coherent(v, &mut rng, 500) else { continue };
                let d = decompose(&g).unwrap();
                let cg = d.circuit_graph(Convention::Intersection);
                for mask in 0..(1u64 << d.n()) {
                    let s = Configuration::from_mask(mask, d.n());
                    let w = exact_weight(&s, &g, &f, &d);
                    if is_valid_on(&s, &cg) {
                        assert_eq!(w, mu_weight(&s, &cg, &b).unwrap());
                    } else {
                        assert!(w.is_zero());
                    }
                    let o = to_orientation(&s, &g, &d);
                    assert!(ice_rule(&g, &o));
                }
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn mask_round_trip() {
        let s = cfg("10110");
        assert_eq!(Configuration::from_mask(s.to_mask(), 5), s);
        assert_eq!(s.to_string(), "10110");
        assert_eq!(s.single_difference(&cfg("10010")), Some(2));
        assert_eq!(s.single_difference(&cfg("00010")), None);
        assert!("10a".parse::<Configuration>().is_err());
    }
}
