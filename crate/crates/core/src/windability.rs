//! Windability of 4-ary constraint functions, decided exactly.
//!
//! The unknowns are `B(x, y, M)` for every pair of inputs and every pairing
//! `M` of the positions where `x` and `y` differ. Values must be
//! nonnegative, sum to `f(x)f(y)` over `M` for each `(x, y)`, and agree on
//! `(x, y, M)` and `(x⊕S, y⊕S, M)` for every part `S` of `M`. The symmetry
//! is applied up front by merging unknowns into classes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num::{Signed, Zero};
use serde::Serialize;

use crate::constraint::{Bits4, ConstraintFunction4};
use crate::rational::{self, Rational};
use crate::simplex::{self, Feasibility};

/// A partition of a set of positions (1..=4) into pairs and at most one
/// singleton.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairingPartition {
    pub pairs: Vec<(u8, u8)>,
    pub singleton: Option<u8>,
}

fn position_mask(p: u8) -> u8 {
    1 << (4 - p)
}

impl PairingPartition {
    /// Each part as a 4-bit mask in table order (x1 is the high bit).
    pub fn part_masks(&self) -> Vec<u8> {
        let mut parts: Vec<u8> =
            self.pairs.iter().map(|&(a, b)| position_mask(a) | position_mask(b)).collect();
        parts.extend(self.singleton.map(position_mask));
        parts
    }
}

impl fmt::Display for PairingPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pairs.is_empty() && self.singleton.is_none() {
            return f.write_str("{}");
        }
        for (a, b) in &self.pairs {
            write!(f, "{{{a},{b}}}")?;
        }
        if let Some(s) = self.singleton {
            write!(f, "{{{s}}}")?;
        }
        Ok(())
    }
}

pub fn enumerate_pairings(support: &[u8]) -> Vec<PairingPartition> {
    assert!(support.len() <= 4);
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    if sorted.len() % 2 == 1 {
        for k in 0..sorted.len() {
            let mut rest = sorted.clone();
            let s = rest.remove(k);
            for pairs in perfect_matchings(&rest) {
                out.push(PairingPartition { pairs, singleton: Some(s) });
            }
        }
    } else {
        for pairs in perfect_matchings(&sorted) {
            out.push(PairingPartition { pairs, singleton: None });
        }
    }
    out
}

fn perfect_matchings(items: &[u8]) -> Vec<Vec<(u8, u8)>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0];
    let mut out = Vec::new();
    for k in 1..items.len() {
        let rest: Vec<u8> = items[1..].iter().copied().filter(|&v| v != items[k]).collect();
        for mut m in perfect_matchings(&rest) {
            m.insert(0, (first, items[k]));
            out.push(m);
        }
    }
    out
}

fn support_of(z: u8) -> Vec<u8> {
    (1..=4u8).filter(|&p| z & position_mask(p) != 0).collect()
}

fn bits(x: u8) -> String {
    Bits4::from_index(x as usize).to_string()
}

/// One unknown `B(x, y, M)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub x: u8,
    pub y: u8,
    pub pairing: PairingPartition,
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B({},{},{})", bits(self.x), bits(self.y), self.pairing)
    }
}

#[derive(Clone, Debug)]
pub struct Equation {
    pub x: u8,
    pub y: u8,
    pub rhs: Rational,
    /// `(class, coefficient)`.
    pub terms: Vec<(usize, Rational)>,
}

#[derive(Clone, Debug)]
pub struct WindabilitySystem {
    /// Canonical member of each class: the least `(x, y, M)`.
    pub classes: Vec<Triple>,
    pub class_of: HashMap<Triple, usize>,
    /// One per `(x, y)`, at index `16·x + y`.
    pub equations: Vec<Equation>,
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

pub fn build_system(f: &ConstraintFunction4) -> WindabilitySystem {
    let mut triples = Vec::new();
    for x in 0..16u8 {
        for y in 0..16u8 {
            for pairing in enumerate_pairings(&support_of(x ^ y)) {
                triples.push(Triple { x, y, pairing });
            }
        }
    }
    let id: HashMap<Triple, usize> = triples.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    let mut parent: Vec<usize> = (0..triples.len()).collect();
    for (a, t) in triples.iter().enumerate() {
        for s in t.pairing.part_masks() {
            let other = Triple { x: t.x ^ s, y: t.y ^ s, pairing: t.pairing.clone() };
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, id[&other]));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    // triples are generated in increasing order, so each root is its class minimum
    let mut class_index: BTreeMap<usize, usize> = BTreeMap::new();
    let mut classes = Vec::new();
    let mut class_of = HashMap::new();
    for (a, t) in triples.iter().enumerate() {
        let root = find(&mut parent, a);
        let c = *class_index.entry(root).or_insert_with(|| {
            classes.push(triples[root].clone());
            classes.len() - 1
        });
        class_of.insert(t.clone(), c);
    }
    let mut equations = Vec::with_capacity(256);
    for x in 0..16u8 {
        for y in 0..16u8 {
            let mut terms: BTreeMap<usize, Rational> = BTreeMap::new();
            for pairing in enumerate_pairings(&support_of(x ^ y)) {
                *terms.entry(class_of[&Triple { x, y, pairing }]).or_insert_with(Rational::zero) +=
                    Rational::from_integer(1.into());
            }
            let rhs = f.entry(x as usize) * f.entry(y as usize);
            equations.push(Equation { x, y, rhs, terms: terms.into_iter().collect() });
        }
    }
    WindabilitySystem { classes, class_of, equations }
}

/// A combination of equations whose left side has no negative coefficient
/// and whose right side is negative. With all unknowns nonnegative this
/// reads `0 ≤ (negative number)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// Equation index (`16·x + y`) to multiplier; zero multipliers omitted.
    pub multipliers: BTreeMap<usize, Rational>,
}

impl Certificate {
    pub fn combined_rhs(&self, sys: &WindabilitySystem) -> Rational {
        self.multipliers.iter().map(|(e, y)| y * &sys.equations[*e].rhs).sum()
    }

    pub fn combined_lhs(&self, sys: &WindabilitySystem) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); sys.classes.len()];
        for (e, y) in &self.multipliers {
            for (c, a) in &sys.equations[*e].terms {
                out[*c] += y * a;
            }
        }
        out
    }

    pub fn verify(&self, sys: &WindabilitySystem) -> bool {
        self.combined_rhs(sys).is_negative()
            && self.combined_lhs(sys).iter().all(|v| !v.is_negative())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// One nonnegative value per class.
    Windable(Vec<Rational>),
    Unwindable(Certificate),
}

impl Verdict {
    pub fn is_windable(&self) -> bool {
        matches!(self, Verdict::Windable(_))
    }
}

/// Every equation holds exactly and every value is nonnegative.
pub fn verify_witness(sys: &WindabilitySystem, values: &[Rational]) -> bool {
    values.len() == sys.classes.len()
        && values.iter().all(|v| !v.is_negative())
        && sys.equations.iter().all(|e| {
            let lhs: Rational = e.terms.iter().map(|(c, a)| a * &values[*c]).sum();
            lhs == e.rhs
        })
}

/// Decides feasibility of `sys`. With `presolve`, equations with zero right
/// side first pin their classes to zero, which on its own already settles
/// many inputs; the simplex runs on what is left.
pub fn decide(sys: &WindabilitySystem, presolve: bool) -> Verdict {
    let nc = sys.classes.len();
    let mut forced: Vec<Option<usize>> = vec![None; nc];
    if presolve {
        for (e, eq) in sys.equations.iter().enumerate() {
            if eq.rhs.is_zero() {
                for (c, _) in &eq.terms {
                    forced[*c].get_or_insert(e);
                }
            }
        }
    }
    let free: Vec<usize> = (0..nc).filter(|&c| forced[c].is_none()).collect();
    let col: HashMap<usize, usize> = free.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let live: Vec<usize> = (0..sys.equations.len())
        .filter(|&e| !presolve || !sys.equations[e].rhs.is_zero())
        .collect();
    let rows: Vec<Vec<(usize, Rational)>> = live
        .iter()
        .map(|&e| {
            sys.equations[e]
                .terms
                .iter()
                .filter_map(|(c, a)| col.get(c).map(|&k| (k, a.clone())))
                .collect()
        })
        .collect();
    let rhs: Vec<Rational> = live.iter().map(|&e| sys.equations[e].rhs.clone()).collect();

    match simplex::solve(&rows, &rhs, free.len()) {
        Feasibility::Feasible(x) => {
            let mut values = vec![Rational::zero(); nc];
            for (k, &c) in free.iter().enumerate() {
                values[c] = x[k].clone();
            }
            Verdict::Windable(values)
        }
        Feasibility::Infeasible(y) => {
            let mut multipliers: BTreeMap<usize, Rational> = BTreeMap::new();
            for (k, &e) in live.iter().enumerate() {
                if !y[k].is_zero() {
                    multipliers.insert(e, y[k].clone());
                }
            }
            // Pinned classes dropped out of the reduced rows; lift any
            // negative coefficient on them with the equation that pinned them.
            let mut cert = Certificate { multipliers };
            let lhs = cert.combined_lhs(sys);
            for (c, v) in lhs.iter().enumerate() {
                if v.is_negative() {
                    let e = forced[c].expect("only pinned classes can be negative");
                    let a = sys.equations[e].terms.iter().find(|(k, _)| *k == c).unwrap().1.clone();
                    *cert.multipliers.entry(e).or_insert_with(Rational::zero) += -v / a;
                }
            }
            cert.multipliers.retain(|_, y| !y.is_zero());
            Verdict::Unwindable(cert)
        }
    }
}

/// Exact windability decision; the returned witness or certificate has been
/// checked against the full system.
pub fn is_windable(f: &ConstraintFunction4) -> Verdict {
    let sys = build_system(f);
    let verdict = decide(&sys, true);
    match &verdict {
        Verdict::Windable(v) => assert!(verify_witness(&sys, v), "witness fails the system"),
        Verdict::Unwindable(c) => assert!(c.verify(&sys), "certificate fails the system"),
    }
    verdict
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessEntry {
    pub x: String,
    pub y: String,
    pub pairing: String,
    pub value: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateEntry {
    pub x: String,
    pub y: String,
    pub multiplier: String,
    pub product: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictReport {
    pub verdict: &'static str,
    pub classes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<WitnessEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<CertificateEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combined_rhs: Option<String>,
}

pub fn report(f: &ConstraintFunction4) -> VerdictReport {
    let sys = build_system(f);
    match is_windable(f) {
        Verdict::Windable(values) => VerdictReport {
            verdict: "windable",
            classes: sys.classes.len(),
            witness: Some(
                sys.classes
                    .iter()
                    .zip(&values)
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(t, v)| WitnessEntry {
                        x: bits(t.x),
                        y: bits(t.y),
                        pairing: t.pairing.to_string(),
                        value: rational::format(v),
                    })
                    .collect(),
            ),
            certificate: None,
            combined_rhs: None,
        },
        Verdict::Unwindable(cert) => VerdictReport {
            verdict: "unwindable",
            classes: sys.classes.len(),
            witness: None,
            combined_rhs: Some(rational::format(&cert.combined_rhs(&sys))),
            certificate: Some(
                cert.multipliers
                    .iter()
                    .map(|(e, y)| {
                        let eq = &sys.equations[*e];
                        CertificateEntry {
                            x: bits(eq.x),
                            y: bits(eq.y),
                            multiplier: rational::format(y),
                            product: rational::format(&eq.rhs),
                        }
                    })
                    .collect(),
            ),
        },
    }
}
