//! Path coupling: blocked sets, the potential Φ, exact one-step drift, the
//! resulting contraction and mixing bounds, and coalescence experiments.

use num::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{proposal_prob_one_exact, Glauber, MoveDraw};
use crate::configuration::{is_valid_on, Configuration};
use crate::decomposition::CircuitGraph;
use crate::error::{Error, Result};
use crate::exactness::{enumerate_omega, Caps, PhiMetric};
use crate::rational::{self, Rational};

/// `w = bδ/(b^δ + 2)` with δ the global maximum degree.
pub fn potential_w(b: &Rational, delta: u32) -> Rational {
    let d = Rational::from_integer(delta.into());
    b * &d / (rational::pow(b, delta) + rational::int(2))
}

/// Neighbours of `i` that see some 1-circuit among their own neighbours.
/// Requires `σ(C_i) = 0`, so `i` itself never blocks.
pub fn blocked_set(sigma: &Configuration, i: usize, cg: &CircuitGraph) -> Vec<usize> {
    debug_assert!(!sigma.get(i));
    cg.neighbors(i)
        .iter()
        .copied()
        .filter(|&j| cg.neighbors(j).iter().any(|&k| sigma.get(k)))
        .collect()
}

/// `δ_i − w·|B(σ, C_i)|`.
pub fn phi_adjacent(sigma: &Configuration, i: usize, cg: &CircuitGraph, b: &Rational) -> Rational {
    let w = potential_w(b, cg.delta_max());
    let blocked = Rational::from_integer((blocked_set(sigma, i, cg).len() as i64).into());
    Rational::from_integer(cg.degree(i).into()) - w * blocked
}

/// σ with `σ(C_i) = 0` together with σ_{C_i}, its copy with circuit `i` set to 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdjacentPair {
    #[serde(serialize_with = "display")]
    pub sigma: Configuration,
    pub i: usize,
}

fn display<S: serde::Serializer>(c: &Configuration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(c)
}

impl AdjacentPair {
    pub fn new(sigma: Configuration, i: usize, cg: &CircuitGraph) -> Result<Self> {
        if sigma.len() != cg.n() || i >= cg.n() {
            return Err(Error::InvalidArgument("pair does not match the instance".into()));
        }
        if sigma.get(i) {
            return Err(Error::InvalidArgument(format!("circuit {i} must be 0 in σ")));
        }
        if !is_valid_on(&sigma.with(i, true), cg) {
            return Err(Error::InvalidConfiguration);
        }
        Ok(AdjacentPair { sigma, i })
    }

    pub fn partner(&self) -> Configuration {
        self.sigma.with(self.i, true)
    }

    /// Every adjacent pair of the instance, in state-mask then circuit order.
    pub fn all(cg: &CircuitGraph, caps: Caps) -> Result<Vec<AdjacentPair>> {
        let space = enumerate_omega(cg, caps)?;
        let mut out = Vec::new();
        for s in &space.states {
            for i in 0..cg.n() {
                if !s.get(i) && space.id(&s.with(i, true)).is_some() {
                    out.push(AdjacentPair { sigma: s.clone(), i });
                }
            }
        }
        Ok(out)
    }
}

/// Feeds the identical draw to both chains.
pub fn coupled_step(
    model: &Glauber,
    x: &Configuration,
    y: &Configuration,
    draw: MoveDraw,
) -> (Configuration, Configuration) {
    (model.step(x, draw), model.step(y, draw))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitClass {
    /// The circuit the pair differs in.
    Differing,
    /// Neighbour of the differing circuit, blocked in both states.
    BlockedNeighbor,
    /// Neighbour of the differing circuit that is free to become 1 in σ.
    UnblockedNeighbor,
    /// At distance two, currently 1.
    SecondNeighborOne,
    /// At distance two, 0, with every neighbour 0.
    SecondNeighborFree,
    /// At distance two, 0, with some neighbour at 1.
    SecondNeighborStuck,
    Other,
}

#[derive(Clone, Debug, Serialize)]
pub struct CircuitDrift {
    pub circuit: usize,
    pub class: CircuitClass,
    /// `E[ΔΦ | circuit chosen]`.
    #[serde(with = "rational::serde_rational")]
    pub contribution: Rational,
    /// Closed form the contribution must equal, where one exists.
    #[serde(serialize_with = "opt_rational")]
    pub expected: Option<Rational>,
    /// Upper bound the contribution must respect, where only a bound exists.
    #[serde(serialize_with = "opt_rational")]
    pub upper_bound: Option<Rational>,
    pub holds: bool,
}

fn opt_rational<S: serde::Serializer>(
    r: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&rational::format(r)),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub pair: AdjacentPair,
    #[serde(with = "rational::serde_rational")]
    pub phi: Rational,
    pub contributions: Vec<CircuitDrift>,
    /// `n·E[ΔΦ]`.
    #[serde(with = "rational::serde_rational")]
    pub total: Rational,
    /// `δ_i(bδ − 1 − b^δ)/(1 + b^δ)`.
    #[serde(with = "rational::serde_rational")]
    pub bound: Rational,
    /// `None` when the hypotheses of the bound fail; see `warnings`.
    pub bound_holds: Option<bool>,
    pub cases_hold: bool,
    pub isolated_circuits: Vec<usize>,
    /// Some circuit is both a neighbour and a second neighbour of `i`.
    pub class_overlap: bool,
    pub warnings: Vec<String>,
}

/// Deterministic successor of `sigma` when circuit `c` proposes `value`.
fn propose(cg: &CircuitGraph, sigma: &Configuration, c: usize, value: bool) -> Configuration {
    if value && cg.neighbors(c).iter().any(|&j| sigma.get(j)) {
        sigma.clone()
    } else {
        sigma.with(c, value)
    }
}

pub fn drift_bound(delta_i: u32, delta: u32, b: &Rational) -> Rational {
    let bd = rational::pow(b, delta);
    let num = b * Rational::from_integer(delta.into()) - Rational::one() - &bd;
    Rational::from_integer(delta_i.into()) * num / (Rational::one() + bd)
}

/// Exact `E[ΔΦ]` of one coupled step from an adjacent pair, split by the
/// chosen circuit and checked against the per-case closed forms.
pub fn exact_drift(
    pair: &AdjacentPair,
    cg: &CircuitGraph,
    b: &Rational,
    metric: &PhiMetric,
) -> Result<DriftReport> {
    let n = cg.n();
    let i = pair.i;
    let x = &pair.sigma;
    let y = pair.partner();
    let space = metric.space();
    let id = |s: &Configuration| space.id(s).ok_or(Error::InvalidConfiguration);
    let phi = metric.distance_ids(id(x)?, id(&y)?)?;
    let delta = cg.delta_max();
    let w = potential_w(b, delta);
    let blocked_i = blocked_set(x, i, cg);
    let mut warnings = Vec::new();

    let phi_formula = phi_adjacent(x, i, cg, b);
    if phi_formula != phi {
        warnings.push(format!(
            "shortest path {} is shorter than the direct potential {}",
            rational::format(&phi),
            rational::format(&phi_formula)
        ));
    }

    let second: Vec<bool> = (0..n)
        .map(|k| {
            k != i
                && !cg.is_adjacent(i, k)
                && cg.neighbors(k).iter().any(|&j| cg.is_adjacent(i, j))
        })
        .collect();
    let class_overlap = cg.neighbors(i).iter().any(|&j| {
        cg.neighbors(j).iter().any(|&k| k != i && cg.is_adjacent(i, k))
    });
    let count = |v: usize| Rational::from_integer((v as i64).into());

    let mut contributions = Vec::with_capacity(n);
    let mut total = Rational::zero();
    for c in 0..n {
        let p1 = proposal_prob_one_exact(cg.degree(c), b);
        let p0 = Rational::one() - &p1;
        let mut contribution = Rational::zero();
        for (value, p) in [(true, &p1), (false, &p0)] {
            if p.is_zero() {
                continue;
            }
            let x2 = propose(cg, x, c, value);
            let y2 = propose(cg, &y, c, value);
            let d = metric.distance_ids(id(&x2)?, id(&y2)?)?;
            contribution += p * (d - &phi);
        }

        let (class, expected, upper_bound) = if c == i {
            (CircuitClass::Differing, Some(-phi_formula.clone()), None)
        } else if cg.is_adjacent(i, c) {
            if blocked_i.contains(&c) {
                (CircuitClass::BlockedNeighbor, Some(Rational::zero()), None)
            } else {
                let own = Rational::from_integer(cg.degree(c).into())
                    - &w * count(blocked_set(x, c, cg).len());
                (CircuitClass::UnblockedNeighbor, None, Some(&p1 * own))
            }
        } else if second[c] {
            if x.get(c) {
                // neighbours of i whose only 1-neighbour is c
                let alpha = cg
                    .neighbors(i)
                    .iter()
                    .filter(|&&j| {
                        cg.is_adjacent(j, c)
                            && cg.neighbors(j).iter().all(|&k| k == c || !x.get(k))
                    })
                    .count();
                (CircuitClass::SecondNeighborOne, Some(&w * count(alpha) * &p0), None)
            } else if cg.neighbors(c).iter().all(|&j| !x.get(j)) {
                let beta = cg
                    .neighbors(i)
                    .iter()
                    .filter(|&&j| {
                        cg.is_adjacent(j, c) && cg.neighbors(j).iter().all(|&k| !x.get(k))
                    })
                    .count();
                (CircuitClass::SecondNeighborFree, Some(-(&w * count(beta) * &p1)), None)
            } else {
                (CircuitClass::SecondNeighborStuck, Some(Rational::zero()), None)
            }
        } else {
            (CircuitClass::Other, Some(Rational::zero()), None)
        };
        let holds = expected.as_ref().is_none_or(|e| *e == contribution)
            && upper_bound.as_ref().is_none_or(|u| contribution <= *u);
        total += &contribution;
        contributions.push(CircuitDrift { circuit: c, class, contribution, expected, upper_bound, holds });
    }

    let bound = drift_bound(cg.degree(i), delta, b);
    let in_region = delta >= 2 && b * Rational::from_integer(delta.into()) <= Rational::one();
    let bound_holds = if !cg.is_triangle_free() {
        warnings.push("instance is not two-by-two free; bound not checked".into());
        None
    } else if !in_region {
        warnings.push("b > 1/δ or δ < 2; bound not checked".into());
        None
    } else {
        Some(total <= bound)
    };
    let isolated_circuits = cg.isolated();
    if !isolated_circuits.is_empty() {
        warnings.push(format!("isolated circuits {isolated_circuits:?} have zero potential"));
    }
    if class_overlap {
        warnings.push("a neighbour of the differing circuit is also a second neighbour".into());
    }
    let cases_hold = contributions.iter().all(|c| c.holds);
    Ok(DriftReport {
        pair: pair.clone(),
        phi,
        contributions,
        total,
        bound,
        bound_holds,
        cases_hold,
        isolated_circuits,
        class_overlap,
        warnings,
    })
}

/// Drift reports for every adjacent pair of the instance.
pub fn drift_all_pairs(cg: &CircuitGraph, b: &Rational, caps: Caps) -> Result<Vec<DriftReport>> {
    let space = enumerate_omega(cg, caps)?;
    let metric = PhiMetric::new(&space, cg, b)?;
    AdjacentPair::all(cg, caps)?
        .iter()
        .map(|p| exact_drift(p, cg, b, &metric))
        .collect()
}

fn check_region(delta: u32, b: &Rational) -> Result<()> {
    if delta < 2 {
        return Err(Error::OutsideProvenRegion(format!("δ = {delta} < 2")));
    }
    if b * Rational::from_integer(delta.into()) > Rational::one() {
        return Err(Error::OutsideProvenRegion(format!(
            "b = {} exceeds 1/δ = 1/{delta}",
            rational::format(b)
        )));
    }
    Ok(())
}

/// `1 + (bδ − 1 − b^δ)/(n(1 + b^δ))`.
pub fn theoretical_beta(n: usize, delta: u32, b: &Rational) -> Result<Rational> {
    check_region(delta, b)?;
    let bd = rational::pow(b, delta);
    let num = b * Rational::from_integer(delta.into()) - Rational::one() - &bd;
    Ok(Rational::one() + num / (Rational::from_integer((n as i64).into()) * (Rational::one() + bd)))
}

/// `n(1 + b^δ)/(b^δ + 1 − bδ) · ln(nδ/ε)`.
pub fn mixing_bound(n: usize, delta: u32, b: &Rational, eps: f64) -> Result<f64> {
    check_region(delta, b)?;
    Ok(mixing_formula(n, delta, b, eps))
}

/// The same expression with no region check; meaningless when the
/// denominator is not positive.
pub fn mixing_formula(n: usize, delta: u32, b: &Rational, eps: f64) -> f64 {
    let bd = rational::pow(b, delta);
    let den = &bd + Rational::one() - b * Rational::from_integer(delta.into());
    let factor = rational::to_f64(&((Rational::one() + &bd) / den));
    n as f64 * factor * (n as f64 * delta as f64 / eps).ln()
}

/// Greedy maximal independent set scanning circuits in `order`.
fn greedy_independent(cg: &CircuitGraph, order: impl Iterator<Item = usize>) -> Configuration {
    let mut s = Configuration::zeros(cg.n());
    for i in order {
        if cg.neighbors(i).iter().all(|&j| !s.get(j)) {
            s.set(i, true);
        }
    }
    s
}

/// Two far-apart starting states: a greedy maximal independent set, and a
/// second one built from the circuits the first left out.
pub fn distant_pair(cg: &CircuitGraph) -> (Configuration, Configuration) {
    let a = greedy_independent(cg, 0..cg.n());
    let first: Vec<usize> = (0..cg.n()).filter(|&i| !a.get(i)).collect();
    let rest: Vec<usize> = (0..cg.n()).filter(|&i| a.get(i)).collect();
    let b = greedy_independent(cg, first.into_iter().chain(rest));
    (a, b)
}

/// Steps until the coupled chains agree, or `None` after `max_steps`.
pub fn coalescence_time(
    model: &Glauber,
    x: &Configuration,
    y: &Configuration,
    rng: &mut ChaCha8Rng,
    max_steps: u64,
) -> Option<u64> {
    let mut x = x.clone();
    let mut y = y.clone();
    for t in 0..=max_steps {
        if x == y {
            return Some(t);
        }
        if t == max_steps {
            break;
        }
        let d = model.draw(rng);
        model.apply(&mut x, d);
        model.apply(&mut y, d);
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct CoalescenceStats {
    pub trials: usize,
    pub median: f64,
    pub p95: u64,
    pub max: u64,
    /// Trials that had not coalesced after `max_steps`; counted as `max_steps`.
    pub censored: usize,
    pub times: Vec<u64>,
}

/// Trial `t` draws from stream `t` of a generator keyed by `seed`, so the
/// result does not depend on how trials are spread over threads.
pub fn coalescence_experiment(
    model: &Glauber,
    trials: usize,
    seed: u64,
    max_steps: u64,
) -> CoalescenceStats {
    let (x, y) = distant_pair(model.graph());
    let results: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            coalescence_time(model, &x, &y, &mut rng, max_steps)
        })
        .collect();
    let censored = results.iter().filter(|r| r.is_none()).count();
    let times: Vec<u64> = results.into_iter().map(|r| r.unwrap_or(max_steps)).collect();
    let mut sorted = times.clone();
    sorted.sort_unstable();
    let median = match sorted.len() {
        0 => 0.0,
        m if m % 2 == 1 => sorted[m / 2] as f64,
        m => (sorted[m / 2 - 1] + sorted[m / 2]) as f64 / 2.0,
    };
    let p95 = if sorted.is_empty() {
        0
    } else {
        sorted[((0.95 * sorted.len() as f64).ceil() as usize).max(1) - 1]
    };
    CoalescenceStats {
        trials,
        median,
        p95,
        max: sorted.last().copied().unwrap_or(0),
        censored,
        times,
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
