//! Single-circuit Glauber dynamics.
//!
//! Each step picks a circuit uniformly, proposes value 1 with probability
//! `b^δ/(1+b^δ)` (value 0 otherwise) and keeps the proposal only if no
//! neighbouring circuit is 1 afterwards.

use num::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::configuration::{is_valid_on, Configuration};
use crate::decomposition::{CircuitGraph, Convention, Decomposition};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// The shared randomness of one step: which circuit, and the uniform that
/// decides the proposed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveDraw {
    pub circuit: usize,
    pub u: f64,
}

pub fn proposal_prob_one(delta: u32, b: f64) -> f64 {
    let bd = b.powi(delta as i32);
    bd / (1.0 + bd)
}

pub fn proposal_prob_one_exact(delta: u32, b: &Rational) -> Rational {
    let bd = rational::pow(b, delta);
    &bd / (Rational::one() + &bd)
}

#[derive(Clone, Debug)]
pub struct Glauber {
    cg: CircuitGraph,
    b: Rational,
    p_one: Vec<f64>,
}

impl Glauber {
    /// No structural checks; the caller vouches that circuit-level validity
    /// matches the model.
    pub fn new(cg: CircuitGraph, b: Rational) -> Result<Self> {
        if b < num::Zero::zero() {
            return Err(Error::NegativeWeight(rational::format(&b)));
        }
        let bf = rational::to_f64(&b);
        let p_one = cg.degrees().iter().map(|&d| proposal_prob_one(d, bf)).collect();
        Ok(Glauber { cg, b, p_one })
    }

    /// Refuses instances where the circuit-level rule does not describe the
    /// vertex weights: incoherent circuits or circuits passing a vertex twice.
    pub fn for_instance(d: &Decomposition, convention: Convention, b: Rational) -> Result<Self> {
        check_instance(d)?;
        Glauber::new(d.circuit_graph(convention), b)
    }

    pub fn graph(&self) -> &CircuitGraph {
        &self.cg
    }

    pub fn b(&self) -> &Rational {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.cg.n()
    }

    pub fn p_one(&self, i: usize) -> f64 {
        self.p_one[i]
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> MoveDraw {
        MoveDraw {
            circuit: rng.gen_range(0..self.n()),
            u: rng.gen::<f64>(),
        }
    }

    /// Applies one move in place; returns whether the state changed.
    pub fn apply(&self, sigma: &mut Configuration, draw: MoveDraw) -> bool {
        let i = draw.circuit;
        let propose_one = draw.u < self.p_one[i];
        if sigma.get(i) == propose_one {
            return false;
        }
        if propose_one && self.cg.neighbors(i).iter().any(|&j| sigma.get(j)) {
            return false;
        }
        sigma.set(i, propose_one);
        true
    }

    pub fn step(&self, sigma: &Configuration, draw: MoveDraw) -> Configuration {
        let mut next = sigma.clone();
        self.apply(&mut next, draw);
        next
    }

    /// Exact one-step law from `sigma`, identical successors merged.
    pub fn exact_successors(&self, sigma: &Configuration) -> Vec<(Configuration, Rational)> {
        let n = self.n();
        let pick = Rational::new(1.into(), (n as i64).into());
        let mut stay = Rational::from_integer(0.into());
        let mut out = Vec::new();
        for i in 0..n {
            let p1 = proposal_prob_one_exact(self.cg.degree(i), &self.b);
            let p0 = Rational::one() - &p1;
            for (value, p) in [(true, p1), (false, p0)] {
                let mass = &pick * &p;
                if num::Zero::is_zero(&mass) {
                    continue;
                }
                let moved = sigma.get(i) != value
                    && (!value || self.cg.neighbors(i).iter().all(|&j| !sigma.get(j)));
                if moved {
                    out.push((sigma.with(i, value), mass));
                } else {
                    stay += mass;
                }
            }
        }
        if !num::Zero::is_zero(&stay) {
            out.push((sigma.clone(), stay));
        }
        out
    }
}

pub fn check_instance(d: &Decomposition) -> Result<()> {
    if !d.is_coherent() {
        return Err(Error::Unsupported(format!(
            "circuits {:?} are incoherent: their x1/x2 slots do not all carry the circuit value",
            d.incoherent_circuits()
        )));
    }
    if let Some(i) = (0..d.n()).find(|&i| d.has_self_intersection(i)) {
        return Err(Error::Unsupported(format!(
            "circuit {i} passes a vertex twice, so it can never take value 1"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub sigma: Configuration,
    pub step_count: u64,
    pub rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new(sigma: Configuration, seed: u64) -> Self {
        ChainState { sigma, step_count: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn advance(&mut self, model: &Glauber, steps: u64) {
        for _ in 0..steps {
            let d = model.draw(&mut self.rng);
            model.apply(&mut self.sigma, d);
        }
        self.step_count += steps;
    }
}

pub fn run(model: &Glauber, sigma0: Configuration, steps: u64, seed: u64) -> Result<ChainState> {
    if !is_valid_on(&sigma0, model.graph()) {
        return Err(Error::InvalidConfiguration);
    }
    let mut s = ChainState::new(sigma0, seed);
    s.advance(model, steps);
    Ok(s)
}

/// Runs from all-zero for `burn_in` steps, then records `count` states,
/// `thinning` steps apart.
pub fn sample_batch(
    model: &Glauber,
    count: usize,
    burn_in: u64,
    thinning: u64,
    seed: u64,
) -> Vec<Configuration> {
    let mut s = ChainState::new(Configuration::zeros(model.n()), seed);
    s.advance(model, burn_in);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        s.advance(model, thinning.max(1));
        out.push(s.sigma.clone());
    }
    out
}
