//! Brute-force ground truth for small instances.
//!
//! Everything that must hold exactly (partition function, stationarity,
//! detailed balance, the potential metric) is computed over rationals. Only
//! the total-variation curves use `f64`, after the exact matrix is built,
//! with an explicit bound on the accumulated rounding error.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::Mutex;

use num::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::Glauber;
use crate::configuration::{unnormalized_weight, Configuration};
use crate::coupling::{blocked_set, potential_w};
use crate::decomposition::CircuitGraph;
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    pub max_circuits: usize,
    pub max_states: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_circuits: 20, max_states: 5000 }
    }
}

/// Ω: the independent sets of the circuit adjacency graph, ordered by mask.
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub states: Vec<Configuration>,
    pub index: HashMap<Configuration, usize>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn id(&self, s: &Configuration) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn zero_state(&self) -> usize {
        0
    }
}

pub fn enumerate_omega(cg: &CircuitGraph, caps: Caps) -> Result<StateSpace> {
    let n = cg.n();
    if n > caps.max_circuits {
        return Err(Error::CapExceeded(format!(
            "{n} circuits exceeds the cap of {}",
            caps.max_circuits
        )));
    }
    let nbr_mask: Vec<u64> = (0..n)
        .map(|i| cg.neighbors(i).iter().fold(0u64, |m, &j| m | 1 << j))
        .collect();
    let mut states = Vec::new();
    for mask in 0..(1u64 << n) {
        let independent = (0..n).all(|i| mask >> i & 1 == 0 || mask & nbr_mask[i] == 0);
        if independent {
            if states.len() == caps.max_states {
                return Err(Error::CapExceeded(format!(
                    "more than {} valid configurations",
                    caps.max_states
                )));
            }
            states.push(Configuration::from_mask(mask, n));
        }
    }
    let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(StateSpace { states, index })
}

pub fn exact_partition(cg: &CircuitGraph, b: &Rational, caps: Caps) -> Result<Rational> {
    let space = enumerate_omega(cg, caps)?;
    Ok(partition_over(&space, cg, b))
}

pub fn partition_over(space: &StateSpace, cg: &CircuitGraph, b: &Rational) -> Rational {
    space.states.iter().map(|s| unnormalized_weight(s, cg, b)).sum()
}

/// μ(σ) in the order of `space.states`.
pub fn exact_mu(space: &StateSpace, cg: &CircuitGraph, b: &Rational) -> Vec<Rational> {
    let weights: Vec<Rational> = space.states.iter().map(|s| unnormalized_weight(s, cg, b)).collect();
    let z: Rational = weights.iter().sum();
    weights.into_iter().map(|w| w / &z).collect()
}

/// Sparse rows; `rows[i]` holds `(j, P_ij)` sorted by `j`, zeros omitted.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub rows: Vec<Vec<(usize, Rational)>>,
}

impl TransitionMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Rational {
        match self.rows[i].binary_search_by_key(&j, |(k, _)| *k) {
            Ok(pos) => self.rows[i][pos].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn row_sum(&self, i: usize) -> Rational {
        self.rows[i].iter().map(|(_, p)| p).sum()
    }

    pub fn to_f64(&self) -> Vec<Vec<(usize, f64)>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(j, p)| (*j, rational::to_f64(p))).collect())
            .collect()
    }
}

pub fn transition_matrix(space: &StateSpace, model: &Glauber) -> TransitionMatrix {
    let rows = space
        .states
        .iter()
        .map(|s| {
            let mut row: Vec<(usize, Rational)> = model
                .exact_successors(s)
                .into_iter()
                .map(|(t, p)| (space.id(&t).expect("successor inside Ω"), p))
                .collect();
            row.sort_by_key(|(j, _)| *j);
            row
        })
        .collect();
    TransitionMatrix { rows }
}

/// `max_i ½ Σ_j |P^t_ij − μ_j|` for `t = 0..=t_max`, with a rigorous bound on
/// the floating-point error of each entry.
#[derive(Clone, Debug, Serialize)]
pub struct TvCurve {
    pub delta_max: Vec<f64>,
    pub error_bound: Vec<f64>,
}

impl TvCurve {
    /// Largest value the exact curve can take at `t`.
    pub fn upper(&self, t: usize) -> f64 {
        self.delta_max[t] + self.error_bound[t]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,delta_max\n");
        for (t, d) in self.delta_max.iter().enumerate() {
            s.push_str(&format!("{t},{d:.15e}\n"));
        }
        s
    }
}

pub fn tv_curve(p: &TransitionMatrix, mu: &[Rational], t_max: usize) -> TvCurve {
    let pd: Vec<Vec<(usize, Dd)>> = p
        .rows
        .iter()
        .map(|r| r.iter().map(|(j, x)| (*j, Dd::from_rational(x))).collect())
        .collect();
    let mud: Vec<Dd> = mu.iter().map(Dd::from_rational).collect();
    let m = pd.len();
    let max_nnz = pd.iter().map(|r| r.len()).max().unwrap_or(1);
    let per_start: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut x = vec![Dd::ZERO; m];
            x[i] = Dd::from(1.0);
            let mut next = vec![Dd::ZERO; m];
            let mut out = Vec::with_capacity(t_max + 1);
            for t in 0..=t_max {
                let l1 = x.iter().zip(&mud).fold(Dd::ZERO, |acc, (a, b)| acc.add(a.sub(*b).abs()));
                out.push(0.5 * l1.hi);
                if t == t_max {
                    break;
                }
                next.iter_mut().for_each(|v| *v = Dd::ZERO);
                for (k, xk) in x.iter().enumerate() {
                    if xk.hi != 0.0 {
                        for &(j, pkj) in &pd[k] {
                            next[j] = next[j].add(xk.mul(pkj));
                        }
                    }
                }
                std::mem::swap(&mut x, &mut next);
            }
            out
        })
        .collect();
    let delta_max = (0..=t_max)
        .map(|t| per_start.iter().map(|v| v[t]).fold(0.0, f64::max))
        .collect();
    // Each double-double operation is accurate to a few u² relative to the
    // mass it touches, a stochastic matrix does not amplify earlier errors,
    // and the final rounding to f64 costs at most u.
    let u = f64::EPSILON / 2.0;
    let error_bound = (0..=t_max)
        .map(|t| 0.5 * u * u * (8.0 * (t * (max_nnz + 2)) as f64 + 4.0 * m as f64) + 2.0 * u)
        .collect();
    TvCurve { delta_max, error_bound }
}

/// Unevaluated sum `hi + lo` carrying about 106 bits.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn from_rational(r: &Rational) -> Self {
        let hi = rational::to_f64(r);
        let rest = r - Rational::from_float(hi).expect("finite");
        Dd { hi, lo: rational::to_f64(&rest) }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn fast_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = Dd::two_sum(self.hi, o.hi);
        Dd::fast_two_sum(s, e + self.lo + o.lo)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::fast_two_sum(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn abs(self) -> Dd {
        if self.hi < 0.0 {
            Dd { hi: -self.hi, lo: -self.lo }
        } else {
            self
        }
    }
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Empirical distribution of `samples` over `space`, as frequencies.
pub fn empirical(space: &StateSpace, samples: impl IntoIterator<Item = Configuration>) -> Vec<f64> {
    let mut counts = vec![0u64; space.len()];
    let mut total = 0u64;
    for s in samples {
        counts[space.id(&s).expect("sample inside Ω")] += 1;
        total += 1;
    }
    counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
}

/// `max_{i,j} |μ_i P_ij − μ_j P_ji|`.
pub fn check_detailed_balance(p: &TransitionMatrix, mu: &[Rational]) -> Rational {
    let mut worst = Rational::zero();
    for (i, row) in p.rows.iter().enumerate() {
        for (j, pij) in row {
            let r = (&mu[i] * pij - &mu[*j] * p.get(*j, i)).abs();
            if r > worst {
                worst = r;
            }
        }
    }
    worst
}

/// `max_j |(μP)_j − μ_j|`.
pub fn check_stationarity(p: &TransitionMatrix, mu: &[Rational]) -> Rational {
    let mut mp = vec![Rational::zero(); mu.len()];
    for (i, row) in p.rows.iter().enumerate() {
        for (j, pij) in row {
            mp[*j] += &mu[i] * pij;
        }
    }
    mp.iter()
        .zip(mu)
        .map(|(a, b)| (a - b).abs())
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Strong connectivity of the positive-transition digraph plus a positive
/// diagonal entry.
pub fn check_irreducible_aperiodic(p: &TransitionMatrix) -> bool {
    let m = p.len();
    if m == 0 {
        return false;
    }
    let aperiodic = (0..m).any(|i| p.get(i, i).is_positive());
    let mut fwd = vec![Vec::new(); m];
    let mut bwd = vec![Vec::new(); m];
    for (i, row) in p.rows.iter().enumerate() {
        for (j, pij) in row {
            if pij.is_positive() {
                fwd[i].push(*j);
                bwd[*j].push(i);
            }
        }
    }
    let reach_all = |adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    aperiodic && reach_all(&fwd) && reach_all(&bwd)
}

/// Shortest-path extension of the adjacent-pair potential to all of Ω.
///
/// States differing in one circuit `i` (the one with `σ(C_i) = 0` playing the
/// role of σ) are joined by an edge of length `δ_i − w·|B(σ, C_i)|`.
pub struct PhiMetric<'a> {
    space: &'a StateSpace,
    adj: Vec<Vec<(usize, Rational)>>,
    cache: Mutex<HashMap<usize, Vec<Option<Rational>>>>,
}

impl<'a> PhiMetric<'a> {
    pub fn new(space: &'a StateSpace, cg: &CircuitGraph, b: &Rational) -> Result<Self> {
        let w = potential_w(b, cg.delta_max());
        let mut adj = vec![Vec::new(); space.len()];
        for (a, s) in space.states.iter().enumerate() {
            for i in 0..cg.n() {
                if s.get(i) {
                    continue;
                }
                let up = s.with(i, true);
                let Some(c) = space.id(&up) else { continue };
                let len = Rational::from_integer(cg.degree(i).into())
                    - &w * Rational::from_integer((blocked_set(s, i, cg).len() as i64).into());
                if len.is_negative() {
                    return Err(Error::OutsideProvenRegion(format!(
                        "negative potential {} between {s} and {up}",
                        rational::format(&len)
                    )));
                }
                adj[a].push((c, len.clone()));
                adj[c].push((a, len));
            }
        }
        Ok(PhiMetric { space, adj, cache: Mutex::new(HashMap::new()) })
    }

    pub fn space(&self) -> &StateSpace {
        self.space
    }

    /// Length of the direct edge between two states, if they are adjacent.
    pub fn edge(&self, a: usize, c: usize) -> Option<Rational> {
        self.adj[a].iter().find(|(k, _)| *k == c).map(|(_, l)| l.clone())
    }

    fn distances_from(&self, src: usize) -> Vec<Option<Rational>> {
        if let Some(d) = self.cache.lock().unwrap().get(&src) {
            return d.clone();
        }
        let mut dist: Vec<Option<Rational>> = vec![None; self.space.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = Some(Rational::zero());
        heap.push(Reverse((Rational::zero(), src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u].as_ref().is_some_and(|best| *best < d) {
                continue;
            }
            for (v, len) in &self.adj[u] {
                let cand = &d + len;
                if dist[*v].as_ref().is_none_or(|cur| cand < *cur) {
                    dist[*v] = Some(cand.clone());
                    heap.push(Reverse((cand, *v)));
                }
            }
        }
        self.cache.lock().unwrap().insert(src, dist.clone());
        dist
    }

    pub fn distance_ids(&self, a: usize, c: usize) -> Result<Rational> {
        self.distances_from(a)[c]
            .clone()
            .ok_or_else(|| Error::InvalidArgument(format!("states {a} and {c} are disconnected")))
    }

    pub fn distance(&self, s: &Configuration, t: &Configuration) -> Result<Rational> {
        let a = self.space.id(s).ok_or(Error::InvalidConfiguration)?;
        let c = self.space.id(t).ok_or(Error::InvalidConfiguration)?;
        self.distance_ids(a, c)
    }
}

pub fn phi_metric(
    sigma: &Configuration,
    eta: &Configuration,
    cg: &CircuitGraph,
    b: &Rational,
    caps: Caps,
) -> Result<Rational> {
    let space = enumerate_omega(cg, caps)?;
    PhiMetric::new(&space, cg, b)?.distance(sigma, eta)
}

/// Exact summary used by the CLI `exact --report`.
#[derive(Clone, Debug, Serialize)]
pub struct ExactReport {
    pub states: usize,
    pub z: String,
    pub detailed_balance_residual: String,
    pub stationarity_residual: String,
    pub irreducible_aperiodic: bool,
}

pub fn exact_report(cg: &CircuitGraph, b: &Rational, caps: Caps) -> Result<ExactReport> {
    let space = enumerate_omega(cg, caps)?;
    let model = Glauber::new(cg.clone(), b.clone())?;
    let p = transition_matrix(&space, &model);
    let mu = exact_mu(&space, cg, b);
    Ok(ExactReport {
        states: space.len(),
        z: rational::format(&partition_over(&space, cg, b)),
        detailed_balance_residual: rational::format(&check_detailed_balance(&p, &mu)),
        stationarity_residual: rational::format(&check_stationarity(&p, &mu)),
        irreducible_aperiodic: check_irreducible_aperiodic(&p),
    })
}

/// Sum of a probability vector; handy for asserting normalisation.
pub fn total(mu: &[Rational]) -> Rational {
    mu.iter().fold(Rational::zero(), |acc, x| acc + x)
}

pub fn is_probability(mu: &[Rational]) -> bool {
    total(mu).is_one() && mu.iter().all(|x| !x.is_negative())
}
