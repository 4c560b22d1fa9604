//! Partition-function estimation by telescoping ratios.
//!
//! Starting from a `b_0` small enough that `Z(b_0)` is certifiably within
//! `ε/4` of 1, the estimator multiplies sampled ratios `Z(b_{k+1})/Z(b_k)`
//! along a geometric schedule up to the target. Circuits without neighbours
//! are free and contribute an exact factor 2 each.

use num::{FromPrimitive, One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::{ChainState, Glauber};
use crate::configuration::Configuration;
use crate::coupling::mixing_formula;
use crate::decomposition::CircuitGraph;
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

const MIN_SAMPLES: usize = 32;

/// The instance with its isolated circuits removed.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub cg: CircuitGraph,
    pub isolated: usize,
}

pub fn reduce(cg: &CircuitGraph) -> Reduced {
    let keep: Vec<usize> = (0..cg.n()).filter(|&i| !cg.neighbors(i).is_empty()).collect();
    let mut new_id = vec![usize::MAX; cg.n()];
    for (k, &i) in keep.iter().enumerate() {
        new_id[i] = k;
    }
    let neighbors = keep
        .iter()
        .map(|&i| cg.neighbors(i).iter().map(|&j| new_id[j]).collect())
        .collect();
    let degrees = keep.iter().map(|&i| cg.degree(i)).collect();
    Reduced {
        cg: CircuitGraph::new(neighbors, degrees, cg.convention()),
        isolated: cg.n() - keep.len(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Schedule {
    #[serde(serialize_with = "rationals")]
    pub b_values: Vec<Rational>,
    /// Per ratio stage (one fewer than `b_values`).
    pub samples: Vec<usize>,
    pub burn_ins: Vec<u64>,
    /// Upper bounds on the relative variance of each stage's ratio sample.
    pub rel_var_bounds: Vec<f64>,
    pub thinning: u64,
    pub isolated: usize,
    /// Circuits left after removing isolated ones.
    pub n: usize,
    pub delta: u32,
    /// Whether every burn-in comes from the proven mixing bound.
    pub burn_in_proven: bool,
}

fn rationals<S: serde::Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(rational::format))
}

impl Schedule {
    pub fn stages(&self) -> usize {
        self.b_values.len() - 1
    }

    pub fn total_samples(&self) -> usize {
        self.samples.iter().sum()
    }
}

fn normal_quantile(confidence: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// `b_0 = (ε / (4·2^n))^{1/δ_min}` over the non-isolated circuits, so that
/// `Z(b_0) − 1 ≤ 2^n·b_0^{δ_min} ≤ ε/4`.
pub fn base_b(cg: &Reduced, eps: f64) -> f64 {
    let n = cg.cg.n();
    let dmin = cg.cg.degrees().iter().copied().min().unwrap_or(1).max(1);
    (eps / (4.0 * 2f64.powi(n as i32))).powf(1.0 / dmin as f64)
}

fn burn_in(n: usize, delta: u32, b: &Rational, eps: f64) -> (u64, bool) {
    let proven = delta >= 2 && b * Rational::from_integer(delta.into()) <= Rational::one();
    let bd = rational::pow(b, delta);
    let den = &bd + Rational::one() - b * Rational::from_integer(delta.into());
    let t = if den.is_positive() {
        mixing_formula(n, delta, b, eps)
    } else {
        // no contraction guarantee at all; fall back to a generous multiple of n ln n
        50.0 * n as f64 * (n as f64 / eps).ln()
    };
    (t.ceil().max(0.0) as u64, proven)
}

pub fn make_schedule(cg: &CircuitGraph, b_target: &Rational, eps: f64, confidence: f64) -> Result<Schedule> {
    if !b_target.is_positive() {
        return Err(Error::InvalidArgument("b_target must be positive".into()));
    }
    if !(eps > 0.0 && eps < 1.0) || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument("ε and confidence must lie in (0, 1)".into()));
    }
    let red = reduce(cg);
    let n = red.cg.n();
    let delta = red.cg.delta_max();
    let total_degree: u32 = red.cg.degrees().iter().sum();
    let target = rational::to_f64(b_target);

    let mut b_values = Vec::new();
    if n > 0 {
        let b0 = base_b(&red, eps);
        if b0 < target {
            let step = 1.0 + 1.0 / (n as f64 * delta as f64);
            let mut b = b0;
            while b < target {
                b_values.push(Rational::from_f64(b).expect("finite b"));
                b *= step;
            }
        }
    }
    b_values.push(b_target.clone());
    let m = b_values.len() - 1;

    let rel_var_bounds: Vec<f64> = (0..m)
        .map(|k| {
            let lo = rational::to_f64(&b_values[k]);
            let r = (rational::to_f64(&b_values[k + 1]) / lo).powi(total_degree as i32);
            let spread = (r - 1.0).powi(2);
            // Var ≤ E[(X−1)²] ≤ (R−1)²·P(σ ≠ 0) ≤ (R−1)²·(∏(1 + b^{δ_i}) − 1)
            let tail = red.cg.degrees().iter().map(|&d| 1.0 + lo.powi(d as i32)).product::<f64>() - 1.0;
            (spread / (4.0 * r)).min(spread * tail)
        })
        .collect();
    let z = normal_quantile(confidence);
    let eps_stat = eps / 2.0;
    let root_sum: f64 = rel_var_bounds.iter().map(|v| v.sqrt()).sum();
    let samples = rel_var_bounds
        .iter()
        .map(|v| ((v.sqrt() * root_sum * z * z / (eps_stat * eps_stat)).ceil() as usize).max(MIN_SAMPLES))
        .collect();
    let eps_mix = eps / (10.0 * m.max(1) as f64);
    let mut burn_in_proven = true;
    let burn_ins = (0..m)
        .map(|k| {
            let (t, proven) = burn_in(n, delta, &b_values[k], eps_mix);
            burn_in_proven &= proven;
            t
        })
        .collect();
    Ok(Schedule {
        b_values,
        samples,
        burn_ins,
        rel_var_bounds,
        thinning: n.max(1) as u64,
        isolated: red.isolated,
        n,
        delta,
        burn_in_proven,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    /// Sample variance of the per-sample ratio.
    pub variance: f64,
    pub samples: usize,
}

/// Mean of `(b_high/b_low)^{Σ_{σ_i = 1} δ_i}` over samples drawn at `b_low`.
pub fn estimate_ratio(
    b_low: &Rational,
    b_high: &Rational,
    samples: &[Configuration],
    cg: &CircuitGraph,
) -> RatioEstimate {
    if b_low == b_high || samples.is_empty() {
        return RatioEstimate { ratio: 1.0, variance: 0.0, samples: samples.len() };
    }
    let r = rational::to_f64(&(b_high / b_low));
    let xs: Vec<f64> = samples
        .iter()
        .map(|s| r.powi(s.ones().map(|i| cg.degree(i)).sum::<u32>() as i32))
        .collect();
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let variance = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    RatioEstimate { ratio: mean, variance, samples: xs.len() }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageEstimate {
    pub b_low: String,
    pub b_high: String,
    pub burn_in: u64,
    #[serde(flatten)]
    pub ratio: RatioEstimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub z: f64,
    pub eps: f64,
    pub confidence: f64,
    pub seed: u64,
    /// `2^isolated`, the value taken for `Z(b_0)`.
    pub base: f64,
    /// Running products: the estimate of `Z(b_k)` for each schedule point.
    pub partial: Vec<f64>,
    pub stages: Vec<StageEstimate>,
    pub total_samples: usize,
    pub burn_in_proven: bool,
}

/// Stage `k` draws from stream `k` of a generator keyed by `seed`; each stage
/// continues from the previous stage's final state.
pub fn estimate_z(cg: &CircuitGraph, b: &Rational, eps: f64, confidence: f64, seed: u64) -> Result<Estimate> {
    if b.is_negative() {
        return Err(Error::NegativeWeight(rational::format(b)));
    }
    let red = reduce(cg);
    let base = 2f64.powi(red.isolated as i32);
    if b.is_zero() || red.cg.n() == 0 {
        return Ok(Estimate {
            z: base,
            eps,
            confidence,
            seed,
            base,
            partial: vec![base],
            stages: Vec::new(),
            total_samples: 0,
            burn_in_proven: true,
        });
    }
    let schedule = make_schedule(cg, b, eps, confidence)?;
    let mut sigma = Configuration::zeros(red.cg.n());
    let mut z = base;
    let mut partial = vec![z];
    let mut stages = Vec::with_capacity(schedule.stages());
    for k in 0..schedule.stages() {
        let (lo, hi) = (&schedule.b_values[k], &schedule.b_values[k + 1]);
        let model = Glauber::new(red.cg.clone(), lo.clone())?;
        let mut state = ChainState::new(sigma, 0);
        state.rng = ChaCha8Rng::seed_from_u64(seed);
        state.rng.set_stream(k as u64);
        state.advance(&model, schedule.burn_ins[k]);
        let mut samples = Vec::with_capacity(schedule.samples[k]);
        for _ in 0..schedule.samples[k] {
            state.advance(&model, schedule.thinning);
            samples.push(state.sigma.clone());
        }
        let ratio = estimate_ratio(lo, hi, &samples, &red.cg);
        z *= ratio.ratio;
        partial.push(z);
        stages.push(StageEstimate {
            b_low: rational::format(lo),
            b_high: rational::format(hi),
            burn_in: schedule.burn_ins[k],
            ratio,
        });
        sigma = state.sigma;
    }
    Ok(Estimate {
        z,
        eps,
        confidence,
        seed,
        base,
        partial,
        stages,
        total_samples: schedule.total_samples(),
        burn_in_proven: schedule.burn_in_proven,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{decompose, Convention};
    use crate::exactness::{exact_partition, Caps};
    use crate::graph::*;
    use crate::rational::{frac, int};

    fn cg_of(g: LabeledGraph) -> CircuitGraph {
        decompose(&g).unwrap().circuit_graph(Convention::Intersection)
    }

    #[test]
    fn schedule_shape() {
        let cg = cg_of(gen_chain(5).unwrap());
        let s = make_schedule(&cg, &frac(1, 3), 0.05, 0.95).unwrap();
        assert_eq!(s.b_values.last().unwrap(), &frac(1, 3));
        assert!(s.b_values.windows(2).all(|w| w[0] < w[1]));
        assert!(s.b_values[0].is_positive());
        let d: u32 = cg.degrees().iter().sum();
        for w in s.b_values.windows(2) {
            let r = rational::to_f64(&(&w[1] / &w[0]));
            assert!(d as f64 * r.ln() <= 1.0 + 1e-12);
        }
        assert!(s.burn_in_proven);
        assert_eq!(s.samples.len(), s.stages());

        let tiny = make_schedule(&cg, &frac(1, 1_000_000), 0.05, 0.95).unwrap();
        assert_eq!(tiny.stages(), 0);
    }

    #[test]
    fn base_point_is_certified() {
        for g in [gen_torus(2, 2).unwrap(), gen_chain(6).unwrap(), gen_fig2()] {
            let cg = cg_of(g);
            let red = reduce(&cg);
            let b0 = Rational::from_f64(base_b(&red, 0.05)).unwrap();
            let z = exact_partition(&red.cg, &b0, Caps::default()).unwrap();
            assert!(z >= int(1));
            assert!(rational::to_f64(&z) - 1.0 <= 0.05 / 4.0);
        }
    }

    #[test]
    fn ratio_estimator() {
        let cg = cg_of(gen_chain(5).unwrap());
        let zeros = vec![Configuration::zeros(5); 10];
        let r = estimate_ratio(&frac(1, 5), &frac(11, 50), &zeros, &cg);
        assert_eq!(r.ratio, 1.0);
        let r = estimate_ratio(&frac(1, 5), &frac(1, 5), &zeros, &cg);
        assert_eq!(r.ratio, 1.0);

        // chain(5) at 0.2 → 0.22 against the exact ratio
        let (lo, hi) = (frac(1, 5), frac(11, 50));
        let model = Glauber::new(cg.clone(), lo.clone()).unwrap();
        let samples = crate::chain::sample_batch(&model, 100_000, 200, 50, 3);
        let r = estimate_ratio(&lo, &hi, &samples, &cg);
        let exact = rational::to_f64(
            &(exact_partition(&cg, &hi, Caps::default()).unwrap()
                / exact_partition(&cg, &lo, Caps::default()).unwrap()),
        );
        let se = (r.variance / r.samples as f64).sqrt();
        assert!((r.ratio - exact).abs() <= 3.0 * se, "{} vs {exact}", r.ratio);
    }

    #[test]
    fn isolated_circuits_are_exact() {
        let cg = CircuitGraph::new(vec![vec![], vec![]], vec![0, 0], Convention::Neighbor);
        let e = estimate_z(&cg, &frac(1, 2), 0.05, 0.95, 1).unwrap();
        assert_eq!(e.z, 4.0);
        let cg = cg_of(gen_torus(2, 2).unwrap());
        assert_eq!(estimate_z(&cg, &int(0), 0.05, 0.95, 1).unwrap().z, 1.0);
        assert_eq!(reduce(&cg).isolated, 0);
    }

    #[test]
    fn torus_estimate() {
        let cg = cg_of(gen_torus(2, 2).unwrap());
        let e = estimate_z(&cg, &frac(1, 2), 0.05, 0.95, 7).unwrap();
        assert!((e.z / (17.0 / 8.0) - 1.0).abs() <= 0.05, "{}", e.z);
        assert!(e.partial.windows(2).all(|w| w[1] >= w[0]));
        assert!(e.burn_in_proven);
        let again = estimate_z(&cg, &frac(1, 2), 0.05, 0.95, 7).unwrap();
        assert_eq!(e.z, again.z);
    }

    #[test]
    fn outside_region_is_labelled() {
        let cg = cg_of(gen_torus(2, 2).unwrap());
        let e = estimate_z(&cg, &int(1), 0.1, 0.9, 1).unwrap();
        assert!(!e.burn_in_proven);
        assert!((e.z / 7.0 - 1.0).abs() < 0.2);
    }
}
