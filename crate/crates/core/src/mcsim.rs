//! Finite-N Monte Carlo: exact initial sampling, Gillespie simulation of the
//! magnetization chain and of the tagged-spin pair process, and a windowed
//! estimator of the single-site kernel.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math;
use crate::model::{denom, ModelParams, Spin};

/// Minimum number of accepted paths for a kernel estimate.
pub const MIN_ACCEPTED: usize = 200;

/// Normal quantile of the reported two-sided 95% intervals.
pub const Z95: f64 = 1.959963984540054;

#[inline]
fn rate(sigma: Spin, m: f64, beta_prime: f64) -> f64 {
    let d = denom(m, beta_prime);
    match sigma {
        Spin::Up => 2.0 / d,
        Spin::Down => 2.0 * math::exp(2.0 * beta_prime * m) / d,
    }
}

#[inline]
fn exp_wait<R: Rng + ?Sized>(total: f64, rng: &mut R) -> f64 {
    -math::ln(1.0 - rng.random::<f64>()) / total
}

/// The replica RNG: stream `replica` of a ChaCha8 generator seeded by `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Tabulated inverse CDF of the number of `+1` spins under the Curie-Weiss
/// measure, `P(k) ~ C(n, k) exp(beta (2k - n)^2 / (2n))`.
#[derive(Debug, Clone)]
pub struct InitialSampler {
    cdf: Vec<f64>,
}

impl InitialSampler {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain { what: "n", value: n as f64 });
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain { what: "beta", value: beta });
        }
        let nf = n as f64;
        let lfn = math::lgamma(nf + 1.0);
        let logw: Vec<f64> = (0..=n)
            .map(|k| {
                let kf = k as f64;
                let s = 2.0 * kf - nf;
                lfn - math::lgamma(kf + 1.0) - math::lgamma(nf - kf + 1.0) + beta * s * s / (2.0 * nf)
            })
            .collect();
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for lw in &logw {
            acc += math::exp(lw - top);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(InitialSampler { cdf })
    }

    pub fn n(&self) -> usize {
        self.cdf.len() - 1
    }

    /// Probability of `k` plus spins.
    pub fn pmf(&self, k: usize) -> f64 {
        if k == 0 {
            self.cdf[0]
        } else {
            self.cdf[k] - self.cdf[k - 1]
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>();
        self.cdf.partition_point(|&c| c <= u).min(self.n())
    }
}

/// Draws the number of `+1` spins of an `n`-spin Curie-Weiss configuration.
pub fn sample_initial<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Result<usize> {
    Ok(InitialSampler::new(n, beta)?.sample(rng))
}

/// Magnetization path recorded at fixed times.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampledPath {
    pub n: usize,
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    /// Number of spin flips on `[0, t]`.
    pub jumps: usize,
    /// Integral of the total jump rate along the path.
    pub rate_integral: f64,
}

impl SampledPath {
    /// Largest deviation from a reference path at the recorded times.
    pub fn sup_distance<F: Fn(f64) -> f64>(&self, reference: F) -> f64 {
        self.times.iter().zip(&self.m).map(|(&s, &m)| (m - reference(s)).abs()).fold(0.0, f64::max)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain { what: "n", value: n as f64 });
    }
    Ok(())
}

/// Simulates the magnetization chain of `n` spins from `k0` plus spins up to
/// `params.t` under the `beta'` dynamics. `record` must be sorted and lie in
/// `[0, t]`; the state at each record time is the one after the last event.
pub fn simulate<R: Rng + ?Sized>(n: usize, params: &ModelParams, k0: usize, record: &[f64], rng: &mut R) -> Result<SampledPath> {
    check_n(n)?;
    if k0 > n {
        return Err(Error::Range { what: "k0", value: k0 as f64, limit: n as f64 });
    }
    if record.windows(2).any(|w| w[1] < w[0]) || record.iter().any(|&s| !(0.0..=params.t).contains(&s)) {
        return Err(Error::Domain { what: "record times", value: record.first().copied().unwrap_or(f64::NAN) });
    }
    let bp = params.beta_prime;
    let nf = n as f64;
    let mut k = k0;
    let mut time = 0.0;
    let mut jumps = 0usize;
    let mut rate_integral = 0.0;
    let mut m_out = Vec::with_capacity(record.len());
    let mut next = 0usize;
    loop {
        let m = (2.0 * k as f64 - nf) / nf;
        let up = if k < n { (n - k) as f64 * rate(Spin::Down, m + 1.0 / nf, bp) } else { 0.0 };
        let down = if k > 0 { k as f64 * rate(Spin::Up, m - 1.0 / nf, bp) } else { 0.0 };
        let total = up + down;
        let t_next = time + exp_wait(total, rng);
        let stop = t_next.min(params.t);
        while next < record.len() && record[next] < stop {
            m_out.push(m);
            next += 1;
        }
        if t_next >= params.t {
            rate_integral += total * (params.t - time);
            break;
        }
        rate_integral += total * (t_next - time);
        time = t_next;
        jumps += 1;
        if rng.random::<f64>() * total < up {
            k += 1;
        } else {
            k -= 1;
        }
    }
    let m_end = (2.0 * k as f64 - nf) / nf;
    while m_out.len() < record.len() {
        m_out.push(m_end);
    }
    Ok(SampledPath { n, times: record.to_vec(), m: m_out, jumps, rate_integral })
}

/// State of the pair process: the tagged spin and the number of `+1` spins
/// among the other `n - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainState {
    pub n: usize,
    pub k: usize,
    pub sigma1: Spin,
    pub time: f64,
}

impl ChainState {
    /// Splits an `n`-spin configuration with `k_total` plus spins, drawing
    /// the tagged spin uniformly by exchangeability.
    pub fn from_total<R: Rng + ?Sized>(n: usize, k_total: usize, rng: &mut R) -> Self {
        let up = rng.random::<f64>() * (n as f64) < k_total as f64;
        let (sigma1, k) = if up { (Spin::Up, k_total - 1) } else { (Spin::Down, k_total) };
        ChainState { n, k, sigma1, time: 0.0 }
    }

    /// Magnetization of the untagged spins.
    pub fn rest_magnetization(&self) -> f64 {
        let r = (self.n - 1) as f64;
        (2.0 * self.k as f64 - r) / r
    }

    fn rest_sum(&self) -> f64 {
        2.0 * self.k as f64 - (self.n - 1) as f64
    }

    /// Runs the pair process until `t_end`. Each spin flips at
    /// `c(sigma_i, sum_{j != i} sigma_j / n)`.
    pub fn advance<R: Rng + ?Sized>(&mut self, t_end: f64, beta_prime: f64, rng: &mut R) -> usize {
        let nf = self.n as f64;
        let mut events = 0;
        loop {
            let s_rest = self.rest_sum();
            let s1 = self.sigma1.sign();
            let r1 = rate(self.sigma1, s_rest / nf, beta_prime);
            let up = (self.n - 1 - self.k) as f64 * rate(Spin::Down, (s1 + s_rest + 1.0) / nf, beta_prime);
            let down = self.k as f64 * rate(Spin::Up, (s1 + s_rest - 1.0) / nf, beta_prime);
            let total = r1 + up + down;
            let t_next = self.time + exp_wait(total, rng);
            if t_next >= t_end {
                self.time = t_end;
                return events;
            }
            self.time = t_next;
            events += 1;
            let u = rng.random::<f64>() * total;
            if u < r1 {
                self.sigma1 = self.sigma1.flipped();
            } else if u < r1 + up {
                self.k += 1;
            } else {
                self.k -= 1;
            }
        }
    }
}

/// Windowed estimate of `P(sigma_1(t) = +1 | rest magnetization near m')`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelEstimate {
    pub m_prime: f64,
    pub window: f64,
    pub replicas: usize,
    pub accepted: usize,
    pub plus: usize,
    pub estimate: f64,
    /// Wilson 95% interval.
    pub lo: f64,
    pub hi: f64,
}

impl KernelEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let nt = trials as f64;
    let p = successes as f64 / nt;
    let z2 = z * z;
    let den = 1.0 + z2 / nt;
    let center = (p + z2 / (2.0 * nt)) / den;
    let half = z * math::sqrt(p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)) / den;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Default conditioning window `2 / sqrt(n)`.
pub fn default_window(n: usize) -> f64 {
    2.0 / math::sqrt(n as f64)
}

/// Number of replica batches; results are merged by batch index.
const BATCHES: usize = 64;

/// Estimates the single-site kernel at `m'` from `replicas` runs of the pair
/// process started in the Curie-Weiss measure at `beta` and evolved with
/// `beta'` up to `t`. Replica `i` uses stream `i` of `seed`.
pub fn estimate_kernel<E: Executor>(
    n: usize,
    params: &ModelParams,
    m_prime: f64,
    window: f64,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<KernelEstimate> {
    check_n(n)?;
    if !(window > 0.0) {
        return Err(Error::Domain { what: "window", value: window });
    }
    let beta = params.finite_beta()?;
    let sampler = InitialSampler::new(n, beta)?;
    let batches: Vec<(usize, usize)> = (0..BATCHES)
        .map(|b| (b * replicas / BATCHES, (b + 1) * replicas / BATCHES))
        .filter(|(a, b)| b > a)
        .collect();
    let counts = exec.map(&batches, |&(a, b)| {
        let (mut acc, mut plus) = (0usize, 0usize);
        for i in a..b {
            let mut rng = replica_rng(seed, i as u64);
            let k = sampler.sample(&mut rng);
            let mut st = ChainState::from_total(n, k, &mut rng);
            st.advance(params.t, params.beta_prime, &mut rng);
            if (st.rest_magnetization() - m_prime).abs() <= window {
                acc += 1;
                if st.sigma1 == Spin::Up {
                    plus += 1;
                }
            }
        }
        (acc, plus)
    });
    let (accepted, plus) = counts.iter().fold((0, 0), |(a, p), &(x, y)| (a + x, p + y));
    if accepted < MIN_ACCEPTED {
        return Err(Error::InsufficientAcceptance { accepted, required: MIN_ACCEPTED });
    }
    let (lo, hi) = wilson(plus, accepted, Z95);
    Ok(KernelEstimate {
        m_prime,
        window,
        replicas,
        accepted,
        plus,
        estimate: plus as f64 / accepted as f64,
        lo,
        hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::model::largest_root;
    use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete, DiscreteCDF};
    use std::vec;

    fn chi2_p(stat: f64, dof: usize) -> f64 {
        1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
    }

    #[test]
    fn free_initial_law_is_binomial() {
        let n = 100;
        let s = InitialSampler::new(n, 0.0).unwrap();
        let bin = Binomial::new(0.5, n as u64).unwrap();
        for k in 0..=n {
            assert!((s.pmf(k) - bin.pmf(k as u64)).abs() < 1e-14);
        }
        let mut rng = replica_rng(7, 0);
        let draws = 100_000;
        let mut hist = vec![0usize; n + 1];
        for _ in 0..draws {
            hist[s.sample(&mut rng)] += 1;
        }
        // Pool the tails into cells with expected count >= 5.
        let (mut stat, mut cells, mut obs, mut exp) = (0.0, 0usize, 0.0, 0.0);
        for k in 0..=n {
            obs += hist[k] as f64;
            exp += draws as f64 * bin.pmf(k as u64);
            if exp >= 5.0 && (k == n || draws as f64 * (1.0 - bin.cdf(k as u64)) >= 5.0) {
                stat += (obs - exp) * (obs - exp) / exp;
                cells += 1;
                obs = 0.0;
                exp = 0.0;
            }
        }
        assert!(chi2_p(stat, cells - 1) > 0.01, "stat={stat} cells={cells}");
    }

    #[test]
    fn ordered_initial_law_concentrates() {
        let n = 200;
        let mut rng = replica_rng(11, 0);
        let draws = 5000;
        let mean: f64 = (0..draws)
            .map(|_| {
                let k = sample_initial(n, 2.0, &mut rng).unwrap();
                ((2.0 * k as f64 - n as f64) / n as f64).abs()
            })
            .sum::<f64>()
            / draws as f64;
        assert!((mean - largest_root(2.0)).abs() < 0.05, "{mean}");
    }

    #[test]
    fn initial_law_is_even() {
        let n = 120;
        let s = InitialSampler::new(n, 1.5).unwrap();
        for k in 0..=n {
            assert!((s.pmf(k) - s.pmf(n - k)).abs() < 1e-12);
        }
        let mut rng = replica_rng(3, 0);
        let draws = 20_000;
        let pos = (0..draws).filter(|_| 2 * s.sample(&mut rng) > n).count();
        let neg = (0..draws).filter(|_| 2 * s.sample(&mut rng) < n).count();
        let z = (pos as f64 - neg as f64) / ((pos + neg) as f64).sqrt();
        assert!(z.abs() < 4.0, "{pos} {neg}");
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = ModelParams::new(1.2, 0.7, 0.5).unwrap();
        let rec = [0.0, 0.1, 0.25, 0.5];
        let a = simulate(300, &p, 200, &rec, &mut replica_rng(5, 2)).unwrap();
        let b = simulate(300, &p, 200, &rec, &mut replica_rng(5, 2)).unwrap();
        assert_eq!(a, b);
        let c = simulate(300, &p, 200, &rec, &mut replica_rng(5, 3)).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.m[0], (400.0 - 300.0) / 300.0);
    }

    #[test]
    fn pair_process_steps_are_unit() {
        let mut rng = replica_rng(1, 0);
        let mut st = ChainState::from_total(10, 4, &mut rng);
        let mut singles = 0;
        for _ in 0..2000 {
            let prev = st;
            let ev = st.advance(st.time + 1e-3, 0.5, &mut rng);
            assert!(st.k <= st.n - 1);
            assert!(st.time > prev.time);
            if ev == 1 {
                let dk = (st.k as i64 - prev.k as i64).abs();
                let flip = (st.sigma1 != prev.sigma1) as i64;
                assert_eq!(dk + flip, 1);
                singles += 1;
            }
        }
        assert!(singles > 10);
    }

    #[test]
    fn static_kernel_at_time_zero() {
        let n = 400;
        let beta = 1.25;
        let p = ModelParams::new(beta, 0.0, 0.0).unwrap();
        let m_prime = 0.6;
        let est = estimate_kernel(n, &p, m_prime, default_window(n), 4000, 9, &Sequential).unwrap();
        let exact = (beta * m_prime).exp() / (2.0 * (beta * m_prime).cosh());
        assert!(est.contains(exact), "{est:?} vs {exact}");
    }

    #[test]
    fn wilson_interval() {
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!((hi - lo) > 0.18 && (hi - lo) < 0.2);
        let (lo, hi) = wilson(0, 20, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.1);
    }

    #[test]
    fn too_few_accepted() {
        let p = ModelParams::new(1.25, 0.0, 0.1).unwrap();
        let r = estimate_kernel(1000, &p, 0.2, default_window(1000), 300, 1, &Sequential);
        assert!(matches!(r, Err(Error::InsufficientAcceptance { .. })));
    }
}
