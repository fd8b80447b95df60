//! Hamiltonian Monte Carlo with dual-averaging step-size adaptation, a
//! jittered fixed trajectory length, and windowed diagonal mass-matrix
//! estimation during warmup.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A differentiable unnormalized log density.
pub(crate) trait HmcTarget: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the log density.
    fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;
}

/// Divergence threshold on the Hamiltonian error relative to the
/// trajectory start, in nats.
const DIVERGENCE_ENERGY: f64 = 1000.0;

/// Target simulation length in the mass-scaled space; the base number of
/// leapfrog steps is this divided by the adapted step size.
const SIM_LENGTH: f64 = 1.5;

/// Nesterov dual averaging for the log step size (Stan's constants).
struct DualAverage {
    mu: f64,
    log_step: f64,
    log_step_avg: f64,
    h_bar: f64,
    count: u64,
}

impl DualAverage {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(initial_step: f64) -> Self {
        DualAverage {
            mu: (10.0 * initial_step).ln(),
            log_step: initial_step.ln(),
            log_step_avg: initial_step.ln(),
            h_bar: 0.0,
            count: 1,
        }
    }

    fn advance(&mut self, accept_stat: f64, target: f64) {
        let w = 1.0 / (self.count as f64 + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (target - accept_stat);
        self.log_step = self.mu - self.h_bar * (self.count as f64).sqrt() / Self::GAMMA;
        let mk = (self.count as f64).powf(-Self::KAPPA);
        self.log_step_avg = mk * self.log_step + (1.0 - mk) * self.log_step_avg;
        self.count += 1;
    }

    fn current(&self) -> f64 {
        self.log_step.exp()
    }

    fn averaged(&self) -> f64 {
        self.log_step_avg.exp()
    }
}

/// Post-warmup output of a single chain.
pub(crate) struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    pub divergent: Vec<bool>,
    pub accept_rate: f64,
    pub step_size: f64,
}

struct Leapfrog<'a, T: HmcTarget> {
    target: &'a T,
    inv_mass: Vec<f64>,
}

impl<'a, T: HmcTarget> Leapfrog<'a, T> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p
            .iter()
            .zip(&self.inv_mass)
            .map(|(pi, vi)| pi * pi * vi)
            .sum::<f64>()
    }

    fn sample_momentum(&self, rng: &mut ChaCha8Rng, p: &mut [f64]) {
        for (pi, vi) in p.iter_mut().zip(&self.inv_mass) {
            let z: f64 = rng.sample(StandardNormal);
            *pi = z / vi.sqrt();
        }
    }

    /// Runs `steps` leapfrog steps from (q, grad, logp). Returns the final
    /// log density, or None on divergence (energy error or non-finite
    /// state). `h0` is the Hamiltonian at the trajectory start.
    #[allow(clippy::too_many_arguments)]
    fn trajectory(
        &self,
        q: &mut [f64],
        p: &mut [f64],
        grad: &mut [f64],
        logp: f64,
        h0: f64,
        step: f64,
        steps: usize,
    ) -> Option<f64> {
        let mut logp = logp;
        for _ in 0..steps {
            for (pi, gi) in p.iter_mut().zip(grad.iter()) {
                *pi += 0.5 * step * gi;
            }
            for ((qi, pi), vi) in q.iter_mut().zip(p.iter()).zip(&self.inv_mass) {
                *qi += step * vi * pi;
            }
            logp = self.target.logp_grad(q, grad);
            if !logp.is_finite() {
                return None;
            }
            for (pi, gi) in p.iter_mut().zip(grad.iter()) {
                *pi += 0.5 * step * gi;
            }
            let h = -logp + self.kinetic(p);
            if !h.is_finite() || h - h0 > DIVERGENCE_ENERGY {
                return None;
            }
        }
        Some(logp)
    }

    /// Acceptance statistic of a single leapfrog step from `q`, used by the
    /// step-size initialization heuristic.
    fn probe_accept(&self, q: &[f64], step: f64, rng: &mut ChaCha8Rng) -> f64 {
        let dim = q.len();
        let mut grad = vec![0.0; dim];
        let logp = self.target.logp_grad(q, &mut grad);
        let mut p = vec![0.0; dim];
        self.sample_momentum(rng, &mut p);
        let h0 = -logp + self.kinetic(&p);
        let mut q1 = q.to_vec();
        match self.trajectory(&mut q1, &mut p, &mut grad, logp, h0, step, 1) {
            Some(logp1) => {
                let h1 = -logp1 + self.kinetic(&p);
                (h0 - h1).exp().min(1.0)
            }
            None => 0.0,
        }
    }

    /// Doubles or halves the step size until one leapfrog step has
    /// acceptance near 1/2.
    fn find_initial_step(&self, q: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        let mut step = 0.1;
        let a = self.probe_accept(q, step, rng);
        if a > 0.5 {
            for _ in 0..40 {
                if self.probe_accept(q, step * 2.0, rng) <= 0.5 {
                    break;
                }
                step *= 2.0;
            }
        } else {
            for _ in 0..40 {
                step *= 0.5;
                if self.probe_accept(q, step, rng) >= 0.5 {
                    break;
                }
            }
        }
        step.clamp(1e-10, 1e3)
    }
}

fn base_steps(step: f64, max_leapfrog: usize) -> usize {
    let cap = ((max_leapfrog as f64 / 1.5).floor() as usize).max(1);
    ((SIM_LENGTH / step).round() as usize).clamp(1, cap)
}

fn jittered_steps(base: usize, max_leapfrog: usize, rng: &mut ChaCha8Rng) -> usize {
    let lo = ((0.5 * base as f64).ceil() as usize).max(1);
    let hi = ((1.5 * base as f64).floor() as usize).clamp(lo, max_leapfrog);
    rng.gen_range(lo..=hi)
}

/// Runs one chain: `warmup` adaptation iterations followed by
/// `iterations - warmup` sampling iterations, all from `init`.
pub(crate) fn run_chain<T: HmcTarget>(
    target: &T,
    init: Vec<f64>,
    iterations: usize,
    warmup: usize,
    target_accept: f64,
    max_leapfrog: usize,
    rng: &mut ChaCha8Rng,
) -> ChainOutput {
    let dim = target.dim();
    let mut lf = Leapfrog {
        target,
        inv_mass: vec![1.0; dim],
    };

    let mut q = init;
    let mut grad = vec![0.0; dim];
    let mut logp = target.logp_grad(&q, &mut grad);

    let mut step = lf.find_initial_step(&q, rng);
    let mut da = DualAverage::new(step);

    // Warmup windows, as fractions of the warmup span: step-size only,
    // variance collection, final step-size re-adaptation.
    let phase1_end = warmup * 15 / 100;
    let phase2_end = warmup * 90 / 100;
    let mut var_sum = vec![0.0; dim];
    let mut var_sq = vec![0.0; dim];
    let mut var_count = 0usize;

    let keep = iterations - warmup;
    let mut draws = Vec::with_capacity(keep);
    let mut divergent_flags = Vec::with_capacity(keep);
    let mut accepted = 0usize;

    let mut p = vec![0.0; dim];
    for iter in 0..iterations {
        let adapting = iter < warmup;
        let base = base_steps(step, max_leapfrog);
        let steps = jittered_steps(base, max_leapfrog, rng);

        lf.sample_momentum(rng, &mut p);
        let h0 = -logp + lf.kinetic(&p);
        let mut q_prop = q.clone();
        let mut grad_prop = grad.clone();
        let mut p_prop = p.clone();
        let result = lf.trajectory(&mut q_prop, &mut p_prop, &mut grad_prop, logp, h0, step, steps);

        let (accept_stat, divergent) = match result {
            Some(logp_prop) => {
                let h1 = -logp_prop + lf.kinetic(&p_prop);
                let a = (h0 - h1).exp().min(1.0);
                if rng.gen::<f64>() < a {
                    q = q_prop;
                    grad = grad_prop;
                    logp = logp_prop;
                    if !adapting {
                        accepted += 1;
                    }
                }
                (a, false)
            }
            None => (0.0, true),
        };

        if adapting {
            da.advance(accept_stat, target_accept);
            step = da.current();
            if iter >= phase1_end && iter < phase2_end {
                for (k, &qk) in q.iter().enumerate() {
                    var_sum[k] += qk;
                    var_sq[k] += qk * qk;
                }
                var_count += 1;
            }
            if iter + 1 == phase2_end && var_count > 4 {
                // Regularized variance estimate, shrunk toward unit scale.
                let nf = var_count as f64;
                let w = nf / (nf + 5.0);
                for k in 0..dim {
                    let mean = var_sum[k] / nf;
                    let var = (var_sq[k] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
                    lf.inv_mass[k] = (w * var + (1.0 - w)).max(1e-8);
                }
                step = lf.find_initial_step(&q, rng);
                da = DualAverage::new(step);
            }
            if iter + 1 == warmup {
                step = da.averaged().clamp(1e-10, 1e3);
            }
        } else {
            draws.push(q.clone());
            divergent_flags.push(divergent);
        }
    }

    ChainOutput {
        draws,
        divergent: divergent_flags,
        accept_rate: accepted as f64 / keep.max(1) as f64,
        step_size: step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Standard normal in `dim` dimensions.
    struct StdNormal {
        dim: usize,
    }

    impl HmcTarget for StdNormal {
        fn dim(&self) -> usize {
            self.dim
        }
        fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
            let mut lp = 0.0;
            for (g, &t) in grad.iter_mut().zip(theta) {
                lp -= 0.5 * t * t;
                *g = -t;
            }
            lp
        }
    }

    /// Anisotropic normal with known scales, to exercise mass adaptation.
    struct ScaledNormal {
        sds: Vec<f64>,
    }

    impl HmcTarget for ScaledNormal {
        fn dim(&self) -> usize {
            self.sds.len()
        }
        fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
            let mut lp = 0.0;
            for ((g, &t), &s) in grad.iter_mut().zip(theta).zip(&self.sds) {
                lp -= 0.5 * (t / s) * (t / s);
                *g = -t / (s * s);
            }
            lp
        }
    }

    fn chain_moments(draws: &[Vec<f64>], k: usize) -> (f64, f64) {
        let xs: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        (crate::stats::mean(&xs), crate::stats::sample_variance(&xs))
    }

    #[test]
    fn samples_standard_normal() {
        let target = StdNormal { dim: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = run_chain(&target, vec![0.1; 3], 4000, 1000, 0.9, 128, &mut rng);
        assert_eq!(out.draws.len(), 3000);
        assert!(out.accept_rate > 0.6, "accept rate {}", out.accept_rate);
        for k in 0..3 {
            let (mean, var) = chain_moments(&out.draws, k);
            assert!(mean.abs() < 0.1, "dim {k} mean {mean}");
            assert!((var - 1.0).abs() < 0.15, "dim {k} var {var}");
        }
        assert!(out.divergent.iter().all(|&d| !d));
    }

    #[test]
    fn mass_adaptation_handles_anisotropy() {
        let target = ScaledNormal {
            sds: vec![0.05, 1.0, 20.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = run_chain(&target, vec![0.0; 3], 6000, 2000, 0.9, 256, &mut rng);
        for (k, &sd) in target.sds.iter().enumerate() {
            let (mean, var) = chain_moments(&out.draws, k);
            assert!(mean.abs() < 0.2 * sd, "dim {k} mean {mean}");
            assert!(
                (var / (sd * sd) - 1.0).abs() < 0.3,
                "dim {k} var ratio {}",
                var / (sd * sd)
            );
        }
    }

    #[test]
    fn identical_seeds_give_identical_chains() {
        let target = StdNormal { dim: 2 };
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = run_chain(&target, vec![0.0; 2], 400, 200, 0.9, 64, &mut r1);
        let b = run_chain(&target, vec![0.0; 2], 400, 200, 0.9, 64, &mut r2);
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.divergent, b.divergent);
    }
}
