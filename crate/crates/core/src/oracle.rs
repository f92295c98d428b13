//! Reference computations that share no code with the closed forms they
//! check: Monte-Carlo estimators over the sampler, tanh-sinh quadrature,
//! central finite differences and an O(n²) selection reference.

use std::f64::consts::PI;

use rand::Rng;

use crate::dirichlet::{sample_dirichlet, DirichletParams};

/// Monte-Carlo mean of a scalar with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Distance from `value` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        (value - self.mean).abs() / self.std_err
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn estimate(&self) -> Estimate {
        let var = self.m2 / (self.n - 1) as f64;
        Estimate {
            mean: self.mean,
            std_err: (var / self.n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UncertaintyEstimate {
    pub u_dis: Estimate,
    pub u_data: Estimate,
}

/// Estimates from `n` draws ρ ~ Dir(α): U_data as E[H(ρ)] and U_dis as
/// E[Σ ρ_c ln(ρ_c / ρ̄_c)], the expected KL from ρ to the mean.
pub fn mc_uncertainty<R: Rng + ?Sized>(
    params: &DirichletParams,
    n: usize,
    rng: &mut R,
) -> UncertaintyEstimate {
    let a0: f64 = params.alpha().iter().sum();
    let mean: Vec<f64> = params.alpha().iter().map(|a| a / a0).collect();
    let (mut dis, mut data) = (Welford::default(), Welford::default());
    for _ in 0..n {
        let rho = sample_dirichlet(params, rng);
        let (mut h, mut kl) = (0.0, 0.0);
        for (&r, &m) in rho.as_slice().iter().zip(&mean) {
            if r > 0.0 {
                h -= r * r.ln();
                kl += r * (r / m).ln();
            }
        }
        data.push(h);
        dis.push(kl);
    }
    UncertaintyEstimate {
        u_dis: dis.estimate(),
        u_data: data.estimate(),
    }
}

/// Per-component sample mean of ρ ~ Dir(α).
pub fn mc_mean<R: Rng + ?Sized>(params: &DirichletParams, n: usize, rng: &mut R) -> Vec<Estimate> {
    let mut acc = vec![Welford::default(); params.num_classes()];
    for _ in 0..n {
        let rho = sample_dirichlet(params, rng);
        for (w, &r) in acc.iter_mut().zip(rho.as_slice()) {
            w.push(r);
        }
    }
    acc.iter().map(Welford::estimate).collect()
}

/// A tanh-sinh node on (0, 1), with the endpoint distances and the
/// quadrature weight available in log space.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub u: f64,
    /// 1 − u, computed without cancellation.
    pub v: f64,
    pub ln_u: f64,
    pub ln_v: f64,
    /// ln(du/dt) at this node.
    pub ln_weight: f64,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Node {
    fn at(t: f64) -> Self {
        // u = σ(s) with s = π sinh t, so du/dt = σ(s)σ(−s)·π·cosh t
        let s = PI * t.sinh();
        let (ln_u, ln_v) = (-softplus(-s), -softplus(s));
        Self {
            u: ln_u.exp(),
            v: ln_v.exp(),
            ln_u,
            ln_v,
            ln_weight: ln_u + ln_v + (PI * t.cosh()).ln(),
        }
    }
}

/// Tanh-sinh quadrature on (0, 1) of an integrand that returns its own
/// weighted value `w·f(u)` given a [`Node`]; this lets integrands with
/// endpoint singularities combine the weight in log space. Step halving
/// stops once successive estimates agree to `tol` (absolute). Returns the
/// estimate and the last change.
pub fn tanh_sinh_weighted(f: impl Fn(&Node) -> f64, tol: f64) -> (f64, f64) {
    const T_MAX: f64 = 6.5;
    let eval = |t: f64| f(&Node::at(t));
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut est = sum * h;
    let mut change = f64::INFINITY;
    for _ in 0..12 {
        h /= 2.0;
        // new nodes are the odd multiples of the halved step
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h;
        change = (next - est).abs();
        est = next;
        if change < tol {
            break;
        }
    }
    (est, change)
}

/// Tanh-sinh quadrature of a bounded-weight integrand `f(u, 1 − u)`.
pub fn tanh_sinh_unit(f: impl Fn(f64, f64) -> f64, tol: f64) -> (f64, f64) {
    tanh_sinh_weighted(
        |n| {
            let w = n.ln_weight.exp();
            if w == 0.0 {
                0.0
            } else {
                w * f(n.u, n.v)
            }
        },
        tol,
    )
}

/// KL[Beta(a, b) ‖ U(0, 1)] by quadrature, normalizing the density
/// numerically so no special functions are involved.
pub fn beta_kl_to_uniform_quadrature(a: f64, b: f64, tol: f64) -> f64 {
    let log_q = |n: &Node| (a - 1.0) * n.ln_u + (b - 1.0) * n.ln_v;
    // scale by the peak so both integrals are O(1) and `tol` is meaningful
    let peak = if a > 1.0 && b > 1.0 {
        let m = (a - 1.0) / (a + b - 2.0);
        (a - 1.0) * m.ln() + (b - 1.0) * (1.0 - m).ln()
    } else {
        0.0
    };
    let (z, _) = tanh_sinh_weighted(|n| (log_q(n) - peak + n.ln_weight).exp(), tol * 1e-2);
    let (m, _) = tanh_sinh_weighted(
        |n| {
            let lq = log_q(n);
            (lq - peak + n.ln_weight).exp() * lq
        },
        tol * 1e-2,
    );
    m / z - z.ln() - peak
}

/// ψ(y + 1) − ψ(x + 1) = ∫₀¹ (tˣ − tʸ) / (1 − t) dt for x, y > −1.
pub fn digamma_gap_quadrature(y: f64, x: f64, tol: f64) -> f64 {
    tanh_sinh_weighted(
        |n| {
            // tˣ − tʸ = −tˣ·expm1((y − x) ln t), and w / (1 − t) in log space
            let diff = -(x * n.ln_u).exp() * ((y - x) * n.ln_u).exp_m1();
            diff * (n.ln_weight - n.ln_v).exp()
        },
        tol,
    )
    .0
}

/// U_data = Σ ρ̄_c [ψ(α₀+1) − ψ(α_c+1)] with the digamma differences taken
/// by quadrature.
pub fn data_uncertainty_quadrature(params: &DirichletParams, tol: f64) -> f64 {
    let a = params.alpha();
    let a0: f64 = a.iter().sum();
    a.iter()
        .map(|&ac| ac / a0 * digamma_gap_quadrature(a0, ac, tol))
        .sum()
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, |b|, floor/rel)` over components, i.e. the
/// relative error where absolute errors below `floor` count as passing at
/// tolerance `rel`.
pub fn gradient_error(analytic: &[f64], numeric: &[f64], rel: f64, floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(floor / rel))
        .fold(0.0, f64::max)
}

/// Members of the top `k` of `candidates` by `scores`, found by counting
/// for each candidate how many others outrank it (higher score, or equal
/// score at a lower index).
pub fn brute_force_top(scores: &[f64], candidates: &[usize], k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&i| {
            let beaten_by = candidates
                .iter()
                .filter(|&&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
                .count();
            beaten_by < k
        })
        .collect();
    out.sort_unstable();
    out
}

/// Exhaustive two-round reference: shortlist of `min(κb, n)` by `first`,
/// then `b` of those by `second`.
pub fn brute_force_two_round(first: &[f64], second: &[f64], kappa: usize, b: usize) -> Vec<usize> {
    let n = first.len();
    let all: Vec<usize> = (0..n).collect();
    let shortlist = brute_force_top(first, &all, (kappa * b).min(n));
    brute_force_top(second, &shortlist, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadrature_polynomials_and_singularities() {
        let (v, _) = tanh_sinh_unit(|u, _| u * u, 1e-14);
        assert!((v - 1.0 / 3.0).abs() < 1e-13);
        // ∫ u^{-1/2} = 2
        let (v, _) = tanh_sinh_unit(|u, _| u.powf(-0.5), 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
        // ∫ ln u = −1
        let (v, _) = tanh_sinh_unit(|u, _| u.ln(), 1e-12);
        assert!((v + 1.0).abs() < 1e-10);
    }

    #[test]
    fn beta_kl_known_cases() {
        assert!((beta_kl_to_uniform_quadrature(1.0, 1.0, 1e-10)).abs() < 1e-12);
        let want = 2f64.ln() - 0.5;
        assert!((beta_kl_to_uniform_quadrature(2.0, 1.0, 1e-10) - want).abs() < 1e-10);
    }

    #[test]
    fn digamma_gap_harmonic() {
        // ψ(4) − ψ(1) = 1 + 1/2 + 1/3
        let v = digamma_gap_quadrature(3.0, 0.0, 1e-12);
        assert!((v - 11.0 / 6.0).abs() < 1e-10);
        let v = digamma_gap_quadrature(2.5, 2.5, 1e-12);
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn finite_difference_quadratic() {
        let g = central_difference(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, 5.0], 1e-4);
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
        assert!(gradient_error(&[1.0, 1e-9], &[1.00001, 2e-9], 1e-4, 1e-6) <= 1e-5 + 1e-12);
    }

    #[test]
    fn brute_force_ties() {
        assert_eq!(brute_force_top(&[1.0, 2.0, 2.0, 0.5], &[0, 1, 2, 3], 2), vec![1, 2]);
        assert_eq!(brute_force_top(&[3.0, 3.0, 3.0], &[0, 1, 2], 1), vec![0]);
    }

    #[test]
    fn mc_of_flat_dirichlet() {
        // Dir(1,1): E[H] = 1/2, and ρ₁ uniform with mean 1/2
        let p = DirichletParams::new(vec![1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let est = mc_uncertainty(&p, 50_000, &mut rng);
        assert!(est.u_data.z_score(0.5) < 4.0);
        let m = mc_mean(&p, 50_000, &mut rng);
        assert!(m[0].z_score(0.5) < 4.0);
    }
}
