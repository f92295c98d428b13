//! Self-checks of the closed forms against independent references, with
//! an optional injected fault to confirm that checks can fail.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::active::duc_select;
use crate::dirichlet::special::digamma_pos;
use crate::dirichlet::DirichletParams;
use crate::error::{Error, Result};
use crate::evidential::{uncertainty_report_with, EvidenceMapConfig, UncertaintyReport};
use crate::losses::{
    evidential_objective, kl_loss, kl_to_uniform, loss_gradients, LabeledLogits, LogitBatch, LossWeights,
    OneHotLabel,
};
use crate::network::{Activation, NetworkParams};
use crate::oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    /// Reduced sample counts; a few seconds.
    Quick,
    Full,
}

impl FromStr for VerifyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(VerifyLevel::Quick),
            "full" => Ok(VerifyLevel::Full),
            _ => Err(Error::config("level", format!("expected `quick` or `full`, got `{s}`"))),
        }
    }
}

/// Deliberate numerical faults for exercising the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Multiply every digamma value used by the uncertainty closed forms
    /// by `1 + eps`.
    DigammaScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub level: VerifyLevel,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            level: VerifyLevel::Full,
            seed: 20240607,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub fault: Option<Fault>,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>12} {:>12}  {:<6} detail", "check", "error", "tolerance", "result")?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<22} {:>12.3e} {:>12.3e}  {:<6} {}",
                c.name,
                c.error,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            )?;
        }
        Ok(())
    }
}

struct Sizes {
    decomposition: usize,
    decomposition_quadrature: usize,
    mc_params: usize,
    mc_draws: usize,
    mean_params: usize,
    mean_draws: usize,
    kl_cases: usize,
    logit_configs: usize,
    network_configs: usize,
    selection_pools: usize,
    selection_max_n: usize,
}

impl VerifyLevel {
    fn sizes(self) -> Sizes {
        match self {
            VerifyLevel::Quick => Sizes {
                decomposition: 200,
                decomposition_quadrature: 10,
                mc_params: 10,
                mc_draws: 20_000,
                mean_params: 5,
                mean_draws: 100_000,
                kl_cases: 5,
                logit_configs: 20,
                network_configs: 6,
                selection_pools: 50,
                selection_max_n: 200,
            },
            VerifyLevel::Full => Sizes {
                decomposition: 1000,
                decomposition_quadrature: 50,
                mc_params: 50,
                mc_draws: 200_000,
                mean_params: 10,
                mean_draws: 1_000_000,
                kl_cases: 20,
                logit_configs: 100,
                network_configs: 20,
                selection_pools: 200,
                selection_max_n: 1000,
            },
        }
    }

    /// Allowed distance in standard errors for Monte-Carlo checks.
    fn z_tolerance(self) -> f64 {
        match self {
            VerifyLevel::Quick => 4.0,
            VerifyLevel::Full => 3.0,
        }
    }
}

/// α with components log-uniform on `[lo, hi]`.
pub fn random_alpha<R: Rng + ?Sized>(rng: &mut R, classes: usize, lo: f64, hi: f64) -> DirichletParams {
    let (a, b) = (lo.ln(), hi.ln());
    let alpha = (0..classes).map(|_| rng.random_range(a..=b).exp()).collect();
    DirichletParams::new(alpha).expect("positive components")
}

pub fn run_verify(opts: &VerifyOptions) -> VerifyReport {
    let sizes = opts.level.sizes();
    let digamma = move |x: f64| match opts.fault {
        Some(Fault::DigammaScale(eps)) => digamma_pos(x) * (1.0 + eps),
        None => digamma_pos(x),
    };
    let report = |p: &DirichletParams| uncertainty_report_with(p, digamma);
    let z_tol = opts.level.z_tolerance();
    let rng = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
        r.set_stream(stream);
        r
    };

    let mut checks = Vec::new();
    checks.push(timed("decomposition", || {
        check_decomposition(&report, &sizes, &mut rng(1))
    }));
    let (dis, data) = check_mc_uncertainty(&report, &sizes, z_tol, &mut rng(2));
    checks.push(dis);
    checks.push(data);
    checks.push(timed("sampler_mean", || check_sampler_mean(&sizes, z_tol, &mut rng(3))));
    checks.push(timed("kl_quadrature", || check_kl_quadrature(&sizes, &mut rng(4))));
    checks.push(timed("kl_analytic", check_kl_analytic));
    checks.push(timed("gradient_logits", || check_logit_gradients(&sizes, &mut rng(5))));
    checks.push(timed("gradient_network", || check_network_gradients(&sizes, &mut rng(6))));
    checks.push(timed("selection_bruteforce", || check_selection(&sizes, &mut rng(7))));
    VerifyReport {
        level: opts.level,
        fault: opts.fault,
        checks,
    }
}

struct Measured {
    error: f64,
    tolerance: f64,
    detail: String,
}

fn timed(name: &str, f: impl FnOnce() -> Measured) -> CheckResult {
    let start = Instant::now();
    let m = f();
    CheckResult {
        name: name.to_string(),
        passed: m.error <= m.tolerance,
        error: m.error,
        tolerance: m.tolerance,
        seconds: start.elapsed().as_secs_f64(),
        detail: m.detail,
    }
}

fn check_decomposition(
    report: &impl Fn(&DirichletParams) -> UncertaintyReport,
    sizes: &Sizes,
    rng: &mut ChaCha8Rng,
) -> Measured {
    let (mut identity, mut quad) = (0.0f64, 0.0f64);
    for i in 0..sizes.decomposition {
        let c = rng.random_range(2..=10);
        let p = random_alpha(rng, c, 0.1, 100.0);
        let r = report(&p);
        let a0 = p.alpha0();
        let h: f64 = p.alpha().iter().map(|a| -(a / a0) * (a / a0).ln()).sum();
        identity = identity.max((r.u_dis + r.u_data - h).abs());
        if i < sizes.decomposition_quadrature {
            let reference = oracle::data_uncertainty_quadrature(&p, 1e-13);
            quad = quad.max((r.u_data - reference).abs());
        }
    }
    Measured {
        error: identity.max(quad),
        tolerance: 1e-9,
        detail: format!(
            "|U_dis+U_data-H| max {identity:.2e} over {}; |U_data-quadrature| max {quad:.2e} over {}",
            sizes.decomposition, sizes.decomposition_quadrature
        ),
    }
}

fn check_mc_uncertainty(
    report: &impl Fn(&DirichletParams) -> UncertaintyReport,
    sizes: &Sizes,
    z_tol: f64,
    rng: &mut ChaCha8Rng,
) -> (CheckResult, CheckResult) {
    let start = Instant::now();
    let (mut z_dis, mut z_data) = (0.0f64, 0.0f64);
    for i in 0..sizes.mc_params {
        let c = [2, 3, 5][i % 3];
        let p = random_alpha(rng, c, 0.1, 100.0);
        let r = report(&p);
        let est = oracle::mc_uncertainty(&p, sizes.mc_draws, rng);
        z_dis = z_dis.max(est.u_dis.z_score(r.u_dis));
        z_data = z_data.max(est.u_data.z_score(r.u_data));
    }
    let seconds = start.elapsed().as_secs_f64();
    let detail = format!(
        "max |z| over {} alpha x {} draws",
        sizes.mc_params, sizes.mc_draws
    );
    let mk = |name: &str, z: f64| CheckResult {
        name: name.into(),
        error: z,
        tolerance: z_tol,
        passed: z <= z_tol,
        seconds,
        detail: detail.clone(),
    };
    (mk("mc_u_dis", z_dis), mk("mc_u_data", z_data))
}

fn check_sampler_mean(sizes: &Sizes, z_tol: f64, rng: &mut ChaCha8Rng) -> Measured {
    let mut z = 0.0f64;
    for _ in 0..sizes.mean_params {
        let c = rng.random_range(2..=6);
        let p = random_alpha(rng, c, 0.1, 100.0);
        let a0 = p.alpha0();
        for (est, &a) in oracle::mc_mean(&p, sizes.mean_draws, rng).iter().zip(p.alpha()) {
            z = z.max(est.z_score(a / a0));
        }
    }
    Measured {
        error: z,
        tolerance: z_tol,
        detail: format!("max |z| over {} alpha x {} draws", sizes.mean_params, sizes.mean_draws),
    }
}

fn check_kl_quadrature(sizes: &Sizes, rng: &mut ChaCha8Rng) -> Measured {
    let mut err = 0.0f64;
    for _ in 0..sizes.kl_cases {
        let a = rng.random_range(0.3f64.ln()..=20f64.ln()).exp();
        let b = rng.random_range(0.3f64.ln()..=20f64.ln()).exp();
        // general α̃ directly, and through kl_loss where the true class is
        // stripped to 1
        let closed = kl_to_uniform(&DirichletParams::new(vec![a, b]).expect("positive"));
        let reference = oracle::beta_kl_to_uniform_quadrature(a, b, 1e-10);
        err = err.max((closed - reference).abs());
        let stripped = kl_loss(
            &DirichletParams::new(vec![a, b]).expect("positive"),
            &OneHotLabel::new(1, 2).expect("valid"),
        ) * 2.0;
        let reference = oracle::beta_kl_to_uniform_quadrature(a, 1.0, 1e-10);
        err = err.max((stripped - reference).abs());
    }
    Measured {
        error: err,
        tolerance: 1e-6,
        detail: format!("max abs error over {} Beta(a, b)", sizes.kl_cases),
    }
}

fn check_kl_analytic() -> Measured {
    let label = OneHotLabel::new(1, 2).expect("valid");
    let kl = |a: f64| {
        kl_loss(&DirichletParams::new(vec![a, 5.0]).expect("positive"), &label) * 2.0
    };
    let err = (kl(2.0) - (2f64.ln() - 0.5))
        .abs()
        .max((kl(3.0) - (3f64.ln() - 2.0 / 3.0)).abs());
    Measured {
        error: err,
        tolerance: 1e-9,
        detail: "Beta(2,1) and Beta(3,1) against ln2-1/2, ln3-2/3".into(),
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * rng.sample::<f64, _>(StandardNormal))
}

const GRAD_REL: f64 = 1e-4;
const GRAD_FLOOR: f64 = 1e-6;

fn check_logit_gradients(sizes: &Sizes, rng: &mut ChaCha8Rng) -> Measured {
    let w = LossWeights::default();
    let ev = EvidenceMapConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..sizes.logit_configs {
        let c = rng.random_range(2..=6);
        let (ns, nl, nu) = (
            rng.random_range(1..=5),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
        );
        let z = normal_matrix(rng, ns + nl + nu, c, 1.5);
        let ys: Vec<usize> = (0..ns).map(|_| rng.random_range(0..c)).collect();
        let yl: Vec<usize> = (0..nl).map(|_| rng.random_range(0..c)).collect();
        let objective = |flat: &[f64]| {
            let z = Array2::from_shape_vec((ns + nl + nu, c), flat.to_vec()).expect("shape");
            let batch = split_batch(&z, ns, nl, &ys, &yl);
            evidential_objective(&batch, &w, &ev).expect("valid batch").total
        };
        let batch = split_batch(&z, ns, nl, &ys, &yl);
        let (_, g) = loss_gradients(&batch, &w, &ev).expect("valid batch");
        let analytic: Vec<f64> = concatenate![Axis(0), g.source, g.labeled, g.unlabeled]
            .iter()
            .copied()
            .collect();
        let flat: Vec<f64> = z.iter().copied().collect();
        let numeric = oracle::central_difference(objective, &flat, 1e-5);
        worst = worst.max(oracle::gradient_error(&analytic, &numeric, GRAD_REL, GRAD_FLOOR));
    }
    Measured {
        error: worst,
        tolerance: GRAD_REL,
        detail: format!("max relative error over {} logit batches", sizes.logit_configs),
    }
}

fn split_batch<'a>(
    z: &'a Array2<f64>,
    ns: usize,
    nl: usize,
    ys: &'a [usize],
    yl: &'a [usize],
) -> LogitBatch<'a> {
    LogitBatch {
        source: LabeledLogits {
            logits: z.slice(s![..ns, ..]),
            labels: ys,
        },
        labeled: LabeledLogits {
            logits: z.slice(s![ns..ns + nl, ..]),
            labels: yl,
        },
        unlabeled: z.slice(s![ns + nl.., ..]),
    }
}

/// Smallest |pre-activation| of any hidden unit over the rows of `x`.
fn min_abs_preactivation(params: &NetworkParams, x: &Array2<f64>) -> f64 {
    let mut h = x.clone();
    let mut min = f64::INFINITY;
    for layer in &params.layers[..params.layers.len() - 1] {
        let pre = h.dot(&layer.weights) + &layer.bias;
        min = pre.iter().fold(min, |m, v| m.min(v.abs()));
        h = pre.mapv(|v| params.activation.apply(v));
    }
    min
}

fn check_network_gradients(sizes: &Sizes, rng: &mut ChaCha8Rng) -> Measured {
    let w = LossWeights::default();
    let ev = EvidenceMapConfig::default();
    let mut worst = 0.0f64;
    let mut redrawn = 0;
    let mut done = 0;
    while done < sizes.network_configs {
        let activation = if done % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let c = rng.random_range(2..=4);
        let d = rng.random_range(2..=4);
        let mut layer_sizes = vec![d];
        for _ in 0..rng.random_range(1..=2) {
            layer_sizes.push(rng.random_range(3..=6));
        }
        layer_sizes.push(c);
        let mut params = NetworkParams::init(&layer_sizes, activation, rng).expect("valid sizes");
        for l in &mut params.layers {
            l.bias.mapv_inplace(|_| 0.3 * rng.sample::<f64, _>(StandardNormal));
        }
        let (ns, nl, nu) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=3));
        let x = normal_matrix(rng, ns + nl + nu, d, 1.0);
        // central differences straddling a ReLU kink are meaningless
        if activation == Activation::Relu && min_abs_preactivation(&params, &x) < 1e-3 {
            redrawn += 1;
            continue;
        }
        let ys: Vec<usize> = (0..ns).map(|_| rng.random_range(0..c)).collect();
        let yl: Vec<usize> = (0..nl).map(|_| rng.random_range(0..c)).collect();
        let loss_of = |p: &NetworkParams| {
            let z = p.logits(x.view()).expect("dims");
            evidential_objective(&split_batch(&z, ns, nl, &ys, &yl), &w, &ev)
                .expect("valid batch")
                .total
        };
        let (z, cache) = params.forward(x.view()).expect("dims");
        let (_, g) = loss_gradients(&split_batch(&z, ns, nl, &ys, &yl), &w, &ev).expect("valid");
        let gz = concatenate![Axis(0), g.source, g.labeled, g.unlabeled];
        let analytic = params.backward(&cache, gz.view()).expect("dims").to_flat();
        let flat = params.to_flat();
        let mut probe = params.clone();
        let numeric = oracle::central_difference(
            |theta| {
                probe.set_flat(theta).expect("length");
                loss_of(&probe)
            },
            &flat,
            1e-6,
        );
        worst = worst.max(oracle::gradient_error(&analytic, &numeric, GRAD_REL, GRAD_FLOOR));
        done += 1;
    }
    Measured {
        error: worst,
        tolerance: GRAD_REL,
        detail: format!(
            "max relative error over {} networks (tanh and relu; {redrawn} relu draws near a kink skipped)",
            sizes.network_configs
        ),
    }
}

fn check_selection(sizes: &Sizes, rng: &mut ChaCha8Rng) -> Measured {
    let mut mismatches = 0usize;
    for i in 0..sizes.selection_pools {
        let n = rng.random_range(1..=sizes.selection_max_n);
        let b = rng.random_range(1..=n.min(50));
        let kappa = match i % 4 {
            0 => 1,
            1 => n.div_ceil(b),
            _ => rng.random_range(1..=20),
        };
        // coarse grids produce ties
        let grid = if i % 2 == 0 { 10.0 } else { 1e6 };
        let u_dis: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * grid).floor()).collect();
        let u_data: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * grid).floor()).collect();
        let got = duc_select(&u_dis, &u_data, kappa, b).expect("finite scores");
        let want = oracle::brute_force_two_round(&u_dis, &u_data, kappa, b);
        let mut ok = got == want;
        if kappa == 1 {
            ok &= got == oracle::brute_force_top(&u_dis, &(0..n).collect::<Vec<_>>(), b);
        }
        if kappa * b >= n {
            ok &= got == oracle::brute_force_top(&u_data, &(0..n).collect::<Vec<_>>(), b);
        }
        mismatches += usize::from(!ok);
    }
    Measured {
        error: mismatches as f64,
        tolerance: 0.0,
        detail: format!("mismatching pools out of {}", sizes.selection_pools),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_level_passes() {
        let rep = run_verify(&VerifyOptions {
            level: VerifyLevel::Quick,
            ..Default::default()
        });
        assert!(rep.all_passed(), "\n{rep}");
        assert_eq!(rep.checks.len(), 9);
        println!("{rep}");
    }

    #[test]
    fn injected_digamma_fault_is_caught() {
        let rep = run_verify(&VerifyOptions {
            level: VerifyLevel::Quick,
            fault: Some(Fault::DigammaScale(1e-3)),
            ..Default::default()
        });
        let decomposition = rep.checks.iter().find(|c| c.name == "decomposition").unwrap();
        assert!(!decomposition.passed, "\n{rep}");
        assert!(!rep.all_passed());
    }

    #[test]
    fn level_parsing() {
        assert_eq!("quick".parse::<VerifyLevel>().unwrap(), VerifyLevel::Quick);
        assert!("slow".parse::<VerifyLevel>().unwrap_err().is_config());
    }
}
