//! Budget scheduling, query strategies and the active domain adaptation
//! driver.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_pools, DomainDataset, Oracle};
use crate::error::{Error, Result};
use crate::evidential::UncertaintyReport;
use crate::metrics::{evaluate_alphas, DomainMetrics, EceConfig};
use crate::network::{NetworkParams, TrainConfig, TrainPools, Trainer};

/// Which target samples are labeled. Both id lists are kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveState {
    labeled: Vec<usize>,
    labeled_labels: Vec<usize>,
    unlabeled: Vec<usize>,
    steps_done: usize,
}

impl ActiveState {
    pub fn new(n_target: usize) -> Self {
        Self {
            labeled: Vec::new(),
            labeled_labels: Vec::new(),
            unlabeled: (0..n_target).collect(),
            steps_done: 0,
        }
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    /// Oracle labels aligned with [`labeled`](Self::labeled).
    pub fn labeled_labels(&self) -> &[usize] {
        &self.labeled_labels
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// Moves target ids from 𝒯ᵘ to 𝒯ˡ, querying their labels, and counts one
    /// selection step. Fails without changing state if any id is not
    /// currently unlabeled or appears twice.
    pub fn commit(&mut self, target_ids: &[usize], oracle: &Oracle) -> Result<()> {
        let mut ids = target_ids.to_vec();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Input("selection contains duplicate ids".into()));
        }
        if let Some(&bad) = ids.iter().find(|i| self.unlabeled.binary_search(i).is_err()) {
            return Err(Error::Input(format!("target id {bad} is not in the unlabeled pool")));
        }
        let labels = oracle.query_many(&ids)?;
        self.unlabeled.retain(|i| ids.binary_search(i).is_err());
        let mut pairs: Vec<(usize, usize)> = self
            .labeled
            .iter()
            .copied()
            .zip(self.labeled_labels.iter().copied())
            .chain(ids.into_iter().zip(labels))
            .collect();
        pairs.sort_unstable();
        (self.labeled, self.labeled_labels) = pairs.into_iter().unzip();
        self.steps_done += 1;
        Ok(())
    }
}

/// Total budget `B` split into `steps` selections of `per_step`, with the
/// remainder added to the final step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSchedule {
    pub total: usize,
    pub per_step: usize,
    pub steps: usize,
}

impl BudgetSchedule {
    /// Samples to select at step `k` (0-based).
    pub fn step_size(&self, k: usize) -> usize {
        if k + 1 == self.steps {
            self.total - self.per_step * (self.steps - 1)
        } else {
            self.per_step
        }
    }
}

pub fn budget_schedule(n_t: usize, budget_fraction: f64, steps: usize) -> Result<BudgetSchedule> {
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(Error::config(
            "budget_fraction",
            format!("must be in (0, 1], got {budget_fraction}"),
        ));
    }
    if steps == 0 {
        return Err(Error::config("steps", "must be >= 1"));
    }
    let total = (budget_fraction * n_t as f64).round() as usize;
    if total < steps {
        return Err(Error::config(
            "budget_fraction",
            format!("budget of {total} samples is smaller than {steps} selection steps"),
        ));
    }
    Ok(BudgetSchedule {
        total,
        per_step: total / steps,
        steps,
    })
}

/// Epochs (0-based, counted as epochs completed) at which selection runs:
/// `round(k·E/(R+1))` for `k = 1..=R`.
pub fn selection_epochs(total_epochs: usize, steps: usize) -> Result<Vec<usize>> {
    let epochs: Vec<usize> = (1..=steps)
        .map(|k| ((k * total_epochs) as f64 / (steps + 1) as f64).round() as usize)
        .collect();
    let spaced = epochs.first().is_none_or(|&e| e >= 1)
        && epochs.windows(2).all(|w| w[0] < w[1])
        && epochs.last().is_none_or(|&e| e < total_epochs);
    if !spaced {
        return Err(Error::config(
            "epochs",
            format!("{total_epochs} epochs cannot hold {steps} selection steps with training between them"),
        ));
    }
    Ok(epochs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Entropy,
    MarginBvsb,
    UDisOnly,
    UDataOnly,
    DucTwoRound,
    DucReversed,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Random,
        StrategyKind::Entropy,
        StrategyKind::MarginBvsb,
        StrategyKind::UDisOnly,
        StrategyKind::UDataOnly,
        StrategyKind::DucTwoRound,
        StrategyKind::DucReversed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Entropy => "entropy",
            StrategyKind::MarginBvsb => "margin_bvsb",
            StrategyKind::UDisOnly => "u_dis_only",
            StrategyKind::UDataOnly => "u_data_only",
            StrategyKind::DucTwoRound => "duc_two_round",
            StrategyKind::DucReversed => "duc_reversed",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = StrategyKind::ALL.iter().map(|k| k.name()).collect();
                Error::config("strategy", format!("unknown strategy `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryStrategy {
    pub kind: StrategyKind,
    pub kappa: usize,
}

impl Default for QueryStrategy {
    fn default() -> Self {
        Self {
            kind: StrategyKind::DucTwoRound,
            kappa: 10,
        }
    }
}

impl QueryStrategy {
    pub fn validate(&self) -> Result<()> {
        if self.kappa == 0 {
            return Err(Error::config("kappa", "must be >= 1"));
        }
        Ok(())
    }
}

fn check_scores(scores: &[f64], what: &str) -> Result<()> {
    match scores.iter().position(|s| !s.is_finite()) {
        Some(i) => Err(Error::Input(format!("{what} score at position {i} is not finite"))),
        None => Ok(()),
    }
}

/// Positions of the `k` largest scores among `candidates`, highest first,
/// ties to the lower position.
fn top_k(scores: &[f64], candidates: &[usize], k: usize) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    order.truncate(k);
    order
}

/// Two-round selection: shortlist the `min(κ·b, n)` highest `first` scores,
/// then keep the `b` highest `second` scores among them. Returns sorted
/// positions into the score slices.
pub fn two_round_select(first: &[f64], second: &[f64], kappa: usize, b: usize) -> Result<Vec<usize>> {
    if first.len() != second.len() {
        return Err(Error::Dimension {
            expected: first.len(),
            got: second.len(),
            context: "second-round scores per sample",
        });
    }
    if kappa == 0 {
        return Err(Error::config("kappa", "must be >= 1"));
    }
    check_scores(first, "first-round")?;
    check_scores(second, "second-round")?;
    let n = first.len();
    let all: Vec<usize> = (0..n).collect();
    let shortlist = top_k(first, &all, kappa.saturating_mul(b).min(n));
    let mut picked = top_k(second, &shortlist, b);
    picked.sort_unstable();
    Ok(picked)
}

pub fn duc_select(u_dis: &[f64], u_data: &[f64], kappa: usize, b: usize) -> Result<Vec<usize>> {
    two_round_select(u_dis, u_data, kappa, b)
}

/// Sorted positions of the `b` highest scores.
pub fn top_b(scores: &[f64], b: usize) -> Result<Vec<usize>> {
    check_scores(scores, "selection")?;
    let all: Vec<usize> = (0..scores.len()).collect();
    let mut picked = top_k(scores, &all, b);
    picked.sort_unstable();
    Ok(picked)
}

/// Best-minus-second-best class probability.
pub fn bvsb_margin(probs: &[f64]) -> f64 {
    let (mut best, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in probs {
        if p > best {
            second = best;
            best = p;
        } else if p > second {
            second = p;
        }
    }
    best - second
}

/// Positions (sorted) into `reports` chosen by `strategy`.
pub fn select<R: Rng + ?Sized>(
    strategy: &QueryStrategy,
    reports: &[UncertaintyReport],
    b: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    strategy.validate()?;
    let n = reports.len();
    let b = b.min(n);
    let u_dis = || reports.iter().map(|r| r.u_dis).collect::<Vec<_>>();
    let u_data = || reports.iter().map(|r| r.u_data).collect::<Vec<_>>();
    match strategy.kind {
        StrategyKind::Random => {
            let mut picked = rand::seq::index::sample(rng, n, b).into_vec();
            picked.sort_unstable();
            Ok(picked)
        }
        StrategyKind::Entropy => top_b(&reports.iter().map(|r| r.entropy).collect::<Vec<_>>(), b),
        StrategyKind::MarginBvsb => {
            let neg: Vec<f64> = reports.iter().map(|r| -bvsb_margin(r.probs.as_slice())).collect();
            top_b(&neg, b)
        }
        StrategyKind::UDisOnly => top_b(&u_dis(), b),
        StrategyKind::UDataOnly => top_b(&u_data(), b),
        StrategyKind::DucTwoRound => two_round_select(&u_dis(), &u_data(), strategy.kappa, b),
        StrategyKind::DucReversed => two_round_select(&u_data(), &u_dis(), strategy.kappa, b),
    }
}

pub fn baseline_select<R: Rng + ?Sized>(
    strategy: &QueryStrategy,
    reports: &[UncertaintyReport],
    b: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    select(strategy, reports, b, rng)
}

/// Selection schedule of an active run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveConfig {
    /// Fraction of the target set to label in total; 0 disables selection.
    pub budget_fraction: f64,
    pub steps: usize,
    pub strategy: QueryStrategy,
    pub ece: EceConfig,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            budget_fraction: 0.05,
            steps: 5,
            strategy: QueryStrategy::default(),
            ece: EceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Training epochs completed before this selection.
    pub epoch: usize,
    pub n_labeled: usize,
    pub selected_indices: Vec<usize>,
    pub target_accuracy: f64,
    pub source_accuracy: f64,
    pub ece: f64,
    pub source_mean_u_dis: f64,
    pub source_mean_u_data: f64,
    pub target_mean_u_dis: f64,
    pub target_mean_u_data: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: QueryStrategy,
    pub budget: Option<BudgetSchedule>,
    pub selection_epochs: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub epoch_losses: Vec<f64>,
    pub final_source: DomainMetrics,
    pub final_target: DomainMetrics,
    pub labeled_target_ids: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub model: NetworkParams,
}

/// Trains on the source set plus the target pools, running a selection step
/// at each scheduled epoch. Target accuracy is measured on the full target
/// set using the oracle's withheld labels.
pub fn run_active_da(
    source: DomainDataset,
    target: DomainDataset,
    cfg: &TrainConfig,
    active: &ActiveConfig,
) -> Result<RunOutcome> {
    cfg.validate()?;
    active.strategy.validate()?;
    let n_t = target.len();
    let (budget, epochs) = if active.budget_fraction == 0.0 {
        (None, Vec::new())
    } else {
        let budget = budget_schedule(n_t, active.budget_fraction, active.steps)?;
        (Some(budget), selection_epochs(cfg.epochs, active.steps)?)
    };
    let (mut pools, oracle) = make_pools(source, target)?;
    let mut trainer = Trainer::new(pools.source.dim(), pools.source.num_classes, cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);

    let evaluate = |trainer: &Trainer, pools: &crate::data::Pools| -> Result<(DomainMetrics, DomainMetrics)> {
        let src = trainer.alphas(pools.source.features.view())?;
        let tgt = trainer.alphas(pools.target.features())?;
        let (s, _) = evaluate_alphas(&src, &pools.source.labels, &active.ece)?;
        let (t, _) = evaluate_alphas(&tgt, oracle.evaluation_labels(), &active.ece)?;
        Ok((s, t))
    };

    let mut steps = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut labeled_x = pools.target.gather(pools.state.labeled());
    let mut unlabeled_x = pools.unlabeled_features();
    for epoch in 0..cfg.epochs {
        if let (Some(budget), Some(k)) = (budget, epochs.iter().position(|&e| e == epoch)) {
            let reports: Vec<UncertaintyReport> = trainer
                .alphas(unlabeled_x.view())?
                .iter()
                .map(crate::evidential::uncertainty_report)
                .collect();
            let picked = select(&active.strategy, &reports, budget.step_size(k), &mut rng)?;
            let ids: Vec<usize> = picked.iter().map(|&p| pools.state.unlabeled()[p]).collect();
            pools.state.commit(&ids, &oracle)?;
            labeled_x = pools.target.gather(pools.state.labeled());
            unlabeled_x = pools.unlabeled_features();
            let (s, t) = evaluate(&trainer, &pools)?;
            steps.push(StepRecord {
                step: k + 1,
                epoch,
                n_labeled: pools.state.labeled().len(),
                selected_indices: ids,
                target_accuracy: t.accuracy,
                source_accuracy: s.accuracy,
                ece: t.ece,
                source_mean_u_dis: s.mean_u_dis,
                source_mean_u_data: s.mean_u_data,
                target_mean_u_dis: t.mean_u_dis,
                target_mean_u_data: t.mean_u_data,
            });
        }
        let train_pools = TrainPools {
            source_x: pools.source.features.view(),
            source_y: &pools.source.labels,
            labeled_x: labeled_x.view(),
            labeled_y: pools.state.labeled_labels(),
            unlabeled_x: unlabeled_x.view(),
        };
        epoch_losses.push(trainer.fit_epoch(&train_pools)?.mean.total);
    }
    let (final_source, final_target) = evaluate(&trainer, &pools)?;
    Ok(RunOutcome {
        report: RunReport {
            strategy: active.strategy,
            budget,
            selection_epochs: epochs,
            steps,
            epoch_losses,
            final_source,
            final_target,
            labeled_target_ids: pools.state.labeled().to_vec(),
        },
        model: trainer.params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_shifted_gaussians, ShiftBenchmarkConfig};
    use crate::dirichlet::DirichletParams;
    use crate::evidential::uncertainty_report;
    use proptest::prelude::*;

    fn reports(alphas: &[&[f64]]) -> Vec<UncertaintyReport> {
        alphas
            .iter()
            .map(|a| uncertainty_report(&DirichletParams::new(a.to_vec()).unwrap()))
            .collect()
    }

    #[test]
    fn budget_examples() {
        let s = budget_schedule(1000, 0.05, 5).unwrap();
        assert_eq!((s.total, s.per_step), (50, 10));
        let s = budget_schedule(1000, 1.0, 1).unwrap();
        assert_eq!((s.total, s.per_step), (1000, 1000));
        let s = budget_schedule(103, 0.05, 5).unwrap();
        assert_eq!((s.total, s.per_step, s.step_size(4)), (5, 1, 1));
        let s = budget_schedule(1000, 0.057, 5).unwrap();
        assert_eq!((s.per_step, s.step_size(0), s.step_size(4)), (11, 11, 13));
        assert!(budget_schedule(50, 0.05, 5).unwrap_err().is_config());
        assert!(budget_schedule(50, 0.0, 1).unwrap_err().is_config());
        assert!(budget_schedule(50, 1.5, 1).unwrap_err().is_config());
        assert!(budget_schedule(50, 0.5, 0).unwrap_err().is_config());
    }

    #[test]
    fn selection_epochs_even() {
        assert_eq!(selection_epochs(30, 5).unwrap(), vec![5, 10, 15, 20, 25]);
        assert_eq!(selection_epochs(2, 1).unwrap(), vec![1]);
        assert!(selection_epochs(4, 5).unwrap_err().is_config());
        assert!(selection_epochs(1, 1).is_err());
    }

    #[test]
    fn duc_example() {
        let u_dis = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4];
        let u_data = [0.1, 0.2, 0.9, 0.8, 1.0, 1.0];
        assert_eq!(duc_select(&u_dis, &u_data, 2, 2).unwrap(), vec![2, 3]);
        assert_eq!(duc_select(&u_dis, &u_data, 1, 2).unwrap(), vec![0, 1]);
        assert_eq!(duc_select(&u_dis, &u_data, 3, 2).unwrap(), vec![4, 5]);
        assert!(duc_select(&[], &[], 2, 2).unwrap().is_empty());
        assert!(duc_select(&[f64::NAN], &[0.0], 2, 1).is_err());
    }

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(top_b(&[1.0, 2.0, 2.0, 2.0], 2).unwrap(), vec![1, 2]);
        assert_eq!(duc_select(&[1.0; 5], &[0.5; 5], 1, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn entropy_and_margin_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = reports(&[&[1.0, 1.0], &[9.0, 1.0]]);
        let entropy = QueryStrategy {
            kind: StrategyKind::Entropy,
            kappa: 1,
        };
        assert_eq!(select(&entropy, &r, 1, &mut rng).unwrap(), vec![0]);
        let margin = QueryStrategy {
            kind: StrategyKind::MarginBvsb,
            kappa: 1,
        };
        assert_eq!(select(&margin, &r, 1, &mut rng).unwrap(), vec![0]);
        assert!((bvsb_margin(&[0.2, 0.5, 0.3]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn reversed_runs_u_data_first() {
        let r = reports(&[&[1.0, 1.0], &[50.0, 50.0], &[3.0, 1.0], &[1.5, 1.0]]);
        let u_dis: Vec<f64> = r.iter().map(|x| x.u_dis).collect();
        let u_data: Vec<f64> = r.iter().map(|x| x.u_data).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rev = QueryStrategy {
            kind: StrategyKind::DucReversed,
            kappa: 2,
        };
        assert_eq!(
            select(&rev, &r, 1, &mut rng).unwrap(),
            two_round_select(&u_data, &u_dis, 2, 1).unwrap()
        );
    }

    #[test]
    fn random_is_seeded() {
        let row: &[f64] = &[1.0, 2.0];
        let r = reports(&[row; 40]);
        let q = QueryStrategy {
            kind: StrategyKind::Random,
            kappa: 1,
        };
        let a = select(&q, &r, 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = select(&q, &r, 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("coreset".parse::<StrategyKind>().unwrap_err().is_config());
    }

    fn tiny_benchmark() -> (DomainDataset, DomainDataset) {
        gen_shifted_gaussians(&ShiftBenchmarkConfig {
            num_classes: 3,
            dim: 2,
            n_source: 150,
            n_target: 200,
            shift_magnitude: 0.8,
            ..Default::default()
        })
        .unwrap()
    }

    fn tiny_train() -> TrainConfig {
        TrainConfig {
            epochs: 12,
            hidden: vec![8],
            ..Default::default()
        }
    }

    #[test]
    fn run_bookkeeping() {
        let (s, t) = tiny_benchmark();
        let active = ActiveConfig {
            budget_fraction: 0.1,
            ..Default::default()
        };
        let out = run_active_da(s, t, &tiny_train(), &active).unwrap();
        let rep = &out.report;
        assert_eq!(rep.steps.len(), 5);
        assert_eq!(rep.selection_epochs, vec![2, 4, 6, 8, 10]);
        let mut all: Vec<usize> = rep.steps.iter().flat_map(|s| s.selected_indices.clone()).collect();
        assert_eq!(all.len(), 20);
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 20);
        assert_eq!(all, rep.labeled_target_ids);
        for (k, s) in rep.steps.iter().enumerate() {
            assert_eq!(s.n_labeled, 4 * (k + 1));
        }
        assert_eq!(rep.epoch_losses.len(), 12);
    }

    #[test]
    fn zero_budget_selects_nothing() {
        let (s, t) = tiny_benchmark();
        let active = ActiveConfig {
            budget_fraction: 0.0,
            ..Default::default()
        };
        let out = run_active_da(s, t, &tiny_train(), &active).unwrap();
        assert!(out.report.steps.is_empty());
        assert!(out.report.labeled_target_ids.is_empty());
        assert!(out.report.budget.is_none());
    }

    #[test]
    fn run_is_deterministic() {
        let active = ActiveConfig {
            budget_fraction: 0.1,
            strategy: QueryStrategy {
                kind: StrategyKind::Random,
                kappa: 1,
            },
            ..Default::default()
        };
        let (s, t) = tiny_benchmark();
        let a = run_active_da(s.clone(), t.clone(), &tiny_train(), &active).unwrap();
        let b = run_active_da(s, t, &tiny_train(), &active).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn schedule_longer_than_training_is_config_error() {
        let (s, t) = tiny_benchmark();
        let cfg = TrainConfig {
            epochs: 3,
            ..tiny_train()
        };
        let err = run_active_da(s, t, &cfg, &ActiveConfig::default()).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn commit_rejects_bad_ids() {
        let (s, t) = tiny_benchmark();
        let (mut pools, oracle) = make_pools(s, t).unwrap();
        pools.state.commit(&[3, 1], &oracle).unwrap();
        assert!(pools.state.commit(&[1], &oracle).is_err());
        assert!(pools.state.commit(&[5, 5], &oracle).is_err());
        assert!(pools.state.commit(&[10_000], &oracle).is_err());
        assert_eq!(pools.state.labeled(), &[1, 3]);
        assert_eq!(pools.state.steps_done(), 1);
    }

    proptest! {
        #[test]
        fn duc_subset_of_shortlist_and_degenerate(
            pairs in prop::collection::vec((0u8..20, 0u8..20), 1..120),
            kappa in 1usize..12,
            b in 1usize..15,
        ) {
            // small integer grids force plenty of ties
            let u_dis: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let u_data: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let n = u_dis.len();
            let picked = duc_select(&u_dis, &u_data, kappa, b).unwrap();
            prop_assert_eq!(picked.len(), b.min(n));
            let shortlist = top_b(&u_dis, (kappa * b).min(n)).unwrap();
            prop_assert!(picked.iter().all(|p| shortlist.contains(p)));
            prop_assert_eq!(duc_select(&u_dis, &u_data, 1, b).unwrap(), top_b(&u_dis, b).unwrap());
            let big = n.div_ceil(b).max(1);
            prop_assert_eq!(duc_select(&u_dis, &u_data, big, b).unwrap(), top_b(&u_data, b).unwrap());
        }

        #[test]
        fn commit_keeps_partition(
            n in 1usize..60,
            picks in prop::collection::vec(prop::collection::vec(0usize..60, 0..10), 1..6),
        ) {
            let (s, _) = tiny_benchmark();
            let target = DomainDataset::new(
                ndarray::Array2::zeros((n, s.dim())),
                vec![0; n],
                3,
                crate::data::DomainTag::Target,
                "t",
            ).unwrap();
            let (mut pools, oracle) = make_pools(s, target).unwrap();
            for p in picks {
                let _ = pools.state.commit(&p, &oracle);
                let mut all: Vec<usize> = pools.state.labeled().iter()
                    .chain(pools.state.unlabeled()).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
