use std::path::PathBuf;

use log::{debug, info, warn};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::convergence::{ConvergenceConfig, ConvergenceTracker};
use super::state::advance_dynamics;
use super::world::{BarrierSpec, Cohort, World};
use crate::dqn::{select_actions, Checkpoint, Experience, Learner, QNetwork, ReplayBuffer, TrainConfig};
use crate::env::{find_scenario, season_of, RewardSpec, ScenarioSpec};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

/// Months per episode.
pub const MONTHS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Test this month or not.
    Adoption,
    /// How often to test, chosen in the months an agent tests.
    Frequency,
}

impl Model {
    pub fn n_actions(self) -> usize {
        match self {
            Model::Adoption => 2,
            Model::Frequency => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Adoption => "adoption",
            Model::Frequency => "frequency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub model: Model,
    pub feature_set: usize,
    pub scenario: Option<u8>,
    pub episodes: usize,
    pub agents: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub peer_delta: f64,
    pub convergence: ConvergenceConfig,
    pub barrier: BarrierSpec,
    pub rewards: RewardSpec,
    /// Held-out transitions used for the final Bellman error.
    pub eval_transitions: usize,
    /// When false the network is only evaluated, never updated.
    pub learning: bool,
    /// End the run at the detected convergence episode instead of spending
    /// the whole budget.
    pub stop_at_convergence: bool,
    /// Where a divergence dumps the last finite state.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            model: Model::Adoption,
            feature_set: 20,
            scenario: None,
            episodes: 2000,
            agents: crate::population::DEFAULT_AGENTS,
            seed: 1,
            train: TrainConfig::default(),
            peer_delta: 0.05,
            convergence: ConvergenceConfig::default(),
            barrier: BarrierSpec::default(),
            rewards: RewardSpec::default(),
            eval_transitions: 1000,
            learning: true,
            stop_at_convergence: true,
            checkpoint_dir: None,
        }
    }
}

impl SimConfig {
    /// 100 agents and 300 episodes.
    pub fn desk() -> Self {
        Self {
            agents: 100,
            episodes: 300,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let c = &self.convergence;
        if self.episodes < c.window + c.patience {
            return Err(Error::Config(format!(
                "episodes {} must be at least window + patience = {}",
                self.episodes,
                c.window + c.patience
            )));
        }
        if !(0.0..=1.0).contains(&self.peer_delta) {
            return Err(Error::Config(format!("peer_delta {} outside [0, 1]", self.peer_delta)));
        }
        self.scenario_spec()?;
        Ok(())
    }

    pub fn scenario_spec(&self) -> Result<Option<ScenarioSpec>> {
        self.scenario.map(|id| find_scenario(&id.to_string())).transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// 1-based.
    pub episode: usize,
    /// Agents that tested in at least one month.
    pub testers: usize,
    /// Episode reward summed over months, averaged over agents.
    pub mean_reward: f64,
    pub total_reward: f64,
    /// Exploration rate at the start of the episode.
    pub epsilon: f64,
    /// Mean minibatch loss; `None` before training starts.
    pub loss: Option<f64>,
    pub env_steps: u64,
    /// Last chosen frequency action (1..=4) per tester.
    pub frequency_histogram: [usize; 4],
    /// Season of each tester's first test (Winter, Spring, Summer, Autumn).
    pub season_histogram: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub model: Model,
    pub scenario: Option<u8>,
    pub seed: u64,
    pub agents: usize,
    pub per_episode: Vec<EpisodeMetrics>,
    pub converged_at: Option<usize>,
    pub final_testers: usize,
    pub decision_performance_pct: f64,
    pub final_mse: f64,
    /// Tail-window means, rounded.
    pub final_frequency: [usize; 4],
    pub final_season: [usize; 4],
    pub checkpoint: Option<PathBuf>,
}

impl RunResult {
    pub fn episodes_run(&self) -> usize {
        self.per_episode.len()
    }

    /// Convergence episode, or every episode run when there was none.
    pub fn episodes_to_convergence(&self) -> usize {
        self.converged_at.unwrap_or(self.episodes_run())
    }

    /// Index of the most common final frequency action (0 is a_f = 1).
    pub fn modal_frequency(&self) -> usize {
        crate::dqn::argmax(&self.final_frequency.map(|c| c as f64))
    }
}

/// Serializable run progress stored alongside the learner in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub config: SimConfig,
    pub metrics: Vec<EpisodeMetrics>,
    pub tracker: ConvergenceTracker,
    /// Frozen adoption network deciding who tests in the frequency model.
    pub gate: Option<QNetwork>,
}

pub type RunCheckpoint = Checkpoint<Progress>;

/// One training stream: the learner, its replay memory and random stream,
/// stepping a cohort through monthly episodes.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cohort: Cohort,
    pub config: SimConfig,
    scenario: Option<ScenarioSpec>,
    learner: Learner,
    buffer: ReplayBuffer,
    rng: SimRng,
    metrics: Vec<EpisodeMetrics>,
    tracker: ConvergenceTracker,
    gate: Option<QNetwork>,
}

impl Trainer {
    /// Fresh adoption learner, or a fresh frequency learner behind `gate`.
    pub fn new(cohort: Cohort, config: SimConfig, gate: Option<QNetwork>) -> Result<Self> {
        let mut rng = rng::seeded(config.seed);
        let learner = Learner::new(config.train.clone(), cohort.state_dim(), config.model.n_actions(), &mut rng)?;
        Self::assemble(cohort, config, learner, rng, None, Vec::new(), ConvergenceTracker::default(), gate)
    }

    /// Continue from a trained baseline under `config` (usually a
    /// scenario). Weights and the exploration clock carry over; the
    /// optimizer, replay memory and metrics start fresh. `gate` replaces
    /// the baseline's gate when given.
    pub fn fine_tune(cohort: Cohort, config: SimConfig, baseline: &RunCheckpoint, gate: Option<QNetwork>) -> Result<Self> {
        if baseline.progress.config.model != config.model {
            return Err(Error::Config(format!(
                "cannot fine-tune a {} model from a {} baseline",
                config.model.name(),
                baseline.progress.config.model.name()
            )));
        }
        let mut learner = baseline.learner.clone();
        learner.config = config.train.clone();
        learner.reset_optimizer();
        let stream = 1000 + config.scenario.unwrap_or(0) as u64;
        let rng = rng::substream(config.seed, stream);
        let gate = gate.or_else(|| baseline.progress.gate.clone());
        Self::assemble(cohort, config, learner, rng, None, Vec::new(), ConvergenceTracker::default(), gate)
    }

    /// Pick up exactly where `checkpoint` left off.
    pub fn resume(cohort: Cohort, checkpoint: RunCheckpoint) -> Result<Self> {
        let Checkpoint {
            learner,
            rng,
            replay,
            progress,
            ..
        } = checkpoint;
        Self::assemble(cohort, progress.config, learner, rng, replay, progress.metrics, progress.tracker, progress.gate)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        cohort: Cohort,
        config: SimConfig,
        learner: Learner,
        rng: SimRng,
        replay: Option<ReplayBuffer>,
        metrics: Vec<EpisodeMetrics>,
        tracker: ConvergenceTracker,
        gate: Option<QNetwork>,
    ) -> Result<Self> {
        config.validate()?;
        let d = cohort.state_dim();
        if learner.net.input_dim() != d || learner.net.n_actions() != config.model.n_actions() {
            return Err(Error::Dimension {
                expected: d,
                got: learner.net.input_dim(),
            });
        }
        match (config.model, &gate) {
            (Model::Frequency, None) => {
                return Err(Error::Config("the frequency model needs a trained adoption gate".into()))
            }
            (Model::Frequency, Some(g)) if g.input_dim() != d || g.n_actions() != 2 => {
                return Err(Error::Dimension {
                    expected: d,
                    got: g.input_dim(),
                })
            }
            _ => {}
        }
        let scenario = config.scenario_spec()?;
        let buffer = replay.unwrap_or_else(|| ReplayBuffer::new(config.train.replay_capacity));
        Ok(Self {
            cohort,
            config,
            scenario,
            learner,
            buffer,
            rng,
            metrics,
            tracker,
            gate,
        })
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn metrics(&self) -> &[EpisodeMetrics] {
        &self.metrics
    }

    pub fn converged_at(&self) -> Option<usize> {
        self.tracker.converged_at
    }

    pub fn is_done(&self) -> bool {
        self.metrics.len() >= self.config.episodes
            || (self.config.stop_at_convergence && self.tracker.converged_at.is_some())
    }

    pub fn checkpoint(&self, with_replay: bool) -> RunCheckpoint {
        Checkpoint::new(
            self.learner.clone(),
            self.rng.clone(),
            with_replay.then(|| self.buffer.clone()),
            Progress {
                config: self.config.clone(),
                metrics: self.metrics.clone(),
                tracker: self.tracker.clone(),
                gate: self.gate.clone(),
            },
        )
    }

    /// Run episodes until the budget is spent or the series converges.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_done() {
            self.run_episode()?;
        }
        Ok(())
    }

    /// Run at most `n` more episodes.
    pub fn run_for(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            if self.is_done() {
                break;
            }
            self.run_episode()?;
        }
        Ok(())
    }

    /// One 12-month episode from the reset state, training as it goes.
    pub fn run_episode(&mut self) -> Result<EpisodeMetrics> {
        let before = self.checkpoint(false);
        let epsilon = self.learner.epsilon();
        let outcome = self.play(epsilon, true);
        let episode = match outcome {
            Ok(ep) => ep,
            Err(Error::Divergence { step, detail, .. }) => {
                let checkpoint = self.dump_on_divergence(&before);
                return Err(Error::Divergence { step, detail, checkpoint });
            }
            Err(e) => return Err(e),
        };
        let metrics = EpisodeMetrics {
            episode: self.metrics.len() + 1,
            testers: episode.testers,
            mean_reward: episode.total_reward / self.cohort.len() as f64,
            total_reward: episode.total_reward,
            epsilon,
            loss: (!episode.losses.is_empty())
                .then(|| episode.losses.iter().sum::<f64>() / episode.losses.len() as f64),
            env_steps: self.learner.env_steps,
            frequency_histogram: episode.frequency,
            season_histogram: episode.season,
        };
        let tracked = match self.config.model {
            Model::Adoption => metrics.testers as f64,
            Model::Frequency => *metrics.frequency_histogram.iter().max().unwrap() as f64,
        };
        if self.tracker.observe(&self.config.convergence, tracked, epsilon) && self.tracker.streak == self.config.convergence.patience {
            info!(
                "{} run seed {} converged at episode {:?}",
                self.config.model.name(),
                self.config.seed,
                self.tracker.converged_at
            );
        }
        debug!(
            "episode {} testers {} reward {:.3} eps {:.4}",
            metrics.episode, metrics.testers, metrics.mean_reward, epsilon
        );
        self.metrics.push(metrics.clone());
        Ok(metrics)
    }

    fn dump_on_divergence(&self, before: &RunCheckpoint) -> Option<PathBuf> {
        let dir = self.config.checkpoint_dir.as_ref()?;
        let path = dir.join(format!(
            "diverged_{}_seed{}_ep{}.json",
            self.config.model.name(),
            self.config.seed,
            self.metrics.len()
        ));
        match std::fs::create_dir_all(dir).map_err(Error::from).and_then(|_| before.save(&path)) {
            Ok(()) => Some(path),
            Err(e) => {
                warn!("could not write divergence checkpoint: {e}");
                None
            }
        }
    }

    /// Play one episode. With `learn` false nothing is stored or updated
    /// and the transitions are returned instead.
    fn play(&mut self, epsilon: f64, learn: bool) -> Result<Episode> {
        let n = self.cohort.len();
        let mut dynamic = self.cohort.initial.clone();
        let mut ep = Episode::default();
        let mut first_test: Vec<Option<usize>> = vec![None; n];
        let mut last_choice: Vec<Option<usize>> = vec![None; n];
        let mut states = self.cohort.encode(&dynamic);
        for month in 0..MONTHS {
            let seasons: Vec<_> = dynamic
                .iter()
                .map(|d| season_of(d.month))
                .collect::<Result<_>>()?;
            let (rows, actions, rewards, tested) = match self.config.model {
                Model::Adoption => {
                    let actions = select_actions(&self.learner.net, &states, epsilon, &mut self.rng)?;
                    let rewards: Vec<f64> = (0..n)
                        .map(|i| {
                            let r = self.config.rewards.adoption_reward(actions[i], self.scenario.as_ref(), seasons[i]);
                            if actions[i] == 1 {
                                r - self.cohort.cost[i]
                            } else {
                                r
                            }
                        })
                        .collect();
                    let tested: Vec<bool> = actions.iter().map(|&a| a == 1).collect();
                    ((0..n).collect::<Vec<_>>(), actions, rewards, tested)
                }
                Model::Frequency => {
                    let gate = self.gate.as_ref().expect("validated on construction");
                    let gate_actions = select_actions(gate, &states, 0.0, &mut self.rng)?;
                    let tested: Vec<bool> = gate_actions.iter().map(|&a| a == 1).collect();
                    let rows: Vec<usize> = (0..n).filter(|&i| tested[i]).collect();
                    let (actions, rewards) = if rows.is_empty() {
                        (Vec::new(), Vec::new())
                    } else {
                        let sub = states.select(Axis(0), &rows);
                        let actions = select_actions(&self.learner.net, &sub, epsilon, &mut self.rng)?;
                        let rewards = rows
                            .iter()
                            .zip(&actions)
                            .map(|(&i, &a)| {
                                self.config
                                    .rewards
                                    .frequency_reward(a as u8 + 1, self.scenario.as_ref(), seasons[i])
                            })
                            .collect::<Result<Vec<_>>>()?;
                        (actions, rewards)
                    };
                    (rows, actions, rewards, tested)
                }
            };
            for (j, &i) in rows.iter().enumerate() {
                if tested[i] {
                    first_test[i].get_or_insert(seasons[i].index());
                }
                if self.config.model == Model::Frequency {
                    last_choice[i] = Some(actions[j]);
                }
            }
            ep.total_reward += rewards.iter().sum::<f64>();
            advance_dynamics(&mut dynamic, &tested, self.config.peer_delta);
            let next = self.cohort.encode(&dynamic);
            let done = month + 1 == MONTHS;
            let transitions = rows.iter().zip(actions.iter().zip(&rewards)).map(|(&i, (&a, &r))| Experience {
                s: states.row(i).to_vec(),
                a,
                r,
                s_next: next.row(i).to_vec(),
                done,
            });
            if learn {
                for e in transitions {
                    self.buffer.push(e)?;
                }
                self.learner.advance_env(rows.len() as u64);
                if self.config.learning && self.buffer.len() >= self.learner.config.batch {
                    ep.losses.push(self.learner.train_step(&self.buffer, &mut self.rng)?);
                }
            } else {
                ep.held_out.extend(transitions);
            }
            states = next;
        }
        ep.testers = first_test.iter().filter(|t| t.is_some()).count();
        for s in first_test.iter().flatten() {
            ep.season[*s] += 1;
        }
        for a in last_choice.iter().flatten() {
            ep.frequency[*a] += 1;
        }
        Ok(ep)
    }

    /// Bellman error of the current networks on fresh transitions played
    /// from a private stream, so evaluation never perturbs training.
    pub fn held_out_mse(&self) -> Result<f64> {
        let mut probe = self.clone();
        probe.rng = rng::substream(self.config.seed, 99);
        let want = self.config.eval_transitions.max(1);
        let mut held: Vec<Experience> = Vec::with_capacity(want);
        let epsilon = self.learner.epsilon();
        for _ in 0..50 {
            if held.len() >= want {
                break;
            }
            held.extend(probe.play(epsilon, false)?.held_out);
        }
        if held.is_empty() {
            return Ok(0.0);
        }
        held.truncate(want);
        let batch: Vec<&Experience> = held.iter().collect();
        self.learner.evaluate(&batch)
    }

    /// Summary of the run so far.
    pub fn result(&self) -> Result<RunResult> {
        let w = self.config.convergence.window.max(1);
        let tail = &self.metrics[self.metrics.len().saturating_sub(w)..];
        let mean = |f: &dyn Fn(&EpisodeMetrics) -> usize| -> usize {
            if tail.is_empty() {
                0
            } else {
                (tail.iter().map(f).sum::<usize>() as f64 / tail.len() as f64).round() as usize
            }
        };
        let final_testers = mean(&|m| m.testers);
        let n = self.cohort.len();
        Ok(RunResult {
            model: self.config.model,
            scenario: self.config.scenario,
            seed: self.config.seed,
            agents: n,
            per_episode: self.metrics.clone(),
            converged_at: self.tracker.converged_at,
            final_testers,
            decision_performance_pct: 100.0 * final_testers as f64 / n as f64,
            final_mse: self.held_out_mse()?,
            final_frequency: std::array::from_fn(|a| mean(&|m| m.frequency_histogram[a])),
            final_season: std::array::from_fn(|s| mean(&|m| m.season_histogram[s])),
            checkpoint: None,
        })
    }

    /// Evaluation-mode states visited by the greedy policy over one episode,
    /// one matrix per month (before the month's decision).
    pub fn greedy_trajectory(&self) -> Result<Vec<Array2<f64>>> {
        let mut dynamic = self.cohort.initial.clone();
        let mut rng = rng::seeded(0);
        let mut out = Vec::with_capacity(MONTHS);
        for _ in 0..MONTHS {
            let states = self.cohort.encode(&dynamic);
            let net = match self.config.model {
                Model::Adoption => &self.learner.net,
                Model::Frequency => self.gate.as_ref().expect("validated on construction"),
            };
            let tested: Vec<bool> = select_actions(net, &states, 0.0, &mut rng)?
                .into_iter()
                .map(|a| a == 1)
                .collect();
            out.push(states);
            advance_dynamics(&mut dynamic, &tested, self.config.peer_delta);
        }
        Ok(out)
    }
}

#[derive(Default)]
struct Episode {
    testers: usize,
    total_reward: f64,
    losses: Vec<f64>,
    frequency: [usize; 4],
    season: [usize; 4],
    held_out: Vec<Experience>,
}

/// Train one run to completion on the world's cohort.
pub fn train_run(world: &World, config: &SimConfig, gate: Option<QNetwork>) -> Result<(RunResult, RunCheckpoint)> {
    let cohort = world.cohort(config.feature_set, config.agents, &config.barrier)?;
    let mut trainer = Trainer::new(cohort, config.clone(), gate)?;
    trainer.run()?;
    Ok((trainer.result()?, trainer.checkpoint(false)))
}

/// Fine-tune a baseline under `config` to completion.
pub fn fine_tune_run(
    world: &World,
    config: &SimConfig,
    baseline: &RunCheckpoint,
    gate: Option<QNetwork>,
) -> Result<(RunResult, RunCheckpoint)> {
    let cohort = world.cohort(config.feature_set, config.agents, &config.barrier)?;
    let mut trainer = Trainer::fine_tune(cohort, config.clone(), baseline, gate)?;
    trainer.run()?;
    Ok((trainer.result()?, trainer.checkpoint(false)))
}
