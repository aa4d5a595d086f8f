use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{write_header, MetricsRow, RowStatus};
use super::{Checkpoint, EpisodeTally, HarnessError, RunConfig};
use crate::envs::{Env, StepInfo};
use crate::planner::{cem_plan, FeefBreakdown, FeefObjective, PlanResult, PlannerConfig};
use crate::rng::{derive_seed, Stream};
use crate::tactile::write_pgm;
use crate::worldmodel::{
    fit_models, EnsembleDynamics, ModelError, ReplayBuffer, RewardHead, TrainReport, Transition,
};

/// One line of an episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
    /// Score of the best plan found (absent for random actions).
    pub plan: Option<FeefBreakdown>,
}

pub(crate) fn random_action(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// CEM sampling seed of one decision. `offset` is the planner's own seed
/// field, 0 by default.
pub(crate) fn planner_seed(seed: u64, offset: u64, episode: usize, step: usize) -> u64 {
    derive_seed(seed ^ offset, Stream::Planner, ((episode as u64) << 24) | step as u64)
}

pub(crate) fn plan_step(
    model: &EnsembleDynamics,
    head: &RewardHead,
    cfg: &PlannerConfig,
    beta: f64,
    obs: &[f64],
    warm: Option<&[f64]>,
    seed: u64,
) -> Result<PlanResult, HarnessError> {
    let mut objective = FeefObjective::new(obs, model, head, beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(cem_plan(&mut objective, cfg, warm, &mut rng)?)
}

/// A single seed's training run, advanced one episode at a time.
#[derive(Clone, Debug)]
pub struct SeedRun {
    cfg: RunConfig,
    seed: u64,
    env: Env,
    model: EnsembleDynamics,
    head: RewardHead,
    buffer: ReplayBuffer,
    next_episode: usize,
    returns: Vec<f64>,
    diverged: bool,
    out_dir: Option<PathBuf>,
    started: Instant,
}

impl SeedRun {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let env = Env::new(&cfg.env)?;
        let (o, a) = (env.obs_dim(), env.action_dim());
        let model = EnsembleDynamics::new(o, a, &cfg.model, seed)?;
        let head = RewardHead::new(o, &cfg.model, seed)?;
        let buffer = ReplayBuffer::new(cfg.model.buffer_capacity, o, a)?;
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            env,
            model,
            head,
            buffer,
            next_episode: 0,
            returns: Vec::new(),
            diverged: false,
            out_dir: None,
            started: Instant::now(),
        })
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, HarnessError> {
        ck.config.validate()?;
        let env = Env::new(&ck.config.env)?;
        let env_dims = (env.obs_dim(), env.action_dim());
        if (ck.obs_dim(), ck.action_dim()) != env_dims {
            return Err(HarnessError::DimensionMismatch {
                checkpoint: (ck.obs_dim(), ck.action_dim()),
                env: env_dims,
            });
        }
        Ok(Self {
            cfg: ck.config,
            seed: ck.seed,
            env,
            model: ck.model,
            head: ck.head,
            buffer: ck.buffer,
            next_episode: ck.next_episode,
            returns: ck.returns,
            diverged: false,
            out_dir: None,
            started: Instant::now(),
        })
    }

    /// Episode logs, depth dumps and checkpoints go under `dir`.
    pub fn with_output_dir(mut self, dir: &Path) -> Self {
        self.out_dir = Some(dir.to_path_buf());
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn next_episode(&self) -> usize {
        self.next_episode
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn model(&self) -> &EnsembleDynamics {
        &self.model
    }

    pub fn head(&self) -> &RewardHead {
        &self.head
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged
    }

    pub fn is_finished(&self) -> bool {
        self.diverged || self.next_episode >= self.cfg.run.episodes
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.cfg.clone(),
            self.seed,
            self.next_episode,
            self.model.clone(),
            self.head.clone(),
            self.buffer.clone(),
            self.returns.clone(),
        )
    }

    /// Randomly initialized models whose normalization statistics come from
    /// one uniformly random episode; no fitting takes place.
    pub fn untrained_checkpoint(cfg: &RunConfig, seed: u64) -> Result<Checkpoint, HarnessError> {
        let mut run = SeedRun::new(cfg, seed)?;
        run.play_episode(true)?;
        let obs = run.buffer.obs_stats().clone();
        run.model.set_stats(obs.clone(), run.buffer.delta_stats().clone())?;
        run.head.set_stats(obs, run.buffer.reward_stats().clone())?;
        Ok(run.checkpoint())
    }

    fn episode_log(&self, ep: usize) -> Result<Option<BufWriter<File>>, HarnessError> {
        match (&self.out_dir, self.cfg.run.episode_logs) {
            (Some(dir), true) => {
                let d = dir.join("episodes").join(format!("seed_{}", self.seed));
                fs::create_dir_all(&d)?;
                let f = File::create(d.join(format!("episode_{ep:04}.jsonl")))?;
                Ok(Some(BufWriter::new(f)))
            }
            _ => Ok(None),
        }
    }

    fn depth_dir(&self, ep: usize) -> Result<Option<PathBuf>, HarnessError> {
        match (&self.out_dir, self.cfg.run.debug_depth_dump) {
            (Some(dir), true) => {
                let d = dir
                    .join("depth")
                    .join(format!("seed_{}", self.seed))
                    .join(format!("episode_{ep:04}"));
                fs::create_dir_all(&d)?;
                Ok(Some(d))
            }
            _ => Ok(None),
        }
    }

    /// Plays episode `next_episode` and stores its transitions. Returns the
    /// tally and the per-step mean of `beta * info_gain` and extrinsic value.
    fn play_episode(&mut self, random: bool) -> Result<(EpisodeTally, f64, f64), HarnessError> {
        let ep = self.next_episode;
        let seed = self.seed;
        let beta = self.cfg.effective_beta();
        let mut log = self.episode_log(ep)?;
        let depth_dir = self.depth_dir(ep)?;
        let mut rand_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::RandomPolicy, ep as u64));
        let a_dim = self.env.action_dim();
        let first = self.env.reset(derive_seed(seed, Stream::Env, ep as u64))?;
        let mut obs = first.obs;
        let mut tally = EpisodeTally::default();
        let (mut ig_sum, mut ext_sum, mut planned) = (0.0, 0.0, 0usize);
        let mut warm: Option<Vec<f64>> = None;
        let mut step = 0;
        loop {
            let (action, plan) = if random {
                (random_action(&mut rand_rng, a_dim), None)
            } else {
                let res = plan_step(
                    &self.model,
                    &self.head,
                    &self.cfg.planner,
                    beta,
                    &obs,
                    warm.as_deref(),
                    planner_seed(seed, self.cfg.planner.seed, ep, step),
                )?;
                if self.cfg.planner.warm_start {
                    warm = Some(res.distribution.mean.clone());
                }
                ig_sum += beta * res.best.info_gain;
                ext_sum += res.best.extrinsic;
                planned += 1;
                (res.action, Some(res.best))
            };
            let res = self.env.step(&action)?;
            self.buffer.push(Transition {
                episode: ep as u64,
                step: step as u64,
                obs: obs.clone(),
                action: action.clone(),
                reward: res.reward,
                next_obs: res.obs.clone(),
                done: res.done,
            })?;
            tally.add(res.reward, &res.info);
            if let Some(d) = &depth_dir {
                let g = &res.tactile.depth;
                let f = File::create(d.join(format!("step_{step:03}.pgm")))?;
                let scale = g.max().max(1e-9);
                write_pgm(BufWriter::new(f), g.width(), g.height(), g.data(), scale)
                    .map_err(|e| HarnessError::Io(e.to_string()))?;
            }
            if let Some(w) = log.as_mut() {
                let rec = StepRecord {
                    step,
                    obs: res.obs.clone(),
                    action,
                    reward: res.reward,
                    done: res.done,
                    info: res.info.clone(),
                    plan,
                };
                writeln!(w, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
            }
            obs = res.obs;
            step += 1;
            if res.done {
                break;
            }
        }
        if let Some(mut w) = log {
            w.flush()?;
        }
        let per = |s: f64| if planned == 0 { 0.0 } else { s / planned as f64 };
        Ok((tally, per(ig_sum), per(ext_sum)))
    }

    fn fit(&mut self, ep: usize) -> Result<Option<TrainReport>, ModelError> {
        let n = self.buffer.len();
        if n < 2 {
            return Ok(None);
        }
        let mut opts = self.cfg.model.fit_options();
        opts.batch_size = opts.batch_size.min(n);
        let report = fit_models(
            &mut self.model,
            &mut self.head,
            &self.buffer,
            &opts,
            derive_seed(self.seed, Stream::Shuffle, ep as u64),
        )?;
        if report.member_nll.iter().chain([&report.reward_nll]).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Some(report))
    }

    /// Plays and learns from one episode. A non-finite fit marks the seed
    /// as diverged and yields a row with status `diverged`.
    pub fn run_episode(&mut self) -> Result<MetricsRow, HarnessError> {
        if self.is_finished() {
            return Err(HarnessError::Config("run already finished".into()));
        }
        let ep = self.next_episode;
        let random = self.cfg.run.random_policy || ep < self.cfg.run.warmup_episodes;
        let (tally, ig, ext) = self.play_episode(random)?;
        let (val_mse, status) = match self.fit(ep) {
            Ok(r) => (r.map_or(f64::NAN, |r| r.validation_mse), RowStatus::Ok),
            Err(ModelError::NonFinite | ModelError::Divergence { .. }) => {
                self.diverged = true;
                (f64::NAN, RowStatus::Diverged)
            }
            Err(e) => return Err(e.into()),
        };
        self.returns.push(tally.ret);
        self.next_episode += 1;
        let w = self.cfg.run.window.max(1);
        let tail = &self.returns[self.returns.len().saturating_sub(w)..];
        let row = MetricsRow {
            seed: self.seed,
            episode: ep,
            episode_return: tally.ret,
            success: tally.success(&self.cfg.env),
            window_mean_return: tail.iter().sum::<f64>() / tail.len() as f64,
            mean_info_gain: ig,
            mean_extrinsic: ext,
            val_mse,
            wall_clock_s: if self.cfg.run.wall_clock {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
            status,
        };
        if let Some(dir) = &self.out_dir {
            let period = self.cfg.run.checkpoint_period;
            let at_period = period > 0 && self.next_episode % period == 0;
            if at_period || self.is_finished() {
                self.checkpoint().save(&checkpoint_path(dir, self.seed, self.next_episode))?;
            }
        }
        Ok(row)
    }
}

/// Path of the checkpoint taken after `episodes` episodes of `seed`.
pub fn checkpoint_path(dir: &Path, seed: u64, episodes: usize) -> PathBuf {
    dir.join("checkpoints")
        .join(format!("seed_{seed}_ep_{episodes:04}.json"))
}

/// Outcome of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub metrics_path: PathBuf,
    pub rows: Vec<MetricsRow>,
    /// Seeds halted by divergence.
    pub diverged: Vec<u64>,
    /// Last checkpoint of each seed, in seed order.
    pub checkpoints: Vec<PathBuf>,
}

fn open_metrics(path: &Path, append: bool) -> Result<BufWriter<File>, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let fresh = !append || !path.exists();
    let f = if fresh {
        File::create(path).map_err(io)?
    } else {
        OpenOptions::new().append(true).open(path).map_err(io)?
    };
    let mut w = BufWriter::new(f);
    if fresh {
        write_header(&mut w).map_err(io)?;
    }
    Ok(w)
}

fn prepare_output(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir.join("checkpoints"))
        .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))
}

fn drive(
    mut run: SeedRun,
    metrics: &mut BufWriter<File>,
    summary: &mut RunSummary,
) -> Result<(), HarnessError> {
    let dir = run.out_dir.clone().expect("output directory set");
    while !run.is_finished() {
        let row = run.run_episode()?;
        writeln!(metrics, "{}", row.to_csv())?;
        metrics.flush()?;
        summary.rows.push(row);
    }
    if run.is_diverged() {
        summary.diverged.push(run.seed);
        run.checkpoint()
            .save(&checkpoint_path(&dir, run.seed, run.next_episode))?;
    }
    summary
        .checkpoints
        .push(checkpoint_path(&dir, run.seed, run.next_episode));
    Ok(())
}

/// Trains every configured seed in turn, writing `metrics.csv`, episode logs
/// and checkpoints under the output directory. A diverging seed stops with a
/// diagnostic row; the remaining seeds still run.
pub fn train_run(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let dir = cfg.run.output_dir.clone();
    prepare_output(&dir)?;
    let metrics_path = dir.join("metrics.csv");
    let mut metrics = open_metrics(&metrics_path, false)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    let mut summary = RunSummary {
        metrics_path,
        rows: Vec::new(),
        diverged: Vec::new(),
        checkpoints: Vec::new(),
    };
    for &seed in &cfg.run.seeds {
        let run = SeedRun::new(cfg, seed)?.with_output_dir(&dir);
        drive(run, &mut metrics, &mut summary)?;
    }
    Ok(summary)
}

/// Continues a checkpointed seed to its configured episode count, appending
/// rows to `metrics.csv` under `output_dir`.
pub fn resume_run(ck: Checkpoint, output_dir: &Path) -> Result<RunSummary, HarnessError> {
    prepare_output(output_dir)?;
    let metrics_path = output_dir.join("metrics.csv");
    let mut metrics = open_metrics(&metrics_path, true)?;
    let mut summary = RunSummary {
        metrics_path,
        rows: Vec::new(),
        diverged: Vec::new(),
        checkpoints: Vec::new(),
    };
    let run = SeedRun::from_checkpoint(ck)?.with_output_dir(output_dir);
    drive(run, &mut metrics, &mut summary)?;
    Ok(summary)
}
