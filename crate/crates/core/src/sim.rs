//! Synthetic annotators for load and invariant testing.
//!
//! Each simulated annotator logs in through the [`Service`], asks for its
//! task and submits a verdict until it runs out of images or the step
//! budget is spent. The harness keeps its own tally of judgment counts and
//! checks the engine against it: no duplicate judgments, comments exactly
//! on yes verdicts, counts that agree with the store, and (for sequential
//! runs) that every offer went to an unseen image of lowest load, where
//! load counts judgments plus open offers.
//!
//! Sequential runs are a pure function of the campaign and the seed.
//! Parallel runs keep per-annotator randomness seeded but interleave
//! nondeterministically.

use std::collections::HashSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytics::{judgment_depth_table, DepthRow};
use crate::error::{Error, Result};
use crate::model::{config_error, CampaignId, CampaignStatus, CommentDraft, ImageId, Verdict};
use crate::service::{Service, SubmitRequest};

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub seed: u64,
    pub yes_rate: f64,
    pub annotators: usize,
    /// Total submissions across all annotators; `None` runs to exhaustion.
    pub steps: Option<usize>,
    pub parallelism: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            yes_rate: 0.06,
            annotators: 10,
            steps: None,
            parallelism: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub duplicate_judgments: usize,
    pub comment_mismatches: usize,
    pub count_mismatches: usize,
    /// Offers of an at-quota image while an under-quota unseen image existed.
    pub quota_violations: usize,
    /// Offers of an image with more load than some other unseen image.
    pub minimality_violations: usize,
    /// Exhausted responses while unseen images remained.
    pub false_exhaustions: usize,
    /// Largest spread of loads among under-quota images, sampled after
    /// every submission. Only tracked for sequential runs.
    pub max_spread: Option<u32>,
}

impl InvariantReport {
    pub fn violations(&self) -> usize {
        self.duplicate_judgments
            + self.comment_mismatches
            + self.count_mismatches
            + self.quota_violations
            + self.minimality_violations
            + self.false_exhaustions
    }

    pub fn balanced(&self) -> bool {
        self.max_spread.is_none_or(|s| s <= 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimSummary {
    pub seed: u64,
    pub yes_rate: f64,
    pub annotators: usize,
    pub steps: usize,
    pub yes_judgments: usize,
    pub exhausted_annotators: usize,
    pub images: usize,
    pub judged_images: usize,
    pub commented_images: usize,
    /// Share of judged images with at least one comment.
    pub commented_fraction: f64,
    pub depth: Vec<DepthRow>,
    pub checks: InvariantReport,
}

impl fmt::Display for SimSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed                 {}", self.seed)?;
        writeln!(f, "annotators           {}", self.annotators)?;
        writeln!(f, "submissions          {}", self.steps)?;
        writeln!(f, "yes verdicts         {}", self.yes_judgments)?;
        writeln!(f, "exhausted annotators {}", self.exhausted_annotators)?;
        writeln!(
            f,
            "judged images        {} of {}",
            self.judged_images, self.images
        )?;
        writeln!(
            f,
            "commented images     {} ({:.2}%)",
            self.commented_images,
            100.0 * self.commented_fraction
        )?;
        writeln!(f)?;
        writeln!(
            f,
            "min_judgments,images_with_comment,total_comments,images_without_comment"
        )?;
        for r in &self.depth {
            writeln!(
                f,
                "{},{},{},{}",
                r.min_judgments, r.images_with_comment, r.total_comments, r.images_without_comment
            )?;
        }
        writeln!(f)?;
        let c = &self.checks;
        writeln!(f, "duplicate judgments  {}", c.duplicate_judgments)?;
        writeln!(f, "comment mismatches   {}", c.comment_mismatches)?;
        writeln!(f, "count mismatches     {}", c.count_mismatches)?;
        writeln!(f, "quota violations     {}", c.quota_violations)?;
        writeln!(f, "minimality violations {}", c.minimality_violations)?;
        writeln!(f, "false exhaustions    {}", c.false_exhaustions)?;
        match c.max_spread {
            Some(s) => writeln!(f, "max count spread     {s}")?,
            None => writeln!(f, "max count spread     not tracked (parallel run)")?,
        }
        write!(
            f,
            "invariants           {}",
            if c.violations() == 0 {
                "ok"
            } else {
                "VIOLATED"
            }
        )
    }
}

/// Judgment counts and loads (judgments plus open offers) as seen by the
/// harness, independent of the engine.
struct Tally {
    counts: Vec<u32>,
    load: Vec<u32>,
    /// `levels[k]` = number of images with load k.
    levels: Vec<usize>,
}

impl Tally {
    fn new(counts: Vec<u32>, load: Vec<u32>) -> Self {
        let mut t = Tally {
            counts,
            load: Vec::new(),
            levels: Vec::new(),
        };
        for l in load {
            t.bump_level(l as usize);
            t.load.push(l);
        }
        t
    }

    fn bump_level(&mut self, level: usize) {
        if self.levels.len() <= level {
            self.levels.resize(level + 1, 0);
        }
        self.levels[level] += 1;
    }

    fn offer(&mut self, image: ImageId) {
        let l = &mut self.load[image.index()];
        self.levels[*l as usize] -= 1;
        *l += 1;
        let l = *l as usize;
        self.bump_level(l);
    }

    fn min_level(&self) -> u32 {
        self.levels.iter().position(|&n| n > 0).unwrap_or(0) as u32
    }

    /// Spread of loads among images still below `quota`.
    fn spread_below(&self, quota: u32) -> u32 {
        let below = &self.levels[..self.levels.len().min(quota as usize)];
        let lo = below.iter().position(|&n| n > 0);
        let hi = below.iter().rposition(|&n| n > 0);
        match (lo, hi) {
            (Some(lo), Some(hi)) => (hi - lo) as u32,
            _ => 0,
        }
    }
}

struct Agent {
    token: String,
    rng: ChaCha8Rng,
    judged: HashSet<ImageId>,
    /// Open offer, already checked and tallied when it was made.
    pending: Option<ImageId>,
    exhausted: bool,
}

struct Shared<'a> {
    service: &'a Service,
    config: &'a SimConfig,
    quota: u32,
    categories: Vec<String>,
    sequential: bool,
    budget: usize,
    spent: AtomicUsize,
    tally: Mutex<Tally>,
    checks: Mutex<InvariantReport>,
    yes: AtomicUsize,
}

impl Shared<'_> {
    fn take_step(&self) -> Option<usize> {
        let n = self.spent.fetch_add(1, Ordering::SeqCst);
        if n < self.budget {
            Some(n)
        } else {
            self.spent.fetch_sub(1, Ordering::SeqCst);
            None
        }
    }

    /// One task/submit round for `agent`. Returns false once it is done.
    fn step(&self, agent: &mut Agent) -> Result<bool> {
        let task = self.service.next_task(&agent.token)?;
        let Some(image) = task.image_id() else {
            let tally = self.tally.lock();
            if agent.judged.len() < tally.counts.len() {
                self.checks.lock().false_exhaustions += 1;
            }
            agent.exhausted = true;
            return Ok(false);
        };
        let Some(n) = self.take_step() else {
            return Ok(false);
        };
        if agent.judged.contains(&image) {
            self.checks.lock().duplicate_judgments += 1;
        }
        if agent.pending != Some(image) {
            let mut tally = self.tally.lock();
            if self.sequential {
                self.check_offer(&tally, agent, image);
            }
            tally.offer(image);
            agent.pending = Some(image);
        }

        let request = if agent.rng.random_bool(self.config.yes_rate) {
            let trigger = &self.categories[agent.rng.random_range(0..self.categories.len())];
            self.yes.fetch_add(1, Ordering::Relaxed);
            SubmitRequest {
                image_id: image,
                verdict: Verdict::Yes,
                comment: Some(CommentDraft::new(format!("sim-{n}"), trigger.clone())),
            }
        } else {
            SubmitRequest {
                image_id: image,
                verdict: Verdict::No,
                comment: None,
            }
        };
        // tally before the next offer can be computed by another thread
        let mut tally = self.tally.lock();
        let response = self.service.submit_judgment(&agent.token, request)?;
        tally.counts[image.index()] += 1;
        agent.judged.insert(image);
        if self.sequential {
            let spread = tally.spread_below(self.quota);
            let mut checks = self.checks.lock();
            checks.max_spread = Some(checks.max_spread.unwrap_or(0).max(spread));
        }
        agent.pending = response.next.image_id();
        match agent.pending {
            Some(next) => {
                if self.sequential {
                    self.check_offer(&tally, agent, next);
                }
                tally.offer(next);
            }
            None => {
                if agent.judged.len() < tally.counts.len() {
                    self.checks.lock().false_exhaustions += 1;
                }
                agent.exhausted = true;
            }
        }
        Ok(!agent.exhausted)
    }

    /// Brute-force check, before tallying it, that a fresh offer has the
    /// lowest load among the annotator's unseen images.
    fn check_offer(&self, tally: &Tally, agent: &Agent, image: ImageId) {
        let offered = tally.load[image.index()];
        if offered <= tally.min_level() {
            return;
        }
        let lowest_unseen = tally
            .load
            .iter()
            .enumerate()
            .filter(|(i, _)| !agent.judged.contains(&ImageId(*i as u32)))
            .map(|(_, &c)| c)
            .min()
            .unwrap_or(offered);
        if lowest_unseen < offered {
            let mut checks = self.checks.lock();
            checks.minimality_violations += 1;
            if offered >= self.quota && lowest_unseen < self.quota {
                checks.quota_violations += 1;
            }
        }
    }

    fn run(&self, agents: &mut [Agent]) -> Result<()> {
        let mut active: Vec<usize> = (0..agents.len()).collect();
        while !active.is_empty() {
            let mut still = Vec::with_capacity(active.len());
            for &i in &active {
                if self.step(&mut agents[i])? {
                    still.push(i);
                }
            }
            if self.spent.load(Ordering::SeqCst) >= self.budget {
                break;
            }
            active = still;
        }
        Ok(())
    }
}

/// Adds `config.annotators` fresh annotators to an active campaign and
/// drives them through the workflow.
pub fn simulate(service: &Service, campaign: CampaignId, config: &SimConfig) -> Result<SimSummary> {
    if !(0.0..=1.0).contains(&config.yes_rate) {
        return Err(config_error("yes_rate", "must be within [0, 1]"));
    }
    if config.annotators == 0 {
        return Err(Error::InvalidCount);
    }
    let shared_state = service.store().campaign(campaign)?;
    let (quota, categories, baseline, tally) = {
        let mut state = shared_state.lock();
        if state.campaign().status != CampaignStatus::Active {
            return Err(Error::CampaignClosed(state.campaign().status.to_string()));
        }
        state.reseed(config.seed);
        let mut counts = vec![0u32; state.images().len()];
        for j in state.judgments() {
            counts[j.image.index()] += 1;
        }
        // offers left open by earlier sessions
        let mut load = counts.clone();
        for a in state.annotators() {
            if let Some(image) = state.assignment().current_offer(a.id) {
                load[image.index()] += 1;
            }
        }
        (
            state.campaign().quota,
            state.campaign().categories.clone(),
            state.judgments().len(),
            Tally::new(counts, load),
        )
    };

    let creds = service.generate_annotators(campaign, config.annotators as i64, None)?;
    let mut agents = creds
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            Ok(Agent {
                token: service.login(&c.username, &c.password)?.token,
                rng,
                judged: HashSet::new(),
                pending: None,
                exhausted: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let parallelism = config.parallelism.clamp(1, agents.len());
    let shared = Shared {
        service,
        config,
        quota,
        categories,
        sequential: parallelism == 1,
        budget: config.steps.unwrap_or(usize::MAX),
        spent: AtomicUsize::new(0),
        tally: Mutex::new(tally),
        checks: Mutex::new(InvariantReport::default()),
        yes: AtomicUsize::new(0),
    };

    if parallelism == 1 {
        shared.run(&mut agents)?;
    } else {
        let chunk = agents.len().div_ceil(parallelism);
        std::thread::scope(|scope| {
            let workers: Vec<_> = agents
                .chunks_mut(chunk)
                .map(|group| {
                    let shared = &shared;
                    scope.spawn(move || shared.run(group))
                })
                .collect();
            workers
                .into_iter()
                .map(|w| w.join().expect("simulation worker panicked"))
                .collect::<Result<Vec<()>>>()
        })?;
    }

    let steps = shared.spent.load(Ordering::SeqCst);
    let mut checks = shared.checks.into_inner();
    let tally = shared.tally.into_inner();
    let state = shared_state.lock();

    if state.judgments().len() != baseline + steps {
        checks.count_mismatches += 1;
    }
    let mut pairs = HashSet::new();
    for j in state.judgments() {
        if !pairs.insert((j.annotator, j.image)) {
            checks.duplicate_judgments += 1;
        }
        if (j.verdict == Verdict::Yes) != j.comment.is_some() {
            checks.comment_mismatches += 1;
        }
    }
    for img in state.images() {
        let stored = state.judgments_on(img.id).count() as u32;
        let expected = tally.counts[img.id.index()];
        if stored != expected
            || state.assignment().count(img.id) != Some(expected)
            || state.assignment().loads()[img.id.index()] != tally.load[img.id.index()]
        {
            checks.count_mismatches += 1;
        }
    }

    let snapshot = state.snapshot();
    let judged_images = snapshot
        .images
        .iter()
        .filter(|i| !i.judgments.is_empty())
        .count();
    let commented_images = snapshot.images.iter().filter(|i| i.has_comment()).count();
    Ok(SimSummary {
        seed: config.seed,
        yes_rate: config.yes_rate,
        annotators: agents.len(),
        steps,
        yes_judgments: shared.yes.into_inner(),
        exhausted_annotators: agents.iter().filter(|a| a.exhausted).count(),
        images: snapshot.images.len(),
        judged_images,
        commented_images,
        commented_fraction: if judged_images == 0 {
            0.0
        } else {
            commented_images as f64 / judged_images as f64
        },
        depth: judgment_depth_table(&snapshot),
        checks,
    })
}
