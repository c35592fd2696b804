//! Monte Carlo estimation of the average fidelity.
//!
//! Sample `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so a
//! run is reproducible bit for bit regardless of how samples are scheduled.
//! Batches are reduced in index order.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{class_branch_vectors, optimal_guess, tree_branch_vectors, GuessRule};
use crate::geometry::{angles_to_vector, BlochVector, Geometry};
use crate::optimizer::DEFAULT_SEED;
use crate::par::map_indexed;
use crate::quadrature::make_quadrature;
use crate::strategy::{FixedStrategy, OutcomeHistory, StrategyTree, TwoStageStrategy};

/// Largest run for which per-sample trace rows are kept.
pub const MAX_TRACE_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 100_000,
            seed: DEFAULT_SEED,
            batch_size: 1000,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 100 {
            return Err(Error::validation("at least 100 samples are required"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub mean: f64,
    /// Sample standard deviation over `√samples`.
    pub stderr: f64,
    /// Standard error from the spread of batch means.
    pub batch_stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub sample: usize,
    pub state: [f64; 3],
    /// Outcomes, latest first.
    pub outcomes: String,
    pub guess: [f64; 3],
    pub fidelity: f64,
}

/// Anything [`simulate_fidelity`] can run.
#[derive(Debug, Clone)]
pub enum Strategy {
    Tree(StrategyTree),
    Fixed(FixedStrategy),
    TwoStage(TwoStageStrategy),
}

impl Strategy {
    pub fn geometry(&self) -> Geometry {
        match self {
            Strategy::Tree(t) => t.geometry(),
            Strategy::Fixed(f) => f.geometry(),
            Strategy::TwoStage(s) => s.geometry(),
        }
    }

    pub fn copies(&self) -> usize {
        match self {
            Strategy::Tree(t) => t.copies(),
            Strategy::Fixed(f) => f.copies(),
            Strategy::TwoStage(s) => s.copies(),
        }
    }
}

/// Uniform draw from the sphere (uniform cos θ and azimuth) or the circle.
pub fn sample_state(geometry: Geometry, rng: &mut impl Rng) -> BlochVector {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = TAU * rng.random::<f64>();
    angles_to_vector(geometry, z.clamp(-1.0, 1.0).acos(), phi)
}

fn draw(rng: &mut ChaCha8Rng, n: BlochVector, m: BlochVector) -> u8 {
    let p_plus = 0.5 * (1.0 + n.dot(m.vec()));
    u8::from(rng.random::<f64>() >= p_plus)
}

/// Precomputed guesses so each sample is a table lookup.
enum Prepared<'a> {
    Tree {
        tree: &'a StrategyTree,
        guesses: Vec<BlochVector>,
    },
    Fixed {
        fixed: &'a FixedStrategy,
        order: Vec<usize>,
        /// Per class; `None` means the central-limit rule applied on the fly.
        guesses: Option<Vec<BlochVector>>,
    },
    TwoStage {
        strategy: &'a TwoStageStrategy,
        pilot_guesses: Vec<BlochVector>,
    },
}

fn tree_guesses(tree: &StrategyTree, guess: &GuessRule) -> Result<Vec<BlochVector>> {
    match guess {
        GuessRule::OptimalGuess => {
            let rule = make_quadrature(tree.geometry(), tree.copies() + 1)?;
            Ok(tree_branch_vectors(tree, &rule)?
                .iter()
                .map(|b| optimal_guess(tree.geometry(), b.v))
                .collect())
        }
        GuessRule::Fixed(map) => OutcomeHistory::all(tree.copies())
            .map(|h| {
                map.get(&h.bits())
                    .copied()
                    .ok_or_else(|| Error::validation(format!("no guess given for branch {h}")))
            })
            .collect(),
        GuessRule::CentralLimit => Err(Error::validation(
            "the central-limit guess needs a fixed strategy",
        )),
    }
}

impl<'a> Prepared<'a> {
    fn new(strategy: &'a Strategy, guess: &GuessRule) -> Result<Self> {
        Ok(match strategy {
            Strategy::Tree(tree) => Prepared::Tree {
                tree,
                guesses: tree_guesses(tree, guess)?,
            },
            Strategy::Fixed(fixed) => {
                let guesses = match guess {
                    GuessRule::CentralLimit => None,
                    GuessRule::OptimalGuess => {
                        let rule = make_quadrature(fixed.geometry(), fixed.copies() + 1)?;
                        Some(
                            class_branch_vectors(fixed, &rule)?
                                .iter()
                                .map(|b| optimal_guess(fixed.geometry(), b.v))
                                .collect(),
                        )
                    }
                    GuessRule::Fixed(map) => Some(
                        (0..fixed.class_count())
                            .map(|c| {
                                map.get(&c).copied().ok_or_else(|| {
                                    Error::validation(format!("no guess given for class {c}"))
                                })
                            })
                            .collect::<Result<_>>()?,
                    ),
                };
                Prepared::Fixed {
                    fixed,
                    order: fixed.round_robin_order(),
                    guesses,
                }
            }
            Strategy::TwoStage(strategy) => {
                if *guess != GuessRule::OptimalGuess {
                    return Err(Error::validation(
                        "the two-stage scheme forms its own guess; use the optimal-guess rule",
                    ));
                }
                Prepared::TwoStage {
                    strategy,
                    pilot_guesses: tree_guesses(strategy.pilot(), guess)?,
                }
            }
        })
    }

    /// One sample: returns the fidelity and, when tracing, the trace row.
    fn run(
        &self,
        geometry: Geometry,
        rng: &mut ChaCha8Rng,
        trace: bool,
    ) -> (f64, BlochVector, BlochVector, String) {
        let n = sample_state(geometry, rng);
        let mut outcomes = String::new();
        let mut record = |i: u8| {
            if trace {
                outcomes.insert(0, if i == 0 { '0' } else { '1' });
            }
        };
        let guess = match self {
            Prepared::Tree { tree, guesses } => {
                let mut h = OutcomeHistory::EMPTY;
                for _ in 0..tree.copies() {
                    let i = draw(rng, n, tree.direction(h));
                    record(i);
                    h = h.push(i).expect("bit");
                }
                guesses[h.bits() as usize]
            }
            Prepared::Fixed {
                fixed,
                order,
                guesses,
            } => {
                let mut counts = vec![0usize; fixed.axes().len()];
                for &axis in order {
                    let i = draw(rng, n, fixed.axes()[axis].0);
                    record(i);
                    if i == 0 {
                        counts[axis] += 1;
                    }
                }
                match guesses {
                    Some(g) => g[fixed.class_index(&counts)],
                    None => crate::estimator::central_limit_guess(
                        &crate::strategy::OutcomeCounts {
                            counts,
                            multiplicity: 1.0,
                        },
                        fixed,
                    )
                    .expect("counts drawn from the strategy"),
                }
            }
            Prepared::TwoStage {
                strategy,
                pilot_guesses,
            } => {
                let pilot = strategy.pilot();
                let mut h = OutcomeHistory::EMPTY;
                for _ in 0..pilot.copies() {
                    let i = draw(rng, n, pilot.direction(h));
                    record(i);
                    h = h.push(i).expect("bit");
                }
                let m0 = pilot_guesses[h.bits() as usize];
                let axes = strategy.exploration_axes(m0);
                let mut plus = vec![0usize; axes.len()];
                for j in 0..strategy.exploration_size() {
                    let a = strategy.exploration_axis_index(j);
                    let i = draw(rng, n, axes[a]);
                    record(i);
                    if i == 0 {
                        plus[a] += 1;
                    }
                }
                strategy.final_guess(m0, &plus)
            }
        };
        (0.5 * (1.0 + n.dot(guess.vec())), n, guess, outcomes)
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, other: Moments) -> Moments {
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }
}

/// Average fidelity estimate with standard errors.
pub fn simulate_fidelity(
    strategy: &Strategy,
    guess: &GuessRule,
    cfg: &McConfig,
) -> Result<McResult> {
    Ok(simulate(strategy, guess, cfg, false)?.0)
}

/// [`simulate_fidelity`] that also returns one row per sample.
pub fn simulate_with_trace(
    strategy: &Strategy,
    guess: &GuessRule,
    cfg: &McConfig,
) -> Result<(McResult, Vec<TraceRow>)> {
    if cfg.samples > MAX_TRACE_SAMPLES {
        return Err(Error::Resource {
            what: "traced samples",
            required: cfg.samples as u64,
            allowed: MAX_TRACE_SAMPLES as u64,
        });
    }
    simulate(strategy, guess, cfg, true)
}

fn simulate(
    strategy: &Strategy,
    guess: &GuessRule,
    cfg: &McConfig,
    trace: bool,
) -> Result<(McResult, Vec<TraceRow>)> {
    cfg.validate()?;
    let prepared = Prepared::new(strategy, guess)?;
    let geometry = strategy.geometry();
    let batches = cfg.samples.div_ceil(cfg.batch_size);
    let parts = map_indexed(batches, |b| {
        let start = b * cfg.batch_size;
        let end = (start + cfg.batch_size).min(cfg.samples);
        let mut rows = Vec::new();
        let mut acc = Moments {
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        };
        for i in start..end {
            let mut rng = sample_rng(cfg.seed, i);
            let (f, n, g, outcomes) = prepared.run(geometry, &mut rng, trace);
            // Welford update
            acc.count += 1.0;
            let delta = f - acc.mean;
            acc.mean += delta / acc.count;
            acc.m2 += delta * (f - acc.mean);
            if trace {
                rows.push(TraceRow {
                    sample: i,
                    state: n.vec().to_array(),
                    outcomes,
                    guess: g.vec().to_array(),
                    fidelity: f,
                });
            }
        }
        (acc, rows)
    });

    let mut total: Option<Moments> = None;
    let mut batch_means = Vec::with_capacity(parts.len());
    let mut rows = Vec::new();
    for (m, r) in parts {
        batch_means.push(m.mean);
        total = Some(match total {
            None => m,
            Some(t) => t.merge(m),
        });
        rows.extend(r);
    }
    let total = total.expect("at least one batch");
    let n = total.count;
    let stderr = (total.m2 / (n - 1.0)).sqrt() / n.sqrt();
    let batch_stderr = if batch_means.len() > 1 {
        let k = batch_means.len() as f64;
        let mean = batch_means.iter().sum::<f64>() / k;
        let var = batch_means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        f64::NAN
    };
    Ok((
        McResult {
            mean: total.mean,
            stderr,
            batch_stderr,
            samples: cfg.samples,
            seed: cfg.seed,
        },
        rows,
    ))
}

/// Trace rows as CSV.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("sample,n_x,n_y,n_z,outcomes,guess_x,guess_y,guess_z,f\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.sample,
            r.state[0],
            r.state[1],
            r.state[2],
            r.outcomes,
            r.guess[0],
            r.guess[1],
            r.guess[2],
            r.fidelity
        ));
    }
    out
}
