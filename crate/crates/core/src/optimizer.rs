//! Maximization of the average fidelity over measurement trees.
//!
//! The search is coordinate-wise over tree nodes. Changing the axis `m` at a
//! history `h` only touches the branch vectors of the leaves below `h`, and
//! each of those is affine in `m`:
//!
//! ```text
//! V(x) = (a_x + s_x T_x m) / 2,   a_x = ∫ n w_x,   T_x = ∫ n nᵀ w_x,
//! ```
//!
//! where `w_x` is the probability of the rest of the branch and `s_x = ±1`
//! is the sign of the outcome at `h`. A node update therefore reduces to a
//! two-angle (one-angle on the circle) maximization of a cheap function,
//! solved by a candidate scan followed by Nelder–Mead.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{evaluate_tree, tree_branch_vectors, GuessRule};
use crate::geometry::{
    angles_to_vector, orthonormal_frame, vector_to_angles, BlochVector, Geometry, Rotation, Vec3,
};
use crate::par::map_indexed;
use crate::quadrature::{make_quadrature, QuadratureRule};
use crate::simplex::{maximize, SimplexOptions};
use crate::strategy::{outcome_sign, OutcomeHistory, StrategyTree};
use crate::sum::sum;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED_10CC_2003;
/// Hard ceiling on the copies [`optimize_tree`] accepts.
pub const MAX_OPTIMIZE_COPIES: usize = 8;
/// Copies allowed without raising [`OptimizationConfig::copy_budget`].
pub const DEFAULT_COPY_BUDGET: usize = 6;
/// Largest N for the greedy builder, whose cost is linear in the node count.
pub const MAX_GREEDY_COPIES: usize = crate::estimator::MAX_EXACT_TREE_COPIES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Root axis along z (x on the circle); in 3D the 0-branch axis at depth
    /// one is held in the xz-plane.
    FixRoot,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationConfig {
    /// Maximum number of full sweeps over the tree per restart.
    pub max_iterations: usize,
    /// A restart stops once a sweep improves F by less than this.
    pub f_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub gauge: Gauge,
    /// Largest N accepted; capped at [`MAX_OPTIMIZE_COPIES`].
    pub copy_budget: usize,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            max_iterations: 500,
            f_tolerance: 1e-10,
            restarts: 8,
            seed: DEFAULT_SEED,
            gauge: Gauge::FixRoot,
            copy_budget: DEFAULT_COPY_BUDGET,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.f_tolerance.is_nan() || self.f_tolerance <= 0.0 {
            return Err(Error::validation("f_tolerance must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::validation("restarts must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations must be at least 1"));
        }
        Ok(())
    }

    fn check_copies(&self, copies: usize) -> Result<()> {
        if copies == 0 {
            return Err(Error::validation("N must be at least 1"));
        }
        let allowed = self.copy_budget.min(MAX_OPTIMIZE_COPIES);
        if copies > allowed {
            return Err(Error::Resource {
                what: "optimized copies",
                required: copies as u64,
                allowed: allowed as u64,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub strategy: StrategyTree,
    pub fidelity: f64,
    /// Sweeps used by the best restart.
    pub iterations: usize,
    pub best_restart: usize,
    pub converged: bool,
    pub restart_fidelities: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AngleNode {
    pub history: String,
    pub direction: [f64; 3],
    pub polar: f64,
    pub azimuth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationDocument {
    pub geometry: Geometry,
    #[serde(rename = "N")]
    pub copies: usize,
    pub fidelity: f64,
    pub iterations: usize,
    pub best_restart: usize,
    pub converged: bool,
    pub restart_fidelities: Vec<f64>,
    pub nodes: Vec<AngleNode>,
}

impl OptimizationResult {
    pub fn to_document(&self) -> OptimizationDocument {
        let g = self.strategy.geometry();
        let nodes = (0..self.strategy.copies())
            .flat_map(OutcomeHistory::all)
            .map(|h| {
                let d = self.strategy.direction(h);
                let (polar, azimuth) = vector_to_angles(g, d);
                AngleNode {
                    history: h.to_bitstring(),
                    direction: d.vec().to_array(),
                    polar,
                    azimuth,
                }
            })
            .collect();
        OptimizationDocument {
            geometry: g,
            copies: self.strategy.copies(),
            fidelity: self.fidelity,
            iterations: self.iterations,
            best_restart: self.best_restart,
            converged: self.converged,
            restart_fidelities: self.restart_fidelities.clone(),
            nodes,
        }
    }
}

/// How the axis at one node may move.
#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeFreedom {
    Pinned,
    /// Great circle through x and z.
    XzPlane,
    Free,
}

fn freedom(geometry: Geometry, gauge: Gauge, h: OutcomeHistory) -> NodeFreedom {
    match (gauge, geometry) {
        (Gauge::Free, _) => NodeFreedom::Free,
        (Gauge::FixRoot, _) if h.is_empty() => NodeFreedom::Pinned,
        (Gauge::FixRoot, Geometry::Full) if h.len() == 1 && h.bits() == 0 => NodeFreedom::XzPlane,
        (Gauge::FixRoot, _) => NodeFreedom::Free,
    }
}

fn gauge_root(geometry: Geometry) -> BlochVector {
    match geometry {
        Geometry::Full => BlochVector::Z,
        Geometry::Planar => BlochVector::X,
    }
}

/// One leaf's contribution as an affine function of the node axis.
#[derive(Debug, Clone)]
struct LocalTerm {
    a: Vec3,
    /// Symmetric T stored as xx, yy, zz, xy, xz, yz.
    t: [f64; 6],
    sign: f64,
    /// Fixed guess for linear objectives; `None` for the optimal guess.
    guess: Option<Vec3>,
}

impl LocalTerm {
    fn branch(&self, m: Vec3) -> Vec3 {
        let t = &self.t;
        let tm = Vec3::new(
            t[0] * m.x + t[3] * m.y + t[4] * m.z,
            t[3] * m.x + t[1] * m.y + t[5] * m.z,
            t[4] * m.x + t[5] * m.y + t[2] * m.z,
        );
        self.a + self.sign * tm
    }
}

struct LocalProblem {
    terms: Vec<LocalTerm>,
}

impl LocalProblem {
    /// Twice the summed contribution of the affected leaves to `Σ M·V`.
    fn value(&self, m: Vec3) -> f64 {
        sum(self.terms.iter().map(|t| {
            let v = t.branch(m);
            match t.guess {
                None => v.norm(),
                Some(g) => g.dot(v),
            }
        }))
    }
}

/// Builds the node-local objective at `h` for the leaves at depth `horizon`.
fn local_problem(
    tree: &StrategyTree,
    h: OutcomeHistory,
    horizon: usize,
    rule: &QuadratureRule,
    guess: &GuessRule,
) -> Result<LocalProblem> {
    let depth = h.len();
    debug_assert!(depth < horizon && horizon <= tree.copies());
    let below = horizon - depth;
    let leaves = 1usize << below;
    let mut a = vec![Vec3::ZERO; leaves];
    let mut t = vec![[0.0; 6]; leaves];
    let mut suffix = vec![0.0; leaves];

    for (n, w) in rule.iter() {
        let mut pre = w;
        for k in 1..=depth {
            let m = tree.direction(h.prefix(k - 1)).vec();
            pre *= 0.5 * (1.0 + outcome_sign(h.outcome(k)) * n.dot(m));
        }
        suffix[0] = 1.0;
        suffix[1] = 1.0;
        for level in 1..below {
            let width = 1usize << level;
            for r in 0..width {
                let node = OutcomeHistory::new(h.bits() | ((r as u64) << depth), depth + level)?;
                let d = n.dot(tree.direction(node).vec());
                let p = suffix[r];
                suffix[r | width] = p * 0.5 * (1.0 - d);
                suffix[r] = p * 0.5 * (1.0 + d);
            }
        }
        for r in 0..leaves {
            let wr = pre * suffix[r];
            a[r] += wr * n;
            let e = &mut t[r];
            e[0] += wr * n.x * n.x;
            e[1] += wr * n.y * n.y;
            e[2] += wr * n.z * n.z;
            e[3] += wr * n.x * n.y;
            e[4] += wr * n.x * n.z;
            e[5] += wr * n.y * n.z;
        }
    }

    let terms = (0..leaves)
        .map(|r| {
            let guess = match guess {
                GuessRule::OptimalGuess => Ok(None),
                GuessRule::Fixed(map) => {
                    let id = h.bits() | ((r as u64) << depth);
                    map.get(&id).map(|g| Some(g.vec())).ok_or_else(|| {
                        Error::validation(format!("no guess given for branch id {id}"))
                    })
                }
                GuessRule::CentralLimit => Err(Error::validation(
                    "the central-limit guess is defined for fixed strategies only",
                )),
            }?;
            Ok(LocalTerm {
                a: a[r],
                t: t[r],
                sign: outcome_sign((r & 1) as u8),
                guess,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalProblem { terms })
}

fn fibonacci_sphere(count: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

const CIRCLE_CANDIDATES: usize = 48;
const SPHERE_CANDIDATES: usize = 96;
const REFINED_CANDIDATES: usize = 3;

/// Best axis for a node, starting from a candidate scan. Returns `current`
/// unchanged unless something strictly better is found.
fn best_axis(
    problem: &LocalProblem,
    geometry: Geometry,
    freedom: NodeFreedom,
    current: Option<BlochVector>,
) -> (BlochVector, f64) {
    let opts = SimplexOptions::default();
    let circle = |plane: NodeFreedom| {
        move |t: f64| match plane {
            NodeFreedom::XzPlane => Vec3::new(t.sin(), 0.0, t.cos()),
            _ => Vec3::new(t.cos(), t.sin(), 0.0),
        }
    };

    let mut refined: Vec<(Vec3, f64)> = match (freedom, geometry) {
        (NodeFreedom::Pinned, _) => {
            let m = current.expect("pinned node has an axis");
            return (m, problem.value(m.vec()));
        }
        (NodeFreedom::XzPlane, _) | (NodeFreedom::Free, Geometry::Planar) => {
            let embed = circle(freedom);
            let mut starts: Vec<(f64, f64)> = (0..CIRCLE_CANDIDATES)
                .map(|i| {
                    let t = TAU * i as f64 / CIRCLE_CANDIDATES as f64;
                    (t, problem.value(embed(t)))
                })
                .collect();
            if let Some(c) = current {
                let v = c.vec();
                let t = match freedom {
                    NodeFreedom::XzPlane => v.x.atan2(v.z),
                    _ => v.y.atan2(v.x),
                };
                starts.push((t, problem.value(embed(t))));
            }
            starts.sort_by(|a, b| b.1.total_cmp(&a.1));
            starts
                .iter()
                .take(REFINED_CANDIDATES)
                .map(|&(t0, _)| {
                    let r = maximize(
                        |x| problem.value(embed(x[0])),
                        &[t0],
                        &SimplexOptions {
                            initial_step: 0.5 * TAU / CIRCLE_CANDIDATES as f64,
                            ..opts
                        },
                    );
                    (embed(r.x[0]), r.value)
                })
                .collect()
        }
        (NodeFreedom::Free, Geometry::Full) => {
            let mut starts: Vec<(Vec3, f64)> = fibonacci_sphere(SPHERE_CANDIDATES)
                .into_iter()
                .map(|m| (m, problem.value(m)))
                .collect();
            if let Some(c) = current {
                starts.push((c.vec(), problem.value(c.vec())));
            }
            starts.sort_by(|a, b| b.1.total_cmp(&a.1));
            starts
                .iter()
                .take(REFINED_CANDIDATES)
                .map(|&(m0, _)| {
                    let base = BlochVector::normalize(m0).expect("unit candidate");
                    let (u, w) = orthonormal_frame(base);
                    let embed = |x: &[f64]| {
                        let v = base.vec() + x[0] * u.vec() + x[1] * w.vec();
                        (1.0 / v.norm()) * v
                    };
                    let r = maximize(
                        |x| problem.value(embed(x)),
                        &[0.0, 0.0],
                        &SimplexOptions {
                            initial_step: 0.05,
                            ..opts
                        },
                    );
                    (embed(&r.x), r.value)
                })
                .collect()
        }
    };

    refined.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (m, value) = refined[0];
    let m = BlochVector::normalize_in(geometry, m).expect("unit axis");
    match current {
        Some(c) => {
            let cv = problem.value(c.vec());
            if value > cv {
                (m, value)
            } else {
                (c, cv)
            }
        }
        None => (m, value),
    }
}

fn random_axis(geometry: Geometry, freedom: NodeFreedom, rng: &mut ChaCha8Rng) -> BlochVector {
    let phi = TAU * rng.random::<f64>();
    match (freedom, geometry) {
        (NodeFreedom::Pinned, g) => gauge_root(g),
        (NodeFreedom::XzPlane, _) => {
            BlochVector::normalize(Vec3::new(phi.sin(), 0.0, phi.cos())).expect("unit")
        }
        (NodeFreedom::Free, Geometry::Planar) => angles_to_vector(geometry, 0.0, phi),
        (NodeFreedom::Free, Geometry::Full) => {
            let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
            angles_to_vector(geometry, z.clamp(-1.0, 1.0).acos(), phi)
        }
    }
}

fn objective(tree: &StrategyTree, guess: &GuessRule, rule: &QuadratureRule) -> Result<f64> {
    let branches = tree_branch_vectors(tree, rule)?;
    let total = match guess {
        GuessRule::OptimalGuess => sum(branches.iter().map(|b| b.probability + b.norm)),
        GuessRule::Fixed(map) => sum(branches
            .iter()
            .map(|b| b.probability + map.get(&b.id).map_or(0.0, |g| g.dot(b.v)))),
        GuessRule::CentralLimit => unreachable!("rejected by local_problem"),
    };
    Ok(0.5 * total)
}

struct RestartOutcome {
    tree: StrategyTree,
    fidelity: f64,
    sweeps: usize,
    converged: bool,
}

fn run_restart(
    geometry: Geometry,
    copies: usize,
    guess: &GuessRule,
    cfg: &OptimizationConfig,
    rule: &QuadratureRule,
    restart: usize,
) -> Result<RestartOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut tree = StrategyTree::from_fn(geometry, copies, |h| {
        random_axis(geometry, freedom(geometry, cfg.gauge, h), &mut rng)
    })?;
    let mut fidelity = objective(&tree, guess, rule)?;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_iterations {
        sweeps += 1;
        for depth in 0..copies {
            for h in OutcomeHistory::all(depth) {
                let f = freedom(geometry, cfg.gauge, h);
                if f == NodeFreedom::Pinned {
                    continue;
                }
                let problem = local_problem(&tree, h, copies, rule, guess)?;
                let (m, _) = best_axis(&problem, geometry, f, Some(tree.direction(h)));
                tree.set_direction(h, m)?;
            }
        }
        let next = objective(&tree, guess, rule)?;
        let gain = next - fidelity;
        fidelity = next.max(fidelity);
        if gain < cfg.f_tolerance {
            converged = true;
            break;
        }
    }
    Ok(RestartOutcome {
        tree,
        fidelity,
        sweeps,
        converged,
    })
}

/// Puts the depth-one 0-branch axis at azimuth 0 by a half-turn about z.
fn canonical_azimuth(tree: StrategyTree) -> Result<StrategyTree> {
    if tree.geometry() != Geometry::Full || tree.copies() < 2 {
        return Ok(tree);
    }
    let first = OutcomeHistory::new(0, 1)?;
    if tree.direction(first).vec().x < 0.0 {
        tree.rotated(&Rotation::about_z(PI))
    } else {
        Ok(tree)
    }
}

fn finish(
    tree: StrategyTree,
    guess: &GuessRule,
    iterations: usize,
    best_restart: usize,
    converged: bool,
    restart_fidelities: Vec<f64>,
) -> Result<OptimizationResult> {
    let rule = make_quadrature(tree.geometry(), tree.copies() + 1)?;
    let fidelity = crate::estimator::fidelity_exact_tree(&tree, guess, &rule)?.fidelity;
    Ok(OptimizationResult {
        strategy: tree,
        fidelity,
        iterations,
        best_restart,
        converged,
        restart_fidelities,
    })
}

/// Locally optimal adaptive tree for `copies` measurements, best of
/// `cfg.restarts` random starts.
pub fn optimize_tree(
    geometry: Geometry,
    copies: usize,
    guess: &GuessRule,
    cfg: &OptimizationConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    cfg.check_copies(copies)?;
    if *guess == GuessRule::CentralLimit {
        return Err(Error::validation(
            "the central-limit guess is defined for fixed strategies only",
        ));
    }
    let rule = make_quadrature(geometry, copies + 1)?;
    let outcomes = map_indexed(cfg.restarts, |r| {
        run_restart(geometry, copies, guess, cfg, &rule, r)
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let restart_fidelities: Vec<f64> = outcomes.iter().map(|o| o.fidelity).collect();
    let (best_restart, best) = outcomes
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.fidelity > a.1.fidelity { b } else { a })
        .expect("at least one restart");
    let tree = match cfg.gauge {
        Gauge::FixRoot => canonical_azimuth(best.tree)?,
        Gauge::Free => best.tree,
    };
    finish(
        tree,
        guess,
        best.sweeps,
        best_restart,
        best.converged,
        restart_fidelities,
    )
}

/// Greedy tree: each axis maximizes the fidelity the strategy would reach
/// if it stopped right after that measurement.
pub fn optimize_one_step_adaptive(
    geometry: Geometry,
    copies: usize,
    cfg: &OptimizationConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    if copies == 0 {
        return Err(Error::validation("N must be at least 1"));
    }
    if copies > MAX_GREEDY_COPIES {
        return Err(Error::Resource {
            what: "greedy copies",
            required: copies as u64,
            allowed: MAX_GREEDY_COPIES as u64,
        });
    }
    let rule = make_quadrature(geometry, copies + 1)?;
    let mut tree = StrategyTree::from_fn(geometry, copies, |_| gauge_root(geometry))?;
    for depth in 0..copies {
        for h in OutcomeHistory::all(depth) {
            // The first axis is irrelevant by symmetry; pin it whatever the gauge.
            let f = match freedom(geometry, Gauge::FixRoot, h) {
                NodeFreedom::XzPlane if cfg.gauge == Gauge::Free => NodeFreedom::Free,
                f => f,
            };
            if f == NodeFreedom::Pinned {
                continue;
            }
            let problem = local_problem(&tree, h, depth + 1, &rule, &GuessRule::OptimalGuess)?;
            let (m, _) = best_axis(&problem, geometry, f, None);
            tree.set_direction(h, m)?;
        }
    }
    finish(tree, &GuessRule::OptimalGuess, 1, 0, true, Vec::new())
}

/// Documented optimum for `copies ≤ 3` on the sphere: measure z, then x,
/// then y, whatever the earlier outcomes. Each axis is orthogonal to every
/// earlier one, which is all optimality requires at these sizes.
pub fn known_optimal_tree(copies: usize) -> Result<StrategyTree> {
    if !(1..=3).contains(&copies) {
        return Err(Error::validation(format!(
            "closed-form optimal trees exist for N = 1, 2, 3, not {copies}"
        )));
    }
    let axes = [BlochVector::Z, BlochVector::X, BlochVector::Y];
    StrategyTree::from_fn(Geometry::Full, copies, |h| axes[h.len()])
}

/// Greedy tree used as the first stage of the two-stage scheme. It sits
/// close to the optimal fidelity and, unlike a fixed-axis pilot, never ends
/// on a branch whose guess is undetermined.
pub fn greedy_pilot(geometry: Geometry, copies: usize) -> Result<StrategyTree> {
    Ok(optimize_one_step_adaptive(geometry, copies, &OptimizationConfig::default())?.strategy)
}

/// Optimized fidelity for every N from 1 to `max_copies`.
pub fn optimal_fidelity_table(
    geometry: Geometry,
    max_copies: usize,
    cfg: &OptimizationConfig,
) -> Result<Vec<(usize, f64)>> {
    cfg.check_copies(max_copies)?;
    (1..=max_copies)
        .map(|n| {
            Ok((
                n,
                optimize_tree(geometry, n, &GuessRule::OptimalGuess, cfg)?.fidelity,
            ))
        })
        .collect()
}

/// Four-copy tree with the first two axes along x and y, the third in the
/// plane orthogonal to the two-copy guess `s` and the fourth in a frame
/// built from `s` and the third signed axis.
pub fn n4_ansatz_tree(alpha: f64, beta: f64, gamma: f64) -> Result<StrategyTree> {
    let g = Geometry::Full;
    let e1 = BlochVector::X.vec();
    let e2 = BlochVector::Y.vec();
    let frame = |h: OutcomeHistory| {
        let m1 = outcome_sign(h.outcome(1)) * e1;
        let m2 = outcome_sign(h.outcome(2)) * e2;
        let s = FRAC_1_SQRT_2 * (m1 + m2);
        let u1 = m1.cross(m2);
        let v1 = u1.cross(s);
        let m3 = alpha.cos() * u1 + alpha.sin() * v1;
        (s, m3)
    };
    StrategyTree::from_fn(g, 4, |h| {
        let v = match h.len() {
            0 => e1,
            1 => e2,
            2 => frame(h).1,
            _ => {
                let (s, m3) = frame(h.prefix(2));
                let m3 = outcome_sign(h.outcome(3)) * m3;
                let u2 = s.cross(m3);
                let v2 = beta.cos() * m3 - beta.sin() * s;
                gamma.cos() * u2 + gamma.sin() * v2
            }
        };
        BlochVector::normalize(v).expect("orthonormal frame")
    })
}

/// Exact optimal-guess fidelity of [`n4_ansatz_tree`].
pub fn n4_ansatz_fidelity(alpha: f64, beta: f64, gamma: f64, rule: &QuadratureRule) -> Result<f64> {
    let tree = n4_ansatz_tree(alpha, beta, gamma)?;
    Ok(crate::estimator::fidelity_exact_tree(&tree, &GuessRule::OptimalGuess, rule)?.fidelity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnsatzOptimum {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub fidelity: f64,
}

/// Maximizes [`n4_ansatz_fidelity`] from a grid of starting angles.
pub fn optimize_n4_ansatz() -> Result<AnsatzOptimum> {
    let rule = make_quadrature(Geometry::Full, 5)?;
    let f = |x: &[f64]| n4_ansatz_fidelity(x[0], x[1], x[2], &rule).unwrap_or(f64::NEG_INFINITY);
    const GRID: usize = 6;
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..GRID {
        for j in 0..GRID {
            for k in 0..GRID {
                let x = [i, j, k].map(|n| (n as f64 + 0.5) * TAU / GRID as f64);
                starts.push((x.to_vec(), f(&x)));
            }
        }
    }
    starts.sort_by(|a, b| b.1.total_cmp(&a.1));
    let best = starts
        .iter()
        .take(6)
        .map(|(x0, _)| {
            maximize(
                f,
                x0,
                &SimplexOptions {
                    initial_step: 0.3,
                    max_evaluations: 4000,
                    ..SimplexOptions::default()
                },
            )
        })
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("non-empty start list");
    let (alpha, beta, gamma) = canonical_ansatz_angles(best.x[0], best.x[1], best.x[2]);
    Ok(AnsatzOptimum {
        alpha,
        beta,
        gamma,
        fidelity: best.value,
    })
}

/// Representative of the ansatz angles modulo the maps that leave the tree's
/// fidelity unchanged: `α → α + π`, `γ → γ + π`, `(α, γ) → (−α, −γ)` and
/// `(β, γ) → (β + π, −γ)`. The result has `α ∈ [0, π/2]`, `β ∈ [0, π)` and
/// `γ ∈ [0, π)`.
pub fn canonical_ansatz_angles(alpha: f64, beta: f64, gamma: f64) -> (f64, f64, f64) {
    let mut a = alpha.rem_euclid(PI);
    let mut g = gamma;
    if a > FRAC_PI_2 {
        a = PI - a;
        g = -g;
    }
    let mut b = beta.rem_euclid(TAU);
    if b >= PI {
        b -= PI;
        g = -g;
    }
    (a, b, g.rem_euclid(PI))
}

/// Exact evaluation of an optimizer tree, for callers that only hold the
/// strategy.
pub fn fidelity_of(tree: &StrategyTree) -> Result<f64> {
    Ok(evaluate_tree(tree, &GuessRule::OptimalGuess)?.fidelity)
}
