//! Exact evaluation of branch vectors, guesses and the average fidelity.
//!
//! For an outcome string `x` the probability of `x` given the state `n` is
//! `P_n(x) = ∏_k (1 + n·m(x_k)) / 2`. Everything here reduces to the two
//! polynomial integrals
//!
//! * `p(x) = ∫ dn P_n(x)` (branch probability), and
//! * `V(x) = ∫ dn n P_n(x)` (branch vector),
//!
//! evaluated exactly by quadrature. The average fidelity of a guess rule
//! `M(x)` is then `F = Σ_x (p(x) + M(x)·V(x)) / 2`, which the optimal guess
//! `M = V/|V|` turns into `(1 + Σ_x |V(x)|) / 2`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BlochVector, Geometry, Vec3};
use crate::par::map_indexed;
use crate::quadrature::{make_quadrature, QuadratureRule};
use crate::strategy::{
    binomial, enumerate_count_classes, FixedStrategy, GuessMap, OutcomeCounts, OutcomeHistory,
    StrategyTree, TwoStageStrategy,
};
use crate::sum::NeumaierSum;

/// Largest tree the exact evaluator enumerates (2^N branches).
pub const MAX_EXACT_TREE_COPIES: usize = 16;
/// Largest number of count classes the aggregated evaluator enumerates.
pub const MAX_COUNT_CLASSES: u64 = 1 << 18;
/// Largest repetition count per axis in the aggregated evaluator.
pub const MAX_AXIS_REPETITIONS: usize = 1000;
/// Branch vectors shorter than this map to the fallback axis.
pub const DEGENERACY_THRESHOLD: f64 = 1e-13;

/// How a guess is formed from the outcomes.
#[derive(Debug, Clone, PartialEq)]
pub enum GuessRule {
    /// `M(x) = V(x)/|V(x)|`.
    OptimalGuess,
    /// Normalized empirical mean of the ±1 outcomes along each fixed axis.
    CentralLimit,
    /// Explicit guess per branch id (history encoding for trees, class index
    /// for count classes).
    Fixed(GuessMap),
}

impl GuessRule {
    pub fn name(&self) -> &'static str {
        match self {
            GuessRule::OptimalGuess => "og",
            GuessRule::CentralLimit => "cl",
            GuessRule::Fixed(_) => "fixed",
        }
    }
}

/// Identifies a branch: a full outcome history or an aggregated count class.
#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    History(OutcomeHistory),
    Counts(OutcomeCounts),
}

impl Branch {
    pub fn label(&self) -> String {
        match self {
            Branch::History(h) => h.to_bitstring(),
            Branch::Counts(c) => c.label(),
        }
    }
}

/// The unnormalized guess integral of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchVector {
    pub branch: Branch,
    pub id: u64,
    /// `p(x)`; for count classes this includes the multiplicity.
    pub probability: f64,
    pub v: Vec3,
    pub norm: f64,
}

impl BranchVector {
    fn new(branch: Branch, id: u64, probability: f64, v: Vec3) -> Self {
        BranchVector {
            branch,
            id,
            probability,
            v,
            norm: v.norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactTree,
    ExactAggregated,
    ClosedFormN2,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactTree => "exact_tree",
            Method::ExactAggregated => "exact_aggregated",
            Method::ClosedFormN2 => "closed_form_n2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub id: u64,
    pub label: String,
    pub probability: f64,
    pub v_norm: f64,
    pub guess: [f64; 3],
}

/// Average fidelity of a strategy with per-branch diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    #[serde(rename = "N")]
    pub copies: usize,
    pub geometry: Geometry,
    pub method: Method,
    pub guess: String,
    pub quadrature_degree: usize,
    pub branches: Vec<BranchReport>,
}

impl FidelityReport {
    pub fn total_probability(&self) -> f64 {
        crate::sum::sum(self.branches.iter().map(|b| b.probability))
    }

    /// One row per branch after a `#`-prefixed metadata line.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# F={},N={},method={},degree={},geometry={},guess={}\n",
            self.fidelity,
            self.copies,
            self.method,
            self.quadrature_degree,
            self.geometry,
            self.guess
        );
        out.push_str("branch,label,probability,v_norm,guess_x,guess_y,guess_z\n");
        for b in &self.branches {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.id, b.label, b.probability, b.v_norm, b.guess[0], b.guess[1], b.guess[2]
            ));
        }
        out
    }
}

/// `P_n(x)` for a full-length history.
pub fn branch_probability_density(
    n: BlochVector,
    tree: &StrategyTree,
    x: OutcomeHistory,
) -> Result<f64> {
    check_history(tree, x)?;
    Ok(density(n.vec(), tree, x))
}

fn density(n: Vec3, tree: &StrategyTree, x: OutcomeHistory) -> f64 {
    (1..=tree.copies())
        .map(|k| 0.5 * (1.0 + n.dot(tree.signed_direction(x, k))))
        .product()
}

fn check_history(tree: &StrategyTree, x: OutcomeHistory) -> Result<()> {
    if x.len() != tree.copies() {
        return Err(Error::validation(format!(
            "history `{x}` has length {} but the strategy has N = {}",
            x.len(),
            tree.copies()
        )));
    }
    Ok(())
}

fn check_rule(geometry: Geometry, copies: usize, rule: &QuadratureRule) -> Result<()> {
    if rule.geometry() != geometry {
        return Err(Error::validation(format!(
            "quadrature is for {} geometry but the strategy is {geometry}",
            rule.geometry()
        )));
    }
    rule.require_degree(copies + 1)
}

/// `V(x)` and `p(x)` of a single branch.
pub fn branch_vector(
    tree: &StrategyTree,
    x: OutcomeHistory,
    rule: &QuadratureRule,
) -> Result<BranchVector> {
    check_history(tree, x)?;
    check_rule(tree.geometry(), tree.copies(), rule)?;
    let p = rule.integrate(|n| density(n, tree, x));
    let v = rule.integrate_vec(|n| density(n, tree, x) * n);
    Ok(BranchVector::new(Branch::History(x), x.bits(), p, v))
}

/// Fills `out[0..2^N]` with `P_n(x)` for every leaf `x`.
pub(crate) fn leaf_probabilities(tree: &StrategyTree, n: Vec3, out: &mut [f64]) {
    let dirs = tree.directions();
    out[0] = 1.0;
    for k in 1..=tree.copies() {
        let half = 1usize << (k - 1);
        let level = &dirs[half - 1..2 * half - 1];
        for h in 0..half {
            let p = out[h];
            let d = n.dot(level[h].vec());
            out[h | half] = p * 0.5 * (1.0 - d);
            out[h] = p * 0.5 * (1.0 + d);
        }
    }
}

const NODE_CHUNK: usize = 32;

/// Branch vectors of every leaf, indexed by history encoding.
pub fn tree_branch_vectors(
    tree: &StrategyTree,
    rule: &QuadratureRule,
) -> Result<Vec<BranchVector>> {
    check_rule(tree.geometry(), tree.copies(), rule)?;
    check_tree_size(tree.copies())?;
    let leaves = 1usize << tree.copies();
    let nodes: Vec<(Vec3, f64)> = rule.iter().collect();
    let chunks = nodes.len().div_ceil(NODE_CHUNK);
    let parts = map_indexed(chunks, |c| {
        let mut prob = vec![0.0; leaves];
        let mut v = vec![Vec3::ZERO; leaves];
        let mut scratch = vec![0.0; leaves];
        for &(n, w) in &nodes[c * NODE_CHUNK..((c + 1) * NODE_CHUNK).min(nodes.len())] {
            leaf_probabilities(tree, n, &mut scratch);
            for x in 0..leaves {
                let wp = w * scratch[x];
                prob[x] += wp;
                v[x] += wp * n;
            }
        }
        (prob, v)
    });
    let mut prob = vec![NeumaierSum::default(); leaves];
    let mut v = vec![[NeumaierSum::default(); 3]; leaves];
    for (p_part, v_part) in &parts {
        for x in 0..leaves {
            prob[x].add(p_part[x]);
            v[x][0].add(v_part[x].x);
            v[x][1].add(v_part[x].y);
            v[x][2].add(v_part[x].z);
        }
    }
    Ok(OutcomeHistory::all(tree.copies())
        .map(|h| {
            let x = h.bits() as usize;
            let vec = Vec3::new(v[x][0].value(), v[x][1].value(), v[x][2].value());
            BranchVector::new(Branch::History(h), h.bits(), prob[x].value(), vec)
        })
        .collect())
}

fn check_tree_size(copies: usize) -> Result<()> {
    if copies > MAX_EXACT_TREE_COPIES {
        return Err(Error::Resource {
            what: "tree branches",
            required: 1u64 << copies,
            allowed: 1u64 << MAX_EXACT_TREE_COPIES,
        });
    }
    Ok(())
}

/// `V/|V|`, or the fallback axis when `|V|` is below the degeneracy
/// threshold. Planar results stay on the equator.
pub fn optimal_guess(geometry: Geometry, v: Vec3) -> BlochVector {
    let v = geometry.project(v);
    if v.norm() < DEGENERACY_THRESHOLD {
        return geometry.fallback_axis();
    }
    BlochVector::normalize(v).unwrap_or_else(|| geometry.fallback_axis())
}

/// Normalized mean of the ±1 outcomes, `Σ_i (2α_i − 1) e_i`.
pub fn central_limit_guess(counts: &OutcomeCounts, fixed: &FixedStrategy) -> Result<BlochVector> {
    if counts.counts.len() != fixed.axes().len()
        || counts
            .counts
            .iter()
            .zip(fixed.axes())
            .any(|(&a, (_, n))| a > *n)
    {
        return Err(Error::validation(format!(
            "counts {} do not fit the fixed strategy",
            counts.label()
        )));
    }
    Ok(central_limit_direction(&counts.counts, fixed))
}

fn central_limit_direction(counts: &[usize], fixed: &FixedStrategy) -> BlochVector {
    let geometry = fixed.geometry();
    let all_half = counts
        .iter()
        .zip(fixed.axes())
        .all(|(&a, (_, n))| 2 * a == *n);
    if all_half {
        return geometry.fallback_axis();
    }
    let mut mean = Vec3::ZERO;
    for (&a, (axis, n)) in counts.iter().zip(fixed.axes()) {
        mean += (2.0 * a as f64 / *n as f64 - 1.0) * axis.vec();
    }
    if mean.norm() < DEGENERACY_THRESHOLD {
        return geometry.fallback_axis();
    }
    BlochVector::normalize_in(geometry, mean).unwrap_or_else(|| geometry.fallback_axis())
}

/// The central-limit guess expressed as a per-history map for the tree
/// `fixed.tree(order)`.
pub fn central_limit_guess_map(fixed: &FixedStrategy, order: &[usize]) -> GuessMap {
    OutcomeHistory::all(order.len())
        .map(|h| {
            (
                h.bits(),
                central_limit_direction(&fixed.counts_of(order, h), fixed),
            )
        })
        .collect()
}

fn lookup_fixed(map: &GuessMap, id: u64, label: &str) -> Result<BlochVector> {
    map.get(&id)
        .copied()
        .ok_or_else(|| Error::validation(format!("no guess given for branch {label} (id {id})")))
}

fn assemble(
    branches: Vec<BranchVector>,
    mut guess_of: impl FnMut(&BranchVector) -> Result<BlochVector>,
    optimal: bool,
) -> Result<(f64, Vec<BranchReport>)> {
    let mut total = NeumaierSum::default();
    let mut reports = Vec::with_capacity(branches.len());
    for b in branches {
        let m = guess_of(&b)?;
        total.add(b.probability);
        // M·V equals |V| for the optimal guess; using |V| keeps degenerate
        // branches exact.
        total.add(if optimal { b.norm } else { m.dot(b.v) });
        reports.push(BranchReport {
            id: b.id,
            label: b.branch.label(),
            probability: b.probability,
            v_norm: b.norm,
            guess: m.vec().to_array(),
        });
    }
    Ok((0.5 * total.value(), reports))
}

/// Exact average fidelity of an adaptive tree.
pub fn fidelity_exact_tree(
    tree: &StrategyTree,
    guess: &GuessRule,
    rule: &QuadratureRule,
) -> Result<FidelityReport> {
    let branches = tree_branch_vectors(tree, rule)?;
    let geometry = tree.geometry();
    let (fidelity, reports) = match guess {
        GuessRule::OptimalGuess => assemble(branches, |b| Ok(optimal_guess(geometry, b.v)), true)?,
        GuessRule::Fixed(map) => assemble(
            branches,
            |b| lookup_fixed(map, b.id, &b.branch.label()),
            false,
        )?,
        GuessRule::CentralLimit => {
            return Err(Error::validation(
                "the central-limit guess needs a fixed strategy; \
                 use central_limit_guess_map for its tree expansion",
            ))
        }
    };
    Ok(FidelityReport {
        fidelity,
        copies: tree.copies(),
        geometry,
        method: Method::ExactTree,
        guess: guess.name().to_string(),
        quadrature_degree: rule.exact_degree(),
        branches: reports,
    })
}

/// [`fidelity_exact_tree`] with the minimal exact quadrature.
pub fn evaluate_tree(tree: &StrategyTree, guess: &GuessRule) -> Result<FidelityReport> {
    let rule = make_quadrature(tree.geometry(), tree.copies() + 1)?;
    fidelity_exact_tree(tree, guess, &rule)
}

/// Unrolls a two-stage strategy into an equivalent tree plus the guess it
/// forms on every leaf, so small instances can be evaluated exactly.
pub fn expand_two_stage(strategy: &TwoStageStrategy) -> Result<(StrategyTree, GuessMap)> {
    let pilot = strategy.pilot();
    let n0 = pilot.copies();
    let copies = strategy.copies();
    if copies > MAX_EXACT_TREE_COPIES {
        return Err(Error::Resource {
            what: "tree copies",
            required: copies as u64,
            allowed: MAX_EXACT_TREE_COPIES as u64,
        });
    }
    let geometry = strategy.geometry();
    let rule = make_quadrature(geometry, n0 + 1)?;
    let pilot_guesses: Vec<BlochVector> = tree_branch_vectors(pilot, &rule)?
        .iter()
        .map(|b| optimal_guess(geometry, b.v))
        .collect();
    let pilot_mask = (1u64 << n0) - 1;
    let axes_for = |h: OutcomeHistory| {
        strategy.exploration_axes(pilot_guesses[(h.bits() & pilot_mask) as usize])
    };

    let tree = StrategyTree::from_fn(geometry, copies, |h| {
        if h.len() < n0 {
            pilot.direction(h)
        } else {
            axes_for(h)[strategy.exploration_axis_index(h.len() - n0)]
        }
    })?;
    let mut guesses = GuessMap::new();
    for x in OutcomeHistory::all(copies) {
        let mut plus = vec![0usize; strategy.exploration_counts().len()];
        for j in 0..copies - n0 {
            if x.outcome(n0 + j + 1) == 0 {
                plus[strategy.exploration_axis_index(j)] += 1;
            }
        }
        let m0 = pilot_guesses[(x.bits() & pilot_mask) as usize];
        guesses.insert(x.bits(), strategy.final_guess(m0, &plus));
    }
    Ok((tree, guesses))
}

/// Branch vectors of every count class of a fixed strategy, in
/// [`enumerate_count_classes`] order.
pub fn class_branch_vectors(
    fixed: &FixedStrategy,
    rule: &QuadratureRule,
) -> Result<Vec<BranchVector>> {
    check_rule(fixed.geometry(), fixed.copies(), rule)?;
    let classes = fixed.class_count();
    if classes > MAX_COUNT_CLASSES {
        return Err(Error::Resource {
            what: "count classes",
            required: classes,
            allowed: MAX_COUNT_CLASSES,
        });
    }
    if let Some((_, n)) = fixed.axes().iter().find(|(_, n)| *n > MAX_AXIS_REPETITIONS) {
        return Err(Error::Resource {
            what: "repetitions per axis",
            required: *n as u64,
            allowed: MAX_AXIS_REPETITIONS as u64,
        });
    }

    // pmf[q][i][a] = C(N_i, a) q_i^a (1 - q_i)^(N_i - a) with q_i = (1 + n·e_i)/2
    let sizes: Vec<usize> = fixed.axes().iter().map(|(_, n)| *n).collect();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n + 1;
            Some(o)
        })
        .collect();
    let stride: usize = sizes.iter().map(|n| n + 1).sum();
    let binomials: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| (0..=n).map(|a| binomial(n, a)).collect())
        .collect();
    let nodes: Vec<(Vec3, f64)> = rule.iter().collect();
    let mut pmf = vec![0.0; nodes.len() * stride];
    for (q, (n, _)) in nodes.iter().enumerate() {
        for (i, (axis, size)) in fixed.axes().iter().enumerate() {
            let c = n.dot(axis.vec());
            let up = 0.5 * (1.0 + c);
            let down = 0.5 * (1.0 - c);
            for a in 0..=*size {
                pmf[q * stride + offsets[i] + a] =
                    binomials[i][a] * up.powi(a as i32) * down.powi((size - a) as i32);
            }
        }
    }

    let counts = enumerate_count_classes(fixed);
    let out = map_indexed(counts.len(), |c| {
        let class = &counts[c];
        let mut p = NeumaierSum::default();
        let mut v = [NeumaierSum::default(); 3];
        for (q, &(n, w)) in nodes.iter().enumerate() {
            let row = &pmf[q * stride..(q + 1) * stride];
            let mut prod = w;
            for (i, &a) in class.counts.iter().enumerate() {
                prod *= row[offsets[i] + a];
            }
            p.add(prod);
            v[0].add(prod * n.x);
            v[1].add(prod * n.y);
            v[2].add(prod * n.z);
        }
        let vec = Vec3::new(v[0].value(), v[1].value(), v[2].value());
        BranchVector::new(Branch::Counts(class.clone()), c as u64, p.value(), vec)
    });
    Ok(out)
}

/// Exact average fidelity of a fixed strategy, summed over count classes.
/// The guess must depend on the counts only.
pub fn fidelity_exact_aggregated(
    fixed: &FixedStrategy,
    guess: &GuessRule,
    rule: &QuadratureRule,
) -> Result<FidelityReport> {
    let branches = class_branch_vectors(fixed, rule)?;
    let geometry = fixed.geometry();
    let (fidelity, reports) = match guess {
        GuessRule::OptimalGuess => assemble(branches, |b| Ok(optimal_guess(geometry, b.v)), true)?,
        GuessRule::CentralLimit => assemble(
            branches,
            |b| match &b.branch {
                Branch::Counts(c) => central_limit_guess(c, fixed),
                Branch::History(_) => unreachable!("aggregated branches are count classes"),
            },
            false,
        )?,
        GuessRule::Fixed(map) => assemble(
            branches,
            |b| lookup_fixed(map, b.id, &b.branch.label()),
            false,
        )?,
    };
    Ok(FidelityReport {
        fidelity,
        copies: fixed.copies(),
        geometry,
        method: Method::ExactAggregated,
        guess: guess.name().to_string(),
        quadrature_degree: rule.exact_degree(),
        branches: reports,
    })
}

/// [`fidelity_exact_aggregated`] with the minimal exact quadrature.
pub fn evaluate_fixed(fixed: &FixedStrategy, guess: &GuessRule) -> Result<FidelityReport> {
    let rule = make_quadrature(fixed.geometry(), fixed.copies() + 1)?;
    fidelity_exact_aggregated(fixed, guess, &rule)
}

/// Optimal two-copy fidelity with the first axis along z and the second
/// axes at polar angles `theta_0` (after outcome 0) and `theta_1` (after
/// outcome 1).
pub fn n2_closed_form(theta_0: f64, theta_1: f64) -> f64 {
    let term = |t: f64| (0.5 * t).sin().abs() + (0.5 * t).cos().abs();
    0.5 * (1.0 + (term(theta_0) + term(theta_1)) / 6.0)
}

/// Guess of a two-copy optimal tree, `[m(x_2) + m(x_1)]/√2` with signed axes.
pub fn n2_guess(tree: &StrategyTree, x: OutcomeHistory) -> Vec3 {
    std::f64::consts::FRAC_1_SQRT_2 * (tree.signed_direction(x, 1) + tree.signed_direction(x, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{make_two_stage, round_robin_pilot};

    #[test]
    fn two_stage_expansion() {
        let pilot = round_robin_pilot(Geometry::Full, 3).unwrap();
        let zero = make_two_stage(Geometry::Full, 7, 0.0, pilot.clone()).unwrap();
        let (tree, map) = expand_two_stage(&zero).unwrap();
        assert_eq!(tree.copies(), 7);
        // λ = 0 keeps the pilot guess, so exploring adds nothing.
        let f0 = evaluate_tree(&tree, &GuessRule::Fixed(map))
            .unwrap()
            .fidelity;
        let fp = evaluate_tree(&pilot, &GuessRule::OptimalGuess)
            .unwrap()
            .fidelity;
        assert!((f0 - fp).abs() < 1e-12, "{f0} {fp}");
        let one = make_two_stage(Geometry::Full, 7, 1.0, pilot).unwrap();
        let (tree, map) = expand_two_stage(&one).unwrap();
        let f1 = evaluate_tree(&tree, &GuessRule::Fixed(map))
            .unwrap()
            .fidelity;
        assert!(f1 > f0);
    }
    use crate::moments::moment_oracle;
    use crate::strategy::{make_fixed_axes, tree_from_fixed};
    use std::f64::consts::PI;

    fn z_then(theta0: f64, theta1: f64) -> StrategyTree {
        let g = Geometry::Full;
        StrategyTree::new(
            g,
            2,
            vec![
                BlochVector::Z,
                crate::geometry::angles_to_vector(g, theta0, 0.3),
                crate::geometry::angles_to_vector(g, theta1, 1.1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn density_examples() {
        let t = StrategyTree::new(Geometry::Full, 1, vec![BlochVector::Z]).unwrap();
        let x0 = OutcomeHistory::from_outcomes(&[0]).unwrap();
        let x1 = OutcomeHistory::from_outcomes(&[1]).unwrap();
        assert_eq!(
            branch_probability_density(BlochVector::Z, &t, x0).unwrap(),
            1.0
        );
        assert_eq!(
            branch_probability_density(BlochVector::Z, &t, x1).unwrap(),
            0.0
        );

        let t = StrategyTree::new(
            Geometry::Full,
            2,
            vec![BlochVector::Z, BlochVector::X, BlochVector::X],
        )
        .unwrap();
        let x = OutcomeHistory::from_outcomes(&[0, 0]).unwrap();
        assert_eq!(
            branch_probability_density(BlochVector::Z, &t, x).unwrap(),
            0.5
        );
        assert!(branch_probability_density(BlochVector::Z, &t, x0).is_err());
    }

    #[test]
    fn single_copy_branch_vectors() {
        let t = StrategyTree::new(Geometry::Full, 1, vec![BlochVector::Z]).unwrap();
        let rule = make_quadrature(Geometry::Full, 2).unwrap();
        let x0 = OutcomeHistory::from_outcomes(&[0]).unwrap();
        let b = branch_vector(&t, x0, &rule).unwrap();
        // oracle: (1/2)(∫n + ∫n(n·m)) = m/6
        let want = 0.5 * moment_oracle(Geometry::Full, &[BlochVector::Z]).unwrap();
        assert!((b.v - want).norm() < 1e-15);
        assert!((b.norm - 1.0 / 6.0).abs() < 1e-15);

        let t = StrategyTree::new(Geometry::Planar, 1, vec![BlochVector::X]).unwrap();
        let rule = make_quadrature(Geometry::Planar, 2).unwrap();
        let b = branch_vector(&t, x0, &rule).unwrap();
        assert!((b.v - Vec3::new(0.25, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn insufficient_degree() {
        let t = z_then(1.0, 2.0);
        let rule = make_quadrature(Geometry::Full, 2).unwrap();
        assert!(matches!(
            fidelity_exact_tree(&t, &GuessRule::OptimalGuess, &rule),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn n2_closed_form_matches_tree() {
        for &(a, b) in &[
            (PI / 2.0, PI / 2.0),
            (0.0, 0.0),
            (PI / 2.0, 0.0),
            (0.4, 2.7),
        ] {
            let r = evaluate_tree(&z_then(a, b), &GuessRule::OptimalGuess).unwrap();
            assert!((r.fidelity - n2_closed_form(a, b)).abs() < 1e-14, "{a} {b}");
        }
        assert!((n2_closed_form(PI / 2.0, PI / 2.0) - (3.0 + 2f64.sqrt()) / 6.0).abs() < 1e-15);
        assert!((n2_closed_form(0.0, 0.0) - 2.0 / 3.0).abs() < 1e-15);
        let want = 0.5 * (1.0 + (2f64.sqrt() + 1.0) / 6.0);
        assert!((n2_closed_form(PI / 2.0, 0.0) - want).abs() < 1e-15);
    }

    #[test]
    fn n2_optimal_guess_is_sum_of_axes() {
        let t = z_then(PI / 2.0, PI / 2.0);
        let rule = make_quadrature(Geometry::Full, 3).unwrap();
        for x in OutcomeHistory::all(2) {
            let b = branch_vector(&t, x, &rule).unwrap();
            let m = optimal_guess(Geometry::Full, b.v);
            assert!((m.vec() - n2_guess(&t, x)).norm() < 1e-13, "{x}");
        }
    }

    #[test]
    fn optimal_guess_fallback() {
        assert_eq!(
            optimal_guess(Geometry::Full, Vec3::new(0.0, 0.0, 0.25)),
            BlochVector::Z
        );
        assert_eq!(optimal_guess(Geometry::Full, Vec3::ZERO), BlochVector::X);
        let g = optimal_guess(Geometry::Planar, Vec3::new(0.0, 0.3, 0.4));
        assert_eq!(g, BlochVector::Y);
    }

    #[test]
    fn central_limit_examples() {
        let f = make_fixed_axes(Geometry::Planar, 2).unwrap();
        let c = |a: usize, b: usize| OutcomeCounts {
            counts: vec![a, b],
            multiplicity: 1.0,
        };
        assert_eq!(central_limit_guess(&c(2, 1), &f).unwrap(), BlochVector::X);
        let g = central_limit_guess(&c(2, 2), &f).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((g.vec() - Vec3::new(s, s, 0.0)).norm() < 1e-15);
        assert_eq!(central_limit_guess(&c(1, 1), &f).unwrap(), BlochVector::X);
        assert!(central_limit_guess(&c(3, 1), &f).is_err());
    }

    #[test]
    fn fixed_order_does_not_matter() {
        let f = make_fixed_axes(Geometry::Planar, 1).unwrap();
        let a = evaluate_tree(
            &tree_from_fixed(&f, &[0, 1]).unwrap(),
            &GuessRule::OptimalGuess,
        )
        .unwrap();
        let b = evaluate_tree(
            &tree_from_fixed(&f, &[1, 0]).unwrap(),
            &GuessRule::OptimalGuess,
        )
        .unwrap();
        assert!((a.fidelity - b.fidelity).abs() < 1e-15);
        let agg = evaluate_fixed(&f, &GuessRule::OptimalGuess).unwrap();
        assert!((agg.fidelity - a.fidelity).abs() < 1e-14);
    }

    #[test]
    fn central_limit_on_tree_requires_map() {
        let t = z_then(1.0, 1.0);
        assert!(evaluate_tree(&t, &GuessRule::CentralLimit).is_err());
        assert!(evaluate_tree(&t, &GuessRule::Fixed(GuessMap::new())).is_err());
    }

    #[test]
    fn oversized_tree_is_resource_error() {
        let t = crate::strategy::round_robin_pilot(Geometry::Planar, MAX_EXACT_TREE_COPIES + 1)
            .unwrap();
        let rule = make_quadrature(Geometry::Planar, MAX_EXACT_TREE_COPIES + 2).unwrap();
        assert!(matches!(
            fidelity_exact_tree(&t, &GuessRule::OptimalGuess, &rule),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn csv_has_metadata_and_rows() {
        let r = evaluate_tree(&z_then(1.0, 2.0), &GuessRule::OptimalGuess).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with(&format!(
            "# F={},N=2,method=exact_tree,degree=3",
            r.fidelity
        )));
        assert_eq!(lines.len(), 2 + 4);
        assert!(lines[2].starts_with("0,00,"));
    }
}
