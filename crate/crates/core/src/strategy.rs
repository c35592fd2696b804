//! Measurement strategies.
//!
//! Every measurement is a two-outcome projective measurement along an axis
//! `m`. Outcome 0 projects onto `O(+m)` and outcome 1 onto `O(-m)`, so a tree
//! stores one axis per outcome history and the sign of the branch comes from
//! the outcome bit.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{orthonormal_frame, BlochVector, Geometry, Rotation, Vec3};

/// Largest number of copies a [`StrategyTree`] may hold (2^N − 1 axes).
pub const MAX_TREE_COPIES: usize = 22;

/// Outcomes `i_k ... i_1` of the first `k` measurements, packed with `i_1`
/// in the least significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeHistory {
    bits: u64,
    len: usize,
}

impl OutcomeHistory {
    pub const EMPTY: OutcomeHistory = OutcomeHistory { bits: 0, len: 0 };

    pub fn new(bits: u64, len: usize) -> Result<Self> {
        if len > 63 || bits >> len != 0 {
            return Err(Error::validation(format!(
                "encoding {bits} does not fit a history of length {len}"
            )));
        }
        Ok(OutcomeHistory { bits, len })
    }

    /// Builds a history from outcomes listed in measurement order
    /// (`outcomes[0]` is `i_1`).
    pub fn from_outcomes(outcomes: &[u8]) -> Result<Self> {
        let mut h = OutcomeHistory::EMPTY;
        for &i in outcomes {
            h = h.push(i)?;
        }
        Ok(h)
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn len(self) -> usize {
        self.len
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    /// Outcome `i_k` of the `k`-th measurement, `k` counted from 1.
    pub fn outcome(self, k: usize) -> u8 {
        assert!(
            k >= 1 && k <= self.len,
            "outcome {k} of history of length {}",
            self.len
        );
        ((self.bits >> (k - 1)) & 1) as u8
    }

    /// The first `k` outcomes.
    pub fn prefix(self, k: usize) -> OutcomeHistory {
        assert!(k <= self.len);
        OutcomeHistory {
            bits: self.bits & ((1u64 << k) - 1),
            len: k,
        }
    }

    pub fn push(self, outcome: u8) -> Result<Self> {
        if outcome > 1 {
            return Err(Error::validation(format!("outcome {outcome} is not a bit")));
        }
        if self.len >= 63 {
            return Err(Error::validation("history longer than 63 outcomes"));
        }
        Ok(OutcomeHistory {
            bits: self.bits | (u64::from(outcome) << self.len),
            len: self.len + 1,
        })
    }

    /// Latest outcome first, `i_k ... i_1`.
    pub fn to_bitstring(self) -> String {
        (1..=self.len)
            .rev()
            .map(|k| if self.outcome(k) == 0 { '0' } else { '1' })
            .collect()
    }

    pub fn parse_bitstring(s: &str) -> Result<Self> {
        if s.len() > 63 {
            return Err(Error::validation("history longer than 63 outcomes"));
        }
        let mut bits = 0u64;
        for (pos, c) in s.chars().rev().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << pos,
                other => {
                    return Err(Error::validation(format!(
                        "history `{s}` contains `{other}`; expected 0 or 1"
                    )))
                }
            }
        }
        OutcomeHistory::new(bits, s.len())
    }

    /// Every history of length `len`, in increasing encoding order.
    pub fn all(len: usize) -> impl Iterator<Item = OutcomeHistory> {
        (0..1u64 << len).map(move |bits| OutcomeHistory { bits, len })
    }
}

impl fmt::Display for OutcomeHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// ±1 sign of outcome bit `i`.
pub(crate) fn outcome_sign(i: u8) -> f64 {
    if i == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A fully adaptive strategy: one measurement axis per outcome history of
/// length `0..N-1`, stored as a complete binary tree in breadth-first order.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTree {
    geometry: Geometry,
    copies: usize,
    directions: Vec<BlochVector>,
}

pub(crate) fn node_index(history: OutcomeHistory) -> usize {
    (1usize << history.len) - 1 + history.bits as usize
}

impl StrategyTree {
    /// `directions` in breadth-first order: the root, then histories of
    /// length 1 by encoding, and so on.
    pub fn new(geometry: Geometry, copies: usize, directions: Vec<BlochVector>) -> Result<Self> {
        check_copies(copies)?;
        let expected = (1usize << copies) - 1;
        if directions.len() != expected {
            return Err(Error::validation(format!(
                "a {copies}-copy tree needs {expected} directions, got {}",
                directions.len()
            )));
        }
        if let Some(bad) = directions.iter().find(|d| !geometry.contains(d)) {
            return Err(Error::validation(format!(
                "direction {:?} leaves the {geometry} geometry",
                bad.vec().to_array()
            )));
        }
        Ok(StrategyTree {
            geometry,
            copies,
            directions,
        })
    }

    /// Builds a tree by asking `f` for the axis at every history.
    pub fn from_fn(
        geometry: Geometry,
        copies: usize,
        mut f: impl FnMut(OutcomeHistory) -> BlochVector,
    ) -> Result<Self> {
        check_copies(copies)?;
        let directions = (0..copies)
            .flat_map(OutcomeHistory::all)
            .map(&mut f)
            .collect();
        Self::new(geometry, copies, directions)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn directions(&self) -> &[BlochVector] {
        &self.directions
    }

    /// Axis of the measurement performed after `history`.
    pub fn direction(&self, history: OutcomeHistory) -> BlochVector {
        assert!(history.len < self.copies, "history {history} is a leaf");
        self.directions[node_index(history)]
    }

    pub fn set_direction(&mut self, history: OutcomeHistory, direction: BlochVector) -> Result<()> {
        if history.len >= self.copies {
            return Err(Error::validation(format!("history {history} is a leaf")));
        }
        if !self.geometry.contains(&direction) {
            return Err(Error::validation("direction leaves the geometry"));
        }
        self.directions[node_index(history)] = direction;
        Ok(())
    }

    /// Signed axis `m(x_k)` of the `k`-th measurement along the branch `x`:
    /// the stored axis, negated when `i_k = 1`.
    pub fn signed_direction(&self, x: OutcomeHistory, k: usize) -> Vec3 {
        let m = self.direction(x.prefix(k - 1)).vec();
        outcome_sign(x.outcome(k)) * m
    }

    /// The same strategy with every axis rotated. Planar trees accept only
    /// rotations that keep the equator in place.
    pub fn rotated(&self, rotation: &Rotation) -> Result<Self> {
        let directions = self
            .directions
            .iter()
            .map(|d| {
                let r = rotation.apply(d.vec());
                let r = match self.geometry {
                    Geometry::Planar if r.z.abs() < 1e-12 => Vec3::new(r.x, r.y, 0.0),
                    _ => r,
                };
                BlochVector::normalize(r).expect("rotation preserves norm")
            })
            .collect();
        Self::new(self.geometry, self.copies, directions)
    }

    pub fn to_document(&self) -> StrategyDocument {
        let nodes = (0..self.copies)
            .flat_map(OutcomeHistory::all)
            .map(|h| StrategyNode {
                history: h.to_bitstring(),
                direction: self.direction(h).vec().to_array(),
            })
            .collect();
        StrategyDocument {
            geometry: self.geometry,
            copies: self.copies,
            nodes,
        }
    }

    pub fn from_document(doc: &StrategyDocument) -> Result<Self> {
        check_copies(doc.copies)?;
        let mut slots: Vec<Option<BlochVector>> = vec![None; (1usize << doc.copies) - 1];
        for (i, node) in doc.nodes.iter().enumerate() {
            let h = OutcomeHistory::parse_bitstring(&node.history)
                .map_err(|e| Error::validation(format!("nodes[{i}].history: {e}")))?;
            if h.len >= doc.copies {
                return Err(Error::validation(format!(
                    "nodes[{i}].history `{}` is too long for N = {}",
                    node.history, doc.copies
                )));
            }
            let d = BlochVector::new(node.direction.into())
                .map_err(|e| Error::validation(format!("nodes[{i}].direction: {e}")))?;
            let slot = &mut slots[node_index(h)];
            if slot.is_some() {
                return Err(Error::validation(format!(
                    "nodes[{i}].history `{}` appears twice",
                    node.history
                )));
            }
            *slot = Some(d);
        }
        let directions = slots
            .into_iter()
            .enumerate()
            .map(|(idx, d)| {
                d.ok_or_else(|| {
                    let len = (usize::BITS - 1 - (idx + 1).leading_zeros()) as usize;
                    let h = OutcomeHistory::new((idx + 1 - (1 << len)) as u64, len).unwrap();
                    Error::validation(format!("missing direction for history `{h}`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.geometry, doc.copies, directions)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StrategyDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

fn check_copies(copies: usize) -> Result<()> {
    if copies == 0 {
        return Err(Error::validation("a strategy needs at least one copy"));
    }
    if copies > MAX_TREE_COPIES {
        return Err(Error::Resource {
            what: "strategy tree copies",
            required: copies as u64,
            allowed: MAX_TREE_COPIES as u64,
        });
    }
    Ok(())
}

/// Serialized form of a [`StrategyTree`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDocument {
    pub geometry: Geometry,
    #[serde(rename = "N")]
    pub copies: usize,
    pub nodes: Vec<StrategyNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyNode {
    /// Outcomes so far, latest first.
    pub history: String,
    pub direction: [f64; 3],
}

/// A non-adaptive strategy: each axis is measured a fixed number of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedStrategy {
    geometry: Geometry,
    axes: Vec<(BlochVector, usize)>,
}

impl FixedStrategy {
    pub fn new(geometry: Geometry, axes: Vec<(BlochVector, usize)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::validation(
                "a fixed strategy needs at least one axis",
            ));
        }
        for (i, (axis, count)) in axes.iter().enumerate() {
            if *count == 0 {
                return Err(Error::validation(format!("axis {i} has zero repetitions")));
            }
            if !geometry.contains(axis) {
                return Err(Error::validation(format!(
                    "axis {i} leaves the {geometry} geometry"
                )));
            }
        }
        Ok(FixedStrategy { geometry, axes })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn axes(&self) -> &[(BlochVector, usize)] {
        &self.axes
    }

    pub fn copies(&self) -> usize {
        self.axes.iter().map(|(_, c)| c).sum()
    }

    /// Axis indices in round-robin order, e.g. `0,1,2,0,1,2,...`.
    pub fn round_robin_order(&self) -> Vec<usize> {
        let mut left: Vec<usize> = self.axes.iter().map(|(_, c)| *c).collect();
        let mut order = Vec::with_capacity(self.copies());
        while order.len() < self.copies() {
            for (i, l) in left.iter_mut().enumerate() {
                if *l > 0 {
                    *l -= 1;
                    order.push(i);
                }
            }
        }
        order
    }

    fn check_order(&self, order: &[usize]) -> Result<()> {
        let mut seen = vec![0usize; self.axes.len()];
        for &i in order {
            *seen
                .get_mut(i)
                .ok_or_else(|| Error::validation(format!("axis index {i} out of range")))? += 1;
        }
        for (i, ((_, count), got)) in self.axes.iter().zip(&seen).enumerate() {
            if count != got {
                return Err(Error::validation(format!(
                    "order uses axis {i} {got} times but it has {count} repetitions"
                )));
            }
        }
        Ok(())
    }

    /// Expands into a tree whose `k`-th measurement is along axis `order[k]`
    /// regardless of earlier outcomes.
    pub fn tree(&self, order: &[usize]) -> Result<StrategyTree> {
        self.check_order(order)?;
        StrategyTree::from_fn(self.geometry, order.len(), |h| self.axes[order[h.len()]].0)
    }

    /// Per-axis counts of `+1` outcomes along the branch `x` of the tree
    /// built with `order`.
    pub fn counts_of(&self, order: &[usize], x: OutcomeHistory) -> Vec<usize> {
        let mut counts = vec![0; self.axes.len()];
        for (k, &axis) in order.iter().enumerate().take(x.len()) {
            if x.outcome(k + 1) == 0 {
                counts[axis] += 1;
            }
        }
        counts
    }

    /// Position of `counts` in [`enumerate_count_classes`] order.
    pub fn class_index(&self, counts: &[usize]) -> usize {
        counts
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&a, (_, n))| acc * (n + 1) + a)
    }

    pub fn class_count(&self) -> u64 {
        self.axes
            .iter()
            .map(|(_, n)| *n as u64 + 1)
            .fold(1u64, |acc, x| acc.saturating_mul(x))
    }
}

/// Canonical axes, each measured `per_axis` times.
pub fn make_fixed_axes(geometry: Geometry, per_axis: usize) -> Result<FixedStrategy> {
    if per_axis == 0 {
        return Err(Error::validation("per-axis count must be at least 1"));
    }
    FixedStrategy::new(
        geometry,
        geometry
            .canonical_axes()
            .into_iter()
            .map(|a| (a, per_axis))
            .collect(),
    )
}

/// Convenience wrapper around [`FixedStrategy::tree`].
pub fn tree_from_fixed(fixed: &FixedStrategy, order: &[usize]) -> Result<StrategyTree> {
    fixed.tree(order)
}

/// Number of `+1` outcomes along each axis of a fixed strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeCounts {
    pub counts: Vec<usize>,
    /// Number of raw outcome strings with these counts, `∏ C(N_i, a_i)`.
    pub multiplicity: f64,
}

impl OutcomeCounts {
    /// Fractions `α_i = a_i / N_i`.
    pub fn fractions(&self, fixed: &FixedStrategy) -> Vec<f64> {
        self.counts
            .iter()
            .zip(fixed.axes())
            .map(|(&a, (_, n))| a as f64 / *n as f64)
            .collect()
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        format!("({})", parts.join(","))
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// All `∏ (N_i + 1)` count classes, last axis varying fastest.
pub fn enumerate_count_classes(fixed: &FixedStrategy) -> Vec<OutcomeCounts> {
    let sizes: Vec<usize> = fixed.axes().iter().map(|(_, n)| *n).collect();
    let mut out = Vec::with_capacity(fixed.class_count() as usize);
    let mut counts = vec![0usize; sizes.len()];
    loop {
        let multiplicity = counts
            .iter()
            .zip(&sizes)
            .map(|(&a, &n)| binomial(n, a))
            .product();
        out.push(OutcomeCounts {
            counts: counts.clone(),
            multiplicity,
        });
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if counts[i] < sizes[i] {
                counts[i] += 1;
                break;
            }
            counts[i] = 0;
        }
    }
}

/// Pilot measurements followed by exploration of the plane transverse to the
/// pilot guess, combined through a variational parameter `lambda`.
#[derive(Debug, Clone)]
pub struct TwoStageStrategy {
    geometry: Geometry,
    copies: usize,
    pilot: StrategyTree,
    lambda: f64,
}

impl TwoStageStrategy {
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn pilot_size(&self) -> usize {
        self.pilot.copies()
    }

    pub fn pilot(&self) -> &StrategyTree {
        &self.pilot
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Copies measured in the second stage.
    pub fn exploration_size(&self) -> usize {
        self.copies - self.pilot.copies()
    }

    /// Axes explored after the pilot returned `pilot_guess`: `(u, v)` in the
    /// full geometry, the single in-plane normal `u` in the planar one.
    pub fn exploration_axes(&self, pilot_guess: BlochVector) -> Vec<BlochVector> {
        match self.geometry {
            Geometry::Full => {
                let (u, v) = orthonormal_frame(pilot_guess);
                vec![u, v]
            }
            Geometry::Planar => {
                let u = BlochVector::Z.vec().cross(pilot_guess.vec());
                vec![BlochVector::normalize(Vec3::new(u.x, u.y, 0.0)).expect("in-plane guess")]
            }
        }
    }

    /// Axis index used by the `j`-th exploration measurement (u, v, u, v, ...).
    pub fn exploration_axis_index(&self, j: usize) -> usize {
        match self.geometry {
            Geometry::Full => j % 2,
            Geometry::Planar => 0,
        }
    }

    /// Number of exploration measurements along each axis.
    pub fn exploration_counts(&self) -> Vec<usize> {
        let rest = self.exploration_size();
        match self.geometry {
            Geometry::Full => vec![rest.div_ceil(2), rest / 2],
            Geometry::Planar => vec![rest],
        }
    }

    /// Final guess from the pilot guess and the `+1` counts along each
    /// exploration axis.
    pub fn final_guess(&self, pilot_guess: BlochVector, plus_counts: &[usize]) -> BlochVector {
        let axes = self.exploration_axes(pilot_guess);
        let totals = self.exploration_counts();
        let r: Vec<f64> = plus_counts
            .iter()
            .zip(&totals)
            .map(|(&a, &n)| 2.0 * a as f64 / n as f64 - 1.0)
            .collect();
        // ω = λ|r| with the transverse direction along r/|r|; planar keeps the sign of r.
        let transverse = match self.geometry {
            Geometry::Full => {
                let norm = r[0].hypot(r[1]);
                if norm == 0.0 {
                    return pilot_guess;
                }
                let omega = self.lambda * norm;
                let dir = (r[0] / norm) * axes[0].vec() + (r[1] / norm) * axes[1].vec();
                (omega, dir)
            }
            Geometry::Planar => (self.lambda * r[0], axes[0].vec()),
        };
        let (omega, dir) = transverse;
        if omega == 0.0 {
            return pilot_guess;
        }
        let (s, c) = omega.sin_cos();
        BlochVector::normalize_in(self.geometry, c * pilot_guess.vec() + s * dir)
            .expect("rotation of a unit vector")
    }
}

/// Validates and assembles a two-stage strategy.
pub fn make_two_stage(
    geometry: Geometry,
    copies: usize,
    lambda: f64,
    pilot: StrategyTree,
) -> Result<TwoStageStrategy> {
    let n0 = pilot.copies();
    if pilot.geometry() != geometry {
        return Err(Error::validation(
            "pilot geometry differs from the strategy geometry",
        ));
    }
    if n0 >= copies {
        return Err(Error::validation(format!(
            "pilot size {n0} must be smaller than N = {copies}"
        )));
    }
    if geometry == Geometry::Full && !(copies - n0).is_multiple_of(2) {
        return Err(Error::validation(format!(
            "N - N0 = {} must be even to split between the two exploration axes",
            copies - n0
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::validation(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(TwoStageStrategy {
        geometry,
        copies,
        pilot,
        lambda,
    })
}

/// A fixed-axes pilot with `n0` copies spread round-robin over the canonical
/// axes.
pub fn round_robin_pilot(geometry: Geometry, n0: usize) -> Result<StrategyTree> {
    let axes = geometry.canonical_axes();
    let d = axes.len();
    StrategyTree::from_fn(geometry, n0, |h| axes[h.len() % d])
}

/// Map from branch id to guess, used by [`crate::estimator::GuessRule::Fixed`].
pub type GuessMap = BTreeMap<u64, BlochVector>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_encoding() {
        let h = OutcomeHistory::from_outcomes(&[1, 0, 1, 1]).unwrap();
        assert_eq!(h.bits(), 0b1101);
        assert_eq!(h.to_bitstring(), "1101");
        assert_eq!(h.outcome(1), 1);
        assert_eq!(h.outcome(2), 0);
        assert_eq!(h.prefix(2).to_bitstring(), "01");
        assert_eq!(OutcomeHistory::parse_bitstring("1101").unwrap(), h);
        assert_eq!(
            OutcomeHistory::parse_bitstring("").unwrap(),
            OutcomeHistory::EMPTY
        );
        assert!(OutcomeHistory::parse_bitstring("012").is_err());
        assert!(OutcomeHistory::new(4, 2).is_err());
    }

    #[test]
    fn fixed_axes_shapes() {
        let f = make_fixed_axes(Geometry::Planar, 1).unwrap();
        assert_eq!(f.copies(), 2);
        assert_eq!(f.axes()[0], (BlochVector::X, 1));
        assert_eq!(f.axes()[1], (BlochVector::Y, 1));
        let f = make_fixed_axes(Geometry::Full, 2).unwrap();
        assert_eq!(f.copies(), 6);
        assert_eq!(f.axes().len(), 3);
        for n in 1..5 {
            assert_eq!(
                make_fixed_axes(Geometry::Planar, n).unwrap().copies(),
                2 * n
            );
        }
        assert!(make_fixed_axes(Geometry::Full, 0).is_err());
    }

    #[test]
    fn tree_from_fixed_layout() {
        let f = make_fixed_axes(Geometry::Planar, 1).unwrap();
        let t = tree_from_fixed(&f, &[0, 1]).unwrap();
        assert_eq!(t.direction(OutcomeHistory::EMPTY), BlochVector::X);
        for h in OutcomeHistory::all(1) {
            assert_eq!(t.direction(h), BlochVector::Y);
        }
        assert!(tree_from_fixed(&f, &[0, 0]).is_err());
        assert!(tree_from_fixed(&f, &[0, 1, 1]).is_err());

        let single = FixedStrategy::new(Geometry::Full, vec![(BlochVector::Z, 1)]).unwrap();
        let t = tree_from_fixed(&single, &[0]).unwrap();
        assert_eq!(t.directions(), &[BlochVector::Z]);
    }

    #[test]
    fn count_classes() {
        let f = make_fixed_axes(Geometry::Planar, 1).unwrap();
        let c = enumerate_count_classes(&f);
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|k| k.multiplicity == 1.0));

        let f = make_fixed_axes(Geometry::Full, 2).unwrap();
        let c = enumerate_count_classes(&f);
        assert_eq!(c.len(), 27);
        assert_eq!(c.iter().map(|k| k.multiplicity).sum::<f64>(), 64.0);
        for (i, k) in c.iter().enumerate() {
            assert_eq!(f.class_index(&k.counts), i);
        }

        let f = make_fixed_axes(Geometry::Planar, 2).unwrap();
        let c = enumerate_count_classes(&f);
        let k = c.iter().find(|k| k.counts == [1, 1]).unwrap();
        assert_eq!(k.multiplicity, 4.0);
    }

    #[test]
    fn document_rejects_bad_input() {
        let good = r#"{"geometry":"full","N":1,"nodes":[{"history":"","direction":[0,0,1]}]}"#;
        assert!(StrategyTree::from_json(good).is_ok());
        let missing = r#"{"geometry":"full","N":2,"nodes":[{"history":"","direction":[0,0,1]}]}"#;
        let err = StrategyTree::from_json(missing).unwrap_err().to_string();
        assert!(err.contains("missing direction for history `0`"), "{err}");
        let not_unit = r#"{"geometry":"full","N":1,"nodes":[{"history":"","direction":[0,0,2]}]}"#;
        assert!(StrategyTree::from_json(not_unit)
            .unwrap_err()
            .to_string()
            .contains("nodes[0]"));
        let planar = r#"{"geometry":"planar","N":1,"nodes":[{"history":"","direction":[0,0,1]}]}"#;
        assert!(StrategyTree::from_json(planar).is_err());
    }

    #[test]
    fn two_stage_validation() {
        let pilot = round_robin_pilot(Geometry::Full, 4).unwrap();
        assert!(make_two_stage(Geometry::Full, 10, 1.0, pilot.clone()).is_ok());
        assert!(make_two_stage(Geometry::Full, 9, 1.0, pilot.clone()).is_err());
        assert!(make_two_stage(Geometry::Full, 4, 1.0, pilot.clone()).is_err());
        assert!(make_two_stage(Geometry::Full, 10, 1.5, pilot).is_err());
    }

    #[test]
    fn two_stage_guess_degenerate_cases() {
        let pilot = round_robin_pilot(Geometry::Full, 2).unwrap();
        let m0 = BlochVector::normalize(Vec3::new(0.3, 0.4, -0.5)).unwrap();
        let s = make_two_stage(Geometry::Full, 12, 0.0, pilot.clone()).unwrap();
        assert_eq!(s.final_guess(m0, &[5, 0]), m0);
        let s = make_two_stage(Geometry::Full, 14, 0.7, pilot).unwrap();
        assert_eq!(s.exploration_counts(), vec![6, 6]);
        assert_eq!(s.final_guess(m0, &[3, 3]), m0);
        let g = s.final_guess(m0, &[6, 3]);
        // ω = 0.7 · |(1, 0)| along u
        let u = s.exploration_axes(m0)[0];
        assert!((g.dot(m0.vec()) - 0.7f64.cos()).abs() < 1e-14);
        assert!((g.dot(u.vec()) - 0.7f64.sin()).abs() < 1e-14);
    }
}
