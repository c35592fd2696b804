//! Large-`N` behaviour of fixed-axis schemes.
//!
//! For each scheme the fidelity deficit is written as `1 − F = c_N / N`, and
//! `c = lim c_N` is estimated by polynomial extrapolation in a small
//! parameter `h`.
//!
//! Central-limit guesses are smooth functions of the counts and `c_N` is a
//! series in `1/N`. Optimal guesses pick up boundary layers of angular width
//! `N^{-1/2}` near the axis poles, so their `c_N` carries `N^{-1/2}` terms and
//! is extrapolated in `h = N^{-1/2}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{evaluate_fixed, GuessRule};
use crate::geometry::Geometry;
use crate::montecarlo::{simulate_fidelity, McConfig, Strategy};
use crate::par::map_indexed;
use crate::strategy::{make_fixed_axes, make_two_stage, StrategyTree};

/// Largest `N` accepted for planar series.
pub const MAX_PLANAR_SERIES_COPIES: usize = 200;
/// Largest `N` accepted for full-sphere series.
pub const MAX_FULL_SERIES_COPIES: usize = 60;
/// Extrapolation tables whose weights exceed this in absolute sum are rejected.
pub const MAX_EXTRAPOLATION_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "2d-cl")]
    PlanarCentralLimit,
    #[serde(rename = "2d-og")]
    PlanarOptimalGuess,
    #[serde(rename = "3d-cl")]
    FullCentralLimit,
    #[serde(rename = "3d-og")]
    FullOptimalGuess,
    /// Pilot plus transverse exploration, estimated by Monte Carlo.
    #[serde(rename = "two-stage")]
    TwoStage,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::PlanarCentralLimit,
        Scheme::PlanarOptimalGuess,
        Scheme::FullCentralLimit,
        Scheme::FullOptimalGuess,
        Scheme::TwoStage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::PlanarCentralLimit => "2d-cl",
            Scheme::PlanarOptimalGuess => "2d-og",
            Scheme::FullCentralLimit => "3d-cl",
            Scheme::FullOptimalGuess => "3d-og",
            Scheme::TwoStage => "two-stage",
        }
    }

    pub fn geometry(self) -> Geometry {
        match self {
            Scheme::PlanarCentralLimit | Scheme::PlanarOptimalGuess => Geometry::Planar,
            _ => Geometry::Full,
        }
    }

    pub fn guess(self) -> GuessRule {
        match self {
            Scheme::PlanarCentralLimit | Scheme::FullCentralLimit => GuessRule::CentralLimit,
            _ => GuessRule::OptimalGuess,
        }
    }

    /// Known limit of `c_N`.
    pub fn expected_coefficient(self) -> f64 {
        match self {
            Scheme::PlanarCentralLimit => 3.0 / 8.0,
            Scheme::PlanarOptimalGuess => 0.25,
            Scheme::FullCentralLimit => 6.0 / 5.0,
            Scheme::FullOptimalGuess => 13.0 / 12.0,
            Scheme::TwoStage => 1.0,
        }
    }

    /// Relative tolerance on the extrapolated coefficient.
    pub fn tolerance(self) -> f64 {
        match self.geometry() {
            Geometry::Planar => 0.02,
            Geometry::Full => 0.05,
        }
    }

    pub fn expansion(self) -> Expansion {
        match self {
            Scheme::PlanarCentralLimit | Scheme::FullCentralLimit | Scheme::TwoStage => {
                Expansion::InverseN
            }
            Scheme::PlanarOptimalGuess | Scheme::FullOptimalGuess => Expansion::InverseSqrtN,
        }
    }

    pub fn default_grid(self) -> Vec<usize> {
        match self {
            Scheme::PlanarCentralLimit | Scheme::PlanarOptimalGuess => {
                vec![8, 16, 32, 64, 128, 196]
            }
            Scheme::FullCentralLimit | Scheme::FullOptimalGuess => vec![6, 12, 24, 48, 60],
            Scheme::TwoStage => vec![36, 72, 144],
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown scheme `{s}` (expected 2d-cl, 2d-og, 3d-cl, 3d-og or two-stage)"
                ))
            })
    }
}

/// Small parameter of the assumed expansion of `c_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    /// `c + b₁/N + b₂/N² + …`
    InverseN,
    /// `c + b₁/√N + b₂/N + …`
    InverseSqrtN,
}

impl Expansion {
    pub fn step(self, copies: usize) -> f64 {
        match self {
            Expansion::InverseN => 1.0 / copies as f64,
            Expansion::InverseSqrtN => 1.0 / (copies as f64).sqrt(),
        }
    }
}

/// Collective-measurement coefficient: `1 − F ≈ c / N` for the best joint
/// measurement.
pub fn cm_coefficient(geometry: Geometry) -> f64 {
    match geometry {
        Geometry::Planar => 0.25,
        Geometry::Full => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesEntry {
    #[serde(rename = "N")]
    pub copies: usize,
    pub fidelity: f64,
    /// `N (1 − F)`.
    pub coefficient: f64,
    /// Standard error of `coefficient` for Monte Carlo entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSeries {
    pub scheme: Scheme,
    pub entries: Vec<SeriesEntry>,
}

impl CoefficientSeries {
    /// Builds a series from `(N, c_N)` pairs; handy for synthetic input.
    pub fn from_coefficients(scheme: Scheme, points: &[(usize, f64)]) -> Self {
        CoefficientSeries {
            scheme,
            entries: points
                .iter()
                .map(|&(n, c)| SeriesEntry {
                    copies: n,
                    fidelity: 1.0 - c / n as f64,
                    coefficient: c,
                    stderr: None,
                })
                .collect(),
        }
    }

    /// Whether consecutive `c_N` increase with `N`.
    pub fn is_increasing(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].coefficient > w[0].coefficient)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,F,c_N,stderr\n");
        for e in &self.entries {
            let err = e.stderr.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.copies, e.fidelity, e.coefficient, err
            ));
        }
        out
    }
}

fn check_grid(scheme: Scheme, grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::validation("the N grid is empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("the N grid must be strictly increasing"));
    }
    let d = scheme.geometry().dimension();
    if let Some(&n) = grid.iter().find(|&&n| n == 0 || n % d != 0) {
        return Err(Error::validation(format!(
            "N = {n} does not split evenly over {d} axes"
        )));
    }
    let limit = match scheme.geometry() {
        Geometry::Planar => MAX_PLANAR_SERIES_COPIES,
        Geometry::Full => MAX_FULL_SERIES_COPIES,
    };
    let largest = *grid.last().expect("non-empty");
    if largest > limit {
        return Err(Error::Resource {
            what: "series copies",
            required: largest as u64,
            allowed: limit as u64,
        });
    }
    Ok(())
}

/// Exact fidelities of the equal-split fixed-axis scheme at every `N`.
pub fn build_series(scheme: Scheme, grid: &[usize]) -> Result<CoefficientSeries> {
    if scheme == Scheme::TwoStage {
        return Err(Error::validation(
            "the two-stage scheme is sampled; use build_two_stage_series",
        ));
    }
    check_grid(scheme, grid)?;
    let d = scheme.geometry().dimension();
    let guess = scheme.guess();
    let entries = map_indexed(grid.len(), |i| -> Result<SeriesEntry> {
        let n = grid[i];
        let fixed = make_fixed_axes(scheme.geometry(), n / d)?;
        let f = evaluate_fixed(&fixed, &guess)?.fidelity;
        Ok(SeriesEntry {
            copies: n,
            fidelity: f,
            coefficient: n as f64 * (1.0 - f),
            stderr: None,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientSeries { scheme, entries })
}

/// Monte Carlo series of the two-stage scheme run after `pilot`.
pub fn build_two_stage_series(
    grid: &[usize],
    pilot: &StrategyTree,
    lambda: f64,
    mc: &McConfig,
) -> Result<CoefficientSeries> {
    if grid.is_empty() {
        return Err(Error::validation("the N grid is empty"));
    }
    let mut entries = Vec::with_capacity(grid.len());
    for &n in grid {
        let s = make_two_stage(pilot.geometry(), n, lambda, pilot.clone())?;
        let r = simulate_fidelity(&Strategy::TwoStage(s), &GuessRule::OptimalGuess, mc)?;
        entries.push(SeriesEntry {
            copies: n,
            fidelity: r.mean,
            coefficient: n as f64 * (1.0 - r.mean),
            stderr: Some(n as f64 * r.stderr),
        });
    }
    Ok(CoefficientSeries {
        scheme: Scheme::TwoStage,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub value: f64,
    pub expansion: Expansion,
    pub order: usize,
    pub points_used: usize,
    /// `Σ |w_j|` over the extrapolation weights; 1 means no amplification.
    pub condition: f64,
    /// Standard error propagated from sampled entries, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

/// Eliminates the `1/N, …, 1/N^order` corrections from the last `order + 1`
/// entries by evaluating their interpolating polynomial in `h = 1/N` at 0.
pub fn richardson_extrapolate(series: &CoefficientSeries, order: usize) -> Result<Extrapolation> {
    richardson_extrapolate_in(series, order, Expansion::InverseN)
}

/// [`richardson_extrapolate`] with an explicit expansion parameter.
pub fn richardson_extrapolate_in(
    series: &CoefficientSeries,
    order: usize,
    expansion: Expansion,
) -> Result<Extrapolation> {
    let k = order + 1;
    if series.entries.len() < k {
        return Err(Error::validation(format!(
            "order {order} needs {k} entries, the series has {}",
            series.entries.len()
        )));
    }
    let tail = &series.entries[series.entries.len() - k..];
    let h: Vec<f64> = tail.iter().map(|e| expansion.step(e.copies)).collect();
    // Lagrange weights at h = 0.
    let mut weights = Vec::with_capacity(k);
    for j in 0..k {
        let mut w = 1.0;
        for m in 0..k {
            if m != j {
                let gap = h[j] - h[m];
                if gap == 0.0 {
                    return Err(Error::IllConditioned {
                        condition: f64::INFINITY,
                    });
                }
                w *= -h[m] / gap;
            }
        }
        weights.push(w);
    }
    let condition: f64 = weights.iter().map(|w| w.abs()).sum();
    if !condition.is_finite() || condition > MAX_EXTRAPOLATION_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let value = crate::sum::sum(weights.iter().zip(tail).map(|(w, e)| w * e.coefficient));
    let stderr = if tail.iter().all(|e| e.stderr.is_some()) {
        Some(
            weights
                .iter()
                .zip(tail)
                .map(|(w, e)| (w * e.stderr.unwrap_or(0.0)).powi(2))
                .sum::<f64>()
                .sqrt(),
        )
    } else {
        None
    };
    Ok(Extrapolation {
        value,
        expansion,
        order,
        points_used: k,
        condition,
        stderr,
    })
}

/// Weighted least-squares fit of `c_N = c + b / N` using the sampled error
/// bars; every entry must carry a standard error.
pub fn weighted_extrapolate(series: &CoefficientSeries) -> Result<Extrapolation> {
    let e = &series.entries;
    if e.len() < 2 {
        return Err(Error::validation(
            "a weighted fit needs at least two entries",
        ));
    }
    let (mut s, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for entry in e {
        let sigma = entry
            .stderr
            .filter(|s| *s > 0.0)
            .ok_or_else(|| Error::validation("every entry needs a positive standard error"))?;
        let w = sigma.powi(-2);
        let x = 1.0 / entry.copies as f64;
        s += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * entry.coefficient;
        sxy += w * x * entry.coefficient;
    }
    let det = s * sxx - sx * sx;
    let condition = (s * sxx) / det.abs();
    if !condition.is_finite() || condition > MAX_EXTRAPOLATION_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let value = (sxx * sy - sx * sxy) / det;
    Ok(Extrapolation {
        value,
        expansion: Expansion::InverseN,
        order: 1,
        points_used: e.len(),
        condition,
        stderr: Some((sxx / det).sqrt()),
    })
}

/// Order used by [`extrapolate`] for exact series.
pub const DEFAULT_EXTRAPOLATION_ORDER: usize = 2;

/// Default extrapolation for a scheme: Richardson of order 2 in the scheme's
/// expansion for exact series, a weighted linear fit for sampled ones.
pub fn extrapolate(series: &CoefficientSeries) -> Result<Extrapolation> {
    if series.entries.iter().all(|e| e.stderr.is_some()) {
        weighted_extrapolate(series)
    } else {
        let order = DEFAULT_EXTRAPOLATION_ORDER.min(series.entries.len().saturating_sub(1));
        richardson_extrapolate_in(series, order, series.scheme.expansion())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmComparison {
    pub scheme: Scheme,
    pub c_extrapolated: f64,
    pub expansion: Expansion,
    pub order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_stderr: Option<f64>,
    pub expected: f64,
    pub cm_coefficient: f64,
    /// `c_extrapolated / cm_coefficient`.
    pub ratio: f64,
    pub tolerance: f64,
    /// The ratio is within `tolerance` of 1.
    pub saturates: bool,
    /// The extrapolated coefficient is within `tolerance` of `expected`.
    pub pass: bool,
}

/// Extrapolates `series` and sets it against the collective-measurement
/// coefficient of its geometry.
pub fn compare_cm_bound(series: &CoefficientSeries) -> Result<CmComparison> {
    Ok(compare_extrapolation(series.scheme, &extrapolate(series)?))
}

/// [`compare_cm_bound`] for an extrapolation the caller already made.
pub fn compare_extrapolation(scheme: Scheme, ex: &Extrapolation) -> CmComparison {
    let cm = cm_coefficient(scheme.geometry());
    let expected = scheme.expected_coefficient();
    let tolerance = scheme.tolerance();
    let ratio = ex.value / cm;
    CmComparison {
        scheme,
        c_extrapolated: ex.value,
        expansion: ex.expansion,
        order: ex.order,
        c_stderr: ex.stderr,
        expected,
        cm_coefficient: cm,
        ratio,
        tolerance,
        saturates: (ratio - 1.0).abs() <= tolerance,
        pass: ((ex.value - expected) / expected).abs() <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_series_extrapolates_exactly() {
        let pts: Vec<(usize, f64)> = [8, 16, 32, 64]
            .iter()
            .map(|&n| (n, 1.0 - 2.0 / n as f64))
            .collect();
        let s = CoefficientSeries::from_coefficients(Scheme::FullOptimalGuess, &pts);
        for order in 1..=3 {
            let ex = richardson_extrapolate(&s, order).unwrap();
            assert!(
                (ex.value - 1.0).abs() < 1e-10,
                "order {order}: {}",
                ex.value
            );
        }
        let quad: Vec<(usize, f64)> = [8, 16, 32]
            .iter()
            .map(|&n| (n, 0.5 + 3.0 / n as f64 - 7.0 / (n * n) as f64))
            .collect();
        let s = CoefficientSeries::from_coefficients(Scheme::PlanarCentralLimit, &quad);
        assert!((richardson_extrapolate(&s, 2).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn half_power_expansion() {
        let pts: Vec<(usize, f64)> = [16, 64, 144]
            .iter()
            .map(|&n| (n, 0.25 + 0.5 / (n as f64).sqrt() - 0.3 / n as f64))
            .collect();
        let s = CoefficientSeries::from_coefficients(Scheme::PlanarOptimalGuess, &pts);
        let ex = richardson_extrapolate_in(&s, 2, Expansion::InverseSqrtN).unwrap();
        assert!((ex.value - 0.25).abs() < 1e-12);
        assert!((extrapolate(&s).unwrap().value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn too_short_or_degenerate() {
        let s = CoefficientSeries::from_coefficients(Scheme::PlanarOptimalGuess, &[(8, 0.3)]);
        assert!(matches!(
            richardson_extrapolate(&s, 1),
            Err(Error::Validation(_))
        ));
        let s =
            CoefficientSeries::from_coefficients(Scheme::PlanarOptimalGuess, &[(8, 0.3), (8, 0.3)]);
        assert!(matches!(
            richardson_extrapolate(&s, 1),
            Err(Error::IllConditioned { .. })
        ));
        // Nearly coincident abscissae blow up the weights.
        let pts: Vec<(usize, f64)> = (1000..1006).map(|n| (n, 0.3)).collect();
        let s = CoefficientSeries::from_coefficients(Scheme::PlanarOptimalGuess, &pts);
        assert!(matches!(
            richardson_extrapolate(&s, 5),
            Err(Error::IllConditioned { condition }) if condition > MAX_EXTRAPOLATION_CONDITION
        ));
    }

    #[test]
    fn weighted_fit_recovers_line() {
        let mut s = CoefficientSeries::from_coefficients(
            Scheme::TwoStage,
            &[
                (36, 1.0 + 3.0 / 36.0),
                (72, 1.0 + 3.0 / 72.0),
                (144, 1.0 + 3.0 / 144.0),
            ],
        );
        for e in &mut s.entries {
            e.stderr = Some(0.01);
        }
        let ex = weighted_extrapolate(&s).unwrap();
        assert!((ex.value - 1.0).abs() < 1e-12);
        assert!(ex.stderr.unwrap() > 0.0);
    }

    #[test]
    fn grid_validation() {
        assert!(build_series(Scheme::FullOptimalGuess, &[6, 7]).is_err());
        assert!(build_series(Scheme::PlanarOptimalGuess, &[8, 4]).is_err());
        assert!(matches!(
            build_series(Scheme::FullOptimalGuess, &[63]),
            Err(Error::Resource { .. })
        ));
        assert!(matches!(
            build_series(Scheme::PlanarCentralLimit, &[202]),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn small_planar_series() {
        let og = build_series(Scheme::PlanarOptimalGuess, &[2, 4, 8]).unwrap();
        let cl = build_series(Scheme::PlanarCentralLimit, &[2, 4, 8]).unwrap();
        for (a, b) in og.entries.iter().zip(&cl.entries) {
            assert!(a.fidelity >= b.fidelity - 1e-15);
            assert!(a.fidelity > 0.5 && a.fidelity < 1.0 && a.coefficient > 0.0);
        }
        assert_eq!(og.to_csv().lines().count(), 4);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(
                serde_json::to_string(&s).unwrap(),
                format!("\"{}\"", s.name())
            );
        }
    }
}
