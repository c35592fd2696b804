//! Exact polynomial integration against the normalized uniform measure on
//! the Bloch sphere or circle.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{BlochVector, Geometry, Vec3};
use crate::sum::NeumaierSum;

/// Upper bound on the number of nodes a rule may allocate.
pub const MAX_QUADRATURE_NODES: u64 = 1 << 22;

/// Nodes and weights integrating every polynomial of total degree
/// `<= exact_degree` in the components of `n` exactly. Weights sum to 1.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    geometry: Geometry,
    nodes: Vec<BlochVector>,
    weights: Vec<f64>,
    exact_degree: usize,
}

impl QuadratureRule {
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn nodes(&self) -> &[BlochVector] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec3, f64)> + '_ {
        self.nodes
            .iter()
            .map(|n| n.vec())
            .zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(Vec3) -> f64) -> f64 {
        let mut acc = NeumaierSum::default();
        for (n, w) in self.iter() {
            acc.add(w * f(n));
        }
        acc.value()
    }

    pub fn integrate_vec(&self, f: impl Fn(Vec3) -> Vec3) -> Vec3 {
        let mut acc = [NeumaierSum::default(); 3];
        for (n, w) in self.iter() {
            let v = f(n);
            acc[0].add(w * v.x);
            acc[1].add(w * v.y);
            acc[2].add(w * v.z);
        }
        Vec3::new(acc[0].value(), acc[1].value(), acc[2].value())
    }

    pub(crate) fn require_degree(&self, degree: usize) -> Result<()> {
        if self.exact_degree < degree {
            return Err(Error::validation(format!(
                "quadrature exact to degree {} but the integrand has degree {degree}",
                self.exact_degree
            )));
        }
        Ok(())
    }
}

/// Builds a rule exact up to `exact_degree`.
///
/// Full: Gauss–Legendre in cos θ with ⌈(d+1)/2⌉ nodes times a uniform
/// azimuthal grid of d+1 points. Planar: uniform grid of d+1 points.
pub fn make_quadrature(geometry: Geometry, exact_degree: usize) -> Result<QuadratureRule> {
    let azimuthal = exact_degree + 1;
    let polar = match geometry {
        Geometry::Planar => 1,
        Geometry::Full => (exact_degree + 1).div_ceil(2),
    };
    let required = (azimuthal as u64).saturating_mul(polar as u64);
    if required > MAX_QUADRATURE_NODES {
        return Err(Error::Resource {
            what: "quadrature nodes",
            required,
            allowed: MAX_QUADRATURE_NODES,
        });
    }

    let mut nodes = Vec::with_capacity(required as usize);
    let mut weights = Vec::with_capacity(required as usize);
    let phi_weight = 1.0 / azimuthal as f64;
    match geometry {
        Geometry::Planar => {
            for j in 0..azimuthal {
                let phi = TAU * j as f64 / azimuthal as f64;
                nodes.push(planar_node(phi));
                weights.push(phi_weight);
            }
        }
        Geometry::Full => {
            for (t, w) in gauss_legendre(polar) {
                let s = (1.0 - t * t).max(0.0).sqrt();
                for j in 0..azimuthal {
                    let phi = TAU * j as f64 / azimuthal as f64;
                    let v = Vec3::new(s * phi.cos(), s * phi.sin(), t);
                    nodes.push(BlochVector::normalize(v).expect("unit node"));
                    weights.push(0.5 * w * phi_weight);
                }
            }
        }
    }
    Ok(QuadratureRule {
        geometry,
        nodes,
        weights,
        exact_degree,
    })
}

fn planar_node(phi: f64) -> BlochVector {
    BlochVector::normalize(Vec3::new(phi.cos(), phi.sin(), 0.0)).expect("unit node")
}

/// Gauss–Legendre nodes and weights on [-1, 1] (weights sum to 2).
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let m = order;
    let mut out = vec![(0.0, 0.0); m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[m - 1 - i] = (x, w);
    }
    if m % 2 == 1 {
        // The middle root is exactly zero.
        out[m / 2].0 = 0.0;
    }
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for g in [Geometry::Planar, Geometry::Full] {
            for d in [0, 1, 2, 5, 13, 60] {
                let q = make_quadrature(g, d).unwrap();
                let s: f64 = q.weights().iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "{g} {d}: {s}");
            }
        }
    }

    #[test]
    fn second_and_fourth_moments() {
        let q = make_quadrature(Geometry::Full, 2).unwrap();
        assert!((q.integrate(|n| n.z * n.z) - 1.0 / 3.0).abs() < 1e-12);
        let q = make_quadrature(Geometry::Planar, 2).unwrap();
        assert!((q.integrate(|n| n.x * n.x) - 0.5).abs() < 1e-12);
        let q = make_quadrature(Geometry::Full, 4).unwrap();
        assert!((q.integrate(|n| n.z.powi(4)) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn node_counts_scale() {
        assert_eq!(make_quadrature(Geometry::Planar, 9).unwrap().len(), 10);
        assert_eq!(make_quadrature(Geometry::Full, 9).unwrap().len(), 5 * 10);
    }

    #[test]
    fn planar_nodes_stay_in_plane() {
        let q = make_quadrature(Geometry::Planar, 7).unwrap();
        assert!(q.nodes().iter().all(|n| Geometry::Planar.contains(n)));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(6);
        // exact up to degree 11
        for k in 0..=11 {
            let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(k)).sum();
            let want = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            assert!((got - want).abs() < 1e-14, "degree {k}");
        }
    }

    #[test]
    fn oversized_rule_is_resource_error() {
        assert!(matches!(
            make_quadrature(Geometry::Full, 10_000),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn insufficient_degree_rejected() {
        let q = make_quadrature(Geometry::Full, 3).unwrap();
        assert!(q.require_degree(3).is_ok());
        assert!(q.require_degree(4).is_err());
    }
}
