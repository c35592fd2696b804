//! Closed-form moments of the uniform measure.
//!
//! This is an oracle for the quadrature path and shares no code with it:
//! the order-2p moment tensor of the normalized measure on the unit sphere
//! in d dimensions is the sum of Kronecker-delta products over all perfect
//! pairings of its indices, divided by d(d+2)...(d+2p-2).

use crate::error::{Error, Result};
use crate::geometry::{BlochVector, Geometry, Vec3};

/// Largest number of directions the oracle accepts; the pairing count grows
/// as a double factorial.
pub const MAX_ORACLE_DIRECTIONS: usize = 10;

/// Exact value of `∫ dn n ∏_j (n·a_j)` for the normalized uniform measure.
///
/// Under planar geometry each `a_j` enters through its in-plane projection.
pub fn moment_oracle(geometry: Geometry, directions: &[BlochVector]) -> Result<Vec3> {
    let k = directions.len();
    if k > MAX_ORACLE_DIRECTIONS {
        return Err(Error::Resource {
            what: "moment oracle directions",
            required: k as u64,
            allowed: MAX_ORACLE_DIRECTIONS as u64,
        });
    }
    if k.is_multiple_of(2) {
        return Ok(Vec3::ZERO);
    }
    let a: Vec<Vec3> = directions
        .iter()
        .map(|d| geometry.project(d.vec()))
        .collect();
    let order = k + 1;
    let d = geometry.dimension() as f64;
    let denom: f64 = (0..order / 2).map(|j| d + 2.0 * j as f64).product();

    // The free index pairs with one a_j; the rest pair among themselves.
    let mut out = Vec3::ZERO;
    for j in 0..k {
        let rest: Vec<Vec3> = a
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, v)| *v)
            .collect();
        out += pairing_sum(&rest) * a[j];
    }
    Ok((1.0 / denom) * geometry.project(out))
}

/// Sum over perfect pairings of the product of pairwise dot products.
fn pairing_sum(v: &[Vec3]) -> f64 {
    match v.len() {
        0 => 1.0,
        n if n % 2 == 1 => 0.0,
        _ => {
            let first = v[0];
            (1..v.len())
                .map(|j| {
                    let rest: Vec<Vec3> = v[1..]
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i + 1 != j)
                        .map(|(_, x)| *x)
                        .collect();
                    first.dot(v[j]) * pairing_sum(&rest)
                })
                .sum()
        }
    }
}
