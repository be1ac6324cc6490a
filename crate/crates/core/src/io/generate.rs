use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::{ContinuousType, DemandPoint, DiscreteType, Instance};

/// A discrete type whose candidate sites are the demand points themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpec {
    pub radius: f64,
    pub count: usize,
}

/// Recipe for a random instance: `n` unit-weight points drawn uniformly from
/// the box `[lo, hi]` by a PCG-64 generator seeded with `seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub n: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub discrete: Vec<DiscreteSpec>,
    pub continuous: Vec<ContinuousType>,
}

impl GeneratorSpec {
    /// Points in the unit square.
    pub fn unit_square(seed: u64, n: usize) -> Self {
        GeneratorSpec { seed, n, lo: vec![0.0, 0.0], hi: vec![1.0, 1.0], discrete: Vec::new(), continuous: Vec::new() }
    }

    pub fn with_discrete(mut self, radius: f64, count: usize) -> Self {
        self.discrete.push(DiscreteSpec { radius, count });
        self
    }

    pub fn with_continuous(mut self, ty: ContinuousType) -> Self {
        self.continuous.push(ty);
        self
    }
}

/// Uniform draw in [0, 1) from the top 53 bits of one generator output.
fn unit(rng: &mut Pcg64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Builds the instance; coordinates are drawn point by point, axis by axis.
pub fn generate_instance(spec: &GeneratorSpec) -> Result<Instance> {
    if spec.n == 0 {
        return Err(Error::input("need at least one demand point"));
    }
    if spec.lo.is_empty() || spec.lo.len() != spec.hi.len() {
        return Err(Error::input("box corners must have the same nonzero dimension"));
    }
    if spec.lo.iter().zip(&spec.hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
        return Err(Error::input("box must satisfy lo <= hi with finite corners"));
    }
    let dim = spec.lo.len();
    let mut rng = Pcg64::seed_from_u64(spec.seed);
    let demand: Vec<DemandPoint> = (0..spec.n)
        .map(|_| {
            let coords = (0..dim).map(|a| spec.lo[a] + (spec.hi[a] - spec.lo[a]) * unit(&mut rng)).collect();
            DemandPoint { point: Point::new(coords), weight: 1.0 }
        })
        .collect();
    let sites: Vec<Point> = demand.iter().map(|d| d.point.clone()).collect();
    let discrete =
        spec.discrete.iter().map(|d| DiscreteType::new(sites.clone(), vec![d.radius; sites.len()], d.count)).collect();
    Instance::new(dim, demand, discrete, spec.continuous.clone())
}
