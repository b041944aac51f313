use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::choice::{ChoiceSource, Distribution, RandomizedProgram};
use crate::error::{Error, Result};

/// Lower bound applied to an insertion cost increase before it is raised to
/// `-1/τ`.
pub const DELTA_FLOOR: f64 = 1e-12;

/// Points in the plane with their Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    points: Vec<(f64, f64)>,
    dist: Vec<f64>,
}

impl TspInstance {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(Error::DegenerateInstance(n));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidProgram("coordinates must be finite"));
        }
        let mut dist = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = libm::hypot(points[i].0 - points[j].0, points[i].1 - points[j].1);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(Self { points, dist })
    }

    /// `n` points drawn uniformly from the unit square.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let points = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.len() + b]
    }
}

/// A closed tour. Equality and ordering look only at `order`, which is kept
/// in the canonical form produced by [`canonical_tour`].
#[derive(Debug, Clone)]
pub struct Tour {
    pub order: Vec<usize>,
    pub cost: f64,
}

impl Tour {
    /// Validates and canonicalizes `order`, computing its cost.
    pub fn new(instance: &TspInstance, order: Vec<usize>) -> Result<Self> {
        let cost = tour_cost(instance, &order)?;
        Ok(Self {
            order: canonical_tour(&order),
            cost,
        })
    }
}

impl PartialEq for Tour {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}

impl Eq for Tour {}

impl PartialOrd for Tour {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tour {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order.cmp(&other.order)
    }
}

/// Length of the closed cycle visiting `order`.
pub fn tour_cost(instance: &TspInstance, order: &[usize]) -> Result<f64> {
    let n = instance.len();
    if order.len() != n {
        return Err(Error::InvalidTour("tour must visit every node"));
    }
    let mut seen = alloc::vec![false; n];
    for &v in order {
        if v >= n || core::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidTour(
                "tour must be a permutation of the nodes",
            ));
        }
    }
    Ok((0..n)
        .map(|i| instance.distance(order[i], order[(i + 1) % n]))
        .sum())
}

/// Rotates the cycle to start at its smallest node and picks the direction
/// whose second node is smaller than its last, so each undirected cycle has
/// exactly one representation.
pub fn canonical_tour(order: &[usize]) -> Vec<usize> {
    let Some(start) = order
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(i, _)| i)
    else {
        return Vec::new();
    };
    let mut out: Vec<usize> = order[start..]
        .iter()
        .chain(&order[..start])
        .copied()
        .collect();
    if out.len() > 2 && out[1] > out[out.len() - 1] {
        out[1..].reverse();
    }
    out
}

/// Temperature used for `n` nodes when none is configured.
pub fn default_temperature(n: usize) -> f64 {
    if n <= 20 {
        0.3
    } else if n <= 50 {
        0.2
    } else {
        0.15
    }
}

/// Farthest insertion relaxed by temperature `τ`.
///
/// The cycle starts from the mutually farthest pair plus the node farthest
/// from both. The node farthest from the cycle is inserted next, at position
/// `i` with probability proportional to `Δ(i)^(-1/τ)`. `τ = 0` takes the
/// cheapest position without consulting `choice`; `τ = ∞` picks uniformly.
/// Ties go to the lowest node index and the earliest position.
pub fn farthest_insertion(
    instance: &TspInstance,
    temperature: f64,
    choice: &mut dyn ChoiceSource,
) -> Result<Tour> {
    if temperature.is_nan() || temperature < 0.0 {
        return Err(Error::InvalidProgram("temperature must be non-negative"));
    }
    let n = instance.len();
    let d = |a: usize, b: usize| instance.distance(a, b);

    let (mut a, mut b) = (0, 1);
    for i in 0..n {
        for j in (i + 1)..n {
            if d(i, j) > d(a, b) {
                (a, b) = (i, j);
            }
        }
    }
    let mut in_cycle = alloc::vec![false; n];
    in_cycle[a] = true;
    in_cycle[b] = true;
    // Distance from each node to the nearest cycle node.
    let mut gap: Vec<f64> = (0..n).map(|v| d(v, a).min(d(v, b))).collect();
    let farthest = |gap: &[f64], in_cycle: &[bool]| {
        let mut best: Option<usize> = None;
        for v in (0..n).filter(|&v| !in_cycle[v]) {
            if best.is_none_or(|w| gap[v] > gap[w]) {
                best = Some(v);
            }
        }
        best
    };
    let c = farthest(&gap, &in_cycle).expect("n >= 3");
    let mut cycle = alloc::vec![a, b, c];
    in_cycle[c] = true;
    for (v, g) in gap.iter_mut().enumerate() {
        *g = g.min(d(v, c));
    }

    while let Some(x) = farthest(&gap, &in_cycle) {
        let m = cycle.len();
        let deltas: Vec<f64> = (0..m)
            .map(|i| {
                let (p, q) = (cycle[i], cycle[(i + 1) % m]);
                (d(p, x) + d(x, q) - d(p, q)).max(DELTA_FLOOR)
            })
            .collect();
        let position = if temperature == 0.0 {
            let mut best = 0;
            for (i, &delta) in deltas.iter().enumerate() {
                if delta < deltas[best] {
                    best = i;
                }
            }
            best
        } else if temperature.is_infinite() {
            choice.choose_lazy(&mut || Distribution::uniform(m).expect("cycle is non-empty"))?
        } else {
            choice.choose_lazy(&mut || {
                let logs: Vec<f64> = deltas
                    .iter()
                    .map(|&delta| -libm::log(delta) / temperature)
                    .collect();
                Distribution::from_log_weights(&logs).expect("log weights are finite")
            })?
        };
        cycle.insert(position + 1, x);
        in_cycle[x] = true;
        for (v, g) in gap.iter_mut().enumerate() {
            *g = g.min(d(v, x));
        }
    }
    Tour::new(instance, cycle)
}

/// The classical heuristic: always insert at the cheapest position.
pub fn greedy_farthest_insertion(instance: &TspInstance) -> Tour {
    struct NoChoice;
    impl ChoiceSource for NoChoice {
        fn choose_from(&mut self, _: Option<&Distribution>) -> Result<usize> {
            unreachable!("greedy insertion makes no random choices")
        }
    }
    farthest_insertion(instance, 0.0, &mut NoChoice).expect("greedy insertion cannot fail")
}

/// [`farthest_insertion`] packaged as a randomized program.
#[derive(Debug, Clone, PartialEq)]
pub struct FarthestInsertion {
    pub instance: TspInstance,
    pub temperature: f64,
}

impl FarthestInsertion {
    pub fn new(instance: TspInstance, temperature: f64) -> Self {
        Self {
            instance,
            temperature,
        }
    }
}

impl RandomizedProgram for FarthestInsertion {
    type Output = Tour;

    fn run(&self, c: &mut dyn ChoiceSource) -> Result<Tour> {
        farthest_insertion(&self.instance, self.temperature, c)
    }
}
