use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Geometry of the line the points live on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Circle of circumference `length`; positions in `[0, length)`.
    Torus { length: f64 },
    /// Left-bounded configuration, truncated on the right.
    HalfLine,
    /// Finite window `[a, b]`; both boundary domains are infinite.
    Window { a: f64, b: f64 },
}

/// Finite ordered set of domain-separation points.
///
/// On a half-line the simulated configuration is a right-truncation of an infinite
/// one. `frontier` is the position below which points and gaps coincide with the
/// untruncated dynamics; see [`Configuration::trusted_gaps`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    points: Vec<f64>,
    topology: Topology,
    frontier: Option<f64>,
}

fn slack(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

impl Configuration {
    /// Unchecked apart from ordering; use [`Configuration::validate`] for gap bounds.
    pub fn new(points: Vec<f64>, topology: Topology) -> Result<Self> {
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::Configuration("positions must be finite".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Configuration("positions must be strictly increasing".into()));
        }
        match topology {
            Topology::Torus { length } => {
                if !(length > 0.0 && length.is_finite()) {
                    return Err(Error::Configuration(format!("torus length must be positive, got {length}")));
                }
                if points.first().is_some_and(|&x| x < 0.0) || points.last().is_some_and(|&x| x >= length) {
                    return Err(Error::Configuration("torus positions must lie in [0, length)".into()));
                }
            }
            Topology::HalfLine => {
                if points.is_empty() {
                    return Err(Error::Configuration("a half-line configuration needs a first point".into()));
                }
            }
            Topology::Window { a, b } => {
                if !(a < b) {
                    return Err(Error::Configuration(format!("window [{a}, {b}] is empty")));
                }
                if points.first().is_some_and(|&x| x < a) || points.last().is_some_and(|&x| x > b) {
                    return Err(Error::Configuration("points must lie inside the window".into()));
                }
            }
        }
        let frontier = match topology {
            Topology::HalfLine => points.last().copied(),
            _ => None,
        };
        Ok(Self { points, topology, frontier })
    }

    /// Half-line configuration with the given points and an explicit frontier.
    pub fn with_frontier(mut self, frontier: Option<f64>) -> Self {
        self.frontier = frontier;
        self
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Position of the frontier (half-line only). Points strictly left of it agree
    /// with the untruncated process.
    pub fn frontier(&self) -> Option<f64> {
        self.frontier
    }

    /// Number of points strictly left of the frontier; all points when no frontier is set.
    pub fn frontier_index(&self) -> usize {
        match self.frontier {
            Some(c) => self.points.partition_point(|&x| x < c),
            None => self.points.len(),
        }
    }

    /// Finite domain lengths, left to right. On a torus with at least one point the
    /// wrap-around domain comes last.
    pub fn gaps(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.points.windows(2).map(|w| w[1] - w[0]).collect();
        if let Topology::Torus { length } = self.topology {
            if let (Some(&first), Some(&last)) = (self.points.first(), self.points.last()) {
                g.push(first + length - last);
            }
        }
        g
    }

    /// Gaps whose law is exact: on a half-line only those with right endpoint left of
    /// the frontier, elsewhere every gap.
    pub fn trusted_gaps(&self) -> Vec<f64> {
        let mut g = self.gaps();
        if self.topology == Topology::HalfLine {
            // gap i has right endpoint points[i+1]
            let k = self.frontier_index();
            g.truncate(k.saturating_sub(1));
        }
        g
    }

    /// First point, if it is trusted.
    pub fn leftmost(&self) -> Option<f64> {
        let x = *self.points.first()?;
        match self.frontier {
            Some(c) if x >= c => None,
            _ => Some(x),
        }
    }

    /// Checks membership in the space of configurations with no domain shorter than `d_min`.
    pub fn validate(&self, d_min: f64) -> Result<()> {
        for (i, g) in self.gaps().into_iter().enumerate() {
            if g < d_min - slack(d_min) {
                return Err(Error::Configuration(format!("domain {i} has length {g} < d_min = {d_min}")));
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts(points: Vec<f64>, topology: Topology, frontier: Option<f64>) -> Self {
        Self { points, topology, frontier }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_and_validation() {
        let c = Configuration::new(vec![0.0, 1.0, 3.5, 5.0], Topology::HalfLine).unwrap();
        assert_eq!(c.gaps(), vec![1.0, 2.5, 1.5]);
        assert!(c.validate(1.0).is_ok());
        assert!(c.validate(1.6).is_err());
        assert_eq!(c.frontier(), Some(5.0));
        assert_eq!(c.trusted_gaps(), vec![1.0, 2.5]);
    }

    #[test]
    fn torus_wrap_gap() {
        let c = Configuration::new(vec![0.0, 1.0, 2.0], Topology::Torus { length: 3.0 }).unwrap();
        assert_eq!(c.gaps(), vec![1.0, 1.0, 1.0]);
        let c = Configuration::new(vec![0.5, 1.0], Topology::Torus { length: 3.0 }).unwrap();
        assert!(c.validate(1.0).is_err());
        assert!(Configuration::new(vec![0.0, 3.0], Topology::Torus { length: 3.0 }).is_err());
        assert!(Configuration::new(vec![], Topology::Torus { length: 3.0 }).unwrap().gaps().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Configuration::new(vec![1.0, 1.0], Topology::HalfLine).is_err());
        assert!(Configuration::new(vec![], Topology::HalfLine).is_err());
        assert!(Configuration::new(vec![-2.0], Topology::Window { a: -1.0, b: 1.0 }).is_err());
    }

    #[test]
    fn frontier_restricts_leftmost() {
        let c = Configuration::new(vec![0.0, 2.0], Topology::HalfLine).unwrap().with_frontier(Some(f64::NEG_INFINITY));
        assert_eq!(c.leftmost(), None);
        assert_eq!(c.frontier_index(), 0);
        assert!(c.trusted_gaps().is_empty());
    }
}
