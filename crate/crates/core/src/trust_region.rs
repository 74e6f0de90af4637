//! A single trust region in the unit cube that grows after repeated
//! improvements and shrinks after repeated failures.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sobol::SobolGenerator;
use crate::space::Bounds;

#[derive(Clone, Debug, PartialEq)]
pub struct TrustRegion {
    pub center: Vec<f64>,
    /// Base edge length; doubled and halved by [`TrustRegion::update`].
    pub length: f64,
    /// Per-axis multipliers with geometric mean 1.
    pub weights: Vec<f64>,
    pub success_count: usize,
    pub failure_count: usize,
    pub success_threshold: usize,
    pub failure_threshold: usize,
    pub initial_side: f64,
    pub min_side: f64,
    pub max_side: f64,
}

impl TrustRegion {
    pub const INITIAL_SIDE: f64 = 0.8;
    pub const MIN_SIDE: f64 = 1.0 / 128.0;
    pub const MAX_SIDE: f64 = 1.6;
    pub const SUCCESS_THRESHOLD: usize = 3;

    /// Default region for a `dim`-dimensional problem centred at `center`.
    pub fn new(center: Vec<f64>) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::InvalidArgument("trust region needs at least one dimension"));
        }
        if center.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("trust-region centre outside the unit cube"));
        }
        Ok(Self {
            center,
            length: Self::INITIAL_SIDE,
            weights: alloc::vec![1.0; d],
            success_count: 0,
            failure_count: 0,
            success_threshold: Self::SUCCESS_THRESHOLD,
            failure_threshold: 4.max(d.div_ceil(10)),
            initial_side: Self::INITIAL_SIDE,
            min_side: Self::MIN_SIDE,
            max_side: Self::MAX_SIDE,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Stretches the region along axes with long lengthscales. The weights
    /// are normalized to geometric mean 1; a single shared lengthscale gives
    /// a cube.
    pub fn set_shape(&mut self, lengthscales: &[f64]) {
        let d = self.dim();
        if lengthscales.len() != d || lengthscales.iter().any(|l| !(*l > 0.0)) {
            self.weights = alloc::vec![1.0; d];
            return;
        }
        let log_mean = lengthscales.iter().map(|l| crate::math::log(*l)).sum::<f64>() / d as f64;
        let gm = crate::math::exp(log_mean);
        self.weights = lengthscales.iter().map(|l| l / gm).collect();
    }

    /// Edge length along each axis, within `[min_side, max_side]`.
    pub fn side_lengths(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| (self.length * w).clamp(self.min_side, self.max_side))
            .collect()
    }

    /// The region intersected with the unit cube.
    pub fn bounds(&self) -> Bounds {
        let sides = self.side_lengths();
        let lo: Vec<f64> = self.center.iter().zip(&sides).map(|(c, s)| (c - s / 2.0).max(0.0)).collect();
        let hi: Vec<f64> = self.center.iter().zip(&sides).map(|(c, s)| (c + s / 2.0).min(1.0)).collect();
        Bounds::new(lo, hi).expect("a trust region always has positive extent")
    }

    /// `n` Sobol points mapped affinely into [`bounds`](Self::bounds).
    pub fn propose(&self, gen: &mut SobolGenerator, n: usize) -> Result<Vec<Vec<f64>>> {
        if gen.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: gen.dim(),
            });
        }
        let b = self.bounds();
        Ok(gen
            .next_points(n)
            .into_iter()
            .map(|u| {
                u.iter()
                    .zip(b.lower())
                    .zip(b.upper())
                    .map(|((u, lo), hi)| (lo + u * (hi - lo)).clamp(*lo, *hi))
                    .collect()
            })
            .collect())
    }

    /// Records one round. `best_point` is the point that achieved
    /// `batch_best`; the centre moves there on improvement.
    pub fn update(&mut self, batch_best: f64, incumbent: f64, best_point: &[f64]) {
        if batch_best > incumbent {
            self.success_count += 1;
            self.failure_count = 0;
            if best_point.len() == self.dim() {
                self.center = best_point.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            }
        } else {
            self.failure_count += 1;
            self.success_count = 0;
        }
        if self.success_count >= self.success_threshold {
            self.length = (2.0 * self.length).min(self.max_side);
            self.success_count = 0;
        } else if self.failure_count >= self.failure_threshold {
            self.length = (0.5 * self.length).max(self.min_side);
            self.failure_count = 0;
        }
    }

    /// True once the base length has shrunk to the floor.
    pub fn is_collapsed(&self) -> bool {
        self.length <= self.min_side
    }

    /// Resets size and counters and moves the centre.
    pub fn restart(&mut self, center: Vec<f64>) {
        self.center = center;
        self.length = self.initial_side;
        self.success_count = 0;
        self.failure_count = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn defaults() {
        let tr = TrustRegion::new(vec![0.5; 50]).unwrap();
        assert_eq!(tr.failure_threshold, 5);
        assert_eq!(TrustRegion::new(vec![0.5; 3]).unwrap().failure_threshold, 4);
        assert_eq!(tr.side_lengths(), vec![0.8; 50]);
    }

    #[test]
    fn unit_region_reproduces_sobol() {
        let mut tr = TrustRegion::new(vec![0.5; 3]).unwrap();
        tr.length = 1.0;
        let mut a = SobolGenerator::scrambled(3, 5).unwrap();
        let mut b = SobolGenerator::scrambled(3, 5).unwrap();
        assert_eq!(tr.propose(&mut a, 64).unwrap(), b.next_points(64));
    }

    #[test]
    fn tiny_region_contains_points() {
        let mut tr = TrustRegion::new(vec![0.3, 0.7, 0.2]).unwrap();
        tr.min_side = 1e-4;
        tr.length = 1e-3;
        let mut g = SobolGenerator::scrambled(3, 1).unwrap();
        for p in tr.propose(&mut g, 100).unwrap() {
            let dist: f64 = p.iter().zip(&tr.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(dist <= 1e-3 * 3f64.sqrt());
        }
    }

    #[test]
    fn boundary_region_is_clipped() {
        let tr = TrustRegion::new(vec![0.0, 1.0]).unwrap();
        let mut g = SobolGenerator::scrambled(2, 2).unwrap();
        for p in tr.propose(&mut g, 200).unwrap() {
            assert!(p[0] >= 0.0 && p[0] <= 0.4 && p[1] >= 0.6 && p[1] <= 1.0);
        }
    }

    #[test]
    fn doubling_and_halving() {
        let mut tr = TrustRegion::new(vec![0.5; 2]).unwrap();
        tr.length = 0.4;
        for i in 0..3 {
            tr.update(1.0 + i as f64, 0.5 + i as f64, &[0.6, 0.6]);
        }
        assert_eq!(tr.length, 0.8);
        assert_eq!(tr.center, vec![0.6, 0.6]);
        tr.length = 0.4;
        for _ in 0..tr.failure_threshold {
            tr.update(0.0, 1.0, &[0.1, 0.1]);
        }
        assert_eq!(tr.length, 0.2);
        assert_eq!(tr.center, vec![0.6, 0.6]);
    }

    #[test]
    fn floor_and_restart() {
        let mut tr = TrustRegion::new(vec![0.5; 2]).unwrap();
        tr.length = tr.min_side;
        for _ in 0..20 {
            tr.update(0.0, 1.0, &[0.0, 0.0]);
            assert_eq!(tr.length, tr.min_side);
        }
        assert!(tr.is_collapsed());
        tr.restart(vec![0.1, 0.9]);
        assert_eq!(tr.length, 0.8);
        assert!(!tr.is_collapsed());
    }

    #[test]
    fn shape_weights() {
        let mut tr = TrustRegion::new(vec![0.5; 2]).unwrap();
        tr.set_shape(&[0.1, 0.4]);
        let s = tr.side_lengths();
        assert!((s[0] - 0.4).abs() < 1e-12 && (s[1] - 1.6).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn sides_and_points_stay_valid(
                center in proptest::collection::vec(0.0f64..=1.0, 3),
                outcomes in proptest::collection::vec(any::<bool>(), 0..60),
                ls in proptest::collection::vec(0.01f64..5.0, 3),
            ) {
                let mut tr = TrustRegion::new(center).unwrap();
                tr.set_shape(&ls);
                let mut g = SobolGenerator::scrambled(3, 3).unwrap();
                for ok in outcomes {
                    tr.update(if ok { 1.0 } else { 0.0 }, 0.5, &[0.2, 0.9, 0.4]);
                    for s in tr.side_lengths() {
                        prop_assert!(s >= tr.min_side && s <= tr.max_side);
                    }
                    for p in tr.propose(&mut g, 8).unwrap() {
                        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
                    }
                }
            }
        }
    }
}
