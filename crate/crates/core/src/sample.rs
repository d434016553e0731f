//! Deterministic sample points: product grids and Halton sequences.

/// Default points per coordinate for validation grids.
pub const DEFAULT_GRID: usize = 17;
/// Cap on the total number of grid points; higher dimensions get coarser grids.
pub const POINT_BUDGET: usize = 50_000;

/// Points per axis actually used for a requested `k` in dimension `n`.
pub fn effective_points_per_axis(k: usize, n: usize, budget: usize) -> usize {
    let mut k = k.max(1);
    while k > 2 && k.checked_pow(n as u32).is_none_or(|total| total > budget) {
        k -= 1;
    }
    k
}

/// Periodic product grid: `k` equally spaced nodes on `[0, period)` per axis.
#[derive(Debug, Clone)]
pub struct Grid {
    pub periods: Vec<f64>,
    pub k: usize,
}

impl Grid {
    pub fn new(periods: &[f64], k: usize) -> Grid {
        Grid {
            periods: periods.to_vec(),
            k: k.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.k.pow(self.periods.len() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.periods.len()];
        for (a, x) in p.iter_mut().enumerate() {
            let j = index % self.k;
            index /= self.k;
            *x = self.periods[a] * j as f64 / self.k as f64;
        }
        p
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Grid points and `t` samples used by sweeps.
#[derive(Debug, Clone)]
pub struct Sampling {
    /// Points per axis actually used.
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub ts: Vec<f64>,
}

impl Sampling {
    /// Product grid with `k` requested points per axis (shrunk to the point
    /// budget) and `t_samples` equally spaced parameters in `[0, 1]`.
    pub fn new(periods: &[f64], k: usize, t_samples: usize) -> Sampling {
        let k = effective_points_per_axis(k, periods.len(), POINT_BUDGET);
        Sampling {
            k,
            points: Grid::new(periods, k).points().collect(),
            ts: uniform_ts(t_samples),
        }
    }

    pub fn with_points(points: Vec<Vec<f64>>, ts: Vec<f64>) -> Sampling {
        Sampling { k: 0, points, ts }
    }

    pub fn point_refs(&self) -> impl Iterator<Item = &[f64]> + Clone {
        self.points.iter().map(|p| p.as_slice())
    }
}

/// `m` equally spaced values on `[0, 1]` (just `0` when `m <= 1`).
pub fn uniform_ts(m: usize) -> Vec<f64> {
    if m <= 1 {
        return vec![0.0];
    }
    (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
}

const PRIMES: [u32; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: usize, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= b;
        r += f * (index % base as usize) as f64;
        index /= base as usize;
    }
    r
}

/// `count` quasi-random points in the fundamental domain, skipping the origin.
pub fn halton_points(periods: &[f64], count: usize) -> Vec<Vec<f64>> {
    (1..=count)
        .map(|i| {
            periods
                .iter()
                .enumerate()
                .map(|(a, p)| p * halton(i + 17, PRIMES[a % PRIMES.len()]))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_shrinks_grids() {
        assert_eq!(effective_points_per_axis(17, 4, POINT_BUDGET), 14);
        assert_eq!(effective_points_per_axis(17, 5, POINT_BUDGET), 8);
        assert_eq!(effective_points_per_axis(17, 6, POINT_BUDGET), 6);
    }

    #[test]
    fn grid_enumerates_nodes() {
        let g = Grid::new(&[1.0, 2.0], 4);
        let pts: Vec<_> = g.points().collect();
        assert_eq!(pts.len(), 16);
        assert_eq!(pts[5], vec![0.25, 0.5]);
    }

    #[test]
    fn halton_base_two() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }
}
