//! Exact Euclidean distance from every cell centre to the nearest occupied
//! cell centre (two-pass lower-envelope transform).

use crate::sim::OccupancyGrid;

/// Per-cell obstacle clearance in meters. Occupied cells have clearance 0;
/// a grid with no obstacles has infinite clearance everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearanceMap {
    width: usize,
    height: usize,
    resolution: f64,
    meters: Vec<f64>,
}

impl ClearanceMap {
    pub fn compute(grid: &OccupancyGrid) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let mut sq = vec![0.0f64; w * h];
        for (dst, &occ) in sq.iter_mut().zip(grid.cells()) {
            *dst = if occ { 0.0 } else { f64::INFINITY };
        }
        let mut line = vec![0.0; w.max(h)];
        let mut out = vec![0.0; w.max(h)];
        let mut scratch = Envelope::new(w.max(h));
        // Columns first, then rows.
        for i in 0..w {
            for j in 0..h {
                line[j] = sq[j * w + i];
            }
            scratch.transform(&line[..h], &mut out[..h]);
            for j in 0..h {
                sq[j * w + i] = out[j];
            }
        }
        for j in 0..h {
            line[..w].copy_from_slice(&sq[j * w..(j + 1) * w]);
            scratch.transform(&line[..w], &mut out[..w]);
            sq[j * w..(j + 1) * w].copy_from_slice(&out[..w]);
        }
        let res = grid.resolution();
        let meters = sq.into_iter().map(|d2| d2.sqrt() * res).collect();
        Self {
            width: w,
            height: h,
            resolution: res,
            meters,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.meters[j * self.width + i]
    }

    #[inline]
    pub fn at_index(&self, idx: usize) -> f64 {
        self.meters[idx]
    }

    /// Clearance with cells outside the grid reported as 0.
    #[inline]
    pub fn at_or_zero(&self, i: i64, j: i64) -> f64 {
        if i < 0 || j < 0 || i >= self.width as i64 || j >= self.height as i64 {
            0.0
        } else {
            self.meters[j as usize * self.width + i as usize]
        }
    }
}

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self {
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }

    /// 1D squared distance transform of sampled function `f`.
    fn transform(&mut self, f: &[f64], d: &mut [f64]) {
        let n = f.len();
        let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
        if finite.is_empty() {
            d.iter_mut().for_each(|x| *x = f64::INFINITY);
            return;
        }
        let mut k = 0usize;
        self.v[0] = finite[0];
        self.z[0] = f64::NEG_INFINITY;
        self.z[1] = f64::INFINITY;
        for &q in &finite[1..] {
            // z[0] is -inf, so this always terminates with k >= 0.
            let s = loop {
                let p = self.v[k];
                let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= self.z[k] {
                    k -= 1;
                } else {
                    break s;
                }
            };
            k += 1;
            self.v[k] = q;
            self.z[k] = s;
            self.z[k + 1] = f64::INFINITY;
        }
        let mut k = 0usize;
        for (q, out) in d.iter_mut().enumerate() {
            while self.z[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.v[k];
            let dq = q as f64 - p as f64;
            *out = dq * dq + f[p];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(grid: &OccupancyGrid, i: usize, j: usize) -> f64 {
        let c = grid.cell_center(i, j);
        let mut best = f64::INFINITY;
        for jj in 0..grid.height() {
            for ii in 0..grid.width() {
                if grid.occupied(ii, jj) {
                    let o = grid.cell_center(ii, jj);
                    best = best.min((o[0] - c[0]).hypot(o[1] - c[1]));
                }
            }
        }
        best
    }

    #[test]
    fn empty_grid_is_infinite() {
        let g = OccupancyGrid::new(5, 4, 0.1).unwrap();
        let c = ClearanceMap::compute(&g);
        assert!(c.at(2, 2).is_infinite());
    }

    proptest! {
        #[test]
        fn matches_brute_force(w in 1usize..14, h in 1usize..14, seed in any::<u64>()) {
            let mut cells = Vec::with_capacity(w * h);
            let mut s = seed | 1;
            for _ in 0..w * h {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                cells.push(s % 5 == 0);
            }
            let g = OccupancyGrid::from_cells(w, h, 0.05, cells).unwrap();
            let c = ClearanceMap::compute(&g);
            for j in 0..h {
                for i in 0..w {
                    let b = brute(&g, i, j);
                    let got = c.at(i, j);
                    if b.is_infinite() {
                        prop_assert!(got.is_infinite());
                    } else {
                        prop_assert!((got - b).abs() < 1e-9, "({i},{j}) {got} vs {b}");
                    }
                }
            }
        }
    }
}
