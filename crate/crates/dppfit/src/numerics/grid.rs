//! Uniform cell index for range-limited pair queries.
//!
//! Pair sums in the estimating equations only involve points closer than a
//! support radius; bucketing points into cells of that size turns the
//! quadratic scan into a neighbourhood walk.

use super::window::{dist, Point, Window};

pub struct CellGrid {
    cells: Vec<Vec<u32>>,
    nx: usize,
    ny: usize,
}

impl CellGrid {
    pub fn build(points: &[Point], window: &Window, radius: f64) -> CellGrid {
        let radius = radius.max(1e-12);
        // cell size >= radius by construction, so close pairs live in
        // adjacent cells
        let nx = (window.width() / radius).floor().max(1.0) as usize;
        let ny = (window.height() / radius).floor().max(1.0) as usize;
        let mut grid = CellGrid {
            cells: vec![Vec::new(); nx * ny],
            nx,
            ny,
        };
        let cx = window.width() / nx as f64;
        let cy = window.height() / ny as f64;
        let clamp = |v: f64, n: usize| -> usize { (v.max(0.0) as usize).min(n - 1) };
        for (idx, p) in points.iter().enumerate() {
            let i = clamp((p[0] - window.x0) / cx, nx);
            let j = clamp((p[1] - window.y0) / cy, ny);
            grid.cells[j * nx + i].push(idx as u32);
        }
        grid
    }

    /// Visit unordered pairs {i, j}, i < j, with `|p_i - p_j| <= radius`.
    pub fn for_each_close_pair(
        &self,
        points: &[Point],
        radius: f64,
        mut visit: impl FnMut(usize, usize, f64),
    ) {
        for cj in 0..self.ny {
            for ci in 0..self.nx {
                let home = &self.cells[cj * self.nx + ci];
                // pairs within the home cell
                for a in 0..home.len() {
                    for b in a + 1..home.len() {
                        let (i, j) = (home[a] as usize, home[b] as usize);
                        let d = dist(points[i], points[j]);
                        if d <= radius {
                            visit(i, j, d);
                        }
                    }
                }
                // forward half of the neighbourhood, so each cell pair is
                // visited exactly once
                for (di, dj) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
                    let ni = ci as isize + di;
                    let nj = cj as isize + dj;
                    if ni < 0 || nj < 0 || ni >= self.nx as isize || nj >= self.ny as isize {
                        continue;
                    }
                    let other = &self.cells[nj as usize * self.nx + ni as usize];
                    for &ia in home {
                        for &ib in other {
                            let (i, j) = (ia as usize, ib as usize);
                            let d = dist(points[i], points[j]);
                            if d <= radius {
                                visit(i.min(j), i.max(j), d);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Collect all unordered close pairs as `(i, j, distance)`.
pub fn close_pairs(points: &[Point], window: &Window, radius: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    if points.len() < 2 {
        return out;
    }
    // for windows barely larger than the radius a direct scan is cheaper
    if window.width() <= 3.0 * radius || window.height() <= 3.0 * radius {
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = dist(points[i], points[j]);
                if d <= radius {
                    out.push((i, j, d));
                }
            }
        }
        return out;
    }
    let grid = CellGrid::build(points, window, radius);
    grid.for_each_close_pair(points, radius, |i, j, d| out.push((i, j, d)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn agrees_with_quadratic_scan() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let w = Window::unit();
        let points: Vec<Point> = (0..400)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        for radius in [0.01, 0.05, 0.13] {
            let mut brute: Vec<(usize, usize)> = Vec::new();
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    if dist(points[i], points[j]) <= radius {
                        brute.push((i, j));
                    }
                }
            }
            let mut fast: Vec<(usize, usize)> = close_pairs(&points, &w, radius)
                .into_iter()
                .map(|(i, j, _)| (i, j))
                .collect();
            brute.sort_unstable();
            fast.sort_unstable();
            assert_eq!(brute, fast, "radius {radius}");
        }
    }

    #[test]
    fn empty_and_singleton() {
        let w = Window::unit();
        assert!(close_pairs(&[], &w, 0.1).is_empty());
        assert!(close_pairs(&[[0.5, 0.5]], &w, 0.1).is_empty());
    }
}
