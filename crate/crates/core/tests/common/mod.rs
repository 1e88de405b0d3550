//! Shared test support: dense linear-algebra oracles kept independent of
//! the solver implementations they check.
#![allow(dead_code)] // each test binary uses its own subset

use obstacle_diffusion::grid::Grid;

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        a.swap(col, piv);
        b.swap(col, piv);
        assert!(a[col][col] != 0.0, "singular oracle matrix");
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            if m == 0.0 {
                continue;
            }
            let (pivot_rows, rest) = a.split_at_mut(col + 1);
            let pivot = &pivot_rows[col];
            for (c, entry) in rest[r - col - 1].iter_mut().enumerate().skip(col) {
                *entry -= m * pivot[c];
            }
            b[r] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x
}

/// Dense interior Laplacian matrix A (3-point or 5-point, zero Dirichlet,
/// unscaled by h^2) in interior storage order.
pub fn dense_a(grid: &Grid) -> Vec<Vec<f64>> {
    let n = grid.interior_count();
    let mut a = vec![vec![0.0; n]; n];
    match grid {
        Grid::OneD(_) => {
            for j in 0..n {
                a[j][j] = 2.0;
                if j > 0 {
                    a[j][j - 1] = -1.0;
                }
                if j + 1 < n {
                    a[j][j + 1] = -1.0;
                }
            }
        }
        Grid::TwoD(g) => {
            let (mx, my) = (g.nx - 1, g.ny - 1);
            for iy in 0..my {
                for ix in 0..mx {
                    let p = iy * mx + ix;
                    a[p][p] = 4.0;
                    if ix > 0 {
                        a[p][p - 1] = -1.0;
                    }
                    if ix + 1 < mx {
                        a[p][p + 1] = -1.0;
                    }
                    if iy > 0 {
                        a[p][p - mx] = -1.0;
                    }
                    if iy + 1 < my {
                        a[p][p + mx] = -1.0;
                    }
                }
            }
        }
    }
    a
}

/// Dense row-scaled operator I + gamma * z * A.
pub fn dense_row_scaled(grid: &Grid, gamma: f64, z: &[f64]) -> Vec<Vec<f64>> {
    let a = dense_a(grid);
    let n = z.len();
    let mut m = vec![vec![0.0; n]; n];
    for r in 0..n {
        for c in 0..n {
            m[r][c] = gamma * z[r] * a[r][c];
        }
        m[r][r] += 1.0;
    }
    m
}

/// Dense column-scaled operator I + gamma * A * P for a 0/1 mask.
pub fn dense_col_scaled(grid: &Grid, gamma: f64, active: &[bool]) -> Vec<Vec<f64>> {
    let a = dense_a(grid);
    let n = active.len();
    let mut m = vec![vec![0.0; n]; n];
    for r in 0..n {
        for c in 0..n {
            if active[c] {
                m[r][c] = gamma * a[r][c];
            }
        }
        m[r][r] += 1.0;
    }
    m
}

pub fn apply_dense(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(m, v)| m * v).sum())
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Compare `pl_solve` against brute force over every active set on small
/// interiors: solve each masked dense system and keep the solution whose
/// sign pattern matches its own mask. Returns an error message on the
/// first mismatch.
pub fn exhaustive_pl_check(
    interior_sizes: std::ops::RangeInclusive<usize>,
    trials_per_size: usize,
    seed: u64,
) -> Result<(), String> {
    use obstacle_diffusion::grid::build_grid_1d;
    use obstacle_diffusion::reference::pl_solve;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for ni in interior_sizes {
        let g = build_grid_1d(-1.0, 1.0, ni + 1).map_err(|e| e.to_string())?;
        for trial in 0..trials_per_size {
            let gamma = rng.gen_range(0.2..5.0);
            let b: Vec<f64> = (0..ni).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut matches: Vec<Vec<f64>> = Vec::new();
            for bits in 0..(1usize << ni) {
                let active: Vec<bool> = (0..ni).map(|j| bits >> j & 1 == 1).collect();
                let x = dense_solve(dense_col_scaled(&g, gamma, &active), b.clone());
                if x.iter().zip(&active).all(|(&v, &a)| (v > 0.0) == a) {
                    matches.push(x);
                }
            }
            if matches.len() != 1 {
                return Err(format!(
                    "ni={ni} trial={trial}: {} sign-consistent solutions",
                    matches.len()
                ));
            }
            let (x, trace) = pl_solve(&g, gamma, &b, 200).map_err(|e| e.to_string())?;
            if max_abs_diff(&x, &matches[0]) > 1e-10 {
                return Err(format!(
                    "ni={ni} trial={trial}: pl_solve deviates from oracle"
                ));
            }
            let last = *trace.active_sizes.last().unwrap();
            if last != x.iter().filter(|&&v| v > 0.0).count() {
                return Err(format!("ni={ni} trial={trial}: active set inconsistent"));
            }
        }
    }
    Ok(())
}
