//! Quintic Hermite interpolation from values, first and second derivatives.

/// Interpolates on [x0, x1] given (y, y', y'') at both ends.
pub fn quintic(x0: f64, x1: f64, p0: [f64; 3], p1: [f64; 3], x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * t3 - t4 + 0.5 * t5;
    h0 * p0[0] + h * h1 * p0[1] + h * h * h2 * p0[2] + h3 * p1[0] + h * h4 * p1[1] + h * h * h5 * p1[2]
}

/// Index i with grid[i] <= x <= grid[i+1]; clamps to the end intervals.
pub fn locate(grid: &[f64], x: f64) -> usize {
    let n = grid.len();
    if x <= grid[0] {
        return 0;
    }
    if x >= grid[n - 1] {
        return n - 2;
    }
    match grid.binary_search_by(|g| g.total_cmp(&x)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    }
}
