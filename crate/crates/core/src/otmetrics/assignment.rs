//! Dense minimum-cost assignment by shortest augmenting paths with row and
//! column potentials (the Hungarian method in its Jonker–Volgenant form).

/// Returns `(min Σᵢ c[i][π(i)], π)` for the square row-major `cost`.
/// Ties resolve toward the lowest column index.
pub fn solve(size: usize, cost: &[f64]) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), size * size);
    if size == 0 {
        return (0.0, Vec::new());
    }
    // 1-based internals: column 0 is the virtual source of each augmentation.
    let n = size;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = row[j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    // Summing the original entries avoids drift in the potentials.
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    (total, perm)
}
