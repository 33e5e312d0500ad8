//! Maximum-weight one-to-one assignment on rectangular count matrices.

/// Row-to-column assignment maximizing the summed counts.
///
/// The matrix is padded with zeros to square and solved as a minimum-cost
/// assignment on negated counts with the O(n³) shortest augmenting path
/// (Hungarian) method. Returns the total and, for each row, its column
/// (`None` when the row was matched to padding).
pub fn max_weight_assignment(counts: &[Vec<u64>]) -> (u64, Vec<Option<usize>>) {
    let rows = counts.len();
    let cols = counts.iter().map(Vec::len).max().unwrap_or(0);
    let n = rows.max(cols);
    if n == 0 {
        return (0, Vec::new());
    }
    let cost = |i: usize, j: usize| -> i64 { -(counts.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0) as i64) };

    const INF: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    for j in 1..=n {
        let (i, c) = (p[j] - 1, j - 1);
        if i < rows && c < counts[i].len() {
            assignment[i] = Some(c);
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| counts[i][c]))
        .sum();
    (total, assignment)
}
