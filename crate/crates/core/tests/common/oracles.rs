//! Independent reference implementations used only by tests.
#![allow(clippy::needless_range_loop)]

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues descending with unit eigenvectors as columns.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// PCA by full eigendecomposition: coordinates of each centered row on the
/// top `k` eigenvectors, each oriented so its first non-negligible entry is
/// positive.
pub fn pca_oracle(rows: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| centered.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    let (_, mut vecs) = jacobi_eigen(&cov);
    for v in vecs.iter_mut() {
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    centered
        .iter()
        .map(|r| {
            (0..k)
                .map(|c| r.iter().zip(&vecs[c]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

/// Leave-out estimate by direct summation over raw token lists.
pub fn loe_brute_force(left: &[Vec<String>], right: &[Vec<String>]) -> f64 {
    let mut vocab: Vec<String> = left.iter().chain(right).flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    let freq = |doc: &Vec<String>, w: &str| {
        doc.iter().filter(|t| *t == w).count() as f64 / doc.len() as f64
    };
    let mean = |docs: &[Vec<String>], skip: Option<usize>, w: &str| {
        let kept: Vec<&Vec<String>> = docs
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, d)| d)
            .collect();
        kept.iter().map(|d| freq(d, w)).sum::<f64>() / kept.len() as f64
    };
    let rho = |l: f64, r: f64| if l + r == 0.0 { 0.5 } else { r / (l + r) };
    let mut left_total = 0.0;
    for (i, doc) in left.iter().enumerate() {
        for w in &vocab {
            left_total += freq(doc, w) * (1.0 - rho(mean(left, Some(i), w), mean(right, None, w)));
        }
    }
    let mut right_total = 0.0;
    for (i, doc) in right.iter().enumerate() {
        for w in &vocab {
            right_total += freq(doc, w) * rho(mean(left, None, w), mean(right, Some(i), w));
        }
    }
    0.5 * (left_total / left.len() as f64 + right_total / right.len() as f64)
}
