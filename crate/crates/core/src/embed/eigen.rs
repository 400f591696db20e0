/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// rows. `a` is row-major `p x p`.
pub fn symmetric_eigen(a: &[f64], p: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), p * p, "matrix must be square");
    let mut m = a.to_vec();
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * p + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for k in 0..p {
            for l in k + 1..p {
                let akl = m[k * p + l];
                if akl == 0.0 {
                    continue;
                }
                let theta = (m[l * p + l] - m[k * p + k]) / (2.0 * akl);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..p {
                    let (mik, mil) = (m[i * p + k], m[i * p + l]);
                    m[i * p + k] = c * mik - s * mil;
                    m[i * p + l] = s * mik + c * mil;
                }
                for j in 0..p {
                    let (mkj, mlj) = (m[k * p + j], m[l * p + j]);
                    m[k * p + j] = c * mkj - s * mlj;
                    m[l * p + j] = s * mkj + c * mlj;
                }
                for i in 0..p {
                    let (vik, vil) = (v[i * p + k], v[i * p + l]);
                    v[i * p + k] = c * vik - s * vil;
                    v[i * p + l] = s * vik + c * vil;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[j * p + j].total_cmp(&m[i * p + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * p + i]).collect();
    let vectors = order.iter().map(|&k| (0..p).map(|i| v[i * p + k]).collect()).collect();
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let (vals, vecs) = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[0][0].abs() - h).abs() < 1e-14 && (vecs[0][1].abs() - h).abs() < 1e-14);
    }

    #[test]
    fn diagonal_is_sorted() {
        let (vals, _) = symmetric_eigen(&[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0], 3);
        assert_eq!(vals, vec![5.0, 3.0, 1.0]);
    }
}
