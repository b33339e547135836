//! Small shared helpers: vector arithmetic, matrix norms, Halton sequences,
//! deterministic sphere directions.

use nalgebra::DMatrix;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    singular_extremes(m).1
}

/// (smallest, largest) singular values.
pub fn singular_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 1 && m.ncols() == 1 {
        let a = m[(0, 0)].abs();
        return (a, a);
    }
    let g = m.transpose() * m;
    let eig = g.symmetric_eigenvalues();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &e in eig.iter() {
        let s = e.max(0.0).sqrt();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo, hi)
}

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let inv = 1.0 / b as f64;
    while i > 0 {
        f *= inv;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// The `i`-th Halton point in [0,1)^dim (index starts at 1 to skip the origin).
pub fn halton(i: u64, dim: usize) -> Vec<f64> {
    (0..dim).map(|j| radical_inverse(i, PRIMES[j])).collect()
}

/// Maps a point of [-1,1]^d onto the closed unit ball, radially.
pub fn cube_to_ball(u: &[f64]) -> Vec<f64> {
    let inf = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let two = norm(u);
    if two == 0.0 {
        return u.to_vec();
    }
    scale(u, inf / two)
}

/// Deterministic set of unit directions in R^d.
pub fn sphere_directions(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(n + 2 * d);
            for i in 0..d {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                out.push(e.clone());
                e[i] = -1.0;
                out.push(e);
            }
            let mut i = 1u64;
            while out.len() < n.max(2 * d) {
                let h = halton(i, d);
                i += 1;
                let u: Vec<f64> = h.iter().map(|x| 2.0 * x - 1.0).collect();
                let r = norm(&u);
                if r > 1e-3 && r <= 1.0 {
                    out.push(scale(&u, 1.0 / r));
                }
            }
            out
        }
    }
}

/// Iterates all integer multi-indices in the box `lo..=hi` (inclusive).
pub fn multi_range(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    let d = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = lo.to_vec();
    loop {
        out.push(cur.clone());
        let mut i = 0;
        loop {
            if i == d {
                return out;
            }
            cur[i] += 1;
            if cur[i] <= hi[i] {
                break;
            }
            cur[i] = lo[i];
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cube_corner_lands_on_sphere() {
        let b = cube_to_ball(&[1.0, 1.0]);
        assert!((norm(&b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -0.5]));
        let (lo, hi) = singular_extremes(&m);
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn multi_range_counts() {
        assert_eq!(multi_range(&[-1, 0], &[1, 2]).len(), 9);
        assert!(multi_range(&[1], &[0]).is_empty());
    }
}
