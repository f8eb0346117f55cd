//! Reference computations that share no code with the library.
#![allow(dead_code)]

use ndarray::{Array1, Array2};

/// `Σ_j w_j |v|_(j)`, sorting a copy.
pub fn sorted_norm(v: &[f64], w: &[f64]) -> f64 {
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.partial_cmp(x).unwrap());
    a.iter().zip(w).map(|(x, l)| x * l).sum()
}

fn prox_objective(x: &[f64], v: &[f64], w: &[f64]) -> f64 {
    0.5 * x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + sorted_norm(x, w)
}

/// Minimizer of `½|x − v|² + Σ_j w_j|x|_(j)` by a grid scan followed by a
/// pattern search over all directions in `{−1, 0, 1}^p`. Meant for `p ≤ 6`.
pub fn brute_force_prox(v: &[f64], w: &[f64], grid: usize) -> Vec<f64> {
    let p = v.len();
    let r = v.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-3);
    let pts: Vec<f64> = (0..grid).map(|i| -r + 2.0 * r * i as f64 / (grid - 1) as f64).collect();

    let mut best = vec![0.0; p];
    let mut best_f = prox_objective(&best, v, w);
    let mut idx = vec![0usize; p];
    let mut x = vec![0.0; p];
    loop {
        for (xi, &k) in x.iter_mut().zip(&idx) {
            *xi = pts[k];
        }
        let f = prox_objective(&x, v, w);
        if f < best_f {
            best_f = f;
            best.clone_from(&x);
        }
        let mut d = 0;
        while d < p {
            idx[d] += 1;
            if idx[d] < grid {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == p {
            break;
        }
    }

    let dirs: Vec<Vec<f64>> = (0..3usize.pow(p as u32))
        .map(|mut c| {
            (0..p)
                .map(|_| {
                    let t = (c % 3) as f64 - 1.0;
                    c /= 3;
                    t
                })
                .collect::<Vec<f64>>()
        })
        .filter(|d| d.iter().any(|&t| t != 0.0))
        .collect();
    let mut step = 2.0 * r / (grid - 1) as f64;
    while step > 1e-11 {
        let mut moved = false;
        for d in &dirs {
            let cand: Vec<f64> = best.iter().zip(d).map(|(a, b)| a + step * b).collect();
            let f = prox_objective(&cand, v, w);
            if f < best_f {
                best_f = f;
                best = cand;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}

/// Penalty for the reference solver.
pub enum RefPenalty {
    L1(f64),
    Sorted(Vec<f64>),
}

impl RefPenalty {
    pub fn value(&self, b: &[f64]) -> f64 {
        match self {
            RefPenalty::L1(l) => l * b.iter().map(|x| x.abs()).sum::<f64>(),
            RefPenalty::Sorted(w) => sorted_norm(b, w),
        }
    }

    /// `argmin ½|x − v|² + t·pen(x)`.
    fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        match self {
            RefPenalty::L1(l) => v.iter().map(|x| x.signum() * (x.abs() - t * l).max(0.0)).collect(),
            RefPenalty::Sorted(w) => naive_sorted_prox(v, w, t),
        }
    }

    fn subgradient(&self, b: &[f64]) -> Vec<f64> {
        match self {
            RefPenalty::L1(l) => b.iter().map(|x| l * x.signum()).collect(),
            RefPenalty::Sorted(w) => {
                let mut order: Vec<usize> = (0..b.len()).collect();
                order.sort_by(|&i, &j| b[j].abs().partial_cmp(&b[i].abs()).unwrap());
                let mut g = vec![0.0; b.len()];
                for (rank, &i) in order.iter().enumerate() {
                    g[i] = w[rank] * b[i].signum();
                }
                g
            }
        }
    }
}

/// Sorted-ℓ1 prox through isotonic regression solved by repeatedly merging
/// the first adjacent pair of blocks that violates the ordering.
fn naive_sorted_prox(v: &[f64], w: &[f64], t: f64) -> Vec<f64> {
    let p = v.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| v[j].abs().partial_cmp(&v[i].abs()).unwrap());
    let z: Vec<f64> = order.iter().enumerate().map(|(k, &i)| v[i].abs() - t * w[k]).collect();
    // Blocks as (start, end, mean); means must be nonincreasing.
    let mut blocks: Vec<(usize, usize, f64)> = (0..p).map(|k| (k, k + 1, z[k])).collect();
    while let Some(k) = (0..blocks.len().saturating_sub(1)).find(|&k| blocks[k].2 < blocks[k + 1].2) {
        let (a, b) = (blocks[k], blocks[k + 1]);
        let mean = z[a.0..b.1].iter().sum::<f64>() / (b.1 - a.0) as f64;
        blocks[k] = (a.0, b.1, mean);
        blocks.remove(k + 1);
    }
    let mut out = vec![0.0; p];
    for (start, end, mean) in blocks {
        for k in start..end {
            out[order[k]] = v[order[k]].signum() * mean.max(0.0);
        }
    }
    out
}

fn loss(x: &Array2<f64>, y: &Array1<f64>, b: &Array1<f64>) -> (f64, Array1<f64>) {
    let r = y - &x.dot(b);
    let n = y.len() as f64;
    ((r.dot(&r) / n).sqrt(), r)
}

/// `‖Y − Xβ‖_n + pen(β)`.
pub fn objective(x: &Array2<f64>, y: &Array1<f64>, b: &Array1<f64>, pen: &RefPenalty) -> f64 {
    loss(x, y, b).0 + pen.value(b.as_slice().unwrap())
}

/// Long-run minimization of `‖Y − Xβ‖_n + pen(β)` on the unsquared loss:
/// a subgradient warm-up followed by accelerated proximal gradient with
/// backtracking and restarts. Returns the best point found.
pub fn reference_minimize(x: &Array2<f64>, y: &Array1<f64>, pen: &RefPenalty, iters: usize) -> Array1<f64> {
    let (n, p) = (x.nrows() as f64, x.ncols());
    let grad = |b: &Array1<f64>| -> (f64, Array1<f64>) {
        let (l, r) = loss(x, y, b);
        (l, -x.t().dot(&r) / (n * l))
    };
    let f = |b: &Array1<f64>| objective(x, y, b, pen);

    let mut best = Array1::zeros(p);
    let mut best_f = f(&best);
    let mut b = best.clone();
    for k in 0..2000 {
        let (_, g) = grad(&b);
        let s = Array1::from(pen.subgradient(b.as_slice().unwrap()));
        let d = &g + &s;
        let norm = d.dot(&d).sqrt();
        if norm == 0.0 {
            break;
        }
        b = &b - &(d * (0.05 / ((k + 1) as f64).sqrt() / norm));
        let fb = f(&b);
        if fb < best_f {
            best_f = fb;
            best.clone_from(&b);
        }
    }

    let mut b = best.clone();
    let mut z = b.clone();
    let mut t = 1.0_f64;
    let mut step = 1.0_f64;
    let mut fb = best_f;
    let mut stalled = 0;
    for _ in 0..iters {
        let (lz, gz) = grad(&z);
        let smooth_z = lz;
        let mut next;
        loop {
            let v = &z - &(&gz * step);
            next = Array1::from(pen.prox(v.as_slice().unwrap(), step));
            let d = &next - &z;
            let (ln, _) = loss(x, y, &next);
            if ln <= smooth_z + gz.dot(&d) + d.dot(&d) / (2.0 * step) + 1e-15 {
                break;
            }
            step *= 0.5;
        }
        let fn_ = f(&next);
        let moved = (&next - &b).mapv(f64::abs).fold(0.0_f64, |m, v| m.max(*v));
        if fn_ > fb {
            // Restart from the last accepted point.
            z = b.clone();
            t = 1.0;
            continue;
        }
        if fb - fn_ <= 1e-15 * fb {
            stalled += 1;
        } else {
            stalled = 0;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + &((&next - &b) * ((t - 1.0) / t_next));
        t = t_next;
        b = next;
        fb = fn_;
        step *= 1.2;
        if moved < 1e-15 || stalled >= 500 {
            break;
        }
    }
    if fb < best_f {
        b
    } else {
        best
    }
}
