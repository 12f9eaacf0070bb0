//! Derivative-free minimization: a tensor-product grid scan to find the basin,
//! then Nelder–Mead refinement with one restart from the converged vertex.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Converged when the simplex value spread is ≤ `f_tol`·max(|f_best|, 1e-300).
    pub f_tol: f64,
    /// ... and the simplex diameter (max-norm) is ≤ `x_tol`.
    pub x_tol: f64,
    /// Initial simplex offset per coordinate.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            f_tol: 1e-13,
            x_tol: 1e-10,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn eval(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn nelder_mead_once(f: &impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i] != 0.0 {
            opts.initial_step * v[i].abs().max(1.0)
        } else {
            opts.initial_step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(f, v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.is_finite()
            && spread <= opts.f_tol * values[0].abs().max(1e-300)
            && diameter <= opts.x_tol
        {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(f, &xr);
        if fr < values[0] {
            let xe = along(gamma);
            let fe = eval(f, &xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(rho);
            let fc = eval(f, &xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(f, &xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = simplex[i]
                .iter()
                .zip(&best)
                .map(|(x, b)| b + sigma * (x - b))
                .collect();
            values[i] = eval(f, &simplex[i]);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Nelder–Mead from `x0`, restarted once from the converged point to undo
/// premature simplex collapse.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let first = nelder_mead_once(&f, x0, opts);
    let restart_opts = NelderMeadOptions {
        initial_step: opts.initial_step * 0.1,
        ..opts.clone()
    };
    let second = nelder_mead_once(&f, &first.x, &restart_opts);
    let iterations = first.iterations + second.iterations;
    if second.value <= first.value {
        Minimum { iterations, ..second }
    } else {
        Minimum { iterations, ..first }
    }
}

/// Best point of the tensor-product grid spanned by `axes`.
pub fn grid_minimum(f: &impl Fn(&[f64]) -> f64, axes: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let dims: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = dims.iter().product();
    let mut best = (Vec::new(), f64::INFINITY);
    let mut x = vec![0.0; axes.len()];
    for flat in 0..total {
        let mut rem = flat;
        for (d, axis) in axes.iter().enumerate().rev() {
            x[d] = axis[rem % dims[d]];
            rem /= dims[d];
        }
        let v = eval(f, &x);
        if v < best.1 || best.0.is_empty() {
            best = (x.clone(), v);
        }
    }
    best
}

/// Grid scan followed by [`nelder_mead`] from the best grid point.
pub fn grid_then_refine(f: impl Fn(&[f64]) -> f64, axes: &[Vec<f64>], opts: &NelderMeadOptions) -> Minimum {
    let (x0, v0) = grid_minimum(&f, axes);
    let refined = nelder_mead(&f, &x0, opts);
    if refined.value <= v0 {
        refined
    } else {
        Minimum {
            x: x0,
            value: v0,
            iterations: refined.iterations,
            converged: false,
        }
    }
}

pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

pub fn logspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), count)
        .into_iter()
        .map(f64::exp)
        .collect()
}
