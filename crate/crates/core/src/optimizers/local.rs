/// Settings for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    /// Edge length of the initial simplex, per coordinate.
    pub initial_step: f64,
    /// Stop when the simplex spread in both x and f falls below these.
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_evaluations: usize,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self { initial_step: 0.25, x_tol: 1e-4, f_tol: 1e-9, max_evaluations: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

pub(crate) fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Derivative-free Nelder–Mead minimization inside a box. Every trial point is
/// clipped to the bounds before evaluation.
pub fn nelder_mead<F>(objective: &F, x0: &[f64], bounds: &[(f64, f64)], opts: &LocalOptions) -> LocalResult
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let n = x0.len();
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &mut Vec<f64>| {
        clip(x, bounds);
        evaluations.set(evaluations.get() + 1);
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    let f0 = eval(&mut start);
    let mut simplex = vec![(start.clone(), f0)];
    for i in 0..n {
        let mut p = start.clone();
        let (lo, hi) = bounds[i];
        // Step inward when the start sits on the upper bound.
        p[i] += if p[i] + opts.initial_step <= hi || p[i] - opts.initial_step < lo {
            opts.initial_step
        } else {
            -opts.initial_step
        };
        let f = eval(&mut p);
        simplex.push((p, f));
    }

    while evaluations.get() < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_spread = simplex[n].1 - simplex[0].1;
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if x_spread <= opts.x_tol && f_spread <= opts.f_tol {
            break;
        }

        let centroid: Vec<f64> =
            (0..n).map(|d| simplex[..n].iter().map(|(p, _)| p[d]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|d| centroid[d] + t * (simplex[n].0[d] - centroid[d])).collect() };

        let mut reflected = along(-1.0);
        let fr = eval(&mut reflected);
        if fr < simplex[0].1 {
            let mut expanded = along(-2.0);
            let fe = eval(&mut expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (mut contracted, outside) = if fr < simplex[n].1 { (along(-0.5), true) } else { (along(0.5), false) };
        let fc = eval(&mut contracted);
        if (outside && fc <= fr) || (!outside && fc < simplex[n].1) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let f = eval(&mut p);
            *entry = (p, f);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    LocalResult { x, value, evaluations: evaluations.get() }
}
