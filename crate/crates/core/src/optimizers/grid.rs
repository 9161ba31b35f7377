use rayon::prelude::*;

/// Box bounds and resolution ladder for [`grid_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub bounds: Vec<(f64, f64)>,
    pub initial_resolution: f64,
    /// Refinement stops once the resolution drops below this.
    pub final_resolution: f64,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Self { bounds, initial_resolution: 1.0, final_resolution: 0.01 }
    }

    /// Resolution of each pass: 1, 0.5, … down to the first value below the floor.
    pub fn resolutions(&self) -> Vec<f64> {
        let mut out = vec![self.initial_resolution];
        while *out.last().unwrap_or(&0.0) >= self.final_resolution {
            let next = out[out.len() - 1] / 2.0;
            out.push(next);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: Vec<f64>,
    pub value: f64,
    /// Best value after each pass.
    pub pass_best: Vec<f64>,
    pub evaluations: usize,
}

/// Maximizes `objective` by iterative grid refinement.
///
/// The first pass scans the full lattice at the initial resolution. Each later
/// pass halves the resolution and scans the neighbourhood best ± previous
/// resolution, clipped to the box. Candidates are evaluated in parallel but
/// reduced in lattice order, and the best only moves on strict improvement, so
/// the result does not depend on the thread count.
pub fn grid_search<F>(spec: &GridSpec, objective: F) -> GridResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let resolutions = spec.resolutions();
    let dims = spec.bounds.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut pass_best = Vec::with_capacity(resolutions.len());
    let mut evaluations = 0;

    for (pass, &res) in resolutions.iter().enumerate() {
        let axes: Vec<Vec<f64>> = match &best {
            None => spec.bounds.iter().map(|&(lo, hi)| lattice(lo, hi, res)).collect(),
            Some((centre, _)) => (0..dims)
                .map(|d| {
                    let (lo, hi) = spec.bounds[d];
                    (-2i32..=2)
                        .map(|j| centre[d] + j as f64 * res)
                        .filter(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12)
                        .collect()
                })
                .collect(),
        };
        let mut candidates = cartesian(&axes);
        if pass > 0 {
            let centre = &best.as_ref().expect("set after the first pass").0;
            candidates.retain(|c| c != centre);
        }
        let values: Vec<f64> = candidates.par_iter().map(|c| objective(c)).collect();
        evaluations += candidates.len();
        for (c, v) in candidates.into_iter().zip(values) {
            let better = match &best {
                None => !v.is_nan(),
                Some((_, b)) => v > *b,
            };
            if better {
                best = Some((c, v));
            }
        }
        pass_best.push(best.as_ref().map_or(f64::NAN, |b| b.1));
    }

    let (best, value) = best.unwrap_or_else(|| (spec.bounds.iter().map(|b| b.0).collect(), f64::NAN));
    GridResult { best, value, pass_best, evaluations }
}

fn lattice(lo: f64, hi: f64, res: f64) -> Vec<f64> {
    let n = ((hi - lo) / res + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * res).collect()
}

/// Cartesian product in lexicographic order (first axis slowest).
fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}
