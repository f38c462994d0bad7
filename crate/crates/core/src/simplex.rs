//! Deterministic Nelder-Mead simplex minimizer.

/// Options for one simplex run.
#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop when the simplex value spread falls below this.
    pub f_tol: f64,
    /// Initial simplex edge length.
    pub scale: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: 4000,
            f_tol: 1e-14,
            scale: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `start`. Fully deterministic: ties in the vertex
/// ordering break by insertion index.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let n = start.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        f(x)
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.scale;
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices
        .iter()
        .map(|v| eval(v, &mut evaluations))
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        // order by value, index as the tie break
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        if (values[worst] - values[best]).abs() <= opts.f_tol {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for (k, v) in vertices.iter().enumerate() {
            if k == worst {
                continue;
            }
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
        };

        // reflect the worst vertex through the centroid
        let reflected = blend(&centroid, &vertices[worst], -REFLECT);
        let f_reflected = eval(&reflected, &mut evaluations);

        if f_reflected < values[best] {
            let expanded = blend(&centroid, &vertices[worst], -EXPAND);
            let f_expanded = eval(&expanded, &mut evaluations);
            if f_expanded < f_reflected {
                vertices[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                vertices[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            vertices[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = if f_reflected < values[worst] {
                blend(&centroid, &reflected, CONTRACT)
            } else {
                blend(&centroid, &vertices[worst], CONTRACT)
            };
            let f_contracted = eval(&contracted, &mut evaluations);
            if f_contracted < values[worst].min(f_reflected) {
                vertices[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // shrink towards the best vertex
                let best_vertex = vertices[best].clone();
                for k in 0..=n {
                    if k == best {
                        continue;
                    }
                    vertices[k] = blend(&best_vertex, &vertices[k], SHRINK);
                    values[k] = eval(&vertices[k], &mut evaluations);
                }
            }
        }
    }

    let mut best = 0;
    for k in 1..values.len() {
        if values[k] < values[best] {
            best = k;
        }
    }
    SimplexResult {
        x: vertices[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    }
}
