//! Bounded Nelder–Mead simplex minimizer.
//!
//! Candidate points are clipped into the box before evaluation, so every
//! point the objective sees satisfies the bounds. Non-finite objective values
//! are ranked as `+inf` and never become the best vertex.

use crate::error::{Error, Result};

/// Settings for [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexConfig {
    pub max_iters: usize,
    /// Stop once the simplex diameter, relative to `max(1, |best|)`, drops below this.
    pub rel_tol: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Optional `[lo, hi]` box per dimension.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Per-axis offsets for the initial simplex. Defaults to 5% of the bound
    /// range, or 0.05 on unbounded axes.
    pub initial_step: Option<Vec<f64>>,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-8,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            bounds: None,
            initial_step: None,
        }
    }
}

impl SimplexConfig {
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_tol must be > 0".into()));
        }
        if let Some(b) = &self.bounds {
            if b.len() != dim {
                return Err(Error::InvalidConfig(format!(
                    "{} bounds supplied for a {dim}-dimensional problem",
                    b.len()
                )));
            }
            if let Some((i, _)) = b.iter().enumerate().find(|(_, (lo, hi))| !(lo <= hi)) {
                return Err(Error::InvalidConfig(format!("bound {i} has lo > hi")));
            }
        }
        if let Some(s) = &self.initial_step {
            if s.len() != dim {
                return Err(Error::InvalidConfig(format!(
                    "{} initial steps supplied for a {dim}-dimensional problem",
                    s.len()
                )));
            }
        }
        Ok(())
    }

    fn project(&self, x: &mut [f64]) {
        if let Some(b) = &self.bounds {
            for (v, &(lo, hi)) in x.iter_mut().zip(b) {
                *v = v.clamp(lo, hi);
            }
        }
    }

    fn step(&self, axis: usize) -> f64 {
        if let Some(s) = &self.initial_step {
            return s[axis];
        }
        match &self.bounds {
            Some(b) if (b[axis].1 - b[axis].0).is_finite() && b[axis].1 > b[axis].0 => 0.05 * (b[axis].1 - b[axis].0),
            _ => 0.05,
        }
    }
}

/// Outcome of a simplex run.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub argmin: Vec<f64>,
    pub fmin: f64,
    pub converged: bool,
    pub iters: usize,
    /// Best vertex value after each iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Vertex {
    x: Vec<f64>,
    f: f64,
}

fn rank(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

/// Minimizes `objective` starting from `x0`.
pub fn minimize<F>(objective: F, x0: &[f64], config: &SimplexConfig) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    config.validate(dim)?;

    let eval = |x: &mut Vec<f64>| -> f64 {
        config.project(x);
        rank(objective(x))
    };

    let mut start = x0.to_vec();
    let f0 = eval(&mut start);
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }

    let mut simplex = Vec::with_capacity(dim + 1);
    simplex.push(Vertex {
        x: start.clone(),
        f: f0,
    });
    for axis in 0..dim {
        let mut x = start.clone();
        let h = config.step(axis);
        x[axis] += h;
        // a step that lands on the bound collapses the vertex; step the other way
        if let Some(b) = &config.bounds {
            if x[axis] > b[axis].1 {
                x[axis] = start[axis] - h;
            }
        }
        let f = eval(&mut x);
        simplex.push(Vertex { x, f });
    }

    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;

    while iters < config.max_iters {
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        if diameter(&simplex) <= config.rel_tol * scale(&simplex[0].x) {
            converged = true;
            break;
        }
        iters += 1;

        let worst = simplex[dim].clone();
        let centroid = centroid(&simplex[..dim]);
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.x).map(|(c, w)| c + t * (c - w)).collect() };

        let mut xr = along(config.reflection);
        let fr = eval(&mut xr);

        if fr < simplex[0].f {
            let mut xe = along(config.reflection * config.expansion);
            let fe = eval(&mut xe);
            simplex[dim] = if fe < fr {
                Vertex { x: xe, f: fe }
            } else {
                Vertex { x: xr, f: fr }
            };
        } else if fr < simplex[dim - 1].f {
            simplex[dim] = Vertex { x: xr, f: fr };
        } else {
            let (mut xc, outside) = if fr < worst.f {
                (along(config.reflection * config.contraction), true)
            } else {
                (along(-config.contraction), false)
            };
            let fc = eval(&mut xc);
            let accept = if outside { fc <= fr } else { fc < worst.f };
            if accept {
                simplex[dim] = Vertex { x: xc, f: fc };
            } else {
                let best = simplex[0].x.clone();
                for v in simplex.iter_mut().skip(1) {
                    let mut xs: Vec<f64> = best
                        .iter()
                        .zip(&v.x)
                        .map(|(b, x)| b + config.shrink * (x - b))
                        .collect();
                    let fs = eval(&mut xs);
                    *v = Vertex { x: xs, f: fs };
                }
            }
        }

        let best = simplex.iter().map(|v| v.f).fold(f64::INFINITY, f64::min);
        history.push(best);
    }

    simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
    let best = simplex.swap_remove(0);
    Ok(Minimum {
        argmin: best.x,
        fmin: best.f,
        converged,
        iters,
        history,
    })
}

fn centroid(vertices: &[Vertex]) -> Vec<f64> {
    let n = vertices.len() as f64;
    let mut c = vec![0.0; vertices[0].x.len()];
    for v in vertices {
        for (ci, xi) in c.iter_mut().zip(&v.x) {
            *ci += xi;
        }
    }
    c.iter_mut().for_each(|ci| *ci /= n);
    c
}

fn diameter(simplex: &[Vertex]) -> f64 {
    let best = &simplex[0].x;
    simplex[1..]
        .iter()
        .map(|v| v.x.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn scale(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(1.0, f64::max)
}
