use std::fmt;
use std::sync::Arc;

use super::{batch_means, MeanEstimate, DEFAULT_BATCHES};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

type Eval = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Bounded test function `f(x, s)` with a declared bound `|f| ≤ bound`.
#[derive(Clone)]
pub struct Functional {
    name: String,
    bound: f64,
    eval: Arc<Eval>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .finish()
    }
}

impl Functional {
    pub fn new(name: impl Into<String>, bound: f64, eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Functional {
            name: name.into(),
            bound,
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    #[inline]
    pub fn eval(&self, x: f64, s: f64) -> f64 {
        (self.eval)(x, s)
    }

    /// Parses a functional id.
    ///
    /// | id             | f(x, s)          | bound |
    /// |----------------|------------------|-------|
    /// | `one`          | 1                | 1     |
    /// | `tanh_s`       | tanh s           | 1     |
    /// | `tanh_x`       | tanh x           | 1     |
    /// | `abs_s_le:M`   | 1{\|s\| ≤ M}     | 1     |
    /// | `s_ge:c`       | 1{s ≥ c}         | 1     |
    /// | `x_ge:c`       | 1{x ≥ c}         | 1     |
    /// | `clip_abs_s:B` | min(\|s\|, B)    | B     |
    /// | `s:B`          | s                | B     |
    /// | `abs_s:B`      | \|s\|            | B     |
    ///
    /// `s:B` and `abs_s:B` are unclipped; evaluating them past `B` is an error.
    pub fn parse(id: &str) -> Result<Self> {
        let (head, arg) = match id.split_once(':') {
            Some((h, a)) => {
                let v: f64 = a
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(id, format!("`{a}` is not a number")))?;
                if !v.is_finite() {
                    return Err(Error::config(id, "parameter must be finite"));
                }
                (h.trim(), Some(v))
            }
            None => (id.trim(), None),
        };
        let need = |arg: Option<f64>| arg.ok_or_else(|| Error::config(id, "missing `:value` parameter"));
        let positive = |arg: Option<f64>| {
            let v = need(arg)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::config(id, "bound must be positive"))
            }
        };
        let name = id.trim().to_string();
        let f = match (head, arg) {
            ("one", None) => Functional::new(name, 1.0, |_, _| 1.0),
            ("tanh_s", None) => Functional::new(name, 1.0, |_, s| s.tanh()),
            ("tanh_x", None) => Functional::new(name, 1.0, |x, _| x.tanh()),
            ("abs_s_le", a) => {
                let m = need(a)?;
                Functional::new(name, 1.0, move |_, s| indicator(s.abs() <= m))
            }
            ("s_ge", a) => {
                let c = need(a)?;
                Functional::new(name, 1.0, move |_, s| indicator(s >= c))
            }
            ("x_ge", a) => {
                let c = need(a)?;
                Functional::new(name, 1.0, move |x, _| indicator(x >= c))
            }
            ("clip_abs_s", a) => {
                let b = positive(a)?;
                Functional::new(name, b, move |_, s| s.abs().min(b))
            }
            ("s", a) => Functional::new(name, positive(a)?, |_, s| s),
            ("abs_s", a) => Functional::new(name, positive(a)?, |_, s| s.abs()),
            _ => return Err(Error::config(id, "unknown functional")),
        };
        Ok(f)
    }

    fn values(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.is_empty() {
            return Err(Error::invalid("trajectory", "is empty"));
        }
        traj.x
            .iter()
            .zip(&traj.s)
            .map(|(&x, &s)| {
                let v = self.eval(x, s);
                if v.abs() <= self.bound {
                    Ok(v)
                } else {
                    Err(Error::UnboundedFunctional {
                        name: self.name.clone(),
                        observed: v.abs(),
                        bound: self.bound,
                    })
                }
            })
            .collect()
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Sample-path average `(1/N) Σ f(x_k, s_k)` with its batch-means error.
pub type TimeAverage = MeanEstimate;

pub fn time_average(traj: &Trajectory, f: &Functional) -> Result<TimeAverage> {
    Ok(batch_means(&f.values(traj)?, DEFAULT_BATCHES))
}

/// Running averages `(1/n) Σ_{k<n} f(x_k, s_k)` for `n = 1..=N`.
pub fn cesaro_sequence(traj: &Trajectory, f: &Functional) -> Result<Vec<f64>> {
    let mut total = 0.0;
    Ok(f.values(traj)?
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            total += v;
            total / (k + 1) as f64
        })
        .collect())
}

/// One row of `time_averages.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeAverageRow {
    pub functional: String,
    pub initial: f64,
    pub value: f64,
    pub stderr: f64,
}
