/// Divergence guard: runs whose state magnitude exceeds this are stopped.
pub const DIVERGENCE_THRESHOLD: f64 = 1e30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub step: usize,
    pub magnitude: f64,
}

/// Per-step auxiliaries of a closed-loop run. The step size `Δ_t` is the
/// trajectory's state column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControlRecord {
    pub xhat: Vec<f64>,
    pub u: Vec<f64>,
    pub overflow: Vec<bool>,
}

/// One seeded run: `x[k]` is the input at time `k` and `s[k]` the state
/// before it is processed.
///
/// A run stopped by the divergence guard keeps its full length; entries from
/// the divergence step on are `±inf` so that every diagnostic sees the run
/// as having left every bounded set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub control: Option<ControlRecord>,
    pub divergence: Option<Divergence>,
}

impl Trajectory {
    pub fn with_capacity(len: usize) -> Self {
        Trajectory {
            x: Vec::with_capacity(len),
            s: Vec::with_capacity(len),
            control: None,
            divergence: None,
        }
    }

    pub fn from_parts(x: Vec<f64>, s: Vec<f64>) -> Self {
        assert_eq!(x.len(), s.len(), "x and s must have equal length");
        Trajectory {
            x,
            s,
            control: None,
            divergence: None,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn push(&mut self, x: f64, s: f64) {
        self.x.push(x);
        self.s.push(s);
    }

    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn ensure_finite(&self) -> crate::Result<()> {
        match self.divergence {
            Some(Divergence { step, magnitude }) => Err(crate::Error::NonFiniteState { step, magnitude }),
            None => Ok(()),
        }
    }
}
