use std::fmt::Write as _;

use super::{OccupationHistogram, TimeAverageRow, Verdict};

/// One named verdict with the tolerance that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct VerdictEntry {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
    pub tolerance: String,
}

/// Everything a run measured, plus its verdicts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StabilityReport {
    /// `(M, value)`, ascending in `M`, nonincreasing in value.
    pub tightness_curve: Vec<(f64, f64)>,
    pub time_averages: Vec<TimeAverageRow>,
    pub occupation: Option<OccupationHistogram>,
    pub occupation_l1_deltas: Vec<f64>,
    pub verdicts: Vec<VerdictEntry>,
    /// Free-form `key = value` facts (parameters, derived quantities).
    pub facts: Vec<(String, String)>,
}

impl StabilityReport {
    pub fn fact(&mut self, key: impl Into<String>, value: impl ToString) {
        self.facts.push((key.into(), value.to_string()));
    }

    pub fn verdict(&mut self, name: &str, verdict: Verdict, detail: impl Into<String>, tolerance: impl Into<String>) {
        self.verdicts.push(VerdictEntry {
            name: name.to_string(),
            verdict,
            detail: detail.into(),
            tolerance: tolerance.into(),
        });
    }

    pub fn get(&self, name: &str) -> Option<&VerdictEntry> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Worst verdict; a report without verdicts passes.
    pub fn overall(&self) -> Verdict {
        self.verdicts.iter().map(|v| v.verdict).max().unwrap_or(Verdict::Pass)
    }

    /// Process exit status for the overall verdict: 0 pass, 2 fail,
    /// 3 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self.overall() {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
            Verdict::Inconclusive => 3,
        }
    }

    /// UTF-8 `key = value` lines; verdicts are under the `verdicts.` prefix.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.facts {
            let _ = writeln!(out, "{k} = {}", one_line(v));
        }
        for (m, v) in &self.tightness_curve {
            let _ = writeln!(out, "tightness.M_{m} = {v}");
        }
        for (i, d) in self.occupation_l1_deltas.iter().enumerate() {
            let _ = writeln!(out, "occupation.l1_delta.{i} = {d}");
        }
        if let Some(h) = &self.occupation {
            let _ = writeln!(out, "occupation.total_mass = {}", h.total());
            let _ = writeln!(out, "occupation.t_samples = {}", h.t_samples);
            let _ = writeln!(out, "occupation.n_trajs = {}", h.n_trajs);
        }
        for v in &self.verdicts {
            let _ = writeln!(out, "verdicts.{} = {}", v.name, v.verdict);
            let _ = writeln!(out, "verdicts.{}.detail = {}", v.name, one_line(&v.detail));
            let _ = writeln!(out, "verdicts.{}.tolerance = {}", v.name, one_line(&v.tolerance));
        }
        let _ = writeln!(out, "verdicts.overall = {}", self.overall());
        out
    }
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}
