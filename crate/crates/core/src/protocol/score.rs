//! Aggregation of iteration outcomes into the `p_x + 4 p_m - 4` statistic.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::verifier::{Outcome, Transcript};
use super::ProtocolError;

/// Exact rational used for reported frequencies.
pub type Exact = Ratio<i128>;

/// Two-sided level of the confidence interval.
pub const CI_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub trials_x: u64,
    pub accepts_x: u64,
    pub trials_m: u64,
    pub accepts_m: u64,
    pub discarded: u64,
    pub p_x: Exact,
    pub p_m: Exact,
    pub score: Exact,
    pub ci_halfwidth: f64,
}

/// Outcome counters; feed them one outcome at a time and convert with [`Tally::report`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub trials_x: u64,
    pub accepts_x: u64,
    pub trials_m: u64,
    pub accepts_m: u64,
    pub discarded: u64,
}

impl Tally {
    pub fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::AcceptedPreimage => {
                self.trials_x += 1;
                self.accepts_x += 1;
            }
            Outcome::RejectedPreimage => self.trials_x += 1,
            Outcome::AcceptedMeasurement => {
                self.trials_m += 1;
                self.accepts_m += 1;
            }
            Outcome::RejectedMeasurement => self.trials_m += 1,
            Outcome::DiscardedInvalidY => self.discarded += 1,
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.trials_x += other.trials_x;
        self.accepts_x += other.accepts_x;
        self.trials_m += other.trials_m;
        self.accepts_m += other.accepts_m;
        self.discarded += other.discarded;
    }

    pub fn report(&self) -> Result<ScoreReport, ProtocolError> {
        if self.trials_x == 0 || self.trials_m == 0 {
            return Err(ProtocolError::InsufficientData { trials_x: self.trials_x, trials_m: self.trials_m });
        }
        let p_x = Exact::new(i128::from(self.accepts_x), i128::from(self.trials_x));
        let p_m = Exact::new(i128::from(self.accepts_m), i128::from(self.trials_m));
        let four = Exact::from_integer(4);
        let score = p_x + four * p_m - four;
        let ci_halfwidth = hoeffding(self.trials_x) + 4.0 * hoeffding(self.trials_m);
        Ok(ScoreReport {
            trials_x: self.trials_x,
            accepts_x: self.accepts_x,
            trials_m: self.trials_m,
            accepts_m: self.accepts_m,
            discarded: self.discarded,
            p_x,
            p_m,
            score,
            ci_halfwidth,
        })
    }
}

/// Half-width of the two-sided Hoeffding interval for a mean of `n` Bernoulli draws.
pub fn hoeffding(n: u64) -> f64 {
    ((2.0 / CI_ALPHA).ln() / (2.0 * n as f64)).sqrt()
}

/// Scores a transcript log; discarded iterations count in neither branch.
pub fn score<'a, I>(transcripts: I) -> Result<ScoreReport, ProtocolError>
where
    I: IntoIterator<Item = &'a Transcript>,
{
    let mut tally = Tally::default();
    for t in transcripts {
        tally.record(t.outcome);
    }
    tally.report()
}

pub fn to_f64(v: &Exact) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

impl ScoreReport {
    pub fn p_x_f64(&self) -> f64 {
        to_f64(&self.p_x)
    }

    pub fn p_m_f64(&self) -> f64 {
        to_f64(&self.p_m)
    }

    pub fn score_f64(&self) -> f64 {
        to_f64(&self.score)
    }

    /// Interval `score ± ci_halfwidth`.
    pub fn interval(&self) -> (f64, f64) {
        let s = self.score_f64();
        (s - self.ci_halfwidth, s + self.ci_halfwidth)
    }
}

impl Serialize for ScoreReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ScoreReport", 12)?;
        st.serialize_field("trials_x", &self.trials_x)?;
        st.serialize_field("accepts_x", &self.accepts_x)?;
        st.serialize_field("trials_m", &self.trials_m)?;
        st.serialize_field("accepts_m", &self.accepts_m)?;
        st.serialize_field("discarded", &self.discarded)?;
        st.serialize_field("p_x", &self.p_x.to_string())?;
        st.serialize_field("p_m", &self.p_m.to_string())?;
        st.serialize_field("score", &self.score.to_string())?;
        st.serialize_field("p_x_approx", &self.p_x_f64())?;
        st.serialize_field("p_m_approx", &self.p_m_f64())?;
        st.serialize_field("score_approx", &self.score_f64())?;
        st.serialize_field("ci_halfwidth", &self.ci_halfwidth)?;
        st.end()
    }
}
