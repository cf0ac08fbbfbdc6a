use serde::{Deserialize, Serialize};

/// How the mixing probability `β_i` of executing the supervisor decays over
/// iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSchedule {
    /// Linear from 1 at the first iteration to 0 at the last.
    LinearFull,
    /// Linear from 1 to 0 at iteration `⌈N/2⌉`, then 0.
    LinearHalf,
    /// Linear from 1 to 0 at iteration `⌈N/4⌉`, then 0.
    LinearQuarter,
    /// 1 at the first iteration, 0 afterwards.
    #[default]
    OneZero,
}

impl BetaSchedule {
    pub const ALL: [BetaSchedule; 4] = [
        BetaSchedule::LinearFull,
        BetaSchedule::LinearHalf,
        BetaSchedule::LinearQuarter,
        BetaSchedule::OneZero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BetaSchedule::LinearFull => "linear-full",
            BetaSchedule::LinearHalf => "linear-half",
            BetaSchedule::LinearQuarter => "linear-quarter",
            BetaSchedule::OneZero => "one-zero",
        }
    }
}

fn linear_to_zero_at(last: usize, i: usize) -> f64 {
    if last <= 1 {
        return if i <= 1 { 1.0 } else { 0.0 };
    }
    (last as f64 - i as f64).max(0.0) / (last as f64 - 1.0)
}

/// `β_i` for iteration `i` of `n` (1-based). Always in `[0, 1]` with
/// `β_1 = 1`.
pub fn beta_value(schedule: BetaSchedule, i: usize, n: usize) -> f64 {
    let n = n.max(1);
    match schedule {
        BetaSchedule::LinearFull => linear_to_zero_at(n, i),
        BetaSchedule::LinearHalf => linear_to_zero_at(n.div_ceil(2), i),
        BetaSchedule::LinearQuarter => linear_to_zero_at(n.div_ceil(4), i),
        BetaSchedule::OneZero => {
            if i <= 1 {
                1.0
            } else {
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_full_five() {
        let b: Vec<f64> = (1..=5).map(|i| beta_value(BetaSchedule::LinearFull, i, 5)).collect();
        assert_eq!(b, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn linear_half_ten() {
        let b: Vec<f64> = (1..=10).map(|i| beta_value(BetaSchedule::LinearHalf, i, 10)).collect();
        assert_eq!(b, vec![1.0, 0.75, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_quarter_and_one_zero() {
        let b: Vec<f64> = (1..=8).map(|i| beta_value(BetaSchedule::LinearQuarter, i, 8)).collect();
        assert_eq!(b, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(beta_value(BetaSchedule::OneZero, 2, 10), 0.0);
        for s in BetaSchedule::ALL {
            assert_eq!(beta_value(s, 1, 1), 1.0);
            assert_eq!(beta_value(s, 1, 13), 1.0);
            for i in 1..=13 {
                assert!((0.0..=1.0).contains(&beta_value(s, i, 13)));
            }
        }
    }
}
