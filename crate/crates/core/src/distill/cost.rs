//! Token-usage accounting and currency cost per pipeline stage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::client::Usage;

/// Usage split by pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageUsage {
    pub finding: Usage,
    pub question: Usage,
}

impl std::ops::AddAssign for StageUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.finding += rhs.finding;
        self.question += rhs.question;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    pub usage: Usage,
    pub prompt_cost: f64,
    pub completion_cost: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub finding: StageCost,
    pub question: StageCost,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("price per 1k tokens must be non-negative, got {0}")]
pub struct NegativePrice(pub f64);

fn stage(usage: Usage, prompt_per_1k: f64, completion_per_1k: f64) -> StageCost {
    let prompt_cost = usage.prompt_tokens as f64 / 1000.0 * prompt_per_1k;
    let completion_cost = usage.completion_tokens as f64 / 1000.0 * completion_per_1k;
    StageCost {
        usage,
        prompt_cost,
        completion_cost,
        total: prompt_cost + completion_cost,
    }
}

pub fn compute_cost(
    usage: &StageUsage,
    price_per_1k_prompt: f64,
    price_per_1k_completion: f64,
) -> Result<CostReport, NegativePrice> {
    for p in [price_per_1k_prompt, price_per_1k_completion] {
        if p.is_nan() || p < 0.0 {
            return Err(NegativePrice(p));
        }
    }
    let finding = stage(usage.finding, price_per_1k_prompt, price_per_1k_completion);
    let question = stage(usage.question, price_per_1k_prompt, price_per_1k_completion);
    Ok(CostReport {
        finding,
        question,
        total: finding.total + question.total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(p: u64, c: u64) -> Usage {
        Usage {
            prompt_tokens: p,
            completion_tokens: c,
        }
    }

    #[test]
    fn reported_stage_costs_sum() {
        // $0.0015 / $0.002 per 1k tokens; totals picked to land on 700 and 427
        let u = StageUsage {
            finding: usage(400_000_000, 50_000_000),
            question: usage(218_000_000, 50_000_000),
        };
        let r = compute_cost(&u, 0.0015, 0.002).unwrap();
        assert!((r.finding.total - 700.0).abs() < 1e-6);
        assert!((r.question.total - 427.0).abs() < 1e-6);
        assert_eq!(format!("{:.2}", r.total), "1127.00");
        assert_eq!(r.total, r.finding.total + r.question.total);
    }

    #[test]
    fn zero_and_prompt_only() {
        let r = compute_cost(&StageUsage::default(), 0.0015, 0.002).unwrap();
        assert_eq!(r.total, 0.0);
        let r = compute_cost(
            &StageUsage {
                finding: usage(2000, 0),
                question: usage(1000, 0),
            },
            1.0,
            5.0,
        )
        .unwrap();
        assert_eq!(r.finding.completion_cost, 0.0);
        assert_eq!(r.question.completion_cost, 0.0);
        assert_eq!(r.total, 3.0);
    }

    #[test]
    fn negative_price() {
        assert_eq!(
            compute_cost(&StageUsage::default(), -0.1, 0.0),
            Err(NegativePrice(-0.1))
        );
        assert!(compute_cost(&StageUsage::default(), 0.0, f64::NAN).is_err());
    }
}
