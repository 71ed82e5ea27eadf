use crate::error::{Error, Result};

/// Validation coverage gap and mean interval width of one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationScore {
    pub delta_cov: f64,
    pub pi_width: f64,
}

impl ValidationScore {
    pub fn new(delta_cov: f64, pi_width: f64) -> Self {
        Self { delta_cov, pi_width }
    }
}

/// Among candidates with non-negative coverage gap, the narrowest; if none
/// qualifies, the one with the highest coverage gap. Ties go to the lowest
/// index.
pub fn select_model(candidates: &[ValidationScore]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("no model-selection candidates"));
    }
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.delta_cov >= 0.0 && best.is_none_or(|b| c.pi_width < candidates[b].pi_width) {
            best = Some(i);
        }
    }
    if let Some(b) = best {
        return Ok(b);
    }
    let mut b = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.delta_cov > candidates[b].delta_cov {
            b = i;
        }
    }
    Ok(b)
}
