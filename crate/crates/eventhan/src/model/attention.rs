use super::params::AttnVars;
use super::ModelError;
use crate::autodiff::{Graph, Var};

/// Attention pooling over a sequence of states:
/// `u_t = σ(W h_t + b)`, score `s_t = θ · u_t`, `β = masked_softmax(s)`,
/// pooled `= Σ β_t h_t`. Returns the pooled vector and the realized weights
/// (zero at masked positions) for explanation traces.
pub fn attention_pool(
    g: &mut Graph,
    attn: &AttnVars,
    states: &[Var],
    mask: &[bool],
) -> Result<(Var, Vec<f64>), ModelError> {
    if states.is_empty() || !mask.iter().any(|&m| m) {
        return Err(ModelError::Autodiff(crate::autodiff::AutodiffError::AllMasked));
    }
    debug_assert_eq!(states.len(), mask.len());

    let mut scores = None;
    for &h in states {
        let wh = g.matmul(attn.w, h)?;
        let pre = g.add(wh, attn.b)?;
        let u = g.sigmoid(pre);
        let s = g.matmul(attn.theta, u)?;
        scores = Some(match scores {
            None => s,
            Some(acc) => g.concat(acc, s, 0)?,
        });
    }
    let scores = scores.expect("at least one state");
    let beta = g.masked_softmax(scores, mask)?;
    let weights = g.value(beta).to_vec();

    // pooled = H · β with H the states stacked as columns.
    let mut stacked = states[0];
    for &h in &states[1..] {
        stacked = g.concat(stacked, h, 1)?;
    }
    let pooled = g.matmul(stacked, beta)?;
    Ok((pooled, weights))
}
