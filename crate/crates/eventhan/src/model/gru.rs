use super::params::{GruVars, LevelVars};
use super::ModelError;
use crate::autodiff::{Graph, Var};

/// One GRU step:
/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// ĥ = tanh(W_h x + U_h (r ⊙ h) + b_h), h' = (1 − z) ⊙ h + z ⊙ ĥ.
fn gru_step(g: &mut Graph, p: &GruVars, x: Var, h: Var) -> Result<Var, ModelError> {
    let wx = g.matmul(p.w_z, x)?;
    let uh = g.matmul(p.u_z, h)?;
    let s = g.add(wx, uh)?;
    let s = g.add(s, p.b_z)?;
    let z = g.sigmoid(s);

    let wx = g.matmul(p.w_r, x)?;
    let uh = g.matmul(p.u_r, h)?;
    let s = g.add(wx, uh)?;
    let s = g.add(s, p.b_r)?;
    let r = g.sigmoid(s);

    let rh = g.mul(r, h)?;
    let wx = g.matmul(p.w_h, x)?;
    let uh = g.matmul(p.u_h, rh)?;
    let s = g.add(wx, uh)?;
    let s = g.add(s, p.b_h)?;
    let cand = g.tanh(s);

    let ones = g.ones(g.shape(z).to_vec());
    let keep = g.sub(ones, z)?;
    let carry = g.mul(keep, h)?;
    let update = g.mul(z, cand)?;
    Ok(g.add(carry, update)?)
}

/// Run a bi-directional GRU over `inputs` and return the per-position
/// concatenated states `[→h_i ; ←h_i]` (shape `[2·hidden, 1]` each).
///
/// Masked positions neither advance the recurrent state nor emit anything:
/// their output state is exactly zero.
pub fn bigru(
    g: &mut Graph,
    level: &LevelVars,
    inputs: &[Var],
    mask: &[bool],
    hidden: usize,
) -> Result<Vec<Var>, ModelError> {
    if inputs.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    debug_assert_eq!(inputs.len(), mask.len());
    let t = inputs.len();

    let zero_state = g.zeros(vec![hidden, 1]);
    let mut fwd = vec![zero_state; t];
    let mut state = zero_state;
    for i in 0..t {
        if mask[i] {
            state = gru_step(g, &level.fwd, inputs[i], state)?;
            fwd[i] = state;
        }
    }

    let mut bwd = vec![zero_state; t];
    let mut state = zero_state;
    for i in (0..t).rev() {
        if mask[i] {
            state = gru_step(g, &level.bwd, inputs[i], state)?;
            bwd[i] = state;
        }
    }

    (0..t)
        .map(|i| Ok(g.concat(fwd[i], bwd[i], 0)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{sigmoid, Tensor};
    use crate::model::params::{HanVars, LevelParams};
    use crate::model::{EmbedderMode, HanConfig, HanParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn tiny_params(hidden: usize, input: usize) -> (HanParams, HanConfig) {
        let config = HanConfig {
            mode: EmbedderMode::Precomputed,
            word_dim: 0,
            event_dim: input,
            hidden,
            attention_dim: hidden,
            classes: 2,
            mlp_hidden: vec![],
            max_words: 4,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let params = HanParams::init(config.clone(), None, &mut rng);
        (params, config)
    }

    /// Independent scalar GRU: the oracle the graph version is checked
    /// against. Plain loops over f64 slices, no autodiff involvement.
    fn scalar_gru_sequence(
        p: &LevelParams,
        inputs: &[Vec<f64>],
        hidden: usize,
        backward: bool,
    ) -> Vec<Vec<f64>> {
        let gru = if backward { &p.bwd } else { &p.fwd };
        let matvec = |m: &Tensor, v: &[f64]| -> Vec<f64> {
            let rows = m.shape()[0];
            let cols = m.shape()[1];
            (0..rows)
                .map(|i| (0..cols).map(|j| m.values()[i * cols + j] * v[j]).sum())
                .collect()
        };
        let order: Vec<usize> = if backward {
            (0..inputs.len()).rev().collect()
        } else {
            (0..inputs.len()).collect()
        };
        let mut h = vec![0.0; hidden];
        let mut out = vec![vec![0.0; hidden]; inputs.len()];
        for idx in order {
            let x = &inputs[idx];
            let wz = matvec(&gru.w_z, x);
            let uz = matvec(&gru.u_z, &h);
            let z: Vec<f64> = (0..hidden)
                .map(|i| sigmoid(wz[i] + uz[i] + gru.b_z.values()[i]))
                .collect();
            let wr = matvec(&gru.w_r, x);
            let ur = matvec(&gru.u_r, &h);
            let r: Vec<f64> = (0..hidden)
                .map(|i| sigmoid(wr[i] + ur[i] + gru.b_r.values()[i]))
                .collect();
            let rh: Vec<f64> = (0..hidden).map(|i| r[i] * h[i]).collect();
            let wh = matvec(&gru.w_h, x);
            let uh = matvec(&gru.u_h, &rh);
            let cand: Vec<f64> = (0..hidden)
                .map(|i| (wh[i] + uh[i] + gru.b_h.values()[i]).tanh())
                .collect();
            h = (0..hidden)
                .map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i])
                .collect();
            out[idx] = h.clone();
        }
        out
    }

    fn run_bigru(params: &HanParams, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut g = Graph::new();
        let vars = HanVars::load(&mut g, params);
        let input_vars: Vec<_> = inputs
            .iter()
            .map(|v| g.constant(Tensor::column(v.clone())))
            .collect();
        let mask = vec![true; inputs.len()];
        let states = bigru(&mut g, &vars.event, &input_vars, &mask, params.config.hidden).unwrap();
        states.iter().map(|s| g.value(*s).to_vec()).collect()
    }

    #[test]
    fn single_step_state_has_both_directions() {
        let (params, config) = tiny_params(3, 2);
        let states = run_bigru(&params, &[vec![0.5, -0.25]]);
        assert_eq!(states[0].len(), 2 * config.hidden);
        // T=1: forward and backward see the identical input from the same
        // zero state, differing only by their weights.
        let fwd = scalar_gru_sequence(&params.event_level, &[vec![0.5, -0.25]], 3, false);
        let bwd = scalar_gru_sequence(&params.event_level, &[vec![0.5, -0.25]], 3, true);
        for i in 0..3 {
            assert!((states[0][i] - fwd[0][i]).abs() < 1e-12);
            assert!((states[0][3 + i] - bwd[0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_keep_states_in_the_half_mixing_regime() {
        let (mut params, _) = tiny_params(2, 2);
        params.event_level.zero_gru();
        // Hand-unrolled: z = σ(0) = 0.5, candidate = tanh(0) = 0, so
        // h_t = 0.5·h_{t−1} from h_0 = 0 stays exactly zero for 3 steps.
        let inputs = vec![vec![1.0, -1.0], vec![2.0, 0.5], vec![-0.5, 0.25]];
        let mut h = [0.0f64; 2];
        let mut expect = Vec::new();
        for _ in &inputs {
            h = [0.5 * h[0] + 0.5 * 0.0, 0.5 * h[1] + 0.5 * 0.0];
            expect.push(h);
        }
        let states = run_bigru(&params, &inputs);
        for (s, e) in states.iter().zip(&expect) {
            assert_eq!(&s[..2], &e[..]);
        }
    }

    #[test]
    fn matches_independent_scalar_recurrence() {
        let (params, _) = tiny_params(4, 3);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let inputs: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                (0..3)
                    .map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0))
                    .collect()
            })
            .collect();
        let states = run_bigru(&params, &inputs);
        let fwd = scalar_gru_sequence(&params.event_level, &inputs, 4, false);
        let bwd = scalar_gru_sequence(&params.event_level, &inputs, 4, true);
        for t in 0..inputs.len() {
            for i in 0..4 {
                assert!((states[t][i] - fwd[t][i]).abs() < 1e-12);
                assert!((states[t][4 + i] - bwd[t][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reversing_the_input_swaps_directions() {
        let (params, _) = tiny_params(3, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                (0..2)
                    .map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0))
                    .collect()
            })
            .collect();
        let reversed: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();

        // Swap the two GRUs so the forward net processes what the backward
        // net saw; reversing the sequence must then reproduce the states in
        // reverse order with halves exchanged.
        let mut swapped = params.clone();
        std::mem::swap(&mut swapped.event_level.fwd, &mut swapped.event_level.bwd);

        let states = run_bigru(&params, &inputs);
        let states_rev = run_bigru(&swapped, &reversed);
        let h = params.config.hidden;
        for t in 0..inputs.len() {
            let mirrored = &states_rev[inputs.len() - 1 - t];
            for i in 0..h {
                assert!((states[t][i] - mirrored[h + i]).abs() < 1e-12);
                assert!((states[t][h + i] - mirrored[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn masked_positions_emit_zero_and_keep_state() {
        let (params, _) = tiny_params(3, 2);
        let mut g = Graph::new();
        let vars = HanVars::load(&mut g, &params);
        let a = g.constant(Tensor::column(vec![0.3, 0.7]));
        let gap = g.constant(Tensor::column(vec![9.0, 9.0]));
        let b = g.constant(Tensor::column(vec![-0.2, 0.4]));
        let states = bigru(
            &mut g,
            &vars.event,
            &[a, gap, b],
            &[true, false, true],
            3,
        )
        .unwrap();
        assert!(g.value(states[1]).iter().all(|&v| v == 0.0));

        // Same run without the masked slot in the middle: identical states.
        let mut g2 = Graph::new();
        let vars2 = HanVars::load(&mut g2, &params);
        let a2 = g2.constant(Tensor::column(vec![0.3, 0.7]));
        let b2 = g2.constant(Tensor::column(vec![-0.2, 0.4]));
        let states2 = bigru(&mut g2, &vars2.event, &[a2, b2], &[true, true], 3).unwrap();
        assert_eq!(g.value(states[0]), g2.value(states2[0]));
        assert_eq!(g.value(states[2]), g2.value(states2[1]));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let (params, _) = tiny_params(2, 2);
        let mut g = Graph::new();
        let vars = HanVars::load(&mut g, &params);
        assert!(matches!(
            bigru(&mut g, &vars.event, &[], &[], 2),
            Err(ModelError::EmptySequence)
        ));
    }
}
