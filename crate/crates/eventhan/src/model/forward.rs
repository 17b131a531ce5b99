use serde::{Deserialize, Serialize};

use super::params::{HanParams, HanVars};
use super::{attention_pool, bigru, EmbedderMode, EventInput, EventKey, ModelError, ModelInput};
use crate::autodiff::{Graph, Tensor, Var};

/// Realized attention weights at every level of one forward pass, keyed to
/// the identities in the input window. Masked slots carry weight zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    /// One weight per window day.
    pub day_weights: Vec<f64>,
    /// `[day][news]`, matching the input ordering.
    pub news_weights: Vec<Vec<f64>>,
    /// `[day][news][event]`.
    pub event_weights: Vec<Vec<Vec<f64>>>,
}

/// A completed forward pass, retaining the graph so callers can attach a
/// loss and run backward.
pub struct ForwardPass {
    pub graph: Graph,
    pub vars: HanVars,
    pub logits: Var,
    pub trace: AttentionTrace,
}

impl ForwardPass {
    pub fn logit_values(&self) -> Vec<f64> {
        self.graph.value(self.logits).to_vec()
    }
}

fn embed_event(
    g: &mut Graph,
    params: &HanParams,
    vars: &HanVars,
    event: &EventInput,
) -> Result<Var, ModelError> {
    match params.config.mode {
        EmbedderMode::Precomputed => {
            let vector = event
                .vector
                .as_ref()
                .ok_or_else(|| ModelError::MissingVector(event.key.to_string()))?;
            if vector.len() != params.config.event_dim {
                return Err(ModelError::VectorDimension {
                    key: event.key.to_string(),
                    got: vector.len(),
                    expected: params.config.event_dim,
                });
            }
            Ok(g.constant(Tensor::column(vector.clone())))
        }
        EmbedderMode::WordCompose => {
            let embedding = params
                .embedding
                .as_ref()
                .expect("word-compose params carry an embedding table");
            let table = vars.embedding.expect("embedding var loaded");
            let word_vars = vars.word.as_ref().expect("word level loaded");
            let ids: Vec<usize> = event
                .tokens
                .iter()
                .take(params.config.max_words)
                .map(|t| embedding.lookup(t))
                .collect();
            if ids.is_empty() {
                return Err(ModelError::EmptyEvent(event.key.to_string()));
            }
            let inputs: Vec<Var> = ids
                .iter()
                .map(|&id| g.row(table, id))
                .collect::<Result<_, _>>()?;
            let mask = vec![true; inputs.len()];
            let states = bigru(g, word_vars, &inputs, &mask, params.config.hidden)?;
            let (pooled, _) = attention_pool(g, &word_vars.attn, &states, &mask)?;
            Ok(pooled)
        }
    }
}

/// Run the network over one window, returning the open graph. News within a
/// day and events within a news item are consumed in the order given, which
/// upstream assembly fixes to (timestamp, id) and sentence order.
pub fn forward_graph(params: &HanParams, input: &ModelInput) -> Result<ForwardPass, ModelError> {
    if input.event_count() == 0 {
        return Err(ModelError::EmptySample);
    }
    let hidden = params.config.hidden;
    let mut g = Graph::new();
    let vars = HanVars::load(&mut g, params);

    let mut day_vectors = Vec::with_capacity(input.days.len());
    let mut day_mask = Vec::with_capacity(input.days.len());
    let mut news_weights = Vec::with_capacity(input.days.len());
    let mut event_weights = Vec::with_capacity(input.days.len());

    for day in &input.days {
        if day.news.is_empty() {
            day_vectors.push(g.zeros(vec![2 * hidden, 1]));
            day_mask.push(false);
            news_weights.push(Vec::new());
            event_weights.push(Vec::new());
            continue;
        }
        let mut news_vectors = Vec::with_capacity(day.news.len());
        let mut day_event_weights = Vec::with_capacity(day.news.len());
        for news in &day.news {
            let events: Vec<Var> = news
                .events
                .iter()
                .map(|e| embed_event(&mut g, params, &vars, e))
                .collect::<Result<_, _>>()?;
            let mask = vec![true; events.len()];
            let states = bigru(&mut g, &vars.event, &events, &mask, hidden)?;
            let (pooled, weights) = attention_pool(&mut g, &vars.event.attn, &states, &mask)?;
            news_vectors.push(pooled);
            day_event_weights.push(weights);
        }
        let mask = vec![true; news_vectors.len()];
        let states = bigru(&mut g, &vars.news, &news_vectors, &mask, hidden)?;
        let (pooled, weights) = attention_pool(&mut g, &vars.news.attn, &states, &mask)?;
        day_vectors.push(pooled);
        day_mask.push(true);
        news_weights.push(weights);
        event_weights.push(day_event_weights);
    }

    let states = bigru(&mut g, &vars.temporal, &day_vectors, &day_mask, hidden)?;
    let (window, day_weights) = attention_pool(&mut g, &vars.temporal.attn, &states, &day_mask)?;

    let mut x = window;
    let last = vars.mlp.len() - 1;
    for (i, &(w, b)) in vars.mlp.iter().enumerate() {
        let wx = g.matmul(w, x)?;
        x = g.add(wx, b)?;
        if i < last {
            x = g.tanh(x);
        }
    }

    Ok(ForwardPass {
        graph: g,
        vars,
        logits: x,
        trace: AttentionTrace {
            day_weights,
            news_weights,
            event_weights,
        },
    })
}

/// Inference-only forward: logits plus the attention trace.
pub fn forward(
    params: &HanParams,
    input: &ModelInput,
) -> Result<(Vec<f64>, AttentionTrace), ModelError> {
    let pass = forward_graph(params, input)?;
    Ok((pass.logit_values(), pass.trace))
}

/// One event in an explanation, scored by the product of its attention
/// weights along the day → news → event path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedEvent {
    pub key: EventKey,
    pub text: String,
    pub score: f64,
    pub day_index: usize,
    pub news_id: String,
}

/// Rank all events of a window by combined attention. Scores over the whole
/// window sum to one; asking for more events than exist returns them all.
pub fn explain(input: &ModelInput, trace: &AttentionTrace, top_k: usize) -> Vec<ExplainedEvent> {
    let mut ranked = Vec::new();
    for (k, day) in input.days.iter().enumerate() {
        for (j, news) in day.news.iter().enumerate() {
            for (i, event) in news.events.iter().enumerate() {
                let score = trace.day_weights[k]
                    * trace.news_weights[k][j]
                    * trace.event_weights[k][j][i];
                ranked.push(ExplainedEvent {
                    key: event.key.clone(),
                    text: event.text.clone(),
                    score,
                    day_index: k,
                    news_id: news.id.clone(),
                });
            }
        }
    }
    ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    ranked.truncate(top_k);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HanConfig;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn tiny_config(classes: usize) -> HanConfig {
        HanConfig::desk(classes)
            .with_word_dim(6)
            .with_hidden(4, 4)
            .with_mlp_hidden(vec![5])
    }

    fn tokens(ts: &[&str]) -> Vec<String> {
        ts.iter().map(|s| s.to_string()).collect()
    }

    fn event(news: &str, sentence: usize, ordinal: usize, words: &[&str]) -> EventInput {
        EventInput {
            key: EventKey {
                news_id: news.to_string(),
                sentence_idx: sentence,
                ordinal,
            },
            text: words.join(" "),
            tokens: tokens(words),
            vector: None,
        }
    }

    fn params_for(input_tokens: &[String], classes: usize, seed: u64) -> HanParams {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let config = tiny_config(classes);
        let embedding = super::super::EmbeddingParams::fresh(
            input_tokens,
            config.word_dim,
            &mut rng,
        );
        HanParams::init(config, Some(embedding), &mut rng)
    }

    fn vocab() -> Vec<String> {
        tokens(&["markets", "rose", "fell", "bonds", "stocks", "sharply"])
    }

    #[test]
    fn degenerate_single_event_window_puts_weight_one_everywhere() {
        let params = params_for(&vocab(), 5, 1);
        let input = ModelInput {
            days: vec![DayInput {
                news: vec![NewsInput {
                    id: "n1".into(),
                    events: vec![event("n1", 0, 0, &["stocks", "rose"])],
                }],
            }],
        };
        let (logits, trace) = forward(&params, &input).unwrap();
        assert_eq!(logits.len(), 5);
        assert!(logits.iter().all(|v| v.is_finite()));
        assert_eq!(trace.day_weights, vec![1.0]);
        assert_eq!(trace.news_weights, vec![vec![1.0]]);
        assert_eq!(trace.event_weights, vec![vec![vec![1.0]]]);
    }

    use crate::model::{DayInput, NewsInput};

    #[test]
    fn logits_shape_matches_class_count() {
        for classes in [2usize, 3, 5] {
            let params = params_for(&vocab(), classes, 2);
            let input = ModelInput {
                days: vec![DayInput {
                    news: vec![NewsInput {
                        id: "n1".into(),
                        events: vec![event("n1", 0, 0, &["bonds", "fell"])],
                    }],
                }],
            };
            let (logits, _) = forward(&params, &input).unwrap();
            assert_eq!(logits.len(), classes);
        }
    }

    #[test]
    fn all_oov_event_is_finite_and_deterministic() {
        let params = params_for(&vocab(), 3, 3);
        let input = ModelInput {
            days: vec![DayInput {
                news: vec![NewsInput {
                    id: "n1".into(),
                    events: vec![event("n1", 0, 0, &["zzz", "qqq"])],
                }],
            }],
        };
        let (a, _) = forward(&params, &input).unwrap();
        let (b, _) = forward(&params, &input).unwrap();
        assert!(a.iter().all(|v| v.is_finite()));
        assert_eq!(a, b);
    }

    #[test]
    fn precomputed_vector_round_trips_exactly() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let config = tiny_config(2).precomputed(5);
        let params = HanParams::init(config, None, &mut rng);
        let stored: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut ev = event("n1", 0, 0, &[]);
        ev.vector = Some(stored.clone());

        let mut g = Graph::new();
        let vars = HanVars::load(&mut g, &params);
        let var = super::embed_event(&mut g, &params, &vars, &ev).unwrap();
        assert_eq!(g.value(var), &stored[..]);
    }

    #[test]
    fn precomputed_missing_vector_names_the_event() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let config = tiny_config(2).precomputed(5);
        let params = HanParams::init(config, None, &mut rng);
        let input = ModelInput {
            days: vec![DayInput {
                news: vec![NewsInput {
                    id: "news-7".into(),
                    events: vec![event("news-7", 3, 1, &[])],
                }],
            }],
        };
        let err = forward(&params, &input).unwrap_err();
        assert!(err.to_string().contains("news-7/3/1"), "{err}");
    }

    #[test]
    fn empty_sample_is_an_error() {
        let params = params_for(&vocab(), 2, 5);
        let input = ModelInput {
            days: vec![DayInput::default(), DayInput::default()],
        };
        assert!(matches!(
            forward(&params, &input),
            Err(ModelError::EmptySample)
        ));
    }

    #[test]
    fn attention_weights_sum_to_one_at_every_level() {
        let params = params_for(&vocab(), 5, 6);
        let input = ModelInput {
            days: vec![
                DayInput {
                    news: vec![
                        NewsInput {
                            id: "a".into(),
                            events: vec![
                                event("a", 0, 0, &["stocks", "rose"]),
                                event("a", 1, 0, &["bonds", "fell", "sharply"]),
                            ],
                        },
                        NewsInput {
                            id: "b".into(),
                            events: vec![event("b", 0, 0, &["markets", "rose"])],
                        },
                    ],
                },
                DayInput::default(),
                DayInput {
                    news: vec![NewsInput {
                        id: "c".into(),
                        events: vec![event("c", 0, 0, &["stocks", "fell"])],
                    }],
                },
            ],
        };
        let (_, trace) = forward(&params, &input).unwrap();
        let day_sum: f64 = trace.day_weights.iter().sum();
        assert!((day_sum - 1.0).abs() < 1e-9);
        assert_eq!(trace.day_weights[1], 0.0);
        for (k, day) in trace.news_weights.iter().enumerate() {
            if day.is_empty() {
                continue;
            }
            let s: f64 = day.iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "day {k}");
        }
        for day in &trace.event_weights {
            for news in day {
                let s: f64 = news.iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn appending_masked_days_leaves_logits_unchanged() {
        let params = params_for(&vocab(), 3, 7);
        let base = ModelInput {
            days: vec![DayInput {
                news: vec![NewsInput {
                    id: "a".into(),
                    events: vec![event("a", 0, 0, &["stocks", "rose"])],
                }],
            }],
        };
        let mut padded = base.clone();
        padded.days.push(DayInput::default());
        padded.days.push(DayInput::default());
        let (l0, _) = forward(&params, &base).unwrap();
        let (l1, _) = forward(&params, &padded).unwrap();
        for (a, b) in l0.iter().zip(&l1) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn explain_scores_partition_unity_and_rank() {
        let params = params_for(&vocab(), 5, 8);
        let input = ModelInput {
            days: vec![
                DayInput {
                    news: vec![NewsInput {
                        id: "a".into(),
                        events: vec![
                            event("a", 0, 0, &["stocks", "rose"]),
                            event("a", 1, 0, &["bonds", "fell"]),
                        ],
                    }],
                },
                DayInput {
                    news: vec![NewsInput {
                        id: "b".into(),
                        events: vec![event("b", 0, 0, &["markets", "fell", "sharply"])],
                    }],
                },
            ],
        };
        let (_, trace) = forward(&params, &input).unwrap();
        let all = explain(&input, &trace, usize::MAX);
        assert_eq!(all.len(), 3);
        let total: f64 = all.iter().map(|e| e.score).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(all.windows(2).all(|w| w[0].score >= w[1].score));

        // Requesting more than exist returns everything.
        let top = explain(&input, &trace, 10);
        assert_eq!(top.len(), 3);
    }

    #[test]
    fn single_event_explanation_scores_one() {
        let params = params_for(&vocab(), 2, 9);
        let input = ModelInput {
            days: vec![DayInput {
                news: vec![NewsInput {
                    id: "a".into(),
                    events: vec![event("a", 0, 0, &["stocks", "rose"])],
                }],
            }],
        };
        let (_, trace) = forward(&params, &input).unwrap();
        let top = explain(&input, &trace, 5);
        assert_eq!(top.len(), 1);
        assert!((top[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_news_in_zero_gru_regime_keeps_day_vector() {
        // With news-level GRU weights zeroed, identical news collapse to
        // identical (zero) states, so duplicating one and renormalizing the
        // uniform attention must not move the day vector.
        let mut params = params_for(&vocab(), 2, 10);
        params.news_level.zero_gru();
        let news = NewsInput {
            id: "a".into(),
            events: vec![event("a", 0, 0, &["stocks", "rose"])],
        };
        let two = ModelInput {
            days: vec![DayInput {
                news: vec![news.clone(), news.clone()],
            }],
        };
        let three = ModelInput {
            days: vec![DayInput {
                news: vec![news.clone(), news.clone(), news],
            }],
        };
        let (l2, t2) = forward(&params, &two).unwrap();
        let (l3, t3) = forward(&params, &three).unwrap();
        for w in &t2.news_weights[0] {
            assert!((w - 0.5).abs() < 1e-9);
        }
        for w in &t3.news_weights[0] {
            assert!((w - 1.0 / 3.0).abs() < 1e-9);
        }
        for (a, b) in l2.iter().zip(&l3) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
