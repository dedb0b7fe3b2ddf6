#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "statenet/corpus.hpp"
#include "statenet/embeddings.hpp"
#include "statenet/featurizer.hpp"
#include "statenet/ops.hpp"
#include "statenet/optim.hpp"
#include "statenet/parameters.hpp"
#include "statenet/rng.hpp"

namespace statenet {

// Model hyperparameters. One parameter set built from a config serves any
// slot and any value set: no dimension below depends on the ontology.
struct ModelConfig {
    std::size_t receptor_width = 128;     // width of each receptor output (N_c)
    std::size_t embedding_dim = 300;      // word-vector dimension, must match the table
    std::size_t utterance_gram_order = 2; // highest utterance n-gram
    std::size_t act_gram_order = 3;       // highest machine-act n-gram
    std::size_t receptors_per_gram = 4;   // parallel linear receptors per gram
    std::size_t lstm_hidden = 0;          // 0 -> derived as 2 * receptor_width
    std::size_t act_input_dim = 0;        // from the frozen act vocabulary
    std::size_t asr_best_list_size = 3;   // m-best truncation before weighting

    std::size_t resolved_lstm_hidden() const {
        return lstm_hidden ? lstm_hidden : 2 * receptor_width;
    }

    void validate() const {
        if (!receptor_width || !embedding_dim || !utterance_gram_order || !act_gram_order ||
            !receptors_per_gram || !asr_best_list_size)
            throw ConfigError("model config fields must be positive");
        if (!act_input_dim)
            throw ConfigError("act_input_dim is 0: the training machine acts produced an empty "
                              "n-gram vocabulary; the act branch needs at least one feature");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"receptor_width", receptor_width},
                              {"embedding_dim", embedding_dim},
                              {"utterance_gram_order", utterance_gram_order},
                              {"act_gram_order", act_gram_order},
                              {"receptors_per_gram", receptors_per_gram},
                              {"lstm_hidden", lstm_hidden},
                              {"act_input_dim", act_input_dim},
                              {"asr_best_list_size", asr_best_list_size}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        auto fetch = [&j](const char* key, std::size_t& field) {
            if (j.contains(key)) {
                if (!j.at(key).is_number_unsigned())
                    throw ConfigError(std::string("model config field \"") + key +
                                      "\" must be a non-negative integer");
                field = j.at(key).get<std::size_t>();
            }
        };
        fetch("receptor_width", c.receptor_width);
        fetch("embedding_dim", c.embedding_dim);
        fetch("utterance_gram_order", c.utterance_gram_order);
        fetch("act_gram_order", c.act_gram_order);
        fetch("receptors_per_gram", c.receptors_per_gram);
        fetch("lstm_hidden", c.lstm_hidden);
        fetch("act_input_dim", c.act_input_dim);
        fetch("asr_best_list_size", c.asr_best_list_size);
        return c;
    }

    bool operator==(const ModelConfig&) const = default;
};

// Closed-form trainable scalar count for a config; independent of how many
// slots or values the ontology carries.
inline std::size_t parameter_scalar_count(const ModelConfig& cfg) {
    const std::size_t nc = cfg.receptor_width;
    const std::size_t nw = cfg.embedding_dim;
    const std::size_t c = cfg.receptors_per_gram;
    const std::size_t dh = cfg.resolved_lstm_hidden();
    std::size_t count = 0;
    for (std::size_t k = 1; k <= cfg.utterance_gram_order; ++k)
        count += c * (nc * k * nw + nc);           // receptors
    count += 2 * c * nc;                           // layer-norm gain/bias
    count += nc * c * nc + nc;                     // post-norm linear
    count += nc * cfg.act_input_dim + nc;          // act linear
    count += 2 * nc * nw + 2 * nc;                 // slot linear
    count += 4 * dh * (2 * nc) + 4 * dh * dh + 4 * dh; // lstm
    count += nw * dh + nw;                         // output linear
    return count;
}

namespace param_names {
inline std::string receptor_weight(std::size_t k, std::size_t j) {
    return "receptor.g" + std::to_string(k) + ".r" + std::to_string(j) + ".weight";
}
inline std::string receptor_bias(std::size_t k, std::size_t j) {
    return "receptor.g" + std::to_string(k) + ".r" + std::to_string(j) + ".bias";
}
} // namespace param_names

// A full tracker model: hyperparameters, the frozen act vocabulary it was
// built against, and the trainable parameters. This triple is exactly what a
// checkpoint stores.
template <typename T>
struct StateNetModel {
    ModelConfig config;
    ActVocabulary vocabulary;
    ad::ParameterSet<T> params;

    // Fresh parameters: weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
    // biases zero, LSTM forget-gate bias 1, layer-norm gain 1. Draw order is
    // fixed by the declaration order below, so a seed fully determines every
    // value.
    static StateNetModel init(ModelConfig cfg, ActVocabulary vocab, Rng& rng) {
        cfg.validate();
        check_vocabulary(cfg, vocab);
        StateNetModel model;
        model.config = cfg;
        model.vocabulary = std::move(vocab);
        auto& p = model.params;

        const std::size_t nc = cfg.receptor_width;
        const std::size_t nw = cfg.embedding_dim;
        const std::size_t c = cfg.receptors_per_gram;
        const std::size_t dh = cfg.resolved_lstm_hidden();

        auto weight = [&rng](std::size_t rows, std::size_t cols) {
            ad::Array<T> w({rows, cols});
            const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
            ad::fill_uniform(w, rng, -bound, bound);
            return w;
        };

        for (std::size_t k = 1; k <= cfg.utterance_gram_order; ++k) {
            for (std::size_t j = 1; j <= c; ++j) {
                p.add(param_names::receptor_weight(k, j), weight(nc, k * nw));
                p.add(param_names::receptor_bias(k, j), ad::Array<T>::zeros({nc}));
            }
        }
        p.add("norm.gain", ad::Array<T>::full({c * nc}, T(1)));
        p.add("norm.bias", ad::Array<T>::zeros({c * nc}));
        p.add("user_out.weight", weight(nc, c * nc));
        p.add("user_out.bias", ad::Array<T>::zeros({nc}));
        p.add("act.weight", weight(nc, cfg.act_input_dim));
        p.add("act.bias", ad::Array<T>::zeros({nc}));
        p.add("slot.weight", weight(2 * nc, nw));
        p.add("slot.bias", ad::Array<T>::zeros({2 * nc}));
        p.add("lstm.w_ih", weight(4 * dh, 2 * nc));
        p.add("lstm.w_hh", weight(4 * dh, dh));
        {
            // Forget-gate section starts at 1 to retain early memory.
            ad::Array<T> b({4 * dh});
            for (std::size_t i = dh; i < 2 * dh; ++i) b.data[i] = T(1);
            p.add("lstm.bias", std::move(b));
        }
        p.add("output.weight", weight(nw, dh));
        p.add("output.bias", ad::Array<T>::zeros({nw}));
        return model;
    }

    static StateNetModel from_parts(ModelConfig cfg, ActVocabulary vocab, ad::ParameterSet<T> params) {
        cfg.validate();
        check_vocabulary(cfg, vocab);
        StateNetModel model;
        model.config = std::move(cfg);
        model.vocabulary = std::move(vocab);
        model.params = std::move(params);
        return model;
    }

private:
    static void check_vocabulary(const ModelConfig& cfg, const ActVocabulary& vocab) {
        if (cfg.act_input_dim != vocab.total_size())
            throw ConfigError("act_input_dim " + std::to_string(cfg.act_input_dim) +
                              " does not match the act vocabulary size " +
                              std::to_string(vocab.total_size()));
    }
};

// LSTM carry for one (dialogue, slot) pair. Reset to zeros at each dialogue
// start; never shared across dialogues. During training the nodes stay wired
// into the graph so gradients flow across turns.
template <typename T>
struct TrackerState {
    ad::Node<T> hidden;
    ad::Node<T> cell;

    static TrackerState initial(const ModelConfig& cfg) {
        const std::size_t dh = cfg.resolved_lstm_hidden();
        return {ad::Node<T>::constant(ad::Array<T>::zeros({dh})),
                ad::Node<T>::constant(ad::Array<T>::zeros({dh}))};
    }
};

// Top m-best hypotheses, renormalized over the kept subset.
inline std::vector<AsrHypothesis> prepared_hypotheses(const Turn& turn, std::size_t m_best) {
    std::vector<AsrHypothesis> kept(turn.asr.begin(),
                                    turn.asr.begin() +
                                        static_cast<std::ptrdiff_t>(std::min(turn.asr.size(), m_best)));
    return normalize_scores(std::move(kept));
}

// f_u: per gram k, the c receptor outputs are concatenated, the grams summed,
// layer-normalized, ReLU-ed, and mapped to receptor_width.
template <typename T>
ad::Node<T> user_feature(const StateNetModel<T>& model, const UtteranceRepresentation<T>& rep) {
    const auto& cfg = model.config;
    if (rep.max_gram != cfg.utterance_gram_order || rep.word_dim != cfg.embedding_dim)
        throw ShapeError("utterance representation (n=" + std::to_string(rep.max_gram) +
                         ", dim=" + std::to_string(rep.word_dim) + ") does not match model config");
    std::vector<ad::Node<T>> per_gram;
    per_gram.reserve(cfg.utterance_gram_order);
    for (std::size_t k = 1; k <= cfg.utterance_gram_order; ++k) {
        ad::Node<T> input = ad::Node<T>::constant(ad::Array<T>::vector(rep.gram(k)));
        std::vector<ad::Node<T>> receptor_outs;
        receptor_outs.reserve(cfg.receptors_per_gram);
        for (std::size_t j = 1; j <= cfg.receptors_per_gram; ++j)
            receptor_outs.push_back(ad::linear(input,
                                               model.params.get(param_names::receptor_weight(k, j)),
                                               model.params.get(param_names::receptor_bias(k, j))));
        per_gram.push_back(ad::concat(receptor_outs));
    }
    ad::Node<T> summed = ad::sum_vectors(per_gram);
    ad::Node<T> normed = ad::layer_norm(summed, model.params.get("norm.gain"), model.params.get("norm.bias"));
    return ad::linear(ad::relu(normed), model.params.get("user_out.weight"),
                      model.params.get("user_out.bias"));
}

// f_a: ReLU(Linear(act counts)).
template <typename T>
ad::Node<T> act_feature(const StateNetModel<T>& model, const std::vector<T>& act_counts) {
    if (act_counts.size() != model.config.act_input_dim)
        throw ShapeError("act representation length " + std::to_string(act_counts.size()) +
                         " does not match act_input_dim " + std::to_string(model.config.act_input_dim));
    ad::Node<T> input = ad::Node<T>::constant(ad::Array<T>::vector(act_counts));
    return ad::relu(ad::linear(input, model.params.get("act.weight"), model.params.get("act.bias")));
}

// f_s: ReLU(Linear(slot phrase vector)), width 2 * receptor_width.
template <typename T>
ad::Node<T> slot_feature(const StateNetModel<T>& model, const std::vector<T>& slot_vector) {
    if (slot_vector.size() != model.config.embedding_dim)
        throw ShapeError("slot vector length " + std::to_string(slot_vector.size()) +
                         " does not match embedding_dim " + std::to_string(model.config.embedding_dim));
    ad::Node<T> s = ad::Node<T>::constant(ad::Array<T>::vector(slot_vector));
    return ad::relu(ad::linear(s, model.params.get("slot.weight"), model.params.get("slot.bias")));
}

template <typename T>
ad::Node<T> slot_feature(const StateNetModel<T>& model, const EmbeddingTable<T>& table,
                         const std::string& slot_name, const AliasMap* aliases = nullptr) {
    if (slot_name.empty()) throw DataError("empty slot name");
    return slot_feature(model, table.phrase_vector(slot_name, aliases));
}

// i_s = f_s (x) (f_u (+) f_a): the slot feature gates the concatenated turn
// evidence elementwise.
template <typename T>
ad::Node<T> turn_feature(const ad::Node<T>& f_u, const ad::Node<T>& f_a, const ad::Node<T>& f_s) {
    if (f_s.value().numel() != f_u.value().numel() + f_a.value().numel())
        throw ShapeError("turn_feature: slot feature length " + std::to_string(f_s.value().numel()) +
                         " != user+act feature length " +
                         std::to_string(f_u.value().numel() + f_a.value().numel()));
    return ad::mul(f_s, ad::concat(f_u, f_a));
}

// One LSTM step then ReLU(Linear(h)): the fixed-length prediction vector,
// embedding_dim wide regardless of the value-set size.
template <typename T>
std::pair<ad::Node<T>, TrackerState<T>> predict_vector(const StateNetModel<T>& model,
                                                       const ad::Node<T>& turn_input,
                                                       const TrackerState<T>& state) {
    auto out = ad::lstm_cell(turn_input, state.hidden, state.cell, model.params.get("lstm.w_ih"),
                             model.params.get("lstm.w_hh"), model.params.get("lstm.bias"));
    ad::Node<T> prediction = ad::relu(
        ad::linear(out.hidden, model.params.get("output.weight"), model.params.get("output.bias")));
    return {prediction, TrackerState<T>{out.hidden, out.cell}};
}

// Phrase vectors for an ordered value list.
template <typename T>
std::vector<std::vector<T>> value_vectors(const EmbeddingTable<T>& table,
                                          const std::vector<std::string>& values,
                                          const AliasMap* aliases = nullptr) {
    std::vector<std::vector<T>> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(table.phrase_vector(v, aliases));
    return out;
}

// Candidate value vectors as reusable constant leaves (value sets are fixed
// within a dialogue; building the leaves once avoids re-copying every turn).
template <typename T>
std::vector<ad::Node<T>> value_nodes(const std::vector<std::vector<T>>& vectors) {
    std::vector<ad::Node<T>> nodes;
    nodes.reserve(vectors.size());
    for (const auto& v : vectors) nodes.push_back(ad::Node<T>::constant(ad::Array<T>::vector(v)));
    return nodes;
}

// One negative 2-norm distance logit per candidate value, in value-set order.
template <typename T>
ad::Node<T> value_logits(const ad::Node<T>& prediction, const std::vector<ad::Node<T>>& candidates) {
    if (candidates.empty()) throw DataError("value set is empty");
    std::vector<ad::Node<T>> distances;
    distances.reserve(candidates.size());
    for (const auto& v : candidates) distances.push_back(ad::neg_l2_distance(prediction, v));
    return ad::concat(distances);
}

template <typename T>
ad::Node<T> value_logits(const ad::Node<T>& prediction, const std::vector<std::vector<T>>& vectors) {
    return value_logits(prediction, value_nodes(vectors));
}

// Probability distribution over the current value set.
template <typename T>
struct SlotDistribution {
    std::vector<std::string> values;
    std::vector<T> probabilities;

    // Ties break to the lowest index in the ontology's ordered list.
    std::size_t argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < probabilities.size(); ++i)
            if (probabilities[i] > probabilities[best]) best = i;
        return best;
    }

    const std::string& predicted() const { return values[argmax()]; }
};

template <typename T>
SlotDistribution<T> value_distribution(const ad::Node<T>& prediction,
                                       const std::vector<std::string>& values,
                                       const std::vector<ad::Node<T>>& candidates) {
    if (values.empty()) throw DataError("value set is empty");
    bool has_none = false;
    for (const auto& v : values)
        if (v == "none") { has_none = true; break; }
    if (!has_none) throw DataError("value set is missing the \"none\" value");
    ad::Node<T> logits = value_logits(prediction, candidates);
    return SlotDistribution<T>{values, ad::softmax_values(logits.value().data)};
}

template <typename T>
SlotDistribution<T> value_distribution(const ad::Node<T>& prediction,
                                       const std::vector<std::string>& values,
                                       const std::vector<std::vector<T>>& vectors) {
    return value_distribution(prediction, values, value_nodes(vectors));
}

// Per-turn featurization shared across slots: the user and act features do
// not depend on the slot, so one graph node of each serves every slot branch.
template <typename T>
struct TurnContext {
    ad::Node<T> f_u;
    ad::Node<T> f_a;
};

template <typename T>
TurnContext<T> make_turn_context(const StateNetModel<T>& model, const Turn& turn,
                                 const EmbeddingTable<T>& table) {
    const auto hyps = prepared_hypotheses(turn, model.config.asr_best_list_size);
    const auto weighted = weighted_word_vectors(hyps, table);
    const auto rep = ngram_utterance_rep(weighted, model.config.utterance_gram_order,
                                         model.config.embedding_dim);
    return TurnContext<T>{user_feature(model, rep),
                          act_feature(model, act_representation<T>(turn, model.vocabulary))};
}

// Full single-turn, single-slot composition. Returns the distribution over
// the given value set and the advanced recurrent state.
template <typename T>
std::pair<SlotDistribution<T>, TrackerState<T>> track_turn(const StateNetModel<T>& model,
                                                           const Turn& turn,
                                                           const std::string& slot_name,
                                                           const std::vector<std::string>& value_set,
                                                           const TrackerState<T>& state,
                                                           const EmbeddingTable<T>& table,
                                                           const AliasMap* aliases = nullptr) {
    TurnContext<T> ctx = make_turn_context(model, turn, table);
    ad::Node<T> f_s = slot_feature(model, table, slot_name, aliases);
    ad::Node<T> i_s = turn_feature(ctx.f_u, ctx.f_a, f_s);
    auto [prediction, new_state] = predict_vector(model, i_s, state);
    auto dist = value_distribution(prediction, value_set, value_vectors(table, value_set, aliases));
    return {std::move(dist), std::move(new_state)};
}

} // namespace statenet
