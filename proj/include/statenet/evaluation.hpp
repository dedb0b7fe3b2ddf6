#pragma once

#include <functional>
#include <stdexcept>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statenet/checkpoint.hpp"
#include "statenet/model.hpp"

namespace statenet {

struct DialogueOutcome {
    std::string id;
    std::size_t turn_count = 0;
    std::size_t joint_correct = 0;
};

// Per-slot and joint goal accuracy over a labeled corpus. A turn is jointly
// correct iff every tracked slot's argmax equals its gold label; accuracies
// are fractions of turns.
struct EvalReport {
    std::map<std::string, double> per_slot_accuracy;
    double joint_accuracy = 0;
    std::size_t turn_count = 0;
    std::optional<std::vector<DialogueOutcome>> per_dialogue;

    nlohmann::json to_json() const {
        nlohmann::json j{{"per_slot_accuracy", per_slot_accuracy},
                         {"joint_accuracy", joint_accuracy},
                         {"turn_count", turn_count}};
        if (per_dialogue) {
            nlohmann::json breakdown = nlohmann::json::array();
            for (const auto& d : *per_dialogue)
                breakdown.push_back({{"id", d.id},
                                     {"turn_count", d.turn_count},
                                     {"joint_correct", d.joint_correct}});
            j["per_dialogue"] = std::move(breakdown);
        }
        return j;
    }
};

// Row sink for the optional per-turn dump.
struct PerTurnRecord {
    const std::string& dialogue_id;
    std::size_t turn_index;
    const std::string& slot;
    const std::string& gold;
    const std::string& predicted;
    double probability;
};
using PerTurnSink = std::function<void(const PerTurnRecord&)>;

struct EvalOptions {
    bool per_dialogue_breakdown = false;
    PerTurnSink per_turn;
};

// Which model tracks which slot. Shared-parameter evaluation maps every slot
// to the same model; the separate regime maps each slot to its own.
template <typename T>
using SlotModels = std::map<std::string, const StateNetModel<T>*>;

template <typename T>
EvalReport evaluate(const std::vector<Dialogue>& dialogues, const SlotModels<T>& slot_models,
                    const Ontology& ontology, const EmbeddingTable<T>& table,
                    const AliasMap* aliases = nullptr, const EvalOptions& options = {}) {
    if (slot_models.empty()) throw ConfigError("evaluate: no slots to track");
    for (const auto& [slot, model] : slot_models) {
        if (!ontology.has(slot)) throw DataError("evaluate: slot '" + slot + "' not in the ontology");
        if (model->config.embedding_dim != table.dimension())
            throw ConfigError("evaluate: model embedding_dim " +
                              std::to_string(model->config.embedding_dim) +
                              " does not match table dimension " + std::to_string(table.dimension()));
    }

    ad::NoGradGuard no_grad;

    // Slot-constant pieces: candidate vectors and the gated slot feature.
    struct SlotSetup {
        const StateNetModel<T>* model;
        std::vector<std::string> values;
        std::vector<ad::Node<T>> candidates;
        ad::Array<T> slot_feature_value;
    };
    std::map<std::string, SlotSetup> setups;
    for (const auto& [slot, model] : slot_models) {
        SlotSetup s;
        s.model = model;
        s.values = ontology.values(slot);
        s.candidates = value_nodes(value_vectors(table, s.values, aliases));
        s.slot_feature_value = slot_feature(*model, table, slot, aliases).value();
        setups.emplace(slot, std::move(s));
    }

    EvalReport report;
    if (options.per_dialogue_breakdown) report.per_dialogue.emplace();
    std::map<std::string, std::size_t> slot_correct;
    std::size_t joint_correct = 0;
    std::size_t turns = 0;

    // TODO: dialogues are independent; a worker pool with an ordered merge
    // would cut per-epoch validation time on large corpora.
    for (const auto& dialogue : dialogues) {
        std::map<std::string, TrackerState<T>> states;
        for (const auto& [slot, setup] : setups)
            states.emplace(slot, TrackerState<T>::initial(setup.model->config));
        DialogueOutcome outcome{dialogue.id, 0, 0};

        for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
            const Turn& turn = dialogue.turns[t];
            // One turn context per distinct model (all slots share it in the
            // shared-parameter regime).
            std::map<const StateNetModel<T>*, TurnContext<T>> contexts;
            bool all_match = true;
            for (auto& [slot, setup] : setups) {
                auto ctx_it = contexts.find(setup.model);
                if (ctx_it == contexts.end())
                    ctx_it = contexts.emplace(setup.model,
                                              make_turn_context(*setup.model, turn, table)).first;
                ad::Node<T> f_s = ad::Node<T>::constant(setup.slot_feature_value);
                ad::Node<T> i_s = turn_feature(ctx_it->second.f_u, ctx_it->second.f_a, f_s);
                auto [prediction, new_state] = predict_vector(*setup.model, i_s, states.at(slot));
                states.at(slot) = new_state;
                auto dist = value_distribution(prediction, setup.values, setup.candidates);
                const std::size_t pick = dist.argmax();

                auto gold_it = turn.gold_goal.find(slot);
                if (gold_it == turn.gold_goal.end())
                    throw DataError("dialogue '" + dialogue.id + "' turn " + std::to_string(t) +
                                    ": missing gold label for slot '" + slot + "'");
                const bool correct = dist.values[pick] == gold_it->second;
                if (correct) ++slot_correct[slot];
                all_match = all_match && correct;

                if (options.per_turn)
                    options.per_turn(PerTurnRecord{dialogue.id, t, slot, gold_it->second,
                                                   dist.values[pick],
                                                   static_cast<double>(dist.probabilities[pick])});
            }
            ++turns;
            ++outcome.turn_count;
            if (all_match) {
                ++joint_correct;
                ++outcome.joint_correct;
            }
        }
        if (report.per_dialogue) report.per_dialogue->push_back(std::move(outcome));
    }

    report.turn_count = turns;
    report.joint_accuracy = turns ? static_cast<double>(joint_correct) / static_cast<double>(turns) : 0;
    for (const auto& [slot, setup] : setups) {
        const std::size_t correct = slot_correct.count(slot) ? slot_correct.at(slot) : 0;
        report.per_slot_accuracy[slot] =
            turns ? static_cast<double>(correct) / static_cast<double>(turns) : 0;
    }
    // Conjunction bound: a jointly correct turn is correct for every slot.
    for (const auto& [slot, acc] : report.per_slot_accuracy)
        if (report.joint_accuracy > acc + 1e-12)
            throw std::logic_error("evaluate: joint accuracy exceeds slot '" + slot +
                                   "' accuracy; counting is broken");
    return report;
}

// Convenience: one shared model tracking the given slots.
template <typename T>
EvalReport evaluate(const std::vector<Dialogue>& dialogues, const StateNetModel<T>& model,
                    const std::vector<std::string>& slots, const Ontology& ontology,
                    const EmbeddingTable<T>& table, const AliasMap* aliases = nullptr,
                    const EvalOptions& options = {}) {
    SlotModels<T> slot_models;
    for (const auto& slot : slots) slot_models[slot] = &model;
    return evaluate(dialogues, slot_models, ontology, table, aliases, options);
}

// Metric deltas (b minus a) for regression tracking across runs. Reports must
// describe the same corpus and slot set.
struct ReportDelta {
    std::map<std::string, double> per_slot_delta;
    double joint_delta = 0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"per_slot_delta", per_slot_delta}, {"joint_delta", joint_delta}};
    }
};

inline ReportDelta compare_reports(const EvalReport& a, const EvalReport& b) {
    if (a.turn_count != b.turn_count)
        throw DataError("compare_reports: reports cover different corpora (turn counts " +
                        std::to_string(a.turn_count) + " vs " + std::to_string(b.turn_count) + ")");
    ReportDelta delta;
    for (const auto& [slot, acc] : a.per_slot_accuracy) {
        auto it = b.per_slot_accuracy.find(slot);
        if (it == b.per_slot_accuracy.end())
            throw DataError("compare_reports: slot '" + slot + "' missing from one report");
        delta.per_slot_delta[slot] = it->second - acc;
    }
    if (b.per_slot_accuracy.size() != a.per_slot_accuracy.size())
        throw DataError("compare_reports: reports track different slot sets");
    delta.joint_delta = b.joint_accuracy - a.joint_accuracy;
    return delta;
}

} // namespace statenet
