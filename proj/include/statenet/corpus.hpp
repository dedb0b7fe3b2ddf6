#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statenet/errors.hpp"
#include "statenet/text.hpp"

namespace statenet {

struct AsrHypothesis {
    std::string text;  // raw utterance; may be empty
    double score = 0;  // confidence, >= 0

    bool operator==(const AsrHypothesis&) const = default;
};

struct MachineAct {
    std::string act_type; // e.g. "request", "inform"
    std::optional<std::string> slot;
    std::optional<std::string> value;

    bool operator==(const MachineAct&) const = default;
};

struct Turn {
    std::vector<AsrHypothesis> asr;              // best first, at least one
    std::vector<MachineAct> acts;                // machine acts preceding the user turn
    std::map<std::string, std::string> gold_goal; // accumulated goal; empty when unlabeled

    bool operator==(const Turn&) const = default;
};

struct Dialogue {
    std::string id;
    std::vector<Turn> turns;

    bool operator==(const Dialogue&) const = default;
};

// Slot names with their ordered candidate value lists. Every list contains
// "none" exactly once; value sets may be swapped at inference time.
class Ontology {
public:
    Ontology() = default;

    void set_slot(const std::string& slot, std::vector<std::string> values) {
        validate_values(slot, values);
        slots_[slot] = std::move(values);
    }

    bool has(const std::string& slot) const { return slots_.count(slot) != 0; }

    const std::vector<std::string>& values(const std::string& slot) const {
        auto it = slots_.find(slot);
        if (it == slots_.end()) throw DataError("unknown slot: " + slot);
        return it->second;
    }

    std::size_t value_index(const std::string& slot, const std::string& value) const {
        const auto& vs = values(slot);
        for (std::size_t i = 0; i < vs.size(); ++i)
            if (vs[i] == value) return i;
        throw DataError("value '" + value + "' not in slot '" + slot + "' value set");
    }

    bool has_value(const std::string& slot, const std::string& value) const {
        const auto& vs = values(slot);
        for (const auto& v : vs)
            if (v == value) return true;
        return false;
    }

    std::vector<std::string> slot_names() const {
        std::vector<std::string> out;
        out.reserve(slots_.size());
        for (const auto& kv : slots_) out.push_back(kv.first);
        return out;
    }

    const std::map<std::string, std::vector<std::string>>& slots() const { return slots_; }
    std::size_t slot_count() const { return slots_.size(); }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [slot, values] : slots_) j[slot] = values;
        return j;
    }

    static Ontology from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw DataError("ontology must be a JSON object of slot -> value list");
        Ontology out;
        for (const auto& [slot, values] : j.items()) {
            if (!values.is_array()) throw DataError("ontology slot '" + slot + "' must map to an array");
            std::vector<std::string> list;
            for (const auto& v : values) {
                if (!v.is_string()) throw DataError("ontology slot '" + slot + "' has a non-string value");
                list.push_back(v.get<std::string>());
            }
            out.set_slot(slot, std::move(list));
        }
        return out;
    }

private:
    static void validate_values(const std::string& slot, const std::vector<std::string>& values) {
        std::size_t none_count = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] == "none") ++none_count;
            for (std::size_t j = i + 1; j < values.size(); ++j)
                if (values[i] == values[j])
                    throw DataError("slot '" + slot + "' has duplicate value '" + values[i] + "'");
        }
        if (none_count != 1)
            throw DataError("slot '" + slot + "' must contain the value \"none\" exactly once (found " +
                            std::to_string(none_count) + ")");
    }

    std::map<std::string, std::vector<std::string>> slots_;
};

struct Corpus {
    Ontology ontology;
    std::vector<Dialogue> dialogues;
};

// Scores scaled to sum to 1; an all-zero list gets uniform weights.
// Degenerate by construction (scores are validated non-negative at load).
inline std::vector<AsrHypothesis> normalize_scores(std::vector<AsrHypothesis> hypotheses) {
    double total = 0;
    for (const auto& h : hypotheses) total += h.score;
    if (total <= 0) {
        const double uniform = hypotheses.empty() ? 0.0 : 1.0 / static_cast<double>(hypotheses.size());
        for (auto& h : hypotheses) h.score = uniform;
    } else {
        for (auto& h : hypotheses) h.score /= total;
    }
    return hypotheses;
}

// Canonical flattening of a machine-act list: per act, the act type token,
// then the slot token if present, then the value tokens if present. All
// lowercased; multiword values contribute one token per word.
inline std::vector<std::string> serialize_machine_acts(const std::vector<MachineAct>& acts) {
    std::vector<std::string> tokens;
    for (const auto& act : acts) {
        for (auto& t : split_phrase_tokens(act.act_type)) tokens.push_back(std::move(t));
        if (act.slot)
            for (auto& t : split_phrase_tokens(*act.slot)) tokens.push_back(std::move(t));
        if (act.value)
            for (auto& t : split_phrase_tokens(*act.value)) tokens.push_back(std::move(t));
    }
    return tokens;
}

namespace detail {

inline std::string turn_context(const std::string& dialogue_id, std::size_t turn_index) {
    return "dialogue '" + dialogue_id + "' turn " + std::to_string(turn_index);
}

inline Turn parse_turn(const nlohmann::json& j, const std::string& dialogue_id, std::size_t turn_index,
                       const Ontology& ontology) {
    const std::string ctx = turn_context(dialogue_id, turn_index);
    if (!j.is_object()) throw DataError(ctx + ": turn must be an object");
    Turn turn;

    if (!j.contains("asr") || !j.at("asr").is_array() || j.at("asr").empty())
        throw DataError(ctx + ": turn needs a non-empty \"asr\" hypothesis list");
    for (const auto& h : j.at("asr")) {
        if (!h.is_object() || !h.contains("text") || !h.at("text").is_string() ||
            !h.contains("score") || !h.at("score").is_number())
            throw DataError(ctx + ": each asr hypothesis needs string \"text\" and numeric \"score\"");
        AsrHypothesis hyp{h.at("text").get<std::string>(), h.at("score").get<double>()};
        if (hyp.score < 0) throw DataError(ctx + ": negative asr score");
        turn.asr.push_back(std::move(hyp));
    }

    if (j.contains("acts")) {
        if (!j.at("acts").is_array()) throw DataError(ctx + ": \"acts\" must be an array");
        for (const auto& a : j.at("acts")) {
            if (!a.is_object() || !a.contains("type") || !a.at("type").is_string() ||
                a.at("type").get<std::string>().empty())
                throw DataError(ctx + ": each act needs a non-empty string \"type\"");
            MachineAct act;
            act.act_type = a.at("type").get<std::string>();
            if (a.contains("slot")) {
                if (!a.at("slot").is_string()) throw DataError(ctx + ": act \"slot\" must be a string");
                act.slot = a.at("slot").get<std::string>();
            }
            if (a.contains("value")) {
                if (!a.at("value").is_string()) throw DataError(ctx + ": act \"value\" must be a string");
                act.value = a.at("value").get<std::string>();
            }
            turn.acts.push_back(std::move(act));
        }
    }

    if (j.contains("goal")) {
        if (!j.at("goal").is_object()) throw DataError(ctx + ": \"goal\" must be an object");
        for (const auto& [slot, value] : j.at("goal").items()) {
            if (!value.is_string()) throw DataError(ctx + ": goal value for '" + slot + "' must be a string");
            if (!ontology.has(slot))
                throw DataError(ctx + ": goal slot '" + slot + "' not in the ontology");
            const std::string v = value.get<std::string>();
            if (!ontology.has_value(slot, v))
                throw DataError(ctx + ": goal value '" + v + "' not in slot '" + slot + "' value set");
            turn.gold_goal[slot] = v;
        }
        // Labeled turns track every ontology slot; unspecified slots are "none".
        for (const auto& slot : ontology.slot_names())
            turn.gold_goal.emplace(slot, "none");
    }

    return turn;
}

} // namespace detail

// Corpus JSON schema (exact field names):
// { "ontology": {slot: [values...]},
//   "dialogues": [ { "id": str,
//                    "turns": [ { "asr": [{"text": str, "score": number}...],
//                                 "acts": [{"type": str, "slot": str?, "value": str?}...],
//                                 "goal": {slot: value} } ] } ] }
inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corpus file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("ontology") || !j.contains("dialogues"))
        throw DataError("corpus file " + path + " needs top-level \"ontology\" and \"dialogues\"");

    Corpus corpus;
    corpus.ontology = Ontology::from_json(j.at("ontology"));

    if (!j.at("dialogues").is_array())
        throw DataError("corpus file " + path + ": \"dialogues\" must be an array");
    for (const auto& dj : j.at("dialogues")) {
        if (!dj.is_object() || !dj.contains("id") || !dj.at("id").is_string() ||
            dj.at("id").get<std::string>().empty())
            throw DataError("corpus file " + path + ": every dialogue needs a non-empty string \"id\"");
        Dialogue d;
        d.id = dj.at("id").get<std::string>();
        if (!dj.contains("turns") || !dj.at("turns").is_array() || dj.at("turns").empty())
            throw DataError("dialogue '" + d.id + "': needs a non-empty \"turns\" array");
        std::size_t turn_index = 0;
        for (const auto& tj : dj.at("turns"))
            d.turns.push_back(detail::parse_turn(tj, d.id, turn_index++, corpus.ontology));
        corpus.dialogues.push_back(std::move(d));
    }
    return corpus;
}

} // namespace statenet
