#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "statenet/corpus.hpp"
#include "statenet/embeddings.hpp"
#include "statenet/errors.hpp"
#include "statenet/text.hpp"

namespace statenet {

// Confidence-weighted word vectors of an m-best list. Output length is the
// longest hypothesis's token count; position i sums score * word_vector over
// the hypotheses, with shorter hypotheses contributing zero vectors at padded
// positions. Scores must already be normalized.
template <typename T>
std::vector<std::vector<T>> weighted_word_vectors(const std::vector<AsrHypothesis>& hypotheses,
                                                  const EmbeddingTable<T>& table) {
    std::vector<std::vector<std::string>> token_lists;
    std::size_t longest = 0;
    token_lists.reserve(hypotheses.size());
    for (const auto& h : hypotheses) {
        token_lists.push_back(tokenize_utterance(h.text));
        longest = std::max(longest, token_lists.back().size());
    }
    std::vector<std::vector<T>> weighted(longest, std::vector<T>(table.dimension(), T(0)));
    for (std::size_t j = 0; j < hypotheses.size(); ++j) {
        const T score = static_cast<T>(hypotheses[j].score);
        for (std::size_t i = 0; i < token_lists[j].size(); ++i) {
            const std::vector<T> v = table.word_vector(token_lists[j][i]);
            for (std::size_t d = 0; d < v.size(); ++d) weighted[i][d] += score * v[d];
        }
    }
    return weighted;
}

// Per-gram utterance representation: entry k (1-based) holds the sum over all
// contiguous k-windows of the concatenated weighted word vectors, length
// k * word_dim.
template <typename T>
struct UtteranceRepresentation {
    std::size_t max_gram = 0;
    std::size_t word_dim = 0;
    std::vector<std::vector<T>> per_gram; // index k-1

    const std::vector<T>& gram(std::size_t k) const { return per_gram.at(k - 1); }
};

// If the utterance is shorter than k, the vector list is right-padded with
// zero vectors so exactly one k-gram window exists.
template <typename T>
UtteranceRepresentation<T> ngram_utterance_rep(const std::vector<std::vector<T>>& weighted,
                                               std::size_t max_gram, std::size_t word_dim) {
    if (max_gram == 0) throw ConfigError("utterance gram order must be >= 1");
    UtteranceRepresentation<T> rep;
    rep.max_gram = max_gram;
    rep.word_dim = word_dim;
    rep.per_gram.reserve(max_gram);
    for (std::size_t k = 1; k <= max_gram; ++k) {
        const std::size_t window_count = weighted.size() >= k ? weighted.size() - k + 1 : 1;
        std::vector<T> sum(k * word_dim, T(0));
        for (std::size_t start = 0; start < window_count; ++start) {
            for (std::size_t offset = 0; offset < k; ++offset) {
                const std::size_t pos = start + offset;
                if (pos >= weighted.size()) break; // zero padding beyond the utterance
                const auto& v = weighted[pos];
                for (std::size_t d = 0; d < word_dim; ++d)
                    sum[offset * word_dim + d] += v[d];
            }
        }
        rep.per_gram.push_back(std::move(sum));
    }
    return rep;
}

// N-gram vocabulary harvested from the training machine acts, one sorted
// tuple list per order. Built once from the training split, frozen afterward
// (it is part of the model's input contract and rides in the checkpoint).
class ActVocabulary {
public:
    ActVocabulary() = default;

    static ActVocabulary build(const std::vector<Dialogue>& training_dialogues, std::size_t max_order) {
        if (max_order == 0) throw ConfigError("act gram order must be >= 1");
        if (training_dialogues.empty()) throw DataError("cannot build act vocabulary from an empty training set");
        std::vector<std::set<std::vector<std::string>>> sets(max_order);
        for (const auto& d : training_dialogues) {
            for (const auto& turn : d.turns) {
                const std::vector<std::string> tokens = serialize_machine_acts(turn.acts);
                for (std::size_t order = 1; order <= max_order; ++order) {
                    if (tokens.size() < order) break;
                    for (std::size_t i = 0; i + order <= tokens.size(); ++i)
                        sets[order - 1].insert(
                            std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + order));
                }
            }
        }
        ActVocabulary vocab;
        vocab.per_order_.reserve(max_order);
        for (auto& s : sets)
            vocab.per_order_.emplace_back(s.begin(), s.end());
        vocab.rebuild_index();
        return vocab;
    }

    std::size_t order_count() const { return per_order_.size(); }
    std::size_t total_size() const { return total_; }

    const std::vector<std::vector<std::string>>& order(std::size_t j) const {
        return per_order_.at(j - 1);
    }

    // Global index of a known n-gram, or npos when unseen.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t find(const std::vector<std::string>& gram) const {
        auto it = index_.find(gram);
        return it == index_.end() ? npos : it->second;
    }

    nlohmann::json to_json() const {
        nlohmann::json orders = nlohmann::json::array();
        for (const auto& list : per_order_) orders.push_back(list);
        return nlohmann::json{{"orders", orders}};
    }

    static ActVocabulary from_json(const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("orders") || !j.at("orders").is_array())
            throw DataError("act vocabulary JSON needs an \"orders\" array");
        ActVocabulary vocab;
        for (const auto& list : j.at("orders"))
            vocab.per_order_.push_back(list.get<std::vector<std::vector<std::string>>>());
        vocab.rebuild_index();
        return vocab;
    }

    bool operator==(const ActVocabulary& other) const { return per_order_ == other.per_order_; }

private:
    void rebuild_index() {
        index_.clear();
        total_ = 0;
        for (const auto& list : per_order_)
            for (const auto& gram : list) index_.emplace(gram, total_++);
    }

    std::vector<std::vector<std::vector<std::string>>> per_order_; // [order-1] -> sorted tuples
    std::map<std::vector<std::string>, std::size_t> index_;        // tuple -> global index
    std::size_t total_ = 0;
};

// Bag-of-n-grams counts over the turn's serialized machine acts. Length is
// fixed by the frozen vocabulary; n-grams unseen in training are dropped.
template <typename T>
std::vector<T> act_representation(const Turn& turn, const ActVocabulary& vocab) {
    std::vector<T> counts(vocab.total_size(), T(0));
    const std::vector<std::string> tokens = serialize_machine_acts(turn.acts);
    for (std::size_t order = 1; order <= vocab.order_count(); ++order) {
        if (tokens.size() < order) break;
        std::vector<std::string> gram(order);
        for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
            gram.assign(tokens.begin() + i, tokens.begin() + i + order);
            const std::size_t idx = vocab.find(gram);
            if (idx != ActVocabulary::npos) counts[idx] += T(1);
        }
    }
    return counts;
}

} // namespace statenet
