#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "statenet/errors.hpp"
#include "statenet/text.hpp"

namespace statenet {

// Slot-token aliases, e.g. "pricerange" -> "price range", for tokens that no
// embedding vocabulary contains. File format: one "token<TAB>replacement
// phrase" per line; '#' lines and blank lines are skipped.
using AliasMap = std::unordered_map<std::string, std::string>;

inline AliasMap load_alias_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open alias file: " + path);
    AliasMap out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("alias file line missing tab separator: '" + line + "'");
        out[to_lower(line.substr(0, tab))] = line.substr(tab + 1);
    }
    return out;
}

// Immutable word-vector table, the sole source of semantics for words, slots,
// and values. Never trained or mutated after load; unknown words resolve to
// the zero vector and bump a per-run counter.
template <typename T>
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(const EmbeddingTable& other)
        : dim_(other.dim_), entries_(other.entries_), oov_lookups_(other.oov_lookups_.load()) {}
    EmbeddingTable(EmbeddingTable&& other) noexcept
        : dim_(other.dim_), entries_(std::move(other.entries_)), oov_lookups_(other.oov_lookups_.load()) {}
    EmbeddingTable& operator=(const EmbeddingTable& other) {
        dim_ = other.dim_;
        entries_ = other.entries_;
        oov_lookups_.store(other.oov_lookups_.load());
        return *this;
    }
    EmbeddingTable& operator=(EmbeddingTable&& other) noexcept {
        dim_ = other.dim_;
        entries_ = std::move(other.entries_);
        oov_lookups_.store(other.oov_lookups_.load());
        return *this;
    }

    std::size_t dimension() const { return dim_; }
    std::size_t size() const { return entries_.size(); }

    bool contains(std::string_view word) const { return entries_.count(to_lower(word)) != 0; }

    // Stored vector after lowercasing, or the zero vector when absent.
    std::vector<T> word_vector(std::string_view word) const {
        auto it = entries_.find(to_lower(word));
        if (it == entries_.end()) {
            oov_lookups_.fetch_add(1, std::memory_order_relaxed);
            return std::vector<T>(dim_, T(0));
        }
        return it->second;
    }

    // Elementwise sum of the phrase's token vectors. Tokens split on
    // whitespace/underscore/hyphen; aliases (when given) replace a whole token
    // with a substitute phrase before lookup.
    std::vector<T> phrase_vector(std::string_view phrase, const AliasMap* aliases = nullptr) const {
        std::vector<std::string> tokens = split_phrase_tokens(phrase);
        if (tokens.empty()) throw DataError("phrase_vector: empty phrase '" + std::string(phrase) + "'");
        if (aliases) {
            std::vector<std::string> expanded;
            for (const auto& tok : tokens) {
                auto it = aliases->find(tok);
                if (it == aliases->end()) {
                    expanded.push_back(tok);
                } else {
                    for (auto& sub : split_phrase_tokens(it->second)) expanded.push_back(std::move(sub));
                }
            }
            tokens = std::move(expanded);
        }
        std::vector<T> sum(dim_, T(0));
        for (const auto& tok : tokens) {
            const std::vector<T> v = word_vector(tok);
            for (std::size_t i = 0; i < dim_; ++i) sum[i] += v[i];
        }
        return sum;
    }

    std::uint64_t oov_lookups() const { return oov_lookups_.load(std::memory_order_relaxed); }
    void reset_oov_counter() const { oov_lookups_.store(0, std::memory_order_relaxed); }

    // FNV-1a over dimension and entry bytes in sorted-word order; used to
    // assert that training never touches the table.
    std::uint64_t content_hash() const {
        std::vector<const std::pair<const std::string, std::vector<T>>*> sorted;
        sorted.reserve(entries_.size());
        for (const auto& kv : entries_) sorted.push_back(&kv);
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto* a, const auto* b) { return a->first < b->first; });
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](const void* bytes, std::size_t n) {
            const auto* p = static_cast<const unsigned char*>(bytes);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= p[i];
                h *= 1099511628211ULL;
            }
        };
        mix(&dim_, sizeof(dim_));
        for (const auto* kv : sorted) {
            mix(kv->first.data(), kv->first.size());
            mix(kv->second.data(), kv->second.size() * sizeof(T));
        }
        return h;
    }

    // Word-vector text format: one entry per line, token then N_w
    // whitespace-separated decimal floats. Duplicate words keep the first
    // occurrence (warned); inconsistent dimensions are a hard error.
    static EmbeddingTable load(const std::string& path, std::size_t expected_dim = 0) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open embedding file: " + path);
        EmbeddingTable table;
        std::string line;
        std::size_t line_no = 0;
        std::size_t duplicates = 0;
        std::string first_duplicate;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::size_t pos = 0;
            const std::string word = to_lower(next_field(line, pos));
            if (word.empty()) continue;
            std::vector<T> values;
            values.reserve(table.dim_ ? table.dim_ : 64);
            while (true) {
                std::string_view field = next_field(line, pos);
                if (field.empty()) break;
                values.push_back(parse_value(field, path, line_no));
            }
            if (values.empty())
                throw DataError(path + ":" + std::to_string(line_no) + ": no vector values for '" + word + "'");
            if (expected_dim && values.size() != expected_dim)
                throw DataError(path + ":" + std::to_string(line_no) + ": vector of dimension " +
                                std::to_string(values.size()) + ", expected " + std::to_string(expected_dim));
            if (table.dim_ == 0) {
                table.dim_ = values.size();
            } else if (values.size() != table.dim_) {
                throw DataError(path + ":" + std::to_string(line_no) + ": vector of dimension " +
                                std::to_string(values.size()) + " inconsistent with earlier dimension " +
                                std::to_string(table.dim_));
            }
            auto [it, inserted] = table.entries_.emplace(word, std::move(values));
            if (!inserted) {
                if (duplicates == 0) first_duplicate = word;
                ++duplicates;
            }
        }
        if (table.entries_.empty())
            throw DataError("embedding file has no entries: " + path);
        if (duplicates)
            std::cerr << "warning: " << path << ": " << duplicates
                      << " duplicate word(s) kept first occurrence (e.g. '" << first_duplicate << "')\n";
        return table;
    }

    // Synthetic tables for tests and tools.
    static EmbeddingTable from_entries(std::size_t dim,
                                       std::vector<std::pair<std::string, std::vector<T>>> entries) {
        if (dim == 0 || entries.empty()) throw DataError("embedding table must be non-empty");
        EmbeddingTable table;
        table.dim_ = dim;
        for (auto& [word, values] : entries) {
            if (values.size() != dim)
                throw DataError("embedding entry '" + word + "' has dimension " +
                                std::to_string(values.size()) + ", expected " + std::to_string(dim));
            table.entries_.emplace(to_lower(word), std::move(values));
        }
        return table;
    }

private:
    static std::string_view next_field(const std::string& line, std::size_t& pos) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
        const std::size_t start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') ++pos;
        return std::string_view(line).substr(start, pos - start);
    }

    static T parse_value(std::string_view field, const std::string& path, std::size_t line_no) {
        double v = 0;
        const auto* begin = field.data();
        const auto* end = field.data() + field.size();
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc() || ptr != end)
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed number '" +
                            std::string(field) + "'");
        return static_cast<T>(v);
    }

    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::vector<T>> entries_;
    mutable std::atomic<std::uint64_t> oov_lookups_{0};
};

} // namespace statenet
