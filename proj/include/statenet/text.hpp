#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace statenet {

// ASCII lowercasing; the target corpora are ASCII transcripts.
inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Tokens for slot names, values, and alias phrases: split on whitespace,
// underscore, and hyphen; lowercase.
inline std::vector<std::string> split_phrase_tokens(std::string_view phrase) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : phrase) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '_' || ch == '-') {
            if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// Utterance tokens: lowercase, punctuation stripped, whitespace split.
// Apostrophes are removed in place ("don't" -> "dont"); other punctuation
// separates tokens ("cheap,good" -> "cheap", "good").
inline std::vector<std::string> tokenize_utterance(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (std::isalnum(u)) {
            current.push_back(static_cast<char>(std::tolower(u)));
        } else if (ch == '\'') {
            continue;
        } else {
            if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

} // namespace statenet
