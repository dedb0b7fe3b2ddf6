#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "statenet/model.hpp"
#include "statenet/parameters.hpp"

namespace statenet {

// Checkpoint container: a small header, a JSON metadata blob (model config +
// frozen act vocabulary), then the parameter container. Everything a tracker
// needs to run; nothing about the training run that produced it.
//
//   magic   "SNCK"
//   u32     format version (1)
//   u8      precision tag (bytes per scalar: 4 or 8)
//   u64     metadata length, followed by that many JSON bytes
//   ...     parameter container (see ParameterSet::save)
namespace ckpt {
inline constexpr char kMagic[4] = {'S', 'N', 'C', 'K'};
inline constexpr std::uint32_t kFormatVersion = 1;
} // namespace ckpt

template <typename T>
void save_checkpoint(std::ostream& os, const StateNetModel<T>& model) {
    os.write(ckpt::kMagic, 4);
    ad::io::write_pod<std::uint32_t>(os, ckpt::kFormatVersion);
    ad::io::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(sizeof(T)));
    const nlohmann::json meta{{"model", model.config.to_json()},
                              {"act_vocabulary", model.vocabulary.to_json()}};
    const std::string meta_str = meta.dump();
    ad::io::write_pod<std::uint64_t>(os, meta_str.size());
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    model.params.save(os);
    if (!os) throw DataError("checkpoint: write failed");
}

template <typename T>
void save_checkpoint(const std::string& path, const StateNetModel<T>& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    save_checkpoint(os, model);
}

namespace detail {
inline nlohmann::json read_checkpoint_header(std::istream& is, std::uint8_t& precision) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, ckpt::kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic (not a checkpoint file?)");
    const auto version = ad::io::read_pod<std::uint32_t>(is);
    if (version != ckpt::kFormatVersion)
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    precision = ad::io::read_pod<std::uint8_t>(is);
    const auto meta_len = ad::io::read_pod<std::uint64_t>(is);
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!is) throw DataError("checkpoint: truncated metadata");
    try {
        return nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: malformed metadata: ") + e.what());
    }
}
} // namespace detail

template <typename T>
StateNetModel<T> load_checkpoint(std::istream& is) {
    std::uint8_t precision = 0;
    const nlohmann::json meta = detail::read_checkpoint_header(is, precision);
    if (precision != sizeof(T))
        throw DataError("checkpoint: precision tag " + std::to_string(precision) +
                        " bytes does not match build precision " + std::to_string(sizeof(T)));
    if (!meta.contains("model") || !meta.contains("act_vocabulary"))
        throw DataError("checkpoint: metadata missing \"model\" or \"act_vocabulary\"");
    return StateNetModel<T>::from_parts(ModelConfig::from_json(meta.at("model")),
                                        ActVocabulary::from_json(meta.at("act_vocabulary")),
                                        ad::ParameterSet<T>::load(is));
}

template <typename T>
StateNetModel<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    return load_checkpoint<T>(is);
}

// Precision-agnostic summary (names, shapes, counts) for inspection tooling.
inline nlohmann::json checkpoint_summary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    std::uint8_t precision = 0;
    nlohmann::json meta = detail::read_checkpoint_header(is, precision);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, ad::ParameterSet<float>::kMagic, 4) != 0)
        throw DataError("checkpoint: bad parameter container magic");
    ad::io::read_pod<std::uint32_t>(is); // container version
    ad::io::read_pod<std::uint8_t>(is);  // container precision (matches header)
    const auto count = ad::io::read_pod<std::uint64_t>(is);
    nlohmann::json params = nlohmann::json::array();
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = ad::io::read_string(is);
        const auto rank = ad::io::read_pod<std::uint32_t>(is);
        std::vector<std::uint64_t> shape(rank);
        std::uint64_t numel = 1;
        for (auto& d : shape) {
            d = ad::io::read_pod<std::uint64_t>(is);
            numel *= d;
        }
        is.seekg(static_cast<std::streamoff>(numel * precision), std::ios::cur);
        if (!is) throw DataError("checkpoint: truncated parameter data");
        params.push_back({{"name", name}, {"shape", shape}, {"count", numel}});
        total += numel;
    }
    return nlohmann::json{{"format_version", ckpt::kFormatVersion},
                          {"precision_bytes", precision},
                          {"metadata", std::move(meta)},
                          {"parameters", std::move(params)},
                          {"total_parameter_count", total}};
}

} // namespace statenet
