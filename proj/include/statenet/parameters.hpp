#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "statenet/graph.hpp"
#include "statenet/rng.hpp"

namespace statenet::ad {

namespace io {

// Little-endian fixed-width scalar I/O. Hosts here are little-endian
// (x86/aarch64); raw value bytes are written as-is for the chosen precision.
template <typename U>
void write_pod(std::ostream& os, U v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U read_pod(std::istream& is) {
    U v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(U));
    if (!is) throw DataError("parameter container: truncated stream");
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    const auto len = read_pod<std::uint32_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw DataError("parameter container: truncated string");
    return s;
}

} // namespace io

// All trainable arrays of one model: named nodes in a stable insertion order,
// plus per-entry first/second moment accumulators for the optimizers.
// Serialization covers the parameter values only (names, shapes, raw data) and
// round-trips byte-exactly; optimizer state is run-local.
template <typename T>
class ParameterSet {
public:
    struct Entry {
        std::string name;
        Node<T> node;
        Array<T> moment1; // RMSProp square accumulator / Adam first moment
        Array<T> moment2; // Adam second moment
        bool state_ready = false;
    };

    static constexpr std::uint32_t kFormatVersion = 1;
    static constexpr char kMagic[4] = {'S', 'N', 'P', 'S'};

    Node<T> add(const std::string& name, Array<T> init) {
        if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        Entry e;
        e.name = name;
        e.node = Node<T>::parameter(std::move(init));
        index_[name] = entries_.size();
        entries_.push_back(std::move(e));
        return entries_.back().node;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const Node<T>& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return entries_[it->second].node;
    }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.node.value().numel();
        return n;
    }

    void zero_gradients() {
        for (auto& e : entries_) e.node.zero_grad();
    }

    // Adam bias-correction step counter; shared by all entries of the set.
    std::uint64_t adam_steps = 0;

    void save(std::ostream& os) const {
        os.write(kMagic, 4);
        io::write_pod<std::uint32_t>(os, kFormatVersion);
        io::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(sizeof(T)));
        io::write_pod<std::uint64_t>(os, entries_.size());
        for (const auto& e : entries_) {
            io::write_string(os, e.name);
            const auto& v = e.node.value();
            io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(v.rank()));
            for (std::size_t d : v.shape) io::write_pod<std::uint64_t>(os, d);
            os.write(reinterpret_cast<const char*>(v.data.data()),
                     static_cast<std::streamsize>(v.data.size() * sizeof(T)));
        }
        if (!os) throw DataError("parameter container: write failed");
    }

    static ParameterSet load(std::istream& is) {
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, kMagic, 4) != 0)
            throw DataError("parameter container: bad magic");
        const auto version = io::read_pod<std::uint32_t>(is);
        if (version != kFormatVersion)
            throw DataError("parameter container: unsupported format version " + std::to_string(version));
        const auto precision = io::read_pod<std::uint8_t>(is);
        if (precision != sizeof(T))
            throw DataError("parameter container: precision tag " + std::to_string(precision) +
                            " bytes does not match build precision " + std::to_string(sizeof(T)));
        const auto count = io::read_pod<std::uint64_t>(is);
        ParameterSet out;
        for (std::uint64_t i = 0; i < count; ++i) {
            std::string name = io::read_string(is);
            const auto rank = io::read_pod<std::uint32_t>(is);
            Shape shape(rank);
            for (auto& d : shape) d = static_cast<std::size_t>(io::read_pod<std::uint64_t>(is));
            Array<T> values(shape);
            is.read(reinterpret_cast<char*>(values.data.data()),
                    static_cast<std::streamsize>(values.data.size() * sizeof(T)));
            if (!is) throw DataError("parameter container: truncated values for '" + name + "'");
            out.add(name, std::move(values));
        }
        return out;
    }

    // Overwrites this set's values with another's; names and shapes must match
    // exactly (pre-training initialization path).
    void copy_values_from(const ParameterSet& other) {
        if (other.size() != size())
            throw ConfigError("parameter sets differ in entry count");
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& src = other.entries_[i];
            auto& dst = entries_[i];
            if (src.name != dst.name || !src.node.value().same_shape(dst.node.value()))
                throw ConfigError("parameter mismatch at '" + dst.name + "'");
            dst.node.value().data = src.node.value().data;
        }
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Fills an array with draws uniform in [lo, hi), row-major order.
template <typename T>
void fill_uniform(Array<T>& a, Rng& rng, double lo, double hi) {
    for (T& v : a.data) v = static_cast<T>(rng.uniform(lo, hi));
}

} // namespace statenet::ad
