#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddf/params.hpp"

namespace ddf {

// Versioned binary container: magic, format version, config as a UTF-8
// key=value block, seed, per-epoch loss history, per-parameter records
// (name length, name, dim count, dims, 64-bit little-endian floats), and a
// trailing 64-bit FNV-1a checksum of all preceding bytes. Every integer and
// float is written little-endian regardless of host order, so files are
// byte-identical across platforms.
inline constexpr char kCheckpointMagic[8] = {'D', 'D', 'F', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointParam {
    std::string name;
    std::vector<int> dims;
    std::vector<double> values;
};

struct CheckpointData {
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::vector<std::pair<double, double>> history;  // (train loss, val loss) per epoch
    std::vector<CheckpointParam> params;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: file structure is corrupt");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

inline std::string checkpoint_serialize(const CheckpointData& data) {
    std::string out;
    out.append(kCheckpointMagic, 8);
    detail::put_u32(out, kCheckpointVersion);

    std::string config_block;
    for (const auto& [k, v] : data.config) {
        if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos || v.find('\n') != std::string::npos) {
            throw std::runtime_error("checkpoint: config keys/values must not contain '=' or newlines");
        }
        config_block += k + "=" + v + "\n";
    }
    detail::put_u64(out, config_block.size());
    out += config_block;

    detail::put_u64(out, data.seed);
    detail::put_u32(out, static_cast<std::uint32_t>(data.history.size()));
    for (const auto& [train, val] : data.history) {
        detail::put_f64(out, train);
        detail::put_f64(out, val);
    }

    detail::put_u32(out, static_cast<std::uint32_t>(data.params.size()));
    for (const CheckpointParam& p : data.params) {
        detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        detail::put_u32(out, static_cast<std::uint32_t>(p.dims.size()));
        std::size_t expect = 1;
        for (int d : p.dims) {
            detail::put_u32(out, static_cast<std::uint32_t>(d));
            expect *= static_cast<std::size_t>(d);
        }
        if (expect != p.values.size()) throw std::runtime_error("checkpoint: dims of " + p.name + " do not match value count");
        for (double v : p.values) detail::put_f64(out, v);
    }

    detail::put_u64(out, detail::fnv1a(out));
    return out;
}

inline void checkpoint_save(const std::string& path, const CheckpointData& data) {
    const std::string bytes = checkpoint_serialize(data);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline CheckpointData checkpoint_parse(const std::string& buf) {
    if (buf.size() < 8 + 4 + 8 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0) {
        throw std::runtime_error("checkpoint: not a checkpoint file");
    }
    // checksum first, so truncation or bit damage anywhere is caught before parsing
    const std::string body = buf.substr(0, buf.size() - 8);
    detail::ByteReader tail{buf, buf.size() - 8};
    if (detail::fnv1a(body) != tail.u64()) {
        throw std::runtime_error("checkpoint: checksum mismatch (corrupt or truncated file)");
    }

    detail::ByteReader r{body, 8};
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
    }

    CheckpointData data;
    const std::uint64_t config_len = r.u64();
    const std::string config_block = r.bytes(config_len);
    std::size_t start = 0;
    while (start < config_block.size()) {
        const std::size_t nl = config_block.find('\n', start);
        const std::string line = config_block.substr(start, nl - start);
        start = nl == std::string::npos ? config_block.size() : nl + 1;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed config line '" + line + "'");
        data.config[line.substr(0, eq)] = line.substr(eq + 1);
    }

    data.seed = r.u64();
    const std::uint32_t epochs = r.u32();
    for (std::uint32_t i = 0; i < epochs; ++i) {
        const double train = r.f64();
        const double val = r.f64();
        data.history.emplace_back(train, val);
    }

    const std::uint32_t n_params = r.u32();
    for (std::uint32_t i = 0; i < n_params; ++i) {
        CheckpointParam p;
        p.name = r.bytes(r.u32());
        const std::uint32_t ndim = r.u32();
        std::size_t count = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            p.dims.push_back(static_cast<int>(r.u32()));
            count *= static_cast<std::size_t>(p.dims.back());
        }
        p.values.reserve(count);
        for (std::size_t k = 0; k < count; ++k) p.values.push_back(r.f64());
        data.params.push_back(std::move(p));
    }
    if (r.pos != body.size()) throw std::runtime_error("checkpoint: trailing bytes after parameter records");
    return data;
}

inline CheckpointData checkpoint_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_parse(buf);
}

inline CheckpointData checkpoint_from(const ParamSet& params, std::map<std::string, std::string> config,
                                      std::uint64_t seed, std::vector<std::pair<double, double>> history) {
    CheckpointData data;
    data.config = std::move(config);
    data.seed = seed;
    data.history = std::move(history);
    for (const auto& e : params.entries()) {
        data.params.push_back({e.name, e.tensor.shape, *e.tensor.data});
    }
    return data;
}

// Strict restore: the checkpoint and the model must carry exactly the same
// parameter names, and every shape must match.
inline void checkpoint_restore(const CheckpointData& data, ParamSet& params) {
    std::map<std::string, const CheckpointParam*> by_name;
    for (const CheckpointParam& p : data.params) by_name[p.name] = &p;
    if (by_name.size() != params.size()) {
        throw std::runtime_error("checkpoint: holds " + std::to_string(by_name.size()) + " parameters, model has " +
                                 std::to_string(params.size()));
    }
    for (const auto& e : params.entries()) {
        auto it = by_name.find(e.name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint: missing parameter " + e.name);
        const CheckpointParam& p = *it->second;
        if (p.dims != e.tensor.shape) {
            auto fmt = [](const std::vector<int>& d) {
                std::string s = "[";
                for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
                return s + "]";
            };
            throw std::runtime_error("checkpoint: dimension mismatch for " + e.name + ": file " + fmt(p.dims) +
                                     " vs model " + fmt(e.tensor.shape));
        }
        *e.tensor.data = p.values;
    }
}

}  // namespace ddf
