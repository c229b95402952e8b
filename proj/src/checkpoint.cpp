#include "psp/checkpoint.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace psp {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'P', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("checkpoint: truncated stream");
    return v;
}

}  // namespace

void write_blocks(std::ostream& os, const std::vector<NamedBlock>& blocks) {
    os.write(kMagic, sizeof(kMagic));
    put_u64(os, blocks.size());
    for (const NamedBlock& b : blocks) {
        put_u64(os, b.name.size());
        os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        put_u64(os, b.shape.size());
        for (Eigen::Index d : b.shape) put_u64(os, static_cast<uint64_t>(d));
        put_u64(os, static_cast<uint64_t>(b.data.size()));
        os.write(reinterpret_cast<const char*>(b.data.data()),
                 static_cast<std::streamsize>(b.data.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed");
}

std::vector<NamedBlock> read_blocks(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::string(magic, 8) != std::string(kMagic, 8)) {
        throw std::runtime_error("checkpoint: bad header magic");
    }
    const uint64_t n = get_u64(is);
    std::vector<NamedBlock> blocks;
    blocks.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
        NamedBlock b;
        const uint64_t name_len = get_u64(is);
        b.name.resize(name_len);
        is.read(b.name.data(), static_cast<std::streamsize>(name_len));
        const uint64_t rank = get_u64(is);
        for (uint64_t d = 0; d < rank; ++d) {
            b.shape.push_back(static_cast<Eigen::Index>(get_u64(is)));
        }
        const uint64_t count = get_u64(is);
        b.data.resize(static_cast<Eigen::Index>(count));
        is.read(reinterpret_cast<char*>(b.data.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated block '" + b.name + "'");
        blocks.push_back(std::move(b));
    }
    return blocks;
}

void save_checkpoint(std::ostream& os, const ParamStore& params,
                     const std::vector<std::pair<std::string, const Adam*>>& opts) {
    std::vector<NamedBlock> blocks;
    for (const auto& name : params.names()) {
        const Tensor& t = params.at(name);
        blocks.push_back(NamedBlock{name, t.shape(), t.array()});
    }
    for (const auto& [label, opt] : opts) {
        for (const auto& pname : opt->state_names()) {
            const AdamState& st = opt->state(pname);
            const std::string base = "opt." + label + "." + pname;
            blocks.push_back(NamedBlock{base + ".m", {st.m.size()}, st.m});
            blocks.push_back(NamedBlock{base + ".v", {st.v.size()}, st.v});
            Array step(1);
            step(0) = static_cast<double>(st.step_count);
            blocks.push_back(NamedBlock{base + ".t", {1}, std::move(step)});
        }
    }
    write_blocks(os, blocks);
}

void load_checkpoint(std::istream& is, ParamStore& params,
                     const std::vector<std::pair<std::string, Adam*>>& opts) {
    std::map<std::string, Adam*> by_label;
    for (const auto& [label, opt] : opts) by_label.emplace(label, opt);

    for (NamedBlock& b : read_blocks(is)) {
        if (b.name.rfind("opt.", 0) == 0) {
            // opt.<label>.<param>.<m|v|t>
            const size_t label_end = b.name.find('.', 4);
            const size_t kind_start = b.name.rfind('.');
            if (label_end == std::string::npos || kind_start <= label_end) {
                throw std::runtime_error("checkpoint: malformed block '" + b.name + "'");
            }
            const std::string label = b.name.substr(4, label_end - 4);
            const std::string pname = b.name.substr(label_end + 1, kind_start - label_end - 1);
            const std::string kind = b.name.substr(kind_start + 1);
            auto it = by_label.find(label);
            if (it == by_label.end()) {
                throw std::runtime_error("checkpoint: unknown optimizer '" + label + "'");
            }
            AdamState& st = it->second->state(pname);
            if (kind == "m") {
                st.m = std::move(b.data);
            } else if (kind == "v") {
                st.v = std::move(b.data);
            } else if (kind == "t") {
                st.step_count = static_cast<long>(b.data(0));
            } else {
                throw std::runtime_error("checkpoint: unknown block kind '" + b.name + "'");
            }
        } else {
            if (!params.has(b.name)) {
                throw std::runtime_error("checkpoint: unknown parameter '" + b.name + "'");
            }
            params.set(b.name, Tensor(std::move(b.shape), std::move(b.data)));
        }
    }
}

}  // namespace psp
