#include "enprune/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace enprune {

namespace {

constexpr char kMagic[4] = {'E', 'N', 'P', 'R'};
constexpr uint16_t kVersion = 1;

void write_raw(std::ofstream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::ifstream& is, void* p, size_t n, const std::string& path, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n)
        throw std::runtime_error("checkpoint '" + path + "': truncated while reading " + what +
                                 " at offset " + std::to_string(static_cast<long long>(is.tellg())));
}

}  // namespace

CheckpointEntry CheckpointEntry::floats(std::string name, std::vector<int64_t> shape,
                                        std::vector<float> values) {
    CheckpointEntry e;
    e.name = std::move(name);
    e.dtype = 0;
    e.shape = std::move(shape);
    e.f32 = std::move(values);
    return e;
}

CheckpointEntry CheckpointEntry::ints(std::string name, std::vector<int64_t> values) {
    CheckpointEntry e;
    e.name = std::move(name);
    e.dtype = 1;
    e.shape = {static_cast<int64_t>(values.size())};
    e.i64 = std::move(values);
    return e;
}

void save_entries(const std::string& path, const std::vector<CheckpointEntry>& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    write_raw(os, kMagic, 4);
    write_raw(os, &kVersion, 2);
    const uint32_t count = static_cast<uint32_t>(entries.size());
    write_raw(os, &count, 4);
    for (const auto& e : entries) {
        const uint16_t name_len = static_cast<uint16_t>(e.name.size());
        write_raw(os, &name_len, 2);
        write_raw(os, e.name.data(), e.name.size());
        write_raw(os, &e.dtype, 1);
        const uint8_t ndim = static_cast<uint8_t>(e.shape.size());
        write_raw(os, &ndim, 1);
        for (int64_t d : e.shape) write_raw(os, &d, 8);
        if (e.dtype == 0)
            write_raw(os, e.f32.data(), e.f32.size() * 4);
        else
            write_raw(os, e.i64.data(), e.i64.size() * 8);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

std::vector<CheckpointEntry> load_entries(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    read_raw(is, magic, 4, path, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint '" + path + "': bad magic bytes (not an ENPR file)");
    uint16_t version = 0;
    read_raw(is, &version, 2, path, "version");
    if (version != kVersion)
        throw std::runtime_error("checkpoint '" + path + "': unsupported format version " +
                                 std::to_string(version));
    uint32_t count = 0;
    read_raw(is, &count, 4, path, "entry count");

    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        uint16_t name_len = 0;
        read_raw(is, &name_len, 2, path, "entry name length");
        e.name.resize(name_len);
        read_raw(is, e.name.data(), name_len, path, "entry name");
        read_raw(is, &e.dtype, 1, path, "entry dtype");
        if (e.dtype > 1)
            throw std::runtime_error("checkpoint '" + path + "': unknown dtype " +
                                     std::to_string(e.dtype) + " in entry '" + e.name + "'");
        uint8_t ndim = 0;
        read_raw(is, &ndim, 1, path, "entry rank");
        e.shape.resize(ndim);
        for (auto& d : e.shape) read_raw(is, &d, 8, path, "entry shape");
        int64_t numel = 1;
        for (int64_t d : e.shape) {
            if (d < 0)
                throw std::runtime_error("checkpoint '" + path + "': negative extent in entry '" +
                                         e.name + "'");
            numel *= d;
        }
        if (e.dtype == 0) {
            e.f32.resize(static_cast<size_t>(numel));
            read_raw(is, e.f32.data(), static_cast<size_t>(numel) * 4, path, e.name.c_str());
        } else {
            e.i64.resize(static_cast<size_t>(numel));
            read_raw(is, e.i64.data(), static_cast<size_t>(numel) * 8, path, e.name.c_str());
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<CheckpointEntry> graph_to_entries(const ModelGraph& g) {
    std::vector<CheckpointEntry> entries;
    entries.push_back(CheckpointEntry::ints("input_shape", {g.input_c, g.input_h, g.input_w}));
    entries.push_back(
        CheckpointEntry::ints("layer_count", {static_cast<int64_t>(g.layers.size())}));
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& s = g.layers[i];
        const std::string prefix = "layer" + std::to_string(i);
        entries.push_back(CheckpointEntry::ints(
            prefix + ".spec", {static_cast<int64_t>(s.kind), s.c_in, s.c_out, s.kh, s.kw, s.stride,
                               s.pad, s.pool}));
        if (s.parameterized()) {
            entries.push_back(CheckpointEntry::floats(prefix + ".weight", g.weights[i].shape,
                                                      g.weights[i].data));
            entries.push_back(
                CheckpointEntry::floats(prefix + ".bias", g.biases[i].shape, g.biases[i].data));
        }
    }
    return entries;
}

namespace {
const CheckpointEntry& find_entry(const std::vector<CheckpointEntry>& entries,
                                  const std::string& name) {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw std::runtime_error("checkpoint: missing entry '" + name + "'");
}
}  // namespace

ModelGraph graph_from_entries(const std::vector<CheckpointEntry>& entries) {
    ModelGraph g;
    const auto& in_shape = find_entry(entries, "input_shape").i64;
    if (in_shape.size() != 3) throw std::runtime_error("checkpoint: malformed input_shape");
    g.input_c = in_shape[0];
    g.input_h = in_shape[1];
    g.input_w = in_shape[2];
    const int64_t n_layers = find_entry(entries, "layer_count").i64.at(0);
    for (int64_t i = 0; i < n_layers; ++i) {
        const std::string prefix = "layer" + std::to_string(i);
        const auto& spec = find_entry(entries, prefix + ".spec").i64;
        if (spec.size() != 8) throw std::runtime_error("checkpoint: malformed " + prefix + ".spec");
        LayerSpec s;
        s.kind = static_cast<LayerKind>(spec[0]);
        s.c_in = spec[1];
        s.c_out = spec[2];
        s.kh = spec[3];
        s.kw = spec[4];
        s.stride = spec[5];
        s.pad = spec[6];
        s.pool = spec[7];
        Tensor w, b;
        if (s.parameterized()) {
            const auto& we = find_entry(entries, prefix + ".weight");
            const auto& be = find_entry(entries, prefix + ".bias");
            w = Tensor::from(we.shape, we.f32);
            b = Tensor::from(be.shape, be.f32);
        }
        g.layers.push_back(s);
        g.weights.push_back(std::move(w));
        g.biases.push_back(std::move(b));
    }
    g.resolve();
    return g;
}

void save_checkpoint(const ModelGraph& g, const std::string& path) {
    save_entries(path, graph_to_entries(g));
}

ModelGraph load_checkpoint(const std::string& path) {
    return graph_from_entries(load_entries(path));
}

}  // namespace enprune
