#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enprune/model_graph.hpp"

namespace enprune {

// Checkpoint container: magic "ENPR", format version u16, then a table of
// named entries (name, dtype, shape, little-endian payload). dtype 0 holds
// 32-bit floats, dtype 1 holds 64-bit signed integers.
struct CheckpointEntry {
    std::string name;
    uint8_t dtype = 0;  // 0 = f32, 1 = i64
    std::vector<int64_t> shape;
    std::vector<float> f32;
    std::vector<int64_t> i64;

    static CheckpointEntry floats(std::string name, std::vector<int64_t> shape,
                                  std::vector<float> values);
    static CheckpointEntry ints(std::string name, std::vector<int64_t> values);
};

void save_entries(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> load_entries(const std::string& path);

std::vector<CheckpointEntry> graph_to_entries(const ModelGraph& g);
ModelGraph graph_from_entries(const std::vector<CheckpointEntry>& entries);

void save_checkpoint(const ModelGraph& g, const std::string& path);
ModelGraph load_checkpoint(const std::string& path);

}  // namespace enprune
