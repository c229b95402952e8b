#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "psp/adam.hpp"
#include "psp/params.hpp"

namespace psp {

// One serialized tensor: name, shape, float64 payload (little-endian).
struct NamedBlock {
    std::string name;
    Shape shape;
    Array data;
};

void write_blocks(std::ostream& os, const std::vector<NamedBlock>& blocks);
std::vector<NamedBlock> read_blocks(std::istream& is);

// Checkpoint = every parameter plus the moment estimates and step counts
// of the named optimizers, all as named blocks behind one magic header.
void save_checkpoint(std::ostream& os, const ParamStore& params,
                     const std::vector<std::pair<std::string, const Adam*>>& opts);

// Restores into an already-constructed store (shapes must match) and the
// matching optimizers. Unknown block names are an error.
void load_checkpoint(std::istream& is, ParamStore& params,
                     const std::vector<std::pair<std::string, Adam*>>& opts);

}  // namespace psp
