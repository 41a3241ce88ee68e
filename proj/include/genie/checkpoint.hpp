#pragma once

#include <string>
#include <utility>
#include <vector>

#include "genie/tensor.hpp"

namespace genie {

/// Binary parameter file: magic "GNPK", u32 format version, then one record
/// per tensor (u32 name length, name bytes, u64 rows, u64 cols, row-major
/// little-endian f64 payload) until end of file.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params);

/// Reads records back in file order. Throws std::invalid_argument on a bad
/// magic, unknown version, or truncated record.
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

}  // namespace genie
