#pragma once

#include <string>

#include "rba/model.hpp"

namespace rba {

// Text helpers shared by every structured-text artifact: doubles are
// printed as shortest-round-trip decimals, so parse(format(x)) == x bitwise.
std::string format_double(double v);
double parse_double(const std::string& s);

// Versioned text checkpoint: schema_version, model config record, then one
// entry per registered parameter with its canonical name, shape, and values.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Serialize to a string (used for byte-level freeze checks).
std::string checkpoint_to_string(const ModelParams& params);

}  // namespace rba
