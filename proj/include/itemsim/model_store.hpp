#pragma once

#include <string>
#include <variant>

#include "itemsim/model.hpp"

namespace itemsim {

/// Model files carry a plain-text header (key=value lines, blank-line
/// terminated) followed by the parameter blobs as little-endian 64-bit
/// reals in row-major order. The round trip is bit-exact.
void save_model(const FismParams& params, const std::string& path);
void save_model(const NaisParams& params, const std::string& path);

using LoadedModel = std::variant<FismParams, NaisParams>;

LoadedModel load_model(const std::string& path);

FismParams load_fism_model(const std::string& path);  // throws when the file holds NAIS
NaisParams load_nais_model(const std::string& path);

}  // namespace itemsim
