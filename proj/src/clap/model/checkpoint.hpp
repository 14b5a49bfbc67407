#pragma once

#include <string>

#include "clap/model/model.hpp"

namespace clap::model {

// Versioned JSON checkpoint. Round-trips the full model state losslessly,
// including running statistics, temperature, dims, and the frozen text
// table.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace clap::model
