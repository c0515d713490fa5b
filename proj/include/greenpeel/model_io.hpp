#pragma once

#include <filesystem>

#include "greenpeel/config.hpp"
#include "greenpeel/peeling.hpp"

namespace greenpeel {

struct StoredModel {
    RunConfig config;
    HierarchicalApprox approx;
};

/// JSON model file: the run config plus every block's factors (column-major).
/// Doubles are written in shortest round-trip form, so reading back is exact.
void write_model(const std::filesystem::path& path, const RunConfig& config, const HierarchicalApprox& approx);
/// Throws FormatError when the file does not describe a model for its config.
StoredModel read_model(const std::filesystem::path& path);

}  // namespace greenpeel
