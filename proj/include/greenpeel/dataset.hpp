#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "greenpeel/discrete_operator.hpp"
#include "greenpeel/grid.hpp"

namespace greenpeel {

struct Provenance {
    std::string kernel = "unknown";
    double length_scale = 0.0;
    std::uint64_t seed = 0;
    std::string coefficient = "unknown";
    std::string created;  ///< ISO-8601 UTC, filled on write when empty
};

/// Forcing/solution pairs stored column-wise.
struct TrainingSet {
    Grid grid;
    Matrix forcings;   ///< total x N
    Matrix solutions;  ///< total x N
    Provenance provenance;

    explicit TrainingSet(Grid g) : grid(g), forcings(g.total(), 0), solutions(g.total(), 0) {}
    Index size() const { return forcings.cols(); }
    void append(const Matrix& f, const Matrix& u);
};

/// Binary GPDE v1, little-endian:
///   "GPDE" | u32 version | u32 d | u32 n | u64 N | N forcings | N solutions
/// with n^d float64 per vector, plus JSON metadata in `<path>.meta.json`.
inline constexpr std::uint32_t dataset_version = 1;
inline constexpr std::size_t dataset_header_bytes = 24;

void dataset_write(const std::filesystem::path& path, const TrainingSet& data);

/// Throws FormatError on magic/version/length mismatch. A missing sidecar
/// only appends to `warnings`.
TrainingSet dataset_read(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Largest relative residual ||K u - f|| / ||f|| over the first `pairs` pairs.
double consistency_residual(const TrainingSet& data, const DiscreteOperator& op, int pairs = 3);

std::string utc_timestamp();

}  // namespace greenpeel
