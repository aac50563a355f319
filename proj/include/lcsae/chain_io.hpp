#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "lcsae/basis.hpp"
#include "lcsae/sampler.hpp"

namespace lcsae {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal representation of a double (used everywhere a
/// number is written to disk, so identical runs produce identical bytes).
std::string format_double(double x);

/// Writes a chain as manifest.json (config echo, seed, block layout, names,
/// acceptance ledger) plus one comma-separated file per block, one row per
/// kept draw: params.csv, theta.csv, deviance.csv.
void save_chain_output(const std::filesystem::path& dir, const ChainOutput& out);
ChainOutput load_chain_output(const std::filesystem::path& dir);

/// Versioned, self-describing snapshot of a chain state, written when a run
/// aborts on a non-finite posterior so it can be inspected or resumed.
struct Checkpoint {
    int version = 1;
    long iteration = 0;
    ChainLayout layout;
    ChainState state;
};

void write_checkpoint(const std::filesystem::path& path, const ChainState& state,
                      const ChainLayout& layout, long iteration);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_spline_design(const std::filesystem::path& path, const SplineDesign& design);
SplineDesign load_spline_design(const std::filesystem::path& path);

}  // namespace lcsae
