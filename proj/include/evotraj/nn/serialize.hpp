#pragma once

#include <filesystem>
#include <span>

#include "evotraj/nn/tensor.hpp"

namespace evotraj::nn {

/// Writes `<stem>.f32` (all parameter values, little-endian float32, in order)
/// and `<stem>.json` ({"format_version", "parameters": {name: {offset, shape}}}).
/// Offsets count float elements, not bytes.
void save_parameters(std::span<Parameter* const> params, const std::filesystem::path& stem);

/// Fills `params` by name from files written by save_parameters. Throws
/// FormatError on missing names, shape mismatches or a truncated blob.
void load_parameters(std::span<Parameter* const> params, const std::filesystem::path& stem);

}  // namespace evotraj::nn
