#pragma once

// ParamSet file format: one line of compact JSON
//   {"format":"ilasr-paramset","dtype":"f32le","dims":{...},"version":N,
//    "segments":[{"name":"W1","shape":[h,f]},...]}
// terminated by '\n', followed by every segment flattened row-major as
// little-endian IEEE-754 binary32 in the listed order.

#include "ilasr/model.hpp"

#include <filesystem>
#include <string>

namespace ilasr {

std::string serialize_params(const ParamSet& params);
ParamSet deserialize_params(const std::string& bytes);

void save_params(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_params(const std::filesystem::path& path);

/// Rounds every entry to the nearest binary32, i.e. what a save/load cycle yields.
ParamSet round_to_f32(const ParamSet& params);

}  // namespace ilasr
