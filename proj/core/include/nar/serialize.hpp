#pragma once

#include <filesystem>
#include <string>

#include "nar/params.hpp"

namespace nar {

/// Directory layout: `manifest.json` mapping each parameter path to
/// {shape, dtype "f32", byte offset, file} plus one little-endian raw float32
/// file per tensor.
void save_parameter_set(const std::filesystem::path& dir, const ParameterSet& params);
ParameterSet load_parameter_set(const std::filesystem::path& dir);

/// Writes to `<path>.tmp` then renames, so readers never observe a torn file.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

/// SHA-256 hex digest.
std::string sha256_hex(const std::string& bytes);

}  // namespace nar
