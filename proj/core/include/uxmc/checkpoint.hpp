#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "uxmc/keyvalue.hpp"
#include "uxmc/model.hpp"

namespace uxmc {

// Dense blob: "UDNM", version u32, rows u32, cols u32, rows*cols f32 row-major.
inline constexpr std::uint32_t kUdnmVersion = 1;

template <typename T>
void write_dense_blob(std::ostream& out, const DenseMatrix<T>& m);
template <typename T>
DenseMatrix<T> read_dense_blob(std::istream& in);

void model_config_to_keys(const ModelConfig& cfg, std::map<std::string, std::string>& out);
/// Reads model.* keys; missing keys keep the defaults in `base`.
ModelConfig model_config_from_keys(const KeyValues& kv, ModelConfig base = {});

/// Writes manifest.txt plus one blob per component into `dir` (created if
/// needed). Parameters are stored as 32-bit floats.
template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const Model<T>& model);

/// Throws FormatError on a missing or inconsistent component.
template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& dir);

}  // namespace uxmc
