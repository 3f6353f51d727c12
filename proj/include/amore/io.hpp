#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "amore/schema.hpp"
#include "amore/tensor.hpp"
#include "json.hpp"

namespace amore::io {

using Json = nlohmann::ordered_json;

// Raw little-endian float64 blobs, row-major.
void write_blob(const std::filesystem::path& path, const std::vector<double>& data);
std::vector<double> read_blob(const std::filesystem::path& path, std::size_t expected_count);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

Json to_json(const StateSchema& s);
StateSchema schema_from_json(const Json& j);
Json to_json(const NormalizationParams& p);
NormalizationParams normalization_from_json(const Json& j);
Json shape_to_json(const Shape& s);
Shape shape_from_json(const Json& j);

// Writes `t` as <dir>/<name>.f64 and returns its manifest entry {name, file, shape}.
Json save_tensor(const std::filesystem::path& dir, const std::string& name, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& dir, const Json& entry);

// Bytes of a file, for determinism checks.
std::vector<char> file_bytes(const std::filesystem::path& path);

}  // namespace amore::io
