#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "unica/tensor.hpp"

namespace unica {

using Json = nlohmann::json;

// Compact JSON with sorted object keys and reals printed with 17 significant
// digits, so equal documents always serialise to equal bytes and doubles
// round-trip exactly.
std::string dump_stable(const Json& j);

std::string read_text_file(const std::filesystem::path& path);
// Writes atomically enough for our purposes: truncate, write, close.
void write_text_file(const std::filesystem::path& path, std::string_view text);
// Throws DataError on missing files or malformed JSON.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

std::string sha256_hex(std::string_view bytes);

// {"shape": [...], "data": [...]}
Json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const Json& j);

}  // namespace unica
