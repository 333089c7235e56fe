#pragma once

#include <string>

#include <json.hpp>

namespace seqcast {

using Json = nlohmann::ordered_json;

// Serializes with doubles printed at 17 significant digits so every value
// round-trips losslessly and files are byte-stable across runs.
std::string dump_json(const Json& j, int indent = 0);

Json parse_json_text(const std::string& text, const std::string& context);
Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j, int indent = 0);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

} // namespace seqcast
