#pragma once

#include <filesystem>
#include <fstream>
#include <functional>

#include <json.hpp>

#include "smoky/box.hpp"

namespace smoky {

/// Calls fn for every non-blank line of a JSON-lines file. Any failure inside
/// fn or while parsing is rethrown as ParseError/ValidationError prefixed with
/// "<path>:<line>: ". Throws IoError when the file cannot be opened.
void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(const nlohmann::json&)>& fn);

class JsonLineWriter {
 public:
  explicit JsonLineWriter(const std::filesystem::path& path);
  void write(const nlohmann::json& record);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// [x1, y1, x2, y2]; box_from_json throws ValidationError on anything else.
nlohmann::json box_to_json(const BoundingBox& box);
BoundingBox box_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace smoky
