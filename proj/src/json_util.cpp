#include "smoky/json_util.hpp"

#include <string>

#include "smoky/errors.hpp"

namespace smoky {

using nlohmann::json;

void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(const nlohmann::json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + "malformed record (" + e.what() + ")");
    }
    try {
      fn(j);
    } catch (const RangeError& e) {
      throw RangeError(where + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + "bad record (" + e.what() + ")");
    }
  }
}

JsonLineWriter::JsonLineWriter(const std::filesystem::path& path)
    : path_(path), out_(path) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
}

void JsonLineWriter::write(const nlohmann::json& record) { out_ << record.dump() << '\n'; }

void JsonLineWriter::close() {
  out_.close();
  if (!out_) throw IoError("write failed: " + path_.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json box_to_json(const BoundingBox& b) {
  return json::array({b.x1(), b.y1(), b.x2(), b.y2()});
}

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ValidationError("box must be [x1,y1,x2,y2]");
  return BoundingBox::make(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                           j[3].get<double>());
}

}  // namespace smoky
