#include "seqcast/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "seqcast/error.hpp"

namespace seqcast {

namespace {

void dump_string(const std::string& s, std::string& out) {
  out += '"';
  for (char c : s) {
    switch (c) {
    case '"': out += "\\\""; break;
    case '\\': out += "\\\\"; break;
    case '\n': out += "\\n"; break;
    case '\r': out += "\\r"; break;
    case '\t': out += "\\t"; break;
    default:
      if (static_cast<unsigned char>(c) < 0x20) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "\\u%04x", c);
        out += buf;
      } else {
        out += c;
      }
    }
  }
  out += '"';
}

void dump_value(const Json& j, std::string& out, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent > 0) {
      out += '\n';
      out.append(static_cast<std::size_t>(indent) * d, ' ');
    }
  };
  switch (j.type()) {
  case Json::value_t::null:
    out += "null";
    break;
  case Json::value_t::boolean:
    out += j.get<bool>() ? "true" : "false";
    break;
  case Json::value_t::number_integer:
    out += std::to_string(j.get<std::int64_t>());
    break;
  case Json::value_t::number_unsigned:
    out += std::to_string(j.get<std::uint64_t>());
    break;
  case Json::value_t::number_float: {
    double v = j.get<double>();
    if (!std::isfinite(v)) throw data_error("refusing to serialize non-finite number");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
    break;
  }
  case Json::value_t::string:
    dump_string(j.get<std::string>(), out);
    break;
  case Json::value_t::array: {
    if (j.empty()) {
      out += "[]";
      break;
    }
    out += '[';
    bool first = true;
    for (const auto& el : j) {
      if (!first) out += ',';
      first = false;
      newline(depth + 1);
      dump_value(el, out, indent, depth + 1);
    }
    newline(depth);
    out += ']';
    break;
  }
  case Json::value_t::object: {
    if (j.empty()) {
      out += "{}";
      break;
    }
    out += '{';
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ',';
      first = false;
      newline(depth + 1);
      dump_string(it.key(), out);
      out += indent > 0 ? ": " : ":";
      dump_value(it.value(), out, indent, depth + 1);
    }
    newline(depth);
    out += '}';
    break;
  }
  default:
    throw data_error("unsupported JSON value type");
  }
}

} // namespace

std::string dump_json(const Json& j, int indent) {
  std::string out;
  dump_value(j, out, indent, 0);
  out += '\n';
  return out;
}

Json parse_json_text(const std::string& text, const std::string& context) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("parse error in " + context + ": " + e.what());
  }
}

Json read_json_file(const std::string& path) {
  return parse_json_text(read_text_file(path), path);
}

void write_json_file(const std::string& path, const Json& j, int indent) {
  write_text_file(path, dump_json(j, indent));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write file: " + path);
  out << text;
  if (!out) throw data_error("write failed: " + path);
}

} // namespace seqcast
