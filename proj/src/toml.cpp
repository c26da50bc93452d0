#include "fluctuant/toml.hpp"

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fluctuant/errors.hpp"

namespace fluctuant {
namespace {

using nlohmann::json;

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("line " + std::to_string(line) + ": " + what);
}

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Remove a trailing comment, honouring quoted strings. Returns false on an
// unterminated string.
bool strip_comment(std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      line.erase(i);
      break;
    }
  }
  return !in_string;
}

// Net bracket depth outside strings; used to detect arrays spanning lines.
int bracket_balance(const std::string& s) {
  int depth = 0;
  bool in_string = false;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : text_(text), line_(line) {}

  json parse() {
    json v = parse_value();
    skip_ws();
    if (pos_ != text_.size()) fail(line_, "trailing characters after value");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '\n') {
        ++line_;
        ++pos_;
      } else {
        break;
      }
    }
  }

  json parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) fail(line_, "missing value");
    char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    return parse_scalar();
  }

  json parse_string() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_++];
      if (c == '"') return json(out);
      if (c == '\n') fail(line_, "newline inside string");
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        char e = text_[pos_++];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: fail(line_, std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    fail(line_, "unterminated string");
  }

  json parse_array() {
    ++pos_;  // opening bracket
    json arr = json::array();
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return arr;
    }
    while (true) {
      arr.push_back(parse_value());
      skip_ws();
      if (pos_ >= text_.size()) fail(line_, "unterminated array");
      char c = text_[pos_];
      if (c == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {  // trailing comma
          ++pos_;
          return arr;
        }
      } else if (c == ']') {
        ++pos_;
        return arr;
      } else {
        fail(line_, "expected ',' or ']' in array");
      }
    }
  }

  json parse_scalar() {
    size_t start = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ',' || c == ']' || c == ' ' || c == '\t' || c == '\r' ||
          c == '\n') {
        break;
      }
      ++pos_;
    }
    std::string tok = text_.substr(start, pos_ - start);
    if (tok.empty()) fail(line_, "missing value");
    if (tok == "true") return json(true);
    if (tok == "false") return json(false);

    std::string digits;
    digits.reserve(tok.size());
    for (char c : tok) {
      if (c != '_') digits += c;
    }
    bool integral = !digits.empty();
    for (size_t i = 0; i < digits.size(); ++i) {
      char c = digits[i];
      if (i == 0 && (c == '+' || c == '-')) {
        if (digits.size() == 1) integral = false;
        continue;
      }
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        integral = false;
        break;
      }
    }
    try {
      if (integral) return json(static_cast<std::int64_t>(std::stoll(digits)));
      size_t used = 0;
      double d = std::stod(digits, &used);
      if (used == digits.size()) return json(d);
    } catch (const std::exception&) {
      // fall through to the error below
    }
    fail(line_, "cannot parse value '" + tok + "'");
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_;
};

// Split a [header] path on dots; components are bare keys or quoted strings.
std::vector<std::string> parse_header_path(const std::string& inner,
                                           int line) {
  std::vector<std::string> parts;
  size_t i = 0;
  while (true) {
    while (i < inner.size() && (inner[i] == ' ' || inner[i] == '\t')) ++i;
    if (i >= inner.size()) fail(line, "empty table name component");
    std::string part;
    if (inner[i] == '"') {
      ++i;
      while (i < inner.size() && inner[i] != '"') part += inner[i++];
      if (i >= inner.size()) fail(line, "unterminated quoted key");
      ++i;
    } else {
      while (i < inner.size() && is_bare_key_char(inner[i])) part += inner[i++];
      if (part.empty()) fail(line, "invalid table name");
    }
    parts.push_back(part);
    while (i < inner.size() && (inner[i] == ' ' || inner[i] == '\t')) ++i;
    if (i >= inner.size()) return parts;
    if (inner[i] != '.') fail(line, "invalid table name");
    ++i;
  }
}

}  // namespace

json parse_toml(const std::string& text) {
  json root = json::object();
  json* table = &root;
  std::vector<std::string> defined_tables;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    int start_line = lineno;
    if (!strip_comment(raw)) fail(lineno, "unterminated string");
    std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.size() >= 2 && line[1] == '[') {
        fail(lineno, "arrays of tables are not supported");
      }
      if (line.back() != ']') fail(lineno, "expected ']' to close table header");
      auto parts = parse_header_path(line.substr(1, line.size() - 2), lineno);
      std::string path;
      json* node = &root;
      for (const auto& part : parts) {
        path += (path.empty() ? "" : ".") + part;
        if (!node->contains(part)) (*node)[part] = json::object();
        node = &(*node)[part];
        if (!node->is_object()) {
          fail(lineno, "'" + path + "' is already a value, not a table");
        }
      }
      for (const auto& seen : defined_tables) {
        if (seen == path) fail(lineno, "table '" + path + "' redefined");
      }
      defined_tables.push_back(path);
      table = node;
      continue;
    }

    size_t eq = std::string::npos;
    {
      bool in_string = false;
      for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
          if (c == '\\') {
            ++i;
          } else if (c == '"') {
            in_string = false;
          }
        } else if (c == '"') {
          in_string = true;
        } else if (c == '=') {
          eq = i;
          break;
        }
      }
    }
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");

    std::string key = trim(line.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') {
      key = key.substr(1, key.size() - 2);
    } else {
      if (key.empty()) fail(lineno, "empty key");
      for (char c : key) {
        if (!is_bare_key_char(c)) {
          fail(lineno, "invalid key '" + key + "' (dotted keys not supported)");
        }
      }
    }

    std::string value = line.substr(eq + 1);
    int depth = bracket_balance(value);
    while (depth > 0) {
      if (!std::getline(in, raw)) fail(start_line, "unterminated array");
      ++lineno;
      if (!strip_comment(raw)) fail(lineno, "unterminated string");
      value += '\n';
      value += raw;
      depth = bracket_balance(value);
    }
    if (depth < 0) fail(start_line, "unbalanced ']'");

    if (table->contains(key)) fail(start_line, "duplicate key '" + key + "'");
    (*table)[key] = ValueParser(trim(value), start_line).parse();
  }
  return root;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    try {
      return json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("invalid JSON in ") + path + ": " +
                        e.what());
    }
  }
  return parse_toml(buf.str());
}

}  // namespace fluctuant
