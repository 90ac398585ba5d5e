#include "awtr/config_file.hpp"

#include <fstream>

#include "awtr/csv.hpp"
#include "awtr/errors.hpp"

namespace awtr {

ConfigFile ConfigFile::parse(std::istream& in, const std::string& origin) {
  ConfigFile cfg;
  std::string current;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    std::string_view body = csv::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      current = std::string(csv::trim(body.substr(1, body.size() - 2)));
      cfg.sections_[current];
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key(csv::trim(body.substr(0, eq)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.sections_[current][key] = std::string(csv::trim(body.substr(eq + 1)));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

std::optional<std::string> ConfigFile::get(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

const std::map<std::string, std::string>& ConfigFile::section(const std::string& name) const {
  static const std::map<std::string, std::string> empty;
  const auto s = sections_.find(name);
  return s == sections_.end() ? empty : s->second;
}

std::vector<std::string> ConfigFile::section_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : sections_) out.push_back(name);
  return out;
}

}  // namespace awtr
