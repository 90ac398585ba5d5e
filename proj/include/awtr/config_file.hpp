#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace awtr {

/// Plain key=value text grouped under [section] headers. '#' and ';' start
/// comments; keys before the first header land in section "".
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in, const std::string& origin = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  const std::map<std::string, std::string>& section(const std::string& name) const;
  std::vector<std::string> section_names() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace awtr
