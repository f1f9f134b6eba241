#include "alter/prompts.hpp"

#include <fstream>
#include <iterator>

#include "alter/errors.hpp"

namespace alter {

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

PromptLibrary::PromptLibrary() {
  for (const auto& [name, text] : builtin_prompt_templates()) templates_.emplace(name, text);
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
  PromptLibrary library;
  if (!std::filesystem::is_directory(dir)) throw IoError("prompt directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& path = entry.path();
    if (!entry.is_regular_file() || path.extension() != ".txt") continue;
    std::ifstream in(path, std::ios::binary);
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    std::string name = path.filename().string();
    name.resize(name.size() - 4);
    library.templates_.insert_or_assign(std::move(name), std::move(text));
  }
  return library;
}

const std::string& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ValidationError("no prompt template named '" + std::string(name) + "'");
  return it->second;
}

std::string PromptLibrary::render(std::string_view name,
                                  const std::map<std::string, std::string>& values) const {
  return fill_template(get(name), values);
}

}  // namespace alter
