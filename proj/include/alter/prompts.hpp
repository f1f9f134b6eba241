#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace alter {

/// Templates compiled in from prompts/*.txt, keyed by file name without `.txt`.
const std::map<std::string, std::string>& builtin_prompt_templates();

/// Replaces `{key}` for every key in `values`, in one left-to-right pass;
/// inserted text is never rescanned. Unknown braces are left alone.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

class PromptLibrary {
 public:
  PromptLibrary();
  /// Built-in templates, overridden by any `<name>.txt` found in `dir`.
  static PromptLibrary with_overrides(const std::filesystem::path& dir);

  const std::string& get(std::string_view name) const;
  std::string render(std::string_view name, const std::map<std::string, std::string>& values) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace alter
