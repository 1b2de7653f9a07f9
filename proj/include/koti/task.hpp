#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "koti/error.hpp"
#include "koti/text.hpp"

namespace koti {

/// Prefix-type template "<before_mask> [MASK] <after_mask>".
struct TemplateSpec {
  std::string before_mask;
  std::string after_mask;

  std::string render(std::string_view mask_token) const {
    std::string out = before_mask;
    if (!out.empty()) out += ' ';
    out += mask_token;
    if (!after_mask.empty()) {
      out += ' ';
      out += after_mask;
    }
    return out;
  }
};

/// One classification task: classes, template, one label word per class and
/// the keyword list driving template placement.
///
/// Class order matters: prediction ties resolve to the lowest class index.
/// `affirmative_class` is the class whose F1 is the headline metric of a
/// binary task; `negative_class` receives negated keyword evidence; the
/// optional `default_class` is the class meaning "not mentioned".
struct TaskConfig {
  std::string name;
  std::vector<std::string> classes;
  TemplateSpec prompt_template;
  std::vector<std::string> label_words;
  KeywordSet keywords;
  std::size_t affirmative_class = 0;
  std::size_t negative_class = 1;
  std::optional<std::size_t> default_class;

  std::optional<std::size_t> class_index(std::string_view label) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == label) return i;
    return std::nullopt;
  }

  void validate() const {
    if (name.empty()) throw ConfigError("task name must not be empty");
    if (classes.size() < 2) throw ConfigError("a task needs at least two classes");
    if (label_words.size() != classes.size())
      throw ConfigError("task '" + name + "': one label word per class required");
    std::unordered_set<std::string> seen;
    for (const auto& c : classes)
      if (c.empty() || !seen.insert(c).second)
        throw ConfigError("task '" + name + "': class names must be unique and non-empty");
    seen.clear();
    for (const auto& w : label_words)
      if (w.empty() || !seen.insert(w).second)
        throw ConfigError("task '" + name + "': label words must be unique and non-empty");
    if (affirmative_class >= classes.size() || negative_class >= classes.size() ||
        affirmative_class == negative_class)
      throw ConfigError("task '" + name + "': invalid affirmative/negative class");
    if (default_class && (*default_class >= classes.size() ||
                          *default_class == affirmative_class))
      throw ConfigError("task '" + name + "': invalid default class");
    if (prompt_template.before_mask.empty() && prompt_template.after_mask.empty())
      throw ConfigError("task '" + name + "': template text must not be empty");
  }
};

namespace detail {

inline std::size_t resolve_role(const nlohmann::json& j, const char* key,
                                const std::vector<std::string>& classes,
                                std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto label = j.at(key).get<std::string>();
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == label) return i;
  throw ConfigError(std::string(key) + " '" + label + "' is not a class");
}

}  // namespace detail

/// Reads a task from its JSON form:
///
///   { "name": "dys", "classes": [...], "label_words": [...],
///     "template": {"before_mask": "dysmenorrhea:", "after_mask": ""},
///     "keywords": [...], "keywords_as_printed": [...],   // optional
///     "affirmative_class": "Yes", "negative_class": "No",
///     "default_class": "Unknown" }                        // all optional
///
/// With `as_printed`, `keywords_as_printed` replaces `keywords` when present.
inline TaskConfig parse_task_config(const nlohmann::json& j, bool as_printed = false) {
  try {
    auto classes = j.at("classes").get<std::vector<std::string>>();
    const char* kw_key =
        (as_printed && j.contains("keywords_as_printed")) ? "keywords_as_printed" : "keywords";
    const auto& tpl = j.at("template");
    TaskConfig task{
        .name = j.at("name").get<std::string>(),
        .classes = classes,
        .prompt_template = {tpl.value("before_mask", std::string{}),
                            tpl.value("after_mask", std::string{})},
        .label_words = j.at("label_words").get<std::vector<std::string>>(),
        .keywords = KeywordSet(j.at(kw_key).get<std::vector<std::string>>()),
        .affirmative_class = detail::resolve_role(j, "affirmative_class", classes, 0),
        .negative_class = detail::resolve_role(j, "negative_class", classes, 1),
        .default_class = std::nullopt,
    };
    if (j.contains("default_class"))
      task.default_class = detail::resolve_role(j, "default_class", classes, 0);
    task.validate();
    return task;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed task config: ") + e.what());
  } catch (const InvalidKeyword& e) {
    throw ConfigError(std::string("task keywords: ") + e.what());
  }
}

inline TaskConfig load_task_config(const std::filesystem::path& path,
                                   bool as_printed = false) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open task config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("task config " + path.string() + ": " + e.what());
  }
  return parse_task_config(j, as_printed);
}

inline nlohmann::json to_json(const TaskConfig& t) {
  nlohmann::json j{
      {"name", t.name},
      {"classes", t.classes},
      {"template", {{"before_mask", t.prompt_template.before_mask},
                    {"after_mask", t.prompt_template.after_mask}}},
      {"label_words", t.label_words},
      {"keywords", t.keywords.patterns()},
      {"affirmative_class", t.classes[t.affirmative_class]},
      {"negative_class", t.classes[t.negative_class]},
  };
  if (t.default_class) j["default_class"] = t.classes[*t.default_class];
  return j;
}

}  // namespace koti
