#pragma once

// A deterministic, trainable stand-in for a masked LM in which template
// position changes the logits.
//
//   logit_c = b_c + sum_{i not in template} w(f_i, c) * d(|i - mask|)
//   d(delta) = 1 / (1 + delta / tau)
//
// f_i is the feature at prompt position i: "kw:<pattern>" where a task
// keyword match starts, "neg:kw:<pattern>" when such a match is preceded by a
// negation cue within the negation window, "tok:<token>" otherwise.
// Template tokens never contribute evidence.
//
// Zero-shot state: w(kw:*, affirmative) = w(neg:kw:*, negative) =
// keyword_prior, b(default) = default_prior, everything else 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "koti/error.hpp"
#include "koti/scorer.hpp"
#include "koti/task.hpp"
#include "koti/text.hpp"

namespace koti {

struct ToyScorerConfig {
  std::size_t max_input_tokens = 512;
  std::size_t special_overhead = 2;
  double decay_tau = 32.0;
  std::size_t negation_window = 3;
  std::vector<std::string> negation_cues = {"no", "denies", "without", "negative"};
  double keyword_prior = 1.0;
  double default_prior = 0.05;
  // Effective step = learning_rate * lr_scale, so the [1e-7, 1e-4] search
  // range moves this small linear model at a useful rate.
  double lr_scale = 1e4;
  // word -> sub-tokens, e.g. {"unknown", {"un", "##known"}}
  std::map<std::string, std::vector<std::string>> subword_splits;
};

/// Lowercasing word tokenizer: whitespace separates, every ASCII punctuation
/// byte is its own token, and the mask token is kept whole.
class ToyTokenizer {
 public:
  ToyTokenizer(std::string mask_token,
               std::map<std::string, std::vector<std::string>> subword_splits = {})
      : mask_(std::move(mask_token)), splits_(std::move(subword_splits)) {}

  TokenSeq tokenize(std::string_view text) const {
    TokenSeq out;
    std::string word;
    auto flush = [&] {
      if (word.empty()) return;
      if (auto it = splits_.find(word); it != splits_.end())
        out.insert(out.end(), it->second.begin(), it->second.end());
      else
        out.push_back(word);
      word.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (!mask_.empty() && text.compare(i, mask_.size(), mask_) == 0) {
        flush();
        out.push_back(mask_);
        i += mask_.size() - 1;
      } else if (detail::is_space(c)) {
        flush();
      } else if (detail::is_word_char(c)) {
        word.push_back(detail::to_lower(c));
      } else {
        flush();
        out.emplace_back(1, c);
      }
    }
    flush();
    return out;
  }

  std::string detokenize(std::span<const Token> tokens) const {
    std::string out;
    for (const auto& t : tokens) {
      if (!out.empty()) out += ' ';
      out += t;
    }
    return out;
  }

 private:
  std::string mask_;
  std::map<std::string, std::vector<std::string>> splits_;
};

class ToyScorer : public Scorer {
 public:
  using Parameters = std::unordered_map<std::string, double>;

  /// Binds the scorer to a task: its keywords and the label words of the
  /// affirmative, negative and (optional) default classes.
  ToyScorer(const TaskConfig& task, ToyScorerConfig config = {})
      : config_(std::move(config)),
        info_{config_.max_input_tokens, config_.special_overhead, "[MASK]"},
        tokenizer_(info_.mask_token, config_.subword_splits) {
    if (config_.decay_tau <= 0) throw ConfigError("decay tau must be positive");
    for (const auto& p : task.keywords.patterns()) {
      auto toks = tokenizer_.tokenize(p);
      if (!toks.empty()) keyword_tokens_.emplace_back(p, std::move(toks));
    }
    // longest pattern first so the most specific keyword names the feature
    std::stable_sort(keyword_tokens_.begin(), keyword_tokens_.end(),
                     [](const auto& x, const auto& y) { return x.first.size() > y.first.size(); });

    auto first_piece = [&](const std::string& w) {
      auto t = tokenizer_.tokenize(w);
      if (t.empty()) throw TokenizationFailure("label word '" + w + "' produced no tokens");
      return t.front();
    };
    const auto affirmative = first_piece(task.label_words[task.affirmative_class]);
    const auto negative = first_piece(task.label_words[task.negative_class]);
    for (const auto& [pattern, toks] : keyword_tokens_) {
      pristine_[key("kw:" + pattern, affirmative)] += config_.keyword_prior;
      pristine_[key("neg:kw:" + pattern, negative)] += config_.keyword_prior;
    }
    if (task.default_class)
      pristine_[bias_key(first_piece(task.label_words[*task.default_class]))] +=
          config_.default_prior;
    params_ = pristine_;
  }

  const ScorerInfo& info() const override { return info_; }
  const ToyScorerConfig& config() const { return config_; }

  TokenSeq tokenize(std::string_view text) const override {
    return tokenizer_.tokenize(text);
  }

  std::string detokenize(std::span<const Token> tokens) const override {
    return tokenizer_.detokenize(tokens);
  }

  double decay(std::size_t distance) const {
    return 1.0 / (1.0 + static_cast<double>(distance) / config_.decay_tau);
  }

  struct Feature {
    std::string name;
    double weight;  // decay at this position
  };

  /// Evidence features of a prompt, template positions excluded.
  std::vector<Feature> features(const PromptInput& prompt) const {
    const auto& toks = prompt.tokens;
    auto in_template = [&](std::size_t i) {
      return i >= prompt.template_begin && i < prompt.template_end;
    };
    std::vector<Feature> out;
    out.reserve(toks.size());
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i == prompt.mask_index || in_template(i)) continue;
      const std::size_t dist = i > prompt.mask_index ? i - prompt.mask_index
                                                     : prompt.mask_index - i;
      std::string name;
      if (auto kw = keyword_at(toks, i, prompt)) {
        name = (negated_at(toks, i, prompt) ? "neg:kw:" : "kw:") + *kw;
      } else {
        name = "tok:" + toks[i];
      }
      out.push_back({std::move(name), decay(dist)});
    }
    return out;
  }

  std::vector<double> score(const PromptInput& prompt,
                            std::span<const Token> label_words) const override {
    check_prompt(prompt, info_);
    return logits(features(prompt), label_words);
  }

  /// Mean cross-entropy of the verbalizer output against gold classes.
  double loss(std::span<const TrainExample> examples,
              std::span<const Token> label_words) const {
    if (examples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& ex : examples) {
      const auto z = logits(features(ex.prompt), label_words);
      total += cross_entropy(z, ex.gold_class_index);
    }
    return total / static_cast<double>(examples.size());
  }

  /// Analytic gradient of `loss` with respect to every parameter it touches.
  Parameters gradient(std::span<const TrainExample> examples,
                      std::span<const Token> label_words) const {
    Parameters grad;
    std::vector<std::vector<Feature>> feats;
    feats.reserve(examples.size());
    for (const auto& ex : examples) feats.push_back(features(ex.prompt));
    accumulate_gradient(examples, feats, label_words, 0, examples.size(), grad);
    return grad;
  }

  double train(std::span<const TrainExample> examples,
               std::span<const Token> label_words, const HyperParams& hp,
               std::uint64_t seed) override {
    if (examples.empty()) throw ConfigError("train needs at least one example");
    hp.validate();
    for (const auto& ex : examples) {
      check_prompt(ex.prompt, info_);
      if (ex.gold_class_index >= label_words.size())
        throw ConfigError("gold class index out of range");
    }

    std::vector<std::vector<Feature>> feats;
    feats.reserve(examples.size());
    for (const auto& ex : examples) feats.push_back(features(ex.prompt));

    std::vector<std::size_t> idx(examples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    std::mt19937_64 rng(seed);
    const double step = hp.learning_rate * config_.lr_scale;
    const auto batch = static_cast<std::size_t>(hp.batch_size);
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
      shuffle(idx, rng);
      for (std::size_t b = 0; b < idx.size(); b += batch) {
        const std::size_t e = std::min(b + batch, idx.size());
        Parameters grad;
        for (std::size_t k = b; k < e; ++k)
          accumulate_gradient(examples, feats, label_words, idx[k], idx[k] + 1, grad);
        const double scale = step / static_cast<double>(e - b);
        for (const auto& [name, g] : grad) {
          double& p = params_[name];
          p -= scale * g;
          if (!std::isfinite(p))
            throw DivergenceDetected("parameter '" + name + "' became non-finite");
        }
      }
    }

    double final_loss = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i)
      final_loss += cross_entropy(logits(feats[i], label_words), examples[i].gold_class_index);
    final_loss /= static_cast<double>(examples.size());
    if (!std::isfinite(final_loss))
      throw DivergenceDetected("training loss became non-finite");
    return final_loss;
  }

  void reset() override { params_ = pristine_; }

  std::string describe() const override {
    std::ostringstream os;
    os.precision(17);
    os << "toy(max=" << config_.max_input_tokens << ",overhead=" << config_.special_overhead
       << ",tau=" << config_.decay_tau << ",neg_window=" << config_.negation_window
       << ",kw_prior=" << config_.keyword_prior << ",default_prior=" << config_.default_prior
       << ",lr_scale=" << config_.lr_scale << ")";
    return os.str();
  }

  double parameter(const std::string& name) const {
    auto it = params_.find(name);
    return it == params_.end() ? 0.0 : it->second;
  }
  void set_parameter(const std::string& name, double value) { params_[name] = value; }
  const Parameters& parameters() const { return params_; }

  static std::string key(const std::string& feature, const Token& label_word) {
    return feature + '\x1f' + label_word;
  }
  static std::string bias_key(const Token& label_word) { return key("bias", label_word); }

 private:
  std::optional<std::string> keyword_at(const TokenSeq& toks, std::size_t i,
                                        const PromptInput& prompt) const {
    for (const auto& [pattern, kt] : keyword_tokens_) {
      if (i + kt.size() > toks.size()) continue;
      bool ok = true;
      for (std::size_t j = 0; j < kt.size() && ok; ++j) {
        const std::size_t pos = i + j;
        if (pos == prompt.mask_index ||
            (pos >= prompt.template_begin && pos < prompt.template_end)) {
          ok = false;
        } else if (j + 1 < kt.size()) {
          ok = toks[pos] == kt[j];
        } else {
          ok = toks[pos].compare(0, kt[j].size(), kt[j]) == 0;
        }
      }
      if (ok) return pattern;
    }
    return std::nullopt;
  }

  bool negated_at(const TokenSeq& toks, std::size_t i, const PromptInput& prompt) const {
    const std::size_t lo = i > config_.negation_window ? i - config_.negation_window : 0;
    for (std::size_t j = lo; j < i; ++j) {
      if (j >= prompt.template_begin && j < prompt.template_end) continue;
      if (std::find(config_.negation_cues.begin(), config_.negation_cues.end(), toks[j]) !=
          config_.negation_cues.end())
        return true;
    }
    return false;
  }

  std::vector<double> logits(const std::vector<Feature>& feats,
                             std::span<const Token> label_words) const {
    std::vector<double> z;
    z.reserve(label_words.size());
    for (const auto& lw : label_words) {
      double v = parameter(bias_key(lw));
      for (const auto& f : feats) {
        auto it = params_.find(key(f.name, lw));
        if (it != params_.end()) v += it->second * f.weight;
      }
      z.push_back(v);
    }
    return z;
  }

  static std::vector<double> softmax(const std::vector<double>& z) {
    const double top = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - top));
    for (auto& v : p) v /= s;
    return p;
  }

  static double cross_entropy(const std::vector<double>& z, std::size_t gold) {
    const double top = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - top);
    return std::log(s) + top - z[gold];
  }

  // Adds d(loss)/d(theta) of examples [b, e) to `grad`, scaled by 1/|examples|.
  void accumulate_gradient(std::span<const TrainExample> examples,
                           const std::vector<std::vector<Feature>>& feats,
                           std::span<const Token> label_words, std::size_t b,
                           std::size_t e, Parameters& grad) const {
    const double inv_n = 1.0 / static_cast<double>(e - b);
    for (std::size_t i = b; i < e; ++i) {
      const auto p = softmax(logits(feats[i], label_words));
      for (std::size_t c = 0; c < label_words.size(); ++c) {
        const double g = (p[c] - (c == examples[i].gold_class_index ? 1.0 : 0.0)) * inv_n;
        grad[bias_key(label_words[c])] += g;
        for (const auto& f : feats[i]) grad[key(f.name, label_words[c])] += g * f.weight;
      }
    }
  }

  static void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

  ToyScorerConfig config_;
  ScorerInfo info_;
  ToyTokenizer tokenizer_;
  std::vector<std::pair<std::string, TokenSeq>> keyword_tokens_;
  Parameters pristine_;
  Parameters params_;
};

}  // namespace koti
