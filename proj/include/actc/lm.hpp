#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actc/common.hpp"
#include "actc/vocab.hpp"

namespace actc {

inline const std::string kSentBegin = "<s>";
inline const std::string kSentEnd = "</s>";

// Placeholder score for tokens that only ever act as history (e.g. <s>).
constexpr double kPlaceholderLogp = -99.0;

struct NGramEntry {
  double logp = 0.0;  // log10 conditional probability
  double bow = 0.0;   // log10 backoff weight, valid when has_bow
  bool has_bow = false;
};

// Count-based n-gram model with interpolated absolute discounting (D=0.75),
// stored in exact backoff form: entry probabilities already contain the
// interpolation term and the backoff weight of a history equals its
// interpolation weight, so ARPA round-trips preserve every score.
class NGramModel {
 public:
  using Key = std::vector<std::string>;

  int order() const { return static_cast<int>(tables_.size()); }
  const std::vector<std::string>& predicted_vocab() const { return pred_vocab_; }
  size_t n_entries(int k) const { return tables_.at(static_cast<size_t>(k) - 1).size(); }

  // log10 P(word | history); history longer than order-1 is truncated, tokens
  // outside the closed vocabulary are mapped to the OOV class.
  double logprob(const std::vector<std::string>& history, const std::string& word) const {
    Key h;
    const size_t keep = std::min(history.size(), static_cast<size_t>(order() - 1));
    for (size_t i = history.size() - keep; i < history.size(); ++i)
      h.push_back(map_history_token(history[i]));
    return lookup(h, map_predicted_token(word));
  }

  double sentence_logprob(const std::vector<std::string>& sentence) const {
    std::vector<std::string> history(static_cast<size_t>(order() - 1), kSentBegin);
    double total = 0.0;
    auto advance = [&](const std::string& tok) {
      total += logprob(history, tok);
      if (!history.empty()) {
        history.erase(history.begin());
        history.push_back(map_history_token(tok));
      }
    };
    for (const auto& w : sentence) advance(w);
    advance(kSentEnd);
    return total;
  }

  // 10^(-(1/N) sum log10 P), N counting one end token per sentence.
  double perplexity(const std::vector<std::vector<std::string>>& text) const {
    ACTC_CHECK(!text.empty(), "empty text");
    double total = 0.0;
    long n = 0;
    for (const auto& sent : text) {
      total += sentence_logprob(sent);
      n += static_cast<long>(sent.size()) + 1;
    }
    return std::pow(10.0, -total / static_cast<double>(n));
  }

  void save_arpa(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "\\data\\\n";
    for (int k = 1; k <= order(); ++k)
      os << "ngram " << k << "=" << tables_[static_cast<size_t>(k) - 1].size() << "\n";
    os << "\n";
    char buf[64];
    auto fmt = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    for (int k = 1; k <= order(); ++k) {
      os << "\\" << k << "-grams:\n";
      for (const auto& [key, entry] : tables_[static_cast<size_t>(k) - 1]) {
        os << fmt(entry.logp) << '\t';
        for (size_t i = 0; i < key.size(); ++i) {
          if (i > 0) os << ' ';
          os << key[i];
        }
        if (entry.has_bow) os << '\t' << fmt(entry.bow);
        os << "\n";
      }
      os << "\n";
    }
    os << "\\end\\\n";
    if (!os) throw std::runtime_error("write failed: " + path);
  }

  static NGramModel load_arpa(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    // header
    std::vector<size_t> declared;
    bool in_data = false;
    while (std::getline(is, line)) {
      if (line == "\\data\\") {
        in_data = true;
        continue;
      }
      if (!in_data) continue;
      if (line.empty()) break;
      size_t eq = line.find('=');
      if (line.rfind("ngram ", 0) != 0 || eq == std::string::npos)
        throw std::runtime_error(path + ": bad header line: " + line);
      declared.push_back(static_cast<size_t>(std::stoul(line.substr(eq + 1))));
    }
    if (declared.empty()) throw std::runtime_error(path + ": missing \\data\\ section");

    NGramModel model;
    model.tables_.resize(declared.size());
    int k = 0;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line == "\\end\\") break;
      if (line.size() >= 2 && line[0] == '\\' && line.back() == ':') {
        k = std::stoi(line.substr(1));
        ACTC_CHECK(k >= 1 && k <= static_cast<int>(declared.size()), "bad n-gram section");
        continue;
      }
      ACTC_CHECK(k >= 1, "n-gram line before any section");
      std::istringstream ss(line);
      std::vector<std::string> fields;
      std::string f;
      while (ss >> f) fields.push_back(f);
      const size_t want = static_cast<size_t>(k) + 1;  // logp + k tokens [+ bow]
      if (fields.size() != want && fields.size() != want + 1)
        throw std::runtime_error(path + ": malformed " + std::to_string(k) + "-gram line: " + line);
      NGramEntry entry;
      entry.logp = std::stod(fields[0]);
      Key key(fields.begin() + 1, fields.begin() + 1 + k);
      if (fields.size() == want + 1) {
        entry.bow = std::stod(fields.back());
        entry.has_bow = true;
      }
      model.tables_[static_cast<size_t>(k) - 1][key] = entry;
    }
    for (size_t i = 0; i < declared.size(); ++i)
      if (model.tables_[i].size() != declared[i])
        throw std::runtime_error(path + ": header count mismatch at order " +
                                 std::to_string(i + 1));
    for (const auto& [key, entry] : model.tables_[0])
      if (key[0] != kSentBegin) model.pred_vocab_.push_back(key[0]);
    model.pred_set_.insert(model.pred_vocab_.begin(), model.pred_vocab_.end());
    return model;
  }

 private:
  friend NGramModel train_ngram(const std::vector<std::vector<std::string>>&, int, const Vocab&);

  std::string map_predicted_token(const std::string& tok) const {
    if (pred_set_.count(tok) > 0) return tok;
    return Vocab::oov_surface();
  }

  std::string map_history_token(const std::string& tok) const {
    if (tok == kSentBegin || pred_set_.count(tok) > 0) return tok;
    return Vocab::oov_surface();
  }

  double lookup(const Key& h, const std::string& w) const {
    Key key = h;
    key.push_back(w);
    const auto& table = tables_[h.size()];
    auto it = table.find(key);
    if (it != table.end()) return it->second.logp;
    if (h.empty())
      throw std::logic_error("closed-vocabulary model is missing a unigram for: " + w);
    double bow = 0.0;
    const auto& htable = tables_[h.size() - 1];
    auto hit = htable.find(h);
    if (hit != htable.end() && hit->second.has_bow) bow = hit->second.bow;
    return bow + lookup(Key(h.begin() + 1, h.end()), w);
  }

  std::vector<std::string> pred_vocab_;  // everything the model can predict
  std::set<std::string> pred_set_;
  std::vector<std::map<Key, NGramEntry>> tables_;  // tables_[k-1]: k-grams
};

// Interpolated absolute discounting over n-grams up to `order`; tokens not in
// the vocabulary count toward the OOV class. The predicted vocabulary is the
// vocab's content words plus the OOV class and the end-of-sentence token.
inline NGramModel train_ngram(const std::vector<std::vector<std::string>>& text, int order,
                              const Vocab& vocab) {
  ACTC_CHECK(order >= 1, "order must be >= 1");
  if (text.empty()) throw std::invalid_argument("empty text");
  constexpr double kDiscount = 0.75;

  NGramModel model;
  for (int id = Vocab::kNumReserved; id < vocab.size(); ++id)
    model.pred_vocab_.push_back(vocab.surface_of(id));
  model.pred_vocab_.push_back(Vocab::oov_surface());
  model.pred_vocab_.push_back(kSentEnd);
  std::sort(model.pred_vocab_.begin(), model.pred_vocab_.end());
  model.pred_set_.insert(model.pred_vocab_.begin(), model.pred_vocab_.end());

  using Key = NGramModel::Key;
  std::vector<std::map<Key, long>> counts(static_cast<size_t>(order));
  for (const auto& sent : text) {
    std::vector<std::string> padded(static_cast<size_t>(order) - 1, kSentBegin);
    for (const auto& tok : sent) padded.push_back(model.map_predicted_token(tok));
    padded.push_back(kSentEnd);
    for (size_t pos = static_cast<size_t>(order) - 1; pos < padded.size(); ++pos)
      for (int k = 1; k <= order; ++k)
        counts[static_cast<size_t>(k) - 1][Key(padded.begin() + (pos - k + 1),
                                               padded.begin() + pos + 1)] += 1;
  }

  // linear-space conditional probabilities, built lowest order first
  std::vector<std::map<Key, double>> probs(static_cast<size_t>(order));
  std::vector<std::map<Key, double>> gammas(static_cast<size_t>(order));  // per history

  long total_events = 0;
  for (const auto& [key, c] : counts[0]) total_events += c;
  const double n1p_root = static_cast<double>(counts[0].size());
  const double gamma_root = kDiscount * n1p_root / static_cast<double>(total_events);
  const double uniform = 1.0 / static_cast<double>(model.pred_vocab_.size());
  for (const auto& w : model.pred_vocab_) {
    auto it = counts[0].find({w});
    const double c = it == counts[0].end() ? 0.0 : static_cast<double>(it->second);
    probs[0][{w}] = std::max(c - kDiscount, 0.0) / static_cast<double>(total_events) +
                    gamma_root * uniform;
  }

  for (int k = 2; k <= order; ++k) {
    std::map<Key, long> hist_sum;
    std::map<Key, long> hist_distinct;
    for (const auto& [key, c] : counts[static_cast<size_t>(k) - 1]) {
      Key h(key.begin(), key.end() - 1);
      hist_sum[h] += c;
      hist_distinct[h] += 1;
    }
    for (const auto& [h, sum] : hist_sum)
      gammas[static_cast<size_t>(k) - 2][h] =
          kDiscount * static_cast<double>(hist_distinct[h]) / static_cast<double>(sum);
    for (const auto& [key, c] : counts[static_cast<size_t>(k) - 1]) {
      Key h(key.begin(), key.end() - 1);
      Key lower(key.begin() + 1, key.end());
      const double p_lower = probs[static_cast<size_t>(k) - 2].at(lower);
      probs[static_cast<size_t>(k) - 1][key] =
          (static_cast<double>(c) - kDiscount) / static_cast<double>(hist_sum[h]) +
          gammas[static_cast<size_t>(k) - 2][h] * p_lower;
    }
  }

  // assemble entries: probabilities, then backoff weights on their histories
  model.tables_.resize(static_cast<size_t>(order));
  for (int k = 1; k <= order; ++k)
    for (const auto& [key, p] : probs[static_cast<size_t>(k) - 1]) {
      NGramEntry e;
      e.logp = std::log10(p);
      model.tables_[static_cast<size_t>(k) - 1][key] = e;
    }
  for (int k = 1; k < order; ++k)
    for (const auto& [h, gamma] : gammas[static_cast<size_t>(k) - 1]) {
      auto& table = model.tables_[static_cast<size_t>(k) - 1];
      auto it = table.find(h);
      if (it == table.end()) {
        // history-only key (leading sentence-begin run): placeholder score
        NGramEntry e;
        e.logp = kPlaceholderLogp;
        it = table.emplace(h, e).first;
      }
      it->second.bow = std::log10(gamma);
      it->second.has_bow = true;
    }
  return model;
}

}  // namespace actc
