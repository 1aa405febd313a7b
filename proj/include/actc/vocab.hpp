#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "actc/common.hpp"

namespace actc {

enum class UnitKind { kPhone, kWord };

// Token/id bijection with three reserved entries. Ids are stable across
// runs: reserved tokens first, then content tokens by descending count,
// ties broken lexicographically.
class Vocab {
 public:
  static constexpr int kBlankId = 0;
  static constexpr int kOovId = 1;
  static constexpr int kSilenceId = 2;
  static constexpr int kNumReserved = 3;

  static const std::string& blank_surface() {
    static const std::string s = "<blank>";
    return s;
  }
  static const std::string& oov_surface() {
    static const std::string s = "<oov>";
    return s;
  }
  static const std::string& silence_surface() {
    static const std::string s = "<sil>";
    return s;
  }

  explicit Vocab(UnitKind unit = UnitKind::kWord) : unit_(unit) {
    add_reserved(blank_surface());
    add_reserved(oov_surface());
    add_reserved(silence_surface());
  }

  UnitKind unit() const { return unit_; }

  int size() const { return static_cast<int>(tokens_.size()); }
  int content_size() const { return size() - kNumReserved; }

  // Content tokens get ids kNumReserved, kNumReserved+1, ... in insertion order.
  int add_token(const std::string& surface, long count = 0) {
    auto it = ids_.find(surface);
    if (it != ids_.end()) throw std::invalid_argument("duplicate token: " + surface);
    int id = size();
    tokens_.push_back(surface);
    counts_.push_back(count);
    ids_.emplace(surface, id);
    return id;
  }

  bool contains(const std::string& surface) const { return ids_.count(surface) > 0; }

  int id_of(const std::string& surface) const {
    auto it = ids_.find(surface);
    return it == ids_.end() ? kOovId : it->second;
  }

  const std::string& surface_of(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
    return tokens_[static_cast<size_t>(id)];
  }

  long count_of(int id) const { return counts_[static_cast<size_t>(id)]; }

  bool is_reserved(int id) const { return id < kNumReserved; }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    for (int id = 0; id < size(); ++id)
      os << id << '\t' << tokens_[static_cast<size_t>(id)] << '\t'
         << counts_[static_cast<size_t>(id)] << '\n';
    if (!os) throw std::runtime_error("write failed: " + path);
  }

  static Vocab load(const std::string& path, UnitKind unit) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    Vocab v(unit);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      int id;
      std::string surface;
      long count;
      if (!(ss >> id >> surface >> count))
        throw std::runtime_error(path + ": malformed vocab line " + std::to_string(line_no));
      if (id < kNumReserved) {
        if (surface != v.surface_of(id))
          throw std::runtime_error(path + ": unexpected reserved token '" + surface + "'");
        continue;
      }
      int got = v.add_token(surface, count);
      if (got != id)
        throw std::runtime_error(path + ": non-contiguous id at line " + std::to_string(line_no));
    }
    return v;
  }

 private:
  void add_reserved(const std::string& surface) {
    tokens_.push_back(surface);
    counts_.push_back(0);
    ids_.emplace(surface, static_cast<int>(tokens_.size()) - 1);
  }

  UnitKind unit_;
  std::vector<std::string> tokens_;
  std::vector<long> counts_;
  std::unordered_map<std::string, int> ids_;
};

// Keeps tokens seen at least min_count times across all transcripts.
// Each transcript occurrence stands in for one acoustic example.
inline Vocab build_vocab(const std::vector<std::vector<std::string>>& transcripts, long min_count,
                         UnitKind unit) {
  ACTC_CHECK(min_count >= 1, "min_count must be >= 1");
  if (transcripts.empty()) throw std::invalid_argument("empty corpus");
  std::map<std::string, long> counts;
  for (const auto& sent : transcripts)
    for (const auto& tok : sent) counts[tok] += 1;
  std::vector<std::pair<std::string, long>> kept;
  Vocab probe(unit);
  for (const auto& [tok, c] : counts) {
    if (probe.contains(tok)) continue;  // reserved surfaces never become content tokens
    if (c >= min_count) kept.emplace_back(tok, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v(unit);
  for (const auto& [tok, c] : kept) v.add_token(tok, c);
  return v;
}

// Total: anything unknown (including the blank surface, which may never
// appear in a transcript) maps to the OOV id.
inline std::vector<int> encode_transcript(const std::vector<std::string>& words,
                                          const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) {
    int id = vocab.id_of(w);
    ids.push_back(id == Vocab::kBlankId ? Vocab::kOovId : id);
  }
  return ids;
}

inline std::vector<std::string> decode_ids(const std::vector<int>& ids, const Vocab& vocab) {
  std::vector<std::string> words;
  words.reserve(ids.size());
  for (int id : ids) words.push_back(vocab.surface_of(id));
  return words;
}

}  // namespace actc
