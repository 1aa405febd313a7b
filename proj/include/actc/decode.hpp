#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "actc/common.hpp"
#include "actc/corpus.hpp"
#include "actc/ctc.hpp"
#include "actc/lm.hpp"
#include "actc/vocab.hpp"

namespace actc {

inline const double kLn10 = std::log(10.0);

// ---------------------------------------------------------------------------
// Greedy decoding

struct GreedyResult {
  std::vector<int> word_ids;         // content ids only
  std::vector<std::string> words;    // surfaces for the ids above
  std::vector<Eigen::Index> frames;  // first frame of each word's argmax run
};

// Per-frame argmax (ties to the lowest id), merge adjacent repeats, drop
// blanks; OOV maps to silence and silence never reaches the hypothesis.
inline GreedyResult greedy_decode(const PosteriorGrid& grid, const Vocab& vocab) {
  ACTC_CHECK(grid.num_symbols() == vocab.size(), "grid width does not match vocabulary");
  GreedyResult res;
  int prev = -1;
  for (Eigen::Index t = 0; t < grid.num_frames(); ++t) {
    int best = 0;
    for (Eigen::Index k = 1; k < grid.num_symbols(); ++k)
      if (grid.probs(t, k) > grid.probs(t, best)) best = static_cast<int>(k);
    if (best == prev) continue;  // same run
    prev = best;
    if (best == Vocab::kBlankId || best == Vocab::kOovId || best == Vocab::kSilenceId) continue;
    res.word_ids.push_back(best);
    res.words.push_back(vocab.surface_of(best));
    res.frames.push_back(t);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Word priors (natural log), add-one smoothed over the content vocabulary.

struct PriorTable {
  Eigen::VectorXd log_prior;  // indexed by word id; reserved ids get the unseen value

  double at(int word_id) const { return log_prior(word_id); }
};

inline PriorTable word_priors(const std::vector<std::vector<std::string>>& transcripts,
                              const Vocab& vocab) {
  ACTC_CHECK(vocab.content_size() >= 1, "vocabulary has no content words");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(vocab.size());
  double total = 0.0;
  for (const auto& sent : transcripts)
    for (const auto& w : sent) {
      const int id = vocab.id_of(w);
      if (!vocab.is_reserved(id)) {
        counts(id) += 1.0;
        total += 1.0;
      }
    }
  PriorTable table;
  table.log_prior.resize(vocab.size());
  const double denom = total + vocab.content_size();
  for (int id = 0; id < vocab.size(); ++id)
    table.log_prior(id) = std::log((counts(id) + 1.0) / denom);
  return table;
}

// ---------------------------------------------------------------------------
// Sausage lattices

struct SausageArc {
  int word_id = -1;
  std::string word;
  double score = 0.0;  // ln posterior - ln prior
};

struct SausageSlot {
  Eigen::Index frame = -1;
  std::vector<SausageArc> arcs;  // sorted by descending score, ties lowest id
};

struct SausageLattice {
  std::string utt_id;
  std::vector<SausageSlot> slots;
};

// One slot per greedy word emission. Candidates are ranked by posterior at
// the emission frame (the 1-best word therefore always survives), and each
// kept arc is scored as acoustic log-likelihood: ln posterior - ln prior.
inline SausageLattice build_sausage(const PosteriorGrid& grid, int k, const PriorTable& priors,
                                    const Vocab& vocab) {
  ACTC_CHECK(k >= 1, "K must be >= 1");
  ACTC_CHECK(grid.num_symbols() == vocab.size(), "grid width does not match vocabulary");
  const GreedyResult greedy = greedy_decode(grid, vocab);
  SausageLattice lattice;
  for (size_t i = 0; i < greedy.word_ids.size(); ++i) {
    const Eigen::Index t = greedy.frames[i];
    std::vector<int> candidates;
    for (int id = Vocab::kNumReserved; id < vocab.size(); ++id) candidates.push_back(id);
    std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      if (grid.probs(t, a) != grid.probs(t, b)) return grid.probs(t, a) > grid.probs(t, b);
      return a < b;
    });
    if (static_cast<int>(candidates.size()) > k) candidates.resize(static_cast<size_t>(k));

    SausageSlot slot;
    slot.frame = t;
    for (int id : candidates) {
      SausageArc arc;
      arc.word_id = id;
      arc.word = vocab.surface_of(id);
      arc.score = safe_log(grid.probs(t, id)) - priors.at(id);
      slot.arcs.push_back(std::move(arc));
    }
    std::sort(slot.arcs.begin(), slot.arcs.end(), [](const SausageArc& a, const SausageArc& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.word_id < b.word_id;
    });
    lattice.slots.push_back(std::move(slot));
  }
  return lattice;
}

// Shared by the rescoring search and its enumeration-based tests: the fused
// increment for choosing `word` after `history` (surfaces).
inline double lm_fusion_term(const NGramModel& lm, double lm_weight,
                             const std::vector<std::string>& history, const std::string& word) {
  return lm_weight * kLn10 * lm.logprob(history, word);
}

// Exact search over arc combinations by dynamic programming over LM
// histories. Path score: per slot, acoustic arc score plus the fused LM
// increment; a fused end-of-sentence term closes every path. Ties prefer the
// lexicographically smallest arc-index path, matching plain enumeration.
inline std::vector<int> rescore_sausage(const SausageLattice& lattice, const NGramModel& lm,
                                        double lm_weight, const Vocab& vocab) {
  if (lattice.slots.empty()) return {};
  struct State {
    double score = 0.0;
    std::vector<int> arc_path;
  };
  const size_t ctx = static_cast<size_t>(std::max(0, lm.order() - 1));
  std::map<std::vector<std::string>, State> states;
  states[{}] = State{};

  for (const auto& slot : lattice.slots) {
    ACTC_CHECK(!slot.arcs.empty(), "slot with no arcs");
    std::map<std::vector<std::string>, State> next;
    for (const auto& [hist, st] : states) {
      for (size_t a = 0; a < slot.arcs.size(); ++a) {
        const SausageArc& arc = slot.arcs[a];
        const double score = st.score + arc.score + lm_fusion_term(lm, lm_weight, hist, arc.word);
        std::vector<std::string> hist2 = hist;
        hist2.push_back(arc.word);
        if (hist2.size() > ctx) hist2.erase(hist2.begin(), hist2.end() - static_cast<long>(ctx));
        std::vector<int> path = st.arc_path;
        path.push_back(static_cast<int>(a));
        auto it = next.find(hist2);
        if (it == next.end() || score > it->second.score ||
            (score == it->second.score && path < it->second.arc_path)) {
          next[hist2] = State{score, std::move(path)};
        }
      }
    }
    states = std::move(next);
  }

  const State* best = nullptr;
  double best_score = kNegInf;
  for (auto& [hist, st] : states) {
    const double final_score = st.score + lm_fusion_term(lm, lm_weight, hist, kSentEnd);
    if (best == nullptr || final_score > best_score ||
        (final_score == best_score && st.arc_path < best->arc_path)) {
      best = &st;
      best_score = final_score;
    }
  }
  std::vector<int> words;
  for (size_t i = 0; i < lattice.slots.size(); ++i)
    words.push_back(lattice.slots[i].arcs[static_cast<size_t>(best->arc_path[i])].word_id);
  return words;
}

struct OracleError {
  int errors = 0;
  int ref_len = 0;
  double wer = 0.0;
};

// Minimum word error rate over every path through the lattice: edit-distance
// DP where a slot matches a reference word if any of its arcs carries it.
inline OracleError oracle_error(const SausageLattice& lattice, const std::vector<int>& reference) {
  const size_t n = lattice.slots.size();
  const size_t m = reference.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) dp[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j) {
      bool match = false;
      for (const auto& arc : lattice.slots[i - 1].arcs)
        match = match || arc.word_id == reference[j - 1];
      dp[i][j] = std::min({dp[i - 1][j - 1] + (match ? 0 : 1), dp[i - 1][j] + 1, dp[i][j - 1] + 1});
    }
  OracleError res;
  res.errors = dp[n][m];
  res.ref_len = static_cast<int>(m);
  if (m > 0)
    res.wer = static_cast<double>(res.errors) / static_cast<double>(m);
  else
    res.wer = res.errors == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return res;
}

// ---------------------------------------------------------------------------
// Lexicon trie

class LexiconTrie {
 public:
  struct Node {
    std::map<int, int> children;  // phone id -> node index
    std::vector<int> words;       // word ids completed at this node
  };

  LexiconTrie() { nodes_.emplace_back(); }

  // Builds from `word surface -> phone surfaces`, resolving ids through the
  // two vocabularies. Homophones stack on one terminal.
  LexiconTrie(const Lexicon& lexicon, const Vocab& word_vocab, const Vocab& phone_vocab)
      : LexiconTrie() {
    for (const auto& [word, pron] : lexicon) {
      const int word_id = word_vocab.id_of(word);
      ACTC_CHECK(!word_vocab.is_reserved(word_id), "lexicon word missing from vocabulary: " + word);
      std::vector<int> phones;
      for (const auto& p : pron) {
        const int pid = phone_vocab.id_of(p);
        ACTC_CHECK(!phone_vocab.is_reserved(pid), "unknown phone in lexicon: " + p);
        phones.push_back(pid);
      }
      add(word_id, phones);
    }
  }

  void add(int word_id, const std::vector<int>& phones) {
    ACTC_CHECK(!phones.empty(), "pronunciation must have at least one phone");
    int node = 0;
    for (int p : phones) {
      auto it = nodes_[static_cast<size_t>(node)].children.find(p);
      if (it == nodes_[static_cast<size_t>(node)].children.end()) {
        nodes_.emplace_back();
        it = nodes_[static_cast<size_t>(node)].children.emplace(p, static_cast<int>(nodes_.size()) - 1)
                 .first;
      }
      node = it->second;
    }
    auto& words = nodes_[static_cast<size_t>(node)].words;
    if (std::find(words.begin(), words.end(), word_id) == words.end()) words.push_back(word_id);
    std::sort(words.begin(), words.end());
    ++n_words_;
  }

  const Node& node(int idx) const { return nodes_[static_cast<size_t>(idx)]; }
  size_t n_nodes() const { return nodes_.size(); }
  bool empty() const { return n_words_ == 0; }

 private:
  std::vector<Node> nodes_;
  int n_words_ = 0;
};

// ---------------------------------------------------------------------------
// Lexicon-constrained CTC prefix beam search with LM shallow fusion

struct BeamConfig {
  double lm_weight = 1.0;
  double word_insertion_penalty = 0.0;  // added per emitted word (natural log)
  int beam = 16;
};

namespace detail {

struct BeamKey {
  std::vector<int> words;
  int node = 0;
  int last_phone = -1;

  bool operator<(const BeamKey& o) const {
    if (words != o.words) return words < o.words;
    if (node != o.node) return node < o.node;
    return last_phone < o.last_phone;
  }
};

struct BeamMass {
  double pb = kNegInf;   // prefix mass with last frame blank
  double pnb = kNegInf;  // prefix mass with last frame non-blank

  double total() const { return log_add(pb, pnb); }
};

}  // namespace detail

// Search over word sequences: hypotheses are (emitted words, trie node,
// last phone) with separate blank/non-blank prefix mass, so each hypothesis
// tracks the total probability of all frame paths that collapse to its
// phone string. Completing a pronunciation spawns a committed copy at the
// root with lm_weight * ln P_LM + penalty folded in; the copy receives only
// the fresh extension mass for that frame and from then on evolves through
// its own blank/repeat updates, so no path is ever counted twice. Only
// hypotheses at the root (no dangling partial word) can finish, where a
// fused end-of-sentence term is added. A beam wide enough to avoid pruning
// therefore scores every word sequence exactly as exhaustive enumeration
// would; the best final score is written to best_score_out when given
// (negative infinity when nothing finishes).
inline std::vector<int> beam_decode(const PosteriorGrid& phone_grid, const LexiconTrie& trie,
                                    const NGramModel& lm, const Vocab& word_vocab,
                                    const BeamConfig& cfg, double* best_score_out = nullptr) {
  ACTC_CHECK(cfg.beam >= 1, "beam must be >= 1");
  if (trie.empty()) throw std::invalid_argument("empty lexicon trie");
  using detail::BeamKey;
  using detail::BeamMass;
  const Eigen::MatrixXd lp = phone_grid.log_probs();
  const Eigen::Index T = phone_grid.num_frames();

  auto surfaces = [&](const std::vector<int>& ids) {
    std::vector<std::string> s;
    s.reserve(ids.size());
    for (int id : ids) s.push_back(word_vocab.surface_of(id));
    return s;
  };

  std::map<BeamKey, BeamMass> cur;
  cur[BeamKey{}] = BeamMass{0.0, kNegInf};  // empty path: blank mass 1

  for (Eigen::Index t = 0; t < T; ++t) {
    std::map<BeamKey, BeamMass> next;
    for (const auto& [key, mass] : cur) {
      // stay on the prefix via blank
      {
        BeamMass& m = next[key];
        m.pb = log_add(m.pb, mass.total() + lp(t, Vocab::kBlankId));
      }
      // stay on the prefix by repeating its last phone
      if (key.last_phone >= 0) {
        BeamMass& m = next[key];
        m.pnb = log_add(m.pnb, mass.pnb + lp(t, key.last_phone));
      }
      // extend into the trie; entering a node that completes a pronunciation
      // also spawns the committed hypothesis back at the root
      for (const auto& [phone, child] : trie.node(key.node).children) {
        const double src = phone == key.last_phone ? mass.pb : mass.total();
        if (src == kNegInf) continue;
        const double ext = src + lp(t, phone);
        if (!trie.node(child).children.empty()) {
          // keep the dangling partial word only where it can still grow
          BeamKey grown = key;
          grown.node = child;
          grown.last_phone = phone;
          BeamMass& m = next[grown];
          m.pnb = log_add(m.pnb, ext);
        }
        for (int word_id : trie.node(child).words) {
          const double lm_term =
              lm_fusion_term(lm, cfg.lm_weight, surfaces(key.words),
                             word_vocab.surface_of(word_id)) +
              cfg.word_insertion_penalty;
          BeamKey emitted;
          emitted.words = key.words;
          emitted.words.push_back(word_id);
          emitted.node = 0;
          emitted.last_phone = phone;
          BeamMass& m = next[emitted];
          m.pnb = log_add(m.pnb, ext + lm_term);
        }
      }
    }
    // prune to the beam
    if (next.size() > static_cast<size_t>(cfg.beam)) {
      std::vector<std::pair<const BeamKey*, double>> ranked;
      ranked.reserve(next.size());
      for (const auto& [key, mass] : next) ranked.emplace_back(&key, mass.total());
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return *a.first < *b.first;
      });
      std::map<BeamKey, BeamMass> kept;
      for (int i = 0; i < cfg.beam; ++i) kept.emplace(*ranked[static_cast<size_t>(i)].first,
                                                      next.at(*ranked[static_cast<size_t>(i)].first));
      next = std::move(kept);
    }
    cur = std::move(next);
  }

  // finalize: only completed-word hypotheses count; fold the end term and
  // sum the mass of identical word sequences
  std::map<std::vector<int>, double> finals;
  for (const auto& [key, mass] : cur) {
    if (key.node != 0) continue;
    auto it = finals.find(key.words);
    if (it == finals.end())
      finals[key.words] = mass.total();
    else
      it->second = log_add(it->second, mass.total());
  }
  std::vector<int> best_words;
  double best_score = kNegInf;
  bool have = false;
  for (const auto& [words, mass] : finals) {
    const double score = mass + lm_fusion_term(lm, cfg.lm_weight, surfaces(words), kSentEnd);
    if (!have || score > best_score || (score == best_score && words < best_words)) {
      best_words = words;
      best_score = score;
      have = true;
    }
  }
  if (best_score_out != nullptr) *best_score_out = best_score;
  return best_words;
}

// ---------------------------------------------------------------------------
// File formats

inline void save_lattice(const std::string& path, const SausageLattice& lattice) {
  nlohmann::json j;
  j["utt"] = lattice.utt_id;
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& slot : lattice.slots) {
    nlohmann::json arcs = nlohmann::json::array();
    for (const auto& arc : slot.arcs) arcs.push_back({{"word", arc.word}, {"score", arc.score}});
    slots.push_back(std::move(arcs));
  }
  j["slots"] = std::move(slots);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << j.dump(2) << '\n';
}

inline SausageLattice load_lattice(const std::string& path, const Vocab& vocab) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": bad lattice JSON: " + e.what());
  }
  SausageLattice lattice;
  lattice.utt_id = j.at("utt").get<std::string>();
  for (const auto& slot_json : j.at("slots")) {
    SausageSlot slot;
    for (const auto& arc_json : slot_json) {
      SausageArc arc;
      arc.word = arc_json.at("word").get<std::string>();
      arc.score = arc_json.at("score").get<double>();
      arc.word_id = vocab.id_of(arc.word);
      slot.arcs.push_back(std::move(arc));
    }
    lattice.slots.push_back(std::move(slot));
  }
  return lattice;
}

using HypothesisList = std::vector<std::pair<std::string, std::vector<std::string>>>;

inline void save_hypotheses(const std::string& path, const HypothesisList& hyps) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& [id, words] : hyps) {
    os << id;
    for (const auto& w : words) os << ' ' << w;
    os << '\n';
  }
}

inline HypothesisList load_hypotheses(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  HypothesisList hyps;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, w;
    if (!(ss >> id))
      throw std::runtime_error(path + ": malformed hypothesis line " + std::to_string(line_no));
    std::vector<std::string> words;
    while (ss >> w) words.push_back(w);
    hyps.emplace_back(id, std::move(words));
  }
  return hyps;
}

}  // namespace actc
