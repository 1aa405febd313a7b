#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "actc/common.hpp"
#include "actc/features.hpp"
#include "actc/vocab.hpp"

namespace actc {

struct Utterance {
  std::string id;
  FeatureMatrix features;            // may be empty when only feature_file is known
  std::string feature_file;
  std::vector<std::string> words;    // word tier
  std::vector<std::string> phones;   // phone tier, may be empty

  Eigen::Index num_frames() const { return features.num_frames(); }
};

struct BatchPlan {
  std::vector<std::vector<std::string>> groups;  // utterance ids
  int batch_size = 1;
};

// Sort by non-increasing frame count (ties by id), then chunk. The last
// group may be smaller.
inline BatchPlan make_batches(const std::vector<Utterance>& utterances, int batch_size) {
  ACTC_CHECK(batch_size >= 1, "batch_size must be >= 1");
  std::vector<const Utterance*> order;
  order.reserve(utterances.size());
  for (const auto& u : utterances) order.push_back(&u);
  std::sort(order.begin(), order.end(), [](const Utterance* a, const Utterance* b) {
    if (a->num_frames() != b->num_frames()) return a->num_frames() > b->num_frames();
    return a->id < b->id;
  });
  BatchPlan plan;
  plan.batch_size = batch_size;
  for (size_t i = 0; i < order.size(); i += static_cast<size_t>(batch_size)) {
    std::vector<std::string> group;
    for (size_t j = i; j < std::min(order.size(), i + static_cast<size_t>(batch_size)); ++j)
      group.push_back(order[j]->id);
    plan.groups.push_back(std::move(group));
  }
  return plan;
}

// Parameters of the synthetic desk-scale corpus. The "language" (templates,
// pronunciations, successor structure) is a pure function of the config,
// including language_seed; per-corpus sampling (word choices, noise) comes
// from the separate seed argument, so several corpora can share a language.
struct SynthConfig {
  int n_utts = 100;
  int vocab_size = 10;
  int words_per_utt = 3;
  int frames_per_symbol = 4;
  int feature_dim = 8;
  double noise_std = 0.0;
  int n_phones = 0;       // 0: one template per word, no phone tier
  int max_pron_len = 3;   // phone mode: pronunciation lengths 1..max_pron_len
  int n_successors = 0;   // 0: uniform word sequences; else bigram walk with this fan-out
  uint64_t language_seed = 1234;
};

using Lexicon = std::map<std::string, std::vector<std::string>>;

inline void save_lexicon(const std::string& path, const Lexicon& lex) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& [word, pron] : lex) {
    os << word;
    for (const auto& p : pron) os << ' ' << p;
    os << '\n';
  }
}

inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  Lexicon lex;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word, phone;
    ss >> word;
    std::vector<std::string> pron;
    while (ss >> phone) pron.push_back(phone);
    if (pron.empty()) throw std::runtime_error(path + ": lexicon entry without phones: " + word);
    lex[word] = pron;
  }
  return lex;
}

struct SynthCorpus {
  std::vector<Utterance> utterances;
  Vocab word_vocab{UnitKind::kWord};
  Vocab phone_vocab{UnitKind::kPhone};
  Lexicon lexicon;  // empty in word-template mode
};

namespace detail {

inline std::string synth_word_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%03d", i);
  return buf;
}

inline std::string synth_phone_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%02d", i);
  return buf;
}

// Everything derived from config alone: templates, pronunciations, successor
// sets. Template entries are standard normal draws.
struct SynthLanguage {
  int n_words = 0;
  Eigen::MatrixXd templates;                   // word or phone templates, row per symbol
  std::vector<std::vector<int>> prons;         // per word, phone indices (phone mode)
  std::vector<std::vector<int>> successors;    // per word (bigram mode)

  explicit SynthLanguage(const SynthConfig& cfg) : n_words(cfg.vocab_size) {
    Rng rng(cfg.language_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n_templates = cfg.n_phones > 0 ? cfg.n_phones : cfg.vocab_size;
    templates.resize(n_templates, cfg.feature_dim);
    for (int i = 0; i < n_templates; ++i)
      for (int d = 0; d < cfg.feature_dim; ++d) templates(i, d) = normal(rng);
    if (cfg.n_phones > 0) {
      const int max_len = std::min(cfg.max_pron_len, cfg.frames_per_symbol);
      std::uniform_int_distribution<int> len_dist(1, std::max(1, max_len));
      std::uniform_int_distribution<int> phone_dist(0, cfg.n_phones - 1);
      std::set<std::vector<int>> used;
      for (int w = 0; w < cfg.vocab_size; ++w) {
        std::vector<int> pron;
        do {
          pron.resize(static_cast<size_t>(len_dist(rng)));
          for (auto& p : pron) p = phone_dist(rng);
        } while (used.count(pron) > 0);
        used.insert(pron);
        prons.push_back(std::move(pron));
      }
    }
    if (cfg.n_successors > 0) {
      std::vector<int> all(static_cast<size_t>(cfg.vocab_size));
      std::iota(all.begin(), all.end(), 0);
      for (int w = 0; w < cfg.vocab_size; ++w) {
        std::vector<int> pool = all;
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(static_cast<size_t>(std::min(cfg.n_successors, cfg.vocab_size)));
        std::sort(pool.begin(), pool.end());
        successors.push_back(std::move(pool));
      }
    }
  }

  std::vector<int> sample_sentence(int len, Rng& rng) const {
    std::vector<int> sent(static_cast<size_t>(len));
    if (successors.empty()) {
      std::uniform_int_distribution<int> any(0, n_words - 1);
      for (auto& w : sent) w = any(rng);
    } else {
      std::uniform_int_distribution<int> start(0, static_cast<int>(successors.size()) - 1);
      int cur = start(rng);
      for (auto& w : sent) {
        w = cur;
        const auto& next = successors[static_cast<size_t>(cur)];
        std::uniform_int_distribution<int> pick(0, static_cast<int>(next.size()) - 1);
        cur = next[static_cast<size_t>(pick(rng))];
      }
    }
    return sent;
  }
};

inline void validate_synth_config(const SynthConfig& cfg) {
  ACTC_CHECK(cfg.vocab_size >= 2, "need at least 2 distinguishable symbols");
  ACTC_CHECK(cfg.n_utts >= 1 && cfg.words_per_utt >= 1 && cfg.frames_per_symbol >= 1 &&
                 cfg.feature_dim >= 1,
             "all counts must be >= 1");
  ACTC_CHECK(cfg.noise_std >= 0.0, "noise_std must be >= 0");
}

}  // namespace detail

// Sentences from the same synthetic language (for LM / embedding training).
inline std::vector<std::vector<std::string>> synth_sentences(const SynthConfig& cfg,
                                                             int n_sentences, int len,
                                                             uint64_t seed) {
  detail::validate_synth_config(cfg);
  detail::SynthLanguage lang(cfg);
  Rng rng(seed);
  std::vector<std::vector<std::string>> out;
  out.reserve(static_cast<size_t>(n_sentences));
  for (int i = 0; i < n_sentences; ++i) {
    std::vector<std::string> sent;
    for (int w : lang.sample_sentence(len, rng)) sent.push_back(detail::synth_word_name(w));
    out.push_back(std::move(sent));
  }
  return out;
}

// Template-plus-noise corpus. In word mode each word contributes
// frames_per_symbol copies of its template; in phone mode the word's
// frames_per_symbol frames are split as evenly as possible across its
// pronunciation, each phone contributing its own template.
inline SynthCorpus synth_corpus(const SynthConfig& cfg, uint64_t seed) {
  detail::validate_synth_config(cfg);
  detail::SynthLanguage lang(cfg);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthCorpus corpus;
  for (int w = 0; w < cfg.vocab_size; ++w)
    corpus.word_vocab.add_token(detail::synth_word_name(w));
  if (cfg.n_phones > 0) {
    for (int p = 0; p < cfg.n_phones; ++p)
      corpus.phone_vocab.add_token(detail::synth_phone_name(p));
    for (int w = 0; w < cfg.vocab_size; ++w) {
      std::vector<std::string> pron;
      for (int p : lang.prons[static_cast<size_t>(w)])
        pron.push_back(detail::synth_phone_name(p));
      corpus.lexicon[detail::synth_word_name(w)] = std::move(pron);
    }
  }

  for (int u = 0; u < cfg.n_utts; ++u) {
    Utterance utt;
    char id[24];
    std::snprintf(id, sizeof(id), "utt%05d", u);
    utt.id = id;
    const std::vector<int> sent = lang.sample_sentence(cfg.words_per_utt, rng);
    const Eigen::Index t_total =
        static_cast<Eigen::Index>(cfg.words_per_utt) * cfg.frames_per_symbol;
    utt.features.frames.resize(t_total, cfg.feature_dim);
    utt.features.frame_shift = 0.01;
    utt.features.source = utt.id;
    Eigen::Index t = 0;
    for (int w : sent) {
      utt.words.push_back(detail::synth_word_name(w));
      if (cfg.n_phones == 0) {
        for (int k = 0; k < cfg.frames_per_symbol; ++k)
          utt.features.frames.row(t++) = lang.templates.row(w);
      } else {
        const auto& pron = lang.prons[static_cast<size_t>(w)];
        const int n = static_cast<int>(pron.size());
        for (int p : pron) utt.phones.push_back(detail::synth_phone_name(p));
        for (int k = 0; k < cfg.frames_per_symbol; ++k) {
          const int idx = std::min(n - 1, k * n / cfg.frames_per_symbol);
          utt.features.frames.row(t++) = lang.templates.row(pron[static_cast<size_t>(idx)]);
        }
      }
    }
    if (cfg.noise_std > 0.0) {
      for (Eigen::Index r = 0; r < t_total; ++r)
        for (int d = 0; d < cfg.feature_dim; ++d)
          utt.features.frames(r, d) += cfg.noise_std * normal(rng);
    }
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

// Manifest: one JSON object per line with id, feature_file, words, phones.
inline void save_manifest(const std::string& path, const std::vector<Utterance>& utterances) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& u : utterances) {
    nlohmann::json j;
    j["id"] = u.id;
    j["feature_file"] = u.feature_file;
    j["words"] = u.words;
    j["phones"] = u.phones;
    os << j.dump() << '\n';
  }
}

// Loads a manifest; when load_features is set, reads each feature file
// relative to the manifest's directory (absolute paths pass through).
inline std::vector<Utterance> load_manifest(const std::string& path, bool load_feats = true) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<Utterance> utterances;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path + ": bad manifest line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    Utterance u;
    u.id = j.at("id").get<std::string>();
    u.feature_file = j.value("feature_file", std::string());
    u.words = j.value("words", std::vector<std::string>());
    u.phones = j.value("phones", std::vector<std::string>());
    if (load_feats && !u.feature_file.empty()) {
      std::filesystem::path fp(u.feature_file);
      if (fp.is_relative()) fp = base / fp;
      u.features = load_features(fp.string());
    }
    utterances.push_back(std::move(u));
  }
  return utterances;
}

// Writes feature files plus manifest, vocab, and lexicon under dir.
// Returns the manifest path.
inline std::string save_corpus(const std::string& dir, SynthCorpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "feats");
  for (auto& u : corpus.utterances) {
    u.feature_file = "feats/" + u.id + ".feat";
    save_features((fs::path(dir) / u.feature_file).string(), u.features);
  }
  const std::string manifest = (fs::path(dir) / "manifest.jsonl").string();
  save_manifest(manifest, corpus.utterances);
  corpus.word_vocab.save((fs::path(dir) / "vocab.words.txt").string());
  if (corpus.phone_vocab.content_size() > 0) {
    corpus.phone_vocab.save((fs::path(dir) / "vocab.phones.txt").string());
    save_lexicon((fs::path(dir) / "lexicon.txt").string(), corpus.lexicon);
  }
  return manifest;
}

}  // namespace actc
