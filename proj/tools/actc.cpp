// actc: desk-scale acoustics-to-word CTC toolkit.
//
// Subcommands: prepare | features | train | train-lm | train-glove |
// decode | rescore | score. Exit codes: 0 success, 2 input error,
// 3 numeric divergence, 4 consistency mismatch. Set ACTC_LOG to
// debug|info|warn|error to control logging.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actc/common.hpp"
#include "actc/corpus.hpp"
#include "actc/ctc.hpp"
#include "actc/decode.hpp"
#include "actc/embeddings.hpp"
#include "actc/features.hpp"
#include "actc/lm.hpp"
#include "actc/nnet.hpp"
#include "actc/score.hpp"
#include "actc/trainer.hpp"
#include "actc/vocab.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitInputError = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitMismatch = 4;

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty() || !fs::exists(path))
    throw CliError(kExitInputError, "missing " + what + ": " + (path.empty() ? "(unset)" : path));
}

std::vector<std::vector<std::string>> load_sentences(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CliError(kExitInputError, "cannot open: " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    std::vector<std::string> sent;
    std::string w;
    while (ss >> w) sent.push_back(w);
    if (!sent.empty()) out.push_back(std::move(sent));
  }
  return out;
}

void add_common_output(CLI::App* sub, std::string& out_dir) {
  sub->add_option("--out", out_dir, "output directory")->required();
}

void setup_config(CLI::App* sub) {
  sub->add_option("--config",
                  "flat key = value configuration file supplying defaults for this "
                  "subcommand (command-line flags win; required paths stay command-line only)");
}

std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Applies `key = value` lines from the subcommand's --config file to its own
// options. Options already given on the command line keep their values;
// unknown keys are input errors. Runs inside the subcommand callback, after
// normal parsing.
void apply_config(CLI::App* sub) {
  const CLI::Option* copt = sub->get_option("--config");
  if (copt->count() == 0) return;
  const std::string path = copt->as<std::string>();
  require_file(path, "config file");
  std::ifstream is(path);
  if (!is) throw CliError(kExitInputError, "cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string entry = trim_copy(line);
    if (entry.empty() || entry[0] == '#') continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw CliError(kExitInputError,
                     path + ": malformed config line " + std::to_string(lineno));
    const std::string key = trim_copy(entry.substr(0, eq));
    std::string value = trim_copy(entry.substr(eq + 1));
    if (value.size() >= 2 &&
        ((value.front() == '"' && value.back() == '"') ||
         (value.front() == '\'' && value.back() == '\'')))
      value = value.substr(1, value.size() - 2);
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw CliError(kExitInputError, path + ": unknown config key: " + key);
    }
    if (opt->count() > 0) continue;  // command-line flags win
    opt->add_result(value);
    opt->run_callback();
  }
}

void ensure_parent_dir(const std::string& file_path) {
  const fs::path parent = fs::path(file_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareOpts {
  actc::SynthConfig synth;
  uint64_t seed = 0;
  int heldout = 0;
  int lm_sentences = 0;
  int lm_sentence_len = 0;
  std::string out_dir;
};

void run_prepare(const PrepareOpts& o) {
  actc::SynthCorpus corpus = actc::synth_corpus(o.synth, o.seed);
  fs::create_directories(o.out_dir);
  const std::string manifest = actc::save_corpus(o.out_dir, corpus);

  actc::HypothesisList refs;
  for (const auto& u : corpus.utterances) refs.emplace_back(u.id, u.words);
  actc::save_hypotheses((fs::path(o.out_dir) / "refs.txt").string(), refs);

  if (o.heldout > 0) {
    if (o.heldout >= o.synth.n_utts)
      throw CliError(kExitInputError, "heldout count must be smaller than the corpus");
    const size_t split = corpus.utterances.size() - static_cast<size_t>(o.heldout);
    std::vector<actc::Utterance> train(corpus.utterances.begin(),
                                       corpus.utterances.begin() + static_cast<long>(split));
    std::vector<actc::Utterance> held(corpus.utterances.begin() + static_cast<long>(split),
                                      corpus.utterances.end());
    actc::save_manifest((fs::path(o.out_dir) / "manifest.train.jsonl").string(), train);
    actc::save_manifest((fs::path(o.out_dir) / "manifest.heldout.jsonl").string(), held);
    actc::HypothesisList held_refs(refs.begin() + static_cast<long>(split), refs.end());
    actc::save_hypotheses((fs::path(o.out_dir) / "refs.heldout.txt").string(), held_refs);
  }

  if (o.lm_sentences > 0) {
    const int len = o.lm_sentence_len > 0 ? o.lm_sentence_len : o.synth.words_per_utt;
    const auto sentences = actc::synth_sentences(o.synth, o.lm_sentences, len, o.seed + 1);
    std::ofstream os((fs::path(o.out_dir) / "lm_text.txt").string());
    for (const auto& sent : sentences) {
      for (size_t i = 0; i < sent.size(); ++i) os << (i ? " " : "") << sent[i];
      os << '\n';
    }
  }
  std::cout << "prepared " << corpus.utterances.size() << " utterances in " << o.out_dir << "\n"
            << "manifest: " << manifest << "\n";
}

// ---------------------------------------------------------------------------
// features

struct FeaturesOpts {
  std::string wav_path;
  std::string out_feat;
  double window_sec = 0.025;
  double hop_sec = 0.010;
  int n_mels = 40;
  int stack = 1;
  int decimate = 1;
  std::string speaker_csv;
};

void run_features(const FeaturesOpts& o) {
  require_file(o.wav_path, "wav file");
  const actc::WavData wav = actc::read_wav(o.wav_path);
  actc::FeatureMatrix feats =
      actc::logmel(wav.samples, wav.sample_rate, o.window_sec, o.hop_sec, o.n_mels);
  feats = actc::stack_decimate(feats, o.stack, o.decimate);
  if (!o.speaker_csv.empty()) {
    std::vector<double> vals;
    std::istringstream ss(o.speaker_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    Eigen::VectorXd s = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<long>(vals.size()));
    feats = actc::append_speaker_vector(feats, s);
  }
  ensure_parent_dir(o.out_feat);
  actc::save_features(o.out_feat, feats);
  std::cout << "wrote " << feats.num_frames() << " x " << feats.dim() << " features to "
            << o.out_feat << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string manifest;
  std::string heldout_manifest;
  std::string unit = "word";
  std::string vocab_path;
  std::string phone_vocab_path;
  std::string init = "random";
  std::string phone_model_path;
  std::vector<std::string> embedding_paths;
  int layers = 2;
  int hidden = 32;
  bool unidirectional = false;
  int branch_at = 0;
  actc::TrainConfig cfg;
  std::string out_dir;
};

void run_train(const TrainOpts& o) {
  require_file(o.manifest, "corpus manifest");
  const std::vector<actc::Utterance> utts = actc::load_manifest(o.manifest);
  if (utts.empty()) throw CliError(kExitInputError, "manifest has no utterances: " + o.manifest);
  std::vector<actc::Utterance> heldout;
  if (!o.heldout_manifest.empty()) {
    require_file(o.heldout_manifest, "heldout manifest");
    heldout = actc::load_manifest(o.heldout_manifest);
  }

  actc::LayerSpec spec;
  spec.n_layers = o.layers;
  spec.hidden = o.hidden;
  spec.bidirectional = !o.unidirectional;
  spec.input_dim = static_cast<int>(utts.front().features.dim());

  actc::Vocab word_vocab(actc::UnitKind::kWord);
  actc::Vocab phone_vocab(actc::UnitKind::kPhone);
  const bool multitask = o.unit == "word" && (o.cfg.multitask_alpha > 0.0 || o.init == "hier-ctc");

  auto encode_all = [&](const std::vector<actc::Utterance>& src) {
    std::vector<actc::TrainUtterance> out;
    out.reserve(src.size());
    for (const auto& u : src) {
      actc::TrainUtterance t;
      t.id = u.id;
      t.features = u.features;
      if (o.unit == "word") {
        t.word_targets = actc::encode_transcript(u.words, word_vocab);
        if (multitask) {
          if (u.phones.empty())
            throw CliError(kExitInputError, "multitask training needs phone transcripts: " + u.id);
          t.phone_targets = actc::encode_transcript(u.phones, phone_vocab);
        }
      } else {
        if (u.phones.empty())
          throw CliError(kExitInputError, "phone training needs phone transcripts: " + u.id);
        t.word_targets = actc::encode_transcript(u.phones, phone_vocab);
      }
      out.push_back(std::move(t));
    }
    return out;
  };

  if (o.unit == "word") {
    require_file(o.vocab_path, "word vocabulary");
    word_vocab = actc::Vocab::load(o.vocab_path, actc::UnitKind::kWord);
    spec.n_word_outputs = word_vocab.size();
    if (multitask) {
      require_file(o.phone_vocab_path, "phone vocabulary");
      phone_vocab = actc::Vocab::load(o.phone_vocab_path, actc::UnitKind::kPhone);
      spec.n_phone_outputs = phone_vocab.size();
      spec.branch_at = o.branch_at;
    }
  } else if (o.unit == "phone") {
    require_file(o.phone_vocab_path, "phone vocabulary");
    phone_vocab = actc::Vocab::load(o.phone_vocab_path, actc::UnitKind::kPhone);
    spec.n_word_outputs = phone_vocab.size();
  } else {
    throw CliError(kExitInputError, "unknown --unit: " + o.unit);
  }

  actc::ModelParams params;
  try {
    if (o.init == "random") {
      params = actc::init_params(spec, o.cfg.init_range, o.cfg.seed);
    } else if (o.init == "phone-transfer") {
      require_file(o.phone_model_path, "phone model checkpoint");
      const actc::ModelParams donor = actc::load_checkpoint(o.phone_model_path);
      params = actc::transfer_init(spec, donor, o.cfg.seed, o.cfg.init_range);
    } else if (o.init == "hier-ctc") {
      require_file(o.phone_model_path, "phone model checkpoint");
      const actc::ModelParams donor = actc::load_checkpoint(o.phone_model_path);
      params = actc::hier_transfer_init(spec, donor, o.cfg.seed, o.cfg.init_range);
    } else {
      throw CliError(kExitInputError, "unknown --init: " + o.init);
    }
    if (!o.embedding_paths.empty()) {
      if (o.unit != "word")
        throw CliError(kExitInputError, "--embeddings applies to word models only");
      std::vector<actc::EmbeddingTable> tables;
      for (const auto& p : o.embedding_paths) {
        require_file(p, "embedding table");
        tables.push_back(actc::load_embeddings(p));
      }
      const actc::EmbeddingTable prepared = actc::prepare_init_table(tables, word_vocab);
      params = actc::embedding_init(std::move(params), prepared, word_vocab, o.cfg.seed + 1,
                                    o.cfg.init_range);
    }
  } catch (const std::invalid_argument& e) {
    throw CliError(kExitMismatch, std::string("initialization mismatch: ") + e.what());
  }

  const std::vector<actc::TrainUtterance> train_utts = encode_all(utts);
  const std::vector<actc::TrainUtterance> heldout_utts = encode_all(heldout);

  actc::TrainResult result;
  try {
    result = actc::train(std::move(params), train_utts, heldout_utts, o.cfg);
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()) == "diverged")
      throw CliError(kExitDiverged, "training diverged (non-finite loss)");
    throw;
  }

  fs::create_directories(o.out_dir);
  const std::string ckpt = (fs::path(o.out_dir) / "model.ckpt").string();
  const std::string log = (fs::path(o.out_dir) / "loss.csv").string();
  actc::save_checkpoint(ckpt, result.params);
  actc::save_loss_log(log, result.log);
  const double final_loss = result.log.empty() ? 0.0 : result.log.back().heldout_loss;
  std::cout << "trained " << o.unit << " model (" << o.init << ") for " << result.log.size()
            << " epochs, final heldout loss " << final_loss << "\n"
            << "checkpoint: " << ckpt << "\nloss log: " << log << "\n";
}

// ---------------------------------------------------------------------------
// train-lm / train-glove

struct TrainLmOpts {
  std::string text_path;
  std::string vocab_path;
  int order = 3;
  std::string out_file;
};

void run_train_lm(const TrainLmOpts& o) {
  require_file(o.text_path, "training text");
  require_file(o.vocab_path, "vocabulary");
  const auto sentences = load_sentences(o.text_path);
  if (sentences.empty()) throw CliError(kExitInputError, "training text is empty: " + o.text_path);
  const actc::Vocab vocab = actc::Vocab::load(o.vocab_path, actc::UnitKind::kWord);
  const actc::NGramModel model = actc::train_ngram(sentences, o.order, vocab);
  ensure_parent_dir(o.out_file);
  model.save_arpa(o.out_file);
  std::cout << "trained " << o.order << "-gram model on " << sentences.size()
            << " sentences, training perplexity " << model.perplexity(sentences) << "\n"
            << "model: " << o.out_file << "\n";
}

struct TrainGloveOpts {
  std::string text_path;
  std::string vocab_path;
  int dim = 8;
  int window = 4;
  int iters = 50;
  double lr = 0.05;
  uint64_t seed = 0;
  std::string out_file;
};

void run_train_glove(const TrainGloveOpts& o) {
  require_file(o.text_path, "training text");
  require_file(o.vocab_path, "vocabulary");
  const auto sentences = load_sentences(o.text_path);
  if (sentences.empty()) throw CliError(kExitInputError, "training text is empty: " + o.text_path);
  const actc::Vocab vocab = actc::Vocab::load(o.vocab_path, actc::UnitKind::kWord);
  const actc::CooccurrenceMatrix x = actc::build_cooccurrence(sentences, vocab, o.window);
  const actc::EmbeddingTable table =
      actc::train_embeddings(x, vocab, o.dim, o.iters, o.lr, o.seed);
  ensure_parent_dir(o.out_file);
  actc::save_embeddings(o.out_file, table);
  std::cout << "trained " << o.dim << "-dim embeddings for " << table.rows.size() << " words\n"
            << "table: " << o.out_file << "\n";
}

// ---------------------------------------------------------------------------
// decode

struct DecodeOpts {
  std::string model_path;
  std::string manifest;
  std::string mode = "greedy";
  std::string vocab_path;
  std::string phone_vocab_path;
  std::string lexicon_path;
  std::string lm_path;
  std::string prior_text;
  double lm_weight = 1.0;
  double penalty = 0.0;
  int beam = 16;
  int k = 10;
  bool emit_lattice = false;
  std::string out_dir;
};

void run_decode(const DecodeOpts& o) {
  require_file(o.model_path, "model checkpoint");
  require_file(o.manifest, "corpus manifest");
  require_file(o.vocab_path, "word vocabulary");
  const actc::ModelParams params = actc::load_checkpoint(o.model_path);
  const std::vector<actc::Utterance> utts = actc::load_manifest(o.manifest);
  const actc::Vocab word_vocab = actc::Vocab::load(o.vocab_path, actc::UnitKind::kWord);

  for (const auto& u : utts)
    if (u.features.dim() != params.spec.input_dim)
      throw CliError(kExitMismatch, "feature dimension of " + u.id + " does not match the model");

  fs::create_directories(o.out_dir);
  actc::HypothesisList hyps;

  if (o.mode == "greedy" || o.mode == "sausage") {
    if (word_vocab.size() != params.spec.n_word_outputs)
      throw CliError(kExitMismatch, "vocabulary size does not match the model's output layer");
    actc::PriorTable priors;
    if (o.mode == "sausage") {
      if (!o.prior_text.empty()) {
        require_file(o.prior_text, "prior text");
        priors = actc::word_priors(load_sentences(o.prior_text), word_vocab);
      } else {  // uniform prior: scores reduce to pure posteriors up to a constant
        priors.log_prior =
            Eigen::VectorXd::Constant(word_vocab.size(), -std::log(word_vocab.content_size()));
      }
      if (o.emit_lattice) fs::create_directories(fs::path(o.out_dir) / "lat");
    }
    for (const auto& u : utts) {
      const actc::ForwardResult fwd = actc::forward(params, u.features);
      const actc::GreedyResult res = actc::greedy_decode(fwd.word, word_vocab);
      hyps.emplace_back(u.id, res.words);
      if (o.mode == "sausage" && o.emit_lattice) {
        actc::SausageLattice lattice = actc::build_sausage(fwd.word, o.k, priors, word_vocab);
        lattice.utt_id = u.id;
        actc::save_lattice((fs::path(o.out_dir) / "lat" / (u.id + ".json")).string(), lattice);
      }
    }
  } else if (o.mode == "beam") {
    require_file(o.phone_vocab_path, "phone vocabulary");
    require_file(o.lexicon_path, "lexicon");
    require_file(o.lm_path, "language model");
    const actc::Vocab phone_vocab = actc::Vocab::load(o.phone_vocab_path, actc::UnitKind::kPhone);
    if (phone_vocab.size() != params.spec.n_word_outputs)
      throw CliError(kExitMismatch,
                     "beam mode needs a phone model matching the phone vocabulary");
    const actc::Lexicon lexicon = actc::load_lexicon(o.lexicon_path);
    const actc::LexiconTrie trie(lexicon, word_vocab, phone_vocab);
    const actc::NGramModel lm = actc::NGramModel::load_arpa(o.lm_path);
    actc::BeamConfig cfg;
    cfg.lm_weight = o.lm_weight;
    cfg.word_insertion_penalty = o.penalty;
    cfg.beam = o.beam;
    for (const auto& u : utts) {
      const actc::ForwardResult fwd = actc::forward(params, u.features);
      const std::vector<int> ids = actc::beam_decode(fwd.word, trie, lm, word_vocab, cfg);
      hyps.emplace_back(u.id, actc::decode_ids(ids, word_vocab));
    }
  } else {
    throw CliError(kExitInputError, "unknown --mode: " + o.mode);
  }

  const std::string hyp_path = (fs::path(o.out_dir) / "hyps.txt").string();
  actc::save_hypotheses(hyp_path, hyps);
  std::cout << "decoded " << hyps.size() << " utterances (" << o.mode << ")\n"
            << "hypotheses: " << hyp_path << "\n";
}

// ---------------------------------------------------------------------------
// rescore

struct RescoreOpts {
  std::string lattice_dir;
  std::string lm_path;
  std::string vocab_path;
  double lm_weight = 1.0;
  std::string out_dir;
};

void run_rescore(const RescoreOpts& o) {
  require_file(o.lattice_dir, "lattice directory");
  require_file(o.lm_path, "language model");
  require_file(o.vocab_path, "word vocabulary");
  const actc::Vocab vocab = actc::Vocab::load(o.vocab_path, actc::UnitKind::kWord);
  const actc::NGramModel lm = actc::NGramModel::load_arpa(o.lm_path);

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(o.lattice_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw CliError(kExitInputError, "no lattice files in directory: " + o.lattice_dir);

  actc::HypothesisList hyps;
  for (const auto& f : files) {
    const actc::SausageLattice lattice = actc::load_lattice(f, vocab);
    const std::vector<int> ids = actc::rescore_sausage(lattice, lm, o.lm_weight, vocab);
    hyps.emplace_back(lattice.utt_id, actc::decode_ids(ids, vocab));
  }
  fs::create_directories(o.out_dir);
  const std::string hyp_path = (fs::path(o.out_dir) / "hyps.txt").string();
  actc::save_hypotheses(hyp_path, hyps);
  std::cout << "rescored " << hyps.size() << " lattices\nhypotheses: " << hyp_path << "\n";
}

// ---------------------------------------------------------------------------
// score

struct ScoreOpts {
  std::string ref_path;
  std::string hyp_path;
  std::string hyp_b_path;
  std::string out_dir;
};

void run_score(const ScoreOpts& o) {
  require_file(o.ref_path, "reference file");
  require_file(o.hyp_path, "hypothesis file");
  const actc::HypothesisList refs = actc::load_hypotheses(o.ref_path);
  const actc::HypothesisList hyps = actc::load_hypotheses(o.hyp_path);

  std::map<std::string, const std::vector<std::string>*> ref_by_id;
  for (const auto& [id, words] : refs)
    if (!ref_by_id.emplace(id, &words).second)
      throw CliError(kExitMismatch, "duplicate reference utterance id: " + id);

  auto join = [&](const actc::HypothesisList& hs) {
    std::vector<actc::ScorePair> pairs;
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& [id, words] : hs) {
      auto it = ref_by_id.find(id);
      if (it == ref_by_id.end())
        throw CliError(kExitMismatch, "hypothesis utterance id not in reference: " + id);
      if (!seen.insert(id).second)
        throw CliError(kExitMismatch, "duplicate hypothesis utterance id: " + id);
      pairs.emplace_back(*it->second, words);
      ids.push_back(id);
    }
    return std::make_pair(pairs, ids);
  };

  const auto [pairs, ids] = join(hyps);
  const actc::CorpusScore score = actc::corpus_wer(pairs, ids);

  nlohmann::json j;
  j["wer"] = score.wer;
  j["sub"] = score.sub_rate;
  j["del"] = score.del_rate;
  j["ins"] = score.ins_rate;
  j["n_ref_words"] = score.n_ref_words;
  nlohmann::json per_utt = nlohmann::json::array();
  for (const auto& u : score.per_utt) {
    const int errors = u.substitutions + u.deletions + u.insertions;
    per_utt.push_back({{"utt", u.utt_id},
                       {"n_ref", u.n_ref},
                       {"sub", u.substitutions},
                       {"del", u.deletions},
                       {"ins", u.insertions},
                       {"wer", u.n_ref > 0 ? static_cast<double>(errors) / u.n_ref : 0.0}});
  }
  j["per_utt"] = std::move(per_utt);

  if (!o.hyp_b_path.empty()) {
    require_file(o.hyp_b_path, "second hypothesis file");
    const actc::HypothesisList hyps_b = actc::load_hypotheses(o.hyp_b_path);
    std::set<std::string> ids_a, ids_b;
    for (const auto& [id, words] : hyps) ids_a.insert(id);
    for (const auto& [id, words] : hyps_b) ids_b.insert(id);
    if (ids_a != ids_b)
      throw CliError(kExitMismatch, "the two hypothesis files cover different utterances");
    actc::NamedTranscripts named_refs;
    for (const auto& [id, words] : hyps) named_refs.emplace_back(id, *ref_by_id.at(id));
    const actc::SystemComparison cmp = actc::compare_systems(named_refs, hyps, hyps_b);
    j["compare"] = {{"frac_equal_error_count", cmp.frac_equal_error_count},
                    {"frac_identical_errors", cmp.frac_identical_errors},
                    {"frac_a_le_b", cmp.frac_a_le_b},
                    {"n_utts", cmp.n_utts}};
  }

  fs::create_directories(o.out_dir);
  const std::string report = (fs::path(o.out_dir) / "report.json").string();
  std::ofstream os(report);
  if (!os) throw CliError(kExitInputError, "cannot open for write: " + report);
  os << j.dump(2) << '\n';
  std::cout << "WER " << score.wer << " (sub " << score.sub_rate << ", del " << score.del_rate
            << ", ins " << score.ins_rate << ") over " << score.n_ref_words << " reference words\n"
            << "report: " << report << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale acoustics-to-word CTC toolkit"};
  app.require_subcommand(1);

  PrepareOpts prep;
  auto* prepare = app.add_subcommand("prepare", "synthesize a desk-scale corpus");
  setup_config(prepare);
  prepare->add_option("--n-utts", prep.synth.n_utts, "number of utterances");
  prepare->add_option("--vocab-size", prep.synth.vocab_size, "number of distinct words");
  prepare->add_option("--words-per-utt", prep.synth.words_per_utt, "words per utterance");
  prepare->add_option("--frames-per-symbol", prep.synth.frames_per_symbol, "frames per word");
  prepare->add_option("--feature-dim", prep.synth.feature_dim, "feature dimension");
  prepare->add_option("--noise-std", prep.synth.noise_std, "feature noise stddev");
  prepare->add_option("--n-phones", prep.synth.n_phones, "phone inventory (0: word templates)");
  prepare->add_option("--max-pron-len", prep.synth.max_pron_len, "max pronunciation length");
  prepare->add_option("--n-successors", prep.synth.n_successors,
                      "bigram fan-out (0: uniform word choice)");
  prepare->add_option("--language-seed", prep.synth.language_seed, "language structure seed");
  prepare->add_option("--heldout", prep.heldout, "utterances reserved for a heldout manifest");
  prepare->add_option("--lm-sentences", prep.lm_sentences, "extra text-only sentences");
  prepare->add_option("--lm-sentence-len", prep.lm_sentence_len,
                      "words per text-only sentence (0: words-per-utt)");
  prepare->add_option("--seed", prep.seed, "sampling seed");
  add_common_output(prepare, prep.out_dir);
  prepare->callback([&] {
    apply_config(prepare);
    run_prepare(prep);
  });

  FeaturesOpts feat;
  auto* features = app.add_subcommand("features", "extract log-mel features from a wav file");
  setup_config(features);
  features->add_option("--wav", feat.wav_path, "input wav (PCM16 mono)")->required();
  features->add_option("--out-feat", feat.out_feat, "output feature file")->required();
  features->add_option("--window", feat.window_sec, "analysis window (seconds)");
  features->add_option("--hop", feat.hop_sec, "hop (seconds)");
  features->add_option("--n-mels", feat.n_mels, "mel bands");
  features->add_option("--stack", feat.stack, "frames stacked together");
  features->add_option("--decimate", feat.decimate, "keep every n-th stacked frame");
  features->add_option("--speaker-vec", feat.speaker_csv,
                       "comma-separated speaker vector appended to every frame");
  features->callback([&] {
    apply_config(features);
    run_features(feat);
  });

  TrainOpts tr;
  auto* train = app.add_subcommand("train", "train a CTC acoustic model");
  setup_config(train);
  train->add_option("--manifest", tr.manifest, "training manifest")->required();
  train->add_option("--heldout-manifest", tr.heldout_manifest, "heldout manifest");
  train->add_option("--unit", tr.unit, "word|phone");
  train->add_option("--vocab", tr.vocab_path, "word vocabulary");
  train->add_option("--phone-vocab", tr.phone_vocab_path, "phone vocabulary");
  train->add_option("--init", tr.init, "random|phone-transfer|hier-ctc");
  train->add_option("--phone-model", tr.phone_model_path, "donor phone checkpoint");
  train->add_option("--embeddings", tr.embedding_paths,
                    "embedding tables for output-layer initialization (repeatable)");
  train->add_option("--layers", tr.layers, "LSTM layers");
  train->add_option("--hidden", tr.hidden, "hidden units per direction");
  train->add_flag("--unidirectional", tr.unidirectional, "disable the backward direction");
  train->add_option("--branch-at", tr.branch_at, "phone branch layer (0: next-to-last)");
  train->add_option("--alpha", tr.cfg.multitask_alpha, "phone branch loss weight");
  train->add_option("--lr", tr.cfg.learning_rate, "initial learning rate");
  train->add_option("--clip", tr.cfg.clip_bound, "elementwise gradient clip");
  train->add_option("--batch-size", tr.cfg.batch_size, "utterances per batch");
  train->add_option("--epochs", tr.cfg.n_epochs, "training epochs");
  train->add_option("--halving-threshold", tr.cfg.lr_halving_threshold,
                    "halve lr when relative heldout improvement is at or below this");
  train->add_option("--init-range", tr.cfg.init_range, "uniform init half-width");
  train->add_option("--seed", tr.cfg.seed, "random seed");
  train->add_option("--threads", tr.cfg.threads, "worker threads");
  add_common_output(train, tr.out_dir);
  train->callback([&] {
    apply_config(train);
    run_train(tr);
  });

  TrainLmOpts lm;
  auto* train_lm = app.add_subcommand("train-lm", "train an n-gram language model");
  setup_config(train_lm);
  train_lm->add_option("--text", lm.text_path, "training text (one sentence per line)")->required();
  train_lm->add_option("--vocab", lm.vocab_path, "word vocabulary")->required();
  train_lm->add_option("--order", lm.order, "n-gram order");
  train_lm->add_option("--out-file", lm.out_file, "output ARPA file")->required();
  train_lm->callback([&] {
    apply_config(train_lm);
    run_train_lm(lm);
  });

  TrainGloveOpts gl;
  auto* train_glove = app.add_subcommand("train-glove", "train word embeddings");
  setup_config(train_glove);
  train_glove->add_option("--text", gl.text_path, "training text (one sentence per line)")
      ->required();
  train_glove->add_option("--vocab", gl.vocab_path, "word vocabulary")->required();
  train_glove->add_option("--dim", gl.dim, "embedding dimension");
  train_glove->add_option("--window", gl.window, "co-occurrence window");
  train_glove->add_option("--iters", gl.iters, "training iterations");
  train_glove->add_option("--lr", gl.lr, "AdaGrad learning rate");
  train_glove->add_option("--seed", gl.seed, "random seed");
  train_glove->add_option("--out-file", gl.out_file, "output embedding table")->required();
  train_glove->callback([&] {
    apply_config(train_glove);
    run_train_glove(gl);
  });

  DecodeOpts dec;
  auto* decode = app.add_subcommand("decode", "decode a manifest with a trained model");
  setup_config(decode);
  decode->add_option("--model", dec.model_path, "model checkpoint")->required();
  decode->add_option("--manifest", dec.manifest, "manifest to decode")->required();
  decode->add_option("--mode", dec.mode, "greedy|beam|sausage");
  decode->add_option("--vocab", dec.vocab_path, "word vocabulary")->required();
  decode->add_option("--phone-vocab", dec.phone_vocab_path, "phone vocabulary (beam mode)");
  decode->add_option("--lexicon", dec.lexicon_path, "pronunciation lexicon (beam mode)");
  decode->add_option("--lm", dec.lm_path, "ARPA language model (beam mode)");
  decode->add_option("--prior-text", dec.prior_text,
                     "transcripts for word priors (sausage mode; uniform when absent)");
  decode->add_option("--lm-weight", dec.lm_weight, "language model weight");
  decode->add_option("--penalty", dec.penalty, "word insertion bonus (natural log)");
  decode->add_option("--beam", dec.beam, "beam width");
  decode->add_option("--k", dec.k, "arcs per sausage slot");
  decode->add_flag("--emit-lattice", dec.emit_lattice, "write one lattice JSON per utterance");
  add_common_output(decode, dec.out_dir);
  decode->callback([&] {
    apply_config(decode);
    run_decode(dec);
  });

  RescoreOpts rs;
  auto* rescore = app.add_subcommand("rescore", "rescore sausage lattices with an LM");
  setup_config(rescore);
  rescore->add_option("--lattice-dir", rs.lattice_dir, "directory of lattice JSON files")
      ->required();
  rescore->add_option("--lm", rs.lm_path, "ARPA language model")->required();
  rescore->add_option("--vocab", rs.vocab_path, "word vocabulary")->required();
  rescore->add_option("--lm-weight", rs.lm_weight, "language model weight");
  add_common_output(rescore, rs.out_dir);
  rescore->callback([&] {
    apply_config(rescore);
    run_rescore(rs);
  });

  ScoreOpts sc;
  auto* score = app.add_subcommand("score", "score hypotheses against references");
  setup_config(score);
  score->add_option("--ref", sc.ref_path, "reference file (utt-id words...)")->required();
  score->add_option("--hyp", sc.hyp_path, "hypothesis file")->required();
  score->add_option("--hyp-b", sc.hyp_b_path, "second hypothesis file (comparison mode)");
  add_common_output(score, sc.out_dir);
  score->callback([&] {
    apply_config(score);
    run_score(sc);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInputError;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return 0;
}
