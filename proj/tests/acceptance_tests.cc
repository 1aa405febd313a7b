// Acceptance suite: eleven numbered behavioral criteria for the toolkit, one
// test each. Tolerances are pinned in the code next to each check. A custom
// main prints a single "criterion N: PASS|FAIL" line per criterion after the
// run so the outcome is scannable at a glance.
#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "actc/corpus.hpp"
#include "actc/ctc.hpp"
#include "actc/ctc_oracle.hpp"
#include "actc/decode.hpp"
#include "actc/embeddings.hpp"
#include "actc/lm.hpp"
#include "actc/nnet.hpp"
#include "actc/score.hpp"
#include "actc/trainer.hpp"
#include "actc/vocab.hpp"
#include "test_util.hpp"

namespace actc {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Dynamic-programming CTC loss equals brute-force path enumeration.

TEST(Acceptance, C01CtcLossMatchesBruteForceEnumeration) {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::uniform_int_distribution<int> t_dist(1, 8);
  std::uniform_int_distribution<int> v_dist(1, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = t_dist(rng);
    const int v = v_dist(rng);
    const PosteriorGrid grid = testing::random_grid(t, v, rng);
    const std::vector<int> y = testing::random_feasible_target(t, v, 4, rng);
    const CtcResult res = ctc_forward(grid, y);
    ASSERT_TRUE(res.ok());
    const double direct = brute_force_score(grid, y);
    ASSERT_NEAR(std::exp(-res.loss), direct, 1e-9) << "trial " << trial;
  }
  EXPECT_LT(seconds_since(t0), 10.0);
}

// ---------------------------------------------------------------------------
// 2. Path probabilities over all label sequences sum to one.

TEST(Acceptance, C02PathProbabilitiesSumToOne) {
  Rng rng(202);
  std::uniform_int_distribution<int> t_dist(1, 5);
  std::uniform_int_distribution<int> v_dist(1, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const int t = t_dist(rng);
    const int v = v_dist(rng);
    const PosteriorGrid grid = testing::random_grid(t, v, rng);
    double total = 0.0;
    // every label sequence over symbols 1..v with length 0..t
    for (int len = 0; len <= t; ++len) {
      std::vector<int> y(static_cast<size_t>(len), 1);
      for (;;) {
        total += brute_force_score(grid, y);
        int pos = len - 1;
        while (pos >= 0 && y[static_cast<size_t>(pos)] == v) y[static_cast<size_t>(pos--)] = 1;
        if (pos < 0) break;
        ++y[static_cast<size_t>(pos)];
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-9) << "T=" << t << " V=" << v;
  }
}

// ---------------------------------------------------------------------------
// 3. Analytic gradients agree with central finite differences.

TEST(Acceptance, C03GradientsMatchFiniteDifferences) {
  const auto t0 = Clock::now();

  // (a) CTC loss gradient wrt the grid probabilities, 100 instances.
  // Relative error floored at 1: |fd - an| <= tol * max(1, |fd|, |an|); the
  // floor absorbs finite-difference roundoff on near-zero entries.
  {
    Rng rng(303);
    std::uniform_int_distribution<int> t_dist(2, 5);
    std::uniform_int_distribution<int> v_dist(1, 3);
    const double eps = 1e-6, tol = 1e-4;
    for (int trial = 0; trial < 100; ++trial) {
      const int t = t_dist(rng);
      const int v = v_dist(rng);
      PosteriorGrid grid = testing::random_grid(t, v, rng);
      const std::vector<int> y = testing::random_feasible_target(t, v, 3, rng);
      const CtcResult res = ctc_gradient(grid, y);
      ASSERT_TRUE(res.ok());
      for (Eigen::Index r = 0; r < grid.num_frames(); ++r)
        for (Eigen::Index c = 0; c < grid.num_symbols(); ++c) {
          const double saved = grid.probs(r, c);
          grid.probs(r, c) = saved + eps;
          const double up = ctc_forward(grid, y).loss;
          grid.probs(r, c) = saved - eps;
          const double down = ctc_forward(grid, y).loss;
          grid.probs(r, c) = saved;
          const double fd = (up - down) / (2.0 * eps);
          const double an = res.grad(r, c);
          const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
          ASSERT_LE(std::abs(fd - an), tol * denom)
              << "trial " << trial << " entry (" << r << "," << c << ")";
        }
    }
  }

  // (b) end-to-end network gradient on a 1-layer hidden-4 model, T=5.
  {
    LayerSpec spec;
    spec.n_layers = 1;
    spec.hidden = 4;
    spec.bidirectional = true;
    spec.input_dim = 3;
    spec.n_word_outputs = 4;
    ModelParams params = init_params(spec, 0.2, 404);

    TrainUtterance utt;
    utt.id = "gradcheck";
    Rng rng(405);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    utt.features.frames.resize(5, 3);
    for (Eigen::Index r = 0; r < 5; ++r)
      for (Eigen::Index c = 0; c < 3; ++c) utt.features.frames(r, c) = u(rng);
    utt.word_targets = {1, 2, 1};

    const detail::UttGrad analytic = detail::utterance_gradient(params, utt, 0.0, true);
    ASSERT_TRUE(analytic.ok);
    std::vector<double> an;
    for_each_blob(analytic.grads, [&](const std::string&, const auto& blob) {
      for (Eigen::Index r = 0; r < blob.rows(); ++r)
        for (Eigen::Index c = 0; c < blob.cols(); ++c) an.push_back(blob(r, c));
    });

    std::vector<double*> coords;
    for_each_blob(params, [&](const std::string&, auto& blob) {
      for (Eigen::Index r = 0; r < blob.rows(); ++r)
        for (Eigen::Index c = 0; c < blob.cols(); ++c) coords.push_back(&blob(r, c));
    });
    ASSERT_EQ(coords.size(), an.size());

    const double eps = 1e-5, tol = 1e-3;
    for (size_t i = 0; i < coords.size(); ++i) {
      const double saved = *coords[i];
      *coords[i] = saved + eps;
      const double up = detail::utterance_gradient(params, utt, 0.0, false).loss;
      *coords[i] = saved - eps;
      const double down = detail::utterance_gradient(params, utt, 0.0, false).loss;
      *coords[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double denom = std::max({1.0, std::abs(fd), std::abs(an[i])});
      ASSERT_LE(std::abs(fd - an[i]), tol * denom) << "coordinate " << i;
    }
  }
  EXPECT_LT(seconds_since(t0), 60.0);
}

// ---------------------------------------------------------------------------
// 4. Initialization ordering on a task that is hard from a flat start:
//    phone-transfer beats random, and adding embedding output init beats
//    plain phone-transfer, on heldout loss after 5 epochs (>= 2 of 3 seeds).

std::vector<TrainUtterance> encode_tier(const std::vector<Utterance>& utts, const Vocab& vocab,
                                        bool use_phones) {
  std::vector<TrainUtterance> out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    TrainUtterance t;
    t.id = u.id;
    t.features = u.features;
    t.word_targets = encode_transcript(use_phones ? u.phones : u.words, vocab);
    out.push_back(std::move(t));
  }
  return out;
}

TEST(Acceptance, C04InitializationOrderingHoldsAcrossSeeds) {
  SynthConfig cfg;
  cfg.n_utts = 36;
  cfg.vocab_size = 24;  // large vocabulary for the amount of data
  cfg.words_per_utt = 3;
  cfg.frames_per_symbol = 3;
  cfg.feature_dim = 8;
  cfg.noise_std = 0.35;
  cfg.n_phones = 8;
  cfg.max_pron_len = 3;
  cfg.n_successors = 3;
  cfg.language_seed = 7;

  const int kHidden = 12;
  int transfer_beats_random = 0;
  int embedding_beats_transfer = 0;
  const std::vector<uint64_t> seeds = {1, 2, 3};

  for (const uint64_t seed : seeds) {
    const SynthCorpus corpus = synth_corpus(cfg, seed);
    const size_t split = corpus.utterances.size() - 8;
    const std::vector<Utterance> train_raw(corpus.utterances.begin(),
                                           corpus.utterances.begin() + static_cast<long>(split));
    const std::vector<Utterance> held_raw(corpus.utterances.begin() + static_cast<long>(split),
                                          corpus.utterances.end());

    LayerSpec spec;
    spec.n_layers = 2;
    spec.hidden = kHidden;
    spec.bidirectional = true;
    spec.input_dim = cfg.feature_dim;

    TrainConfig tc;
    tc.learning_rate = 4e-3;
    tc.batch_size = 8;
    tc.n_epochs = 5;
    tc.seed = seed;

    // donor: phone-level model on the same audio
    LayerSpec phone_spec = spec;
    phone_spec.n_word_outputs = corpus.phone_vocab.size();
    const std::vector<TrainUtterance> phone_train = encode_tier(train_raw, corpus.phone_vocab, true);
    const std::vector<TrainUtterance> phone_held = encode_tier(held_raw, corpus.phone_vocab, true);
    const ModelParams phone_model =
        train(init_params(phone_spec, tc.init_range, seed), phone_train, phone_held, tc).params;

    LayerSpec word_spec = spec;
    word_spec.n_word_outputs = corpus.word_vocab.size();
    const std::vector<TrainUtterance> word_train = encode_tier(train_raw, corpus.word_vocab, false);
    const std::vector<TrainUtterance> word_held = encode_tier(held_raw, corpus.word_vocab, false);

    auto heldout_after_training = [&](ModelParams init) {
      const TrainResult r = train(std::move(init), word_train, word_held, tc);
      return r.log.back().heldout_loss;
    };

    const double loss_random = heldout_after_training(init_params(word_spec, tc.init_range, seed));
    const double loss_transfer =
        heldout_after_training(transfer_init(word_spec, phone_model, seed, tc.init_range));

    // embeddings from plentiful same-language text, matched to the dense width
    const auto text = synth_sentences(cfg, 400, cfg.words_per_utt, seed + 99);
    const CooccurrenceMatrix x = build_cooccurrence(text, corpus.word_vocab, 4);
    const EmbeddingTable table =
        train_embeddings(x, corpus.word_vocab, word_spec.layer_output_dim(), 60, 0.05, seed);
    const EmbeddingTable prepared = prepare_init_table({table}, corpus.word_vocab);
    const double loss_embed = heldout_after_training(
        embedding_init(transfer_init(word_spec, phone_model, seed, tc.init_range), prepared,
                       corpus.word_vocab, seed + 1, tc.init_range));

    if (loss_transfer < loss_random) ++transfer_beats_random;
    if (loss_embed < loss_transfer) ++embedding_beats_transfer;
    std::printf("  seed %llu: random %.4f transfer %.4f transfer+embed %.4f\n",
                static_cast<unsigned long long>(seed), loss_random, loss_transfer, loss_embed);
  }
  EXPECT_GE(transfer_beats_random, 2) << "of " << seeds.size() << " seeds";
  EXPECT_GE(embedding_beats_transfer, 2) << "of " << seeds.size() << " seeds";
}

// ---------------------------------------------------------------------------
// 5. End-to-end convergence on a clean synthetic corpus.

TEST(Acceptance, C05ToyCorpusConvergesUnderGreedyDecoding) {
  const auto t0 = Clock::now();
  SynthConfig cfg;
  cfg.n_utts = 200;
  cfg.vocab_size = 10;
  cfg.noise_std = 0.0;
  const SynthCorpus corpus = synth_corpus(cfg, 11);

  LayerSpec spec;
  spec.n_layers = 2;
  spec.hidden = 32;
  spec.bidirectional = true;
  spec.input_dim = cfg.feature_dim;
  spec.n_word_outputs = corpus.word_vocab.size();

  // Calibration: two stacked LSTMs initialized in (-0.01, 0.01) start with
  // near-zero hidden activations, so the gradient signal into the lower layer
  // is damped through the upper layer's tiny weights and the optimizer crawls
  // along the emit-only-blanks saddle for far more than 30 epochs. A wider
  // init (0.1) plus per-utterance steps at lr 0.1 escapes the saddle and
  // reaches <=5% token error around epoch 12-14 for every init seed tried;
  // the slowest tokens to fall are adjacent repeated words, which greedy
  // decoding only resolves once the model emits a blank between the repeats.
  TrainConfig tc;
  tc.learning_rate = 0.1;
  tc.batch_size = 1;
  tc.n_epochs = 1;  // trained in 1-epoch rounds so we can stop at the target
  tc.seed = 5;
  const double init_range = 0.1;

  const std::vector<TrainUtterance> train_utts =
      encode_tier(corpus.utterances, corpus.word_vocab, false);

  ModelParams params = init_params(spec, init_range, tc.seed);
  double ter = 1.0;
  int epochs_used = 0;
  for (int epoch = 1; epoch <= 30; ++epoch) {
    params = train(std::move(params), train_utts, {}, tc).params;
    epochs_used = epoch;
    int errors = 0, n_ref = 0;
    for (const auto& u : corpus.utterances) {
      const GreedyResult res = greedy_decode(forward(params, u.features).word, corpus.word_vocab);
      const AlignmentResult align = align_edit(u.words, res.words);
      errors += align.errors();
      n_ref += static_cast<int>(u.words.size());
    }
    ter = static_cast<double>(errors) / n_ref;
    if (ter <= 0.05) break;
  }
  std::printf("  token error rate %.4f after %d epochs (%.1f s)\n", ter, epochs_used,
              seconds_since(t0));
  EXPECT_LE(ter, 0.05);
  EXPECT_LE(epochs_used, 30);
  EXPECT_LT(seconds_since(t0), 300.0);
}

// ---------------------------------------------------------------------------
// 6. Rescoring with an informative LM improves ambiguous acoustics, and the
//    oracle/rescored/greedy error ordering holds.

TEST(Acceptance, C06RescoringImprovesAmbiguousAcoustics) {
  // language over six content words: word i is followed by word (i+1) or
  // (i+2) mod 6; four decoy words never occur in text
  Vocab vocab(UnitKind::kWord);
  std::vector<int> content_ids, decoy_ids;
  for (int i = 0; i < 6; ++i) content_ids.push_back(vocab.add_token("w" + std::to_string(i)));
  for (int i = 0; i < 4; ++i) decoy_ids.push_back(vocab.add_token("decoy" + std::to_string(i)));

  Rng lang_rng(606);
  auto sample_sentence = [&](int len) {
    std::uniform_int_distribution<int> start(0, 5);
    std::uniform_int_distribution<int> step(1, 2);
    std::vector<int> idx = {start(lang_rng)};
    while (static_cast<int>(idx.size()) < len) idx.push_back((idx.back() + step(lang_rng)) % 6);
    std::vector<std::string> words;
    for (int i : idx) words.push_back("w" + std::to_string(i));
    return words;
  };
  std::vector<std::vector<std::string>> text;
  for (int i = 0; i < 300; ++i) text.push_back(sample_sentence(4));
  const NGramModel lm = train_ngram(text, 2, vocab);

  PriorTable priors;
  priors.log_prior = Eigen::VectorXd::Constant(vocab.size(), -std::log(vocab.content_size()));

  int greedy_total = 0, rescored_total = 0, oracle_total = 0, n_ref_total = 0;
  Rng rng(607);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick_decoy(0, 3);
  for (int utt = 0; utt < 50; ++utt) {
    const std::vector<std::string> ref = sample_sentence(4);
    std::vector<int> ref_ids;
    for (const auto& w : ref) ref_ids.push_back(vocab.id_of(w));

    // one frame per word; a decoy narrowly out-scores the truth on ~40% of
    // frames, so greedy is wrong there while the LM knows better
    PosteriorGrid grid;
    grid.probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ref.size()), vocab.size());
    for (size_t t = 0; t < ref.size(); ++t) {
      const Eigen::Index r = static_cast<Eigen::Index>(t);
      const int truth = ref_ids[t];
      const int decoy = decoy_ids[static_cast<size_t>(pick_decoy(rng))];
      const bool ambiguous = coin(rng) < 0.4;
      const double p_truth = ambiguous ? 0.40 : 0.80;
      const double p_decoy = ambiguous ? 0.45 : 0.06;
      const double p_blank = ambiguous ? 0.05 : 0.08;
      const double rest = 1.0 - p_truth - p_decoy - p_blank;
      for (int id = Vocab::kNumReserved; id < vocab.size(); ++id)
        grid.probs(r, id) = rest / (vocab.content_size() - 2);
      grid.probs(r, truth) = p_truth;
      grid.probs(r, decoy) = p_decoy;
      grid.probs(r, Vocab::kBlankId) = p_blank;
    }

    const GreedyResult greedy = greedy_decode(grid, vocab);
    const SausageLattice lattice = build_sausage(grid, 2, priors, vocab);
    const std::vector<int> rescored = rescore_sausage(lattice, lm, 1.0, vocab);

    const int greedy_err = testing::levenshtein_oracle(ref_ids, greedy.word_ids);
    const int rescored_err = testing::levenshtein_oracle(ref_ids, rescored);
    const int oracle_err = oracle_error(lattice, ref_ids).errors;
    ASSERT_LE(oracle_err, rescored_err) << "utterance " << utt;
    ASSERT_LE(rescored_err, greedy_err) << "utterance " << utt;
    greedy_total += greedy_err;
    rescored_total += rescored_err;
    oracle_total += oracle_err;
    n_ref_total += static_cast<int>(ref.size());
  }
  std::printf("  WER greedy %.3f rescored %.3f oracle %.3f\n",
              static_cast<double>(greedy_total) / n_ref_total,
              static_cast<double>(rescored_total) / n_ref_total,
              static_cast<double>(oracle_total) / n_ref_total);
  EXPECT_LT(rescored_total, greedy_total);
}

// ---------------------------------------------------------------------------
// 7. Rescoring equals exhaustive enumeration, 1000 random lattices.

SausageLattice random_acceptance_lattice(Rng& rng, const Vocab& v, int max_slots, int max_k) {
  std::uniform_int_distribution<int> n_slots(1, max_slots);
  std::uniform_int_distribution<int> n_arcs(1, max_k);
  std::uniform_real_distribution<double> score(-4.0, 1.0);
  SausageLattice lattice;
  const int slots = n_slots(rng);
  for (int s = 0; s < slots; ++s) {
    SausageSlot slot;
    std::vector<int> ids;
    for (int id = Vocab::kNumReserved; id < v.size(); ++id) ids.push_back(id);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(static_cast<size_t>(std::min<int>(n_arcs(rng), static_cast<int>(ids.size()))));
    for (int id : ids) slot.arcs.push_back({id, v.surface_of(id), score(rng)});
    lattice.slots.push_back(std::move(slot));
  }
  return lattice;
}

std::vector<int> enumerate_lattice_best(const SausageLattice& lattice, const NGramModel& lm,
                                        double lm_weight) {
  std::vector<size_t> idx(lattice.slots.size(), 0);
  std::vector<int> best;
  double best_score = kNegInf;
  for (;;) {
    double acc = 0.0;
    std::vector<std::string> hist;
    for (size_t s = 0; s < lattice.slots.size(); ++s) {
      const SausageArc& arc = lattice.slots[s].arcs[idx[s]];
      acc = acc + arc.score + lm_fusion_term(lm, lm_weight, hist, arc.word);
      hist.push_back(arc.word);
    }
    acc += lm_fusion_term(lm, lm_weight, hist, kSentEnd);
    if (acc > best_score) {
      best_score = acc;
      best.clear();
      for (size_t s = 0; s < lattice.slots.size(); ++s)
        best.push_back(lattice.slots[s].arcs[idx[s]].word_id);
    }
    size_t pos = lattice.slots.size();
    bool rolled = false;
    while (pos > 0) {
      --pos;
      if (++idx[pos] < lattice.slots[pos].arcs.size()) {
        rolled = true;
        break;
      }
      idx[pos] = 0;
    }
    if (!rolled) return best;
  }
}

TEST(Acceptance, C07RescoringEqualsExhaustiveEnumeration) {
  Vocab vocab(UnitKind::kWord);
  for (int i = 0; i < 6; ++i) vocab.add_token("word" + std::to_string(i));
  Rng rng(707);
  std::uniform_int_distribution<int> len(1, 5);
  std::uniform_int_distribution<int> pick(Vocab::kNumReserved, vocab.size() - 1);
  std::vector<std::vector<std::string>> text;
  for (int i = 0; i < 40; ++i) {
    std::vector<std::string> sent(static_cast<size_t>(len(rng)));
    for (auto& w : sent) w = vocab.surface_of(pick(rng));
    text.push_back(std::move(sent));
  }
  const NGramModel lm = train_ngram(text, 3, vocab);

  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const SausageLattice lattice = random_acceptance_lattice(rng, vocab, 5, 4);
    if (rescore_sausage(lattice, lm, 0.8, vocab) != enumerate_lattice_best(lattice, lm, 0.8))
      ++mismatches;
  }
  EXPECT_EQ(mismatches, 0);
}

// ---------------------------------------------------------------------------
// 8. LM normalization over every history, and ARPA round-trip stability.

TEST(Acceptance, C08LanguageModelNormalizesAndRoundTrips) {
  Vocab vocab(UnitKind::kWord);
  for (int i = 0; i < 20; ++i) vocab.add_token("t" + std::to_string(i));
  Rng rng(808);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_int_distribution<int> pick(Vocab::kNumReserved, vocab.size() - 1);
  std::vector<std::vector<std::string>> text;
  for (int i = 0; i < 40; ++i) {
    std::vector<std::string> sent(static_cast<size_t>(len(rng)));
    for (auto& w : sent) w = vocab.surface_of(pick(rng));
    text.push_back(std::move(sent));
  }
  const NGramModel lm = train_ngram(text, 3, vocab);

  // histories: every length-0/1/2 mix of leading sentence-start pads and
  // predictable tokens (content plus the unknown-word class)
  std::vector<std::string> tokens = {Vocab::oov_surface()};
  for (int id = Vocab::kNumReserved; id < vocab.size(); ++id) tokens.push_back(vocab.surface_of(id));
  std::vector<std::vector<std::string>> histories = {{}, {kSentBegin}, {kSentBegin, kSentBegin}};
  for (const auto& a : tokens) {
    histories.push_back({a});
    histories.push_back({kSentBegin, a});
    for (const auto& b : tokens) histories.push_back({a, b});
  }
  std::vector<std::string> predicted = tokens;
  predicted.push_back(kSentEnd);
  for (const auto& h : histories) {
    double sum = 0.0;
    for (const auto& w : predicted) sum += std::pow(10.0, lm.logprob(h, w));
    ASSERT_NEAR(sum, 1.0, 1e-6) << "history size " << h.size();
  }

  const std::string path = (fs::temp_directory_path() / "actc_acceptance_lm.arpa").string();
  lm.save_arpa(path);
  const NGramModel back = NGramModel::load_arpa(path);
  fs::remove(path);
  std::uniform_int_distribution<int> hist_len(0, 2);
  std::uniform_int_distribution<int> tok(0, static_cast<int>(tokens.size()) - 1);
  std::uniform_int_distribution<int> pred(0, static_cast<int>(predicted.size()) - 1);
  for (int q = 0; q < 1000; ++q) {
    std::vector<std::string> h(static_cast<size_t>(hist_len(rng)));
    for (auto& w : h) w = tokens[static_cast<size_t>(tok(rng))];
    const std::string& w = predicted[static_cast<size_t>(pred(rng))];
    ASSERT_NEAR(lm.logprob(h, w), back.logprob(h, w), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// 9. Embedding-preparation contract and GloVe objective descent.

TEST(Acceptance, C09EmbeddingPreparationAndObjectiveDescent) {
  Vocab vocab(UnitKind::kWord);
  for (int i = 0; i < 12; ++i) vocab.add_token("e" + std::to_string(i));
  Rng rng(909);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<EmbeddingTable> tables(3);
  for (auto& table : tables) {
    table.dim = 8;
    for (int id = Vocab::kNumReserved; id < vocab.size(); ++id) {
      Eigen::VectorXd row(8);
      for (Eigen::Index j = 0; j < 8; ++j) row(j) = u(rng);
      table.rows[vocab.surface_of(id)] = row;
    }
  }
  const EmbeddingTable prepared = prepare_init_table(tables, vocab);
  ASSERT_FALSE(prepared.rows.empty());
  for (const auto& [word, row] : prepared.rows) ASSERT_NEAR(row.norm(), 0.1, 1e-9) << word;

  // objective decreases on a 10-word toy co-occurrence matrix
  Vocab ten(UnitKind::kWord);
  for (int i = 0; i < 10; ++i) ten.add_token("g" + std::to_string(i));
  std::uniform_int_distribution<int> pick(Vocab::kNumReserved, ten.size() - 1);
  std::vector<std::vector<std::string>> text;
  for (int i = 0; i < 60; ++i) {
    std::vector<std::string> sent(5);
    for (auto& w : sent) w = ten.surface_of(pick(rng));
    text.push_back(std::move(sent));
  }
  const CooccurrenceMatrix x = build_cooccurrence(text, ten, 3);
  std::vector<double> objective;
  train_embeddings(x, ten, 6, 40, 0.05, 1, &objective);
  ASSERT_EQ(objective.size(), 41u);
  EXPECT_LT(objective.back(), objective.front());
}

// ---------------------------------------------------------------------------
// 10. Scorer equals an independent Levenshtein oracle; rate identity exact.

TEST(Acceptance, C10ScorerMatchesLevenshteinOracle) {
  Rng rng(1010);
  std::uniform_int_distribution<int> len(0, 8);
  std::uniform_int_distribution<int> letter(0, 4);
  std::vector<ScorePair> pairs;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> a(static_cast<size_t>(len(rng)));
    std::vector<int> b(static_cast<size_t>(len(rng)));
    for (auto& w : a) w = letter(rng);
    for (auto& w : b) w = letter(rng);
    std::vector<std::string> as, bs;
    for (int w : a) as.push_back("v" + std::to_string(w));
    for (int w : b) bs.push_back("v" + std::to_string(w));
    ASSERT_EQ(align_edit(as, bs).errors(), testing::levenshtein_oracle(a, b)) << "trial " << trial;
    if (!as.empty()) pairs.emplace_back(as, bs);
  }
  const CorpusScore s = corpus_wer(pairs);
  const double identity =
      static_cast<double>(s.substitutions + s.deletions + s.insertions) / s.n_ref_words;
  EXPECT_EQ(s.wer, identity);
  EXPECT_EQ(s.sub_rate, static_cast<double>(s.substitutions) / s.n_ref_words);
  EXPECT_EQ(s.del_rate, static_cast<double>(s.deletions) / s.n_ref_words);
  EXPECT_EQ(s.ins_rate, static_cast<double>(s.insertions) / s.n_ref_words);
}

// ---------------------------------------------------------------------------
// 11. Training-recipe conformance: halving rule, clip bound, init range.

TEST(Acceptance, C11TrainingRecipeConformance) {
  // defaults pinned by the recipe
  const TrainConfig defaults;
  EXPECT_EQ(defaults.clip_bound, 10.0);
  EXPECT_EQ(defaults.init_range, 0.01);
  EXPECT_EQ(defaults.lr_halving_threshold, 0.10);

  // halve exactly when the relative improvement is at or below 10%
  EXPECT_EQ(update_lr({1.0}, 8e-4, 0.10), 8e-4);           // first epoch: keep
  EXPECT_EQ(update_lr({1.0, 0.85}, 8e-4, 0.10), 8e-4);     // 15% better: keep
  EXPECT_EQ(update_lr({1.0, 0.95}, 8e-4, 0.10), 4e-4);     // 5% better: halve
  EXPECT_EQ(update_lr({1.0, 0.90}, 8e-4, 0.10), 4e-4);     // exactly 10%: halve
  EXPECT_EQ(update_lr({1.0, 1.20}, 8e-4, 0.10), 4e-4);     // worse: halve

  // elementwise clip at +/-10, then the SGD step
  LayerSpec spec;
  spec.n_layers = 1;
  spec.hidden = 2;
  spec.bidirectional = false;
  spec.input_dim = 2;
  spec.n_word_outputs = 2;
  ModelParams params = zero_params(spec);
  ModelParams grads = zero_params(spec);
  grads.word_dense.w(0, 0) = 100.0;   // clipped to 10
  grads.word_dense.w(1, 0) = -100.0;  // clipped to -10
  grads.word_dense.w(0, 1) = 3.0;     // inside the bound
  clip_and_step(params, grads, 10.0, 0.5);
  EXPECT_DOUBLE_EQ(params.word_dense.w(0, 0), -5.0);
  EXPECT_DOUBLE_EQ(params.word_dense.w(1, 0), 5.0);
  EXPECT_DOUBLE_EQ(params.word_dense.w(0, 1), -1.5);

  // uniform init stays strictly inside (-range, range) and spans it
  const ModelParams init = init_params(spec, 0.01, 3);
  double lo = 0.0, hi = 0.0;
  for_each_blob(init, [&](const std::string&, const auto& blob) {
    for (Eigen::Index r = 0; r < blob.rows(); ++r)
      for (Eigen::Index c = 0; c < blob.cols(); ++c) {
        EXPECT_LT(std::abs(blob(r, c)), 0.01);
        lo = std::min(lo, blob(r, c));
        hi = std::max(hi, blob(r, c));
      }
  });
  EXPECT_LT(lo, -0.005);
  EXPECT_GT(hi, 0.005);
}

}  // namespace
}  // namespace actc

// ---------------------------------------------------------------------------

namespace {

struct CriterionLine {
  const char* test_name;
  const char* label;
};

constexpr CriterionLine kCriteria[] = {
    {"C01CtcLossMatchesBruteForceEnumeration",
     "CTC loss equals brute-force path enumeration (1000 instances, tol 1e-9, <10 s)"},
    {"C02PathProbabilitiesSumToOne",
     "label-sequence probabilities sum to 1 (tol 1e-9)"},
    {"C03GradientsMatchFiniteDifferences",
     "CTC and end-to-end gradients match finite differences (tol 1e-4 / 1e-3, <60 s)"},
    {"C04InitializationOrderingHoldsAcrossSeeds",
     "phone-transfer < random and +embeddings < phone-transfer heldout loss (>=2 of 3 seeds)"},
    {"C05ToyCorpusConvergesUnderGreedyDecoding",
     "clean-corpus greedy token error rate <=5% within 30 epochs (<5 min)"},
    {"C06RescoringImprovesAmbiguousAcoustics",
     "rescored WER < greedy WER with oracle <= rescored <= greedy throughout"},
    {"C07RescoringEqualsExhaustiveEnumeration",
     "lattice rescoring equals exhaustive enumeration (1000 lattices, 0 mismatches)"},
    {"C08LanguageModelNormalizesAndRoundTrips",
     "LM normalizes over every history (tol 1e-6); ARPA round-trip drift <=1e-12"},
    {"C09EmbeddingPreparationAndObjectiveDescent",
     "prepared embedding rows have L2 norm 0.1 (tol 1e-9); GloVe objective decreases"},
    {"C10ScorerMatchesLevenshteinOracle",
     "scorer equals Levenshtein oracle (1000 pairs); WER = S+D+I identity exact"},
    {"C11TrainingRecipeConformance",
     "lr halves iff improvement <=10%; clip +/-10; init uniform in (-0.01, 0.01)"},
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  const int rc = RUN_ALL_TESTS();

  std::map<std::string, bool> outcome;
  const ::testing::UnitTest* unit = ::testing::UnitTest::GetInstance();
  for (int s = 0; s < unit->total_test_suite_count(); ++s) {
    const ::testing::TestSuite* suite = unit->GetTestSuite(s);
    for (int t = 0; t < suite->total_test_count(); ++t) {
      const ::testing::TestInfo* info = suite->GetTestInfo(t);
      if (info->result() != nullptr) outcome[info->name()] = info->result()->Passed();
    }
  }

  std::printf("\n==== acceptance summary ====\n");
  int idx = 0;
  for (const auto& c : kCriteria) {
    ++idx;
    const auto it = outcome.find(c.test_name);
    const char* verdict = (it != outcome.end() && it->second) ? "PASS" : "FAIL";
    std::printf("criterion %2d: %s - %s\n", idx, verdict, c.label);
  }
  std::printf("============================\n");
  return rc;
}
