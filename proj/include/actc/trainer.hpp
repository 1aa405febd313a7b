#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "actc/corpus.hpp"
#include "actc/ctc.hpp"
#include "actc/nnet.hpp"

namespace actc {

struct TrainConfig {
  double learning_rate = 5e-4;
  double clip_bound = 10.0;
  int batch_size = 48;
  double lr_halving_threshold = 0.10;
  double init_range = 0.01;
  double multitask_alpha = 0.0;  // weight on the phone branch loss
  uint64_t seed = 0;
  int n_epochs = 10;
  int threads = 1;

  void validate() const {
    ACTC_CHECK(learning_rate > 0 && clip_bound > 0 && batch_size >= 1, "bad optimizer settings");
    ACTC_CHECK(lr_halving_threshold >= 0 && lr_halving_threshold < 1, "bad halving threshold");
    ACTC_CHECK(multitask_alpha >= 0.0 && multitask_alpha <= 1.0, "alpha must be in [0,1]");
    ACTC_CHECK(n_epochs >= 0 && threads >= 1, "bad schedule settings");
  }
};

// One training example: features plus the encoded target tiers. phone_targets
// stays empty when the model has no branch (or alpha is zero).
struct TrainUtterance {
  std::string id;
  FeatureMatrix features;
  std::vector<int> word_targets;
  std::vector<int> phone_targets;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;
  double lr = 0.0;
  int skipped = 0;  // utterances whose targets cannot fit in their frames
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> log;
};

namespace detail {

struct UttGrad {
  bool ok = false;
  double loss = 0.0;
  ModelParams grads;
};

// Forward + CTC (+ branch) + BPTT for one utterance. Infeasible targets on
// either tier make the whole utterance a no-op.
inline UttGrad utterance_gradient(const ModelParams& params, const TrainUtterance& utt,
                                  double alpha, bool want_grads) {
  UttGrad out;
  const bool use_branch = params.spec.has_phone_branch() && alpha > 0.0;
  ForwardResult fr = forward(params, utt.features);

  CtcResult word_res = ctc_forward(fr.word, utt.word_targets);
  if (word_res.status != CtcStatus::kOk) return out;
  double phone_loss = 0.0;
  CtcResult phone_res;
  if (use_branch) {
    ACTC_CHECK(fr.phone.has_value(), "model advertises a branch but produced no phone grid");
    phone_res = ctc_forward(*fr.phone, utt.phone_targets);
    if (phone_res.status != CtcStatus::kOk) return out;
    phone_loss = phone_res.loss;
  }
  out.loss = use_branch ? multitask_loss(phone_loss, word_res.loss, alpha) : word_res.loss;
  out.ok = true;
  if (!want_grads) return out;

  CtcResult word_grad = ctc_gradient(fr.word, utt.word_targets);
  Eigen::MatrixXd word_logit = word_grad.logit_grad * (use_branch ? 1.0 - alpha : 1.0);
  if (use_branch) {
    CtcResult phone_grad = ctc_gradient(*fr.phone, utt.phone_targets);
    Eigen::MatrixXd phone_logit = phone_grad.logit_grad * alpha;
    out.grads = backward(params, fr.cache, word_logit, &phone_logit);
  } else {
    out.grads = backward(params, fr.cache, word_logit);
  }
  return out;
}

// Index-ordered parallel map: results land in a vector slot per input, so
// the later reduction is deterministic regardless of thread count.
template <typename Fn>
void parallel_over(size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(static_cast<size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Mean per-utterance loss over a set (heldout evaluation); infeasible
// utterances are excluded from the mean.
inline double evaluate_loss(const ModelParams& params, const std::vector<TrainUtterance>& utts,
                            double alpha, int threads = 1) {
  std::vector<detail::UttGrad> results(utts.size());
  detail::parallel_over(utts.size(), threads, [&](size_t i) {
    results[i] = detail::utterance_gradient(params, utts[i], alpha, /*want_grads=*/false);
  });
  double total = 0.0;
  int n = 0;
  for (const auto& r : results)
    if (r.ok) {
      total += r.loss;
      ++n;
    }
  return n > 0 ? total / n : 0.0;
}

// SGD with the fixed recipe: batches in decreasing frame order, elementwise
// gradient clipping, learning rate halved whenever the heldout loss fails to
// improve by more than the threshold. Returns the trained params plus a
// per-epoch log row (epoch, train_loss, heldout_loss, lr).
inline TrainResult train(ModelParams params, const std::vector<TrainUtterance>& train_utts,
                         const std::vector<TrainUtterance>& heldout_utts,
                         const TrainConfig& cfg) {
  cfg.validate();
  ACTC_CHECK(!train_utts.empty(), "no training utterances");
  const double alpha = params.spec.has_phone_branch() ? cfg.multitask_alpha : 0.0;

  // reuse the corpus batching rule: decreasing frame count, ties by id
  std::vector<Utterance> shims;
  shims.reserve(train_utts.size());
  std::map<std::string, size_t> index_of;
  for (size_t i = 0; i < train_utts.size(); ++i) {
    Utterance shim;
    shim.id = train_utts[i].id;
    shim.features.frames.resize(train_utts[i].features.num_frames(), 0);
    shims.push_back(std::move(shim));
    ACTC_CHECK(index_of.emplace(train_utts[i].id, i).second, "duplicate utterance id");
  }
  const BatchPlan plan = make_batches(shims, cfg.batch_size);

  TrainResult result;
  result.params = std::move(params);
  double lr = cfg.learning_rate;
  std::vector<double> heldout_history;

  for (int epoch = 1; epoch <= cfg.n_epochs; ++epoch) {
    double epoch_loss = 0.0;
    int epoch_n = 0, skipped = 0;
    for (const auto& group : plan.groups) {
      std::vector<detail::UttGrad> grads(group.size());
      detail::parallel_over(group.size(), cfg.threads, [&](size_t i) {
        const TrainUtterance& utt = train_utts[index_of.at(group[i])];
        grads[i] = detail::utterance_gradient(result.params, utt, alpha, /*want_grads=*/true);
      });
      ModelParams total = zero_params(result.params.spec);
      int n = 0;
      for (const auto& g : grads) {
        if (!g.ok) {
          ++skipped;
          continue;
        }
        add_params(total, g.grads);
        epoch_loss += g.loss;
        ++n;
      }
      if (n == 0) continue;
      epoch_n += n;
      scale_params(total, 1.0 / n);
      clip_and_step(result.params, total, cfg.clip_bound, lr);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_n > 0 ? epoch_loss / epoch_n : 0.0;
    stats.heldout_loss = heldout_utts.empty()
                             ? stats.train_loss
                             : evaluate_loss(result.params, heldout_utts, alpha, cfg.threads);
    stats.skipped = skipped;
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.heldout_loss))
      throw std::runtime_error("diverged");
    heldout_history.push_back(stats.heldout_loss);
    lr = update_lr(heldout_history, lr, cfg.lr_halving_threshold);
    stats.lr = lr;  // rate that the next epoch will use
    result.log.push_back(stats);
    log_msg(LogLevel::kInfo, "epoch %d train %.6f heldout %.6f lr %.2e skipped %d", epoch,
            stats.train_loss, stats.heldout_loss, lr, skipped);
  }
  return result;
}

inline void save_loss_log(const std::string& path, const std::vector<EpochStats>& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << "epoch,train_loss,heldout_loss,lr\n";
  os.precision(12);
  for (const auto& s : log)
    os << s.epoch << ',' << s.train_loss << ',' << s.heldout_loss << ',' << s.lr << '\n';
}

// Convenience used by the CLI and tests: encode manifest utterances into
// training examples against the given vocabularies.
inline std::vector<TrainUtterance> to_train_utterances(const std::vector<Utterance>& utts,
                                                       const Vocab* word_vocab,
                                                       const Vocab* phone_vocab) {
  ACTC_CHECK(word_vocab != nullptr, "word vocabulary required");
  std::vector<TrainUtterance> out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    TrainUtterance t;
    t.id = u.id;
    t.features = u.features;
    t.word_targets = encode_transcript(u.words, *word_vocab);
    if (phone_vocab != nullptr) t.phone_targets = encode_transcript(u.phones, *phone_vocab);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace actc
