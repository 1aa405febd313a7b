#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "actc/common.hpp"
#include "actc/ctc.hpp"
#include "actc/embeddings.hpp"
#include "actc/features.hpp"
#include "actc/io.hpp"
#include "actc/lstm.hpp"
#include "actc/vocab.hpp"

namespace actc {

struct LayerSpec {
  int n_layers = 2;
  int hidden = 32;  // per direction
  bool bidirectional = true;
  int input_dim = 0;
  int n_word_outputs = 0;   // vocabulary size including blank
  int n_phone_outputs = 0;  // 0 disables the phone branch
  int branch_at = 0;        // 1-based layer whose output feeds the branch; 0 = n_layers-1

  bool has_phone_branch() const { return n_phone_outputs > 0; }
  int layer_output_dim() const { return bidirectional ? 2 * hidden : hidden; }
  int effective_branch_at() const {
    return branch_at > 0 ? branch_at : std::max(1, n_layers - 1);
  }

  void validate() const {
    ACTC_CHECK(n_layers >= 1 && hidden >= 1 && input_dim >= 1, "layer sizes must be >= 1");
    ACTC_CHECK(n_word_outputs >= 2, "need blank plus at least one output label");
    if (has_phone_branch()) {
      ACTC_CHECK(n_phone_outputs >= 2, "phone branch needs blank plus at least one label");
      const int at = effective_branch_at();
      ACTC_CHECK(at >= 1 && at <= n_layers, "branch_at out of range");
    }
  }

  bool same_lstm_stack(const LayerSpec& other) const {
    return n_layers == other.n_layers && hidden == other.hidden &&
           bidirectional == other.bidirectional && input_dim == other.input_dim;
  }
};

struct DenseParams {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out

  static DenseParams zeros(int out, int in) {
    DenseParams p;
    p.w = Eigen::MatrixXd::Zero(out, in);
    p.b = Eigen::VectorXd::Zero(out);
    return p;
  }
};

struct BlstmLayerParams {
  LstmParams fw, bw;  // bw unused for unidirectional specs
};

struct ModelParams {
  LayerSpec spec;
  std::vector<BlstmLayerParams> layers;
  DenseParams word_dense;
  DenseParams phone_dense;  // empty unless spec.has_phone_branch()
};

// Applies fn(name, eigen_object) to every weight blob, in a fixed order that
// doubles as the checkpoint layout.
template <typename Params, typename Fn>
void for_each_blob(Params& p, Fn&& fn) {
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    fn(base + ".fw.wx", p.layers[l].fw.wx);
    fn(base + ".fw.wh", p.layers[l].fw.wh);
    fn(base + ".fw.b", p.layers[l].fw.b);
    if (p.spec.bidirectional) {
      fn(base + ".bw.wx", p.layers[l].bw.wx);
      fn(base + ".bw.wh", p.layers[l].bw.wh);
      fn(base + ".bw.b", p.layers[l].bw.b);
    }
  }
  fn("word_dense.w", p.word_dense.w);
  fn("word_dense.b", p.word_dense.b);
  if (p.spec.has_phone_branch()) {
    fn("phone_dense.w", p.phone_dense.w);
    fn("phone_dense.b", p.phone_dense.b);
  }
}

namespace detail {

// Strictly inside (-range, range): redraw the (measure-zero) boundary hit.
inline double uniform_open(Rng& rng, double range) {
  std::uniform_real_distribution<double> u(-range, range);
  double v;
  do {
    v = u(rng);
  } while (std::abs(v) >= range);
  return v;
}

template <typename Derived>
void fill_uniform(Eigen::MatrixBase<Derived>& m, Rng& rng, double range) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = uniform_open(rng, range);
}

}  // namespace detail

// Allocates all blobs at their spec-implied shapes, zero-filled.
inline ModelParams zero_params(const LayerSpec& spec) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  int in = spec.input_dim;
  for (int l = 0; l < spec.n_layers; ++l) {
    BlstmLayerParams layer;
    layer.fw = LstmParams::zeros(spec.hidden, in);
    if (spec.bidirectional) layer.bw = LstmParams::zeros(spec.hidden, in);
    p.layers.push_back(std::move(layer));
    in = spec.layer_output_dim();
  }
  p.word_dense = DenseParams::zeros(spec.n_word_outputs, spec.layer_output_dim());
  if (spec.has_phone_branch())
    p.phone_dense = DenseParams::zeros(spec.n_phone_outputs, spec.layer_output_dim());
  return p;
}

// Every weight i.i.d. uniform on the open interval (-range, range).
inline ModelParams init_params(const LayerSpec& spec, double range, uint64_t seed) {
  ACTC_CHECK(range > 0, "init range must be positive");
  ModelParams p = zero_params(spec);
  Rng rng(seed);
  for_each_blob(p, [&](const std::string&, auto& blob) { detail::fill_uniform(blob, rng, range); });
  return p;
}

struct ForwardCache {
  std::vector<LstmCache> fw_caches;           // per layer
  std::vector<LstmCache> bw_caches;           // per layer, in reversed time
  std::vector<Eigen::MatrixXd> layer_inputs;  // input to each layer
  Eigen::MatrixXd top_hidden;                 // T x layer_output_dim
  Eigen::MatrixXd branch_hidden;              // only when the branch exists
  bool valid = false;
};

struct ForwardResult {
  PosteriorGrid word;
  std::optional<PosteriorGrid> phone;
  ForwardCache cache;
};

namespace detail {

// Row-wise stable softmax of h*W^T + b.
inline Eigen::MatrixXd dense_softmax(const DenseParams& dense, const Eigen::MatrixXd& h) {
  Eigen::MatrixXd logits = h * dense.w.transpose();
  logits.rowwise() += dense.b.transpose();
  Eigen::MatrixXd probs(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    Eigen::ArrayXd e = (logits.row(t).array() - m).exp();
    probs.row(t) = e / e.sum();
  }
  return probs;
}

inline Eigen::MatrixXd reverse_rows(const Eigen::MatrixXd& m) { return m.colwise().reverse(); }

}  // namespace detail

inline ForwardResult forward(const ModelParams& params, const FeatureMatrix& feats) {
  const LayerSpec& spec = params.spec;
  ACTC_CHECK(feats.dim() == spec.input_dim, "feature dimension does not match model input_dim");
  ACTC_CHECK(feats.num_frames() >= 1, "need at least one frame");

  ForwardResult out;
  ForwardCache& cache = out.cache;
  Eigen::MatrixXd x = feats.frames;
  const int branch_layer = spec.has_phone_branch() ? spec.effective_branch_at() : -1;
  for (int l = 0; l < spec.n_layers; ++l) {
    cache.layer_inputs.push_back(x);
    const auto& layer = params.layers[static_cast<size_t>(l)];
    cache.fw_caches.push_back(lstm_forward(layer.fw, x));
    if (spec.bidirectional) {
      cache.bw_caches.push_back(lstm_forward(layer.bw, detail::reverse_rows(x)));
      Eigen::MatrixXd h(x.rows(), 2 * spec.hidden);
      h.leftCols(spec.hidden) = cache.fw_caches.back().h;
      h.rightCols(spec.hidden) = detail::reverse_rows(cache.bw_caches.back().h);
      x = std::move(h);
    } else {
      cache.bw_caches.emplace_back();
      x = cache.fw_caches.back().h;
    }
    if (l + 1 == branch_layer) cache.branch_hidden = x;
  }
  cache.top_hidden = x;
  cache.valid = true;

  out.word.probs = detail::dense_softmax(params.word_dense, cache.top_hidden);
  if (spec.has_phone_branch()) {
    PosteriorGrid phone;
    phone.probs = detail::dense_softmax(params.phone_dense, cache.branch_hidden);
    out.phone = std::move(phone);
  }
  return out;
}

// Gradients use the ModelParams shapes. Upstream grids are d(loss)/d(logits),
// the softmax-composed form ctc_gradient already provides.
inline ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                            const Eigen::MatrixXd& word_logit_grad,
                            const Eigen::MatrixXd* phone_logit_grad = nullptr) {
  const LayerSpec& spec = params.spec;
  ACTC_CHECK(cache.valid, "backward called without a forward cache");
  ACTC_CHECK(word_logit_grad.rows() == cache.top_hidden.rows() &&
                 word_logit_grad.cols() == spec.n_word_outputs,
             "word gradient shape mismatch");

  ModelParams grads = zero_params(spec);
  grads.word_dense.w = word_logit_grad.transpose() * cache.top_hidden;
  grads.word_dense.b = word_logit_grad.colwise().sum();
  Eigen::MatrixXd dh = word_logit_grad * params.word_dense.w;

  Eigen::MatrixXd dh_branch;
  const int branch_layer = spec.has_phone_branch() ? spec.effective_branch_at() : -1;
  if (phone_logit_grad != nullptr) {
    ACTC_CHECK(spec.has_phone_branch(), "phone gradient supplied but model has no branch");
    ACTC_CHECK(phone_logit_grad->rows() == cache.branch_hidden.rows() &&
                   phone_logit_grad->cols() == spec.n_phone_outputs,
               "phone gradient shape mismatch");
    grads.phone_dense.w = phone_logit_grad->transpose() * cache.branch_hidden;
    grads.phone_dense.b = phone_logit_grad->colwise().sum();
    dh_branch = *phone_logit_grad * params.phone_dense.w;
  }

  for (int l = spec.n_layers - 1; l >= 0; --l) {
    if (l + 1 == branch_layer && dh_branch.size() > 0) dh += dh_branch;
    const auto& layer = params.layers[static_cast<size_t>(l)];
    auto& glayer = grads.layers[static_cast<size_t>(l)];
    if (spec.bidirectional) {
      Eigen::MatrixXd dx_fw =
          lstm_backward(layer.fw, cache.fw_caches[static_cast<size_t>(l)],
                        dh.leftCols(spec.hidden), glayer.fw);
      Eigen::MatrixXd dx_bw =
          lstm_backward(layer.bw, cache.bw_caches[static_cast<size_t>(l)],
                        detail::reverse_rows(dh.rightCols(spec.hidden)), glayer.bw);
      dh = dx_fw + detail::reverse_rows(dx_bw);
    } else {
      dh = lstm_backward(layer.fw, cache.fw_caches[static_cast<size_t>(l)], dh, glayer.fw);
    }
  }
  return grads;
}

inline double multitask_loss(double phone_loss, double word_loss, double alpha) {
  ACTC_CHECK(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0,1]");
  return alpha * phone_loss + (1.0 - alpha) * word_loss;
}

// Elementwise clamp to [-clip_bound, clip_bound], then p <- p - lr*g.
inline void clip_and_step(ModelParams& params, const ModelParams& grads, double clip_bound,
                          double lr) {
  ACTC_CHECK(lr >= 0, "lr must be non-negative");
  ACTC_CHECK(clip_bound > 0, "clip bound must be positive");
  bool finite = true;
  for_each_blob(grads, [&](const std::string&, const auto& g) { finite = finite && g.allFinite(); });
  if (!finite) throw std::runtime_error("diverged");

  auto step = [&](auto& p, const auto& g) {
    p.array() -= lr * g.array().min(clip_bound).max(-clip_bound);
  };
  for (size_t l = 0; l < params.layers.size(); ++l) {
    step(params.layers[l].fw.wx, grads.layers[l].fw.wx);
    step(params.layers[l].fw.wh, grads.layers[l].fw.wh);
    step(params.layers[l].fw.b, grads.layers[l].fw.b);
    if (params.spec.bidirectional) {
      step(params.layers[l].bw.wx, grads.layers[l].bw.wx);
      step(params.layers[l].bw.wh, grads.layers[l].bw.wh);
      step(params.layers[l].bw.b, grads.layers[l].bw.b);
    }
  }
  step(params.word_dense.w, grads.word_dense.w);
  step(params.word_dense.b, grads.word_dense.b);
  if (params.spec.has_phone_branch()) {
    step(params.phone_dense.w, grads.phone_dense.w);
    step(params.phone_dense.b, grads.phone_dense.b);
  }
}

// Accumulates b into a (same spec), used when summing gradients over a batch.
inline void add_params(ModelParams& a, const ModelParams& b) {
  for (size_t l = 0; l < a.layers.size(); ++l) {
    a.layers[l].fw.wx += b.layers[l].fw.wx;
    a.layers[l].fw.wh += b.layers[l].fw.wh;
    a.layers[l].fw.b += b.layers[l].fw.b;
    if (a.spec.bidirectional) {
      a.layers[l].bw.wx += b.layers[l].bw.wx;
      a.layers[l].bw.wh += b.layers[l].bw.wh;
      a.layers[l].bw.b += b.layers[l].bw.b;
    }
  }
  a.word_dense.w += b.word_dense.w;
  a.word_dense.b += b.word_dense.b;
  if (a.spec.has_phone_branch()) {
    a.phone_dense.w += b.phone_dense.w;
    a.phone_dense.b += b.phone_dense.b;
  }
}

inline void scale_params(ModelParams& a, double s) {
  for_each_blob(a, [&](const std::string&, auto& blob) { blob *= s; });
}

// Halve exactly when the relative improvement over the previous epoch is
// at most `threshold` (a drop of exactly 10% still halves).
inline double update_lr(const std::vector<double>& heldout_history, double current_lr,
                        double threshold) {
  ACTC_CHECK(!heldout_history.empty(), "history must be non-empty");
  if (heldout_history.size() < 2) return current_lr;
  const double prev = heldout_history[heldout_history.size() - 2];
  const double latest = heldout_history.back();
  const double improvement = (prev - latest) / prev;
  return improvement <= threshold ? current_lr / 2.0 : current_lr;
}

// Word-model init from a trained phone model: the whole LSTM stack is copied
// verbatim, the output dense layer is drawn fresh.
inline ModelParams transfer_init(const LayerSpec& target_spec, const ModelParams& phone_model,
                                 uint64_t seed, double range = 0.01) {
  ACTC_CHECK(target_spec.same_lstm_stack(phone_model.spec),
             "phone model LSTM stack does not match target spec");
  ModelParams p = zero_params(target_spec);
  p.layers = phone_model.layers;
  Rng rng(seed);
  detail::fill_uniform(p.word_dense.w, rng, range);
  detail::fill_uniform(p.word_dense.b, rng, range);
  if (target_spec.has_phone_branch()) {
    detail::fill_uniform(p.phone_dense.w, rng, range);
    detail::fill_uniform(p.phone_dense.b, rng, range);
  }
  return p;
}

// Multitask init for a deeper word model: the phone model provides the bottom
// `phone_model.spec.n_layers` LSTM layers and its output dense becomes the
// phone-branch dense; everything above is drawn fresh.
inline ModelParams hier_transfer_init(const LayerSpec& target_spec, const ModelParams& phone_model,
                                      uint64_t seed, double range = 0.01) {
  target_spec.validate();
  ACTC_CHECK(target_spec.has_phone_branch(), "target spec has no phone branch");
  const int donor_layers = phone_model.spec.n_layers;
  ACTC_CHECK(donor_layers == target_spec.effective_branch_at(),
             "phone model depth must equal the branch point");
  ACTC_CHECK(target_spec.n_layers >= donor_layers, "target must be at least as deep as donor");
  ACTC_CHECK(target_spec.hidden == phone_model.spec.hidden &&
                 target_spec.bidirectional == phone_model.spec.bidirectional &&
                 target_spec.input_dim == phone_model.spec.input_dim,
             "phone model layer shape does not match target spec");
  ACTC_CHECK(target_spec.n_phone_outputs == phone_model.spec.n_word_outputs,
             "phone-branch output size must match the phone model's outputs");

  ModelParams p = init_params(target_spec, range, seed);
  for (int l = 0; l < donor_layers; ++l)
    p.layers[static_cast<size_t>(l)] = phone_model.layers[static_cast<size_t>(l)];
  p.phone_dense = phone_model.word_dense;
  return p;
}

// Dense rows for words present in the prepared table are copied from it;
// blank, OOV, and words missing from the table are drawn uniform.
inline ModelParams embedding_init(ModelParams params, const EmbeddingTable& table,
                                  const Vocab& vocab, uint64_t seed, double range = 0.01) {
  ACTC_CHECK(table.dim == params.word_dense.w.cols(),
             "embedding dimension does not match dense input width");
  ACTC_CHECK(vocab.size() == params.word_dense.w.rows(),
             "vocabulary size does not match dense output rows");
  Rng rng(seed);
  for (int id = 0; id < vocab.size(); ++id) {
    auto row = params.word_dense.w.row(id);
    if (id == Vocab::kBlankId || id == Vocab::kOovId || !table.has(vocab.surface_of(id))) {
      for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = detail::uniform_open(rng, range);
    } else {
      row = table.rows.at(vocab.surface_of(id)).transpose();
    }
  }
  return params;
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, spec header, then named f64 blobs.

inline constexpr char kCheckpointMagic[] = "ACTC1";

inline void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(kCheckpointMagic, 5);
  const LayerSpec& s = params.spec;
  write_u32(os, static_cast<uint32_t>(s.n_layers));
  write_u32(os, static_cast<uint32_t>(s.hidden));
  write_u32(os, s.bidirectional ? 1 : 0);
  write_u32(os, static_cast<uint32_t>(s.input_dim));
  write_u32(os, static_cast<uint32_t>(s.n_word_outputs));
  write_u32(os, static_cast<uint32_t>(s.n_phone_outputs));
  write_u32(os, static_cast<uint32_t>(s.branch_at));

  uint32_t n_blobs = 0;
  for_each_blob(params, [&](const std::string&, const auto&) { ++n_blobs; });
  write_u32(os, n_blobs);
  for_each_blob(params, [&](const std::string& name, const auto& blob) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(blob.rows()));
    write_u32(os, static_cast<uint32_t>(blob.cols()));
    for (Eigen::Index r = 0; r < blob.rows(); ++r)
      for (Eigen::Index c = 0; c < blob.cols(); ++c) write_f64(os, blob(r, c));
  });
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kCheckpointMagic, 5) != 0)
    throw std::runtime_error("not a model checkpoint: " + path);
  LayerSpec s;
  s.n_layers = static_cast<int>(read_u32(is));
  s.hidden = static_cast<int>(read_u32(is));
  s.bidirectional = read_u32(is) != 0;
  s.input_dim = static_cast<int>(read_u32(is));
  s.n_word_outputs = static_cast<int>(read_u32(is));
  s.n_phone_outputs = static_cast<int>(read_u32(is));
  s.branch_at = static_cast<int>(read_u32(is));

  ModelParams params = zero_params(s);
  std::map<std::string, Eigen::MatrixXd> blobs;
  const uint32_t n_blobs = read_u32(is);
  for (uint32_t k = 0; k < n_blobs; ++k) {
    const uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rows = read_u32(is);
    const uint32_t cols = read_u32(is);
    Eigen::MatrixXd m(rows, cols);
    for (uint32_t r = 0; r < rows; ++r)
      for (uint32_t c = 0; c < cols; ++c) m(r, c) = read_f64(is);
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    blobs[name] = std::move(m);
  }
  for_each_blob(params, [&](const std::string& name, auto& blob) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw std::runtime_error(path + ": checkpoint missing blob " + name);
    if (it->second.rows() != blob.rows() || it->second.cols() != blob.cols())
      throw std::runtime_error(path + ": blob shape mismatch for " + name);
    blob = it->second;
  });
  return params;
}

}  // namespace actc
