#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "actc/common.hpp"
#include "actc/io.hpp"
#include "actc/vocab.hpp"

namespace actc {

// Per-frame symbol probabilities, T x (V+1) with column 0 = blank.
// Rows are probabilities unless is_log is set.
struct PosteriorGrid {
  Eigen::MatrixXd probs;
  bool is_log = false;

  Eigen::Index num_frames() const { return probs.rows(); }
  Eigen::Index num_symbols() const { return probs.cols(); }

  Eigen::MatrixXd log_probs() const {
    if (is_log) return probs;
    return probs.unaryExpr([](double p) { return safe_log(p); });
  }
};

inline void save_grid(const std::string& path, const PosteriorGrid& g) {
  write_matrix_file(path, "POST", g.is_log ? g.probs.array().exp().matrix() : g.probs);
}

inline PosteriorGrid load_grid(const std::string& path) {
  PosteriorGrid g;
  g.probs = read_matrix_file(path, "POST");
  return g;
}

// Blank-interleaved expansion of a length-L target: phi, y1, phi, ..., yL, phi.
// Even positions are blanks, odd positions the labels in order.
inline std::vector<int> expand_labels(const std::vector<int>& y) {
  std::vector<int> states;
  states.reserve(2 * y.size() + 1);
  states.push_back(Vocab::kBlankId);
  for (int label : y) {
    ACTC_CHECK(label != Vocab::kBlankId, "blank id in target sequence");
    states.push_back(label);
    states.push_back(Vocab::kBlankId);
  }
  return states;
}

// The two collapse rules, in order: merge adjacent repeats, then drop blanks.
inline std::vector<int> collapse(const std::vector<int>& path) {
  std::vector<int> out;
  for (size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && path[i] == path[i - 1]) continue;
    if (path[i] != Vocab::kBlankId) out.push_back(path[i]);
  }
  return out;
}

// Shortest feasible path length: L plus one separating blank per adjacent repeat.
inline Eigen::Index min_path_frames(const std::vector<int>& y) {
  Eigen::Index n = static_cast<Eigen::Index>(y.size());
  for (size_t i = 1; i < y.size(); ++i)
    if (y[i] == y[i - 1]) ++n;
  return n;
}

enum class CtcStatus { kOk, kInfeasible };

struct CtcResult {
  CtcStatus status = CtcStatus::kOk;
  double loss = 0.0;            // -ln P(y|A)
  Eigen::MatrixXd grad;         // d loss / d P(k|a_t), T x (V+1)
  Eigen::MatrixXd logit_grad;   // d loss / d pre-softmax score, T x (V+1)
  std::vector<int> alignment;   // best path, when requested

  bool ok() const { return status == CtcStatus::kOk; }
};

namespace detail {

// Forward pass over the 2L+1 trellis in log space. alpha(t,s) includes the
// emission at t. Rows of log_p need not sum to 0 in probability space; the
// recursion only needs finite entries.
inline Eigen::MatrixXd ctc_alpha(const Eigen::MatrixXd& log_p, const std::vector<int>& states) {
  const Eigen::Index T = log_p.rows();
  const Eigen::Index S = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Constant(T, S, kNegInf);
  alpha(0, 0) = log_p(0, states[0]);
  if (S > 1) alpha(0, 1) = log_p(0, static_cast<size_t>(states[1]));
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      const int label = states[static_cast<size_t>(s)];
      if (s >= 2 && label != Vocab::kBlankId && label != states[static_cast<size_t>(s) - 2])
        acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc + log_p(t, label);
    }
  }
  return alpha;
}

// Backward pass; beta(t,s) also includes the emission at t, so
// P(y) = sum_s alpha(t,s) * beta(t,s) / p(label(s) | a_t) at any t.
inline Eigen::MatrixXd ctc_beta(const Eigen::MatrixXd& log_p, const std::vector<int>& states) {
  const Eigen::Index T = log_p.rows();
  const Eigen::Index S = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(T, S, kNegInf);
  beta(T - 1, S - 1) = log_p(T - 1, states[static_cast<size_t>(S) - 1]);
  if (S > 1) beta(T - 1, S - 2) = log_p(T - 1, states[static_cast<size_t>(S) - 2]);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index s = S - 1; s >= 0; --s) {
      double acc = beta(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, beta(t + 1, s + 1));
      const int label = states[static_cast<size_t>(s)];
      if (s + 2 < S && label != Vocab::kBlankId && label != states[static_cast<size_t>(s) + 2])
        acc = log_add(acc, beta(t + 1, s + 2));
      beta(t, s) = acc + log_p(t, label);
    }
  }
  return beta;
}

}  // namespace detail

// Negative log CTC probability of target y under the grid.
// Over-long targets yield an infeasible result rather than an infinity so
// trainers can skip them.
inline CtcResult ctc_forward(const PosteriorGrid& grid, const std::vector<int>& y) {
  CtcResult res;
  const Eigen::Index T = grid.num_frames();
  if (T < 1 || T < min_path_frames(y)) {
    res.status = CtcStatus::kInfeasible;
    return res;
  }
  const std::vector<int> states = expand_labels(y);
  const Eigen::MatrixXd log_p = grid.log_probs();
  const Eigen::MatrixXd alpha = detail::ctc_alpha(log_p, states);
  const Eigen::Index S = static_cast<Eigen::Index>(states.size());
  double total = alpha(T - 1, S - 1);
  if (S > 1) total = log_add(total, alpha(T - 1, S - 2));
  res.loss = -total;
  return res;
}

// Loss plus gradients from forward-backward occupancies:
//   d loss / d p(k|t)  = -(1/P) * sum_{s: label(s)=k} alpha*beta / p(k|t)^2
//   d loss / d u_k(t)  = p(k|t) - gamma_t(k)        (softmax-composed form)
// The logit form assumes the grid rows are softmax outputs.
inline CtcResult ctc_gradient(const PosteriorGrid& grid, const std::vector<int>& y) {
  CtcResult res = ctc_forward(grid, y);
  if (!res.ok()) return res;
  const Eigen::Index T = grid.num_frames();
  const Eigen::Index V1 = grid.num_symbols();
  const std::vector<int> states = expand_labels(y);
  const Eigen::Index S = static_cast<Eigen::Index>(states.size());
  const Eigen::MatrixXd log_p = grid.log_probs();
  const Eigen::MatrixXd alpha = detail::ctc_alpha(log_p, states);
  const Eigen::MatrixXd beta = detail::ctc_beta(log_p, states);
  const double log_total = -res.loss;

  Eigen::MatrixXd occ = Eigen::MatrixXd::Constant(T, V1, kNegInf);  // log sum alpha*beta per symbol
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index s = 0; s < S; ++s) {
      const int k = states[static_cast<size_t>(s)];
      occ(t, k) = log_add(occ(t, k), alpha(t, s) + beta(t, s));
    }

  res.grad.resize(T, V1);
  res.logit_grad.resize(T, V1);
  const Eigen::MatrixXd probs = grid.is_log ? grid.probs.array().exp().matrix() : grid.probs;
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index k = 0; k < V1; ++k) {
      if (occ(t, k) == kNegInf) {
        res.grad(t, k) = 0.0;
        res.logit_grad(t, k) = probs(t, k);
        continue;
      }
      const double lp = log_p(t, k);
      const double gamma = std::exp(occ(t, k) - log_total - lp);  // posterior occupancy
      res.grad(t, k) = -std::exp(occ(t, k) - log_total - 2.0 * lp);
      res.logit_grad(t, k) = probs(t, k) - gamma;
    }
  return res;
}

// Viterbi over the same trellis: the single most probable path in Omega(y).
inline CtcResult best_alignment(const PosteriorGrid& grid, const std::vector<int>& y) {
  CtcResult res;
  const Eigen::Index T = grid.num_frames();
  if (T < 1 || T < min_path_frames(y)) {
    res.status = CtcStatus::kInfeasible;
    return res;
  }
  const std::vector<int> states = expand_labels(y);
  const Eigen::Index S = static_cast<Eigen::Index>(states.size());
  const Eigen::MatrixXd log_p = grid.log_probs();
  Eigen::MatrixXd best = Eigen::MatrixXd::Constant(T, S, kNegInf);
  Eigen::MatrixXi back = Eigen::MatrixXi::Constant(T, S, -1);
  best(0, 0) = log_p(0, states[0]);
  if (S > 1) best(0, 1) = log_p(0, static_cast<size_t>(states[1]));
  for (Eigen::Index t = 1; t < T; ++t)
    for (Eigen::Index s = 0; s < S; ++s) {
      double b = best(t - 1, s);
      Eigen::Index arg = s;
      if (s >= 1 && best(t - 1, s - 1) > b) {
        b = best(t - 1, s - 1);
        arg = s - 1;
      }
      const int label = states[static_cast<size_t>(s)];
      if (s >= 2 && label != Vocab::kBlankId && label != states[static_cast<size_t>(s) - 2] &&
          best(t - 1, s - 2) > b) {
        b = best(t - 1, s - 2);
        arg = s - 2;
      }
      if (b == kNegInf) continue;
      best(t, s) = b + log_p(t, label);
      back(t, s) = static_cast<int>(arg);
    }
  Eigen::Index s = S - 1;
  if (S > 1 && best(T - 1, S - 2) > best(T - 1, S - 1)) s = S - 2;
  res.loss = -best(T - 1, s);
  res.alignment.assign(static_cast<size_t>(T), Vocab::kBlankId);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    res.alignment[static_cast<size_t>(t)] = states[static_cast<size_t>(s)];
    if (t > 0) s = back(t, s);
  }
  return res;
}

}  // namespace actc
