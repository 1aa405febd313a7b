#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actc/common.hpp"
#include "actc/vocab.hpp"

namespace actc {

// Sparse symmetric weighted co-occurrence counts, keyed by word id pairs.
struct CooccurrenceMatrix {
  std::map<std::pair<int, int>, double> counts;
  int window = 0;

  double at(int i, int j) const {
    auto it = counts.find({i, j});
    return it == counts.end() ? 0.0 : it->second;
  }
  void add(int i, int j, double v) {
    counts[{i, j}] += v;
    if (i != j) counts[{j, i}] += v;
  }
};

// Per-word embedding rows; words absent from `rows` have no trained vector
// and callers fall back to their own random initialization.
struct EmbeddingTable {
  int dim = 0;
  std::map<std::string, Eigen::VectorXd> rows;

  bool has(const std::string& word) const { return rows.count(word) > 0; }
};

// Each co-occurring pair within `window` contributes 1/distance, in both
// directions. Tokens outside the vocabulary are counted under the OOV id.
inline CooccurrenceMatrix build_cooccurrence(const std::vector<std::vector<std::string>>& text,
                                             const Vocab& vocab, int window) {
  ACTC_CHECK(window >= 1, "window must be >= 1");
  CooccurrenceMatrix x;
  x.window = window;
  for (const auto& sent : text) {
    for (size_t i = 0; i < sent.size(); ++i) {
      const int wi = vocab.id_of(sent[i]);
      for (size_t k = 1; k <= static_cast<size_t>(window) && i + k < sent.size(); ++k) {
        const int wj = vocab.id_of(sent[i + k]);
        x.add(wi, wj, 1.0 / static_cast<double>(k));
      }
    }
  }
  return x;
}

namespace detail {

// Weighting from the original GloVe recipe: (x/100)^0.75 capped at 1.
inline double glove_weight(double x) {
  constexpr double x_max = 100.0;
  return x >= x_max ? 1.0 : std::pow(x / x_max, 0.75);
}

}  // namespace detail

// Σ_{X_ij>0} f(X_ij) (w_i·w̃_j + b_i + b̃_j − ln X_ij)², the quantity
// train_embeddings minimizes; exposed so tests can watch it decrease.
inline double glove_objective(const CooccurrenceMatrix& x, const Eigen::MatrixXd& w,
                              const Eigen::MatrixXd& w_ctx, const Eigen::VectorXd& b,
                              const Eigen::VectorXd& b_ctx) {
  double total = 0.0;
  for (const auto& [ij, count] : x.counts) {
    if (count <= 0.0) continue;
    const auto [i, j] = ij;
    const double diff = w.row(i).dot(w_ctx.row(j)) + b(i) + b_ctx(j) - std::log(count);
    total += detail::glove_weight(count) * diff * diff;
  }
  return total;
}

// AdaGrad on the weighted-least-squares objective above; the returned row
// for word i is w_i + w̃_i. Only vocabulary ids seen in X get trained rows.
// When objective_log is given it receives the objective before training and
// after every iteration.
inline EmbeddingTable train_embeddings(const CooccurrenceMatrix& x, const Vocab& vocab, int dim,
                                       int iters, double lr, uint64_t seed,
                                       std::vector<double>* objective_log = nullptr) {
  ACTC_CHECK(dim >= 1, "dim must be >= 1");
  ACTC_CHECK(iters >= 0, "iters must be >= 0");
  ACTC_CHECK(lr > 0, "lr must be positive");
  bool any = false;
  for (const auto& [ij, count] : x.counts) any = any || count > 0.0;
  if (!any) throw std::invalid_argument("co-occurrence matrix is all zero");

  const int v = vocab.size();
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Eigen::MatrixXd w(v, dim), w_ctx(v, dim);
  for (int i = 0; i < v; ++i)
    for (int d = 0; d < dim; ++d) {
      w(i, d) = u(rng) / dim;
      w_ctx(i, d) = u(rng) / dim;
    }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(v), b_ctx = Eigen::VectorXd::Zero(v);
  Eigen::MatrixXd gw = Eigen::MatrixXd::Ones(v, dim), gw_ctx = Eigen::MatrixXd::Ones(v, dim);
  Eigen::VectorXd gb = Eigen::VectorXd::Ones(v), gb_ctx = Eigen::VectorXd::Ones(v);

  // fixed update order keeps runs bit-identical for a given seed
  std::vector<std::pair<std::pair<int, int>, double>> entries;
  for (const auto& e : x.counts)
    if (e.second > 0.0) entries.push_back(e);

  if (objective_log != nullptr)
    objective_log->push_back(glove_objective(x, w, w_ctx, b, b_ctx));
  for (int it = 0; it < iters; ++it) {
    for (const auto& [ij, count] : entries) {
      const auto [i, j] = ij;
      const double diff = w.row(i).dot(w_ctx.row(j)) + b(i) + b_ctx(j) - std::log(count);
      const double coeff = detail::glove_weight(count) * diff;
      for (int d = 0; d < dim; ++d) {
        const double grad_i = coeff * w_ctx(j, d);
        const double grad_j = coeff * w(i, d);
        w(i, d) -= lr * grad_i / std::sqrt(gw(i, d));
        w_ctx(j, d) -= lr * grad_j / std::sqrt(gw_ctx(j, d));
        gw(i, d) += grad_i * grad_i;
        gw_ctx(j, d) += grad_j * grad_j;
      }
      b(i) -= lr * coeff / std::sqrt(gb(i));
      b_ctx(j) -= lr * coeff / std::sqrt(gb_ctx(j));
      gb(i) += coeff * coeff;
      gb_ctx(j) += coeff * coeff;
    }
    if (objective_log != nullptr)
      objective_log->push_back(glove_objective(x, w, w_ctx, b, b_ctx));
  }

  EmbeddingTable table;
  table.dim = dim;
  std::set<int> trained;
  for (const auto& [ij, count] : entries) {
    trained.insert(ij.first);
    trained.insert(ij.second);
  }
  for (int i : trained) table.rows[vocab.surface_of(i)] = (w.row(i) + w_ctx.row(i)).transpose();
  return table;
}

// Init-table preparation: per word, average the vectors available across
// tables, normalize to unit L2, scale by 0.1. Words with no usable vector
// (absent everywhere, or averaging to zero) are left out of the result and
// thus fall back to random initialization downstream.
inline EmbeddingTable prepare_init_table(const std::vector<EmbeddingTable>& tables,
                                         const Vocab& vocab) {
  ACTC_CHECK(!tables.empty(), "need at least one embedding table");
  const int dim = tables.front().dim;
  for (const auto& t : tables)
    ACTC_CHECK(t.dim == dim, "embedding tables disagree on dimension");

  EmbeddingTable out;
  out.dim = dim;
  for (int id = 0; id < vocab.size(); ++id) {
    const std::string& word = vocab.surface_of(id);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    int n = 0;
    for (const auto& t : tables) {
      auto it = t.rows.find(word);
      if (it == t.rows.end()) continue;
      ACTC_CHECK(it->second.size() == dim, "embedding row has wrong dimension");
      sum += it->second;
      ++n;
    }
    if (n == 0) continue;
    sum /= n;
    const double norm = sum.norm();
    if (norm == 0.0) continue;  // normalization undefined: random fallback
    out.rows[word] = sum * (0.1 / norm);
  }
  return out;
}

// Text interchange format: one line per word, surface then the vector.
inline void save_embeddings(const std::string& path, const EmbeddingTable& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.precision(17);
  for (const auto& [word, vec] : table.rows) {
    os << word;
    for (Eigen::Index d = 0; d < vec.size(); ++d) os << ' ' << vec(d);
    os << '\n';
  }
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  EmbeddingTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (word.empty() || vals.empty())
      throw std::runtime_error(path + ": bad embedding line " + std::to_string(line_no));
    if (table.dim == 0) table.dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != table.dim)
      throw std::runtime_error(path + ": inconsistent dimension at line " +
                               std::to_string(line_no));
    Eigen::VectorXd vec(table.dim);
    for (int d = 0; d < table.dim; ++d) vec(d) = vals[static_cast<size_t>(d)];
    table.rows[word] = std::move(vec);
  }
  return table;
}

}  // namespace actc
