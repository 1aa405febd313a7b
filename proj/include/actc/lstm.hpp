#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "actc/common.hpp"

namespace actc {

// One LSTM direction. Gate pre-activations are stacked as 4H rows of wx/wh/b
// in the order: input gate, forget gate, cell candidate, output gate.
struct LstmParams {
  Eigen::MatrixXd wx;  // 4H x D
  Eigen::MatrixXd wh;  // 4H x H
  Eigen::VectorXd b;   // 4H

  int hidden() const { return static_cast<int>(wh.cols()); }
  int input_dim() const { return static_cast<int>(wx.cols()); }

  static LstmParams zeros(int hidden, int input_dim) {
    LstmParams p;
    p.wx = Eigen::MatrixXd::Zero(4 * hidden, input_dim);
    p.wh = Eigen::MatrixXd::Zero(4 * hidden, hidden);
    p.b = Eigen::VectorXd::Zero(4 * hidden);
    return p;
  }
};

// Activations recorded during the forward pass, enough to run BPTT.
struct LstmCache {
  Eigen::MatrixXd x;       // T x D
  Eigen::MatrixXd i, f, g, o;  // T x H gate activations
  Eigen::MatrixXd c, tanh_c, h;  // T x H states
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

// Left-to-right pass; callers reverse the rows of x to run the backward
// direction. Initial hidden and cell states are zero.
inline LstmCache lstm_forward(const LstmParams& p, const Eigen::MatrixXd& x) {
  const int h_size = p.hidden();
  ACTC_CHECK(x.cols() == p.input_dim(), "lstm input dimension mismatch");
  const Eigen::Index t_len = x.rows();
  LstmCache cache;
  cache.x = x;
  for (auto* m : {&cache.i, &cache.f, &cache.g, &cache.o, &cache.c, &cache.tanh_c, &cache.h})
    m->resize(t_len, h_size);

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h_size);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h_size);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Eigen::VectorXd z = p.wx * x.row(t).transpose() + p.wh * h_prev + p.b;
    for (int j = 0; j < h_size; ++j) {
      const double i_j = detail::sigmoid(z(j));
      const double f_j = detail::sigmoid(z(h_size + j));
      const double g_j = std::tanh(z(2 * h_size + j));
      const double o_j = detail::sigmoid(z(3 * h_size + j));
      const double c_j = f_j * c_prev(j) + i_j * g_j;
      const double tc_j = std::tanh(c_j);
      cache.i(t, j) = i_j;
      cache.f(t, j) = f_j;
      cache.g(t, j) = g_j;
      cache.o(t, j) = o_j;
      cache.c(t, j) = c_j;
      cache.tanh_c(t, j) = tc_j;
      cache.h(t, j) = o_j * tc_j;
    }
    h_prev = cache.h.row(t);
    c_prev = cache.c.row(t);
  }
  return cache;
}

// BPTT for one direction. dh_out is dLoss/dh per frame (T x H). Parameter
// gradients are accumulated into grad; the return value is dLoss/dx (T x D).
inline Eigen::MatrixXd lstm_backward(const LstmParams& p, const LstmCache& cache,
                                     const Eigen::MatrixXd& dh_out, LstmParams& grad) {
  const int h_size = p.hidden();
  const Eigen::Index t_len = cache.x.rows();
  ACTC_CHECK(dh_out.rows() == t_len && dh_out.cols() == h_size,
             "upstream gradient shape mismatch");

  Eigen::MatrixXd dx(t_len, p.input_dim());
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(h_size);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(h_size);
  Eigen::VectorXd dz(4 * h_size);
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    for (int j = 0; j < h_size; ++j) {
      const double i_j = cache.i(t, j);
      const double f_j = cache.f(t, j);
      const double g_j = cache.g(t, j);
      const double o_j = cache.o(t, j);
      const double tc_j = cache.tanh_c(t, j);
      const double c_prev = t > 0 ? cache.c(t - 1, j) : 0.0;

      const double dh = dh_out(t, j) + dh_next(j);
      const double do_ = dh * tc_j;
      const double dc = dh * o_j * (1.0 - tc_j * tc_j) + dc_next(j);
      const double di = dc * g_j;
      const double dg = dc * i_j;
      const double df = dc * c_prev;
      dc_next(j) = dc * f_j;

      dz(j) = di * i_j * (1.0 - i_j);
      dz(h_size + j) = df * f_j * (1.0 - f_j);
      dz(2 * h_size + j) = dg * (1.0 - g_j * g_j);
      dz(3 * h_size + j) = do_ * o_j * (1.0 - o_j);
    }
    grad.wx.noalias() += dz * cache.x.row(t);
    if (t > 0) grad.wh.noalias() += dz * cache.h.row(t - 1);
    grad.b += dz;
    dx.row(t) = (p.wx.transpose() * dz).transpose();
    dh_next.noalias() = p.wh.transpose() * dz;
  }
  return dx;
}

}  // namespace actc
