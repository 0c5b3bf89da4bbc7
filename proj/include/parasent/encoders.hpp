#pragma once

#include <algorithm>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "parasent/matrix.hpp"
#include "parasent/numcore.hpp"
#include "parasent/vocabulary.hpp"

namespace parasent {

enum class EncoderKind : std::uint8_t { wa = 0, gran = 1 };

const char* to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& s);

inline constexpr double kEmbeddingInitRange = 0.01;

namespace detail {
template <class T>
void check_ids(std::span<const TokenId> ids, std::size_t vocab) {
  if (ids.empty()) throw std::invalid_argument("cannot encode an empty sequence");
  for (TokenId id : ids)
    if (id < 0 || std::size_t(id) >= vocab)
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Word averaging: g(s) = mean of the token embeddings.
//
// The embedding matrix is stored |V| x d so each token's vector is a
// contiguous row.

template <class T>
class WaEncoder {
 public:
  struct Masks {};
  struct Trace {
    std::vector<TokenId> ids;
  };

  explicit WaEncoder(ParameterSet<T> params) : params_(std::move(params)) {
    if (params_.size() != 1 || params_.name(0) != "embedding")
      throw std::invalid_argument("WA parameters must be exactly {embedding}");
    if (params_[0].cols() == 0) throw std::invalid_argument("embedding dimension must be >= 1");
  }

  static WaEncoder init(std::size_t vocab, std::size_t dim, Rng& rng) {
    ParameterSet<T> p;
    p.add("embedding", uniform_init<T>(vocab, dim, -kEmbeddingInitRange, kEmbeddingInitRange, rng));
    return WaEncoder(std::move(p));
  }

  std::size_t dim() const { return params_[0].cols(); }
  std::size_t vocab_size() const { return params_[0].rows(); }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const BasicMatrix<T>& embedding() const { return params_[0]; }

  Masks make_masks(double, Rng&) const { return {}; }

  std::vector<T> forward(std::span<const TokenId> ids, const Masks* = nullptr,
                         Trace* trace = nullptr) const {
    detail::check_ids<T>(ids, vocab_size());
    const auto& emb = embedding();
    std::vector<double> acc(dim(), 0.0);
    for (TokenId id : ids) {
      auto row = emb.row(std::size_t(id));
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += double(row[k]);
    }
    std::vector<T> out(dim());
    const double inv = 1.0 / double(ids.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<T>(acc[k] * inv);
    if (trace) trace->ids.assign(ids.begin(), ids.end());
    return out;
  }

  void backward(const Trace& trace, std::span<const T> d_out, Gradients<T>& grads) const {
    if (trace.ids.empty()) throw std::logic_error("WA backward without a forward trace");
    auto& g = grads.at(0);
    const T inv = static_cast<T>(1.0 / double(trace.ids.size()));
    for (TokenId id : trace.ids) {
      auto row = g.row(std::size_t(id));
      for (std::size_t k = 0; k < row.size(); ++k) row[k] += d_out[k] * inv;
    }
  }

 private:
  ParameterSet<T> params_;
};

// ---------------------------------------------------------------------------
// Gated recurrent averaging network.
//
//   r_t  = sigma(W_r x_t + U_r h_{t-1})
//   z_t  = sigma(W_z x_t + U_z h_{t-1})
//   h~_t = z_t o f(W_h_cand x_t + U_h (r_t o h_{t-1}) + b_h)
//   h_t  = (1 - z_t) o h_{t-1} + h~_t
//   g_t  = sigma(W_x x_t + W_h_gate h_t + b)
//   a_t  = x_t o g_t,   g(s) = mean_t a_t
//
// x_t is the embedding row of token t and f is leaky ReLU. The update gate
// multiplies the candidate inside h~_t and r_t/z_t carry no bias unless
// gate_biases is set. Variational dropout masks, when given, scale the GRU's
// view of x_t and of h_{t-1} in the recurrent products; the output gate and
// a_t always see the unmasked embedding.

// Hidden states are clamped to +-kGranStateBound. Leaky ReLU is unbounded, so
// extreme recurrent weights grow h geometrically; the clamp keeps every value
// finite and never binds at trained scales.
inline constexpr double kGranStateBound = 1e15;

struct GranOptions {
  double leaky_slope = kDefaultLeakySlope;
  bool gate_biases = false;
};

template <class T>
class GranEncoder {
 public:
  enum Slot : std::size_t {
    kEmbedding, kWr, kWz, kWhCand, kUr, kUz, kUh, kBh, kWx, kWhGate, kB, kBr, kBz
  };
  static constexpr const char* kNames[] = {"embedding", "W_r", "W_z",      "W_h_cand", "U_r",
                                           "U_z",       "U_h", "b_h",      "W_x",      "W_h_gate",
                                           "b",         "b_r", "b_z"};

  struct Masks {
    DropoutMask<T> input;   // d
    DropoutMask<T> hidden;  // hidden
  };

  struct Trace {
    std::vector<TokenId> ids;
    std::vector<T> mask_x, mask_h;  // empty when no dropout
    // Per step, flattened: step t occupies [t*H, (t+1)*H) (or d for g).
    std::vector<T> h;  // (n+1)*H, h[0..H) = h_0 = 0
    std::vector<T> r, z, q, pre_cand, cand;
    std::vector<T> gate;  // n*d
  };

  GranEncoder(ParameterSet<T> params, GranOptions opts) : params_(std::move(params)), opts_(opts) {
    validate();
  }

  static GranEncoder init(std::size_t vocab, std::size_t dim, std::size_t hidden,
                          GranOptions opts, Rng& rng) {
    ParameterSet<T> p;
    p.add("embedding", uniform_init<T>(vocab, dim, -kEmbeddingInitRange, kEmbeddingInitRange, rng));
    p.add("W_r", xavier_init<T>(hidden, dim, rng));
    p.add("W_z", xavier_init<T>(hidden, dim, rng));
    p.add("W_h_cand", xavier_init<T>(hidden, dim, rng));
    p.add("U_r", xavier_init<T>(hidden, hidden, rng));
    p.add("U_z", xavier_init<T>(hidden, hidden, rng));
    p.add("U_h", xavier_init<T>(hidden, hidden, rng));
    p.add("b_h", BasicMatrix<T>(hidden, 1));
    p.add("W_x", xavier_init<T>(dim, dim, rng));
    p.add("W_h_gate", xavier_init<T>(dim, hidden, rng));
    p.add("b", BasicMatrix<T>(dim, 1));
    if (opts.gate_biases) {
      p.add("b_r", BasicMatrix<T>(hidden, 1));
      p.add("b_z", BasicMatrix<T>(hidden, 1));
    }
    return GranEncoder(std::move(p), opts);
  }

  std::size_t dim() const { return params_[kEmbedding].cols(); }
  std::size_t hidden() const { return params_[kWr].rows(); }
  std::size_t vocab_size() const { return params_[kEmbedding].rows(); }
  const GranOptions& options() const { return opts_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const BasicMatrix<T>& param(Slot s) const { return params_[s]; }

  Masks make_masks(double keep_prob, Rng& rng) const {
    return {make_variational_mask<T>(dim(), keep_prob, rng),
            make_variational_mask<T>(hidden(), keep_prob, rng)};
  }

  // h_1..h_n, each of size hidden.
  std::vector<std::vector<T>> hidden_states(std::span<const TokenId> ids,
                                            const Masks* masks = nullptr) const {
    Trace t;
    forward(ids, masks, &t);
    std::vector<std::vector<T>> out;
    const std::size_t H = hidden();
    for (std::size_t s = 1; s <= ids.size(); ++s)
      out.emplace_back(t.h.begin() + s * H, t.h.begin() + (s + 1) * H);
    return out;
  }

  std::vector<T> forward(std::span<const TokenId> ids, const Masks* masks = nullptr,
                         Trace* trace = nullptr) const {
    detail::check_ids<T>(ids, vocab_size());
    const std::size_t n = ids.size();
    const std::size_t d = dim();
    const std::size_t H = hidden();
    Trace local;
    Trace& tr = trace ? *trace : local;
    tr.ids.assign(ids.begin(), ids.end());
    if (masks) {
      tr.mask_x = masks->input.scale;
      tr.mask_h = masks->hidden.scale;
      if (tr.mask_x.size() != d || tr.mask_h.size() != H)
        throw std::invalid_argument("dropout mask shape mismatch");
    } else {
      tr.mask_x.clear();
      tr.mask_h.clear();
    }
    tr.h.assign((n + 1) * H, T{0});
    tr.r.assign(n * H, T{0});
    tr.z.assign(n * H, T{0});
    tr.q.assign(n * H, T{0});
    tr.pre_cand.assign(n * H, T{0});
    tr.cand.assign(n * H, T{0});
    tr.gate.assign(n * d, T{0});

    const auto& emb = params_[kEmbedding];
    std::vector<T> xm(d), hm(H), a(H), tmp(d);
    std::vector<double> out(d, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      auto x = emb.row(std::size_t(ids[t]));
      std::span<const T> h_prev(tr.h.data() + t * H, H);
      std::span<T> h_cur(tr.h.data() + (t + 1) * H, H);
      for (std::size_t k = 0; k < d; ++k) xm[k] = masks ? x[k] * tr.mask_x[k] : x[k];
      for (std::size_t k = 0; k < H; ++k) hm[k] = masks ? h_prev[k] * tr.mask_h[k] : h_prev[k];

      std::span<T> r(tr.r.data() + t * H, H);
      std::span<T> z(tr.z.data() + t * H, H);
      std::span<T> q(tr.q.data() + t * H, H);
      std::span<T> pre(tr.pre_cand.data() + t * H, H);
      std::span<T> cand(tr.cand.data() + t * H, H);

      std::fill(a.begin(), a.end(), T{0});
      if (opts_.gate_biases) std::copy_n(params_[kBr].data(), H, a.begin());
      gemv_acc<T>(params_[kWr], xm, a);
      gemv_acc<T>(params_[kUr], hm, a);
      for (std::size_t k = 0; k < H; ++k) r[k] = sigmoid(a[k]);

      std::fill(a.begin(), a.end(), T{0});
      if (opts_.gate_biases) std::copy_n(params_[kBz].data(), H, a.begin());
      gemv_acc<T>(params_[kWz], xm, a);
      gemv_acc<T>(params_[kUz], hm, a);
      for (std::size_t k = 0; k < H; ++k) z[k] = sigmoid(a[k]);

      for (std::size_t k = 0; k < H; ++k) q[k] = r[k] * hm[k];
      std::copy_n(params_[kBh].data(), H, pre.begin());
      gemv_acc<T>(params_[kWhCand], xm, pre);
      gemv_acc<T>(params_[kUh], q, pre);
      for (std::size_t k = 0; k < H; ++k) {
        cand[k] = leaky_relu(pre[k], opts_.leaky_slope);
        const T bound = static_cast<T>(kGranStateBound);
        h_cur[k] = std::clamp((T{1} - z[k]) * h_prev[k] + z[k] * cand[k], -bound, bound);
      }

      std::span<T> g(tr.gate.data() + t * d, d);
      std::copy_n(params_[kB].data(), d, tmp.begin());
      gemv_acc<T>(params_[kWx], x, tmp);
      gemv_acc<T>(params_[kWhGate], std::span<const T>(h_cur), tmp);
      for (std::size_t k = 0; k < d; ++k) {
        g[k] = sigmoid(tmp[k]);
        out[k] += double(x[k]) * double(g[k]);
      }
    }
    std::vector<T> result(d);
    for (std::size_t k = 0; k < d; ++k) result[k] = static_cast<T>(out[k] / double(n));
    return result;
  }

  void backward(const Trace& tr, std::span<const T> d_out, Gradients<T>& grads) const {
    if (tr.ids.empty() || tr.gate.empty())
      throw std::logic_error("GRAN backward without a forward trace");
    const std::size_t n = tr.ids.size();
    const std::size_t d = dim();
    const std::size_t H = hidden();
    const bool masked = !tr.mask_x.empty();
    const auto& emb = params_[kEmbedding];
    const T inv_n = static_cast<T>(1.0 / double(n));

    std::vector<T> da(d), dag(d), dx(d), dxm(d), xm(d);
    std::vector<T> dh(H), dh_next(H, T{0}), dz(H), dac(H), dq(H), dr(H), dhm(H), daz(H),
        dar(H), hm(H);
    for (std::size_t k = 0; k < d; ++k) da[k] = d_out[k] * inv_n;

    for (std::size_t t = n; t-- > 0;) {
      const std::size_t id = std::size_t(tr.ids[t]);
      auto x = emb.row(id);
      std::span<const T> h_prev(tr.h.data() + t * H, H);
      std::span<const T> h_cur(tr.h.data() + (t + 1) * H, H);
      std::span<const T> r(tr.r.data() + t * H, H);
      std::span<const T> z(tr.z.data() + t * H, H);
      std::span<const T> q(tr.q.data() + t * H, H);
      std::span<const T> pre(tr.pre_cand.data() + t * H, H);
      std::span<const T> cand(tr.cand.data() + t * H, H);
      std::span<const T> g(tr.gate.data() + t * d, d);
      for (std::size_t k = 0; k < d; ++k) xm[k] = masked ? x[k] * tr.mask_x[k] : x[k];
      for (std::size_t k = 0; k < H; ++k) hm[k] = masked ? h_prev[k] * tr.mask_h[k] : h_prev[k];

      // Output gate.
      for (std::size_t k = 0; k < d; ++k) {
        dx[k] = da[k] * g[k];
        dag[k] = da[k] * x[k] * sigmoid_grad_from_output(g[k]);
      }
      outer_acc<T>(dag, x, grads[kWx]);
      outer_acc<T>(dag, h_cur, grads[kWhGate]);
      for (std::size_t k = 0; k < d; ++k) grads[kB][k] += dag[k];
      gemv_t_acc<T>(params_[kWx], dag, dx);
      dh = dh_next;
      gemv_t_acc<T>(params_[kWhGate], dag, dh);
      for (std::size_t k = 0; k < H; ++k)
        if (std::abs(h_cur[k]) >= static_cast<T>(kGranStateBound)) dh[k] = T{0};

      // h_t = (1 - z) o h_prev + z o cand
      for (std::size_t k = 0; k < H; ++k) {
        dz[k] = dh[k] * (cand[k] - h_prev[k]);
        dac[k] = dh[k] * z[k] * leaky_relu_grad(pre[k], opts_.leaky_slope);
        dh_next[k] = dh[k] * (T{1} - z[k]);
      }
      outer_acc<T>(dac, xm, grads[kWhCand]);
      outer_acc<T>(dac, q, grads[kUh]);
      for (std::size_t k = 0; k < H; ++k) grads[kBh][k] += dac[k];
      std::fill(dxm.begin(), dxm.end(), T{0});
      gemv_t_acc<T>(params_[kWhCand], dac, dxm);
      std::fill(dq.begin(), dq.end(), T{0});
      gemv_t_acc<T>(params_[kUh], dac, dq);

      for (std::size_t k = 0; k < H; ++k) {
        dr[k] = dq[k] * hm[k];
        dhm[k] = dq[k] * r[k];
        daz[k] = dz[k] * sigmoid_grad_from_output(z[k]);
        dar[k] = dr[k] * sigmoid_grad_from_output(r[k]);
      }
      outer_acc<T>(daz, xm, grads[kWz]);
      outer_acc<T>(daz, hm, grads[kUz]);
      outer_acc<T>(dar, xm, grads[kWr]);
      outer_acc<T>(dar, hm, grads[kUr]);
      if (opts_.gate_biases) {
        for (std::size_t k = 0; k < H; ++k) {
          grads[kBz][k] += daz[k];
          grads[kBr][k] += dar[k];
        }
      }
      gemv_t_acc<T>(params_[kWz], daz, dxm);
      gemv_t_acc<T>(params_[kWr], dar, dxm);
      gemv_t_acc<T>(params_[kUz], daz, dhm);
      gemv_t_acc<T>(params_[kUr], dar, dhm);

      for (std::size_t k = 0; k < H; ++k) dh_next[k] += masked ? dhm[k] * tr.mask_h[k] : dhm[k];
      auto ge = grads[kEmbedding].row(id);
      for (std::size_t k = 0; k < d; ++k) ge[k] += dx[k] + (masked ? dxm[k] * tr.mask_x[k] : dxm[k]);
    }
  }

 private:
  void validate() const {
    const std::size_t expected = opts_.gate_biases ? 13 : 11;
    if (params_.size() != expected)
      throw std::invalid_argument("GRAN expects " + std::to_string(expected) + " parameters");
    for (std::size_t i = 0; i < expected; ++i)
      if (params_.name(i) != kNames[i])
        throw std::invalid_argument("GRAN parameter " + std::to_string(i) + " should be " +
                                    kNames[i] + ", got " + params_.name(i));
    const std::size_t d = params_[kEmbedding].cols();
    const std::size_t H = params_[kWr].rows();
    if (d == 0 || H == 0) throw std::invalid_argument("GRAN dimensions must be >= 1");
    auto expect = [&](Slot s, std::size_t r, std::size_t c) {
      const auto& m = params_[s];
      if (m.rows() != r || m.cols() != c)
        throw std::invalid_argument(std::string("GRAN parameter ") + kNames[s] + " has shape " +
                                    shape_string(m.rows(), m.cols()) + ", expected " +
                                    shape_string(r, c));
    };
    expect(kWr, H, d);
    expect(kWz, H, d);
    expect(kWhCand, H, d);
    expect(kUr, H, H);
    expect(kUz, H, H);
    expect(kUh, H, H);
    expect(kBh, H, 1);
    expect(kWx, d, d);
    expect(kWhGate, d, H);
    expect(kB, d, 1);
    if (opts_.gate_biases) {
      expect(kBr, H, 1);
      expect(kBz, H, 1);
    }
  }

  ParameterSet<T> params_;
  GranOptions opts_;
};

}  // namespace parasent
