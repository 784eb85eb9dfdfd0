/*
 * Copyright 2026 The sardec Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sardec/toy_lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace sardec {

namespace {

constexpr double kNormEps = 1e-6;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

using Shape = std::vector<std::size_t>;

void expect_shape(const Tensor& t, const Shape& shape, const std::string& name) {
  if (t.shape != shape || t.data.size() != Tensor::element_count(shape)) {
    throw ShapeError("array '" + name + "' has wrong shape");
  }
}

void expect_finite(const Tensor& t, const std::string& name) {
  for (double v : t.data) {
    if (!std::isfinite(v)) throw NumericError("array '" + name + "' is not finite");
  }
}

// y[j] += sum_i x[i] * W[i][j], i ascending.
void matvec_acc(const double* x, const Tensor& w, double* y) {
  const std::size_t in = w.shape[0];
  const std::size_t out = w.shape[1];
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* wr = w.data.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xi * wr[j];
  }
}

// x[i] += sum_j W[i][j] * dy[j]
void matvec_t_acc(const double* dy, const Tensor& w, double* dx) {
  const std::size_t in = w.shape[0];
  const std::size_t out = w.shape[1];
  for (std::size_t i = 0; i < in; ++i) {
    const double* wr = w.data.data() + i * out;
    double s = 0.0;
    for (std::size_t j = 0; j < out; ++j) s += wr[j] * dy[j];
    dx[i] += s;
  }
}

// dW[i][j] += x[i] * dy[j]
void outer_acc(const double* x, const double* dy, Tensor& dw) {
  const std::size_t in = dw.shape[0];
  const std::size_t out = dw.shape[1];
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    double* wr = dw.data.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) wr[j] += xi * dy[j];
  }
}

double rms_norm(const double* x, const double* gain, double* y, std::size_t d) {
  double ss = 0.0;
  for (std::size_t i = 0; i < d; ++i) ss += x[i] * x[i];
  const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + kNormEps);
  for (std::size_t i = 0; i < d; ++i) y[i] = x[i] * inv * gain[i];
  return inv;
}

// Accumulates dx for y = x * inv * gain; dgain may be null.
void rms_norm_backward(const double* x, const double* gain, double inv,
                       const double* dy, double* dx, double* dgain,
                       std::size_t d) {
  double dot = 0.0;
  for (std::size_t i = 0; i < d; ++i) dot += dy[i] * gain[i] * x[i];
  const double coef = inv * inv * inv * dot / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) {
    dx[i] += inv * dy[i] * gain[i] - x[i] * coef;
    if (dgain) dgain[i] += dy[i] * x[i] * inv;
  }
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> d;
  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), d(r * c, 0.0) {}
  double* row(std::size_t r) { return d.data() + r * cols; }
  const double* row(std::size_t r) const { return d.data() + r * cols; }
};

// Extended sequence: shallow prompt slots first, then the plan's slots.
struct Layout {
  std::size_t n_prompt = 0;
  std::size_t n = 0;
  std::size_t n_prefix = 0;  // deep prefix entries per visible row
  std::vector<std::vector<std::uint32_t>> keys;
  std::vector<std::uint8_t> sees_prefix;
  std::vector<std::uint8_t> soft_dep;
};

Layout make_layout(const FlatPlan& plan, const ModelWeights& w,
                   const SoftParams& soft) {
  const std::size_t np = plan.size();
  if (np == 0) throw ShapeError("plan has no slots");
  if (plan.attention.size() != np * np || plan.prompt_visible.size() != np) {
    throw ShapeError("plan attention/prompt_visible size mismatch");
  }
  const auto& cfg = w.config;
  Layout lay;
  const bool shallow = soft.mode == PromptingMode::shallow && soft.prompt_len > 0;
  const bool deep = soft.mode == PromptingMode::deep && soft.prompt_len > 0;
  lay.n_prompt = shallow ? static_cast<std::size_t>(soft.prompt_len) : 0;
  lay.n_prefix = deep ? static_cast<std::size_t>(soft.prompt_len) : 0;
  lay.n = lay.n_prompt + np;
  lay.keys.resize(lay.n);
  lay.sees_prefix.assign(lay.n, 0);
  lay.soft_dep.assign(lay.n, 0);

  for (std::size_t i = 0; i < lay.n_prompt; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      lay.keys[i].push_back(static_cast<std::uint32_t>(j));
    }
    lay.soft_dep[i] = 1;
  }
  for (std::size_t s = 0; s < np; ++s) {
    const Slot& slot = plan.slots[s];
    if (slot.position >= static_cast<std::size_t>(cfg.max_positions)) {
      throw ShapeError("slot " + std::to_string(s) + " position exceeds max_positions");
    }
    if (slot.role == SlotRole::mask) {
      if (slot.token < 0 || slot.token >= soft.n_masks) {
        throw ShapeError("mask slot " + std::to_string(s) + " references missing mask embedding");
      }
    } else if (slot.token < 0 || slot.token >= cfg.vocab_size) {
      throw ShapeError("slot " + std::to_string(s) + " token out of vocabulary");
    }
    if (!plan.attends(s, s)) {
      throw ShapeError("slot " + std::to_string(s) + " does not attend to itself");
    }
    const std::size_t e = lay.n_prompt + s;
    auto& keys = lay.keys[e];
    const bool visible = plan.prompt_visible[s] != 0;
    if (visible) {
      for (std::size_t j = 0; j < lay.n_prompt; ++j) {
        keys.push_back(static_cast<std::uint32_t>(j));
      }
      lay.sees_prefix[e] = deep ? 1 : 0;
    }
    bool dep = slot.role == SlotRole::mask || (visible && (shallow || deep));
    const std::uint8_t* row = plan.attention.data() + s * np;
    for (std::size_t j = 0; j < np; ++j) {
      if (row[j]) {
        keys.push_back(static_cast<std::uint32_t>(lay.n_prompt + j));
        if (j < s && lay.soft_dep[lay.n_prompt + j]) dep = true;
      }
    }
    lay.soft_dep[e] = dep ? 1 : 0;
  }
  // Keys after the query in slot order are allowed (tree rows may point at
  // any earlier-built slot); resolve dependence to a fixed point.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t e = lay.n_prompt; e < lay.n; ++e) {
      if (lay.soft_dep[e]) continue;
      for (auto j : lay.keys[e]) {
        if (lay.soft_dep[j]) {
          lay.soft_dep[e] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  return lay;
}

struct LayerTape {
  Mat x_in, h1, q, k, v, attn, x_mid, h2, u, g;
  std::vector<double> inv1, inv2;
  std::vector<std::size_t> prob_offset;
  std::vector<double> probs;  // per slot: n_heads blocks of (n_prefix + keys)
};

struct Tape {
  Layout lay;
  std::vector<LayerTape> layers;
  Mat x_final, hf, logits;
  std::vector<double> invf;
};

std::size_t prefix_offset(const SoftParams& soft, std::size_t layer, int kv,
                          std::size_t t, std::size_t dim) {
  const std::size_t p = static_cast<std::size_t>(soft.prompt_len);
  return ((layer * 2 + kv) * p + t) * dim;
}

const double* prefix_row(const SoftParams& soft, std::size_t layer, int kv,
                         std::size_t t, std::size_t dim) {
  return soft.prefix.data.data() + prefix_offset(soft, layer, kv, t, dim);
}

double* prefix_row(SoftParams& soft, std::size_t layer, int kv, std::size_t t,
                   std::size_t dim) {
  return soft.prefix.data.data() + prefix_offset(soft, layer, kv, t, dim);
}

void run_forward(const FlatPlan& plan, const ModelWeights& w,
                 const SoftParams& soft, Tape& tape) {
  const auto& cfg = w.config;
  const std::size_t D = cfg.dim;
  const std::size_t H = cfg.hidden;
  const std::size_t V = cfg.vocab_size;
  const std::size_t nh = cfg.n_heads;
  const std::size_t dh = D / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Layout& lay = tape.lay;
  const std::size_t n = lay.n;

  Mat x(n, D);
  for (std::size_t e = 0; e < n; ++e) {
    double* xr = x.row(e);
    if (e < lay.n_prompt) {
      std::copy_n(soft.prompt.row(e), D, xr);
      continue;
    }
    const Slot& slot = plan.slots[e - lay.n_prompt];
    const double* src = slot.role == SlotRole::mask
                            ? soft.masks.row(static_cast<std::size_t>(slot.token))
                            : w.tok_emb.row(static_cast<std::size_t>(slot.token));
    positional_encoding(slot.position, std::span<double>(xr, D));
    for (std::size_t i = 0; i < D; ++i) xr[i] = src[i] + xr[i];
  }

  tape.layers.resize(cfg.n_layers);
  std::vector<double> scores;
  for (std::size_t l = 0; l < static_cast<std::size_t>(cfg.n_layers); ++l) {
    const LayerWeights& L = w.layers[l];
    LayerTape& t = tape.layers[l];
    t.x_in = x;
    t.h1 = Mat(n, D);
    t.q = Mat(n, D);
    t.k = Mat(n, D);
    t.v = Mat(n, D);
    t.attn = Mat(n, D);
    t.inv1.assign(n, 0.0);
    for (std::size_t e = 0; e < n; ++e) {
      t.inv1[e] = rms_norm(x.row(e), L.attn_norm.data.data(), t.h1.row(e), D);
      matvec_acc(t.h1.row(e), L.wq, t.q.row(e));
      matvec_acc(t.h1.row(e), L.wk, t.k.row(e));
      matvec_acc(t.h1.row(e), L.wv, t.v.row(e));
    }
    t.prob_offset.assign(n + 1, 0);
    for (std::size_t e = 0; e < n; ++e) {
      const std::size_t cnt = (lay.sees_prefix[e] ? lay.n_prefix : 0) + lay.keys[e].size();
      t.prob_offset[e + 1] = t.prob_offset[e] + cnt * nh;
    }
    t.probs.assign(t.prob_offset[n], 0.0);
    for (std::size_t e = 0; e < n; ++e) {
      const std::size_t npre = lay.sees_prefix[e] ? lay.n_prefix : 0;
      const auto& keys = lay.keys[e];
      const std::size_t cnt = npre + keys.size();
      scores.resize(cnt);
      for (std::size_t h = 0; h < nh; ++h) {
        const double* qh = t.q.row(e) + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cnt; ++c) {
          const double* kh = c < npre ? prefix_row(soft, l, 0, c, D) + h * dh
                                      : t.k.row(keys[c - npre]) + h * dh;
          double s = 0.0;
          for (std::size_t i = 0; i < dh; ++i) s += qh[i] * kh[i];
          scores[c] = s * scale;
          mx = std::max(mx, scores[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < cnt; ++c) {
          scores[c] = std::exp(scores[c] - mx);
          sum += scores[c];
        }
        double* pr = t.probs.data() + t.prob_offset[e] + h * cnt;
        double* out = t.attn.row(e) + h * dh;
        for (std::size_t c = 0; c < cnt; ++c) {
          pr[c] = scores[c] / sum;
          const double* vh = c < npre ? prefix_row(soft, l, 1, c, D) + h * dh
                                      : t.v.row(keys[c - npre]) + h * dh;
          for (std::size_t i = 0; i < dh; ++i) out[i] += pr[c] * vh[i];
        }
      }
    }
    t.x_mid = x;
    t.h2 = Mat(n, D);
    t.u = Mat(n, H);
    t.g = Mat(n, H);
    t.inv2.assign(n, 0.0);
    for (std::size_t e = 0; e < n; ++e) {
      matvec_acc(t.attn.row(e), L.wo, t.x_mid.row(e));
      t.inv2[e] = rms_norm(t.x_mid.row(e), L.mlp_norm.data.data(), t.h2.row(e), D);
      double* u = t.u.row(e);
      std::copy_n(L.b1.data.data(), H, u);
      matvec_acc(t.h2.row(e), L.w1, u);
      double* g = t.g.row(e);
      for (std::size_t i = 0; i < H; ++i) g[i] = gelu(u[i]);
      double* xr = x.row(e);
      const double* xm = t.x_mid.row(e);
      for (std::size_t i = 0; i < D; ++i) xr[i] = xm[i] + L.b2.data[i];
      matvec_acc(g, L.w2, xr);
      for (std::size_t i = 0; i < D; ++i) {
        if (!std::isfinite(xr[i])) {
          throw NumericError("non-finite activation at layer " + std::to_string(l) +
                             ", slot " + std::to_string(e));
        }
      }
    }
  }

  tape.x_final = x;
  tape.hf = Mat(n, D);
  tape.invf.assign(n, 0.0);
  tape.logits = Mat(n, V);
  for (std::size_t e = 0; e < n; ++e) {
    tape.invf[e] = rms_norm(x.row(e), w.final_norm.data.data(), tape.hf.row(e), D);
    double* lr = tape.logits.row(e);
    matvec_acc(tape.hf.row(e), w.head, lr);
    for (std::size_t j = 0; j < V; ++j) {
      if (!std::isfinite(lr[j])) {
        throw NumericError("non-finite logit at slot " + std::to_string(e));
      }
    }
  }
}

void check_inputs(const FlatPlan& plan, const ModelWeights& w,
                  const SoftParams& soft) {
  if (w.layers.size() != static_cast<std::size_t>(w.config.n_layers)) {
    throw ShapeError("weights layer count disagrees with config");
  }
  soft.validate(w.config);
  (void)plan;
}

struct BackpropResult {
  double loss = 0.0;
  SoftGrad soft;
  ModelWeights theta;
};

BackpropResult backprop(const FlatPlan& plan, const ModelWeights& w,
                        const SoftParams& soft, const SlotLabels& labels,
                        bool want_theta) {
  check_inputs(plan, w, soft);
  if (labels.size() != plan.size()) {
    throw ShapeError("labels size does not match plan slot count");
  }
  Tape tape;
  tape.lay = make_layout(plan, w, soft);
  run_forward(plan, w, soft, tape);

  const auto& cfg = w.config;
  const Layout& lay = tape.lay;
  const std::size_t n = lay.n;
  const std::size_t D = cfg.dim;
  const std::size_t H = cfg.hidden;
  const std::size_t V = cfg.vocab_size;
  const std::size_t nh = cfg.n_heads;
  const std::size_t dh = D / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  BackpropResult res;
  res.soft = SoftParams::zeros(cfg, soft.mode, soft.prompt_len, soft.n_masks);
  if (want_theta) res.theta = ModelWeights::zeros(cfg);

  std::vector<std::uint8_t> active(n, 1);
  if (!want_theta) active = lay.soft_dep;

  // Loss and d(logits) -> d(final hidden).
  Mat dx(n, D);
  std::vector<double> dlog(V), dhf(D);
  for (std::size_t s = 0; s < plan.size(); ++s) {
    if (!labels[s]) continue;
    const std::size_t e = lay.n_prompt + s;
    const double* lr = tape.logits.row(e);
    const double mx = *std::max_element(lr, lr + V);
    double sum = 0.0;
    for (std::size_t j = 0; j < V; ++j) sum += std::exp(lr[j] - mx);
    const double lse = mx + std::log(sum);
    const auto y = static_cast<std::size_t>(*labels[s]);
    res.loss += lse - lr[y];
    if (!active[e]) continue;
    for (std::size_t j = 0; j < V; ++j) dlog[j] = std::exp(lr[j] - lse);
    dlog[y] -= 1.0;
    if (want_theta) outer_acc(tape.hf.row(e), dlog.data(), res.theta.head);
    std::fill(dhf.begin(), dhf.end(), 0.0);
    matvec_t_acc(dlog.data(), w.head, dhf.data());
    rms_norm_backward(tape.x_final.row(e), w.final_norm.data.data(), tape.invf[e],
                      dhf.data(), dx.row(e),
                      want_theta ? res.theta.final_norm.data.data() : nullptr, D);
  }
  if (!std::isfinite(res.loss)) throw NumericError("non-finite loss");

  std::vector<double> dg(H), du(H), dh2(D), dcat(D);
  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    const LayerWeights& L = w.layers[li];
    const LayerTape& t = tape.layers[li];
    LayerWeights* G = want_theta ? &res.theta.layers[li] : nullptr;

    // MLP block: x_out = x_mid + W2 gelu(W1 norm(x_mid) + b1) + b2.
    Mat dxm = dx;
    for (std::size_t e = 0; e < n; ++e) {
      if (!active[e]) continue;
      const double* dxo = dx.row(e);
      if (G) {
        for (std::size_t i = 0; i < D; ++i) G->b2.data[i] += dxo[i];
        outer_acc(t.g.row(e), dxo, G->w2);
      }
      std::fill(dg.begin(), dg.end(), 0.0);
      matvec_t_acc(dxo, L.w2, dg.data());
      const double* u = t.u.row(e);
      for (std::size_t i = 0; i < H; ++i) du[i] = dg[i] * gelu_grad(u[i]);
      if (G) {
        for (std::size_t i = 0; i < H; ++i) G->b1.data[i] += du[i];
        outer_acc(t.h2.row(e), du.data(), G->w1);
      }
      std::fill(dh2.begin(), dh2.end(), 0.0);
      matvec_t_acc(du.data(), L.w1, dh2.data());
      rms_norm_backward(t.x_mid.row(e), L.mlp_norm.data.data(), t.inv2[e], dh2.data(),
                        dxm.row(e), G ? G->mlp_norm.data.data() : nullptr, D);
    }

    // Attention block: x_mid = x_in + Wo attn(norm(x_in)).
    Mat dq(n, D), dk(n, D), dv(n, D);
    for (std::size_t e = 0; e < n; ++e) {
      if (!active[e]) continue;
      const double* dxr = dxm.row(e);
      if (G) outer_acc(t.attn.row(e), dxr, G->wo);
      std::fill(dcat.begin(), dcat.end(), 0.0);
      matvec_t_acc(dxr, L.wo, dcat.data());
      const std::size_t npre = lay.sees_prefix[e] ? lay.n_prefix : 0;
      const auto& keys = lay.keys[e];
      const std::size_t cnt = npre + keys.size();
      std::vector<double> dp(cnt);
      for (std::size_t h = 0; h < nh; ++h) {
        const double* pr = t.probs.data() + t.prob_offset[e] + h * cnt;
        const double* dout = dcat.data() + h * dh;
        double dot = 0.0;
        for (std::size_t c = 0; c < cnt; ++c) {
          const double* vh = c < npre ? prefix_row(soft, li, 1, c, D) + h * dh
                                      : t.v.row(keys[c - npre]) + h * dh;
          double s = 0.0;
          for (std::size_t i = 0; i < dh; ++i) s += dout[i] * vh[i];
          dp[c] = s;
          dot += pr[c] * s;
        }
        const double* qh = t.q.row(e) + h * dh;
        double* dqh = dq.row(e) + h * dh;
        for (std::size_t c = 0; c < cnt; ++c) {
          const double ds = pr[c] * (dp[c] - dot) * scale;
          double* dkh = nullptr;
          double* dvh = nullptr;
          const double* kh = nullptr;
          if (c < npre) {
            kh = prefix_row(soft, li, 0, c, D) + h * dh;
            dkh = prefix_row(res.soft, li, 0, c, D) + h * dh;
            dvh = prefix_row(res.soft, li, 1, c, D) + h * dh;
          } else {
            const std::size_t j = keys[c - npre];
            kh = t.k.row(j) + h * dh;
            if (active[j]) {
              dkh = dk.row(j) + h * dh;
              dvh = dv.row(j) + h * dh;
            }
          }
          for (std::size_t i = 0; i < dh; ++i) dqh[i] += ds * kh[i];
          if (dkh) {
            for (std::size_t i = 0; i < dh; ++i) {
              dkh[i] += ds * qh[i];
              dvh[i] += pr[c] * dout[i];
            }
          }
        }
      }
    }
    Mat dxi = dxm;
    std::vector<double> dh1(D);
    for (std::size_t e = 0; e < n; ++e) {
      if (!active[e]) continue;
      if (G) {
        outer_acc(t.h1.row(e), dq.row(e), G->wq);
        outer_acc(t.h1.row(e), dk.row(e), G->wk);
        outer_acc(t.h1.row(e), dv.row(e), G->wv);
      }
      std::fill(dh1.begin(), dh1.end(), 0.0);
      matvec_t_acc(dq.row(e), L.wq, dh1.data());
      matvec_t_acc(dk.row(e), L.wk, dh1.data());
      matvec_t_acc(dv.row(e), L.wv, dh1.data());
      rms_norm_backward(t.x_in.row(e), L.attn_norm.data.data(), t.inv1[e], dh1.data(),
                        dxi.row(e), G ? G->attn_norm.data.data() : nullptr, D);
    }
    dx = std::move(dxi);
  }

  // Input embeddings.
  for (std::size_t e = 0; e < n; ++e) {
    if (!active[e]) continue;
    const double* dr = dx.row(e);
    double* dst = nullptr;
    if (e < lay.n_prompt) {
      dst = res.soft.prompt.row(e);
    } else {
      const Slot& slot = plan.slots[e - lay.n_prompt];
      if (slot.role == SlotRole::mask) {
        dst = res.soft.masks.row(static_cast<std::size_t>(slot.token));
      } else if (want_theta) {
        dst = res.theta.tok_emb.row(static_cast<std::size_t>(slot.token));
      }
    }
    if (dst) {
      for (std::size_t i = 0; i < D; ++i) dst[i] += dr[i];
    }
  }
  return res;
}

}  // namespace

void validate_config(const ModelConfig& c) {
  if (c.vocab_size <= 0 || c.dim <= 0 || c.n_layers <= 0 || c.n_heads <= 0 ||
      c.hidden <= 0 || c.max_positions <= 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (c.dim % c.n_heads != 0) throw ConfigError("dim must be divisible by n_heads");
}

ModelWeights ModelWeights::zeros(const ModelConfig& c) {
  validate_config(c);
  const std::size_t V = c.vocab_size, D = c.dim, H = c.hidden;
  ModelWeights w;
  w.config = c;
  w.tok_emb = Tensor({V, D});
  w.layers.resize(c.n_layers);
  for (auto& L : w.layers) {
    L.attn_norm = Tensor({D});
    L.wq = Tensor({D, D});
    L.wk = Tensor({D, D});
    L.wv = Tensor({D, D});
    L.wo = Tensor({D, D});
    L.mlp_norm = Tensor({D});
    L.w1 = Tensor({D, H});
    L.b1 = Tensor({H});
    L.w2 = Tensor({H, D});
    L.b2 = Tensor({D});
  }
  w.final_norm = Tensor({D});
  w.head = Tensor({D, V});
  return w;
}

void ModelWeights::validate() const {
  validate_config(config);
  if (layers.size() != static_cast<std::size_t>(config.n_layers)) {
    throw ShapeError("layer count disagrees with n_layers");
  }
  const ModelWeights ref = zeros(config);
  std::vector<std::pair<std::string, Shape>> shapes;
  ref.for_each_array([&](const std::string& name, const Tensor& t) {
    shapes.emplace_back(name, t.shape);
  });
  std::size_t i = 0;
  for_each_array([&](const std::string& name, const Tensor& t) {
    expect_shape(t, shapes[i++].second, name);
    expect_finite(t, name);
  });
}

ModelWeights init_weights(const ModelConfig& c, std::uint64_t seed, double scale) {
  ModelWeights w = ModelWeights::zeros(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Tensor& t, double stddev) {
    for (double& v : t.data) v = normal(rng) * stddev;
  };
  const double D = c.dim, H = c.hidden;
  const double resid = 1.0 / std::sqrt(2.0 * c.n_layers);
  fill(w.tok_emb, scale);
  for (auto& L : w.layers) {
    std::fill(L.attn_norm.data.begin(), L.attn_norm.data.end(), 1.0);
    std::fill(L.mlp_norm.data.begin(), L.mlp_norm.data.end(), 1.0);
    fill(L.wq, scale / std::sqrt(D));
    fill(L.wk, scale / std::sqrt(D));
    fill(L.wv, scale / std::sqrt(D));
    fill(L.wo, scale * resid / std::sqrt(D));
    fill(L.w1, scale / std::sqrt(D));
    fill(L.w2, scale * resid / std::sqrt(H));
  }
  std::fill(w.final_norm.data.begin(), w.final_norm.data.end(), 1.0);
  fill(w.head, scale / std::sqrt(D));
  return w;
}

const char* to_string(PromptingMode mode) {
  switch (mode) {
    case PromptingMode::mask_only: return "mask_only";
    case PromptingMode::shallow: return "shallow";
    case PromptingMode::deep: return "deep";
  }
  return "?";
}

PromptingMode prompting_mode_from_string(std::string_view name) {
  if (name == "mask_only") return PromptingMode::mask_only;
  if (name == "shallow") return PromptingMode::shallow;
  if (name == "deep") return PromptingMode::deep;
  throw ConfigError("unknown prompting mode '" + std::string(name) + "'");
}

SoftParams SoftParams::zeros(const ModelConfig& c, PromptingMode mode,
                             int prompt_len, int n_masks) {
  if (prompt_len < 0) throw ConfigError("prompt_len must be non-negative");
  if (n_masks < 1) throw ConfigError("n_masks must be positive");
  if (mode == PromptingMode::mask_only && prompt_len != 0) {
    throw ConfigError("mask_only prompting requires prompt_len == 0");
  }
  const std::size_t p = prompt_len, D = c.dim, L = c.n_layers;
  SoftParams s;
  s.mode = mode;
  s.prompt_len = prompt_len;
  s.n_masks = n_masks;
  s.prefix = Tensor({L, 2, mode == PromptingMode::deep ? p : 0, D});
  s.prompt = Tensor({mode == PromptingMode::shallow ? p : 0, D});
  s.masks = Tensor({static_cast<std::size_t>(n_masks), D});
  return s;
}

void SoftParams::validate(const ModelConfig& c) const {
  if (mode == PromptingMode::mask_only && prompt_len != 0) {
    throw ShapeError("mask_only soft params carry a prompt");
  }
  if (prompt_len < 0 || n_masks < 1) throw ShapeError("invalid soft param sizes");
  const std::size_t p = prompt_len, D = c.dim, L = c.n_layers;
  expect_shape(prefix, {L, 2, mode == PromptingMode::deep ? p : 0, D}, "prefix");
  expect_shape(prompt, {mode == PromptingMode::shallow ? p : 0, D}, "prompt");
  expect_shape(masks, {static_cast<std::size_t>(n_masks), D}, "masks");
  expect_finite(prefix, "prefix");
  expect_finite(prompt, "prompt");
  expect_finite(masks, "masks");
}

void positional_encoding(std::size_t position, std::span<double> out) {
  const std::size_t d = out.size();
  const double pos = static_cast<double>(position);
  for (std::size_t i = 0; i < d; i += 2) {
    const double freq =
        std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
    out[i] = std::sin(pos * freq);
    if (i + 1 < d) out[i + 1] = std::cos(pos * freq);
  }
}

Logits forward(const FlatPlan& plan, const ModelWeights& weights,
               const SoftParams& soft) {
  check_inputs(plan, weights, soft);
  Tape tape;
  tape.lay = make_layout(plan, weights, soft);
  run_forward(plan, weights, soft, tape);
  const std::size_t V = weights.config.vocab_size;
  Logits out({plan.size(), V});
  std::copy(tape.logits.d.begin() + tape.lay.n_prompt * V, tape.logits.d.end(),
            out.data.begin());
  return out;
}

SoftLoss grad_soft(const FlatPlan& plan, const ModelWeights& weights,
                   const SoftParams& soft, const SlotLabels& labels) {
  if (labels.size() != plan.size()) {
    throw ShapeError("labels size does not match plan slot count");
  }
  bool any = false;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (!labels[s]) continue;
    any = true;
    if (plan.slots[s].role != SlotRole::mask) {
      throw ConfigError("label on non-mask slot " + std::to_string(s));
    }
    if (*labels[s] < 0 || *labels[s] >= weights.config.vocab_size) {
      throw ConfigError("label out of vocabulary range");
    }
  }
  if (!any) throw ConfigError("no labeled slots");
  auto r = backprop(plan, weights, soft, labels, /*want_theta=*/false);
  return {r.loss, std::move(r.soft)};
}

LmLoss lm_loss_and_grad(const FlatPlan& plan, const ModelWeights& weights,
                        const SlotLabels& labels) {
  if (labels.size() != plan.size()) {
    throw ShapeError("labels size does not match plan slot count");
  }
  for (const auto& y : labels) {
    if (y && (*y < 0 || *y >= weights.config.vocab_size)) {
      throw ConfigError("label out of vocabulary range");
    }
  }
  const SoftParams none =
      SoftParams::zeros(weights.config, PromptingMode::mask_only, 0, 1);
  auto r = backprop(plan, weights, none, labels, /*want_theta=*/true);
  return {r.loss, std::move(r.theta)};
}

TokenId greedy_pick(std::span<const double> row) {
  if (row.empty()) throw ShapeError("greedy_pick on empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

}  // namespace sardec
