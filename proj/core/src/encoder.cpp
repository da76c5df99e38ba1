#include "keyspan/encoder.hpp"

#include <cmath>
#include <string>

#include "keyspan/errors.hpp"

namespace keyspan {

namespace {

constexpr double kLnEps = 1e-5;

void layernorm_forward(const Mat& x, const Mat& g, const Mat& b, Mat& out,
                       LayerNormActs& acts) {
  const int n = x.rows, d = x.cols;
  out = Mat(n, d);
  acts.xhat = Mat(n, d);
  acts.rstd.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* xi = x.row(i);
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xi[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = xi[j] - mean;
      var += c * c;
    }
    var /= d;
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    acts.rstd[i] = rstd;
    double* xh = acts.xhat.row(i);
    double* oi = out.row(i);
    for (int j = 0; j < d; ++j) {
      xh[j] = (xi[j] - mean) * rstd;
      oi[j] = g(0, j) * xh[j] + b(0, j);
    }
  }
}

// Adds dx of the layer norm to `dx_accum`; accumulates dg/db.
void layernorm_backward(const Mat& d_out, const LayerNormActs& acts,
                        const Mat& g, Mat& dg, Mat& db, Mat& dx_accum) {
  const int n = d_out.rows, d = d_out.cols;
  for (int i = 0; i < n; ++i) {
    const double* doi = d_out.row(i);
    const double* xh = acts.xhat.row(i);
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int j = 0; j < d; ++j) {
      const double dxh = doi[j] * g(0, j);
      sum_dxhat += dxh;
      sum_dxhat_xhat += dxh * xh[j];
      dg(0, j) += doi[j] * xh[j];
      db(0, j) += doi[j];
    }
    const double inv_d = 1.0 / d;
    double* dxi = dx_accum.row(i);
    for (int j = 0; j < d; ++j) {
      const double dxh = doi[j] * g(0, j);
      dxi[j] += acts.rstd[i] *
                (dxh - inv_d * sum_dxhat - xh[j] * inv_d * sum_dxhat_xhat);
    }
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
         x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

Mat randn_mat(int r, int c, double stddev, Rng& rng) {
  Mat m(r, c);
  for (double& x : m.a) x = rng.normal(0.0, stddev);
  return m;
}

}  // namespace

void EncoderConfig::validate() const {
  if (depth < 1) throw ConfigError("encoder depth must be at least 1");
  if (d < 1 || heads < 1 || ff_mult < 1 || max_len < 2 || vocab < 2) {
    throw ConfigError("encoder sizes must be positive (max_len >= 2, vocab >= 2)");
  }
  if (d % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(d) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  constexpr double kStd = 0.02;
  EncoderParams p;
  p.cfg = cfg;
  p.token_emb = randn_mat(cfg.vocab, cfg.d, kStd, rng);
  p.pos_emb = randn_mat(cfg.max_len, cfg.d, kStd, rng);
  const int ff = cfg.d * cfg.ff_mult;
  for (int l = 0; l < cfg.depth; ++l) {
    LayerParams lp;
    lp.ln1_g = Mat(1, cfg.d);
    lp.ln1_b = Mat(1, cfg.d);
    for (double& x : lp.ln1_g.a) x = 1.0;
    lp.wq = randn_mat(cfg.d, cfg.d, kStd, rng);
    lp.bq = Mat(1, cfg.d);
    lp.wk = randn_mat(cfg.d, cfg.d, kStd, rng);
    lp.bk = Mat(1, cfg.d);
    lp.wv = randn_mat(cfg.d, cfg.d, kStd, rng);
    lp.bv = Mat(1, cfg.d);
    lp.wo = randn_mat(cfg.d, cfg.d, kStd, rng);
    lp.bo = Mat(1, cfg.d);
    lp.ln2_g = Mat(1, cfg.d);
    lp.ln2_b = Mat(1, cfg.d);
    for (double& x : lp.ln2_g.a) x = 1.0;
    lp.w1 = randn_mat(cfg.d, ff, kStd, rng);
    lp.b1 = Mat(1, ff);
    lp.w2 = randn_mat(ff, cfg.d, kStd, rng);
    lp.b2 = Mat(1, cfg.d);
    p.layers.push_back(std::move(lp));
  }
  p.lnf_g = Mat(1, cfg.d);
  p.lnf_b = Mat(1, cfg.d);
  for (double& x : p.lnf_g.a) x = 1.0;
  return p;
}

EncoderParams EncoderParams::zeros_like(const EncoderParams& other) {
  EncoderParams p;
  p.cfg = other.cfg;
  p.token_emb = Mat(other.token_emb.rows, other.token_emb.cols);
  p.pos_emb = Mat(other.pos_emb.rows, other.pos_emb.cols);
  for (const auto& lp : other.layers) {
    LayerParams z;
    z.ln1_g = Mat(1, lp.ln1_g.cols);
    z.ln1_b = Mat(1, lp.ln1_b.cols);
    z.wq = Mat(lp.wq.rows, lp.wq.cols);
    z.bq = Mat(1, lp.bq.cols);
    z.wk = Mat(lp.wk.rows, lp.wk.cols);
    z.bk = Mat(1, lp.bk.cols);
    z.wv = Mat(lp.wv.rows, lp.wv.cols);
    z.bv = Mat(1, lp.bv.cols);
    z.wo = Mat(lp.wo.rows, lp.wo.cols);
    z.bo = Mat(1, lp.bo.cols);
    z.ln2_g = Mat(1, lp.ln2_g.cols);
    z.ln2_b = Mat(1, lp.ln2_b.cols);
    z.w1 = Mat(lp.w1.rows, lp.w1.cols);
    z.b1 = Mat(1, lp.b1.cols);
    z.w2 = Mat(lp.w2.rows, lp.w2.cols);
    z.b2 = Mat(1, lp.b2.cols);
    p.layers.push_back(std::move(z));
  }
  p.lnf_g = Mat(1, other.lnf_g.cols);
  p.lnf_b = Mat(1, other.lnf_b.cols);
  return p;
}

std::vector<EncoderParams::Named> EncoderParams::tensors() {
  std::vector<Named> out;
  out.push_back({"token_emb", &token_emb});
  out.push_back({"pos_emb", &pos_emb});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    auto& lp = layers[l];
    out.push_back({pre + "ln1_g", &lp.ln1_g});
    out.push_back({pre + "ln1_b", &lp.ln1_b});
    out.push_back({pre + "wq", &lp.wq});
    out.push_back({pre + "bq", &lp.bq});
    out.push_back({pre + "wk", &lp.wk});
    out.push_back({pre + "bk", &lp.bk});
    out.push_back({pre + "wv", &lp.wv});
    out.push_back({pre + "bv", &lp.bv});
    out.push_back({pre + "wo", &lp.wo});
    out.push_back({pre + "bo", &lp.bo});
    out.push_back({pre + "ln2_g", &lp.ln2_g});
    out.push_back({pre + "ln2_b", &lp.ln2_b});
    out.push_back({pre + "w1", &lp.w1});
    out.push_back({pre + "b1", &lp.b1});
    out.push_back({pre + "w2", &lp.w2});
    out.push_back({pre + "b2", &lp.b2});
  }
  out.push_back({"lnf_g", &lnf_g});
  out.push_back({"lnf_b", &lnf_b});
  return out;
}

std::vector<EncoderParams::NamedConst> EncoderParams::tensors() const {
  std::vector<NamedConst> out;
  auto mutable_list = const_cast<EncoderParams*>(this)->tensors();
  out.reserve(mutable_list.size());
  for (const auto& n : mutable_list) out.push_back({n.name, n.mat});
  return out;
}

Mat encoder_forward(const EncoderParams& p, const std::vector<int>& ids,
                    EncoderActs* cache) {
  const auto& cfg = p.cfg;
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw ValidationError("cannot encode an empty token sequence");
  if (n > cfg.max_len) {
    throw ValidationError("sequence of " + std::to_string(n) +
                          " tokens exceeds max_len " +
                          std::to_string(cfg.max_len));
  }
  for (int id : ids) {
    if (id < 0 || id >= cfg.vocab) {
      throw ValidationError("token id " + std::to_string(id) +
                            " outside vocabulary of " +
                            std::to_string(cfg.vocab));
    }
  }
  const int d = cfg.d;
  const int heads = cfg.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  EncoderActs local;
  EncoderActs& acts = cache ? *cache : local;
  acts = EncoderActs{};
  acts.ids = ids;
  acts.x0 = Mat(n, d);
  for (int i = 0; i < n; ++i) {
    const double* te = p.token_emb.row(ids[i]);
    const double* pe = p.pos_emb.row(i);
    double* xi = acts.x0.row(i);
    for (int j = 0; j < d; ++j) xi[j] = te[j] + pe[j];
  }

  Mat x = acts.x0;
  for (const auto& lp : p.layers) {
    LayerActs la;
    la.x_in = x;

    layernorm_forward(x, lp.ln1_g, lp.ln1_b, la.a1, la.ln1);
    matmul(la.a1, lp.wq, la.q);
    add_row_bias(la.q, lp.bq);
    matmul(la.a1, lp.wk, la.k);
    add_row_bias(la.k, lp.bk);
    matmul(la.a1, lp.wv, la.v);
    add_row_bias(la.v, lp.bv);

    la.ctx = Mat(n, d);
    la.attn.resize(heads);
    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      Mat& A = la.attn[h];
      A = Mat(n, n);
      for (int i = 0; i < n; ++i) {
        const double* qi = la.q.row(i) + off;
        double* Ai = A.row(i);
        double maxs = -1e300;
        for (int j = 0; j < n; ++j) {
          const double* kj = la.k.row(j) + off;
          double s = 0.0;
          for (int t = 0; t < dh; ++t) s += qi[t] * kj[t];
          Ai[j] = s * scale;
          if (Ai[j] > maxs) maxs = Ai[j];
        }
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
          Ai[j] = std::exp(Ai[j] - maxs);
          z += Ai[j];
        }
        for (int j = 0; j < n; ++j) Ai[j] /= z;
        double* ci = la.ctx.row(i) + off;
        for (int j = 0; j < n; ++j) {
          const double a = Ai[j];
          if (a == 0.0) continue;
          const double* vj = la.v.row(j) + off;
          for (int t = 0; t < dh; ++t) ci[t] += a * vj[t];
        }
      }
    }

    Mat o;
    matmul(la.ctx, lp.wo, o);
    add_row_bias(o, lp.bo);
    la.x_mid = Mat(n, d);
    for (std::size_t t = 0; t < la.x_mid.a.size(); ++t) {
      la.x_mid.a[t] = x.a[t] + o.a[t];
    }

    layernorm_forward(la.x_mid, lp.ln2_g, lp.ln2_b, la.a2, la.ln2);
    matmul(la.a2, lp.w1, la.f1);
    add_row_bias(la.f1, lp.b1);
    la.u = Mat(la.f1.rows, la.f1.cols);
    for (std::size_t t = 0; t < la.f1.a.size(); ++t) {
      la.u.a[t] = gelu(la.f1.a[t]);
    }
    Mat f2;
    matmul(la.u, lp.w2, f2);
    add_row_bias(f2, lp.b2);
    la.x_out = Mat(n, d);
    for (std::size_t t = 0; t < la.x_out.a.size(); ++t) {
      la.x_out.a[t] = la.x_mid.a[t] + f2.a[t];
    }

    x = la.x_out;
    acts.layers.push_back(std::move(la));
  }

  layernorm_forward(x, p.lnf_g, p.lnf_b, acts.y, acts.lnf);
  return acts.y;
}

void encoder_backward(const EncoderParams& p, const EncoderActs& acts,
                      const Mat& d_y, EncoderParams& grads) {
  const auto& cfg = p.cfg;
  const int n = d_y.rows;
  const int d = cfg.d;
  const int heads = cfg.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // Final layer norm over the last block output.
  Mat dx(n, d);
  layernorm_backward(d_y, acts.lnf, p.lnf_g, grads.lnf_g, grads.lnf_b, dx);

  for (int l = static_cast<int>(p.layers.size()) - 1; l >= 0; --l) {
    const LayerParams& lp = p.layers[l];
    LayerParams& gl = grads.layers[l];
    const LayerActs& la = acts.layers[l];

    // Feed-forward branch: x_out = x_mid + (gelu(a2 w1 + b1)) w2 + b2.
    Mat df2 = dx;  // gradient on the branch output equals dx (residual add)
    Mat du;
    matmul_b_t(df2, lp.w2, du);
    matmul_at_b_accum(la.u, df2, gl.w2);
    for (int i = 0; i < n; ++i) {
      const double* r = df2.row(i);
      for (int j = 0; j < d; ++j) gl.b2(0, j) += r[j];
    }
    Mat df1(du.rows, du.cols);
    for (std::size_t t = 0; t < du.a.size(); ++t) {
      df1.a[t] = du.a[t] * gelu_grad(la.f1.a[t]);
    }
    Mat da2;
    matmul_b_t(df1, lp.w1, da2);
    matmul_at_b_accum(la.a2, df1, gl.w1);
    for (int i = 0; i < n; ++i) {
      const double* r = df1.row(i);
      for (int j = 0; j < lp.b1.cols; ++j) gl.b1(0, j) += r[j];
    }
    // dx currently holds d(x_out); the residual passes it straight to
    // x_mid, plus the layer-norm path through a2.
    layernorm_backward(da2, la.ln2, lp.ln2_g, gl.ln2_g, gl.ln2_b, dx);

    // Attention branch: x_mid = x_in + (attn(a1)) wo + bo.
    Mat do_ = dx;
    Mat dctx;
    matmul_b_t(do_, lp.wo, dctx);
    matmul_at_b_accum(la.ctx, do_, gl.wo);
    for (int i = 0; i < n; ++i) {
      const double* r = do_.row(i);
      for (int j = 0; j < d; ++j) gl.bo(0, j) += r[j];
    }

    Mat dq(n, d), dk(n, d), dv(n, d);
    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      const Mat& A = la.attn[h];
      for (int i = 0; i < n; ++i) {
        const double* dctx_i = dctx.row(i) + off;
        const double* Ai = A.row(i);
        // dA and the softmax Jacobian, one row at a time.
        std::vector<double> dA(n);
        double inner = 0.0;
        for (int j = 0; j < n; ++j) {
          const double* vj = la.v.row(j) + off;
          double s = 0.0;
          for (int t = 0; t < dh; ++t) s += dctx_i[t] * vj[t];
          dA[j] = s;
          inner += Ai[j] * s;
          double* dvj = dv.row(j) + off;
          for (int t = 0; t < dh; ++t) dvj[t] += Ai[j] * dctx_i[t];
        }
        double* dqi = dq.row(i) + off;
        for (int j = 0; j < n; ++j) {
          const double ds = Ai[j] * (dA[j] - inner) * scale;
          if (ds == 0.0) continue;
          const double* kj = la.k.row(j) + off;
          double* dkj = dk.row(j) + off;
          const double* qi = la.q.row(i) + off;
          for (int t = 0; t < dh; ++t) {
            dqi[t] += ds * kj[t];
            dkj[t] += ds * qi[t];
          }
        }
      }
    }

    Mat da1(n, d);
    {
      Mat tmp;
      matmul_b_t(dq, lp.wq, tmp);
      for (std::size_t t = 0; t < da1.a.size(); ++t) da1.a[t] += tmp.a[t];
      matmul_b_t(dk, lp.wk, tmp);
      for (std::size_t t = 0; t < da1.a.size(); ++t) da1.a[t] += tmp.a[t];
      matmul_b_t(dv, lp.wv, tmp);
      for (std::size_t t = 0; t < da1.a.size(); ++t) da1.a[t] += tmp.a[t];
    }
    matmul_at_b_accum(la.a1, dq, gl.wq);
    matmul_at_b_accum(la.a1, dk, gl.wk);
    matmul_at_b_accum(la.a1, dv, gl.wv);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) {
        gl.bq(0, j) += dq(i, j);
        gl.bk(0, j) += dk(i, j);
        gl.bv(0, j) += dv(i, j);
      }
    }
    // dx holds d(x_mid); residual feeds x_in directly plus the LN1 path.
    layernorm_backward(da1, la.ln1, lp.ln1_g, gl.ln1_g, gl.ln1_b, dx);
  }

  // Embedding gradients.
  for (int i = 0; i < n; ++i) {
    const double* r = dx.row(i);
    double* te = grads.token_emb.row(acts.ids[i]);
    double* pe = grads.pos_emb.row(i);
    for (int j = 0; j < d; ++j) {
      te[j] += r[j];
      pe[j] += r[j];
    }
  }
}

}  // namespace keyspan
