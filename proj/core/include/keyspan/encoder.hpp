#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "keyspan/mat.hpp"
#include "keyspan/rng.hpp"

namespace keyspan {

struct EncoderConfig {
  int depth = 2;
  int d = 64;
  int heads = 4;
  int ff_mult = 4;
  int vocab = 0;     // filled from the tokenizer
  int max_len = 512; // includes the summary slot at position 0

  void validate() const;  // d divisible by heads, positive sizes
};

// Pre-norm transformer block parameters. Biases are 1×d matrices so the
// whole model fits one named-tensor registry.
struct LayerParams {
  Mat ln1_g, ln1_b;
  Mat wq, bq, wk, bk, wv, bv, wo, bo;
  Mat ln2_g, ln2_b;
  Mat w1, b1, w2, b2;
};

struct EncoderParams {
  EncoderConfig cfg;
  Mat token_emb;  // vocab × d
  Mat pos_emb;    // max_len × d
  std::vector<LayerParams> layers;
  Mat lnf_g, lnf_b;

  static EncoderParams init(const EncoderConfig& cfg, Rng& rng);
  static EncoderParams zeros_like(const EncoderParams& other);

  struct Named {
    std::string name;
    Mat* mat;
  };
  struct NamedConst {
    std::string name;
    const Mat* mat;
  };
  // Stable ordering; drives the optimizer state and the checkpoint layout.
  std::vector<Named> tensors();
  std::vector<NamedConst> tensors() const;
};

// Per-row layer-norm cache (mean removed, scaled by reciprocal stddev).
struct LayerNormActs {
  Mat xhat;
  Vec rstd;
};

struct LayerActs {
  Mat x_in;
  LayerNormActs ln1;
  Mat a1;           // post-LN1 input to attention
  Mat q, k, v;
  std::vector<Mat> attn;  // per-head n×n softmax rows
  Mat ctx;          // concatenated head outputs
  Mat x_mid;        // after attention residual
  LayerNormActs ln2;
  Mat a2;           // post-LN2 input to the feed-forward
  Mat f1;           // pre-activation
  Mat u;            // gelu(f1)
  Mat x_out;
};

struct EncoderActs {
  std::vector<int> ids;
  Mat x0;
  std::vector<LayerActs> layers;
  LayerNormActs lnf;
  Mat y;  // final output, n × d
};

// Forward over one token sequence (position 0 is the summary slot).
// Deterministic; single-threaded.
Mat encoder_forward(const EncoderParams& p, const std::vector<int>& ids,
                    EncoderActs* cache = nullptr);

// Accumulates parameter gradients into `grads` (same shape as `p`) given
// the upstream gradient on the forward output.
void encoder_backward(const EncoderParams& p, const EncoderActs& acts,
                      const Mat& d_y, EncoderParams& grads);

}  // namespace keyspan
