#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "prime/tensor.hpp"

namespace prime {

class Rng;

// Fully connected layer, y = x W + b with x as (batch x in), W as (in x out).
struct DenseLayer {
    Tensor w;
    Tensor b;

    std::size_t in_dim() const { return w.rows(); }
    std::size_t out_dim() const { return w.cols(); }
};

DenseLayer make_dense(std::size_t in, std::size_t out, Rng& rng);

Tensor dense_forward(const DenseLayer& layer, const Tensor& x);

Tensor relu(const Tensor& x);
// Subgradient at 0 is taken as 0: gradient passes only where pre > 0.
Tensor relu_backward(const Tensor& pre, const Tensor& upstream);

// Inverted dropout: entries are 0 with probability `rate`, else 1/(1-rate),
// so evaluation needs no rescaling.
Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

// One pre-norm transformer encoder block operating on tokens of width
// token_dim.  A W-dimensional feature vector is reshaped into
// (W / token_dim) tokens, passed through LayerNorm -> multi-head
// self-attention -> residual, LayerNorm -> 2-layer MLP -> residual, and
// flattened back to W dims.  No positional encoding; depth is fixed at one
// block and the feed-forward width is 2*token_dim.
struct EncoderLayer {
    std::size_t token_dim = 0;
    std::size_t heads = 0;

    Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // attention projections
    Tensor g1, c1, g2, c2;                  // LayerNorm gains/biases
    Tensor w1, b1, w2, b2;                  // feed-forward

    std::size_t ff_dim() const { return w1.cols(); }
};

EncoderLayer make_encoder(std::size_t token_dim, std::size_t heads, Rng& rng);

// Scaled dot-product attention over one sample's token matrix (seq x dim),
// split into `heads` equal slices.  Rows of every attention matrix are
// softmax distributions over source tokens.  When `save_attn` is non-null
// the per-head (seq x seq) attention matrices are appended to it.
Tensor attention_heads(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                       std::vector<Tensor>* save_attn);

struct EncoderTrace {
    std::size_t batch = 0;
    std::size_t seq = 0;
    Tensor tokens;                 // (batch*seq) x dim, the reshaped input
    Tensor xhat1;                  // LayerNorm 1 normalized rows
    std::vector<double> inv_std1;  // per token row
    Tensor y1;                     // LN1 output (attention input)
    Tensor q, k, v;
    std::vector<Tensor> attn;      // batch*heads matrices, each seq x seq
    Tensor concat;                 // attention output before the out-projection
    Tensor y;                      // first residual sum
    Tensor xhat2;
    std::vector<double> inv_std2;
    Tensor y2;                     // LN2 output (feed-forward input)
    Tensor ff_pre;                 // pre-ReLU hidden
    Tensor ff_act;                 // post-ReLU hidden
};

// Forward over a (batch x W) input where W = seq * token_dim.  When `trace`
// is non-null every intermediate needed by encoder_backward is recorded.
Tensor encoder_forward(const EncoderLayer& enc, const Tensor& x, EncoderTrace* trace);

struct EncoderGrads {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor g1, c1, g2, c2;
    Tensor w1, b1, w2, b2;
};

// Backpropagate d(loss)/d(output) through the block.  Returns parameter
// gradients; d(loss)/d(input) is discarded because the encoder is the first
// layer of every model here.
EncoderGrads encoder_backward(const EncoderLayer& enc, const EncoderTrace& trace,
                              const Tensor& upstream);

}  // namespace prime
