#include "prime/layers.hpp"

#include <cmath>

#include "prime/errors.hpp"
#include "prime/rng.hpp"

namespace prime {

namespace {

constexpr double kLnEps = 1e-5;

// Softmax over one row, numerically stabilized.
void softmax_row(double* row, std::size_t n) {
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
}

// y = LayerNorm(x) * g + c, row-wise.  Records normalized rows and 1/std.
Tensor layer_norm(const Tensor& x, const Tensor& g, const Tensor& c, Tensor& xhat,
                  std::vector<double>& inv_std) {
    const std::size_t rows = x.rows(), dim = x.cols();
    xhat = Tensor(rows, dim);
    inv_std.assign(rows, 0.0);
    Tensor y(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t j = 0; j < dim; ++j) mean += x(r, j);
        mean /= static_cast<double>(dim);
        double var = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = x(r, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(dim);
        const double is = 1.0 / std::sqrt(var + kLnEps);
        inv_std[r] = is;
        for (std::size_t j = 0; j < dim; ++j) {
            const double xh = (x(r, j) - mean) * is;
            xhat(r, j) = xh;
            y(r, j) = g[j] * xh + c[j];
        }
    }
    return y;
}

// Backward through LayerNorm.  dg/dc are accumulated; when dx is non-null the
// input gradient is added into it.
void layer_norm_backward(const Tensor& dy, const Tensor& xhat, const std::vector<double>& inv_std,
                         const Tensor& g, Tensor& dg, Tensor& dc, Tensor* dx) {
    const std::size_t rows = dy.rows(), dim = dy.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double dxh = dy(r, j) * g[j];
            m1 += dxh;
            m2 += dxh * xhat(r, j);
            dg[j] += dy(r, j) * xhat(r, j);
            dc[j] += dy(r, j);
        }
        m1 /= static_cast<double>(dim);
        m2 /= static_cast<double>(dim);
        if (dx) {
            for (std::size_t j = 0; j < dim; ++j) {
                const double dxh = dy(r, j) * g[j];
                (*dx)(r, j) += inv_std[r] * (dxh - m1 - xhat(r, j) * m2);
            }
        }
    }
}

Tensor sample_rows(const Tensor& m, std::size_t row0, std::size_t nrows) {
    Tensor out(nrows, m.cols());
    for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) = m(row0 + r, j);
    return out;
}

}  // namespace

DenseLayer make_dense(std::size_t in, std::size_t out, Rng& rng) {
    DenseLayer l{Tensor(in, out), Tensor(std::vector<std::size_t>{out}, 0.0)};
    glorot_init(l.w, in, out, rng);
    return l;
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
    if (x.cols() != layer.in_dim())
        throw ShapeError("dense_forward: input " + x.shape_str() + " vs weights " +
                         layer.w.shape_str());
    Tensor y = matmul(x, layer.w);
    add_row_inplace(y, layer.b);
    return y;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] < 0.0) y[i] = 0.0;
    return y;
}

Tensor relu_backward(const Tensor& pre, const Tensor& upstream) {
    if (!pre.same_shape(upstream))
        throw ShapeError("relu_backward: " + pre.shape_str() + " vs " + upstream.shape_str());
    Tensor g = upstream;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (pre[i] <= 0.0) g[i] = 0.0;
    return g;
}

Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError({"dropout rate must lie in [0,1)"});
    Tensor m(rows, cols, 0.0);
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (rng.uniform() < keep) m[i] = scale;
    return m;
}

EncoderLayer make_encoder(std::size_t token_dim, std::size_t heads, Rng& rng) {
    if (token_dim == 0 || heads == 0 || token_dim % heads != 0)
        throw ConfigError({"encoder heads must divide token dim"});
    EncoderLayer e;
    e.token_dim = token_dim;
    e.heads = heads;
    const std::size_t d = token_dim, f = 2 * token_dim;
    auto mat = [&rng](std::size_t r, std::size_t c) {
        Tensor t(r, c);
        glorot_init(t, r, c, rng);
        return t;
    };
    e.wq = mat(d, d);
    e.wk = mat(d, d);
    e.wv = mat(d, d);
    e.wo = mat(d, d);
    e.bq = Tensor(std::vector<std::size_t>{d}, 0.0);
    e.bk = Tensor(std::vector<std::size_t>{d}, 0.0);
    e.bv = Tensor(std::vector<std::size_t>{d}, 0.0);
    e.bo = Tensor(std::vector<std::size_t>{d}, 0.0);
    e.g1 = Tensor(std::vector<std::size_t>{d}, 1.0);
    e.c1 = Tensor(std::vector<std::size_t>{d}, 0.0);
    e.g2 = Tensor(std::vector<std::size_t>{d}, 1.0);
    e.c2 = Tensor(std::vector<std::size_t>{d}, 0.0);
    e.w1 = mat(d, f);
    e.b1 = Tensor(std::vector<std::size_t>{f}, 0.0);
    e.w2 = mat(f, d);
    e.b2 = Tensor(std::vector<std::size_t>{d}, 0.0);
    return e;
}

Tensor attention_heads(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                       std::vector<Tensor>* save_attn) {
    const std::size_t seq = q.rows(), dim = q.cols();
    if (heads == 0 || dim % heads != 0) throw ShapeError("attention_heads: heads must divide dim");
    if (!k.same_shape(q) || !v.same_shape(q))
        throw ShapeError("attention_heads: q/k/v shape mismatch");
    const std::size_t hd = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    Tensor out(seq, dim, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t c0 = h * hd;
        Tensor attn(seq, seq);
        for (std::size_t i = 0; i < seq; ++i) {
            for (std::size_t j = 0; j < seq; ++j) {
                double s = 0.0;
                for (std::size_t p = 0; p < hd; ++p) s += q(i, c0 + p) * k(j, c0 + p);
                attn(i, j) = s * scale;
            }
            softmax_row(attn.data() + i * seq, seq);
        }
        for (std::size_t i = 0; i < seq; ++i)
            for (std::size_t j = 0; j < seq; ++j) {
                const double a = attn(i, j);
                for (std::size_t p = 0; p < hd; ++p) out(i, c0 + p) += a * v(j, c0 + p);
            }
        if (save_attn) save_attn->push_back(std::move(attn));
    }
    return out;
}

Tensor encoder_forward(const EncoderLayer& enc, const Tensor& x, EncoderTrace* trace) {
    const std::size_t batch = x.rows(), width = x.cols(), dim = enc.token_dim;
    if (dim == 0 || width % dim != 0)
        throw ShapeError("encoder_forward: token dim " + std::to_string(dim) +
                         " does not divide input width " + std::to_string(width));
    const std::size_t seq = width / dim;

    // Reshape (batch x width) into (batch*seq) token rows; row-major layout
    // makes this a straight reinterpretation of the same buffer.
    Tensor tokens(batch * seq, dim);
    std::copy(x.data(), x.data() + x.size(), tokens.data());

    EncoderTrace local;
    EncoderTrace& tr = trace ? *trace : local;
    tr.batch = batch;
    tr.seq = seq;

    tr.y1 = layer_norm(tokens, enc.g1, enc.c1, tr.xhat1, tr.inv_std1);
    tr.q = matmul(tr.y1, enc.wq);
    add_row_inplace(tr.q, enc.bq);
    tr.k = matmul(tr.y1, enc.wk);
    add_row_inplace(tr.k, enc.bk);
    tr.v = matmul(tr.y1, enc.wv);
    add_row_inplace(tr.v, enc.bv);

    tr.attn.clear();
    tr.concat = Tensor(batch * seq, dim);
    for (std::size_t b = 0; b < batch; ++b) {
        Tensor qb = sample_rows(tr.q, b * seq, seq);
        Tensor kb = sample_rows(tr.k, b * seq, seq);
        Tensor vb = sample_rows(tr.v, b * seq, seq);
        Tensor ob = attention_heads(qb, kb, vb, enc.heads, trace ? &tr.attn : nullptr);
        for (std::size_t r = 0; r < seq; ++r)
            for (std::size_t j = 0; j < dim; ++j) tr.concat(b * seq + r, j) = ob(r, j);
    }

    Tensor y0 = matmul(tr.concat, enc.wo);
    add_row_inplace(y0, enc.bo);
    tr.y = tokens;
    add_inplace(tr.y, y0);  // first residual

    tr.y2 = layer_norm(tr.y, enc.g2, enc.c2, tr.xhat2, tr.inv_std2);
    tr.ff_pre = matmul(tr.y2, enc.w1);
    add_row_inplace(tr.ff_pre, enc.b1);
    tr.ff_act = relu(tr.ff_pre);
    Tensor f2 = matmul(tr.ff_act, enc.w2);
    add_row_inplace(f2, enc.b2);

    Tensor z = tr.y;
    add_inplace(z, f2);  // second residual

    if (trace) tr.tokens = std::move(tokens);

    // Flatten tokens back to (batch x width).
    Tensor out(batch, width);
    std::copy(z.data(), z.data() + z.size(), out.data());
    return out;
}

EncoderGrads encoder_backward(const EncoderLayer& enc, const EncoderTrace& trace,
                              const Tensor& upstream) {
    const std::size_t batch = trace.batch, seq = trace.seq, dim = enc.token_dim;
    if (batch == 0 || trace.tokens.size() == 0)
        throw Error("encoder_backward: forward trace missing");
    if (upstream.rows() != batch || upstream.cols() != seq * dim)
        throw ShapeError("encoder_backward: upstream " + upstream.shape_str());

    Tensor dz(batch * seq, dim);
    std::copy(upstream.data(), upstream.data() + upstream.size(), dz.data());

    EncoderGrads g;
    auto zeros_like = [](const Tensor& t) { return Tensor(t.shape(), 0.0); };
    g.wq = zeros_like(enc.wq);
    g.bq = zeros_like(enc.bq);
    g.wk = zeros_like(enc.wk);
    g.bk = zeros_like(enc.bk);
    g.wv = zeros_like(enc.wv);
    g.bv = zeros_like(enc.bv);
    g.wo = zeros_like(enc.wo);
    g.bo = zeros_like(enc.bo);
    g.g1 = zeros_like(enc.g1);
    g.c1 = zeros_like(enc.c1);
    g.g2 = zeros_like(enc.g2);
    g.c2 = zeros_like(enc.c2);
    g.w1 = zeros_like(enc.w1);
    g.b1 = zeros_like(enc.b1);
    g.w2 = zeros_like(enc.w2);
    g.b2 = zeros_like(enc.b2);

    // Feed-forward branch: z = y + W2 relu(W1 ln2(y) + b1) + b2.
    Tensor dy = dz;  // residual path
    g.w2 = matmul_at_b(trace.ff_act, dz);
    g.b2 = col_sum(dz);
    Tensor dff_act = matmul_a_bt(dz, enc.w2);
    Tensor dff_pre = relu_backward(trace.ff_pre, dff_act);
    g.w1 = matmul_at_b(trace.y2, dff_pre);
    g.b1 = col_sum(dff_pre);
    Tensor dy2 = matmul_a_bt(dff_pre, enc.w1);
    layer_norm_backward(dy2, trace.xhat2, trace.inv_std2, enc.g2, g.g2, g.c2, &dy);

    // Attention branch: y = tokens + concat Wo + bo.
    g.wo = matmul_at_b(trace.concat, dy);
    g.bo = col_sum(dy);
    Tensor dconcat = matmul_a_bt(dy, enc.wo);

    const std::size_t nheads = enc.heads, hd = dim / nheads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    Tensor dq(batch * seq, dim, 0.0), dk(batch * seq, dim, 0.0), dv(batch * seq, dim, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < nheads; ++h) {
            const Tensor& attn = trace.attn[b * nheads + h];
            const std::size_t r0 = b * seq, c0 = h * hd;
            // dV: attn^T . dO, and dA = dO . V^T, done per element since the
            // head slices are not contiguous.
            Tensor dattn(seq, seq, 0.0);
            for (std::size_t i = 0; i < seq; ++i)
                for (std::size_t j = 0; j < seq; ++j) {
                    double s = 0.0;
                    for (std::size_t p = 0; p < hd; ++p)
                        s += dconcat(r0 + i, c0 + p) * trace.v(r0 + j, c0 + p);
                    dattn(i, j) = s;
                    const double a = attn(i, j);
                    for (std::size_t p = 0; p < hd; ++p)
                        dv(r0 + j, c0 + p) += a * dconcat(r0 + i, c0 + p);
                }
            // Softmax backward per row, then scores -> q, k.
            for (std::size_t i = 0; i < seq; ++i) {
                double inner = 0.0;
                for (std::size_t j = 0; j < seq; ++j) inner += dattn(i, j) * attn(i, j);
                for (std::size_t j = 0; j < seq; ++j) {
                    const double ds = attn(i, j) * (dattn(i, j) - inner) * scale;
                    for (std::size_t p = 0; p < hd; ++p) {
                        dq(r0 + i, c0 + p) += ds * trace.k(r0 + j, c0 + p);
                        dk(r0 + j, c0 + p) += ds * trace.q(r0 + i, c0 + p);
                    }
                }
            }
        }
    }

    g.wq = matmul_at_b(trace.y1, dq);
    g.bq = col_sum(dq);
    g.wk = matmul_at_b(trace.y1, dk);
    g.bk = col_sum(dk);
    g.wv = matmul_at_b(trace.y1, dv);
    g.bv = col_sum(dv);

    Tensor dy1 = matmul_a_bt(dq, enc.wq);
    add_inplace(dy1, matmul_a_bt(dk, enc.wk));
    add_inplace(dy1, matmul_a_bt(dv, enc.wv));
    // Input gradient is not needed (the encoder sits at the bottom), so only
    // the LayerNorm parameter gradients are collected here.
    layer_norm_backward(dy1, trace.xhat1, trace.inv_std1, enc.g1, g.g1, g.c1, nullptr);

    return g;
}

}  // namespace prime
