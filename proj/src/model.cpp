#include "prime/model.hpp"

#include <algorithm>

#include "prime/errors.hpp"
#include "prime/rng.hpp"

namespace prime {

namespace {

// Single source of truth for parameter names, order, and partition labels.
template <typename ModelT, typename Fn>
void visit_params_impl(ModelT& m, Fn&& fn) {
    fn("encoder.wq", m.encoder.wq, Partition::backbone, -1);
    fn("encoder.bq", m.encoder.bq, Partition::backbone, -1);
    fn("encoder.wk", m.encoder.wk, Partition::backbone, -1);
    fn("encoder.bk", m.encoder.bk, Partition::backbone, -1);
    fn("encoder.wv", m.encoder.wv, Partition::backbone, -1);
    fn("encoder.bv", m.encoder.bv, Partition::backbone, -1);
    fn("encoder.wo", m.encoder.wo, Partition::backbone, -1);
    fn("encoder.bo", m.encoder.bo, Partition::backbone, -1);
    fn("encoder.g1", m.encoder.g1, Partition::backbone, -1);
    fn("encoder.c1", m.encoder.c1, Partition::backbone, -1);
    fn("encoder.g2", m.encoder.g2, Partition::backbone, -1);
    fn("encoder.c2", m.encoder.c2, Partition::backbone, -1);
    fn("encoder.w1", m.encoder.w1, Partition::backbone, -1);
    fn("encoder.b1", m.encoder.b1, Partition::backbone, -1);
    fn("encoder.w2", m.encoder.w2, Partition::backbone, -1);
    fn("encoder.b2", m.encoder.b2, Partition::backbone, -1);
    for (std::size_t i = 0; i < m.hidden.size(); ++i) {
        const std::string base = "hidden" + std::to_string(i);
        fn(base + ".w", m.hidden[i].w, Partition::shared, -1);
        fn(base + ".b", m.hidden[i].b, Partition::shared, -1);
    }
    for (std::size_t h = 0; h < m.heads.size(); ++h) {
        const std::string base = "head" + std::to_string(h);
        fn(base + ".w", m.heads[h].out.w, Partition::head, static_cast<int>(h));
        fn(base + ".b", m.heads[h].out.b, Partition::head, static_cast<int>(h));
    }
}

Tensor prefix_cols(const Tensor& m, std::size_t k) {
    if (k == m.cols()) return m;
    Tensor out(m.rows(), k);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) out(i, j) = m(i, j);
    return out;
}

bool hidden_layer_trainable(const Model& m, const TrainPlan& plan, std::size_t layer) {
    if (plan.fresh_only)
        return m.fresh_masks.count("hidden" + std::to_string(layer) + ".w") != 0 ||
               m.fresh_masks.count("hidden" + std::to_string(layer) + ".b") != 0;
    return plan.hidden;
}

void zero_where_masked_out(Tensor& grad, const Tensor& mask) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (mask[i] == 0.0) grad[i] = 0.0;
}

}  // namespace

Model build_model(std::size_t input_width, std::size_t token_dim, std::size_t attn_heads,
                  const std::vector<std::size_t>& hidden_dims, double dropout_rate,
                  std::uint64_t seed) {
    std::vector<std::string> problems;
    if (input_width == 0) problems.push_back("input width must be positive");
    if (token_dim == 0 || input_width % token_dim != 0)
        problems.push_back("token dim must divide input width");
    if (attn_heads == 0 || (token_dim != 0 && token_dim % attn_heads != 0))
        problems.push_back("attention heads must divide token dim");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        problems.push_back("dropout rate must lie in [0,1)");
    for (std::size_t d : hidden_dims)
        if (d == 0) problems.push_back("hidden widths must be positive");
    if (!problems.empty()) throw ConfigError(problems);

    Model m;
    m.input_width = input_width;
    m.dropout_rate = dropout_rate;
    {
        Rng r(derive_seed(seed, {0}));
        m.encoder = make_encoder(token_dim, attn_heads, r);
    }
    std::size_t in = input_width;
    for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
        Rng r(derive_seed(seed, {1, i}));
        m.hidden.push_back(make_dense(in, hidden_dims[i], r));
        in = hidden_dims[i];
    }
    return m;
}

std::size_t add_head(Model& m, const std::vector<int>& class_ids, std::uint64_t seed) {
    if (class_ids.empty()) throw ConfigError({"a task head needs at least one class"});
    Rng r(derive_seed(seed, {2, m.heads.size()}));
    Head h;
    h.input_width = m.feature_width();
    h.out = make_dense(h.input_width, class_ids.size(), r);
    h.class_ids = class_ids;
    m.heads.push_back(std::move(h));
    return m.heads.size() - 1;
}

std::vector<ParamRef> param_refs(Model& m) {
    std::vector<ParamRef> refs;
    visit_params_impl(m, [&refs](const std::string& name, Tensor& t, Partition p, int head) {
        refs.push_back(ParamRef{name, &t, p, head});
    });
    return refs;
}

std::size_t param_count(const Model& m) {
    std::size_t n = 0;
    visit_params_impl(m, [&n](const std::string&, const Tensor& t, Partition, int) { n += t.size(); });
    return n;
}

ForwardTrace forward(const Model& m, const Tensor& batch, bool train_mode, std::uint64_t rng_seed,
                     bool trace_encoder) {
    if (batch.rank() != 2 || batch.cols() != m.input_width)
        throw ShapeError("forward: batch " + batch.shape_str() + " vs input width " +
                         std::to_string(m.input_width));

    ForwardTrace tr;
    tr.training = train_mode;
    tr.input = batch;
    tr.encoded = encoder_forward(m.encoder, batch, trace_encoder ? &tr.enc : nullptr);
    tr.enc_traced = trace_encoder;

    const Tensor* cur = &tr.encoded;
    for (std::size_t i = 0; i < m.hidden.size(); ++i) {
        Tensor pre = dense_forward(m.hidden[i], *cur);
        Tensor post = relu(pre);
        Tensor fed;
        if (train_mode && m.dropout_rate > 0.0) {
            Rng r(derive_seed(rng_seed, {i}));
            Tensor mask = dropout_mask(post.rows(), post.cols(), m.dropout_rate, r);
            fed = hadamard(post, mask);
            tr.drop_mask.push_back(std::move(mask));
        } else {
            fed = post;
        }
        tr.pre.push_back(std::move(pre));
        tr.post.push_back(std::move(post));
        tr.dropped.push_back(std::move(fed));
        cur = &tr.dropped.back();
    }

    for (const Head& h : m.heads) {
        if (h.input_width > cur->cols())
            throw ShapeError("forward: head expects " + std::to_string(h.input_width) +
                             " features, model provides " + std::to_string(cur->cols()));
        tr.logits.push_back(dense_forward(h.out, prefix_cols(*cur, h.input_width)));
    }
    return tr;
}

Gradients backward(const Model& m, const ForwardTrace& trace, const std::vector<Tensor>& dlogits,
                   const TrainPlan& plan) {
    if (trace.input.size() == 0) throw Error("backward: no forward trace");
    if (trace.logits.size() != m.heads.size() || dlogits.size() != m.heads.size())
        throw ShapeError("backward: expected one logits gradient per head");

    Gradients g;
    visit_params_impl(const_cast<Model&>(m),
                      [&](const std::string& name, Tensor& t, Partition p, int head) {
                          bool trainable = false;
                          switch (p) {
                              case Partition::backbone: trainable = plan.encoder; break;
                              case Partition::shared: {
                                  std::size_t layer = 0;
                                  // names are "hiddenN.w" / "hiddenN.b"
                                  layer = static_cast<std::size_t>(
                                      std::stoul(name.substr(6, name.find('.') - 6)));
                                  trainable = hidden_layer_trainable(m, plan, layer);
                                  break;
                              }
                              case Partition::head:
                                  trainable = plan.head_trainable(static_cast<std::size_t>(head));
                                  break;
                          }
                          if (trainable) g.by_name.emplace(name, Tensor(t.shape(), 0.0));
                      });

    const bool need_feat = plan.encoder || plan.hidden || plan.fresh_only;
    const Tensor& feats = m.hidden.empty() ? trace.encoded : trace.dropped.back();
    Tensor dfeat;
    if (need_feat) dfeat = Tensor(feats.rows(), feats.cols(), 0.0);

    for (std::size_t h = 0; h < m.heads.size(); ++h) {
        const Tensor& dy = dlogits[h];
        if (dy.size() == 0) continue;
        if (!dy.same_shape(trace.logits[h]))
            throw ShapeError("backward: logits gradient " + dy.shape_str() + " for head " +
                             std::to_string(h));
        const Head& head = m.heads[h];
        if (plan.head_trainable(h)) {
            Tensor fslice = prefix_cols(feats, head.input_width);
            const std::string base = "head" + std::to_string(h);
            add_inplace(g.by_name.at(base + ".w"), matmul_at_b(fslice, dy));
            add_inplace(g.by_name.at(base + ".b"), col_sum(dy));
        }
        if (need_feat) {
            Tensor dx = matmul_a_bt(dy, head.out.w);  // batch x input_width
            for (std::size_t i = 0; i < dx.rows(); ++i)
                for (std::size_t j = 0; j < dx.cols(); ++j) dfeat(i, j) += dx(i, j);
        }
    }

    if (need_feat) {
        Tensor dcur = std::move(dfeat);
        bool reached_bottom = m.hidden.empty();
        for (std::size_t k = m.hidden.size(); k-- > 0;) {
            const bool want_params = hidden_layer_trainable(m, plan, k);
            bool want_below = plan.encoder;
            for (std::size_t j = 0; j < k && !want_below; ++j)
                want_below = hidden_layer_trainable(m, plan, j);
            if (!want_params && !want_below) break;

            if (trace.training && m.dropout_rate > 0.0) dcur = hadamard(dcur, trace.drop_mask[k]);
            Tensor dpre = relu_backward(trace.pre[k], dcur);
            if (want_params) {
                const Tensor& input = (k == 0) ? trace.encoded : trace.dropped[k - 1];
                const std::string base = "hidden" + std::to_string(k);
                Tensor dw = matmul_at_b(input, dpre);
                Tensor db = col_sum(dpre);
                if (plan.fresh_only) {
                    auto wm = m.fresh_masks.find(base + ".w");
                    auto bm = m.fresh_masks.find(base + ".b");
                    if (wm != m.fresh_masks.end()) zero_where_masked_out(dw, wm->second);
                    else dw.fill(0.0);
                    if (bm != m.fresh_masks.end()) zero_where_masked_out(db, bm->second);
                    else db.fill(0.0);
                }
                add_inplace(g.by_name.at(base + ".w"), dw);
                add_inplace(g.by_name.at(base + ".b"), db);
            }
            if (!want_below) { reached_bottom = false; break; }
            dcur = matmul_a_bt(dpre, m.hidden[k].w);
            if (k == 0) reached_bottom = true;
        }
        if (plan.encoder) {
            if (!trace.enc_traced) throw Error("backward: encoder gradients need an encoder trace");
            if (!reached_bottom) throw Error("backward: encoder gradient path interrupted");
            EncoderGrads eg = encoder_backward(m.encoder, trace.enc, dcur);
            g.by_name["encoder.wq"] = std::move(eg.wq);
            g.by_name["encoder.bq"] = std::move(eg.bq);
            g.by_name["encoder.wk"] = std::move(eg.wk);
            g.by_name["encoder.bk"] = std::move(eg.bk);
            g.by_name["encoder.wv"] = std::move(eg.wv);
            g.by_name["encoder.bv"] = std::move(eg.bv);
            g.by_name["encoder.wo"] = std::move(eg.wo);
            g.by_name["encoder.bo"] = std::move(eg.bo);
            g.by_name["encoder.g1"] = std::move(eg.g1);
            g.by_name["encoder.c1"] = std::move(eg.c1);
            g.by_name["encoder.g2"] = std::move(eg.g2);
            g.by_name["encoder.c2"] = std::move(eg.c2);
            g.by_name["encoder.w1"] = std::move(eg.w1);
            g.by_name["encoder.b1"] = std::move(eg.b1);
            g.by_name["encoder.w2"] = std::move(eg.w2);
            g.by_name["encoder.b2"] = std::move(eg.b2);
        }
    }

    if (plan.l2 > 0.0) {
        visit_params_impl(const_cast<Model&>(m),
                          [&](const std::string& name, Tensor& t, Partition, int) {
                              auto it = g.by_name.find(name);
                              if (it == g.by_name.end()) return;
                              const Tensor* mask = nullptr;
                              if (plan.fresh_only) {
                                  auto mit = m.fresh_masks.find(name);
                                  if (mit != m.fresh_masks.end()) mask = &mit->second;
                              }
                              for (std::size_t i = 0; i < t.size(); ++i) {
                                  if (mask && (*mask)[i] == 0.0) continue;
                                  it->second[i] += 2.0 * plan.l2 * t[i];
                              }
                          });
    }

    return g;
}

double l2_penalty(const Model& m, const TrainPlan& plan) {
    if (plan.l2 <= 0.0) return 0.0;
    double acc = 0.0;
    visit_params_impl(const_cast<Model&>(m),
                      [&](const std::string& name, Tensor& t, Partition p, int head) {
                          bool trainable = false;
                          switch (p) {
                              case Partition::backbone: trainable = plan.encoder; break;
                              case Partition::shared: {
                                  const std::size_t layer = static_cast<std::size_t>(
                                      std::stoul(name.substr(6, name.find('.') - 6)));
                                  trainable = hidden_layer_trainable(m, plan, layer);
                                  break;
                              }
                              case Partition::head:
                                  trainable = plan.head_trainable(static_cast<std::size_t>(head));
                                  break;
                          }
                          if (!trainable) return;
                          const Tensor* mask = nullptr;
                          if (plan.fresh_only && p == Partition::shared) {
                              auto mit = m.fresh_masks.find(name);
                              if (mit != m.fresh_masks.end()) mask = &mit->second;
                          }
                          for (std::size_t i = 0; i < t.size(); ++i) {
                              if (mask && (*mask)[i] == 0.0) continue;
                              acc += t[i] * t[i];
                          }
                      });
    return plan.l2 * acc;
}

}  // namespace prime
