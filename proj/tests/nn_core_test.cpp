#include <cmath>
#include <vector>

#include "doctest.h"
#include "prime/errors.hpp"
#include "prime/layers.hpp"
#include "prime/losses.hpp"
#include "prime/model.hpp"
#include "prime/optim.hpp"
#include "prime/rng.hpp"

using namespace prime;

TEST_CASE("tensor basics and shape errors") {
    Tensor a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(a(1, 2) == 6.0);
    CHECK(a.shape_str() == "(2,3)");
    CHECK_THROWS_AS(Tensor::matrix(2, 2, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(matmul(a, a), ShapeError);

    Tensor b = transpose(a);
    CHECK(b.rows() == 3);
    CHECK(b(2, 1) == 6.0);

    Tensor c = matmul(a, b);  // 2x2
    CHECK(c(0, 0) == doctest::Approx(14.0));
    CHECK(c(0, 1) == doctest::Approx(32.0));
    CHECK(c(1, 1) == doctest::Approx(77.0));

    Tensor at_b = matmul_at_b(a, a);
    Tensor ref = matmul(transpose(a), a);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(at_b[i] == doctest::Approx(ref[i]));
    Tensor a_bt = matmul_a_bt(a, a);
    Tensor ref2 = matmul(a, transpose(a));
    for (std::size_t i = 0; i < ref2.size(); ++i) CHECK(a_bt[i] == doctest::Approx(ref2[i]));

    Tensor nan_t(1, 1, 0.0);
    nan_t[0] = std::nan("");
    CHECK_FALSE(nan_t.all_finite());
    CHECK_THROWS_AS(nan_t.check_finite("test"), ShapeError);
}

TEST_CASE("rng streams are deterministic and splittable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));

    Rng c(7);
    std::vector<int> xs = {0, 1, 2, 3, 4, 5, 6, 7};
    auto ys = xs;
    c.shuffle(ys);
    auto sorted = ys;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == xs);

    Rng d(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = d.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("zero-weight dense maps any input to zero") {
    DenseLayer l{Tensor(3, 4, 0.0), Tensor(std::vector<std::size_t>{4}, 0.0)};
    Tensor x = Tensor::matrix(2, 3, {1, -2, 3, 0.5, 0, 9});
    Tensor y = dense_forward(l, x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("identity dense passes the input through") {
    DenseLayer l{Tensor(3, 3, 0.0), Tensor(std::vector<std::size_t>{3}, 0.0)};
    for (std::size_t i = 0; i < 3; ++i) l.w(i, i) = 1.0;
    Tensor x = Tensor::matrix(1, 3, {0.25, -1.5, 3.0});
    Tensor y = dense_forward(l, x);
    CHECK(y.bit_identical(x));
}

TEST_CASE("two-layer net matches hand matrix multiplication") {
    // y = relu(x W1 + b1) W2 + b2 on a 3-vector, all numbers hand-picked.
    DenseLayer l1{Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1}), Tensor::row({0.5, -0.5})};
    DenseLayer l2{Tensor::matrix(2, 2, {2, -1, 1, 3}), Tensor::row({0, 1})};
    Tensor x = Tensor::matrix(1, 3, {1, 2, -1});

    // x W1 + b1 = (1 - 1 + 0.5, 2 - 1 - 0.5) = (0.5, 0.5); relu keeps both.
    // (0.5, 0.5) W2 + b2 = (1 + 0.5, -0.5 + 1.5) + (0, 1) = (1.5, 2.0).
    Tensor h = relu(dense_forward(l1, x));
    Tensor y = dense_forward(l2, h);
    CHECK(y(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(y(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one within 1e-12") {
    Rng rng(5);
    Tensor logits(6, 9);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.normal() * 8.0;
    logits(0, 0) = 700.0;  // stabilization stress
    logits(1, 3) = -700.0;
    Tensor p = softmax_rows(logits);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
            CHECK(p(i, j) >= 0.0);
            s += p(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("cross-entropy fixtures") {
    SUBCASE("uniform logits give ln C") {
        Tensor logits(3, 5, 0.0);
        LossGrad lg = cross_entropy(logits, {0, 3, 4});
        CHECK(lg.loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    }
    SUBCASE("large margin drives loss to zero") {
        Tensor logits(1, 3, 0.0);
        logits(0, 1) = 60.0;
        LossGrad lg = cross_entropy(logits, {1});
        CHECK(lg.loss < 1e-12);
    }
    SUBCASE("label out of range is rejected") {
        Tensor logits(1, 3, 0.0);
        CHECK_THROWS_AS(cross_entropy(logits, {3}), Error);
        CHECK_THROWS_AS(cross_entropy(logits, {-1}), Error);
    }
}

TEST_CASE("distillation loss fixtures") {
    SUBCASE("identical logits sit at the minimum with zero gradient") {
        Rng rng(8);
        Tensor logits(4, 6);
        for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.normal() * 3.0;
        for (double t : {1.0, 2.0, 5.0}) {
            LossGrad lg = distillation_loss(logits, logits, t);
            double norm = 0.0;
            for (std::size_t i = 0; i < lg.dlogits.size(); ++i)
                norm += lg.dlogits[i] * lg.dlogits[i];
            CHECK(std::sqrt(norm) < 1e-10);
            // Loss equals the entropy of the tempered target.
            Tensor scaled = logits;
            scale_inplace(scaled, 1.0 / t);
            Tensor p = softmax_rows(scaled);
            double ent = 0.0;
            for (std::size_t i = 0; i < p.rows(); ++i)
                for (std::size_t j = 0; j < p.cols(); ++j) ent -= p(i, j) * std::log(p(i, j));
            CHECK(lg.loss == doctest::Approx(ent / p.rows()).epsilon(1e-10));
        }
    }
    SUBCASE("temperature one reduces to soft-target cross-entropy") {
        Tensor logits = Tensor::matrix(1, 3, {0.2, -1.0, 0.7});
        Tensor calib = Tensor::matrix(1, 3, {1.1, 0.1, -0.4});
        LossGrad lg = distillation_loss(logits, calib, 1.0);
        Tensor p = softmax_rows(calib), q = softmax_rows(logits);
        double want = 0.0;
        for (std::size_t j = 0; j < 3; ++j) want -= p[j] * std::log(q[j]);
        CHECK(lg.loss == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("two-class fixture at T=2 matches the tempered-power form") {
        // Independent route: soften p by raising to 1/T and renormalizing,
        // which is algebraically softmax(logits/T) but computed differently.
        Tensor logits = Tensor::matrix(1, 2, {0.9, -0.3});
        Tensor calib = Tensor::matrix(1, 2, {0.4, 1.6});
        const double t = 2.0;

        auto tempered = [t](double a, double b) {
            const double pa = std::exp(a) / (std::exp(a) + std::exp(b));
            const double pb = std::exp(b) / (std::exp(a) + std::exp(b));
            const double ra = std::pow(pa, 1.0 / t), rb = std::pow(pb, 1.0 / t);
            return std::pair<double, double>{ra / (ra + rb), rb / (ra + rb)};
        };
        auto [p0, p1] = tempered(calib[0], calib[1]);
        auto [q0, q1] = tempered(logits[0], logits[1]);
        const double want = -(p0 * std::log(q0) + p1 * std::log(q1));

        LossGrad lg = distillation_loss(logits, calib, t);
        CHECK(lg.loss == doctest::Approx(want).epsilon(1e-10));
    }
    SUBCASE("non-positive temperature is a config error") {
        Tensor z(1, 2, 0.0);
        CHECK_THROWS_AS(distillation_loss(z, z, 0.0), ConfigError);
    }
}

TEST_CASE("single-head attention with identity projections averages value rows") {
    Rng rng(12);
    Tensor x(4, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();

    std::vector<Tensor> attn;
    Tensor out = attention_heads(x, x, x, 1, &attn);
    REQUIRE(attn.size() == 1);
    const Tensor& a = attn[0];

    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(a(i, j) >= 0.0);
            s += a(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
        // Output row i is the attention-weighted average of the value rows.
        for (std::size_t c = 0; c < 3; ++c) {
            double want = 0.0;
            for (std::size_t j = 0; j < 4; ++j) want += a(i, j) * x(j, c);
            CHECK(out(i, c) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("encoder rejects incompatible widths") {
    CHECK_THROWS_AS(build_model(10, 4, 2, {4}, 0.0, 1), ConfigError);  // 4 does not divide 10
    CHECK_THROWS_AS(build_model(8, 4, 3, {4}, 0.0, 1), ConfigError);   // 3 does not divide 4
    Rng rng(1);
    CHECK_THROWS_AS(make_encoder(5, 2, rng), ConfigError);
}

TEST_CASE("dropout mask uses inverted scaling") {
    Rng rng(3);
    const double rate = 0.25;
    Tensor m = dropout_mask(50, 40, rate, rng);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const bool zero = m[i] == 0.0;
        const bool scaled = std::abs(m[i] - 1.0 / (1.0 - rate)) < 1e-15;
        CHECK((zero || scaled));
        kept += scaled;
    }
    // Keep rate should be near 75%.
    const double frac = static_cast<double>(kept) / m.size();
    CHECK(frac > 0.70);
    CHECK(frac < 0.80);
}

TEST_CASE("forward is deterministic and dropout is seed-driven") {
    Model m = build_model(8, 4, 2, {6}, 0.4, 21);
    add_head(m, {0, 1}, 21);
    Rng rng(2);
    Tensor x(3, 8);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();

    ForwardTrace a = forward(m, x, true, 5);
    ForwardTrace b = forward(m, x, true, 5);
    ForwardTrace c = forward(m, x, true, 6);
    CHECK(a.logits[0].bit_identical(b.logits[0]));
    CHECK_FALSE(a.logits[0].bit_identical(c.logits[0]));

    ForwardTrace e1 = forward(m, x, false, 5);
    ForwardTrace e2 = forward(m, x, false, 123);
    CHECK(e1.logits[0].bit_identical(e2.logits[0]));  // eval ignores the seed
}

TEST_CASE("adam fixtures") {
    SUBCASE("zero gradient leaves parameters unchanged and advances the step") {
        Model m = build_model(4, 2, 1, {3}, 0.0, 2);
        add_head(m, {0, 1}, 2);
        Model before = m;
        Gradients g;
        g.by_name.emplace("hidden0.w", Tensor(4, 3, 0.0));
        AdamState st = make_adam(1e-3);
        adam_step(m, g, st);
        CHECK(st.step == 1);
        CHECK(m.hidden[0].w.bit_identical(before.hidden[0].w));
        CHECK(m.heads[0].out.w.bit_identical(before.heads[0].out.w));
    }
    SUBCASE("single step from fresh state moves by about the learning rate") {
        Model m = build_model(4, 2, 1, {3}, 0.0, 2);
        Model before = m;
        Gradients g;
        g.by_name.emplace("hidden0.w", Tensor(4, 3, 0.7));
        AdamState st = make_adam(1e-3);
        adam_step(m, g, st);
        for (std::size_t i = 0; i < m.hidden[0].w.size(); ++i) {
            const double delta = m.hidden[0].w[i] - before.hidden[0].w[i];
            CHECK(delta < 0.0);  // opposite sign of the gradient
            CHECK(std::abs(std::abs(delta) - 1e-3) < 1e-6 * 1e-3 + 1e-10);
        }
    }
    SUBCASE("identical seeds give bit-identical trajectories") {
        auto run = []() {
            Model m = build_model(4, 2, 1, {3}, 0.0, 9);
            add_head(m, {0, 1, 2}, 9);
            AdamState st = make_adam(1e-3);
            Rng rng(4);
            Tensor x(5, 4);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
            std::vector<int> y = {0, 1, 2, 1, 0};
            TrainPlan plan;
            plan.hidden = true;
            plan.heads = {0};
            plan.l2 = 1e-4;
            for (int step = 0; step < 10; ++step) {
                ForwardTrace tr = forward(m, x, true, 1000 + step);
                LossGrad ce = cross_entropy(tr.logits[0], y);
                Gradients g = backward(m, tr, {ce.dlogits}, plan);
                adam_step(m, g, st);
            }
            return m;
        };
        Model m1 = run(), m2 = run();
        CHECK(m1.hidden[0].w.bit_identical(m2.hidden[0].w));
        CHECK(m1.heads[0].out.w.bit_identical(m2.heads[0].out.w));
    }
    SUBCASE("non-finite gradient aborts the step") {
        Model m = build_model(4, 2, 1, {3}, 0.0, 2);
        Gradients g;
        Tensor bad(4, 3, 0.0);
        bad[5] = std::numeric_limits<double>::infinity();
        g.by_name.emplace("hidden0.w", std::move(bad));
        AdamState st = make_adam(1e-3);
        CHECK_THROWS_AS(adam_step(m, g, st), Error);
        CHECK(st.step == 0);
    }
}

TEST_CASE("plateau scheduler fixtures") {
    SUBCASE("strictly decreasing losses never reduce the rate") {
        AdamState st = make_adam(1e-3);
        double loss = 1.0;
        for (int i = 0; i < 20; ++i) {
            CHECK_FALSE(reduce_lr_on_plateau(st, loss));
            loss -= 0.01;
        }
        CHECK(st.lr == 1e-3);
    }
    SUBCASE("six equal losses with patience five halve exactly once") {
        AdamState st = make_adam(1e-3);
        int halvings = 0;
        for (int i = 0; i < 6; ++i) halvings += reduce_lr_on_plateau(st, 0.5);
        CHECK(halvings == 1);
        CHECK(st.lr == doctest::Approx(5e-4));
    }
    SUBCASE("twelve equal losses halve exactly twice") {
        AdamState st = make_adam(1e-3);
        int halvings = 0;
        for (int i = 0; i < 12; ++i) halvings += reduce_lr_on_plateau(st, 0.5);
        CHECK(halvings == 2);
        CHECK(st.lr == doctest::Approx(2.5e-4));
    }
    SUBCASE("improvement within min_delta still counts as stall") {
        AdamState st = make_adam(1e-3);
        PlateauConfig pc;
        st.plateau = pc;
        reduce_lr_on_plateau(st, 1.0);
        int halvings = 0;
        for (int i = 1; i <= 5; ++i) halvings += reduce_lr_on_plateau(st, 1.0 - i * 1e-5);
        CHECK(halvings == 1);
    }
}

TEST_CASE("model forward honours head feature slices") {
    Model m = build_model(8, 4, 2, {6, 5}, 0.0, 31);
    add_head(m, {0, 1}, 31);
    CHECK(m.heads[0].input_width == 5);
    CHECK(param_count(m) > 0);

    Rng rng(6);
    Tensor x(2, 8);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
    ForwardTrace tr = forward(m, x, false, 0);
    REQUIRE(tr.logits.size() == 1);
    CHECK(tr.logits[0].rows() == 2);
    CHECK(tr.logits[0].cols() == 2);
    CHECK(tr.post.size() == 2);  // activation trace covers every hidden layer

    Tensor wrong(2, 7, 0.0);
    CHECK_THROWS_AS(forward(m, wrong, false, 0), ShapeError);
}
