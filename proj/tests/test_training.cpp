// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "supernas/training.hpp"
#include "test_util.hpp"

using namespace supernas;
using testutil::random_uniform_tensor;

namespace {

bool tensors_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

bool params_equal(const SupernetParams& a, const SupernetParams& b) {
    bool ok = true;
    size_t i = 0;
    std::vector<const Tensor*> av, bv;
    a.for_each_param([&](const Parameter& p, ParamKind) { av.push_back(&p.value); });
    b.for_each_param([&](const Parameter& p, ParamKind) { bv.push_back(&p.value); });
    if (av.size() != bv.size()) return false;
    for (; i < av.size(); ++i) ok = ok && tensors_equal(*av[i], *bv[i]);
    return ok;
}

std::vector<Tensor> grab_grads(SupernetParams& p) {
    std::vector<Tensor> out;
    p.for_each_param([&](Parameter& q, ParamKind) { out.push_back(q.grad); });
    return out;
}

SpaceConfig tiny_space_config() {
    SpaceConfig sc;
    sc.name = "tiny";
    sc.input_shape = {3, 8, 8};
    sc.num_classes = 3;
    sc.has_stem = false;
    sc.stages = {{1, 1, {4, 8}}, {1, 2, {4, 8}}};
    return sc;
}

}  // namespace

TEST_CASE("uniform sampling") {
    SUBCASE("single-option layers always yield the unique encoding") {
        SpaceConfig sc = tiny_space_config();
        sc.stages = {{1, 1, {8}}, {1, 2, {4}}};
        const SearchSpace sp = build_search_space(sc);
        Sampler s(sp, 1);
        for (int i = 0; i < 10; ++i) CHECK(s.sample().str() == "8-8-4-4");
    }
    SUBCASE("per-layer frequencies are 0.25 +- 0.01 over 1e5 draws") {
        const SearchSpace sp = toy_space();
        Sampler s(sp, 20260809);
        std::map<int, int> hist;
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) hist[s.sample().choices[2]]++;
        for (int o : {4, 8, 12, 16}) CHECK(std::fabs(double(hist[o]) / draws - 0.25) < 0.01);
    }
    SUBCASE("same seed gives the identical sequence") {
        const SearchSpace sp = toy_space();
        Sampler a(sp, 7), b(sp, 7);
        for (int i = 0; i < 100; ++i) CHECK(a.sample() == b.sample());
    }
}

TEST_CASE("distillation loss") {
    Rng rng(5);
    const Tensor student = random_uniform_tensor({3, 4}, rng, -2.0, 2.0);
    const Tensor teacher = random_uniform_tensor({3, 4}, rng, -2.0, 2.0);
    const std::vector<int> labels{0, 2, 3};
    SUBCASE("alpha 0 is exactly cross entropy") {
        Graph g;
        const double ce = g.scalar_value(g.softmax_cross_entropy(g.input(student), labels));
        CHECK(distill_loss_value(student, teacher, labels, 0.0) == ce);
    }
    SUBCASE("alpha 1 with student == teacher is zero") {
        CHECK(distill_loss_value(student, student, labels, 1.0) == 0.0);
    }
    SUBCASE("alpha 0.5 composes the two oracles") {
        Graph g;
        const double ce = g.scalar_value(g.softmax_cross_entropy(g.input(student), labels));
        const double kl = g.scalar_value(g.kl_from_teacher(g.input(student), teacher));
        CHECK(distill_loss_value(student, teacher, labels, 0.5) ==
              doctest::Approx(0.5 * ce + 0.5 * kl).epsilon(1e-15));
    }
    SUBCASE("alpha outside [0,1] is rejected") {
        CHECK_THROWS_AS(distill_loss_value(student, teacher, labels, -0.1), ValueError);
        CHECK_THROWS_AS(distill_loss_value(student, teacher, labels, 1.1), ValueError);
    }
}

TEST_CASE("cosine learning rate schedule") {
    CHECK(cosine_lr(0, 100, 0.1) == 0.1);
    CHECK(cosine_lr(100, 100, 0.1) == doctest::Approx(0.0).epsilon(1e-17));
    CHECK(cosine_lr(50, 100, 0.1) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK_THROWS_AS(cosine_lr(0, 0, 0.1), ValueError);
    double prev = cosine_lr(0, 64, 0.1);
    for (int t = 1; t <= 64; ++t) {
        const double cur = cosine_lr(t, 64, 0.1);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("sgd step rules") {
    SpaceConfig sc = tiny_space_config();
    sc.stages = {{1, 1, {2}}};
    const SearchSpace sp = build_search_space(sc);
    SUBCASE("momentum 0, decay 0 is plain descent") {
        SupernetParams p = init_supernet(sp, 1);
        SgdOptimizer opt(p, 0.0, 0.0);
        const Tensor before = p.fc_w.value;
        p.fc_w.grad.fill(2.0);
        opt.step(p, 0.1, 1.0);
        for (int64_t i = 0; i < before.numel(); ++i)
            CHECK(p.fc_w.value[i] == before[i] - 0.1 * 2.0);
    }
    SUBCASE("zero gradient decays the velocity only") {
        SupernetParams p = init_supernet(sp, 1);
        SgdOptimizer opt(p, 0.5, 0.0);
        p.fc_b.grad.fill(1.0);
        opt.step(p, 0.1, 1.0);  // v = 1
        const Tensor before = p.fc_b.value;
        p.zero_grads();
        opt.step(p, 0.1, 1.0);  // v = 0.5, w -= 0.1*0.5
        for (int64_t i = 0; i < before.numel(); ++i)
            CHECK(p.fc_b.value[i] == before[i] - 0.1 * 0.5);
    }
    SUBCASE("two steps match the hand-unrolled scalar recurrence") {
        SupernetParams p = init_supernet(sp, 3);
        const double momentum = 0.9, wd = 5e-4, lr = 0.05;
        SgdOptimizer opt(p, momentum, wd);
        const double w0 = p.fc_w.value[0];
        const double g1 = 0.3, g2 = -0.7;
        p.fc_w.grad.fill(g1);
        opt.step(p, lr, 1.0);
        p.zero_grads();
        p.fc_w.grad.fill(g2);
        opt.step(p, lr, 1.0);
        // recurrence: v1 = g1 + wd*w0; w1 = w0 - lr*v1; v2 = m*v1 + g2 + wd*w1; w2 = w1 - lr*v2
        const double v1 = g1 + wd * w0;
        const double w1 = w0 - lr * v1;
        const double v2 = momentum * v1 + (g2 + wd * w1);
        const double w2 = w1 - lr * v2;
        CHECK(p.fc_w.value[0] == w2);
    }
    SUBCASE("batchnorm and prelu parameters see no weight decay") {
        SearchSpace prelu_sp = build_search_space(sc);
        prelu_sp.activation = Activation::prelu;
        SupernetParams p = init_supernet(prelu_sp, 4);
        SgdOptimizer opt(p, 0.0, 0.5);
        const double gamma0 = p.layers[0][0].bn_gamma.value[0];
        const double slope0 = p.layers[0][0].prelu_slope.value[0];
        const double conv0 = p.layers[0][0].conv_w.value[0];
        opt.step(p, 0.1, 1.0);  // all grads zero
        CHECK(p.layers[0][0].bn_gamma.value[0] == gamma0);
        CHECK(p.layers[0][0].prelu_slope.value[0] == slope0);
        CHECK(p.layers[0][0].conv_w.value[0] == conv0 - 0.1 * 0.5 * conv0);
    }
    SUBCASE("non-finite gradient aborts with a diagnostic") {
        SupernetParams p = init_supernet(sp, 5);
        SgdOptimizer opt(p, 0.9, 0.0);
        p.fc_w.grad[0] = std::nan("");
        CHECK_THROWS_AS(opt.step(p, 0.1, 1.0), NumericError);
    }
}

TEST_CASE("warm-up behavior") {
    const SearchSpace sp = build_search_space(tiny_space_config());
    const DataBundle bundle = synth_dataset(9, 20, 3, {3, 8, 8});
    AugmentPolicy policy;
    SUBCASE("zero warm-up iterations leave parameters untouched") {
        SupernetParams p = init_supernet(sp, 10);
        const SupernetParams before = p;
        TrainConfig tc;
        tc.warmup_iterations = 0;
        tc.iterations = 0;
        SupernetTrainer trainer(p, bundle, policy, tc, 10, 1);
        trainer.run();
        CHECK(params_equal(before, p));
    }
    SUBCASE("loss strictly decreases on a fixed batch with a small lr") {
        SupernetParams p = init_supernet(sp, 10);
        TrainConfig tc;
        tc.warmup_iterations = 11;
        tc.iterations = 0;
        tc.warmup_lr = 0.02;
        tc.momentum = 0.0;
        tc.weight_decay = 0.0;
        tc.batch_size = bundle.train.size();  // one full-set batch per step
        tc.augment = false;
        std::vector<double> losses;
        SupernetTrainer trainer(p, bundle, policy, tc, 10, 1);
        trainer.run([&](const IterRecord& r) { losses.push_back(r.loss_largest); });
        REQUIRE(losses.size() == 11);
        for (size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
    }
    SUBCASE("training is deterministic given the seed") {
        TrainConfig tc;
        tc.warmup_iterations = 4;
        tc.iterations = 6;
        tc.samples_per_step = 3;
        tc.batch_size = 8;
        SupernetParams p1 = init_supernet(sp, 11);
        SupernetParams p2 = init_supernet(sp, 11);
        SupernetTrainer t1(p1, bundle, policy, tc, 77, 1);
        SupernetTrainer t2(p2, bundle, policy, tc, 77, 1);
        t1.run();
        t2.run();
        CHECK(params_equal(p1, p2));
    }
}

TEST_CASE("gradient accumulation equals the sum of isolated per-network gradients") {
    const SearchSpace sp = build_search_space(tiny_space_config());
    const DataBundle bundle = synth_dataset(21, 20, 3, {3, 8, 8});
    SupernetParams params = init_supernet(sp, 31);
    const SubnetEncoding widest = all_max_encoding(sp);

    auto batches = eval_batches(bundle.train, bundle.mean, bundle.stddev, 16);
    const Tensor& batch = batches[0].x;
    const std::vector<int>& labels = batches[0].labels;

    Sampler sampler(sp, 404);
    std::vector<SubnetEncoding> sampled;
    for (int i = 0; i < 3; ++i) sampled.push_back(sampler.sample());
    const double alpha = 0.5;

    // Teacher logits from the widest network, train-mode statistics.
    Tensor teacher;
    {
        Graph g;
        teacher = g.value(build_forward(g, params, widest, g.input(batch), BnMode::train));
    }

    // Accumulated route: one zeroing, then every network's backward.
    params.zero_grads();
    {
        Graph g;
        const auto logits = build_forward(g, params, widest, g.input(batch), BnMode::train);
        g.backward(g.softmax_cross_entropy(logits, labels));
    }
    for (const auto& enc : sampled) {
        Graph g;
        const auto logits = build_forward(g, params, enc, g.input(batch), BnMode::train);
        const auto loss = g.weighted_sum(g.softmax_cross_entropy(logits, labels),
                                         g.kl_from_teacher(logits, teacher), 1.0 - alpha, alpha);
        g.backward(loss);
    }
    const std::vector<Tensor> accumulated = grab_grads(params);

    // Isolated route: each network alone, summed afterwards.
    std::vector<Tensor> summed;
    params.zero_grads();
    {
        Graph g;
        const auto logits = build_forward(g, params, widest, g.input(batch), BnMode::train);
        g.backward(g.softmax_cross_entropy(logits, labels));
    }
    summed = grab_grads(params);
    for (const auto& enc : sampled) {
        params.zero_grads();
        Graph g;
        const auto logits = build_forward(g, params, enc, g.input(batch), BnMode::train);
        const auto loss = g.weighted_sum(g.softmax_cross_entropy(logits, labels),
                                         g.kl_from_teacher(logits, teacher), 1.0 - alpha, alpha);
        g.backward(loss);
        const auto grads = grab_grads(params);
        for (size_t i = 0; i < summed.size(); ++i)
            for (int64_t k = 0; k < summed[i].numel(); ++k) summed[i][k] += grads[i][k];
    }

    REQUIRE(accumulated.size() == summed.size());
    for (size_t i = 0; i < accumulated.size(); ++i)
        CHECK(testutil::rel_error(accumulated[i], summed[i]) < 1e-10);
}

TEST_CASE("K=0 training degenerates to the warm-up step rule") {
    const SearchSpace sp = build_search_space(tiny_space_config());
    const DataBundle bundle = synth_dataset(13, 20, 3, {3, 8, 8});
    AugmentPolicy policy;
    TrainConfig main_cfg;
    main_cfg.warmup_iterations = 0;
    main_cfg.iterations = 6;
    main_cfg.samples_per_step = 0;
    main_cfg.lr_init = 0.03;
    main_cfg.batch_size = 8;
    TrainConfig warm_cfg;
    warm_cfg.warmup_iterations = 6;
    warm_cfg.iterations = 0;
    warm_cfg.warmup_lr = 0.03;
    warm_cfg.batch_size = 8;

    SupernetParams p1 = init_supernet(sp, 47);
    SupernetParams p2 = init_supernet(sp, 47);
    SupernetTrainer t1(p1, bundle, policy, main_cfg, 600, 1);
    SupernetTrainer t2(p2, bundle, policy, warm_cfg, 600, 1);
    t1.run();
    t2.run();
    CHECK(params_equal(p1, p2));
}

TEST_CASE("teacher detachment: pure KL never reaches weights outside the student's slice") {
    const SearchSpace sp = toy_space();
    SupernetParams params = init_supernet(sp, 71);
    const DataBundle bundle = synth_dataset(3, 20, 4, {3, 12, 12});
    auto batches = eval_batches(bundle.train, bundle.mean, bundle.stddev, 8);
    const Tensor& batch = batches[0].x;

    Tensor teacher;
    {
        Graph g;
        teacher = g.value(build_forward(g, params, all_max_encoding(sp), g.input(batch), BnMode::train));
    }
    const SubnetEncoding narrow = all_min_encoding(sp);
    params.zero_grads();
    {
        Graph g;
        const auto logits = build_forward(g, params, narrow, g.input(batch), BnMode::train);
        g.backward(g.kl_from_teacher(logits, teacher));  // alpha = 1: distillation only
    }
    // Rows beyond the narrow width (4) of every group weight stay zero.
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& g0 = params.layers[l][0];
        const Tensor& grad = g0.conv_w.grad;
        bool nonzero_inside = false;
        for (int o = 0; o < grad.dim(0); ++o)
            for (int i = 0; i < grad.dim(1); ++i)
                for (int k = 0; k < 9; ++k) {
                    const double v = grad[((int64_t(o) * grad.dim(1) + i) * 9) + k];
                    if (o >= 4 || (l > 0 && i >= 4)) {
                        CHECK(v == 0.0);
                    } else if (v != 0.0) {
                        nonzero_inside = true;
                    }
                }
        CHECK(nonzero_inside);
    }
    // Classifier columns beyond the final narrow width stay zero.
    for (int r = 0; r < params.fc_w.grad.dim(0); ++r)
        for (int c = 4; c < params.fc_w.grad.dim(1); ++c) CHECK(params.fc_w.grad.at2(r, c) == 0.0);
}

TEST_CASE("trainer snapshot and restore resume the exact stream") {
    const SearchSpace sp = build_search_space(tiny_space_config());
    const DataBundle bundle = synth_dataset(29, 20, 3, {3, 8, 8});
    AugmentPolicy policy;
    TrainConfig tc;
    tc.warmup_iterations = 3;
    tc.iterations = 10;
    tc.samples_per_step = 2;
    tc.batch_size = 8;

    SupernetParams full = init_supernet(sp, 80);
    SupernetTrainer t_full(full, bundle, policy, tc, 555, 1);
    t_full.run();

    // Capture params and trainer state mid-run, as checkpoint-every does.
    SupernetParams mid(init_supernet(sp, 80));
    TrainerSnapshot mid_snap;
    bool captured = false;
    {
        SupernetParams running = init_supernet(sp, 80);
        SupernetTrainer t(running, bundle, policy, tc, 555, 1);
        t.run({}, [&](int iter) {
            if (iter == 5 && !captured) {
                mid = running;
                mid_snap = t.snapshot();
                captured = true;
            }
        });
    }
    REQUIRE(captured);

    SupernetTrainer t_resume(mid, bundle, policy, tc, 555, 1);
    t_resume.restore(mid_snap);
    t_resume.run();
    CHECK(params_equal(mid, full));
}
