#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "atlab/attack.hpp"
#include "atlab/errors.hpp"
#include "atlab/rng.hpp"
#include "support/linear_model.hpp"
#include "support/testutil.hpp"

using namespace atlab;
using testutil::LinearModel;
using testutil::random_tensor;

namespace {

double norm_of(const Tensor& a, const Tensor& b, Norm p) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = std::fabs(static_cast<double>(a.values()[i]) - b.values()[i]);
        if (p == Norm::linf)
            acc = std::max(acc, d);
        else
            acc += d * d;
    }
    return p == Norm::linf ? acc : std::sqrt(acc);
}

}  // namespace

TEST_CASE("steepest_ascent_dir: sign and normalization") {
    Tensor g = Tensor::from({2}, {3.0f, -4.0f});
    Tensor dinf = steepest_ascent_dir(g, Norm::linf);
    CHECK(dinf.values()[0] == 1.0f);
    CHECK(dinf.values()[1] == -1.0f);

    Tensor d2 = steepest_ascent_dir(g, Norm::l2);
    CHECK(d2.values()[0] == doctest::Approx(0.6));
    CHECK(d2.values()[1] == doctest::Approx(-0.8));

    Tensor zero(Shape{3});
    for (Norm p : {Norm::l2, Norm::linf}) {
        Tensor dir = steepest_ascent_dir(zero, p);
        for (float v : dir.values()) CHECK(v == 0.0f);
    }
}

TEST_CASE("steepest_ascent_dir: maximizes u.grad over random unit-ball candidates") {
    std::mt19937 rng = make_rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        const int d = 8;
        Tensor g = random_tensor({d}, rng);
        for (Norm p : {Norm::l2, Norm::linf}) {
            Tensor u = steepest_ascent_dir(g, p);
            double best = 0.0;
            for (int i = 0; i < d; ++i) best += static_cast<double>(u.values()[i]) * g.values()[i];
            std::uniform_real_distribution<double> ud(-1.0, 1.0);
            for (int cand = 0; cand < 10000; ++cand) {
                // random point of the unit p-ball
                std::vector<double> v(d);
                for (auto& x : v) x = ud(rng);
                if (p == Norm::l2) {
                    double n2 = 0.0;
                    for (double x : v) n2 += x * x;
                    n2 = std::sqrt(n2);
                    if (n2 > 1.0)
                        for (double& x : v) x /= n2;
                }
                double dot = 0.0;
                for (int i = 0; i < d; ++i) dot += v[static_cast<std::size_t>(i)] * g.values()[i];
                CHECK(dot <= best + 1e-6);
            }
        }
    }
}

TEST_CASE("project_ball: inside points pass through, outside points project") {
    SUBCASE("l2 radial rescale") {
        Tensor x(Shape{2});
        Tensor adv = Tensor::from({2}, {3.0f, 4.0f});
        Tensor p = project_ball(adv, x, 1.0, Norm::l2);
        CHECK(p.values()[0] == doctest::Approx(0.6));
        CHECK(p.values()[1] == doctest::Approx(0.8));

        Tensor inside = Tensor::from({2}, {0.3f, 0.1f});
        Tensor q = project_ball(inside, x, 1.0, Norm::l2);
        CHECK(q.values()[0] == 0.3f);  // bit-identical, no rescale
        CHECK(q.values()[1] == 0.1f);
    }
    SUBCASE("linf equals the coordinate-wise scalar clamp") {
        std::mt19937 rng = make_rng(55);
        Tensor x = random_tensor({64}, rng);
        Tensor adv = random_tensor({64}, rng, -2.0f, 2.0f);
        const double eps = 0.25;
        Tensor p = project_ball(adv, x, eps, Norm::linf);
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            const float lo = x.values()[i] - static_cast<float>(eps);
            const float hi = x.values()[i] + static_cast<float>(eps);
            const float expect = std::min(std::max(adv.values()[i], lo), hi);
            CHECK(p.values()[i] == expect);
        }
    }
    SUBCASE("domain clamp applies after the ball projection") {
        Tensor x = Tensor::from({2}, {0.95f, 0.05f});
        Tensor adv = Tensor::from({2}, {1.4f, -0.5f});
        ClipBounds clip;
        Tensor p = project_ball(adv, x, 0.2, Norm::linf, &clip);
        CHECK(p.values()[0] == 1.0f);   // 0.95 + 0.2 = 1.15 -> domain 1.0
        CHECK(p.values()[1] == 0.0f);
    }
}

TEST_CASE("pgd_attack: degenerate configurations") {
    std::mt19937 rng = make_rng(77);
    LinearModel m = LinearModel::random(6, 3, rng);
    Tensor x = random_tensor({2, 6}, rng, 0.2f, 0.8f);
    const std::vector<int> y = {0, 2};

    SUBCASE("epsilon = 0 returns x exactly") {
        AttackConfig cfg;
        cfg.epsilon = 0.0;
        cfg.steps = 20;
        Tensor adv = pgd_attack(m.fn(y), x, cfg, 1);
        for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(adv.values()[i] == x.values()[i]);
    }
    SUBCASE("steps = 0 without random init returns x") {
        AttackConfig cfg;
        cfg.epsilon = 0.5;
        cfg.steps = 0;
        cfg.random_init = false;
        Tensor adv = pgd_attack(m.fn(y), x, cfg, 1);
        for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(adv.values()[i] == x.values()[i]);
    }
    SUBCASE("zero gradient stalls instead of erroring") {
        AttackConfig cfg;
        cfg.epsilon = 0.1;
        cfg.steps = 3;
        cfg.random_init = false;
        auto zero_fn = [](const Tensor& q) {
            return std::make_pair(Tensor(q.shape()), std::vector<double>(static_cast<std::size_t>(q.dim(0)), 1.0));
        };
        Tensor adv = pgd_attack(zero_fn, x, cfg, 1);
        for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(adv.values()[i] == x.values()[i]);
    }
    SUBCASE("non-finite loss raises") {
        AttackConfig cfg;
        cfg.epsilon = 0.1;
        cfg.steps = 1;
        auto nan_fn = [](const Tensor& q) {
            return std::make_pair(Tensor(q.shape()),
                                  std::vector<double>(static_cast<std::size_t>(q.dim(0)),
                                                      std::numeric_limits<double>::quiet_NaN()));
        };
        CHECK_THROWS_AS(pgd_attack(nan_fn, x, cfg, 1), NumericError);
    }
    SUBCASE("config validation") {
        AttackConfig cfg;
        cfg.epsilon = -1.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = AttackConfig{};
        cfg.restarts = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = AttackConfig{};
        cfg.epsilon = 0.5;
        cfg.alpha = 0.0;
        cfg.alpha_units = AlphaUnits::absolute;
        cfg.steps = 5;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("paper-style alpha resolves to a quarter of epsilon") {
        AttackConfig cfg;
        cfg.epsilon = 2.0;
        cfg.alpha = 1.0;
        cfg.alpha_units = AlphaUnits::paper;
        CHECK(cfg.resolved_alpha() == doctest::Approx(0.5));
        cfg.alpha_units = AlphaUnits::absolute;
        CHECK(cfg.resolved_alpha() == doctest::Approx(1.0));
    }
}

TEST_CASE("pgd_attack: ball constraint holds at every iterate, both norms") {
    std::mt19937 rng = make_rng(202);
    for (int trial = 0; trial < 40; ++trial) {
        const int d = 5, n = 3;
        LinearModel m = LinearModel::random(d, 3, rng);
        Tensor x = random_tensor({n, d}, rng, 0.0f, 1.0f);
        std::vector<int> y = {trial % 3, (trial + 1) % 3, 0};

        AttackConfig cfg;
        cfg.norm = trial % 2 == 0 ? Norm::l2 : Norm::linf;
        std::uniform_real_distribution<double> ed(0.0, 1.0);
        cfg.epsilon = ed(rng);
        cfg.alpha = 0.3 * ed(rng) + 0.05;
        cfg.alpha_units = AlphaUnits::absolute;
        cfg.steps = 1 + trial % 7;
        cfg.restarts = 1 + trial % 3;

        const double limit = cfg.epsilon * (1.0 + 1e-6);
        int iterates = 0;
        Tensor adv = pgd_attack(m.fn(y), x, cfg, static_cast<std::uint64_t>(trial),
                                [&](int, int, const Tensor& it) {
                                    ++iterates;
                                    for (int i = 0; i < n; ++i) {
                                        Tensor row = Tensor::from({d}, std::vector<float>(
                                            it.data() + i * d, it.data() + (i + 1) * d));
                                        Tensor ref = Tensor::from({d}, std::vector<float>(
                                            x.data() + i * d, x.data() + (i + 1) * d));
                                        CHECK(norm_of(row, ref, cfg.norm) <= limit);
                                        for (int j = 0; j < d; ++j) {
                                            CHECK(row.values()[j] >= 0.0f);
                                            CHECK(row.values()[j] <= 1.0f);
                                        }
                                    }
                                });
        CHECK(iterates == cfg.restarts * (cfg.steps + 1));
        for (int i = 0; i < n; ++i) {
            Tensor row = Tensor::from({d}, std::vector<float>(adv.data() + i * d, adv.data() + (i + 1) * d));
            Tensor ref = Tensor::from({d}, std::vector<float>(x.data() + i * d, x.data() + (i + 1) * d));
            CHECK(norm_of(row, ref, cfg.norm) <= limit);
        }
    }
}

TEST_CASE("pgd_attack: determinism under a fixed seed") {
    std::mt19937 rng = make_rng(303);
    LinearModel m = LinearModel::random(8, 4, rng);
    Tensor x = random_tensor({4, 8}, rng, 0.0f, 1.0f);
    const std::vector<int> y = {0, 1, 2, 3};
    AttackConfig cfg;
    cfg.epsilon = 0.5;
    cfg.steps = 10;
    cfg.restarts = 2;

    Tensor a = pgd_attack(m.fn(y), x, cfg, 99);
    Tensor b = pgd_attack(m.fn(y), x, cfg, 99);
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.values()[i] == b.values()[i]);

    Tensor c = pgd_attack(m.fn(y), x, cfg, 100);
    bool any_diff = false;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        if (a.values()[i] != c.values()[i]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("pgd_attack: ascent on fixed linear models") {
    std::mt19937 rng = make_rng(404);
    SUBCASE("returned loss >= loss at the clean input") {
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 6;
            const int k = 2 + trial % 3;
            LinearModel m = LinearModel::random(d, k, rng);
            Tensor x = random_tensor({2, d}, rng, 0.1f, 0.9f);
            std::vector<int> y = {trial % k, (trial + 1) % k};

            AttackConfig cfg;
            cfg.norm = trial % 2 == 0 ? Norm::l2 : Norm::linf;
            cfg.epsilon = 0.3;
            cfg.alpha = 1.0;  // paper units: eps/4 per step
            cfg.steps = 10;
            cfg.random_init = false;

            Tensor adv = pgd_attack(m.fn(y), x, cfg, static_cast<std::uint64_t>(trial));
            for (int i = 0; i < 2; ++i) {
                const double before = m.sample_loss(x.data() + i * d, y[static_cast<std::size_t>(i)]);
                const double after = m.sample_loss(adv.data() + i * d, y[static_cast<std::size_t>(i)]);
                CHECK(after >= before - 1e-9);
            }
        }
    }
    SUBCASE("linf solution matches the closed-form sign solution") {
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 7;
            LinearModel m = LinearModel::random(d, 2, rng);
            Tensor x = random_tensor({1, d}, rng, 0.1f, 0.9f);
            const int label = trial % 2;

            AttackConfig cfg;
            cfg.norm = Norm::linf;
            cfg.epsilon = 0.2;
            cfg.alpha = 1.0;  // eps/4 per step, 8 steps saturate the box
            cfg.steps = 8;
            cfg.random_init = false;

            Tensor adv = pgd_attack(m.fn({label}), x, cfg, static_cast<std::uint64_t>(trial));
            // for 2 classes the ascent direction is fixed: sign(w_other - w_label)
            for (int j = 0; j < d; ++j) {
                const double diff = m.weight[static_cast<std::size_t>(1 - label) * d + j] -
                                    m.weight[static_cast<std::size_t>(label) * d + j];
                const float step = static_cast<float>(cfg.epsilon) * (diff > 0 ? 1.0f : (diff < 0 ? -1.0f : 0.0f));
                const float expect = std::min(1.0f, std::max(0.0f, x.values()[j] + step));
                CHECK(adv.values()[j] == doctest::Approx(expect).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("pgd_attack: restarts return the per-sample maximal final loss") {
    std::mt19937 rng = make_rng(505);
    LinearModel m = LinearModel::random(5, 3, rng);
    Tensor x = random_tensor({3, 5}, rng, 0.2f, 0.8f);
    const std::vector<int> y = {0, 1, 2};

    AttackConfig cfg;
    cfg.epsilon = 0.4;
    cfg.steps = 3;  // deliberately few, so restarts differ
    cfg.restarts = 4;

    // collect every restart's final iterate, then compare with the result
    std::vector<Tensor> finals;
    AttackConfig single = cfg;
    single.restarts = 1;
    Tensor best = pgd_attack(m.fn(y), x, cfg, 7);
    for (int r = 0; r < cfg.restarts; ++r) {
        // the core derives per-restart streams from (seed, restart index), so
        // replaying restart r alone needs the same derived seed
        std::vector<Tensor> iterates;
        pgd_attack(m.fn(y), x, cfg, 7, [&](int restart, int step, const Tensor& it) {
            if (step == cfg.steps && restart == r) iterates.push_back(it.clone());
        });
        finals.push_back(iterates.back());
    }
    for (int i = 0; i < 3; ++i) {
        double expect = -1.0;
        for (const Tensor& f : finals)
            expect = std::max(expect, m.sample_loss(f.data() + i * 5, y[static_cast<std::size_t>(i)]));
        const double got = m.sample_loss(best.data() + i * 5, y[static_cast<std::size_t>(i)]);
        CHECK(got == doctest::Approx(expect).epsilon(1e-9));
    }
}
