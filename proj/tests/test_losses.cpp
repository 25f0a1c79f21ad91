#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "qw/error.hpp"
#include "qw/gradcheck.hpp"
#include "qw/losses.hpp"
#include "qw/ops.hpp"
#include "qw/rng.hpp"

using namespace qw;

namespace {

// Double-sum definition: sum_k (sum_{l<=k} p_l - sum_{l<=k} q_l)^2.
double brute_rps(const std::vector<double>& p, std::size_t obs) {
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double a = 0.0, b = 0.0;
    for (std::size_t l = 0; l <= k; ++l) {
      a += p[l];
      b += l == obs ? 1.0 : 0.0;
    }
    total += (a - b) * (a - b);
  }
  return total;
}

std::vector<double> random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  for (auto& v : p) v = -std::log(rng.uniform());
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  return p;
}

// Single-cell [K,1,1] losses with unit weight.
double rps_one(const std::vector<double>& p, std::size_t obs) {
  Tape t(false);
  const std::size_t lab[] = {obs};
  return rps_loss(t.constant(Tensor({p.size(), 1, 1}, p)), one_hot(lab, p.size(), 1, 1),
                  LatWeights::uniform(1))
      .item();
}

double ce_one(const std::vector<double>& p, std::size_t obs) {
  Tape t(false);
  const std::size_t lab[] = {obs};
  return ce_loss(t.constant(Tensor({p.size(), 1, 1}, p)), one_hot(lab, p.size(), 1, 1),
                 LatWeights::uniform(1))
      .item();
}

const std::vector<double> kUniform(5, 0.2);

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("charbonnier of a perfect forecast is eps") {
    Tape t(false);
    Tensor x({2, 3, 4});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = double(i);
    const auto w = latitude_weights(LatLonGrid::regular(3, 4));
    CHECK(charbonnier_loss(t.constant(x), t.constant(x), w, 1e-3).item() ==
          doctest::Approx(1e-3).epsilon(1e-12));
  }

  TEST_CASE("charbonnier approaches the absolute error as eps shrinks") {
    Tape t(false);
    const double v = charbonnier_loss(t.constant(Tensor({1, 1, 1}, 3.0)),
                                      t.constant(Tensor({1, 1, 1}, 0.0)),
                                      LatWeights::uniform(1), 1e-9)
                         .item();
    CHECK(v == doctest::Approx(3.0).epsilon(1e-12));
  }

  TEST_CASE("charbonnier with weights at 0 and 60 degrees") {
    Tape t(false);
    const auto w = latitude_weights(LatLonGrid({0.0, 60.0}, 1));
    const double v = charbonnier_loss(t.constant(Tensor({1, 2, 1}, std::vector<double>{0, 4})),
                                      t.constant(Tensor({1, 2, 1}, 0.0)), w, 1e-3)
                         .item();
    const double oracle =
        0.5 * (4.0 / 3.0 * 1e-3 + 2.0 / 3.0 * std::sqrt(16.0 + 1e-6));
    CHECK(v == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(v == doctest::Approx(1.33400).epsilon(1e-5));
  }

  TEST_CASE("cross entropy examples") {
    CHECK(ce_one({0, 0, 1, 0, 0}, 2) == 0.0);
    CHECK(std::abs(ce_one(kUniform, 3) - std::log(5.0)) <= 1e-9);
    CHECK(ce_one({1, 0, 0, 0, 0}, 4) == doctest::Approx(-std::log(1e-12)));
    CHECK(ce_one({1, 0, 0, 0, 0}, 4) == doctest::Approx(27.631).epsilon(1e-4));
  }

  TEST_CASE("cross entropy ignores mass moved among wrong bins") {
    CHECK(ce_one({0.1, 0.5, 0.2, 0.1, 0.1}, 2) ==
          doctest::Approx(ce_one({0.3, 0.1, 0.2, 0.1, 0.3}, 2)).epsilon(1e-15));
  }

  TEST_CASE("rps of uniform forecasts") {
    CHECK(rps_one(kUniform, 2) == doctest::Approx(0.40).epsilon(1e-14));
    CHECK(rps_one(kUniform, 0) == doctest::Approx(1.20).epsilon(1e-14));
    CHECK(rps_one({0, 0, 0, 1, 0}, 3) == 0.0);
  }

  TEST_CASE("rps matches the double-sum definition on 10000 random cases") {
    Rng rng(17);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const auto p = random_simplex(rng, 5);
      const std::size_t obs = rng.below(5);
      const double v = rps_one(p, obs);
      worst = std::max(worst, std::abs(v - brute_rps(p, obs)));
      CHECK(v >= 0.0);
      CHECK(v <= 4.0);
    }
    CHECK(worst <= 1e-12);
  }

  TEST_CASE("rps is ordinal: misplaced mass further away costs more") {
    for (std::size_t obs = 0; obs < 5; ++obs) {
      double prev = -1.0;
      for (std::size_t d = 0; obs + d < 5; ++d) {
        std::vector<double> p(5, 0.0);
        p[obs] = 0.6;
        p[obs + d] += 0.4;
        const double v = rps_one(p, obs);
        CHECK(v > prev);
        prev = v;
      }
    }
  }

  TEST_CASE("latitude weighting in the probabilistic losses") {
    Tape t(false);
    const auto w = latitude_weights(LatLonGrid({0.0, 60.0}, 1));
    std::vector<double> p(10, 0.2);
    const std::size_t lab[] = {0, 2};
    const double v = rps_loss(t.constant(Tensor({5, 2, 1}, p)), one_hot(lab, 5, 2, 1), w).item();
    CHECK(v == doctest::Approx(0.5 * (4.0 / 3.0 * 1.2 + 2.0 / 3.0 * 0.4)).epsilon(1e-12));
  }

  TEST_CASE("malformed one-hot is rejected") {
    Tape t(false);
    Tensor bad({5, 1, 1}, 0.0);
    bad[0] = 0.5;
    bad[1] = 0.5;
    CHECK_THROWS_AS(ce_loss(t.constant(Tensor({5, 1, 1}, 0.2)), bad, LatWeights::uniform(1)),
                    Error);
    const std::size_t out_of_range[] = {5};
    CHECK_THROWS_AS(one_hot(out_of_range, 5, 1, 1), Error);
  }

  TEST_CASE("kl closed forms") {
    auto kl = [](double mq, double sq, double mp, double sp) {
      Tape t(false);
      auto c = [&](double v) { return t.constant(Tensor({1}, v)); };
      return kl_diag_gaussians(c(mq), c(std::log(sq)), c(mp), c(std::log(sp))).item();
    };
    CHECK(kl(0.3, 1.2, 0.3, 1.2) == doctest::Approx(0.0));
    CHECK(kl(0.5, 1, 0, 1) == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(kl(0, 1, 0, 2) == doctest::Approx(std::log(2.0) + 0.125 - 0.5).epsilon(1e-14));
    CHECK(kl(0, 1, 0, 2) == doctest::Approx(0.31815).epsilon(1e-5));
  }

  TEST_CASE("kl agrees with a Monte-Carlo estimate") {
    Rng rng(21);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = 0.5 + rng.normal();
      // log q(x) - log p(x) for q = N(0.5, 1), p = N(0, 1)
      const double v = 0.5 * (x * x - (x - 0.5) * (x - 0.5));
      s += v;
      s2 += v * v;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 0.125) <= 3.0 * se);
  }

  TEST_CASE("total objective arithmetic") {
    const LossWeights w;
    CHECK(total_objective(0, 0, 0, 0, w) == 0.0);
    CHECK(total_objective(1, 1, 1, 1, w) == doctest::Approx(1.6005).epsilon(1e-15));
    LossWeights bad;
    bad.lambda_ce = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = LossWeights{};
    bad.charbonnier_eps = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("zero kl weight leaves no kl gradient") {
    Parameter mq("mq", Tensor({3}, 0.4)), lq("lq", Tensor({3}, 0.1));
    Parameter mp("mp", Tensor({3}, -0.2)), lp("lp", Tensor({3}, 0.3));
    LossWeights w;
    w.lambda_kl = 0.0;
    Tape t;
    Var z = t.constant(Tensor::scalar(0.0));
    Var kl = kl_diag_gaussians(t.param(mq), t.param(lq), t.param(mp), t.param(lp));
    t.backward(total_objective(z, z, z, kl, w));
    for (const Parameter* p : {&mq, &lq, &mp, &lp})
      for (double g : p->grad.storage()) CHECK(g == 0.0);
  }

  TEST_CASE("losses pass the gradient check through softmax") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      Parameter logits("logits", Tensor({5, 2, 3}));
      Parameter pred("pred", Tensor({2, 2, 3}));
      Parameter mq("mq", Tensor({2, 2, 3})), lq("lq", Tensor({2, 2, 3}));
      Parameter mp("mp", Tensor({2, 2, 3})), lp("lp", Tensor({2, 2, 3}));
      for (Parameter* p : {&logits, &pred, &mq, &lq, &mp, &lp})
        for (auto& v : p->value.storage()) v = rng.normal();
      Tensor target({2, 2, 3});
      for (auto& v : target.storage()) v = rng.normal();
      std::vector<std::size_t> lab(6);
      for (auto& l : lab) l = rng.below(5);
      const Tensor oh = one_hot(lab, 5, 2, 3);
      const auto w = latitude_weights(LatLonGrid::regular(2, 3));
      std::vector<Parameter*> ps{&logits, &pred, &mq, &lq, &mp, &lp};
      const auto r = grad_check(
          [&](Tape& t) {
            Var probs = softmax(t.param(logits), 0);
            Var reg = charbonnier_loss(t.param(pred), t.constant(target), w, 0.5);
            Var kl = kl_diag_gaussians(t.param(mq), t.param(lq), t.param(mp), t.param(lp));
            return total_objective(reg, rps_loss(probs, oh, w), ce_loss(probs, oh, w), kl,
                                   LossWeights{0.5, 0.1, 0.3, 0.5});
          },
          ps);
      INFO("seed ", seed, " worst ", r.worst_param);
      CHECK(r.max_rel_error <= 1e-4);
    }
  }
}
