#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qw/error.hpp"
#include "qw/evaluation.hpp"
#include "qw/losses.hpp"
#include "qw/ops.hpp"
#include "qw/rng.hpp"

using namespace qw;

namespace {

struct Toy {
  LatWeights w;
  SpatialMask mask;
};

Toy toy(std::size_t n_lat, std::size_t n_lon) {
  return {latitude_weights(LatLonGrid::regular(n_lat, n_lon)), SpatialMask::full(n_lat, n_lon)};
}

FieldSeries random_fields(Rng& rng, std::size_t n, std::size_t cells) {
  FieldSeries f(n, std::vector<double>(cells));
  for (auto& row : f)
    for (auto& v : row) v = rng.normal();
  return f;
}

LabelSeries random_labels(Rng& rng, std::size_t n, std::size_t cells) {
  LabelSeries l(n, std::vector<std::size_t>(cells));
  for (auto& row : l)
    for (auto& v : row) v = rng.below(5);
  return l;
}

ProbSeries one_hot_series(const LabelSeries& labels) {
  ProbSeries p;
  for (const auto& row : labels) {
    const std::size_t n = row.size();
    std::vector<double> v(5 * n, 0.0);
    for (std::size_t c = 0; c < n; ++c) v[row[c] * n + c] = 1.0;
    p.push_back(v);
  }
  return p;
}

ProbSeries uniform_series(std::size_t n, std::size_t cells) {
  return ProbSeries(n, std::vector<double>(5 * cells, 0.2));
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("anomaly arithmetic") {
    const std::vector<double> clim{1.0, 2.0}, f{3.0, 1.5};
    CHECK(anomaly(clim, clim) == std::vector<double>{0, 0});
    CHECK(anomaly(f, clim) == std::vector<double>{2.0, -0.5});
    CHECK(anomaly(std::vector<double>{8.0, 6.5}, std::vector<double>{6.0, 7.0}) ==
          std::vector<double>{2.0, -0.5});
    CHECK_THROWS_AS(anomaly(f, std::vector<double>{1.0}), Error);
  }

  TEST_CASE("armse examples") {
    const auto t = toy(3, 4);
    Rng rng(1);
    const auto obs = random_fields(rng, 5, 12);
    CHECK(armse(obs, obs, t.w, t.mask) == 0.0);
    auto shifted = obs;
    for (auto& row : shifted)
      for (auto& v : row) v -= 0.7;
    CHECK(armse(shifted, obs, t.w, t.mask) == doctest::Approx(0.7).epsilon(1e-12));

    const LatWeights eq = latitude_weights(LatLonGrid({0.0}, 1));
    const SpatialMask one = SpatialMask::full(1, 1);
    const double v = armse({{0.0}, {2.0}}, {{0.0}, {0.0}}, eq, one);
    CHECK(v == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    // mean of per-init roots would give 1 instead
    CHECK(std::abs(v - 1.0) > 0.4);
  }

  TEST_CASE("acc identities and scale invariance") {
    const auto t = toy(3, 4);
    Rng rng(2);
    const auto obs = random_fields(rng, 6, 12);
    auto neg = obs, twice = obs;
    for (auto& row : neg)
      for (auto& v : row) v = -v;
    for (auto& row : twice)
      for (auto& v : row) v *= 2.0;
    CHECK(acc(obs, obs, t.w, t.mask) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(acc(neg, obs, t.w, t.mask) == doctest::Approx(-1.0).epsilon(1e-14));
    const auto fc = random_fields(rng, 6, 12);
    auto fc3 = fc;
    for (auto& row : fc3)
      for (auto& v : row) v *= 3.5;
    CHECK(acc(fc3, obs, t.w, t.mask) == doctest::Approx(acc(fc, obs, t.w, t.mask)).epsilon(1e-13));
    CHECK(acc(twice, obs, t.w, t.mask) == doctest::Approx(1.0).epsilon(1e-14));
    FieldSeries zero(6, std::vector<double>(12, 0.0));
    CHECK_THROWS_AS(acc(zero, obs, t.w, t.mask), Error);
  }

  TEST_CASE("tcc examples") {
    const auto t = toy(3, 4);
    Rng rng(3);
    const auto obs = random_fields(rng, 8, 12);
    auto neg = obs;
    for (auto& row : neg)
      for (auto& v : row) v = -v;
    CHECK(tcc(obs, obs, t.w, t.mask).value == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(tcc(neg, obs, t.w, t.mask).value == doctest::Approx(-1.0).epsilon(1e-14));

    // cell 0 correlation 1; cell 1 correlation 0.5 (uncentred)
    const LatWeights w = latitude_weights(LatLonGrid({0.0, 60.0}, 1));
    const SpatialMask m = SpatialMask::full(2, 1);
    const FieldSeries o{{1.0, 1.0}, {2.0, 0.0}};
    const FieldSeries f{{1.0, 1.0}, {2.0, std::sqrt(3.0)}};
    const auto r = tcc(f, o, w, m);
    CHECK(r.value == doctest::Approx((4.0 / 3.0 * 1.0 + 2.0 / 3.0 * 0.5) / 2.0).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(0.8333).epsilon(1e-4));
  }

  TEST_CASE("tcc drops cells without temporal variance") {
    const LatWeights w = LatWeights::uniform(1);
    const SpatialMask m = SpatialMask::full(1, 2);
    const FieldSeries o{{1.0, 0.0}, {2.0, 0.0}};
    const auto r = tcc(o, o, w, m);
    CHECK(r.excluded == 1);
    CHECK(r.value == doctest::Approx(1.0));
  }

  TEST_CASE("rps here equals the training loss per cell") {
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
      std::vector<double> p(5);
      double s = 0.0;
      for (auto& v : p) s += (v = rng.uniform());
      for (auto& v : p) v /= s;
      const std::size_t lab[] = {std::size_t(rng.below(5))};
      Tape t(false);
      const double loss = rps_loss(t.constant(Tensor({5, 1, 1}, p)), one_hot(lab, 5, 1, 1),
                                   LatWeights::uniform(1)).item();
      CHECK(std::abs(rps_cell(p, lab[0]) - loss) <= 1e-12);
    }
    CHECK(rps_cell(std::vector<double>(5, 0.2), 2) == doctest::Approx(0.40).epsilon(1e-14));
  }

  TEST_CASE("rpss identities") {
    const auto t = toy(3, 4);
    Rng rng(5);
    const auto labels = random_labels(rng, 7, 12);
    CHECK(std::abs(rpss(uniform_series(7, 12), labels, 5, t.w, t.mask)) <= 1e-14);
    CHECK(rpss(one_hot_series(labels), labels, 5, t.w, t.mask) == 1.0);
    const LabelSeries one{{2}};
    CHECK(rpss(uniform_series(1, 1), one, 5, LatWeights::uniform(1), SpatialMask::full(1, 1)) == 0.0);
    CHECK(clim_rps_per_init(one, 5, LatWeights::uniform(1), SpatialMask::full(1, 1))[0] ==
          doctest::Approx(0.40).epsilon(1e-14));
    SpatialMask none = t.mask;
    none.keep.assign(12, 0);
    CHECK_THROWS_AS(rpss(uniform_series(7, 12), labels, 5, t.w, none), Error);
  }

  TEST_CASE("rpss never exceeds one") {
    const auto t = toy(2, 3);
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
      const auto labels = random_labels(rng, 3, 6);
      ProbSeries p(3, std::vector<double>(30));
      for (auto& row : p) {
        for (std::size_t c = 0; c < 6; ++c) {
          double s = 0.0;
          for (std::size_t k = 0; k < 5; ++k) s += (row[k * 6 + c] = rng.uniform());
          for (std::size_t k = 0; k < 5; ++k) row[k * 6 + c] /= s;
        }
      }
      CHECK(rpss(p, labels, 5, t.w, t.mask) < 1.0);
    }
  }

  TEST_CASE("bss identities") {
    const auto t = toy(3, 4);
    Rng rng(7);
    const auto labels = random_labels(rng, 9, 12);
    const auto outcome = event_outcomes(labels, 5);
    CHECK(bss(outcome, outcome, t.w, t.mask) == 1.0);
    const FieldSeries clim(9, std::vector<double>(12, 0.2));
    CHECK(std::abs(bss(clim, outcome, t.w, t.mask)) <= 1e-14);
    const auto pe = event_probabilities(one_hot_series(labels), 5);
    CHECK(pe == outcome);
  }

  TEST_CASE("climatological brier score of Bernoulli(0.2) outcomes") {
    Rng rng(8);
    FieldSeries outcome(10000, std::vector<double>(1));
    for (auto& row : outcome) row[0] = rng.uniform() < 0.2 ? 1.0 : 0.0;
    const FieldSeries clim(10000, std::vector<double>(1, 0.2));
    const auto bs = brier_per_init(clim, outcome, LatWeights::uniform(1), SpatialMask::full(1, 1));
    double mean = 0.0;
    for (double v : bs) mean += v / double(bs.size());
    CHECK(std::abs(mean - 0.16) <= 0.01);
  }

  TEST_CASE("bootstrap degenerate cases") {
    const std::vector<double> a{1, 2, 3, 4, 5};
    const auto same = bootstrap_difference(a, a, 1000, 0.975, 1);
    CHECK(same.lower == 0.0);
    CHECK(same.upper == 0.0);
    CHECK_FALSE(same.significant);
    std::vector<double> b = a;
    for (auto& v : b) v -= 0.25;
    const auto shift = bootstrap_difference(a, b, 1000, 0.975, 1);
    CHECK(shift.point == doctest::Approx(0.25));
    CHECK(shift.lower == doctest::Approx(0.25));
    CHECK(shift.upper == doctest::Approx(0.25));
    CHECK(shift.significant);
    CHECK(shift.resamples == 1000);
    CHECK_THROWS_AS(bootstrap_difference(std::vector<double>{1.0}, std::vector<double>{0.0}), Error);
  }

  TEST_CASE("bootstrap is deterministic and brackets the point estimate") {
    Rng rng(9);
    std::vector<double> a(50), b(50);
    for (std::size_t i = 0; i < 50; ++i) {
      a[i] = 1.0 + rng.normal();
      b[i] = 1.3 + rng.normal();
    }
    const auto r1 = bootstrap_skill(a, b, 500, 0.975, 3);
    const auto r2 = bootstrap_skill(a, b, 500, 0.975, 3);
    CHECK(r1.lower == r2.lower);
    CHECK(r1.upper == r2.upper);
    CHECK(r1.lower <= r1.point);
    CHECK(r1.point <= r1.upper);
  }

  TEST_CASE("bootstrap interval coverage on a known shift") {
    Rng rng(10);
    int covered = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(100), b(100, 0.0);
      for (auto& v : a) v = 1.0 + rng.normal();
      const auto r = bootstrap_difference(a, b, 1000, 0.975, std::uint64_t(trial));
      covered += r.lower <= 1.0 && 1.0 <= r.upper;
    }
    CHECK(covered >= 92);
  }

  TEST_CASE("metric report exports") {
    MetricReport rep;
    rep.rows.push_back({"rpss", 2, "global", "model", 0.12, 0.05, 0.2, 104});
    rep.comparisons.push_back({"rpss", 2, "global", "raw", BootstrapResult{0.1, 0.02, 0.18, 1000, 0.975, true}});
    std::ostringstream os;
    rep.write_csv(os);
    CHECK(os.str().rfind("metric,lead_week,region,forecast,score,ci_lower,ci_upper,n_samples\n", 0) == 0);
    CHECK(os.str().find("rpss,2,global,model,") != std::string::npos);
    const auto j = rep.to_json();
    CHECK(j.dump() == MetricReport(rep).to_json().dump());
    CHECK(rep.find("rpss", 2, "global", "model").n_samples == 104);
    CHECK_THROWS_AS(rep.find("bss", 2, "global", "model"), Error);
  }
}
