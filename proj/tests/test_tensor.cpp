#include <doctest.h>

#include <cmath>
#include <vector>

#include "qw/error.hpp"
#include "qw/gradcheck.hpp"
#include "qw/ops.hpp"
#include "qw/rng.hpp"

using namespace qw;

namespace {

Parameter random_param(const std::string& name, Shape shape, Rng& rng, double s = 1.0) {
  Tensor t(shape);
  for (auto& v : t.storage()) v = s * rng.normal();
  return Parameter(name, t);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("shape bookkeeping") {
    Tensor t({2, 3, 4}, 1.5);
    CHECK(t.size() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.at(1, 2, 3) == 1.5);
    CHECK(shape_str({2, 3}) == "[2,3]");
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), Error);
  }

  TEST_CASE("sum of squares gradient is 2x") {
    Tape tape;
    Parameter x("x", Tensor({3}, std::vector<double>{1, -2, 0.5}));
    tape.backward(sum(square(tape.param(x))));
    CHECK(x.grad[0] == 2.0);
    CHECK(x.grad[1] == -4.0);
    CHECK(x.grad[2] == 1.0);
  }

  TEST_CASE("product rule and fan-out accumulate") {
    Tape tape;
    Parameter a("a", Tensor::scalar(3.0));
    Var va = tape.param(a);
    // f = a*a + a  -> f' = 2a + 1
    tape.backward(sum(add(mul(va, va), va)));
    CHECK(a.grad[0] == 7.0);
  }

  TEST_CASE("binding a parameter twice returns the same leaf") {
    Tape tape;
    Parameter a("a", Tensor::scalar(1.0));
    CHECK(tape.param(a).id() == tape.param(a).id());
  }

  TEST_CASE("second backward on the same tape is rejected") {
    Tape tape;
    Parameter a("a", Tensor::scalar(2.0));
    Var f = sum(square(tape.param(a)));
    tape.backward(f);
    try {
      tape.backward(f);
      FAIL("expected tape_state");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::tape_state);
    }
  }

  TEST_CASE("non-finite values are caught at record time") {
    Tape tape;
    Var x = tape.constant(Tensor({2}, std::vector<double>{1.0, -1.0}));
    CHECK_THROWS_AS(log(x), Error);
  }

  TEST_CASE("elementwise shape mismatch is rejected") {
    Tape tape;
    Var a = tape.constant(Tensor({2}));
    Var b = tape.constant(Tensor({3}));
    CHECK_THROWS_AS(add(a, b), Error);
  }

  TEST_CASE("softmax sums to one and matches exp over sum") {
    Rng rng(2);
    Tape tape;
    Tensor x({5, 3, 4});
    for (auto& v : x.storage()) v = 4.0 * rng.normal();
    const Tensor s = softmax(tape.constant(x), 0).value();
    for (std::size_t cell = 0; cell < 12; ++cell) {
      double z = 0.0, total = 0.0;
      for (std::size_t k = 0; k < 5; ++k) z += std::exp(x[k * 12 + cell]);
      for (std::size_t k = 0; k < 5; ++k) {
        CHECK(std::abs(s[k * 12 + cell] - std::exp(x[k * 12 + cell]) / z) <= 1e-12);
        total += s[k * 12 + cell];
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("softmax of huge logits stays finite") {
    Tape tape;
    const Tensor s = softmax(tape.constant(Tensor({3, 1}, std::vector<double>{1000, 0, -1000})), 0).value();
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(s[2] == 0.0);
  }

  TEST_CASE("matmul against a hand product") {
    Tape tape;
    Var a = tape.constant(Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
    Var b = tape.constant(Tensor({3, 2}, std::vector<double>{7, 8, 9, 10, 11, 12}));
    const Tensor c = matmul(a, b).value();
    CHECK(c.storage() == std::vector<double>{58, 64, 139, 154});
  }

  TEST_CASE("conv2d against a direct loop with zero padding") {
    Rng rng(4);
    Tape tape;
    Parameter x = random_param("x", {2, 4, 5}, rng);
    Parameter w = random_param("w", {3, 2, 3, 3}, rng);
    Parameter b = random_param("b", {3}, rng);
    const Tensor y = conv2d(tape.param(x), tape.param(w), tape.param(b)).value();
    for (std::size_t o = 0; o < 3; ++o)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j) {
          double acc = b.value[o];
          for (std::size_t c = 0; c < 2; ++c)
            for (int di = -1; di <= 1; ++di)
              for (int dj = -1; dj <= 1; ++dj) {
                const int ii = i + di, jj = j + dj;
                if (ii < 0 || ii >= 4 || jj < 0 || jj >= 5) continue;
                acc += w.value[((o * 2 + c) * 3 + std::size_t(di + 1)) * 3 + std::size_t(dj + 1)] *
                       x.value.at(c, std::size_t(ii), std::size_t(jj));
              }
          CHECK(std::abs(y.at(o, std::size_t(i), std::size_t(j)) - acc) <= 1e-12);
        }
  }

  TEST_CASE("cumsum, slice, concat and reshape") {
    Tape tape;
    Var x = tape.constant(Tensor({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6}));
    CHECK(cumsum(x, 0).value().storage() == std::vector<double>{1, 2, 4, 6, 9, 12});
    CHECK(slice(x, 1, 2).value().storage() == std::vector<double>{3, 4});
    CHECK(concat({x, slice(x, 0, 1)}).value().shape() == Shape{4, 2});
    CHECK(reshape(x, {6}).value().shape() == Shape{6});
  }

  TEST_CASE("clamp has zero gradient where active") {
    Tape tape;
    Parameter x("x", Tensor({3}, std::vector<double>{-20, 0, 5}));
    tape.backward(sum(clamp(tape.param(x), -10, 3)));
    CHECK(x.grad.storage() == std::vector<double>{0, 1, 0});
  }

  TEST_CASE("gaussian sample with zero noise is the mean") {
    Tape tape;
    Var mu = tape.constant(Tensor({2}, std::vector<double>{0.5, -1}));
    Var ls = tape.constant(Tensor({2}, 0.7));
    CHECK(gaussian_sample(mu, ls, Tensor({2})).value().storage() ==
          std::vector<double>{0.5, -1});
  }

  TEST_CASE("grad check of a linear function is essentially exact") {
    Rng rng(6);
    Parameter w = random_param("w", {4, 3}, rng);
    const Tensor c = random_param("c", {4, 3}, rng).value;
    std::vector<Parameter*> ps{&w};
    const auto r = grad_check(
        [&](Tape& t) { return sum(mul(t.param(w), t.constant(c))); }, ps);
    CHECK(r.max_rel_error <= 1e-10);
    CHECK(r.checked == 12);
  }

  TEST_CASE("every primitive passes the gradient check on ten seeds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      Parameter a = random_param("a", {2, 3, 4}, rng);
      Parameter b = random_param("b", {2, 3, 4}, rng);
      Parameter pos("pos", Tensor({2, 3, 4}));
      for (auto& v : pos.value.storage()) v = 0.5 + rng.uniform();
      Parameter s = random_param("s", {1}, rng);
      s.value[0] = 1.5 + std::abs(s.value[0]);
      Parameter m1 = random_param("m1", {3, 4}, rng);
      Parameter m2 = random_param("m2", {4, 2}, rng);
      Parameter cw = random_param("cw", {3, 2, 3, 3}, rng, 0.5);
      Parameter cb = random_param("cb", {3}, rng);
      Parameter sc = random_param("sc", {2}, rng);
      Parameter sh = random_param("sh", {2}, rng);
      Tensor noise({2, 3, 4});
      for (auto& v : noise.storage()) v = rng.normal();
      Tensor weights({2, 3, 4});
      for (auto& v : weights.storage()) v = rng.normal();

      std::vector<Parameter*> ps{&a, &b, &pos, &s, &m1, &m2, &cw, &cb, &sc, &sh};
      const auto r = grad_check(
          [&](Tape& t) {
            Var va = t.param(a), vb = t.param(b), vp = t.param(pos), vs = t.param(s);
            Var wt = t.constant(weights);
            Var terms = add(mul(va, vb), sub(gelu(va), relu(vb)));
            terms = add(terms, add(log(vp), sqrt(vp)));
            terms = add(terms, div_scalar(exp(scale(va, 0.3)), vs));
            terms = add(terms, mul_scalar(add_scalar(square(vb), 0.1), vs));
            terms = add(terms, softmax(va, 0));
            terms = add(terms, cumsum(vb, 1));
            terms = add(terms, scale_shift(va, t.param(sc), t.param(sh)));
            terms = add(terms, gaussian_sample(vb, clamp(scale(va, 0.2), -10, 3), noise));
            terms = add(terms, reshape(concat({slice(va, 1, 2), slice(vb, 0, 1)}), {2, 3, 4}));
            Var conv = conv2d(va, t.param(cw), t.param(cb));
            Var mm = matmul(t.param(m1), t.param(m2));
            return add(add(sum(mul(terms, wt)), mean(square(conv))), sum(mm));
          },
          ps);
      INFO("seed ", seed, " worst ", r.worst_param, "[", r.worst_index, "]");
      CHECK(r.max_rel_error <= 1e-4);
    }
  }
}
