#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "confctrl/rng.hpp"
#include "confctrl/tensor.hpp"

using namespace confctrl;
using Td = ad::Tensor<double>;

namespace {

std::vector<double> random_vals(size_t n, uint64_t seed, double scale = 1.0) {
  Rng rng(seed, "tensor-test");
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Central-difference check of d loss / d leaf for every leaf entry.
void check_grad(const std::function<Td(const std::vector<Td>&)>& build,
                std::vector<Td> leaves, double h = 1e-6, double tol = 1e-6) {
  for (auto& l : leaves) l.set_requires_grad();
  Td loss = build(leaves);
  ad::backward(loss);

  for (auto& leaf : leaves) {
    REQUIRE(leaf.grad().size() == leaf.numel());
    for (size_t i = 0; i < leaf.numel(); ++i) {
      const double orig = leaf.val()[i];
      leaf.val()[i] = orig + h;
      const double up = build(leaves).val()[0];
      leaf.val()[i] = orig - h;
      const double dn = build(leaves).val()[0];
      leaf.val()[i] = orig;
      const double fd = (up - dn) / (2 * h);
      const double an = leaf.grad()[i];
      CHECK(std::abs(an - fd) < tol * std::max({1.0, std::abs(an), std::abs(fd)}));
    }
  }
}

}  // namespace

TEST_CASE("forward values of basic ops") {
  Td a = Td::from({2, 2}, {1, 2, 3, 4});
  Td b = Td::from({2, 2}, {5, 6, 7, 8});
  CHECK(ad::add(a, b).val() == std::vector<double>{6, 8, 10, 12});
  CHECK(ad::sub(a, b).val() == std::vector<double>{-4, -4, -4, -4});
  CHECK(ad::mul(a, b).val() == std::vector<double>{5, 12, 21, 32});
  CHECK(ad::scale(a, 2.0).val() == std::vector<double>{2, 4, 6, 8});
  CHECK(ad::matmul(a, b).val() == std::vector<double>{19, 22, 43, 50});
  CHECK(ad::mean_all(a).val()[0] == 2.5);
  CHECK(ad::abs(Td::from({2}, {-3, 4})).val() == std::vector<double>{3, 4});
}

TEST_CASE("gradients: elementwise ops") {
  auto vals = random_vals(12, 1);
  check_grad([](const std::vector<Td>& l) {
    return ad::mean_all(ad::mul(ad::add(l[0], l[1]), ad::sub(l[0], l[1])));
  }, {Td::from({3, 4}, vals), Td::from({3, 4}, random_vals(12, 2))});

  check_grad([](const std::vector<Td>& l) {
    return ad::mean_all(ad::square(ad::scale(ad::add_scalar(l[0], 0.3), 1.7)));
  }, {Td::from({3, 4}, random_vals(12, 3))});

  check_grad([](const std::vector<Td>& l) { return ad::mean_all(ad::silu(l[0])); },
             {Td::from({3, 4}, random_vals(12, 4))});

  // abs away from the kink
  auto far = random_vals(12, 5);
  for (auto& x : far) x += (x >= 0 ? 0.5 : -0.5);
  check_grad([](const std::vector<Td>& l) { return ad::mean_all(ad::abs(l[0])); },
             {Td::from({3, 4}, far)});
}

TEST_CASE("gradients: row broadcasts") {
  check_grad([](const std::vector<Td>& l) {
    return ad::mean_all(ad::square(ad::add_row(l[0], l[1])));
  }, {Td::from({4, 3}, random_vals(12, 6)), Td::from({3}, random_vals(3, 7))});

  check_grad([](const std::vector<Td>& l) {
    return ad::mean_all(ad::square(ad::mul_row(l[0], l[1])));
  }, {Td::from({4, 3}, random_vals(12, 8)), Td::from({3}, random_vals(3, 9))});
}

TEST_CASE("gradients: matmul in all transpose modes") {
  for (bool tA : {false, true})
    for (bool tB : {false, true}) {
      const std::vector<int> sa = tA ? std::vector<int>{5, 3} : std::vector<int>{3, 5};
      const std::vector<int> sb = tB ? std::vector<int>{4, 5} : std::vector<int>{5, 4};
      check_grad([tA, tB](const std::vector<Td>& l) {
        return ad::mean_all(ad::square(ad::matmul(l[0], l[1], tA, tB)));
      }, {Td::from(sa, random_vals(15, 10 + tA)), Td::from(sb, random_vals(20, 20 + tB))});
    }
}

TEST_CASE("gradients: linear layer") {
  check_grad([](const std::vector<Td>& l) {
    return ad::mean_all(ad::square(ad::linear(l[0], l[1], l[2])));
  }, {Td::from({4, 3}, random_vals(12, 30)), Td::from({3, 5}, random_vals(15, 31)),
      Td::from({5}, random_vals(5, 32))});
}

TEST_CASE("gradients: softmax and layernorm") {
  check_grad([](const std::vector<Td>& l) {
    // weighted sum so the softmax jacobian is exercised off-diagonal
    Td w = Td::from({3, 4}, {1, -2, 3, -4, 2, 0.5, -1, 1.5, 0.3, 0.7, -0.2, 0.9});
    return ad::mean_all(ad::mul(ad::softmax_rows(l[0]), w));
  }, {Td::from({3, 4}, random_vals(12, 40))});

  check_grad([](const std::vector<Td>& l) {
    Td w = Td::from({3, 6}, random_vals(18, 41));
    return ad::mean_all(ad::mul(ad::layernorm_rows(l[0]), w));
  }, {Td::from({3, 6}, random_vals(18, 42))}, 1e-6, 1e-5);
}

TEST_CASE("attend: fused head equals composed softmax attention") {
  const double alpha = 0.37;
  Td q = Td::from({3, 4}, random_vals(12, 50));
  Td k = Td::from({5, 4}, random_vals(20, 51));
  Td v = Td::from({5, 2}, random_vals(10, 52));
  Td fused = ad::attend(q, k, v, alpha);
  Td composed = ad::matmul(ad::softmax_rows(ad::matmul(q, k, false, true, alpha)), v);
  REQUIRE(fused.shape() == composed.shape());
  for (size_t i = 0; i < fused.numel(); ++i)
    CHECK(fused.val()[i] == doctest::Approx(composed.val()[i]).epsilon(1e-12));

  check_grad([alpha](const std::vector<Td>& l) {
    Td w = Td::from({3, 2}, random_vals(6, 53));
    return ad::mean_all(ad::mul(ad::attend(l[0], l[1], l[2], alpha), w));
  }, {q, k, v}, 1e-6, 1e-5);

  CHECK_THROWS_AS(ad::attend(q, v, v, alpha), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one and layernorm rows are standardized") {
  Td x = Td::from({4, 8}, random_vals(32, 43, 3.0));
  Td sm = ad::softmax_rows(x);
  Td ln = ad::layernorm_rows(x);
  for (int r = 0; r < 4; ++r) {
    double s = 0, mu = 0, var = 0;
    for (int c = 0; c < 8; ++c) {
      s += sm.val()[r * 8 + c];
      mu += ln.val()[r * 8 + c];
    }
    mu /= 8;
    for (int c = 0; c < 8; ++c) var += (ln.val()[r * 8 + c] - mu) * (ln.val()[r * 8 + c] - mu);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mu == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var / 8 == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("gradients: shape ops") {
  check_grad([](const std::vector<Td>& l) {
    return ad::mean_all(ad::square(ad::reshape(l[0], {6, 2})));
  }, {Td::from({3, 4}, random_vals(12, 50))});

  check_grad([](const std::vector<Td>& l) {
    return ad::mean_all(ad::square(ad::slice_cols(l[0], 1, 2)));
  }, {Td::from({3, 4}, random_vals(12, 51))});

  check_grad([](const std::vector<Td>& l) {
    return ad::mean_all(ad::square(ad::concat_cols<double>({l[0], l[1], l[0]})));
  }, {Td::from({3, 2}, random_vals(6, 52)), Td::from({3, 3}, random_vals(9, 53))});

  // gather with repeated indices accumulates in backward
  auto idx = std::make_shared<std::vector<int64_t>>(std::vector<int64_t>{0, 0, 2, 3, 3, 3});
  check_grad([idx](const std::vector<Td>& l) {
    return ad::mean_all(ad::square(ad::gather(l[0], idx, {6})));
  }, {Td::from({4}, random_vals(4, 54))});
}

TEST_CASE("diamond-shaped graphs accumulate gradients once per path") {
  // loss = mean((x + x)^2) -> dloss/dx = 8x/N
  Td x = Td::from({2, 2}, {1, 2, 3, 4});
  x.set_requires_grad();
  Td loss = ad::mean_all(ad::square(ad::add(x, x)));
  ad::backward(loss);
  for (size_t i = 0; i < 4; ++i)
    CHECK(x.grad()[i] == doctest::Approx(8.0 * x.val()[i] / 4.0));
}

TEST_CASE("backward zeroes stale gradients between calls") {
  Td x = Td::from({2}, {1.0, 2.0});
  x.set_requires_grad();
  Td l1 = ad::mean_all(ad::square(x));
  ad::backward(l1);
  const auto g1 = x.grad();
  ad::backward(l1);
  CHECK(x.grad() == g1);  // not doubled
}

TEST_CASE("shape mismatches throw") {
  Td a = Td::from({2, 2}, {1, 2, 3, 4});
  Td b = Td::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(ad::add(a, b), std::invalid_argument);
  Td c = Td::from({3, 4}, std::vector<double>(12, 0.0));
  CHECK_THROWS_AS(ad::matmul(a, c), std::invalid_argument);
  CHECK_THROWS_AS(ad::reshape(a, {3, 2}), std::invalid_argument);
  CHECK_THROWS_AS(ad::slice_cols(a, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(ad::backward(a), std::invalid_argument);
}
