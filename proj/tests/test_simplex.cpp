#include <doctest.h>

#include <cmath>
#include <vector>

#include "tamatch/error.hpp"
#include "tamatch/rng.hpp"
#include "tamatch/simplex.hpp"

using namespace tamatch;

namespace {

SimplexVector random_simplex(SplitRng& rng, std::size_t classes) {
  std::vector<double> v(classes);
  for (auto& x : v) x = rng.next_unit() + 1e-6;
  return normalize(v);
}

}  // namespace

TEST_CASE("normalize basic arithmetic") {
  const std::vector<double> v{0.4, 0.8};
  const auto s = normalize(v);
  CHECK(s[0] == doctest::Approx(0.4 / 1.2).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.8 / 1.2).epsilon(1e-15));

  const std::vector<double> quarter{0.25, 0.25, 0.25, 0.25};
  const auto q = normalize(quarter);
  CHECK(q.probs() == quarter);  // already normalized: exact no-op

  const std::vector<double> mass{5.0, 0.0, 0.0};
  const auto m = normalize(mass);
  CHECK(m[0] == 1.0);
  CHECK(m[1] == 0.0);
  CHECK(m[2] == 0.0);
}

TEST_CASE("normalize error paths") {
  CHECK_THROWS_AS(normalize(std::vector<double>{0.0, 0.0}), Error);
  CHECK_THROWS_AS(normalize(std::vector<double>{-0.1, 1.1}), Error);
  CHECK_THROWS_AS(normalize(std::vector<double>{1.0}), Error);
  try {
    normalize(std::vector<double>{0.0, 0.0});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAllZeroVector);
  }
  try {
    normalize(std::vector<double>{-0.5, 1.5});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNegativeEntry);
  }
}

TEST_CASE("normalize is bitwise idempotent") {
  SplitRng rng(7, {0xA});
  for (int iter = 0; iter < 500; ++iter) {
    const std::size_t classes = 2 + rng.next_below(15);
    std::vector<double> v(classes);
    for (auto& x : v) x = rng.next_unit() * 10.0;
    v[rng.next_below(classes)] += 1e-3;  // keep the sum positive
    const auto once = normalize(v);
    const auto twice = normalize(once.probs());
    CHECK(once.probs() == twice.probs());
  }
}

TEST_CASE("simplex construction tolerance") {
  CHECK_THROWS_AS(SimplexVector::from_probs({0.6, 0.6}), Error);
  CHECK_THROWS_AS(SimplexVector::from_probs({0.5, 0.5 - 2e-9}), Error);
  CHECK_NOTHROW(SimplexVector::from_probs({0.5, 0.5 - 1e-10}));
}

TEST_CASE("kl divergence examples") {
  const auto half = SimplexVector::from_probs({0.5, 0.5});
  CHECK(kl_divergence(half, half) == 0.0);

  const auto point = SimplexVector::from_probs({1.0, 0.0});
  CHECK(kl_divergence(point, half) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const auto skew = SimplexVector::from_probs({0.8, 0.2});
  const double expected = 0.8 * std::log(0.8 / 0.5) + 0.2 * std::log(0.2 / 0.5);
  CHECK(kl_divergence(skew, half) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(kl_divergence(skew, half) == doctest::Approx(0.192745).epsilon(1e-5));
}

TEST_CASE("kl divergence errors") {
  const auto half = SimplexVector::from_probs({0.5, 0.5});
  const auto tri = SimplexVector::uniform(3);
  CHECK_THROWS_AS(kl_divergence(half, tri), Error);
  const auto point = SimplexVector::from_probs({1.0, 0.0});
  try {
    kl_divergence(half, point);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupportedSupport);
  }
  // p = 0 where q = 0 is fine under the 0*ln(0) convention
  CHECK(kl_divergence(point, point) == 0.0);
}

TEST_CASE("kl divergence nonnegativity over random pairs") {
  SplitRng rng(11, {0xB});
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t classes = 2 + rng.next_below(15);
    const auto p = random_simplex(rng, classes);
    const auto q = random_simplex(rng, classes);
    CHECK(kl_divergence(p, q) >= 0.0);
    CHECK(kl_divergence(p, p) == 0.0);
  }
}

TEST_CASE("entropy examples") {
  CHECK(entropy(SimplexVector::uniform(4)) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(entropy(SimplexVector::from_probs({1.0, 0.0, 0.0})) == 0.0);
  const double expected = -(0.8 * std::log(0.8) + 0.2 * std::log(0.2));
  CHECK(entropy(SimplexVector::from_probs({0.8, 0.2})) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(entropy(SimplexVector::from_probs({0.8, 0.2})) ==
        doctest::Approx(0.500402).epsilon(1e-5));
}

TEST_CASE("entropy bounds over random vectors") {
  SplitRng rng(13, {0xC});
  for (int iter = 0; iter < 500; ++iter) {
    const std::size_t classes = 2 + rng.next_below(15);
    const auto p = random_simplex(rng, classes);
    const double h = entropy(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(classes)) + 1e-12);
  }
  CHECK(entropy(SimplexVector::uniform(7)) ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("ema update") {
  const auto prev = SimplexVector::from_probs({0.5, 0.5});
  const auto obs = SimplexVector::from_probs({0.7, 0.3});
  const auto full = ema_update(prev, obs, 1.0);
  CHECK(full.probs() == prev.probs());
  const auto none = ema_update(prev, obs, 0.0);
  CHECK(none.probs() == obs.probs());
  const auto mixed = ema_update(prev, obs, 0.9);
  CHECK(mixed[0] == doctest::Approx(0.52).epsilon(1e-15));
  CHECK(mixed[1] == doctest::Approx(0.48).epsilon(1e-15));

  CHECK_THROWS_AS(ema_update(prev, obs, 1.5), Error);
  CHECK_THROWS_AS(ema_update(prev, obs, -0.1), Error);
  CHECK_THROWS_AS(ema_update(prev, SimplexVector::uniform(3), 0.5), Error);
}

TEST_CASE("ema output stays on the simplex") {
  SplitRng rng(17, {0xD});
  for (int iter = 0; iter < 500; ++iter) {
    const std::size_t classes = 2 + rng.next_below(15);
    const auto a = random_simplex(rng, classes);
    const auto b = random_simplex(rng, classes);
    const double lambda = rng.next_unit();
    const auto out = ema_update(a, b, lambda);
    double sum = 0.0;
    for (std::size_t i = 0; i < out.dim(); ++i) {
      CHECK(out[i] >= 0.0);
      sum += out[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("uniform distribution") {
  const auto two = SimplexVector::uniform(2);
  CHECK(two[0] == 0.5);
  CHECK(two[1] == 0.5);
  const auto ten = SimplexVector::uniform(10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(ten[i] == 0.1);
  const auto three = SimplexVector::uniform(3);
  CHECK(three[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK_THROWS_AS(SimplexVector::uniform(1), Error);
}

TEST_CASE("argmax tie breaking") {
  CHECK(argmax_deterministic(std::vector<double>{0.2, 0.7, 0.1}) == 1);
  CHECK(argmax_deterministic(std::vector<double>{0.5, 0.5}) == 0);
  const double third = 1.0 / 3;
  CHECK(argmax_deterministic(std::vector<double>{third, third, third}) == 0);
  CHECK_THROWS_AS(argmax_deterministic(std::vector<double>{}), Error);
}

TEST_CASE("negative_log_prob conventions") {
  CHECK(negative_log_prob(1.0) == 0.0);
  CHECK(negative_log_prob(0.5) == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(negative_log_prob(0.0)));
  CHECK(std::isfinite(negative_log_prob(5e-324)));  // subnormal floored
}

TEST_CASE("positive vector validation") {
  CHECK_NOTHROW(PositiveVector::from_values({0.5, 2.0}));
  CHECK_THROWS_AS(PositiveVector::from_values({1.0, 0.0}), Error);
  CHECK_THROWS_AS(PositiveVector::from_values({}), Error);
}
