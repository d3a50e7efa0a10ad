#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gazeattn/grid_dist.hpp"
#include "support.hpp"

using namespace gazeattn;
using testing::chi_square_p;
using testing::chi_square_two_sample_p;
using testing::random_dist;

namespace {

// Direct sums, written independently of the library.
double direct_entropy(const std::vector<double>& q) {
  double h = 0.0;
  for (double v : q) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double direct_kl(const std::vector<double>& q, const std::vector<double>& p) {
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) kl += q[i] * (std::log(q[i]) - std::log(std::max(p[i], kEpsFloor)));
  }
  return kl;
}

}  // namespace

TEST_SUITE("grid_dist") {
  TEST_CASE("normalize fixtures") {
    const GridDist u = normalize(LogitGrid(GridShape{}));
    for (double v : u.probs) CHECK(v == doctest::Approx(1.0 / 49.0).epsilon(1e-15));

    LogitGrid spike(GridShape{});
    spike.values[17] = 50.0;
    CHECK(normalize(spike).probs[17] >= 1.0 - 1e-9);

    const GridDist d = normalize(LogitGrid(GridShape{1, 2, 2}, {0.0, std::log(2.0), std::log(3.0), std::log(4.0)}));
    const double expect[] = {0.1, 0.2, 0.3, 0.4};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(d.probs[i] - expect[i]) < 1e-15);
  }

  TEST_CASE("normalize rejects non-finite logits") {
    LogitGrid bad(GridShape{1, 2, 2});
    bad.values[1] = std::nan("");
    CHECK_THROWS_AS(normalize(bad), InvalidInput);
    bad.values[1] = INFINITY;
    CHECK_THROWS_AS(normalize(bad), InvalidInput);
  }

  TEST_CASE("GridDist validates mass and sign") {
    CHECK_THROWS_AS(GridDist(GridShape{1, 1, 2}, {0.6, 0.6}), InvalidInput);
    CHECK_THROWS_AS(GridDist(GridShape{1, 1, 2}, {1.5, -0.5}), InvalidInput);
    CHECK_THROWS_AS(GridDist(GridShape{1, 1, 3}, {0.5, 0.5}), InvalidInput);
    CHECK_NOTHROW(GridDist(GridShape{1, 1, 2}, {0.25, 0.75}));
  }

  TEST_CASE("shift invariance") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      LogitGrid a(GridShape{2, 3, 4});
      for (double& v : a.values) v = 4.0 * rng.normal();
      LogitGrid b = a;
      const double c = rng.uniform(-100.0, 100.0);
      for (double& v : b.values) v += c;
      const GridDist qa = normalize(a), qb = normalize(b);
      for (std::size_t i = 0; i < qa.probs.size(); ++i) CHECK(std::abs(qa.probs[i] - qb.probs[i]) < 1e-12);
    }
  }

  TEST_CASE("entropy fixtures") {
    const GridShape s{};
    CHECK(entropy(testing::one_hot(s, 5)) == 0.0);
    CHECK(entropy(uniform_dist(s)) == doctest::Approx(std::log(49.0)).epsilon(1e-14));
    CHECK(entropy(GridDist(GridShape{1, 2, 2}, {0.5, 0.5, 0.0, 0.0})) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }

  TEST_CASE("kl fixtures") {
    Rng rng(3);
    const GridShape s{};
    const GridDist q = random_dist(s, rng);
    CHECK(std::abs(kl_divergence(q, q)) < 1e-12);
    CHECK(kl_divergence(uniform_dist(s), uniform_dist(s)) == doctest::Approx(0.0));
    CHECK(kl_divergence(testing::one_hot(s, 0), uniform_dist(s)) == doctest::Approx(std::log(49.0)).epsilon(1e-14));
    CHECK_THROWS_AS(kl_divergence(uniform_dist(GridShape{1, 2, 2}), uniform_dist(GridShape{1, 4, 1})), InvalidInput);
  }

  TEST_CASE("kl against uniform equals log cells minus entropy") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const GridShape s{1 + rng.index(3), 1 + rng.index(7), 1 + rng.index(7)};
      const GridDist q = random_dist(s, rng, true);
      const GridDist u = uniform_dist(s);
      const double identity = std::log(static_cast<double>(s.cells())) - direct_entropy(q.probs);
      CHECK(std::abs(kl_divergence(q, u) - identity) < 1e-9);
      CHECK(std::abs(kl_divergence(q, u) - direct_kl(q.probs, u.probs)) < 1e-12);
    }
  }

  TEST_CASE("kl is nonnegative and zero only at equality") {
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
      const GridShape s{1, 3, 3};
      const GridDist q = random_dist(s, rng, trial % 2 == 0);
      const GridDist p = random_dist(s, rng);
      const double kl = kl_divergence(q, p);
      CHECK(kl >= 0.0);
      double gap = 0.0;
      for (std::size_t i = 0; i < q.probs.size(); ++i) gap = std::max(gap, std::abs(q.probs[i] - p.probs[i]));
      if (gap >= 1e-12) CHECK(kl > 0.0);
      CHECK(std::abs(kl - direct_kl(q.probs, p.probs)) < 1e-12);
    }
  }

  TEST_CASE("floor_dist clamps and renormalizes") {
    const GridDist d = floor_dist(testing::one_hot(GridShape{1, 2, 2}, 0), 1e-3);
    const double sum = std::accumulate(d.probs.begin(), d.probs.end(), 0.0);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    for (double v : d.probs) CHECK(v > 0.0);
    CHECK(d.probs[1] == doctest::Approx(1e-3 / 1.003).epsilon(1e-12));
  }

  TEST_CASE("gumbel samples are valid distributions") {
    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
      LogitGrid l(GridShape{1 + rng.index(2), 4, 5});
      for (double& v : l.values) v = 3.0 * rng.normal();
      const double tau = std::exp(rng.uniform(-3.0, 2.0));
      const GridDist g = gumbel_softmax_sample(l, tau, rng);
      const double sum = std::accumulate(g.probs.begin(), g.probs.end(), 0.0);
      CHECK(std::abs(sum - 1.0) < 1e-9);
      if (tau >= 0.5) {
        for (double v : g.probs) CHECK(v > 0.0);
      }
    }
  }

  TEST_CASE("gumbel sampler rejects non-positive temperature") {
    Rng rng(1);
    const LogitGrid l(GridShape{1, 2, 2});
    CHECK_THROWS_AS(gumbel_softmax_sample(l, 0.0, rng), InvalidInput);
    CHECK_THROWS_AS(gumbel_softmax_sample(l, -1.0, rng), InvalidInput);
  }

  TEST_CASE("sharp temperature picks argmax of perturbed logits") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      LogitGrid l(GridShape{1, 3, 3});
      for (double& v : l.values) v = rng.normal();
      const std::vector<double> g = draw_gumbel(l.values.size(), rng);
      const GridDist s = gumbel_softmax(l, g, 0.01);
      std::vector<double> perturbed(l.values.size());
      for (std::size_t i = 0; i < perturbed.size(); ++i) perturbed[i] = l.values[i] + g[i];
      const auto best = static_cast<std::size_t>(std::max_element(perturbed.begin(), perturbed.end()) - perturbed.begin());
      CHECK(s.argmax() == best);
    }
  }

  TEST_CASE("gumbel argmax frequencies follow the categorical distribution") {
    const LogitGrid l(GridShape{1, 1, 2}, {0.0, std::log(3.0)});
    const std::vector<double> probs = {0.25, 0.75};
    Rng rng(2024);
    Rng categorical(99);
    std::vector<double> gumbel_counts(2, 0.0), direct_counts(2, 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      gumbel_counts[gumbel_softmax_sample(l, 0.01, rng).argmax()] += 1.0;
      direct_counts[categorical.uniform() < probs[0] ? 0 : 1] += 1.0;
    }
    CHECK(gumbel_counts[1] / draws == doctest::Approx(0.75).epsilon(0.01));
    CHECK(chi_square_p(gumbel_counts, probs) > 0.01);
    CHECK(chi_square_two_sample_p(gumbel_counts, direct_counts) > 0.01);
  }

  TEST_CASE("mean gumbel sample ranks cells like the softmax") {
    Rng rng(4);
    const GridShape s{1, 3, 3};
    for (int trial = 0; trial < 3; ++trial) {
      LogitGrid l(s);
      for (double& v : l.values) v = rng.normal();
      auto sorted = l.values;
      std::sort(sorted.rbegin(), sorted.rend());
      if (sorted[0] - sorted[1] <= 0.5) {
        --trial;
        continue;
      }
      std::vector<double> mean(s.cells(), 0.0);
      const int draws = 100000;
      for (int i = 0; i < draws; ++i) {
        const GridDist g = gumbel_softmax_sample(l, 2.0, rng);
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += g.probs[c] / draws;
      }
      const GridDist m(s, mean);
      CHECK(m.argmax() == normalize(l).argmax());
    }
  }

  TEST_CASE("sampling is deterministic given the seed") {
    LogitGrid l(GridShape{2, 7, 7});
    Rng init(1);
    for (double& v : l.values) v = init.normal();
    Rng a(77), b(77);
    for (int i = 0; i < 20; ++i) {
      const GridDist x = gumbel_softmax_sample(l, 2.0, a);
      const GridDist y = gumbel_softmax_sample(l, 2.0, b);
      CHECK(x.probs == y.probs);
    }
  }
}
