#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "relcomp/fingerprint.hpp"
#include "relcomp/rng.hpp"
#include "support/oracles.hpp"

using relcomp::Fingerprint;
using relcomp::Rng;

TEST_SUITE("rng_fingerprint") {
  TEST_CASE("identical seeds give identical streams, different seeds diverge") {
    Rng a(42), b(42), c(43);
    bool diverged = false;
    for (int i = 0; i < 1000; ++i) {
      const uint64_t va = a.next();
      CHECK(va == b.next());
      if (va != c.next()) diverged = true;
    }
    CHECK(diverged);
  }

  TEST_CASE("uniform stays in [0,1) and fills the unit interval evenly") {
    Rng rng(7);
    std::vector<size_t> bins(16, 0);
    for (int i = 0; i < 32000; ++i) {
      const double u = rng.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      ++bins[static_cast<size_t>(u * 16.0)];
    }
    // 15 degrees of freedom, 0.999 quantile ≈ 37.70.
    CHECK(testsupport::chi_square_uniform(bins) < 37.70);
  }

  TEST_CASE("below covers [0,n) without bias") {
    Rng rng(8);
    std::vector<size_t> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
      const uint64_t v = rng.below(7);
      REQUIRE(v < 7);
      ++counts[v];
    }
    // 6 degrees of freedom, 0.999 quantile ≈ 22.46.
    CHECK(testsupport::chi_square_uniform(counts) < 22.46);
    CHECK(rng.below(1) == 0);
  }

  TEST_CASE("range is inclusive on both ends") {
    Rng rng(9);
    std::set<int64_t> seen;
    for (int i = 0; i < 400; ++i) {
      const int64_t v = rng.range(-3, 3);
      REQUIRE(v >= -3);
      REQUIRE(v <= 3);
      seen.insert(v);
    }
    CHECK(seen.size() == 7);
  }

  TEST_CASE("normal has the right first two moments") {
    Rng rng(10);
    double sum = 0.0, sq = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      const double v = rng.normal();
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
  }

  TEST_CASE("derive is deterministic, order-sensitive and spreads streams") {
    CHECK(Rng::derive(1, {2, 3}) == Rng::derive(1, {2, 3}));
    CHECK(Rng::derive(1, {2, 3}) != Rng::derive(1, {3, 2}));
    CHECK(Rng::derive(1, {2}) != Rng::derive(2, {2}));
    CHECK(Rng::derive(1, {}) != Rng::derive(1, {0}));

    // Child streams from adjacent paths should look unrelated.
    std::set<uint64_t> firsts;
    for (uint64_t i = 0; i < 200; ++i) {
      Rng child(Rng::derive(5, {i}));
      firsts.insert(child.next());
    }
    CHECK(firsts.size() == 200);
  }

  TEST_CASE("shuffle permutes and is close to uniform over orders") {
    Rng rng(11);
    std::vector<int> v(10);
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 10; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);

    std::map<std::string, size_t> orders;
    for (int t = 0; t < 6000; ++t) {
      std::vector<int> p = {0, 1, 2};
      rng.shuffle(p);
      orders[std::to_string(p[0]) + std::to_string(p[1]) + std::to_string(p[2])]++;
    }
    REQUIRE(orders.size() == 6);
    std::vector<size_t> counts;
    for (const auto& [k, n] : orders) counts.push_back(n);
    // 5 degrees of freedom, 0.999 quantile ≈ 20.52.
    CHECK(testsupport::chi_square_uniform(counts) < 20.52);
  }

  TEST_CASE("fingerprint matches published FNV-1a vectors") {
    Fingerprint empty;
    CHECK(empty.value() == 0xcbf29ce484222325ull);
    CHECK(empty.hex() == "cbf29ce484222325");

    Fingerprint a;
    a.bytes("a", 1);
    CHECK(a.value() == 0xaf63dc4c8601ec8cull);

    Fingerprint foobar;
    foobar.bytes("foobar", 6);
    CHECK(foobar.value() == 0x85944171f73967e8ull);
  }

  TEST_CASE("fingerprint is incremental and framing-safe") {
    Fingerprint whole, chunks;
    whole.bytes("hello world", 11);
    chunks.bytes("hello", 5);
    chunks.bytes(" world", 6);
    CHECK(whole.value() == chunks.value());

    // Length prefixes stop adjacent strings from blurring together.
    Fingerprint ab_c, a_bc;
    ab_c.str("ab");
    ab_c.str("c");
    a_bc.str("a");
    a_bc.str("bc");
    CHECK(ab_c.value() != a_bc.value());

    Fingerprint pos, neg;
    pos.f64(0.0);
    neg.f64(-0.0);
    CHECK(pos.value() != neg.value());

    Fingerprint v1, v2;
    v1.vec(std::vector<int32_t>{1, 2, 3});
    v2.vec(std::vector<int32_t>{1, 2, 3});
    CHECK(v1.value() == v2.value());
    Fingerprint v3;
    v3.vec(std::vector<int32_t>{1, 2, 4});
    CHECK(v1.value() != v3.value());
  }
}
