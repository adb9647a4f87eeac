#include <doctest.h>

#include <atomic>
#include <vector>

#include "targetiv/parallel.hpp"
#include "targetiv/rng.hpp"

using namespace targetiv;

// Known-answer vectors of the Random123 reference implementation.
TEST_CASE("philox4x32-10 known answers") {
  auto z = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  CHECK(z == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const std::uint32_t f = 0xffffffffu;
  auto o = Philox4x32::generate({f, f, f, f}, {f, f});
  CHECK(o == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  auto p = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                {0xa4093822u, 0x299f31d0u});
  CHECK(p == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are addressed, not sequential") {
  CounterStream a(7, 1, 42), b(7, 1, 42), c(7, 2, 42), d(8, 1, 42);
  double x = a.uniform();
  CHECK(x == b.uniform());
  CHECK(x != c.uniform());
  CHECK(x != d.uniform());
}

TEST_CASE("uniforms stay inside the open unit interval") {
  CounterStream s(1, 0, 0);
  double lo = 1, hi = 0, sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = s.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo > 0);
  CHECK(hi < 1);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal draws have unit variance") {
  CounterStream s(3, 0, 0);
  double m = 0, v = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = s.normal();
    m += x;
    v += x * x;
  }
  m /= n;
  v = v / n - m * m;
  CHECK(std::abs(m) < 0.01);
  CHECK(v == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("bounded integers") {
  CounterStream s(5, 0, 0);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) ++hits[s.below(7)];
  for (int h : hits) CHECK(h == doctest::Approx(10000).epsilon(0.05));
  CHECK(s.below(1) == 0);
}

TEST_CASE("parallel chunks cover the range once for any thread count") {
  for (int threads : {1, 3, 16}) {
    std::vector<std::atomic<int>> seen(1003);
    parallel_chunks(seen.size(), 100, threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++seen[i];
    });
    for (auto& s : seen) CHECK(s.load() == 1);
  }
  CHECK(n_chunks(1003, 100) == 11);
}

TEST_CASE("exceptions in workers propagate") {
  CHECK_THROWS_AS(parallel_chunks(100, 10, 4,
                                  [](std::size_t c, std::size_t, std::size_t) {
                                    if (c == 3) throw std::runtime_error("boom");
                                  }),
                  std::runtime_error);
}
