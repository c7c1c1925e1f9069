#include <mutex>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "salt/parallel.hpp"

TEST_CASE("parallel_for covers every item once in chunks no larger than grain") {
  for (unsigned threads : {1u, 2u, 5u}) {
    for (std::size_t n : {1u, 7u, 64u, 1000u}) {
      for (std::size_t grain : {1u, 3u, 64u, 5000u}) {
        std::vector<int> hits(n, 0);
        std::mutex m;
        std::size_t largest = 0;
        salt::parallel_for(n, threads, grain, [&](std::size_t b, std::size_t e) {
          std::lock_guard lock(m);
          largest = std::max(largest, e - b);
          for (std::size_t i = b; i < e; ++i) ++hits[i];
        });
        CHECK(largest <= grain);
        for (int h : hits) CHECK(h == 1);
      }
    }
  }
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  for (unsigned threads : {1u, 3u}) {
    CHECK_THROWS_AS(salt::parallel_for(100, threads, 10,
                                       [](std::size_t b, std::size_t) {
                                         if (b == 50) throw std::runtime_error("boom");
                                       }),
                    std::runtime_error);
  }
}

TEST_CASE("resolve_threads") {
  CHECK(salt::resolve_threads(3) == 3);
  CHECK(salt::resolve_threads(0) >= 1);
}
