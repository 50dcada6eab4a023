#include <doctest.h>

#include <chrono>
#include <stdexcept>

#include "streetscape/parallel.hpp"

using namespace streetscape;

TEST_CASE("commits arrive in index order") {
  std::vector<std::size_t> order;
  run_ordered<std::size_t>(
      200, 6,
      [](std::size_t i) {
        if (i % 7 == 0) std::this_thread::sleep_for(std::chrono::microseconds(200));
        return i * i;
      },
      [&](std::size_t i, std::size_t&& v) {
        CHECK(v == i * i);
        order.push_back(i);
        return true;
      });
  REQUIRE(order.size() == 200);
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == i);
}

TEST_CASE("stopping bounds the work started past the last commit") {
  std::atomic<std::size_t> started{0};
  std::size_t commits = 0;
  run_ordered<int>(
      1000, 4,
      [&](std::size_t i) {
        ++started;
        // Item 0 is slow so that the others race ahead as far as allowed.
        if (i == 0) std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return 0;
      },
      [&](std::size_t, int&&) { return ++commits < 10; });
  CHECK(commits == 10);
  CHECK(started.load() <= 10 + 2 * 4);
}

TEST_CASE("worker exceptions surface at their commit point") {
  std::size_t commits = 0;
  CHECK_THROWS_AS(run_ordered<int>(
                      50, 3,
                      [](std::size_t i) -> int {
                        if (i == 5) throw std::runtime_error("boom");
                        return 1;
                      },
                      [&](std::size_t, int&&) {
                        ++commits;
                        return true;
                      }),
                  std::runtime_error);
  CHECK(commits == 5);
  run_ordered<int>(0, 3, [](std::size_t) { return 0; }, [](std::size_t, int&&) { return true; });
}
