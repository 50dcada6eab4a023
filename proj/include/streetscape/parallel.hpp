#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace streetscape {

/// Runs `work(i)` for i in [0, n) on up to `workers` threads and hands each
/// result to `commit(i, result)` on the calling thread in strictly increasing
/// index order. `commit` returning false stops the run: no further items are
/// started and results past that index are discarded. An exception thrown by
/// `work` is rethrown from here when its item would have been committed.
/// Workers run at most 2 * workers items ahead of the last commit.
template <typename Result>
void run_ordered(std::size_t n, std::size_t workers,
                 const std::function<Result(std::size_t)>& work,
                 const std::function<bool(std::size_t, Result&&)>& commit) {
  if (n == 0) return;
  workers = std::clamp<std::size_t>(workers, 1, n);

  std::mutex mutex;
  std::condition_variable ready;
  std::condition_variable space;
  std::size_t committed = 0;
  const std::size_t window = 2 * workers;
  std::vector<std::optional<Result>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<char> done(n, 0);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        if (stop.load()) return;
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        {
          std::unique_lock lock(mutex);
          space.wait(lock, [&] { return stop.load() || i < committed + window; });
        }
        if (stop.load()) return;
        std::optional<Result> r;
        std::exception_ptr err;
        try {
          r.emplace(work(i));
        } catch (...) {
          err = std::current_exception();
        }
        {
          std::lock_guard lock(mutex);
          results[i] = std::move(r);
          errors[i] = err;
          done[i] = 1;
        }
        ready.notify_all();
      }
    });
  }

  const auto halt = [&] {
    {
      std::lock_guard lock(mutex);
      stop.store(true);
    }
    space.notify_all();
    pool.clear();  // joins
  };

  for (std::size_t i = 0; i < n; ++i) {
    std::optional<Result> r;
    std::exception_ptr err;
    {
      std::unique_lock lock(mutex);
      ready.wait(lock, [&] { return done[i] != 0; });
      r = std::move(results[i]);
      err = errors[i];
    }
    if (err) {
      halt();
      std::rethrow_exception(err);
    }
    bool keep_going = false;
    try {
      keep_going = commit(i, std::move(*r));
    } catch (...) {
      halt();
      throw;
    }
    if (!keep_going) {
      halt();
      return;
    }
    {
      std::lock_guard lock(mutex);
      committed = i + 1;
    }
    space.notify_all();
  }
}

}  // namespace streetscape
