#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace mrag {

/// Runs work(i) for i in [0, n) on up to `width` threads and calls emit(i, r)
/// on the calling thread in strictly increasing i, as soon as each prefix is
/// complete. work() must not throw; wrap failures in the result type.
template <typename Result>
void ordered_parallel_for(std::size_t n, std::size_t width, const std::function<Result(std::size_t)>& work,
                          const std::function<void(std::size_t, Result&)>& emit) {
  if (n == 0) return;
  width = std::clamp<std::size_t>(width, 1, n);
  if (width == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      Result r = work(i);
      emit(i, r);
    }
    return;
  }

  std::mutex mutex;
  std::condition_variable ready;
  std::map<std::size_t, Result> done;
  std::atomic<std::size_t> next{0};

  std::vector<std::jthread> workers;
  workers.reserve(width);
  for (std::size_t w = 0; w < width; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        Result r = work(i);
        {
          std::lock_guard lock(mutex);
          done.emplace(i, std::move(r));
        }
        ready.notify_one();
      }
    });
  }

  for (std::size_t i = 0; i < n; ++i) {
    Result r;
    {
      std::unique_lock lock(mutex);
      ready.wait(lock, [&] { return done.contains(i); });
      auto node = done.extract(i);
      r = std::move(node.mapped());
    }
    emit(i, r);
  }
}

}  // namespace mrag
