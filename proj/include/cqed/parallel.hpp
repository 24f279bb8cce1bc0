// Copyright 2026 The cqed-pairs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cqed {

inline int default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Map-reduce over [0, n). Work is cut into fixed-size chunks, each chunk is
/// folded into its own Tally in index order, and chunk tallies are merged in
/// chunk order, so the result is bit-identical for any thread count.
///
/// fold(Tally&, std::size_t index); merge(Tally&, const Tally&).
template <class Tally, class Fold, class Merge>
Tally parallel_reduce(std::size_t n, int threads, Tally init, Fold fold, Merge merge,
                      std::size_t chunk = 64) {
  const std::size_t num_chunks = (n + chunk - 1) / chunk;
  std::vector<Tally> partial(num_chunks, init);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= num_chunks) return;
      try {
        const std::size_t end = std::min(n, (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) fold(partial[c], i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(num_chunks);
        return;
      }
    }
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(num_chunks)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  Tally total = std::move(init);
  for (const Tally& p : partial) merge(total, p);
  return total;
}

}  // namespace cqed
