#include "cpds/parallel.hpp"

#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cpds/types.hpp"

namespace cpds {

int hardware_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

int resolve_worker_count(int requested) {
  if (requested < 0) throw ConfigError("workers: count must be >= 0");
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CPDS_WORKERS")) {
    try {
      size_t pos = 0;
      int n = std::stoi(env, &pos);
      if (pos == std::string(env).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError("CPDS_WORKERS must be a positive integer, got '" +
                      std::string(env) + "'");
  }
  return hardware_workers();
}

void parallel_chunks(int64_t total, int workers,
                     const std::function<void(int64_t, int64_t, int)>& fn) {
  if (total <= 0) return;
  if (workers < 1) throw ConfigError("parallel_chunks: workers must be >= 1");
  const int chunks = static_cast<int>(
      std::min<int64_t>(workers, total));
  if (chunks == 1) {
    fn(0, total, 0);
    return;
  }
  // Balanced contiguous partition: sizes differ by at most one and depend
  // only on (total, chunks).
  const int64_t base = total / chunks;
  const int64_t extra = total % chunks;
  std::vector<std::pair<int64_t, int64_t>> ranges;
  ranges.reserve(chunks);
  int64_t begin = 0;
  for (int c = 0; c < chunks; ++c) {
    const int64_t len = base + (c < extra ? 1 : 0);
    ranges.emplace_back(begin, begin + len);
    begin += len;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto guarded = [&](int64_t b, int64_t e, int c) {
    try {
      fn(b, e, c);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(chunks - 1);
  for (int c = 1; c < chunks; ++c)
    threads.emplace_back(guarded, ranges[c].first, ranges[c].second, c);
  guarded(ranges[0].first, ranges[0].second, 0);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cpds
