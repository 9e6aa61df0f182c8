#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace uniap {

// Fixed-size pool of worker threads. The calling thread takes part in every
// parallel_for, so a pool of size 1 spawns no threads at all.
//
// Work is handed out in chunks from a shared counter. Callers must write
// results only to slots owned by the indices they were given; that keeps
// outputs independent of the worker count and of scheduling order.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const noexcept { return threads_.size() + 1; }

  using RangeFn = std::function<void(std::size_t begin, std::size_t end)>;

  // Calls fn on disjoint [begin, end) ranges covering [0, n). Blocks until
  // all ranges are done. The first exception thrown by fn is rethrown here.
  // Nested calls from inside fn run inline.
  void parallel_for(std::size_t n, const RangeFn& fn, std::size_t grain = 1);

 private:
  void worker_loop();
  void drain();

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  std::size_t generation_ = 0;
  std::size_t active_ = 0;
  bool stop_ = false;

  // Current job; guarded by mutex_ for publication, next_ is claimed under it.
  const RangeFn* job_ = nullptr;
  std::size_t job_n_ = 0;
  std::size_t job_grain_ = 1;
  std::size_t next_ = 0;
  std::exception_ptr error_;
};

// Runs fn over [0, n) on the pool, or inline when pool is null.
inline void parallel_for(WorkerPool* pool, std::size_t n,
                         const WorkerPool::RangeFn& fn, std::size_t grain = 1) {
  if (n == 0) return;
  if (pool == nullptr || pool->size() == 1 || n <= grain) {
    fn(0, n);
    return;
  }
  pool->parallel_for(n, fn, grain);
}

}  // namespace uniap
