#include "uniap/parallel.hpp"

#include <algorithm>

namespace uniap {

namespace {
thread_local bool tls_inside_pool = false;
}  // namespace

WorkerPool::WorkerPool(std::size_t workers) {
  const std::size_t extra = workers > 1 ? workers - 1 : 0;
  threads_.reserve(extra);
  for (std::size_t i = 0; i < extra; ++i) {
    threads_.emplace_back([this] { worker_loop(); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::drain() {
  const bool was_inside = tls_inside_pool;
  tls_inside_pool = true;
  for (;;) {
    std::size_t begin;
    std::size_t end;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (next_ >= job_n_ || error_) break;
      begin = next_;
      end = std::min(job_n_, begin + job_grain_);
      next_ = end;
    }
    try {
      (*job_)(begin, end);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }
  tls_inside_pool = was_inside;
}

void WorkerPool::worker_loop() {
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock<std::mutex> lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      ++active_;
    }
    drain();
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --active_;
    }
    done_.notify_all();
  }
}

void WorkerPool::parallel_for(std::size_t n, const RangeFn& fn,
                              std::size_t grain) {
  if (n == 0) return;
  if (threads_.empty() || tls_inside_pool) {
    fn(0, n);
    return;
  }
  // Aim for several chunks per worker so uneven ranges still balance.
  const std::size_t target = std::max<std::size_t>(1, n / (size() * 4));
  {
    std::lock_guard<std::mutex> lock(mutex_);
    job_ = &fn;
    job_n_ = n;
    job_grain_ = std::max(grain, target);
    next_ = 0;
    error_ = nullptr;
    ++generation_;
  }
  wake_.notify_all();
  drain();
  std::exception_ptr err;
  {
    std::unique_lock<std::mutex> lock(mutex_);
    // Workers only claim chunks while counted in active_, and this thread's
    // drain returns once every chunk is claimed (or an error stopped the job).
    done_.wait(lock, [&] { return active_ == 0; });
    job_ = nullptr;
    job_n_ = 0;
    err = error_;
    error_ = nullptr;
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace uniap
