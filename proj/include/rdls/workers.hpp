#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "rdls/error.hpp"

namespace rdls {

/// Fixed set of persistent worker threads, one per subdomain.
///
/// `run(task)` hands `task(worker_id)` to every worker and blocks until all
/// have finished; this is the only synchronization point. Workers exchange
/// data by publishing into shared buffers before `run` returns and reading
/// them in the next `run`. If tasks throw, the exception of the lowest
/// worker id is rethrown in the caller.
class WorkerPool {
 public:
  explicit WorkerPool(int n) {
    if (n < 1) throw ArgumentError("WorkerPool: need at least one worker");
    errors_.resize(n);
    threads_.reserve(n);
    for (int i = 0; i < n; ++i) threads_.emplace_back([this, i] { loop(i); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
      ++generation_;
    }
    start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const noexcept { return static_cast<int>(threads_.size()); }

  void run(const std::function<void(int)>& task) {
    {
      std::unique_lock lock(mu_);
      task_ = &task;
      pending_ = size();
      ++generation_;
    }
    start_.notify_all();
    std::unique_lock lock(mu_);
    done_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
    for (auto& e : errors_)
      if (e) {
        auto err = e;
        for (auto& x : errors_) x = nullptr;
        std::rethrow_exception(err);
      }
  }

 private:
  void loop(int id) {
    unsigned long seen = 0;
    for (;;) {
      const std::function<void(int)>* task = nullptr;
      {
        std::unique_lock lock(mu_);
        start_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        task = task_;
      }
      try {
        (*task)(id);
      } catch (...) {
        errors_[id] = std::current_exception();
      }
      {
        std::lock_guard lock(mu_);
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  std::mutex mu_;
  std::condition_variable start_, done_;
  std::vector<std::thread> threads_;
  std::vector<std::exception_ptr> errors_;
  const std::function<void(int)>* task_ = nullptr;
  unsigned long generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

}  // namespace rdls
