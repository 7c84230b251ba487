#include "neuroscope/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace neuroscope {

namespace {

std::atomic<std::size_t>& jobs_setting() {
  static std::atomic<std::size_t> jobs{std::max<std::size_t>(1, std::thread::hardware_concurrency())};
  return jobs;
}

}  // namespace

std::size_t default_jobs() { return jobs_setting().load(); }

void set_default_jobs(std::size_t jobs) {
  jobs_setting().store(jobs == 0 ? std::max<std::size_t>(1, std::thread::hardware_concurrency()) : jobs);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t jobs) {
  if (jobs == 0) jobs = default_jobs();
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace neuroscope
