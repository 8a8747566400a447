#pragma once

#include <ctime>

namespace lmpick {

// CPU time consumed by the calling thread. Runs are pinned to one thread, so
// this equals the run's CPU cost even when several runs share the process.
inline double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

class CpuStopwatch {
 public:
  CpuStopwatch() : start_(thread_cpu_seconds()) {}
  double elapsed() const { return thread_cpu_seconds() - start_; }

 private:
  double start_;
};

}  // namespace lmpick
