#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "utopk/relation.hpp"

namespace utopk {

// Accurate but expensive ground-truth scorer. Scores are in score units;
// callers map them onto their grid. Implementations must be deterministic per
// frame id.
class Oracle {
 public:
  virtual ~Oracle() = default;

  // One batch inference. An empty batch is a no-op and is not counted.
  std::vector<double> score(std::span<const FrameId> frame_ids) {
    if (frame_ids.empty()) {
      return {};
    }
    auto out = score_batch(frame_ids);
    invocations_.fetch_add(frame_ids.size(), std::memory_order_relaxed);
    batches_.fetch_add(1, std::memory_order_relaxed);
    return out;
  }

  // Read-ahead hint for frames likely to be requested soon.
  virtual void prefetch(std::span<const FrameId> /*frame_ids*/) {}

  // Frames scored so far.
  std::uint64_t invocations() const { return invocations_.load(std::memory_order_relaxed); }
  std::uint64_t batches() const { return batches_.load(std::memory_order_relaxed); }
  virtual double cost_per_frame() const { return 1.0; }
  double cost() const { return static_cast<double>(invocations()) * cost_per_frame(); }

 protected:
  virtual std::vector<double> score_batch(std::span<const FrameId> frame_ids) = 0;

 private:
  std::atomic<std::uint64_t> invocations_{0};
  std::atomic<std::uint64_t> batches_{0};
};

}  // namespace utopk
