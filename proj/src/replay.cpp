#include "clb/replay.hpp"

#include "clb/error.hpp"

namespace clb {

void Trajectory::validate() const {
  if (steps.empty()) throw ValidationError("empty trajectory");
  for (std::size_t i = 0; i + 1 < steps.size(); ++i)
    if (steps[i].done) throw ValidationError("done flag before the end of a trajectory");
  if (steps.back().done && bootstrap) throw ValidationError("terminal trajectory with bootstrap");
  if (!steps.back().done && !bootstrap)
    throw ValidationError("non-terminal trajectory without bootstrap");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity_ == 0) throw ValidationError("replay capacity must be positive");
}

void ReplayBuffer::insert(Trajectory traj) {
  ++seen_;
  if (items_.size() < capacity_) {
    items_.push_back(std::move(traj));
    return;
  }
  auto j = rng_.below(seen_);
  if (j < capacity_) items_[j] = std::move(traj);
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n) {
  std::vector<std::size_t> out;
  if (items_.empty()) return out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng_.below(items_.size()));
  return out;
}

std::vector<const Trajectory*> ReplayBuffer::sample(std::size_t n) {
  std::vector<const Trajectory*> out;
  for (auto i : sample_indices(n)) out.push_back(&items_[i]);
  return out;
}

}  // namespace clb
