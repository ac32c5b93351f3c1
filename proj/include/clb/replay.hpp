#pragma once

#include <cstdint>
#include <vector>

#include "clb/rng.hpp"
#include "clb/trajectory.hpp"

namespace clb {

// Reservoir-sampled trajectory store: once full, the i-th insertion replaces a
// uniformly chosen slot with probability capacity / i.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::uint64_t seen() const { return seen_; }
  const Trajectory& at(std::size_t i) const { return items_.at(i); }

  void insert(Trajectory traj);
  // Uniform with replacement; returns stored indices.
  std::vector<std::size_t> sample_indices(std::size_t n);
  std::vector<const Trajectory*> sample(std::size_t n);

 private:
  std::size_t capacity_;
  std::vector<Trajectory> items_;
  std::uint64_t seen_ = 0;
  Rng rng_;
};

}  // namespace clb
