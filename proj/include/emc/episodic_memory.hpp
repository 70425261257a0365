#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "emc/rng.hpp"
#include "emc/tensor.hpp"

namespace emc {

// Fixed Gaussian random projection of global states to low-dimensional keys.
// Drawn once per run; immutable afterwards.
struct ProjectionMatrix {
  Tensor2 m;  // k x state_width

  static ProjectionMatrix make(int k, int state_width, uint64_t seed);

  int k() const { return m.rows; }
  int state_width() const { return m.cols; }
  std::vector<double> project(const std::vector<double>& state) const;
};

struct MemoryEntry {
  std::vector<double> key;
  double h = 0.0;             // best remembered discounted return-to-go
  long long last_update = 0;  // monotone update counter, used for eviction
};

// Bounded table of best remembered returns keyed by projected states.
// A query key matches the nearest stored key when their L2 distance is
// strictly below delta (an exact key always matches itself, so delta = 0
// degenerates to an exact map).
class MemoryTable {
 public:
  MemoryTable(int k, double delta, double gamma, size_t capacity);

  std::optional<double> lookup(const std::vector<double>& key) const;

  // Walk the episode backwards accumulating discounted returns-to-go and
  // apply the max-update rule to each visited state's entry.
  void update_from_episode(const std::vector<std::vector<double>>& keys,
                           const std::vector<double>& rewards);

  // One-step target: r for terminal transitions, r + gamma * H(key(s'))
  // when the next state is remembered, absent otherwise.
  std::optional<double> memory_target(double reward, const std::vector<double>& next_key,
                                      bool terminal) const;

  size_t size() const { return entries_.size(); }
  size_t capacity() const { return capacity_; }
  double gamma() const { return gamma_; }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

  void save_csv(const std::string& path) const;

 private:
  struct Candidate {
    size_t slot;
    double dist2;
  };

  uint64_t cell_hash(const std::vector<double>& key) const;
  uint64_t exact_hash(const std::vector<double>& key) const;
  std::optional<Candidate> find_match(const std::vector<double>& key) const;
  void index_insert(size_t slot);
  void index_remove(size_t slot);
  void insert_entry(const std::vector<double>& key, double h);

  int k_;
  double delta_;
  double gamma_;
  size_t capacity_;
  long long clock_ = 0;
  std::vector<MemoryEntry> entries_;
  std::unordered_map<uint64_t, std::vector<size_t>> exact_;   // bit-exact key hash
  std::unordered_map<uint64_t, std::vector<size_t>> cells_;   // delta-sized grid buckets
};

}  // namespace emc
