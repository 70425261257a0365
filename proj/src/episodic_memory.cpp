#include "emc/episodic_memory.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace emc {

ProjectionMatrix ProjectionMatrix::make(int k, int state_width, uint64_t seed) {
  require(k > 0 && state_width > 0, "projection: non-positive dimensions");
  ProjectionMatrix p;
  p.m = Tensor2(k, state_width);
  Rng rng(seed, 0x70726f6aULL);
  for (double& v : p.m.data) v = rng.normal();
  return p;
}

std::vector<double> ProjectionMatrix::project(const std::vector<double>& state) const {
  require(static_cast<int>(state.size()) == m.cols, "projection: state width mismatch");
  std::vector<double> key(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = &m.data[static_cast<size_t>(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) acc += row[c] * state[c];
    key[r] = acc;
  }
  return key;
}

namespace {
inline uint64_t mix64(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}
}  // namespace

MemoryTable::MemoryTable(int k, double delta, double gamma, size_t capacity)
    : k_(k), delta_(delta), gamma_(gamma), capacity_(capacity) {
  require(k > 0, "memory: k must be positive");
  require(delta >= 0.0, "memory: delta must be >= 0");
  require(gamma >= 0.0 && gamma < 1.0, "memory: gamma must be in [0,1)");
  require(capacity > 0, "memory: capacity must be positive");
}

uint64_t MemoryTable::exact_hash(const std::vector<double>& key) const {
  uint64_t h = 0x243f6a8885a308d3ULL;
  for (double v : key) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h = mix64(h, bits);
  }
  return h;
}

uint64_t MemoryTable::cell_hash(const std::vector<double>& key) const {
  uint64_t h = 0x452821e638d01377ULL;
  for (double v : key) {
    auto cell = static_cast<int64_t>(std::floor(v / delta_));
    h = mix64(h, static_cast<uint64_t>(cell));
  }
  return h;
}

std::optional<MemoryTable::Candidate> MemoryTable::find_match(
    const std::vector<double>& key) const {
  require(static_cast<int>(key.size()) == k_, "memory: key length mismatch");

  // exact hit first (covers delta = 0 and the common revisit case)
  auto it = exact_.find(exact_hash(key));
  if (it != exact_.end()) {
    for (size_t slot : it->second)
      if (entries_[slot].key == key) return Candidate{slot, 0.0};
  }
  if (delta_ <= 0.0) return std::nullopt;

  // probe the 3^k grid cells that can contain a key within L2 < delta
  std::optional<Candidate> best;
  std::vector<int64_t> base(k_);
  for (int d = 0; d < k_; ++d) base[d] = static_cast<int64_t>(std::floor(key[d] / delta_));
  const int probes = 1;
  std::vector<int> off(k_, -probes);
  for (;;) {
    uint64_t h = 0x452821e638d01377ULL;
    for (int d = 0; d < k_; ++d) h = mix64(h, static_cast<uint64_t>(base[d] + off[d]));
    auto cit = cells_.find(h);
    if (cit != cells_.end()) {
      for (size_t slot : cit->second) {
        const auto& ek = entries_[slot].key;
        double d2 = 0.0;
        for (int d = 0; d < k_; ++d) {
          double diff = ek[d] - key[d];
          d2 += diff * diff;
        }
        if (d2 < delta_ * delta_ && (!best || d2 < best->dist2)) best = Candidate{slot, d2};
      }
    }
    int d = 0;
    while (d < k_ && off[d] == probes) off[d++] = -probes;
    if (d == k_) break;
    ++off[d];
  }
  return best;
}

std::optional<double> MemoryTable::lookup(const std::vector<double>& key) const {
  auto c = find_match(key);
  if (!c) return std::nullopt;
  return entries_[c->slot].h;
}

void MemoryTable::index_insert(size_t slot) {
  exact_[exact_hash(entries_[slot].key)].push_back(slot);
  if (delta_ > 0.0) cells_[cell_hash(entries_[slot].key)].push_back(slot);
}

void MemoryTable::index_remove(size_t slot) {
  auto erase_from = [&](std::unordered_map<uint64_t, std::vector<size_t>>& idx, uint64_t h) {
    auto it = idx.find(h);
    if (it == idx.end()) return;
    auto& v = it->second;
    for (size_t i = 0; i < v.size(); ++i) {
      if (v[i] == slot) {
        v.erase(v.begin() + i);
        break;
      }
    }
    if (v.empty()) idx.erase(it);
  };
  erase_from(exact_, exact_hash(entries_[slot].key));
  if (delta_ > 0.0) erase_from(cells_, cell_hash(entries_[slot].key));
}

void MemoryTable::insert_entry(const std::vector<double>& key, double h) {
  if (entries_.size() < capacity_) {
    entries_.push_back({key, h, ++clock_});
    index_insert(entries_.size() - 1);
    return;
  }
  // at capacity: evict the entry with the oldest last-update stamp
  size_t victim = 0;
  for (size_t i = 1; i < entries_.size(); ++i)
    if (entries_[i].last_update < entries_[victim].last_update) victim = i;
  index_remove(victim);
  entries_[victim] = {key, h, ++clock_};
  index_insert(victim);
}

void MemoryTable::update_from_episode(const std::vector<std::vector<double>>& keys,
                                      const std::vector<double>& rewards) {
  require(keys.size() == rewards.size(), "memory: keys/rewards length mismatch");
  const size_t T = keys.size();
  std::vector<double> ret(T, 0.0);
  double acc = 0.0;
  for (size_t t = T; t-- > 0;) {
    acc = rewards[t] + gamma_ * acc;
    ret[t] = acc;
  }
  for (size_t t = 0; t < T; ++t) {
    auto c = find_match(keys[t]);
    if (c) {
      MemoryEntry& e = entries_[c->slot];
      double updated = std::max(e.h, ret[t]);
      if (updated < e.h) throw std::logic_error("memory: H decreased");  // unreachable guard
      e.h = updated;
      e.last_update = ++clock_;
    } else {
      insert_entry(keys[t], ret[t]);
    }
  }
}

std::optional<double> MemoryTable::memory_target(double reward,
                                                 const std::vector<double>& next_key,
                                                 bool terminal) const {
  if (terminal) return reward;
  auto h = lookup(next_key);
  if (!h) return std::nullopt;
  return reward + gamma_ * (*h);
}

void MemoryTable::save_csv(const std::string& path) const {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("memory: cannot open " + path);
  for (const auto& e : entries_) {
    for (double v : e.key) std::fprintf(f, "%.17g,", v);
    std::fprintf(f, "%.17g\n", e.h);
  }
  std::fclose(f);
}

}  // namespace emc
