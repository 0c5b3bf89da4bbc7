#include "parasent/search.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <thread>

namespace parasent {
namespace {

// Splits [0, n) into contiguous shards and runs fn(shard, lo, hi) on each.
template <class Fn>
void for_each_shard(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n == 0 ? 1 : n));
  if (threads == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t s = 0; s < threads; ++s) {
    const std::size_t lo = std::min(n, s * chunk);
    const std::size_t hi = std::min(n, lo + chunk);
    workers.emplace_back([&fn, s, lo, hi] { fn(s, lo, hi); });
  }
}

// Orders better neighbors first.
bool better(const Neighbor& a, const Neighbor& b) {
  return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
}

}  // namespace

EmbeddingIndex::EmbeddingIndex(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("index dimension must be >= 1");
}

void EmbeddingIndex::reserve(std::size_t n) {
  data_.reserve(n * dim_);
  zero_.reserve(n);
}

std::size_t EmbeddingIndex::add(std::span<const float> v) {
  if (v.size() != dim_) throw std::invalid_argument("vector dimension does not match index");
  double nn = 0.0;
  for (float x : v) nn += double(x) * double(x);
  const double norm = std::sqrt(nn);
  const bool zero = !(norm > 0.0);
  for (float x : v) data_.push_back(zero ? 0.0f : static_cast<float>(double(x) / norm));
  zero_.push_back(zero ? 1 : 0);
  return zero_.size() - 1;
}

std::vector<float> normalized(std::span<const float> v) {
  double nn = 0.0;
  for (float x : v) nn += double(x) * double(x);
  std::vector<float> out(v.begin(), v.end());
  if (nn > 0.0) {
    const double norm = std::sqrt(nn);
    for (auto& x : out) x = static_cast<float>(double(x) / norm);
  }
  return out;
}

double similarity_to(const EmbeddingIndex& index, std::size_t id, std::span<const float> q) {
  const auto v = index.vector(id);
  double s = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) s += double(v[k]) * double(q[k]);
  return s;
}

std::vector<Neighbor> topk_similar(const EmbeddingIndex& index, std::span<const float> query,
                                   std::size_t k, const ScanOptions& opts) {
  if (index.empty()) throw std::invalid_argument("topk_similar: empty index");
  if (k == 0) throw std::invalid_argument("topk_similar: k must be >= 1");
  if (query.size() != index.dim()) throw std::invalid_argument("query dimension mismatch");
  const auto q = normalized(query);
  k = std::min(k, index.size());

  const std::size_t shards = std::max<std::size_t>(1, std::min(opts.threads, index.size()));
  std::vector<std::vector<Neighbor>> partial(shards);
  for_each_shard(index.size(), shards, [&](std::size_t s, std::size_t lo, std::size_t hi) {
    // Min-heap on "better": top() is the worst kept neighbor.
    auto cmp = [](const Neighbor& a, const Neighbor& b) { return better(a, b); };
    std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(cmp)> heap(cmp);
    for (std::size_t id = lo; id < hi; ++id) {
      Neighbor cand{id, similarity_to(index, id, q)};
      if (heap.size() < k) {
        heap.push(cand);
      } else if (better(cand, heap.top())) {
        heap.pop();
        heap.push(cand);
      }
    }
    auto& out = partial[s];
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
  });

  std::vector<Neighbor> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), better);
  merged.resize(std::min(k, merged.size()));
  return merged;
}

std::uint64_t Histogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

void Histogram::write_csv(std::ostream& out) const {
  const auto old = out.precision(12);
  out << "bin_low,bin_high,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i)
    out << low(i) << ',' << high(i) << ',' << counts[i] << '\n';
  out.precision(old);
}

Histogram similarity_histogram_bins(const EmbeddingIndex& index, std::span<const float> query,
                                    std::size_t bins, const ScanOptions& opts) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  if (query.size() != index.dim()) throw std::invalid_argument("query dimension mismatch");
  const auto q = normalized(query);
  Histogram h;
  h.bin_width = 2.0 / double(bins);
  h.counts.assign(bins, 0);

  const std::size_t shards = std::max<std::size_t>(1, std::min(opts.threads, index.size()));
  std::vector<std::vector<std::uint64_t>> partial(shards, std::vector<std::uint64_t>(bins, 0));
  for_each_shard(index.size(), shards, [&](std::size_t s, std::size_t lo, std::size_t hi) {
    auto& c = partial[s];
    for (std::size_t id = lo; id < hi; ++id) {
      const double sim = std::clamp(similarity_to(index, id, q), -1.0, 1.0);
      auto b = static_cast<std::size_t>(std::floor((sim + 1.0) / h.bin_width));
      c[std::min(b, bins - 1)] += 1;
    }
  });
  for (const auto& p : partial)
    for (std::size_t i = 0; i < bins; ++i) h.counts[i] += p[i];
  return h;
}

Histogram similarity_histogram(const EmbeddingIndex& index, std::span<const float> query,
                               double bin_width, const ScanOptions& opts) {
  if (!(bin_width > 0.0) || bin_width > 2.0)
    throw std::invalid_argument("bin width must be in (0, 2]");
  const double bins_real = 2.0 / bin_width;
  const double bins = std::round(bins_real);
  if (std::abs(bins * bin_width - 2.0) > 1e-9)
    throw std::invalid_argument("bin width must divide 2 evenly");
  return similarity_histogram_bins(index, query, static_cast<std::size_t>(bins), opts);
}

}  // namespace parasent
