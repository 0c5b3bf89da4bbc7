#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace parasent {

// Unit-normalized vectors with dense ids 0..size-1. Zero vectors are kept
// as zero and flagged; they score 0 against every query.
class EmbeddingIndex {
 public:
  explicit EmbeddingIndex(std::size_t dim);

  std::size_t add(std::span<const float> v);
  void reserve(std::size_t n);

  std::size_t size() const { return zero_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return zero_.empty(); }
  std::span<const float> vector(std::size_t id) const {
    return {data_.data() + id * dim_, dim_};
  }
  bool is_zero(std::size_t id) const { return zero_[id] != 0; }

 private:
  std::size_t dim_;
  std::vector<float> data_;
  std::vector<std::uint8_t> zero_;
};

struct ScanOptions {
  std::size_t threads = 1;  // 1 is the deterministic reference path
};

struct Neighbor {
  std::size_t id = 0;
  double similarity = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Cosine similarity of one stored vector to a unit query.
double similarity_to(const EmbeddingIndex& index, std::size_t id, std::span<const float> unit_query);

// Copy of v scaled to unit length (zero stays zero).
std::vector<float> normalized(std::span<const float> v);

// Exact top-k by cosine, descending, ties by ascending id. Shards are
// scanned in parallel and merged deterministically, so the result does not
// depend on the thread count.
std::vector<Neighbor> topk_similar(const EmbeddingIndex& index, std::span<const float> query,
                                   std::size_t k, const ScanOptions& opts = {});

struct Histogram {
  double bin_width = 0.0;
  std::vector<std::uint64_t> counts;

  std::size_t bins() const { return counts.size(); }
  double low(std::size_t i) const { return -1.0 + double(i) * bin_width; }
  double high(std::size_t i) const { return i + 1 == counts.size() ? 1.0 : low(i + 1); }
  std::uint64_t total() const;

  // bin_low,bin_high,count
  void write_csv(std::ostream& out) const;
};

// Counts of cosine similarities over [-1, 1]. bin_width must divide 2 to
// within 1e-9. Values are clamped to [-1, 1]; 1.0 falls in the top bin.
Histogram similarity_histogram(const EmbeddingIndex& index, std::span<const float> query,
                               double bin_width, const ScanOptions& opts = {});
Histogram similarity_histogram_bins(const EmbeddingIndex& index, std::span<const float> query,
                                    std::size_t bins, const ScanOptions& opts = {});

}  // namespace parasent
