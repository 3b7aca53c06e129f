#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <utility>
#include <vector>

#include "avtpids/types.hpp"

namespace avtpids {

// The set R of replayed feature vectors.  Membership is exact byte equality
// over the 58-octet prefix.
class ReplaySet {
 public:
  void insert(const FeatureVector& fv) { members_.insert(fv); }
  bool contains(const FeatureVector& fv) const { return members_.count(fv) != 0; }
  bool empty() const { return members_.empty(); }
  std::size_t size() const { return members_.size(); }

  // Members in ascending byte order; the on-disk layout uses this order.
  std::vector<FeatureVector> members() const {
    return {members_.begin(), members_.end()};
  }

  void save(const std::filesystem::path& path) const;
  static ReplaySet load(const std::filesystem::path& path);

 private:
  std::set<FeatureVector> members_;
};

// A windowed view over a packet sequence: N feature rows yield N-w+1
// windows of w consecutive rows each (slide 1).  Labels are per window.
struct WindowSet {
  std::size_t w = 0;
  std::vector<FeatureVector> features;   // row r = packet r's 58-byte prefix
  std::vector<std::uint8_t> labels;      // one per window, 0 normal / 1 abnormal

  std::size_t count() const {
    return features.size() + 1 >= w + 1 ? features.size() - w + 1 : 0;
  }
};

// Lightweight view of one window: w consecutive feature rows.
struct WindowView {
  std::size_t start = 0;
  std::size_t w = 0;
  const FeatureVector* rows = nullptr;  // points at rows[0..w)
  int label = 0;
};

// Throws InvalidArgumentError unless w ∈ {8,16,24,32,40}.
void validate_window_length(std::size_t w);

// Builds the sliding windows over the packets' feature rows.  Labels start
// all-zero.  Throws when w is invalid or fewer than w packets are given.
WindowSet build_windows(const std::vector<AvtpPacket>& packets, std::size_t w);
WindowSet build_windows(std::vector<FeatureVector> features, std::size_t w);

WindowView window(const WindowSet& set, std::size_t k);

// 1 iff any of the window's rows is a member of R.  R must be non-empty.
int label_window(const WindowView& win, const ReplaySet& replay);

// Labels every window of the set against R (non-empty).
void label_windows(WindowSet& set, const ReplaySet& replay);

// w×58 matrix of the window's bytes scaled by 1/255 into [0,1].
FloatMatrix to_image(const WindowView& win);

// Row-major flattening of to_image: length w·58.
std::vector<double> to_flat(const WindowView& win);

// Flattened encodings of the selected windows, one per row (w·58 columns).
FloatMatrix flat_matrix(const WindowSet& set, const std::vector<std::size_t>& indices);

// Deterministic disjoint exhaustive split of [0, count) into (train, val)
// index lists, each sorted ascending.  fraction ∈ (0,1) is the train share.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    std::size_t count, double fraction, std::uint64_t seed);

// Binary cache: header {w, row count}, then labels, then raw feature rows.
void save_window_cache(const WindowSet& set, const std::filesystem::path& path);
WindowSet load_window_cache(const std::filesystem::path& path);

}  // namespace avtpids
