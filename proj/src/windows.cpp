#include "avtpids/windows.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <random>

#include "avtpids/errors.hpp"

namespace avtpids {

namespace {

constexpr char kReplayMagic[8] = {'A', 'V', 'T', 'P', 'R', 'S', 'E', 'T'};
constexpr char kCacheMagic[8] = {'A', 'V', 'T', 'P', 'W', 'C', 'A', 'H'};
constexpr std::uint32_t kFormatVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    throw IoError("cannot open " + path.string());
  }
  return f;
}

void write_bytes(std::FILE* f, const void* data, std::size_t n,
                 const std::filesystem::path& path) {
  if (std::fwrite(data, 1, n, f) != n) {
    throw IoError("failed writing " + path.string());
  }
}

void read_bytes(std::FILE* f, void* data, std::size_t n,
                const std::filesystem::path& path) {
  if (std::fread(data, 1, n, f) != n) {
    throw FormatError("unexpected end of file in " + path.string());
  }
}

void write_u64(std::FILE* f, std::uint64_t v, const std::filesystem::path& path) {
  std::uint8_t buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
  write_bytes(f, buf, 8, path);
}

std::uint64_t read_u64(std::FILE* f, const std::filesystem::path& path) {
  std::uint8_t buf[8];
  read_bytes(f, buf, 8, path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void ReplaySet::save(const std::filesystem::path& path) const {
  FilePtr f = open_file(path, "wb");
  write_bytes(f.get(), kReplayMagic, 8, path);
  write_u64(f.get(), kFormatVersion, path);
  write_u64(f.get(), members_.size(), path);
  for (const FeatureVector& fv : members_) {
    write_bytes(f.get(), fv.data(), fv.size(), path);
  }
}

ReplaySet ReplaySet::load(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  char magic[8];
  read_bytes(f.get(), magic, 8, path);
  if (std::memcmp(magic, kReplayMagic, 8) != 0) {
    throw FormatError("not a replay-set file: " + path.string());
  }
  if (read_u64(f.get(), path) != kFormatVersion) {
    throw FormatError("unsupported replay-set version in " + path.string());
  }
  const std::uint64_t count = read_u64(f.get(), path);
  ReplaySet set;
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureVector fv;
    read_bytes(f.get(), fv.data(), fv.size(), path);
    set.insert(fv);
  }
  return set;
}

void validate_window_length(std::size_t w) {
  if (w != 8 && w != 16 && w != 24 && w != 32 && w != 40) {
    throw InvalidArgumentError("window length must be one of 8/16/24/32/40, got " +
                               std::to_string(w));
  }
}

WindowSet build_windows(std::vector<FeatureVector> features, std::size_t w) {
  validate_window_length(w);
  if (features.size() < w) {
    throw InvalidArgumentError("insufficient data: " + std::to_string(features.size()) +
                               " packets cannot fill a window of " + std::to_string(w));
  }
  WindowSet set;
  set.w = w;
  set.features = std::move(features);
  set.labels.assign(set.count(), 0);
  return set;
}

WindowSet build_windows(const std::vector<AvtpPacket>& packets, std::size_t w) {
  std::vector<FeatureVector> features;
  features.reserve(packets.size());
  for (const AvtpPacket& p : packets) features.push_back(p.features);
  return build_windows(std::move(features), w);
}

WindowView window(const WindowSet& set, std::size_t k) {
  if (k >= set.count()) {
    throw InvalidArgumentError("window index " + std::to_string(k) + " out of range (" +
                               std::to_string(set.count()) + " windows)");
  }
  return WindowView{k, set.w, set.features.data() + k,
                    k < set.labels.size() ? set.labels[k] : 0};
}

int label_window(const WindowView& win, const ReplaySet& replay) {
  if (replay.empty()) {
    throw InvalidArgumentError("replay set is empty; labels would be undefined");
  }
  for (std::size_t r = 0; r < win.w; ++r) {
    if (replay.contains(win.rows[r])) return 1;
  }
  return 0;
}

void label_windows(WindowSet& set, const ReplaySet& replay) {
  if (replay.empty()) {
    throw InvalidArgumentError("replay set is empty; labels would be undefined");
  }
  // The naive per-window scan is O(count·w); marking matching rows once and
  // keeping a running count over the sliding window is O(N).
  const std::size_t n = set.features.size();
  std::vector<std::uint8_t> hit(n);
  for (std::size_t i = 0; i < n; ++i) {
    hit[i] = replay.contains(set.features[i]) ? 1 : 0;
  }
  std::size_t inside = 0;
  for (std::size_t i = 0; i < set.w; ++i) inside += hit[i];
  set.labels.assign(set.count(), 0);
  for (std::size_t k = 0;; ++k) {
    set.labels[k] = inside > 0 ? 1 : 0;
    if (k + set.w >= n) break;
    inside += hit[k + set.w];
    inside -= hit[k];
  }
}

FloatMatrix to_image(const WindowView& win) {
  FloatMatrix m;
  m.rows = win.w;
  m.cols = kFeatureBytes;
  m.data.resize(win.w * kFeatureBytes);
  for (std::size_t r = 0; r < win.w; ++r) {
    for (std::size_t c = 0; c < kFeatureBytes; ++c) {
      m.data[r * kFeatureBytes + c] = win.rows[r][c] / 255.0;
    }
  }
  return m;
}

std::vector<double> to_flat(const WindowView& win) {
  return to_image(win).data;
}

FloatMatrix flat_matrix(const WindowSet& set, const std::vector<std::size_t>& indices) {
  FloatMatrix m;
  m.rows = indices.size();
  m.cols = set.w * kFeatureBytes;
  m.data.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const WindowView win = window(set, indices[i]);
    for (std::size_t r = 0; r < win.w; ++r) {
      for (std::size_t c = 0; c < kFeatureBytes; ++c) {
        m.data[i * m.cols + r * kFeatureBytes + c] = win.rows[r][c] / 255.0;
      }
    }
  }
  return m;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    std::size_t count, double fraction, std::uint64_t seed) {
  if (count == 0) {
    throw InvalidArgumentError("cannot split an empty window set");
  }
  if (!(fraction > 0.0) || !(fraction < 1.0)) {
    throw InvalidArgumentError("split fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count)));
  n_train = std::clamp<std::size_t>(n_train, 1, count - 1);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

void save_window_cache(const WindowSet& set, const std::filesystem::path& path) {
  FilePtr f = open_file(path, "wb");
  write_bytes(f.get(), kCacheMagic, 8, path);
  write_u64(f.get(), kFormatVersion, path);
  write_u64(f.get(), set.w, path);
  write_u64(f.get(), set.features.size(), path);
  if (!set.labels.empty()) {
    write_bytes(f.get(), set.labels.data(), set.labels.size(), path);
  }
  for (const FeatureVector& fv : set.features) {
    write_bytes(f.get(), fv.data(), fv.size(), path);
  }
}

WindowSet load_window_cache(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  char magic[8];
  read_bytes(f.get(), magic, 8, path);
  if (std::memcmp(magic, kCacheMagic, 8) != 0) {
    throw FormatError("not a window-cache file: " + path.string());
  }
  if (read_u64(f.get(), path) != kFormatVersion) {
    throw FormatError("unsupported window-cache version in " + path.string());
  }
  const std::uint64_t w = read_u64(f.get(), path);
  const std::uint64_t n = read_u64(f.get(), path);
  validate_window_length(w);
  if (n < w) {
    throw FormatError("window cache holds fewer rows than one window: " + path.string());
  }
  WindowSet set;
  set.w = w;
  set.labels.resize(n - w + 1);
  read_bytes(f.get(), set.labels.data(), set.labels.size(), path);
  set.features.resize(n);
  for (auto& fv : set.features) {
    read_bytes(f.get(), fv.data(), fv.size(), path);
  }
  for (std::uint8_t l : set.labels) {
    if (l > 1) throw FormatError("window cache labels must be 0/1: " + path.string());
  }
  return set;
}

}  // namespace avtpids
