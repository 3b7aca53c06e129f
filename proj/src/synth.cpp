#include "avtpids/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "avtpids/errors.hpp"

namespace avtpids {

namespace {

constexpr std::size_t kHeaderBytes = 42;  // MAC + 802.1Q + EtherType + AVTP header
constexpr std::int64_t kBaseEpochSec = 1600000000;
constexpr std::uint32_t kAvtpTimestampStep = 65536;  // ns per frame

// SplitMix64; all pseudo-random draws below derive from it so frame content
// is a pure function of (seed, ordinal).
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_of(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                      std::uint64_t b = 0) {
  return mix64(mix64(mix64(seed ^ tag) + a) + b);
}

double unit(std::uint64_t h) {  // in [0, 1)
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Tags for independent random sub-streams.
enum : std::uint64_t {
  kTagSceneLen = 0x5CE4E1,
  kTagSceneShort = 0x5C5047,
  kTagScenePhase = 0x50A53,
  kTagSceneBright = 0xB41647,
  kTagColumn = 0xC01D,
  kTagGroup = 0x6F07,
  kTagNoise = 0x401E,
  kTagNoisePhase = 0x4F15E,
  kTagInit = 0x1417,
};

struct ColumnParams {
  double base;
  double amp;
  int group;
};

// Content engine derived from one config; evaluates any absolute ordinal.
class StreamModel {
 public:
  explicit StreamModel(const StreamConfig& cfg) : cfg_(cfg) {
    if (cfg.frame_len < kFeatureBytes) {
      throw InvalidArgumentError("frame_len must be at least 58, got " +
                                 std::to_string(cfg.frame_len));
    }
    if (cfg.scene_len_min < 2 || cfg.scene_len_max < cfg.scene_len_min ||
        cfg.short_len_min < 2 || cfg.short_len_max < cfg.short_len_min) {
      throw InvalidArgumentError("scene length bounds are inconsistent");
    }
    for (int g = 0; g < 3; ++g) {
      const double u = unit(hash_of(cfg.seed, kTagGroup, static_cast<std::uint64_t>(g)));
      periods_[g] = kBasePeriods[g] * (0.9 + 0.2 * u);
    }
    columns_.resize(cfg.frame_len);
    for (std::size_t j = kHeaderBytes; j < cfg.frame_len; ++j) {
      ColumnParams& col = columns_[j];
      col.group = static_cast<int>(hash_of(cfg.seed, kTagGroup, j, 77) % 3);
      col.base = 70.0 + 115.0 * unit(hash_of(cfg.seed, kTagColumn, j, 1));
      col.amp = 28.0 + 36.0 * unit(hash_of(cfg.seed, kTagColumn, j, 2));
    }
    for (int k = 0; k < 3; ++k) {
      noise_phase_[k] = unit(hash_of(cfg.seed, kTagNoisePhase, static_cast<std::uint64_t>(k)));
    }
    seq0_ = static_cast<std::uint8_t>(hash_of(cfg.seed, kTagInit, 1));
    ts0_ = static_cast<std::uint32_t>(hash_of(cfg.seed, kTagInit, 2));
  }

  const std::vector<SceneSpan>& schedule(std::size_t end_index) const {
    while (scenes_.empty() || scenes_.back().start + scenes_.back().len < end_index) {
      const std::size_t i = scenes_.size();
      SceneSpan span;
      span.start = scenes_.empty() ? 0 : scenes_.back().start + scenes_.back().len;
      span.is_short =
          cfg_.short_scene_period > 0 &&
          hash_of(cfg_.seed, kTagSceneShort, i) % cfg_.short_scene_period == 0;
      const double u = unit(hash_of(cfg_.seed, kTagSceneLen, i));
      span.len = span.is_short
                     ? cfg_.short_len_min +
                           static_cast<std::size_t>(
                               u * static_cast<double>(cfg_.short_len_max - cfg_.short_len_min + 1))
                     : cfg_.scene_len_min +
                           static_cast<std::size_t>(
                               u * static_cast<double>(cfg_.scene_len_max - cfg_.scene_len_min + 1));
      scenes_.push_back(span);
    }
    return scenes_;
  }

  std::size_t scene_of(std::size_t n) const {
    schedule(n + 1);
    // Scenes only ever grow at the back; binary search by start.
    std::size_t lo = 0, hi = scenes_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi + 1) / 2;
      if (scenes_[mid].start <= n) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    return lo;
  }

  // Slowly drifting noise amplitude in byte steps (lognormal-like spread).
  double noise_amp(std::size_t n) const {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      s += std::sin(2.0 * std::numbers::pi *
                    (static_cast<double>(n) / kNoisePeriods[k] + noise_phase_[k]));
    }
    return std::exp(cfg_.jitter_log_center + cfg_.jitter_log_spread * (s / 3.0));
  }

  RawFrame frame(std::size_t n) const {
    RawFrame f;
    const std::uint64_t t_ns = static_cast<std::uint64_t>(n) * cfg_.period_ns;
    f.ts.sec = kBaseEpochSec + static_cast<std::int64_t>(t_ns / 1000000000ULL);
    f.ts.nsec = static_cast<std::int64_t>(t_ns % 1000000000ULL);
    // Keep timestamps exact under the microsecond-resolution capture writer.
    f.ts.nsec -= f.ts.nsec % 1000;

    auto& b = f.bytes;
    b.assign(cfg_.frame_len, 0);
    std::copy(cfg_.listener_mac.begin(), cfg_.listener_mac.end(), b.begin());
    std::copy(cfg_.talker_mac.begin(), cfg_.talker_mac.end(), b.begin() + 6);
    b[12] = 0x81;
    b[13] = 0x00;
    const std::uint16_t tci = static_cast<std::uint16_t>((cfg_.vlan_pcp & 0x7) << 13) |
                              (cfg_.vlan_vid & 0x0FFF);
    b[14] = static_cast<std::uint8_t>(tci >> 8);
    b[15] = static_cast<std::uint8_t>(tci);
    b[16] = 0x22;
    b[17] = 0xF0;
    b[18] = 0x03;  // compressed-video subtype (emulated)
    b[19] = 0x81;  // stream-id valid, version 0, media-clock restart bits
    b[20] = static_cast<std::uint8_t>((seq0_ + n) & 0xFF);
    b[21] = 0x00;
    std::copy(cfg_.stream_id.begin(), cfg_.stream_id.end(), b.begin() + 22);
    const std::uint32_t avtp_ts =
        ts0_ + static_cast<std::uint32_t>(n % 0x100000000ULL) * kAvtpTimestampStep;
    b[30] = static_cast<std::uint8_t>(avtp_ts >> 24);
    b[31] = static_cast<std::uint8_t>(avtp_ts >> 16);
    b[32] = static_cast<std::uint8_t>(avtp_ts >> 8);
    b[33] = static_cast<std::uint8_t>(avtp_ts);
    b[34] = 0x04;  // format information (static)
    b[35] = 0x01;
    b[36] = 0x02;
    b[37] = 0x20;
    const auto payload_len = static_cast<std::uint16_t>(cfg_.frame_len - kHeaderBytes);
    b[38] = static_cast<std::uint8_t>(payload_len >> 8);
    b[39] = static_cast<std::uint8_t>(payload_len);
    b[40] = 0x00;
    b[41] = 0x00;

    const std::size_t scene = scene_of(n);
    const double bright =
        -6.0 + 12.0 * unit(hash_of(cfg_.seed, kTagSceneBright, scene));
    double phase[3];
    for (int g = 0; g < 3; ++g) {
      phase[g] = unit(hash_of(cfg_.seed, kTagScenePhase, scene, static_cast<std::uint64_t>(g)));
    }
    const double amp_n = noise_amp(n);
    for (std::size_t j = kHeaderBytes; j < cfg_.frame_len; ++j) {
      const ColumnParams& col = columns_[j];
      const double carrier =
          std::sin(2.0 * std::numbers::pi *
                   (static_cast<double>(n) / periods_[col.group] + phase[col.group]));
      const double noise =
          amp_n * 1.732 * (2.0 * unit(hash_of(cfg_.seed, kTagNoise, n, j)) - 1.0);
      const double v = col.base + bright + col.amp * carrier + noise;
      b[j] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return f;
  }

 private:
  static constexpr double kBasePeriods[3] = {60.0, 110.0, 210.0};
  static constexpr double kNoisePeriods[3] = {701.0, 1131.0, 1789.0};

  StreamConfig cfg_;
  double periods_[3];
  double noise_phase_[3];
  std::vector<ColumnParams> columns_;
  std::uint8_t seq0_;
  std::uint32_t ts0_;
  mutable std::vector<SceneSpan> scenes_;
};

std::string mac_to_string(const std::array<std::uint8_t, 6>& mac) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2],
                mac[3], mac[4], mac[5]);
  return buf;
}

std::string id_to_string(const std::array<std::uint8_t, 8>& id) {
  std::string s;
  char buf[4];
  for (std::size_t i = 0; i < id.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%02x", id[i]);
    s += buf;
    if (i + 1 < id.size()) s += ':';
  }
  return s;
}

std::vector<std::uint8_t> parse_hex_bytes(const std::string& text, std::size_t expected,
                                          const std::string& key) {
  std::vector<std::uint8_t> out;
  std::string part;
  std::stringstream ss(text);
  while (std::getline(ss, part, ':')) {
    if (part.size() != 2 || !std::isxdigit(static_cast<unsigned char>(part[0])) ||
        !std::isxdigit(static_cast<unsigned char>(part[1]))) {
      throw FormatError("bad hex byte '" + part + "' for key " + key);
    }
    out.push_back(static_cast<std::uint8_t>(std::stoul(part, nullptr, 16)));
  }
  if (out.size() != expected) {
    throw FormatError("key " + key + " needs " + std::to_string(expected) + " bytes, got " +
                      std::to_string(out.size()));
  }
  return out;
}

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    if (eq == std::string::npos) {
      if (!trim(line).empty()) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
      }
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

}  // namespace

std::vector<SceneSpan> scene_schedule(const StreamConfig& cfg, std::size_t end_index) {
  StreamModel model(cfg);
  return model.schedule(end_index);
}

std::vector<RawFrame> gen_stream(const StreamConfig& cfg) {
  StreamModel model(cfg);
  std::vector<RawFrame> frames;
  frames.reserve(cfg.frame_count);
  for (std::size_t i = 0; i < cfg.frame_count; ++i) {
    frames.push_back(model.frame(cfg.start_index + i));
  }
  return frames;
}

InjectResult inject_replay(std::span<const RawFrame> stream, const AttackPlan& plan) {
  if (plan.segment_len == 0) {
    throw InvalidArgumentError("replay segment must contain at least one frame");
  }
  const std::size_t seg_end = plan.segment_start + plan.segment_len;
  if (seg_end > stream.size()) {
    throw InvalidArgumentError("replay segment exceeds the stream");
  }
  std::size_t prev = seg_end;
  bool first = true;
  for (std::size_t p : plan.positions) {
    if (p < seg_end) {
      throw InvalidArgumentError("injection position " + std::to_string(p) +
                                 " precedes the end of the replay segment");
    }
    if (p > stream.size()) {
      throw InvalidArgumentError("injection position " + std::to_string(p) +
                                 " lies beyond the stream end (" +
                                 std::to_string(stream.size()) + ")");
    }
    if (!first && p <= prev) {
      throw InvalidArgumentError("injection positions must be strictly increasing");
    }
    prev = p;
    first = false;
  }

  InjectResult result;
  result.frames.reserve(stream.size() + plan.positions.size() * plan.segment_len);
  if (!plan.positions.empty()) {
    // R holds what is actually replayed; with no injections it stays empty.
    for (std::size_t i = plan.segment_start; i < seg_end; ++i) {
      if (stream[i].bytes.size() < kFeatureBytes) {
        throw InvalidArgumentError("replay segment frame " + std::to_string(i) +
                                   " is shorter than 58 octets");
      }
      FeatureVector fv{};
      std::copy_n(stream[i].bytes.begin(), kFeatureBytes, fv.begin());
      result.replay.insert(fv);
    }
  }

  std::size_t next_pos = 0;
  auto inject_here = [&] {
    const Timestamp prev_ts =
        result.frames.empty() ? Timestamp{0, 0} : result.frames.back().ts;
    for (std::size_t i = 0; i < plan.segment_len; ++i) {
      RawFrame copy = stream[plan.segment_start + i];  // frame bytes unchanged
      std::uint64_t ns = static_cast<std::uint64_t>(prev_ts.sec) * 1000000000ULL +
                         static_cast<std::uint64_t>(prev_ts.nsec) +
                         (i + 1) * 1000ULL;  // 1 us apart, past the previous frame
      copy.ts.sec = static_cast<std::int64_t>(ns / 1000000000ULL);
      copy.ts.nsec = static_cast<std::int64_t>(ns % 1000000000ULL);
      result.frames.push_back(std::move(copy));
      result.injected.push_back(1);
    }
  };
  for (std::size_t i = 0; i <= stream.size(); ++i) {
    while (next_pos < plan.positions.size() && plan.positions[next_pos] == i) {
      inject_here();
      ++next_pos;
    }
    if (i < stream.size()) {
      result.frames.push_back(stream[i]);
      result.injected.push_back(0);
    }
  }
  return result;
}

AttackPlan make_attack_plan(const StreamConfig& cfg, double frame_fraction,
                            std::size_t segment_len) {
  if (cfg.frame_count == 0) {
    throw InvalidArgumentError("cannot plan an attack on an empty stream");
  }
  if (!(frame_fraction > 0.0) || frame_fraction >= 0.5) {
    throw InvalidArgumentError("injected frame fraction must lie in (0, 0.5)");
  }
  if (segment_len == 0 || segment_len >= cfg.frame_count) {
    throw InvalidArgumentError("segment length must be positive and below the stream length");
  }
  const std::size_t abs_begin = cfg.start_index;
  const std::size_t abs_end = cfg.start_index + cfg.frame_count;
  const auto scenes = scene_schedule(cfg, abs_end);

  // Straddle the first short scene that fits the segment inside the stream.
  AttackPlan plan;
  plan.segment_len = segment_len;
  bool found = false;
  for (const SceneSpan& s : scenes) {
    if (!s.is_short) continue;
    if (s.start < abs_begin + 10 || s.start + segment_len > abs_end) continue;
    const std::size_t lead = std::min<std::size_t>(10, s.start - abs_begin);
    plan.segment_start = s.start - abs_begin - lead;
    if (plan.segment_start + segment_len > cfg.frame_count) continue;
    found = true;
    break;
  }
  if (!found) {
    // No usable short scene; fall back to the earliest ordinary cut.
    for (const SceneSpan& s : scenes) {
      if (s.start <= abs_begin + 10 || s.start + segment_len > abs_end) continue;
      plan.segment_start = s.start - abs_begin - std::min<std::size_t>(10, s.start - abs_begin);
      if (plan.segment_start + segment_len > cfg.frame_count) continue;
      found = true;
      break;
    }
  }
  if (!found) {
    plan.segment_start = 0;  // degenerate stream; replay its head
  }

  // Injected = events * segment_len; solve events for the requested fraction
  // of the final capture: events*len = fraction * (N + events*len).
  const double n = static_cast<double>(cfg.frame_count);
  const double len = static_cast<double>(segment_len);
  std::size_t events = static_cast<std::size_t>(
      std::llround(frame_fraction * n / (len * (1.0 - frame_fraction))));
  events = std::max<std::size_t>(events, 1);

  const std::size_t seg_end = plan.segment_start + segment_len;
  const std::size_t first = seg_end + 60;
  if (first >= cfg.frame_count) {
    throw InvalidArgumentError("stream too short to place injections after the segment");
  }
  const std::size_t span = cfg.frame_count - first;
  const std::size_t max_events = std::max<std::size_t>(1, span / (segment_len + 24));
  events = std::min(events, max_events);
  std::size_t prev = 0;
  for (std::size_t e = 0; e < events; ++e) {
    std::size_t p = first + (span * (2 * e + 1)) / (2 * events);
    if (e > 0 && p <= prev) p = prev + segment_len + 24;
    if (p > cfg.frame_count) break;
    plan.positions.push_back(p);
    prev = p;
  }
  return plan;
}

void save_stream_config(const StreamConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot create " + path.string());
  }
  out << "seed = " << cfg.seed << "\n";
  out << "frame_count = " << cfg.frame_count << "\n";
  out << "start_index = " << cfg.start_index << "\n";
  out << "frame_len = " << cfg.frame_len << "\n";
  out << "period_ns = " << cfg.period_ns << "\n";
  out << "scene_len_min = " << cfg.scene_len_min << "\n";
  out << "scene_len_max = " << cfg.scene_len_max << "\n";
  out << "short_scene_period = " << cfg.short_scene_period << "\n";
  out << "short_len_min = " << cfg.short_len_min << "\n";
  out << "short_len_max = " << cfg.short_len_max << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", cfg.jitter_log_center);
  out << "jitter_log_center = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", cfg.jitter_log_spread);
  out << "jitter_log_spread = " << buf << "\n";
  out << "talker_mac = " << mac_to_string(cfg.talker_mac) << "\n";
  out << "listener_mac = " << mac_to_string(cfg.listener_mac) << "\n";
  out << "stream_id = " << id_to_string(cfg.stream_id) << "\n";
  out << "vlan_vid = " << cfg.vlan_vid << "\n";
  out << "vlan_pcp = " << static_cast<unsigned>(cfg.vlan_pcp) << "\n";
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

StreamConfig load_stream_config(const std::filesystem::path& path) {
  const auto kv = read_kv_file(path);
  StreamConfig cfg;
  auto get_u64 = [&](const char* key, std::uint64_t& out) {
    if (auto it = kv.find(key); it != kv.end()) out = std::stoull(it->second);
  };
  auto get_size = [&](const char* key, std::size_t& out) {
    if (auto it = kv.find(key); it != kv.end()) out = std::stoull(it->second);
  };
  auto get_double = [&](const char* key, double& out) {
    if (auto it = kv.find(key); it != kv.end()) out = std::stod(it->second);
  };
  try {
    get_u64("seed", cfg.seed);
    get_size("frame_count", cfg.frame_count);
    get_size("start_index", cfg.start_index);
    get_size("frame_len", cfg.frame_len);
    get_u64("period_ns", cfg.period_ns);
    get_size("scene_len_min", cfg.scene_len_min);
    get_size("scene_len_max", cfg.scene_len_max);
    get_size("short_scene_period", cfg.short_scene_period);
    get_size("short_len_min", cfg.short_len_min);
    get_size("short_len_max", cfg.short_len_max);
    get_double("jitter_log_center", cfg.jitter_log_center);
    get_double("jitter_log_spread", cfg.jitter_log_spread);
    if (auto it = kv.find("talker_mac"); it != kv.end()) {
      const auto bytes = parse_hex_bytes(it->second, 6, "talker_mac");
      std::copy(bytes.begin(), bytes.end(), cfg.talker_mac.begin());
    }
    if (auto it = kv.find("listener_mac"); it != kv.end()) {
      const auto bytes = parse_hex_bytes(it->second, 6, "listener_mac");
      std::copy(bytes.begin(), bytes.end(), cfg.listener_mac.begin());
    }
    if (auto it = kv.find("stream_id"); it != kv.end()) {
      const auto bytes = parse_hex_bytes(it->second, 8, "stream_id");
      std::copy(bytes.begin(), bytes.end(), cfg.stream_id.begin());
    }
    if (auto it = kv.find("vlan_vid"); it != kv.end()) {
      cfg.vlan_vid = static_cast<std::uint16_t>(std::stoul(it->second));
    }
    if (auto it = kv.find("vlan_pcp"); it != kv.end()) {
      cfg.vlan_pcp = static_cast<std::uint8_t>(std::stoul(it->second));
    }
  } catch (const std::invalid_argument&) {
    throw FormatError("malformed number in " + path.string());
  } catch (const std::out_of_range&) {
    throw FormatError("number out of range in " + path.string());
  }
  return cfg;
}

void save_attack_plan(const AttackPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot create " + path.string());
  }
  out << "segment_start = " << plan.segment_start << "\n";
  out << "segment_len = " << plan.segment_len << "\n";
  out << "positions =";
  for (std::size_t p : plan.positions) out << ' ' << p;
  out << "\n";
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

AttackPlan load_attack_plan(const std::filesystem::path& path) {
  const auto kv = read_kv_file(path);
  AttackPlan plan;
  try {
    if (auto it = kv.find("segment_start"); it != kv.end()) {
      plan.segment_start = std::stoull(it->second);
    }
    if (auto it = kv.find("segment_len"); it != kv.end()) {
      plan.segment_len = std::stoull(it->second);
    }
    if (auto it = kv.find("positions"); it != kv.end()) {
      std::stringstream ss(it->second);
      std::size_t p;
      while (ss >> p) plan.positions.push_back(p);
    }
  } catch (const std::invalid_argument&) {
    throw FormatError("malformed number in " + path.string());
  } catch (const std::out_of_range&) {
    throw FormatError("number out of range in " + path.string());
  }
  return plan;
}

void save_ground_truth(const std::vector<std::uint8_t>& injected,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot create " + path.string());
  }
  for (std::size_t i = 0; i < injected.size(); ++i) {
    if (injected[i]) out << i << "\n";
  }
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

std::vector<std::size_t> load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<std::size_t> ordinals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      ordinals.push_back(std::stoull(line));
    } catch (const std::exception&) {
      throw FormatError("malformed ordinal '" + line + "' in " + path.string());
    }
  }
  return ordinals;
}

}  // namespace avtpids
