#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "avtpids/types.hpp"
#include "avtpids/windows.hpp"

namespace avtpids {

// Parameters of the deterministic stream generator.  Frame content is a pure
// function of (config content fields, absolute frame ordinal), so a capture
// started at start_index = K continues the exact stream that a previous
// capture of K frames ended on.
//
// The emitted frames look like an IEEE 1722 video stream: fixed MACs, one
// 802.1Q tag, EtherType 0x22F0, a per-frame sequence counter, a presentation
// timestamp advancing 65,536 ns per frame, and a payload that emulates video
// texture.  Payload bytes follow a few shared oscillators; the stream is
// organized into scenes, and at every scene cut the oscillator phases and the
// scene brightness jump.  Most scenes are long, an occasional one is only a
// dozen frames; a low-level noise whose amplitude drifts slowly over the
// stream gives reconstruction difficulty a wide, continuous spread.
struct StreamConfig {
  std::uint64_t seed = 1;
  std::size_t frame_count = 0;
  std::size_t start_index = 0;
  std::size_t frame_len = 438;       // >= 58 octets
  std::uint64_t period_ns = 125000;  // capture timestamp spacing

  // Scene model.
  std::size_t scene_len_min = 1200;
  std::size_t scene_len_max = 3000;
  std::size_t short_scene_period = 4;  // on average every k-th scene is short
  std::size_t short_len_min = 12;
  std::size_t short_len_max = 16;

  // Payload noise amplitude: ln(amplitude in byte steps) swings around
  // jitter_log_center with half-range jitter_log_spread over slow cycles.
  double jitter_log_center = 0.0;
  double jitter_log_spread = 1.8;

  // Constant protocol fields.
  std::array<std::uint8_t, 6> talker_mac{0x00, 0x1B, 0x21, 0x3A, 0x5E, 0x01};
  std::array<std::uint8_t, 6> listener_mac{0x91, 0xE0, 0xF0, 0x00, 0x0E, 0x80};
  std::array<std::uint8_t, 8> stream_id{0x00, 0x1B, 0x21, 0x3A, 0x5E, 0x01, 0x00, 0x01};
  std::uint16_t vlan_vid = 2;
  std::uint8_t vlan_pcp = 3;
};

struct SceneSpan {
  std::size_t start = 0;
  std::size_t len = 0;
  bool is_short = false;

  friend bool operator==(const SceneSpan&, const SceneSpan&) = default;
};

// Scene spans of the stream, in order, covering at least [0, end_index).
// Depends only on the seed and scene-model fields.
std::vector<SceneSpan> scene_schedule(const StreamConfig& cfg, std::size_t end_index);

// Generates frames start_index .. start_index + frame_count - 1.
std::vector<RawFrame> gen_stream(const StreamConfig& cfg);

// A replay attack: a contiguous run of the stream's own frames, re-injected
// at later positions.  Positions index the original stream; the segment copy
// is inserted immediately before the frame holding that ordinal (a position
// equal to the stream length appends).  All positions must lie past the end
// of the segment and be strictly increasing.
struct AttackPlan {
  std::size_t segment_start = 0;
  std::size_t segment_len = 36;
  std::vector<std::size_t> positions;
};

struct InjectResult {
  std::vector<RawFrame> frames;        // original plus injected copies
  ReplaySet replay;                    // distinct 58-byte prefixes of the segment
  std::vector<std::uint8_t> injected;  // per output frame: 1 = injected copy
};

// Injected copies keep their frame bytes unchanged (capture timestamps are
// re-stamped to keep the capture monotone).
InjectResult inject_replay(std::span<const RawFrame> stream, const AttackPlan& plan);

// Picks a default plan for a generated stream: the segment straddles the
// stream's first short scene (its windows then contain scene cuts, so even
// windows entirely inside a replayed copy contain reconstruction anomalies),
// and enough evenly spread injection points to make injected copies roughly
// `frame_fraction` of the final capture.
AttackPlan make_attack_plan(const StreamConfig& cfg, double frame_fraction = 0.10,
                            std::size_t segment_len = 36);

// Key-value text round trip for configs and plans ("key = value" lines).
void save_stream_config(const StreamConfig& cfg, const std::filesystem::path& path);
StreamConfig load_stream_config(const std::filesystem::path& path);
void save_attack_plan(const AttackPlan& plan, const std::filesystem::path& path);
AttackPlan load_attack_plan(const std::filesystem::path& path);

// Ground-truth sidecar: ordinals of injected frames, one per line.
void save_ground_truth(const std::vector<std::uint8_t>& injected,
                       const std::filesystem::path& path);
std::vector<std::size_t> load_ground_truth(const std::filesystem::path& path);

}  // namespace avtpids
