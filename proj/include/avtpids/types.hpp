#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace avtpids {

inline constexpr const char* kVersion = "0.1.0";

// Number of leading octets of a frame used as its feature vector.
inline constexpr std::size_t kFeatureBytes = 58;

// EtherType of IEEE 1722 audio/video transport protocol frames.
inline constexpr std::uint16_t kAvtpEthertype = 0x22F0;

// EtherType (TPID) announcing an 802.1Q VLAN tag.
inline constexpr std::uint16_t kVlanTpid = 0x8100;

// Capture timestamp; nsec carries sub-second precision in [0, 1e9).
struct Timestamp {
  std::int64_t sec = 0;
  std::int64_t nsec = 0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

// One captured frame exactly as it appeared on the wire.
struct RawFrame {
  Timestamp ts;
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const RawFrame&, const RawFrame&) = default;
};

struct VlanTag {
  std::uint8_t pcp = 0;  // priority code point, 3 bits
  bool dei = false;      // drop eligible indicator
  std::uint16_t vid = 0; // VLAN identifier, 12 bits

  friend bool operator==(const VlanTag&, const VlanTag&) = default;
};

struct EthernetHeader {
  std::array<std::uint8_t, 6> dst{};
  std::array<std::uint8_t, 6> src{};
  std::optional<VlanTag> vlan;
  std::uint16_t ethertype = 0;  // after the VLAN tag when one is present
  std::size_t payload_offset = 0;  // offset of the first byte after all headers

  friend bool operator==(const EthernetHeader&, const EthernetHeader&) = default;
};

using FeatureVector = std::array<std::uint8_t, kFeatureBytes>;

// An accepted AVTP frame: its ordinal among accepted frames, capture
// timestamp, and the 58-octet feature prefix (taken from the start of the
// frame, link-layer header included).
struct AvtpPacket {
  std::size_t index = 0;
  Timestamp ts;
  FeatureVector features{};

  friend bool operator==(const AvtpPacket&, const AvtpPacket&) = default;
};

// Counters describing one pass over a capture.
struct CaptureStats {
  std::size_t total_frames = 0;     // records successfully read
  std::size_t avtp_frames = 0;      // accepted AVTP frames (>= 58 octets)
  std::size_t non_avtp_frames = 0;  // well-formed frames with other ethertypes
  std::size_t truncated_frames = 0; // frames too short for their headers or features
  bool truncated_tail = false;      // capture ended inside a record

  friend bool operator==(const CaptureStats&, const CaptureStats&) = default;
};

// Dense row-major matrix of doubles; the exchange type between feature
// extraction and the classical detectors.
struct FloatMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

}  // namespace avtpids
