#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "avtpids/types.hpp"

namespace avtpids {

// Streaming reader for classic pcap captures.  Handles both byte orders and
// both microsecond- and nanosecond-resolution magics; requires the Ethernet
// link type.  A capture that ends in the middle of a record is not an error:
// reading stops and truncated_tail() reports it.
class PcapReader {
 public:
  explicit PcapReader(const std::filesystem::path& path);
  ~PcapReader();
  PcapReader(PcapReader&&) noexcept;
  PcapReader& operator=(PcapReader&&) noexcept;
  PcapReader(const PcapReader&) = delete;
  PcapReader& operator=(const PcapReader&) = delete;

  // Next frame, or nullopt at end of capture.
  std::optional<RawFrame> next();

  bool truncated_tail() const { return truncated_tail_; }
  bool swapped_byte_order() const { return swapped_; }
  bool nanosecond_resolution() const { return nanos_; }

 private:
  std::FILE* file_ = nullptr;
  bool swapped_ = false;
  bool nanos_ = false;
  bool truncated_tail_ = false;
  bool done_ = false;
};

// Writes frames as a classic little-endian, microsecond-resolution pcap with
// the Ethernet link type.  Timestamps are stored at microsecond resolution
// (sub-microsecond detail is truncated).
void write_pcap(std::span<const RawFrame> frames, const std::filesystem::path& path);

// Parses destination/source MACs, an optional single 802.1Q tag, and the
// EtherType.  Throws MalformedFrameError when the frame is shorter than the
// headers it announces.
EthernetHeader parse_ethernet(const RawFrame& frame);

// Returns the frame as an AvtpPacket when its EtherType (after any VLAN tag)
// is 0x22F0 and it carries at least 58 octets; nullopt otherwise.  The
// packet's index is left 0; callers assign ordinals.
std::optional<AvtpPacket> filter_avtp(const RawFrame& frame, const EthernetHeader& eth);

struct IngestResult {
  std::vector<AvtpPacket> packets;  // capture order; index = ordinal among accepted
  CaptureStats stats;
};

// Full pipeline over one capture: read, parse, filter, count.  Frames whose
// link-layer headers are incomplete, and AVTP frames shorter than 58 octets,
// are counted as truncated and produce no packet.
IngestResult ingest(const std::filesystem::path& path);

}  // namespace avtpids
