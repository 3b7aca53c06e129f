#include "avtpids/pcap.hpp"

#include <array>
#include <cstring>

#include "avtpids/errors.hpp"

namespace avtpids {

namespace {

constexpr std::uint32_t kMagicMicros = 0xA1B2C3D4u;
constexpr std::uint32_t kMagicMicrosSwapped = 0xD4C3B2A1u;
constexpr std::uint32_t kMagicNanos = 0xA1B23C4Du;
constexpr std::uint32_t kMagicNanosSwapped = 0x4D3CB2A1u;
constexpr std::uint32_t kLinktypeEthernet = 1;
constexpr std::size_t kGlobalHeaderBytes = 24;
constexpr std::size_t kRecordHeaderBytes = 16;

std::uint32_t bswap32(std::uint32_t v) {
  return ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) |
         ((v & 0x00FF0000u) >> 8) | ((v & 0xFF000000u) >> 24);
}

std::uint32_t load_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32le(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

void store_u16le(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

std::uint16_t load_u16be(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

}  // namespace

PcapReader::PcapReader(const std::filesystem::path& path) {
  file_ = std::fopen(path.string().c_str(), "rb");
  if (!file_) {
    throw IoError("cannot open capture: " + path.string());
  }
  std::array<std::uint8_t, kGlobalHeaderBytes> hdr;
  if (std::fread(hdr.data(), 1, hdr.size(), file_) != hdr.size()) {
    std::fclose(file_);
    file_ = nullptr;
    throw FormatError("capture shorter than a pcap global header: " + path.string());
  }
  const std::uint32_t magic = load_u32le(hdr.data());
  switch (magic) {
    case kMagicMicros:
      break;
    case kMagicNanos:
      nanos_ = true;
      break;
    case kMagicMicrosSwapped:
      swapped_ = true;
      break;
    case kMagicNanosSwapped:
      swapped_ = true;
      nanos_ = true;
      break;
    default: {
      std::fclose(file_);
      file_ = nullptr;
      char buf[64];
      std::snprintf(buf, sizeof buf, "unrecognized pcap magic 0x%08X", magic);
      throw FormatError(buf);
    }
  }
  std::uint32_t linktype = load_u32le(hdr.data() + 20);
  if (swapped_) linktype = bswap32(linktype);
  if (linktype != kLinktypeEthernet) {
    std::fclose(file_);
    file_ = nullptr;
    throw FormatError("unsupported pcap link type " + std::to_string(linktype) +
                      " (only Ethernet is handled)");
  }
}

PcapReader::~PcapReader() {
  if (file_) std::fclose(file_);
}

PcapReader::PcapReader(PcapReader&& other) noexcept
    : file_(other.file_),
      swapped_(other.swapped_),
      nanos_(other.nanos_),
      truncated_tail_(other.truncated_tail_),
      done_(other.done_) {
  other.file_ = nullptr;
}

PcapReader& PcapReader::operator=(PcapReader&& other) noexcept {
  if (this != &other) {
    if (file_) std::fclose(file_);
    file_ = other.file_;
    swapped_ = other.swapped_;
    nanos_ = other.nanos_;
    truncated_tail_ = other.truncated_tail_;
    done_ = other.done_;
    other.file_ = nullptr;
  }
  return *this;
}

std::optional<RawFrame> PcapReader::next() {
  if (done_ || !file_) return std::nullopt;
  std::array<std::uint8_t, kRecordHeaderBytes> rec;
  const std::size_t got = std::fread(rec.data(), 1, rec.size(), file_);
  if (got == 0) {
    done_ = true;
    return std::nullopt;
  }
  if (got < rec.size()) {
    truncated_tail_ = true;
    done_ = true;
    return std::nullopt;
  }
  std::uint32_t ts_sec = load_u32le(rec.data());
  std::uint32_t ts_frac = load_u32le(rec.data() + 4);
  std::uint32_t incl_len = load_u32le(rec.data() + 8);
  if (swapped_) {
    ts_sec = bswap32(ts_sec);
    ts_frac = bswap32(ts_frac);
    incl_len = bswap32(incl_len);
  }
  RawFrame frame;
  frame.ts.sec = ts_sec;
  frame.ts.nsec = nanos_ ? static_cast<std::int64_t>(ts_frac)
                         : static_cast<std::int64_t>(ts_frac) * 1000;
  frame.bytes.resize(incl_len);
  if (incl_len > 0 && std::fread(frame.bytes.data(), 1, incl_len, file_) != incl_len) {
    truncated_tail_ = true;
    done_ = true;
    return std::nullopt;
  }
  return frame;
}

void write_pcap(std::span<const RawFrame> frames, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) {
    throw IoError("cannot create capture: " + path.string());
  }
  std::array<std::uint8_t, kGlobalHeaderBytes> hdr{};
  store_u32le(hdr.data(), kMagicMicros);
  store_u16le(hdr.data() + 4, 2);   // version major
  store_u16le(hdr.data() + 6, 4);   // version minor
  store_u32le(hdr.data() + 8, 0);   // thiszone
  store_u32le(hdr.data() + 12, 0);  // sigfigs
  store_u32le(hdr.data() + 16, 65535);
  store_u32le(hdr.data() + 20, kLinktypeEthernet);
  bool ok = std::fwrite(hdr.data(), 1, hdr.size(), f) == hdr.size();
  for (const RawFrame& frame : frames) {
    if (!ok) break;
    std::array<std::uint8_t, kRecordHeaderBytes> rec{};
    store_u32le(rec.data(), static_cast<std::uint32_t>(frame.ts.sec));
    store_u32le(rec.data() + 4, static_cast<std::uint32_t>(frame.ts.nsec / 1000));
    store_u32le(rec.data() + 8, static_cast<std::uint32_t>(frame.bytes.size()));
    store_u32le(rec.data() + 12, static_cast<std::uint32_t>(frame.bytes.size()));
    ok = std::fwrite(rec.data(), 1, rec.size(), f) == rec.size();
    if (ok && !frame.bytes.empty()) {
      ok = std::fwrite(frame.bytes.data(), 1, frame.bytes.size(), f) == frame.bytes.size();
    }
  }
  const bool closed = std::fclose(f) == 0;
  if (!ok || !closed) {
    throw IoError("failed writing capture: " + path.string());
  }
}

EthernetHeader parse_ethernet(const RawFrame& frame) {
  const auto& b = frame.bytes;
  if (b.size() < 14) {
    throw MalformedFrameError("frame of " + std::to_string(b.size()) +
                              " octets is shorter than an Ethernet header");
  }
  EthernetHeader eth;
  std::memcpy(eth.dst.data(), b.data(), 6);
  std::memcpy(eth.src.data(), b.data() + 6, 6);
  std::uint16_t type = load_u16be(b.data() + 12);
  std::size_t offset = 14;
  if (type == kVlanTpid) {
    if (b.size() < 18) {
      throw MalformedFrameError("frame announces an 802.1Q tag but is only " +
                                std::to_string(b.size()) + " octets long");
    }
    const std::uint16_t tci = load_u16be(b.data() + 14);
    VlanTag tag;
    tag.pcp = static_cast<std::uint8_t>(tci >> 13);
    tag.dei = ((tci >> 12) & 1) != 0;
    tag.vid = static_cast<std::uint16_t>(tci & 0x0FFF);
    eth.vlan = tag;
    type = load_u16be(b.data() + 16);
    offset = 18;
  }
  eth.ethertype = type;
  eth.payload_offset = offset;
  return eth;
}

std::optional<AvtpPacket> filter_avtp(const RawFrame& frame, const EthernetHeader& eth) {
  if (eth.ethertype != kAvtpEthertype) return std::nullopt;
  if (frame.bytes.size() < kFeatureBytes) return std::nullopt;
  AvtpPacket pkt;
  pkt.ts = frame.ts;
  std::memcpy(pkt.features.data(), frame.bytes.data(), kFeatureBytes);
  return pkt;
}

IngestResult ingest(const std::filesystem::path& path) {
  PcapReader reader(path);
  IngestResult result;
  while (auto frame = reader.next()) {
    ++result.stats.total_frames;
    EthernetHeader eth;
    try {
      eth = parse_ethernet(*frame);
    } catch (const MalformedFrameError&) {
      ++result.stats.truncated_frames;
      continue;
    }
    if (eth.ethertype != kAvtpEthertype) {
      ++result.stats.non_avtp_frames;
      continue;
    }
    if (auto pkt = filter_avtp(*frame, eth)) {
      pkt->index = result.packets.size();
      ++result.stats.avtp_frames;
      result.packets.push_back(std::move(*pkt));
    } else {
      ++result.stats.truncated_frames;  // AVTP frame shorter than 58 octets
    }
  }
  result.stats.truncated_tail = reader.truncated_tail();
  return result;
}

}  // namespace avtpids
