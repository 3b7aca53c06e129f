#include "avtpids/pcap.hpp"

#include <cstring>

#include "avtpids/errors.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace avtpids;

namespace {

// Hand-assembled global header; fixtures below are built byte by byte so the
// reader is checked against the format definition, not against write_pcap.
std::vector<std::uint8_t> global_header_le(std::uint32_t magic) {
  std::vector<std::uint8_t> v;
  push_u32le(v, magic);
  push_u16le(v, 2);
  push_u16le(v, 4);
  push_u32le(v, 0);
  push_u32le(v, 0);
  push_u32le(v, 65535);
  push_u32le(v, 1);  // Ethernet
  return v;
}

std::vector<std::uint8_t> global_header_be() {
  std::vector<std::uint8_t> v;
  push_u32be(v, 0xA1B2C3D4u);  // written big-endian => reader sees swapped magic
  push_u16be(v, 2);
  push_u16be(v, 4);
  push_u32be(v, 0);
  push_u32be(v, 0);
  push_u32be(v, 65535);
  push_u32be(v, 1);
  return v;
}

std::vector<std::uint8_t> make_eth_frame(std::uint16_t ethertype, std::size_t len,
                                         bool vlan = false) {
  std::vector<std::uint8_t> f;
  for (int i = 0; i < 6; ++i) f.push_back(static_cast<std::uint8_t>(0x10 + i));  // dst
  for (int i = 0; i < 6; ++i) f.push_back(static_cast<std::uint8_t>(0x20 + i));  // src
  if (vlan) {
    push_u16be(f, 0x8100);
    push_u16be(f, 0x6002);  // pcp=3, dei=0, vid=2
  }
  push_u16be(f, ethertype);
  std::uint8_t fill = 0;
  while (f.size() < len) f.push_back(fill++);
  f.resize(len);
  return f;
}

}  // namespace

TEST_CASE("reader parses a hand-assembled little-endian microsecond capture") {
  TempDir dir;
  auto bytes = global_header_le(0xA1B2C3D4u);
  const auto frame1 = make_eth_frame(0x0800, 60);
  push_u32le(bytes, 17);        // ts_sec
  push_u32le(bytes, 250000);    // ts_usec
  push_u32le(bytes, static_cast<std::uint32_t>(frame1.size()));
  push_u32le(bytes, static_cast<std::uint32_t>(frame1.size()));
  bytes.insert(bytes.end(), frame1.begin(), frame1.end());
  const auto frame2 = make_eth_frame(0x22F0, 100, true);
  push_u32le(bytes, 18);
  push_u32le(bytes, 1);
  push_u32le(bytes, static_cast<std::uint32_t>(frame2.size()));
  push_u32le(bytes, static_cast<std::uint32_t>(frame2.size()));
  bytes.insert(bytes.end(), frame2.begin(), frame2.end());
  write_file_bytes(dir.file("a.pcap"), bytes);

  PcapReader reader(dir.file("a.pcap"));
  CHECK_FALSE(reader.swapped_byte_order());
  CHECK_FALSE(reader.nanosecond_resolution());
  auto f1 = reader.next();
  REQUIRE(f1.has_value());
  CHECK(f1->ts.sec == 17);
  CHECK(f1->ts.nsec == 250000000);
  CHECK(f1->bytes == frame1);
  auto f2 = reader.next();
  REQUIRE(f2.has_value());
  CHECK(f2->ts.sec == 18);
  CHECK(f2->ts.nsec == 1000);
  CHECK(f2->bytes == frame2);
  CHECK_FALSE(reader.next().has_value());
  CHECK_FALSE(reader.truncated_tail());
}

TEST_CASE("reader handles the swapped byte order") {
  TempDir dir;
  auto bytes = global_header_be();
  const auto frame = make_eth_frame(0x0800, 64);
  push_u32be(bytes, 99);
  push_u32be(bytes, 5);
  push_u32be(bytes, static_cast<std::uint32_t>(frame.size()));
  push_u32be(bytes, static_cast<std::uint32_t>(frame.size()));
  bytes.insert(bytes.end(), frame.begin(), frame.end());
  write_file_bytes(dir.file("be.pcap"), bytes);

  PcapReader reader(dir.file("be.pcap"));
  CHECK(reader.swapped_byte_order());
  auto f = reader.next();
  REQUIRE(f.has_value());
  CHECK(f->ts.sec == 99);
  CHECK(f->ts.nsec == 5000);
  CHECK(f->bytes == frame);
}

TEST_CASE("reader honors the nanosecond-resolution magic") {
  TempDir dir;
  auto bytes = global_header_le(0xA1B23C4Du);
  const auto frame = make_eth_frame(0x0800, 60);
  push_u32le(bytes, 7);
  push_u32le(bytes, 123456789);  // nanoseconds, not microseconds
  push_u32le(bytes, static_cast<std::uint32_t>(frame.size()));
  push_u32le(bytes, static_cast<std::uint32_t>(frame.size()));
  bytes.insert(bytes.end(), frame.begin(), frame.end());
  write_file_bytes(dir.file("ns.pcap"), bytes);

  PcapReader reader(dir.file("ns.pcap"));
  CHECK(reader.nanosecond_resolution());
  auto f = reader.next();
  REQUIRE(f.has_value());
  CHECK(f->ts.sec == 7);
  CHECK(f->ts.nsec == 123456789);
}

TEST_CASE("reader rejects bad headers") {
  TempDir dir;
  SUBCASE("unknown magic") {
    auto bytes = global_header_le(0xDEADBEEFu);
    write_file_bytes(dir.file("bad.pcap"), bytes);
    CHECK_THROWS_AS(PcapReader(dir.file("bad.pcap")), FormatError);
  }
  SUBCASE("truncated global header") {
    write_file_bytes(dir.file("short.pcap"), {0xD4, 0xC3, 0xB2});
    CHECK_THROWS_AS(PcapReader(dir.file("short.pcap")), FormatError);
  }
  SUBCASE("non-Ethernet link type") {
    auto bytes = global_header_le(0xA1B2C3D4u);
    bytes[20] = 101;  // raw IP
    write_file_bytes(dir.file("linktype.pcap"), bytes);
    CHECK_THROWS_AS(PcapReader(dir.file("linktype.pcap")), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(PcapReader(dir.file("nope.pcap")), IoError);
  }
}

TEST_CASE("reader flags a capture that ends inside a record") {
  TempDir dir;
  const auto frame = make_eth_frame(0x0800, 60);
  SUBCASE("partial record header") {
    auto bytes = global_header_le(0xA1B2C3D4u);
    push_u32le(bytes, 1);
    push_u32le(bytes, 0);
    push_u32le(bytes, static_cast<std::uint32_t>(frame.size()));
    push_u32le(bytes, static_cast<std::uint32_t>(frame.size()));
    bytes.insert(bytes.end(), frame.begin(), frame.end());
    push_u32le(bytes, 2);  // only 4 bytes of the next record header
    write_file_bytes(dir.file("tail1.pcap"), bytes);

    PcapReader reader(dir.file("tail1.pcap"));
    CHECK(reader.next().has_value());
    CHECK_FALSE(reader.next().has_value());
    CHECK(reader.truncated_tail());
  }
  SUBCASE("record body shorter than promised") {
    auto bytes = global_header_le(0xA1B2C3D4u);
    push_u32le(bytes, 1);
    push_u32le(bytes, 0);
    push_u32le(bytes, 1000);  // promises 1000 bytes
    push_u32le(bytes, 1000);
    bytes.insert(bytes.end(), frame.begin(), frame.end());  // delivers 60
    write_file_bytes(dir.file("tail2.pcap"), bytes);

    PcapReader reader(dir.file("tail2.pcap"));
    CHECK_FALSE(reader.next().has_value());
    CHECK(reader.truncated_tail());
  }
}

TEST_CASE("write_pcap then reading returns identical frames") {
  TempDir dir;
  std::mt19937_64 rng(42);
  std::vector<RawFrame> frames;
  for (int i = 0; i < 25; ++i) {
    RawFrame f;
    f.ts.sec = 1000 + i;
    f.ts.nsec = static_cast<std::int64_t>(rng() % 1000000) * 1000;  // whole microseconds
    f.bytes = make_eth_frame(i % 2 ? 0x22F0 : 0x0800, 58 + rng() % 300, i % 3 == 0);
    for (auto& b : f.bytes) b = static_cast<std::uint8_t>(rng());
    frames.push_back(std::move(f));
  }
  write_pcap(frames, dir.file("rt.pcap"));

  PcapReader reader(dir.file("rt.pcap"));
  for (const RawFrame& expected : frames) {
    auto got = reader.next();
    REQUIRE(got.has_value());
    CHECK(got->ts == expected.ts);
    CHECK(got->bytes == expected.bytes);
  }
  CHECK_FALSE(reader.next().has_value());
  CHECK_FALSE(reader.truncated_tail());
}

TEST_CASE("parse_ethernet") {
  SUBCASE("untagged frame") {
    RawFrame f;
    f.bytes = make_eth_frame(0x0800, 60);
    const EthernetHeader eth = parse_ethernet(f);
    CHECK(eth.dst == std::array<std::uint8_t, 6>{0x10, 0x11, 0x12, 0x13, 0x14, 0x15});
    CHECK(eth.src == std::array<std::uint8_t, 6>{0x20, 0x21, 0x22, 0x23, 0x24, 0x25});
    CHECK_FALSE(eth.vlan.has_value());
    CHECK(eth.ethertype == 0x0800);
    CHECK(eth.payload_offset == 14);
  }
  SUBCASE("802.1Q tagged frame") {
    RawFrame f;
    f.bytes = make_eth_frame(0x22F0, 60, true);
    const EthernetHeader eth = parse_ethernet(f);
    REQUIRE(eth.vlan.has_value());
    CHECK(eth.vlan->pcp == 3);
    CHECK_FALSE(eth.vlan->dei);
    CHECK(eth.vlan->vid == 2);
    CHECK(eth.ethertype == 0x22F0);
    CHECK(eth.payload_offset == 18);
  }
  SUBCASE("dei bit and full vid") {
    RawFrame f;
    f.bytes = make_eth_frame(0x0800, 60);
    f.bytes.insert(f.bytes.begin() + 12, {0x81, 0x00, 0xBF, 0xFE});  // pcp=5, dei=1, vid=0xFFE
    const EthernetHeader eth = parse_ethernet(f);
    REQUIRE(eth.vlan.has_value());
    CHECK(eth.vlan->pcp == 5);
    CHECK(eth.vlan->dei);
    CHECK(eth.vlan->vid == 0xFFE);
  }
  SUBCASE("frame shorter than the MAC header") {
    RawFrame f;
    f.bytes.assign(13, 0);
    CHECK_THROWS_AS(parse_ethernet(f), MalformedFrameError);
  }
  SUBCASE("tagged frame cut inside the tag") {
    RawFrame f;
    f.bytes = make_eth_frame(0x0800, 60);
    f.bytes[12] = 0x81;
    f.bytes[13] = 0x00;
    f.bytes.resize(16);
    CHECK_THROWS_AS(parse_ethernet(f), MalformedFrameError);
  }
}

TEST_CASE("filter_avtp") {
  SUBCASE("accepts an AVTP frame and copies the first 58 octets") {
    RawFrame f;
    f.bytes = make_eth_frame(0x22F0, 100, true);
    f.ts = {5, 6000};
    const auto pkt = filter_avtp(f, parse_ethernet(f));
    REQUIRE(pkt.has_value());
    CHECK(pkt->ts == f.ts);
    CHECK(std::memcmp(pkt->features.data(), f.bytes.data(), 58) == 0);
  }
  SUBCASE("rejects other ethertypes") {
    RawFrame f;
    f.bytes = make_eth_frame(0x0800, 100);
    CHECK_FALSE(filter_avtp(f, parse_ethernet(f)).has_value());
  }
  SUBCASE("rejects an AVTP frame shorter than 58 octets") {
    RawFrame f;
    f.bytes = make_eth_frame(0x22F0, 57, true);
    CHECK_FALSE(filter_avtp(f, parse_ethernet(f)).has_value());
  }
  SUBCASE("accepts exactly 58 octets") {
    RawFrame f;
    f.bytes = make_eth_frame(0x22F0, 58, true);
    CHECK(filter_avtp(f, parse_ethernet(f)).has_value());
  }
}

TEST_CASE("ingest counts every frame exactly once") {
  TempDir dir;
  std::vector<RawFrame> frames;
  auto add = [&](std::vector<std::uint8_t> bytes) {
    RawFrame f;
    f.ts = {static_cast<std::int64_t>(frames.size()), 0};
    f.bytes = std::move(bytes);
    frames.push_back(std::move(f));
  };
  add(make_eth_frame(0x22F0, 438, true));  // accepted
  add(make_eth_frame(0x0800, 60));         // non-AVTP
  add(make_eth_frame(0x22F0, 57, true));   // AVTP but too short for features
  add(std::vector<std::uint8_t>(10, 0));   // runt, no MAC header
  add(make_eth_frame(0x22F0, 58, true));   // accepted, boundary length
  add(make_eth_frame(0x86DD, 80));         // non-AVTP
  write_pcap(frames, dir.file("mix.pcap"));

  const IngestResult r = ingest(dir.file("mix.pcap"));
  CHECK(r.stats.total_frames == 6);
  CHECK(r.stats.avtp_frames == 2);
  CHECK(r.stats.non_avtp_frames == 2);
  CHECK(r.stats.truncated_frames == 2);
  CHECK_FALSE(r.stats.truncated_tail);
  CHECK(r.stats.total_frames ==
        r.stats.avtp_frames + r.stats.non_avtp_frames + r.stats.truncated_frames);
  REQUIRE(r.packets.size() == 2);
  CHECK(r.packets[0].index == 0);
  CHECK(r.packets[1].index == 1);
  CHECK(r.packets[0].ts.sec == 0);
  CHECK(r.packets[1].ts.sec == 4);
}
