/* Copyright 2026-present netdx contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
 * implied. See the License for the specific language governing
 * permissions and limitations under the License.
 */

#include "netdx/checksum.hpp"

namespace netdx {

std::array<std::uint8_t, 20> serialize_header(const Packet& p) {
  std::array<std::uint8_t, 20> b{};
  b[0] = 0x45;
  b[1] = static_cast<std::uint8_t>(p.dscp << 2);
  b[2] = 0x00;
  b[3] = 28;  // constant total length: 20 header + 8 payload stub
  b[4] = static_cast<std::uint8_t>((p.id >> 8) & 0xff);
  b[5] = static_cast<std::uint8_t>(p.id & 0xff);
  b[6] = 0x00;
  b[7] = 0x00;
  b[8] = p.ttl;
  b[9] = static_cast<std::uint8_t>(p.protocol);
  b[10] = static_cast<std::uint8_t>(p.header_checksum >> 8);
  b[11] = static_cast<std::uint8_t>(p.header_checksum & 0xff);
  b[12] = static_cast<std::uint8_t>(p.src_ip.v >> 24);
  b[13] = static_cast<std::uint8_t>(p.src_ip.v >> 16);
  b[14] = static_cast<std::uint8_t>(p.src_ip.v >> 8);
  b[15] = static_cast<std::uint8_t>(p.src_ip.v);
  b[16] = static_cast<std::uint8_t>(p.dst_ip.v >> 24);
  b[17] = static_cast<std::uint8_t>(p.dst_ip.v >> 16);
  b[18] = static_cast<std::uint8_t>(p.dst_ip.v >> 8);
  b[19] = static_cast<std::uint8_t>(p.dst_ip.v);
  return b;
}

static std::uint16_t fold_sum(const std::uint8_t* data, std::size_t len) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i + 1 < len; i += 2)
    sum += (std::uint32_t(data[i]) << 8) | data[i + 1];
  if (len & 1) sum += std::uint32_t(data[len - 1]) << 8;
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(sum);
}

std::uint16_t ipv4_header_checksum(const Packet& p) {
  Packet zeroed = p;
  zeroed.header_checksum = 0;
  auto bytes = serialize_header(zeroed);
  return static_cast<std::uint16_t>(~fold_sum(bytes.data(), bytes.size()));
}

bool verify_header_checksum(const Packet& p) {
  auto bytes = serialize_header(p);
  return fold_sum(bytes.data(), bytes.size()) == 0xffff;
}

void seal_header(Packet& p) { p.header_checksum = ipv4_header_checksum(p); }

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* b = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace netdx
