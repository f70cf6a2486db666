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

#ifndef NETDX_TYPES_HPP_
#define NETDX_TYPES_HPP_

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace netdx {

/** Simulated time in microseconds since simulation start. */
using SimTime = std::int64_t;

using SwitchId = std::string;
using HostId = std::string;
using NodeId = std::string;   // either a SwitchId or a HostId
using LinkId = std::string;   // canonical "a~b" with a < b lexicographically
using AsNumber = std::uint32_t;

/** IPv4 address held in host byte order. */
struct Ipv4Addr {
  std::uint32_t v = 0;

  static std::optional<Ipv4Addr> parse(const std::string& text);
  std::string str() const;

  auto operator<=>(const Ipv4Addr&) const = default;
};

/** IPv4 prefix; the address is stored already masked to `len` bits. */
struct Prefix {
  Ipv4Addr addr;
  std::uint8_t len = 0;

  static std::optional<Prefix> parse(const std::string& text);
  /** Builds a prefix, masking `a` down to `l` bits. */
  static Prefix of(Ipv4Addr a, std::uint8_t l);
  static Prefix host_route(Ipv4Addr a) { return of(a, 32); }

  bool contains(Ipv4Addr a) const;
  std::string str() const;

  auto operator<=>(const Prefix&) const = default;
};

/** 48-bit MAC address kept in the low bits of a u64. */
struct MacAddr {
  std::uint64_t v = 0;

  std::string str() const;

  auto operator<=>(const MacAddr&) const = default;
};

/**
 * Modeled packet protocols. ICMP/TCP/UDP carry IANA numbers; the
 * remaining values are private-use numbers for the simulation's
 * structured control traffic.
 */
enum class Protocol : std::uint8_t {
  kIcmp = 1,
  kTcp = 6,
  kUdp = 17,
  kBgp = 200,     // routing protocol messages (structured, rides the data plane)
  kMgmt = 201,    // management channel: agent commands/replies, reports
  kMarker = 202,  // link marker-test frames
};

const char* protocol_name(Protocol p);
std::optional<Protocol> protocol_from_name(const std::string& name);

/** Canonical link id for a node pair (order-independent). */
LinkId make_link_id(const NodeId& a, const NodeId& b);

}  // namespace netdx

#endif  // NETDX_TYPES_HPP_
