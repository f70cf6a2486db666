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

#ifndef NETDX_CHECKSUM_HPP_
#define NETDX_CHECKSUM_HPP_

#include <array>
#include <cstdint>

#include "netdx/netmodel.hpp"

namespace netdx {

/**
 * Fixed 20-byte serialization of the modeled header, laid out like a
 * plain IPv4 header. This layout is the checksum's input contract:
 *
 *   byte  0     0x45 (version/IHL)
 *   byte  1     dscp << 2           (trace bit is metadata, not included)
 *   bytes 2-3   total length, constant 28
 *   bytes 4-5   identification     (packet id mod 2^16)
 *   bytes 6-7   flags/fragment, constant 0
 *   byte  8     ttl
 *   byte  9     protocol number
 *   bytes 10-11 header checksum    (0 while computing)
 *   bytes 12-15 source address     (network order)
 *   bytes 16-19 destination address (network order)
 */
std::array<std::uint8_t, 20> serialize_header(const Packet& p);

/**
 * Ones-complement header checksum over serialize_header(p) with the
 * checksum bytes zeroed: 16-bit big-endian words are summed with
 * end-around carry and the folded sum is complemented.
 */
std::uint16_t ipv4_header_checksum(const Packet& p);

/**
 * True iff the stored checksum is consistent: summing the serialized
 * header including the stored checksum folds to 0xFFFF.
 */
bool verify_header_checksum(const Packet& p);

/** Recomputes and stores the header checksum. */
void seal_header(Packet& p);

/** FNV-1a 64-bit hash, used for payload digests and state hashes. */
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace netdx

#endif  // NETDX_CHECKSUM_HPP_
