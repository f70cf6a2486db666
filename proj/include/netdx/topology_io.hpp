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

#ifndef NETDX_TOPOLOGY_IO_HPP_
#define NETDX_TOPOLOGY_IO_HPP_

#include <string>

#include "netdx/netmodel.hpp"

namespace netdx {

/*
 * Line-oriented topology document. Sections appear in this order:
 *
 *   [switches]   id asn loopback/32 secondary/32
 *   [hosts]      id ip/len [dh]
 *   [links]      a:ifA ipA/len b:ifB ipB/len latency_us
 *   [bgp]        switch peer in=POLICY out=POLICY
 *   [acl]        switch permit|deny [src=PFX] [dst=PFX] [proto=P]
 *                [sport=N] [dport=N]
 *   [originate]  switch prefix
 *   [static]     switch prefix ifindex
 *
 * '#' starts a comment; blank lines are ignored. POLICY is a comma
 * list of first-match clauses `accept|reject|lp<N>[:FILTER]` where
 * FILTER is `PFX`, `via<ASN>`, or `PFX+via<ASN>`; an `out` policy may
 * begin with the scope token `own` (advertise own-AS routes only) or
 * `all` (default). Interface addresses and MACs are declared by
 * [links]; host-side link addresses must repeat the host address.
 * BGP sessions listed here are eBGP; the intra-AS full mesh is
 * synthesized automatically at load.
 */

/** Parses and validates a topology document. Throws TopologyError. */
Topology load_topology(const std::string& text);

/** Reads a file and delegates to load_topology. */
Topology load_topology_file(const std::string& path);

/**
 * Emits the canonical document form: declaration order preserved,
 * single space separators, every attribute explicit. Loading the
 * output reproduces the same topology, and serializing a canonical
 * document round-trips byte-exactly.
 */
std::string serialize_topology(const Topology& t);

}  // namespace netdx

#endif  // NETDX_TOPOLOGY_IO_HPP_
