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

#ifndef NETDX_TOPOGEN_HPP_
#define NETDX_TOPOGEN_HPP_

#include <cstdint>
#include <string>

#include "netdx/netmodel.hpp"

namespace netdx {

/** Knobs for the random network builder. */
struct TopogenParams {
  int min_as = 3;
  int max_as = 6;
  int min_switches = 8;
  int max_switches = 24;
  int hosts = 4;         // regular hosts; one management host is always added
  bool policies = true;  // sprinkle scope/pref/reject clauses on sessions
};

/**
 * Deterministic random topology: every AS is an internally connected
 * switch group of at least two, the AS graph is connected, each border
 * pair runs one session per direction, and hosts land on distinct
 * switches. The same seed always yields the same network.
 */
Topology generate_topology(std::uint64_t seed, const TopogenParams& p = {});

/** The document form of the same network (what the loader consumes). */
std::string generate_topology_text(std::uint64_t seed,
                                   const TopogenParams& p = {});

}  // namespace netdx

#endif  // NETDX_TOPOGEN_HPP_
