#pragma once

#include <string>

#include "senslab/network.hpp"

namespace senslab {

/// Versioned binary container for network parameters. Little-endian,
/// 64-bit payload values written as raw IEEE-754 bit patterns, so a
/// save/load round trip is bit-exact.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

} // namespace senslab
