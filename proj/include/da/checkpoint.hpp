#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "da/nn.hpp"

namespace da {

// Versioned little-endian checkpoint shared by all networks:
//   magic "DACK", u32 version, u32 kind, kind-specific header,
//   u32 layer count, per layer (u32 in_c, out_c, ksize, stride),
//   then float32 parameters in declaration order (weight, bias per layer).
enum class CheckpointKind : std::uint32_t {
  confnet = 1,
  dispnet = 2,
  taunet = 3,
};

struct CheckpointHeader {
  CheckpointKind kind;
  std::vector<std::uint32_t> extra;  // kind-specific fields
};

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const std::vector<ConvLayer>& layers);

// Validates magic/version and returns the header; layer geometry is
// reconstructed and parameters are loaded in declaration order.
CheckpointHeader load_checkpoint(const std::string& path,
                                 std::vector<ConvLayer>* layers);

CheckpointKind peek_checkpoint_kind(const std::string& path);

}  // namespace da
