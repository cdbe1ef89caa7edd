#ifndef PRB_PARAMS_IO_HPP
#define PRB_PARAMS_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prb/optimizer.hpp"

namespace prb::nn {

// Trained-parameter file format, bit-exact round trip:
//   magic "PRBM", format version u16 (little-endian), then per parameter:
//   name length u16 + UTF-8 name + rank u8 + dims u32 each + f64 data,
//   all integers and doubles little-endian.

constexpr std::uint16_t kParamsFormatVersion = 1;

std::vector<std::uint8_t> serialize_params(const ParameterSet& params);
ParameterSet deserialize_params(const std::vector<std::uint8_t>& bytes);

void save_params_file(const std::string& path, const ParameterSet& params);
ParameterSet load_params_file(const std::string& path);

/// FNV-1a hash of the serialized bytes, as a 16-hex-digit fingerprint.
std::string params_fingerprint(const ParameterSet& params);

} // namespace prb::nn

#endif // PRB_PARAMS_IO_HPP
