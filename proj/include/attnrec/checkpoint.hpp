#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "attnrec/numkit.hpp"

namespace attnrec {

// Little-endian binary parameter file: 6-byte magic, three uint32 shape
// fields, then float64 values.
struct Checkpoint {
  std::array<std::uint32_t, 3> shape{};
  VectorXr values;
};

void write_checkpoint(const std::string& path, std::string_view magic, const Checkpoint& ckpt);

/// `expected_values(shape)` gives the value count implied by the header.
/// Throws DataError on wrong magic, truncation or trailing bytes.
template <typename CountFn>
Checkpoint read_checkpoint(const std::string& path, std::string_view magic, CountFn&& expected_values);

namespace detail {
std::string read_checkpoint_bytes(const std::string& path, std::string_view magic, Checkpoint& ckpt);
void decode_checkpoint_values(const std::string& bytes, std::size_t offset, std::size_t count,
                              const std::string& path, Checkpoint& ckpt);
}  // namespace detail

template <typename CountFn>
Checkpoint read_checkpoint(const std::string& path, std::string_view magic, CountFn&& expected_values) {
  Checkpoint ckpt;
  const std::string bytes = detail::read_checkpoint_bytes(path, magic, ckpt);
  const std::size_t count = expected_values(ckpt.shape);
  detail::decode_checkpoint_values(bytes, magic.size() + 12, count, path, ckpt);
  return ckpt;
}

}  // namespace attnrec
