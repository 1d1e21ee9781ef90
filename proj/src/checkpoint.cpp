#include "attnrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "attnrec/errors.hpp"

namespace attnrec {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

void write_checkpoint(const std::string& path, std::string_view magic, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  out.write(reinterpret_cast<const char*>(ckpt.shape.data()), sizeof(std::uint32_t) * ckpt.shape.size());
  out.write(reinterpret_cast<const char*>(ckpt.values.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(ckpt.values.size())));
  if (!out) throw DataError("write failed: " + path);
}

namespace detail {

std::string read_checkpoint_bytes(const std::string& path, std::string_view magic, Checkpoint& ckpt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  std::string bytes = os.str();
  if (bytes.size() < magic.size() + 12 || std::string_view(bytes).substr(0, magic.size()) != magic) {
    throw DataError(path + ": not a " + std::string(magic) + " checkpoint");
  }
  std::memcpy(ckpt.shape.data(), bytes.data() + magic.size(), 12);
  return bytes;
}

void decode_checkpoint_values(const std::string& bytes, std::size_t offset, std::size_t count,
                              const std::string& path, Checkpoint& ckpt) {
  if (bytes.size() != offset + count * sizeof(double)) {
    throw DataError(path + ": expected " + std::to_string(count) + " parameters, file holds " +
                    std::to_string((bytes.size() - offset) / sizeof(double)));
  }
  ckpt.values.resize(static_cast<Eigen::Index>(count));
  std::memcpy(ckpt.values.data(), bytes.data() + offset, count * sizeof(double));
  require_finite(ckpt.values, path.c_str());
}

}  // namespace detail

}  // namespace attnrec
