#pragma once

// Parameter checkpoint file, version 1. All integers and floats little-endian.
//
//   bytes 0..7    magic "DPNTCKPT"
//   uint32        format version (1)
//   uint32        agents (number of policy slices)
//   uint32        layer count + 1 (number of dims)
//   uint32 x d    layer widths, input first
//   uint64        value count
//   float64 x N   joint parameter vector

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "depaint/policy.hpp"

namespace depaint {

inline constexpr std::array<char, 8> kCheckpointMagic{'D', 'P', 'N', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put_le(std::string& out, T value)
{
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <class T>
T get_le(const std::string& in, std::size_t& pos)
{
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint truncated");
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline std::string encode_checkpoint(const JointParams& p)
{
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.agents));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.dims.size()));
  for (Eigen::Index d : p.shape.dims) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.values.size()));
  for (Eigen::Index i = 0; i < p.values.size(); ++i) detail::put_le<double>(out, p.values(i));
  return out;
}

inline JointParams decode_checkpoint(const std::string& bytes)
{
  if (bytes.size() < kCheckpointMagic.size() || std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic)");
  std::size_t pos = kCheckpointMagic.size();
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto agents = detail::get_le<std::uint32_t>(bytes, pos);
  const auto ndims = detail::get_le<std::uint32_t>(bytes, pos);
  if (ndims < 2 || ndims > 64) throw std::runtime_error("checkpoint has an invalid layer count");
  MlpShape shape;
  for (std::uint32_t d = 0; d < ndims; ++d) shape.dims.push_back(detail::get_le<std::uint32_t>(bytes, pos));
  const auto count = detail::get_le<std::uint64_t>(bytes, pos);
  if (count != static_cast<std::uint64_t>(shape.param_count()) * agents) throw std::runtime_error("checkpoint value count does not match its header");
  if (bytes.size() - pos != count * sizeof(double)) throw std::runtime_error("checkpoint payload has the wrong length");
  ParamVector values(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = detail::get_le<double>(bytes, pos);
  return {std::move(shape), agents, std::move(values)};
}

inline void save_checkpoint(const std::string& path, const JointParams& p)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "' for writing");
  const std::string bytes = encode_checkpoint(p);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

inline JointParams load_checkpoint(const std::string& path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

/// A run's final parameters: one joint copy per agent, stored back to back.
inline void save_checkpoints(const std::string& path, std::span<const JointParams> per_agent)
{
  std::string all;
  for (const auto& p : per_agent) {
    const std::string one = encode_checkpoint(p);
    detail::put_le<std::uint64_t>(all, one.size());
    all += one;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "' for writing");
  f.write(all.data(), static_cast<std::streamsize>(all.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

inline std::vector<JointParams> load_checkpoints(const std::string& path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::vector<JointParams> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto len = detail::get_le<std::uint64_t>(bytes, pos);
    if (len > bytes.size() - pos) throw std::runtime_error("checkpoint truncated");
    out.push_back(decode_checkpoint(bytes.substr(pos, len)));
    pos += len;
  }
  if (out.empty()) throw std::runtime_error("checkpoint '" + path + "' is empty");
  return out;
}

}  // namespace depaint
