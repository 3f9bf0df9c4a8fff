#pragma once

#include "temb/geometry.hpp"
#include "temb/terminal.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace temb {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kPointMagic[4] = {'T', 'P', 'T', 'S'};
inline constexpr std::uint32_t kPointVersion = 1;
inline constexpr char kIndexMagic[4] = {'T', 'E', 'M', 'B'};
inline constexpr std::uint32_t kIndexVersion = 1;

// Binary (magic, u32 version, u64 n, u64 d, n*d f64 LE, point-major) or
// CSV with one point per line. Columns of the result are the points.
Matrix read_matrix(const std::string& path);
PointSet read_points(const std::string& path);
void write_matrix(const std::string& path, const Matrix& columns);

// Flat "key = value" lines; '#' starts a comment.
void apply_config_text(TerminalConfig& config, const std::string& text);
void apply_config_file(TerminalConfig& config, const std::string& path);
void apply_config_value(TerminalConfig& config, const std::string& key, const std::string& value);
std::string config_text(const TerminalConfig& config);

// Settings for the hashing backends sized for probe benchmarks.
void apply_lsh_preset(TerminalConfig& config);

std::uint64_t crc64(const void* data, std::size_t size);

void save_index(const TerminalIndex& index, std::ostream& out);
void save_index(const TerminalIndex& index, const std::string& path);
TerminalIndex load_index(std::istream& in);
TerminalIndex load_index(const std::string& path);

}  // namespace temb
