#pragma once

// File formats.
//
// Field file (".field"), bit-exact:
//
//   LFM1\n
//   width=<int>\n
//   height=<int>\n
//   spacing=<decimal>\n
//   components=<1|2>\n
//   data:\n
//   <width*height*components little-endian IEEE-754 float32, row-major,
//    component-interleaved (ux, uy per pixel)>
//
// PGM: netpbm P2 (ASCII) or P5 (binary, 8- or 16-bit big-endian), maxval <= 65535.
// Intensities are mapped to [0,1] on read; writes are P5 with maxval 255,
// rounding to nearest with ties toward zero.
//
// Match configuration: "key = value" lines, '#' comments, nested blocks:
//
//   n_timesteps = 8
//   sim_weight = 50
//   kernel {
//     family = sum
//     kernel {
//       family = symmetrized
//       c = 0.5
//       kernel {
//         family = gaussian
//         sigma = 25
//       }
//     }
//     kernel {
//       family = gaussian
//       sigma = 7
//     }
//   }
//
// Partition kernels hold `part { weights_file = ... kernel { ... } }` blocks.
// Unknown keys are errors.

#include <filesystem>
#include <string>
#include <string_view>

#include "lddm/grid.hpp"
#include "lddm/matching.hpp"

namespace lddm::io {

Image read_pgm(const std::filesystem::path &path, double spacing = 1.0);
Image parse_pgm(std::string_view bytes, double spacing = 1.0);
void write_pgm(const std::filesystem::path &path, const Image &img);
std::string encode_pgm(const Image &img);

// read_field requires components=2, read_scalar_field components=1;
// otherwise Error(header_mismatch).
VectorField read_field(const std::filesystem::path &path);
Image read_scalar_field(const std::filesystem::path &path);
VectorField parse_field(std::string_view bytes);
Image parse_scalar_field(std::string_view bytes);
void write_field(const std::filesystem::path &path, const VectorField &field);
void write_field(const std::filesystem::path &path, const Image &img);
std::string encode_field(const VectorField &field);
std::string encode_field(const Image &img);

// Reads a PGM or a scalar field file (by extension) and thresholds at 0.5.
Mask read_mask(const std::filesystem::path &path);

// Paths inside the file (mask_file, weights_file, ...) are taken relative to
// the working directory.
MatchConfig read_config(const std::filesystem::path &path);
MatchConfig parse_config(std::string_view text);

std::string read_file(const std::filesystem::path &path);
// Writes atomically enough for our purposes: to a sibling temp file, then renames.
void write_file(const std::filesystem::path &path, std::string_view bytes);

// Shortest round-trip decimal representation, locale independent.
std::string format_double(double value);

} // namespace lddm::io
