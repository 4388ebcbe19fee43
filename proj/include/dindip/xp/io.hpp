#pragma once

#include "dindip/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dindip::xp {

/// 8-bit grayscale image, row-major.
struct GrayImage {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Binary PGM (P5, maxval 255). Comments in the header are skipped.
GrayImage read_pgm(const std::string& path);
GrayImage decode_pgm(const std::string& bytes);
std::string encode_pgm(const GrayImage& image);
void write_pgm(const std::string& path, const GrayImage& image);

/// Signal vectors hold column-major side x side grids, matching the blur operator.
VectorX<double> image_to_signal(const GrayImage& image);
/// Rounds to nearest and clamps to [0, 255].
GrayImage signal_to_image(const VectorX<double>& signal, Index side);

/// Deterministic side x side test scene with values in [0, 255].
GrayImage phantom_image(Index side);

/// Parsed comma-separated table; lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index column(const std::string& name) const;
  std::vector<double> numeric_column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace dindip::xp
