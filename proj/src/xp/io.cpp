#include "dindip/xp/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dindip::xp {

namespace {

/// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#')
    tok += bytes[pos++];
  if (tok.empty()) throw ConfigError("pgm: truncated header");
  return tok;
}

Index header_number(const std::string& bytes, std::size_t& pos, const char* what) {
  const std::string tok = header_token(bytes, pos);
  if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw ConfigError(std::string("pgm: invalid ") + what + " '" + tok + "'");
  return static_cast<Index>(std::stoll(tok));
}

}  // namespace

GrayImage decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (header_token(bytes, pos) != "P5") throw ConfigError("pgm: only binary P5 images are supported");
  GrayImage img;
  img.width = header_number(bytes, pos, "width");
  img.height = header_number(bytes, pos, "height");
  const Index maxval = header_number(bytes, pos, "maxval");
  if (img.width < 1 || img.height < 1) throw ConfigError("pgm: empty image");
  if (maxval != 255) throw ConfigError("pgm: maxval must be 255");
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw ConfigError("pgm: missing raster separator");
  ++pos;
  const auto count = static_cast<std::size_t>(img.width * img.height);
  if (bytes.size() - pos < count) throw ConfigError("pgm: truncated raster");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
  return img;
}

std::string encode_pgm(const GrayImage& image) {
  require_dims(static_cast<Index>(image.pixels.size()) == image.width * image.height,
               "pgm: pixel count does not match dimensions");
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage read_pgm(const std::string& path) { return decode_pgm(read_text_file(path)); }

void write_pgm(const std::string& path, const GrayImage& image) { write_text_file(path, encode_pgm(image)); }

VectorX<double> image_to_signal(const GrayImage& image) {
  require_dims(image.width == image.height, "image must be square");
  const Index side = image.width;
  VectorX<double> x(side * side);
  // Pixel (row r, column c) goes to grid entry (r, c) of the column-major grid.
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c) x[c * side + r] = image.pixels[static_cast<std::size_t>(r * side + c)];
  return x;
}

GrayImage signal_to_image(const VectorX<double>& signal, Index side) {
  require_dims(signal.size() == side * side, "signal length must be side^2");
  GrayImage img;
  img.width = img.height = side;
  img.pixels.resize(static_cast<std::size_t>(side * side));
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c) {
      const double v = signal[c * side + r];
      const double clamped = std::isfinite(v) ? std::clamp(std::round(v), 0.0, 255.0) : 0.0;
      img.pixels[static_cast<std::size_t>(r * side + c)] = static_cast<std::uint8_t>(clamped);
    }
  return img;
}

GrayImage phantom_image(Index side) {
  require_dims(side >= 2, "phantom needs side >= 2");
  GrayImage img;
  img.width = img.height = side;
  img.pixels.resize(static_cast<std::size_t>(side * side));
  const double s = static_cast<double>(side);
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c) {
      const double y = (r + 0.5) / s, x = (c + 0.5) / s;
      double v = 40.0 + 60.0 * x;  // background ramp
      const double d1 = std::hypot(x - 0.35, y - 0.4);
      if (d1 < 0.22) v = 210.0;
      if (d1 < 0.09) v = 120.0;
      if (x > 0.6 && x < 0.85 && y > 0.55 && y < 0.85) v = 240.0;
      if (std::abs(x - y) < 0.03 && x > 0.1 && x < 0.5 && y > 0.5) v = 15.0;
      img.pixels[static_cast<std::size_t>(r * side + c)] = static_cast<std::uint8_t>(v);
    }
  return img;
}

Index CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("csv: missing column '" + name + "'");
  return static_cast<Index>(it - header.begin());
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  const auto j = static_cast<std::size_t>(column(name));
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(std::stod(row.at(j)));
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != table.header.size()) throw ConfigError("csv: row width does not match header");
      table.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw ConfigError("csv: no header");
  return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text_file(path)); }

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dindip::xp
