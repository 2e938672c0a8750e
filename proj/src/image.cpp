/* Copyright 2026 The PRF Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "prf/image.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "pnm.hpp"
#include "prf/common.hpp"

namespace prf {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int parse_positive(const std::string& tok, const std::string& source) {
  int v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v <= 0) {
    throw DataError(source + ": malformed header field '" + tok + "'");
  }
  return v;
}

}  // namespace

PnmHeader read_pnm_header(std::istream& in, const std::string& source) {
  PnmHeader h;
  h.magic = next_token(in);
  h.width = parse_positive(next_token(in), source);
  h.height = parse_positive(next_token(in), source);
  // next_token consumed exactly one whitespace byte after maxval.
  h.maxval = parse_positive(next_token(in), source);
  if (!in) throw DataError(source + ": truncated header");
  return h;
}

}  // namespace detail

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  const auto h = detail::read_pnm_header(in, path.string());
  if (h.magic != "P6" || h.maxval > 255) {
    throw DataError(path.string() + ": expected 8-bit binary P6");
  }
  RgbImage img(h.height, h.width);
  std::vector<unsigned char> bytes(img.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError(path.string() + ": truncated raster");
  }
  const double scale = 1.0 / h.maxval;
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] * scale;
  return img;
}

}  // namespace prf
