// Copyright 2026 The dtdtrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "dtd/core.hpp"

namespace dtd {

// ---------------------------------------------------------------------------
// PGM (binary P5, maxval <= 255) — the canonical fixture format.
// ---------------------------------------------------------------------------

namespace detail {

// Reads one PNM header token, skipping whitespace and '#' comment lines.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace detail

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableFileError("cannot open: " + path);
  if (detail::pnm_token(in) != "P5") throw UnreadableFileError("not a binary PGM (P5): " + path);
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::pnm_token(in));
    h = std::stoi(detail::pnm_token(in));
    maxval = std::stoi(detail::pnm_token(in));
  } catch (const std::exception&) {
    throw UnreadableFileError("corrupt PGM header: " + path);
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw UnreadableFileError("unsupported PGM header (need 8-bit): " + path);
  }
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw UnreadableFileError("truncated PGM data: " + path);
  }
  GrayImage img(w, h);
  const float inv = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] * inv;
  return img;
}

inline void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// PNG (convenience loader; anything libpng can convert to 8-bit gray)
// ---------------------------------------------------------------------------

inline GrayImage read_png(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw UnreadableFileError("cannot read PNG: " + path + ": " + png.message);
  }
  png.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw UnreadableFileError("cannot decode PNG: " + path + ": " + msg);
  }
  GrayImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = raw[i] / 255.0f;
  return img;
}

inline GrayImage read_image(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png(path);
  throw UnreadableFileError("unsupported image extension: " + path);
}

// ---------------------------------------------------------------------------
// Directory frame source — lexicographic name order, lazy loading.
// ---------------------------------------------------------------------------

inline std::vector<std::string> list_frame_files(const std::string& dir) {
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm" || ext == ".png") files.push_back(entry.path().string());
  }
  if (ec) throw UnreadableFileError("cannot list directory: " + dir);
  std::sort(files.begin(), files.end());
  return files;
}

class DirectoryFrameSource final : public FrameSource {
 public:
  explicit DirectoryFrameSource(const std::string& dir) : files_(list_frame_files(dir)) {}

  std::size_t size() const { return files_.size(); }

  std::optional<GrayImage> next() override {
    if (index_ >= files_.size()) return std::nullopt;
    GrayImage img = read_image(files_[index_++]);
    if (width_ == 0) {
      width_ = img.width;
      height_ = img.height;
    } else if (img.width != width_ || img.height != height_) {
      throw MixedDimensionsError("frame dimensions differ: " + files_[index_ - 1]);
    }
    return img;
  }

 private:
  std::vector<std::string> files_;
  std::size_t index_ = 0;
  int width_ = 0;
  int height_ = 0;
};

inline DirectoryFrameSource load_frames(const std::string& dir) { return DirectoryFrameSource(dir); }

// ---------------------------------------------------------------------------
// Annotation (box outline + landmark crosses) for --dump-annotated
// ---------------------------------------------------------------------------

inline void draw_annotations(GrayImage& img, const BoundingBox& box, const LandmarkSet& lm) {
  auto put = [&](int x, int y, float v) {
    if (x >= 0 && x < img.width && y >= 0 && y < img.height) img.at(x, y) = v;
  };
  const int x0 = static_cast<int>(std::lround(box.x));
  const int y0 = static_cast<int>(std::lround(box.y));
  const int x1 = static_cast<int>(std::lround(box.right()));
  const int y1 = static_cast<int>(std::lround(box.bottom()));
  for (int x = x0; x <= x1; ++x) {
    put(x, y0, 1.0f);
    put(x, y1, 1.0f);
  }
  for (int y = y0; y <= y1; ++y) {
    put(x0, y, 1.0f);
    put(x1, y, 1.0f);
  }
  for (int i = 0; i < kNumLandmarks; ++i) {
    const int cx = static_cast<int>(std::lround(lm[i].x));
    const int cy = static_cast<int>(std::lround(lm[i].y));
    for (int d = -3; d <= 3; ++d) {
      put(cx + d, cy, 0.0f);
      put(cx, cy + d, 0.0f);
    }
  }
}

}  // namespace dtd
