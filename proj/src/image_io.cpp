#include "sketchedit/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace sketchedit {

namespace {

cv::Mat decode_mat(const Bytes& encoded) {
  if (encoded.empty()) throw DataError("empty image payload");
  cv::Mat mat;
  try {
    mat = cv::imdecode(cv::Mat(1, static_cast<int>(encoded.size()), CV_8UC1,
                               const_cast<std::uint8_t*>(encoded.data())),
                       cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DataError(std::string("image decode failed: ") + e.what());
  }
  if (mat.empty()) throw DataError("unsupported or corrupt image data");
  return mat;
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

Bytes encode_mat(const cv::Mat& mat) {
  std::vector<uchar> buf;
  if (!cv::imencode(".png", mat, buf)) throw DataError("PNG encoding failed");
  return Bytes(buf.begin(), buf.end());
}

}  // namespace

Image decode_image(const Bytes& encoded) {
  cv::Mat bgr = decode_mat(encoded);
  if (bgr.rows < kMinImageSide || bgr.cols < kMinImageSide) {
    throw DataError("image smaller than " + std::to_string(kMinImageSide) + " px");
  }
  Image img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = row[x][2 - c] / 255.0f;
    }
  }
  return img;
}

SketchMap decode_sketch(const Bytes& encoded) {
  cv::Mat bgr = decode_mat(encoded);
  cv::Mat gray;
  cv::cvtColor(bgr, gray, cv::COLOR_BGR2GRAY);
  SketchMap out(gray.rows, gray.cols, true);
  for (int y = 0; y < gray.rows; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) out.at(y, x) = row[x] >= 128 ? 1.0f : 0.0f;
  }
  return out;
}

Bytes encode_png(const Image& img) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) row[x][2 - c] = quantize(img.at(y, x, c));
    }
  }
  return encode_mat(bgr);
}

Bytes encode_png(const Raster<1>& gray) {
  cv::Mat mat(gray.height(), gray.width(), CV_8UC1);
  for (int y = 0; y < gray.height(); ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.width(); ++x) row[x] = quantize(gray.at(y, x));
  }
  return encode_mat(mat);
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Image load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

SketchMap load_sketch(const std::filesystem::path& path) {
  try {
    return decode_sketch(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw DataError("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

void save_image(const Image& img, const std::filesystem::path& path) {
  const Bytes png = encode_png(img);
  write_file_atomic(path, png.data(), png.size());
}

void save_gray(const Raster<1>& gray, const std::filesystem::path& path) {
  const Bytes png = encode_png(gray);
  write_file_atomic(path, png.data(), png.size());
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sketchedit
