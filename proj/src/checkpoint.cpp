#include "sketchedit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <zlib.h>

#include "sketchedit/error.hpp"
#include "sketchedit/image_io.hpp"

namespace sketchedit {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'E', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

std::string dtype_name(torch::Dtype t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    default: throw CheckpointError("unsupported array dtype");
  }
}

torch::Dtype dtype_from_name(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  if (s == "i64") return torch::kInt64;
  throw CheckpointError("unknown array dtype '" + s + "'");
}

std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("archive truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  std::vector<std::uint8_t> data;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [name, tensor] : archive.arrays) {
    const auto t = tensor.detach().contiguous().cpu();
    const auto nbytes = static_cast<std::size_t>(t.numel()) * t.element_size();
    const auto* p = static_cast<const std::uint8_t*>(t.data_ptr());
    index.push_back({{"name", name},
                     {"dtype", dtype_name(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", data.size()},
                     {"nbytes", nbytes},
                     {"crc32", crc(p, nbytes)}});
    data.insert(data.end(), p, p + nbytes);
  }
  nlohmann::json header = {{"format_version", kCheckpointFormatVersion},
                           {"manifest", archive.manifest},
                           {"arrays", std::move(index)},
                           {"data_bytes", data.size()},
                           {"data_crc32", crc(data.data(), data.size())}};
  const std::string header_text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointFormatVersion);
  put<std::uint64_t>(out, header_text.size());
  out.insert(out.end(), header_text.begin(), header_text.end());
  out.insert(out.end(), data.begin(), data.end());
  write_file_atomic(path, out.data(), out.size());
}

Archive read_archive(const std::filesystem::path& path) {
  std::vector<std::uint8_t> in;
  try {
    in = read_file(path);
  } catch (const DataError&) {
    throw CheckpointError("cannot open checkpoint " + path.string());
  }
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint archive");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(in, pos);
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointFormatVersion) + ")");
  }
  const auto header_len = take<std::uint64_t>(in, pos);
  if (header_len > in.size() - pos) throw CheckpointError("archive truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.begin() + static_cast<std::ptrdiff_t>(pos),
                                   in.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt archive header: ") + e.what());
  }
  pos += header_len;

  Archive archive;
  try {
    if (header.at("format_version").get<std::uint32_t>() != version) {
      throw CheckpointError("archive header version disagrees with preamble");
    }
    const auto data_bytes = header.at("data_bytes").get<std::size_t>();
    if (in.size() - pos != data_bytes) throw CheckpointError("archive data section has the wrong length");
    const std::uint8_t* data = in.data() + pos;
    if (crc(data, data_bytes) != header.at("data_crc32").get<std::uint32_t>()) {
      throw CheckpointError("archive data checksum mismatch");
    }
    archive.manifest = header.at("manifest");
    for (const auto& entry : header.at("arrays")) {
      const auto name = entry.at("name").get<std::string>();
      const auto dtype = dtype_from_name(entry.at("dtype").get<std::string>());
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("nbytes").get<std::size_t>();
      auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
      if (static_cast<std::size_t>(t.numel()) * t.element_size() != nbytes || offset + nbytes > data_bytes) {
        throw CheckpointError("array " + name + " has inconsistent size");
      }
      if (crc(data + offset, nbytes) != entry.at("crc32").get<std::uint32_t>()) {
        throw CheckpointError("array " + name + " checksum mismatch");
      }
      std::memcpy(t.data_ptr(), data + offset, nbytes);
      archive.arrays.emplace(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt archive header: ") + e.what());
  }
  return archive;
}

}  // namespace sketchedit
